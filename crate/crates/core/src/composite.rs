//! Interconnected subsystems `λE_k x_k = A_k x_k + B_k u_k`,
//! `y_k = C_k x_k + D_k u_k`, coupled by `y = J11 u + J12 x_A`,
//! `0 = J21 u + J22 x_A`, and the reduced matrix assembled per subsystem.

use std::ops::Range;

use crate::error::{Error, Result, mismatch};
use crate::generalized::{DenseReduction, HForm, Reduction, SHIFT_CONDITION_LIMIT, Shifted, ShiftedOperator};
use crate::linalg::{C64, CMat, CVec, CscMatrix, FactorOptions, Factorization, Matrix, factor_dense};
use crate::pencil::{ProjectionPencil, SubspacePair};

/// One dynamical block with equal input and output counts.
#[derive(Debug, Clone)]
pub struct Subsystem {
    pencil: ProjectionPencil,
    b: CMat,
    c: CMat,
    d: CMat,
}

impl Subsystem {
    pub fn new(e: CMat, a: CMat, b: CMat, c: CMat, d: CMat) -> Result<Self> {
        let pencil = ProjectionPencil::new(Matrix::Dense(e), Matrix::Dense(a))?;
        let s = pencil.dim();
        let io = d.nrows();
        if d.ncols() != io || b.shape() != (s, io) || c.shape() != (io, s) {
            return Err(mismatch(format!(
                "subsystem with {s} states: B {:?}, C {:?}, D {:?} must be {s}x{io}, {io}x{s}, {io}x{io}",
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Subsystem { pencil, b, c, d })
    }

    pub fn states(&self) -> usize {
        self.pencil.dim()
    }

    pub fn io(&self) -> usize {
        self.d.nrows()
    }

    pub fn pencil(&self) -> &ProjectionPencil {
        &self.pencil
    }

    pub fn e(&self) -> &CMat {
        self.pencil.e_dense()
    }

    pub fn a(&self) -> &CMat {
        self.pencil.a_dense()
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn c(&self) -> &CMat {
        &self.c
    }

    pub fn d(&self) -> &CMat {
        &self.d
    }
}

/// Static coupling blocks.
#[derive(Debug, Clone)]
pub struct Interconnection {
    pub j11: CMat,
    pub j12: CMat,
    pub j21: CMat,
    pub j22: CMat,
}

impl Interconnection {
    pub fn new(j11: CMat, j12: CMat, j21: CMat, j22: CMat) -> Result<Self> {
        let io = j11.nrows();
        let alg = j22.nrows();
        if j11.ncols() != io || j22.ncols() != alg || j12.shape() != (io, alg) || j21.shape() != (alg, io) {
            return Err(mismatch(format!(
                "interconnection blocks {:?} {:?} {:?} {:?} are inconsistent",
                j11.shape(),
                j12.shape(),
                j21.shape(),
                j22.shape()
            )));
        }
        Ok(Interconnection { j11, j12, j21, j22 })
    }

    pub fn io(&self) -> usize {
        self.j11.nrows()
    }

    pub fn algebraic(&self) -> usize {
        self.j22.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct CompositeModel {
    subsystems: Vec<Subsystem>,
    interconnection: Interconnection,
    state_offsets: Vec<usize>,
    io_offsets: Vec<usize>,
}

impl CompositeModel {
    pub fn new(subsystems: Vec<Subsystem>, interconnection: Interconnection) -> Result<Self> {
        let mut state_offsets = vec![0];
        let mut io_offsets = vec![0];
        for s in &subsystems {
            state_offsets.push(state_offsets.last().unwrap() + s.states());
            io_offsets.push(io_offsets.last().unwrap() + s.io());
        }
        if *io_offsets.last().unwrap() != interconnection.io() {
            return Err(mismatch(format!(
                "subsystem io dims sum to {} but J11 is {}x{}",
                io_offsets.last().unwrap(),
                interconnection.io(),
                interconnection.io()
            )));
        }
        Ok(CompositeModel { subsystems, interconnection, state_offsets, io_offsets })
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn interconnection(&self) -> &Interconnection {
        &self.interconnection
    }

    pub fn total_states(&self) -> usize {
        *self.state_offsets.last().unwrap()
    }

    pub fn total_io(&self) -> usize {
        *self.io_offsets.last().unwrap()
    }

    /// Order of the monolithic pencil.
    pub fn dim(&self) -> usize {
        self.total_states() + 2 * self.total_io() + self.interconnection.algebraic()
    }

    /// Rows of subsystem `k`'s states in the monolithic ordering.
    pub fn state_range(&self, k: usize) -> Range<usize> {
        self.state_offsets[k]..self.state_offsets[k + 1]
    }

    pub fn io_range(&self, k: usize) -> Range<usize> {
        self.io_offsets[k]..self.io_offsets[k + 1]
    }

    /// Offsets of the `x_I`, `x_O` and `x_A` groups.
    pub fn group_offsets(&self) -> (usize, usize, usize) {
        let s = self.total_states();
        let io = self.total_io();
        (s, s + io, s + 2 * io)
    }
}

/// Pencil over `[x_M; x_I; x_O; x_A]`:
/// rows `[A B 0 0]`, `[C D −I 0]`, `[0 −J11 I −J12]`, `[0 −J21 0 −J22]`.
pub fn assemble_monolithic(model: &CompositeModel) -> Result<ProjectionPencil> {
    let m = model.dim();
    let (oi, oo, oa) = model.group_offsets();
    let io = model.total_io();
    let put = |t: &mut Vec<(usize, usize, C64)>, r0: usize, c0: usize, blk: &CMat, sign: f64| {
        for j in 0..blk.ncols() {
            for i in 0..blk.nrows() {
                let v = blk[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    t.push((r0 + i, c0 + j, v * sign));
                }
            }
        }
    };
    let mut e = Vec::new();
    let mut a = Vec::new();
    for (k, s) in model.subsystems.iter().enumerate() {
        let r = model.state_range(k);
        let q = model.io_range(k);
        put(&mut e, r.start, r.start, s.e(), 1.0);
        put(&mut a, r.start, r.start, s.a(), 1.0);
        put(&mut a, r.start, oi + q.start, &s.b, 1.0);
        put(&mut a, oi + q.start, r.start, &s.c, 1.0);
        put(&mut a, oi + q.start, oi + q.start, &s.d, 1.0);
    }
    for i in 0..io {
        a.push((oi + i, oo + i, C64::new(-1.0, 0.0)));
        a.push((oo + i, oo + i, C64::new(1.0, 0.0)));
    }
    let ic = &model.interconnection;
    put(&mut a, oo, oi, &ic.j11, -1.0);
    put(&mut a, oo, oa, &ic.j12, -1.0);
    put(&mut a, oa, oi, &ic.j21, -1.0);
    put(&mut a, oa, oa, &ic.j22, -1.0);
    let e = CscMatrix::from_triplets(m, m, &e)?;
    let a = CscMatrix::from_triplets(m, m, &a)?;
    ProjectionPencil::new(Matrix::Sparse(e), Matrix::Sparse(a))
}

/// Reduced matrices and frequency-dependent corrections of one subsystem.
#[derive(Debug, Clone)]
pub struct SubsystemHTerms {
    pub a_r: CMat,
    pub b_r: CMat,
    pub c_r: CMat,
    pub h_a: CMat,
    pub h_b: CMat,
    pub h_c: CMat,
    pub h_d: CMat,
    /// `P N P [Aℰ, B]`, kept for eigenvector recovery.
    projected_solve: CMat,
}

/// All seven matrices at `λ` from one factorization of the subsystem's
/// shifted operator (anticommutator form).
pub fn subsystem_h_terms(sub: &Subsystem, pair: &SubspacePair, lambda: C64) -> Result<SubsystemHTerms> {
    let s = sub.states();
    if pair.order() != s {
        return Err(mismatch(format!("pair of order {} for subsystem with {s} states", pair.order())));
    }
    let n = pair.dim();
    let io = sub.io();
    let e = sub.e();
    let a = sub.a();
    let er = e * pair.right();
    let el = e * pair.left();
    let project = |x: &CMat| x - &er * el.ad_mul(x);
    let ar = a * pair.right();
    let mut rhs = CMat::zeros(s, n + io);
    rhs.columns_mut(0, n).copy_from(&ar);
    rhs.columns_mut(n, io).copy_from(&sub.b);
    let op = ShiftedOperator::new(sub.pencil(), pair, lambda, HForm::Anticommutator)?;
    let px = project(&op.solve(&project(&rhs))?);
    let fa = pair.left().ad_mul(a);
    let fpx = &fa * &px;
    let cpx = &sub.c * &px;
    Ok(SubsystemHTerms {
        a_r: pair.left().ad_mul(&ar),
        b_r: pair.left().ad_mul(&sub.b),
        c_r: &sub.c * pair.right(),
        h_a: fpx.columns(0, n).into_owned(),
        h_b: fpx.columns(n, io).into_owned(),
        h_c: cpx.columns(0, n).into_owned(),
        h_d: cpx.columns(n, io).into_owned(),
        projected_solve: px,
    })
}

/// Composite evaluation at one shift.
#[derive(Debug, Clone)]
pub struct CompositeShift {
    pub lambda: C64,
    pub terms: Vec<SubsystemHTerms>,
    /// `A_r + H(λ)`.
    pub reduced: CMat,
    bordered: Factorization,
    c_total: CMat,
}

fn check_pairs(model: &CompositeModel, pairs: &[SubspacePair]) -> Result<()> {
    if pairs.len() != model.subsystems.len() {
        return Err(mismatch(format!("{} pairs for {} subsystems", pairs.len(), model.subsystems.len())));
    }
    Ok(())
}

fn column_offsets(pairs: &[SubspacePair]) -> Vec<usize> {
    let mut off = vec![0];
    for p in pairs {
        off.push(off.last().unwrap() + p.dim());
    }
    off
}

/// `A_r + H_A + [(B_r + H_B) 0]·bordered⁻¹·[(C_r + H_C); 0]` with
/// `bordered = [[J11 − (D + H_D), J12], [J21, J22]]`.
pub fn composite_shift(model: &CompositeModel, pairs: &[SubspacePair], lambda: C64) -> Result<CompositeShift> {
    check_pairs(model, pairs)?;
    let terms: Vec<SubsystemHTerms> =
        model.subsystems.iter().zip(pairs).map(|(s, p)| subsystem_h_terms(s, p, lambda)).collect::<Result<_>>()?;
    let cols = column_offsets(pairs);
    let n = *cols.last().unwrap();
    let io = model.total_io();
    let alg = model.interconnection.algebraic();
    let mut reduced = CMat::zeros(n, n);
    let mut b_total = CMat::zeros(n, io + alg);
    let mut c_total = CMat::zeros(io + alg, n);
    let ic = &model.interconnection;
    let mut bordered = CMat::zeros(io + alg, io + alg);
    bordered.view_mut((0, 0), (io, io)).copy_from(&ic.j11);
    bordered.view_mut((0, io), (io, alg)).copy_from(&ic.j12);
    bordered.view_mut((io, 0), (alg, io)).copy_from(&ic.j21);
    bordered.view_mut((io, io), (alg, alg)).copy_from(&ic.j22);
    for (k, t) in terms.iter().enumerate() {
        let c = cols[k]..cols[k + 1];
        let q = model.io_range(k);
        let nk = c.len();
        let qk = q.len();
        reduced.view_mut((c.start, c.start), (nk, nk)).copy_from(&(&t.a_r + &t.h_a));
        b_total.view_mut((c.start, q.start), (nk, qk)).copy_from(&(&t.b_r + &t.h_b));
        c_total.view_mut((q.start, c.start), (qk, nk)).copy_from(&(&t.c_r + &t.h_c));
        let mut blk = bordered.view_mut((q.start, q.start), (qk, qk));
        blk -= model.subsystems[k].d() + &t.h_d;
    }
    let bordered = factor_dense(&bordered, &FactorOptions::default()).map_err(|_| Error::InterconnectionSingular { shift: lambda })?;
    if !(bordered.condition_estimate() <= SHIFT_CONDITION_LIMIT) {
        return Err(Error::InterconnectionSingular { shift: lambda });
    }
    if n > 0 {
        reduced += &b_total * bordered.solve(&c_total)?;
    }
    Ok(CompositeShift { lambda, terms, reduced, bordered, c_total })
}

/// `A_r + H(λ)` of the composite model.
pub fn composite_h(model: &CompositeModel, pairs: &[SubspacePair], lambda: C64) -> Result<CMat> {
    Ok(composite_shift(model, pairs, lambda)?.reduced)
}

impl CompositeShift {
    /// Right eigenvector `[x_M; x_I; x_O; x_A]` from reduced coordinates.
    pub fn recover_right(&self, model: &CompositeModel, pairs: &[SubspacePair], alpha: &CVec) -> Result<CVec> {
        let cols = column_offsets(pairs);
        if alpha.len() != *cols.last().unwrap() {
            return Err(mismatch("reduced vector length differs from the total subspace dimension"));
        }
        let io = model.total_io();
        let ua = self.bordered.solve(&CMat::from_column_slice(self.c_total.nrows(), 1, (&self.c_total * alpha).as_slice()))?;
        let (oi, oo, oa) = model.group_offsets();
        let mut v = CVec::zeros(model.dim());
        for (k, sub) in model.subsystems.iter().enumerate() {
            let c = cols[k]..cols[k + 1];
            let q = model.io_range(k);
            let r = model.state_range(k);
            let ak = alpha.rows(c.start, c.len()).into_owned();
            let uk = ua.view((q.start, 0), (q.len(), 1)).column(0).into_owned();
            let mut coeff = CVec::zeros(c.len() + q.len());
            coeff.rows_mut(0, c.len()).copy_from(&ak);
            coeff.rows_mut(c.len(), q.len()).copy_from(&uk);
            let x = pairs[k].right() * &ak + &self.terms[k].projected_solve * coeff;
            let y = sub.c() * &x + sub.d() * &uk;
            v.rows_mut(r.start, r.len()).copy_from(&x);
            v.rows_mut(oi + q.start, q.len()).copy_from(&uk);
            v.rows_mut(oo + q.start, q.len()).copy_from(&y);
        }
        let alg = model.interconnection.algebraic();
        v.rows_mut(oa, alg).copy_from(&ua.view((io, 0), (alg, 1)).column(0));
        Ok(v)
    }
}

/// Full right eigenvector at a converged `(λ, α)`.
pub fn recover_composite_eigenvector(model: &CompositeModel, pairs: &[SubspacePair], lambda: C64, alpha: &CVec) -> Result<CVec> {
    composite_shift(model, pairs, lambda)?.recover_right(model, pairs, alpha)
}

/// Per-subsystem pairs stacked into the monolithic ordering, with one row
/// block per column.
pub fn embed_pairs(model: &CompositeModel, pencil: &ProjectionPencil, pairs: &[SubspacePair]) -> Result<SubspacePair> {
    check_pairs(model, pairs)?;
    let cols = column_offsets(pairs);
    let n = *cols.last().unwrap();
    let m = model.dim();
    let mut right = CMat::zeros(m, n);
    let mut left = CMat::zeros(m, n);
    let mut blocks = Vec::with_capacity(n);
    for (k, p) in pairs.iter().enumerate() {
        let r = model.state_range(k);
        right.view_mut((r.start, cols[k]), (r.len(), p.dim())).copy_from(p.right());
        left.view_mut((r.start, cols[k]), (r.len(), p.dim())).copy_from(p.left());
        blocks.extend(std::iter::repeat_n(r.clone(), p.dim()));
    }
    SubspacePair::normalized(right, left, pencil.e())?.with_blocks(blocks)
}

/// [`Reduction`] evaluated subsystem by subsystem; left vectors come from
/// the monolithic pencil.
#[derive(Debug, Clone)]
pub struct CompositeReduction<'m> {
    model: &'m CompositeModel,
    pencil: ProjectionPencil,
    pairs: Vec<SubspacePair>,
    embedded: SubspacePair,
    base: CMat,
}

impl<'m> CompositeReduction<'m> {
    pub fn new(model: &'m CompositeModel, pairs: Vec<SubspacePair>) -> Result<Self> {
        let pencil = assemble_monolithic(model)?;
        Self::with_pencil(model, pencil, pairs)
    }

    fn with_pencil(model: &'m CompositeModel, pencil: ProjectionPencil, pairs: Vec<SubspacePair>) -> Result<Self> {
        let embedded = embed_pairs(model, &pencil, &pairs)?;
        let cols = column_offsets(&pairs);
        let n = *cols.last().unwrap();
        let mut base = CMat::zeros(n, n);
        for (k, (s, p)) in model.subsystems.iter().zip(&pairs).enumerate() {
            let ar = p.left().ad_mul(&(s.a() * p.right()));
            base.view_mut((cols[k], cols[k]), (p.dim(), p.dim())).copy_from(&ar);
        }
        Ok(CompositeReduction { model, pencil, pairs, embedded, base })
    }

    pub fn pairs(&self) -> &[SubspacePair] {
        &self.pairs
    }

    pub fn monolithic(&self) -> &ProjectionPencil {
        &self.pencil
    }
}

struct CompositeShifted<'a> {
    parent: &'a CompositeReduction<'a>,
    shift: CompositeShift,
}

impl<'m> Reduction for CompositeReduction<'m> {
    fn pencil(&self) -> &ProjectionPencil {
        &self.pencil
    }

    fn pair(&self) -> &SubspacePair {
        &self.embedded
    }

    fn base(&self) -> &CMat {
        &self.base
    }

    fn shifted(&self, lambda: C64) -> Result<Box<dyn Shifted + '_>> {
        let shift = composite_shift(self.model, &self.pairs, lambda)?;
        Ok(Box::new(CompositeShifted { parent: self, shift }))
    }

    fn with_pair(&self, pair: SubspacePair) -> Result<Self> {
        let cols = column_offsets(&self.pairs);
        let mut pairs = Vec::with_capacity(self.pairs.len());
        for (k, sub) in self.model.subsystems.iter().enumerate() {
            let r = self.model.state_range(k);
            let nk = cols[k + 1] - cols[k];
            let right = pair.right().view((r.start, cols[k]), (r.len(), nk)).into_owned();
            let left = pair.left().view((r.start, cols[k]), (r.len(), nk)).into_owned();
            pairs.push(SubspacePair::normalized(right, left, sub.pencil().e())?);
        }
        Self::with_pencil(self.model, self.pencil.clone(), pairs)
    }
}

impl Shifted for CompositeShifted<'_> {
    fn reduced(&self) -> Result<CMat> {
        Ok(self.shift.reduced.clone())
    }

    fn recover(&self, alpha: &CVec, beta: &CVec) -> Result<(CVec, CVec)> {
        let v = self.shift.recover_right(self.parent.model, &self.parent.pairs, alpha)?;
        let mono = DenseReduction::new(&self.parent.pencil, self.parent.embedded.clone(), HForm::Anticommutator)?;
        let (_, y) = mono.evaluate(self.shift.lambda)?.recover_parts(alpha, beta)?;
        let w = self.parent.embedded.left() * beta + y;
        Ok((v, w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generalized::h_general;
    use crate::linalg::{ONE, real_to_complex};
    use crate::pencil::oracle_full_spectrum;
    use nalgebra::DMatrix;

    fn dense(rows: usize, data: &[f64]) -> CMat {
        real_to_complex(&DMatrix::from_row_slice(rows, data.len() / rows, data))
    }

    fn feedback_model(j11: f64) -> CompositeModel {
        let sub = Subsystem::new(
            CMat::identity(2, 2),
            dense(2, &[-1.0, 2.0, -3.0, -0.5]),
            dense(2, &[0.0, 1.0]),
            dense(1, &[1.0, 0.0]),
            CMat::zeros(1, 1),
        )
        .unwrap();
        let ic = Interconnection::new(dense(1, &[j11]), CMat::zeros(1, 0), CMat::zeros(0, 1), CMat::zeros(0, 0)).unwrap();
        CompositeModel::new(vec![sub], ic).unwrap()
    }

    #[test]
    fn unconnected_subsystem_is_its_own_pencil() {
        let sub =
            Subsystem::new(CMat::identity(2, 2), dense(2, &[1.0, 2.0, 0.0, 3.0]), CMat::zeros(2, 0), CMat::zeros(0, 2), CMat::zeros(0, 0))
                .unwrap();
        let ic = Interconnection::new(CMat::zeros(0, 0), CMat::zeros(0, 0), CMat::zeros(0, 0), CMat::zeros(0, 0)).unwrap();
        let model = CompositeModel::new(vec![sub], ic).unwrap();
        let p = assemble_monolithic(&model).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.a_dense(), &dense(2, &[1.0, 2.0, 0.0, 3.0]));
    }

    #[test]
    fn unit_feedback_closes_the_loop() {
        // y = u with J11 = 1 means C x + D u = u, i.e. u = C x (D = 0): closed loop A + BC.
        let model = feedback_model(1.0);
        let p = assemble_monolithic(&model).unwrap();
        let closed = dense(2, &[-1.0, 2.0, -2.0, -0.5]);
        let spec = oracle_full_spectrum(&p).unwrap();
        let cl = crate::linalg::eig_dense(&closed).unwrap();
        assert_eq!(spec.modes.len(), 2);
        for l in &cl.values {
            let k = spec.nearest(*l).unwrap();
            assert!((spec.modes[k].lambda - l).norm() < 1e-12);
        }
    }

    #[test]
    fn complete_subspace_has_zero_corrections() {
        let model = feedback_model(2.0);
        let sub = &model.subsystems()[0];
        let pair = SubspacePair::normalized(CMat::identity(2, 2), CMat::identity(2, 2), sub.pencil().e()).unwrap();
        let t = subsystem_h_terms(sub, &pair, C64::new(0.3, 0.7)).unwrap();
        for h in [&t.h_a, &t.h_b, &t.h_c, &t.h_d] {
            assert!(h.norm() < 1e-15);
        }
        // A_r + B_r (J11 − D)⁻¹ C_r with J11 = 2.
        let m = composite_h(&model, &[pair], C64::new(0.3, 0.7)).unwrap();
        let expect = sub.a() + sub.b() * sub.c() * C64::new(0.5, 0.0);
        assert!((m - expect).norm() < 1e-14);
    }

    #[test]
    fn two_paths_agree_on_single_subsystem() {
        let model = feedback_model(2.0);
        let sub = &model.subsystems()[0];
        let r = dense(2, &[1.0, 0.3]);
        let pair = SubspacePair::normalized(r.clone(), r, sub.pencil().e()).unwrap();
        let lambda = C64::new(0.2, 1.1);
        let p = assemble_monolithic(&model).unwrap();
        let emb = embed_pairs(&model, &p, std::slice::from_ref(&pair)).unwrap();
        let mono = &emb.reduced(&p) + h_general(&p, &emb, lambda, HForm::Anticommutator).unwrap();
        let comp = composite_h(&model, std::slice::from_ref(&pair), lambda).unwrap();
        assert!((mono - comp).norm() < 1e-12);
        let alpha = CVec::from_element(1, ONE);
        let v = recover_composite_eigenvector(&model, &[pair], lambda, &alpha).unwrap();
        assert_eq!(v.len(), p.dim());
    }
}
