//! Shifted-operator solves through a sparse base `λE − A + ηφᴴ` and a small
//! capacitance matrix, so no dense `m×m` matrix is ever formed.

use std::cell::{Cell, OnceCell};

use crate::error::{Error, Result, mismatch};
use crate::generalized::{HForm, Reduction, SHIFT_CONDITION_LIMIT, Shifted};
use crate::linalg::{C64, CMat, CVec, CscMatrix, FactorOptions, Factorization, factor_dense, factor_sparse, norm_inf};
use crate::pencil::{ProjectionPencil, SubspacePair};

/// Attempts beyond the unregularized one before giving up.
pub const DEFAULT_REGULARIZER_ATTEMPTS: usize = 5;

/// Base matrices above this condition estimate are regularized.
pub const BASE_CONDITION_LIMIT: f64 = 1e12;

/// Relative residual below which refinement stops.
pub const REFINEMENT_THRESHOLD: f64 = 64.0 * f64::EPSILON;

/// Refinement passes per solve; passes also stop once the residual fails
/// to halve.
pub const MAX_REFINEMENTS: usize = 3;

/// Sparse vectors `η`, `φ` with `λE − A + ηφᴴ` invertible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Regularizers {
    pub eta: Vec<(usize, C64)>,
    pub phi: Vec<(usize, C64)>,
}

impl Regularizers {
    pub fn is_zero(&self) -> bool {
        self.eta.is_empty() || self.phi.is_empty()
    }

    /// `η = s·e_row`, `φ = e_col`.
    pub fn unit_pair(row: usize, col: usize, scale: f64) -> Self {
        Regularizers { eta: vec![(row, C64::new(scale, 0.0))], phi: vec![(col, C64::new(1.0, 0.0))] }
    }

    fn dense(entries: &[(usize, C64)], m: usize) -> CVec {
        let mut v = CVec::zeros(m);
        for &(i, x) in entries {
            v[i] += x;
        }
        v
    }

    fn apply_to(&self, base: &CscMatrix) -> Result<CscMatrix> {
        let mut t = Vec::with_capacity(self.eta.len() * self.phi.len());
        for &(i, a) in &self.eta {
            for &(j, b) in &self.phi {
                t.push((i, j, a * b.conj()));
            }
        }
        let outer = CscMatrix::from_triplets(base.nrows(), base.ncols(), &t)?;
        let one = C64::new(1.0, 0.0);
        Ok(base.linear_combination(one, &outer, one))
    }
}

/// Construction counters used to check the sparsity contract.
#[derive(Debug, Clone, Default)]
pub struct SmwAudit {
    pub base_nnz: usize,
    pub regularizer_attempts: usize,
    pub capacitance_order: usize,
    /// Widest dense block with `m` rows formed during construction.
    pub widest_dense_block: usize,
    pub refinements: Cell<usize>,
}

fn shifted_base(pencil: &ProjectionPencil, lambda: C64) -> CscMatrix {
    let e = pencil.e().to_sparse();
    let a = pencil.a().to_sparse();
    e.linear_combination(lambda, &a, C64::new(-1.0, 0.0))
}

fn a_scale(pencil: &ProjectionPencil) -> f64 {
    let s = pencil.a().norm_inf();
    if s > 0.0 { s } else { 1.0 }
}

struct Regularized {
    regs: Regularizers,
    base: CscMatrix,
    factor: Factorization,
    attempts: usize,
}

fn regularize(pencil: &ProjectionPencil, lambda: C64, max_attempts: usize) -> Result<Regularized> {
    let base0 = shifted_base(pencil, lambda);
    let scale = a_scale(pencil);
    let mut regs = Regularizers::default();
    let mut last: Option<(usize, usize)> = None;
    let mut magnitude = scale;
    for attempt in 0..=max_attempts {
        let base = regs.apply_to(&base0)?;
        let breakdown = match factor_sparse(&base, &FactorOptions::default()) {
            Ok(f) if f.condition_estimate() <= BASE_CONDITION_LIMIT => {
                return Ok(Regularized { regs, base, factor: f, attempts: attempt });
            }
            Ok(f) => {
                let (row, col, _) = f.weakest_pivot();
                (row, col)
            }
            Err(Error::SingularMatrix { row, column, .. }) => (row, column),
            Err(e) => return Err(e),
        };
        magnitude = if last == Some(breakdown) { magnitude * 10.0 } else { scale };
        last = Some(breakdown);
        regs = Regularizers::unit_pair(breakdown.0, breakdown.1, magnitude);
    }
    Err(Error::RegularizationFailed { attempts: max_attempts })
}

/// Zero regularizers when `λE − A` is well conditioned, otherwise a unit pair
/// at the failed pivot of magnitude `‖A‖∞`, escalated at most
/// [`DEFAULT_REGULARIZER_ATTEMPTS`] times.
pub fn choose_regularizers(pencil: &ProjectionPencil, lambda: C64) -> Result<Regularizers> {
    Ok(regularize(pencil, lambda, DEFAULT_REGULARIZER_ATTEMPTS)?.regs)
}

/// `{λE − A + correction}⁻¹ = B⁻¹ + B⁻¹U(I − VᴴB⁻¹U)⁻¹VᴴB⁻¹` with
/// `B = λE − A + ηφᴴ` sparse; for the anticommutator `U = [η, −AEℰ, −Eℰ]`,
/// `Vᴴ = [φᴴ; ℱᴴE; ℱᴴEA]`.
#[derive(Debug)]
pub struct SmwFactorization<'p> {
    pencil: &'p ProjectionPencil,
    lambda: C64,
    form: HForm,
    regs: Regularizers,
    base: Factorization,
    e_right: CMat,
    e_left: CMat,
    a_e_right: CMat,
    ah_e_left: CMat,
    u: CMat,
    v: CMat,
    /// `B⁻¹U`.
    bu: CMat,
    core: Factorization,
    /// `B⁻ᴴV`, built on first adjoint solve.
    bv: OnceCell<CMat>,
    audit: SmwAudit,
}

/// Low-rank factorization with regularizers already chosen.
pub fn smw_factor<'p>(
    pencil: &'p ProjectionPencil,
    pair: &SubspacePair,
    lambda: C64,
    regs: &Regularizers,
    form: HForm,
) -> Result<SmwFactorization<'p>> {
    check_pair(pencil, pair)?;
    let base = regs.apply_to(&shifted_base(pencil, lambda))?;
    let factor = factor_sparse(&base, &FactorOptions::default())?;
    SmwFactorization::assemble(pencil, pair, lambda, form, Regularized { regs: regs.clone(), base, factor, attempts: 0 })
}

fn check_pair(pencil: &ProjectionPencil, pair: &SubspacePair) -> Result<()> {
    if pair.order() != pencil.dim() {
        return Err(mismatch(format!("pair of order {} for pencil of order {}", pair.order(), pencil.dim())));
    }
    if pair.dim() == 0 {
        return Err(Error::InvalidConfig("low-rank factorization needs a nonempty pair".into()));
    }
    Ok(())
}

fn hstack(blocks: &[&CMat]) -> CMat {
    let rows = blocks[0].nrows();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.columns_mut(c, b.ncols()).copy_from(*b);
        c += b.ncols();
    }
    out
}

impl<'p> SmwFactorization<'p> {
    /// Regularizers chosen by [`choose_regularizers`], then factored.
    pub fn new(pencil: &'p ProjectionPencil, pair: &SubspacePair, lambda: C64, form: HForm) -> Result<Self> {
        check_pair(pencil, pair)?;
        let reg = regularize(pencil, lambda, DEFAULT_REGULARIZER_ATTEMPTS)?;
        Self::assemble(pencil, pair, lambda, form, reg)
    }

    fn assemble(pencil: &'p ProjectionPencil, pair: &SubspacePair, lambda: C64, form: HForm, reg: Regularized) -> Result<Self> {
        let m = pencil.dim();
        let e_right = pencil.e().mul(pair.right());
        let e_left = pencil.e().mul(pair.left());
        let a_e_right = pencil.a().mul(&e_right);
        let ah_e_left = pencil.a().adjoint_mul(&e_left);
        let eta = CMat::from_column_slice(m, 1, Regularizers::dense(&reg.regs.eta, m).as_slice());
        let phi = CMat::from_column_slice(m, 1, Regularizers::dense(&reg.regs.phi, m).as_slice());
        let (u, v) = Self::blocks(form, &eta, &phi, &e_right, &e_left, &a_e_right, &ah_e_left);
        let bu = reg.factor.solve(&u)?;
        let k = u.ncols();
        let core_m = CMat::identity(k, k) - v.ad_mul(&bu);
        let core = factor_dense(&core_m, &FactorOptions::default()).map_err(|_| Error::SingularCapacitance)?;
        if !(core.condition_estimate() <= SHIFT_CONDITION_LIMIT) {
            return Err(Error::SingularCapacitance);
        }
        let audit = SmwAudit {
            base_nnz: reg.base.nnz(),
            regularizer_attempts: reg.attempts,
            capacitance_order: k,
            widest_dense_block: [&e_right, &e_left, &a_e_right, &ah_e_left, &u, &v, &bu].iter().map(|b| b.ncols()).max().unwrap_or(0),
            refinements: Cell::new(0),
        };
        Ok(SmwFactorization {
            pencil,
            lambda,
            form,
            regs: reg.regs,
            base: reg.factor,
            e_right,
            e_left,
            a_e_right,
            ah_e_left,
            u,
            v,
            bu,
            core,
            bv: OnceCell::new(),
            audit,
        })
    }

    /// Columns of `U` and `V` such that the operator is `B − UVᴴ`.
    fn blocks(form: HForm, eta: &CMat, phi: &CMat, er: &CMat, el: &CMat, aer: &CMat, ahel: &CMat) -> (CMat, CMat) {
        match form {
            HForm::Anticommutator => (hstack(&[eta, &-aer, &-er]), hstack(&[phi, el, ahel])),
            HForm::Qa => (hstack(&[eta, &-er]), hstack(&[phi, ahel])),
            HForm::Aq => (hstack(&[eta, &-aer]), hstack(&[phi, el])),
        }
    }

    /// Same base factorization with another correction form.
    pub fn with_form(&self, form: HForm) -> Result<SmwFactorization<'p>> {
        let m = self.pencil.dim();
        let eta = CMat::from_column_slice(m, 1, Regularizers::dense(&self.regs.eta, m).as_slice());
        let phi = CMat::from_column_slice(m, 1, Regularizers::dense(&self.regs.phi, m).as_slice());
        let (u, v) = Self::blocks(form, &eta, &phi, &self.e_right, &self.e_left, &self.a_e_right, &self.ah_e_left);
        let bu = self.base.solve(&u)?;
        let k = u.ncols();
        let core =
            factor_dense(&(CMat::identity(k, k) - v.ad_mul(&bu)), &FactorOptions::default()).map_err(|_| Error::SingularCapacitance)?;
        if !(core.condition_estimate() <= SHIFT_CONDITION_LIMIT) {
            return Err(Error::SingularCapacitance);
        }
        let audit = SmwAudit { capacitance_order: k, refinements: Cell::new(0), ..self.audit.clone() };
        Ok(SmwFactorization {
            pencil: self.pencil,
            lambda: self.lambda,
            form,
            regs: self.regs.clone(),
            base: self.base.clone(),
            e_right: self.e_right.clone(),
            e_left: self.e_left.clone(),
            a_e_right: self.a_e_right.clone(),
            ah_e_left: self.ah_e_left.clone(),
            u,
            v,
            bu,
            core,
            bv: OnceCell::new(),
            audit,
        })
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn form(&self) -> HForm {
        self.form
    }

    pub fn regularizers(&self) -> &Regularizers {
        &self.regs
    }

    pub fn base(&self) -> &Factorization {
        &self.base
    }

    pub fn audit(&self) -> &SmwAudit {
        &self.audit
    }

    /// Operator applied to `x` through sparse products.
    pub fn operator_mul(&self, x: &CMat) -> CMat {
        let p = self.pencil;
        let ax = p.a().mul(x);
        let mut y = p.e().mul(x) * self.lambda - &ax;
        if matches!(self.form, HForm::Qa | HForm::Anticommutator) {
            y += &self.e_right * self.e_left.ad_mul(&ax);
        }
        if matches!(self.form, HForm::Aq | HForm::Anticommutator) {
            y += &self.a_e_right * self.e_left.ad_mul(x);
        }
        y
    }

    fn operator_adjoint_mul(&self, x: &CMat) -> CMat {
        let p = self.pencil;
        let ahx = p.a().adjoint_mul(x);
        let mut y = p.e().mul(x) * self.lambda.conj() - &ahx;
        if matches!(self.form, HForm::Qa | HForm::Anticommutator) {
            y += &self.ah_e_left * self.e_right.ad_mul(x);
        }
        if matches!(self.form, HForm::Aq | HForm::Anticommutator) {
            y += &self.e_left * self.e_right.ad_mul(&ahx);
        }
        y
    }

    fn raw_apply(&self, b: &CMat) -> Result<CMat> {
        let x = self.base.solve(b)?;
        Ok(&x + &self.bu * self.core.solve(&self.v.ad_mul(&x))?)
    }

    fn raw_apply_adjoint(&self, b: &CMat) -> Result<CMat> {
        if self.bv.get().is_none() {
            let _ = self.bv.set(self.base.solve_adjoint(&self.v)?);
        }
        let bv = self.bv.get().expect("set above");
        let x = self.base.solve_adjoint(b)?;
        Ok(&x + bv * self.core.solve_adjoint(&self.u.ad_mul(&x))?)
    }

    fn refine(&self, b: &CMat, x: CMat, mul: impl Fn(&CMat) -> CMat, solve: impl Fn(&CMat) -> Result<CMat>) -> Result<CMat> {
        let target = REFINEMENT_THRESHOLD * norm_inf(b);
        let mut x = x;
        let mut r = b - mul(&x);
        let mut size = norm_inf(&r);
        for _ in 0..MAX_REFINEMENTS {
            if !(size > target) {
                break;
            }
            self.audit.refinements.set(self.audit.refinements.get() + 1);
            let candidate = &x + solve(&r)?;
            let r_next = b - mul(&candidate);
            let next = norm_inf(&r_next);
            if !(next < size) {
                break;
            }
            let halved = next <= 0.5 * size;
            (x, r, size) = (candidate, r_next, next);
            if !halved {
                break;
            }
        }
        Ok(x)
    }

    /// Solves with the shifted operator.
    pub fn apply(&self, b: &CMat) -> Result<CMat> {
        if b.nrows() != self.pencil.dim() {
            return Err(mismatch(format!("apply: {} rows against order {}", b.nrows(), self.pencil.dim())));
        }
        let x = self.raw_apply(b)?;
        self.refine(b, x, |x| self.operator_mul(x), |r| self.raw_apply(r))
    }

    /// Solves with the adjoint of the shifted operator.
    pub fn apply_adjoint(&self, b: &CMat) -> Result<CMat> {
        if b.nrows() != self.pencil.dim() {
            return Err(mismatch(format!("apply: {} rows against order {}", b.nrows(), self.pencil.dim())));
        }
        let x = self.raw_apply_adjoint(b)?;
        self.refine(b, x, |x| self.operator_adjoint_mul(x), |r| self.raw_apply_adjoint(r))
    }
}

/// `x = N(λ)b`.
pub fn smw_apply(f: &SmwFactorization<'_>, b: &CMat) -> Result<CMat> {
    f.apply(b)
}

/// `H(λ)` through the low-rank path.
pub fn h_smw(pencil: &ProjectionPencil, pair: &SubspacePair, lambda: C64, form: HForm) -> Result<CMat> {
    let r = SmwReduction::new(pencil, pair.clone(), form)?;
    Ok(r.evaluate(lambda)?.reduced - &r.base)
}

/// [`Reduction`] whose shifted solves go through [`SmwFactorization`].
#[derive(Debug, Clone)]
pub struct SmwReduction<'p> {
    pencil: &'p ProjectionPencil,
    pair: SubspacePair,
    form: HForm,
    e_right: CMat,
    e_left: CMat,
    a_right: CMat,
    left_a: CMat,
    base: CMat,
}

impl<'p> SmwReduction<'p> {
    pub fn new(pencil: &'p ProjectionPencil, pair: SubspacePair, form: HForm) -> Result<Self> {
        check_pair(pencil, &pair)?;
        let e_right = pencil.e().mul(pair.right());
        let e_left = pencil.e().mul(pair.left());
        let a_right = pencil.a().mul(pair.right());
        let left_a = pencil.a().adjoint_mul(pair.left()).adjoint();
        let base = pair.left().ad_mul(&a_right);
        Ok(SmwReduction { pencil, pair, form, e_right, e_left, a_right, left_a, base })
    }

    fn project(&self, x: &CMat) -> CMat {
        x - &self.e_right * self.e_left.ad_mul(x)
    }

    fn project_adjoint(&self, x: &CMat) -> CMat {
        x - &self.e_left * self.e_right.ad_mul(x)
    }

    pub fn evaluate(&self, lambda: C64) -> Result<SmwShifted<'_, 'p>> {
        let f = SmwFactorization::new(self.pencil, &self.pair, lambda, self.form).map_err(|e| match e {
            Error::SingularCapacitance | Error::RegularizationFailed { .. } => Error::ShiftSingular { shift: lambda },
            e => e,
        })?;
        let px = self.project(&f.apply(&self.project(&self.a_right))?);
        let reduced = &self.base + &self.left_a * &px;
        Ok(SmwShifted { parent: self, factor: f, px, reduced })
    }
}

/// [`SmwReduction`] at one shift.
pub struct SmwShifted<'a, 'p> {
    parent: &'a SmwReduction<'p>,
    factor: SmwFactorization<'p>,
    px: CMat,
    reduced: CMat,
}

impl SmwShifted<'_, '_> {
    pub fn factorization(&self) -> &SmwFactorization<'_> {
        &self.factor
    }

    /// `A_rr + H(λ)`.
    pub fn reduced_matrix(&self) -> &CMat {
        &self.reduced
    }
}

impl<'p> Reduction for SmwReduction<'p> {
    fn pencil(&self) -> &ProjectionPencil {
        self.pencil
    }

    fn pair(&self) -> &SubspacePair {
        &self.pair
    }

    fn base(&self) -> &CMat {
        &self.base
    }

    fn shifted(&self, lambda: C64) -> Result<Box<dyn Shifted + '_>> {
        Ok(Box::new(self.evaluate(lambda)?))
    }

    fn with_pair(&self, pair: SubspacePair) -> Result<Self> {
        SmwReduction::new(self.pencil, pair, self.form)
    }
}

impl Shifted for SmwShifted<'_, '_> {
    fn reduced(&self) -> Result<CMat> {
        Ok(self.reduced.clone())
    }

    /// `z = PNPAℰα`; `y` through the adjoint of the dual form.
    fn recover(&self, alpha: &CVec, beta: &CVec) -> Result<(CVec, CVec)> {
        let p = self.parent;
        let n = p.pair.dim();
        if alpha.len() != n || beta.len() != n {
            return Err(mismatch("reduced vector length differs from subspace dimension"));
        }
        let z = &self.px * alpha;
        let dual_form = self.factor.form().dual();
        let dual;
        let f = if dual_form == self.factor.form() {
            &self.factor
        } else {
            dual = self.factor.with_form(dual_form)?;
            &dual
        };
        let b = p.left_a.ad_mul(&CMat::from_column_slice(n, 1, beta.as_slice()));
        let y = p.project_adjoint(&f.apply_adjoint(&p.project_adjoint(&b))?);
        let v = p.pair.right() * alpha + z;
        let w = p.pair.left() * beta + CVec::from_column_slice(y.as_slice());
        Ok((v, w))
    }
}
