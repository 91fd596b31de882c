//! Projection pencils `(E, A)`, relevant subspace pairs and the dense
//! reference solver used to check every iterative method.

use std::ops::Range;
use std::sync::OnceLock;

use crate::error::{Error, Result, mismatch};
use crate::linalg::{C64, CMat, CVec, DenseLu, FactorOptions, Matrix, ONE, ZERO, dense_limit, eig_dense, factor_dense, norm_inf};

/// `λ E v = A v` with `E` symmetric idempotent.
#[derive(Debug, Clone)]
pub struct ProjectionPencil {
    e: Matrix,
    a: Matrix,
    rank_e: usize,
    e_dense: OnceLock<CMat>,
    a_dense: OnceLock<CMat>,
}

impl ProjectionPencil {
    /// Validates shapes, finiteness, `E = Eᵀ = Eᴴ` and `E² = E`.
    pub fn new(e: Matrix, a: Matrix) -> Result<Self> {
        let m = e.nrows();
        if e.ncols() != m || a.nrows() != m || a.ncols() != m {
            return Err(mismatch(format!(
                "pencil blocks {}x{} and {}x{} must be square of equal order",
                e.nrows(),
                e.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        if !e.is_finite() || !a.is_finite() {
            return Err(Error::InvalidPencil("non-finite entries".into()));
        }
        let ne = e.norm_inf();
        let sym = e.combine(ONE, &e.transpose(), -ONE)?.norm_inf();
        let herm = e.combine(ONE, &e.adjoint(), -ONE)?.norm_inf();
        if sym.max(herm) > 1e-12 * (1.0 + ne) {
            return Err(Error::InvalidPencil(format!("E is not real symmetric (deviation {:e})", sym.max(herm))));
        }
        let square = match &e {
            Matrix::Dense(d) => Matrix::Dense(d * d),
            Matrix::Sparse(s) => Matrix::Sparse(s.mul_sparse(s)?),
        };
        let idem = square.combine(ONE, &e, -ONE)?.norm_inf();
        if idem > 1e-10 * (1.0 + ne) {
            return Err(Error::InvalidPencil(format!("E is not idempotent (deviation {idem:e})")));
        }
        let trace: f64 = match &e {
            Matrix::Dense(d) => (0..m).map(|i| d[(i, i)].re).sum(),
            Matrix::Sparse(s) => (0..m).map(|i| s.get(i, i).re).sum(),
        };
        Ok(ProjectionPencil { e, a, rank_e: trace.round().max(0.0) as usize, e_dense: OnceLock::new(), a_dense: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    pub fn rank_e(&self) -> usize {
        self.rank_e
    }

    pub fn e(&self) -> &Matrix {
        &self.e
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn is_sparse(&self) -> bool {
        self.e.is_sparse() && self.a.is_sparse()
    }

    pub fn e_dense(&self) -> &CMat {
        self.e_dense.get_or_init(|| self.e.to_dense())
    }

    pub fn a_dense(&self) -> &CMat {
        self.a_dense.get_or_init(|| self.a.to_dense())
    }

    /// `a·E + b·A` in the pencil's storage.
    pub fn combination(&self, a: C64, b: C64) -> Matrix {
        self.e.combine(a, &self.a, b).expect("pencil blocks share a shape")
    }
}

/// Right and left relevant bases with `ℱᴴ E ℰ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspacePair {
    right: CMat,
    left: CMat,
    blocks: Option<Vec<Range<usize>>>,
}

impl SubspacePair {
    /// Normalizes against `e` by correcting the left basis only.
    pub fn normalized(right: CMat, left: CMat, e: &Matrix) -> Result<Self> {
        let m = e.nrows();
        let n = right.ncols();
        if right.nrows() != m || left.nrows() != m || left.ncols() != n {
            return Err(mismatch(format!(
                "subspace bases {}x{} and {}x{} against order {m}",
                right.nrows(),
                right.ncols(),
                left.nrows(),
                left.ncols()
            )));
        }
        if n == 0 {
            return Ok(SubspacePair { right, left, blocks: None });
        }
        let er = e.mul(&right);
        let el = e.mul(&left);
        for (name, raw, img) in [("right", &right, &er), ("left", &left, &el)] {
            for j in 0..n {
                let c = raw.column(j).norm();
                if c == 0.0 || img.column(j).norm() < 1e-12 * c {
                    return Err(Error::DegenerateSubspace(format!("{name} basis vector {j} lies in the kernel of E")));
                }
            }
        }
        let g = left.ad_mul(&er);
        let lu = DenseLu::new(g.clone(), Some(0.0)).map_err(|_| Error::DegenerateSubspace("bases are E-orthogonal".into()))?;
        let bound: f64 = (0..n).map(|j| (er.column(j).norm() * el.column(j).norm()).ln()).sum();
        let det_scale = ((lu.determinant().norm().ln() - bound) / n as f64).exp();
        if !(det_scale >= 1e-12) {
            return Err(Error::DegenerateSubspace(format!("normalization matrix nearly singular (scale {det_scale:e})")));
        }
        let corrected = lu.solve(&left.adjoint())?.adjoint();
        let check = corrected.ad_mul(&er) - CMat::identity(n, n);
        if check.norm() > 1e-10 {
            return Err(Error::DegenerateSubspace(format!("normalization residual {:e}", check.norm())));
        }
        Ok(SubspacePair { right, left: corrected, blocks: None })
    }

    /// `ℰ = ℱ = [I_n; 0]`.
    pub fn canonical(pencil: &ProjectionPencil, n: usize) -> Result<Self> {
        let basis = CMat::identity(pencil.dim(), n);
        Self::normalized(basis.clone(), basis, pencil.e())
    }

    /// Declares that column `k` is supported on rows `blocks[k]`.
    pub fn with_blocks(mut self, blocks: Vec<Range<usize>>) -> Result<Self> {
        if blocks.len() != self.dim() {
            return Err(mismatch("one row block per basis column required"));
        }
        for (k, r) in blocks.iter().enumerate() {
            if r.end > self.order() {
                return Err(mismatch(format!("block {k} exceeds the order")));
            }
            for basis in [&self.right, &self.left] {
                let outside = (0..self.order()).filter(|i| !r.contains(i)).any(|i| basis[(i, k)] != ZERO);
                if outside {
                    return Err(mismatch(format!("column {k} has entries outside its block")));
                }
            }
        }
        self.blocks = Some(blocks);
        Ok(self)
    }

    pub fn right(&self) -> &CMat {
        &self.right
    }

    pub fn left(&self) -> &CMat {
        &self.left
    }

    pub fn blocks(&self) -> Option<&[Range<usize>]> {
        self.blocks.as_deref()
    }

    /// Subspace dimension `n`.
    pub fn dim(&self) -> usize {
        self.right.ncols()
    }

    /// Ambient order `m`.
    pub fn order(&self) -> usize {
        self.right.nrows()
    }

    /// `ℱᴴ A ℰ`.
    pub fn reduced(&self, pencil: &ProjectionPencil) -> CMat {
        self.left.ad_mul(&pencil.a().mul(&self.right))
    }
}

/// Normalizes `(ℰ, ℱ)` against the pencil's `E`.
pub fn normalize_pair(right: CMat, left: CMat, pencil: &ProjectionPencil) -> Result<SubspacePair> {
    SubspacePair::normalized(right, left, pencil.e())
}

/// Dense `Q = EℰℱᴴE` and `P = I − Q`.
#[derive(Debug, Clone)]
pub struct Projectors {
    pub q: CMat,
    pub p: CMat,
}

pub fn projectors(pair: &SubspacePair, pencil: &ProjectionPencil) -> Result<Projectors> {
    if pair.order() != pencil.dim() {
        return Err(mismatch("pair order differs from pencil order"));
    }
    let er = pencil.e().mul(pair.right());
    let el = pencil.e().mul(pair.left());
    let q = &er * el.adjoint();
    let p = CMat::identity(q.nrows(), q.ncols()) - &q;
    Ok(Projectors { q, p })
}

/// `v = ℰα + z` with `ℱᴴEz = 0`.
pub fn decompose_right(v: &CVec, pair: &SubspacePair, pencil: &ProjectionPencil) -> (CVec, CVec) {
    let ev = pencil.e().mul_vec(v);
    let alpha = pair.left().ad_mul(&ev);
    let z = v - pair.right() * &alpha;
    (alpha, z)
}

/// `w = ℱβ + y` with `ℰᴴEy = 0`.
pub fn decompose_left(w: &CVec, pair: &SubspacePair, pencil: &ProjectionPencil) -> (CVec, CVec) {
    let ew = pencil.e().mul_vec(w);
    let beta = pair.right().ad_mul(&ew);
    let y = w - pair.left() * &beta;
    (beta, y)
}

/// One eigenvalue estimate with its reduced and full coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeEstimate {
    pub lambda: C64,
    pub alpha: CVec,
    pub beta: CVec,
    pub v: Option<CVec>,
    pub w: Option<CVec>,
    pub residual: f64,
    /// Set when `wᴴEv` vanished and `w` could not be scaled against `v`.
    pub defective_pairing: bool,
}

impl ModeEstimate {
    /// Scales `v` to unit norm and `w` to `wᴴEv = 1`, recomputing the reduced
    /// coordinates against `pair` and the residual at `lambda`.
    pub fn from_vectors(pencil: &ProjectionPencil, pair: &SubspacePair, lambda: C64, v: CVec, w: CVec) -> Self {
        let (v, w, defective) = scale_pair(pencil, v, w);
        let (alpha, _) = decompose_right(&v, pair, pencil);
        let (beta, _) = decompose_left(&w, pair, pencil);
        let (r, l) = residual(pencil, lambda, &v, &w);
        ModeEstimate { lambda, alpha, beta, v: Some(v), w: Some(w), residual: r.max(l), defective_pairing: defective }
    }
}

/// Unit `v`; `w` with `wᴴEv = 1`, or unit `w` and a flag when that fails.
pub fn scale_pair(pencil: &ProjectionPencil, v: CVec, w: CVec) -> (CVec, CVec, bool) {
    let nv = v.norm();
    let v = if nv > 0.0 { v / C64::new(nv, 0.0) } else { v };
    let nw = w.norm();
    let w = if nw > 0.0 { w / C64::new(nw, 0.0) } else { w };
    let p = w.dotc(&pencil.e().mul_vec(&v));
    if p.norm() > 1e-12 {
        let w = w / p.conj();
        (v, w, false)
    } else {
        (v, w, true)
    }
}

/// `(‖Av − λEv‖ / ((‖A‖ + |λ|‖E‖)‖v‖), dual for w)` with `‖·‖_∞` matrix norms.
pub fn residual(pencil: &ProjectionPencil, lambda: C64, v: &CVec, w: &CVec) -> (f64, f64) {
    let scale = pencil.a().norm_inf() + lambda.norm() * pencil.e().norm_inf();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let rv = pencil.a().mul_vec(v) - pencil.e().mul_vec(v) * lambda;
    let adj_a = pencil.a().adjoint_mul(&CMat::from_column_slice(w.len(), 1, w.as_slice()));
    let rw = CVec::from_column_slice(adj_a.as_slice()) - pencil.e().mul_vec(w) * lambda.conj();
    let right = if v.norm() > 0.0 { rv.norm() / (scale * v.norm()) } else { f64::INFINITY };
    let left = if w.norm() > 0.0 { rw.norm() / (scale * w.norm()) } else { f64::INFINITY };
    (right, left)
}

/// `ρ = wᴴQv / wᴴ(E − Q)v`, kept as a fraction so that an exactly
/// relevant mode yields an infinite ratio instead of a division error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticipationRatio {
    pub numerator: C64,
    pub denominator: C64,
    infinite: bool,
}

impl ParticipationRatio {
    fn new(numerator: C64, denominator: C64, scale: f64) -> Self {
        let infinite = denominator.norm() <= 1e-13 * scale;
        ParticipationRatio { numerator, denominator, infinite }
    }

    pub fn is_infinite(&self) -> bool {
        self.infinite
    }

    /// `None` when infinite.
    pub fn value(&self) -> Option<C64> {
        (!self.infinite).then(|| self.numerator / self.denominator)
    }

    pub fn modulus(&self) -> f64 {
        self.value().map_or(f64::INFINITY, |r| r.norm())
    }

    /// `|ρ|⁻¹`, the predicted contraction factor of the linear iterations.
    pub fn predicted_rate(&self) -> f64 {
        if self.infinite { 0.0 } else { self.denominator.norm() / self.numerator.norm() }
    }
}

/// Ratio from dense projectors.
pub fn participation_ratio(v: &CVec, w: &CVec, proj: &Projectors, pencil: &ProjectionPencil) -> ParticipationRatio {
    let ev = pencil.e().mul_vec(v);
    let qv = &proj.q * v;
    let num = w.dotc(&qv);
    let den = w.dotc(&(ev - qv));
    let scale = pencil.e().mul_vec(w).norm() * pencil.e().mul_vec(v).norm();
    ParticipationRatio::new(num, den, scale)
}

/// Ratio without forming `Q`.
pub fn participation_ratio_in(pencil: &ProjectionPencil, pair: &SubspacePair, v: &CVec, w: &CVec) -> ParticipationRatio {
    let ev = pencil.e().mul_vec(v);
    let ew = pencil.e().mul_vec(w);
    let alpha = pair.left().ad_mul(&ev);
    let beta = pair.right().ad_mul(&ew);
    let num = beta.dotc(&alpha);
    let den = w.dotc(&ev) - num;
    ParticipationRatio::new(num, den, ew.norm() * ev.norm())
}

/// A finite eigenvalue with its unit right vector and `wᴴEv = 1` left vector.
#[derive(Debug, Clone)]
pub struct OracleMode {
    pub lambda: C64,
    pub v: CVec,
    pub w: CVec,
    pub defective_pairing: bool,
}

#[derive(Debug, Clone)]
pub struct OracleSpectrum {
    pub modes: Vec<OracleMode>,
    /// Number of infinite eigenvalues (static directions).
    pub infinite_count: usize,
}

impl OracleSpectrum {
    /// Index of the mode nearest `target`.
    pub fn nearest(&self, target: C64) -> Option<usize> {
        (0..self.modes.len()).min_by(|&i, &j| (self.modes[i].lambda - target).norm().total_cmp(&(self.modes[j].lambda - target).norm()))
    }

    /// Modes sorted by real part, then imaginary part.
    pub fn sorted(&self) -> Vec<&OracleMode> {
        let mut v: Vec<&OracleMode> = self.modes.iter().collect();
        v.sort_by(|a, b| a.lambda.re.total_cmp(&b.lambda.re).then(a.lambda.im.total_cmp(&b.lambda.im)));
        v
    }
}

/// Dense brute-force spectrum by static condensation.
pub fn oracle_full_spectrum(pencil: &ProjectionPencil) -> Result<OracleSpectrum> {
    let m = pencil.dim();
    let limit = dense_limit();
    if m > limit {
        return Err(Error::TooLarge { n: m, limit });
    }
    let e = pencil.e_dense();
    let a = pencil.a_dense();
    let basis = projection_basis(e);
    let r = basis.dynamic.ncols();
    let s = basis.stat.ncols();
    let ud = &basis.dynamic;
    let us = &basis.stat;
    let add = ud.ad_mul(&(a * ud));
    let (condensed, static_solve) = if s > 0 {
        let ads = ud.ad_mul(&(a * us));
        let asd = us.ad_mul(&(a * ud));
        let ass = us.ad_mul(&(a * us));
        let f = factor_dense(&ass, &FactorOptions::default()).map_err(|_| Error::NotSolvable { condition: f64::INFINITY })?;
        if f.condition_estimate() > 1e12 {
            return Err(Error::NotSolvable { condition: f.condition_estimate() });
        }
        let x = f.solve(&asd)?;
        let yh = f.solve_adjoint(&ads.adjoint())?;
        (&add - &ads * &x, Some((x, yh)))
    } else {
        (add, None)
    };
    let eig = eig_dense(&condensed)?;
    let mut modes = Vec::with_capacity(r);
    for i in 0..r {
        let xd = eig.right.column(i).into_owned();
        let yd = eig.left.column(i).into_owned();
        let (v, w) = match &static_solve {
            Some((x, yh)) => {
                let xs = -(x * &xd);
                let ys = -(yh * &yd);
                (ud * &xd + us * xs, ud * &yd + us * ys)
            }
            None => (ud * &xd, ud * &yd),
        };
        let (v, w, defective) = scale_pair(pencil, v, w);
        modes.push(OracleMode { lambda: eig.values[i], v, w, defective_pairing: defective });
    }
    Ok(OracleSpectrum { modes, infinite_count: s })
}

struct ProjectionBasis {
    dynamic: CMat,
    stat: CMat,
}

/// Orthonormal bases of range and kernel of a projection; exact coordinate
/// vectors when `E` is a 0/1 diagonal.
fn projection_basis(e: &CMat) -> ProjectionBasis {
    let m = e.nrows();
    let diagonal01 = (0..m).all(|i| {
        (0..m).all(|j| {
            let z = e[(i, j)];
            if i == j { z == ZERO || z == ONE } else { z == ZERO }
        })
    });
    let (dyn_cols, stat_cols): (Vec<CVec>, Vec<CVec>) = if diagonal01 {
        let unit = |i: usize| {
            let mut v = CVec::zeros(m);
            v[i] = ONE;
            v
        };
        ((0..m).filter(|&i| e[(i, i)] == ONE).map(unit).collect(), (0..m).filter(|&i| e[(i, i)] == ZERO).map(unit).collect())
    } else {
        let sym = nalgebra::SymmetricEigen::new(e.clone());
        let mut d = Vec::new();
        let mut st = Vec::new();
        for i in 0..m {
            let col = sym.eigenvectors.column(i).into_owned();
            if sym.eigenvalues[i] > 0.5 { d.push(col) } else { st.push(col) }
        }
        (d, st)
    };
    let stack = |cols: &[CVec]| {
        let mut out = CMat::zeros(m, cols.len());
        for (j, c) in cols.iter().enumerate() {
            out.set_column(j, c);
        }
        out
    };
    ProjectionBasis { dynamic: stack(&dyn_cols), stat: stack(&stat_cols) }
}

/// Reference value for scale-aware comparisons: `‖A‖_∞`.
pub fn norm_a(pencil: &ProjectionPencil) -> f64 {
    match pencil.a() {
        Matrix::Dense(d) => norm_inf(d),
        Matrix::Sparse(s) => s.norm_inf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CscMatrix, real_to_complex};
    use nalgebra::DMatrix;

    fn dense(rows: usize, data: &[f64]) -> CMat {
        real_to_complex(&DMatrix::from_row_slice(rows, data.len() / rows, data))
    }

    fn pencil(e: CMat, a: CMat) -> ProjectionPencil {
        ProjectionPencil::new(Matrix::Dense(e), Matrix::Dense(a)).unwrap()
    }

    #[test]
    fn rejects_non_projection() {
        let e = dense(2, &[1.0, 0.0, 0.0, 2.0]);
        assert!(ProjectionPencil::new(Matrix::Dense(e), Matrix::Dense(CMat::zeros(2, 2))).is_err());
        let skew = dense(2, &[0.5, 0.5, -0.5, 0.5]);
        assert!(ProjectionPencil::new(Matrix::Dense(skew), Matrix::Dense(CMat::zeros(2, 2))).is_err());
    }

    #[test]
    fn rank_from_trace() {
        let p = pencil(dense(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]), CMat::zeros(3, 3));
        assert_eq!(p.rank_e(), 2);
    }

    #[test]
    fn normalization_examples() {
        let p = pencil(CMat::identity(2, 2), CMat::zeros(2, 2));
        let pair = normalize_pair(dense(2, &[1.0, 0.0]), dense(2, &[1.0, 0.0]), &p).unwrap();
        assert_eq!(pair.left(), &dense(2, &[1.0, 0.0]));
        let pair = normalize_pair(dense(2, &[2.0, 0.0]), dense(2, &[3.0, 0.0]), &p).unwrap();
        assert!((pair.left() - dense(2, &[0.5, 0.0])).norm() < 1e-15);
        let q = pencil(dense(2, &[1.0, 0.0, 0.0, 0.0]), CMat::zeros(2, 2));
        let pair = normalize_pair(dense(2, &[1.0, 5.0]), dense(2, &[1.0, 7.0]), &q).unwrap();
        assert_eq!(pair.left(), &dense(2, &[1.0, 7.0]));
    }

    #[test]
    fn kernel_vectors_are_degenerate() {
        let q = pencil(dense(2, &[1.0, 0.0, 0.0, 0.0]), CMat::zeros(2, 2));
        let err = normalize_pair(dense(2, &[0.0, 1.0]), dense(2, &[1.0, 0.0]), &q).unwrap_err();
        assert!(matches!(err, Error::DegenerateSubspace(_)));
        let p = pencil(CMat::identity(2, 2), CMat::zeros(2, 2));
        let err = normalize_pair(dense(2, &[1.0, 0.0]), dense(2, &[0.0, 1.0]), &p).unwrap_err();
        assert!(matches!(err, Error::DegenerateSubspace(_)));
    }

    #[test]
    fn projector_examples() {
        let p = pencil(dense(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]), CMat::zeros(3, 3));
        let e1 = dense(3, &[1.0, 0.0, 0.0]);
        let pair = normalize_pair(e1.clone(), e1, &p).unwrap();
        let pr = projectors(&pair, &p).unwrap();
        assert_eq!(pr.q, dense(3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn decomposition_examples() {
        let p = pencil(CMat::identity(2, 2), CMat::zeros(2, 2));
        let e1 = dense(2, &[1.0, 0.0]);
        let pair = normalize_pair(e1.clone(), e1, &p).unwrap();
        let v = CVec::from_vec(vec![ZERO, ONE]);
        let (alpha, z) = decompose_right(&v, &pair, &p);
        assert_eq!(alpha[0], ZERO);
        assert_eq!(z, v);
        let v = CVec::from_vec(vec![C64::new(3.0, 1.0), ZERO]);
        let (alpha, z) = decompose_right(&v, &pair, &p);
        assert_eq!(alpha[0], C64::new(3.0, 1.0));
        assert_eq!(z.norm(), 0.0);
    }

    #[test]
    fn oracle_examples() {
        let p = pencil(CMat::identity(2, 2), dense(2, &[1.0, 0.0, 0.0, 2.0]));
        let s = oracle_full_spectrum(&p).unwrap();
        let vals: Vec<f64> = s.sorted().iter().map(|m| m.lambda.re).collect();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 2.0).abs() < 1e-14);

        let p = pencil(dense(2, &[1.0, 0.0, 0.0, 0.0]), dense(2, &[0.0, 1.0, 1.0, -2.0]));
        let s = oracle_full_spectrum(&p).unwrap();
        assert_eq!(s.modes.len(), 1);
        assert_eq!(s.infinite_count, 1);
        let mode = &s.modes[0];
        assert!((mode.lambda - C64::new(0.5, 0.0)).norm() < 1e-14);
        let ratio = mode.v[0] / mode.v[1];
        assert!((ratio - C64::new(2.0, 0.0)).norm() < 1e-13);
        let (r, l) = residual(&p, mode.lambda, &mode.v, &mode.w);
        assert!(r < 1e-14 && l < 1e-14);
        let ew = p.e().mul_vec(&mode.v);
        assert!((mode.w.dotc(&ew) - ONE).norm() < 1e-14);
    }

    #[test]
    fn oracle_on_sparse_storage() {
        let e = CscMatrix::identity(3);
        let a = CscMatrix::from_dense(&dense(3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]));
        let p = ProjectionPencil::new(Matrix::Sparse(e), Matrix::Sparse(a)).unwrap();
        let s = oracle_full_spectrum(&p).unwrap();
        let smallest = s.sorted()[0].lambda.re;
        assert!((smallest - (2.0 - 2f64.sqrt())).abs() < 1e-13);
    }

    #[test]
    fn ratio_is_infinite_for_relevant_mode() {
        let p = pencil(CMat::identity(2, 2), dense(2, &[1.0, 0.0, 0.0, 2.0]));
        let e1 = dense(2, &[1.0, 0.0]);
        let pair = normalize_pair(e1.clone(), e1, &p).unwrap();
        let v = CVec::from_vec(vec![ONE, ZERO]);
        let pr = projectors(&pair, &p).unwrap();
        assert!(participation_ratio(&v, &v, &pr, &p).is_infinite());
        assert!(participation_ratio_in(&p, &pair, &v, &v).is_infinite());
    }

    #[test]
    fn perturbed_eigenvalue_residual_is_first_order() {
        let p = pencil(CMat::identity(2, 2), dense(2, &[1.0, 0.0, 0.0, 2.0]));
        let v = CVec::from_vec(vec![ONE, ZERO]);
        let (r, _) = residual(&p, C64::new(1.0 + 1e-6, 0.0), &v, &v);
        assert!((r - 1e-6 / 3.0).abs() < 1e-9);
    }
}
