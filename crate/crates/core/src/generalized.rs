//! Generalized selective modal analysis: the reduced matrix `A_rr + H(λ)`,
//! eigenvector recovery, and the fixed-point drivers shared by every
//! reduction (dense, low-rank sparse, composite, classical, direct).

use std::cell::OnceCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, mismatch};
use crate::linalg::{C64, CMat, CVec, FactorOptions, Factorization, condition_2, factor_dense, least_squares, orthonormal_basis};
use crate::pencil::{ModeEstimate, ProjectionPencil, SubspacePair, participation_ratio_in, residual};
pub use crate::report::{ConvergenceReport, Iterate, Status, convergence_order_estimate};
use crate::select::{Candidate, Selector, TrackState, Tracking, candidates, pair_modes, select_distinct, track};
use crate::smw::SmwReduction;

/// Shifted operators whose condition estimate exceeds this are singular.
pub const SHIFT_CONDITION_LIMIT: f64 = 1e14;

/// Iterate matrices whose 2-norm condition exceeds this are rank deficient.
pub const ITERATE_CONDITION_LIMIT: f64 = 1e12;

/// Correction added to `λE − A` in the shifted operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HForm {
    /// `QA + AQ`.
    Anticommutator,
    /// `QA`.
    #[default]
    Qa,
    /// `AQ`.
    Aq,
}

impl HForm {
    /// Form whose adjoint recovers left vectors.
    pub fn dual(self) -> Self {
        match self {
            HForm::Anticommutator => HForm::Anticommutator,
            HForm::Qa => HForm::Aq,
            HForm::Aq => HForm::Qa,
        }
    }
}

/// Subspace refresh between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceUpdate {
    None,
    /// Latest eigenvector estimates replace the bases.
    #[default]
    FullEigenvector,
    /// As above with the kernel-of-E components removed.
    ZeroedStatic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Converged when `|Δλ| ≤ tol·(1 + |λ|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Consecutive step growths that count as divergence.
    pub divergence_window: usize,
    pub subspace_update: SubspaceUpdate,
    pub h_form: HForm,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 50,
            divergence_window: 5,
            subspace_update: SubspaceUpdate::FullEigenvector,
            h_form: HForm::Qa,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidConfig(format!("tolerance {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.divergence_window == 0 {
            return Err(Error::InvalidConfig("divergence_window must be at least 1".into()));
        }
        Ok(())
    }

    fn converged(&self, step: f64, lambda: C64) -> bool {
        step <= self.tol * (1.0 + lambda.norm())
    }
}

/// Dense factorization of `λE − A + correction`.
#[derive(Debug, Clone)]
pub struct ShiftedOperator {
    lambda: C64,
    form: HForm,
    factor: Factorization,
}

impl ShiftedOperator {
    pub fn new(pencil: &ProjectionPencil, pair: &SubspacePair, lambda: C64, form: HForm) -> Result<Self> {
        let er = pencil.e().mul(pair.right());
        let el = pencil.e().mul(pair.left());
        Self::from_parts(pencil, &er, &el, lambda, form)
    }

    fn from_parts(pencil: &ProjectionPencil, er: &CMat, el: &CMat, lambda: C64, form: HForm) -> Result<Self> {
        let m = assemble_shifted(pencil, er, el, lambda, form);
        let factor = factor_dense(&m, &FactorOptions::default()).map_err(|_| Error::ShiftSingular { shift: lambda })?;
        if !(factor.condition_estimate() <= SHIFT_CONDITION_LIMIT) {
            return Err(Error::ShiftSingular { shift: lambda });
        }
        Ok(ShiftedOperator { lambda, form, factor })
    }

    /// The unfactored matrix.
    pub fn matrix(pencil: &ProjectionPencil, pair: &SubspacePair, lambda: C64, form: HForm) -> CMat {
        let er = pencil.e().mul(pair.right());
        let el = pencil.e().mul(pair.left());
        assemble_shifted(pencil, &er, &el, lambda, form)
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn form(&self) -> HForm {
        self.form
    }

    pub fn condition_estimate(&self) -> f64 {
        self.factor.condition_estimate()
    }

    pub fn solve(&self, b: &CMat) -> Result<CMat> {
        self.factor.solve(b)
    }

    pub fn solve_adjoint(&self, b: &CMat) -> Result<CMat> {
        self.factor.solve_adjoint(b)
    }
}

fn assemble_shifted(pencil: &ProjectionPencil, er: &CMat, el: &CMat, lambda: C64, form: HForm) -> CMat {
    let mut m = pencil.e_dense() * lambda - pencil.a_dense();
    let a = pencil.a_dense();
    if matches!(form, HForm::Qa | HForm::Anticommutator) {
        m += er * el.ad_mul(a);
    }
    if matches!(form, HForm::Aq | HForm::Anticommutator) {
        m += (a * er) * el.adjoint();
    }
    m
}

/// A reduced description of a pencil around a subspace pair.
pub trait Reduction {
    fn pencil(&self) -> &ProjectionPencil;
    fn pair(&self) -> &SubspacePair;
    /// `ℱᴴAℰ`.
    fn base(&self) -> &CMat;
    fn shifted(&self, lambda: C64) -> Result<Box<dyn Shifted + '_>>;
    fn with_pair(&self, pair: SubspacePair) -> Result<Self>
    where
        Self: Sized;
    /// Rule used to follow a single mode across iterations.
    fn tracking(&self) -> Tracking {
        Tracking::Overlap
    }
    /// Whether a singular shift means the shift is an eigenvalue.
    fn singular_shift_converges(&self) -> bool {
        false
    }
}

/// A reduction evaluated at one shift.
pub trait Shifted {
    /// `A_rr + H(λ)`.
    fn reduced(&self) -> Result<CMat>;
    /// Next-eigenvalue candidates with their reduced right and left vectors.
    fn candidates(&self) -> Result<Vec<Candidate>> {
        candidates(&self.reduced()?)
    }
    /// Full right and left vectors from reduced ones.
    fn recover(&self, alpha: &CVec, beta: &CVec) -> Result<(CVec, CVec)>;
    /// Bases spanning the next subspace, when the method prescribes them.
    fn refreshed_basis(&self) -> Option<(CMat, CMat)> {
        None
    }
}

/// Dense evaluation of `H(λ) = ℱᴴA·P·N·P·Aℰ`.
#[derive(Debug, Clone)]
pub struct DenseReduction<'p> {
    pencil: &'p ProjectionPencil,
    pair: SubspacePair,
    form: HForm,
    e_right: CMat,
    e_left: CMat,
    a_right: CMat,
    left_a: CMat,
    base: CMat,
}

impl<'p> DenseReduction<'p> {
    pub fn new(pencil: &'p ProjectionPencil, pair: SubspacePair, form: HForm) -> Result<Self> {
        if pair.order() != pencil.dim() {
            return Err(mismatch(format!("pair of order {} for pencil of order {}", pair.order(), pencil.dim())));
        }
        let e_right = pencil.e().mul(pair.right());
        let e_left = pencil.e().mul(pair.left());
        let a_right = pencil.a().mul(pair.right());
        let left_a = pencil.a().adjoint_mul(pair.left()).adjoint();
        let base = pair.left().ad_mul(&a_right);
        Ok(DenseReduction { pencil, pair, form, e_right, e_left, a_right, left_a, base })
    }

    pub fn form(&self) -> HForm {
        self.form
    }

    pub fn evaluate(&self, lambda: C64) -> Result<DenseShifted<'_, 'p>> {
        let op = ShiftedOperator::from_parts(self.pencil, &self.e_right, &self.e_left, lambda, self.form)?;
        let pa = self.project(&self.a_right);
        let x = op.solve(&pa)?;
        let px = self.project(&x);
        let reduced = &self.base + &self.left_a * &px;
        Ok(DenseShifted { parent: self, lambda, op, dual: OnceCell::new(), px, reduced })
    }

    /// `P x = x − Eℰ(ℱᴴE x)`.
    fn project(&self, x: &CMat) -> CMat {
        x - &self.e_right * self.e_left.ad_mul(x)
    }

    /// `Pᴴ x = x − Eℱ(ℰᴴE x)`.
    fn project_adjoint(&self, x: &CMat) -> CMat {
        x - &self.e_left * self.e_right.ad_mul(x)
    }
}

impl<'p> Reduction for DenseReduction<'p> {
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
        DenseReduction::new(self.pencil, pair, self.form)
    }
}

/// [`DenseReduction`] at one shift; the dual operator for left recovery is
/// factored on first use.
pub struct DenseShifted<'a, 'p> {
    parent: &'a DenseReduction<'p>,
    lambda: C64,
    op: ShiftedOperator,
    dual: OnceCell<ShiftedOperator>,
    px: CMat,
    reduced: CMat,
}

impl DenseShifted<'_, '_> {
    /// `H(λ)` alone.
    pub fn h(&self) -> CMat {
        &self.reduced - &self.parent.base
    }

    pub fn operator(&self) -> &ShiftedOperator {
        &self.op
    }

    fn dual(&self) -> Result<&ShiftedOperator> {
        if self.op.form() == self.op.form().dual() {
            return Ok(&self.op);
        }
        if self.dual.get().is_none() {
            let p = self.parent;
            let op = ShiftedOperator::from_parts(p.pencil, &p.e_right, &p.e_left, self.lambda, self.op.form().dual())?;
            let _ = self.dual.set(op);
        }
        Ok(self.dual.get().expect("set above"))
    }

    /// `(z, y)` with `z = P N P Aℰα` and `yᴴ = βᴴℱᴴA P N P`.
    pub fn recover_parts(&self, alpha: &CVec, beta: &CVec) -> Result<(CVec, CVec)> {
        let n = self.parent.pair.dim();
        if alpha.len() != n || beta.len() != n {
            return Err(mismatch("reduced vector length differs from subspace dimension"));
        }
        let z = &self.px * alpha;
        let b = self.parent.left_a.ad_mul(&as_col(beta));
        let c = self.dual()?.solve_adjoint(&self.parent.project_adjoint(&b))?;
        let y = self.parent.project_adjoint(&c);
        Ok((z, CVec::from_column_slice(y.as_slice())))
    }
}

impl Shifted for DenseShifted<'_, '_> {
    fn reduced(&self) -> Result<CMat> {
        Ok(self.reduced.clone())
    }

    fn recover(&self, alpha: &CVec, beta: &CVec) -> Result<(CVec, CVec)> {
        let (z, y) = self.recover_parts(alpha, beta)?;
        let pair = &self.parent.pair;
        Ok((pair.right() * alpha + z, pair.left() * beta + y))
    }
}

fn as_col(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

/// `H(λ)` for a normalized pair.
pub fn h_general(pencil: &ProjectionPencil, pair: &SubspacePair, lambda: C64, form: HForm) -> Result<CMat> {
    let red = DenseReduction::new(pencil, pair.clone(), form)?;
    Ok(red.evaluate(lambda)?.h())
}

/// Residual parts and full vectors from reduced coordinates.
#[derive(Debug, Clone)]
pub struct Recovered {
    pub z: CVec,
    pub y: CVec,
    pub v: CVec,
    pub w: CVec,
}

pub fn recover_z_y(
    pencil: &ProjectionPencil,
    pair: &SubspacePair,
    lambda: C64,
    alpha: &CVec,
    beta: &CVec,
    form: HForm,
) -> Result<Recovered> {
    let red = DenseReduction::new(pencil, pair.clone(), form)?;
    let s = red.evaluate(lambda)?;
    let (z, y) = s.recover_parts(alpha, beta)?;
    let v = pair.right() * alpha + &z;
    let w = pair.left() * beta + &y;
    Ok(Recovered { z, y, v, w })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Right,
    Left,
}

/// `ℰ ← ℰ + (I − E)L` or `ℱ ← ℱ + (I − E)L`.
pub fn invariance_shift(pair: &SubspacePair, pencil: &ProjectionPencil, l: &CMat, side: Side) -> Result<SubspacePair> {
    if l.shape() != pair.right().shape() {
        return Err(mismatch("shift matrix shape differs from the basis"));
    }
    let added = l - pencil.e().mul(l);
    let (right, left) = match side {
        Side::Right => (pair.right() + &added, pair.left().clone()),
        Side::Left => (pair.right().clone(), pair.left() + &added),
    };
    SubspacePair::normalized(right, left, pencil.e())
}

/// The pair used after one vector-valued update.
pub fn updated_pair(
    pencil: &ProjectionPencil,
    pair: &SubspacePair,
    v: &CVec,
    w: &CVec,
    alpha: &CVec,
    beta: &CVec,
    policy: SubspaceUpdate,
) -> Result<SubspacePair> {
    if policy == SubspaceUpdate::None {
        return Ok(pair.clone());
    }
    let (v, w) = match policy {
        SubspaceUpdate::ZeroedStatic => (pencil.e().mul_vec(v), pencil.e().mul_vec(w)),
        _ => (v.clone(), w.clone()),
    };
    let mut right = pair.right().clone();
    let mut left = pair.left().clone();
    match pair.blocks() {
        Some(blocks) => {
            for (k, rows) in blocks.iter().enumerate() {
                right.column_mut(k).fill(C64::new(0.0, 0.0));
                left.column_mut(k).fill(C64::new(0.0, 0.0));
                for i in rows.clone() {
                    right[(i, k)] = v[i];
                    left[(i, k)] = w[i];
                }
            }
        }
        None => {
            right.set_column(argmax_abs(alpha), &v);
            left.set_column(argmax_abs(beta), &w);
        }
    }
    let next = SubspacePair::normalized(right, left, pencil.e())?;
    match pair.blocks() {
        Some(b) => next.with_blocks(b.to_vec()),
        None => Ok(next),
    }
}

fn argmax_abs(x: &CVec) -> usize {
    (0..x.len()).max_by(|&i, &j| x[i].norm().total_cmp(&x[j].norm()).then(j.cmp(&i))).unwrap_or(0)
}

/// Pair spanning prescribed bases, orthonormalized when wider than one column.
pub fn pair_from_bases(pencil: &ProjectionPencil, right: CMat, left: CMat, policy: SubspaceUpdate) -> Result<SubspacePair> {
    let (right, left) = match policy {
        SubspaceUpdate::ZeroedStatic => (pencil.e().mul(&right), pencil.e().mul(&left)),
        _ => (right, left),
    };
    let n = right.ncols();
    if n > 1 {
        let r = orthonormal_basis(&right, 1e-10, n);
        let l = orthonormal_basis(&left, 1e-10, n);
        if r.ncols() < n || l.ncols() < n {
            return Err(Error::DegenerateSubspace("refreshed basis lost rank".into()));
        }
        SubspacePair::normalized(r, l, pencil.e())
    } else {
        SubspacePair::normalized(right, left, pencil.e())
    }
}

fn residual_max(pencil: &ProjectionPencil, lambda: C64, v: &CVec, w: &CVec) -> f64 {
    let (r, l) = residual(pencil, lambda, v, w);
    r.max(l)
}

fn initial_iterate(pencil: &ProjectionPencil, pair: &SubspacePair, c: &Candidate) -> (CVec, CVec, Iterate) {
    let v = pair.right() * &c.alpha;
    let w = pair.left() * &c.beta;
    let res = residual_max(pencil, c.lambda, &v, &w);
    let it = Iterate { lambda: c.lambda, step: 0.0, residual: res, rho: None };
    (v, w, it)
}

/// Step-growth counter for divergence detection.
#[derive(Debug, Clone, Copy)]
struct Growth {
    prev: f64,
    count: usize,
}

impl Growth {
    fn new() -> Self {
        Growth { prev: f64::INFINITY, count: 0 }
    }

    fn push(&mut self, step: f64) -> usize {
        if step > self.prev || !step.is_finite() {
            self.count += 1
        } else {
            self.count = 0
        }
        self.prev = step;
        self.count
    }
}

/// Single-mode fixed point `λ_j ∈ spec(A_rr + H(λ_{j−1}))`, optionally
/// refreshing the subspace pair after every step.
pub fn solve_single<R: Reduction>(
    model: R,
    selector: &Selector,
    opts: &SolverOptions,
    update: bool,
) -> Result<(ModeEstimate, ConvergenceReport)> {
    opts.validate()?;
    let mut model = model;
    let initial_right = model.pair().right().clone();
    let cands = candidates(model.base())?;
    let first = selector.rank(&cands, &initial_right, model.pair().right())?[0];
    let c = &cands[first];
    let (mut v, mut w, it) = initial_iterate(model.pencil(), model.pair(), c);
    let mut current_residual = it.residual;
    let mut lambda = c.lambda;
    let mut state = TrackState { lambda, left: w.clone() };
    let mut report = ConvergenceReport::new();
    report.push(it);
    let mut growth = Growth::new();

    for _ in 0..opts.max_iter {
        let step_result = {
            let shifted = match model.shifted(lambda) {
                Ok(s) => s,
                Err(Error::ShiftSingular { shift }) => {
                    if model.singular_shift_converges() && current_residual <= 10.0 * opts.tol {
                        let est = ModeEstimate::from_vectors(model.pencil(), model.pair(), lambda, v, w);
                        return Ok((est, report.finish(Status::Converged)));
                    }
                    return Err(Error::ShiftSingular { shift });
                }
                Err(e) => return Err(e),
            };
            let cands = shifted.candidates()?;
            if cands.is_empty() {
                return Err(Error::InsufficientData("reduced problem has no finite candidates".into()));
            }
            let pair = model.pair();
            let k = if selector.is_objective() {
                selector.rank(&cands, &initial_right, pair.right())?[0]
            } else {
                let e_right = model.pencil().e().mul(pair.right());
                track(model.tracking(), &state, &e_right, pair.right(), &cands)
            };
            let c = cands[k].clone();
            let (v_new, w_new) = shifted.recover(&c.alpha, &c.beta)?;
            (c, v_new, w_new, shifted.refreshed_basis())
        };
        let (c, v_new, w_new, basis) = step_result;
        let pencil = model.pencil();
        let step = (c.lambda - lambda).norm();
        let res = residual_max(pencil, c.lambda, &v_new, &w_new);
        let rho = participation_ratio_in(pencil, model.pair(), &v_new, &w_new).value();
        report.push(Iterate { lambda: c.lambda, step, residual: res, rho });
        if !c.lambda.re.is_finite() || !c.lambda.im.is_finite() {
            return Err(Error::Diverged { report: Box::new(report.finish(Status::Diverged)) });
        }
        lambda = c.lambda;
        v = v_new;
        w = w_new;
        current_residual = res;
        state = TrackState { lambda, left: model.pair().left() * &c.beta };
        if opts.converged(step, lambda) {
            let est = ModeEstimate::from_vectors(model.pencil(), model.pair(), lambda, v, w);
            return Ok((est, report.finish(Status::Converged)));
        }
        if growth.push(step) >= opts.divergence_window {
            return Err(Error::Diverged { report: Box::new(report.finish(Status::Diverged)) });
        }
        if update && opts.subspace_update != SubspaceUpdate::None {
            let next = match basis {
                Some((r, l)) => pair_from_bases(model.pencil(), r, l, opts.subspace_update)?,
                None => updated_pair(model.pencil(), model.pair(), &v, &w, &c.alpha, &c.beta, opts.subspace_update)?,
            };
            model = model.with_pair(next)?;
        }
    }
    Err(Error::MaxIterations { report: Box::new(report.finish(Status::MaxIterations)) })
}

/// `M` with `M·A = Hcols`, completed by `H_ref` off the column space of `A`:
/// `M = H_ref + (Hcols − H_ref·A)·A⁺`.
pub fn fit_completion(h_ref: &CMat, h_cols: &CMat, alphas: &CMat) -> Result<CMat> {
    let (n, k) = alphas.shape();
    if k > n {
        return Err(Error::InvalidConfig(format!("{k} tracked modes exceed subspace dimension {n}")));
    }
    if h_ref.shape() != (n, n) || h_cols.shape() != (n, k) {
        return Err(mismatch("fit blocks have inconsistent shapes"));
    }
    Ok(h_ref + (h_cols - h_ref * alphas) * pseudo_inverse(alphas)?)
}

struct Track {
    lambda: C64,
    alpha: CVec,
    beta: CVec,
    v: CVec,
    w: CVec,
    residual: f64,
    frozen: bool,
    growth: Growth,
    report: ConvergenceReport,
}

/// Simultaneous iteration on several modes through one fitted reduced matrix.
pub fn solve_multi<R: Reduction>(
    model: R,
    selectors: &[Selector],
    opts: &SolverOptions,
    update: bool,
) -> Result<(Vec<ModeEstimate>, Vec<ConvergenceReport>)> {
    opts.validate()?;
    let mut model = model;
    let n = model.pair().dim();
    if selectors.is_empty() {
        return Err(Error::InvalidConfig("at least one target mode required".into()));
    }
    if selectors.len() > n {
        return Err(Error::InvalidConfig(format!("{} targets exceed subspace dimension {n}", selectors.len())));
    }
    let initial_right = model.pair().right().clone();
    let cands = candidates(model.base())?;
    let picks = select_distinct(selectors, &cands, &initial_right, model.pair().right())?;
    let mut modes: Vec<Track> = picks
        .iter()
        .map(|&k| {
            let c = &cands[k];
            let (v, w, it) = initial_iterate(model.pencil(), model.pair(), c);
            let mut report = ConvergenceReport::new();
            let residual = it.residual;
            report.push(it);
            Track {
                lambda: c.lambda,
                alpha: c.alpha.clone(),
                beta: c.beta.clone(),
                v,
                w,
                residual,
                frozen: false,
                growth: Growth::new(),
                report,
            }
        })
        .collect();

    let finish = |model: &R, modes: Vec<Track>| {
        let mut est = Vec::with_capacity(modes.len());
        let mut reps = Vec::with_capacity(modes.len());
        for t in modes {
            est.push(ModeEstimate::from_vectors(model.pencil(), model.pair(), t.lambda, t.v, t.w));
            reps.push(t.report.finish(Status::Converged));
        }
        (est, reps)
    };

    for _ in 0..opts.max_iter {
        let outcome = {
            let mut shifted: Vec<Option<Box<dyn Shifted + '_>>> = Vec::with_capacity(modes.len());
            for t in modes.iter_mut() {
                if t.frozen {
                    shifted.push(None);
                    continue;
                }
                match model.shifted(t.lambda) {
                    Ok(s) => shifted.push(Some(s)),
                    Err(Error::ShiftSingular { .. }) if model.singular_shift_converges() && t.residual <= 10.0 * opts.tol => {
                        t.frozen = true;
                        shifted.push(None);
                    }
                    Err(e) => return Err(e),
                }
            }
            let active: Vec<usize> = (0..modes.len()).filter(|&k| shifted[k].is_some()).collect();
            if active.is_empty() {
                None
            } else {
                let base = model.base();
                let anchor = active[0];
                let anchor_full = shifted[anchor].as_ref().expect("active").reduced()?;
                let h_ref = &anchor_full - base;
                let mut alphas = CMat::zeros(n, active.len());
                let mut h_cols = CMat::zeros(n, active.len());
                for (col, &k) in active.iter().enumerate() {
                    alphas.set_column(col, &modes[k].alpha);
                    let h = if k == anchor {
                        &h_ref * &modes[k].alpha
                    } else {
                        (shifted[k].as_ref().expect("active").reduced()? - base) * &modes[k].alpha
                    };
                    h_cols.set_column(col, &h);
                }
                let fitted = &anchor_full + (&h_cols - &h_ref * &alphas) * pseudo_inverse(&alphas)?;
                let cands = candidates(&fitted)?;
                let assign: Vec<usize> = if modes.len() == 1 {
                    let t = &modes[0];
                    let pair = model.pair();
                    let e_right = model.pencil().e().mul(pair.right());
                    let state = TrackState { lambda: t.lambda, left: pair.left() * &t.beta };
                    vec![track(model.tracking(), &state, &e_right, pair.right(), &cands)]
                } else {
                    let prev: Vec<CVec> = active.iter().map(|&k| modes[k].alpha.clone()).collect();
                    let new: Vec<CVec> = cands.iter().map(|c| c.alpha.clone()).collect();
                    pair_modes(&prev, &new)?
                };
                let mut moved = Vec::with_capacity(active.len());
                for (slot, &k) in active.iter().enumerate() {
                    let c = cands[assign[slot]].clone();
                    let (v, w) = shifted[k].as_ref().expect("active").recover(&c.alpha, &c.beta)?;
                    moved.push((k, c, v, w));
                }
                Some(moved)
            }
        };
        let Some(moved) = outcome else {
            let (e, r) = finish(&model, modes);
            return Ok((e, r));
        };
        let mut all_converged = true;
        for (k, c, v, w) in moved {
            let pencil = model.pencil();
            let t = &mut modes[k];
            let step = (c.lambda - t.lambda).norm();
            let res = residual_max(pencil, c.lambda, &v, &w);
            let rho = participation_ratio_in(pencil, model.pair(), &v, &w).value();
            t.report.push(Iterate { lambda: c.lambda, step, residual: res, rho });
            if !c.lambda.re.is_finite() || !c.lambda.im.is_finite() || t.growth.push(step) >= opts.divergence_window {
                let report = std::mem::take(&mut t.report);
                return Err(Error::Diverged { report: Box::new(report.finish(Status::Diverged)) });
            }
            all_converged &= opts.converged(step, c.lambda);
            t.lambda = c.lambda;
            t.alpha = c.alpha;
            t.beta = c.beta;
            t.v = v;
            t.w = w;
            t.residual = res;
        }
        if all_converged {
            let (e, r) = finish(&model, modes);
            return Ok((e, r));
        }
        if update && opts.subspace_update != SubspaceUpdate::None {
            let next = multi_updated_pair(model.pencil(), model.pair(), &modes, opts.subspace_update)?;
            for t in modes.iter_mut() {
                t.alpha = column(&least_squares(next.right(), &as_col(&t.v))?);
                t.beta = column(&least_squares(next.left(), &as_col(&t.w))?);
            }
            model = model.with_pair(next)?;
        }
    }
    let worst = modes.into_iter().max_by(|a, b| last_step(&a.report).total_cmp(&last_step(&b.report))).expect("at least one mode");
    Err(Error::MaxIterations { report: Box::new(worst.report.finish(Status::MaxIterations)) })
}

fn last_step(r: &ConvergenceReport) -> f64 {
    r.iterates.last().map_or(0.0, |i| i.step)
}

fn column(m: &CMat) -> CVec {
    m.column(0).into_owned()
}

fn pseudo_inverse(alphas: &CMat) -> Result<CMat> {
    let cond = condition_2(alphas);
    if !(cond <= ITERATE_CONDITION_LIMIT) {
        return Err(Error::IterateSingular { condition: cond });
    }
    least_squares(alphas, &CMat::identity(alphas.nrows(), alphas.nrows()))
}

/// Orthonormal bases spanning the latest vectors, padded from the old bases.
fn multi_updated_pair(pencil: &ProjectionPencil, pair: &SubspacePair, modes: &[Track], policy: SubspaceUpdate) -> Result<SubspacePair> {
    let n = pair.dim();
    let m = pair.order();
    let k = modes.len();
    let mut right = CMat::zeros(m, k + n);
    let mut left = CMat::zeros(m, k + n);
    for (j, t) in modes.iter().enumerate() {
        let (v, w) = match policy {
            SubspaceUpdate::ZeroedStatic => (pencil.e().mul_vec(&t.v), pencil.e().mul_vec(&t.w)),
            _ => (t.v.clone(), t.w.clone()),
        };
        right.set_column(j, &v);
        left.set_column(j, &w);
    }
    right.columns_mut(k, n).copy_from(pair.right());
    left.columns_mut(k, n).copy_from(pair.left());
    let r = orthonormal_basis(&right, 1e-10, n);
    let l = orthonormal_basis(&left, 1e-10, n);
    if r.ncols() < n || l.ncols() < n {
        return Err(Error::DegenerateSubspace("refreshed basis lost rank".into()));
    }
    SubspacePair::normalized(r, l, pencil.e())
}

/// Fixed-pair iteration; sparse pencils use the low-rank solve path.
pub fn algorithm3(
    pencil: &ProjectionPencil,
    pair: &SubspacePair,
    selector: &Selector,
    opts: &SolverOptions,
) -> Result<(ModeEstimate, ConvergenceReport)> {
    if pencil.is_sparse() {
        return solve_single(SmwReduction::new(pencil, pair.clone(), opts.h_form)?, selector, opts, false);
    }
    solve_single(DenseReduction::new(pencil, pair.clone(), opts.h_form)?, selector, opts, false)
}

/// Iteration that refreshes the pair with the latest eigenvector estimates.
pub fn algorithm4(
    pencil: &ProjectionPencil,
    pair0: &SubspacePair,
    selector: &Selector,
    opts: &SolverOptions,
) -> Result<(ModeEstimate, ConvergenceReport)> {
    if pencil.is_sparse() {
        return solve_single(SmwReduction::new(pencil, pair0.clone(), opts.h_form)?, selector, opts, true);
    }
    solve_single(DenseReduction::new(pencil, pair0.clone(), opts.h_form)?, selector, opts, true)
}

/// Simultaneous fixed-pair iteration on several modes.
pub fn algorithm2_general(
    pencil: &ProjectionPencil,
    pair: &SubspacePair,
    selectors: &[Selector],
    opts: &SolverOptions,
) -> Result<(Vec<ModeEstimate>, Vec<ConvergenceReport>)> {
    if pencil.is_sparse() {
        return solve_multi(SmwReduction::new(pencil, pair.clone(), opts.h_form)?, selectors, opts, false);
    }
    solve_multi(DenseReduction::new(pencil, pair.clone(), opts.h_form)?, selectors, opts, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Matrix, ONE, real_to_complex};
    use crate::pencil::{normalize_pair, oracle_full_spectrum};
    use nalgebra::DMatrix;

    fn dense(rows: usize, data: &[f64]) -> CMat {
        real_to_complex(&DMatrix::from_row_slice(rows, data.len() / rows, data))
    }

    fn unit_pair(p: &ProjectionPencil, i: usize) -> SubspacePair {
        let mut e = CMat::zeros(p.dim(), 1);
        e[(i, 0)] = ONE;
        normalize_pair(e.clone(), e, p).unwrap()
    }

    fn two_by_two() -> ProjectionPencil {
        ProjectionPencil::new(Matrix::Dense(CMat::identity(2, 2)), Matrix::Dense(dense(2, &[2.0, 0.1, 0.1, 0.0]))).unwrap()
    }

    #[test]
    fn scalar_h_matches_formula() {
        let p = two_by_two();
        let pair = unit_pair(&p, 0);
        for form in [HForm::Anticommutator, HForm::Qa, HForm::Aq] {
            let h = h_general(&p, &pair, C64::new(2.0, 0.0), form).unwrap();
            assert!((h[(0, 0)] - C64::new(0.005, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn invariant_subspace_gives_zero_h() {
        let a = dense(3, &[1.0, 2.0, 0.0, 0.0, 3.0, 0.0, 0.0, 5.0, 4.0]);
        let p = ProjectionPencil::new(Matrix::Dense(CMat::identity(3, 3)), Matrix::Dense(a)).unwrap();
        let pair = unit_pair(&p, 0);
        let h = h_general(&p, &pair, C64::new(0.5, 0.2), HForm::Qa).unwrap();
        assert_eq!(h.norm(), 0.0);
        let r = recover_z_y(&p, &pair, C64::new(1.0, 0.0), &CVec::from_element(1, ONE), &CVec::from_element(1, ONE), HForm::Qa).unwrap();
        assert_eq!(r.z.norm(), 0.0);
    }

    #[test]
    fn algorithm3_scalar_fixed_point() {
        let p = two_by_two();
        let pair = unit_pair(&p, 0);
        let (est, rep) = algorithm3(&p, &pair, &Selector::default(), &SolverOptions::default()).unwrap();
        let exact = 1.0 + 1.01f64.sqrt();
        assert!((est.lambda.re - exact).abs() < 1e-12);
        assert_eq!(rep.status, Status::Converged);
        assert!(est.residual < 1e-9);
    }

    #[test]
    fn algorithm4_exact_pair_converges_immediately() {
        let p = two_by_two();
        let spec = oracle_full_spectrum(&p).unwrap();
        let mode = spec.sorted()[1];
        let pair = normalize_pair(as_col(&mode.v), as_col(&mode.w), &p).unwrap();
        let (est, rep) = algorithm4(&p, &pair, &Selector::default(), &SolverOptions::default()).unwrap();
        assert!((est.lambda - mode.lambda).norm() < 1e-12);
        assert_eq!(rep.iterations(), 1);
    }

    #[test]
    fn static_zeroing_matches_full_update() {
        let e = dense(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let a = dense(3, &[-1.0, 0.3, 0.5, 0.2, -3.0, 0.4, 0.6, 0.1, -2.0]);
        let p = ProjectionPencil::new(Matrix::Dense(e), Matrix::Dense(a)).unwrap();
        let r = dense(3, &[1.0, 0.1, 0.7]);
        let pair = normalize_pair(r.clone(), r, &p).unwrap();
        let full = SolverOptions::default();
        let zeroed = SolverOptions { subspace_update: SubspaceUpdate::ZeroedStatic, ..full.clone() };
        let (_, a1) = algorithm4(&p, &pair, &Selector::default(), &full).unwrap();
        let (_, a2) = algorithm4(&p, &pair, &Selector::default(), &zeroed).unwrap();
        assert_eq!(a1.iterates.len(), a2.iterates.len());
        for (x, y) in a1.iterates.iter().zip(&a2.iterates) {
            assert!((x.lambda - y.lambda).norm() <= 1e-10 * (1.0 + x.lambda.norm()));
        }
    }

    #[test]
    fn invariance_shift_identity_cases() {
        let p = two_by_two();
        let pair = unit_pair(&p, 0);
        let l = dense(2, &[0.3, -0.8]);
        let shifted = invariance_shift(&pair, &p, &l, Side::Right).unwrap();
        assert_eq!(shifted.right(), pair.right());
        let zero = invariance_shift(&pair, &p, &CMat::zeros(2, 1), Side::Left).unwrap();
        assert_eq!(zero, pair);
    }

    #[test]
    fn completion_reproduces_columns() {
        let h_ref = dense(2, &[1.0, 2.0, 3.0, 4.0]);
        let alphas = dense(2, &[1.0, 1.0]);
        let cols = dense(2, &[5.0, -1.0]);
        let m = fit_completion(&h_ref, &cols, &alphas).unwrap();
        assert!((&m * &alphas - &cols).norm() < 1e-13);
        let orth = dense(2, &[1.0, -1.0]);
        assert!((&m * &orth - &h_ref * &orth).norm() < 1e-13);
        assert!(matches!(
            fit_completion(&CMat::zeros(2, 2), &CMat::zeros(2, 2), &dense(2, &[1.0, 2.0, 1.0, 2.0])),
            Err(Error::IterateSingular { .. })
        ));
    }

    #[test]
    fn options_validation() {
        assert!(SolverOptions { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverOptions { max_iter: 0, ..Default::default() }.validate().is_err());
    }
}
