//! Shift-invert formulations: `V = (A − λE)⁻¹Eℰ`, `𝓜 = ℱᴴEV` and the
//! iterations whose selected eigenvalue of `𝓜` is `(λ_j − λ_{j−1})⁻¹`.

use crate::error::{Error, Result, mismatch};
use crate::generalized::{Reduction, Shifted, SolverOptions, solve_multi, solve_single};
use crate::linalg::{C64, CMat, CVec, DenseLu, FactorOptions, Factorization, eig_dense, factor};
use crate::pencil::{ModeEstimate, ProjectionPencil, SubspacePair};
use crate::report::ConvergenceReport;
use crate::select::{Candidate, Selector};
pub use crate::select::{pair_modes, select_mode_objective};

/// One shift-invert step at `λ_prev`.
#[derive(Debug, Clone)]
pub struct DirectIterate {
    pub lambda_prev: C64,
    /// `(A − λE)⁻¹Eℰ`.
    pub v: CMat,
    /// `(A − λE)⁻ᴴEℱ`, so that `Wᴴ = ℱᴴE(A − λE)⁻¹`; absent unless requested.
    pub w: Option<CMat>,
    /// `ℱᴴEV`.
    pub cal_m: CMat,
    /// `𝓜⁻¹ + λI`; absent when `𝓜` is singular.
    pub cal_n: Option<CMat>,
    /// Condition estimate of `A − λE`.
    pub condition: f64,
}

impl DirectIterate {
    /// Whether `A − λE` is ill-conditioned beyond `1/tol`; the solves remain
    /// usable, as in inverse iteration.
    pub fn near_singular(&self, tol: f64) -> bool {
        !(self.condition <= 1.0 / tol)
    }
}

fn shifted_factor(pencil: &ProjectionPencil, lambda: C64) -> Result<Factorization> {
    let m = pencil.combination(-lambda, C64::new(1.0, 0.0));
    match factor(&m, &FactorOptions::default()) {
        Ok(f) => Ok(f),
        Err(Error::SingularMatrix { .. }) => Err(Error::ShiftSingular { shift: lambda }),
        Err(e) => Err(e),
    }
}

/// `V`, `W`, `𝓜` and `𝓝` at `λ_prev` from one factorization of `A − λ_prev E`.
pub fn build_direct_iterate(pencil: &ProjectionPencil, pair: &SubspacePair, lambda_prev: C64, with_left: bool) -> Result<DirectIterate> {
    if pair.order() != pencil.dim() {
        return Err(mismatch("pair order differs from pencil order"));
    }
    let e_right = pencil.e().mul(pair.right());
    let e_left = pencil.e().mul(pair.left());
    build_from_parts(pencil, &e_right, &e_left, lambda_prev, with_left)
}

fn build_from_parts(pencil: &ProjectionPencil, e_right: &CMat, e_left: &CMat, lambda: C64, with_left: bool) -> Result<DirectIterate> {
    let f = shifted_factor(pencil, lambda)?;
    let v = f.solve(e_right)?;
    let w = if with_left { Some(f.solve_adjoint(e_left)?) } else { None };
    let cal_m = e_left.ad_mul(&v);
    let n = cal_m.nrows();
    let cal_n = DenseLu::new(cal_m.clone(), None)
        .ok()
        .and_then(|lu| lu.solve(&CMat::identity(n, n)).ok())
        .map(|inv| inv + CMat::identity(n, n) * lambda);
    Ok(DirectIterate { lambda_prev: lambda, v, w, cal_m, cal_n, condition: f.condition_estimate() })
}

/// [`Reduction`] through shift-invert solves with the pencil's own storage.
#[derive(Debug, Clone)]
pub struct DirectReduction<'p> {
    pencil: &'p ProjectionPencil,
    pair: SubspacePair,
    e_right: CMat,
    e_left: CMat,
    base: CMat,
}

impl<'p> DirectReduction<'p> {
    pub fn new(pencil: &'p ProjectionPencil, pair: SubspacePair) -> Result<Self> {
        if pair.order() != pencil.dim() {
            return Err(mismatch("pair order differs from pencil order"));
        }
        let e_right = pencil.e().mul(pair.right());
        let e_left = pencil.e().mul(pair.left());
        let base = pair.left().ad_mul(&pencil.a().mul(pair.right()));
        Ok(DirectReduction { pencil, pair, e_right, e_left, base })
    }
}

struct DirectShifted {
    it: DirectIterate,
}

impl Reduction for DirectReduction<'_> {
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
        let it = build_from_parts(self.pencil, &self.e_right, &self.e_left, lambda, true)?;
        Ok(Box::new(DirectShifted { it }))
    }

    fn with_pair(&self, pair: SubspacePair) -> Result<Self> {
        DirectReduction::new(self.pencil, pair)
    }

    fn singular_shift_converges(&self) -> bool {
        true
    }
}

impl Shifted for DirectShifted {
    fn reduced(&self) -> Result<CMat> {
        self.it.cal_n.clone().ok_or(Error::IterateSingular { condition: f64::INFINITY })
    }

    /// Eigenpairs `(μ, α̃)` of `𝓜` mapped to `λ_prev + 1/μ`; `μ = 0` is dropped.
    fn candidates(&self) -> Result<Vec<Candidate>> {
        let eig = eig_dense(&self.it.cal_m)?;
        let scale = self.it.cal_m.norm();
        Ok((0..eig.values.len())
            .filter(|&i| eig.values[i].norm() > 1e-14 * scale)
            .map(|i| Candidate {
                lambda: self.it.lambda_prev + eig.values[i].inv(),
                alpha: eig.right.column(i).into_owned(),
                beta: eig.left.column(i).into_owned(),
            })
            .collect())
    }

    /// `v = Vα̃`, `w = Wβ̃`.
    fn recover(&self, alpha: &CVec, beta: &CVec) -> Result<(CVec, CVec)> {
        let w = self.it.w.as_ref().expect("left solves requested");
        Ok((&self.it.v * alpha, w * beta))
    }

    fn refreshed_basis(&self) -> Option<(CMat, CMat)> {
        Some((self.it.v.clone(), self.it.w.clone().expect("left solves requested")))
    }
}

/// Shift-invert counterpart of the fixed-pair iteration.
pub fn algorithm5(
    pencil: &ProjectionPencil,
    pair: &SubspacePair,
    selector: &Selector,
    opts: &SolverOptions,
) -> Result<(ModeEstimate, ConvergenceReport)> {
    solve_single(DirectReduction::new(pencil, pair.clone())?, selector, opts, false)
}

/// Shift-invert iteration with `ℰ ← V`, `ℱ ← W` after every step.
pub fn algorithm6(
    pencil: &ProjectionPencil,
    pair0: &SubspacePair,
    selector: &Selector,
    opts: &SolverOptions,
) -> Result<(ModeEstimate, ConvergenceReport)> {
    solve_single(DirectReduction::new(pencil, pair0.clone())?, selector, opts, true)
}

/// Several modes through one fitted matrix with a fixed pair.
pub fn algorithm7(
    pencil: &ProjectionPencil,
    pair: &SubspacePair,
    selectors: &[Selector],
    opts: &SolverOptions,
) -> Result<(Vec<ModeEstimate>, Vec<ConvergenceReport>)> {
    solve_multi(DirectReduction::new(pencil, pair.clone())?, selectors, opts, false)
}

/// As [`algorithm7`] with the pair refreshed to span the latest vectors.
pub fn algorithm8(
    pencil: &ProjectionPencil,
    pair0: &SubspacePair,
    selectors: &[Selector],
    opts: &SolverOptions,
) -> Result<(Vec<ModeEstimate>, Vec<ConvergenceReport>)> {
    solve_multi(DirectReduction::new(pencil, pair0.clone())?, selectors, opts, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{PartitionedSystem, algorithm1};
    use crate::generalized::algorithm3;
    use crate::linalg::{Matrix, ONE, real_to_complex};
    use crate::pencil::normalize_pair;
    use nalgebra::DMatrix;

    fn dense(rows: usize, data: &[f64]) -> CMat {
        real_to_complex(&DMatrix::from_row_slice(rows, data.len() / rows, data))
    }

    fn e1(m: usize) -> CMat {
        let mut e = CMat::zeros(m, 1);
        e[(0, 0)] = ONE;
        e
    }

    #[test]
    fn diagonal_iterate() {
        let p = ProjectionPencil::new(Matrix::Dense(CMat::identity(2, 2)), Matrix::Dense(dense(2, &[1.0, 0.0, 0.0, 2.0]))).unwrap();
        let pair = normalize_pair(e1(2), e1(2), &p).unwrap();
        let it = build_direct_iterate(&p, &pair, C64::new(0.0, 0.0), false).unwrap();
        assert_eq!(it.v, e1(2));
        assert_eq!(it.cal_m[(0, 0)], ONE);
        assert_eq!(it.cal_n.unwrap()[(0, 0)], ONE);
        assert!(it.w.is_none());
    }

    #[test]
    fn exact_shift_is_converged() {
        let p = ProjectionPencil::new(Matrix::Dense(CMat::identity(2, 2)), Matrix::Dense(dense(2, &[1.0, 0.0, 0.0, 2.0]))).unwrap();
        let pair = normalize_pair(e1(2), e1(2), &p).unwrap();
        assert!(matches!(build_direct_iterate(&p, &pair, ONE, false), Err(Error::ShiftSingular { .. })));
        let (est, rep) = algorithm5(&p, &pair, &Selector::default(), &SolverOptions::default()).unwrap();
        assert_eq!(est.lambda, ONE);
        assert!(est.residual <= 1e-10);
        assert_eq!(rep.iterates.len(), 1);
    }

    #[test]
    fn scalar_example_matches_algorithm1() {
        let a = dense(2, &[2.0, 0.1, 0.1, 0.0]);
        let sys = PartitionedSystem::split(&a, 1).unwrap();
        let p = sys.pencil();
        let pair = sys.canonical_pair();
        let opts = SolverOptions::default();
        let (e5, r5) = algorithm5(&p, &pair, &Selector::default(), &opts).unwrap();
        let (_, r1) = algorithm1(&sys, &Selector::default(), &opts).unwrap();
        let (_, r3) = algorithm3(&p, &pair, &Selector::default(), &opts).unwrap();
        assert!((e5.lambda.re - (1.0 + 1.01f64.sqrt())).abs() < 1e-12);
        for ((x, y), z) in r5.iterates.iter().zip(&r1.iterates).zip(&r3.iterates) {
            assert!((x.lambda - y.lambda).norm() < 1e-12);
            assert!((x.lambda - z.lambda).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_fit_with_unit_alphas() {
        let a = dense(3, &[-1.0, 0.2, 0.3, 0.1, -2.0, 0.2, 0.3, 0.1, -7.0]);
        let p = ProjectionPencil::new(Matrix::Dense(CMat::identity(3, 3)), Matrix::Dense(a)).unwrap();
        let b = CMat::identity(3, 2);
        let pair = normalize_pair(b.clone(), b, &p).unwrap();
        let sels = [Selector::Index { index: 0 }, Selector::Index { index: 1 }];
        let (est, _) = algorithm7(&p, &pair, &sels, &SolverOptions::default()).unwrap();
        let spec = crate::pencil::oracle_full_spectrum(&p).unwrap();
        for e in &est {
            let k = spec.nearest(e.lambda).unwrap();
            assert!((spec.modes[k].lambda - e.lambda).norm() < 1e-9);
        }
    }
}
