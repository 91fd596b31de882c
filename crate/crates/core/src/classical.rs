//! Selective modal analysis on explicitly partitioned standard problems
//! `ẋ = Ax` with relevant block `r` and less-relevant block `z`.

use crate::error::{Error, Result, mismatch};
use crate::generalized::{Reduction, SHIFT_CONDITION_LIMIT, Shifted, SolverOptions, solve_multi, solve_single};
use crate::linalg::{C64, CMat, CVec, FactorOptions, Factorization, Matrix, factor_dense};
use crate::pencil::{ModeEstimate, ProjectionPencil, SubspacePair};
use crate::report::ConvergenceReport;
use crate::select::{Selector, Tracking};

/// `A = [[A_rr, A_rz], [A_zr, A_zz]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedSystem {
    a_rr: CMat,
    a_rz: CMat,
    a_zr: CMat,
    a_zz: CMat,
}

impl PartitionedSystem {
    pub fn new(a_rr: CMat, a_rz: CMat, a_zr: CMat, a_zz: CMat) -> Result<Self> {
        let n = a_rr.nrows();
        let k = a_zz.nrows();
        if a_rr.ncols() != n || a_zz.ncols() != k || a_rz.shape() != (n, k) || a_zr.shape() != (k, n) {
            return Err(mismatch(format!(
                "blocks {:?} {:?} {:?} {:?} do not tile a square matrix",
                a_rr.shape(),
                a_rz.shape(),
                a_zr.shape(),
                a_zz.shape()
            )));
        }
        Ok(PartitionedSystem { a_rr, a_rz, a_zr, a_zz })
    }

    /// Splits `a` after its first `n` rows and columns.
    pub fn split(a: &CMat, n: usize) -> Result<Self> {
        let m = a.nrows();
        if a.ncols() != m || n > m {
            return Err(mismatch(format!("cannot split a {}x{} matrix at {n}", a.nrows(), a.ncols())));
        }
        let k = m - n;
        Self::new(
            a.view((0, 0), (n, n)).into_owned(),
            a.view((0, n), (n, k)).into_owned(),
            a.view((n, 0), (k, n)).into_owned(),
            a.view((n, n), (k, k)).into_owned(),
        )
    }

    pub fn relevant(&self) -> usize {
        self.a_rr.nrows()
    }

    pub fn order(&self) -> usize {
        self.a_rr.nrows() + self.a_zz.nrows()
    }

    pub fn a_rr(&self) -> &CMat {
        &self.a_rr
    }

    pub fn assembled(&self) -> CMat {
        let n = self.relevant();
        let m = self.order();
        let mut a = CMat::zeros(m, m);
        a.view_mut((0, 0), (n, n)).copy_from(&self.a_rr);
        a.view_mut((0, n), (n, m - n)).copy_from(&self.a_rz);
        a.view_mut((n, 0), (m - n, n)).copy_from(&self.a_zr);
        a.view_mut((n, n), (m - n, m - n)).copy_from(&self.a_zz);
        a
    }

    /// The equivalent pencil `(I, A)`.
    pub fn pencil(&self) -> ProjectionPencil {
        let m = self.order();
        ProjectionPencil::new(Matrix::Dense(CMat::identity(m, m)), Matrix::Dense(self.assembled())).expect("identity is a projection")
    }

    /// `ℰ = ℱ = [I_n; 0]`.
    pub fn canonical_pair(&self) -> SubspacePair {
        let b = CMat::identity(self.order(), self.relevant());
        SubspacePair::normalized(b.clone(), b, &Matrix::Dense(CMat::identity(self.order(), self.order())))
            .expect("canonical basis is normalized")
    }

    fn factor_shift(&self, lambda: C64) -> Result<Option<Factorization>> {
        let k = self.a_zz.nrows();
        if k == 0 {
            return Ok(None);
        }
        let shifted = CMat::identity(k, k) * lambda - &self.a_zz;
        let f = factor_dense(&shifted, &FactorOptions::default()).map_err(|_| Error::ShiftSingular { shift: lambda })?;
        if !(f.condition_estimate() <= SHIFT_CONDITION_LIMIT) {
            return Err(Error::ShiftSingular { shift: lambda });
        }
        Ok(Some(f))
    }
}

/// `A_rz (λI − A_zz)⁻¹ A_zr`.
pub fn h_classical(sys: &PartitionedSystem, lambda: C64) -> Result<CMat> {
    let n = sys.relevant();
    match sys.factor_shift(lambda)? {
        Some(f) => Ok(&sys.a_rz * f.solve(&sys.a_zr)?),
        None => Ok(CMat::zeros(n, n)),
    }
}

/// [`Reduction`] over a partitioned system.
#[derive(Debug, Clone)]
pub struct ClassicalReduction {
    sys: PartitionedSystem,
    pencil: ProjectionPencil,
    pair: SubspacePair,
}

impl ClassicalReduction {
    pub fn new(sys: PartitionedSystem) -> Self {
        let pencil = sys.pencil();
        let pair = sys.canonical_pair();
        ClassicalReduction { sys, pencil, pair }
    }
}

struct ClassicalShifted<'a> {
    sys: &'a PartitionedSystem,
    factor: Option<Factorization>,
    right_solve: CMat,
    reduced: CMat,
}

impl Reduction for ClassicalReduction {
    fn pencil(&self) -> &ProjectionPencil {
        &self.pencil
    }

    fn pair(&self) -> &SubspacePair {
        &self.pair
    }

    fn base(&self) -> &CMat {
        &self.sys.a_rr
    }

    fn shifted(&self, lambda: C64) -> Result<Box<dyn Shifted + '_>> {
        let factor = self.sys.factor_shift(lambda)?;
        let (right_solve, reduced) = match &factor {
            Some(f) => {
                let x = f.solve(&self.sys.a_zr)?;
                let reduced = &self.sys.a_rr + &self.sys.a_rz * &x;
                (x, reduced)
            }
            None => (CMat::zeros(0, self.sys.relevant()), self.sys.a_rr.clone()),
        };
        Ok(Box::new(ClassicalShifted { sys: &self.sys, factor, right_solve, reduced }))
    }

    fn with_pair(&self, _pair: SubspacePair) -> Result<Self> {
        Err(Error::InvalidConfig("partitioned systems keep the canonical subspace".into()))
    }

    fn tracking(&self) -> Tracking {
        Tracking::NearestEigenvalue
    }
}

impl Shifted for ClassicalShifted<'_> {
    fn reduced(&self) -> Result<CMat> {
        Ok(self.reduced.clone())
    }

    /// `v = [α; (λ − A_zz)⁻¹A_zr α]`, `w = [β; (λ − A_zz)⁻ᴴA_rzᴴ β]`.
    fn recover(&self, alpha: &CVec, beta: &CVec) -> Result<(CVec, CVec)> {
        let n = self.sys.relevant();
        let m = self.sys.order();
        let mut v = CVec::zeros(m);
        let mut w = CVec::zeros(m);
        v.rows_mut(0, n).copy_from(alpha);
        w.rows_mut(0, n).copy_from(beta);
        if let Some(f) = &self.factor {
            v.rows_mut(n, m - n).copy_from(&(&self.right_solve * alpha));
            let rhs = self.sys.a_rz.ad_mul(&CMat::from_column_slice(n, 1, beta.as_slice()));
            let yz = f.solve_adjoint(&rhs)?;
            w.rows_mut(n, m - n).copy_from(&yz.column(0));
        }
        Ok((v, w))
    }
}

/// Fixed point `λ_j ∈ spec(A_rr + H(λ_{j−1}))`, following the nearest eigenvalue.
pub fn algorithm1(sys: &PartitionedSystem, selector: &Selector, opts: &SolverOptions) -> Result<(ModeEstimate, ConvergenceReport)> {
    solve_single(ClassicalReduction::new(sys.clone()), selector, opts, false)
}

/// Simultaneous iteration on one mode per selector.
pub fn algorithm2(
    sys: &PartitionedSystem,
    selectors: &[Selector],
    opts: &SolverOptions,
) -> Result<(Vec<ModeEstimate>, Vec<ConvergenceReport>)> {
    solve_multi(ClassicalReduction::new(sys.clone()), selectors, opts, false)
}
