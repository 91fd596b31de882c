use super::{C64, CMat, CscMatrix, DenseLu, Matrix, SparseLu, ZERO, minimum_degree_order, norm_inf, norm_one};
use crate::error::{Result, mismatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorKind {
    DenseLu,
    SparseLu,
}

/// Knobs for `factor`.
#[derive(Debug, Clone, Copy)]
pub struct FactorOptions {
    /// Pivot drop tolerance relative to `‖M‖_∞`.
    pub relative_drop: f64,
    /// Use a minimum-degree column order for sparse input.
    pub minimum_degree: bool,
}

impl Default for FactorOptions {
    fn default() -> Self {
        FactorOptions { relative_drop: 1e-14, minimum_degree: false }
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Dense(DenseLu),
    Sparse(SparseLu),
}

/// An LU factorization plus a 1-norm condition estimate.
#[derive(Debug, Clone)]
pub struct Factorization {
    inner: Inner,
    condition: f64,
}

pub fn factor(m: &Matrix, opts: &FactorOptions) -> Result<Factorization> {
    match m {
        Matrix::Dense(d) => factor_dense(d, opts),
        Matrix::Sparse(s) => factor_sparse(s, opts),
    }
}

pub fn factor_dense(m: &CMat, opts: &FactorOptions) -> Result<Factorization> {
    let norm1 = norm_one(m);
    let lu = DenseLu::new(m.clone(), Some(opts.relative_drop * norm_inf(m)))?;
    let mut f = Factorization { inner: Inner::Dense(lu), condition: 0.0 };
    f.condition = norm1 * f.inverse_norm_one_estimate();
    Ok(f)
}

pub fn factor_sparse(m: &CscMatrix, opts: &FactorOptions) -> Result<Factorization> {
    if m.nrows() != m.ncols() {
        return Err(mismatch("factor: matrix not square"));
    }
    let order = opts.minimum_degree.then(|| minimum_degree_order(m));
    let lu = SparseLu::new(m, order, opts.relative_drop * m.norm_inf())?;
    let mut f = Factorization { inner: Inner::Sparse(lu), condition: 0.0 };
    f.condition = m.norm_one() * f.inverse_norm_one_estimate();
    Ok(f)
}

impl Factorization {
    pub fn kind(&self) -> FactorKind {
        match self.inner {
            Inner::Dense(_) => FactorKind::DenseLu,
            Inner::Sparse(_) => FactorKind::SparseLu,
        }
    }

    pub fn order(&self) -> usize {
        match &self.inner {
            Inner::Dense(d) => d.order(),
            Inner::Sparse(s) => s.order(),
        }
    }

    /// Estimate of `‖M‖₁·‖M⁻¹‖₁`.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    /// `(row, column, magnitude)` of the smallest pivot.
    pub fn weakest_pivot(&self) -> (usize, usize, f64) {
        match &self.inner {
            Inner::Dense(d) => {
                let (row, step, mag) = d.weakest_pivot();
                (row, step, mag)
            }
            Inner::Sparse(s) => s.weakest_pivot(),
        }
    }

    pub fn solve(&self, b: &CMat) -> Result<CMat> {
        self.check(b)?;
        match &self.inner {
            Inner::Dense(d) => d.solve(b),
            Inner::Sparse(s) => Ok(Self::columnwise(b, |c| s.solve_in_place(c))),
        }
    }

    /// Solves `Mᴴ X = B`.
    pub fn solve_adjoint(&self, b: &CMat) -> Result<CMat> {
        self.check(b)?;
        match &self.inner {
            Inner::Dense(d) => d.solve_adjoint(b),
            Inner::Sparse(s) => Ok(Self::columnwise(b, |c| s.solve_adjoint_in_place(c))),
        }
    }

    fn check(&self, b: &CMat) -> Result<()> {
        if b.nrows() != self.order() {
            return Err(mismatch(format!("solve: {} rows against order {}", b.nrows(), self.order())));
        }
        Ok(())
    }

    fn columnwise(b: &CMat, f: impl Fn(&mut [C64])) -> CMat {
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            f(col.as_mut_slice());
        }
        x
    }

    /// Hager–Higham estimate of `‖M⁻¹‖₁`.
    fn inverse_norm_one_estimate(&self) -> f64 {
        let n = self.order();
        if n == 0 {
            return 0.0;
        }
        let solve = |x: &CMat| self.solve(x).expect("order checked");
        let solve_h = |x: &CMat| self.solve_adjoint(x).expect("order checked");
        let mut x = CMat::from_element(n, 1, C64::new(1.0 / n as f64, 0.0));
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for iter in 0..5 {
            let y = solve(&x);
            let new_est: f64 = y.iter().map(|z| z.norm()).sum();
            if iter > 0 && new_est <= est {
                break;
            }
            est = new_est;
            let xi = y.map(|z| if z.norm() == 0.0 { C64::new(1.0, 0.0) } else { z / z.norm() });
            let z = solve_h(&xi);
            let (j, zmax) = z.iter().enumerate().fold((0, -1.0), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
            let ztx = z.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re;
            if iter > 0 && (zmax <= ztx || j == last_j) {
                break;
            }
            last_j = j;
            x = CMat::from_element(n, 1, ZERO);
            x[(j, 0)] = C64::new(1.0, 0.0);
        }
        // Alternating probe guards against the estimator's blind spots.
        let alt = CMat::from_fn(n, 1, |i, _| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            C64::new(s * (1.0 + t), 0.0)
        });
        let alt_est = 2.0 * solve(&alt).iter().map(|z| z.norm()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt_est)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_to_complex;
    use nalgebra::DMatrix;

    #[test]
    fn identity_condition_is_one() {
        let f = factor_dense(&CMat::identity(3, 3), &FactorOptions::default()).unwrap();
        assert!((f.condition_estimate() - 1.0).abs() < 1e-12);
        assert_eq!(f.kind(), FactorKind::DenseLu);
    }

    #[test]
    fn diagonal_solve() {
        let d = real_to_complex(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 4.0])));
        let f = factor(&Matrix::Dense(d.clone()), &FactorOptions::default()).unwrap();
        let x = f.solve(&real_to_complex(&DMatrix::from_column_slice(2, 1, &[2.0, 4.0]))).unwrap();
        assert!((x - CMat::from_element(2, 1, C64::new(1.0, 0.0))).norm() < 1e-15);
        let fs = factor(&Matrix::Sparse(CscMatrix::from_dense(&d)), &FactorOptions::default()).unwrap();
        assert_eq!(fs.kind(), FactorKind::SparseLu);
        assert!((fs.condition_estimate() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn condition_estimate_tracks_exact_value() {
        let m = real_to_complex(&DMatrix::from_row_slice(3, 3, &[1.0, 1e3, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]));
        let f = factor_dense(&m, &FactorOptions::default()).unwrap();
        // ‖M‖₁ = 1001, ‖M⁻¹‖₁ = 1001.
        assert!((f.condition_estimate() - 1001.0 * 1001.0).abs() / 1.0e6 < 1e-6);
    }

    #[test]
    fn dimension_mismatch() {
        let f = factor_dense(&CMat::identity(3, 3), &FactorOptions::default()).unwrap();
        assert!(f.solve(&CMat::zeros(2, 1)).is_err());
    }
}
