use super::{C64, CMat, ZERO, norm_inf};
use crate::error::{Error, Result, mismatch};

/// LU with partial pivoting: `P·M = L·U`, unit-lower `L` and `U` packed
/// in one matrix; `perm[k]` is the original row placed at step `k`.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: CMat,
    perm: Vec<usize>,
    weakest: (usize, f64),
}

impl DenseLu {
    /// Factors `m`. A pivot with magnitude at or below `drop_tol` (default
    /// `1e-14·‖m‖_∞`) aborts with `SingularMatrix`.
    pub fn new(mut m: CMat, drop_tol: Option<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(mismatch(format!("LU of non-square {}x{}", n, m.ncols())));
        }
        let tol = drop_tol.unwrap_or(1e-14 * norm_inf(&m));
        let mut perm: Vec<usize> = (0..n).collect();
        let mut weakest = (0, f64::INFINITY);
        for k in 0..n {
            let (mut p, mut best) = (k, -1.0);
            for i in k..n {
                let a = m[(i, k)].norm();
                if a > best {
                    best = a;
                    p = i;
                }
            }
            if best <= tol || best == 0.0 {
                return Err(Error::SingularMatrix { column: k, row: perm[p], magnitude: best });
            }
            if best < weakest.1 {
                weakest = (k, best);
            }
            if p != k {
                m.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = m[(k, k)];
            for i in k + 1..n {
                m[(i, k)] /= pivot;
            }
            for j in k + 1..n {
                let ukj = m[(k, j)];
                if ukj == ZERO {
                    continue;
                }
                for i in k + 1..n {
                    let lik = m[(i, k)];
                    m[(i, j)] -= lik * ukj;
                }
            }
        }
        Ok(DenseLu { lu: m, perm, weakest })
    }

    pub fn order(&self) -> usize {
        self.lu.nrows()
    }

    /// Step and magnitude of the smallest pivot.
    pub fn weakest_pivot(&self) -> (usize, usize, f64) {
        let (k, mag) = self.weakest;
        (self.perm.get(k).copied().unwrap_or(0), k, mag)
    }

    /// Original row pivoted at each step.
    pub fn row_permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn solve(&self, b: &CMat) -> Result<CMat> {
        let n = self.order();
        if b.nrows() != n {
            return Err(mismatch(format!("solve: {} rows against order {}", b.nrows(), n)));
        }
        let mut x = CMat::zeros(n, b.ncols());
        for c in 0..b.ncols() {
            let mut y: Vec<C64> = self.perm.iter().map(|&p| b[(p, c)]).collect();
            self.forward(&mut y);
            self.backward(&mut y);
            for i in 0..n {
                x[(i, c)] = y[i];
            }
        }
        Ok(x)
    }

    /// Solves `Mᴴ x = b`.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_adjoint(&self, b: &CMat) -> Result<CMat> {
        let n = self.order();
        if b.nrows() != n {
            return Err(mismatch(format!("solve_adjoint: {} rows against order {}", b.nrows(), n)));
        }
        let mut x = CMat::zeros(n, b.ncols());
        for c in 0..b.ncols() {
            let mut s: Vec<C64> = (0..n).map(|i| b[(i, c)]).collect();
            // Uᴴ is lower triangular.
            for k in 0..n {
                let mut acc = s[k];
                for r in 0..k {
                    acc -= self.lu[(r, k)].conj() * s[r];
                }
                s[k] = acc / self.lu[(k, k)].conj();
            }
            // Lᴴ is unit upper triangular.
            for k in (0..n).rev() {
                let mut acc = s[k];
                for r in k + 1..n {
                    acc -= self.lu[(r, k)].conj() * s[r];
                }
                s[k] = acc;
            }
            for (k, &p) in self.perm.iter().enumerate() {
                x[(p, c)] = s[k];
            }
        }
        Ok(x)
    }

    #[allow(clippy::needless_range_loop)]
    fn forward(&self, y: &mut [C64]) {
        let n = y.len();
        for k in 0..n {
            let yk = y[k];
            if yk == ZERO {
                continue;
            }
            for i in k + 1..n {
                y[i] -= self.lu[(i, k)] * yk;
            }
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn backward(&self, y: &mut [C64]) {
        let n = y.len();
        for k in (0..n).rev() {
            y[k] /= self.lu[(k, k)];
            let yk = y[k];
            if yk == ZERO {
                continue;
            }
            for i in 0..k {
                y[i] -= self.lu[(i, k)] * yk;
            }
        }
    }

    /// Determinant, accumulated from the pivots.
    pub fn determinant(&self) -> C64 {
        let mut det = C64::new(1.0, 0.0);
        for k in 0..self.order() {
            det *= self.lu[(k, k)];
        }
        let mut seen = vec![false; self.perm.len()];
        let mut sign = 1.0;
        for start in 0..self.perm.len() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.perm[i];
                len += 1;
            }
            if len % 2 == 0 {
                sign = -sign;
            }
        }
        det * sign
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_to_complex;
    use nalgebra::DMatrix;

    fn c(m: &[f64], n: usize) -> CMat {
        real_to_complex(&DMatrix::from_row_slice(n, m.len() / n, m))
    }

    #[test]
    fn permutation_matrix_solves() {
        let lu = DenseLu::new(c(&[0.0, 1.0, 1.0, 0.0], 2), None).unwrap();
        let x = lu.solve(&c(&[1.0, 0.0], 2)).unwrap();
        assert_eq!(x, c(&[0.0, 1.0], 2));
    }

    #[test]
    fn adjoint_solve_matches_explicit_adjoint() {
        let mut m = c(&[2.0, 1.0, 0.5, -1.0, 3.0, 0.2, 0.4, 0.1, 1.5], 3);
        m[(0, 1)] = C64::new(1.0, 2.0);
        let b = c(&[1.0, -2.0, 0.5], 3);
        let x = DenseLu::new(m.clone(), None).unwrap().solve_adjoint(&b).unwrap();
        assert!((m.adjoint() * x - b).norm() < 1e-13);
    }

    #[test]
    fn singular_reports_column() {
        let err = DenseLu::new(c(&[1.0, 2.0, 2.0, 4.0], 2), None).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { column: 1, .. }));
    }

    #[test]
    fn determinant_with_swap() {
        let lu = DenseLu::new(c(&[0.0, 1.0, 1.0, 0.0], 2), None).unwrap();
        assert!((lu.determinant() - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }
}
