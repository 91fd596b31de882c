use super::{C64, CMat, ONE, ZERO, dense_limit, norm_inf};
use crate::error::{Error, Result, mismatch};

/// Full spectrum with right and left eigenvectors in matching columns.
/// Right vectors have unit norm; left vectors satisfy `wᵢᴴvᵢ = 1` unless
/// that product vanishes, in which case they have unit norm.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub values: Vec<C64>,
    pub right: CMat,
    pub left: CMat,
}

const SHIFTS_PER_EIGENVALUE: usize = 40;

/// Hessenberg reduction followed by single-shift complex QR; eigenvectors by
/// back-substitution on the triangular Schur factor.
pub fn eig_dense(m: &CMat) -> Result<EigDecomposition> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(mismatch(format!("eigenanalysis of non-square {}x{}", n, m.ncols())));
    }
    let limit = dense_limit();
    if n > limit {
        return Err(Error::TooLarge { n, limit });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(mismatch("eigenanalysis of a matrix with non-finite entries"));
    }
    let (t, z) = schur(m.clone())?;
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let scale = norm_inf(&t).max(f64::MIN_POSITIVE);
    let smin = (f64::EPSILON * scale).max(f64::MIN_POSITIVE * 1e3);

    let mut right = CMat::zeros(n, n);
    let mut left = CMat::zeros(n, n);
    for i in 0..n {
        let lam = t[(i, i)];
        let mut x = vec![ZERO; n];
        x[i] = ONE;
        for j in (0..i).rev() {
            let mut acc = ZERO;
            for k in j + 1..=i {
                acc += t[(j, k)] * x[k];
            }
            let mut d = t[(j, j)] - lam;
            if d.norm() < smin {
                d = C64::new(smin, 0.0);
            }
            x[j] = -acc / d;
            rescale(&mut x[j..=i]);
        }
        let mut y = vec![ZERO; n];
        y[i] = ONE;
        for j in i + 1..n {
            let mut acc = ZERO;
            for k in i..j {
                acc += t[(k, j)].conj() * y[k];
            }
            let mut d = (t[(j, j)] - lam).conj();
            if d.norm() < smin {
                d = C64::new(smin, 0.0);
            }
            y[j] = -acc / d;
            rescale(&mut y[i..=j]);
        }
        let mut v = CMat::zeros(n, 1);
        let mut w = CMat::zeros(n, 1);
        for r in 0..n {
            let mut av = ZERO;
            let mut aw = ZERO;
            for k in 0..=i {
                av += z[(r, k)] * x[k];
            }
            for k in i..n {
                aw += z[(r, k)] * y[k];
            }
            v[(r, 0)] = av;
            w[(r, 0)] = aw;
        }
        let nv = v.norm();
        v /= C64::new(nv, 0.0);
        let nw = w.norm();
        w /= C64::new(nw, 0.0);
        let p = w.ad_mul(&v)[(0, 0)];
        if p.norm() > 1e-13 {
            w /= p.conj();
        }
        right.set_column(i, &v.column(0));
        left.set_column(i, &w.column(0));
    }
    Ok(EigDecomposition { values, right, left })
}

fn rescale(x: &mut [C64]) {
    let big = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if big > 1e100 {
        let s = C64::new(1.0 / big, 0.0);
        x.iter_mut().for_each(|z| *z *= s);
    }
}

/// Complex Schur form `M = Z T Zᴴ`.
fn schur(mut h: CMat) -> Result<(CMat, CMat)> {
    let n = h.nrows();
    let mut z = CMat::identity(n, n);
    hessenberg(&mut h, &mut z);
    if n < 2 {
        return Ok((h, z));
    }
    let norm = norm_inf(&h).max(f64::MIN_POSITIVE);
    let budget = SHIFTS_PER_EIGENVALUE * n;
    let mut total = 0;
    let mut its = 0;
    let mut hi = n - 1;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].norm() <= f64::EPSILON * s {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            its = 0;
            continue;
        }
        its += 1;
        total += 1;
        if total > budget {
            return Err(Error::NoConvergence { sweeps: total });
        }
        let sigma = if its % 10 == 0 {
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        for k in l..hi {
            let (x, y) = if k == l { (h[(l, l)] - sigma, h[(l + 1, l)]) } else { (h[(k, k - 1)], h[(k + 1, k - 1)]) };
            let (c, s) = givens(x, y);
            let first = if k > l { k - 1 } else { l };
            for j in first..n {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = -s.conj() * a + b * c;
            }
            let last = (k + 2).min(hi);
            for i in 0..=last {
                let a = h[(i, k)];
                let b = h[(i, k + 1)];
                h[(i, k)] = a * c + s.conj() * b;
                h[(i, k + 1)] = -s * a + b * c;
            }
            for i in 0..n {
                let a = z[(i, k)];
                let b = z[(i, k + 1)];
                z[(i, k)] = a * c + s.conj() * b;
                z[(i, k + 1)] = -s * a + b * c;
            }
            if k > l {
                h[(k + 1, k - 1)] = ZERO;
            }
        }
    }
    // Clear the strictly lower part left by rounding.
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = ZERO;
        }
    }
    Ok((h, z))
}

/// Rotation `[[c, s], [-s̄, c]]` mapping `(x, y)` to `(r, 0)`.
fn givens(x: C64, y: C64) -> (C64, C64) {
    if y == ZERO {
        return (ONE, ZERO);
    }
    let ax = x.norm();
    let r = ax.hypot(y.norm());
    if ax == 0.0 {
        return (ZERO, y.conj() / y.norm());
    }
    let phase = x / ax;
    (C64::new(ax / r, 0.0), phase * y.conj() / r)
}

/// Eigenvalue of the trailing 2×2 block closer to its last diagonal entry.
fn wilkinson(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mean = (a + d) * 0.5;
    let l1 = mean + disc;
    let l2 = mean - disc;
    if (l1 - d).norm() <= (l2 - d).norm() { l1 } else { l2 }
}

fn hessenberg(h: &mut CMat, z: &mut CMat) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let tail: f64 = (k + 2..n).map(|i| h[(i, k)].norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let norm = (x0.norm_sqr() + tail).sqrt();
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|c| *c /= vn);
        // h ← (I − 2vvᴴ) h on rows k+1..n.
        for j in k..n {
            let mut dot = ZERO;
            for (p, vi) in v.iter().enumerate() {
                dot += vi.conj() * h[(k + 1 + p, j)];
            }
            for (p, vi) in v.iter().enumerate() {
                h[(k + 1 + p, j)] -= *vi * dot * 2.0;
            }
        }
        // h ← h (I − 2vvᴴ) and z ← z (I − 2vvᴴ) on columns k+1..n.
        for mat in [&mut *h, &mut *z] {
            for i in 0..n {
                let mut dot = ZERO;
                for (p, vi) in v.iter().enumerate() {
                    dot += mat[(i, k + 1 + p)] * *vi;
                }
                for (p, vi) in v.iter().enumerate() {
                    mat[(i, k + 1 + p)] -= dot * vi.conj() * 2.0;
                }
            }
        }
        h[(k + 1, k)] = alpha;
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_to_complex;
    use nalgebra::DMatrix;

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    fn check_pairs(m: &CMat, e: &EigDecomposition, tol: f64) {
        let scale = norm_inf(m).max(1.0);
        for i in 0..m.nrows() {
            let v = e.right.column(i);
            let w = e.left.column(i);
            let l = e.values[i];
            assert!((m * v - v * l).norm() <= tol * scale * v.norm(), "right pair {i}");
            assert!((m.adjoint() * w - w * l.conj()).norm() <= tol * scale * w.norm(), "left pair {i}");
        }
    }

    #[test]
    fn diagonal() {
        let m = real_to_complex(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0])));
        let e = eig_dense(&m).unwrap();
        let vals = sorted(e.values.clone());
        for (k, v) in vals.iter().enumerate() {
            assert!((v - C64::new(k as f64 + 1.0, 0.0)).norm() < 1e-15);
        }
        for i in 0..3 {
            let col = e.right.column(i);
            let idx = (e.values[i].re.round() as usize) - 1;
            assert!((col[idx].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rotation_generator() {
        let m = real_to_complex(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let e = eig_dense(&m).unwrap();
        let vals = sorted(e.values.clone());
        assert!((vals[0] - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((vals[1] - C64::new(0.0, 1.0)).norm() < 1e-14);
        check_pairs(&m, &e, 1e-13);
    }

    #[test]
    fn companion_roots() {
        // x² − 3x + 2
        let m = real_to_complex(&DMatrix::from_row_slice(2, 2, &[3.0, -2.0, 1.0, 0.0]));
        let vals = sorted(eig_dense(&m).unwrap().values);
        assert!((vals[0] - C64::new(1.0, 0.0)).norm() < 1e-13);
        assert!((vals[1] - C64::new(2.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn nonnormal_with_biorthogonal_vectors() {
        let m = CMat::from_fn(6, 6, |i, j| {
            let x = ((i * 7 + j * 3) % 11) as f64 - 5.0;
            C64::new(x, if i > j { 0.3 * x } else { 0.0 })
        });
        let e = eig_dense(&m).unwrap();
        check_pairs(&m, &e, 1e-12);
        let g = e.left.ad_mul(&e.right);
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)].norm() - want).abs() < 1e-8, "({i},{j}) {}", g[(i, j)]);
            }
        }
    }

    #[test]
    fn jordan_block_is_handled() {
        let m = real_to_complex(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]));
        let e = eig_dense(&m).unwrap();
        assert!(e.values.iter().all(|v| (v - ONE).norm() < 1e-12));
    }

    #[test]
    fn empty_matrix() {
        assert!(eig_dense(&CMat::zeros(0, 0)).unwrap().values.is_empty());
    }
}
