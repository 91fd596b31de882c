//! Seeded random pencils with a well-conditioned static part.

use nalgebra::DMatrix;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{C64, CMat, CscMatrix, Matrix, real_to_complex};
use crate::pencil::{ProjectionPencil, SubspacePair};

/// `E = U·diag(I_r, 0)·Uᵀ` and `A = U·Ã·Uᵀ` where `Ã`'s static block is
/// diagonally dominant; `U` is a random rotation when `rotate` is set and the
/// identity otherwise (then the pencil is stored sparse).
pub fn random_solvable_pencil(rng: &mut ChaCha8Rng, m: usize, rank: usize, rotate: bool) -> Result<ProjectionPencil> {
    if rank > m || m == 0 {
        return Err(Error::InvalidConfig(format!("rank {rank} for order {m}")));
    }
    let mut a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    for i in rank..m {
        let dominance = (m - rank) as f64 + 1.0;
        a[(i, i)] += if rng.random_range(0.0..1.0) < 0.5 { -dominance } else { dominance };
    }
    let mut e = DMatrix::zeros(m, m);
    for i in 0..rank {
        e[(i, i)] = 1.0;
    }
    if !rotate {
        let (e, a) = (real_to_complex(&e), real_to_complex(&a));
        return ProjectionPencil::new(Matrix::Sparse(CscMatrix::from_dense(&e)), Matrix::Sparse(CscMatrix::from_dense(&a)));
    }
    let g = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let u = g.qr().q();
    let mut e = &u * e * u.transpose();
    e = (&e + e.transpose()) * 0.5;
    let a = &u * a * u.transpose();
    ProjectionPencil::new(Matrix::Dense(real_to_complex(&e)), Matrix::Dense(real_to_complex(&a)))
}

/// Smallest accepted cosine of the principal angles between the two spans;
/// keeps the oblique projector `Q` at norm at most its inverse.
pub const MIN_PAIR_ALIGNMENT: f64 = 0.1;

const PAIR_DRAWS: usize = 100;

/// Smallest singular value of `Lᴴ·R` for orthonormal bases of both spans.
fn alignment(right: &CMat, left: &CMat) -> f64 {
    let (r, l) = (right.clone().qr().q(), left.clone().qr().q());
    l.ad_mul(&r).singular_values().min()
}

/// Random real bases inside the range of `E`, normalized, redrawn until the
/// spans are aligned to at least [`MIN_PAIR_ALIGNMENT`].
pub fn random_pair(rng: &mut ChaCha8Rng, pencil: &ProjectionPencil, n: usize, equal: bool) -> Result<SubspacePair> {
    let m = pencil.dim();
    let mut draw = || {
        let b = CMat::from_fn(m, n, |_, _| C64::new(rng.random_range(-1.0..1.0), 0.0));
        pencil.e().mul(&b)
    };
    for _ in 0..PAIR_DRAWS {
        let right = draw();
        let left = if equal { right.clone() } else { draw() };
        if alignment(&right, &left) >= MIN_PAIR_ALIGNMENT {
            return SubspacePair::normalized(right, left, pencil.e());
        }
    }
    Err(Error::GenerationFailed(format!("no aligned pair of dimension {n} in {PAIR_DRAWS} draws")))
}
