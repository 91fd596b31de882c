//! Seeded instances shared by the integration targets.

#![allow(dead_code)]

use gsma::linalg::{C64, CMat, CVec};
use gsma::pencil::{OracleMode, ParticipationRatio, ProjectionPencil, SubspacePair, oracle_full_spectrum, participation_ratio_in};
use gsma::problems::random_solvable_pencil;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A pencil, a one-dimensional pair near one of its modes, and that mode.
pub struct NearMode {
    pub pencil: ProjectionPencil,
    pub pair: SubspacePair,
    pub mode: OracleMode,
    /// Participation ratio of the exact vectors in the pair.
    pub rho: ParticipationRatio,
}

fn unit_noise(rng: &mut ChaCha8Rng, m: usize) -> CVec {
    let r = CVec::from_fn(m, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    r.unscale(r.norm())
}

/// `x + size·‖x‖·r` for a random unit direction `r`, projected by `E`.
pub fn perturb(rng: &mut ChaCha8Rng, pencil: &ProjectionPencil, x: &CVec, size: f64) -> CMat {
    let noisy = x + unit_noise(rng, x.len()) * C64::new(size * x.norm(), 0.0);
    CMat::from_columns(&[pencil.e().mul_vec(&noisy)])
}

/// Smallest distance from mode `k` to any other finite eigenvalue.
pub fn isolation(modes: &[OracleMode], k: usize) -> f64 {
    modes.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, m)| (m.lambda - modes[k].lambda).norm()).fold(f64::INFINITY, f64::min)
}

/// Draws a random solvable pencil, picks one of its better isolated modes
/// and perturbs its exact vectors by `size` until `|ρ| > 1`.
pub fn near_mode(rng: &mut ChaCha8Rng, m: usize, rotate: bool, size: f64) -> NearMode {
    loop {
        let rank = rng.random_range(m / 2..m);
        let pencil = random_solvable_pencil(rng, m, rank, rotate).expect("generator");
        let spectrum = oracle_full_spectrum(&pencil).expect("oracle");
        let mut order: Vec<usize> = (0..spectrum.modes.len()).collect();
        order.sort_by(|&a, &b| isolation(&spectrum.modes, b).total_cmp(&isolation(&spectrum.modes, a)));
        let k = order[rng.random_range(0..order.len().div_ceil(3))];
        let mode = spectrum.modes[k].clone();
        if mode.defective_pairing {
            continue;
        }
        for _ in 0..20 {
            let right = perturb(rng, &pencil, &mode.v, size);
            let left = perturb(rng, &pencil, &mode.w, size);
            let Ok(pair) = SubspacePair::normalized(right, left, pencil.e()) else { continue };
            let rho = participation_ratio_in(&pencil, &pair, &mode.v, &mode.w);
            if rho.modulus() > 1.0 {
                return NearMode { pencil, pair, mode, rho };
            }
        }
    }
}
