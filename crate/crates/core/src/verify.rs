//! Cross-module identity checks on seeded random instances. Each check
//! computes both sides independently and reports the worst deviation.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical::{PartitionedSystem, h_classical};
use crate::composite::{assemble_monolithic, composite_h, embed_pairs};
use crate::direct::build_direct_iterate;
use crate::error::{Error, Result};
use crate::generalized::{HForm, Side, h_general, invariance_shift};
use crate::io::SCHEMA_VERSION;
use crate::linalg::{C64, CMat, FactorKind, real_to_complex, solve_dense};
use crate::pencil::{ProjectionPencil, SubspacePair, projectors};
use crate::problems::{SyntheticSpec, electromech_init, random_pair, random_solvable_pencil, synthetic_composite};
use crate::smw::SmwReduction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Generalized correction under the canonical embedding equals the classical one.
    Classical,
    /// The reduced matrix is unchanged by adding kernel-of-E components to the bases.
    Invariance,
    /// `𝓝 = 𝓜⁻¹ + λI` equals `(ℱᴴE·[A − λ(E − Q)]⁻¹Eℰ)⁻¹`.
    DirectInverse,
    /// `H(λ) = 𝓝 − A_rr`.
    DirectCorrection,
    /// Low-rank path equals the dense path; base factorization stays sparse.
    LowRank,
    /// Subsystem-by-subsystem reduced matrix equals the monolithic one.
    Composite,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Classical, Suite::Invariance, Suite::DirectInverse, Suite::DirectCorrection, Suite::LowRank, Suite::Composite];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Classical => "classical",
            Suite::Invariance => "invariance",
            Suite::DirectInverse => "direct-inverse",
            Suite::DirectCorrection => "direct-correction",
            Suite::LowRank => "low-rank",
            Suite::Composite => "composite",
        }
    }

    /// Default instance count.
    pub fn instances(self) -> usize {
        match self {
            Suite::LowRank => 20,
            Suite::Composite => 10,
            _ => 50,
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Suite::Classical => 1e-12,
            Suite::Invariance | Suite::DirectInverse | Suite::DirectCorrection | Suite::Composite => 1e-10,
            Suite::LowRank => 1e-9,
        }
    }

    /// How the deviation is scaled before comparison with the tolerance.
    pub fn measure(self) -> &'static str {
        match self {
            Suite::Classical => "‖ΔH‖_F / ‖A‖_F",
            Suite::Invariance => "‖Δ(A_rr + H)‖_F / (1 + ‖A_rr + H‖_F)",
            Suite::DirectInverse | Suite::DirectCorrection => "‖Δ‖_F / ‖𝓝‖_F",
            Suite::LowRank | Suite::Composite => "‖ΔH‖_F",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Overrides each suite's default instance count.
    pub instances: Option<usize>,
    /// Added to one entry of the tested side to demonstrate sensitivity.
    pub fault: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: 0, instances: None, fault: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResult {
    pub suite: Suite,
    pub instances: usize,
    pub measure: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Extra structural checks that failed, if any.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub config: VerifyConfig,
    pub results: Vec<IdentityResult>,
    pub passed: bool,
}

fn perturbed(mut m: CMat, fault: f64) -> CMat {
    if fault != 0.0 && m.nrows() > 0 && m.ncols() > 0 {
        m[(0, 0)] += C64::new(fault, 0.0);
    }
    m
}

/// Shift with `Im λ ∈ [0.3, 1]`, away from the real axis.
fn random_shift(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(0.3..1.0))
}

fn suite_rng(seed: u64, suite: Suite) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ suite as u64)
}

fn classical_case(rng: &mut ChaCha8Rng, fault: f64) -> Result<f64> {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(n + 2..=20);
    let a = real_to_complex(&nalgebra::DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0)));
    let sys = PartitionedSystem::split(&a, n)?;
    let lambda = random_shift(rng);
    let hc = h_classical(&sys, lambda)?;
    let hg = perturbed(h_general(&sys.pencil(), &sys.canonical_pair(), lambda, HForm::Qa)?, fault);
    Ok((hg - hc).norm() / a.norm())
}

fn reduced(pencil: &ProjectionPencil, pair: &SubspacePair, lambda: C64) -> Result<CMat> {
    Ok(pair.reduced(pencil) + h_general(pencil, pair, lambda, HForm::Qa)?)
}

fn invariance_case(rng: &mut ChaCha8Rng, fault: f64) -> Result<f64> {
    let m = rng.random_range(5..=16);
    let rank = rng.random_range(2..m);
    let pencil = random_solvable_pencil(rng, m, rank, true)?;
    let n = rng.random_range(1..=rank.min(3));
    let pair = random_pair(rng, &pencil, n, false)?;
    let l = CMat::from_fn(m, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let side = if rng.random_range(0..2) == 0 { Side::Right } else { Side::Left };
    let moved = invariance_shift(&pair, &pencil, &l, side)?;
    let lambda = random_shift(rng);
    let base = reduced(&pencil, &pair, lambda)?;
    let other = perturbed(reduced(&pencil, &moved, lambda)?, fault);
    Ok((&other - &base).norm() / (1.0 + base.norm()))
}

fn direct_setup(rng: &mut ChaCha8Rng) -> Result<(ProjectionPencil, SubspacePair, C64)> {
    let m = rng.random_range(4..=12);
    let rank = rng.random_range(2..=m);
    let pencil = random_solvable_pencil(rng, m, rank, true)?;
    let n = rng.random_range(1..=rank.min(3));
    let pair = random_pair(rng, &pencil, n, false)?;
    Ok((pencil, pair, random_shift(rng)))
}

fn inverse(m: &CMat) -> Result<CMat> {
    solve_dense(m, &CMat::identity(m.nrows(), m.ncols()))
}

fn direct_inverse_case(rng: &mut ChaCha8Rng, fault: f64) -> Result<f64> {
    let (pencil, pair, lambda) = direct_setup(rng)?;
    let it = build_direct_iterate(&pencil, &pair, lambda, false)?;
    let cal_n = perturbed(it.cal_n.ok_or(Error::IterateSingular { condition: f64::INFINITY })?, fault);
    let e = pencil.e_dense();
    let q = projectors(&pair, &pencil)?.q;
    let shifted = pencil.a_dense() - (e - &q) * lambda;
    let v_bar = solve_dense(&shifted, &(e * pair.right()))?;
    let reference = inverse(&pair.left().ad_mul(&(e * v_bar)))?;
    Ok((&cal_n - &reference).norm() / reference.norm())
}

fn direct_correction_case(rng: &mut ChaCha8Rng, fault: f64) -> Result<f64> {
    let (pencil, pair, lambda) = direct_setup(rng)?;
    let it = build_direct_iterate(&pencil, &pair, lambda, false)?;
    let cal_n = it.cal_n.ok_or(Error::IterateSingular { condition: f64::INFINITY })?;
    let h = perturbed(h_general(&pencil, &pair, lambda, HForm::Qa)?, fault);
    Ok((&h - (&cal_n - pair.reduced(&pencil))).norm() / cal_n.norm())
}

fn low_rank_case(rng: &mut ChaCha8Rng, fault: f64, notes: &mut Vec<String>) -> Result<f64> {
    let m = rng.random_range(10..=60);
    let rank = rng.random_range(m / 2..=m);
    let pencil = random_solvable_pencil(rng, m, rank, false)?;
    let n = rng.random_range(1..=3);
    let pair = random_pair(rng, &pencil, n, false)?;
    let lambda = random_shift(rng);
    let red = SmwReduction::new(&pencil, pair.clone(), HForm::Anticommutator)?;
    let shifted = red.evaluate(lambda)?;
    let audit = shifted.factorization().audit();
    if shifted.factorization().base().kind() != FactorKind::SparseLu {
        notes.push(format!("m = {m}: base factorization is not sparse"));
    }
    if audit.widest_dense_block > 2 * n + 1 || audit.capacitance_order != 2 * n + 1 {
        notes.push(format!("m = {m}: dense block of width {} for n = {n}", audit.widest_dense_block));
    }
    let h = perturbed(shifted.reduced_matrix() - pair.reduced(&pencil), fault);
    let dense = h_general(&pencil, &pair, lambda, HForm::Anticommutator)?;
    Ok((h - dense).norm())
}

fn composite_case(rng: &mut ChaCha8Rng, fault: f64) -> Result<f64> {
    let l = rng.random_range(3..=10);
    let spec =
        SyntheticSpec { seed: rng.random_range(0..u64::MAX), subsystems: l, states_per: rng.random_range(2..=6), io_per: 1, algebraic: l };
    let model = synthetic_composite(&spec)?;
    let pairs = electromech_init(&model)?;
    let pencil = assemble_monolithic(&model)?;
    let embedded = embed_pairs(&model, &pencil, &pairs)?;
    let lambda = C64::new(rng.random_range(-0.5..0.0), 2.0 * std::f64::consts::PI * rng.random_range(0.3..2.0));
    let mono = embedded.reduced(&pencil) + h_general(&pencil, &embedded, lambda, HForm::Anticommutator)?;
    let comp = perturbed(composite_h(&model, &pairs, lambda)?, fault);
    Ok((comp - mono).norm())
}

/// Runs one suite.
pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<IdentityResult> {
    let mut rng = suite_rng(cfg.seed, suite);
    let instances = cfg.instances.unwrap_or(suite.instances());
    let mut notes = Vec::new();
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let dev = match suite {
            Suite::Classical => classical_case(&mut rng, cfg.fault)?,
            Suite::Invariance => invariance_case(&mut rng, cfg.fault)?,
            Suite::DirectInverse => direct_inverse_case(&mut rng, cfg.fault)?,
            Suite::DirectCorrection => direct_correction_case(&mut rng, cfg.fault)?,
            Suite::LowRank => low_rank_case(&mut rng, cfg.fault, &mut notes)?,
            Suite::Composite => composite_case(&mut rng, cfg.fault)?,
        };
        worst = if dev.is_nan() { f64::NAN } else { worst.max(dev) };
    }
    let tolerance = suite.tolerance();
    Ok(IdentityResult {
        suite,
        instances,
        measure: suite.measure().to_string(),
        max_deviation: worst,
        tolerance,
        passed: worst <= tolerance && notes.is_empty(),
        notes,
    })
}

/// Runs the given suites, all of them when `suites` is empty.
pub fn verify(cfg: &VerifyConfig, suites: &[Suite]) -> Result<VerifyReport> {
    let chosen: &[Suite] = if suites.is_empty() { &Suite::ALL } else { suites };
    let results = chosen.iter().map(|&s| run_suite(s, cfg)).collect::<Result<Vec<_>>>()?;
    let passed = results.iter().all(|r| r.passed);
    Ok(VerifyReport { schema_version: SCHEMA_VERSION, config: *cfg, results, passed })
}
