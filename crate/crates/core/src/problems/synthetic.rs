//! Seeded swing-equation style composite models: each subsystem carries a
//! rotor angle and speed obeying `δ̇ = 120π·ω`, tied to a network of buses.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::composite::{CompositeModel, Interconnection, Subsystem, assemble_monolithic, embed_pairs};
use crate::error::{Error, Result};
use crate::linalg::{C64, CMat, dense_limit};
use crate::pencil::{SubspacePair, oracle_full_spectrum};

/// Synchronous speed in rad/s.
pub const SYNCHRONOUS_SPEED: f64 = 120.0 * PI;

const GENERATION_RETRIES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub subsystems: usize,
    pub states_per: usize,
    pub io_per: usize,
    pub algebraic: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { seed: 7, subsystems: 10, states_per: 4, io_per: 1, algebraic: 10 }
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// States `[δ, ω, lag…, algebraic]`: the last extra state is algebraic when
/// there are at least two extras. The first io channel carries electrical
/// power in and rotor angle out.
fn subsystem(rng: &mut ChaCha8Rng, states: usize, io: usize) -> Result<(Subsystem, f64)> {
    let mut e = CMat::zeros(states, states);
    let mut a = CMat::zeros(states, states);
    let inertia = 2.0 * rng.random_range(3.0..9.0);
    let damping = rng.random_range(0.5..2.0);
    e[(0, 0)] = re(1.0);
    e[(1, 1)] = re(1.0);
    a[(0, 1)] = re(SYNCHRONOUS_SPEED);
    a[(1, 1)] = re(-damping / inertia);
    let extras = states - 2;
    for x in 2..states {
        let algebraic = extras >= 2 && x == states - 1;
        if algebraic {
            a[(x, x)] = re(-1.0);
            a[(x, 1)] = re(rng.random_range(-0.2..0.2));
            a[(x, x - 1)] = re(rng.random_range(-0.5..0.5));
        } else {
            e[(x, x)] = re(1.0);
            a[(x, x)] = re(-1.0 / rng.random_range(0.05..0.5));
            a[(x, 1)] = re(rng.random_range(-1.0..1.0));
        }
        a[(1, x)] = re(rng.random_range(-0.05..0.05));
    }
    let mut b = CMat::zeros(states, io);
    let mut c = CMat::zeros(io, states);
    let d = CMat::zeros(io, io);
    if io > 0 {
        b[(1, 0)] = re(-1.0 / inertia);
        c[(0, 0)] = re(1.0);
    }
    for ch in 1..io {
        let x = 2 + (ch - 1) % extras.max(1);
        if x < states {
            b[(x, ch)] = re(rng.random_range(-0.3..0.3));
            c[(ch, x)] = re(rng.random_range(-0.3..0.3));
        }
    }
    let reactance = rng.random_range(3.0..10.0);
    Ok((Subsystem::new(e, a, b, c, d)?, reactance))
}

/// First bus of the second area; the two areas meet through one weak tie.
pub fn area_split(buses: usize) -> usize {
    buses.div_ceil(2)
}

/// Area of each subsystem, `+1` or `−1`, as an objective pattern.
pub fn area_pattern(model: &CompositeModel) -> Vec<C64> {
    let buses = model.interconnection().algebraic();
    let split = area_split(buses);
    (0..model.subsystems().len()).map(|k| if buses == 0 || k % buses < split { re(1.0) } else { re(-1.0) }).collect()
}

/// Power channel `δ_k = P_k/b_k + θ_bus(k)`, bus balance
/// `0 = Σ P_k − Σ B(θ_b − θ_c) − g_b θ_b` over a ring inside each area;
/// other channels `y = 2u`.
fn interconnection(rng: &mut ChaCha8Rng, reactances: &[f64], io_per: usize, buses: usize) -> Result<Interconnection> {
    let l = reactances.len();
    let io = l * io_per;
    let mut j11 = CMat::zeros(io, io);
    let mut j12 = CMat::zeros(io, buses);
    let mut j21 = CMat::zeros(buses, io);
    let mut j22 = CMat::zeros(buses, buses);
    for (k, &b) in reactances.iter().enumerate() {
        if io_per == 0 {
            break;
        }
        let p = k * io_per;
        j11[(p, p)] = re(1.0 / b);
        if buses > 0 {
            let bus = k % buses;
            j12[(p, bus)] = re(1.0);
            j21[(bus, p)] = re(1.0);
        }
        for ch in 1..io_per {
            j11[(p + ch, p + ch)] = re(2.0);
        }
    }
    let link = |j22: &mut CMat, x: usize, y: usize, w: f64| {
        j22[(x, x)] -= re(w);
        j22[(y, y)] -= re(w);
        j22[(x, y)] += re(w);
        j22[(y, x)] += re(w);
    };
    let split = area_split(buses);
    for area in [0..split, split..buses] {
        let len = area.len();
        for bus in area.clone() {
            let next = area.start + (bus - area.start + 1) % len;
            if len > 2 || (len == 2 && bus == area.start) {
                link(&mut j22, bus, next, rng.random_range(4.0..10.0));
            }
        }
        for _ in 0..len / 3 {
            let x = area.start + rng.random_range(0..len);
            let y = area.start + rng.random_range(0..len);
            if x != y {
                link(&mut j22, x, y, rng.random_range(4.0..10.0));
            }
        }
    }
    if split > 0 && split < buses {
        link(&mut j22, split - 1, split, rng.random_range(0.3..0.6));
    }
    for bus in 0..buses {
        j22[(bus, bus)] -= re(rng.random_range(0.5..2.0));
    }
    Interconnection::new(j11, j12, j21, j22)
}

fn draw(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> Result<CompositeModel> {
    let mut subs = Vec::with_capacity(spec.subsystems);
    let mut reactances = Vec::with_capacity(spec.subsystems);
    for _ in 0..spec.subsystems {
        let (s, b) = subsystem(rng, spec.states_per, spec.io_per)?;
        subs.push(s);
        reactances.push(b);
    }
    let ic = interconnection(rng, &reactances, spec.io_per, spec.algebraic)?;
    CompositeModel::new(subs, ic)
}

/// Reproducible model whose monolithic pencil passes the oracle's
/// solvability check; redraws a bounded number of times.
pub fn synthetic_composite(spec: &SyntheticSpec) -> Result<CompositeModel> {
    if spec.subsystems < 1 || spec.states_per < 2 {
        return Err(Error::InvalidConfig("need at least one subsystem with at least two states".into()));
    }
    if spec.io_per > 0 && spec.io_per - 1 > 0 && spec.states_per < 3 {
        return Err(Error::InvalidConfig("extra io channels need extra states".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut last = String::new();
    for _ in 0..GENERATION_RETRIES {
        let model = draw(&mut rng, spec)?;
        let pencil = assemble_monolithic(&model)?;
        if pencil.dim() > dense_limit() {
            return Ok(model);
        }
        match oracle_full_spectrum(&pencil) {
            Ok(_) => return Ok(model),
            Err(e @ Error::NotSolvable { .. }) => last = e.to_string(),
            Err(e) => return Err(e),
        }
    }
    Err(Error::GenerationFailed(format!("no solvable draw in {GENERATION_RETRIES} attempts: {last}")))
}

/// Per-subsystem pairs `ℰ = [120π, 2πi, 0, …]`, `ℱ = [−2πi, 120π, 0, …]`,
/// normalized; the block-embedded pair is checked as well.
pub fn electromech_init(model: &CompositeModel) -> Result<Vec<SubspacePair>> {
    let pairs = model
        .subsystems()
        .iter()
        .map(|s| {
            let m = s.states();
            if m < 2 {
                return Err(Error::InvalidConfig("subsystem has no rotor states".into()));
            }
            let mut right = CMat::zeros(m, 1);
            let mut left = CMat::zeros(m, 1);
            right[(0, 0)] = re(SYNCHRONOUS_SPEED);
            right[(1, 0)] = C64::new(0.0, 2.0 * PI);
            left[(0, 0)] = C64::new(0.0, -2.0 * PI);
            left[(1, 0)] = re(SYNCHRONOUS_SPEED);
            SubspacePair::normalized(right, left, s.pencil().e())
        })
        .collect::<Result<Vec<_>>>()?;
    embed_pairs(model, &assemble_monolithic(model)?, &pairs)?;
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composite::CompositeReduction;
    use crate::generalized::{SolverOptions, solve_single};
    use crate::select::Selector;

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec { subsystems: 3, ..SyntheticSpec::default() };
        let a = assemble_monolithic(&synthetic_composite(&spec).unwrap()).unwrap();
        let b = assemble_monolithic(&synthetic_composite(&spec).unwrap()).unwrap();
        assert_eq!(a.a().to_dense(), b.a().to_dense());
    }

    #[test]
    fn isolated_subsystem_keeps_its_spectrum() {
        let spec = SyntheticSpec { seed: 3, subsystems: 1, states_per: 4, io_per: 0, algebraic: 0 };
        let model = synthetic_composite(&spec).unwrap();
        let mono = oracle_full_spectrum(&assemble_monolithic(&model).unwrap()).unwrap();
        let own = oracle_full_spectrum(model.subsystems()[0].pencil()).unwrap();
        assert_eq!(mono.modes.len(), own.modes.len());
        for m in &own.modes {
            let k = mono.nearest(m.lambda).unwrap();
            assert!((mono.modes[k].lambda - m.lambda).norm() < 1e-10);
        }
    }

    #[test]
    fn ten_machines_have_electromechanical_modes() {
        let model = synthetic_composite(&SyntheticSpec::default()).unwrap();
        let spec = oracle_full_spectrum(&assemble_monolithic(&model).unwrap()).unwrap();
        let count = spec.modes.iter().filter(|m| m.lambda.im > 0.0 && (0.2..=3.0).contains(&(m.lambda.im / (2.0 * PI)))).count();
        assert!(count >= 9, "{count}");
    }

    #[test]
    fn objective_finds_the_inter_area_mode() {
        let model = synthetic_composite(&SyntheticSpec::default()).unwrap();
        let pattern = area_pattern(&model);
        let pairs = electromech_init(&model).unwrap();
        let red = CompositeReduction::new(&model, pairs).unwrap();
        let (est, _) = solve_single(red, &Selector::Objective { pattern: pattern.clone() }, &SolverOptions::default(), false).unwrap();
        let v = est.v.unwrap();
        let deltas: Vec<C64> = (0..model.subsystems().len()).map(|k| v[model.state_range(k).start]).collect();
        let phase: C64 = deltas.iter().zip(&pattern).map(|(d, p)| d * p).sum();
        let phase = phase / phase.norm();
        for (d, p) in deltas.iter().zip(&pattern) {
            assert!((d / phase).re * p.re > 0.0);
        }
    }

    #[test]
    fn electromech_pairs_are_normalized() {
        let model = synthetic_composite(&SyntheticSpec { subsystems: 2, ..SyntheticSpec::default() }).unwrap();
        let pairs = electromech_init(&model).unwrap();
        for (s, p) in model.subsystems().iter().zip(&pairs) {
            let g = p.left().ad_mul(&(s.e() * p.right()));
            assert!((g[(0, 0)] - re(1.0)).norm() < 1e-12);
        }
        let opts = SolverOptions::default();
        let red = CompositeReduction::new(&model, pairs).unwrap();
        let (est, _) = solve_single(red, &Selector::Nearest { target: C64::new(0.0, 2.0 * PI) }, &opts, false).unwrap();
        assert!((0.2..=3.0).contains(&(est.lambda.im.abs() / (2.0 * PI))), "{}", est.lambda);
    }
}
