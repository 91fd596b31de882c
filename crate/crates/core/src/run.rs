//! Configured solver runs: problem loading, starting subspaces, dispatch to
//! the eight algorithms and serializable reports.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical::{PartitionedSystem, algorithm1, algorithm2};
use crate::composite::{CompositeModel, CompositeReduction, assemble_monolithic, embed_pairs};
use crate::direct::{algorithm5, algorithm6, algorithm7, algorithm8};
use crate::error::{Error, Result};
use crate::generalized::{SolverOptions, algorithm2_general, algorithm3, algorithm4, solve_multi, solve_single};
use crate::io::{Problem, Source, load};
use crate::linalg::{C64, CMat, CVec, mm_read};
use crate::pencil::{ModeEstimate, ProjectionPencil, SubspacePair, oracle_full_spectrum};
use crate::problems::{ArmPattern, CrossGeometry, GridLayout, cross_plate_initial_guess, electromech_init, random_pair};
use crate::report::{ConvergenceReport, Iterate, Status};
use crate::select::Selector;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// How the starting subspace pair is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialSubspace {
    /// First `n` unit vectors on both sides.
    Canonical { n: usize },
    /// Plate arm bumps, one column per pattern, equal on both sides.
    ArmPatterns { patterns: Vec<ArmPattern> },
    /// Rotor angle and speed directions of every subsystem.
    Electromechanical,
    /// Matrix Market bases; the left basis defaults to the right one.
    Files { right: PathBuf, left: Option<PathBuf> },
    /// Random bases from a seed.
    Random { seed: u64, n: usize, equal: bool },
}

/// Algorithm, start and options, independent of where the problem lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSpec {
    pub algorithm: u8,
    pub initial: InitialSubspace,
    /// One selector for single-mode algorithms, one per mode otherwise.
    /// Empty means spectral order.
    #[serde(default)]
    pub selectors: Vec<Selector>,
    #[serde(default)]
    pub options: SolverOptions,
    /// Compare every estimate with the dense spectrum.
    #[serde(default)]
    pub oracle: bool,
}

impl SolveSpec {
    pub fn is_multi(&self) -> bool {
        matches!(self.algorithm, 2 | 7 | 8)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.algorithm) {
            return Err(Error::InvalidConfig(format!("algorithm {} not in 1..=8", self.algorithm)));
        }
        if !self.is_multi() && self.selectors.len() > 1 {
            return Err(Error::InvalidConfig(format!("algorithm {} takes one selector", self.algorithm)));
        }
        self.options.validate()
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: PathBuf,
    #[serde(flatten)]
    pub spec: SolveSpec,
}

impl RunConfig {
    /// Reads a JSON config; relative paths are taken from its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, dir: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        join(&mut self.problem);
        if let InitialSubspace::Files { right, left } = &mut self.spec.initial {
            join(right);
            if let Some(l) = left {
                join(l);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleMatch {
    pub lambda: C64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub lambda: C64,
    /// `Im λ / 2π` for time-domain models.
    pub frequency_hz: Option<f64>,
    pub residual: f64,
    pub status: Status,
    pub iterations: usize,
    pub order_fit: Option<f64>,
    /// `|ρ|` at the last iterate.
    pub rho_modulus: Option<f64>,
    pub defective_pairing: bool,
    pub oracle: Option<OracleMatch>,
    pub history: Vec<Iterate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub source: Source,
    pub dim: usize,
    pub rank_e: usize,
    pub sparse: bool,
}

/// Machine-readable result; only `elapsed_seconds` varies between reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub problem: ProblemSummary,
    pub modes: Vec<ModeReport>,
    pub elapsed_seconds: f64,
}

/// A report together with the vectors it describes.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub estimates: Vec<ModeEstimate>,
    /// Plate grid, when the problem came from the plate generator.
    pub layout: Option<GridLayout>,
}

#[derive(Clone, Copy)]
enum Target<'a> {
    Pencil(&'a ProjectionPencil),
    Composite(&'a CompositeModel, &'a ProjectionPencil),
}

impl<'a> Target<'a> {
    fn pencil(self) -> &'a ProjectionPencil {
        match self {
            Target::Pencil(p) | Target::Composite(_, p) => p,
        }
    }
}

fn geometry(source: &Source) -> Option<CrossGeometry> {
    match source {
        Source::Plate { geometry } => Some(*geometry),
        _ => None,
    }
}

enum Start {
    Pair(SubspacePair),
    Subsystems(Vec<SubspacePair>),
}

fn read_basis(path: &Path) -> Result<CMat> {
    Ok(mm_read(path)?.to_dense())
}

fn starting_pair(spec: &SolveSpec, source: &Source, target: Target) -> Result<Start> {
    let pencil = target.pencil();
    match &spec.initial {
        InitialSubspace::Canonical { n } => Ok(Start::Pair(SubspacePair::canonical(pencil, *n)?)),
        InitialSubspace::ArmPatterns { patterns } => {
            let g = geometry(source).ok_or_else(|| Error::InvalidConfig("arm patterns need a plate problem".into()))?;
            if patterns.is_empty() {
                return Err(Error::InvalidConfig("no arm patterns given".into()));
            }
            let mut right = CMat::zeros(pencil.dim(), patterns.len());
            for (k, p) in patterns.iter().enumerate() {
                right.set_column(k, &cross_plate_initial_guess(&g, *p)?.column(0));
            }
            Ok(Start::Pair(SubspacePair::normalized(right.clone(), right, pencil.e())?))
        }
        InitialSubspace::Electromechanical => match target {
            Target::Composite(model, _) => Ok(Start::Subsystems(electromech_init(model)?)),
            Target::Pencil(_) => Err(Error::InvalidConfig("electromechanical start needs a composite problem".into())),
        },
        InitialSubspace::Files { right, left } => {
            let r = read_basis(right)?;
            let l = match left {
                Some(l) => read_basis(l)?,
                None => r.clone(),
            };
            Ok(Start::Pair(SubspacePair::normalized(r, l, pencil.e())?))
        }
        InitialSubspace::Random { seed, n, equal } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(Start::Pair(random_pair(&mut rng, pencil, *n, *equal)?))
        }
    }
}

type Single = Result<(ModeEstimate, ConvergenceReport)>;
type Multi = Result<(Vec<ModeEstimate>, Vec<ConvergenceReport>)>;

fn selectors_for(cfg: &SolveSpec, modes: usize) -> Vec<Selector> {
    if !cfg.selectors.is_empty() {
        return cfg.selectors.clone();
    }
    if cfg.is_multi() { (0..modes).map(|index| Selector::Index { index }).collect() } else { vec![Selector::default()] }
}

fn identity_e(pencil: &ProjectionPencil) -> bool {
    pencil.rank_e() == pencil.dim()
}

fn classical_system(pencil: &ProjectionPencil, pair: &SubspacePair) -> Result<PartitionedSystem> {
    if !identity_e(pencil) {
        return Err(Error::InvalidConfig("the classical partition needs E = I".into()));
    }
    let n = pair.dim();
    if pair != &SubspacePair::canonical(pencil, n)? {
        return Err(Error::InvalidConfig("the classical partition needs a canonical starting subspace".into()));
    }
    PartitionedSystem::split(pencil.a_dense(), n)
}

fn dispatch(cfg: &SolveSpec, target: Target, start: Start) -> Multi {
    let opts = &cfg.options;
    let single = |r: Single| r.map(|(e, rep)| (vec![e], vec![rep]));
    match (target, start) {
        (Target::Composite(model, pencil), Start::Subsystems(pairs)) => {
            let sel = selectors_for(cfg, pairs.iter().map(|p| p.dim()).sum());
            let red = CompositeReduction::new(model, pairs)?;
            match cfg.algorithm {
                2 => solve_multi(red, &sel, opts, false),
                3 => single(solve_single(red, &sel[0], opts, false)),
                4 => single(solve_single(red, &sel[0], opts, true)),
                5..=8 => {
                    let pair = embed_pairs(model, pencil, red.pairs())?;
                    dispatch(cfg, target, Start::Pair(pair))
                }
                a => Err(Error::InvalidConfig(format!("algorithm {a} does not apply to composite models"))),
            }
        }
        (_, Start::Subsystems(_)) => Err(Error::InvalidConfig("per-subsystem start on a plain pencil".into())),
        (target, Start::Pair(pair)) => {
            let pencil = target.pencil();
            let sel = selectors_for(cfg, pair.dim());
            match cfg.algorithm {
                1 => single(algorithm1(&classical_system(pencil, &pair)?, &sel[0], opts)),
                2 if identity_e(pencil) && classical_system(pencil, &pair).is_ok() => {
                    algorithm2(&classical_system(pencil, &pair)?, &sel, opts)
                }
                2 => algorithm2_general(pencil, &pair, &sel, opts),
                3 => single(algorithm3(pencil, &pair, &sel[0], opts)),
                4 => single(algorithm4(pencil, &pair, &sel[0], opts)),
                5 => single(algorithm5(pencil, &pair, &sel[0], opts)),
                6 => single(algorithm6(pencil, &pair, &sel[0], opts)),
                7 => algorithm7(pencil, &pair, &sel, opts),
                8 => algorithm8(pencil, &pair, &sel, opts),
                a => Err(Error::InvalidConfig(format!("algorithm {a} not in 1..=8"))),
            }
        }
    }
}

/// Estimates with their per-mode reports.
#[derive(Debug, Clone)]
pub struct Solved {
    pub estimates: Vec<ModeEstimate>,
    pub modes: Vec<ModeReport>,
}

fn solve_target(spec: &SolveSpec, source: &Source, target: Target) -> Result<Solved> {
    spec.validate()?;
    let start = starting_pair(spec, source, target)?;
    let (estimates, reports) = dispatch(spec, target, start)?;
    let pencil = target.pencil();
    let oracle = if spec.oracle { Some(oracle_full_spectrum(pencil)?) } else { None };
    let time_domain = matches!(target, Target::Composite(..));
    let modes = estimates
        .iter()
        .zip(reports)
        .map(|(est, rep)| {
            let oracle = oracle.as_ref().and_then(|o| {
                o.nearest(est.lambda).map(|k| OracleMatch { lambda: o.modes[k].lambda, abs_error: (o.modes[k].lambda - est.lambda).norm() })
            });
            ModeReport {
                lambda: est.lambda,
                frequency_hz: time_domain.then(|| est.lambda.im / (2.0 * std::f64::consts::PI)),
                residual: est.residual,
                status: rep.status,
                iterations: rep.iterations(),
                order_fit: rep.order_fit,
                rho_modulus: rep.iterates.last().and_then(|it| it.rho).map(|r| r.norm()),
                defective_pairing: est.defective_pairing,
                oracle,
                history: rep.iterates,
            }
        })
        .collect();
    Ok(Solved { estimates, modes })
}

/// Solves an in-memory pencil; starts that need a generator source are rejected.
pub fn solve_pencil(pencil: &ProjectionPencil, spec: &SolveSpec) -> Result<Solved> {
    solve_target(spec, &Source::Files, Target::Pencil(pencil))
}

/// Loads the configured problem and runs the algorithm. Solver failures are
/// returned as errors carrying the partial history where one exists.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.spec.validate()?;
    let clock = Instant::now();
    let (manifest, problem) = load(&cfg.problem)?;
    let source = manifest.source;
    let (solved, pencil) = match problem {
        Problem::Pencil(p) => (solve_target(&cfg.spec, &source, Target::Pencil(&p))?, p),
        Problem::Composite(m) => {
            let p = assemble_monolithic(&m)?;
            (solve_target(&cfg.spec, &source, Target::Composite(&m, &p))?, p)
        }
    };
    let problem = ProblemSummary { source: source.clone(), dim: pencil.dim(), rank_e: pencil.rank_e(), sparse: pencil.is_sparse() };
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        problem,
        modes: solved.modes,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
    };
    let layout = geometry(&source).map(|g| GridLayout::new(&g));
    Ok(RunOutcome { report, estimates: solved.estimates, layout })
}

/// Columns `iter, re_lambda, im_lambda, abs_step, residual, rho_abs`.
pub fn write_history_csv(path: &Path, history: &[Iterate]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "iter,re_lambda,im_lambda,abs_step,residual,rho_abs")?;
    for (k, it) in history.iter().enumerate() {
        let rho = it.rho.map(|r| r.norm().to_string()).unwrap_or_default();
        writeln!(out, "{k},{},{},{},{},{rho}", it.lambda.re, it.lambda.im, it.step, it.residual)?;
    }
    out.flush()?;
    Ok(())
}

/// Rotates `v` so its largest entry is real and positive, then scales it to
/// unit maximum modulus.
pub fn fix_phase(v: &CVec) -> CVec {
    let peak = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(C64::new(0.0, 0.0));
    if peak.norm() == 0.0 { v.clone() } else { v.map(|x| x / peak) }
}

/// Columns `i, j, re_psi, im_psi` over the interior grid points.
pub fn write_mode_shape_csv(path: &Path, layout: &GridLayout, v: &CVec) -> Result<()> {
    if v.len() != layout.len() {
        return Err(Error::DimensionMismatch(format!("mode of length {} on a grid of {} points", v.len(), layout.len())));
    }
    let psi = fix_phase(v);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "i,j,re_psi,im_psi")?;
    for (k, &(i, j)) in layout.points().iter().enumerate() {
        writeln!(out, "{i},{j},{},{}", psi[k].re, psi[k].im)?;
    }
    out.flush()?;
    Ok(())
}

/// Exit code for an error: 2 numerical failure, 3 bad input, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_input_error() {
        return 3;
    }
    match err {
        Error::GenerationFailed(_) => 1,
        _ => 2,
    }
}

/// Partial history attached to a failed solve.
pub fn failure_history(err: &Error) -> Option<&ConvergenceReport> {
    match err {
        Error::MaxIterations { report } | Error::Diverged { report } => Some(report),
        _ => None,
    }
}

/// `{"error": {"kind", "message", "exit_code", "history"?}}`.
pub fn error_json(err: &Error) -> serde_json::Value {
    let mut body = serde_json::json!({
        "kind": err.kind(),
        "message": err.to_string(),
        "exit_code": exit_code(err),
    });
    if let Some(rep) = failure_history(err) {
        body["history"] = serde_json::to_value(rep).unwrap_or(serde_json::Value::Null);
    }
    serde_json::json!({ "error": body })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::write_pencil;
    use crate::problems::cross_plate;

    fn plate_config(dir: &Path, algorithm: u8) -> RunConfig {
        let g = CrossGeometry { core: 4, up: 4, down: 3, left: 3, right: 2, h: 0.2 };
        let (p, _) = cross_plate(&g).unwrap();
        let problem = write_pencil(dir, &p, Source::Plate { geometry: g }).unwrap();
        RunConfig {
            problem,
            spec: SolveSpec {
                algorithm,
                initial: InitialSubspace::ArmPatterns { patterns: vec![ArmPattern::UpVsDown] },
                selectors: vec![],
                options: SolverOptions::default(),
                oracle: true,
            },
        }
    }

    #[test]
    fn plate_run_agrees_with_oracle() {
        let dir = tempfile::tempdir().unwrap();
        for algorithm in [4, 6] {
            let out = run(&plate_config(dir.path(), algorithm)).unwrap();
            let mode = &out.report.modes[0];
            assert_eq!(mode.status, Status::Converged);
            assert!(mode.oracle.as_ref().unwrap().abs_error < 1e-8 * mode.lambda.norm());
            assert_eq!(out.layout.as_ref().unwrap().len(), out.report.problem.dim);
        }
    }

    #[test]
    fn reports_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = plate_config(dir.path(), 3);
        let mut a = run(&cfg).unwrap().report;
        let mut b = run(&cfg).unwrap().report;
        a.elapsed_seconds = 0.0;
        b.elapsed_seconds = 0.0;
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn classical_requires_canonical_start() {
        let dir = tempfile::tempdir().unwrap();
        let err = run(&plate_config(dir.path(), 1)).unwrap_err();
        assert_eq!(exit_code(&err), 3);
        let mut cfg = plate_config(dir.path(), 1);
        cfg.spec.initial = InitialSubspace::Canonical { n: 3 };
        cfg.spec.oracle = false;
        cfg.spec.options.max_iter = 200;
        let out = run(&cfg);
        assert!(out.is_ok() || failure_history(&out.unwrap_err()).is_some());
    }

    #[test]
    fn error_json_carries_kind_and_code() {
        let v = error_json(&Error::InvalidConfig("x".into()));
        assert_eq!(v["error"]["kind"], "invalid_config");
        assert_eq!(v["error"]["exit_code"], 3);
    }

    #[test]
    fn phase_fix_makes_peak_real() {
        let v = CVec::from_vec(vec![C64::new(0.0, 2.0), C64::new(1.0, 0.0)]);
        let p = fix_phase(&v);
        assert!((p[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }
}
