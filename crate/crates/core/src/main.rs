use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gsma::generalized::{HForm, SubspaceUpdate};
use gsma::io::{Problem, Source, load, write_composite, write_pencil};
use gsma::linalg::C64;
use gsma::problems::{ArmPattern, CrossGeometry, SyntheticSpec, area_pattern, cross_plate, random_solvable_pencil, synthetic_composite};
use gsma::run::{InitialSubspace, RunConfig, SolveSpec, error_json, exit_code, run, write_history_csv, write_mode_shape_csv};
use gsma::select::Selector;
use gsma::verify::{Suite, VerifyConfig, verify};
use gsma::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const VERIFY_FAILED: u8 = 4;
const USAGE_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "gsma", version, about = "Selective eigensolver for λEv = Av with E a symmetric projection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated problem as a manifest plus Matrix Market files.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Run one of the eight algorithms and write a JSON report.
    Solve(SolveArgs),
    /// Check the cross-module identities on seeded random instances.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum GenKind {
    /// Finite-difference Laplacian on a cross-shaped plate.
    Plate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        core: usize,
        #[arg(long, default_value_t = 10)]
        up: usize,
        #[arg(long, default_value_t = 9)]
        down: usize,
        #[arg(long, default_value_t = 9)]
        left: usize,
        #[arg(long, default_value_t = 8)]
        right: usize,
        #[arg(long, default_value_t = 0.1)]
        h: f64,
    },
    /// Seeded multi-machine composite model.
    Composite {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        subsystems: usize,
        #[arg(long, default_value_t = 4)]
        states_per: usize,
        #[arg(long, default_value_t = 1)]
        io_per: usize,
        #[arg(long, default_value_t = 10)]
        algebraic: usize,
    },
    /// Random solvable pencil with a coordinate projection.
    Random {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        order: usize,
        #[arg(long, default_value_t = 30)]
        rank: usize,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// JSON run configuration; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem manifest.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Algorithm number, 1 to 8.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=8))]
    algorithm: Option<u8>,
    /// `canonical:N`, `arms:up-vs-down[,right-vs-left]`, `electromech`,
    /// `random:SEED:N` or `files:RIGHT[,LEFT]`.
    #[arg(long)]
    initial: Option<String>,
    /// Repeatable: `index:K`, `nearest:RE,IM`, `pattern:P1,P2,…`,
    /// `objective:P1,P2,…` or `objective:area`.
    #[arg(long = "select")]
    select: Vec<String>,
    /// Stop when |Δλ| ≤ tol·(1 + |λ|).
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration limit per mode.
    #[arg(long)]
    max_iter: Option<usize>,
    /// `qa`, `aq` or `anticommutator`.
    #[arg(long)]
    h_form: Option<String>,
    /// `full-eigenvector` or `zeroed-static`.
    #[arg(long)]
    update: Option<String>,
    /// Compare with the dense spectrum.
    #[arg(long)]
    oracle: bool,
    /// Output directory for `report.json` and the CSV files; the report goes
    /// to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Repeatable; all suites when absent.
    #[arg(long, value_enum)]
    suite: Vec<Suite>,
    /// Instances per suite instead of each suite's default.
    #[arg(long)]
    instances: Option<usize>,
    /// Perturbation added to the tested side, to show the checks can fail.
    #[arg(long, default_value_t = 0.0)]
    fault: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn kebab<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| invalid(format!("unknown {what} `{s}`")))
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| invalid(format!("bad number `{x}`")))).collect()
}

fn parse_initial(s: &str) -> Result<InitialSubspace> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "canonical" => Ok(InitialSubspace::Canonical { n: rest.parse().map_err(|_| invalid(format!("bad count `{rest}`")))? }),
        "arms" => Ok(InitialSubspace::ArmPatterns {
            patterns: rest.split(',').map(|p| kebab::<ArmPattern>("arm pattern", p.trim())).collect::<Result<_>>()?,
        }),
        "electromech" => Ok(InitialSubspace::Electromechanical),
        "random" => {
            let (seed, n) = rest.split_once(':').ok_or_else(|| invalid("random start needs SEED:N"))?;
            let parse = |x: &str| x.parse::<u64>().map_err(|_| invalid(format!("bad integer `{x}`")));
            Ok(InitialSubspace::Random { seed: parse(seed)?, n: parse(n)? as usize, equal: false })
        }
        "files" => {
            let mut parts = rest.split(',');
            let right = parts.next().filter(|p| !p.is_empty()).ok_or_else(|| invalid("files start needs a right basis"))?;
            Ok(InitialSubspace::Files { right: right.into(), left: parts.next().map(PathBuf::from) })
        }
        _ => Err(invalid(format!("unknown initial subspace `{s}`"))),
    }
}

fn real_pattern(s: &str) -> Result<Vec<C64>> {
    Ok(numbers(s)?.into_iter().map(|x| C64::new(x, 0.0)).collect())
}

fn parse_selector(s: &str, problem: &Path) -> Result<Selector> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| invalid(format!("selector `{s}` needs KIND:VALUE")))?;
    match kind {
        "index" => Ok(Selector::Index { index: rest.parse().map_err(|_| invalid(format!("bad index `{rest}`")))? }),
        "nearest" => match numbers(rest)?.as_slice() {
            [re] => Ok(Selector::Nearest { target: C64::new(*re, 0.0) }),
            [re, im] => Ok(Selector::Nearest { target: C64::new(*re, *im) }),
            _ => Err(invalid("nearest takes RE or RE,IM")),
        },
        "pattern" => Ok(Selector::Pattern { pattern: real_pattern(rest)? }),
        "objective" if rest == "area" => match load(problem)?.1 {
            Problem::Composite(model) => Ok(Selector::Objective { pattern: area_pattern(&model) }),
            Problem::Pencil(_) => Err(invalid("the area objective needs a composite problem")),
        },
        "objective" => Ok(Selector::Objective { pattern: real_pattern(rest)? }),
        _ => Err(invalid(format!("unknown selector `{s}`"))),
    }
}

fn solve_config(args: &SolveArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig {
            problem: args.problem.clone().ok_or_else(|| invalid("--problem or --config is required"))?,
            spec: SolveSpec {
                algorithm: args.algorithm.ok_or_else(|| invalid("--algorithm or --config is required"))?,
                initial: InitialSubspace::Canonical { n: 1 },
                selectors: Vec::new(),
                options: Default::default(),
                oracle: false,
            },
        },
    };
    if let Some(p) = &args.problem {
        cfg.problem = p.clone();
    }
    if let Some(a) = args.algorithm {
        cfg.spec.algorithm = a;
    }
    if let Some(s) = &args.initial {
        cfg.spec.initial = parse_initial(s)?;
    } else if args.config.is_none() {
        return Err(invalid("--initial or --config is required"));
    }
    if !args.select.is_empty() {
        cfg.spec.selectors = args.select.iter().map(|s| parse_selector(s, &cfg.problem)).collect::<Result<_>>()?;
    }
    if let Some(t) = args.tol {
        cfg.spec.options.tol = t;
    }
    if let Some(n) = args.max_iter {
        cfg.spec.options.max_iter = n;
    }
    if let Some(f) = &args.h_form {
        cfg.spec.options.h_form = kebab::<HForm>("correction form", f)?;
    }
    if let Some(u) = &args.update {
        cfg.spec.options.subspace_update = kebab::<SubspaceUpdate>("subspace update", u)?;
    }
    cfg.spec.oracle |= args.oracle;
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn solve(args: &SolveArgs) -> Result<()> {
    let cfg = solve_config(args)?;
    let outcome = run(&cfg)?;
    let Some(dir) = &args.out else {
        println!("{}", serde_json::to_string_pretty(&outcome.report)?);
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), &outcome.report)?;
    for (k, mode) in outcome.report.modes.iter().enumerate() {
        write_history_csv(&dir.join(format!("history_mode{k}.csv")), &mode.history)?;
    }
    if let Some(layout) = &outcome.layout {
        for (k, est) in outcome.estimates.iter().enumerate() {
            if let Some(v) = &est.v {
                write_mode_shape_csv(&dir.join(format!("mode_shape{k}.csv")), layout, v)?;
            }
        }
    }
    for m in &outcome.report.modes {
        eprintln!("λ = {} ({:?}, {} iterations, residual {:.3e})", m.lambda, m.status, m.iterations, m.residual);
    }
    Ok(())
}

fn generate(kind: &GenKind) -> Result<PathBuf> {
    match *kind {
        GenKind::Plate { ref out, core, up, down, left, right, h } => {
            let geometry = CrossGeometry { core, up, down, left, right, h };
            let (pencil, _) = cross_plate(&geometry)?;
            write_pencil(out, &pencil, Source::Plate { geometry })
        }
        GenKind::Composite { ref out, seed, subsystems, states_per, io_per, algebraic } => {
            let spec = SyntheticSpec { seed, subsystems, states_per, io_per, algebraic };
            write_composite(out, &synthetic_composite(&spec)?, Source::Synthetic { spec })
        }
        GenKind::Random { ref out, seed, order, rank } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pencil = random_solvable_pencil(&mut rng, order, rank, false)?;
            write_pencil(out, &pencil, Source::Random { seed, order, rank })
        }
    }
}

fn run_verify(args: &VerifyArgs) -> Result<bool> {
    let cfg = VerifyConfig { seed: args.seed, instances: args.instances, fault: args.fault };
    let report = verify(&cfg, &args.suite)?;
    for r in &report.results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        eprintln!("{verdict} {:<18} max {:.3e} ≤ {:.0e} over {} instances", r.suite.name(), r.max_deviation, r.tolerance, r.instances);
        for note in &r.notes {
            eprintln!("     {note}");
        }
    }
    match &args.out {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(report.passed)
}

fn report_error(err: &Error, out: Option<&Path>) -> ExitCode {
    let body = error_json(err);
    if let Some(dir) = out {
        let _ = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("error.json"), body.to_string() + "\n"));
    }
    eprintln!("{body}");
    ExitCode::from(exit_code(err) as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    match &cli.command {
        Command::Gen { kind } => match generate(kind) {
            Ok(path) => {
                println!("{}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => report_error(&e, None),
        },
        Command::Solve(args) => match solve(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => report_error(&e, args.out.as_deref()),
        },
        Command::Verify(args) => match run_verify(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(VERIFY_FAILED),
            Err(e) => report_error(&e, None),
        },
    }
}
