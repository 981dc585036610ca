//! Command-line front end. Exit status: 0 on success, 1 on usage or
//! configuration errors, 2 when an experiment or an oracle check fails.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::{config_file, emit_csv, format_float, run_experiment, ExperimentSpec, SweepAxis};
use crate::channel::{SystemConfig, RNG_ALGORITHM};
use crate::error::Error;
use crate::oracle::{global_check, water_filling_gap};
use crate::solver::SolverOptions;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_EXPERIMENT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rsrelay", version, about = "Power allocation sweeps for rate-splitting full-duplex relaying")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write a CSV table.
    Run(RunArgs),
    /// Check a config file without running anything.
    Validate {
        /// Flat TOML config; defaults apply to missing keys.
        config: Option<PathBuf>,
    },
    /// Cross-check the solver against exhaustive search and water-filling.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat TOML config; defaults apply to missing keys.
    config: Option<PathBuf>,
    /// Axis to sweep: noise, strength_sd, distortion or power.
    #[arg(long)]
    sweep: Option<String>,
    /// Comma-separated axis values (dB, or linear for power).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// Output CSV path. Defaults to `<out-dir>/<axis>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "RSRELAY_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Seed of realization 0; realization i uses seed + i.
    #[arg(long, env = "RSRELAY_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Comma-separated scheme tokens: RS, RS_ND, ODL, ORL, HD.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Initial points: uniform or patterns.
    #[arg(long)]
    starts: Option<String>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Instances per subcarrier count.
    #[arg(long, default_value_t = 5)]
    instances: u64,
    #[arg(long, env = "RSRELAY_SEED", default_value_t = 0)]
    seed: u64,
    /// Lattice points per power variable.
    #[arg(long, default_value_t = 200)]
    points: usize,
}

fn load(config: Option<&Path>) -> Result<ExperimentSpec, Error> {
    match config {
        Some(p) => config_file::load(p),
        None => Ok(ExperimentSpec::new(SystemConfig::default(), SweepAxis::Noise)),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Experiment(_) => EXIT_EXPERIMENT,
        _ => EXIT_CONFIG,
    }
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec, Error> {
    let mut spec = load(args.config.as_deref())?;
    if let Some(axis) = &args.sweep {
        let axis: SweepAxis = axis.parse()?;
        if axis != spec.axis {
            spec.axis = axis;
            spec.axis_values = axis.default_values();
        }
    }
    if let Some(v) = &args.values {
        spec.axis_values = v.clone();
    }
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    if let Some(r) = args.realizations {
        spec.num_realizations = r;
    }
    if let Some(s) = &args.schemes {
        spec.schemes = config_file::parse_schemes(s.iter().map(String::as_str))?;
    }
    if let Some(s) = &args.starts {
        spec.solver.starts = s.parse()?;
    }
    spec.validate()?;
    Ok(spec)
}

fn run(args: RunArgs) -> i32 {
    let spec = match build_spec(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let path = args.out.clone().unwrap_or_else(|| args.out_dir.join(format!("{}.csv", spec.axis)));
    let result = match run_experiment(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    for p in &result.points {
        for c in &p.cells {
            println!(
                "{} = {:>8}  {:<5}  mean {:>11}  std {:>11}  ok {}  failed {}",
                spec.axis,
                format_float(p.axis_value),
                c.scheme.token(),
                format_float(c.mean),
                format_float(c.std),
                c.n_ok,
                c.n_fail
            );
        }
    }
    if let Err(e) = emit_csv(&result, &path) {
        eprintln!("error: writing {}: {e}", path.display());
        return EXIT_CONFIG;
    }
    println!("wrote {}", path.display());
    EXIT_OK
}

fn validate(config: Option<PathBuf>) -> i32 {
    match load(config.as_deref()) {
        Ok(spec) => {
            println!(
                "ok: K = {}, N_BS = {}, sweep {} over {} values, {} realizations, schemes {}",
                spec.base.num_subcarriers,
                spec.base.num_bs_antennas,
                spec.axis,
                spec.axis_values.len(),
                spec.num_realizations,
                spec.schemes.iter().map(|s| s.token()).collect::<Vec<_>>().join(",")
            );
            println!("rng: {RNG_ALGORITHM}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn oracle(args: OracleArgs) -> i32 {
    if args.points < 2 || args.instances == 0 {
        eprintln!("error: need --points >= 2 and --instances >= 1");
        return EXIT_CONFIG;
    }
    let opts = SolverOptions::default();
    let mut all_ok = true;
    for k in [1, 2] {
        for seed in args.seed..args.seed + args.instances {
            match global_check(k, seed, args.points, &opts) {
                Ok(c) => {
                    let ok = c.passed();
                    all_ok &= ok;
                    println!(
                        "{} grid K={k} seed {seed}: sia {:.6} grid {:.6} polished {:.6} (tol {:e})",
                        if ok { "PASS" } else { "FAIL" },
                        c.sia,
                        c.grid,
                        c.polished,
                        c.tol
                    );
                }
                Err(e) => {
                    all_ok = false;
                    println!("FAIL grid K={k} seed {seed}: {e}");
                }
            }
        }
    }
    for seed in args.seed..args.seed + args.instances {
        match water_filling_gap(&SystemConfig::default(), seed, &opts) {
            Ok(gap) => {
                let ok = gap <= 1e-6;
                all_ok &= ok;
                println!("{} water-filling seed {seed}: max gap {gap:.3e} (tol 1e-6)", if ok { "PASS" } else { "FAIL" });
            }
            Err(e) => {
                all_ok = false;
                println!("FAIL water-filling seed {seed}: {e}");
            }
        }
    }
    if all_ok {
        EXIT_OK
    } else {
        EXIT_EXPERIMENT
    }
}

/// Parse `args` (program name first) and run; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run(a) => run(a),
        Command::Validate { config } => validate(config),
        Command::Oracle(a) => oracle(a),
    }
}
