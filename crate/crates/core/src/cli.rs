//! Command-line front end. [`run`] parses arguments, executes one experiment,
//! writes its files atomically and prints a JSON summary on stdout.
//!
//! Exit codes: 0 success, 2 invalid input or failed validation, 3 numerical
//! non-convergence, 64 usage error. The master seed is read from `PSPIN_SEED`
//! and the worker count from `PSPIN_THREADS` (overridden by `--threads`).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::freeconv::{self, FreeConvOptions};
use crate::kacrice::{self, QuadSpec};
use crate::measure::{DiscreteMeasure, GridMeasure};
use crate::optimizer::{self, SolverConfig};
use crate::potential::{presets, Potential, Term};
use crate::rmt;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SEED: u64 = 20_240_917;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "pspin", version, about = "Annealed complexity of the anisotropic pure p-spin model")]
struct Cli {
    /// Directory for CSV/JSON outputs; nothing is written when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads; defaults to PSPIN_THREADS, then to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the growth conditions of a potential file.
    ValidatePotential {
        #[arg(long)]
        potential: PathBuf,
        #[arg(long, default_value_t = 1e3)]
        grid_max: f64,
        #[arg(long, default_value_t = 4001)]
        grid_points: usize,
    },
    /// Maximise the functional at each level.
    Sigma {
        #[arg(long)]
        potential: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        u: Vec<f64>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Locate the critical level where the complexity changes sign.
    Uc {
        #[arg(long)]
        potential: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Density of nu [+] semicircle for an atomic nu given as x:mass,...
    Freeconv {
        #[arg(long, allow_hyphen_values = true)]
        atoms: String,
        #[arg(long, default_value_t = 4001)]
        grid_points: usize,
    },
    /// Compare (1/N) E log|det(D + GOE_N)| with the free-convolution prediction.
    RmtLogdet {
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = Diagonal::Zero)]
        diagonal: Diagonal,
        /// Magnitude for the alternating and constant diagonals.
        #[arg(long, default_value_t = 2.0)]
        value: f64,
    },
    /// Evaluate the Kac-Rice integral for N = 1, 2, 3.
    Kacrice {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        u: f64,
        #[arg(long)]
        potential: PathBuf,
        /// Also count critical points directly over random couplings (p = 2, N <= 2).
        #[arg(long)]
        validate_against_counting: bool,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 8)]
        order: usize,
        #[arg(long, default_value_t = 1e-2)]
        rel_tol: f64,
        #[arg(long, default_value_t = 2000)]
        mc_samples: usize,
    },
    /// Empirical means and covariances of the field against the closed forms.
    CovTest {
        #[arg(long)]
        potential: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        sigma: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Largest tolerated |z| of any entry.
        #[arg(long, default_value_t = 4.0)]
        max_z: f64,
    },
    /// Run the smoke suite of closed-form checks.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Diagonal {
    Zero,
    Alternating,
    Constant,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// TOML or JSON file with solver settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    grid_half_width: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    random_starts: Option<usize>,
    #[arg(long)]
    level_tol: Option<f64>,
}

impl SolverArgs {
    fn resolve(&self, seed: u64) -> Result<SolverConfig> {
        let mut config = match &self.config {
            None => SolverConfig::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                if path.extension().is_some_and(|e| e == "json") {
                    serde_json::from_str(&text)?
                } else {
                    toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?
                }
            }
        };
        config.seed = seed;
        if let Some(v) = self.grid_half_width {
            config.grid_half_width = v;
        }
        if let Some(v) = self.grid_points {
            config.grid_points = v;
        }
        if let Some(v) = self.restarts {
            config.restarts = v;
        }
        if let Some(v) = self.random_starts {
            config.random_starts = v;
        }
        if let Some(v) = self.level_tol {
            config.level_tol = v;
        }
        Ok(config)
    }
}

/// Master seed from `PSPIN_SEED`, or [`DEFAULT_SEED`].
pub fn master_seed() -> Result<u64> {
    match std::env::var("PSPIN_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| Error::InvalidArgument(format!("PSPIN_SEED = '{s}' is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn configure_threads(flag: Option<usize>) -> Result<Option<usize>> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("PSPIN_THREADS") {
            Ok(s) => Some(s.trim().parse().map_err(|_| Error::InvalidArgument(format!("PSPIN_THREADS = '{s}' is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidArgument("thread count must be positive".into()));
        }
        // A pool that already exists (repeated calls in one process) is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(threads)
}

/// Hex SHA-256 of the canonical JSON form of a resolved configuration.
pub fn config_hash(config: &Value) -> String {
    let digest = Sha256::digest(config.to_string().as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// A finished command: JSON result plus an optional table for CSV output.
struct Outcome {
    result: Value,
    table: Option<Table>,
    /// Overrides the exit code for completed runs whose checks failed.
    failed: bool,
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn to_csv(&self, version: &str, hash: &str) -> String {
        let mut s = format!("# pspin-complexity {version}\n# config {hash}\n{}\n", self.header.join(","));
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn load_potential(path: &Path) -> Result<Potential> {
    Potential::from_json_file(path).map_err(|e| match e {
        Error::Io(io) => Error::InvalidArgument(format!("cannot read potential file {}: {io}", path.display())),
        other => other,
    })
}

/// Parses `argv` (program name first) and runs the selected command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NONCONVERGENCE
            } else {
                EXIT_INVALID
            }
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let threads = configure_threads(cli.threads)?;
    let seed = master_seed()?;
    let (name, params, outcome) = dispatch(&cli.command, seed)?;
    let config = json!({ "command": name, "params": params, "seed": seed, "format": cli.format });
    let hash = config_hash(&config);

    let mut outputs = Vec::new();
    if let Some(dir) = &cli.out {
        let (path, body) = match (&cli.format, &outcome.table) {
            (Format::Csv, Some(table)) => (dir.join(format!("{name}.csv")), table.to_csv(VERSION, &hash)),
            _ => {
                let doc = json!({ "version": VERSION, "config_hash": hash, "config": config, "result": outcome.result });
                (dir.join(format!("{name}.json")), serde_json::to_string_pretty(&doc)? + "\n")
            }
        };
        write_atomic(&path, body.as_bytes())?;
        outputs.push(path.display().to_string());
    }
    let summary = json!({
        "command": name,
        "version": VERSION,
        "config_hash": hash,
        "seed": seed,
        "threads": threads,
        "status": if outcome.failed { "failed" } else { "ok" },
        "outputs": outputs,
        "result": outcome.result,
    });
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&summary)?);
    Ok(if outcome.failed { EXIT_INVALID } else { EXIT_OK })
}

fn dispatch(command: &Command, seed: u64) -> Result<(&'static str, Value, Outcome)> {
    Ok(match command {
        Command::ValidatePotential { potential, grid_max, grid_points } => {
            let v = load_potential(potential)?;
            let report = v.validate(*grid_max, *grid_points)?;
            let table = Table {
                header: vec!["condition", "worst_margin", "at_x", "passed"],
                rows: report
                    .checks
                    .iter()
                    .map(|c| vec![c.name.clone(), num(c.worst_margin), num(c.at_x), c.passed.to_string()])
                    .collect(),
            };
            let params = json!({ "potential": v, "grid_max": grid_max, "grid_points": grid_points });
            let failed = !report.passed;
            ("validate-potential", params, Outcome { result: serde_json::to_value(&report)?, table: Some(table), failed })
        }
        Command::Sigma { potential, u, solver } => {
            let v = load_potential(potential)?;
            let config = solver.resolve(seed)?;
            let curve = optimizer::sigma_curve(&v, u, &config)?;
            let table = Table {
                header: vec!["u", "sigma", "t", "kl", "log_potential", "slack"],
                rows: curve
                    .iter()
                    .map(|r| {
                        vec![num(r.u), num(r.sigma), num(r.value.t), num(r.value.kl), num(r.value.log_potential), num(r.feasibility_slack)]
                    })
                    .collect(),
            };
            let rows: Vec<Value> = curve
                .iter()
                .map(|r| json!({ "u": r.u, "sigma": r.sigma, "t": r.value.t, "slack": r.feasibility_slack }))
                .collect();
            let params = json!({ "potential": v, "u": u, "solver": config });
            ("sigma", params, Outcome { result: json!({ "levels": rows }), table: Some(table), failed: false })
        }
        Command::Uc { potential, solver } => {
            let v = load_potential(potential)?;
            let config = solver.resolve(seed)?;
            let report = optimizer::find_critical_level(&v, &config)?;
            let table = Table {
                header: vec!["u", "sigma"],
                rows: report
                    .evaluations
                    .iter()
                    .map(|(u, s)| vec![num(*u), s.map_or("-inf".into(), num)])
                    .collect(),
            };
            let params = json!({ "potential": v, "solver": config });
            ("uc", params, Outcome { result: serde_json::to_value(&report)?, table: Some(table), failed: false })
        }
        Command::Freeconv { atoms, grid_points } => {
            let nu = DiscreteMeasure::parse_atoms(atoms)?;
            let opts = FreeConvOptions { grid_points: *grid_points, ..FreeConvOptions::default() };
            let conv = freeconv::convolve_semicircle(&nu, &opts)?;
            let exact = freeconv::log_potential_at(&nu, 0.0)?;
            let table = Table {
                header: vec!["lambda", "density"],
                rows: conv.lambda.iter().zip(&conv.density).map(|(x, d)| vec![num(*x), num(*d)]).collect(),
            };
            let result = json!({
                "mass": conv.mass,
                "support_bound": conv.support_bound,
                "log_potential_density_route": conv.log_potential(),
                "log_potential_exact": exact,
            });
            let params = json!({ "atoms": atoms, "grid_points": grid_points });
            ("freeconv", params, Outcome { result, table: Some(table), failed: false })
        }
        Command::RmtLogdet { n, samples, diagonal, value } => {
            let diag: Vec<f64> = (0..*n)
                .map(|i| match diagonal {
                    Diagonal::Zero => 0.0,
                    Diagonal::Constant => *value,
                    Diagonal::Alternating => if i % 2 == 0 { *value } else { -*value },
                })
                .collect();
            let report = rmt::log_det_experiment(&diag, *samples, seed)?;
            let table = Table {
                header: vec!["n", "samples", "empirical", "stderr", "predicted", "gap", "resampled"],
                rows: vec![vec![
                    n.to_string(),
                    samples.to_string(),
                    num(report.empirical),
                    num(report.stderr),
                    num(report.predicted),
                    num(report.gap()),
                    report.resampled.to_string(),
                ]],
            };
            let mut result = serde_json::to_value(&report)?;
            result["gap"] = json!(report.gap());
            let params = json!({ "n": n, "samples": samples, "diagonal": diagonal, "value": value });
            ("rmt-logdet", params, Outcome { result, table: Some(table), failed: false })
        }
        Command::Kacrice { n, u, potential, validate_against_counting, trials, order, rel_tol, mc_samples } => {
            let v = load_potential(potential)?;
            let spec = QuadSpec { order: *order, rel_tol: *rel_tol, mc_samples: *mc_samples, ..QuadSpec::default() };
            let est = kacrice::expected_crt(*n, &v, *u, &spec, seed)?;
            let mut result = json!({ "estimate": est.value, "stderr": est.stderr, "rel_gap": est.rel_gap, "nodes": est.nodes });
            let mut row = vec![n.to_string(), num(*u), num(est.value), num(est.stderr), String::new(), String::new(), String::new()];
            let mut failed = false;
            if *validate_against_counting {
                let counts = kacrice::count_ensemble(*n, &v, *u, *trials, seed)?;
                let z = (est.value - counts.mean) / est.stderr.hypot(counts.stderr);
                failed = !(z.abs() <= 3.0);
                result["oracle"] = json!(counts.mean);
                result["oracle_stderr"] = json!(counts.stderr);
                result["z"] = json!(z);
                result["degenerate_trials"] = json!(counts.degenerate_trials);
                row[4] = num(counts.mean);
                row[5] = num(counts.stderr);
                row[6] = num(z);
            }
            let table = Table { header: vec!["n", "u", "estimate", "stderr", "oracle", "oracle_stderr", "z"], rows: vec![row] };
            let params = json!({
                "n": n, "u": u, "potential": v, "counting": validate_against_counting,
                "trials": trials, "quadrature": spec,
            });
            ("kacrice", params, Outcome { result, table: Some(table), failed })
        }
        Command::CovTest { potential, sigma, samples, max_z } => {
            let v = load_potential(potential)?;
            let report = kacrice::covariance_test(sigma, &v, *samples, seed)?;
            let failed = report.max_z() > *max_z || report.residual_ratio > 1e-2;
            let table = Table {
                header: vec!["entry", "predicted", "empirical", "stderr", "z"],
                rows: report
                    .entries
                    .iter()
                    .chain(&report.conditional)
                    .chain(&report.conditional_mean)
                    .map(|e| vec![e.name.clone(), num(e.predicted), num(e.empirical), num(e.stderr), num(e.z)])
                    .collect(),
            };
            let result = json!({
                "max_z": report.max_z(),
                "max_conditional_z": report.max_conditional_z(),
                "residual_ratio": report.residual_ratio,
                "var_h_rel_error": report.var_h_rel_error,
                "worst": report.worst(),
            });
            let params = json!({ "potential": v, "sigma": sigma, "samples": samples, "max_z": max_z });
            ("cov-test", params, Outcome { result, table: Some(table), failed })
        }
        Command::Selftest => {
            let checks = selftest(seed);
            let failed = checks.iter().any(|c| !c.passed);
            let table = Table {
                header: vec!["check", "passed", "detail"],
                rows: checks.iter().map(|c| vec![c.name.to_string(), c.passed.to_string(), c.detail.replace(',', ";")]).collect(),
            };
            ("selftest", json!({}), Outcome { result: serde_json::to_value(&checks)?, table: Some(table), failed })
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> SelfCheck {
    match f() {
        Ok((passed, detail)) => SelfCheck { name, passed, detail },
        Err(e) => SelfCheck { name, passed: false, detail: e.to_string() },
    }
}

/// Closed-form smoke checks across all modules.
pub fn selftest(seed: u64) -> Vec<SelfCheck> {
    let quartic = presets::quartic();
    let mixed = presets::sextic_mixed();
    vec![
        check("potential_values_at_one", || {
            let (v, d1, d2) = quartic.eval(1.0);
            Ok((v == 1.0 && d1 == 4.0 && d2 == 12.0, format!("({v}, {d1}, {d2})")))
        }),
        check("potential_vanishes_at_origin", || {
            let e = mixed.eval(0.0);
            Ok((e == (0.0, 0.0, 0.0), format!("{e:?}")))
        }),
        check("quadratic_potential_rejected", || {
            let v = Potential::new(vec![Term { coeff: 1.0, exponent: 2.0 }], 2, 2.0, 2.0, 2.0, 1.0)?;
            Ok((v.validate_default().is_err(), "x^2 with p = 2".into()))
        }),
        check("gaussian_second_moment", || {
            let m2 = GridMeasure::standard_gaussian(8.0, 4001).second_moment();
            Ok(((m2 - 1.0).abs() <= 1e-4, format!("{m2}")))
        }),
        check("unit_dilation_is_identity", || {
            let mu = GridMeasure::standard_gaussian(8.0, 401);
            Ok((mu.dilate(1.0)? == mu, String::new()))
        }),
        check("dilated_second_moment", || {
            let m2 = GridMeasure::standard_gaussian(8.0, 4001).dilate(0.5)?.second_moment();
            Ok(((m2 - 0.25).abs() <= 1e-4, format!("{m2}")))
        }),
        check("gaussian_self_divergence", || {
            let kl = GridMeasure::standard_gaussian(8.0, 4001).kl_divergence();
            Ok((kl.abs() <= 1e-3, format!("{kl:e}")))
        }),
        check("curvature_atom", || {
            let x = crate::measure::curvature_atom(&quartic, 1.0, 1.0, f64::INFINITY);
            Ok(((x - 12.0 / 2f64.sqrt()).abs() < 1e-12, format!("{x}")))
        }),
        check("level_at_origin_cell", || {
            let mut w = vec![0.0; 401];
            w[200] = 1.0;
            let mu = GridMeasure::from_unnormalized(8.0, 401, w)?;
            let c = crate::functional::level_constraint(1.0, &mu, &quartic);
            Ok((c == 0.0, format!("{c}")))
        }),
        check("semicircle_from_dirac", || {
            let conv = freeconv::convolve_semicircle(&DiscreteMeasure::dirac(0.0), &FreeConvOptions::default())?;
            let err = conv
                .lambda
                .iter()
                .zip(&conv.density)
                .filter(|(x, _)| x.abs() <= 1.9)
                .map(|(x, d)| (d - rmt::semicircle_density(*x)).abs())
                .fold(0.0, f64::max);
            Ok((err <= 1e-3, format!("sup error {err:e}")))
        }),
        check("shifted_dirac_is_shifted_semicircle", || {
            let conv = freeconv::convolve_semicircle(&DiscreteMeasure::dirac(1.5), &FreeConvOptions::default())?;
            let err = conv
                .lambda
                .iter()
                .zip(&conv.density)
                .filter(|(x, _)| (*x - 1.5).abs() <= 1.9)
                .map(|(x, d)| (d - rmt::semicircle_density(x - 1.5)).abs())
                .fold(0.0, f64::max);
            Ok((err <= 1e-3, format!("sup error {err:e}")))
        }),
        check("second_moment_bound_dirac", || {
            let b = freeconv::moment_bound_check(&DiscreteMeasure::dirac(0.0), 2.0, &FreeConvOptions::default())?;
            Ok(((b.lhs - 1.0).abs() < 1e-3 && (b.rhs - 4.0).abs() < 1e-12, format!("{} <= {}", b.lhs, b.rhs)))
        }),
        check("first_moment_bound_shifted", || {
            let b = freeconv::moment_bound_check(&DiscreteMeasure::dirac(3.0), 1.0, &FreeConvOptions::default())?;
            Ok((b.holds, format!("{} <= {}", b.lhs, b.rhs)))
        }),
        check("goe_semicircle_law", || {
            let mut spectrum = rmt::shifted_spectrum(&vec![0.0; 2000], 2000, seed, 0)?;
            spectrum.sort_by(f64::total_cmp);
            let ks = rmt::ks_to_semicircle(&spectrum);
            Ok((ks <= 0.02, format!("KS {ks:e}")))
        }),
        check("full_support_count", || {
            let r = rmt::wegner_check(&vec![0.0; 200], (-10.0, 10.0), 4, seed)?;
            Ok(((r.mean_count - 200.0).abs() < 1e-12, format!("{}", r.mean_count)))
        }),
        check("hessian_model_hand_value", || {
            let s = 2f64.sqrt();
            let m = kacrice::build_hessian_model(&[s, s], &quartic, None)?;
            let point = kacrice::integrand(&[s, s], &quartic)?;
            let ok = (point.v[0] - 16.0).abs() < 1e-12 && (m.mean_part[(0, 0)] - 12.0 * s).abs() < 1e-12;
            Ok((ok, format!("v = {:?}, mean part {}", point.v, m.mean_part[(0, 0)])))
        }),
        check("folded_normal_zero_mean", || {
            let e = kacrice::folded_normal_mean(0.0, 1.0);
            Ok(((e - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14, format!("{e}")))
        }),
        check("scalar_counts", || {
            let mut ok = true;
            for g in [-1.0, 0.0, 0.5, 2.0] {
                let c = kacrice::count_critical_points(&nalgebra::DMatrix::from_element(1, 1, g), &quartic, 0.0)?;
                ok &= c.total == if g > 0.0 { 3 } else { 1 };
            }
            Ok((ok, "3 critical points iff g > 0".into()))
        }),
        check("zero_coupling_single_critical_point", || {
            let c = kacrice::count_critical_points(&nalgebra::DMatrix::zeros(2, 2), &quartic, 0.0)?;
            Ok((c.total == 1, format!("{}", c.total)))
        }),
        check("kac_rice_shrinks_with_level", || {
            let spec = QuadSpec::default();
            let vals: Vec<f64> = [0.0, 1.0, 4.0]
                .iter()
                .map(|&u| kacrice::expected_crt(2, &quartic, u, &spec, seed).map(|e| e.value))
                .collect::<Result<_>>()?;
            Ok((vals.windows(2).all(|w| w[1] < w[0]) && vals[2] < 1e-3, format!("{vals:?}")))
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&json!({ "n": 1 }));
        assert_eq!(a, config_hash(&json!({ "n": 1 })));
        assert_ne!(a, config_hash(&json!({ "n": 2 })));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(["pspin", "selftest", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["pspin", "no-such-command"]), EXIT_USAGE);
    }

    #[test]
    fn missing_potential_is_invalid() {
        assert_eq!(run(["pspin", "validate-potential", "--potential", "/nonexistent/v.json"]), EXIT_INVALID);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
