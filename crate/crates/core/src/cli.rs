//! Command-line front end. The binary is a thin wrapper around [`run`].

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::analysis::{measured_bandwidth, run_verification, VerifyOptions, BAND_TOL};
use crate::benchmark::{run_suite, SuiteConfig};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate, estimate_impulse, fit_metric, neg_log_marglik, DataSet, Family, TuneConfig, FIR_TAPS,
};
use crate::kernel::{gram, sample_gp, KernelSpec, KernelSpecJson};
use crate::linalg::spd_inverse;

/// Seed used when neither `--seed` nor `KERNELREG_SEED` is given.
pub const DEFAULT_SEED: u64 = 1;
pub const SEED_ENV: &str = "KERNELREG_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const MAX_INSPECT_GRID: usize = 200;

#[derive(Parser, Debug)]
#[command(name = "kernelreg", version, about = "Kernel-based impulse response estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw Gaussian-process realizations of a kernel on a grid.
    Sample {
        #[command(flatten)]
        kernel: KernelArgs,
        /// Grid `a:b` (inclusive).
        #[arg(long, default_value = "0:100")]
        grid: String,
        #[arg(long, default_value_t = 5)]
        paths: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; CSV goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the kernel matrix on a grid.
    Eval {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value = "0:10")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tune a kernel family on data and estimate the impulse response.
    Estimate {
        /// CSV with header `t,u,y`; a `g0.csv` next to it is used for the fit.
        #[arg(long)]
        data: PathBuf,
        /// Family to tune; alternatively give a fixed kernel with `--kernel`.
        #[arg(long, conflicts_with = "kernel")]
        family: Option<String>,
        /// Fixed kernel spec (JSON); needs `--sigma2`.
        #[arg(long, requires = "sigma2")]
        kernel: Option<PathBuf>,
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long, default_value_t = FIR_TAPS)]
        taps: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the structural verification suite.
    Verify {
        #[arg(long)]
        seed: Option<u64>,
        /// Tolerance override `NAME=VALUE` (realization, factorization, band, maxent, markov).
        #[arg(long = "tol")]
        tol: Vec<String>,
        /// Perturb the DC realization to check that the suite notices.
        #[arg(long)]
        inject_fault: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write K and its inverse on a grid and report the inverse's bandwidth.
    Inspect {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value = "1:10")]
        grid: String,
        /// Tolerance override `band=VALUE`.
        #[arg(long = "tol")]
        tol: Vec<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the Monte Carlo benchmark.
    Bench {
        #[arg(long, default_value_t = 200)]
        systems: usize,
        #[arg(long, default_value = "tc,dc,amls2os,amls2od,si2od,oracle")]
        families: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, default_value = "bench_out")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    /// Kernel spec JSON file.
    #[arg(long, conflicts_with = "family")]
    pub kernel: Option<PathBuf>,
    /// Kernel family name, with `--params`.
    #[arg(long)]
    pub family: Option<String>,
    /// Hyperparameters `k=v,k=v`.
    #[arg(long, default_value = "")]
    pub params: String,
}

impl KernelArgs {
    fn load(&self) -> Result<KernelSpec> {
        if let Some(path) = &self.kernel {
            return KernelSpec::from_json_str(&std::fs::read_to_string(path)?);
        }
        let family = self.family.as_deref().ok_or_else(|| {
            Error::InvalidArgument("either --kernel FILE or --family NAME is required".into())
        })?;
        let raw = KernelSpecJson {
            family: family.to_ascii_lowercase(),
            params: parse_params(&self.params)?,
            seedless: true,
            envelope: None,
            corr: None,
            model: None,
            g0: None,
        };
        KernelSpec::try_from(raw)
    }
}

/// Parses `k=v,k=v` into a map.
pub fn parse_params(s: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected NAME=VALUE, got '{item}'")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("'{v}' is not a number")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn parse_tols(items: &[String]) -> Result<BTreeMap<String, f64>> {
    parse_params(&items.join(","))
}

/// Parses `a:b` into the inclusive grid `a..=b`.
pub fn parse_grid(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("grid must be 'a:b' with a <= b, got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

/// `--seed`, else `KERNELREG_SEED`, else [`DEFAULT_SEED`].
pub fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{SEED_ENV}='{v}' is not an integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn write_matrix_csv(path: &Path, grid: &[usize], m: &nalgebra::DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(grid.iter().map(|t| t.to_string()));
    w.write_record(&header)?;
    for (i, t) in grid.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(m.row(i).iter().map(|v| format!("{v:e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>, file: &str, stdout: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(file), text + "\n")?;
        }
        None => writeln!(stdout, "{text}")?,
    }
    Ok(())
}

/// Parses arguments and runs one subcommand; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Sample {
            kernel,
            grid,
            paths,
            seed,
            out,
        } => {
            let seed = resolve_seed(seed)?;
            let spec = kernel.load()?;
            let grid = parse_grid(&grid)?;
            let s = sample_gp(&spec, &grid, paths, seed)?;
            match &out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    s.write_csv(std::fs::File::create(dir.join("samples.csv"))?)?;
                    let meta = json!({"seed": seed, "kernel": spec, "paths": paths, "jitter": s.jitter});
                    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
                }
                None => s.write_csv(&mut *stdout)?,
            }
            let n = grid.len();
            let mut flips = 0usize;
            let mut steps = 0usize;
            for p in 0..paths {
                for j in 1..n {
                    steps += 1;
                    if s.paths[(p, j)] * s.paths[(p, j - 1)] < 0.0 {
                        flips += 1;
                    }
                }
            }
            let rms = if n * paths > 0 {
                (s.paths.iter().map(|v| v * v).sum::<f64>() / (n * paths) as f64).sqrt()
            } else {
                0.0
            };
            writeln!(
                stderr,
                "seed={seed} family={} paths={paths} points={n} rms={rms:.6e} sign_flip_rate={:.4} jitter={:e}",
                spec.family_name(),
                if steps > 0 { flips as f64 / steps as f64 } else { 0.0 },
                s.jitter
            )?;
            Ok(EXIT_OK)
        }
        Command::Eval { kernel, grid, out } => {
            let spec = kernel.load()?;
            let grid = parse_grid(&grid)?;
            let k = gram(&spec, &grid)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    write_matrix_csv(&dir.join("K.csv"), &grid, &k)?;
                }
                None => {
                    let mut w = csv::Writer::from_writer(&mut *stdout);
                    let mut header = vec!["t".to_string()];
                    header.extend(grid.iter().map(|t| t.to_string()));
                    w.write_record(&header)?;
                    for (i, t) in grid.iter().enumerate() {
                        let mut row = vec![t.to_string()];
                        row.extend(k.row(i).iter().map(|v| format!("{v:e}")));
                        w.write_record(&row)?;
                    }
                    w.flush()?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Estimate {
            data,
            family,
            kernel,
            sigma2,
            taps,
            seed,
            out,
        } => {
            let seed = resolve_seed(seed)?;
            if !data.is_file() {
                return Err(Error::InvalidArgument(format!(
                    "data file '{}' not found",
                    data.display()
                )));
            }
            let ds = DataSet::load(&data)?;
            let result = if let Some(path) = kernel {
                let spec = KernelSpec::from_json_str(&std::fs::read_to_string(path)?)?;
                let s2 = sigma2.unwrap_or(1.0);
                let g_hat: Vec<f64> = estimate_impulse(&spec, s2, &ds, taps)?.iter().copied().collect();
                let fit = match &ds.g0 {
                    Some(g0) => Some(fit_metric(g0, &g_hat)?),
                    None => None,
                };
                crate::estimator::EstimationResult {
                    family: spec.family_name().to_string(),
                    theta: spec.hyperparams().to_map(),
                    sigma2: s2,
                    nll: neg_log_marglik(&spec, s2, &ds, taps)?,
                    fit,
                    g_hat,
                    seed,
                }
            } else {
                let name = family.ok_or_else(|| {
                    Error::InvalidArgument("either --family NAME or --kernel FILE is required".into())
                })?;
                let fam = Family::from_name(&name, ds.g0.as_deref())?;
                let cfg = TuneConfig {
                    seed,
                    ..TuneConfig::default()
                };
                estimate(&fam, &ds, taps, &cfg)?
            };
            emit_json(&serde_json::to_value(&result)?, out.as_deref(), "estimate.json", stdout)?;
            if let Some(fit) = result.fit {
                writeln!(stderr, "family={} fit={fit:.2} sigma2={:.4e}", result.family, result.sigma2)?;
            }
            Ok(EXIT_OK)
        }
        Command::Verify {
            seed,
            tol,
            inject_fault,
            out,
        } => {
            let opts = VerifyOptions {
                seed: resolve_seed(seed)?,
                inject_fault,
                tolerances: parse_tols(&tol)?,
                ..VerifyOptions::default()
            };
            let report = run_verification(&opts)?;
            emit_json(&serde_json::to_value(&report)?, out.as_deref(), "verify.json", stdout)?;
            for c in &report.checks {
                writeln!(
                    stderr,
                    "{} {} metric={:e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.check_name,
                    c.metric
                )?;
            }
            Ok(if report.all_pass() { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Command::Inspect {
            kernel,
            grid,
            tol,
            out,
        } => {
            let spec = kernel.load()?;
            let grid = parse_grid(&grid)?;
            if grid.len() > MAX_INSPECT_GRID {
                return Err(Error::InvalidArgument(format!(
                    "inspect grid is limited to {MAX_INSPECT_GRID} points"
                )));
            }
            let tols = parse_tols(&tol)?;
            if let Some(bad) = tols.keys().find(|k| k.as_str() != "band") {
                return Err(Error::InvalidArgument(format!("unknown tolerance '{bad}'")));
            }
            let band_tol = tols.get("band").copied().unwrap_or(BAND_TOL);
            let k = gram(&spec, &grid)?;
            let (kinv, jitter) = spd_inverse(&k, "kernel matrix inverse")?;
            std::fs::create_dir_all(&out)?;
            write_matrix_csv(&out.join("K.csv"), &grid, &k)?;
            write_matrix_csv(&out.join("Kinv.csv"), &grid, &kinv)?;
            let bw = measured_bandwidth(&kinv, band_tol);
            writeln!(
                stdout,
                "{}",
                serde_json::to_string(&json!({
                    "family": spec.family_name(),
                    "grid": [grid[0], grid[grid.len() - 1]],
                    "measured_bandwidth": bw,
                    "tol": band_tol,
                    "jitter": jitter,
                    "dense": bw + 1 >= grid.len(),
                }))?
            )?;
            Ok(EXIT_OK)
        }
        Command::Bench {
            systems,
            families,
            seed,
            jobs,
            out,
        } => {
            let seed = resolve_seed(seed)?;
            let fams: Vec<&str> = families.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            let mut cfg = SuiteConfig::new(systems, &fams, seed);
            cfg.jobs = jobs;
            let result = run_suite(&cfg)?;
            result.write(&out)?;
            for f in &result.summary.families {
                writeln!(
                    stdout,
                    "{:8} mean_fit={} failed={} below_zero={}",
                    f.family,
                    f.mean_fit.map_or("n/a".into(), |m| format!("{m:.2}")),
                    f.n_failed,
                    f.n_below_zero
                )?;
            }
            writeln!(stdout, "seed={seed} outputs in {}", out.display())?;
            Ok(EXIT_OK)
        }
    }
}
