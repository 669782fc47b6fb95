use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, gen_dataset, gen_system};
use crate::error::{Error, Result};
use crate::estimator::{estimate, Family, TuneConfig, FIR_TAPS};

const SYSTEM_STREAM: u64 = 0x5359_5354;
const DATA_STREAM: u64 = 0x4441_5441;

/// Families whose definitions live outside this crate.
const NOT_IMPLEMENTED: [&str; 1] = ["ssp"];

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub n_systems: usize,
    /// Family names, e.g. `tc`, `dc`, `amls2os`, `amls2od`, `si2od`, `oracle`.
    pub families: Vec<String>,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
    pub tune: TuneConfig,
}

impl SuiteConfig {
    pub fn new(n_systems: usize, families: &[&str], seed: u64) -> Self {
        SuiteConfig {
            n_systems,
            families: families.iter().map(|s| s.to_string()).collect(),
            seed,
            jobs: 0,
            tune: TuneConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialRecord {
    pub system_index: usize,
    pub system_seed: u64,
    pub family: String,
    pub fit: Option<f64>,
    pub nll: Option<f64>,
    pub theta: BTreeMap<String, f64>,
    pub sigma2: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: String,
    pub n_trials: usize,
    pub n_failed: usize,
    pub mean_fit: Option<f64>,
    /// Quantiles over the fits that are not negative.
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
    pub n_below_zero: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub seed: u64,
    pub n_systems: usize,
    pub fir_taps: usize,
    pub noise_variance: String,
    pub not_implemented: Vec<String>,
    pub families: Vec<FamilySummary>,
}

impl SuiteSummary {
    pub fn family(&self, name: &str) -> Option<&FamilySummary> {
        self.families.iter().find(|f| f.family == name)
    }
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub records: Vec<TrialRecord>,
    pub summary: SuiteSummary,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(family: &str, records: &[TrialRecord]) -> FamilySummary {
    let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.family == family).collect();
    let fits: Vec<f64> = mine.iter().filter_map(|r| r.fit).collect();
    let mut shown: Vec<f64> = fits.iter().copied().filter(|f| *f >= 0.0).collect();
    shown.sort_by(f64::total_cmp);
    let q = |p: f64| (!shown.is_empty()).then(|| quantile(&shown, p));
    FamilySummary {
        family: family.to_string(),
        n_trials: mine.len(),
        n_failed: mine.iter().filter(|r| r.failed()).count(),
        mean_fit: (!fits.is_empty()).then(|| fits.iter().sum::<f64>() / fits.len() as f64),
        min: q(0.0),
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: q(1.0),
        n_below_zero: fits.iter().filter(|f| **f < 0.0).count(),
    }
}

fn family_tag(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn run_trial(cfg: &SuiteConfig, index: usize, family: &str) -> TrialRecord {
    let start = Instant::now();
    let system_seed = derive_seed(cfg.seed, index as u64, SYSTEM_STREAM);
    let mut record = TrialRecord {
        system_index: index,
        system_seed,
        family: family.to_string(),
        fit: None,
        nll: None,
        theta: BTreeMap::new(),
        sigma2: None,
        wall_time_s: 0.0,
        error: None,
    };
    let outcome = (|| {
        let sys = gen_system(system_seed);
        let data = gen_dataset(&sys, derive_seed(cfg.seed, index as u64, DATA_STREAM))?;
        let fam = Family::from_name(family, Some(&sys.g0))?;
        let tune = TuneConfig {
            seed: derive_seed(cfg.seed, index as u64, family_tag(family)),
            ..cfg.tune.clone()
        };
        estimate(&fam, &data, FIR_TAPS, &tune)
    })();
    match outcome {
        Ok(r) => {
            record.fit = r.fit;
            record.nll = Some(r.nll);
            record.theta = r.theta;
            record.sigma2 = Some(r.sigma2);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record.wall_time_s = start.elapsed().as_secs_f64();
    record
}

/// Generates the systems and data sets, tunes and scores every family on
/// each, and aggregates the fits. Trial failures are recorded, not raised.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteResult> {
    if cfg.n_systems == 0 {
        return Err(Error::InvalidArgument("n_systems must be >= 1".into()));
    }
    for f in &cfg.families {
        if NOT_IMPLEMENTED.contains(&f.to_ascii_lowercase().as_str()) {
            return Err(Error::Unsupported(format!("kernel family '{f}' is not implemented")));
        }
        if f != "oracle" {
            Family::from_name(f, None)?;
        }
    }
    let jobs: Vec<(usize, &str)> = (0..cfg.n_systems)
        .flat_map(|i| cfg.families.iter().map(move |f| (i, f.as_str())))
        .collect();
    let run = || -> Vec<TrialRecord> {
        jobs.par_iter()
            .map(|&(i, f)| run_trial(cfg, i, f))
            .collect()
    };
    let records = if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run)
    } else {
        run()
    };
    let families = cfg.families.iter().map(|f| summarize(f, &records)).collect();
    Ok(SuiteResult {
        summary: SuiteSummary {
            seed: cfg.seed,
            n_systems: cfg.n_systems,
            fir_taps: FIR_TAPS,
            noise_variance: "tuned jointly with the kernel hyperparameters".into(),
            not_implemented: NOT_IMPLEMENTED.iter().map(|s| s.to_string()).collect(),
            families,
        },
        records,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl SuiteResult {
    /// Writes `trials.csv`, `summary.json` and `boxplot.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("trials.csv"))?;
        w.write_record([
            "system_index",
            "system_seed",
            "family",
            "fit",
            "nll",
            "sigma2",
            "theta",
            "wall_time_s",
            "error",
        ])?;
        for r in &self.records {
            let theta = r
                .theta
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";");
            w.write_record(&[
                r.system_index.to_string(),
                r.system_seed.to_string(),
                r.family.clone(),
                opt(r.fit),
                opt(r.nll),
                opt(r.sigma2),
                theta,
                format!("{:.3}", r.wall_time_s),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;

        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&self.summary)?,
        )?;

        let mut w = csv::Writer::from_path(dir.join("boxplot.csv"))?;
        w.write_record(["family", "min", "q1", "median", "q3", "max", "n_below_zero", "mean_fit"])?;
        for f in &self.summary.families {
            w.write_record(&[
                f.family.clone(),
                opt(f.min),
                opt(f.q1),
                opt(f.median),
                opt(f.q3),
                opt(f.max),
                f.n_below_zero.to_string(),
                opt(f.mean_fit),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
