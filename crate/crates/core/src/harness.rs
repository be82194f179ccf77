//! Experiment configuration, multi-seed orchestration and output files.
//!
//! Output layout of a run directory:
//!
//! ```text
//! run_pd_powers_<seed>.csv   per-seed metrics rows
//! run_random_<seed>.csv
//! aggregate_pd_powers.csv    per-episode mean and 95% half-width across seeds
//! aggregate_random.csv
//! summary.txt
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::environment::{build_benchmark_instance, build_tiny_instance, BenchmarkParams, RngStream};
use crate::error::{CmdpError, Result};
use crate::learner::{run_pd_powers, run_random_baseline, CheckCounts, DualVariant, LearnerConfig};
use crate::metrics::{fmt_f64, MetricsSeries};
use crate::model::{validate_instance, CmdpInstance, ValidationReport};
use crate::oracle::{constrained_comparator, ComparatorResult};

pub const ALGO_PD_POWERS: &str = "pd_powers";
pub const ALGO_RANDOM: &str = "random";
/// Normal quantile used for the 95% bands.
pub const Z_95: f64 = 1.96;
/// Bisection tolerance of the regret comparator.
pub const COMPARATOR_TOL: f64 = 1e-8;
/// Random value vectors drawn when validating the instance.
pub const VALIDATION_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSpec {
    Benchmark(BenchmarkParams),
    Tiny,
}

impl InstanceSpec {
    pub fn build(&self) -> Result<CmdpInstance> {
        match self {
            InstanceSpec::Benchmark(p) => build_benchmark_instance(p),
            InstanceSpec::Tiny => Ok(build_tiny_instance()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub instance: InstanceSpec,
    pub seeds: Vec<u64>,
    pub learner: LearnerConfig,
    /// Use the clipped dual update; `None` gamma means "take the oracle's Slater margin".
    pub clipped_dual: Option<Option<f64>>,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub seed_offset: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    instance: Option<String>,
    #[serde(rename = "K")]
    episodes: Option<i64>,
    #[serde(rename = "H")]
    horizon: Option<i64>,
    d: Option<i64>,
    b: Option<f64>,
    block_length: Option<i64>,
    p0: Option<f64>,
    slope: Option<f64>,
    reward_scale: Option<f64>,
    theta_scale: Option<f64>,
    seeds: Option<Vec<i64>>,
    alpha: Option<f64>,
    eta: Option<f64>,
    theta_mix: Option<f64>,
    lambda: Option<f64>,
    delta: Option<f64>,
    #[serde(rename = "B")]
    param_bound: Option<f64>,
    dual: Option<String>,
    gamma: Option<f64>,
    diagnostics: Option<bool>,
    out: Option<String>,
    workers: Option<i64>,
}

fn range_err(key: &str, reason: impl std::fmt::Display) -> CmdpError {
    CmdpError::Config(format!("`{key}` out of range: {reason}"))
}

fn positive_int(key: &str, v: Option<i64>, default: usize) -> Result<usize> {
    match v {
        None => Ok(default),
        Some(x) if x >= 1 => Ok(x as usize),
        Some(x) => Err(range_err(key, format!("{x} (must be >= 1)"))),
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    /// Parses `key = value` lines (TOML syntax, `#` comments). Missing keys
    /// fall back to the benchmark constants and theorem step sizes.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| line_of(text, s.start));
            CmdpError::Config(format!("line {line}: {}", e.message()))
        })?;

        let episodes = positive_int("K", raw.episodes, 2000)?;
        let kind = raw.instance.as_deref().unwrap_or("benchmark");
        let instance = match kind {
            "benchmark" => {
                let mut p = BenchmarkParams::default();
                p.horizon = positive_int("H", raw.horizon, p.horizon)?;
                p.dim = positive_int("d", raw.d, p.dim)?;
                p.block_length = positive_int("block_length", raw.block_length, p.block_length)?;
                p.threshold = raw.b.unwrap_or(p.threshold);
                p.p0 = raw.p0.unwrap_or(p.p0);
                p.slope = raw.slope.unwrap_or(p.slope);
                p.reward_scale = raw.reward_scale.unwrap_or(p.reward_scale);
                p.theta_scale = raw.theta_scale.unwrap_or(p.theta_scale);
                p.param_bound = raw.param_bound.unwrap_or(p.param_bound);
                if !(0.0..=p.horizon as f64).contains(&p.threshold) {
                    return Err(range_err("b", format!("{} (must lie in [0, H])", p.threshold)));
                }
                p.validate().map_err(|e| match e {
                    CmdpError::InvalidParameter { name, reason } => range_err(name, reason),
                    other => other,
                })?;
                InstanceSpec::Benchmark(p)
            }
            "tiny" => {
                let fixed = [
                    ("H", raw.horizon.is_some()),
                    ("d", raw.d.is_some()),
                    ("b", raw.b.is_some()),
                    ("block_length", raw.block_length.is_some()),
                    ("p0", raw.p0.is_some()),
                    ("slope", raw.slope.is_some()),
                    ("reward_scale", raw.reward_scale.is_some()),
                    ("theta_scale", raw.theta_scale.is_some()),
                ];
                if let Some((key, _)) = fixed.iter().find(|(_, set)| *set) {
                    return Err(CmdpError::Config(format!("`{key}` cannot be set for the tiny instance")));
                }
                InstanceSpec::Tiny
            }
            other => return Err(CmdpError::Config(format!("unknown instance `{other}`"))),
        };
        let (horizon, bound) = match &instance {
            InstanceSpec::Benchmark(p) => (p.horizon, p.param_bound),
            InstanceSpec::Tiny => (3, raw.param_bound.unwrap_or(2.0)),
        };
        if !(bound > 0.0) {
            return Err(range_err("B", format!("{bound} (must be positive)")));
        }

        let mut learner = LearnerConfig::theorem_defaults(horizon, episodes, bound);
        learner.alpha = raw.alpha.unwrap_or(learner.alpha);
        learner.eta = raw.eta.unwrap_or(learner.eta);
        learner.theta_mix = raw.theta_mix.unwrap_or(learner.theta_mix);
        learner.lambda = raw.lambda.unwrap_or(learner.lambda);
        learner.delta = raw.delta.unwrap_or(learner.delta);
        learner.diagnostics = raw.diagnostics.unwrap_or(true);
        learner.validate().map_err(|e| match e {
            CmdpError::InvalidParameter { name, reason } => range_err(name, reason),
            other => other,
        })?;

        let clipped_dual = match raw.dual.as_deref().unwrap_or("regularized") {
            "regularized" => {
                if raw.gamma.is_some() {
                    return Err(CmdpError::Config("`gamma` only applies to dual = \"clipped\"".into()));
                }
                None
            }
            "clipped" => {
                if let Some(g) = raw.gamma {
                    if !(g > 0.0) {
                        return Err(range_err("gamma", format!("{g} (must be positive)")));
                    }
                }
                Some(raw.gamma)
            }
            other => return Err(CmdpError::Config(format!("unknown dual variant `{other}`"))),
        };

        let seeds: Vec<u64> = match raw.seeds {
            None => (1..=5).collect(),
            Some(s) if s.is_empty() => return Err(range_err("seeds", "list must be nonempty")),
            Some(s) => s
                .into_iter()
                .map(|x| u64::try_from(x).map_err(|_| range_err("seeds", format!("{x} is negative"))))
                .collect::<Result<_>>()?,
        };
        let workers = positive_int("workers", raw.workers, seeds.len())?;

        Ok(Self {
            instance,
            seeds,
            learner,
            clipped_dual,
            out_dir: PathBuf::from(raw.out.unwrap_or_else(|| "out".into())),
            workers,
            seed_offset: 0,
        })
    }

    pub fn effective_seeds(&self) -> Vec<u64> {
        self.seeds.iter().map(|s| s.wrapping_add(self.seed_offset)).collect()
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CmdpError::Io {
        path: path.display().to_string(),
        source,
    })?;
    RunConfig::parse(&text)
}

/// Instance, its validation report and the regret comparator for a config.
pub struct Prepared {
    pub instance: CmdpInstance,
    pub report: ValidationReport,
    pub comparator: ComparatorResult,
    pub learner: LearnerConfig,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let instance = cfg.instance.build()?;
    let report = validate_instance(&instance, VALIDATION_SAMPLES, &mut ChaCha8Rng::seed_from_u64(0));
    if !report.passed() {
        return Err(CmdpError::InvalidInstance(report.failures.join("; ")));
    }
    let avg = instance.averaged_reward(cfg.learner.episodes);
    let comparator = constrained_comparator(&instance, &avg, COMPARATOR_TOL)?;
    let mut learner = cfg.learner.clone();
    if let Some(gamma) = cfg.clipped_dual {
        learner.dual = DualVariant::Clipped {
            gamma: gamma.unwrap_or(comparator.gamma),
        };
    }
    Ok(Prepared {
        instance,
        report,
        comparator,
        learner,
    })
}

/// Results of one seed.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub pd_powers: MetricsSeries,
    pub random: MetricsSeries,
    pub checks: CheckCounts,
    pub min_variance_slack: f64,
}

/// Per-episode mean and half-width across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub k: usize,
    pub regret_mean: f64,
    pub regret_hw: f64,
    pub violation_mean: f64,
    pub violation_hw: f64,
    pub y_mean: f64,
    pub y_hw: f64,
}

pub const AGGREGATE_COLUMNS: [&str; 7] = [
    "k",
    "regret_mean",
    "regret_hw",
    "violation_mean",
    "violation_hw",
    "y_mean",
    "y_hw",
];

/// Mean and `1.96 * s / sqrt(n)`; the half-width is 0 for a single sample.
pub fn mean_and_half_width(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z_95 * var.sqrt() / n.sqrt())
}

pub fn aggregate(runs: &[&MetricsSeries]) -> Result<Vec<AggregateRow>> {
    let Some(first) = runs.first() else {
        return Err(CmdpError::Config("nothing to aggregate".into()));
    };
    if runs.iter().any(|r| r.len() != first.len()) {
        return Err(CmdpError::Config("runs have different lengths".into()));
    }
    Ok((0..first.len())
        .map(|i| {
            let col = |f: fn(&crate::metrics::EpisodeRow) -> f64| -> Vec<f64> { runs.iter().map(|r| f(&r.rows[i])).collect() };
            let (regret_mean, regret_hw) = mean_and_half_width(&col(|r| r.regret));
            let (violation_mean, violation_hw) = mean_and_half_width(&col(|r| r.violation));
            let (y_mean, y_hw) = mean_and_half_width(&col(|r| r.y));
            AggregateRow {
                k: first.rows[i].k,
                regret_mean,
                regret_hw,
                violation_mean,
                violation_hw,
                y_mean,
                y_hw,
            }
        })
        .collect())
}

pub fn aggregate_to_csv(rows: &[AggregateRow]) -> String {
    let mut out = AGGREGATE_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            fmt_f64(r.regret_mean),
            fmt_f64(r.regret_hw),
            fmt_f64(r.violation_mean),
            fmt_f64(r.violation_hw),
            fmt_f64(r.y_mean),
            fmt_f64(r.y_hw)
        );
    }
    out
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CmdpError::Io {
        path: name.clone(),
        source,
    })?;
    let err = |line: usize, reason: String| CmdpError::Csv {
        path: name.clone(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == AGGREGATE_COLUMNS.join(",") => {}
        _ => return Err(err(1, "unexpected header".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != AGGREGATE_COLUMNS.len() {
            return Err(err(i + 1, format!("expected {} fields", AGGREGATE_COLUMNS.len())));
        }
        let num = |j: usize| f[j].parse::<f64>().map_err(|e| err(i + 1, format!("{}: {e}", AGGREGATE_COLUMNS[j])));
        rows.push(AggregateRow {
            k: f[0].parse().map_err(|e| err(i + 1, format!("k: {e}")))?,
            regret_mean: num(1)?,
            regret_hw: num(2)?,
            violation_mean: num(3)?,
            violation_hw: num(4)?,
            y_mean: num(5)?,
            y_hw: num(6)?,
        });
    }
    Ok(rows)
}

/// Everything a finished experiment produced.
pub struct ExperimentOutput {
    pub prepared: Prepared,
    pub seeds: Vec<SeedResult>,
    pub aggregate_pd_powers: Vec<AggregateRow>,
    pub aggregate_random: Vec<AggregateRow>,
    pub summary: String,
}

fn run_seed(prep: &Prepared, seed: u64) -> Result<SeedResult> {
    let rng = RngStream::new(seed);
    let out = run_pd_powers(&prep.instance, &prep.learner, &rng, &prep.comparator)?;
    let random = run_random_baseline(&prep.instance, prep.learner.episodes, &rng, &prep.comparator)?;
    Ok(SeedResult {
        seed,
        pd_powers: out.series,
        random,
        checks: out.state.checks,
        min_variance_slack: out.state.min_variance_slack,
    })
}

/// Runs every seed on `workers` threads; results come back in seed order.
pub fn run_seeds(prep: &Prepared, seeds: &[u64], workers: usize) -> Result<Vec<SeedResult>> {
    let workers = workers.clamp(1, seeds.len().max(1));
    let mut slots: Vec<Option<Result<SeedResult>>> = (0..seeds.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    (w..seeds.len())
                        .step_by(workers)
                        .map(|i| (i, run_seed(prep, seeds[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for handle in handles {
            for (i, res) in handle.join().expect("worker thread panicked") {
                slots[i] = Some(res);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every seed ran")).collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CmdpError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Runs all seeds and writes CSVs plus `summary.txt` into `cfg.out_dir`.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentOutput> {
    let prepared = prepare(cfg)?;
    let seeds = cfg.effective_seeds();
    let results = run_seeds(&prepared, &seeds, cfg.workers)?;

    let agg_pd = aggregate(&results.iter().map(|r| &r.pd_powers).collect::<Vec<_>>())?;
    let agg_rand = aggregate(&results.iter().map(|r| &r.random).collect::<Vec<_>>())?;
    let summary = summarize(&prepared, &results, &agg_pd, &agg_rand);

    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir).map_err(|source| CmdpError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for r in &results {
        write_file(&dir.join(format!("run_{ALGO_PD_POWERS}_{}.csv", r.seed)), &r.pd_powers.to_csv())?;
        write_file(&dir.join(format!("run_{ALGO_RANDOM}_{}.csv", r.seed)), &r.random.to_csv())?;
    }
    write_file(&dir.join(format!("aggregate_{ALGO_PD_POWERS}.csv")), &aggregate_to_csv(&agg_pd))?;
    write_file(&dir.join(format!("aggregate_{ALGO_RANDOM}.csv")), &aggregate_to_csv(&agg_rand))?;
    write_file(&dir.join("summary.txt"), &summary)?;

    Ok(ExperimentOutput {
        prepared,
        seeds: results,
        aggregate_pd_powers: agg_pd,
        aggregate_random: agg_rand,
        summary,
    })
}

fn summarize(prep: &Prepared, results: &[SeedResult], agg_pd: &[AggregateRow], agg_rand: &[AggregateRow]) -> String {
    let mut s = String::new();
    let cfg = &prep.learner;
    let comp = &prep.comparator;
    let _ = writeln!(s, "episodes            {}", cfg.episodes);
    let _ = writeln!(s, "seeds               {:?}", results.iter().map(|r| r.seed).collect::<Vec<_>>());
    let _ = writeln!(
        s,
        "alpha {} eta {} theta_mix {} lambda {} delta {} B {}",
        fmt_f64(cfg.alpha),
        fmt_f64(cfg.eta),
        fmt_f64(cfg.theta_mix),
        fmt_f64(cfg.lambda),
        fmt_f64(cfg.delta),
        fmt_f64(cfg.param_bound)
    );
    let _ = writeln!(s, "dual                {:?}", cfg.dual);
    let _ = writeln!(s, "slater_margin       {}", fmt_f64(comp.gamma));
    let _ = writeln!(
        s,
        "comparator          V^r {} V^g {} lambda* {} mix {}",
        fmt_f64(comp.value_r),
        fmt_f64(comp.value_g),
        fmt_f64(comp.lambda_star),
        fmt_f64(comp.mix_weight)
    );
    for (name, agg) in [(ALGO_PD_POWERS, agg_pd), (ALGO_RANDOM, agg_rand)] {
        if let Some(last) = agg.last() {
            let _ = writeln!(
                s,
                "{name:<10} final regret {} +- {}  violation {} +- {}",
                fmt_f64(last.regret_mean),
                fmt_f64(last.regret_hw),
                fmt_f64(last.violation_mean),
                fmt_f64(last.violation_hw)
            );
        }
    }
    let mut total = CheckCounts::default();
    for r in results {
        total.add(&r.checks);
        let _ = writeln!(
            s,
            "seed {:<6} optimism r {} g {} min variance slack {}",
            r.seed,
            fmt_f64(r.pd_powers.optimism_fraction(0)),
            fmt_f64(r.pd_powers.optimism_fraction(1)),
            fmt_f64(r.min_variance_slack)
        );
    }
    let _ = writeln!(
        s,
        "checks passed       variance {} q_range {} simplex {} floor {} dual {} omd {} sigma {} (total {})",
        total.variance_bound,
        total.q_range,
        total.simplex,
        total.mixing_floor,
        total.dual_bound,
        total.omd_step,
        total.sigma_floor,
        total.total()
    );
    s
}
