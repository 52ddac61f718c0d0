//! Time-series benchmark: stream a series, refit the base forecaster each
//! step, sample intermittent label observations, calibrate with the
//! intermittent quantile trackers, and report coverage metrics.

use std::io;
use std::path::Path;

use rand::distributions::Bernoulli;
use rand::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::conformal::{self, ConformalError, GammaSchedule, ObservationEvent, ScalarTracker};
use crate::forecast::{ArModel, ForecastError};
use crate::seeded::named_rng;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("column {column:?} not found in {path} (available: {available:?})")]
    MissingColumn {
        path: String,
        column: String,
        available: Vec<String>,
    },
    #[error("row {row} of {path} has no parseable value in column {column:?}")]
    BadValue {
        path: String,
        column: String,
        row: usize,
    },
    #[error("stream {name:?} too short: {len} < {min} points")]
    StreamTooShort {
        name: String,
        len: usize,
        min: usize,
    },
    #[error("stream {name:?} contains non-finite values")]
    NonFiniteStream { name: String },
    #[error("per-step probabilities ({got}) shorter than stream evaluation range ({needed})")]
    ProbabilitySequenceTooShort { needed: usize, got: usize },
    #[error("warmup {warmup} leaves no evaluation steps for stream of length {len}")]
    WarmupTooLong { warmup: usize, len: usize },
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
}

/// Minimum usable stream length.
pub const MIN_STREAM_LEN: usize = 200;

/// A named univariate series.
#[derive(Debug, Clone)]
pub struct DatasetStream {
    pub name: String,
    pub values: Vec<f64>,
}

/// Bundled generator family backing the CI suite; real datasets are
/// user-supplied CSVs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Mean-reverting first-order recurrence with noise and slow drift.
    Ar1Drift,
    /// Sinusoid plus noise.
    SinusoidNoise,
    /// Piecewise level shifts with heteroscedastic noise.
    RegimeSwitch,
}

impl std::str::FromStr for SyntheticKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ar1-drift" => Ok(Self::Ar1Drift),
            "sinusoid-noise" => Ok(Self::SinusoidNoise),
            "regime-switch" => Ok(Self::RegimeSwitch),
            other => Err(format!(
                "unknown synthetic generator {other:?} (expected ar1-drift, sinusoid-noise or regime-switch)"
            )),
        }
    }
}

impl DatasetStream {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self, BenchError> {
        let stream = Self {
            name: name.into(),
            values,
        };
        stream.validate()?;
        Ok(stream)
    }

    fn validate(&self) -> Result<(), BenchError> {
        if self.values.len() < MIN_STREAM_LEN {
            return Err(BenchError::StreamTooShort {
                name: self.name.clone(),
                len: self.values.len(),
                min: MIN_STREAM_LEN,
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(BenchError::NonFiniteStream {
                name: self.name.clone(),
            });
        }
        Ok(())
    }

    /// Load one numeric column (selected by header name) from a CSV file.
    pub fn from_csv(path: impl AsRef<Path>, column: &str) -> Result<Self, BenchError> {
        let path_str = path.as_ref().display().to_string();
        let mut reader = csv::Reader::from_path(path.as_ref()).map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => BenchError::Io {
                path: path_str.clone(),
                source: io::Error::new(io::ErrorKind::NotFound, e.to_string()),
            },
            _ => BenchError::Csv {
                path: path_str.clone(),
                source: e,
            },
        })?;
        let headers = reader
            .headers()
            .map_err(|e| BenchError::Csv {
                path: path_str.clone(),
                source: e,
            })?
            .clone();
        let idx = headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| BenchError::MissingColumn {
                path: path_str.clone(),
                column: column.to_string(),
                available: headers.iter().map(str::to_string).collect(),
            })?;
        let mut values = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| BenchError::Csv {
                path: path_str.clone(),
                source: e,
            })?;
            let field = record.get(idx).unwrap_or("");
            let value: f64 = field.trim().parse().map_err(|_| BenchError::BadValue {
                path: path_str.clone(),
                column: column.to_string(),
                row: row + 2,
            })?;
            values.push(value);
        }
        let name = path
            .as_ref()
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path_str.clone());
        Self::new(name, values)
    }

    /// Seeded synthetic series.
    pub fn synthetic(kind: SyntheticKind, seed: u64, length: usize) -> Result<Self, BenchError> {
        let mut rng = named_rng(seed, "synthetic-stream");
        let normal = rand_distr::Normal::new(0.0, 1.0).expect("valid normal");
        let mut values = Vec::with_capacity(length);
        match kind {
            SyntheticKind::Ar1Drift => {
                let mut y = 50.0;
                for t in 0..length {
                    y = 1.0 + 0.98 * y + normal.sample(&mut rng);
                    values.push(y + 0.01 * t as f64);
                }
            }
            SyntheticKind::SinusoidNoise => {
                for t in 0..length {
                    let base = 10.0 * (2.0 * std::f64::consts::PI * t as f64 / 100.0).sin();
                    values.push(base + normal.sample(&mut rng));
                }
            }
            SyntheticKind::RegimeSwitch => {
                // Level and noise scale jump together every 250 steps.
                let mut level = 0.0;
                let mut sigma = 2.0;
                for t in 0..length {
                    if t % 250 == 0 {
                        level += rng.gen_range(-40.0..40.0);
                        sigma = rng.gen_range(1.0..6.0);
                    }
                    values.push(level + sigma * normal.sample(&mut rng));
                }
            }
        }
        let name = match kind {
            SyntheticKind::Ar1Drift => "ar1-drift",
            SyntheticKind::SinusoidNoise => "sinusoid-noise",
            SyntheticKind::RegimeSwitch => "regime-switch",
        };
        Self::new(format!("{name}"), values)
    }
}

/// Observation-probability model for a run.
#[derive(Debug, Clone)]
pub enum PMode {
    Constant(f64),
    PerStep(Vec<f64>),
}

impl PMode {
    fn at(&self, eval_index: usize) -> f64 {
        match self {
            PMode::Constant(p) => *p,
            PMode::PerStep(ps) => ps[eval_index],
        }
    }
}

/// Benchmark configuration for one (dataset, variant) combination.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub alpha: f64,
    pub p: PMode,
    pub lr: f64,
    /// true runs the probability-dependent step; false the cancelled one.
    pub p_dependent: bool,
    pub lookback_k: usize,
    /// Initial points reserved for the first forecaster fit.
    pub warmup: usize,
    /// Initial quantile for both interval sides.
    pub q0: f64,
    pub ar_order: usize,
    /// Cap on the refit history length.
    pub fit_window: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            p: PMode::Constant(0.1),
            lr: 1.0,
            p_dependent: true,
            lookback_k: 100,
            warmup: 50,
            q0: 0.0,
            ar_order: 3,
            fit_window: None,
        }
    }
}

/// One evaluated timestep.
#[derive(Debug, Clone, Serialize)]
pub struct BenchStep {
    pub t: usize,
    pub y: f64,
    pub yhat: f64,
    pub lower: f64,
    pub upper: f64,
    pub obs: bool,
    /// Interval miscoverage (either side failed).
    pub err: bool,
    pub err_lo: bool,
    pub err_hi: bool,
    pub p: f64,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
}

/// Full record of one seeded run.
#[derive(Debug, Clone)]
pub struct BenchResult {
    pub seed: u64,
    pub marginal_coverage: f64,
    pub longest_err_run: usize,
    pub mean_interval_size: f64,
    /// Trailing-mean coverage, window 50.
    pub coverage_trace: Vec<f64>,
    /// Interval size per evaluated step.
    pub interval_trace: Vec<f64>,
    pub steps: Vec<BenchStep>,
    pub q0: f64,
}

/// Window used for the coverage moving average.
pub const COVERAGE_TRACE_WINDOW: usize = 50;

/// Trailing mean; entries before a full window average over the available
/// prefix.
pub fn moving_average(trace: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let mut out = Vec::with_capacity(trace.len());
    let mut acc = 0.0;
    for i in 0..trace.len() {
        acc += trace[i];
        if i >= window {
            acc -= trace[i - window];
        }
        let denom = (i + 1).min(window) as f64;
        out.push(acc / denom);
    }
    out
}

/// Length of the longest run of consecutive `true`s.
pub fn longest_error_run(errs: &[bool]) -> usize {
    let mut best = 0;
    let mut current = 0;
    for &e in errs {
        if e {
            current += 1;
            best = best.max(current);
        } else {
            current = 0;
        }
    }
    best
}

/// Run the calibration protocol over one stream with one seed.
///
/// Each evaluated step refits the forecaster on all history up to that
/// point, builds the interval from the lower/upper signed-residual tracker
/// pair, records the oracle miscoverage (the harness always knows the
/// label), then reveals the label to the trackers only when the seeded
/// Bernoulli observation draw fires.
pub fn run_bench(
    stream: &DatasetStream,
    config: &BenchConfig,
    seed: u64,
) -> Result<BenchResult, BenchError> {
    stream.validate()?;
    let n = stream.values.len();
    if config.warmup + config.ar_order + 1 >= n {
        return Err(BenchError::WarmupTooLong {
            warmup: config.warmup,
            len: n,
        });
    }
    let eval_len = n - config.warmup;
    if let PMode::PerStep(ps) = &config.p {
        if ps.len() < eval_len {
            return Err(BenchError::ProbabilitySequenceTooShort {
                needed: eval_len,
                got: ps.len(),
            });
        }
    }

    let schedule = GammaSchedule::lookback(config.lr, config.lookback_k, config.p_dependent)?;
    let mut lo = ScalarTracker::new(config.q0, config.alpha, f64::INFINITY, schedule.clone())?;
    let mut hi = ScalarTracker::new(config.q0, config.alpha, f64::INFINITY, schedule)?;
    let mut rng = named_rng(seed, "bench-obs");

    let mut steps = Vec::with_capacity(eval_len);
    for (i, t) in (config.warmup..n).enumerate() {
        let history = &stream.values[..t];
        let model = ArModel::fit(config.ar_order, history, config.fit_window)?;
        let yhat = model.predict_next(history)?;
        let y = stream.values[t];
        let (lower, upper) = (yhat - lo.q(), yhat + hi.q());
        let (s_lo, s_hi) = conformal::score_signed_residual(yhat, y);
        let err_lo = conformal::coverage_error(s_lo, lo.q());
        let err_hi = conformal::coverage_error(s_hi, hi.q());
        let p = config.p.at(i);
        let obs = rng.sample(Bernoulli::new(p).map_err(|_| {
            BenchError::Conformal(ConformalError::InvalidProbability(p))
        })?);
        let (ev_lo, ev_hi) = if obs {
            (
                ObservationEvent::observed(p, s_lo)?,
                ObservationEvent::observed(p, s_hi)?,
            )
        } else {
            (
                ObservationEvent::unobserved(p)?,
                ObservationEvent::unobserved(p)?,
            )
        };
        let out_lo = lo.iqt_step(&ev_lo);
        let out_hi = hi.iqt_step(&ev_hi);
        steps.push(BenchStep {
            t,
            y,
            yhat,
            lower,
            upper,
            obs,
            err: err_lo || err_hi,
            err_lo,
            err_hi,
            p,
            gamma_lo: out_lo.gamma,
            gamma_hi: out_hi.gamma,
        });
    }

    let errs: Vec<bool> = steps.iter().map(|s| s.err).collect();
    let coverage: Vec<f64> = errs.iter().map(|&e| 1.0 - e as u8 as f64).collect();
    let interval_trace: Vec<f64> = steps.iter().map(|s| s.upper - s.lower).collect();
    let marginal_coverage = coverage.iter().sum::<f64>() / coverage.len() as f64;
    let mean_interval_size = interval_trace.iter().sum::<f64>() / interval_trace.len() as f64;
    Ok(BenchResult {
        seed,
        marginal_coverage,
        longest_err_run: longest_error_run(&errs),
        mean_interval_size,
        coverage_trace: moving_average(&coverage, COVERAGE_TRACE_WINDOW),
        interval_trace,
        steps,
        q0: config.q0,
    })
}

/// Convenience: one result per seed.
pub fn run_bench_seeds(
    stream: &DatasetStream,
    config: &BenchConfig,
    seeds: &[u64],
) -> Result<Vec<BenchResult>, BenchError> {
    seeds.iter().map(|&s| run_bench(stream, config, s)).collect()
}

/// Per-seed metrics plus mean/std aggregates, as serialized into summaries.
#[derive(Debug, Clone, Serialize)]
pub struct BenchStats {
    pub seeds: Vec<u64>,
    pub coverage: Vec<f64>,
    pub longest_err_run: Vec<usize>,
    pub mean_interval_size: Vec<f64>,
    pub coverage_mean: f64,
    pub coverage_std: f64,
    pub interval_mean: f64,
    pub interval_std: f64,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl BenchStats {
    pub fn from_results(results: &[BenchResult]) -> Self {
        let coverage: Vec<f64> = results.iter().map(|r| r.marginal_coverage).collect();
        let sizes: Vec<f64> = results.iter().map(|r| r.mean_interval_size).collect();
        let (coverage_mean, coverage_std) = mean_std(&coverage);
        let (interval_mean, interval_std) = mean_std(&sizes);
        Self {
            seeds: results.iter().map(|r| r.seed).collect(),
            coverage,
            longest_err_run: results.iter().map(|r| r.longest_err_run).collect(),
            mean_interval_size: sizes,
            coverage_mean,
            coverage_std,
            interval_mean,
            interval_std,
        }
    }
}

/// Write the per-step CSV (`t, y, yhat, lower, upper, obs, err`).
pub fn write_run_csv<W: io::Write>(result: &BenchResult, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "y", "yhat", "lower", "upper", "obs", "err"])?;
    for s in &result.steps {
        w.write_record(&[
            s.t.to_string(),
            s.y.to_string(),
            s.yhat.to_string(),
            s.lower.to_string(),
            s.upper.to_string(),
            (s.obs as u8).to_string(),
            (s.err as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
