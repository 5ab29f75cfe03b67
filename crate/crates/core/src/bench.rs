//! Experiment driver: warm-up fit, the online loop running the Bayes credible
//! set, standard CP and the adaptive conformal set side by side, and trace I/O.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::conformal::{
    bayes_credible_set, invert_score, nll_score_raw, standard_cp_quantile, AdaptiveConfig, AdaptiveState,
    EtaMode, IntervalSet, ScoreHistory, DEFAULT_CLIP_BOUND, DEFAULT_CONSECUTIVE, DEFAULT_ETA,
    DEFAULT_WINDOW,
};
use crate::error::{Error, Result};
use crate::exact_gp::{fit_hyperparams, SearchConfig, TrainingBuffer};
use crate::kernel::{sample_frequencies, FeatureVector, KernelHyperparams, RfMap};
use crate::osgp::{PosteriorState, PredictiveGaussian};
use crate::stream::{gen_iid, gen_shift, load_csv, CsvSchema, StreamRecord};

/// Column order of the trace CSV.
pub const TRACE_HEADER: [&str; 18] = [
    "t", "y_true", "bayes_lo", "bayes_hi", "bayes_cov", "bayes_size", "scp_lo", "scp_hi", "scp_cov",
    "scp_size", "acp_lo", "acp_hi", "acp_cov", "acp_size", "acp_empty", "q_t", "eta_t", "reset",
];

/// Running-coverage band used for the synthetic i.i.d. and post-shift checks.
pub const COVERAGE_BAND: (f64, f64) = (0.88, 0.92);
/// Slots within which the shift stream's change point should be detected.
pub const DETECTION_WINDOW: (usize, usize) = (5000, 5200);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dataset {
    Iid {
        samples: usize,
    },
    Shift {
        samples: usize,
    },
    Csv {
        path: PathBuf,
        feature_columns: Vec<String>,
        target_column: String,
        delimiter: char,
    },
}

impl Dataset {
    pub fn csv(path: impl Into<PathBuf>) -> Self {
        let schema = CsvSchema::default();
        Dataset::Csv {
            path: path.into(),
            feature_columns: schema.feature_columns,
            target_column: schema.target_column,
            delimiter: ',',
        }
    }

    pub fn load(&self, seed: u64) -> Result<Vec<StreamRecord>> {
        match self {
            Dataset::Iid { samples } => Ok(gen_iid(*samples, seed).collect()),
            Dataset::Shift { samples } => Ok(gen_shift(*samples, seed).collect()),
            Dataset::Csv {
                path,
                feature_columns,
                target_column,
                delimiter,
            } => {
                if !delimiter.is_ascii() {
                    return Err(Error::InvalidParameter("CSV delimiter must be ASCII".into()));
                }
                let schema = CsvSchema {
                    feature_columns: feature_columns.clone(),
                    target_column: target_column.clone(),
                    delimiter: *delimiter as u8,
                };
                load_csv(path, &schema)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: Dataset,
    pub alpha: f64,
    pub num_features: usize,
    pub warmup: usize,
    pub eta_mode: EtaMode,
    pub eta_const: f64,
    pub window: usize,
    pub consecutive: usize,
    pub clip_bound: f64,
    pub seed_features: u64,
    pub seed_data: u64,
    pub search: SearchConfig,
    /// Skips the warm-up fit when set; required when `warmup` is 0.
    pub hyperparams: Option<KernelHyperparams>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: Dataset::Iid { samples: 10_000 },
            alpha: 0.1,
            num_features: 200,
            warmup: 100,
            eta_mode: EtaMode::Constant,
            eta_const: DEFAULT_ETA,
            window: DEFAULT_WINDOW,
            consecutive: DEFAULT_CONSECUTIVE,
            clip_bound: DEFAULT_CLIP_BOUND,
            seed_features: 0,
            seed_data: 0,
            search: SearchConfig::default(),
            hyperparams: None,
        }
    }
}

impl ExperimentConfig {
    pub fn adaptive(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            alpha: self.alpha,
            eta_mode: self.eta_mode,
            eta_const: self.eta_const,
            window: self.window,
            consecutive: self.consecutive,
            clip_bound: self.clip_bound,
        }
    }

    fn validate(&self, stream_len: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.num_features == 0 {
            return Err(Error::InvalidParameter("number of features must be >= 1".into()));
        }
        if self.warmup >= stream_len {
            return Err(Error::InvalidParameter(format!(
                "warm-up ({}) must be shorter than the stream ({stream_len})",
                self.warmup
            )));
        }
        if self.warmup == 0 && self.hyperparams.is_none() {
            return Err(Error::InvalidParameter(
                "warm-up of 0 requires explicit hyperparameters".into(),
            ));
        }
        Ok(())
    }
}

/// One prediction-set outcome for a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodOutcome {
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
    pub size: f64,
}

impl MethodOutcome {
    fn from_set(set: &IntervalSet, y: f64) -> Self {
        Self {
            lower: set.lower(),
            upper: set.upper(),
            covered: set.contains(y),
            size: set.size(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub y_true: f64,
    pub bayes: MethodOutcome,
    pub standard_cp: MethodOutcome,
    pub osgpcp: MethodOutcome,
    pub acp_empty: bool,
    pub q_t: f64,
    pub eta_t: f64,
    pub reset: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bayes,
    StandardCp,
    Osgpcp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Bayes, Method::StandardCp, Method::Osgpcp];

    pub fn outcome<'a>(&self, row: &'a TraceRow) -> &'a MethodOutcome {
        match self {
            Method::Bayes => &row.bayes,
            Method::StandardCp => &row.standard_cp,
            Method::Osgpcp => &row.osgpcp,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bayes => "bayes",
            Method::StandardCp => "standard_cp",
            Method::Osgpcp => "osgpcp",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bayes" => Ok(Method::Bayes),
            "standard_cp" | "scp" => Ok(Method::StandardCp),
            "osgpcp" | "acp" => Ok(Method::Osgpcp),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// All three sets for one slot, built from a single predictive distribution
/// before the label is seen.
#[derive(Debug, Clone)]
pub struct SlotSets {
    pub pred: PredictiveGaussian,
    pub bayes: IntervalSet,
    pub standard_cp: IntervalSet,
    pub osgpcp: IntervalSet,
    pub q: f64,
    phi: FeatureVector,
}

/// The sequential state of an experiment after warm-up.
#[derive(Debug, Clone)]
pub struct OnlineRunner {
    params: KernelHyperparams,
    rf: RfMap,
    posterior: PosteriorState,
    history: ScoreHistory,
    adaptive: AdaptiveState,
}

impl OnlineRunner {
    /// Replays the warm-up records through the online model, scoring each one
    /// before absorbing it, and seeds the adaptive threshold with their
    /// standard-CP quantile clamped into `[0, B]` (`B / 2` when there is none).
    ///
    /// The history keeps raw scores: clamping them at 0 would pin the standard-CP
    /// quantile to 0 whenever more than `1 - alpha` of the scores are negative.
    pub fn start(
        params: KernelHyperparams,
        rf: RfMap,
        adaptive: AdaptiveConfig,
        warmup: &[StreamRecord],
    ) -> Result<Self> {
        let mut posterior = PosteriorState::new(&params, rf.num_features())?;
        let mut history = ScoreHistory::new();
        for record in warmup {
            let phi = rf.feature_map(&record.x).map_err(|e| e.at_slot(record.t))?;
            let pred = posterior.predict(&phi, params.sigma_n2)?;
            let score = nll_score_raw(&pred, record.y).map_err(|e| e.at_slot(record.t))?;
            history.push(score)?;
            posterior.update(&phi, record.y, params.sigma_n2)?;
        }
        let quantile = standard_cp_quantile(&history, adaptive.alpha);
        let q0 = if quantile.is_finite() {
            quantile.clamp(0.0, adaptive.clip_bound)
        } else {
            adaptive.clip_bound / 2.0
        };
        Ok(Self {
            params,
            rf,
            posterior,
            history,
            adaptive: AdaptiveState::new(adaptive, q0)?,
        })
    }

    pub fn params(&self) -> &KernelHyperparams {
        &self.params
    }

    pub fn rf(&self) -> &RfMap {
        &self.rf
    }

    pub fn posterior(&self) -> &PosteriorState {
        &self.posterior
    }

    pub fn adaptive(&self) -> &AdaptiveState {
        &self.adaptive
    }

    pub fn history(&self) -> &ScoreHistory {
        &self.history
    }

    pub fn predict(&self, x: &[f64]) -> Result<SlotSets> {
        let phi = self.rf.feature_map(x)?;
        let pred = self.posterior.predict(&phi, self.params.sigma_n2)?;
        let alpha = self.adaptive.config().alpha;
        Ok(SlotSets {
            pred,
            bayes: bayes_credible_set(&pred, 1.0 - alpha)?,
            standard_cp: invert_score(&pred, standard_cp_quantile(&self.history, alpha)),
            osgpcp: self.adaptive.prediction_set(&pred),
            q: self.adaptive.q(),
            phi,
        })
    }

    /// Consumes the label for a slot whose sets were built by [`Self::predict`].
    pub fn observe(&mut self, t: usize, sets: SlotSets, y: f64) -> Result<TraceRow> {
        let score = nll_score_raw(&sets.pred, y)?;
        let osgpcp = MethodOutcome::from_set(&sets.osgpcp, y);
        let step = self.adaptive.observe(osgpcp.covered, osgpcp.size);
        self.history.push(score)?;
        self.posterior.update(&sets.phi, y, self.params.sigma_n2)?;
        Ok(TraceRow {
            t,
            y_true: y,
            bayes: MethodOutcome::from_set(&sets.bayes, y),
            standard_cp: MethodOutcome::from_set(&sets.standard_cp, y),
            osgpcp,
            acp_empty: sets.osgpcp.empty,
            q_t: sets.q,
            eta_t: step.eta,
            reset: step.reset_fired,
        })
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub hyperparams: KernelHyperparams,
    /// Exact-GP log evidence of the fitted hyperparameters, if they were fitted.
    pub log_evidence: Option<f64>,
    pub q0: f64,
    pub rows: Vec<TraceRow>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun> {
    let records = config.dataset.load(config.seed_data)?;
    run_on_records(config, &records)
}

/// Runs the two-phase protocol on an already materialized stream.
pub fn run_on_records(config: &ExperimentConfig, records: &[StreamRecord]) -> Result<ExperimentRun> {
    config.validate(records.len())?;
    let (warmup, online) = records.split_at(config.warmup);

    let (hyperparams, log_evidence) = match config.hyperparams {
        Some(p) => {
            p.validate()?;
            (p, None)
        }
        None => {
            let mut buffer = TrainingBuffer::new();
            for r in warmup {
                buffer.push(r.x.clone(), r.y).map_err(|e| e.at_slot(r.t))?;
            }
            let fit = fit_hyperparams(&buffer, &config.search)?;
            (fit.params, Some(fit.log_evidence))
        }
    };
    let dim = records[0].x.len();
    let rf = sample_frequencies(&hyperparams, dim, config.num_features, config.seed_features)?;
    let mut runner = OnlineRunner::start(hyperparams, rf, config.adaptive(), warmup)?;
    let q0 = runner.adaptive().q();

    let mut rows = Vec::with_capacity(online.len());
    for record in online {
        let sets = runner.predict(&record.x).map_err(|e| e.at_slot(record.t))?;
        let row = runner
            .observe(record.t, sets, record.y)
            .map_err(|e| e.at_slot(record.t))?;
        rows.push(row);
    }
    Ok(ExperimentRun {
        config: config.clone(),
        hyperparams,
        log_evidence,
        q0,
        rows,
    })
}

/// Prefix means of the coverage flags of `method`.
pub fn running_coverage(rows: &[TraceRow], method: &str) -> Result<Vec<f64>> {
    let method: Method = method.parse()?;
    Ok(running_coverage_of(rows, method))
}

pub fn running_coverage_of(rows: &[TraceRow], method: Method) -> Vec<f64> {
    let mut hits = 0usize;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            hits += usize::from(method.outcome(row).covered);
            hits as f64 / (i + 1) as f64
        })
        .collect()
}

/// Coverage of `method` over slots `first..=last`; `None` if no row falls in range.
pub fn coverage_between(rows: &[TraceRow], method: Method, first: usize, last: usize) -> Option<f64> {
    let selected: Vec<bool> = rows
        .iter()
        .filter(|r| r.t >= first && r.t <= last)
        .map(|r| method.outcome(r).covered)
        .collect();
    if selected.is_empty() {
        None
    } else {
        Some(selected.iter().filter(|&&c| c).count() as f64 / selected.len() as f64)
    }
}

pub fn reset_slots(rows: &[TraceRow]) -> Vec<usize> {
    rows.iter().filter(|r| r.reset).map(|r| r.t).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub final_coverage: f64,
    /// Mean over slots with a finite set size.
    pub mean_size: f64,
    pub unbounded_sets: usize,
}

pub fn summarize(rows: &[TraceRow]) -> Vec<MethodSummary> {
    Method::ALL
        .iter()
        .map(|&method| {
            let final_coverage = running_coverage_of(rows, method).last().copied().unwrap_or(f64::NAN);
            let sizes: Vec<f64> = rows
                .iter()
                .map(|r| method.outcome(r).size)
                .filter(|s| s.is_finite())
                .collect();
            let mean_size = if sizes.is_empty() {
                f64::NAN
            } else {
                sizes.iter().sum::<f64>() / sizes.len() as f64
            };
            MethodSummary {
                method,
                final_coverage,
                mean_size,
                unbounded_sets: rows.len() - sizes.len(),
            }
        })
        .collect()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Writes the trace CSV (header per [`TRACE_HEADER`], one row per slot).
pub fn write_trace(rows: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", TRACE_HEADER.join(",")).map_err(io)?;
    for r in rows {
        let mut line = format!("{},{}", r.t, r.y_true);
        for m in [&r.bayes, &r.standard_cp, &r.osgpcp] {
            line.push_str(&format!(",{},{},{},{}", m.lower, m.upper, flag(m.covered), m.size));
        }
        line.push_str(&format!(",{},{},{},{}", flag(r.acp_empty), r.q_t, r.eta_t, flag(r.reset)));
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::EmptyFile(path.to_path_buf()))?;
    let columns: Vec<&str> = header.split(',').collect();
    for name in TRACE_HEADER {
        if !columns.contains(&name) {
            return Err(Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            });
        }
    }
    if columns != TRACE_HEADER {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            row: 0,
            message: "trace columns are out of order".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != TRACE_HEADER.len() {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                row: row_no,
                message: format!("expected {} cells, found {}", TRACE_HEADER.len(), cells.len()),
            });
        }
        let num = |idx: usize| -> Result<f64> {
            cells[idx].trim().parse::<f64>().map_err(|_| Error::NonNumeric {
                path: path.to_path_buf(),
                row: row_no,
                column: TRACE_HEADER[idx].to_string(),
                value: cells[idx].to_string(),
            })
        };
        let boolean = |idx: usize| -> Result<bool> {
            match cells[idx].trim() {
                "1" | "true" => Ok(true),
                "0" | "false" => Ok(false),
                other => Err(Error::NonNumeric {
                    path: path.to_path_buf(),
                    row: row_no,
                    column: TRACE_HEADER[idx].to_string(),
                    value: other.to_string(),
                }),
            }
        };
        let method = |base: usize| -> Result<MethodOutcome> {
            Ok(MethodOutcome {
                lower: num(base)?,
                upper: num(base + 1)?,
                covered: boolean(base + 2)?,
                size: num(base + 3)?,
            })
        };
        let t = cells[0].trim().parse::<usize>().map_err(|_| Error::NonNumeric {
            path: path.to_path_buf(),
            row: row_no,
            column: "t".into(),
            value: cells[0].to_string(),
        })?;
        rows.push(TraceRow {
            t,
            y_true: num(1)?,
            bayes: method(2)?,
            standard_cp: method(6)?,
            osgpcp: method(10)?,
            acp_empty: boolean(14)?,
            q_t: num(15)?,
            eta_t: num(16)?,
            reset: boolean(17)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub config: ExperimentConfig,
    pub hyperparams: KernelHyperparams,
    pub log_evidence: Option<f64>,
    pub hyperparam_source: String,
    pub q0: f64,
    pub rows: usize,
    pub first_slot: Option<usize>,
    pub coverage_excludes_warmup: bool,
    pub coverage_band: (f64, f64),
    pub detection_window: (usize, usize),
    pub reset_slots: Vec<usize>,
}

impl ExperimentRun {
    pub fn sidecar(&self) -> Sidecar {
        let hyperparam_source = match self.log_evidence {
            Some(_) => format!(
                "exact GP log evidence maximized on the first {} records, then frozen",
                self.config.warmup
            ),
            None => "supplied by the caller".to_string(),
        };
        Sidecar {
            config: self.config.clone(),
            hyperparams: self.hyperparams,
            log_evidence: self.log_evidence,
            hyperparam_source,
            q0: self.q0,
            rows: self.rows.len(),
            first_slot: self.rows.first().map(|r| r.t),
            coverage_excludes_warmup: true,
            coverage_band: COVERAGE_BAND,
            detection_window: DETECTION_WINDOW,
            reset_slots: reset_slots(&self.rows),
        }
    }

    /// Writes the trace CSV at `path` and the JSON sidecar next to it; returns the sidecar path.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<PathBuf> {
        let path = path.as_ref();
        write_trace(&self.rows, path)?;
        let sidecar_path = sidecar_path(path);
        let text = serde_json::to_string_pretty(&self.sidecar()).map_err(|source| Error::Json {
            path: sidecar_path.clone(),
            source,
        })?;
        fs::write(&sidecar_path, text).map_err(|e| Error::io(&sidecar_path, e))?;
        Ok(sidecar_path)
    }
}

/// `trace.csv` -> `trace.json`.
pub fn sidecar_path(trace: &Path) -> PathBuf {
    trace.with_extension("json")
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Sidecar> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
