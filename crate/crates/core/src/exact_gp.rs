//! Exact GP regression: the cubic-cost predictive distribution, the log evidence
//! and a derivative-free evidence maximizer used once on the warm-up records.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernel::{rbf_eval, KernelHyperparams};
use crate::osgp::PredictiveGaussian;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Training inputs and targets, `D_t = {X_t, y_t}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingBuffer {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl TrainingBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if x.is_empty() {
            return Err(Error::InvalidParameter("input dimension must be >= 1".into()));
        }
        if let Some(first) = self.inputs.first() {
            check_dim(first.len(), x.len())?;
        }
        if !y.is_finite() {
            return Err(Error::NonFinite("target"));
        }
        self.inputs.push(x);
        self.targets.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

impl<X: Into<Vec<f64>>> FromIterator<(X, f64)> for TrainingBuffer {
    /// Panics on ragged inputs; use [`TrainingBuffer::push`] for validated construction.
    fn from_iter<I: IntoIterator<Item = (X, f64)>>(iter: I) -> Self {
        let mut buffer = TrainingBuffer::new();
        for (x, y) in iter {
            buffer.push(x.into(), y).expect("consistent training inputs");
        }
        buffer
    }
}

/// `K + sigma_n2 I` factorized with escalating diagonal jitter.
fn factorize(buffer: &TrainingBuffer, params: &KernelHyperparams) -> Result<Cholesky<f64, Dyn>> {
    let n = buffer.len();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let k = rbf_eval(&buffer.inputs[i], &buffer.inputs[j], params)?;
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
        gram[(i, i)] += params.sigma_n2;
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        let mut attempt = gram.clone();
        for i in 0..n {
            attempt[(i, i)] += jitter * params.sigma_theta2;
        }
        if let Some(chol) = attempt.cholesky() {
            return Ok(chol);
        }
        jitter *= 10.0;
    }
    Err(Error::Numerical(format!(
        "Gram matrix of {n} points is not positive definite after jitter {JITTER_MAX}"
    )))
}

/// Exact GP predictive at `x` given the buffer.
pub fn gp_predict(
    buffer: &TrainingBuffer,
    params: &KernelHyperparams,
    x: &[f64],
) -> Result<PredictiveGaussian> {
    params.validate()?;
    let prior = rbf_eval(x, x, params)?;
    if buffer.is_empty() {
        return Ok(PredictiveGaussian {
            mean: 0.0,
            variance: prior + params.sigma_n2,
        });
    }
    let k = buffer
        .inputs
        .iter()
        .map(|xi| rbf_eval(xi, x, params))
        .collect::<Result<Vec<f64>>>()?;
    let k = DVector::from_vec(k);
    let chol = factorize(buffer, params)?;
    let y = DVector::from_column_slice(&buffer.targets);
    let mean = k.dot(&chol.solve(&y));
    let reduction = k.dot(&chol.solve(&k));
    let variance = (prior - reduction).clamp(0.0, prior) + params.sigma_n2;
    Ok(PredictiveGaussian { mean, variance })
}

/// `-y'(K + sigma_n2 I)^-1 y / 2 - log|K + sigma_n2 I| / 2 - t log(2 pi) / 2`.
pub fn log_marginal_likelihood(buffer: &TrainingBuffer, params: &KernelHyperparams) -> Result<f64> {
    params.validate()?;
    if buffer.is_empty() {
        return Ok(0.0);
    }
    let chol = factorize(buffer, params)?;
    let y = DVector::from_column_slice(&buffer.targets);
    let fit = y.dot(&chol.solve(&y));
    let half_log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
    let t = buffer.len() as f64;
    Ok(-0.5 * fit - half_log_det - 0.5 * t * (2.0 * std::f64::consts::PI).ln())
}

/// Grid-plus-pattern-search settings for [`fit_hyperparams`].
///
/// Each axis of the grid is `scale * 10^e` for `grid_points` exponents evenly
/// spaced over `[log10_min, log10_max]`. Scales come from the data: the target
/// variance for `sigma_theta2` and `sigma_n2`, the summed per-dimension input
/// variance for `sigma_l2`. The best grid point is then refined by coordinate
/// moves of `initial_step` decades, halving the step `refine_levels` times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub grid_points: usize,
    pub log10_min: f64,
    pub log10_max: f64,
    pub initial_step: f64,
    pub refine_levels: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_points: 7,
            log10_min: -3.0,
            log10_max: 3.0,
            initial_step: 0.5,
            refine_levels: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub params: KernelHyperparams,
    pub log_evidence: f64,
}

#[derive(Debug, Clone)]
pub struct HyperparamFit {
    pub params: KernelHyperparams,
    pub log_evidence: f64,
    /// Every candidate whose evidence was evaluated successfully.
    pub evaluated: Vec<Candidate>,
}

fn variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    values.map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

fn positive_or_one(v: f64) -> f64 {
    if v.is_finite() && v > 0.0 {
        v
    } else {
        1.0
    }
}

/// Maximizes the log evidence over `(sigma_theta2, sigma_l2, sigma_n2)`.
pub fn fit_hyperparams(buffer: &TrainingBuffer, search: &SearchConfig) -> Result<HyperparamFit> {
    let dim = buffer
        .dim()
        .ok_or_else(|| Error::InvalidParameter("cannot fit hyperparameters on an empty buffer".into()))?;
    if search.grid_points == 0 || search.log10_max < search.log10_min {
        return Err(Error::InvalidParameter("empty hyperparameter grid".into()));
    }
    let y_scale = positive_or_one(variance(buffer.targets.iter().copied()));
    let x_scale = positive_or_one(
        (0..dim)
            .map(|j| variance(buffer.inputs.iter().map(move |x| x[j])))
            .sum(),
    );
    let scales = [y_scale, x_scale, y_scale];

    let mut evaluated = Vec::new();
    let mut evaluate = |log10: [f64; 3]| -> Option<Candidate> {
        let params = KernelHyperparams {
            sigma_theta2: scales[0] * 10f64.powf(log10[0]),
            sigma_l2: scales[1] * 10f64.powf(log10[1]),
            sigma_n2: scales[2] * 10f64.powf(log10[2]),
        };
        params.validate().ok()?;
        let log_evidence = log_marginal_likelihood(buffer, &params).ok()?;
        if !log_evidence.is_finite() {
            return None;
        }
        let c = Candidate { params, log_evidence };
        evaluated.push(c);
        Some(c)
    };

    let exponents: Vec<f64> = if search.grid_points == 1 {
        vec![search.log10_min]
    } else {
        let span = search.log10_max - search.log10_min;
        (0..search.grid_points)
            .map(|i| search.log10_min + span * i as f64 / (search.grid_points - 1) as f64)
            .collect()
    };

    let mut best: Option<([f64; 3], Candidate)> = None;
    for &a in &exponents {
        for &b in &exponents {
            for &c in &exponents {
                let point = [a, b, c];
                if let Some(cand) = evaluate(point) {
                    if best.is_none_or(|(_, bc)| cand.log_evidence > bc.log_evidence) {
                        best = Some((point, cand));
                    }
                }
            }
        }
    }
    let (mut point, mut incumbent) = best.ok_or_else(|| {
        Error::Numerical("no grid point produced a finite log evidence".into())
    })?;

    let mut step = search.initial_step;
    for _ in 0..search.refine_levels {
        // bounded sweep count per level; each accepted move strictly improves the evidence
        for _ in 0..100 {
            let mut moved = false;
            for axis in 0..3 {
                for dir in [1.0, -1.0] {
                    let mut trial = point;
                    trial[axis] += dir * step;
                    if let Some(cand) = evaluate(trial) {
                        if cand.log_evidence > incumbent.log_evidence {
                            point = trial;
                            incumbent = cand;
                            moved = true;
                        }
                    }
                }
            }
            if !moved {
                break;
            }
        }
        step *= 0.5;
    }

    Ok(HyperparamFit {
        params: incumbent.params,
        log_evidence: incumbent.log_evidence,
        evaluated,
    })
}
