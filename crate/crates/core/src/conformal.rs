//! Conformity scores, prediction sets and adaptive threshold dynamics.
//!
//! The score is the negative predictive log-likelihood
//! `s(y) = log(2 pi sigma^2) / 2 + (y - mu)^2 / (2 sigma^2)`, clipped into
//! `[0, B]`. Inverting `s(y) <= q` gives the interval
//! `mu +/- sigma * sqrt(2q - log(2 pi sigma^2))`, empty when the radicand is negative.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::osgp::PredictiveGaussian;

pub const DEFAULT_CLIP_BOUND: f64 = 20.0;
pub const DEFAULT_ETA: f64 = 0.05;
pub const DECAY_EXPONENT: f64 = 0.6;
pub const DEFAULT_WINDOW: usize = 15;
pub const DEFAULT_CONSECUTIVE: usize = 100;

/// A closed interval `[center - radius, center + radius]`, possibly empty or unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalSet {
    pub center: f64,
    pub radius: f64,
    pub empty: bool,
}

impl IntervalSet {
    pub fn new(center: f64, radius: f64) -> Self {
        Self {
            center,
            radius: radius.max(0.0),
            empty: false,
        }
    }

    pub fn empty(center: f64) -> Self {
        Self {
            center,
            radius: 0.0,
            empty: true,
        }
    }

    /// The whole real line.
    pub fn full(center: f64) -> Self {
        Self::new(center, f64::INFINITY)
    }

    pub fn contains(&self, y: f64) -> bool {
        !self.empty && (y - self.center).abs() <= self.radius
    }

    /// Lower bound; `+inf` for the empty set so that `lower > upper`.
    pub fn lower(&self) -> f64 {
        if self.empty {
            f64::INFINITY
        } else {
            self.center - self.radius
        }
    }

    /// Upper bound; `-inf` for the empty set.
    pub fn upper(&self) -> f64 {
        if self.empty {
            f64::NEG_INFINITY
        } else {
            self.center + self.radius
        }
    }

    /// Length of the interval, 0 when empty.
    pub fn size(&self) -> f64 {
        if self.empty {
            0.0
        } else {
            2.0 * self.radius
        }
    }
}

fn log_two_pi_var(pred: &PredictiveGaussian) -> f64 {
    (2.0 * std::f64::consts::PI * pred.variance).ln()
}

/// Unclipped negative predictive log-likelihood of `y`.
pub fn nll_score_raw(pred: &PredictiveGaussian, y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::NonFinite("label"));
    }
    if pred.variance.is_nan() || pred.variance <= 0.0 {
        return Err(Error::InvalidParameter("predictive variance must be > 0".into()));
    }
    let r = y - pred.mean;
    Ok(0.5 * log_two_pi_var(pred) + r * r / (2.0 * pred.variance))
}

/// Negative predictive log-likelihood clipped into `[0, clip_bound]`.
pub fn nll_score(pred: &PredictiveGaussian, y: f64, clip_bound: f64) -> Result<f64> {
    if clip_bound.is_nan() || clip_bound <= 0.0 {
        return Err(Error::InvalidParameter("clip bound must be > 0".into()));
    }
    Ok(nll_score_raw(pred, y)?.clamp(0.0, clip_bound))
}

/// `{y : nll_score_raw(y) <= q}`.
pub fn invert_score(pred: &PredictiveGaussian, q: f64) -> IntervalSet {
    if q == f64::INFINITY {
        return IntervalSet::full(pred.mean);
    }
    let radicand = 2.0 * q - log_two_pi_var(pred);
    if radicand.is_nan() || radicand < 0.0 {
        IntervalSet::empty(pred.mean)
    } else {
        IntervalSet::new(pred.mean, pred.std_dev() * radicand.sqrt())
    }
}

/// `{y : nll_score(y, B) <= q}`: empty below 0, everything at or above `B`,
/// otherwise the raw inversion.
pub fn clipped_score_set(pred: &PredictiveGaussian, q: f64, clip_bound: f64) -> IntervalSet {
    if q < 0.0 {
        IntervalSet::empty(pred.mean)
    } else if q >= clip_bound {
        IntervalSet::full(pred.mean)
    } else {
        invert_score(pred, q)
    }
}

/// Standard-normal quantile at `(1 + beta) / 2`.
pub fn credible_multiplier(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("beta must lie in (0, 1), got {beta}")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 * (1.0 + beta)))
}

/// Interval holding Gaussian mass `beta` around the predictive mean.
pub fn bayes_credible_set(pred: &PredictiveGaussian, beta: f64) -> Result<IntervalSet> {
    Ok(IntervalSet::new(pred.mean, credible_multiplier(beta)? * pred.std_dev()))
}

/// Append-only record of online scores with a sorted mirror for order statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreHistory {
    scores: Vec<f64>,
    sorted: Vec<f64>,
}

impl ScoreHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, score: f64) -> Result<()> {
        if score.is_nan() {
            return Err(Error::NonFinite("score"));
        }
        let at = self.sorted.partition_point(|&s| s <= score);
        self.sorted.insert(at, score);
        self.scores.push(score);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// `ceil((1 - alpha)(t + 1))`, tolerant of representation error in `alpha`.
pub fn conformal_rank(t: usize, alpha: f64) -> usize {
    let x = (1.0 - alpha) * (t as f64 + 1.0);
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
        nearest as usize
    } else {
        x.ceil() as usize
    }
}

/// The `ceil((1 - alpha)(t + 1))`-th smallest past score, or `+inf` when that
/// rank exceeds the number of scores.
pub fn standard_cp_quantile(history: &ScoreHistory, alpha: f64) -> f64 {
    let t = history.len();
    let k = conformal_rank(t, alpha);
    if k == 0 {
        f64::NEG_INFINITY
    } else if k > t {
        f64::INFINITY
    } else {
        history.sorted[k - 1]
    }
}

/// `q + eta (1{miss} - alpha)`.
pub fn adaptive_update(q: f64, covered: bool, eta: f64, alpha: f64) -> f64 {
    if covered {
        q - eta * alpha
    } else {
        q + eta * (1.0 - alpha)
    }
}

/// Subgradient of `q -> rho(score - q)` for the pinball loss
/// `rho(u) = (1 - alpha) max(u, 0) + alpha max(-u, 0)`; at the kink the
/// `score <= q` branch is taken.
pub fn quantile_loss_subgradient(score: f64, q: f64, alpha: f64) -> f64 {
    if score > q {
        -(1.0 - alpha)
    } else {
        alpha
    }
}

/// One subgradient-descent step on the pinball loss.
pub fn quantile_loss_step(q: f64, score: f64, eta: f64, alpha: f64) -> f64 {
    q - eta * quantile_loss_subgradient(score, q, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    Constant,
    DecayingWithReset,
}

impl fmt::Display for EtaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EtaMode::Constant => "constant",
            EtaMode::DecayingWithReset => "decaying_with_reset",
        })
    }
}

impl FromStr for EtaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(EtaMode::Constant),
            "decaying" | "decaying_with_reset" | "decaying-with-reset" => Ok(EtaMode::DecayingWithReset),
            other => Err(Error::InvalidParameter(format!("unknown eta mode `{other}`"))),
        }
    }
}

/// Fires when the sliding `window`-slot average of set sizes rises strictly
/// on `consecutive` successive slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangePointDetector {
    window: VecDeque<f64>,
    window_len: usize,
    consecutive: usize,
    prev_avg: Option<f64>,
    increase_count: usize,
}

impl ChangePointDetector {
    pub fn new(window_len: usize, consecutive: usize) -> Result<Self> {
        if window_len == 0 || consecutive == 0 {
            return Err(Error::InvalidParameter(
                "detector window and consecutive count must be >= 1".into(),
            ));
        }
        Ok(Self {
            window: VecDeque::with_capacity(window_len),
            window_len,
            consecutive,
            prev_avg: None,
            increase_count: 0,
        })
    }

    pub fn increase_count(&self) -> usize {
        self.increase_count
    }

    pub fn prev_avg(&self) -> Option<f64> {
        self.prev_avg
    }

    /// Pushes one set size; returns whether a change point fired.
    pub fn step(&mut self, set_size: f64) -> bool {
        if self.window.len() == self.window_len {
            self.window.pop_front();
        }
        self.window.push_back(set_size);
        if self.window.len() < self.window_len {
            return false;
        }
        // summed fresh each slot so comparisons do not accumulate drift
        let avg = self.window.iter().sum::<f64>() / self.window_len as f64;
        let increased = matches!(self.prev_avg, Some(prev) if avg > prev);
        self.prev_avg = Some(avg);
        if !increased {
            self.increase_count = 0;
            return false;
        }
        self.increase_count += 1;
        if self.increase_count >= self.consecutive {
            self.increase_count = 0;
            true
        } else {
            false
        }
    }
}

/// Learning-rate settings of the adaptive threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub alpha: f64,
    pub eta_mode: EtaMode,
    pub eta_const: f64,
    pub window: usize,
    pub consecutive: usize,
    pub clip_bound: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            eta_mode: EtaMode::Constant,
            eta_const: DEFAULT_ETA,
            window: DEFAULT_WINDOW,
            consecutive: DEFAULT_CONSECUTIVE,
            clip_bound: DEFAULT_CLIP_BOUND,
        }
    }
}

/// Per-slot record of the threshold dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveStep {
    pub q_before: f64,
    pub q_after: f64,
    pub eta: f64,
    pub reset_fired: bool,
    pub increase_count: usize,
}

/// Adaptive conformal threshold with its learning-rate schedule and detector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    q: f64,
    local_t: u64,
    config: AdaptiveConfig,
    detector: ChangePointDetector,
}

impl AdaptiveState {
    pub fn new(config: AdaptiveConfig, q0: f64) -> Result<Self> {
        if !(config.alpha > 0.0 && config.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                config.alpha
            )));
        }
        if !(config.clip_bound > 0.0 && config.clip_bound.is_finite()) {
            return Err(Error::InvalidParameter("clip bound must be finite and > 0".into()));
        }
        if !(config.eta_const > 0.0 && config.eta_const.is_finite()) {
            return Err(Error::InvalidParameter("eta must be finite and > 0".into()));
        }
        if !q0.is_finite() {
            return Err(Error::NonFinite("initial threshold"));
        }
        Ok(Self {
            q: q0,
            local_t: 1,
            detector: ChangePointDetector::new(config.window, config.consecutive)?,
            config,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Slots since the start or the last reset, counting the current one.
    pub fn local_t(&self) -> u64 {
        self.local_t
    }

    pub fn config(&self) -> &AdaptiveConfig {
        &self.config
    }

    pub fn detector(&self) -> &ChangePointDetector {
        &self.detector
    }

    /// Learning rate for the current slot: `eta_const`, or `local_t^(-3/5)`.
    pub fn learning_rate(&self) -> f64 {
        match self.config.eta_mode {
            EtaMode::Constant => self.config.eta_const,
            EtaMode::DecayingWithReset => (self.local_t as f64).powf(-DECAY_EXPONENT),
        }
    }

    /// Prediction set for the current threshold.
    pub fn prediction_set(&self, pred: &PredictiveGaussian) -> IntervalSet {
        clipped_score_set(pred, self.q, self.config.clip_bound)
    }

    /// Feeds back whether the label fell in the set, and the set's size.
    /// The detector only runs (and can only reset the schedule) in decaying mode.
    pub fn observe(&mut self, covered: bool, set_size: f64) -> AdaptiveStep {
        let q_before = self.q;
        let eta = self.learning_rate();
        self.q = adaptive_update(self.q, covered, eta, self.config.alpha);
        let reset_fired = match self.config.eta_mode {
            EtaMode::Constant => false,
            EtaMode::DecayingWithReset => self.detector.step(set_size),
        };
        if reset_fired {
            self.local_t = 1;
        } else {
            self.local_t += 1;
        }
        AdaptiveStep {
            q_before,
            q_after: self.q,
            eta,
            reset_fired,
            increase_count: self.detector.increase_count(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pred(mean: f64, variance: f64) -> PredictiveGaussian {
        PredictiveGaussian { mean, variance }
    }

    /// Acklam's rational approximation to the standard-normal quantile
    /// (relative error below 1.2e-9), kept independent of statrs.
    #[allow(clippy::excessive_precision)]
    fn acklam_inverse_normal(p: f64) -> f64 {
        const A: [f64; 6] = [
            -3.969683028665376e+01,
            2.209460984245205e+02,
            -2.759285104469687e+02,
            1.383577518672690e+02,
            -3.066479806614716e+01,
            2.506628277459239e+00,
        ];
        const B: [f64; 5] = [
            -5.447609879822406e+01,
            1.615858368580409e+02,
            -1.556989798598866e+02,
            6.680131188771972e+01,
            -1.328068155288572e+01,
        ];
        const C: [f64; 6] = [
            -7.784894002430293e-03,
            -3.223964580411365e-01,
            -2.400758277161838e+00,
            -2.549732539343734e+00,
            4.374664141464968e+00,
            2.938163982698783e+00,
        ];
        const D: [f64; 4] = [
            7.784695709041462e-03,
            3.224671290700398e-01,
            2.445134137142996e+00,
            3.754408661907416e+00,
        ];
        let p_low = 0.02425;
        if p < p_low {
            let q = (-2.0 * p.ln()).sqrt();
            (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
                / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
        } else if p <= 1.0 - p_low {
            let q = p - 0.5;
            let r = q * q;
            (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
                / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
        } else {
            -acklam_inverse_normal(1.0 - p)
        }
    }

    #[test]
    fn score_zero_at_mean_with_unit_normalizer() {
        let p = pred(1.5, 1.0 / (2.0 * PI));
        assert!(nll_score_raw(&p, 1.5).unwrap().abs() < 1e-15);
    }

    #[test]
    fn score_one_sigma() {
        let p = pred(0.0, 0.25);
        let expected = 0.5 * (2.0 * PI * 0.25).ln() + 0.5;
        assert!((nll_score_raw(&p, 0.5).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn score_clipping() {
        let p = pred(0.0, 0.01);
        assert_eq!(nll_score(&p, 1e6, 20.0).unwrap(), 20.0);
        assert_eq!(nll_score(&p, 0.0, 20.0).unwrap(), 0.0);
        assert!(nll_score(&p, f64::INFINITY, 20.0).is_err());
    }

    #[test]
    fn inversion_edge_cases() {
        let p = pred(2.0, 0.3);
        let half_log = 0.5 * (2.0 * PI * 0.3).ln();
        let point = invert_score(&p, half_log);
        assert!(!point.empty);
        assert!(point.radius.abs() < 1e-7);
        assert!(invert_score(&p, half_log - 1e-6).empty);
        let one_sigma = invert_score(&p, half_log + 0.5);
        assert!((one_sigma.radius - 0.3f64.sqrt()).abs() < 1e-12);
        assert!(invert_score(&p, f64::INFINITY).contains(1e300));
    }

    #[test]
    fn empty_set_encoding() {
        let s = IntervalSet::empty(1.0);
        assert!(!s.contains(1.0));
        assert!(s.lower() > s.upper());
        assert_eq!(s.size(), 0.0);
    }

    #[test]
    fn clipped_set_regimes() {
        let p = pred(0.0, 1.0);
        assert!(clipped_score_set(&p, -0.01, 20.0).empty);
        assert!(clipped_score_set(&p, 20.0, 20.0).radius.is_infinite());
        assert_eq!(clipped_score_set(&p, 3.0, 20.0), invert_score(&p, 3.0));
    }

    #[test]
    fn credible_multipliers() {
        let c95 = credible_multiplier(0.95).unwrap();
        assert!((c95 - 1.959_964).abs() < 1e-6);
        assert!((c95 - acklam_inverse_normal(0.975)).abs() < 1e-8);
        let c90 = credible_multiplier(0.9).unwrap();
        assert!((c90 - 1.644_854).abs() < 1e-6);
        assert!((c90 - acklam_inverse_normal(0.95)).abs() < 1e-8);
        assert!(credible_multiplier(1e-12).unwrap() < 1e-11);
        assert!(credible_multiplier(0.0).is_err());
        assert!(credible_multiplier(1.0).is_err());
    }

    #[test]
    fn credible_radius_strictly_increasing() {
        let p = pred(0.0, 2.0);
        let mut last = -1.0;
        for i in 1..100 {
            let r = bayes_credible_set(&p, i as f64 / 100.0).unwrap().radius;
            assert!(r > last);
            last = r;
        }
    }

    fn brute_quantile(scores: &[f64], alpha_pct: usize) -> f64 {
        let t = scores.len();
        let k = ((100 - alpha_pct) * (t + 1)).div_ceil(100);
        if k > t {
            return f64::INFINITY;
        }
        let mut sorted = scores.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted[k - 1]
    }

    #[test]
    fn standard_quantile_examples() {
        let mut h = ScoreHistory::new();
        assert_eq!(standard_cp_quantile(&h, 0.1), f64::INFINITY);
        for s in [3.0, 1.0, 4.0, 1.5, 9.0] {
            h.push(s).unwrap();
        }
        assert_eq!(standard_cp_quantile(&h, 0.1), f64::INFINITY);
        for s in [2.0, 6.0, 5.0, 3.5] {
            h.push(s).unwrap();
        }
        assert_eq!(standard_cp_quantile(&h, 0.1), 9.0);
        for s in 0..10 {
            h.push(s as f64 * 0.7).unwrap();
        }
        assert_eq!(h.len(), 19);
        assert_eq!(standard_cp_quantile(&h, 0.1), brute_quantile(h.scores(), 10));
        assert_eq!(conformal_rank(19, 0.1), 18);
    }

    #[test]
    fn adaptive_update_examples() {
        assert!((adaptive_update(1.0, true, 0.05, 0.1) - 0.995).abs() < 1e-15);
        assert!((adaptive_update(1.0, false, 0.05, 0.1) - 1.045).abs() < 1e-15);
        assert_eq!(adaptive_update(1.0, true, 0.05, 0.0), 1.0);
    }

    #[test]
    fn learning_rates() {
        let constant = AdaptiveState::new(AdaptiveConfig::default(), 0.0).unwrap();
        assert_eq!(constant.learning_rate(), 0.05);
        let cfg = AdaptiveConfig {
            eta_mode: EtaMode::DecayingWithReset,
            ..AdaptiveConfig::default()
        };
        let mut decaying = AdaptiveState::new(cfg, 0.0).unwrap();
        assert_eq!(decaying.learning_rate(), 1.0);
        for _ in 0..31 {
            decaying.observe(true, 1.0);
        }
        assert_eq!(decaying.local_t(), 32);
        assert!((decaying.learning_rate() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn detector_warm_up_and_constant() {
        let mut d = ChangePointDetector::new(15, 100).unwrap();
        for _ in 0..14 {
            assert!(!d.step(1.0));
        }
        for _ in 0..10_000 {
            assert!(!d.step(1.0));
            assert_eq!(d.increase_count(), 0);
        }
    }

    #[test]
    fn detector_fires_once_on_monotone_run() {
        let (w, r) = (15, 100);
        let mut d = ChangePointDetector::new(w, r).unwrap();
        let fired: Vec<usize> = (1..=w + r)
            .filter(|&slot| d.step(slot as f64))
            .collect();
        assert_eq!(fired, vec![w + r]);
        assert_eq!(d.increase_count(), 0);
    }

    #[test]
    fn detector_counter_resets_on_non_increase() {
        let mut d = ChangePointDetector::new(3, 5).unwrap();
        for s in [1.0, 2.0, 3.0, 4.0, 5.0] {
            d.step(s);
        }
        assert_eq!(d.increase_count(), 2);
        d.step(2.0);
        assert_eq!(d.increase_count(), 0);
    }

    #[test]
    fn reset_restarts_schedule() {
        let cfg = AdaptiveConfig {
            eta_mode: EtaMode::DecayingWithReset,
            window: 2,
            consecutive: 3,
            ..AdaptiveConfig::default()
        };
        let mut st = AdaptiveState::new(cfg, 1.0).unwrap();
        let steps: Vec<AdaptiveStep> = (1..=5).map(|i| st.observe(true, i as f64)).collect();
        assert!(steps[..4].iter().all(|s| !s.reset_fired));
        assert!(steps[4].reset_fired);
        assert_eq!(st.local_t(), 1);
        assert_eq!(st.learning_rate(), 1.0);
    }

    #[test]
    fn constant_mode_never_resets() {
        let cfg = AdaptiveConfig {
            window: 2,
            consecutive: 1,
            ..AdaptiveConfig::default()
        };
        let mut st = AdaptiveState::new(cfg, 1.0).unwrap();
        for i in 0..50 {
            assert!(!st.observe(false, i as f64).reset_fired);
        }
    }

    #[test]
    fn invalid_adaptive_config() {
        let bad = AdaptiveConfig {
            alpha: 1.0,
            ..AdaptiveConfig::default()
        };
        assert!(AdaptiveState::new(bad, 0.0).is_err());
        assert!(AdaptiveState::new(AdaptiveConfig::default(), f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn inversion_agrees_with_threshold_test(
            mean in -10.0f64..10.0,
            variance in 1e-4f64..10.0,
            q in -3.0f64..10.0,
            y in -20.0f64..20.0,
        ) {
            let p = pred(mean, variance);
            let set = invert_score(&p, q);
            let score = nll_score_raw(&p, y).unwrap();
            let tol = 1e-9 * q.abs().max(1.0);
            if (score - q).abs() > tol {
                prop_assert_eq!(set.contains(y), score <= q);
            }
        }

        #[test]
        fn radius_monotone_in_q(variance in 1e-3f64..5.0, q in -1.0f64..5.0, dq in 0.0f64..2.0) {
            let p = pred(0.0, variance);
            let a = invert_score(&p, q);
            let b = invert_score(&p, q + dq);
            if !a.empty {
                prop_assert!(!b.empty && b.radius >= a.radius);
            }
        }

        #[test]
        fn subgradient_step_equals_update(
            q in -5.0f64..25.0,
            s in 0.0f64..20.0,
            eta in 1e-4f64..1.0,
            alpha in 0.01f64..0.5,
        ) {
            prop_assume!(s != q);
            prop_assert_eq!(
                quantile_loss_step(q, s, eta, alpha).to_bits(),
                adaptive_update(q, s <= q, eta, alpha).to_bits()
            );
        }
    }
}
