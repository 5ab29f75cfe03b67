//! Online scalable GP: a Gaussian posterior over the random-feature weights,
//! updated one observation at a time with a rank-1 downdate.
//!
//! Per-slot cost is `O((2D)^2)` and the state never grows with the number of
//! observations.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernel::{FeatureVector, KernelHyperparams, RfMap};

/// Gaussian predictive distribution for a single label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveGaussian {
    pub mean: f64,
    pub variance: f64,
}

impl PredictiveGaussian {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Posterior `N(theta_hat, sigma)` over the `2D` feature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    theta_hat: DVector<f64>,
    sigma: DMatrix<f64>,
    t: u64,
}

impl PosteriorState {
    /// Prior `theta ~ N(0, sigma_theta2 I_{2D})`.
    pub fn new(params: &KernelHyperparams, num_features: usize) -> Result<Self> {
        params.validate()?;
        if num_features == 0 {
            return Err(Error::InvalidParameter("number of features must be >= 1".into()));
        }
        let n = 2 * num_features;
        Ok(Self {
            theta_hat: DVector::zeros(n),
            sigma: DMatrix::from_diagonal_element(n, n, params.sigma_theta2),
            t: 0,
        })
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Number of observations absorbed so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn num_features(&self) -> usize {
        self.theta_hat.len() / 2
    }

    /// `mean = phi' theta_hat`, `variance = phi' Sigma phi + sigma_n2`.
    pub fn predict(&self, phi: &FeatureVector, sigma_n2: f64) -> Result<PredictiveGaussian> {
        check_dim(self.theta_hat.len(), phi.len())?;
        let phi = phi.as_vector();
        let sigma_phi = &self.sigma * phi;
        Ok(PredictiveGaussian {
            mean: phi.dot(&self.theta_hat),
            variance: floored_variance(phi.dot(&sigma_phi), sigma_n2),
        })
    }

    /// Absorbs one labelled observation.
    pub fn update(&mut self, phi: &FeatureVector, y: f64, sigma_n2: f64) -> Result<()> {
        check_dim(self.theta_hat.len(), phi.len())?;
        if !y.is_finite() {
            return Err(Error::NonFinite("label"));
        }
        let phi = phi.as_vector();
        let sigma_phi = &self.sigma * phi;
        let variance = floored_variance(phi.dot(&sigma_phi), sigma_n2);
        let residual = y - phi.dot(&self.theta_hat);

        self.theta_hat.axpy(residual / variance, &sigma_phi, 1.0);
        self.sigma.ger(-1.0 / variance, &sigma_phi, &sigma_phi, 1.0);
        symmetrize(&mut self.sigma);
        self.t += 1;
        Ok(())
    }

    pub fn snapshot(&self, rf: &RfMap) -> Result<StateSnapshot> {
        check_dim(self.theta_hat.len(), rf.feature_len())?;
        Ok(StateSnapshot {
            num_features: rf.num_features(),
            seed: rf.seed(),
            t: self.t,
            theta_hat: self.theta_hat.as_slice().to_vec(),
            sigma: self.sigma.transpose().as_slice().to_vec(),
        })
    }
}

// Round-off can push phi' Sigma phi to (or below) zero once Sigma has shrunk;
// the predictive variance must stay strictly above the noise floor.
fn floored_variance(quad: f64, sigma_n2: f64) -> f64 {
    let variance = quad + sigma_n2;
    if variance > sigma_n2 {
        variance
    } else {
        sigma_n2 * (1.0 + 1e-12)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Serializable checkpoint of a posterior together with the feature map it belongs to.
/// `sigma` is stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub num_features: usize,
    pub seed: u64,
    pub t: u64,
    pub theta_hat: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl StateSnapshot {
    pub fn restore(&self) -> Result<PosteriorState> {
        let n = 2 * self.num_features;
        check_dim(n, self.theta_hat.len())?;
        check_dim(n * n, self.sigma.len())?;
        Ok(PosteriorState {
            theta_hat: DVector::from_column_slice(&self.theta_hat),
            sigma: DMatrix::from_row_slice(n, n, &self.sigma),
            t: self.t,
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}
