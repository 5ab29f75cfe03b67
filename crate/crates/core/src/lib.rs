//! Online random-feature Gaussian process regression with conformal prediction
//! intervals whose threshold adapts to coverage feedback.
//!
//! The pipeline per slot: map the input through [`kernel::RfMap`], predict with
//! the recursive posterior in [`osgp`], build a Bayes credible set, a standard
//! conformal set and an adaptive conformal set from the same predictive
//! Gaussian ([`conformal`]), then observe the label and update everything.
//! [`bench`] drives whole experiments and reads/writes traces.

pub mod bench;
pub mod conformal;
pub mod error;
pub mod exact_gp;
pub mod kernel;
pub mod osgp;
pub mod rng;
pub mod stream;

pub use error::{Error, Result};
pub use kernel::{rbf_eval, sample_frequencies, FeatureVector, KernelHyperparams, RfMap};
pub use osgp::{PosteriorState, PredictiveGaussian, StateSnapshot};
