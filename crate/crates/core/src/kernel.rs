//! RBF kernel, spectral sampling of random frequencies and the random-feature map.
//!
//! The kernel convention is `k(x, x') = sigma_theta2 * exp(-|x - x'|^2 / sigma_l2)`,
//! with no factor 1/2 in the exponent. Its normalized spectral density is
//! Gaussian: matching `E[exp(j v'r)] = exp(-r' S r / 2)` to `exp(-|r|^2 / sigma_l2)`
//! gives `S = (2 / sigma_l2) I`.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{SeededStream, StreamPurpose};

/// Magnitude, squared lengthscale and noise variance of the RBF kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelHyperparams {
    pub sigma_theta2: f64,
    pub sigma_l2: f64,
    pub sigma_n2: f64,
}

impl KernelHyperparams {
    pub fn new(sigma_theta2: f64, sigma_l2: f64, sigma_n2: f64) -> Result<Self> {
        let params = Self {
            sigma_theta2,
            sigma_l2,
            sigma_n2,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("sigma_theta2", self.sigma_theta2),
            ("sigma_l2", self.sigma_l2),
            ("sigma_n2", self.sigma_n2),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and strictly positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

fn squared_distance(x: &[f64], x_prime: &[f64]) -> f64 {
    x.iter()
        .zip(x_prime)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// `sigma_theta2 * exp(-|x - x'|^2 / sigma_l2)`.
pub fn rbf_eval(x: &[f64], x_prime: &[f64], params: &KernelHyperparams) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidParameter("input dimension must be >= 1".into()));
    }
    check_dim(x.len(), x_prime.len())?;
    Ok(params.sigma_theta2 * (-squared_distance(x, x_prime) / params.sigma_l2).exp())
}

/// Sampled spectral frequencies defining a random-feature map.
///
/// Row `i` of `frequencies` is `v_i`. Rows are drawn in order, each component
/// in column order, from the `Frequencies` stream of `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfMap {
    frequencies: DMatrix<f64>,
    seed: u64,
}

/// Draws `num_features` frequency vectors `v_i ~ N(0, (2 / sigma_l2) I_dim)`.
pub fn sample_frequencies(
    params: &KernelHyperparams,
    dim: usize,
    num_features: usize,
    seed: u64,
) -> Result<RfMap> {
    params.validate()?;
    if num_features == 0 {
        return Err(Error::InvalidParameter("number of features must be >= 1".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidParameter("input dimension must be >= 1".into()));
    }
    let scale = (2.0 / params.sigma_l2).sqrt();
    let mut stream = SeededStream::new(seed, StreamPurpose::Frequencies);
    let mut values = Vec::with_capacity(num_features * dim);
    for _ in 0..num_features * dim {
        values.push(scale * stream.standard_normal());
    }
    Ok(RfMap {
        frequencies: DMatrix::from_row_slice(num_features, dim, &values),
        seed,
    })
}

impl RfMap {
    /// Builds a map from explicit row-major frequencies.
    pub fn from_row_major(num_features: usize, dim: usize, seed: u64, values: &[f64]) -> Result<Self> {
        if num_features == 0 || dim == 0 {
            return Err(Error::InvalidParameter(
                "feature count and dimension must be >= 1".into(),
            ));
        }
        check_dim(num_features * dim, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("frequency"));
        }
        Ok(Self {
            frequencies: DMatrix::from_row_slice(num_features, dim, values),
            seed,
        })
    }

    pub fn num_features(&self) -> usize {
        self.frequencies.nrows()
    }

    /// Length of the feature vector, `2 * num_features`.
    pub fn feature_len(&self) -> usize {
        2 * self.num_features()
    }

    pub fn dim(&self) -> usize {
        self.frequencies.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn frequencies(&self) -> &DMatrix<f64> {
        &self.frequencies
    }

    pub fn row_major(&self) -> Vec<f64> {
        self.frequencies.transpose().as_slice().to_vec()
    }

    /// `phi(x) = [sin(v_1'x), cos(v_1'x), ..., sin(v_D'x), cos(v_D'x)] / sqrt(D)`.
    pub fn feature_map(&self, x: &[f64]) -> Result<FeatureVector> {
        check_dim(self.dim(), x.len())?;
        let d = self.num_features();
        let norm = 1.0 / (d as f64).sqrt();
        let mut values = DVector::zeros(2 * d);
        for i in 0..d {
            let proj: f64 = self
                .frequencies
                .row(i)
                .iter()
                .zip(x)
                .map(|(v, xi)| v * xi)
                .sum();
            let (s, c) = proj.sin_cos();
            values[2 * i] = s * norm;
            values[2 * i + 1] = c * norm;
        }
        Ok(FeatureVector(values))
    }

    /// Writes the CSV sidecar: a `num_features,dim,seed` header line, its values,
    /// then one line per frequency row.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        out.push_str("num_features,dim,seed\n");
        out.push_str(&format!("{},{},{}\n", self.num_features(), self.dim(), self.seed));
        for row in self.frequencies.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        let lines: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(path, e))?;
        if lines.len() < 2 {
            return Err(Error::EmptyFile(path.to_path_buf()));
        }
        let malformed = |row: usize, message: &str| Error::MalformedRow {
            path: path.to_path_buf(),
            row,
            message: message.to_string(),
        };
        let meta: Vec<&str> = lines[1].split(',').map(str::trim).collect();
        if meta.len() != 3 {
            return Err(malformed(2, "expected num_features,dim,seed"));
        }
        let num_features: usize = meta[0].parse().map_err(|_| malformed(2, "bad num_features"))?;
        let dim: usize = meta[1].parse().map_err(|_| malformed(2, "bad dim"))?;
        let seed: u64 = meta[2].parse().map_err(|_| malformed(2, "bad seed"))?;
        let mut values = Vec::with_capacity(num_features * dim);
        for (i, line) in lines.iter().enumerate().skip(2) {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != dim {
                return Err(malformed(i + 1, "wrong number of frequency components"));
            }
            for cell in cells {
                let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumeric {
                    path: path.to_path_buf(),
                    row: i + 1,
                    column: "frequency".into(),
                    value: cell.to_string(),
                })?;
                values.push(v);
            }
        }
        Self::from_row_major(num_features, dim, seed, &values)
    }
}

/// A `2D`-length random-feature vector of unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(DVector<f64>);

impl FeatureVector {
    pub fn from_values(values: DVector<f64>) -> Self {
        Self(values)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        self.0.dot(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{SeededStream, StreamPurpose};
    use proptest::prelude::*;

    fn unit() -> KernelHyperparams {
        KernelHyperparams::new(1.0, 1.0, 0.01).unwrap()
    }

    #[test]
    fn rbf_zero_distance_is_magnitude() {
        let p = KernelHyperparams::new(2.5, 0.3, 0.1).unwrap();
        assert_eq!(rbf_eval(&[1.0, -2.0], &[1.0, -2.0], &p).unwrap(), 2.5);
    }

    #[test]
    fn rbf_unit_distance() {
        let v = rbf_eval(&[0.0], &[1.0], &unit()).unwrap();
        assert!((v - 0.367_879_441_171_442_3).abs() < 1e-15);
    }

    #[test]
    fn rbf_vanishes_with_distance() {
        let p = KernelHyperparams::new(2.0, 1.0, 0.1).unwrap();
        let mut last = f64::INFINITY;
        for r in [0.0, 1.0, 2.0, 5.0, 10.0, 50.0] {
            let v = rbf_eval(&[0.0], &[r], &p).unwrap();
            assert!(v <= last);
            last = v;
        }
        assert_eq!(last, 0.0);
    }

    #[test]
    fn rbf_dimension_mismatch() {
        assert!(matches!(
            rbf_eval(&[0.0, 1.0], &[1.0], &unit()),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn invalid_hyperparams_rejected() {
        assert!(KernelHyperparams::new(0.0, 1.0, 1.0).is_err());
        assert!(KernelHyperparams::new(1.0, -1.0, 1.0).is_err());
        assert!(KernelHyperparams::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn sample_shape_and_determinism() {
        let a = sample_frequencies(&unit(), 3, 200, 9).unwrap();
        assert_eq!(a.num_features(), 200);
        assert_eq!(a.dim(), 3);
        assert_eq!(a.feature_len(), 400);
        let b = sample_frequencies(&unit(), 3, 200, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_frequencies(&unit(), 3, 200, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_features_rejected() {
        assert!(sample_frequencies(&unit(), 1, 0, 1).is_err());
    }

    #[test]
    fn frequency_variance_matches_spectral_density() {
        let n = 100_000;
        let map = sample_frequencies(&unit(), 1, n, 2024).unwrap();
        let col: Vec<f64> = map.frequencies().column(0).iter().copied().collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // standard error of a sample variance of N(0, 2): 2 * sqrt(2 / (n - 1))
        let se = 2.0 * (2.0 / (n - 1) as f64).sqrt();
        assert!((var - 2.0).abs() <= 3.0 * se, "var {var}, se {se}");
    }

    #[test]
    fn feature_map_at_origin() {
        let map = sample_frequencies(&unit(), 2, 5, 1).unwrap();
        let phi = map.feature_map(&[0.0, 0.0]).unwrap();
        let c = 1.0 / 5f64.sqrt();
        for i in 0..5 {
            assert_eq!(phi.as_slice()[2 * i], 0.0);
            assert!((phi.as_slice()[2 * i + 1] - c).abs() < 1e-15);
        }
    }

    #[test]
    fn feature_map_dimension_mismatch() {
        let map = sample_frequencies(&unit(), 2, 5, 1).unwrap();
        assert!(map.feature_map(&[1.0]).is_err());
    }

    fn random_pairs(n: usize, dim: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut s = SeededStream::new(seed, StreamPurpose::Data);
        (0..n)
            .map(|_| {
                let a = (0..dim).map(|_| s.uniform()).collect();
                let b = (0..dim).map(|_| s.uniform()).collect();
                (a, b)
            })
            .collect()
    }

    fn mean_kernel_error(map: &RfMap, pairs: &[(Vec<f64>, Vec<f64>)], params: &KernelHyperparams) -> f64 {
        let total: f64 = pairs
            .iter()
            .map(|(a, b)| {
                let approx = map.feature_map(a).unwrap().dot(&map.feature_map(b).unwrap());
                (approx - rbf_eval(a, b, params).unwrap()).abs()
            })
            .sum();
        total / pairs.len() as f64
    }

    #[test]
    fn kernel_approximation_within_tolerance() {
        let params = unit();
        let map = sample_frequencies(&params, 2, 2000, 5).unwrap();
        let err = mean_kernel_error(&map, &random_pairs(100, 2, 77), &params);
        assert!(err <= 0.05, "mean abs error {err}");
    }

    #[test]
    fn kernel_approximation_improves_with_features() {
        let params = unit();
        let pairs = random_pairs(200, 2, 31);
        let errs: Vec<f64> = [50, 500, 5000]
            .iter()
            .map(|&d| mean_kernel_error(&sample_frequencies(&params, 2, d, 8).unwrap(), &pairs, &params))
            .collect();
        assert!(errs[0] >= errs[1] && errs[1] >= errs[2], "{errs:?}");
    }

    #[test]
    fn sidecar_round_trip() {
        let map = sample_frequencies(&unit(), 3, 17, 99).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rf.csv");
        map.write_csv(&path).unwrap();
        assert_eq!(RfMap::read_csv(&path).unwrap(), map);
    }

    proptest! {
        #[test]
        fn feature_norm_is_one(x in proptest::collection::vec(-50.0f64..50.0, 3), seed in 0u64..1000) {
            let map = sample_frequencies(&unit(), 3, 64, seed).unwrap();
            let phi = map.feature_map(&x).unwrap();
            prop_assert!((phi.dot(&phi) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn feature_inner_product_bounded(
            x in proptest::collection::vec(-10.0f64..10.0, 2),
            y in proptest::collection::vec(-10.0f64..10.0, 2),
        ) {
            let map = sample_frequencies(&unit(), 2, 32, 4).unwrap();
            let ip = map.feature_map(&x).unwrap().dot(&map.feature_map(&y).unwrap());
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ip));
        }
    }
}
