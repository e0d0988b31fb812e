//! Stationary Gaussian noise synthesis.
//!
//! Every path owns one ChaCha8 stream: the generator is seeded from the
//! master seed and `set_stream(path index)` selects the path. Paths are
//! generated in parallel but collected in index order, so the output does
//! not depend on the schedule.

use std::sync::Arc;

use gle_core::laplace::spectral_density_grid;
use gle_core::{AcfSeries, ShapeEvaluator};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{LabError, Result};

/// Eigenvalues below −CLAMP·max are rejected; smaller negatives become 0.
pub const EMBEDDING_CLAMP: f64 = 1e-8;

/// Largest circulant size tried, in multiples of the path length.
const MAX_EMBEDDING_FACTOR: usize = 8;

/// Stream offset used for per-path initial values.
pub const INITIAL_VALUE_STREAM: u64 = 1 << 32;

pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone)]
pub enum NoiseTarget {
    /// Covariance c(jh) = variance·values[j].
    Acf(AcfSeries),
    /// Dimensionful spectral density of a complex-capable shape.
    Spectrum(ShapeEvaluator),
    /// Independent samples with this variance.
    White { variance: f64 },
}

#[derive(Debug, Clone)]
pub struct NoiseRequest {
    pub target: NoiseTarget,
    pub n_steps: usize,
    pub h: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl NoiseRequest {
    fn validate(&self) -> Result<()> {
        if !self.n_steps.is_power_of_two() || self.n_steps < 2 {
            return Err(LabError::Input(format!(
                "n_steps = {} is not a power of two",
                self.n_steps
            )));
        }
        if self.n_paths == 0 {
            return Err(LabError::Input("n_paths must be at least 1".into()));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(LabError::Input(format!(
                "step h = {} must be positive",
                self.h
            )));
        }
        if let NoiseTarget::Acf(acf) = &self.target {
            if (acf.step - self.h).abs() > 1e-12 * self.h {
                return Err(LabError::Input(format!(
                    "target step {} differs from h = {}",
                    acf.step, self.h
                )));
            }
        }
        Ok(())
    }
}

/// Paths sampled at a common step, with the seed they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub h: f64,
    pub seed: u64,
    pub paths: Vec<Vec<f64>>,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn n_samples(&self) -> usize {
        self.paths.first().map_or(0, Vec::len)
    }

    /// Same lineage, new values.
    pub fn with_paths(&self, paths: Vec<Vec<f64>>) -> Self {
        Self {
            h: self.h,
            seed: self.seed,
            paths,
        }
    }
}

pub fn generate_colored(request: &NoiseRequest) -> Result<PathEnsemble> {
    request.validate()?;
    let n = request.n_steps;
    let paths = match &request.target {
        NoiseTarget::White { variance } => {
            if !(*variance >= 0.0) {
                return Err(LabError::Input(format!(
                    "white-noise variance {variance} is negative"
                )));
            }
            let sd = variance.sqrt();
            (0..request.n_paths)
                .into_par_iter()
                .map(|i| {
                    let mut rng = path_rng(request.seed, i as u64);
                    (0..n)
                        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect()
        }
        NoiseTarget::Acf(acf) => {
            let embedding = embed_acf(acf, n)?;
            embedding.sample(request.seed, request.n_paths, n)
        }
        NoiseTarget::Spectrum(shape) => {
            let embedding = embed_spectrum(shape, n, request.h)?;
            embedding.sample(request.seed, request.n_paths, n)
        }
    };
    Ok(PathEnsemble {
        h: request.h,
        seed: request.seed,
        paths,
    })
}

/// Independent N(0, h) increments.
pub fn generate_wiener_increments(
    n_steps: usize,
    h: f64,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(LabError::Input(format!("step h = {h} must be positive")));
    }
    if n_paths == 0 {
        return Err(LabError::Input("n_paths must be at least 1".into()));
    }
    let sd = h.sqrt();
    let paths = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            (0..n_steps)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    Ok(PathEnsemble { h, seed, paths })
}

/// One N(0, variance) draw per path from the initial-value streams.
pub fn initial_values(n_paths: usize, variance: f64, seed: u64) -> Vec<f64> {
    let sd = variance.max(0.0).sqrt();
    (0..n_paths)
        .map(|i| {
            sd * path_rng(seed, INITIAL_VALUE_STREAM + i as u64).sample::<f64, _>(StandardNormal)
        })
        .collect()
}

/// Square roots of circulant eigenvalues, scaled for direct use.
struct Embedding {
    weights: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Embedding {
    fn new(eigen: Vec<f64>, planner: &mut FftPlanner<f64>) -> Self {
        let m = eigen.len();
        let weights = eigen.iter().map(|l| (l / m as f64).sqrt()).collect();
        Self {
            weights,
            fft: planner.plan_fft_forward(m),
        }
    }

    fn sample(&self, seed: u64, n_paths: usize, n: usize) -> Vec<Vec<f64>> {
        (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(seed, i as u64);
                let mut buf: Vec<Complex64> = self
                    .weights
                    .iter()
                    .map(|w| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(w * re, w * im)
                    })
                    .collect();
                self.fft.process(&mut buf);
                buf[..n].iter().map(|z| z.re).collect()
            })
            .collect()
    }
}

/// Eigenvalues of the circulant built from covariances c_0..c_{m/2}.
fn circulant_eigenvalues(cov: &[f64], m: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let half = m / 2;
    let mut row: Vec<Complex64> = (0..m)
        .map(|j| {
            let lag = if j <= half { j } else { m - j };
            Complex64::new(cov.get(lag).copied().unwrap_or(0.0), 0.0)
        })
        .collect();
    planner.plan_fft_forward(m).process(&mut row);
    row.into_iter().map(|z| z.re).collect()
}

fn clamp_eigenvalues(eigen: &mut [f64]) -> std::result::Result<(), (f64, f64)> {
    let max = eigen.iter().fold(0.0f64, |a, b| a.max(*b));
    let threshold = EMBEDDING_CLAMP * max;
    let worst = eigen.iter().fold(0.0f64, |a, b| a.min(*b));
    if worst < -threshold {
        return Err((worst, threshold));
    }
    for l in eigen.iter_mut() {
        *l = l.max(0.0);
    }
    Ok(())
}

fn embed_acf(acf: &AcfSeries, n: usize) -> Result<Embedding> {
    let cov: Vec<f64> = (0..acf.len()).map(|j| acf.covariance(j)).collect();
    let mut planner = FftPlanner::new();
    let mut m = 2 * n;
    loop {
        let mut eigen = circulant_eigenvalues(&cov, m, &mut planner);
        match clamp_eigenvalues(&mut eigen) {
            Ok(()) => return Ok(Embedding::new(eigen, &mut planner)),
            Err((worst, threshold)) => {
                // A longer circulant only helps while the target has lags to add.
                if m >= MAX_EMBEDDING_FACTOR * n || cov.len() <= m / 2 + 1 {
                    return Err(gle_core::Error::Positivity { worst, threshold }.into());
                }
                m *= 2;
            }
        }
    }
}

fn embed_spectrum(shape: &ShapeEvaluator, n: usize, h: f64) -> Result<Embedding> {
    let m = 2 * n;
    let omega: Vec<f64> = (0..=m / 2)
        .map(|j| 2.0 * std::f64::consts::PI * j as f64 / (m as f64 * h))
        .collect();
    let density = spectral_density_grid(shape, &omega)?;
    let eigen = (0..m)
        .map(|j| {
            let k = if j <= m / 2 { j } else { m - j };
            density.values[k] / h
        })
        .collect();
    let mut planner = FftPlanner::new();
    Ok(Embedding::new(eigen, &mut planner))
}

/// Covariances implied by a spectral-density embedding, for inspection.
pub fn spectral_embedding_covariance(shape: &ShapeEvaluator, n: usize, h: f64) -> Result<Vec<f64>> {
    let embedding = embed_spectrum(shape, n, h)?;
    let mut row: Vec<Complex64> = embedding
        .weights
        .iter()
        .map(|w| Complex64::new(w * w, 0.0))
        .collect();
    embedding.fft.process(&mut row);
    Ok(row[..n].iter().map(|z| z.re).collect())
}
