//! GLE path ensembles: colored force noise pushed through the discrete
//! memory equation.

use std::sync::Arc;

use gle_core::volterra::{KernelSeries, LinearResponse};
use gle_core::{ModelSpec, Variant};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{LabError, Result};
use crate::noise::{generate_colored, initial_values, NoiseRequest, NoiseTarget, PathEnsemble};

/// Discrete GLE response evaluated by FFT convolution.
pub struct GleResponse {
    h: f64,
    n_steps: usize,
    free: Vec<f64>,
    green_spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GleResponse {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GleResponse")
            .field("h", &self.h)
            .field("n_steps", &self.n_steps)
            .finish()
    }
}

impl GleResponse {
    pub fn new(kernel: &KernelSeries, n_steps: usize) -> Result<Self> {
        let response = LinearResponse::new(kernel, n_steps)?;
        let size = (2 * n_steps).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut green_spectrum: Vec<Complex64> = response.green[..n_steps]
            .iter()
            .map(|&g| Complex64::new(g, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(size)
            .collect();
        forward.process(&mut green_spectrum);
        Ok(Self {
            h: response.step,
            n_steps,
            free: response.free,
            green_spectrum,
            forward,
            inverse,
        })
    }

    /// R_0..R_N driven by F_0..F_{N−1}.
    pub fn apply(&self, noise: &[f64], r0: f64) -> Result<Vec<f64>> {
        if noise.len() != self.n_steps {
            return Err(LabError::Input(format!(
                "expected {} noise samples, got {}",
                self.n_steps,
                noise.len()
            )));
        }
        let size = self.green_spectrum.len();
        let mut buf: Vec<Complex64> = noise
            .iter()
            .map(|&f| Complex64::new(f, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(size)
            .collect();
        self.forward.process(&mut buf);
        for (b, g) in buf.iter_mut().zip(&self.green_spectrum) {
            *b *= g;
        }
        self.inverse.process(&mut buf);
        let scale = self.h / size as f64;
        let mut out = Vec::with_capacity(self.n_steps + 1);
        out.push(r0);
        for n in 1..=self.n_steps {
            out.push(r0 * self.free[n] + scale * buf[n - 1].re);
        }
        Ok(out)
    }
}

/// True when the model's force is white noise.
pub fn has_white_force(model: &ModelSpec) -> bool {
    match model.variant() {
        Variant::WhiteNoise => true,
        Variant::StockTheta => model.tau_market() == 0.0,
        _ => false,
    }
}

/// Force-noise target of a kernel model at step h.
pub fn force_target(model: &ModelSpec, h: f64) -> Result<NoiseTarget> {
    if has_white_force(model) {
        return Ok(NoiseTarget::White {
            variance: 2.0 * model.variance() / (model.correlation_time() * h),
        });
    }
    match model.variant() {
        Variant::LinearSelfSimilar | Variant::StockTheta => {
            Ok(NoiseTarget::Spectrum(model.force()))
        }
        other => Err(gle_core::Error::Capability(format!(
            "the {} model has no simulated force",
            other.name()
        ))
        .into()),
    }
}

/// Stationary return-rate paths R_0..R_{N−1} of a kernel model.
///
/// Path i uses force stream i of `seed` and initial-value stream 2³² + i.
pub fn simulate_gle_ensemble(
    model: &ModelSpec,
    h: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let target = force_target(model, h)?;
    let noise = generate_colored(&NoiseRequest {
        target,
        n_steps,
        h,
        n_paths,
        seed,
    })?;
    let kernel = KernelSeries::for_model(model, h, n_steps + 1)?;
    let response = GleResponse::new(&kernel, n_steps)?;
    let r0 = initial_values(n_paths, model.variance(), seed);
    let paths = noise
        .paths
        .par_iter()
        .zip(r0.par_iter())
        .map(|(f, &r)| {
            let mut path = response.apply(f, r)?;
            path.truncate(n_steps);
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(noise.with_paths(paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use gle_core::volterra::integrate_gle;

    #[test]
    fn fft_response_matches_stepper() {
        let h = 0.05;
        let n = 512;
        let kernel = KernelSeries::rubin(1.0, h, n + 1).unwrap();
        let noise: Vec<f64> = (0..n)
            .map(|j| ((j * 7919) % 101) as f64 / 50.0 - 1.0)
            .collect();
        let fast = GleResponse::new(&kernel, n)
            .unwrap()
            .apply(&noise, 0.3)
            .unwrap();
        let slow = integrate_gle(&kernel, &noise, 0.3, h).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn white_force_variance_gives_stationary_variance() {
        let m = ModelSpec::white_noise(1.0, 2.0).unwrap();
        let e = simulate_gle_ensemble(&m, 0.1, 1 << 12, 32, 11).unwrap();
        let n = (e.n_paths() * e.n_samples()) as f64;
        let var = e.paths.iter().flatten().map(|x| x * x).sum::<f64>() / n;
        assert!((var / 2.0 - 1.0).abs() < 0.05, "variance {var}");
        assert_eq!(simulate_gle_ensemble(&m, 0.1, 1 << 12, 32, 11).unwrap(), e);
    }

    #[test]
    fn refuses_models_without_a_kernel() {
        let m = ModelSpec::boltzmann(1.0, 1.0).unwrap();
        let err = simulate_gle_ensemble(&m, 0.1, 64, 1, 0).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn response_length_is_checked() {
        let kernel = KernelSeries::rubin(1.0, 0.1, 65).unwrap();
        let r = GleResponse::new(&kernel, 64).unwrap();
        assert!(r.apply(&[0.0; 32], 0.0).is_err());
    }
}
