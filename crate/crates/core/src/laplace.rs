//! Numerical Laplace inversion and spectral densities.
//!
//! Time-domain ACFs are recovered from normalized images with the
//! Fourier-series Bromwich sum accelerated by Euler summation
//! (Abate–Whitt). The contour sits at Re p = A/(2t); the discretization
//! error is about e^{−A}.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::models::ShapeEvaluator;
use crate::series::AcfSeries;

/// Binomial-averaging depth of the Euler summation.
const EULER_DEPTH: usize = 11;

/// Largest lag accepted, in units of the shape's time scale.
pub const MAX_LAG_SCALE: f64 = 200.0;

/// Spectral values below −CLAMP_FRACTION·peak are rejected, smaller
/// negatives are set to zero.
pub const CLAMP_FRACTION: f64 = 1e-8;

const MAX_DOUBLINGS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct InversionRequest {
    pub shape: ShapeEvaluator,
    pub lags: Vec<f64>,
    pub accuracy_target: f64,
}

impl InversionRequest {
    pub fn new(shape: ShapeEvaluator, lags: Vec<f64>, accuracy_target: f64) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::Input("lag grid is empty".into()));
        }
        if !(lags[0] >= 0.0) {
            return Err(Error::Domain {
                what: "first lag",
                value: lags[0],
            });
        }
        if lags.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Input("lag grid must be strictly increasing".into()));
        }
        if !(accuracy_target > 0.0 && accuracy_target < 1.0) {
            return Err(Error::Domain {
                what: "accuracy target",
                value: accuracy_target,
            });
        }
        Ok(Self {
            shape,
            lags,
            accuracy_target,
        })
    }
}

/// Normalized ACF values at the requested lags.
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest estimated absolute error over the grid.
    pub achieved: f64,
    /// Largest imaginary part left in the conjugate-pair contour sums.
    pub imaginary_residue: f64,
}

/// One inverted point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointInversion {
    pub value: f64,
    pub error: f64,
    pub imaginary_residue: f64,
}

fn check_capable(shape: &ShapeEvaluator) -> Result<f64> {
    if !shape.is_complex_capable() {
        return Err(Error::Capability(format!(
            "the {} model is real-axis only; use the Volterra route for its ACF",
            shape.model.variant().name()
        )));
    }
    shape.time_scale()
}

pub fn invert(request: &InversionRequest) -> Result<Inversion> {
    let scale = check_capable(&request.shape)?;
    let mut values = Vec::with_capacity(request.lags.len());
    let mut achieved = 0.0f64;
    let mut residue = 0.0f64;
    for &t in &request.lags {
        let point = invert_point(&request.shape, t, request.accuracy_target, scale)?;
        values.push(point.value);
        achieved = achieved.max(point.error);
        residue = residue.max(point.imaginary_residue);
    }
    Ok(Inversion {
        lags: request.lags.clone(),
        values,
        achieved,
        imaginary_residue: residue,
    })
}

/// Inverts onto the uniform grid 0, step, …, (len − 1)·step.
pub fn invert_uniform(
    shape: &ShapeEvaluator,
    step: f64,
    len: usize,
    accuracy_target: f64,
) -> Result<AcfSeries> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain {
            what: "lag step",
            value: step,
        });
    }
    let lags: Vec<f64> = (0..len).map(|j| j as f64 * step).collect();
    let inversion = invert(&InversionRequest::new(*shape, lags, accuracy_target)?)?;
    let variance = shape.amplitude() / shape.time_scale()?;
    AcfSeries::new(step, inversion.values, variance)
}

/// Inverts τ_c·φ(p) at one lag t, where τ_c = `scale` normalizes the ACF.
pub fn invert_point(
    shape: &ShapeEvaluator,
    t: f64,
    accuracy_target: f64,
    scale: f64,
) -> Result<PointInversion> {
    if !(t >= 0.0 && t <= MAX_LAG_SCALE * scale) {
        return Err(Error::Domain {
            what: "lag",
            value: t,
        });
    }
    if t == 0.0 {
        return Ok(PointInversion {
            value: 1.0,
            error: 0.0,
            imaginary_residue: 0.0,
        });
    }
    let a = (2.3 - accuracy_target.ln()).clamp(12.0, 30.0);
    let discretization = (-a).exp();
    let base = 20 + (1.3 * t * shape.bandwidth() / core::f64::consts::PI).ceil() as usize;
    let mut terms = base;
    let mut last = None;
    for _ in 0..=MAX_DOUBLINGS {
        let point = euler_sum(shape, t, a, terms, scale)?;
        let total = PointInversion {
            error: point.error + discretization,
            ..point
        };
        if total.error <= accuracy_target {
            return Ok(total);
        }
        last = Some(total);
        terms *= 2;
    }
    let achieved = last.map_or(f64::INFINITY, |p| p.error);
    Err(Error::Accuracy {
        target: accuracy_target,
        achieved,
    })
}

fn euler_sum(
    shape: &ShapeEvaluator,
    t: f64,
    a: f64,
    n: usize,
    scale: f64,
) -> Result<PointInversion> {
    let total = n + 2 * EULER_DEPTH + 1;
    let prefactor = (0.5 * a).exp() / t;
    let step = core::f64::consts::PI / t;
    let re0 = a / (2.0 * t);
    // Partial sums of the real and imaginary parts of the paired terms.
    let mut re_sums = Vec::with_capacity(total);
    let mut im_sums = Vec::with_capacity(total);
    let f0 = shape.eval(Complex64::new(re0, 0.0))? * scale;
    let (mut re_acc, mut im_acc) = (0.5 * f0.re, 0.5 * f0.im);
    re_sums.push(re_acc);
    im_sums.push(im_acc);
    for k in 1..total {
        let p = Complex64::new(re0, k as f64 * step);
        let pair = (shape.eval(p)? + shape.eval(p.conj())?) * (0.5 * scale);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        re_acc += sign * pair.re;
        im_acc += sign * pair.im;
        re_sums.push(re_acc);
        im_sums.push(im_acc);
    }
    let weights = binomial_weights(EULER_DEPTH);
    let euler = |sums: &[f64], start: usize| -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * sums[start + k])
            .sum::<f64>()
            * prefactor
    };
    let value = euler(&re_sums, n);
    let shifted = euler(&re_sums, n + EULER_DEPTH);
    let imaginary = euler(&im_sums, n).abs();
    Ok(PointInversion {
        value,
        error: (value - shifted).abs(),
        imaginary_residue: imaginary,
    })
}

fn binomial_weights(m: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(m + 1);
    let mut c = 1.0f64;
    for k in 0..=m {
        w.push(c / 2f64.powi(m as i32));
        c = c * (m - k) as f64 / (k + 1) as f64;
    }
    w
}

/// S(ω) = 2·C̃(0)·Re φ(iω) on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
    /// Number of slightly negative values set to zero.
    pub clamped: usize,
}

fn raw_density(shape: &ShapeEvaluator, omega: f64) -> Result<f64> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::Domain {
            what: "omega",
            value: omega,
        });
    }
    let value = 2.0 * shape.amplitude() * shape.eval(Complex64::new(0.0, omega))?.re;
    if !value.is_finite() {
        return Err(Error::Domain {
            what: "omega (singular spectral density)",
            value: omega,
        });
    }
    Ok(value)
}

fn clamp_negative(value: f64, peak: f64) -> Result<(f64, bool)> {
    let threshold = CLAMP_FRACTION * peak;
    if value >= 0.0 {
        Ok((value, false))
    } else if value >= -threshold {
        Ok((0.0, true))
    } else {
        Err(Error::Positivity {
            worst: value,
            threshold,
        })
    }
}

/// Spectral density at one frequency, clamped relative to S(0).
pub fn spectral_density(shape: &ShapeEvaluator, omega: f64) -> Result<f64> {
    if !shape.is_complex_capable() {
        return Err(Error::Capability(format!(
            "the {} model has no complex image for a spectral density",
            shape.model.variant().name()
        )));
    }
    let value = raw_density(shape, omega)?;
    let peak = raw_density(shape, 0.0)?.max(value.abs());
    clamp_negative(value, peak).map(|(v, _)| v)
}

pub fn spectral_density_grid(shape: &ShapeEvaluator, omega: &[f64]) -> Result<SpectralDensity> {
    if !shape.is_complex_capable() {
        return Err(Error::Capability(format!(
            "the {} model has no complex image for a spectral density",
            shape.model.variant().name()
        )));
    }
    let raw = omega
        .iter()
        .map(|&w| raw_density(shape, w))
        .collect::<Result<Vec<_>>>()?;
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut clamped = 0;
    let mut values = Vec::with_capacity(raw.len());
    for v in raw {
        let (v, hit) = clamp_negative(v, peak)?;
        clamped += hit as usize;
        values.push(v);
    }
    Ok(SpectralDensity {
        omega: omega.to_vec(),
        values,
        clamped,
    })
}
