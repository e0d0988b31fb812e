//! Time-domain memory equation and GLE stepping.
//!
//! The memory equation dc/dt = −∫₀^t k(t−s) c(s) ds and the GLE
//! dR/dt = −∫₀^t k(t−s) R(s) ds + F(t) share one scheme: trapezoidal
//! product integration for the memory integral,
//!
//! ```text
//! I_n = h·[½k_n R_0 + Σ_{j=1}^{n−1} k_{n−j} R_j + ½k_0 R_n],
//! ```
//!
//! and the trapezoidal rule in time,
//! `R_{n+1} = R_n − (h/2)(I_n + I_{n+1}) + h·F_n`. The k₀ part of I_{n+1}
//! is linear in R_{n+1} and is solved in closed form.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::models::{closed_form_acf, ModelSpec, Variant, THETA_EXACT_TOL};
use crate::series::AcfSeries;
use crate::specfun::lambda1;

/// Largest step accepted by the self-consistent solvers, in correlation times.
pub const MAX_SELF_CONSISTENT_STEP: f64 = 1.0 / 50.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Sampled memory kernel k(jh) = C_F(jh)/⟨R²⟩, units 1/time².
///
/// A delta part at the origin is kept apart as `impulse`, the weight w in
/// ∫₀^t w·2δ(t−s)·R(s) ds = w·R(t).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSeries {
    pub step: f64,
    pub values: Vec<f64>,
    pub impulse: f64,
}

impl KernelSeries {
    pub fn new(step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Domain {
                what: "step",
                value: step,
            });
        }
        if values.is_empty() {
            return Err(Error::Input("kernel has no samples".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "kernel value",
                value: *bad,
            });
        }
        Ok(Self {
            step,
            values,
            impulse: 0.0,
        })
    }

    pub fn from_fn(step: f64, len: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(step, (0..len).map(|j| f(j as f64 * step)).collect())
    }

    pub fn zero(step: f64, len: usize) -> Result<Self> {
        Self::new(step, vec![0.0; len])
    }

    /// Delta kernel (2/τ)·δ(t) of the white-noise force.
    pub fn white(tau: f64, step: f64, len: usize) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Domain {
                what: "tau",
                value: tau,
            });
        }
        let mut kernel = Self::zero(step, len.max(1))?;
        kernel.impulse = 1.0 / tau;
        Ok(kernel)
    }

    /// Market kernel Λ₁(2t/τ_R)/τ_R².
    pub fn rubin(tau_market: f64, step: f64, len: usize) -> Result<Self> {
        if !(tau_market > 0.0) {
            return Err(Error::Domain {
                what: "tau_R",
                value: tau_market,
            });
        }
        let scale = 1.0 / (tau_market * tau_market);
        Self::from_fn(step, len, |t| {
            lambda1(2.0 * t / tau_market).unwrap_or(0.0) * scale
        })
    }

    /// Stock kernel Λ₁(2t/τ_R)/(τ_r·τ_R); θ = 0 falls back to the white kernel.
    pub fn stock(tau_stock: f64, theta: f64, step: f64, len: usize) -> Result<Self> {
        if !(tau_stock > 0.0) {
            return Err(Error::Domain {
                what: "tau_r",
                value: tau_stock,
            });
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::Domain {
                what: "theta",
                value: theta,
            });
        }
        if theta <= THETA_EXACT_TOL {
            return Self::white(tau_stock, step, len);
        }
        let tau_market = theta * tau_stock;
        let scale = 1.0 / (tau_stock * tau_market);
        Self::from_fn(step, len, |t| {
            lambda1(2.0 * t / tau_market).unwrap_or(0.0) * scale
        })
    }

    /// Kernel of a model with an explicit force ACF.
    pub fn for_model(model: &ModelSpec, step: f64, len: usize) -> Result<Self> {
        match model.variant() {
            Variant::WhiteNoise => Self::white(model.tau_market(), step, len),
            Variant::LinearSelfSimilar => Self::rubin(model.tau_market(), step, len),
            Variant::StockTheta => Self::stock(
                model.correlation_time(),
                model.theta().unwrap_or(0.0),
                step,
                len,
            ),
            other => Err(Error::Capability(format!(
                "the {} model has no explicit memory kernel",
                other.name()
            ))),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Σ a[i]·b[len−1−i] with four accumulators.
fn reversed_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[n - 1 - i];
        acc[1] += a[i + 1] * b[n - 2 - i];
        acc[2] += a[i + 2] * b[n - 3 - i];
        acc[3] += a[i + 3] * b[n - 4 - i];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[n - 1 - i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Runs the scheme for `steps` steps with forcing F_n = forcing(n).
fn step_scheme(
    k: &KernelSeries,
    r0: f64,
    steps: usize,
    forcing: impl Fn(usize) -> f64,
) -> Vec<f64> {
    let (kernel, h, w) = (&k.values, k.step, k.impulse);
    let mut r = Vec::with_capacity(steps + 1);
    r.push(r0);
    let diag = 1.0 + 0.25 * h * h * kernel[0] + 0.5 * h * w;
    let mut integral = w * r0;
    for n in 0..steps {
        // S_{n+1}: I_{n+1} without its k₀·R_{n+1} term.
        let history = if n == 0 {
            0.0
        } else {
            reversed_dot(&r[1..=n], &kernel[1..=n])
        };
        let partial = h * (0.5 * kernel[n + 1] * r[0] + history);
        let next = (r[n] - 0.5 * h * (integral + partial) + h * forcing(n)) / diag;
        integral = partial + 0.5 * h * kernel[0] * next + w * next;
        r.push(next);
    }
    r
}

fn check_horizon(kernel: &KernelSeries, steps: usize) -> Result<()> {
    if kernel.len() < steps + 1 {
        return Err(Error::Input(format!(
            "kernel covers {} samples but {} are needed",
            kernel.len(),
            steps + 1
        )));
    }
    Ok(())
}

/// Normalized ACF from the memory equation with a given kernel.
pub fn propagate_acf(kernel: &KernelSeries, steps: usize, variance: f64) -> Result<AcfSeries> {
    check_horizon(kernel, steps)?;
    let values = step_scheme(kernel, 1.0, steps, |_| 0.0);
    AcfSeries::new(kernel.step, values, variance)
}

/// Samples R_0..R_N of the GLE driven by F_0..F_{N−1}.
pub fn integrate_gle(kernel: &KernelSeries, noise: &[f64], r0: f64, h: f64) -> Result<Vec<f64>> {
    if h != kernel.step {
        return Err(Error::Input(format!(
            "noise step {h} differs from kernel step {}",
            kernel.step
        )));
    }
    check_horizon(kernel, noise.len())?;
    if !r0.is_finite() {
        return Err(Error::Domain {
            what: "r0",
            value: r0,
        });
    }
    Ok(step_scheme(kernel, r0, noise.len(), |n| noise[n]))
}

/// Free and forced responses of the discrete GLE.
///
/// The scheme is linear and shift-invariant in the forcing, so
/// `R_n = r0·free[n] + h·Σ_{j<n} green[n−1−j]·F_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearResponse {
    pub step: f64,
    pub free: Vec<f64>,
    pub green: Vec<f64>,
}

impl LinearResponse {
    pub fn new(kernel: &KernelSeries, steps: usize) -> Result<Self> {
        check_horizon(kernel, steps)?;
        let h = kernel.step;
        let free = step_scheme(kernel, 1.0, steps, |_| 0.0);
        let mut green = step_scheme(kernel, 0.0, steps, |n| if n == 0 { 1.0 / h } else { 0.0 });
        green.remove(0);
        Ok(Self {
            step: h,
            free,
            green,
        })
    }

    /// Direct O(N²) evaluation, mostly for cross-checks.
    pub fn apply(&self, noise: &[f64], r0: f64) -> Result<Vec<f64>> {
        if noise.len() + 1 > self.free.len() {
            return Err(Error::Input(format!(
                "response covers {} steps, noise has {}",
                self.green.len(),
                noise.len()
            )));
        }
        let mut out = Vec::with_capacity(noise.len() + 1);
        out.push(r0);
        for n in 1..=noise.len() {
            out.push(r0 * self.free[n] + self.step * reversed_dot(&noise[..n], &self.green[..n]));
        }
        Ok(out)
    }
}

fn check_self_consistent(tau: f64, h: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain {
            what: "tau",
            value: tau,
        });
    }
    if !(h > 0.0) {
        return Err(Error::Domain {
            what: "step",
            value: h,
        });
    }
    let limit = MAX_SELF_CONSISTENT_STEP * tau;
    if h > limit {
        return Err(Error::Stability { h, limit });
    }
    Ok(())
}

/// ACF of the market model built with kernel k = c/τ², c being the
/// solution under construction.
pub fn propagate_self_consistent(tau_corr: f64, steps: usize, h: f64) -> Result<AcfSeries> {
    check_self_consistent(tau_corr, h)?;
    let inv = 1.0 / (tau_corr * tau_corr);
    let mut c = Vec::with_capacity(steps + 1);
    c.push(1.0);
    // ½h·k₀·c_{n+1} and ½h·k_{n+1}·c₀ both equal ½h·c_{n+1}/τ².
    let diag = 1.0 + 0.5 * h * h * inv;
    let mut integral = 0.0;
    for n in 0..steps {
        let history = if n == 0 {
            0.0
        } else {
            reversed_dot(&c[1..=n], &c[1..=n]) * inv
        };
        let partial = h * history;
        let next = (c[n] - 0.5 * h * (integral + partial)) / diag;
        integral = partial + h * inv * next;
        c.push(next);
    }
    AcfSeries::new(h, c, 1.0)
}

/// Internal horizon of the shift-fixed solvers, in correlation times.
const SHIFT_HORIZON: f64 = 30.0;

/// Real-axis frequency, in 1/τ, where the free shift is matched.
const SHIFT_PROBE: f64 = 2.0;

/// ACF of the Boltzmann market model.
///
/// The relation y(τp + 1 + ln y) = 1 becomes y′(1 + y) = −y² in p, i.e.
/// t·c(t) = (1 − t/2τ)·(c∗c)(t) in time. That equation fixes c up to a
/// factor e^{κt/τ}; κ is removed by matching the real-axis image at p = 2/τ.
pub fn propagate_boltzmann(tau: f64, steps: usize, h: f64) -> Result<AcfSeries> {
    check_self_consistent(tau, h)?;
    let n_total = internal_len(tau, steps, h);
    let mut c = vec![0.0; n_total + 1];
    c[0] = 1.0;
    c[1] = 1.0 - (h / tau) * ((h / tau).ln() + EULER_GAMMA);
    for n in 2..=n_total {
        let a = n as f64 * h / (2.0 * tau);
        let s = reversed_dot(&c[1..n], &c[1..n]);
        c[n] = (1.0 - a) * s / (n as f64 - 1.0 + a);
    }
    let model = ModelSpec::boltzmann(tau, 1.0)?;
    finish_shift_fixed(&model, c, steps, h)
}

/// ACF of the differential market model.
///
/// With 1/y = v − 1 and v − ln v = 2 − ln 2 + τp, y obeys −τ·y′ = y² + y³,
/// i.e. t·c = (c∗c) + (c∗c∗c)/τ. The free shift is fixed as for
/// [`propagate_boltzmann`].
pub fn propagate_differential(tau: f64, steps: usize, h: f64) -> Result<AcfSeries> {
    check_self_consistent(tau, h)?;
    let n_total = internal_len(tau, steps, h);
    let mut c = vec![0.0; n_total + 1];
    // e = c∗c
    let mut e = vec![0.0; n_total + 1];
    c[0] = 1.0;
    c[1] = 1.0 + (h / tau) * ((h / tau).ln() - 2.0 + core::f64::consts::LN_2 + EULER_GAMMA);
    e[1] = h * c[0] * c[1];
    for n in 2..=n_total {
        let conv = h * reversed_dot(&c[1..n], &c[1..n]);
        let triple = h * reversed_dot(&e[1..n], &c[1..n]);
        let t = n as f64 * h;
        c[n] = (conv * (1.0 + 0.5 * h / tau) + triple / tau) / (t - h - 0.5 * h * h / tau);
        e[n] = h * c[n] + conv;
    }
    let model = ModelSpec::differential(tau, 1.0)?;
    finish_shift_fixed(&model, c, steps, h)
}

fn internal_len(tau: f64, steps: usize, h: f64) -> usize {
    steps.max((SHIFT_HORIZON * tau / h).ceil() as usize).max(2)
}

fn finish_shift_fixed(
    model: &ModelSpec,
    mut c: Vec<f64>,
    steps: usize,
    h: f64,
) -> Result<AcfSeries> {
    let tau = model.tau_market();
    let p0 = SHIFT_PROBE / tau;
    let target = tau * model.observable().eval_real(p0)?;
    let image = |kappa: f64| -> f64 {
        let rate = p0 + kappa / tau;
        let last = c.len() - 1;
        let mut sum = 0.0;
        for (j, v) in c.iter().enumerate() {
            let w = if j == 0 || j == last { 0.5 } else { 1.0 };
            sum += w * v * (-rate * j as f64 * h).exp();
        }
        h * sum - target
    };
    // The image decreases with κ.
    let (mut lo, mut hi) = (-1.5, 1.5);
    let (f_lo, f_hi) = (image(lo), image(hi));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::Solver {
            iterations: 0,
            residual: f_lo.abs().min(f_hi.abs()),
        });
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if image(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let kappa = 0.5 * (lo + hi);
    for (j, v) in c.iter_mut().enumerate() {
        *v *= (-kappa * j as f64 * h / tau).exp();
    }
    c.truncate(steps + 1);
    AcfSeries::new(h, c, model.variance())
}

/// Time-domain ACF of any model with a time-domain route.
pub fn propagate_model(model: &ModelSpec, steps: usize, h: f64) -> Result<AcfSeries> {
    let mut series = match model.variant() {
        Variant::LinearSelfSimilar => propagate_self_consistent(model.tau_market(), steps, h)?,
        Variant::Boltzmann => propagate_boltzmann(model.tau_market(), steps, h)?,
        Variant::Differential => propagate_differential(model.tau_market(), steps, h)?,
        Variant::WhiteNoise | Variant::StockTheta => {
            let kernel = KernelSeries::for_model(model, h, steps + 1)?;
            propagate_acf(&kernel, steps, 1.0)?
        }
        other => {
            return Err(Error::Capability(format!(
                "the {} model has no time-domain route",
                other.name()
            )))
        }
    };
    series.variance = model.variance();
    Ok(series)
}

/// Log-log slope of the local extrema of |c| with lags in [from, to].
///
/// Extrema are refined by a parabola through the three samples around each
/// discrete extremum.
pub fn tail_exponent(series: &AcfSeries, from: f64, to: f64) -> Result<f64> {
    let h = series.step;
    let v = &series.values;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in 1..v.len().saturating_sub(1) {
        let (a, b, c) = (v[j - 1].abs(), v[j].abs(), v[j + 1].abs());
        if !(b > a && b >= c) {
            continue;
        }
        let denom = a - 2.0 * b + c;
        let offset = if denom != 0.0 {
            0.5 * (a - c) / denom
        } else {
            0.0
        };
        let t = (j as f64 + offset) * h;
        let peak = b - 0.25 * (a - c) * offset;
        if t >= from && t <= to && peak > 0.0 {
            xs.push(t.ln());
            ys.push(peak.ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::Input(format!(
            "only {} extrema in [{from}, {to}]",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Largest |c_j − closed form| over a series, for models with a closed form.
pub fn max_deviation(model: &ModelSpec, series: &AcfSeries) -> Result<f64> {
    let mut worst = 0.0f64;
    for (t, v) in series.iter() {
        worst = worst.max((v - closed_form_acf(model, t)?).abs());
    }
    Ok(worst)
}
