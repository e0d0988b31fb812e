//! Brownian self-similarity models.
//!
//! Every model is described by two normalized Laplace images: the
//! observable shape `y(p) = C̃(p)/C̃(0)` and the Langevin-force shape
//! `g(p) = C̃_F(p)/C̃_F(0)`. They are tied together by the memory equation
//! in Laplace space, which in normalized form reads
//!
//! ```text
//! y(p) · (τ p + g(p)) = 1
//! ```
//!
//! with τ the model's own correlation time (τ_R for market models, τ_r for
//! stock models). Dimensionful images follow from
//! `C̃_obs(0) = variance · τ` and `C̃_force(0) = variance / τ`.

use alloc::format;
use core::f64::consts::LN_2;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::specfun::{bessel_j0, lambda1, lambert_w0_exp, lambert_wm1_exp};

/// Tolerance for recognizing θ ∈ {0, 1, 2} in closed-form dispatch.
pub const THETA_EXACT_TOL: f64 = 1e-12;

/// Iteration budget of the Eq.-22 functional solvers.
pub const FUNCTIONAL_MAX_ITER: usize = 200;

/// Required closure residual of a functional-solver result.
pub const FUNCTIONAL_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Delta-correlated force, exponential ACF.
    WhiteNoise,
    /// Force ACF proportional to the observable ACF (Rubin model).
    LinearSelfSimilar,
    /// Stock driven by a force with the market's memory.
    StockTheta,
    /// Force shape g(p) = y(θp).
    Scaling,
    /// Force shape g(p) = y(p)^θ.
    Fractional,
    /// g(p) − 1 = ln y(p).
    Boltzmann,
    /// d g/dp ∝ y(p).
    Differential,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::WhiteNoise,
        Variant::LinearSelfSimilar,
        Variant::StockTheta,
        Variant::Scaling,
        Variant::Fractional,
        Variant::Boltzmann,
        Variant::Differential,
    ];

    /// Stock variants are parameterized by (τ_r, θ); market variants by τ_R.
    pub fn is_stock(self) -> bool {
        matches!(
            self,
            Variant::StockTheta | Variant::Scaling | Variant::Fractional
        )
    }

    /// Variants whose shapes are evaluated off the real axis.
    pub fn is_complex_capable(self) -> bool {
        matches!(
            self,
            Variant::WhiteNoise | Variant::LinearSelfSimilar | Variant::StockTheta
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::WhiteNoise => "white",
            Variant::LinearSelfSimilar => "linear",
            Variant::StockTheta => "stock",
            Variant::Scaling => "scaling",
            Variant::Fractional => "fractional",
            Variant::Boltzmann => "boltzmann",
            Variant::Differential => "differential",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|v| v.name() == name)
    }
}

/// One self-similarity model with its parameters.
///
/// θ = τ_R/τ_r is never stored; stock constructors take θ and store τ_R.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    variant: Variant,
    tau_market: f64,
    tau_stock: Option<f64>,
    variance: f64,
}

impl ModelSpec {
    pub fn new(
        variant: Variant,
        tau_market: f64,
        tau_stock: Option<f64>,
        variance: f64,
    ) -> Result<Self> {
        let positive = |what, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Domain { what, value: v })
            }
        };
        positive("variance", variance)?;
        if variant.is_stock() {
            let tau_r = tau_stock.ok_or_else(|| {
                Error::Input(format!(
                    "{} model needs a stock correlation time",
                    variant.name()
                ))
            })?;
            positive("tau_r", tau_r)?;
            // θ = 0 (τ_R = 0) is the heaviest-stock limit and stays admissible.
            if !(tau_market >= 0.0 && tau_market.is_finite()) {
                return Err(Error::Domain {
                    what: "tau_R",
                    value: tau_market,
                });
            }
        } else {
            positive("tau_R", tau_market)?;
            if tau_stock.is_some() {
                return Err(Error::Input(format!(
                    "{} model takes no stock correlation time",
                    variant.name()
                )));
            }
        }
        Ok(Self {
            variant,
            tau_market,
            tau_stock,
            variance,
        })
    }

    pub fn white_noise(tau: f64, variance: f64) -> Result<Self> {
        Self::new(Variant::WhiteNoise, tau, None, variance)
    }

    pub fn linear_self_similar(tau_market: f64, variance: f64) -> Result<Self> {
        Self::new(Variant::LinearSelfSimilar, tau_market, None, variance)
    }

    pub fn boltzmann(tau_market: f64, variance: f64) -> Result<Self> {
        Self::new(Variant::Boltzmann, tau_market, None, variance)
    }

    pub fn differential(tau_market: f64, variance: f64) -> Result<Self> {
        Self::new(Variant::Differential, tau_market, None, variance)
    }

    pub fn stock_theta(tau_stock: f64, theta: f64, variance: f64) -> Result<Self> {
        Self::stock(Variant::StockTheta, tau_stock, theta, variance)
    }

    pub fn scaling(tau_stock: f64, theta: f64, variance: f64) -> Result<Self> {
        Self::stock(Variant::Scaling, tau_stock, theta, variance)
    }

    pub fn fractional(tau_stock: f64, theta: f64, variance: f64) -> Result<Self> {
        Self::stock(Variant::Fractional, tau_stock, theta, variance)
    }

    /// Stock model from (τ_r, θ).
    pub fn stock(variant: Variant, tau_stock: f64, theta: f64, variance: f64) -> Result<Self> {
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::Domain {
                what: "theta",
                value: theta,
            });
        }
        if !variant.is_stock() {
            return Err(Error::Input(format!(
                "{} is not a stock model",
                variant.name()
            )));
        }
        Self::new(variant, theta * tau_stock, Some(tau_stock), variance)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Market correlation time τ_R.
    pub fn tau_market(&self) -> f64 {
        self.tau_market
    }

    /// Stock correlation time τ_r, for stock variants.
    pub fn tau_stock(&self) -> Option<f64> {
        self.tau_stock
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// θ = τ_R/τ_r for stock variants.
    pub fn theta(&self) -> Option<f64> {
        self.tau_stock.map(|t| self.tau_market / t)
    }

    /// The time that scales p in the closure y·(τp + g) = 1.
    pub fn correlation_time(&self) -> f64 {
        self.tau_stock.unwrap_or(self.tau_market)
    }

    pub fn observable(&self) -> ShapeEvaluator {
        ShapeEvaluator {
            model: *self,
            kind: ShapeKind::Observable,
        }
    }

    pub fn force(&self) -> ShapeEvaluator {
        ShapeEvaluator {
            model: *self,
            kind: ShapeKind::Force,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Observable,
    Force,
}

/// Normalized Laplace image of one model quantity, φ(0) = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeEvaluator {
    pub model: ModelSpec,
    pub kind: ShapeKind,
}

impl ShapeEvaluator {
    pub fn eval(&self, p: Complex64) -> Result<Complex64> {
        match self.kind {
            ShapeKind::Observable => observable_shape(&self.model, p),
            ShapeKind::Force => force_shape(&self.model, p),
        }
    }

    pub fn eval_real(&self, p: f64) -> Result<f64> {
        self.eval(Complex64::new(p, 0.0)).map(|v| v.re)
    }

    pub fn is_complex_capable(&self) -> bool {
        self.model.variant.is_complex_capable()
    }

    /// Dimensionful image at p = 0.
    pub fn amplitude(&self) -> f64 {
        let tau = self.model.correlation_time();
        match self.kind {
            ShapeKind::Observable => self.model.variance * tau,
            ShapeKind::Force => self.model.variance / tau,
        }
    }

    /// Dimensionful image C̃(0)·φ(p).
    pub fn image(&self, p: Complex64) -> Result<Complex64> {
        Ok(self.eval(p)? * self.amplitude())
    }

    /// ∫₀^∞ of the normalized time-domain ACF, i.e. C̃(0)/C(0).
    pub fn time_scale(&self) -> Result<f64> {
        match (self.kind, self.model.variant) {
            (ShapeKind::Observable, _) => Ok(self.model.correlation_time()),
            (ShapeKind::Force, Variant::LinearSelfSimilar | Variant::StockTheta)
                if self.model.tau_market > 0.0 =>
            {
                Ok(self.model.tau_market)
            }
            _ => Err(Error::Capability(format!(
                "the {} force image has no integrable time-domain ACF",
                self.model.variant.name()
            ))),
        }
    }

    /// Angular frequency of the image's nearest off-axis feature (branch
    /// point or pole); sets how many Bromwich terms an inversion needs.
    pub fn bandwidth(&self) -> f64 {
        let m = &self.model;
        match m.variant {
            Variant::WhiteNoise => 1.0 / m.tau_market,
            Variant::LinearSelfSimilar => 2.0 / m.tau_market,
            Variant::StockTheta => {
                let tau_r = m.correlation_time();
                let branch = if m.tau_market > 0.0 {
                    (2.0 / m.tau_market).min(10.0 / tau_r)
                } else {
                    0.0
                };
                2.0 / tau_r + branch
            }
            _ => 2.0 / m.correlation_time(),
        }
    }
}

/// √(1 + u²) on the branch that behaves like u for large |u|, Re u ≥ 0.
///
/// Written as √(1 + iu)·√(1 − iu) so that the cuts sit on the imaginary
/// axis beyond ±i and signed zeros pick the right side on the axis itself.
fn hyperbolic_root(u: Complex64) -> Complex64 {
    let iu = Complex64::new(-u.im, u.re);
    let one = Complex64::new(1.0, 0.0);
    (one + iu).sqrt() * (one - iu).sqrt()
}

/// Market-memory shape √(1 + (τp/2)²) − τp/2, evaluated without cancellation.
fn market_memory(tau: f64, p: Complex64) -> Complex64 {
    if tau == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let u = p * (0.5 * tau);
    (hyperbolic_root(u) + u).inv()
}

fn check_frequency(model: &ModelSpec, p: Complex64) -> Result<()> {
    if !(p.re.is_finite() && p.im.is_finite()) {
        return Err(Error::Domain {
            what: "p",
            value: if p.re.is_finite() { p.im } else { p.re },
        });
    }
    if p.re < 0.0 {
        return Err(Error::Domain {
            what: "Re p",
            value: p.re,
        });
    }
    if p.im != 0.0 && !model.variant.is_complex_capable() {
        return Err(Error::Capability(format!(
            "the {} model is evaluated on the real axis only",
            model.variant.name()
        )));
    }
    Ok(())
}

/// Normalized observable image y(p).
pub fn observable_shape(model: &ModelSpec, p: Complex64) -> Result<Complex64> {
    check_frequency(model, p)?;
    let one = Complex64::new(1.0, 0.0);
    if p == Complex64::new(0.0, 0.0) {
        return Ok(one);
    }
    let tau_m = model.tau_market;
    Ok(match model.variant {
        Variant::WhiteNoise => (one + p * tau_m).inv(),
        Variant::LinearSelfSimilar => market_memory(tau_m, p),
        Variant::StockTheta => {
            let tau_r = model.correlation_time();
            (p * tau_r + market_memory(tau_m, p)).inv()
        }
        Variant::Scaling | Variant::Fractional => {
            Complex64::new(solve_functional_shape(model, p.re)?, 0.0)
        }
        Variant::Boltzmann => {
            let x = tau_m * p.re;
            let w = lambert_w0_exp(1.0 + x)?;
            // exp(W₀(e^{1+x}) − 1 − x) = 1/W₀(e^{1+x})
            Complex64::new(1.0 / w, 0.0)
        }
        Variant::Differential => {
            let v = lambert_wm1_exp(2.0 - LN_2 + tau_m * p.re)?;
            Complex64::new(1.0 / (v - 1.0), 0.0)
        }
    })
}

/// Normalized Langevin-force image g(p).
pub fn force_shape(model: &ModelSpec, p: Complex64) -> Result<Complex64> {
    check_frequency(model, p)?;
    let one = Complex64::new(1.0, 0.0);
    if p == Complex64::new(0.0, 0.0) {
        return Ok(one);
    }
    let tau_m = model.tau_market;
    Ok(match model.variant {
        Variant::WhiteNoise => one,
        Variant::LinearSelfSimilar | Variant::StockTheta => market_memory(tau_m, p),
        Variant::Scaling => {
            let theta = model.theta().unwrap_or(0.0);
            Complex64::new(solve_functional_shape(model, theta * p.re)?, 0.0)
        }
        Variant::Fractional => {
            let theta = model.theta().unwrap_or(0.0);
            Complex64::new(solve_functional_shape(model, p.re)?.powf(theta), 0.0)
        }
        Variant::Boltzmann => {
            let x = tau_m * p.re;
            Complex64::new(lambert_w0_exp(1.0 + x)? - x, 0.0)
        }
        Variant::Differential => {
            let x = tau_m * p.re;
            Complex64::new(lambert_wm1_exp(2.0 - LN_2 + x)? - 1.0 - x, 0.0)
        }
    })
}

/// |y(p)·(τp + g(p)) − 1|, the normalized memory-equation closure.
pub fn identity_residual(model: &ModelSpec, p: Complex64) -> Result<f64> {
    let y = observable_shape(model, p)?;
    let g = force_shape(model, p)?;
    let tau = model.correlation_time();
    Ok((y * (p * tau + g) - Complex64::new(1.0, 0.0)).norm())
}

/// Boltzmann relation g − 1 − ln y, evaluated at real p.
pub fn boltzmann_relation_residual(model: &ModelSpec, p: f64) -> Result<f64> {
    if model.variant != Variant::Boltzmann {
        return Err(Error::Capability(format!(
            "{} is not the Boltzmann model",
            model.variant.name()
        )));
    }
    let y = observable_shape(model, Complex64::new(p, 0.0))?.re;
    let g = force_shape(model, Complex64::new(p, 0.0))?.re;
    Ok((g - 1.0 - y.ln()).abs())
}

/// Central-difference check of dC̃_F/dp = C̃_obs/τ_R for the differential
/// model, relative to C̃_obs/τ_R. Truncation error is O(step²).
pub fn differential_closure_residual(model: &ModelSpec, p: f64, step: f64) -> Result<f64> {
    if model.variant != Variant::Differential {
        return Err(Error::Capability(format!(
            "{} is not the differential model",
            model.variant.name()
        )));
    }
    if !(step > 0.0 && step < p.max(step * 2.0) || p == 0.0) {
        return Err(Error::Input(format!(
            "finite-difference step {step} invalid at p = {p}"
        )));
    }
    let force = model.force();
    let obs = model.observable();
    // One-sided at p = 0 would lose an order; shift the stencil instead.
    let centre = p.max(step);
    let hi = force.image(Complex64::new(centre + step, 0.0))?.re;
    let lo = force.image(Complex64::new(centre - step, 0.0))?.re;
    let derivative = (hi - lo) / (2.0 * step);
    let target = obs.image(Complex64::new(centre, 0.0))?.re / model.tau_market;
    Ok((derivative - target).abs() / target.abs())
}

/// Time-domain normalized ACF where a closed form exists.
pub fn closed_form_acf(model: &ModelSpec, tau: f64) -> Result<f64> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::Domain {
            what: "lag",
            value: tau,
        });
    }
    match model.variant {
        Variant::WhiteNoise => Ok((-tau / model.tau_market).exp()),
        Variant::LinearSelfSimilar => lambda1(2.0 * tau / model.tau_market),
        Variant::StockTheta => {
            let theta = model.theta().unwrap_or(0.0);
            let tau_r = model.correlation_time();
            if theta.abs() <= THETA_EXACT_TOL {
                Ok((-tau / tau_r).exp())
            } else if (theta - 1.0).abs() <= THETA_EXACT_TOL {
                lambda1(2.0 * tau / tau_r)
            } else if (theta - 2.0).abs() <= THETA_EXACT_TOL {
                bessel_j0(tau / tau_r)
            } else {
                Err(Error::Capability(format!(
                    "no closed-form ACF for the stock model at θ = {theta}"
                )))
            }
        }
        other => Err(Error::Capability(format!(
            "no closed-form ACF for the {} model",
            other.name()
        ))),
    }
}

/// True when [`closed_form_acf`] supports the model.
pub fn has_closed_form(model: &ModelSpec) -> bool {
    match model.variant {
        Variant::WhiteNoise | Variant::LinearSelfSimilar => true,
        Variant::StockTheta => {
            let theta = model.theta().unwrap_or(0.0);
            [0.0, 1.0, 2.0]
                .iter()
                .any(|k| (theta - k).abs() <= THETA_EXACT_TOL)
        }
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StockLabel {
    Heavy,
    Neutral,
    Light,
    UltraLight,
}

impl StockLabel {
    pub fn name(self) -> &'static str {
        match self {
            StockLabel::Heavy => "heavy",
            StockLabel::Neutral => "neutral",
            StockLabel::Light => "light",
            StockLabel::UltraLight => "ultra-light",
        }
    }
}

impl core::fmt::Display for StockLabel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StockClass {
    pub label: StockLabel,
    pub theta: f64,
}

/// Heavy [0, 2/3), neutral [2/3, 4/3), light [4/3, 2), ultra-light [2, ∞).
pub fn classify_theta(theta: f64) -> Result<StockClass> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::Domain {
            what: "theta",
            value: theta,
        });
    }
    let label = if 3.0 * theta < 2.0 {
        StockLabel::Heavy
    } else if 3.0 * theta < 4.0 {
        StockLabel::Neutral
    } else if theta < 2.0 {
        StockLabel::Light
    } else {
        StockLabel::UltraLight
    };
    Ok(StockClass { label, theta })
}

/// Observable shape of the scaling or fractional model at real p ≥ 0.
///
/// Fractional: the scalar root of y·(τ_r p + y^θ) = 1 on (0, 1], found by
/// bisection (the left side is strictly increasing in y).
///
/// Scaling: the iterated substitution y ← 1/(τ_r p + y(θp)) evaluated
/// pointwise as a finite continued fraction over the chain p, θp, θ²p, …
/// The innermost level is closed with the fractional solution, which shares
/// the scaling solution's value and slope at p = 0 and coincides with it at
/// θ ∈ {0, 1}.
pub fn solve_functional_shape(model: &ModelSpec, p: f64) -> Result<f64> {
    let theta = match (model.variant, model.theta()) {
        (Variant::Scaling | Variant::Fractional, Some(t)) => t,
        _ => {
            return Err(Error::Capability(format!(
                "{} is not a functional-equation model",
                model.variant.name()
            )))
        }
    };
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::Domain {
            what: "p",
            value: p,
        });
    }
    let tau_r = model.correlation_time();
    let y = match model.variant {
        Variant::Fractional => fractional_root(tau_r * p, theta),
        _ => scaling_fraction(tau_r * p, theta)?,
    };
    let residual = functional_residual(model, p, y)?;
    if residual > FUNCTIONAL_RESIDUAL_TOL {
        return Err(Error::Solver {
            iterations: FUNCTIONAL_MAX_ITER,
            residual,
        });
    }
    Ok(y)
}

fn functional_residual(model: &ModelSpec, p: f64, y: f64) -> Result<f64> {
    let theta = model.theta().unwrap_or(0.0);
    let tau_r = model.correlation_time();
    let g = match model.variant {
        Variant::Fractional => y.powf(theta),
        _ => scaling_fraction(tau_r * theta * p, theta)?,
    };
    Ok((y * (tau_r * p + g) - 1.0).abs())
}

/// Root of y·(x + y^θ) = 1 on (0, 1] for x = τ_r·p ≥ 0.
fn fractional_root(x: f64, theta: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if !x.is_finite() || x > 1e300 {
        return 0.0;
    }
    if theta == 0.0 {
        return 1.0 / (1.0 + x);
    }
    let f = |y: f64| y * (x + y.powf(theta)) - 1.0;
    // y ≤ 1/x and y ≤ 1 bracket the root from above.
    let (mut lo, mut hi) = (0.0, (1.0 / x).min(1.0));
    for _ in 0..FUNCTIONAL_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Pick whichever bracket end has the smaller residual.
    if f(hi).abs() < f(lo).abs() {
        hi
    } else {
        lo
    }
}

fn scaling_fraction(x: f64, theta: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(1.0);
    }
    let depth_value = |depth: usize| -> f64 {
        // x_k = θ^k x for k = 0..depth, tail closed at x_depth.
        let inner = x * theta.powi(depth as i32);
        let mut v = fractional_root(inner, theta);
        for k in (0..depth).rev() {
            let xk = x * theta.powi(k as i32);
            v = 1.0 / (xk + v);
        }
        v
    };
    let mut prev = depth_value(0);
    for depth in 1..=FUNCTIONAL_MAX_ITER {
        let cur = depth_value(depth);
        if (cur - prev).abs() <= 1e-15 * cur.abs().max(1e-300) {
            return Ok(cur);
        }
        prev = cur;
    }
    let residual = (prev - depth_value(FUNCTIONAL_MAX_ITER - 1)).abs();
    Err(Error::Solver {
        iterations: FUNCTIONAL_MAX_ITER,
        residual,
    })
}

/// Interior maximum (p*, C̃(p*)) of the dimensionful observable image at
/// real p, if one exists. Only ultra-light stocks (θ > 2) have one.
pub fn image_peak(model: &ModelSpec) -> Result<Option<(f64, f64)>> {
    let obs = model.observable();
    let image = |p: f64| obs.image(Complex64::new(p, 0.0)).map(|v| v.re);
    let tau = model.correlation_time();
    let at_zero = image(0.0)?;
    // Coarse log scan, then golden-section refinement around the best node.
    let mut best = (0.0, at_zero);
    let nodes = 400;
    let mut grid = [0.0f64; 401];
    for (i, slot) in grid.iter_mut().enumerate() {
        *slot = 1e-4 * 1e8f64.powf(i as f64 / nodes as f64) / tau;
    }
    let mut best_idx = None;
    for (i, &p) in grid.iter().enumerate() {
        let v = image(p)?;
        if v > best.1 {
            best = (p, v);
            best_idx = Some(i);
        }
    }
    let Some(i) = best_idx else { return Ok(None) };
    let mut a = if i == 0 { 0.0 } else { grid[i - 1] };
    let mut b = grid[(i + 1).min(nodes)];
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (image(c)?, image(d)?);
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = image(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = image(d)?;
        }
        if (b - a) <= 1e-12 * b.abs() {
            break;
        }
    }
    let p_star = 0.5 * (a + b);
    let v = image(p_star)?;
    Ok((v > at_zero).then_some((p_star, v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn log_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    fn every_model() -> Vec<ModelSpec> {
        alloc::vec![
            ModelSpec::white_noise(1.5, 0.3).unwrap(),
            ModelSpec::linear_self_similar(0.7, 2.0).unwrap(),
            ModelSpec::stock_theta(1.0, 0.0, 1.0).unwrap(),
            ModelSpec::stock_theta(1.3, 1.5, 1.0).unwrap(),
            ModelSpec::stock_theta(0.5, 3.0, 1.0).unwrap(),
            ModelSpec::scaling(1.0, 0.6, 1.0).unwrap(),
            ModelSpec::scaling(1.0, 1.7, 1.0).unwrap(),
            ModelSpec::fractional(2.0, 0.4, 1.0).unwrap(),
            ModelSpec::fractional(2.0, 2.5, 1.0).unwrap(),
            ModelSpec::boltzmann(1.0, 1.0).unwrap(),
            ModelSpec::differential(0.8, 1.0).unwrap(),
        ]
    }

    #[test]
    fn construction_invariants() {
        assert!(ModelSpec::linear_self_similar(0.0, 1.0).is_err());
        assert!(ModelSpec::linear_self_similar(1.0, -1.0).is_err());
        assert!(ModelSpec::stock_theta(0.0, 1.0, 1.0).is_err());
        assert!(ModelSpec::stock_theta(1.0, -0.1, 1.0).is_err());
        assert!(ModelSpec::new(Variant::StockTheta, 1.0, None, 1.0).is_err());
        assert!(ModelSpec::new(Variant::Boltzmann, 1.0, Some(1.0), 1.0).is_err());
        let m = ModelSpec::stock_theta(2.0, 1.5, 1.0).unwrap();
        assert_eq!(m.theta(), Some(1.5));
        assert_eq!(m.tau_market(), 3.0);
        assert_eq!(m.correlation_time(), 2.0);
        for v in Variant::ALL {
            assert_eq!(Variant::from_name(v.name()), Some(v));
        }
    }

    #[test]
    fn shapes_are_normalized_at_origin() {
        for m in every_model() {
            assert_eq!(
                observable_shape(&m, c(0.0, 0.0)).unwrap(),
                c(1.0, 0.0),
                "{:?}",
                m.variant()
            );
            assert_eq!(
                force_shape(&m, c(0.0, 0.0)).unwrap(),
                c(1.0, 0.0),
                "{:?}",
                m.variant()
            );
        }
    }

    #[test]
    fn observable_examples() {
        let lin = ModelSpec::linear_self_similar(1.0, 1.0).unwrap();
        assert_eq!(observable_shape(&lin, c(0.0, 0.0)).unwrap().re, 1.0);
        // θ = 2 reduces to 1/√(1 + (τ_r p)²).
        let light = ModelSpec::stock_theta(0.8, 2.0, 1.0).unwrap();
        let y = observable_shape(&light, c(1.0 / 0.8, 0.0)).unwrap();
        assert_abs_diff_eq!(y.re, core::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(y.im, 0.0);
        let boltz = ModelSpec::boltzmann(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            observable_shape(&boltz, c(1e-300, 0.0)).unwrap().re,
            1.0,
            epsilon = 1e-15
        );
        let diff = ModelSpec::differential(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            observable_shape(&diff, c(1e-300, 0.0)).unwrap().re,
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn boltzmann_shape_matches_direct_lambert_form() {
        // exp{W₀[exp(1 + x)] − 1 − x} with the plain W₀ evaluator.
        let m = ModelSpec::boltzmann(2.0, 1.0).unwrap();
        for p in [0.1, 0.5, 1.0, 3.0] {
            let x = 2.0 * p;
            let w = crate::specfun::lambert_w0((1.0 + x).exp()).unwrap();
            let direct = (w - 1.0 - x).exp();
            assert_abs_diff_eq!(
                observable_shape(&m, c(p, 0.0)).unwrap().re,
                direct,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn differential_shape_matches_direct_lambert_form() {
        // 1/y = −1 − W₋₁[−2 exp(−2 − x)]
        let m = ModelSpec::differential(0.5, 1.0).unwrap();
        for p in [0.2, 1.0, 4.0, 10.0] {
            let x = 0.5 * p;
            let w = crate::specfun::lambert_wm1(-2.0 * (-2.0 - x).exp()).unwrap();
            let direct = 1.0 / (-1.0 - w);
            assert_abs_diff_eq!(
                observable_shape(&m, c(p, 0.0)).unwrap().re,
                direct,
                epsilon = 1e-12
            );
            let g = force_shape(&m, c(p, 0.0)).unwrap().re;
            assert_abs_diff_eq!(g, -1.0 - w - x, epsilon = 1e-12);
        }
    }

    #[test]
    fn force_examples() {
        let white = ModelSpec::white_noise(2.0, 1.0).unwrap();
        for p in [c(0.3, 0.0), c(1.0, 5.0), c(0.0, 2.0)] {
            assert_eq!(force_shape(&white, p).unwrap(), c(1.0, 0.0));
        }
        let lin = ModelSpec::linear_self_similar(1.3, 1.0).unwrap();
        for p in [c(0.3, 0.0), c(1.0, 5.0), c(0.2, -3.0)] {
            assert_eq!(
                force_shape(&lin, p).unwrap(),
                observable_shape(&lin, p).unwrap()
            );
        }
        // W₀(e¹¹) − 10 ≈ −1.18: the Boltzmann force turns negative.
        let boltz = ModelSpec::boltzmann(1.0, 1.0).unwrap();
        let g = force_shape(&boltz, c(10.0, 0.0)).unwrap().re;
        assert_abs_diff_eq!(g, 8.822_674_899_385_971 - 10.0, epsilon = 1e-12);
        assert!(g < 0.0);
    }

    #[test]
    fn domain_and_capability_errors() {
        let lin = ModelSpec::linear_self_similar(1.0, 1.0).unwrap();
        assert!(matches!(
            observable_shape(&lin, c(-0.1, 0.0)),
            Err(Error::Domain { .. })
        ));
        let boltz = ModelSpec::boltzmann(1.0, 1.0).unwrap();
        assert!(matches!(
            observable_shape(&boltz, c(0.5, 1.0)),
            Err(Error::Capability(_))
        ));
        let frac = ModelSpec::fractional(1.0, 0.5, 1.0).unwrap();
        assert!(matches!(
            force_shape(&frac, c(0.5, 1.0)),
            Err(Error::Capability(_))
        ));
        assert!(matches!(
            solve_functional_shape(&lin, 1.0),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn closure_on_real_and_complex_grids() {
        let mut seed = 0x2545_f491_4f6c_dd1du64;
        let mut uniform = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for m in every_model() {
            let tau = m.correlation_time();
            for p in log_grid(100, 1e-3 / tau, 1e3 / tau) {
                let r = identity_residual(&m, c(p, 0.0)).unwrap();
                assert!(r <= 1e-10, "{:?} p={p} residual {r}", m.variant());
            }
            if m.variant().is_complex_capable() {
                for _ in 0..100 {
                    let p = c(10.0 * uniform() / tau, 40.0 * (uniform() - 0.5) / tau);
                    let r = identity_residual(&m, p).unwrap();
                    assert!(r <= 1e-10, "{:?} p={p} residual {r}", m.variant());
                }
            }
        }
    }

    #[test]
    fn identity_examples() {
        let lin = ModelSpec::linear_self_similar(2.0, 1.0).unwrap();
        assert!(identity_residual(&lin, c(1.5, 0.0)).unwrap() <= 1e-12);
        let boltz = ModelSpec::boltzmann(1.0, 1.0).unwrap();
        assert!(identity_residual(&boltz, c(5.0, 0.0)).unwrap() <= 1e-10);
        let white = ModelSpec::white_noise(0.3, 1.0).unwrap();
        assert!(identity_residual(&white, c(7.0, -2.0)).unwrap() <= 1e-14);
    }

    #[test]
    fn boltzmann_relation_holds() {
        let m = ModelSpec::boltzmann(0.7, 1.0).unwrap();
        for p in log_grid(60, 1e-3, 1e3) {
            assert!(boltzmann_relation_residual(&m, p).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn differential_closure_is_second_order() {
        let m = ModelSpec::differential(1.2, 1.0).unwrap();
        for p in [0.1, 0.7, 2.0, 9.0] {
            let coarse = differential_closure_residual(&m, p, 1e-2).unwrap();
            let fine = differential_closure_residual(&m, p, 5e-3).unwrap();
            let ratio = coarse / fine;
            assert!((3.0..5.0).contains(&ratio), "p={p} ratio {ratio}");
            assert!(differential_closure_residual(&m, p, 1e-4).unwrap() < 1e-7);
        }
    }

    #[test]
    fn stock_theta_limits() {
        let tau_r = 0.9;
        for p in log_grid(40, 1e-2, 1e2) {
            let pc = c(p, 0.0);
            let heavy = ModelSpec::stock_theta(tau_r, 0.0, 1.5).unwrap();
            assert_abs_diff_eq!(
                heavy.observable().image(pc).unwrap().re,
                1.5 * tau_r / (1.0 + tau_r * p),
                epsilon = 1e-12
            );
            let neutral = ModelSpec::stock_theta(tau_r, 1.0, 1.0).unwrap();
            let market = ModelSpec::linear_self_similar(tau_r, 1.0).unwrap();
            assert_abs_diff_eq!(
                observable_shape(&neutral, pc).unwrap().re,
                observable_shape(&market, pc).unwrap().re,
                epsilon = 1e-13
            );
            let light = ModelSpec::stock_theta(tau_r, 2.0, 1.5).unwrap();
            let expected = 1.5 * tau_r / (1.0 + (tau_r * p).powi(2)).sqrt();
            assert_abs_diff_eq!(
                light.observable().image(pc).unwrap().re,
                expected,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn ultra_light_image_has_interior_maximum() {
        let m = ModelSpec::stock_theta(1.0, 3.0, 1.0).unwrap();
        let (p_star, peak) = image_peak(&m).unwrap().expect("θ = 3 has a maximum");
        assert!(p_star > 0.0);
        assert!(peak > m.observable().amplitude());
        for theta in [0.0, 1.0, 1.9] {
            let m = ModelSpec::stock_theta(1.0, theta, 1.0).unwrap();
            assert!(image_peak(&m).unwrap().is_none(), "θ = {theta}");
        }
    }

    #[test]
    fn real_axis_shapes_are_bounded_and_decreasing() {
        for m in every_model() {
            let theta = m.theta().unwrap_or(0.0);
            if (m.variant() == Variant::StockTheta && theta >= 2.0)
                || (m.variant() == Variant::Scaling && theta > 1.0)
            {
                continue;
            }
            let mut last = 1.0;
            for p in log_grid(200, 1e-3, 1e3) {
                let y = observable_shape(&m, c(p / m.correlation_time(), 0.0))
                    .unwrap()
                    .re;
                assert!(y <= last + 1e-15 && y > 0.0, "{:?}", m.variant());
                last = y;
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        let lin = ModelSpec::linear_self_similar(1.0, 1.0).unwrap();
        assert_eq!(closed_form_acf(&lin, 0.0).unwrap(), 1.0);
        let light = ModelSpec::stock_theta(1.0, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            closed_form_acf(&light, 2.404825557695773).unwrap(),
            0.0,
            epsilon = 1e-10
        );
        let white = ModelSpec::white_noise(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            closed_form_acf(&white, 2.0).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-16
        );
        let mid = ModelSpec::stock_theta(1.0, 1.5, 1.0).unwrap();
        assert!(matches!(
            closed_form_acf(&mid, 1.0),
            Err(Error::Capability(_))
        ));
        assert!(!has_closed_form(&mid));
        let boltz = ModelSpec::boltzmann(1.0, 1.0).unwrap();
        assert!(closed_form_acf(&boltz, 1.0).is_err());
        assert!(closed_form_acf(&lin, -1.0).is_err());
    }

    #[test]
    fn classification_intervals() {
        let label = |t| classify_theta(t).unwrap().label;
        assert_eq!(label(0.5), StockLabel::Heavy);
        assert_eq!(label(1.0), StockLabel::Neutral);
        assert_eq!(label(2.5), StockLabel::UltraLight);
        assert_eq!(label(0.0), StockLabel::Heavy);
        assert_eq!(label(2.0 / 3.0), StockLabel::Neutral);
        assert_eq!(label(4.0 / 3.0), StockLabel::Light);
        assert_eq!(label(2.0), StockLabel::UltraLight);
        assert_eq!(label(1.999), StockLabel::Light);
        assert!(classify_theta(-0.1).is_err());
        assert!(classify_theta(f64::INFINITY).is_err());
    }

    #[test]
    fn scaling_above_one_oscillates_log_periodically() {
        // For θ > 1 the only positive solution satisfies y(p)·y(θp) → 1 as
        // p → 0 without y itself tending to 1.
        let m = ModelSpec::scaling(1.0, 3.0, 1.0).unwrap();
        let a = solve_functional_shape(&m, 1e-3).unwrap();
        let b = solve_functional_shape(&m, 3e-3).unwrap();
        assert!(a > 1.0);
        assert_abs_diff_eq!(a * b, 1.0, epsilon = 5e-3);
    }

    #[test]
    fn functional_examples() {
        let f0 = ModelSpec::fractional(1.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            solve_functional_shape(&f0, 1.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let f1 = ModelSpec::fractional(1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            solve_functional_shape(&f1, 2.0).unwrap(),
            2.0f64.sqrt() - 1.0,
            epsilon = 1e-15
        );
        let s1 = ModelSpec::scaling(0.7, 1.0, 1.0).unwrap();
        let lin = ModelSpec::linear_self_similar(0.7, 1.0).unwrap();
        for p in log_grid(50, 1e-3, 1e3) {
            let y = solve_functional_shape(&s1, p).unwrap();
            assert_abs_diff_eq!(
                y,
                observable_shape(&lin, c(p, 0.0)).unwrap().re,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn functional_solvers_reach_residual_across_theta() {
        for theta in [0.0, 0.2, 0.5, 0.8, 0.9, 1.0, 1.2, 1.5, 2.0, 3.0, 5.0] {
            for variant in [Variant::Scaling, Variant::Fractional] {
                let m = ModelSpec::stock(variant, 1.0, theta, 1.0).unwrap();
                for p in log_grid(30, 1e-3, 1e3) {
                    let y = solve_functional_shape(&m, p)
                        .unwrap_or_else(|e| panic!("{variant:?} θ={theta} p={p}: {e}"));
                    assert!(y > 0.0);
                    if variant == Variant::Fractional || theta <= 1.0 {
                        assert!(y <= 1.0);
                    }
                }
            }
        }
    }
}
