//! Bessel functions of the first kind (orders 0 and 1), the normalized
//! lambda functions built from them, and the two real branches of the
//! Lambert W function.
//!
//! The Bessel evaluators switch between three regimes on |x|:
//! a power series up to [`SERIES_LIMIT`], Miller's backward recurrence up to
//! [`ASYMPTOTIC_LIMIT`] and the Hankel asymptotic expansion beyond that.
//! All regimes agree to ~1e-15 at the seams.

use core::f64::consts::{E, FRAC_1_SQRT_2, PI};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_finite, Error, Result};

/// Upper end of the power-series regime.
pub const SERIES_LIMIT: f64 = 8.0;
/// Lower end of the Hankel asymptotic regime.
pub const ASYMPTOTIC_LIMIT: f64 = 25.0;
/// Below this argument Λ₁ is evaluated from its Taylor series.
pub const LAMBDA_SERIES_LIMIT: f64 = 1e-4;

const INV_E: f64 = 1.0 / E;

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> Result<f64> {
    check_finite("bessel_j0", x)?;
    Ok(j0_abs(x.abs()))
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> Result<f64> {
    check_finite("bessel_j1", x)?;
    let v = j1_abs(x.abs());
    Ok(if x < 0.0 { -v } else { v })
}

/// Λ₁(x) = 2·J₁(x)/x, with Λ₁(0) = 1.
///
/// The market return-rate ACF of the linear self-similar model is
/// Λ₁(2τ/τ_R).
pub fn lambda1(x: f64) -> Result<f64> {
    check_finite("lambda1", x)?;
    if x < 0.0 {
        return Err(Error::Domain {
            what: "lambda1",
            value: x,
        });
    }
    if x < LAMBDA_SERIES_LIMIT {
        let x2 = x * x;
        return Ok(1.0 - x2 / 8.0 + x2 * x2 / 192.0);
    }
    Ok(2.0 * j1_abs(x) / x)
}

/// Λ₀(x) = J₀(x/2), with Λ₀(0) = 1.
///
/// Scaled so that Λ₀(2τ/τ_R) = J₀(τ/τ_R): plotted on the same dimensionless
/// lag axis as Λ₁(2τ/τ_R), its first zero sits at τ/τ_R ≈ 2.4048.
pub fn lambda0(x: f64) -> Result<f64> {
    check_finite("lambda0", x)?;
    if x < 0.0 {
        return Err(Error::Domain {
            what: "lambda0",
            value: x,
        });
    }
    Ok(j0_abs(0.5 * x))
}

fn j0_abs(ax: f64) -> f64 {
    if ax <= SERIES_LIMIT {
        series(0, ax)
    } else if ax <= ASYMPTOTIC_LIMIT {
        miller(ax).0
    } else {
        hankel(0, ax)
    }
}

fn j1_abs(ax: f64) -> f64 {
    if ax <= SERIES_LIMIT {
        series(1, ax)
    } else if ax <= ASYMPTOTIC_LIMIT {
        miller(ax).1
    } else {
        hankel(1, ax)
    }
}

/// Σ (−1)^k (x/2)^{2k+n} / (k! (k+n)!) for n ∈ {0, 1}.
pub(crate) fn series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = if order == 0 { 1.0 } else { half };
    let mut sum = term;
    let mut k = 1.0;
    while k < 200.0 {
        term *= q / (k * (k + order as f64));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Miller backward recurrence normalized by J₀ + 2ΣJ₂ₖ = 1. Returns (J₀, J₁).
pub(crate) fn miller(x: f64) -> (f64, f64) {
    let start = (x + 10.0 * x.cbrt() + 30.0) as usize;
    let start = start + (start & 1);
    let two_over_x = 2.0 / x;
    let mut next = 0.0; // j_{k+1}
    let mut cur = 1e-30; // j_k
    let mut norm = 0.0;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        let prev = k as f64 * two_over_x * cur - next;
        next = cur;
        cur = prev;
        // `cur` now holds j_{k-1}.
        if k == 2 {
            j1 = cur;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += cur;
    (cur / norm, j1 / norm)
}

/// Hankel asymptotic expansion for large x.
pub(crate) fn hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    let inv8x = 1.0 / (8.0 * x);
    for k in 1..120 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) * inv8x / k as f64;
        if term.abs() > last {
            break;
        }
        last = term.abs();
        // Signs follow (−1)^{⌊k/2⌋} on the alternating P/Q split.
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let (s, c) = (x.sin(), x.cos());
    let (cos_chi, sin_chi) = if order == 0 {
        ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2)
    } else {
        ((s - c) * FRAC_1_SQRT_2, -(s + c) * FRAC_1_SQRT_2)
    };
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

/// Principal branch W₀ of the Lambert function, defined for x ≥ −1/e.
pub fn lambert_w0(x: f64) -> Result<f64> {
    check_finite("lambert_w0", x)?;
    let x = clamp_branch("lambert_w0", x)?;
    if x == -INV_E {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
    if p < 1e-3 {
        return Ok(branch_series(p));
    }
    let guess = if x < -0.25 {
        branch_series(p)
    } else if x < 3.0 {
        let l = x.ln_1p();
        l * (1.0 - (1.0 + l).ln() / (2.0 + l))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    halley(x, guess)
}

/// Lower real branch W₋₁ of the Lambert function, defined on [−1/e, 0).
pub fn lambert_wm1(x: f64) -> Result<f64> {
    check_finite("lambert_wm1", x)?;
    if x >= 0.0 {
        return Err(Error::Domain {
            what: "lambert_wm1",
            value: x,
        });
    }
    let x = clamp_branch("lambert_wm1", x)?;
    if x == -INV_E {
        return Ok(-1.0);
    }
    let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
    if p < 1e-3 {
        return Ok(branch_series(-p));
    }
    let guess = if x < -0.25 {
        branch_series(-p)
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    halley(x, guess)
}

/// W₀(eᶻ) for real z, computed without forming eᶻ (solves w + ln w = z).
pub fn lambert_w0_exp(z: f64) -> Result<f64> {
    check_finite("lambert_w0_exp", z)?;
    if z < 1.0 {
        return lambert_w0(z.exp());
    }
    let mut w = if z < 3.0 {
        0.5 * (z + 1.0) - 0.25 * (z - 1.0).ln_1p()
    } else {
        z - z.ln()
    };
    for _ in 0..60 {
        let f = w + w.ln() - z;
        let d1 = 1.0 + 1.0 / w;
        let d2 = -1.0 / (w * w);
        let step = f / (d1 - 0.5 * f * d2 / d1);
        w -= step;
        if step.abs() <= 1e-15 * w.abs() {
            return Ok(w);
        }
    }
    Err(Error::Solver {
        iterations: 60,
        residual: (w + w.ln() - z).abs(),
    })
}

/// −W₋₁(−e^{−z}) for z ≥ 1, computed without forming e^{−z}
/// (solves v − ln v = z on v ≥ 1).
pub fn lambert_wm1_exp(z: f64) -> Result<f64> {
    check_finite("lambert_wm1_exp", z)?;
    if z < 1.0 {
        return Err(Error::Domain {
            what: "lambert_wm1_exp",
            value: z,
        });
    }
    if z < 1.5 {
        return lambert_wm1(-(-z).exp()).map(|w| -w);
    }
    let mut v = z + z.ln();
    for _ in 0..60 {
        let f = v - v.ln() - z;
        let d1 = 1.0 - 1.0 / v;
        let d2 = 1.0 / (v * v);
        let step = f / (d1 - 0.5 * f * d2 / d1);
        v -= step;
        if step.abs() <= 1e-15 * v.abs() {
            return Ok(v);
        }
    }
    Err(Error::Solver {
        iterations: 60,
        residual: (v - v.ln() - z).abs(),
    })
}

fn clamp_branch(what: &'static str, x: f64) -> Result<f64> {
    // −1/e itself is not representable; accept a few ulps below it.
    if x < -INV_E {
        if x >= -INV_E * (1.0 + 4.0 * f64::EPSILON) {
            return Ok(-INV_E);
        }
        return Err(Error::Domain { what, value: x });
    }
    Ok(x)
}

/// Expansion of W about the branch point in p = ±√(2(ex + 1)).
fn branch_series(p: f64) -> f64 {
    -1.0 + p
        * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0 + p * 769.0 / 17280.0))))
}

fn halley(x: f64, mut w: f64) -> Result<f64> {
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            return Ok(w);
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-14 * (1.0 + w.abs()) {
            return Ok(w);
        }
    }
    Err(Error::Solver {
        iterations: 64,
        residual: (w * w.exp() - x).abs(),
    })
}
