//! White-noise price dynamics and conversions between prices and return
//! rates. Prices are always updated in log space.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::noise::{initial_values, path_rng, PathEnsemble};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub mu: f64,
    pub sigma: f64,
    pub variance_r: f64,
    pub m0: f64,
}

impl MarketParams {
    pub fn new(mu: f64, sigma: f64, variance_r: f64, m0: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(domain("mu", mu));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(domain("sigma", sigma));
        }
        if !(variance_r > 0.0 && variance_r.is_finite()) {
            return Err(domain("<R^2>", variance_r));
        }
        check_m0(m0)?;
        Ok(Self {
            mu,
            sigma,
            variance_r,
            m0,
        })
    }

    pub fn tau(&self) -> Result<f64> {
        tau_from_volatility(self.sigma, self.variance_r)
    }
}

fn domain(what: &'static str, value: f64) -> LabError {
    gle_core::Error::Domain { what, value }.into()
}

fn check_m0(m0: f64) -> Result<()> {
    if m0 > 0.0 && m0.is_finite() {
        Ok(())
    } else {
        Err(domain("M0", m0))
    }
}

/// τ_R = σ²/(2⟨R²⟩).
pub fn tau_from_volatility(sigma: f64, variance_r: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(domain("sigma", sigma));
    }
    if !(variance_r > 0.0 && variance_r.is_finite()) {
        return Err(domain("<R^2>", variance_r));
    }
    Ok(sigma * sigma / (2.0 * variance_r))
}

/// σ = √(2⟨R²⟩τ_R).
pub fn sigma_from_tau(tau: f64, variance_r: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(domain("tau_R", tau));
    }
    if !(variance_r > 0.0 && variance_r.is_finite()) {
        return Err(domain("<R^2>", variance_r));
    }
    Ok((2.0 * variance_r * tau).sqrt())
}

/// Price paths M_0..M_N from Wiener increments covering `horizon`.
pub fn simulate_gbm(
    params: &MarketParams,
    increments: &PathEnsemble,
    horizon: f64,
) -> Result<PathEnsemble> {
    let h = increments.h;
    let n = increments.n_samples();
    let covered = n as f64 * h;
    if (covered - horizon).abs() > 1e-9 * horizon.abs().max(h) {
        return Err(LabError::Input(format!(
            "{n} increments of {h} cover {covered}, not the horizon {horizon}"
        )));
    }
    let ln_m0 = params.m0.ln();
    let paths = increments
        .paths
        .par_iter()
        .map(|dw| {
            let mut w = 0.0;
            let mut out = Vec::with_capacity(n + 1);
            out.push(params.m0);
            for (k, dx) in dw.iter().enumerate() {
                w += dx;
                let t = (k + 1) as f64 * h;
                out.push((ln_m0 + params.mu * t + params.sigma * w).exp());
            }
            out
        })
        .collect();
    Ok(increments.with_paths(paths))
}

/// ln M_{n+1} = ln M_n + h(μ + R_n), starting from M0.
pub fn price_from_returns(returns: &PathEnsemble, mu: f64, m0: f64) -> Result<PathEnsemble> {
    check_m0(m0)?;
    if !mu.is_finite() {
        return Err(domain("mu", mu));
    }
    let h = returns.h;
    let paths = returns
        .paths
        .par_iter()
        .map(|r| {
            let mut ln_m = m0.ln();
            let mut out = Vec::with_capacity(r.len() + 1);
            out.push(m0);
            for x in r {
                ln_m += h * (mu + x);
                out.push(ln_m.exp());
            }
            out
        })
        .collect();
    Ok(returns.with_paths(paths))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detrend {
    SampleMean,
    Given(f64),
}

/// R_n = (ln M_{n+1} − ln M_n)/h − μ.
pub fn returns_from_prices(prices: &PathEnsemble, detrend: Detrend) -> Result<PathEnsemble> {
    let h = prices.h;
    let mut paths = Vec::with_capacity(prices.n_paths());
    for (p, path) in prices.paths.iter().enumerate() {
        if let Some((index, &value)) = path
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(LabError::Price {
                path: p,
                index,
                value,
            });
        }
        let mut r: Vec<f64> = path
            .windows(2)
            .map(|w| (w[1].ln() - w[0].ln()) / h)
            .collect();
        let mu = match detrend {
            Detrend::Given(mu) => mu,
            Detrend::SampleMean if r.is_empty() => 0.0,
            Detrend::SampleMean => r.iter().sum::<f64>() / r.len() as f64,
        };
        r.iter_mut().for_each(|x| *x -= mu);
        paths.push(r);
    }
    Ok(prices.with_paths(paths))
}

/// Stationary exponential-ACF return paths sampled exactly at step h.
pub fn simulate_white_returns(
    tau: f64,
    variance: f64,
    h: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(domain("tau_R", tau));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(domain("<R^2>", variance));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(domain("step", h));
    }
    if n_paths == 0 {
        return Err(LabError::Input("n_paths must be at least 1".into()));
    }
    let rho = (-h / tau).exp();
    let sd = (variance * -(-2.0 * h / tau).exp_m1()).sqrt();
    let r0 = initial_values(n_paths, variance, seed);
    let paths = r0
        .par_iter()
        .enumerate()
        .map(|(i, &start)| {
            let mut rng = path_rng(seed, i as u64);
            let mut x = start;
            let mut out = Vec::with_capacity(n_steps);
            for _ in 0..n_steps {
                out.push(x);
                x = rho * x + sd * rng.sample::<f64, _>(StandardNormal);
            }
            out
        })
        .collect();
    Ok(PathEnsemble { h, seed, paths })
}

/// Variance of ln-price changes over `span` samples, pooled over
/// non-overlapping blocks of every path, around the pooled mean.
fn block_variance(prices: &PathEnsemble, span: usize) -> Result<f64> {
    let mut changes = Vec::new();
    for path in &prices.paths {
        let mut start = 0;
        while start + span < path.len() {
            changes.push(path[start + span].ln() - path[start].ln());
            start += span;
        }
    }
    if changes.len() < 2 {
        return Err(LabError::Input(format!(
            "paths are too short for blocks of {span} samples"
        )));
    }
    let n = changes.len() as f64;
    let mean = changes.iter().sum::<f64>() / n;
    Ok(changes.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// (V(2Δ) − V(Δ))/Δ for Δ = `span`·h: the long-horizon diffusion rate of
/// ln M, free of the constant short-time offset.
pub fn variance_growth_rate(prices: &PathEnsemble, span: usize) -> Result<f64> {
    if span == 0 {
        return Err(LabError::Input(
            "block span must be at least one step".into(),
        ));
    }
    let single = block_variance(prices, span)?;
    let double = block_variance(prices, 2 * span)?;
    Ok((double - single) / (span as f64 * prices.h))
}
