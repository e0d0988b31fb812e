//! Sample ACFs and least-squares fits of the stock model.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use gle_core::laplace::invert_uniform;
use gle_core::models::classify_theta;
use gle_core::{AcfSeries, ModelSpec, StockClass};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{LabError, Result};
use crate::noise::PathEnsemble;

/// Largest θ searched by the fit.
pub const THETA_MAX: f64 = 5.0;
/// θ spacing of the cached model tables.
pub const THETA_LATTICE: f64 = 0.01;
/// Spacing of the cached tables in units of τ_r.
pub const TABLE_STEP: f64 = 0.01;
/// Table extent in units of τ_r; bounds window/τ_r.
pub const TABLE_SPAN: f64 = 30.0;
/// Accuracy target of the table inversions.
pub const TABLE_ACCURACY: f64 = 1e-6;
/// Relative curvature below which a fit is reported as degenerate.
pub const DEGENERACY_CURVATURE: f64 = 1e-6;

const COARSE_THETA_STEP: f64 = 0.1;
const COARSE_TAU_NODES: usize = 41;
const REFINE_ROUNDS: usize = 500;
const REFINE_TOL: f64 = 1e-7;

/// Lag products Σ x_i·x_{i+k} for k = 0..=max_lag.
fn lag_products(series: &[f64], max_lag: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = series.len();
    let size = (n + max_lag + 1).next_power_of_two();
    let mut buf: Vec<Complex64> = series
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let mut out: Vec<f64> = buf[..=max_lag].iter().map(|z| z.re / size as f64).collect();
    out[0] = series.iter().map(|x| x * x).sum();
    out
}

fn check_length(len: usize, max_lag: usize) -> Result<()> {
    if len < 4 * max_lag.max(1) {
        return Err(LabError::Input(format!(
            "series of {len} samples is too short for {max_lag} lags"
        )));
    }
    Ok(())
}

/// Biased (divide-by-N) sample ACF. The series is taken as zero-centered;
/// no mean is removed.
pub fn sample_acf(series: &[f64], h: f64, max_lag: usize) -> Result<AcfSeries> {
    check_length(series.len(), max_lag)?;
    let sums = lag_products(series, max_lag, &mut FftPlanner::new());
    finish(sums, series.len() as f64, h)
}

fn finish(sums: Vec<f64>, count: f64, h: f64) -> Result<AcfSeries> {
    let c0 = sums[0] / count;
    if !(c0 > 0.0) {
        return Err(LabError::ZeroVariance);
    }
    let values = sums.iter().map(|s| s / sums[0]).collect();
    Ok(AcfSeries::new(h, values, c0)?)
}

/// Pooled ACF of an ensemble: lag products summed over paths.
pub fn ensemble_acf(ensemble: &PathEnsemble, max_lag: usize) -> Result<AcfSeries> {
    let n = ensemble.n_samples();
    check_length(n, max_lag)?;
    if ensemble.paths.iter().any(|p| p.len() != n) {
        return Err(LabError::Input("paths have different lengths".into()));
    }
    let per_path = path_lag_products(ensemble, max_lag);
    let mut sums = vec![0.0; max_lag + 1];
    for p in &per_path {
        for (s, v) in sums.iter_mut().zip(p) {
            *s += v;
        }
    }
    finish(sums, (n * ensemble.n_paths()) as f64, ensemble.h)
}

fn path_lag_products(ensemble: &PathEnsemble, max_lag: usize) -> Vec<Vec<f64>> {
    ensemble
        .paths
        .par_iter()
        .map_init(FftPlanner::new, |planner, p| {
            lag_products(p, max_lag, planner)
        })
        .collect()
}

/// Mean and standard error over paths of each path's normalized ACF.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfSpread {
    pub step: f64,
    pub mean: Vec<f64>,
    pub standard_error: Vec<f64>,
}

pub fn acf_spread(ensemble: &PathEnsemble, max_lag: usize) -> Result<AcfSpread> {
    check_length(ensemble.n_samples(), max_lag)?;
    let k = ensemble.n_paths();
    if k < 2 {
        return Err(LabError::Input("a spread needs at least two paths".into()));
    }
    let per_path = path_lag_products(ensemble, max_lag);
    let mut mean = vec![0.0; max_lag + 1];
    let mut square = vec![0.0; max_lag + 1];
    for p in &per_path {
        if !(p[0] > 0.0) {
            return Err(LabError::ZeroVariance);
        }
        for j in 0..=max_lag {
            let v = p[j] / p[0];
            mean[j] += v;
            square[j] += v * v;
        }
    }
    let kf = k as f64;
    let standard_error = mean
        .iter()
        .zip(&square)
        .map(|(m, s)| ((s - m * m / kf).max(0.0) / (kf - 1.0) / kf).sqrt())
        .collect();
    mean.iter_mut().for_each(|m| *m /= kf);
    Ok(AcfSpread {
        step: ensemble.h,
        mean,
        standard_error,
    })
}

/// Normalized stock ACF f_θ(s), s = t/τ_r, on a fixed grid.
#[derive(Debug)]
struct ShapeTable {
    values: Vec<f64>,
}

impl ShapeTable {
    fn build(theta: f64) -> Result<Self> {
        let model = ModelSpec::stock_theta(1.0, theta, 1.0)?;
        let len = (TABLE_SPAN / TABLE_STEP).round() as usize + 1;
        let series = invert_uniform(&model.observable(), TABLE_STEP, len, TABLE_ACCURACY)?;
        Ok(Self {
            values: series.values,
        })
    }

    fn at(&self, s: f64) -> f64 {
        let x = s / TABLE_STEP;
        let i = (x.floor() as usize).min(self.values.len() - 2);
        let w = x - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

/// Read-mostly cache of model tables keyed by θ-lattice index.
#[derive(Debug, Default)]
pub struct ShapeCache {
    tables: RwLock<HashMap<usize, Arc<ShapeTable>>>,
}

impl ShapeCache {
    pub fn global() -> &'static ShapeCache {
        static CACHE: OnceLock<ShapeCache> = OnceLock::new();
        CACHE.get_or_init(ShapeCache::default)
    }

    fn table(&self, index: usize) -> Result<Arc<ShapeTable>> {
        if let Some(t) = self.tables.read().expect("cache lock").get(&index) {
            return Ok(t.clone());
        }
        let table = Arc::new(ShapeTable::build(index as f64 * THETA_LATTICE)?);
        Ok(self
            .tables
            .write()
            .expect("cache lock")
            .entry(index)
            .or_insert(table)
            .clone())
    }

    /// Builds the tables for a range of lattice indices in parallel.
    fn prefetch(&self, indices: &[usize]) -> Result<()> {
        let missing: Vec<usize> = {
            let tables = self.tables.read().expect("cache lock");
            indices
                .iter()
                .copied()
                .filter(|i| !tables.contains_key(i))
                .collect()
        };
        let built = missing
            .par_iter()
            .map(|&i| ShapeTable::build(i as f64 * THETA_LATTICE).map(|t| (i, Arc::new(t))))
            .collect::<Result<Vec<_>>>()?;
        let mut tables = self.tables.write().expect("cache lock");
        for (i, t) in built {
            tables.entry(i).or_insert(t);
        }
        Ok(())
    }

    /// f_θ at s = t/τ_r, linear in θ between lattice nodes.
    pub fn shape(&self, theta: f64, s: f64) -> Result<f64> {
        Ok(self.curve(theta)?.at(s))
    }

    fn curve(&self, theta: f64) -> Result<Curve> {
        if !(0.0..=THETA_MAX).contains(&theta) {
            return Err(gle_core::Error::Domain {
                what: "theta",
                value: theta,
            }
            .into());
        }
        let x = theta / THETA_LATTICE;
        let lo = (x.floor() as usize).min((THETA_MAX / THETA_LATTICE).round() as usize - 1);
        let w = x - lo as f64;
        Ok(Curve {
            lo: self.table(lo)?,
            hi: self.table(lo + 1)?,
            w,
        })
    }
}

struct Curve {
    lo: Arc<ShapeTable>,
    hi: Arc<ShapeTable>,
    w: f64,
}

impl Curve {
    fn at(&self, s: f64) -> f64 {
        self.lo.at(s) * (1.0 - self.w) + self.hi.at(s) * self.w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub tau_r: f64,
    pub theta: f64,
    pub variance: f64,
    /// Root-mean-square misfit over the fitted lags.
    pub residual: f64,
    pub class: StockClass,
    pub lags_used: usize,
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

struct Objective<'a> {
    cache: &'a ShapeCache,
    lags: Vec<f64>,
    values: &'a [f64],
}

impl Objective<'_> {
    /// Mean squared misfit at (θ, ln τ_r).
    fn eval(&self, theta: f64, ln_tau: f64) -> Result<f64> {
        let curve = self.cache.curve(theta)?;
        let inv = (-ln_tau).exp();
        let sum: f64 = self
            .lags
            .iter()
            .zip(self.values)
            .map(|(t, v)| (curve.at(t * inv) - v).powi(2))
            .sum();
        Ok(sum / self.lags.len() as f64)
    }
}

fn golden(mut a: f64, mut b: f64, f: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..60 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
        if b - a < 1e-7 {
            break;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// Least-squares fit of (τ_r, θ) to a normalized ACF over lags ≤ `lag_window`.
pub fn fit_theta(acf: &AcfSeries, lag_window: f64) -> Result<FitReport> {
    fit_theta_with(ShapeCache::global(), acf, lag_window)
}

pub fn fit_theta_with(cache: &ShapeCache, acf: &AcfSeries, lag_window: f64) -> Result<FitReport> {
    let h = acf.step;
    if !(lag_window > 0.0 && lag_window.is_finite()) {
        return Err(LabError::Input(format!(
            "lag window {lag_window} must be positive"
        )));
    }
    let count = ((lag_window / h + 1e-9).floor() as usize + 1).min(acf.len());
    if count < 4 {
        return Err(LabError::Input(format!(
            "lag window {lag_window} holds only {count} lags"
        )));
    }
    let window = (count - 1) as f64 * h;
    let values = &acf.values[..count];
    let lags: Vec<f64> = (0..count).map(|j| j as f64 * h).collect();
    let objective = Objective {
        cache,
        lags,
        values,
    };

    let tau_lo = (2.0 * h).max(window / TABLE_SPAN);
    let tau_hi = window;
    if !(tau_lo < tau_hi) {
        return Err(LabError::Input(format!(
            "lag window {window} is too short for step {h}"
        )));
    }
    let (ln_lo, ln_hi) = (tau_lo.ln(), tau_hi.ln());

    let n_theta = (THETA_MAX / COARSE_THETA_STEP).round() as usize;
    let lattice_per_coarse = (COARSE_THETA_STEP / THETA_LATTICE).round() as usize;
    let indices: Vec<usize> = (0..=n_theta * lattice_per_coarse)
        .step_by(lattice_per_coarse)
        .collect();
    cache.prefetch(&indices)?;

    let ln_step = (ln_hi - ln_lo) / (COARSE_TAU_NODES - 1) as f64;
    let rows = (0..=n_theta)
        .into_par_iter()
        .map(|i| {
            let theta = i as f64 * COARSE_THETA_STEP;
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..COARSE_TAU_NODES {
                let ln_tau = ln_lo + k as f64 * ln_step;
                let v = objective.eval(theta, ln_tau)?;
                if v < best.0 {
                    best = (v, ln_tau);
                }
            }
            Ok((theta, best.1, best.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = rows[0];
    for &row in &rows[1..] {
        // Ascending θ: strict improvement keeps ties at the smaller θ.
        if row.2 < best.2 {
            best = row;
        }
    }

    let (mut theta, mut ln_tau, mut value) = best;
    let mut theta_span = COARSE_THETA_STEP;
    let mut tau_span = ln_step;
    for _ in 0..REFINE_ROUNDS {
        let (a, b) = (
            (theta - theta_span).max(0.0),
            (theta + theta_span).min(THETA_MAX),
        );
        let (t, v) = golden(a, b, |x| objective.eval(x, ln_tau))?;
        let theta_move = if v < value { (t - theta).abs() } else { 0.0 };
        if v < value {
            theta = t;
            value = v;
        }
        let (a, b) = (
            (ln_tau - tau_span).max(ln_lo),
            (ln_tau + tau_span).min(ln_hi),
        );
        let (l, v) = golden(a, b, |x| objective.eval(theta, x))?;
        let tau_move = if v < value { (l - ln_tau).abs() } else { 0.0 };
        if v < value {
            ln_tau = l;
            value = v;
        }
        if theta_move < REFINE_TOL && tau_move < REFINE_TOL {
            break;
        }
        theta_span = (3.0 * theta_move).clamp(REFINE_TOL, COARSE_THETA_STEP);
        tau_span = (3.0 * tau_move).clamp(REFINE_TOL, ln_step);
    }

    let curvature = relative_curvature(&objective, theta, ln_tau, value)?;
    let degenerate = curvature < DEGENERACY_CURVATURE;
    let tau_r = ln_tau.exp();
    let mut warnings = Vec::new();
    if degenerate {
        warnings.push(format!(
            "objective is flat near the optimum (relative curvature {curvature:.3e})"
        ));
    }
    if window < 3.0 * tau_r {
        warnings.push(format!(
            "lag window {window} is shorter than 3 fitted correlation times ({:.6})",
            3.0 * tau_r
        ));
    }
    Ok(FitReport {
        tau_r,
        theta,
        variance: acf.variance,
        residual: value.sqrt(),
        class: classify_theta(theta)?,
        lags_used: count,
        degenerate,
        warnings,
    })
}

/// Smallest second difference along either coordinate, relative to the
/// objective level around the optimum.
fn relative_curvature(
    objective: &Objective<'_>,
    theta: f64,
    ln_tau: f64,
    value: f64,
) -> Result<f64> {
    let dt = 0.05;
    let (lo, hi) = if theta - dt < 0.0 {
        (theta, theta + 2.0 * dt)
    } else {
        (theta - dt, (theta + dt).min(THETA_MAX))
    };
    let mid = 0.5 * (lo + hi);
    let f_mid = if mid == theta {
        value
    } else {
        objective.eval(mid, ln_tau)?
    };
    let (f_lo, f_hi) = (objective.eval(lo, ln_tau)?, objective.eval(hi, ln_tau)?);
    let theta_curv =
        (f_lo + f_hi - 2.0 * f_mid).abs() / (f_lo + f_hi + 2.0 * f_mid + f64::MIN_POSITIVE);
    let dl = 0.05;
    let (g_lo, g_hi) = (
        objective.eval(theta, ln_tau - dl)?,
        objective.eval(theta, ln_tau + dl)?,
    );
    let tau_curv =
        (g_lo + g_hi - 2.0 * value).abs() / (g_lo + g_hi + 2.0 * value + f64::MIN_POSITIVE);
    Ok(theta_curv.min(tau_curv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use gle_core::models::closed_form_acf;
    use gle_core::StockLabel;

    fn exact(theta: f64, tau: f64, h: f64, len: usize) -> AcfSeries {
        let m = ModelSpec::stock_theta(tau, theta, 1.0).unwrap();
        AcfSeries::new(
            h,
            (0..len)
                .map(|j| closed_form_acf(&m, j as f64 * h).unwrap())
                .collect(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn exact_shapes_are_recovered() {
        let f = fit_theta(&exact(0.0, 1.3, 0.05, 201), 10.0).unwrap();
        assert!(f.theta <= 0.05, "{f:?}");
        assert!((f.tau_r / 1.3 - 1.0).abs() < 0.02, "{f:?}");
        assert_eq!(f.class.label, StockLabel::Heavy);
        let f = fit_theta(&exact(2.0, 0.7, 0.05, 201), 10.0).unwrap();
        assert!((f.theta - 2.0).abs() <= 0.05, "{f:?}");
        assert!((f.tau_r / 0.7 - 1.0).abs() < 0.02, "{f:?}");
        let f = fit_theta(&exact(1.0, 1.0, 0.05, 201), 10.0).unwrap();
        assert!((f.theta - 1.0).abs() <= 0.05, "{f:?}");
        assert_eq!(f.class.label, StockLabel::Neutral);
        assert!(f.residual < 1e-3 && !f.degenerate);
    }

    #[test]
    fn acf_examples() {
        let n = 4096;
        let h = 0.1;
        let w = 0.7;
        let xs: Vec<f64> = (0..n).map(|j| (w * j as f64 * h).cos()).collect();
        let a = sample_acf(&xs, h, 50).unwrap();
        assert!((a.variance - 0.5).abs() < 1e-3);
        for j in 0..50 {
            let expected = (w * j as f64 * h).cos() * (1.0 - j as f64 / n as f64);
            assert!((a.values[j] - expected).abs() < 2e-3, "lag {j}");
        }
        assert!(matches!(
            sample_acf(&[0.0; 64], 1.0, 4),
            Err(LabError::ZeroVariance)
        ));
        assert!(sample_acf(&[1.0; 10], 1.0, 4).is_err());
    }

    #[test]
    fn fft_products_match_direct_sums() {
        let xs: Vec<f64> = (0..300).map(|j| ((j * 37) % 17) as f64 - 8.0).collect();
        let p = lag_products(&xs, 20, &mut FftPlanner::new());
        for k in 0..=20 {
            let direct: f64 = xs[..300 - k].iter().zip(&xs[k..]).map(|(a, b)| a * b).sum();
            assert!((p[k] - direct).abs() < 1e-8 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn scale_invariance() {
        let a = exact(2.0, 0.8, 0.05, 201);
        let b = AcfSeries::new(a.step, a.values.clone(), 9.0 * a.variance).unwrap();
        let fa = fit_theta(&a, 10.0).unwrap();
        let fb = fit_theta(&b, 10.0).unwrap();
        assert_eq!(
            (fa.theta, fa.tau_r, fa.class.label),
            (fb.theta, fb.tau_r, fb.class.label)
        );
        assert_eq!(fb.variance, 9.0 * fa.variance);
    }

    #[test]
    fn flat_acf_is_degenerate() {
        let a = AcfSeries::new(0.1, vec![1.0; 101], 1.0).unwrap();
        let f = fit_theta(&a, 10.0).unwrap();
        assert!(f.degenerate || !f.warnings.is_empty(), "{f:?}");
    }
}
