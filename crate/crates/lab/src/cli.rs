//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gle_core::laplace::invert_uniform;
use gle_core::models::{
    boltzmann_relation_residual, closed_form_acf, differential_closure_residual, has_closed_form,
    identity_residual,
};
use gle_core::specfun::{lambda0, lambda1};
use gle_core::volterra::propagate_model;
use gle_core::{AcfSeries, ModelSpec, Variant};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ensemble::simulate_gle_ensemble;
use crate::error::{LabError, Result};
use crate::estimate::{ensemble_acf, fit_theta, sample_acf};
use crate::io::{format_number, read_prices_file, write_file, write_pairs, write_table, RunConfig};
use crate::market::{
    price_from_returns, returns_from_prices, sigma_from_tau, simulate_gbm, Detrend, MarketParams,
};
use crate::noise::{generate_wiener_increments, PathEnsemble, INITIAL_VALUE_STREAM};

pub const CAPABILITY_MATRIX: &str = "\
Capabilities (model: closed / laplace / volterra / simulate / audit)
  white         yes / yes / yes / yes / real+complex
  linear        yes / yes / yes / yes / real+complex
  stock         theta in {0,1,2} / yes / yes / yes / real+complex
  scaling       no / no / no / no / real
  fractional    no / no / no / no / real
  boltzmann     no / no / yes / no / real
  differential  no / no / yes / no / real
  gbm           simulate only (--sigma, or --tau with --variance)";

#[derive(Debug, Parser)]
#[command(name = "gle-lab", version, about = "GLE market and stock return models", after_help = CAPABILITY_MATRIX)]
pub struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for randomized commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Pass/fail threshold for audits.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Λ₁ and Λ₀ against τ/τ_R.
    #[command(after_help = CAPABILITY_MATRIX)]
    Fig1 {
        #[arg(long, default_value_t = 1.0)]
        tau_market: f64,
        #[arg(long, default_value_t = 100.0)]
        max_lag_ratio: f64,
        #[arg(long, default_value_t = 10001)]
        points: usize,
    },
    /// Normalized ACF of a model by the chosen route.
    #[command(after_help = CAPABILITY_MATRIX)]
    Acf {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = Route::Laplace)]
        route: Route,
        /// Lag spacing in time units.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Number of lags after zero.
        #[arg(long, default_value_t = 1000)]
        lags: usize,
        #[arg(long, default_value_t = 1e-8)]
        accuracy: f64,
    },
    /// Simulated return or price paths with an ACF summary.
    #[command(after_help = CAPABILITY_MATRIX)]
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 4)]
        paths: usize,
        /// Steps per path; a power of two.
        #[arg(long, default_value_t = 1024)]
        steps: usize,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Volatility for gbm.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        m0: Option<f64>,
        /// Emit prices instead of return rates.
        #[arg(long)]
        prices: bool,
        /// Lags in the ACF summary.
        #[arg(long, default_value_t = 100)]
        summary_lags: usize,
    },
    /// Fit the stock model to a price series.
    #[command(after_help = CAPABILITY_MATRIX)]
    Estimate {
        /// CSV with header `t,price` or `price`.
        input: PathBuf,
        /// Sampling step; required without a time column.
        #[arg(long)]
        step: Option<f64>,
        /// `sample-mean` or a mean return rate.
        #[arg(long, default_value = "sample-mean")]
        detrend: String,
        /// Fit window in time units; defaults to a quarter of the series, at most 500 lags.
        #[arg(long)]
        window: Option<f64>,
    },
    /// Closure residuals of a model on a grid of p.
    #[command(after_help = CAPABILITY_MATRIX)]
    Audit {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 1e-3)]
        p_min: f64,
        #[arg(long, default_value_t = 1e3)]
        p_max: f64,
        /// Add random right-half-plane points for complex-capable models.
        #[arg(long)]
        complex: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Route {
    Closed,
    Laplace,
    Volterra,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// white, linear, stock, scaling, fractional, boltzmann, differential (simulate also takes gbm).
    #[arg(long, default_value = "linear")]
    pub model: String,
    /// τ_R for market models, τ_r for stock models.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// ⟨R²⟩ or ⟨r²⟩.
    #[arg(long)]
    pub variance: Option<f64>,
}

struct Context {
    config: RunConfig,
    seed: Option<u64>,
    out_dir: PathBuf,
    tolerance: f64,
}

impl Context {
    fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            LabError::Input("randomized commands need --seed or a config seed".into())
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Outcome of a command: text for stdout and an exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub message: String,
    pub code: i32,
}

impl ModelArgs {
    fn build(&self, config: &RunConfig) -> Result<ModelSpec> {
        let variant = Variant::from_name(&self.model).ok_or_else(|| {
            LabError::Input(format!(
                "unknown model {:?}\n{CAPABILITY_MATRIX}",
                self.model
            ))
        })?;
        let tau = self.tau.or(config.tau).unwrap_or(1.0);
        let variance = self.variance.or(config.variance).unwrap_or(1.0);
        let model = if variant.is_stock() {
            let theta = self.theta.or(config.theta).unwrap_or(1.0);
            ModelSpec::stock(variant, tau, theta, variance)?
        } else {
            ModelSpec::new(variant, tau, None, variance)?
        };
        Ok(model)
    }
}

fn with_matrix(e: LabError) -> LabError {
    match e {
        LabError::Core(gle_core::Error::Capability(msg)) => LabError::Core(
            gle_core::Error::Capability(format!("{msg}\n{CAPABILITY_MATRIX}")),
        ),
        other => other,
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let tolerance = cli.tolerance.unwrap_or(config.tolerance);
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(LabError::Input(format!(
            "tolerance {tolerance} must be positive"
        )));
    }
    let ctx = Context {
        seed: cli.seed.or(config.seed),
        out_dir: cli
            .out_dir
            .clone()
            .unwrap_or_else(|| config.out_dir.clone()),
        tolerance,
        config,
    };
    match cli.command {
        Command::Fig1 {
            tau_market,
            max_lag_ratio,
            points,
        } => fig1(&ctx, tau_market, max_lag_ratio, points),
        Command::Acf {
            model,
            route,
            step,
            lags,
            accuracy,
        } => acf(
            &ctx,
            &model.build(&ctx.config)?,
            route,
            step,
            lags,
            accuracy,
        )
        .map_err(with_matrix),
        Command::Simulate {
            model,
            paths,
            steps,
            step,
            sigma,
            mu,
            m0,
            prices,
            summary_lags,
        } => {
            let sim = SimulateArgs {
                paths,
                steps,
                step,
                sigma,
                mu,
                m0,
                prices,
                summary_lags,
            };
            simulate(&ctx, &model, &sim).map_err(with_matrix)
        }
        Command::Estimate {
            input,
            step,
            detrend,
            window,
        } => estimate(&ctx, &input, step, &detrend, window),
        Command::Audit {
            model,
            points,
            p_min,
            p_max,
            complex,
        } => audit(
            &ctx,
            &model.build(&ctx.config)?,
            points,
            p_min,
            p_max,
            complex,
        )
        .map_err(with_matrix),
    }
}

fn ok(message: String) -> Result<Outcome> {
    Ok(Outcome { message, code: 0 })
}

fn fig1(ctx: &Context, tau_market: f64, max_lag_ratio: f64, points: usize) -> Result<Outcome> {
    if points < 2 {
        return Err(LabError::Input("fig1 needs at least two points".into()));
    }
    if !(tau_market > 0.0 && max_lag_ratio > 0.0 && max_lag_ratio.is_finite()) {
        return Err(LabError::Input(
            "tau_market and max_lag_ratio must be positive".into(),
        ));
    }
    let rows = (0..points)
        .map(|i| {
            let x = max_lag_ratio * i as f64 / (points - 1) as f64;
            Ok(vec![x, lambda1(2.0 * x)?, lambda0(2.0 * x)?])
        })
        .collect::<Result<Vec<_>>>()?;
    let path = ctx.out("fig1.csv");
    write_file(&path, |w| {
        write_table(w, &["lag_ratio", "lambda1", "lambda0"], rows)
    })?;
    ok(format!(
        "wrote {} ({points} rows, tau_R = {tau_market} {})",
        path.display(),
        ctx.config.time_unit
    ))
}

fn model_acf(
    model: &ModelSpec,
    route: Route,
    step: f64,
    lags: usize,
    accuracy: f64,
) -> Result<AcfSeries> {
    let len = lags + 1;
    Ok(match route {
        Route::Closed => {
            if !has_closed_form(model) {
                closed_form_acf(model, step)?;
            }
            let values = (0..len)
                .map(|j| closed_form_acf(model, j as f64 * step))
                .collect::<gle_core::Result<Vec<_>>>()?;
            AcfSeries::new(step, values, model.variance())?
        }
        Route::Laplace => {
            if !model.variant().is_complex_capable() {
                return Err(gle_core::Error::Capability(format!(
                    "the {} model has no complex image to invert",
                    model.variant().name()
                ))
                .into());
            }
            let mut s = invert_uniform(&model.observable(), step, len, accuracy)?;
            s.variance = model.variance();
            s
        }
        Route::Volterra => propagate_model(model, lags, step)?,
    })
}

fn acf(
    ctx: &Context,
    model: &ModelSpec,
    route: Route,
    step: f64,
    lags: usize,
    accuracy: f64,
) -> Result<Outcome> {
    let series = model_acf(model, route, step, lags, accuracy)?;
    let name = format!("acf_{}_{}.csv", model.variant().name(), route_name(route));
    let path = ctx.out(&name);
    write_file(&path, |w| {
        write_table(w, &["lag", "acf"], series.iter().map(|(t, v)| vec![t, v]))
    })?;
    ok(format!(
        "wrote {} ({} lags, {})",
        path.display(),
        series.len(),
        ctx.config.time_unit
    ))
}

fn route_name(route: Route) -> &'static str {
    match route {
        Route::Closed => "closed",
        Route::Laplace => "laplace",
        Route::Volterra => "volterra",
    }
}

struct SimulateArgs {
    paths: usize,
    steps: usize,
    step: f64,
    sigma: Option<f64>,
    mu: Option<f64>,
    m0: Option<f64>,
    prices: bool,
    summary_lags: usize,
}

fn simulate(ctx: &Context, args: &ModelArgs, sim: &SimulateArgs) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let mu = sim.mu.or(ctx.config.mu).unwrap_or(0.0);
    let m0 = sim.m0.or(ctx.config.m0).unwrap_or(100.0);
    let (name, ensemble, returns) = if args.model == "gbm" {
        let variance = args.variance.or(ctx.config.variance).unwrap_or(1.0);
        let sigma = match (sim.sigma, args.tau.or(ctx.config.tau)) {
            (Some(s), _) => s,
            (None, Some(tau)) => sigma_from_tau(tau, variance)?,
            (None, None) => return Err(LabError::Input("gbm needs --sigma or --tau".into())),
        };
        let params = MarketParams::new(mu, sigma, variance, m0)?;
        let increments = generate_wiener_increments(sim.steps, sim.step, sim.paths, seed)?;
        let prices = simulate_gbm(&params, &increments, sim.steps as f64 * sim.step)?;
        let returns = returns_from_prices(&prices, Detrend::Given(mu))?;
        ("gbm".to_string(), prices, returns)
    } else {
        let model = args.build(&ctx.config)?;
        let returns = simulate_gle_ensemble(&model, sim.step, sim.steps, sim.paths, seed)?;
        let out = if sim.prices {
            price_from_returns(&returns, mu, m0)?
        } else {
            returns.clone()
        };
        (model.variant().name().to_string(), out, returns)
    };
    let kind = if args.model == "gbm" || sim.prices {
        "prices"
    } else {
        "returns"
    };
    let path = ctx.out(&format!("simulate_{name}_{kind}.csv"));
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..ensemble.n_paths()).map(|i| format!("path{i}")))
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..ensemble.n_samples()).map(|k| {
        std::iter::once(k as f64 * ensemble.h)
            .chain(ensemble.paths.iter().map(|p| p[k]))
            .collect::<Vec<_>>()
    });
    write_file(&path, |w| write_table(w, &header_refs, rows))?;

    let lags = sim.summary_lags.min(returns.n_samples() / 4);
    let acf = ensemble_acf(&returns, lags)?;
    let acf_path = ctx.out(&format!("simulate_{name}_acf.csv"));
    write_file(&acf_path, |w| {
        write_table(w, &["lag", "acf"], acf.iter().map(|(t, v)| vec![t, v]))
    })?;
    let summary = vec![
        ("model".to_string(), name.clone()),
        ("seed".to_string(), seed.to_string()),
        (
            "noise_streams".to_string(),
            format!("0..{}", ensemble.n_paths()),
        ),
        (
            "initial_value_streams".to_string(),
            format!(
                "{}..{}",
                INITIAL_VALUE_STREAM,
                INITIAL_VALUE_STREAM + ensemble.n_paths() as u64
            ),
        ),
        ("n_paths".to_string(), ensemble.n_paths().to_string()),
        ("n_steps".to_string(), sim.steps.to_string()),
        ("step".to_string(), format_number(sim.step)),
        ("time_unit".to_string(), ctx.config.time_unit.clone()),
        ("return_variance".to_string(), format_number(acf.variance)),
    ];
    let summary_path = ctx.out(&format!("simulate_{name}_summary.csv"));
    write_file(&summary_path, |w| write_pairs(w, &summary))?;
    ok(format!(
        "wrote {}, {} and {} (seed {seed}, variance {})",
        path.display(),
        acf_path.display(),
        summary_path.display(),
        format_number(acf.variance)
    ))
}

fn estimate(
    ctx: &Context,
    input: &Path,
    step: Option<f64>,
    detrend: &str,
    window: Option<f64>,
) -> Result<Outcome> {
    let series = read_prices_file(input)?;
    let h = match (step, series.step()?) {
        (Some(h), _) | (None, Some(h)) => h,
        (None, None) => {
            return Err(LabError::Input(
                "--step is required without a time column".into(),
            ))
        }
    };
    if !(h > 0.0 && h.is_finite()) {
        return Err(LabError::Input(format!("step {h} must be positive")));
    }
    let detrend = match detrend {
        "sample-mean" => Detrend::SampleMean,
        other => Detrend::Given(other.parse::<f64>().map_err(|_| {
            LabError::Input(format!(
                "detrend {other:?} is neither sample-mean nor a number"
            ))
        })?),
    };
    let prices = PathEnsemble {
        h,
        seed: 0,
        paths: vec![series.price],
    };
    let returns = returns_from_prices(&prices, detrend)?;
    let r = &returns.paths[0];
    // Detrending a pure exponential leaves only rounding noise.
    let raw_scale = prices.paths[0]
        .windows(2)
        .map(|w| ((w[1] / w[0]).ln() / h).abs())
        .fold(0.0, f64::max);
    let rms = (r.iter().map(|x| x * x).sum::<f64>() / r.len().max(1) as f64).sqrt();
    if rms <= 1e-12 * raw_scale {
        return Err(LabError::ZeroVariance);
    }
    let default_lags = (r.len() / 4).min(500);
    let max_lag = match window {
        Some(w) => (w / h).floor() as usize,
        None => default_lags,
    };
    let acf = sample_acf(r, h, max_lag)?;
    let report = fit_theta(&acf, max_lag as f64 * h)?;
    let mut pairs = vec![
        ("tau_r".to_string(), format_number(report.tau_r)),
        ("theta".to_string(), format_number(report.theta)),
        ("variance".to_string(), format_number(report.variance)),
        ("residual".to_string(), format_number(report.residual)),
        ("class".to_string(), report.class.label.name().to_string()),
        ("lags_used".to_string(), report.lags_used.to_string()),
        ("degenerate".to_string(), report.degenerate.to_string()),
        ("time_unit".to_string(), ctx.config.time_unit.clone()),
    ];
    pairs.extend(
        report
            .warnings
            .iter()
            .map(|w| ("warning".to_string(), w.clone())),
    );
    let path = ctx.out("estimate.csv");
    write_file(&path, |w| write_pairs(w, &pairs))?;
    let text: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}: {v}")).collect();
    ok(text.join("\n"))
}

struct AuditRow {
    p: Complex64,
    check: &'static str,
    residual: Option<f64>,
    limit: f64,
    note: String,
}

fn audit(
    ctx: &Context,
    model: &ModelSpec,
    points: usize,
    p_min: f64,
    p_max: f64,
    complex: bool,
) -> Result<Outcome> {
    if points < 2 || !(p_min > 0.0 && p_max > p_min) {
        return Err(LabError::Input(
            "audit needs points ≥ 2 and 0 < p_min < p_max".into(),
        ));
    }
    let tau = model.correlation_time();
    let mut grid: Vec<Complex64> = (0..points)
        .map(|i| {
            Complex64::new(
                p_min * (p_max / p_min).powf(i as f64 / (points - 1) as f64) / tau,
                0.0,
            )
        })
        .collect();
    if complex {
        if !model.variant().is_complex_capable() {
            return Err(gle_core::Error::Capability(format!(
                "the {} model has no complex image",
                model.variant().name()
            ))
            .into());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed()?);
        for _ in 0..points {
            let re = p_min * (p_max / p_min).powf(rng.random::<f64>());
            let im = (rng.random::<f64>() * 2.0 - 1.0) * p_max;
            grid.push(Complex64::new(re, im) / tau);
        }
    }
    let tol = ctx.tolerance;
    let mut rows = Vec::new();
    for &p in &grid {
        let row = |check, r: gle_core::Result<f64>, limit| match r {
            Ok(v) => AuditRow {
                p,
                check,
                residual: Some(v),
                limit,
                note: String::new(),
            },
            Err(e) => AuditRow {
                p,
                check,
                residual: None,
                limit,
                note: e.to_string(),
            },
        };
        rows.push(row("closure", identity_residual(model, p), tol));
        if p.im != 0.0 {
            continue;
        }
        match model.variant() {
            Variant::Boltzmann => rows.push(row(
                "boltzmann",
                boltzmann_relation_residual(model, p.re),
                tol,
            )),
            Variant::Differential => {
                let delta = 0.02 * p.re;
                let coarse = differential_closure_residual(model, p.re, delta);
                let fine = differential_closure_residual(model, p.re, 0.5 * delta);
                // Second order means halving the step quarters the residual.
                let r = match (coarse, fine) {
                    (Ok(c), Ok(f)) => AuditRow {
                        p,
                        check: "differential_order",
                        residual: Some((c / f).log2()),
                        limit: 0.0,
                        note: format!(
                            "residual {} at step {}, {} at half step",
                            format_number(c),
                            format_number(delta),
                            format_number(f)
                        ),
                    },
                    (Err(e), _) | (_, Err(e)) => row("differential_order", Err(e), 0.0),
                };
                rows.push(r);
            }
            _ => {}
        }
    }
    let passed = |r: &AuditRow| match (r.check, r.residual) {
        ("differential_order", Some(order)) => (1.5..=2.5).contains(&order),
        (_, Some(v)) => v <= r.limit,
        _ => false,
    };
    let failures = rows.iter().filter(|r| !passed(r)).count();
    let errors = rows.iter().filter(|r| r.residual.is_none()).count();
    let path = ctx.out(&format!("audit_{}.csv", model.variant().name()));
    write_file(&path, |w| {
        let mut csv = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        csv.write_record(["p_re", "p_im", "check", "residual", "status", "note"])?;
        for r in &rows {
            let status = if passed(r) {
                "ok"
            } else if r.residual.is_none() {
                "error"
            } else {
                "fail"
            };
            csv.write_record([
                format_number(r.p.re),
                format_number(r.p.im),
                r.check.to_string(),
                r.residual.map(format_number).unwrap_or_default(),
                status.to_string(),
                r.note.clone(),
            ])?;
        }
        csv.flush().map_err(|e| LabError::Csv(e.into()))
    })?;
    let worst = rows
        .iter()
        .filter(|r| r.check != "differential_order")
        .filter_map(|r| r.residual)
        .fold(0.0f64, f64::max);
    let message = format!(
        "wrote {}: {} checks, {failures} outside tolerance {}, {errors} solver errors, worst residual {}",
        path.display(),
        rows.len(),
        format_number(tol),
        format_number(worst)
    );
    Ok(Outcome {
        message,
        code: if failures == 0 { 0 } else { 4 },
    })
}
