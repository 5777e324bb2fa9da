//! Iterative feasible generalized least squares on a fixed MARS basis.
//!
//! Alternates two steps until the AR coefficients settle and the whitened
//! residuals pass Box-Ljung at every tested lag:
//!
//! 1. `u_t = y_t - B(x_t)'alpha`, fit AR(p) to `u` by least squares;
//! 2. `y*_t = y_t - sum_theta a_theta u_{t-theta}`, refit `alpha` on `y*`.
//!
//! The basis functions never change; only `alpha` does. The first `p`
//! observations lack lags and are dropped from the refit and from `r_t`.

mod ar;
mod ljung_box;

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::DVector;

pub use ar::{fit_ar, select_order, ArModel};
pub use ljung_box::{acf, box_ljung, chi_square_sf, ljung_box_statistic, LjungBox};

use crate::error::{Error, Result};
use crate::ingest::DesignRow;
use crate::linalg::LeastSquares;
use crate::mars::MarsModel;
use crate::series::ResidualSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArOrder {
    Fixed(usize),
    /// BIC choice among `0..=max`, made once on the MARS residuals.
    Select { max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IfglsConfig {
    pub order: ArOrder,
    /// Convergence bound on `max |a_new - a_old|`.
    pub conv_threshold: f64,
    /// Box-Ljung significance level each tested lag must exceed.
    pub alpha_lb: f64,
    pub max_iter: usize,
}

impl Default for IfglsConfig {
    fn default() -> Self {
        IfglsConfig {
            order: ArOrder::Select { max: 5 },
            conv_threshold: 0.001,
            alpha_lb: 0.05,
            max_iter: 50,
        }
    }
}

impl IfglsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.conv_threshold > 0.0 && self.conv_threshold.is_finite()) {
            return Err(Error::InvalidConfig("ifgls.conv_threshold must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.alpha_lb) {
            return Err(Error::InvalidConfig("ifgls.alpha_lb must be in [0, 1)".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("ifgls.max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub ar_coeffs: Vec<f64>,
    /// `max |a_new - a_old|`; infinite on the first iteration.
    pub max_delta: f64,
    /// One-step-ahead SSE with the AR terms fixed, before and after the refit.
    pub sse_before_refit: f64,
    pub sse_after_refit: f64,
    pub min_ljung_p: f64,
}

#[derive(Debug, Clone)]
pub struct IfglsResult {
    pub coeffs: Vec<f64>,
    pub ar: ArModel,
    /// Whitened residuals `r_t`, defined for `t >= p`.
    pub residuals: ResidualSeries,
    /// Residuals of the original MARS fit, all `t`.
    pub mars_residuals: ResidualSeries,
    pub iterations: usize,
    pub converged: bool,
    /// Box-Ljung at lags `1..=p` on the final `r_t`.
    pub ljung: Vec<LjungBox>,
    pub log: Vec<IterationLog>,
}

impl IfglsResult {
    pub fn mars_rmse(&self) -> f64 {
        self.mars_residuals.rmse()
    }

    pub fn rmse(&self) -> f64 {
        self.residuals.rmse()
    }
}

fn series_from(values: Vec<f64>, rows: &[DesignRow]) -> ResidualSeries {
    ResidualSeries::new(
        values,
        rows.iter().map(|r| r.t_index).collect(),
        rows.iter().map(|r| r.timestamp).collect(),
    )
    .expect("parallel arrays built from the same rows")
}

pub fn ifgls_loop(design: &[DesignRow], model: &MarsModel, config: &IfglsConfig) -> Result<IfglsResult> {
    config.validate()?;
    let b = model.design_matrix(design);
    let y = DVector::from_iterator(design.len(), design.iter().map(|r| r.y));
    let mut alpha = DVector::from_column_slice(model.coeffs());
    let t = design.len();

    let initial_u: Vec<f64> = (&y - &b * &alpha).iter().copied().collect();
    let mars_residuals = series_from(initial_u.clone(), design);

    let p = match config.order {
        ArOrder::Fixed(p) => p,
        ArOrder::Select { max } => select_order(&initial_u, max.min(t.saturating_sub(2)))?,
    };
    if p == 0 {
        return Ok(IfglsResult {
            coeffs: model.coeffs().to_vec(),
            ar: ArModel::default(),
            residuals: mars_residuals.clone(),
            mars_residuals,
            iterations: 0,
            converged: true,
            ljung: Vec::new(),
            log: Vec::new(),
        });
    }
    if t <= p + model.len() {
        return Err(Error::SeriesTooShort(format!(
            "{t} rows cannot support AR({p}) with {} basis functions",
            model.len()
        )));
    }

    let b_tail = b.rows(p, t - p).into_owned();
    let ls = LeastSquares::new(&b_tail);

    let mut log = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut ar = ArModel::default();
    let mut r = Vec::new();
    let mut ljung = Vec::new();
    let mut converged = false;

    for iteration in 1..=config.max_iter {
        let u: Vec<f64> = (&y - &b * &alpha).iter().copied().collect();
        ar = fit_ar(&u, p)?;

        let y_star = DVector::from_fn(t - p, |i, _| y[p + i] - ar.lag_term(&u, p + i));
        let sse_before_refit = (&y_star - &b_tail * &alpha).norm_squared();
        let alpha_new = ls.solve(&y_star);
        let resid = &y_star - &b_tail * &alpha_new;
        let sse_after_refit = resid.norm_squared();
        r = resid.iter().copied().collect();

        let max_delta = prev.as_ref().map_or(f64::INFINITY, |old| {
            old.iter()
                .zip(ar.coeffs())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        ljung = (1..=p)
            .map(|h| box_ljung(&r, h))
            .collect::<Result<Vec<_>>>()?;
        let white = ljung.iter().all(|lb| lb.passes(config.alpha_lb));

        log.push(IterationLog {
            iteration,
            ar_coeffs: ar.coeffs().to_vec(),
            max_delta,
            sse_before_refit,
            sse_after_refit,
            min_ljung_p: ljung.iter().map(|lb| lb.p_value).fold(1.0, f64::min),
        });
        alpha = alpha_new;
        prev = Some(ar.coeffs().to_vec());

        if max_delta < config.conv_threshold && white {
            converged = true;
            break;
        }
    }

    Ok(IfglsResult {
        coeffs: alpha.iter().copied().collect(),
        ar,
        residuals: series_from(r, &design[p..]),
        mars_residuals,
        iterations: log.len(),
        converged,
        ljung,
        log,
    })
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// AR coefficients, termination state, final Box-Ljung tests and per-iteration log.
pub fn write_ifgls_log<W: Write>(result: &IfglsResult, mut out: W) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "ar_order = {}", result.ar.order());
    for (k, a) in result.ar.coeffs().iter().enumerate() {
        let _ = writeln!(s, "ar_coeff.{} = {}", k + 1, real(*a));
    }
    let _ = writeln!(s, "iterations = {}", result.iterations);
    let _ = writeln!(s, "converged = {}", result.converged);
    let _ = writeln!(s, "rmse_mars = {}", real(result.mars_rmse()));
    let _ = writeln!(s, "rmse_ifgls = {}", real(result.rmse()));
    for lb in &result.ljung {
        let _ = writeln!(
            s,
            "ljung_box.lag{} = q {} p {}",
            lb.lags,
            real(lb.q),
            real(lb.p_value)
        );
    }
    let _ = writeln!(s, "\n# iteration,max_delta,sse_before_refit,sse_after_refit,min_ljung_p,ar_coeffs");
    for it in &result.log {
        let coeffs: Vec<String> = it.ar_coeffs.iter().map(|a| real(*a)).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            it.iteration,
            real(it.max_delta),
            real(it.sse_before_refit),
            real(it.sse_after_refit),
            real(it.min_ljung_p),
            coeffs.join(" ")
        );
    }
    out.write_all(s.as_bytes())
        .map_err(|e| Error::io("<ifgls log>", e))
}
