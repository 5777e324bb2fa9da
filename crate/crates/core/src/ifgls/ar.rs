//! Least-squares autoregression without intercept, and BIC order selection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::lstsq;

/// `u_t = a_1 u_{t-1} + ... + a_p u_{t-p} + e_t`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArModel {
    coeffs: Vec<f64>,
}

impl ArModel {
    pub fn new(coeffs: Vec<f64>) -> Self {
        ArModel { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `sum_theta a_theta * u[t - theta]`; requires `t >= order`.
    pub fn lag_term(&self, u: &[f64], t: usize) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * u[t - 1 - k])
            .sum()
    }

    /// Innovations `e_t` for `t = p..len`.
    pub fn residuals(&self, u: &[f64]) -> Vec<f64> {
        (self.order()..u.len())
            .map(|t| u[t] - self.lag_term(u, t))
            .collect()
    }
}

/// Regresses `u_t` on its first `p` lags for `t = start..len`.
fn lagged_fit(u: &[f64], p: usize, start: usize) -> Result<(Vec<f64>, f64)> {
    let n = u.len() - start;
    let target = DVector::from_fn(n, |i, _| u[start + i]);
    if p == 0 {
        return Ok((Vec::new(), target.norm_squared()));
    }
    let lags = DMatrix::from_fn(n, p, |i, k| u[start + i - 1 - k]);
    let fit = lstsq(&lags, &target);
    if fit.rank < p {
        return Err(Error::DegenerateAr);
    }
    Ok((fit.coeffs.iter().copied().collect(), fit.sse))
}

pub fn fit_ar(u: &[f64], p: usize) -> Result<ArModel> {
    if u.len() <= p {
        return Err(Error::SeriesTooShort(format!(
            "AR({p}) needs more than {p} observations, got {}",
            u.len()
        )));
    }
    let (coeffs, _) = lagged_fit(u, p, p)?;
    Ok(ArModel { coeffs })
}

/// BIC over `p = 0..=p_max`, every order fit on the common sample `t >= p_max`.
/// Orders whose lag matrix is singular are skipped; ties go to the smaller order.
pub fn select_order(u: &[f64], p_max: usize) -> Result<usize> {
    if u.len() <= p_max {
        return Err(Error::SeriesTooShort(format!(
            "order selection up to {p_max} needs more than {p_max} observations, got {}",
            u.len()
        )));
    }
    let n = (u.len() - p_max) as f64;
    let mut best = (0usize, f64::INFINITY);
    for p in 0..=p_max {
        let Ok((_, sse)) = lagged_fit(u, p, p_max) else {
            continue;
        };
        if sse <= 0.0 {
            // Exact fit; larger orders cannot improve on it.
            return Ok(p);
        }
        let bic = n * (sse / n).ln() + p as f64 * n.ln();
        if bic < best.1 {
            best = (p, bic);
        }
    }
    Ok(best.0)
}
