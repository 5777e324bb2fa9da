//! Box-Ljung portmanteau test.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LjungBox {
    pub lags: usize,
    pub q: f64,
    pub p_value: f64,
}

impl LjungBox {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Sample autocorrelations `rho_1..=rho_max_lag`.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let denom: f64 = centered.iter().map(|x| x * x).sum();
    if !(denom > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((1..=max_lag)
        .map(|k| {
            centered[k..]
                .iter()
                .zip(&centered[..n - k])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom
        })
        .collect())
}

/// `Q = n (n + 2) sum_k rho_k^2 / (n - k)` with `rho[k - 1] = rho_k`.
pub fn ljung_box_statistic(rho: &[f64], n: usize) -> f64 {
    let nf = n as f64;
    let sum: f64 = rho
        .iter()
        .enumerate()
        .map(|(i, r)| r * r / (nf - (i + 1) as f64))
        .sum();
    nf * (nf + 2.0) * sum
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(q: f64, df: usize) -> f64 {
    if q <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64)
        .expect("df >= 1")
        .sf(q)
}

/// Tests the first `lags` autocorrelations jointly, with `lags` degrees of freedom.
pub fn box_ljung(series: &[f64], lags: usize) -> Result<LjungBox> {
    if lags == 0 || series.len() <= lags {
        return Err(Error::SeriesTooShort(format!(
            "Box-Ljung at {lags} lags needs lags >= 1 and more than {lags} observations, got {}",
            series.len()
        )));
    }
    let rho = acf(series, lags)?;
    let q = ljung_box_statistic(&rho, series.len());
    Ok(LjungBox {
        lags,
        q,
        p_value: chi_square_sf(q, lags),
    })
}
