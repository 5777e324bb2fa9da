//! Synthetic series with known structure, and brute-force oracles for the chart.

mod oracle;
mod scada;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

pub use oracle::{oracle_exact_permutation, oracle_single_split, ORACLE_MAX_LEN};
pub use scada::{power_curve, synth_scada, write_scada_csv, SynthScadaConfig};

use crate::error::{Error, Result};

/// Innovation distribution, each scaled to mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Normal,
    #[serde(rename = "student-t5")]
    StudentT5,
    /// `Exp(1) - 1`.
    CenteredExp,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::Normal, NoiseKind::StudentT5, NoiseKind::CenteredExp];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Normal => "normal",
            NoiseKind::StudentT5 => "student-t5",
            NoiseKind::CenteredExp => "centered-exp",
        }
    }

    pub fn from_name(name: &str) -> Option<NoiseKind> {
        NoiseKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            NoiseKind::Normal => StandardNormal.sample(rng),
            NoiseKind::StudentT5 => {
                let t: f64 = StudentT::new(5.0).expect("dof > 0").sample(rng);
                t * (3.0f64 / 5.0).sqrt()
            }
            NoiseKind::CenteredExp => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
        }
    }
}

/// Step-down recursion: stationary iff every partial autocorrelation is inside (-1, 1).
pub fn is_stationary(coeffs: &[f64]) -> bool {
    let mut phi = coeffs.to_vec();
    while let Some(&kappa) = phi.last() {
        if !(kappa.abs() < 1.0) {
            return false;
        }
        let k = phi.len();
        let denom = 1.0 - kappa * kappa;
        phi = (0..k - 1)
            .map(|j| (phi[j] + kappa * phi[k - 2 - j]) / denom)
            .collect();
    }
    true
}

/// `len` values of the AR process `x_t = sum a_k x_{t-k} + e_t` after a burn-in of `10 p`.
pub fn gen_ar(coeffs: &[f64], noise: NoiseKind, len: usize, seed: u64) -> Result<Vec<f64>> {
    if !is_stationary(coeffs) {
        return Err(Error::NonStationary(coeffs.to_vec()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_ar_with(coeffs, noise, len, &mut rng)
}

pub(crate) fn gen_ar_with<R: Rng + ?Sized>(
    coeffs: &[f64],
    noise: NoiseKind,
    len: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let p = coeffs.len();
    let burn = 10 * p;
    let mut x = Vec::with_capacity(burn + len);
    for t in 0..burn + len {
        let lag: f64 = coeffs
            .iter()
            .enumerate()
            .filter(|(k, _)| t > *k)
            .map(|(k, a)| a * x[t - 1 - k])
            .sum();
        x.push(lag + noise.sample(rng));
    }
    x.drain(..burn);
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftKind {
    /// `magnitudes[j]` added at `locations[j]` only.
    Isolated,
    /// A single sustained level `magnitudes[0]` from `locations[0]` on.
    Step,
    /// Level `magnitudes[j]` on `[locations[j], locations[j + 1])`, the last one open-ended.
    MultiStep,
    /// Ramp from `locations[0]`, rising `magnitudes[0]` per observation.
    LinearTrend,
}

/// Mean pattern to add to a series; magnitudes are in units of the innovation sd.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    kind: ShiftKind,
    locations: Vec<usize>,
    magnitudes: Vec<f64>,
}

impl ShiftSpec {
    pub fn new(kind: ShiftKind, locations: Vec<usize>, magnitudes: Vec<f64>) -> Result<Self> {
        if locations.len() != magnitudes.len() {
            return Err(Error::InvalidConfig(format!(
                "shift has {} locations but {} magnitudes",
                locations.len(),
                magnitudes.len()
            )));
        }
        if locations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("shift locations must be strictly increasing".into()));
        }
        if matches!(kind, ShiftKind::Step | ShiftKind::LinearTrend) && locations.len() > 1 {
            return Err(Error::InvalidConfig(format!(
                "{kind:?} shift takes one location, got {}",
                locations.len()
            )));
        }
        if magnitudes.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig("shift magnitudes must be finite".into()));
        }
        Ok(ShiftSpec {
            kind,
            locations,
            magnitudes,
        })
    }

    pub fn none() -> Self {
        ShiftSpec {
            kind: ShiftKind::Isolated,
            locations: Vec::new(),
            magnitudes: Vec::new(),
        }
    }

    pub fn step(at: usize, magnitude: f64) -> Self {
        ShiftSpec {
            kind: ShiftKind::Step,
            locations: vec![at],
            magnitudes: vec![magnitude],
        }
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn locations(&self) -> &[usize] {
        &self.locations
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// The mean pattern over `len` positions.
    pub fn profile(&self, len: usize) -> Result<Vec<f64>> {
        if let Some(&last) = self.locations.last() {
            if last >= len {
                return Err(Error::ContractViolation(format!(
                    "shift location {last} outside a series of length {len}"
                )));
            }
        }
        let mut out = vec![0.0; len];
        match self.kind {
            ShiftKind::Isolated => {
                for (&i, &m) in self.locations.iter().zip(&self.magnitudes) {
                    out[i] = m;
                }
            }
            ShiftKind::Step | ShiftKind::MultiStep => {
                for (j, (&start, &m)) in self.locations.iter().zip(&self.magnitudes).enumerate() {
                    let end = self.locations.get(j + 1).copied().unwrap_or(len);
                    out[start..end].iter_mut().for_each(|v| *v = m);
                }
            }
            ShiftKind::LinearTrend => {
                if let (Some(&start), Some(&slope)) = (self.locations.first(), self.magnitudes.first()) {
                    for (i, v) in out.iter_mut().enumerate().skip(start) {
                        *v = slope * (i - start + 1) as f64;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `series + profile`; the input is left untouched.
pub fn inject_shift(series: &[f64], spec: &ShiftSpec) -> Result<Vec<f64>> {
    let profile = spec.profile(series.len())?;
    Ok(series.iter().zip(profile).map(|(x, p)| x + p).collect())
}
