//! Synthetic 10-minute SCADA exports with a known power curve and AR errors.

use std::io::Write;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{gen_ar_with, is_stationary, NoiseKind, ShiftSpec};
use crate::error::{Error, Result};
use crate::ingest::{format_timestamp, ColumnMap, ScadaRecord, TurbulenceSource};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScadaConfig {
    pub start: DateTime<Utc>,
    pub len: usize,
    pub seed: u64,
    /// Rated power of the logistic power curve, kW.
    pub rated_kw: f64,
    /// AR coefficients of the power error process.
    pub ar_coeffs: Vec<f64>,
    pub noise: NoiseKind,
    /// Innovation sd of the power error, kW.
    pub noise_sd_kw: f64,
    /// Added to power in units of `noise_sd_kw`, indexed by raw row.
    pub shift: ShiftSpec,
}

impl Default for SynthScadaConfig {
    fn default() -> Self {
        SynthScadaConfig {
            start: Utc.with_ymd_and_hms(2013, 1, 1, 0, 0, 0).unwrap(),
            len: 4000,
            seed: 1,
            rated_kw: 2050.0,
            ar_coeffs: vec![0.6],
            noise: NoiseKind::Normal,
            noise_sd_kw: 25.0,
            shift: ShiftSpec::none(),
        }
    }
}

/// The noiseless power curve used by [`synth_scada`].
pub fn power_curve(rated_kw: f64, wind_speed: f64, out_temp: f64) -> f64 {
    if !(3.0..=25.0).contains(&wind_speed) {
        return 0.0;
    }
    let density = 1.0 - 0.003 * (out_temp - 10.0);
    rated_kw * density / (1.0 + (-(wind_speed - 8.5) / 1.3).exp())
}

/// Generates raw records, including idle and pitch-controlled rows that the
/// rough filter should remove.
pub fn synth_scada(config: &SynthScadaConfig) -> Result<Vec<ScadaRecord>> {
    if !is_stationary(&config.ar_coeffs) {
        return Err(Error::NonStationary(config.ar_coeffs.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let err = gen_ar_with(&config.ar_coeffs, config.noise, config.len, &mut rng)?;
    let shift = config.shift.profile(config.len)?;

    let mut gust = 0.0f64;
    let mut dir = 220.0f64;
    let mut out = Vec::with_capacity(config.len);
    for t in 0..config.len {
        let z: f64 = StandardNormal.sample(&mut rng);
        gust = 0.98 * gust + 0.2 * z;
        let wind_speed = (7.5 * (0.35 * gust).exp()).min(27.0);
        let dz: f64 = StandardNormal.sample(&mut rng);
        dir = (dir + 4.0 * dz).rem_euclid(360.0);
        let day = (t % 144) as f64 / 144.0;
        let out_temp = 9.0 + 5.0 * (std::f64::consts::TAU * (day - 0.375)).sin() + rng.random_range(-0.5..0.5);

        let curve = power_curve(config.rated_kw, wind_speed, out_temp);
        let (power_kw, pitch_deg) = if curve <= 0.0 {
            (rng.random_range(-15.0..=0.0), 45.0 + rng.random_range(0.0..40.0))
        } else {
            let p = curve + config.noise_sd_kw * (err[t] + shift[t]);
            let pitch = if wind_speed > 13.0 {
                (wind_speed - 13.0) * 2.5
            } else {
                rng.random_range(-1.0..1.0)
            };
            (p, pitch)
        };
        out.push(ScadaRecord {
            timestamp: config.start + Duration::minutes(10 * t as i64),
            power_kw,
            wind_speed,
            wind_dir: dir,
            out_temp,
            turb_intensity: 0.08 + rng.random_range(0.0..0.12),
            wind_dir_sd: 3.0 + rng.random_range(0.0..12.0),
            out_temp_sd: 0.05 + rng.random_range(0.0..0.3),
            pitch_deg,
        });
    }
    Ok(out)
}

/// Writes records under the default column names, `;`-separated.
pub fn write_scada_csv<W: Write>(records: &[ScadaRecord], out: W) -> Result<()> {
    let map = ColumnMap::default();
    let turb = match &map.turb_intensity {
        TurbulenceSource::Column(c) => c.clone(),
        TurbulenceSource::Ratio { .. } => unreachable!("default map names a column"),
    };
    let mut w = csv::WriterBuilder::new().delimiter(b';').from_writer(out);
    w.write_record([
        &map.timestamp,
        &map.power_kw,
        &map.wind_speed,
        &map.wind_dir,
        &map.out_temp,
        &turb,
        &map.wind_dir_sd,
        &map.out_temp_sd,
        &map.pitch_deg,
    ])?;
    let real = |v: f64| format!("{v:.6}");
    for r in records {
        w.write_record([
            format_timestamp(&r.timestamp),
            real(r.power_kw),
            real(r.wind_speed),
            real(r.wind_dir),
            real(r.out_temp),
            real(r.turb_intensity),
            real(r.wind_dir_sd),
            real(r.out_temp_sd),
            real(r.pitch_deg),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<scada csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_scada, rough_filter};

    #[test]
    fn round_trips_through_ingest() {
        let cfg = SynthScadaConfig {
            len: 500,
            ..Default::default()
        };
        let recs = synth_scada(&cfg).unwrap();
        let mut buf = Vec::new();
        write_scada_csv(&recs, &mut buf).unwrap();
        let parsed = parse_scada(buf.as_slice(), &ColumnMap::default()).unwrap();
        assert_eq!(parsed.records.len(), 500);
        assert_eq!(parsed.diagnostics.missing_field, 0);
        for (a, b) in parsed.records.iter().zip(&recs) {
            assert_eq!(a.timestamp, b.timestamp);
            assert!((a.power_kw - b.power_kw).abs() < 1e-6);
        }
        let (kept, report) = rough_filter(&parsed.records);
        assert!(report.is_consistent());
        assert!(!kept.is_empty() && kept.len() < 500);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthScadaConfig {
            len: 200,
            ..Default::default()
        };
        assert_eq!(synth_scada(&cfg).unwrap(), synth_scada(&cfg).unwrap());
    }
}
