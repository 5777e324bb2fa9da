//! SCADA ingestion: CSV parsing, rough filtering and design-matrix construction.
//!
//! Records arrive as 10-minute aggregates. Filtering removes idle records
//! (power at or below zero), records one grid step either side of an idle
//! record (start-up / shut-down) and records under pitch control.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One 10-minute SCADA row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScadaRecord {
    pub timestamp: DateTime<Utc>,
    pub power_kw: f64,
    pub wind_speed: f64,
    pub wind_dir: f64,
    pub out_temp: f64,
    pub turb_intensity: f64,
    pub wind_dir_sd: f64,
    pub out_temp_sd: f64,
    pub pitch_deg: f64,
}

/// Regressors available to the power-curve model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    WindSpeed,
    WindDir,
    OutTemp,
    TurbIntensity,
    WindDirSd,
    OutTempSd,
    Month,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::WindSpeed,
        Feature::WindDir,
        Feature::OutTemp,
        Feature::TurbIntensity,
        Feature::WindDirSd,
        Feature::OutTempSd,
        Feature::Month,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::WindSpeed => "wind_speed",
            Feature::WindDir => "wind_dir",
            Feature::OutTemp => "out_temp",
            Feature::TurbIntensity => "turb_intensity",
            Feature::WindDirSd => "wind_dir_sd",
            Feature::OutTempSd => "out_temp_sd",
            Feature::Month => "month",
        }
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.name() == name)
    }

    fn extract(self, rec: &ScadaRecord) -> f64 {
        match self {
            Feature::WindSpeed => rec.wind_speed,
            Feature::WindDir => rec.wind_dir,
            Feature::OutTemp => rec.out_temp,
            Feature::TurbIntensity => rec.turb_intensity,
            Feature::WindDirSd => rec.wind_dir_sd,
            Feature::OutTempSd => rec.out_temp_sd,
            Feature::Month => rec.timestamp.month() as f64,
        }
    }
}

/// One regression row: response `y` (power) and regressors `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub y: f64,
    pub x: Vec<f64>,
    /// Position in the filtered sequence.
    pub t_index: usize,
    pub timestamp: DateTime<Utc>,
}

/// Where turbulence intensity comes from. La Haute Borne exports do not carry
/// it directly, so it may also be derived as `std / mean` of two columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TurbulenceSource {
    Column(String),
    Ratio { std: String, mean: String },
}

impl TurbulenceSource {
    /// Parses either `Column` or `StdColumn/MeanColumn`.
    pub fn parse(spec: &str) -> TurbulenceSource {
        match spec.split_once('/') {
            Some((std, mean)) => TurbulenceSource::Ratio {
                std: std.trim().to_string(),
                mean: mean.trim().to_string(),
            },
            None => TurbulenceSource::Column(spec.trim().to_string()),
        }
    }
}

impl fmt::Display for TurbulenceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TurbulenceSource::Column(c) => f.write_str(c),
            TurbulenceSource::Ratio { std, mean } => write!(f, "{std}/{mean}"),
        }
    }
}

/// Source column name for each [`ScadaRecord`] field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub timestamp: String,
    pub power_kw: String,
    pub wind_speed: String,
    pub wind_dir: String,
    pub out_temp: String,
    pub turb_intensity: TurbulenceSource,
    pub wind_dir_sd: String,
    pub out_temp_sd: String,
    pub pitch_deg: String,
    /// Field delimiter; detected from the header line when `None`.
    pub delimiter: Option<u8>,
}

impl Default for ColumnMap {
    /// La Haute Borne export names.
    fn default() -> Self {
        ColumnMap {
            timestamp: "Date_time".into(),
            power_kw: "P_avg".into(),
            wind_speed: "Ws_avg".into(),
            wind_dir: "Wa_avg".into(),
            out_temp: "Ot_avg".into(),
            turb_intensity: TurbulenceSource::Column("Va_avg".into()),
            wind_dir_sd: "Wa_std".into(),
            out_temp_sd: "Ot_std".into(),
            pitch_deg: "Ba_avg".into(),
            delimiter: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseDiagnostics {
    pub rows_read: usize,
    pub missing_field: usize,
    pub duplicate_timestamp: usize,
    pub messages: Vec<String>,
}

const MAX_MESSAGES: usize = 50;

impl ParseDiagnostics {
    fn note(&mut self, msg: String) {
        if self.messages.len() < MAX_MESSAGES {
            self.messages.push(msg);
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParsedScada {
    pub records: Vec<ScadaRecord>,
    pub diagnostics: ParseDiagnostics,
}

/// Row counts by removal reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub input: usize,
    pub missing_field: usize,
    pub duplicate: usize,
    /// Parsed rows outside a configured time window.
    pub outside_window: usize,
    pub idle: usize,
    pub adjacent_idle: usize,
    pub pitch_exceeded: usize,
    pub retained: usize,
}

impl FilterReport {
    pub fn removed(&self) -> usize {
        self.missing_field
            + self.duplicate
            + self.outside_window
            + self.idle
            + self.adjacent_idle
            + self.pitch_exceeded
    }

    pub fn is_consistent(&self) -> bool {
        self.removed() + self.retained == self.input
    }

    /// Folds parse-stage exclusions into a report produced by [`rough_filter`].
    pub fn with_parse(mut self, diag: &ParseDiagnostics) -> Self {
        self.input = diag.rows_read;
        self.missing_field = diag.missing_field;
        self.duplicate = diag.duplicate_timestamp;
        self
    }
}

impl fmt::Display for FilterReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "input = {}", self.input)?;
        writeln!(f, "missing_field = {}", self.missing_field)?;
        writeln!(f, "duplicate_timestamp = {}", self.duplicate)?;
        writeln!(f, "outside_window = {}", self.outside_window)?;
        writeln!(f, "idle = {}", self.idle)?;
        writeln!(f, "adjacent_to_idle = {}", self.adjacent_idle)?;
        writeln!(f, "pitch_exceeded = {}", self.pitch_exceeded)?;
        writeln!(f, "retained = {}", self.retained)
    }
}

pub fn read_scada(path: &Path, map: &ColumnMap) -> Result<ParsedScada> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_scada(file, map)
}

fn detect_delimiter(header: &str) -> u8 {
    let count = |c: char| header.matches(c).count();
    [',', ';', '\t']
        .into_iter()
        .max_by_key(|&c| count(c))
        .filter(|&c| count(c) > 0)
        .map_or(b',', |c| c as u8)
}

pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let s = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%:z", "%Y-%m-%d %H:%M%:z"] {
        if let Ok(dt) = DateTime::parse_from_str(s, fmt) {
            return Some(dt.with_timezone(&Utc));
        }
    }
    const NAIVE: [&str; 5] = [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H:%M",
        "%d/%m/%Y %H:%M",
    ];
    NAIVE
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|n| n.and_utc())
}

struct ColumnIndex {
    timestamp: usize,
    power_kw: usize,
    wind_speed: usize,
    wind_dir: usize,
    out_temp: usize,
    turb: TurbIndex,
    wind_dir_sd: usize,
    out_temp_sd: usize,
    pitch_deg: usize,
}

enum TurbIndex {
    Column(usize),
    Ratio(usize, usize),
}

impl ColumnIndex {
    fn resolve(header: &csv::StringRecord, map: &ColumnMap) -> Result<Self> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let timestamp = find(&map.timestamp)?;
        let power_kw = find(&map.power_kw)?;
        let wind_speed = find(&map.wind_speed)?;
        let wind_dir = find(&map.wind_dir)?;
        let out_temp = find(&map.out_temp)?;
        let turb = match &map.turb_intensity {
            TurbulenceSource::Column(c) => TurbIndex::Column(find(c)?),
            TurbulenceSource::Ratio { std, mean } => TurbIndex::Ratio(find(std)?, find(mean)?),
        };
        Ok(ColumnIndex {
            timestamp,
            power_kw,
            wind_speed,
            wind_dir,
            out_temp,
            turb,
            wind_dir_sd: find(&map.wind_dir_sd)?,
            out_temp_sd: find(&map.out_temp_sd)?,
            pitch_deg: find(&map.pitch_deg)?,
        })
    }

    fn record(&self, row: &csv::StringRecord) -> std::result::Result<ScadaRecord, &'static str> {
        let num = |i: usize, what: &'static str| -> std::result::Result<f64, &'static str> {
            let cell = row.get(i).map(str::trim).unwrap_or("");
            if cell.is_empty() {
                return Err(what);
            }
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or(what)
        };
        let non_negative = |v: f64, what: &'static str| if v < 0.0 { Err(what) } else { Ok(v) };

        let timestamp = row
            .get(self.timestamp)
            .and_then(parse_timestamp)
            .ok_or("timestamp")?;
        let turb_intensity = match self.turb {
            TurbIndex::Column(i) => num(i, "turb_intensity")?,
            TurbIndex::Ratio(s, m) => {
                let mean = num(m, "turb_intensity")?;
                if mean <= 0.0 {
                    return Err("turb_intensity");
                }
                num(s, "turb_intensity")? / mean
            }
        };
        Ok(ScadaRecord {
            timestamp,
            power_kw: num(self.power_kw, "power_kw")?,
            wind_speed: num(self.wind_speed, "wind_speed")?,
            wind_dir: num(self.wind_dir, "wind_dir")?,
            out_temp: num(self.out_temp, "out_temp")?,
            turb_intensity: non_negative(turb_intensity, "turb_intensity")?,
            wind_dir_sd: non_negative(num(self.wind_dir_sd, "wind_dir_sd")?, "wind_dir_sd")?,
            out_temp_sd: non_negative(num(self.out_temp_sd, "out_temp_sd")?, "out_temp_sd")?,
            pitch_deg: num(self.pitch_deg, "pitch_deg")?,
        })
    }
}

/// Parses a SCADA CSV with a header row.
///
/// Rows with a missing or unparseable mapped field are dropped and counted.
/// The result is sorted by timestamp; a repeated timestamp keeps its first
/// occurrence in file order.
pub fn parse_scada<R: Read>(mut source: R, map: &ColumnMap) -> Result<ParsedScada> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::io("<csv source>", e))?;
    let delimiter = map
        .delimiter
        .unwrap_or_else(|| detect_delimiter(text.lines().next().unwrap_or("")));

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let index = ColumnIndex::resolve(&header, map)?;

    let mut diagnostics = ParseDiagnostics::default();
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        diagnostics.rows_read += 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                diagnostics.missing_field += 1;
                diagnostics.note(format!("row {}: {e}", line + 1));
                continue;
            }
        };
        match index.record(&row) {
            Ok(rec) => records.push(rec),
            Err(field) => {
                diagnostics.missing_field += 1;
                diagnostics.note(format!("row {}: missing or invalid {field}", line + 1));
            }
        }
    }

    records.sort_by_key(|r| r.timestamp);
    let before = records.len();
    let mut kept: Vec<ScadaRecord> = Vec::with_capacity(before);
    for rec in records {
        if kept.last().is_some_and(|last| last.timestamp == rec.timestamp) {
            diagnostics.note(format!("duplicate timestamp {} dropped", rec.timestamp));
            continue;
        }
        kept.push(rec);
    }
    diagnostics.duplicate_timestamp = before - kept.len();

    Ok(ParsedScada {
        records: kept,
        diagnostics,
    })
}

/// Thresholds for [`rough_filter`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterRules {
    /// Records with power at or below this are idle.
    pub idle_power_max_kw: f64,
    /// Records with pitch strictly above this are under pitch control.
    pub pitch_max_deg: f64,
    pub grid_step: Duration,
}

impl Default for FilterRules {
    fn default() -> Self {
        FilterRules {
            idle_power_max_kw: 0.0,
            pitch_max_deg: 20.0,
            grid_step: Duration::minutes(10),
        }
    }
}

impl FilterRules {
    pub fn apply(&self, records: &[ScadaRecord]) -> (Vec<ScadaRecord>, FilterReport) {
        let is_idle = |r: &ScadaRecord| r.power_kw <= self.idle_power_max_kw;
        let idle_times: HashSet<DateTime<Utc>> = records
            .iter()
            .filter(|r| is_idle(r))
            .map(|r| r.timestamp)
            .collect();

        let mut report = FilterReport {
            input: records.len(),
            ..FilterReport::default()
        };
        let mut retained = Vec::with_capacity(records.len());
        for rec in records {
            if is_idle(rec) {
                report.idle += 1;
            } else if idle_times.contains(&(rec.timestamp - self.grid_step))
                || idle_times.contains(&(rec.timestamp + self.grid_step))
            {
                report.adjacent_idle += 1;
            } else if rec.pitch_deg > self.pitch_max_deg {
                report.pitch_exceeded += 1;
            } else {
                retained.push(rec.clone());
            }
        }
        report.retained = retained.len();
        (retained, report)
    }
}

/// Applies the default rules: idle (power <= 0 kW), one 10-minute step either
/// side of an idle record, and pitch above 20 degrees.
pub fn rough_filter(records: &[ScadaRecord]) -> (Vec<ScadaRecord>, FilterReport) {
    FilterRules::default().apply(records)
}

pub fn featurize(records: &[ScadaRecord], features: &[Feature]) -> Vec<DesignRow> {
    records
        .iter()
        .enumerate()
        .map(|(t_index, rec)| DesignRow {
            y: rec.power_kw,
            x: features.iter().map(|f| f.extract(rec)).collect(),
            t_index,
            timestamp: rec.timestamp,
        })
        .collect()
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Writes `t_index,timestamp,y,<feature...>`.
pub fn write_design_csv<W: Write>(rows: &[DesignRow], features: &[Feature], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t_index".to_string(), "timestamp".into(), "y".into()];
    header.extend(features.iter().map(|f| f.name().to_string()));
    w.write_record(&header)?;
    for row in rows {
        let mut cells = vec![
            row.t_index.to_string(),
            format_timestamp(&row.timestamp),
            row.y.to_string(),
        ];
        cells.extend(row.x.iter().map(|v| v.to_string()));
        w.write_record(&cells)?;
    }
    w.flush().map_err(|e| Error::io("<design csv>", e))?;
    Ok(())
}
