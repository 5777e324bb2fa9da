//! Residual series keyed back to the filtered SCADA rows.

use std::io::{Read, Write};

use chrono::{DateTime, Duration, Utc};

use crate::error::{Error, Result};
use crate::ingest::{format_timestamp, parse_timestamp};

/// Parallel arrays: value, position in the filtered sequence, timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    values: Vec<f64>,
    t_index: Vec<usize>,
    timestamps: Vec<DateTime<Utc>>,
}

impl ResidualSeries {
    pub fn new(values: Vec<f64>, t_index: Vec<usize>, timestamps: Vec<DateTime<Utc>>) -> Result<Self> {
        if values.len() != t_index.len() || values.len() != timestamps.len() {
            return Err(Error::ContractViolation(format!(
                "residual series arrays differ in length: {} values, {} indices, {} timestamps",
                values.len(),
                t_index.len(),
                timestamps.len()
            )));
        }
        Ok(ResidualSeries {
            values,
            t_index,
            timestamps,
        })
    }

    /// Bare values on a 10-minute grid starting at the Unix epoch.
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len();
        ResidualSeries {
            values,
            t_index: (0..n).collect(),
            timestamps: (0..n)
                .map(|i| DateTime::UNIX_EPOCH + Duration::minutes(10 * i as i64))
                .collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t_index(&self) -> &[usize] {
        &self.t_index
    }

    pub fn timestamps(&self) -> &[DateTime<Utc>] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Keeps positions for which `keep` is true.
    pub fn retain_positions(&self, keep: &[bool]) -> ResidualSeries {
        let pick = |i: &usize| keep[*i];
        let idx: Vec<usize> = (0..self.len()).filter(pick).collect();
        ResidualSeries {
            values: idx.iter().map(|&i| self.values[i]).collect(),
            t_index: idx.iter().map(|&i| self.t_index[i]).collect(),
            timestamps: idx.iter().map(|&i| self.timestamps[i]).collect(),
        }
    }

    pub fn rmse(&self) -> f64 {
        crate::linalg::rmse(&self.values)
    }
}

/// Writes `t_index,timestamp,<value_name>` with 17 significant digits.
pub fn write_series_csv<W: Write>(series: &ResidualSeries, value_name: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_index", "timestamp", value_name])?;
    for i in 0..series.len() {
        w.write_record([
            series.t_index[i].to_string(),
            format_timestamp(&series.timestamps[i]),
            format!("{:.16e}", series.values[i]),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<residual csv>", e))?;
    Ok(())
}

/// Reads a file written by [`write_series_csv`]; the value column is the third one.
pub fn read_series_csv<R: Read>(input: R) -> Result<ResidualSeries> {
    let mut reader = csv::Reader::from_reader(input);
    let (mut values, mut t_index, mut timestamps) = (Vec::new(), Vec::new(), Vec::new());
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::Parse(format!("residual csv row {}: bad {what}", line + 1));
        t_index.push(
            row.get(0)
                .and_then(|s| s.trim().parse::<usize>().ok())
                .ok_or_else(|| bad("t_index"))?,
        );
        timestamps.push(row.get(1).and_then(parse_timestamp).ok_or_else(|| bad("timestamp"))?);
        values.push(
            row.get(2)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| bad("value"))?,
        );
    }
    ResidualSeries::new(values, t_index, timestamps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let s = ResidualSeries::from_values(vec![0.1, -2.5, 1.0 / 3.0]);
        let mut buf = Vec::new();
        write_series_csv(&s, "r_t", &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_index,timestamp,r_t\n"));
        assert_eq!(read_series_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn mismatched_arrays_rejected() {
        assert!(ResidualSeries::new(vec![1.0], vec![], vec![]).is_err());
    }
}
