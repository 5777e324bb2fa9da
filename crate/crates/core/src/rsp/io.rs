use std::io::Write;

use super::Analysis;
use crate::error::{Error, Result};
use crate::ingest::format_timestamp;

pub const SEGMENTS_HEADER: [&str; 12] = [
    "iteration",
    "stage",
    "start_subgroup",
    "end_subgroup",
    "start_t_index",
    "end_t_index",
    "start_timestamp",
    "end_timestamp",
    "segment_mean",
    "grand_mean",
    "w",
    "p_value",
];

pub const PLOT_DATA_HEADER: [&str; 7] = [
    "iteration",
    "subgroup",
    "start_timestamp",
    "subgroup_mean",
    "segment_mean",
    "change_point",
    "removed",
];

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per removed segment. Subgroup indices refer to that iteration's
/// subgrouping; `end_subgroup` is inclusive.
pub fn write_segments_csv<W: Write>(analysis: &Analysis, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SEGMENTS_HEADER)?;
    for (round, rm) in analysis.removals() {
        w.write_record([
            round.iteration.to_string(),
            round.k_star.to_string(),
            rm.start_subgroup.to_string(),
            (rm.end_subgroup - 1).to_string(),
            rm.start_t_index.to_string(),
            rm.end_t_index.to_string(),
            format_timestamp(&rm.start_time),
            format_timestamp(&rm.end_time),
            real(rm.segment_mean),
            real(rm.grand_mean),
            real(round.w),
            real(round.p_value),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<segments csv>", e))?;
    Ok(())
}

/// Subgroup means of every round with the stage-`k*` segment means,
/// `change_point = 1` where a segment starts, and the subgroups removed after the round.
pub fn write_plot_data_csv<W: Write>(analysis: &Analysis, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLOT_DATA_HEADER)?;
    for round in &analysis.rounds {
        for &(a, b, mean) in &round.segments {
            for i in a..b {
                let removed = round
                    .removed
                    .as_ref()
                    .is_some_and(|rm| (rm.start_subgroup..rm.end_subgroup).contains(&i));
                w.write_record([
                    round.iteration.to_string(),
                    i.to_string(),
                    format_timestamp(&round.subgroup_start[i]),
                    real(round.subgroup_means[i]),
                    real(mean),
                    u8::from(round.change_points.contains(&i)).to_string(),
                    u8::from(removed).to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<plot data csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rsp::{analyze, RspConfig};
    use crate::series::ResidualSeries;
    use crate::synth::{gen_ar, inject_shift, NoiseKind, ShiftSpec};

    #[test]
    fn csv_shapes() {
        let x = gen_ar(&[], NoiseKind::Normal, 240, 40).unwrap();
        let y = inject_shift(&x, &ShiftSpec::step(120, 3.0)).unwrap();
        let cfg = RspConfig {
            permutations: 200,
            seed: 3,
            ..Default::default()
        };
        let a = analyze(&ResidualSeries::from_values(y), &cfg).unwrap();
        let mut seg = Vec::new();
        write_segments_csv(&a, &mut seg).unwrap();
        let seg = String::from_utf8(seg).unwrap();
        assert_eq!(seg.lines().next().unwrap(), SEGMENTS_HEADER.join(","));
        assert_eq!(seg.lines().count(), 1 + a.removals().count());
        assert!(a.removals().count() >= 1);

        let mut plot = Vec::new();
        write_plot_data_csv(&a, &mut plot).unwrap();
        let plot = String::from_utf8(plot).unwrap();
        let rows: usize = a.rounds.iter().map(|r| r.m).sum();
        assert_eq!(plot.lines().count(), 1 + rows);
    }
}
