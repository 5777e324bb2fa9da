use std::collections::HashSet;
use std::path::Path;

use scada_phase1::ingest::Feature;
use scada_phase1::report::{
    control_chart_svg, run_all, RunConfig, CONTROL_CHART_SVG, DESIGN_CSV, MARS_RESIDUALS_CSV, POWER_CURVE_SVG,
    RESIDUALS_CSV, SEGMENTS_CSV, SUMMARY,
};
use scada_phase1::rsp::{analyze, RspConfig};
use scada_phase1::series::ResidualSeries;
use scada_phase1::synth::{gen_ar, inject_shift, synth_scada, write_scada_csv, NoiseKind, ShiftKind, ShiftSpec, SynthScadaConfig};
use scada_phase1::Error;

fn write_input(dir: &Path, shift: ShiftSpec, seed: u64) -> std::path::PathBuf {
    let path = dir.join("scada.csv");
    let cfg = SynthScadaConfig {
        len: 2000,
        seed,
        shift,
        ..Default::default()
    };
    write_scada_csv(&synth_scada(&cfg).unwrap(), std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn config(input: &Path, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.input.path = Some(input.to_path_buf());
    cfg.output.dir = out.to_path_buf();
    cfg.features.use_ = vec![Feature::WindSpeed, Feature::OutTemp];
    cfg.rsp.seed = Some(11);
    cfg.rsp.permutations = 200;
    cfg
}

fn summary_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap()
        .parse()
        .unwrap()
}

fn csv_rmse(path: &Path) -> f64 {
    let mut r = csv::Reader::from_path(path).unwrap();
    let v: Vec<f64> = r.records().map(|row| row.unwrap()[2].parse().unwrap()).collect();
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn summary_rmse_matches_residual_files() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_input(tmp.path(), ShiftSpec::none(), 3);
    let out = tmp.path().join("out");
    run_all(&config(&input, &out)).unwrap();
    let summary = std::fs::read_to_string(out.join(SUMMARY)).unwrap();
    for (key, file) in [("rmse_mars", MARS_RESIDUALS_CSV), ("rmse_ifgls", RESIDUALS_CSV)] {
        let reported = summary_value(&summary, key);
        let recomputed = csv_rmse(&out.join(file));
        assert!((reported - recomputed).abs() <= 1e-9 * recomputed, "{key}: {reported} vs {recomputed}");
    }
}

#[test]
fn no_shift_run_leaves_segment_file_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_input(tmp.path(), ShiftSpec::none(), 4);
    let out = tmp.path().join("out");
    let res = run_all(&config(&input, &out)).unwrap();
    let segments = std::fs::read_to_string(out.join(SEGMENTS_CSV)).unwrap();
    if res.analysis.rounds[0].p_value > 0.05 {
        assert_eq!(segments.lines().count(), 1);
        let scatter = std::fs::read_to_string(out.join(POWER_CURVE_SVG)).unwrap();
        assert!(!scatter.contains("oc-overlay"));
    }
    assert!(segments.starts_with("iteration,stage,"));
}

#[test]
fn segments_map_back_to_filtered_timestamps() {
    let tmp = tempfile::tempdir().unwrap();
    let shift = ShiftSpec::new(ShiftKind::MultiStep, vec![900, 1100], vec![5.0, 0.0]).unwrap();
    let input = write_input(tmp.path(), shift, 5);
    let out = tmp.path().join("out");
    let res = run_all(&config(&input, &out)).unwrap();
    assert!(res.analysis.removals().count() >= 1);

    let mut design = csv::Reader::from_path(out.join(DESIGN_CSV)).unwrap();
    let stamps: HashSet<String> = design.records().map(|r| r.unwrap()[1].to_string()).collect();
    let mut segs = csv::Reader::from_path(out.join(SEGMENTS_CSV)).unwrap();
    let header = segs.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (start, end) = (col("start_timestamp"), col("end_timestamp"));
    for row in segs.records() {
        let row = row.unwrap();
        assert!(stamps.contains(&row[start]), "{}", &row[start]);
        assert!(stamps.contains(&row[end]), "{}", &row[end]);
    }
    let scatter = std::fs::read_to_string(out.join(POWER_CURVE_SVG)).unwrap();
    assert!(scatter.contains("id=\"oc-overlay\""));
}

#[test]
fn chart_markers_match_change_points() {
    let x = gen_ar(&[], NoiseKind::Normal, 360, 6).unwrap();
    let shift = ShiftSpec::new(ShiftKind::MultiStep, vec![120, 240], vec![3.0, 0.0]).unwrap();
    let y = inject_shift(&x, &shift).unwrap();
    let cfg = RspConfig {
        permutations: 200,
        seed: 3,
        ..Default::default()
    };
    let a = analyze(&ResidualSeries::from_values(y), &cfg).unwrap();
    let first = &a.rounds[0];
    let svg = control_chart_svg(Some(first));
    assert_eq!(svg.matches("class=\"cp-marker\"").count(), first.change_points.len());
    assert_eq!(control_chart_svg(Some(first)), svg);
}

#[test]
fn invalid_config_fails_before_reading_input() {
    let err = RunConfig::from_toml("[input]\npath = \"/nonexistent.csv\"\n[rsp]\nn = 0\n").unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)), "{err}");
}

#[test]
fn stage_is_named_in_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(&tmp.path().join("missing.csv"), &tmp.path().join("out"));
    let err = run_all(&cfg).unwrap_err();
    assert!(err.to_string().starts_with("ingest: "), "{err}");
}

#[test]
fn control_chart_written_for_every_run() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_input(tmp.path(), ShiftSpec::none(), 7);
    let out = tmp.path().join("out");
    run_all(&config(&input, &out)).unwrap();
    let svg = std::fs::read_to_string(out.join(CONTROL_CHART_SVG)).unwrap();
    assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
}
