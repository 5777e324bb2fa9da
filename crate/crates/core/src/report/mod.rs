//! End-to-end pipeline driven by a [`RunConfig`], writing every artifact to
//! the output directory.
//!
//! | file | contents |
//! |---|---|
//! | `filter_report.txt` | row counts per filtering rule |
//! | `design.csv` | `t_index,timestamp,y,<features>` |
//! | `model.txt` | MARS model, text format |
//! | `ifgls_log.txt` | AR order and coefficients, Box-Ljung tests, per-iteration log |
//! | `mars_residuals.csv` | `t_index,timestamp,u_t` |
//! | `residuals.csv` | `t_index,timestamp,r_t` |
//! | `segments.csv` | removed out-of-control segments |
//! | `plot_data.csv` | subgroup means per chart round |
//! | `control_chart.svg`, `power_curve.svg` | charts |
//! | `summary.txt` | RMSE before and after IFGLS, chart p-values |

mod config;
mod svg;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub use config::{
    ColumnsSection, FeaturesSection, FilterSection, IfglsSection, InputSection, MarsSection, OutputSection,
    RspSection, RunConfig, DEFAULT_CONFIG,
};
pub use svg::{control_chart_svg, power_scatter_svg};

use crate::error::{Error, Result};
use crate::ifgls::{ifgls_loop, write_ifgls_log, IfglsResult};
use crate::ingest::{featurize, parse_timestamp, read_scada, write_design_csv, DesignRow, FilterReport, ScadaRecord};
use crate::mars::{fit, write_model, MarsModel};
use crate::rsp::{analyze, write_plot_data_csv, write_segments_csv, Analysis, StopReason};
use crate::series::{read_series_csv, write_series_csv, ResidualSeries};

pub const FILTER_REPORT: &str = "filter_report.txt";
pub const DESIGN_CSV: &str = "design.csv";
pub const MODEL_FILE: &str = "model.txt";
pub const IFGLS_LOG: &str = "ifgls_log.txt";
pub const MARS_RESIDUALS_CSV: &str = "mars_residuals.csv";
pub const RESIDUALS_CSV: &str = "residuals.csv";
pub const SEGMENTS_CSV: &str = "segments.csv";
pub const PLOT_DATA_CSV: &str = "plot_data.csv";
pub const CONTROL_CHART_SVG: &str = "control_chart.svg";
pub const POWER_CURVE_SVG: &str = "power_curve.svg";
pub const SUMMARY: &str = "summary.txt";

/// Writes `path` through a buffered writer, creating parent directories.
fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e)))
}

#[derive(Debug, Clone)]
pub struct FilterStage {
    pub records: Vec<ScadaRecord>,
    pub design: Vec<DesignRow>,
    pub report: FilterReport,
}

#[derive(Debug, Clone)]
pub struct FitStage {
    pub model: MarsModel,
    pub ifgls: IfglsResult,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub filter: FilterStage,
    pub fit: FitStage,
    pub analysis: Analysis,
}

/// Parse, window, rough filter and featurize; writes the filter report and design CSV.
pub fn run_filter(cfg: &RunConfig) -> Result<FilterStage> {
    let stage = |e: Error| e.in_stage("ingest");
    let path = cfg
        .input
        .path
        .as_ref()
        .ok_or_else(|| stage(Error::InvalidConfig("input.path is not set".into())))?;
    let parsed = read_scada(path, &cfg.column_map()).map_err(stage)?;
    let bound = |s: &Option<String>| s.as_deref().and_then(parse_timestamp);
    let (start, end) = (bound(&cfg.input.start), bound(&cfg.input.end));
    let in_window: Vec<ScadaRecord> = parsed
        .records
        .iter()
        .filter(|r| start.is_none_or(|s| r.timestamp >= s) && end.is_none_or(|e| r.timestamp <= e))
        .cloned()
        .collect();
    let outside = parsed.records.len() - in_window.len();
    let (records, report) = cfg.filter_rules().apply(&in_window);
    let mut report = report.with_parse(&parsed.diagnostics);
    report.outside_window = outside;
    let design = featurize(&records, &cfg.features.use_);

    let out = &cfg.output.dir;
    let mut text = report.to_string();
    if !parsed.diagnostics.messages.is_empty() {
        text.push_str("\n# parse messages\n");
        for m in &parsed.diagnostics.messages {
            let _ = writeln!(text, "{m}");
        }
    }
    write_text(&out.join(FILTER_REPORT), &text).map_err(stage)?;
    write_file(&out.join(DESIGN_CSV), |w| write_design_csv(&design, &cfg.features.use_, w)).map_err(stage)?;
    if design.is_empty() {
        return Err(stage(Error::SeriesTooShort("no records survive filtering".into())));
    }
    Ok(FilterStage {
        records,
        design,
        report,
    })
}

/// MARS fit and IFGLS on a filtered design; writes the model, log and residual CSVs.
pub fn run_fit(cfg: &RunConfig, design: &[DesignRow]) -> Result<FitStage> {
    let model = fit(design, &cfg.mars_config()).map_err(|e| e.in_stage("mars"))?;
    let ifgls = ifgls_loop(design, &model, &cfg.ifgls_config()).map_err(|e| e.in_stage("ifgls"))?;
    let out = &cfg.output.dir;
    let stage = |e: Error| e.in_stage("report");
    write_file(&out.join(MODEL_FILE), |w| write_model(&model, w)).map_err(stage)?;
    write_file(&out.join(IFGLS_LOG), |w| write_ifgls_log(&ifgls, w)).map_err(stage)?;
    write_file(&out.join(MARS_RESIDUALS_CSV), |w| write_series_csv(&ifgls.mars_residuals, "u_t", w))
        .map_err(stage)?;
    write_file(&out.join(RESIDUALS_CSV), |w| write_series_csv(&ifgls.residuals, "r_t", w)).map_err(stage)?;
    Ok(FitStage { model, ifgls })
}

pub fn read_residuals(path: &Path) -> Result<ResidualSeries> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_series_csv(BufReader::new(file))
}

/// Chart analysis of `residuals`; writes the segment and plot-data CSVs and the control chart.
pub fn run_analyze(cfg: &RunConfig, residuals: &ResidualSeries) -> Result<Analysis> {
    let rsp = cfg.rsp_config()?;
    let analysis = analyze(residuals, &rsp).map_err(|e| e.in_stage("rsp"))?;
    let out = &cfg.output.dir;
    let stage = |e: Error| e.in_stage("report");
    write_file(&out.join(SEGMENTS_CSV), |w| write_segments_csv(&analysis, w)).map_err(stage)?;
    write_file(&out.join(PLOT_DATA_CSV), |w| write_plot_data_csv(&analysis, w)).map_err(stage)?;
    write_text(&out.join(CONTROL_CHART_SVG), &control_chart_svg(analysis.rounds.first())).map_err(stage)?;
    Ok(analysis)
}

/// Marks records whose `t_index` falls in a removed segment.
pub fn oc_mask(n_records: usize, analysis: &Analysis) -> Vec<bool> {
    let mut oc = vec![false; n_records];
    for (_, rm) in analysis.removals() {
        for flag in oc.iter_mut().take(rm.end_t_index + 1).skip(rm.start_t_index) {
            *flag = true;
        }
    }
    oc
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn summary_text(cfg: &RunConfig, out: &RunOutput) -> String {
    let ifgls = &out.fit.ifgls;
    let a = &out.analysis;
    let mut s = String::new();
    let _ = writeln!(s, "records_retained = {}", out.filter.report.retained);
    let _ = writeln!(s, "mars_terms = {}", out.fit.model.len());
    let _ = writeln!(s, "mars_gcv = {}", real(out.fit.model.gcv_score()));
    let _ = writeln!(s, "rmse_mars = {}", real(ifgls.mars_rmse()));
    let _ = writeln!(s, "rmse_ifgls = {}", real(ifgls.rmse()));
    let _ = writeln!(s, "ar_order = {}", ifgls.ar.order());
    let coeffs: Vec<String> = ifgls.ar.coeffs().iter().map(|c| real(*c)).collect();
    let _ = writeln!(s, "ar_coeffs = [{}]", coeffs.join(", "));
    let _ = writeln!(s, "ifgls_iterations = {}", ifgls.iterations);
    let _ = writeln!(s, "ifgls_converged = {}", ifgls.converged);
    let _ = writeln!(s, "rsp_seed = {}", cfg.rsp.seed.unwrap_or_default());
    let _ = writeln!(s, "rsp_permutations = {}", cfg.rsp.permutations);
    let _ = writeln!(s, "rsp_rounds = {}", a.rounds.len());
    let _ = writeln!(s, "segments_removed = {}", a.removals().count());
    let _ = writeln!(s, "observations_retained = {}", a.retained.len());
    let stop = match a.stop {
        StopReason::InControl => "in_control".to_string(),
        StopReason::TooShort { remaining } => format!("too_short ({remaining} observations left)"),
    };
    let _ = writeln!(s, "stop = {stop}");
    for r in &a.rounds {
        let _ = writeln!(
            s,
            "round.{} = m {} W {} p {} stage {}",
            r.iteration,
            r.m,
            real(r.w),
            real(r.p_value),
            r.k_star
        );
    }
    s
}

/// Every stage in order, plus the power-curve plot and the run summary.
pub fn run_all(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    cfg.rsp_config()?;
    let filter = run_filter(cfg)?;
    let fit = run_fit(cfg, &filter.design)?;
    let analysis = run_analyze(cfg, &fit.ifgls.residuals)?;

    let oc = oc_mask(filter.records.len(), &analysis);
    let ws: Vec<f64> = filter.records.iter().map(|r| r.wind_speed).collect();
    let p: Vec<f64> = filter.records.iter().map(|r| r.power_kw).collect();
    let out = RunOutput {
        filter,
        fit,
        analysis,
    };
    let dir = &cfg.output.dir;
    let stage = |e: Error| e.in_stage("report");
    write_text(&dir.join(POWER_CURVE_SVG), &power_scatter_svg(&ws, &p, &oc)).map_err(stage)?;
    write_text(&dir.join(SUMMARY), &summary_text(cfg, &out)).map_err(stage)?;
    Ok(out)
}

pub fn output_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output.dir.join(name)
}
