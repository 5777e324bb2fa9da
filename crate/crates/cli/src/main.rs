use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use scada_phase1::report::{
    output_path, read_residuals, run_all, run_analyze, run_filter, run_fit, RunConfig, DEFAULT_CONFIG,
    RESIDUALS_CSV, SEGMENTS_CSV, SUMMARY,
};
use scada_phase1::synth::{synth_scada, write_scada_csv, NoiseKind, ShiftKind, ShiftSpec, SynthScadaConfig};

/// Phase I analysis of wind-turbine SCADA data: power-curve fit, residual
/// whitening and a distribution-free control chart.
#[derive(Parser)]
#[command(name = "scada-phase1", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and rough-filter the input; writes filter_report.txt and design.csv.
    Filter(Common),
    /// Filter, fit MARS and run IFGLS; writes the model, log and residual CSVs.
    Fit(Common),
    /// Run the control chart on a residual CSV.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chart: ChartFlags,
        /// Residual CSV; defaults to residuals.csv in the output directory.
        #[arg(long)]
        residuals: Option<PathBuf>,
    },
    /// Every stage, plots and summary.
    RunAll {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chart: ChartFlags,
    },
    /// Write a synthetic SCADA export with a known power curve.
    Synth(SynthArgs),
    /// Print the configuration template with all defaults.
    DefaultConfig,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides input.path.
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Overrides output.dir.
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ChartFlags {
    /// Overrides rsp.seed; required unless the config sets it.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides rsp.permutations.
    #[arg(long)]
    permutations: Option<usize>,
    /// Overrides rsp.alpha.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output CSV path.
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4000)]
    len: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// AR coefficients of the power error, comma separated; empty for white noise.
    #[arg(long, default_value = "0.6", allow_hyphen_values = true)]
    ar: String,
    /// normal, student-t5 or centered-exp.
    #[arg(long, default_value = "normal")]
    noise: String,
    /// Innovation sd of the power error in kW.
    #[arg(long, default_value_t = 25.0)]
    noise_sd: f64,
    /// Row where a sustained power shift starts.
    #[arg(long, requires = "shift_size")]
    shift_at: Option<usize>,
    /// Shift size in units of --noise-sd.
    #[arg(long, requires = "shift_at", allow_hyphen_values = true)]
    shift_size: Option<f64>,
    /// Number of rows the shift lasts; open-ended when omitted.
    #[arg(long, requires = "shift_at")]
    shift_len: Option<usize>,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &common.input {
        cfg.input.path = Some(p.clone());
    }
    if let Some(d) = &common.out_dir {
        cfg.output.dir = d.clone();
    }
    Ok(cfg)
}

fn apply_chart(cfg: &mut RunConfig, chart: &ChartFlags) -> Result<()> {
    if let Some(s) = chart.seed {
        cfg.rsp.seed = Some(s);
    }
    if let Some(l) = chart.permutations {
        cfg.rsp.permutations = l;
    }
    if let Some(a) = chart.alpha {
        cfg.rsp.alpha = a;
    }
    if cfg.rsp.seed.is_none() {
        bail!("a seed is required: pass --seed or set rsp.seed in the config");
    }
    cfg.validate()?;
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let ar: Vec<f64> = args
        .ar
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("bad AR coefficient {s:?}")))
        .collect::<Result<_>>()?;
    let noise = NoiseKind::from_name(&args.noise)
        .with_context(|| format!("unknown noise {:?}; use normal, student-t5 or centered-exp", args.noise))?;
    let shift = match (args.shift_at, args.shift_size) {
        (Some(at), Some(size)) => match args.shift_len {
            Some(len) if at + len < args.len => ShiftSpec::new(ShiftKind::MultiStep, vec![at, at + len], vec![size, 0.0])?,
            _ => ShiftSpec::step(at, size),
        },
        _ => ShiftSpec::none(),
    };
    let cfg = SynthScadaConfig {
        len: args.len,
        seed: args.seed,
        ar_coeffs: ar,
        noise,
        noise_sd_kw: args.noise_sd,
        shift,
        ..SynthScadaConfig::default()
    };
    let records = synth_scada(&cfg)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_scada_csv(&records, BufWriter::new(file))?;
    eprintln!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::DefaultConfig => print!("{DEFAULT_CONFIG}"),
        Command::Synth(args) => synth(&args)?,
        Command::Filter(common) => {
            let cfg = load_config(&common)?;
            let stage = run_filter(&cfg)?;
            print!("{}", stage.report);
        }
        Command::Fit(common) => {
            let cfg = load_config(&common)?;
            let filtered = run_filter(&cfg)?;
            let fit = run_fit(&cfg, &filtered.design)?;
            println!("mars_terms = {}", fit.model.len());
            println!("rmse_mars = {:.6}", fit.ifgls.mars_rmse());
            println!("rmse_ifgls = {:.6}", fit.ifgls.rmse());
            println!("ar_order = {}", fit.ifgls.ar.order());
            println!("ifgls_converged = {}", fit.ifgls.converged);
        }
        Command::Analyze {
            common,
            chart,
            residuals,
        } => {
            let mut cfg = load_config(&common)?;
            apply_chart(&mut cfg, &chart)?;
            let path = residuals.unwrap_or_else(|| output_path(&cfg, RESIDUALS_CSV));
            let series = read_residuals(&path).with_context(|| format!("reading {}", path.display()))?;
            let analysis = run_analyze(&cfg, &series)?;
            for r in &analysis.rounds {
                println!("round {}: m = {}, W = {:.4}, p = {:.4}, stage {}", r.iteration, r.m, r.w, r.p_value, r.k_star);
            }
            println!(
                "{} segment(s) removed; see {}",
                analysis.removals().count(),
                output_path(&cfg, SEGMENTS_CSV).display()
            );
        }
        Command::RunAll { common, chart } => {
            let mut cfg = load_config(&common)?;
            apply_chart(&mut cfg, &chart)?;
            let out = run_all(&cfg)?;
            println!(
                "rmse_mars = {:.6}, rmse_ifgls = {:.6}, segments removed = {}",
                out.fit.ifgls.mars_rmse(),
                out.fit.ifgls.rmse(),
                out.analysis.removals().count()
            );
            println!("summary: {}", output_path(&cfg, SUMMARY).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
