//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p scada-phase1 --test acceptance`. A criterion name
//! given as an argument restricts the run to matching criteria.
//!
//! The power-curve criterion runs on real La Haute Borne data when
//! `SCADA_R80711_CSV` points at the R80711 export; otherwise it runs the
//! synthetic equivalent.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use scada_phase1::ifgls::{box_ljung, chi_square_sf, ifgls_loop, ljung_box_statistic, IfglsConfig};
use scada_phase1::ingest::{featurize, parse_scada, rough_filter, ColumnMap, DesignRow, Feature};
use scada_phase1::mars::{eval_basis, fit, gcv, BasisFunction, HingeFactor, MarsConfig, Sign};
use scada_phase1::report::{run_all, RunConfig};
use scada_phase1::rsp::{
    aggregate, analyze, chart_round, p_value, segment_means, segment_stats, stat_isolated, subgroup_values,
    RspConfig,
};
use scada_phase1::series::ResidualSeries;
use scada_phase1::synth::{
    gen_ar, inject_shift, oracle_exact_permutation, oracle_single_split, synth_scada, write_scada_csv, NoiseKind,
    ShiftKind, ShiftSpec, SynthScadaConfig,
};

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>) -> Check {
        Check {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = (&'static str, fn() -> Check);

const CRITERIA: &[Criterion] = &[
    ("power-curve-rmse", power_curve_rmse),
    ("ic-false-alarm-calibration", ic_calibration),
    ("detection-power", detection_power),
    ("oracle-equivalence", oracle_equivalence),
    ("ifgls-recovery", ifgls_recovery),
    ("numerical-unit-checks", numerical_unit_checks),
    ("determinism", determinism),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let check = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Check::new(false, format!("panicked: {msg}"))
            });
        let tag = if check.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {} ({:.1}s)", check.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!check.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

// ---------------------------------------------------------------------------

fn power_curve_rmse() -> Check {
    match std::env::var("SCADA_R80711_CSV") {
        Ok(path) if !path.is_empty() => power_curve_real(Path::new(&path)),
        _ => power_curve_synthetic(),
    }
}

/// Dataset 1 window of turbine R80711: MARS 39.18 kW, MARS + IFGLS 30.08 kW, each within 20%.
fn power_curve_real(path: &Path) -> Check {
    let start = Instant::now();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.input.path = Some(path.to_path_buf());
    cfg.input.start = Some("2012-12-31T23:00:00Z".into());
    cfg.input.end = Some("2013-04-01T22:00:00Z".into());
    // In the public export Va_avg is the vane angle; turbulence intensity is Ws_std / Ws_avg.
    cfg.columns.turb_intensity = "Ws_std/Ws_avg".into();
    cfg.rsp.seed = Some(1);
    cfg.rsp.permutations = 200;
    cfg.output.dir = out.path().to_path_buf();
    let res = match run_all(&cfg) {
        Ok(r) => r,
        Err(e) => return Check::new(false, format!("pipeline failed: {e}")),
    };
    let ifgls = &res.fit.ifgls;
    let (mars, adj) = (ifgls.mars_rmse(), ifgls.rmse());
    let white = ifgls.ljung.iter().all(|lb| lb.p_value > 0.05);
    let secs = start.elapsed().as_secs_f64();
    let pass = within(mars, 39.18, 0.2) && within(adj, 30.08, 0.2) && adj < mars && white && secs < 600.0;
    Check::new(
        pass,
        format!(
            "real data, {} filtered points; MARS RMSE {mars:.2} kW (target 39.18), IFGLS RMSE {adj:.2} kW (target 30.08), AR({}), Box-Ljung all lags pass: {white}",
            res.filter.design.len(),
            ifgls.ar.order()
        ),
    )
}

/// Synthetic stand-in: logistic power curve plus AR(1) errors with innovation sd 25 kW.
/// MARS RMSE should track the marginal error sd `25 / sqrt(1 - 0.36)` and the
/// IFGLS RMSE the innovation sd, each within 20%.
fn power_curve_synthetic() -> Check {
    let cfg = SynthScadaConfig {
        len: 6000,
        seed: 2013,
        ..Default::default()
    };
    let records = synth_scada(&cfg).unwrap();
    let mut csv = Vec::new();
    write_scada_csv(&records, &mut csv).unwrap();
    let parsed = parse_scada(csv.as_slice(), &ColumnMap::default()).unwrap();
    let (kept, report) = rough_filter(&parsed.records);
    let design = featurize(&kept, &Feature::ALL);
    let model = fit(&design, &MarsConfig::default()).unwrap();
    let res = ifgls_loop(&design, &model, &IfglsConfig::default()).unwrap();
    let (mars, adj) = (res.mars_rmse(), res.rmse());
    let marginal = 25.0 / (1.0f64 - 0.36).sqrt();
    let white = res.ljung.iter().all(|lb| lb.p_value > 0.05);
    let pass = within(mars, marginal, 0.2) && within(adj, 25.0, 0.2) && adj < mars && white && report.is_consistent();
    Check::new(
        pass,
        format!(
            "synthetic equivalent (set SCADA_R80711_CSV for the real data), {} filtered points; MARS RMSE {mars:.2} kW (target {marginal:.2}), IFGLS RMSE {adj:.2} kW (target 25.00), AR({}) a = {:?}, Box-Ljung all lags pass: {white}",
            design.len(),
            res.ar.order(),
            res.ar.coeffs().iter().map(|a| (a * 1e3).round() / 1e3).collect::<Vec<_>>(),
        ),
    )
}

// ---------------------------------------------------------------------------

fn chart_config(seed: u64) -> RspConfig {
    RspConfig {
        n: 6,
        k: 50,
        l_min: 5,
        permutations: 1000,
        alpha: 0.05,
        seed,
    }
}

fn ic_calibration() -> Check {
    let runs = 200;
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, kind) in NoiseKind::ALL.into_iter().enumerate() {
        let alarms = (0..runs)
            .filter(|&i| {
                let seed = 1_000 * (d as u64 + 1) + i as u64;
                let x = gen_ar(&[], kind, 300, seed).unwrap();
                let a = analyze(&ResidualSeries::from_values(x), &chart_config(seed + 500_000)).unwrap();
                a.rounds[0].p_value <= 0.05
            })
            .count();
        let rate = alarms as f64 / runs as f64;
        pass &= (0.02..=0.09).contains(&rate);
        parts.push(format!("{} {rate:.3}", kind.name()));
    }
    Check::new(pass, format!("alarm rates over {runs} runs (band [0.02, 0.09]): {}", parts.join(", ")))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn detection_power() -> Check {
    let runs = 200;
    let step = ShiftSpec::step(25 * 6, 2.0);
    let mut step_alarms = 0;
    let mut first_cp = Vec::new();
    for i in 0..runs {
        let seed = 40_000 + i as u64;
        let x = inject_shift(&gen_ar(&[], NoiseKind::Normal, 300, seed).unwrap(), &step).unwrap();
        let round = chart_round(&ResidualSeries::from_values(x.clone()), &chart_config(seed + 7), 0).unwrap();
        step_alarms += usize::from(round.p_value <= 0.05);
        let seg = segment_stats(&subgroup_values(&x, 6).unwrap(), 1, 5);
        first_cp.push(seg.change_points(1)[0] as f64);
    }
    let step_rate = step_alarms as f64 / runs as f64;
    let med = median(first_cp);

    let iso = ShiftSpec::new(ShiftKind::MultiStep, vec![150, 156], vec![4.0, 0.0]).unwrap();
    let (mut iso_alarms, mut iso_k0) = (0, 0);
    for i in 0..runs {
        let seed = 60_000 + i as u64;
        let x = inject_shift(&gen_ar(&[], NoiseKind::Normal, 300, seed).unwrap(), &iso).unwrap();
        let round = chart_round(&ResidualSeries::from_values(x), &chart_config(seed + 7), 0).unwrap();
        if round.p_value <= 0.05 {
            iso_alarms += 1;
            iso_k0 += usize::from(round.k_star == 0);
        }
    }
    let iso_rate = iso_alarms as f64 / runs as f64;
    let k0_share = iso_k0 as f64 / iso_alarms.max(1) as f64;
    let pass = step_rate > 0.9 && (med - 25.0).abs() <= 2.0 && iso_rate > 0.8 && k0_share > 0.5;
    Check::new(
        pass,
        format!(
            "+2 sd step: alarm rate {step_rate:.3} (> 0.9), median first change point {med} (25 +/- 2); +4 sd isolated subgroup: alarm rate {iso_rate:.3} (> 0.8), stage 0 chosen in {k0_share:.3} of alarms (> 0.5)"
        ),
    )
}

// ---------------------------------------------------------------------------

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut tau_mismatch, mut max_rel, mut bit_exact) = (0, 0.0f64, 0);
    let instances = 1000;
    for _ in 0..instances {
        let l_min = rng.random_range(1..=5usize);
        let m = rng.random_range(2 * l_min..=200);
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let means: Vec<f64> = (0..m)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect();
        let seg = segment_means(&means, 1, l_min);
        let (tau, t1) = oracle_single_split(&means, l_min);
        if seg.change_points(1) != [tau] {
            tau_mismatch += 1;
        }
        let got = seg.stat(1);
        bit_exact += usize::from(got == t1);
        max_rel = max_rel.max((got - t1).abs() / t1.abs().max(f64::MIN_POSITIVE));
    }
    let split_ok = tau_mismatch == 0 && max_rel <= 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let normal9: Vec<f64> = (0..9).map(|_| StandardNormal.sample(&mut rng)).collect();
    let exp8: Vec<f64> = (0..8).map(|_| Exp1.sample(&mut rng)).collect();
    let normal9b: Vec<f64> = (0..9).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut shifted = normal9b.clone();
    for v in &mut shifted[6..] {
        *v += 2.0;
    }
    let cases: Vec<(&str, Vec<f64>, usize, usize, usize)> = vec![
        ("1..6 n=3", (1..=6).map(f64::from).collect(), 3, 1, 1),
        ("normal9 n=3", normal9, 3, 2, 1),
        ("exp8 n=2", exp8, 2, 1, 2),
        ("shifted9 n=1", shifted, 1, 3, 2),
        ("ties9 n=3", vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 9.0], 3, 2, 1),
    ];
    let mut worst = 0.0f64;
    let mut mc_parts = Vec::new();
    for (i, (label, r, n, k, l_min)) in cases.into_iter().enumerate() {
        let exact = oracle_exact_permutation(&r, n, k, l_min).unwrap();
        let cfg = RspConfig {
            n,
            k,
            l_min,
            permutations: 100_000,
            alpha: 0.05,
            seed: 500 + i as u64,
        };
        let mc = chart_round(&ResidualSeries::from_values(r), &cfg, 0).unwrap().p_value;
        worst = worst.max((mc - exact).abs());
        mc_parts.push(format!("{label}: exact {exact:.4} mc {mc:.4}"));
    }
    let pass = split_ok && worst <= 0.01;
    Check::new(
        pass,
        format!(
            "{instances} single-split instances: change point mismatches {tau_mismatch}, max relative T1 difference {max_rel:.1e} ({bit_exact} bit-identical); exact vs L=1e5 p-values, max gap {worst:.4} (<= 0.01): {}",
            mc_parts.join("; ")
        ),
    )
}

// ---------------------------------------------------------------------------

fn ifgls_recovery() -> Check {
    let runs = 100;
    let t0 = Utc.with_ymd_and_hms(2013, 1, 1, 0, 0, 0).unwrap();
    let mut ok = 0;
    let mut a_values = Vec::new();
    let mut iters = 0;
    for i in 0..runs {
        let seed = 70_000 + i as u64;
        let u = gen_ar(&[0.6], NoiseKind::Normal, 3000, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let design: Vec<DesignRow> = u
            .iter()
            .enumerate()
            .map(|(t, e)| {
                let x: f64 = rng.random_range(0.0..10.0);
                let f = 20.0 + 8.0 * (x - 4.0f64).max(0.0) - 3.0 * (6.0 - x).max(0.0);
                DesignRow {
                    y: f + e,
                    x: vec![x],
                    t_index: t,
                    timestamp: t0 + Duration::minutes(10 * t as i64),
                }
            })
            .collect();
        let model = fit(&design, &MarsConfig::default()).unwrap();
        let res = ifgls_loop(&design, &model, &IfglsConfig::default()).unwrap();
        let a1 = res.ar.coeffs().first().copied().unwrap_or(0.0);
        a_values.push(a1);
        iters = iters.max(res.iterations);
        ok += usize::from(res.converged && res.iterations <= 50 && (0.55..=0.65).contains(&a1));
    }
    let share = ok as f64 / runs as f64;
    Check::new(
        share >= 0.95,
        format!(
            "a1 in [0.55, 0.65] and converged in {ok}/{runs} runs (>= 95%); median a1 {:.4}, most iterations {iters}",
            median(a_values)
        ),
    )
}

// ---------------------------------------------------------------------------

/// Upper chi-square tail by composite Simpson on the density.
fn chi_square_tail_by_quadrature(q: f64, df: f64) -> f64 {
    let ln_norm = (df / 2.0) * 2f64.ln() + statrs::function::gamma::ln_gamma(df / 2.0);
    let density = |x: f64| ((df / 2.0 - 1.0) * x.ln() - x / 2.0 - ln_norm).exp();
    let (a, b, n) = (q, q + 400.0, 400_000usize);
    let h = (b - a) / n as f64;
    let mut s = density(a) + density(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * density(a + i as f64 * h);
    }
    s * h / 3.0
}

fn numerical_unit_checks() -> Check {
    let mut failures = Vec::new();
    let mut total = 0;
    let mut check = |label: &str, got: f64, want: f64, tol: f64| {
        total += 1;
        if !((got - want).abs() <= tol) {
            failures.push(format!("{label}: got {got}, want {want}"));
        }
    };
    let exact = 1e-12;

    let hinge = |v, s, k| BasisFunction::new(vec![HingeFactor::new(v, s, k)]).unwrap();
    check("eval_basis above knot", eval_basis(&hinge(0, Sign::Pos, 2.0), &[3.5]).unwrap(), 1.5, exact);
    check("eval_basis below knot", eval_basis(&hinge(0, Sign::Pos, 2.0), &[1.0]).unwrap(), 0.0, exact);
    let product = BasisFunction::new(vec![
        HingeFactor::new(0, Sign::Pos, 2.0),
        HingeFactor::new(1, Sign::Neg, 4.0),
    ])
    .unwrap();
    check("eval_basis product", eval_basis(&product, &[3.0, 1.0]).unwrap(), 3.0, exact);

    check("gcv C=5", gcv(20.0, 10, 1, 2.0, 2.0).unwrap(), 8.0, exact);
    check("gcv perfect fit", gcv(0.0, 50, 3, 4.0, 2.0).unwrap(), 0.0, exact);
    check("gcv C=2", gcv(10.0, 100, 0, 1.0, 2.0).unwrap(), 0.1 / (0.98 * 0.98), exact);
    check("gcv C=2 rounded", gcv(10.0, 100, 0, 1.0, 2.0).unwrap(), 0.104123, 5e-7);

    let t0 = |m: &[f64]| stat_isolated(&subgroup_values(m, 1).unwrap());
    check("T0 [1,2,3]", t0(&[1.0, 2.0, 3.0]), 1.0, exact);
    check("T0 [0,0,10]", t0(&[0.0, 0.0, 10.0]), 20.0 / 3.0, exact);
    check("T0 constant", t0(&[2.5; 6]), 0.0, exact);

    let t1 = |m: &[f64], l| segment_means(m, 1, l).stat(1);
    check("T1 [0,0,5,5]", t1(&[0.0, 0.0, 5.0, 5.0], 1), 25.0, exact);
    check("T1 [0,0,0,9]", t1(&[0.0, 0.0, 0.0, 9.0], 1), 60.75, exact);
    check("T1 constant", t1(&[4.0; 12], 5), 0.0, exact);
    check("oracle T1 [0,0,0,9]", oracle_single_split(&[0.0, 0.0, 0.0, 9.0], 1).1, 60.75, exact);

    check("aggregate two stages", aggregate(&[5.0, 12.0], &[5.0, 10.0], &[1.0, 2.0]).unwrap(), 1.0, exact);
    check("aggregate T=u", aggregate(&[3.0, 8.0], &[3.0, 8.0], &[0.5, 2.0]).unwrap(), 0.0, exact);
    check("aggregate single", aggregate(&[10.0], &[4.0], &[2.0]).unwrap(), 3.0, exact);

    let reference = [0.5, 1.5, 2.5, 3.5];
    check("p_value middle", p_value(2.0, &reference), 0.5, exact);
    check("p_value below all", p_value(0.0, &reference), 1.0, exact);
    check("p_value above all", p_value(4.0, &reference), 0.0, exact);

    let q = ljung_box_statistic(&[0.3], 100);
    check("Box-Ljung Q", q, 9.2727, 1e-4);
    check("Box-Ljung zero acf", ljung_box_statistic(&[0.0, 0.0, 0.0], 80), 0.0, exact);
    let oracle = chi_square_tail_by_quadrature(9.2727, 1.0);
    check("chi-square tail oracle", oracle, 0.00233, 1e-4);
    check("chi-square tail", chi_square_sf(9.2727, 1), oracle, 1e-4);
    check("chi-square tail at 0", chi_square_sf(0.0, 3), 1.0, exact);
    let white = gen_ar(&[], NoiseKind::Normal, 400, 5).unwrap();
    let lb = box_ljung(&white, 2).unwrap();
    check("box_ljung p in [0,1]", f64::from(u8::from((0.0..=1.0).contains(&lb.p_value))), 1.0, exact);

    let n_fail = failures.len();
    Check::new(
        n_fail == 0,
        if n_fail == 0 {
            format!("{total} checks reproduced")
        } else {
            format!("{n_fail} of {total} checks failed: {}", failures.join("; "))
        },
    )
}

// ---------------------------------------------------------------------------

const COMPARED: [&str; 4] = ["segments.csv", "plot_data.csv", "control_chart.svg", "power_curve.svg"];

fn run_in(dir: &Path, input: &Path, threads: usize) -> Vec<Vec<u8>> {
    let mut cfg = RunConfig::default();
    cfg.input.path = Some(input.to_path_buf());
    cfg.output.dir = dir.to_path_buf();
    cfg.rsp.seed = Some(2024);
    cfg.rsp.permutations = 300;
    cfg.features.use_ = vec![Feature::WindSpeed, Feature::OutTemp, Feature::Month];
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| run_all(&cfg))
        .unwrap();
    COMPARED.iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect()
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("scada.csv");
    let cfg = SynthScadaConfig {
        len: 2500,
        seed: 8,
        shift: ShiftSpec::new(ShiftKind::MultiStep, vec![1200, 1500], vec![-4.0, 0.0]).unwrap(),
        ..Default::default()
    };
    write_scada_csv(&synth_scada(&cfg).unwrap(), std::fs::File::create(&input).unwrap()).unwrap();

    let a = run_in(&tmp.path().join("a"), &input, 1);
    let b = run_in(&tmp.path().join("b"), &input, 1);
    let c = run_in(&tmp.path().join("c"), &input, 4);
    let segments = String::from_utf8_lossy(&a[0]).lines().count() - 1;
    let same_runs = a == b;
    let same_threads = a == c;
    Check::new(
        same_runs && same_threads && segments > 0,
        format!(
            "{} compared byte-for-byte; repeat run identical: {same_runs}, 1 vs 4 threads identical: {same_threads}; {segments} segment row(s)",
            COMPARED.join(", ")
        ),
    )
}
