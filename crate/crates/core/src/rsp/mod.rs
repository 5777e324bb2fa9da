//! Distribution-free Phase I chart for level shifts: recursive segmentation
//! statistics calibrated by permuting the pooled observations.

mod io;
mod permute;
mod segment;

use chrono::{DateTime, Utc};

pub use io::{write_plot_data_csv, write_segments_csv, PLOT_DATA_HEADER, SEGMENTS_HEADER};
pub use permute::{permutation_reference, permutation_rng, permutation_stats, permuted_values, Reference};
pub use segment::{max_stages, segment_means, SegmentationResult};

use crate::error::{Error, Result};
use crate::series::ResidualSeries;

/// `m` complete subgroups of `n` consecutive observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupMatrix {
    n: usize,
    values: Vec<f64>,
    means: Vec<f64>,
    grand_mean: f64,
    dropped: usize,
    t_index: Vec<usize>,
    timestamps: Vec<DateTime<Utc>>,
}

impl SubgroupMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.means.len()
    }

    /// Row-major `r_ij`, subgroup `i` at `values[i n .. (i + 1) n]`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn grand_mean(&self) -> f64 {
        self.grand_mean
    }

    /// Trailing observations that did not fill a subgroup.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// First and last `t_index` of subgroup `i`.
    pub fn t_range(&self, i: usize) -> (usize, usize) {
        (self.t_index[i * self.n], self.t_index[(i + 1) * self.n - 1])
    }

    /// First and last timestamp of subgroup `i`.
    pub fn time_range(&self, i: usize) -> (DateTime<Utc>, DateTime<Utc>) {
        (self.timestamps[i * self.n], self.timestamps[(i + 1) * self.n - 1])
    }
}

pub fn subgroup(r: &ResidualSeries, n: usize) -> Result<SubgroupMatrix> {
    if n == 0 {
        return Err(Error::InvalidConfig("subgroup size n must be >= 1".into()));
    }
    if r.len() < n {
        return Err(Error::SeriesTooShort(format!(
            "{} observations cannot fill one subgroup of {n}",
            r.len()
        )));
    }
    let m = r.len() / n;
    let values = r.values()[..m * n].to_vec();
    let means: Vec<f64> = values.chunks_exact(n).map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let grand_mean = means.iter().sum::<f64>() / m as f64;
    Ok(SubgroupMatrix {
        n,
        values,
        means,
        grand_mean,
        dropped: r.len() - m * n,
        t_index: r.t_index()[..m * n].to_vec(),
        timestamps: r.timestamps()[..m * n].to_vec(),
    })
}

/// [`subgroup`] on bare values placed on a synthetic time grid.
pub fn subgroup_values(values: &[f64], n: usize) -> Result<SubgroupMatrix> {
    subgroup(&ResidualSeries::from_values(values.to_vec()), n)
}

/// Shewhart statistic `T_0 = max_i |rbar_i - grand|`.
pub fn stat_isolated(sg: &SubgroupMatrix) -> f64 {
    shewhart(sg.means())
}

fn shewhart(means: &[f64]) -> f64 {
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    means.iter().map(|x| (x - grand).abs()).fold(0.0, f64::max)
}

/// Index of the subgroup attaining `T_0`; smallest on ties.
fn shewhart_argmax(means: &[f64], grand: f64) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in means.iter().enumerate() {
        let d = (x - grand).abs();
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

pub fn segment_stats(sg: &SubgroupMatrix, k: usize, l_min: usize) -> SegmentationResult {
    segment_means(sg.means(), k, l_min)
}

/// `[T_0, T_1, ..., T_K]`.
pub(crate) fn stage_vector(means: &[f64], seg: &SegmentationResult) -> Vec<f64> {
    let mut t = Vec::with_capacity(seg.stages() + 1);
    t.push(shewhart(means));
    t.extend(seg.stage_stats());
    t
}

/// `W = max_k (T_k - u_k) / v_k`.
pub fn aggregate(t: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    aggregate_argmax(t, u, v).map(|(w, _)| w)
}

/// `W` and the first stage attaining it.
pub fn aggregate_argmax(t: &[f64], u: &[f64], v: &[f64]) -> Result<(f64, usize)> {
    if t.len() != u.len() || t.len() != v.len() || t.is_empty() {
        return Err(Error::ContractViolation(format!(
            "aggregate needs equal non-empty lengths, got {}, {}, {}",
            t.len(),
            u.len(),
            v.len()
        )));
    }
    if let Some(stage) = v.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::DegenerateReference { stage });
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 0..t.len() {
        let z = (t[k] - u[k]) / v[k];
        if z > best.0 {
            best = (z, k);
        }
    }
    Ok(best)
}

/// `(1 / L) #{l : W~_l >= W}`, with no correction for the observed statistic.
pub fn p_value(w: f64, reference: &[f64]) -> f64 {
    reference.iter().filter(|&&x| x >= w).count() as f64 / reference.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RspConfig {
    /// Subgroup size.
    pub n: usize,
    /// Segmentation stages before clamping.
    pub k: usize,
    pub l_min: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for RspConfig {
    fn default() -> Self {
        RspConfig {
            n: 6,
            k: 50,
            l_min: 5,
            permutations: 1000,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl RspConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n == 0 {
            return bad("rsp.n must be >= 1");
        }
        if self.l_min == 0 {
            return bad("rsp.l_min must be >= 1");
        }
        if self.permutations < 2 {
            return bad("rsp.permutations must be >= 2");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("rsp.alpha must be in (0, 1]");
        }
        Ok(())
    }

    /// Shortest series one round of the chart accepts.
    pub fn min_len(&self) -> usize {
        self.n * 2 * self.l_min
    }
}

/// A run of removed observations, in subgroup and original coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Removal {
    /// Subgroup range in the round's own subgrouping, end exclusive.
    pub start_subgroup: usize,
    pub end_subgroup: usize,
    pub start_t_index: usize,
    pub end_t_index: usize,
    pub start_time: DateTime<Utc>,
    pub end_time: DateTime<Utc>,
    pub segment_mean: f64,
    pub grand_mean: f64,
}

/// One round of the chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartResult {
    pub iteration: usize,
    pub m: usize,
    pub n: usize,
    pub dropped: usize,
    pub subgroup_means: Vec<f64>,
    /// Timestamp of each subgroup's first observation.
    pub subgroup_start: Vec<DateTime<Utc>>,
    pub grand_mean: f64,
    /// Observed `T_0..=T_K`.
    pub stats: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: f64,
    pub p_value: f64,
    /// Stage attaining `W`.
    pub k_star: usize,
    /// Change points at stage `k_star`.
    pub change_points: Vec<usize>,
    /// `(start, end, mean)` segments at stage `k_star`, end exclusive.
    pub segments: Vec<(usize, usize, f64)>,
    /// First stage the segmentation could not reach, if any.
    pub truncated_at: Option<usize>,
    pub removed: Option<Removal>,
    pub permutations: usize,
    pub seed: u64,
}

impl ChartResult {
    pub fn signals(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `p > alpha`: the remaining data look in control.
    InControl,
    /// Fewer than `n * 2 * l_min` observations remain.
    TooShort { remaining: usize },
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub rounds: Vec<ChartResult>,
    pub retained: ResidualSeries,
    pub stop: StopReason,
}

impl Analysis {
    pub fn removals(&self) -> impl Iterator<Item = (&ChartResult, &Removal)> {
        self.rounds.iter().filter_map(|r| r.removed.as_ref().map(|rm| (r, rm)))
    }
}

/// One chart round on `r` without removing anything.
pub fn chart_round(r: &ResidualSeries, config: &RspConfig, iteration: usize) -> Result<ChartResult> {
    let sg = subgroup(r, config.n)?;
    let seg = segment_stats(&sg, config.k, config.l_min);
    let stats = stage_vector(sg.means(), &seg);
    let reference = permutation_reference(&sg, config.k, config.l_min, config.permutations, config.seed, iteration)?;
    let (w, k_star) = aggregate_argmax(&stats, &reference.u, &reference.v)?;
    let p = p_value(w, &reference.w);
    Ok(ChartResult {
        iteration,
        m: sg.m(),
        n: sg.n(),
        dropped: sg.dropped(),
        subgroup_means: sg.means().to_vec(),
        subgroup_start: (0..sg.m()).map(|i| sg.time_range(i).0).collect(),
        grand_mean: sg.grand_mean(),
        stats,
        u: reference.u,
        v: reference.v,
        w,
        p_value: p,
        k_star,
        change_points: seg.change_points(k_star).to_vec(),
        segments: seg.segments(sg.means(), k_star),
        truncated_at: seg.truncated_at(),
        removed: None,
        permutations: config.permutations,
        seed: config.seed,
    })
}

/// Subgroup range to remove for a signalling round, end exclusive.
fn removal_range(chart: &ChartResult) -> (usize, usize) {
    if chart.k_star == 0 {
        let i = shewhart_argmax(&chart.subgroup_means, chart.grand_mean);
        return (i, i + 1);
    }
    let mut best = (0, 0, f64::NEG_INFINITY);
    for &(a, b, mean) in &chart.segments {
        let d = (mean - chart.grand_mean).abs();
        if d > best.2 {
            best = (a, b, d);
        }
    }
    (best.0, best.1)
}

/// Repeats the chart, removing the most shifted segment after every signal,
/// until `p > alpha` or the remainder is too short for another round.
pub fn analyze(r: &ResidualSeries, config: &RspConfig) -> Result<Analysis> {
    config.validate()?;
    if r.len() < config.min_len() {
        return Err(Error::SeriesTooShort(format!(
            "{} observations, the chart needs at least n * 2 * l_min = {}",
            r.len(),
            config.min_len()
        )));
    }
    let mut current = r.clone();
    let mut rounds = Vec::new();
    loop {
        if current.len() < config.min_len() {
            return Ok(Analysis {
                rounds,
                stop: StopReason::TooShort {
                    remaining: current.len(),
                },
                retained: current,
            });
        }
        let mut chart = chart_round(&current, config, rounds.len())?;
        if !chart.signals(config.alpha) {
            rounds.push(chart);
            return Ok(Analysis {
                rounds,
                retained: current,
                stop: StopReason::InControl,
            });
        }
        let (a, b) = removal_range(&chart);
        let n = chart.n;
        let (lo, hi) = (a * n, b * n - 1);
        let mean = chart.subgroup_means[a..b].iter().sum::<f64>() / (b - a) as f64;
        chart.removed = Some(Removal {
            start_subgroup: a,
            end_subgroup: b,
            start_t_index: current.t_index()[lo],
            end_t_index: current.t_index()[hi],
            start_time: current.timestamps()[lo],
            end_time: current.timestamps()[hi],
            segment_mean: mean,
            grand_mean: chart.grand_mean,
        });
        let keep: Vec<bool> = (0..current.len()).map(|i| i < lo || i > hi).collect();
        current = current.retain_positions(&keep);
        rounds.push(chart);
    }
}
