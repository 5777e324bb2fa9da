//! Greedy recursive segmentation of subgroup means.
//!
//! With `c_i = rbar_i - grand` and prefix sums of `c`, a segment `[a, b)`
//! contributes `S^2 / L` to the between-segment sum of squares. Splitting it at
//! `tau` raises the total by `S1^2/L1 + S2^2/L2 - S^2/L`, so each stage only
//! needs the best split inside every current segment, and only the two halves
//! of the last split need a fresh scan.

/// Change points and stage statistics `T_1..=T_k` (stage 0 has no cuts).
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    /// `cuts[k - 1]` holds the sorted change points after stage `k`.
    cuts: Vec<Vec<usize>>,
    /// `stats[k]` is `T_k`; `stats[0] = 0`.
    stats: Vec<f64>,
    /// Stages requested after clamping.
    stages: usize,
    /// First stage that had no admissible split, if any.
    truncated_at: Option<usize>,
}

impl SegmentationResult {
    /// Sorted change points at stage `k` (empty for `k = 0`).
    pub fn change_points(&self, k: usize) -> &[usize] {
        if k == 0 {
            &[]
        } else {
            &self.cuts[(k - 1).min(self.cuts.len().saturating_sub(1))]
        }
    }

    /// `T_k`, repeating the last reached value past a truncation.
    pub fn stat(&self, k: usize) -> f64 {
        self.stats[k.min(self.stats.len() - 1)]
    }

    /// `T_1..=T_stages`, padded past a truncation.
    pub fn stage_stats(&self) -> Vec<f64> {
        (1..=self.stages).map(|k| self.stat(k)).collect()
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    /// Stages actually reached.
    pub fn reached(&self) -> usize {
        self.cuts.len()
    }

    pub fn truncated_at(&self) -> Option<usize> {
        self.truncated_at
    }

    /// `(start, end, mean)` of every segment at stage `k`, `end` exclusive.
    pub fn segments(&self, means: &[f64], k: usize) -> Vec<(usize, usize, f64)> {
        let mut bounds = vec![0];
        bounds.extend_from_slice(self.change_points(k));
        bounds.push(means.len());
        bounds
            .windows(2)
            .map(|w| {
                let seg = &means[w[0]..w[1]];
                (w[0], w[1], seg.iter().sum::<f64>() / seg.len() as f64)
            })
            .collect()
    }
}

/// Largest admissible stage count: `floor(m / l_min) - 1`.
pub fn max_stages(m: usize, l_min: usize) -> usize {
    (m / l_min.max(1)).saturating_sub(1)
}

#[derive(Clone, Copy)]
struct Seg {
    start: usize,
    end: usize,
    best: Option<(usize, f64)>,
}

fn best_split(prefix: &[f64], start: usize, end: usize, l_min: usize) -> Option<(usize, f64)> {
    if end - start < 2 * l_min {
        return None;
    }
    let total = prefix[end] - prefix[start];
    let len = (end - start) as f64;
    let base = total * total / len;
    let mut best: Option<(usize, f64)> = None;
    for tau in start + l_min..=end - l_min {
        let s1 = prefix[tau] - prefix[start];
        let s2 = total - s1;
        let gain = s1 * s1 / (tau - start) as f64 + s2 * s2 / (end - tau) as f64 - base;
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((tau, gain));
        }
    }
    best
}

/// Segments `means` over up to `k` stages with minimum segment length `l_min`.
/// `k` is clamped to [`max_stages`]. Ties go to the smallest change point.
pub fn segment_means(means: &[f64], k: usize, l_min: usize) -> SegmentationResult {
    assert!(l_min >= 1, "l_min must be >= 1");
    let m = means.len();
    let stages = k.min(max_stages(m, l_min));
    let grand = means.iter().sum::<f64>() / m as f64;
    let mut prefix = Vec::with_capacity(m + 1);
    prefix.push(0.0);
    for x in means {
        prefix.push(prefix.last().unwrap() + (x - grand));
    }

    let mut segs = vec![Seg {
        start: 0,
        end: m,
        best: best_split(&prefix, 0, m, l_min),
    }];
    let mut cuts: Vec<usize> = Vec::new();
    let mut out = SegmentationResult {
        cuts: Vec::with_capacity(stages),
        stats: vec![0.0],
        stages,
        truncated_at: None,
    };
    let mut total = 0.0;
    for stage in 1..=stages {
        // Segments are kept in order, so a strict comparison keeps the smallest tau.
        let mut pick: Option<(usize, usize, f64)> = None;
        for (i, s) in segs.iter().enumerate() {
            if let Some((tau, gain)) = s.best {
                if pick.is_none_or(|(_, _, g)| gain > g) {
                    pick = Some((i, tau, gain));
                }
            }
        }
        let Some((i, tau, gain)) = pick else {
            out.truncated_at = Some(stage);
            break;
        };
        let Seg { start, end, .. } = segs[i];
        segs[i] = Seg {
            start,
            end: tau,
            best: best_split(&prefix, start, tau, l_min),
        };
        segs.insert(
            i + 1,
            Seg {
                start: tau,
                end,
                best: best_split(&prefix, tau, end, l_min),
            },
        );
        let pos = cuts.partition_point(|&c| c < tau);
        cuts.insert(pos, tau);
        total += gain.max(0.0);
        out.cuts.push(cuts.clone());
        out.stats.push(total);
    }
    out
}
