//! Exhaustive reference computations for small chart instances.
//!
//! Everything here is deliberately naive: segment sums are recomputed from
//! scratch for every candidate so that nothing is shared with the fast paths
//! in `rsp`.

use crate::error::{Error, Result};

/// Longest series [`oracle_exact_permutation`] will enumerate.
pub const ORACLE_MAX_LEN: usize = 9;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `sum over segments of len * (segment mean - grand)^2` for sorted interior cuts.
fn between_ss(means: &[f64], cuts: &[usize], grand: f64) -> f64 {
    let mut bounds = vec![0];
    bounds.extend_from_slice(cuts);
    bounds.push(means.len());
    bounds
        .windows(2)
        .map(|w| {
            let seg = &means[w[0]..w[1]];
            let d = mean(seg) - grand;
            seg.len() as f64 * d * d
        })
        .sum()
}

fn feasible(m: usize, cuts: &[usize], l_min: usize) -> bool {
    let mut prev = 0;
    for &c in cuts.iter().chain(std::iter::once(&m)) {
        if c < prev + l_min {
            return false;
        }
        prev = c;
    }
    true
}

/// Best single change point over every `tau` in `[l_min, m - l_min]`; smallest `tau` on ties.
pub fn oracle_single_split(means: &[f64], l_min: usize) -> (usize, f64) {
    let m = means.len();
    assert!(l_min >= 1 && m >= 2 * l_min, "need m >= 2 l_min");
    let grand = mean(means);
    let mut best = (0, f64::NEG_INFINITY);
    for tau in l_min..=m - l_min {
        let t1 = between_ss(means, &[tau], grand);
        if t1 > best.1 {
            best = (tau, t1);
        }
    }
    best
}

/// `T_0..=T_k` with greedy one-point-per-stage refinement; infeasible stages repeat the last value.
fn stage_stats(means: &[f64], k_max: usize, l_min: usize) -> Vec<f64> {
    let m = means.len();
    let grand = mean(means);
    let t0 = means.iter().map(|x| (x - grand).abs()).fold(0.0, f64::max);
    let mut out = vec![t0];
    let mut cuts: Vec<usize> = Vec::new();
    let mut last = 0.0;
    for _ in 1..=k_max {
        let mut best: Option<(usize, f64)> = None;
        for tau in 1..m {
            if cuts.contains(&tau) {
                continue;
            }
            let mut trial = cuts.clone();
            trial.push(tau);
            trial.sort_unstable();
            if !feasible(m, &trial, l_min) {
                continue;
            }
            let t = between_ss(means, &trial, grand);
            if best.is_none_or(|(_, b)| t > b) {
                best = Some((tau, t));
            }
        }
        if let Some((tau, t)) = best {
            cuts.push(tau);
            cuts.sort_unstable();
            last = t;
        }
        out.push(last);
    }
    out
}

fn subgroup_means(values: &[f64], n: usize) -> Vec<f64> {
    values.chunks_exact(n).map(mean).collect()
}

fn next_permutation(v: &mut [f64]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("v[i] qualifies");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Exact permutation p-value of the aggregated chart statistic.
///
/// Every distinct arrangement of the pooled values (trailing remainder dropped)
/// is visited once; since each occurs equally often among all `len!` orderings
/// this is the exact reference distribution. Moments use divisor `N`.
pub fn oracle_exact_permutation(r: &[f64], n: usize, k: usize, l_min: usize) -> Result<f64> {
    if r.len() > ORACLE_MAX_LEN {
        return Err(Error::InvalidConfig(format!(
            "exact enumeration limited to {ORACLE_MAX_LEN} values, got {}",
            r.len()
        )));
    }
    if n == 0 || l_min == 0 {
        return Err(Error::InvalidConfig("n and l_min must be >= 1".into()));
    }
    let m = r.len() / n;
    if m < 2 {
        return Err(Error::SeriesTooShort(format!("{} values give fewer than 2 subgroups of {n}", r.len())));
    }
    let k = k.min((m / l_min).saturating_sub(1));
    let observed = stage_stats(&subgroup_means(&r[..m * n], n), k, l_min);

    let mut pool = r[..m * n].to_vec();
    pool.sort_by(f64::total_cmp);
    let mut reference = Vec::new();
    loop {
        reference.push(stage_stats(&subgroup_means(&pool, n), k, l_min));
        if !next_permutation(&mut pool) {
            break;
        }
    }

    let count = reference.len() as f64;
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    for stage in 0..=k {
        u[stage] = reference.iter().map(|t| t[stage]).sum::<f64>() / count;
        let var = reference.iter().map(|t| (t[stage] - u[stage]).powi(2)).sum::<f64>() / count;
        v[stage] = var.sqrt();
        if !(v[stage] > 0.0) {
            return Err(Error::DegenerateReference { stage });
        }
    }
    let w = |t: &[f64]| {
        (0..=k)
            .map(|s| (t[s] - u[s]) / v[s])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let w_obs = w(&observed);
    let hits = reference.iter().filter(|t| w(t) >= w_obs).count();
    Ok(hits as f64 / count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_split_arithmetic() {
        let (tau, t1) = oracle_single_split(&[0.0, 0.0, 0.0, 9.0], 1);
        assert_eq!(tau, 3);
        assert!((t1 - 60.75).abs() < 1e-12);
    }

    #[test]
    fn constant_means_pick_first_feasible() {
        assert_eq!(oracle_single_split(&[2.0; 10], 3), (3, 0.0));
    }

    #[test]
    fn stage_stats_never_decrease() {
        let means = [0.3, -1.2, 2.2, 0.1, 0.0, 1.7, -0.4, 0.9];
        let t = stage_stats(&means, 6, 1);
        assert!(t[1..].windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn distinct_permutation_count() {
        let mut v = vec![1.0, 1.0, 2.0, 3.0];
        let mut count = 1;
        while next_permutation(&mut v) {
            count += 1;
        }
        assert_eq!(count, 12);
    }

    #[test]
    fn exact_p_is_a_probability() {
        let p = oracle_exact_permutation(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3, 1, 1).unwrap();
        assert!(p > 0.0 && p <= 1.0);
        // Sorted order puts the extreme split first: 2 of 20 subgroup partitions match it.
        assert!((p - 0.1).abs() < 1e-12, "{p}");
    }

    #[test]
    fn constant_values_are_degenerate() {
        assert!(matches!(
            oracle_exact_permutation(&[4.0; 6], 3, 1, 1),
            Err(Error::DegenerateReference { .. })
        ));
    }

    #[test]
    fn long_series_rejected() {
        assert!(oracle_exact_permutation(&[0.0; 10], 2, 1, 1).is_err());
    }
}
