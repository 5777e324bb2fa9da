//! Greedy forward pass.
//!
//! Each step tries every (parent, variable, knot) triple and adds the
//! reflected pair `parent * (x - t)+`, `parent * (t - x)+` that most reduces
//! training SSE. Since `(x - t)+ - (t - x)+ = x - t` and the parent is already
//! in the basis, the pair spans the same space as `{parent * x, parent * (x - t)+}`.
//! For a fixed (parent, variable) the linear direction is projected out once
//! and every knot is then scored in a single descending sweep over `x`, with
//! running sums giving `r'h`, `|h|^2` and `|Q'h|^2` in O(#basis) per knot.

use rayon::prelude::*;

use super::{arity, BasisFunction, HingeFactor, MarsModel, Sign};
use crate::error::{Error, Result};
use crate::ingest::DesignRow;

/// A new direction is kept only if this fraction of its squared norm
/// survives projection onto the current basis.
const ADD_TOL: f64 = 1e-10;
/// Same test for the linear `parent * x` direction during candidate scoring.
const LIN_TOL: f64 = 1e-10;
/// Knot scores with a smaller projected norm are treated as collinear.
const HINGE_TOL: f64 = 1e-8;
/// Below this fraction of the total sum of squares the fit is exact.
const EXACT_FIT: f64 = 1e-24;

#[derive(Debug, Clone)]
pub struct ForwardSearch {
    pub basis: Vec<BasisFunction>,
    /// Training SSE after the intercept and after each forward step.
    pub sse_path: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    parent: usize,
    var: usize,
    knot: f64,
}

impl Candidate {
    /// Larger gain wins; exact ties go to the lower variable, then smaller
    /// knot, then earlier parent.
    fn beats(&self, other: &Candidate) -> bool {
        if self.gain != other.gain {
            return self.gain > other.gain;
        }
        (self.var, self.knot, self.parent) < (other.var, other.knot, other.parent)
    }
}

/// Orthonormal basis of the current model columns, stored row-major.
struct Orthonormal {
    rows: usize,
    stride: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Orthonormal {
    fn new(rows: usize, capacity: usize) -> Self {
        Orthonormal {
            rows,
            stride: capacity,
            cols: 0,
            data: vec![0.0; rows * capacity],
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.stride..i * self.stride + self.cols]
    }

    /// Removes the span of the stored columns from `v` (classical Gram-Schmidt, twice).
    fn project_out(&self, v: &mut [f64]) {
        let k = self.cols;
        for _ in 0..2 {
            let mut c = vec![0.0; k];
            for (i, &vi) in v.iter().enumerate() {
                for (cj, qj) in c.iter_mut().zip(self.row(i)) {
                    *cj += qj * vi;
                }
            }
            for (i, vi) in v.iter_mut().enumerate() {
                let dot: f64 = self.row(i).iter().zip(&c).map(|(q, cj)| q * cj).sum();
                *vi -= dot;
            }
        }
    }

    fn push(&mut self, unit: &[f64]) {
        debug_assert!(self.cols < self.stride);
        let k = self.cols;
        for i in 0..self.rows {
            self.data[i * self.stride + k] = unit[i];
        }
        self.cols += 1;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

struct Search {
    x_cols: Vec<Vec<f64>>,
    /// Row indices per variable, sorted by descending value.
    order: Vec<Vec<usize>>,
    q: Orthonormal,
    resid: Vec<f64>,
    basis: Vec<BasisFunction>,
    values: Vec<Vec<f64>>,
}

impl Search {
    fn new(design: &[DesignRow], n_features: usize, capacity: usize) -> Self {
        let t = design.len();
        let x_cols: Vec<Vec<f64>> = (0..n_features)
            .map(|v| design.iter().map(|r| r.x[v]).collect())
            .collect();
        let order = x_cols
            .iter()
            .map(|col| {
                let mut idx: Vec<usize> = (0..t).collect();
                idx.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then(a.cmp(&b)));
                idx
            })
            .collect();
        let mut q = Orthonormal::new(t, capacity);
        let unit = vec![1.0 / (t as f64).sqrt(); t];
        q.push(&unit);
        let mean = design.iter().map(|r| r.y).sum::<f64>() / t as f64;
        let resid = design.iter().map(|r| r.y - mean).collect();
        Search {
            x_cols,
            order,
            q,
            resid,
            basis: vec![BasisFunction::intercept()],
            values: vec![vec![1.0; t]],
        }
    }

    fn best_knot(&self, parent: usize, var: usize) -> Option<Candidate> {
        let p = &self.values[parent];
        let x = &self.x_cols[var];

        let mut w: Vec<f64> = p.iter().zip(x).map(|(a, b)| a * b).collect();
        let w_norm = norm2(&w);
        if w_norm == 0.0 {
            return None;
        }
        self.q.project_out(&mut w);
        let w_res = norm2(&w);
        let mut r = self.resid.clone();
        let mut gain_lin = 0.0;
        let extra = if w_res > LIN_TOL * w_norm {
            let s = w_res.sqrt();
            w.iter_mut().for_each(|v| *v /= s);
            let c = dot(&r, &w);
            gain_lin = c * c;
            r.iter_mut().zip(&w).for_each(|(ri, wi)| *ri -= c * wi);
            Some(w)
        } else {
            None
        };

        let k = self.q.cols;
        let kk = k + usize::from(extra.is_some());
        let mut a = vec![0.0; kk];
        let mut c = vec![0.0; kk];
        let (mut s_rpx, mut s_rp, mut s_ppxx, mut s_ppx, mut s_pp) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut active = false;
        let mut best: Option<(f64, f64)> = None;

        let ord = &self.order[var];
        let mut start = 0;
        while start < ord.len() {
            let t = x[ord[start]];
            let mut end = start;
            let mut supported = false;
            while end < ord.len() && x[ord[end]] == t {
                supported |= p[ord[end]] > 0.0;
                end += 1;
            }

            if supported && active {
                let rh = s_rpx - t * s_rp;
                let hh = s_ppxx - 2.0 * t * s_ppx + t * t * s_pp;
                let qh: f64 = a.iter().zip(&c).map(|(ai, ci)| (ai - t * ci).powi(2)).sum();
                let den = hh - qh;
                let gain_h = if hh > 0.0 && den > HINGE_TOL * hh {
                    rh * rh / den
                } else {
                    0.0
                };
                let total = gain_lin + gain_h;
                // Descending sweep: `>=` hands exact ties to the smaller knot.
                if best.is_none_or(|(g, _)| total >= g) {
                    best = Some((total, t));
                }
            }

            for &i in &ord[start..end] {
                let pi = p[i];
                if pi == 0.0 {
                    continue;
                }
                active = true;
                let px = pi * x[i];
                s_rpx += r[i] * px;
                s_rp += r[i] * pi;
                s_ppxx += px * px;
                s_ppx += pi * px;
                s_pp += pi * pi;
                for (j, qij) in self.q.row(i).iter().enumerate() {
                    a[j] += qij * px;
                    c[j] += qij * pi;
                }
                if let Some(e) = &extra {
                    a[k] += e[i] * px;
                    c[k] += e[i] * pi;
                }
            }
            start = end;
        }

        best.map(|(gain, knot)| Candidate {
            gain,
            parent,
            var,
            knot,
        })
    }

    /// Appends `col` if it adds a new direction; returns whether it did.
    fn try_add(&mut self, basis: BasisFunction, col: Vec<f64>) -> bool {
        let n = norm2(&col);
        if n == 0.0 {
            return false;
        }
        let mut v = col.clone();
        self.q.project_out(&mut v);
        let res = norm2(&v);
        if res <= ADD_TOL * n {
            return false;
        }
        let s = res.sqrt();
        v.iter_mut().for_each(|vi| *vi /= s);
        let c = dot(&self.resid, &v);
        self.resid.iter_mut().zip(&v).for_each(|(r, vi)| *r -= c * vi);
        self.q.push(&v);
        self.basis.push(basis);
        self.values.push(col);
        true
    }
}

/// Runs the forward pass and returns the selected basis and SSE trajectory.
pub fn forward_search(
    design: &[DesignRow],
    max_terms: usize,
    max_degree: usize,
    min_rel_improvement: f64,
) -> Result<ForwardSearch> {
    if max_terms == 0 || max_degree == 0 {
        return Err(Error::InvalidConfig(
            "max_terms and max_degree must be >= 1".into(),
        ));
    }
    let n_features = arity(design)?;
    let t = design.len();
    let capacity = max_terms.min(t);
    let mut search = Search::new(design, n_features, capacity);

    let tss: f64 = design.iter().map(|r| r.y * r.y).sum();
    let mut sse = norm2(&search.resid);
    let mut sse_path = vec![sse];

    while search.basis.len() < capacity && sse > EXACT_FIT * tss.max(f64::MIN_POSITIVE) {
        let pairs: Vec<(usize, usize)> = (0..search.basis.len())
            .filter(|&m| search.basis[m].degree() < max_degree)
            .flat_map(|m| (0..n_features).map(move |v| (m, v)))
            .filter(|&(m, v)| !search.basis[m].uses_var(v))
            .collect();
        let candidates: Vec<Option<Candidate>> = pairs
            .par_iter()
            .map(|&(m, v)| search.best_knot(m, v))
            .collect();
        let Some(best) = candidates
            .into_iter()
            .flatten()
            .reduce(|acc, c| if c.beats(&acc) { c } else { acc })
        else {
            break;
        };
        if !(best.gain > min_rel_improvement * sse) {
            break;
        }

        let parent_basis = search.basis[best.parent].clone();
        let p = search.values[best.parent].clone();
        let x = &search.x_cols[best.var];
        let up: Vec<f64> = p
            .iter()
            .zip(x)
            .map(|(pi, xi)| pi * (xi - best.knot).max(0.0))
            .collect();
        let down: Vec<f64> = p
            .iter()
            .zip(x)
            .map(|(pi, xi)| pi * (best.knot - xi).max(0.0))
            .collect();

        let mut added = false;
        for (sign, col) in [(Sign::Pos, up), (Sign::Neg, down)] {
            if search.basis.len() >= capacity {
                break;
            }
            let b = parent_basis.extended(HingeFactor::new(best.var, sign, best.knot));
            added |= search.try_add(b, col);
        }
        if !added {
            break;
        }
        let new_sse = norm2(&search.resid);
        sse_path.push(new_sse);
        sse = new_sse;
    }

    Ok(ForwardSearch {
        basis: search.basis,
        sse_path,
    })
}

/// Unpruned model with default penalty and stopping tolerance.
pub fn forward_pass(
    design: &[DesignRow],
    max_terms: usize,
    max_degree: usize,
    config: &super::MarsConfig,
) -> Result<MarsModel> {
    let search = forward_search(design, max_terms, max_degree, config.min_rel_improvement)?;
    MarsModel::fit_basis(search.basis, design, config.penalty)
}

#[cfg(test)]
mod tests {
    use super::super::tests::design_from;
    use super::super::MarsConfig;
    use super::*;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn rmse(model: &MarsModel, design: &[DesignRow]) -> f64 {
        (model.rss() / design.len() as f64).sqrt()
    }

    #[test]
    fn constant_response_is_intercept_only() {
        let xs: Vec<Vec<f64>> = grid(30, 0.0, 1.0).into_iter().map(|v| vec![v]).collect();
        let design = design_from(&xs, &[5.0; 30]);
        let m = forward_pass(&design, 21, 2, &MarsConfig::default()).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m.coeffs()[0] - 5.0).abs() < 1e-12);
        assert!(m.rss() < 1e-20);
    }

    #[test]
    fn recovers_single_hinge() {
        let g = grid(100, 0.0, 2.0);
        let step = 2.0 / 99.0;
        let xs: Vec<Vec<f64>> = g.iter().map(|&v| vec![v]).collect();
        let ys: Vec<f64> = g.iter().map(|&v| (v - 1.0).max(0.0)).collect();
        let design = design_from(&xs, &ys);
        let m = forward_pass(&design, 21, 2, &MarsConfig::default()).unwrap();
        assert!(rmse(&m, &design) < 1e-6, "rmse {}", rmse(&m, &design));
        assert!(m
            .basis()
            .iter()
            .flat_map(|b| b.factors())
            .any(|f| (f.knot - 1.0).abs() <= step));
    }

    #[test]
    fn reflected_pair_reproduces_line() {
        let g = grid(100, 0.0, 2.0);
        let xs: Vec<Vec<f64>> = g.iter().map(|&v| vec![v]).collect();
        let ys: Vec<f64> = g.iter().map(|&v| 2.0 * v).collect();
        let design = design_from(&xs, &ys);
        let m = forward_pass(&design, 21, 2, &MarsConfig::default()).unwrap();
        assert!(rmse(&m, &design) < 1e-6);
    }

    #[test]
    fn sse_path_is_non_increasing() {
        let xs: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let a = (i as f64 * 0.37).sin() * 3.0;
                let b = (i as f64 * 0.11).cos() * 2.0;
                vec![a, b]
            })
            .collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| (x[0] - 0.5).max(0.0) * (1.0 - x[1]).max(0.0) + 0.05 * ((i * 7919) % 13) as f64)
            .collect();
        let design = design_from(&xs, &ys);
        let s = forward_search(&design, 21, 2, 1e-6).unwrap();
        assert!(s.sse_path.len() > 2);
        for w in s.sse_path.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", s.sse_path);
        }
        assert!(s.basis.iter().all(|b| b.degree() <= 2));
    }

    #[test]
    fn term_budget_is_respected() {
        let xs: Vec<Vec<f64>> = (0..80).map(|i| vec![(i as f64 * 0.7).sin(), i as f64]).collect();
        let ys: Vec<f64> = (0..80).map(|i| ((i * 31) % 17) as f64).collect();
        let design = design_from(&xs, &ys);
        let s = forward_search(&design, 6, 1, 0.0).unwrap();
        assert!(s.basis.len() <= 6);
        assert!(s.basis.iter().all(|b| b.degree() <= 1));
    }

    #[test]
    fn interaction_needs_degree_two() {
        let xs: Vec<Vec<f64>> = (0..225)
            .map(|i| vec![(i % 15) as f64, (i / 15) as f64])
            .collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| (x[0] - 4.0).max(0.0) * (x[1] - 6.0).max(0.0))
            .collect();
        let design = design_from(&xs, &ys);
        let s = forward_search(&design, 21, 2, 1e-9).unwrap();
        assert!(s.basis.iter().any(|b| b.degree() == 2));
        assert!(*s.sse_path.last().unwrap() < 1e-12 * s.sse_path[0]);
    }
}
