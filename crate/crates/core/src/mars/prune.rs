//! Backward deletion scored by GCV.
//!
//! Deleting term `j` from an active set raises RSS by `beta_j^2 / (G^-1)_jj`,
//! where `G` is the Gram matrix of the active columns. Each step deletes the
//! cheapest non-intercept term; the subset with the lowest GCV seen along the
//! path is refit exactly and returned.

use nalgebra::{DMatrix, DVector};

use super::{basis_matrix, model_gcv, response, MarsModel};
use crate::error::Result;
use crate::ingest::DesignRow;

fn inverse_spd(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    match g.clone().cholesky() {
        Some(ch) => Some(ch.inverse()),
        None => g.clone().pseudo_inverse(1e-12).ok(),
    }
}

pub fn backward_prune(model: &MarsModel, design: &[DesignRow]) -> Result<MarsModel> {
    let input = MarsModel::fit_basis(model.basis().to_vec(), design, model.penalty())?;
    let s = input.len();
    if s <= 1 {
        return Ok(input);
    }
    let t = design.len();
    let penalty = input.penalty();

    let b = basis_matrix(input.basis(), design);
    let norms: Vec<f64> = b
        .column_iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = b;
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= norms[j];
    }
    let y = response(design);
    let gram = scaled.transpose() * &scaled;
    let cross: DVector<f64> = scaled.transpose() * &y;

    let mut active: Vec<usize> = (0..s).collect();
    let mut rss = input.rss();
    let mut best_set = active.clone();
    let mut best_gcv = model_gcv(rss, t, s, s, penalty);

    while active.len() > 1 {
        let k = active.len();
        let g = DMatrix::from_fn(k, k, |i, j| gram[(active[i], active[j])]);
        let Some(g_inv) = inverse_spd(&g) else {
            break;
        };
        let c = DVector::from_fn(k, |i, _| cross[active[i]]);
        let beta = &g_inv * c;

        // Position 0 is always the intercept.
        let (drop_pos, delta) = (1..k)
            .map(|i| {
                let d = g_inv[(i, i)];
                let inc = if d > 0.0 { beta[i] * beta[i] / d } else { 0.0 };
                (i, inc.max(0.0))
            })
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        if drop_pos == 0 {
            break;
        }
        active.remove(drop_pos);
        rss += delta;
        let score = model_gcv(rss, t, active.len(), active.len(), penalty);
        if score <= best_gcv {
            best_gcv = score;
            best_set = active.clone();
        }
    }

    let chosen = MarsModel::fit_basis(
        best_set.iter().map(|&j| input.basis()[j].clone()).collect(),
        design,
        penalty,
    )?;
    if chosen.gcv_score() <= input.gcv_score() {
        Ok(chosen)
    } else {
        Ok(input)
    }
}
