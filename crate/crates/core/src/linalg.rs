//! Rank-revealing least squares shared by the MARS and IFGLS code.

use nalgebra::{DMatrix, DVector, SVD};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

/// SVD of a column-normalised design, reusable across right-hand sides.
pub struct LeastSquares {
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    scale: DVector<f64>,
    rank: usize,
    tol: f64,
    rows: usize,
}

impl LeastSquares {
    pub fn new(design: &DMatrix<f64>) -> Self {
        let rows = design.nrows();
        let mut scaled = design.clone();
        let scale = DVector::from_iterator(
            design.ncols(),
            design.column_iter().map(|c| {
                let n = c.norm();
                if n > 0.0 {
                    n
                } else {
                    1.0
                }
            }),
        );
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col /= scale[j];
        }
        let svd = scaled.svd(true, true);
        let max_sv = svd.singular_values.max();
        let tol = RANK_TOL * max_sv.max(f64::MIN_POSITIVE);
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        LeastSquares {
            svd,
            scale,
            rank,
            tol,
            rows,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    /// Minimum-norm least-squares coefficients.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let z = self
            .svd
            .solve(rhs, self.tol)
            .expect("SVD computed with both U and V^T");
        z.component_div(&self.scale)
    }
}

#[derive(Debug, Clone)]
pub struct LstsqFit {
    pub coeffs: DVector<f64>,
    pub rank: usize,
    pub sse: f64,
}

pub fn lstsq(design: &DMatrix<f64>, rhs: &DVector<f64>) -> LstsqFit {
    let ls = LeastSquares::new(design);
    let coeffs = ls.solve(rhs);
    let sse = (rhs - design * &coeffs).norm_squared();
    LstsqFit {
        coeffs,
        rank: ls.rank(),
        sse,
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn rmse(residuals: &[f64]) -> f64 {
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_fit() {
        let x = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_fn(5, |i, _| 3.0 + 2.0 * i as f64);
        let fit = lstsq(&x, &y);
        assert!((fit.coeffs[0] - 3.0).abs() < 1e-12);
        assert!((fit.coeffs[1] - 2.0).abs() < 1e-12);
        assert_eq!(fit.rank, 2);
        assert!(fit.sse < 1e-20);
    }

    #[test]
    fn duplicated_column_drops_rank() {
        let x = DMatrix::from_fn(6, 3, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_fn(6, |i, _| i as f64);
        let fit = lstsq(&x, &y);
        assert_eq!(fit.rank, 2);
        assert!(fit.sse < 1e-18);
        assert!((fit.coeffs[1] - fit.coeffs[2]).abs() < 1e-9);
    }
}
