//! Multivariate adaptive regression splines for the power curve.
//!
//! A model is a sum of coefficients times basis functions, each basis
//! function a product of hinges `max(sign * (x[v] - knot), 0)`. Fitting is the
//! usual two-pass scheme: a greedy forward pass adding reflected hinge pairs,
//! then backward deletion scored by generalized cross-validation (GCV) with
//! complexity `C(S) = trace(hat) + d * S + 1`.

mod forward;
mod io;
mod prune;

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ingest::DesignRow;
use crate::linalg::LeastSquares;

pub use forward::{forward_pass, forward_search, ForwardSearch};
pub use io::{parse_model, write_model};
pub use prune::backward_prune;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Pos => 1.0,
            Sign::Neg => -1.0,
        }
    }
}

/// `max(sign * (x[var] - knot), 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeFactor {
    pub var: usize,
    pub sign: Sign,
    pub knot: f64,
}

impl HingeFactor {
    pub fn new(var: usize, sign: Sign, knot: f64) -> Self {
        HingeFactor { var, sign, knot }
    }

    #[inline]
    fn eval(&self, value: f64) -> f64 {
        (self.sign.value() * (value - self.knot)).max(0.0)
    }
}

/// Product of hinge factors; the empty product is the intercept.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BasisFunction {
    factors: Vec<HingeFactor>,
}

impl BasisFunction {
    pub fn intercept() -> Self {
        BasisFunction::default()
    }

    /// Fails if two factors share a variable.
    pub fn new(factors: Vec<HingeFactor>) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            if factors[..i].iter().any(|g| g.var == f.var) {
                return Err(Error::ContractViolation(format!(
                    "variable {} repeated within one basis function",
                    f.var
                )));
            }
        }
        Ok(BasisFunction { factors })
    }

    pub fn factors(&self) -> &[HingeFactor] {
        &self.factors
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    pub fn is_intercept(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn uses_var(&self, var: usize) -> bool {
        self.factors.iter().any(|f| f.var == var)
    }

    pub(crate) fn extended(&self, factor: HingeFactor) -> Self {
        debug_assert!(!self.uses_var(factor.var));
        let mut factors = self.factors.clone();
        factors.push(factor);
        BasisFunction { factors }
    }

    fn max_var(&self) -> Option<usize> {
        self.factors.iter().map(|f| f.var).max()
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.factors.iter().map(|f| f.eval(x[f.var])).product()
    }
}

impl fmt::Display for BasisFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        for (i, h) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str(" * ")?;
            }
            match h.sign {
                Sign::Pos => write!(f, "h(x{} - {})", h.var, h.knot)?,
                Sign::Neg => write!(f, "h({} - x{})", h.knot, h.var)?,
            }
        }
        Ok(())
    }
}

pub fn eval_basis(basis: &BasisFunction, x: &[f64]) -> Result<f64> {
    match basis.max_var() {
        Some(v) if v >= x.len() => Err(Error::ContractViolation(format!(
            "basis uses variable {v} but the feature vector has {} entries",
            x.len()
        ))),
        _ => Ok(basis.eval_unchecked(x)),
    }
}

/// Effective number of parameters `C(S) = hat_trace + d * S + 1`.
pub fn complexity(terms: usize, hat_trace: f64, penalty: f64) -> f64 {
    hat_trace + penalty * terms as f64 + 1.0
}

/// Generalized cross-validation score `(sse / T) / (1 - C(S) / T)^2`.
pub fn gcv(sse: f64, samples: usize, terms: usize, hat_trace: f64, penalty: f64) -> Result<f64> {
    let c = complexity(terms, hat_trace, penalty);
    let t = samples as f64;
    if c >= t {
        return Err(Error::ModelTooComplex {
            complexity: c,
            samples,
        });
    }
    let shrink = 1.0 - c / t;
    Ok((sse / t) / (shrink * shrink))
}

/// GCV for a fitted model; over-parameterised models score `+inf`.
pub(crate) fn model_gcv(sse: f64, samples: usize, terms: usize, rank: usize, penalty: f64) -> f64 {
    gcv(sse, samples, terms, rank as f64, penalty).unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarsConfig {
    /// Forward-pass term budget; `None` picks [`default_max_terms`].
    pub max_terms: Option<usize>,
    pub max_degree: usize,
    /// Cost `d` charged per basis function in GCV.
    pub penalty: f64,
    /// Forward pass stops once the relative SSE reduction falls below this.
    pub min_rel_improvement: f64,
}

impl Default for MarsConfig {
    fn default() -> Self {
        MarsConfig {
            max_terms: None,
            max_degree: 2,
            penalty: 2.0,
            min_rel_improvement: 1e-6,
        }
    }
}

impl MarsConfig {
    pub fn max_terms_for(&self, arity: usize) -> usize {
        self.max_terms.unwrap_or_else(|| default_max_terms(arity))
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_terms == Some(0) {
            return Err(Error::InvalidConfig("mars.max_terms must be >= 1".into()));
        }
        if self.max_degree == 0 {
            return Err(Error::InvalidConfig("mars.max_degree must be >= 1".into()));
        }
        if !(self.penalty.is_finite() && self.penalty >= 0.0) {
            return Err(Error::InvalidConfig("mars.penalty must be finite and >= 0".into()));
        }
        if !(self.min_rel_improvement.is_finite() && self.min_rel_improvement >= 0.0) {
            return Err(Error::InvalidConfig(
                "mars.min_rel_improvement must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

pub fn default_max_terms(arity: usize) -> usize {
    (2 * arity * 10 + 1).min(201)
}

/// Fitted MARS model. The first basis function is always the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct MarsModel {
    basis: Vec<BasisFunction>,
    coeffs: Vec<f64>,
    n_features: usize,
    penalty: f64,
    n_train: usize,
    rss: f64,
    gcv_score: f64,
}

impl MarsModel {
    pub fn from_parts(
        basis: Vec<BasisFunction>,
        coeffs: Vec<f64>,
        n_features: usize,
        penalty: f64,
        n_train: usize,
        rss: f64,
        gcv_score: f64,
    ) -> Result<Self> {
        if basis.len() != coeffs.len() {
            return Err(Error::ContractViolation(format!(
                "{} basis functions but {} coefficients",
                basis.len(),
                coeffs.len()
            )));
        }
        if !basis.first().is_some_and(BasisFunction::is_intercept) {
            return Err(Error::ContractViolation(
                "first basis function must be the intercept".into(),
            ));
        }
        if let Some(v) = basis.iter().filter_map(BasisFunction::max_var).max() {
            if v >= n_features {
                return Err(Error::ContractViolation(format!(
                    "basis uses variable {v} but the model has {n_features} features"
                )));
            }
        }
        Ok(MarsModel {
            basis,
            coeffs,
            n_features,
            penalty,
            n_train,
            rss,
            gcv_score,
        })
    }

    /// Least-squares fit of `basis` to `design`, with RSS and GCV recorded.
    pub fn fit_basis(basis: Vec<BasisFunction>, design: &[DesignRow], penalty: f64) -> Result<Self> {
        let n_features = arity(design)?;
        let b = basis_matrix(&basis, design);
        let y = response(design);
        let ls = LeastSquares::new(&b);
        let coeffs = ls.solve(&y);
        let rss = (&y - &b * &coeffs).norm_squared();
        let gcv_score = model_gcv(rss, design.len(), basis.len(), ls.rank(), penalty);
        MarsModel::from_parts(
            basis,
            coeffs.iter().copied().collect(),
            n_features,
            penalty,
            design.len(),
            rss,
            gcv_score,
        )
    }

    pub fn basis(&self) -> &[BasisFunction] {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    /// Training residual sum of squares.
    pub fn rss(&self) -> f64 {
        self.rss
    }

    pub fn gcv_score(&self) -> f64 {
        self.gcv_score
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Same basis, new coefficients. RSS and GCV are recomputed on `design`.
    pub fn with_coeffs(&self, coeffs: Vec<f64>, design: &[DesignRow]) -> Result<Self> {
        let mut model = MarsModel::from_parts(
            self.basis.clone(),
            coeffs,
            self.n_features,
            self.penalty,
            design.len(),
            0.0,
            0.0,
        )?;
        let fitted = model.predict_design(design)?;
        model.rss = design
            .iter()
            .zip(&fitted)
            .map(|(row, f)| (row.y - f).powi(2))
            .sum();
        let rank = LeastSquares::new(&basis_matrix(&model.basis, design)).rank();
        model.gcv_score = model_gcv(model.rss, design.len(), model.len(), rank, model.penalty);
        Ok(model)
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::ContractViolation(format!(
                "feature vector has {} entries, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(self
            .basis
            .iter()
            .zip(&self.coeffs)
            .map(|(b, c)| c * b.eval_unchecked(x))
            .sum())
    }

    pub fn predict(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict_one(x)).collect()
    }

    pub fn predict_design(&self, design: &[DesignRow]) -> Result<Vec<f64>> {
        design.iter().map(|r| self.predict_one(&r.x)).collect()
    }

    /// `T x S` matrix of basis values.
    pub fn design_matrix(&self, design: &[DesignRow]) -> DMatrix<f64> {
        basis_matrix(&self.basis, design)
    }
}

pub(crate) fn basis_matrix(basis: &[BasisFunction], design: &[DesignRow]) -> DMatrix<f64> {
    DMatrix::from_fn(design.len(), basis.len(), |i, j| {
        basis[j].eval_unchecked(&design[i].x)
    })
}

pub(crate) fn response(design: &[DesignRow]) -> DVector<f64> {
    DVector::from_iterator(design.len(), design.iter().map(|r| r.y))
}

pub(crate) fn arity(design: &[DesignRow]) -> Result<usize> {
    let first = design
        .first()
        .ok_or_else(|| Error::ContractViolation("empty design".into()))?;
    let n = first.x.len();
    if let Some(bad) = design.iter().find(|r| r.x.len() != n) {
        return Err(Error::ContractViolation(format!(
            "row {} has {} features, expected {n}",
            bad.t_index,
            bad.x.len()
        )));
    }
    Ok(n)
}

/// Forward pass followed by backward pruning.
pub fn fit(design: &[DesignRow], config: &MarsConfig) -> Result<MarsModel> {
    config.validate()?;
    let unpruned = forward_pass(
        design,
        config.max_terms_for(arity(design)?),
        config.max_degree,
        config,
    )?;
    backward_prune(&unpruned, design)
}
