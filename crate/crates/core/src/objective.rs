//! The training objective: class-indicator pair weighting and exact
//! evaluation of the full objective and its three components.
//!
//! For a pair list P with same-class count `m_c` and different-class
//! count `m_d`:
//!
//! - `j1 = 1/2 * sum_{(t,u) in P} s(t,u) * ||a_t - a_u||^2`, where
//!   `s = lambda1 / m_c` for same-class pairs and `-lambda2 / m_d` for
//!   different-class pairs;
//! - `j2 = (lambda3 / m) * sum_t ||a_t||_1` over the whole dataset;
//! - `j3 = (lambda4 / 2) * sum of squared weights` (biases excluded).

use crate::data::LabeledDataset;
use crate::error::{Result, SennsError};
use crate::network::Network;
use crate::pairs::PairList;
use crate::vecmath::{l1_norm, squared_distance};

/// Regularization weights and descent controls.
///
/// The four lambdas live in `[0, 1]` and must sum to 1 (tolerance 1e-9).
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    /// Learning rate.
    pub alpha: f64,
    pub max_iters: usize,
    /// Relative objective-change threshold for convergence.
    pub tol: f64,
}

impl Hyperparams {
    /// Lambdas plus learning rate, with default `max_iters` 500 and
    /// `tol` 1e-8.
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64, lambda4: f64, alpha: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            lambda3,
            lambda4,
            alpha,
            max_iters: 500,
            tol: 1e-8,
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda1, self.lambda2, self.lambda3, self.lambda4];
        for (i, &l) in lambdas.iter().enumerate() {
            if !(0.0..=1.0).contains(&l) {
                return Err(SennsError::InvalidHyperparams(format!(
                    "lambda{} = {l} is outside [0, 1]",
                    i + 1
                )));
            }
        }
        let sum: f64 = lambdas.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SennsError::InvalidHyperparams(format!(
                "lambda1 + lambda2 + lambda3 + lambda4 = {sum}, expected 1"
            )));
        }
        if !(self.alpha > 0.0) {
            return Err(SennsError::InvalidHyperparams(format!(
                "alpha = {} must be positive",
                self.alpha
            )));
        }
        if !(self.tol > 0.0) {
            return Err(SennsError::InvalidHyperparams(format!(
                "tol = {} must be positive",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Objective value split into its pairwise, sparsity, and decay parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub j_total: f64,
    /// Weighted pairwise term (can be negative).
    pub j1: f64,
    /// Sparsity term, `lambda3 / m` applied.
    pub j2: f64,
    /// Weight decay term, `lambda4 / 2` applied.
    pub j3: f64,
}

/// 1 iff both labels name the same class.
pub fn same_class(label_t: usize, label_u: usize) -> bool {
    label_t == label_u
}

/// 1 iff the labels name different classes.
pub fn diff_class(label_t: usize, label_u: usize) -> bool {
    label_t != label_u
}

/// Counts of ordered same-class / different-class pairs over the whole
/// dataset, self-pairs included: `m_c + m_d = m^2`.
pub fn count_pairs(dataset: &LabeledDataset) -> (usize, usize) {
    let m = dataset.len();
    let m_c: usize = dataset.class_counts().iter().map(|&n| n * n).sum();
    (m_c, m * m - m_c)
}

/// Pair weight: `lambda1 / m_c` for same-class pairs, `-lambda2 / m_d`
/// for different-class pairs.
pub fn s_weight(
    label_t: usize,
    label_u: usize,
    hp: &Hyperparams,
    m_c: usize,
    m_d: usize,
) -> Result<f64> {
    s_weight_for(same_class(label_t, label_u), hp, m_c, m_d)
}

/// [`s_weight`] with the class test already done.
pub fn s_weight_for(same: bool, hp: &Hyperparams, m_c: usize, m_d: usize) -> Result<f64> {
    if same {
        if m_c == 0 {
            return Err(SennsError::DegenerateClasses(
                "no same-class pairs to normalize over".to_string(),
            ));
        }
        Ok(hp.lambda1 / m_c as f64)
    } else {
        if m_d == 0 {
            return Err(SennsError::DegenerateClasses(
                "no different-class pairs to normalize over".to_string(),
            ));
        }
        Ok(-hp.lambda2 / m_d as f64)
    }
}

/// Evaluates the objective exactly over the given pair list.
///
/// Pairwise distances are summed in list order (ascending `(t, u)` for
/// the full list), which is the reference reduction order.
pub fn objective_value(
    net: &Network,
    dataset: &LabeledDataset,
    pairs: &PairList,
    hp: &Hyperparams,
) -> Result<ObjectiveValue> {
    hp.validate()?;
    let outputs: Vec<Vec<f64>> = dataset
        .inputs()
        .iter()
        .map(|x| Ok(net.forward(x)?.output_activations().to_vec()))
        .collect::<Result<_>>()?;

    let mut j1 = 0.0;
    for pair in pairs.iter() {
        let s = s_weight_for(pair.same_class, hp, pairs.m_c, pairs.m_d)?;
        j1 += s * squared_distance(&outputs[pair.t], &outputs[pair.u]);
    }
    j1 *= 0.5;

    let m = dataset.len() as f64;
    let j2 = hp.lambda3 / m * outputs.iter().map(|a| l1_norm(a)).sum::<f64>();
    let j3 = hp.lambda4 / 2.0 * net.sum_squared_weights();

    Ok(ObjectiveValue {
        j_total: j1 + j2 + j3,
        j1,
        j2,
        j3,
    })
}
