//! Matrix factorization with temporal course-wise influence.
//!
//! A grade is modelled as `u_s . v_c` plus decayed, influence-weighted
//! averages of the student's grades in the one or two preceding terms:
//!
//! ```text
//! g(s, c) = u_s . v_c
//!         + e^{-a}  * sum_{c' in G_{t-1}(s)} A(c', c) g(s, c') / |G_{t-1}(s)|
//!         + e^{-2a} * sum_{c' in G_{t-2}(s)} A(c', c) g(s, c') / |G_{t-2}(s)|
//! ```
//!
//! `A` is non-negative, sparse and low rank; it is fitted with ADMM (see
//! [`solver`]).

pub(crate) mod model;
pub mod prox;
pub mod solver;

pub use model::{CoTakenMask, MftciModel};
pub use prox::{nuclear_norm, shrink_singular_values, soft_threshold};
pub use solver::{fit, AdmmState, Fitter, IterationStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the influence model and its ADMM solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MftciHyper {
    /// Latent dimension.
    pub k: usize,
    /// L2 weight on `U` and `V`.
    pub gamma: f64,
    /// Nuclear-norm weight on `A`.
    pub tau: f64,
    /// L1 weight on `A`.
    pub lambda: f64,
    /// ADMM penalty.
    pub rho: f64,
    /// Time decay; influence `d` terms back is scaled by `e^{-d alpha}`.
    pub alpha: f64,
    /// Gradient step for the influence matrix.
    pub lr: f64,
    /// SGD step for the latent factors.
    pub uv_lr: f64,
    /// 1 or 2 preceding terms feed the influence terms.
    pub previous_terms: usize,
    pub inner_uv_iters: usize,
    pub inner_a_iters: usize,
    pub outer_max_iters: usize,
    pub residual_tol: f64,
    pub rng_seed: u64,
    pub init_scale: f64,
    pub nonneg_factors: bool,
}

impl Default for MftciHyper {
    fn default() -> Self {
        MftciHyper {
            k: 10,
            gamma: 0.01,
            tau: 0.1,
            lambda: 0.05,
            rho: 1.0,
            alpha: 0.5,
            lr: 0.001,
            uv_lr: 0.005,
            previous_terms: 2,
            inner_uv_iters: 20,
            inner_a_iters: 5,
            outer_max_iters: 100,
            residual_tol: 1e-4,
            rng_seed: 0,
            init_scale: 0.1,
            nonneg_factors: false,
        }
    }
}

impl MftciHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        for (name, v) in [("gamma", self.gamma), ("tau", self.tau), ("lambda", self.lambda)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for (name, v) in [
            ("rho", self.rho),
            ("alpha", self.alpha),
            ("lr", self.lr),
            ("uv_lr", self.uv_lr),
            ("residual_tol", self.residual_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return bad(format!("init_scale must be >= 0, got {}", self.init_scale));
        }
        if !(1..=2).contains(&self.previous_terms) {
            return bad(format!(
                "previous_terms must be 1 or 2, got {}",
                self.previous_terms
            ));
        }
        if self.outer_max_iters == 0 {
            return bad("outer_max_iters must be at least 1".into());
        }
        Ok(())
    }

    /// `e^{-depth * alpha}`.
    pub fn decay(&self, depth: usize) -> f64 {
        (-(depth as f64) * self.alpha).exp()
    }
}

/// A student's grades in the terms preceding a target term, in model course
/// indices. `last` is term `t-1`, `second_last` is `t-2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistoryView<'a> {
    pub last: &'a [(usize, f64)],
    pub second_last: &'a [(usize, f64)],
}

impl<'a> HistoryView<'a> {
    pub fn new(last: &'a [(usize, f64)], second_last: &'a [(usize, f64)]) -> Self {
        HistoryView { last, second_last }
    }

    pub fn at_depth(&self, depth: usize) -> &'a [(usize, f64)] {
        match depth {
            1 => self.last,
            2 => self.second_last,
            _ => &[],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.last.is_empty() && self.second_last.is_empty()
    }
}

/// Decayed influence of the courses taken `depth` terms back on course `c`.
/// Zero when that term is empty or beyond the model's window.
pub fn influence_delta(model: &MftciModel, history: &HistoryView<'_>, c: usize, depth: usize) -> f64 {
    if depth == 0 || depth > model.hyper.previous_terms {
        return 0.0;
    }
    delta_term(&model.a, model.hyper.decay(depth), history.at_depth(depth), c)
}

pub(crate) fn delta_term(
    a: &nalgebra::DMatrix<f64>,
    decay: f64,
    entries: &[(usize, f64)],
    c: usize,
) -> f64 {
    if entries.is_empty() {
        return 0.0;
    }
    let weighted: f64 = entries.iter().map(|&(cp, g)| a[(cp, c)] * g).sum();
    decay * weighted / entries.len() as f64
}

fn total_delta(model: &MftciModel, history: &HistoryView<'_>, c: usize) -> f64 {
    (1..=model.hyper.previous_terms)
        .map(|d| influence_delta(model, history, c, d))
        .sum()
}

/// Unclamped model score for student `s` on course `c`.
pub fn raw_score(model: &MftciModel, s: usize, c: usize, history: &HistoryView<'_>) -> Result<f64> {
    model.check_indices(s, c)?;
    Ok(model.u.column(s).dot(&model.v.column(c)) + total_delta(model, history, c))
}

/// Predicted grade, clamped into `[failing_epsilon, 4]`.
pub fn predict_grade(model: &MftciModel, s: usize, c: usize, history: &HistoryView<'_>) -> Result<f64> {
    raw_score(model, s, c, history).map(|raw| model.clamp(raw))
}

/// The part of an observed grade left for the latent factors to explain:
/// `g - delta(t-1) - delta(t-2)`. May be negative.
pub fn residual_target(g: f64, history: &HistoryView<'_>, model: &MftciModel, c: usize) -> f64 {
    g - total_delta(model, history, c)
}
