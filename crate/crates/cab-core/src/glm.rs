//! Link families, satisfaction functions, and the allocation objective.
//!
//! Feedback follows an exponential-family model whose density is
//! `exp{y·z − m(z)}` in the linear score `z = x^T θ`; the mean function `μ` is
//! the derivative of the cumulant `m`. The per-round objective is the sum
//! over arms of a concave satisfaction `r` applied to the arm's total
//! expected match: `f(π; θ) = Σ_a r(Σ_{i: π(i)=a} μ(φ(i,a)^T θ))`.

use serde::{Deserialize, Serialize};

use crate::error::CabError;

mod mle;

pub use mle::{fit_regularized_mle, fit_regularized_mle_warm};

/// Exponential-family link selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkFamily {
    /// Bernoulli feedback, `μ(z) = 1/(1+e^{-z})`.
    Logistic,
    /// Gaussian feedback with identity mean, `μ(z) = z`.
    Linear,
}

/// A link family together with its smoothness constants.
///
/// `curvature_floor` is the infimum of `μ̇` over the certified score domain
/// `|z| ≤ 2D+1`, which covers every score reachable while the estimate stays
/// within distance `D+1` of a true parameter of norm at most `D` on unit-norm
/// features. The analysis-facing constants are `L_μ` (`lipschitz`), `κ_μ`
/// (`curvature_floor`), and the sub-Gaussian noise scale `σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmModel {
    family: LinkFamily,
    lipschitz: f64,
    curvature_floor: f64,
    subgaussian: f64,
    domain_radius: f64,
}

impl GlmModel {
    /// Logistic model certified for parameter-norm bound `domain_radius`.
    pub fn logistic(domain_radius: f64) -> Self {
        let edge = 2.0 * domain_radius + 1.0;
        let mu_edge = sigmoid(edge);
        GlmModel {
            family: LinkFamily::Logistic,
            lipschitz: 0.25,
            curvature_floor: mu_edge * (1.0 - mu_edge),
            subgaussian: 0.5,
            domain_radius,
        }
    }

    /// Identity-link Gaussian model with unit noise.
    pub fn linear() -> Self {
        GlmModel {
            family: LinkFamily::Linear,
            lipschitz: 1.0,
            curvature_floor: 1.0,
            subgaussian: 1.0,
            domain_radius: 1.0,
        }
    }

    pub fn from_family(family: LinkFamily, domain_radius: f64) -> Self {
        match family {
            LinkFamily::Logistic => GlmModel::logistic(domain_radius),
            LinkFamily::Linear => GlmModel::linear(),
        }
    }

    /// Overrides the sub-Gaussian scale.
    pub fn with_subgaussian(mut self, sigma: f64) -> Self {
        self.subgaussian = sigma;
        self
    }

    pub fn family(&self) -> LinkFamily {
        self.family
    }

    /// Mean function `μ(z) = ṁ(z)`.
    pub fn mean(&self, z: f64) -> f64 {
        match self.family {
            LinkFamily::Logistic => sigmoid(z),
            LinkFamily::Linear => z,
        }
    }

    /// Derivative `μ̇(z)`.
    pub fn mean_deriv(&self, z: f64) -> f64 {
        match self.family {
            LinkFamily::Logistic => {
                let m = sigmoid(z);
                m * (1.0 - m)
            }
            LinkFamily::Linear => 1.0,
        }
    }

    /// Cumulant `m(z)`; softplus for logistic, `z²/2` for linear.
    pub fn cumulant(&self, z: f64) -> f64 {
        match self.family {
            LinkFamily::Logistic => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            LinkFamily::Linear => 0.5 * z * z,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn curvature_floor(&self) -> f64 {
        self.curvature_floor
    }

    pub fn subgaussian(&self) -> f64 {
        self.subgaussian
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Concave, nondecreasing per-arm satisfaction function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Satisfaction {
    /// `r(x) = min(x, β)`; satisfaction saturates at the cap `β`.
    CappedLinear { beta: f64 },
    /// `r(x) = x`, unbounded. Provided for oracle equivalences and tests;
    /// `bound()` reports an infinite sentinel.
    Identity,
}

impl Satisfaction {
    pub fn capped_linear(beta: f64) -> Result<Self, CabError> {
        if beta.is_nan() || beta <= 0.0 || !beta.is_finite() {
            return Err(CabError::invalid(
                "beta",
                format!("must be positive, got {beta}"),
            ));
        }
        Ok(Satisfaction::CappedLinear { beta })
    }

    /// `r(x)`.
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Satisfaction::CappedLinear { beta } => x.min(*beta),
            Satisfaction::Identity => x,
        }
    }

    /// Upper bound `M` on `r`; infinite for the identity.
    pub fn bound(&self) -> f64 {
        match self {
            Satisfaction::CappedLinear { beta } => *beta,
            Satisfaction::Identity => f64::INFINITY,
        }
    }

    /// Lipschitz constant `L_r`; one for both kinds.
    pub fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// The `N×K` grid of `d`-dimensional feature vectors observed in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSlate {
    n_users: usize,
    n_arms: usize,
    dim: usize,
    /// Row-major `[user][arm][coordinate]`.
    features: Vec<f64>,
}

impl ContextSlate {
    pub fn new(
        n_users: usize,
        n_arms: usize,
        dim: usize,
        features: Vec<f64>,
    ) -> Result<Self, CabError> {
        let expected = n_users * n_arms * dim;
        if features.len() != expected {
            return Err(CabError::DimensionMismatch {
                context: "ContextSlate::new",
                expected,
                actual: features.len(),
            });
        }
        if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
            return Err(CabError::invalid(
                "features",
                format!("non-finite feature value {bad}"),
            ));
        }
        Ok(ContextSlate {
            n_users,
            n_arms,
            dim,
            features,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Feature vector `φ(user, arm)`.
    pub fn feature(&self, user: usize, arm: usize) -> &[f64] {
        let start = (user * self.n_arms + arm) * self.dim;
        &self.features[start..start + self.dim]
    }

    /// Rescales every feature vector to unit Euclidean norm (zero vectors are
    /// left untouched).
    pub fn normalize_features(&mut self) {
        let d = self.dim;
        for chunk in self.features.chunks_mut(d) {
            let norm = chunk.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in chunk {
                    *v /= norm;
                }
            }
        }
    }
}

/// Assignment of every user to exactly one arm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation(Vec<usize>);

impl Allocation {
    pub fn new(assignment: Vec<usize>, n_arms: usize) -> Result<Self, CabError> {
        if let Some((user, arm)) = assignment
            .iter()
            .enumerate()
            .find(|(_, arm)| **arm >= n_arms)
        {
            return Err(CabError::invalid(
                "assignment",
                format!("user {user} assigned to arm {arm} but only {n_arms} arms exist"),
            ));
        }
        Ok(Allocation(assignment))
    }

    pub fn n_users(&self) -> usize {
        self.0.len()
    }

    /// Arm assigned to `user`.
    pub fn arm_of(&self, user: usize) -> usize {
        self.0[user]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Users assigned to `arm` (the preimage `π⁻¹(arm)`).
    pub fn users_of(&self, arm: usize) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(move |(_, a)| **a == arm)
            .map(|(i, _)| i)
    }
}

/// Ordered feedback history `{(x, y)}` together with a completed-round count.
#[derive(Debug, Clone, Default)]
pub struct ObservationLog {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
    rounds_seen: usize,
}

impl ObservationLog {
    pub fn new(dim: usize) -> Self {
        ObservationLog {
            dim,
            xs: Vec::new(),
            ys: Vec::new(),
            rounds_seen: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn rounds_seen(&self) -> usize {
        self.rounds_seen
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<(), CabError> {
        if x.len() != self.dim {
            return Err(CabError::DimensionMismatch {
                context: "ObservationLog::push",
                expected: self.dim,
                actual: x.len(),
            });
        }
        self.xs.extend_from_slice(x);
        self.ys.push(y);
        Ok(())
    }

    /// Marks one round of observations as complete.
    pub fn complete_round(&mut self) {
        self.rounds_seen += 1;
    }

    pub fn entry(&self, idx: usize) -> (&[f64], f64) {
        let start = idx * self.dim;
        (&self.xs[start..start + self.dim], self.ys[idx])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.xs.chunks(self.dim).zip(self.ys.iter().copied())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// The allocation objective `f(π; θ) = Σ_a r(Σ_{i∈π⁻¹(a)} μ(φ(i,a)^T θ))`.
///
/// Arms with no assigned users contribute `r(0)`.
pub fn f_value(
    slate: &ContextSlate,
    alloc: &Allocation,
    theta: &[f64],
    model: &GlmModel,
    sat: &Satisfaction,
) -> Result<f64, CabError> {
    if theta.len() != slate.dim() {
        return Err(CabError::DimensionMismatch {
            context: "f_value",
            expected: slate.dim(),
            actual: theta.len(),
        });
    }
    if alloc.n_users() != slate.n_users() {
        return Err(CabError::DimensionMismatch {
            context: "f_value",
            expected: slate.n_users(),
            actual: alloc.n_users(),
        });
    }
    let mut arm_sums = vec![0.0; slate.n_arms()];
    for (user, &arm) in alloc.as_slice().iter().enumerate() {
        let z = dot(slate.feature(user, arm), theta);
        arm_sums[arm] += model.mean(z);
    }
    Ok(arm_sums.iter().map(|s| sat.value(*s)).sum())
}

/// Matrix of affinities `μ(φ(i,a)^T θ)`, row-major `N×K`.
pub fn expected_match_matrix(
    slate: &ContextSlate,
    theta: &[f64],
    model: &GlmModel,
) -> Result<Vec<f64>, CabError> {
    if theta.len() != slate.dim() {
        return Err(CabError::DimensionMismatch {
            context: "expected_match_matrix",
            expected: slate.dim(),
            actual: theta.len(),
        });
    }
    let mut out = Vec::with_capacity(slate.n_users() * slate.n_arms());
    for user in 0..slate.n_users() {
        for arm in 0..slate.n_arms() {
            out.push(model.mean(dot(slate.feature(user, arm), theta)));
        }
    }
    Ok(out)
}

/// High-probability exploration coefficient
/// `c₁ = (L_r L_μ / κ_μ)(σ √(d log(1 + NT/(dλ₀)) + 2 log(1/δ)) + κ_μ D √λ₀)`.
///
/// Used only when a configuration requests analysis-derived constants instead
/// of the experimental `c₁ = √d`.
#[allow(clippy::too_many_arguments)]
pub fn compute_theoretical_c1(
    model: &GlmModel,
    sat: &Satisfaction,
    d_bound: f64,
    lambda0: f64,
    delta: f64,
    dim: usize,
    n_users: usize,
    horizon: usize,
) -> Result<f64, CabError> {
    if delta.is_nan() || delta <= 0.0 || delta >= 1.0 {
        return Err(CabError::invalid(
            "delta",
            format!("must lie in (0,1), got {delta}"),
        ));
    }
    if lambda0.is_nan() || lambda0 <= 0.0 {
        return Err(CabError::invalid(
            "lambda0",
            format!("must be positive, got {lambda0}"),
        ));
    }
    let d = dim as f64;
    let nt = (n_users as f64) * (horizon as f64);
    let log_term = d * (1.0 + nt / (d * lambda0)).ln() + 2.0 * (1.0 / delta).ln();
    let width =
        model.subgaussian() * log_term.sqrt() + model.curvature_floor() * d_bound * lambda0.sqrt();
    Ok(sat.lipschitz() * model.lipschitz() / model.curvature_floor() * width)
}
