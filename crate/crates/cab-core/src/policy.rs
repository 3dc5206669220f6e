//! Allocation policies behind one interface.
//!
//! Every policy implements [`Policy`]: construct from a [`PolicyConfig`],
//! `select` an allocation for the round's slate, then `update` on the
//! observed feedback. The learning policies share [`PolicyState`] — the
//! design matrix `V`, the Laplace curvature matrix `H` (sampling policies
//! only), the running estimate `θ̄`, and the observation log — and refresh
//! `θ̄` by regularized MLE at the start of every `select`.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::CabError;
use crate::glm::{
    fit_regularized_mle_warm, Allocation, ContextSlate, GlmModel, ObservationLog, Satisfaction,
};
use crate::linalg::PsdMatrix;

mod select;

pub use select::{
    fairx_distribution, fairx_select, max_match_select, oracle_match_select,
    oracle_satisfaction_select, random_select, sample_allocation_from_policy, ts_eps_select,
    ts_eps_select_with_draws, ts_theta_select, ts_theta_select_with_draws, ucb_select,
};

/// Tuning constants shared by the policy family.
///
/// The experimental defaults are `λ₀ = d`, `c₁ = √d`, `a = √(dN)`,
/// `γ = 0.1`, and 50 FairX candidate draws; `use_theorem_constants` replaces
/// `c₁` and `a` with their analysis-derived values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Ridge seed for the design matrix and (scaled) MLE regularizer.
    pub lambda0: f64,
    /// Exploration coefficient for the confidence-width bonus.
    pub c1: f64,
    /// Perturbation scale for the sampling policies.
    pub a: f64,
    /// Squared confidence-ellipsoid radius for FairX.
    pub gamma: f64,
    /// Failure probability used only when deriving theorem-mode constants.
    pub delta: f64,
    /// Number of candidate parameters FairX draws from the ellipsoid.
    pub fairx_samples: usize,
    /// Derive `c1` and `a` from the regret analysis instead of the
    /// experimental defaults.
    pub use_theorem_constants: bool,
    /// Rebuild `H` incrementally with the estimate current at append time
    /// instead of refreshing every contribution each round.
    pub incremental_h: bool,
    /// Process users in a freshly shuffled order inside the greedy oracle.
    pub shuffle_greedy_order: bool,
}

impl PolicyConfig {
    /// The experimental constants for a `d`-dimensional problem with `n`
    /// users per round.
    pub fn experimental(dim: usize, n_users: usize) -> Self {
        let d = dim as f64;
        PolicyConfig {
            lambda0: d,
            c1: d.sqrt(),
            a: (d * n_users as f64).sqrt(),
            gamma: 0.1,
            delta: 0.1,
            fairx_samples: 50,
            use_theorem_constants: false,
            incremental_h: false,
            shuffle_greedy_order: false,
        }
    }

    pub fn validate(&self) -> Result<(), CabError> {
        for (name, value) in [
            ("lambda0", self.lambda0),
            ("c1", self.c1),
            ("a", self.a),
            ("gamma", self.gamma),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(CabError::invalid(
                    name,
                    format!("must be finite and nonnegative, got {value}"),
                ));
            }
        }
        if self.lambda0 == 0.0 {
            return Err(CabError::invalid("lambda0", "must be strictly positive"));
        }
        if self.fairx_samples == 0 {
            return Err(CabError::invalid("fairx_samples", "must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CabError::invalid(
                "delta",
                format!("must lie in (0,1), got {}", self.delta),
            ));
        }
        Ok(())
    }

    /// Replaces `c1` and `a` with the analysis-derived values
    /// (`a = c1 √(L_μ N)`).
    pub fn apply_theorem_constants(
        &mut self,
        model: &GlmModel,
        sat: &Satisfaction,
        dim: usize,
        n_users: usize,
        horizon: usize,
    ) -> Result<(), CabError> {
        let c1 = crate::glm::compute_theoretical_c1(
            model,
            sat,
            model.domain_radius(),
            self.lambda0,
            self.delta,
            dim,
            n_users,
            horizon,
        )?;
        self.c1 = c1;
        self.a = c1 * (model.lipschitz() * n_users as f64).sqrt();
        Ok(())
    }
}

/// Per-user outcomes for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub outcomes: Vec<f64>,
}

impl Feedback {
    pub fn new(outcomes: Vec<f64>) -> Self {
        Feedback { outcomes }
    }
}

/// Sufficient statistics shared by the learning policies.
#[derive(Debug, Clone)]
pub struct PolicyState {
    model: GlmModel,
    sat: Satisfaction,
    config: PolicyConfig,
    dim: usize,
    v: PsdMatrix,
    h: Option<PsdMatrix>,
    /// Running `Σ μ̇ x x^T` and `Σ μ̇` for the incremental `H` variant.
    h_accum: Option<(PsdMatrix, f64)>,
    theta_bar: Vec<f64>,
    log: ObservationLog,
    round: usize,
}

impl PolicyState {
    /// Fresh state at round 1: `V = λ₀ I`, and for sampling policies
    /// `H = L_μ λ₀ I`.
    pub fn new(
        dim: usize,
        model: GlmModel,
        sat: Satisfaction,
        config: PolicyConfig,
        with_h: bool,
    ) -> Result<Self, CabError> {
        config.validate()?;
        let v = PsdMatrix::scaled_identity(dim, config.lambda0);
        let h = with_h.then(|| PsdMatrix::scaled_identity(dim, model.lipschitz() * config.lambda0));
        let h_accum = (with_h && config.incremental_h).then(|| (PsdMatrix::zeros(dim), 0.0));
        Ok(PolicyState {
            model,
            sat,
            config,
            dim,
            v,
            h,
            h_accum,
            theta_bar: vec![0.0; dim],
            log: ObservationLog::new(dim),
            round: 1,
        })
    }

    pub fn model(&self) -> &GlmModel {
        &self.model
    }

    pub fn satisfaction(&self) -> &Satisfaction {
        &self.sat
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn design_matrix(&self) -> &PsdMatrix {
        &self.v
    }

    pub fn curvature_matrix(&self) -> Option<&PsdMatrix> {
        self.h.as_ref()
    }

    pub fn theta_bar(&self) -> &[f64] {
        &self.theta_bar
    }

    pub fn log(&self) -> &ObservationLog {
        &self.log
    }

    /// Current round index `t`; equals `log.rounds_seen() + 1`.
    pub fn round(&self) -> usize {
        self.round
    }

    /// Refits `θ̄` on the full log with ridge `κ_μ λ₀`, warm-starting from
    /// the previous estimate.
    pub fn refresh_theta(&mut self) -> Result<(), CabError> {
        let ridge = self.model.curvature_floor() * self.config.lambda0;
        self.theta_bar =
            fit_regularized_mle_warm(&self.log, &self.model, ridge, Some(&self.theta_bar))?;
        Ok(())
    }

    fn recompute_h_full(&mut self) {
        let entries = self.log.len();
        debug_assert!(entries > 0);
        let mut h = PsdMatrix::zeros(self.dim);
        let mut deriv_sum = 0.0;
        for (x, _) in self.log.iter() {
            let w = self.model.mean_deriv(crate::glm::dot(x, &self.theta_bar));
            h.rank_one_add_scaled(x, w)
                .expect("log entries share the state dimension");
            deriv_sum += w;
        }
        h.add_scaled_identity(self.config.lambda0 / entries as f64 * deriv_sum);
        self.h = Some(h);
    }

    fn recompute_h_incremental(&mut self, new_from: usize) {
        let entries = self.log.len();
        let theta = self.theta_bar.clone();
        let model = self.model;
        let (accum, deriv_sum) = self.h_accum.as_mut().expect("incremental accumulator");
        for idx in new_from..entries {
            let (x, _) = self.log.entry(idx);
            let w = model.mean_deriv(crate::glm::dot(x, &theta));
            accum
                .rank_one_add_scaled(x, w)
                .expect("log entries share the state dimension");
            *deriv_sum += w;
        }
        let mut h = accum.clone();
        h.add_scaled_identity(self.config.lambda0 / entries as f64 * *deriv_sum);
        self.h = Some(h);
    }
}

/// Records the round's observations into the state: appends every chosen
/// feature/outcome pair to the log, rank-one-updates `V`, rebuilds `H` for
/// sampling policies from the current estimate, and advances the round.
pub fn policy_update(
    state: &mut PolicyState,
    slate: &ContextSlate,
    alloc: &Allocation,
    feedback: &Feedback,
) -> Result<(), CabError> {
    let n = slate.n_users();
    if alloc.n_users() != n {
        return Err(CabError::DimensionMismatch {
            context: "policy_update allocation",
            expected: n,
            actual: alloc.n_users(),
        });
    }
    if feedback.outcomes.len() != n {
        return Err(CabError::DimensionMismatch {
            context: "policy_update feedback",
            expected: n,
            actual: feedback.outcomes.len(),
        });
    }
    if state.model.family() == crate::glm::LinkFamily::Logistic {
        if let Some(y) = feedback.outcomes.iter().find(|y| **y != 0.0 && **y != 1.0) {
            return Err(CabError::invalid(
                "feedback",
                format!("logistic outcomes must be 0 or 1, got {y}"),
            ));
        }
    }

    let before = state.log.len();
    for user in 0..n {
        let x = slate.feature(user, alloc.arm_of(user));
        state.log.push(x, feedback.outcomes[user])?;
        state.v.rank_one_add(x)?;
    }
    state.log.complete_round();

    if state.h.is_some() {
        if state.config.incremental_h {
            state.recompute_h_incremental(before);
        } else {
            state.recompute_h_full();
        }
    }
    state.round += 1;
    Ok(())
}

/// The policy interface the experiment loop drives.
pub trait Policy: Send {
    fn name(&self) -> &'static str;

    /// Chooses this round's allocation. Learning policies refresh their
    /// estimate as the first step.
    fn select(
        &mut self,
        slate: &ContextSlate,
        rng: &mut dyn RngCore,
    ) -> Result<Allocation, CabError>;

    /// Consumes the round's feedback. Stateless policies ignore it.
    fn update(
        &mut self,
        slate: &ContextSlate,
        alloc: &Allocation,
        feedback: &Feedback,
    ) -> Result<(), CabError>;
}

macro_rules! learning_policy {
    ($(#[$doc:meta])* $name:ident, $tag:literal, $with_h:expr, $select:expr) => {
        $(#[$doc])*
        #[derive(Debug, Clone)]
        pub struct $name {
            state: PolicyState,
        }

        impl $name {
            pub fn new(
                dim: usize,
                model: GlmModel,
                sat: Satisfaction,
                config: PolicyConfig,
            ) -> Result<Self, CabError> {
                Ok($name {
                    state: PolicyState::new(dim, model, sat, config, $with_h)?,
                })
            }

            pub fn state(&self) -> &PolicyState {
                &self.state
            }
        }

        impl Policy for $name {
            fn name(&self) -> &'static str {
                $tag
            }

            fn select(
                &mut self,
                slate: &ContextSlate,
                rng: &mut dyn RngCore,
            ) -> Result<Allocation, CabError> {
                #[allow(clippy::redundant_closure_call)]
                ($select)(&mut self.state, slate, rng)
            }

            fn update(
                &mut self,
                slate: &ContextSlate,
                alloc: &Allocation,
                feedback: &Feedback,
            ) -> Result<(), CabError> {
                policy_update(&mut self.state, slate, alloc, feedback)
            }
        }
    };
}

learning_policy!(
    /// Optimism under uncertainty: greedy welfare maximization of the
    /// plug-in objective plus the confidence-width bonus.
    CabUcb,
    "cab_ucb",
    false,
    |state: &mut PolicyState, slate: &ContextSlate, rng: &mut dyn RngCore| {
        select::ucb_select_shuffled(state, slate, rng)
    }
);

learning_policy!(
    /// Thompson sampling in reward space: per-user i.i.d. Gaussian
    /// perturbations enter the objective linearly.
    CabTsEps,
    "cab_ts_eps",
    true,
    |state: &mut PolicyState, slate: &ContextSlate, rng: &mut dyn RngCore| {
        ts_eps_select(state, slate, rng)
    }
);

learning_policy!(
    /// Thompson sampling in parameter space: per-user i.i.d. parameter
    /// draws feed the plug-in objective.
    CabTsTheta,
    "cab_ts_theta",
    true,
    |state: &mut PolicyState, slate: &ContextSlate, rng: &mut dyn RngCore| {
        ts_theta_select(state, slate, rng)
    }
);

learning_policy!(
    /// Match-count maximizer: per-user argmax of affinity plus bonus,
    /// ignoring the satisfaction structure.
    MaxMatch,
    "max_match",
    false,
    |state: &mut PolicyState, slate: &ContextSlate, _rng: &mut dyn RngCore| {
        max_match_select(state, slate)
    }
);

learning_policy!(
    /// Exposure-proportional selection from an optimistic parameter chosen
    /// inside the confidence ellipsoid.
    FairX,
    "fairx",
    false,
    |state: &mut PolicyState, slate: &ContextSlate, rng: &mut dyn RngCore| {
        fairx_select(state, slate, rng)
    }
);

/// Uniform arm choice per user.
#[derive(Debug, Clone, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn select(
        &mut self,
        slate: &ContextSlate,
        rng: &mut dyn RngCore,
    ) -> Result<Allocation, CabError> {
        Ok(random_select(slate, rng))
    }

    fn update(
        &mut self,
        _slate: &ContextSlate,
        _alloc: &Allocation,
        _feedback: &Feedback,
    ) -> Result<(), CabError> {
        Ok(())
    }
}

/// Full-information satisfaction reference: greedy welfare maximization with
/// the true parameter. Simulator only.
#[derive(Debug, Clone)]
pub struct OracleSatisfaction {
    theta_star: Vec<f64>,
    model: GlmModel,
    sat: Satisfaction,
}

impl OracleSatisfaction {
    pub fn new(theta_star: Vec<f64>, model: GlmModel, sat: Satisfaction) -> Self {
        OracleSatisfaction {
            theta_star,
            model,
            sat,
        }
    }
}

impl Policy for OracleSatisfaction {
    fn name(&self) -> &'static str {
        "oracle_satisfaction"
    }

    fn select(
        &mut self,
        slate: &ContextSlate,
        _rng: &mut dyn RngCore,
    ) -> Result<Allocation, CabError> {
        oracle_satisfaction_select(slate, &self.theta_star, &self.model, &self.sat)
    }

    fn update(
        &mut self,
        _slate: &ContextSlate,
        _alloc: &Allocation,
        _feedback: &Feedback,
    ) -> Result<(), CabError> {
        Ok(())
    }
}

/// Full-information match reference: per-user argmax of the true affinity.
/// Simulator only.
#[derive(Debug, Clone)]
pub struct OracleMatch {
    theta_star: Vec<f64>,
    model: GlmModel,
}

impl OracleMatch {
    pub fn new(theta_star: Vec<f64>, model: GlmModel) -> Self {
        OracleMatch { theta_star, model }
    }
}

impl Policy for OracleMatch {
    fn name(&self) -> &'static str {
        "oracle_match"
    }

    fn select(
        &mut self,
        slate: &ContextSlate,
        _rng: &mut dyn RngCore,
    ) -> Result<Allocation, CabError> {
        oracle_match_select(slate, &self.theta_star, &self.model)
    }

    fn update(
        &mut self,
        _slate: &ContextSlate,
        _alloc: &Allocation,
        _feedback: &Feedback,
    ) -> Result<(), CabError> {
        Ok(())
    }
}

/// Identifier for each policy, also the `policy` column value in outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    CabUcb,
    CabTsEps,
    CabTsTheta,
    MaxMatch,
    Fairx,
    Random,
    OracleSatisfaction,
    OracleMatch,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::CabUcb,
        PolicyKind::CabTsEps,
        PolicyKind::CabTsTheta,
        PolicyKind::MaxMatch,
        PolicyKind::Fairx,
        PolicyKind::Random,
        PolicyKind::OracleSatisfaction,
        PolicyKind::OracleMatch,
    ];

    /// The six policies that learn from feedback or act blindly, i.e.
    /// everything except the full-information references.
    pub const NON_ORACLE: [PolicyKind; 6] = [
        PolicyKind::CabUcb,
        PolicyKind::CabTsEps,
        PolicyKind::CabTsTheta,
        PolicyKind::MaxMatch,
        PolicyKind::Fairx,
        PolicyKind::Random,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::CabUcb => "cab_ucb",
            PolicyKind::CabTsEps => "cab_ts_eps",
            PolicyKind::CabTsTheta => "cab_ts_theta",
            PolicyKind::MaxMatch => "max_match",
            PolicyKind::Fairx => "fairx",
            PolicyKind::Random => "random",
            PolicyKind::OracleSatisfaction => "oracle_satisfaction",
            PolicyKind::OracleMatch => "oracle_match",
        }
    }

    pub fn is_oracle(&self) -> bool {
        matches!(
            self,
            PolicyKind::OracleSatisfaction | PolicyKind::OracleMatch
        )
    }

    /// Builds the policy. Oracle kinds require the true parameter.
    pub fn build(
        &self,
        dim: usize,
        model: GlmModel,
        sat: Satisfaction,
        config: PolicyConfig,
        theta_star: Option<&[f64]>,
    ) -> Result<Box<dyn Policy>, CabError> {
        let need_truth = || {
            theta_star.map(<[f64]>::to_vec).ok_or_else(|| {
                CabError::invalid("theta_star", "oracle policies need the true parameter")
            })
        };
        Ok(match self {
            PolicyKind::CabUcb => Box::new(CabUcb::new(dim, model, sat, config)?),
            PolicyKind::CabTsEps => Box::new(CabTsEps::new(dim, model, sat, config)?),
            PolicyKind::CabTsTheta => Box::new(CabTsTheta::new(dim, model, sat, config)?),
            PolicyKind::MaxMatch => Box::new(MaxMatch::new(dim, model, sat, config)?),
            PolicyKind::Fairx => Box::new(FairX::new(dim, model, sat, config)?),
            PolicyKind::Random => Box::new(RandomPolicy),
            PolicyKind::OracleSatisfaction => {
                Box::new(OracleSatisfaction::new(need_truth()?, model, sat))
            }
            PolicyKind::OracleMatch => Box::new(OracleMatch::new(need_truth()?, model)),
        })
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = CabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .iter()
            .find(|k| k.as_str() == s)
            .copied()
            .ok_or_else(|| CabError::invalid("policy", format!("unknown policy `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::LinkFamily;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn slate_from(n: usize, k: usize, d: usize, rng: &mut ChaCha8Rng) -> ContextSlate {
        let features = (0..n * k * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ContextSlate::new(n, k, d, features).unwrap()
    }

    fn logistic_state(dim: usize, with_h: bool) -> PolicyState {
        PolicyState::new(
            dim,
            GlmModel::logistic(1.0),
            Satisfaction::capped_linear(5.0).unwrap(),
            PolicyConfig::experimental(dim, 4),
            with_h,
        )
        .unwrap()
    }

    fn bernoulli_feedback(n: usize, rng: &mut ChaCha8Rng) -> Feedback {
        Feedback::new((0..n).map(|_| f64::from(rng.gen::<bool>())).collect())
    }

    #[test]
    fn update_accumulates_design_matrix_trace() {
        let dim = 3;
        let n = 4;
        let mut state = logistic_state(dim, false);
        let lambda0 = state.config.lambda0;

        // Unit-norm features: trace(V) grows by exactly one per observation.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut features = Vec::new();
        for _ in 0..n * 2 {
            let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut x {
                *v /= norm;
            }
            features.extend(x);
        }
        let slate = ContextSlate::new(n, 2, dim, features).unwrap();
        let alloc = Allocation::new(vec![0, 1, 0, 1], 2).unwrap();
        let fb = bernoulli_feedback(n, &mut rng);
        policy_update(&mut state, &slate, &alloc, &fb).unwrap();

        assert!((state.v.trace() - (lambda0 * dim as f64 + n as f64)).abs() < 1e-9);
        assert_eq!(state.round(), 2);
        assert_eq!(state.log().rounds_seen(), 1);
    }

    #[test]
    fn design_matrix_reconstructs_from_log() {
        let dim = 3;
        let mut state = logistic_state(dim, false);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..3 {
            let slate = slate_from(4, 2, dim, &mut rng);
            let alloc =
                Allocation::new((0..4).map(|_| rng.gen_range(0..2usize)).collect(), 2).unwrap();
            let fb = bernoulli_feedback(4, &mut rng);
            policy_update(&mut state, &slate, &alloc, &fb).unwrap();
        }
        let mut rebuilt = PsdMatrix::scaled_identity(dim, state.config.lambda0);
        for (x, _) in state.log().iter() {
            rebuilt.rank_one_add(x).unwrap();
        }
        for i in 0..dim {
            for j in 0..dim {
                assert!((rebuilt.entry(i, j) - state.v.entry(i, j)).abs() < 1e-12);
            }
        }
        assert_eq!(state.round(), state.log().rounds_seen() + 1);
    }

    #[test]
    fn linear_family_curvature_equals_design_matrix() {
        // With mu' = 1 the curvature matrix reduces to
        // sum xx' + (lambda0 / E) * E * I = V exactly.
        let dim = 2;
        let mut state = PolicyState::new(
            dim,
            GlmModel::linear(),
            Satisfaction::Identity,
            PolicyConfig::experimental(dim, 3),
            true,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..2 {
            let slate = slate_from(3, 2, dim, &mut rng);
            let alloc =
                Allocation::new((0..3).map(|_| rng.gen_range(0..2usize)).collect(), 2).unwrap();
            let fb = Feedback::new((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect());
            policy_update(&mut state, &slate, &alloc, &fb).unwrap();
        }
        let h = state.curvature_matrix().unwrap();
        for i in 0..dim {
            for j in 0..dim {
                assert!((h.entry(i, j) - state.v.entry(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn logistic_zero_estimate_gives_quarter_design_matrix() {
        // Before any refit theta_bar is zero, so every mu' is 1/4 and
        // H = 0.25 * V after the first update.
        let dim = 3;
        let mut state = logistic_state(dim, true);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let slate = slate_from(4, 2, dim, &mut rng);
        let alloc = Allocation::new(vec![0, 1, 1, 0], 2).unwrap();
        let fb = bernoulli_feedback(4, &mut rng);
        policy_update(&mut state, &slate, &alloc, &fb).unwrap();
        let h = state.curvature_matrix().unwrap();
        for i in 0..dim {
            for j in 0..dim {
                assert!((h.entry(i, j) - 0.25 * state.v.entry(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn incremental_h_matches_full_recompute_under_frozen_estimate() {
        // With a frozen estimate (no refresh between updates) the stale-theta
        // accumulator and the full recompute agree exactly.
        let dim = 2;
        let mut cfg = PolicyConfig::experimental(dim, 3);
        let mut full = PolicyState::new(
            dim,
            GlmModel::logistic(1.0),
            Satisfaction::Identity,
            cfg,
            true,
        )
        .unwrap();
        cfg.incremental_h = true;
        let mut incr = PolicyState::new(
            dim,
            GlmModel::logistic(1.0),
            Satisfaction::Identity,
            cfg,
            true,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..3 {
            let slate = slate_from(3, 2, dim, &mut rng);
            let alloc =
                Allocation::new((0..3).map(|_| rng.gen_range(0..2usize)).collect(), 2).unwrap();
            let fb = bernoulli_feedback(3, &mut rng);
            policy_update(&mut full, &slate, &alloc, &fb).unwrap();
            policy_update(&mut incr, &slate, &alloc, &fb).unwrap();
        }
        let hf = full.curvature_matrix().unwrap();
        let hi = incr.curvature_matrix().unwrap();
        for i in 0..dim {
            for j in 0..dim {
                assert!((hf.entry(i, j) - hi.entry(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn update_rejects_inconsistent_shapes_and_outcomes() {
        let dim = 2;
        let mut state = logistic_state(dim, false);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let slate = slate_from(3, 2, dim, &mut rng);
        let alloc = Allocation::new(vec![0, 1, 0], 2).unwrap();

        let short = Feedback::new(vec![1.0]);
        assert!(matches!(
            policy_update(&mut state, &slate, &alloc, &short),
            Err(CabError::DimensionMismatch { .. })
        ));

        let non_binary = Feedback::new(vec![0.0, 0.5, 1.0]);
        assert!(matches!(
            policy_update(&mut state, &slate, &alloc, &non_binary),
            Err(CabError::InvalidParameter { .. })
        ));
        assert_eq!(state.model().family(), LinkFamily::Logistic);
    }

    #[test]
    fn policy_kind_round_trips_names() {
        for kind in PolicyKind::ALL {
            let parsed: PolicyKind = kind.as_str().parse().unwrap();
            assert_eq!(parsed, kind);
        }
        assert!("nope".parse::<PolicyKind>().is_err());
        assert!(PolicyKind::OracleSatisfaction.is_oracle());
        assert!(!PolicyKind::CabUcb.is_oracle());
    }

    #[test]
    fn oracle_kinds_require_truth() {
        let model = GlmModel::logistic(1.0);
        let sat = Satisfaction::capped_linear(5.0).unwrap();
        let cfg = PolicyConfig::experimental(2, 3);
        assert!(PolicyKind::OracleMatch
            .build(2, model, sat, cfg, None)
            .is_err());
        assert!(PolicyKind::OracleMatch
            .build(2, model, sat, cfg, Some(&[0.1, 0.2]))
            .is_ok());
        assert!(PolicyKind::CabUcb.build(2, model, sat, cfg, None).is_ok());
    }

    #[test]
    fn config_validation() {
        let mut cfg = PolicyConfig::experimental(3, 5);
        cfg.validate().unwrap();
        cfg.fairx_samples = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = PolicyConfig::experimental(3, 5);
        cfg.delta = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = PolicyConfig::experimental(3, 5);
        cfg.lambda0 = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn theorem_constants_override_experimental_values() {
        let model = GlmModel::logistic(1.0);
        let sat = Satisfaction::capped_linear(5.0).unwrap();
        let mut cfg = PolicyConfig::experimental(3, 5);
        let (c1_before, a_before) = (cfg.c1, cfg.a);
        cfg.apply_theorem_constants(&model, &sat, 3, 5, 100)
            .unwrap();
        assert_ne!(cfg.c1, c1_before);
        assert_ne!(cfg.a, a_before);
        assert!((cfg.a - cfg.c1 * (model.lipschitz() * 5.0).sqrt()).abs() < 1e-12);
    }
}
