//! Per-round allocation rules for each policy.

use rand::{Rng, RngCore};

use crate::error::CabError;
use crate::glm::{dot, Allocation, ContextSlate, GlmModel, Satisfaction};
use crate::oracle::{greedy_allocate, greedy_allocate_in_order, WelfareInstance};
use crate::policy::PolicyState;

fn check_slate(state: &PolicyState, slate: &ContextSlate) -> Result<(), CabError> {
    if slate.dim() != state.dim() {
        return Err(CabError::DimensionMismatch {
            context: "policy select",
            expected: state.dim(),
            actual: slate.dim(),
        });
    }
    Ok(())
}

fn greedy_with_config(
    state: &PolicyState,
    inst: &WelfareInstance,
    rng: Option<&mut dyn RngCore>,
) -> Allocation {
    if state.config().shuffle_greedy_order {
        if let Some(rng) = rng {
            let mut order: Vec<usize> = (0..inst.n_users()).collect();
            // Fisher-Yates with the policy stream.
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            return greedy_allocate_in_order(inst, &order).0;
        }
    }
    greedy_allocate(inst).0
}

/// Optimistic selection: greedy welfare maximization of
/// `μ(φ^T θ̄)` values plus per-user bonuses `c₁‖φ‖_{V⁻¹}`.
///
/// Refits `θ̄` first. All bonuses are nonnegative, so the greedy oracle runs
/// in its monotone regime.
pub fn ucb_select(state: &mut PolicyState, slate: &ContextSlate) -> Result<Allocation, CabError> {
    check_slate(state, slate)?;
    state.refresh_theta()?;
    let inst = ucb_instance(state, slate)?;
    Ok(greedy_allocate(&inst).0)
}

/// [`ucb_select`] with a generator available for the optional shuffled
/// greedy order.
pub(crate) fn ucb_select_shuffled(
    state: &mut PolicyState,
    slate: &ContextSlate,
    rng: &mut dyn RngCore,
) -> Result<Allocation, CabError> {
    check_slate(state, slate)?;
    state.refresh_theta()?;
    let inst = ucb_instance(state, slate)?;
    Ok(greedy_with_config(state, &inst, Some(rng)))
}

/// The (values, bonuses) welfare instance the optimistic policy maximizes.
pub(crate) fn ucb_instance(
    state: &PolicyState,
    slate: &ContextSlate,
) -> Result<WelfareInstance, CabError> {
    let (n, k) = (slate.n_users(), slate.n_arms());
    let c1 = state.config().c1;
    let mut values = Vec::with_capacity(n * k);
    let mut weights = Vec::with_capacity(n * k);
    for user in 0..n {
        for arm in 0..k {
            let x = slate.feature(user, arm);
            values.push(state.model().mean(dot(x, state.theta_bar())));
            weights.push(c1 * state.design_matrix().mahalanobis_inv_norm(x)?);
        }
    }
    WelfareInstance::new(n, k, values, weights, *state.satisfaction())
}

/// Reward-space Thompson sampling: draws one perturbation per user from
/// `N(0, a² H⁻¹)` and maximizes the plug-in objective plus the linear term
/// `Σ φ(i, π(i))^T ε(i)`.
pub fn ts_eps_select(
    state: &mut PolicyState,
    slate: &ContextSlate,
    rng: &mut dyn RngCore,
) -> Result<Allocation, CabError> {
    check_slate(state, slate)?;
    state.refresh_theta()?;
    let draws = ts_draw_perturbations(state, slate.n_users(), rng)?;
    ts_eps_select_with_draws(state, slate, &draws, Some(rng))
}

/// Deterministic tail of [`ts_eps_select`] given realized perturbations.
/// Assumes `θ̄` is fresh.
pub fn ts_eps_select_with_draws(
    state: &PolicyState,
    slate: &ContextSlate,
    draws: &[Vec<f64>],
    rng: Option<&mut dyn RngCore>,
) -> Result<Allocation, CabError> {
    let (n, k) = (slate.n_users(), slate.n_arms());
    if draws.len() != n {
        return Err(CabError::DimensionMismatch {
            context: "ts_eps_select draws",
            expected: n,
            actual: draws.len(),
        });
    }
    let mut values = Vec::with_capacity(n * k);
    let mut weights = Vec::with_capacity(n * k);
    for (user, draw) in draws.iter().enumerate() {
        for arm in 0..k {
            let x = slate.feature(user, arm);
            values.push(state.model().mean(dot(x, state.theta_bar())));
            weights.push(dot(x, draw));
        }
    }
    let inst = WelfareInstance::new(n, k, values, weights, *state.satisfaction())?;
    Ok(greedy_with_config(state, &inst, rng))
}

/// Parameter-space Thompson sampling: per-user draws `θ̃(i) = θ̄ + ε(i)`
/// feed the plug-in objective directly; the surrogate stays monotone.
pub fn ts_theta_select(
    state: &mut PolicyState,
    slate: &ContextSlate,
    rng: &mut dyn RngCore,
) -> Result<Allocation, CabError> {
    check_slate(state, slate)?;
    state.refresh_theta()?;
    let draws = ts_draw_perturbations(state, slate.n_users(), rng)?;
    ts_theta_select_with_draws(state, slate, &draws, Some(rng))
}

/// Deterministic tail of [`ts_theta_select`] given realized perturbations.
/// Assumes `θ̄` is fresh.
pub fn ts_theta_select_with_draws(
    state: &PolicyState,
    slate: &ContextSlate,
    draws: &[Vec<f64>],
    rng: Option<&mut dyn RngCore>,
) -> Result<Allocation, CabError> {
    let (n, k) = (slate.n_users(), slate.n_arms());
    if draws.len() != n {
        return Err(CabError::DimensionMismatch {
            context: "ts_theta_select draws",
            expected: n,
            actual: draws.len(),
        });
    }
    let mut values = Vec::with_capacity(n * k);
    for (user, draw) in draws.iter().enumerate() {
        let theta_i: Vec<f64> = state
            .theta_bar()
            .iter()
            .zip(draw.iter())
            .map(|(t, e)| t + e)
            .collect();
        for arm in 0..k {
            values.push(state.model().mean(dot(slate.feature(user, arm), &theta_i)));
        }
    }
    let inst = WelfareInstance::without_weights(n, k, values, *state.satisfaction())?;
    Ok(greedy_with_config(state, &inst, rng))
}

/// Draws `n` i.i.d. perturbations from `N(0, a² H⁻¹)`.
pub(crate) fn ts_draw_perturbations(
    state: &PolicyState,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<Vec<f64>>, CabError> {
    let h = state.curvature_matrix().ok_or_else(|| {
        CabError::invalid("policy", "sampling policy carries no curvature matrix")
    })?;
    let a = state.config().a;
    (0..n)
        .map(|_| h.sample_scaled_inverse_gaussian(a, rng))
        .collect()
}

/// Match-count maximization: per-user argmax of
/// `μ(φ^T θ̄) + c₁‖φ‖_{V⁻¹}`, ties to the smallest arm index. The objective
/// is modular, so the per-user argmax is exact.
pub fn max_match_select(
    state: &mut PolicyState,
    slate: &ContextSlate,
) -> Result<Allocation, CabError> {
    check_slate(state, slate)?;
    state.refresh_theta()?;
    let (n, k) = (slate.n_users(), slate.n_arms());
    let c1 = state.config().c1;
    let mut assignment = Vec::with_capacity(n);
    for user in 0..n {
        let mut best_arm = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for arm in 0..k {
            let x = slate.feature(user, arm);
            let score = state.model().mean(dot(x, state.theta_bar()))
                + c1 * state.design_matrix().mahalanobis_inv_norm(x)?;
            if score > best_score {
                best_score = score;
                best_arm = arm;
            }
        }
        assignment.push(best_arm);
    }
    Allocation::new(assignment, k)
}

/// Exposure-proportional policy matrix `P(i,a) = μ(φ(i,a)^T θ) / Σ_{a'} μ`,
/// row-major `N×K`.
pub fn fairx_distribution(
    slate: &ContextSlate,
    theta: &[f64],
    model: &GlmModel,
) -> Result<Vec<f64>, CabError> {
    let (n, k) = (slate.n_users(), slate.n_arms());
    let mut p = Vec::with_capacity(n * k);
    for user in 0..n {
        let mut row = Vec::with_capacity(k);
        let mut row_sum = 0.0;
        for arm in 0..k {
            let affinity = model.mean(dot(slate.feature(user, arm), theta));
            row.push(affinity);
            row_sum += affinity;
        }
        if row_sum.is_nan() || row_sum <= 0.0 || row.iter().any(|v| *v < 0.0) {
            return Err(CabError::DegenerateDistribution { user, row_sum });
        }
        p.extend(row.into_iter().map(|v| v / row_sum));
    }
    Ok(p)
}

fn fairx_objective(slate: &ContextSlate, theta: &[f64], model: &GlmModel) -> Result<f64, CabError> {
    let (n, k) = (slate.n_users(), slate.n_arms());
    let p = fairx_distribution(slate, theta, model)?;
    let mut total = 0.0;
    for user in 0..n {
        for arm in 0..k {
            let affinity = model.mean(dot(slate.feature(user, arm), theta));
            total += p[user * k + arm] * affinity;
        }
    }
    Ok(total)
}

/// Samples each user's arm independently from its policy row. Row-major
/// `N×K` input; rows must sum to one.
pub fn sample_allocation_from_policy(
    p: &[f64],
    n_users: usize,
    n_arms: usize,
    rng: &mut dyn RngCore,
) -> Allocation {
    let mut assignment = Vec::with_capacity(n_users);
    for user in 0..n_users {
        let u: f64 = rng.gen();
        let mut cumulative = 0.0;
        let mut chosen = n_arms - 1;
        for arm in 0..n_arms {
            cumulative += p[user * n_arms + arm];
            if u < cumulative {
                chosen = arm;
                break;
            }
        }
        assignment.push(chosen);
    }
    Allocation::new(assignment, n_arms).expect("arms chosen in range")
}

/// Exposure-fair selection: evaluates candidate parameters on the
/// confidence-ellipsoid surface `‖θ − θ̄‖_V = √γ` (plus the center), keeps
/// the one with the largest expected match under its own exposure policy,
/// and samples the allocation from that policy row by row.
pub fn fairx_select(
    state: &mut PolicyState,
    slate: &ContextSlate,
    rng: &mut dyn RngCore,
) -> Result<Allocation, CabError> {
    check_slate(state, slate)?;
    state.refresh_theta()?;
    let dim = state.dim();
    let radius = state.config().gamma.sqrt();

    let mut best_theta = state.theta_bar().to_vec();
    let mut best_objective = fairx_objective(slate, &best_theta, state.model())?;
    for _ in 0..state.config().fairx_samples {
        let mut z: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let z_norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if z_norm == 0.0 {
            continue;
        }
        for v in &mut z {
            *v /= z_norm;
        }
        let direction = state.design_matrix().inv_transpose_apply(&z)?;
        let candidate: Vec<f64> = state
            .theta_bar()
            .iter()
            .zip(direction.iter())
            .map(|(t, d)| t + radius * d)
            .collect();
        let objective = fairx_objective(slate, &candidate, state.model())?;
        if objective > best_objective {
            best_objective = objective;
            best_theta = candidate;
        }
    }

    let p = fairx_distribution(slate, &best_theta, state.model())?;
    Ok(sample_allocation_from_policy(
        &p,
        slate.n_users(),
        slate.n_arms(),
        rng,
    ))
}

/// Uniform arm per user.
pub fn random_select(slate: &ContextSlate, rng: &mut dyn RngCore) -> Allocation {
    let k = slate.n_arms();
    let assignment = (0..slate.n_users()).map(|_| rng.gen_range(0..k)).collect();
    Allocation::new(assignment, k).expect("arms chosen in range")
}

/// Satisfaction reference: greedy welfare maximization on the true
/// affinities.
pub fn oracle_satisfaction_select(
    slate: &ContextSlate,
    theta_star: &[f64],
    model: &GlmModel,
    sat: &Satisfaction,
) -> Result<Allocation, CabError> {
    let (n, k) = (slate.n_users(), slate.n_arms());
    let mut values = Vec::with_capacity(n * k);
    for user in 0..n {
        for arm in 0..k {
            values.push(model.mean(dot(slate.feature(user, arm), theta_star)));
        }
    }
    let inst = WelfareInstance::without_weights(n, k, values, *sat)?;
    Ok(greedy_allocate(&inst).0)
}

/// Match reference: per-user argmax of the true affinity, ties to the
/// smallest arm index.
pub fn oracle_match_select(
    slate: &ContextSlate,
    theta_star: &[f64],
    model: &GlmModel,
) -> Result<Allocation, CabError> {
    let (n, k) = (slate.n_users(), slate.n_arms());
    let mut assignment = Vec::with_capacity(n);
    for user in 0..n {
        let mut best_arm = 0usize;
        let mut best = f64::NEG_INFINITY;
        for arm in 0..k {
            let affinity = model.mean(dot(slate.feature(user, arm), theta_star));
            if affinity > best {
                best = affinity;
                best_arm = arm;
            }
        }
        assignment.push(best_arm);
    }
    Allocation::new(assignment, k)
}
