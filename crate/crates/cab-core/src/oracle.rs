//! Allocation oracle: maximize `Σ_a r(Σ_{i∈π⁻¹(a)} v_i(a)) + Σ_i w_i(π(i))`
//! over all assignments of users to arms.
//!
//! Concavity of `r` makes each arm's utility submodular in its user set, so
//! the problem is a submodular welfare instance. [`greedy_allocate`] scans
//! users in index order and gives each one to the arm with the largest
//! marginal gain; for monotone instances (all `w ≥ 0`) this is a
//! 1/2-approximation, and it is exact when `r` is the identity and `w = 0`
//! (the objective is then modular). [`brute_force_allocate`] enumerates all
//! `K^N` allocations and is the testing reference.

use crate::error::CabError;
use crate::glm::{Allocation, Satisfaction};

/// Enumeration guard for [`brute_force_allocate`].
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// One welfare-maximization problem: nonnegative per-(user, arm) values fed
/// through the satisfaction function, plus additive per-(user, arm) weights.
#[derive(Debug, Clone)]
pub struct WelfareInstance {
    n_users: usize,
    n_arms: usize,
    /// Row-major `N×K`, entries nonnegative (these are `μ` outputs or zero).
    values: Vec<f64>,
    /// Row-major `N×K`; may be negative (e.g. Gaussian perturbations).
    weights: Vec<f64>,
    sat: Satisfaction,
}

impl WelfareInstance {
    pub fn new(
        n_users: usize,
        n_arms: usize,
        values: Vec<f64>,
        weights: Vec<f64>,
        sat: Satisfaction,
    ) -> Result<Self, CabError> {
        let expected = n_users * n_arms;
        if values.len() != expected {
            return Err(CabError::DimensionMismatch {
                context: "WelfareInstance values",
                expected,
                actual: values.len(),
            });
        }
        if weights.len() != expected {
            return Err(CabError::DimensionMismatch {
                context: "WelfareInstance weights",
                expected,
                actual: weights.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(CabError::invalid(
                "values",
                format!("entries must be finite and nonnegative, got {v}"),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(CabError::invalid(
                "weights",
                format!("entries must be finite, got {w}"),
            ));
        }
        Ok(WelfareInstance {
            n_users,
            n_arms,
            values,
            weights,
            sat,
        })
    }

    /// Convenience constructor with all-zero additive weights.
    pub fn without_weights(
        n_users: usize,
        n_arms: usize,
        values: Vec<f64>,
        sat: Satisfaction,
    ) -> Result<Self, CabError> {
        let weights = vec![0.0; n_users * n_arms];
        WelfareInstance::new(n_users, n_arms, values, weights, sat)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn value(&self, user: usize, arm: usize) -> f64 {
        self.values[user * self.n_arms + arm]
    }

    pub fn weight(&self, user: usize, arm: usize) -> f64 {
        self.weights[user * self.n_arms + arm]
    }

    pub fn satisfaction(&self) -> &Satisfaction {
        &self.sat
    }

    fn has_negative_weight(&self) -> bool {
        self.weights.iter().any(|w| *w < 0.0)
    }

    /// The true (untruncated) objective of an allocation.
    pub fn objective(&self, alloc: &Allocation) -> f64 {
        let mut arm_sums = vec![0.0; self.n_arms];
        let mut linear = 0.0;
        for (user, &arm) in alloc.as_slice().iter().enumerate() {
            arm_sums[arm] += self.value(user, arm);
            linear += self.weight(user, arm);
        }
        arm_sums.iter().map(|s| self.sat.value(*s)).sum::<f64>() + linear
    }
}

/// Greedy welfare maximization.
///
/// Users are processed in index order; user `i` goes to the arm maximizing
/// the marginal gain `r(S_a + v_i(a)) − r(S_a) + w_i(a)` over the running
/// arm totals `S_a`, ties broken toward the smallest arm index. When any
/// weight is negative the gains are floored at zero before comparison, which
/// restores monotonicity of the surrogate; the returned objective is always
/// the true value of the final allocation.
pub fn greedy_allocate(inst: &WelfareInstance) -> (Allocation, f64) {
    let order: Vec<usize> = (0..inst.n_users()).collect();
    greedy_allocate_in_order(inst, &order)
}

/// [`greedy_allocate`] with an explicit user processing order.
#[allow(clippy::needless_range_loop)]
pub fn greedy_allocate_in_order(inst: &WelfareInstance, order: &[usize]) -> (Allocation, f64) {
    debug_assert_eq!(order.len(), inst.n_users());
    let truncate = inst.has_negative_weight();
    let mut arm_sums = vec![0.0; inst.n_arms()];
    let mut assignment = vec![0usize; inst.n_users()];
    for &user in order {
        let mut best_arm = 0usize;
        let mut best_gain = f64::NEG_INFINITY;
        for arm in 0..inst.n_arms() {
            let mut gain = inst.sat.value(arm_sums[arm] + inst.value(user, arm))
                - inst.sat.value(arm_sums[arm])
                + inst.weight(user, arm);
            if truncate {
                gain = gain.max(0.0);
            }
            if gain > best_gain {
                best_gain = gain;
                best_arm = arm;
            }
        }
        assignment[user] = best_arm;
        arm_sums[best_arm] += inst.value(user, best_arm);
    }
    let alloc = Allocation::new(assignment, inst.n_arms()).expect("arms chosen in range");
    let objective = inst.objective(&alloc);
    (alloc, objective)
}

/// Exact maximizer by enumeration of all `K^N` allocations.
///
/// Ties resolve to the lexicographically smallest assignment. Guarded by
/// [`BRUTE_FORCE_LIMIT`].
pub fn brute_force_allocate(inst: &WelfareInstance) -> Result<(Allocation, f64), CabError> {
    let n = inst.n_users();
    let k = inst.n_arms();
    if k == 0 {
        return Err(CabError::invalid(
            "n_arms",
            "cannot allocate over zero arms",
        ));
    }
    let size = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > BRUTE_FORCE_LIMIT {
        return Err(CabError::InstanceTooLarge {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    let mut assignment = vec![0usize; n];
    let mut best_assignment = assignment.clone();
    let mut best_objective = objective_of(inst, &assignment);
    loop {
        // Advance odometer-style with user 0 as the most significant digit,
        // so iterating visits assignments in lexicographic order and the
        // strict improvement test keeps the smallest maximizer.
        let mut pos = n;
        loop {
            if pos == 0 {
                let alloc = Allocation::new(best_assignment, k).expect("arms in range");
                return Ok((alloc, best_objective));
            }
            pos -= 1;
            assignment[pos] += 1;
            if assignment[pos] < k {
                break;
            }
            assignment[pos] = 0;
        }
        let obj = objective_of(inst, &assignment);
        if obj > best_objective {
            best_objective = obj;
            best_assignment.copy_from_slice(&assignment);
        }
    }
}

fn objective_of(inst: &WelfareInstance, assignment: &[usize]) -> f64 {
    let mut arm_sums = vec![0.0; inst.n_arms()];
    let mut linear = 0.0;
    for (user, &arm) in assignment.iter().enumerate() {
        arm_sums[arm] += inst.value(user, arm);
        linear += inst.weight(user, arm);
    }
    arm_sums.iter().map(|s| inst.sat.value(*s)).sum::<f64>() + linear
}
