//! Synthetic environment: popularity-structured context generation, GLM
//! feedback sampling, and per-round scoring.
//!
//! Each feature vector mixes a popularity component with an idiosyncratic
//! one, `φ(i,a) = λ·φ_pop(i,a) + (1−λ)·φ_base(i,a)`, both standard normal.
//! Per (user, dimension) the popularity draws are sorted so values strictly
//! decrease with the arm index — arm 0 is the most popular — while the base
//! draws stay i.i.d. The true parameter is uniform on `[0,1]^d`. All slates
//! are generated up front from the seed, before any policy acts, so the
//! context sequence never depends on the learner.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::CabError;
use crate::glm::{
    dot, expected_match_matrix, f_value, Allocation, ContextSlate, GlmModel, LinkFamily,
    Satisfaction,
};
use crate::policy::Feedback;

/// Parameters of the synthetic problem generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_arms: usize,
    pub dim: usize,
    pub horizon: usize,
    /// Popularity mixing coefficient `λ ∈ [0,1]`.
    pub popularity: f64,
    /// Satisfaction cap `β`.
    pub beta: f64,
    pub seed: u64,
    /// Rescale every feature vector to unit norm.
    pub normalize_features: bool,
    /// Reuse round 1's slate for the whole horizon instead of redrawing.
    pub static_contexts: bool,
    pub family: LinkFamily,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_users: 50,
            n_arms: 10,
            dim: 5,
            horizon: 500,
            popularity: 0.5,
            beta: 5.0,
            seed: 0,
            normalize_features: false,
            static_contexts: false,
            family: LinkFamily::Logistic,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), CabError> {
        if self.n_users == 0 || self.n_arms == 0 || self.dim == 0 || self.horizon == 0 {
            return Err(CabError::invalid(
                "spec",
                "n_users, n_arms, dim, and horizon must all be positive",
            ));
        }
        if !(0.0..=1.0).contains(&self.popularity) {
            return Err(CabError::invalid(
                "popularity",
                format!("must lie in [0,1], got {}", self.popularity),
            ));
        }
        if self.beta.is_nan() || self.beta <= 0.0 {
            return Err(CabError::invalid(
                "beta",
                format!("must be positive, got {}", self.beta),
            ));
        }
        Ok(())
    }

    /// The satisfaction function the experiments use, `r(x) = min(x, β)`.
    pub fn satisfaction(&self) -> Result<Satisfaction, CabError> {
        Satisfaction::capped_linear(self.beta)
    }

    /// The feedback model, certified for the parameter norms this generator
    /// can produce (`‖θ*‖ ≤ √d` under the uniform draw).
    pub fn model(&self) -> GlmModel {
        GlmModel::from_family(self.family, (self.dim as f64).sqrt())
    }
}

/// A fully generated problem: the hidden parameter and every round's slate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentInstance {
    pub spec: SyntheticSpec,
    pub theta_star: Vec<f64>,
    pub slates: Vec<ContextSlate>,
}

/// Version tag for the instance replay format.
pub const INSTANCE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    version: u32,
    instance: EnvironmentInstance,
}

/// Draws the hidden parameter and all `T` slates from `rng`.
pub fn generate_instance(
    spec: &SyntheticSpec,
    rng: &mut dyn RngCore,
) -> Result<EnvironmentInstance, CabError> {
    spec.validate()?;
    let theta_star: Vec<f64> = (0..spec.dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut slates = Vec::with_capacity(spec.horizon);
    let rounds_to_draw = if spec.static_contexts {
        1
    } else {
        spec.horizon
    };
    for _ in 0..rounds_to_draw {
        slates.push(generate_slate(spec, rng)?);
    }
    if spec.static_contexts {
        let first = slates[0].clone();
        slates.resize(spec.horizon, first);
    }
    Ok(EnvironmentInstance {
        spec: *spec,
        theta_star,
        slates,
    })
}

fn generate_slate(spec: &SyntheticSpec, rng: &mut dyn RngCore) -> Result<ContextSlate, CabError> {
    let (n, k, d) = (spec.n_users, spec.n_arms, spec.dim);
    let lambda = spec.popularity;
    let mut features = vec![0.0; n * k * d];
    let mut pop_column = vec![0.0f64; k];
    for user in 0..n {
        // Popularity component: per dimension, draw K values and sort them
        // descending across the arm index.
        for coord in 0..d {
            for slot in pop_column.iter_mut() {
                *slot = rng.sample(StandardNormal);
            }
            pop_column.sort_by(|a, b| b.partial_cmp(a).expect("normal draws are finite"));
            for arm in 0..k {
                features[(user * k + arm) * d + coord] = lambda * pop_column[arm];
            }
        }
        // Idiosyncratic component, i.i.d. per (arm, dimension).
        for arm in 0..k {
            for coord in 0..d {
                let base: f64 = rng.sample(StandardNormal);
                features[(user * k + arm) * d + coord] += (1.0 - lambda) * base;
            }
        }
    }
    let mut slate = ContextSlate::new(n, k, d, features)?;
    if spec.normalize_features {
        slate.normalize_features();
    }
    Ok(slate)
}

/// Samples one round of feedback for the chosen allocation: Bernoulli with
/// the logistic mean, or (test-only) Gaussian with unit noise for the linear
/// family.
pub fn sample_feedback(
    slate: &ContextSlate,
    alloc: &Allocation,
    theta_star: &[f64],
    model: &GlmModel,
    rng: &mut dyn RngCore,
) -> Result<Feedback, CabError> {
    if theta_star.len() != slate.dim() {
        return Err(CabError::DimensionMismatch {
            context: "sample_feedback",
            expected: slate.dim(),
            actual: theta_star.len(),
        });
    }
    let mut outcomes = Vec::with_capacity(slate.n_users());
    for user in 0..slate.n_users() {
        let z = dot(slate.feature(user, alloc.arm_of(user)), theta_star);
        let y = match model.family() {
            LinkFamily::Logistic => {
                let p = model.mean(z);
                f64::from(rng.gen::<f64>() < p)
            }
            LinkFamily::Linear => z + rng.sample::<f64, _>(StandardNormal),
        };
        outcomes.push(y);
    }
    Ok(Feedback::new(outcomes))
}

/// Per-round evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Round index, starting at 1.
    pub round: usize,
    /// Realized satisfaction `f(π; θ*)`.
    pub satisfaction: f64,
    /// Sum of observed outcomes (the match count for Bernoulli feedback).
    pub matches: f64,
    /// Per-arm sums of true affinities over assigned users.
    pub per_arm_expected_match_sum: Vec<f64>,
    /// Users assigned per arm; sums to `N`.
    pub selection_counts: Vec<usize>,
}

/// Scores one completed round against the true parameter.
pub fn score_round(
    slate: &ContextSlate,
    alloc: &Allocation,
    feedback: &Feedback,
    theta_star: &[f64],
    model: &GlmModel,
    sat: &Satisfaction,
    round: usize,
) -> Result<RoundRecord, CabError> {
    if feedback.outcomes.len() != slate.n_users() {
        return Err(CabError::DimensionMismatch {
            context: "score_round",
            expected: slate.n_users(),
            actual: feedback.outcomes.len(),
        });
    }
    let satisfaction = f_value(slate, alloc, theta_star, model, sat)?;
    let affinities = expected_match_matrix(slate, theta_star, model)?;
    let k = slate.n_arms();
    let mut per_arm = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for user in 0..slate.n_users() {
        let arm = alloc.arm_of(user);
        per_arm[arm] += affinities[user * k + arm];
        counts[arm] += 1;
    }
    Ok(RoundRecord {
        round,
        satisfaction,
        matches: feedback.outcomes.iter().sum(),
        per_arm_expected_match_sum: per_arm,
        selection_counts: counts,
    })
}

/// Writes an instance as versioned JSON for cross-run replay.
pub fn write_instance(instance: &EnvironmentInstance, path: &Path) -> Result<(), std::io::Error> {
    let file = fs::File::create(path)?;
    let writer = BufWriter::new(file);
    serde_json::to_writer(
        writer,
        &InstanceFile {
            version: INSTANCE_FORMAT_VERSION,
            instance: instance.clone(),
        },
    )?;
    Ok(())
}

/// Reads an instance written by [`write_instance`], validating the format
/// version and shape.
pub fn read_instance(path: &Path) -> Result<EnvironmentInstance, std::io::Error> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let parsed: InstanceFile = serde_json::from_reader(reader)?;
    if parsed.version != INSTANCE_FORMAT_VERSION {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!(
                "unsupported instance format version {} (expected {})",
                parsed.version, INSTANCE_FORMAT_VERSION
            ),
        ));
    }
    let instance = parsed.instance;
    if instance.theta_star.len() != instance.spec.dim
        || instance.slates.len() != instance.spec.horizon
    {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "instance shape disagrees with its spec",
        ));
    }
    Ok(instance)
}
