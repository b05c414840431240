//! Gaze selection policies over a discrete fixation grid.
//!
//! Attention is cast as an adversarial bandit: each frame the tracker
//! fixates one of `K` gaze offsets and receives the resulting weight
//! concentration as reward. Hedge assumes full information (the reward
//! of every action is available each step, which the tracker delivers by
//! weighing all gazes against one shared particle propagation); EXP3
//! only needs the reward of the action actually played. Both keep
//! cumulative reward estimates `G` and play the Gibbs distribution
//! `p(k) proportional to exp(gamma * G(k))`, so updates and draws are
//! cheap and the policies track non-stationary reward, e.g. when an
//! occluder makes the previously best gaze worthless.
//!
//! All updates return new states; nothing is mutated in place.

use rand::Rng;

use crate::error::{Error, Result};

/// The discrete gaze offsets available to the bandit policies, in
/// template coordinates relative to the target centre.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteActionSet {
    offsets: Vec<[f64; 2]>,
}

impl DiscreteActionSet {
    /// `side x side` grid of fixations centred on the target, row-major
    /// with spacing `spacing`. The canonical set is `grid(3, 8.0)`:
    /// nine gazes at `{-8, 0, 8}^2` with the centre gaze at index 4.
    pub fn grid(side: usize, spacing: f64) -> Self {
        assert!(side >= 1 && spacing >= 0.0);
        let half = (side as f64 - 1.0) / 2.0;
        let mut offsets = Vec::with_capacity(side * side);
        for row in 0..side {
            for col in 0..side {
                offsets.push([(col as f64 - half) * spacing, (row as f64 - half) * spacing]);
            }
        }
        DiscreteActionSet { offsets }
    }

    pub fn from_offsets(offsets: Vec<[f64; 2]>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::ConfigInvalid("action set must be non-empty".into()));
        }
        Ok(DiscreteActionSet { offsets })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[[f64; 2]] {
        &self.offsets
    }

    pub fn offset(&self, k: usize) -> [f64; 2] {
        self.offsets[k]
    }

    /// Largest fixation eccentricity in the set.
    pub fn max_radius(&self) -> f64 {
        self.offsets
            .iter()
            .map(|a| (a[0] * a[0] + a[1] * a[1]).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Default Hedge learning rate `sqrt(8 ln K / T)` for horizon `T`.
pub fn hedge_gamma(actions: usize, horizon: usize) -> f64 {
    (8.0 * (actions as f64).ln() / horizon as f64).sqrt()
}

/// Default EXP3 exploration rate `min(1, sqrt(K ln K / ((e-1) T)))`.
pub fn exp3_gamma(actions: usize, horizon: usize) -> f64 {
    let k = actions as f64;
    (k * k.ln() / ((std::f64::consts::E - 1.0) * horizon as f64)).sqrt().min(1.0)
}

/// Full-information Gibbs policy over cumulative rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeState {
    /// Cumulative reward per action.
    pub cumulative: Vec<f64>,
    /// Learning rate scaling the Gibbs exponent.
    pub gamma: f64,
}

impl HedgeState {
    pub fn new(actions: usize, gamma: f64) -> Self {
        assert!(actions > 0 && gamma > 0.0 && gamma.is_finite());
        HedgeState { cumulative: vec![0.0; actions], gamma }
    }

    pub fn actions(&self) -> usize {
        self.cumulative.len()
    }
}

/// Action distribution `p(k) proportional to exp(gamma * G(k))`,
/// computed with the max subtracted for stability. Zero cumulative
/// reward gives the uniform distribution.
pub fn hedge_policy(state: &HedgeState) -> Vec<f64> {
    let max = state
        .cumulative
        .iter()
        .fold(f64::NEG_INFINITY, |m, &g| m.max(state.gamma * g));
    let unnormalized: Vec<f64> =
        state.cumulative.iter().map(|&g| (state.gamma * g - max).exp()).collect();
    let sum: f64 = unnormalized.iter().sum();
    unnormalized.into_iter().map(|w| w / sum).collect()
}

/// Accumulate a full reward vector.
pub fn hedge_update(state: &HedgeState, rewards: &[f64]) -> Result<HedgeState> {
    if rewards.len() != state.actions() {
        return Err(Error::LengthMismatch { left: state.actions(), right: rewards.len() });
    }
    let cumulative =
        state.cumulative.iter().zip(rewards).map(|(g, r)| g + r).collect();
    Ok(HedgeState { cumulative, gamma: state.gamma })
}

/// Which sampling probability divides the observed reward in the EXP3
/// importance-weighted update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exp3DivideBy {
    /// The mixed distribution the action was actually drawn from. This
    /// is the unbiased estimator and the default.
    Sampled,
    /// The inner Gibbs distribution before uniform mixing.
    Inner,
}

/// Bandit-feedback policy: Hedge inside, mixed with a uniform
/// exploration floor.
#[derive(Debug, Clone, PartialEq)]
pub struct Exp3State {
    pub inner: HedgeState,
    /// Exploration rate in `(0, 1]`; also the inner learning rate.
    pub gamma: f64,
}

impl Exp3State {
    pub fn new(actions: usize, gamma: f64) -> Self {
        assert!((0.0..=1.0).contains(&gamma) && gamma > 0.0);
        Exp3State { inner: HedgeState::new(actions, gamma), gamma }
    }

    pub fn actions(&self) -> usize {
        self.inner.actions()
    }
}

/// Sampling distribution `(1-gamma) p + gamma/K` over the inner Gibbs
/// distribution `p`.
pub fn exp3_policy(state: &Exp3State) -> Vec<f64> {
    let k = state.actions() as f64;
    hedge_policy(&state.inner)
        .into_iter()
        .map(|p| (1.0 - state.gamma) * p + state.gamma / k)
        .collect()
}

/// Importance-weighted update: the observed reward is divided by the
/// chosen action's probability and credited to that action alone, which
/// makes the estimated reward vector unbiased for the full one.
pub fn exp3_update(
    state: &Exp3State,
    chosen: usize,
    reward: f64,
    divide_by: Exp3DivideBy,
) -> Result<Exp3State> {
    if chosen >= state.actions() {
        return Err(Error::DimensionMismatch { expected: state.actions(), got: chosen });
    }
    let denom = match divide_by {
        Exp3DivideBy::Sampled => exp3_policy(state)[chosen],
        Exp3DivideBy::Inner => hedge_policy(&state.inner)[chosen],
    };
    let mut estimated = vec![0.0; state.actions()];
    estimated[chosen] = reward / denom;
    Ok(Exp3State { inner: hedge_update(&state.inner, &estimated)?, gamma: state.gamma })
}

/// Round-robin baseline: fixation index for step `t`.
pub fn circular_index(step: usize, actions: usize) -> usize {
    step % actions
}

/// Uniform-random baseline.
pub fn uniform_index<R: Rng>(actions: usize, rng: &mut R) -> usize {
    rng.random_range(0..actions)
}

/// Draw an index from a normalized distribution.
pub fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u = rng.random::<f64>();
    let mut cumulative = 0.0;
    for (k, p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return k;
        }
    }
    probs.len() - 1
}
