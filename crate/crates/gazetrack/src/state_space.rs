//! Target state, linear-Gaussian dynamics, and the weighted-particle
//! belief representation.
//!
//! A target is described by image position, velocity, log scale, and
//! orientation. The transition model is linear with independent Gaussian
//! noise per dimension: position picks up `velocity_coupling * velocity`
//! (1 gives constant-velocity dynamics, 0 a random walk), velocity decays
//! by a fixed factor, and log scale / orientation follow random walks.
//! Propagating particles through this model and reweighting them by an
//! observation likelihood is the sequential Monte Carlo core that the
//! tracker builds on.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Lower clamp for log scale: scale never drops below 1/4.
pub const LOG_SCALE_MIN: f64 = -1.3862943611198906;
/// Upper clamp for log scale: scale never exceeds 4.
pub const LOG_SCALE_MAX: f64 = 1.3862943611198906;

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = a.rem_euclid(two_pi);
    if x > std::f64::consts::PI {
        x -= two_pi;
    }
    x
}

/// One tracking hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    /// Natural log of target scale, clamped to `[ln 1/4, ln 4]`.
    pub log_scale: f64,
    /// Radians, wrapped to `(-pi, pi]`.
    pub orientation: f64,
}

impl State {
    /// Stationary, unit-scale, axis-aligned state at `position`.
    pub fn at(position: [f64; 2]) -> Self {
        State { position, velocity: [0.0, 0.0], log_scale: 0.0, orientation: 0.0 }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    /// Re-impose the log-scale clamp and the orientation wrap.
    pub fn canonicalized(mut self) -> Self {
        self.log_scale = self.log_scale.clamp(LOG_SCALE_MIN, LOG_SCALE_MAX);
        self.orientation = wrap_angle(self.orientation);
        self
    }
}

/// Linear dynamics with independent Gaussian noise per dimension.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransitionModel {
    /// 1 couples position to velocity (constant-velocity block), 0
    /// decouples it (pure random walk in position).
    pub velocity_coupling: f64,
    /// Multiplier applied to velocity each step.
    pub velocity_decay: f64,
    pub position_noise_std: f64,
    pub velocity_noise_std: f64,
    pub log_scale_noise_std: f64,
    pub orientation_noise_std: f64,
}

impl Default for TransitionModel {
    fn default() -> Self {
        TransitionModel {
            velocity_coupling: 1.0,
            velocity_decay: 1.0,
            position_noise_std: 1.0,
            velocity_noise_std: 0.3,
            log_scale_noise_std: 0.0,
            orientation_noise_std: 0.0,
        }
    }
}

impl TransitionModel {
    /// Identity dynamics: the state only moves by its noise.
    pub fn random_walk(position_noise_std: f64) -> Self {
        TransitionModel {
            velocity_coupling: 0.0,
            velocity_decay: 1.0,
            position_noise_std,
            velocity_noise_std: 0.0,
            log_scale_noise_std: 0.0,
            orientation_noise_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.velocity_coupling.is_finite() && self.velocity_decay.is_finite();
        let stds = [
            self.position_noise_std,
            self.velocity_noise_std,
            self.log_scale_noise_std,
            self.orientation_noise_std,
        ];
        if !finite || stds.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::ConfigInvalid(
                "transition coefficients must be finite and noise stds nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Draw one successor state. Two position and two velocity noise
    /// variates are always consumed (even at zero std) so that stream
    /// alignment does not depend on the noise configuration.
    pub fn sample<R: Rng>(&self, state: &State, rng: &mut R) -> State {
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        let mut draw = |std: f64| std * std_normal.sample(rng);
        let noise_px = draw(self.position_noise_std);
        let noise_py = draw(self.position_noise_std);
        let noise_vx = draw(self.velocity_noise_std);
        let noise_vy = draw(self.velocity_noise_std);
        let noise_ls = draw(self.log_scale_noise_std);
        let noise_or = draw(self.orientation_noise_std);
        State {
            position: [
                state.position[0] + self.velocity_coupling * state.velocity[0] + noise_px,
                state.position[1] + self.velocity_coupling * state.velocity[1] + noise_py,
            ],
            velocity: [
                self.velocity_decay * state.velocity[0] + noise_vx,
                self.velocity_decay * state.velocity[1] + noise_vy,
            ],
            log_scale: state.log_scale + noise_ls,
            orientation: state.orientation + noise_or,
        }
        .canonicalized()
    }
}

/// Particles with normalized importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    particles: Vec<State>,
    weights: Vec<f64>,
}

impl BeliefState {
    /// Wrap raw weights, normalizing them to sum to one.
    pub fn new(particles: Vec<State>, raw_weights: Vec<f64>) -> Result<Self> {
        if particles.len() != raw_weights.len() {
            return Err(Error::LengthMismatch {
                left: particles.len(),
                right: raw_weights.len(),
            });
        }
        let weights = normalize_weights(&raw_weights)?;
        Ok(BeliefState { particles, weights })
    }

    /// Equal weights over the given particles.
    pub fn uniform(particles: Vec<State>) -> Self {
        let n = particles.len();
        assert!(n > 0, "belief needs at least one particle");
        BeliefState { particles, weights: vec![1.0 / n as f64; n] }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[State] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> State {
        weighted_mean(&self.particles, &self.weights)
    }
}

/// Normalize nonnegative weights to sum to one.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::AllZeroWeights);
    }
    Ok(raw.iter().map(|w| w / sum).collect())
}

/// Sum of squared normalized weights: the reciprocal of the effective
/// sample size. High concentration means few particles carry the mass,
/// i.e. the observation sharply discriminated among hypotheses; this is
/// the per-step reward the gaze policies maximize.
pub fn weight_concentration(weights: &[f64]) -> f64 {
    weights.iter().map(|w| w * w).sum()
}

/// Weighted mean state. Position, velocity, and log scale average
/// linearly; orientation uses the circular mean so the result respects
/// the angle wrap.
pub fn weighted_mean(particles: &[State], weights: &[f64]) -> State {
    let mut position = [0.0, 0.0];
    let mut velocity = [0.0, 0.0];
    let mut log_scale = 0.0;
    let mut sin_sum = 0.0;
    let mut cos_sum = 0.0;
    for (p, &w) in particles.iter().zip(weights) {
        position[0] += w * p.position[0];
        position[1] += w * p.position[1];
        velocity[0] += w * p.velocity[0];
        velocity[1] += w * p.velocity[1];
        log_scale += w * p.log_scale;
        sin_sum += w * p.orientation.sin();
        cos_sum += w * p.orientation.cos();
    }
    State {
        position,
        velocity,
        log_scale,
        orientation: if sin_sum == 0.0 && cos_sum == 0.0 {
            0.0
        } else {
            sin_sum.atan2(cos_sum)
        },
    }
    .canonicalized()
}

/// Systematic resampling with a single uniform draw: thresholds
/// `u + j/N` against the cumulative weights, so particle `i` is copied
/// `floor(N w_i)` or `ceil(N w_i)` times and the expected count is
/// exactly `N w_i`. Returns an equally weighted belief.
pub fn systematic_resample<R: Rng>(belief: &BeliefState, rng: &mut R) -> BeliefState {
    let n = belief.len();
    let u = rng.random::<f64>() / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cumulative = belief.weights[0];
    let mut i = 0usize;
    for j in 0..n {
        let threshold = u + j as f64 / n as f64;
        while cumulative < threshold && i + 1 < n {
            i += 1;
            cumulative += belief.weights[i];
        }
        out.push(belief.particles[i]);
    }
    BeliefState::uniform(out)
}
