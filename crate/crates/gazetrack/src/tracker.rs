//! The tracking loop: a particle filter whose observation each frame is
//! one glimpse at a gaze offset chosen by an attention policy.
//!
//! Per frame the belief is propagated through the transition model,
//! the policy picks a gaze, every particle is scored by the glimpse
//! likelihood at that gaze, and the normalized weights yield the state
//! estimate (before resampling), the reward `sum w^2`, and the next
//! belief (after systematic resampling). The reward feeds back into the
//! policy: informative gazes concentrate weight on few particles,
//! uninformative ones leave the weights flat.
//!
//! Two information regimes exist. In full information the weighing is
//! repeated against every discrete gaze on the one shared propagation,
//! producing a complete reward vector for Hedge, while the belief still
//! advances only on the sampled gaze's weights. In partial information
//! only the chosen gaze is ever evaluated, which is all EXP3 and the
//! Bayesian-optimization policy need. Hedge forces the former, EXP3 and
//! Bayesian optimization the latter; the round-robin and uniform-random
//! baselines run in whichever regime the config asks for.

use rand::Rng;

use crate::appearance::foveate::FoveaGeometry;
use crate::appearance::rbm::Rbm;
use crate::appearance::template::{glimpse, observation_likelihood, Template};
use crate::bayesopt::{ucb_acquire, ActionDomain, GpModel, HyperPriors};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::identity::{
    accumulate, classify, ClassPosterior, LogisticReadout, MultiFixationRbm, WindowSample,
};
use crate::policies::{
    circular_index, exp3_policy, exp3_update, hedge_policy, hedge_update, sample_index,
    uniform_index, DiscreteActionSet, Exp3DivideBy, Exp3State, HedgeState,
};
use crate::rng::{stream_rng, StreamRng};
use crate::state_space::{
    normalize_weights, systematic_resample, weight_concentration, weighted_mean, BeliefState,
    State, TransitionModel,
};

/// A fixation choice: an index into the discrete action set or a free
/// 2-D offset in template coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GazeAction {
    Discrete(usize),
    Continuous([f64; 2]),
}

/// Which rewards are computed per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Reward every discrete gaze each step (one shared propagation).
    FullInformation,
    /// Reward only the gaze actually fixated.
    PartialInformation,
}

/// The Bayesian-optimization policy: GP reward model plus UCB schedule.
#[derive(Debug, Clone)]
pub struct BayesOptPolicy {
    pub model: GpModel,
    pub priors: HyperPriors,
    pub domain: ActionDomain,
    /// Observations required before hyperparameter fitting starts.
    pub warmup: usize,
    /// Refit cadence in observations once past warmup.
    pub refit_every: usize,
    pub direct_budget: usize,
    pub delta: f64,
}

impl BayesOptPolicy {
    pub fn new(model: GpModel, domain: ActionDomain) -> Self {
        BayesOptPolicy {
            priors: HyperPriors::for_domain(&domain),
            model,
            domain,
            warmup: crate::bayesopt::DEFAULT_WARMUP,
            refit_every: 5,
            direct_budget: crate::bayesopt::DEFAULT_DIRECT_BUDGET,
            delta: crate::bayesopt::DEFAULT_UCB_DELTA,
        }
    }
}

/// Attention policy state carried across a sequence.
#[derive(Debug, Clone)]
pub enum GazePolicy {
    /// Uniform-random fixation baseline.
    Random,
    /// Round-robin fixation baseline.
    Circular,
    Hedge(HedgeState),
    Exp3 { state: Exp3State, divide_by: Exp3DivideBy },
    BayesOpt(Box<BayesOptPolicy>),
}

impl GazePolicy {
    /// The information regime the policy requires, if it cares.
    pub fn required_mode(&self) -> Option<Mode> {
        match self {
            GazePolicy::Hedge(_) => Some(Mode::FullInformation),
            GazePolicy::Exp3 { .. } | GazePolicy::BayesOpt(_) => {
                Some(Mode::PartialInformation)
            }
            GazePolicy::Random | GazePolicy::Circular => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GazePolicy::Random => "random",
            GazePolicy::Circular => "circular",
            GazePolicy::Hedge(_) => "hedge",
            GazePolicy::Exp3 { .. } => "exp3",
            GazePolicy::BayesOpt(_) => "bayesopt",
        }
    }
}

/// Where the classifier's gaze label comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierGazeSource {
    /// Reuse the tracking policy's fixation (continuous gazes snap to
    /// the nearest discrete offset).
    Policy,
    /// Draw an independent uniform gaze each frame.
    Random,
}

/// Identity models evaluated on the tracked estimate.
#[derive(Debug, Clone)]
pub struct ClassifierBundle {
    pub model: MultiFixationRbm,
    pub readout: LogisticReadout,
    pub gaze_source: ClassifierGazeSource,
}

/// Particle filter parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    pub particles: usize,
    pub transition: TransitionModel,
    /// Likelihood bandwidth on the glimpse distance.
    pub bandwidth: f64,
    /// Regime for policies that accept either; Hedge, EXP3, and
    /// Bayesian optimization override it.
    pub mode: Mode,
    pub init_position_std: f64,
    pub init_velocity_std: f64,
    pub init_log_scale_std: f64,
    pub init_orientation_std: f64,
    /// Keep the pre-resampling weights in each estimate.
    pub record_weights: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            particles: 100,
            transition: TransitionModel::default(),
            bandwidth: 0.05,
            mode: Mode::PartialInformation,
            init_position_std: 1.0,
            init_velocity_std: 0.5,
            init_log_scale_std: 0.0,
            init_orientation_std: 0.0,
            record_weights: false,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.transition.validate()?;
        let stds = [
            self.init_position_std,
            self.init_velocity_std,
            self.init_log_scale_std,
            self.init_orientation_std,
        ];
        if self.particles == 0
            || !(self.bandwidth > 0.0)
            || stds.iter().any(|s| !s.is_finite() || *s < 0.0)
        {
            return Err(Error::ConfigInvalid(
                "tracker needs particles > 0, bandwidth > 0, nonnegative init stds".into(),
            ));
        }
        Ok(())
    }
}

/// Per-frame output of the tracking loop.
#[derive(Debug, Clone)]
pub struct TrackEstimate {
    /// Weighted-mean state before resampling.
    pub state: State,
    /// Weight concentration `sum w^2` of this step.
    pub reward: f64,
    /// Running sum of rewards including this step.
    pub cumulative_reward: f64,
    /// Fixation taken this step; `None` on the initialization frame.
    pub action: Option<GazeAction>,
    /// Selection distribution over discrete gazes, when one existed.
    pub action_probs: Option<Vec<f64>>,
    /// Reward of every discrete gaze (full information only).
    pub rewards_all: Option<Vec<f64>>,
    /// Accumulated identity posterior up to this frame.
    pub posterior: Option<ClassPosterior>,
    /// The belief was reset to uniform because every weight vanished.
    pub flagged: bool,
    /// Pre-resampling weights when `record_weights` is set.
    pub weights: Option<Vec<f64>>,
}

/// Outcome of advancing a belief by one observation.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub belief: BeliefState,
    pub estimate: State,
    pub reward: f64,
    pub weights: Vec<f64>,
    pub flagged: bool,
}

/// Weight the propagated particles, estimate, and resample. A vanished
/// weight vector resets to uniform and flags the step instead of
/// failing the run.
fn finish_step<R: Rng>(
    propagated: Vec<State>,
    likelihoods: &[f64],
    rng: &mut R,
) -> StepOutcome {
    let n = propagated.len();
    let (weights, flagged) = match normalize_weights(likelihoods) {
        Ok(w) => (w, false),
        Err(_) => (vec![1.0 / n as f64; n], true),
    };
    let estimate = weighted_mean(&propagated, &weights);
    let reward = weight_concentration(&weights);
    let weighted = BeliefState::new(propagated, weights.clone())
        .expect("normalized weights always form a belief");
    let belief = systematic_resample(&weighted, rng);
    StepOutcome { belief, estimate, reward, weights, flagged }
}

/// One generic sequential Monte Carlo step: propagate through the
/// transition model, weight by the supplied likelihood, estimate before
/// resampling, resample systematically. The tracking loop and the
/// linear-Gaussian cross-checks share this path.
pub fn advance_belief<R: Rng, L: Fn(&State) -> f64>(
    belief: &BeliefState,
    transition: &TransitionModel,
    likelihood: L,
    rng: &mut R,
) -> StepOutcome {
    let propagated: Vec<State> =
        belief.particles().iter().map(|p| transition.sample(p, rng)).collect();
    let likelihoods: Vec<f64> = propagated.iter().map(&likelihood).collect();
    finish_step(propagated, &likelihoods, rng)
}

/// The assembled tracking system: filter parameters, gaze geometry, and
/// the appearance model, plus the optional identity classifier.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub config: TrackerConfig,
    pub actions: DiscreteActionSet,
    pub geometry: FoveaGeometry,
    pub rbm: Rbm,
    pub classifier: Option<ClassifierBundle>,
}

impl Tracker {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.geometry.validate()?;
        if self.rbm.n_visible != self.geometry.len() {
            return Err(Error::DimensionMismatch {
                expected: self.geometry.len(),
                got: self.rbm.n_visible,
            });
        }
        if let Some(c) = &self.classifier {
            if c.model.n_input != self.rbm.n_hidden {
                return Err(Error::DimensionMismatch {
                    expected: self.rbm.n_hidden,
                    got: c.model.n_input,
                });
            }
            if c.model.gaze_positions != self.actions.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.actions.len(),
                    got: c.model.gaze_positions,
                });
            }
            if c.readout.inputs != c.model.n_hidden {
                return Err(Error::DimensionMismatch {
                    expected: c.model.n_hidden,
                    got: c.readout.inputs,
                });
            }
        }
        Ok(())
    }

    fn effective_mode(&self, policy: &GazePolicy) -> Mode {
        policy.required_mode().unwrap_or(self.config.mode)
    }

    /// One tracking step against an arbitrary observation model: the
    /// closure returns per-particle likelihoods for a set of particles
    /// under a gaze. Production tracking passes the glimpse likelihood;
    /// tests may pass anything, e.g. counting or analytic models.
    #[allow(clippy::too_many_arguments)]
    pub fn pf_step_with<F, R1, R2>(
        &self,
        belief: &BeliefState,
        policy: &mut GazePolicy,
        step: usize,
        mut observe: F,
        particles_rng: &mut R1,
        policy_rng: &mut R2,
    ) -> Result<(BeliefState, TrackEstimate)>
    where
        F: FnMut(&[State], &GazeAction) -> Result<Vec<f64>>,
        R1: Rng,
        R2: Rng,
    {
        let k = self.actions.len();
        let n = belief.len();
        let propagated: Vec<State> = belief
            .particles()
            .iter()
            .map(|p| self.config.transition.sample(p, particles_rng))
            .collect();

        // Select the fixation before any weighing; the selection
        // distribution is recorded for discrete policies.
        let (action, action_probs) = match &*policy {
            GazePolicy::Random => {
                (GazeAction::Discrete(uniform_index(k, policy_rng)), Some(vec![1.0 / k as f64; k]))
            }
            GazePolicy::Circular => (GazeAction::Discrete(circular_index(step, k)), None),
            GazePolicy::Hedge(state) => {
                let probs = hedge_policy(state);
                (GazeAction::Discrete(sample_index(&probs, policy_rng)), Some(probs))
            }
            GazePolicy::Exp3 { state, .. } => {
                let probs = exp3_policy(state);
                (GazeAction::Discrete(sample_index(&probs, policy_rng)), Some(probs))
            }
            GazePolicy::BayesOpt(b) => {
                let t = b.model.len() + 1;
                (
                    GazeAction::Continuous(ucb_acquire(
                        &b.model,
                        &b.domain,
                        t,
                        b.delta,
                        b.direct_budget,
                    )),
                    None,
                )
            }
        };

        let mode = self.effective_mode(policy);
        let chosen_likelihoods;
        let mut rewards_all = None;
        match mode {
            Mode::FullInformation => {
                let chosen_index = match action {
                    GazeAction::Discrete(i) => i,
                    GazeAction::Continuous(_) => {
                        return Err(Error::ConfigInvalid(
                            "full information needs a discrete action set".into(),
                        ))
                    }
                };
                // Weigh every gaze on the one shared propagation; the
                // belief advances only on the sampled gaze below.
                let mut rewards = Vec::with_capacity(k);
                let mut chosen = Vec::new();
                for a in 0..k {
                    let liks = observe(&propagated, &GazeAction::Discrete(a))?;
                    if liks.len() != n {
                        return Err(Error::LengthMismatch { left: n, right: liks.len() });
                    }
                    let reward = match normalize_weights(&liks) {
                        Ok(w) => weight_concentration(&w),
                        // A gaze whose weights all vanish is maximally
                        // uninformative: credit the flat-weight reward.
                        Err(_) => 1.0 / n as f64,
                    };
                    rewards.push(reward);
                    if a == chosen_index {
                        chosen = liks;
                    }
                }
                rewards_all = Some(rewards);
                chosen_likelihoods = chosen;
            }
            Mode::PartialInformation => {
                let liks = observe(&propagated, &action)?;
                if liks.len() != n {
                    return Err(Error::LengthMismatch { left: n, right: liks.len() });
                }
                chosen_likelihoods = liks;
            }
        }

        let outcome = finish_step(propagated, &chosen_likelihoods, particles_rng);

        // Policy update, skipped when the step was flagged.
        if !outcome.flagged {
            match policy {
                GazePolicy::Random | GazePolicy::Circular => {}
                GazePolicy::Hedge(state) => {
                    let rewards = rewards_all.as_ref().expect("full information rewards");
                    *state = hedge_update(state, rewards)?;
                }
                GazePolicy::Exp3 { state, divide_by } => {
                    let chosen_index = match action {
                        GazeAction::Discrete(i) => i,
                        GazeAction::Continuous(_) => unreachable!("EXP3 actions are discrete"),
                    };
                    *state = exp3_update(state, chosen_index, outcome.reward, *divide_by)?;
                }
                GazePolicy::BayesOpt(b) => {
                    let point = match action {
                        GazeAction::Continuous(p) => p,
                        GazeAction::Discrete(_) => unreachable!("UCB actions are continuous"),
                    };
                    b.model.observe(point, outcome.reward)?;
                    let since_warmup = b.model.len().saturating_sub(b.warmup);
                    if b.model.len() >= b.warmup && since_warmup % b.refit_every == 0 {
                        b.model.refit(&b.priors, b.warmup);
                    }
                }
            }
        }

        let estimate = TrackEstimate {
            state: outcome.estimate,
            reward: outcome.reward,
            cumulative_reward: outcome.reward, // caller accumulates
            action: Some(action),
            action_probs,
            rewards_all,
            posterior: None,
            flagged: outcome.flagged,
            weights: self.config.record_weights.then_some(outcome.weights),
        };
        Ok((outcome.belief, estimate))
    }

    /// One tracking step on a real frame with the glimpse likelihood.
    pub fn pf_step<R1: Rng, R2: Rng>(
        &self,
        belief: &BeliefState,
        frame: &Frame,
        template: &Template,
        policy: &mut GazePolicy,
        step: usize,
        particles_rng: &mut R1,
        policy_rng: &mut R2,
    ) -> Result<(BeliefState, TrackEstimate)> {
        self.pf_step_with(
            belief,
            policy,
            step,
            |particles, action| self.glimpse_likelihoods(frame, template, particles, action),
            particles_rng,
            policy_rng,
        )
    }

    fn glimpse_likelihoods(
        &self,
        frame: &Frame,
        template: &Template,
        particles: &[State],
        action: &GazeAction,
    ) -> Result<Vec<f64>> {
        let (offset, reference) = match action {
            GazeAction::Discrete(i) => {
                (self.actions.offset(*i), template.reference_discrete(*i).clone())
            }
            GazeAction::Continuous(a) => (*a, template.reference_continuous(*a)?),
        };
        particles
            .iter()
            .map(|p| {
                let patch = glimpse(frame, p, offset, &self.geometry);
                let features = self.rbm.features(&patch)?;
                observation_likelihood(&features, &reference, self.config.bandwidth)
            })
            .collect()
    }

    /// Draw the initial belief around the first-frame ground truth.
    pub fn init_belief<R: Rng>(&self, truth: &State, rng: &mut R) -> BeliefState {
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(0.0, 1.0).unwrap();
        let c = &self.config;
        let particles = (0..c.particles)
            .map(|_| {
                let mut draw = |std: f64| std * normal.sample(rng);
                State {
                    position: [
                        truth.position[0] + draw(c.init_position_std),
                        truth.position[1] + draw(c.init_position_std),
                    ],
                    velocity: [
                        truth.velocity[0] + draw(c.init_velocity_std),
                        truth.velocity[1] + draw(c.init_velocity_std),
                    ],
                    log_scale: truth.log_scale + draw(c.init_log_scale_std),
                    orientation: truth.orientation + draw(c.init_orientation_std),
                }
                .canonicalized()
            })
            .collect();
        BeliefState::uniform(particles)
    }

    /// Track a whole sequence. The first frame initializes the belief
    /// around `init_truth` and captures the template; every later frame
    /// runs one [`Tracker::pf_step`]. Named substreams of `master_seed`
    /// keep particle, policy, and classifier randomness independent.
    /// Returns one estimate per frame, the first being the
    /// initialization itself.
    pub fn run_sequence(
        &self,
        frames: &[Frame],
        init_truth: &State,
        policy: &mut GazePolicy,
        master_seed: u64,
    ) -> Result<Vec<TrackEstimate>> {
        self.validate()?;
        if frames.is_empty() {
            return Err(Error::SpecOutOfBounds("sequence has no frames".into()));
        }
        let mut particles_rng = stream_rng(master_seed, "particles");
        let mut policy_rng = stream_rng(master_seed, "policy");
        let mut classifier_rng = stream_rng(master_seed, "classifier");

        let template = Template::build(
            &frames[0],
            init_truth,
            self.actions.offsets(),
            &self.geometry,
            &self.rbm,
        )?;
        let mut belief = self.init_belief(init_truth, &mut particles_rng);
        // Uniform-weight concentration, i.e. 1/N up to rounding; computed
        // from the weights themselves so the logged reward always equals
        // the concentration recomputed from the weight trace.
        let init_reward = weight_concentration(belief.weights());
        let mut estimates = Vec::with_capacity(frames.len());
        estimates.push(TrackEstimate {
            state: *init_truth,
            reward: init_reward,
            cumulative_reward: init_reward,
            action: None,
            action_probs: None,
            rewards_all: None,
            posterior: None,
            flagged: false,
            weights: self
                .config
                .record_weights
                .then(|| belief.weights().to_vec()),
        });

        let mut cumulative = estimates[0].cumulative_reward;
        let mut window: Vec<(Vec<f64>, usize)> = Vec::new();
        let mut log_evidence: Option<Vec<f64>> = None;

        for (t, frame) in frames.iter().enumerate().skip(1) {
            let (next_belief, mut estimate) = self.pf_step(
                &belief,
                frame,
                &template,
                policy,
                t - 1,
                &mut particles_rng,
                &mut policy_rng,
            )?;
            belief = next_belief;
            cumulative += estimate.reward;
            estimate.cumulative_reward = cumulative;

            if let Some(classifier) = &self.classifier {
                estimate.posterior = self.classify_step(
                    classifier,
                    frame,
                    &estimate,
                    &mut window,
                    &mut log_evidence,
                    &mut classifier_rng,
                )?;
            }
            estimates.push(estimate);
        }
        Ok(estimates)
    }

    /// Take the classification glimpse at the current estimate, slide
    /// the window, and fold the window posterior into the running
    /// accumulated posterior.
    fn classify_step(
        &self,
        classifier: &ClassifierBundle,
        frame: &Frame,
        estimate: &TrackEstimate,
        window: &mut Vec<(Vec<f64>, usize)>,
        log_evidence: &mut Option<Vec<f64>>,
        classifier_rng: &mut StreamRng,
    ) -> Result<Option<ClassPosterior>> {
        let gaze_index = match (classifier.gaze_source, estimate.action) {
            (ClassifierGazeSource::Random, _) | (_, None) => {
                uniform_index(self.actions.len(), classifier_rng)
            }
            (ClassifierGazeSource::Policy, Some(GazeAction::Discrete(i))) => i,
            (ClassifierGazeSource::Policy, Some(GazeAction::Continuous(a))) => {
                self.nearest_action(a)
            }
        };
        let offset = self.actions.offset(gaze_index);
        let patch = glimpse(frame, &estimate.state, offset, &self.geometry);
        let features = self.rbm.features(&patch)?;
        window.push((features.activations, gaze_index));
        let delta = classifier.model.window;
        if window.len() > delta {
            window.remove(0);
        }
        if window.len() < delta {
            return Ok(None);
        }
        let sample = WindowSample {
            features: window.iter().map(|(h, _)| h.clone()).collect(),
            gazes: window.iter().map(|(_, z)| *z).collect(),
        };
        let aggregate = classifier.model.hidden_probs(&sample)?;
        let step_posterior = classify(&aggregate, &classifier.readout)?;
        let sums = log_evidence.get_or_insert_with(|| vec![0.0; step_posterior.log_probs.len()]);
        for (s, l) in sums.iter_mut().zip(&step_posterior.log_probs) {
            *s += l;
        }
        Ok(Some(accumulate(&[ClassPosterior { log_probs: sums.clone() }])))
    }

    fn nearest_action(&self, point: [f64; 2]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, o) in self.actions.offsets().iter().enumerate() {
            let d = (o[0] - point[0]).powi(2) + (o[1] - point[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::glyphs::GlyphStore;
    use crate::simulator::{generate_sequence, SequenceSpec};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_tracker(particles: usize) -> Tracker {
        let geometry = FoveaGeometry { rings: 2, fovea: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let rbm = Rbm::init_random(geometry.len(), 12, 0.4, &mut rng);
        Tracker {
            config: TrackerConfig {
                particles,
                transition: TransitionModel {
                    velocity_coupling: 1.0,
                    velocity_decay: 1.0,
                    position_noise_std: 1.0,
                    velocity_noise_std: 0.3,
                    log_scale_noise_std: 0.0,
                    orientation_noise_std: 0.0,
                },
                ..TrackerConfig::default()
            },
            actions: DiscreteActionSet::grid(3, 8.0),
            geometry,
            rbm,
            classifier: None,
        }
    }

    fn moving_sequence(frames: usize) -> (Vec<Frame>, crate::simulator::GroundTruth) {
        let store = GlyphStore::builtin();
        let spec = SequenceSpec::new(96, 96, frames, 8, [40.0, 48.0], [1.5, 0.0]);
        generate_sequence(&spec, &store, &mut ChaCha8Rng::seed_from_u64(4)).unwrap()
    }

    #[test]
    fn single_frame_returns_the_initialization() {
        let tracker = test_tracker(50);
        let (frames, truth) = moving_sequence(1);
        let mut policy = GazePolicy::Random;
        let estimates = tracker
            .run_sequence(&frames, &truth.states[0], &mut policy, 7)
            .unwrap();
        assert_eq!(estimates.len(), 1);
        assert_eq!(estimates[0].state, truth.states[0]);
        assert_relative_eq!(estimates[0].reward, 1.0 / 50.0, max_relative = 1e-12);
        assert!(estimates[0].action.is_none());
    }

    #[test]
    fn tracks_a_clean_moving_target() {
        let tracker = test_tracker(80);
        let (frames, truth) = moving_sequence(25);
        let mut policy =
            GazePolicy::Hedge(HedgeState::new(9, crate::policies::hedge_gamma(9, 25)));
        let estimates = tracker
            .run_sequence(&frames, &truth.states[0], &mut policy, 11)
            .unwrap();
        let last = estimates.last().unwrap();
        let t = truth.states.last().unwrap();
        let err = ((last.state.position[0] - t.position[0]).powi(2)
            + (last.state.position[1] - t.position[1]).powi(2))
        .sqrt();
        assert!(err < 4.0, "final error {err}");
    }

    #[test]
    fn cumulative_reward_is_the_running_sum() {
        let tracker = test_tracker(40);
        let (frames, truth) = moving_sequence(12);
        let mut policy = GazePolicy::Random;
        let estimates = tracker
            .run_sequence(&frames, &truth.states[0], &mut policy, 3)
            .unwrap();
        let mut sum = 0.0;
        for e in &estimates {
            sum += e.reward;
            assert_relative_eq!(e.cumulative_reward, sum, epsilon = 1e-12);
        }
    }

    #[test]
    fn recorded_weights_reproduce_the_reward() {
        let mut tracker = test_tracker(40);
        tracker.config.record_weights = true;
        let (frames, truth) = moving_sequence(10);
        let mut policy = GazePolicy::Random;
        let estimates = tracker
            .run_sequence(&frames, &truth.states[0], &mut policy, 3)
            .unwrap();
        for e in &estimates {
            let w = e.weights.as_ref().unwrap();
            assert_relative_eq!(e.reward, weight_concentration(w), epsilon = 1e-12);
        }
    }

    #[test]
    fn full_information_weighs_every_gaze_but_advances_on_one() {
        let mut tracker = test_tracker(30);
        // Noiseless propagation keeps particle i at position i exactly.
        tracker.config.transition.position_noise_std = 0.0;
        tracker.config.transition.velocity_noise_std = 0.0;
        let mut policy = GazePolicy::Hedge(HedgeState::new(9, 0.2));
        let belief = BeliefState::uniform(
            (0..30).map(|i| State::at([i as f64, 0.0])).collect(),
        );
        let mut particles_rng = ChaCha8Rng::seed_from_u64(1);
        let mut policy_rng = ChaCha8Rng::seed_from_u64(2);
        let mut calls: Vec<usize> = vec![0; 9];
        let (_, estimate) = tracker
            .pf_step_with(
                &belief,
                &mut policy,
                0,
                |particles, action| {
                    let k = match action {
                        GazeAction::Discrete(i) => *i,
                        _ => panic!("discrete expected"),
                    };
                    calls[k] += 1;
                    // Make each action's weights distinctive: action k
                    // concentrates all weight on particle k.
                    Ok((0..particles.len())
                        .map(|i| if i == k { 1.0 } else { 1e-9 })
                        .collect())
                },
                &mut particles_rng,
                &mut policy_rng,
            )
            .unwrap();
        assert_eq!(calls, vec![1; 9], "every gaze weighed exactly once");
        let rewards = estimate.rewards_all.as_ref().unwrap();
        assert_eq!(rewards.len(), 9);
        for r in rewards {
            assert!(*r > 0.99, "concentrated weights score near 1: {r}");
        }
        // The belief advanced on the chosen action's weights alone: its
        // estimate must sit near that action's favoured particle.
        let chosen = match estimate.action.unwrap() {
            GazeAction::Discrete(i) => i,
            _ => unreachable!(),
        };
        assert!((estimate.state.position[0] - chosen as f64).abs() < 1e-6);
    }

    #[test]
    fn partial_information_weighs_only_the_chosen_gaze() {
        let tracker = test_tracker(20);
        let mut policy = GazePolicy::Exp3 {
            state: Exp3State::new(9, 0.3),
            divide_by: Exp3DivideBy::Sampled,
        };
        let belief = BeliefState::uniform(vec![State::at([0.0, 0.0]); 20]);
        let mut particles_rng = ChaCha8Rng::seed_from_u64(1);
        let mut policy_rng = ChaCha8Rng::seed_from_u64(2);
        let mut total_calls = 0usize;
        tracker
            .pf_step_with(
                &belief,
                &mut policy,
                0,
                |particles, _| {
                    total_calls += 1;
                    Ok(vec![1.0; particles.len()])
                },
                &mut particles_rng,
                &mut policy_rng,
            )
            .unwrap();
        assert_eq!(total_calls, 1);
    }

    #[test]
    fn vanished_weights_reset_and_skip_the_policy_update() {
        let tracker = test_tracker(25);
        let before = HedgeState::new(9, 0.2);
        let mut policy = GazePolicy::Hedge(before.clone());
        let belief = BeliefState::uniform(vec![State::at([5.0, 5.0]); 25]);
        let mut particles_rng = ChaCha8Rng::seed_from_u64(1);
        let mut policy_rng = ChaCha8Rng::seed_from_u64(2);
        let (next, estimate) = tracker
            .pf_step_with(
                &belief,
                &mut policy,
                0,
                |particles, _| Ok(vec![0.0; particles.len()]),
                &mut particles_rng,
                &mut policy_rng,
            )
            .unwrap();
        assert!(estimate.flagged);
        assert_relative_eq!(estimate.reward, 1.0 / 25.0);
        let uniform = 1.0 / 25.0;
        assert!(next.weights().iter().all(|w| (w - uniform).abs() < 1e-12));
        match policy {
            GazePolicy::Hedge(after) => assert_eq!(after, before),
            _ => unreachable!(),
        }
    }

    #[test]
    fn sequences_are_deterministic_per_seed() {
        let tracker = test_tracker(40);
        let (frames, truth) = moving_sequence(10);
        let run = |seed: u64| {
            let mut policy =
                GazePolicy::Hedge(HedgeState::new(9, crate::policies::hedge_gamma(9, 10)));
            tracker
                .run_sequence(&frames, &truth.states[0], &mut policy, seed)
                .unwrap()
        };
        let a = run(21);
        let b = run(21);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.state, y.state);
            assert_eq!(x.reward.to_bits(), y.reward.to_bits());
        }
        let c = run(22);
        assert!(a
            .iter()
            .zip(&c)
            .any(|(x, y)| x.state.position != y.state.position));
    }

    #[test]
    fn bayesopt_policy_observes_and_refits() {
        use crate::bayesopt::{GpHyperparams, GpModel};
        let mut tracker = test_tracker(20);
        tracker.config.mode = Mode::PartialInformation;
        let model = GpModel::new(GpHyperparams {
            signal_variance: 1.0,
            noise_variance: 0.1,
            length_scales: [4.0, 4.0],
        })
        .unwrap();
        let mut bo = BayesOptPolicy::new(model, ActionDomain::centered(10.0));
        bo.warmup = 5;
        bo.direct_budget = 30;
        let mut policy = GazePolicy::BayesOpt(Box::new(bo));
        let belief = BeliefState::uniform(vec![State::at([0.0, 0.0]); 20]);
        let mut particles_rng = ChaCha8Rng::seed_from_u64(1);
        let mut policy_rng = ChaCha8Rng::seed_from_u64(2);
        let mut belief = belief;
        for step in 0..8 {
            let (next, estimate) = tracker
                .pf_step_with(
                    &belief,
                    &mut policy,
                    step,
                    |particles, action| {
                        let a = match action {
                            GazeAction::Continuous(a) => *a,
                            _ => panic!("continuous expected"),
                        };
                        // Reward peaks at gaze (3, -2).
                        let r = (-((a[0] - 3.0).powi(2) + (a[1] + 2.0).powi(2)) / 20.0).exp();
                        Ok(particles.iter().map(|_| 0.5 + 0.5 * r).collect())
                    },
                    &mut particles_rng,
                    &mut policy_rng,
                )
                .unwrap();
            belief = next;
            assert!(matches!(estimate.action, Some(GazeAction::Continuous(_))));
        }
        match policy {
            GazePolicy::BayesOpt(b) => assert_eq!(b.model.len(), 8),
            _ => unreachable!(),
        }
    }

    #[test]
    fn mode_is_dictated_by_learning_policies() {
        let tracker = test_tracker(10);
        assert_eq!(
            tracker.effective_mode(&GazePolicy::Hedge(HedgeState::new(9, 0.1))),
            Mode::FullInformation
        );
        assert_eq!(
            tracker.effective_mode(&GazePolicy::Exp3 {
                state: Exp3State::new(9, 0.3),
                divide_by: Exp3DivideBy::Sampled
            }),
            Mode::PartialInformation
        );
        // Baselines follow the config.
        assert_eq!(tracker.effective_mode(&GazePolicy::Random), Mode::PartialInformation);
        let mut full = test_tracker(10);
        full.config.mode = Mode::FullInformation;
        assert_eq!(full.effective_mode(&GazePolicy::Random), Mode::FullInformation);
    }

    #[test]
    fn advance_belief_matches_manual_weighting() {
        // A deterministic transition and a hand likelihood give a
        // closed-form weighted mean.
        let belief = BeliefState::uniform(vec![
            State::at([0.0, 0.0]),
            State::at([10.0, 0.0]),
        ]);
        let transition = TransitionModel {
            velocity_coupling: 0.0,
            velocity_decay: 1.0,
            position_noise_std: 0.0,
            velocity_noise_std: 0.0,
            log_scale_noise_std: 0.0,
            orientation_noise_std: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let outcome = advance_belief(
            &belief,
            &transition,
            |s| if s.position[0] < 5.0 { 3.0 } else { 1.0 },
            &mut rng,
        );
        assert_relative_eq!(outcome.estimate.position[0], 2.5);
        assert_relative_eq!(outcome.reward, 0.75 * 0.75 + 0.25 * 0.25);
        assert!(!outcome.flagged);
    }
}
