//! TOML experiment configuration: scenario, models, policies, and
//! training hyperparameters for the command-line harness.
//!
//! Every section has defaults, so an empty file is a valid experiment;
//! unknown keys are rejected to catch typos.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::appearance::foveate::FoveaGeometry;
use crate::appearance::rbm::Rbm;
use crate::bayesopt::{
    ActionDomain, GpHyperparams, GpModel, DEFAULT_DIRECT_BUDGET, DEFAULT_UCB_DELTA,
    DEFAULT_WARMUP,
};
use crate::error::{Error, Result};
use crate::policies::{
    exp3_gamma, hedge_gamma, DiscreteActionSet, Exp3DivideBy, Exp3State, HedgeState,
};
use crate::simulator::glyphs::GlyphStore;
use crate::simulator::{Distractor, Occluder, SequenceSpec};
use crate::tracker::{
    BayesOptPolicy, ClassifierBundle, ClassifierGazeSource, GazePolicy, Tracker, TrackerConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub name: String,
    /// Root seed; every video, cell, and training stream derives from it.
    pub base_seed: u64,
    /// Number of repetitions per (policy, glyph) cell.
    pub seeds: usize,
    pub policies: Vec<String>,
    /// Target classes to run; defaults to all ten digits.
    pub glyphs: Vec<usize>,
    /// Write a per-run trace CSV next to the result tables.
    pub write_traces: bool,
    /// Final-frame position error above this counts as a lost track.
    pub track_loss_threshold: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            name: "experiment".into(),
            base_seed: 1000,
            seeds: 10,
            policies: vec!["hedge".into(), "random".into(), "circular".into()],
            glyphs: (0..10).collect(),
            write_traces: false,
            track_loss_threshold: 14.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceSection {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Defaults to the frame centre.
    pub start_position: Option<[f64; 2]>,
    pub velocity: [f64; 2],
    /// Rotate the start velocity by a per-seed random angle so
    /// repetitions see different trajectories at the same speed.
    pub randomize_direction: bool,
    /// Per-pixel probability of replacement by uniform noise.
    pub noise: f64,
    pub bounce_margin: Option<f64>,
    /// Linear scale ramp endpoints across the sequence.
    pub scale_start: f64,
    pub scale_end: f64,
    pub occluder: Option<Occluder>,
    pub distractors: Vec<Distractor>,
}

impl Default for SequenceSection {
    fn default() -> Self {
        SequenceSection {
            width: 120,
            height: 120,
            frames: 300,
            start_position: None,
            velocity: [1.5, 0.7],
            randomize_direction: true,
            noise: 0.0,
            bounce_margin: None,
            scale_start: 1.0,
            scale_end: 1.0,
            occluder: None,
            distractors: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppearanceSection {
    pub rings: usize,
    pub fovea: usize,
    /// Hidden units of the glimpse feature model.
    pub hidden: usize,
}

impl Default for AppearanceSection {
    fn default() -> Self {
        AppearanceSection { rings: 3, fovea: 8, hidden: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActionsSection {
    /// Gazes form a grid x grid pattern.
    pub grid: usize,
    /// Offset between neighbouring gazes in template pixels.
    pub spacing: f64,
}

impl Default for ActionsSection {
    fn default() -> Self {
        ActionsSection { grid: 3, spacing: 8.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BayesOptSection {
    pub warmup: usize,
    pub refit_every: usize,
    pub direct_budget: usize,
    pub delta: f64,
    /// Half-width of the square gaze domain; defaults to the action
    /// grid's extent.
    pub domain_half: Option<f64>,
    /// Initial reward-model hyperparameters, replaced once fitting
    /// starts.
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub length_scale: Option<f64>,
}

impl Default for BayesOptSection {
    fn default() -> Self {
        BayesOptSection {
            warmup: DEFAULT_WARMUP,
            refit_every: 5,
            direct_budget: DEFAULT_DIRECT_BUDGET,
            delta: DEFAULT_UCB_DELTA,
            domain_half: None,
            signal_variance: 0.1,
            noise_variance: 0.01,
            length_scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    /// Learning-rate horizon; defaults to the number of tracking steps.
    pub horizon: Option<usize>,
    pub hedge_gamma: Option<f64>,
    pub exp3_gamma: Option<f64>,
    pub exp3_divide_by: Exp3DivideBy,
    pub bayesopt: BayesOptSection,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            horizon: None,
            hedge_gamma: None,
            exp3_gamma: None,
            exp3_divide_by: Exp3DivideBy::Sampled,
            bayesopt: BayesOptSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSection {
    pub enabled: bool,
    /// Glimpses fused per classification window.
    pub window: usize,
    /// Second-layer hidden units.
    pub hidden: usize,
    pub factors: usize,
    pub gaze_source: ClassifierGazeSource,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        ClassifierSection {
            enabled: true,
            window: 4,
            hidden: 32,
            factors: 32,
            gaze_source: ClassifierGazeSource::Policy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainSection {
    pub rbm_epochs: usize,
    pub rbm_learning_rate: f64,
    /// Jittered glimpses per glyph for feature training.
    pub rbm_samples_per_glyph: usize,
    /// Std of the position jitter applied during augmentation.
    pub position_jitter: f64,
    /// Salt-noise fraction during augmentation; defaults to the
    /// sequence noise level.
    pub noise: Option<f64>,
    pub mfrbm_epochs: usize,
    pub mfrbm_learning_rate: f64,
    pub mfrbm_windows_per_glyph: usize,
    pub readout_epochs: usize,
    pub readout_learning_rate: f64,
    pub weight_init_std: f64,
    /// Init scale of the fusion model; large enough that its random
    /// projections separate classes before training refines them.
    pub mfrbm_init_std: f64,
    /// Optional big-endian image archive supplying extra unlabeled
    /// glimpse data for feature training.
    pub idx_images: Option<PathBuf>,
}

impl Default for PretrainSection {
    fn default() -> Self {
        PretrainSection {
            rbm_epochs: 25,
            rbm_learning_rate: 0.1,
            rbm_samples_per_glyph: 60,
            position_jitter: 1.5,
            noise: None,
            mfrbm_epochs: 10,
            mfrbm_learning_rate: 0.01,
            mfrbm_windows_per_glyph: 120,
            readout_epochs: 400,
            readout_learning_rate: 0.5,
            weight_init_std: 0.05,
            mfrbm_init_std: 0.1,
            idx_images: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsSection {
    pub dir: PathBuf,
    pub rbm: Option<PathBuf>,
    pub mfrbm: Option<PathBuf>,
    pub readout: Option<PathBuf>,
}

impl Default for ModelsSection {
    fn default() -> Self {
        ModelsSection {
            dir: PathBuf::from("models"),
            rbm: None,
            mfrbm: None,
            readout: None,
        }
    }
}

impl ModelsSection {
    fn resolve(&self, file: &Option<PathBuf>, default_name: &str) -> PathBuf {
        match file {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => self.dir.join(p),
            None => self.dir.join(default_name),
        }
    }

    pub fn rbm_path(&self) -> PathBuf {
        self.resolve(&self.rbm, "appearance.rbm1")
    }

    pub fn mfrbm_path(&self) -> PathBuf {
        self.resolve(&self.mfrbm, "identity.mfr1")
    }

    pub fn readout_path(&self) -> PathBuf {
        self.resolve(&self.readout, "readout.lrd1")
    }
}

/// The full experiment description.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub sequence: SequenceSection,
    pub appearance: AppearanceSection,
    pub actions: ActionsSection,
    pub tracker: TrackerConfig,
    pub policy: PolicySection,
    pub classifier: ClassifierSection,
    pub pretrain: PretrainSection,
    pub models: ModelsSection,
}

pub const KNOWN_POLICIES: [&str; 5] = ["random", "circular", "hedge", "exp3", "bayesopt"];

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::BadFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::ConfigInvalid(msg));
        let e = &self.experiment;
        if e.seeds == 0 || e.policies.is_empty() || e.glyphs.is_empty() {
            return invalid("experiment needs at least one seed, policy, and glyph".into());
        }
        for p in &e.policies {
            if !KNOWN_POLICIES.contains(&p.as_str()) {
                return invalid(format!(
                    "unknown policy {p:?}; expected one of {KNOWN_POLICIES:?}"
                ));
            }
        }
        if e.track_loss_threshold.is_nan() || e.track_loss_threshold <= 0.0 {
            return invalid("track loss threshold must be positive".into());
        }
        if self.sequence.frames < 2 {
            return invalid("sequences need at least two frames".into());
        }
        if !(self.sequence.scale_start > 0.0 && self.sequence.scale_end > 0.0) {
            return invalid("scale ramp endpoints must be positive".into());
        }
        self.geometry().validate()?;
        if self.appearance.hidden == 0 {
            return invalid("appearance model needs hidden units".into());
        }
        if self.actions.grid == 0 || self.actions.spacing.is_nan() || self.actions.spacing <= 0.0 {
            return invalid("action grid needs positive size and spacing".into());
        }
        self.tracker.validate()?;
        let b = &self.policy.bayesopt;
        if b.refit_every == 0 || b.direct_budget == 0 || !(b.delta > 0.0 && b.delta < 1.0) {
            return invalid("bayesopt needs refit_every/budget > 0 and delta in (0,1)".into());
        }
        if !(b.signal_variance > 0.0 && b.noise_variance > 0.0) {
            return invalid("bayesopt initial variances must be positive".into());
        }
        let c = &self.classifier;
        if c.enabled && (c.window == 0 || c.hidden == 0 || c.factors == 0) {
            return invalid("classifier needs window, hidden, factors > 0".into());
        }
        if c.enabled && c.window >= self.sequence.frames {
            return invalid(format!(
                "classifier window {} never fills in {} frames",
                c.window, self.sequence.frames
            ));
        }
        Ok(())
    }

    pub fn geometry(&self) -> FoveaGeometry {
        FoveaGeometry { rings: self.appearance.rings, fovea: self.appearance.fovea }
    }

    pub fn action_set(&self) -> DiscreteActionSet {
        DiscreteActionSet::grid(self.actions.grid, self.actions.spacing)
    }

    /// Number of policy decisions per sequence.
    pub fn horizon(&self) -> usize {
        self.policy.horizon.unwrap_or(self.sequence.frames - 1)
    }

    /// The base sequence for one target class; the runner may rotate
    /// the velocity per repetition.
    pub fn sequence_spec(&self, glyph: usize) -> SequenceSpec {
        let s = &self.sequence;
        let start = s.start_position.unwrap_or([
            (s.width - 1) as f64 / 2.0,
            (s.height - 1) as f64 / 2.0,
        ]);
        let mut spec = SequenceSpec::new(s.width, s.height, s.frames, glyph, start, s.velocity);
        if let Some(m) = s.bounce_margin {
            spec.bounce_margin = m;
        }
        if s.scale_start != 1.0 || s.scale_end != 1.0 {
            let last = (s.frames - 1).max(1) as f64;
            spec.scale_multipliers = (0..s.frames)
                .map(|t| s.scale_start + (s.scale_end - s.scale_start) * t as f64 / last)
                .collect();
        }
        spec.noise_fraction = s.noise;
        spec.occluder = s.occluder;
        spec.distractors = s.distractors.clone();
        spec
    }

    pub fn gaze_domain(&self) -> ActionDomain {
        let half = self
            .policy
            .bayesopt
            .domain_half
            .unwrap_or_else(|| self.actions.spacing * (self.actions.grid.max(1) - 1) as f64 / 2.0)
            .max(1.0);
        ActionDomain::centered(half)
    }

    pub fn build_policy(&self, name: &str) -> Result<GazePolicy> {
        let k = self.action_set().len();
        let horizon = self.horizon();
        match name {
            "random" => Ok(GazePolicy::Random),
            "circular" => Ok(GazePolicy::Circular),
            "hedge" => {
                let gamma = self.policy.hedge_gamma.unwrap_or_else(|| hedge_gamma(k, horizon));
                Ok(GazePolicy::Hedge(HedgeState::new(k, gamma)))
            }
            "exp3" => {
                let gamma = self.policy.exp3_gamma.unwrap_or_else(|| exp3_gamma(k, horizon));
                Ok(GazePolicy::Exp3 {
                    state: Exp3State::new(k, gamma),
                    divide_by: self.policy.exp3_divide_by,
                })
            }
            "bayesopt" => {
                let b = &self.policy.bayesopt;
                let domain = self.gaze_domain();
                let length = b.length_scale.unwrap_or(0.25 * domain.side(0));
                let model = GpModel::new(GpHyperparams {
                    signal_variance: b.signal_variance,
                    noise_variance: b.noise_variance,
                    length_scales: [length, length],
                })?;
                let mut policy = BayesOptPolicy::new(model, domain);
                policy.warmup = b.warmup;
                policy.refit_every = b.refit_every;
                policy.direct_budget = b.direct_budget;
                policy.delta = b.delta;
                Ok(GazePolicy::BayesOpt(Box::new(policy)))
            }
            other => Err(Error::ConfigInvalid(format!("unknown policy {other:?}"))),
        }
    }

    pub fn build_tracker(
        &self,
        rbm: Rbm,
        classifier: Option<ClassifierBundle>,
    ) -> Result<Tracker> {
        let tracker = Tracker {
            config: self.tracker,
            actions: self.action_set(),
            geometry: self.geometry(),
            rbm,
            classifier,
        };
        tracker.validate()?;
        Ok(tracker)
    }

    pub fn glyph_store(&self) -> GlyphStore {
        GlyphStore::builtin()
    }
}
