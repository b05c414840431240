//! The full loop on one sequence: a particle filter tracks a moving
//! digit while Hedge learns where to look, rewarded by weight
//! concentration.
//!
//! Run with: cargo run --example track_and_look

use gazetrack::appearance::FoveaGeometry;
use gazetrack::harness::config::ExperimentConfig;
use gazetrack::harness::pretrain::train_features;
use gazetrack::policies::{hedge_gamma, DiscreteActionSet, HedgeState};
use gazetrack::rng::stream_rng;
use gazetrack::simulator::glyphs::GlyphStore;
use gazetrack::simulator::{generate_sequence, tracking_error, SequenceSpec};
use gazetrack::tracker::{GazeAction, GazePolicy, Tracker, TrackerConfig};

fn main() {
    // A quick feature model from the default augmentation pipeline.
    let mut config = ExperimentConfig::default();
    config.appearance.hidden = 48;
    config.pretrain.rbm_samples_per_glyph = 30;
    config.pretrain.rbm_epochs = 10;
    let store = GlyphStore::builtin();
    println!("training glimpse features...");
    let rbm = train_features(&config, &store, 1).unwrap();

    let spec = SequenceSpec::new(120, 120, 120, 4, [35.0, 60.0], [1.0, 0.45]);
    let mut sim_rng = stream_rng(5, "simulator");
    let (frames, truth) = generate_sequence(&spec, &store, &mut sim_rng).unwrap();

    // Wide gaze offsets so fixation choice matters, and a likelihood
    // bandwidth soft enough to survive the wall bounces.
    let actions = DiscreteActionSet::grid(3, 16.0);
    let steps = frames.len() - 1;
    let mut tracker_config = TrackerConfig { particles: 100, ..TrackerConfig::default() };
    tracker_config.bandwidth = 0.12;
    tracker_config.transition.position_noise_std = 1.5;
    tracker_config.transition.velocity_noise_std = 0.35;
    let tracker = Tracker {
        config: tracker_config,
        actions: actions.clone(),
        geometry: FoveaGeometry::default(),
        rbm,
        classifier: None,
    };
    let mut policy = GazePolicy::Hedge(HedgeState::new(actions.len(), hedge_gamma(actions.len(), steps)));

    println!("tracking {} frames...\n", frames.len());
    let estimates = tracker
        .run_sequence(&frames, &truth.states[0], &mut policy, 99)
        .unwrap();

    for t in (0..frames.len()).step_by(10) {
        let e = &estimates[t];
        let s = &truth.states[t];
        let err = ((e.state.position[0] - s.position[0]).powi(2)
            + (e.state.position[1] - s.position[1]).powi(2))
        .sqrt();
        let gaze = match e.action {
            Some(GazeAction::Discrete(i)) => format!("gaze {i} {:?}", actions.offset(i)),
            Some(GazeAction::Continuous(a)) => format!("gaze {a:?}"),
            None => "initialization".into(),
        };
        println!("frame {t:2}: error {err:5.2} px, reward {:.3}, {gaze}", e.reward);
    }

    let states: Vec<_> = estimates.iter().map(|e| e.state).collect();
    let (mean, std) = tracking_error(&states, &truth).unwrap();
    println!("\nmean tracking error {mean:.2} px (std {std:.2})");
    println!(
        "cumulative reward {:.2} over {steps} steps",
        estimates.last().unwrap().cumulative_reward
    );
    if let GazePolicy::Hedge(state) = &policy {
        let probs = gazetrack::policies::hedge_policy(state);
        let best = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        println!(
            "hedge settled on gaze {} at {:?} with probability {:.2}",
            best.0,
            actions.offset(best.0),
            best.1
        );
    }
}
