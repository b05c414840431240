//! Track with the Bayesian-optimization gaze policy, then export the
//! posterior mean and uncertainty of its learned reward surface.
//!
//! Run with: cargo run --example reward_surface

use gazetrack::harness::config::ExperimentConfig;
use gazetrack::harness::pretrain::train_features;
use gazetrack::harness::surface::{dump_surface, SurfaceOptions};
use gazetrack::harness::PretrainedModels;
use gazetrack::identity::{LogisticReadout, MultiFixationRbm};

fn main() {
    let mut config = ExperimentConfig::default();
    config.sequence.frames = 60;
    config.appearance.hidden = 48;
    config.classifier.enabled = false;
    config.policy.bayesopt.warmup = 8;
    config.policy.bayesopt.direct_budget = 120;
    config.pretrain.rbm_samples_per_glyph = 30;
    config.pretrain.rbm_epochs = 10;

    let store = config.glyph_store();
    println!("training glimpse features...");
    let rbm = train_features(&config, &store, 1).unwrap();
    let models = PretrainedModels {
        rbm,
        // The surface run tracks without the classifier; placeholders
        // keep the bundle type simple.
        mfrbm: MultiFixationRbm::zeros(2, 48, 2, 9, 2),
        readout: LogisticReadout::zeros(10, 2),
    };

    let options = SurfaceOptions {
        out_dir: "target/reward_surface".into(),
        glyph: 2,
        seed_index: 0,
        resolution: 64,
        base_seed: None,
    };
    println!("tracking one sequence with the gaze optimizer...");
    let (csv, pgm) = dump_surface(&config, &models, &options).unwrap();
    println!("wrote {}", csv.display());
    println!("wrote {}", pgm.display());

    // Peek at the CSV: where does the model think looking pays off?
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut best = ("", f64::NEG_INFINITY);
    for line in text.lines().skip(1) {
        let mean: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        if mean > best.1 {
            best = (line, mean);
        }
    }
    println!("highest posterior mean row: {}", best.0);
}
