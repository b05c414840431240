//! Train the identity stack — glimpse features, multi-fixation fusion,
//! class readout — then classify glimpse windows and accumulate
//! posteriors across a sequence of fixations.
//!
//! Run with: cargo run --example identity_readout

use gazetrack::harness::config::ExperimentConfig;
use gazetrack::harness::pretrain::{train_features, train_identity};
use gazetrack::identity::{accumulate, classify, ClassPosterior, WindowSample};
use gazetrack::rng::stream_rng;
use gazetrack::simulator::glyphs::GlyphStore;
use rand::Rng;

fn main() {
    let mut config = ExperimentConfig::default();
    config.appearance.hidden = 48;
    config.classifier.window = 4;
    config.classifier.hidden = 24;
    config.classifier.factors = 24;
    config.pretrain.rbm_samples_per_glyph = 30;
    config.pretrain.rbm_epochs = 10;
    config.pretrain.mfrbm_windows_per_glyph = 60;
    config.pretrain.mfrbm_epochs = 5;
    let store = GlyphStore::builtin();

    println!("training the identity stack...");
    let rbm = train_features(&config, &store, 3).unwrap();
    let (mfrbm, readout) = train_identity(&config, &store, &rbm, 3).unwrap();

    // Classify fresh windows of each digit via the same augmentation
    // the models were trained on.
    let augment = |glyph: usize, rng: &mut gazetrack::rng::StreamRng| -> WindowSample {
        use gazetrack::appearance::template::glimpse;
        use gazetrack::state_space::State;
        let geometry = config.geometry();
        let actions = config.action_set();
        let glyph_frame = store.glyph(glyph).unwrap();
        let mut canvas = gazetrack::frame::Frame::new(72, 72);
        for y in 0..glyph_frame.height {
            for x in 0..glyph_frame.width {
                canvas.set(x + 22, y + 22, glyph_frame.get(x as i64, y as i64));
            }
        }
        let mut features = Vec::new();
        let mut gazes = Vec::new();
        for _ in 0..config.classifier.window {
            let action = rng.random_range(0..actions.len());
            let state = State::at([
                35.5 + rng.random_range(-1.5..1.5),
                35.5 + rng.random_range(-1.5..1.5),
            ]);
            let patch = glimpse(&canvas, &state, actions.offset(action), &geometry);
            features.push(rbm.features(&patch).unwrap().activations);
            gazes.push(action);
        }
        WindowSample { features, gazes }
    };

    let mut rng = stream_rng(77, "example/identity");
    let mut correct = 0;
    let trials = 40;
    for i in 0..trials {
        let glyph = i % store.len();
        let sample = augment(glyph, &mut rng);
        let posterior = classify(&mfrbm.hidden_probs(&sample).unwrap(), &readout).unwrap();
        if posterior.argmax() == glyph {
            correct += 1;
        }
    }
    println!("single-window accuracy: {}/{trials}", correct);

    // Accumulating evidence across windows sharpens the posterior.
    let glyph = 8;
    let mut history: Vec<ClassPosterior> = Vec::new();
    println!("\naccumulating windows of digit {glyph}:");
    for round in 1..=5 {
        let sample = augment(glyph, &mut rng);
        history.push(classify(&mfrbm.hidden_probs(&sample).unwrap(), &readout).unwrap());
        let fused = accumulate(&history);
        println!(
            "after {round} window(s): argmax {} with probability {:.3}",
            fused.argmax(),
            fused.probs()[fused.argmax()]
        );
    }
}
