//! Train the glimpse feature model with one-step contrastive
//! divergence and watch the reconstruction error fall.
//!
//! Run with: cargo run --example appearance_training

use gazetrack::appearance::{foveate, train_rbm_cd1, FoveaGeometry, Rbm};
use gazetrack::frame::Frame;
use gazetrack::rng::stream_rng;
use gazetrack::simulator::glyphs::GlyphStore;

fn main() {
    let store = GlyphStore::builtin();
    let geometry = FoveaGeometry { rings: 2, fovea: 8 };
    let mut rng = stream_rng(7, "example/appearance");

    // Glimpses of every glyph at jittered positions.
    let mut data = Vec::new();
    for g in 0..store.len() {
        let glyph = store.glyph(g).unwrap();
        let mut frame = Frame::new(64, 64);
        for y in 0..glyph.height {
            for x in 0..glyph.width {
                frame.set(x + 18, y + 18, glyph.get(x as i64, y as i64));
            }
        }
        for i in 0..20 {
            let dx = (i % 5) as f64 - 2.0;
            let dy = (i / 5 % 4) as f64 - 1.5;
            data.push(foveate(&frame, [32.0 + dx, 32.0 + dy], 1.0, 0.0, &geometry));
        }
    }

    let mut rbm = Rbm::init_random(geometry.len(), 32, 0.05, &mut rng);
    let initial = rbm.reconstruction_error(&data).unwrap();
    println!("mean reconstruction error before training: {initial:.4}");

    for round in 1..=5 {
        rbm = train_rbm_cd1(&data, &rbm, 0.1, 4, &mut rng).unwrap();
        let err = rbm.reconstruction_error(&data).unwrap();
        println!("after {:2} epochs: {err:.4}", round * 4);
    }

    let features = rbm.features(&data[0]).unwrap();
    let active = features.activations.iter().filter(|a| **a > 0.5).count();
    println!("{active} of {} feature units respond to the first glimpse", rbm.n_hidden);
}
