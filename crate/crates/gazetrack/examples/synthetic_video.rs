//! Generate a synthetic sequence — moving digit, occluder, distractor,
//! salt noise — and write frames plus exact ground truth to disk.
//!
//! Run with: cargo run --example synthetic_video

use gazetrack::rng::stream_rng;
use gazetrack::simulator::glyphs::GlyphStore;
use gazetrack::simulator::io::{write_frames, write_ground_truth};
use gazetrack::simulator::{generate_sequence, Distractor, Occluder, SequenceSpec};

fn main() {
    let store = GlyphStore::builtin();
    let mut spec = SequenceSpec::new(120, 90, 60, 7, [30.0, 45.0], [2.0, 1.0]);
    spec.noise_fraction = 0.05;
    spec.occluder = Some(Occluder { rect: [70.0, 0.0, 95.0, 90.0], start: 15, end: 35 });
    spec.distractors = vec![Distractor { glyph: 1, position: [95.0, 20.0] }];

    let mut rng = stream_rng(42, "simulator");
    let (frames, truth) = generate_sequence(&spec, &store, &mut rng).unwrap();

    let dir = std::path::Path::new("target/synthetic_video");
    std::fs::create_dir_all(dir).unwrap();
    write_frames(&frames, dir).unwrap();
    write_ground_truth(&truth, &dir.join("truth.csv")).unwrap();

    println!("wrote {} frames and truth.csv to {}", frames.len(), dir.display());
    for t in [0, 20, 40, 59] {
        let s = &truth.states[t];
        println!(
            "frame {t:2}: target at ({:6.2}, {:6.2}) moving ({:5.2}, {:5.2})",
            s.position[0], s.position[1], s.velocity[0], s.velocity[1]
        );
    }

    // The occluder really blanks the target: compare ink near the
    // target during and after the occlusion window.
    let ink_near = |t: usize| -> f64 {
        let p = truth.states[t].position;
        let mut total = 0.0;
        for dy in -5i64..=5 {
            for dx in -5i64..=5 {
                total += frames[t].get(p[0] as i64 + dx, p[1] as i64 + dy);
            }
        }
        total
    };
    println!("ink near target at frame 25 (occluded): {:6.2}", ink_near(25));
    println!("ink near target at frame 45 (visible):  {:6.2}", ink_near(45));
}
