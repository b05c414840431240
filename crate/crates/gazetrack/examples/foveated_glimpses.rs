//! Foveate a frame at a few gaze offsets and show how resolution
//! falls off with eccentricity.
//!
//! Run with: cargo run --example foveated_glimpses

use gazetrack::appearance::{foveate, FoveaGeometry};
use gazetrack::frame::Frame;
use gazetrack::simulator::glyphs::GlyphStore;

fn main() {
    let store = GlyphStore::builtin();
    let glyph = store.glyph(5).unwrap();

    // Paint the glyph in the middle of a larger frame.
    let mut frame = Frame::new(96, 96);
    for y in 0..glyph.height {
        for x in 0..glyph.width {
            frame.set(x + 34, y + 34, glyph.get(x as i64, y as i64));
        }
    }

    let geometry = FoveaGeometry::default();
    println!(
        "geometry: {} rings around an {}x{} fovea -> {} values per glimpse, span ±{}",
        geometry.rings,
        geometry.fovea,
        geometry.fovea,
        geometry.len(),
        geometry.span()
    );

    for offset in [[0.0, 0.0], [8.0, 0.0], [0.0, -8.0]] {
        let center = [48.0 + offset[0], 48.0 + offset[1]];
        let patch = foveate(&frame, center, 1.0, 0.0, &geometry);
        let ink: f64 = patch.values.iter().sum();
        let lit = patch.values.iter().filter(|v| **v > 0.0).count();
        println!("gaze {offset:>12?}: total ink {ink:7.2} across {lit} lit samples");
    }

    // The same glimpse at twice the scale covers twice the area per
    // sample; the value count stays fixed.
    let patch = foveate(&frame, [48.0, 48.0], 2.0, 0.0, &geometry);
    println!(
        "scale 2 glimpse still has {} values, covering ±{} frame pixels",
        patch.values.len(),
        2.0 * geometry.span()
    );
}
