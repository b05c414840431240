//! Synthetic video generation with exact ground truth.
//!
//! A target glyph moves with constant velocity and bounces off the
//! frame borders; static distractor glyphs, an optional timed occluder,
//! per-pixel salt noise, and a per-frame scale trajectory complete the
//! scene. Generation is deterministic given the spec and the random
//! stream, and the returned ground truth holds the exact state per
//! frame, so tracking error can be measured without annotation.

pub mod glyphs;
pub mod io;

use rand::Rng;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::identity::ClassPosterior;
use crate::state_space::State;
use glyphs::GlyphStore;

/// Axis-aligned occluder active on frames `start..end`; covered pixels
/// render as background.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occluder {
    /// `[x0, y0, x1, y1]` with exclusive upper corners.
    pub rect: [f64; 4],
    pub start: usize,
    pub end: usize,
}

/// A static glyph placed to distract the tracker.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Distractor {
    pub glyph: usize,
    pub position: [f64; 2],
}

/// Everything that defines one synthetic sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub target_glyph: usize,
    pub start_position: [f64; 2],
    pub velocity: [f64; 2],
    /// Per-frame scale multiplier; empty means constant 1.
    pub scale_multipliers: Vec<f64>,
    pub distractors: Vec<Distractor>,
    pub occluder: Option<Occluder>,
    /// Probability that a pixel is replaced by uniform noise.
    pub noise_fraction: f64,
    /// The target centre reflects off walls this far inside the frame.
    pub bounce_margin: f64,
}

impl SequenceSpec {
    /// Minimal moving-target spec with the bounce margin set to half
    /// the glyph side, so the glyph never clips the border.
    pub fn new(
        width: usize,
        height: usize,
        frames: usize,
        target_glyph: usize,
        start_position: [f64; 2],
        velocity: [f64; 2],
    ) -> Self {
        SequenceSpec {
            width,
            height,
            frames,
            target_glyph,
            start_position,
            velocity,
            scale_multipliers: Vec::new(),
            distractors: Vec::new(),
            occluder: None,
            noise_fraction: 0.0,
            bounce_margin: glyphs::GLYPH_SIDE as f64 / 2.0,
        }
    }

    pub fn validate(&self, store: &GlyphStore) -> Result<()> {
        let err = |msg: String| Err(Error::SpecOutOfBounds(msg));
        if self.frames == 0 {
            return err("need at least one frame".into());
        }
        if self.width < 8 || self.height < 8 {
            return err(format!("frame {}x{} too small", self.width, self.height));
        }
        if self.target_glyph >= store.len() {
            return err(format!("target glyph {} of {}", self.target_glyph, store.len()));
        }
        for d in &self.distractors {
            if d.glyph >= store.len() {
                return err(format!("distractor glyph {} of {}", d.glyph, store.len()));
            }
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return err(format!("noise fraction {}", self.noise_fraction));
        }
        if !self.scale_multipliers.is_empty() && self.scale_multipliers.len() != self.frames {
            return Err(Error::LengthMismatch {
                left: self.frames,
                right: self.scale_multipliers.len(),
            });
        }
        if self.scale_multipliers.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return err("scale multipliers must be positive".into());
        }
        let m = self.bounce_margin;
        if !(m >= 0.0) || 2.0 * m >= (self.width - 1) as f64 || 2.0 * m >= (self.height - 1) as f64
        {
            return err(format!("bounce margin {m} leaves no room"));
        }
        let inside = |p: [f64; 2]| {
            p[0] >= m
                && p[0] <= (self.width - 1) as f64 - m
                && p[1] >= m
                && p[1] <= (self.height - 1) as f64 - m
        };
        if !inside(self.start_position) {
            return err(format!("start position {:?} outside margins", self.start_position));
        }
        if let Some(o) = &self.occluder {
            if o.rect[0] >= o.rect[2] || o.rect[1] >= o.rect[3] || o.start > o.end {
                return err("degenerate occluder".into());
            }
            if o.end > self.frames {
                return err(format!("occluder interval {}..{}", o.start, o.end));
            }
        }
        Ok(())
    }

    fn scale_at(&self, t: usize) -> f64 {
        if self.scale_multipliers.is_empty() {
            1.0
        } else {
            self.scale_multipliers[t]
        }
    }
}

/// Exact per-frame target states.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub states: Vec<State>,
}

/// Paint `glyph` centred at `center` with the given scale, compositing
/// with max so overlapping glyphs keep their ink.
fn render_glyph(frame: &mut Frame, glyph: &Frame, center: [f64; 2], scale: f64) {
    let half_w = glyph.width as f64 / 2.0;
    let half_h = glyph.height as f64 / 2.0;
    let x_lo = (center[0] - scale * half_w).floor().max(0.0) as usize;
    let x_hi = ((center[0] + scale * half_w).ceil() as usize).min(frame.width - 1);
    let y_lo = (center[1] - scale * half_h).floor().max(0.0) as usize;
    let y_hi = ((center[1] + scale * half_h).ceil() as usize).min(frame.height - 1);
    for py in y_lo..=y_hi {
        for px in x_lo..=x_hi {
            let gx = ((px as f64 - center[0]) / scale + half_w).floor() as i64;
            let gy = ((py as f64 - center[1]) / scale + half_h).floor() as i64;
            let v = glyph.get(gx, gy);
            if v > frame.get(px as i64, py as i64) {
                frame.set(px, py, v);
            }
        }
    }
}

/// Generate frames and ground truth. The random stream is consumed only
/// by pixel noise, so two specs differing in noise fraction alone share
/// identical underlying renders.
pub fn generate_sequence<R: Rng>(
    spec: &SequenceSpec,
    store: &GlyphStore,
    rng: &mut R,
) -> Result<(Vec<Frame>, GroundTruth)> {
    spec.validate(store)?;
    let mut frames = Vec::with_capacity(spec.frames);
    let mut states = Vec::with_capacity(spec.frames);
    let mut position = spec.start_position;
    let mut velocity = spec.velocity;
    let x_max = (spec.width - 1) as f64 - spec.bounce_margin;
    let y_max = (spec.height - 1) as f64 - spec.bounce_margin;

    for t in 0..spec.frames {
        let scale = spec.scale_at(t);
        states.push(State {
            position,
            velocity,
            log_scale: scale.ln(),
            orientation: 0.0,
        });

        let mut frame = Frame::new(spec.width, spec.height);
        for d in &spec.distractors {
            render_glyph(&mut frame, store.glyph(d.glyph)?, d.position, 1.0);
        }
        render_glyph(&mut frame, store.glyph(spec.target_glyph)?, position, scale);
        if let Some(o) = &spec.occluder {
            if t >= o.start && t < o.end {
                let x0 = o.rect[0].max(0.0) as usize;
                let y0 = o.rect[1].max(0.0) as usize;
                let x1 = (o.rect[2].ceil() as usize).min(spec.width);
                let y1 = (o.rect[3].ceil() as usize).min(spec.height);
                for py in y0..y1 {
                    for px in x0..x1 {
                        frame.set(px, py, 0.0);
                    }
                }
            }
        }
        if spec.noise_fraction > 0.0 {
            for py in 0..spec.height {
                for px in 0..spec.width {
                    if rng.random::<f64>() < spec.noise_fraction {
                        frame.set(px, py, rng.random::<f64>());
                    }
                }
            }
        }
        frames.push(frame);

        position[0] += velocity[0];
        position[1] += velocity[1];
        let reflect = |p: &mut f64, v: &mut f64, lo: f64, hi: f64| {
            // A step can overshoot both walls only if the speed exceeds
            // the frame; loop until back inside.
            while *p < lo || *p > hi {
                if *p < lo {
                    *p = 2.0 * lo - *p;
                } else {
                    *p = 2.0 * hi - *p;
                }
                *v = -*v;
            }
        };
        reflect(&mut position[0], &mut velocity[0], spec.bounce_margin, x_max);
        reflect(&mut position[1], &mut velocity[1], spec.bounce_margin, y_max);
    }
    Ok((frames, GroundTruth { states }))
}

/// Mean and population standard deviation of the per-frame Euclidean
/// position error.
pub fn tracking_error(estimates: &[State], truth: &GroundTruth) -> Result<(f64, f64)> {
    if estimates.len() != truth.states.len() {
        return Err(Error::LengthMismatch {
            left: truth.states.len(),
            right: estimates.len(),
        });
    }
    let distances: Vec<f64> = estimates
        .iter()
        .zip(&truth.states)
        .map(|(e, t)| {
            let dx = e.position[0] - t.position[0];
            let dy = e.position[1] - t.position[1];
            (dx * dx + dy * dy).sqrt()
        })
        .collect();
    let n = distances.len() as f64;
    let mean = distances.iter().sum::<f64>() / n;
    let var = distances.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Fraction of frames whose accumulated posterior picks the true class.
pub fn classification_accuracy(posteriors: &[ClassPosterior], true_class: usize) -> f64 {
    if posteriors.is_empty() {
        return 0.0;
    }
    let correct = posteriors.iter().filter(|p| p.argmax() == true_class).count();
    correct as f64 / posteriors.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base_spec() -> SequenceSpec {
        SequenceSpec::new(100, 80, 30, 3, [50.0, 40.0], [2.0, 0.0])
    }

    #[test]
    fn constant_velocity_advances_truth_exactly() {
        let store = GlyphStore::builtin();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // 15 frames from x = 50 keep the target clear of the bounce
        // margin at x = 85.
        let mut spec = base_spec();
        spec.frames = 15;
        let (_, truth) = generate_sequence(&spec, &store, &mut rng).unwrap();
        for t in 1..truth.states.len() {
            let dx = truth.states[t].position[0] - truth.states[t - 1].position[0];
            assert_relative_eq!(dx, 2.0, epsilon = 1e-12);
            assert_relative_eq!(truth.states[t].position[1], 40.0);
        }
    }

    #[test]
    fn static_target_gives_identical_frames() {
        let store = GlyphStore::builtin();
        let mut spec = base_spec();
        spec.velocity = [0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (frames, _) = generate_sequence(&spec, &store, &mut rng).unwrap();
        for f in &frames[1..] {
            assert_eq!(*f, frames[0]);
        }
    }

    #[test]
    fn bounce_keeps_truth_inside_margins() {
        let store = GlyphStore::builtin();
        let mut spec = base_spec();
        spec.frames = 400;
        spec.velocity = [3.7, 2.3];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (_, truth) = generate_sequence(&spec, &store, &mut rng).unwrap();
        let m = spec.bounce_margin;
        for s in &truth.states {
            assert!(s.position[0] >= m && s.position[0] <= 99.0 - m, "{:?}", s.position);
            assert!(s.position[1] >= m && s.position[1] <= 79.0 - m, "{:?}", s.position);
        }
        // A long diagonal run must actually have bounced.
        assert!(truth.states.iter().any(|s| s.velocity[0] < 0.0));
    }

    #[test]
    fn occluder_blanks_its_rectangle_during_its_interval() {
        let store = GlyphStore::builtin();
        let mut spec = base_spec();
        spec.velocity = [0.0, 0.0];
        spec.occluder = Some(Occluder { rect: [30.0, 20.0, 70.0, 60.0], start: 5, end: 10 });
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (frames, _) = generate_sequence(&spec, &store, &mut rng).unwrap();
        // The target sits inside the rectangle, so occluded frames are
        // fully blank there while others show ink.
        let ink = |f: &Frame| -> f64 {
            let mut total = 0.0;
            for y in 20..60 {
                for x in 30..70 {
                    total += f.get(x, y);
                }
            }
            total
        };
        assert!(ink(&frames[4]) > 0.0);
        assert_eq!(ink(&frames[5]), 0.0);
        assert_eq!(ink(&frames[9]), 0.0);
        assert!(ink(&frames[10]) > 0.0);
    }

    #[test]
    fn noiseless_render_is_shared_under_one_seed() {
        let store = GlyphStore::builtin();
        let clean = base_spec();
        let mut noisy = base_spec();
        noisy.noise_fraction = 0.3;
        let (clean_frames, _) =
            generate_sequence(&clean, &store, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let (noisy_frames, _) =
            generate_sequence(&noisy, &store, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();

        // Corrupted-pixel count across all frames stays within 3 sigma
        // of its binomial expectation.
        let mut corrupted = 0usize;
        let mut total = 0usize;
        for (c, n) in clean_frames.iter().zip(&noisy_frames) {
            for (a, b) in c.data().iter().zip(n.data()) {
                total += 1;
                if a != b {
                    corrupted += 1;
                }
            }
        }
        let expected = 0.3 * total as f64;
        let sigma = (total as f64 * 0.3 * 0.7).sqrt();
        let dev = (corrupted as f64 - expected).abs();
        assert!(dev <= 3.0 * sigma, "corrupted {corrupted} of {total}");
    }

    #[test]
    fn generation_is_deterministic() {
        let store = GlyphStore::builtin();
        let mut spec = base_spec();
        spec.noise_fraction = 0.2;
        spec.distractors = vec![Distractor { glyph: 7, position: [20.0, 20.0] }];
        let run = |seed: u64| {
            generate_sequence(&spec, &store, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
        };
        let (f1, t1) = run(42);
        let (f2, t2) = run(42);
        assert_eq!(f1, f2);
        assert_eq!(t1, t2);
        let (f3, _) = run(43);
        assert_ne!(f1, f3);
    }

    #[test]
    fn scale_trajectory_changes_the_render() {
        let store = GlyphStore::builtin();
        let mut spec = base_spec();
        spec.frames = 2;
        spec.velocity = [0.0, 0.0];
        spec.scale_multipliers = vec![1.0, 2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (frames, truth) = generate_sequence(&spec, &store, &mut rng).unwrap();
        assert_relative_eq!(truth.states[1].log_scale, 2f64.ln());
        let ink = |f: &Frame| f.data().iter().sum::<f64>();
        // Doubling the scale quadruples the inked area.
        let ratio = ink(&frames[1]) / ink(&frames[0]);
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn spec_validation_rejects_bad_geometry() {
        let store = GlyphStore::builtin();
        let mut bad = base_spec();
        bad.target_glyph = 10;
        assert!(matches!(bad.validate(&store), Err(Error::SpecOutOfBounds(_))));
        let mut bad = base_spec();
        bad.start_position = [2.0, 40.0];
        assert!(bad.validate(&store).is_err());
        let mut bad = base_spec();
        bad.noise_fraction = 1.0;
        assert!(bad.validate(&store).is_err());
        let mut bad = base_spec();
        bad.scale_multipliers = vec![1.0; 5];
        assert!(bad.validate(&store).is_err());
        let mut bad = base_spec();
        bad.occluder = Some(Occluder { rect: [10.0, 10.0, 5.0, 20.0], start: 0, end: 1 });
        assert!(bad.validate(&store).is_err());
    }

    #[test]
    fn tracking_error_on_known_distances() {
        let truth = GroundTruth {
            states: vec![State::at([0.0, 0.0]), State::at([0.0, 0.0])],
        };
        let estimates = vec![State::at([0.0, 0.0]), State::at([10.0, 0.0])];
        let (mean, std) = tracking_error(&estimates, &truth).unwrap();
        assert_relative_eq!(mean, 5.0);
        assert_relative_eq!(std, 5.0);
        assert!(tracking_error(&estimates[..1], &truth).is_err());
    }

    #[test]
    fn accuracy_counts_correct_argmax_frames() {
        let right = ClassPosterior { log_probs: vec![0.7f64.ln(), 0.3f64.ln()] };
        let wrong = ClassPosterior { log_probs: vec![0.3f64.ln(), 0.7f64.ln()] };
        let history = vec![right.clone(), right.clone(), wrong, right];
        assert_relative_eq!(classification_accuracy(&history, 0), 0.75);
        assert_relative_eq!(classification_accuracy(&history, 1), 0.25);
    }
}
