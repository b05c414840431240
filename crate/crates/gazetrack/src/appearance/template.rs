//! The target template and glimpse comparison in feature space.
//!
//! The template is the target's appearance captured on the first frame.
//! A glimpse taken at gaze offset `a` under a hypothesised state is
//! compared against the template's glimpse at the same offset under the
//! initial state, so every fixation has its own reference descriptor.
//! Similarity is measured between sum-normalised activation vectors with
//! the Bhattacharyya coefficient, and the likelihood decays
//! exponentially in the Bhattacharyya distance.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::appearance::foveate::{foveate, FoveaGeometry};
use crate::appearance::rbm::{HiddenFeatures, Rbm};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::state_space::State;

/// Floor applied to the Bhattacharyya coefficient before the distance,
/// keeping the likelihood strictly positive.
pub const BHATTACHARYYA_FLOOR: f64 = 1e-12;

/// Likelihood of an observed glimpse descriptor given the template's
/// reference descriptor at the same gaze: `exp(-d / bandwidth)` with `d`
/// the Bhattacharyya distance between the sum-normalised activations.
pub fn observation_likelihood(
    observed: &HiddenFeatures,
    reference: &HiddenFeatures,
    bandwidth: f64,
) -> Result<f64> {
    if observed.activations.len() != reference.activations.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.activations.len(),
            got: observed.activations.len(),
        });
    }
    assert!(bandwidth > 0.0, "bandwidth must be positive");
    let sum_p: f64 = observed.activations.iter().sum();
    let sum_q: f64 = reference.activations.iter().sum();
    let mut bc = 0.0;
    for (p, q) in observed.activations.iter().zip(&reference.activations) {
        bc += ((p / sum_p) * (q / sum_q)).sqrt();
    }
    let bc = bc.clamp(BHATTACHARYYA_FLOOR, 1.0);
    let distance = (1.0 - bc).sqrt();
    Ok((-distance / bandwidth).exp())
}

/// First-frame appearance of the target plus per-gaze reference
/// descriptors.
#[derive(Debug)]
pub struct Template {
    frame: Frame,
    initial: State,
    geometry: FoveaGeometry,
    rbm: Rbm,
    /// Reference descriptors for the discrete action set, in action
    /// order.
    discrete: Vec<HiddenFeatures>,
    /// Lazily filled references for continuous gazes, keyed by the gaze
    /// offset quantised to half-pixel steps.
    continuous: Mutex<HashMap<(i64, i64), HiddenFeatures>>,
}

impl Template {
    /// Capture the template from the first frame at the initial target
    /// state, precomputing a reference descriptor per discrete action.
    pub fn build(
        frame: &Frame,
        initial: &State,
        actions: &[[f64; 2]],
        geometry: &FoveaGeometry,
        rbm: &Rbm,
    ) -> Result<Self> {
        geometry.validate()?;
        if rbm.n_visible != geometry.len() {
            return Err(Error::DimensionMismatch {
                expected: geometry.len(),
                got: rbm.n_visible,
            });
        }
        let mut template = Template {
            frame: frame.clone(),
            initial: *initial,
            geometry: *geometry,
            rbm: rbm.clone(),
            discrete: Vec::with_capacity(actions.len()),
            continuous: Mutex::new(HashMap::new()),
        };
        for action in actions {
            let features = template.descriptor_at(*action)?;
            template.discrete.push(features);
        }
        Ok(template)
    }

    pub fn geometry(&self) -> &FoveaGeometry {
        &self.geometry
    }

    pub fn rbm(&self) -> &Rbm {
        &self.rbm
    }

    pub fn initial_state(&self) -> &State {
        &self.initial
    }

    fn descriptor_at(&self, offset: [f64; 2]) -> Result<HiddenFeatures> {
        let patch = glimpse(&self.frame, &self.initial, offset, &self.geometry);
        self.rbm.features(&patch)
    }

    /// Reference descriptor of discrete action `k`.
    pub fn reference_discrete(&self, k: usize) -> &HiddenFeatures {
        &self.discrete[k]
    }

    /// Reference descriptor at a continuous gaze offset. Offsets are
    /// quantised to half-pixel steps and cached, so repeated queries in
    /// a neighbourhood cost one RBM pass.
    pub fn reference_continuous(&self, offset: [f64; 2]) -> Result<HiddenFeatures> {
        let key = ((offset[0] * 2.0).round() as i64, (offset[1] * 2.0).round() as i64);
        if let Some(hit) = self.continuous.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let snapped = [key.0 as f64 / 2.0, key.1 as f64 / 2.0];
        let features = self.descriptor_at(snapped)?;
        self.continuous.lock().unwrap().insert(key, features.clone());
        Ok(features)
    }
}

/// Glimpse of `frame` for the hypothesis `state` fixating at `offset`
/// (template coordinates). The offset is scaled and rotated into frame
/// coordinates by the hypothesised pose, so the same offset looks at the
/// same part of the target whatever its position, scale, or orientation.
pub fn glimpse(
    frame: &Frame,
    state: &State,
    offset: [f64; 2],
    geometry: &FoveaGeometry,
) -> crate::appearance::foveate::FoveatedPatch {
    let scale = state.scale();
    let (sin, cos) = state.orientation.sin_cos();
    let center = [
        state.position[0] + scale * (cos * offset[0] - sin * offset[1]),
        state.position[1] + scale * (sin * offset[0] + cos * offset[1]),
    ];
    foveate(frame, center, scale, state.orientation, geometry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn features(activations: Vec<f64>) -> HiddenFeatures {
        HiddenFeatures { activations }
    }

    #[test]
    fn identical_descriptors_have_unit_likelihood() {
        let a = features(vec![0.3, 0.8, 0.5]);
        let lik = observation_likelihood(&a, &a.clone(), 0.05).unwrap();
        assert_relative_eq!(lik, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn two_unit_example_matches_hand_computation() {
        // Normalised activations (0.5, 0.5) against (0.9, 0.1):
        // overlap sqrt(0.45) + sqrt(0.05), distance sqrt(1 - overlap).
        let a = features(vec![0.5, 0.5]);
        let b = features(vec![0.9, 0.1]);
        let sum_p = 1.0;
        let sum_q = 1.0;
        let bc = (0.5f64 * 0.9 / (sum_p * sum_q)).sqrt() + (0.5f64 * 0.1).sqrt();
        assert_relative_eq!(bc, 0.894427, epsilon = 1e-6);
        let d = (1.0 - bc).sqrt();
        assert_relative_eq!(d, 0.324920, epsilon = 1e-6);
        let lik = observation_likelihood(&a, &b, 0.05).unwrap();
        assert_relative_eq!(lik, (-d / 0.05).exp(), epsilon = 1e-9);
    }

    #[test]
    fn likelihood_ignores_common_scaling() {
        // Sum normalisation makes the comparison invariant to a global
        // gain on either activation vector.
        let a = features(vec![0.2, 0.4, 0.1]);
        let scaled = features(vec![0.4, 0.8, 0.2]);
        let b = features(vec![0.5, 0.1, 0.9]);
        let l1 = observation_likelihood(&a, &b, 0.05).unwrap();
        let l2 = observation_likelihood(&scaled, &b, 0.05).unwrap();
        assert_relative_eq!(l1, l2, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let a = features(vec![0.5, 0.5]);
        let b = features(vec![0.5, 0.25, 0.25]);
        assert!(matches!(
            observation_likelihood(&a, &b, 0.05),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    fn test_frame() -> Frame {
        let mut frame = Frame::new(64, 64);
        for y in 20..44 {
            for x in 20..44 {
                frame.set(x, y, ((x + 2 * y) % 7) as f64 / 6.0);
            }
        }
        frame
    }

    #[test]
    fn template_reference_matches_glimpse_at_truth() {
        let frame = test_frame();
        let state = State::at([32.0, 32.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let geometry = FoveaGeometry { rings: 2, fovea: 4 };
        let rbm = Rbm::init_random(geometry.len(), 8, 0.3, &mut rng);
        let actions = [[0.0, 0.0], [4.0, 0.0], [-4.0, 4.0]];
        let template = Template::build(&frame, &state, &actions, &geometry, &rbm).unwrap();

        // A glimpse taken at the true state matches its reference. The
        // sqrt in the distance amplifies rounding of the overlap sum
        // near 1, so unit likelihood only holds to ~1e-6.
        for (k, action) in actions.iter().enumerate() {
            let observed = rbm.features(&glimpse(&frame, &state, *action, &geometry)).unwrap();
            let lik =
                observation_likelihood(&observed, template.reference_discrete(k), 0.05).unwrap();
            assert_relative_eq!(lik, 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn continuous_references_are_quantised_and_cached() {
        let frame = test_frame();
        let state = State::at([32.0, 32.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let geometry = FoveaGeometry { rings: 1, fovea: 4 };
        let rbm = Rbm::init_random(geometry.len(), 6, 0.3, &mut rng);
        let template = Template::build(&frame, &state, &[], &geometry, &rbm).unwrap();
        // 1.26 and 1.30 both round to 1.5 in half-pixel steps, -0.74 and
        // -0.70 both to -0.5, so the three queries share one reference.
        let a = template.reference_continuous([1.26, -0.74]).unwrap();
        let b = template.reference_continuous([1.30, -0.70]).unwrap();
        let snapped = template.reference_continuous([1.5, -0.5]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, snapped);
    }

    #[test]
    fn template_rejects_mismatched_rbm() {
        let frame = test_frame();
        let geometry = FoveaGeometry { rings: 1, fovea: 4 };
        let rbm = Rbm::zeros(geometry.len() + 1, 4);
        assert!(Template::build(&frame, &State::at([32.0, 32.0]), &[], &geometry, &rbm).is_err());
    }

    proptest! {
        #[test]
        fn likelihood_is_a_probability_weight(
            a in prop::collection::vec(0.01f64..1.0, 5),
            b in prop::collection::vec(0.01f64..1.0, 5),
        ) {
            let lik = observation_likelihood(&features(a), &features(b), 0.05).unwrap();
            prop_assert!(lik > 0.0 && lik <= 1.0);
        }
    }
}
