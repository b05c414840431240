//! DIRECT (DIviding RECTangles) global search over a 2-D box.
//!
//! The acquisition function inside the Bayesian-optimization policy has
//! to be maximized afresh every frame, with no gradients and a small
//! evaluation budget, and the whole tracker must stay deterministic
//! under a fixed seed. DIRECT fits exactly: it is derivative-free,
//! samples only rectangle centres, and contains no randomness. The
//! domain is normalized to the unit square; rectangles are trisected
//! along their longest sides, and a rectangle is divided when it is
//! potentially optimal, i.e. for some Lipschitz constant it could hold
//! the best value, with the classic epsilon guard against chasing
//! negligible improvements.

use crate::error::{Error, Result};

/// Guard on the potential-optimality test: a rectangle must promise an
/// improvement of at least this fraction of the best value.
const EPSILON: f64 = 1e-4;

/// Default evaluation budget per acquisition maximization.
pub const DEFAULT_DIRECT_BUDGET: usize = 300;

/// Axis-aligned search box for gaze offsets.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDomain {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl ActionDomain {
    /// Square box `[-half, half]^2` around the target centre.
    pub fn centered(half: f64) -> Self {
        ActionDomain { min: [-half, -half], max: [half, half] }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0..2).all(|d| {
            self.min[d].is_finite() && self.max[d].is_finite() && self.min[d] < self.max[d]
        });
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid("action domain must have positive extent".into()))
        }
    }

    pub fn side(&self, d: usize) -> f64 {
        self.max[d] - self.min[d]
    }

    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
        ]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|d| p[d] >= self.min[d] && p[d] <= self.max[d])
    }

    fn denormalize(&self, u: [f64; 2]) -> [f64; 2] {
        [
            self.min[0] + u[0] * self.side(0),
            self.min[1] + u[1] * self.side(1),
        ]
    }
}

/// Rectangle in the normalized unit square. Side `d` has length
/// `3^-levels[d]`.
#[derive(Debug, Clone)]
struct Rect {
    center: [f64; 2],
    levels: [i32; 2],
    /// Objective at the centre (internally minimized).
    value: f64,
}

impl Rect {
    fn half_diagonal(&self) -> f64 {
        let s0 = 3f64.powi(-self.levels[0]);
        let s1 = 3f64.powi(-self.levels[1]);
        0.5 * (s0 * s0 + s1 * s1).sqrt()
    }
}

/// Maximize `objective` over `domain` with at most `budget` evaluations.
/// Returns the best sampled point and its value. Fully deterministic:
/// the same objective, domain, and budget always produce the same
/// point, and a budget of 1 returns the domain centre.
pub fn direct_maximize<F: FnMut([f64; 2]) -> f64>(
    mut objective: F,
    domain: &ActionDomain,
    budget: usize,
) -> ([f64; 2], f64) {
    assert!(budget >= 1, "DIRECT needs at least one evaluation");
    domain.validate().expect("invalid action domain");
    // Internally minimize the negated objective.
    let mut evals = 0usize;
    let mut eval = |u: [f64; 2], evals: &mut usize| {
        *evals += 1;
        -objective(domain.denormalize(u))
    };

    let mut rects = vec![Rect {
        center: [0.5, 0.5],
        levels: [0, 0],
        value: eval([0.5, 0.5], &mut evals),
    }];
    // Strict comparisons below keep the earliest sample on ties.
    let mut best_point = [0.5, 0.5];
    let mut best_value = rects[0].value;

    'outer: while evals < budget {
        let selected = potentially_optimal(&rects, best_value);
        for rect_index in selected {
            // Longest sides carry the smallest trisection level.
            let min_level = rects[rect_index].levels[0].min(rects[rect_index].levels[1]);
            let long_dims: Vec<usize> =
                (0..2).filter(|&d| rects[rect_index].levels[d] == min_level).collect();

            // Sample centre +/- one third of the side along each longest
            // dimension, stopping cleanly if the budget runs out.
            let mut samples: Vec<(usize, [f64; 2], f64, [f64; 2], f64)> = Vec::new();
            let mut exhausted = false;
            for &d in &long_dims {
                let delta = 3f64.powi(-(min_level + 1));
                let mut plus = rects[rect_index].center;
                plus[d] += delta;
                let mut minus = rects[rect_index].center;
                minus[d] -= delta;
                if evals >= budget {
                    exhausted = true;
                    break;
                }
                let vp = eval(plus, &mut evals);
                if vp < best_value {
                    best_value = vp;
                    best_point = plus;
                }
                if evals >= budget {
                    exhausted = true;
                    break;
                }
                let vm = eval(minus, &mut evals);
                if vm < best_value {
                    best_value = vm;
                    best_point = minus;
                }
                samples.push((d, plus, vp, minus, vm));
            }
            let complete = !exhausted && samples.len() == long_dims.len();
            if complete {
                // Divide best-looking dimension first so its children
                // keep the larger remaining sides.
                samples.sort_by(|a, b| {
                    let wa = a.2.min(a.4);
                    let wb = b.2.min(b.4);
                    wa.partial_cmp(&wb).unwrap().then(a.0.cmp(&b.0))
                });
                let mut levels = rects[rect_index].levels;
                for (d, plus, vp, minus, vm) in samples {
                    levels[d] += 1;
                    rects.push(Rect { center: plus, levels, value: vp });
                    rects.push(Rect { center: minus, levels, value: vm });
                }
                rects[rect_index].levels = levels;
            }
            if exhausted {
                break 'outer;
            }
        }
    }
    (domain.denormalize(best_point), -best_value)
}

/// Indices of potentially optimal rectangles, ordered by increasing
/// half-diagonal. Per distinct diagonal only the lowest-valued (then
/// lowest-indexed) rectangle is a candidate.
fn potentially_optimal(rects: &[Rect], best_value: f64) -> Vec<usize> {
    use std::collections::BTreeMap;
    // Group by diagonal; f64 bits order positives like the values.
    let mut groups: BTreeMap<u64, usize> = BTreeMap::new();
    for (i, r) in rects.iter().enumerate() {
        let key = r.half_diagonal().to_bits();
        groups
            .entry(key)
            .and_modify(|held| {
                if r.value < rects[*held].value {
                    *held = i;
                }
            })
            .or_insert(i);
    }
    let candidates: Vec<(f64, usize)> = groups
        .into_iter()
        .map(|(bits, i)| (f64::from_bits(bits), i))
        .collect();

    let mut selected = Vec::new();
    for (pos, &(d_j, j)) in candidates.iter().enumerate() {
        let f_j = rects[j].value;
        // Steepest slope towards every smaller rectangle must not
        // exceed the shallowest slope towards a larger one.
        let mut max_left = f64::NEG_INFINITY;
        for &(d_i, i) in &candidates[..pos] {
            max_left = max_left.max((f_j - rects[i].value) / (d_j - d_i));
        }
        let mut min_right = f64::INFINITY;
        for &(d_i, i) in &candidates[pos + 1..] {
            min_right = min_right.min((rects[i].value - f_j) / (d_i - d_j));
        }
        if max_left > min_right {
            continue;
        }
        // Epsilon guard: dividing must be able to beat the incumbent by
        // a non-trivial margin. The largest rectangle always passes.
        if min_right.is_finite() {
            let promised = f_j - min_right * d_j;
            if promised > best_value - EPSILON * best_value.abs() {
                continue;
            }
        }
        selected.push(j);
    }
    selected
}
