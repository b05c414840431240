//! Multi-resolution glimpses built from concentric square rings.
//!
//! A glimpse is sampled on a template grid centred on the fixation
//! point. Ring 0, the fovea, reads a `fovea x fovea` grid of single
//! pixels. Each further ring `r` reads blocks of side `2^r` arranged in
//! the same `fovea x fovea` pattern with the central quarter cut out
//! (that area is already covered at finer resolution), so resolution
//! falls off with eccentricity while the field of view doubles per ring.
//! Template coordinates are scaled by the hypothesised target scale and
//! rotated by its orientation before reading the frame, which normalises
//! the glimpse to the target's reference pose.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;

/// Ring layout of a glimpse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoveaGeometry {
    /// Number of resolution rings, fovea included.
    pub rings: usize,
    /// Side of the fovea grid in blocks. Must be a multiple of four when
    /// there is more than one ring so the coarser rings tile cleanly
    /// around the fovea.
    pub fovea: usize,
}

impl Default for FoveaGeometry {
    fn default() -> Self {
        FoveaGeometry { rings: 3, fovea: 8 }
    }
}

impl FoveaGeometry {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rings >= 1
            && self.fovea >= 2
            && self.fovea.is_multiple_of(2)
            && (self.rings == 1 || self.fovea.is_multiple_of(4));
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!(
                "bad fovea geometry: rings={} fovea={}",
                self.rings, self.fovea
            )))
        }
    }

    /// Number of sample blocks, i.e. the glimpse vector length. The
    /// fovea contributes `fovea^2` blocks and every outer ring
    /// `fovea^2 - (fovea/2)^2`.
    pub fn len(&self) -> usize {
        let f = self.fovea;
        f * f + (self.rings - 1) * (f * f - (f / 2) * (f / 2))
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Half-width of the outermost ring in template pixels.
    pub fn span(&self) -> f64 {
        (self.fovea / 2) as f64 * (1u64 << (self.rings - 1)) as f64
    }

    /// Index of the block whose sample sits exactly on the fixation
    /// point.
    pub fn center_index(&self) -> usize {
        (self.fovea / 2) * self.fovea + self.fovea / 2
    }

    /// Enumerate blocks in the frozen order: ring by ring, row-major
    /// within a ring, skipping the central hole of outer rings. Yields
    /// `(ring, top_left_template_coords, block_side)`.
    fn blocks(&self) -> impl Iterator<Item = (usize, [i64; 2], i64)> + '_ {
        let f = self.fovea as i64;
        (0..self.rings).flat_map(move |ring| {
            let side = 1i64 << ring;
            let half = f / 2 * side;
            let hole = (f / 4, 3 * f / 4);
            (0..f)
                .flat_map(move |by| (0..f).map(move |bx| (bx, by)))
                .filter(move |&(bx, by)| {
                    ring == 0
                        || !(bx >= hole.0 && bx < hole.1 && by >= hole.0 && by < hole.1)
                })
                .map(move |(bx, by)| (ring, [bx * side - half, by * side - half], side))
        })
    }
}

/// One glimpse: block averages in the frozen enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct FoveatedPatch {
    pub values: Vec<f64>,
    pub geometry: FoveaGeometry,
}

/// Sample a glimpse of `frame` fixated at `center` (frame coordinates),
/// under the given target scale and orientation. Each block averages its
/// pixels with nearest-neighbour reads; reads outside the frame
/// contribute zero.
pub fn foveate(
    frame: &Frame,
    center: [f64; 2],
    scale: f64,
    orientation: f64,
    geometry: &FoveaGeometry,
) -> FoveatedPatch {
    let (sin, cos) = orientation.sin_cos();
    let mut values = Vec::with_capacity(geometry.len());
    for (_, [tx0, ty0], side) in geometry.blocks() {
        let mut sum = 0.0;
        for l in 0..side {
            for k in 0..side {
                let tx = (tx0 + k) as f64;
                let ty = (ty0 + l) as f64;
                let fx = center[0] + scale * (cos * tx - sin * ty);
                let fy = center[1] + scale * (sin * tx + cos * ty);
                sum += frame.sample_nearest(fx, fy);
            }
        }
        values.push(sum / (side * side) as f64);
    }
    FoveatedPatch { values, geometry: *geometry }
}
