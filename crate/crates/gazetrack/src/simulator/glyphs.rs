//! Built-in 28x28 digit glyphs.
//!
//! Ten blocky digits drawn on a 14x14 grid and upscaled 2x. Strokes are
//! four pixels wide so they survive foveated averaging, and the corners
//! stay blank so off-target fixations see mostly background.

use crate::error::{Error, Result};
use crate::frame::Frame;

/// Side of a glyph bitmap in pixels.
pub const GLYPH_SIDE: usize = 28;

const ART_SIDE: usize = 14;

#[rustfmt::skip]
const DIGIT_ART: [[&str; ART_SIDE]; 10] = [
    [ // 0
        "..............",
        "...########...",
        "...########...",
        "...##....##...",
        "...##....##...",
        "...##....##...",
        "...##....##...",
        "...##....##...",
        "...##....##...",
        "...##....##...",
        "...##....##...",
        "...########...",
        "...########...",
        "..............",
    ],
    [ // 1
        "..............",
        "......##......",
        ".....###......",
        "....####......",
        "......##......",
        "......##......",
        "......##......",
        "......##......",
        "......##......",
        "......##......",
        "......##......",
        "....######....",
        "....######....",
        "..............",
    ],
    [ // 2
        "..............",
        "...#######....",
        "...########...",
        ".........##...",
        ".........##...",
        ".........##...",
        "....#######...",
        "...#######....",
        "...##.........",
        "...##.........",
        "...##.........",
        "...########...",
        "...########...",
        "..............",
    ],
    [ // 3
        "..............",
        "...########...",
        "...########...",
        ".........##...",
        ".........##...",
        ".....######...",
        ".....######...",
        ".........##...",
        ".........##...",
        ".........##...",
        ".........##...",
        "...########...",
        "...########...",
        "..............",
    ],
    [ // 4
        "..............",
        "...##....##...",
        "...##....##...",
        "...##....##...",
        "...##....##...",
        "...##....##...",
        "...########...",
        "...########...",
        ".........##...",
        ".........##...",
        ".........##...",
        ".........##...",
        ".........##...",
        "..............",
    ],
    [ // 5
        "..............",
        "...########...",
        "...########...",
        "...##.........",
        "...##.........",
        "...#######....",
        "...########...",
        ".........##...",
        ".........##...",
        ".........##...",
        ".........##...",
        "...########...",
        "...########...",
        "..............",
    ],
    [ // 6
        "..............",
        "...########...",
        "...########...",
        "...##.........",
        "...##.........",
        "...########...",
        "...########...",
        "...##....##...",
        "...##....##...",
        "...##....##...",
        "...##....##...",
        "...########...",
        "...########...",
        "..............",
    ],
    [ // 7
        "..............",
        "...########...",
        "...########...",
        ".........##...",
        ".........##...",
        "........##....",
        ".......##.....",
        "......##......",
        "......##......",
        ".....##.......",
        ".....##.......",
        "....##........",
        "....##........",
        "..............",
    ],
    [ // 8
        "..............",
        "...########...",
        "...########...",
        "...##....##...",
        "...##....##...",
        "...########...",
        "...########...",
        "...##....##...",
        "...##....##...",
        "...##....##...",
        "...##....##...",
        "...########...",
        "...########...",
        "..............",
    ],
    [ // 9
        "..............",
        "...########...",
        "...########...",
        "...##....##...",
        "...##....##...",
        "...########...",
        "...########...",
        ".........##...",
        ".........##...",
        ".........##...",
        ".........##...",
        "...########...",
        "...########...",
        "..............",
    ],
];

fn rasterize(art: &[&str; ART_SIDE]) -> Frame {
    let mut frame = Frame::new(GLYPH_SIDE, GLYPH_SIDE);
    for (row, line) in art.iter().enumerate() {
        debug_assert_eq!(line.len(), ART_SIDE);
        for (col, ch) in line.bytes().enumerate() {
            if ch == b'#' {
                for dy in 0..2 {
                    for dx in 0..2 {
                        frame.set(col * 2 + dx, row * 2 + dy, 1.0);
                    }
                }
            }
        }
    }
    frame
}

/// A bank of equally sized glyph bitmaps addressed by class index.
#[derive(Debug, Clone)]
pub struct GlyphStore {
    glyphs: Vec<Frame>,
}

impl GlyphStore {
    /// The ten built-in digits, index = digit.
    pub fn builtin() -> Self {
        GlyphStore { glyphs: DIGIT_ART.iter().map(rasterize).collect() }
    }

    pub fn from_frames(glyphs: Vec<Frame>) -> Result<Self> {
        if glyphs.is_empty() {
            return Err(Error::ConfigInvalid("glyph store must not be empty".into()));
        }
        let (w, h) = (glyphs[0].width, glyphs[0].height);
        if glyphs.iter().any(|g| g.width != w || g.height != h) {
            return Err(Error::ConfigInvalid("glyphs must share one size".into()));
        }
        Ok(GlyphStore { glyphs })
    }

    pub fn len(&self) -> usize {
        self.glyphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glyphs.is_empty()
    }

    pub fn glyph(&self, index: usize) -> Result<&Frame> {
        self.glyphs
            .get(index)
            .ok_or_else(|| Error::SpecOutOfBounds(format!("glyph index {index}")))
    }

    pub fn glyph_width(&self) -> usize {
        self.glyphs[0].width
    }

    pub fn glyph_height(&self) -> usize {
        self.glyphs[0].height
    }
}
