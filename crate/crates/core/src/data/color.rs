//! Fixed color tables and the intensity blend used to colorize digits.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const PALETTE_VERSION: u32 = 1;

pub type Rgb = [f32; 3];

/// Background colors, 1-based index order.
pub const BACKGROUNDS: [Rgb; 10] = [
    [0.90, 0.10, 0.10], // red
    [0.10, 0.75, 0.20], // green
    [0.10, 0.20, 0.90], // blue
    [0.95, 0.90, 0.10], // yellow
    [0.95, 0.45, 0.75], // pink
    [0.10, 0.85, 0.90], // cyan
    [1.00, 0.55, 0.00], // orange
    [0.55, 0.15, 0.75], // purple
    [0.50, 0.50, 0.50], // gray
    [0.55, 0.35, 0.15], // brown
];

/// Foreground colors, 1-based index order.
pub const FOREGROUNDS: [Rgb; 10] = [
    [1.00, 1.00, 1.00], // white
    [0.00, 0.00, 0.00], // black
    [0.00, 0.00, 0.50], // navy
    [0.50, 0.00, 0.00], // maroon
    [1.00, 1.00, 0.00], // yellow
    [0.00, 0.35, 0.00], // dark green
    [0.00, 0.50, 0.50], // teal
    [1.00, 0.50, 0.00], // orange
    [0.30, 0.00, 0.50], // indigo
    [0.80, 0.80, 0.80], // silver
];

pub const GREEN: usize = 2;
pub const PINK: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Palettes {
    pub backgrounds: [Rgb; 10],
    pub foregrounds: [Rgb; 10],
}

impl Default for Palettes {
    fn default() -> Self {
        Self { backgrounds: BACKGROUNDS, foregrounds: FOREGROUNDS }
    }
}

/// Blends `fg` over `bg` by gray intensity: `g·fg + (1-g)·bg` per channel.
/// `gray` is `h × w`; the result is `3 × h × w`.
pub fn colorize(gray: &Tensor, bg_index: usize, fg_index: usize, palettes: &Palettes) -> Result<Tensor> {
    if gray.rank() != 2 {
        return Err(Error::Dimension(format!("gray image must be h × w, got {:?}", gray.shape())));
    }
    for (what, idx) in [("background", bg_index), ("foreground", fg_index)] {
        if !(1..=10).contains(&idx) {
            return Err(Error::Range(format!("{what} index {idx} outside 1..=10")));
        }
    }
    let bg = palettes.backgrounds[bg_index - 1];
    let fg = palettes.foregrounds[fg_index - 1];
    let (h, w) = (gray.shape()[0], gray.shape()[1]);
    let mut out = Vec::with_capacity(3 * h * w);
    for c in 0..3 {
        out.extend(gray.data().iter().map(|&g| {
            let g = g.clamp(0.0, 1.0);
            g * fg[c] + (1.0 - g) * bg[c]
        }));
    }
    Tensor::new(&[3, h, w], out)
}
