//! Deterministic seven-segment digit renderer used when no MNIST files are available.

use alloc::vec::Vec;

use rand::Rng;

use crate::numerics::Tensor;

pub const GLYPH_SIZE: usize = 28;

// Segment order: a (top), b (upper right), c (lower right), d (bottom),
// e (lower left), f (upper left), g (middle).
const SEGMENTS: [[bool; 7]; 10] = [
    [true, true, true, true, true, true, false],
    [false, true, true, false, false, false, false],
    [true, true, false, true, true, false, true],
    [true, true, true, true, false, false, true],
    [false, true, true, false, false, true, true],
    [true, false, true, true, false, true, true],
    [true, false, true, true, true, true, true],
    [true, true, true, false, false, false, false],
    [true, true, true, true, true, true, true],
    [true, true, true, true, false, true, true],
];

fn segments_for<R: Rng>(digit: usize, rng: &mut R) -> [bool; 7] {
    let mut s = SEGMENTS[digit];
    // Common handwritten variants.
    match digit {
        1 if rng.random_bool(0.3) => s = [false, false, false, false, true, true, false],
        6 if rng.random_bool(0.3) => s[0] = false,
        7 if rng.random_bool(0.3) => s[5] = true,
        9 if rng.random_bool(0.3) => s[3] = false,
        _ => {}
    }
    s
}

fn dist_to_segment(p: (f32, f32), a: (f32, f32), b: (f32, f32)) -> f32 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let (wx, wy) = (p.0 - a.0, p.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 { ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (dx, dy) = (p.0 - (a.0 + t * vx), p.1 - (a.1 + t * vy));
    libm::sqrtf(dx * dx + dy * dy)
}

/// Renders one `28 × 28` digit with random placement, size, slant, stroke
/// width, corner jitter and pixel noise. Intensities lie in [0, 1].
pub fn render_glyph<R: Rng>(digit: usize, rng: &mut R) -> Tensor {
    assert!(digit < 10, "digit {digit} out of range");
    let cx = 14.0 + rng.random_range(-2.5f32..2.5);
    let cy = 14.0 + rng.random_range(-2.0f32..2.0);
    let half_w = rng.random_range(4.5f32..7.0);
    let half_h = rng.random_range(8.0f32..10.5);
    let thickness = rng.random_range(1.6f32..3.4);
    let slant = rng.random_range(-0.25f32..0.25);
    let peak = rng.random_range(0.8f32..1.0);
    let mut corner = |x: f32, y: f32| {
        let jx = rng.random_range(-0.8f32..0.8);
        let jy = rng.random_range(-0.8f32..0.8);
        let y = y + jy;
        (x + jx + slant * (cy - y), y)
    };
    let tl = corner(cx - half_w, cy - half_h);
    let tr = corner(cx + half_w, cy - half_h);
    let ml = corner(cx - half_w, cy);
    let mr = corner(cx + half_w, cy);
    let bl = corner(cx - half_w, cy + half_h);
    let br = corner(cx + half_w, cy + half_h);
    let ends = [(tl, tr), (tr, mr), (mr, br), (bl, br), (ml, bl), (tl, ml), (ml, mr)];
    let active: Vec<_> = segments_for(digit, rng).iter().zip(ends).filter(|(on, _)| **on).map(|(_, e)| e).collect();
    let mut data = Vec::with_capacity(GLYPH_SIZE * GLYPH_SIZE);
    for py in 0..GLYPH_SIZE {
        for px in 0..GLYPH_SIZE {
            let p = (px as f32 + 0.5, py as f32 + 0.5);
            let d = active.iter().map(|&(a, b)| dist_to_segment(p, a, b)).fold(f32::INFINITY, f32::min);
            let ink = (thickness / 2.0 + 0.5 - d).clamp(0.0, 1.0) * peak;
            let noise = rng.random_range(-0.05f32..0.05);
            data.push((ink + noise).clamp(0.0, 1.0));
        }
    }
    Tensor::new(&[GLYPH_SIZE, GLYPH_SIZE], data).expect("fixed size")
}
