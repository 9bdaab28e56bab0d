//! Hash-lattice value noise and its fractal sum.
//!
//! Lattice values are a pure function of `(ix, iy, octave, seed)`:
//!
//! ```text
//! key   = seed ^ (ix * 0x9E3779B97F4A7C15) ^ (iy * 0xC2B2AE3D27D4EB4F)
//!              ^ (octave * 0x165667B19E3779F9)          (wrapping u64 ops,
//!                                                         ix/iy as two's complement)
//! bits  = splitmix64_finalize(key)
//! value = (bits >> 11) / 2^53 * 2 - 1                    in [-1, 1)
//! ```
//!
//! Between lattice nodes the four corner values are blended with the quintic
//! fade `6t^5 - 15t^4 + 10t^3`. Octave `o` samples at `base_frequency * 2^o`
//! with weight `persistence^o`; the weighted sum is divided by the total
//! weight so the result stays in [-1, 1].

use crate::rng::mix64;

const KX: u64 = 0x9E37_79B9_7F4A_7C15;
const KY: u64 = 0xC2B2_AE3D_27D4_EB4F;
const KO: u64 = 0x1656_67B1_9E37_79F9;

pub fn lattice_value(ix: i64, iy: i64, octave: u32, seed: u64) -> f64 {
    let key = seed
        ^ (ix as u64).wrapping_mul(KX)
        ^ (iy as u64).wrapping_mul(KY)
        ^ u64::from(octave).wrapping_mul(KO);
    let bits = mix64(key) >> 11;
    (bits as f64) / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

pub fn value_noise(x: f64, y: f64, octave: u32, seed: u64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (ix, iy) = (x0 as i64, y0 as i64);
    let tx = fade(x - x0);
    let ty = fade(y - y0);
    let v00 = lattice_value(ix, iy, octave, seed);
    let v10 = lattice_value(ix + 1, iy, octave, seed);
    let v01 = lattice_value(ix, iy + 1, octave, seed);
    let v11 = lattice_value(ix + 1, iy + 1, octave, seed);
    lerp(lerp(v00, v10, tx), lerp(v01, v11, tx), ty)
}

/// Normalized fractal sum in [-1, 1].
pub fn fbm(x: f64, y: f64, base_frequency: f64, octaves: u32, persistence: f64, seed: u64) -> f64 {
    let mut sum = 0.0;
    let mut norm = 0.0;
    let mut amplitude = 1.0;
    let mut frequency = base_frequency;
    for o in 0..octaves {
        sum += amplitude * value_noise(x * frequency, y * frequency, o, seed);
        norm += amplitude;
        amplitude *= persistence;
        frequency *= 2.0;
    }
    if norm > 0.0 {
        sum / norm
    } else {
        0.0
    }
}
