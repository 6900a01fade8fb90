//! Seeded synthetic test sequences: a textured base picture translated with
//! wraparound, plus clamped Gaussian noise.
//!
//! Randomness comes from xoshiro256** seeded through SplitMix64
//! (`seed_from_u64`). Uniforms take the top 53 bits of each output. Normals
//! use the cosine branch of Box-Muller with `u1 = 1 - uniform`, consuming two
//! uniforms per sample.

use std::f64::consts::TAU;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

use crate::frame::{clamp_pixel, Frame, FrameRate, Sequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    Gradient,
    Checker,
    Mixed,
}

impl Pattern {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gradient" => Some(Pattern::Gradient),
            "checker" => Some(Pattern::Checker),
            "mixed" => Some(Pattern::Mixed),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Gradient => "gradient",
            Pattern::Checker => "checker",
            Pattern::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    /// Translation in pixels per frame.
    pub motion: (i32, i32),
    pub noise_sigma: f64,
    pub pattern: Pattern,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            width: 64,
            height: 64,
            n_frames: 33,
            motion: (1, 0),
            noise_sigma: 2.0,
            pattern: Pattern::Mixed,
        }
    }
}

pub struct Rng(Xoshiro256StarStar);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(Xoshiro256StarStar::seed_from_u64(seed))
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.0.next_u64() % n
    }
}

fn gradient(rng: &mut Rng, w: usize, h: usize) -> Vec<f64> {
    let (gx, gy) = (40.0 + 60.0 * rng.uniform(), 40.0 + 60.0 * rng.uniform());
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                (1 + rng.below(4)) as f64,
                (1 + rng.below(4)) as f64,
                TAU * rng.uniform(),
                10.0 + 20.0 * rng.uniform(),
            )
        })
        .collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64 / w as f64, y as f64 / h as f64);
            let mut v = 128.0 + gx * (fx - 0.5) + gy * (fy - 0.5);
            for &(kx, ky, ph, amp) in &waves {
                v += amp * (TAU * (kx * fx + ky * fy) + ph).sin();
            }
            out.push(v);
        }
    }
    out
}

fn checker(rng: &mut Rng, w: usize, h: usize) -> Vec<f64> {
    let cell = 4 + rng.below(9) as usize;
    let cols = w.div_ceil(cell);
    let rows = h.div_ceil(cell);
    let levels: Vec<f64> = (0..cols * rows)
        .map(|i| {
            let parity = ((i % cols) + (i / cols)) % 2;
            let base = if parity == 0 { 70.0 } else { 185.0 };
            base + 40.0 * (rng.uniform() - 0.5)
        })
        .collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(levels[(y / cell) * cols + x / cell]);
        }
    }
    out
}

fn mixed(rng: &mut Rng, w: usize, h: usize) -> Vec<f64> {
    let g = gradient(rng, w, h);
    let c = checker(rng, w, h);
    let mut out: Vec<f64> = g.iter().zip(&c).map(|(a, b)| 0.6 * a + 0.4 * b).collect();
    // a few flat discs
    for _ in 0..1 + rng.below(4) {
        let cx = rng.uniform() * w as f64;
        let cy = rng.uniform() * h as f64;
        let r = 3.0 + rng.uniform() * (w.min(h) as f64 / 4.0);
        let v = 30.0 + 200.0 * rng.uniform();
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if dx * dx + dy * dy <= r * r {
                    out[y * w + x] = v;
                }
            }
        }
    }
    out
}

/// Frame `t` is the base picture shifted by `t * motion` (wrapping at the
/// edges) plus independent noise.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Sequence {
    let (w, h) = (spec.width.max(1), spec.height.max(1));
    let mut rng = Rng::new(spec.seed);
    let base = match spec.pattern {
        Pattern::Gradient => gradient(&mut rng, w, h),
        Pattern::Checker => checker(&mut rng, w, h),
        Pattern::Mixed => mixed(&mut rng, w, h),
    };
    let (mx, my) = (spec.motion.0 as i64, spec.motion.1 as i64);
    let frames = (0..spec.n_frames)
        .map(|t| {
            let (ox, oy) = (t as i64 * mx, t as i64 * my);
            let mut luma = Vec::with_capacity(w * h);
            for y in 0..h {
                let sy = (y as i64 - oy).rem_euclid(h as i64) as usize;
                for x in 0..w {
                    let sx = (x as i64 - ox).rem_euclid(w as i64) as usize;
                    let mut v = base[sy * w + sx];
                    if spec.noise_sigma > 0.0 {
                        v += spec.noise_sigma * rng.normal();
                    }
                    luma.push(clamp_pixel(v));
                }
            }
            Frame::new(w, h, luma).expect("non-empty plane")
        })
        .collect();
    Sequence::new(frames, FrameRate::default()).expect("frames share dimensions")
}
