//! 8x8 orthonormal DCT, uniform scalar quantization and quantizer plans.

use std::sync::OnceLock;

use thiserror::Error;

use crate::structure::{layer_quant_multiplier, Layer};

pub const OMEGA_MIN: f64 = 0.8;
pub const OMEGA_MAX: f64 = 1.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("quantizer step must be positive and finite, got {0}")]
    Step(f64),
    #[error("omega must lie in [0.8, 1.2], got {0}")]
    Omega(f64),
}

pub type CoefBlock = [f64; 64];
pub type Levels = [i32; 64];

/// `BASIS[k][n] = a(k) * cos((2n + 1) k pi / 16)`.
fn basis() -> &'static [[f64; 8]; 8] {
    static TABLE: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0.0; 8]; 8];
        for (k, row) in t.iter_mut().enumerate() {
            let a = if k == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
            for (n, v) in row.iter_mut().enumerate() {
                *v = a * (((2 * n + 1) * k) as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        t
    })
}

/// Raster-order 2-D DCT-II.
pub fn dct8_forward(block: &[f64; 64]) -> CoefBlock {
    let c = basis();
    let mut tmp = [0.0; 64];
    // rows
    for y in 0..8 {
        for k in 0..8 {
            let mut acc = 0.0;
            for n in 0..8 {
                acc += c[k][n] * block[y * 8 + n];
            }
            tmp[y * 8 + k] = acc;
        }
    }
    let mut out = [0.0; 64];
    // columns
    for x in 0..8 {
        for k in 0..8 {
            let mut acc = 0.0;
            for n in 0..8 {
                acc += c[k][n] * tmp[n * 8 + x];
            }
            out[k * 8 + x] = acc;
        }
    }
    out
}

pub fn dct8_inverse(coefs: &CoefBlock) -> [f64; 64] {
    let c = basis();
    let mut tmp = [0.0; 64];
    for x in 0..8 {
        for n in 0..8 {
            let mut acc = 0.0;
            for k in 0..8 {
                acc += c[k][n] * coefs[k * 8 + x];
            }
            tmp[n * 8 + x] = acc;
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for n in 0..8 {
            let mut acc = 0.0;
            for k in 0..8 {
                acc += c[k][n] * tmp[y * 8 + k];
            }
            out[y * 8 + n] = acc;
        }
    }
    out
}

fn check_step(step: f64) -> Result<(), QuantError> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(QuantError::Step(step))
    }
}

/// Uniform quantizer without dead zone: `round_half_away(coef / step)`.
pub fn quantize(coefs: &CoefBlock, step: f64) -> Result<Levels, QuantError> {
    check_step(step)?;
    let mut levels = [0i32; 64];
    for (l, &c) in levels.iter_mut().zip(coefs) {
        *l = (c / step).round() as i32;
    }
    Ok(levels)
}

pub fn dequantize(levels: &Levels, step: f64) -> Result<CoefBlock, QuantError> {
    check_step(step)?;
    let mut coefs = [0.0; 64];
    for (c, &l) in coefs.iter_mut().zip(levels) {
        *c = l as f64 * step;
    }
    Ok(coefs)
}

/// Quantizer step of one frame: `base_step * layer_multiplier / omega`.
///
/// The encoder divides by this step and the decoder multiplies by it, so a
/// larger omega gives finer quantization on both sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantPlan {
    pub base_step: f64,
    pub layer_multiplier: f64,
    pub omega: f64,
    pub effective_step: f64,
}

pub fn make_quant_plan(
    base_step: f64,
    layer_multiplier: f64,
    omega: f64,
) -> Result<QuantPlan, QuantError> {
    check_step(base_step)?;
    check_step(layer_multiplier)?;
    if !(OMEGA_MIN..=OMEGA_MAX).contains(&omega) {
        return Err(QuantError::Omega(omega));
    }
    let effective_step = base_step * layer_multiplier / omega;
    check_step(effective_step)?;
    Ok(QuantPlan {
        base_step,
        layer_multiplier,
        omega,
        effective_step,
    })
}

pub fn make_layer_quant_plan(base_step: f64, layer: Layer, omega: f64) -> Result<QuantPlan, QuantError> {
    make_quant_plan(base_step, layer_quant_multiplier(layer), omega)
}
