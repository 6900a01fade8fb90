//! Block-level syntax and reconstruction shared by encoder and decoder.

use crate::entropy::{ContextSet, EntropyError, SyntaxReader, SyntaxWriter, ZIGZAG};
use crate::frame::clamp_pixel;
use crate::motion::{exp_golomb_len, MotionVector, PredMode, MB_AREA, MB_SIZE, MV_RANGE};
use crate::transform::{dct8_forward, dct8_inverse, dequantize, quantize, Levels};

/// Step scale of each per-block step index. Index 3 is reserved.
pub const STEP_SCALES: [f64; 3] = [1.0, 0.75, 0.5];

/// Step index of a lookahead multiplier: rounded to a quarter, floored at 0.5.
pub fn step_index_for_multiplier(m: f64) -> u8 {
    let q = ((m * 4.0).round() / 4.0).clamp(0.5, 1.0);
    if q >= 1.0 {
        0
    } else if q >= 0.75 {
        1
    } else {
        2
    }
}

pub(crate) fn write_step_index(w: &mut SyntaxWriter, ctx: &mut ContextSet, idx: u8) {
    w.bit(&mut ctx.step[0], idx != 0);
    if idx != 0 {
        w.bit(&mut ctx.step[1], idx == 2);
    }
}

pub(crate) fn read_step_index(r: &mut SyntaxReader, ctx: &mut ContextSet) -> Result<u8, EntropyError> {
    if !r.bit(&mut ctx.step[0])? {
        return Ok(0);
    }
    Ok(if r.bit(&mut ctx.step[1])? { 2 } else { 1 })
}

pub(crate) fn write_mode(w: &mut SyntaxWriter, ctx: &mut ContextSet, mode: PredMode, two_refs: bool) {
    w.bit(&mut ctx.mode[0], mode == PredMode::Adj);
    if mode == PredMode::Adj {
        return;
    }
    if two_refs {
        w.bit(&mut ctx.mode[1], mode == PredMode::Key);
        if mode != PredMode::Key {
            w.bit(&mut ctx.mode[2], mode == PredMode::Avg);
        }
    } else {
        debug_assert_eq!(mode, PredMode::IntraDc);
    }
}

pub(crate) fn read_mode(
    r: &mut SyntaxReader,
    ctx: &mut ContextSet,
    two_refs: bool,
) -> Result<PredMode, EntropyError> {
    if r.bit(&mut ctx.mode[0])? {
        return Ok(PredMode::Adj);
    }
    if !two_refs {
        return Ok(PredMode::IntraDc);
    }
    if r.bit(&mut ctx.mode[1])? {
        return Ok(PredMode::Key);
    }
    Ok(if r.bit(&mut ctx.mode[2])? {
        PredMode::Avg
    } else {
        PredMode::IntraDc
    })
}

fn write_mvd_component(w: &mut SyntaxWriter, ctx: &mut ContextSet, v: i32, axis: usize) {
    w.bit(&mut ctx.mv[axis], v != 0);
    if v == 0 {
        return;
    }
    w.bit(&mut ctx.mv[2], v < 0);
    let mag = v.unsigned_abs();
    w.bit(&mut ctx.mv[3], mag > 1);
    if mag > 1 {
        w.ue(mag - 2);
    }
}

fn read_mvd_component(r: &mut SyntaxReader, ctx: &mut ContextSet, axis: usize) -> Result<i64, EntropyError> {
    if !r.bit(&mut ctx.mv[axis])? {
        return Ok(0);
    }
    let negative = r.bit(&mut ctx.mv[2])?;
    let mag = if r.bit(&mut ctx.mv[3])? {
        r.ue()? as i64 + 2
    } else {
        1
    };
    Ok(if negative { -mag } else { mag })
}

pub(crate) fn write_mv(w: &mut SyntaxWriter, ctx: &mut ContextSet, mv: MotionVector, pred: MotionVector) {
    write_mvd_component(w, ctx, mv.dx - pred.dx, 0);
    write_mvd_component(w, ctx, mv.dy - pred.dy, 1);
}

pub(crate) fn read_mv(
    r: &mut SyntaxReader,
    ctx: &mut ContextSet,
    pred: MotionVector,
) -> Result<MotionVector, EntropyError> {
    let dx = pred.dx as i64 + read_mvd_component(r, ctx, 0)?;
    let dy = pred.dy as i64 + read_mvd_component(r, ctx, 1)?;
    let range = MV_RANGE as i64;
    if dx.abs() > range || dy.abs() > range {
        return Err(EntropyError::Malformed("motion vector out of range"));
    }
    Ok(MotionVector::new(dx as i32, dy as i32))
}

/// Rough bin count of a coded coefficient block.
pub(crate) fn estimate_coef_bits(levels: &Levels) -> f64 {
    let Some(last) = (0..64).rev().find(|&i| levels[ZIGZAG[i]] != 0) else {
        return 1.0;
    };
    let mut bits = 1.0 + (last + 1) as f64;
    for pos in 0..=last {
        let mag = levels[ZIGZAG[pos]].unsigned_abs();
        if mag > 0 {
            bits += 3.0;
            if mag > 1 {
                bits += exp_golomb_len(mag - 2) as f64;
            }
        }
    }
    bits
}

/// Origins of the four 8x8 sub-blocks of a macroblock, in raster order.
pub(crate) const SUB_BLOCKS: [(usize, usize); 4] = [(0, 0), (8, 0), (0, 8), (8, 8)];

/// Quantized residual of one 8x8 sub-block of a macroblock.
pub(crate) fn residual_levels(cur: &[u8; MB_AREA], pred: &[u8; MB_AREA], sub: (usize, usize), step: f64) -> Levels {
    let mut res = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            let i = (sub.1 + y) * MB_SIZE + sub.0 + x;
            res[y * 8 + x] = cur[i] as f64 - pred[i] as f64;
        }
    }
    quantize(&dct8_forward(&res), step).expect("block step is validated by the frame plan")
}

/// Writes `pred + dequantized residual` of one sub-block into `out`.
pub(crate) fn reconstruct_sub_block(
    pred: &[u8; MB_AREA],
    levels: &Levels,
    sub: (usize, usize),
    step: f64,
    out: &mut [u8; MB_AREA],
) {
    if levels.iter().all(|&l| l == 0) {
        for y in 0..8 {
            let i = (sub.1 + y) * MB_SIZE + sub.0;
            out[i..i + 8].copy_from_slice(&pred[i..i + 8]);
        }
        return;
    }
    let res = dct8_inverse(&dequantize(levels, step).expect("block step is validated by the frame plan"));
    for y in 0..8 {
        for x in 0..8 {
            let i = (sub.1 + y) * MB_SIZE + sub.0 + x;
            out[i] = clamp_pixel(pred[i] as f64 + res[y * 8 + x]);
        }
    }
}

pub(crate) fn intra_levels(samples: &[f64; 64], step: f64) -> Levels {
    quantize(&dct8_forward(samples), step).expect("intra step is validated by the frame plan")
}

pub(crate) fn intra_reconstruct(levels: &Levels, step: f64) -> [u8; 64] {
    let r = dct8_inverse(&dequantize(levels, step).expect("intra step is validated by the frame plan"));
    let mut out = [0u8; 64];
    for (o, v) in out.iter_mut().zip(r) {
        *o = clamp_pixel(v);
    }
    out
}
