use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use super::bitstream::{omega_to_q8, FrameHeader, SequenceHeader, NO_LAYER, OMEGA_Q_ONE};
use super::block::{
    estimate_coef_bits, intra_levels, intra_reconstruct, reconstruct_sub_block, residual_levels, write_mode, write_mv,
    write_step_index, STEP_SCALES, SUB_BLOCKS,
};
use super::{
    lookahead_weights, step_index_for_multiplier, CodecConfig, CodecError, CodingParams, DecodedPictureBuffer,
    EncodeOutput, FrameStats, OmegaMode,
};
use crate::entropy::{ContextSet, SyntaxWriter};
use crate::frame::{pad_to_multiple, Frame, Sequence};
use crate::metrics::{mse, psnr_from_mse};
use crate::motion::{
    causal_dc, predict_multi_ref, predict_mv, BlockPrediction, MotionField, MotionVector, PredMode,
    PredictionContext, SearchPlane, sse_blocks, MB_AREA, MB_SIZE,
};
use crate::structure::{FrameSchedule, FrameType, LayerId};
use crate::transform::OMEGA_MIN;

fn milli<T: TryFrom<u64>>(name: &str, v: f64) -> Result<T, CodecError> {
    let m = (v * 1000.0).round();
    if !(m >= 1.0 && m <= u64::MAX as f64) {
        return Err(CodecError::InvalidConfig(format!("{name} {v} is not representable")));
    }
    T::try_from(m as u64).map_err(|_| CodecError::InvalidConfig(format!("{name} {v} is too large")))
}

fn sequence_header(seq: &Sequence, config: &CodecConfig) -> Result<SequenceHeader, CodecError> {
    let (w, h) = seq.dims().ok_or(CodecError::EmptySequence)?;
    let fr = seq.frame_rate;
    let s = &config.structure;
    let mut weights_milli = [0u16; 4];
    for (m, &w) in weights_milli.iter_mut().zip(&s.weights) {
        *m = milli("layer weight", w)?;
    }
    Ok(SequenceHeader {
        width: u32::try_from(w).map_err(|_| CodecError::InvalidConfig("width".into()))?,
        height: u32::try_from(h).map_err(|_| CodecError::InvalidConfig("height".into()))?,
        frame_count: u32::try_from(seq.len()).map_err(|_| CodecError::InvalidConfig("frame count".into()))?,
        base_step_milli: milli("base step", s.base_step)?,
        weights_milli,
        intra_period: s.intra_period,
        lookahead: config.lookahead_active(),
        omega_mode: match config.omega_mode {
            OmegaMode::Off => 0,
            OmegaMode::RandomKey => 1,
        },
        single_reference: !s.multi_reference,
        intra_weight_milli: milli("intra weight", s.intra_weight)?,
        fps_num: u16::try_from(fr.num).unwrap_or(u16::MAX),
        fps_den: u16::try_from(fr.den.max(1)).unwrap_or(u16::MAX),
    })
}

/// Codes every frame of `seq`. The returned reconstructions are exactly what
/// [`super::decode_sequence`] produces from the returned bitstream.
pub fn encode_sequence(seq: &Sequence, config: &CodecConfig) -> Result<EncodeOutput, CodecError> {
    if seq.is_empty() {
        return Err(CodecError::EmptySequence);
    }
    config.validate()?;
    let header = sequence_header(seq, config)?;
    let params = CodingParams::from_header(&header, config.structure.lambda_base)?;
    let lambda_base = config.structure.lambda_base;

    let padded: Vec<Frame> = seq
        .frames()
        .iter()
        .map(|f| pad_to_multiple(&f.luma_only(), MB_SIZE))
        .collect();

    let mut rng = Xoshiro256StarStar::seed_from_u64(config.random_omega_seed.unwrap_or(0));
    let mut out = Vec::new();
    header.write(&mut out);
    let mut dpb = DecodedPictureBuffer::default();
    let mut reconstructions = Vec::with_capacity(seq.len());
    let mut stats = Vec::with_capacity(seq.len());

    for (index, entry) in params.schedule.iter().enumerate() {
        let layer = entry.layer_id();
        let (omega_drawn, omega_q8) = match (config.omega_mode, layer) {
            (OmegaMode::RandomKey, Some(LayerId::Key)) => {
                let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                let w = OMEGA_MIN + 0.4 * u;
                (w, omega_to_q8(w))
            }
            _ => (1.0, OMEGA_Q_ONE),
        };
        let step = params.frame_step(index, omega_q8);
        let cur = &padded[index];

        let (payload, recon, mode_counts) = match entry.frame_type {
            FrameType::Intra => {
                let (p, r) = encode_intra_frame(cur, step);
                (p, r, [0; 4])
            }
            FrameType::Inter => {
                let step_indices = if config.lookahead_active() && index + 1 < padded.len() {
                    lookahead_weights(cur, &padded[index + 1], config.lookahead_strength)?
                        .into_iter()
                        .map(step_index_for_multiplier)
                        .collect()
                } else {
                    vec![0u8; (cur.width() / MB_SIZE) * (cur.height() / MB_SIZE)]
                };
                let o = encode_inter_frame(cur, entry, &dpb, step, &step_indices, lambda_base)?;
                let counts = o.field.mode_counts();
                (o.payload, o.reconstruction, counts)
            }
        };

        FrameHeader {
            frame_type: entry.frame_type,
            layer: layer.map_or(NO_LAYER, LayerId::as_u8),
            omega_q8,
            payload_len: payload.len() as u32,
        }
        .write(&mut out);
        out.extend_from_slice(&payload);

        dpb.update(entry, &recon);
        let cropped = recon.crop(params.width, params.height)?;
        let err = mse(&seq.frames()[index].luma_only(), &cropped).expect("dimensions match");
        stats.push(FrameStats {
            index,
            frame_type: entry.frame_type,
            layer,
            omega: super::bitstream::omega_from_q8(omega_q8),
            omega_drawn,
            bits: (super::bitstream::FRAME_HEADER_LEN + payload.len()) as u64 * 8,
            payload_bytes: payload.len(),
            step,
            mse: err,
            psnr: psnr_from_mse(err),
            mode_counts,
        });
        reconstructions.push(cropped);
    }

    Ok(EncodeOutput {
        header,
        bitstream: out,
        reconstructions,
        stats,
    })
}

/// Codes a frame without prediction: 8x8 DCT of the samples, quantized at
/// `step`. `frame` dimensions must be multiples of 8.
pub fn encode_intra_frame(frame: &Frame, step: f64) -> (Vec<u8>, Frame) {
    let (w, h) = (frame.width(), frame.height());
    assert!(w % 8 == 0 && h % 8 == 0, "intra frames are coded on an 8x8 grid");
    let mut ctx = ContextSet::new();
    let mut wr = SyntaxWriter::new();
    let mut recon = vec![0u8; w * h];
    let mut samples = [0.0; 64];
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            for y in 0..8 {
                for (x, v) in frame.row(by + y)[bx..bx + 8].iter().enumerate() {
                    samples[y * 8 + x] = *v as f64;
                }
            }
            let levels = intra_levels(&samples, step);
            wr.coef_block(&mut ctx, &levels);
            let r = intra_reconstruct(&levels, step);
            for y in 0..8 {
                recon[(by + y) * w + bx..(by + y) * w + bx + 8].copy_from_slice(&r[y * 8..y * 8 + 8]);
            }
        }
    }
    (wr.finish(), Frame::new(w, h, recon).expect("dimensions are preserved"))
}

fn sub_block_sse(a: &[u8; MB_AREA], b: &[u8; MB_AREA], sub: (usize, usize)) -> u64 {
    let mut sse = 0u64;
    for y in 0..8 {
        let i = (sub.1 + y) * MB_SIZE + sub.0;
        sse += sse_blocks(&a[i..i + 8], &b[i..i + 8]);
    }
    sse
}

#[derive(Debug, Clone)]
pub struct InterFrameOutput {
    /// Empty when the frame is an exact copy of the previous reconstruction.
    pub payload: Vec<u8>,
    pub reconstruction: Frame,
    pub field: MotionField,
}

/// Codes one inter frame against the references in `dpb`.
///
/// `step_indices` holds one per-block step index (into [`STEP_SCALES`]) per
/// 16x16 block in raster order. `frame` dimensions must be multiples of 16.
pub fn encode_inter_frame(
    frame: &Frame,
    entry: &FrameSchedule,
    dpb: &DecodedPictureBuffer,
    step: f64,
    step_indices: &[u8],
    lambda_base: f64,
) -> Result<InterFrameOutput, CodecError> {
    let (w, h) = (frame.width(), frame.height());
    assert!(w % MB_SIZE == 0 && h % MB_SIZE == 0, "inter frames are coded on a 16x16 grid");
    let (bx_n, by_n) = (w / MB_SIZE, h / MB_SIZE);
    assert_eq!(step_indices.len(), bx_n * by_n, "one step index per block");
    let missing = || CodecError::MissingReference { frame: entry.index };
    let last = dpb.last.as_ref().ok_or_else(missing)?;
    if last.width() != w || last.height() != h {
        return Err(CodecError::DimensionMismatch);
    }
    let two_refs = entry.refs.len() == 2;
    let adj_plane = SearchPlane::new(last);
    let key_plane = if two_refs {
        Some(SearchPlane::new(dpb.key.as_ref().ok_or_else(missing)?))
    } else {
        None
    };

    let mut ctx = ContextSet::new();
    let mut wr = SyntaxWriter::new();
    let mut recon = vec![0u8; w * h];
    let mut blocks = Vec::with_capacity(bx_n * by_n);
    let mut adj_mvs: Vec<Option<MotionVector>> = Vec::with_capacity(bx_n * by_n);
    let mut key_mvs: Vec<Option<MotionVector>> = Vec::with_capacity(bx_n * by_n);
    let mut copy = true;
    let mut cur = [0u8; MB_AREA];
    let mut rec = [0u8; MB_AREA];

    for by in 0..by_n {
        for bx in 0..bx_n {
            let b = by * bx_n + bx;
            let (x, y) = (bx * MB_SIZE, by * MB_SIZE);
            for r in 0..MB_SIZE {
                cur[r * MB_SIZE..(r + 1) * MB_SIZE].copy_from_slice(&frame.row(y + r)[x..x + MB_SIZE]);
            }
            let left = |v: &Vec<Option<MotionVector>>| if bx > 0 { v[b - 1] } else { None };
            let above = |v: &Vec<Option<MotionVector>>| if by > 0 { v[b - bx_n] } else { None };
            let pctx = PredictionContext {
                origin: (x, y),
                pred_adj: predict_mv(left(&adj_mvs), above(&adj_mvs)),
                pred_key: predict_mv(left(&key_mvs), above(&key_mvs)),
                intra_dc: causal_dc(frame, x, y),
            };
            let sidx = step_indices[b];
            let bstep = step * STEP_SCALES[sidx as usize];
            let lambda = lambda_base * bstep * bstep;
            let p: BlockPrediction = predict_multi_ref(&cur, &adj_plane, key_plane.as_ref(), lambda, &pctx);

            write_step_index(&mut wr, &mut ctx, sidx);
            write_mode(&mut wr, &mut ctx, p.mode, two_refs);
            if p.mode.uses_adj() {
                write_mv(&mut wr, &mut ctx, p.mv_adj, pctx.pred_adj);
            }
            if p.mode.uses_key() {
                write_mv(&mut wr, &mut ctx, p.mv_key, pctx.pred_key);
            }
            if p.mode == PredMode::IntraDc {
                wr.bypass_bits(p.dc as u32, 8);
            }
            let mut any_level = false;
            for sub in SUB_BLOCKS {
                let mut levels = residual_levels(&cur, &p.prediction, sub, bstep);
                reconstruct_sub_block(&p.prediction, &levels, sub, bstep, &mut rec);
                if levels.iter().any(|&l| l != 0) {
                    // drop the residual when it does not pay for its bits
                    let coded = sub_block_sse(&cur, &rec, sub) as f64 + lambda * estimate_coef_bits(&levels);
                    let skipped = sub_block_sse(&cur, &p.prediction, sub) as f64 + lambda;
                    if skipped <= coded {
                        levels = [0; 64];
                        reconstruct_sub_block(&p.prediction, &levels, sub, bstep, &mut rec);
                    }
                }
                any_level |= levels.iter().any(|&l| l != 0);
                wr.coef_block(&mut ctx, &levels);
            }
            copy &= p.mode == PredMode::Adj && p.mv_adj == MotionVector::ZERO && !any_level;
            for r in 0..MB_SIZE {
                recon[(y + r) * w + x..(y + r) * w + x + MB_SIZE]
                    .copy_from_slice(&rec[r * MB_SIZE..(r + 1) * MB_SIZE]);
            }
            adj_mvs.push(p.mode.uses_adj().then_some(p.mv_adj));
            key_mvs.push(p.mode.uses_key().then_some(p.mv_key));
            blocks.push(p);
        }
    }

    let payload = if copy { Vec::new() } else { wr.finish() };
    Ok(InterFrameOutput {
        payload,
        reconstruction: Frame::new(w, h, recon).expect("dimensions are preserved"),
        field: MotionField {
            blocks_x: bx_n,
            blocks_y: by_n,
            blocks,
        },
    })
}
