use super::bitstream::{FrameHeader, SequenceHeader, FRAME_HEADER_LEN, NO_LAYER, SEQUENCE_HEADER_LEN};
use super::block::{
    intra_reconstruct, read_mode, read_mv, read_step_index, reconstruct_sub_block, STEP_SCALES, SUB_BLOCKS,
};
use super::{CodecError, CodingParams, DecodedPictureBuffer};
use crate::entropy::{ContextSet, EntropyError, SyntaxReader};
use crate::frame::{Frame, FrameRate, Sequence};
use crate::motion::{build_prediction, predict_mv, MotionVector, PredMode, SearchPlane, MB_AREA, MB_SIZE};
use crate::structure::{FrameSchedule, FrameType, DEFAULT_LAMBDA};

/// Result of a decode that keeps going past damaged frames.
#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub header: SequenceHeader,
    /// Decoded frames at the coded dimensions, in order. Shorter than the
    /// frame count when the stream is truncated.
    pub frames: Vec<Frame>,
    /// Frames whose payload failed to decode and were replaced by a copy of
    /// the previous frame.
    pub concealed: Vec<usize>,
    /// First error met, if any.
    pub error: Option<CodecError>,
}

impl DecodeOutcome {
    pub fn frame_rate(&self) -> FrameRate {
        FrameRate {
            num: self.header.fps_num as u32,
            den: self.header.fps_den.max(1) as u32,
        }
    }
}

/// Decodes a complete stream; any damaged frame is an error.
pub fn decode_sequence(bytes: &[u8]) -> Result<Sequence, CodecError> {
    let outcome = decode_sequence_lossy(bytes)?;
    if let Some(e) = outcome.error {
        return Err(e);
    }
    let rate = outcome.frame_rate();
    Ok(Sequence::new(outcome.frames, rate)?)
}

/// Decodes as much of a stream as possible. Frames with undecodable payloads
/// are concealed by repeating the previous frame; decoding stops at the
/// first truncated frame. Only sequence header errors fail outright.
pub fn decode_sequence_lossy(bytes: &[u8]) -> Result<DecodeOutcome, CodecError> {
    let header = SequenceHeader::read(bytes)?;
    let params = CodingParams::from_header(&header, DEFAULT_LAMBDA)?;
    let mut outcome = DecodeOutcome {
        header,
        frames: Vec::with_capacity(params.schedule.len()),
        concealed: Vec::new(),
        error: None,
    };
    let mut dpb = DecodedPictureBuffer::default();
    let mut pos = SEQUENCE_HEADER_LEN;

    for (index, entry) in params.schedule.iter().enumerate() {
        let raw = &bytes[pos.min(bytes.len())..];
        let fh = match raw.get(..FRAME_HEADER_LEN) {
            None => Err(CodecError::Truncated { frame: Some(index) }),
            Some(b) => FrameHeader::read(b, index),
        };
        // payload length is readable even when omega is out of range
        let payload_len = raw
            .get(4..8)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize);
        let payload = payload_len.and_then(|n| raw.get(FRAME_HEADER_LEN..FRAME_HEADER_LEN.checked_add(n)?));
        let Some(payload) = payload else {
            outcome.error.get_or_insert(CodecError::Truncated { frame: Some(index) });
            return Ok(outcome);
        };
        pos += FRAME_HEADER_LEN + payload.len();

        let decoded = fh.and_then(|fh| decode_frame(&params, entry, &fh, payload, &dpb));
        let recon = match decoded {
            Ok(f) => f,
            Err(e) => {
                outcome.error.get_or_insert(e);
                outcome.concealed.push(index);
                dpb.last
                    .clone()
                    .unwrap_or_else(|| Frame::filled(params.padded_width, params.padded_height, 128).expect("non-zero"))
            }
        };
        dpb.update(entry, &recon);
        outcome.frames.push(recon.crop(params.width, params.height)?);
    }
    Ok(outcome)
}

fn decode_frame(
    params: &CodingParams,
    entry: &FrameSchedule,
    fh: &FrameHeader,
    payload: &[u8],
    dpb: &DecodedPictureBuffer,
) -> Result<Frame, CodecError> {
    let index = entry.index;
    let expected_layer = entry.layer_id().map_or(NO_LAYER, |l| l.as_u8());
    if fh.frame_type != entry.frame_type || fh.layer != expected_layer {
        return Err(CodecError::ScheduleMismatch { frame: index });
    }
    let step = params.frame_step(index, fh.omega_q8);
    let (w, h) = (params.padded_width, params.padded_height);
    let wrap = |source: EntropyError| CodecError::Entropy { frame: index, source };

    match entry.frame_type {
        FrameType::Intra => {
            if payload.is_empty() {
                return Err(wrap(EntropyError::Malformed("empty intra payload")));
            }
            decode_intra(payload, w, h, step).map_err(wrap)
        }
        FrameType::Inter => {
            let missing = CodecError::MissingReference { frame: index };
            let last = dpb.last.as_ref().ok_or(missing.clone())?;
            if payload.is_empty() {
                return Ok(last.clone());
            }
            let key = if entry.refs.len() == 2 {
                Some(dpb.key.as_ref().ok_or(missing)?)
            } else {
                None
            };
            decode_inter(payload, last, key, w, h, step).map_err(wrap)
        }
    }
}

fn decode_intra(payload: &[u8], w: usize, h: usize, step: f64) -> Result<Frame, EntropyError> {
    let mut rd = SyntaxReader::new(payload)?;
    let mut ctx = ContextSet::new();
    let mut recon = vec![0u8; w * h];
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            let levels = rd.coef_block(&mut ctx)?;
            let r = intra_reconstruct(&levels, step);
            for y in 0..8 {
                recon[(by + y) * w + bx..(by + y) * w + bx + 8].copy_from_slice(&r[y * 8..y * 8 + 8]);
            }
        }
    }
    Ok(Frame::new(w, h, recon).expect("dimensions are preserved"))
}

fn decode_inter(
    payload: &[u8],
    last: &Frame,
    key: Option<&Frame>,
    w: usize,
    h: usize,
    step: f64,
) -> Result<Frame, EntropyError> {
    let two_refs = key.is_some();
    let adj_plane = SearchPlane::new(last);
    let key_plane = key.map(SearchPlane::new);
    let mut rd = SyntaxReader::new(payload)?;
    let mut ctx = ContextSet::new();
    let (bx_n, by_n) = (w / MB_SIZE, h / MB_SIZE);
    let mut recon = vec![0u8; w * h];
    let mut adj_mvs: Vec<Option<MotionVector>> = Vec::with_capacity(bx_n * by_n);
    let mut key_mvs: Vec<Option<MotionVector>> = Vec::with_capacity(bx_n * by_n);
    let mut rec = [0u8; MB_AREA];

    for by in 0..by_n {
        for bx in 0..bx_n {
            let b = by * bx_n + bx;
            let (x, y) = (bx * MB_SIZE, by * MB_SIZE);
            let left = |v: &Vec<Option<MotionVector>>| if bx > 0 { v[b - 1] } else { None };
            let above = |v: &Vec<Option<MotionVector>>| if by > 0 { v[b - bx_n] } else { None };
            let pred_adj = predict_mv(left(&adj_mvs), above(&adj_mvs));
            let pred_key = predict_mv(left(&key_mvs), above(&key_mvs));

            let sidx = read_step_index(&mut rd, &mut ctx)?;
            let bstep = step * STEP_SCALES[sidx as usize];
            let mode = read_mode(&mut rd, &mut ctx, two_refs)?;
            let mv_adj = if mode.uses_adj() {
                read_mv(&mut rd, &mut ctx, pred_adj)?
            } else {
                MotionVector::ZERO
            };
            let mv_key = if mode.uses_key() {
                read_mv(&mut rd, &mut ctx, pred_key)?
            } else {
                MotionVector::ZERO
            };
            let dc = if mode == PredMode::IntraDc {
                rd.bypass_bits(8)? as u8
            } else {
                0
            };
            let pred = build_prediction(mode, mv_adj, mv_key, dc, (x, y), &adj_plane, key_plane.as_ref())
                .ok_or(EntropyError::Malformed("mode needs a missing reference"))?;
            for sub in SUB_BLOCKS {
                let levels = rd.coef_block(&mut ctx)?;
                reconstruct_sub_block(&pred, &levels, sub, bstep, &mut rec);
            }
            for r in 0..MB_SIZE {
                recon[(y + r) * w + x..(y + r) * w + x + MB_SIZE]
                    .copy_from_slice(&rec[r * MB_SIZE..(r + 1) * MB_SIZE]);
            }
            adj_mvs.push(mode.uses_adj().then_some(mv_adj));
            key_mvs.push(mode.uses_key().then_some(mv_key));
        }
    }
    Ok(Frame::new(w, h, recon).expect("dimensions are preserved"))
}
