//! Fixed-size sequence and frame headers.

use super::CodecError;
use crate::structure::{FrameType, LayerId};

pub const MAGIC: [u8; 4] = *b"EHB1";
pub const SEQUENCE_HEADER_LEN: usize = 40;
pub const FRAME_HEADER_LEN: usize = 12;
/// Layer byte of intra frames.
pub const NO_LAYER: u8 = 0xFF;
pub const OMEGA_Q_MIN: u16 = 205;
pub const OMEGA_Q_MAX: u16 = 307;
pub const OMEGA_Q_ONE: u16 = 256;

const FLAG_LOOKAHEAD: u16 = 1;
const OMEGA_MODE_SHIFT: u16 = 1;
const OMEGA_MODE_MASK: u16 = 0b11 << OMEGA_MODE_SHIFT;
const FLAG_SINGLE_REF: u16 = 1 << 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceHeader {
    pub width: u32,
    pub height: u32,
    pub frame_count: u32,
    pub base_step_milli: u32,
    pub weights_milli: [u16; 4],
    pub intra_period: i32,
    pub lookahead: bool,
    /// 0 off, 1 random per key frame.
    pub omega_mode: u8,
    pub single_reference: bool,
    pub intra_weight_milli: u16,
    pub fps_num: u16,
    pub fps_den: u16,
}

fn u16_at(b: &[u8], o: usize) -> u16 {
    u16::from_le_bytes([b[o], b[o + 1]])
}

fn u32_at(b: &[u8], o: usize) -> u32 {
    u32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]])
}

impl SequenceHeader {
    pub fn flags(&self) -> u16 {
        let mut f = (self.omega_mode as u16) << OMEGA_MODE_SHIFT;
        if self.lookahead {
            f |= FLAG_LOOKAHEAD;
        }
        if self.single_reference {
            f |= FLAG_SINGLE_REF;
        }
        f
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.frame_count.to_le_bytes());
        out.extend_from_slice(&self.base_step_milli.to_le_bytes());
        for w in self.weights_milli {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&self.intra_period.to_le_bytes());
        out.extend_from_slice(&self.flags().to_le_bytes());
        out.extend_from_slice(&self.intra_weight_milli.to_le_bytes());
        out.extend_from_slice(&self.fps_num.to_le_bytes());
        out.extend_from_slice(&self.fps_den.to_le_bytes());
    }

    pub fn read(b: &[u8]) -> Result<Self, CodecError> {
        if b.len() >= 4 && b[..4] != MAGIC {
            return Err(CodecError::BadMagic);
        }
        if b.len() < SEQUENCE_HEADER_LEN {
            return Err(CodecError::Truncated { frame: None });
        }
        let flags = u16_at(b, 32);
        let h = Self {
            width: u32_at(b, 4),
            height: u32_at(b, 8),
            frame_count: u32_at(b, 12),
            base_step_milli: u32_at(b, 16),
            weights_milli: [u16_at(b, 20), u16_at(b, 22), u16_at(b, 24), u16_at(b, 26)],
            intra_period: u32_at(b, 28) as i32,
            lookahead: flags & FLAG_LOOKAHEAD != 0,
            omega_mode: ((flags & OMEGA_MODE_MASK) >> OMEGA_MODE_SHIFT) as u8,
            single_reference: flags & FLAG_SINGLE_REF != 0,
            intra_weight_milli: u16_at(b, 34),
            fps_num: u16_at(b, 36),
            fps_den: u16_at(b, 38),
        };
        h.validate()?;
        Ok(h)
    }

    fn validate(&self) -> Result<(), CodecError> {
        let bad = |m: &'static str| Err(CodecError::InvalidHeader(m));
        if self.width == 0 || self.height == 0 || self.width > 1 << 16 || self.height > 1 << 16 {
            return bad("frame dimensions");
        }
        if self.frame_count == 0 {
            return bad("frame count");
        }
        if self.base_step_milli == 0 || self.intra_weight_milli == 0 {
            return bad("quantizer parameters");
        }
        if self.weights_milli.contains(&0) {
            return bad("layer weights");
        }
        if self.intra_period != -1 && self.intra_period < 1 {
            return bad("intra period");
        }
        if self.omega_mode > 1 {
            return bad("omega mode");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub frame_type: FrameType,
    /// `NO_LAYER` for intra frames.
    pub layer: u8,
    pub omega_q8: u16,
    pub payload_len: u32,
}

impl FrameHeader {
    pub fn layer_id(&self) -> Option<LayerId> {
        LayerId::from_u8(self.layer)
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        out.push(match self.frame_type {
            FrameType::Intra => 0,
            FrameType::Inter => 1,
        });
        out.push(self.layer);
        out.extend_from_slice(&self.omega_q8.to_le_bytes());
        out.extend_from_slice(&self.payload_len.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
    }

    pub fn read(b: &[u8], frame: usize) -> Result<Self, CodecError> {
        if b.len() < FRAME_HEADER_LEN {
            return Err(CodecError::Truncated { frame: Some(frame) });
        }
        let frame_type = match b[0] {
            0 => FrameType::Intra,
            1 => FrameType::Inter,
            _ => return Err(CodecError::InvalidHeader("frame type")),
        };
        let omega_q8 = u16_at(b, 2);
        if !(OMEGA_Q_MIN..=OMEGA_Q_MAX).contains(&omega_q8) {
            return Err(CodecError::OmegaRange { frame, value: omega_q8 });
        }
        Ok(Self {
            frame_type,
            layer: b[1],
            omega_q8,
            payload_len: u32_at(b, 4),
        })
    }

    pub fn omega(&self) -> f64 {
        omega_from_q8(self.omega_q8)
    }
}

/// `round(omega * 256)`, kept inside the valid range.
pub fn omega_to_q8(omega: f64) -> u16 {
    ((omega * 256.0).round() as i64).clamp(OMEGA_Q_MIN as i64, OMEGA_Q_MAX as i64) as u16
}

pub fn omega_from_q8(q: u16) -> f64 {
    q as f64 / 256.0
}
