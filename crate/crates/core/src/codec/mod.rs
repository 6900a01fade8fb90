//! Sequence encoder and decoder.
//!
//! Stream layout: a 40-byte sequence header followed by one 12-byte frame
//! header and payload per frame. Only luma is coded; frames are padded to a
//! multiple of 16 internally and cropped on output.

pub mod bitstream;
mod block;
mod decoder;
mod encoder;
mod lookahead;

use thiserror::Error;

use crate::entropy::EntropyError;
use crate::frame::{Frame, FrameError};
use crate::metrics::RdPoint;
use crate::structure::{build_schedule, FrameSchedule, FrameType, LayerId, StructureConfig, StructureError};

pub use bitstream::{FrameHeader, SequenceHeader};
pub use block::{step_index_for_multiplier, STEP_SCALES};
pub use decoder::{decode_sequence, decode_sequence_lossy, DecodeOutcome};
pub use encoder::{encode_inter_frame, encode_intra_frame, encode_sequence, InterFrameOutput};
pub use lookahead::lookahead_weights;

/// PSNR used in place of infinity when averaging.
pub const PSNR_CAP: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("invalid codec configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("cannot encode an empty sequence")]
    EmptySequence,
    #[error("frame dimensions differ")]
    DimensionMismatch,
    #[error("bitstream does not start with the EHB1 magic")]
    BadMagic,
    #[error("bitstream truncated{}", match .frame { Some(i) => format!(" in frame {i}"), None => String::from(" in the sequence header") })]
    Truncated { frame: Option<usize> },
    #[error("frame {frame}: omega {value}/256 is outside [0.8, 1.2]")]
    OmegaRange { frame: usize, value: u16 },
    #[error("invalid header field: {0}")]
    InvalidHeader(&'static str),
    #[error("frame {frame}: header does not match the coding structure")]
    ScheduleMismatch { frame: usize },
    #[error("frame {frame}: {source}")]
    Entropy { frame: usize, source: EntropyError },
    #[error("frame {frame}: missing reference picture")]
    MissingReference { frame: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OmegaMode {
    #[default]
    Off,
    /// Uniform draw in [0.8, 1.2] for every key frame.
    RandomKey,
}

impl OmegaMode {
    pub fn name(self) -> &'static str {
        match self {
            OmegaMode::Off => "off",
            OmegaMode::RandomKey => "random_key",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "off" => Some(OmegaMode::Off),
            "random_key" | "random-key" => Some(OmegaMode::RandomKey),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    /// `n_frames` is taken from the sequence being coded.
    pub structure: StructureConfig,
    pub lookahead_enabled: bool,
    pub lookahead_strength: f64,
    pub random_omega_seed: Option<u64>,
    pub omega_mode: OmegaMode,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            structure: StructureConfig::default(),
            lookahead_enabled: true,
            lookahead_strength: 0.2,
            random_omega_seed: None,
            omega_mode: OmegaMode::Off,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<(), CodecError> {
        if !(0.0..=1.0).contains(&self.lookahead_strength) {
            return Err(CodecError::InvalidConfig(format!(
                "lookahead strength {} outside [0, 1]",
                self.lookahead_strength
            )));
        }
        let mut s = self.structure.clone();
        s.n_frames = s.n_frames.max(1);
        s.validate()?;
        Ok(())
    }

    /// Lookahead that actually changes the output.
    pub fn lookahead_active(&self) -> bool {
        self.lookahead_enabled && self.lookahead_strength > 0.0
    }
}

/// Coding parameters as the decoder sees them, rebuilt from the sequence
/// header so that both sides use the same fixed-point values.
#[derive(Debug, Clone)]
pub(crate) struct CodingParams {
    pub width: usize,
    pub height: usize,
    pub padded_width: usize,
    pub padded_height: usize,
    pub base_step: f64,
    pub schedule: Vec<FrameSchedule>,
}

impl CodingParams {
    pub fn from_header(h: &SequenceHeader, lambda_base: f64) -> Result<Self, CodecError> {
        let structure = StructureConfig {
            n_frames: h.frame_count as usize,
            intra_period: h.intra_period,
            weights: h.weights_milli.map(|w| w as f64 / 1000.0),
            intra_weight: h.intra_weight_milli as f64 / 1000.0,
            base_step: h.base_step_milli as f64 / 1000.0,
            lambda_base,
            multi_reference: !h.single_reference,
        };
        let schedule = build_schedule(&structure)?;
        let (w, hh) = (h.width as usize, h.height as usize);
        Ok(Self {
            width: w,
            height: hh,
            padded_width: w.next_multiple_of(16),
            padded_height: hh.next_multiple_of(16),
            base_step: structure.base_step,
            schedule,
        })
    }

    /// `base_step * layer_multiplier / omega`.
    pub fn frame_step(&self, index: usize, omega_q8: u16) -> f64 {
        self.base_step * self.schedule[index].quant_multiplier / bitstream::omega_from_q8(omega_q8)
    }
}

/// Reconstructions available for prediction.
#[derive(Debug, Clone, Default)]
pub struct DecodedPictureBuffer {
    /// Previous frame.
    pub last: Option<Frame>,
    /// Most recent key or intra frame.
    pub key: Option<Frame>,
    /// Most recent intra frame.
    pub intra: Option<Frame>,
}

impl DecodedPictureBuffer {
    pub fn update(&mut self, entry: &FrameSchedule, recon: &Frame) {
        self.last = Some(recon.clone());
        if entry.is_key_or_intra() {
            self.key = Some(recon.clone());
        }
        if entry.frame_type == FrameType::Intra {
            self.intra = Some(recon.clone());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStats {
    pub index: usize,
    pub frame_type: FrameType,
    pub layer: Option<LayerId>,
    /// Omega as transmitted.
    pub omega: f64,
    /// Omega before fixed-point rounding.
    pub omega_drawn: f64,
    /// Frame header plus payload.
    pub bits: u64,
    pub payload_bytes: usize,
    pub step: f64,
    pub mse: f64,
    pub psnr: f64,
    /// Blocks per prediction mode, in `PredMode` order.
    pub mode_counts: [usize; 4],
}

#[derive(Debug, Clone)]
pub struct EncodeOutput {
    pub header: SequenceHeader,
    pub bitstream: Vec<u8>,
    /// Encoder-side reconstructions at the input dimensions.
    pub reconstructions: Vec<Frame>,
    pub stats: Vec<FrameStats>,
}

impl EncodeOutput {
    pub fn total_bits(&self) -> u64 {
        self.bitstream.len() as u64 * 8
    }

    pub fn bpp(&self) -> f64 {
        self.total_bits() as f64
            / (self.header.width as f64 * self.header.height as f64 * self.stats.len() as f64)
    }

    pub fn mean_psnr(&self) -> f64 {
        mean_capped_psnr(self.stats.iter().map(|s| s.psnr))
    }

    pub fn rd_point(&self) -> RdPoint {
        RdPoint::new(self.bpp(), self.mean_psnr())
    }

    /// Per-frame (bits per pixel, PSNR).
    pub fn frame_rd_points(&self) -> Vec<RdPoint> {
        let px = self.header.width as f64 * self.header.height as f64;
        self.stats
            .iter()
            .map(|s| RdPoint::new(s.bits as f64 / px, s.psnr))
            .collect()
    }
}

pub fn mean_capped_psnr(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), p| (s + p.min(PSNR_CAP), n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}
