//! Hierarchical quality and reference structure.
//!
//! Inter frames cycle through a four-slot weight pattern. The slot holding
//! the largest default weight (1.2) marks *key* frames, which stay in the
//! reference buffer so every later frame can predict from both its
//! neighbour and the most recent key frame.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructureError {
    #[error("frame index in GOP must be in 0..8, got {0}")]
    GopIndex(usize),
    #[error("sequence must contain at least one frame")]
    NoFrames,
    #[error("intra period must be -1 or >= 1, got {0}")]
    IntraPeriod(i32),
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Default hierarchical weights indexed by `inter_index % 4`.
pub const DEFAULT_WEIGHTS: [f64; 4] = [0.5, 1.2, 0.5, 0.9];
/// Weight applied to intra frames when deriving their quantizer multiplier.
pub const DEFAULT_INTRA_WEIGHT: f64 = 2.0;
pub const DEFAULT_LAMBDA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualityLabel {
    Low,
    High,
    VeryHigh,
}

/// One row of the VTM low-delay QP derivation table. Scales are stored in
/// thousandths so the QP formula can be evaluated in exact integer math.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QpParams {
    pub offset: i32,
    pub mscale_milli: i32,
    pub moffset_milli: i32,
    pub quality: QualityLabel,
}

impl QpParams {
    pub fn mscale(&self) -> f64 {
        self.mscale_milli as f64 / 1000.0
    }

    pub fn moffset(&self) -> f64 {
        self.moffset_milli as f64 / 1000.0
    }
}

const QP_LOW: QpParams = QpParams {
    offset: 6,
    mscale_milli: 245,
    moffset_milli: -6500,
    quality: QualityLabel::Low,
};
const QP_HIGH: QpParams = QpParams {
    offset: 4,
    mscale_milli: 259,
    moffset_milli: -6500,
    quality: QualityLabel::High,
};
const QP_VERY_HIGH: QpParams = QpParams {
    offset: 1,
    mscale_milli: 0,
    moffset_milli: 0,
    quality: QualityLabel::VeryHigh,
};

pub fn qp_params(frame_idx_in_gop: usize) -> Result<QpParams, StructureError> {
    match frame_idx_in_gop {
        0 | 2 | 4 | 6 => Ok(QP_LOW),
        1 | 3 | 5 => Ok(QP_HIGH),
        7 => Ok(QP_VERY_HIGH),
        other => Err(StructureError::GopIndex(other)),
    }
}

/// QP of a frame in an 8-frame low-delay GOP:
/// `Int(bias + MScale * bias + MOffset + 0.5)` with `bias = qp_base + Offset`
/// and `Int` truncating toward zero.
pub fn vtm_qp(qp_base: i32, frame_idx_in_gop: usize) -> Result<i32, StructureError> {
    let p = qp_params(frame_idx_in_gop)?;
    let bias = qp_base + p.offset;
    let milli = bias * 1000 + p.mscale_milli * bias + p.moffset_milli + 500;
    Ok(milli / 1000)
}

/// Reference distances (list 0, list 1) of the VTM low-delay B configuration.
pub fn vtm_reference_lists(frame_idx_in_gop: usize) -> Result<([u32; 4], [u32; 4]), StructureError> {
    const LISTS: [([u32; 4], [u32; 4]); 8] = [
        ([1, 9, 17, 25], [1, 3, 5, 33]),
        ([1, 2, 10, 18], [1, 2, 4, 26]),
        ([1, 3, 11, 19], [1, 3, 5, 27]),
        ([1, 4, 12, 20], [1, 2, 4, 28]),
        ([1, 5, 13, 21], [1, 3, 5, 29]),
        ([1, 6, 14, 22], [1, 2, 6, 30]),
        ([1, 7, 15, 23], [1, 3, 7, 31]),
        ([1, 8, 16, 24], [1, 2, 4, 32]),
    ];
    LISTS
        .get(frame_idx_in_gop)
        .copied()
        .ok_or(StructureError::GopIndex(frame_idx_in_gop))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerId {
    Key,
    High,
    Low,
}

impl LayerId {
    pub fn as_u8(self) -> u8 {
        match self {
            LayerId::Key => 0,
            LayerId::High => 1,
            LayerId::Low => 2,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(LayerId::Key),
            1 => Some(LayerId::High),
            2 => Some(LayerId::Low),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerId::Key => "key",
            LayerId::High => "high",
            LayerId::Low => "low",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "key" => Some(LayerId::Key),
            "high" => Some(LayerId::High),
            "low" => Some(LayerId::Low),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub id: LayerId,
    pub weight: f64,
}

/// Layer of the `inter_index`-th inter frame after an intra frame (1-based).
///
/// The slot `inter_index % 4` selects both the weight and the layer: slot 1
/// is the key slot, slot 3 the high slot, slots 0 and 2 the low slots. With
/// the default weights this is exactly the 1.2 / 0.9 / 0.5 weight mapping.
pub fn layer_of(inter_index: usize, weights: &[f64; 4]) -> Layer {
    let slot = inter_index % 4;
    let id = match slot {
        1 => LayerId::Key,
        3 => LayerId::High,
        _ => LayerId::Low,
    };
    Layer {
        id,
        weight: weights[slot],
    }
}

/// `1/sqrt(weight)` rounded to four decimals.
pub fn quant_multiplier_for_weight(weight: f64) -> f64 {
    (1.0e4 / weight.sqrt()).round() / 1.0e4
}

pub fn layer_quant_multiplier(layer: Layer) -> f64 {
    quant_multiplier_for_weight(layer.weight)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameType {
    Intra,
    Inter,
}

impl FrameType {
    pub fn name(self) -> &'static str {
        match self {
            FrameType::Intra => "intra",
            FrameType::Inter => "inter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSchedule {
    pub index: usize,
    pub frame_type: FrameType,
    /// `None` for intra frames.
    pub layer: Option<Layer>,
    /// `refs[0]` is the adjacent frame, `refs[1]` the previous key/intra frame.
    pub refs: Vec<usize>,
    pub quant_multiplier: f64,
    pub omega_perturb: f64,
}

impl FrameSchedule {
    pub fn is_key_or_intra(&self) -> bool {
        self.frame_type == FrameType::Intra
            || self.layer.is_some_and(|l| l.id == LayerId::Key)
    }

    pub fn layer_id(&self) -> Option<LayerId> {
        self.layer.map(|l| l.id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureConfig {
    pub n_frames: usize,
    /// `-1` codes only the first frame as intra.
    pub intra_period: i32,
    pub weights: [f64; 4],
    pub intra_weight: f64,
    pub base_step: f64,
    /// Scale `c` of the mode-decision multiplier `c * step^2`.
    pub lambda_base: f64,
    /// When false every inter frame references only its neighbour.
    pub multi_reference: bool,
}

impl Default for StructureConfig {
    fn default() -> Self {
        Self {
            n_frames: 1,
            intra_period: -1,
            weights: DEFAULT_WEIGHTS,
            intra_weight: DEFAULT_INTRA_WEIGHT,
            base_step: 16.0,
            lambda_base: DEFAULT_LAMBDA,
            multi_reference: true,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), StructureError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(StructureError::NonPositive { name, value })
    }
}

impl StructureConfig {
    pub fn validate(&self) -> Result<(), StructureError> {
        if self.n_frames == 0 {
            return Err(StructureError::NoFrames);
        }
        if self.intra_period != -1 && self.intra_period < 1 {
            return Err(StructureError::IntraPeriod(self.intra_period));
        }
        positive("base_step", self.base_step)?;
        positive("lambda_base", self.lambda_base)?;
        positive("intra_weight", self.intra_weight)?;
        for w in self.weights {
            positive("weight", w)?;
        }
        Ok(())
    }

    pub fn is_intra_index(&self, index: usize) -> bool {
        index == 0 || (self.intra_period > 0 && index.is_multiple_of(self.intra_period as usize))
    }
}

pub fn build_schedule(config: &StructureConfig) -> Result<Vec<FrameSchedule>, StructureError> {
    config.validate()?;
    let mut out: Vec<FrameSchedule> = Vec::with_capacity(config.n_frames);
    let mut last_intra = 0usize;
    let mut last_key = 0usize;
    for index in 0..config.n_frames {
        if config.is_intra_index(index) {
            last_intra = index;
            last_key = index;
            out.push(FrameSchedule {
                index,
                frame_type: FrameType::Intra,
                layer: None,
                refs: Vec::new(),
                quant_multiplier: quant_multiplier_for_weight(config.intra_weight),
                omega_perturb: 1.0,
            });
            continue;
        }
        let layer = layer_of(index - last_intra, &config.weights);
        let adjacent = index - 1;
        let mut refs = vec![adjacent];
        if config.multi_reference && last_key != adjacent {
            refs.push(last_key);
        }
        out.push(FrameSchedule {
            index,
            frame_type: FrameType::Inter,
            layer: Some(layer),
            refs,
            quant_multiplier: layer_quant_multiplier(layer),
            omega_perturb: 1.0,
        });
        if layer.id == LayerId::Key {
            last_key = index;
        }
    }
    Ok(out)
}

/// CSV dump: `index,type,layer,omega,refs,quant_multiplier`, refs joined by `;`.
pub fn schedule_csv(schedule: &[FrameSchedule]) -> String {
    let mut s = String::from("index,type,layer,omega,refs,quant_multiplier\n");
    for e in schedule {
        let (layer, omega) = match e.layer {
            Some(l) => (l.id.name().to_string(), format!("{}", l.weight)),
            None => ("-".to_string(), "-".to_string()),
        };
        let refs = e
            .refs
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.4}",
            e.index,
            e.frame_type.name(),
            layer,
            omega,
            refs,
            e.quant_multiplier
        );
    }
    s
}
