//! Hierarchical low-delay block video codec with multi-reference prediction,
//! layer-wise quantization and a one-frame lookahead.

pub mod entropy;
pub mod frame;
pub mod metrics;
pub mod motion;
pub mod structure;
pub mod transform;
pub mod codec;
pub mod synth;
pub mod y4m;
pub mod experiment;

pub use codec::{decode_sequence, encode_sequence, CodecConfig, CodecError};
pub use frame::{Frame, Sequence};

/// Any error raised by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Frame(#[from] frame::FrameError),
    #[error(transparent)]
    Structure(#[from] structure::StructureError),
    #[error(transparent)]
    Quant(#[from] transform::QuantError),
    #[error(transparent)]
    Entropy(#[from] entropy::EntropyError),
    #[error(transparent)]
    Codec(#[from] codec::CodecError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Y4m(#[from] y4m::Y4mError),
    #[error(transparent)]
    Experiment(#[from] experiment::ExperimentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
