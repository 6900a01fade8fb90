//! Entropy coding: range coder, binarizations and the coefficient syntax.

mod range_coder;

pub use range_coder::{BinProb, RangeDecoder, RangeEncoder, MAX_PADDING, PROB_HALF};

use thiserror::Error;

use crate::transform::Levels;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EntropyError {
    #[error("range decoder read past the end of the payload")]
    PastEnd,
    #[error("malformed syntax: {0}")]
    Malformed(&'static str),
}

/// Raster position of the n-th coefficient in zigzag order.
pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27,
    20, 13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58,
    59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];

/// Longest exp-Golomb prefix accepted by the decoder.
const MAX_EG_PREFIX: u32 = 31;

/// Adaptive contexts of one frame payload. Reset at every frame start.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ContextSet {
    pub mode: [BinProb; 3],
    /// x non-zero, y non-zero, sign, magnitude > 1.
    pub mv: [BinProb; 4],
    /// Significance by zigzag band 0 / 1-5 / 6-20 / 21-63.
    pub sig: [BinProb; 4],
    /// |level| > 1, DC and AC.
    pub level: [BinProb; 2],
    /// Last-significant flag, low and high bands.
    pub last: [BinProb; 2],
    /// Whether an 8x8 block has any non-zero level.
    pub coded: BinProb,
    /// Per-block quantizer step index.
    pub step: [BinProb; 2],
}

impl ContextSet {
    pub fn new() -> Self {
        Self::default()
    }
}

#[inline]
fn band(pos: usize) -> usize {
    match pos {
        0 => 0,
        1..=5 => 1,
        6..=20 => 2,
        _ => 3,
    }
}

#[inline]
fn last_ctx(pos: usize) -> usize {
    usize::from(band(pos) > 1)
}

pub fn zigzag_map(v: i32) -> u32 {
    ((v << 1) ^ (v >> 31)) as u32
}

pub fn zigzag_unmap(u: u32) -> i32 {
    ((u >> 1) as i32) ^ -((u & 1) as i32)
}

/// Syntax writer over a range encoder.
#[derive(Debug, Default)]
pub struct SyntaxWriter {
    enc: RangeEncoder,
    bins: u64,
}

impl SyntaxWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of bins coded so far, context-coded and bypass.
    pub fn bins(&self) -> u64 {
        self.bins
    }

    pub fn bit(&mut self, ctx: &mut BinProb, bit: bool) {
        self.bins += 1;
        self.enc.encode_bit(ctx, bit);
    }

    pub fn bypass(&mut self, bit: bool) {
        self.bins += 1;
        self.enc.encode_bypass(bit);
    }

    pub fn bypass_bits(&mut self, value: u32, n: u32) {
        for i in (0..n).rev() {
            self.bypass((value >> i) & 1 == 1);
        }
    }

    /// Order-0 exp-Golomb in bypass bins.
    pub fn ue(&mut self, value: u32) {
        let v = value as u64 + 1;
        let n = 64 - v.leading_zeros();
        for _ in 1..n {
            self.bypass(false);
        }
        for i in (0..n).rev() {
            self.bypass((v >> i) & 1 == 1);
        }
    }

    pub fn se(&mut self, value: i32) {
        self.ue(zigzag_map(value));
    }

    pub fn coef_block(&mut self, ctx: &mut ContextSet, levels: &Levels) {
        let last_pos = (0..64).rev().find(|&i| levels[ZIGZAG[i]] != 0);
        let Some(last_pos) = last_pos else {
            self.bit(&mut ctx.coded, false);
            return;
        };
        self.bit(&mut ctx.coded, true);
        for pos in 0..=last_pos {
            let level = levels[ZIGZAG[pos]];
            let sig = level != 0;
            self.bit(&mut ctx.sig[band(pos)], sig);
            if !sig {
                continue;
            }
            let mag = level.unsigned_abs();
            let lctx = usize::from(pos != 0);
            self.bit(&mut ctx.level[lctx], mag > 1);
            if mag > 1 {
                self.ue(mag - 2);
            }
            self.bypass(level < 0);
            if pos < 63 {
                self.bit(&mut ctx.last[last_ctx(pos)], pos == last_pos);
            }
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.enc.finish()
    }
}

/// Syntax reader mirroring [`SyntaxWriter`].
#[derive(Debug)]
pub struct SyntaxReader<'a> {
    dec: RangeDecoder<'a>,
}

impl<'a> SyntaxReader<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self, EntropyError> {
        Ok(Self {
            dec: RangeDecoder::new(data)?,
        })
    }

    pub fn bit(&mut self, ctx: &mut BinProb) -> Result<bool, EntropyError> {
        self.dec.decode_bit(ctx)
    }

    pub fn bypass(&mut self) -> Result<bool, EntropyError> {
        self.dec.decode_bypass()
    }

    pub fn bypass_bits(&mut self, n: u32) -> Result<u32, EntropyError> {
        let mut v = 0;
        for _ in 0..n {
            v = (v << 1) | u32::from(self.bypass()?);
        }
        Ok(v)
    }

    pub fn ue(&mut self) -> Result<u32, EntropyError> {
        let mut zeros = 0;
        while !self.bypass()? {
            zeros += 1;
            if zeros > MAX_EG_PREFIX {
                return Err(EntropyError::Malformed("exp-Golomb prefix too long"));
            }
        }
        let mut v: u64 = 1;
        for _ in 0..zeros {
            v = (v << 1) | u64::from(self.bypass()?);
        }
        u32::try_from(v - 1).map_err(|_| EntropyError::Malformed("exp-Golomb value overflow"))
    }

    pub fn se(&mut self) -> Result<i32, EntropyError> {
        Ok(zigzag_unmap(self.ue()?))
    }

    pub fn coef_block(&mut self, ctx: &mut ContextSet) -> Result<Levels, EntropyError> {
        let mut levels = [0i32; 64];
        if !self.bit(&mut ctx.coded)? {
            return Ok(levels);
        }
        for pos in 0..64 {
            if !self.bit(&mut ctx.sig[band(pos)])? {
                if pos == 63 {
                    return Err(EntropyError::Malformed("coded block without significant level"));
                }
                continue;
            }
            let lctx = usize::from(pos != 0);
            let mut mag: u32 = 1;
            if self.bit(&mut ctx.level[lctx])? {
                mag = self
                    .ue()?
                    .checked_add(2)
                    .filter(|&m| m <= i32::MAX as u32)
                    .ok_or(EntropyError::Malformed("level magnitude overflow"))?;
            }
            let negative = self.bypass()?;
            levels[ZIGZAG[pos]] = if negative { -(mag as i32) } else { mag as i32 };
            if pos == 63 || self.bit(&mut ctx.last[last_ctx(pos)])? {
                break;
            }
        }
        Ok(levels)
    }
}
