//! Binary range coder with 12-bit adaptive probabilities.
//!
//! The encoder keeps a 33-bit `low` with byte-wise carry propagation and a
//! 32-bit `range` renormalized whenever it drops below 2^24. The very first
//! byte of the carry pipeline is always zero and is not written. On flush the
//! encoder picks the value in `[low, low + range)` whose three low bytes are
//! zero and emits only its top byte; the decoder supplies those zero bytes
//! itself when it reads past the end of the payload.

use super::EntropyError;

pub const PROB_BITS: u32 = 12;
pub const PROB_ONE: u16 = 1 << PROB_BITS;
pub const PROB_HALF: u16 = PROB_ONE / 2;
const ADAPT_SHIFT: u32 = 5;
const TOP: u32 = 1 << 24;
/// Zero bytes the decoder may synthesize past the end of a payload.
pub const MAX_PADDING: usize = 4;

/// Probability that the next bit is 0, in units of 1/4096.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinProb(u16);

impl Default for BinProb {
    fn default() -> Self {
        BinProb(PROB_HALF)
    }
}

impl BinProb {
    pub fn new(p: u16) -> Self {
        BinProb(p.clamp(1, PROB_ONE - 1))
    }

    pub fn get(self) -> u16 {
        self.0
    }

    #[inline]
    pub fn adapt(&mut self, bit: bool) {
        let p = self.0 as i32;
        let target = if bit { 1 } else { (PROB_ONE - 1) as i32 };
        let next = p + ((target - p) >> ADAPT_SHIFT);
        self.0 = next.clamp(1, (PROB_ONE - 1) as i32) as u16;
    }
}

#[derive(Debug, Clone)]
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    skip_first: bool,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            skip_first: true,
            out: Vec::new(),
        }
    }

    fn emit(&mut self, byte: u8) {
        if self.skip_first {
            debug_assert_eq!(byte, 0);
            self.skip_first = false;
        } else {
            self.out.push(byte);
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut temp = self.cache;
            loop {
                self.emit(temp.wrapping_add(carry));
                temp = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    /// Codes `bit` with probability `p0` (of a zero) out of 4096.
    #[inline]
    pub fn encode_with_prob(&mut self, bit: bool, p0: u16) {
        let bound = (self.range >> PROB_BITS) * p0 as u32;
        if bit {
            self.low += bound as u64;
            self.range -= bound;
        } else {
            self.range = bound;
        }
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    #[inline]
    pub fn encode_bit(&mut self, ctx: &mut BinProb, bit: bool) {
        self.encode_with_prob(bit, ctx.0);
        ctx.adapt(bit);
    }

    #[inline]
    pub fn encode_bypass(&mut self, bit: bool) {
        self.encode_with_prob(bit, PROB_HALF);
    }

    /// Bytes produced so far, excluding what `finish` still has to flush.
    pub fn bytes_so_far(&self) -> usize {
        self.out.len()
    }

    pub fn finish(mut self) -> Vec<u8> {
        let mask = (TOP - 1) as u64;
        self.low = (self.low + mask) & !mask;
        self.shift_low();
        self.shift_low();
        self.out
    }
}

#[derive(Debug, Clone)]
pub struct RangeDecoder<'a> {
    data: &'a [u8],
    pos: usize,
    padding: usize,
    code: u32,
    range: u32,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self, EntropyError> {
        let mut d = Self {
            data,
            pos: 0,
            padding: 0,
            code: 0,
            range: u32::MAX,
        };
        for _ in 0..4 {
            d.code = (d.code << 8) | d.next_byte()? as u32;
        }
        Ok(d)
    }

    fn next_byte(&mut self) -> Result<u8, EntropyError> {
        if let Some(&b) = self.data.get(self.pos) {
            self.pos += 1;
            Ok(b)
        } else {
            self.padding += 1;
            if self.padding > MAX_PADDING {
                Err(EntropyError::PastEnd)
            } else {
                Ok(0)
            }
        }
    }

    #[inline]
    pub fn decode_with_prob(&mut self, p0: u16) -> Result<bool, EntropyError> {
        let bound = (self.range >> PROB_BITS) * p0 as u32;
        let bit = if self.code < bound {
            self.range = bound;
            false
        } else {
            self.code -= bound;
            self.range -= bound;
            true
        };
        while self.range < TOP {
            self.range <<= 8;
            self.code = (self.code << 8) | self.next_byte()? as u32;
        }
        Ok(bit)
    }

    #[inline]
    pub fn decode_bit(&mut self, ctx: &mut BinProb) -> Result<bool, EntropyError> {
        let bit = self.decode_with_prob(ctx.0)?;
        ctx.adapt(bit);
        Ok(bit)
    }

    #[inline]
    pub fn decode_bypass(&mut self) -> Result<bool, EntropyError> {
        self.decode_with_prob(PROB_HALF)
    }
}
