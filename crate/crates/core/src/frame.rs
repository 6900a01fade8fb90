//! Planar 8-bit pictures, blocks and sequences.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame dimensions must be positive, got {width}x{height}")]
    ZeroDimension { width: usize, height: usize },
    #[error("plane has {actual} samples, expected {expected}")]
    PlaneSize { expected: usize, actual: usize },
    #[error("block at ({x}, {y}) of size {size} exceeds {width}x{height} frame")]
    OutOfBounds {
        x: usize,
        y: usize,
        size: usize,
        width: usize,
        height: usize,
    },
    #[error("sequence frames have mismatched dimensions")]
    MismatchedDimensions,
}

/// Rounds half away from zero, then clamps to the 8-bit range.
#[inline]
pub fn clamp_pixel(v: f64) -> u8 {
    let r = v.round();
    if r.is_nan() || r <= 0.0 {
        0
    } else if r >= 255.0 {
        255
    } else {
        r as u8
    }
}

/// Chroma plane dimensions for 4:2:0 subsampling.
pub fn chroma_dims(width: usize, height: usize) -> (usize, usize) {
    (width.div_ceil(2), height.div_ceil(2))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    width: usize,
    height: usize,
    luma: Vec<u8>,
    chroma: Option<(Vec<u8>, Vec<u8>)>,
}

impl Frame {
    pub fn new(width: usize, height: usize, luma: Vec<u8>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::ZeroDimension { width, height });
        }
        if luma.len() != width * height {
            return Err(FrameError::PlaneSize {
                expected: width * height,
                actual: luma.len(),
            });
        }
        Ok(Self {
            width,
            height,
            luma,
            chroma: None,
        })
    }

    pub fn with_chroma(
        width: usize,
        height: usize,
        luma: Vec<u8>,
        u: Vec<u8>,
        v: Vec<u8>,
    ) -> Result<Self, FrameError> {
        let mut frame = Self::new(width, height, luma)?;
        let (cw, ch) = chroma_dims(width, height);
        for plane in [&u, &v] {
            if plane.len() != cw * ch {
                return Err(FrameError::PlaneSize {
                    expected: cw * ch,
                    actual: plane.len(),
                });
            }
        }
        frame.chroma = Some((u, v));
        Ok(frame)
    }

    /// A frame with every luma sample set to `value` and no chroma.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, FrameError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, FrameError> {
        let mut luma = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                luma.push(f(x, y));
            }
        }
        Self::new(width, height, luma)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn luma(&self) -> &[u8] {
        &self.luma
    }

    pub fn chroma(&self) -> Option<(&[u8], &[u8])> {
        self.chroma.as_ref().map(|(u, v)| (u.as_slice(), v.as_slice()))
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.luma[y * self.width + x]
    }

    /// Sample fetch with coordinates clamped to the frame edges.
    #[inline]
    pub fn at_clamped(&self, x: isize, y: isize) -> u8 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.luma[cy * self.width + cx]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.luma[y * self.width..(y + 1) * self.width]
    }

    /// Drops chroma, keeping only the luma plane.
    pub fn luma_only(&self) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            luma: self.luma.clone(),
            chroma: None,
        }
    }

    /// Top-left `width`x`height` window of the luma plane.
    pub fn crop(&self, width: usize, height: usize) -> Result<Frame, FrameError> {
        if width > self.width || height > self.height {
            return Err(FrameError::OutOfBounds {
                x: 0,
                y: 0,
                size: width.max(height),
                width: self.width,
                height: self.height,
            });
        }
        let mut luma = Vec::with_capacity(width * height);
        for y in 0..height {
            luma.extend_from_slice(&self.row(y)[..width]);
        }
        Frame::new(width, height, luma)
    }
}

fn pad_plane(src: &[u8], w: usize, h: usize, pw: usize, ph: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(pw * ph);
    for y in 0..ph {
        let row = &src[y.min(h - 1) * w..][..w];
        out.extend_from_slice(row);
        let edge = row[w - 1];
        out.resize(out.len() + (pw - w), edge);
    }
    out
}

/// Rounds the frame dimensions up to `multiple`, replicating edge samples
/// into the new area.
pub fn pad_to_multiple(frame: &Frame, multiple: usize) -> Frame {
    assert!(multiple > 0, "pad multiple must be positive");
    let pw = frame.width.next_multiple_of(multiple);
    let ph = frame.height.next_multiple_of(multiple);
    if pw == frame.width && ph == frame.height {
        return frame.clone();
    }
    let luma = pad_plane(&frame.luma, frame.width, frame.height, pw, ph);
    let chroma = frame.chroma.as_ref().map(|(u, v)| {
        let (cw, ch) = chroma_dims(frame.width, frame.height);
        let (pcw, pch) = chroma_dims(pw, ph);
        (
            pad_plane(u, cw, ch, pcw, pch),
            pad_plane(v, cw, ch, pcw, pch),
        )
    });
    Frame {
        width: pw,
        height: ph,
        luma,
        chroma,
    }
}

/// A square window of luma samples copied out of a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub x: usize,
    pub y: usize,
    pub size: usize,
    pub samples: Vec<u8>,
}

impl Block {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.size + x]
    }
}

pub fn extract_block(frame: &Frame, x: usize, y: usize, size: usize) -> Result<Block, FrameError> {
    if size == 0 || x + size > frame.width || y + size > frame.height {
        return Err(FrameError::OutOfBounds {
            x,
            y,
            size,
            width: frame.width,
            height: frame.height,
        });
    }
    let mut samples = Vec::with_capacity(size * size);
    for row in y..y + size {
        samples.extend_from_slice(&frame.row(row)[x..x + size]);
    }
    Ok(Block {
        x,
        y,
        size,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den.max(1) as f64
    }
}

impl Default for FrameRate {
    fn default() -> Self {
        Self { num: 30, den: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    frames: Vec<Frame>,
    pub frame_rate: FrameRate,
}

impl Sequence {
    pub fn new(frames: Vec<Frame>, frame_rate: FrameRate) -> Result<Self, FrameError> {
        if let Some(first) = frames.first() {
            if frames
                .iter()
                .any(|f| f.width != first.width || f.height != first.height)
            {
                return Err(FrameError::MismatchedDimensions);
            }
        }
        Ok(Self { frames, frame_rate })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// (width, height) of the frames, if any.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width, f.height))
    }

    /// Replaces the frame at `index`. Dimensions must match.
    pub fn replace(&mut self, index: usize, frame: Frame) -> Result<(), FrameError> {
        let slot = self.frames.get_mut(index).ok_or(FrameError::OutOfBounds {
            x: index,
            y: 0,
            size: 0,
            width: 0,
            height: 0,
        })?;
        if slot.width != frame.width || slot.height != frame.height {
            return Err(FrameError::MismatchedDimensions);
        }
        *slot = frame;
        Ok(())
    }
}
