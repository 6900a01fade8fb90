//! YUV4MPEG2 reader and writer for progressive 8-bit 4:2:0.

use thiserror::Error;

use crate::frame::{chroma_dims, Frame, FrameError, FrameRate, Sequence};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Y4mError {
    #[error("missing YUV4MPEG2 signature")]
    BadSignature,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unsupported colorspace {0}")]
    UnsupportedColorspace(String),
    #[error("interlaced content is not supported")]
    Interlaced,
    #[error("frame {0} is truncated")]
    TruncatedFrame(usize),
    #[error("frame {0} lacks a FRAME marker")]
    MissingFrameMarker(usize),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

const SIGNATURE: &[u8] = b"YUV4MPEG2";

fn line_end(bytes: &[u8], from: usize) -> Option<usize> {
    bytes[from..].iter().position(|&b| b == b'\n').map(|p| from + p)
}

pub fn parse_y4m(bytes: &[u8]) -> Result<Sequence, Y4mError> {
    if !bytes.starts_with(SIGNATURE) {
        return Err(Y4mError::BadSignature);
    }
    let end = line_end(bytes, 0).ok_or_else(|| Y4mError::BadHeader("unterminated header".into()))?;
    let header = std::str::from_utf8(&bytes[SIGNATURE.len()..end])
        .map_err(|_| Y4mError::BadHeader("header is not UTF-8".into()))?;
    let (mut width, mut height, mut rate) = (None, None, None);
    for token in header.split_ascii_whitespace() {
        let (tag, value) = token.split_at(1);
        match tag {
            "W" => width = value.parse::<usize>().ok(),
            "H" => height = value.parse::<usize>().ok(),
            "F" => {
                let (n, d) = value
                    .split_once(':')
                    .ok_or_else(|| Y4mError::BadHeader(format!("frame rate {value}")))?;
                let num = n.parse().map_err(|_| Y4mError::BadHeader(format!("frame rate {value}")))?;
                let den: u32 = d.parse().map_err(|_| Y4mError::BadHeader(format!("frame rate {value}")))?;
                if den == 0 {
                    return Err(Y4mError::BadHeader("zero frame rate denominator".into()));
                }
                rate = Some(FrameRate { num, den });
            }
            "I" => {
                if value != "p" && value != "?" {
                    return Err(Y4mError::Interlaced);
                }
            }
            "C"
                if (!value.starts_with("420") || value.contains("p10") || value.contains("p12")) => {
                    return Err(Y4mError::UnsupportedColorspace(value.to_string()));
                }
            _ => {}
        }
    }
    let width = width.filter(|&w| w > 0).ok_or_else(|| Y4mError::BadHeader("missing W".into()))?;
    let height = height.filter(|&h| h > 0).ok_or_else(|| Y4mError::BadHeader("missing H".into()))?;
    let rate = rate.ok_or_else(|| Y4mError::BadHeader("missing F".into()))?;

    let (cw, ch) = chroma_dims(width, height);
    let luma_len = width * height;
    let chroma_len = cw * ch;
    let frame_len = luma_len + 2 * chroma_len;
    let mut frames = Vec::new();
    let mut pos = end + 1;
    while pos < bytes.len() {
        let index = frames.len();
        if !bytes[pos..].starts_with(b"FRAME") {
            return Err(Y4mError::MissingFrameMarker(index));
        }
        let marker_end = line_end(bytes, pos).ok_or(Y4mError::TruncatedFrame(index))?;
        let data = bytes
            .get(marker_end + 1..marker_end + 1 + frame_len)
            .ok_or(Y4mError::TruncatedFrame(index))?;
        let frame = Frame::with_chroma(
            width,
            height,
            data[..luma_len].to_vec(),
            data[luma_len..luma_len + chroma_len].to_vec(),
            data[luma_len + chroma_len..].to_vec(),
        )?;
        frames.push(frame);
        pos = marker_end + 1 + frame_len;
    }
    Ok(Sequence::new(frames, rate)?)
}

/// Writes `YUV4MPEG2 W<w> H<h> F<n>:<d> Ip C420jpeg`. Frames without chroma
/// get neutral (128) chroma planes.
pub fn write_y4m(seq: &Sequence) -> Vec<u8> {
    let (w, h) = seq.dims().unwrap_or((0, 0));
    let fr = seq.frame_rate;
    let mut out = format!("YUV4MPEG2 W{w} H{h} F{}:{} Ip C420jpeg\n", fr.num, fr.den).into_bytes();
    let (cw, ch) = chroma_dims(w, h);
    let neutral = vec![128u8; cw * ch];
    for f in seq.frames() {
        out.extend_from_slice(b"FRAME\n");
        out.extend_from_slice(f.luma());
        match f.chroma() {
            Some((u, v)) => {
                out.extend_from_slice(u);
                out.extend_from_slice(v);
            }
            None => {
                out.extend_from_slice(&neutral);
                out.extend_from_slice(&neutral);
            }
        }
    }
    out
}
