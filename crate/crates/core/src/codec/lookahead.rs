//! One-frame lookahead: blocks of the current frame that the next frame
//! predicts well get a finer quantizer.

use super::CodecError;
use crate::frame::{pad_to_multiple, Frame};
use crate::motion::{SearchPlane, MB_AREA, MB_SIZE, MV_RANGE};

/// Per-16x16-block step multipliers of `cur` (raster order over the frame
/// padded to a multiple of 16).
///
/// Every block of `next` is matched against the original `cur`. The matched
/// window spreads `max(0, 1 - sad_inter / (sad_intra + 1))` over the blocks
/// of `cur` it overlaps, weighted by overlap area; `sad_intra` is the SAD of
/// the next-frame block to its own mean. A block with accumulated weight `w`
/// gets `clamp((1 + w)^-strength, 0.5, 1)`.
pub fn lookahead_weights(cur: &Frame, next: &Frame, strength: f64) -> Result<Vec<f64>, CodecError> {
    if cur.width() != next.width() || cur.height() != next.height() {
        return Err(CodecError::DimensionMismatch);
    }
    let cur = pad_to_multiple(cur, MB_SIZE);
    let next = pad_to_multiple(next, MB_SIZE);
    let bx = cur.width() / MB_SIZE;
    let by = cur.height() / MB_SIZE;
    if strength == 0.0 {
        return Ok(vec![1.0; bx * by]);
    }

    let plane = SearchPlane::new(&cur);
    let mut weight = vec![0.0f64; bx * by];
    let mut block = [0u8; MB_AREA];
    for j in 0..by {
        for i in 0..bx {
            let (x, y) = (i * MB_SIZE, j * MB_SIZE);
            for r in 0..MB_SIZE {
                block[r * MB_SIZE..(r + 1) * MB_SIZE].copy_from_slice(&next.row(y + r)[x..x + MB_SIZE]);
            }
            let sum: u32 = block.iter().map(|&v| v as u32).sum();
            let mean = ((sum + MB_AREA as u32 / 2) / MB_AREA as u32) as i32;
            let sad_intra: u32 = block.iter().map(|&v| (v as i32 - mean).unsigned_abs()).sum();
            let (mv, sad_inter) = plane.search(&block, x, y, MV_RANGE);
            let reuse = (1.0 - sad_inter as f64 / (sad_intra as f64 + 1.0)).max(0.0);
            if reuse == 0.0 {
                continue;
            }
            // matched window in cur
            let mx = x as i64 + mv.dx as i64;
            let my = y as i64 + mv.dy as i64;
            for cj in 0..by {
                let oy = overlap(my, cj as i64 * MB_SIZE as i64);
                if oy == 0 {
                    continue;
                }
                for ci in 0..bx {
                    let ox = overlap(mx, ci as i64 * MB_SIZE as i64);
                    if ox > 0 {
                        weight[cj * bx + ci] += reuse * (ox * oy) as f64 / MB_AREA as f64;
                    }
                }
            }
        }
    }
    Ok(weight
        .into_iter()
        .map(|w| (1.0 + w).powf(-strength).clamp(0.5, 1.0))
        .collect())
}

/// Overlap length of two 16-sample intervals starting at `a` and `b`.
fn overlap(a: i64, b: i64) -> i64 {
    let n = MB_SIZE as i64;
    (a.min(b) + n - a.max(b)).max(0)
}
