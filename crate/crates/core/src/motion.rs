//! Full-pel block matching, motion compensation and per-block choice between
//! the adjacent reference, the key reference, their average, or a flat DC
//! prediction.

use crate::frame::{Block, Frame};

pub const MB_SIZE: usize = 16;
pub const MB_AREA: usize = MB_SIZE * MB_SIZE;
pub const MV_RANGE: i32 = 16;
/// Estimated header bits of any prediction mode.
pub const MODE_HEADER_BITS: f64 = 2.0;
/// Bits of the transmitted flat value of `IntraDc`.
pub const DC_BITS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MotionVector {
    pub dx: i32,
    pub dy: i32,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { dx: 0, dy: 0 };

    pub fn new(dx: i32, dy: i32) -> Self {
        Self { dx, dy }
    }

    pub fn in_range(self) -> bool {
        self.dx.abs() <= MV_RANGE && self.dy.abs() <= MV_RANGE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredMode {
    Adj,
    Key,
    Avg,
    IntraDc,
}

impl PredMode {
    pub const ALL: [PredMode; 4] = [PredMode::Adj, PredMode::Key, PredMode::Avg, PredMode::IntraDc];

    pub fn uses_adj(self) -> bool {
        matches!(self, PredMode::Adj | PredMode::Avg)
    }

    pub fn uses_key(self) -> bool {
        matches!(self, PredMode::Key | PredMode::Avg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockPrediction {
    pub mode: PredMode,
    pub mv_adj: MotionVector,
    pub mv_key: MotionVector,
    /// Flat prediction value, meaningful for `IntraDc`.
    pub dc: u8,
    pub prediction: [u8; MB_AREA],
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionField {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub blocks: Vec<BlockPrediction>,
}

impl MotionField {
    pub fn mode_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for b in &self.blocks {
            counts[b.mode as usize] += 1;
        }
        counts
    }
}

/// Reference plane with a replicated border so that every candidate of a
/// +-16 search around an in-frame block is a plain slice read.
#[derive(Debug, Clone)]
pub struct SearchPlane {
    width: usize,
    height: usize,
    stride: usize,
    data: Vec<u8>,
}

const BORDER: usize = MV_RANGE as usize;

impl SearchPlane {
    pub fn new(frame: &Frame) -> Self {
        let stride = frame.width() + 2 * BORDER;
        let rows = frame.height() + 2 * BORDER;
        let mut data = Vec::with_capacity(stride * rows);
        for y in 0..rows {
            let sy = y as isize - BORDER as isize;
            for x in 0..stride {
                data.push(frame.at_clamped(x as isize - BORDER as isize, sy));
            }
        }
        Self {
            width: frame.width(),
            height: frame.height(),
            stride,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn fast_offset(&self, x: isize, y: isize) -> Option<usize> {
        let b = BORDER as isize;
        let max_x = (self.width + BORDER) as isize - MB_SIZE as isize;
        let max_y = (self.height + BORDER) as isize - MB_SIZE as isize;
        if x >= -b && y >= -b && x <= max_x && y <= max_y {
            Some((y + b) as usize * self.stride + (x + b) as usize)
        } else {
            None
        }
    }

    #[inline]
    fn at_clamped(&self, x: isize, y: isize) -> u8 {
        let cx = x.clamp(0, self.width as isize - 1) as usize + BORDER;
        let cy = y.clamp(0, self.height as isize - 1) as usize + BORDER;
        self.data[cy * self.stride + cx]
    }

    /// 16x16 block at `(x, y)` with edge clamping.
    pub fn fetch(&self, x: isize, y: isize) -> [u8; MB_AREA] {
        let mut out = [0u8; MB_AREA];
        if let Some(off) = self.fast_offset(x, y) {
            for r in 0..MB_SIZE {
                out[r * MB_SIZE..(r + 1) * MB_SIZE]
                    .copy_from_slice(&self.data[off + r * self.stride..][..MB_SIZE]);
            }
        } else {
            for r in 0..MB_SIZE {
                for c in 0..MB_SIZE {
                    out[r * MB_SIZE + c] = self.at_clamped(x + c as isize, y + r as isize);
                }
            }
        }
        out
    }

    /// SAD of `cur` against the block at `(x, y)`; stops early once above `limit`.
    #[inline]
    fn sad(&self, cur: &[u8], x: isize, y: isize, limit: u32) -> u32 {
        match self.fast_offset(x, y) {
            Some(off) => {
                let mut acc = 0u32;
                for r in 0..MB_SIZE {
                    let a = &cur[r * MB_SIZE..][..MB_SIZE];
                    let b = &self.data[off + r * self.stride..][..MB_SIZE];
                    acc += a
                        .iter()
                        .zip(b)
                        .map(|(&p, &q)| p.abs_diff(q) as u32)
                        .sum::<u32>();
                    if acc > limit {
                        return acc;
                    }
                }
                acc
            }
            None => sad_blocks(cur, &self.fetch(x, y)),
        }
    }

    /// Exhaustive search over `(2 range + 1)^2` full-pel candidates around
    /// `(cx, cy)`. Ties prefer smaller `|dx| + |dy|`, then smaller `dy`, then
    /// smaller `dx`.
    pub fn search(&self, cur: &[u8], cx: usize, cy: usize, range: i32) -> (MotionVector, u32) {
        let range = range.clamp(0, MV_RANGE);
        let (cx, cy) = (cx as isize, cy as isize);
        let zero_sad = self.sad(cur, cx, cy, u32::MAX);
        if zero_sad == 0 {
            return (MotionVector::ZERO, 0);
        }
        let mut best = (zero_sad, 0i32, 0i32, 0i32);
        for dy in -range..=range {
            for dx in -range..=range {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let s = self.sad(cur, cx + dx as isize, cy + dy as isize, best.0);
                let key = (s, dx.abs() + dy.abs(), dy, dx);
                if key < best {
                    best = key;
                }
            }
        }
        (MotionVector::new(best.3, best.2), best.0)
    }
}

pub fn sad_blocks(a: &[u8], b: &[u8]) -> u32 {
    a.iter().zip(b).map(|(&p, &q)| p.abs_diff(q) as u32).sum()
}

pub fn sse_blocks(a: &[u8], b: &[u8]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&p, &q)| {
            let d = p as i64 - q as i64;
            (d * d) as u64
        })
        .sum()
}

/// Full search of a 16x16 block against `reference` around `center`.
pub fn motion_search(
    cur: &Block,
    reference: &Frame,
    center: (usize, usize),
    range: i32,
) -> (MotionVector, u32) {
    assert_eq!(cur.size, MB_SIZE, "motion search works on 16x16 blocks");
    SearchPlane::new(reference).search(&cur.samples, center.0, center.1, range)
}

/// 16x16 block at `origin + mv`, clamping coordinates to the frame edges.
pub fn motion_compensate(reference: &Frame, mv: MotionVector, origin: (usize, usize)) -> [u8; MB_AREA] {
    let mut out = [0u8; MB_AREA];
    let x0 = origin.0 as isize + mv.dx as isize;
    let y0 = origin.1 as isize + mv.dy as isize;
    for r in 0..MB_SIZE {
        for c in 0..MB_SIZE {
            out[r * MB_SIZE + c] = reference.at_clamped(x0 + c as isize, y0 + r as isize);
        }
    }
    out
}

/// Per-sample mean of two predictions, rounding halves up.
pub fn average_blocks(a: &[u8; MB_AREA], b: &[u8; MB_AREA]) -> [u8; MB_AREA] {
    let mut out = [0u8; MB_AREA];
    for ((o, &p), &q) in out.iter_mut().zip(a).zip(b) {
        *o = ((p as u16 + q as u16 + 1) >> 1) as u8;
    }
    out
}

fn median3(a: i32, b: i32, c: i32) -> i32 {
    a.max(b).min(a.min(b).max(c))
}

/// Component-wise median of `left`, `above` and the zero vector.
pub fn predict_mv(left: Option<MotionVector>, above: Option<MotionVector>) -> MotionVector {
    let l = left.unwrap_or_default();
    let a = above.unwrap_or_default();
    MotionVector::new(median3(l.dx, a.dx, 0), median3(l.dy, a.dy, 0))
}

/// Signed to unsigned mapping 0, -1, 1, -2, 2, ... -> 0, 1, 2, 3, 4, ...
#[inline]
pub fn zigzag(v: i32) -> u32 {
    crate::entropy::zigzag_map(v)
}

/// Length of the order-0 exp-Golomb codeword for `v`.
#[inline]
pub fn exp_golomb_len(v: u32) -> u32 {
    let n = 64 - (v as u64 + 1).leading_zeros();
    2 * n - 1
}

pub fn mv_bits(mv: MotionVector, pred: MotionVector) -> u32 {
    exp_golomb_len(zigzag(mv.dx - pred.dx)) + exp_golomb_len(zigzag(mv.dy - pred.dy))
}

/// Rounded mean of the original samples directly above and left of the
/// block at `(x, y)`, or 128 at the top-left corner.
pub fn causal_dc(original: &Frame, x: usize, y: usize) -> u8 {
    let mut sum = 0u32;
    let mut n = 0u32;
    if y > 0 {
        let row = original.row(y - 1);
        let end = (x + MB_SIZE).min(original.width());
        sum += row[x..end].iter().map(|&v| v as u32).sum::<u32>();
        n += (end - x) as u32;
    }
    if x > 0 {
        let end = (y + MB_SIZE).min(original.height());
        for yy in y..end {
            sum += original.at(x - 1, yy) as u32;
        }
        n += (end - y) as u32;
    }
    if n == 0 {
        128
    } else {
        ((sum + n / 2) / n) as u8
    }
}

/// Neighbourhood information the mode decision needs besides the references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionContext {
    pub origin: (usize, usize),
    pub pred_adj: MotionVector,
    pub pred_key: MotionVector,
    pub intra_dc: u8,
}

/// Estimated bits of a mode: header plus exp-Golomb lengths of the coded
/// motion vector residuals, or the flat value for `IntraDc`.
pub fn estimate_mode_bits(
    mode: PredMode,
    mv_adj: MotionVector,
    mv_key: MotionVector,
    ctx: &PredictionContext,
) -> f64 {
    let mut bits = MODE_HEADER_BITS;
    if mode.uses_adj() {
        bits += mv_bits(mv_adj, ctx.pred_adj) as f64;
    }
    if mode.uses_key() {
        bits += mv_bits(mv_key, ctx.pred_key) as f64;
    }
    if mode == PredMode::IntraDc {
        bits += DC_BITS;
    }
    bits
}

/// Every candidate the mode decision weighs, in tie-break order.
pub fn evaluate_candidates(
    cur: &[u8],
    adj_ref: &SearchPlane,
    key_ref: Option<&SearchPlane>,
    lambda_eff: f64,
    ctx: &PredictionContext,
) -> Vec<BlockPrediction> {
    let (x, y) = ctx.origin;
    let make = |mode, mv_adj, mv_key, dc, prediction: [u8; MB_AREA]| {
        let d = sse_blocks(cur, &prediction) as f64;
        let r = estimate_mode_bits(mode, mv_adj, mv_key, ctx);
        BlockPrediction {
            mode,
            mv_adj,
            mv_key,
            dc,
            prediction,
            cost: d + lambda_eff * r,
        }
    };

    let mut out = Vec::with_capacity(4);
    let (mv_adj, _) = adj_ref.search(cur, x, y, MV_RANGE);
    let adj_pred = adj_ref.fetch(x as isize + mv_adj.dx as isize, y as isize + mv_adj.dy as isize);
    out.push(make(PredMode::Adj, mv_adj, MotionVector::ZERO, 0, adj_pred));

    if let Some(key_ref) = key_ref {
        let (mv_key, _) = key_ref.search(cur, x, y, MV_RANGE);
        let key_pred =
            key_ref.fetch(x as isize + mv_key.dx as isize, y as isize + mv_key.dy as isize);
        out.push(make(PredMode::Key, MotionVector::ZERO, mv_key, 0, key_pred));
        let avg = average_blocks(&adj_pred, &key_pred);
        out.push(make(PredMode::Avg, mv_adj, mv_key, 0, avg));
    }

    out.push(make(
        PredMode::IntraDc,
        MotionVector::ZERO,
        MotionVector::ZERO,
        ctx.intra_dc,
        [ctx.intra_dc; MB_AREA],
    ));
    out
}

/// Minimum-cost prediction among the available modes; ties keep the
/// earlier mode in `Adj < Key < Avg < IntraDc` order.
pub fn predict_multi_ref(
    cur: &[u8],
    adj_ref: &SearchPlane,
    key_ref: Option<&SearchPlane>,
    lambda_eff: f64,
    ctx: &PredictionContext,
) -> BlockPrediction {
    let mut best: Option<BlockPrediction> = None;
    for cand in evaluate_candidates(cur, adj_ref, key_ref, lambda_eff, ctx) {
        if best.as_ref().is_none_or(|b| cand.cost < b.cost) {
            best = Some(cand);
        }
    }
    best.expect("at least two candidates are always evaluated")
}

/// Rebuilds the prediction of a decoded block from its mode and vectors.
pub fn build_prediction(
    mode: PredMode,
    mv_adj: MotionVector,
    mv_key: MotionVector,
    dc: u8,
    origin: (usize, usize),
    adj_ref: &SearchPlane,
    key_ref: Option<&SearchPlane>,
) -> Option<[u8; MB_AREA]> {
    let (x, y) = (origin.0 as isize, origin.1 as isize);
    let adj = || adj_ref.fetch(x + mv_adj.dx as isize, y + mv_adj.dy as isize);
    let key = |k: &SearchPlane| k.fetch(x + mv_key.dx as isize, y + mv_key.dy as isize);
    Some(match mode {
        PredMode::Adj => adj(),
        PredMode::Key => key(key_ref?),
        PredMode::Avg => average_blocks(&adj(), &key(key_ref?)),
        PredMode::IntraDc => [dc; MB_AREA],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::extract_block;
    use rand_core::{RngCore, SeedableRng};
    use rand_xoshiro::Xoshiro256StarStar;

    fn noise_frame(w: usize, h: usize, seed: u64) -> Frame {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        Frame::from_fn(w, h, |_, _| (rng.next_u64() & 0xff) as u8).unwrap()
    }

    /// Independent exhaustive search over `motion_compensate`.
    fn oracle_search(cur: &Block, reference: &Frame, range: i32) -> (MotionVector, u32) {
        let mut best: Option<(u32, i32, i32, i32)> = None;
        for dy in -range..=range {
            for dx in -range..=range {
                let p = motion_compensate(reference, MotionVector::new(dx, dy), (cur.x, cur.y));
                let s: u32 = cur
                    .samples
                    .iter()
                    .zip(p.iter())
                    .map(|(&a, &b)| (a as i32 - b as i32).unsigned_abs())
                    .sum();
                let key = (s, dx.abs() + dy.abs(), dy, dx);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        let b = best.unwrap();
        (MotionVector::new(b.3, b.2), b.0)
    }

    #[test]
    fn finds_constructed_translation() {
        let base = noise_frame(64, 64, 1);
        // reference sample at (x + 3, y - 2) equals current sample at (x, y)
        let reference = Frame::from_fn(64, 64, |x, y| base.at_clamped(x as isize - 3, y as isize + 2)).unwrap();
        let cur = extract_block(&base, 16, 16, 16).unwrap();
        let (mv, sad) = motion_search(&cur, &reference, (16, 16), 8);
        assert_eq!((mv, sad), (MotionVector::new(3, -2), 0));
        let mc = motion_compensate(&reference, mv, (16, 16));
        assert_eq!(&mc[..], &cur.samples[..]);
    }

    #[test]
    fn identical_reference_gives_zero_vector() {
        let f = noise_frame(48, 48, 2);
        let cur = extract_block(&f, 16, 16, 16).unwrap();
        assert_eq!(motion_search(&cur, &f, (16, 16), 16), (MotionVector::ZERO, 0));
    }

    #[test]
    fn constant_reference_ties_to_zero() {
        let f = noise_frame(48, 48, 3);
        let cur = extract_block(&f, 16, 0, 16).unwrap();
        let flat = Frame::filled(48, 48, 90).unwrap();
        let expect: u32 = cur.samples.iter().map(|&v| (v as i32 - 90).unsigned_abs()).sum();
        for dy in -4..=4 {
            for dx in -4..=4 {
                let p = motion_compensate(&flat, MotionVector::new(dx, dy), (16, 0));
                assert_eq!(sad_blocks(&cur.samples, &p), expect);
            }
        }
        assert_eq!(motion_search(&cur, &flat, (16, 0), 8), (MotionVector::ZERO, expect));
    }

    #[test]
    fn search_matches_oracle() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(99);
        for i in 0..100 {
            let w = 32 + 16 * (rng.next_u64() % 3) as usize;
            let h = 32 + 16 * (rng.next_u64() % 2) as usize;
            let cur_f = noise_frame(w, h, 1000 + i);
            // Mostly-translated references so the minimum is informative.
            let (sx, sy) = ((rng.next_u64() % 11) as isize - 5, (rng.next_u64() % 11) as isize - 5);
            let smooth = i % 2 == 0;
            let reference = Frame::from_fn(w, h, |x, y| {
                let v = cur_f.at_clamped(x as isize + sx, y as isize + sy);
                if smooth { v / 32 * 32 } else { v }
            })
            .unwrap();
            let bx = 16 * (rng.next_u64() as usize % (w / 16));
            let by = 16 * (rng.next_u64() as usize % (h / 16));
            let cur = extract_block(&cur_f, bx, by, 16).unwrap();
            let range = if i % 3 == 0 { 16 } else { 6 };
            assert_eq!(
                motion_search(&cur, &reference, (bx, by), range),
                oracle_search(&cur, &reference, range),
                "case {i}"
            );
        }
    }

    #[test]
    fn compensation_clamps_outside() {
        let f = Frame::from_fn(32, 32, |x, y| (x * 8 + y) as u8).unwrap();
        let p = motion_compensate(&f, MotionVector::new(-16, -16), (0, 0));
        assert!(p.iter().all(|&v| v == f.at(0, 0)));
        let p = motion_compensate(&f, MotionVector::new(16, 16), (16, 16));
        assert!(p.iter().all(|&v| v == f.at(31, 31)));
        let p = motion_compensate(&f, MotionVector::ZERO, (16, 0));
        assert_eq!(&p[..], &extract_block(&f, 16, 0, 16).unwrap().samples[..]);
        let plane = SearchPlane::new(&f);
        for (dx, dy) in [(-16, -16), (16, 16), (3, -7), (0, 0)] {
            let mv = MotionVector::new(dx, dy);
            for (ox, oy) in [(0usize, 0usize), (16, 16), (16, 0)] {
                assert_eq!(
                    plane.fetch(ox as isize + dx as isize, oy as isize + dy as isize),
                    motion_compensate(&f, mv, (ox, oy))
                );
            }
        }
        // far outside the bordered plane
        assert_eq!(plane.fetch(-100, 200), [f.at(0, 31); MB_AREA]);
    }

    #[test]
    fn mv_prediction() {
        assert_eq!(predict_mv(None, None), MotionVector::ZERO);
        assert_eq!(predict_mv(Some(MotionVector::new(4, 2)), None), MotionVector::ZERO);
        assert_eq!(
            predict_mv(Some(MotionVector::new(4, 2)), Some(MotionVector::new(6, 2))),
            MotionVector::new(4, 2)
        );
        assert_eq!(
            predict_mv(Some(MotionVector::new(-4, 3)), Some(MotionVector::new(-1, 9))),
            MotionVector::new(-1, 3)
        );
    }

    #[test]
    fn zigzag_and_eg_lengths() {
        let z: Vec<u32> = [0, -1, 1, -2, 2].iter().map(|&v| zigzag(v)).collect();
        assert_eq!(z, vec![0, 1, 2, 3, 4]);
        assert_eq!(exp_golomb_len(0), 1);
        assert_eq!(exp_golomb_len(1), 3);
        assert_eq!(exp_golomb_len(2), 3);
        assert_eq!(exp_golomb_len(3), 5);
        assert_eq!(exp_golomb_len(4), 5);
        assert_eq!(exp_golomb_len(7), 7);
    }

    fn ctx_at(origin: (usize, usize), dc: u8) -> PredictionContext {
        PredictionContext {
            origin,
            pred_adj: MotionVector::ZERO,
            pred_key: MotionVector::ZERO,
            intra_dc: dc,
        }
    }

    #[test]
    fn exact_adjacent_match_wins() {
        let f = noise_frame(32, 32, 5);
        let cur = extract_block(&f, 0, 0, 16).unwrap();
        let plane = SearchPlane::new(&f);
        let key = SearchPlane::new(&noise_frame(32, 32, 6));
        for lambda in [0.0, 1.0, 1e3] {
            let p = predict_multi_ref(&cur.samples, &plane, Some(&key), lambda, &ctx_at((0, 0), 128));
            assert_eq!(p.mode, PredMode::Adj);
            assert_eq!(sse_blocks(&cur.samples, &p.prediction), 0);
        }
    }

    #[test]
    fn intra_dc_wins_on_flat_block_over_noise() {
        let cur = Frame::filled(32, 32, 90).unwrap();
        let adj = noise_frame(32, 32, 8);
        let block = extract_block(&cur, 16, 16, 16).unwrap();
        let ctx = ctx_at((16, 16), causal_dc(&cur, 16, 16));
        assert_eq!(ctx.intra_dc, 90);
        let plane = SearchPlane::new(&adj);
        for lambda in [0.0, 1.0, 1e3, 1e9] {
            let cands = evaluate_candidates(&block.samples, &plane, None, lambda, &ctx);
            assert_eq!(cands.len(), 2);
            let p = predict_multi_ref(&block.samples, &plane, None, lambda, &ctx);
            assert_eq!(p.mode, PredMode::IntraDc);
            assert_eq!(p.prediction, [90; MB_AREA]);
        }
        let r = estimate_mode_bits(PredMode::IntraDc, MotionVector::ZERO, MotionVector::ZERO, &ctx);
        assert_eq!(r, MODE_HEADER_BITS + DC_BITS);
    }

    #[test]
    fn average_mode_on_midpoint_content() {
        // Two references that deviate from the current frame by +e and -e in
        // a checkerboard; only their mean reproduces it.
        let cur = noise_frame(32, 32, 9);
        let cur = Frame::from_fn(32, 32, |x, y| 20 + cur.at(x, y) % 200).unwrap();
        let e = |x: usize, y: usize| if (x + y) % 2 == 0 { 10i32 } else { -10 };
        let a = Frame::from_fn(32, 32, |x, y| (cur.at(x, y) as i32 + e(x, y)) as u8).unwrap();
        let b = Frame::from_fn(32, 32, |x, y| (cur.at(x, y) as i32 - e(x, y)) as u8).unwrap();
        let block = extract_block(&cur, 0, 0, 16).unwrap();
        let (pa, pb) = (SearchPlane::new(&a), SearchPlane::new(&b));
        let ctx = ctx_at((0, 0), 128);
        let lambda = 10.0;
        let cands = evaluate_candidates(&block.samples, &pa, Some(&pb), lambda, &ctx);
        let avg = &cands[2];
        assert_eq!(avg.mode, PredMode::Avg);
        assert_eq!(sse_blocks(&block.samples, &avg.prediction), 0);
        let single_gap = cands[0].cost.min(cands[1].cost);
        assert!(avg.cost < single_gap);
        let p = predict_multi_ref(&block.samples, &pa, Some(&pb), lambda, &ctx);
        assert_eq!(p.mode, PredMode::Avg);
    }

    #[test]
    fn mode_decision_properties() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(21);
        for i in 0..40 {
            let cur = noise_frame(48, 48, 300 + i);
            let adj = Frame::from_fn(48, 48, |x, y| {
                cur.at_clamped(x as isize - 1, y as isize).saturating_add((rng.next_u64() % 9) as u8)
            })
            .unwrap();
            let key = if i % 2 == 0 { adj.clone() } else { noise_frame(48, 48, 500 + i) };
            let (pa, pk) = (SearchPlane::new(&adj), SearchPlane::new(&key));
            let origin = (16 * (i as usize % 3), 16 * ((i as usize / 3) % 3));
            let block = extract_block(&cur, origin.0, origin.1, 16).unwrap();
            let ctx = PredictionContext {
                origin,
                pred_adj: MotionVector::new(1, 0),
                pred_key: MotionVector::new(-2, 1),
                intra_dc: causal_dc(&cur, origin.0, origin.1),
            };
            let mut prev_d = u64::MAX;
            for lambda in [1e5, 1e4, 1e3, 100.0, 10.0, 1.0, 0.0] {
                let chosen = predict_multi_ref(&block.samples, &pa, Some(&pk), lambda, &ctx);
                // recompute every candidate independently
                for mode in PredMode::ALL {
                    let (mv_adj, _) = oracle_search(&block, &adj, MV_RANGE);
                    let (mv_key, _) = oracle_search(&block, &key, MV_RANGE);
                    let pred = match mode {
                        PredMode::Adj => motion_compensate(&adj, mv_adj, origin),
                        PredMode::Key => motion_compensate(&key, mv_key, origin),
                        PredMode::Avg => average_blocks(
                            &motion_compensate(&adj, mv_adj, origin),
                            &motion_compensate(&key, mv_key, origin),
                        ),
                        PredMode::IntraDc => [ctx.intra_dc; MB_AREA],
                    };
                    let cost = sse_blocks(&block.samples, &pred) as f64
                        + lambda * estimate_mode_bits(mode, mv_adj, mv_key, &ctx);
                    assert!(chosen.cost <= cost + 1e-9);
                }
                let d = sse_blocks(&block.samples, &chosen.prediction);
                assert!(d <= prev_d, "distortion rose when lambda fell");
                prev_d = d;
                if i % 2 == 0 {
                    assert_ne!(chosen.mode, PredMode::Key);
                }
            }
        }
    }

    #[test]
    fn key_equal_to_adj_prefers_adj() {
        let f = noise_frame(32, 32, 40);
        let cur = noise_frame(32, 32, 41);
        let block = extract_block(&cur, 16, 0, 16).unwrap();
        let plane = SearchPlane::new(&f);
        let ctx = ctx_at((16, 0), 0);
        let cands = evaluate_candidates(&block.samples, &plane, Some(&plane), 5.0, &ctx);
        assert_eq!(cands[0].prediction, cands[1].prediction);
        assert_eq!(cands[0].cost, cands[1].cost);
        let p = predict_multi_ref(&block.samples, &plane, Some(&plane), 5.0, &ctx);
        assert_ne!(p.mode, PredMode::Key);
    }

    #[test]
    fn causal_dc_values() {
        let f = Frame::from_fn(32, 32, |x, y| if y == 15 { 100 } else if x == 15 { 50 } else { 0 }).unwrap();
        // corner (15, 15) belongs to the row of 100s
        assert_eq!(causal_dc(&f, 0, 0), 128);
        assert_eq!(causal_dc(&f, 0, 16), 100);
        assert_eq!(causal_dc(&f, 16, 0), 53);
        assert_eq!(causal_dc(&f, 16, 16), 75);
    }
}
