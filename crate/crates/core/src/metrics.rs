//! PSNR, bits per pixel and Bjontegaard delta rate.

use thiserror::Error;

use crate::frame::Frame;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("frame dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("bits per pixel needs a non-zero pixel count")]
    ZeroPixels,
    #[error("an RD curve needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("RD points must have positive bpp and finite PSNR")]
    InvalidPoint,
    #[error("RD curve is not strictly increasing in both bpp and PSNR")]
    NotMonotone,
    #[error("RD curves do not overlap in PSNR")]
    NoOverlap,
    #[error("least-squares system is singular")]
    Singular,
}

/// Mean squared error over the luma plane.
pub fn mse(reference: &Frame, reconstruction: &Frame) -> Result<f64, MetricsError> {
    let (a, b) = (
        (reference.width(), reference.height()),
        (reconstruction.width(), reconstruction.height()),
    );
    if a != b {
        return Err(MetricsError::DimensionMismatch(a, b));
    }
    let sse: u64 = reference
        .luma()
        .iter()
        .zip(reconstruction.luma())
        .map(|(&p, &q)| {
            let d = p as i64 - q as i64;
            (d * d) as u64
        })
        .sum();
    Ok(sse as f64 / reference.luma().len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}

/// Luma PSNR in dB; identical frames give `f64::INFINITY`.
pub fn psnr(reference: &Frame, reconstruction: &Frame) -> Result<f64, MetricsError> {
    mse(reference, reconstruction).map(psnr_from_mse)
}

/// `total_bits / (width * height * n_frames)`.
pub fn bpp(total_bits: u64, width: usize, height: usize, n_frames: usize) -> Result<f64, MetricsError> {
    let pixels = width as u64 * height as u64 * n_frames as u64;
    if pixels == 0 {
        return Err(MetricsError::ZeroPixels);
    }
    Ok(total_bits as f64 / pixels as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint {
    pub bpp: f64,
    pub psnr: f64,
}

impl RdPoint {
    pub fn new(bpp: f64, psnr: f64) -> Self {
        Self { bpp, psnr }
    }
}

/// At least four RD points, strictly increasing in both rate and quality.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

impl RdCurve {
    pub fn new(mut points: Vec<RdPoint>) -> Result<Self, MetricsError> {
        if points.len() < 4 {
            return Err(MetricsError::TooFewPoints(points.len()));
        }
        if points
            .iter()
            .any(|p| !(p.bpp > 0.0 && p.bpp.is_finite() && p.psnr.is_finite()))
        {
            return Err(MetricsError::InvalidPoint);
        }
        points.sort_by(|a, b| a.bpp.total_cmp(&b.bpp));
        if points
            .windows(2)
            .any(|w| w[1].bpp <= w[0].bpp || w[1].psnr <= w[0].psnr)
        {
            return Err(MetricsError::NotMonotone);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    fn psnr_range(&self) -> (f64, f64) {
        (self.points[0].psnr, self.points[self.points.len() - 1].psnr)
    }
}

/// Cubic `c0 + c1 t + c2 t^2 + c3 t^3` in the normalized variable
/// `t = (x - center) / scale`.
#[derive(Debug, Clone, Copy)]
struct Cubic {
    coeffs: [f64; 4],
    center: f64,
    scale: f64,
}

impl Cubic {
    fn fit(xs: &[f64], ys: &[f64]) -> Result<Self, MetricsError> {
        let n = xs.len() as f64;
        let center = xs.iter().sum::<f64>() / n;
        let scale = xs
            .iter()
            .map(|x| (x - center).abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        // normal equations A^T A c = A^T y
        let mut m = [[0.0f64; 5]; 4];
        for (&x, &y) in xs.iter().zip(ys) {
            let t = (x - center) / scale;
            let pw = [1.0, t, t * t, t * t * t];
            for r in 0..4 {
                for c in 0..4 {
                    m[r][c] += pw[r] * pw[c];
                }
                m[r][4] += pw[r] * y;
            }
        }
        for col in 0..4 {
            let pivot = (col..4)
                .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                .unwrap();
            if m[pivot][col].abs() < 1e-12 {
                return Err(MetricsError::Singular);
            }
            m.swap(col, pivot);
            for r in 0..4 {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for c in col..5 {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
        let mut coeffs = [0.0; 4];
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c = m[i][4] / m[i][i];
        }
        Ok(Self {
            coeffs,
            center,
            scale,
        })
    }

    fn antiderivative_t(&self, t: f64) -> f64 {
        let c = &self.coeffs;
        t * (c[0] + t * (c[1] / 2.0 + t * (c[2] / 3.0 + t * c[3] / 4.0)))
    }

    /// Integral over `x` in `[lo, hi]`.
    fn integrate(&self, lo: f64, hi: f64) -> f64 {
        let tl = (lo - self.center) / self.scale;
        let th = (hi - self.center) / self.scale;
        self.scale * (self.antiderivative_t(th) - self.antiderivative_t(tl))
    }
}

/// Average bitrate difference of `test` against `anchor` at equal PSNR, in
/// percent. Negative values mean `test` needs fewer bits.
///
/// Both curves are fitted with least-squares cubics of `log10(bpp)` as a
/// function of PSNR and integrated over the shared PSNR interval.
pub fn bd_rate(anchor: &RdCurve, test: &RdCurve) -> Result<f64, MetricsError> {
    let (a_lo, a_hi) = anchor.psnr_range();
    let (t_lo, t_hi) = test.psnr_range();
    let lo = a_lo.max(t_lo);
    let hi = a_hi.min(t_hi);
    if hi <= lo {
        return Err(MetricsError::NoOverlap);
    }
    let fit = |c: &RdCurve| {
        let xs: Vec<f64> = c.points.iter().map(|p| p.psnr).collect();
        let ys: Vec<f64> = c.points.iter().map(|p| p.bpp.log10()).collect();
        Cubic::fit(&xs, &ys)
    };
    let fa = fit(anchor)?;
    let ft = fit(test)?;
    let avg_diff = (ft.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo);
    Ok((10f64.powf(avg_diff) - 1.0) * 100.0)
}
