//! Experiment drivers and their CSV reports.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{encode_sequence, mean_capped_psnr, CodecConfig, CodecError, EncodeOutput};
use crate::frame::{Frame, FrameError, Sequence};
use crate::metrics::{psnr, MetricsError, RdCurve, RdPoint};
use crate::structure::LayerId;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRow {
    pub index: usize,
    #[serde(rename = "type")]
    pub frame_type: String,
    /// `-` for intra frames.
    pub layer: String,
    pub omega: f64,
    pub bits: u64,
    pub psnr: f64,
    /// Left out of every summary statistic.
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub key: String,
    pub value: String,
}

/// Per-frame rows plus key/value summary rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<FrameRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentReport {
    pub fn from_encode(out: &EncodeOutput) -> Self {
        let rows = out
            .stats
            .iter()
            .map(|s| FrameRow {
                index: s.index,
                frame_type: s.frame_type.name().to_string(),
                layer: s.layer.map_or("-", LayerId::name).to_string(),
                omega: s.omega,
                bits: s.bits,
                psnr: s.psnr,
                excluded: false,
            })
            .collect();
        let mut r = Self {
            rows,
            summary: Vec::new(),
        };
        r.push("frames", out.stats.len());
        r.push("bpp", out.bpp());
        r.push("total_bits", out.total_bits());
        r
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.summary.iter_mut().find(|r| r.key == key) {
            Some(row) => row.value = value,
            None => self.summary.push(SummaryRow {
                key: key.to_string(),
                value,
            }),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|r| r.key == key).map(|r| r.value.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    /// Mean capped PSNR over the non-excluded rows selected by `keep`.
    pub fn mean_psnr_where(&self, keep: impl Fn(&FrameRow) -> bool) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter(|r| !r.excluded && keep(r)).map(|r| r.psnr).collect();
        (!v.is_empty()).then(|| mean_capped_psnr(v))
    }

    pub fn frames_csv(&self) -> Result<String, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record(["index", "type", "layer", "omega", "bits", "psnr", "excluded"])?;
        }
        for r in &self.rows {
            w.serialize(r)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is UTF-8"))
    }

    pub fn summary_csv(&self) -> Result<String, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.summary.is_empty() {
            w.write_record(["key", "value"])?;
        }
        for r in &self.summary {
            w.serialize(r)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is UTF-8"))
    }

    pub fn from_csv(frames: &str, summary: &str) -> Result<Self, ExperimentError> {
        let rows = csv::Reader::from_reader(frames.as_bytes())
            .deserialize()
            .collect::<Result<Vec<FrameRow>, _>>()?;
        let summary = csv::Reader::from_reader(summary.as_bytes())
            .deserialize()
            .collect::<Result<Vec<SummaryRow>, _>>()?;
        Ok(Self { rows, summary })
    }

    /// Writes the frame rows to `path` and the summary next to it, see
    /// [`summary_path`].
    pub fn write_csv(&self, path: &Path) -> Result<(), ExperimentError> {
        std::fs::write(path, self.frames_csv()?)?;
        std::fs::write(summary_path(path), self.summary_csv()?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self, ExperimentError> {
        let frames = std::fs::read_to_string(path)?;
        let summary = std::fs::read_to_string(summary_path(path))?;
        Self::from_csv(&frames, &summary)
    }
}

/// `out.csv` -> `out.summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    path.with_extension("summary.csv")
}

#[derive(Debug, Clone)]
pub struct RdSweep {
    pub steps: Vec<f64>,
    pub points: Vec<RdPoint>,
    pub curve: RdCurve,
    pub reports: Vec<ExperimentReport>,
}

/// Encodes `seq` once per base step.
pub fn run_rd_sweep(seq: &Sequence, base_steps: &[f64], template: &CodecConfig) -> Result<RdSweep, ExperimentError> {
    if base_steps.len() < 4 {
        return Err(ExperimentError::InvalidArgument(format!(
            "an RD sweep needs at least 4 steps, got {}",
            base_steps.len()
        )));
    }
    let mut points = Vec::with_capacity(base_steps.len());
    let mut reports = Vec::with_capacity(base_steps.len());
    for &step in base_steps {
        let mut cfg = template.clone();
        cfg.structure.base_step = step;
        let out = encode_sequence(seq, &cfg)?;
        let mut report = ExperimentReport::from_encode(&out);
        report.push("base_step", step);
        report.push("mean_psnr", out.mean_psnr());
        points.push(out.rd_point());
        reports.push(report);
    }
    let curve = RdCurve::new(points.clone())?;
    Ok(RdSweep {
        steps: base_steps.to_vec(),
        points,
        curve,
        reports,
    })
}

fn psnr_rows(report: &mut ExperimentReport, original: &Sequence, out: &EncodeOutput) -> Result<(), ExperimentError> {
    for (row, (o, r)) in report.rows.iter_mut().zip(original.frames().iter().zip(&out.reconstructions)) {
        row.psnr = psnr(&o.luma_only(), r)?;
    }
    Ok(())
}

/// Frames `corrupt_index + 2 ..= corrupt_index + 8` that exist.
pub fn recovery_window(corrupt_index: usize, n_frames: usize) -> std::ops::RangeInclusive<usize> {
    (corrupt_index + 2)..=(corrupt_index + 8).min(n_frames.saturating_sub(1))
}

/// Replaces source frame `corrupt_index` by flat 128, encodes, and scores
/// every frame against the untouched source. The corrupted frame is marked
/// excluded. The summary compares the recovery window against an encode of
/// the untouched sequence with the same configuration.
pub fn run_no_information_test(
    seq: &Sequence,
    corrupt_index: usize,
    config: &CodecConfig,
) -> Result<ExperimentReport, ExperimentError> {
    let n = seq.len();
    if corrupt_index >= n {
        return Err(ExperimentError::InvalidArgument(format!(
            "corrupt index {corrupt_index} is outside a {n}-frame sequence"
        )));
    }
    if config.structure.is_intra_index(corrupt_index) {
        return Err(ExperimentError::InvalidArgument(format!(
            "frame {corrupt_index} is an intra frame"
        )));
    }
    let (w, h) = seq.dims().expect("non-empty");
    let mut damaged = seq.clone();
    damaged.replace(corrupt_index, Frame::filled(w, h, 128)?)?;

    let out = encode_sequence(&damaged, config)?;
    let clean = encode_sequence(seq, config)?;
    let mut report = ExperimentReport::from_encode(&out);
    psnr_rows(&mut report, seq, &out)?;
    report.rows[corrupt_index].excluded = true;

    let window = recovery_window(corrupt_index, n);
    let in_window = |r: &FrameRow| window.contains(&r.index);
    let recovery = report.mean_psnr_where(in_window);
    let clean_recovery = (!window.is_empty())
        .then(|| mean_capped_psnr(window.clone().map(|i| clean.stats[i].psnr)));
    report.push("corrupt_index", corrupt_index);
    report.push("mean_psnr", report.mean_psnr_where(|_| true).unwrap_or(f64::NAN));
    match (recovery, clean_recovery) {
        (Some(a), Some(b)) => {
            report.push("recovery_first", window.start());
            report.push("recovery_last", window.end());
            report.push("recovery_psnr", a);
            report.push("clean_recovery_psnr", b);
            report.push("recovery_gap", b - a);
        }
        _ => report.push("note", "recovery window is empty"),
    }
    Ok(report)
}

/// Per-frame PSNR with layer means and the key > high > low ordering check.
pub fn run_quality_structure_report(seq: &Sequence, config: &CodecConfig) -> Result<ExperimentReport, ExperimentError> {
    let out = encode_sequence(seq, config)?;
    let mut report = ExperimentReport::from_encode(&out);
    report.push("mean_psnr", out.mean_psnr());
    let means: Vec<Option<f64>> = [LayerId::Key, LayerId::High, LayerId::Low]
        .iter()
        .map(|l| report.mean_psnr_where(|r| r.layer == l.name()))
        .collect();
    for (l, m) in ["key", "high", "low"].iter().zip(&means) {
        if let Some(m) = m {
            report.push(&format!("mean_psnr_{l}"), m);
        }
    }
    match (means[0], means[1], means[2]) {
        (Some(k), Some(h), Some(l)) => {
            report.push("gap_key_high", k - h);
            report.push("gap_high_low", h - l);
            report.push("ordering_holds", k > h && h > l);
        }
        _ => {
            report.push("ordering_holds", "skipped");
            report.push("note", "not every layer is present; ordering check skipped");
        }
    }
    Ok(report)
}

/// Searches the base step whose encode lands within 5% of `target_bpp`.
pub fn align_step_to_bpp(
    seq: &Sequence,
    config: &CodecConfig,
    target_bpp: f64,
) -> Result<(f64, EncodeOutput), ExperimentError> {
    if !(target_bpp > 0.0 && target_bpp.is_finite()) {
        return Err(ExperimentError::InvalidArgument(format!("target bpp {target_bpp}")));
    }
    let encode = |step: f64| {
        let mut cfg = config.clone();
        cfg.structure.base_step = step;
        encode_sequence(seq, &cfg)
    };
    // bpp falls as the step grows
    let (mut lo, mut hi) = (0.25f64.ln(), 512f64.ln());
    let mut best: Option<(f64, EncodeOutput)> = None;
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        let step = (mid.exp() * 1000.0).round() / 1000.0;
        let out = encode(step)?;
        let bpp = out.bpp();
        let err = (bpp / target_bpp - 1.0).abs();
        if best.as_ref().is_none_or(|(_, b)| err < (b.bpp() / target_bpp - 1.0).abs()) {
            best = Some((step, out));
        }
        if err <= 0.05 {
            break;
        }
        if bpp > target_bpp {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (step, out) = best.expect("at least one encode ran");
    if (out.bpp() / target_bpp - 1.0).abs() > 0.05 {
        return Err(ExperimentError::InvalidArgument(format!(
            "no base step reaches {target_bpp} bpp within 5% (closest {})",
            out.bpp()
        )));
    }
    Ok((step, out))
}
