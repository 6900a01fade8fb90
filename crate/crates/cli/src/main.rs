use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hvc_core::codec::bitstream::{FrameHeader, FRAME_HEADER_LEN, SEQUENCE_HEADER_LEN};
use hvc_core::codec::{decode_sequence, decode_sequence_lossy, encode_sequence, CodecConfig, OmegaMode};
use hvc_core::experiment::{
    run_no_information_test, run_quality_structure_report, run_rd_sweep, ExperimentError, ExperimentReport, FrameRow,
};
use hvc_core::frame::Sequence;
use hvc_core::metrics::{bd_rate, psnr};
use hvc_core::structure::{build_schedule, schedule_csv, FrameType, LayerId, StructureConfig};
use hvc_core::synth::{gen_synthetic, Pattern, SyntheticSpec};
use hvc_core::y4m::{parse_y4m, write_y4m};
use hvc_core::Error;

#[derive(Parser)]
#[command(name = "hvc", version, about = "Hierarchical low-delay video codec and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a Y4M file into a bitstream.
    Encode {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        codec: CodecArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Decode a bitstream into a Y4M file.
    Decode {
        input: PathBuf,
        output: PathBuf,
        /// Conceal damaged frames instead of failing.
        #[arg(long)]
        lossy: bool,
        /// Source Y4M to measure PSNR against.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Encode at several base steps and report the RD curve.
    Sweep {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [8.0, 12.0, 16.0, 24.0])]
        steps: Vec<f64>,
        /// Also sweep an anchor configuration and report BD-rate against it.
        #[arg(long, value_enum)]
        anchor: Option<Anchor>,
        #[command(flatten)]
        codec: CodecArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Replace one frame by flat gray and measure how quality recovers.
    Robustness {
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        corrupt_index: usize,
        #[command(flatten)]
        codec: CodecArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Per-frame PSNR with per-layer means.
    QualityReport {
        input: PathBuf,
        #[command(flatten)]
        codec: CodecArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the coding structure as CSV.
    Schedule {
        #[arg(long)]
        frames: usize,
        #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
        intra_period: i32,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write a synthetic test sequence.
    Synth {
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 33)]
        frames: usize,
        /// Pixels per frame as `dx,dy`.
        #[arg(long, default_value = "1,0", value_parser = parse_motion, allow_hyphen_values = true)]
        motion: (i32, i32),
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,
        #[arg(long, default_value = "mixed", value_parser = parse_pattern)]
        pattern: Pattern,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Anchor {
    NoLookahead,
    SingleReference,
}

#[derive(Args, Clone)]
struct CodecArgs {
    #[arg(long, default_value_t = 16.0)]
    base_step: f64,
    #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
    intra_period: i32,
    #[arg(long)]
    no_lookahead: bool,
    #[arg(long, default_value_t = 0.2)]
    lookahead_strength: f64,
    #[arg(long, default_value = "off", value_parser = parse_omega_mode)]
    omega_mode: OmegaMode,
    /// Seed of the random omega draws.
    #[arg(long)]
    seed: Option<u64>,
    /// Reference only the previous frame.
    #[arg(long)]
    single_reference: bool,
    /// Four hierarchical weights, `a,b,c,d`.
    #[arg(long, value_parser = parse_weights)]
    weights: Option<[f64; 4]>,
}

impl CodecArgs {
    fn config(&self) -> CodecConfig {
        let mut structure = StructureConfig {
            intra_period: self.intra_period,
            base_step: self.base_step,
            multi_reference: !self.single_reference,
            ..StructureConfig::default()
        };
        if let Some(w) = self.weights {
            structure.weights = w;
        }
        CodecConfig {
            structure,
            lookahead_enabled: !self.no_lookahead,
            lookahead_strength: self.lookahead_strength,
            random_omega_seed: self.seed,
            omega_mode: self.omega_mode,
        }
    }
}

fn parse_pattern(s: &str) -> Result<Pattern, String> {
    Pattern::parse(s).ok_or_else(|| format!("unknown pattern `{s}` (gradient, checker, mixed)"))
}

fn parse_motion(s: &str) -> Result<(i32, i32), String> {
    let v: Vec<i32> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad motion component `{t}`")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [dx, dy] => Ok((dx, dy)),
        _ => Err("motion takes two values, `dx,dy`".into()),
    }
}

fn parse_weights(s: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad weight `{t}`")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| "weights take four values, `a,b,c,d`".to_string())
}

fn parse_omega_mode(s: &str) -> Result<OmegaMode, String> {
    OmegaMode::parse(s).ok_or_else(|| format!("unknown omega mode `{s}` (off, random_key)"))
}

fn read_y4m(path: &Path) -> Result<Sequence, Error> {
    Ok(parse_y4m(&std::fs::read(path)?)?)
}

fn write_csv(report: &ExperimentReport, path: &Option<PathBuf>) -> Result<(), Error> {
    if let Some(p) = path {
        report.write_csv(p)?;
    }
    Ok(())
}

fn print_summary(report: &ExperimentReport) {
    for row in &report.summary {
        println!("{}: {}", row.key, row.value);
    }
}

/// Frame rows of a stream, read from its frame headers.
fn stream_rows(bytes: &[u8]) -> Vec<FrameRow> {
    let mut rows = Vec::new();
    let mut pos = SEQUENCE_HEADER_LEN;
    while let Some(b) = bytes.get(pos..pos + FRAME_HEADER_LEN) {
        let Ok(h) = FrameHeader::read(b, rows.len()) else { break };
        rows.push(FrameRow {
            index: rows.len(),
            frame_type: h.frame_type.name().to_string(),
            layer: match h.frame_type {
                FrameType::Intra => "-".to_string(),
                FrameType::Inter => LayerId::from_u8(h.layer).map_or("?", LayerId::name).to_string(),
            },
            omega: h.omega(),
            bits: (FRAME_HEADER_LEN + h.payload_len as usize) as u64 * 8,
            psnr: f64::NAN,
            excluded: false,
        });
        pos += FRAME_HEADER_LEN + h.payload_len as usize;
    }
    rows
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Encode {
            input,
            output,
            codec,
            csv,
        } => {
            let seq = read_y4m(&input)?;
            let out = encode_sequence(&seq, &codec.config())?;
            std::fs::write(&output, &out.bitstream)?;
            let mut report = ExperimentReport::from_encode(&out);
            report.push("mean_psnr", out.mean_psnr());
            print_summary(&report);
            write_csv(&report, &csv)?;
        }
        Command::Decode {
            input,
            output,
            lossy,
            reference,
            csv,
        } => {
            let bytes = std::fs::read(&input)?;
            let (frames, rate, concealed) = if lossy {
                let o = decode_sequence_lossy(&bytes)?;
                if let Some(e) = &o.error {
                    eprintln!("warning: {e}");
                }
                let rate = o.frame_rate();
                (o.frames, rate, o.concealed)
            } else {
                let s = decode_sequence(&bytes)?;
                let rate = s.frame_rate;
                (s.into_frames(), rate, Vec::new())
            };
            let seq = Sequence::new(frames, rate)?;
            std::fs::write(&output, write_y4m(&seq))?;

            let mut report = ExperimentReport {
                rows: stream_rows(&bytes),
                summary: Vec::new(),
            };
            report.rows.truncate(seq.len());
            if let Some(r) = reference {
                let src = read_y4m(&r)?;
                for (row, (a, b)) in report.rows.iter_mut().zip(src.frames().iter().zip(seq.frames())) {
                    row.psnr = psnr(&a.luma_only(), b)?;
                }
                if let Some(m) = report.mean_psnr_where(|_| true) {
                    report.push("mean_psnr", m);
                }
            }
            for &i in &concealed {
                if let Some(row) = report.rows.get_mut(i) {
                    row.excluded = true;
                }
            }
            report.push("frames", seq.len());
            report.push("concealed", concealed.len());
            print_summary(&report);
            write_csv(&report, &csv)?;
        }
        Command::Sweep {
            input,
            steps,
            anchor,
            codec,
            csv,
        } => {
            let seq = read_y4m(&input)?;
            let config = codec.config();
            let sweep = run_rd_sweep(&seq, &steps, &config)?;
            let mut report = ExperimentReport::default();
            for (i, (s, p)) in sweep.steps.iter().zip(&sweep.points).enumerate() {
                println!("step {s}: {:.5} bpp, {:.3} dB", p.bpp, p.psnr);
                report.push(&format!("step_{i}"), s);
                report.push(&format!("bpp_{i}"), p.bpp);
                report.push(&format!("psnr_{i}"), p.psnr);
            }
            if let Some(a) = anchor {
                let mut anchor_cfg = config.clone();
                let name = match a {
                    Anchor::NoLookahead => {
                        anchor_cfg.lookahead_enabled = false;
                        "no-lookahead"
                    }
                    Anchor::SingleReference => {
                        anchor_cfg.structure.multi_reference = false;
                        "single-reference"
                    }
                };
                let base = run_rd_sweep(&seq, &steps, &anchor_cfg)?;
                let bd = bd_rate(&base.curve, &sweep.curve)?;
                println!("bd_rate vs {name}: {bd:.3}%");
                report.push("anchor", name);
                report.push("bd_rate", bd);
            }
            if let Some(p) = &csv {
                report.write_csv(p)?;
                for (i, r) in sweep.reports.iter().enumerate() {
                    r.write_csv(&p.with_extension(format!("step{i}.csv")))?;
                }
            }
        }
        Command::Robustness {
            input,
            corrupt_index,
            codec,
            csv,
        } => {
            let seq = read_y4m(&input)?;
            let config = codec.config();
            let mut report = run_no_information_test(&seq, corrupt_index, &config)?;
            if config.structure.multi_reference {
                let mut ablation = config.clone();
                ablation.structure.multi_reference = false;
                let single = run_no_information_test(&seq, corrupt_index, &ablation)?;
                if let (Some(m), Some(s)) = (report.get_f64("recovery_psnr"), single.get_f64("recovery_psnr")) {
                    report.push("single_reference_recovery_psnr", s);
                    report.push("margin_over_single_reference", m - s);
                }
            }
            print_summary(&report);
            write_csv(&report, &csv)?;
        }
        Command::QualityReport { input, codec, csv } => {
            let seq = read_y4m(&input)?;
            let report = run_quality_structure_report(&seq, &codec.config())?;
            print_summary(&report);
            write_csv(&report, &csv)?;
        }
        Command::Schedule {
            frames,
            intra_period,
            csv,
        } => {
            let schedule = build_schedule(&StructureConfig {
                n_frames: frames,
                intra_period,
                ..StructureConfig::default()
            })?;
            let text = schedule_csv(&schedule);
            print!("{text}");
            if let Some(p) = csv {
                std::fs::write(p, text)?;
            }
        }
        Command::Synth {
            output,
            seed,
            width,
            height,
            frames,
            motion,
            sigma,
            pattern,
            csv,
        } => {
            if width < 32 || height < 32 || frames == 0 {
                return Err(ExperimentError::InvalidArgument(format!(
                    "synthetic sequences need at least 32x32 pixels and one frame, got {width}x{height}x{frames}"
                ))
                .into());
            }
            let spec = SyntheticSpec {
                seed,
                width,
                height,
                n_frames: frames,
                motion,
                noise_sigma: sigma,
                pattern,
            };
            let seq = gen_synthetic(&spec);
            std::fs::write(&output, write_y4m(&seq))?;
            let mut report = ExperimentReport::default();
            report.push("seed", seed);
            report.push("width", width);
            report.push("height", height);
            report.push("frames", frames);
            report.push("motion", format!("{},{}", motion.0, motion.1));
            report.push("sigma", sigma);
            report.push("pattern", pattern.name());
            write_csv(&report, &csv)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
