use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lsdd::array::{free_field_steering, SteeringVectorSet};
use lsdd::error::{Error, Result};
use lsdd::pipeline::{self, meta, report, EstimationResult, PipelineConfig};
use lsdd::scene;
use lsdd::stft::{analyze, StftTensor};
use lsdd::timeline::SessionMeta;
use lsdd::udm::Udm;

#[derive(Parser)]
#[command(name = "lsdd", version, about = "Multi-speaker DOA estimation for moving arrays")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a scene from a TOML description.
    Simulate {
        scene: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Build the directivity map of a steering set over the configured band.
    Udm {
        #[arg(long)]
        steering: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Estimate DOAs per interval and score them against the pose/VAD truth.
    Estimate {
        #[command(flatten)]
        input: SessionArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Re-score a results.json produced by `estimate`.
    Evaluate {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        vad: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run estimation over a range of one config value and print a summary table.
    Sweep {
        #[command(flatten)]
        input: SessionArgs,
        /// `key=start:step:end`, for example `lambda=0.5:0.05:0.9`.
        #[arg(long)]
        param: String,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SessionArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    steering: PathBuf,
    #[arg(long)]
    udm: Option<PathBuf>,
    /// Multichannel WAV file or STFT tensor container.
    #[arg(long)]
    audio: PathBuf,
    /// Pose file.
    #[arg(long)]
    meta: PathBuf,
    /// VAD file overriding the pose activity flags.
    #[arg(long)]
    vad: Option<PathBuf>,
}

fn load_config(args: &ConfigArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
        cfg.set_key(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_audio(path: &Path, cfg: &PipelineConfig) -> Result<StftTensor> {
    let bytes = std::fs::read(path)?;
    if StftTensor::is_container(&bytes) {
        return StftTensor::from_bytes(&bytes);
    }
    let (signals, rate) = pipeline::ingest_wav(path)?;
    if rate as f64 != cfg.sample_rate_hz {
        return Err(Error::Config(format!(
            "audio is analyzed at {rate} Hz but sample_rate_hz = {}",
            cfg.sample_rate_hz
        )));
    }
    analyze(&signals, cfg.stft_params())
}

struct Session {
    cfg: PipelineConfig,
    steering: SteeringVectorSet,
    udm: Option<Udm>,
    stft: StftTensor,
    meta: SessionMeta,
}

fn load_session(args: &SessionArgs) -> Result<Session> {
    let cfg = load_config(&args.cfg)?;
    let steering = SteeringVectorSet::load(&args.steering)?;
    let udm = args.udm.as_deref().map(Udm::load).transpose()?;
    let stft = load_audio(&args.audio, &cfg)?;
    let meta = meta::load_pose_vad(&args.meta, args.vad.as_deref())?;
    Ok(Session {
        cfg,
        steering,
        udm,
        stft,
        meta,
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_outputs(dir: &Path, results: &EstimationResult, report: &pipeline::EvalReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    report::emit_report(report, &dir.join("estimates.csv"), &dir.join("report.json"))?;
    write_json(&dir.join("results.json"), results)
}

fn simulate(scene_path: &Path, out: &Path) -> Result<()> {
    let setup = scene::config::parse_scene(&std::fs::read_to_string(scene_path)?)?;
    let (tensor, truth) = scene::synthesize_stft(
        &setup.spec,
        &setup.geometry,
        &setup.grid,
        setup.stft,
        setup.speed_of_sound,
    )?;
    let steering = free_field_steering(
        &setup.geometry,
        &setup.grid,
        &setup.stft.bin_freqs_hz(),
        setup.speed_of_sound,
    )?;
    std::fs::create_dir_all(out)?;
    tensor.save(out.join("scene.stft"))?;
    steering.save(out.join("steering.lsv"))?;
    std::fs::write(out.join("meta.pose"), meta::format_pose(&truth.meta))?;
    std::fs::write(out.join("meta.vad"), meta::format_vad(&truth.meta))?;
    write_json(&out.join("truth.json"), &truth)?;
    log::info!(
        "wrote {} frames x {} bins x {} mics to {}",
        tensor.num_frames(),
        tensor.num_bins(),
        tensor.num_mics(),
        out.display()
    );
    Ok(())
}

fn build_udm(steering: &Path, out: &Path, cfg: &ConfigArgs) -> Result<()> {
    let cfg = load_config(cfg)?;
    let sv = SteeringVectorSet::load(steering)?;
    let freqs: Vec<f64> = sv
        .freqs_hz()
        .iter()
        .copied()
        .filter(|f| *f >= cfg.f_low_hz && *f <= cfg.f_high_hz)
        .collect();
    if freqs.is_empty() {
        return Err(Error::Band(format!(
            "steering set has no frequencies in [{}, {}] Hz",
            cfg.f_low_hz, cfg.f_high_hz
        )));
    }
    let band = sv.restrict_to(&freqs, 0.0)?;
    Udm::from_steering(&band, cfg.udm_params())?.save(out)
}

/// Expands `key=start:step:end` into `(key, values)`.
fn parse_sweep(spec: &str) -> Result<(String, Vec<f64>)> {
    let bad = || Error::Config(format!("sweep parameter {spec:?} is not key=start:step:end"));
    let (key, range) = spec.split_once('=').ok_or_else(bad)?;
    let parts: Vec<f64> = range
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, step, end] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || end < start {
        return Err(bad());
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    // round away accumulated binary error in the printed and applied values
    let values = (0..count)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect();
    Ok((key.trim().to_owned(), values))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn sweep(args: &SessionArgs, param: &str) -> Result<()> {
    let session = load_session(args)?;
    let (key, values) = parse_sweep(param)?;
    println!("{key}\tPr\tn_low\tM_50\tM_100\tn_50\tn_100");
    for v in values {
        let mut cfg = session.cfg.clone();
        cfg.set_key(&key, &v.to_string())?;
        let (_, rep) = pipeline::process_session(&cfg, &session.steering, session.udm.as_ref(), &session.stft, &session.meta)?;
        let pick = |curve: &Option<Vec<f64>>, i: usize| curve.as_ref().map(|c| c[i]);
        println!(
            "{v}\t{}\t{}\t{}\t{}\t{}\t{}",
            fmt_opt(rep.pr),
            fmt_opt(rep.n_low),
            fmt_opt(pick(&rep.curves.mean_error_deg, 4)),
            fmt_opt(pick(&rep.curves.mean_error_deg, 9)),
            fmt_opt(pick(&rep.curves.outlier_fraction, 4)),
            fmt_opt(pick(&rep.curves.outlier_fraction, 9)),
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scene, output } => simulate(&scene, &output),
        Command::Udm { steering, output, cfg } => build_udm(&steering, &output, &cfg),
        Command::Estimate { input, output } => {
            let s = load_session(&input)?;
            let (results, report) = pipeline::process_session(&s.cfg, &s.steering, s.udm.as_ref(), &s.stft, &s.meta)?;
            write_outputs(&output, &results, &report)
        }
        Command::Evaluate {
            results,
            meta: pose,
            vad,
            cfg,
            output,
        } => {
            let cfg = load_config(&cfg)?;
            let text = std::fs::read_to_string(&results)?;
            let results: EstimationResult =
                serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", results.display())))?;
            if results.interval_ms != cfg.interval_ms {
                return Err(Error::Config(format!(
                    "results use {} ms intervals, config has {} ms",
                    results.interval_ms, cfg.interval_ms
                )));
            }
            let meta = meta::load_pose_vad(&pose, vad.as_deref())?;
            let report = pipeline::evaluate(&results, &meta, &cfg);
            std::fs::create_dir_all(&output)?;
            report::emit_report(&report, &output.join("estimates.csv"), &output.join("report.json"))
        }
        Command::Sweep { input, param } => sweep(&input, &param),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
