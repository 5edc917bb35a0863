//! Command-line surface: schedule dumps, sampling, weight analysis,
//! verification, and the toy enhancement demo.
//!
//! All commands are reproducible: the same argv and seed produce
//! byte-identical output files. Floats are written in Rust's shortest
//! round-trip decimal form, CSV with LF line endings, JSON with stable key
//! order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::composition::{
    grid_step_coefficients, weights_closed_form, weights_from_coeffs, WeightProfile,
};
use crate::enhance::{
    self, embed_real, make_predictor, real_part, si_snr_db, synth_pair, NoiseKind, PredictorSpec,
    Stft, SynthSpec,
};
use crate::error::{BridgeError, Result};
use crate::samplers::{sample, SampleConfig, StepMethod, TimeGrid};
use crate::schedules::{Schedule, ScheduleKind};
use crate::verification;

#[derive(Parser)]
#[command(
    name = "bridgekit",
    version,
    about = "Gaussian bridge schedules, samplers, and verification for paired data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate a schedule's path coefficients over a time grid.
    ScheduleDump(ScheduleDumpArgs),
    /// Run the sampler on a synthetic pair and report metrics.
    Sample(SampleArgs),
    /// Emit the weight decomposition of the final sample.
    Weights(WeightsArgs),
    /// Run the numeric verification suite and emit a JSON report.
    Verify(VerifyArgs),
    /// Synthesize a pair, enhance it, and print input/output SI-SNR.
    Demo(DemoArgs),
}

#[derive(Args)]
struct ScheduleArgs {
    /// Schedule kind: ouve | bbed | sbve | sb-cfm | ot-cfm.
    #[arg(long)]
    schedule: Option<String>,
    /// Full schedule as JSON: {"kind": ..., "params": {...}}.
    #[arg(long, value_name = "JSON")]
    schedule_json: Option<String>,
    /// Stiffness gamma (ouve).
    #[arg(long)]
    gamma: Option<f64>,
    /// Diffusion scale c (ouve, bbed, sbve).
    #[arg(long)]
    c: Option<f64>,
    /// Diffusion base k (ouve, bbed, sbve).
    #[arg(long)]
    k: Option<f64>,
    /// Path sigma (sb-cfm).
    #[arg(long)]
    sigma: Option<f64>,
    /// sigma_max (ot-cfm).
    #[arg(long)]
    sigma_max: Option<f64>,
    /// sigma_min (ot-cfm).
    #[arg(long)]
    sigma_min: Option<f64>,
}

impl ScheduleArgs {
    fn build(&self) -> Result<Schedule> {
        if let Some(json) = &self.schedule_json {
            return Schedule::from_json(json);
        }
        let name = self.schedule.as_deref().ok_or_else(|| {
            BridgeError::InvalidInput("pass --schedule <kind> or --schedule-json".into())
        })?;
        let kind = ScheduleKind::parse(name)?;
        let mut params = std::collections::BTreeMap::new();
        let mut put = |key: &str, value: Option<f64>| {
            if let Some(v) = value {
                params.insert(key.to_string(), v);
            }
        };
        put("gamma", self.gamma);
        put("c", self.c);
        put("k", self.k);
        put("sigma", self.sigma);
        put("sigma_max", self.sigma_max);
        put("sigma_min", self.sigma_min);
        Schedule::from_params(kind, &params)
    }
}

#[derive(Args)]
struct GridArgs {
    /// Sampling endpoint nearest the clean data.
    #[arg(long, default_value_t = 1e-4)]
    t0: f64,
    /// Sampling endpoint nearest the noisy data.
    #[arg(long = "t-end", default_value_t = 1.0)]
    t_end: f64,
    /// Number of sampling steps N.
    #[arg(long, default_value_t = 5)]
    steps: usize,
}

impl GridArgs {
    fn build(&self, sched: &Schedule) -> Result<TimeGrid> {
        TimeGrid::for_schedule(sched, self.t0, self.t_end, self.steps)
    }
}

#[derive(Args)]
struct ScheduleDumpArgs {
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Number of tabulated points.
    #[arg(long, default_value_t = 101)]
    points: usize,
    /// Output CSV path.
    #[arg(long, default_value = "schedule.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// RNG seed (mandatory: sampling draws the synthetic pair and any noise).
    #[arg(long)]
    seed: u64,
    /// Stepper: exponential | euler-ode | euler-maruyama.
    #[arg(long, default_value = "exponential")]
    method: String,
    /// Diffusion scale for euler-maruyama (g_t = g_scale * gtilde_t).
    #[arg(long, default_value_t = 0.0)]
    g_scale: f64,
    /// Predictor kind: oracle | blend | wiener.
    #[arg(long, default_value = "wiener")]
    predictor: String,
    /// Blend coefficient for the blend predictor.
    #[arg(long)]
    beta: Option<f64>,
    /// Mixing SNR of the synthetic pair in dB.
    #[arg(long, default_value_t = 0.0)]
    snr_db: f64,
    /// Noise kind: white | pink.
    #[arg(long, default_value = "white")]
    noise: String,
    /// Pair duration in seconds.
    #[arg(long, default_value_t = 1.0)]
    duration_s: f64,
    /// Per-step trace CSV path.
    #[arg(long, default_value = "trace.csv")]
    out: PathBuf,
    /// Optional enhanced-output WAV path.
    #[arg(long)]
    enhanced_wav: Option<PathBuf>,
}

#[derive(Args)]
struct WeightsArgs {
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// closed-form (bridge family) or recursion (any schedule with
    /// closed-form step coefficients).
    #[arg(long, default_value = "closed-form")]
    method: String,
    /// Output CSV path.
    #[arg(long, default_value = "weights.csv")]
    out: PathBuf,
    /// Optional self-contained SVG chart of the same numbers.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run every check (the default; kept for scripting clarity).
    #[arg(long, default_value_t = true)]
    all: bool,
    /// RNG seed for the randomized checks.
    #[arg(long)]
    seed: u64,
    /// Report path.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Args)]
struct DemoArgs {
    /// RNG seed for pair synthesis.
    #[arg(long)]
    seed: u64,
    /// Number of sampling steps.
    #[arg(long, default_value_t = 5)]
    steps: usize,
    /// Mixing SNR of the synthetic pair in dB.
    #[arg(long, default_value_t = 0.0)]
    snr_db: f64,
    /// Noise kind: white | pink.
    #[arg(long, default_value = "white")]
    noise: String,
    /// Output directory for WAV/CSV/JSON artifacts.
    #[arg(long, default_value = "demo-out")]
    out_dir: PathBuf,
}

fn parse_method(name: &str) -> Result<StepMethod> {
    match name.to_ascii_lowercase().replace('_', "-").as_str() {
        "exponential" => Ok(StepMethod::Exponential),
        "euler-ode" => Ok(StepMethod::EulerOde),
        "euler-maruyama" => Ok(StepMethod::EulerMaruyama),
        other => Err(BridgeError::InvalidInput(format!("unknown method `{other}`"))),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn run_schedule_dump(args: &ScheduleDumpArgs) -> Result<()> {
    let sched = args.schedule.build()?;
    if args.points < 2 {
        return Err(BridgeError::InvalidInput("need at least 2 points".into()));
    }
    let mut csv = String::from("t,a,b,sigma,da,db,dsigma\n");
    for i in 0..args.points {
        let t = i as f64 / (args.points - 1) as f64;
        let c = sched.coefficients(t)?;
        writeln!(csv, "{t},{},{},{},{},{},{}", c.a, c.b, c.sigma, c.da, c.db, c.dsigma)
            .expect("string write");
    }
    write_text(&args.out, &csv)?;
    println!("wrote {} points to {}", args.points, args.out.display());
    Ok(())
}

fn weights_svg(profile: &WeightProfile, grid: &TimeGrid) -> String {
    let (w, h, ml, mb) = (640.0, 360.0, 60.0, 40.0);
    let n = profile.steps();
    let max_w = profile.weights.iter().cloned().fold(f64::MIN, f64::max).max(1e-12);
    let px = |i: usize| ml + (i as f64 / n.max(1) as f64) * (w - ml - 20.0);
    let py = |v: f64| (h - mb) - (v / max_w) * (h - mb - 20.0);
    let mut points = String::new();
    for (i, &wv) in profile.weights.iter().enumerate() {
        write!(points, "{},{} ", px(i + 1), py(wv)).expect("string write");
    }
    let mut svg = String::new();
    write!(
        svg,
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<line x1=\"{ml}\" y1=\"{yb}\" x2=\"{xr}\" y2=\"{yb}\" stroke=\"black\"/>\n",
            "<line x1=\"{ml}\" y1=\"20\" x2=\"{ml}\" y2=\"{yb}\" stroke=\"black\"/>\n",
            "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{points}\"/>\n",
            "<text x=\"{ml}\" y=\"14\" font-size=\"12\">per-step weight of the final sample ",
            "(step 1 = last model call; w_y = {wy})</text>\n",
            "<text x=\"{xr}\" y=\"{ybl}\" font-size=\"12\" text-anchor=\"end\">step index</text>\n"
        ),
        w = w,
        h = h,
        ml = ml,
        yb = h - mb,
        ybl = h - mb + 16.0,
        xr = w - 20.0,
        points = points.trim_end(),
        wy = profile.w_y,
    )
    .expect("string write");
    for (i, &wv) in profile.weights.iter().enumerate() {
        writeln!(svg, "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"steelblue\"/>", px(i + 1), py(wv))
            .expect("string write");
    }
    let _ = grid;
    svg.push_str("</svg>\n");
    svg
}

fn run_weights(args: &WeightsArgs) -> Result<()> {
    let sched = args.schedule.build()?;
    let grid = args.grid.build(&sched)?;
    let profile = match args.method.as_str() {
        "closed-form" => weights_closed_form(&sched, &grid)?,
        "recursion" => weights_from_coeffs(&grid_step_coefficients(&sched, &grid)?)?,
        other => {
            return Err(BridgeError::InvalidInput(format!(
                "unknown weights method `{other}` (closed-form | recursion)"
            )))
        }
    };
    write_text(&args.out, &profile.to_csv(&grid)?)?;
    println!(
        "wrote {} weights to {} (w_y = {}, sum = {})",
        profile.steps(),
        args.out.display(),
        profile.w_y,
        profile.w_y + profile.weight_sum()
    );
    if let Some(svg_path) = &args.svg {
        write_text(svg_path, &weights_svg(&profile, &grid))?;
        println!("wrote chart to {}", svg_path.display());
    }
    Ok(())
}

fn run_sample(args: &SampleArgs) -> Result<()> {
    let sched = args.schedule.build()?;
    let grid = args.grid.build(&sched)?;
    let method = parse_method(&args.method)?;
    let spec = SynthSpec {
        snr_db: args.snr_db,
        noise_kind: NoiseKind::parse(&args.noise)?,
        duration_s: args.duration_s,
        ..SynthSpec::default()
    };
    let pair = synth_pair(&spec, args.seed)?;
    let stft = Stft::speech_default();
    let predictor =
        make_predictor(PredictorSpec::parse(&args.predictor, args.beta)?, &pair, &stft)?;
    let cfg = SampleConfig {
        method,
        g_scale: args.g_scale,
        seed: args.seed,
        record: true,
        ..SampleConfig::default()
    };
    let y = embed_real(&pair.noisy);
    let trace = sample(&sched, &y, predictor.as_ref(), &grid, &cfg)?;

    let mut csv = String::from("step,t,state_rms,prediction_si_snr_db\n");
    for (i, t) in trace.times.iter().enumerate() {
        let state = &trace.states[i];
        let rms = (state.iter().map(|v| v.norm_sqr()).sum::<f64>() / state.len() as f64).sqrt();
        if i == 0 {
            writeln!(csv, "0,{t},{rms},").expect("string write");
        } else {
            let pred_db = si_snr_db(&real_part(&trace.predictions[i - 1]), &pair.clean)?;
            writeln!(csv, "{i},{t},{rms},{pred_db}").expect("string write");
        }
    }
    write_text(&args.out, &csv)?;

    let enhanced = real_part(&trace.final_state);
    let input_db = si_snr_db(&pair.noisy, &pair.clean)?;
    let output_db = si_snr_db(&enhanced, &pair.clean)?;
    if let Some(wav_path) = &args.enhanced_wav {
        if let Some(parent) = wav_path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        enhance::wav::write_wav_f32(wav_path, &enhanced, pair.sample_rate)?;
    }
    let summary = json!({
        "input_si_snr_db": input_db,
        "output_si_snr_db": output_db,
        "steps": grid.steps(),
        "seed": args.seed,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run_verify(args: &VerifyArgs) -> Result<bool> {
    let report = verification::run_all(args.seed)?;
    write_text(&args.out, &report.to_json()?)?;
    for check in &report.checks {
        println!("{} {}", if check.pass { "pass" } else { "FAIL" }, check.check);
    }
    println!(
        "{} of {} checks passed; report at {}",
        report.checks.iter().filter(|c| c.pass).count(),
        report.checks.len(),
        args.out.display()
    );
    let _ = args.all;
    Ok(report.all_pass)
}

fn run_demo(args: &DemoArgs) -> Result<()> {
    let sched = Schedule::sb_cfm(1.0)?;
    let grid = TimeGrid::for_schedule(&sched, 1e-4, 1.0, args.steps)?;
    let spec = SynthSpec {
        snr_db: args.snr_db,
        noise_kind: NoiseKind::parse(&args.noise)?,
        ..SynthSpec::default()
    };
    let pair = synth_pair(&spec, args.seed)?;
    let stft = Stft::speech_default();
    let predictor = make_predictor(PredictorSpec::Wiener, &pair, &stft)?;
    let cfg = SampleConfig { seed: args.seed, ..SampleConfig::default() };
    let y = embed_real(&pair.noisy);
    let trace = sample(&sched, &y, predictor.as_ref(), &grid, &cfg)?;
    let enhanced = real_part(&trace.final_state);

    std::fs::create_dir_all(&args.out_dir)?;
    enhance::wav::write_wav_f32(&args.out_dir.join("clean.wav"), &pair.clean, pair.sample_rate)?;
    enhance::wav::write_wav_f32(&args.out_dir.join("noisy.wav"), &pair.noisy, pair.sample_rate)?;
    enhance::wav::write_wav_f32(&args.out_dir.join("enhanced.wav"), &enhanced, pair.sample_rate)?;
    let mut csv = String::from("sample,clean,noisy,enhanced\n");
    for (i, ((s, y), e)) in pair.clean.iter().zip(&pair.noisy).zip(&enhanced).enumerate() {
        writeln!(csv, "{i},{s},{y},{e}").expect("string write");
    }
    write_text(&args.out_dir.join("pair.csv"), &csv)?;

    let input_db = si_snr_db(&pair.noisy, &pair.clean)?;
    let output_db = si_snr_db(&enhanced, &pair.clean)?;
    let loss = enhance::total_loss(&stft, &enhanced, &pair.clean, enhance::Lambdas::default())?;
    let metrics = json!({
        "input_si_snr_db": input_db,
        "output_si_snr_db": output_db,
        "improvement_db": output_db - input_db,
        "enhanced_loss": loss,
        "steps": args.steps,
        "seed": args.seed,
        "mixing_snr_db": pair.snr_db,
    });
    let text = serde_json::to_string_pretty(&metrics)?;
    write_text(&args.out_dir.join("metrics.json"), &text)?;
    println!("input SI-SNR: {input_db} dB");
    println!("output SI-SNR: {output_db} dB");
    Ok(())
}

/// Parse and execute an argv list; returns the process exit code.
///
/// Exit codes: 0 success, 1 a verification check failed, 2 argument errors.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::ScheduleDump(args) => run_schedule_dump(args).map(|()| 0),
        Command::Sample(args) => run_sample(args).map(|()| 0),
        Command::Weights(args) => run_weights(args).map(|()| 0),
        Command::Verify(args) => run_verify(args).map(|ok| if ok { 0 } else { 1 }),
        Command::Demo(args) => run_demo(args).map(|()| 0),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}
