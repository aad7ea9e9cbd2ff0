use std::fs::{self, File};
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use depthmatte::bench::{run_bench, BenchOptions};
use depthmatte::io::{save_png, write_depth};
use depthmatte::refine::SEPARABLE;
use depthmatte::stream::{run_stream, write_timings_csv, FrameInfo, ManifestSource, Pacer, PngDirSink};
use depthmatte::synth::{synth_background, synth_scene, SceneSpec};
use depthmatte::{
    apply_update, ColorFrame, Manifest, ManifestEntry, MatteParams, ParamUpdate, Pipeline, PipelineConfig,
};
use depthmatte_service::{builtin_backgrounds, ServiceConfig, SessionMode, SourceSpec};

#[derive(Parser)]
#[command(name = "depthmatte", version, about = "Depth-keyed background replacement for RGB-D streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Composite a recorded dataset into a PNG sequence plus timings CSV.
    Process(ProcessArgs),
    /// Render a synthetic RGB-D dataset with a manifest.
    Synth(SynthArgs),
    /// Time edge smoothing and compositing across resolutions and kernels.
    Bench(BenchArgs),
    /// Run the live tuning service.
    Serve(ServeArgs),
}

/// Parameter sources, applied in order: defaults, `--params` file, flags.
#[derive(Args)]
struct ParamArgs {
    /// JSON file in the same partial-update schema the WebSocket accepts.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    depth_m: Option<f64>,
    #[arg(long)]
    rolloff_m: Option<f64>,
    #[arg(long)]
    kernel_slider: Option<f64>,
    /// none, gaussian, median or bilateral.
    #[arg(long)]
    prefilter: Option<String>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<MatteParams> {
        let mut params = MatteParams::default();
        if let Some(path) = &self.params {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let update = ParamUpdate::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
            params = apply_update(&params, &update)?;
        }
        let flags = ParamUpdate {
            depth_m: self.depth_m,
            rolloff_m: self.rolloff_m,
            kernel_slider: self.kernel_slider,
            prefilter: self.prefilter.clone().map(|kind| depthmatte::params::PrefilterUpdate {
                kind: Some(kind),
                ..Default::default()
            }),
            ..ParamUpdate::default()
        };
        Ok(apply_update(&params, &flags)?)
    }
}

#[derive(Args)]
struct PipelineArgs {
    /// Morphology backend: separable, naive or van-herk.
    #[arg(long, default_value = SEPARABLE)]
    morphology: String,
    /// Depth upscaling: linear or nearest.
    #[arg(long, default_value = depthmatte::align::BILINEAR)]
    depth_sampler: String,
}

impl PipelineArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            depth_sampler: self.depth_sampler.clone(),
            morphology: self.morphology.clone(),
        }
    }
}

#[derive(Args)]
struct ProcessArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to every manifest entry.
    #[arg(long)]
    frames: Option<u64>,
    /// Color frames per depth frame. 1 pairs every entry with its own depth.
    #[arg(long, default_value_t = 1)]
    depth_stride: u64,
    /// Replacement background; defaults to the manifest's, then a built-in gradient.
    #[arg(long)]
    background: Option<PathBuf>,
    /// Emit frames at 60 Hz instead of as fast as possible.
    #[arg(long)]
    realtime: bool,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene description (JSON); omitted fields take defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    frames: u64,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the spec's noise seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated WIDTHxHEIGHT list.
    #[arg(long, value_delimiter = ',', value_parser = parse_resolution, default_value = "320x240,1440x1920")]
    resolutions: Vec<(usize, usize)>,
    #[arg(long, value_delimiter = ',', default_value = "0,3,5,7,9")]
    kernels: Vec<usize>,
    #[arg(long, default_value_t = 15)]
    reps: usize,
    /// Writes bench.csv and bench.md here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    single_threaded: bool,
    #[arg(long, default_value = SEPARABLE)]
    morphology: String,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Stream a recorded dataset instead of a synthetic scene.
    #[arg(long, conflicts_with = "spec")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Hold each session to 60 Hz.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    realtime: bool,
    /// Share one pipeline among all clients.
    #[arg(long)]
    broadcast: bool,
    /// Static console bundle to serve at `/`.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

fn parse_resolution(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{s}`: {e}"));
    let (w, h) = (parse(w)?, parse(h)?);
    if w == 0 || h == 0 {
        return Err(format!("`{s}`: dimensions must be positive"));
    }
    Ok((w, h))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Process(a) => process(a),
        Command::Synth(a) => synth(a),
        Command::Bench(a) => bench(a),
        Command::Serve(a) => serve(a),
    }
}

fn load_spec(path: Option<&Path>, seed: Option<u64>) -> Result<SceneSpec> {
    let mut spec = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SceneSpec::default(),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    spec.validate()?;
    Ok(spec)
}

fn process(a: ProcessArgs) -> Result<()> {
    let params = a.params.resolve()?;
    let manifest = Manifest::load(&a.manifest)?;
    manifest.validate()?;
    let n = a.frames.unwrap_or(manifest.len() as u64);
    if n == 0 {
        bail!("{} lists no frames", a.manifest.display());
    }

    let first = manifest.load_color(0)?;
    let background = match &a.background {
        Some(p) => depthmatte::io::load_color(p)?,
        None => match manifest.load_background()? {
            Some(bg) => bg,
            None => synth_background(first.width(), first.height()),
        },
    };

    let pipeline = Pipeline::new(&a.pipeline.config())?;
    let mut source = ManifestSource::new(manifest).with_depth_stride(a.depth_stride);
    let mut pngs = PngDirSink::new(&a.out)?;
    let mut pacer = a.realtime.then(Pacer::sixty_hz);
    let mut sink = |frame: &ColorFrame, info: &FrameInfo| {
        if let Some(p) = pacer.as_mut() {
            p.wait();
        }
        depthmatte::stream::FrameSink::accept(&mut pngs, frame, info)
    };
    let mut feed = params;
    let timings = run_stream(&pipeline, &mut source, &background, &mut feed, &mut sink, n)?;

    let csv_path = a.out.join("timings.csv");
    let file = File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    write_timings_csv(BufWriter::new(file), &timings)?;
    let over = timings.iter().filter(|t| !t.within_budget).count();
    println!(
        "wrote {n} composites and {} ({over} of {n} frames over the 16.67 ms budget)",
        csv_path.display()
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = load_spec(a.spec.as_deref(), a.seed)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let [dw, dh] = spec.depth_size;
    let mut entries = Vec::with_capacity(a.frames as usize);
    for i in 0..a.frames {
        let (color, depth) = synth_scene(&spec, i);
        let color_name = format!("color_{i:04}.png");
        let depth_name = format!("depth_{i:04}.bin");
        save_png(&color, a.out.join(&color_name))?;
        write_depth(&depth, a.out.join(&depth_name))?;
        entries.push(ManifestEntry {
            color: color_name.into(),
            depth: depth_name.into(),
            depth_width: dw,
            depth_height: dh,
        });
    }
    let [cw, ch] = spec.color_size;
    save_png(&synth_background(cw, ch), a.out.join("background.png"))?;
    let manifest = Manifest::new(entries, Some("background.png".into()));
    manifest.save(a.out.join("manifest.json"))?;
    fs::write(a.out.join("scene.json"), serde_json::to_string_pretty(&spec)?)?;
    println!("wrote {} frames to {}", a.frames, a.out.display());
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let opts = BenchOptions {
        repetitions: a.reps,
        morphology: a.morphology,
        single_threaded: a.single_threaded,
        ..BenchOptions::default()
    };
    let table = run_bench(&a.resolutions, &a.kernels, &opts)?;
    let md = table.markdown();
    print!("{md}");
    if let Some(out) = &a.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        table.write_csv(File::create(out.join("bench.csv"))?)?;
        fs::write(out.join("bench.md"), &md)?;
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();

    let mut config = match &a.manifest {
        Some(path) => {
            let manifest = Manifest::load(path)?;
            manifest.validate()?;
            let first = manifest.load_color(0)?;
            let mut backgrounds = builtin_backgrounds(first.width(), first.height());
            if let Some(bg) = manifest.load_background()? {
                backgrounds.insert("manifest".into(), Arc::new(bg));
            }
            let default_background = if backgrounds.contains_key("manifest") { "manifest" } else { "gradient" };
            ServiceConfig {
                source: SourceSpec::Manifest {
                    manifest,
                    depth_stride: 1,
                },
                default_background: default_background.into(),
                backgrounds,
                ..ServiceConfig::synthetic(SceneSpec::default())
            }
        }
        None => ServiceConfig::synthetic(load_spec(a.spec.as_deref(), a.seed)?),
    };
    config.initial_params = a.params.resolve()?;
    config.pipeline = a.pipeline.config();
    config.realtime = a.realtime;
    config.ui_dir = a.ui_dir;
    if a.broadcast {
        config.mode = SessionMode::Broadcast;
    }

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(depthmatte_service::serve(config, a.bind))?;
    Ok(())
}
