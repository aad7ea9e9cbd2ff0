//! Live-stream simulation.
//!
//! Color arrives at 60 fps and depth at 30 fps, so every depth frame is used
//! for two consecutive color frames. Time is logical: frames are processed
//! back to back and only their processing cost is measured. [`Pacer`] adds
//! wall-clock pacing for interactive use.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ColorFrame, DepthFrame, COLOR_FRAME_PERIOD_NS};
use crate::io;
use crate::manifest::Manifest;
use crate::matte::matte_pass;
use crate::params::MatteParams;
use crate::pipeline::Pipeline;
use crate::synth::{synth_scene, SceneSpec};

/// Per-frame budget at 60 fps.
pub const FRAME_BUDGET_NS: u64 = COLOR_FRAME_PERIOD_NS;

/// Color frames per depth frame in the live stream.
pub const DEPTH_STRIDE: u64 = 2;

/// `(color_index, depth_index)` pairs for the 60/30 fps cadence.
pub fn schedule(n_color_frames: u64) -> Vec<(u64, u64)> {
    schedule_with_stride(n_color_frames, DEPTH_STRIDE)
}

pub fn schedule_with_stride(n_color_frames: u64, stride: u64) -> Vec<(u64, u64)> {
    let stride = stride.max(1);
    (0..n_color_frames).map(|c| (c, c / stride)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameTimings {
    #[serde(rename = "frame")]
    pub frame_index: u64,
    pub ingest_ns: u64,
    pub align_ns: u64,
    pub prefilter_ns: u64,
    pub matte_ns: u64,
    pub close_ns: u64,
    pub composite_ns: u64,
    pub encode_ns: u64,
    pub total_ns: u64,
    pub within_budget: bool,
}

impl FrameTimings {
    pub fn stage_sum(&self) -> u64 {
        self.ingest_ns
            + self.align_ns
            + self.prefilter_ns
            + self.matte_ns
            + self.close_ns
            + self.composite_ns
            + self.encode_ns
    }

    /// Align through composite: the processing the budget is about.
    pub fn processing_ns(&self) -> u64 {
        self.align_ns + self.prefilter_ns + self.matte_ns + self.close_ns + self.composite_ns
    }

    /// Sets `total_ns` and the budget verdict together.
    pub fn finish(&mut self, total_ns: u64) {
        self.total_ns = total_ns.max(self.stage_sum());
        self.within_budget = self.total_ns <= FRAME_BUDGET_NS;
    }
}

/// Writes `frame,ingest_ns,...,total_ns,within_budget` CSV.
pub fn write_timings_csv<W: Write>(out: W, timings: &[FrameTimings]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in timings {
        w.serialize(t).map_err(|e| Error::Sink(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Sink(e.to_string()))
}

pub trait FrameSource: Send {
    fn color_frame(&mut self, index: u64) -> Result<ColorFrame>;

    /// Depth frame `index` on the depth clock.
    fn depth_frame(&mut self, index: u64) -> Result<DepthFrame>;

    /// Color frames per depth frame.
    fn depth_stride(&self) -> u64 {
        DEPTH_STRIDE
    }
}

/// Renders a [`SceneSpec`] on demand. Depth frame `d` is captured at the
/// same instant as color frame `d * stride`.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    spec: SceneSpec,
    stride: u64,
    period: Option<u64>,
}

impl SyntheticSource {
    pub fn new(spec: SceneSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            stride: DEPTH_STRIDE,
            period: None,
        })
    }

    pub fn with_depth_stride(mut self, stride: u64) -> Self {
        self.stride = stride.max(1);
        self
    }

    /// Wraps scene time every `frames` color frames so a moving subject
    /// keeps crossing the view. Rounded up to a multiple of the stride.
    pub fn looping(mut self, frames: u64) -> Self {
        let f = frames.max(1);
        self.period = Some(f.div_ceil(self.stride) * self.stride);
        self
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    fn scene_time(&self, color_index: u64) -> u64 {
        self.period.map_or(color_index, |p| color_index % p)
    }
}

impl FrameSource for SyntheticSource {
    fn color_frame(&mut self, index: u64) -> Result<ColorFrame> {
        let (c, _) = synth_scene(&self.spec, self.scene_time(index));
        Ok(c.with_index(index, index * COLOR_FRAME_PERIOD_NS))
    }

    fn depth_frame(&mut self, index: u64) -> Result<DepthFrame> {
        let (_, d) = synth_scene(&self.spec, self.scene_time(index * self.stride));
        Ok(d.with_index(index))
    }

    fn depth_stride(&self) -> u64 {
        self.stride
    }
}

/// Frames from a dataset manifest, whose entries are synchronized
/// color/depth captures. With stride `s`, depth frame `d` is entry `d * s`'s
/// depth file.
#[derive(Debug, Clone)]
pub struct ManifestSource {
    manifest: Manifest,
    stride: u64,
    looping: bool,
}

impl ManifestSource {
    pub fn new(manifest: Manifest) -> Self {
        Self {
            manifest,
            stride: 1,
            looping: false,
        }
    }

    pub fn with_depth_stride(mut self, stride: u64) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn looping(mut self, looping: bool) -> Self {
        self.looping = looping;
        self
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn entry(&self, what: &'static str, index: u64) -> Result<usize> {
        let n = self.manifest.len() as u64;
        if n == 0 || (!self.looping && index >= n) {
            return Err(Error::SourceExhausted { what, index });
        }
        Ok((index % n) as usize)
    }
}

impl FrameSource for ManifestSource {
    fn color_frame(&mut self, index: u64) -> Result<ColorFrame> {
        let i = self.entry("color", index)?;
        Ok(self
            .manifest
            .load_color(i)?
            .with_index(index, index * COLOR_FRAME_PERIOD_NS))
    }

    fn depth_frame(&mut self, index: u64) -> Result<DepthFrame> {
        let i = self.entry("depth", index * self.stride)?;
        Ok(self.manifest.load_depth(i)?.with_index(index))
    }

    fn depth_stride(&self) -> u64 {
        self.stride
    }
}

/// Supplies the parameter snapshot for each frame. Called exactly once per
/// frame, before any processing.
pub trait ParamsFeed {
    fn snapshot(&mut self, frame_index: u64) -> MatteParams;
}

impl ParamsFeed for MatteParams {
    fn snapshot(&mut self, _: u64) -> MatteParams {
        self.clone()
    }
}

/// A scripted sequence of parameter states; each entry takes effect at its
/// frame index and holds until the next.
#[derive(Debug, Clone)]
pub struct ParamTrace {
    changes: Vec<(u64, MatteParams)>,
}

impl ParamTrace {
    pub fn new(initial: MatteParams) -> Self {
        Self {
            changes: vec![(0, initial)],
        }
    }

    pub fn then_at(mut self, frame_index: u64, params: MatteParams) -> Self {
        self.changes.push((frame_index, params));
        self.changes.sort_by_key(|(f, _)| *f);
        self
    }
}

impl ParamsFeed for ParamTrace {
    fn snapshot(&mut self, frame_index: u64) -> MatteParams {
        self.changes
            .iter()
            .rev()
            .find(|(f, _)| *f <= frame_index)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(|| self.changes[0].1.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameInfo {
    pub frame_index: u64,
    pub depth_index: u64,
    pub params_hash: u32,
}

/// Receives composites in frame order. Time spent here is the encode stage.
pub trait FrameSink {
    fn accept(&mut self, frame: &ColorFrame, info: &FrameInfo) -> Result<()>;
}

impl<F> FrameSink for F
where
    F: FnMut(&ColorFrame, &FrameInfo) -> Result<()>,
{
    fn accept(&mut self, frame: &ColorFrame, info: &FrameInfo) -> Result<()> {
        self(frame, info)
    }
}

#[derive(Debug, Default)]
pub struct NullSink;

impl FrameSink for NullSink {
    fn accept(&mut self, _: &ColorFrame, _: &FrameInfo) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Default)]
pub struct CollectSink {
    pub frames: Vec<(FrameInfo, ColorFrame)>,
}

impl FrameSink for CollectSink {
    fn accept(&mut self, frame: &ColorFrame, info: &FrameInfo) -> Result<()> {
        self.frames.push((*info, frame.clone()));
        Ok(())
    }
}

/// Writes `composite_NNNNNN.png` files.
#[derive(Debug)]
pub struct PngDirSink {
    dir: PathBuf,
}

impl PngDirSink {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn path_for(&self, frame_index: u64) -> PathBuf {
        self.dir.join(format!("composite_{frame_index:06}.png"))
    }
}

impl FrameSink for PngDirSink {
    fn accept(&mut self, frame: &ColorFrame, info: &FrameInfo) -> Result<()> {
        io::save_png(frame, self.path_for(info.frame_index))
    }
}

/// One processed frame, not yet delivered. `timings.encode_ns` is zero and
/// `timings.total_ns` covers ingest through composite.
#[derive(Debug, Clone)]
pub struct Stepped {
    pub frame: ColorFrame,
    pub info: FrameInfo,
    pub timings: FrameTimings,
}

/// Renders color frames one at a time on the source's depth cadence,
/// reusing the current depth frame and the registered background between
/// frames.
pub struct FrameStepper<'a> {
    pipeline: &'a Pipeline,
    source: &'a mut dyn FrameSource,
    depth: Option<DepthFrame>,
    background: Option<ColorFrame>,
}

impl<'a> FrameStepper<'a> {
    pub fn new(pipeline: &'a Pipeline, source: &'a mut dyn FrameSource) -> Self {
        Self {
            pipeline,
            source,
            depth: None,
            background: None,
        }
    }

    /// Drops the registered background so the next step re-registers it.
    pub fn reset_background(&mut self) {
        self.background = None;
    }

    pub fn step(
        &mut self,
        color_index: u64,
        background: &ColorFrame,
        params: &MatteParams,
    ) -> Result<Stepped> {
        let c = color_index;
        let d = c / self.source.depth_stride();
        let start = Instant::now();
        let mut t = FrameTimings {
            frame_index: c,
            ..FrameTimings::default()
        };

        let color = self.source.color_frame(c)?;
        if self.depth.as_ref().map(|f| f.frame_index) != Some(d) {
            self.depth = Some(self.source.depth_frame(d)?);
        }
        let depth = self.depth.as_ref().expect("filled above");
        t.ingest_ns = start.elapsed().as_nanos() as u64;

        let reg_start = Instant::now();
        if self.background.as_ref().map(ColorFrame::dims) != Some(color.dims()) {
            let (w, h) = color.dims();
            self.background = Some(self.pipeline.register_background(background, w, h).into_owned());
        }
        let bg = self.background.as_ref().expect("filled above");
        let bg_ns = reg_start.elapsed().as_nanos() as u64;

        let (frame, stages) = self
            .pipeline
            .render(&color, depth, bg, params)
            .map_err(|e| e.at_frame(c))?;
        t.align_ns = stages.align_ns + bg_ns;
        t.prefilter_ns = stages.prefilter_ns;
        t.matte_ns = stages.matte_ns;
        t.close_ns = stages.close_ns;
        t.composite_ns = stages.composite_ns;
        t.finish(start.elapsed().as_nanos() as u64);

        Ok(Stepped {
            frame,
            info: FrameInfo {
                frame_index: c,
                depth_index: d,
                params_hash: params.snapshot_hash(),
            },
            timings: t,
        })
    }
}

/// Runs `n_frames` color frames through the pipeline on the source's depth
/// cadence and returns one [`FrameTimings`] per frame.
pub fn run_stream(
    pipeline: &Pipeline,
    source: &mut dyn FrameSource,
    background: &ColorFrame,
    feed: &mut dyn ParamsFeed,
    sink: &mut dyn FrameSink,
    n_frames: u64,
) -> Result<Vec<FrameTimings>> {
    let mut stepper = FrameStepper::new(pipeline, source);
    let mut timings = Vec::with_capacity(n_frames as usize);
    for c in 0..n_frames {
        let params = feed.snapshot(c);
        let Stepped { frame, info, timings: mut t } = stepper.step(c, background, &params)?;
        let enc = Instant::now();
        sink.accept(&frame, &info).map_err(|e| e.at_frame(c))?;
        t.encode_ns = enc.elapsed().as_nanos() as u64;
        t.finish(t.total_ns + t.encode_ns);
        timings.push(t);
    }
    Ok(timings)
}

/// Horizontal offset, in color pixels, between the color subject's centroid
/// and the matte's centroid for each of `n_frames` frames on the 60/30 fps
/// cadence. Positive values mean the matte trails the subject.
///
/// Meaningful for a hard threshold (`rolloff_m == 0`) placed between the
/// subject and background depths.
pub fn measure_lag(
    pipeline: &Pipeline,
    spec: &SceneSpec,
    params: &MatteParams,
    n_frames: u64,
) -> Result<Vec<f64>> {
    let mut source = SyntheticSource::new(spec.clone())?;
    let [w, h] = spec.color_size;
    let mut offsets = Vec::with_capacity(n_frames as usize);
    let mut registered: Option<(u64, DepthFrame)> = None;

    for (c, d) in schedule(n_frames) {
        if registered.as_ref().map(|(i, _)| *i) != Some(d) {
            let raw = source.depth_frame(d)?;
            let reg = pipeline.register_depth(&raw, w, h)?.into_owned();
            registered = Some((d, reg));
        }
        let (_, depth) = registered.as_ref().expect("filled above");
        let color = source.color_frame(c)?;
        let alpha = matte_pass(&color, depth, params)?.alpha();
        let subject = spec.silhouette(c);
        let offset = match (subject.centroid_x(), alpha.centroid_x()) {
            (Some(s), Some(a)) => s - a,
            _ => 0.0,
        };
        offsets.push(offset);
    }
    Ok(offsets)
}

/// Sleeps to hold a fixed frame period. When processing falls more than one
/// period behind, the missed slots are dropped instead of replayed.
#[derive(Debug)]
pub struct Pacer {
    period: Duration,
    next: Instant,
    dropped: u64,
}

impl Pacer {
    pub fn new(period: Duration) -> Self {
        Self {
            period,
            next: Instant::now() + period,
            dropped: 0,
        }
    }

    pub fn sixty_hz() -> Self {
        Self::new(Duration::from_nanos(COLOR_FRAME_PERIOD_NS))
    }

    /// Blocks until the next slot; returns how many slots were skipped.
    pub fn wait(&mut self) -> u64 {
        let now = Instant::now();
        if now < self.next {
            std::thread::sleep(self.next - now);
            self.next += self.period;
            return 0;
        }
        let behind = (now - self.next).as_nanos() / self.period.as_nanos().max(1);
        let skipped = behind as u64;
        self.dropped += skipped;
        self.next += self.period * (skipped as u32 + 1);
        skipped
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}
