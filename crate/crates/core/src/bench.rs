//! Stage-latency harness for the edge-smoothing and compositing pass.
//!
//! Absolute numbers are host-specific; what carries over between machines is
//! the ordering across kernel sizes and the cost ratio against the bypass.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::ColorFrame;
use crate::matte::matte_pass;
use crate::params::MatteParams;
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::refine::{composite, morphology_backends, KERNEL_SIZES};
use crate::stream::FRAME_BUDGET_NS;
use crate::synth::{synth_background, synth_scene, SceneSpec};

/// Published mobile-GPU timings for the same pass, in microseconds, by
/// kernel size. Shown next to local results for trend comparison only.
pub const REFERENCE_GPU_US: [(usize, f64); 3] = [(0, 897.88), (3, 1540.0), (9, 6550.0)];

pub fn reference_ratio() -> f64 {
    REFERENCE_GPU_US[2].1 / REFERENCE_GPU_US[0].1
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub repetitions: usize,
    pub warmup: usize,
    pub morphology: String,
    pub single_threaded: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            repetitions: 15,
            warmup: 2,
            morphology: crate::refine::SEPARABLE.to_string(),
            single_threaded: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub median_ns: f64,
    pub p95_ns: f64,
}

impl Stats {
    pub fn from_samples(samples: &[u64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_unstable();
        Self {
            median_ns: median_sorted(&s),
            p95_ns: percentile_sorted(&s, 0.95),
        }
    }
}

fn median_sorted(s: &[u64]) -> f64 {
    match s.len() {
        0 => 0.0,
        n if n % 2 == 1 => s[n / 2] as f64,
        n => (s[n / 2 - 1] as f64 + s[n / 2] as f64) / 2.0,
    }
}

/// Nearest-rank percentile.
fn percentile_sorted(s: &[u64], q: f64) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let rank = (q * s.len() as f64).ceil() as usize;
    s[rank.clamp(1, s.len()) - 1] as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub width: usize,
    pub height: usize,
    pub kernel: usize,
    pub close_median_ns: f64,
    pub close_p95_ns: f64,
    pub composite_median_ns: f64,
    pub composite_p95_ns: f64,
    pub pass_median_ns: f64,
    pub pass_p95_ns: f64,
}

#[derive(Debug, Clone)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub morphology: String,
    pub repetitions: usize,
    pub threads: usize,
}

/// Foreground buffer with a subject silhouette at the given resolution.
fn bench_foreground(width: usize, height: usize) -> Result<ColorFrame> {
    let spec = SceneSpec {
        color_size: [width, height],
        depth_size: [width, height],
        noise_sigma: 0.02,
        seed: 7,
        ..SceneSpec::default()
    };
    let (color, depth) = synth_scene(&spec, 0);
    let params = MatteParams {
        depth_m: 1.5,
        rolloff_m: 0.0,
        ..MatteParams::default()
    };
    matte_pass(&color, &depth, &params)
}

pub fn run_bench(
    resolutions: &[(usize, usize)],
    kernels: &[usize],
    options: &BenchOptions,
) -> Result<BenchTable> {
    if options.repetitions < 3 {
        return Err(Error::BenchOptions(format!(
            "need at least 3 repetitions, got {}",
            options.repetitions
        )));
    }
    if let Some(k) = kernels.iter().find(|k| !KERNEL_SIZES.contains(k)) {
        return Err(Error::BadKernel(format!(
            "bench kernels must be in {KERNEL_SIZES:?}, got {k}"
        )));
    }
    let morphology = morphology_backends().get(&options.morphology)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(if options.single_threaded { 1 } else { 0 })
        .build()
        .map_err(|e| Error::BenchOptions(e.to_string()))?;
    let threads = pool.current_num_threads();

    let rows = pool.install(|| -> Result<Vec<BenchRow>> {
        let mut rows = Vec::new();
        for &(w, h) in resolutions {
            let fg = bench_foreground(w, h)?;
            let bg = synth_background(w, h);
            let params = MatteParams::default();
            // Repetitions are interleaved across kernels so drift in host
            // load lands on every kernel alike.
            let mut close_ns = vec![Vec::with_capacity(options.repetitions); kernels.len()];
            let mut comp_ns = vec![Vec::with_capacity(options.repetitions); kernels.len()];
            for rep in 0..options.warmup + options.repetitions {
                for (i, &k) in kernels.iter().enumerate() {
                    let mut frame = fg.clone();
                    let t = Instant::now();
                    if k > 0 {
                        let closed = morphology.close(&frame.alpha(), k)?;
                        frame.set_alpha(&closed)?;
                    }
                    let close = t.elapsed().as_nanos() as u64;
                    let t = Instant::now();
                    let out = composite(&frame, &bg, &params)?;
                    let comp = t.elapsed().as_nanos() as u64;
                    std::hint::black_box(out);
                    if rep >= options.warmup {
                        close_ns[i].push(close);
                        comp_ns[i].push(comp);
                    }
                }
            }
            for (i, &k) in kernels.iter().enumerate() {
                let pass: Vec<u64> = close_ns[i].iter().zip(&comp_ns[i]).map(|(a, b)| a + b).collect();
                let (c, m, p) = (
                    Stats::from_samples(&close_ns[i]),
                    Stats::from_samples(&comp_ns[i]),
                    Stats::from_samples(&pass),
                );
                rows.push(BenchRow {
                    width: w,
                    height: h,
                    kernel: k,
                    close_median_ns: c.median_ns,
                    close_p95_ns: c.p95_ns,
                    composite_median_ns: m.median_ns,
                    composite_p95_ns: m.p95_ns,
                    pass_median_ns: p.median_ns,
                    pass_p95_ns: p.p95_ns,
                });
            }
        }
        Ok(rows)
    })?;

    Ok(BenchTable {
        rows,
        morphology: options.morphology.clone(),
        repetitions: options.repetitions,
        threads,
    })
}

impl BenchTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Sink(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Sink(e.to_string()))
    }

    pub fn rows_at(&self, width: usize, height: usize) -> Vec<&BenchRow> {
        let mut rows: Vec<_> = self
            .rows
            .iter()
            .filter(|r| (r.width, r.height) == (width, height))
            .collect();
        rows.sort_by_key(|r| r.kernel);
        rows
    }

    /// Whether close-stage medians never decrease as the kernel grows.
    pub fn close_monotone_at(&self, width: usize, height: usize) -> bool {
        self.rows_at(width, height)
            .windows(2)
            .all(|p| p[0].close_median_ns <= p[1].close_median_ns)
    }

    /// Largest-kernel pass time over bypass pass time.
    pub fn ratio_at(&self, width: usize, height: usize) -> Option<f64> {
        let rows = self.rows_at(width, height);
        let bypass = rows.iter().find(|r| r.kernel == 0)?;
        let largest = rows.last()?;
        (largest.kernel > 0 && bypass.pass_median_ns > 0.0)
            .then(|| largest.pass_median_ns / bypass.pass_median_ns)
    }

    /// Markdown report: a table per resolution, an ASCII bar chart of pass
    /// medians, and the reference trend.
    pub fn markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# Edge smoothing + composite latency\n\nmorphology: `{}`, repetitions: {}, threads: {}\n",
            self.morphology, self.repetitions, self.threads
        );
        let mut resolutions: Vec<(usize, usize)> =
            self.rows.iter().map(|r| (r.width, r.height)).collect();
        resolutions.dedup();
        for (w, h) in resolutions {
            let rows = self.rows_at(w, h);
            let _ = writeln!(s, "## {w}x{h}\n");
            let _ = writeln!(
                s,
                "| kernel | close median (us) | close p95 (us) | pass median (us) | pass p95 (us) |"
            );
            let _ = writeln!(s, "|---|---|---|---|---|");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "| {} | {:.1} | {:.1} | {:.1} | {:.1} |",
                    kernel_label(r.kernel),
                    r.close_median_ns / 1e3,
                    r.close_p95_ns / 1e3,
                    r.pass_median_ns / 1e3,
                    r.pass_p95_ns / 1e3
                );
            }
            let max = rows.iter().map(|r| r.pass_median_ns).fold(0.0, f64::max);
            let _ = writeln!(s, "\n```");
            for r in &rows {
                let bar = if max > 0.0 {
                    ((r.pass_median_ns / max) * 50.0).round() as usize
                } else {
                    0
                };
                let _ = writeln!(
                    s,
                    "{:>6} | {:<50} {:.1} us",
                    kernel_label(r.kernel),
                    "#".repeat(bar),
                    r.pass_median_ns / 1e3
                );
            }
            let _ = writeln!(s, "```\n");
            if let Some(ratio) = self.ratio_at(w, h) {
                let _ = writeln!(
                    s,
                    "largest kernel / bypass: {ratio:.2}x (reference mobile GPU: {:.2}x)\n",
                    reference_ratio()
                );
            }
        }
        let _ = writeln!(s, "## Reference trend (mobile GPU, not a target)\n");
        for (k, us) in REFERENCE_GPU_US {
            let _ = writeln!(s, "- {}: {:.2} us", kernel_label(k), us);
        }
        s
    }
}

fn kernel_label(k: usize) -> String {
    if k == 0 {
        "bypass".to_string()
    } else {
        format!("{k}x{k}")
    }
}

/// Median per-frame processing time (align through composite) of the full
/// pipeline on a synthetic scene.
pub fn measure_pipeline(
    config: &PipelineConfig,
    color_size: (usize, usize),
    depth_size: (usize, usize),
    params: &MatteParams,
    repetitions: usize,
) -> Result<Stats> {
    let pipeline = Pipeline::new(config)?;
    let spec = SceneSpec {
        color_size: [color_size.0, color_size.1],
        depth_size: [depth_size.0, depth_size.1],
        subject_depth_m: 1.0,
        background_depth_m: 3.0,
        ..SceneSpec::default()
    };
    spec.validate()?;
    let (color, depth) = synth_scene(&spec, 0);
    let bg = synth_background(color_size.0, color_size.1);
    let mut samples = Vec::with_capacity(repetitions);
    for rep in 0..repetitions + 2 {
        let (out, times) = pipeline.render(&color, &depth, &bg, params)?;
        std::hint::black_box(out);
        if rep >= 2 {
            samples.push(times.sum());
        }
    }
    Ok(Stats::from_samples(&samples))
}

/// First resolution (in the given order) whose median processing time fits
/// the 60 fps budget, with the measured stats for every attempt.
pub fn budget_resolution(
    config: &PipelineConfig,
    candidates: &[(usize, usize)],
    depth_size: (usize, usize),
    params: &MatteParams,
    repetitions: usize,
) -> Result<(Option<(usize, usize)>, Vec<((usize, usize), Stats)>)> {
    let mut tried = Vec::new();
    for &res in candidates {
        let depth = (depth_size.0.min(res.0), depth_size.1.min(res.1));
        let stats = measure_pipeline(config, res, depth, params, repetitions)?;
        tried.push((res, stats));
        if stats.median_ns <= FRAME_BUDGET_NS as f64 {
            return Ok((Some(res), tried));
        }
    }
    Ok((None, tried))
}
