use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use depthmatte::stream::{FrameSource, ManifestSource, SyntheticSource};
use depthmatte::synth::{synth_background, SceneSpec};
use depthmatte::{ColorFrame, Manifest, MatteParams, PipelineConfig};

/// Where session workers pull frames from.
#[derive(Debug, Clone)]
pub enum SourceSpec {
    /// Rendered scene; time wraps every `loop_frames` color frames.
    Synthetic { spec: SceneSpec, loop_frames: u64 },
    /// Recorded dataset, replayed in a loop.
    Manifest { manifest: Manifest, depth_stride: u64 },
}

impl SourceSpec {
    pub fn open(&self) -> depthmatte::Result<Box<dyn FrameSource>> {
        Ok(match self {
            SourceSpec::Synthetic { spec, loop_frames } => {
                Box::new(SyntheticSource::new(spec.clone())?.looping(*loop_frames))
            }
            SourceSpec::Manifest {
                manifest,
                depth_stride,
            } => Box::new(
                ManifestSource::new(manifest.clone())
                    .with_depth_stride(*depth_stride)
                    .looping(true),
            ),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SessionMode {
    /// Each connection gets its own pipeline and parameters.
    #[default]
    PerSession,
    /// One pipeline shared by every connection; any client may retune it.
    Broadcast,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub source: SourceSpec,
    pub backgrounds: BTreeMap<String, Arc<ColorFrame>>,
    pub default_background: String,
    pub pipeline: PipelineConfig,
    pub initial_params: MatteParams,
    pub mode: SessionMode,
    /// Hold workers to 60 Hz. Without it they render as fast as they can.
    pub realtime: bool,
    /// Directory of the browser console's static bundle.
    pub ui_dir: Option<PathBuf>,
}

impl ServiceConfig {
    /// Synthetic scene with the built-in backgrounds.
    pub fn synthetic(spec: SceneSpec) -> Self {
        let [w, h] = spec.color_size;
        Self {
            source: SourceSpec::Synthetic {
                spec,
                loop_frames: 120,
            },
            backgrounds: builtin_backgrounds(w, h),
            default_background: "gradient".into(),
            pipeline: PipelineConfig::default(),
            initial_params: MatteParams::default(),
            mode: SessionMode::PerSession,
            realtime: true,
            ui_dir: None,
        }
    }

    pub fn background(&self, name: &str) -> Option<Arc<ColorFrame>> {
        self.backgrounds.get(name).cloned()
    }
}

pub fn builtin_backgrounds(width: usize, height: usize) -> BTreeMap<String, Arc<ColorFrame>> {
    let solid = |rgb: [f64; 3]| {
        Arc::new(ColorFrame::filled(width, height, [rgb[0], rgb[1], rgb[2], 1.0]).expect("non-empty raster"))
    };
    BTreeMap::from([
        ("gradient".to_string(), Arc::new(synth_background(width, height))),
        ("green".to_string(), solid([0.0, 0.8, 0.2])),
        ("black".to_string(), solid([0.0; 3])),
    ])
}
