//! Depth-keyed background removal and compositing for RGB-D video.
//!
//! A color stream and a lower-resolution depth stream are combined in two
//! passes. The first maps registered depth to coverage (hard threshold or
//! smoothstep roll-off) and color-adjusts the foreground; the second smooths
//! the coverage edge with a grayscale morphological close and mixes the
//! foreground over a replacement background.
//!
//! ```
//! use depthmatte::{synth, MatteParams, Pipeline, PipelineConfig};
//!
//! let spec = synth::SceneSpec::default();
//! let (color, depth) = synth::synth_scene(&spec, 0);
//! let background = synth::synth_background(320, 240);
//! let params = MatteParams { depth_m: 2.0, kernel_slider: 5.0, ..MatteParams::default() };
//! let pipeline = Pipeline::new(&PipelineConfig::default()).unwrap();
//! let (composite, _timings) = pipeline.render(&color, &depth, &background, &params).unwrap();
//! assert_eq!(composite.dims(), (320, 240));
//! ```

pub mod align;
pub mod bench;
pub mod error;
pub mod frame;
pub mod io;
pub mod manifest;
pub mod matte;
pub mod params;
pub mod pipeline;
pub mod prefilter;
pub mod refine;
pub mod registry;
pub mod stream;
pub mod synth;

pub use error::{Error, Result};
pub use frame::{AlphaMask, ColorFrame, DepthFrame, Rgb, Rgba};
pub use manifest::{Manifest, ManifestEntry};
pub use params::{apply_update, AdjustTarget, MatteParams, ParamUpdate, PrefilterSettings};
pub use pipeline::{Pipeline, PipelineConfig, StageTimes};
pub use registry::{Registry, Strategy};
pub use stream::{FrameTimings, FRAME_BUDGET_NS};
