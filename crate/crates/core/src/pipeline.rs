//! One composited frame, end to end: align, prefilter, matte, close,
//! composite. Stage algorithms are looked up by name so that config, the CLI
//! and live clients can swap them.

use std::borrow::Cow;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::align::{self, center_crop_scale, DepthSampler};
use crate::error::Result;
use crate::frame::{ColorFrame, DepthFrame};
use crate::matte::matte_pass;
use crate::params::MatteParams;
use crate::prefilter::{self, Prefilter};
use crate::refine::{self, composite, Morphology};
use crate::registry::Registry;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub depth_sampler: String,
    pub morphology: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            depth_sampler: align::BILINEAR.to_string(),
            morphology: refine::SEPARABLE.to_string(),
        }
    }
}

/// Wall-clock cost of the processing stages of one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageTimes {
    pub align_ns: u64,
    pub prefilter_ns: u64,
    pub matte_ns: u64,
    pub close_ns: u64,
    pub composite_ns: u64,
}

impl StageTimes {
    pub fn sum(&self) -> u64 {
        self.align_ns + self.prefilter_ns + self.matte_ns + self.close_ns + self.composite_ns
    }
}

fn elapsed_ns(start: Instant) -> u64 {
    start.elapsed().as_nanos() as u64
}

pub struct Pipeline {
    sampler: Arc<dyn DepthSampler>,
    morphology: Arc<dyn Morphology>,
    prefilters: Registry<dyn Prefilter>,
}

impl Pipeline {
    pub fn new(config: &PipelineConfig) -> Result<Self> {
        Ok(Self {
            sampler: align::samplers().get(&config.depth_sampler)?,
            morphology: refine::morphology_backends().get(&config.morphology)?,
            prefilters: prefilter::registry(),
        })
    }

    pub fn morphology(&self) -> &dyn Morphology {
        self.morphology.as_ref()
    }

    pub fn sampler(&self) -> &dyn DepthSampler {
        self.sampler.as_ref()
    }

    /// Brings depth onto the color raster; no copy when it already matches.
    pub fn register_depth<'a>(
        &self,
        depth: &'a DepthFrame,
        width: usize,
        height: usize,
    ) -> Result<Cow<'a, DepthFrame>> {
        if depth.dims() == (width, height) {
            Ok(Cow::Borrowed(depth))
        } else {
            Ok(Cow::Owned(self.sampler.upscale(depth, width, height)?))
        }
    }

    /// Fits a replacement background to the composite raster.
    pub fn register_background<'a>(
        &self,
        background: &'a ColorFrame,
        width: usize,
        height: usize,
    ) -> Cow<'a, ColorFrame> {
        if background.dims() == (width, height) {
            Cow::Borrowed(background)
        } else {
            Cow::Owned(center_crop_scale(background, width, height))
        }
    }

    pub fn render(
        &self,
        color: &ColorFrame,
        depth: &DepthFrame,
        background: &ColorFrame,
        params: &MatteParams,
    ) -> Result<(ColorFrame, StageTimes)> {
        let mut times = StageTimes::default();
        let (w, h) = color.dims();

        let t = Instant::now();
        let depth = self.register_depth(depth, w, h)?;
        let background = self.register_background(background, w, h);
        times.align_ns = elapsed_ns(t);

        let t = Instant::now();
        let filtered = if params.prefilter.kind == prefilter::NONE {
            Cow::Borrowed(color)
        } else {
            let filter = self.prefilters.get(&params.prefilter.kind)?;
            Cow::Owned(filter.apply(color, &params.prefilter)?)
        };
        times.prefilter_ns = elapsed_ns(t);

        let t = Instant::now();
        let mut fg = matte_pass(&filtered, &depth, params)?;
        times.matte_ns = elapsed_ns(t);

        let t = Instant::now();
        let k = params.kernel();
        if k > 0 {
            let closed = self.morphology.close(&fg.alpha(), k)?;
            fg.set_alpha(&closed)?;
        }
        times.close_ns = elapsed_ns(t);

        let t = Instant::now();
        let out = composite(&fg, &background, params)?;
        times.composite_ns = elapsed_ns(t);

        Ok((out, times))
    }
}
