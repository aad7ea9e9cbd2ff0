//! Raster types shared by every pipeline stage.
//!
//! Color channels are unit-interval `f64`s in straight (non-premultiplied)
//! RGBA order. Depth samples keep the 32-bit float representation of the
//! capture format so that invalid samples (NaN, infinities, zero) survive
//! storage untouched.

use crate::error::{Error, Result};

/// One RGBA pixel, channels in `[0, 1]`.
pub type Rgba = [f64; 4];

/// One RGB triple, channels in `[0, 1]`.
pub type Rgb = [f64; 3];

/// Nominal color cadence of the stream (60 fps).
pub const COLOR_FRAME_PERIOD_NS: u64 = 16_666_667;

#[derive(Debug, Clone, PartialEq)]
pub struct ColorFrame {
    width: usize,
    height: usize,
    pixels: Vec<Rgba>,
    pub frame_index: u64,
    pub timestamp_ns: u64,
}

impl ColorFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgba>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "color frame must be at least 1x1, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "{} pixels for a {width}x{height} color frame",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels
            .iter()
            .flatten()
            .find(|v| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidFrame(format!(
                "channel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            frame_index: 0,
            timestamp_ns: 0,
        })
    }

    /// Builds a frame without the channel-range scan. Callers guarantee the
    /// invariants; used on hot paths whose arithmetic already clamps.
    pub(crate) fn from_parts(width: usize, height: usize, pixels: Vec<Rgba>) -> Self {
        debug_assert!(width > 0 && height > 0);
        debug_assert_eq!(pixels.len(), width * height);
        Self {
            width,
            height,
            pixels,
            frame_index: 0,
            timestamp_ns: 0,
        }
    }

    pub fn filled(width: usize, height: usize, pixel: Rgba) -> Result<Self> {
        Self::new(width, height, vec![pixel; width * height])
    }

    pub fn with_index(mut self, frame_index: u64, timestamp_ns: u64) -> Self {
        self.frame_index = frame_index;
        self.timestamp_ns = timestamp_ns;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[Rgba] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgba {
        self.pixels[y * self.width + x]
    }

    pub fn into_pixels(self) -> Vec<Rgba> {
        self.pixels
    }

    pub fn alpha(&self) -> AlphaMask {
        AlphaMask {
            width: self.width,
            height: self.height,
            values: self.pixels.iter().map(|p| p[3]).collect(),
        }
    }

    /// Replaces the alpha plane, leaving RGB untouched.
    pub fn set_alpha(&mut self, mask: &AlphaMask) -> Result<()> {
        if mask.dims() != self.dims() {
            return Err(Error::dims(self.dims(), mask.dims()));
        }
        for (p, &a) in self.pixels.iter_mut().zip(mask.values()) {
            p[3] = a;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DepthFrame {
    width: usize,
    height: usize,
    depths: Vec<f32>,
    pub frame_index: u64,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, depths: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "depth frame must be at least 1x1, got {width}x{height}"
            )));
        }
        if depths.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "{} samples for a {width}x{height} depth frame",
                depths.len()
            )));
        }
        Ok(Self {
            width,
            height,
            depths,
            frame_index: 0,
        })
    }

    pub fn filled(width: usize, height: usize, depth_m: f32) -> Result<Self> {
        Self::new(width, height, vec![depth_m; width * height])
    }

    pub fn with_index(mut self, frame_index: u64) -> Self {
        self.frame_index = frame_index;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn depths(&self) -> &[f32] {
        &self.depths
    }

    pub fn depth(&self, x: usize, y: usize) -> f32 {
        self.depths[y * self.width + x]
    }
}

/// A depth sample is usable when it is finite and strictly positive.
#[inline]
pub fn is_valid_depth(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMask {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl AlphaMask {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "{} coverage values for a {width}x{height} mask",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidFrame(format!(
                "coverage {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub(crate) fn from_parts(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Horizontal centroid of the coverage, or `None` for an empty mask.
    pub fn centroid_x(&self) -> Option<f64> {
        let mut mass = 0.0;
        let mut moment = 0.0;
        for row in self.values.chunks_exact(self.width) {
            for (x, &a) in row.iter().enumerate() {
                mass += a;
                moment += a * (x as f64 + 0.5);
            }
        }
        (mass > 0.0).then(|| moment / mass)
    }
}
