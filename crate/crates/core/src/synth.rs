//! Synthetic RGB-D scenes: a flat-colored subject at one depth in front of a
//! flat background at another, optionally moving horizontally. Lets the whole
//! pipeline run (and be checked against known silhouettes) without a device.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{AlphaMask, ColorFrame, DepthFrame, Rgb, COLOR_FRAME_PERIOD_NS};

/// Upper end of the sensor's effective range, in meters.
pub const MAX_RANGE_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectShape {
    Ellipse,
    Rectangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub subject_shape: SubjectShape,
    pub subject_depth_m: f64,
    pub background_depth_m: f64,
    pub velocity_px_per_frame: f64,
    pub subject_color: Rgb,
    pub background_color: Rgb,
    pub noise_sigma: f64,
    /// Color raster `[width, height]`.
    pub color_size: [usize; 2],
    /// Depth raster `[width, height]`.
    pub depth_size: [usize; 2],
    /// Subject center at frame 0, as fractions of the color raster.
    pub subject_center: [f64; 2],
    /// Subject half-extents, as fractions of the color raster.
    pub subject_half_extent: [f64; 2],
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            subject_shape: SubjectShape::Ellipse,
            subject_depth_m: 1.0,
            background_depth_m: 3.0,
            velocity_px_per_frame: 0.0,
            subject_color: [0.85, 0.55, 0.4],
            background_color: [0.2, 0.25, 0.3],
            noise_sigma: 0.0,
            color_size: [320, 240],
            depth_size: [320, 240],
            subject_center: [0.35, 0.5],
            subject_half_extent: [0.15, 0.35],
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScene(msg));
        let in_range = |d: f64| d > 0.0 && d <= MAX_RANGE_M;
        if !in_range(self.subject_depth_m) || !in_range(self.background_depth_m) {
            return bad(format!(
                "depths must lie in (0, {MAX_RANGE_M}] m, got subject {} and background {}",
                self.subject_depth_m, self.background_depth_m
            ));
        }
        if self.subject_depth_m >= self.background_depth_m {
            return bad(format!(
                "subject depth {} m must be nearer than background depth {} m",
                self.subject_depth_m, self.background_depth_m
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !self.velocity_px_per_frame.is_finite() {
            return bad("velocity must be finite".into());
        }
        if self.color_size.contains(&0) || self.depth_size.contains(&0) {
            return bad("raster sizes must be at least 1x1".into());
        }
        if self.subject_half_extent.iter().any(|h| !(*h > 0.0)) {
            return bad("subject half-extents must be positive".into());
        }
        let colors = self.subject_color.iter().chain(&self.background_color);
        if colors.clone().any(|c| !(0.0..=1.0).contains(c)) {
            return bad("colors must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Subject center in color-raster pixel coordinates at `frame_index`.
    pub fn subject_center_px(&self, frame_index: u64) -> (f64, f64) {
        let [w, h] = self.color_size;
        let shift = (frame_index as f64 * self.velocity_px_per_frame).round();
        (
            self.subject_center[0] * w as f64 + shift,
            self.subject_center[1] * h as f64,
        )
    }

    /// Whether the color-raster point `(px, py)` lies inside the subject.
    fn contains(&self, frame_index: u64, px: f64, py: f64) -> bool {
        let (cx, cy) = self.subject_center_px(frame_index);
        let hx = self.subject_half_extent[0] * self.color_size[0] as f64;
        let hy = self.subject_half_extent[1] * self.color_size[1] as f64;
        let (dx, dy) = ((px - cx) / hx, (py - cy) / hy);
        match self.subject_shape {
            SubjectShape::Ellipse => dx * dx + dy * dy <= 1.0,
            SubjectShape::Rectangle => dx.abs() <= 1.0 && dy.abs() <= 1.0,
        }
    }

    /// Binary subject mask on a `width`x`height` raster covering the color
    /// field of view.
    pub fn silhouette_at(&self, frame_index: u64, width: usize, height: usize) -> AlphaMask {
        let sx = self.color_size[0] as f64 / width as f64;
        let sy = self.color_size[1] as f64 / height as f64;
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            let py = (y as f64 + 0.5) * sy;
            for x in 0..width {
                let px = (x as f64 + 0.5) * sx;
                values.push(if self.contains(frame_index, px, py) { 1.0 } else { 0.0 });
            }
        }
        AlphaMask::from_parts(width, height, values)
    }

    /// Subject mask at color resolution.
    pub fn silhouette(&self, frame_index: u64) -> AlphaMask {
        self.silhouette_at(frame_index, self.color_size[0], self.color_size[1])
    }
}

fn frame_rng(seed: u64, frame_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame_index);
    rng
}

/// Renders color and depth for one instant of the scene.
///
/// The caller is expected to have validated `spec`.
pub fn synth_scene(spec: &SceneSpec, frame_index: u64) -> (ColorFrame, DepthFrame) {
    let [cw, ch] = spec.color_size;
    let mask = spec.silhouette(frame_index);
    let mut pixels: Vec<_> = mask
        .values()
        .iter()
        .map(|&m| {
            let c = if m > 0.0 {
                spec.subject_color
            } else {
                spec.background_color
            };
            [c[0], c[1], c[2], 1.0]
        })
        .collect();

    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
        let mut rng = frame_rng(spec.seed, frame_index);
        for p in &mut pixels {
            for c in &mut p[..3] {
                *c = (*c + normal.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
    }

    let [dw, dh] = spec.depth_size;
    let depth_mask = spec.silhouette_at(frame_index, dw, dh);
    let depths = depth_mask
        .values()
        .iter()
        .map(|&m| {
            if m > 0.0 {
                spec.subject_depth_m as f32
            } else {
                spec.background_depth_m as f32
            }
        })
        .collect();

    let color = ColorFrame::from_parts(cw, ch, pixels)
        .with_index(frame_index, frame_index * COLOR_FRAME_PERIOD_NS);
    let depth = DepthFrame::new(dw, dh, depths)
        .expect("depth raster sized from spec")
        .with_index(frame_index);
    (color, depth)
}

/// A replacement background: diagonal gradient with a soft checker so that
/// compositing errors are visible.
pub fn synth_background(width: usize, height: usize) -> ColorFrame {
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let u = (x as f64 + 0.5) / width as f64;
            let v = (y as f64 + 0.5) / height as f64;
            let checker = if ((x / 16) + (y / 16)) % 2 == 0 { 0.06 } else { 0.0 };
            pixels.push([
                0.1 + 0.3 * u + checker,
                0.45 + 0.35 * v,
                0.2 + 0.2 * (1.0 - u) + checker,
                1.0,
            ]);
        }
    }
    ColorFrame::from_parts(width, height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_scene_is_frame_invariant() {
        let spec = SceneSpec::default();
        let (c0, d0) = synth_scene(&spec, 0);
        let (c7, d7) = synth_scene(&spec, 7);
        assert_eq!(c0.pixels(), c7.pixels());
        assert_eq!(d0.depths(), d7.depths());
    }

    #[test]
    fn depth_has_exactly_two_values() {
        let spec = SceneSpec {
            subject_depth_m: 1.0,
            background_depth_m: 3.0,
            depth_size: [80, 60],
            ..SceneSpec::default()
        };
        let (_, d) = synth_scene(&spec, 3);
        let mut values: Vec<u32> = d.depths().iter().map(|v| v.to_bits()).collect();
        values.sort_unstable();
        values.dedup();
        assert_eq!(values, vec![1.0f32.to_bits(), 3.0f32.to_bits()]);
    }

    #[test]
    fn noise_is_seeded() {
        let spec = SceneSpec {
            noise_sigma: 0.05,
            ..SceneSpec::default()
        };
        assert_eq!(synth_scene(&spec, 2).0, synth_scene(&spec, 2).0);
        assert_ne!(synth_scene(&spec, 2).0.pixels(), synth_scene(&spec, 3).0.pixels());
        let reseeded = SceneSpec { seed: 9, ..spec.clone() };
        assert_ne!(synth_scene(&spec, 2).0.pixels(), synth_scene(&reseeded, 2).0.pixels());
        // Noise never reaches the depth raster.
        assert_eq!(synth_scene(&spec, 2).1.depths(), synth_scene(&reseeded, 2).1.depths());
    }

    #[test]
    fn validation() {
        let inverted = SceneSpec {
            subject_depth_m: 3.0,
            background_depth_m: 1.0,
            ..SceneSpec::default()
        };
        assert!(inverted.validate().is_err());
        let too_far = SceneSpec {
            background_depth_m: 5.5,
            ..SceneSpec::default()
        };
        assert!(too_far.validate().is_err());
        assert!(SceneSpec::default().validate().is_ok());
    }

    /// Mask-moment centroid, computed independently of `AlphaMask::centroid_x`.
    fn moment_centroid(mask: &AlphaMask) -> f64 {
        let (mut m00, mut m10) = (0.0, 0.0);
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                let a = mask.get(x, y);
                m00 += a;
                m10 += a * x as f64;
            }
        }
        m10 / m00
    }

    #[test]
    fn moving_subject_shifts_by_velocity() {
        for shape in [SubjectShape::Ellipse, SubjectShape::Rectangle] {
            let spec = SceneSpec {
                subject_shape: shape,
                velocity_px_per_frame: 4.0,
                ..SceneSpec::default()
            };
            let c0 = moment_centroid(&spec.silhouette(0));
            let c1 = moment_centroid(&spec.silhouette(1));
            assert!((c1 - c0 - 4.0).abs() < 1e-9, "{shape:?}: {}", c1 - c0);
        }
    }
}
