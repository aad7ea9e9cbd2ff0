//! Registration of the low-resolution depth raster onto the color raster.
//!
//! All resampling uses half-pixel centers: output pixel `x` of a `target`-wide
//! raster samples the source at `(x + 0.5) * source / target - 0.5`, clamped
//! to the source edge.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{is_valid_depth, ColorFrame, DepthFrame, Rgba};
use crate::registry::{Registry, Strategy};

/// Upscales a depth raster to the color raster's size.
pub trait DepthSampler: Strategy {
    fn upscale(&self, depth: &DepthFrame, target_w: usize, target_h: usize) -> Result<DepthFrame>;
}

pub const BILINEAR: &str = "linear";
pub const NEAREST: &str = "nearest";

pub fn samplers() -> Registry<dyn DepthSampler> {
    Registry::<dyn DepthSampler>::new("depth sampler")
        .with(Arc::new(Bilinear))
        .with(Arc::new(Nearest))
}

#[derive(Debug, Clone, Copy)]
pub struct Bilinear;

impl Strategy for Bilinear {
    fn name(&self) -> &'static str {
        BILINEAR
    }
}

impl DepthSampler for Bilinear {
    fn upscale(&self, depth: &DepthFrame, target_w: usize, target_h: usize) -> Result<DepthFrame> {
        upscale_depth(depth, target_w, target_h)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Nearest;

impl Strategy for Nearest {
    fn name(&self) -> &'static str {
        NEAREST
    }
}

impl DepthSampler for Nearest {
    fn upscale(&self, depth: &DepthFrame, target_w: usize, target_h: usize) -> Result<DepthFrame> {
        check_target(depth, target_w, target_h)?;
        let (sw, sh) = depth.dims();
        let cols: Vec<usize> = (0..target_w).map(|x| nearest_index(x, sw, target_w)).collect();
        let mut out = vec![0.0f32; target_w * target_h];
        out.par_chunks_mut(target_w).enumerate().for_each(|(y, row)| {
            let sy = nearest_index(y, sh, target_h);
            let src = &depth.depths()[sy * sw..(sy + 1) * sw];
            for (o, &sx) in row.iter_mut().zip(&cols) {
                *o = src[sx];
            }
        });
        Ok(DepthFrame::new(target_w, target_h, out)?.with_index(depth.frame_index))
    }
}

fn nearest_index(x: usize, source: usize, target: usize) -> usize {
    let pos = (x as f64 + 0.5) * source as f64 / target as f64;
    (pos.floor() as usize).min(source - 1)
}

/// Two taps along one axis and the weight of the second.
#[derive(Debug, Clone, Copy)]
struct Taps {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn axis_taps(source: usize, target: usize) -> Vec<Taps> {
    let scale = source as f64 / target as f64;
    let max = (source - 1) as f64;
    (0..target)
        .map(|x| {
            let pos = ((x as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = pos.floor() as usize;
            Taps {
                lo,
                hi: (lo + 1).min(source - 1),
                frac: pos - lo as f64,
            }
        })
        .collect()
}

fn check_target(depth: &DepthFrame, target_w: usize, target_h: usize) -> Result<()> {
    if target_w < depth.width() || target_h < depth.height() {
        return Err(Error::BadTarget {
            source_w: depth.width(),
            source_h: depth.height(),
            target_w,
            target_h,
        });
    }
    Ok(())
}

/// Bilinear depth upscaling with clamp-to-edge.
///
/// Invalid samples (non-finite or `<= 0`) are never averaged: if any tap with
/// non-zero weight is invalid the output sample is NaN. A sample that lands
/// exactly on one source pixel copies it bit-for-bit.
pub fn upscale_depth(depth: &DepthFrame, target_w: usize, target_h: usize) -> Result<DepthFrame> {
    check_target(depth, target_w, target_h)?;
    let (sw, sh) = depth.dims();
    let cols = axis_taps(sw, target_w);
    let rows = axis_taps(sh, target_h);
    let src = depth.depths();
    let mut out = vec![0.0f32; target_w * target_h];

    out.par_chunks_mut(target_w).enumerate().for_each(|(y, row)| {
        let ty = rows[y];
        let top = &src[ty.lo * sw..(ty.lo + 1) * sw];
        let bottom = &src[ty.hi * sw..(ty.hi + 1) * sw];
        for (o, tx) in row.iter_mut().zip(&cols) {
            *o = bilinear_tap(
                [top[tx.lo], top[tx.hi], bottom[tx.lo], bottom[tx.hi]],
                tx.frac,
                ty.frac,
            );
        }
    });
    Ok(DepthFrame::new(target_w, target_h, out)?.with_index(depth.frame_index))
}

#[inline]
fn bilinear_tap(taps: [f32; 4], fx: f64, fy: f64) -> f32 {
    if fx == 0.0 && fy == 0.0 {
        return taps[0];
    }
    let weights = [
        (1.0 - fx) * (1.0 - fy),
        fx * (1.0 - fy),
        (1.0 - fx) * fy,
        fx * fy,
    ];
    let mut acc = 0.0f64;
    for (&t, &w) in taps.iter().zip(&weights) {
        if w > 0.0 {
            let t = t as f64;
            if !is_valid_depth(t) {
                return f32::NAN;
            }
            acc += w * t;
        }
    }
    acc as f32
}

/// Center-crops `color` to the target aspect ratio, then resamples it
/// bilinearly to exactly `target_w` x `target_h`.
pub fn center_crop_scale(color: &ColorFrame, target_w: usize, target_h: usize) -> ColorFrame {
    let (sw, sh) = color.dims();
    let (crop_w, crop_h) = crop_dims(sw, sh, target_w, target_h);
    let x0 = (sw - crop_w) / 2;
    let y0 = (sh - crop_h) / 2;
    let src = color.pixels();

    let pixels = if (crop_w, crop_h) == (target_w, target_h) {
        (0..target_h)
            .flat_map(|y| {
                let start = (y0 + y) * sw + x0;
                src[start..start + target_w].iter().copied()
            })
            .collect()
    } else {
        let cols = axis_taps(crop_w, target_w);
        let rows = axis_taps(crop_h, target_h);
        let mut out = vec![[0.0; 4]; target_w * target_h];
        out.par_chunks_mut(target_w).enumerate().for_each(|(y, row)| {
            let ty = rows[y];
            let top = &src[(y0 + ty.lo) * sw + x0..];
            let bottom = &src[(y0 + ty.hi) * sw + x0..];
            for (o, tx) in row.iter_mut().zip(&cols) {
                *o = lerp_rgba(
                    lerp_rgba(top[tx.lo], top[tx.hi], tx.frac),
                    lerp_rgba(bottom[tx.lo], bottom[tx.hi], tx.frac),
                    ty.frac,
                );
            }
        });
        out
    };
    ColorFrame::from_parts(target_w, target_h, pixels)
        .with_index(color.frame_index, color.timestamp_ns)
}

/// Largest centered region of a `sw`x`sh` raster with the aspect of
/// `tw`x`th`, rounded to whole pixels.
pub fn crop_dims(sw: usize, sh: usize, tw: usize, th: usize) -> (usize, usize) {
    let (sw64, sh64, tw64, th64) = (sw as u64, sh as u64, tw as u64, th as u64);
    if sw64 * th64 > sh64 * tw64 {
        let w = (sh64 * tw64 + th64 / 2) / th64;
        ((w as usize).clamp(1, sw), sh)
    } else {
        let h = (sw64 * th64 + tw64 / 2) / tw64;
        (sw, (h as usize).clamp(1, sh))
    }
}

#[inline]
fn lerp_rgba(a: Rgba, b: Rgba, t: f64) -> Rgba {
    if t == 0.0 {
        return a;
    }
    std::array::from_fn(|c| (a[c] + (b[c] - a[c]) * t).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> DepthFrame {
        DepthFrame::new(w, h, (0..w * h).map(|i| 0.5 + i as f32 * 0.01).collect()).unwrap()
    }

    #[test]
    fn capture_geometry_factor_2_5() {
        let d = DepthFrame::filled(576, 768, 1.25).unwrap();
        let up = upscale_depth(&d, 1440, 1920).unwrap();
        assert_eq!(up.dims(), (1440, 1920));
        assert!(up.depths().iter().all(|&v| v == 1.25));
    }

    #[test]
    fn constant_map_stays_constant() {
        let d = DepthFrame::filled(7, 5, 1.7).unwrap();
        let up = upscale_depth(&d, 23, 11).unwrap();
        assert!(up.depths().iter().all(|&v| (v - 1.7).abs() < 1e-6));
    }

    #[test]
    fn same_size_is_identity() {
        let mut d = ramp(6, 4);
        d = DepthFrame::new(6, 4, {
            let mut v = d.depths().to_vec();
            v[5] = f32::NAN;
            v[9] = 0.0;
            v
        })
        .unwrap();
        let up = upscale_depth(&d, 6, 4).unwrap();
        let a: Vec<u32> = d.depths().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = up.depths().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn smaller_target_is_rejected() {
        let d = ramp(4, 4);
        assert!(matches!(upscale_depth(&d, 3, 8), Err(Error::BadTarget { .. })));
        assert!(matches!(Nearest.upscale(&d, 8, 2), Err(Error::BadTarget { .. })));
    }

    #[test]
    fn invalid_taps_propagate() {
        let d = DepthFrame::new(2, 1, vec![1.0, f32::NAN]).unwrap();
        let up = upscale_depth(&d, 4, 1).unwrap();
        // Pixel 0 clamps onto the valid sample; pixels 1.. mix in the NaN.
        assert_eq!(up.depths()[0], 1.0);
        assert!(up.depths()[1..].iter().all(|v| v.is_nan()));

        let z = DepthFrame::new(2, 1, vec![2.0, 0.0]).unwrap();
        let up = upscale_depth(&z, 4, 1).unwrap();
        assert!(up.depths()[1].is_nan());
    }

    #[test]
    fn two_by_two_matches_hand_values() {
        let d = DepthFrame::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let up = upscale_depth(&d, 4, 4).unwrap();
        // Source positions along each axis: 0 (clamped), 0.25, 0.75, 1 (clamped).
        let axis = [0.0, 0.25, 0.75, 1.0];
        for (y, fy) in axis.iter().enumerate() {
            for (x, fx) in axis.iter().enumerate() {
                let expected = 1.0 + fx * 1.0 + fy * 2.0;
                assert!((up.depth(x, y) as f64 - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn nearest_replicates_blocks() {
        let d = DepthFrame::new(2, 1, vec![1.0, 2.0]).unwrap();
        let up = Nearest.upscale(&d, 4, 2).unwrap();
        assert_eq!(up.depths(), &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn crop_trims_wide_input_symmetrically() {
        assert_eq!(crop_dims(1600, 1920, 1440, 1920), (1440, 1920));
        assert_eq!(crop_dims(1440, 2000, 3, 4), (1440, 1920));
        let pixels = (0..1600 * 4)
            .map(|i| {
                let x = (i % 1600) as f64;
                [x / 1600.0, 0.0, 0.0, 1.0]
            })
            .collect();
        let c = ColorFrame::new(1600, 4, pixels).unwrap();
        let out = center_crop_scale(&c, 1440, 4);
        assert_eq!(out.dims(), (1440, 4));
        assert_eq!(out.pixel(0, 0)[0], 80.0 / 1600.0);
        assert_eq!(out.pixel(1439, 3)[0], 1519.0 / 1600.0);
    }

    #[test]
    fn crop_scale_identity_and_solid() {
        let c = ColorFrame::new(3, 2, (0..6).map(|i| [i as f64 / 6.0, 0.5, 0.1, 1.0]).collect())
            .unwrap();
        assert_eq!(center_crop_scale(&c, 3, 2).pixels(), c.pixels());
        let solid = ColorFrame::filled(37, 23, [0.3, 0.6, 0.9, 1.0]).unwrap();
        let out = center_crop_scale(&solid, 64, 48);
        assert!(out
            .pixels()
            .iter()
            .all(|p| p.iter().zip([0.3, 0.6, 0.9, 1.0]).all(|(a, b)| (a - b).abs() < 1e-12)));
    }

    #[test]
    fn odd_center_survives_integer_scale() {
        let c = ColorFrame::new(3, 3, (0..9).map(|i| [i as f64 / 9.0, 1.0 - i as f64 / 9.0, 0.5, 1.0]).collect())
            .unwrap();
        let center = c.pixel(1, 1);
        assert_eq!(center_crop_scale(&c, 9, 9).pixel(4, 4), center);
        let big = center_crop_scale(&c, 9, 9);
        assert_eq!(center_crop_scale(&big, 3, 3).pixel(1, 1), center);
    }
}
