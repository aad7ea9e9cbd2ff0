//! Optional noise reduction ahead of matting.
//!
//! All filters act on RGB only, leave alpha untouched, and use clamp-to-edge
//! borders. The stage is off (`none`) by default.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{ColorFrame, Rgba};
use crate::params::PrefilterSettings;
use crate::registry::{Registry, Strategy};

pub const NONE: &str = "none";
pub const GAUSSIAN: &str = "gaussian";
pub const MEDIAN: &str = "median";
pub const BILATERAL: &str = "bilateral";

pub trait Prefilter: Strategy {
    fn apply(&self, img: &ColorFrame, settings: &PrefilterSettings) -> Result<ColorFrame>;
}

pub fn registry() -> Registry<dyn Prefilter> {
    Registry::<dyn Prefilter>::new("prefilter")
        .with(Arc::new(Passthrough))
        .with(Arc::new(Gaussian))
        .with(Arc::new(Median))
        .with(Arc::new(Bilateral))
}

pub struct Passthrough;

impl Strategy for Passthrough {
    fn name(&self) -> &'static str {
        NONE
    }
}

impl Prefilter for Passthrough {
    fn apply(&self, img: &ColorFrame, _: &PrefilterSettings) -> Result<ColorFrame> {
        Ok(img.clone())
    }
}

pub struct Gaussian;

impl Strategy for Gaussian {
    fn name(&self) -> &'static str {
        GAUSSIAN
    }
}

impl Prefilter for Gaussian {
    fn apply(&self, img: &ColorFrame, s: &PrefilterSettings) -> Result<ColorFrame> {
        gaussian_blur(img, s.gaussian_sigma, s.gaussian_ksize)
    }
}

pub struct Median;

impl Strategy for Median {
    fn name(&self) -> &'static str {
        MEDIAN
    }
}

impl Prefilter for Median {
    fn apply(&self, img: &ColorFrame, s: &PrefilterSettings) -> Result<ColorFrame> {
        median_blur(img, s.median_ksize)
    }
}

pub struct Bilateral;

impl Strategy for Bilateral {
    fn name(&self) -> &'static str {
        BILATERAL
    }
}

impl Prefilter for Bilateral {
    fn apply(&self, img: &ColorFrame, s: &PrefilterSettings) -> Result<ColorFrame> {
        bilateral(
            img,
            s.bilateral_radius,
            s.bilateral_sigma_color,
            s.bilateral_sigma_space,
        )
    }
}

fn check_ksize(ksize: usize) -> Result<()> {
    if ksize == 0 || ksize % 2 == 0 {
        return Err(Error::BadKernel(format!(
            "kernel size must be odd and >= 1, got {ksize}"
        )));
    }
    Ok(())
}

fn check_sigma(name: &str, sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::BadKernel(format!("{name} must be > 0, got {sigma}")));
    }
    Ok(())
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Normalized 1-D Gaussian taps, centered.
pub fn gaussian_kernel(sigma: f64, ksize: usize) -> Vec<f64> {
    let r = (ksize / 2) as isize;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian convolution: a horizontal pass then a vertical pass.
pub fn gaussian_blur(img: &ColorFrame, sigma: f64, ksize: usize) -> Result<ColorFrame> {
    check_ksize(ksize)?;
    check_sigma("sigma", sigma)?;
    if ksize == 1 {
        return Ok(img.clone());
    }
    let kernel = gaussian_kernel(sigma, ksize);
    let r = (ksize / 2) as isize;
    let (w, h) = img.dims();
    let src = img.pixels();

    let mut horizontal = vec![[0.0; 4]; w * h];
    horizontal
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            let line = &src[y * w..(y + 1) * w];
            for (x, out) in row.iter_mut().enumerate() {
                let mut acc = [0.0; 3];
                for (k, &wt) in kernel.iter().enumerate() {
                    let p = line[clamp_index(x as isize + k as isize - r, w)];
                    for c in 0..3 {
                        acc[c] += wt * p[c];
                    }
                }
                *out = [acc[0], acc[1], acc[2], line[x][3]];
            }
        });

    let mut out = vec![[0.0; 4]; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = [0.0; 3];
            for (k, &wt) in kernel.iter().enumerate() {
                let sy = clamp_index(y as isize + k as isize - r, h);
                let p = horizontal[sy * w + x];
                for c in 0..3 {
                    acc[c] += wt * p[c];
                }
            }
            *o = [
                acc[0].clamp(0.0, 1.0),
                acc[1].clamp(0.0, 1.0),
                acc[2].clamp(0.0, 1.0),
                src[y * w + x][3],
            ];
        }
    });
    Ok(ColorFrame::from_parts(w, h, out).with_index(img.frame_index, img.timestamp_ns))
}

/// Per-channel median over a `ksize`x`ksize` window.
pub fn median_blur(img: &ColorFrame, ksize: usize) -> Result<ColorFrame> {
    check_ksize(ksize)?;
    if ksize == 1 {
        return Ok(img.clone());
    }
    let r = (ksize / 2) as isize;
    let (w, h) = img.dims();
    let src = img.pixels();
    let mid = ksize * ksize / 2;

    let mut out = vec![[0.0; 4]; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut window = Vec::with_capacity(ksize * ksize);
        for (x, o) in row.iter_mut().enumerate() {
            let mut px: Rgba = src[y * w + x];
            for (c, value) in px.iter_mut().take(3).enumerate() {
                window.clear();
                for dy in -r..=r {
                    let sy = clamp_index(y as isize + dy, h);
                    for dx in -r..=r {
                        let sx = clamp_index(x as isize + dx, w);
                        window.push(src[sy * w + sx][c]);
                    }
                }
                let (_, m, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
                *value = *m;
            }
            *o = px;
        }
    });
    Ok(ColorFrame::from_parts(w, h, out).with_index(img.frame_index, img.timestamp_ns))
}

/// Bilateral filter: Gaussian spatial weight on pixel distance times Gaussian
/// range weight on the Euclidean RGB difference, renormalized per pixel.
pub fn bilateral(
    img: &ColorFrame,
    radius: usize,
    sigma_color: f64,
    sigma_space: f64,
) -> Result<ColorFrame> {
    check_sigma("sigma_color", sigma_color)?;
    check_sigma("sigma_space", sigma_space)?;
    if radius == 0 {
        return Ok(img.clone());
    }
    let r = radius as isize;
    let (w, h) = img.dims();
    let src = img.pixels();
    let side = 2 * radius + 1;
    let spatial: Vec<f64> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx * dx + dy * dy) as f64))
        .map(|d2| (-d2 / (2.0 * sigma_space * sigma_space)).exp())
        .collect();
    let range_scale = -1.0 / (2.0 * sigma_color * sigma_color);

    let mut out = vec![[0.0; 4]; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let center = src[y * w + x];
            let mut acc = [0.0; 3];
            let mut norm = 0.0;
            for (i, dy) in (-r..=r).enumerate() {
                let sy = clamp_index(y as isize + dy, h);
                for (j, dx) in (-r..=r).enumerate() {
                    let p = src[sy * w + clamp_index(x as isize + dx, w)];
                    let d2: f64 = (0..3).map(|c| (p[c] - center[c]).powi(2)).sum();
                    let wt = spatial[i * side + j] * (d2 * range_scale).exp();
                    norm += wt;
                    for c in 0..3 {
                        acc[c] += wt * p[c];
                    }
                }
            }
            *o = [
                (acc[0] / norm).clamp(0.0, 1.0),
                (acc[1] / norm).clamp(0.0, 1.0),
                (acc[2] / norm).clamp(0.0, 1.0),
                center[3],
            ];
        }
    });
    Ok(ColorFrame::from_parts(w, h, out).with_index(img.frame_index, img.timestamp_ns))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(w: usize, h: usize) -> ColorFrame {
        ColorFrame::filled(w, h, [0.3, 0.7, 0.2, 0.6]).unwrap()
    }

    fn close_to(a: &ColorFrame, b: &ColorFrame, tol: f64) -> bool {
        a.pixels()
            .iter()
            .zip(b.pixels())
            .all(|(p, q)| p.iter().zip(q).all(|(x, y)| (x - y).abs() <= tol))
    }

    #[test]
    fn constant_images_survive_every_filter() {
        let img = solid(9, 7);
        let s = PrefilterSettings::default();
        for name in registry().names() {
            let f = registry().get(name).unwrap();
            let out = f.apply(&img, &s).unwrap();
            assert!(close_to(&out, &img, 1e-12), "{name}");
        }
    }

    #[test]
    fn unit_kernels_are_identity() {
        let img = ColorFrame::new(3, 2, (0..6).map(|i| [i as f64 / 6.0, 0.1, 0.9, 1.0]).collect())
            .unwrap();
        assert_eq!(gaussian_blur(&img, 2.0, 1).unwrap(), img);
        assert_eq!(median_blur(&img, 1).unwrap(), img);
        assert_eq!(bilateral(&img, 0, 0.1, 1.0).unwrap(), img);
    }

    #[test]
    fn bad_kernels_rejected() {
        let img = solid(4, 4);
        assert!(matches!(gaussian_blur(&img, 1.0, 4), Err(Error::BadKernel(_))));
        assert!(matches!(gaussian_blur(&img, 0.0, 3), Err(Error::BadKernel(_))));
        assert!(matches!(median_blur(&img, 0), Err(Error::BadKernel(_))));
        assert!(matches!(bilateral(&img, 2, -1.0, 1.0), Err(Error::BadKernel(_))));
    }

    #[test]
    fn median_removes_salt() {
        let mut px = vec![[0.0, 0.0, 0.0, 1.0]; 25];
        px[12] = [1.0, 1.0, 1.0, 1.0];
        let img = ColorFrame::new(5, 5, px).unwrap();
        let out = median_blur(&img, 3).unwrap();
        assert_eq!(out.pixel(2, 2), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn alpha_untouched() {
        let px = (0..16).map(|i| [i as f64 / 16.0, 0.5, 0.5, (i % 3) as f64 / 2.0]).collect();
        let img = ColorFrame::new(4, 4, px).unwrap();
        let s = PrefilterSettings::default();
        for name in [GAUSSIAN, MEDIAN, BILATERAL] {
            let out = registry().get(name).unwrap().apply(&img, &s).unwrap();
            for (a, b) in img.pixels().iter().zip(out.pixels()) {
                assert_eq!(a[3], b[3], "{name}");
            }
        }
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(1.2, 5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(k[0], k[4]);
        assert!(k[2] > k[1]);
    }
}
