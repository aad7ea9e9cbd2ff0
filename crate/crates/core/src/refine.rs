//! Second pass: grayscale morphological close on the foreground's alpha
//! plane, then background adjustment and the final mix.
//!
//! The close reads neighbouring coverage, so it cannot share a pass with the
//! per-pixel matte. Dilation writes a complete buffer before erosion reads it.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{AlphaMask, ColorFrame};
use crate::matte::{adjust_color, is_identity_adjustment};
use crate::params::{AdjustTarget, MatteParams};
use crate::registry::{Registry, Strategy};

/// Square structuring-element sizes reachable from the smoothing slider;
/// `0` disables smoothing.
pub const KERNEL_SIZES: [usize; 5] = [0, 3, 5, 7, 9];

/// Bands the continuous slider: `[0,3)` off, `[3,5)` 3x3, `[5,7)` 5x5,
/// `[7,9)` 7x7, `9` and above 9x9.
pub fn kernel_from_slider(v: f64) -> usize {
    match v {
        v if v >= 9.0 => 9,
        v if v >= 7.0 => 7,
        v if v >= 5.0 => 5,
        v if v >= 3.0 => 3,
        _ => 0,
    }
}

fn check_window(k: usize) -> Result<()> {
    if k != 0 && k % 2 == 0 {
        return Err(Error::BadKernel(format!(
            "structuring element must be odd, got {k}x{k}"
        )));
    }
    Ok(())
}

fn check_close_kernel(k: usize) -> Result<()> {
    if !KERNEL_SIZES.contains(&k) {
        return Err(Error::BadKernel(format!(
            "close kernel must be one of {KERNEL_SIZES:?}, got {k}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Max,
    Min,
}

impl Extreme {
    // Mask values are validated finite, so plain comparisons suffice and
    // leave the loops free to vectorize.
    #[inline]
    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Extreme::Max => {
                if b > a {
                    b
                } else {
                    a
                }
            }
            Extreme::Min => {
                if b < a {
                    b
                } else {
                    a
                }
            }
        }
    }

    #[inline]
    fn fold_into(self, acc: &mut [f64], other: &[f64]) {
        match self {
            Extreme::Max => acc.iter_mut().zip(other).for_each(|(a, &b)| {
                if b > *a {
                    *a = b
                }
            }),
            Extreme::Min => acc.iter_mut().zip(other).for_each(|(a, &b)| {
                if b < *a {
                    *a = b
                }
            }),
        }
    }
}

/// Windowed max/min over a `k`x`k` square with clamp-to-edge borders.
///
/// `k` must be odd; `k` of 0 or 1 returns the mask unchanged.
pub trait Morphology: Strategy {
    fn window(&self, mask: &AlphaMask, k: usize, op: Extreme) -> Result<AlphaMask>;

    fn dilate(&self, mask: &AlphaMask, k: usize) -> Result<AlphaMask> {
        self.window(mask, k, Extreme::Max)
    }

    fn erode(&self, mask: &AlphaMask, k: usize) -> Result<AlphaMask> {
        self.window(mask, k, Extreme::Min)
    }

    /// Dilation followed by erosion with the same element.
    fn close(&self, mask: &AlphaMask, k: usize) -> Result<AlphaMask> {
        check_close_kernel(k)?;
        if k == 0 {
            return Ok(mask.clone());
        }
        let dilated = self.dilate(mask, k)?;
        self.erode(&dilated, k)
    }
}

pub const SEPARABLE: &str = "separable";
pub const NAIVE: &str = "naive";
pub const VAN_HERK: &str = "van-herk";

pub fn morphology_backends() -> Registry<dyn Morphology> {
    Registry::<dyn Morphology>::new("morphology")
        .with(Arc::new(Separable))
        .with(Arc::new(Naive))
        .with(Arc::new(VanHerk))
}

/// Row pass then column pass, each a direct `k`-tap max/min. Cost grows
/// linearly with `k`.
#[derive(Debug, Clone, Copy)]
pub struct Separable;

impl Strategy for Separable {
    fn name(&self) -> &'static str {
        SEPARABLE
    }
}

impl Morphology for Separable {
    fn window(&self, mask: &AlphaMask, k: usize, op: Extreme) -> Result<AlphaMask> {
        check_window(k)?;
        if k <= 1 {
            return Ok(mask.clone());
        }
        let r = k / 2;
        let (w, h) = mask.dims();
        let src = mask.values();

        // Clamped samples duplicate the edge value, which never changes a
        // max or min, so the window is simply truncated at the border.
        let mut rows = vec![0.0; w * h];
        rows.par_chunks_mut(w)
            .zip(src.par_chunks(w))
            .for_each(|(out, line)| {
                out.copy_from_slice(line);
                for d in 1..=r.min(w - 1) {
                    op.fold_into(&mut out[..w - d], &line[d..]);
                    op.fold_into(&mut out[d..], &line[..w - d]);
                }
            });

        let mut out = vec![0.0; w * h];
        out.par_chunks_mut(w).enumerate().for_each(|(y, o)| {
            let lo = y.saturating_sub(r);
            let hi = (y + r).min(h - 1);
            o.copy_from_slice(&rows[lo * w..(lo + 1) * w]);
            for sy in lo + 1..=hi {
                op.fold_into(o, &rows[sy * w..(sy + 1) * w]);
            }
        });
        Ok(AlphaMask::from_parts(w, h, out))
    }
}

/// Full `k`x`k` window per pixel.
#[derive(Debug, Clone, Copy)]
pub struct Naive;

impl Strategy for Naive {
    fn name(&self) -> &'static str {
        NAIVE
    }
}

impl Morphology for Naive {
    fn window(&self, mask: &AlphaMask, k: usize, op: Extreme) -> Result<AlphaMask> {
        check_window(k)?;
        if k <= 1 {
            return Ok(mask.clone());
        }
        let r = (k / 2) as isize;
        let (w, h) = mask.dims();
        let mut out = vec![0.0; w * h];
        out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for (x, o) in row.iter_mut().enumerate() {
                let mut m = mask.get(x, y);
                for dy in -r..=r {
                    let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    for dx in -r..=r {
                        let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                        m = op.pick(m, mask.get(sx, sy));
                    }
                }
                *o = m;
            }
        });
        Ok(AlphaMask::from_parts(w, h, out))
    }
}

/// Van Herk / Gil-Werman running extrema: three comparisons per sample per
/// axis regardless of `k`.
#[derive(Debug, Clone, Copy)]
pub struct VanHerk;

impl Strategy for VanHerk {
    fn name(&self) -> &'static str {
        VAN_HERK
    }
}

/// Block-wise prefix (`fwd`) and suffix (`bwd`) extrema of `padded`, in
/// blocks of `k` starting at index 0. `stride` elements form one sample, so
/// the same routine runs over a line of scalars or a stack of rows.
fn van_herk_blocks(padded: &[f64], stride: usize, k: usize, op: Extreme) -> (Vec<f64>, Vec<f64>) {
    let n = padded.len() / stride;
    let mut fwd = padded.to_vec();
    let mut bwd = padded.to_vec();
    for i in 1..n {
        if i % k != 0 {
            let (prev, cur) = fwd.split_at_mut(i * stride);
            let prev = &prev[(i - 1) * stride..];
            for (c, &p) in cur[..stride].iter_mut().zip(prev) {
                *c = op.pick(*c, p);
            }
        }
    }
    for i in (0..n.saturating_sub(1)).rev() {
        if (i + 1) % k != 0 {
            let (cur, next) = bwd.split_at_mut((i + 1) * stride);
            let cur = &mut cur[i * stride..];
            for (c, &p) in cur.iter_mut().zip(&next[..stride]) {
                *c = op.pick(*c, p);
            }
        }
    }
    (fwd, bwd)
}

impl Morphology for VanHerk {
    fn window(&self, mask: &AlphaMask, k: usize, op: Extreme) -> Result<AlphaMask> {
        check_window(k)?;
        if k <= 1 {
            return Ok(mask.clone());
        }
        let r = k / 2;
        let (w, h) = mask.dims();
        let src = mask.values();

        let mut rows = vec![0.0; w * h];
        rows.par_chunks_mut(w)
            .zip(src.par_chunks(w))
            .for_each(|(out, line)| {
                let padded: Vec<f64> = (0..w + 2 * r)
                    .map(|i| line[i.saturating_sub(r).min(w - 1)])
                    .collect();
                let (fwd, bwd) = van_herk_blocks(&padded, 1, k, op);
                for (x, o) in out.iter_mut().enumerate() {
                    *o = op.pick(bwd[x], fwd[x + k - 1]);
                }
            });

        let mut padded = Vec::with_capacity((h + 2 * r) * w);
        for i in 0..h + 2 * r {
            let sy = i.saturating_sub(r).min(h - 1);
            padded.extend_from_slice(&rows[sy * w..(sy + 1) * w]);
        }
        let (fwd, bwd) = van_herk_blocks(&padded, w, k, op);
        let mut out = vec![0.0; w * h];
        out.par_chunks_mut(w).enumerate().for_each(|(y, o)| {
            let b = &bwd[y * w..(y + 1) * w];
            let f = &fwd[(y + k - 1) * w..(y + k) * w];
            for ((o, &b), &f) in o.iter_mut().zip(b).zip(f) {
                *o = op.pick(b, f);
            }
        });
        Ok(AlphaMask::from_parts(w, h, out))
    }
}

pub fn dilate(mask: &AlphaMask, k: usize) -> Result<AlphaMask> {
    Separable.dilate(mask, k)
}

pub fn erode(mask: &AlphaMask, k: usize) -> Result<AlphaMask> {
    Separable.erode(mask, k)
}

/// Edge smoothing on a coverage mask; `k` is one of [`KERNEL_SIZES`].
pub fn close_alpha(mask: &AlphaMask, k: usize) -> Result<AlphaMask> {
    Separable.close(mask, k)
}

/// Mixes the (alpha-smoothed) foreground over the background. When the
/// adjustment target is the background, it is color-adjusted first. The
/// output is opaque.
pub fn composite(fg: &ColorFrame, bg: &ColorFrame, params: &MatteParams) -> Result<ColorFrame> {
    if fg.dims() != bg.dims() {
        return Err(Error::dims(fg.dims(), bg.dims()));
    }
    let (w, h) = fg.dims();
    let adjust_bg = params.adjust_target == AdjustTarget::Bg && !is_identity_adjustment(params);
    let mut out = vec![[0.0; 4]; w * h];
    out.par_chunks_mut(w)
        .zip(fg.pixels().par_chunks(w))
        .zip(bg.pixels().par_chunks(w))
        .for_each(|((row, f), b)| {
            for ((o, f), b) in row.iter_mut().zip(f).zip(b) {
                let back = if adjust_bg {
                    adjust_color([b[0], b[1], b[2]], params)
                } else {
                    [b[0], b[1], b[2]]
                };
                let a = f[3];
                *o = [
                    mix(f[0], back[0], a),
                    mix(f[1], back[1], a),
                    mix(f[2], back[2], a),
                    1.0,
                ];
            }
        });
    Ok(ColorFrame::from_parts(w, h, out).with_index(fg.frame_index, fg.timestamp_ns))
}

#[inline]
fn mix(fg: f64, bg: f64, a: f64) -> f64 {
    (fg * a + bg * (1.0 - a)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slider_bands() {
        assert_eq!(kernel_from_slider(0.0), 0);
        assert_eq!(kernel_from_slider(2.9), 0);
        assert_eq!(kernel_from_slider(3.0), 3);
        assert_eq!(kernel_from_slider(4.99), 3);
        assert_eq!(kernel_from_slider(5.0), 5);
        assert_eq!(kernel_from_slider(8.999), 7);
        assert_eq!(kernel_from_slider(9.0), 9);
        assert_eq!(kernel_from_slider(42.0), 9);
        assert_eq!(kernel_from_slider(f64::NAN), 0);
    }

    fn mask(w: usize, h: usize, v: Vec<f64>) -> AlphaMask {
        AlphaMask::new(w, h, v).unwrap()
    }

    #[test]
    fn hole_is_filled() {
        let mut v = vec![0.0; 49];
        for y in 1..6 {
            for x in 1..6 {
                v[y * 7 + x] = 1.0;
            }
        }
        v[3 * 7 + 3] = 0.0;
        let m = mask(7, 7, v);
        for backend in morphology_backends().names() {
            let closed = morphology_backends().get(backend).unwrap().close(&m, 3).unwrap();
            assert_eq!(closed.get(3, 3), 1.0, "{backend}");
        }
    }

    #[test]
    fn empty_mask_stays_empty() {
        let m = AlphaMask::filled(8, 5, 0.0).unwrap();
        for k in KERNEL_SIZES {
            assert_eq!(close_alpha(&m, k).unwrap(), m);
        }
    }

    #[test]
    fn bypass_is_identity() {
        let m = mask(3, 2, vec![0.1, 0.9, 0.3, 0.0, 1.0, 0.5]);
        assert_eq!(close_alpha(&m, 0).unwrap(), m);
    }

    #[test]
    fn bad_kernels() {
        let m = AlphaMask::filled(4, 4, 0.5).unwrap();
        assert!(matches!(close_alpha(&m, 4), Err(Error::BadKernel(_))));
        assert!(matches!(close_alpha(&m, 11), Err(Error::BadKernel(_))));
        assert!(matches!(dilate(&m, 2), Err(Error::BadKernel(_))));
    }

    #[test]
    fn dilate_single_pixel_to_block() {
        let mut v = vec![0.0; 25];
        v[12] = 1.0;
        let d = dilate(&mask(5, 5, v), 3).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                let inside = (1..=3).contains(&x) && (1..=3).contains(&y);
                assert_eq!(d.get(x, y), if inside { 1.0 } else { 0.0 });
            }
        }
        let ones = AlphaMask::filled(6, 4, 1.0).unwrap();
        assert_eq!(erode(&ones, 5).unwrap(), ones);
    }

    #[test]
    fn clamp_to_edge_keeps_border_subject() {
        // A subject touching the left border is not eaten by the close.
        let v: Vec<f64> = (0..36).map(|i| if i % 6 < 2 { 1.0 } else { 0.0 }).collect();
        let m = mask(6, 6, v);
        assert_eq!(close_alpha(&m, 5).unwrap(), m);
    }

    #[test]
    fn composite_mixes_linearly() {
        let p = MatteParams::default();
        let fg = ColorFrame::filled(2, 1, [1.0, 0.0, 0.0, 0.5]).unwrap();
        let bg = ColorFrame::filled(2, 1, [0.0, 0.0, 1.0, 1.0]).unwrap();
        let out = composite(&fg, &bg, &p).unwrap();
        assert_eq!(out.pixel(0, 0), [0.5, 0.0, 0.5, 1.0]);
        let small = ColorFrame::filled(1, 1, [0.0; 4]).unwrap();
        assert!(composite(&fg, &small, &p).is_err());
    }

    #[test]
    fn composite_adjusts_background_only_when_targeted() {
        let fg = ColorFrame::filled(1, 1, [0.9, 0.9, 0.9, 0.0]).unwrap();
        let bg = ColorFrame::filled(1, 1, [0.2, 0.1, 0.3, 1.0]).unwrap();
        let p = MatteParams {
            exposure_gain: 2.0,
            adjust_target: AdjustTarget::Bg,
            ..MatteParams::default()
        };
        let out = composite(&fg, &bg, &p).unwrap();
        assert!((out.pixel(0, 0)[0] - 0.4).abs() < 1e-12);
        let p = MatteParams {
            adjust_target: AdjustTarget::Fg,
            ..p
        };
        assert_eq!(composite(&fg, &bg, &p).unwrap().pixel(0, 0), [0.2, 0.1, 0.3, 1.0]);
    }
}
