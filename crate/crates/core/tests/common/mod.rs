//! Reference implementations and random fixtures shared by the integration
//! tests. Everything here evaluates definitions directly and shares no code
//! with the library's fast paths.
#![allow(dead_code)]

use depthmatte::{AlphaMask, ColorFrame, DepthFrame};
use rand::Rng;

pub fn random_depth(rng: &mut impl Rng, w: usize, h: usize) -> DepthFrame {
    DepthFrame::new(w, h, (0..w * h).map(|_| rng.gen_range(0.2f32..5.0)).collect()).unwrap()
}

pub fn random_color(rng: &mut impl Rng, w: usize, h: usize) -> ColorFrame {
    ColorFrame::new(
        w,
        h,
        (0..w * h)
            .map(|_| [rng.gen(), rng.gen(), rng.gen(), rng.gen()])
            .collect(),
    )
    .unwrap()
}

pub fn random_mask(rng: &mut impl Rng, w: usize, h: usize) -> AlphaMask {
    AlphaMask::new(w, h, (0..w * h).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

pub fn random_binary_mask(rng: &mut impl Rng, w: usize, h: usize) -> AlphaMask {
    let p = rng.gen_range(0.2..0.8);
    AlphaMask::new(
        w,
        h,
        (0..w * h).map(|_| if rng.gen_bool(p) { 1.0 } else { 0.0 }).collect(),
    )
    .unwrap()
}

fn clampi(i: isize, n: usize) -> usize {
    i.max(0).min(n as isize - 1) as usize
}

/// Bilinear sample written as a tent-weighted sum over every source pixel.
pub fn bilinear_oracle(src: &DepthFrame, tw: usize, th: usize, x: usize, y: usize) -> f64 {
    let (sw, sh) = src.dims();
    let u = ((x as f64 + 0.5) * sw as f64 / tw as f64 - 0.5).max(0.0).min(sw as f64 - 1.0);
    let v = ((y as f64 + 0.5) * sh as f64 / th as f64 - 0.5).max(0.0).min(sh as f64 - 1.0);
    let mut acc = 0.0;
    for j in 0..sh {
        let wy = (1.0 - (v - j as f64).abs()).max(0.0);
        for i in 0..sw {
            let wx = (1.0 - (u - i as f64).abs()).max(0.0);
            acc += wx * wy * src.depth(i, j) as f64;
        }
    }
    acc
}

/// Direct 2-D Gaussian convolution on RGB, alpha passed through.
pub fn gaussian_oracle(img: &ColorFrame, sigma: f64, k: usize) -> ColorFrame {
    let r = (k / 2) as isize;
    let g = |d: isize| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp();
    let norm: f64 = (-r..=r).map(g).sum::<f64>().powi(2);
    let (w, h) = img.dims();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for dy in -r..=r {
                for dx in -r..=r {
                    let p = img.pixel(clampi(x as isize + dx, w), clampi(y as isize + dy, h));
                    let wt = g(dx) * g(dy) / norm;
                    for c in 0..3 {
                        acc[c] += wt * p[c];
                    }
                }
            }
            out.push([acc[0], acc[1], acc[2], img.pixel(x, y)[3]]);
        }
    }
    ColorFrame::new(w, h, out).unwrap()
}

/// Per-channel window median by full sort.
pub fn median_oracle(img: &ColorFrame, k: usize) -> ColorFrame {
    let r = (k / 2) as isize;
    let (w, h) = img.dims();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut px = img.pixel(x, y);
            for c in 0..3 {
                let mut win = Vec::new();
                for dy in -r..=r {
                    for dx in -r..=r {
                        win.push(img.pixel(clampi(x as isize + dx, w), clampi(y as isize + dy, h))[c]);
                    }
                }
                win.sort_by(|a, b| a.partial_cmp(b).unwrap());
                px[c] = win[win.len() / 2];
            }
            out.push(px);
        }
    }
    ColorFrame::new(w, h, out).unwrap()
}

/// Windowed max (`dilate`) or min over a k x k square, clamp-to-edge.
pub fn window_oracle(mask: &AlphaMask, k: usize, dilate: bool) -> AlphaMask {
    let r = (k / 2) as isize;
    let (w, h) = mask.dims();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut vals = Vec::new();
            for dy in -r..=r {
                for dx in -r..=r {
                    vals.push(mask.get(clampi(x as isize + dx, w), clampi(y as isize + dy, h)));
                }
            }
            let v = if dilate {
                vals.into_iter().fold(f64::NEG_INFINITY, f64::max)
            } else {
                vals.into_iter().fold(f64::INFINITY, f64::min)
            };
            out.push(v);
        }
    }
    AlphaMask::new(w, h, out).unwrap()
}

pub fn close_oracle(mask: &AlphaMask, k: usize) -> AlphaMask {
    window_oracle(&window_oracle(mask, k, true), k, false)
}

/// Column `x` maximizing |I(x+1) - I(x)| on row `y` (red channel).
pub fn gradient_argmax(img: &ColorFrame, y: usize) -> usize {
    (0..img.width() - 1)
        .max_by(|&a, &b| {
            let ga = (img.pixel(a + 1, y)[0] - img.pixel(a, y)[0]).abs();
            let gb = (img.pixel(b + 1, y)[0] - img.pixel(b, y)[0]).abs();
            ga.partial_cmp(&gb).unwrap()
        })
        .unwrap()
}

pub fn row_variance(img: &ColorFrame, y: usize, xs: std::ops::Range<usize>) -> f64 {
    let v: Vec<f64> = xs.map(|x| img.pixel(x, y)[0]).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / v.len() as f64
}

/// Mask-moment horizontal centroid (pixel centers at x + 0.5).
pub fn centroid_x(mask: &AlphaMask) -> Option<f64> {
    let (mut m00, mut m10) = (0.0, 0.0);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            m00 += mask.get(x, y);
            m10 += mask.get(x, y) * (x as f64 + 0.5);
        }
    }
    (m00 > 0.0).then(|| m10 / m00)
}
