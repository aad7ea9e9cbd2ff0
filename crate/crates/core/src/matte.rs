//! First pass: per-pixel coverage from registered depth plus foreground color
//! adjustment. No pixel reads its neighbours here, so the pass is a plain map.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{is_valid_depth, ColorFrame, DepthFrame, Rgb};
use crate::params::{AdjustTarget, MatteParams};

/// Cubic Hermite step `3t² − 2t³` on `t` clamped to `[0, 1]`.
#[inline]
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Coverage for one depth sample.
///
/// Opaque at or nearer than `threshold`; with `rolloff > 0` the coverage
/// falls smoothly to zero at `threshold + rolloff`. Invalid samples get
/// `invalid_alpha`.
#[inline]
pub fn compute_alpha(depth: f64, threshold: f64, rolloff: f64, invalid_alpha: f64) -> f64 {
    if !is_valid_depth(depth) {
        return invalid_alpha;
    }
    if rolloff <= 0.0 {
        return if depth <= threshold { 1.0 } else { 0.0 };
    }
    1.0 - smoothstep((depth - threshold) / rolloff)
}

#[inline]
pub fn apply_gamma(rgb: Rgb, gamma: f64) -> Rgb {
    if gamma == 1.0 {
        return rgb;
    }
    rgb.map(|v| v.powf(gamma))
}

#[inline]
pub fn apply_gain(rgb: Rgb, gain_rgb: Rgb, exposure_gain: f64) -> Rgb {
    std::array::from_fn(|c| (rgb[c] * gain_rgb[c] * exposure_gain).clamp(0.0, 1.0))
}

/// The color adjustment applied to whichever layer `adjust_target` selects:
/// gamma, then per-channel gain times exposure, then clamp.
#[inline]
pub fn adjust_color(rgb: Rgb, params: &MatteParams) -> Rgb {
    apply_gain(
        apply_gamma(rgb, params.gamma),
        params.gain_rgb,
        params.exposure_gain,
    )
}

pub(crate) fn is_identity_adjustment(params: &MatteParams) -> bool {
    params.gamma == 1.0 && params.exposure_gain == 1.0 && params.gain_rgb == [1.0; 3]
}

/// Produces the straight-alpha foreground buffer.
pub fn matte_pass(
    color: &ColorFrame,
    depth_registered: &DepthFrame,
    params: &MatteParams,
) -> Result<ColorFrame> {
    if color.dims() != depth_registered.dims() {
        return Err(Error::dims(color.dims(), depth_registered.dims()));
    }
    let (w, h) = color.dims();
    let adjust = params.adjust_target == AdjustTarget::Fg && !is_identity_adjustment(params);
    let (d, r, inv) = (params.depth_m, params.rolloff_m, params.invalid_depth_alpha);

    let mut out = vec![[0.0; 4]; w * h];
    out.par_chunks_mut(w)
        .zip(color.pixels().par_chunks(w))
        .zip(depth_registered.depths().par_chunks(w))
        .for_each(|((row, src), depths)| {
            for ((o, p), &z) in row.iter_mut().zip(src).zip(depths) {
                let a = compute_alpha(z as f64, d, r, inv);
                let rgb = if adjust {
                    adjust_color([p[0], p[1], p[2]], params)
                } else {
                    [p[0], p[1], p[2]]
                };
                *o = [rgb[0], rgb[1], rgb[2], a];
            }
        });
    Ok(ColorFrame::from_parts(w, h, out).with_index(color.frame_index, color.timestamp_ns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hard_threshold() {
        assert_eq!(compute_alpha(1.0, 1.5, 0.0, 0.0), 1.0);
        assert_eq!(compute_alpha(1.5, 1.5, 0.0, 0.0), 1.0);
        assert_eq!(compute_alpha(1.5001, 1.5, 0.0, 0.0), 0.0);
    }

    #[test]
    fn rolloff_values() {
        assert!((compute_alpha(1.2, 1.0, 0.4, 0.0) - 0.5).abs() < 1e-12);
        assert_eq!(compute_alpha(1.25, 1.0, 0.5, 0.0), 0.5);
        // t = 0.25: 1 - (3/16 - 2/64)
        assert!((compute_alpha(1.1, 1.0, 0.4, 0.0) - 0.84375).abs() < 1e-12);
    }

    #[test]
    fn invalid_depth_uses_configured_alpha() {
        assert_eq!(compute_alpha(f64::NAN, 1.0, 0.2, 0.0), 0.0);
        assert_eq!(compute_alpha(0.0, 1.0, 0.2, 0.0), 0.0);
        assert_eq!(compute_alpha(f64::INFINITY, 1.0, 0.0, 1.0), 1.0);
        assert_eq!(compute_alpha(-2.0, 1.0, 0.0, 0.5), 0.5);
    }

    #[test]
    fn gamma_and_gain() {
        assert_eq!(apply_gamma([0.25, 0.0, 1.0], 0.5), [0.5, 0.0, 1.0]);
        let b = apply_gamma([0.5; 3], 0.5)[0];
        assert!((b - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8 && b > 0.5);
        let g = apply_gain([0.2; 3], [1.0; 3], 3.0);
        assert!(g.iter().all(|v| (v - 0.6).abs() < 1e-12));
        assert_eq!(apply_gain([0.5; 3], [1.0; 3], 3.0), [1.0; 3]);
        assert_eq!(apply_gain([0.3, 0.4, 0.5], [1.0; 3], 1.0), [0.3, 0.4, 0.5]);
    }

    #[test]
    fn matte_pass_planes() {
        let color = ColorFrame::filled(4, 3, [0.2, 0.4, 0.6, 1.0]).unwrap();
        let near = DepthFrame::filled(4, 3, 0.8).unwrap();
        let far = DepthFrame::filled(4, 3, 4.0).unwrap();
        let p = MatteParams::default();
        let fg = matte_pass(&color, &near, &p).unwrap();
        assert!(fg.pixels().iter().all(|px| *px == [0.2, 0.4, 0.6, 1.0]));
        let bg = matte_pass(&color, &far, &p).unwrap();
        assert!(bg.pixels().iter().all(|px| px[3] == 0.0));
        let wrong = DepthFrame::filled(3, 3, 1.0).unwrap();
        assert!(matches!(
            matte_pass(&color, &wrong, &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn background_target_leaves_foreground_alone() {
        let color = ColorFrame::filled(2, 2, [0.2, 0.2, 0.2, 1.0]).unwrap();
        let near = DepthFrame::filled(2, 2, 0.5).unwrap();
        let p = MatteParams {
            exposure_gain: 3.0,
            adjust_target: AdjustTarget::Bg,
            ..MatteParams::default()
        };
        let fg = matte_pass(&color, &near, &p).unwrap();
        assert_eq!(fg.pixel(1, 1), [0.2, 0.2, 0.2, 1.0]);
        let p = MatteParams {
            adjust_target: AdjustTarget::Fg,
            ..p
        };
        let fg = matte_pass(&color, &near, &p).unwrap();
        assert!((fg.pixel(1, 1)[0] - 0.6).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn alpha_monotone_in_depth(d1 in 0.01f64..6.0, d2 in 0.01f64..6.0,
                                   th in 0.0f64..5.0, r in 0.0f64..1.0) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(compute_alpha(lo, th, r, 0.0) >= compute_alpha(hi, th, r, 0.0));
        }

        #[test]
        fn alpha_anchored_at_endpoints(th in 0.01f64..5.0, r in 0.001f64..1.0) {
            prop_assert_eq!(compute_alpha(th, th, r, 0.0), 1.0);
            prop_assert!(compute_alpha(th + r, th, r, 0.0).abs() <= 1e-9);
        }

        #[test]
        fn hard_threshold_is_binary(d in 0.01f64..6.0, th in 0.0f64..5.0) {
            let a = compute_alpha(d, th, 0.0, 0.0);
            prop_assert!(a == 0.0 || a == 1.0);
        }

        #[test]
        fn small_rolloff_converges(d in 0.01f64..6.0, th in 0.0f64..5.0) {
            prop_assume!((d - th).abs() > 1e-3);
            let hard = compute_alpha(d, th, 0.0, 0.0);
            prop_assert!((compute_alpha(d, th, 1e-6, 0.0) - hard).abs() < 1e-12);
        }

        #[test]
        fn gamma_fixes_endpoints_and_is_monotone(g in 0.05f64..8.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assert_eq!(&apply_gamma([0.0, 1.0, 0.0], g)[..2], &[0.0, 1.0]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(apply_gamma([lo; 3], g)[0] < apply_gamma([hi; 3], g)[0]);
        }
    }
}
