//! Tuning state and partial updates.
//!
//! [`ParamUpdate`] is the single JSON schema used everywhere parameters are
//! supplied: the `--params` file, the CLI overrides, and the `set_params`
//! wire message. Updates are validated as a whole; one bad field rejects the
//! message and leaves the current state untouched.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Rgb;
use crate::prefilter;
use crate::refine::kernel_from_slider;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjustTarget {
    #[default]
    Fg,
    Bg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefilterSettings {
    /// Registry name: `none`, `gaussian`, `median` or `bilateral`.
    pub kind: String,
    pub gaussian_sigma: f64,
    pub gaussian_ksize: usize,
    pub median_ksize: usize,
    pub bilateral_radius: usize,
    pub bilateral_sigma_color: f64,
    pub bilateral_sigma_space: f64,
}

impl Default for PrefilterSettings {
    fn default() -> Self {
        Self {
            kind: prefilter::NONE.to_string(),
            gaussian_sigma: 1.0,
            gaussian_ksize: 5,
            median_ksize: 3,
            bilateral_radius: 4,
            bilateral_sigma_color: 0.1,
            bilateral_sigma_space: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatteParams {
    /// Depth threshold in meters; samples at or nearer than this are opaque.
    pub depth_m: f64,
    /// Width of the smoothstep transition beyond the threshold, in meters.
    pub rolloff_m: f64,
    /// Continuous edge-smoothing slider, banded by [`kernel_from_slider`].
    pub kernel_slider: f64,
    pub gamma: f64,
    pub exposure_gain: f64,
    pub gain_rgb: Rgb,
    pub adjust_target: AdjustTarget,
    /// Coverage assigned to pixels whose depth is missing.
    pub invalid_depth_alpha: f64,
    pub prefilter: PrefilterSettings,
}

impl Default for MatteParams {
    fn default() -> Self {
        Self {
            depth_m: 1.5,
            rolloff_m: 0.0,
            kernel_slider: 0.0,
            gamma: 1.0,
            exposure_gain: 1.0,
            gain_rgb: [1.0; 3],
            adjust_target: AdjustTarget::Fg,
            invalid_depth_alpha: 0.0,
            prefilter: PrefilterSettings::default(),
        }
    }
}

impl MatteParams {
    pub fn kernel(&self) -> usize {
        kernel_from_slider(self.kernel_slider)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        check_all(self, &mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }

    /// 32-bit FNV-1a over the canonical JSON encoding. Stamped on every
    /// outbound frame so a client can tell which state produced it.
    pub fn snapshot_hash(&self) -> u32 {
        let bytes = serde_json::to_vec(self).expect("params serialize");
        fnv1a32(&bytes)
    }
}

fn fnv1a32(bytes: &[u8]) -> u32 {
    bytes.iter().fold(0x811c_9dc5u32, |h, &b| {
        (h ^ b as u32).wrapping_mul(0x0100_0193)
    })
}

/// Inclusive/exclusive bounds for one numeric field, exported so that clients
/// can mirror server validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub min: f64,
    pub max: Option<f64>,
    pub min_exclusive: bool,
}

impl Range {
    const fn closed(min: f64, max: f64) -> Self {
        Self {
            min,
            max: Some(max),
            min_exclusive: false,
        }
    }

    const fn at_least(min: f64) -> Self {
        Self {
            min,
            max: None,
            min_exclusive: false,
        }
    }

    const fn above(min: f64) -> Self {
        Self {
            min,
            max: None,
            min_exclusive: true,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        let lower = if self.min_exclusive {
            v > self.min
        } else {
            v >= self.min
        };
        lower && self.max.map_or(true, |m| v <= m)
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.min_exclusive { '(' } else { '[' };
        match self.max {
            Some(max) => write!(f, "{open}{}, {max}]", self.min),
            None => write!(f, "{open}{}, inf)", self.min),
        }
    }
}

pub mod ranges {
    use super::Range;

    pub const DEPTH_M: Range = Range::closed(0.0, 5.0);
    pub const ROLLOFF_M: Range = Range::closed(0.0, 1.0);
    pub const KERNEL_SLIDER: Range = Range::at_least(0.0);
    pub const GAMMA: Range = Range::above(0.0);
    pub const EXPOSURE_GAIN: Range = Range::closed(1.0, 3.0);
    pub const CHANNEL_GAIN: Range = Range::at_least(0.0);
    pub const INVALID_DEPTH_ALPHA: Range = Range::closed(0.0, 1.0);
    pub const SIGMA: Range = Range::above(0.0);
    /// Odd kernel sizes up to this bound are accepted by the prefilters.
    pub const MAX_PREFILTER_KSIZE: usize = 31;
    pub const MAX_BILATERAL_RADIUS: usize = 15;
}

/// Machine-readable description of every validated field.
pub fn range_table() -> serde_json::Value {
    use ranges::*;
    serde_json::json!({
        "depth_m": DEPTH_M,
        "rolloff_m": ROLLOFF_M,
        "kernel_slider": KERNEL_SLIDER,
        "gamma": GAMMA,
        "exposure_gain": EXPOSURE_GAIN,
        "gain_rgb": CHANNEL_GAIN,
        "invalid_depth_alpha": INVALID_DEPTH_ALPHA,
        "prefilter": {
            "kind": prefilter::registry().names(),
            "gaussian_sigma": SIGMA,
            "gaussian_ksize": {"odd": true, "min": 1, "max": MAX_PREFILTER_KSIZE},
            "median_ksize": {"odd": true, "min": 1, "max": MAX_PREFILTER_KSIZE},
            "bilateral_radius": {"min": 0, "max": MAX_BILATERAL_RADIUS},
            "bilateral_sigma_color": SIGMA,
            "bilateral_sigma_space": SIGMA,
        },
        "adjust_target": ["fg", "bg"],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub value: String,
    pub allowed: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} (allowed {})", self.field, self.value, self.allowed)
    }
}

fn check_all(p: &MatteParams, errors: &mut Vec<FieldError>) {
    use ranges::*;
    let mut num = |field: &str, v: f64, range: Range| {
        if !range.contains(v) {
            errors.push(FieldError {
                field: field.to_string(),
                value: v.to_string(),
                allowed: range.to_string(),
            });
        }
    };
    num("depth_m", p.depth_m, DEPTH_M);
    num("rolloff_m", p.rolloff_m, ROLLOFF_M);
    num("kernel_slider", p.kernel_slider, KERNEL_SLIDER);
    num("gamma", p.gamma, GAMMA);
    num("exposure_gain", p.exposure_gain, EXPOSURE_GAIN);
    for (name, g) in ["gain_r", "gain_g", "gain_b"].iter().zip(p.gain_rgb) {
        num(name, g, CHANNEL_GAIN);
    }
    num("invalid_depth_alpha", p.invalid_depth_alpha, INVALID_DEPTH_ALPHA);
    let f = &p.prefilter;
    num("prefilter.gaussian_sigma", f.gaussian_sigma, SIGMA);
    num("prefilter.bilateral_sigma_color", f.bilateral_sigma_color, SIGMA);
    num("prefilter.bilateral_sigma_space", f.bilateral_sigma_space, SIGMA);

    let mut odd = |field: &str, k: usize| {
        if k % 2 == 0 || k > MAX_PREFILTER_KSIZE {
            errors.push(FieldError {
                field: field.to_string(),
                value: k.to_string(),
                allowed: format!("odd integer in [1, {MAX_PREFILTER_KSIZE}]"),
            });
        }
    };
    odd("prefilter.gaussian_ksize", f.gaussian_ksize);
    odd("prefilter.median_ksize", f.median_ksize);
    if f.bilateral_radius > MAX_BILATERAL_RADIUS {
        errors.push(FieldError {
            field: "prefilter.bilateral_radius".into(),
            value: f.bilateral_radius.to_string(),
            allowed: format!("integer in [0, {MAX_BILATERAL_RADIUS}]"),
        });
    }
    let kinds = prefilter::registry();
    if !kinds.contains(&f.kind) {
        errors.push(FieldError {
            field: "prefilter.kind".into(),
            value: f.kind.clone(),
            allowed: kinds.names().join("|"),
        });
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefilterUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian_ksize: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_ksize: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bilateral_radius: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bilateral_sigma_color: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bilateral_sigma_space: Option<f64>,
}

/// A partial [`MatteParams`]; absent fields are left unchanged.
///
/// Per-channel gains may be given as the `gain_rgb` triple or individually
/// via `gain_r`/`gain_g`/`gain_b` (individual fields win).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rolloff_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_slider: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_rgb: Option<Rgb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjust_target: Option<AdjustTarget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid_depth_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefilter: Option<PrefilterUpdate>,
}

impl ParamUpdate {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Field-wise overlay: fields set in `other` win.
    pub fn merge(mut self, other: ParamUpdate) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            depth_m, rolloff_m, kernel_slider, gamma, exposure_gain, gain_rgb, gain_r, gain_g,
            gain_b, adjust_target, invalid_depth_alpha
        );
        if let Some(o) = other.prefilter {
            let mut p = self.prefilter.unwrap_or_default();
            macro_rules! take_pf {
                ($($f:ident),*) => { $( if o.$f.is_some() { p.$f = o.$f; } )* };
            }
            take_pf!(
                kind, gaussian_sigma, gaussian_ksize, median_ksize, bilateral_radius,
                bilateral_sigma_color, bilateral_sigma_space
            );
            self.prefilter = Some(p);
        }
        self
    }
}

/// Merges `update` into `current`. On any out-of-range field the whole update
/// is rejected and the error lists every offending field.
pub fn apply_update(current: &MatteParams, update: &ParamUpdate) -> Result<MatteParams> {
    let mut next = current.clone();
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = update.$f.clone() { next.$f = v; } )* };
    }
    set!(depth_m, rolloff_m, kernel_slider, gamma, exposure_gain, gain_rgb, adjust_target, invalid_depth_alpha);
    for (i, g) in [update.gain_r, update.gain_g, update.gain_b].into_iter().enumerate() {
        if let Some(g) = g {
            next.gain_rgb[i] = g;
        }
    }
    if let Some(pf) = &update.prefilter {
        let p = &mut next.prefilter;
        macro_rules! set_pf {
            ($($f:ident),*) => { $( if let Some(v) = pf.$f.clone() { p.$f = v; } )* };
        }
        set_pf!(
            kind, gaussian_sigma, gaussian_ksize, median_ksize, bilateral_radius,
            bilateral_sigma_color, bilateral_sigma_space
        );
    }
    next.validate()?;
    Ok(next)
}
