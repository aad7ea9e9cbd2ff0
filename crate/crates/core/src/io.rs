//! Capture-format I/O.
//!
//! Depth files are headerless little-endian `f32` rasters in row-major order;
//! their dimensions travel in the [`Manifest`](crate::manifest::Manifest).
//! Color images are decoded to unit-interval RGBA and only quantized to 8 bits
//! when encoded again.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, RgbImage, RgbaImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ColorFrame, DepthFrame};

pub fn load_depth(path: impl AsRef<Path>, width: usize, height: usize) -> Result<DepthFrame> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = (width * height * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            width,
            height,
            expected,
            actual: bytes.len() as u64,
        });
    }
    DepthFrame::new(width, height, decode_depth_bytes(&bytes))
}

pub fn decode_depth_bytes(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

pub fn encode_depth_bytes(frame: &DepthFrame) -> Vec<u8> {
    frame
        .depths()
        .iter()
        .flat_map(|d| d.to_le_bytes())
        .collect()
}

pub fn write_depth(frame: &DepthFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_depth_bytes(frame)).map_err(|e| Error::io(path, e))
}

/// Reads a PNG or JPEG. Images without an alpha channel come back opaque.
pub fn load_color(path: impl AsRef<Path>) -> Result<ColorFrame> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let image = image::load_from_memory(&bytes).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(color_from_image(&image))
}

pub fn color_from_image(image: &DynamicImage) -> ColorFrame {
    let rgba = image.to_rgba32f();
    let (w, h) = rgba.dimensions();
    let pixels = rgba
        .pixels()
        .map(|p| p.0.map(|c| (c as f64).clamp(0.0, 1.0)))
        .collect();
    ColorFrame::from_parts(w as usize, h as usize, pixels)
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn to_rgba8(frame: &ColorFrame) -> RgbaImage {
    let raw = frame.pixels().iter().flat_map(|p| p.map(quantize)).collect();
    RgbaImage::from_raw(frame.width() as u32, frame.height() as u32, raw)
        .expect("buffer length matches frame dimensions")
}

pub fn to_rgb8(frame: &ColorFrame) -> RgbImage {
    let raw = frame
        .pixels()
        .iter()
        .flat_map(|p| [quantize(p[0]), quantize(p[1]), quantize(p[2])])
        .collect();
    RgbImage::from_raw(frame.width() as u32, frame.height() as u32, raw)
        .expect("buffer length matches frame dimensions")
}

pub fn save_png(frame: &ColorFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(frame, Encoding::Png)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    #[default]
    Png,
    Jpeg,
}

impl std::str::FromStr for Encoding {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "png" => Ok(Encoding::Png),
            "jpeg" | "jpg" => Ok(Encoding::Jpeg),
            other => Err(format!("unsupported encoding `{other}` (png, jpeg)")),
        }
    }
}

/// Encodes a frame in memory. PNG keeps alpha; JPEG drops it.
pub fn encode(frame: &ColorFrame, encoding: Encoding) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    let res = match encoding {
        Encoding::Png => to_rgba8(frame).write_to(&mut out, ImageFormat::Png),
        Encoding::Jpeg => to_rgb8(frame).write_to(&mut out, ImageFormat::Jpeg),
    };
    res.map_err(|e| Error::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn depth_file_layout_is_raw_le_f32() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let frame = DepthFrame::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        write_depth(&frame, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 16);
        assert_eq!(&bytes[..4], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[12..], &4.0f32.to_le_bytes());
    }

    #[test]
    fn streaming_resolution_file_size() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.bin");
        write_depth(&DepthFrame::filled(320, 240, 1.0).unwrap(), &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 307_200);
        let back = load_depth(&path, 320, 240).unwrap();
        assert_eq!(back.dims(), (320, 240));
    }

    #[test]
    fn nan_written_verbatim() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let payload = f32::from_bits(0x7fc0_1234);
        let frame = DepthFrame::new(3, 1, vec![payload, f32::INFINITY, -0.0]).unwrap();
        write_depth(&frame, &path).unwrap();
        let back = load_depth(&path, 3, 1).unwrap();
        let bits: Vec<u32> = back.depths().iter().map(|d| d.to_bits()).collect();
        assert_eq!(bits, vec![0x7fc0_1234, f32::INFINITY.to_bits(), (-0.0f32).to_bits()]);
    }

    #[test]
    fn short_file_is_size_mismatch() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.bin");
        std::fs::write(&path, [0u8; 100]).unwrap();
        match load_depth(&path, 320, 240) {
            Err(Error::SizeMismatch {
                expected, actual, ..
            }) => {
                assert_eq!(expected, 307_200);
                assert_eq!(actual, 100);
            }
            other => panic!("expected SizeMismatch, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_depth("/nonexistent/depth_0007.bin", 2, 2).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("depth_0007.bin"));
    }

    #[test]
    fn opaque_png_gets_unit_alpha() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.png");
        let img = RgbImage::from_fn(4, 3, |x, y| image::Rgb([x as u8 * 60, y as u8 * 100, 7]));
        img.save(&path).unwrap();
        let frame = load_color(&path).unwrap();
        assert_eq!(frame.dims(), (4, 3));
        assert!(frame.pixels().iter().all(|p| p[3] == 1.0));
        assert!((frame.pixel(3, 2)[0] - 180.0 / 255.0).abs() < 1e-6);
        assert!(frame.pixels().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn jpeg_decodes_at_full_size() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.jpg");
        let frame = ColorFrame::filled(144, 192, [0.2, 0.4, 0.6, 1.0]).unwrap();
        std::fs::write(&path, encode(&frame, Encoding::Jpeg).unwrap()).unwrap();
        let back = load_color(&path).unwrap();
        assert_eq!(back.dims(), (144, 192));
        assert!((back.pixel(70, 90)[1] - 0.4).abs() < 0.02);
    }

    #[test]
    fn truncated_png_is_decode_failure() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.png");
        let frame = ColorFrame::filled(16, 16, [0.5, 0.1, 0.9, 1.0]).unwrap();
        let bytes = encode(&frame, Encoding::Png).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_color(&path), Err(Error::Decode { .. })));
    }

    #[test]
    fn png_round_trip_quantizes_to_8_bits() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.png");
        let frame = ColorFrame::new(2, 1, vec![[0.0, 0.5, 1.0, 0.25], [1.0, 1.0, 0.0, 1.0]]).unwrap();
        save_png(&frame, &path).unwrap();
        let back = load_color(&path).unwrap();
        for (a, b) in frame.pixels().iter().zip(back.pixels()) {
            for c in 0..4 {
                assert!((a[c] - b[c]).abs() <= 0.5 / 255.0 + 1e-6, "{a:?} vs {b:?}");
            }
        }
    }
}
