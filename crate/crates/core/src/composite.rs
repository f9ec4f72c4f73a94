//! Grayscale rendering, low/high-flow color composites, and binary
//! PGM (P5) / PPM (P6) output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::percentile_sorted;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub clip_lo_pct: f64,
    pub clip_hi_pct: f64,
    pub gamma: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            clip_lo_pct: 0.5,
            clip_hi_pct: 99.5,
            gamma: 1.0,
        }
    }
}

impl RenderSpec {
    pub fn full_range() -> Self {
        RenderSpec {
            clip_lo_pct: 0.0,
            clip_hi_pct: 100.0,
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.clip_lo_pct && self.clip_lo_pct < self.clip_hi_pct && self.clip_hi_pct <= 100.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= clip_lo_pct < clip_hi_pct <= 100, got {} / {}",
                self.clip_lo_pct, self.clip_hi_pct
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Percentile clip, affine map to [0, 1], gamma, quantize to 0..=255.
pub fn to_grayscale(image: &Array2<f64>, spec: &RenderSpec) -> Result<Array2<u8>> {
    spec.validate()?;
    if image.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("image contains non-finite values".into()));
    }
    let mut sorted: Vec<f64> = image.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let lo = percentile_sorted(&sorted, spec.clip_lo_pct);
    let hi = percentile_sorted(&sorted, spec.clip_hi_pct);
    if !(hi > lo) {
        return Ok(Array2::zeros(image.dim()));
    }
    let span = hi - lo;
    Ok(image.mapv(|v| {
        let u = ((v - lo) / span).clamp(0.0, 1.0).powf(spec.gamma);
        (u * 255.0).round() as u8
    }))
}

/// Red carries the fast-flow image, green and blue the slow-flow image.
pub fn compose_low_high(slow_img: &Array2<f64>, fast_img: &Array2<f64>, spec: &RenderSpec) -> Result<Array3<u8>> {
    if slow_img.dim() != fast_img.dim() {
        return Err(Error::ShapeMismatch(format!(
            "slow {:?} vs fast {:?}",
            slow_img.dim(),
            fast_img.dim()
        )));
    }
    let r = to_grayscale(fast_img, spec)?;
    let gb = to_grayscale(slow_img, spec)?;
    let (ny, nx) = slow_img.dim();
    Ok(Array3::from_shape_fn((ny, nx, 3), |(y, x, c)| {
        if c == 0 {
            r[[y, x]]
        } else {
            gb[[y, x]]
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Image {
    Gray(Array2<u8>),
    Rgb(Array3<u8>),
}

impl Image {
    pub fn extension(&self) -> &'static str {
        match self {
            Image::Gray(_) => "pgm",
            Image::Rgb(_) => "ppm",
        }
    }

    /// Binary PNM encoding, maxval 255.
    pub fn encode(&self) -> Vec<u8> {
        let (magic, ny, nx, data): (&str, usize, usize, Vec<u8>) = match self {
            Image::Gray(a) => {
                let (ny, nx) = a.dim();
                ("P5", ny, nx, a.iter().copied().collect())
            }
            Image::Rgb(a) => {
                let (ny, nx, _) = a.dim();
                ("P6", ny, nx, a.iter().copied().collect())
            }
        };
        let mut out = format!("{magic}\n{nx} {ny}\n255\n").into_bytes();
        out.extend_from_slice(&data);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Image> {
        let bad = |m: &str| Error::UnrecognizedFormat(format!("PNM: {m}"));
        // magic, width, height, maxval separated by single whitespace
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
        }
        pos += 1;
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad dimension"));
        let (nx, ny, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if maxval != 255 {
            return Err(bad("maxval must be 255"));
        }
        let payload = bytes.get(pos..).unwrap_or_default();
        let channels = match fields[0] {
            "P5" => 1,
            "P6" => 3,
            _ => return Err(bad("unsupported magic")),
        };
        let expected = nx * ny * channels;
        if payload.len() != expected {
            return Err(Error::SizeMismatch {
                expected: expected as u64,
                actual: payload.len() as u64,
            });
        }
        Ok(if channels == 1 {
            Image::Gray(Array2::from_shape_vec((ny, nx), payload.to_vec()).map_err(|e| bad(&e.to_string()))?)
        } else {
            Image::Rgb(Array3::from_shape_vec((ny, nx, 3), payload.to_vec()).map_err(|e| bad(&e.to_string()))?)
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&self.encode()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Image::decode(&bytes)
    }
}

/// Writes `<prefix>_NNN.pgm|ppm` for each frame plus `<prefix>_index.txt`
/// with `frame_index,time_s` lines. Returns every path written.
pub fn write_image_sequence(
    frames: &[Image],
    times_s: &[f64],
    dir: impl AsRef<Path>,
    prefix: &str,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    if frames.len() != times_s.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} frames but {} times",
            frames.len(),
            times_s.len()
        )));
    }
    let width = frames.len().saturating_sub(1).to_string().len().max(3);
    let mut written = Vec::with_capacity(frames.len() + 1);
    for (i, img) in frames.iter().enumerate() {
        let p = dir.join(format!("{prefix}_{i:0width$}.{}", img.extension()));
        img.write(&p).map_err(|e| e.in_frame(i))?;
        written.push(p);
    }
    let index_path = dir.join(format!("{prefix}_index.txt"));
    let mut text = String::from("frame_index,time_s\n");
    for (i, t) in times_s.iter().enumerate() {
        text.push_str(&format!("{i},{t:.9}\n"));
    }
    std::fs::write(&index_path, text).map_err(|e| Error::io(&index_path, e))?;
    written.push(index_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_is_black() {
        let g = to_grayscale(&Array2::from_elem((4, 4), 3.0), &RenderSpec::default()).unwrap();
        assert!(g.iter().all(|&v| v == 0));
    }

    #[test]
    fn two_levels_map_to_extremes() {
        let img = Array2::from_shape_fn((4, 4), |(y, _)| if y < 2 { -1.5 } else { 8.0 });
        let g = to_grayscale(&img, &RenderSpec::full_range()).unwrap();
        assert!(g.iter().all(|&v| v == 0 || v == 255));
        assert_eq!(g[[0, 0]], 0);
        assert_eq!(g[[3, 3]], 255);
    }

    #[test]
    fn ramp_median_is_mid_gray() {
        let img = Array2::from_shape_fn((1, 101), |(_, x)| x as f64);
        let g = to_grayscale(&img, &RenderSpec::full_range()).unwrap();
        assert!(g[[0, 50]] == 127 || g[[0, 50]] == 128);
    }

    #[test]
    fn composite_primaries() {
        let spec = RenderSpec::full_range();
        let hi_lo = Array2::from_shape_vec((1, 2), vec![1.0, 0.0]).unwrap();
        let lo_hi = Array2::from_shape_vec((1, 2), vec![0.0, 1.0]).unwrap();
        let c = compose_low_high(&lo_hi, &hi_lo, &spec).unwrap();
        // pixel 0: fast at max, slow at min; pixel 1: the reverse
        assert_eq!([c[[0, 0, 0]], c[[0, 0, 1]], c[[0, 0, 2]]], [255, 0, 0]);
        assert_eq!([c[[0, 1, 0]], c[[0, 1, 1]], c[[0, 1, 2]]], [0, 255, 255]);
        let both = compose_low_high(&hi_lo, &hi_lo, &spec).unwrap();
        assert_eq!([both[[0, 0, 0]], both[[0, 0, 1]], both[[0, 0, 2]]], [255, 255, 255]);
        assert!(compose_low_high(&hi_lo, &Array2::zeros((2, 2)), &spec).is_err());
    }

    #[test]
    fn ppm_header() {
        let img = Image::Rgb(Array3::zeros((64, 64, 3)));
        assert!(img.encode().starts_with(b"P6\n64 64\n255\n"));
    }

    #[test]
    fn sequence_naming_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Image> = (0..3)
            .map(|i| Image::Gray(Array2::from_shape_fn((3, 5), |(y, x)| (i * 40 + y * 5 + x) as u8)))
            .collect();
        let paths = write_image_sequence(&frames, &[0.0, 0.001, 0.002], dir.path(), "pd").unwrap();
        let names: Vec<String> = paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["pd_000.pgm", "pd_001.pgm", "pd_002.pgm", "pd_index.txt"]);
        let back = Image::read(&paths[1]).unwrap();
        assert_eq!(back, frames[1]);
        let on_disk = std::fs::read(&paths[2]).unwrap();
        assert_eq!(on_disk, frames[2].encode());
        let index = std::fs::read_to_string(&paths[3]).unwrap();
        assert!(index.lines().nth(2).unwrap().starts_with("1,0.001"));
    }

    #[test]
    fn decode_rejects_truncated() {
        let mut bytes = Image::Gray(Array2::zeros((2, 2))).encode();
        bytes.pop();
        assert!(Image::decode(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn grayscale_is_monotone(vals in proptest::collection::vec(-1e3f64..1e3, 2..64), gamma in 0.3f64..3.0) {
            let n = vals.len();
            let img = Array2::from_shape_vec((1, n), vals.clone()).unwrap();
            let spec = RenderSpec { clip_lo_pct: 5.0, clip_hi_pct: 95.0, gamma };
            let g = to_grayscale(&img, &spec).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if vals[i] <= vals[j] {
                        prop_assert!(g[[0, i]] <= g[[0, j]] || g[[0, i]] - g[[0, j]] <= 1);
                    }
                }
            }
        }

        #[test]
        fn red_channel_ignores_slow(fast in proptest::collection::vec(0.0f64..1.0, 16),
                                    s1 in proptest::collection::vec(0.0f64..1.0, 16),
                                    s2 in proptest::collection::vec(0.0f64..1.0, 16)) {
            let f = Array2::from_shape_vec((4, 4), fast).unwrap();
            let a = compose_low_high(&Array2::from_shape_vec((4, 4), s1).unwrap(), &f, &RenderSpec::default()).unwrap();
            let b = compose_low_high(&Array2::from_shape_vec((4, 4), s2).unwrap(), &f, &RenderSpec::default()).unwrap();
            for y in 0..4 { for x in 0..4 { prop_assert_eq!(a[[y, x, 0]], b[[y, x, 0]]); } }
        }

        #[test]
        fn pnm_roundtrip(ny in 1usize..9, nx in 1usize..9, seed in 0u8..255) {
            let g = Image::Gray(Array2::from_shape_fn((ny, nx), |(y, x)| seed.wrapping_add((y * 31 + x * 7) as u8)));
            prop_assert_eq!(Image::decode(&g.encode()).unwrap(), g);
            let c = Image::Rgb(Array3::from_shape_fn((ny, nx, 3), |(y, x, c)| seed.wrapping_mul((y + x + c) as u8)));
            prop_assert_eq!(Image::decode(&c.encode()).unwrap(), c);
        }
    }
}
