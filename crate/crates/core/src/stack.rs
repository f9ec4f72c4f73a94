//! Frame and hologram stacks, plus the `RCLDH1` raw stack file format.
//!
//! Layout (all little-endian):
//!
//! | bytes | field |
//! |-------|-------|
//! | 6     | magic `RCLDH1` |
//! | 12    | `u32` nx, ny, nt |
//! | 1     | dtype: 0 = real f32, 1 = complex f32 interleaved (re, im) |
//! | 32    | `f64` sample_rate_hz, exposure_s, wavelength_m, pixel_pitch_m |
//! | ...   | samples in (t, y, x) order |
//!
//! A sidecar `<path>.meta.json` repeats the header as key/value pairs and
//! carries the free-text origin tag.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, ArrayView2, Axis};
use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"RCLDH1";
pub const HEADER_LEN: usize = 6 + 12 + 1 + 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum DType {
    Real = 0,
    Complex = 1,
}

impl DType {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DType::Real),
            1 => Ok(DType::Complex),
            other => Err(Error::UnrecognizedFormat(format!("dtype code {other}"))),
        }
    }

    fn bytes_per_sample(self) -> u64 {
        match self {
            DType::Real => 4,
            DType::Complex => 8,
        }
    }
}

/// Acquisition metadata shared by every stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackMeta {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub sample_rate_hz: f64,
    pub exposure_s: f64,
    pub wavelength_m: f64,
    pub pixel_pitch_m: f64,
    pub origin_tag: String,
}

impl StackMeta {
    /// Metadata with the exposure set to the full frame period.
    pub fn new(nx: usize, ny: usize, nt: usize, sample_rate_hz: f64) -> Self {
        StackMeta {
            nx,
            ny,
            nt,
            sample_rate_hz,
            exposure_s: 1.0 / sample_rate_hz,
            wavelength_m: 785e-9,
            pixel_pitch_m: 20e-6,
            origin_tag: "external".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nt == 0 {
            return Err(Error::InvalidMeta(format!(
                "dimensions must be >= 1, got {}x{}x{}",
                self.nx, self.ny, self.nt
            )));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::InvalidMeta(format!(
                "sample_rate_hz must be > 0, got {}",
                self.sample_rate_hz
            )));
        }
        let period = 1.0 / self.sample_rate_hz;
        if !(self.exposure_s > 0.0 && self.exposure_s <= period * (1.0 + 1e-12)) {
            return Err(Error::InvalidMeta(format!(
                "exposure_s must be in (0, {period}], got {}",
                self.exposure_s
            )));
        }
        if !(self.wavelength_m > 0.0 && self.wavelength_m.is_finite()) {
            return Err(Error::InvalidMeta("wavelength_m must be > 0".into()));
        }
        if !(self.pixel_pitch_m > 0.0 && self.pixel_pitch_m.is_finite()) {
            return Err(Error::InvalidMeta("pixel_pitch_m must be > 0".into()));
        }
        Ok(())
    }

    pub fn n_pixels(&self) -> usize {
        self.nx * self.ny
    }

    pub fn duration_s(&self) -> f64 {
        self.nt as f64 / self.sample_rate_hz
    }

    fn shape(&self) -> (usize, usize, usize) {
        (self.nt, self.ny, self.nx)
    }
}

/// Real-valued interferogram sequence, indexed (t, y, x).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    meta: StackMeta,
    samples: Array3<f32>,
}

impl FrameStack {
    pub fn new(meta: StackMeta, samples: Array3<f32>) -> Result<Self> {
        meta.validate()?;
        check_shape(&meta, samples.dim())?;
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(FrameStack { meta, samples })
    }

    pub fn meta(&self) -> &StackMeta {
        &self.meta
    }

    pub fn samples(&self) -> &Array3<f32> {
        &self.samples
    }

    pub fn frame(&self, t: usize) -> ArrayView2<'_, f32> {
        self.samples.index_axis(Axis(0), t)
    }

    pub fn into_parts(self) -> (StackMeta, Array3<f32>) {
        (self.meta, self.samples)
    }
}

/// Complex reconstructed field sequence, indexed (t, y, x).
#[derive(Debug, Clone, PartialEq)]
pub struct HologramStack {
    meta: StackMeta,
    field: Array3<Complex32>,
}

impl HologramStack {
    pub fn new(meta: StackMeta, field: Array3<Complex32>) -> Result<Self> {
        meta.validate()?;
        check_shape(&meta, field.dim())?;
        if let Some(i) = field
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFinite(i));
        }
        Ok(HologramStack { meta, field })
    }

    pub fn zeros(meta: StackMeta) -> Result<Self> {
        let field = Array3::zeros(meta.shape());
        Self::new(meta, field)
    }

    pub fn meta(&self) -> &StackMeta {
        &self.meta
    }

    pub fn field(&self) -> &Array3<Complex32> {
        &self.field
    }

    pub fn frame(&self, t: usize) -> ArrayView2<'_, Complex32> {
        self.field.index_axis(Axis(0), t)
    }

    /// Per-pixel time-domain power summed over frames `[start, start + len)`.
    pub fn window_energy(&self, start: usize, len: usize) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((self.meta.ny, self.meta.nx));
        for t in start..start + len {
            for (o, v) in out.iter_mut().zip(self.field.index_axis(Axis(0), t).iter()) {
                *o += (v.re as f64).powi(2) + (v.im as f64).powi(2);
            }
        }
        out
    }

    pub fn into_parts(self) -> (StackMeta, Array3<Complex32>) {
        (self.meta, self.field)
    }
}

fn check_shape(meta: &StackMeta, dim: (usize, usize, usize)) -> Result<()> {
    if dim != meta.shape() {
        return Err(Error::ShapeMismatch(format!(
            "array shape {:?} does not match meta (nt, ny, nx) = {:?}",
            dim,
            meta.shape()
        )));
    }
    Ok(())
}

/// Either kind of stack, as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Stack {
    Real(FrameStack),
    Complex(HologramStack),
}

impl Stack {
    pub fn meta(&self) -> &StackMeta {
        match self {
            Stack::Real(s) => s.meta(),
            Stack::Complex(s) => s.meta(),
        }
    }

    pub fn dtype(&self) -> DType {
        match self {
            Stack::Real(_) => DType::Real,
            Stack::Complex(_) => DType::Complex,
        }
    }
}

impl From<FrameStack> for Stack {
    fn from(s: FrameStack) -> Self {
        Stack::Real(s)
    }
}

impl From<HologramStack> for Stack {
    fn from(s: HologramStack) -> Self {
        Stack::Complex(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    dtype: u8,
    nx: usize,
    ny: usize,
    nt: usize,
    sample_rate_hz: f64,
    exposure_s: f64,
    wavelength_m: f64,
    pixel_pitch_m: f64,
    origin_tag: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn encode_header(meta: &StackMeta, dtype: DType) -> Result<Vec<u8>> {
    let dim = |n: usize, name: &str| {
        u32::try_from(n).map_err(|_| Error::InvalidMeta(format!("{name} = {n} exceeds u32")))
    };
    let mut h = Vec::with_capacity(HEADER_LEN);
    h.extend_from_slice(MAGIC);
    h.extend_from_slice(&dim(meta.nx, "nx")?.to_le_bytes());
    h.extend_from_slice(&dim(meta.ny, "ny")?.to_le_bytes());
    h.extend_from_slice(&dim(meta.nt, "nt")?.to_le_bytes());
    h.push(dtype.code());
    for v in [
        meta.sample_rate_hz,
        meta.exposure_s,
        meta.wavelength_m,
        meta.pixel_pitch_m,
    ] {
        h.extend_from_slice(&v.to_le_bytes());
    }
    debug_assert_eq!(h.len(), HEADER_LEN);
    Ok(h)
}

/// Writes a stack and its JSON sidecar. Refuses non-finite samples.
pub fn write_stack(stack: &Stack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let meta = stack.meta();
    let header = encode_header(meta, stack.dtype())?;

    let mut payload: Vec<u8>;
    match stack {
        Stack::Real(s) => {
            payload = Vec::with_capacity(s.samples.len() * 4);
            for (i, v) in s.samples.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(i));
                }
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        Stack::Complex(s) => {
            payload = Vec::with_capacity(s.field.len() * 8);
            for (i, v) in s.field.iter().enumerate() {
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NonFinite(i));
                }
                payload.extend_from_slice(&v.re.to_le_bytes());
                payload.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&header).map_err(|e| Error::io(path, e))?;
    w.write_all(&payload).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;

    let sidecar = Sidecar {
        format: "RCLDH1".to_string(),
        dtype: stack.dtype().code(),
        nx: meta.nx,
        ny: meta.ny,
        nt: meta.nt,
        sample_rate_hz: meta.sample_rate_hz,
        exposure_s: meta.exposure_s,
        wavelength_m: meta.wavelength_m,
        pixel_pitch_m: meta.pixel_pitch_m,
        origin_tag: meta.origin_tag.clone(),
    };
    let sc_path = sidecar_path(path);
    let text = serde_json::to_string_pretty(&sidecar)?;
    std::fs::write(&sc_path, text).map_err(|e| Error::io(&sc_path, e))?;
    Ok(())
}

fn read_header(bytes: &[u8]) -> Result<(StackMeta, DType)> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        let shown = String::from_utf8_lossy(&bytes[..bytes.len().min(6)]).into_owned();
        return Err(Error::UnrecognizedFormat(format!("bad magic {shown:?}")));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::SizeMismatch {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let dtype = DType::from_code(bytes[18])?;
    let meta = StackMeta {
        nx: u32_at(6),
        ny: u32_at(10),
        nt: u32_at(14),
        sample_rate_hz: f64_at(19),
        exposure_s: f64_at(27),
        wavelength_m: f64_at(35),
        pixel_pitch_m: f64_at(43),
        origin_tag: "external".to_string(),
    };
    Ok((meta, dtype))
}

/// Reads a stack written by [`write_stack`]. The origin tag comes from the
/// sidecar when one is present.
pub fn read_stack(path: impl AsRef<Path>) -> Result<Stack> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;

    let (mut meta, dtype) = read_header(&bytes)?;
    meta.validate()?;
    let n = meta.nt as u64 * meta.ny as u64 * meta.nx as u64;
    let expected = n * dtype.bytes_per_sample();
    let actual = (bytes.len() - HEADER_LEN) as u64;
    if expected != actual {
        return Err(Error::SizeMismatch { expected, actual });
    }

    let sc_path = sidecar_path(path);
    if let Ok(text) = std::fs::read_to_string(&sc_path) {
        let sc: Sidecar = serde_json::from_str(&text)?;
        meta.origin_tag = sc.origin_tag;
    }

    let payload = &bytes[HEADER_LEN..];
    let f32s = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let shape = meta.shape();
    match dtype {
        DType::Real => {
            let data: Vec<f32> = f32s.collect();
            let arr = Array3::from_shape_vec(shape, data)
                .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
            Ok(Stack::Real(FrameStack::new(meta, arr)?))
        }
        DType::Complex => {
            let flat: Vec<f32> = f32s.collect();
            let data: Vec<Complex32> = flat
                .chunks_exact(2)
                .map(|c| Complex32::new(c[0], c[1]))
                .collect();
            let arr = Array3::from_shape_vec(shape, data)
                .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
            Ok(Stack::Complex(HologramStack::new(meta, arr)?))
        }
    }
}
