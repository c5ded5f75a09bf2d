//! Self-describing little-endian array files and PNG export.
//!
//! Layout: 8-byte magic, u8 version, u8 dtype (1 = f64, 2 = complex f64 as
//! re/im pairs), u8 rank, rank × u64 dimensions, then the payload.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use image::{ImageBuffer, Luma};
use num_complex::Complex64;

use crate::domain::ComplexImage;
use crate::error::{Error, Result};

pub const ARRAY_MAGIC: &[u8; 8] = b"DPARRAY\0";
pub const ARRAY_VERSION: u8 = 1;
const MAX_RANK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl ArrayData {
    fn len(&self) -> usize {
        match self {
            ArrayData::Real(v) => v.len(),
            ArrayData::Complex(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    shape: Vec<usize>,
    data: ArrayData,
}

impl Array {
    pub fn new(shape: Vec<usize>, data: ArrayData) -> Result<Self> {
        if shape.is_empty() || shape.len() > MAX_RANK {
            return Err(Error::invalid(format!("array rank must lie in 1..={MAX_RANK}")));
        }
        let count = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        if count != Some(data.len()) {
            return Err(Error::shape(format!("{shape:?}"), format!("{} values", data.len())));
        }
        Ok(Array { shape, data })
    }

    pub fn from_image(img: &ComplexImage) -> Self {
        Array { shape: vec![img.height(), img.width()], data: ArrayData::Complex(img.as_slice().to_vec()) }
    }

    /// Stack of equally shaped images, shape [n, h, w].
    pub fn from_images(images: &[ComplexImage]) -> Result<Self> {
        let first = images.first().ok_or_else(|| Error::invalid("no images to stack"))?;
        let mut data = Vec::with_capacity(images.len() * first.len());
        for img in images {
            first.check_shape(img)?;
            data.extend_from_slice(img.as_slice());
        }
        Ok(Array { shape: vec![images.len(), first.height(), first.width()], data: ArrayData::Complex(data) })
    }

    pub fn real(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Self::new(shape, ArrayData::Real(values))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &ArrayData {
        &self.data
    }

    /// The array as a complex image; real 2-D arrays are promoted.
    pub fn to_image(&self) -> Result<ComplexImage> {
        if self.shape.len() != 2 {
            return Err(Error::Format(format!("expected a 2-D image, found shape {:?}", self.shape)));
        }
        let data = match &self.data {
            ArrayData::Complex(v) => v.clone(),
            ArrayData::Real(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        };
        ComplexImage::from_vec(self.shape[0], self.shape[1], data)
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        let dtype = match self.data {
            ArrayData::Real(_) => 1u8,
            ArrayData::Complex(_) => 2u8,
        };
        let mut buf = Vec::with_capacity(16 + 8 * self.shape.len() + 16 * self.data.len());
        buf.extend_from_slice(ARRAY_MAGIC);
        buf.extend_from_slice(&[ARRAY_VERSION, dtype, self.shape.len() as u8]);
        for &d in &self.shape {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match &self.data {
            ArrayData::Real(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
            ArrayData::Complex(v) => v.iter().for_each(|z| {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }),
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(8)? != ARRAY_MAGIC {
            return Err(Error::Format("not an array file (bad magic)".into()));
        }
        let head = cur.take(3)?;
        if head[0] != ARRAY_VERSION {
            return Err(Error::Format(format!("unsupported array version {}", head[0])));
        }
        let rank = head[2] as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Format(format!("invalid rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
            shape.push(usize::try_from(d).map_err(|_| Error::Format("dimension too large".into()))?);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
        let width = match head[1] {
            1 => 8,
            2 => 16,
            other => return Err(Error::Format(format!("unknown dtype {other}"))),
        };
        let payload = count.checked_mul(width).ok_or_else(|| Error::Format("dimensions overflow".into()))?;
        let raw = cur.take(payload)?;
        if cur.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after array payload".into()));
        }
        let f = |k: usize| f64::from_le_bytes(raw[8 * k..8 * k + 8].try_into().unwrap());
        let data = if head[1] == 1 {
            ArrayData::Real((0..count).map(f).collect())
        } else {
            ArrayData::Complex((0..count).map(|k| Complex64::new(f(2 * k), f(2 * k + 1))).collect())
        };
        Ok(Array { shape, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(fs::File::open(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("array file is truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

/// 16-bit grayscale PNG of `values` scaled so the largest maps to 65535.
pub fn write_png16(path: &Path, values: &[f64], height: usize, width: usize) -> Result<()> {
    if values.len() != height * width {
        return Err(Error::shape(height * width, values.len()));
    }
    let peak = values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
    let pixels: Vec<u16> = values.iter().map(|v| (v.max(0.0) * scale).round().min(65535.0) as u16).collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, pixels).expect("buffer length matches dimensions");
    img.save(path).map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// 8-bit grayscale PNG of raw byte values.
pub fn write_png8(path: &Path, values: &[u8], height: usize, width: usize) -> Result<()> {
    if values.len() != height * width {
        return Err(Error::shape(height * width, values.len()));
    }
    let img: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(width as u32, height as u32, values.to_vec()).expect("buffer length matches dimensions");
    img.save(path).map_err(|e| Error::Io(std::io::Error::other(e)))
}
