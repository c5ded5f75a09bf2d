//! Binary parameter checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "DPSCORE\0" | version u32
//! arch u8 (0 mlp, 1 conv) | width u32 | activation u8 (0 silu, 1 identity)
//! height u32 | width u32
//! conditioning u8 (0 discrete, 1 fourier) | n_scales u32 | std f64 | m u32 | m × f64 frequencies
//! schedule hash u64
//! block count u32 | per block: name length u16, name bytes, rows u32, cols u32
//! parameter count u64 | parameters f64 in block order
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::conditioning::{ConditioningMode, NoiseConditioning};
use super::net::{Activation, Architecture, ScoreNet};
use crate::domain::NoiseSchedule;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DPSCORE\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(net: &ScoreNet, mut out: W) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let (tag, width) = match net.architecture() {
        Architecture::Mlp { hidden } => (0u8, hidden),
        Architecture::Conv { channels } => (1u8, channels),
    };
    buf.push(tag);
    buf.extend_from_slice(&(width as u32).to_le_bytes());
    buf.push(match net.activation() {
        Activation::Silu => 0,
        Activation::Identity => 1,
    });
    let (h, w) = net.shape();
    buf.extend_from_slice(&(h as u32).to_le_bytes());
    buf.extend_from_slice(&(w as u32).to_le_bytes());
    let cond = net.conditioning();
    let std = match cond.mode() {
        ConditioningMode::Discrete => {
            buf.push(0);
            0.0
        }
        ConditioningMode::Fourier { std, .. } => {
            buf.push(1);
            std
        }
    };
    buf.extend_from_slice(&(cond.n_scales() as u32).to_le_bytes());
    buf.extend_from_slice(&std.to_le_bytes());
    buf.extend_from_slice(&(cond.frequencies().len() as u32).to_le_bytes());
    for f in cond.frequencies() {
        buf.extend_from_slice(&f.to_le_bytes());
    }
    buf.extend_from_slice(&net.schedule().hash().to_le_bytes());
    buf.extend_from_slice(&(net.blocks().len() as u32).to_le_bytes());
    for b in net.blocks() {
        buf.extend_from_slice(&(b.name.len() as u16).to_le_bytes());
        buf.extend_from_slice(b.name.as_bytes());
        buf.extend_from_slice(&(b.rows as u32).to_le_bytes());
        buf.extend_from_slice(&(b.cols as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(net.param_count() as u64).to_le_bytes());
    for p in net.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads a checkpoint; `schedule` must be the one the network was trained on.
pub fn read_checkpoint<R: Read>(mut input: R, schedule: &NoiseSchedule) -> Result<ScoreNet> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a score network checkpoint".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let arch = match (c.u8()?, c.u32()?) {
        (0, hidden) => Architecture::Mlp { hidden },
        (1, channels) => Architecture::Conv { channels },
        (t, _) => return Err(Error::Format(format!("unknown architecture tag {t}"))),
    };
    let activation = match c.u8()? {
        0 => Activation::Silu,
        1 => Activation::Identity,
        t => return Err(Error::Format(format!("unknown activation tag {t}"))),
    };
    let (h, w) = (c.u32()?, c.u32()?);
    let mode = c.u8()?;
    let n_scales = c.u32()?;
    let std = c.f64()?;
    let m = c.u32()?;
    let frequencies = (0..m).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let conditioning = match mode {
        0 => NoiseConditioning::discrete(n_scales)?,
        1 => NoiseConditioning::fourier_with_frequencies(n_scales, std, frequencies)?,
        t => return Err(Error::Format(format!("unknown conditioning tag {t}"))),
    };
    let hash = c.u64()?;
    if hash != schedule.hash() {
        return Err(Error::Format("checkpoint was trained on a different noise schedule".into()));
    }
    let mut net = ScoreNet::with_zero_params(h, w, arch, activation, conditioning, schedule)?;
    let count = c.u32()?;
    if count != net.blocks().len() {
        return Err(Error::Format(format!("expected {} parameter blocks, found {count}", net.blocks().len())));
    }
    for b in net.blocks() {
        let len = c.u16()? as usize;
        let name = std::str::from_utf8(c.take(len)?).map_err(|e| Error::Format(e.to_string()))?;
        let (rows, cols) = (c.u32()?, c.u32()?);
        if name != b.name || rows != b.rows || cols != b.cols {
            return Err(Error::Format(format!("block {name} ({rows}x{cols}) does not match {} ({}x{})", b.name, b.rows, b.cols)));
        }
    }
    let n = c.u64()? as usize;
    if n != net.param_count() {
        return Err(Error::Format(format!("expected {} parameters, found {n}", net.param_count())));
    }
    let params = (0..n).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    if c.pos != data.len() {
        return Err(Error::Format("trailing bytes after parameters".into()));
    }
    net.set_params(params).map_err(|e| Error::Format(e.to_string()))?;
    Ok(net)
}

pub fn save_checkpoint(net: &ScoreNet, path: &Path) -> Result<()> {
    write_checkpoint(net, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_checkpoint(path: &Path, schedule: &NoiseSchedule) -> Result<ScoreNet> {
    read_checkpoint(std::fs::File::open(path)?, schedule)
}
