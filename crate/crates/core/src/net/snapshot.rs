//! Parameter snapshot files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "FM2SNET\0"      8-byte magic
//! u32              format version (1)
//! f32              leaky slope
//! u32              tensor count (6)
//! per tensor:      u32 rank, rank x u32 dims, prod(dims) x f32 values
//! ```
//!
//! Tensors appear as conv1 weight `[c1, 1, 3, 3]`, conv1 bias `[c1]`, conv2 weight
//! `[c2, c1, 3, 3]`, conv2 bias `[c2]`, conv3 weight `[1, c2, 1, 1]`, conv3 bias `[1]`.

use std::io::{Read, Write};

use super::conv::Conv2d;
use super::model::NetParams;
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"FM2SNET\0";
pub const SNAPSHOT_VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "<snapshot>".into(),
        source: e,
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Decode {
        path: "<snapshot>".into(),
        format: "snapshot",
        message: msg.into(),
    }
}

fn put_tensor<W: Write>(w: &mut W, dims: &[usize], data: &[f32]) -> std::io::Result<()> {
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_snapshot<W: Write>(params: &NetParams<f32>, mut w: W) -> Result<()> {
    let mut body = Vec::new();
    body.extend_from_slice(SNAPSHOT_MAGIC);
    body.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    body.extend_from_slice(&params.leaky_slope.to_le_bytes());
    body.extend_from_slice(&6u32.to_le_bytes());
    for conv in [&params.conv1, &params.conv2, &params.conv3] {
        let wd = [
            conv.out_channels,
            conv.in_channels,
            conv.kernel,
            conv.kernel,
        ];
        put_tensor(&mut body, &wd, &conv.weight).map_err(io_err)?;
        put_tensor(&mut body, &[conv.out_channels], &conv.bias).map_err(io_err)?;
    }
    w.write_all(&body).map_err(io_err)
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() < n {
            return Err(bad("truncated file"));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<(Vec<usize>, Vec<f32>)> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(bad(format!("implausible tensor rank {rank}")));
        }
        let dims: Vec<usize> = (0..rank)
            .map(|_| self.u32().map(|d| d as usize))
            .collect::<Result<_>>()?;
        let len: usize = dims.iter().product();
        if len > self.bytes.len() / 4 {
            return Err(bad("truncated tensor data"));
        }
        let data = (0..len).map(|_| self.f32()).collect::<Result<_>>()?;
        Ok((dims, data))
    }

    fn conv(&mut self) -> Result<Conv2d<f32>> {
        let (wd, weight) = self.tensor()?;
        let (bd, bias) = self.tensor()?;
        if wd.len() != 4 || wd[2] != wd[3] || wd[2] % 2 == 0 || bd != [wd[0]] {
            return Err(bad(format!("unexpected layer shapes {wd:?} / {bd:?}")));
        }
        Ok(Conv2d {
            in_channels: wd[1],
            out_channels: wd[0],
            kernel: wd[2],
            weight,
            bias,
        })
    }
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<NetParams<f32>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err)?;
    let mut c = Cursor { bytes: &bytes };
    if c.take(8)? != SNAPSHOT_MAGIC {
        return Err(bad("missing snapshot magic"));
    }
    let version = c.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(bad(format!("unsupported snapshot version {version}")));
    }
    let leaky_slope = c.f32()?;
    let count = c.u32()?;
    if count != 6 {
        return Err(bad(format!("expected 6 tensors, found {count}")));
    }
    let params = NetParams {
        conv1: c.conv()?,
        conv2: c.conv()?,
        conv3: c.conv()?,
        leaky_slope,
    };
    let (c1, c2) = params.widths();
    if params.conv1.in_channels != 1
        || params.conv2.in_channels != c1
        || params.conv3.in_channels != c2
        || params.conv3.out_channels != 1
    {
        return Err(bad("layer widths do not chain"));
    }
    if !c.bytes.is_empty() {
        return Err(bad("trailing bytes after last tensor"));
    }
    Ok(params)
}
