//! IDX container format (big-endian header, unsigned byte payload).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    /// `n × rows × cols`, scaled to [0, 1].
    Images(Tensor),
    Labels(Vec<u8>),
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Length(format!("header truncated at byte {at}")))
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    let magic = read_u32(bytes, 0)?;
    let rank = match magic {
        IMAGES_MAGIC => 3,
        LABELS_MAGIC => 1,
        other => return Err(Error::Format(format!("unsupported IDX magic {other:#010x}"))),
    };
    let dims: Vec<usize> = (0..rank).map(|i| read_u32(bytes, 4 + 4 * i).map(|d| d as usize)).collect::<Result<_>>()?;
    let header = 4 + 4 * rank;
    let expected: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != expected {
        return Err(Error::Length(format!("payload has {} bytes, header promises {expected}", payload.len())));
    }
    if rank == 1 {
        return Ok(IdxData::Labels(payload.to_vec()));
    }
    let data = payload.iter().map(|&b| b as f32 / 255.0).collect();
    Ok(IdxData::Images(Tensor::new(&dims, data)?))
}

/// Serializes an `n × rows × cols` tensor of multiples of 1/255.
pub fn write_idx_images(images: &Tensor) -> Result<Vec<u8>> {
    if images.rank() != 3 {
        return Err(Error::Dimension(format!("IDX images need rank 3, got {:?}", images.shape())));
    }
    let mut out = Vec::with_capacity(16 + images.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for &d in images.shape() {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    for &v in images.data() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Range(format!("pixel {v} outside [0, 1]")));
        }
        out.push(libm::roundf(v * 255.0) as u8);
    }
    Ok(out)
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
