//! SPWT weight container.
//!
//! ```text
//! "SPWT" | version: u32 = 1 | tensor_count: u32
//! per tensor, in name order:
//!   name_len: u16 | name: UTF-8 | rank: u8 | dims: u32 × rank | data: f32 × Π dims
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use seedpure_core::{Tensor, WeightStore};

use super::{push_f32s, Reader};
use crate::error::{Error, FormatError, Result};

pub const MAGIC: &str = "SPWT";
pub const VERSION: u32 = 1;

pub fn encode(store: &WeightStore) -> Result<Vec<u8>, FormatError> {
    let mut out = Vec::with_capacity(12 + store.num_values() * 4);
    out.extend_from_slice(MAGIC.as_bytes());
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(store.len()).map_err(|_| FormatError::Malformed("too many tensors".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    for (name, tensor) in store.iter() {
        let len = u16::try_from(name.len())
            .map_err(|_| FormatError::Malformed(format!("tensor name longer than 65535 bytes: {name}")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(tensor.rank() as u8);
        for &d in tensor.shape() {
            let d = u32::try_from(d).map_err(|_| FormatError::Malformed(format!("dimension of {name} exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        push_f32s(&mut out, tensor.data());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<WeightStore, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let count = r.u32()?;
    let mut store = WeightStore::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name =
            std::str::from_utf8(r.take(len)?).map_err(|_| FormatError::Malformed("tensor name is not UTF-8".into()))?.to_owned();
        let rank = r.u8()? as usize;
        if !(1..=4).contains(&rank) {
            return Err(FormatError::Malformed(format!("tensor {name} has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or(FormatError::Truncated)?;
        let data = r.f32s(n)?;
        let tensor = Tensor::new(&shape, data).map_err(|e| FormatError::Malformed(format!("tensor {name}: {e}")))?;
        if store.contains(&name) {
            return Err(FormatError::DuplicateName(name));
        }
        store.insert_or_replace(name, tensor);
    }
    if r.remaining() != 0 {
        return Err(FormatError::TrailingBytes(r.remaining()));
    }
    Ok(store)
}

pub fn save_weights(store: &WeightStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(store).map_err(|e| Error::format(path, e))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightStore> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| Error::format(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_store_is_header_only() {
        let bytes = encode(&WeightStore::new()).unwrap();
        assert_eq!(bytes, b"SPWT\x01\0\0\0\0\0\0\0");
        assert_eq!(decode(&bytes).unwrap(), WeightStore::new());
    }

    #[test]
    fn single_tensor_layout() {
        let mut s = WeightStore::new();
        s.insert("t".into(), Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, -0.5]).unwrap()).unwrap();
        let bytes = encode(&s).unwrap();
        assert_eq!(bytes.len(), 40);
        assert_eq!(&bytes[12..15], &[1, 0, b't']);
        assert_eq!(bytes[15], 2);
        assert_eq!(&bytes[16..24], &[2, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[24..28], &1.0f32.to_le_bytes());
        assert_eq!(decode(&bytes).unwrap(), s);
    }

    #[test]
    fn decode_errors() {
        let mut s = WeightStore::new();
        s.insert("t".into(), Tensor::new(&[2], vec![1.0, 2.0]).unwrap()).unwrap();
        let good = encode(&s).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(decode(&bad), Err(FormatError::BadMagic { expected: "SPWT" }));
        assert_eq!(decode(b""), Err(FormatError::BadMagic { expected: "SPWT" }));

        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(decode(&bad), Err(FormatError::UnsupportedVersion(2)));

        assert_eq!(decode(&good[..good.len() - 3]), Err(FormatError::Truncated));

        let mut twice = good.clone();
        twice[8] = 2;
        twice.extend_from_slice(&good[12..]);
        assert_eq!(decode(&twice), Err(FormatError::DuplicateName("t".into())));

        let mut extra = good;
        extra.push(0);
        assert_eq!(decode(&extra), Err(FormatError::TrailingBytes(1)));
    }
}
