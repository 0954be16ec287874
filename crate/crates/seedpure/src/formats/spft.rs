//! SPFT feature-matrix container.
//!
//! ```text
//! "SPFT" | version: u32 = 1 | n_samples: u32 | n_features: u32
//! labels: u8 × n_samples | values: f32 × (n_samples · n_features), row-major
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use seedpure_core::FeatureMatrix;

use super::{push_f32s, Reader};
use crate::error::{Error, FormatError, Result};

pub const MAGIC: &str = "SPFT";
pub const VERSION: u32 = 1;

pub fn encode(m: &FeatureMatrix) -> Result<Vec<u8>, FormatError> {
    let to_u32 = |v: usize, what: &str| u32::try_from(v).map_err(|_| FormatError::Malformed(format!("{what} exceeds u32")));
    let mut out = Vec::with_capacity(16 + m.n_samples() + m.values().len() * 4);
    out.extend_from_slice(MAGIC.as_bytes());
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(m.n_samples(), "n_samples")?.to_le_bytes());
    out.extend_from_slice(&to_u32(m.n_features(), "n_features")?.to_le_bytes());
    out.extend_from_slice(m.labels());
    push_f32s(&mut out, m.values());
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<FeatureMatrix, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    let labels = r.take(n)?.to_vec();
    let values = r.f32s(n.checked_mul(d).ok_or(FormatError::Truncated)?)?;
    if r.remaining() != 0 {
        return Err(FormatError::TrailingBytes(r.remaining()));
    }
    FeatureMatrix::new(n, d, values, labels).map_err(|e| FormatError::Malformed(e.to_string()))
}

pub fn save_features(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(m).map_err(|e| Error::format(path, e))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| Error::format(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_three_is_42_bytes() {
        let m = FeatureMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0, 1]).unwrap();
        let bytes = encode(&m).unwrap();
        assert_eq!(bytes.len(), 42);
        assert_eq!(&bytes[16..18], &[0, 1]);
        assert_eq!(decode(&bytes).unwrap(), m);
    }

    #[test]
    fn decode_errors() {
        assert_eq!(decode(b""), Err(FormatError::BadMagic { expected: "SPFT" }));
        let m = FeatureMatrix::new(1, 2, vec![1.0, 2.0], vec![1]).unwrap();
        let good = encode(&m).unwrap();
        assert_eq!(decode(&good[..good.len() - 1]), Err(FormatError::Truncated));
        let mut bad = good.clone();
        bad[4] = 9;
        assert_eq!(decode(&bad), Err(FormatError::UnsupportedVersion(9)));
        let mut bad = good;
        bad[16] = 3;
        assert!(matches!(decode(&bad), Err(FormatError::Malformed(_))));
    }
}
