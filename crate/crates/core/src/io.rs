//! DBCS1 binary matrix files.
//!
//! Layout: the five ASCII bytes `DBCS1`, then `rows` and `cols` as
//! little-endian `u32`, then `rows * cols` little-endian IEEE-754 doubles in
//! column-major order. Nothing follows the payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const MAGIC: &[u8; 5] = b"DBCS1";
const HEADER_LEN: usize = MAGIC.len() + 8;

/// Encodes a matrix into DBCS1 bytes.
pub fn encode(m: &DenseMatrix) -> Result<Vec<u8>> {
    if m.rows() == 0 || m.cols() == 0 || m.rows() > u32::MAX as usize || m.cols() > u32::MAX as usize {
        return Err(Error::InvalidDimensions {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    m.ensure_finite()?;
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * m.as_slice().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

/// Decodes DBCS1 bytes. `path` is only used for error messages.
pub fn decode(bytes: &[u8], path: &Path) -> Result<DenseMatrix> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            path: path.into(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let rows = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidDimensions { rows, cols });
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or(Error::InvalidDimensions { rows, cols })?;
    if payload.len() < expected {
        return Err(Error::Truncated {
            path: path.into(),
            expected: HEADER_LEN + expected,
            found: bytes.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::TrailingData {
            path: path.into(),
            extra: payload.len() - expected,
        });
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let m = DenseMatrix::from_col_major(rows, cols, data)?;
    m.ensure_finite()?;
    Ok(m)
}

pub fn mat_write(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(m)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn mat_read(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, Rng};

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn one_by_one_zero_layout() {
        // magic(5) + rows(4) + cols(4) + one f64(8)
        let bytes = encode(&DenseMatrix::zeros(1, 1)).unwrap();
        assert_eq!(bytes.len(), 21);
        assert_eq!(&bytes[..5], b"DBCS1");
        assert_eq!(&bytes[5..13], &[1, 0, 0, 0, 1, 0, 0, 0]);
        assert!(bytes[13..].iter().all(|&b| b == 0));
    }

    #[test]
    fn identity_payload_is_column_major() {
        let bytes = encode(&DenseMatrix::identity(2)).unwrap();
        let vals: Vec<f64> = bytes[13..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(vals, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn non_square_header_order() {
        let bytes = encode(&DenseMatrix::zeros(2, 3)).unwrap();
        assert_eq!(&bytes[5..13], &[2, 0, 0, 0, 3, 0, 0, 0]);
    }

    #[test]
    fn seeded_round_trip_is_bitwise() {
        let m = gaussian_matrix(7, 3, &mut Rng::new(5));
        let back = decode(&encode(&m).unwrap(), p()).unwrap();
        let bits = |x: &DenseMatrix| x.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(back.shape(), (7, 3));
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn refuses_non_finite_on_write() {
        let mut m = DenseMatrix::zeros(2, 2);
        m.set(1, 0, f64::INFINITY);
        assert!(matches!(encode(&m), Err(Error::NonFinite { row: 1, col: 0 })));
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(&DenseMatrix::identity(2)).unwrap();
        bytes[..5].copy_from_slice(b"XXXXX");
        assert!(matches!(decode(&bytes, p()), Err(Error::BadMagic { .. })));
        assert!(matches!(decode(b"DB", p()), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn payload_one_value_short() {
        let bytes = encode(&DenseMatrix::identity(2)).unwrap();
        let short = &bytes[..bytes.len() - 8];
        assert!(matches!(decode(short, p()), Err(Error::Truncated { .. })));
        assert!(matches!(decode(&bytes[..9], p()), Err(Error::Truncated { .. })));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode(&DenseMatrix::identity(2)).unwrap();
        bytes.push(0);
        assert!(matches!(decode(&bytes, p()), Err(Error::TrailingData { extra: 1, .. })));
    }

    #[test]
    fn non_finite_entry_in_file() {
        let mut bytes = encode(&DenseMatrix::identity(2)).unwrap();
        bytes[13 + 16..13 + 24].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode(&bytes, p()), Err(Error::NonFinite { row: 0, col: 1 })));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            encode(&DenseMatrix::zeros(0, 3)),
            Err(Error::InvalidDimensions { .. })
        ));
        let mut bytes = encode(&DenseMatrix::identity(1)).unwrap();
        bytes[5..9].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode(&bytes, p()), Err(Error::InvalidDimensions { .. })));
    }

    #[test]
    fn file_round_trip_and_io_error_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mat");
        let m = gaussian_matrix(4, 5, &mut Rng::new(1));
        mat_write(&m, &path).unwrap();
        assert_eq!(mat_read(&path).unwrap(), m);
        let missing = dir.path().join("nope.mat");
        let err = mat_read(&missing).unwrap_err();
        assert!(err.to_string().contains("nope.mat"));
    }
}
