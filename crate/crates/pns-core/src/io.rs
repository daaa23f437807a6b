//! On-disk formats: PNST tensor files and binary PGM masks.
//!
//! PNST layout: magic `PNST`, `u8` version (1), `u8` dtype (0 = f32,
//! 1 = f64), `u8` rank, `u8` padding (0), then `rank` little-endian `u64`
//! extents, then the row-major little-endian payload. No alignment padding
//! anywhere, so write-then-read is bitwise identity.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{BoolMat, DType, Element, Tensor, MAX_RANK};

const MAGIC: &[u8; 4] = b"PNST";
const VERSION: u8 = 1;

/// A tensor read back from disk, in whichever precision the file holds.
#[derive(Debug, Clone)]
pub enum AnyTensor {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

impl AnyTensor {
    pub fn dtype(&self) -> DType {
        match self {
            AnyTensor::F32(_) => DType::F32,
            AnyTensor::F64(_) => DType::F64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
        }
    }
}

pub fn write_tensor<T: Element>(path: impl AsRef<Path>, t: &Tensor<T>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(8 + t.rank() * 8 + t.len() * T::DTYPE.size_bytes());
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.push(T::DTYPE.code());
    buf.push(t.rank() as u8);
    buf.push(0);
    for &e in t.shape() {
        buf.extend_from_slice(&(e as u64).to_le_bytes());
    }
    for &v in t.data() {
        v.write_le(&mut buf);
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<AnyTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let need = |end: usize, what: &str| -> Result<()> {
        if bytes.len() < end {
            Err(Error::format(
                path,
                bytes.len() as u64,
                format!("truncated {what} (need {end} bytes, file has {})", bytes.len()),
            ))
        } else {
            Ok(())
        }
    };

    need(8, "header")?;
    if &bytes[0..4] != MAGIC {
        return Err(Error::format(path, 0, "bad magic (want \"PNST\")"));
    }
    if bytes[4] != VERSION {
        return Err(Error::format(path, 4, format!("unsupported version {}", bytes[4])));
    }
    let dtype = DType::from_code(bytes[5])
        .ok_or_else(|| Error::format(path, 5, format!("unknown dtype code {}", bytes[5])))?;
    let rank = bytes[6] as usize;
    if rank == 0 || rank > MAX_RANK {
        return Err(Error::format(path, 6, format!("rank {rank} outside 1..={MAX_RANK}")));
    }
    if bytes[7] != 0 {
        return Err(Error::format(path, 7, format!("nonzero padding byte {}", bytes[7])));
    }

    need(8 + rank * 8, "header")?;
    let mut shape = Vec::with_capacity(rank);
    for i in 0..rank {
        let off = 8 + i * 8;
        let e = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        if e == 0 {
            return Err(Error::format(path, off as u64, "zero extent"));
        }
        shape.push(e as usize);
    }
    let count: usize = shape.iter().product();
    let payload_off = 8 + rank * 8;
    need(payload_off + count * dtype.size_bytes(), "payload")?;

    fn payload<T: Element>(bytes: &[u8], off: usize, count: usize) -> Vec<T> {
        let size = T::DTYPE.size_bytes();
        (0..count)
            .map(|i| T::read_le(&bytes[off + i * size..off + (i + 1) * size]))
            .collect()
    }

    Ok(match dtype {
        DType::F32 => AnyTensor::F32(
            Tensor::new(shape, payload::<f32>(&bytes, payload_off, count))
                .expect("validated header"),
        ),
        DType::F64 => AnyTensor::F64(
            Tensor::new(shape, payload::<f64>(&bytes, payload_off, count))
                .expect("validated header"),
        ),
    })
}

/// Reads a tensor and insists on single precision.
pub fn read_tensor_f32(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    match read_tensor(path)? {
        AnyTensor::F32(t) => Ok(t),
        AnyTensor::F64(_) => Err(Error::format(path, 5, "expected f32 payload, file holds f64")),
    }
}

/// Writes a binary mask as binary PGM (`P5`, maxval 255): 255 where true,
/// 0 where false. `mask` rows map to image rows.
pub fn write_mask_pgm(path: impl AsRef<Path>, mask: &BoolMat) -> Result<()> {
    let path = path.as_ref();
    let mut buf = format!("P5\n{} {}\n255\n", mask.cols(), mask.rows()).into_bytes();
    buf.extend(mask.data().iter().map(|&v| if v { 255u8 } else { 0u8 }));
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a binary PGM mask: a pixel is foreground when its value is >= 128.
/// Only maxval 255 files are accepted.
pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<BoolMat> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;

    let skip_space = |bytes: &[u8], pos: &mut usize| {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                break;
            }
        }
    };
    let token = |bytes: &[u8], pos: &mut usize, what: &str| -> Result<u64> {
        skip_space(bytes, pos);
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if *pos == start {
            return Err(Error::format(path, start as u64, format!("truncated header ({what})")));
        }
        std::str::from_utf8(&bytes[start..*pos])
            .unwrap()
            .parse::<u64>()
            .map_err(|_| Error::format(path, start as u64, format!("unparsable {what}")))
    };

    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(Error::format(path, 0, "truncated header (bad magic, want \"P5\")"));
    }
    pos = 2;
    let width = token(&bytes, &mut pos, "width")? as usize;
    let height = token(&bytes, &mut pos, "height")? as usize;
    let maxval_off = pos;
    let maxval = token(&bytes, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(Error::format(path, maxval_off as u64, format!("maxval {maxval} != 255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format(path, pos as u64, "missing raster separator"));
    }
    pos += 1;
    let count = width.checked_mul(height).filter(|&n| n > 0).ok_or_else(|| {
        Error::format(path, 2, format!("bad dimensions {width}x{height}"))
    })?;
    if bytes.len() < pos + count {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            format!("truncated payload (need {count} raster bytes)"),
        ));
    }

    let mut mask = BoolMat::new_filled(height, width, false);
    for r in 0..height {
        for c in 0..width {
            mask.set(r, c, bytes[pos + r * width + c] >= 128);
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tensor_round_trip_f32_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pnst");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = Tensor::<f32>::random_uniform(&[5, 16, 12, 3], -3.0, 3.0, &mut rng);
        write_tensor(&path, &t).unwrap();
        match read_tensor(&path).unwrap() {
            AnyTensor::F32(back) => assert_eq!(back, t),
            _ => panic!("dtype changed"),
        }
    }

    #[test]
    fn tensor_round_trip_f64() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pnst");
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = Tensor::<f64>::random_uniform(&[2, 3], -1.0, 1.0, &mut rng);
        write_tensor(&path, &t).unwrap();
        match read_tensor(&path).unwrap() {
            AnyTensor::F64(back) => assert_eq!(back, t),
            _ => panic!("dtype changed"),
        }
    }

    #[test]
    fn tensor_header_layout_is_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pnst");
        let t = Tensor::<f32>::new(vec![2, 3], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        write_tensor(&path, &t).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"PNST");
        assert_eq!(bytes[4], 1); // version
        assert_eq!(bytes[5], 0); // f32
        assert_eq!(bytes[6], 2); // rank
        assert_eq!(bytes[7], 0); // padding
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 24 + 6 * 4);
        assert_eq!(f32::from_le_bytes(bytes[24..28].try_into().unwrap()), 0.0);
        assert_eq!(f32::from_le_bytes(bytes[28..32].try_into().unwrap()), 1.0);
    }

    #[test]
    fn tensor_bad_magic_names_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pnst");
        std::fs::write(&path, b"NOPE\x01\x00\x01\x00aaaaaaaa").unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
        assert!(err.to_string().contains("at byte 0"), "{err}");
    }

    #[test]
    fn tensor_empty_file_is_truncated_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.pnst");
        std::fs::write(&path, b"").unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("truncated header"), "{err}");
    }

    #[test]
    fn tensor_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pnst");
        let t = Tensor::<f32>::zeros(&[4, 4]);
        write_tensor(&path, &t).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("truncated payload"), "{err}");
    }

    #[test]
    fn pgm_round_trip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let mut mask = BoolMat::new_filled(5, 7, false);
        mask.set(0, 0, true);
        mask.set(4, 6, true);
        mask.set(2, 3, true);
        write_mask_pgm(&path, &mask).unwrap();
        let back = read_mask_pgm(&path).unwrap();
        assert_eq!(back, mask);
    }

    #[test]
    fn pgm_rejects_wide_maxval() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        std::fs::write(&path, b"P5\n2 2\n65535\n\x00\x00\x00\x00").unwrap();
        let err = read_mask_pgm(&path).unwrap_err();
        assert!(err.to_string().contains("65535"), "{err}");
    }

    #[test]
    fn pgm_empty_file_is_truncated_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        std::fs::write(&path, b"").unwrap();
        let err = read_mask_pgm(&path).unwrap_err();
        assert!(err.to_string().contains("truncated header"), "{err}");
    }

    #[test]
    fn pgm_threshold_at_128() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        std::fs::write(&path, b"P5\n2 1\n255\n\x7f\x80").unwrap();
        let mask = read_mask_pgm(&path).unwrap();
        assert!(!mask.get(0, 0));
        assert!(mask.get(0, 1));
    }
}
