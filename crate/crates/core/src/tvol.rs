//! `TVOL` binary volume files.
//!
//! Layout (all little-endian): magic `TVOL1\0`, `u32` nx, ny, nz, `f64`
//! dx_vox, dz_vox (nm), `u8` dtype tag, then the samples with x fastest.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Result, TsimError};
use crate::grid::{ComplexSpectrum, GridSpec, RealVolume};

pub const MAGIC: &[u8; 6] = b"TVOL1\0";
const HEADER_LEN: usize = 6 + 3 * 4 + 2 * 8 + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
    F64 = 1,
    ComplexF64 = 2,
}

impl DType {
    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(DType::F32),
            1 => Ok(DType::F64),
            2 => Ok(DType::ComplexF64),
            t => Err(TsimError::Format(format!("unknown dtype tag {t}"))),
        }
    }

    fn sample_bytes(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
            DType::ComplexF64 => 16,
        }
    }
}

fn header(grid: &GridSpec, dtype: DType) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(MAGIC);
    for n in [grid.nx, grid.ny, grid.nz] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&grid.dx_vox.to_le_bytes());
    out.extend_from_slice(&grid.dz_vox.to_le_bytes());
    out.push(dtype as u8);
    out
}

/// Serializes a real volume; `dtype` must be `F32` or `F64`.
pub fn encode_real(v: &RealVolume, dtype: DType) -> Result<Vec<u8>> {
    let mut out = header(v.grid(), dtype);
    out.reserve(v.grid().len() * dtype.sample_bytes());
    match dtype {
        DType::F32 => v
            .data()
            .iter()
            .for_each(|&x| out.extend_from_slice(&(x as f32).to_le_bytes())),
        DType::F64 => v
            .data()
            .iter()
            .for_each(|&x| out.extend_from_slice(&x.to_le_bytes())),
        DType::ComplexF64 => {
            return Err(TsimError::Format(
                "real volumes are stored as f32 or f64".into(),
            ))
        }
    }
    Ok(out)
}

pub fn encode_complex(s: &ComplexSpectrum) -> Vec<u8> {
    let mut out = header(s.grid(), DType::ComplexF64);
    out.reserve(s.grid().len() * 16);
    for c in s.data() {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

fn parse_header(bytes: &[u8]) -> Result<(GridSpec, DType, &[u8])> {
    if bytes.len() < HEADER_LEN {
        return Err(TsimError::Format(format!(
            "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..6] != MAGIC {
        return Err(TsimError::Format("bad magic, expected TVOL1\\0".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let grid = GridSpec {
        nx: u32_at(6),
        ny: u32_at(10),
        nz: u32_at(14),
        dx_vox: f64_at(18),
        dz_vox: f64_at(26),
    };
    let dtype = DType::from_tag(bytes[34])?;
    let payload = &bytes[HEADER_LEN..];
    let want = grid
        .nx
        .checked_mul(grid.ny)
        .and_then(|n| n.checked_mul(grid.nz))
        .and_then(|n| n.checked_mul(dtype.sample_bytes()))
        .ok_or_else(|| TsimError::Format("dimensions overflow".into()))?;
    if payload.len() != want {
        return Err(TsimError::Format(format!(
            "payload is {} bytes, expected {want}",
            payload.len()
        )));
    }
    Ok((grid, dtype, payload))
}

pub fn decode_real(bytes: &[u8]) -> Result<RealVolume> {
    let (grid, dtype, payload) = parse_header(bytes)?;
    let data: Vec<f64> = match dtype {
        DType::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        DType::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        DType::ComplexF64 => {
            return Err(TsimError::Format(
                "file holds a complex spectrum, expected a real volume".into(),
            ))
        }
    };
    RealVolume::new(grid, data)
}

pub fn decode_complex(bytes: &[u8]) -> Result<ComplexSpectrum> {
    let (grid, dtype, payload) = parse_header(bytes)?;
    if dtype != DType::ComplexF64 {
        return Err(TsimError::Format(
            "file holds a real volume, expected a complex spectrum".into(),
        ));
    }
    let data = payload
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    ComplexSpectrum::new(grid, data)
}

pub fn write_real(path: &Path, v: &RealVolume, dtype: DType) -> Result<()> {
    let bytes = encode_real(v, dtype)?;
    fs::write(path, bytes).map_err(|e| TsimError::io(path, e))
}

pub fn read_real(path: &Path) -> Result<RealVolume> {
    if !path.exists() {
        return Err(TsimError::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| TsimError::io(path, e))?;
    decode_real(&bytes)
}

pub fn write_complex(path: &Path, s: &ComplexSpectrum) -> Result<()> {
    fs::write(path, encode_complex(s)).map_err(|e| TsimError::io(path, e))
}

pub fn read_complex(path: &Path) -> Result<ComplexSpectrum> {
    if !path.exists() {
        return Err(TsimError::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| TsimError::io(path, e))?;
    decode_complex(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::new(8, 10, 12, 40.0, 80.0).unwrap()
    }

    #[test]
    fn header_layout_is_fixed() {
        let v = RealVolume::constant(grid(), 1.5);
        let b = encode_real(&v, DType::F64).unwrap();
        assert_eq!(&b[..6], b"TVOL1\0");
        assert_eq!(u32::from_le_bytes(b[6..10].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(b[10..14].try_into().unwrap()), 10);
        assert_eq!(u32::from_le_bytes(b[14..18].try_into().unwrap()), 12);
        assert_eq!(f64::from_le_bytes(b[18..26].try_into().unwrap()), 40.0);
        assert_eq!(f64::from_le_bytes(b[26..34].try_into().unwrap()), 80.0);
        assert_eq!(b[34], 1);
        assert_eq!(b.len(), 35 + 8 * 10 * 12 * 8);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let v = RealVolume::constant(grid(), 1.0);
        let mut b = encode_real(&v, DType::F32).unwrap();
        let truncated = &b[..b.len() - 3];
        assert!(matches!(decode_real(truncated), Err(TsimError::Format(_))));
        assert!(matches!(decode_real(&b[..20]), Err(TsimError::Format(_))));
        b[0] = b'X';
        assert!(matches!(decode_real(&b), Err(TsimError::Format(_))));
    }

    #[test]
    fn dtype_mismatch_rejected() {
        let s = ComplexSpectrum::zeros(grid());
        let b = encode_complex(&s);
        assert!(decode_real(&b).is_err());
        let v = RealVolume::constant(grid(), 1.0);
        assert!(decode_complex(&encode_real(&v, DType::F64).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn f64_round_trip_is_exact(vals in proptest::collection::vec(-1e6f64..1e6, 960)) {
            let v = RealVolume::new(grid(), vals).unwrap();
            let back = decode_real(&encode_real(&v, DType::F64).unwrap()).unwrap();
            prop_assert_eq!(back, v);
        }

        #[test]
        fn complex_round_trip_is_exact(re in proptest::collection::vec(-1e3f64..1e3, 960)) {
            let data = re.iter().map(|&r| Complex64::new(r, -0.5 * r)).collect();
            let s = ComplexSpectrum::new(grid(), data).unwrap();
            let back = decode_complex(&encode_complex(&s)).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
