//! Field files: raw little-endian f64 values (`.bin`) beside a JSON header
//! (`.json`). Values are point-major with axis 1 varying fastest and the
//! fiber components of one point contiguous.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Fiber, Field, GridShape, Layout};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub sizes: [usize; 7],
    pub lengths: [f64; 7],
    pub fiber: String,
    pub fiber_len: usize,
    pub layout: Layout,
    pub endianness: String,
    pub points: usize,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes `stem.bin` and `stem.json`; returns the two paths.
pub fn write_field<T: Fiber>(stem: &Path, field: &Field<T>) -> Result<(PathBuf, PathBuf)> {
    let (bin, json) = paths(stem);
    let grid = field.grid();
    let header = FieldHeader {
        sizes: grid.sizes(),
        lengths: grid.lengths(),
        fiber: T::NAME.to_string(),
        fiber_len: T::LEN,
        layout: field.layout(),
        endianness: "little".to_string(),
        points: grid.len(),
    };
    let bytes: Vec<u8> = field
        .to_flat()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    write_atomic(&bin, &bytes)?;
    write_atomic(&json, serde_json::to_string_pretty(&header)?.as_bytes())?;
    Ok((bin, json))
}

pub fn read_field<T: Fiber>(stem: &Path) -> Result<Field<T>> {
    let (bin, json) = paths(stem);
    let header: FieldHeader = serde_json::from_slice(&fs::read(&json)?)?;
    if header.fiber != T::NAME || header.fiber_len != T::LEN {
        return Err(Error::Format(format!(
            "{} holds {} values, expected {}",
            json.display(),
            header.fiber,
            T::NAME
        )));
    }
    if header.endianness != "little" {
        return Err(Error::Format(format!("unsupported endianness {}", header.endianness)));
    }
    let grid = GridShape::new(header.sizes, header.lengths)?;
    if grid.len() != header.points {
        return Err(Error::Format("point count does not match sizes".into()));
    }
    let bytes = fs::read(&bin)?;
    if bytes.len() != grid.len() * T::LEN * 8 {
        return Err(Error::Format(format!(
            "{} has {} bytes, expected {}",
            bin.display(),
            bytes.len(),
            grid.len() * T::LEN * 8
        )));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Field::from_flat(grid, header.layout, &flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Vec7;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridShape::collapsed(&[5, 3]).unwrap();
        let f = Field::from_position(g, |x| Vec7([x[0].sin(), x[1].cos(), 1.0 / 3.0, 0.0, -0.0, 1e-300, 7.0]));
        let stem = dir.path().join("u");
        write_field(&stem, &f).unwrap();
        let back: Field<Vec7> = read_field(&stem).unwrap();
        assert_eq!(back.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   f.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(back.grid(), f.grid());
    }

    #[test]
    fn wrong_fiber_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridShape::collapsed(&[4]).unwrap();
        let stem = dir.path().join("s");
        write_field(&stem, &Field::<f64>::zeros(g)).unwrap();
        assert!(read_field::<Vec7>(&stem).is_err());
    }
}
