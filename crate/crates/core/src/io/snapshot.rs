//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | content                          |
//! |-------|----------------------------------|
//! | 4     | magic `CHNS`                     |
//! | 4     | format version (u32, currently 1) |
//! | 4     | nx (u32)                         |
//! | 4     | ny (u32)                         |
//! | 4     | component count (u32, 1 or 2)    |
//! | 8     | time (f64)                       |
//! | ...   | `count * nx * ny` f64, row-major, one component after the other |

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, VectorField};
use crate::scalar::Real;

pub const MAGIC: &[u8; 4] = b"CHNS";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 28;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSnapshot {
    pub nx: usize,
    pub ny: usize,
    pub time: f64,
    pub components: Vec<Vec<f64>>,
}

impl FieldSnapshot {
    pub fn from_scalar<T: Real>(f: &ScalarField<T>, time: f64) -> Self {
        FieldSnapshot {
            nx: f.grid().nx(),
            ny: f.grid().ny(),
            time,
            components: vec![f.values().iter().map(|v| v.as_f64()).collect()],
        }
    }

    pub fn from_vector<T: Real>(v: &VectorField<T>, time: f64) -> Self {
        let comp = |f: &ScalarField<T>| f.values().iter().map(|v| v.as_f64()).collect();
        FieldSnapshot {
            nx: v.grid().nx(),
            ny: v.grid().ny(),
            time,
            components: vec![comp(&v.x), comp(&v.y)],
        }
    }

    fn check_grid<T: Real>(&self, grid: &Grid<T>, want: usize) -> Result<()> {
        if self.nx != grid.nx() || self.ny != grid.ny() {
            return Err(Error::InvalidParameter(format!(
                "snapshot is {}x{}, grid is {}x{}",
                self.nx,
                self.ny,
                grid.nx(),
                grid.ny()
            )));
        }
        if self.components.len() != want {
            return Err(Error::InvalidParameter(format!(
                "snapshot has {} components, expected {want}",
                self.components.len()
            )));
        }
        Ok(())
    }

    pub fn to_scalar<T: Real>(&self, grid: &Arc<Grid<T>>) -> Result<ScalarField<T>> {
        self.check_grid(grid, 1)?;
        ScalarField::new(grid.clone(), self.components[0].iter().map(|&v| T::lit(v)).collect())
    }

    pub fn to_vector<T: Real>(&self, grid: &Arc<Grid<T>>) -> Result<VectorField<T>> {
        self.check_grid(grid, 2)?;
        let comp = |i: usize| ScalarField::new(grid.clone(), self.components[i].iter().map(|&v| T::lit(v)).collect());
        VectorField::new(comp(0)?, comp(1)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.nx * self.ny;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * self.components.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.nx as u32).to_le_bytes());
        out.extend_from_slice(&(self.ny as u32).to_le_bytes());
        out.extend_from_slice(&(self.components.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        for c in &self.components {
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < HEADER_LEN {
            return Err(format!("file shorter than the {HEADER_LEN}-byte header"));
        }
        if &bytes[0..4] != MAGIC {
            return Err("bad magic bytes, not a CHNS snapshot".into());
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let version = u32_at(4);
        if version != VERSION {
            return Err(format!("unsupported format version {version}"));
        }
        let (nx, ny, count) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
        if count != 1 && count != 2 {
            return Err(format!("component count must be 1 or 2, got {count}"));
        }
        let time = f64::from_le_bytes(bytes[20..28].try_into().expect("8 bytes"));
        let n = nx * ny;
        let want = HEADER_LEN + 8 * n * count;
        if bytes.len() < want {
            return Err(format!(
                "payload shorter than header claims ({} bytes, expected {want})",
                bytes.len()
            ));
        }
        if bytes.len() > want {
            return Err(format!("{} trailing bytes after payload", bytes.len() - want));
        }
        let components = (0..count)
            .map(|c| {
                let start = HEADER_LEN + 8 * n * c;
                bytes[start..start + 8 * n]
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                    .collect()
            })
            .collect();
        Ok(FieldSnapshot { nx, ny, time, components })
    }
}

pub fn save_snapshot(snap: &FieldSnapshot, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, snap.to_bytes())?;
    Ok(())
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<FieldSnapshot> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    FieldSnapshot::from_bytes(&bytes).map_err(|reason| Error::Snapshot {
        path: path.to_path_buf(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{smooth_field, solenoidal_field};

    #[test]
    fn scalar_round_trip_is_bit_exact() {
        let g = Grid::square(64).unwrap();
        let f = smooth_field(&g, 10, 1.3, 7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phi.chns");
        save_snapshot(&FieldSnapshot::from_scalar(&f, 0.25), &path).unwrap();
        let back = load_snapshot(&path).unwrap();
        assert_eq!(back.time, 0.25);
        let g2 = back.to_scalar(&g).unwrap();
        let same = f.values().iter().zip(g2.values()).all(|(a, b): (&f64, &f64)| a.to_bits() == b.to_bits());
        assert!(same);
    }

    #[test]
    fn vector_round_trip_is_bit_exact() {
        let g = Grid::square(32).unwrap();
        let v = solenoidal_field(&g, 5, 2.0, 3);
        let snap = FieldSnapshot::from_vector(&v, 1.0);
        let back = FieldSnapshot::from_bytes(&snap.to_bytes()).unwrap();
        assert_eq!(back, snap);
        let w: VectorField<f64> = back.to_vector(&g).unwrap();
        assert_eq!(w.y.values(), v.y.values());
    }

    #[test]
    fn truncated_payload_is_reported() {
        let g = Grid::<f64>::square(8).unwrap();
        let mut bytes = FieldSnapshot::from_scalar(&ScalarField::constant(&g, 1.0), 0.0).to_bytes();
        bytes.truncate(bytes.len() - 3);
        let err = FieldSnapshot::from_bytes(&bytes).unwrap_err();
        assert!(err.contains("payload shorter than header claims"), "{err}");
    }

    #[test]
    fn bad_magic_and_version() {
        let g = Grid::<f64>::square(8).unwrap();
        let good = FieldSnapshot::from_scalar(&ScalarField::zeros(&g), 0.0).to_bytes();
        let mut b = good.clone();
        b[0] = b'X';
        assert!(FieldSnapshot::from_bytes(&b).unwrap_err().contains("magic"));
        let mut b = good;
        b[4] = 9;
        assert!(FieldSnapshot::from_bytes(&b).unwrap_err().contains("version"));
    }
}
