//! Binary phase-space snapshots.
//!
//! Byte layout, all integers and floats little-endian:
//!
//! | offset        | type        | content                                   |
//! |---------------|-------------|-------------------------------------------|
//! | 0             | `[u8; 8]`   | magic `BGKSNAP\0`                          |
//! | 8             | `u32`       | format version (1)                        |
//! | 12            | `u32`       | dimension `d` (1..=3)                     |
//! | 16            | `u32 × d`   | spatial cell counts                       |
//! |               | `f64 × d`   | spatial periods                           |
//! |               | `u32 × d`   | velocity points per axis                  |
//! |               | `f64`       | velocity box half-width                   |
//! |               | `f64`       | γ                                         |
//! |               | `f64`       | time                                      |
//! |               | `u64`       | payload length `P` (number of `f64`)      |
//! |               | `f64 × P`   | field values, spatial index outer         |
//!
//! `P` must equal the product of all spatial and velocity counts, and the
//! file must end exactly after the payload.

use std::path::Path;
use std::sync::Arc;

use super::{KineticField, SpatialGrid};
use crate::equilibrium::{GasParams, VelocityGrid};
use crate::{Error, Result, MAX_DIM};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"BGKSNAP\0";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub gamma: f64,
    pub time: f64,
    pub field: KineticField,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Snapshot(format!("truncated while reading {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

impl Snapshot {
    pub fn encode(&self) -> Vec<u8> {
        let s = self.field.spatial_arc();
        let v = self.field.velocity();
        let data = &self.field.data;
        let d = s.dim();
        let mut out = Vec::with_capacity(64 + 24 * d + 8 * data.len());
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&(d as u32).to_le_bytes());
        for &k in s.cells() {
            out.extend_from_slice(&(k as u32).to_le_bytes());
        }
        for &l in s.lengths() {
            out.extend_from_slice(&l.to_le_bytes());
        }
        for &k in v.points_per_axis() {
            out.extend_from_slice(&(k as u32).to_le_bytes());
        }
        out.extend_from_slice(&v.half_width().to_le_bytes());
        out.extend_from_slice(&self.gamma.to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        out.extend_from_slice(&(data.len() as u64).to_le_bytes());
        for x in data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8, "magic")? != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let version = r.u32("version")?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let d = r.u32("dimension")? as usize;
        if d == 0 || d > MAX_DIM {
            return Err(Error::Snapshot(format!("invalid dimension {d}")));
        }
        let mut cells = Vec::with_capacity(d);
        for _ in 0..d {
            cells.push(r.u32("cell count")? as usize);
        }
        let mut lengths = Vec::with_capacity(d);
        for _ in 0..d {
            lengths.push(r.f64("period")?);
        }
        let mut points = Vec::with_capacity(d);
        for _ in 0..d {
            points.push(r.u32("velocity count")? as usize);
        }
        let half_width = r.f64("velocity half-width")?;
        let gamma = r.f64("gamma")?;
        let time = r.f64("time")?;
        let payload = r.u64("payload length")?;

        if !time.is_finite() {
            return Err(Error::Snapshot(format!("non-finite time {time}")));
        }
        GasParams::new(gamma, d).map_err(|e| Error::Snapshot(e.to_string()))?;
        let expected = cells
            .iter()
            .chain(&points)
            .try_fold(1usize, |acc, &k| acc.checked_mul(k))
            .ok_or_else(|| Error::Snapshot("grid size overflows".into()))?;
        if payload != expected as u64 {
            return Err(Error::Snapshot(format!(
                "payload length {payload} does not match grid size {expected}"
            )));
        }
        // Checked before allocating anything payload-sized.
        if r.remaining() != expected.saturating_mul(8) {
            return Err(Error::Snapshot(format!(
                "expected {} payload bytes, found {}",
                expected.saturating_mul(8),
                r.remaining()
            )));
        }
        let spatial =
            SpatialGrid::new(&cells, &lengths).map_err(|e| Error::Snapshot(e.to_string()))?;
        let velocity = VelocityGrid::new(d, &points, half_width)
            .map_err(|e| Error::Snapshot(e.to_string()))?;
        let mut data = Vec::with_capacity(expected);
        for _ in 0..expected {
            data.push(r.f64("payload")?);
        }
        let field = KineticField::from_data(Arc::new(spatial), Arc::new(velocity), data)
            .map_err(|e| Error::Snapshot(e.to_string()))?;
        Ok(Self { gamma, time, field })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}
