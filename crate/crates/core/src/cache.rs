//! Binary surface cache.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `DRSURF\0\0` |
//! | 4     | format version (`u32`) |
//! | 32    | configuration hash |
//! | 8 + 8 | grid: `L` (`f64`), `n_x` (`u64`) |
//! | 8 + 8 + 8 | ladder: `c̄`, `c_floor` (`f64`), `n` (`u64`) |
//! | 8     | switching tolerance (`f64`) |
//! | 8·(n+1)·(n_x+1) | slice values, rung-major (`f64`) |
//! | (n+1)·(n_x+1) | switch masks, one byte per node |
//! | 8·(n+1) | per-rung iteration counts (`u64`) |
//!
//! Rates and derivatives are recomputed on load; values and masks round-trip
//! bit for bit.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::discretization::{upwind_derivative, Grid, GridFn};
use crate::error::{Error, Result};
use crate::ladder::{RateLadder, ValueSlice};
use crate::model::ModelParams;
use crate::surface::ValueSurface;

pub const MAGIC: &[u8; 8] = b"DRSURF\0\0";
pub const VERSION: u32 = 1;

fn cache_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Cache {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Serialize `surface` into the cache layout.
pub fn encode(surface: &ValueSurface) -> Vec<u8> {
    let nodes = surface.grid.nodes();
    let rungs = surface.slices.len();
    let mut out = Vec::with_capacity(100 + rungs * nodes * 9 + rungs * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&surface.params_hash);
    out.extend_from_slice(&surface.grid.length().to_le_bytes());
    out.extend_from_slice(&(surface.grid.intervals() as u64).to_le_bytes());
    out.extend_from_slice(&surface.ladder.c_bar().to_le_bytes());
    out.extend_from_slice(&surface.ladder.c_floor().to_le_bytes());
    out.extend_from_slice(&(surface.ladder.steps() as u64).to_le_bytes());
    out.extend_from_slice(&surface.eq_tol.to_le_bytes());
    for slice in &surface.slices {
        for v in slice.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for slice in &surface.slices {
        out.extend(slice.switch_mask.iter().map(|&m| m as u8));
    }
    for slice in &surface.slices {
        out.extend_from_slice(&(slice.iterations as u64).to_le_bytes());
    }
    out
}

pub fn write_surface(path: &Path, surface: &ValueSurface) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut file = BufWriter::new(fs::File::create(path)?);
    file.write_all(&encode(surface))?;
    file.flush()?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| cache_error(self.path, "file is truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parse a cache file. `expected_hash` guards against a stale file.
pub fn decode(bytes: &[u8], path: &Path, params: ModelParams, expected_hash: Option<[u8; 32]>) -> Result<ValueSurface> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(8)? != MAGIC {
        return Err(cache_error(path, "not a surface cache file"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(cache_error(path, format!("unsupported format version {version}")));
    }
    let hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    if let Some(expected) = expected_hash {
        if hash != expected {
            return Err(cache_error(path, "configuration hash does not match"));
        }
    }
    let length = r.f64()?;
    let intervals = r.u64()? as usize;
    let grid = Grid::new(length, intervals).map_err(|e| cache_error(path, e.to_string()))?;
    let c_bar = r.f64()?;
    let c_floor = r.f64()?;
    let steps = r.u64()? as usize;
    let ladder = RateLadder::new(c_bar, c_floor, steps).map_err(|e| cache_error(path, e.to_string()))?;
    let eq_tol = r.f64()?;
    let nodes = grid.nodes();
    let rungs = ladder.len();
    let expected_len = r.pos + rungs * nodes * 9 + rungs * 8;
    if bytes.len() != expected_len {
        return Err(cache_error(
            path,
            format!("expected {expected_len} bytes, found {}", bytes.len()),
        ));
    }
    let mut values = Vec::with_capacity(rungs);
    for _ in 0..rungs {
        values.push((0..nodes).map(|_| r.f64()).collect::<Result<Vec<f64>>>()?);
    }
    let mut masks = Vec::with_capacity(rungs);
    for _ in 0..rungs {
        masks.push(r.take(nodes)?.iter().map(|&b| b != 0).collect::<Vec<bool>>());
    }
    let mut slices = Vec::with_capacity(rungs);
    for (i, (v, mask)) in values.into_iter().zip(masks).enumerate() {
        let iterations = r.u64()? as usize;
        let v_prime = upwind_derivative(&v, grid.dx());
        slices.push(ValueSlice {
            rate: ladder.rate(i),
            v: GridFn::new(grid, v)?,
            v_prime: GridFn::new(grid, v_prime)?,
            switch_mask: mask,
            iterations,
        });
    }
    Ok(ValueSurface {
        params,
        grid,
        ladder,
        slices,
        eq_tol,
        params_hash: hash,
    })
}

pub fn read_surface(path: &Path, params: ModelParams, expected_hash: Option<[u8; 32]>) -> Result<ValueSurface> {
    let bytes = fs::read(path).map_err(|e| cache_error(path, e.to_string()))?;
    decode(&bytes, path, params, expected_hash)
}

/// Lower-case hex of a hash, used for cache file names.
pub fn hex(hash: &[u8; 32]) -> String {
    hash.iter().map(|b| format!("{b:02x}")).collect()
}
