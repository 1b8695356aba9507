//! Point-set serialisation.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic   [u8; 4]  "GNPS"
//! version u32      1
//! dim     u32
//! metric  u32      0 = euclidean-free, 1 = torus
//! count   u64
//! density f64
//! seed    u64
//! lower   [f64; dim]
//! upper   [f64; dim]
//! coords  [f64; count * dim]   point-major
//! ```

use std::io::{Read, Write};

use super::{BoxRegion, Metric, PointSet};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GNPS";
const VERSION: u32 = 1;

pub fn write_binary<W: Write>(ps: &PointSet, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(ps.dim() as u32).to_le_bytes())?;
    let metric: u32 = match ps.metric() {
        Metric::EuclideanFree => 0,
        Metric::Torus => 1,
    };
    w.write_all(&metric.to_le_bytes())?;
    w.write_all(&(ps.len() as u64).to_le_bytes())?;
    w.write_all(&ps.density().to_le_bytes())?;
    w.write_all(&ps.seed().to_le_bytes())?;
    for x in ps.bbox().lower().iter().chain(ps.bbox().upper()) {
        w.write_all(&x.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(ps.coords().len() * 8);
    for x in ps.coords() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_binary<R: Read>(mut r: R) -> Result<PointSet> {
    let magic: [u8; 4] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a point-set file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported point-set version {version}"
        )));
    }
    let dim = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let metric = match u32::from_le_bytes(read_array(&mut r)?) {
        0 => Metric::EuclideanFree,
        1 => Metric::Torus,
        m => return Err(Error::Format(format!("unknown metric tag {m}"))),
    };
    let count = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let density = f64::from_le_bytes(read_array(&mut r)?);
    let seed = u64::from_le_bytes(read_array(&mut r)?);
    let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; n * 8];
        r.read_exact(&mut bytes)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    };
    let lower = read_f64s(dim)?;
    let upper = read_f64s(dim)?;
    let coords = read_f64s(count * dim)?;
    PointSet::from_coords(BoxRegion::new(lower, upper)?, density, coords, metric, seed)
}

/// Debug CSV: one row per point, columns `x0, x1, ...`.
pub fn write_csv<W: Write>(ps: &PointSet, mut w: W) -> Result<()> {
    let header: Vec<String> = (0..ps.dim()).map(|a| format!("x{a}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for p in ps.iter() {
        let row: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
