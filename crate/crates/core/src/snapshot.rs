//! Snapshot records and their binary and CSV encodings.
//!
//! Binary layout (little-endian): magic `OMPS`, `u32` version, `f64` tau,
//! `u32` N, `u32` M, `u32` n, then the `f64` arrays `x[n]`, `Re F[n]`,
//! `Im F[n]`, `Z[n]`, `z[N]`, `v[N]`.
//!
//! Continuum snapshots store every grid point as its own "mirror": `N = n`,
//! `M = 1`, `z = Z` and `v` holds the mirror velocity field.

use std::io::{self, BufRead, Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"OMPS";
pub const FORMAT_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "xbar,intensity,Z";

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub tau: f64,
    pub mirrors: usize,
    pub points_per_mirror: usize,
    pub x: Vec<f64>,
    pub field: Vec<Complex64>,
    /// Mirror displacement sampled on the field grid.
    pub z_grid: Vec<f64>,
    pub z: Vec<f64>,
    pub v: Vec<f64>,
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.field.iter().map(|f| f.norm_sqr()).collect()
    }

    fn check(&self) -> Result<()> {
        let n = self.x.len();
        if self.field.len() != n || self.z_grid.len() != n {
            return Err(Error::Contract("snapshot grid arrays differ in length".into()));
        }
        if self.z.len() != self.mirrors || self.v.len() != self.mirrors {
            return Err(Error::Contract("snapshot mirror arrays do not match N".into()));
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        self.check()?;
        let header_u32 = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
        };
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.tau.to_le_bytes())?;
        w.write_all(&header_u32(self.mirrors, "N")?.to_le_bytes())?;
        w.write_all(&header_u32(self.points_per_mirror, "M")?.to_le_bytes())?;
        w.write_all(&header_u32(self.x.len(), "n")?.to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * (4 * self.x.len() + 2 * self.mirrors));
        let mut put = |vals: &mut dyn Iterator<Item = f64>| {
            for v in vals {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        };
        put(&mut self.x.iter().copied());
        put(&mut self.field.iter().map(|c| c.re));
        put(&mut self.field.iter().map(|c| c.im));
        put(&mut self.z_grid.iter().copied());
        put(&mut self.z.iter().copied());
        put(&mut self.v.iter().copied());
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write_to(&mut out)?;
        Ok(out)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported snapshot version {version}")));
        }
        let tau = read_f64(&mut r)?;
        let mirrors = read_u32(&mut r)? as usize;
        let points_per_mirror = read_u32(&mut r)? as usize;
        let n = read_u32(&mut r)? as usize;
        if mirrors * points_per_mirror != n {
            return Err(Error::Format(format!("header lengths disagree: N={mirrors}, M={points_per_mirror}, n={n}")));
        }
        let x = read_f64s(&mut r, n)?;
        let re = read_f64s(&mut r, n)?;
        let im = read_f64s(&mut r, n)?;
        let z_grid = read_f64s(&mut r, n)?;
        let z = read_f64s(&mut r, mirrors)?;
        let v = read_f64s(&mut r, mirrors)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after snapshot payload".into()));
        }
        Ok(Snapshot {
            tau,
            mirrors,
            points_per_mirror,
            x,
            field: re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect(),
            z_grid,
            z,
            v,
        })
    }

    /// Plot-ready table `xbar,intensity,Z` with 17 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        self.check()?;
        writeln!(w, "{CSV_HEADER}")?;
        for ((x, f), z) in self.x.iter().zip(&self.field).zip(&self.z_grid) {
            writeln!(w, "{x:.16e},{:.16e},{z:.16e}", f.norm_sqr())?;
        }
        Ok(())
    }
}

/// Column data of a CSV written by [`Snapshot::write_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub x: Vec<f64>,
    pub intensity: Vec<f64>,
    pub z: Vec<f64>,
}

pub fn read_csv(r: impl BufRead) -> Result<CsvTable> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != CSV_HEADER {
        return Err(Error::Format(format!("expected header `{CSV_HEADER}`")));
    }
    let mut t = CsvTable { x: vec![], intensity: vec![], z: vec![] };
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))
        };
        if cols.len() != 3 {
            return Err(Error::Format(format!("line {}: expected 3 columns", i + 2)));
        }
        t.x.push(parse(cols[0])?);
        t.intensity.push(parse(cols[1])?);
        t.z.push(parse(cols[2])?);
    }
    Ok(t)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Format("truncated snapshot".into()),
        _ => Error::Io(e),
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; 8 * n];
    read_exact(r, &mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}
