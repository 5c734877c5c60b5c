//! Uniform periodic grids in one or two dimensions and scalar fields on them.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 2;

/// A uniform periodic grid with `n` cells per axis on `[origin, origin + length)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub origin: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64, origin: f64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidParameter(format!("grid dimension {dim} not in 1..=2")));
        }
        if n < 16 {
            return Err(Error::InvalidParameter(format!("grid needs at least 16 cells per axis, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParameter(format!("grid length {length} must be positive")));
        }
        Ok(Self { dim, n, length, origin })
    }

    /// Torus `[0, length)^d`.
    pub fn torus(dim: usize, n: usize, length: f64) -> Result<Self> {
        Self::new(dim, n, length, 0.0)
    }

    /// Box `[-length/2, length/2)^d` centered on the origin.
    pub fn centered(dim: usize, n: usize, length: f64) -> Result<Self> {
        Self::new(dim, n, length, -0.5 * length)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing()
    }

    /// Per-axis indices of flat index `idx` (axis 0 fastest).
    pub fn unflatten(&self, idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        out[0] = idx % self.n;
        if self.dim == 2 {
            out[1] = idx / self.n;
        }
        out
    }

    pub fn flatten(&self, ij: [usize; MAX_DIM]) -> usize {
        if self.dim == 1 {
            ij[0]
        } else {
            ij[0] + self.n * ij[1]
        }
    }

    pub fn point(&self, idx: usize) -> [f64; MAX_DIM] {
        let ij = self.unflatten(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.coord(ij[a]);
        }
        x
    }

    /// Flat index of the periodic neighbour of `idx` along `axis` in direction `+1` or `-1`.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> usize {
        let n = self.n;
        let stride = if axis == 0 { 1 } else { n };
        let i = (idx / stride) % n;
        if forward {
            if i + 1 == n {
                idx + stride - n * stride
            } else {
                idx + stride
            }
        } else if i == 0 {
            idx + (n - 1) * stride
        } else {
            idx - stride
        }
    }

    /// Index of the node closest to `x`, with periodic wrap.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut ij = [0; MAX_DIM];
        for a in 0..self.dim {
            let t = ((x[a] - self.origin) / self.spacing()).round() as i64;
            ij[a] = t.rem_euclid(self.n as i64) as usize;
        }
        self.flatten(ij)
    }

    /// Periodic distance from node `idx` to the point `x`.
    pub fn periodic_distance(&self, idx: usize, x: &[f64]) -> f64 {
        let p = self.point(idx);
        let mut s = 0.0;
        for a in 0..self.dim {
            let mut d = (p[a] - x[a]).rem_euclid(self.length);
            if d > 0.5 * self.length {
                d = self.length - d;
            }
            s += d * d;
        }
        s.sqrt()
    }
}

/// What a field represents; carried into exports.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldMeta {
    Discounted { lambda: f64, p0: Vec<f64> },
    Evolution { eps: f64, t: f64 },
    Homogenized { t: f64 },
    Contact { level: usize, name: String },
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub meta: FieldMeta,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>, meta: FieldMeta) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { left: values.len(), right: grid.len() });
        }
        Ok(Self { grid, values, meta })
    }

    pub fn from_fn(grid: Grid, meta: FieldMeta, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| f(&grid.point(i)[..grid.dim]))
            .collect();
        Self { grid, values, meta }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Periodic multilinear interpolation.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let h = g.spacing();
        let n = g.n as i64;
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for a in 0..g.dim {
            let t = (x[a] - g.origin) / h;
            let f = t.floor();
            base[a] = (f as i64).rem_euclid(n) as usize;
            frac[a] = t - f;
        }
        let next = |i: usize| if i + 1 == g.n { 0 } else { i + 1 };
        if g.dim == 1 {
            let v0 = self.values[base[0]];
            if frac[0] == 0.0 {
                return v0;
            }
            let v1 = self.values[next(base[0])];
            v0 + frac[0] * (v1 - v0)
        } else {
            let (i0, j0) = (base[0], base[1]);
            let (i1, j1) = (next(i0), next(j0));
            let at = |i: usize, j: usize| self.values[i + g.n * j];
            let (fx, fy) = (frac[0], frac[1]);
            let a = at(i0, j0) + fx * (at(i1, j0) - at(i0, j0));
            if fy == 0.0 {
                return a;
            }
            let b = at(i0, j1) + fx * (at(i1, j1) - at(i0, j1));
            a + fy * (b - a)
        }
    }

    /// CSV with header `x,value` (1D) or `x,y,value` (2D).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        if self.grid.dim == 1 {
            writeln!(w, "x,value")?;
        } else {
            writeln!(w, "x,y,value")?;
        }
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            if self.grid.dim == 1 {
                writeln!(w, "{},{}", p[0], v)?;
            } else {
                writeln!(w, "{},{},{}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }
}
