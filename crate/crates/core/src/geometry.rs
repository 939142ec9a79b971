//! Flat torus `[0, L)^d` discretized into `n^d` cells of width `h = L / n`.
//!
//! Cells are addressed row-major: axis 0 varies slowest. Grid vectors are
//! integer shifts in cell units; their residues mod `n` are what matter.

use crate::error::{Error, Result};

/// Maximum supported dimension.
pub const MAX_DIM: usize = 3;

/// Integer shift in cell units, one entry per axis.
pub type GridVec = Vec<i64>;

#[derive(Debug, Clone, PartialEq)]
pub struct TorusGeometry {
    dim: usize,
    side: f64,
    n: usize,
}

impl TorusGeometry {
    pub fn new(dim: usize, side: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGeometry(format!("grid size {n} < 2")));
        }
        Self::with_resolution(dim, side, n)
    }

    /// Like [`TorusGeometry::new`] but admits the single-cell grid produced by pooling.
    pub(crate) fn with_resolution(dim: usize, side: f64, n: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGeometry(format!("dimension {dim} not in 1..=3")));
        }
        if n == 0 {
            return Err(Error::InvalidGeometry("grid size 0".into()));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidGeometry(format!("side length {side}")));
        }
        let h = side / n as f64;
        if h * n as f64 != side {
            return Err(Error::InvalidGeometry(format!(
                "cell width {h} times {n} does not reproduce side {side}"
            )));
        }
        Ok(Self { dim, side, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cell_width(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn cell_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Same torus with another dimension (used for projections).
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::with_resolution(dim, self.side, self.n)
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.n + c)
    }

    pub fn coords(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for axis in (0..self.dim).rev() {
            out[axis] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    /// Index of the cell `idx + shift` (mod n on every axis).
    pub fn shift_index(&self, idx: usize, shift: &[i64]) -> usize {
        let c = self.coords(idx);
        let n = self.n as i64;
        (0..self.dim).fold(0, |acc, a| {
            acc * self.n + (c[a] as i64 + shift[a]).rem_euclid(n) as usize
        })
    }

    /// Minimal representative of a residue, in `(-n/2, n/2]`.
    pub fn minimal_rep(&self, k: i64) -> i64 {
        let n = self.n as i64;
        let r = k.rem_euclid(n);
        if 2 * r > n {
            r - n
        } else {
            r
        }
    }

    /// Torus norm of a grid vector.
    pub fn grid_norm(&self, v: &[i64]) -> f64 {
        let sq: i64 = v.iter().map(|&k| {
            let m = self.minimal_rep(k);
            m * m
        }).sum();
        self.cell_width() * (sq as f64).sqrt()
    }

    /// Canonical residue vector in `[0, n)^d`.
    pub fn reduce(&self, v: &[i64]) -> GridVec {
        v.iter().map(|&k| k.rem_euclid(self.n as i64)).collect()
    }

    /// All residues of `Z_n^d` in row-major order.
    pub fn all_grid_vectors(&self) -> Vec<GridVec> {
        (0..self.cell_count())
            .map(|i| self.coords(i)[..self.dim].iter().map(|&c| c as i64).collect())
            .collect()
    }

    pub fn grid_to_position(&self, v: &[i64]) -> Vec<f64> {
        let h = self.cell_width();
        self.reduce(v).iter().map(|&k| k as f64 * h).collect()
    }

    /// Converts a displacement to cell units when every coordinate is a multiple of `h`.
    pub fn to_grid_shift(&self, t: &[f64]) -> Result<GridVec> {
        self.check_dim(t.len())?;
        let h = self.cell_width();
        t.iter()
            .map(|&x| {
                let k = (x / h).round();
                if !x.is_finite() || (k * h - x).abs() > 1e-9 * h {
                    Err(Error::NonGridShift(t.to_vec()))
                } else {
                    Ok(k as i64)
                }
            })
            .collect()
    }

    pub fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            Err(Error::DimensionMismatch { expected: self.dim, got })
        } else {
            Ok(())
        }
    }

    /// Reduces a coordinate into `[0, L)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let r = x.rem_euclid(self.side);
        if r >= self.side {
            0.0
        } else {
            r
        }
    }

    pub fn cell_center(&self, idx: usize) -> [f64; MAX_DIM] {
        let h = self.cell_width();
        let c = self.coords(idx);
        let mut out = [0.0; MAX_DIM];
        for a in 0..self.dim {
            out[a] = (c[a] as f64 + 0.5) * h;
        }
        out
    }

    /// Cell containing a position in `[0, L)^d`.
    pub fn cell_of(&self, pos: &[f64]) -> usize {
        let h = self.cell_width();
        pos.iter().take(self.dim).fold(0, |acc, &x| {
            let k = ((self.wrap(x) / h).floor() as usize).min(self.n - 1);
            acc * self.n + k
        })
    }

    /// Euclidean quotient distance.
    pub fn torus_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut sq = 0.0;
        for axis in 0..self.dim {
            let mut dx = (a[axis] - b[axis]).abs() % self.side;
            if self.side - dx < dx {
                dx = self.side - dx;
            }
            sq += dx * dx;
        }
        sq.sqrt()
    }

    /// Largest torus distance between two points.
    pub fn diameter(&self) -> f64 {
        0.5 * self.side * (self.dim as f64).sqrt()
    }
}

/// Lexicographic comparison of coordinate slices via `total_cmp`.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_geometry() {
        assert!(TorusGeometry::new(0, 1.0, 4).is_err());
        assert!(TorusGeometry::new(4, 1.0, 4).is_err());
        assert!(TorusGeometry::new(2, 1.0, 1).is_err());
        assert!(TorusGeometry::new(2, -1.0, 4).is_err());
        assert!(TorusGeometry::new(2, 4.0, 64).is_ok());
    }

    #[test]
    fn index_round_trip() {
        let g = TorusGeometry::new(3, 1.0, 4).unwrap();
        for i in 0..g.cell_count() {
            let c = g.coords(i);
            assert_eq!(g.index(&c[..3]), i);
        }
        assert_eq!(g.shift_index(g.index(&[3, 0, 1]), &[1, -1, 0]), g.index(&[0, 3, 1]));
    }

    #[test]
    fn distances_wrap() {
        let g = TorusGeometry::new(2, 1.0, 4).unwrap();
        assert_eq!(g.torus_distance(&[0.125, 0.0], &[0.875, 0.0]), 0.25);
        assert_eq!(g.grid_norm(&[3, 0]), 0.25);
        assert_eq!(g.grid_norm(&[2, 2]), (0.5f64 * 0.5 * 2.0).sqrt());
        assert_eq!(g.minimal_rep(2), 2);
        assert_eq!(g.minimal_rep(3), -1);
    }

    #[test]
    fn grid_shift_conversion() {
        let g = TorusGeometry::new(1, 1.0, 4).unwrap();
        assert_eq!(g.to_grid_shift(&[0.5]).unwrap(), vec![2]);
        assert!(matches!(g.to_grid_shift(&[0.3]), Err(Error::NonGridShift(_))));
        assert!(matches!(g.to_grid_shift(&[0.5, 0.0]), Err(Error::DimensionMismatch { .. })));
    }
}
