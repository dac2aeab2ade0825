//! Truncated dyadic grids on the real line.
//!
//! The unit intervals `(j, j+1]` for `j_min <= j < j_max` are each split into
//! `2^depth` half-open atoms. Endpoints at refinement level `n <= depth` are
//! `j + k * 2^-n`, so every level-`n` interval is an exact union of finest
//! atoms and aggregation is free of rounding (all endpoints are dyadic
//! rationals representable in f64).

use crate::error::{Error, Result};

/// Hard ceiling on the number of finest atoms a domain may carry.
pub const MAX_ATOMS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicDomain {
    j_min: i32,
    j_max: i32,
    depth: u32,
}

impl DyadicDomain {
    pub fn new(j_min: i32, j_max: i32, depth: u32) -> Result<Self> {
        if j_min >= j_max {
            return Err(Error::InvalidInput(format!(
                "dyadic domain requires j_min < j_max, got [{j_min}, {j_max}]"
            )));
        }
        if depth == 0 || depth > 30 {
            return Err(Error::InvalidInput(format!(
                "dyadic depth must lie in 1..=30, got {depth}"
            )));
        }
        let units = (j_max - j_min) as usize;
        let atoms = units << depth;
        if atoms > MAX_ATOMS {
            return Err(Error::InvalidInput(format!(
                "atom count {atoms} exceeds budget {MAX_ATOMS}"
            )));
        }
        Ok(Self {
            j_min,
            j_max,
            depth,
        })
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn unit_count(&self) -> usize {
        (self.j_max - self.j_min) as usize
    }

    pub fn atoms_per_unit(&self) -> usize {
        1usize << self.depth
    }

    pub fn total_atoms(&self) -> usize {
        self.unit_count() << self.depth
    }

    /// Length of a finest atom, exactly `2^-depth`.
    pub fn atom_len(&self) -> f64 {
        0.5f64.powi(self.depth as i32)
    }

    /// Left endpoint of the finest atom with global index `k`.
    pub fn left_endpoint(&self, k: usize) -> f64 {
        self.j_min as f64 + k as f64 * self.atom_len()
    }

    /// Grid point `j + k * 2^-n` for a refinement level `n <= depth`.
    pub fn level_endpoint(&self, j: i32, n: u32, k: usize) -> f64 {
        debug_assert!(n <= self.depth);
        j as f64 + k as f64 * 0.5f64.powi(n as i32)
    }

    /// Maps an on-grid point to its finest-atom index offset from `j_min`.
    /// Fails when `x` does not sit on the finest grid (relative snap 1e-9).
    pub fn grid_index(&self, x: f64) -> Result<usize> {
        let step = self.atom_len();
        let raw = (x - self.j_min as f64) / step;
        let idx = raw.round();
        if (raw - idx).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "point {x} is not on the level-{} dyadic grid",
                self.depth
            )));
        }
        if idx < 0.0 || idx > self.total_atoms() as f64 {
            return Err(Error::InvalidInput(format!(
                "point {x} lies outside [{}, {}]",
                self.j_min, self.j_max
            )));
        }
        Ok(idx as usize)
    }

    pub fn contains_unit(&self, j: i32) -> bool {
        j >= self.j_min && j < self.j_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let d = DyadicDomain::new(-1, 1, 8).unwrap();
        assert_eq!(d.total_atoms(), 512);
        assert_eq!(d.atom_len(), 1.0 / 256.0);
        // d_kn = j + k 2^-n reproduced exactly at every level
        for n in 0..=8u32 {
            let step = 0.5f64.powi(n as i32);
            for k in 0..=(1usize << n) {
                let x = d.level_endpoint(0, n, k);
                assert_eq!(x, k as f64 * step);
                let idx = d.grid_index(x).unwrap();
                assert_eq!(d.left_endpoint(idx), x);
            }
        }
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(DyadicDomain::new(3, 3, 4).is_err());
        assert!(DyadicDomain::new(0, 1, 0).is_err());
        assert!(DyadicDomain::new(-8, 8, 22).is_err()); // 16 * 2^22 atoms
    }

    #[test]
    fn off_grid_points_error() {
        let d = DyadicDomain::new(0, 2, 4).unwrap();
        assert!(d.grid_index(0.5).is_ok());
        assert!(d.grid_index(0.03).is_err());
        assert!(d.grid_index(2.5).is_err());
    }
}
