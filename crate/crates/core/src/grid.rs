use crate::error::{Error, Result};

/// Uniform periodic 1D grid. Nodes sit at `g·Δx`, cells span `[gΔx, (g+1)Δx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub length: f64,
    pub dx: f64,
}

impl Grid {
    pub fn new(nx: usize, length: f64) -> Result<Self> {
        if nx < 2 {
            return Err(Error::InvalidConfig(format!("grid needs at least 2 nodes, got {nx}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidConfig(format!("domain length must be positive, got {length}")));
        }
        Ok(Self {
            nx,
            length,
            dx: length / nx as f64,
        })
    }

    /// Cell containing `x`, for `x` in `[0, L)`.
    #[inline]
    pub fn cell_of(&self, x: f64) -> usize {
        ((x / self.dx) as usize).min(self.nx - 1)
    }

    pub fn cell_bounds(&self, cell: usize) -> (f64, f64) {
        let lo = cell as f64 * self.dx;
        let hi = if cell + 1 == self.nx { self.length } else { (cell + 1) as f64 * self.dx };
        (lo, hi)
    }

    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        let w = x.rem_euclid(self.length);
        // rem_euclid can round up to L itself
        if w >= self.length {
            0.0
        } else {
            w
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        (0.0..self.length).contains(&x)
    }

    pub fn node_position(&self, g: usize) -> f64 {
        g as f64 * self.dx
    }
}
