//! Uniform periodic 1-D grid.
//!
//! All fields in this crate live on a `Grid1D`: `n_points` equally spaced
//! samples on `[x_min, x_max)` with the right endpoint identified with the
//! left (periodic boundary conditions, as required by the spectral
//! derivatives and the split-step propagator). Grid sizes are restricted to
//! powers of two for the radix-2 transforms.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    n_points: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
    dk: f64,
}

impl Grid1D {
    pub fn new(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::InvalidParameter {
                name: "n_points",
                reason: format!("must be a power of two >= 8, got {n_points}"),
            });
        }
        if !x_min.is_finite() || !x_max.is_finite() || x_max <= x_min {
            return Err(Error::InvalidParameter {
                name: "x_max",
                reason: format!("domain [{x_min}, {x_max}] is not a finite interval"),
            });
        }
        let length = x_max - x_min;
        Ok(Self {
            n_points,
            x_min,
            x_max,
            dx: length / n_points as f64,
            dk: TAU / length,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Grid spacing (x_max - x_min) / n_points.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Wavenumber spacing 2*pi / (x_max - x_min).
    pub fn dk(&self) -> f64 {
        self.dk
    }

    /// Coordinate of sample `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// All sample coordinates.
    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Largest resolvable wavenumber pi / dx.
    pub fn nyquist(&self) -> f64 {
        PI / self.dx
    }

    /// Wavenumbers in FFT bin order: 0, dk, ..., n/2*dk, -(n/2-1)*dk, ..., -dk.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        (0..n)
            .map(|j| {
                if j <= n / 2 {
                    j as f64 * self.dk
                } else {
                    (j as f64 - n as f64) * self.dk
                }
            })
            .collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Index of the sample nearest to `x` (clamped to the grid).
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx).round();
        (i.max(0.0) as usize).min(self.n_points - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let g = Grid1D::new(1024, -20.0, 20.0).unwrap();
        assert_eq!(g.n_points(), 1024);
        assert!((g.dx() - 40.0 / 1024.0).abs() < 1e-15);
        assert!((g.dk() - TAU / 40.0).abs() < 1e-15);
        assert!((g.nyquist() - PI / g.dx()).abs() < 1e-12);
        assert_eq!(g.xs().len(), 1024);
        assert!((g.x(0) - (-20.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid1D::new(1000, -1.0, 1.0).is_err());
        assert!(Grid1D::new(4, -1.0, 1.0).is_err());
        assert!(Grid1D::new(64, 1.0, 1.0).is_err());
        assert!(Grid1D::new(64, 2.0, -2.0).is_err());
    }

    #[test]
    fn wavenumber_layout() {
        let g = Grid1D::new(8, 0.0, 8.0).unwrap();
        let k = g.wavenumbers();
        let dk = g.dk();
        assert_eq!(k.len(), 8);
        assert!((k[0]).abs() < 1e-15);
        assert!((k[1] - dk).abs() < 1e-15);
        assert!((k[4] - 4.0 * dk).abs() < 1e-15); // Nyquist bin
        assert!((k[5] + 3.0 * dk).abs() < 1e-15);
        assert!((k[7] + dk).abs() < 1e-15);
    }

    #[test]
    fn nearest_index_clamps() {
        let g = Grid1D::new(16, -2.0, 2.0).unwrap();
        assert_eq!(g.nearest_index(-2.0), 0);
        assert_eq!(g.nearest_index(100.0), 15);
        assert_eq!(g.nearest_index(0.0), 8);
    }
}
