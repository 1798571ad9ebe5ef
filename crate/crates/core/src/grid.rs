//! Periodic uniform grids in one or two dimensions with the centered
//! wavenumber layout used by the pseudospectral transforms.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Mesh spacing h; nodes are lo + j h for j = 0..points-1 (hi excluded,
    /// identified with lo by periodicity).
    pub fn spacing(&self) -> f64 {
        self.length() / self.points as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.lo + self.spacing() * j as f64
    }

    /// Centered wavenumber for FFT bin l: 2 pi sigma(l) / L with
    /// sigma(l) = l for l < points/2, else l - points.
    pub fn wavenumber(&self, l: usize) -> f64 {
        let m = self.points;
        let sigma = if l < m / 2 { l as isize } else { l as isize - m as isize };
        2.0 * std::f64::consts::PI * sigma as f64 / self.length()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGrid {
    axes: Vec<Axis>,
}

impl PeriodicGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::Grid(format!("{} axes; 1 or 2 supported", axes.len())));
        }
        for (k, ax) in axes.iter().enumerate() {
            if !ax.lo.is_finite() || !ax.hi.is_finite() || ax.lo >= ax.hi {
                return Err(Error::Grid(format!(
                    "axis {k} bounds ({}, {}) must be finite with lo < hi",
                    ax.lo, ax.hi
                )));
            }
            if ax.points < 4 || ax.points % 2 != 0 {
                return Err(Error::Grid(format!(
                    "axis {k} has {} points; need an even count >= 4",
                    ax.points
                )));
            }
        }
        Ok(PeriodicGrid { axes })
    }

    pub fn line(lo: f64, hi: f64, points: usize) -> Result<Self> {
        Self::new(vec![Axis { lo, hi, points }])
    }

    pub fn square(lo: f64, hi: f64, points_per_axis: usize) -> Result<Self> {
        Self::new(vec![
            Axis { lo, hi, points: points_per_axis },
            Axis { lo, hi, points: points_per_axis },
        ])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    /// Volume of one mesh cell (h in 1D, h0*h1 in 2D).
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    /// Split a flat node (or mode) index into per-axis indices. Flat order is
    /// row-major with axis 0 outermost.
    pub fn split_index(&self, flat: usize) -> [usize; 2] {
        match self.axes.len() {
            1 => [flat, 0],
            _ => {
                let m1 = self.axes[1].points;
                [flat / m1, flat % m1]
            }
        }
    }

    /// Physical coordinates of a flat node index; the second entry is 0 in 1D.
    pub fn node_coords(&self, flat: usize) -> [f64; 2] {
        let ij = self.split_index(flat);
        match self.axes.len() {
            1 => [self.axes[0].node(ij[0]), 0.0],
            _ => [self.axes[0].node(ij[0]), self.axes[1].node(ij[1])],
        }
    }

    /// Wavenumber vector of a flat mode index; the second entry is 0 in 1D.
    pub fn mode_wavenumbers(&self, flat: usize) -> [f64; 2] {
        let ij = self.split_index(flat);
        match self.axes.len() {
            1 => [self.axes[0].wavenumber(ij[0]), 0.0],
            _ => [
                self.axes[0].wavenumber(ij[0]),
                self.axes[1].wavenumber(ij[1]),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_axes() {
        assert!(PeriodicGrid::line(0.0, 0.0, 8).is_err());
        assert!(PeriodicGrid::line(0.0, 1.0, 7).is_err());
        assert!(PeriodicGrid::line(0.0, 1.0, 2).is_err());
        assert!(PeriodicGrid::line(f64::NAN, 1.0, 8).is_err());
    }

    #[test]
    fn wavenumbers_centered() {
        let g = PeriodicGrid::line(-1.0, 1.0, 8).unwrap();
        // L = 2, so the fundamental is pi.
        let expect = [0.0, PI, 2.0 * PI, 3.0 * PI, -4.0 * PI, -3.0 * PI, -2.0 * PI, -PI];
        for (l, &w) in expect.iter().enumerate() {
            assert!((g.axis(0).wavenumber(l) - w).abs() < 1e-12, "bin {l}");
        }
    }

    #[test]
    fn flat_index_round_trip_2d() {
        let g = PeriodicGrid::square(-2.0, 2.0, 8).unwrap();
        assert_eq!(g.node_count(), 64);
        let ij = g.split_index(8 * 3 + 5);
        assert_eq!(ij, [3, 5]);
        let x = g.node_coords(8 * 3 + 5);
        assert!((x[0] - (-2.0 + 0.5 * 3.0)).abs() < 1e-12);
        assert!((x[1] - (-2.0 + 0.5 * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn cell_volume_2d() {
        let g = PeriodicGrid::square(-8.0, 8.0, 128).unwrap();
        assert!((g.cell_volume() - 0.125 * 0.125).abs() < 1e-15);
    }
}
