//! Box geometry: the uniform grid on `[-L, L)^N` and sub-region masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor grid on the box `[-L, L)^N` with `n` points per axis.
///
/// Nodes are stored row-major with axis 0 slowest. Node `k` along an axis
/// sits at `-L + k h` with `h = 2L / n`, so the origin is node `n / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    half_length: f64,
    points: usize,
    periodic: bool,
}

impl GridSpec {
    pub fn new(dim: usize, half_length: f64, points: usize, periodic: bool) -> Result<Self> {
        if dim == 0 || dim > crate::multi_index::MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {dim} out of range")));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half-length must be positive, got {half_length}"
            )));
        }
        if points < 2 || points % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 2, got {points}"
            )));
        }
        if (points as f64).powi(dim as i32) > 1.0e9 {
            return Err(Error::InvalidGrid("grid too large".into()));
        }
        Ok(GridSpec {
            dim,
            half_length,
            points,
            periodic,
        })
    }

    /// Periodic grid, the default surrogate for the whole space.
    pub fn periodic(dim: usize, half_length: f64, points: usize) -> Result<Self> {
        Self::new(dim, half_length, points, true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    /// Quadrature weight `h^N` of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_length).powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat-index distance between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.dim - 1 - axis) as u32)
    }

    /// Grid index along `axis` of the flat node `node`.
    pub fn index_along(&self, node: usize, axis: usize) -> usize {
        (node / self.stride(axis)) % self.points
    }

    pub fn unravel(&self, node: usize) -> Vec<usize> {
        (0..self.dim).map(|a| self.index_along(node, a)).collect()
    }

    pub fn ravel(&self, index: &[usize]) -> usize {
        index.iter().fold(0, |acc, &k| acc * self.points + k)
    }

    pub fn coordinate_of_index(&self, k: usize) -> f64 {
        -self.half_length + k as f64 * self.spacing()
    }

    pub fn coordinate(&self, node: usize, axis: usize) -> f64 {
        self.coordinate_of_index(self.index_along(node, axis))
    }

    pub fn position(&self, node: usize) -> Vec<f64> {
        (0..self.dim).map(|a| self.coordinate(node, a)).collect()
    }

    pub fn radius(&self, node: usize) -> f64 {
        (0..self.dim)
            .map(|a| self.coordinate(node, a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Signed integer frequency of FFT slot `k` (`-n/2 ..= n/2 - 1`).
    pub fn frequency_integer(&self, k: usize) -> i64 {
        let n = self.points as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Wavenumber `ξ = (π/L) · k` of FFT slot `k`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        std::f64::consts::PI / self.half_length * self.frequency_integer(k) as f64
    }

    /// Fourier symbol of `-i ∂` along one axis: the wavenumber with the
    /// Nyquist slot zeroed, so real fields keep real odd derivatives.
    pub fn derivative_symbol(&self, k: usize) -> f64 {
        if k == self.points / 2 {
            0.0
        } else {
            self.wavenumber(k)
        }
    }

    /// Grid spacing `h = 2L/n` is exact; returns the integer number of
    /// cells in `step`, or an error if `step` is not grid aligned.
    pub fn steps_for(&self, step: f64) -> Result<i64> {
        let h = self.spacing();
        let s = step / h;
        let r = s.round();
        if (s - r).abs() > 1e-9 * s.abs().max(1.0) {
            return Err(Error::NotGridAligned { step, spacing: h });
        }
        Ok(r as i64)
    }

    /// Same box and resolution in one dimension less (the boundary plane).
    pub fn boundary(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim - 1, self.half_length, self.points, self.periodic)
    }

    /// Same box, twice the resolution.
    pub fn refined(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim, self.half_length, self.points * 2, self.periodic)
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Sub-regions of the box used for supports, masks and quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Full,
    /// `|x| < radius`
    Ball(f64),
    /// `x_N < 0`
    HalfSpaceLower,
    /// `inner < |x| < outer`
    Annulus(f64, f64),
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        let r = || x.iter().map(|v| v * v).sum::<f64>().sqrt();
        match *self {
            Region::Full => true,
            Region::Ball(rho) => r() < rho,
            Region::HalfSpaceLower => x.last().is_some_and(|&xn| xn < 0.0),
            Region::Annulus(t, big_t) => {
                let r = r();
                t < r && r < big_t
            }
        }
    }

    pub fn mask(&self, grid: &GridSpec) -> Vec<bool> {
        (0..grid.len())
            .map(|node| self.contains(&grid.position(node)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_and_strides() {
        let g = GridSpec::periodic(3, 2.0, 8).unwrap();
        assert_eq!(g.len(), 512);
        assert_eq!(g.spacing(), 0.5);
        let node = g.ravel(&[4, 0, 7]);
        assert_eq!(g.unravel(node), vec![4, 0, 7]);
        assert_eq!(g.coordinate(node, 0), 0.0);
        assert_eq!(g.coordinate(node, 1), -2.0);
        assert_eq!(g.coordinate(node, 2), 1.5);
        assert_eq!(g.stride(2), 1);
        assert_eq!(g.stride(0), 64);
    }

    #[test]
    fn frequencies() {
        let g = GridSpec::periodic(1, std::f64::consts::PI, 8).unwrap();
        let ints: Vec<i64> = (0..8).map(|k| g.frequency_integer(k)).collect();
        assert_eq!(ints, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.wavenumber(3), 3.0);
        assert_eq!(g.derivative_symbol(4), 0.0);
        assert_eq!(g.wavenumber(4), -4.0);
    }

    #[test]
    fn invalid_grids() {
        assert!(GridSpec::periodic(2, 1.0, 7).is_err());
        assert!(GridSpec::periodic(0, 1.0, 8).is_err());
        assert!(GridSpec::periodic(2, -1.0, 8).is_err());
    }

    #[test]
    fn grid_alignment() {
        let g = GridSpec::periodic(2, 2.0, 16).unwrap();
        assert_eq!(g.steps_for(0.75).unwrap(), 3);
        assert_eq!(g.steps_for(-0.25).unwrap(), -1);
        assert!(g.steps_for(0.3).is_err());
    }

    #[test]
    fn regions() {
        assert!(Region::Ball(1.0).contains(&[0.5, 0.5]));
        assert!(!Region::Ball(1.0).contains(&[1.0, 0.0]));
        assert!(Region::HalfSpaceLower.contains(&[3.0, -0.1]));
        assert!(!Region::HalfSpaceLower.contains(&[3.0, 0.0]));
        assert!(Region::Annulus(1.0, 2.0).contains(&[0.0, 1.5]));
        assert!(!Region::Annulus(1.0, 2.0).contains(&[0.0, 2.5]));
    }
}
