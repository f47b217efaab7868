//! Rank-q alternating forms sampled on a grid.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::multi_index::{Basis, MultiIndex};

pub type ScalarField = Vec<Complex64>;

/// A complex-valued rank-q form `Σ_I E_I dx^I` on a grid.
///
/// Holds exactly `C(N, q)` component fields in lexicographic multi-index
/// order, each of length `n^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    grid: GridSpec,
    basis: Basis,
    components: Vec<ScalarField>,
}

impl FormField {
    pub fn zeros(grid: GridSpec, rank: usize) -> Result<Self> {
        let basis = Basis::new(grid.dim(), rank)?;
        let components = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; basis.len()];
        Ok(FormField {
            grid,
            basis,
            components,
        })
    }

    pub fn from_components(grid: GridSpec, rank: usize, components: Vec<ScalarField>) -> Result<Self> {
        let basis = Basis::new(grid.dim(), rank)?;
        if components.len() != basis.len() {
            return Err(Error::InvalidArgument(format!(
                "rank-{rank} form in dimension {} needs {} components, got {}",
                grid.dim(),
                basis.len(),
                components.len()
            )));
        }
        if let Some(bad) = components.iter().find(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch(format!(
                "component of length {} on a grid of {} nodes",
                bad.len(),
                grid.len()
            )));
        }
        Ok(FormField {
            grid,
            basis,
            components,
        })
    }

    /// Builds a form from `f(component position, node)`.
    pub fn from_fn(
        grid: GridSpec,
        rank: usize,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self> {
        let mut out = Self::zeros(grid, rank)?;
        for (c, comp) in out.components.iter_mut().enumerate() {
            for (node, v) in comp.iter_mut().enumerate() {
                *v = f(c, node);
            }
        }
        Ok(out)
    }

    /// Rank-0 form from real nodal values.
    pub fn scalar(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::from_fn(grid, 0, |_, node| Complex64::new(f(&grid.position(node)), 0.0))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.components
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    pub fn component(&self, index: MultiIndex) -> Option<&ScalarField> {
        self.basis.position(index).map(|p| &self.components[p])
    }

    pub fn component_mut(&mut self, index: MultiIndex) -> Option<&mut ScalarField> {
        self.basis.position(index).map(move |p| &mut self.components[p])
    }

    /// Component vector `(E_I)_I` at one node.
    pub fn fiber(&self, node: usize) -> Vec<Complex64> {
        self.components.iter().map(|c| c[node]).collect()
    }

    pub fn set_fiber(&mut self, node: usize, values: &[Complex64]) {
        for (c, v) in self.components.iter_mut().zip(values) {
            c[node] = *v;
        }
    }

    pub fn ensure_compatible(&self, other: &FormField) -> Result<()> {
        self.grid.ensure_same(&other.grid)?;
        if self.rank() != other.rank() {
            return Err(Error::RankMismatch {
                expected: self.rank(),
                found: other.rank(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> FormField {
        let mut out = self.clone();
        out.components
            .iter_mut()
            .flat_map(|c| c.iter_mut())
            .for_each(|v| *v = f(*v));
        out
    }

    /// Pointwise multiplication by the real scalar field `w(node)`.
    pub fn multiply_by(&self, w: impl Fn(usize) -> f64) -> FormField {
        let weights: Vec<f64> = (0..self.grid.len()).map(w).collect();
        let mut out = self.clone();
        for comp in out.components.iter_mut() {
            for (v, &wt) in comp.iter_mut().zip(&weights) {
                *v *= wt;
            }
        }
        out
    }

    pub fn scale(&self, a: Complex64) -> FormField {
        self.map(|v| v * a)
    }

    pub fn axpy(&mut self, a: Complex64, x: &FormField) -> Result<()> {
        self.ensure_compatible(x)?;
        for (c, xc) in self.components.iter_mut().zip(&x.components) {
            for (v, xv) in c.iter_mut().zip(xc) {
                *v += a * xv;
            }
        }
        Ok(())
    }

    pub fn try_add(&self, other: &FormField) -> Result<FormField> {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn try_sub(&self, other: &FormField) -> Result<FormField> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn real_part(&self) -> FormField {
        self.map(|v| Complex64::new(v.re, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Weighted L² inner product `∫ ρ^{2s} Σ_I E_I conj(H_I)`, by the plain
    /// grid sum times `h^N` (the trapezoid rule on the periodic box).
    pub fn l2_inner(&self, other: &FormField, weight: f64) -> Result<Complex64> {
        self.ensure_compatible(other)?;
        let rho2s = weight_powers(&self.grid, 2.0 * weight);
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.components.iter().zip(&other.components) {
            acc += match &rho2s {
                None => a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>(),
                Some(w) => a
                    .iter()
                    .zip(b)
                    .zip(w)
                    .map(|((x, y), wt)| x * y.conj() * wt)
                    .sum::<Complex64>(),
            };
        }
        Ok(acc * self.grid.cell_volume())
    }

    /// `‖E‖_{L²_s}`.
    pub fn l2_norm_weighted(&self, weight: f64) -> f64 {
        let rho2s = weight_powers(&self.grid, 2.0 * weight);
        let sum: f64 = self
            .components
            .iter()
            .map(|c| match &rho2s {
                None => c.iter().map(|v| v.norm_sqr()).sum::<f64>(),
                Some(w) => c.iter().zip(w).map(|(v, wt)| v.norm_sqr() * wt).sum::<f64>(),
            })
            .sum();
        (sum * self.grid.cell_volume()).sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_weighted(0.0)
    }
}

/// `ρ^p` on every node, or `None` for `p == 0`.
pub(crate) fn weight_powers(grid: &GridSpec, p: f64) -> Option<Vec<f64>> {
    if p == 0.0 {
        return None;
    }
    Some(
        (0..grid.len())
            .map(|node| {
                let r2: f64 = (0..grid.dim()).map(|a| grid.coordinate(node, a).powi(2)).sum();
                (1.0 + r2).powf(0.5 * p)
            })
            .collect(),
    )
}

/// Free-function form of [`FormField::l2_inner`].
pub fn l2_inner(e: &FormField, h: &FormField, weight: f64) -> Result<Complex64> {
    e.l2_inner(h, weight)
}

impl Add for &FormField {
    type Output = FormField;
    /// Panics on incompatible operands; use [`FormField::try_add`] otherwise.
    fn add(self, rhs: &FormField) -> FormField {
        self.try_add(rhs).expect("incompatible forms")
    }
}

impl Sub for &FormField {
    type Output = FormField;
    fn sub(self, rhs: &FormField) -> FormField {
        self.try_sub(rhs).expect("incompatible forms")
    }
}

impl Neg for &FormField {
    type Output = FormField;
    fn neg(self) -> FormField {
        self.map(|v| -v)
    }
}

impl Mul<f64> for &FormField {
    type Output = FormField;
    fn mul(self, rhs: f64) -> FormField {
        self.map(|v| v * rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_inner_product_is_volume() {
        let g = GridSpec::periodic(2, 1.5, 8).unwrap();
        let one = FormField::scalar(g, |_| 1.0).unwrap();
        let v = one.l2_inner(&one, 0.0).unwrap();
        assert!((v.re - 9.0).abs() < 1e-12);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn distinct_basis_covectors_are_orthogonal() {
        let g = GridSpec::periodic(2, 1.0, 4).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let dx1 = FormField::from_fn(g, 1, |c, _| if c == 0 { one } else { zero }).unwrap();
        let dx2 = FormField::from_fn(g, 1, |c, _| if c == 1 { one } else { zero }).unwrap();
        assert_eq!(dx1.l2_inner(&dx2, 0.0).unwrap(), zero);
    }

    #[test]
    fn component_count_enforced() {
        let g = GridSpec::periodic(3, 1.0, 4).unwrap();
        assert!(FormField::from_components(g, 1, vec![vec![Complex64::default(); 64]; 2]).is_err());
        assert!(FormField::from_components(g, 1, vec![vec![Complex64::default(); 63]; 3]).is_err());
        let f = FormField::zeros(g, 2).unwrap();
        assert_eq!(f.components().len(), 3);
        assert_eq!(FormField::zeros(g, 3).unwrap().components().len(), 1);
    }

    #[test]
    fn mismatched_inner_product_is_an_error() {
        let g = GridSpec::periodic(2, 1.0, 4).unwrap();
        let a = FormField::zeros(g, 1).unwrap();
        let b = FormField::zeros(g, 2).unwrap();
        assert!(a.l2_inner(&b, 0.0).is_err());
        let g2 = GridSpec::periodic(2, 1.0, 8).unwrap();
        assert!(a.l2_inner(&FormField::zeros(g2, 1).unwrap(), 0.0).is_err());
    }
}
