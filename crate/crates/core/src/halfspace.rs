//! The half-space model domain `{x_N < 0}` inside the periodic box: mirror
//! extensions, shifts and difference quotients, traces, the Stokes pairing
//! and the recovery of normal derivatives from `dE` and `δεE`.
//!
//! A half-grid keeps the planes `k_N = 0..=n/2` of the full grid; plane
//! `n/2` is the boundary `x_N = 0` and plane `0` is `x_N = -L`, which the
//! periodic box identifies with `x_N = +L`.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::form::{FormField, ScalarField};
use crate::grid::GridSpec;
use crate::manufactured::{Expr, ManufacturedForm};
use crate::media::{normal_positions, roll_node, solve_block, Transformation};
use crate::multi_index::{binomial, parity_sign, shuffle_sign, Basis, MultiIndex};
use crate::spectral;

/// A rank-q form on the lower half of a full periodic grid, boundary plane included.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfGridField {
    grid: GridSpec,
    basis: Basis,
    components: Vec<ScalarField>,
}

/// Number of stored planes along `x_N`.
fn planes(grid: &GridSpec) -> usize {
    grid.points() / 2 + 1
}

fn half_len(grid: &GridSpec) -> usize {
    grid.len() / grid.points() * planes(grid)
}

fn ensure_halfspace_grid(grid: &GridSpec) -> Result<()> {
    if grid.dim() < 2 {
        return Err(Error::InvalidGrid(
            "the half-space model needs dimension at least 2".into(),
        ));
    }
    if !grid.is_periodic() {
        return Err(Error::NonPeriodic);
    }
    Ok(())
}

impl HalfGridField {
    pub fn zeros(grid: GridSpec, rank: usize) -> Result<Self> {
        ensure_halfspace_grid(&grid)?;
        let basis = Basis::new(grid.dim(), rank)?;
        let components = vec![vec![Complex64::new(0.0, 0.0); half_len(&grid)]; basis.len()];
        Ok(HalfGridField {
            grid,
            basis,
            components,
        })
    }

    pub fn from_components(grid: GridSpec, rank: usize, components: Vec<ScalarField>) -> Result<Self> {
        let mut out = Self::zeros(grid, rank)?;
        if components.len() != out.basis.len() || components.iter().any(|c| c.len() != half_len(&grid)) {
            return Err(Error::GridMismatch(format!(
                "expected {} components of {} half-grid nodes",
                out.basis.len(),
                half_len(&grid)
            )));
        }
        out.components = components;
        Ok(out)
    }

    /// Builds a field from `f(component position, node position)`.
    pub fn from_fn(grid: GridSpec, rank: usize, f: impl Fn(usize, &[f64]) -> Complex64) -> Result<Self> {
        let mut out = Self::zeros(grid, rank)?;
        let positions: Vec<Vec<f64>> = (0..out.len()).map(|h| out.position(h)).collect();
        for (c, comp) in out.components.iter_mut().enumerate() {
            for (v, x) in comp.iter_mut().zip(&positions) {
                *v = f(c, x);
            }
        }
        Ok(out)
    }

    /// Samples a closed-form form at the half-grid nodes.
    pub fn sample(m: &ManufacturedForm, grid: GridSpec) -> Result<Self> {
        if m.dim() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "form of dimension {} on a {}-dimensional grid",
                m.dim(),
                grid.dim()
            )));
        }
        let exprs = m.components();
        Self::from_fn(grid, m.rank(), |c, x| Complex64::new(exprs[c].eval(x), 0.0))
    }

    /// Restriction of a full-grid form.
    pub fn restrict(e: &FormField) -> Result<Self> {
        let grid = *e.grid();
        let mut out = Self::zeros(grid, e.rank())?;
        for (dst, src) in out.components.iter_mut().zip(e.components()) {
            for (h, v) in dst.iter_mut().enumerate() {
                *v = src[full_node(&grid, h)];
            }
        }
        Ok(out)
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

    pub fn len(&self) -> usize {
        half_len(&self.grid)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Plane index `k_N` of a half-grid node.
    pub fn plane_of(&self, node: usize) -> usize {
        node % planes(&self.grid)
    }

    pub fn position(&self, node: usize) -> Vec<f64> {
        self.grid.position(full_node(&self.grid, node))
    }

    pub fn fiber(&self, node: usize) -> Vec<Complex64> {
        self.components.iter().map(|c| c[node]).collect()
    }

    pub fn set_fiber(&mut self, node: usize, values: &[Complex64]) {
        for (c, v) in self.components.iter_mut().zip(values) {
            c[node] = *v;
        }
    }

    pub fn ensure_compatible(&self, other: &HalfGridField) -> Result<()> {
        self.grid.ensure_same(&other.grid)?;
        if self.rank() != other.rank() {
            return Err(Error::RankMismatch {
                expected: self.rank(),
                found: other.rank(),
            });
        }
        Ok(())
    }

    pub fn try_sub(&self, other: &HalfGridField) -> Result<HalfGridField> {
        self.ensure_compatible(other)?;
        let mut out = self.clone();
        for (a, b) in out.components.iter_mut().zip(&other.components) {
            for (x, y) in a.iter_mut().zip(b) {
                *x -= y;
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Trapezoid weights in `x_N` (half weight on the first and boundary planes)
    /// times `h^N`. With them `‖S_d E‖² = 2‖E‖²` holds exactly.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        plane_weights(&self.grid, Quadrature::Trapezoid)
    }

    pub fn l2_inner(&self, other: &HalfGridField) -> Result<Complex64> {
        self.inner_with(other, Quadrature::Trapezoid)
    }

    pub fn l2_norm(&self) -> f64 {
        let w = self.quadrature_weights();
        let sum: f64 = self
            .components
            .iter()
            .map(|c| c.iter().zip(&w).map(|(v, wt)| v.norm_sqr() * wt).sum::<f64>())
            .sum();
        sum.sqrt()
    }

    fn inner_with(&self, other: &HalfGridField, rule: Quadrature) -> Result<Complex64> {
        self.ensure_compatible(other)?;
        let w = plane_weights(&self.grid, rule);
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.components.iter().zip(&other.components) {
            for ((x, y), wt) in a.iter().zip(b).zip(&w) {
                acc += x * y.conj() * wt;
            }
        }
        Ok(acc)
    }

    /// Fiberwise Hodge star.
    pub fn hodge_star(&self) -> HalfGridField {
        let dim = self.dim();
        let out_basis = Basis::new(dim, dim - self.rank()).expect("rank <= dim");
        let mut comps: Vec<ScalarField> = vec![Vec::new(); out_basis.len()];
        for (p, &i) in self.basis.indices().iter().enumerate() {
            let ic = i.complement(dim);
            let sign = shuffle_sign(i, ic).expect("complements are disjoint");
            let pc = out_basis.position(ic).expect("complement has rank N-q");
            comps[pc] = self.components[p].iter().map(|v| v * sign).collect();
        }
        HalfGridField {
            grid: self.grid,
            basis: out_basis,
            components: comps,
        }
    }

    fn scale(&self, a: f64) -> HalfGridField {
        let mut out = self.clone();
        out.components
            .iter_mut()
            .flat_map(|c| c.iter_mut())
            .for_each(|v| *v *= a);
        out
    }

    /// Shift by `step` along a tangential axis (`axis < N - 1`).
    pub fn shift_tangential(&self, axis: usize, step: f64) -> Result<HalfGridField> {
        self.check_tangential_axis(axis)?;
        let steps = self.grid.steps_for(step)?;
        let mut out = self.clone();
        for (dst, src) in out.components.iter_mut().zip(&self.components) {
            for (h, v) in dst.iter_mut().enumerate() {
                let full = roll_node(&self.grid, full_node(&self.grid, h), axis, steps);
                *v = src[half_node(&self.grid, full)];
            }
        }
        Ok(out)
    }

    /// `δ_h^* E = (τ_h^* E - E) / h` along a tangential axis.
    pub fn diff_quotient_tangential(&self, axis: usize, step: f64) -> Result<HalfGridField> {
        let shifted = self.shift_tangential(axis, step)?;
        Ok(shifted.try_sub(self)?.scale(step.recip()))
    }

    fn check_tangential_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim() {
            return Err(Error::AxisOutOfRange { axis, dim: self.dim() });
        }
        if axis == self.dim() - 1 {
            return Err(Error::NormalAxisShift);
        }
        Ok(())
    }

    /// Spectral `∂_j` for every tangential axis `j < N - 1`, plane by plane.
    pub fn tangential_partials(&self) -> Result<Vec<HalfGridField>> {
        let bgrid = self.grid.boundary()?;
        let p = planes(&self.grid);
        let mut out = vec![self.clone(); self.dim() - 1];
        for (c, comp) in self.components.iter().enumerate() {
            for k in 0..p {
                let plane: Vec<Complex64> = (0..bgrid.len()).map(|b| comp[b * p + k]).collect();
                let f = FormField::from_components(bgrid, 0, vec![plane])?;
                for (axis, dst) in spectral::gradient(&f)?.into_iter().enumerate() {
                    for (b, v) in dst.components()[0].iter().enumerate() {
                        out[axis].components[c][b * p + k] = *v;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Full-grid node of a half-grid node.
fn full_node(grid: &GridSpec, h: usize) -> usize {
    let p = planes(grid);
    (h / p) * grid.points() + h % p
}

/// Half-grid node of a full-grid node with `k_N ≤ n/2`.
fn half_node(grid: &GridSpec, full: usize) -> usize {
    let n = grid.points();
    (full / n) * planes(grid) + full % n
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Quadrature {
    Trapezoid,
    /// Composite Simpson in `x_N`; needs an even number of intervals.
    Simpson,
}

fn plane_weights(grid: &GridSpec, rule: Quadrature) -> Vec<f64> {
    let p = planes(grid);
    let last = p - 1;
    let h = grid.spacing();
    let tangential = h.powi(grid.dim() as i32 - 1);
    let per_plane: Vec<f64> = (0..p)
        .map(|k| match rule {
            Quadrature::Trapezoid => {
                if k == 0 || k == last {
                    0.5 * h
                } else {
                    h
                }
            }
            Quadrature::Simpson => {
                if k == 0 || k == last {
                    h / 3.0
                } else if k % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                }
            }
        })
        .collect();
    (0..half_len(grid)).map(|node| tangential * per_plane[node % p]).collect()
}

/// Sign of component `I` under `S_d`: `-1` iff `N ∈ I`.
fn sd_sign(i: MultiIndex, normal_axis: usize) -> f64 {
    if i.contains(normal_axis) {
        -1.0
    } else {
        1.0
    }
}

/// `S_d E`: `E` below the plane and `τ^*E` above, so `(S_dE)_I` is even in
/// `x_N` for `N ∉ I` and odd for `N ∈ I`.
pub fn mirror_sd(e: &HalfGridField) -> FormField {
    let grid = *e.grid();
    let n = grid.points();
    let axis = grid.dim() - 1;
    let mut out = FormField::zeros(grid, e.rank()).expect("valid rank");
    for (p, &i) in e.basis().indices().iter().enumerate() {
        let sign = sd_sign(i, axis);
        let src = &e.components()[p];
        let dst = &mut out.components_mut()[p];
        for (full, v) in dst.iter_mut().enumerate() {
            let k = full % n;
            *v = if k <= n / 2 {
                src[half_node(&grid, full)]
            } else {
                sign * src[half_node(&grid, full - k + (n - k))]
            };
        }
    }
    out
}

/// `S_δ = (-1)^{q(N-q)} ⋆ S_d ⋆`: tangential components odd, normal even.
pub fn mirror_sdelta(e: &HalfGridField) -> FormField {
    let q = e.rank();
    let dim = e.dim();
    let inner = mirror_sd(&e.hodge_star());
    &crate::algebra::hodge_star(&inner) * parity_sign(q * (dim - q))
}

/// `τ_h^* E` for a grid-aligned `step` along `axis`.
pub fn shift(e: &FormField, axis: usize, step: f64) -> Result<FormField> {
    if axis >= e.dim() {
        return Err(Error::AxisOutOfRange { axis, dim: e.dim() });
    }
    let grid = *e.grid();
    let steps = grid.steps_for(step)?;
    let mut out = e.clone();
    for (dst, src) in out.components_mut().iter_mut().zip(e.components()) {
        for (node, v) in dst.iter_mut().enumerate() {
            *v = src[roll_node(&grid, node, axis, steps)];
        }
    }
    Ok(out)
}

/// `δ_h^* E = (τ_h^* E - E) / h`.
pub fn diff_quotient(e: &FormField, axis: usize, step: f64) -> Result<FormField> {
    let shifted = shift(e, axis, step)?;
    Ok(&shifted.try_sub(e)? * step.recip())
}

/// A rank-q form on the boundary plane `x_N = 0`, with the `C(N-1, q)`
/// components whose index omits `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryForm {
    grid: GridSpec,
    rank: usize,
    components: Vec<ScalarField>,
}

impl BoundaryForm {
    pub fn new(grid: GridSpec, rank: usize, components: Vec<ScalarField>) -> Result<Self> {
        if components.len() != binomial(grid.dim(), rank) || components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch(format!(
                "boundary rank-{rank} form needs {} components of {} nodes",
                binomial(grid.dim(), rank),
                grid.len()
            )));
        }
        Ok(BoundaryForm {
            grid,
            rank,
            components,
        })
    }

    pub fn from_form(f: FormField) -> Self {
        BoundaryForm {
            grid: *f.grid(),
            rank: f.rank(),
            components: f.into_components(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    /// As a form on the (N-1)-dimensional grid; fails when `q > N - 1`.
    pub fn to_form(&self) -> Result<FormField> {
        FormField::from_components(self.grid, self.rank, self.components.clone())
    }

    pub fn l2_inner(&self, other: &BoundaryForm) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        if self.rank != other.rank {
            return Err(Error::RankMismatch {
                expected: self.rank,
                found: other.rank,
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.components.iter().zip(&other.components) {
            acc += a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>();
        }
        Ok(acc * self.grid.cell_volume())
    }

    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self
            .components
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v.norm_sqr())
            .sum();
        (sum * self.grid.cell_volume()).sqrt()
    }
}

/// Star on the boundary plane with the orientation it inherits as the
/// boundary of `{x_N < 0}` (outward normal `+e_N` first), which is
/// `(-1)^{N-1}` times the standard orientation of `R^{N-1}`.
pub fn boundary_star(b: &BoundaryForm) -> BoundaryForm {
    let dim = b.grid.dim();
    let orientation = parity_sign(dim);
    let out_rank = dim - b.rank;
    let src = Basis::new(dim, b.rank).expect("rank <= dim");
    let dst = Basis::new(dim, out_rank).expect("rank <= dim");
    let mut comps: Vec<ScalarField> = vec![Vec::new(); dst.len()];
    for (p, &i) in src.indices().iter().enumerate() {
        let ic = i.complement(dim);
        let sign = orientation * shuffle_sign(i, ic).expect("disjoint");
        comps[dst.position(ic).expect("rank")] = b.components[p].iter().map(|v| v * sign).collect();
    }
    BoundaryForm {
        grid: b.grid,
        rank: out_rank,
        components: comps,
    }
}

/// `γ_t E`: the components with `N ∉ I` on the plane `x_N = 0`.
pub fn trace_tangential(e: &HalfGridField) -> Result<BoundaryForm> {
    let grid = *e.grid();
    let bgrid = grid.boundary()?;
    let p = planes(&grid);
    let axis = grid.dim() - 1;
    let comps = e
        .basis()
        .indices()
        .iter()
        .zip(e.components())
        .filter(|(i, _)| !i.contains(axis))
        .map(|(_, c)| (0..bgrid.len()).map(|b| c[b * p + p - 1]).collect())
        .collect();
    BoundaryForm::new(bgrid, e.rank(), comps)
}

/// `γ_n E = (-1)^{(q-1)N} ⋆_∂ γ_t ⋆ E`. Equals `(-1)^{q-1} E_{I+N}` on the plane.
pub fn trace_normal(e: &HalfGridField) -> Result<BoundaryForm> {
    let q = e.rank();
    if q == 0 {
        return Err(Error::RankUnderflow { rank: 0 });
    }
    let t = trace_tangential(&e.hodge_star())?;
    let mut out = boundary_star(&t);
    let sign = parity_sign((q - 1) * e.dim());
    out.components
        .iter_mut()
        .flat_map(|c| c.iter_mut())
        .for_each(|v| *v *= sign);
    Ok(out)
}

/// Right inverse of `γ_t`: the boundary form extended constantly in `x_N`
/// and cut off by `exp(-x_N² / width²)`.
pub fn extend_tangential(b: &BoundaryForm, grid: GridSpec, width: f64) -> Result<HalfGridField> {
    grid.boundary()?.ensure_same(b.grid())?;
    let mut out = HalfGridField::zeros(grid, b.rank())?;
    let axis = grid.dim() - 1;
    let p = planes(&grid);
    let tangential: Vec<usize> = out
        .basis()
        .indices()
        .iter()
        .enumerate()
        .filter(|(_, i)| !i.contains(axis))
        .map(|(pos, _)| pos)
        .collect();
    for (src, &pos) in b.components().iter().zip(&tangential) {
        let dst = &mut out.components[pos];
        for (h, v) in dst.iter_mut().enumerate() {
            let xn = grid.coordinate_of_index(h % p);
            *v = src[h / p] * (-(xn * xn) / (width * width)).exp();
        }
    }
    Ok(out)
}

/// Terms of `⟨dE, H⟩ + ⟨E, δH⟩ = ⟨γ_t E, γ_n H⟩` on the lower half-space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StokesReport {
    pub points: usize,
    pub volume: f64,
    pub boundary: f64,
    pub residual: f64,
    /// Largest `|E|, |H|` on the box faces relative to their maxima.
    pub edge_ratio: f64,
}

/// Relative edge magnitude above which wrap-around pollutes the pairing.
const EDGE_TOLERANCE: f64 = 1e-9;

/// Stokes residual for closed-form `E` (rank q) and `H` (rank q+1).
/// Derivatives are analytic; the volume integral uses the periodic rule in
/// the tangential directions and composite Simpson in `x_N`, so `n` must
/// be a multiple of 4.
pub fn stokes_pairing_residual(e: &ManufacturedForm, h: &ManufacturedForm, grid: GridSpec) -> Result<StokesReport> {
    ensure_halfspace_grid(&grid)?;
    if grid.points() % 4 != 0 {
        return Err(Error::InvalidGrid(format!(
            "Simpson rule in x_N needs n divisible by 4, got {}",
            grid.points()
        )));
    }
    if h.rank() != e.rank() + 1 {
        return Err(Error::RankMismatch {
            expected: e.rank() + 1,
            found: h.rank(),
        });
    }
    let ef = HalfGridField::sample(e, grid)?;
    let hf = HalfGridField::sample(h, grid)?;
    let de = HalfGridField::sample(&e.exterior_d()?, grid)?;
    let dh = HalfGridField::sample(&h.coderivative()?, grid)?;
    stokes_from_samples(&ef, &hf, &de, &dh)
}

/// Same pairing for smooth full-box fields, with `dE` and `δH` spectral.
pub fn stokes_pairing_residual_sampled(e: &FormField, h: &FormField) -> Result<StokesReport> {
    let grid = *e.grid();
    ensure_halfspace_grid(&grid)?;
    if grid.points() % 4 != 0 {
        return Err(Error::InvalidGrid(format!(
            "Simpson rule in x_N needs n divisible by 4, got {}",
            grid.points()
        )));
    }
    if h.rank() != e.rank() + 1 {
        return Err(Error::RankMismatch {
            expected: e.rank() + 1,
            found: h.rank(),
        });
    }
    let de = HalfGridField::restrict(&spectral::exterior_d(e)?)?;
    let dh = HalfGridField::restrict(&spectral::coderivative_delta(h)?)?;
    stokes_from_samples(&HalfGridField::restrict(e)?, &HalfGridField::restrict(h)?, &de, &dh)
}

fn stokes_from_samples(ef: &HalfGridField, hf: &HalfGridField, de: &HalfGridField, dh: &HalfGridField) -> Result<StokesReport> {
    let grid = *ef.grid();
    let volume = de.inner_with(hf, Quadrature::Simpson)? + ef.inner_with(dh, Quadrature::Simpson)?;
    let boundary = if ef.rank() < grid.dim() {
        trace_tangential(ef)?.l2_inner(&trace_normal(hf)?)?
    } else {
        Complex64::new(0.0, 0.0)
    };
    let edge_ratio = edge_ratio(ef).max(edge_ratio(hf));
    if edge_ratio > EDGE_TOLERANCE {
        return Err(Error::SupportTooLarge(format!(
            "field reaches {edge_ratio:.2e} of its maximum on the box faces"
        )));
    }
    Ok(StokesReport {
        points: grid.points(),
        volume: volume.re,
        boundary: boundary.re,
        residual: (volume - boundary).norm(),
        edge_ratio,
    })
}

fn edge_ratio(f: &HalfGridField) -> f64 {
    let max = f.max_abs();
    if max == 0.0 {
        return 0.0;
    }
    let grid = f.grid();
    let n = grid.points();
    let mut edge = 0.0f64;
    for node in 0..f.len() {
        let idx = grid.unravel(full_node(grid, node));
        let on_face = idx[..grid.dim() - 1].iter().any(|&k| k == 0) || idx[grid.dim() - 1] == 0;
        if on_face || idx.iter().any(|&k| k == n - 1) {
            for c in f.components() {
                edge = edge.max(c[node].norm());
            }
        }
    }
    edge / max
}

/// All first partials `[∂_1 E, …, ∂_N E]` of `E` on the half-grid, with
/// `∂_N E` recovered from `dE`, `δεE` and the tangential partials:
///
/// * `N ∉ I`, `K = I + N`: `∂_N E_I = (-1)^q [(dE)_K - Σ_{j∈I} (-1)^{pos_K(j)} ∂_j E_{K-j}]`
/// * `N ∈ I`, `L = I - N`: `∂_N (εE)_I = (-1)^{q-1} [(δεE)_L - Σ_{j∉I} σ(j, L) ∂_j (εE)_{L+j}]`
///
/// and finally `∂_N E^ρ` from `∂_N(εE)^ρ = ((∂_N ε) E)^ρ + (ε ∂_N E)^ρ`.
/// `ε` must carry closed-form entries. The sign bookkeeping is checked once
/// per process against an analytic rank-1 case.
pub fn normal_derivative_reconstruct(
    e: &HalfGridField,
    de: Option<&HalfGridField>,
    delta_eps_e: Option<&HalfGridField>,
    eps: &Transformation,
    tangential_partials: &[HalfGridField],
) -> Result<Vec<HalfGridField>> {
    static SELF_CHECK: OnceLock<std::result::Result<(), f64>> = OnceLock::new();
    SELF_CHECK
        .get_or_init(sign_self_check)
        .map_err(|residual| Error::SignSelfCheck { residual })?;
    reconstruct_unchecked(e, de, delta_eps_e, eps, tangential_partials)
}

fn sign_self_check() -> std::result::Result<(), f64> {
    let run = || -> Result<f64> {
        let grid = GridSpec::periodic(2, 2.0, 8)?;
        let w = std::f64::consts::PI / grid.half_length();
        let m = ManufacturedForm::new(2, 1, vec![Expr::plane_wave(&[0.0, w], 0.0, 1.0), Expr::plane_wave(&[w, w], 0.3, 0.5)])?;
        let e = HalfGridField::sample(&m, grid)?;
        let de = HalfGridField::sample(&m.exterior_d()?, grid)?;
        let delta = HalfGridField::sample(&m.coderivative()?, grid)?;
        let eps = Transformation::identity(grid, 1)?;
        let tangential = vec![HalfGridField::sample(&m.partial(0), grid)?];
        let got = reconstruct_unchecked(&e, Some(&de), Some(&delta), &eps, &tangential)?;
        let want = HalfGridField::sample(&m.partial(1), grid)?;
        Ok(got[1].try_sub(&want)?.max_abs())
    };
    match run() {
        Ok(r) if r < 1e-12 => Ok(()),
        Ok(r) => Err(r),
        Err(_) => Err(f64::NAN),
    }
}

fn reconstruct_unchecked(
    e: &HalfGridField,
    de: Option<&HalfGridField>,
    delta_eps_e: Option<&HalfGridField>,
    eps: &Transformation,
    tangential_partials: &[HalfGridField],
) -> Result<Vec<HalfGridField>> {
    let grid = *e.grid();
    let dim = grid.dim();
    let q = e.rank();
    let normal = dim - 1;
    eps.grid().ensure_same(&grid)?;
    if eps.rank() != q {
        return Err(Error::RankMismatch {
            expected: q,
            found: eps.rank(),
        });
    }
    if tangential_partials.len() != dim - 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {} tangential partials, got {}",
            dim - 1,
            tangential_partials.len()
        )));
    }
    for t in tangential_partials {
        t.ensure_compatible(e)?;
    }
    let entries = eps.analytic_entries().ok_or_else(|| {
        Error::InvalidArgument("normal-derivative recovery needs closed-form media".into())
    })?;
    let basis = e.basis().clone();
    let size = basis.len();
    let positions: Vec<Vec<f64>> = (0..e.len()).map(|h| e.position(h)).collect();
    let eval_matrix = |exprs: &[Expr]| -> Vec<Vec<f64>> {
        positions
            .iter()
            .map(|x| exprs.iter().map(|ex| ex.eval(x)).collect())
            .collect()
    };
    let apply = |m: &[Vec<f64>], f: &HalfGridField| -> HalfGridField {
        let mut out = f.clone();
        for (node, mat) in m.iter().enumerate() {
            let fib = f.fiber(node);
            let v: Vec<Complex64> = (0..size)
                .map(|r| (0..size).map(|c| mat[r * size + c] * fib[c]).sum())
                .collect();
            out.set_fiber(node, &v);
        }
        out
    };
    let eps_nodes = eval_matrix(entries);
    // ∂_j(εE) = (∂_j ε) E + ε ∂_j E on tangential axes.
    let tangential_eps: Vec<HalfGridField> = tangential_partials
        .iter()
        .enumerate()
        .map(|(j, dj)| {
            let dj_eps: Vec<Expr> = entries.iter().map(|ex| ex.partial(j)).collect();
            let mut out = apply(&eval_matrix(&dj_eps), e);
            let second = apply(&eps_nodes, dj);
            for (a, b) in out.components.iter_mut().zip(&second.components) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
            out
        })
        .collect();

    let mut dn_e = HalfGridField::zeros(grid, q)?;
    let mut dn_eps_e = HalfGridField::zeros(grid, q)?;
    for (p, &i) in basis.indices().iter().enumerate() {
        if !i.contains(normal) {
            let de = de.ok_or_else(|| Error::InvalidArgument("dE is required for rank < N".into()))?;
            let k = i.with(normal);
            let kp = de.basis().position(k).expect("rank q+1");
            let mut acc = de.components[kp].clone();
            for j in i.axes() {
                let sign = shuffle_sign(MultiIndex::single(j), k.without(j)).expect("disjoint");
                let src = basis.position(k.without(j)).expect("rank q");
                for (a, v) in acc.iter_mut().zip(&tangential_partials[j].components[src]) {
                    *a -= sign * v;
                }
            }
            let outer = parity_sign(q);
            dn_e.components[p] = acc.into_iter().map(|v| v * outer).collect();
        } else {
            let delta = delta_eps_e.ok_or_else(|| Error::InvalidArgument("δεE is required for rank > 0".into()))?;
            let l = i.without(normal);
            let lp = delta.basis().position(l).expect("rank q-1");
            let mut acc = delta.components[lp].clone();
            for j in (0..normal).filter(|&j| !l.contains(j)) {
                let sign = shuffle_sign(MultiIndex::single(j), l).expect("disjoint");
                let src = basis.position(l.with(j)).expect("rank q");
                for (a, v) in acc.iter_mut().zip(&tangential_eps[j].components[src]) {
                    *a -= sign * v;
                }
            }
            let outer = parity_sign(q - 1);
            dn_eps_e.components[p] = acc.into_iter().map(|v| v * outer).collect();
        }
    }

    // G^ρ = ∂_N(εE)^ρ - ((∂_N ε) E)^ρ, then ε^{ρρ} ∂_N E^ρ = G^ρ - (ε ∂_N E^τ)^ρ.
    let dn_eps: Vec<Expr> = entries.iter().map(|ex| ex.partial(normal)).collect();
    let correction = apply(&eval_matrix(&dn_eps), e);
    let g_rho = dn_eps_e.try_sub(&correction)?;
    let solved = reconstruct_on_half(&dn_e, &g_rho, &eps_nodes)?;

    let mut out: Vec<HalfGridField> = tangential_partials.to_vec();
    out.push(solved);
    Ok(out)
}

/// Nodewise split reconstruction on half-grid data: keeps `tau`'s
/// tangential components and solves `ε^{ρρ} X^ρ = G^ρ - (ε X^τ)^ρ`.
fn reconstruct_on_half(tau: &HalfGridField, g_rho: &HalfGridField, eps_nodes: &[Vec<f64>]) -> Result<HalfGridField> {
    let size = tau.basis().len();
    let rho = normal_positions(tau.basis());
    let mut out = tau.clone();
    for &p in &rho {
        out.components[p].iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    }
    if rho.is_empty() {
        return Ok(out);
    }
    for (node, a) in eps_nodes.iter().enumerate() {
        let x_tau = out.fiber(node);
        let rhs: Vec<Complex64> = rho
            .iter()
            .map(|&r| {
                let coupling: Complex64 = (0..size).map(|c| a[r * size + c] * x_tau[c]).sum();
                g_rho.components[r][node] - coupling
            })
            .collect();
        let x = solve_block(a, size, &rho, &rhs, node)?;
        for (k, &p) in rho.iter().enumerate() {
            out.components[p][node] = x[k];
        }
    }
    Ok(out)
}
