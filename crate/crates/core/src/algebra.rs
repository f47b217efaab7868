//! Fiberwise operator algebra: wedge, Hodge star, the radial operators
//! `R = x_n dx^n ∧ ·` and `T = (-1)^{(q-1)N} ⋆ R ⋆`, and the
//! tangential/normal split.
//!
//! Every sign comes from [`shuffle_sign`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::form::{FormField, ScalarField};
use crate::grid::GridSpec;
use crate::multi_index::{parity_sign, shuffle_sign, Basis, MultiIndex};

/// Which coordinate field multiplies `dx^n` in [`apply_r`] / [`apply_t`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coordinates {
    /// Node position `x_n`.
    Position,
    /// Fourier-space symbol `ξ_n` of the node's FFT slot (Nyquist zeroed).
    Frequency,
}

/// Nodal values of coordinate `axis` under the chosen interpretation.
pub fn coordinate_field(grid: &GridSpec, coords: Coordinates, axis: usize) -> Vec<f64> {
    (0..grid.len())
        .map(|node| {
            let k = grid.index_along(node, axis);
            match coords {
                Coordinates::Position => grid.coordinate_of_index(k),
                Coordinates::Frequency => grid.derivative_symbol(k),
            }
        })
        .collect()
}

/// `|x|²` (or `|ξ|²`) at every node.
pub fn radius_squared(grid: &GridSpec, coords: Coordinates) -> Vec<f64> {
    let mut r2 = vec![0.0; grid.len()];
    for axis in 0..grid.dim() {
        for (acc, c) in r2.iter_mut().zip(coordinate_field(grid, coords, axis)) {
            *acc += c * c;
        }
    }
    r2
}

/// `(E ∧ F)_K = Σ_{K = I ⊎ J} sgn(I, J) E_I F_J`, pointwise.
pub fn wedge(e: &FormField, f: &FormField) -> Result<FormField> {
    e.grid().ensure_same(f.grid())?;
    let dim = e.dim();
    let rank = e.rank() + f.rank();
    if rank > dim {
        return Err(Error::RankOverflow { rank, dim });
    }
    let mut out = FormField::zeros(*e.grid(), rank)?;
    for (pi, &i) in e.basis().indices().iter().enumerate() {
        for (pj, &j) in f.basis().indices().iter().enumerate() {
            let Some(sign) = shuffle_sign(i, j) else {
                continue;
            };
            let pk = out.basis().position(i.union(j)).expect("rank matches");
            let (ei, fj) = (&e.components()[pi], &f.components()[pj]);
            let target = &mut out.components_mut()[pk];
            for ((t, a), b) in target.iter_mut().zip(ei).zip(fj) {
                *t += sign * a * b;
            }
        }
    }
    Ok(out)
}

/// `(⋆E)_{I^c} = σ(I, I^c) E_I` for the Euclidean metric and standard orientation.
pub fn hodge_star(e: &FormField) -> FormField {
    let dim = e.dim();
    let out_basis = Basis::new(dim, dim - e.rank()).expect("rank <= dim");
    let mut comps: Vec<ScalarField> = vec![Vec::new(); out_basis.len()];
    for (pi, &i) in e.basis().indices().iter().enumerate() {
        let ic = i.complement(dim);
        let sign = shuffle_sign(i, ic).expect("complements are disjoint");
        let pc = out_basis.position(ic).expect("complement has rank N-q");
        comps[pc] = e.components()[pi].iter().map(|v| v * sign).collect();
    }
    FormField::from_components(*e.grid(), dim - e.rank(), comps).expect("shape preserved")
}

/// `Σ_n c_n(x) dx^n ∧ E` for per-node coefficient fields `coeffs[n]`.
///
/// Shared kernel of [`apply_r`] and of the exterior derivative assembled
/// from partial derivatives.
pub fn wedge_with_covector(e: &FormField, coeffs: &[Vec<f64>]) -> Result<FormField> {
    let dim = e.dim();
    if e.rank() >= dim {
        return Err(Error::RankOverflow {
            rank: e.rank() + 1,
            dim,
        });
    }
    let mut out = FormField::zeros(*e.grid(), e.rank() + 1)?;
    for (pi, &i) in e.basis().indices().iter().enumerate() {
        for (n, c) in coeffs.iter().enumerate() {
            let single = MultiIndex::single(n);
            let Some(sign) = shuffle_sign(single, i) else {
                continue;
            };
            let pk = out.basis().position(i.with(n)).expect("rank q+1");
            let src = &e.components()[pi];
            let target = &mut out.components_mut()[pk];
            for ((t, v), cn) in target.iter_mut().zip(src).zip(c) {
                *t += sign * cn * v;
            }
        }
    }
    Ok(out)
}

/// Same as [`wedge_with_covector`] with complex coefficient fields, used to
/// assemble `Σ_n dx^n ∧ ∂_n E` from precomputed partials.
pub fn sum_wedge_axes(partials: &[FormField]) -> Result<FormField> {
    let first = partials
        .first()
        .ok_or_else(|| Error::InvalidArgument("no partial derivatives".into()))?;
    let dim = first.dim();
    if first.rank() >= dim {
        return Err(Error::RankOverflow {
            rank: first.rank() + 1,
            dim,
        });
    }
    let mut out = FormField::zeros(*first.grid(), first.rank() + 1)?;
    for (n, p) in partials.iter().enumerate() {
        p.ensure_compatible(first)?;
        for (pi, &i) in p.basis().indices().iter().enumerate() {
            let Some(sign) = shuffle_sign(MultiIndex::single(n), i) else {
                continue;
            };
            let pk = out.basis().position(i.with(n)).expect("rank q+1");
            for (t, v) in out.components_mut()[pk].iter_mut().zip(&p.components()[pi]) {
                *t += sign * v;
            }
        }
    }
    Ok(out)
}

/// `Σ_n ι_{e_n} P_n`: contraction of each `P_n` with the n-th unit vector,
/// summed. With `P_n = ∂_n E` this is the co-derivative.
pub fn sum_interior_axes(partials: &[FormField]) -> Result<FormField> {
    let first = partials
        .first()
        .ok_or_else(|| Error::InvalidArgument("no partial derivatives".into()))?;
    if first.rank() == 0 {
        return Err(Error::RankUnderflow { rank: 0 });
    }
    let mut out = FormField::zeros(*first.grid(), first.rank() - 1)?;
    for (n, p) in partials.iter().enumerate() {
        p.ensure_compatible(first)?;
        for (pi, &i) in p.basis().indices().iter().enumerate() {
            if !i.contains(n) {
                continue;
            }
            let rest = i.without(n);
            let sign = shuffle_sign(MultiIndex::single(n), rest).expect("disjoint");
            let pk = out.basis().position(rest).expect("rank q-1");
            for (t, v) in out.components_mut()[pk].iter_mut().zip(&p.components()[pi]) {
                *t += sign * v;
            }
        }
    }
    Ok(out)
}

/// `RE = Σ_n c_n dx^n ∧ E` with `c` the position or frequency coordinates.
pub fn apply_r(e: &FormField, coords: Coordinates) -> Result<FormField> {
    let coeffs: Vec<Vec<f64>> = (0..e.dim())
        .map(|a| coordinate_field(e.grid(), coords, a))
        .collect();
    wedge_with_covector(e, &coeffs)
}

/// `TE = (-1)^{(q-1)N} ⋆ R ⋆ E` for a rank-q form `E`.
pub fn apply_t(e: &FormField, coords: Coordinates) -> Result<FormField> {
    let q = e.rank();
    if q == 0 {
        return Err(Error::RankUnderflow { rank: 0 });
    }
    let sign = parity_sign((q - 1) * e.dim());
    let inner = apply_r(&hodge_star(e), coords)?;
    Ok(&hodge_star(&inner) * sign)
}

/// `(E^τ, E^ρ)`: components with `N ∉ I` and with `N ∈ I`.
pub fn split_tangential_normal(e: &FormField) -> (FormField, FormField) {
    let normal_axis = e.dim() - 1;
    let mut tau = e.clone();
    let mut rho = e.clone();
    for (p, &i) in e.basis().indices().iter().enumerate() {
        let zero = Complex64::new(0.0, 0.0);
        if i.contains(normal_axis) {
            tau.components_mut()[p].iter_mut().for_each(|v| *v = zero);
        } else {
            rho.components_mut()[p].iter_mut().for_each(|v| *v = zero);
        }
    }
    (tau, rho)
}
