//! Componentwise Fourier transform of forms and the spectrally exact
//! `d`, `δ`, `Δ` obtained from the intertwining relations
//! `F(dE) = i R F(E)`, `F(δE) = i T F(E)`, `F(ΔE) = -|ξ|² F(E)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{apply_r, apply_t, coordinate_field, radius_squared, Coordinates};
use crate::error::{Error, Result};
use crate::fft::{transform, Direction};
use crate::form::FormField;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A form in Fourier space. Node `k` holds frequency `(π/L) · k` in FFT slot
/// order; the transform is unitary so norms carry over unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField(FormField);

impl SpectralField {
    pub fn as_form(&self) -> &FormField {
        &self.0
    }

    pub fn into_form(self) -> FormField {
        self.0
    }

    /// Wraps coefficients already laid out in FFT slot order.
    pub fn from_coefficients(coeffs: FormField) -> Self {
        SpectralField(coeffs)
    }

    pub fn rank(&self) -> usize {
        self.0.rank()
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.l2_norm()
    }

    /// `R_ξ Ê`.
    pub fn apply_r(&self) -> Result<SpectralField> {
        apply_r(&self.0, Coordinates::Frequency).map(SpectralField)
    }

    /// `T_ξ Ê`.
    pub fn apply_t(&self) -> Result<SpectralField> {
        apply_t(&self.0, Coordinates::Frequency).map(SpectralField)
    }

    /// Multiplies every component by the symbol `m(node)`.
    pub fn multiply_symbol(&self, m: impl Fn(usize) -> Complex64 + Sync) -> SpectralField {
        let mut out = self.0.clone();
        out.components_mut().par_iter_mut().for_each(|c| {
            c.iter_mut().enumerate().for_each(|(node, v)| *v *= m(node));
        });
        SpectralField(out)
    }

    pub fn scale(&self, a: Complex64) -> SpectralField {
        SpectralField(self.0.scale(a))
    }

    pub fn hodge_star(&self) -> SpectralField {
        SpectralField(crate::algebra::hodge_star(&self.0))
    }
}

fn ensure_periodic(e: &FormField) -> Result<()> {
    if e.grid().is_periodic() {
        Ok(())
    } else {
        Err(Error::NonPeriodic)
    }
}

/// Unitary componentwise transform.
pub fn fourier(e: &FormField) -> Result<SpectralField> {
    ensure_periodic(e)?;
    let grid = *e.grid();
    let mut out = e.clone();
    out.components_mut()
        .par_iter_mut()
        .for_each(|c| transform(&grid, c, Direction::Forward));
    Ok(SpectralField(out))
}

pub fn fourier_inverse(e: &SpectralField) -> FormField {
    let grid = *e.0.grid();
    let mut out = e.0.clone();
    out.components_mut()
        .par_iter_mut()
        .for_each(|c| transform(&grid, c, Direction::Inverse));
    out
}

/// `∂^α E` with `α[n]` derivatives along axis `n`, via `i^{|α|} ξ^α`.
pub fn partial_multi(e: &FormField, alpha: &[usize]) -> Result<FormField> {
    if alpha.len() != e.dim() {
        return Err(Error::InvalidArgument(format!(
            "multi-index of length {} in dimension {}",
            alpha.len(),
            e.dim()
        )));
    }
    let hat = fourier(e)?;
    Ok(fourier_inverse(&partial_multi_spectral(&hat, alpha)))
}

pub(crate) fn partial_multi_spectral(hat: &SpectralField, alpha: &[usize]) -> SpectralField {
    let grid = *hat.0.grid();
    let symbols: Vec<Vec<f64>> = (0..grid.dim())
        .map(|a| coordinate_field(&grid, Coordinates::Frequency, a))
        .collect();
    let order: usize = alpha.iter().sum();
    let phase = I.powu(order as u32);
    hat.multiply_symbol(|node| {
        let mono: f64 = alpha
            .iter()
            .enumerate()
            .map(|(a, &k)| symbols[a][node].powi(k as i32))
            .product();
        phase * mono
    })
}

/// `∂_n E`.
pub fn partial(e: &FormField, axis: usize) -> Result<FormField> {
    if axis >= e.dim() {
        return Err(Error::AxisOutOfRange {
            axis,
            dim: e.dim(),
        });
    }
    let mut alpha = vec![0; e.dim()];
    alpha[axis] = 1;
    partial_multi(e, &alpha)
}

/// All first partials `[∂_1 E, …, ∂_N E]` from one forward transform.
pub fn gradient(e: &FormField) -> Result<Vec<FormField>> {
    let hat = fourier(e)?;
    Ok((0..e.dim())
        .map(|a| {
            let mut alpha = vec![0; e.dim()];
            alpha[a] = 1;
            fourier_inverse(&partial_multi_spectral(&hat, &alpha))
        })
        .collect())
}

/// `dE = F⁻¹(i R_ξ F E)`.
pub fn exterior_d(e: &FormField) -> Result<FormField> {
    if e.rank() >= e.dim() {
        return Err(Error::RankOverflow {
            rank: e.rank() + 1,
            dim: e.dim(),
        });
    }
    let hat = fourier(e)?;
    Ok(fourier_inverse(&hat.apply_r()?.scale(I)))
}

/// `δE = F⁻¹(i T_ξ F E)`; satisfies `⟨dE, H⟩ = -⟨E, δH⟩`.
pub fn coderivative_delta(e: &FormField) -> Result<FormField> {
    if e.rank() == 0 {
        return Err(Error::RankUnderflow { rank: 0 });
    }
    let hat = fourier(e)?;
    Ok(fourier_inverse(&hat.apply_t()?.scale(I)))
}

/// `dE`, or `None` on top-rank forms where `d` vanishes identically.
pub fn exterior_d_or_none(e: &FormField) -> Result<Option<FormField>> {
    if e.rank() == e.dim() {
        Ok(None)
    } else {
        exterior_d(e).map(Some)
    }
}

/// `δE`, or `None` on 0-forms.
pub fn coderivative_or_none(e: &FormField) -> Result<Option<FormField>> {
    if e.rank() == 0 {
        Ok(None)
    } else {
        coderivative_delta(e).map(Some)
    }
}

/// Componentwise Laplacian `F⁻¹(-|ξ|² F E)`, equal to `dδ + δd`.
pub fn laplacian(e: &FormField) -> Result<FormField> {
    let hat = fourier(e)?;
    let r2 = radius_squared(e.grid(), Coordinates::Frequency);
    Ok(fourier_inverse(
        &hat.multiply_symbol(|node| Complex64::new(-r2[node], 0.0)),
    ))
}

/// `dδE + δdE` with the edge conventions `d = 0` on rank N and `δ = 0` on rank 0.
pub fn hodge_laplacian(e: &FormField) -> Result<FormField> {
    let mut out = FormField::zeros(*e.grid(), e.rank())?;
    if let Some(de) = exterior_d_or_none(e)? {
        out.axpy(Complex64::new(1.0, 0.0), &coderivative_delta(&de)?)?;
    }
    if let Some(dl) = coderivative_or_none(e)? {
        out.axpy(Complex64::new(1.0, 0.0), &exterior_d(&dl)?)?;
    }
    Ok(out)
}

/// `‖(1 + |ξ|²)^{s/2} Ê‖_{L²}`.
pub fn spectral_sobolev_norm(e: &FormField, s: f64) -> Result<f64> {
    let hat = fourier(e)?;
    Ok(spectral_sobolev_norm_of(&hat, s))
}

pub(crate) fn spectral_sobolev_norm_of(hat: &SpectralField, s: f64) -> f64 {
    let r2 = radius_squared(hat.0.grid(), Coordinates::Frequency);
    let weights: Vec<f64> = r2.iter().map(|v| (1.0 + v).powf(s)).collect();
    let sum: f64 = hat
        .0
        .components()
        .iter()
        .map(|c| c.iter().zip(&weights).map(|(v, w)| v.norm_sqr() * w).sum::<f64>())
        .sum();
    (sum * hat.0.grid().cell_volume()).sqrt()
}

/// Both sides of `Σ_n ‖∂_n Φ‖² = ‖dΦ‖² + ‖δΦ‖²` and their relative gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaffneyReport {
    pub gradient_sq: f64,
    pub maxwell_sq: f64,
    pub relative_gap: f64,
}

pub fn gaffney_identity_check(phi: &FormField) -> Result<GaffneyReport> {
    let gradient_sq: f64 = gradient(phi)?.iter().map(|p| p.l2_norm().powi(2)).sum();
    let d_sq = exterior_d_or_none(phi)?.map_or(0.0, |f| f.l2_norm().powi(2));
    let delta_sq = coderivative_or_none(phi)?.map_or(0.0, |f| f.l2_norm().powi(2));
    let maxwell_sq = d_sq + delta_sq;
    let scale = gradient_sq.max(maxwell_sq);
    let relative_gap = if scale == 0.0 {
        0.0
    } else {
        (gradient_sq - maxwell_sq).abs() / scale
    };
    Ok(GaffneyReport {
        gradient_sq,
        maxwell_sq,
        relative_gap,
    })
}
