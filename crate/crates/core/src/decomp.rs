//! Whole-space Hodge–Helmholtz splitting on the torus through the Fourier
//! projectors `RT/|ξ|²` and `TR/|ξ|²`, the potential and co-derivative
//! solvers built from them, and an iterative ε-weighted split.
//!
//! Modes with `|ξ| = 0` (the constant mode, and the Nyquist modes whose
//! derivative symbol is zeroed) form the separate mean part.

use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{radius_squared, Coordinates};
use crate::error::{Error, Result};
use crate::form::FormField;
use crate::media::Transformation;
use crate::spectral::{self, fourier, fourier_inverse, SpectralField};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative size above which an input is not accepted as closed, co-closed or mean-free.
pub const PRECONDITION_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct HodgeSplit {
    /// Range of `RT/|ξ|²`: closed, `d` of a potential.
    pub exact_part: FormField,
    /// Range of `TR/|ξ|²`: co-closed.
    pub coexact_part: FormField,
    /// Modes with `|ξ| = 0`.
    pub mean_part: FormField,
}

fn inverse_symbol(grid: &crate::grid::GridSpec) -> Vec<f64> {
    radius_squared(grid, Coordinates::Frequency)
        .into_iter()
        .map(|r2| if r2 > 0.0 { r2.recip() } else { 0.0 })
        .collect()
}

fn mean_mask(hat: &SpectralField) -> SpectralField {
    let r2 = radius_squared(hat.as_form().grid(), Coordinates::Frequency);
    hat.multiply_symbol(|node| Complex64::new(if r2[node] > 0.0 { 0.0 } else { 1.0 }, 0.0))
}

/// `RTÊ/|ξ|²`, zero on the mean modes.
pub fn project_exact_spectral(hat: &SpectralField) -> Result<SpectralField> {
    if hat.rank() == 0 {
        return Ok(hat.scale(Complex64::new(0.0, 0.0)));
    }
    let inv = inverse_symbol(hat.as_form().grid());
    let rt = hat.apply_t()?.apply_r()?;
    Ok(rt.multiply_symbol(|node| Complex64::new(inv[node], 0.0)))
}

/// `TRÊ/|ξ|²`, zero on the mean modes.
pub fn project_coexact_spectral(hat: &SpectralField) -> Result<SpectralField> {
    if hat.rank() == hat.as_form().dim() {
        return Ok(hat.scale(Complex64::new(0.0, 0.0)));
    }
    let inv = inverse_symbol(hat.as_form().grid());
    let tr = hat.apply_r()?.apply_t()?;
    Ok(tr.multiply_symbol(|node| Complex64::new(inv[node], 0.0)))
}

pub fn project_exact(e: &FormField) -> Result<FormField> {
    Ok(fourier_inverse(&project_exact_spectral(&fourier(e)?)?))
}

pub fn project_coexact(e: &FormField) -> Result<FormField> {
    Ok(fourier_inverse(&project_coexact_spectral(&fourier(e)?)?))
}

pub fn project_mean(e: &FormField) -> Result<FormField> {
    Ok(fourier_inverse(&mean_mask(&fourier(e)?)))
}

pub fn hodge_decompose(e: &FormField) -> Result<HodgeSplit> {
    let hat = fourier(e)?;
    Ok(HodgeSplit {
        exact_part: fourier_inverse(&project_exact_spectral(&hat)?),
        coexact_part: fourier_inverse(&project_coexact_spectral(&hat)?),
        mean_part: fourier_inverse(&mean_mask(&hat)),
    })
}

fn relative(part: f64, whole: f64) -> f64 {
    if whole == 0.0 {
        0.0
    } else {
        part / whole
    }
}

/// `Φ = -i F⁻¹(TÊ/|ξ|²)`, so that `dΦ = E` and `δΦ = 0`.
pub fn potential_for_exact(e: &FormField) -> Result<FormField> {
    if e.rank() == 0 {
        return Err(Error::RankUnderflow { rank: 0 });
    }
    let hat = fourier(e)?;
    let norm = hat.l2_norm();
    let mean = relative(mean_mask(&hat).l2_norm(), norm);
    if mean > PRECONDITION_TOLERANCE {
        return Err(Error::NonzeroMean { residual: mean });
    }
    let rest = relative(project_coexact_spectral(&hat)?.l2_norm(), norm);
    if rest > PRECONDITION_TOLERANCE {
        return Err(Error::NotClosed { residual: rest });
    }
    let inv = inverse_symbol(e.grid());
    let phi = hat.apply_t()?.multiply_symbol(|node| -I * inv[node]);
    Ok(fourier_inverse(&phi))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoderivativeSolution {
    #[serde(skip)]
    pub h: FormField,
    /// `‖δH - E‖ / ‖E‖`.
    pub residual: f64,
    /// `‖H‖_{H¹} / ‖E‖`.
    pub h1_ratio: f64,
    /// `‖|ξ| Ĥ‖ / ‖E‖`.
    pub frequency_ratio: f64,
    /// Set when `N < 3`, where the whole-space solver has no integrability guarantee.
    pub outside_hypothesis: bool,
}

/// `H = -i F⁻¹(RÊ/|ξ|²)` for co-closed, mean-free `E`, so that `δH = E`.
pub fn solve_coderivative(e: &FormField) -> Result<CoderivativeSolution> {
    if e.rank() >= e.dim() {
        return Err(Error::RankOverflow {
            rank: e.rank() + 1,
            dim: e.dim(),
        });
    }
    let hat = fourier(e)?;
    let norm = hat.l2_norm();
    let mean = relative(mean_mask(&hat).l2_norm(), norm);
    if mean > PRECONDITION_TOLERANCE {
        return Err(Error::NonzeroMean { residual: mean });
    }
    let rest = relative(project_exact_spectral(&hat)?.l2_norm(), norm);
    if rest > PRECONDITION_TOLERANCE {
        return Err(Error::NotCoclosed { residual: rest });
    }
    let inv = inverse_symbol(e.grid());
    let h_hat = hat.apply_r()?.multiply_symbol(|node| -I * inv[node]);
    let h = fourier_inverse(&h_hat);
    let r2 = radius_squared(e.grid(), Coordinates::Frequency);
    let freq = h_hat.multiply_symbol(|node| Complex64::new(r2[node].sqrt(), 0.0)).l2_norm();
    let residual = relative(spectral::coderivative_delta(&h)?.try_sub(e)?.l2_norm(), e.l2_norm());
    Ok(CoderivativeSolution {
        residual,
        h1_ratio: relative(spectral::spectral_sobolev_norm_of(&h_hat, 1.0), norm),
        frequency_ratio: relative(freq, norm),
        outside_hypothesis: e.dim() < 3,
        h,
    })
}

pub const WEIGHTED_TOLERANCE: f64 = 1e-8;
pub const WEIGHTED_MAX_ITERATIONS: usize = 500;

/// `E = X + Y` with `X` exact and `εY` free of exact modes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedSplit {
    #[serde(skip)]
    pub exact_part: FormField,
    #[serde(skip)]
    pub remainder: FormField,
    pub iterations: usize,
    /// `‖P_ex(εY)‖ / ‖εE‖` at exit.
    pub residual: f64,
    pub converged: bool,
}

/// Richardson iteration `X ← X + ω P_ex(ε(E - X))` from `X = P_ex E`.
/// On the exact range `P_ex ε` has spectrum in `[λ_min, λ_max]`, so
/// `ω = 2/(λ_min + λ_max)` contracts with factor `(κ - 1)/(κ + 1)`.
pub fn weighted_decompose(e: &FormField, eps: &Transformation) -> Result<WeightedSplit> {
    eps.grid().ensure_same(e.grid())?;
    if eps.rank() != e.rank() {
        return Err(Error::RankMismatch {
            expected: e.rank(),
            found: eps.rank(),
        });
    }
    let omega = 2.0 / (eps.positivity() + eps.max_eigenvalue());
    let scale = eps.apply(e)?.l2_norm();
    let mut x = project_exact(e)?;
    let mut iterations = 0;
    let mut residual;
    loop {
        let y = e.try_sub(&x)?;
        let update = project_exact(&eps.apply(&y)?)?;
        residual = relative(update.l2_norm(), scale);
        if residual <= WEIGHTED_TOLERANCE || iterations == WEIGHTED_MAX_ITERATIONS || !residual.is_finite() {
            break;
        }
        x.axpy(Complex64::new(omega, 0.0), &update)?;
        iterations += 1;
    }
    Ok(WeightedSplit {
        remainder: e.try_sub(&x)?,
        exact_part: x,
        iterations,
        converged: residual <= WEIGHTED_TOLERANCE,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::media::random_admissible;
    use crate::multi_index::Basis;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random field with modes up to `n/4` per axis.
    fn band_limited(grid: GridSpec, rank: usize, seed: u64) -> FormField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = Basis::new(grid.dim(), rank).unwrap().len();
        let cutoff = (grid.points() / 4) as i64;
        let comps = (0..size)
            .map(|_| {
                let mut hat = vec![Complex64::new(0.0, 0.0); grid.len()];
                for (node, v) in hat.iter_mut().enumerate() {
                    let inside = (0..grid.dim()).all(|a| grid.frequency_integer(grid.index_along(node, a)).abs() <= cutoff);
                    if inside {
                        *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    }
                }
                hat
            })
            .collect();
        fourier_inverse(&SpectralField::from_coefficients(FormField::from_components(grid, rank, comps).unwrap()))
    }

    fn rel(a: &FormField, b: &FormField) -> f64 {
        a.try_sub(b).unwrap().l2_norm() / b.l2_norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn split_resums_and_parts_are_orthogonal() {
        for dim in 2..=4 {
            let grid = GridSpec::periodic(dim, 2.0, 8).unwrap();
            for rank in 0..=dim {
                let e = band_limited(grid, rank, 11 + rank as u64);
                let s = hodge_decompose(&e).unwrap();
                let sum = s.exact_part.try_add(&s.coexact_part).unwrap().try_add(&s.mean_part).unwrap();
                assert!(rel(&sum, &e) < 1e-12);
                let n2 = e.l2_norm().powi(2);
                assert!(s.exact_part.l2_inner(&s.coexact_part, 0.0).unwrap().norm() < 1e-10 * n2);
                assert!(s.exact_part.l2_inner(&s.mean_part, 0.0).unwrap().norm() < 1e-10 * n2);
                if let Some(d) = spectral::exterior_d_or_none(&s.exact_part).unwrap() {
                    assert!(d.l2_norm() < 1e-10 * e.l2_norm());
                }
                if let Some(d) = spectral::coderivative_or_none(&s.coexact_part).unwrap() {
                    assert!(d.l2_norm() < 1e-10 * e.l2_norm());
                }
            }
        }
    }

    #[test]
    fn projector_algebra() {
        let grid = GridSpec::periodic(3, 2.0, 8).unwrap();
        for rank in 0..=3 {
            let e = band_limited(grid, rank, 3);
            let pe = project_exact(&e).unwrap();
            let pc = project_coexact(&e).unwrap();
            assert!(rel(&project_exact(&pe).unwrap(), &pe) < 1e-12 || pe.l2_norm() == 0.0);
            assert!(rel(&project_coexact(&pc).unwrap(), &pc) < 1e-12 || pc.l2_norm() == 0.0);
            assert!(project_coexact(&pe).unwrap().l2_norm() < 1e-12 * e.l2_norm());
            assert!(project_exact(&pc).unwrap().l2_norm() < 1e-12 * e.l2_norm());
        }
    }

    #[test]
    fn exact_input_is_fixed() {
        let grid = GridSpec::periodic(3, 2.0, 16).unwrap();
        let phi = project_coexact(&band_limited(grid, 1, 5)).unwrap();
        let e = spectral::exterior_d(&phi).unwrap();
        let s = hodge_decompose(&e).unwrap();
        assert!(rel(&s.exact_part, &e) < 1e-12);
        assert!(s.coexact_part.l2_norm() < 1e-12 * e.l2_norm());
        assert!(s.mean_part.l2_norm() < 1e-12 * e.l2_norm());
        // Roundtrip recovers the co-closed mean-free potential.
        assert!(rel(&potential_for_exact(&e).unwrap(), &phi) < 1e-10);
    }

    #[test]
    fn potential_of_a_gradient() {
        let grid = GridSpec::periodic(2, 2.0, 16).unwrap();
        let w = std::f64::consts::PI / 2.0;
        let f = FormField::scalar(grid, |x| (w * x[0]).sin()).unwrap();
        let e = spectral::exterior_d(&f).unwrap();
        let phi = potential_for_exact(&e).unwrap();
        assert!(rel(&phi, &f) < 1e-12);
        let zero = FormField::zeros(grid, 1).unwrap();
        assert_eq!(potential_for_exact(&zero).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn potential_rejects_bad_input() {
        let grid = GridSpec::periodic(2, 2.0, 8).unwrap();
        let e = band_limited(grid, 1, 2);
        assert!(matches!(potential_for_exact(&project_coexact(&e).unwrap()), Err(Error::NotClosed { .. })));
        let c = FormField::from_fn(grid, 1, |_, _| Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(potential_for_exact(&c), Err(Error::NonzeroMean { .. })));
    }

    #[test]
    fn coderivative_solver_on_a_cosine() {
        let grid = GridSpec::periodic(3, 2.0, 16).unwrap();
        let w = std::f64::consts::PI / 2.0;
        let c = FormField::scalar(grid, |x| (w * x[2]).cos()).unwrap();
        let zero = vec![Complex64::new(0.0, 0.0); grid.len()];
        let e = FormField::from_components(grid, 1, vec![c.components()[0].clone(), zero.clone(), zero]).unwrap();
        let sol = solve_coderivative(&e).unwrap();
        assert!(sol.residual < 1e-10);
        assert!(!sol.outside_hypothesis);
        // Gaffney with δH = E.
        let g = spectral::gaffney_identity_check(&sol.h).unwrap();
        let rhs = spectral::exterior_d(&sol.h).unwrap().l2_norm().powi(2) + e.l2_norm().powi(2);
        assert!((g.gradient_sq - rhs).abs() < 1e-8 * rhs);
        let zero_sol = solve_coderivative(&FormField::zeros(grid, 1).unwrap()).unwrap();
        assert_eq!(zero_sol.h.max_abs(), 0.0);
    }

    #[test]
    fn coderivative_solver_rejects_bad_input() {
        let grid = GridSpec::periodic(2, 2.0, 8).unwrap();
        let e = band_limited(grid, 1, 4);
        assert!(matches!(solve_coderivative(&project_exact(&e).unwrap()), Err(Error::NotCoclosed { .. })));
        assert!(matches!(solve_coderivative(&band_limited(grid, 2, 1)), Err(Error::RankOverflow { .. })));
        let ok = solve_coderivative(&project_coexact(&e).unwrap()).unwrap();
        assert!(ok.outside_hypothesis);
        assert!(ok.residual < 1e-10);
    }

    #[test]
    fn weighted_split_converges() {
        let grid = GridSpec::periodic(3, 3.0, 16).unwrap();
        for rank in 1..=2 {
            let eps = random_admissible(grid, rank, 9, 0.5).unwrap();
            let e = band_limited(grid, rank, 21);
            let s = weighted_decompose(&e, &eps).unwrap();
            assert!(s.converged, "{s:?}");
            assert!(project_coexact(&s.exact_part).unwrap().l2_norm() < 1e-10 * e.l2_norm());
            let ey = eps.apply(&s.remainder).unwrap();
            assert!(project_exact(&ey).unwrap().l2_norm() <= 1e-8 * eps.apply(&e).unwrap().l2_norm());
        }
    }

    #[test]
    fn weighted_split_with_identity_is_the_plain_split() {
        let grid = GridSpec::periodic(2, 2.0, 8).unwrap();
        let e = band_limited(grid, 1, 8);
        let s = weighted_decompose(&e, &Transformation::identity(grid, 1).unwrap()).unwrap();
        assert_eq!(s.iterations, 0);
        assert!(rel(&s.exact_part, &project_exact(&e).unwrap()) < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn projectors_sum_to_identity_off_the_mean(dim in 2usize..=4, seed in 0u64..500, rank_pick in 0usize..5) {
            let rank = rank_pick % (dim + 1);
            let grid = GridSpec::periodic(dim, 1.5, 8).unwrap();
            let e = band_limited(grid, rank, seed);
            let mean_free = e.try_sub(&project_mean(&e).unwrap()).unwrap();
            let sum = project_exact(&e).unwrap().try_add(&project_coexact(&e).unwrap()).unwrap();
            prop_assert!(rel(&sum, &mean_free) < 1e-12);
        }
    }
}
