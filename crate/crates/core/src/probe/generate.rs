//! Test-input generators: compactly supported bumps, band-limited random
//! fields, a catalog of trigonometric forms, and the localized Gaussian
//! ensembles used by the estimate probes.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::form::FormField;
use crate::grid::{GridSpec, Region};
use crate::manufactured::{Expr, ManufacturedForm};
use crate::multi_index::Basis;
use crate::spectral::{fourier_inverse, SpectralField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GeneratorKind {
    /// `exp(-1/(1 - r²/ϱ²))` times a low-degree polynomial per component.
    Bump,
    /// Random Fourier coefficients on `|k_a| ≤ n/4`.
    BandLimitedRandom { seed: u64 },
    /// Entry of [`trig_catalog`].
    TrigCatalog { index: usize },
}

/// A generated field, with its closed form when one exists.
#[derive(Clone, Debug)]
pub struct Manufactured {
    pub field: FormField,
    pub analytic: Option<ManufacturedForm>,
}

/// Largest support radius accepted relative to `L`.
pub const INNER_FRACTION: f64 = 0.5;

pub fn generate_manufactured(kind: GeneratorKind, grid: GridSpec, rank: usize, support: Region) -> Result<Manufactured> {
    let dim = grid.dim();
    let basis = Basis::new(dim, rank)?;
    match kind {
        GeneratorKind::Bump => {
            let radius = match support {
                Region::Ball(r) => r,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "bump generator needs a ball support, got {other:?}"
                    )))
                }
            };
            if radius > INNER_FRACTION * grid.half_length() {
                return Err(Error::SupportTooLarge(format!(
                    "ball of radius {radius} in a box of half-length {}",
                    grid.half_length()
                )));
            }
            let origin = vec![0.0; dim];
            let comps = (0..basis.len())
                .map(|p| {
                    let poly = Expr::sum(vec![Expr::Const(1.0), Expr::Coord(p % dim).scaled(0.5 / radius)]);
                    Expr::product(vec![Expr::bump(&origin, radius), poly])
                })
                .collect();
            let m = ManufacturedForm::new(dim, rank, comps)?;
            Ok(Manufactured {
                field: m.sample(&grid)?,
                analytic: Some(m),
            })
        }
        GeneratorKind::BandLimitedRandom { seed } => {
            ensure_full(support)?;
            Ok(Manufactured {
                field: band_limited_random(grid, rank, seed)?,
                analytic: None,
            })
        }
        GeneratorKind::TrigCatalog { index } => {
            ensure_full(support)?;
            let m = trig_catalog(dim, rank, grid.half_length(), index)?;
            Ok(Manufactured {
                field: m.sample(&grid)?,
                analytic: Some(m),
            })
        }
    }
}

fn ensure_full(support: Region) -> Result<()> {
    match support {
        Region::Full => Ok(()),
        other => Err(Error::InvalidArgument(format!(
            "periodic generators cover the whole box, got support {other:?}"
        ))),
    }
}

/// Real random field whose Fourier modes satisfy `|k_a| ≤ n/4` on every axis.
pub fn band_limited_random(grid: GridSpec, rank: usize, seed: u64) -> Result<FormField> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let size = Basis::new(grid.dim(), rank)?.len();
    let cutoff = (grid.points() / 4) as i64;
    let inside: Vec<bool> = (0..grid.len())
        .map(|node| (0..grid.dim()).all(|a| grid.frequency_integer(grid.index_along(node, a)).abs() <= cutoff))
        .collect();
    let comps = (0..size)
        .map(|_| {
            inside
                .iter()
                .map(|&keep| {
                    let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    if keep {
                        v
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    let hat = SpectralField::from_coefficients(FormField::from_components(grid, rank, comps)?);
    // Real part keeps the band limit (the mirror mode k -> -k stays inside).
    Ok(fourier_inverse(&hat).real_part())
}

/// Number of entries in the trig catalog.
pub const TRIG_CATALOG_LEN: usize = 4;

/// Band-limited closed-form forms whose wave numbers are multiples of `π/L`.
/// Entry `k` uses wave numbers up to `k + 1`.
pub fn trig_catalog(dim: usize, rank: usize, half_length: f64, index: usize) -> Result<ManufacturedForm> {
    if index >= TRIG_CATALOG_LEN {
        return Err(Error::InvalidArgument(format!(
            "trig catalog has {TRIG_CATALOG_LEN} entries, asked for {index}"
        )));
    }
    let basis = Basis::new(dim, rank)?;
    let base = std::f64::consts::PI / half_length;
    let comps = (0..basis.len())
        .map(|p| {
            let wave: Vec<f64> = (0..dim)
                .map(|a| base * (((p + a + index) % (index + 2)) as f64))
                .collect();
            let second: Vec<f64> = (0..dim)
                .map(|a| if a == p % dim { base * (index + 1) as f64 } else { 0.0 })
                .collect();
            Expr::sum(vec![
                Expr::plane_wave(&wave, 0.3 * (p + 1) as f64, 1.0),
                Expr::plane_wave(&second, -0.2 * index as f64, 0.5),
            ])
        })
        .collect();
    ManufacturedForm::new(dim, rank, comps)
}

/// Sum of two Gaussians per component with centers in `[-spread/2, spread/2]^N`
/// and widths in `[0.6, 0.85]`. With `spread ≤ 1` these are below `1e-11` on
/// the faces of a box of half-length 5.
pub fn random_localized<R: Rng>(dim: usize, rank: usize, rng: &mut R, spread: f64) -> Result<ManufacturedForm> {
    let size = Basis::new(dim, rank)?.len();
    let comps = (0..size)
        .map(|_| {
            Expr::sum(
                (0..2)
                    .map(|_| {
                        let center: Vec<f64> = (0..dim).map(|_| spread * rng.gen_range(-0.5..0.5)).collect();
                        Expr::gaussian(&center, rng.gen_range(0.6..0.85), rng.gen_range(-1.0..1.0))
                    })
                    .collect(),
            )
        })
        .collect();
    ManufacturedForm::new(dim, rank, comps)
}

/// Deterministic family of one Gaussian per component, centred within
/// `0.3·spread` of the origin with widths `spread·[0.55, 0.65]`. `salt`
/// permutes centres and widths between members.
pub fn gaussian_family(dim: usize, rank: usize, salt: usize, spread: f64) -> Result<ManufacturedForm> {
    let basis = Basis::new(dim, rank)?;
    let comps = (0..basis.len())
        .map(|p| {
            let center: Vec<f64> = (0..dim)
                .map(|a| 0.15 * spread * (((p + salt + a) % 5) as f64 - 2.0))
                .collect();
            Expr::gaussian(&center, spread * (0.55 + 0.05 * ((p + salt) % 3) as f64), 1.0 - 0.3 * p as f64)
        })
        .collect();
    ManufacturedForm::new(dim, rank, comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{fourier, partial};
    use rand::SeedableRng;

    #[test]
    fn bump_vanishes_at_the_sphere() {
        let grid = GridSpec::periodic(2, 2.0, 16).unwrap();
        let m = generate_manufactured(GeneratorKind::Bump, grid, 0, Region::Ball(1.0)).unwrap();
        let a = m.analytic.unwrap();
        for x in [[1.0, 0.0], [0.0, -1.0], [0.6, 0.8], [1.2, 0.3]] {
            assert_eq!(a.components()[0].eval(&x), 0.0);
            for axis in 0..2 {
                assert_eq!(a.partial(axis).components()[0].eval(&x), 0.0);
                assert_eq!(a.partial(axis).partial(axis).components()[0].eval(&x), 0.0);
            }
        }
        assert!(a.components()[0].eval(&[0.0, 0.0]) > 0.3);
    }

    #[test]
    fn bump_support_limit() {
        let grid = GridSpec::periodic(2, 2.0, 16).unwrap();
        assert!(matches!(
            generate_manufactured(GeneratorKind::Bump, grid, 1, Region::Ball(1.5)),
            Err(Error::SupportTooLarge(_))
        ));
    }

    #[test]
    fn band_limited_is_reproducible_and_limited() {
        let grid = GridSpec::periodic(2, 2.0, 16).unwrap();
        let kind = GeneratorKind::BandLimitedRandom { seed: 4 };
        let a = generate_manufactured(kind, grid, 1, Region::Full).unwrap().field;
        let b = generate_manufactured(kind, grid, 1, Region::Full).unwrap().field;
        assert_eq!(a, b);
        let hat = fourier(&a).unwrap();
        for c in hat.as_form().components() {
            for (node, v) in c.iter().enumerate() {
                let outside = (0..2).any(|ax| grid.frequency_integer(grid.index_along(node, ax)).abs() > 4);
                if outside {
                    assert!(v.norm() < 1e-12);
                }
            }
        }
        assert!(a.components().iter().flatten().all(|v| v.im == 0.0));
    }

    #[test]
    fn trig_catalog_derivatives_match_spectral() {
        let grid = GridSpec::periodic(3, 2.0, 16).unwrap();
        for index in 0..TRIG_CATALOG_LEN {
            let m = generate_manufactured(GeneratorKind::TrigCatalog { index }, grid, 1, Region::Full).unwrap();
            let a = m.analytic.unwrap();
            for axis in 0..3 {
                let want = a.partial(axis).sample(&grid).unwrap();
                let got = partial(&m.field, axis).unwrap();
                assert!(got.try_sub(&want).unwrap().max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn localized_members_are_negligible_at_the_box_edge() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let m = random_localized(3, 1, &mut rng, 1.0).unwrap();
        let corner = [5.0, 0.0, 0.0];
        for c in m.components() {
            assert!(c.eval(&corner).abs() < 1e-11);
        }
    }
}
