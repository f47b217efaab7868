//! Regularity-estimate probes. Each ensemble member `E` yields a ratio
//! `‖E‖_{H^{m+1}} / (‖E‖ + ‖dE‖_{H^m} + ‖δεE‖_{H^m})` in the norms of the
//! variant; the report records the sup, the mean and the sup's drift
//! under one grid doubling. The true constants are not computable, so only
//! finiteness and stability are asserted, plus the one bound pinned by
//! the Gaffney identity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::container::{read_media, MediaFile};
use crate::error::{Error, Result};
use crate::form::FormField;
use crate::grid::GridSpec;
use crate::halfspace::{normal_derivative_reconstruct, stokes_pairing_residual_sampled, trace_tangential, HalfGridField};
use crate::manufactured::{Expr, ManufacturedForm};
use crate::media::{multi_indices_of_order, make_transformation, CatalogMedium, DecayClass, MediaSpec, Transformation};
use crate::probe::generate::random_localized;
use crate::probe::report::{aggregate, safe_ratio, Diagnostic, Flag, ProbeParams, ProbeReport, Sample};
use crate::sobolev::{annulus_split_check, weighted_sobolev_norm, NormSpec, DEFAULT_MAX_ORDER};
use crate::spectral::{coderivative_or_none, exterior_d_or_none, fourier, fourier_inverse, partial_multi_spectral};

/// Half-length of the probe box. Members are negligible on its faces.
pub const PROBE_HALF_LENGTH: f64 = 5.0;
/// Allowed relative change of the sup ratio under one grid doubling.
pub const DRIFT_TOLERANCE: f64 = 0.10;
/// Bound implied by the Gaffney identity for `ε = id`, `m = 0`, `s = 0`.
pub const GAFFNEY_PINNED_BOUND: f64 = 1.5;
/// Largest `‖γ_t E‖ / ‖E‖` accepted for half-space members.
pub const TRACE_TOLERANCE: f64 = 1e-10;
/// Sampled `ϑ` for the annulus splitting diagnostic.
pub const ANNULUS_THETAS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

#[derive(Clone, Debug, PartialEq)]
pub enum MediaChoice {
    Identity,
    /// `μ = 1 + e^{-r²}`.
    Scalar,
    /// `ε̂ = ρ^{-τ} M` with the probe's `τ`.
    Algebraic,
    File(MediaFile),
}

impl MediaChoice {
    /// Parses `id`, `scalar`, `algebraic` or `file:PATH`.
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "id" | "identity" => Ok(MediaChoice::Identity),
            "scalar" => Ok(MediaChoice::Scalar),
            "algebraic" => Ok(MediaChoice::Algebraic),
            other => match other.strip_prefix("file:") {
                Some(path) => Ok(MediaChoice::File(read_media(std::io::BufReader::new(std::fs::File::open(path)?))?)),
                None => Err(Error::InvalidArgument(format!(
                    "unknown media '{other}', expected id, scalar, algebraic or file:PATH"
                ))),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            MediaChoice::Identity => "id".into(),
            MediaChoice::Scalar => "scalar".into(),
            MediaChoice::Algebraic => "algebraic".into(),
            MediaChoice::File(f) => format!("file(dim {}, rank {})", f.dim, f.rank),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, MediaChoice::Identity)
    }

    fn decay(&self, tau: Option<f64>) -> DecayClass {
        match self {
            MediaChoice::Identity => DecayClass::None,
            MediaChoice::Scalar => DecayClass::SecondKind(f64::INFINITY),
            MediaChoice::Algebraic => DecayClass::SecondKind(tau.unwrap_or(1.0)),
            MediaChoice::File(f) => f.decay,
        }
    }

    pub fn realize(&self, grid: GridSpec, rank: usize, tau: Option<f64>) -> Result<Transformation> {
        match self {
            MediaChoice::Identity => Transformation::identity(grid, rank),
            MediaChoice::Scalar => make_transformation(grid, rank, CatalogMedium::GaussianScalar.spec(grid.dim(), rank)),
            MediaChoice::Algebraic => {
                let tau = tau.ok_or_else(|| Error::InvalidArgument("algebraic media need --tau".into()))?;
                make_transformation(grid, rank, CatalogMedium::AlgebraicMatrix { tau }.spec(grid.dim(), rank))
            }
            MediaChoice::File(f) => {
                if f.rank != rank {
                    return Err(Error::RankMismatch {
                        expected: rank,
                        found: f.rank,
                    });
                }
                f.to_transformation(grid)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateConfig {
    pub dim: usize,
    pub rank: usize,
    pub order: usize,
    pub weight: f64,
    pub tau: Option<f64>,
    pub media: MediaChoice,
    pub ensemble: usize,
    pub grid: usize,
    pub seed: u64,
}

impl EstimateConfig {
    fn params(&self) -> ProbeParams {
        ProbeParams {
            dim: self.dim,
            rank: Some(self.rank),
            order: Some(self.order),
            weight: Some(self.weight),
            tau: self.tau,
            grid: self.grid,
            refined_grid: Some(2 * self.grid),
            half_length: PROBE_HALF_LENGTH,
            ensemble: Some(self.ensemble),
            seed: self.seed,
            media: Some(self.media.label()),
        }
    }

    fn grids(&self) -> Result<[GridSpec; 2]> {
        if self.rank > self.dim {
            return Err(Error::RankOverflow {
                rank: self.rank,
                dim: self.dim,
            });
        }
        if self.order + 1 > DEFAULT_MAX_ORDER {
            return Err(Error::OrderTooHigh {
                order: self.order + 1,
                max: DEFAULT_MAX_ORDER,
            });
        }
        Ok([
            GridSpec::periodic(self.dim, PROBE_HALF_LENGTH, self.grid)?,
            GridSpec::periodic(self.dim, PROBE_HALF_LENGTH, 2 * self.grid)?,
        ])
    }

    fn media_pair(&self, grids: &[GridSpec; 2]) -> Result<[Transformation; 2]> {
        Ok([
            self.media.realize(grids[0], self.rank, self.tau)?,
            self.media.realize(grids[1], self.rank, self.tau)?,
        ])
    }
}

/// Member `index` of the ensemble for `seed`: its own ChaCha stream.
pub fn ensemble_member(dim: usize, rank: usize, seed: u64, index: usize) -> Result<ManufacturedForm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    random_localized(dim, rank, &mut rng, 1.0)
}

fn norm_or_zero(f: Option<FormField>, spec: &NormSpec) -> Result<f64> {
    f.map_or(Ok(0.0), |f| weighted_sobolev_norm(&f, spec))
}

fn delta_eps(e: &FormField, eps: &Transformation) -> Result<Option<FormField>> {
    coderivative_or_none(&eps.apply(e)?)
}

/// `(lhs, rhs, ratio)` with roman norms: `‖E‖_{H_s^{m+1}}` against
/// `‖E‖_{L²_s} + ‖dE‖_{H_s^m} + ‖δεE‖_{H_s^m}`.
pub fn interior_ratio(e: &FormField, eps: &Transformation, order: usize, s: f64) -> Result<(f64, f64, f64)> {
    let lhs = weighted_sobolev_norm(e, &NormSpec::roman(order + 1, s))?;
    let data = NormSpec::roman(order, s);
    let rhs = e.l2_norm_weighted(s) + norm_or_zero(exterior_d_or_none(e)?, &data)? + norm_or_zero(delta_eps(e, eps)?, &data)?;
    Ok((lhs, rhs, safe_ratio(lhs, rhs)))
}

/// Bold-scale version: `‖E‖_{bold H_s^{m+1}}` against
/// `‖E‖_{L²_s} + ‖dE‖_{bold H_{s+1}^m} + ‖δεE‖_{bold H_{s+1}^m}`.
pub fn weighted_ratio(e: &FormField, eps: &Transformation, order: usize, s: f64) -> Result<(f64, f64, f64)> {
    let lhs = weighted_sobolev_norm(e, &NormSpec::bold(order + 1, s))?;
    let data = NormSpec::bold(order, s + 1.0);
    let rhs = e.l2_norm_weighted(s) + norm_or_zero(exterior_d_or_none(e)?, &data)? + norm_or_zero(delta_eps(e, eps)?, &data)?;
    Ok((lhs, rhs, safe_ratio(lhs, rhs)))
}

type RatioFn = fn(&FormField, &Transformation, usize, f64) -> Result<(f64, f64, f64)>;

fn run_ensemble(cfg: &EstimateConfig, grids: &[GridSpec; 2], eps: &[Transformation; 2], f: RatioFn) -> Result<Vec<Sample>> {
    (0..cfg.ensemble)
        .into_par_iter()
        .map(|index| {
            let m = ensemble_member(cfg.dim, cfg.rank, cfg.seed, index)?;
            let (lhs, rhs, ratio) = f(&m.sample(&grids[0])?, &eps[0], cfg.order, cfg.weight)?;
            let (_, _, refined_ratio) = f(&m.sample(&grids[1])?, &eps[1], cfg.order, cfg.weight)?;
            Ok(Sample {
                index,
                lhs,
                rhs,
                ratio,
                refined_ratio,
            })
        })
        .collect()
}

fn common_flags(report: &mut ProbeReport) {
    let agg = report.aggregates.clone().unwrap_or_default();
    let worst_nonfinite = report
        .samples
        .iter()
        .filter(|s| !(s.ratio.is_finite() && s.refined_ratio.is_finite()))
        .count();
    report.flags.push(Flag::at_most("ratios finite (count of non-finite)", worst_nonfinite as f64, 0.0));
    report.flags.push(Flag::at_most("sup ratio drift under grid doubling", agg.drift, DRIFT_TOLERANCE));
}

pub fn estimate_probe_interior(cfg: &EstimateConfig) -> Result<ProbeReport> {
    let grids = cfg.grids()?;
    let eps = cfg.media_pair(&grids)?;
    let mut report = ProbeReport::new("estimate-interior", cfg.params());
    report.samples = run_ensemble(cfg, &grids, &eps, interior_ratio)?;
    report.aggregates = Some(aggregate(&report.samples));
    common_flags(&mut report);
    let sup = report.aggregates.as_ref().map_or(0.0, |a| a.sup_ratio);
    if cfg.media.is_identity() && cfg.order == 0 && cfg.weight == 0.0 {
        report.flags.push(
            Flag::at_most("sup ratio within the Gaffney-pinned bound", sup, GAFFNEY_PINNED_BOUND)
                .with_note("‖E‖_{H¹}² = ‖E‖² + ‖dE‖² + ‖δE‖² forces ratio ≤ 1"),
        );
    } else {
        report.flags.push(Flag::info("sup ratio", sup));
    }
    Ok(report)
}

pub fn estimate_probe_weighted(cfg: &EstimateConfig) -> Result<ProbeReport> {
    let tau = match cfg.tau {
        Some(t) if t > 0.0 => t,
        other => {
            return Err(Error::InvalidArgument(format!(
                "weighted probe needs decay order τ > 0, got {other:?}"
            )))
        }
    };
    match cfg.media.decay(cfg.tau) {
        DecayClass::None | DecayClass::SecondKind(_) => {}
        DecayClass::FirstKind(_) => {
            return Err(Error::InvalidArgument(
                "weighted probe needs media with second-kind decay".into(),
            ))
        }
    }
    let grids = cfg.grids()?;
    let eps = cfg.media_pair(&grids)?;
    let mut report = ProbeReport::new("estimate-weighted", cfg.params());
    report.samples = run_ensemble(cfg, &grids, &eps, weighted_ratio)?;
    report.aggregates = Some(aggregate(&report.samples));
    common_flags(&mut report);
    report.flags.push(Flag::info("sup ratio", report.aggregates.as_ref().map_or(0.0, |a| a.sup_ratio)));

    // Annulus splitting on E and dE of every member, per ϑ: worst lhs / rhs.
    let worst: Vec<Vec<f64>> = (0..cfg.ensemble)
        .into_par_iter()
        .map(|index| -> Result<Vec<f64>> {
            let e = ensemble_member(cfg.dim, cfg.rank, cfg.seed, index)?.sample(&grids[0])?;
            let de = exterior_d_or_none(&e)?;
            ANNULUS_THETAS
                .iter()
                .map(|&theta| {
                    let mut w = annulus_ratio(&e, cfg.weight, tau, theta)?;
                    if let Some(de) = &de {
                        w = w.max(annulus_ratio(de, cfg.weight + 1.0, tau, theta)?);
                    }
                    Ok(w)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let per_theta: Vec<f64> = (0..ANNULUS_THETAS.len())
        .map(|k| worst.iter().map(|w| w[k]).fold(0.0, f64::max))
        .collect();
    report.diagnostics.push(Diagnostic {
        name: "annulus split thetas".into(),
        values: ANNULUS_THETAS.to_vec(),
    });
    report.diagnostics.push(Diagnostic {
        name: "annulus split worst lhs/rhs".into(),
        values: per_theta.clone(),
    });
    let overall = per_theta.iter().copied().fold(0.0, f64::max);
    report.flags.push(Flag::at_most("annulus split holds (worst lhs/rhs)", overall, 1.0 + 1e-12));
    Ok(report)
}

fn annulus_ratio(f: &FormField, s: f64, tau: f64, theta: f64) -> Result<f64> {
    let r = annulus_split_check(f, s, tau, theta)?;
    Ok(safe_ratio(r.lhs, r.rhs))
}

/// `(Σ_{|α|≤k} ‖∂^α F‖²_{half})^{1/2}` for a smooth full-box field, derivatives spectral.
fn half_sobolev_norm(f: &FormField, order: usize) -> Result<f64> {
    if order == 0 {
        return HalfGridField::restrict(f).map(|h| h.l2_norm());
    }
    let hat = fourier(f)?;
    let mut total = 0.0;
    for k in 0..=order {
        for alpha in multi_indices_of_order(f.dim(), k) {
            let d = if k == 0 {
                f.clone()
            } else {
                fourier_inverse(&partial_multi_spectral(&hat, &alpha))
            };
            total += HalfGridField::restrict(&d)?.l2_norm().powi(2);
        }
    }
    Ok(total.sqrt())
}

/// Member of the half-space ensemble: tangential components odd in `x_N`
/// and normal components even, so `γ_t E = 0`.
pub fn halfspace_member(dim: usize, rank: usize, seed: u64, index: usize) -> Result<ManufacturedForm> {
    Ok(ensemble_member(dim, rank, seed, index)?.symmetrize_normal(-1.0, 1.0))
}

/// Per-member half-space quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfspaceEvaluation {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub trace_ratio: f64,
}

/// Ratio `‖E‖_{H^{m+1}(half)} / (‖E‖ + ‖dE‖_{H^m(half)} + ‖δεE‖_{H^m(half)})`
/// for a full-box field whose restriction is the member. Fails with
/// `TraceNotZero` when `γ_t E` does not vanish.
pub fn halfspace_evaluate(full: &FormField, eps: &Transformation, order: usize) -> Result<HalfspaceEvaluation> {
    let half = HalfGridField::restrict(full)?;
    let norm = half.l2_norm();
    let trace_norm = if full.rank() < full.dim() {
        trace_tangential(&half)?.l2_norm()
    } else {
        0.0
    };
    let trace_ratio = safe_ratio(trace_norm, norm);
    if trace_ratio > TRACE_TOLERANCE {
        return Err(Error::TraceNotZero { trace_norm, norm });
    }
    let lhs = half_sobolev_norm(full, order + 1)?;
    let rhs = norm
        + exterior_d_or_none(full)?.map_or(Ok(0.0), |f| half_sobolev_norm(&f, order))?
        + delta_eps(full, eps)?.map_or(Ok(0.0), |f| half_sobolev_norm(&f, order))?;
    Ok(HalfspaceEvaluation {
        lhs,
        rhs,
        ratio: safe_ratio(lhs, rhs),
        trace_ratio,
    })
}

/// Relative error of `∂_N E` recovered from `dE`, `δεE` and the tangential
/// partials on the half grid. All inputs and the reference come from closed
/// forms, so the residual isolates the reconstruction from the resolution
/// of `εE`, which for algebraic media is only exponentially accurate at
/// rate `exp(-π/h)`.
pub fn reconstruction_error(m: &ManufacturedForm, eps: &Transformation, grid: GridSpec) -> Result<f64> {
    let entries = eps
        .analytic_entries()
        .ok_or_else(|| Error::InvalidArgument("reconstruction check needs a closed-form medium".into()))?;
    let (dim, rank) = (m.dim(), m.rank());
    let size = m.basis().len();
    let eps_m = ManufacturedForm::new(
        dim,
        rank,
        (0..size)
            .map(|r| Expr::sum((0..size).map(|c| Expr::product(vec![entries[r * size + c].clone(), m.components()[c].clone()])).collect()))
            .collect(),
    )?;
    let e = HalfGridField::sample(m, grid)?;
    let de = (rank < dim).then(|| m.exterior_d().and_then(|f| HalfGridField::sample(&f, grid))).transpose()?;
    let dee = (rank > 0).then(|| eps_m.coderivative().and_then(|f| HalfGridField::sample(&f, grid))).transpose()?;
    let tangential: Vec<HalfGridField> = (0..dim - 1).map(|j| HalfGridField::sample(&m.partial(j), grid)).collect::<Result<_>>()?;
    let got = normal_derivative_reconstruct(&e, de.as_ref(), dee.as_ref(), eps, &tangential)?;
    let want = HalfGridField::sample(&m.partial(dim - 1), grid)?;
    Ok(safe_ratio(got[dim - 1].try_sub(&want)?.max_abs(), want.max_abs()))
}

pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-8;

pub fn halfspace_probe(cfg: &EstimateConfig) -> Result<ProbeReport> {
    if cfg.dim < 2 {
        return Err(Error::InvalidGrid("the half-space probe needs N ≥ 2".into()));
    }
    if cfg.grid % 4 != 0 {
        return Err(Error::InvalidGrid(format!(
            "the half-space probe needs n divisible by 4, got {}",
            cfg.grid
        )));
    }
    let grids = cfg.grids()?;
    let eps = cfg.media_pair(&grids)?;
    if eps[0].analytic_entries().is_none() {
        return Err(Error::InvalidArgument(
            "the half-space probe needs closed-form media (id, scalar or algebraic)".into(),
        ));
    }
    let partner_rank = cfg.rank + 1;
    let rows: Vec<(Sample, HalfspaceEvaluation, f64, Option<f64>)> = (0..cfg.ensemble)
        .into_par_iter()
        .map(|index| {
            let m = halfspace_member(cfg.dim, cfg.rank, cfg.seed, index)?;
            let base_field = m.sample(&grids[0])?;
            let base = halfspace_evaluate(&base_field, &eps[0], cfg.order)?;
            let fine = halfspace_evaluate(&m.sample(&grids[1])?, &eps[1], cfg.order)?;
            let rec = reconstruction_error(&m, &eps[1], grids[1])?;
            let stokes = if partner_rank <= cfg.dim {
                let h = halfspace_member(cfg.dim, partner_rank, cfg.seed ^ 0x5bd1_e995, index)?.sample(&grids[0])?;
                let r = stokes_pairing_residual_sampled(&base_field, &h)?;
                Some(safe_ratio(r.residual, r.volume.abs().max(r.boundary.abs()).max(1.0)))
            } else {
                None
            };
            let sample = Sample {
                index,
                lhs: base.lhs,
                rhs: base.rhs,
                ratio: base.ratio,
                refined_ratio: fine.ratio,
            };
            let worst = HalfspaceEvaluation {
                trace_ratio: base.trace_ratio.max(fine.trace_ratio),
                ..base
            };
            Ok((sample, worst, rec, stokes))
        })
        .collect::<Result<_>>()?;
    let mut report = ProbeReport::new("estimate-halfspace", cfg.params());
    report.samples = rows.iter().map(|r| r.0.clone()).collect();
    report.aggregates = Some(aggregate(&report.samples));
    common_flags(&mut report);
    let sup = report.aggregates.as_ref().map_or(0.0, |a| a.sup_ratio);
    if cfg.media.is_identity() && cfg.order == 0 {
        report.flags.push(
            Flag::at_most("sup ratio within the Gaffney-pinned bound", sup, GAFFNEY_PINNED_BOUND)
                .with_note("flat boundary with γ_t E = 0: ‖∇E‖² = ‖dE‖² + ‖δE‖²"),
        );
    } else {
        report.flags.push(Flag::info("sup ratio", sup));
    }
    let worst_trace = rows.iter().map(|r| r.1.trace_ratio).fold(0.0, f64::max);
    report.flags.push(Flag::at_most("tangential trace vanishes (‖γ_t E‖/‖E‖)", worst_trace, TRACE_TOLERANCE));
    let worst_rec = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    report.flags.push(Flag::at_most("normal-derivative reconstruction (refined grid)", worst_rec, RECONSTRUCTION_TOLERANCE));
    let stokes: Vec<f64> = rows.iter().filter_map(|r| r.3).collect();
    if !stokes.is_empty() {
        let worst = stokes.iter().copied().fold(0.0, f64::max);
        report.flags.push(
            Flag::info("Stokes residual with γ_t E = 0 (base grid)", worst).with_note(
                "relative to max(|volume|, |boundary|, 1); quadrature-limited on probe grids, asserted in the identity suite",
            ),
        );
    }
    Ok(report)
}

/// Medium spec for ad-hoc use outside the CLI.
pub fn catalog_spec(medium: CatalogMedium, dim: usize, rank: usize) -> MediaSpec {
    medium.spec(dim, rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn cfg(dim: usize, rank: usize, order: usize, weight: f64, media: MediaChoice) -> EstimateConfig {
        EstimateConfig {
            dim,
            rank,
            order,
            weight,
            tau: Some(1.0),
            media,
            ensemble: 6,
            grid: 32,
            seed: 3,
        }
    }

    #[test]
    fn identity_interior_probe_is_gaffney_pinned() {
        for rank in 0..=2 {
            let r = estimate_probe_interior(&cfg(2, rank, 0, 0.0, MediaChoice::Identity)).unwrap();
            assert!(r.passed(), "{:#?}", r.flags);
            assert!(r.aggregates.unwrap().sup_ratio <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn constant_fields_have_ratio_one() {
        let grid = GridSpec::periodic(2, 2.0, 8).unwrap();
        let e = FormField::from_fn(grid, 1, |c, _| Complex64::new(1.0 + c as f64, 0.0)).unwrap();
        let (_, _, ratio) = interior_ratio(&e, &Transformation::identity(grid, 1).unwrap(), 0, 0.0).unwrap();
        assert!((ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_ratios_are_zero() {
        let grid = GridSpec::periodic(2, 2.0, 8).unwrap();
        let e = FormField::zeros(grid, 1).unwrap();
        let eps = Transformation::identity(grid, 1).unwrap();
        assert_eq!(interior_ratio(&e, &eps, 1, 1.0).unwrap().2, 0.0);
        assert_eq!(weighted_ratio(&e, &eps, 1, 1.0).unwrap().2, 0.0);
    }

    #[test]
    fn scalar_media_probe_is_stable() {
        let r = estimate_probe_interior(&cfg(2, 1, 1, -1.0, MediaChoice::Scalar)).unwrap();
        assert!(r.passed(), "{:#?}", r.flags);
    }

    #[test]
    fn weighted_probe_rejects_nonpositive_tau() {
        let mut c = cfg(2, 1, 0, 0.0, MediaChoice::Identity);
        c.tau = Some(0.0);
        assert!(matches!(estimate_probe_weighted(&c), Err(Error::InvalidArgument(_))));
        c.tau = None;
        assert!(estimate_probe_weighted(&c).is_err());
    }

    #[test]
    fn weighted_probe_runs() {
        let r = estimate_probe_weighted(&cfg(2, 1, 0, 0.5, MediaChoice::Algebraic)).unwrap();
        assert!(r.passed(), "{:#?}", r.flags);
        assert_eq!(r.diagnostics[1].values.len(), ANNULUS_THETAS.len());
    }

    #[test]
    fn probes_are_deterministic() {
        let c = cfg(2, 1, 0, 1.0, MediaChoice::Scalar);
        let a = estimate_probe_weighted(&c).unwrap().to_json().unwrap();
        let b = estimate_probe_weighted(&c).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn halfspace_probe_covers_edge_ranks() {
        for rank in [0, 1, 2] {
            let r = halfspace_probe(&cfg(2, rank, 0, 0.0, MediaChoice::Identity)).unwrap();
            assert!(r.passed(), "q={rank} {:#?}", r.flags);
        }
        let r = halfspace_probe(&cfg(2, 1, 1, 0.0, MediaChoice::Scalar)).unwrap();
        assert!(r.passed(), "{:#?}", r.flags);
    }

    #[test]
    fn reconstruction_is_exact_for_algebraic_media() {
        let grid = GridSpec::periodic(2, PROBE_HALF_LENGTH, 32).unwrap();
        for rank in 0..=2 {
            let eps = MediaChoice::Algebraic.realize(grid, rank, Some(1.0)).unwrap();
            let m = halfspace_member(2, rank, 4, 0).unwrap();
            assert!(reconstruction_error(&m, &eps, grid).unwrap() < 1e-12);
        }
    }

    #[test]
    fn halfspace_rejects_nonzero_trace() {
        let grid = GridSpec::periodic(2, PROBE_HALF_LENGTH, 16).unwrap();
        let m = ensemble_member(2, 1, 1, 0).unwrap();
        let err = halfspace_evaluate(&m.sample(&grid).unwrap(), &Transformation::identity(grid, 1).unwrap(), 0);
        assert!(matches!(err, Err(Error::TraceNotZero { .. })));
    }
}
