//! Weighted Sobolev and graph norms with the weight `ρ = (1 + r²)^{1/2}`.
//!
//! Roman scale weights every derivative by `ρ^s`, bold scale weights
//! `∂^α` by `ρ^{s+|α|}`. Derivatives are spectral, weights are applied on
//! the grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{apply_r, apply_t, Coordinates};
use crate::error::{Error, Result};
use crate::form::{weight_powers, FormField};
use crate::grid::GridSpec;
use crate::media::{multi_indices_of_order, Transformation};
use crate::spectral::{
    coderivative_delta, coderivative_or_none, exterior_d, exterior_d_or_none, fourier,
    fourier_inverse, partial_multi_spectral,
};

/// `ρ(x) = (1 + |x|²)^{1/2}` on the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFunction {
    grid: GridSpec,
    rho: Vec<f64>,
}

impl WeightFunction {
    pub fn new(grid: GridSpec) -> Self {
        let rho = weight_powers(&grid, 1.0).expect("nonzero exponent");
        WeightFunction { grid, rho }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    /// `ρ^p` at every node.
    pub fn power(&self, p: f64) -> Vec<f64> {
        if p == 0.0 {
            return vec![1.0; self.rho.len()];
        }
        self.rho.iter().map(|r| r.powf(p)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    /// `ρ^s ∂^α`
    Roman,
    /// `ρ^{s+|α|} ∂^α`
    Bold,
}

/// Default cap on the derivative order of a norm.
pub const DEFAULT_MAX_ORDER: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub order: usize,
    pub weight: f64,
    pub scale: Scale,
    pub max_order: usize,
}

impl NormSpec {
    pub fn new(order: usize, weight: f64, scale: Scale) -> Self {
        NormSpec {
            order,
            weight,
            scale,
            max_order: DEFAULT_MAX_ORDER,
        }
    }

    pub fn roman(order: usize, weight: f64) -> Self {
        Self::new(order, weight, Scale::Roman)
    }

    pub fn bold(order: usize, weight: f64) -> Self {
        Self::new(order, weight, Scale::Bold)
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self
    }

    fn exponent(&self, alpha_order: usize) -> f64 {
        match self.scale {
            Scale::Roman => self.weight,
            Scale::Bold => self.weight + alpha_order as f64,
        }
    }
}

/// `(Σ_{|α|≤m} ‖ρ^{w(α)} ∂^α E‖²)^{1/2}`, one term per multi-index `α`.
pub fn weighted_sobolev_norm(e: &FormField, spec: &NormSpec) -> Result<f64> {
    Ok(weighted_sobolev_norm_sq(e, spec)?.sqrt())
}

fn weighted_sobolev_norm_sq(e: &FormField, spec: &NormSpec) -> Result<f64> {
    if spec.order > spec.max_order {
        return Err(Error::OrderTooHigh {
            order: spec.order,
            max: spec.max_order,
        });
    }
    let hat = fourier(e)?;
    let mut total = 0.0;
    for k in 0..=spec.order {
        let w = spec.exponent(k);
        for alpha in multi_indices_of_order(e.dim(), k) {
            let d = if k == 0 {
                e.clone()
            } else {
                fourier_inverse(&partial_multi_spectral(&hat, &alpha))
            };
            total += d.l2_norm_weighted(w).powi(2);
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphKind {
    /// `E ↦ dE`
    D,
    /// `E ↦ δ(εE)`
    Delta,
}

/// Graph norm `(‖E‖²_{L²_s} + ‖LE‖²_{L²_{s'}})^{1/2}` with `L = d` or `δε`
/// and `s' = s + 1` (bold) or `s` (roman). `L` vanishes on top-rank forms
/// for `d` and on 0-forms for `δ`.
pub fn graph_norm(
    e: &FormField,
    kind: GraphKind,
    s: f64,
    scale: Scale,
    eps: Option<&Transformation>,
) -> Result<f64> {
    let image = match kind {
        GraphKind::D => exterior_d_or_none(e)?,
        GraphKind::Delta => match eps {
            Some(t) => coderivative_or_none(&t.apply(e)?)?,
            None => coderivative_or_none(e)?,
        },
    };
    let s_image = match scale {
        Scale::Roman => s,
        Scale::Bold => s + 1.0,
    };
    let image_sq = image.map_or(0.0, |f| f.l2_norm_weighted(s_image).powi(2));
    Ok((e.l2_norm_weighted(s).powi(2) + image_sq).sqrt())
}

/// Residual of `L(ρ^s E) - ρ^s LE - s ρ^{s-2} M E` with `(L, M) = (d, R)` or `(δ, T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CommutatorReport {
    pub s: f64,
    pub residual: f64,
    /// `‖L(ρ^s E)‖`, the scale of the relative residual.
    pub scale: f64,
    pub relative: f64,
}

pub fn commutator_d(e: &FormField, s: f64) -> Result<CommutatorReport> {
    commutator(e, s, GraphKind::D)
}

pub fn commutator_delta(e: &FormField, s: f64) -> Result<CommutatorReport> {
    commutator(e, s, GraphKind::Delta)
}

fn commutator(e: &FormField, s: f64, kind: GraphKind) -> Result<CommutatorReport> {
    let w = WeightFunction::new(*e.grid());
    let rho_s = w.power(s);
    let rho_s2 = w.power(s - 2.0);
    let weighted = e.multiply_by(|n| rho_s[n]);
    let (lhs, plain, radial) = match kind {
        GraphKind::D => (
            exterior_d(&weighted)?,
            exterior_d(e)?,
            apply_r(e, Coordinates::Position)?,
        ),
        GraphKind::Delta => (
            coderivative_delta(&weighted)?,
            coderivative_delta(e)?,
            apply_t(e, Coordinates::Position)?,
        ),
    };
    let mut res = lhs.clone();
    res.axpy(Complex64::new(-1.0, 0.0), &plain.multiply_by(|n| rho_s[n]))?;
    res.axpy(Complex64::new(-s, 0.0), &radial.multiply_by(|n| rho_s2[n]))?;
    let residual = res.l2_norm();
    let scale = lhs.l2_norm();
    Ok(CommutatorReport {
        s,
        residual,
        scale,
        relative: if scale == 0.0 { residual } else { residual / scale },
    })
}

/// Both sides of the annulus splitting
/// `‖F‖²_{L²_{s+1-τ}} ≤ c_ϑ ‖F‖²_{L²_s} + (1+ϑ²)^{-τ} ‖F‖²_{L²_{s+1}}`
/// with `c_ϑ = sup_{r≤ϑ} (1+r²)^{1-τ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnnulusSplitReport {
    pub theta: f64,
    pub tau: f64,
    pub c_theta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn annulus_split_check(f: &FormField, s: f64, tau: f64, theta: f64) -> Result<AnnulusSplitReport> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("decay order τ = {tau} must be positive")));
    }
    let c_theta = (1.0 + theta * theta).powf(1.0 - tau).max(1.0);
    let lhs = f.l2_norm_weighted(s + 1.0 - tau).powi(2);
    let rhs = c_theta * f.l2_norm_weighted(s).powi(2)
        + (1.0 + theta * theta).powf(-tau) * f.l2_norm_weighted(s + 1.0).powi(2);
    Ok(AnnulusSplitReport {
        theta,
        tau,
        c_theta,
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-12),
    })
}

/// `(bold-H^m_s, roman-H^m_s, bold-H^m_{s'})` for `s' ≤ s - m`; the weights
/// order them non-increasingly because `ρ ≥ 1`.
pub fn monotone_inclusion_norms(e: &FormField, m: usize, s: f64, s_low: f64) -> Result<[f64; 3]> {
    if s_low > s - m as f64 {
        return Err(Error::InvalidArgument(format!(
            "need s' ≤ s - m, got s' = {s_low}, s = {s}, m = {m}"
        )));
    }
    let spec = |scale, w| NormSpec::new(m, w, scale).with_max_order(m.max(DEFAULT_MAX_ORDER));
    Ok([
        weighted_sobolev_norm(e, &spec(Scale::Bold, s))?,
        weighted_sobolev_norm(e, &spec(Scale::Roman, s))?,
        weighted_sobolev_norm(e, &spec(Scale::Bold, s_low))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manufactured::{Expr, ManufacturedForm};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bump(g: GridSpec, width: f64) -> FormField {
        let center = vec![0.1; g.dim()];
        FormField::scalar(g, |x| Expr::gaussian(&center, width, 1.0).eval(x)).unwrap()
    }

    #[test]
    fn weight_is_at_least_one() {
        let g = GridSpec::periodic(2, 2.0, 8).unwrap();
        let w = WeightFunction::new(g);
        assert!(w.values().iter().all(|&r| r >= 1.0));
        assert_eq!(w.values()[g.ravel(&[4, 4])], 1.0);
    }

    #[test]
    fn order_zero_scales_agree() {
        let g = GridSpec::periodic(2, 4.0, 32).unwrap();
        let f = bump(g, 0.7);
        let a = weighted_sobolev_norm(&f, &NormSpec::roman(0, 1.5)).unwrap();
        let b = weighted_sobolev_norm(&f, &NormSpec::bold(0, 1.5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, f.l2_norm_weighted(1.5));
    }

    #[test]
    fn order_cap_is_reported() {
        let g = GridSpec::periodic(2, 4.0, 8).unwrap();
        let f = bump(g, 0.7);
        assert!(matches!(
            weighted_sobolev_norm(&f, &NormSpec::roman(4, 0.0)),
            Err(Error::OrderTooHigh { order: 4, max: 3 })
        ));
        assert!(weighted_sobolev_norm(&f, &NormSpec::roman(4, 0.0).with_max_order(4)).is_ok());
    }

    #[test]
    fn bold_dominates_roman_for_first_order() {
        let g = GridSpec::periodic(2, 4.0, 32).unwrap();
        let f = bump(g, 0.6);
        let bold = weighted_sobolev_norm(&f, &NormSpec::bold(1, 0.0)).unwrap();
        let roman = weighted_sobolev_norm(&f, &NormSpec::roman(1, 0.0)).unwrap();
        assert!(bold > roman);
    }

    /// Analytic oracle: the Gaussian's gradient is sampled in closed form
    /// and the same quadrature is applied on a twice finer grid.
    #[test]
    fn weighted_norm_matches_refined_analytic_quadrature() {
        let center = [0.1, -0.2];
        let gauss = Expr::gaussian(&center, 0.7, 1.0);
        let oracle = |g: GridSpec, s: f64| {
            let rho2 = |x: &[f64]| 1.0 + x.iter().map(|v| v * v).sum::<f64>();
            let mut total = 0.0;
            for node in 0..g.len() {
                let x = g.position(node);
                let w = rho2(&x).powf(s);
                let mut sq = gauss.eval(&x).powi(2);
                for a in 0..2 {
                    sq += gauss.partial(a).eval(&x).powi(2);
                }
                total += w * sq;
            }
            (total * g.cell_volume()).sqrt()
        };
        let g = GridSpec::periodic(2, 5.0, 48).unwrap();
        let f = FormField::scalar(g, |x| gauss.eval(x)).unwrap();
        let ours = weighted_sobolev_norm(&f, &NormSpec::roman(1, -1.0)).unwrap();
        let reference = oracle(g.refined().unwrap(), -1.0);
        assert!((ours - reference).abs() / reference < 1e-6, "{ours} vs {reference}");
    }

    #[test]
    fn closed_form_graph_norm_is_l2() {
        let g = GridSpec::periodic(3, 4.0, 16).unwrap();
        let top = FormField::from_fn(g, 3, |_, n| Complex64::new(g.coordinate(n, 0).sin(), 0.0)).unwrap();
        for scale in [Scale::Roman, Scale::Bold] {
            let v = graph_norm(&top, GraphKind::D, 0.5, scale, None).unwrap();
            assert_eq!(v, top.l2_norm_weighted(0.5));
        }
    }

    #[test]
    fn roman_graph_norm_matches_componentwise_oracle() {
        // Band-limited E, dE assembled from analytic partials of each component.
        let dim = 2;
        let g = GridSpec::periodic(dim, 4.0, 32).unwrap();
        let w = std::f64::consts::PI / 4.0;
        let comps = vec![
            Expr::plane_wave(&[w, 2.0 * w], 0.3, 1.0),
            Expr::plane_wave(&[-3.0 * w, w], 1.1, 0.5),
        ];
        let m = ManufacturedForm::new(dim, 1, comps).unwrap();
        let e = m.sample(&g).unwrap();
        let de = m.exterior_d().unwrap().sample(&g).unwrap();
        let s = 0.7;
        let oracle = (e.l2_norm_weighted(s).powi(2) + de.l2_norm_weighted(s).powi(2)).sqrt();
        let ours = graph_norm(&e, GraphKind::D, s, Scale::Roman, None).unwrap();
        assert!((ours - oracle).abs() / oracle < 1e-8);
        assert!(graph_norm(&e, GraphKind::D, s, Scale::Bold, None).unwrap() >= ours);
    }

    #[test]
    fn commutators_hold_on_gaussians() {
        let g = GridSpec::periodic(2, 3.6, 64).unwrap();
        let m = ManufacturedForm::new(
            2,
            1,
            vec![
                Expr::gaussian(&[0.2, -0.1], 0.65, 1.0),
                Expr::gaussian(&[-0.1, 0.2], 0.7, -0.7),
            ],
        )
        .unwrap();
        let e = m.sample(&g).unwrap();
        for s in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            assert!(commutator_d(&e, s).unwrap().relative < 1e-8);
            assert!(commutator_delta(&e, s).unwrap().relative < 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn annulus_split_holds(seed in 0u64..10_000, tau in 0.1f64..3.0, theta in 0.0f64..4.0, s in -2.0f64..2.0) {
            let g = GridSpec::periodic(2, 3.0, 8).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = FormField::from_fn(g, 1, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).unwrap();
            prop_assert!(annulus_split_check(&f, s, tau, theta).unwrap().holds);
        }

        #[test]
        fn monotone_inclusion(seed in 0u64..10_000, m in 0usize..=2, s in -2.0f64..2.0) {
            let g = GridSpec::periodic(2, 3.0, 8).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = FormField::from_fn(g, 1, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap();
            let [bold, roman, low] = monotone_inclusion_norms(&f, m, s, s - m as f64).unwrap();
            prop_assert!(bold >= roman * (1.0 - 1e-12));
            prop_assert!(roman >= low * (1.0 - 1e-12));
        }
    }
}
