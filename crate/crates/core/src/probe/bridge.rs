//! Three-dimensional vector calculus in form language: 1-forms and 2-forms
//! both encode vector fields, and `d`, `δ` become curl and div.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::form::{FormField, ScalarField};
use crate::grid::GridSpec;
use crate::probe::generate::band_limited_random;
use crate::probe::report::{safe_ratio, Flag, ProbeParams, ProbeReport};
use crate::spectral::{coderivative_delta, exterior_d, partial};

/// Largest relative mismatch accepted between the two calculi.
pub const BRIDGE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldN3 {
    pub grid: GridSpec,
    pub v: [ScalarField; 3],
}

impl VectorFieldN3 {
    pub fn new(grid: GridSpec, v: [ScalarField; 3]) -> Result<Self> {
        if grid.dim() != 3 {
            return Err(Error::InvalidGrid(format!("vector fields live on N = 3, got N = {}", grid.dim())));
        }
        if v.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch("component length differs from the grid".into()));
        }
        Ok(Self { grid, v })
    }

    /// `q = 1`: `v₀dx⁰ + v₁dx¹ + v₂dx²`. `q = 2`: `v₀dx¹² + v₁dx²⁰ + v₂dx⁰¹`.
    pub fn to_form(&self, q: usize) -> Result<FormField> {
        let [a, b, c] = self.v.clone();
        match q {
            1 => FormField::from_components(self.grid, 1, vec![a, b, c]),
            // Basis order {01}, {02}, {12}; dx²⁰ = -dx⁰².
            2 => FormField::from_components(self.grid, 2, vec![c, negate(&b), a]),
            _ => Err(Error::InvalidArgument(format!("vector fields are 1- or 2-forms, got q = {q}"))),
        }
    }

    pub fn from_form(e: &FormField) -> Result<Self> {
        let comps = e.components();
        let v = match e.rank() {
            1 => [comps[0].clone(), comps[1].clone(), comps[2].clone()],
            2 => [comps[2].clone(), negate(&comps[1]), comps[0].clone()],
            r => return Err(Error::InvalidArgument(format!("vector fields are 1- or 2-forms, got q = {r}"))),
        };
        Self::new(*e.grid(), v)
    }

    fn component_partial(&self, c: usize, axis: usize) -> Result<ScalarField> {
        let f = FormField::from_components(self.grid, 0, vec![self.v[c].clone()])?;
        Ok(partial(&f, axis)?.into_components().remove(0))
    }

    pub fn curl(&self) -> Result<VectorFieldN3> {
        let p = |c, a| self.component_partial(c, a);
        Ok(VectorFieldN3 {
            grid: self.grid,
            v: [
                sub(&p(2, 1)?, &p(1, 2)?),
                sub(&p(0, 2)?, &p(2, 0)?),
                sub(&p(1, 0)?, &p(0, 1)?),
            ],
        })
    }

    pub fn div(&self) -> Result<ScalarField> {
        let mut out = self.component_partial(0, 0)?;
        for a in 1..3 {
            for (o, x) in out.iter_mut().zip(self.component_partial(a, a)?) {
                *o += x;
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> VectorFieldN3 {
        VectorFieldN3 {
            grid: self.grid,
            v: self.v.clone().map(|c| c.into_iter().map(|x| x * a).collect()),
        }
    }
}

fn negate(f: &ScalarField) -> ScalarField {
    f.iter().map(|x| -x).collect()
}

fn sub(a: &ScalarField, b: &ScalarField) -> ScalarField {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn relative(got: &FormField, want: &FormField) -> Result<f64> {
    Ok(safe_ratio(got.try_sub(want)?.max_abs(), want.max_abs().max(1.0)))
}

/// Worst relative errors of the five correspondences over the sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BridgeErrors {
    pub d_curl: f64,
    pub delta_div: f64,
    pub d2_div: f64,
    pub delta2_curl: f64,
    pub round_trip: f64,
}

pub fn bridge_errors(v: &VectorFieldN3) -> Result<BridgeErrors> {
    let one = v.to_form(1)?;
    let two = v.to_form(2)?;
    let curl = v.curl()?;
    let div = FormField::from_components(v.grid, 0, vec![v.div()?])?;
    let div3 = FormField::from_components(v.grid, 3, vec![v.div()?])?;
    let mut round_trip = 0.0f64;
    for e in [&one, &two] {
        let back = VectorFieldN3::from_form(e)?;
        let worst = back
            .v
            .iter()
            .zip(&v.v)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y): (&Complex64, &Complex64)| (x - y).norm()))
            .fold(0.0, f64::max);
        round_trip = round_trip.max(worst);
    }
    Ok(BridgeErrors {
        d_curl: relative(&exterior_d(&one)?, &curl.to_form(2)?)?,
        delta_div: relative(&coderivative_delta(&one)?, &div)?,
        d2_div: relative(&exterior_d(&two)?, &div3)?,
        delta2_curl: relative(&coderivative_delta(&two)?, &curl.scaled(-1.0).to_form(1)?)?,
        round_trip,
    })
}

/// Checks the correspondences on `count` band-limited random vector fields.
pub fn bridge_check(seed: u64, count: usize) -> Result<ProbeReport> {
    let grid = GridSpec::periodic(3, std::f64::consts::PI, 16)?;
    let mut worst = BridgeErrors::default();
    for k in 0..count {
        let f = band_limited_random(grid, 1, seed.wrapping_add(k as u64))?;
        let v = VectorFieldN3::from_form(&f)?;
        let e = bridge_errors(&v)?;
        worst.d_curl = worst.d_curl.max(e.d_curl);
        worst.delta_div = worst.delta_div.max(e.delta_div);
        worst.d2_div = worst.d2_div.max(e.d2_div);
        worst.delta2_curl = worst.delta2_curl.max(e.delta2_curl);
        worst.round_trip = worst.round_trip.max(e.round_trip);
    }
    let params = ProbeParams {
        dim: 3,
        grid: grid.points(),
        half_length: grid.half_length(),
        ensemble: Some(count),
        seed,
        ..ProbeParams::default()
    };
    let mut report = ProbeReport::new("bridge", params);
    report.flags = vec![
        Flag::at_most("d on 1-forms is curl", worst.d_curl, BRIDGE_TOLERANCE),
        Flag::at_most("δ on 1-forms is div", worst.delta_div, BRIDGE_TOLERANCE),
        Flag::at_most("d on 2-forms is div", worst.d2_div, BRIDGE_TOLERANCE),
        Flag::at_most("δ on 2-forms is -curl", worst.delta2_curl, BRIDGE_TOLERANCE),
        Flag::at_most("form encodings invert exactly", worst.round_trip, 0.0),
    ];
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(grid: GridSpec, f: [fn(&[f64]) -> f64; 3]) -> VectorFieldN3 {
        let sample = |g: fn(&[f64]) -> f64| -> ScalarField {
            (0..grid.len()).map(|n| Complex64::new(g(&grid.position(n)), 0.0)).collect()
        };
        VectorFieldN3::new(grid, [sample(f[0]), sample(f[1]), sample(f[2])]).unwrap()
    }

    #[test]
    fn rotation_field_has_constant_curl() {
        // v = (-x₁, x₀, 0) made periodic: sin instead of x.
        let grid = GridSpec::periodic(3, std::f64::consts::PI, 8).unwrap();
        let v = field(grid, [|x| -x[1].sin(), |x| x[0].sin(), |_| 0.0]);
        let c = v.curl().unwrap();
        for n in 0..grid.len() {
            let x = grid.position(n);
            assert!(c.v[0][n].norm() < 1e-12 && c.v[1][n].norm() < 1e-12);
            assert!((c.v[2][n].re - (x[0].cos() + x[1].cos())).abs() < 1e-12);
        }
        let e = bridge_errors(&v).unwrap();
        assert!(e.d_curl < 1e-12 && e.delta2_curl < 1e-12);
    }

    #[test]
    fn bridge_holds_on_random_fields() {
        let r = bridge_check(11, 4).unwrap();
        assert!(r.passed(), "{:#?}", r.flags);
    }

    #[test]
    fn rejects_other_dims_and_ranks() {
        let grid = GridSpec::periodic(2, 1.0, 4).unwrap();
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        assert!(VectorFieldN3::new(grid, [z.clone(), z.clone(), z]).is_err());
        let g3 = GridSpec::periodic(3, 1.0, 4).unwrap();
        assert!(VectorFieldN3::from_form(&FormField::zeros(g3, 0).unwrap()).is_err());
    }
}
