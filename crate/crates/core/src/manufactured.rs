//! Closed-form scalar expressions with symbolic partial derivatives, and
//! manufactured forms built from them.
//!
//! Manufactured forms are defined independently of any grid, so one field
//! can be sampled at several resolutions and its derivatives (hence `d`
//! and `δ`) are exact rather than discretised.

use std::sync::Arc;

use num_complex::Complex64;

use crate::algebra::{sum_interior_axes, sum_wedge_axes};
use crate::error::{Error, Result};
use crate::form::FormField;
use crate::grid::GridSpec;
use crate::multi_index::{shuffle_sign, Basis, MultiIndex};

/// A real-valued closed-form function of position.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Coordinate `x_axis`.
    Coord(usize),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Exp(Arc<Expr>),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    /// `1 / e`
    Recip(Arc<Expr>),
    /// `e^p` for real `p` (argument must stay positive where evaluated).
    Pow(Arc<Expr>, f64),
    /// `exp(-|x - center|² · inv_width2)`.
    Gauss { center: Vec<f64>, inv_width2: f64 },
    /// `body` where `|x - center| < radius`, zero elsewhere. Only meaningful
    /// for bodies that vanish with all derivatives at the sphere.
    Inside {
        center: Vec<f64>,
        radius: f64,
        body: Arc<Expr>,
    },
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn sum(terms: Vec<Expr>) -> Expr {
        let mut constant = 0.0;
        let mut rest = Vec::new();
        for t in terms {
            match t {
                Expr::Const(c) => constant += c,
                Expr::Add(inner) => rest.extend(inner),
                other => rest.push(other),
            }
        }
        if constant != 0.0 {
            rest.push(Expr::Const(constant));
        }
        match rest.len() {
            0 => Expr::zero(),
            1 => rest.pop().expect("one term"),
            _ => Expr::Add(rest),
        }
    }

    pub fn product(factors: Vec<Expr>) -> Expr {
        let mut constant = 1.0;
        let mut rest = Vec::new();
        for f in factors {
            match f {
                Expr::Const(c) => constant *= c,
                Expr::Mul(inner) => rest.extend(inner),
                other => rest.push(other),
            }
        }
        if constant == 0.0 {
            return Expr::zero();
        }
        if constant != 1.0 || rest.is_empty() {
            rest.insert(0, Expr::Const(constant));
        }
        match rest.len() {
            1 => rest.pop().expect("one factor"),
            _ => Expr::Mul(rest),
        }
    }

    pub fn scaled(self, a: f64) -> Expr {
        Expr::product(vec![Expr::Const(a), self])
    }

    /// `amplitude · exp(-|x - c|² / width²)`.
    pub fn gaussian(center: &[f64], width: f64, amplitude: f64) -> Expr {
        let g = Expr::Gauss {
            center: center.to_vec(),
            inv_width2: 1.0 / (width * width),
        };
        Expr::product(vec![Expr::Const(amplitude), g])
    }

    pub fn bump(center: &[f64], radius: f64) -> Expr {
        let sq: Vec<Expr> = center
            .iter()
            .enumerate()
            .map(|(a, &c)| {
                let shifted = Expr::sum(vec![Expr::Coord(a), Expr::Const(-c)]);
                Expr::product(vec![shifted.clone(), shifted])
            })
            .collect();
        let one_minus = Expr::sum(vec![
            Expr::Const(1.0),
            Expr::sum(sq).scaled(-1.0 / (radius * radius)),
        ]);
        let body = Expr::Exp(Arc::new(Expr::Recip(Arc::new(one_minus)).scaled(-1.0)));
        Expr::Inside {
            center: center.to_vec(),
            radius,
            body: Arc::new(body),
        }
    }

    /// `amplitude · sin(k · x + phase)`.
    pub fn plane_wave(wave: &[f64], phase: f64, amplitude: f64) -> Expr {
        let mut arg: Vec<Expr> = wave
            .iter()
            .enumerate()
            .filter(|(_, &k)| k != 0.0)
            .map(|(a, &k)| Expr::Coord(a).scaled(k))
            .collect();
        arg.push(Expr::Const(phase));
        Expr::product(vec![
            Expr::Const(amplitude),
            Expr::Sin(Arc::new(Expr::sum(arg))),
        ])
    }

    /// `(1 + |x|²)^{p/2}`, i.e. `ρ^p`.
    pub fn rho_power(dim: usize, p: f64) -> Expr {
        let mut terms: Vec<Expr> = (0..dim)
            .map(|a| Expr::product(vec![Expr::Coord(a), Expr::Coord(a)]))
            .collect();
        terms.push(Expr::Const(1.0));
        Expr::Pow(Arc::new(Expr::sum(terms)), 0.5 * p)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Coord(a) => x[*a],
            Expr::Add(ts) => ts.iter().map(|t| t.eval(x)).sum(),
            Expr::Mul(fs) => fs.iter().map(|f| f.eval(x)).product(),
            Expr::Exp(e) => e.eval(x).exp(),
            Expr::Sin(e) => e.eval(x).sin(),
            Expr::Cos(e) => e.eval(x).cos(),
            Expr::Recip(e) => e.eval(x).recip(),
            Expr::Pow(e, p) => e.eval(x).powf(*p),
            Expr::Gauss { center, inv_width2 } => {
                let r2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                (-r2 * inv_width2).exp()
            }
            Expr::Inside {
                center,
                radius,
                body,
            } => {
                let r2: f64 = center.iter().zip(x).map(|(c, v)| (v - c).powi(2)).sum();
                if r2 < radius * radius {
                    body.eval(x)
                } else {
                    0.0
                }
            }
        }
    }

    /// Symbolic `∂/∂x_axis`.
    pub fn partial(&self, axis: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Coord(a) => Expr::Const(if *a == axis { 1.0 } else { 0.0 }),
            Expr::Add(ts) => Expr::sum(ts.iter().map(|t| t.partial(axis)).collect()),
            Expr::Mul(fs) => {
                let mut terms = Vec::new();
                for i in 0..fs.len() {
                    let di = fs[i].partial(axis);
                    if di.is_zero() {
                        continue;
                    }
                    let mut factors: Vec<Expr> = fs
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, f)| f.clone())
                        .collect();
                    factors.push(di);
                    terms.push(Expr::product(factors));
                }
                Expr::sum(terms)
            }
            Expr::Exp(e) => chain(e.partial(axis), self.clone()),
            Expr::Sin(e) => chain(e.partial(axis), Expr::Cos(e.clone())),
            Expr::Cos(e) => chain(e.partial(axis), Expr::Sin(e.clone()).scaled(-1.0)),
            Expr::Recip(e) => chain(
                e.partial(axis),
                Expr::product(vec![self.clone(), self.clone()]).scaled(-1.0),
            ),
            Expr::Pow(e, p) => chain(
                e.partial(axis),
                Expr::product(vec![Expr::Const(*p), Expr::Pow(e.clone(), p - 1.0)]),
            ),
            Expr::Gauss { center, inv_width2 } => Expr::product(vec![
                Expr::Const(-2.0 * inv_width2),
                Expr::sum(vec![Expr::Coord(axis), Expr::Const(-center[axis])]),
                self.clone(),
            ]),
            Expr::Inside {
                center,
                radius,
                body,
            } => {
                let inner = body.partial(axis);
                if inner.is_zero() {
                    Expr::zero()
                } else {
                    Expr::Inside {
                        center: center.clone(),
                        radius: *radius,
                        body: Arc::new(inner),
                    }
                }
            }
        }
    }

    /// `∂^α` for a multi-index of derivative counts.
    pub fn partial_multi(&self, alpha: &[usize]) -> Expr {
        let mut e = self.clone();
        for (axis, &k) in alpha.iter().enumerate() {
            for _ in 0..k {
                e = e.partial(axis);
            }
        }
        e
    }

    /// Substitutes `x_axis → -x_axis`.
    pub fn reflect(&self, axis: usize) -> Expr {
        let r = |e: &Arc<Expr>| Arc::new(e.reflect(axis));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Coord(a) if *a == axis => Expr::Coord(*a).scaled(-1.0),
            Expr::Coord(a) => Expr::Coord(*a),
            Expr::Add(ts) => Expr::sum(ts.iter().map(|t| t.reflect(axis)).collect()),
            Expr::Mul(fs) => Expr::product(fs.iter().map(|f| f.reflect(axis)).collect()),
            Expr::Exp(e) => Expr::Exp(r(e)),
            Expr::Sin(e) => Expr::Sin(r(e)),
            Expr::Cos(e) => Expr::Cos(r(e)),
            Expr::Recip(e) => Expr::Recip(r(e)),
            Expr::Pow(e, p) => Expr::Pow(r(e), *p),
            Expr::Gauss { center, inv_width2 } => {
                let mut c = center.clone();
                c[axis] = -c[axis];
                Expr::Gauss {
                    center: c,
                    inv_width2: *inv_width2,
                }
            }
            Expr::Inside {
                center,
                radius,
                body,
            } => {
                let mut c = center.clone();
                c[axis] = -c[axis];
                Expr::Inside {
                    center: c,
                    radius: *radius,
                    body: r(body),
                }
            }
        }
    }

    /// Substitutes `x_i → signs[i] · x_{perm[i]}`, i.e. returns `e ∘ Q` for
    /// the signed axis permutation `(Qx)_i = signs[i] · x_{perm[i]}`.
    pub fn compose_signed_permutation(&self, perm: &[usize], signs: &[f64]) -> Expr {
        let r = |e: &Arc<Expr>| Arc::new(e.compose_signed_permutation(perm, signs));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Coord(a) => Expr::Coord(perm[*a]).scaled(signs[*a]),
            Expr::Add(ts) => Expr::sum(
                ts.iter()
                    .map(|t| t.compose_signed_permutation(perm, signs))
                    .collect(),
            ),
            Expr::Mul(fs) => Expr::product(
                fs.iter()
                    .map(|f| f.compose_signed_permutation(perm, signs))
                    .collect(),
            ),
            Expr::Exp(e) => Expr::Exp(r(e)),
            Expr::Sin(e) => Expr::Sin(r(e)),
            Expr::Cos(e) => Expr::Cos(r(e)),
            Expr::Recip(e) => Expr::Recip(r(e)),
            Expr::Pow(e, p) => Expr::Pow(r(e), *p),
            // Q is orthogonal, so |Qx - c| = |x - Q⁻¹c|.
            Expr::Gauss { center, inv_width2 } => {
                let mut c = vec![0.0; center.len()];
                for (i, &ci) in center.iter().enumerate() {
                    c[perm[i]] = signs[i] * ci;
                }
                Expr::Gauss {
                    center: c,
                    inv_width2: *inv_width2,
                }
            }
            Expr::Inside {
                center,
                radius,
                body,
            } => {
                // Preimage of the ball under Q: Q^{-1} c, i.e. y_{perm[i]} = signs[i] c_i.
                let mut c = vec![0.0; center.len()];
                for (i, &ci) in center.iter().enumerate() {
                    c[perm[i]] = signs[i] * ci;
                }
                Expr::Inside {
                    center: c,
                    radius: *radius,
                    body: r(body),
                }
            }
        }
    }

    /// Even (`sign = 1`) or odd (`sign = -1`) part in `x_axis`.
    pub fn symmetrize(&self, axis: usize, sign: f64) -> Expr {
        Expr::sum(vec![
            self.clone().scaled(0.5),
            self.reflect(axis).scaled(0.5 * sign),
        ])
    }

    pub fn sample(&self, grid: &GridSpec) -> Vec<Complex64> {
        (0..grid.len())
            .map(|node| Complex64::new(self.eval(&grid.position(node)), 0.0))
            .collect()
    }
}

fn chain(inner_derivative: Expr, outer: Expr) -> Expr {
    if inner_derivative.is_zero() {
        Expr::zero()
    } else {
        Expr::product(vec![inner_derivative, outer])
    }
}

/// A rank-q form whose components are closed-form expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct ManufacturedForm {
    dim: usize,
    rank: usize,
    components: Vec<Expr>,
}

impl ManufacturedForm {
    pub fn new(dim: usize, rank: usize, components: Vec<Expr>) -> Result<Self> {
        let basis = Basis::new(dim, rank)?;
        if components.len() != basis.len() {
            return Err(Error::InvalidArgument(format!(
                "rank-{rank} form in dimension {dim} needs {} components, got {}",
                basis.len(),
                components.len()
            )));
        }
        Ok(ManufacturedForm {
            dim,
            rank,
            components,
        })
    }

    pub fn zero(dim: usize, rank: usize) -> Result<Self> {
        let len = Basis::new(dim, rank)?.len();
        Self::new(dim, rank, vec![Expr::zero(); len])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn basis(&self) -> Basis {
        Basis::new(self.dim, self.rank).expect("validated at construction")
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn component(&self, index: MultiIndex) -> Option<&Expr> {
        self.basis().position(index).map(|p| &self.components[p])
    }

    pub fn sample(&self, grid: &GridSpec) -> Result<FormField> {
        if grid.dim() != self.dim {
            return Err(Error::GridMismatch(format!(
                "form of dimension {} sampled on a {}-dimensional grid",
                self.dim,
                grid.dim()
            )));
        }
        let positions: Vec<Vec<f64>> = (0..grid.len()).map(|n| grid.position(n)).collect();
        let comps = self
            .components
            .iter()
            .map(|e| {
                positions
                    .iter()
                    .map(|x| Complex64::new(e.eval(x), 0.0))
                    .collect()
            })
            .collect();
        FormField::from_components(*grid, self.rank, comps)
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> ManufacturedForm {
        ManufacturedForm {
            dim: self.dim,
            rank: self.rank,
            components: self.components.iter().map(f).collect(),
        }
    }

    pub fn partial(&self, axis: usize) -> ManufacturedForm {
        self.map(|e| e.partial(axis))
    }

    pub fn partial_multi(&self, alpha: &[usize]) -> ManufacturedForm {
        self.map(|e| e.partial_multi(alpha))
    }

    pub fn add(&self, other: &ManufacturedForm) -> Result<ManufacturedForm> {
        if self.dim != other.dim || self.rank != other.rank {
            return Err(Error::RankMismatch {
                expected: self.rank,
                found: other.rank,
            });
        }
        Ok(ManufacturedForm {
            dim: self.dim,
            rank: self.rank,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| Expr::sum(vec![a.clone(), b.clone()]))
                .collect(),
        })
    }

    pub fn scaled(&self, a: f64) -> ManufacturedForm {
        self.map(|e| e.clone().scaled(a))
    }

    /// Multiplies every component by the scalar expression `f`.
    pub fn times(&self, f: &Expr) -> ManufacturedForm {
        self.map(|e| Expr::product(vec![f.clone(), e.clone()]))
    }

    /// Exact `dE = Σ_n dx^n ∧ ∂_n E`.
    pub fn exterior_d(&self) -> Result<ManufacturedForm> {
        if self.rank >= self.dim {
            return Err(Error::RankOverflow {
                rank: self.rank + 1,
                dim: self.dim,
            });
        }
        let src = self.basis();
        let dst = Basis::new(self.dim, self.rank + 1)?;
        let mut terms: Vec<Vec<Expr>> = vec![Vec::new(); dst.len()];
        for (p, &i) in src.indices().iter().enumerate() {
            for n in 0..self.dim {
                if let Some(sign) = shuffle_sign(MultiIndex::single(n), i) {
                    let k = dst.position(i.with(n)).expect("rank q+1");
                    terms[k].push(self.components[p].partial(n).scaled(sign));
                }
            }
        }
        ManufacturedForm::new(self.dim, self.rank + 1, terms.into_iter().map(Expr::sum).collect())
    }

    /// Exact `δE = Σ_n ι_{e_n} ∂_n E`.
    pub fn coderivative(&self) -> Result<ManufacturedForm> {
        if self.rank == 0 {
            return Err(Error::RankUnderflow { rank: 0 });
        }
        let src = self.basis();
        let dst = Basis::new(self.dim, self.rank - 1)?;
        let mut terms: Vec<Vec<Expr>> = vec![Vec::new(); dst.len()];
        for (p, &i) in src.indices().iter().enumerate() {
            for n in i.axes() {
                let rest = i.without(n);
                let sign = shuffle_sign(MultiIndex::single(n), rest).expect("disjoint");
                let k = dst.position(rest).expect("rank q-1");
                terms[k].push(self.components[p].partial(n).scaled(sign));
            }
        }
        ManufacturedForm::new(self.dim, self.rank - 1, terms.into_iter().map(Expr::sum).collect())
    }

    /// Parity-projected copy across `x_N = 0`: components with `N ∈ I` get
    /// parity `normal_sign`, the others `tangential_sign`.
    pub fn symmetrize_normal(&self, tangential_sign: f64, normal_sign: f64) -> ManufacturedForm {
        let axis = self.dim - 1;
        let basis = self.basis();
        ManufacturedForm {
            dim: self.dim,
            rank: self.rank,
            components: basis
                .indices()
                .iter()
                .zip(&self.components)
                .map(|(i, e)| {
                    let s = if i.contains(axis) {
                        normal_sign
                    } else {
                        tangential_sign
                    };
                    e.symmetrize(axis, s)
                })
                .collect(),
        }
    }
}

/// Assembles `d` from sampled first partials (used as an oracle in tests).
pub fn d_from_partials(partials: &[FormField]) -> Result<FormField> {
    sum_wedge_axes(partials)
}

/// Assembles `δ` from sampled first partials.
pub fn delta_from_partials(partials: &[FormField]) -> Result<FormField> {
    sum_interior_axes(partials)
}
