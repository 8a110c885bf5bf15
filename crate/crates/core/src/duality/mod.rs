//! Convex duality: Legendre-Fenchel conjugates, maximal partners under the
//! quadratic-gap constraint, polar functions and polar bodies.
//!
//! Grid transforms are separable. A 2D transform runs the 1D primitive along
//! the first axis for every fixed second coordinate, then along the second
//! axis. Both the infimal convolution with `c|x-y|^2` and the supremum defining
//! `V*` split exactly this way, so no approximation enters beyond restricting
//! `x` to the grid.

pub mod envelope;
pub mod polygon;

use std::sync::Arc;

use rayon::prelude::*;

pub use envelope::{ConvexConjugate, ParabolaEnvelope};
pub use polygon::ConvexPolygon;

use crate::error::{Error, Result};
use crate::grid::{Axis, GridFunction, Polarity};
use crate::potential::{Kind, Potential};

fn default_axes(dim: usize) -> Result<Vec<Axis>> {
    match dim {
        1 => Ok(vec![Axis::default_1d()]),
        2 => Ok(vec![Axis::default_2d(); 2]),
        _ => Err(Error::UnsupportedDimension { dim, context: "grid transforms are 1D or 2D" }),
    }
}

/// Default transform axes for a dimension: `[-8, 8]` with 2049 points in 1D, 513 per axis in 2D.
pub fn transform_axes(dim: usize) -> Result<Vec<Axis>> {
    default_axes(dim)
}

/// Groups flat `points` by their first coordinate (bitwise), preserving order within groups.
fn group_by_first(points: &[f64], dim: usize) -> Vec<(f64, Vec<usize>)> {
    let n = points.len() / dim;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a * dim].total_cmp(&points[b * dim]).then(a.cmp(&b)));
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for i in order {
        let y1 = points[i * dim];
        match groups.last_mut() {
            Some((g, members)) if g.to_bits() == y1.to_bits() => members.push(i),
            _ => groups.push((y1, vec![i])),
        }
    }
    groups
}

// ---------------------------------------------------------------------------
// Maximal partner psi(y) = inf_x c|x - y|^2 - phi(x)

/// The maximal partner of a grid-sampled `phi`, evaluable anywhere.
///
/// At any `y` the value is exactly `min` over grid sites `x` of
/// `c|x-y|^2 - phi(x)`, so `phi(x) + psi(y) <= c|x-y|^2` holds for every grid
/// site `x` and every `y`.
#[derive(Debug, Clone)]
pub struct MoreauPartner {
    c: f64,
    axes: Vec<Axis>,
    // 1D: one envelope. 2D: one envelope over the first axis per second-axis site.
    rows: Vec<Option<ParabolaEnvelope>>,
    sites2: Vec<f64>,
}

impl MoreauPartner {
    pub fn build(phi: &GridFunction, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("coupling constant must be positive, got {c}")));
        }
        if phi.values().iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(Error::EmptyDomain);
        }
        let axes = phi.axes().to_vec();
        match phi.axes() {
            [a] => {
                let offsets: Vec<f64> = phi.values().iter().map(|v| -v).collect();
                let env = ParabolaEnvelope::new(c, &a.points(), &offsets);
                Ok(Self { c, axes, rows: vec![env], sites2: Vec::new() })
            }
            [a, b] => {
                let s1 = a.points();
                let n2 = b.count;
                let rows = (0..n2)
                    .into_par_iter()
                    .map(|j| {
                        let offsets: Vec<f64> = (0..a.count).map(|i| -phi.at(&[i, j])).collect();
                        ParabolaEnvelope::new(c, &s1, &offsets)
                    })
                    .collect();
                Ok(Self { c, axes, rows, sites2: b.points() })
            }
            _ => unreachable!("grid functions are 1D or 2D"),
        }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    fn column(&self, y1: f64) -> Vec<f64> {
        self.rows.iter().map(|r| r.as_ref().map_or(f64::INFINITY, |e| e.eval(y1))).collect()
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match y {
            [y0] => self.rows[0].as_ref().expect("non-empty").eval(*y0),
            [y1, y2] => {
                let h = self.column(*y1);
                ParabolaEnvelope::new(self.c, &self.sites2, &h).expect("non-empty").eval(*y2)
            }
            _ => panic!("partner evaluated at a point of wrong dimension"),
        }
    }

    /// Values at flat `points` (`len * dim`).
    pub fn eval_points(&self, points: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let n = points.len() / dim;
        if dim == 1 {
            return points.par_iter().map(|&y| self.rows[0].as_ref().expect("non-empty").eval(y)).collect();
        }
        let groups = group_by_first(points, dim);
        let parts: Vec<Vec<(usize, f64)>> = groups
            .par_iter()
            .map(|(y1, members)| {
                let env = ParabolaEnvelope::new(self.c, &self.sites2, &self.column(*y1)).expect("non-empty");
                members.iter().map(|&i| (i, env.eval(points[i * dim + 1]))).collect()
            })
            .collect();
        let mut out = vec![0.0; n];
        for (i, v) in parts.into_iter().flatten() {
            out[i] = v;
        }
        out
    }

    /// Samples the partner on a grid (potential polarity: `-inf` outside).
    pub fn on_grid(&self, axes: &[Axis]) -> Result<GridFunction> {
        if axes.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: axes.len() });
        }
        let values = match axes {
            [a] => {
                let ys = a.points();
                let mut out = vec![0.0; ys.len()];
                self.rows[0].as_ref().expect("non-empty").eval_sorted(&ys, &mut out);
                out
            }
            [a, b] => {
                let (y1s, y2s) = (a.points(), b.points());
                let mut h = vec![vec![f64::INFINITY; y1s.len()]; self.rows.len()];
                h.par_iter_mut().zip(&self.rows).for_each(|(col, row)| {
                    if let Some(env) = row {
                        env.eval_sorted(&y1s, col);
                    }
                });
                let rows: Vec<Vec<f64>> = (0..y1s.len())
                    .into_par_iter()
                    .map(|i| {
                        let offsets: Vec<f64> = h.iter().map(|col| col[i]).collect();
                        let env = ParabolaEnvelope::new(self.c, &self.sites2, &offsets).expect("non-empty");
                        let mut out = vec![0.0; y2s.len()];
                        env.eval_sorted(&y2s, &mut out);
                        out
                    })
                    .collect();
                rows.concat()
            }
            _ => unreachable!(),
        };
        GridFunction::new(axes.to_vec(), values, Polarity::Potential)
    }
}

/// Worst excess of `phi(x) + psi(y) - c|x-y|^2` over all pairs of grid points,
/// checked directly in 1D and pass-by-pass in 2D (each pass is itself a
/// pointwise inequality between grid values, and the two compose into the
/// full inequality).
pub fn partner_feasibility_excess(phi: &GridFunction, c: f64) -> Result<f64> {
    let partner = MoreauPartner::build(phi, c)?;
    let psi = partner.on_grid(phi.axes())?;
    let excess = |lhs: f64, rhs: f64| -> f64 {
        if lhs == f64::NEG_INFINITY || rhs == f64::INFINITY {
            f64::NEG_INFINITY
        } else {
            (lhs - rhs) / (1.0 + lhs.abs().max(rhs.abs()))
        }
    };
    match phi.axes() {
        [a] => {
            let xs = a.points();
            let worst = (0..xs.len())
                .into_par_iter()
                .map(|j| {
                    let mut w = f64::NEG_INFINITY;
                    for i in 0..xs.len() {
                        let d = xs[i] - xs[j];
                        w = w.max(excess(phi.values()[i] + psi.values()[j], c * d * d));
                    }
                    w
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            Ok(worst)
        }
        [a, b] => {
            let (x1, x2) = (a.points(), b.points());
            // h[j][k] = first-pass value at (y1 = x1[k], x2 = x2[j])
            let h: Vec<Vec<f64>> = partner
                .rows
                .iter()
                .map(|r| {
                    let mut col = vec![f64::INFINITY; x1.len()];
                    if let Some(env) = r {
                        env.eval_sorted(&x1, &mut col);
                    }
                    col
                })
                .collect();
            let pass1 = (0..x2.len())
                .into_par_iter()
                .map(|j| {
                    let mut w = f64::NEG_INFINITY;
                    for k in 0..x1.len() {
                        for i in 0..x1.len() {
                            let d = x1[i] - x1[k];
                            w = w.max(excess(phi.at(&[i, j]) + h[j][k], c * d * d));
                        }
                    }
                    w
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            let pass2 = (0..x1.len())
                .into_par_iter()
                .map(|k| {
                    let mut w = f64::NEG_INFINITY;
                    for l in 0..x2.len() {
                        let v = psi.at(&[k, l]);
                        for j in 0..x2.len() {
                            let d = x2[j] - x2[l];
                            w = w.max(excess(v - h[j][k], c * d * d));
                        }
                    }
                    w
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            Ok(pass1.max(pass2))
        }
        _ => unreachable!(),
    }
}

/// Relative slack allowed by the feasibility assertion (rounding only).
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// Largest `psi` with `phi(x) + psi(y) <= c|x-y|^2` on the grid, for a grid-sampled `phi`.
/// The constraint is asserted on every call.
pub fn moreau_partner_grid(phi: &GridFunction, c: f64) -> Result<GridFunction> {
    let psi = MoreauPartner::build(phi, c)?.on_grid(phi.axes())?;
    let excess = partner_feasibility_excess(phi, c)?;
    if excess > FEASIBILITY_SLACK {
        return Err(Error::Feasibility { excess });
    }
    Ok(psi)
}

/// [`moreau_partner_grid`] for a potential sampled on `axes`.
pub fn moreau_partner(phi: &Potential, c: f64, axes: &[Axis]) -> Result<GridFunction> {
    let grid = sample_potential(phi, axes)?;
    moreau_partner_grid(&grid, c)
}

pub fn sample_potential(phi: &Potential, axes: &[Axis]) -> Result<GridFunction> {
    if axes.len() != phi.dim() {
        return Err(Error::DimensionMismatch { expected: phi.dim(), got: axes.len() });
    }
    GridFunction::sample(axes.to_vec(), Polarity::Potential, |x| phi.eval_unchecked(x))
}

/// A maximal partner by whichever route is available.
#[derive(Debug, Clone)]
pub enum Partner {
    /// Closed form on the Gaussian family.
    Exact(Potential),
    Grid(Arc<MoreauPartner>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Closed form when the input is in a closed-form family, grid otherwise.
    Auto,
    Grid,
}

impl Partner {
    pub fn build(phi: &Potential, c: f64, route: Route, axes: Option<&[Axis]>) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("coupling constant must be positive, got {c}")));
        }
        if route == Route::Auto {
            if let Some(form) = phi.as_quadratic() {
                return Ok(Partner::Exact(Potential::from_form(form.moreau_partner(c)?)?));
            }
        }
        let axes = match axes {
            Some(a) => a.to_vec(),
            None => default_axes(phi.dim())?,
        };
        let grid = sample_potential(phi, &axes)?;
        Ok(Partner::Grid(Arc::new(MoreauPartner::build(&grid, c)?)))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Partner::Exact(_))
    }

    pub fn eval_points(&self, points: &[f64]) -> Vec<f64> {
        match self {
            Partner::Exact(p) => {
                let d = p.dim();
                points.par_chunks(d).map(|y| p.eval_unchecked(y)).collect()
            }
            Partner::Grid(m) => m.eval_points(points),
        }
    }

    /// A potential view: the closed form, or the envelope sampled on its grid.
    pub fn to_potential(&self) -> Result<Potential> {
        match self {
            Partner::Exact(p) => Ok(p.clone()),
            Partner::Grid(m) => Ok(Potential::grid(m.on_grid(m.axes())?)),
        }
    }
}

// ---------------------------------------------------------------------------
// Legendre-Fenchel transform V*(y) = sup_x x.y - V(x)

/// Discrete conjugate of a grid-sampled `V`, evaluable anywhere.
#[derive(Debug, Clone)]
pub struct ConjugateField {
    axes: Vec<Axis>,
    rows: Vec<Option<ConvexConjugate>>,
    sites2: Vec<f64>,
}

impl ConjugateField {
    /// `V` may be `+inf` (outside its domain) but never `-inf`.
    pub fn build(v: &GridFunction) -> Result<Self> {
        if v.values().contains(&f64::NEG_INFINITY) {
            return Err(Error::InvalidParameter("V = -inf makes the conjugate +inf everywhere".into()));
        }
        if v.values().iter().all(|x| !x.is_finite()) {
            return Err(Error::EmptyDomain);
        }
        let axes = v.axes().to_vec();
        match v.axes() {
            [a] => Ok(Self { rows: vec![ConvexConjugate::new(&a.points(), v.values())], axes, sites2: Vec::new() }),
            [a, b] => {
                let s1 = a.points();
                let rows = (0..b.count)
                    .into_par_iter()
                    .map(|j| {
                        let vals: Vec<f64> = (0..a.count).map(|i| v.at(&[i, j])).collect();
                        ConvexConjugate::new(&s1, &vals)
                    })
                    .collect();
                Ok(Self { axes, rows, sites2: b.points() })
            }
            _ => unreachable!(),
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    // -W_j(y1) = -(sup_i x1_i y1 - V_ij): the second-pass values at fixed y1
    fn column(&self, y1: f64) -> Vec<f64> {
        self.rows.iter().map(|r| r.as_ref().map_or(f64::INFINITY, |c| -c.eval(y1))).collect()
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match y {
            [y0] => self.rows[0].as_ref().expect("non-empty").eval(*y0),
            [y1, y2] => ConvexConjugate::new(&self.sites2, &self.column(*y1)).expect("non-empty").eval(*y2),
            _ => panic!("conjugate evaluated at a point of wrong dimension"),
        }
    }

    pub fn eval_points(&self, points: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let n = points.len() / dim;
        if dim == 1 {
            return points.par_iter().map(|&y| self.rows[0].as_ref().expect("non-empty").eval(y)).collect();
        }
        let groups = group_by_first(points, dim);
        let parts: Vec<Vec<(usize, f64)>> = groups
            .par_iter()
            .map(|(y1, members)| {
                let conj = ConvexConjugate::new(&self.sites2, &self.column(*y1)).expect("non-empty");
                members.iter().map(|&i| (i, conj.eval(points[i * dim + 1]))).collect()
            })
            .collect();
        let mut out = vec![0.0; n];
        for (i, v) in parts.into_iter().flatten() {
            out[i] = v;
        }
        out
    }

    pub fn on_grid(&self, axes: &[Axis]) -> Result<GridFunction> {
        if axes.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: axes.len() });
        }
        let values = match axes {
            [a] => {
                let ys = a.points();
                let mut out = vec![0.0; ys.len()];
                self.rows[0].as_ref().expect("non-empty").eval_sorted(&ys, &mut out);
                out
            }
            [a, b] => {
                let (y1s, y2s) = (a.points(), b.points());
                let mut w = vec![vec![f64::INFINITY; y1s.len()]; self.rows.len()];
                w.par_iter_mut().zip(&self.rows).for_each(|(col, row)| {
                    if let Some(conj) = row {
                        conj.eval_sorted(&y1s, col);
                        col.iter_mut().for_each(|v| *v = -*v);
                    }
                });
                let rows: Vec<Vec<f64>> = (0..y1s.len())
                    .into_par_iter()
                    .map(|i| {
                        let vals: Vec<f64> = w.iter().map(|col| col[i]).collect();
                        let conj = ConvexConjugate::new(&self.sites2, &vals).expect("non-empty");
                        let mut out = vec![0.0; y2s.len()];
                        conj.eval_sorted(&y2s, &mut out);
                        out
                    })
                    .collect();
                rows.concat()
            }
            _ => unreachable!(),
        };
        GridFunction::new(axes.to_vec(), values, Polarity::Conjugate)
    }
}

/// `V*` on the same grid as `V`. Non-convex inputs give the conjugate of
/// their convexification.
pub fn legendre(v: &GridFunction) -> Result<GridFunction> {
    ConjugateField::build(v)?.on_grid(v.axes())
}

/// `V*` on another set of axes.
pub fn legendre_on(v: &GridFunction, axes: &[Axis]) -> Result<GridFunction> {
    ConjugateField::build(v)?.on_grid(axes)
}

/// `V*` such that `g = e^{-V*}` is the polar function of `f = e^{-V}`.
pub fn polar_function(v: &GridFunction) -> Result<GridFunction> {
    legendre(v)
}

/// Samples `V = -log f` on `axes` (`+inf` where `f = 0`), ready for [`legendre`].
pub fn sample_energy(log_f: &Potential, axes: &[Axis]) -> Result<GridFunction> {
    if axes.len() != log_f.dim() {
        return Err(Error::DimensionMismatch { expected: log_f.dim(), got: axes.len() });
    }
    GridFunction::sample(axes.to_vec(), Polarity::Conjugate, |x| -log_f.eval_unchecked(x))
}

/// The polar density `g = e^{-V*}` of `f = e^{-V}`, by whichever route applies.
#[derive(Debug, Clone)]
pub enum Polar {
    /// `log g` in closed form (Gaussian family, pure gauge powers).
    Exact(Potential),
    Grid(Arc<ConjugateField>),
}

impl Polar {
    pub fn build(log_f: &Potential, route: Route, axes: Option<&[Axis]>) -> Result<Self> {
        if route == Route::Auto {
            if let Some(form) = log_f.as_quadratic() {
                return Ok(Polar::Exact(Potential::from_form(form.polar_log_density()?)?));
            }
            if let Kind::GaugePower { body, exponent, scale } = log_f.kind() {
                if *exponent > 1.0 && *scale < 0.0 {
                    return Ok(Polar::Exact(polar_gauge_power(body, *exponent, -scale)?));
                }
            }
        }
        let axes = match axes {
            Some(a) => a.to_vec(),
            None => default_axes(log_f.dim())?,
        };
        Ok(Polar::Grid(Arc::new(ConjugateField::build(&sample_energy(log_f, &axes)?)?)))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Polar::Exact(_))
    }

    /// `log g = -V*` at flat `points`.
    pub fn log_density_points(&self, points: &[f64]) -> Vec<f64> {
        match self {
            Polar::Exact(p) => {
                let d = p.dim();
                points.par_chunks(d).map(|y| p.eval_unchecked(y)).collect()
            }
            Polar::Grid(field) => field.eval_points(points).into_iter().map(|v| -v).collect(),
        }
    }
}

/// For `V = alpha ||x||_K^p` (`p > 1`), `V*(y) = (1 - 1/p) (alpha p)^{-1/(p-1)} h_K(y)^{p/(p-1)}`
/// with `h_K` the gauge of the polar body. Returns `log g = -V*`.
fn polar_gauge_power(body: &Arc<ConvexPolygon>, p: f64, alpha: f64) -> Result<Potential> {
    let q = p / (p - 1.0);
    let coeff = (1.0 - 1.0 / p) * (alpha * p).powf(-1.0 / (p - 1.0));
    Potential::gauge_power(Arc::new(body.polar()?), q, -coeff)
}

/// `log f = -||x||_P^p / p`.
pub fn gauge_potential(body: &ConvexPolygon, p: f64) -> Result<Potential> {
    if !body.contains_origin_strictly() {
        return Err(Error::OriginOutside);
    }
    Potential::gauge_power(Arc::new(body.clone()), p, -1.0 / p)
}

/// Breakpoints for a polar quadrature rule adapted to a gauge density and its polar.
pub fn gauge_breakpoints(body: &ConvexPolygon) -> Result<Vec<f64>> {
    let mut cuts = body.vertex_angles();
    cuts.extend(body.polar()?.vertex_angles());
    Ok(cuts)
}
