//! Scalar potentials `phi: R^n -> R u {-inf}`.
//!
//! A [`Potential`] plays two roles. On the (tau) side it is the exponent
//! integrated as `e^phi dgamma_n`; on the Santalo side it is `log f` for a
//! density integrated against Lebesgue measure. [`santalo_to_tau`] and
//! [`tau_to_santalo`] convert between the two by adding or removing `|x|^2/2`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::duality::polygon::ConvexPolygon;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::numeric::norm_sq;
use crate::quadratic::QuadraticForm;

pub const MAX_DIM: usize = 10;

#[derive(Debug, Clone)]
pub enum Kind {
    Constant(f64),
    Linear(Vec<f64>),
    Quadratic(QuadraticForm),
    /// `-coeff |x|^4 / 4`.
    Quartic { coeff: f64 },
    /// `scale * ||x||_K^exponent` (planar only).
    GaugePower { body: Arc<ConvexPolygon>, exponent: f64, scale: f64 },
    Grid(Arc<GridFunction>),
    /// `inner(x - by)`.
    Shifted { inner: Arc<Potential>, by: Vec<f64> },
    /// `factor * inner(x)`, `factor > 0`.
    Scaled { inner: Arc<Potential>, factor: f64 },
    /// `inner(x) + by`.
    Offset { inner: Arc<Potential>, by: f64 },
    /// `inner(x) + sign |x|^2 / 2`, `sign = +-1`.
    HalfSquare { inner: Arc<Potential>, sign: f64 },
}

#[derive(Debug, Clone)]
pub struct Potential {
    dim: usize,
    kind: Kind,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        Err(Error::UnsupportedDimension { dim, context: "potentials live in dimensions 1..=10" })
    } else {
        Ok(())
    }
}

impl Potential {
    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        check_dim(dim)?;
        if !c.is_finite() {
            return Err(Error::NonFinite("constant potential".into()));
        }
        Ok(Self { dim, kind: Kind::Constant(c) })
    }

    pub fn linear(a: Vec<f64>) -> Result<Self> {
        check_dim(a.len())?;
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear coefficients".into()));
        }
        Ok(Self { dim: a.len(), kind: Kind::Linear(a) })
    }

    /// `-1/2 x'Qx + a.x + c`; rejects forms whose `I + Q` is not safely positive definite.
    pub fn quadratic(q: DMatrix<f64>, a: Vec<f64>, c: f64) -> Result<Self> {
        check_dim(a.len())?;
        let form = QuadraticForm::new(q, DVector::from_vec(a), c)?;
        Self::from_form(form)
    }

    pub fn from_form(form: QuadraticForm) -> Result<Self> {
        check_dim(form.dim())?;
        form.check_integrable()?;
        Ok(Self { dim: form.dim(), kind: Kind::Quadratic(form) })
    }

    /// `-lambda |x|^2 / 2`.
    pub fn isotropic(dim: usize, lambda: f64) -> Result<Self> {
        check_dim(dim)?;
        Self::quadratic(DMatrix::identity(dim, dim) * lambda, vec![0.0; dim], 0.0)
    }

    pub fn quartic(dim: usize, coeff: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(coeff > 0.0 && coeff.is_finite()) {
            return Err(Error::InvalidParameter(format!("quartic coefficient must be positive, got {coeff}")));
        }
        Ok(Self { dim, kind: Kind::Quartic { coeff } })
    }

    pub fn gauge_power(body: Arc<ConvexPolygon>, exponent: f64, scale: f64) -> Result<Self> {
        if !body.contains_origin_strictly() {
            return Err(Error::OriginOutside);
        }
        if !(exponent > 0.0 && exponent.is_finite() && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("gauge power needs exponent > 0, got {exponent}")));
        }
        Ok(Self { dim: 2, kind: Kind::GaugePower { body, exponent, scale } })
    }

    pub fn grid(g: GridFunction) -> Self {
        Self { dim: g.dim(), kind: Kind::Grid(Arc::new(g)) }
    }

    pub fn shifted(self, by: Vec<f64>) -> Result<Self> {
        if by.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: by.len() });
        }
        Ok(Self { dim: self.dim, kind: Kind::Shifted { inner: Arc::new(self), by } })
    }

    pub fn scaled(self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale factor must be positive, got {factor}")));
        }
        Ok(Self { dim: self.dim, kind: Kind::Scaled { inner: Arc::new(self), factor } })
    }

    pub fn offset(self, by: f64) -> Result<Self> {
        if !by.is_finite() {
            return Err(Error::NonFinite("offset".into()));
        }
        Ok(Self { dim: self.dim, kind: Kind::Offset { inner: Arc::new(self), by } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    /// `phi(x)`; finite or `-inf`, never `+inf`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Constant(c) => *c,
            Kind::Linear(a) => a.iter().zip(x).map(|(a, x)| a * x).sum(),
            Kind::Quadratic(f) => f.eval(x),
            Kind::Quartic { coeff } => {
                let r2 = norm_sq(x);
                -coeff * r2 * r2 / 4.0
            }
            Kind::GaugePower { body, exponent, scale } => {
                let g = body.gauge_unchecked([x[0], x[1]]);
                if g == 0.0 {
                    0.0
                } else {
                    scale * g.powf(*exponent)
                }
            }
            Kind::Grid(g) => g.eval(x).unwrap_or(f64::NEG_INFINITY),
            Kind::Shifted { inner, by } => {
                let y: Vec<f64> = x.iter().zip(by).map(|(x, b)| x - b).collect();
                inner.eval_unchecked(&y)
            }
            Kind::Scaled { inner, factor } => factor * inner.eval_unchecked(x),
            Kind::Offset { inner, by } => inner.eval_unchecked(x) + by,
            Kind::HalfSquare { inner, sign } => {
                let v = inner.eval_unchecked(x);
                if v == f64::NEG_INFINITY {
                    v
                } else {
                    v + sign * 0.5 * norm_sq(x)
                }
            }
        }
    }

    pub fn has_gradient(&self) -> bool {
        match &self.kind {
            Kind::Grid(_) => false,
            Kind::Shifted { inner, .. }
            | Kind::Scaled { inner, .. }
            | Kind::Offset { inner, .. }
            | Kind::HalfSquare { inner, .. } => inner.has_gradient(),
            _ => true,
        }
    }

    /// Closed-form gradient; grid-backed potentials report [`Error::GradientUnavailable`].
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        match &self.kind {
            Kind::Constant(_) => Ok(vec![0.0; self.dim]),
            Kind::Linear(a) => Ok(a.clone()),
            Kind::Quadratic(f) => Ok(f.grad(x)),
            Kind::Quartic { coeff } => {
                let r2 = norm_sq(x);
                Ok(x.iter().map(|v| -coeff * r2 * v).collect())
            }
            Kind::GaugePower { body, exponent, scale } => {
                let p = [x[0], x[1]];
                let g = body.gauge_unchecked(p);
                if g == 0.0 {
                    return if *exponent > 1.0 { Ok(vec![0.0, 0.0]) } else { Err(Error::NotDifferentiable) };
                }
                let w = body.gauge_face(p);
                let k = scale * exponent * g.powf(exponent - 1.0);
                Ok(vec![k * w[0], k * w[1]])
            }
            Kind::Grid(_) => Err(Error::GradientUnavailable("grid-backed")),
            Kind::Shifted { inner, by } => {
                let y: Vec<f64> = x.iter().zip(by).map(|(x, b)| x - b).collect();
                inner.grad(&y)
            }
            Kind::Scaled { inner, factor } => Ok(inner.grad(x)?.into_iter().map(|g| factor * g).collect()),
            Kind::Offset { inner, .. } => inner.grad(x),
            Kind::HalfSquare { inner, sign } => {
                Ok(inner.grad(x)?.into_iter().zip(x).map(|(g, x)| g + sign * x).collect())
            }
        }
    }

    /// Central differences with step `1e-5 * (1 + |x|)`.
    pub fn grad_fd(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let h = 1e-5 * (1.0 + norm_sq(x).sqrt());
        let mut probe = x.to_vec();
        let mut out = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            probe[i] = x[i] + h;
            let up = self.eval_unchecked(&probe);
            probe[i] = x[i] - h;
            let down = self.eval_unchecked(&probe);
            probe[i] = x[i];
            if !(up.is_finite() && down.is_finite()) {
                return Err(Error::NotDifferentiable);
            }
            out.push((up - down) / (2.0 * h));
        }
        Ok(out)
    }

    /// Closed-form gradient when available, finite differences otherwise.
    pub fn grad_or_fd(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.grad(x) {
            Err(Error::GradientUnavailable(_)) => self.grad_fd(x),
            other => other,
        }
    }

    /// Normal form when the potential belongs to the Gaussian family.
    pub fn as_quadratic(&self) -> Option<QuadraticForm> {
        let n = self.dim;
        match &self.kind {
            Kind::Constant(c) => Some(QuadraticForm::zero(n).offset(*c)),
            Kind::Linear(a) => QuadraticForm::new(DMatrix::zeros(n, n), DVector::from_column_slice(a), 0.0).ok(),
            Kind::Quadratic(f) => Some(f.clone()),
            Kind::Shifted { inner, by } => inner.as_quadratic().map(|f| f.shifted(by)),
            Kind::Scaled { inner, factor } => inner.as_quadratic().map(|f| f.scaled(*factor)),
            Kind::Offset { inner, by } => inner.as_quadratic().map(|f| f.offset(*by)),
            Kind::HalfSquare { inner, sign } => inner.as_quadratic().map(|f| f.plus_half_square(*sign)),
            _ => None,
        }
    }

    /// Evenness known from construction: zero linear part, origin-symmetric gauge.
    pub fn is_even(&self) -> bool {
        match &self.kind {
            Kind::Constant(_) | Kind::Quartic { .. } => true,
            Kind::Linear(a) => a.iter().all(|v| *v == 0.0),
            Kind::Quadratic(f) => f.is_even(),
            Kind::GaugePower { body, .. } => body.is_origin_symmetric(0.0),
            Kind::Grid(_) => false,
            Kind::Shifted { inner, by } => by.iter().all(|v| *v == 0.0) && inner.is_even(),
            Kind::Scaled { inner, .. } | Kind::Offset { inner, .. } | Kind::HalfSquare { inner, .. } => {
                inner.is_even()
            }
        }
    }

    /// Directions (angles in `[0, 2pi)`) along which a planar potential has kinks.
    pub fn kink_angles(&self) -> Vec<f64> {
        match &self.kind {
            Kind::GaugePower { body, .. } => body.vertex_angles(),
            Kind::Scaled { inner, .. } | Kind::Offset { inner, .. } | Kind::HalfSquare { inner, .. } => {
                inner.kink_angles()
            }
            _ => Vec::new(),
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            Kind::Constant(c) => format!("const({c})"),
            Kind::Linear(a) => format!("linear({a:?})"),
            Kind::Quadratic(f) => format!("quadratic(n={})", f.dim()),
            Kind::Quartic { coeff } => format!("quartic({coeff})"),
            Kind::GaugePower { exponent, scale, .. } => format!("gauge^{exponent}*{scale}"),
            Kind::Grid(_) => "grid".into(),
            Kind::Shifted { inner, .. } => format!("shift[{}]", inner.label()),
            Kind::Scaled { inner, factor } => format!("{factor}*[{}]", inner.label()),
            Kind::Offset { inner, by } => format!("[{}]+{by}", inner.label()),
            Kind::HalfSquare { inner, sign } => {
                format!("[{}]{}|x|^2/2", inner.label(), if *sign > 0.0 { "+" } else { "-" })
            }
        }
    }
}

fn half_square(p: &Potential, sign: f64) -> Result<Potential> {
    // Undo an opposite-sign wrapper exactly instead of stacking.
    if let Kind::HalfSquare { inner, sign: s } = &p.kind {
        if *s == -sign {
            return Ok((**inner).clone());
        }
    }
    let out = Potential { dim: p.dim, kind: Kind::HalfSquare { inner: Arc::new(p.clone()), sign } };
    Ok(out)
}

/// `phi = log f + |x|^2/2`, so that `int e^phi dgamma_n = (2pi)^{-n/2} int f dx`.
pub fn santalo_to_tau(log_f: &Potential) -> Result<Potential> {
    let phi = half_square(log_f, 1.0)?;
    if let Some(form) = phi.as_quadratic() {
        form.check_integrable()?;
    }
    Ok(phi)
}

/// Inverse of [`santalo_to_tau`]: `log f = phi - |x|^2/2`.
pub fn tau_to_santalo(phi: &Potential) -> Result<Potential> {
    half_square(phi, -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, Polarity};

    #[test]
    fn eval_examples() {
        assert_eq!(Potential::constant(2, 3.0).unwrap().eval(&[0.0, 0.0]).unwrap(), 3.0);
        assert_eq!(Potential::linear(vec![1.0, 2.0]).unwrap().eval(&[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(Potential::isotropic(1, 1.0).unwrap().eval(&[2.0]).unwrap(), -2.0);
    }

    #[test]
    fn eval_dimension_mismatch() {
        let p = Potential::constant(2, 1.0).unwrap();
        assert_eq!(p.eval(&[1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn grad_examples() {
        let lin = Potential::linear(vec![1.5, -2.0]).unwrap();
        assert_eq!(lin.grad(&[9.0, 9.0]).unwrap(), vec![1.5, -2.0]);
        assert_eq!(Potential::isotropic(1, 1.0).unwrap().grad(&[2.0]).unwrap(), vec![-2.0]);
    }

    #[test]
    fn gauge_gradient_against_independent_gauge() {
        // Oracle: gauge by bisection on point-in-polygon, then central differences on g^2/2.
        let sq = Arc::new(ConvexPolygon::square());
        let p = Potential::gauge_power(sq.clone(), 2.0, 0.5).unwrap();
        let inside = |x: [f64; 2]| x[0].abs() <= 1.0 && x[1].abs() <= 1.0;
        let gauge = |x: [f64; 2]| {
            let (mut lo, mut hi) = (0.0f64, 100.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if inside([x[0] / mid, x[1] / mid]) {
                    hi = mid
                } else {
                    lo = mid
                }
            }
            hi
        };
        let h = 1e-6;
        let f = |x: [f64; 2]| 0.5 * gauge(x).powi(2);
        let fd0 = (f([0.5 + h, 0.0]) - f([0.5 - h, 0.0])) / (2.0 * h);
        let fd1 = (f([0.5, h]) - f([0.5, -h])) / (2.0 * h);
        let g = p.grad(&[0.5, 0.0]).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-12 && g[1].abs() < 1e-12);
        assert!((fd0 - 0.5).abs() < 1e-5 && fd1.abs() < 1e-5);
    }

    #[test]
    fn grid_gradient_needs_fallback() {
        let g = GridFunction::sample(vec![Axis::new(-2.0, 2.0, 401).unwrap()], Polarity::Potential, |x| x[0] * x[0]).unwrap();
        let p = Potential::grid(g);
        assert_eq!(p.grad(&[0.3]), Err(Error::GradientUnavailable("grid-backed")));
        let fd = p.grad_or_fd(&[0.305]).unwrap();
        assert!((fd[0] - 0.61).abs() < 1e-3);
    }

    #[test]
    fn integrability_guard_rejects() {
        assert!(matches!(Potential::isotropic(1, -1.0), Err(Error::Integrability { .. })));
        assert!(Potential::isotropic(1, -1.0 + 1e-3).is_ok());
    }

    #[test]
    fn bridge_examples() {
        // log f = -|x|^2 / 2 -> phi = 0
        let gauss = Potential::isotropic(3, 1.0).unwrap();
        let phi = santalo_to_tau(&gauss).unwrap();
        for x in [[0.1, -2.0, 3.0], [5.0, 0.0, 1.0]] {
            assert!(phi.eval(&x).unwrap().abs() < 1e-12);
        }
        // log f = -x^2 -> phi = -x^2 / 2
        let lf = Potential::isotropic(1, 2.0).unwrap();
        let phi = santalo_to_tau(&lf).unwrap();
        assert!((phi.eval(&[1.5]).unwrap() + 1.125).abs() < 1e-15);
        assert!((phi.as_quadratic().unwrap().q()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bridge_round_trip_is_exact() {
        let sq = Arc::new(ConvexPolygon::square());
        let cases = vec![
            Potential::quartic(2, 1.0).unwrap(),
            Potential::gauge_power(sq, 2.0, -0.5).unwrap(),
            Potential::isotropic(2, 3.0).unwrap().shifted(vec![0.3, -1.0]).unwrap(),
        ];
        for lf in cases {
            let back = tau_to_santalo(&santalo_to_tau(&lf).unwrap()).unwrap();
            for i in -10..=10 {
                for j in -10..=10 {
                    let x = [0.37 * i as f64, 0.21 * j as f64];
                    assert_eq!(back.eval(&x).unwrap().to_bits(), lf.eval(&x).unwrap().to_bits());
                }
            }
        }
    }

    #[test]
    fn bridge_guard() {
        // log f = 0 gives phi = |x|^2/2, whose e^phi dgamma is not integrable.
        let flat = Potential::constant(1, 0.0).unwrap();
        assert!(matches!(santalo_to_tau(&flat), Err(Error::Integrability { .. })));
    }

    #[test]
    fn evenness_detector() {
        let sq = Arc::new(ConvexPolygon::square());
        let even = [
            Potential::quartic(2, 1.0).unwrap(),
            Potential::gauge_power(sq, 2.0, -0.5).unwrap(),
            Potential::isotropic(2, 0.5).unwrap(),
        ];
        for p in &even {
            assert!(p.is_even());
            for k in 0..50 {
                let x = [(k as f64 * 0.731).sin() * 3.0, (k as f64 * 1.3).cos() * 2.0];
                assert_eq!(p.eval(&x).unwrap(), p.eval(&[-x[0], -x[1]]).unwrap());
            }
        }
        assert!(!Potential::linear(vec![1.0, 0.0]).unwrap().is_even());
    }
}
