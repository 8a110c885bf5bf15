//! Drift policies `u(t, x)` for the controlled process `dX = u dt + dB`.

use std::sync::Arc;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::potential::{Potential, MAX_DIM};
use crate::quad::QuadratureRule;
use crate::quadratic::QuadraticForm;

#[derive(Debug, Clone)]
pub enum DriftKind {
    Zero,
    Constant(Vec<f64>),
    /// Optimal drift of `phi = -1/2 x'Qx + a.x + c`: `u = (I + sQ)^{-1}(a - Qx)`, `s = 1 - t`.
    /// `Q = V diag(eig) V'` is stored row-major in `basis` (columns are eigenvectors).
    Affine { form: QuadraticForm, basis: Vec<f64>, eig: Vec<f64> },
    /// `u = grad log P_s e^phi` by Gaussian integration by parts, `s = max(1 - t, s_min)`.
    Semigroup { phi: Potential, rule: Arc<QuadratureRule>, log_weights: Vec<f64>, s_min: f64 },
}

/// Immutable and shareable across worker threads.
#[derive(Debug, Clone)]
pub struct DriftPolicy {
    dim: usize,
    kind: DriftKind,
    label: String,
}

impl DriftPolicy {
    pub fn zero(dim: usize) -> Self {
        Self { dim, kind: DriftKind::Zero, label: "zero".into() }
    }

    pub fn constant(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.len() > MAX_DIM || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("constant drift needs 1..=10 finite components".into()));
        }
        let label = format!("constant{a:?}");
        Ok(Self { dim: a.len(), kind: DriftKind::Constant(a), label })
    }

    /// Closed-form optimal drift for a Gaussian-family potential.
    pub fn affine(form: &QuadraticForm) -> Result<Self> {
        form.check_integrable()?;
        let n = form.dim();
        let eigen = SymmetricEigen::new(form.q().clone());
        let mut basis = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                basis[i * n + j] = eigen.eigenvectors[(i, j)];
            }
        }
        Ok(Self {
            dim: n,
            kind: DriftKind::Affine { form: form.clone(), basis, eig: eigen.eigenvalues.iter().copied().collect() },
            label: "closed-form".into(),
        })
    }

    pub fn semigroup(phi: Potential, rule: Arc<QuadratureRule>, s_min: f64) -> Result<Self> {
        if rule.dim() != phi.dim() {
            return Err(Error::DimensionMismatch { expected: phi.dim(), got: rule.dim() });
        }
        if phi.dim() > 3 {
            return Err(Error::UnsupportedDimension { dim: phi.dim(), context: "semigroup drifts need n <= 3" });
        }
        if !(s_min > 0.0 && s_min <= 1.0) {
            return Err(Error::InvalidParameter(format!("s_min must lie in (0, 1], got {s_min}")));
        }
        let log_weights = rule.weights().iter().map(|w| w.ln()).collect();
        let label = format!("semigroup[{}]", rule.label());
        Ok(Self { dim: phi.dim(), kind: DriftKind::Semigroup { phi, rule, log_weights, s_min }, label })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &DriftKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self.kind, DriftKind::Semigroup { .. })
    }

    /// Writes `u(t, x)` into `out` and reports whether the time-to-go clamp engaged.
    /// Non-finite output signals an evaluation failure.
    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> bool {
        let n = self.dim;
        match &self.kind {
            DriftKind::Zero => {
                out.fill(0.0);
                false
            }
            DriftKind::Constant(a) => {
                out.copy_from_slice(a);
                false
            }
            DriftKind::Affine { form, basis, eig } => {
                let s = 1.0 - t;
                let (q, a) = (form.q(), form.a());
                let mut g = [0.0; MAX_DIM];
                for i in 0..n {
                    let mut acc = a[i];
                    for j in 0..n {
                        acc -= q[(i, j)] * x[j];
                    }
                    g[i] = acc;
                }
                let mut r = [0.0; MAX_DIM];
                for k in 0..n {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += basis[i * n + k] * g[i];
                    }
                    r[k] = acc / (1.0 + s * eig[k]);
                }
                for i in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += basis[i * n + k] * r[k];
                    }
                    out[i] = acc;
                }
                false
            }
            DriftKind::Semigroup { phi, rule, log_weights, s_min } => {
                let clamped = 1.0 - t < *s_min;
                let s = (1.0 - t).max(*s_min);
                match ibp_gradient(phi, rule, log_weights, s, x, out) {
                    Some(_) => {}
                    None => out.fill(f64::NAN),
                }
                clamped
            }
        }
    }
}

/// `log P_s e^phi(x)` into the return value and `grad log P_s e^phi(x)` into `grad`,
/// via `grad P_s h(x) = s^{-1/2} int z h(x + sqrt(s) z) dgamma(z)`. `None` on underflow.
pub(crate) fn ibp_gradient(
    phi: &Potential,
    rule: &QuadratureRule,
    log_weights: &[f64],
    s: f64,
    x: &[f64],
    grad: &mut [f64],
) -> Option<f64> {
    let n = x.len();
    let rs = s.sqrt();
    let mut y = [0.0; 3];
    let pts = rule.points();
    let mut max = f64::NEG_INFINITY;
    for i in 0..rule.len() {
        for d in 0..n {
            y[d] = x[d] + rs * pts[i * n + d];
        }
        max = max.max(phi.eval_unchecked(&y[..n]) + log_weights[i]);
    }
    if !max.is_finite() {
        return None;
    }
    let mut total = 0.0;
    let mut moment = [0.0; 3];
    for i in 0..rule.len() {
        let z = &pts[i * n..(i + 1) * n];
        for d in 0..n {
            y[d] = x[d] + rs * z[d];
        }
        let e = (phi.eval_unchecked(&y[..n]) + log_weights[i] - max).exp();
        total += e;
        for d in 0..n {
            moment[d] += z[d] * e;
        }
    }
    for d in 0..n {
        grad[d] = moment[d] / (total * rs);
    }
    Some(max + total.ln())
}
