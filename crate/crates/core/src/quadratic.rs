//! The Gaussian family `phi(x) = -1/2 x'Qx + a.x + c`.
//!
//! Every quantity the laboratory estimates numerically has a closed form on
//! this family. These closed forms are the exact route that quadrature,
//! grid transforms and simulation are checked against.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Smallest admissible eigenvalue of `I + Q`.
pub const INTEGRABILITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    q: DMatrix<f64>,
    a: DVector<f64>,
    c: f64,
}

fn cholesky(m: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::InvalidParameter(format!("{what} is not positive definite")))
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

impl QuadraticForm {
    /// Builds the form without the integrability guard; `Q` is symmetrized.
    pub fn new(q: DMatrix<f64>, a: DVector<f64>, c: f64) -> Result<Self> {
        let n = a.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: q.nrows() });
        }
        if q.iter().chain(a.iter()).any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(Error::NonFinite("quadratic coefficients".into()));
        }
        let scale = q.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (q[(i, j)] - q[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter("Q must be symmetric".into()));
                }
            }
        }
        let q = (&q + q.transpose()) * 0.5;
        Ok(Self { q, a, c })
    }

    pub fn zero(n: usize) -> Self {
        Self { q: DMatrix::zeros(n, n), a: DVector::zeros(n), c: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn a(&self) -> &DVector<f64> {
        &self.a
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Smallest eigenvalue of the effective Gaussian precision `I + Q` of `e^phi dgamma`.
    pub fn precision_floor(&self) -> f64 {
        min_eigenvalue(&(DMatrix::identity(self.dim(), self.dim()) + &self.q))
    }

    pub fn check_integrable(&self) -> Result<()> {
        let m = self.precision_floor();
        if m >= INTEGRABILITY_FLOOR {
            Ok(())
        } else {
            Err(Error::Integrability { min_eigenvalue: m, floor: INTEGRABILITY_FLOOR })
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..n {
            let row: f64 = x.iter().enumerate().map(|(j, xj)| self.q[(i, j)] * xj).sum();
            quad += x[i] * row;
            lin += self.a[i] * x[i];
        }
        -0.5 * quad + lin + self.c
    }

    /// `a - Qx`.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| self.a[i] - (0..n).map(|j| self.q[(i, j)] * x[j]).sum::<f64>())
            .collect()
    }

    pub fn is_even(&self) -> bool {
        self.a.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { q: &self.q * k, a: &self.a * k, c: self.c * k }
    }

    pub fn offset(&self, by: f64) -> Self {
        Self { c: self.c + by, ..self.clone() }
    }

    /// `phi(x) + sign |x|^2 / 2`.
    pub fn plus_half_square(&self, sign: f64) -> Self {
        let n = self.dim();
        Self { q: &self.q - DMatrix::identity(n, n) * sign, ..self.clone() }
    }

    /// `phi(x - by)`.
    pub fn shifted(&self, by: &[f64]) -> Self {
        let x0 = DVector::from_column_slice(by);
        let qx0 = &self.q * &x0;
        let c = self.c - 0.5 * x0.dot(&qx0) - self.a.dot(&x0);
        Self { q: self.q.clone(), a: &self.a + qx0, c }
    }

    /// `log int e^phi dgamma_n = -1/2 log det(I+Q) + 1/2 a'(I+Q)^{-1}a + c`.
    pub fn log_partition(&self) -> Result<f64> {
        self.check_integrable()?;
        let n = self.dim();
        let chol = cholesky(DMatrix::identity(n, n) + &self.q, "I + Q")?;
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let sol = chol.solve(&self.a);
        Ok(-0.5 * logdet + 0.5 * self.a.dot(&sol) + self.c)
    }

    /// Mean of the tilted Gaussian `e^phi dgamma_n` normalized: `(I+Q)^{-1} a`.
    pub fn barycenter(&self) -> Result<Vec<f64>> {
        self.check_integrable()?;
        let n = self.dim();
        let chol = cholesky(DMatrix::identity(n, n) + &self.q, "I + Q")?;
        Ok(chol.solve(&self.a).as_slice().to_vec())
    }

    /// `log P_s e^phi (x) = phi(x) - 1/2 log det(I+sQ) + s/2 g'(I+sQ)^{-1} g`, `g = grad phi(x)`.
    pub fn log_heat(&self, s: f64, x: &[f64]) -> Result<f64> {
        let n = self.dim();
        let chol = cholesky(DMatrix::identity(n, n) + &self.q * s, "I + sQ")?;
        let g = DVector::from_vec(self.grad(x));
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(self.eval(x) - 0.5 * logdet + 0.5 * s * g.dot(&chol.solve(&g)))
    }

    /// Largest `psi` with `phi(x) + psi(y) <= c|x-y|^2`:
    /// `psi(y) = inf_x c|x-y|^2 - phi(x)`, attained at `x = (2cI+Q)^{-1}(2cy + a)`.
    pub fn moreau_partner(&self, c: f64) -> Result<QuadraticForm> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("coupling constant must be positive, got {c}")));
        }
        let n = self.dim();
        let r = DMatrix::identity(n, n) * (2.0 * c) + &self.q;
        let chol = cholesky(r, "2cI + Q (partner is -inf everywhere)")?;
        let r_inv = chol.inverse();
        let q = &r_inv * (4.0 * c * c) - DMatrix::identity(n, n) * (2.0 * c);
        let ra = &r_inv * &self.a;
        let a = &ra * (-2.0 * c);
        let c0 = -self.c - 0.5 * self.a.dot(&ra);
        QuadraticForm::new(q, a, c0)
    }

    /// Reading `phi` as `log f`, returns `log g` with `g = e^{-V*}`, `V = -log f`.
    /// Needs `Q` positive definite; otherwise `V*` is infinite off a subspace.
    pub fn polar_log_density(&self) -> Result<QuadraticForm> {
        let chol = cholesky(self.q.clone(), "Q (f is not a log-concave Gaussian)")?;
        if min_eigenvalue(&self.q) < INTEGRABILITY_FLOOR {
            return Err(Error::Integrability { min_eigenvalue: min_eigenvalue(&self.q), floor: INTEGRABILITY_FLOOR });
        }
        let q_inv = chol.inverse();
        let qa = &q_inv * &self.a;
        let c0 = -0.5 * self.a.dot(&qa) - self.c;
        QuadraticForm::new(q_inv, -qa, c0)
    }

    /// Coefficients of the optimal drift `u(t, x) = (I + sQ)^{-1}(a - Qx)`, `s = 1 - t`.
    /// Returns the eigendecomposition `Q = V diag(mu) V'`.
    pub fn drift_spectrum(&self) -> (DMatrix<f64>, DVector<f64>) {
        let eig = SymmetricEigen::new(self.q.clone());
        (eig.eigenvectors, eig.eigenvalues)
    }
}
