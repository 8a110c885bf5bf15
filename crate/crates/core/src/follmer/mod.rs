//! Borell's variational formula and its optimal drift.
//!
//! The optimal drift is `u(t, x) = grad log P_{1-t} e^phi (x)` with the heat
//! semigroup `P_s h(x) = int h(x + sqrt(s) z) dgamma(z)`. The gradient is taken
//! by Gaussian integration by parts, so `phi` itself need not be differentiable.

pub mod drift;
pub mod sim;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use drift::{DriftKind, DriftPolicy};
pub use sim::{drive, path_increments, probe_steps, simulate, PathBundle, Record, SimConfig, Trace};

use crate::error::{Error, Result};
use crate::numeric::mean_and_se;
use crate::potential::Potential;
use crate::quad::{McEstimate, QuadratureRule};

fn check_time_to_go(phi: &Potential, s: f64, x: &[f64], rule: &QuadratureRule) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidParameter(format!("time-to-go must lie in (0, 1], got {s}")));
    }
    if x.len() != phi.dim() || rule.dim() != phi.dim() {
        return Err(Error::DimensionMismatch { expected: phi.dim(), got: x.len().min(rule.dim()) });
    }
    Ok(())
}

/// `log P_s e^phi (x)`.
pub fn log_heat_value(phi: &Potential, s: f64, x: &[f64], rule: &QuadratureRule) -> Result<f64> {
    check_time_to_go(phi, s, x, rule)?;
    let lw: Vec<f64> = rule.weights().iter().map(|w| w.ln()).collect();
    let mut g = vec![0.0; x.len()];
    drift::ibp_gradient(phi, rule, &lw, s, x, &mut g).ok_or(Error::Underflow)
}

/// `P_s e^phi (x)`; fails with `Underflow` or `Overflow` when not representable.
pub fn heat_value(phi: &Potential, s: f64, x: &[f64], rule: &QuadratureRule) -> Result<f64> {
    let v = log_heat_value(phi, s, x, rule)?.exp();
    if v == 0.0 {
        Err(Error::Underflow)
    } else if v.is_infinite() {
        Err(Error::Overflow("heat semigroup value"))
    } else {
        Ok(v)
    }
}

/// Quadrature-backed optimal drift with time-to-go clamp `s_min`.
pub fn follmer_drift(phi: &Potential, rule: Arc<QuadratureRule>, s_min: f64) -> Result<DriftPolicy> {
    DriftPolicy::semigroup(phi.clone(), rule, s_min)
}

/// Exact optimal drift on the Gaussian family, `None` elsewhere.
pub fn closed_form_follmer(phi: &Potential) -> Option<DriftPolicy> {
    let form = phi.as_quadratic()?;
    let n = form.dim();
    if form.q().iter().all(|v| *v == 0.0) {
        if form.a().iter().all(|v| *v == 0.0) {
            return Some(DriftPolicy::zero(n));
        }
        return DriftPolicy::constant(form.a().iter().copied().collect()).ok();
    }
    DriftPolicy::affine(&form).ok()
}

/// Closed form when available, otherwise quadrature-backed with `s_min = dt/2`.
pub fn optimal_drift(phi: &Potential, steps: usize) -> Result<DriftPolicy> {
    if let Some(d) = closed_form_follmer(phi) {
        return Ok(d);
    }
    let rule = Arc::new(QuadratureRule::default_for(phi.dim())?);
    follmer_drift(phi, rule, 0.5 / steps as f64)
}

fn payoffs(phi: &Potential, bundle: &PathBundle, control_variate: bool) -> Result<Vec<f64>> {
    if phi.dim() != bundle.dim {
        return Err(Error::DimensionMismatch { expected: phi.dim(), got: bundle.dim });
    }
    (0..bundle.paths)
        .map(|p| {
            let v = phi.eval_unchecked(bundle.terminal_of(p)) - bundle.cost[p];
            let v = if control_variate { v - bundle.martingale[p] } else { v };
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!("payoff on path {p}")))
            }
        })
        .collect()
}

/// `E[phi(X_1) - 1/2 int |u|^2 dt]` over the bundle.
pub fn borell_value(phi: &Potential, bundle: &PathBundle) -> Result<McEstimate> {
    McEstimate::from_samples(&payoffs(phi, bundle, false)?, bundle.seed)
}

/// [`borell_value`] minus the mean-zero term `int u . dB`. Same expectation;
/// for the optimal drift the subtraction removes nearly all variance.
pub fn borell_value_cv(phi: &Potential, bundle: &PathBundle) -> Result<McEstimate> {
    McEstimate::from_samples(&payoffs(phi, bundle, true)?, bundle.seed)
}

/// Discretization bias calibrated from `M` and `2M` steps on the same Brownian paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Richardson {
    pub coarse: McEstimate,
    pub fine: McEstimate,
    /// `2 |v_M - v_2M|`, the estimated `C dt` at the coarse step.
    pub bias: f64,
    /// `2 v_2M - v_M`.
    pub extrapolated: f64,
}

pub fn richardson(phi: &Potential, drift: &DriftPolicy, cfg: &SimConfig) -> Result<(Richardson, PathBundle)> {
    if cfg.refine != 1 {
        return Err(Error::InvalidParameter("richardson needs an unrefined base configuration".into()));
    }
    let coarse_cfg = SimConfig { refine: 2, ..cfg.clone() };
    let fine_cfg = SimConfig { steps: 2 * cfg.steps, record: Record::Probes, ..cfg.clone() };
    let coarse_bundle = simulate(drift, &coarse_cfg)?;
    let fine_bundle = simulate(drift, &fine_cfg)?;
    let coarse = borell_value(phi, &coarse_bundle)?;
    let fine = borell_value(phi, &fine_bundle)?;
    let bias = 2.0 * (coarse.mean - fine.mean).abs();
    let extrapolated = 2.0 * fine.mean - coarse.mean;
    Ok((Richardson { coarse, fine, bias, extrapolated }, coarse_bundle))
}

/// Sample means of `u_{t_k}` at the probe steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftProfile {
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    /// `probes * dim`.
    pub means: Vec<f64>,
    pub ses: Vec<f64>,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constancy {
    /// `max_k |mean_k - b|` over probes and coordinates.
    pub statistic: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Absolute floor on the constancy tolerance, for zero-variance profiles.
pub const CONSTANCY_FLOOR: f64 = 1e-9;

impl DriftProfile {
    pub fn constancy(&self, barycenter: &[f64]) -> Constancy {
        let mut statistic: f64 = 0.0;
        for (i, m) in self.means.iter().enumerate() {
            statistic = statistic.max((m - barycenter[i % self.dim]).abs());
        }
        let max_se = self.ses.iter().copied().fold(0.0, f64::max);
        let tolerance = (3.0 * max_se).max(CONSTANCY_FLOOR);
        Constancy { statistic, tolerance, pass: statistic <= tolerance }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,t");
        for d in 0..self.dim {
            out.push_str(&format!(",mean{d},se{d}"));
        }
        out.push('\n');
        for (i, (k, t)) in self.steps.iter().zip(&self.times).enumerate() {
            out.push_str(&format!("{k},{t}"));
            for d in 0..self.dim {
                out.push_str(&format!(",{},{}", self.means[i * self.dim + d], self.ses[i * self.dim + d]));
            }
            out.push('\n');
        }
        out
    }
}

pub fn drift_mean_profile(bundle: &PathBundle) -> DriftProfile {
    let (n, np) = (bundle.dim, bundle.probes.len());
    let mut means = Vec::with_capacity(np * n);
    let mut ses = Vec::with_capacity(np * n);
    for j in 0..np {
        for d in 0..n {
            let col: Vec<f64> = (0..bundle.paths).map(|p| bundle.probe_drifts[(p * np + j) * n + d]).collect();
            let (m, se) = mean_and_se(&col);
            means.push(m);
            ses.push(se);
        }
    }
    DriftProfile {
        steps: bundle.probes.clone(),
        times: bundle.probes.iter().map(|k| *k as f64 * bundle.dt).collect(),
        means,
        ses,
        dim: n,
    }
}
