//! Forward and time-reversed controlled processes on one Brownian path.
//!
//! The forward process is driven by `B` with drift `u` for `phi`. The
//! backward process is driven by `B^_t = B_1 - B_{1-t}`, whose increments are
//! those of `B` in reverse order, with drift `v^` for `psi`. Both end at
//! `B_1 + (drift integral)` with the same `B_1` bitwise, so
//! `X_1 - Y_1 = int u - int v^`.
//!
//! Forward step `k` reads `dB_0..dB_{k-1}`; backward step `M-1-k` reads
//! `dB_{k+1}..dB_{M-1}`. The two drifts paired at time `t_k` therefore depend on
//! disjoint sets of increments and are independent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duality::{Partner, Route};
use crate::error::{Error, Result};
use crate::follmer::{drive, optimal_drift, path_increments, probe_steps, DriftPolicy, SimConfig};
use crate::numeric::{mean_and_se, pairwise_sum};
use crate::potential::Potential;
use crate::quad::{barycenter_auto, McEstimate, GENERATOR};

/// `|barycenter(phi)|` allowed before the `c = 1/2` chain is refused.
pub const CENTERING_TOL: f64 = 1e-8;
/// Pathwise slack for the two deterministic inequalities.
pub const PATHWISE_SLACK: f64 = 1e-9;
/// Most offending paths kept per stage.
const DUMP_LIMIT: usize = 16;

/// Reverses step-major increments: `out_k = inc_{M-1-k}`.
pub fn reverse_increments(inc: &[f64], dim: usize) -> Vec<f64> {
    let m = inc.len() / dim;
    let mut out = vec![0.0; inc.len()];
    for k in 0..m {
        out[k * dim..(k + 1) * dim].copy_from_slice(&inc[(m - 1 - k) * dim..(m - k) * dim]);
    }
    out
}

/// What to couple. Unset fields take the maximal partner and the optimal drifts.
#[derive(Debug, Clone, Default)]
pub struct CouplingSpec {
    pub partner: Option<Potential>,
    pub forward: Option<DriftPolicy>,
    pub backward: Option<DriftPolicy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledBundle {
    pub dim: usize,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub refine: usize,
    pub generator: String,
    pub c: f64,
    pub forward_label: String,
    pub backward_label: String,
    /// The partner satisfies `phi(x) + psi(y) <= c|x-y|^2` for all `x, y` (closed form).
    pub hypothesis_exact: bool,
    /// `phi` has barycenter 0, so the paired drifts should be orthogonal in mean.
    pub centered: bool,
    /// `paths * dim` each.
    pub x_terminal: Vec<f64>,
    pub y_terminal: Vec<f64>,
    pub u_integral: Vec<f64>,
    pub v_integral: Vec<f64>,
    pub phi_terminal: Vec<f64>,
    pub psi_terminal: Vec<f64>,
    pub u_cost: Vec<f64>,
    pub v_cost: Vec<f64>,
    /// `sum_k |u_k - v^_{M-1-k}|^2 dt`.
    pub reversed_energy: Vec<f64>,
    /// Forward probe steps `k`; each is paired with backward step `M-1-k`.
    pub probes: Vec<usize>,
    /// `paths * probes * dim`.
    pub probe_u: Vec<f64>,
    pub probe_v: Vec<f64>,
}

pub fn coupled_run(phi: &Potential, c: f64, cfg: &SimConfig, spec: CouplingSpec) -> Result<CoupledBundle> {
    let n = phi.dim();
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("coupling constant must be positive, got {c}")));
    }
    let barycenter_norm = crate::numeric::norm_sq(&barycenter_auto(phi)?).sqrt();
    let centered = barycenter_norm <= CENTERING_TOL;
    if c > 0.25 && !centered {
        return Err(Error::Centering { norm: barycenter_norm, tol: CENTERING_TOL });
    }
    let (psi, hypothesis_exact) = match spec.partner {
        Some(p) => (p, false),
        None => {
            let partner = Partner::build(phi, c, Route::Auto, None)?;
            (partner.to_potential()?, partner.is_exact())
        }
    };
    if psi.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: psi.dim() });
    }
    let u = match spec.forward {
        Some(d) => d,
        None => optimal_drift(phi, cfg.steps)?,
    };
    let v = match spec.backward {
        Some(d) => d,
        None => optimal_drift(&psi, cfg.steps)?,
    };
    if u.dim() != n || v.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.dim().max(v.dim()) });
    }
    if cfg.paths < 2 || cfg.steps < 2 {
        return Err(Error::InvalidParameter("coupled runs need at least 2 paths and 2 steps".into()));
    }
    let m = cfg.steps;
    let dt = cfg.dt();
    let probes = probe_steps(m);

    struct PathOut {
        x: Vec<f64>,
        y: Vec<f64>,
        iu: Vec<f64>,
        iv: Vec<f64>,
        fx: f64,
        fy: f64,
        cu: f64,
        cv: f64,
        rev: f64,
        pu: Vec<f64>,
        pv: Vec<f64>,
    }
    let outs: Vec<std::result::Result<PathOut, Error>> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let inc = path_increments(cfg.seed, p, m, cfg.refine, n);
            let fw = drive(&u, &inc, false).map_err(|step| Error::NonFiniteDrift { path: p, step })?;
            let bw = drive(&v, &reverse_increments(&inc, n), false)
                .map_err(|step| Error::NonFiniteDrift { path: p, step })?;
            let diff: Vec<f64> = (0..m)
                .map(|k| {
                    let j = m - 1 - k;
                    (0..n).map(|d| (fw.drifts[k * n + d] - bw.drifts[j * n + d]).powi(2)).sum::<f64>()
                })
                .collect();
            let mut pu = Vec::with_capacity(probes.len() * n);
            let mut pv = Vec::with_capacity(probes.len() * n);
            for &k in &probes {
                let j = m - 1 - k;
                pu.extend_from_slice(&fw.drifts[k * n..(k + 1) * n]);
                pv.extend_from_slice(&bw.drifts[j * n..(j + 1) * n]);
            }
            Ok(PathOut {
                fx: phi.eval_unchecked(&fw.terminal),
                fy: psi.eval_unchecked(&bw.terminal),
                x: fw.terminal,
                y: bw.terminal,
                iu: fw.integral,
                iv: bw.integral,
                cu: fw.cost,
                cv: bw.cost,
                rev: dt * pairwise_sum(&diff),
                pu,
                pv,
            })
        })
        .collect();

    let mut b = CoupledBundle {
        dim: n,
        paths: cfg.paths,
        steps: m,
        seed: cfg.seed,
        refine: cfg.refine,
        generator: GENERATOR.into(),
        c,
        forward_label: u.label().into(),
        backward_label: v.label().into(),
        hypothesis_exact,
        centered,
        x_terminal: Vec::with_capacity(cfg.paths * n),
        y_terminal: Vec::with_capacity(cfg.paths * n),
        u_integral: Vec::with_capacity(cfg.paths * n),
        v_integral: Vec::with_capacity(cfg.paths * n),
        phi_terminal: Vec::with_capacity(cfg.paths),
        psi_terminal: Vec::with_capacity(cfg.paths),
        u_cost: Vec::with_capacity(cfg.paths),
        v_cost: Vec::with_capacity(cfg.paths),
        reversed_energy: Vec::with_capacity(cfg.paths),
        probes,
        probe_u: Vec::new(),
        probe_v: Vec::new(),
    };
    for o in outs {
        let o = o?;
        b.x_terminal.extend_from_slice(&o.x);
        b.y_terminal.extend_from_slice(&o.y);
        b.u_integral.extend_from_slice(&o.iu);
        b.v_integral.extend_from_slice(&o.iv);
        b.phi_terminal.push(o.fx);
        b.psi_terminal.push(o.fy);
        b.u_cost.push(o.cu);
        b.v_cost.push(o.cv);
        b.reversed_energy.push(o.rev);
        b.probe_u.extend_from_slice(&o.pu);
        b.probe_v.extend_from_slice(&o.pv);
    }
    Ok(b)
}

impl CoupledBundle {
    fn row<'a>(&self, v: &'a [f64], p: usize) -> &'a [f64] {
        &v[p * self.dim..(p + 1) * self.dim]
    }

    /// `|int u - int v^|^2` on path `p`.
    pub fn integral_gap_sq(&self, p: usize) -> f64 {
        let (a, b) = (self.row(&self.u_integral, p), self.row(&self.v_integral, p));
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orthogonality {
    pub step: usize,
    pub backward_step: usize,
    pub t: f64,
    /// `E <u_{t_k}, v^_{1-t_k}>`.
    pub inner: McEstimate,
    /// `Cov(u^a, v^b)` row-major, with standard errors.
    pub covariance: Vec<f64>,
    pub covariance_se: Vec<f64>,
    /// `|inner| <= 3 SE`; vacuously true (and advisory) when `phi` is not centered,
    /// since then `E <u, v^> = <E u, E v^>` need not vanish.
    pub inner_pass: bool,
    pub inner_asserted: bool,
    pub covariance_pass: bool,
}

fn covariance_entry(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, _) = mean_and_se(a);
    let (mb, _) = mean_and_se(b);
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let (cov, se) = mean_and_se(&prod);
    let n = a.len() as f64;
    (cov * n / (n - 1.0), se)
}

/// Inner-product and covariance estimates for the drifts paired at probe `index`.
pub fn orthogonality_check(bundle: &CoupledBundle, index: usize) -> Result<Orthogonality> {
    let (n, np) = (bundle.dim, bundle.probes.len());
    if index >= np {
        return Err(Error::InvalidParameter(format!("probe index {index} out of range 0..{np}")));
    }
    let comp = |v: &[f64], p: usize, d: usize| v[(p * np + index) * n + d];
    let inner_samples: Vec<f64> = (0..bundle.paths)
        .map(|p| (0..n).map(|d| comp(&bundle.probe_u, p, d) * comp(&bundle.probe_v, p, d)).sum())
        .collect();
    let inner = McEstimate::from_samples(&inner_samples, bundle.seed)?;
    let mut covariance = Vec::with_capacity(n * n);
    let mut covariance_se = Vec::with_capacity(n * n);
    for a in 0..n {
        let ua: Vec<f64> = (0..bundle.paths).map(|p| comp(&bundle.probe_u, p, a)).collect();
        for b in 0..n {
            let vb: Vec<f64> = (0..bundle.paths).map(|p| comp(&bundle.probe_v, p, b)).collect();
            let (cv, se) = covariance_entry(&ua, &vb);
            covariance.push(cv);
            covariance_se.push(se);
        }
    }
    let inner_asserted = bundle.centered;
    let inner_pass = !inner_asserted || inner.mean.abs() <= 3.0 * inner.se;
    let covariance_pass = covariance.iter().zip(&covariance_se).all(|(c, s)| c.abs() <= 3.0 * s);
    let step = bundle.probes[index];
    Ok(Orthogonality {
        step,
        backward_step: bundle.steps - 1 - step,
        t: step as f64 / bundle.steps as f64,
        inner,
        covariance,
        covariance_se,
        inner_pass,
        inner_asserted,
        covariance_pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDump {
    pub path: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub x_terminal: Vec<f64>,
    pub y_terminal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwiseStage {
    pub checked: usize,
    pub violations: usize,
    /// `max (lhs - rhs)` over paths.
    pub worst_excess: f64,
    pub slack: f64,
    pub pass: bool,
    pub offending: Vec<PathDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStage {
    /// `E[phi(X_1) + psi(Y_1) - 1/2 int |u|^2 - 1/2 int |v^|^2]`: the sum of the
    /// two Borell values, i.e. an estimate of the log of the tau product.
    pub gap: McEstimate,
    pub forward_value: McEstimate,
    pub backward_value: McEstimate,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub c: f64,
    pub hypothesis_exact: bool,
    /// `phi(X_1) + psi(Y_1) <= c |int u - int v^|^2` per path.
    pub constraint: PathwiseStage,
    /// `|int u - int v^|^2 <= int |u_t - v^_{1-t}|^2 dt` per path.
    pub cauchy_schwarz: PathwiseStage,
    pub aggregate: AggregateStage,
    pub orthogonality: Vec<Orthogonality>,
}

impl ChainReport {
    /// Stage verdicts, with the constraint stage counted only when the hypothesis is exact.
    pub fn pass(&self) -> bool {
        (self.constraint.pass || !self.hypothesis_exact)
            && self.cauchy_schwarz.pass
            && self.aggregate.pass
            && self.orthogonality.iter().all(|o| o.inner_pass && o.covariance_pass)
    }
}

fn pathwise(bundle: &CoupledBundle, lhs: impl Fn(usize) -> f64, rhs: impl Fn(usize) -> f64) -> PathwiseStage {
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut offending = Vec::new();
    for p in 0..bundle.paths {
        let (l, r) = (lhs(p), rhs(p));
        worst = worst.max(l - r);
        if !(l <= r + PATHWISE_SLACK) {
            violations += 1;
            if offending.len() < DUMP_LIMIT {
                offending.push(PathDump {
                    path: p,
                    lhs: l,
                    rhs: r,
                    x_terminal: bundle.row(&bundle.x_terminal, p).to_vec(),
                    y_terminal: bundle.row(&bundle.y_terminal, p).to_vec(),
                });
            }
        }
    }
    PathwiseStage { checked: bundle.paths, violations, worst_excess: worst, slack: PATHWISE_SLACK, pass: violations == 0, offending }
}

/// Verdicts for the three stages of the chain plus orthogonality at every probe.
/// `bias` is the allowance for time discretization in the aggregate stage.
pub fn chain_report(bundle: &CoupledBundle, bias: f64) -> Result<ChainReport> {
    let c = bundle.c;
    let constraint = pathwise(
        bundle,
        |p| bundle.phi_terminal[p] + bundle.psi_terminal[p],
        |p| c * bundle.integral_gap_sq(p),
    );
    let cauchy_schwarz = pathwise(bundle, |p| bundle.integral_gap_sq(p), |p| bundle.reversed_energy[p]);
    let seed = bundle.seed;
    let fwd: Vec<f64> = (0..bundle.paths).map(|p| bundle.phi_terminal[p] - bundle.u_cost[p]).collect();
    let bwd: Vec<f64> = (0..bundle.paths).map(|p| bundle.psi_terminal[p] - bundle.v_cost[p]).collect();
    let sum: Vec<f64> = fwd.iter().zip(&bwd).map(|(a, b)| a + b).collect();
    let gap = McEstimate::from_samples(&sum, seed)?;
    let margin = 3.0 * gap.se + bias;
    let aggregate = AggregateStage {
        pass: gap.mean <= margin,
        forward_value: McEstimate::from_samples(&fwd, seed)?,
        backward_value: McEstimate::from_samples(&bwd, seed)?,
        gap,
        margin,
    };
    let orthogonality = (0..bundle.probes.len()).map(|i| orthogonality_check(bundle, i)).collect::<Result<_>>()?;
    for stage in [&constraint, &cauchy_schwarz] {
        for d in &stage.offending {
            log::warn!("path {} violates a pathwise stage: lhs {} > rhs {}", d.path, d.lhs, d.rhs);
        }
    }
    Ok(ChainReport { c, hypothesis_exact: bundle.hypothesis_exact, constraint, cauchy_schwarz, aggregate, orthogonality })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reversal_is_an_involution() {
        let inc = path_increments(3, 1, 37, 1, 2);
        assert_eq!(reverse_increments(&reverse_increments(&inc, 2), 2), inc);
    }

    #[test]
    fn flat_pair_is_trivial() {
        let phi = Potential::constant(1, 0.0).unwrap();
        let b = coupled_run(&phi, 0.5, &SimConfig::new(200, 16, 4), CouplingSpec::default()).unwrap();
        assert_eq!(b.x_terminal, b.y_terminal);
        let r = chain_report(&b, 0.0).unwrap();
        assert!(r.pass());
        assert_eq!(r.aggregate.gap.mean, 0.0);
        for o in &r.orthogonality {
            assert_eq!((o.inner.mean, o.inner.se), (0.0, 0.0));
        }
    }

    #[test]
    fn non_centered_half_mode_refused() {
        let phi = Potential::linear(vec![1.0]).unwrap();
        let cfg = SimConfig::new(10, 4, 0);
        assert!(matches!(coupled_run(&phi, 0.5, &cfg, CouplingSpec::default()), Err(Error::Centering { .. })));
        assert!(coupled_run(&phi, 0.25, &cfg, CouplingSpec::default()).is_ok());
    }

    #[test]
    fn linear_quarter_mode_has_nonzero_inner_product() {
        // partner -y - 1 has drift -1, so E <u, v^> = -1 at every probe
        let phi = Potential::linear(vec![1.0]).unwrap();
        let b = coupled_run(&phi, 0.25, &SimConfig::new(1000, 20, 6), CouplingSpec::default()).unwrap();
        let r = chain_report(&b, 1e-12).unwrap();
        for o in &r.orthogonality {
            assert!((o.inner.mean + 1.0).abs() < 1e-12);
            assert!(!o.inner_asserted && o.inner_pass);
        }
        assert!(r.pass());
        // sharp case: the tau product is exactly 1
        assert!(r.aggregate.gap.mean.abs() < 1e-12);
    }

    #[test]
    fn backward_drifts_ignore_the_forward_prefix() {
        let phi = Potential::isotropic(1, 1.0).unwrap();
        let psi = Partner::build(&phi, 0.5, Route::Auto, None).unwrap().to_potential().unwrap();
        let v = optimal_drift(&psi, 64).unwrap();
        let inc = path_increments(2, 0, 64, 1, 1);
        let j = 40;
        let mut corrupted = inc.clone();
        // backward steps 0..=j read dB_{M-j}..dB_{M-1} only
        for x in corrupted.iter_mut().take(64 - j) {
            *x += 5.0;
        }
        let a = drive(&v, &reverse_increments(&inc, 1), false).unwrap();
        let b = drive(&v, &reverse_increments(&corrupted, 1), false).unwrap();
        assert_eq!(a.drifts[..=j], b.drifts[..=j]);
        assert_ne!(a.drifts[j + 1], b.drifts[j + 1]);
    }

    #[test]
    fn reversed_increments_are_brownian() {
        let m = 8;
        let n_paths = 20_000;
        let rev: Vec<Vec<f64>> =
            (0..n_paths).map(|p| reverse_increments(&path_increments(17, p, m, 1, 1), 1)).collect();
        for k in 0..m {
            let col: Vec<f64> = rev.iter().map(|r| r[k]).collect();
            let (mean, se) = mean_and_se(&col);
            assert!(mean.abs() <= 4.0 * se);
            let sq: Vec<f64> = col.iter().map(|x| x * x * m as f64).collect();
            let (var, var_se) = mean_and_se(&sq);
            assert!((var - 1.0).abs() <= 4.0 * var_se);
        }
    }

    #[test]
    fn gaussian_pair_chain_small() {
        let phi = Potential::isotropic(1, 1.0).unwrap();
        let b = coupled_run(&phi, 0.5, &SimConfig::new(20_000, 100, 12), CouplingSpec::default()).unwrap();
        assert!(b.hypothesis_exact);
        let r = chain_report(&b, 2.0 / 100.0).unwrap();
        assert!(r.pass(), "{r:#?}");
    }
}
