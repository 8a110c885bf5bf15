//! Euler-Maruyama simulation of `X_t = B_t + int_0^t u(s, X_s) ds`.
//!
//! The scheme keeps `B` and the drift integral `I` separately and sets
//! `X_k = B_k + I_k`. `B_k` is the running sum of increments, except that the
//! endpoint `B_M` is the reversal-invariant pairwise sum, so a path driven by
//! the reversed increments ends at the same Brownian point bitwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::drift::DriftPolicy;
use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, strided_sum};
use crate::quad::mc::{fill_standard_normal, stream, GENERATOR};

/// Full-path storage refuses to exceed this many bytes.
pub const FULL_PATH_LIMIT: u64 = 100 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Record {
    /// Terminal values, integrals, costs and drifts at the probe steps.
    #[default]
    Probes,
    /// Everything above plus every state, drift and increment.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub record: Record,
    /// Each increment is the sum of `refine` finer increments from the same stream.
    #[serde(default = "one")]
    pub refine: usize,
}

fn one() -> usize {
    1
}

impl SimConfig {
    pub fn new(paths: usize, steps: usize, seed: u64) -> Self {
        Self { paths, steps, seed, record: Record::Probes, refine: 1 }
    }

    pub fn full(mut self) -> Self {
        self.record = Record::Full;
        self
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps as f64
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.paths < 1 || self.steps < 2 || self.refine < 1 {
            return Err(Error::InvalidParameter(format!(
                "need paths >= 1, steps >= 2, refine >= 1; got {}, {}, {}",
                self.paths, self.steps, self.refine
            )));
        }
        if self.record == Record::Full {
            let bytes = (self.paths * ((self.steps + 1) * dim + 2 * self.steps * dim) * 8) as u64;
            if bytes > FULL_PATH_LIMIT {
                return Err(Error::SizeGuard { what: "full path record", bytes, limit: FULL_PATH_LIMIT });
            }
        }
        Ok(())
    }
}

/// Probe steps `{0, M/4, M/2, 3M/4, M-1}`, deduplicated.
pub fn probe_steps(m: usize) -> Vec<usize> {
    let mut k = vec![0, m / 4, m / 2, 3 * m / 4, m - 1];
    k.dedup();
    k
}

/// Brownian increments of one path: `steps * dim` values, step-major.
pub fn path_increments(seed: u64, path: usize, steps: usize, refine: usize, dim: usize) -> Vec<f64> {
    let mut rng = stream(seed, path as u64);
    let mut z = vec![0.0; steps * refine * dim];
    fill_standard_normal(&mut rng, &mut z);
    let scale = (1.0 / (steps * refine) as f64).sqrt();
    if refine == 1 {
        z.iter_mut().for_each(|v| *v *= scale);
        return z;
    }
    let mut out = vec![0.0; steps * dim];
    for k in 0..steps {
        for d in 0..dim {
            let fine: Vec<f64> = (0..refine).map(|r| z[((k * refine + r) * dim) + d] * scale).collect();
            out[k * dim + d] = pairwise_sum(&fine);
        }
    }
    out
}

/// One controlled path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub terminal: Vec<f64>,
    /// `sum_k u_k dt`.
    pub integral: Vec<f64>,
    /// `1/2 sum_k |u_k|^2 dt`.
    pub cost: f64,
    /// `sum_k u_k . dB_k`, mean zero by adaptedness.
    pub martingale: f64,
    /// `u_k`, step-major.
    pub drifts: Vec<f64>,
    /// `X_0..X_M`, step-major, when requested.
    pub states: Option<Vec<f64>>,
    pub clamped: u64,
}

/// Drives one path from `X_0 = 0` with the given increments. Step `k` reads only
/// increments `0..k`. Returns the first step with a non-finite drift on failure.
pub fn drive(drift: &DriftPolicy, increments: &[f64], keep_states: bool) -> std::result::Result<Trace, usize> {
    let n = drift.dim();
    let m = increments.len() / n;
    let dt = 1.0 / m as f64;
    let endpoint: Vec<f64> = (0..n).map(|d| strided_sum(increments, d, n)).collect();
    let mut b = vec![0.0; n];
    let mut integral = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut drifts = vec![0.0; m * n];
    let mut energy = vec![0.0; m];
    let mut mart = vec![0.0; m];
    let mut states = keep_states.then(|| {
        let mut s = Vec::with_capacity((m + 1) * n);
        s.extend_from_slice(&x);
        s
    });
    let mut clamped = 0;
    for k in 0..m {
        let u = &mut drifts[k * n..(k + 1) * n];
        if drift.eval(k as f64 * dt, &x, u) {
            clamped += 1;
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(k);
        }
        let db = &increments[k * n..(k + 1) * n];
        let mut e = 0.0;
        let mut w = 0.0;
        for d in 0..n {
            e += u[d] * u[d];
            w += u[d] * db[d];
            integral[d] += u[d] * dt;
            b[d] = if k + 1 == m { endpoint[d] } else { b[d] + db[d] };
            x[d] = b[d] + integral[d];
        }
        energy[k] = e;
        mart[k] = w;
        if let Some(s) = states.as_mut() {
            s.extend_from_slice(&x);
        }
    }
    Ok(Trace {
        terminal: x,
        integral,
        cost: 0.5 * dt * pairwise_sum(&energy),
        martingale: pairwise_sum(&mart),
        drifts,
        states,
        clamped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullPaths {
    /// `paths * (M + 1) * dim`.
    pub states: Vec<f64>,
    /// `paths * M * dim`.
    pub drifts: Vec<f64>,
    /// `paths * M * dim`.
    pub increments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    pub dim: usize,
    pub paths: usize,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub refine: usize,
    pub generator: String,
    pub drift_label: String,
    /// `paths * dim`.
    pub terminal: Vec<f64>,
    /// `paths * dim`.
    pub integral: Vec<f64>,
    pub cost: Vec<f64>,
    pub martingale: Vec<f64>,
    pub probes: Vec<usize>,
    /// `paths * probes * dim`.
    pub probe_drifts: Vec<f64>,
    pub clamped: u64,
    pub full: Option<FullPaths>,
}

impl PathBundle {
    pub fn terminal_of(&self, path: usize) -> &[f64] {
        &self.terminal[path * self.dim..(path + 1) * self.dim]
    }

    /// Per-coordinate sample mean and variance of `X_M`.
    pub fn terminal_moments(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|d| {
                let col: Vec<f64> = self.terminal.iter().skip(d).step_by(self.dim).copied().collect();
                let (mean, _) = crate::numeric::mean_and_se(&col);
                let dev: Vec<f64> = col.iter().map(|v| (v - mean) * (v - mean)).collect();
                (mean, pairwise_sum(&dev) / (col.len() as f64 - 1.0).max(1.0))
            })
            .collect()
    }

    /// `max |X_{k+1} - X_k - u(t_k, X_k) dt - dB_k|` over stored paths, re-evaluating the drift.
    pub fn reconstruction_residual(&self, drift: &DriftPolicy) -> Result<f64> {
        let full = self.full.as_ref().ok_or_else(|| Error::InvalidParameter("bundle has no full paths".into()))?;
        let (n, m) = (self.dim, self.steps);
        let mut u = vec![0.0; n];
        let mut worst: f64 = 0.0;
        for p in 0..self.paths {
            let xs = &full.states[p * (m + 1) * n..(p + 1) * (m + 1) * n];
            let db = &full.increments[p * m * n..(p + 1) * m * n];
            for k in 0..m {
                drift.eval(k as f64 * self.dt, &xs[k * n..(k + 1) * n], &mut u);
                for d in 0..n {
                    let r = xs[(k + 1) * n + d] - xs[k * n + d] - u[d] * self.dt - db[k * n + d];
                    worst = worst.max(r.abs());
                }
            }
        }
        Ok(worst)
    }

    /// Full paths as CSV rows `path,step,t,x0[,x1..]`.
    pub fn paths_csv(&self) -> Option<String> {
        let full = self.full.as_ref()?;
        let (n, m) = (self.dim, self.steps);
        let mut out = String::from("path,step,t");
        for d in 0..n {
            out.push_str(&format!(",x{d}"));
        }
        out.push('\n');
        for p in 0..self.paths {
            for k in 0..=m {
                out.push_str(&format!("{p},{k},{}", k as f64 * self.dt));
                for d in 0..n {
                    out.push_str(&format!(",{}", full.states[(p * (m + 1) + k) * n + d]));
                }
                out.push('\n');
            }
        }
        Some(out)
    }
}

/// Simulates `cfg.paths` independent controlled paths. Output depends only on
/// `(drift, cfg)`, never on the worker count.
pub fn simulate(drift: &DriftPolicy, cfg: &SimConfig) -> Result<PathBundle> {
    let n = drift.dim();
    cfg.validate(n)?;
    let m = cfg.steps;
    let probes = probe_steps(m);
    let full = cfg.record == Record::Full;
    type PathResult = std::result::Result<(Trace, Vec<f64>), (usize, usize)>;
    let traces: Vec<PathResult> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let inc = path_increments(cfg.seed, p, m, cfg.refine, n);
            drive(drift, &inc, full).map(|t| (t, inc)).map_err(|k| (p, k))
        })
        .collect();
    let mut bundle = PathBundle {
        dim: n,
        paths: cfg.paths,
        steps: m,
        dt: cfg.dt(),
        seed: cfg.seed,
        refine: cfg.refine,
        generator: GENERATOR.into(),
        drift_label: drift.label().to_string(),
        terminal: Vec::with_capacity(cfg.paths * n),
        integral: Vec::with_capacity(cfg.paths * n),
        cost: Vec::with_capacity(cfg.paths),
        martingale: Vec::with_capacity(cfg.paths),
        probes: probes.clone(),
        probe_drifts: Vec::with_capacity(cfg.paths * probes.len() * n),
        clamped: 0,
        full: full.then(|| FullPaths { states: Vec::new(), drifts: Vec::new(), increments: Vec::new() }),
    };
    for r in traces {
        let (t, inc) = r.map_err(|(path, step)| Error::NonFiniteDrift { path, step })?;
        bundle.terminal.extend_from_slice(&t.terminal);
        bundle.integral.extend_from_slice(&t.integral);
        bundle.cost.push(t.cost);
        bundle.martingale.push(t.martingale);
        for &k in &probes {
            bundle.probe_drifts.extend_from_slice(&t.drifts[k * n..(k + 1) * n]);
        }
        bundle.clamped += t.clamped;
        if let Some(f) = bundle.full.as_mut() {
            f.states.extend_from_slice(t.states.as_deref().unwrap_or_default());
            f.drifts.extend_from_slice(&t.drifts);
            f.increments.extend_from_slice(&inc);
        }
    }
    if bundle.clamped > 0 {
        log::info!("time-to-go clamp engaged {} times", bundle.clamped);
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_drift_terminal_is_brownian_endpoint() {
        let b = simulate(&DriftPolicy::zero(1), &SimConfig::new(100_000, 8, 3)).unwrap();
        let (mean, var) = b.terminal_moments()[0];
        assert!(mean.abs() < 4.0 / (1e5f64).sqrt());
        assert!((var - 1.0).abs() < 0.05);
        assert!(b.cost.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn constant_drift_shifts_mean() {
        let b = simulate(&DriftPolicy::constant(vec![0.7, -0.2]).unwrap(), &SimConfig::new(20_000, 10, 5)).unwrap();
        let mom = b.terminal_moments();
        let se = (1.0 / 20_000f64).sqrt();
        assert!((mom[0].0 - 0.7).abs() < 4.0 * se);
        assert!((mom[1].0 + 0.2).abs() < 4.0 * se);
        assert!(b.cost.iter().all(|c| (c - 0.5 * 0.53).abs() < 1e-12));
    }

    #[test]
    fn starts_at_origin_and_reconstructs() {
        let form = crate::potential::Potential::isotropic(2, 1.0).unwrap().as_quadratic().unwrap();
        let d = DriftPolicy::affine(&form).unwrap();
        let b = simulate(&d, &SimConfig::new(50, 64, 9).full()).unwrap();
        let f = b.full.as_ref().unwrap();
        for p in 0..50 {
            assert_eq!(&f.states[p * 65 * 2..p * 65 * 2 + 2], &[0.0, 0.0]);
        }
        assert!(b.reconstruction_residual(&d).unwrap() < 1e-12);
        assert!(b.cost.iter().all(|c| *c >= 0.0));
    }

    #[test]
    fn bit_reproducible_across_worker_counts() {
        let form = crate::potential::Potential::isotropic(1, 1.0).unwrap().as_quadratic().unwrap();
        let d = DriftPolicy::affine(&form).unwrap();
        let cfg = SimConfig::new(2000, 50, 11);
        let a = simulate(&d, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simulate(&d, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn refined_increments_are_pair_sums_of_the_fine_stream() {
        let coarse = path_increments(4, 2, 10, 2, 1);
        let fine = path_increments(4, 2, 20, 1, 1);
        for k in 0..10 {
            assert_eq!(coarse[k].to_bits(), (fine[2 * k] + fine[2 * k + 1]).to_bits());
        }
    }

    #[test]
    fn full_record_size_guard() {
        let cfg = SimConfig::new(100_000, 1000, 0).full();
        assert!(matches!(simulate(&DriftPolicy::zero(1), &cfg), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn reversed_increments_share_the_endpoint() {
        let inc = path_increments(1, 0, 1000, 1, 2);
        let mut rev = vec![0.0; inc.len()];
        for k in 0..1000 {
            rev[k * 2..k * 2 + 2].copy_from_slice(&inc[(999 - k) * 2..(999 - k) * 2 + 2]);
        }
        let d = DriftPolicy::zero(2);
        let a = drive(&d, &inc, false).unwrap();
        let b = drive(&d, &rev, false).unwrap();
        assert_eq!(a.terminal, b.terminal);
    }
}
