//! Gaussian quadrature rules from the Golub-Welsch eigenproblem.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

/// One-dimensional nodes and weights; weights sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss rule for the Jacobi matrix with diagonal `alpha[k]` and
/// off-diagonal `beta[k]` (between rows `k` and `k+1`). Eigenvalues give the
/// nodes; each node gets two Newton steps on the orthonormal recurrence and
/// its weight from the Christoffel sum `1 / sum_k p_k(x)^2`.
fn golub_welsch(alpha: &[f64], beta: &[f64]) -> AxisRule {
    let m = alpha.len();
    let mut j = DMatrix::zeros(m, m);
    for k in 0..m {
        j[(k, k)] = alpha[k];
        if k + 1 < m {
            j[(k, k + 1)] = beta[k];
            j[(k + 1, k)] = beta[k];
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    // p_{k+1} = ((x - alpha_k) p_k - beta_{k-1} p_{k-1}) / beta_k
    let recurrence = |x: f64| -> (f64, f64, f64) {
        let (mut p_prev, mut p) = (0.0, 1.0);
        let (mut d_prev, mut d) = (0.0, 0.0);
        let mut christoffel = 1.0;
        for k in 0..m {
            let b_prev = if k == 0 { 0.0 } else { beta[k - 1] };
            let b = if k + 1 < m { beta[k] } else { 1.0 };
            let p_next = ((x - alpha[k]) * p - b_prev * p_prev) / b;
            let d_next = (p + (x - alpha[k]) * d - b_prev * d_prev) / b;
            p_prev = p;
            p = p_next;
            d_prev = d;
            d = d_next;
            if k + 1 < m {
                christoffel += p * p;
            }
        }
        (p, d, christoffel)
    };

    let mut weights = Vec::with_capacity(m);
    for x in nodes.iter_mut() {
        for _ in 0..2 {
            let (p, d, _) = recurrence(*x);
            if d != 0.0 && p.is_finite() && d.is_finite() {
                let step = p / d;
                if step.abs() < 1e-6 * (1.0 + x.abs()) {
                    *x -= step;
                }
            }
        }
        let (_, _, s) = recurrence(*x);
        weights.push(1.0 / s);
    }
    let total: f64 = crate::numeric::pairwise_sum(&weights);
    for w in weights.iter_mut() {
        *w /= total;
    }
    AxisRule { nodes, weights }
}

fn symmetrize(rule: &mut AxisRule) {
    let m = rule.nodes.len();
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        let w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.weights[i] = w;
        rule.weights[j] = w;
    }
    if m % 2 == 1 {
        rule.nodes[m / 2] = 0.0;
    }
    let total: f64 = crate::numeric::pairwise_sum(&rule.weights);
    for w in rule.weights.iter_mut() {
        *w /= total;
    }
}

fn cached(cache: &'static OnceLock<Mutex<HashMap<usize, Arc<AxisRule>>>>, m: usize, build: impl FnOnce() -> AxisRule) -> Arc<AxisRule> {
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = map.lock().expect("rule cache poisoned").get(&m) {
        return r.clone();
    }
    let rule = Arc::new(build());
    map.lock().expect("rule cache poisoned").entry(m).or_insert(rule).clone()
}

/// Probabilists' Gauss-Hermite: exact for `int p dgamma_1`, `deg p <= 2m - 1`.
pub fn gauss_hermite(m: usize) -> Arc<AxisRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<AxisRule>>>> = OnceLock::new();
    cached(&CACHE, m, || {
        let alpha = vec![0.0; m];
        let beta: Vec<f64> = (1..m).map(|k| (k as f64).sqrt()).collect();
        let mut r = golub_welsch(&alpha, &beta);
        symmetrize(&mut r);
        r
    })
}

/// Gauss-Laguerre for the weight `e^{-u}` on `[0, inf)`.
pub fn gauss_laguerre(m: usize) -> Arc<AxisRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<AxisRule>>>> = OnceLock::new();
    cached(&CACHE, m, || {
        let alpha: Vec<f64> = (0..m).map(|k| 2.0 * k as f64 + 1.0).collect();
        let beta: Vec<f64> = (1..m).map(|k| k as f64).collect();
        golub_welsch(&alpha, &beta)
    })
}

/// Gauss-Legendre on `[-1, 1]`, weights normalized to sum 1.
pub fn gauss_legendre(m: usize) -> Arc<AxisRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<AxisRule>>>> = OnceLock::new();
    cached(&CACHE, m, || {
        let alpha = vec![0.0; m];
        let beta: Vec<f64> = (1..m).map(|k| k as f64 / ((4 * k * k - 1) as f64).sqrt()).collect();
        let mut r = golub_welsch(&alpha, &beta);
        symmetrize(&mut r);
        r
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Strategy {
    /// Full tensor product of one Gauss-Hermite axis rule.
    Tensor { per_axis: usize },
    /// Planar polar rule: Gauss-Laguerre in `r^2/2` times Gauss-Legendre
    /// panels in angle, split at the given breakpoints.
    Polar { radial: usize, per_panel: usize, breakpoints: Vec<f64> },
}

/// A quadrature rule for the standard Gaussian measure `gamma_n`.
///
/// Nodes are stored flat (`len * dim`); weights sum to 1.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureRule {
    dim: usize,
    strategy: Strategy,
    #[serde(skip)]
    axis: Option<Arc<AxisRule>>,
    #[serde(skip)]
    points: Vec<f64>,
    #[serde(skip)]
    weights: Vec<f64>,
}

/// Default per-axis node counts: 128 (1D), 96 (2D), 48 (3D).
pub fn default_nodes(dim: usize) -> Option<usize> {
    match dim {
        1 => Some(128),
        2 => Some(96),
        3 => Some(48),
        _ => None,
    }
}

impl QuadratureRule {
    pub fn gauss_hermite(dim: usize, m: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension { dim, context: "tensor quadrature supports n <= 3" });
        }
        if m == 0 || m > 512 {
            return Err(Error::InvalidParameter(format!("node count must be in 1..=512, got {m}")));
        }
        let axis = gauss_hermite(m);
        let total = m.pow(dim as u32);
        let mut points = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut w = 1.0;
            for &i in &idx {
                points.push(axis.nodes[i]);
                w *= axis.weights[i];
            }
            weights.push(w);
            for d in (0..dim).rev() {
                idx[d] += 1;
                if idx[d] < m {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(Self { dim, strategy: Strategy::Tensor { per_axis: m }, axis: Some(axis), points, weights })
    }

    pub fn default_for(dim: usize) -> Result<Self> {
        let m = default_nodes(dim).ok_or(Error::UnsupportedDimension { dim, context: "tensor quadrature supports n <= 3" })?;
        Self::gauss_hermite(dim, m)
    }

    /// Planar polar rule with angular panels split at `breakpoints` (radians).
    /// Integrands that are smooth inside each angular sector, such as gauge
    /// functions of polygons split at vertex directions, converge spectrally.
    pub fn polar(radial: usize, per_panel: usize, breakpoints: &[f64]) -> Result<Self> {
        if radial == 0 || per_panel == 0 || radial > 512 || per_panel > 512 {
            return Err(Error::InvalidParameter("polar rule node counts must be in 1..=512".into()));
        }
        let mut cuts: Vec<f64> = breakpoints.iter().map(|a| a.rem_euclid(TAU)).collect();
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if cuts.is_empty() {
            cuts.push(0.0);
        }
        // Always have at least 4 panels so a single panel never spans the circle.
        while cuts.len() < 4 {
            let (mut gap, mut at) = (0.0, 0);
            for i in 0..cuts.len() {
                let next = if i + 1 < cuts.len() { cuts[i + 1] } else { cuts[0] + TAU };
                if next - cuts[i] > gap {
                    gap = next - cuts[i];
                    at = i;
                }
            }
            let mid = (cuts[at] + 0.5 * gap).rem_euclid(TAU);
            cuts.push(mid);
            cuts.sort_by(|a, b| a.total_cmp(b));
        }
        let lag = gauss_laguerre(radial);
        let leg = gauss_legendre(per_panel);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for i in 0..cuts.len() {
            let a = cuts[i];
            let b = if i + 1 < cuts.len() { cuts[i + 1] } else { cuts[0] + TAU };
            let half = 0.5 * (b - a);
            for (t, wt) in leg.nodes.iter().zip(&leg.weights) {
                let theta = a + half * (t + 1.0);
                // Legendre weights sum to 1 on [-1, 1], so the panel gets (b - a) / 2pi.
                let w_theta = wt * (b - a) / TAU;
                let (s, c) = theta.sin_cos();
                for (u, wu) in lag.nodes.iter().zip(&lag.weights) {
                    let r = (2.0 * u).sqrt();
                    points.push(r * c);
                    points.push(r * s);
                    weights.push(w_theta * wu);
                }
            }
        }
        Ok(Self {
            dim: 2,
            strategy: Strategy::Polar { radial, per_panel, breakpoints: cuts },
            axis: None,
            points,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The per-axis rule of a tensor rule.
    pub fn axis(&self) -> Option<&AxisRule> {
        self.axis.as_deref()
    }

    pub fn label(&self) -> String {
        match &self.strategy {
            Strategy::Tensor { per_axis } => format!("gh:m={per_axis},n={}", self.dim),
            Strategy::Polar { radial, per_panel, breakpoints } => {
                format!("polar:radial={radial},panel={per_panel},panels={}", breakpoints.len())
            }
        }
    }
}
