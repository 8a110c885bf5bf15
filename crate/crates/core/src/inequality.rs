//! Property (tau), its improved constant under centering, and the functional
//! and geometric Santalo bounds.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duality::{gauge_breakpoints, Partner, Polar, Route};
use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::numeric::{log_sum_exp_weighted, mean_and_se, norm_sq};
use crate::potential::{santalo_to_tau, Kind, Potential};
use crate::quad::mc::{fill_standard_normal, stream};
use crate::quad::rule::gauss_legendre;
use crate::quad::{adapted_rule, barycenter_auto, log_integrate_values, QuadratureRule};

/// Tolerance on the tau bound `product <= 1`.
pub const TAU_TOL: f64 = 1e-8;
/// Relative tolerance on the Santalo bound `product <= (2 pi)^n`.
pub const SANTALO_TOL: f64 = 1e-6;
/// Centering required for the constant 1/2 and for the Santalo bound.
pub const CENTERING_TOL: f64 = 1e-8;
/// Largest `log(e^psi gamma)` at the outermost nodes, relative to the peak.
pub const TAIL_DECAY: f64 = -25.0;

/// How Gaussian integrals are computed.
#[derive(Debug, Clone)]
pub enum Integrator {
    /// Closed form when possible, otherwise the rule adapted to the integrand.
    Auto,
    Rule(QuadratureRule),
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct Options {
    pub route: Route,
    pub integrator: Integrator,
    /// Transform grid; the default depends on the dimension.
    pub axes: Option<Vec<Axis>>,
}

impl Default for Options {
    fn default() -> Self {
        Self { route: Route::Auto, integrator: Integrator::Auto, axes: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauResult {
    pub c: f64,
    pub log_z_phi: f64,
    pub log_z_psi: f64,
    pub product: f64,
    /// Monte Carlo standard error of the product (0 for deterministic routes).
    pub se: f64,
    pub barycenter_norm: f64,
    /// Whether the bound applies: `c <= 1/4`, or `c <= 1/2` with centering.
    pub bound_applies: bool,
    pub pass: bool,
    /// The bound does not apply and the product exceeds 1.
    pub flagged: bool,
    pub route: String,
}

fn log_z_rule(values: &[f64], rule: &QuadratureRule) -> Result<f64> {
    if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Overflow("potential at quadrature nodes"));
    }
    log_integrate_values(values, rule)
}

/// Rejects `e^psi gamma` whose mass at the outermost nodes is not negligible.
fn tail_guard(values: &[f64], rule: &QuadratureRule) -> Result<()> {
    let log_density: Vec<f64> = (0..rule.len()).map(|i| values[i] - 0.5 * norm_sq(rule.point(i))).collect();
    let peak = log_density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let radius = |i: usize| norm_sq(rule.point(i));
    let outer = (0..rule.len()).map(radius).fold(0.0, f64::max);
    let edge = (0..rule.len())
        .filter(|&i| radius(i) >= 0.99 * outer)
        .map(|i| log_density[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let decay = edge - peak;
    if decay > TAIL_DECAY {
        return Err(Error::TailGuard { decay });
    }
    Ok(())
}

fn eval_all(p: &Potential, points: &[f64]) -> Vec<f64> {
    points.par_chunks(p.dim()).map(|x| p.eval_unchecked(x)).collect()
}

fn centering(phi: &Potential) -> Result<f64> {
    Ok(norm_sq(&barycenter_auto(phi)?).sqrt())
}

fn verdict(c: f64, barycenter_norm: f64, product: f64) -> (bool, bool, bool) {
    let applies = c <= 0.25 || (c <= 0.5 && barycenter_norm <= CENTERING_TOL);
    let pass = !applies || product <= 1.0 + TAU_TOL;
    let flagged = !applies && product > 1.0;
    (applies, pass, flagged)
}

/// `(int e^phi dgamma)(int e^psi dgamma)` with `psi` the maximal partner of `phi` for `c`.
pub fn tau_product(phi: &Potential, c: f64, opts: &Options) -> Result<TauResult> {
    let partner = Partner::build(phi, c, opts.route, opts.axes.as_deref())?;
    let barycenter_norm = centering(phi)?;
    let n = phi.dim();
    let (log_z_phi, log_z_psi, se, route) = match (&partner, &opts.integrator) {
        (Partner::Exact(psi), Integrator::Auto) => {
            let (f, g) = (phi.as_quadratic().expect("exact partner"), psi.as_quadratic().expect("quadratic"));
            (f.log_partition()?, g.log_partition()?, 0.0, "closed-form".to_string())
        }
        (_, Integrator::MonteCarlo { samples, seed }) => {
            let (lp, lq, se) = mc_pair(phi, &partner, *samples, *seed)?;
            (lp, lq, se, format!("monte-carlo(N={samples},seed={seed})"))
        }
        (_, integ) => {
            let rule = match integ {
                Integrator::Rule(r) => r.clone(),
                _ => adapted_rule(n, &phi.kink_angles())?,
            };
            let pv = eval_all(phi, rule.points());
            let qv = partner.eval_points(rule.points());
            tail_guard(&qv, &rule)?;
            let kind = if partner.is_exact() { "closed partner" } else { "grid partner" };
            (log_z_rule(&pv, &rule)?, log_z_rule(&qv, &rule)?, 0.0, format!("{kind}, {}", rule.label()))
        }
    };
    let product = (log_z_phi + log_z_psi).exp();
    let (bound_applies, pass, flagged) = verdict(c, barycenter_norm, product);
    Ok(TauResult { c, log_z_phi, log_z_psi, product, se, barycenter_norm, bound_applies, pass, flagged, route })
}

// log-means of e^phi and e^psi from shared draws, and the delta-method SE of their product
fn mc_pair(phi: &Potential, partner: &Partner, samples: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let n = phi.dim();
    if samples < 2 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least 2 samples".into()));
    }
    let z: Vec<f64> = (0..samples)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut v = vec![0.0; n];
            fill_standard_normal(&mut stream(seed, i as u64), &mut v);
            v
        })
        .collect();
    let ep: Vec<f64> = eval_all(phi, &z).into_iter().map(f64::exp).collect();
    let eq: Vec<f64> = partner.eval_points(&z).into_iter().map(f64::exp).collect();
    let (mp, sp) = mean_and_se(&ep);
    let (mq, sq) = mean_and_se(&eq);
    if !(mp > 0.0 && mq > 0.0 && mp.is_finite() && mq.is_finite()) {
        return Err(Error::NonFinite("Monte Carlo Gaussian integral".into()));
    }
    let se = (mq * mq * sp * sp + mp * mp * sq * sq).sqrt();
    Ok((mp.ln(), mq.ln(), se))
}

/// The tau product for a caller-supplied `psi` on one rule.
pub fn tau_product_with(phi: &Potential, psi: &Potential, rule: &QuadratureRule) -> Result<f64> {
    let qv = eval_all(psi, rule.points());
    tail_guard(&qv, rule)?;
    Ok((log_z_rule(&eval_all(phi, rule.points()), rule)? + log_z_rule(&qv, rule)?).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SantaloResult {
    pub dim: usize,
    pub integral_f: f64,
    pub integral_g: f64,
    pub product: f64,
    pub bound: f64,
    /// `bound - product`.
    pub margin: f64,
    pub pass: bool,
    pub barycenter_norm: f64,
    pub route: String,
}

/// `int f dx * int g dy` with `g` the polar function of `f = e^{log_f}`. Refuses
/// non-centered `f`. Lebesgue integrals go through `int f dx = (2 pi)^{n/2} int e^phi dgamma`.
pub fn santalo_product(log_f: &Potential, opts: &Options) -> Result<SantaloResult> {
    let n = log_f.dim();
    let phi = santalo_to_tau(log_f)?;
    let barycenter_norm = centering(&phi)?;
    if barycenter_norm > CENTERING_TOL {
        return Err(Error::Centering { norm: barycenter_norm, tol: CENTERING_TOL });
    }
    let polar = Polar::build(log_f, opts.route, opts.axes.as_deref())?;
    let kinks = match log_f.kind() {
        Kind::GaugePower { body, .. } => gauge_breakpoints(body)?,
        _ => log_f.kink_angles(),
    };
    let rule = match &opts.integrator {
        Integrator::Rule(r) => r.clone(),
        _ => adapted_rule(n, &kinks)?,
    };
    let closed_f = phi.as_quadratic().filter(|_| matches!(opts.integrator, Integrator::Auto));
    let log_zf = match &closed_f {
        Some(form) => form.log_partition()?,
        None => log_z_rule(&eval_all(&phi, rule.points()), &rule)?,
    };
    let closed_g = match &polar {
        Polar::Exact(lg) => santalo_to_tau(lg)?.as_quadratic().filter(|_| matches!(opts.integrator, Integrator::Auto)),
        Polar::Grid(_) => None,
    };
    let log_zg = match &closed_g {
        Some(form) => form.log_partition()?,
        None => {
            let lg = polar.log_density_points(rule.points());
            let vals: Vec<f64> = lg.iter().enumerate().map(|(i, v)| v + 0.5 * norm_sq(rule.point(i))).collect();
            log_z_rule(&vals, &rule)?
        }
    };
    let lebesgue = 0.5 * n as f64 * (2.0 * PI).ln();
    let integral_f = (log_zf + lebesgue).exp();
    let integral_g = (log_zg + lebesgue).exp();
    let product = integral_f * integral_g;
    let bound = (2.0 * PI).powi(n as i32);
    let route = format!(
        "{}; polar {}",
        if closed_f.is_some() { "closed-form".to_string() } else { rule.label() },
        if polar.is_exact() { "closed-form" } else { "grid conjugate" }
    );
    Ok(SantaloResult {
        dim: n,
        integral_f,
        integral_g,
        product,
        bound,
        margin: bound - product,
        pass: product <= bound * (1.0 + SANTALO_TOL),
        barycenter_norm,
        route,
    })
}

/// `int_{lo}^{hi} e^{log_f(x)} dx` by composite Gauss-Legendre, directly in Lebesgue measure.
pub fn lebesgue_integral_1d(log_f: &Potential, lo: f64, hi: f64, panels: usize, per_panel: usize) -> Result<f64> {
    if log_f.dim() != 1 {
        return Err(Error::UnsupportedDimension { dim: log_f.dim(), context: "direct Lebesgue quadrature is 1D" });
    }
    if !(lo < hi) || panels == 0 || per_panel == 0 {
        return Err(Error::InvalidParameter("need lo < hi and positive panel counts".into()));
    }
    let gl = gauss_legendre(per_panel);
    let h = (hi - lo) / panels as f64;
    let mut terms = Vec::with_capacity(panels * per_panel);
    let mut weights = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        let a = lo + p as f64 * h;
        for (t, w) in gl.nodes.iter().zip(&gl.weights) {
            terms.push(log_f.eval_unchecked(&[a + t * h]));
            weights.push(w * h);
        }
    }
    log_sum_exp_weighted(&terms, &weights).map(f64::exp).ok_or(Error::Underflow)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    pub a: f64,
    pub c: f64,
    pub product: f64,
    /// `e^{a^2 (1 - 1/(4c))}`.
    pub closed_form: f64,
    pub pass: bool,
}

/// Tau products of `phi = a x_1` over a grid of slopes and constants. A row
/// passes when the product exceeds `1 + 1e-6` beyond `c = 1/4 (1 + 1e-3)` (for
/// `a != 0`) and stays at most 1 for `c <= 1/4`.
pub fn sharpness_scan(a_grid: &[f64], c_grid: &[f64]) -> Result<Vec<SharpnessRow>> {
    let mut rows = Vec::with_capacity(a_grid.len() * c_grid.len());
    for &a in a_grid {
        for &c in c_grid {
            let phi = Potential::linear(vec![a])?;
            let product = tau_product(&phi, c, &Options::default())?.product;
            let closed_form = (a * a * (1.0 - 1.0 / (4.0 * c))).exp();
            let pass = if c <= 0.25 {
                product <= 1.0 + 1e-12
            } else if c > 0.25 * (1.0 + 1e-3) && a != 0.0 {
                product > 1.0 + 1e-6
            } else {
                true
            };
            rows.push(SharpnessRow { a, c, product, closed_form, pass });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duality::{gauge_potential, ConvexPolygon};

    const GAMMA_QUARTER: f64 = 3.625_609_908_221_908;

    #[test]
    fn flat_product_is_one() {
        for c in [0.1, 0.25, 0.3, 0.5] {
            let r = tau_product(&Potential::constant(1, 0.0).unwrap(), c, &Options::default()).unwrap();
            assert_eq!(r.product, 1.0);
        }
    }

    #[test]
    fn linear_sharpness_and_centering() {
        let lin = Potential::linear(vec![1.0]).unwrap();
        let q = tau_product(&lin, 0.25, &Options::default()).unwrap();
        assert!((q.product - 1.0).abs() < 1e-12 && q.pass);
        let h = tau_product(&lin, 0.5, &Options::default()).unwrap();
        assert!((h.product - 0.5f64.exp()).abs() < 1e-12);
        assert!(h.flagged && !h.bound_applies);
        let s = tau_product(&lin, 0.3, &Options::default()).unwrap();
        assert!((s.product - (1.0f64 / 6.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn grid_route_agrees_with_closed_partner() {
        let phi = Potential::isotropic(1, 1.0).unwrap();
        let closed = tau_product(&phi, 0.25, &Options::default()).unwrap();
        let grid = tau_product(&phi, 0.25, &Options { route: Route::Grid, ..Options::default() }).unwrap();
        assert!((closed.product - grid.product).abs() < 1e-4, "{} {}", closed.product, grid.product);
        assert!(grid.product >= closed.product - 1e-12);
    }

    #[test]
    fn quartic_products_below_one() {
        let phi = Potential::quartic(1, 1.0).unwrap();
        let q = tau_product(&phi, 0.25, &Options::default()).unwrap();
        let h = tau_product(&phi, 0.5, &Options::default()).unwrap();
        assert!(q.pass && h.pass && h.bound_applies);
        assert!(q.product < h.product && h.product < 1.0);
    }

    #[test]
    fn monotone_in_c() {
        let phi = Potential::quartic(1, 1.0).unwrap();
        let mut last = 0.0;
        for c in [0.1, 0.2, 0.25, 0.35, 0.5] {
            let p = tau_product(&phi, c, &Options::default()).unwrap().product;
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn monte_carlo_route() {
        let phi = Potential::linear(vec![0.5]).unwrap();
        let opts = Options { integrator: Integrator::MonteCarlo { samples: 200_000, seed: 3 }, ..Options::default() };
        let r = tau_product(&phi, 0.25, &opts).unwrap();
        assert!((r.product - 1.0).abs() < 4.0 * r.se, "{r:?}");
    }

    #[test]
    fn tail_guard_rejects_growing_partner() {
        let phi = Potential::constant(1, 0.0).unwrap();
        let rule = QuadratureRule::gauss_hermite(1, 64).unwrap();
        let decaying = Potential::linear(vec![1.0]).unwrap();
        assert!(tau_product_with(&phi, &decaying, &rule).is_ok());
        let growing = Potential::linear(vec![40.0]).unwrap();
        assert!(matches!(tau_product_with(&phi, &growing, &rule), Err(Error::TailGuard { .. })));
    }

    #[test]
    fn santalo_gaussian_equality() {
        let r = santalo_product(&Potential::isotropic(1, 1.0).unwrap(), &Options::default()).unwrap();
        assert!((r.product - 2.0 * PI).abs() < 1e-12);
        let r2 = santalo_product(&Potential::isotropic(2, 1.0).unwrap(), &Options::default()).unwrap();
        assert!((r2.product - 4.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn santalo_quartic_strictly_below() {
        let lf = Potential::quartic(1, 1.0).unwrap();
        let r = santalo_product(&lf, &Options::default()).unwrap();
        assert!((r.integral_f - GAMMA_QUARTER / 2f64.sqrt()).abs() < 1e-8);
        assert!(r.pass && r.margin > 0.1, "{r:?}");
        let direct = lebesgue_integral_1d(&lf, -12.0, 12.0, 48, 16).unwrap();
        assert!((direct / r.integral_f - 1.0).abs() < 1e-6);
    }

    #[test]
    fn santalo_refuses_non_centered() {
        let lf = Potential::isotropic(1, 1.0).unwrap().shifted(vec![0.5]).unwrap();
        assert!(matches!(santalo_product(&lf, &Options::default()), Err(Error::Centering { .. })));
    }

    #[test]
    fn square_gauge_volume_identity() {
        let lf = gauge_potential(&ConvexPolygon::square(), 2.0).unwrap();
        let r = santalo_product(&lf, &Options::default()).unwrap();
        assert!((r.integral_f / 8.0 - 1.0).abs() < 1e-4, "{}", r.integral_f);
        assert!((r.product / 32.0 - 1.0).abs() < 1e-4);
        assert!(r.pass);
    }

    #[test]
    fn sharpness_examples() {
        let rows = sharpness_scan(&[0.0, 1.0], &[0.2, 0.25, 0.3, 0.5]).unwrap();
        assert!(rows.iter().all(|r| r.pass));
        let r = rows.iter().find(|r| r.a == 1.0 && r.c == 0.3).unwrap();
        assert!((r.product - 1.181_360_412_865_645_5).abs() < 1e-9);
        assert!(rows.iter().filter(|r| r.a == 0.0).all(|r| r.product == 1.0));
    }
}
