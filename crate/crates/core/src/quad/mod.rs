//! Integration against the standard Gaussian measure.

pub mod mc;
pub mod rule;

pub use mc::{integrate_exp_mc, McEstimate, GENERATOR};
pub use rule::{default_nodes, QuadratureRule, Strategy};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp_weighted, pairwise_sum};
use crate::potential::Potential;

fn check_rule(phi: &Potential, rule: &QuadratureRule) -> Result<()> {
    if phi.dim() != rule.dim() {
        return Err(Error::DimensionMismatch { expected: rule.dim(), got: phi.dim() });
    }
    if let Some(form) = phi.as_quadratic() {
        form.check_integrable()?;
    }
    Ok(())
}

/// `phi` at every node, in node order.
pub fn node_values(phi: &Potential, rule: &QuadratureRule) -> Result<Vec<f64>> {
    check_rule(phi, rule)?;
    let values: Vec<f64> = (0..rule.len()).into_par_iter().map(|i| phi.eval_unchecked(rule.point(i))).collect();
    if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Overflow("potential at quadrature nodes"));
    }
    Ok(values)
}

/// `log sum_i w_i e^{v_i}` over node values; [`Error::Underflow`] when all are `-inf`.
pub fn log_integrate_values(values: &[f64], rule: &QuadratureRule) -> Result<f64> {
    log_sum_exp_weighted(values, rule.weights()).ok_or(Error::Underflow)
}

/// `log int e^phi dgamma_n`, computed in log-space with max-shift.
pub fn log_partition(phi: &Potential, rule: &QuadratureRule) -> Result<f64> {
    log_integrate_values(&node_values(phi, rule)?, rule)
}

/// `int e^phi dgamma_n`; signals [`Error::Underflow`] if the result is 0.
pub fn integrate_exp(phi: &Potential, rule: &QuadratureRule) -> Result<f64> {
    let z = log_partition(phi, rule)?.exp();
    if z == 0.0 {
        Err(Error::Underflow)
    } else if z.is_infinite() {
        Err(Error::Overflow("int e^phi dgamma"))
    } else {
        Ok(z)
    }
}

/// `(int x e^phi dgamma_n) / (int e^phi dgamma_n)`.
pub fn barycenter(phi: &Potential, rule: &QuadratureRule) -> Result<Vec<f64>> {
    let values = node_values(phi, rule)?;
    barycenter_of_values(&values, rule)
}

/// Polar rule split at `kinks` for kinked planar integrands, tensor Gauss-Hermite otherwise.
pub fn adapted_rule(dim: usize, kinks: &[f64]) -> Result<QuadratureRule> {
    if dim == 2 && !kinks.is_empty() {
        QuadratureRule::polar(96, 32, kinks)
    } else {
        QuadratureRule::default_for(dim)
    }
}

/// [`adapted_rule`] for the kinks of `phi` itself.
pub fn rule_for(phi: &Potential) -> Result<QuadratureRule> {
    adapted_rule(phi.dim(), &phi.kink_angles())
}

/// Barycenter in closed form on the Gaussian family, by [`rule_for`] quadrature otherwise.
pub fn barycenter_auto(phi: &Potential) -> Result<Vec<f64>> {
    match phi.as_quadratic() {
        Some(form) => form.barycenter(),
        None => barycenter(phi, &rule_for(phi)?),
    }
}

pub(crate) fn barycenter_of_values(values: &[f64], rule: &QuadratureRule) -> Result<Vec<f64>> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Underflow);
    }
    let w: Vec<f64> = values
        .iter()
        .zip(rule.weights())
        .map(|(&v, &w)| if v == f64::NEG_INFINITY { 0.0 } else { w * (v - max).exp() })
        .collect();
    let z = pairwise_sum(&w);
    let n = rule.dim();
    Ok((0..n)
        .map(|d| {
            let terms: Vec<f64> = w.iter().enumerate().map(|(i, wi)| wi * rule.point(i)[d]).collect();
            pairwise_sum(&terms) / z
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;
    use nalgebra::DMatrix;

    fn rule(n: usize) -> QuadratureRule {
        QuadratureRule::default_for(n).unwrap()
    }

    #[test]
    fn normalization() {
        for n in 1..=3 {
            let z = integrate_exp(&Potential::constant(n, 0.0).unwrap(), &rule(n)).unwrap();
            assert!((z - 1.0).abs() < 1e-13);
            let c = log_partition(&Potential::constant(n, 2.5).unwrap(), &rule(n)).unwrap();
            assert!((c - 2.5).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_mgf() {
        // E e^{Z} = e^{1/2}
        let z = integrate_exp(&Potential::linear(vec![1.0]).unwrap(), &rule(1)).unwrap();
        assert!((z - 0.5f64.exp()).abs() < 1e-12);
        let z64 = integrate_exp(&Potential::linear(vec![1.0]).unwrap(), &QuadratureRule::gauss_hermite(1, 64).unwrap()).unwrap();
        assert!((z - z64).abs() < 1e-12);
        // |a|^2 / 2 in 3D
        let lp = log_partition(&Potential::linear(vec![0.5, -1.0, 2.0]).unwrap(), &rule(3)).unwrap();
        assert!((lp - 0.5 * (0.25 + 1.0 + 4.0)).abs() < 1e-10);
    }

    #[test]
    fn gaussian_square() {
        let p = Potential::isotropic(1, 1.0).unwrap();
        assert!((integrate_exp(&p, &rule(1)).unwrap() - 0.5f64.sqrt()).abs() < 1e-13);
        assert!((log_partition(&p, &rule(1)).unwrap() + 0.5 * 2f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn barycenters() {
        let quartic = Potential::quartic(1, 1.0).unwrap();
        assert!(barycenter(&quartic, &rule(1)).unwrap()[0].abs() < 1e-12);
        let lin = Potential::linear(vec![1.0]).unwrap();
        assert!((barycenter(&lin, &rule(1)).unwrap()[0] - 1.0).abs() < 1e-12);
        let q = Potential::quadratic(DMatrix::identity(2, 2) * 0.5, vec![1.0, 0.0], 0.0).unwrap();
        let b = barycenter(&q, &rule(2)).unwrap();
        assert!((b[0] - 2.0 / 3.0).abs() < 1e-12 && b[1].abs() < 1e-12);
        let q2 = Potential::quartic(2, 1.0).unwrap();
        let b = barycenter(&q2, &rule(2)).unwrap();
        assert!(b[0].abs() < 1e-12 && b[1].abs() < 1e-12);
    }

    #[test]
    fn extreme_exponents_stay_finite() {
        let p = Potential::constant(1, 700.0).unwrap().offset(50.0).unwrap();
        assert!((log_partition(&p, &rule(1)).unwrap() - 750.0).abs() < 1e-10);
        assert!(matches!(integrate_exp(&p, &rule(1)), Err(Error::Overflow(_))));
        let p = Potential::constant(1, -800.0).unwrap();
        assert_eq!(integrate_exp(&p, &rule(1)), Err(Error::Underflow));
    }

    #[test]
    fn gauge_density_on_polar_rule() {
        use crate::duality::polygon::ConvexPolygon;
        use std::sync::Arc;
        // int e^{-||x||^2/2} dx over R^2 = 2 |K|, via the bridge phi = log f + |x|^2/2.
        let sq = Arc::new(ConvexPolygon::square());
        let lf = Potential::gauge_power(sq.clone(), 2.0, -0.5).unwrap();
        let phi = crate::potential::santalo_to_tau(&lf).unwrap();
        let mut cuts = sq.vertex_angles();
        cuts.extend(sq.polar().unwrap().vertex_angles());
        let r = QuadratureRule::polar(64, 24, &cuts).unwrap();
        let lebesgue = 2.0 * std::f64::consts::PI * integrate_exp(&phi, &r).unwrap();
        assert!((lebesgue - 8.0).abs() < 1e-10, "{lebesgue}");
    }
}
