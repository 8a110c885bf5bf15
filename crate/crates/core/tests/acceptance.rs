//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p santalo-core --test acceptance`.

use std::f64::consts::PI;
use std::time::Instant;

use santalo_core::catalog::{parse_potential, standard_potentials, BodyCatalog};
use santalo_core::coupling::{chain_report, coupled_run, CouplingSpec};
use santalo_core::duality::ConvexPolygon;
use santalo_core::follmer::{
    borell_value, closed_form_follmer, drift_mean_profile, follmer_drift, richardson, simulate, DriftPolicy,
    SimConfig,
};
use santalo_core::inequality::{santalo_product, tau_product, Options, TAU_TOL};
use santalo_core::quad::{barycenter_auto, log_partition, rule_for, QuadratureRule};
use santalo_core::Potential;

const N: usize = 100_000;
const M: usize = 1_000;
const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn log_z(phi: &Potential) -> f64 {
    match phi.as_quadratic() {
        Some(f) => f.log_partition().unwrap(),
        None => log_partition(phi, &rule_for(phi).unwrap()).unwrap(),
    }
}

fn catalog() -> Vec<(&'static str, Potential)> {
    let bodies = BodyCatalog::builtin();
    standard_potentials().into_iter().map(|id| (id, parse_potential(id, &bodies).unwrap())).collect()
}

fn borell_matching() -> Outcome {
    let cases = [("const:c=1", 1.0), ("linear:a=1", 0.5), ("quad:lambda=1", -0.5 * 2f64.ln())];
    let bodies = BodyCatalog::builtin();
    let mut parts = Vec::new();
    let mut pass = true;
    for (id, oracle) in cases {
        let t = Instant::now();
        let phi = parse_potential(id, &bodies).unwrap();
        let drift = closed_form_follmer(&phi).unwrap();
        let (r, _) = richardson(&phi, &drift, &SimConfig::new(N, M, SEED)).unwrap();
        let err = (r.coarse.mean - oracle).abs();
        let tol = 3.0 * r.coarse.se + r.bias;
        let secs = t.elapsed().as_secs_f64();
        let ok = err <= tol && secs <= 120.0;
        pass &= ok;
        parts.push(format!("{id}: {:.6}±{:.1e} (oracle {oracle:.6}, C·dt {:.1e}, {secs:.1}s)", r.coarse.mean, r.coarse.se, r.bias));
    }
    outcome(pass, parts.join("; "))
}

fn variational_dominance() -> Outcome {
    let t = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut pass = true;
    let mut checked = 0;
    for (id, phi) in catalog() {
        let n = phi.dim();
        let lz = log_z(&phi);
        let mut wrong = vec![0.0; n];
        wrong[0] = -1.0;
        let drifts = [DriftPolicy::zero(n), DriftPolicy::constant(wrong).unwrap(), DriftPolicy::constant(vec![0.5; n]).unwrap()];
        for d in &drifts {
            let b = simulate(d, &SimConfig::new(N, 50, SEED)).unwrap();
            let v = borell_value(&phi, &b).unwrap();
            let excess = v.mean - (lz + 3.0 * v.se);
            worst = worst.max(excess);
            if excess > 1e-12 {
                pass = false;
                eprintln!("  dominance fails for {id} with {}: {} > {lz}", d.label(), v.mean);
            }
            checked += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(pass && secs <= 120.0, format!("{checked} (potential, drift) pairs, max(value - logZ - 3SE) = {worst:.3e}, {secs:.1}s"))
}

fn constancy() -> Outcome {
    let bodies = BodyCatalog::builtin();
    let mut parts = Vec::new();
    let mut pass = true;
    for (id, steps, paths) in [("linear:a=1", M, N), ("quad:lambda=1", M, N), ("quartic", 200, 20_000), ("quartic:n=2", 100, 10_000)] {
        let phi = parse_potential(id, &bodies).unwrap();
        let drift = match closed_form_follmer(&phi) {
            Some(d) => d,
            None => {
                let m = if phi.dim() == 1 { 64 } else { 24 };
                let rule = std::sync::Arc::new(QuadratureRule::gauss_hermite(phi.dim(), m).unwrap());
                follmer_drift(&phi, rule, 0.5 / steps as f64).unwrap()
            }
        };
        let b = simulate(&drift, &SimConfig::new(paths, steps, SEED)).unwrap();
        let bary = barycenter_auto(&phi).unwrap();
        let c = drift_mean_profile(&b).constancy(&bary);
        pass &= c.pass;
        parts.push(format!("{id}: max|Eu-b| {:.2e} <= {:.2e}", c.statistic, c.tolerance));
    }
    outcome(pass, parts.join("; "))
}

fn tau_quarter() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for (id, phi) in catalog() {
        let r = tau_product(&phi, 0.25, &Options::default()).unwrap();
        worst = worst.max(r.product);
        if r.product > 1.0 + TAU_TOL {
            pass = false;
            eprintln!("  tau(1/4) fails for {id}: {}", r.product);
        }
    }
    let lin = Potential::linear(vec![1.0]).unwrap();
    let sharp = tau_product(&lin, 0.25, &Options::default()).unwrap().product;
    let beyond = tau_product(&lin, 0.30, &Options::default()).unwrap().product;
    pass &= (sharp - 1.0).abs() <= 1e-6 && (beyond - (1.0f64 / 6.0).exp()).abs() <= 1e-6;
    outcome(pass, format!("max product {worst:.9} over catalog; linear a=1: {sharp:.9} at c=1/4, {beyond:.6} at c=0.30"))
}

fn tau_half() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let mut even = 0;
    for (id, phi) in catalog().into_iter().filter(|(_, p)| p.is_even()) {
        let r = tau_product(&phi, 0.5, &Options::default()).unwrap();
        worst = worst.max(r.product);
        even += 1;
        if !r.bound_applies || r.product > 1.0 + TAU_TOL {
            pass = false;
            eprintln!("  tau(1/2) fails for {id}: {}", r.product);
        }
    }
    let lin = tau_product(&Potential::linear(vec![1.0]).unwrap(), 0.5, &Options::default()).unwrap();
    pass &= lin.flagged && (lin.product - 0.5f64.exp()).abs() <= 1e-9;
    outcome(pass, format!("max product {worst:.9} over {even} even potentials; linear a=1: {:.6} (flagged: {})", lin.product, lin.flagged))
}

fn functional_santalo() -> Outcome {
    let g1 = santalo_product(&Potential::isotropic(1, 1.0).unwrap(), &Options::default()).unwrap();
    let g2 = santalo_product(&Potential::isotropic(2, 1.0).unwrap(), &Options::default()).unwrap();
    let q = santalo_product(&Potential::quartic(1, 1.0).unwrap(), &Options::default()).unwrap();
    let pass = (g1.product - 2.0 * PI).abs() <= 1e-8
        && (g2.product - 4.0 * PI * PI).abs() <= 1e-6
        && q.product < 2.0 * PI
        && q.margin > 0.0;
    outcome(pass, format!("gaussian 1D {:.10}, 2D {:.8}; quartic {:.6}, gap {:.6}", g1.product, g2.product, q.product, q.margin))
}

fn geometric_bridge() -> Outcome {
    let sq = ConvexPolygon::square();
    let p_sq = sq.volume_product().unwrap();
    let p64 = ConvexPolygon::regular(64, 1.0, 0.0).unwrap().volume_product().unwrap();
    let pi2 = PI * PI;
    let mut worst_rel: f64 = 0.0;
    for body in ["square", "hexagon", "rectangle", "triangle"] {
        let b = BodyCatalog::builtin().get(body).unwrap();
        let lf = santalo_core::duality::gauge_potential(&b, 2.0).unwrap();
        let r = santalo_product(&lf, &Options::default()).unwrap();
        worst_rel = worst_rel.max((r.integral_f / (2.0 * b.area()) - 1.0).abs());
    }
    let pass = (p_sq - 8.0).abs() < 1e-12 && p_sq <= pi2 && ((p64 - pi2) / pi2).abs() <= 5e-3 && worst_rel <= 1e-4;
    outcome(pass, format!("square {p_sq:.6} <= {pi2:.4}; 64-gon {p64:.6} ({:+.3}%); gauge identity max rel err {worst_rel:.1e}", 100.0 * (p64 - pi2) / pi2))
}

fn coupling_chain() -> Outcome {
    let t = Instant::now();
    let phi = Potential::isotropic(1, 1.0).unwrap();
    let b = coupled_run(&phi, 0.5, &SimConfig::new(N, M, SEED), CouplingSpec::default()).unwrap();
    let r = chain_report(&b, 2.0 / M as f64).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let ortho = r.orthogonality.iter().all(|o| o.inner_pass && o.covariance_pass);
    let worst_z = r.orthogonality.iter().map(|o| (o.inner.mean / o.inner.se).abs()).fold(0.0, f64::max);
    let pass = r.hypothesis_exact
        && r.constraint.violations == 0
        && r.cauchy_schwarz.violations == 0
        && ortho
        && r.aggregate.pass
        && secs <= 300.0;
    outcome(
        pass,
        format!(
            "constraint {}/{} paths, cauchy-schwarz {}/{} paths, orthogonality max |z| {worst_z:.2}, aggregate {:.2e} <= {:.2e}, {secs:.1}s",
            r.constraint.checked - r.constraint.violations,
            r.constraint.checked,
            r.cauchy_schwarz.checked - r.cauchy_schwarz.violations,
            r.cauchy_schwarz.checked,
            r.aggregate.gap.mean,
            r.aggregate.margin
        ),
    )
}

fn reproducibility() -> Outcome {
    let phi = Potential::isotropic(1, 1.0).unwrap();
    let drift = closed_form_follmer(&phi).unwrap();
    let cfg = SimConfig::new(N, M, SEED);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = borell_value(&phi, &simulate(&drift, &cfg).unwrap()).unwrap();
    let b = single.install(|| borell_value(&phi, &simulate(&drift, &cfg).unwrap()).unwrap());
    let small = SimConfig::new(20_000, 200, SEED);
    let c1 = coupled_run(&phi, 0.5, &small, CouplingSpec::default()).unwrap();
    let c2 = single.install(|| coupled_run(&phi, 0.5, &small, CouplingSpec::default()).unwrap());
    let lin = Potential::linear(vec![1.0]).unwrap();
    let v1 = borell_value(&lin, &simulate(&DriftPolicy::zero(1), &cfg).unwrap()).unwrap();
    let v2 = borell_value(&lin, &simulate(&DriftPolicy::zero(1), &cfg).unwrap()).unwrap();
    let pass = a == b && c1 == c2 && v1 == v2;
    outcome(pass, format!("borell value {:.12} rerun bitwise equal: {}; coupled bundle equal: {}", a.mean, a == b, c1 == c2))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("Borell value matching", borell_matching),
        ("variational dominance", variational_dominance),
        ("drift mean constancy", constancy),
        ("property (tau) at c=1/4 and sharpness", tau_quarter),
        ("improved constant c=1/2 under centering", tau_half),
        ("functional Santalo", functional_santalo),
        ("geometric bridge", geometric_bridge),
        ("coupling chain", coupling_chain),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("[{}] {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
