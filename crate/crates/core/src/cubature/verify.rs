//! Independent re-checks of a cubature rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::residual::residual_vector;
use super::rule::CubatureRule;
use super::solver::build_space;
use crate::error::Result;

const RANDOM_CHECKS: usize = 100;

#[derive(Clone, Debug, Serialize)]
pub struct RuleReport {
    pub residual_linf: f64,
    pub residual_l2: f64,
    /// `max_k |recomputed r_k − stored r_k|`.
    pub stored_mismatch: f64,
    /// Largest `|∫P − Σ ω P(x_j)|` over random `P` with `|c₀| + ‖c‖₁ = 1`.
    pub max_random_error: f64,
    pub tol: f64,
    pub passed: bool,
    pub failures: Vec<String>,
}

pub fn verify_rule(rule: &CubatureRule, tol: f64) -> Result<RuleReport> {
    let space = build_space(rule.manifold, rule.space, rule.l)?;
    let pts = rule.manifold_points()?;
    let res = residual_vector(space.as_ref(), &pts, &rule.weights)?;
    let mut failures = Vec::new();

    let stored_mismatch = if rule.residual.len() == res.values.len() {
        res.values.iter().zip(&rule.residual).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        failures.push(format!("stored residual has {} entries, space has {}", rule.residual.len(), res.values.len()));
        f64::INFINITY
    };
    if stored_mismatch > tol.max(1e-14) {
        failures.push(format!("stored residual differs from the recomputed one by {stored_mismatch:e}"));
    }
    if (rule.residual_linf - res.linf).abs() > tol.max(1e-14) {
        failures.push(format!("stored ℓ∞ {:e} vs recomputed {:e}", rule.residual_linf, res.linf));
    }
    if res.linf > tol {
        failures.push(format!("ℓ∞ residual {:e} exceeds {tol:e}", res.linf));
    }
    let wsum: f64 = rule.weights.iter().sum();
    if (wsum - 1.0).abs() > 1e-12 {
        failures.push(format!("weights sum to {wsum}"));
    }

    let quad = space.quadrature();
    let mut rng = ChaCha8Rng::seed_from_u64(rule.seed ^ 0xC0FFEE);
    let mut max_err: f64 = 0.0;
    let dim = space.dim();
    let mut vals = vec![0.0; dim];
    for _ in 0..RANDOM_CHECKS {
        let mut c: Vec<f64> = (0..=dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm: f64 = c.iter().map(|x| x.abs()).sum();
        c.iter_mut().for_each(|x| *x /= norm);
        let mut p = |x: &crate::geometry::ManifoldPoint| {
            space.eval_into(x, &mut vals);
            c[0] + c[1..].iter().zip(&vals).map(|(a, b)| a * b).sum::<f64>()
        };
        let integral = quad.integrate(&mut p)?;
        let rule_sum: f64 = pts.iter().zip(&rule.weights).map(|(x, w)| w * p(x)).sum();
        max_err = max_err.max((integral - rule_sum).abs());
    }
    if max_err > tol {
        failures.push(format!("random test polynomial error {max_err:e} exceeds {tol:e}"));
    }
    Ok(RuleReport {
        residual_linf: res.linf,
        residual_l2: res.l2,
        stored_mismatch,
        max_random_error: max_err,
        tol,
        passed: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubature::solver::{solve, FlowConfig};
    use crate::geometry::ManifoldId;
    use crate::space::SpaceKind;
    use crate::weights::{gen_random_band, uniform};
    use std::f64::consts::TAU;

    fn equilateral() -> CubatureRule {
        let m = crate::geometry::Manifold::circle();
        let s = crate::spectra::SpectralSpace::new(&m, 1.0).unwrap();
        let pts: Vec<_> = (0..3).map(|i| m.canonical_point(&[TAU * i as f64 / 3.0]).unwrap()).collect();
        let w = vec![1.0 / 3.0; 3];
        let r = residual_vector(&s, &pts, &w).unwrap();
        CubatureRule::new(&s, &pts, &w, r, 1e-10)
    }

    #[test]
    fn equilateral_passes() {
        let rep = verify_rule(&equilateral(), 1e-10).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn perturbed_point_fails_at_the_expected_scale() {
        let w = gen_random_band(32, 0.5, 2.0, 9).unwrap();
        let rule = solve(ManifoldId::Circle, SpaceKind::Diffusion, 4.0, &w, &FlowConfig::default()).unwrap();
        assert!(verify_rule(&rule, 1e-10).unwrap().passed);
        let mut bad = rule.clone();
        bad.points[3][0] += 1e-3;
        let rep = verify_rule(&bad, 1e-10).unwrap();
        assert!(!rep.passed);
        // one point moved by δ shifts r_k by about ω_j λ_k √2 δ
        let scale = w.values()[3] * 4.0 * 2f64.sqrt() * 1e-3;
        assert!(rep.residual_linf <= scale * 1.01 && rep.residual_linf >= 0.05 * scale, "{} {scale}", rep.residual_linf);
    }

    #[test]
    fn passing_rule_passes_at_lower_strength() {
        let rule = solve(ManifoldId::Circle, SpaceKind::Diffusion, 6.0, &uniform(20).unwrap(), &FlowConfig::default()).unwrap();
        for l in [1.0, 3.0, 5.0] {
            let mut lower = rule.clone();
            lower.l = l;
            let m = crate::geometry::Manifold::circle();
            let s = crate::spectra::SpectralSpace::new(&m, l).unwrap();
            let r = residual_vector(&s, &lower.manifold_points().unwrap(), &lower.weights).unwrap();
            lower.residual = r.values;
            lower.residual_linf = r.linf;
            assert!(verify_rule(&lower, 1e-10).unwrap().passed);
        }
    }
}
