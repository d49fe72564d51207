//! Residual vectors `r_k = Σ_j ω_j φ_k(x_j)` and their Jacobians.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ManifoldPoint, Tangent};
use crate::space::FunctionSpace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub values: Vec<f64>,
    pub linf: f64,
    pub l2: f64,
}

impl Residual {
    pub fn from_values(values: Vec<f64>) -> Self {
        let linf = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l2 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Residual { values, linf, l2 }
    }
}

fn check(space: &dyn FunctionSpace, points: &[ManifoldPoint], weights: &[f64]) -> Result<()> {
    if points.len() != weights.len() {
        return Err(Error::Length(format!("{} points but {} weights", points.len(), weights.len())));
    }
    points.iter().try_for_each(|p| space.check_point(p))
}

/// Sums in point order, so results are reproducible bit for bit.
pub fn residual_vector(space: &dyn FunctionSpace, points: &[ManifoldPoint], weights: &[f64]) -> Result<Residual> {
    check(space, points, weights)?;
    Ok(Residual::from_values(residual_unchecked(space, points, weights)))
}

pub(crate) fn residual_unchecked(space: &dyn FunctionSpace, points: &[ManifoldPoint], weights: &[f64]) -> Vec<f64> {
    let n = space.dim();
    let mut r = vec![0.0; n];
    let mut v = vec![0.0; n];
    for (p, &w) in points.iter().zip(weights) {
        space.eval_into(p, &mut v);
        for k in 0..n {
            r[k] += w * v[k];
        }
    }
    r
}

/// Residual and `∂r/∂(x_j · e_a)` for the frames `e_a` of [`tangent_frame`](crate::geometry::Manifold::tangent_frame).
pub(crate) fn residual_jacobian(
    space: &dyn FunctionSpace,
    points: &[ManifoldPoint],
    weights: &[f64],
) -> (Vec<f64>, DMatrix<f64>) {
    let m = space.manifold();
    let d = m.dim();
    let n = space.dim();
    let mut r = vec![0.0; n];
    let mut jac = DMatrix::zeros(n, d * points.len());
    let mut v = vec![0.0; n];
    let mut g = vec![Tangent::ZERO; n];
    for (j, (p, &w)) in points.iter().zip(weights).enumerate() {
        space.eval_grad_into(p, &mut v, &mut g);
        let frame = m.tangent_frame(p);
        for k in 0..n {
            r[k] += w * v[k];
            for a in 0..d {
                jac[(k, d * j + a)] = w * g[k].dot(&frame[a]);
            }
        }
    }
    (r, jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Manifold;
    use crate::spectra::SpectralSpace;
    use std::f64::consts::PI;

    #[test]
    fn symmetric_configurations_vanish() {
        let m = Manifold::circle();
        let s = SpectralSpace::new(&m, 1.0).unwrap();
        let pts: Vec<_> = (0..4).map(|i| m.canonical_point(&[i as f64 * PI / 2.0]).unwrap()).collect();
        assert!(residual_vector(&s, &pts, &[0.25; 4]).unwrap().linf < 1e-15);
        let pts: Vec<_> = [0.0, PI, PI].iter().map(|&t| m.canonical_point(&[t]).unwrap()).collect();
        let r = residual_vector(&s, &pts, &[0.5, 0.25, 0.25]).unwrap();
        assert!(r.linf < 1e-15);
    }

    #[test]
    fn ex1_mass_imbalance_floor() {
        let m = Manifold::circle();
        let s = SpectralSpace::new(&m, 2.0).unwrap();
        let w = crate::weights::gen_adversarial_ex1(6).unwrap();
        let floor = 2.0 * w.values()[0] - 1.0;
        for seed in 0..50u64 {
            let pts: Vec<_> = (0..6)
                .map(|j| m.canonical_point(&[((seed * 7 + j * 13) % 29) as f64 * 0.37]).unwrap())
                .collect();
            assert!(residual_vector(&s, &pts, w.values()).unwrap().linf >= floor - 1e-12);
        }
    }

    #[test]
    fn mismatches_are_errors() {
        let s = SpectralSpace::new(&Manifold::circle(), 1.0).unwrap();
        let p = Manifold::torus().canonical_point(&[0.0, 0.0]).unwrap();
        assert!(matches!(residual_vector(&s, &[p], &[1.0]), Err(Error::ManifoldMismatch)));
        let q = Manifold::circle().canonical_point(&[0.0]).unwrap();
        assert!(residual_vector(&s, &[q], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for m in [Manifold::circle(), Manifold::torus(), Manifold::sphere(), Manifold::ellipse(2.0, 1.0).unwrap()] {
            let s = SpectralSpace::new(&m, 3.0).unwrap();
            let pts: Vec<_> = match m.dim() {
                1 => (0..5).map(|i| m.point_from_arclength(0.7 * i as f64 + 0.1)).collect(),
                _ => (0..5).map(|i| m.canonical_point(&[0.3 + 0.5 * i as f64, 1.1 * i as f64]).unwrap()).collect(),
            };
            let w = [0.1, 0.2, 0.3, 0.25, 0.15];
            let (r0, jac) = residual_jacobian(&s, &pts, &w);
            let d = m.dim();
            let h = 1e-6;
            for j in 0..5 {
                let frame = m.tangent_frame(&pts[j]);
                for a in 0..d {
                    let mut plus = pts.clone();
                    let mut minus = pts.clone();
                    plus[j] = m.retract(&pts[j], &frame[a].scale(h));
                    minus[j] = m.retract(&pts[j], &frame[a].scale(-h));
                    let rp = residual_unchecked(&s, &plus, &w);
                    let rm = residual_unchecked(&s, &minus, &w);
                    for k in 0..r0.len() {
                        let fd = (rp[k] - rm[k]) / (2.0 * h);
                        assert!((fd - jac[(k, d * j + a)]).abs() < 1e-6, "{:?}", m.id());
                    }
                }
            }
        }
    }
}
