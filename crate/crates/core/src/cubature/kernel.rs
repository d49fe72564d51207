//! Band-limited kernels `W_L`, `Ψ_L` and Riesz representers.

use super::smooth::cutoff_h;
use crate::error::{Error, Result};
use crate::geometry::{Manifold, ManifoldPoint};
use crate::space::FunctionSpace;
use crate::spectra::SpectralSpace;

/// Eigenbasis enumerated to `2L` together with the weights `H(λ/L)`.
#[derive(Clone, Debug)]
pub struct KernelSpace {
    space: SpectralSpace,
    l: f64,
    h: Vec<f64>,
    lambdas: Vec<f64>,
}

impl KernelSpace {
    pub fn new(manifold: &Manifold, l: f64) -> Result<Self> {
        Self::from_space(SpectralSpace::new(manifold, 2.0 * l)?, l)
    }

    pub fn from_space(space: SpectralSpace, l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidBand(l));
        }
        if space.band() < 2.0 * l {
            return Err(Error::BasisTooSmall {
                needed: 2.0 * l,
                have: space.band(),
            });
        }
        let lambdas = space.lambdas();
        let h = lambdas.iter().map(|&lam| cutoff_h(lam / l)).collect();
        Ok(KernelSpace { space, l, h, lambdas })
    }

    pub fn space(&self) -> &SpectralSpace {
        &self.space
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// Coefficients of `Ψ_L(x, ·)` in the eigenbasis.
    pub fn psi_coefficients(&self, x: &ManifoldPoint) -> Vec<f64> {
        let mut v = self.space.eval(x);
        for (vk, hk) in v.iter_mut().zip(&self.h) {
            *vk *= hk;
        }
        v
    }

    /// Coefficients of `W_L(x, ·)`.
    pub fn w_coefficients(&self, x: &ManifoldPoint) -> Vec<f64> {
        let mut v = self.psi_coefficients(x);
        for (vk, lam) in v.iter_mut().zip(&self.lambdas) {
            *vk /= lam * lam;
        }
        v
    }

    pub fn psi(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> f64 {
        let (a, b) = (self.psi_coefficients(x), self.space.eval(y));
        a.iter().zip(&b).map(|(p, q)| p * q).sum()
    }

    pub fn w(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> f64 {
        let (a, b) = (self.w_coefficients(x), self.space.eval(y));
        a.iter().zip(&b).map(|(p, q)| p * q).sum()
    }
}

/// `W_L(x, y) = Σ_{λ>0} λ⁻² H(λ/L) φ(x) φ(y)`; `space` must reach band `2L`.
pub fn kernel_w(space: &SpectralSpace, l: f64, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<f64> {
    space.check_point(x)?;
    space.check_point(y)?;
    Ok(KernelSpace::from_space(space.clone(), l)?.w(x, y))
}

/// `Ψ_L(x, y) = Σ H(λ/L) φ(x) φ(y)`.
pub fn kernel_psi(space: &SpectralSpace, l: f64, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<f64> {
    space.check_point(x)?;
    space.check_point(y)?;
    Ok(KernelSpace::from_space(space.clone(), l)?.psi(x, y))
}

/// Coefficients of `G_x` with `⟨G_x, P⟩ = P(x)` on the space.
pub fn riesz_coefficients(space: &dyn FunctionSpace, x: &ManifoldPoint) -> Result<Vec<f64>> {
    space.check_point(x)?;
    Ok(space.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{SQRT_2, TAU};

    #[test]
    fn circle_band_one_kernels() {
        let m = Manifold::circle();
        let k = KernelSpace::new(&m, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (s, t) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
            let (x, y) = (m.canonical_point(&[s]).unwrap(), m.canonical_point(&[t]).unwrap());
            let want = 2.0 * (s - t).cos();
            assert!((k.psi(&x, &y) - want).abs() < 1e-13);
            assert!((k.w(&x, &y) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn kernels_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in [Manifold::torus(), Manifold::sphere()] {
            let k = KernelSpace::new(&m, 3.0).unwrap();
            for _ in 0..20 {
                let x = m.canonical_point(&[rng.random_range(0.1..3.0), rng.random_range(0.0..TAU)]).unwrap();
                let y = m.canonical_point(&[rng.random_range(0.1..3.0), rng.random_range(0.0..TAU)]).unwrap();
                assert!((k.psi(&x, &y) - k.psi(&y, &x)).abs() < 1e-13);
                assert!((k.w(&x, &y) - k.w(&y, &x)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn psi_is_minus_laplacian_of_w() {
        let m = Manifold::circle();
        let k = KernelSpace::new(&m, 3.0).unwrap();
        let x = m.canonical_point(&[0.4]).unwrap();
        for i in 0..12 {
            let t = 0.3 + 0.5 * i as f64;
            let h = 1e-3;
            let w = |u: f64| k.w(&x, &m.canonical_point(&[u]).unwrap());
            let lap = (w(t + h) - 2.0 * w(t) + w(t - h)) / (h * h);
            assert!((-lap - k.psi(&x, &m.canonical_point(&[t]).unwrap())).abs() < 1e-5);
        }
    }

    #[test]
    fn too_small_basis_is_rejected() {
        let s = SpectralSpace::new(&Manifold::circle(), 3.0).unwrap();
        let x = Manifold::circle().canonical_point(&[0.0]).unwrap();
        assert!(matches!(kernel_psi(&s, 2.0, &x, &x), Err(Error::BasisTooSmall { .. })));
        assert!(kernel_psi(&s, 1.5, &x, &x).is_ok());
    }

    #[test]
    fn riesz_representer() {
        let m = Manifold::circle();
        let s = SpectralSpace::new(&m, 1.0).unwrap();
        let c = riesz_coefficients(&s, &m.canonical_point(&[0.0]).unwrap()).unwrap();
        assert!((c[0] - SQRT_2).abs() < 1e-15 && c[1].abs() < 1e-15);
        let s = SpectralSpace::new(&Manifold::torus(), 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let x = s.manifold().canonical_point(&[rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)]).unwrap();
            let p: Vec<f64> = (0..s.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = riesz_coefficients(&s, &x).unwrap();
            let inner: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
            assert!((inner - s.eval_poly(&p, &x).unwrap()).abs() < 1e-10);
        }
    }
}
