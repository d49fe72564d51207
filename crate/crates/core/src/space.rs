//! Common interface of the band-limited spaces used by the solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Manifold, ManifoldPoint, QuadratureGrid, Tangent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Diffusion,
    Algebraic,
}

impl std::fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpaceKind::Diffusion => "diffusion",
            SpaceKind::Algebraic => "algebraic",
        })
    }
}

/// A finite orthonormal system without the constant function.
pub trait FunctionSpace: Send + Sync {
    fn manifold(&self) -> &Manifold;
    fn dim(&self) -> usize;
    fn kind(&self) -> SpaceKind;
    /// Bandwidth (diffusion) or total degree (algebraic).
    fn band(&self) -> f64;

    /// Writes `φ_k(x)` for every basis element.
    fn eval_into(&self, x: &ManifoldPoint, out: &mut [f64]);

    /// Writes values and Riemannian gradients.
    fn eval_grad_into(&self, x: &ManifoldPoint, vals: &mut [f64], grads: &mut [Tangent]);

    /// Band of the products `φ_j φ_k`, in the units used by [`QuadratureGrid::for_band`].
    fn quadrature_band(&self) -> f64 {
        self.band()
    }

    fn quadrature(&self) -> QuadratureGrid {
        QuadratureGrid::for_band(self.manifold(), self.quadrature_band()).expect("finite band")
    }

    fn eval(&self, x: &ManifoldPoint) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }

    fn check_point(&self, x: &ManifoldPoint) -> Result<()> {
        if x.kind != self.manifold().kind() {
            Err(Error::ManifoldMismatch)
        } else {
            Ok(())
        }
    }

    fn check_coeffs(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.dim() {
            Err(Error::Length(format!("{} coefficients for a space of dimension {}", c.len(), self.dim())))
        } else {
            Ok(())
        }
    }

    /// `P(x) = Σ c_k φ_k(x)`.
    fn eval_poly(&self, c: &[f64], x: &ManifoldPoint) -> Result<f64> {
        self.check_coeffs(c)?;
        self.check_point(x)?;
        let v = self.eval(x);
        Ok(c.iter().zip(&v).map(|(a, b)| a * b).sum())
    }

    /// Riemannian gradient of `Σ c_k φ_k` at `x`.
    fn grad_poly(&self, c: &[f64], x: &ManifoldPoint) -> Result<Tangent> {
        self.check_coeffs(c)?;
        self.check_point(x)?;
        let n = self.dim();
        let mut v = vec![0.0; n];
        let mut g = vec![Tangent::ZERO; n];
        self.eval_grad_into(x, &mut v, &mut g);
        let mut acc = Tangent::ZERO;
        for (ck, gk) in c.iter().zip(&g) {
            acc.axpy(*ck, gk);
        }
        Ok(acc)
    }
}

/// Coefficient vector paired with its space.
#[derive(Clone, Debug)]
pub struct DiffusionPoly<'a, S: FunctionSpace + ?Sized> {
    pub space: &'a S,
    pub coeffs: Vec<f64>,
}

impl<'a, S: FunctionSpace + ?Sized> DiffusionPoly<'a, S> {
    pub fn new(space: &'a S, coeffs: Vec<f64>) -> Result<Self> {
        space.check_coeffs(&coeffs)?;
        Ok(DiffusionPoly { space, coeffs })
    }

    pub fn value(&self, x: &ManifoldPoint) -> Result<f64> {
        self.space.eval_poly(&self.coeffs, x)
    }

    pub fn grad(&self, x: &ManifoldPoint) -> Result<Tangent> {
        self.space.grad_poly(&self.coeffs, x)
    }

    /// Value and gradient in one basis pass.
    pub fn value_grad(&self, x: &ManifoldPoint, vals: &mut [f64], grads: &mut [Tangent]) -> (f64, Tangent) {
        self.space.eval_grad_into(x, vals, grads);
        let mut v = 0.0;
        let mut g = Tangent::ZERO;
        for k in 0..self.coeffs.len() {
            v += self.coeffs[k] * vals[k];
            g.axpy(self.coeffs[k], &grads[k]);
        }
        (v, g)
    }
}
