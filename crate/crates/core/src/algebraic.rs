//! Restrictions of ambient polynomials to the circle, the ellipse and the sphere.
//!
//! The restricted span is generated by Chebyshev products
//! `T_i(x/a) T_j(y/b) [T_k(z)]` of total degree at most `L`, which span the
//! same space as the monomials with far better conditioning. The constant is
//! projected out under the reference quadrature and an orthonormal basis is
//! read off the thin SVD of the weighted, centered design matrix. Directions
//! that vanish on the variety (for instance `x² + y² - 1` on the circle) show
//! up as negligible singular values and are dropped.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Manifold, ManifoldId, ManifoldPoint, QuadratureGrid, Tangent};
use crate::space::{FunctionSpace, SpaceKind};

/// Relative singular-value cutoff for the numerical rank.
pub const RANK_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct GramReport {
    pub generators: usize,
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min_kept: f64,
    /// Largest dropped singular value, relative to `sigma_max`.
    pub sigma_max_dropped_rel: f64,
}

#[derive(Clone, Debug)]
pub struct RestrictedPolySpace {
    manifold: Manifold,
    degree: usize,
    scale: [f64; 3],
    /// Chebyshev exponents `(i, j, k)`; `k = 0` off the sphere.
    exponents: Vec<[usize; 3]>,
    /// `coeffs[g * n + i]` maps generator `g` to basis element `i`.
    coeffs: Vec<f64>,
    offset: Vec<f64>,
    n: usize,
    grid: QuadratureGrid,
    report: GramReport,
}

fn chebyshev_with_derivative(deg: usize, x: f64, t: &mut [f64], dt: &mut [f64]) {
    // T_n' = n U_{n-1}
    t[0] = 1.0;
    dt[0] = 0.0;
    if deg == 0 {
        return;
    }
    t[1] = x;
    dt[1] = 1.0;
    let (mut u_prev, mut u_cur) = (1.0, 2.0 * x);
    for n in 2..=deg {
        t[n] = 2.0 * x * t[n - 1] - t[n - 2];
        dt[n] = n as f64 * u_cur;
        let u_next = 2.0 * x * u_cur - u_prev;
        u_prev = u_cur;
        u_cur = u_next;
    }
}

impl RestrictedPolySpace {
    pub fn new(manifold: &Manifold, degree: usize) -> Result<Self> {
        let grid = match manifold.id() {
            ManifoldId::Ellipse { .. } => {
                QuadratureGrid::with_resolution(manifold, (32 * degree + 64).max(512))
            }
            ManifoldId::Torus2 => {
                return Err(Error::Unsupported("restricted polynomials need an embedded variety".into()))
            }
            _ => QuadratureGrid::for_band(manifold, degree as f64 + 1.0)?,
        };
        Self::with_grid(manifold, degree, grid)
    }

    fn with_grid(manifold: &Manifold, degree: usize, grid: QuadratureGrid) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidBand(0.0));
        }
        let (scale, sphere) = match manifold.id() {
            ManifoldId::Circle => ([1.0, 1.0, 1.0], false),
            ManifoldId::Ellipse { a, b } => ([a, b, 1.0], false),
            ManifoldId::Sphere2 => ([1.0, 1.0, 1.0], true),
            ManifoldId::Torus2 => {
                return Err(Error::Unsupported("restricted polynomials need an embedded variety".into()))
            }
        };
        let mut exponents = Vec::new();
        for total in 1..=degree {
            for i in (0..=total).rev() {
                if sphere {
                    for j in (0..=(total - i)).rev() {
                        exponents.push([i, j, total - i - j]);
                    }
                } else {
                    exponents.push([i, total - i, 0]);
                }
            }
        }
        let mut space = RestrictedPolySpace {
            manifold: manifold.clone(),
            degree,
            scale,
            exponents,
            coeffs: Vec::new(),
            offset: Vec::new(),
            n: 0,
            grid,
            report: GramReport {
                generators: 0,
                rank: 0,
                sigma_max: 0.0,
                sigma_min_kept: 0.0,
                sigma_max_dropped_rel: 0.0,
            },
        };
        space.factor();
        Ok(space)
    }

    fn factor(&mut self) {
        let ng = self.exponents.len();
        let nq = self.grid.len();
        let mut raw = DMatrix::<f64>::zeros(nq, ng);
        let mut row = vec![0.0; ng];
        let mut mean = vec![0.0; ng];
        for (q, x) in self.grid.nodes.iter().enumerate() {
            self.generators(x, &mut row, None);
            for g in 0..ng {
                raw[(q, g)] = row[g];
                mean[g] += self.grid.qweights[q] * row[g];
            }
        }
        for q in 0..nq {
            let sw = self.grid.qweights[q].sqrt();
            for g in 0..ng {
                raw[(q, g)] = sw * (raw[(q, g)] - mean[g]);
            }
        }
        let svd = raw.svd(false, true);
        let vt = svd.v_t.expect("right singular vectors");
        let sigma = svd.singular_values;
        let smax = sigma.max();
        let mut order: Vec<usize> = (0..sigma.len()).collect();
        order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).expect("finite singular values"));
        let kept: Vec<usize> = order.iter().copied().filter(|&i| sigma[i] > RANK_THRESHOLD * smax).collect();
        let dropped = order
            .iter()
            .copied()
            .filter(|&i| sigma[i] <= RANK_THRESHOLD * smax)
            .map(|i| sigma[i] / smax)
            .fold(0.0, f64::max);
        let n = kept.len();
        let mut coeffs = vec![0.0; ng * n];
        for (col, &i) in kept.iter().enumerate() {
            for g in 0..ng {
                coeffs[g * n + col] = vt[(i, g)] / sigma[i];
            }
        }
        let mut offset = vec![0.0; n];
        for col in 0..n {
            offset[col] = -(0..ng).map(|g| mean[g] * coeffs[g * n + col]).sum::<f64>();
        }
        self.report = GramReport {
            generators: ng,
            rank: n,
            sigma_max: smax,
            sigma_min_kept: kept.last().map(|&i| sigma[i]).unwrap_or(0.0),
            sigma_max_dropped_rel: dropped,
        };
        self.coeffs = coeffs;
        self.offset = offset;
        self.n = n;
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn report(&self) -> &GramReport {
        &self.report
    }

    /// Generator values and ambient gradients at `x`.
    fn generators(&self, x: &ManifoldPoint, out: &mut [f64], grads: Option<&mut [[f64; 3]]>) {
        let d = self.degree;
        let mut t = [vec![0.0; d + 1], vec![0.0; d + 1], vec![0.0; d + 1]];
        let mut dt = [vec![0.0; d + 1], vec![0.0; d + 1], vec![0.0; d + 1]];
        for c in 0..3 {
            chebyshev_with_derivative(d, x.ambient[c] / self.scale[c], &mut t[c], &mut dt[c]);
        }
        match grads {
            None => {
                for (g, e) in self.exponents.iter().enumerate() {
                    out[g] = t[0][e[0]] * t[1][e[1]] * t[2][e[2]];
                }
            }
            Some(gr) => {
                for (g, e) in self.exponents.iter().enumerate() {
                    let (a, b, c) = (t[0][e[0]], t[1][e[1]], t[2][e[2]]);
                    out[g] = a * b * c;
                    gr[g] = [
                        dt[0][e[0]] / self.scale[0] * b * c,
                        a * dt[1][e[1]] / self.scale[1] * c,
                        a * b * dt[2][e[2]] / self.scale[2],
                    ];
                }
            }
        }
    }

    fn eval_impl(&self, x: &ManifoldPoint, vals: &mut [f64], grads: Option<&mut [Tangent]>) {
        let ng = self.exponents.len();
        let n = self.n;
        let mut gv = vec![0.0; ng];
        vals[..n].copy_from_slice(&self.offset);
        match grads {
            None => {
                self.generators(x, &mut gv, None);
                for g in 0..ng {
                    let row = &self.coeffs[g * n..(g + 1) * n];
                    for i in 0..n {
                        vals[i] += gv[g] * row[i];
                    }
                }
            }
            Some(out) => {
                let mut gg = vec![[0.0; 3]; ng];
                self.generators(x, &mut gv, Some(&mut gg));
                let mut amb = vec![[0.0; 3]; n];
                for g in 0..ng {
                    let row = &self.coeffs[g * n..(g + 1) * n];
                    for i in 0..n {
                        vals[i] += gv[g] * row[i];
                        for c in 0..3 {
                            amb[i][c] += gg[g][c] * row[i];
                        }
                    }
                }
                for i in 0..n {
                    out[i] = self.manifold.project_ambient_gradient(x, amb[i]);
                }
            }
        }
    }

    /// Orthogonal projection coefficients of `f` on the space.
    pub fn project(&self, f: &dyn Fn(&ManifoldPoint) -> f64) -> Vec<f64> {
        let mut c = vec![0.0; self.n];
        let mut v = vec![0.0; self.n];
        for (x, w) in self.grid.nodes.iter().zip(&self.grid.qweights) {
            self.eval_into(x, &mut v);
            let fx = f(x);
            for i in 0..self.n {
                c[i] += w * fx * v[i];
            }
        }
        c
    }
}

impl FunctionSpace for RestrictedPolySpace {
    fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn kind(&self) -> SpaceKind {
        SpaceKind::Algebraic
    }

    fn band(&self) -> f64 {
        self.degree as f64
    }

    fn quadrature(&self) -> QuadratureGrid {
        self.grid.clone()
    }

    fn eval_into(&self, x: &ManifoldPoint, out: &mut [f64]) {
        self.eval_impl(x, out, None);
    }

    fn eval_grad_into(&self, x: &ManifoldPoint, vals: &mut [f64], grads: &mut [Tangent]) {
        self.eval_impl(x, vals, Some(grads));
    }
}

pub fn build_restricted_space(id: ManifoldId, degree: usize) -> Result<RestrictedPolySpace> {
    RestrictedPolySpace::new(&Manifold::new(id)?, degree)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitPoint {
    pub degree: usize,
    pub residual: f64,
}

/// Relative L² distance from `f` to the restricted polynomials of degree `m`
/// (constant included), for `m = 1..=max_deg`.
pub fn restriction_fit_residual(
    id: ManifoldId,
    f: &dyn Fn(&ManifoldPoint) -> f64,
    max_deg: usize,
) -> Result<Vec<FitPoint>> {
    if max_deg == 0 {
        return Err(Error::InvalidBand(0.0));
    }
    let manifold = Manifold::new(id)?;
    // one grid for every degree keeps the curve comparable across degrees
    let grid = match id {
        ManifoldId::Ellipse { .. } => QuadratureGrid::with_resolution(&manifold, (32 * max_deg + 64).max(512)),
        _ => QuadratureGrid::for_band(&manifold, max_deg as f64 + 1.0)?,
    };
    let fv: Vec<f64> = grid.nodes.iter().map(f).collect();
    if fv.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit target"));
    }
    let norm: f64 = fv.iter().zip(&grid.qweights).map(|(v, w)| w * v * v).sum::<f64>().sqrt();
    let mean: f64 = fv.iter().zip(&grid.qweights).map(|(v, w)| w * v).sum();
    let mut out = Vec::with_capacity(max_deg);
    for m in 1..=max_deg {
        let space = RestrictedPolySpace::with_grid(&manifold, m, grid.clone())?;
        let n = space.dim();
        let mut basis = vec![0.0; n * grid.len()];
        let mut c = vec![0.0; n];
        for (q, x) in grid.nodes.iter().enumerate() {
            space.eval_into(x, &mut basis[q * n..(q + 1) * n]);
            for i in 0..n {
                c[i] += grid.qweights[q] * fv[q] * basis[q * n + i];
            }
        }
        let mut res2 = 0.0;
        for q in 0..grid.len() {
            let approx: f64 = mean + (0..n).map(|i| c[i] * basis[q * n + i]).sum::<f64>();
            res2 += grid.qweights[q] * (fv[q] - approx).powi(2);
        }
        out.push(FitPoint {
            degree: m,
            residual: if norm > 0.0 { res2.sqrt() / norm } else { 0.0 },
        });
    }
    Ok(out)
}

/// The ellipse mode `f_k = cos(2πk s/ℓ)` in arc length `s`.
pub fn ellipse_mode(manifold: &Manifold, k: u32) -> impl Fn(&ManifoldPoint) -> f64 + '_ {
    let len = manifold.period();
    move |p: &ManifoldPoint| (TAU * k as f64 * p.intrinsic / len).cos()
}

/// Writes a residual curve as `degree,residual` CSV.
pub fn write_fit_csv<W: std::io::Write>(curve: &[FitPoint], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for p in curve {
        wr.serialize(p)?;
    }
    wr.flush()?;
    Ok(())
}
