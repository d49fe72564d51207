//! Reference quadrature on the model manifolds.
//!
//! Angles use the trapezoid rule, the sphere uses Gauss–Legendre in `cos θ`
//! times uniform longitudes, and the ellipse is sampled uniformly in arc length.

use std::f64::consts::{PI, TAU};

use super::{Manifold, ManifoldId, ManifoldPoint};
use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes and positive weights summing to one.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub nodes: Vec<ManifoldPoint>,
    pub qweights: Vec<f64>,
    /// Products of two functions of band `exactness_band / 2` integrate exactly.
    pub exactness_band: f64,
}

impl QuadratureGrid {
    /// Grid exact for products of two functions of band `band`.
    pub fn for_band(m: &Manifold, band: f64) -> Result<Self> {
        if !(band >= 0.0 && band.is_finite()) {
            return Err(Error::InvalidBand(band));
        }
        let cb = band.ceil() as usize;
        let mut g = match m.id() {
            ManifoldId::Circle => Self::with_resolution(m, 4 * cb + 8),
            ManifoldId::Torus2 => Self::with_resolution(m, 4 * cb + 8),
            ManifoldId::Sphere2 => Self::sphere(m, cb + 2, 2 * cb + 4),
            ManifoldId::Ellipse { .. } => {
                let freq = (band * m.period() / TAU).ceil() as usize;
                Self::with_resolution(m, (4 * freq + 8).max(512))
            }
        };
        g.exactness_band = 2.0 * band;
        Ok(g)
    }

    /// Grid with `n` nodes per angle (sphere: `n` colatitudes × `2n` longitudes).
    pub fn with_resolution(m: &Manifold, n: usize) -> Self {
        let n = n.max(1);
        match m.id() {
            ManifoldId::Circle => {
                let w = 1.0 / n as f64;
                let nodes = (0..n).map(|i| m.point_from_arclength(TAU * i as f64 / n as f64)).collect();
                QuadratureGrid {
                    nodes,
                    qweights: vec![w; n],
                    exactness_band: (n as f64 - 1.0),
                }
            }
            ManifoldId::Ellipse { .. } => {
                let len = m.period();
                let w = 1.0 / n as f64;
                let nodes = (0..n).map(|i| m.point_from_arclength(len * i as f64 / n as f64)).collect();
                QuadratureGrid {
                    nodes,
                    qweights: vec![w; n],
                    exactness_band: (n as f64 - 1.0) * TAU / len,
                }
            }
            ManifoldId::Torus2 => {
                let w = 1.0 / (n * n) as f64;
                let mut nodes = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        nodes.push(m.torus_from_chart(TAU * i as f64 / n as f64, TAU * j as f64 / n as f64));
                    }
                }
                QuadratureGrid {
                    nodes,
                    qweights: vec![w; n * n],
                    exactness_band: (n as f64 - 1.0),
                }
            }
            ManifoldId::Sphere2 => Self::sphere(m, n, 2 * n),
        }
    }

    fn sphere(m: &Manifold, nlat: usize, nlon: usize) -> Self {
        let (z, wz) = gauss_legendre(nlat);
        let mut nodes = Vec::with_capacity(nlat * nlon);
        let mut qweights = Vec::with_capacity(nlat * nlon);
        for (zi, wi) in z.iter().zip(&wz) {
            let theta = zi.clamp(-1.0, 1.0).acos();
            for j in 0..nlon {
                let phi = TAU * j as f64 / nlon as f64;
                nodes.push(m.canonical_point(&[theta, phi]).expect("sphere node"));
                qweights.push(0.5 * wi / nlon as f64);
            }
        }
        let exact = (2 * nlat - 1).min(nlon - 1) as f64;
        QuadratureGrid {
            nodes,
            qweights,
            exactness_band: exact,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫ f dμ`; sums in node order.
    pub fn integrate<F: FnMut(&ManifoldPoint) -> f64>(&self, mut f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (p, w) in self.nodes.iter().zip(&self.qweights) {
            let v = f(p);
            if !v.is_finite() {
                return Err(Error::NonFinite("integrand"));
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

/// `∫ f dμ` on a grid sized so that products of band `band_hint` are exact.
pub fn reference_integrate<F: FnMut(&ManifoldPoint) -> f64>(m: &Manifold, f: F, band_hint: f64) -> Result<f64> {
    QuadratureGrid::for_band(m, band_hint)?.integrate(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Tangent;

    #[test]
    fn gauss_legendre_small_orders() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(3);
        assert_eq!(x[1], 0.0);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
        assert!((x[2] - 0.6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in [1usize, 4, 9, 20, 41] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    fn compensated_sum(v: &[f64]) -> f64 {
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for &x in v {
            let t = s + x;
            c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
            s = t;
        }
        s + c
    }

    #[test]
    fn weights_sum_to_one() {
        for m in [Manifold::circle(), Manifold::torus(), Manifold::sphere(), Manifold::ellipse(2.0, 1.0).unwrap()] {
            for band in [0.0, 1.0, 3.5, 8.0] {
                let g = QuadratureGrid::for_band(&m, band).unwrap();
                assert!((compensated_sum(&g.qweights) - 1.0).abs() < 1e-14);
                assert!(g.qweights.iter().all(|&w| w > 0.0));
                assert!(g.exactness_band >= 2.0 * band);
            }
        }
    }

    #[test]
    fn reference_examples() {
        let c = Manifold::circle();
        let v = reference_integrate(&c, |p| 2f64.sqrt() * (3.0 * p.chart[0]).cos(), 3.0).unwrap();
        assert!(v.abs() < 1e-15);
        let s = Manifold::sphere();
        assert!((reference_integrate(&s, |_| 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let t = Manifold::torus();
        let v = reference_integrate(&t, |p| (p.chart[0] + 2.0 * p.chart[1]).cos(), 2.5).unwrap();
        assert!(v.abs() < 1e-14);
        assert!(reference_integrate(&c, |_| f64::NAN, 1.0).is_err());
    }

    #[test]
    fn sphere_moments() {
        let s = Manifold::sphere();
        let g = QuadratureGrid::for_band(&s, 4.0).unwrap();
        // ∫ z² dμ = 1/3, ∫ x⁴ dμ = 1/5
        assert!((g.integrate(|p| p.ambient[2].powi(2)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((g.integrate(|p| p.ambient[0].powi(4)).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn green_identity_circle_and_torus() {
        // ∫⟨∇f, X⟩ + ∫ f div X = 0 for band-limited f and fields X
        let c = Manifold::circle();
        let f = |t: f64| (2.0 * t).sin() + 0.3 * t.cos();
        let df = |t: f64| 2.0 * (2.0 * t).cos() - 0.3 * t.sin();
        let x = |t: f64| (3.0 * t).cos() - 0.5;
        let dx = |t: f64| -3.0 * (3.0 * t).sin();
        let v = reference_integrate(&c, |p| df(p.chart[0]) * x(p.chart[0]) + f(p.chart[0]) * dx(p.chart[0]), 6.0).unwrap();
        assert!(v.abs() < 1e-10);

        let t = Manifold::torus();
        let v = reference_integrate(
            &t,
            |p| {
                let (a, b) = (p.chart[0], p.chart[1]);
                let f = (a + b).sin() + (2.0 * b).cos();
                let grad = Tangent([(a + b).cos(), (a + b).cos() - 2.0 * (2.0 * b).sin(), 0.0]);
                let field = Tangent([(a - b).cos(), a.sin() * b.cos(), 0.0]);
                let div = -(a - b).sin() - a.sin() * b.sin();
                grad.dot(&field) + f * div
            },
            4.0,
        )
        .unwrap();
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn ellipse_grid_is_uniform_in_arclength() {
        let e = Manifold::ellipse(2.0, 1.0).unwrap();
        let g = QuadratureGrid::for_band(&e, 2.0).unwrap();
        let len = e.period();
        // perimeter-weighted mean of x² equals (1/ℓ) ∮ x² ds
        let arc = e.arc().unwrap();
        let (tn, tw) = gauss_legendre(64);
        let mut direct = 0.0;
        for k in 0..16 {
            let lo = TAU * k as f64 / 16.0;
            let hi = lo + TAU / 16.0;
            for (x, w) in tn.iter().zip(&tw) {
                let t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
                direct += 0.5 * (hi - lo) * w * (2.0 * t.cos()).powi(2) * arc.speed(t);
            }
        }
        let q = g.integrate(|p| p.ambient[0].powi(2)).unwrap();
        assert!((q - direct / len).abs() < 1e-12, "{q} {}", direct / len);
    }
}
