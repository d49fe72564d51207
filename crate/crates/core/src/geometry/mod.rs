//! Model manifolds: circle, flat torus, round sphere and ellipse.
//!
//! All measures are normalized to total mass one. Tangent vectors are stored
//! in a representation whose Euclidean norm is the Riemannian norm:
//! the arc-length component on the circle and ellipse, chart components on the
//! flat torus, and ambient coordinates on the sphere.

pub mod arclength;
pub mod quadrature;

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use arclength::ArcLength;
pub use quadrature::{reference_integrate, QuadratureGrid};

use crate::error::{Error, Result};

/// Serializable manifold descriptor, e.g. `{"kind": "ellipse", "a": 2, "b": 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ManifoldId {
    Circle,
    Torus2,
    Sphere2,
    Ellipse { a: f64, b: f64 },
}

impl ManifoldId {
    pub fn kind(&self) -> ManifoldKind {
        match self {
            ManifoldId::Circle => ManifoldKind::Circle,
            ManifoldId::Torus2 => ManifoldKind::Torus2,
            ManifoldId::Sphere2 => ManifoldKind::Sphere2,
            ManifoldId::Ellipse { .. } => ManifoldKind::Ellipse,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ManifoldId::Circle | ManifoldId::Ellipse { .. } => 1,
            ManifoldId::Torus2 | ManifoldId::Sphere2 => 2,
        }
    }

    /// Parses `circle`, `torus2`, `sphere2` or `ellipse:A:B`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        match parts.as_slice() {
            ["circle"] => Ok(ManifoldId::Circle),
            ["torus2"] | ["torus"] => Ok(ManifoldId::Torus2),
            ["sphere2"] | ["sphere"] => Ok(ManifoldId::Sphere2),
            ["ellipse", a, b] => {
                let a: f64 = a.parse().map_err(|_| Error::Unsupported(format!("bad axis '{a}'")))?;
                let b: f64 = b.parse().map_err(|_| Error::Unsupported(format!("bad axis '{b}'")))?;
                Ok(ManifoldId::Ellipse { a, b })
            }
            _ => Err(Error::Unsupported(format!("unknown manifold '{spec}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Circle,
    Torus2,
    Sphere2,
    Ellipse,
}

/// Empirical constants with `c1 r^d <= μ(B(x, r)) <= c2 r^d` for `0 < r <= diam`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingConstants {
    pub c1: f64,
    pub c2: f64,
}

/// A manifold together with its cached arc-length table and doubling constants.
#[derive(Clone, Debug)]
pub struct Manifold {
    id: ManifoldId,
    arc: Option<Arc<ArcLength>>,
    doubling: DoublingConstants,
}

impl PartialEq for Manifold {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

/// A point in chart coordinates with its ambient embedding.
///
/// `intrinsic` caches the arc-length coordinate on the ellipse (and the
/// angle itself on the circle) so that basis evaluation never re-integrates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub kind: ManifoldKind,
    pub chart: [f64; 2],
    pub ambient: [f64; 3],
    pub intrinsic: f64,
}

impl ManifoldPoint {
    pub fn chart_slice(&self) -> &[f64] {
        match self.kind {
            ManifoldKind::Circle | ManifoldKind::Ellipse => &self.chart[..1],
            _ => &self.chart[..],
        }
    }
}

/// Tangent vector; see the module docs for the representation per manifold.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tangent(pub [f64; 3]);

impl Tangent {
    pub const ZERO: Tangent = Tangent([0.0; 3]);

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, o: &Tangent) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn scale(&self, s: f64) -> Tangent {
        Tangent([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn add(&self, o: &Tangent) -> Tangent {
        Tangent([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }

    pub fn axpy(&mut self, s: f64, o: &Tangent) {
        for i in 0..3 {
            self.0[i] += s * o.0[i];
        }
    }
}

#[inline]
fn reduce_angle(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[inline]
fn reduce_period(s: f64, period: f64) -> f64 {
    let r = s.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

#[inline]
pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn normalize3(a: [f64; 3]) -> [f64; 3] {
    let n = dot3(&a, &a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Great-circle distance between unit vectors.
#[inline]
pub(crate) fn sphere_angle(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    let c = cross3(p, q);
    dot3(&c, &c).sqrt().atan2(dot3(p, q))
}

/// Geodesic distance between two points of the flat torus `[0, 2π)²`,
/// components folded into `[0, π]`.
#[inline]
pub(crate) fn fold_angle(d: f64) -> f64 {
    let d = d.abs().rem_euclid(TAU);
    d.min(TAU - d)
}

impl Manifold {
    pub fn new(id: ManifoldId) -> Result<Self> {
        let arc = match id {
            ManifoldId::Ellipse { a, b } => Some(Arc::new(ArcLength::new(a, b)?)),
            _ => None,
        };
        let mut m = Manifold {
            id,
            arc,
            doubling: DoublingConstants { c1: 0.0, c2: 0.0 },
        };
        m.doubling = m.sample_doubling_constants();
        Ok(m)
    }

    pub fn circle() -> Self {
        Self::new(ManifoldId::Circle).expect("circle")
    }

    pub fn torus() -> Self {
        Self::new(ManifoldId::Torus2).expect("torus")
    }

    pub fn sphere() -> Self {
        Self::new(ManifoldId::Sphere2).expect("sphere")
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::new(ManifoldId::Ellipse { a, b })
    }

    pub fn id(&self) -> ManifoldId {
        self.id
    }

    pub fn kind(&self) -> ManifoldKind {
        self.id.kind()
    }

    pub fn dim(&self) -> usize {
        self.id.dim()
    }

    pub fn arc(&self) -> Option<&ArcLength> {
        self.arc.as_deref()
    }

    pub fn doubling(&self) -> DoublingConstants {
        self.doubling
    }

    /// Length of the closed 1-d manifold in its own metric.
    pub fn period(&self) -> f64 {
        match &self.arc {
            Some(arc) => arc.length(),
            None => TAU,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.id {
            ManifoldId::Circle | ManifoldId::Sphere2 => PI,
            ManifoldId::Torus2 => PI * std::f64::consts::SQRT_2,
            ManifoldId::Ellipse { .. } => self.period() / 2.0,
        }
    }

    fn check(&self, p: &ManifoldPoint) -> Result<()> {
        if p.kind != self.kind() {
            Err(Error::ManifoldMismatch)
        } else {
            Ok(())
        }
    }

    /// Canonical point from chart coordinates.
    pub fn canonical_point(&self, chart: &[f64]) -> Result<ManifoldPoint> {
        if chart.len() != self.dim() {
            return Err(Error::Arity {
                expected: self.dim(),
                got: chart.len(),
            });
        }
        if chart.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("chart coordinates"));
        }
        Ok(match self.id {
            ManifoldId::Circle => self.circle_point(reduce_angle(chart[0])),
            ManifoldId::Ellipse { .. } => {
                let t = reduce_angle(chart[0]);
                let s = self.arc.as_ref().expect("ellipse arc").h_unchecked(t);
                self.ellipse_point(t, s)
            }
            ManifoldId::Torus2 => self.torus_point(reduce_angle(chart[0]), reduce_angle(chart[1])),
            ManifoldId::Sphere2 => {
                let mut theta = reduce_angle(chart[0]);
                let mut phi = chart[1];
                if theta > PI {
                    theta = TAU - theta;
                    phi += PI;
                }
                self.sphere_point(theta, reduce_angle(phi))
            }
        })
    }

    fn circle_point(&self, t: f64) -> ManifoldPoint {
        let (s, c) = t.sin_cos();
        ManifoldPoint {
            kind: ManifoldKind::Circle,
            chart: [t, 0.0],
            ambient: [c, s, 0.0],
            intrinsic: t,
        }
    }

    fn ellipse_point(&self, t: f64, s: f64) -> ManifoldPoint {
        let (a, b) = self.arc.as_ref().expect("ellipse arc").axes();
        let (sn, cs) = t.sin_cos();
        ManifoldPoint {
            kind: ManifoldKind::Ellipse,
            chart: [t, 0.0],
            ambient: [a * cs, b * sn, 0.0],
            intrinsic: s,
        }
    }

    fn torus_point(&self, t1: f64, t2: f64) -> ManifoldPoint {
        ManifoldPoint {
            kind: ManifoldKind::Torus2,
            chart: [t1, t2],
            ambient: [t1.cos(), t1.sin(), t2.cos()],
            intrinsic: 0.0,
        }
    }

    fn sphere_point(&self, theta: f64, phi: f64) -> ManifoldPoint {
        // longitude is 0 at both poles
        if theta == 0.0 || theta == PI {
            let z = if theta == 0.0 { 1.0 } else { -1.0 };
            return ManifoldPoint {
                kind: ManifoldKind::Sphere2,
                chart: [theta, 0.0],
                ambient: [0.0, 0.0, z],
                intrinsic: 0.0,
            };
        }
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        ManifoldPoint {
            kind: ManifoldKind::Sphere2,
            chart: [theta, phi],
            ambient: [st * cp, st * sp, ct],
            intrinsic: 0.0,
        }
    }

    /// Sphere point from an ambient vector (normalized here).
    pub fn sphere_from_ambient(&self, v: [f64; 3]) -> ManifoldPoint {
        let u = normalize3(v);
        let rho = (u[0] * u[0] + u[1] * u[1]).sqrt();
        let theta = rho.atan2(u[2]);
        let phi = if rho == 0.0 { 0.0 } else { reduce_angle(u[1].atan2(u[0])) };
        ManifoldPoint {
            kind: ManifoldKind::Sphere2,
            chart: [theta, phi],
            ambient: u,
            intrinsic: 0.0,
        }
    }

    /// Point on a 1-d manifold from its arc-length coordinate.
    pub fn point_from_arclength(&self, s: f64) -> ManifoldPoint {
        match self.id {
            ManifoldId::Ellipse { .. } => {
                let arc = self.arc.as_ref().expect("ellipse arc");
                let s = reduce_period(s, arc.length());
                self.ellipse_point(arc.h_inverse_unchecked(s), s)
            }
            _ => self.circle_point(reduce_angle(s)),
        }
    }

    /// Builds a point of this manifold from a torus chart without validity checks.
    pub(crate) fn torus_from_chart(&self, t1: f64, t2: f64) -> ManifoldPoint {
        self.torus_point(reduce_angle(t1), reduce_angle(t2))
    }

    pub fn distance(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<f64> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.distance_unchecked(p, q))
    }

    pub(crate) fn distance_unchecked(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> f64 {
        match self.id {
            ManifoldId::Circle => fold_angle(p.intrinsic - q.intrinsic),
            ManifoldId::Ellipse { .. } => {
                let len = self.period();
                let d = (p.intrinsic - q.intrinsic).abs().rem_euclid(len);
                d.min(len - d)
            }
            ManifoldId::Torus2 => {
                let d1 = fold_angle(p.chart[0] - q.chart[0]);
                let d2 = fold_angle(p.chart[1] - q.chart[1]);
                d1.hypot(d2)
            }
            ManifoldId::Sphere2 => sphere_angle(&p.ambient, &q.ambient),
        }
    }

    /// Orthonormal tangent frame at `p` (first `dim()` entries are meaningful).
    pub fn tangent_frame(&self, p: &ManifoldPoint) -> [Tangent; 2] {
        match self.id {
            ManifoldId::Circle | ManifoldId::Ellipse { .. } => [Tangent([1.0, 0.0, 0.0]), Tangent::ZERO],
            ManifoldId::Torus2 => [Tangent([1.0, 0.0, 0.0]), Tangent([0.0, 1.0, 0.0])],
            ManifoldId::Sphere2 => {
                let n = p.ambient;
                // pick the coordinate axis least aligned with the normal
                let axis = if n[0].abs() <= n[1].abs() && n[0].abs() <= n[2].abs() {
                    [1.0, 0.0, 0.0]
                } else if n[1].abs() <= n[2].abs() {
                    [0.0, 1.0, 0.0]
                } else {
                    [0.0, 0.0, 1.0]
                };
                let e1 = normalize3(cross3(&n, &axis));
                let e2 = cross3(&n, &e1);
                [Tangent(e1), Tangent(e2)]
            }
        }
    }

    /// Unit ambient tangent of a 1-d manifold at `p`, in the direction of increasing arc length.
    pub fn ambient_unit_tangent(&self, p: &ManifoldPoint) -> [f64; 3] {
        match self.id {
            ManifoldId::Ellipse { a, b } => {
                let (s, c) = p.chart[0].sin_cos();
                let v = [-a * s, b * c, 0.0];
                normalize3(v)
            }
            _ => [-p.ambient[1], p.ambient[0], 0.0],
        }
    }

    /// Riemannian gradient from an ambient gradient of any smooth extension.
    pub fn project_ambient_gradient(&self, p: &ManifoldPoint, g: [f64; 3]) -> Tangent {
        match self.id {
            ManifoldId::Circle | ManifoldId::Ellipse { .. } => {
                let t = self.ambient_unit_tangent(p);
                Tangent([dot3(&g, &t), 0.0, 0.0])
            }
            ManifoldId::Sphere2 => {
                let n = &p.ambient;
                let gn = dot3(&g, n);
                Tangent([g[0] - gn * n[0], g[1] - gn * n[1], g[2] - gn * n[2]])
            }
            ManifoldId::Torus2 => Tangent([g[0], g[1], 0.0]),
        }
    }

    /// Projects a tangent representation onto the tangent space at `p`.
    pub fn project_tangent(&self, p: &ManifoldPoint, v: &Tangent) -> Tangent {
        match self.id {
            ManifoldId::Sphere2 => self.project_ambient_gradient(p, v.0),
            ManifoldId::Circle | ManifoldId::Ellipse { .. } => Tangent([v.0[0], 0.0, 0.0]),
            ManifoldId::Torus2 => Tangent([v.0[0], v.0[1], 0.0]),
        }
    }

    /// Point at distance `|s|` from `p` along the geodesic with unit initial velocity `v`.
    pub fn exp_step(&self, p: &ManifoldPoint, v: &Tangent, s: f64) -> Result<ManifoldPoint> {
        self.check(p)?;
        if !s.is_finite() || v.0.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("exp_step input"));
        }
        let vt = self.project_tangent(p, v);
        let n = vt.norm();
        if (n - 1.0).abs() > 1e-12 || (v.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::NotUnit(v.norm()));
        }
        Ok(self.retract(p, &vt.scale(s)))
    }

    /// Exponential map `exp_p(w)` for an arbitrary tangent vector `w`.
    pub fn retract(&self, p: &ManifoldPoint, w: &Tangent) -> ManifoldPoint {
        match self.id {
            ManifoldId::Circle => self.circle_point(reduce_angle(p.intrinsic + w.0[0])),
            ManifoldId::Ellipse { .. } => self.point_from_arclength(p.intrinsic + w.0[0]),
            ManifoldId::Torus2 => self.torus_point(reduce_angle(p.chart[0] + w.0[0]), reduce_angle(p.chart[1] + w.0[1])),
            ManifoldId::Sphere2 => {
                let n = p.ambient;
                let w = self.project_ambient_gradient(p, w.0).0;
                let theta = dot3(&w, &w).sqrt();
                if theta == 0.0 {
                    return *p;
                }
                let (st, ct) = theta.sin_cos();
                let q = [
                    ct * n[0] + st * w[0] / theta,
                    ct * n[1] + st * w[1] / theta,
                    ct * n[2] + st * w[2] / theta,
                ];
                self.sphere_from_ambient(q)
            }
        }
    }

    /// Velocity at distance `s` of the unit-speed geodesic leaving `p` along `v`.
    pub fn geodesic_velocity(&self, p: &ManifoldPoint, v: &Tangent, s: f64) -> Tangent {
        match self.id {
            ManifoldId::Sphere2 => {
                let (st, ct) = s.sin_cos();
                let n = p.ambient;
                Tangent([
                    -st * n[0] + ct * v.0[0],
                    -st * n[1] + ct * v.0[1],
                    -st * n[2] + ct * v.0[2],
                ])
            }
            _ => *v,
        }
    }

    /// Normalized measure of the open geodesic ball `B(center, r)`.
    pub fn ball_measure(&self, center: &ManifoldPoint, r: f64) -> Result<f64> {
        self.check(center)?;
        if !(r > 0.0 && r <= self.diameter() * (1.0 + 1e-12)) {
            return Err(Error::OutOfRange { what: "radius", value: r });
        }
        Ok(self.ball_measure_radius(r))
    }

    fn ball_measure_radius(&self, r: f64) -> f64 {
        match self.id {
            ManifoldId::Circle | ManifoldId::Ellipse { .. } => (2.0 * r / self.period()).min(1.0),
            ManifoldId::Sphere2 => (1.0 - r.cos()) / 2.0,
            ManifoldId::Torus2 => torus_disk_area(r) / (TAU * TAU),
        }
    }

    fn sample_doubling_constants(&self) -> DoublingConstants {
        let d = self.dim() as i32;
        let diam = self.diameter();
        let mut c1 = f64::INFINITY;
        let mut c2 = 0.0f64;
        for i in 1..=1000 {
            let r = diam * i as f64 / 1000.0;
            let ratio = self.ball_measure_radius(r) / r.powi(d);
            c1 = c1.min(ratio);
            c2 = c2.max(ratio);
        }
        // small-radius limit
        let r = diam * 1e-6;
        let ratio = self.ball_measure_radius(r) / r.powi(d);
        DoublingConstants {
            c1: c1.min(ratio),
            c2: c2.max(ratio),
        }
    }
}

/// Area of `{y ∈ [-π, π]² : |y| < r}`, i.e. a geodesic disk on the flat torus.
fn torus_disk_area(r: f64) -> f64 {
    if r <= PI {
        return PI * r * r;
    }
    let r = r.min(PI * std::f64::consts::SQRT_2);
    // quarter area inside [0, π]²: strip where the disk is capped by x = π
    let x0 = (r * r - PI * PI).sqrt();
    let prim = |x: f64| 0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).clamp(-1.0, 1.0).asin());
    let quarter = PI * x0 + (prim(PI) - prim(x0));
    4.0 * quarter
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(m: &Manifold, rng: &mut ChaCha8Rng) -> ManifoldPoint {
        match m.dim() {
            1 => m.canonical_point(&[rng.random_range(0.0..TAU)]).unwrap(),
            _ => match m.kind() {
                ManifoldKind::Sphere2 => {
                    let z: f64 = rng.random_range(-1.0..1.0);
                    m.canonical_point(&[z.acos(), rng.random_range(0.0..TAU)]).unwrap()
                }
                _ => m.canonical_point(&[rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)]).unwrap(),
            },
        }
    }

    fn all() -> Vec<Manifold> {
        vec![Manifold::circle(), Manifold::torus(), Manifold::sphere(), Manifold::ellipse(2.0, 1.0).unwrap()]
    }

    #[test]
    fn canonical_examples() {
        let c = Manifold::circle();
        let p = c.canonical_point(&[5.0 * PI / 2.0]).unwrap();
        assert!((p.chart[0] - PI / 2.0).abs() < 1e-14);
        assert!(p.ambient[0].abs() < 1e-14 && (p.ambient[1] - 1.0).abs() < 1e-14);

        let s = Manifold::sphere();
        let p = s.canonical_point(&[0.0, 1.3]).unwrap();
        assert_eq!(p.ambient, [0.0, 0.0, 1.0]);
        assert_eq!(p.chart[1], 0.0);

        let e = Manifold::ellipse(2.0, 1.0).unwrap();
        let p = e.canonical_point(&[0.0]).unwrap();
        assert_eq!(p.ambient[0], 2.0);
        assert_eq!(p.ambient[1], 0.0);
    }

    #[test]
    fn canonical_errors() {
        let t = Manifold::torus();
        assert!(matches!(t.canonical_point(&[1.0]), Err(Error::Arity { .. })));
        assert!(matches!(t.canonical_point(&[1.0, f64::NAN]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn ambient_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = Manifold::ellipse(2.0, 1.0).unwrap();
        let s = Manifold::sphere();
        for _ in 0..200 {
            let p = random_point(&e, &mut rng);
            assert!((p.ambient[0].powi(2) / 4.0 + p.ambient[1].powi(2) - 1.0).abs() < 1e-14);
            let q = random_point(&s, &mut rng);
            assert!((dot3(&q.ambient, &q.ambient) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn distance_examples() {
        let s = Manifold::sphere();
        let n = s.canonical_point(&[0.0, 0.0]).unwrap();
        let so = s.canonical_point(&[PI, 0.0]).unwrap();
        assert!((s.distance(&n, &so).unwrap() - PI).abs() < 1e-15);

        let t = Manifold::torus();
        let a = t.canonical_point(&[0.0, 0.0]).unwrap();
        let b = t.canonical_point(&[PI, PI]).unwrap();
        assert!((t.distance(&a, &b).unwrap() - std::f64::consts::SQRT_2 * PI).abs() < 1e-14);

        let e = Manifold::ellipse(2.0, 1.0).unwrap();
        let a = e.canonical_point(&[0.0]).unwrap();
        let b = e.canonical_point(&[PI]).unwrap();
        assert!((e.distance(&a, &b).unwrap() - 4.844_224_1).abs() < 1e-7);

        assert!(matches!(s.distance(&n, &a), Err(Error::ManifoldMismatch)));
    }

    #[test]
    fn distance_is_a_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in all() {
            for _ in 0..1000 {
                let (p, q, r) = (random_point(&m, &mut rng), random_point(&m, &mut rng), random_point(&m, &mut rng));
                let pq = m.distance(&p, &q).unwrap();
                assert!((pq - m.distance(&q, &p).unwrap()).abs() <= 1e-12);
                assert!(pq <= m.distance(&p, &r).unwrap() + m.distance(&r, &q).unwrap() + 1e-12);
                assert!(pq >= 0.0 && pq <= m.diameter() + 1e-12);
            }
        }
    }

    #[test]
    fn exp_examples() {
        let c = Manifold::circle();
        let p = c.canonical_point(&[0.0]).unwrap();
        let q = c.exp_step(&p, &Tangent([1.0, 0.0, 0.0]), PI / 2.0).unwrap();
        assert!((q.chart[0] - PI / 2.0).abs() < 1e-15);

        let s = Manifold::sphere();
        let n = s.canonical_point(&[0.0, 0.0]).unwrap();
        let q = s.exp_step(&n, &Tangent([1.0, 0.0, 0.0]), PI / 2.0).unwrap();
        assert!((q.ambient[0] - 1.0).abs() < 1e-15 && q.ambient[2].abs() < 1e-15);

        let t = Manifold::torus();
        let o = t.canonical_point(&[0.0, 0.0]).unwrap();
        let q = t.exp_step(&o, &Tangent([1.0, 0.0, 0.0]), TAU).unwrap();
        assert!(t.distance(&o, &q).unwrap() < 1e-14);

        assert!(matches!(c.exp_step(&p, &Tangent([1.1, 0.0, 0.0]), 1.0), Err(Error::NotUnit(_))));
    }

    #[test]
    fn exp_moves_by_exact_distance_and_returns() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in all() {
            for _ in 0..300 {
                let p = random_point(&m, &mut rng);
                let frame = m.tangent_frame(&p);
                let ang: f64 = rng.random_range(0.0..TAU);
                let v = if m.dim() == 1 {
                    Tangent([if ang < PI { 1.0 } else { -1.0 }, 0.0, 0.0])
                } else {
                    frame[0].scale(ang.cos()).add(&frame[1].scale(ang.sin()))
                };
                let s: f64 = rng.random_range(0.0..0.9 * m.diameter().min(PI));
                let q = m.exp_step(&p, &v, s).unwrap();
                assert!((m.distance(&p, &q).unwrap() - s).abs() < 1e-11, "{:?}", m.id());
                let back_v = m.geodesic_velocity(&p, &v, s).scale(-1.0);
                let back = m.exp_step(&q, &back_v, s).unwrap();
                assert!(m.distance(&p, &back).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_measure_examples() {
        let c = Manifold::circle();
        let s = Manifold::sphere();
        let t = Manifold::torus();
        let pc = c.canonical_point(&[1.0]).unwrap();
        let ps = s.canonical_point(&[0.4, 2.0]).unwrap();
        let pt = t.canonical_point(&[0.0, 0.0]).unwrap();
        assert!((c.ball_measure(&pc, PI / 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((s.ball_measure(&ps, PI / 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((t.ball_measure(&pt, PI / 4.0).unwrap() - PI / 64.0).abs() < 1e-15);
        assert!((t.ball_measure(&pt, t.diameter()).unwrap() - 1.0).abs() < 1e-12);
        assert!(c.ball_measure(&pc, 0.0).is_err());
        assert!(c.ball_measure(&pc, 4.0).is_err());
    }

    #[test]
    fn torus_ball_measure_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = 3.9;
        let n = 400_000;
        let hits = (0..n)
            .filter(|_| {
                let x: f64 = rng.random_range(-PI..PI);
                let y: f64 = rng.random_range(-PI..PI);
                x.hypot(y) < r
            })
            .count();
        let mc = hits as f64 / n as f64;
        assert!((torus_disk_area(r) / (TAU * TAU) - mc).abs() < 5e-3);
    }

    #[test]
    fn doubling_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in all() {
            let DoublingConstants { c1, c2 } = m.doubling();
            assert!(c1 > 0.0 && c1 <= c2);
            let d = m.dim() as i32;
            for _ in 0..1000 {
                let x = random_point(&m, &mut rng);
                let r = rng.random_range(1e-4..1.0) * m.diameter();
                let mu = m.ball_measure(&x, r).unwrap();
                assert!(c1 * r.powi(d) <= mu * (1.0 + 1e-12) && mu <= c2 * r.powi(d) * (1.0 + 1e-12));
            }
        }
        let c = Manifold::circle().doubling();
        assert!((c.c1 - 1.0 / PI).abs() < 1e-12 && (c.c2 - 1.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn geodesic_lipschitz_inequality() {
        // |f(p) - f(q)| <= d(p, q) sup ‖∇f‖ along the joining geodesic
        let s = Manifold::sphere();
        let f = |p: &ManifoldPoint| p.ambient[0] * p.ambient[2] + p.ambient[1];
        let grad = |p: &ManifoldPoint| {
            let g = [p.ambient[2], 1.0, p.ambient[0]];
            s.project_ambient_gradient(p, g).norm()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p = random_point(&s, &mut rng);
            let q = random_point(&s, &mut rng);
            let d = s.distance(&p, &q).unwrap();
            if d < 1e-9 || d > PI - 1e-6 {
                continue;
            }
            let dir = s.project_ambient_gradient(&p, q.ambient);
            let v = dir.scale(1.0 / dir.norm());
            let sup = (0..=400)
                .map(|i| grad(&s.exp_step(&p, &v, d * i as f64 / 400.0).unwrap()))
                .fold(0.0, f64::max);
            assert!((f(&p) - f(&q)).abs() <= d * sup * (1.0 + 1e-3) + 1e-12);
        }
    }

    #[test]
    fn descriptor_json() {
        let id: ManifoldId = serde_json::from_str(r#"{"kind":"ellipse","a":2.0,"b":1.0}"#).unwrap();
        assert_eq!(id, ManifoldId::Ellipse { a: 2.0, b: 1.0 });
        assert_eq!(serde_json::to_string(&ManifoldId::Torus2).unwrap(), r#"{"kind":"torus2"}"#);
        assert_eq!(ManifoldId::parse("ellipse:2:1").unwrap(), id);
    }
}
