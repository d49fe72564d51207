//! Measure-exact cuts of single cells.
//!
//! Each cell carries a monotone sweep `s ∈ [0, 1]`: arc length along an arc,
//! the horizontal coordinate across a torus square, and the fan angle from
//! the first vertex of a spherical triangle, where `s` moves the far point
//! `P(s)` along the opposite edge. A piece is the part of a cell with sweep
//! parameter in `[lo, hi]`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::cells::{arc_max_distance, axis_max_distance, triangle_area, triangle_max_distance, CellId, CellTree, Tri};
use crate::error::{Error, Result};
use crate::geometry::{cross3, dot3, normalize3, ManifoldKind, ManifoldPoint};

/// Pieces thinner than this are not split off.
pub const TAKE_TOL: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Atom {
    Whole { cell: CellId },
    Piece { cell: CellId, lo: f64, hi: f64 },
}

impl Atom {
    pub fn cell(&self) -> CellId {
        match *self {
            Atom::Whole { cell } | Atom::Piece { cell, .. } => cell,
        }
    }

    pub fn range(&self) -> (f64, f64) {
        match *self {
            Atom::Whole { .. } => (0.0, 1.0),
            Atom::Piece { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn is_whole(&self) -> bool {
        matches!(self, Atom::Whole { .. })
    }
}

fn slerp(b: &[f64; 3], c: &[f64; 3], s: f64) -> [f64; 3] {
    let cr = cross3(b, c);
    let omega = dot3(&cr, &cr).sqrt().atan2(dot3(b, c));
    let so = omega.sin();
    let (wb, wc) = (((1.0 - s) * omega).sin() / so, (s * omega).sin() / so);
    normalize3([wb * b[0] + wc * c[0], wb * b[1] + wc * c[1], wb * b[2] + wc * c[2]])
}

impl CellTree {
    /// Measure of the sweep prefix `[0, s]` of `cell`.
    pub fn prefix_measure(&self, cell: CellId, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match self.manifold().kind() {
            ManifoldKind::Sphere2 if cell.level > 0 => {
                if s == 1.0 {
                    return self.measure(cell);
                }
                let [a, b, c] = self.triangle(cell);
                triangle_area(&[*a, *b, slerp(b, c, s)])
            }
            _ => s * self.measure(cell),
        }
    }

    pub fn atom_measure(&self, atom: &Atom) -> f64 {
        match *atom {
            Atom::Whole { cell } => self.measure(cell),
            Atom::Piece { cell, lo, hi } => self.prefix_measure(cell, hi) - self.prefix_measure(cell, lo),
        }
    }

    /// Sweep parameter `s ≥ lo` with `μ([lo, s]) = τ`.
    fn cut_param(&self, cell: CellId, lo: f64, tau: f64) -> f64 {
        match self.manifold().kind() {
            ManifoldKind::Sphere2 if cell.level > 0 => {
                let base = self.prefix_measure(cell, lo);
                let (mut a, mut b) = (lo, 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    if self.prefix_measure(cell, mid) - base < tau {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                // pick the bracket end with the smaller measure error
                let ea = (self.prefix_measure(cell, a) - base - tau).abs();
                let eb = (self.prefix_measure(cell, b) - base - tau).abs();
                if ea <= eb {
                    a
                } else {
                    b
                }
            }
            _ => (lo + tau / self.measure(cell)).min(1.0),
        }
    }

    /// Sub-region of `cell` with measure `tau`, as the sweep prefix.
    pub fn exact_cut(&self, cell: CellId, tau: f64) -> Result<Atom> {
        let mu = self.measure(cell);
        if !(tau >= 0.0 && tau <= mu * (1.0 + 1e-14)) {
            return Err(Error::OutOfRange { what: "cut measure", value: tau });
        }
        if tau >= mu {
            return Ok(Atom::Whole { cell });
        }
        let hi = if tau == 0.0 { 0.0 } else { self.cut_param(cell, 0.0, tau) };
        Ok(Atom::Piece { cell, lo: 0.0, hi })
    }

    /// Sweep parameter of a point inside `cell`.
    pub fn sweep_param(&self, cell: CellId, p: &ManifoldPoint) -> f64 {
        let m = self.manifold();
        let s = match m.kind() {
            ManifoldKind::Circle | ManifoldKind::Ellipse => {
                let (s0, len) = self.arc(cell);
                let d = (p.intrinsic - s0).rem_euclid(m.period());
                if d > len {
                    // wrapped just below s0
                    0.0
                } else {
                    d / len
                }
            }
            ManifoldKind::Torus2 => {
                let (x0, _, w) = self.square(cell);
                let d = (p.chart[0] - x0).rem_euclid(std::f64::consts::TAU);
                if d > w + 1e-12 {
                    0.0
                } else {
                    d / w
                }
            }
            ManifoldKind::Sphere2 => {
                if cell.level == 0 {
                    return 0.5;
                }
                let [a, b, c] = self.triangle(cell);
                let n = cross3(a, &p.ambient);
                if dot3(&n, &n) < 1e-30 {
                    return 0.0;
                }
                let bc = cross3(b, c);
                let mut q = normalize3(cross3(&n, &bc));
                if dot3(&q, &[b[0] + c[0], b[1] + c[1], b[2] + c[2]]) < 0.0 {
                    q = [-q[0], -q[1], -q[2]];
                }
                let ang = |u: &[f64; 3], v: &[f64; 3]| {
                    let cr = cross3(u, v);
                    dot3(&cr, &cr).sqrt().atan2(dot3(u, v))
                };
                ang(b, &q) / ang(b, c)
            }
        };
        s.clamp(0.0, 1.0)
    }

    /// Vertices of a spherical atom.
    pub(crate) fn atom_triangle(&self, atom: &Atom) -> Tri {
        let t = self.triangle(atom.cell());
        match *atom {
            Atom::Whole { .. } => *t,
            Atom::Piece { lo, hi, .. } => [t[0], slerp(&t[1], &t[2], lo), slerp(&t[1], &t[2], hi)],
        }
    }

    /// Largest distance from `p` to the closure of `atom`.
    pub fn atom_max_distance(&self, p: &ManifoldPoint, atom: &Atom) -> f64 {
        let m = self.manifold();
        let cell = atom.cell();
        let (lo, hi) = atom.range();
        if cell.level == 0 {
            return m.diameter();
        }
        match m.kind() {
            ManifoldKind::Circle | ManifoldKind::Ellipse => {
                let (s0, len) = self.arc(cell);
                arc_max_distance(p.intrinsic, s0 + lo * len, (hi - lo) * len, m.period())
            }
            ManifoldKind::Torus2 => {
                let (x0, y0, w) = self.square(cell);
                let dx = axis_max_distance(p.chart[0], x0 + lo * w, (hi - lo) * w);
                let dy = axis_max_distance(p.chart[1], y0, w);
                dx.hypot(dy)
            }
            ManifoldKind::Sphere2 => triangle_max_distance(&p.ambient, &self.atom_triangle(atom)),
        }
    }

    /// Point of the atom at local coordinates `(u, v) ∈ [0, 1]²`.
    pub fn atom_sample(&self, atom: &Atom, u: f64, v: f64) -> ManifoldPoint {
        let m = self.manifold();
        let cell = atom.cell();
        let (lo, hi) = atom.range();
        match m.kind() {
            ManifoldKind::Circle | ManifoldKind::Ellipse => {
                let (s0, len) = self.arc(cell);
                m.point_from_arclength(s0 + (lo + u * (hi - lo)) * len)
            }
            ManifoldKind::Torus2 => {
                let (x0, y0, w) = self.square(cell);
                m.torus_from_chart(x0 + (lo + u * (hi - lo)) * w, y0 + v * w)
            }
            ManifoldKind::Sphere2 => {
                let t = self.atom_triangle(atom);
                // fold the unit square onto the simplex
                let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
                let w = 1.0 - u - v;
                m.sphere_from_ambient([
                    w * t[0][0] + u * t[1][0] + v * t[2][0],
                    w * t[0][1] + u * t[1][1] + v * t[2][1],
                    w * t[0][2] + u * t[1][2] + v * t[2][2],
                ])
            }
        }
    }
}

/// FIFO of atoms from which regions draw measure.
#[derive(Clone, Debug, Default)]
pub(crate) struct Stream {
    atoms: VecDeque<Atom>,
}

impl Stream {
    pub fn push(&mut self, a: Atom) {
        self.atoms.push_back(a);
    }

    pub fn extend<I: IntoIterator<Item = Atom>>(&mut self, it: I) {
        self.atoms.extend(it);
    }

    pub fn into_atoms(self) -> Vec<Atom> {
        self.atoms.into_iter().collect()
    }

    /// Removes atoms of total measure `tau` from the front, cutting the last one.
    pub fn take(&mut self, tree: &CellTree, tau: f64) -> Vec<Atom> {
        let mut out = Vec::new();
        let mut rem = tau;
        while rem > TAKE_TOL {
            let Some(front) = self.atoms.pop_front() else { break };
            let m = tree.atom_measure(&front);
            if m <= rem + TAKE_TOL {
                out.push(front);
                rem -= m;
                continue;
            }
            let cell = front.cell();
            let (lo, hi) = front.range();
            let s = tree.cut_param(cell, lo, rem);
            out.push(Atom::Piece { cell, lo, hi: s });
            self.atoms.push_front(Atom::Piece { cell, lo: s, hi });
            break;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Manifold, QuadratureGrid};

    #[test]
    fn cut_edge_cases() {
        let t = CellTree::new(&Manifold::torus(), 3).unwrap();
        let c = CellId::new(2, 5);
        assert_eq!(t.exact_cut(c, 0.0).unwrap(), Atom::Piece { cell: c, lo: 0.0, hi: 0.0 });
        assert_eq!(t.exact_cut(c, 1.0 / 16.0).unwrap(), Atom::Whole { cell: c });
        assert!(t.exact_cut(c, 0.1).is_err());
        assert!(t.exact_cut(c, -1e-3).is_err());
    }

    #[test]
    fn torus_half_strip_by_quadrature() {
        let t = CellTree::new(&Manifold::torus(), 3).unwrap();
        let c = CellId::new(2, 6);
        let piece = t.exact_cut(c, 1.0 / 32.0).unwrap();
        assert!((t.atom_measure(&piece) - 1.0 / 32.0).abs() < 1e-15);
        // midpoint rule on the indicator of the strip: exact for a grid aligned with the cell edges
        let g = QuadratureGrid::with_resolution(t.manifold(), 512);
        let (x0, y0, w) = t.square(c);
        let inside = |p: &ManifoldPoint| {
            let (x, y) = (p.chart[0] + std::f64::consts::PI / 512.0, p.chart[1] + std::f64::consts::PI / 512.0);
            (x >= x0 && x < x0 + 0.5 * w && y >= y0 && y < y0 + w) as u8 as f64
        };
        let q = g.integrate(inside).unwrap();
        assert!((q - 1.0 / 32.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_cuts_are_measure_exact() {
        let t = CellTree::new(&Manifold::sphere(), 4).unwrap();
        for idx in [0u64, 17, 100, 511] {
            let c = CellId::new(4, idx);
            let mu = t.measure(c);
            for frac in [0.1, 0.37, 0.5, 0.93] {
                let a = t.exact_cut(c, frac * mu).unwrap();
                assert!((t.atom_measure(&a) - frac * mu).abs() < 1e-15);
            }
            let mut prev = 0.0;
            for i in 0..=50 {
                let m = t.prefix_measure(c, i as f64 / 50.0);
                assert!(m >= prev);
                prev = m;
            }
            assert!((prev - mu).abs() < 1e-15);
        }
    }

    #[test]
    fn sweep_param_inverts_sampling() {
        for m in [Manifold::circle(), Manifold::torus(), Manifold::ellipse(2.0, 1.0).unwrap()] {
            let t = CellTree::new(&m, 3).unwrap();
            let c = CellId::new(3, 11);
            let atom = Atom::Whole { cell: c };
            for i in 1..10 {
                let u = i as f64 / 10.0;
                let p = t.atom_sample(&atom, u, 0.3);
                assert!((t.sweep_param(c, &p) - u).abs() < 1e-9, "{:?} {u}", m.id());
            }
        }
        let m = Manifold::sphere();
        let t = CellTree::new(&m, 3).unwrap();
        let c = CellId::new(3, 11);
        let [a, b, cc] = *t.triangle(c);
        for i in 1..10 {
            let u = i as f64 / 10.0;
            let q = slerp(&b, &cc, u);
            // anywhere on the fan ray from the first vertex
            let x = slerp(&a, &q, 0.6);
            assert!((t.sweep_param(c, &m.sphere_from_ambient(x)) - u).abs() < 1e-9);
        }
    }

    #[test]
    fn stream_take_conserves_measure() {
        let t = CellTree::new(&Manifold::sphere(), 3).unwrap();
        let mut s = Stream::default();
        s.extend((0..10).map(|i| Atom::Whole { cell: CellId::new(3, i) }));
        let total: f64 = (0..10).map(|i| t.measure(CellId::new(3, i))).sum();
        let mut got = 0.0;
        for tau in [0.003, 0.011, 0.0007, 0.02] {
            let part = s.take(&t, tau);
            let m: f64 = part.iter().map(|a| t.atom_measure(a)).sum();
            assert!((m - tau).abs() < 1e-15);
            got += m;
        }
        let rest: f64 = s.into_atoms().iter().map(|a| t.atom_measure(a)).sum();
        assert!((got + rest - total).abs() < 1e-15);
    }
}
