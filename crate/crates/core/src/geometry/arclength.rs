//! Arc-length parametrization of the ellipse `(a cos t, b sin t)`.
//!
//! `h(t) = ∫₀ᵗ √(a² sin² s + b² cos² s) ds` is tabulated on a dense uniform
//! grid by composite Gauss–Legendre panels. Point queries add one short panel
//! to the nearest tabulated value, and the inverse uses bracketing plus Newton.

use std::f64::consts::TAU;

use super::quadrature::gauss_legendre;
use crate::error::{Error, Result};

const PANELS: usize = 2048;
const PANEL_ORDER: usize = 16;
const QUERY_ORDER: usize = 10;

#[derive(Clone, Debug)]
pub struct ArcLength {
    a: f64,
    b: f64,
    step: f64,
    table: Vec<f64>,
    panel_nodes: Vec<f64>,
    panel_weights: Vec<f64>,
    query_nodes: Vec<f64>,
    query_weights: Vec<f64>,
}

impl ArcLength {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidAxes { a, b });
        }
        let (panel_nodes, panel_weights) = gauss_legendre(PANEL_ORDER);
        let (query_nodes, query_weights) = gauss_legendre(QUERY_ORDER);
        let step = TAU / PANELS as f64;
        let mut arc = ArcLength {
            a,
            b,
            step,
            table: Vec::with_capacity(PANELS + 1),
            panel_nodes,
            panel_weights,
            query_nodes,
            query_weights,
        };
        let mut acc = 0.0;
        arc.table.push(0.0);
        for i in 0..PANELS {
            let lo = i as f64 * step;
            acc += arc.panel(lo, lo + step, true);
            arc.table.push(acc);
        }
        Ok(arc)
    }

    pub fn axes(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// `‖u̇(t)‖`, the speed of the angular parametrization.
    #[inline]
    pub fn speed(&self, t: f64) -> f64 {
        let (s, c) = t.sin_cos();
        (self.a * self.a * s * s + self.b * self.b * c * c).sqrt()
    }

    /// Total circumference `ℓ_{a,b}`.
    pub fn length(&self) -> f64 {
        self.table[PANELS]
    }

    fn panel(&self, lo: f64, hi: f64, fine: bool) -> f64 {
        let (nodes, weights) = if fine {
            (&self.panel_nodes, &self.panel_weights)
        } else {
            (&self.query_nodes, &self.query_weights)
        };
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        nodes
            .iter()
            .zip(weights)
            .map(|(x, w)| w * self.speed(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// `h(t)` for `t ∈ [0, 2π]`. No range check; callers reduce first.
    pub fn h_unchecked(&self, t: f64) -> f64 {
        let i = ((t / self.step) as usize).min(PANELS - 1);
        let lo = i as f64 * self.step;
        if t == lo {
            return self.table[i];
        }
        self.table[i] + self.panel(lo, t, false)
    }

    pub fn h(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::NonFinite("arclength parameter"));
        }
        if !(0.0..=TAU).contains(&t) {
            return Err(Error::OutOfRange { what: "t", value: t });
        }
        Ok(self.h_unchecked(t))
    }

    /// Unique `t ∈ [0, 2π]` with `h(t) = s`.
    pub fn h_inverse_unchecked(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.length());
        // table is strictly increasing
        let i = match self
            .table
            .binary_search_by(|v| v.partial_cmp(&s).expect("finite table"))
        {
            Ok(i) => return (i as f64 * self.step).min(TAU),
            Err(i) => i.saturating_sub(1).min(PANELS - 1),
        };
        let lo = i as f64 * self.step;
        let hi = lo + self.step;
        let frac = (s - self.table[i]) / (self.table[i + 1] - self.table[i]);
        let mut t = lo + frac * self.step;
        for _ in 0..8 {
            let f = self.table[i] + self.panel(lo, t, false) - s;
            let dt = f / self.speed(t);
            t = (t - dt).clamp(lo, hi);
            if dt.abs() < 1e-15 {
                break;
            }
        }
        t
    }

    pub fn h_inverse(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::NonFinite("arc length"));
        }
        let len = self.length();
        if s < -1e-12 || s > len + 1e-12 {
            return Err(Error::OutOfRange { what: "s", value: s });
        }
        Ok(self.h_inverse_unchecked(s))
    }
}

/// `h_{a,b}(t)`: arc length of the ellipse from angle 0 to `t`.
pub fn arclength_h(a: f64, b: f64, t: f64) -> Result<f64> {
    ArcLength::new(a, b)?.h(t)
}

/// Inverse of [`arclength_h`] on `[0, ℓ_{a,b}]`.
pub fn arclength_h_inverse(a: f64, b: f64, s: f64) -> Result<f64> {
    ArcLength::new(a, b)?.h_inverse(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Independent adaptive Simpson integrator used as the arc-length oracle.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    #[test]
    fn unit_circle_is_identity() {
        assert!((arclength_h(1.0, 1.0, 1.7).unwrap() - 1.7).abs() < 1e-12);
        assert!((arclength_h_inverse(1.0, 1.0, PI).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn zero_maps_to_zero() {
        for &(a, b) in &[(1.0, 1.0), (2.0, 1.0), (0.3, 5.0)] {
            assert_eq!(arclength_h(a, b, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn circumference_matches_simpson_oracle() {
        let oracle = adaptive_simpson(&|t: f64| (4.0 * t.sin().powi(2) + t.cos().powi(2)).sqrt(), 0.0, TAU, 1e-13);
        let arc = ArcLength::new(2.0, 1.0).unwrap();
        assert!((arc.length() - oracle).abs() < 1e-7, "{} vs {}", arc.length(), oracle);
        assert!((arc.length() - 9.688_448_2).abs() < 1e-7);
        // partial arcs against the oracle at absolute 1e-12
        for &t in &[0.3, 1.1, 2.9, 4.4, 6.0] {
            let o = adaptive_simpson(&|s: f64| arc.speed(s), 0.0, t, 1e-14);
            assert!((arc.h(t).unwrap() - o).abs() < 1e-11);
        }
    }

    #[test]
    fn half_length_maps_to_pi() {
        let arc = ArcLength::new(2.0, 1.0).unwrap();
        let t = arc.h_inverse(arc.length() / 2.0).unwrap();
        assert!((t - PI).abs() < 1e-12, "{t}");
    }

    #[test]
    fn inverse_roundtrip() {
        let arc = ArcLength::new(2.0, 0.7).unwrap();
        for i in 0..100 {
            let t = TAU * ((i as f64 * 0.618_033_988_75).fract());
            let back = arc.h_inverse(arc.h(t).unwrap()).unwrap();
            assert!((back - t).abs() < 1e-10, "{t} -> {back}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ArcLength::new(0.0, 1.0), Err(Error::InvalidAxes { .. })));
        assert!(matches!(ArcLength::new(1.0, -2.0), Err(Error::InvalidAxes { .. })));
        let arc = ArcLength::new(2.0, 1.0).unwrap();
        assert!(arc.h(7.0).is_err());
        assert!(arc.h_inverse(arc.length() + 1.0).is_err());
    }
}
