//! The cutoff `H` and the smoother `v_ε`.

use std::sync::OnceLock;

use crate::geometry::quadrature::gauss_legendre;

fn g(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `x ≤ 0`, 1 for `x ≥ 1`, flat to all orders at both ends.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let (a, b) = (g(x), g(1.0 - x));
        a / (a + b)
    }
}

/// `H(u) = g(2−|u|) / (g(2−|u|) + g(|u|−1))`: 1 on `[−1, 1]`, 0 outside `(−2, 2)`.
pub fn cutoff_h(u: f64) -> f64 {
    let a = u.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let (p, q) = (g(2.0 - a), g(a - 1.0));
        p / (p + q)
    }
}

const PANELS: usize = 256;

/// Exponent `p` with `∫₀¹ step(σ^p) dσ = 2/3`, and the running integral on panel edges.
struct Ramp {
    p: f64,
    edges: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
}

fn panel_integral(f: &dyn Fn(f64) -> f64, a: f64, b: f64, gl: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (h, m) = (0.5 * (b - a), 0.5 * (a + b));
    gl.0.iter().zip(&gl.1).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

fn ramp() -> &'static Ramp {
    static R: OnceLock<Ramp> = OnceLock::new();
    R.get_or_init(|| {
        let gl = gauss_legendre(16);
        let total = |p: f64| {
            let f = |s: f64| smooth_step(s.powf(p));
            (0..PANELS)
                .map(|i| panel_integral(&f, i as f64 / PANELS as f64, (i + 1) as f64 / PANELS as f64, &gl))
                .sum::<f64>()
        };
        // the mean of step(σ^p) falls as p grows; p = 1 gives 1/2
        let (mut lo, mut hi) = (0.05, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if total(mid) > 2.0 / 3.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = 0.5 * (lo + hi);
        let f = |s: f64| smooth_step(s.powf(p));
        let mut edges = Vec::with_capacity(PANELS + 1);
        let mut acc = 0.0;
        edges.push(0.0);
        for i in 0..PANELS {
            acc += panel_integral(&f, i as f64 / PANELS as f64, (i + 1) as f64 / PANELS as f64, &gl);
            edges.push(acc);
        }
        Ramp { p, edges, gl }
    })
}

/// `I(t) = ∫₀ᵗ step(σ^p) dσ`, `I(1) = 2/3` up to rounding.
fn ramp_integral(t: f64) -> f64 {
    let r = ramp();
    let t = t.clamp(0.0, 1.0);
    let i = ((t * PANELS as f64) as usize).min(PANELS - 1);
    let a = i as f64 / PANELS as f64;
    let f = |s: f64| smooth_step(s.powf(r.p));
    r.edges[i] + panel_integral(&f, a, t, &r.gl)
}

/// `v_ε`: `ε/2` on `[0, ε/4]`, the identity on `[ε, ∞)`, smooth and nondecreasing,
/// with `v_ε(u) ≥ u`. On the ramp `v_ε' = step(t^p)` with `t = (u − ε/4)/(3ε/4)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmootherV {
    pub eps: f64,
}

impl SmootherV {
    pub fn new(eps: f64) -> Self {
        assert!(eps > 0.0 && eps.is_finite(), "smoother needs ε > 0");
        SmootherV { eps }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let e = self.eps;
        if u >= e {
            u
        } else if u <= 0.25 * e {
            0.5 * e
        } else {
            let t = (u - 0.25 * e) / (0.75 * e);
            // rescaled so the ramp lands on v(ε) = ε; the max only guards the last ulp
            (0.5 * e + 0.75 * e * ramp_integral(t) * (2.0 / 3.0) / ramp().edges[PANELS]).max(u)
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        let e = self.eps;
        if u >= e {
            1.0
        } else if u <= 0.25 * e {
            0.0
        } else {
            smooth_step(((u - 0.25 * e) / (0.75 * e)).powf(ramp().p)) * (2.0 / 3.0) / ramp().edges[PANELS]
        }
    }

    /// `T(u) = u² / v_ε(u)`, the speed of the normalized field.
    pub fn field_speed(&self, u: f64) -> f64 {
        u * u / self.eval(u)
    }
}
