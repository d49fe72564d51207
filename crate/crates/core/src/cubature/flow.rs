//! The normalized gradient flow `ẏ = ∇P(y) / v_ε(‖∇P(y)‖)`.
//!
//! Flat manifolds are integrated in their unwrapped coordinates (arc length on
//! curves, the chart on the torus). The sphere is integrated in ambient
//! coordinates with the field evaluated at the radial projection, and each
//! step is projected back to the sphere.

use serde::Serialize;

use super::smooth::SmootherV;
use crate::error::{Error, Result};
use crate::geometry::{Manifold, ManifoldKind, ManifoldPoint, Tangent};
use crate::space::FunctionSpace;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowParams {
    pub eps: f64,
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    #[serde(skip)]
    pub endpoints: Vec<ManifoldPoint>,
    pub times: Vec<f64>,
    /// `Σ ω_j P(y_j(t))` at each of `times`.
    pub functional: Vec<f64>,
    pub eps: f64,
    pub steps: usize,
}

impl Trajectory {
    /// Largest decrease of the sampled functional between consecutive steps.
    pub fn max_drop(&self) -> f64 {
        self.functional.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

type State = [f64; 3];

fn to_state(p: &ManifoldPoint) -> State {
    match p.kind {
        ManifoldKind::Circle | ManifoldKind::Ellipse => [p.intrinsic, 0.0, 0.0],
        ManifoldKind::Torus2 => [p.chart[0], p.chart[1], 0.0],
        ManifoldKind::Sphere2 => p.ambient,
    }
}

fn from_state(m: &Manifold, s: &State) -> ManifoldPoint {
    match m.kind() {
        ManifoldKind::Circle | ManifoldKind::Ellipse => m.point_from_arclength(s[0]),
        ManifoldKind::Torus2 => m.torus_from_chart(s[0], s[1]),
        ManifoldKind::Sphere2 => m.sphere_from_ambient(*s),
    }
}

/// Evaluates `P` and `∇P` through one basis pass.
pub(crate) struct PolyEval<'a> {
    space: &'a dyn FunctionSpace,
    coeffs: &'a [f64],
    vals: Vec<f64>,
    grads: Vec<Tangent>,
}

impl<'a> PolyEval<'a> {
    pub fn new(space: &'a dyn FunctionSpace, coeffs: &'a [f64]) -> Self {
        let n = space.dim();
        PolyEval {
            space,
            coeffs,
            vals: vec![0.0; n],
            grads: vec![Tangent::ZERO; n],
        }
    }

    pub fn value_grad(&mut self, x: &ManifoldPoint) -> (f64, Tangent) {
        self.space.eval_grad_into(x, &mut self.vals, &mut self.grads);
        let mut v = 0.0;
        let mut g = Tangent::ZERO;
        for k in 0..self.coeffs.len() {
            v += self.coeffs[k] * self.vals[k];
            g.axpy(self.coeffs[k], &self.grads[k]);
        }
        (v, g)
    }

    pub fn value(&mut self, x: &ManifoldPoint) -> f64 {
        self.space.eval_into(x, &mut self.vals);
        self.coeffs.iter().zip(&self.vals).map(|(c, v)| c * v).sum()
    }
}

/// Default `ε`: `rel · ∫‖∇P‖ dμ` by the space's quadrature.
pub fn default_eps(space: &dyn FunctionSpace, coeffs: &[f64], rel: f64) -> Result<f64> {
    space.check_coeffs(coeffs)?;
    let mut pe = PolyEval::new(space, coeffs);
    let q = space.quadrature();
    let total = q.integrate(|x| pe.value_grad(x).1.norm())?;
    if !(total > 0.0) {
        return Err(Error::OutOfRange { what: "∫‖∇P‖", value: total });
    }
    Ok(rel * total)
}

/// Steps for horizon `T` with `h ≤ safety · ε / (λ_max G)`, where `G` bounds `‖∇P‖` on
/// the seeds and `λ_max G` stands in for the Hessian norm.
pub fn stiff_steps(
    space: &dyn FunctionSpace,
    coeffs: &[f64],
    seeds: &[ManifoldPoint],
    eps: f64,
    horizon: f64,
    min_steps: usize,
    max_steps: usize,
) -> usize {
    let mut pe = PolyEval::new(space, coeffs);
    let g = seeds.iter().map(|x| pe.value_grad(x).1.norm()).fold(0.0, f64::max).max(eps);
    let lam = space.band().max(1.0);
    let h = 0.5 * eps / (lam * g);
    ((horizon / h).ceil() as usize).clamp(min_steps.max(1), max_steps.max(1))
}

fn field(m: &Manifold, pe: &mut PolyEval, v: &SmootherV, s: &State) -> (f64, State) {
    let p = from_state(m, s);
    let (val, g) = pe.value_grad(&p);
    let speed = 1.0 / v.eval(g.norm());
    let u = g.scale(speed).0;
    match m.kind() {
        ManifoldKind::Circle | ManifoldKind::Ellipse => (val, [u[0], 0.0, 0.0]),
        ManifoldKind::Torus2 => (val, [u[0], u[1], 0.0]),
        ManifoldKind::Sphere2 => (val, u),
    }
}

/// RK4 on each trajectory with `steps` equal steps up to `horizon`.
pub fn flow_run(
    space: &dyn FunctionSpace,
    coeffs: &[f64],
    seeds: &[ManifoldPoint],
    weights: &[f64],
    params: &FlowParams,
) -> Result<Trajectory> {
    Ok(flow_run_snapshots(space, coeffs, seeds, weights, params, 0)?.0)
}

/// Configuration at time `t` along a trajectory.
pub type Snapshot = (f64, Vec<ManifoldPoint>);

/// As [`flow_run`], also keeping the configuration every `every` steps (0 for none).
pub fn flow_run_snapshots(
    space: &dyn FunctionSpace,
    coeffs: &[f64],
    seeds: &[ManifoldPoint],
    weights: &[f64],
    params: &FlowParams,
    every: usize,
) -> Result<(Trajectory, Vec<Snapshot>)> {
    space.check_coeffs(coeffs)?;
    if seeds.len() != weights.len() {
        return Err(Error::Length(format!("{} seeds but {} weights", seeds.len(), weights.len())));
    }
    seeds.iter().try_for_each(|p| space.check_point(p))?;
    if !(params.eps > 0.0 && params.horizon >= 0.0 && params.horizon.is_finite() && params.steps > 0) {
        return Err(Error::OutOfRange { what: "flow parameters", value: params.eps });
    }
    let m = space.manifold();
    let v = SmootherV::new(params.eps);
    let mut pe = PolyEval::new(space, coeffs);
    let h = params.horizon / params.steps as f64;
    let mut states: Vec<State> = seeds.iter().map(to_state).collect();
    let mut times = Vec::with_capacity(params.steps + 1);
    let mut functional = Vec::with_capacity(params.steps + 1);
    let axpy = |s: &State, a: f64, k: &State| [s[0] + a * k[0], s[1] + a * k[1], s[2] + a * k[2]];
    let mut snaps = Vec::new();
    for step in 0..params.steps {
        if every > 0 && step > 0 && step % every == 0 {
            snaps.push((step as f64 * h, states.iter().map(|s| from_state(m, s)).collect()));
        }
        let mut f = 0.0;
        for (s, &w) in states.iter_mut().zip(weights) {
            let (val, k1) = field(m, &mut pe, &v, s);
            f += w * val;
            let (_, k2) = field(m, &mut pe, &v, &axpy(s, 0.5 * h, &k1));
            let (_, k3) = field(m, &mut pe, &v, &axpy(s, 0.5 * h, &k2));
            let (_, k4) = field(m, &mut pe, &v, &axpy(s, h, &k3));
            let mut next = [0.0; 3];
            for i in 0..3 {
                next[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            *s = to_state(&from_state(m, &next));
        }
        times.push(step as f64 * h);
        functional.push(f);
    }
    let endpoints: Vec<ManifoldPoint> = states.iter().map(|s| from_state(m, s)).collect();
    times.push(params.horizon);
    functional.push(endpoints.iter().zip(weights).map(|(p, w)| w * pe.value(p)).sum());
    Ok((
        Trajectory {
            endpoints,
            times,
            functional,
            eps: params.eps,
            steps: params.steps,
        },
        snaps,
    ))
}
