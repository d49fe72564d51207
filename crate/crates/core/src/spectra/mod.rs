//! Laplace–Beltrami eigenbases and the band-limited spaces they span.
//!
//! Every basis is orthonormal for the unit-mass measure and excludes the
//! constant. Elements are ordered by eigenvalue, ties broken by label.

mod harmonics;

use std::f64::consts::{SQRT_2, TAU};

use serde::Serialize;

pub use crate::geometry::arclength::{arclength_h, arclength_h_inverse};
use crate::error::{Error, Result};
use crate::geometry::{Manifold, ManifoldId, ManifoldKind, ManifoldPoint, Tangent};
use crate::space::{FunctionSpace, SpaceKind};
use harmonics::{complex_powers, normalization, real_harmonic, LegendreTable};

/// Mode labels. `sin = false` selects the cosine member of a pair; on the
/// sphere negative `m` selects the sine member.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ModeLabel {
    Trig { k: u32, sin: bool },
    Torus { k1: i32, k2: i32, sin: bool },
    Harmonic { l: u32, m: i32 },
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeLabel::Trig { k, sin } => write!(f, "{}({k})", if *sin { "sin" } else { "cos" }),
            ModeLabel::Torus { k1, k2, sin } => {
                write!(f, "{}({k1},{k2})", if *sin { "sin" } else { "cos" })
            }
            ModeLabel::Harmonic { l, m } => write!(f, "Y({l},{m})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigenpair {
    pub index: usize,
    /// Square root of the Laplacian eigenvalue.
    pub lambda: f64,
    pub label: ModeLabel,
    /// Integer ordering key (`k²`, `|k|²` or `l(l+1)`).
    key: u64,
    norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BasisEntry {
    pub index: usize,
    pub lambda: f64,
    pub label: String,
}

/// Diffusion polynomials of bandwidth `L` orthogonal to constants.
#[derive(Clone, Debug)]
pub struct SpectralSpace {
    manifold: Manifold,
    band: f64,
    pairs: Vec<Eigenpair>,
    kmax: usize,
}

/// Eigenvalues within this distance of the band edge are kept.
const BAND_TOL: f64 = 1e-12;

impl SpectralSpace {
    pub fn new(manifold: &Manifold, band: f64) -> Result<Self> {
        if !(band > 0.0 && band.is_finite()) {
            return Err(Error::InvalidBand(band));
        }
        let mut pairs: Vec<Eigenpair> = Vec::new();
        let mut push = |key: u64, lambda: f64, label: ModeLabel, norm: f64| {
            if lambda <= band + BAND_TOL {
                pairs.push(Eigenpair {
                    index: 0,
                    lambda,
                    label,
                    key,
                    norm,
                });
            }
        };
        let kmax;
        match manifold.id() {
            ManifoldId::Circle | ManifoldId::Ellipse { .. } => {
                let scale = TAU / manifold.period();
                kmax = ((band + BAND_TOL) / scale).floor() as usize;
                for k in 1..=kmax as u32 {
                    let lam = scale * k as f64;
                    push((k as u64).pow(2), lam, ModeLabel::Trig { k, sin: false }, SQRT_2);
                    push((k as u64).pow(2), lam, ModeLabel::Trig { k, sin: true }, SQRT_2);
                }
            }
            ManifoldId::Torus2 => {
                kmax = (band + BAND_TOL).floor() as usize;
                let km = kmax as i32;
                for k1 in 0..=km {
                    for k2 in -km..=km {
                        if k1 == 0 && k2 <= 0 {
                            continue;
                        }
                        let key = (k1 * k1 + k2 * k2) as u64;
                        let lam = (key as f64).sqrt();
                        push(key, lam, ModeLabel::Torus { k1, k2, sin: false }, SQRT_2);
                        push(key, lam, ModeLabel::Torus { k1, k2, sin: true }, SQRT_2);
                    }
                }
            }
            ManifoldId::Sphere2 => {
                let mut l = 1usize;
                loop {
                    let key = (l * (l + 1)) as u64;
                    let lam = (key as f64).sqrt();
                    if lam > band + BAND_TOL {
                        break;
                    }
                    for m in -(l as i32)..=(l as i32) {
                        let norm = normalization(l, m.unsigned_abs() as usize);
                        push(key, lam, ModeLabel::Harmonic { l: l as u32, m }, norm);
                    }
                    l += 1;
                }
                kmax = l - 1;
            }
        }
        pairs.sort_by(|a, b| a.key.cmp(&b.key).then(a.label.cmp(&b.label)));
        for (i, p) in pairs.iter_mut().enumerate() {
            p.index = i;
        }
        Ok(SpectralSpace {
            manifold: manifold.clone(),
            band,
            pairs,
            kmax,
        })
    }

    pub fn pairs(&self) -> &[Eigenpair] {
        &self.pairs
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    pub fn manifest(&self) -> Vec<BasisEntry> {
        self.pairs
            .iter()
            .map(|p| BasisEntry {
                index: p.index,
                lambda: p.lambda,
                label: p.label.to_string(),
            })
            .collect()
    }

    fn eval_impl(&self, x: &ManifoldPoint, vals: &mut [f64], mut grads: Option<&mut [Tangent]>) {
        match self.manifold.kind() {
            ManifoldKind::Circle | ManifoldKind::Ellipse => {
                let scale = TAU / self.manifold.period();
                let base = scale * x.intrinsic;
                for (i, p) in self.pairs.iter().enumerate() {
                    let ModeLabel::Trig { k, sin } = p.label else { unreachable!() };
                    let (s, c) = (k as f64 * base).sin_cos();
                    let w = p.lambda * p.norm;
                    if sin {
                        vals[i] = p.norm * s;
                        if let Some(g) = grads.as_deref_mut() {
                            g[i] = Tangent([w * c, 0.0, 0.0]);
                        }
                    } else {
                        vals[i] = p.norm * c;
                        if let Some(g) = grads.as_deref_mut() {
                            g[i] = Tangent([-w * s, 0.0, 0.0]);
                        }
                    }
                }
            }
            ManifoldKind::Torus2 => {
                let km = self.kmax;
                let e1 = multiples(x.chart[0], km);
                let e2 = multiples(x.chart[1], km);
                for (i, p) in self.pairs.iter().enumerate() {
                    let ModeLabel::Torus { k1, k2, sin } = p.label else { unreachable!() };
                    let (c1, s1) = e1[k1 as usize];
                    let (c2, s2) = {
                        let (c, s) = e2[k2.unsigned_abs() as usize];
                        if k2 < 0 {
                            (c, -s)
                        } else {
                            (c, s)
                        }
                    };
                    // angle addition for k·t
                    let c = c1 * c2 - s1 * s2;
                    let s = s1 * c2 + c1 * s2;
                    let (v, d) = if sin { (s, c) } else { (c, -s) };
                    vals[i] = p.norm * v;
                    if let Some(g) = grads.as_deref_mut() {
                        g[i] = Tangent([p.norm * d * k1 as f64, p.norm * d * k2 as f64, 0.0]);
                    }
                }
            }
            ManifoldKind::Sphere2 => {
                let [ax, ay, az] = x.ambient;
                let table = LegendreTable::new(self.kmax, az);
                let pow = complex_powers(ax, ay, self.kmax);
                for (i, p) in self.pairs.iter().enumerate() {
                    let ModeLabel::Harmonic { l, m } = p.label else { unreachable!() };
                    let (v, g) = real_harmonic(l as usize, m as i64, p.norm, &table, &pow);
                    vals[i] = v;
                    if let Some(gr) = grads.as_deref_mut() {
                        gr[i] = self.manifold.project_ambient_gradient(x, g);
                    }
                }
            }
        }
    }
}

/// `(cos kt, sin kt)` for `0 ≤ k ≤ kmax`.
fn multiples(t: f64, kmax: usize) -> Vec<(f64, f64)> {
    (0..=kmax)
        .map(|k| {
            let (s, c) = (k as f64 * t).sin_cos();
            (c, s)
        })
        .collect()
}

impl FunctionSpace for SpectralSpace {
    fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    fn dim(&self) -> usize {
        self.pairs.len()
    }

    fn kind(&self) -> SpaceKind {
        SpaceKind::Diffusion
    }

    fn band(&self) -> f64 {
        self.band
    }

    fn eval_into(&self, x: &ManifoldPoint, out: &mut [f64]) {
        self.eval_impl(x, out, None);
    }

    fn eval_grad_into(&self, x: &ManifoldPoint, vals: &mut [f64], grads: &mut [Tangent]) {
        self.eval_impl(x, vals, Some(grads));
    }
}

/// Enumerated basis of the band-`L` diffusion space on `id`.
pub fn enumerate_basis(id: ManifoldId, band: f64) -> Result<SpectralSpace> {
    SpectralSpace::new(&Manifold::new(id)?, band)
}
