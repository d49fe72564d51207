//! Marcinkiewicz–Zygmund ratios for one-point-per-region sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ManifoldKind, ManifoldPoint, QuadratureGrid, Tangent};
use crate::partition::{weighted_partition, Partition};
use crate::space::{FunctionSpace, SpaceKind};
use crate::weights::gen_random_band;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MzMode {
    Value,
    Gradient,
}

/// Nodes per angle for the `∫|·|` reference integrals, which see kinks at zeros.
fn resolution(kind: ManifoldKind) -> usize {
    match kind {
        ManifoldKind::Circle | ManifoldKind::Ellipse => 8192,
        ManifoldKind::Torus2 => 384,
        ManifoldKind::Sphere2 => 256,
    }
}

/// Basis values and gradients cached on a fine grid.
pub struct MzIntegrator<'a> {
    space: &'a dyn FunctionSpace,
    qweights: Vec<f64>,
    vals: Vec<f64>,
    grads: Vec<Tangent>,
}

impl<'a> MzIntegrator<'a> {
    pub fn new(space: &'a dyn FunctionSpace) -> Self {
        let grid = QuadratureGrid::with_resolution(space.manifold(), resolution(space.manifold().kind()));
        let n = space.dim();
        let mut vals = vec![0.0; n * grid.len()];
        let mut grads = vec![Tangent::ZERO; n * grid.len()];
        for (i, x) in grid.nodes.iter().enumerate() {
            space.eval_grad_into(x, &mut vals[i * n..(i + 1) * n], &mut grads[i * n..(i + 1) * n]);
        }
        MzIntegrator {
            space,
            qweights: grid.qweights,
            vals,
            grads,
        }
    }

    /// `∫ |P| dμ` (value mode) or `∫ ‖∇P‖ dμ` (gradient mode).
    pub fn integral(&self, c: &[f64], mode: MzMode) -> f64 {
        let n = self.space.dim();
        let mut acc = 0.0;
        for (i, w) in self.qweights.iter().enumerate() {
            let f = match mode {
                MzMode::Value => self.vals[i * n..(i + 1) * n].iter().zip(c).map(|(v, c)| v * c).sum::<f64>().abs(),
                MzMode::Gradient => {
                    let mut g = Tangent::ZERO;
                    for (gk, ck) in self.grads[i * n..(i + 1) * n].iter().zip(c) {
                        g.axpy(*ck, gk);
                    }
                    g.norm()
                }
            };
            acc += w * f;
        }
        acc
    }

    pub fn ratio(&self, partition: &Partition, samples: &[ManifoldPoint], c: &[f64], mode: MzMode) -> Result<f64> {
        self.space.check_coeffs(c)?;
        if samples.len() != partition.len() {
            return Err(Error::Length(format!("{} samples for {} regions", samples.len(), partition.len())));
        }
        let exact = self.integral(c, mode);
        if !(exact > 0.0) {
            return Err(Error::OutOfRange { what: "∫|P|", value: exact });
        }
        let mut sum = 0.0;
        for (x, r) in samples.iter().zip(&partition.regions) {
            self.space.check_point(x)?;
            let f = match mode {
                MzMode::Value => self.space.eval_poly(c, x)?.abs(),
                MzMode::Gradient => self.space.grad_poly(c, x)?.norm(),
            };
            sum += r.measure * f;
        }
        Ok((exact - sum).abs() / exact)
    }
}

/// `|∫‖∇P‖ − Σ ω_j ‖∇P(x_j)‖| / ∫‖∇P‖` with `ω_j = μ(R_j)`.
pub fn mz_ratio_diffusion(space: &dyn FunctionSpace, partition: &Partition, samples: &[ManifoldPoint], c: &[f64]) -> Result<f64> {
    MzIntegrator::new(space).ratio(partition, samples, c, MzMode::Gradient)
}

/// Value or tangential-gradient ratio on a restricted polynomial space.
pub fn mz_ratio_algebraic(
    space: &dyn FunctionSpace,
    partition: &Partition,
    samples: &[ManifoldPoint],
    c: &[f64],
    mode: MzMode,
) -> Result<f64> {
    if space.kind() != SpaceKind::Algebraic {
        return Err(Error::Unsupported("algebraic ratio on a diffusion space".into()));
    }
    MzIntegrator::new(space).ratio(partition, samples, c, mode)
}

#[derive(Clone, Debug, Serialize)]
pub struct MzRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub fail_fraction: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MzSweep {
    pub mode: MzMode,
    pub a: f64,
    pub b: f64,
    pub trials: usize,
    pub rows: Vec<MzRow>,
    /// Smallest swept `N` from which every larger one has no ratio above 1/2.
    pub n_star: Option<usize>,
}

impl MzSweep {
    pub fn nonincreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].fail_fraction <= w[0].fail_fraction)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// For each `N`: random band weights, their partition, one random point per region,
/// and the fraction of `trials` Gaussian `P` whose ratio exceeds 1/2.
pub fn mz_sweep(space: &dyn FunctionSpace, ns: &[usize], a: f64, b: f64, trials: usize, seed: u64, mode: MzMode) -> Result<MzSweep> {
    let integ = MzIntegrator::new(space);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let polys: Vec<Vec<f64>> = (0..trials)
        .map(|_| (0..space.dim()).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let exact: Vec<f64> = polys.iter().map(|c| integ.integral(c, mode)).collect();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let w = gen_random_band(n, a, b, seed.wrapping_add(n as u64))?;
        let part = weighted_partition(space.manifold(), &w)?;
        let mut srng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        let samples: Vec<ManifoldPoint> = (0..n).map(|j| part.sample_in_region(j, &mut srng)).collect();
        // per-sample basis rows, reused for every P
        let dim = space.dim();
        let mut vals = vec![0.0; dim * n];
        let mut grads = vec![Tangent::ZERO; dim * n];
        for (j, x) in samples.iter().enumerate() {
            space.eval_grad_into(x, &mut vals[j * dim..(j + 1) * dim], &mut grads[j * dim..(j + 1) * dim]);
        }
        let mut fails = 0;
        let mut max_ratio: f64 = 0.0;
        for (c, &ex) in polys.iter().zip(&exact) {
            let mut sum = 0.0;
            for (j, r) in part.regions.iter().enumerate() {
                let f = match mode {
                    MzMode::Value => vals[j * dim..(j + 1) * dim].iter().zip(c).map(|(v, c)| v * c).sum::<f64>().abs(),
                    MzMode::Gradient => {
                        let mut g = Tangent::ZERO;
                        for (gk, ck) in grads[j * dim..(j + 1) * dim].iter().zip(c) {
                            g.axpy(*ck, gk);
                        }
                        g.norm()
                    }
                };
                sum += r.measure * f;
            }
            let ratio = (ex - sum).abs() / ex;
            max_ratio = max_ratio.max(ratio);
            if ratio > 0.5 {
                fails += 1;
            }
        }
        rows.push(MzRow {
            n,
            fail_fraction: fails as f64 / trials as f64,
            max_ratio,
        });
    }
    let mut n_star = None;
    for r in rows.iter().rev() {
        if r.fail_fraction == 0.0 {
            n_star = Some(r.n);
        } else {
            break;
        }
    }
    Ok(MzSweep {
        mode,
        a,
        b,
        trials,
        rows,
        n_star,
    })
}
