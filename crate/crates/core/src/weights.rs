//! Prescribed weight vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ ω = 1`.
pub const SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    values: Vec<f64>,
    /// Declared band; `a/N ≤ ω_j ≤ b/N`.
    pub a: f64,
    pub b: f64,
    /// Tightest band, `N·min ω` and `N·max ω`.
    pub fitted_a: f64,
    pub fitted_b: f64,
}

impl WeightVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Reorders the weights; the band is unchanged.
    pub fn permuted(&self, perm: &[usize]) -> WeightVector {
        WeightVector {
            values: perm.iter().map(|&i| self.values[i]).collect(),
            ..self.clone()
        }
    }
}

fn fitted(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    (n * lo, n * hi)
}

/// Checks positivity, the unit sum and the declared band.
pub fn validate(values: &[f64], a: f64, b: f64) -> Result<WeightVector> {
    if values.is_empty() {
        return Err(Error::InvalidWeights("empty weight vector".into()));
    }
    if values.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("weights"));
    }
    if let Some(w) = values.iter().find(|&&w| w <= 0.0) {
        return Err(Error::InvalidWeights(format!("non-positive weight {w}")));
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
    }
    if !(a > 0.0 && a <= 1.0 && b >= 1.0 && b.is_finite()) {
        return Err(Error::InvalidWeights(format!("band ({a}, {b}) needs 0 < a <= 1 <= b")));
    }
    let n = values.len() as f64;
    let slack = 1e-12;
    for (j, &w) in values.iter().enumerate() {
        if w < a / n * (1.0 - slack) || w > b / n * (1.0 + slack) {
            return Err(Error::InvalidWeights(format!(
                "weight {j} = {w} outside the band [{}, {}]",
                a / n,
                b / n
            )));
        }
    }
    let (fa, fb) = fitted(values);
    Ok(WeightVector {
        values: values.to_vec(),
        a,
        b,
        fitted_a: fa,
        fitted_b: fb,
    })
}

/// Validates with the fitted band as the declared band.
pub fn validate_fitted(values: &[f64]) -> Result<WeightVector> {
    if values.is_empty() {
        return Err(Error::InvalidWeights("empty weight vector".into()));
    }
    let (fa, fb) = fitted(values);
    validate(values, fa.clamp(f64::MIN_POSITIVE, 1.0), fb.max(1.0))
}

pub fn uniform(n: usize) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::InvalidWeights("N = 0".into()));
    }
    validate(&vec![1.0 / n as f64; n], 1.0, 1.0)
}

/// `ω₁ = N/(N+1)`, `ω_j = 1/((N+1)(N−1))` for `j ≥ 2`.
pub fn gen_adversarial_ex1(n: usize) -> Result<WeightVector> {
    if n < 2 {
        return Err(Error::InvalidWeights(format!("N = {n}, need at least 2")));
    }
    let nf = n as f64;
    let mut v = vec![1.0 / ((nf + 1.0) * (nf - 1.0)); n];
    v[0] = nf / (nf + 1.0);
    validate_fitted(&v)
}

/// Uniform draws in `[a/N, b/N]`, then clip and rescale until the sum is one.
pub fn gen_random_band(n: usize, a: f64, b: f64, seed: u64) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::InvalidWeights("N = 0".into()));
    }
    if !(a > 0.0 && a <= 1.0 && 1.0 <= b && b.is_finite()) {
        return Err(Error::InvalidWeights(format!("infeasible band ({a}, {b})")));
    }
    let nf = n as f64;
    if a == b {
        return validate(&vec![1.0 / nf; n], a, b);
    }
    let (lo, hi) = (a / nf, b / nf);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    for _ in 0..100 {
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() <= 1e-15 && v.iter().all(|&w| w >= lo && w <= hi) {
            break;
        }
        // spread the deficit over the weights that still have room
        let free: Vec<usize> = (0..n)
            .filter(|&j| if sum < 1.0 { v[j] < hi } else { v[j] > lo })
            .collect();
        let room: f64 = free.iter().map(|&j| if sum < 1.0 { hi - v[j] } else { v[j] - lo }).sum();
        if room <= 0.0 {
            break;
        }
        let t = ((1.0 - sum).abs() / room).min(1.0);
        for &j in &free {
            v[j] = if sum < 1.0 { v[j] + t * (hi - v[j]) } else { v[j] - t * (v[j] - lo) };
            v[j] = v[j].clamp(lo, hi);
        }
    }
    // final rounding fix on the largest-room weight
    let sum: f64 = v.iter().sum();
    let j = (0..n)
        .max_by(|&x, &y| (hi - v[x]).min(v[x] - lo).partial_cmp(&(hi - v[y]).min(v[y] - lo)).unwrap())
        .unwrap();
    v[j] = (v[j] + (1.0 - sum)).clamp(lo, hi);
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidWeights("clip-and-rescale did not converge".into()));
    }
    validate(&v, a, b)
}

/// Block aggregation of sorted weights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Blocks {
    /// Block masses `W_i`.
    pub masses: Vec<f64>,
    /// `index_map[j]` is the block of original weight `j`.
    pub index_map: Vec<usize>,
    /// Original indices in ascending weight order.
    pub order: Vec<usize>,
}

impl Blocks {
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Members of block `i` in ascending weight order.
    pub fn members(&self, i: usize) -> Vec<usize> {
        self.order.iter().copied().filter(|&j| self.index_map[j] == i).collect()
    }
}

/// Greedy prefix blocks: each is the shortest ascending run with mass at least `1/N`.
/// Zero weights are allowed here.
pub fn block_aggregate(values: &[f64]) -> Result<Blocks> {
    let n = values.len();
    if n == 0 {
        return Err(Error::InvalidWeights("empty weight vector".into()));
    }
    if values.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidWeights("weights must be finite and non-negative".into()));
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| values[x].partial_cmp(&values[y]).unwrap().then(x.cmp(&y)));
    let threshold = (1.0 / n as f64) * (1.0 - 1e-12);
    let mut masses = Vec::new();
    let mut index_map = vec![0usize; n];
    let mut acc = 0.0;
    let mut open = false;
    for &j in &order {
        index_map[j] = masses.len();
        acc += values[j];
        open = true;
        if acc >= threshold {
            masses.push(acc);
            acc = 0.0;
            open = false;
        }
    }
    if open {
        // a trailing run short of 1/N joins the previous block
        if let Some(last) = masses.last_mut() {
            *last += acc;
            let b = masses.len() - 1;
            for &j in order.iter().rev() {
                if index_map[j] == masses.len() {
                    index_map[j] = b;
                }
            }
        } else {
            masses.push(acc);
        }
    }
    Ok(Blocks {
        masses,
        index_map,
        order,
    })
}

/// `L^d Σ ω_j²`.
pub fn bgg_diagnostic(w: &WeightVector, band: f64, d: usize) -> f64 {
    band.powi(d as i32) * w.values().iter().map(|x| x * x).sum::<f64>()
}
