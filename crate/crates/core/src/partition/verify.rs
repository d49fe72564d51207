//! Independent checks of a built partition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{scale_in, scale_out, CellId, Partition};
use crate::geometry::Tangent;

const MEASURE_TOL: f64 = 1e-12;
const INNER_SAMPLES: usize = 16;
const ATOM_SAMPLES: usize = 4;

#[derive(Clone, Debug, Default, Serialize)]
pub struct PartitionReport {
    pub measure_ok: bool,
    pub max_measure_error: f64,
    pub sum_error: f64,
    pub band_ok: bool,
    pub disjoint_ok: bool,
    pub cover_ok: bool,
    pub inner_ok: bool,
    pub outer_ok: bool,
    pub c3: f64,
    pub c4: f64,
    pub failures: Vec<String>,
}

impl PartitionReport {
    pub fn passed(&self) -> bool {
        self.measure_ok && self.band_ok && self.disjoint_ok && self.cover_ok && self.inner_ok && self.outer_ok
    }
}

pub fn verify_partition(p: &Partition) -> PartitionReport {
    let tree = p.tree();
    let m = tree.manifold();
    let n = p.regions.len();
    let mut rep = PartitionReport {
        measure_ok: true,
        band_ok: true,
        disjoint_ok: true,
        cover_ok: true,
        inner_ok: true,
        outer_ok: true,
        ..Default::default()
    };
    let fail = |rep: &mut PartitionReport, msg: String| {
        if rep.failures.len() < 50 {
            rep.failures.push(msg);
        }
    };

    let mut total = 0.0;
    for (j, r) in p.regions.iter().enumerate() {
        let mu: f64 = r.atoms.iter().map(|a| tree.atom_measure(a)).sum();
        total += mu;
        let err = (mu - r.weight).abs();
        rep.max_measure_error = rep.max_measure_error.max(err);
        if err > MEASURE_TOL {
            rep.measure_ok = false;
            fail(&mut rep, format!("region {j}: measure {mu} vs weight {}", r.weight));
        }
        let nf = n as f64;
        if mu < p.a / nf * (1.0 - 1e-9) || mu > p.b / nf * (1.0 + 1e-9) {
            rep.band_ok = false;
            fail(&mut rep, format!("region {j}: measure {mu} outside [a/N, b/N]"));
        }
    }
    rep.sum_error = (total - 1.0).abs();
    if rep.sum_error > n as f64 * MEASURE_TOL {
        rep.measure_ok = false;
        fail(&mut rep, format!("total measure {total}"));
    }

    // sweep intervals per fine cell must tile [0, 1]
    let l = p.level_l;
    let mut spans: Vec<(u64, f64, f64, usize)> = Vec::new();
    for (j, r) in p.regions.iter().enumerate() {
        for a in &r.atoms {
            let c = a.cell();
            if c.level != l {
                rep.disjoint_ok = false;
                fail(&mut rep, format!("region {j}: atom at level {} instead of {l}", c.level));
                continue;
            }
            let (lo, hi) = a.range();
            spans.push((c.index, lo, hi, j));
        }
    }
    spans.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut it = spans.iter().peekable();
    for cell in 0..tree.count(l) {
        let mut reach = 0.0;
        let mut any = false;
        while let Some(&&(c, lo, hi, j)) = it.peek() {
            if c != cell {
                break;
            }
            it.next();
            any = true;
            if lo < reach - MEASURE_TOL {
                rep.disjoint_ok = false;
                fail(&mut rep, format!("cell {cell}: region {j} overlaps at {lo}"));
            } else if lo > reach + MEASURE_TOL {
                rep.cover_ok = false;
                fail(&mut rep, format!("cell {cell}: gap [{reach}, {lo}]"));
            }
            reach = reach.max(hi);
        }
        if !any || reach < 1.0 - MEASURE_TOL {
            rep.cover_ok = false;
            fail(&mut rep, format!("cell {cell}: covered only to {}", if any { reach } else { 0.0 }));
        }
    }

    // ball containment by sampling
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let d = m.dim();
    for (j, r) in p.regions.iter().enumerate() {
        let frame = m.tangent_frame(&r.representative);
        for _ in 0..INNER_SAMPLES {
            let rad = r.inner_radius * (1.0 - 1e-9) * rng.random::<f64>().powf(1.0 / d as f64);
            let v = if d == 1 {
                frame[0].scale(if rng.random::<bool>() { rad } else { -rad })
            } else {
                let th = rng.random_range(0.0..std::f64::consts::TAU);
                let mut v: Tangent = frame[0].scale(rad * th.cos());
                v.axpy(rad * th.sin(), &frame[1]);
                v
            };
            let q = m.retract(&r.representative, &v);
            if p.locate(&q) != Some(j) {
                rep.inner_ok = false;
                fail(&mut rep, format!("region {j}: inner-ball point lies in {:?}", p.locate(&q)));
                break;
            }
        }
        let radius = r.outer_radius * (1.0 + 1e-12) + 1e-15;
        'atoms: for a in &r.atoms {
            for _ in 0..ATOM_SAMPLES {
                let q = tree.atom_sample(a, rng.random(), rng.random());
                if m.distance_unchecked(&r.representative, &q) > radius {
                    rep.outer_ok = false;
                    fail(&mut rep, format!("region {j}: point of {:?} outside the outer ball", a.cell()));
                    break 'atoms;
                }
            }
        }
        let rep_cell: CellId = r.rep_cell;
        if !r.atoms.iter().any(|a| a.is_whole() && a.cell() == rep_cell) {
            rep.inner_ok = false;
            fail(&mut rep, format!("region {j}: representative cell is not whole"));
        }
    }

    let (sin, sout) = (scale_in(p.a, p.b, n, d), scale_out(p.b, n, d));
    rep.c3 = p.regions.iter().map(|r| r.inner_radius / sin).fold(f64::INFINITY, f64::min);
    rep.c4 = p.regions.iter().map(|r| r.outer_radius / sout).fold(0.0, f64::max);
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Manifold;
    use crate::partition::weighted_partition;
    use crate::weights::{gen_random_band, uniform};

    #[test]
    fn removing_a_cell_breaks_cover() {
        let w = gen_random_band(40, 0.5, 2.0, 3).unwrap();
        let p = weighted_partition(&Manifold::torus(), &w).unwrap();
        assert!(verify_partition(&p).passed());
        let j = (0..p.len()).find(|&j| p.regions[j].atoms.len() > 1).unwrap();
        let q = p.without_atom(j, 1);
        let rep = verify_partition(&q);
        assert!(!rep.cover_ok);
        assert!(!rep.measure_ok);
    }

    #[test]
    fn torus_constants_do_not_drift_with_n() {
        let mut c = Vec::new();
        for m in 2..=5 {
            let p = weighted_partition(&Manifold::torus(), &uniform(1 << (2 * m)).unwrap()).unwrap();
            let rep = verify_partition(&p);
            assert!(rep.passed(), "{rep:?}");
            c.push((rep.c3, rep.c4));
        }
        for &(c3, c4) in &c[1..] {
            assert!((c3 / c[0].0 - 1.0).abs() < 0.1 && (c4 / c[0].1 - 1.0).abs() < 0.1, "{c:?}");
        }
    }

    fn slope(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    }

    #[test]
    fn outer_radius_scaling_slopes() {
        let cases: [(Manifold, Vec<usize>, f64); 2] = [
            (Manifold::torus(), (3..=6).map(|m| 1usize << (2 * m)).collect(), -0.5),
            (Manifold::circle(), (4..=10).map(|m| 1usize << m).collect(), -1.0),
        ];
        for (m, ns, want) in cases {
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for &n in &ns {
                let w = gen_random_band(n, 0.5, 2.0, 42).unwrap();
                let p = weighted_partition(&m, &w).unwrap();
                let r = p.regions.iter().map(|r| r.outer_radius).fold(0.0, f64::max);
                xs.push((n as f64).ln());
                ys.push(r.ln());
            }
            let s = slope(&xs, &ys);
            assert!((s - want).abs() <= 0.15 * want.abs(), "{:?}: slope {s}", m.id());
        }
    }
}
