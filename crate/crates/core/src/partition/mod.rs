//! Weighted area partitions.
//!
//! Region `j` gets measure `ω_j` exactly. On the main branch the weights are
//! distributed over a spanning tree of coarse cells (level `k`), from the
//! leaves to the root, with each node passing the measure it could not fill
//! up to its parent. The geometry is then realized at a fine level `l`: a
//! region owns one seed cell plus atoms drawn from a stream of its node's
//! leftover cells and its children's remainders.

mod cells;
mod sweep;
mod verify;

use rand::Rng;
use serde::Serialize;

pub use cells::{build_cell_tree, depth_limit, CellId, CellTree, LevelBounds, SpanningTree, DELTA, MAX_DEPTH};
pub use sweep::{Atom, TAKE_TOL};
pub use verify::{verify_partition, PartitionReport};

use crate::error::{Error, Result};
use crate::geometry::{Manifold, ManifoldId, ManifoldKind, ManifoldPoint};
use crate::weights::WeightVector;
use sweep::Stream;

/// Slack in the greedy fit `Σ ω ≤ M_α`.
const FIT_TOL: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Main,
    SmallN,
}

#[derive(Clone, Debug, Serialize)]
pub struct Region {
    pub weight: f64,
    pub measure: f64,
    pub atoms: Vec<Atom>,
    #[serde(serialize_with = "ser_point")]
    pub representative: ManifoldPoint,
    pub rep_cell: CellId,
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// Level-`k` node that placed the region (main branch).
    pub node: Option<u64>,
}

fn ser_point<S: serde::Serializer>(p: &ManifoldPoint, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("Point", 2)?;
    st.serialize_field("chart", p.chart_slice())?;
    st.serialize_field("ambient", &p.ambient)?;
    st.end()
}

#[derive(Clone, Debug, Serialize)]
pub struct Partition {
    pub manifold: ManifoldId,
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub c3: f64,
    pub c4: f64,
    pub delta: f64,
    pub branch: Branch,
    pub level_k: u32,
    pub level_l: u32,
    pub bounds_k: LevelBounds,
    pub bounds_l: LevelBounds,
    /// Largest `|processed weights + open remainders − processed measure|`.
    pub bookkeeping_error: f64,
    pub regions: Vec<Region>,
    #[serde(skip)]
    tree: CellTree,
    /// `(fine cell, lo, hi, region)` sorted by cell then `lo`.
    #[serde(skip)]
    index: Vec<(u64, f64, f64, usize)>,
}

impl Partition {
    pub fn tree(&self) -> &CellTree {
        &self.tree
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn measures(&self) -> Vec<f64> {
        self.regions.iter().map(|r| r.measure).collect()
    }

    pub fn representatives(&self) -> Vec<ManifoldPoint> {
        self.regions.iter().map(|r| r.representative).collect()
    }

    /// Region containing `p`; boundary points go to the piece found first.
    pub fn locate(&self, p: &ManifoldPoint) -> Option<usize> {
        let cell = self.tree.locate_cell(p, self.level_l);
        let s = self.tree.sweep_param(cell, p);
        let start = self.index.partition_point(|e| e.0 < cell.index);
        let mut best = None;
        let mut gap = f64::INFINITY;
        for e in self.index[start..].iter().take_while(|e| e.0 == cell.index) {
            if s >= e.1 && s <= e.2 {
                return Some(e.3);
            }
            let g = (e.1 - s).max(s - e.2);
            if g < gap {
                gap = g;
                best = Some(e.3);
            }
        }
        best.filter(|_| gap < 1e-12)
    }

    /// A point of region `j`: an atom drawn by measure, then a uniform local coordinate.
    pub fn sample_in_region<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> ManifoldPoint {
        let r = &self.regions[j];
        let mut u = rng.random::<f64>() * r.measure;
        for a in &r.atoms {
            let m = self.tree.atom_measure(a);
            if u <= m {
                return self.tree.atom_sample(a, rng.random(), rng.random());
            }
            u -= m;
        }
        let last = r.atoms.last().expect("regions are never empty");
        self.tree.atom_sample(last, rng.random(), rng.random())
    }

    fn rebuild_index(&mut self) {
        self.index.clear();
        for (j, r) in self.regions.iter().enumerate() {
            for a in &r.atoms {
                let (lo, hi) = a.range();
                self.index.push((a.cell().index, lo, hi, j));
            }
        }
        self.index.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    }

    /// Copy with region `j`'s atom `i` deleted (for exercising the verifier).
    pub fn without_atom(&self, j: usize, i: usize) -> Partition {
        let mut p = self.clone();
        p.regions[j].atoms.remove(i);
        p.rebuild_index();
        p
    }
}

fn scale_in(a: f64, b: f64, n: usize, d: usize) -> f64 {
    (a * a / b).powf(1.0 / d as f64) * (n as f64).powf(-1.0 / d as f64)
}

fn scale_out(b: f64, n: usize, d: usize) -> f64 {
    b.powf(1.0 / d as f64) * (n as f64).powf(-1.0 / d as f64)
}

/// Whether the small-N branch runs: `N ≤ 2b / (c₁ δ^d diam^d)`.
pub fn small_n_branch(m: &Manifold, n: usize, b: f64) -> bool {
    let d = m.dim() as i32;
    let c1 = m.doubling().c1;
    (n as f64) <= 2.0 * b / (c1 * DELTA.powi(d) * m.diameter().powi(d))
}

/// Coarsest level whose largest cell fits in `mu` (deepening the tree as needed).
fn level_fitting(tree: &mut CellTree, mu: f64, from: u32) -> Result<u32> {
    let mut l = from;
    loop {
        if l > tree.depth() {
            tree.deepen(l)?;
        }
        if tree.max_measure(l) <= mu {
            return Ok(l);
        }
        l += 1;
    }
}

pub fn weighted_partition(manifold: &Manifold, weights: &WeightVector) -> Result<Partition> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::InvalidWeights("N = 0".into()));
    }
    let omega = weights.values();
    let mut tree = CellTree::new(manifold, 1)?;
    let (branch, level_k, level_l, bookkeeping, mut regions) = if small_n_branch(manifold, n, weights.b) {
        let (k, regions) = small_n(&mut tree, omega)?;
        (Branch::SmallN, k, k, 0.0, regions)
    } else {
        let (k, l, err, regions) = main_branch(&mut tree, omega, weights.b)?;
        (Branch::Main, k, l, err, regions)
    };
    for (r, &w) in regions.iter_mut().zip(omega) {
        r.weight = w;
    }
    finish_regions(&tree, &mut regions);
    let d = manifold.dim();
    let (sin, sout) = (scale_in(weights.a, weights.b, n, d), scale_out(weights.b, n, d));
    let c3 = regions.iter().map(|r| r.inner_radius / sin).fold(f64::INFINITY, f64::min);
    let c4 = regions.iter().map(|r| r.outer_radius / sout).fold(0.0, f64::max);
    let mut p = Partition {
        manifold: manifold.id(),
        n,
        a: weights.a,
        b: weights.b,
        c3,
        c4,
        delta: DELTA,
        branch,
        level_k,
        level_l,
        bounds_k: tree.level_bounds(level_k),
        bounds_l: tree.level_bounds(level_l),
        bookkeeping_error: bookkeeping,
        regions,
        tree,
        index: Vec::new(),
    };
    p.rebuild_index();
    Ok(p)
}

fn empty_region(seed: CellId, node: Option<u64>) -> Region {
    Region {
        weight: 0.0,
        measure: 0.0,
        atoms: vec![Atom::Whole { cell: seed }],
        representative: ManifoldPoint {
            kind: ManifoldKind::Circle,
            chart: [0.0; 2],
            ambient: [0.0; 3],
            intrinsic: 0.0,
        },
        rep_cell: seed,
        inner_radius: 0.0,
        outer_radius: 0.0,
        node,
    }
}

/// Any `N` distinct cells of the coarsest level whose cells all fit in `min ω`, each
/// grown from a stream of the remaining cells.
fn small_n(tree: &mut CellTree, omega: &[f64]) -> Result<(u32, Vec<Region>)> {
    let n = omega.len();
    let wmin = omega.iter().copied().fold(f64::INFINITY, f64::min);
    let mut k = level_fitting(tree, wmin, 0)?;
    while tree.count(k) < n as u64 {
        k += 1;
        tree.deepen(k)?;
    }
    let cells = tree.count(k);
    let seeds: Vec<u64> = (0..n as u64).map(|j| j * cells / n as u64).collect();
    let mut stream = Stream::default();
    let mut si = 0;
    for i in 0..cells {
        if si < n && seeds[si] == i {
            si += 1;
        } else {
            stream.push(Atom::Whole { cell: CellId::new(k, i) });
        }
    }
    let mut regions = Vec::with_capacity(n);
    for (j, &w) in omega.iter().enumerate() {
        let seed = CellId::new(k, seeds[j]);
        let mut r = empty_region(seed, None);
        r.atoms.extend(stream.take(tree, w - tree.measure(seed)));
        regions.push(r);
    }
    if let Some(last) = regions.last_mut() {
        last.atoms.extend(stream.into_atoms());
    }
    Ok((k, regions))
}

fn main_branch(tree: &mut CellTree, omega: &[f64], b: f64) -> Result<(u32, u32, f64, Vec<Region>)> {
    let n = omega.len();
    let target = 2.0 * b / n as f64;
    // finest level whose cells all carry at least 2b/N
    let mut k = 0;
    loop {
        let next = k + 1;
        if next > depth_limit(tree.manifold().kind()) {
            break;
        }
        tree.deepen(next)?;
        if tree.min_measure(next) < target {
            break;
        }
        k = next;
    }
    let st = tree.spanning_tree(k)?;
    let nodes = st.len();

    // leaves-to-root weight selection
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut selected: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut rem_w = vec![0.0; nodes];
    let (mut done_mu, mut done_w, mut open) = (0.0, 0.0, 0.0);
    let mut bookkeeping: f64 = 0.0;
    for (pos, &u) in st.order.iter().enumerate().rev() {
        let cell = CellId::new(k, u);
        let mu = tree.measure(cell);
        let kids: f64 = st.children[u as usize].iter().map(|&c| rem_w[c as usize]).sum();
        let budget = mu + kids;
        let mut sum = 0.0;
        if pos == 0 {
            sum = remaining.iter().map(|&j| omega[j]).sum();
            selected[u as usize] = std::mem::take(&mut remaining);
            if (sum - budget).abs() > 1e-9 {
                return Err(Error::CellTree(format!(
                    "root remainder {} does not vanish",
                    budget - sum
                )));
            }
        } else {
            let mut keep = Vec::with_capacity(remaining.len());
            for &j in &remaining {
                if sum + omega[j] <= budget + FIT_TOL {
                    sum += omega[j];
                    selected[u as usize].push(j);
                } else {
                    keep.push(j);
                }
            }
            remaining = keep;
            rem_w[u as usize] = (budget - sum).max(0.0);
        }
        done_mu += mu;
        done_w += sum;
        open += rem_w[u as usize] - kids;
        bookkeeping = bookkeeping.max((done_w + open - done_mu).abs());
    }

    // fine level: seed cells fit in every weight and leave room for the remainders
    let wmin = omega.iter().copied().fold(f64::INFINITY, f64::min);
    let lmin = if tree.manifold().kind() == ManifoldKind::Sphere2 { k.max(1) } else { k };
    let mut l = level_fitting(tree, wmin, lmin)?;
    loop {
        let fine = tree.max_measure(l);
        let ok = st.order.iter().all(|&u| {
            let cell = CellId::new(k, u);
            let na = selected[u as usize].len();
            let cap = tree.descendants(cell, l);
            (na as u64) <= cap.end - cap.start
                && na as f64 * fine + rem_w[u as usize] <= tree.measure(cell) * (1.0 + 1e-12)
        });
        if ok {
            break;
        }
        l += 1;
        tree.deepen(l)?;
    }

    let mut regions: Vec<Option<Region>> = vec![None; n];
    let mut leftovers: Vec<Vec<Atom>> = vec![Vec::new(); nodes];
    let mut last_region = None;
    for &u in st.order.iter().rev() {
        let cell = CellId::new(k, u);
        let fine = tree.descendants(cell, l);
        let f = fine.end - fine.start;
        let sel = &selected[u as usize];
        let na = sel.len() as u64;
        let seeds: Vec<u64> = (0..na).map(|i| fine.start + (2 * i + 1) * f / (2 * na)).collect();
        let mut stream = Stream::default();
        for &c in &st.children[u as usize] {
            stream.extend(std::mem::take(&mut leftovers[c as usize]));
        }
        let mut si = 0;
        for i in fine {
            if si < seeds.len() && seeds[si] == i {
                si += 1;
            } else {
                stream.push(Atom::Whole { cell: CellId::new(l, i) });
            }
        }
        for (&j, &s) in sel.iter().zip(&seeds) {
            let seed = CellId::new(l, s);
            let mut r = empty_region(seed, Some(u));
            r.atoms.extend(stream.take(tree, omega[j] - tree.measure(seed)));
            regions[j] = Some(r);
            last_region = Some(j);
        }
        leftovers[u as usize] = stream.into_atoms();
    }
    let root = st.order[0] as usize;
    let rest = std::mem::take(&mut leftovers[root]);
    if !rest.is_empty() {
        let j = last_region.ok_or_else(|| Error::CellTree("no region received a weight".into()))?;
        regions[j].as_mut().expect("placed").atoms.extend(rest);
    }
    let regions = regions
        .into_iter()
        .enumerate()
        .map(|(j, r)| r.ok_or_else(|| Error::CellTree(format!("weight {j} was never placed"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((k, l, bookkeeping, regions))
}

fn finish_regions(tree: &CellTree, regions: &mut [Region]) {
    for r in regions {
        r.atoms.retain(|a| a.is_whole() || a.range().1 > a.range().0);
        let mut measure = 0.0;
        let mut comp = 0.0;
        for a in &r.atoms {
            // Neumaier summation keeps long atom lists exact to rounding
            let x = tree.atom_measure(a);
            let t = measure + x;
            comp += if f64::abs(measure) >= x.abs() { (measure - t) + x } else { (x - t) + measure };
            measure = t;
        }
        r.measure = measure + comp;
        let mut best = r.atoms[0].cell();
        for a in &r.atoms {
            if a.is_whole() && tree.measure(a.cell()) > tree.measure(best) {
                best = a.cell();
            }
        }
        r.rep_cell = best;
        r.representative = tree.center(best);
        r.inner_radius = tree.inradius(best);
        r.outer_radius = r
            .atoms
            .iter()
            .map(|a| tree.atom_max_distance(&r.representative, a))
            .fold(0.0, f64::max);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{gen_random_band, uniform, validate};
    use std::f64::consts::PI;

    #[test]
    fn circle_two_arcs() {
        let m = Manifold::circle();
        let w = validate(&[0.3, 0.7], 0.6, 1.4).unwrap();
        let p = weighted_partition(&m, &w).unwrap();
        assert_eq!(p.branch, Branch::SmallN);
        assert!((p.regions[0].measure - 0.3).abs() < 1e-12);
        assert!((p.regions[1].measure - 0.7).abs() < 1e-12);
        // arc lengths 0.6π and 1.4π
        assert!((p.regions[0].measure * 2.0 * PI - 0.6 * PI).abs() < 1e-12);
        assert!(verify_partition(&p).passed());
    }

    #[test]
    fn torus_equal_quadrants() {
        let p = weighted_partition(&Manifold::torus(), &uniform(4).unwrap()).unwrap();
        for r in &p.regions {
            assert!((r.measure - 0.25).abs() < 1e-15);
        }
        assert!(verify_partition(&p).passed());
    }

    #[test]
    fn torus_three_regions() {
        let w = validate(&[0.5, 0.25, 0.25], 0.75, 1.5).unwrap();
        let p = weighted_partition(&Manifold::torus(), &w).unwrap();
        for (r, &w) in p.regions.iter().zip(w.values()) {
            assert!((r.measure - w).abs() < 1e-12);
        }
        let rep = verify_partition(&p);
        assert!(rep.passed(), "{rep:?}");
        assert!(p.c3 > 0.0 && p.c4.is_finite());
    }

    #[test]
    fn main_branch_on_every_manifold() {
        for m in [Manifold::circle(), Manifold::torus(), Manifold::sphere(), Manifold::ellipse(2.0, 1.0).unwrap()] {
            let w = gen_random_band(200, 0.5, 2.0, 7).unwrap();
            let p = weighted_partition(&m, &w).unwrap();
            assert_eq!(p.branch, Branch::Main, "{:?}", m.id());
            assert!(p.bookkeeping_error < 1e-12);
            assert!(p.bounds_k.min_measure >= 2.0 * w.b / 200.0);
            let rep = verify_partition(&p);
            assert!(rep.passed(), "{:?} {rep:?}", m.id());
        }
    }

    #[test]
    fn locate_hits_representatives() {
        let w = gen_random_band(64, 0.5, 2.0, 1).unwrap();
        let p = weighted_partition(&Manifold::sphere(), &w).unwrap();
        for (j, r) in p.regions.iter().enumerate() {
            assert_eq!(p.locate(&r.representative), Some(j));
        }
    }

    #[test]
    fn serializes_to_json() {
        let p = weighted_partition(&Manifold::circle(), &uniform(8).unwrap()).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["n"], 8);
        assert_eq!(v["regions"].as_array().unwrap().len(), 8);
        assert!(v["regions"][0]["representative"]["chart"].is_array());
    }
}
