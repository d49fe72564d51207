//! Nested cell families with ratio δ = 1/2.
//!
//! Level 0 is the whole manifold. On 1-d manifolds level `k` has `2^k` arcs of
//! equal arc length; on the torus `4^k` squares in Morton order; on the sphere
//! level 1 holds the eight octants and every further level splits each
//! spherical triangle at its edge midpoints. Children of a cell are always
//! contiguous in the next level, so descendants form an index range.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::{PI, TAU};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cross3, dot3, fold_angle, normalize3, sphere_angle, Manifold, ManifoldKind, ManifoldPoint};

pub const DELTA: f64 = 0.5;

/// Finest level the tree will build; keeps cell counts in memory.
pub const MAX_DEPTH: u32 = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub level: u32,
    pub index: u64,
}

impl CellId {
    pub fn new(level: u32, index: u64) -> Self {
        CellId { level, index }
    }
}

/// Deepest level for each manifold; sphere triangles are stored explicitly.
pub fn depth_limit(kind: ManifoldKind) -> u32 {
    match kind {
        ManifoldKind::Circle | ManifoldKind::Ellipse => MAX_DEPTH,
        ManifoldKind::Torus2 => MAX_DEPTH / 2,
        ManifoldKind::Sphere2 => 10,
    }
}

pub(crate) type Tri = [[f64; 3]; 3];

/// Normalized area of a spherical triangle.
pub(crate) fn triangle_area(t: &Tri) -> f64 {
    let [a, b, c] = t;
    let num = dot3(a, &cross3(b, c)).abs();
    let den = 1.0 + dot3(a, b) + dot3(b, c) + dot3(c, a);
    2.0 * num.atan2(den) / (4.0 * PI)
}

fn midpoint(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    normalize3([a[0] + b[0], a[1] + b[1], a[2] + b[2]])
}

/// Signed margin of `p` against the three edge planes (positive inside).
pub(crate) fn triangle_margin(t: &Tri, p: &[f64; 3]) -> f64 {
    let mut m = f64::INFINITY;
    for e in 0..3 {
        let n = cross3(&t[e], &t[(e + 1) % 3]);
        m = m.min(dot3(&n, p) / dot3(&n, &n).sqrt());
    }
    m
}

pub(crate) fn morton_encode(ix: u64, iy: u64) -> u64 {
    fn spread(mut v: u64) -> u64 {
        v &= 0xFFFF_FFFF;
        v = (v | (v << 16)) & 0x0000_FFFF_0000_FFFF;
        v = (v | (v << 8)) & 0x00FF_00FF_00FF_00FF;
        v = (v | (v << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
        v = (v | (v << 2)) & 0x3333_3333_3333_3333;
        v = (v | (v << 1)) & 0x5555_5555_5555_5555;
        v
    }
    spread(ix) | (spread(iy) << 1)
}

pub(crate) fn morton_decode(i: u64) -> (u64, u64) {
    fn compact(mut v: u64) -> u64 {
        v &= 0x5555_5555_5555_5555;
        v = (v | (v >> 1)) & 0x3333_3333_3333_3333;
        v = (v | (v >> 2)) & 0x0F0F_0F0F_0F0F_0F0F;
        v = (v | (v >> 4)) & 0x00FF_00FF_00FF_00FF;
        v = (v | (v >> 8)) & 0x0000_FFFF_0000_FFFF;
        v = (v | (v >> 16)) & 0x0000_0000_FFFF_FFFF;
        v
    }
    (compact(i), compact(i >> 1))
}

/// Cell family on one of the model manifolds.
#[derive(Clone, Debug)]
pub struct CellTree {
    manifold: Manifold,
    depth: u32,
    /// Sphere only: triangles and areas per level (index 0 unused).
    tris: Vec<Vec<Tri>>,
    areas: Vec<Vec<f64>>,
}

/// Per-level sandwich constants `u₁ = min r_in / δ^k`, `u₂ = max r_out / δ^k`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LevelBounds {
    pub level: u32,
    pub cells: u64,
    pub u1: f64,
    pub u2: f64,
    pub min_measure: f64,
    pub max_measure: f64,
}

impl CellTree {
    pub fn new(manifold: &Manifold, depth: u32) -> Result<Self> {
        if depth == 0 {
            return Err(Error::CellTree("depth must be at least 1".into()));
        }
        if depth > depth_limit(manifold.kind()) {
            return Err(Error::CellTree(format!("depth {depth} is too fine")));
        }
        let mut tree = CellTree {
            manifold: manifold.clone(),
            depth: 1,
            tris: vec![Vec::new()],
            areas: vec![vec![1.0]],
        };
        if manifold.kind() == ManifoldKind::Sphere2 {
            let mut oct = Vec::with_capacity(8);
            for i in 0..8u32 {
                let sx = if i & 1 == 0 { 1.0 } else { -1.0 };
                let sy = if i & 2 == 0 { 1.0 } else { -1.0 };
                let sz = if i & 4 == 0 { 1.0 } else { -1.0 };
                let a = [sx, 0.0, 0.0];
                let b = [0.0, sy, 0.0];
                let c = [0.0, 0.0, sz];
                // counterclockwise seen from outside
                if sx * sy * sz > 0.0 {
                    oct.push([a, b, c]);
                } else {
                    oct.push([a, c, b]);
                }
            }
            tree.areas.push(oct.iter().map(triangle_area).collect());
            tree.tris.push(oct);
        }
        tree.deepen(depth)?;
        Ok(tree)
    }

    /// Refines the tree until it has `depth` levels; never coarsens.
    pub fn deepen(&mut self, depth: u32) -> Result<()> {
        if depth > depth_limit(self.manifold.kind()) {
            return Err(Error::CellTree(format!("depth {depth} is too fine")));
        }
        if self.manifold.kind() == ManifoldKind::Sphere2 {
            while (self.tris.len() as u32) <= depth {
                let prev = self.tris.last().expect("level");
                let mut next = Vec::with_capacity(prev.len() * 4);
                for [a, b, c] in prev {
                    let ab = midpoint(a, b);
                    let bc = midpoint(b, c);
                    let ca = midpoint(c, a);
                    next.push([*a, ab, ca]);
                    next.push([ab, *b, bc]);
                    next.push([ca, bc, *c]);
                    next.push([ab, bc, ca]);
                }
                let areas = next.iter().map(triangle_area).collect();
                self.tris.push(next);
                self.areas.push(areas);
            }
        }
        self.depth = self.depth.max(depth);
        Ok(())
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn delta(&self) -> f64 {
        DELTA
    }

    fn check(&self, c: CellId) {
        debug_assert!(c.level <= self.depth && c.index < self.count(c.level), "cell {c:?} out of range");
    }

    pub fn count(&self, level: u32) -> u64 {
        if level == 0 {
            return 1;
        }
        match self.manifold.kind() {
            ManifoldKind::Circle | ManifoldKind::Ellipse => 1 << level,
            ManifoldKind::Torus2 => 1 << (2 * level),
            ManifoldKind::Sphere2 => 8 << (2 * (level - 1)),
        }
    }

    pub fn measure(&self, c: CellId) -> f64 {
        self.check(c);
        match self.manifold.kind() {
            ManifoldKind::Circle | ManifoldKind::Ellipse => 0.5f64.powi(c.level as i32),
            ManifoldKind::Torus2 => 0.25f64.powi(c.level as i32),
            ManifoldKind::Sphere2 => self.areas[c.level as usize][c.index as usize],
        }
    }

    pub fn max_measure(&self, level: u32) -> f64 {
        match self.manifold.kind() {
            ManifoldKind::Sphere2 if level > 0 => self.areas[level as usize].iter().copied().fold(0.0, f64::max),
            _ => self.measure(CellId::new(level, 0)),
        }
    }

    pub fn min_measure(&self, level: u32) -> f64 {
        match self.manifold.kind() {
            ManifoldKind::Sphere2 if level > 0 => {
                self.areas[level as usize].iter().copied().fold(f64::INFINITY, f64::min)
            }
            _ => self.measure(CellId::new(level, 0)),
        }
    }

    pub(crate) fn triangle(&self, c: CellId) -> &Tri {
        &self.tris[c.level as usize][c.index as usize]
    }

    /// Arc of a 1-d cell as `(start, length)` in arc length.
    pub(crate) fn arc(&self, c: CellId) -> (f64, f64) {
        let len = self.manifold.period() / (1u64 << c.level) as f64;
        (c.index as f64 * len, len)
    }

    /// Square of a torus cell as `(x0, y0, width)`.
    pub(crate) fn square(&self, c: CellId) -> (f64, f64, f64) {
        let w = TAU / (1u64 << c.level) as f64;
        let (ix, iy) = morton_decode(c.index);
        (ix as f64 * w, iy as f64 * w, w)
    }

    pub fn children(&self, c: CellId) -> Range<u64> {
        self.descendants(c, c.level + 1)
    }

    /// Index range of the level-`level` cells inside `c`.
    pub fn descendants(&self, c: CellId, level: u32) -> Range<u64> {
        assert!(level >= c.level);
        let dl = level - c.level;
        if c.level == 0 {
            return 0..self.count(level);
        }
        match self.manifold.kind() {
            ManifoldKind::Circle | ManifoldKind::Ellipse => (c.index << dl)..((c.index + 1) << dl),
            _ => (c.index << (2 * dl))..((c.index + 1) << (2 * dl)),
        }
    }

    pub fn parent(&self, c: CellId) -> Option<CellId> {
        match c.level {
            0 => None,
            1 => Some(CellId::new(0, 0)),
            l => Some(CellId::new(
                l - 1,
                match self.manifold.kind() {
                    ManifoldKind::Circle | ManifoldKind::Ellipse => c.index >> 1,
                    _ => c.index >> 2,
                },
            )),
        }
    }

    pub fn center(&self, c: CellId) -> ManifoldPoint {
        self.check(c);
        let m = &self.manifold;
        match m.kind() {
            ManifoldKind::Circle | ManifoldKind::Ellipse => {
                let (s0, len) = self.arc(c);
                m.point_from_arclength(s0 + 0.5 * len)
            }
            ManifoldKind::Torus2 => {
                let (x0, y0, w) = self.square(c);
                m.torus_from_chart(x0 + 0.5 * w, y0 + 0.5 * w)
            }
            ManifoldKind::Sphere2 => {
                if c.level == 0 {
                    return m.sphere_from_ambient([0.0, 0.0, 1.0]);
                }
                let [a, b, cc] = self.triangle(c);
                m.sphere_from_ambient([a[0] + b[0] + cc[0], a[1] + b[1] + cc[1], a[2] + b[2] + cc[2]])
            }
        }
    }

    /// Radius of the largest ball about [`center`](Self::center) inside the cell.
    pub fn inradius(&self, c: CellId) -> f64 {
        self.check(c);
        match self.manifold.kind() {
            ManifoldKind::Circle | ManifoldKind::Ellipse => {
                if c.level == 0 {
                    self.manifold.period() / 2.0
                } else {
                    0.5 * self.arc(c).1
                }
            }
            ManifoldKind::Torus2 => {
                if c.level == 0 {
                    PI
                } else {
                    0.5 * self.square(c).2
                }
            }
            ManifoldKind::Sphere2 => {
                if c.level == 0 {
                    return PI;
                }
                let t = self.triangle(c);
                let z = self.center(c).ambient;
                (0..3)
                    .map(|e| {
                        let n = normalize3(cross3(&t[e], &t[(e + 1) % 3]));
                        dot3(&n, &z).abs().min(1.0).asin()
                    })
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Smallest radius about the center whose ball contains the cell.
    pub fn outradius(&self, c: CellId) -> f64 {
        self.check(c);
        if c.level == 0 {
            return self.manifold.diameter();
        }
        match self.manifold.kind() {
            ManifoldKind::Circle | ManifoldKind::Ellipse => 0.5 * self.arc(c).1,
            ManifoldKind::Torus2 => std::f64::consts::SQRT_2 * 0.5 * self.square(c).2,
            ManifoldKind::Sphere2 => {
                let z = self.center(c).ambient;
                self.triangle(c).iter().map(|v| sphere_angle(&z, v)).fold(0.0, f64::max)
            }
        }
    }

    pub fn level_bounds(&self, level: u32) -> LevelBounds {
        let scale = DELTA.powi(level as i32);
        let n = self.count(level);
        let (mut u1, mut u2) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let c = CellId::new(level, i);
            u1 = u1.min(self.inradius(c) / scale);
            u2 = u2.max(self.outradius(c) / scale);
        }
        LevelBounds {
            level,
            cells: n,
            u1,
            u2,
            min_measure: self.min_measure(level),
            max_measure: self.max_measure(level),
        }
    }

    /// Level-`level` cell containing `p` (boundary points go to the lower index).
    pub fn locate_cell(&self, p: &ManifoldPoint, level: u32) -> CellId {
        if level == 0 {
            return CellId::new(0, 0);
        }
        match self.manifold.kind() {
            ManifoldKind::Circle | ManifoldKind::Ellipse => {
                let n = 1u64 << level;
                let i = ((p.intrinsic / self.manifold.period()) * n as f64).floor() as i64;
                CellId::new(level, i.clamp(0, n as i64 - 1) as u64)
            }
            ManifoldKind::Torus2 => {
                let n = 1u64 << level;
                let f = |t: f64| ((t / TAU * n as f64).floor() as i64).clamp(0, n as i64 - 1) as u64;
                CellId::new(level, morton_encode(f(p.chart[0]), f(p.chart[1])))
            }
            ManifoldKind::Sphere2 => {
                let x = p.ambient;
                let mut idx = (x[0] < 0.0) as u64 | (((x[1] < 0.0) as u64) << 1) | (((x[2] < 0.0) as u64) << 2);
                for l in 2..=level {
                    let kids = (idx << 2)..((idx + 1) << 2);
                    let mut best = kids.start;
                    let mut margin = f64::NEG_INFINITY;
                    for k in kids {
                        let m = triangle_margin(&self.tris[l as usize][k as usize], &x);
                        if m > margin {
                            margin = m;
                            best = k;
                        }
                    }
                    idx = best;
                }
                CellId::new(level, idx)
            }
        }
    }

    /// Whether `p` lies in the closed cell.
    pub fn contains(&self, c: CellId, p: &ManifoldPoint, tol: f64) -> bool {
        if c.level == 0 {
            return true;
        }
        match self.manifold.kind() {
            ManifoldKind::Circle | ManifoldKind::Ellipse => {
                let (s0, len) = self.arc(c);
                let period = self.manifold.period();
                let d = (p.intrinsic - s0).rem_euclid(period);
                d <= len + tol || period - d <= tol
            }
            ManifoldKind::Torus2 => {
                let (x0, y0, w) = self.square(c);
                let inside = |t: f64, t0: f64| {
                    let d = (t - t0).rem_euclid(TAU);
                    d <= w + tol || TAU - d <= tol
                };
                inside(p.chart[0], x0) && inside(p.chart[1], y0)
            }
            ManifoldKind::Sphere2 => triangle_margin(self.triangle(c), &p.ambient) >= -tol,
        }
    }

    /// Cells sharing a boundary of positive length (1-d: an endpoint) with `c`, ascending.
    pub fn neighbors(&self, c: CellId) -> Vec<u64> {
        let adj = self.adjacency(c.level);
        adj[c.index as usize].clone()
    }

    /// Adjacency lists of one level; ascending and without duplicates.
    pub fn adjacency(&self, level: u32) -> Vec<Vec<u64>> {
        let n = self.count(level);
        if n == 1 {
            return vec![Vec::new()];
        }
        let dedup = |mut v: Vec<u64>, me: u64| {
            v.retain(|&x| x != me);
            v.sort_unstable();
            v.dedup();
            v
        };
        match self.manifold.kind() {
            ManifoldKind::Circle | ManifoldKind::Ellipse => {
                (0..n).map(|i| dedup(vec![(i + n - 1) % n, (i + 1) % n], i)).collect()
            }
            ManifoldKind::Torus2 => {
                let side = 1u64 << level;
                (0..n)
                    .map(|i| {
                        let (x, y) = morton_decode(i);
                        let v = vec![
                            morton_encode((x + side - 1) % side, y),
                            morton_encode((x + 1) % side, y),
                            morton_encode(x, (y + side - 1) % side),
                            morton_encode(x, (y + 1) % side),
                        ];
                        dedup(v, i)
                    })
                    .collect()
            }
            ManifoldKind::Sphere2 => {
                let key = |v: &[f64; 3]| {
                    let q = |x: f64| (x * 1e9).round() as i64;
                    (q(v[0]), q(v[1]), q(v[2]))
                };
                let mut edges: HashMap<((i64, i64, i64), (i64, i64, i64)), Vec<u64>> = HashMap::new();
                for (i, t) in self.tris[level as usize].iter().enumerate() {
                    for e in 0..3 {
                        let (a, b) = (key(&t[e]), key(&t[(e + 1) % 3]));
                        let k = if a < b { (a, b) } else { (b, a) };
                        edges.entry(k).or_default().push(i as u64);
                    }
                }
                let mut adj = vec![Vec::new(); n as usize];
                for cells in edges.values() {
                    for &a in cells {
                        for &b in cells {
                            if a != b {
                                adj[a as usize].push(b);
                            }
                        }
                    }
                }
                adj.into_iter().enumerate().map(|(i, v)| dedup(v, i as u64)).collect()
            }
        }
    }

    /// BFS spanning tree of the level-`level` adjacency graph rooted at cell 0.
    pub fn spanning_tree(&self, level: u32) -> Result<SpanningTree> {
        if level > self.depth {
            return Err(Error::CellTree(format!("level {level} exceeds depth {}", self.depth)));
        }
        let adj = self.adjacency(level);
        let n = adj.len();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut children = vec![Vec::new(); n];
        let mut queue = VecDeque::from([0u64]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in &adj[u as usize] {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    parent[v as usize] = Some(u);
                    children[u as usize].push(v);
                    queue.push_back(v);
                }
            }
        }
        if order.len() != n {
            return Err(Error::Disconnected(level));
        }
        Ok(SpanningTree {
            level,
            order,
            parent,
            children,
        })
    }
}

/// Rooted tree over the cells of one level, edges directed away from the root.
#[derive(Clone, Debug, Serialize)]
pub struct SpanningTree {
    pub level: u32,
    /// Breadth-first order; the root comes first.
    pub order: Vec<u64>,
    pub parent: Vec<Option<u64>>,
    pub children: Vec<Vec<u64>>,
}

impl SpanningTree {
    pub fn edges(&self) -> Vec<(u64, u64)> {
        self.order
            .iter()
            .flat_map(|&u| self.children[u as usize].iter().map(move |&v| (u, v)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Largest distance from `p` to points of an arc `[s0, s0 + len]` of a closed curve.
pub(crate) fn arc_max_distance(p: f64, s0: f64, len: f64, period: f64) -> f64 {
    let anti = (p + 0.5 * period - s0).rem_euclid(period);
    if anti <= len {
        return 0.5 * period;
    }
    let d = |s: f64| {
        let x = (s - p).rem_euclid(period);
        x.min(period - x)
    };
    d(s0).max(d(s0 + len))
}

/// Largest folded distance from `c` to `[t0, t0 + w]` on the circle of length 2π.
pub(crate) fn axis_max_distance(c: f64, t0: f64, w: f64) -> f64 {
    let anti = (c + PI - t0).rem_euclid(TAU);
    if anti <= w {
        return PI;
    }
    fold_angle(t0 - c).max(fold_angle(t0 + w - c))
}

/// Largest geodesic distance from `p` to a spherical triangle.
pub(crate) fn triangle_max_distance(p: &[f64; 3], t: &Tri) -> f64 {
    let anti = [-p[0], -p[1], -p[2]];
    if triangle_margin(t, &anti) >= 0.0 {
        return PI;
    }
    let mut best = 0.0f64;
    for e in 0..3 {
        let (u, v) = (&t[e], &t[(e + 1) % 3]);
        best = best.max(sphere_angle(p, u));
        let n = normalize3(cross3(u, v));
        let proj = dot3(&anti, &n);
        let q = [anti[0] - proj * n[0], anti[1] - proj * n[1], anti[2] - proj * n[2]];
        if dot3(&q, &q) > 1e-30 {
            let q = normalize3(q);
            if dot3(&cross3(u, &q), &n) >= 0.0 && dot3(&cross3(&q, v), &n) >= 0.0 {
                best = best.max(sphere_angle(p, &q));
            }
        }
    }
    best
}

pub fn build_cell_tree(manifold: &Manifold, delta: f64, depth: u32) -> Result<CellTree> {
    if delta != DELTA {
        return Err(Error::Unsupported(format!("cell ratio {delta}; only δ = 1/2 is built")));
    }
    CellTree::new(manifold, depth)
}
