//! Static kd-tree over a flat coordinate buffer.
//!
//! Nodes carry bounding boxes so that ball queries and bounded minimum
//! searches can prune on a box-to-point lower bound.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::math::sqrt;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    /// Child node indices; `usize::MAX` for leaves.
    left: usize,
    right: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.left == usize::MAX
    }
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    /// Builds the tree over `coords.len() / dim` points stored row-major.
    pub fn new(dim: usize, coords: Vec<f64>) -> Self {
        assert!(dim >= 1);
        assert_eq!(coords.len() % dim, 0);
        let count = coords.len() / dim;
        let mut tree = Self { dim, coords, perm: (0..count).collect(), nodes: Vec::new() };
        if count > 0 {
            tree.build(0, count);
        }
        tree
    }

    pub fn from_points(dim: usize, points: &[&[f64]]) -> Self {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let dim = self.dim;
        let mut lo = alloc::vec![f64::INFINITY; dim];
        let mut hi = alloc::vec![f64::NEG_INFINITY; dim];
        for &i in &self.perm[start..end] {
            let p = &self.coords[i * dim..(i + 1) * dim];
            for d in 0..dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node { start, end, left: usize::MAX, right: usize::MAX, lo, hi });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let node = &self.nodes[id];
        let axis = (0..dim).max_by(|&a, &b| (node.hi[a] - node.lo[a]).partial_cmp(&(node.hi[b] - node.lo[b])).unwrap_or(Ordering::Equal)).unwrap_or(0);
        if node.hi[axis] - node.lo[axis] <= 0.0 {
            // all points coincide
            return id;
        }
        let mid = start + (end - start) / 2;
        let coords = &self.coords;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coords[a * dim + axis].partial_cmp(&coords[b * dim + axis]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
        });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id].left = left;
        self.nodes[id].right = right;
        id
    }

    fn box_dist_sq(&self, node: &Node, q: &[f64]) -> f64 {
        let mut s = 0.0;
        for d in 0..self.dim {
            let v = if q[d] < node.lo[d] {
                node.lo[d] - q[d]
            } else if q[d] > node.hi[d] {
                q[d] - node.hi[d]
            } else {
                0.0
            };
            s += v * v;
        }
        s
    }

    fn box_far_sq(&self, node: &Node, q: &[f64]) -> f64 {
        let mut s = 0.0;
        for d in 0..self.dim {
            let v = (q[d] - node.lo[d]).abs().max((node.hi[d] - q[d]).abs());
            s += v * v;
        }
        s
    }

    fn dist_sq_to(&self, i: usize, q: &[f64]) -> f64 {
        let p = self.point(i);
        let mut s = 0.0;
        for d in 0..self.dim {
            let t = p[d] - q[d];
            s += t * t;
        }
        s
    }

    /// Indices of points with `|p - q| < r` (open) or `<= r` (closed), in
    /// increasing index order.
    pub fn within(&self, q: &[f64], r: f64, open: bool) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit_within(q, r, open, |i| out.push(i));
        out.sort_unstable();
        out
    }

    pub fn count_within(&self, q: &[f64], r: f64, open: bool) -> usize {
        let mut n = 0;
        self.visit_within(q, r, open, |_| n += 1);
        n
    }

    /// Calls `f` for each point in the ball, in tree order.
    pub fn visit_within<F: FnMut(usize)>(&self, q: &[f64], r: f64, open: bool, mut f: F) {
        if self.nodes.is_empty() || r < 0.0 {
            return;
        }
        let r2 = r * r;
        let inside = |d2: f64| if open { d2 < r2 } else { d2 <= r2 };
        let mut stack = alloc::vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let near = self.box_dist_sq(node, q);
            if !inside(near) {
                continue;
            }
            if self.box_far_sq(node, q) < r2 {
                for &i in &self.perm[node.start..node.end] {
                    f(i);
                }
                continue;
            }
            if node.is_leaf() {
                for &i in &self.perm[node.start..node.end] {
                    if inside(self.dist_sq_to(i, q)) {
                        f(i);
                    }
                }
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
    }

    /// Nearest point and its distance; ties broken by smaller index.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        self.min_by(q, |i, d| (d, i as f64), |d| d).map(|(i, v)| (i, v.0))
    }

    /// Minimizes `value(i, |p_i - q|)` over all points, given a monotone
    /// non-decreasing `lower` with `value(i, d) >= lower(d)`.
    ///
    /// `value` returns a `(key, tiebreak)` pair compared lexicographically.
    pub fn min_by<V, L>(&self, q: &[f64], value: V, lower: L) -> Option<(usize, (f64, f64))>
    where
        V: Fn(usize, f64) -> (f64, f64),
        L: Fn(f64) -> f64,
    {
        if self.nodes.is_empty() {
            return None;
        }
        let mut heap = BinaryHeap::new();
        heap.push(Entry { bound: lower(sqrt(self.box_dist_sq(&self.nodes[0], q))), id: 0 });
        let mut best: Option<(usize, (f64, f64))> = None;
        while let Some(Entry { bound, id }) = heap.pop() {
            if let Some((_, b)) = best {
                if bound > b.0 {
                    break;
                }
            }
            let node = &self.nodes[id];
            if node.is_leaf() {
                for &i in &self.perm[node.start..node.end] {
                    let v = value(i, sqrt(self.dist_sq_to(i, q)));
                    let better = match best {
                        None => true,
                        Some((bi, b)) => v.0 < b.0 || (v.0 == b.0 && (v.1 < b.1 || (v.1 == b.1 && i < bi))),
                    };
                    if better {
                        best = Some((i, v));
                    }
                }
            } else {
                for child in [node.left, node.right] {
                    let b = lower(sqrt(self.box_dist_sq(&self.nodes[child], q)));
                    heap.push(Entry { bound: b, id: child });
                }
            }
        }
        best
    }
}

/// Growable set of balls with variable radii, binned by `floor(log2 r)` and
/// hashed on a grid per bin, for "which balls reach this point" queries.
#[derive(Debug, Clone, Default)]
pub struct BallSet {
    dim: usize,
    centers: Vec<f64>,
    radii: Vec<f64>,
    bins: BTreeMap<i32, Bin>,
}

#[derive(Debug, Clone, Default)]
struct Bin {
    cell: f64,
    members: Vec<usize>,
    grid: BTreeMap<Vec<i64>, Vec<usize>>,
}

fn bin_of(r: f64) -> i32 {
    crate::math::floor(libm::log2(r)) as i32
}

impl BallSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    fn cell_key(&self, p: &[f64], cell: f64) -> Vec<i64> {
        p.iter().map(|x| crate::math::floor(x / cell) as i64).collect()
    }

    pub fn insert(&mut self, center: &[f64], radius: f64) -> usize {
        assert!(radius > 0.0 && radius.is_finite());
        let id = self.radii.len();
        self.centers.extend_from_slice(center);
        self.radii.push(radius);
        let b = bin_of(radius);
        let cell = libm::exp2(f64::from(b + 1));
        let key = self.cell_key(center, cell);
        let bin = self.bins.entry(b).or_insert_with(|| Bin { cell, ..Default::default() });
        bin.members.push(id);
        bin.grid.entry(key).or_default().push(id);
        id
    }

    /// Calls `f(i)` for every ball with `|q - c_i| < factor * (rho + r_i)`.
    pub fn visit_reaching<F: FnMut(usize)>(&self, q: &[f64], rho: f64, factor: f64, mut f: F) {
        let dim = self.dim;
        for bin in self.bins.values() {
            // radii in this bin are below `bin.cell`
            let reach = factor * (rho + bin.cell);
            let span = crate::math::ceil(reach / bin.cell) as i64;
            let cells = (2 * span + 1) as f64;
            let mut test = |i: usize| {
                let c = &self.centers[i * dim..(i + 1) * dim];
                let d2: f64 = c.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                let lim = factor * (rho + self.radii[i]);
                if d2 < lim * lim {
                    f(i);
                }
            };
            if libm::pow(cells, dim as f64) > bin.members.len() as f64 {
                for &i in &bin.members {
                    test(i);
                }
                continue;
            }
            let base = self.cell_key(q, bin.cell);
            let mut offset = alloc::vec![-span; dim];
            loop {
                let key: Vec<i64> = base.iter().zip(&offset).map(|(a, b)| a + b).collect();
                if let Some(ids) = bin.grid.get(&key) {
                    for &i in ids {
                        test(i);
                    }
                }
                let mut d = 0;
                while d < dim {
                    offset[d] += 1;
                    if offset[d] <= span {
                        break;
                    }
                    offset[d] = -span;
                    d += 1;
                }
                if d == dim {
                    break;
                }
            }
        }
    }

    pub fn any_reaching(&self, q: &[f64], rho: f64, factor: f64) -> bool {
        let mut hit = false;
        self.visit_reaching(q, rho, factor, |_| hit = true);
        hit
    }

    /// Indices reaching `q`, ascending.
    pub fn reaching(&self, q: &[f64], rho: f64, factor: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit_reaching(q, rho, factor, |i| out.push(i));
        out.sort_unstable();
        out
    }
}

#[derive(Debug, PartialEq)]
struct Entry {
    bound: f64,
    id: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on bound
        other.bound.partial_cmp(&self.bound).unwrap_or(Ordering::Equal).then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
