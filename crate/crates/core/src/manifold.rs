//! The approximating manifold `S_r = {Phi = 0}`: fiber zeros, graph
//! patches over local planes, area quadrature and tangent calibration.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationForm;
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::field::SubspaceField;
use crate::geometry::{AffinePlane, Ball, Frame, Orientation, Point};
use crate::index::{BallSet, KdTree};
use crate::linalg::{axpy, dist, dot, norm, sub, Matrix, SymEigen};
use crate::math::{ceil, det, sqrt};
use crate::multiscale::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberParams {
    /// Target `|grad Phi|`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Smallest admissible eigenvalue of the fiber-restricted Hessian.
    pub min_hessian: f64,
    /// Re-solve from a perturbed start and report the disagreement.
    pub check_uniqueness: bool,
}

impl Default for FiberParams {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 50, min_hessian: 0.5, check_uniqueness: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSolution {
    pub z: Point,
    pub iterations: usize,
    /// Full finite-difference `|grad Phi(z)|`.
    pub residual: f64,
    pub phi: f64,
    /// `|z - l|`
    pub offset: f64,
    /// `r-` at `z`.
    pub bar_radius: f64,
    /// Distance to the solution from the perturbed start, when checked.
    pub uniqueness_gap: Option<f64>,
}

/// The anchor's plane `L_x` and fiber directions `L^_x^perp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberFrame {
    pub plane: AffinePlane,
    pub normals: Vec<Vec<f64>>,
}

impl FiberFrame {
    pub fn at(field: &SubspaceField, x: &[f64]) -> Result<Self> {
        let a = field.assemble(x)?;
        let plane = AffinePlane { base: Point::new(a.m.clone()), frame: a.frame.clone() };
        let normals = a.frame.complement();
        Ok(Self { plane, normals })
    }

    fn point(&self, ell: &[f64], t: &[f64]) -> Vec<f64> {
        let mut z = ell.to_vec();
        for (u, ti) in self.normals.iter().zip(t) {
            axpy(&mut z, *ti, u);
        }
        z
    }
}

fn full_gradient_norm(field: &SubspaceField, z: &[f64], h: f64) -> Result<f64> {
    let mut g2 = 0.0;
    for i in 0..z.len() {
        let mut a = z.to_vec();
        let mut b = z.to_vec();
        a[i] += h;
        b[i] -= h;
        let d = (field.phi(&a)? - field.phi(&b)?) / (2.0 * h);
        g2 += d * d;
    }
    Ok(sqrt(g2))
}

fn newton(field: &SubspaceField, frame: &FiberFrame, ell: &[f64], start: Vec<f64>, params: &FiberParams) -> Result<(Vec<f64>, usize)> {
    let m = frame.normals.len();
    let mut t = start;
    let mut last = f64::INFINITY;
    for it in 0..=params.max_iterations {
        let z = frame.point(ell, &t);
        let a = field.assemble(&z)?;
        let (h1, h2) = (1e-5 * a.radius, 1e-3 * a.radius);
        let phi_t = |s: &[f64]| field.phi(&frame.point(ell, s));
        let step = |j: usize, h: f64| {
            let mut s = t.clone();
            s[j] += h;
            s
        };
        let mut g = vec![0.0; m];
        for j in 0..m {
            g[j] = (phi_t(&step(j, h1))? - phi_t(&step(j, -h1))?) / (2.0 * h1);
        }
        last = norm(&g);
        if last <= 0.1 * params.tolerance {
            return Ok((t, it));
        }
        if it == params.max_iterations {
            break;
        }
        let mut hess = Matrix::zeros(m, m);
        for i in 0..m {
            hess[(i, i)] = (phi_t(&step(i, h2))? - 2.0 * a.phi + phi_t(&step(i, -h2))?) / (h2 * h2);
            for j in (i + 1)..m {
                let mut pp = t.clone();
                pp[i] += h2;
                pp[j] += h2;
                let mut pm = t.clone();
                pm[i] += h2;
                pm[j] -= h2;
                let mut mp = t.clone();
                mp[i] -= h2;
                mp[j] += h2;
                let mut mm = t.clone();
                mm[i] -= h2;
                mm[j] -= h2;
                let v = (phi_t(&pp)? - phi_t(&pm)? - phi_t(&mp)? + phi_t(&mm)?) / (4.0 * h2 * h2);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        let min_eig = SymEigen::new(&hess).values.last().copied().unwrap_or(0.0);
        if min_eig < params.min_hessian {
            return Err(Error::FiberDegenerate { min_eigenvalue: min_eig });
        }
        let dir = hess.solve(&g).ok_or(Error::FiberDegenerate { min_eigenvalue: min_eig })?;
        let mut lambda = 1.0;
        let mut next = t.clone();
        for _ in 0..12 {
            next = t.clone();
            axpy(&mut next, -lambda, &dir);
            match phi_t(&next) {
                Ok(v) if v <= a.phi || a.phi <= 1e-300 => break,
                _ => lambda *= 0.5,
            }
        }
        t = next;
    }
    Err(Error::NoConvergence { iterations: params.max_iterations, residual: last })
}

/// Zero of `Phi` on the fiber `l + L^_x^perp` by damped Newton on the
/// fiber-restricted gradient, starting at `l`.
pub fn solve_zero_on_fiber(field: &SubspaceField, frame: &FiberFrame, ell: &[f64], params: &FiberParams) -> Result<FiberSolution> {
    let m = frame.normals.len();
    let (t, iterations) = newton(field, frame, ell, vec![0.0; m], params)?;
    let z = frame.point(ell, &t);
    let a = field.assemble(&z)?;
    let residual = full_gradient_norm(field, &z, 1e-5 * a.radius)?;
    if residual > params.tolerance {
        return Err(Error::NoConvergence { iterations, residual });
    }
    let uniqueness_gap = if params.check_uniqueness && m > 0 {
        let mut start = vec![0.0; m];
        start[0] = 0.01 * a.radius;
        let (t2, _) = newton(field, frame, ell, start, params)?;
        Some(norm(&sub(&frame.point(ell, &t2), &z)))
    } else {
        None
    };
    Ok(FiberSolution { offset: norm(&t), z: Point::new(z), iterations, residual, phi: a.phi, bar_radius: field.bar_factor() * a.radius, uniqueness_gap })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchNode {
    pub index: Vec<i64>,
    /// Plane coordinates.
    pub t: Vec<f64>,
    /// Normal coordinates of the graph.
    pub g: Vec<f64>,
    pub z: Point,
    /// `(n-k) x k` Jacobian of `g`.
    pub grad: Matrix,
    /// Fraction of the node's cell owned by this patch.
    pub weight: f64,
}

impl PatchNode {
    pub fn owned(&self) -> bool {
        self.weight > 0.0
    }
}

/// Graph over a disk of a plane, sampled at cell midpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPatch {
    pub plane: AffinePlane,
    pub normals: Vec<Vec<f64>>,
    pub radius: f64,
    pub pitch: f64,
    pub nodes: Vec<PatchNode>,
    pub lip: f64,
}

fn disk_indices(k: usize, radius: f64, pitch: f64, offset: f64) -> Vec<Vec<i64>> {
    let m = ceil(radius / pitch) as i64 + 1;
    let mut out = Vec::new();
    let mut idx = vec![-m; k];
    loop {
        let t: Vec<f64> = idx.iter().map(|&i| (i as f64 + offset) * pitch).collect();
        if norm(&t) <= radius {
            out.push(idx.clone());
        }
        let mut d = 0;
        while d < k {
            idx[d] += 1;
            if idx[d] <= m {
                break;
            }
            idx[d] = -m;
            d += 1;
        }
        if d == k {
            return out;
        }
    }
}

impl GraphPatch {
    /// Patch of an explicit graph `g` over the disk of radius `radius`
    /// around the plane's base, with `cells` midpoint cells per diameter.
    pub fn from_fn<G: Fn(&[f64]) -> Vec<f64>>(plane: AffinePlane, radius: f64, cells: usize, g: G) -> Result<Self> {
        if cells == 0 || !(radius > 0.0) {
            return Err(Error::ParamOutOfRange("patch needs a positive radius and cell count"));
        }
        let k = plane.k();
        let normals = plane.frame.complement();
        let pitch = 2.0 * radius / cells as f64;
        let offset = if cells % 2 == 0 { 0.5 } else { 0.0 };
        let mut nodes = Vec::new();
        for index in disk_indices(k, radius, pitch, offset) {
            let t: Vec<f64> = index.iter().map(|&i| (i as f64 + offset) * pitch).collect();
            let gv = g(&t);
            let mut grad = Matrix::zeros(normals.len(), k);
            for c in 0..k {
                let mut a = t.clone();
                let mut b = t.clone();
                a[c] += pitch / 2.0;
                b[c] -= pitch / 2.0;
                let (ga, gb) = (g(&a), g(&b));
                for r in 0..normals.len() {
                    grad[(r, c)] = (ga[r] - gb[r]) / pitch;
                }
            }
            let mut z = plane.from_local(&t);
            for (u, gi) in normals.iter().zip(&gv) {
                axpy(&mut z, *gi, u);
            }
            nodes.push(PatchNode { index, t, g: gv, z: Point::new(z), grad, weight: 1.0 });
        }
        let mut p = Self { plane, normals, radius, pitch, nodes, lip: 0.0 };
        p.lip = p.difference_quotient_lip();
        Ok(p)
    }

    pub fn k(&self) -> usize {
        self.plane.k()
    }

    fn lookup(&self) -> BTreeMap<Vec<i64>, usize> {
        self.nodes.iter().enumerate().map(|(i, n)| (n.index.clone(), i)).collect()
    }

    /// Largest difference quotient between axis neighbors.
    pub fn difference_quotient_lip(&self) -> f64 {
        let map = self.lookup();
        let mut lip: f64 = 0.0;
        for node in &self.nodes {
            for c in 0..self.k() {
                let mut j = node.index.clone();
                j[c] += 1;
                if let Some(&o) = map.get(&j) {
                    lip = lip.max(norm(&sub(&self.nodes[o].g, &node.g)) / self.pitch);
                }
            }
        }
        lip
    }

    /// Central differences between grid neighbors, one-sided at the rim.
    fn fill_gradients(&mut self) {
        let map = self.lookup();
        let k = self.k();
        let m = self.normals.len();
        let grads: Vec<Matrix> = self
            .nodes
            .iter()
            .map(|node| {
                let mut grad = Matrix::zeros(m, k);
                for c in 0..k {
                    let mut up = node.index.clone();
                    up[c] += 1;
                    let mut down = node.index.clone();
                    down[c] -= 1;
                    let (a, b, span) = match (map.get(&up), map.get(&down)) {
                        (Some(&u), Some(&d)) => (&self.nodes[u].g, &self.nodes[d].g, 2.0),
                        (Some(&u), None) => (&self.nodes[u].g, &node.g, 1.0),
                        (None, Some(&d)) => (&node.g, &self.nodes[d].g, 1.0),
                        (None, None) => continue,
                    };
                    for r in 0..m {
                        grad[(r, c)] = (a[r] - b[r]) / (span * self.pitch);
                    }
                }
                grad
            })
            .collect();
        for (node, g) in self.nodes.iter_mut().zip(grads) {
            node.grad = g;
        }
    }

    /// `sqrt det(I + Dg^T Dg)`
    pub fn area_element(grad: &Matrix) -> f64 {
        let k = grad.cols();
        let gram = grad.transpose().mul(grad);
        let mut a = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                a.push(gram[(i, j)] + if i == j { 1.0 } else { 0.0 });
            }
        }
        sqrt(det(a, k).max(0.0))
    }

    /// Oriented orthonormal tangent frame at a node.
    pub fn tangent_frame(&self, node: &PatchNode) -> Frame {
        let k = self.k();
        let base = self.plane.frame.oriented_vectors();
        let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(k);
        for (c, e) in base.iter().enumerate() {
            let mut v = e.clone();
            for (r, u) in self.normals.iter().enumerate() {
                axpy(&mut v, node.grad[(r, c)], u);
            }
            for _ in 0..2 {
                for b in &vecs {
                    let d = dot(b, &v);
                    axpy(&mut v, -d, b);
                }
            }
            let l = norm(&v);
            v.iter_mut().for_each(|x| *x /= l);
            vecs.push(v);
        }
        Frame::from_trusted(vecs, Orientation::Positive)
    }
}

/// Midpoint quadrature of the area formula, each cell weighted by its owned
/// fraction.
pub fn patch_measure(patch: &GraphPatch) -> f64 {
    let cell = crate::math::powi(patch.pitch, patch.k() as i32);
    patch.nodes.iter().filter(|n| n.owned()).map(|n| n.weight * cell * GraphPatch::area_element(&n.grad)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldParams {
    /// The scale `r`: chart disk radius.
    pub r: f64,
    /// Anchor spacing as a multiple of `r`.
    pub anchor_spacing: f64,
    /// Seed pitch as a multiple of `r~` at the anchor.
    pub pitch_factor: f64,
    /// Seeds farther than `reach * r` from every sample are skipped.
    pub reach: f64,
    pub fiber: FiberParams,
}

impl ManifoldParams {
    pub fn new(r: f64) -> Self {
        Self { r, anchor_spacing: 0.5, pitch_factor: 0.25, reach: 0.5, fiber: FiberParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximatingManifold {
    pub r: f64,
    pub patches: Vec<GraphPatch>,
    pub anchors: Vec<Point>,
    pub attempted: usize,
    pub failed: usize,
    /// Newton iteration counts of successful fibers.
    pub iterations: Vec<usize>,
}

impl ApproximatingManifold {
    /// Owned sample points.
    pub fn samples(&self) -> Vec<Point> {
        self.patches.iter().flat_map(|p| p.nodes.iter().filter(|n| n.owned()).map(|n| n.z.clone())).collect()
    }

    pub fn measure(&self) -> f64 {
        self.patches.iter().map(patch_measure).sum()
    }

    pub fn max_lip(&self) -> f64 {
        self.patches.iter().map(|p| p.lip).fold(0.0, f64::max)
    }
}

struct ChartJob {
    anchor: usize,
}

/// Fibers seeded on a grid of each anchor's plane; each solved point is
/// owned by the anchor nearest to it, and only owned points within `clip`
/// are counted.
pub fn build_manifold(field: &SubspaceField, cloud: &PointCloud, params: &ManifoldParams, clip: Option<&Ball>) -> Result<ApproximatingManifold> {
    build_manifold_with(&Sequential, field, cloud, params, clip)
}

pub fn build_manifold_with<E: Executor>(
    exec: &E,
    field: &SubspaceField,
    cloud: &PointCloud,
    params: &ManifoldParams,
    clip: Option<&Ball>,
) -> Result<ApproximatingManifold> {
    if !(params.r > 0.0) {
        return Err(Error::ParamOutOfRange("manifold scale must be positive"));
    }
    let n = cloud.n();
    let spacing = params.anchor_spacing * params.r;
    let mut set = BallSet::new(n);
    let mut anchors: Vec<Point> = Vec::new();
    for p in cloud.points() {
        if clip.is_some_and(|b| !b.contains(p)) {
            continue;
        }
        if !set.any_reaching(p, spacing / 2.0, 1.0) {
            set.insert(p, spacing / 2.0);
            anchors.push(p.clone());
        }
    }
    if anchors.is_empty() {
        return Err(Error::EmptyBall);
    }
    let refs: Vec<&[f64]> = anchors.iter().map(|a| a.coords()).collect();
    let anchor_tree = KdTree::from_points(n, &refs);
    let jobs: Vec<ChartJob> = (0..anchors.len()).map(|anchor| ChartJob { anchor }).collect();
    let charts = exec.map(&jobs, |_, job| chart(field, cloud, params, clip, &anchors, &anchor_tree, job.anchor));
    let mut out = ApproximatingManifold { r: params.r, patches: Vec::new(), anchors: anchors.clone(), attempted: 0, failed: 0, iterations: Vec::new() };
    for c in charts {
        let c = match c {
            Ok(c) => c,
            Err(_) => {
                out.failed += 1;
                out.attempted += 1;
                continue;
            }
        };
        out.attempted += c.attempted;
        out.failed += c.failed;
        out.iterations.extend(c.iterations);
        if let Some(p) = c.patch {
            out.patches.push(p);
        }
    }
    Ok(out)
}

struct ChartOutcome {
    patch: Option<GraphPatch>,
    attempted: usize,
    failed: usize,
    iterations: Vec<usize>,
}

fn chart(
    field: &SubspaceField,
    cloud: &PointCloud,
    params: &ManifoldParams,
    clip: Option<&Ball>,
    anchors: &[Point],
    anchor_tree: &KdTree,
    me: usize,
) -> Result<ChartOutcome> {
    let x = &anchors[me];
    let frame = FiberFrame::at(field, x)?;
    let a = field.assemble(x)?;
    let pitch = params.pitch_factor * a.radius;
    let k = frame.plane.k();
    let mut nodes = Vec::new();
    let (mut attempted, mut failed) = (0, 0);
    let mut iterations = Vec::new();
    // seeds near this anchor's Voronoi cell, with a two-cell margin for
    // rim gradients
    let margin = 2.0 * pitch * sqrt(k as f64);
    for index in disk_indices(k, params.r, pitch, 0.0) {
        let t: Vec<f64> = index.iter().map(|&i| i as f64 * pitch).collect();
        let ell = frame.plane.from_local(&t);
        let nearest = anchor_tree.nearest(&ell).map_or(f64::INFINITY, |v| v.1);
        if x.dist(&ell) > nearest + margin {
            continue;
        }
        if cloud.dist_to(&ell) > params.reach * params.r {
            continue;
        }
        attempted += 1;
        match solve_zero_on_fiber(field, &frame, &ell, &params.fiber) {
            Ok(sol) => {
                let g: Vec<f64> = frame.normals.iter().map(|u| dot(u, &sub(&sol.z, &ell))).collect();
                iterations.push(sol.iterations);
                nodes.push(PatchNode { index, t, g, z: sol.z, grad: Matrix::zeros(frame.normals.len(), k), weight: 0.0 });
            }
            Err(_) => failed += 1,
        }
    }
    if nodes.is_empty() {
        return Ok(ChartOutcome { patch: None, attempted, failed, iterations });
    }
    let mut patch = GraphPatch { plane: frame.plane, normals: frame.normals, radius: params.r, pitch, nodes, lip: 0.0 };
    patch.fill_gradients();
    let me_pt = x.coords();
    let inside = |y: &[f64]| clip.is_none_or(|b| b.contains(y)) && cloud.dist_to(y) <= params.reach * params.r;
    for node in &mut patch.nodes {
        let tangents: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                let mut v = patch.plane.frame.vectors()[c].clone();
                for (r, u) in patch.normals.iter().enumerate() {
                    axpy(&mut v, node.grad[(r, c)], u);
                }
                v
            })
            .collect();
        let z = node.z.coords();
        let cell_reach = 0.5 * pitch * tangents.iter().map(|v| norm(v)).sum::<f64>();
        let dz = dist(z, me_pt);
        // Voronoi half-spaces `g . s <= h` in cell coordinates
        let mut halfspaces = Vec::new();
        for b in anchor_tree.within(z, dz + 2.0 * cell_reach, false) {
            if b == me {
                continue;
            }
            let bp = anchor_tree.point(b);
            let ba = sub(bp, me_pt);
            let g: Vec<f64> = tangents.iter().map(|v| 2.0 * pitch * dot(v, &ba)).collect();
            let h = dot(bp, bp) - dot(me_pt, me_pt) - 2.0 * dot(z, &ba);
            halfspaces.push((g, h));
        }
        let voronoi = clipped_fraction(k, &halfspaces).unwrap_or_else(|| {
            let offsets = cell_offsets(k, 4);
            let hits = offsets.iter().filter(|o| halfspaces.iter().all(|(g, h)| dot(g, o) <= *h)).count();
            hits as f64 / offsets.len() as f64
        });
        if voronoi <= 0.0 {
            node.weight = 0.0;
            continue;
        }
        let at = |o: &[f64]| {
            let mut y = z.to_vec();
            for (v, oc) in tangents.iter().zip(o) {
                axpy(&mut y, oc * pitch, v);
            }
            y
        };
        let probes = cell_offsets(k, 1).into_iter().chain(cell_corners(k));
        let mut all = true;
        for o in probes {
            if !inside(&at(&o)) {
                all = false;
                break;
            }
        }
        let kept = if all {
            1.0
        } else {
            let offsets = cell_offsets(
                k,
                if k == 1 {
                    8
                } else if k == 2 {
                    4
                } else {
                    2
                },
            );
            offsets.iter().filter(|o| inside(&at(o))).count() as f64 / offsets.len() as f64
        };
        node.weight = voronoi * kept;
    }
    let grad_lip = patch.nodes.iter().map(|n| n.grad.spectral_norm()).fold(0.0, f64::max);
    patch.lip = patch.difference_quotient_lip().max(grad_lip);
    Ok(ChartOutcome { patch: Some(patch), attempted, failed, iterations })
}

fn cell_corners(k: usize) -> Vec<Vec<f64>> {
    (0..1usize << k).map(|m| (0..k).map(|c| if m >> c & 1 == 1 { 0.5 } else { -0.5 }).collect()).collect()
}

/// Exact measure of `{s in [-1/2, 1/2]^k : g . s <= h for all}` for
/// `k <= 2`.
fn clipped_fraction(k: usize, halfspaces: &[(Vec<f64>, f64)]) -> Option<f64> {
    match k {
        1 => {
            let (mut lo, mut hi) = (-0.5f64, 0.5f64);
            for (g, h) in halfspaces {
                if g[0] > 0.0 {
                    hi = hi.min(h / g[0]);
                } else if g[0] < 0.0 {
                    lo = lo.max(h / g[0]);
                } else if *h < 0.0 {
                    return Some(0.0);
                }
            }
            Some((hi - lo).max(0.0))
        }
        2 => {
            let mut poly: Vec<[f64; 2]> = vec![[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]];
            for (g, h) in halfspaces {
                let val = |p: &[f64; 2]| g[0] * p[0] + g[1] * p[1] - h;
                let mut out = Vec::with_capacity(poly.len() + 1);
                for i in 0..poly.len() {
                    let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
                    let (va, vb) = (val(&a), val(&b));
                    if va <= 0.0 {
                        out.push(a);
                    }
                    if (va < 0.0 && vb > 0.0) || (va > 0.0 && vb < 0.0) {
                        let t = va / (va - vb);
                        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    }
                }
                poly = out;
                if poly.len() < 3 {
                    return Some(0.0);
                }
            }
            let mut area = 0.0;
            for i in 0..poly.len() {
                let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
                area += a[0] * b[1] - b[0] * a[1];
            }
            Some((0.5 * area).abs())
        }
        _ => None,
    }
}

/// Midpoints of a `sub^k` subdivision of the unit cell centered at 0.
fn cell_offsets(k: usize, sub: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; k];
    loop {
        out.push(idx.iter().map(|&i| (i as f64 + 0.5) / sub as f64 - 0.5).collect());
        let mut d = 0;
        while d < k {
            idx[d] += 1;
            if idx[d] < sub {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == k {
            return out;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCheck {
    pub min: f64,
    pub threshold: f64,
    pub passed: bool,
    pub evaluated: usize,
    pub argmin: Option<Point>,
}

/// `min Omega[T_z S_r]` over owned nodes; passes when `min >= alpha/4`.
pub fn tangent_calibration_check(manifold: &ApproximatingManifold, form: &CalibrationForm, alpha: f64) -> Result<CalibrationCheck> {
    let mut min = f64::INFINITY;
    let mut argmin = None;
    let mut evaluated = 0;
    for p in &manifold.patches {
        for node in p.nodes.iter().filter(|n| n.owned()) {
            let v = form.evaluate_frame(&node.z, &p.tangent_frame(node))?;
            evaluated += 1;
            if v < min {
                min = v;
                argmin = Some(node.z.clone());
            }
        }
    }
    let threshold = alpha / 4.0;
    Ok(CalibrationCheck { min, threshold, passed: evaluated > 0 && min >= threshold, evaluated, argmin })
}
