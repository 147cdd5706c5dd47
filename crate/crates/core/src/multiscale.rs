//! Per-ball plane fitting, beta numbers, good/bad classification and the
//! radius fields `s_x` and `r_x`.
//!
//! Balls used for fitting and classification are open, as in the ladder
//! definition of `s_x`; beta numbers use closed balls so that boundary
//! samples count.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationForm;
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::geometry::{complement_basis, eps_linear_independence, AffinePlane, Ball, Frame, IndependenceWitness, Orientation, Point};
use crate::index::{BallSet, KdTree};
use crate::linalg::{axpy, dist, dot, norm, sub, Matrix, SymEigen};
use crate::math::{ceil, cos, ln, round, sin, sqrt, PI};

/// Finite sample of the set together with its range-query index.
#[derive(Debug, Clone)]
pub struct PointCloud {
    n: usize,
    k: usize,
    points: Vec<Point>,
    tree: KdTree,
}

impl PointCloud {
    pub fn new(points: Vec<Point>, k: usize) -> Result<Self> {
        let n = points.first().map(|p| p.dim()).ok_or(Error::InvalidInput("empty point cloud"))?;
        if n == 0 {
            return Err(Error::InvalidInput("points must have at least one coordinate"));
        }
        if k == 0 || k > n {
            return Err(Error::ParamOutOfRange("target dimension must satisfy 1 <= k <= n"));
        }
        let mut coords = Vec::with_capacity(points.len() * n);
        for p in &points {
            if p.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: p.dim() });
            }
            if !p.is_finite() {
                return Err(Error::InvalidInput("non-finite coordinate"));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self { n, k, points, tree: KdTree::new(n, coords) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn tree(&self) -> &KdTree {
        &self.tree
    }

    /// Indices inside the ball, ascending.
    pub fn indices_in(&self, center: &[f64], radius: f64, open: bool) -> Vec<usize> {
        self.tree.within(center, radius, open)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.points[i].clone()).collect(), self.k)
    }

    /// Distance to the nearest sample.
    pub fn dist_to(&self, y: &[f64]) -> f64 {
        self.tree.nearest(y).map_or(f64::INFINITY, |x| x.1)
    }

    /// Median nearest-neighbour spacing; 0 for a single point.
    pub fn resolution(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let mut d: Vec<f64> = (0..self.len())
            .map(|i| self.tree.min_by(&self.points[i], |j, d| (if j == i { f64::INFINITY } else { d }, 0.0), |d| d).map_or(0.0, |x| x.1 .0))
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        d[d.len() / 2]
    }
}

/// Descending geometric list of scales `r_max * ratio^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    pub r_max: f64,
    pub r0: f64,
    pub ratio: f64,
    pub scales: Vec<f64>,
}

impl ScaleLadder {
    /// The requested floor is snapped to the nearest ladder rung, so the
    /// last scale equals `r0`.
    pub fn new(r_max: f64, r0: f64, ratio: f64) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::ParamOutOfRange("r_max must be positive"));
        }
        if !(r0 > 0.0 && r0 <= r_max) {
            return Err(Error::ParamOutOfRange("r0 must lie in (0, r_max]"));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::ParamOutOfRange("ladder ratio must lie in (0, 1)"));
        }
        let levels = round(ln(r_max / r0) / ln(1.0 / ratio)).max(0.0) as usize;
        let mut scales = Vec::with_capacity(levels + 1);
        let mut s = r_max;
        for _ in 0..=levels {
            scales.push(s);
            s *= ratio;
        }
        let r0 = *scales.last().unwrap_or(&r_max);
        Ok(Self { r_max, r0, ratio, scales })
    }
}

/// `(k-1)`-dimensional affine set with a certified tube width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub base: Point,
    /// Orthonormal directions; `k - 1` of them.
    pub directions: Vec<Vec<f64>>,
    /// Largest distance from the ball's samples to the affine set.
    pub width: f64,
}

impl Tube {
    pub fn dist(&self, y: &[f64]) -> f64 {
        let mut d = sub(y, &self.base);
        for e in &self.directions {
            let c = dot(e, &d);
            axpy(&mut d, -c, e);
        }
        norm(&d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneFit {
    pub plane: AffinePlane,
    /// One-sided deviation of the clipped samples divided by the radius.
    pub delta_actual: f64,
    pub count: usize,
    /// Fewer than `k + 1` samples: the plane is not determined by the data.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallAnalysis {
    pub ball: Ball,
    pub plane: AffinePlane,
    pub delta_actual: f64,
    pub good: bool,
    pub witness: IndependenceWitness,
    pub calib_value: Option<f64>,
    /// Present for bad balls.
    pub tube: Option<Tube>,
    pub count: usize,
    pub degenerate: bool,
}

fn sign_normalize(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}

/// PCA plane through the centroid of `pts`.
pub fn fit_plane(pts: &[&[f64]], k: usize, n: usize) -> AffinePlane {
    let mut centroid = vec![0.0; n];
    for p in pts {
        axpy(&mut centroid, 1.0, p);
    }
    for c in centroid.iter_mut() {
        *c /= pts.len().max(1) as f64;
    }
    if pts.len() < 2 {
        return AffinePlane::axis(Point::new(centroid), k);
    }
    let mut cov = Matrix::zeros(n, n);
    for p in pts {
        let d = sub(p, &centroid);
        cov.add_outer(1.0, &d, &d);
    }
    let eig = SymEigen::new(&cov);
    let mut vecs: Vec<Vec<f64>> = eig.vectors.into_iter().take(k).collect();
    for v in vecs.iter_mut() {
        sign_normalize(v);
    }
    AffinePlane { base: Point::new(centroid), frame: Frame::from_trusted(vecs, Orientation::Positive) }
}

fn orient_for(plane: AffinePlane, form: Option<&CalibrationForm>, at: &[f64]) -> (AffinePlane, Option<f64>) {
    match form {
        Some(f) if f.k == plane.k() && f.n == plane.n() => {
            let v = f.evaluate_frame(at, &plane.frame).unwrap_or(0.0);
            if v < 0.0 {
                (plane.reversed(), Some(-v))
            } else {
                (plane, Some(v))
            }
        }
        _ => (plane, None),
    }
}

/// Best-fit plane of the samples in the open ball.
pub fn best_fit_plane(cloud: &PointCloud, ball: &Ball, form: Option<&CalibrationForm>) -> Result<PlaneFit> {
    let idx = cloud.indices_in(&ball.center, ball.radius, true);
    if idx.is_empty() {
        return Err(Error::EmptyBall);
    }
    Ok(fit_indices(cloud, &idx, ball, form).0)
}

fn fit_indices(cloud: &PointCloud, idx: &[usize], ball: &Ball, form: Option<&CalibrationForm>) -> (PlaneFit, Option<f64>) {
    let pts: Vec<&[f64]> = idx.iter().map(|&i| cloud.points[i].coords()).collect();
    let plane = fit_plane(&pts, cloud.k, cloud.n);
    let (plane, calib) = orient_for(plane, form, &ball.center);
    let dev = pts.iter().map(|p| plane.dist(p)).fold(0.0, f64::max);
    let fit = PlaneFit { plane, delta_actual: dev / ball.radius, count: idx.len(), degenerate: idx.len() < cloud.k + 1 };
    (fit, calib)
}

struct Greedy {
    chosen: Vec<usize>,
    basis: Vec<Vec<f64>>,
    /// Largest residual at the failing step, if any.
    fail_width: Option<f64>,
}

/// Farthest-point greedy from `seed`: each step adds the sample farthest
/// from the current affine span, failing when that distance is below
/// `thresh`. On failure every sample lies within `fail_width` of the span.
fn greedy(pts: &[&[f64]], seed: usize, k: usize, thresh: f64) -> Greedy {
    let e0 = pts[seed];
    let n = e0.len();
    let mut resid: Vec<f64> = Vec::with_capacity(pts.len() * n);
    for p in pts {
        resid.extend(p.iter().zip(e0).map(|(a, b)| a - b));
    }
    let mut chosen = vec![seed];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for _ in 0..k {
        let mut best = (0usize, -1.0);
        for (i, r) in resid.chunks_exact(n).enumerate() {
            let d = dot(r, r);
            if d > best.1 {
                best = (i, d);
            }
        }
        let width = sqrt(best.1.max(0.0));
        if width < thresh || width <= 0.0 {
            return Greedy { chosen, basis, fail_width: Some(width) };
        }
        let mut e = resid[best.0 * n..(best.0 + 1) * n].to_vec();
        // reorthogonalize against the basis before normalizing
        for b in &basis {
            let c = dot(b, &e);
            axpy(&mut e, -c, b);
        }
        let len = norm(&e);
        for x in e.iter_mut() {
            *x /= len;
        }
        for r in resid.chunks_exact_mut(n) {
            let c = dot(&e, r);
            axpy(r, -c, &e);
        }
        chosen.push(best.0);
        basis.push(e);
    }
    Greedy { chosen, basis, fail_width: None }
}

fn min_span_distance(pts: &[&[f64]], tuple: &[usize]) -> f64 {
    let refs: Vec<&[f64]> = tuple.iter().map(|&i| pts[i]).collect();
    crate::geometry::span_distances(&refs).into_iter().fold(f64::INFINITY, f64::min)
}

fn stride_sample(len: usize, cap: usize) -> Vec<usize> {
    if len <= cap {
        return (0..len).collect();
    }
    (0..cap).map(|i| i * len / cap).collect()
}

pub(crate) enum Search {
    Good(Vec<usize>),
    Bad { tuple: Vec<usize>, tube: Tube },
}

const SUBSAMPLE: usize = 384;
const SWAP_CANDIDATES: usize = 96;

/// Looks for a `(k, eps)`-independent tuple among `pts` at scale `r`.
/// A failure always carries a `(k-1)`-plane whose tube of width `< eps r`
/// holds every sample.
pub(crate) fn independence_search(pts: &[&[f64]], k: usize, n: usize, eps: f64, r: f64) -> Search {
    let thresh = eps * r;
    if pts.len() > SUBSAMPLE {
        let sub_idx = stride_sample(pts.len(), SUBSAMPLE);
        let sub_pts: Vec<&[f64]> = sub_idx.iter().map(|&i| pts[i]).collect();
        if let Search::Good(t) = search_full(&sub_pts, k, n, thresh, false) {
            return Search::Good(t.into_iter().map(|i| sub_idx[i]).collect());
        }
    }
    search_full(pts, k, n, thresh, true)
}

fn search_full(pts: &[&[f64]], k: usize, n: usize, thresh: f64, certify: bool) -> Search {
    let len = pts.len();
    let mut centroid = vec![0.0; n];
    for p in pts {
        axpy(&mut centroid, 1.0 / len as f64, p);
    }
    let far = |from: &[f64]| -> usize {
        let mut best = (0, -1.0);
        for (i, p) in pts.iter().enumerate() {
            let d = dist(p, from);
            if d > best.1 {
                best = (i, d);
            }
        }
        best.0
    };
    let s1 = far(&centroid);
    let s2 = far(pts[s1]);
    let mut near_c = (0, f64::INFINITY);
    for (i, p) in pts.iter().enumerate() {
        let d = dist(p, &centroid);
        if d < near_c.1 {
            near_c = (i, d);
        }
    }
    let mut seeds = vec![s1, s2, near_c.0];
    seeds.dedup();

    let mut failures: Vec<Greedy> = Vec::new();
    for &s in &seeds {
        let g = greedy(pts, s, k, thresh);
        if g.fail_width.is_none() {
            return Search::Good(g.chosen);
        }
        failures.push(g);
    }

    // local swaps on a full-length tuple built from the best failure
    let mut tuple = failures.iter().max_by(|a, b| a.chosen.len().cmp(&b.chosen.len())).map(|g| g.chosen.clone()).unwrap_or_default();
    let cand = stride_sample(len, SWAP_CANDIDATES);
    while tuple.len() < k + 1 {
        let next = cand.iter().copied().find(|c| !tuple.contains(c)).unwrap_or(0);
        tuple.push(next);
    }
    if len > k {
        let mut score = min_span_distance(pts, &tuple);
        for _ in 0..3 {
            let mut improved = false;
            for pos in 0..tuple.len() {
                for &c in &cand {
                    if tuple.contains(&c) {
                        continue;
                    }
                    let old = tuple[pos];
                    tuple[pos] = c;
                    let s = min_span_distance(pts, &tuple);
                    if s > score {
                        score = s;
                        improved = true;
                    } else {
                        tuple[pos] = old;
                    }
                }
            }
            if score >= thresh {
                return Search::Good(tuple);
            }
            if !improved {
                break;
            }
        }
    }

    let g = failures.into_iter().min_by(|a, b| a.fail_width.partial_cmp(&b.fail_width).unwrap_or(core::cmp::Ordering::Equal)).expect("at least one seed");
    let mut directions = g.basis.clone();
    directions.truncate(k.saturating_sub(1));
    let missing = (k - 1).saturating_sub(directions.len());
    if missing > 0 {
        let extra = complement_basis(&directions, n);
        directions.extend(extra.into_iter().take(missing));
    }
    let base = Point::from(pts[g.chosen[0]]);
    let mut tube = Tube { base, directions, width: g.fail_width.unwrap_or(0.0) };
    if certify {
        tube.width = pts.iter().map(|p| tube.dist(p)).fold(0.0, f64::max);
    }
    Search::Bad { tuple: g.chosen, tube }
}

/// Good/bad verdict for the samples in the open ball.
pub fn classify_ball(cloud: &PointCloud, ball: &Ball, eps: f64) -> BallAnalysis {
    classify_ball_with(cloud, ball, eps, None)
}

pub fn classify_ball_with(cloud: &PointCloud, ball: &Ball, eps: f64, form: Option<&CalibrationForm>) -> BallAnalysis {
    let idx = cloud.indices_in(&ball.center, ball.radius, true);
    let (n, k) = (cloud.n, cloud.k);
    if idx.is_empty() {
        let plane = AffinePlane::axis(ball.center.clone(), k);
        let (plane, calib_value) = orient_for(plane, form, &ball.center);
        let tube = Tube { base: ball.center.clone(), directions: Frame::standard(n, k).vectors()[..k - 1].to_vec(), width: 0.0 };
        return BallAnalysis {
            ball: ball.clone(),
            plane,
            delta_actual: 0.0,
            good: false,
            witness: eps_linear_independence(&[], eps, ball),
            calib_value,
            tube: Some(tube),
            count: 0,
            degenerate: true,
        };
    }
    let (fit, calib_value) = fit_indices(cloud, &idx, ball, form);
    let pts: Vec<&[f64]> = idx.iter().map(|&i| cloud.points[i].coords()).collect();
    let (tuple, tube) = match independence_search(&pts, k, n, eps, ball.radius) {
        Search::Good(t) => (t, None),
        Search::Bad { tuple, tube } => (tuple, Some(tube)),
    };
    let witness_pts: Vec<Point> = tuple.iter().map(|&i| Point::from(pts[i])).collect();
    let mut witness = eps_linear_independence(&witness_pts, eps, ball);
    if witness_pts.len() < k + 1 {
        witness.verdict = false;
        witness.slack = witness.slack.min(-eps * ball.radius);
    }
    let good = witness.verdict;
    let tube = if good {
        None
    } else {
        Some(tube.unwrap_or_else(|| {
            // numerically borderline tuple: certify the PCA (k-1)-plane
            let pl = fit_plane(&pts, k.max(2) - 1, n);
            let directions = if k == 1 { Vec::new() } else { pl.frame.vectors().to_vec() };
            let mut t = Tube { base: pl.base.clone(), directions, width: 0.0 };
            t.width = pts.iter().map(|p| t.dist(p)).fold(0.0, f64::max);
            t
        }))
    };
    BallAnalysis {
        ball: ball.clone(),
        plane: fit.plane,
        delta_actual: fit.delta_actual,
        good,
        witness,
        calib_value,
        tube,
        count: idx.len(),
        degenerate: fit.degenerate,
    }
}

/// Verdict only; used on the ladder sweep.
pub fn is_good_ball(cloud: &PointCloud, center: &[f64], radius: f64, eps: f64) -> bool {
    let idx = cloud.indices_in(center, radius, true);
    if idx.len() < cloud.k + 1 {
        return false;
    }
    let pts: Vec<&[f64]> = idx.iter().map(|&i| cloud.points[i].coords()).collect();
    match independence_search(&pts, cloud.k, cloud.n, eps, radius) {
        Search::Good(t) => {
            let refs: Vec<&[f64]> = t.iter().map(|&i| pts[i]).collect();
            crate::geometry::span_distances(&refs).into_iter().fold(f64::INFINITY, f64::min) >= eps * radius
        }
        Search::Bad { .. } => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaReport {
    /// Upper bound on `beta_infty(x, r)`.
    pub value: f64,
    pub points_to_plane: f64,
    /// Sampled sup over the clipped plane plus the sampling correction.
    pub plane_to_points: f64,
    pub plane: AffinePlane,
    pub upper_bound: bool,
}

struct BetaProblem<'a> {
    pts: Vec<&'a [f64]>,
    tree: KdTree,
    ball: Ball,
    k: usize,
}

impl BetaProblem<'_> {
    fn disk_samples(&self, pitch: f64) -> Vec<Vec<f64>> {
        let k = self.k;
        let m = ceil(self.ball.radius / pitch) as i64;
        let mut out = Vec::new();
        let mut idx = vec![-m; k];
        let reach = self.ball.radius + pitch * sqrt(k as f64) / 2.0;
        loop {
            let t: Vec<f64> = idx.iter().map(|&i| i as f64 * pitch).collect();
            if norm(&t) <= reach {
                out.push(t);
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

    /// `(points -> plane, plane -> points)` distances for `plane` clipped to
    /// the ball, the second sampled at `pitch` and corrected upward.
    fn evaluate(&self, plane: &AffinePlane, samples: &[Vec<f64>], pitch: f64) -> (f64, f64) {
        let Some((c, rho)) = plane.clip_disk(&self.ball) else {
            return (f64::INFINITY, f64::INFINITY);
        };
        let to_plane = self.pts.iter().map(|p| crate::geometry::dist_to_clipped_plane(p, plane, &self.ball)).fold(0.0, f64::max);
        let scale = rho / self.ball.radius;
        let mut from_plane: f64 = 0.0;
        for t in samples {
            // sample grid is laid out for the full radius; shrink to rho and clamp
            let mut tt: Vec<f64> = t.iter().map(|x| x * scale).collect();
            let len = norm(&tt);
            if len > rho && len > 0.0 {
                for x in tt.iter_mut() {
                    *x *= rho / len;
                }
            }
            let mut y = c.clone();
            for (e, ti) in plane.frame.vectors().iter().zip(&tt) {
                axpy(&mut y, *ti, e);
            }
            let d = self.tree.nearest(&y).map_or(f64::INFINITY, |x| x.1);
            from_plane = from_plane.max(d);
        }
        let correction = pitch * scale * sqrt(self.k as f64) / 2.0;
        (to_plane, from_plane + correction)
    }
}

fn perturbed(plane: &AffinePlane, normals: &[Vec<f64>], param: usize, step: f64) -> AffinePlane {
    let k = plane.k();
    let mut base = plane.base.coords().to_vec();
    let mut vecs = plane.frame.vectors().to_vec();
    let m = normals.len();
    if param < m {
        axpy(&mut base, step, &normals[param]);
    } else {
        let q = param - m;
        let (i, j) = (q / m, q % m);
        if i < k {
            let (c, s) = (cos(step), sin(step));
            let e = vecs[i].clone();
            let u = &normals[j];
            vecs[i] = e.iter().zip(u).map(|(a, b)| c * a + s * b).collect();
        }
    }
    AffinePlane { base: Point::new(base), frame: Frame::from_trusted(vecs, plane.frame.orientation()) }
}

/// Two-sided beta number of the samples in the closed ball, from the PCA
/// plane refined by pattern search over offsets and small rotations.
pub fn beta_infty(cloud: &PointCloud, x: &[f64], r: f64) -> Result<BetaReport> {
    if !(r > 0.0) {
        return Err(Error::ParamOutOfRange("beta radius must be positive"));
    }
    let ball = Ball::new(Point::from(x), r)?;
    let idx = cloud.indices_in(x, r, false);
    if idx.is_empty() {
        return Err(Error::EmptyBall);
    }
    let (n, k) = (cloud.n, cloud.k);
    let pts: Vec<&[f64]> = idx.iter().map(|&i| cloud.points[i].coords()).collect();
    let tree = KdTree::from_points(n, &pts);
    let prob = BetaProblem { pts, tree, ball, k };
    let start = fit_plane(&prob.pts, k, n);
    if k == n {
        let samples = prob.disk_samples(r / 32.0);
        let (a, b) = prob.evaluate(&start, &samples, r / 32.0);
        return Ok(BetaReport { value: a.max(b) / r, points_to_plane: a / r, plane_to_points: b / r, plane: start, upper_bound: true });
    }
    let coarse_pitch = r / if k == 1 { 48.0 } else { 12.0 };
    let fine_pitch = r / if k == 1 { 256.0 } else { 40.0 };
    let coarse = prob.disk_samples(coarse_pitch);
    let objective = |p: &AffinePlane| {
        let (a, b) = prob.evaluate(p, &coarse, coarse_pitch);
        a.max(b)
    };

    let refine = |mut best: AffinePlane, mut best_val: f64| {
        let mut step_off = 0.25 * r;
        let mut step_rot = 0.25;
        while step_off > 1e-4 * r {
            let normals = best.frame.complement();
            let params = normals.len() * (1 + k);
            let mut improved = false;
            for p in 0..params {
                let step = if p < normals.len() { step_off } else { step_rot };
                for s in [step, -step] {
                    let cand = perturbed(&best, &normals, p, s);
                    let v = objective(&cand);
                    if v < best_val {
                        best_val = v;
                        best = cand;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step_off *= 0.5;
                step_rot *= 0.5;
            }
        }
        (best, best_val)
    };

    // starts: the PCA plane, its translate through the center, and coarse
    // rotations of both toward each normal direction
    let mut centered = start.clone();
    centered.base = Point::from(x);
    let mut starts = vec![start.clone(), centered.clone()];
    let normals = start.frame.complement();
    let m = normals.len();
    for base in [&start, &centered] {
        for q in 0..k * m {
            for a in [-3, -2, -1, 1, 2, 3, 4] {
                starts.push(perturbed(base, &normals, m + q, a as f64 * PI / 8.0));
            }
        }
    }
    let mut scored: Vec<(f64, usize)> = starts.iter().enumerate().map(|(i, p)| (objective(p), i)).collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let mut best = start.clone();
    let mut best_val = f64::INFINITY;
    for &(v, i) in scored.iter().take(3) {
        let (p, pv) = refine(starts[i].clone(), v);
        if pv < best_val {
            best = p;
            best_val = pv;
        }
    }
    let fine = prob.disk_samples(fine_pitch);
    let (a, b) = prob.evaluate(&best, &fine, fine_pitch);
    Ok(BetaReport { value: a.max(b) / r, points_to_plane: a / r, plane_to_points: b / r, plane: best, upper_bound: true })
}

/// Paper-level scale constants linking `r_x` to the partition and plane
/// scales: `r~ = (r_x v r) / tilde_divisor`, `r- = bar_factor * r~`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConstants {
    pub tilde_divisor: f64,
    pub bar_factor: f64,
}

impl ScaleConstants {
    /// `r~ = (r_x v r)/100`, `r- = 10^4 r~`.
    pub const PAPER: Self = Self { tilde_divisor: 100.0, bar_factor: 1e4 };

    /// Profile usable on finite samples: `r~ = (r_x v r)/5`, `r- = 10 r~`.
    /// `r~` is then 1-Lipschitz, still below the covering threshold of 2.
    pub const COMPUTATIONAL: Self = Self { tilde_divisor: 5.0, bar_factor: 10.0 };

    /// Lipschitz constant of `r~`.
    pub fn tilde_lipschitz(&self) -> f64 {
        5.0 / self.tilde_divisor
    }
}

impl Default for ScaleConstants {
    fn default() -> Self {
        Self::PAPER
    }
}

/// Vitali-selected centers with their `s` values, and the Lipschitz
/// extension `r_y` to the whole space.
#[derive(Debug, Clone)]
pub struct RadiusField {
    pub centers: Vec<Point>,
    /// Cloud index of each center (empty when built directly).
    pub center_ids: Vec<usize>,
    pub s_values: Vec<f64>,
    /// Largest bad ladder scale below `s` for each center, equal to `s` when
    /// the top scale is already bad, and `r0` for good centers.
    pub lower: Vec<f64>,
    pub r0: f64,
    /// `r_y` never exceeds this (`2 r_max`).
    pub cap: f64,
    /// Per cloud point: `s_x` and its ladder bracket.
    pub point_s: Vec<f64>,
    pub point_bracket: Vec<(f64, f64)>,
    tree: KdTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadBall {
    pub center_id: usize,
    pub ball: Ball,
    pub s: f64,
}

impl RadiusField {
    pub fn from_centers(centers: Vec<Point>, s_values: Vec<f64>, r0: f64, cap: f64) -> Result<Self> {
        if centers.is_empty() || centers.len() != s_values.len() {
            return Err(Error::InvalidInput("radius field needs one s value per center"));
        }
        let n = centers[0].dim();
        let refs: Vec<&[f64]> = centers.iter().map(|c| c.coords()).collect();
        let tree = KdTree::from_points(n, &refs);
        let lower = s_values.clone();
        Ok(Self { centers, center_ids: Vec::new(), s_values, lower, r0, cap, point_s: Vec::new(), point_bracket: Vec::new(), tree })
    }

    /// `r_y = sup { 0 < s < cap : s_c >= s for all c in C ∩ B_{s/5}(y) }`,
    /// which equals `min(cap, min_c max(5|y - c|, s_c))`.
    pub fn radius(&self, y: &[f64]) -> f64 {
        let best = self.tree.min_by(y, |i, d| ((5.0 * d).max(self.s_values[i]), 0.0), |d| 5.0 * d);
        best.map_or(self.cap, |(_, v)| v.0.min(self.cap))
    }

    /// `(r_y v r) / D`
    pub fn tilde(&self, y: &[f64], r: f64, consts: &ScaleConstants) -> f64 {
        self.radius(y).max(r) / consts.tilde_divisor
    }

    /// `bar_factor * r~_y`
    pub fn bar(&self, y: &[f64], r: f64, consts: &ScaleConstants) -> f64 {
        consts.bar_factor * self.tilde(y, r, consts)
    }

    pub fn dist_to_centers(&self, y: &[f64]) -> f64 {
        self.tree.nearest(y).map_or(f64::INFINITY, |x| x.1)
    }

    /// Centers with `s > r0`, as balls of radius equal to the largest bad
    /// ladder scale. Fifth-ball disjointness is inherited from the Vitali
    /// selection since that radius never exceeds `s`.
    pub fn bad_balls(&self) -> Vec<BadBall> {
        (0..self.centers.len())
            .filter(|&i| self.s_values[i] > self.r0 * (1.0 + 1e-12))
            .map(|i| BadBall {
                center_id: self.center_ids.get(i).copied().unwrap_or(i),
                ball: Ball { center: self.centers[i].clone(), radius: self.lower[i] },
                s: self.s_values[i],
            })
            .collect()
    }
}

/// `r_y` at `y`.
pub fn radius_extension(field: &RadiusField, y: &[f64]) -> f64 {
    field.radius(y)
}

/// Ladder sweep for one point: `(s, lower bracket, upper bracket)`.
fn sweep_point(cloud: &PointCloud, x: &[f64], ladder: &ScaleLadder, eps: f64) -> (f64, f64, f64) {
    for (j, &t) in ladder.scales.iter().enumerate() {
        if !is_good_ball(cloud, x, t, eps) {
            return if j == 0 { (t, t, t) } else { (ladder.scales[j - 1], t, ladder.scales[j - 1]) };
        }
    }
    (ladder.r0, ladder.r0, ladder.r0)
}

/// Greedy Vitali selection on `{B_{s_x/5}(x)}`: by `s` descending then
/// index, keeping a point when its fifth-ball is disjoint from (or touches)
/// every kept fifth-ball.
pub fn vitali_select(points: &[Point], s: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
    let n = points.first().map_or(1, |p| p.dim());
    let mut set = BallSet::new(n);
    let mut chosen = Vec::new();
    for i in order {
        if !set.any_reaching(&points[i], s[i], 0.2) {
            set.insert(&points[i], s[i]);
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// `s_x` on the ladder for every sample, then the Vitali selection.
pub fn compute_s_field(cloud: &PointCloud, ladder: &ScaleLadder, eps: f64) -> RadiusField {
    compute_s_field_with(&Sequential, cloud, ladder, eps)
}

pub fn compute_s_field_with<E: Executor>(exec: &E, cloud: &PointCloud, ladder: &ScaleLadder, eps: f64) -> RadiusField {
    let sweeps = exec.map(cloud.points(), |_, p| sweep_point(cloud, p, ladder, eps));
    let point_s: Vec<f64> = sweeps.iter().map(|s| s.0).collect();
    let point_bracket: Vec<(f64, f64)> = sweeps.iter().map(|s| (s.1, s.2)).collect();
    let chosen = vitali_select(cloud.points(), &point_s);
    let centers: Vec<Point> = chosen.iter().map(|&i| cloud.points[i].clone()).collect();
    let s_values: Vec<f64> = chosen.iter().map(|&i| point_s[i]).collect();
    let lower: Vec<f64> = chosen.iter().map(|&i| point_bracket[i].0).collect();
    let refs: Vec<&[f64]> = centers.iter().map(|c| c.coords()).collect();
    let tree = KdTree::from_points(cloud.n, &refs);
    RadiusField { centers, center_ids: chosen, s_values, lower, r0: ladder.r0, cap: 2.0 * ladder.r_max, point_s, point_bracket, tree }
}

/// Per-scale verdict table for one point; the direct oracle for `s_x`.
pub fn classification_sweep(cloud: &PointCloud, x: &[f64], ladder: &ScaleLadder, eps: f64) -> BTreeMap<usize, bool> {
    ladder.scales.iter().enumerate().map(|(j, &t)| (j, is_good_ball(cloud, x, t, eps))).collect()
}
