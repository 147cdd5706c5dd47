//! Points, oriented frames, affine planes, projectors and the quantitative
//! independence tests built on them.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dist, dot, norm, sub, Matrix};
use crate::math::{cos, sin, sqrt, PI};

/// Tolerance for frame orthonormality.
pub const FRAME_TOL: f64 = 1e-12;
/// Tolerances for projector symmetry and idempotence.
pub const SYMMETRY_TOL: f64 = 1e-12;
pub const IDEMPOTENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn origin(n: usize) -> Self {
        Self { coords: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|x| x.is_finite())
    }

    pub fn dist(&self, other: &[f64]) -> f64 {
        dist(&self.coords, other)
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.coords
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

impl From<&[f64]> for Point {
    fn from(coords: &[f64]) -> Self {
        Self { coords: coords.to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }
}

/// Ordered orthonormal k-frame in `R^n` with an orientation sign.
///
/// The oriented frame is `(sign * v_1, v_2, ..., v_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    vectors: Vec<Vec<f64>>,
    orientation: Orientation,
}

impl Frame {
    /// Validates orthonormality to [`FRAME_TOL`].
    pub fn new(vectors: Vec<Vec<f64>>, orientation: Orientation) -> Result<Self> {
        let k = vectors.len();
        let n = vectors.first().map_or(0, |v| v.len());
        if k == 0 || n == 0 || k > n {
            return Err(Error::InvalidInput("frame needs 1 <= k <= n"));
        }
        for v in &vectors {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: v.len() });
            }
        }
        for i in 0..k {
            for j in i..k {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(&vectors[i], &vectors[j]) - target).abs() > FRAME_TOL {
                    return Err(Error::InvalidInput("frame vectors are not orthonormal"));
                }
            }
        }
        Ok(Self { vectors, orientation })
    }

    /// First `k` standard basis vectors of `R^n`.
    pub fn standard(n: usize, k: usize) -> Self {
        assert!(1 <= k && k <= n);
        let vectors = (0..k).map(|i| crate::linalg::unit_vector(n, i)).collect();
        Self { vectors, orientation: Orientation::Positive }
    }

    pub(crate) fn from_trusted(vectors: Vec<Vec<f64>>, orientation: Orientation) -> Self {
        Self { vectors, orientation }
    }

    pub fn k(&self) -> usize {
        self.vectors.len()
    }

    pub fn n(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn reversed(&self) -> Self {
        Self { vectors: self.vectors.clone(), orientation: self.orientation.flipped() }
    }

    /// Frame vectors with the orientation sign folded into the first one.
    pub fn oriented_vectors(&self) -> Vec<Vec<f64>> {
        let mut out = self.vectors.clone();
        if self.orientation == Orientation::Negative {
            for x in out[0].iter_mut() {
                *x = -*x;
            }
        }
        out
    }

    /// Coordinates of `v` in the frame (no orientation sign).
    pub fn coordinates(&self, v: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|e| dot(e, v)).collect()
    }

    /// `sum_i t_i e_i`
    pub fn combine(&self, t: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (e, ti) in self.vectors.iter().zip(t) {
            axpy(&mut out, *ti, e);
        }
        out
    }

    pub fn projector(&self) -> ProjectionOperator {
        ProjectionOperator { matrix: Matrix::outer_sum(&self.vectors, self.n()) }
    }

    /// Orthonormal basis of the orthogonal complement, deterministic: the
    /// standard basis vectors are swept in order and kept when they leave a
    /// residual of norm above 1/2 after reorthogonalization.
    pub fn complement(&self) -> Vec<Vec<f64>> {
        complement_basis(&self.vectors, self.n())
    }
}

/// Completes an orthonormal family to a basis of `R^n` and returns the new
/// vectors only.
pub fn complement_basis(family: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = family.to_vec();
    let mut added = Vec::new();
    let mut candidates: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let r: f64 = basis.iter().map(|b| b[i] * b[i]).sum();
            (1.0 - r, i)
        })
        .collect();
    // prefer the axes with the largest residual
    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(core::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    for (_, i) in candidates {
        if basis.len() == n {
            break;
        }
        let mut v = crate::linalg::unit_vector(n, i);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &v);
                axpy(&mut v, -c, b);
            }
        }
        let len = norm(&v);
        if len > 1e-6 {
            for x in v.iter_mut() {
                *x /= len;
            }
            basis.push(v.clone());
            added.push(v);
        }
    }
    added
}

/// `base + span(frame)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePlane {
    pub base: Point,
    pub frame: Frame,
}

impl AffinePlane {
    pub fn new(base: Point, frame: Frame) -> Result<Self> {
        if base.dim() != frame.n() {
            return Err(Error::DimensionMismatch { expected: frame.n(), found: base.dim() });
        }
        Ok(Self { base, frame })
    }

    /// Coordinate k-plane `span(e_1..e_k)` through `base`.
    pub fn axis(base: Point, k: usize) -> Self {
        let n = base.dim();
        Self { base, frame: Frame::standard(n, k) }
    }

    pub fn k(&self) -> usize {
        self.frame.k()
    }

    pub fn n(&self) -> usize {
        self.base.dim()
    }

    /// Local coordinates of the orthogonal projection of `y`.
    pub fn local(&self, y: &[f64]) -> Vec<f64> {
        self.frame.coordinates(&sub(y, &self.base))
    }

    pub fn from_local(&self, t: &[f64]) -> Vec<f64> {
        let mut out = self.base.coords().to_vec();
        for (e, ti) in self.frame.vectors().iter().zip(t) {
            axpy(&mut out, *ti, e);
        }
        out
    }

    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        self.from_local(&self.local(y))
    }

    /// Component of `y - base` orthogonal to the plane.
    pub fn normal_part(&self, y: &[f64]) -> Vec<f64> {
        let mut d = sub(y, &self.base);
        for e in self.frame.vectors() {
            let c = dot(e, &d);
            axpy(&mut d, -c, e);
        }
        d
    }

    pub fn dist(&self, y: &[f64]) -> f64 {
        norm(&self.normal_part(y))
    }

    pub fn reversed(&self) -> Self {
        Self { base: self.base.clone(), frame: self.frame.reversed() }
    }

    /// Intersection with a closed ball as a `(center, radius)` disk in the
    /// plane; `None` when the plane misses the ball.
    pub fn clip_disk(&self, ball: &Ball) -> Option<(Vec<f64>, f64)> {
        let c = self.project(&ball.center);
        let h = dist(&c, &ball.center);
        if h > ball.radius {
            return None;
        }
        Some((c, sqrt((ball.radius * ball.radius - h * h).max(0.0))))
    }
}

/// Symmetric projector matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOperator {
    matrix: Matrix,
}

impl ProjectionOperator {
    /// Validates symmetry, idempotence and integral trace.
    pub fn new(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidInput("projector must be square"));
        }
        if matrix.asymmetry() > SYMMETRY_TOL {
            return Err(Error::InvalidInput("projector is not symmetric"));
        }
        if matrix.mul(&matrix).sub(&matrix).max_abs() > IDEMPOTENCE_TOL {
            return Err(Error::InvalidInput("projector is not idempotent"));
        }
        let tr = matrix.trace();
        if (tr - crate::math::round(tr)).abs() > IDEMPOTENCE_TOL {
            return Err(Error::InvalidInput("projector trace is not an integer"));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn rank(&self) -> usize {
        crate::math::round(self.matrix.trace()).max(0.0) as usize
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(v)
    }

    pub fn complement(&self) -> Self {
        let mut m = Matrix::identity(self.n());
        m.add_scaled(-1.0, &self.matrix);
        Self { matrix: m }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::ParamOutOfRange("ball radius must be positive"));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.center.dist(y) <= self.radius
    }

    pub fn contains_open(&self, y: &[f64]) -> bool {
        self.center.dist(y) < self.radius
    }
}

/// Gram-Schmidt report: `inverse` holds the coefficients expressing each
/// output vector in the inputs, `e_hat_j = sum_i inverse[i][j] v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoReport {
    pub inverse: Matrix,
    /// Largest `|lambda|` among the coefficients above.
    pub max_lambda: f64,
    /// Smallest `c` with `|lambda_i| <= c |p|` for every `p` in the span.
    pub coefficient_bound: f64,
    pub min_pivot: f64,
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
///
/// Fails with `DegenerateInput` as soon as the normal component of an input
/// drops below `eps * scale`.
pub fn orthonormalize(vectors: &[Vec<f64>], eps: f64, scale: f64) -> Result<(Frame, OrthoReport)> {
    let k = vectors.len();
    if k == 0 {
        return Err(Error::InvalidInput("no vectors to orthonormalize"));
    }
    let n = vectors[0].len();
    if k > n {
        return Err(Error::InvalidInput("more vectors than ambient dimensions"));
    }
    let threshold = eps * scale;
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    // v_j = sum_i r[i][j] q_i
    let mut r = Matrix::zeros(k, k);
    let mut min_pivot = f64::INFINITY;
    for (j, v) in vectors.iter().enumerate() {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &w);
                r[(i, j)] += c;
                axpy(&mut w, -c, qi);
            }
        }
        let pivot = norm(&w);
        if pivot < threshold || pivot == 0.0 {
            return Err(Error::DegenerateInput { index: j, pivot, threshold });
        }
        min_pivot = min_pivot.min(pivot);
        r[(j, j)] = pivot;
        for x in w.iter_mut() {
            *x /= pivot;
        }
        q.push(w);
    }
    // back substitution for R^{-1} (upper triangular)
    let mut inv = Matrix::zeros(k, k);
    for col in 0..k {
        for i in (0..=col).rev() {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for l in (i + 1)..=col {
                s -= r[(i, l)] * inv[(l, col)];
            }
            inv[(i, col)] = s / r[(i, i)];
        }
    }
    let max_lambda = inv.max_abs();
    let coefficient_bound = (0..k).map(|i| norm(inv.row(i))).fold(0.0, f64::max);
    Ok((Frame::from_trusted(q, Orientation::Positive), OrthoReport { inverse: inv, max_lambda, coefficient_bound, min_pivot }))
}

/// Quantitative spanning test for `k+1` points at scale `ball.radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceWitness {
    pub points: Vec<Point>,
    pub eps: f64,
    pub scale: f64,
    pub verdict: bool,
    /// `min_i dist(e_i, e_0 + span(e_1 - e_0, ..)) - eps * scale`
    pub slack: f64,
}

/// Distances `dist(e_i, e_0 + span(e_1 - e_0, .., e_{i-1} - e_0))` for
/// `i = 1..=k`.
pub fn span_distances(points: &[&[f64]]) -> Vec<f64> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::with_capacity(points.len().saturating_sub(1));
    let e0 = points[0];
    for p in &points[1..] {
        let mut w = sub(p, e0);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(&mut w, -c, b);
            }
        }
        let d = norm(&w);
        out.push(d);
        if d > 0.0 {
            for x in w.iter_mut() {
                *x /= d;
            }
            basis.push(w);
        }
    }
    out
}

pub fn eps_linear_independence(points: &[Point], eps: f64, ball: &Ball) -> IndependenceWitness {
    let scale = ball.radius;
    let refs: Vec<&[f64]> = points.iter().map(|p| p.coords()).collect();
    let slack = if points.len() < 2 { -eps * scale } else { span_distances(&refs).into_iter().fold(f64::INFINITY, f64::min) - eps * scale };
    IndependenceWitness { points: points.to_vec(), eps, scale, verdict: slack >= 0.0, slack }
}

/// Operator norm of `P - Q`.
pub fn grassmann_distance(p: &ProjectionOperator, q: &ProjectionOperator) -> Result<f64> {
    if p.n() != q.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), found: q.n() });
    }
    if p.rank() != q.rank() {
        return Err(Error::RankMismatch { left: p.rank(), right: q.rank() });
    }
    Ok(p.matrix().sub(q.matrix()).sym_spectral_norm())
}

/// Target of a one-sided Hausdorff distance.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Points(&'a [Point]),
    Plane(&'a AffinePlane),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HausdorffValue {
    pub value: f64,
    /// No source point fell inside the clip ball; `value` is 0 by convention.
    pub empty_clip: bool,
}

/// Distance from `y` to the disk `plane ∩ ball`; infinite when the plane
/// misses the ball.
pub fn dist_to_clipped_plane(y: &[f64], plane: &AffinePlane, ball: &Ball) -> f64 {
    match plane.clip_disk(ball) {
        None => f64::INFINITY,
        Some((c, rho)) => dist_to_disk(y, plane, &c, rho),
    }
}

fn dist_to_disk(y: &[f64], plane: &AffinePlane, c: &[f64], rho: f64) -> f64 {
    let q = plane.project(y);
    let normal = dist(y, &q);
    let radial = dist(&q, c);
    let over = (radial - rho).max(0.0);
    sqrt(normal * normal + over * over)
}

/// `sup_{a in A ∩ clip} dist(a, B ∩ clip)`.
pub fn one_sided_hausdorff(a: &[Point], b: Target<'_>, clip: &Ball) -> HausdorffValue {
    let inside: Vec<&Point> = a.iter().filter(|p| clip.contains(p)).collect();
    if inside.is_empty() {
        return HausdorffValue { value: 0.0, empty_clip: true };
    }
    let value = match b {
        Target::Plane(plane) => match plane.clip_disk(clip) {
            None => f64::INFINITY,
            Some((c, rho)) => inside.iter().map(|p| dist_to_disk(p, plane, &c, rho)).fold(0.0, f64::max),
        },
        Target::Points(bs) => {
            let targets: Vec<&Point> = bs.iter().filter(|p| clip.contains(p)).collect();
            if targets.is_empty() {
                f64::INFINITY
            } else if targets.len() * inside.len() <= 1 << 16 {
                inside.iter().map(|p| targets.iter().map(|q| p.dist(q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
            } else {
                let refs: Vec<&[f64]> = targets.iter().map(|p| p.coords()).collect();
                let tree = crate::index::KdTree::from_points(clip.center.dim(), &refs);
                inside.iter().map(|p| tree.nearest(p).map_or(f64::INFINITY, |x| x.1)).fold(0.0, f64::max)
            }
        }
    };
    HausdorffValue { value, empty_clip: false }
}

/// Two-sided Hausdorff distance between two finite sets inside `clip`.
pub fn hausdorff(a: &[Point], b: &[Point], clip: &Ball) -> f64 {
    let ab = one_sided_hausdorff(a, Target::Points(b), clip);
    let ba = one_sided_hausdorff(b, Target::Points(a), clip);
    ab.value.max(ba.value)
}

/// Points on the relative boundary of `plane ∩ ball`: the two endpoints for
/// lines, `samples` points on a great circle family otherwise.
fn disk_boundary(plane: &AffinePlane, c: &[f64], rho: f64, samples: usize) -> Vec<Vec<f64>> {
    let k = plane.k();
    let frame = plane.frame.vectors();
    let mut out = Vec::new();
    if k == 1 {
        for s in [-1.0, 1.0] {
            let mut p = c.to_vec();
            axpy(&mut p, s * rho, &frame[0]);
            out.push(p);
        }
        return out;
    }
    // every pair of frame directions contributes a circle
    for i in 0..k {
        for j in (i + 1)..k {
            for m in 0..samples {
                let t = 2.0 * PI * m as f64 / samples as f64;
                let mut p = c.to_vec();
                axpy(&mut p, rho * cos(t), &frame[i]);
                axpy(&mut p, rho * sin(t), &frame[j]);
                out.push(p);
            }
        }
    }
    out
}

/// `sup_{a in P ∩ clip} dist(a, Q ∩ clip)` for two planes. The distance to a
/// convex set is convex, so the sup sits on the boundary of `P ∩ clip`;
/// exact for lines, sampled for `k >= 2`.
pub fn plane_to_plane_hausdorff(p: &AffinePlane, q: &AffinePlane, clip: &Ball) -> HausdorffValue {
    let Some((c, rho)) = p.clip_disk(clip) else {
        return HausdorffValue { value: 0.0, empty_clip: true };
    };
    let Some((cq, rq)) = q.clip_disk(clip) else {
        return HausdorffValue { value: f64::INFINITY, empty_clip: false };
    };
    let value = disk_boundary(p, &c, rho, 720).iter().map(|a| dist_to_disk(a, q, &cq, rq)).fold(0.0, f64::max);
    HausdorffValue { value, empty_clip: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pt(c: &[f64]) -> Point {
        Point::from(c)
    }

    #[test]
    fn orthonormalize_identity() {
        let (frame, rep) = orthonormalize(&[vec![1.0, 0.0], vec![0.0, 1.0]], 0.5, 1.0).unwrap();
        assert_eq!(frame.vectors(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(rep.max_lambda, 1.0);
        assert_eq!(rep.coefficient_bound, 1.0);
    }

    #[test]
    fn orthonormalize_rejects_thin_pivot() {
        let err = orthonormalize(&[vec![1.0, 0.0], vec![1.0, 0.4]], 0.5, 1.0).unwrap_err();
        match err {
            Error::DegenerateInput { index, pivot, .. } => {
                assert_eq!(index, 1);
                assert!((pivot - 0.4).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn orthonormalize_sheared_pair() {
        let inputs = [vec![1.0, 0.0], vec![1.0, 1.0]];
        let (frame, rep) = orthonormalize(&inputs, 0.5, 1.0).unwrap();
        assert!((frame.vectors()[0][0] - 1.0).abs() < 1e-15);
        assert!((frame.vectors()[1][1] - 1.0).abs() < 1e-15);
        // by hand: e1 = v1, e2 = v2 - v1, so R^{-1} = [[1, -1], [0, 1]]
        assert_eq!(rep.max_lambda, 1.0);
        assert!((rep.coefficient_bound - 2f64.sqrt()).abs() < 1e-15);
        assert!(rep.coefficient_bound <= 2f64.sqrt() / 0.5);
        // every unit vector p expands with |lambda_i| <= bound
        for m in 0..360 {
            let t = m as f64 * PI / 180.0;
            let p = [cos(t), sin(t)];
            let lambda = Matrix::from_columns(&inputs).solve(&p).unwrap();
            for l in lambda {
                assert!(l.abs() <= rep.coefficient_bound + 1e-12);
            }
        }
    }

    #[test]
    fn independence_examples() {
        let ball = Ball::new(Point::origin(2), 1.0).unwrap();
        let w = eps_linear_independence(&[pt(&[0.0, 0.0]), pt(&[1.0, 0.0]), pt(&[0.0, 1.0])], 0.5, &ball);
        assert!(w.verdict);
        assert!((w.slack - 0.5).abs() < 1e-15);

        let w = eps_linear_independence(&[pt(&[0.0, 0.0]), pt(&[0.5, 0.0]), pt(&[1.0, 0.0])], 1e-9, &ball);
        assert!(!w.verdict);

        for (t, expect) in [(0.29, false), (0.3, true), (0.31, true)] {
            let w = eps_linear_independence(&[pt(&[0.0, 0.0]), pt(&[1.0, 0.0]), pt(&[0.3, t])], 0.3, &ball);
            assert_eq!(w.verdict, expect, "t = {t}");
        }
    }

    fn line_projector(theta: f64) -> ProjectionOperator {
        Frame::new(vec![vec![cos(theta), sin(theta)]], Orientation::Positive).unwrap().projector()
    }

    #[test]
    fn grassmann_examples() {
        let p = line_projector(0.3);
        assert_eq!(grassmann_distance(&p, &p).unwrap(), 0.0);
        let d = grassmann_distance(&line_projector(0.0), &line_projector(PI / 6.0)).unwrap();
        assert!((d - 0.5).abs() < 1e-14);
        let d = grassmann_distance(&line_projector(0.0), &line_projector(PI / 2.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-14);
        let plane = Frame::standard(2, 2).projector();
        assert!(matches!(grassmann_distance(&p, &plane), Err(Error::RankMismatch { .. })));
    }

    #[test]
    fn hausdorff_examples() {
        let clip = Ball::new(Point::origin(2), 1.0).unwrap();
        let axis = AffinePlane::axis(Point::origin(2), 1);
        let h = one_sided_hausdorff(&[pt(&[0.0, 0.1])], Target::Plane(&axis), &clip);
        assert!((h.value - 0.1).abs() < 1e-15);
        assert!(!h.empty_clip);

        let far = one_sided_hausdorff(&[pt(&[5.0, 0.0])], Target::Plane(&axis), &clip);
        assert!(far.empty_clip);
        assert_eq!(far.value, 0.0);

        let a = AffinePlane::axis(pt(&[0.0, 0.1]), 1);
        let b = AffinePlane::axis(pt(&[0.0, -0.1]), 1);
        let ab = plane_to_plane_hausdorff(&a, &b, &clip).value;
        let ba = plane_to_plane_hausdorff(&b, &a, &clip).value;
        assert!((ab - 0.2).abs() < 1e-12);
        assert!((ba - 0.2).abs() < 1e-12);
    }

    #[test]
    fn parallel_lines_match_dense_samples() {
        // brute force over dense samples of both clipped lines
        let clip = Ball::new(Point::origin(2), 1.0).unwrap();
        let sample = |y: f64| -> Vec<Point> {
            let half = sqrt(1.0 - y * y);
            (0..=2000).map(|i| pt(&[-half + 2.0 * half * i as f64 / 2000.0, y])).collect()
        };
        let h = hausdorff(&sample(0.1), &sample(-0.1), &clip);
        assert!((h - 0.2).abs() < 1e-3);
    }

    #[test]
    fn complement_spans_the_rest() {
        let f = Frame::new(vec![vec![0.6, 0.8, 0.0]], Orientation::Positive).unwrap();
        let c = f.complement();
        assert_eq!(c.len(), 2);
        let mut all = f.vectors().to_vec();
        all.extend(c);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&all[i], &all[j]) - expect).abs() < 1e-14);
            }
        }
    }
}
