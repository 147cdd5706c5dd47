//! Maximal center selection and a smooth partition of unity subordinate to
//! the balls `B_{4 r~_a}(x_a)`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, Point};
use crate::index::{BallSet, KdTree};
use crate::linalg::{dist, norm};
use crate::math::sqrt;
use crate::multiscale::{RadiusField, ScaleConstants};

/// Radial profile: 1 on `[0, 1]`, 0 on `[4, inf)`, a quintic smoothstep in
/// between. C² everywhere.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile;

impl BumpProfile {
    pub const INNER: f64 = 1.0;
    pub const OUTER: f64 = 4.0;
    /// `sup |h'|`
    pub const D1_MAX: f64 = 0.625;
    /// `sup |h''|`, attained at `u = (3 - sqrt 3)/6`.
    pub const D2_MAX: f64 = 0.641_500_299_099_584_1;

    fn unit(t: f64) -> Option<f64> {
        if t <= Self::INNER || t >= Self::OUTER {
            None
        } else {
            Some((t - Self::INNER) / (Self::OUTER - Self::INNER))
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= Self::INNER {
            return 1.0;
        }
        match Self::unit(t) {
            Some(u) => 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u)),
            None => 0.0,
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        Self::unit(t).map_or(0.0, |u| -30.0 * u * u * (1.0 - u) * (1.0 - u) / 3.0)
    }

    pub fn d2(&self, t: f64) -> f64 {
        Self::unit(t).map_or(0.0, |u| -60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / 9.0)
    }
}

/// Scalar field of partition radii.
pub trait ScaleField {
    fn scale(&self, y: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> ScaleField for F {
    fn scale(&self, y: &[f64]) -> f64 {
        self(y)
    }
}

/// `r~_y = (r_y v r) / D` from a radius field.
#[derive(Debug, Clone, Copy)]
pub struct TildeField<'a> {
    pub field: &'a RadiusField,
    pub r: f64,
    pub consts: ScaleConstants,
}

impl ScaleField for TildeField<'_> {
    fn scale(&self, y: &[f64]) -> f64 {
        self.field.tilde(y, self.r, &self.consts)
    }
}

/// Ratio window for intersecting `k r~` balls of a `1/20`-Lipschitz field:
/// `w = (1 + k/20) / (1 - k/20)`.
pub fn comparability_window(k: f64) -> Result<f64> {
    if !(0.0..20.0).contains(&k) {
        return Err(Error::ParamOutOfRange("comparability factor must lie in [0, 20)"));
    }
    Ok((1.0 + k / 20.0) / (1.0 - k / 20.0))
}

/// Region the partition must cover.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Every point of the ball; candidates come from an adaptive cube grid.
    Ball(Ball),
    /// The given samples (optionally restricted to a ball), which also serve
    /// as candidates.
    Samples { points: Vec<Point>, clip: Option<Ball> },
}

impl Domain {
    fn dim(&self) -> usize {
        match self {
            Domain::Ball(b) => b.center.dim(),
            Domain::Samples { points, .. } => points.first().map_or(0, |p| p.dim()),
        }
    }
}

/// Centers of the cells of an adaptive dyadic grid over the ball's bounding
/// cube, refined until the cell side is at most `r~(center)/8`.
fn adaptive_grid<F: ScaleField + ?Sized>(ball: &Ball, field: &F) -> Result<Vec<Vec<f64>>> {
    let n = ball.center.dim();
    let root = ball.radius;
    let mut out = Vec::new();
    let mut stack = vec![(ball.center.coords().to_vec(), root)];
    let reach = sqrt(n as f64);
    while let Some((c, half)) = stack.pop() {
        if dist(&c, &ball.center) > ball.radius + half * reach {
            continue;
        }
        let rt = field.scale(&c);
        if !(rt > 0.0 && rt.is_finite()) {
            return Err(Error::InvalidInput("partition radius must be positive and finite"));
        }
        if 2.0 * half <= rt / 8.0 {
            out.push(c);
            continue;
        }
        if out.len() + stack.len() > 4_000_000 {
            return Err(Error::ParamOutOfRange("partition grid too fine for the domain"));
        }
        // children pushed in reverse so they pop in lexicographic order
        for m in (0..(1usize << n)).rev() {
            let child: Vec<f64> = (0..n).map(|d| c[d] + if m >> d & 1 == 1 { half / 2.0 } else { -half / 2.0 }).collect();
            stack.push((child, half / 2.0));
        }
    }
    Ok(out)
}

/// Greedy maximal family of candidates with pairwise disjoint quarter-balls
/// `B_{r~/4}`, larger radii first. The field's Lipschitz constant on the
/// candidates is checked against `lipschitz_bound`; any value below 2
/// guarantees that the full balls cover every candidate.
pub fn select_centers<F: ScaleField + ?Sized>(domain: &Domain, field: &F, lipschitz_bound: f64) -> Result<(Vec<Point>, Vec<f64>)> {
    let n = domain.dim();
    if n == 0 {
        return Err(Error::InvalidInput("empty partition domain"));
    }
    let cands: Vec<Vec<f64>> = match domain {
        Domain::Ball(b) => adaptive_grid(b, field)?,
        Domain::Samples { points, clip } => points.iter().filter(|p| clip.as_ref().is_none_or(|b| b.contains(p))).map(|p| p.coords().to_vec()).collect(),
    };
    if cands.is_empty() {
        return Err(Error::InvalidInput("no partition candidates in the domain"));
    }
    let radii: Vec<f64> = cands.iter().map(|c| field.scale(c)).collect();
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidInput("partition radius must be positive and finite"));
    }
    let refs: Vec<&[f64]> = cands.iter().map(|c| c.as_slice()).collect();
    let tree = KdTree::from_points(n, &refs);
    for (i, c) in cands.iter().enumerate() {
        let mut ok = true;
        tree.visit_within(c, radii[i], false, |j| {
            let d = dist(c, &cands[j]);
            if (radii[i] - radii[j]).abs() > lipschitz_bound * d * (1.0 + 1e-9) + 1e-15 * radii[i] {
                ok = false;
            }
        });
        if !ok {
            return Err(Error::ParamOutOfRange("partition radius field exceeds its Lipschitz bound"));
        }
    }

    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| radii[b].partial_cmp(&radii[a]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut set = BallSet::new(n);
    let mut chosen = Vec::new();
    for i in order {
        if !set.any_reaching(&cands[i], radii[i], 0.25) {
            set.insert(&cands[i], radii[i]);
            chosen.push(i);
        }
    }
    for c in &cands {
        let mut covered = false;
        set.visit_reaching(c, 0.0, 1.0, |_| covered = true);
        if !covered {
            return Err(Error::NotCovered);
        }
    }
    Ok((chosen.iter().map(|&i| Point::new(cands[i].clone())).collect(), chosen.iter().map(|&i| radii[i]).collect()))
}

/// `phi_a = psi_a / sum psi_b` with `psi_a(y) = h(|y - x_a| / r~_a)`.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    centers: Vec<Point>,
    radii: Vec<f64>,
    profile: BumpProfile,
    tree: KdTree,
    max_radius: f64,
}

impl PartitionOfUnity {
    pub fn new(centers: Vec<Point>, radii: Vec<f64>) -> Result<Self> {
        let n = centers.first().map(|c| c.dim()).ok_or(Error::InvalidInput("partition needs a center"))?;
        if centers.len() != radii.len() {
            return Err(Error::InvalidInput("one radius per partition center"));
        }
        if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidInput("partition radius must be positive and finite"));
        }
        let refs: Vec<&[f64]> = centers.iter().map(|c| c.coords()).collect();
        let tree = KdTree::from_points(n, &refs);
        let max_radius = radii.iter().copied().fold(0.0, f64::max);
        Ok(Self { centers, radii, profile: BumpProfile, tree, max_radius })
    }

    pub fn build<F: ScaleField + ?Sized>(domain: &Domain, field: &F, lipschitz_bound: f64) -> Result<Self> {
        let (c, r) = select_centers(domain, field, lipschitz_bound)?;
        Self::new(c, r)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn profile(&self) -> BumpProfile {
        self.profile
    }

    fn psi(&self, a: usize, y: &[f64]) -> f64 {
        self.profile.value(dist(y, &self.centers[a]) / self.radii[a])
    }

    /// `(a, psi_a(y))` for every center whose support contains `y`.
    pub fn bumps(&self, y: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.tree.visit_within(y, BumpProfile::OUTER * self.max_radius, true, |a| {
            let v = self.psi(a, y);
            if v > 0.0 {
                out.push((a, v));
            }
        });
        out.sort_unstable_by_key(|x| x.0);
        out
    }

    /// Nonzero weights at `y`, ascending by center index.
    pub fn weights(&self, y: &[f64]) -> Result<Vec<(usize, f64)>> {
        let mut b = self.bumps(y);
        let total: f64 = b.iter().map(|x| x.1).sum();
        if total <= 0.0 {
            return Err(Error::NotCovered);
        }
        for x in b.iter_mut() {
            x.1 /= total;
        }
        Ok(b)
    }

    pub fn weight(&self, a: usize, y: &[f64]) -> Result<f64> {
        Ok(self.weights(y)?.into_iter().find(|x| x.0 == a).map_or(0.0, |x| x.1))
    }

    /// Partition-weighted radius at `y`.
    pub fn local_radius(&self, y: &[f64]) -> Result<f64> {
        Ok(self.weights(y)?.iter().map(|&(a, w)| w * self.radii[a]).sum())
    }

    /// Whether `y` lies in some `B_{r~_a}(x_a)`.
    pub fn covers(&self, y: &[f64]) -> bool {
        let mut hit = false;
        self.tree.visit_within(y, self.max_radius, true, |a| {
            if dist(y, &self.centers[a]) < self.radii[a] {
                hit = true;
            }
        });
        hit
    }

    /// `min_{a != b} |x_a - x_b| - (r~_a + r~_b)/4`, over pairs close enough
    /// to matter; `inf` for a single center.
    pub fn quarter_slack(&self) -> f64 {
        let mut slack = f64::INFINITY;
        for (a, c) in self.centers.iter().enumerate() {
            self.tree.visit_within(c, (self.radii[a] + self.max_radius) / 4.0 + 1e-300, false, |b| {
                if b != a {
                    slack = slack.min(c.dist(&self.centers[b]) - (self.radii[a] + self.radii[b]) / 4.0);
                }
            });
        }
        slack
    }
}

pub fn evaluate_partition(pou: &PartitionOfUnity, y: &[f64]) -> Result<Vec<(usize, f64)>> {
    pou.weights(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub order: usize,
    /// `max r~_a^j |d^j phi_a|` over probes and centers (operator norms).
    pub max_scaled: f64,
    pub probe: usize,
    pub center: usize,
}

/// Scaled finite-difference derivative sup of the weights.
pub fn derivative_bound_report(pou: &PartitionOfUnity, probes: &[Point], order: usize) -> Result<DerivativeReport> {
    if order == 0 || order > 2 {
        return Err(Error::ParamOutOfRange("derivative order must be 1 or 2"));
    }
    let mut rep = DerivativeReport { order, max_scaled: 0.0, probe: 0, center: 0 };
    for (pi, y) in probes.iter().enumerate() {
        let n = y.dim();
        for (a, _) in pou.bumps(y) {
            let r = pou.radii[a];
            let h = 1e-5 * r;
            let f = |d: &[(usize, f64)]| -> Result<f64> {
                let mut z = y.coords().to_vec();
                for &(i, s) in d {
                    z[i] += s * h;
                }
                pou.weight(a, &z)
            };
            let value = if order == 1 {
                let mut g = vec![0.0; n];
                for (i, gi) in g.iter_mut().enumerate() {
                    *gi = (f(&[(i, 1.0)])? - f(&[(i, -1.0)])?) / (2.0 * h);
                }
                r * norm(&g)
            } else {
                let f0 = f(&[])?;
                let mut hess = crate::linalg::Matrix::zeros(n, n);
                for i in 0..n {
                    hess[(i, i)] = (f(&[(i, 1.0)])? - 2.0 * f0 + f(&[(i, -1.0)])?) / (h * h);
                    for j in (i + 1)..n {
                        let v =
                            (f(&[(i, 1.0), (j, 1.0)])? - f(&[(i, 1.0), (j, -1.0)])? - f(&[(i, -1.0), (j, 1.0)])? + f(&[(i, -1.0), (j, -1.0)])?) / (4.0 * h * h);
                        hess[(i, j)] = v;
                        hess[(j, i)] = v;
                    }
                }
                r * r * hess.sym_spectral_norm()
            };
            if value > rep.max_scaled {
                rep = DerivativeReport { order, max_scaled: value, probe: pi, center: a };
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> Vec<Point> {
        points.iter().map(|&x| Point::new(vec![x])).collect()
    }

    #[test]
    fn profile_joints_are_c2() {
        let p = BumpProfile;
        let e = 1e-7;
        for t in [1.0, 4.0] {
            assert!((p.value(t - e) - p.value(t + e)).abs() < 1e-12);
            assert!((p.d1(t - e) - p.d1(t + e)).abs() < 1e-9);
            assert!((p.d2(t - e) - p.d2(t + e)).abs() < 1e-6);
        }
        let mut m1: f64 = 0.0;
        let mut m2: f64 = 0.0;
        for i in 0..=30_000 {
            let t = 1.0 + 3.0 * i as f64 / 30_000.0;
            let v = p.value(t);
            assert!((0.0..=1.0).contains(&v));
            m1 = m1.max(p.d1(t).abs());
            m2 = m2.max(p.d2(t).abs());
            // derivative agrees with the value by central differences
            let h = 1e-6;
            assert!(((p.value(t + h) - p.value(t - h)) / (2.0 * h) - p.d1(t)).abs() < 1e-8);
        }
        assert!((m1 - BumpProfile::D1_MAX).abs() < 1e-9);
        assert!((m2 - BumpProfile::D2_MAX).abs() < 1e-6);
    }

    #[test]
    fn constant_field_packing_on_interval() {
        let domain = Domain::Ball(Ball::new(Point::new(vec![0.0]), 1.0).unwrap());
        let (c, r) = select_centers(&domain, &|_: &[f64]| 0.25, 0.05).unwrap();
        for i in 0..c.len() {
            assert_eq!(r[i], 0.25);
            for j in (i + 1)..c.len() {
                assert!(c[i].dist(&c[j]) >= 0.125);
            }
        }
        let pou = PartitionOfUnity::new(c, r).unwrap();
        for i in 0..=10_000 {
            let y = [-1.0 + 2.0 * i as f64 / 10_000.0];
            assert!(pou.covers(&y), "{y:?}");
        }
    }

    #[test]
    fn random_field_coverage() {
        let field = |y: &[f64]| 0.1 + 0.04 * (y[0] + 0.5 * y[1]).abs();
        let domain = Domain::Ball(Ball::new(Point::origin(2), 1.0).unwrap());
        let pou = PartitionOfUnity::build(&domain, &field, 0.05).unwrap();
        assert!(pou.quarter_slack() >= 0.0);
        for i in 0..=100 {
            for j in 0..=100 {
                let y = [-1.0 + i as f64 / 50.0, -1.0 + j as f64 / 50.0];
                if y[0].hypot(y[1]) <= 1.0 {
                    assert!(pou.covers(&y));
                    let s: f64 = pou.weights(&y).unwrap().iter().map(|x| x.1).sum();
                    assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn two_point_domain() {
        let domain = Domain::Samples { points: line(&[0.0, 0.3]), clip: None };
        let (c, r) = select_centers(&domain, &|_: &[f64]| 0.2, 0.05).unwrap();
        assert!(c.len() <= 2);
        let pou = PartitionOfUnity::new(c, r).unwrap();
        assert!(pou.covers(&[0.0]) && pou.covers(&[0.3]));
    }

    #[test]
    fn steep_field_is_rejected() {
        let domain = Domain::Samples { points: line(&[0.0, 0.01]), clip: None };
        let f = |y: &[f64]| 0.1 + y[0];
        assert!(select_centers(&domain, &f, 0.05).is_err());
    }

    #[test]
    fn isolated_center_has_unit_weight() {
        let pou = PartitionOfUnity::new(line(&[0.0, 1.0]), vec![0.1, 0.1]).unwrap();
        assert_eq!(pou.weights(&[0.0]).unwrap(), vec![(0, 1.0)]);
        assert_eq!(pou.weights(&[5.0]), Err(Error::NotCovered));
    }

    #[test]
    fn symmetric_midpoint() {
        let pou = PartitionOfUnity::new(line(&[-0.2, 0.2]), vec![0.1, 0.1]).unwrap();
        assert_eq!(pou.weights(&[0.0]).unwrap(), vec![(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn support_is_inside_four_radii() {
        let pou = PartitionOfUnity::new(line(&[0.0, 0.35]), vec![0.1, 0.1]).unwrap();
        for i in 0..=1000 {
            let y = [-0.5 + 1.5 * i as f64 / 1000.0];
            if let Ok(w) = pou.weights(&y) {
                for (a, _) in w {
                    assert!(dist(&y, &pou.centers()[a]) < 4.0 * pou.radii()[a]);
                }
            }
        }
    }

    #[test]
    fn scaled_derivatives_do_not_grow_under_refinement() {
        let mut sups = Vec::new();
        for rt in [0.1, 0.05, 0.025] {
            let domain = Domain::Ball(Ball::new(Point::new(vec![0.0]), 1.0).unwrap());
            let pou = PartitionOfUnity::build(&domain, &|_: &[f64]| rt, 0.05).unwrap();
            let probes: Vec<Point> = (0..400).map(|i| Point::new(vec![-0.5 + i as f64 / 400.0])).collect();
            sups.push(derivative_bound_report(&pou, &probes, 1).unwrap().max_scaled);
            let second = derivative_bound_report(&pou, &probes, 2).unwrap().max_scaled;
            assert!(second.is_finite());
        }
        for s in &sups[1..] {
            assert!((s / sups[0] - 1.0).abs() < 0.02, "{sups:?}");
        }
    }

    #[test]
    fn flat_weight_region_has_zero_derivative() {
        let pou = PartitionOfUnity::new(line(&[0.0, 10.0]), vec![0.1, 0.1]).unwrap();
        let rep = derivative_bound_report(&pou, &[Point::new(vec![0.01])], 1).unwrap();
        assert_eq!(rep.max_scaled, 0.0);
    }

    #[test]
    fn comparability_window_values() {
        assert_eq!(comparability_window(0.0).unwrap(), 1.0);
        assert!((comparability_window(4.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(comparability_window(20.0).is_err());
    }
}
