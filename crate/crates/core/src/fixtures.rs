//! Deterministic test sets with known ground truth.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AffinePlane, Point};
use crate::linalg::{dist, dot, norm};
use crate::math::{floor, powi, sin, sqrt, unit_ball_volume, PI};

/// Largest admissible bump height ratio.
pub const MAX_ETA: f64 = 0.866_025_403_784_438_6;
/// Wavelength of the tilted-graph fixture.
pub const TILT_WAVELENGTH: f64 = 0.5;

/// Length ratio of one Koch step with height ratio `eta`.
pub fn koch_ratio(eta: f64) -> f64 {
    (2.0 + sqrt(1.0 + 4.0 * eta * eta)) / 3.0
}

/// `eta_j = ratio^j` for `j = 1..=depth`.
pub fn geometric_etas(ratio: f64, depth: usize) -> Vec<f64> {
    (1..=depth).map(|j| powi(ratio, j as i32)).collect()
}

/// `eta_j = 1/sqrt(j + 1)` for `j = 1..=depth`.
pub fn divergent_etas(depth: usize) -> Vec<f64> {
    (1..=depth).map(|j| 1.0 / sqrt(j as f64 + 1.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KochCurve {
    /// Vertices kept after thinning, in curve order.
    pub points: Vec<Point>,
    /// `prod rho(eta_j)` times the base length.
    pub length: f64,
    /// Direct sum over every segment of the level-`depth` polyline.
    pub polyline_length: f64,
    pub vertex_count: u64,
}

struct KochWalk<'a> {
    etas: &'a [f64],
    depth: usize,
    spacing: f64,
    kept: Vec<Point>,
    last: Option<[f64; 2]>,
    count: u64,
}

impl KochWalk<'_> {
    fn emit(&mut self, p: [f64; 2], force: bool) {
        self.count += 1;
        let keep = match self.last {
            None => true,
            Some(q) => force || dist(&p, &q) >= self.spacing * (1.0 - 1e-9),
        };
        if keep {
            self.kept.push(Point::new(p.to_vec()));
            self.last = Some(p);
        }
    }

    /// Emits the vertices after `a` up to and including `b`; returns the
    /// polyline length, summed pairwise along the recursion.
    fn walk(&mut self, a: [f64; 2], b: [f64; 2], level: usize, is_last: bool) -> f64 {
        if level == self.depth {
            let len = dist(&a, &b);
            if self.spacing > 0.0 && self.spacing.is_finite() {
                let pieces = floor(len / self.spacing) as usize;
                for i in 1..pieces {
                    let t = i as f64 / pieces as f64;
                    self.emit([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], false);
                }
            }
            self.emit(b, is_last);
            return len;
        }
        let eta = self.etas[level];
        let d = [b[0] - a[0], b[1] - a[1]];
        let p1 = [a[0] + d[0] / 3.0, a[1] + d[1] / 3.0];
        let p3 = [a[0] + 2.0 * d[0] / 3.0, a[1] + 2.0 * d[1] / 3.0];
        // apex above the middle third, on the left of a -> b
        let p2 = [a[0] + d[0] / 2.0 - eta * d[1] / 3.0, a[1] + d[1] / 2.0 + eta * d[0] / 3.0];
        let s1 = self.walk(a, p1, level + 1, false) + self.walk(p1, p2, level + 1, false);
        let s2 = self.walk(p2, p3, level + 1, false) + self.walk(p3, b, level + 1, is_last);
        s1 + s2
    }
}

/// Level-`depth` Koch polyline over the segment `[-1/2, 1/2] x {0}` with
/// `etas[j-1]` the height ratio at step `j`. Final segments longer than a
/// positive finite `spacing` are subdivided into pieces of at least that
/// length, then points closer than `spacing` to the previously kept one are
/// skipped; the endpoints are always kept.
pub fn koch(etas: &[f64], depth: usize, spacing: f64) -> Result<KochCurve> {
    if etas.len() < depth {
        return Err(Error::ParamOutOfRange("need one eta per Koch level"));
    }
    if etas[..depth].iter().any(|&e| !(0.0..=MAX_ETA + 1e-15).contains(&e)) {
        return Err(Error::ParamOutOfRange("eta must lie in [0, sqrt(3)/2]"));
    }
    if !(spacing >= 0.0) {
        return Err(Error::ParamOutOfRange("spacing must be nonnegative"));
    }
    let (a, b) = ([-0.5, 0.0], [0.5, 0.0]);
    let mut w = KochWalk { etas, depth, spacing, kept: Vec::new(), last: None, count: 0 };
    w.emit(a, true);
    let polyline_length = w.walk(a, b, 0, true);
    let length = etas[..depth].iter().map(|&e| koch_ratio(e)).product();
    Ok(KochCurve { points: w.kept, length, polyline_length, vertex_count: w.count })
}

/// `([-1,-1/2] u {0} u [1/2,1]) x {0}` with `resolution` samples per segment.
pub fn holed_segment(resolution: usize) -> Result<Vec<Point>> {
    if resolution < 2 {
        return Err(Error::ParamOutOfRange("resolution must be at least 2"));
    }
    let mut pts = Vec::with_capacity(2 * resolution + 1);
    for i in 0..resolution {
        pts.push(Point::new(vec![-1.0 + 0.5 * i as f64 / (resolution - 1) as f64, 0.0]));
    }
    pts.push(Point::new(vec![0.0, 0.0]));
    for i in 0..resolution {
        pts.push(Point::new(vec![0.5 + 0.5 * i as f64 / (resolution - 1) as f64, 0.0]));
    }
    Ok(pts)
}

/// Grid nodes of `[-1,1]^k` with `resolution` nodes per axis, kept when
/// `keep` holds.
fn grid<F: FnMut(&[f64]) -> bool>(k: usize, resolution: usize, mut keep: F) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; k];
    let step = 2.0 / (resolution - 1) as f64;
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| -1.0 + i as f64 * step).collect();
        if keep(&x) {
            out.push(x);
        }
        let mut d = 0;
        while d < k {
            idx[d] += 1;
            if idx[d] < resolution {
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
pub struct Hole {
    /// Center in plane coordinates.
    pub center: Vec<f64>,
    pub radius: f64,
}

/// `count` disjoint holes inside the unit disk with radii in `[r_min, r_max]`.
pub fn random_holes(k: usize, count: usize, r_min: f64, r_max: f64, seed: u64) -> Result<Vec<Hole>> {
    if !(0.0 < r_min && r_min <= r_max && r_max < 0.5) {
        return Err(Error::ParamOutOfRange("hole radii must satisfy 0 < r_min <= r_max < 1/2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut holes: Vec<Hole> = Vec::with_capacity(count);
    let mut attempts = 0;
    while holes.len() < count {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::ParamOutOfRange("could not place disjoint holes"));
        }
        let radius = rng.gen_range(r_min..=r_max);
        let center: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if norm(&center) + radius > 1.0 {
            continue;
        }
        if holes.iter().any(|h| dist(&h.center, &center) <= h.radius + radius) {
            continue;
        }
        holes.push(Hole { center, radius });
    }
    Ok(holes)
}

/// Grid samples of the unit `k`-disk in `R^n` (extra coordinates zero)
/// with the open holes removed.
pub fn plane_subset(n: usize, k: usize, resolution: usize, holes: &[Hole]) -> Result<Vec<Point>> {
    if k == 0 || k > n || resolution < 2 {
        return Err(Error::ParamOutOfRange("plane subset needs 1 <= k <= n and resolution >= 2"));
    }
    if holes.iter().any(|h| h.center.len() != k || !(h.radius > 0.0)) {
        return Err(Error::ParamOutOfRange("holes need k coordinates and a positive radius"));
    }
    let pts = grid(k, resolution, |x| norm(x) <= 1.0 && holes.iter().all(|h| dist(x, &h.center) >= h.radius));
    Ok(pts
        .into_iter()
        .map(|mut x| {
            x.resize(n, 0.0);
            Point::new(x)
        })
        .collect())
}

/// Area of the unit disk minus disjoint holes lying inside it.
pub fn plane_subset_measure(k: usize, holes: &[Hole]) -> Option<f64> {
    for (i, h) in holes.iter().enumerate() {
        if norm(&h.center) + h.radius > 1.0 {
            return None;
        }
        if holes[i + 1..].iter().any(|g| dist(&g.center, &h.center) < g.radius + h.radius) {
            return None;
        }
    }
    let w = unit_ball_volume(k);
    Some(w - holes.iter().map(|h| w * powi(h.radius, k as i32)).sum::<f64>())
}

/// Height of the tilted graph: a plane wave of wavelength
/// [`TILT_WAVELENGTH`] along the diagonal with maximal slope `slope`.
pub fn tilt_height(slope: f64, x: &[f64]) -> f64 {
    let dir = 1.0 / sqrt(x.len() as f64);
    let t: f64 = x.iter().map(|v| v * dir).sum();
    slope * TILT_WAVELENGTH / (2.0 * PI) * sin(2.0 * PI * t / TILT_WAVELENGTH)
}

/// Graph of [`tilt_height`] over the unit `k`-disk, in `R^{k+1}`.
pub fn tilted_graph(slope: f64, resolution: usize, k: usize) -> Result<Vec<Point>> {
    if !(0.0..=1.0).contains(&slope) {
        return Err(Error::ParamOutOfRange("slope must lie in [0, 1]"));
    }
    if k == 0 || resolution < 2 {
        return Err(Error::ParamOutOfRange("tilted graph needs k >= 1 and resolution >= 2"));
    }
    Ok(grid(k, resolution, |x| norm(x) <= 1.0)
        .into_iter()
        .map(|mut x| {
            let h = tilt_height(slope, &x);
            x.push(h);
            Point::new(x)
        })
        .collect())
}

/// Two parallel `k`-disks at heights `+-gap/2` in `R^{k+1}`.
pub fn parallel_planes(gap: f64, resolution: usize, k: usize) -> Result<Vec<Point>> {
    if !(0.0 < gap && gap < 1.0) || k == 0 || resolution < 2 {
        return Err(Error::ParamOutOfRange("parallel planes need 0 < gap < 1, k >= 1 and resolution >= 2"));
    }
    let base = grid(k, resolution, |x| dot(x, x) + gap * gap / 4.0 <= 1.0);
    let mut pts = Vec::with_capacity(2 * base.len());
    for s in [-0.5, 0.5] {
        for x in &base {
            let mut p = x.clone();
            p.push(s * gap);
            pts.push(Point::new(p));
        }
    }
    Ok(pts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixtureSpec {
    Koch {
        etas: Vec<f64>,
        depth: usize,
        #[serde(default)]
        spacing: f64,
    },
    HoledSegment {
        resolution: usize,
    },
    PlaneSubset {
        n: usize,
        k: usize,
        resolution: usize,
        #[serde(default)]
        holes: Vec<Hole>,
        #[serde(default)]
        random_holes: usize,
        #[serde(default)]
        seed: u64,
    },
    TiltedGraph {
        slope: f64,
        resolution: usize,
        k: usize,
    },
    Point {
        n: usize,
        k: usize,
    },
    ParallelPlanes {
        gap: f64,
        resolution: usize,
        k: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    /// `k`-dimensional measure of the sampled set, when known in closed form.
    pub measure: Option<f64>,
    pub plane: Option<AffinePlane>,
    pub polyline_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub points: Vec<Point>,
    pub k: usize,
    pub truth: GroundTruth,
}

pub fn generate(spec: &FixtureSpec) -> Result<Fixture> {
    match spec {
        FixtureSpec::Koch { etas, depth, spacing } => {
            let c = koch(etas, *depth, *spacing)?;
            Ok(Fixture { points: c.points, k: 1, truth: GroundTruth { measure: Some(c.length), plane: None, polyline_length: Some(c.polyline_length) } })
        }
        FixtureSpec::HoledSegment { resolution } => Ok(Fixture {
            points: holed_segment(*resolution)?,
            k: 1,
            truth: GroundTruth { measure: Some(1.0), plane: Some(AffinePlane::axis(Point::origin(2), 1)), polyline_length: None },
        }),
        FixtureSpec::PlaneSubset { n, k, resolution, holes, random_holes: count, seed } => {
            let mut all = holes.clone();
            if *count > 0 {
                all.extend(random_holes(*k, *count, 0.05, 0.2, *seed)?);
            }
            Ok(Fixture {
                points: plane_subset(*n, *k, *resolution, &all)?,
                k: *k,
                truth: GroundTruth { measure: plane_subset_measure(*k, &all), plane: Some(AffinePlane::axis(Point::origin(*n), *k)), polyline_length: None },
            })
        }
        FixtureSpec::TiltedGraph { slope, resolution, k } => Ok(Fixture {
            points: tilted_graph(*slope, *resolution, *k)?,
            k: *k,
            truth: GroundTruth {
                measure: None,
                plane: if *slope == 0.0 { Some(AffinePlane::axis(Point::origin(k + 1), *k)) } else { None },
                polyline_length: None,
            },
        }),
        FixtureSpec::Point { n, k } => {
            if *k == 0 || k > n {
                return Err(Error::ParamOutOfRange("point fixture needs 1 <= k <= n"));
            }
            Ok(Fixture { points: vec![Point::origin(*n)], k: *k, truth: GroundTruth { measure: Some(0.0), ..Default::default() } })
        }
        FixtureSpec::ParallelPlanes { gap, resolution, k } => {
            let w = unit_ball_volume(*k);
            let rad = sqrt(1.0 - gap * gap / 4.0);
            Ok(Fixture {
                points: parallel_planes(*gap, *resolution, *k)?,
                k: *k,
                truth: GroundTruth { measure: Some(2.0 * w * powi(rad, *k as i32)), plane: None, polyline_length: None },
            })
        }
    }
}
