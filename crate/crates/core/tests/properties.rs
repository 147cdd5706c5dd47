use proptest::prelude::*;

use reif_core::covering::{fifth_balls_disjoint, slab_cover};
use reif_core::field::SubspaceField;
use reif_core::fixtures::{koch, koch_ratio, plane_subset, tilted_graph};
use reif_core::geometry::{eps_linear_independence, grassmann_distance, orthonormalize};
use reif_core::multiscale::{classify_ball, compute_s_field, vitali_select, PointCloud, RadiusField, ScaleLadder, Tube};
use reif_core::partition::{evaluate_partition, Domain, PartitionOfUnity};
use reif_core::{Ball, Frame, Orientation, Point};

fn unit(v: Vec<f64>) -> Option<Vec<f64>> {
    let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (l > 1e-3).then(|| v.into_iter().map(|x| x / l).collect())
}

fn frame_strategy(n: usize, k: usize) -> impl Strategy<Value = Frame> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), k).prop_filter_map("degenerate", |vs| orthonormalize(&vs, 1e-3, 1.0).ok().map(|(f, _)| f))
}

fn rotate2(p: &[f64], c: f64, s: f64) -> Vec<f64> {
    vec![c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grassmann_is_a_metric(a in frame_strategy(4, 2), b in frame_strategy(4, 2), c in frame_strategy(4, 2)) {
        let (pa, pb, pc) = (a.projector(), b.projector(), c.projector());
        let ab = grassmann_distance(&pa, &pb).unwrap();
        let bc = grassmann_distance(&pb, &pc).unwrap();
        let ac = grassmann_distance(&pa, &pc).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!((ab - grassmann_distance(&pb, &pa).unwrap()).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&ab));
        prop_assert!(grassmann_distance(&pa, &pa).unwrap() < 1e-12);
    }

    #[test]
    fn gram_schmidt_frames_are_orthonormal(vs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 3)) {
        if let Ok((f, rep)) = orthonormalize(&vs, 0.05, 1.0) {
            for (i, a) in f.vectors().iter().enumerate() {
                for (j, b) in f.vectors().iter().enumerate() {
                    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((d - target).abs() < 1e-12);
                }
            }
            prop_assert!(rep.min_pivot >= 0.05);
        }
    }

    #[test]
    fn independence_survives_small_perturbation(
        pts in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 3),
        noise in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 3),
    ) {
        let ball = Ball::new(Point::origin(3), 1.0).unwrap();
        let eps = 0.2;
        let base: Vec<Point> = pts.iter().cloned().map(Point::new).collect();
        let w = eps_linear_independence(&base, eps, &ball);
        prop_assume!(w.verdict);
        // moving every point by at most eps/8 keeps eps/2-independence
        let moved: Vec<Point> = pts
            .iter()
            .zip(&noise)
            .map(|(p, q)| {
                let l = q.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                Point::new(p.iter().zip(q).map(|(a, b)| a + b / l * eps / 8.0).collect())
            })
            .collect();
        prop_assert!(eps_linear_independence(&moved, eps / 2.0, &ball).verdict);
    }

    #[test]
    fn classification_is_similarity_invariant(
        angle in 0.0f64..std::f64::consts::TAU,
        shift in prop::collection::vec(-3.0f64..3.0, 2),
        scale in 0.2f64..5.0,
        radius in 0.2f64..1.2,
        eps in 0.05f64..0.45,
    ) {
        let base = reif_core::fixtures::holed_segment(41).unwrap();
        let (c, s) = (angle.cos(), angle.sin());
        let map = |p: &[f64]| {
            let r = rotate2(p, c, s);
            Point::new(vec![scale * r[0] + shift[0], scale * r[1] + shift[1]])
        };
        let moved: Vec<Point> = base.iter().map(|p| map(p)).collect();
        let a = PointCloud::new(base, 1).unwrap();
        let b = PointCloud::new(moved, 1).unwrap();
        let ball_a = Ball::new(Point::new(vec![0.3, 0.0]), radius).unwrap();
        let ball_b = Ball::new(map(&[0.3, 0.0]), scale * radius).unwrap();
        // keep clear of exact boundary ties
        let near_tie = a.points().iter().any(|p| (p.dist(&[0.3, 0.0]) - radius).abs() < 1e-6);
        prop_assume!(!near_tie);
        let va = classify_ball(&a, &ball_a, eps);
        let vb = classify_ball(&b, &ball_b, eps);
        prop_assert_eq!(va.good, vb.good);
        prop_assert!((va.delta_actual - vb.delta_actual).abs() < 1e-9);
    }

    #[test]
    fn vitali_fifth_balls_disjoint_and_covering(
        pts in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 1..60),
        s in prop::collection::vec(0.01f64..0.8, 60),
    ) {
        let points: Vec<Point> = pts.into_iter().map(Point::new).collect();
        let s = &s[..points.len()];
        let chosen = vitali_select(&points, s);
        let balls: Vec<Ball> = chosen.iter().map(|&i| Ball { center: points[i].clone(), radius: s[i] }).collect();
        prop_assert!(fifth_balls_disjoint(&balls));
        for p in &points {
            prop_assert!(balls.iter().any(|b| b.contains(p)));
        }
    }

    #[test]
    fn radius_extension_is_5_lipschitz(
        centers in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 1..20),
        s in prop::collection::vec(0.01f64..1.0, 20),
        y in prop::collection::vec(-1.5f64..1.5, 2),
        z in prop::collection::vec(-1.5f64..1.5, 2),
    ) {
        let cs: Vec<Point> = centers.into_iter().map(Point::new).collect();
        let sv = s[..cs.len()].to_vec();
        let f = RadiusField::from_centers(cs.clone(), sv.clone(), 0.01, 2.0).unwrap();
        let (ry, rz) = (f.radius(&y), f.radius(&z));
        let d = ((y[0] - z[0]).powi(2) + (y[1] - z[1]).powi(2)).sqrt();
        prop_assert!((ry - rz).abs() <= 5.0 * d + 1e-9);
        prop_assert!(ry <= 5.0 * f.dist_to_centers(&y) + sv.iter().cloned().fold(0.0, f64::max) + 1e-12);
        prop_assert!(ry > 0.0 && ry <= 2.0);
    }

    #[test]
    fn partition_identities(y in prop::collection::vec(-0.9f64..0.9, 2), rad in 0.05f64..0.2, slope in 0.0f64..0.3) {
        let centers: Vec<Point> = (0..21).flat_map(|i| (0..21).map(move |j| Point::new(vec![-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64]))).collect();
        let field = move |p: &[f64]| rad * (1.0 + slope * p[0]).max(0.5);
        let pou = PartitionOfUnity::build(&Domain::Samples { points: centers, clip: None }, &field, 1.0).unwrap();
        let w = evaluate_partition(&pou, &y).unwrap();
        let total: f64 = w.iter().map(|x| x.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        for (a, v) in w {
            prop_assert!(v >= 0.0);
            prop_assert!(pou.centers()[a].dist(&y) < 4.0 * pou.radii()[a]);
        }
        let balls: Vec<Ball> = pou.centers().iter().zip(pou.radii()).map(|(c, r)| Ball { center: c.clone(), radius: r / 4.0 }).collect();
        for (i, a) in balls.iter().enumerate() {
            for b in &balls[i + 1..] {
                prop_assert!(a.center.dist(&b.center) >= a.radius + b.radius - 1e-12);
            }
        }
    }

    #[test]
    fn field_projector_is_an_orthogonal_projection(y in prop::collection::vec(-0.5f64..0.5, 2), slope in 0.0f64..0.05) {
        let pts = tilted_graph(slope, 31, 2).unwrap();
        let cloud = PointCloud::new(pts.clone(), 2).unwrap();
        let pou = PartitionOfUnity::build(&Domain::Samples { points: pts, clip: None }, &|_: &[f64]| 0.1, 1.0).unwrap();
        let field = SubspaceField::from_cloud(&cloud, pou, 3.0, None).unwrap();
        let q = [y[0], y[1], 0.0];
        let a = field.assemble(&q).unwrap();
        let p = &a.projector;
        let pp = p.mul(p);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((pp[(i, j)] - p[(i, j)]).abs() < 1e-10);
                prop_assert!((p[(i, j)] - p[(j, i)]).abs() < 1e-12);
            }
        }
        prop_assert!(a.gap > 0.5);
    }

    #[test]
    fn slab_balls_cover_the_tube(
        dir in prop::collection::vec(-1.0f64..1.0, 3),
        base in prop::collection::vec(-0.3f64..0.3, 3),
        off in prop::collection::vec(-1.0f64..1.0, 3),
        t in -1.3f64..1.3,
        depth in 0.0f64..1.0,
        eps in 0.03f64..0.2,
    ) {
        let Some(d) = unit(dir) else { return Ok(()) };
        let along: f64 = off.iter().zip(&d).map(|(a, b)| a * b).sum();
        let normal: Vec<f64> = off.iter().zip(&d).map(|(a, b)| a - along * b).collect();
        let Some(u) = unit(normal) else { return Ok(()) };
        let probe: Vec<f64> = (0..3).map(|i| base[i] + t * d[i] + depth * eps * u[i]).collect();
        let tube = Tube { base: Point::new(base), directions: vec![d], width: eps };
        let ball = Ball::new(Point::origin(3), 1.0).unwrap();
        prop_assume!(ball.contains(&probe));
        let cover = slab_cover(&ball, &tube, eps);
        prop_assert!(cover.balls.iter().any(|b| b.contains(&probe)));
    }

    #[test]
    fn koch_length_formula(etas in prop::collection::vec(0.0f64..0.866, 1..7)) {
        let depth = etas.len();
        let c = koch(&etas, depth, 0.0).unwrap();
        let product: f64 = etas.iter().map(|&e| koch_ratio(e)).product();
        prop_assert!((c.polyline_length - product).abs() < 1e-12);
    }
}

#[test]
fn s_field_matches_sweep_oracle_on_flat_samples() {
    let pts = plane_subset(3, 2, 41, &[]).unwrap();
    let cloud = PointCloud::new(pts, 2).unwrap();
    let ladder = ScaleLadder::new(1.0, 0.25, 0.5).unwrap();
    let rf = compute_s_field(&cloud, &ladder, 0.1);
    assert!(rf.bad_balls().is_empty());
    assert!(rf.point_s.iter().all(|&s| s == ladder.r0));
}

#[test]
fn frame_reversal_flips_orientation() {
    let f = Frame::standard(3, 2);
    assert_eq!(f.reversed().orientation(), Orientation::Negative);
}
