//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stderr,
//! outside the harness capture, and runs under a shared lock so its timing
//! is not inflated by the others.

use std::fs;
use std::io::Write;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reif::selftest::rotation_mismatch;
use reif_core::calibration::CalibrationForm;
use reif_core::covering::{
    calibrated_eps, decompose, fifth_balls_disjoint, level_field, measure_upper_bound, recursive_cover, reference_slab_constant, slab_cover, CoverParams,
};
use reif_core::field::{phi_properties_check, SubspaceField};
use reif_core::fixtures::{divergent_etas, generate, geometric_etas, holed_segment, koch, koch_ratio, tilt_height, tilted_graph, FixtureSpec};
use reif_core::manifold::{solve_zero_on_fiber, FiberFrame, FiberParams};
use reif_core::math::uniform_in_ball;
use reif_core::multiscale::{compute_s_field, PointCloud, RadiusField, ScaleConstants, ScaleLadder};
use reif_core::partition::{comparability_window, BumpProfile, Domain, PartitionOfUnity, TildeField};
use reif_core::{Ball, Point, Sequential};

static SERIAL: Mutex<()> = Mutex::new(());

/// Runs `body` under the lock, prints the verdict line and asserts both the
/// verdict and the time limit.
fn criterion(id: usize, name: &str, limit_secs: f64, body: impl FnOnce() -> (bool, String)) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let (ok, detail) = body();
    let secs = t0.elapsed().as_secs_f64();
    let in_time = secs < limit_secs;
    let verdict = if ok && in_time { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id:>2} {verdict} {name}: {detail} [{secs:.1}s, limit {limit_secs}s]");
    assert!(ok, "criterion {id} ({name}): {detail}");
    assert!(in_time, "criterion {id} ({name}) took {secs:.1}s, limit {limit_secs}s");
}

fn cloud(points: Vec<Point>, k: usize) -> PointCloud {
    PointCloud::new(points, k).expect("cloud")
}

fn holed() -> PointCloud {
    cloud(holed_segment(201).expect("fixture"), 1)
}

fn snowflake() -> PointCloud {
    let etas = geometric_etas(0.25, 6);
    cloud(koch(&etas, 6, 2e-3).expect("fixture").points, 1)
}

fn unit_root(n: usize) -> Ball {
    Ball { center: Point::origin(n), radius: 1.0 }
}

fn random_square<R: Rng>(rng: &mut R, half: f64) -> [f64; 2] {
    [rng.gen_range(-half..half), rng.gen_range(-half..half)]
}

fn d2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn c01_radius_field_lipschitz() {
    criterion(1, "radius field 5-Lipschitz", 10.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ladder = ScaleLadder::new(1.0, 1.0 / 32.0, 0.5).unwrap();
        let mut worst = f64::NEG_INFINITY;
        let mut bad = 0;
        for c in [holed(), snowflake()] {
            let rf = compute_s_field(&c, &ladder, 0.1);
            bad += rf.bad_balls().len();
            for i in 0..5000 {
                let y = random_square(&mut rng, 1.2);
                let z = if i % 2 == 0 {
                    random_square(&mut rng, 1.2)
                } else {
                    let off = uniform_in_ball(&mut rng, 2, 0.05);
                    [y[0] + off[0], y[1] + off[1]]
                };
                worst = worst.max((rf.radius(&y) - rf.radius(&z)).abs() - 5.0 * d2(&y, &z));
            }
        }
        (worst <= 1e-9, format!("10000 pairs, {bad} bad balls, max |r_y - r_z| - 5|y - z| = {worst:.3e}"))
    });
}

#[test]
fn c02_comparability_window() {
    criterion(2, "comparability of intersecting balls", 5.0, || {
        let c = holed();
        let ladder = ScaleLadder::new(1.0, 1.0 / 32.0, 0.5).unwrap();
        let rf = compute_s_field(&c, &ladder, 0.1);
        let consts = ScaleConstants::PAPER;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ok = true;
        let mut parts = Vec::new();
        for k in [1.0, 4.0, 8.0] {
            let w = comparability_window(k).unwrap();
            let (mut pairs, mut extreme) = (0usize, 1.0f64);
            while pairs < 10_000 {
                let x = if rng.gen_bool(0.5) { random_square(&mut rng, 0.3) } else { [rng.gen_range(-1.1..1.1), rng.gen_range(-0.2..0.2)] };
                let tx = rf.tilde(&x, ladder.r0, &consts);
                let off = uniform_in_ball(&mut rng, 2, 2.2 * k * tx);
                let xa = [x[0] + off[0], x[1] + off[1]];
                let ta = rf.tilde(&xa, ladder.r0, &consts);
                if d2(&x, &xa) >= k * (tx + ta) {
                    continue;
                }
                pairs += 1;
                let q = tx / ta;
                extreme = extreme.max(q).max(1.0 / q);
                ok &= q >= 1.0 / w && q <= w;
            }
            parts.push(format!("k={k}: max ratio {extreme:.4} <= w {w:.4}"));
        }
        (ok, parts.join(", "))
    });
}

fn partition_at(c: &PointCloud, r0: f64) -> (PartitionOfUnity, RadiusField, f64) {
    let ladder = ScaleLadder::new(1.0, r0, 0.5).unwrap();
    let rf = compute_s_field(c, &ladder, 0.1);
    let consts = ScaleConstants::COMPUTATIONAL;
    let tilde = TildeField { field: &rf, r: ladder.r0, consts };
    let domain = Domain::Samples { points: c.points().to_vec(), clip: None };
    let pou = PartitionOfUnity::build(&domain, &tilde, consts.tilde_lipschitz()).unwrap();
    (pou, rf, ladder.r0)
}

#[test]
fn c03_partition_identities() {
    criterion(3, "partition of unity identities", 20.0, || {
        // spacing commensurate with r~/2 at both scales, so halving r0 is a
        // similarity of the center lattice
        let c = cloud(holed_segment(1249).unwrap(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let consts = ScaleConstants::COMPUTATIONAL;
        let mut ok = true;
        let mut overlaps = Vec::new();
        let mut detail = Vec::new();
        for r0 in [1.0 / 32.0, 1.0 / 64.0] {
            let (pou, rf, r) = partition_at(&c, r0);
            let (mut sum_err, mut outside, mut uncovered, mut overlap) = (0.0f64, 0usize, 0usize, 0usize);
            for _ in 0..10_000 {
                let p = c.point(rng.gen_range(0..c.len()));
                let off = uniform_in_ball(&mut rng, 2, rf.tilde(p, r, &consts) / 2.0);
                let y = [p[0] + off[0], p[1] + off[1]];
                let Ok(w) = pou.weights(&y) else {
                    uncovered += 1;
                    continue;
                };
                sum_err = sum_err.max((w.iter().map(|x| x.1).sum::<f64>() - 1.0).abs());
                outside += w.iter().filter(|&&(a, _)| pou.centers()[a].dist(&y) >= BumpProfile::OUTER * pou.radii()[a]).count();
                overlap = overlap.max(w.len());
            }
            let slack = pou.quarter_slack();
            ok &= uncovered == 0 && sum_err <= 1e-10 && outside == 0 && slack >= 0.0;
            overlaps.push(overlap);
            detail.push(format!(
                "r0 {r0}: {} centers, |sum-1| {sum_err:.1e}, outside 4r~ {outside}, uncovered {uncovered}, quarter slack {slack:.2e}, overlap {overlap}",
                pou.len()
            ));
        }
        ok &= overlaps[0] == overlaps[1];
        (ok, detail.join("; "))
    });
}

#[test]
fn c04_rotation_formulas() {
    criterion(4, "rotation derivative formulas", 5.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        match rotation_mismatch(&mut rng, 1000) {
            Some(v) => (v <= 1e-6, format!("1000 probes, max relative mismatch {v:.2e}")),
            None => (false, "probe evaluation failed".into()),
        }
    });
}

/// Tilt fixture with its subspace field at scale `1/16` and `delta_actual`,
/// the largest plane deviation seen over the probes.
struct Tilt {
    k: usize,
    slope: f64,
    field: SubspaceField,
    delta: f64,
}

const TILT_SCALE: f64 = 0.0625;

fn tilt_probe<R: Rng>(rng: &mut R, k: usize, slope: f64, normal: f64) -> Vec<f64> {
    let x: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.4..0.4)).collect();
    let h = tilt_height(slope, &x) + if normal > 0.0 { rng.gen_range(-normal..normal) } else { 0.0 };
    let mut y = x;
    y.push(h);
    y
}

fn tilt_field(k: usize, slope: f64) -> SubspaceField {
    let res = if k == 1 { 801 } else { 81 };
    let c = cloud(tilted_graph(slope, res, k).unwrap(), k);
    let ladder = ScaleLadder::new(1.0, TILT_SCALE, 0.5).unwrap();
    let params = CoverParams::new(k, 0.1);
    let rf = compute_s_field(&c, &ladder, 0.1);
    level_field(&Sequential, &c, &rf, ladder.r0, &params, None).unwrap()
}

fn probe_delta(field: &SubspaceField, k: usize, slope: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    (0..100).map(|_| field.assemble(&tilt_probe(&mut rng, k, slope, 0.01)).unwrap().delta).fold(0.0, f64::max)
}

/// Slopes tuned so that `delta_actual` lands within 10% of each target.
fn tilt_sweep(k: usize) -> Vec<Tilt> {
    let guess = if k == 1 { 0.41 } else { 0.34 };
    [0.005, 0.01, 0.02]
        .iter()
        .map(|&target| {
            let mut slope = target / guess;
            let mut field = tilt_field(k, slope);
            let mut delta = probe_delta(&field, k, slope);
            for _ in 0..3 {
                if (delta / target - 1.0).abs() <= 0.1 {
                    break;
                }
                slope *= target / delta;
                field = tilt_field(k, slope);
                delta = probe_delta(&field, k, slope);
            }
            assert!((delta / target - 1.0).abs() <= 0.1, "k {k}: delta {delta} for target {target}");
            Tilt { k, slope, field, delta }
        })
        .collect()
}

fn deltas(sweep: &[Tilt]) -> String {
    sweep.iter().map(|t| format!("{:.4}", t.delta)).collect::<Vec<_>>().join("/")
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

#[test]
fn c05_eigengap() {
    criterion(5, "eigengap on the tilt sweep", 30.0, || {
        let mut ok = true;
        let mut detail = Vec::new();
        for k in [1, 2] {
            let sweep = tilt_sweep(k);
            let per: Vec<f64> = sweep
                .iter()
                .map(|t| {
                    let mut rng = ChaCha8Rng::seed_from_u64(5);
                    (0..100)
                        .map(|_| {
                            let a = t.field.assemble(&tilt_probe(&mut rng, t.k, t.slope, 0.01)).unwrap();
                            ((1.0 - a.eigvals[k - 1]) / a.delta).max(a.eigvals[k] / a.delta)
                        })
                        .fold(0.0, f64::max)
                })
                .collect();
            // calibrated once, on the fixture with the largest delta
            let c = per[per.len() - 1];
            ok &= per.iter().all(|&ci| ci <= 2.0 * c);
            let shown: Vec<String> = per.iter().map(|x| format!("{x:.3}")).collect();
            detail.push(format!("k={k}: delta {} c {c:.3}, per fixture {}", deltas(&sweep), shown.join("/")));
        }
        (ok, detail.join("; "))
    });
}

#[test]
fn c06_phi_defects() {
    criterion(6, "Phi gradient and Hessian defects", 60.0, || {
        let mut ok = true;
        let mut detail = Vec::new();
        for k in [1, 2] {
            let sweep = tilt_sweep(k);
            let (mut cg, mut ch) = (Vec::new(), Vec::new());
            for t in &sweep {
                let mut rng = ChaCha8Rng::seed_from_u64(6);
                let (mut g, mut h) = (0.0f64, 0.0f64);
                for _ in 0..100 {
                    let y = tilt_probe(&mut rng, k, t.slope, 0.01);
                    let a = t.field.assemble(&y).unwrap();
                    let p = phi_properties_check(&t.field, &y).unwrap();
                    g = g.max(p.grad_defect.unwrap_or(0.0) / a.delta);
                    h = h.max(p.hess_defect / a.delta);
                }
                cg.push(g);
                ch.push(h);
            }
            let (sg, sh) = (spread(&cg), spread(&ch));
            ok &= sg <= 2.0 && sh <= 2.0;
            detail.push(format!(
                "k={k}: delta {} c_grad {:.3}..{:.3} (x{sg:.2}) c_hess {:.3}..{:.3} (x{sh:.2})",
                deltas(&sweep),
                cg.iter().copied().fold(f64::INFINITY, f64::min),
                cg.iter().copied().fold(0.0, f64::max),
                ch.iter().copied().fold(f64::INFINITY, f64::min),
                ch.iter().copied().fold(0.0, f64::max)
            ));
        }
        (ok, detail.join("; "))
    });
}

#[test]
fn c07_fiber_solver() {
    criterion(7, "fiber Newton solver", 60.0, || {
        let mut ok = true;
        let mut detail = Vec::new();
        let params = FiberParams::default();
        for k in [1, 2] {
            let sweep = tilt_sweep(k);
            let (mut total, mut good, mut gap, mut its) = (0usize, 0usize, 0.0f64, 0usize);
            let mut c_off = Vec::new();
            for t in &sweep {
                let mut rng = ChaCha8Rng::seed_from_u64(7);
                let mut c = 0.0f64;
                for _ in 0..100 {
                    total += 1;
                    let x = tilt_probe(&mut rng, k, t.slope, 0.0);
                    let frame = FiberFrame::at(&t.field, &x).unwrap();
                    let local: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.01..0.01)).collect();
                    let ell = frame.plane.from_local(&local);
                    let Ok(s) = solve_zero_on_fiber(&t.field, &frame, &ell, &params) else { continue };
                    if s.iterations > 20 || s.residual > 1e-10 {
                        continue;
                    }
                    good += 1;
                    its = its.max(s.iterations);
                    gap = gap.max(s.uniqueness_gap.unwrap_or(f64::INFINITY));
                    let delta = t.field.assemble(s.z.coords()).unwrap().delta;
                    c = c.max(s.offset / (delta * s.bar_radius));
                }
                c_off.push(c);
            }
            let rate = good as f64 / total as f64;
            let sc = spread(&c_off);
            ok &= rate >= 0.99 && gap <= 1e-8 && sc <= 2.0;
            let shown: Vec<String> = c_off.iter().map(|x| format!("{x:.4}")).collect();
            detail.push(format!("k={k}: converged {good}/{total} (max {its} iterations), uniqueness gap {gap:.1e}, c_off {} (x{sc:.2})", shown.join("/")));
        }
        (ok, detail.join("; "))
    });
}

#[test]
fn c08_flat_with_holes() {
    criterion(8, "measure bound on flats with holes", 60.0, || {
        let mut ok = true;
        let mut detail = Vec::new();
        for seed in [1, 2, 3] {
            let spec = FixtureSpec::PlaneSubset { n: 3, k: 2, resolution: 41, holes: Vec::new(), random_holes: 3, seed };
            let f = generate(&spec).unwrap();
            let truth = f.truth.measure.unwrap() / std::f64::consts::PI;
            let c = cloud(f.points, 2);
            let cert = recursive_cover(&c, &CoverParams::new(2, 0.1), &unit_root(3), 12, None).unwrap();
            match measure_upper_bound(&cert) {
                Ok(b) => {
                    ok &= b <= 1.02;
                    detail.push(format!("seed {seed}: bound {b:.4} (set {truth:.4})"));
                }
                Err(e) => {
                    ok = false;
                    detail.push(format!("seed {seed}: {e}"));
                }
            }
        }
        (ok, detail.join(", "))
    });
}

fn koch_estimate(etas: &[f64], depth: usize) -> f64 {
    let curve = koch(etas, depth, 3e-4).unwrap();
    let c = cloud(curve.points, 1);
    let mut params = CoverParams::new(1, 0.1);
    params.r0_ratio = 1.0 / 4096.0;
    recursive_cover(&c, &params, &unit_root(2), 12, None).unwrap().a_est
}

#[test]
fn c09_snowflake_dichotomy() {
    criterion(9, "snowflake dichotomy", 300.0, || {
        let conv = geometric_etas(0.25, 12);
        let exact: f64 = conv.iter().map(|&e| koch_ratio(e)).product();
        let a = koch_estimate(&conv, 12);
        let conv_ok = (a / exact - 1.0).abs() <= 0.1;
        let div = divergent_etas(12);
        let seq: Vec<f64> = (0..=12).map(|d| koch_estimate(&div, d)).collect();
        let monotone = seq.windows(2).all(|w| w[1] > w[0]);
        let ratio = seq[12] / seq[0];
        let shown: Vec<String> = seq.iter().map(|x| format!("{x:.3}")).collect();
        (
            conv_ok && monotone && ratio > 2.0,
            format!("summable: A_est {a:.4} vs {exact:.4}; divergent A_est by depth {} (monotone {monotone}, final/initial {ratio:.3})", shown.join(" ")),
        )
    });
}

#[test]
fn c10_covering_structure() {
    criterion(10, "covering structure", 120.0, || {
        let mut ok = true;
        let mut detail = Vec::new();

        let ladder = ScaleLadder::new(1.0, 1.0 / 64.0, 0.5).unwrap();
        let mut families = 0;
        for c in [holed(), snowflake()] {
            let rf = compute_s_field(&c, &ladder, 0.1);
            let vitali: Vec<Ball> = rf.centers.iter().zip(&rf.s_values).map(|(p, &s)| Ball { center: p.clone(), radius: s }).collect();
            let dec = decompose(&c, &CoverParams::new(1, 0.1), &unit_root(2), 0, None);
            let bad: Vec<Ball> = dec.bad_balls.iter().map(|b| b.ball.clone()).collect();
            ok &= fifth_balls_disjoint(&vitali) && fifth_balls_disjoint(&bad);
            families += 2;
        }
        detail.push(format!("fifth balls disjoint in {families} families"));

        for (n, k) in [(2, 1), (3, 1), (3, 2), (4, 2), (4, 3)] {
            let (a, b) = (reference_slab_constant(n, k, 0.1), reference_slab_constant(n, k, 0.05));
            ok &= (b / a - 1.0).abs() <= 0.2;
            detail.push(format!("c({n},{k}) {a:.3}->{b:.3}"));
        }

        let line: Vec<Point> = (0..201).map(|i| Point::new(vec![-0.9 + 1.8 * i as f64 / 200.0, 0.0, 0.0])).collect();
        let eps = calibrated_eps(3, 2);
        let c = cloud(line, 2);
        let cert = recursive_cover(&c, &CoverParams::new(2, eps), &unit_root(3), 12, None).unwrap();
        let c_ref = reference_slab_constant(3, 2, eps).max(reference_slab_constant(3, 2, eps / 2.0));
        let used = cert.levels.iter().map(|l| l.slab_constant).fold(0.0, f64::max);
        let worst = cert.decay_ratios.iter().copied().fold(0.0, f64::max);
        let direct = slab_cover(&unit_root(3), &reif_core::multiscale::Tube { base: Point::origin(3), directions: vec![vec![1.0, 0.0, 0.0]], width: 0.0 }, eps);
        ok &= used <= c_ref && worst <= 0.1 && !cert.partial && !cert.decay_ratios.is_empty();
        let ratios: Vec<String> = cert.decay_ratios.iter().map(|x| format!("{x:.4}")).collect();
        detail.push(format!(
            "line in R^3 at eps {eps:.4}: slab constant {used:.3} <= c {c_ref:.3} ({} balls per slab), decay ratios {}",
            direct.balls.len(),
            ratios.join("/")
        ));
        (ok, detail.join("; "))
    });
}

#[test]
fn c11_calibration_positivity() {
    criterion(11, "calibration positivity on the manifold", 30.0, || {
        let mut ok = true;
        let mut detail = Vec::new();
        for k in [1, 2] {
            let form = CalibrationForm::volume_form(k + 1, k);
            for slope in [0.01, 0.02] {
                let res = if k == 1 { 801 } else { 81 };
                let c = cloud(tilted_graph(slope, res, k).unwrap(), k);
                let mut params = CoverParams::new(k, 0.1);
                params.alpha = 0.9;
                let root = Ball { center: Point::origin(k + 1), radius: 0.5 };
                let cert = recursive_cover(&c, &params, &root, 12, Some(&form)).unwrap();
                let min = cert.levels.iter().filter_map(|l| l.calibration_min).fold(f64::INFINITY, f64::min);
                ok &= min.is_finite() && min >= 0.9 / 4.0 && min >= 0.99;
                detail.push(format!("k={k} slope {slope}: min {min:.5}"));
            }
        }
        (ok, detail.join(", "))
    });
}

#[test]
fn c12_determinism() {
    criterion(12, "byte-identical certificates", 120.0, || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        let spec = r#"{"kind":"koch","etas":[0.5,0.25,0.125,0.0625],"depth":4,"spacing":0.002}"#;
        fs::write(&cfg, format!(r#"{{"eps": 0.1, "seed": 11, "fixture": {spec}}}"#)).unwrap();
        let holed_cfg = dir.path().join("holed.json");
        fs::write(&holed_cfg, r#"{"eps": 0.1, "seed": 11, "fixture": {"kind": "holed_segment", "resolution": 401}}"#).unwrap();
        let mut ok = true;
        let mut runs = 0;
        for (tag, config) in [("koch", &cfg), ("holed", &holed_cfg)] {
            let mut outs = Vec::new();
            for (i, threads) in ["1", "2", "4", "4"].iter().enumerate() {
                let out = dir.path().join(format!("{tag}-{i}"));
                let o = Command::new(env!("CARGO_BIN_EXE_reif"))
                    .args(["cover", "--config", config.to_str().unwrap(), "--threads", threads, "--out", out.to_str().unwrap()])
                    .output()
                    .unwrap();
                ok &= o.status.success();
                outs.push(fs::read(out.join("certificate.json")).unwrap_or_default());
                runs += 1;
            }
            ok &= !outs[0].is_empty() && outs.iter().all(|b| *b == outs[0]);
        }
        (ok, format!("{runs} runs at 1, 2 and 4 threads, holed segment and snowflake"))
    });
}
