//! Built-in property suite on small deterministic fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reif_core::calibration::{validate_eta_calibration, CalibrationForm};
use reif_core::covering::fifth_balls_disjoint;
use reif_core::field::{
    numeric_trace_derivatives, phi_properties_check, projector_derivative_check, trace_functional_derivatives, SubspaceField, TraceFunctionalProbe,
};
use reif_core::fixtures::{holed_segment, tilt_height, tilted_graph};
use reif_core::geometry::orthonormalize;
use reif_core::linalg::Matrix;
use reif_core::math::{gaussian, uniform_in_ball};
use reif_core::multiscale::{compute_s_field, PointCloud, ScaleConstants, ScaleLadder};
use reif_core::partition::{derivative_bound_report, BumpProfile, Domain, PartitionOfUnity, TildeField};
use reif_core::{Ball, Point};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, limit: f64) -> Self {
        Self { name, value, limit, passed: value <= limit }
    }

    fn at_least(name: &'static str, value: f64, limit: f64) -> Self {
        Self { name, value, limit, passed: value >= limit }
    }

    fn failed(name: &'static str) -> Self {
        Self { name, value: f64::NAN, limit: f64::NAN, passed: false }
    }
}

pub fn render(checks: &[Check]) -> String {
    let mut s = format!("{:<34} {:>14} {:>14}  result\n", "check", "value", "limit");
    for c in checks {
        s.push_str(&format!("{:<34} {:>14.6e} {:>14.6e}  {}\n", c.name, c.value, c.limit, if c.passed { "pass" } else { "FAIL" }));
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    s.push_str(&format!("{} checks, {failed} failed\n", checks.len()));
    s
}

pub fn run(cfg: &RunConfig) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    partition_checks(cfg, &mut rng, &mut out);
    out.push(flat_projector_check(&mut rng));
    out.push(rotation_check(&mut rng, 200));
    vitali_checks(cfg, &mut rng, &mut out);
    tilt_checks(cfg, &mut rng, &mut out);
    let comass = validate_eta_calibration(&CalibrationForm::volume_form(3, 2), 64, cfg.seed);
    out.push(Check { name: "volume form comass", value: comass.max_value, limit: 1.0 + comass.tolerance, passed: comass.passed });
    out
}

fn holed_cloud() -> PointCloud {
    PointCloud::new(holed_segment(201).expect("fixture"), 1).expect("cloud")
}

fn partition_checks(cfg: &RunConfig, rng: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let cloud = holed_cloud();
    let Ok(ladder) = ScaleLadder::new(1.0, 1.0 / 32.0, 0.5) else {
        out.push(Check::failed("partition: ladder"));
        return;
    };
    let rf = compute_s_field(&cloud, &ladder, cfg.eps);
    let consts = ScaleConstants::COMPUTATIONAL;
    let tilde = TildeField { field: &rf, r: ladder.r0, consts };
    let domain = Domain::Samples { points: cloud.points().to_vec(), clip: None };
    let pou = match PartitionOfUnity::build(&domain, &tilde, consts.tilde_lipschitz()) {
        Ok(p) => p,
        Err(_) => {
            out.push(Check::failed("partition: build"));
            return;
        }
    };
    let mut probes: Vec<Point> = cloud.points().to_vec();
    for _ in 0..500 {
        let p = cloud.point(rng.gen_range(0..cloud.len()));
        let r = rf.tilde(p, ladder.r0, &consts);
        let off = uniform_in_ball(rng, 2, r / 2.0);
        probes.push(Point::new(vec![p[0] + off[0], p[1] + off[1]]));
    }
    let (mut sum_err, mut outside, mut overlap, mut ratio, mut uncovered) = (0.0f64, 0usize, 0usize, 1.0f64, 0usize);
    for y in &probes {
        let Ok(w) = pou.weights(y) else {
            uncovered += 1;
            continue;
        };
        sum_err = sum_err.max((w.iter().map(|x| x.1).sum::<f64>() - 1.0).abs());
        outside += w.iter().filter(|&&(a, _)| pou.centers()[a].dist(y) >= BumpProfile::OUTER * pou.radii()[a]).count();
        overlap = overlap.max(w.len());
        for &(a, _) in &w {
            for &(b, _) in &w {
                ratio = ratio.max(pou.radii()[a] / pou.radii()[b]);
            }
        }
    }
    out.push(Check::at_most("partition: uncovered probes", uncovered as f64, 0.0));
    out.push(Check::at_most("partition: |sum phi - 1|", sum_err, 1e-10));
    out.push(Check::at_most("partition: weights outside 4r~", outside as f64, 0.0));
    out.push(Check::at_least("partition: quarter-ball slack", pou.quarter_slack(), 0.0));
    // with sum psi >= 1: r_a |d phi_a| <= D1 (1 + sum_b r_a / r_b)
    let bound = BumpProfile::D1_MAX * (1.0 + overlap as f64 * ratio);
    match derivative_bound_report(&pou, &probes, 1) {
        Ok(rep) => out.push(Check::at_most("partition: r~ |d phi|", rep.max_scaled, bound)),
        Err(_) => out.push(Check::failed("partition: r~ |d phi|")),
    }
    match derivative_bound_report(&pou, &probes, 2) {
        Ok(rep) => {
            out.push(Check { name: "partition: r~^2 |d^2 phi| finite", value: rep.max_scaled, limit: f64::INFINITY, passed: rep.max_scaled.is_finite() })
        }
        Err(_) => out.push(Check::failed("partition: r~^2 |d^2 phi| finite")),
    }
}

fn flat_projector_check(rng: &mut ChaCha8Rng) -> Check {
    const NAME: &str = "flat field: projector derivatives";
    let pts: Vec<Point> = (0..41).flat_map(|i| (0..41).map(move |j| Point::new(vec![-1.0 + i as f64 / 20.0, -1.0 + j as f64 / 20.0, 0.3]))).collect();
    let Ok(cloud) = PointCloud::new(pts.clone(), 2) else { return Check::failed(NAME) };
    let clip = Ball { center: Point::new(vec![0.0, 0.0, 0.3]), radius: 0.6 };
    let domain = Domain::Samples { points: pts, clip: Some(clip) };
    let Ok(field) = PartitionOfUnity::build(&domain, &|_: &[f64]| 0.1, 0.05).and_then(|pou| SubspaceField::from_cloud(&cloud, pou, 4.0, None)) else {
        return Check::failed(NAME);
    };
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let v = uniform_in_ball(rng, 2, 0.2);
        let y = [v[0], v[1], 0.3 + rng.gen_range(-0.02..0.02)];
        match projector_derivative_check(&field, &y) {
            Ok(r) => worst = worst.max(r.grad_projector).max(r.hess_projector).max(r.grad_m_defect).max(r.hess_m),
            Err(_) => return Check::failed(NAME),
        }
    }
    Check::at_most(NAME, worst, 1e-6)
}

/// Random rotation-derivative probe in `R^4` with a 2-plane tilted by at
/// most 0.09 and a random symmetric `M`.
pub fn random_trace_probe<R: Rng>(rng: &mut R) -> (TraceFunctionalProbe, Matrix) {
    let (n, k) = (4, 2);
    let frame = loop {
        let raw: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| gaussian(rng)).collect()).collect();
        if let Ok((f, _)) = orthonormalize(&raw, 1e-3, 1.0) {
            break f;
        }
    };
    let vecs = frame.vectors();
    let mut v = Matrix::zeros(n - k, k);
    for i in 0..n - k {
        for j in 0..k {
            v[(i, j)] = gaussian(rng);
        }
    }
    let s = rng.gen_range(0.0..0.09) / v.spectral_norm().max(1e-12);
    for i in 0..n - k {
        for j in 0..k {
            v[(i, j)] *= s;
        }
    }
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let x = gaussian(rng);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    let probe =
        TraceFunctionalProbe { base: vecs[..k].to_vec(), normals: vecs[k..].to_vec(), v, w: vec![theta.cos(), theta.sin()], j: rng.gen_range(0..n - k) };
    (probe, m)
}

/// Largest relative mismatch between analytic and numeric rotation
/// derivatives; values below `1e-9 |M|` are compared absolutely.
pub fn rotation_mismatch<R: Rng>(rng: &mut R, probes: usize) -> Option<f64> {
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let (p, m) = random_trace_probe(rng);
        let (a1, a2) = trace_functional_derivatives(&p, &m).ok()?;
        let (n1, n2) = numeric_trace_derivatives(&p, &m, 1e-5).ok()?;
        let floor = 1e-9 * m.spectral_norm();
        worst = worst.max((n1 - a1).abs() / a1.abs().max(floor)).max((n2 - a2).abs() / a2.abs().max(floor));
    }
    Some(worst)
}

fn rotation_check(rng: &mut ChaCha8Rng, probes: usize) -> Check {
    match rotation_mismatch(rng, probes) {
        Some(v) => Check::at_most("rotation derivative formulas", v, 1e-6),
        None => Check::failed("rotation derivative formulas"),
    }
}

fn vitali_checks(cfg: &RunConfig, rng: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let cloud = holed_cloud();
    let Ok(ladder) = ScaleLadder::new(1.0, 1.0 / 32.0, 0.5) else {
        out.push(Check::failed("vitali: ladder"));
        return;
    };
    let rf = compute_s_field(&cloud, &ladder, cfg.eps);
    let balls: Vec<Ball> = rf.centers.iter().zip(&rf.s_values).map(|(c, &s)| Ball { center: c.clone(), radius: s }).collect();
    out.push(Check { name: "vitali: fifth balls disjoint", value: balls.len() as f64, limit: f64::NAN, passed: fifth_balls_disjoint(&balls) });
    let missed = cloud.points().iter().filter(|p| !balls.iter().any(|b| b.contains(p))).count();
    out.push(Check::at_most("vitali: samples not covered", missed as f64, 0.0));
    out.push(Check::at_least("vitali: bad balls on holed segment", rf.bad_balls().len() as f64, 1.0));
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..2000 {
        let y: [f64; 2] = [rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)];
        let z: [f64; 2] = [rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)];
        let d = ((y[0] - z[0]).powi(2) + (y[1] - z[1]).powi(2)).sqrt();
        worst = worst.max((rf.radius(&y) - rf.radius(&z)).abs() - 5.0 * d);
    }
    out.push(Check::at_most("radius field: |r_y - r_z| - 5|y - z|", worst, 1e-9));
}

fn tilt_checks(cfg: &RunConfig, rng: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let slope = 0.02;
    let build = || -> reif_core::Result<SubspaceField> {
        let pts = tilted_graph(slope, 401, 1)?;
        let cloud = PointCloud::new(pts.clone(), 1)?;
        let clip = Ball { center: Point::origin(2), radius: 0.5 };
        let pou = PartitionOfUnity::build(&Domain::Samples { points: pts, clip: Some(clip) }, &|_: &[f64]| 0.05, 0.05)?;
        SubspaceField::from_cloud(&cloud, pou, 4.0, None)
    };
    let Ok(field) = build() else {
        out.push(Check::failed("tilt: field"));
        return;
    };
    let (mut top, mut low, mut hess) = (f64::INFINITY, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let x = rng.gen_range(-0.4..0.4);
        let y = [x, tilt_height(slope, &[x]) + rng.gen_range(-0.01..0.01)];
        let (Ok(a), Ok(p)) = (field.assemble(&y), phi_properties_check(&field, &y)) else {
            out.push(Check::failed("tilt: field evaluation"));
            return;
        };
        top = top.min(a.eigvals[0]);
        low = low.max(a.eigvals[1]);
        hess = hess.max(p.hess_defect);
    }
    out.push(Check::at_least("eigengap: lambda_k", top, 1.0 - cfg.delta));
    out.push(Check::at_most("eigengap: lambda_k+1", low, cfg.delta));
    out.push(Check::at_most("phi: |hess - pi_perp|", hess, cfg.delta));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let checks = run(&RunConfig::default());
        assert!(checks.iter().all(|c| c.passed), "{}", render(&checks));
    }

    #[test]
    fn tiny_delta_fails_eigengap() {
        let checks = run(&RunConfig { delta: 1e-12, ..Default::default() });
        assert!(checks.iter().any(|c| !c.passed && c.name.starts_with("eigengap")));
    }
}
