//! Subcommand implementations. Every command reads a [`RunConfig`] and
//! writes its files under `config.out`.

use std::path::Path;

use log::{info, warn};
use reif_core::calibration::{validate_eta_calibration_with, CalibrationForm, ComassReport};
use reif_core::covering::{level_field, measure_upper_bound, recursive_cover_with, RectifiabilityCertificate};
use reif_core::field::field_sample;
use reif_core::fixtures::{generate as generate_fixture, FixtureSpec, GroundTruth};
use reif_core::linalg::norm;
use reif_core::manifold::{build_manifold_with, tangent_calibration_check, ApproximatingManifold, CalibrationCheck, ManifoldParams};
use reif_core::multiscale::{beta_infty, classify_ball_with, compute_s_field_with, PointCloud};
use reif_core::{Ball, Executor};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::exec::Rayon;
use crate::io::{self, fmt_opt};

fn coord_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn coords(p: &[f64]) -> impl Iterator<Item = String> + '_ {
    p.iter().map(|x| x.to_string())
}

fn strided(len: usize, stride: usize) -> Vec<usize> {
    (0..len).step_by(stride.max(1)).collect()
}

pub struct AnalyzeOptions {
    pub stride: usize,
    pub beta: bool,
}

/// Per-ball classification, beta numbers, radius field, field dump and the
/// approximating manifold at the finest scale.
pub fn analyze(cfg: &RunConfig, opts: &AnalyzeOptions) -> Result<()> {
    let src = cfg.source()?;
    let cloud = &src.cloud;
    let form = cfg.form()?;
    let ladder = cfg.ladder(cloud)?;
    let params = cfg.cover_params(cloud.k());
    let out = &cfg.out;
    io::ensure_dir(out)?;
    let n = cloud.n();
    let ids = strided(cloud.len(), opts.stride);
    info!("analyze: {} points, n = {n}, k = {}, {} scales", cloud.len(), cloud.k(), ladder.scales.len());

    let balls = Rayon.map(&ids, |_, &i| {
        ladder
            .scales
            .iter()
            .map(|&r| classify_ball_with(cloud, &Ball { center: cloud.point(i).clone(), radius: r }, cfg.eps, form.as_ref()))
            .collect::<Vec<_>>()
    });
    let mut header = vec!["point".to_string()];
    header.extend(coord_header("x", n));
    header.extend(["radius", "good", "delta_actual", "count", "degenerate", "slack", "calibration"].map(String::from));
    let rows = ids.iter().zip(&balls).flat_map(|(&i, per)| {
        per.iter().map(move |a| {
            let mut row = vec![i.to_string()];
            row.extend(coords(cloud.point(i)));
            row.push(a.ball.radius.to_string());
            row.push(a.good.to_string());
            row.push(a.delta_actual.to_string());
            row.push(a.count.to_string());
            row.push(a.degenerate.to_string());
            row.push(a.witness.slack.to_string());
            row.push(fmt_opt(a.calib_value));
            row
        })
    });
    io::write_csv(&out.join("analysis.csv"), &header, rows)?;

    if opts.beta {
        let betas = Rayon.map(&ids, |_, &i| ladder.scales.iter().map(|&r| beta_infty(cloud, cloud.point(i), r).ok()).collect::<Vec<_>>());
        write_beta(&out.join("beta.csv"), cloud, &ids, &ladder.scales, &betas)?;
    }

    let rf = compute_s_field_with(&Rayon, cloud, &ladder, cfg.eps);
    let mut header = vec!["point".to_string()];
    header.extend(coord_header("x", n));
    header.extend(["s", "bracket_low", "bracket_high", "r", "r_tilde"].map(String::from));
    let rows = (0..cloud.len()).map(|i| {
        let p = cloud.point(i);
        let mut row = vec![i.to_string()];
        row.extend(coords(p));
        row.push(rf.point_s[i].to_string());
        row.push(rf.point_bracket[i].0.to_string());
        row.push(rf.point_bracket[i].1.to_string());
        row.push(rf.radius(p).to_string());
        row.push(rf.tilde(p, ladder.r0, &params.consts).to_string());
        row
    });
    io::write_csv(&out.join("radius_field.csv"), &header, rows)?;
    let bad: Vec<_> = rf.bad_balls();
    info!("radius field: {} centers, {} bad", rf.centers.len(), bad.len());
    io::write_json(&out.join("bad_balls.json"), &bad)?;

    let field = match level_field(&Rayon, cloud, &rf, ladder.r0, &params, form.as_ref()) {
        Ok(f) => f,
        Err(e) => {
            warn!("subspace field unavailable: {e}");
            return Ok(());
        }
    };
    let samples = Rayon.map(cloud.points(), |_, p| field_sample(&field, p));
    let k = cloud.k();
    let mut header = coord_header("y", n);
    header.extend(coord_header("lambda", n));
    header.extend(["gap", "phi", "grad_norm", "error"].map(String::from));
    let rows = cloud.points().iter().zip(&samples).map(|(p, s)| {
        let mut row: Vec<String> = coords(p).collect();
        match s {
            Ok(s) => {
                row.extend(coords(&s.eigvals));
                row.push(s.gap.to_string());
                row.push(s.phi.to_string());
                row.push(norm(&s.grad).to_string());
                row.push(String::new());
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), n + 3));
                row.push(e.to_string());
            }
        }
        row
    });
    io::write_csv(&out.join("field.csv"), &header, rows)?;
    let failures = samples.iter().filter(|s| s.is_err()).count();
    if failures > 0 {
        warn!("field unavailable at {failures} of {} samples (k = {k})", samples.len());
    }

    let mp = ManifoldParams { pitch_factor: params.pitch_factor, reach: params.reach, fiber: params.fiber, ..ManifoldParams::new(ladder.r0) };
    let root = cfg.root_ball(n)?;
    match build_manifold_with(&Rayon, &field, cloud, &mp, Some(&root)) {
        Ok(m) => {
            info!("manifold: {} patches, measure {:.6}, {} of {} fibers failed", m.patches.len(), m.measure(), m.failed, m.attempted);
            write_manifold(out, &m)?;
        }
        Err(e) => warn!("manifold unavailable: {e}"),
    }
    Ok(())
}

fn write_beta(path: &Path, cloud: &PointCloud, ids: &[usize], scales: &[f64], betas: &[Vec<Option<reif_core::multiscale::BetaReport>>]) -> Result<()> {
    let mut header = vec!["point".to_string()];
    header.extend(coord_header("x", cloud.n()));
    header.extend(["radius", "beta", "points_to_plane", "plane_to_points"].map(String::from));
    let rows = ids.iter().zip(betas).flat_map(|(&i, per)| {
        per.iter().zip(scales).map(move |(b, &r)| {
            let mut row = vec![i.to_string()];
            row.extend(coords(cloud.point(i)));
            row.push(r.to_string());
            row.push(fmt_opt(b.as_ref().map(|b| b.value)));
            row.push(fmt_opt(b.as_ref().map(|b| b.points_to_plane)));
            row.push(fmt_opt(b.as_ref().map(|b| b.plane_to_points)));
            row
        })
    });
    io::write_csv(path, &header, rows)
}

#[derive(Serialize)]
struct PatchMeta {
    patch: usize,
    base: Vec<f64>,
    tangent: Vec<Vec<f64>>,
    radius: f64,
    pitch: f64,
    nodes: usize,
    lip: f64,
    measure: f64,
}

fn write_manifold(out: &Path, m: &ApproximatingManifold) -> Result<()> {
    let n = m.anchors.first().map_or(0, |a| a.dim());
    let mut header = vec!["patch".to_string()];
    header.extend(coord_header("z", n));
    header.push("weight".into());
    let rows = m.patches.iter().enumerate().flat_map(|(pi, p)| {
        p.nodes.iter().filter(|nd| nd.owned()).map(move |nd| {
            let mut row = vec![pi.to_string()];
            row.extend(coords(&nd.z));
            row.push(nd.weight.to_string());
            row
        })
    });
    io::write_csv(&out.join("manifold.csv"), &header, rows)?;
    let meta: Vec<PatchMeta> = m
        .patches
        .iter()
        .enumerate()
        .map(|(i, p)| PatchMeta {
            patch: i,
            base: p.plane.base.coords().to_vec(),
            tangent: p.plane.frame.vectors().to_vec(),
            radius: p.radius,
            pitch: p.pitch,
            nodes: p.nodes.len(),
            lip: p.lip,
            measure: reif_core::manifold::patch_measure(p),
        })
        .collect();
    io::write_json(&out.join("patches.json"), &meta)
}

/// What `cover` writes to `certificate.json`.
#[derive(Serialize)]
pub struct CertificateFile<'a> {
    pub seed: u64,
    pub input: Option<&'a Path>,
    pub fixture: Option<&'a FixtureSpec>,
    pub complete: bool,
    pub measure_upper_bound: Option<f64>,
    pub decay_ok: bool,
    pub calibration_passed: Option<bool>,
    pub truth: Option<&'a GroundTruth>,
    pub certificate: &'a RectifiabilityCertificate,
}

pub fn run_cover(cfg: &RunConfig) -> Result<(RectifiabilityCertificate, Option<GroundTruth>)> {
    let src = cfg.source()?;
    let form = cfg.form()?;
    let params = cfg.cover_params(src.cloud.k());
    let root = cfg.root_ball(src.cloud.n())?;
    let cert = recursive_cover_with(&Rayon, &src.cloud, &params, &root, cfg.depth, form.as_ref())?;
    Ok((cert, src.truth))
}

/// Recursive cover; the certificate is written even when partial.
pub fn cover(cfg: &RunConfig) -> Result<()> {
    let (cert, truth) = run_cover(cfg)?;
    io::ensure_dir(&cfg.out)?;
    let bound = measure_upper_bound(&cert).ok();
    let file = CertificateFile {
        seed: cfg.seed,
        input: cfg.input.as_deref(),
        fixture: cfg.fixture.as_ref(),
        complete: !cert.partial,
        measure_upper_bound: bound,
        decay_ok: cert.decay_ratios.iter().all(|&r| r <= 0.1),
        calibration_passed: cert.calibration_passed,
        truth: truth.as_ref(),
        certificate: &cert,
    };
    io::write_json(&cfg.out.join("certificate.json"), &file)?;
    write_cover_csvs(&cfg.out, &cert)?;
    match bound {
        Some(b) => info!("A_est = {:.6}, bound = {b:.6}, depth {}", cert.a_est, cert.depth),
        None => warn!("partial certificate: A_est >= {:.6} after depth cap {}", cert.a_est, cert.max_depth),
    }
    cert.check().map_err(|_| CliError::Partial { depth: cert.max_depth })
}

fn write_cover_csvs(out: &Path, cert: &RectifiabilityCertificate) -> Result<()> {
    let n = cert.root.center.dim();
    let mut header = ["node", "level", "parent"].map(String::from).to_vec();
    header.extend(coord_header("x", n));
    header.extend(["radius", "tube_width", "s"].map(String::from));
    let rows = cert.tree.iter().enumerate().map(|(i, b)| {
        let mut row = vec![i.to_string(), b.level.to_string(), b.parent.map_or_else(String::new, |p| p.to_string())];
        row.extend(coords(&b.center));
        row.push(b.radius.to_string());
        row.push(b.tube_width.to_string());
        row.push(b.s.to_string());
        row
    });
    io::write_csv(&out.join("bad_balls.csv"), &header, rows)?;
    let header = [
        "level",
        "domains",
        "patch_measure",
        "residual_measure",
        "leaf_measure",
        "bad_balls",
        "sum_rk",
        "decay_ratio",
        "slab_balls",
        "slab_constant",
        "fibers",
        "fiber_failures",
        "calibration_min",
    ]
    .map(String::from);
    let rows = cert.levels.iter().enumerate().map(|(j, l)| {
        vec![
            l.level.to_string(),
            l.domains.to_string(),
            l.patch_measure.to_string(),
            l.residual_measure.to_string(),
            l.leaf_measure.to_string(),
            l.bad_radii.len().to_string(),
            l.sum_rk.to_string(),
            fmt_opt(cert.decay_ratios.get(j).copied()),
            l.slab_balls.to_string(),
            l.slab_constant.to_string(),
            l.fibers.to_string(),
            l.fiber_failures.to_string(),
            fmt_opt(l.calibration_min),
        ]
    });
    io::write_csv(&out.join("levels.csv"), &header, rows)
}

/// `beta_infty` at one radius for every `stride`-th sample.
pub fn beta(cfg: &RunConfig, radius: Option<f64>, stride: usize) -> Result<()> {
    let src = cfg.source()?;
    let cloud = &src.cloud;
    let r = radius.unwrap_or(cfg.ladder.r_max / 4.0);
    if !(r > 0.0 && r.is_finite()) {
        return Err(CliError::Config("beta radius must be positive".into()));
    }
    io::ensure_dir(&cfg.out)?;
    let ids = strided(cloud.len(), stride);
    let betas = Rayon.map(&ids, |_, &i| vec![beta_infty(cloud, cloud.point(i), r).ok()]);
    write_beta(&cfg.out.join("beta.csv"), cloud, &ids, &[r], &betas)?;
    let max = betas.iter().filter_map(|b| b[0].as_ref().map(|b| b.value)).fold(0.0, f64::max);
    info!("beta at r = {r}: max {max:.6} over {} centers", ids.len());
    Ok(())
}

#[derive(Serialize)]
struct CalibrationReport {
    seed: u64,
    comass: ComassReport,
    tangent: Option<CalibrationCheck>,
}

/// Sampled comass of the configured form and, when a cloud is given, the
/// form's minimum on the tangent planes of the approximating manifold.
pub fn calibrate_check(cfg: &RunConfig) -> Result<()> {
    let src = if cfg.input.is_some() || cfg.fixture.is_some() { Some(cfg.source()?) } else { None };
    let form: CalibrationForm = match (cfg.form()?, &src) {
        (Some(f), _) => f,
        (None, Some(s)) => CalibrationForm::volume_form(s.cloud.n(), s.cloud.k()),
        (None, None) => return Err(CliError::Config("calibrate-check needs a calibration file or a cloud".into())),
    };
    let comass = validate_eta_calibration_with(&Rayon, &form, cfg.comass_budget, cfg.seed);
    let tangent = match &src {
        Some(s) => {
            let params = cfg.cover_params(s.cloud.k());
            let ladder = cfg.ladder(&s.cloud)?;
            let rf = compute_s_field_with(&Rayon, &s.cloud, &ladder, cfg.eps);
            let field = level_field(&Rayon, &s.cloud, &rf, ladder.r0, &params, Some(&form))?;
            let mp = ManifoldParams { pitch_factor: params.pitch_factor, reach: params.reach, fiber: params.fiber, ..ManifoldParams::new(ladder.r0) };
            let m = build_manifold_with(&Rayon, &field, &s.cloud, &mp, Some(&cfg.root_ball(s.cloud.n())?))?;
            Some(tangent_calibration_check(&m, &form, cfg.alpha)?)
        }
        None => None,
    };
    io::ensure_dir(&cfg.out)?;
    let passed = comass.passed && tangent.as_ref().is_none_or(|t| t.passed);
    info!("comass {:.12} ({} samples), tangent min {:?}", comass.max_value, comass.samples, tangent.as_ref().map(|t| t.min));
    io::write_json(&cfg.out.join("calibration.json"), &CalibrationReport { seed: cfg.seed, comass, tangent })?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed("calibration check failed".into()))
    }
}

/// Writes `cloud.csv`, `truth.json` and the spec itself.
pub fn generate(cfg: &RunConfig) -> Result<()> {
    let spec = cfg.fixture.as_ref().ok_or_else(|| CliError::Config("generate needs --fixture".into()))?;
    let f = generate_fixture(spec).map_err(|e| CliError::Config(format!("fixture: {e}")))?;
    io::ensure_dir(&cfg.out)?;
    io::write_cloud_csv(&cfg.out.join("cloud.csv"), &f.points)?;
    io::write_json(&cfg.out.join("truth.json"), &serde_json::json!({ "k": f.k, "points": f.points.len(), "truth": f.truth }))?;
    io::write_json(&cfg.out.join("fixture.json"), spec)?;
    info!("generated {} points", f.points.len());
    Ok(())
}
