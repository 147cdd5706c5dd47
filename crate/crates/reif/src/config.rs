//! Run configuration: JSON file, then command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use reif_core::calibration::CalibrationForm;
use reif_core::covering::CoverParams;
use reif_core::fixtures::{generate, FixtureSpec, GroundTruth};
use reif_core::multiscale::{PointCloud, ScaleConstants, ScaleLadder};
use reif_core::{Ball, Point};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub r_max: f64,
    /// Finest scale; derived from the sample spacing when absent.
    pub r0: Option<f64>,
    pub ratio: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self { r_max: 1.0, r0: None, ratio: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Covering knobs beyond the theorem's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverTuning {
    pub resolution_factor: f64,
    pub tilde_divisor: f64,
    pub bar_factor: f64,
    pub gap_threshold: f64,
    pub pitch_factor: f64,
    pub reach: f64,
}

impl Default for CoverTuning {
    fn default() -> Self {
        let p = CoverParams::new(1, 0.1);
        Self {
            resolution_factor: p.resolution_factor,
            tilde_divisor: p.consts.tilde_divisor,
            bar_factor: p.consts.bar_factor,
            gap_threshold: p.gap_threshold,
            pitch_factor: p.pitch_factor,
            reach: p.reach,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub fixture: Option<FixtureSpec>,
    /// Target dimension; required for inputs that do not carry one.
    pub k: Option<usize>,
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
    pub eta: f64,
    pub ladder: LadderConfig,
    pub calibration: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads, 0 for all cores. Never serialized: results do not
    /// depend on it.
    #[serde(skip_serializing)]
    pub threads: usize,
    pub depth: usize,
    /// Root ball of the cover; the origin-centred ball of radius `r_max`
    /// when absent.
    pub root: Option<RootBall>,
    pub cover: CoverTuning,
    pub comass_budget: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            fixture: None,
            k: None,
            eps: 0.01,
            delta: 0.1,
            alpha: 0.9,
            eta: 0.0,
            ladder: LadderConfig::default(),
            calibration: None,
            out: PathBuf::from("reif-out"),
            seed: 0,
            threads: 0,
            depth: 12,
            root: None,
            cover: CoverTuning::default(),
            comass_budget: 256,
        }
    }
}

/// A loaded cloud with whatever ground truth came with it.
pub struct Source {
    pub cloud: PointCloud,
    pub truth: Option<GroundTruth>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad("eps must lie in (0, 1)");
        }
        if !(self.delta > 0.0) {
            return bad("delta must be positive");
        }
        if !(self.eta >= 0.0 && 2.0 * self.eta < self.alpha && self.alpha < 1.0) {
            return bad("need 2 eta < alpha < 1");
        }
        if self.k == Some(0) {
            return bad("k must be positive");
        }
        let l = &self.ladder;
        if !(l.r_max > 0.0 && l.r_max.is_finite()) {
            return bad("ladder.r_max must be positive");
        }
        if !(l.ratio > 0.0 && l.ratio < 1.0) {
            return bad("ladder.ratio must lie in (0, 1)");
        }
        if let Some(r0) = l.r0 {
            if !(r0 > 0.0 && r0 <= l.r_max) {
                return bad("ladder.r0 must lie in (0, r_max]");
            }
        }
        if let Some(root) = &self.root {
            if !(root.radius > 0.0) || root.center.iter().any(|x| !x.is_finite()) {
                return bad("root ball needs a finite center and positive radius");
            }
        }
        if self.input.is_some() && self.fixture.is_some() {
            return bad("give either an input file or a fixture, not both");
        }
        self.cover_params(1).validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn cover_params(&self, k: usize) -> CoverParams {
        let mut p = CoverParams::new(k, self.eps);
        p.alpha = self.alpha;
        p.eta = self.eta;
        p.delta = self.delta;
        p.ladder_ratio = self.ladder.ratio;
        if let Some(r0) = self.ladder.r0 {
            p.r0_ratio = r0 / self.ladder.r_max;
        }
        p.resolution_factor = self.cover.resolution_factor;
        p.consts = ScaleConstants { tilde_divisor: self.cover.tilde_divisor, bar_factor: self.cover.bar_factor };
        p.gap_threshold = self.cover.gap_threshold;
        p.pitch_factor = self.cover.pitch_factor;
        p.reach = self.cover.reach;
        p
    }

    /// The sample cloud from the input file or the fixture.
    pub fn source(&self) -> Result<Source> {
        let (points, stored_k, truth) = match (&self.input, &self.fixture) {
            (Some(path), _) => {
                let c = io::read_cloud(path)?;
                (c.points, c.k, None)
            }
            (None, Some(spec)) => {
                let f = generate(spec).map_err(|e| CliError::Config(format!("fixture: {e}")))?;
                (f.points, Some(f.k), Some(f.truth))
            }
            (None, None) => return Err(CliError::Config("no input file or fixture given".into())),
        };
        let k = self.k.or(stored_k).ok_or_else(|| CliError::Config("k is required for this input".into()))?;
        let cloud = PointCloud::new(points, k).map_err(|e| match &self.input {
            Some(p) => CliError::input(p, e),
            None => CliError::Config(e.to_string()),
        })?;
        Ok(Source { cloud, truth })
    }

    /// Finest scale: the configured `r0`, else `r_max / 32` but never below
    /// four sample spacings.
    pub fn ladder(&self, cloud: &PointCloud) -> Result<ScaleLadder> {
        let l = &self.ladder;
        let r0 = l.r0.unwrap_or_else(|| (l.r_max / 32.0).max(self.cover.resolution_factor * cloud.resolution()).min(l.r_max));
        ScaleLadder::new(l.r_max, r0, l.ratio).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn root_ball(&self, n: usize) -> Result<Ball> {
        match &self.root {
            Some(r) if r.center.len() != n => Err(CliError::Config(format!("root center has {} coordinates, cloud has {n}", r.center.len()))),
            Some(r) => Ball::new(Point::new(r.center.clone()), r.radius).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(Ball { center: Point::origin(n), radius: self.ladder.r_max }),
        }
    }

    pub fn form(&self) -> Result<Option<CalibrationForm>> {
        self.calibration.as_deref().map(io::read_form).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn alpha_eta_window() {
        let c = RunConfig { alpha: 0.5, eta: 0.3, ..Default::default() };
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let c = RunConfig { alpha: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"eps": 0.05, "ladder": {"r_max": 2}, "fixture": {"kind": "holed_segment", "resolution": 11}}"#).unwrap();
        assert_eq!(c.eps, 0.05);
        assert_eq!(c.ladder.ratio, 0.5);
        assert_eq!(c.depth, 12);
        assert!(c.fixture.is_some());
        assert!(serde_json::from_str::<RunConfig>(r#"{"epsilon": 0.05}"#).is_err());
    }

    #[test]
    fn threads_are_not_serialized() {
        let c = RunConfig { threads: 7, ..Default::default() };
        assert!(!serde_json::to_string(&c).unwrap().contains("threads"));
    }
}
