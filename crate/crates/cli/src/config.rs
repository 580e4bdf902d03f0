//! Run configuration files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use glvortex::evolve::Controls;
use glvortex::spiral::NewtonOptions;
use glvortex::{SolveOptions, SurfaceConfig, SurfaceKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub surface: SurfaceConfig,
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_range: Option<[f64; 2]>,
    /// Grid size of `diagram`.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Number of bifurcation points for `eigen`.
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub solve: SolveOptions,
    #[serde(default)]
    pub spiral: SpiralSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpiralSection {
    /// End of the straight sweep from `(0, 0)`.
    pub target: [f64; 2],
    pub path_steps: usize,
    /// Explicit path; overrides `target`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<[f64; 2]>>,
    /// Source labels; all nontrivial equilibria by default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sources: Option<Vec<String>>,
    pub newton: NewtonOptions,
}

impl Default for SpiralSection {
    fn default() -> Self {
        Self { target: [0.05, 0.02], path_steps: 10, path: None, sources: None, newton: NewtonOptions::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolveMode {
    Harvest,
    Trace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    pub mode: EvolveMode,
    /// `bump`, or the label of an equilibrium (`O`, `0+`, …).
    pub initial: String,
    /// Multiple of the most unstable eigenfunction added to the initial
    /// equilibrium in trace mode.
    pub perturbation: f64,
    pub t_end: f64,
    pub controls: Controls,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self { mode: EvolveMode::Harvest, initial: "bump".into(), perturbation: 0.0, t_end: 1e4, controls: Controls::default() }
    }
}

fn default_m() -> u32 {
    1
}

fn default_steps() -> usize {
    41
}

fn default_count() -> usize {
    6
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            surface: SurfaceConfig { kind: SurfaceKind::Sphere, s_star: None, samples: None, boundary_empty: None, robin: None },
            m: 1,
            lambda: None,
            lambda_range: None,
            steps: default_steps(),
            count: default_count(),
            solve: SolveOptions::default(),
            spiral: SpiralSection::default(),
            evolve: EvolveSection::default(),
            out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Parse JSON; errors carry line, column and field names.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let n = self.solve.mesh_nodes;
        if !n.is_power_of_two() || !(256..=16384).contains(&n) {
            bail!("solve.mesh_nodes = {n}: must be a power of two between 256 and 16384");
        }
        if self.m == 0 {
            bail!("m must be at least 1");
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                bail!("lambda = {l}: must be positive");
            }
        }
        if let Some([lo, hi]) = self.lambda_range {
            if !(lo > 0.0 && hi > lo) {
                bail!("lambda_range = [{lo}, {hi}]: need 0 < lo < hi");
            }
        }
        let sc = &self.solve.scan;
        let c = &self.evolve.controls;
        let tolerances = [
            ("solve.gap", self.solve.gap),
            ("solve.polish_tol", self.solve.polish_tol),
            ("solve.scan.scan_rtol", sc.scan_rtol),
            ("solve.scan.refine_rtol", sc.refine_rtol),
            ("solve.scan.escape_bound", sc.escape_bound),
            ("spiral.newton.tol", self.spiral.newton.tol),
            ("evolve.controls.local_tol", c.local_tol),
            ("evolve.controls.stationary_tol", c.stationary_tol),
            ("evolve.controls.cadence", c.cadence),
            ("evolve.controls.h_initial", c.h_initial),
            ("evolve.controls.h_max_scale", c.h_max_scale),
        ];
        for (name, v) in tolerances {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} = {v}: must be positive");
            }
        }
        Ok(())
    }

    /// Multiply every convergence tolerance by `x`.
    pub fn scale_tolerances(&mut self, x: f64) {
        self.solve.polish_tol *= x;
        self.solve.scan.scan_rtol *= x;
        self.solve.scan.refine_rtol *= x;
        self.spiral.newton.tol *= x;
        self.evolve.controls.local_tol *= x;
        self.evolve.controls.stationary_tol *= x;
    }

    pub fn require_lambda(&self) -> anyhow::Result<f64> {
        self.lambda.context("this command needs \"lambda\" in the config (or --lambda)")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = RunConfig::parse(r#"{"surface": {"kind": "sphere"}, "lambda": 8}"#).unwrap();
        assert_eq!(cfg.m, 1);
        assert_eq!(cfg.solve.mesh_nodes, 2048);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_field_is_named_with_position() {
        let err = RunConfig::parse("{\n  \"surface\": {\"kind\": \"sphere\"},\n  \"lamda\": 8\n}").unwrap_err().to_string();
        assert!(err.contains("lamda") && err.contains("line 3"), "{err}");
        let err = RunConfig::parse(r#"{"surface": {"kind": "sphere"}, "solve": {"mesh": 3}}"#).unwrap_err().to_string();
        assert!(err.contains("mesh"), "{err}");
    }

    #[test]
    fn mesh_must_be_power_of_two() {
        let mut cfg = RunConfig::default();
        cfg.solve.mesh_nodes = 3000;
        assert!(cfg.validate().is_err());
        cfg.solve.mesh_nodes = 32768;
        assert!(cfg.validate().is_err());
        cfg.solve.mesh_nodes = 256;
        cfg.validate().unwrap();
    }

    #[test]
    fn negative_tolerance_rejected() {
        let mut cfg = RunConfig::default();
        cfg.evolve.controls.local_tol = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.lambda = Some(4.0);
        assert_ne!(a.hash(), b.hash());
    }
}
