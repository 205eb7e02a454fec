//! Analysis configuration: discretization, solver tolerances and run seeds.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Local slope set used by the dynamic-programming reparameterization search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SlopeSet {
    /// Slopes {1/3, 1/2, 2/3, 1, 3/2, 2, 3} via neighbor offsets up to 3 cells.
    #[default]
    Default,
}

impl SlopeSet {
    /// Grid steps (di, dj) realizing the slope set.
    pub fn steps(self) -> &'static [(usize, usize)] {
        match self {
            SlopeSet::Default => &[(1, 1), (1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2)],
        }
    }
}

/// All knobs for a full analysis run.
///
/// Serializes to flat JSON; missing fields fall back to the defaults below,
/// so a config file only needs to mention what it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Samples per curve on the unit-circle parameter domain.
    pub m: usize,
    /// Waypoints used when rendering geodesic paths.
    pub waypoints: usize,
    /// Waypoints used internally when computing geodesic distances.
    pub geodesic_waypoints: usize,
    /// Coarse seed-search stride; 0 means m/16.
    pub seed_stride: usize,
    /// Identifier of the DP slope set.
    pub slope_set: SlopeSet,
    /// Relative energy-decrease tolerance for path straightening.
    pub geodesic_tol: f64,
    /// Iteration cap for path straightening.
    pub geodesic_max_iters: usize,
    /// Mean-update norm below which the Karcher mean is converged.
    pub mean_tol: f64,
    /// Iteration cap for Karcher mean gradient descent.
    pub mean_max_iters: usize,
    /// Step size for Karcher mean gradient descent.
    pub mean_step: f64,
    /// Closure-residual tolerance for pre-shape projection.
    pub projection_tol: f64,
    /// Cap on rotation/warp alternation rounds during registration.
    pub rotation_warp_rounds: usize,
    /// Karcher refinement iterations for group means inside permutation tests
    /// (0 = frozen-registration tangent averages at the pooled mean).
    pub perm_refine_iters: usize,
    /// Master RNG seed for everything stochastic.
    pub rng_seed: u64,
    /// Monte Carlo draws for enrichment probabilities.
    pub draws: usize,
    /// Number of label permutations B for the two-sample test.
    pub permutations: usize,
    /// Cluster count for hierarchical clustering.
    pub k_clusters: usize,
    /// Output directory for CLI commands.
    pub out_dir: PathBuf,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            m: 128,
            waypoints: 7,
            geodesic_waypoints: 7,
            seed_stride: 0,
            slope_set: SlopeSet::Default,
            geodesic_tol: 1e-6,
            geodesic_max_iters: 300,
            mean_tol: 1e-4,
            mean_max_iters: 100,
            mean_step: 0.5,
            projection_tol: 1e-6,
            rotation_warp_rounds: 20,
            perm_refine_iters: 1,
            rng_seed: 42,
            draws: 100_000,
            permutations: 1000,
            k_clusters: 2,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl AnalysisConfig {
    /// Parse a config from JSON, merging over the defaults.
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: AnalysisConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file, merging over the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 32 {
            return Err(Error::InvalidConfig(format!("m = {} is below 32", self.m)));
        }
        if self.waypoints < 5 || self.geodesic_waypoints < 5 {
            return Err(Error::InvalidConfig(
                "waypoint counts must be at least 5".into(),
            ));
        }
        for (name, v) in [
            ("geodesic_tol", self.geodesic_tol),
            ("mean_tol", self.mean_tol),
            ("mean_step", self.mean_step),
            ("projection_tol", self.projection_tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.seed_stride != 0 && self.m % self.seed_stride != 0 {
            return Err(Error::InvalidConfig(format!(
                "seed_stride {} does not divide m {}",
                self.seed_stride, self.m
            )));
        }
        if self.k_clusters == 0 {
            return Err(Error::InvalidConfig("k_clusters must be at least 1".into()));
        }
        Ok(())
    }

    /// Effective seed-search stride (resolves the 0 = m/16 convention).
    pub fn effective_seed_stride(&self, m: usize) -> usize {
        if self.seed_stride != 0 {
            self.seed_stride
        } else {
            (m / 16).max(1)
        }
    }

    /// Hex SHA-256 digest of the canonical JSON form; embedded in every
    /// emitted table so results are traceable to the exact configuration.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        AnalysisConfig::default().validate().unwrap();
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let mut cfg = AnalysisConfig::default();
        cfg.m = 96;
        cfg.geodesic_tol = 3.5e-7;
        cfg.rng_seed = 991;
        let back = AnalysisConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.digest(), back.digest());
    }

    #[test]
    fn partial_json_merges_over_defaults() {
        let cfg = AnalysisConfig::from_json(r#"{"m": 64, "rng_seed": 7}"#).unwrap();
        assert_eq!(cfg.m, 64);
        assert_eq!(cfg.rng_seed, 7);
        assert_eq!(cfg.waypoints, AnalysisConfig::default().waypoints);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(AnalysisConfig::from_json(r#"{"m": 8}"#).is_err());
        assert!(AnalysisConfig::from_json(r#"{"mean_tol": 0.0}"#).is_err());
        assert!(AnalysisConfig::from_json(r#"{"seed_stride": 7}"#).is_err());
    }
}
