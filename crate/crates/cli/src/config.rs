use std::path::Path;

use dppl_core::learn::TrainSettings;
use dppl_core::schedule::GpSettings;
use dppl_core::PowerConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Experiment parameters. Powers are given in dB relative to the noise power
/// and converted to linear ratios by [`ExperimentConfig::power_config`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mean_links: f64,
    pub disc_radius: f64,
    pub link_distance: f64,
    pub alpha: f64,
    pub p_high_db: f64,
    pub p_low_db: f64,
    pub p_max_db: f64,
    pub p_threshold_db: f64,
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
    pub gp: GpSettings,
    pub training: TrainSettings,
    /// Networks per size in `bench`.
    pub bench_reps: usize,
    /// Networks per size in `saturate`.
    pub saturation_count: usize,
    /// Points in the sum-rate grid of the CDF output.
    pub cdf_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mean_links: 20.0,
            disc_radius: 10.0,
            link_distance: 1.0,
            alpha: 2.0,
            p_high_db: 33.0,
            p_low_db: 13.0,
            p_max_db: 33.0,
            p_threshold_db: 23.0,
            train_count: 200,
            test_count: 200,
            seed: 0,
            gp: GpSettings::default(),
            training: TrainSettings::default(),
            bench_reps: 30,
            saturation_count: 100,
            cdf_points: 101,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: Self = toml::from_str(&text)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.train_count == 0 || self.test_count == 0 || self.bench_reps == 0 || self.saturation_count == 0 {
            return Err(CliError::Invalid("all counts must be at least 1".into()));
        }
        if !(self.mean_links > 0.0) || !(self.disc_radius > 0.0) || !(self.link_distance > 0.0) {
            return Err(CliError::Invalid(
                "mean_links, disc_radius and link_distance must be positive".into(),
            ));
        }
        if self.cdf_points < 2 {
            return Err(CliError::Invalid("cdf_points must be at least 2".into()));
        }
        self.gp.validate()?;
        self.power_config()?;
        Ok(())
    }

    pub fn power_config(&self) -> CliResult<PowerConfig> {
        Ok(PowerConfig::from_db(
            self.p_high_db,
            self.p_low_db,
            self.p_max_db,
            self.p_threshold_db,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_paper_setup() {
        let c = ExperimentConfig::default();
        assert!(c.validate().is_ok());
        let p = c.power_config().unwrap();
        assert!((p.p_high - 10f64.powf(3.3)).abs() < 1e-9);
        assert!((p.p_low - 10f64.powf(1.3)).abs() < 1e-12);
        assert!((p.p_threshold - 10f64.powf(2.3)).abs() < 1e-10);
        assert_eq!((c.train_count, c.test_count), (200, 200));
    }

    #[test]
    fn toml_overrides_and_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, "mean_links = 8.0\nseed = 5\n[gp]\nbeta = 1.2\n").unwrap();
        let c = ExperimentConfig::load(&path).unwrap();
        assert_eq!((c.mean_links, c.seed, c.gp.beta), (8.0, 5, 1.2));
        assert_eq!(c.gp.epsilon, GpSettings::default().epsilon);
        std::fs::write(&path, "mean_linkz = 8.0\n").unwrap();
        assert!(ExperimentConfig::load(&path).is_err());
        std::fs::write(&path, "p_low_db = 40.0\n").unwrap();
        assert!(ExperimentConfig::load(&path).is_err());
        std::fs::write(&path, "train_count = 0\n").unwrap();
        assert!(ExperimentConfig::load(&path).is_err());
    }
}
