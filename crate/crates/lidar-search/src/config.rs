//! Flat key-value planner configuration file (TOML, no sections).
//!
//! Every field has a default; unknown keys are rejected. Angles are given
//! in degrees in the file and converted on load.

use crate::classify_gt::ClassifierParams;
use crate::error::{Error, Result};
use crate::planner::{EpisodeConfig, LabelMode, UtilityWeights};
use crate::world::SensorSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    // utility weights
    pub w_dist: f64,
    pub w_unknown: f64,
    pub w_frontier_path: f64,
    pub w_nonmap: f64,
    pub frontier_path_radius: f64,
    // mapping / planning
    pub resolution: f64,
    pub min_frontier_size: usize,
    pub registry_bin: f64,
    pub budget_s: f64,
    // sensors and motion
    pub n_beams: usize,
    pub lidar_max_range: f64,
    pub lidar_noise_sigma: f64,
    pub visual_fov_deg: f64,
    pub visual_max_range: f64,
    pub scan_rate_hz: f64,
    pub v_robot: f64,
    // ground-truth classifier
    pub sigma_s: f64,
    pub tau_ltf: f64,
    pub tau_stf: f64,
    pub history_window: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let w = UtilityWeights::default();
        let s = SensorSpec::default();
        let g = ClassifierParams::default();
        Self {
            w_dist: w.w_dist,
            w_unknown: w.w_unknown,
            w_frontier_path: w.w_frontier_path,
            w_nonmap: w.w_nonmap,
            frontier_path_radius: w.frontier_path_radius,
            resolution: 0.1,
            min_frontier_size: 5,
            registry_bin: 0.2,
            budget_s: 180.0,
            n_beams: s.n_beams,
            lidar_max_range: s.lidar_max_range,
            lidar_noise_sigma: s.lidar_noise_sigma,
            visual_fov_deg: s.visual_fov_angle.to_degrees(),
            visual_max_range: s.visual_max_range,
            scan_rate_hz: s.scan_rate_hz,
            v_robot: s.v_robot,
            sigma_s: g.sigma_s,
            tau_ltf: g.tau_ltf,
            tau_stf: g.tau_stf,
            history_window: g.history_window,
        }
    }
}

impl PlannerConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: PlannerConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.sensor_spec().validate()?;
        config.weights().validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sensor_spec(&self) -> SensorSpec {
        SensorSpec {
            n_beams: self.n_beams,
            lidar_max_range: self.lidar_max_range,
            lidar_noise_sigma: self.lidar_noise_sigma,
            visual_fov_angle: self.visual_fov_deg.to_radians(),
            visual_max_range: self.visual_max_range,
            scan_rate_hz: self.scan_rate_hz,
            v_robot: self.v_robot,
        }
    }

    pub fn weights(&self) -> UtilityWeights {
        UtilityWeights {
            w_dist: self.w_dist,
            w_unknown: self.w_unknown,
            w_frontier_path: self.w_frontier_path,
            w_nonmap: self.w_nonmap,
            frontier_path_radius: self.frontier_path_radius,
        }
    }

    pub fn gt_params(&self) -> ClassifierParams {
        ClassifierParams {
            sigma_s: self.sigma_s,
            tau_ltf: self.tau_ltf,
            tau_stf: self.tau_stf,
            history_window: self.history_window,
        }
    }

    pub fn episode(&self, label_mode: LabelMode, seed: u64) -> EpisodeConfig {
        EpisodeConfig {
            weights: self.weights(),
            label_mode,
            budget_s: self.budget_s,
            seed,
            resolution: self.resolution,
            min_frontier_size: self.min_frontier_size,
            registry_bin: self.registry_bin,
            gt_params: self.gt_params(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let config = PlannerConfig::default();
        let text = config.to_toml();
        let back = PlannerConfig::from_toml(&text).unwrap();
        assert_eq!(back.w_nonmap, config.w_nonmap);
        assert_eq!(back.n_beams, 897);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let config = PlannerConfig::from_toml("w_nonmap = 9.5\nbudget_s = 60.0\n").unwrap();
        assert_eq!(config.w_nonmap, 9.5);
        assert_eq!(config.budget_s, 60.0);
        assert_eq!(config.w_dist, 1.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PlannerConfig::from_toml("no_such_key = 1\n").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(PlannerConfig::from_toml("visual_fov_deg = 200.0\n").is_err());
        assert!(PlannerConfig::from_toml(
            "w_dist = 0.0\nw_unknown = 0.0\nw_frontier_path = 0.0\nw_nonmap = 0.0\n"
        )
        .is_err());
    }
}
