//! Experiment configuration: one TOML file with `plant`, `network`,
//! `policy` and `train` sections. Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::learning::{DelayDistribution, TrainConfig, DEFAULT_LAMBDAS};
use crate::plants::{ConveyorParams, PlantKind, PlantModel};
use crate::policies::PdGains;
use crate::scheduler::{default_mcs_library, McsEntry, NetworkConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSpec {
    pub horizon: usize,
    /// Disturbance variance of the scalar plant (the conveyor carries its
    /// own noise levels).
    pub scalar_noise_var: f64,
    pub model: PlantKind,
}

impl Default for PlantSpec {
    fn default() -> Self {
        PlantSpec {
            horizon: 100,
            scalar_noise_var: 0.0,
            model: PlantKind::ConveyorGrasp(ConveyorParams {
                belt_speed: 0.6,
                ..Default::default()
            }),
        }
    }
}

impl PlantSpec {
    pub fn build(&self) -> Result<PlantModel> {
        let built = match &self.model {
            PlantKind::LinearScalar(p) => PlantModel::linear_scalar(p.clone(), self.scalar_noise_var, self.horizon),
            PlantKind::ConveyorGrasp(p) => PlantModel::conveyor(p.clone(), self.horizon),
        };
        built.map_err(|e| Error::config("plant", e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSpec {
    pub bandwidth_mhz: f64,
    pub ru_bandwidth_mhz: f64,
    pub interval_ms: f64,
    pub snr_mean_db: f64,
    pub snr_std_db: f64,
    pub mcs: Vec<McsEntry>,
    pub log_occupancy: bool,
    /// Control period and frame arrival period.
    pub step_ms: f64,
    pub ul_bytes: u64,
    pub dl_bytes: u64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        let n = NetworkConfig::default();
        NetworkSpec {
            bandwidth_mhz: n.bandwidth_mhz,
            ru_bandwidth_mhz: n.ru_bandwidth_mhz,
            interval_ms: n.interval_ms,
            snr_mean_db: n.snr_mean_db,
            snr_std_db: n.snr_std_db,
            mcs: default_mcs_library(),
            log_occupancy: false,
            step_ms: 40.0,
            ul_bytes: 13_500,
            dl_bytes: 32,
        }
    }
}

impl NetworkSpec {
    pub fn scheduler_config(&self) -> NetworkConfig {
        NetworkConfig {
            bandwidth_mhz: self.bandwidth_mhz,
            ru_bandwidth_mhz: self.ru_bandwidth_mhz,
            interval_ms: self.interval_ms,
            snr_mean_db: self.snr_mean_db,
            snr_std_db: self.snr_std_db,
            mcs: self.mcs.clone(),
            log_occupancy: self.log_occupancy,
        }
    }

    pub fn ul_bits(&self) -> u64 {
        self.ul_bytes * 8
    }

    pub fn dl_bits(&self) -> u64 {
        self.dl_bytes * 8
    }

    /// Scheduling intervals per control step.
    pub fn intervals_per_step(&self) -> Result<u64> {
        let r = self.step_ms / self.interval_ms;
        if !(r >= 1.0) || (r - r.round()).abs() > 1e-9 {
            return Err(Error::config("network.step_ms", "must be a whole number of scheduling intervals"));
        }
        Ok(r.round() as u64)
    }

    /// RUs available per control period.
    pub fn rus_per_period(&self) -> Result<u64> {
        Ok(self.scheduler_config().ru_count()? as u64 * self.intervals_per_step()?)
    }

    /// RUs one loop offers per period when every frame uses the most robust
    /// MCS (the choice for a reliability target of 1).
    pub fn static_rus_per_loop(&self) -> u64 {
        let robust = &self.mcs[0];
        robust.rus_for(self.ul_bits()) as u64 + robust.rus_for(self.dl_bits()) as u64
    }

    /// Smallest plant count whose static offered load exceeds capacity.
    pub fn capacity_bound(&self) -> Result<usize> {
        let per = self.static_rus_per_loop();
        Ok((self.rus_per_period()? / per + 1) as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    /// Fixed PD baseline toward the object.
    Pd { kp: f64, kd: f64 },
    /// Trained by the control stage.
    Learned,
}

impl ControllerSpec {
    pub fn pd_gains(&self) -> Option<PdGains> {
        match self {
            ControllerSpec::Pd { kp, kd } => Some(PdGains { kp: *kp, kd: *kd }),
            ControllerSpec::Learned => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySpec {
    pub controller: ControllerSpec,
    /// Directory holding stage checkpoints; relative paths resolve against
    /// the output directory.
    pub checkpoint_dir: PathBuf,
    /// Age distribution for the estimator stage; defaults to uniform on
    /// `0..=train.max_age`.
    pub delays: Option<DelayDistribution>,
    pub lambdas: Vec<f64>,
    pub j_max: f64,
    /// Minimum held-out success rate for a λ to be eligible.
    pub success_floor: f64,
    /// Plant counts for the capacity sweep; empty means `1..=N_cap`.
    pub capacity_m: Vec<usize>,
}

impl Default for PolicySpec {
    fn default() -> Self {
        let g = PdGains::default();
        PolicySpec {
            controller: ControllerSpec::Pd { kp: g.kp, kd: g.kd },
            checkpoint_dir: PathBuf::from("checkpoints"),
            delays: None,
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            j_max: 0.0,
            success_floor: 0.9,
            capacity_m: vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Plants sharing the network in `eval`.
    pub plants: usize,
    pub episodes: usize,
    pub out_dir: PathBuf,
    pub plant: PlantSpec,
    pub network: NetworkSpec,
    pub policy: PolicySpec,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            plants: 1,
            episodes: 100,
            out_dir: PathBuf::from("runs"),
            plant: PlantSpec::default(),
            network: NetworkSpec::default(),
            policy: PolicySpec::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<root>", e.to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            if cfg.out_dir.is_relative() {
                cfg.out_dir = dir.join(&cfg.out_dir);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.plants == 0 {
            return Err(Error::config("plants", "at least one plant is required"));
        }
        self.plant.build()?;
        self.network.scheduler_config().validate()?;
        self.network.intervals_per_step()?;
        if self.network.ul_bytes == 0 || self.network.dl_bytes == 0 {
            return Err(Error::config("network.ul_bytes", "frame sizes must be positive"));
        }
        self.train.validate()?;
        if self.policy.lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::config("policy.lambdas", "λ must be nonnegative"));
        }
        if !(self.policy.j_max >= 0.0) {
            return Err(Error::config("policy.j_max", "must be nonnegative"));
        }
        if let Some(d) = &self.policy.delays {
            d.probabilities().map_err(|e| Error::config("policy.delays", e.to_string()))?;
        }
        if self.policy.capacity_m.contains(&0) {
            return Err(Error::config("policy.capacity_m", "plant counts must be positive"));
        }
        Ok(())
    }

    pub fn plant_model(&self) -> Result<PlantModel> {
        self.plant.build()
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        if self.policy.checkpoint_dir.is_absolute() {
            self.policy.checkpoint_dir.clone()
        } else {
            self.out_dir.join(&self.policy.checkpoint_dir)
        }
    }

    pub fn delay_distribution(&self) -> DelayDistribution {
        self.policy
            .delays
            .clone()
            .unwrap_or(DelayDistribution::Uniform { max: self.train.max_age })
    }

    /// Canonical text of the config, used for hashing.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn sha256(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_and_capacity_arithmetic() {
        let cfg = ExperimentConfig::default();
        let again = ExperimentConfig::from_toml_str(&cfg.canonical_toml()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(cfg.network.scheduler_config().ru_count().unwrap(), 20);
        assert_eq!(cfg.network.rus_per_period().unwrap(), 800);
        assert_eq!(cfg.network.static_rus_per_loop(), 80 + 1);
        assert_eq!(cfg.network.capacity_bound().unwrap(), 10);
    }

    #[test]
    fn unknown_key_names_its_path() {
        let err = ExperimentConfig::from_toml_str("[network]\nbandwith_mhz = 40\n").unwrap_err();
        match err {
            Error::Config { field, .. } => assert!(field.starts_with("network"), "{field}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn inconsistent_values_rejected() {
        for (text, path) in [
            ("plants = 0", "plants"),
            ("[network]\nbandwidth_mhz = 41", "network.bandwidth_mhz"),
            ("[train]\nelite_fraction = 0.9", "train.elite_fraction"),
            ("[plant.model]\nkind = \"conveyor_grasp\"\ngrasp_radius = -1.0", "plant"),
        ] {
            match ExperimentConfig::from_toml_str(text) {
                Err(Error::Config { field, .. }) => assert_eq!(field, path),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let cfg = ExperimentConfig::from_toml_str("seed = 5\n[plant.model]\nkind = \"linear_scalar\"\na = 0.8\n").unwrap();
        assert_eq!(cfg.seed, 5);
        assert!(matches!(cfg.plant.model, PlantKind::LinearScalar(ref p) if p.a == 0.8 && p.input_bound == 2.0));
    }
}
