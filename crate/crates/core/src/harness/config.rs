//! TOML scenario configuration. Every key is optional; see the README for
//! the full list and defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::labsim::{AntibodyDistribution, OfferorPolicy};
use crate::ledger::DEFAULT_BLOCK_INTERVAL_MS;
use crate::oracle::{FaultMode, DEFAULT_DEADLINE_MS};
use crate::sim::SimConfig;
use crate::storage::NetworkModel;
use crate::types::{Diagnostic, TestType};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub block_interval_ms: u64,
    pub initial_supply: u64,
    /// Histogram CSV; the bundled copy is used when unset.
    pub distribution: Option<PathBuf>,
    pub net: NetworkModel,
    pub storage: StorageConfig,
    pub oracle: OracleConfig,
    pub patients: Vec<PatientConfig>,
    pub labs: Vec<LabConfig>,
    pub companies: Vec<CompanyConfig>,
    pub incentive: IncentiveConfig,
    pub inject: InjectConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StorageConfig {
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub deadline_ms: u64,
    /// One entry per node; empty means all honest.
    pub faults: Vec<FaultMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientConfig {
    pub name: String,
    #[serde(default = "default_patient_tokens")]
    pub tokens: u64,
    #[serde(default = "default_test_type")]
    pub test_type: TestType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    pub name: String,
    #[serde(default)]
    pub policy: OfferorPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompanyConfig {
    pub name: String,
    #[serde(default = "default_company_tokens")]
    pub tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncentiveConfig {
    pub reward_per_patient: u64,
    pub test_type: TestType,
    pub diagnostic: Option<Diagnostic>,
}

/// Failure injection for the end-to-end scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectConfig {
    /// The patient tries to open the report with a wrong password.
    pub wrong_password: bool,
    /// Someone other than the patient asks the oracle for the report.
    pub unauthorized_retriever: bool,
}

fn default_patient_tokens() -> u64 {
    200
}

fn default_company_tokens() -> u64 {
    100
}

fn default_test_type() -> TestType {
    TestType::Antibody
}

impl Default for StorageConfig {
    fn default() -> Self {
        StorageConfig { nodes: 3 }
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            deadline_ms: DEFAULT_DEADLINE_MS,
            faults: Vec::new(),
        }
    }
}

impl Default for IncentiveConfig {
    fn default() -> Self {
        IncentiveConfig {
            reward_per_patient: 5,
            test_type: TestType::Antibody,
            diagnostic: None,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let patient = |i| PatientConfig {
            name: format!("patient-{i}"),
            tokens: default_patient_tokens(),
            test_type: TestType::Antibody,
        };
        ScenarioConfig {
            seed: 1,
            block_interval_ms: DEFAULT_BLOCK_INTERVAL_MS,
            initial_supply: 1_000_000,
            distribution: None,
            net: NetworkModel::default(),
            storage: StorageConfig::default(),
            oracle: OracleConfig::default(),
            patients: (1..=3).map(patient).collect(),
            labs: (1..=2)
                .map(|i| LabConfig {
                    name: format!("lab-{i}"),
                    policy: OfferorPolicy::default(),
                })
                .collect(),
            companies: vec![CompanyConfig {
                name: "company-1".into(),
                tokens: default_company_tokens(),
            }],
            incentive: IncentiveConfig::default(),
            inject: InjectConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.block_interval_ms == 0 {
            return bad("block_interval_ms must be positive");
        }
        if self.net.bandwidth_bytes_per_ms == 0 {
            return bad("net.bandwidth_bytes_per_ms must be positive");
        }
        if self.storage.nodes == 0 {
            return bad("storage.nodes must be at least 1");
        }
        if !self.oracle.faults.is_empty() && self.oracle.faults.len() != self.storage.nodes {
            return bad("oracle.faults must list one mode per storage node");
        }
        if self.patients.is_empty() || self.labs.is_empty() {
            return bad("at least one patient and one lab are required");
        }
        let mut names: Vec<&str> = self
            .patients
            .iter()
            .map(|p| p.name.as_str())
            .chain(self.labs.iter().map(|l| l.name.as_str()))
            .chain(self.companies.iter().map(|c| c.name.as_str()))
            .collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("actor names must be unique");
        }
        for lab in &self.labs {
            lab.policy
                .validate()
                .map_err(|e| HarnessError::Config(format!("lab {}: {e}", lab.name)))?;
        }
        Ok(())
    }

    pub fn load_distribution(&self) -> Result<AntibodyDistribution, HarnessError> {
        match &self.distribution {
            Some(p) => AntibodyDistribution::load(p).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display()))),
            None => Ok(AntibodyDistribution::bundled()),
        }
    }

    pub fn faults(&self) -> Vec<FaultMode> {
        if self.oracle.faults.is_empty() {
            vec![FaultMode::Honest; self.storage.nodes]
        } else {
            self.oracle.faults.clone()
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            block_interval_ms: self.block_interval_ms,
            net: self.net,
            node_faults: self.faults(),
            oracle_deadline_ms: self.oracle.deadline_ms,
            initial_supply: self.initial_supply,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ScenarioConfig::from_toml("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn parses_keys() {
        let cfg = ScenarioConfig::from_toml(
            r#"
seed = 9
block_interval_ms = 500
[net]
latency_ms = 10
bandwidth_bytes_per_ms = 16
[storage]
nodes = 2
[oracle]
faults = ["honest", "silent"]
[[patients]]
name = "p"
test_type = "pcr"
[[labs]]
name = "l"
[labs.policy]
price_min = 1
price_max = 2
delivery_days_min = 1
delivery_days_max = 1
accuracy_pct = 90
test_types = ["pcr"]
[inject]
wrong_password = true
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.net.bandwidth_bytes_per_ms, 16);
        assert_eq!(cfg.faults(), vec![FaultMode::Honest, FaultMode::Silent]);
        assert_eq!(cfg.patients[0].test_type, TestType::Pcr);
        assert_eq!(cfg.labs[0].policy.price_max, 2);
        assert!(cfg.inject.wrong_password);
        assert_eq!(cfg.companies.len(), 1);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ScenarioConfig::from_toml("bogus = 1").is_err());
        assert!(ScenarioConfig::from_toml("[storage]\nnodes = 0").is_err());
        assert!(ScenarioConfig::from_toml("[oracle]\nfaults = [\"honest\"]").is_err());
        assert!(ScenarioConfig::from_toml("[[patients]]\nname = \"lab-1\"").is_err());
        assert!(ScenarioConfig::from_toml("[net]\nbandwidth_bytes_per_ms = 0").is_err());
    }
}
