//! The TOML configuration shared by `simulate` and `bench`.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::exchange::ClusterConfig;
use crate::fault::MatchParams;
use crate::heal::HealingConfig;
use crate::sim::{FaultSpec, FaultType, WorkloadSpec};
use crate::store::DEFAULT_DK_THRESHOLD;

/// One injected fault: `fault` hits node `node` during run `run`, at the
/// first probe event at or after `seq`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    pub node: usize,
    pub fault: FaultType,
    pub run: u64,
    pub seq: u64,
}

impl Injection {
    pub fn spec(&self) -> FaultSpec {
        FaultSpec::new(self.fault, self.run, self.seq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnowledgeConfig {
    /// Stores needed before the merged domain knowledge counts as mature.
    pub min_sources: usize,
    pub dk_threshold: usize,
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        Self {
            min_sources: 3,
            dk_threshold: DEFAULT_DK_THRESHOLD,
        }
    }
}

/// The benchmark experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSpec {
    pub nodes: usize,
    pub repeats: usize,
    /// Runs per node after which the metrics are read.
    pub run_counts: Vec<u64>,
    /// Fault used for the known-fault match measurement.
    pub probe_fault: FaultType,
    /// Trigger position of that fault; early enough that every request
    /// sequence fails the same way.
    pub probe_seq: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            nodes: 5,
            repeats: 10,
            run_counts: vec![1, 10, 50, 100, 500],
            probe_fault: FaultType::NetworkOutage,
            probe_seq: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Runs every node executes.
    pub runs: u64,
    pub cluster: ClusterConfig,
    pub workload: WorkloadSpec,
    pub matching: MatchParams,
    pub healing: HealingConfig,
    pub knowledge: KnowledgeConfig,
    pub bench: BenchSpec,
    pub faults: Vec<Injection>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            runs: 20,
            cluster: ClusterConfig::default(),
            workload: WorkloadSpec::default(),
            matching: MatchParams::default(),
            healing: HealingConfig::default(),
            knowledge: KnowledgeConfig::default(),
            bench: BenchSpec::default(),
            faults: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: SimConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |m: String| Err(HarnessError::Config(m));
        if self.runs == 0 {
            return err("runs must be at least 1".into());
        }
        if self.cluster.nodes == 0 {
            return err("cluster.nodes must be at least 1".into());
        }
        if self.knowledge.min_sources == 0 || self.knowledge.dk_threshold == 0 {
            return err("knowledge.min_sources and knowledge.dk_threshold must be positive".into());
        }
        let m = &self.matching;
        if !(0.0 < m.eps_exact && m.eps_exact < m.eps && m.eps < 0.5) {
            return err("matching needs 0 < eps_exact < eps < 0.5".into());
        }
        self.healing
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let b = &self.bench;
        if b.nodes == 0 || b.repeats == 0 || b.run_counts.is_empty() || b.run_counts.contains(&0) {
            return err("bench counts must all be at least 1".into());
        }
        for f in &self.faults {
            if f.node >= self.cluster.nodes {
                return err(format!(
                    "fault on node {} but the cluster has {} nodes",
                    f.node, self.cluster.nodes
                ));
            }
            if f.run >= self.runs {
                return err(format!(
                    "fault in run {} but only {} runs",
                    f.run, self.runs
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_a_fixed_point() {
        let mut c = SimConfig::default();
        c.faults.push(Injection {
            node: 1,
            fault: FaultType::DiskFull,
            run: 3,
            seq: 12,
        });
        let text = c.to_toml();
        let back = SimConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = SimConfig::from_toml("runs = 3\n[cluster]\nnodez = 2\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("nodez"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn injection_outside_cluster_rejected() {
        let text =
            "[cluster]\nnodes = 2\n[[faults]]\nnode = 2\nfault = \"disk-full\"\nrun = 0\nseq = 4\n";
        assert!(SimConfig::from_toml(text).is_err());
    }
}
