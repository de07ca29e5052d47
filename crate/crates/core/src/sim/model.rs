//! Static description of the simulated server: call graph, resources,
//! environment and workload.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{EntityCategory, EntityKey, MethodId, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resource {
    NetworkLinks,
    MemoryBudget,
    DiskBudget,
    ConnectionPool,
}

impl Resource {
    pub const ALL: [Resource; 4] = [
        Resource::NetworkLinks,
        Resource::MemoryBudget,
        Resource::DiskBudget,
        Resource::ConnectionPool,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Resource::NetworkLinks => "network-links",
            Resource::MemoryBudget => "memory-budget",
            Resource::DiskBudget => "disk-budget",
            Resource::ConnectionPool => "connection-pool",
        }
    }

    /// Signature key under which the resource level is sampled.
    pub fn key(self) -> EntityKey {
        let path = match self {
            Resource::NetworkLinks => "net.links.up",
            Resource::MemoryBudget => "mem.free.mb",
            Resource::DiskBudget => "disk.free.mb",
            Resource::ConnectionPool => "db.pool.free",
        };
        EntityKey::dotted(EntityCategory::OpenResource, path)
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A request handler reachable from the dispatcher.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handler {
    pub method: MethodId,
    /// The call the handler makes one level deeper.
    pub leaf: MethodId,
    pub resource: Resource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    /// Requests served per run.
    pub requests_per_run: usize,
    /// Distinct request sequences the clients draw from.
    pub templates: usize,
    /// Template `i` is drawn with weight `popularity^i`.
    pub popularity: f64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            requests_per_run: 5,
            templates: 60,
            popularity: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppModel {
    pub entry: MethodId,
    pub dispatch: MethodId,
    pub handlers: Vec<Handler>,
    /// Nominal resource levels.
    pub resources: BTreeMap<Resource, i64>,
    pub environment: BTreeMap<String, Scalar>,
    pub workload: WorkloadSpec,
}

impl Default for AppModel {
    fn default() -> Self {
        Self::server(WorkloadSpec::default())
    }
}

impl AppModel {
    /// The reference server: accept, dispatch, then a database query, a file
    /// write or a network send.
    pub fn server(workload: WorkloadSpec) -> Self {
        let h = |m: &str, leaf: &str, resource| Handler {
            method: m.into(),
            leaf: leaf.into(),
            resource,
        };
        Self {
            entry: "server.accept".into(),
            dispatch: "server.dispatch".into(),
            handlers: vec![
                h("db.query", "db.pool.acquire", Resource::ConnectionPool),
                h("file.write", "fs.flush", Resource::DiskBudget),
                h("net.send", "net.socket.write", Resource::NetworkLinks),
            ],
            resources: BTreeMap::from([
                (Resource::NetworkLinks, 4),
                (Resource::MemoryBudget, 512),
                (Resource::DiskBudget, 2048),
                (Resource::ConnectionPool, 16),
            ]),
            environment: BTreeMap::from([
                ("env.region".to_string(), Scalar::from("eu-west")),
                ("env.runtime".to_string(), Scalar::from("jvm-17")),
                ("env.heap.mb".to_string(), Scalar::Int(512)),
            ]),
            workload,
        }
    }

    /// Every method, reachable from the entry point by construction.
    pub fn methods(&self) -> Vec<&MethodId> {
        let mut out = vec![&self.entry, &self.dispatch];
        for h in &self.handlers {
            out.push(&h.method);
            out.push(&h.leaf);
        }
        out
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.handlers.is_empty() {
            return Err("the dispatcher needs at least one handler".into());
        }
        if self.workload.requests_per_run == 0 || self.workload.templates == 0 {
            return Err("workload needs at least one request and one template".into());
        }
        if !(self.workload.popularity > 0.0 && self.workload.popularity <= 1.0) {
            return Err("template popularity must be in (0, 1]".into());
        }
        if let Some((r, _)) = self.resources.iter().find(|(_, &v)| v < 0) {
            return Err(format!("resource {r} has a negative level"));
        }
        for r in Resource::ALL {
            if !self.resources.contains_key(&r) {
                return Err(format!("resource {r} has no nominal level"));
            }
        }
        let distinct = (self.handlers.len() as f64).powi(self.workload.requests_per_run as i32);
        if (self.workload.templates as f64) > distinct {
            return Err(format!(
                "{} templates requested but only {distinct} distinct request sequences exist",
                self.workload.templates
            ));
        }
        Ok(())
    }

    /// Handler indices of template `t`. Distinct templates give distinct
    /// sequences.
    pub fn template(&self, t: usize) -> Vec<usize> {
        let base = self.handlers.len();
        let len = self.workload.requests_per_run;
        let space = (base as u128).saturating_pow(len as u32).max(1);
        // Multiplying by a number coprime with `base` permutes the space.
        let mut code = (t as u128 * 97) % space;
        let mut out = vec![0; len];
        for slot in out.iter_mut().rev() {
            *slot = (code % base as u128) as usize;
            code /= base as u128;
        }
        out
    }
}
