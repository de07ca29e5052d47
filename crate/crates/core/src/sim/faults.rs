//! Injectable faults, the recovery catalog, and the ground truth of which
//! recovery repairs which fault.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::model::Resource;
use crate::fault::{FaultKind, KindForest};
use crate::model::{FaultId, FixId, KindId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultType {
    NetworkOutage,
    MemoryOverload,
    DiskFull,
    /// A logic error in the application; nothing outside it can repair it.
    CustomNontransient,
}

impl FaultType {
    pub const ALL: [FaultType; 4] = [
        FaultType::NetworkOutage,
        FaultType::MemoryOverload,
        FaultType::DiskFull,
        FaultType::CustomNontransient,
    ];

    pub const TRANSIENT: [FaultType; 3] = [
        FaultType::NetworkOutage,
        FaultType::MemoryOverload,
        FaultType::DiskFull,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultType::NetworkOutage => "network-outage",
            FaultType::MemoryOverload => "memory-overload",
            FaultType::DiskFull => "disk-full",
            FaultType::CustomNontransient => "custom-nontransient",
        }
    }

    pub fn is_transient(self) -> bool {
        self != FaultType::CustomNontransient
    }

    pub fn resource(self) -> Option<Resource> {
        match self {
            FaultType::NetworkOutage => Some(Resource::NetworkLinks),
            FaultType::MemoryOverload => Some(Resource::MemoryBudget),
            FaultType::DiskFull => Some(Resource::DiskBudget),
            FaultType::CustomNontransient => None,
        }
    }

    /// What the application reports when the fault hits. Different faults
    /// may look alike from the outside.
    pub fn symptom(self) -> FaultId {
        FaultId::new(match self {
            FaultType::NetworkOutage | FaultType::DiskFull => "io-error",
            FaultType::MemoryOverload => "out-of-memory",
            FaultType::CustomNontransient => "app-exception",
        })
    }

    pub fn error_code(self) -> &'static str {
        match self {
            FaultType::NetworkOutage => "ECONNREFUSED",
            FaultType::MemoryOverload => "ENOMEM",
            FaultType::DiskFull => "ENOSPC",
            FaultType::CustomNontransient => "EAPP",
        }
    }

    /// Kind of the fault in the reference family tree.
    pub fn kind(self) -> KindId {
        KindId::new(match self {
            FaultType::NetworkOutage => "network",
            FaultType::MemoryOverload => "memory",
            FaultType::DiskFull => "disk",
            FaultType::CustomNontransient => "application",
        })
    }
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FaultType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FaultType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown fault type `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trigger {
    pub run: u64,
    /// The fault fires at the first probe event at or after this position.
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub fault: FaultType,
    pub trigger: Trigger,
}

impl FaultSpec {
    pub fn new(fault: FaultType, run: u64, seq: u64) -> Self {
        Self {
            fault,
            trigger: Trigger { run, seq },
        }
    }

    pub fn resource(&self) -> Option<Resource> {
        self.fault.resource()
    }
}

pub const RESTART_COMPONENT: &str = "restart-component";
pub const REOPEN_CONNECTION: &str = "reopen-connection";
pub const CLEAR_MEMORY: &str = "clear-memory";
pub const PURGE_DISK: &str = "purge-disk";
pub const RESTORE_CONFIG: &str = "restore-config";

/// Every recovery action the simulated application understands.
pub const FIX_CATALOG: [&str; 5] = [
    RESTART_COMPONENT,
    REOPEN_CONNECTION,
    CLEAR_MEMORY,
    PURGE_DISK,
    RESTORE_CONFIG,
];

/// The resource a recovery action resets, if any.
pub fn fix_target(fix: &FixId) -> Option<Option<Resource>> {
    match fix.as_str() {
        REOPEN_CONNECTION => Some(Some(Resource::NetworkLinks)),
        CLEAR_MEMORY => Some(Some(Resource::MemoryBudget)),
        PURGE_DISK => Some(Some(Resource::DiskBudget)),
        RESTART_COMPONENT => Some(Some(Resource::ConnectionPool)),
        RESTORE_CONFIG => Some(None),
        _ => None,
    }
}

/// Which fixes repair which fault: the evaluation oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootCauseTable {
    heals: BTreeMap<FaultType, BTreeSet<FixId>>,
}

impl Default for RootCauseTable {
    fn default() -> Self {
        let one = |f: &str| BTreeSet::from([FixId::new(f)]);
        Self {
            heals: BTreeMap::from([
                (FaultType::NetworkOutage, one(REOPEN_CONNECTION)),
                (FaultType::MemoryOverload, one(CLEAR_MEMORY)),
                (FaultType::DiskFull, one(PURGE_DISK)),
                (FaultType::CustomNontransient, BTreeSet::new()),
            ]),
        }
    }
}

impl RootCauseTable {
    pub fn healing_fixes(&self, fault: FaultType) -> impl Iterator<Item = &FixId> {
        self.heals.get(&fault).into_iter().flatten()
    }

    pub fn heals(&self, fault: FaultType, fix: &FixId) -> bool {
        self.heals.get(&fault).is_some_and(|s| s.contains(fix))
    }
}

/// Kind tree of the injectable faults: the three transient kinds under one
/// root, application errors on their own.
pub fn reference_kinds() -> KindForest {
    KindForest::new([
        FaultKind::root("transient"),
        FaultKind::child("network", "transient"),
        FaultKind::child("memory", "transient"),
        FaultKind::child("disk", "transient"),
        FaultKind::root("application"),
    ])
    .expect("reference kinds form a forest")
}
