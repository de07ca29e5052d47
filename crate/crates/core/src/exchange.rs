//! Deterministic simulated network over which nodes share their DSTs.
//!
//! Every node keeps a replica ("mirror") of each peer's DST. A message either
//! replaces a mirror wholesale (full mode) or patches it with the changes since
//! the version the peer last received (incremental mode). After applying a
//! message the receiver merges the mirror into its own DST, so both modes end
//! in exactly the same state.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::meter::WorkMeter;
use crate::model::{NodeId, SignatureTrace, WidenPolicy};
use crate::store::{dst_to_text, Delta, Dst, MergePolicy, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShareMode {
    #[default]
    Full,
    Incremental,
}

impl FromStr for ShareMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(ShareMode::Full),
            "incremental" => Ok(ShareMode::Incremental),
            other => Err(format!(
                "unknown mode `{other}` (expected full or incremental)"
            )),
        }
    }
}

impl fmt::Display for ShareMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShareMode::Full => "full",
            ShareMode::Incremental => "incremental",
        })
    }
}

/// Who shares with whom. Peers are node indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    #[default]
    FullyConnected,
    /// Node 0 is the hub.
    Star,
    Ring,
    Line,
    Custom {
        peers: Vec<Vec<usize>>,
    },
}

impl Topology {
    /// Peer indices of every node.
    pub fn peers(&self, nodes: usize) -> Result<Vec<Vec<usize>>, ExchangeError> {
        let out = match self {
            Topology::FullyConnected => (0..nodes)
                .map(|i| (0..nodes).filter(|&j| j != i).collect())
                .collect(),
            Topology::Star => (0..nodes)
                .map(|i| match i {
                    0 => (1..nodes).collect(),
                    _ => vec![0],
                })
                .collect(),
            Topology::Ring => (0..nodes)
                .map(|i| {
                    let mut p = vec![(i + 1) % nodes, (i + nodes - 1) % nodes];
                    p.sort_unstable();
                    p.dedup();
                    p.retain(|&j| j != i);
                    p
                })
                .collect(),
            Topology::Line => (0..nodes)
                .map(|i| {
                    let mut p = Vec::new();
                    if i > 0 {
                        p.push(i - 1);
                    }
                    if i + 1 < nodes {
                        p.push(i + 1);
                    }
                    p
                })
                .collect(),
            Topology::Custom { peers } => {
                if peers.len() != nodes {
                    return Err(ExchangeError::InvalidConfig(format!(
                        "custom topology lists {} nodes, cluster has {nodes}",
                        peers.len()
                    )));
                }
                for (i, p) in peers.iter().enumerate() {
                    if let Some(&j) = p.iter().find(|&&j| j >= nodes || j == i) {
                        return Err(ExchangeError::InvalidConfig(format!(
                            "node {i} lists invalid peer {j}"
                        )));
                    }
                }
                peers
                    .iter()
                    .map(|p| {
                        let mut p = p.clone();
                        p.sort_unstable();
                        p.dedup();
                        p
                    })
                    .collect()
            }
        };
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub nodes: usize,
    pub topology: Topology,
    /// Ticks between two shares of the same node.
    pub share_interval: u64,
    pub mode: ShareMode,
    pub seed: u64,
    pub dst_threshold: usize,
    /// Chance that a message is lost in transit. Zero by default.
    pub drop_probability: f64,
    /// Share of coinciding signature keys for two STs to be merged.
    pub key_overlap: f64,
    /// Largest value set kept before widening to a range or `any`.
    pub set_cap: usize,
}

impl ClusterConfig {
    pub fn merge_policy(&self) -> MergePolicy {
        MergePolicy {
            key_overlap: self.key_overlap,
            widen: WidenPolicy {
                set_cap: self.set_cap,
            },
        }
    }
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            nodes: 5,
            topology: Topology::FullyConnected,
            share_interval: 10,
            mode: ShareMode::Full,
            seed: 0,
            dst_threshold: 256,
            drop_probability: 0.0,
            key_overlap: MergePolicy::default().key_overlap,
            set_cap: WidenPolicy::default().set_cap,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExchangeError {
    #[error("invalid cluster configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} message(s) still in flight")]
    PendingMessages(usize),
    #[error("no node with index {0}")]
    UnknownNode(usize),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone)]
pub enum Payload {
    Full(Dst),
    Delta(Delta),
}

impl Payload {
    /// ST records carried on the wire.
    pub fn record_count(&self) -> usize {
        match self {
            Payload::Full(d) => d.len(),
            Payload::Delta(d) => d.record_count(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExchangeMessage {
    pub sender: NodeId,
    pub timestamp: u64,
    pub payload: Payload,
}

/// Logical time. Advances by exactly one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct SimClock {
    tick: u64,
}

impl SimClock {
    pub fn now(&self) -> u64 {
        self.tick
    }

    pub fn advance(&mut self) {
        self.tick += 1;
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    id: NodeId,
    dst: Dst,
    inbox: Vec<ExchangeMessage>,
    share_interval: u64,
    peers: Vec<usize>,
    mirrors: BTreeMap<NodeId, Dst>,
    /// Version of our DST each peer's mirror is known to hold.
    acked: BTreeMap<NodeId, u64>,
}

impl Node {
    pub fn id(&self) -> &NodeId {
        &self.id
    }

    pub fn dst(&self) -> &Dst {
        &self.dst
    }

    pub fn peers(&self) -> &[usize] {
        &self.peers
    }

    pub fn share_interval(&self) -> u64 {
        self.share_interval
    }

    pub fn pending(&self) -> usize {
        self.inbox.len()
    }

    fn shares_at(&self, tick: u64) -> bool {
        tick.is_multiple_of(self.share_interval)
    }
}

/// Traffic counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExchangeStats {
    pub messages: u64,
    pub snapshots: u64,
    pub deltas: u64,
    pub records_sent: u64,
    pub dropped: u64,
    pub stale: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TickReport {
    pub emitted: usize,
    pub delivered: usize,
    pub dropped: usize,
}

pub fn node_name(index: usize) -> NodeId {
    NodeId::new(format!("n{index}"))
}

#[derive(Debug, Clone)]
pub struct Cluster {
    config: ClusterConfig,
    nodes: Vec<Node>,
    clock: SimClock,
    rng: ChaCha8Rng,
    stats: ExchangeStats,
    meter: WorkMeter,
}

impl Cluster {
    pub fn new(config: ClusterConfig) -> Result<Self, ExchangeError> {
        if config.nodes == 0 {
            return Err(ExchangeError::InvalidConfig(
                "at least one node required".into(),
            ));
        }
        if config.share_interval == 0 {
            return Err(ExchangeError::InvalidConfig(
                "share interval must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&config.key_overlap) || config.set_cap == 0 {
            return Err(ExchangeError::InvalidConfig(
                "key overlap must be in [0, 1] and set cap at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&config.drop_probability) {
            return Err(ExchangeError::InvalidConfig(
                "drop probability must be in [0, 1]".into(),
            ));
        }
        let peers = config.topology.peers(config.nodes)?;
        let nodes = peers
            .into_iter()
            .enumerate()
            .map(|(i, peers)| Node {
                id: node_name(i),
                dst: Dst::with_policy(node_name(i), config.dst_threshold, config.merge_policy()),
                inbox: Vec::new(),
                share_interval: config.share_interval,
                peers,
                mirrors: BTreeMap::new(),
                acked: BTreeMap::new(),
            })
            .collect();
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0e1c_4a46_e000),
            config,
            nodes,
            clock: SimClock::default(),
            stats: ExchangeStats::default(),
            meter: WorkMeter::new(),
        })
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn stats(&self) -> ExchangeStats {
        self.stats
    }

    /// Comparison work spent merging received stores.
    pub fn meter(&self) -> WorkMeter {
        self.meter
    }

    pub fn dst(&self, node: usize) -> &Dst {
        &self.nodes[node].dst
    }

    /// Direct write access for the node's own collector and healer.
    pub fn dst_mut(&mut self, node: usize) -> &mut Dst {
        &mut self.nodes[node].dst
    }

    /// Records one locally observed ST.
    pub fn record_st(&mut self, node: usize, st: SignatureTrace) -> bool {
        let mut meter = WorkMeter::new();
        let changed = self.nodes[node].dst.merge_st_metered(st, &mut meter);
        self.meter += meter;
        changed
    }

    pub fn pending(&self) -> usize {
        self.nodes.iter().map(Node::pending).sum()
    }

    /// Emit phase: every node due at the current tick sends to all peers.
    pub fn emit(&mut self) -> usize {
        let now = self.clock.now();
        let mut outgoing: Vec<(usize, ExchangeMessage)> = Vec::new();
        for node in &self.nodes {
            if !node.shares_at(now) {
                continue;
            }
            for &peer in &node.peers {
                let peer_id = &self.nodes[peer].id;
                let payload = match (self.config.mode, node.acked.get(peer_id)) {
                    (ShareMode::Incremental, Some(&v)) => match node.dst.delta_since(v) {
                        Ok(d) => Payload::Delta(d),
                        Err(_) => Payload::Full(node.dst.snapshot()),
                    },
                    _ => Payload::Full(node.dst.snapshot()),
                };
                outgoing.push((
                    peer,
                    ExchangeMessage {
                        sender: node.id.clone(),
                        timestamp: now,
                        payload,
                    },
                ));
            }
        }
        let emitted = outgoing.len();
        for (to, msg) in outgoing {
            self.stats.messages += 1;
            self.stats.records_sent += msg.payload.record_count() as u64;
            match msg.payload {
                Payload::Full(_) => self.stats.snapshots += 1,
                Payload::Delta(_) => self.stats.deltas += 1,
            }
            self.nodes[to].inbox.push(msg);
        }
        emitted
    }

    /// Delivery phase: every node drains its inbox in (timestamp, sender)
    /// order and merges what it received.
    pub fn deliver(&mut self) -> Result<(usize, usize), ExchangeError> {
        let mut delivered = 0;
        let mut dropped = 0;
        let mut acks: Vec<(NodeId, NodeId, u64)> = Vec::new();
        for i in 0..self.nodes.len() {
            let mut inbox = std::mem::take(&mut self.nodes[i].inbox);
            inbox.sort_by(|a, b| (a.timestamp, &a.sender).cmp(&(b.timestamp, &b.sender)));
            for msg in inbox {
                if self.config.drop_probability > 0.0
                    && self.rng.gen_bool(self.config.drop_probability)
                {
                    dropped += 1;
                    self.stats.dropped += 1;
                    continue;
                }
                let node = &mut self.nodes[i];
                let mirror = node.mirrors.entry(msg.sender.clone()).or_insert_with(|| {
                    Dst::with_policy(
                        msg.sender.clone(),
                        self.config.dst_threshold,
                        self.config.merge_policy(),
                    )
                });
                match &msg.payload {
                    Payload::Full(snapshot) => mirror.install_snapshot(snapshot),
                    Payload::Delta(delta) => {
                        if delta.from() != mirror.version() {
                            // Out of step with the sender; the next share resyncs.
                            self.stats.stale += 1;
                            continue;
                        }
                        mirror.apply_delta(delta)?;
                    }
                }
                let mut meter = WorkMeter::new();
                node.dst.merge_dst_metered(mirror, &mut meter);
                self.meter += meter;
                acks.push((msg.sender.clone(), node.id.clone(), mirror.version()));
                delivered += 1;
            }
        }
        for (sender, receiver, version) in acks {
            if let Some(s) = self.nodes.iter_mut().find(|n| n.id == sender) {
                s.acked.insert(receiver, version);
            }
        }
        Ok((delivered, dropped))
    }

    /// One scheduler step: emit, deliver, advance the clock.
    pub fn tick(&mut self) -> Result<TickReport, ExchangeError> {
        let emitted = self.emit();
        let (delivered, dropped) = self.deliver()?;
        self.clock.advance();
        Ok(TickReport {
            emitted,
            delivered,
            dropped,
        })
    }

    /// Advances the clock to the next share point of any node and runs it.
    pub fn round(&mut self) -> Result<TickReport, ExchangeError> {
        while self.nodes.iter().all(|n| !n.shares_at(self.clock.now())) {
            self.clock.advance();
        }
        self.tick()
    }

    /// Pulls the current DST of every peer into `node` right away. Used by a
    /// healer asking its peers for fresher knowledge.
    pub fn pull(&mut self, node: usize) -> Result<bool, ExchangeError> {
        let peers = self
            .nodes
            .get(node)
            .ok_or(ExchangeError::UnknownNode(node))?
            .peers
            .clone();
        let mut changed = false;
        for p in peers {
            let remote = self.nodes[p].dst.snapshot();
            let mut meter = WorkMeter::new();
            changed |= self.nodes[node].dst.merge_dst_metered(&remote, &mut meter);
            self.meter += meter;
            self.stats.messages += 1;
            self.stats.snapshots += 1;
            self.stats.records_sent += remote.len() as u64;
        }
        Ok(changed)
    }

    /// True when all node DSTs hold the same content. Messages in flight make
    /// the question meaningless and are reported as an error.
    pub fn convergence_check(&self) -> Result<bool, ExchangeError> {
        let pending = self.pending();
        if pending > 0 {
            return Err(ExchangeError::PendingMessages(pending));
        }
        let first = &self.nodes[0].dst;
        Ok(self.nodes.iter().all(|n| n.dst.content_eq(first)))
    }

    /// Serialized state of every node's DST, in node order.
    pub fn state_text(&self) -> String {
        self.nodes.iter().map(|n| dst_to_text(&n.dst)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntityCategory, EntityKey};

    fn st(node: &str, m: &str) -> SignatureTrace {
        SignatureTrace::builder(node, 0)
            .calls([m])
            .entity(EntityKey::dotted(EntityCategory::FieldValue, m), 1)
            .build()
            .unwrap()
    }

    fn cluster(nodes: usize, topology: Topology, mode: ShareMode) -> Cluster {
        Cluster::new(ClusterConfig {
            nodes,
            topology,
            mode,
            ..ClusterConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn lone_node_sends_nothing() {
        let mut c = cluster(1, Topology::FullyConnected, ShareMode::Full);
        c.record_st(0, st("n0", "a"));
        for _ in 0..30 {
            assert_eq!(c.tick().unwrap().emitted, 0);
        }
        assert_eq!(c.stats().messages, 0);
    }

    #[test]
    fn two_nodes_agree_after_one_round() {
        let mut c = cluster(2, Topology::FullyConnected, ShareMode::Full);
        c.record_st(0, st("n0", "a"));
        c.record_st(1, st("n1", "b"));
        c.round().unwrap();
        assert!(c.convergence_check().unwrap());
        assert_eq!(c.dst(0).len(), 2);
    }

    #[test]
    fn star_hub_collects_everything() {
        let mut c = cluster(5, Topology::Star, ShareMode::Incremental);
        for i in 0..5 {
            c.record_st(i, st(&format!("n{i}"), &format!("m{i}")));
        }
        // Diameter two: two rounds.
        c.round().unwrap();
        assert_eq!(c.dst(0).len(), 5);
        c.tick().unwrap();
        c.round().unwrap();
        assert!(c.convergence_check().unwrap());
    }

    #[test]
    fn pending_messages_block_the_check() {
        let mut c = cluster(2, Topology::FullyConnected, ShareMode::Full);
        assert!(c.convergence_check().unwrap());
        c.emit();
        assert!(matches!(
            c.convergence_check(),
            Err(ExchangeError::PendingMessages(2))
        ));
        c.deliver().unwrap();
        assert!(c.convergence_check().unwrap());
    }

    #[test]
    fn incremental_sends_deltas_after_first_contact() {
        let mut c = cluster(2, Topology::FullyConnected, ShareMode::Incremental);
        c.record_st(0, st("n0", "a"));
        c.round().unwrap();
        assert_eq!(c.stats().snapshots, 2);
        c.record_st(0, st("n0", "b"));
        c.tick().unwrap();
        c.round().unwrap();
        assert_eq!(c.stats().deltas, 2);
        assert!(c.convergence_check().unwrap());
    }

    #[test]
    fn bad_topology_rejected() {
        let cfg = ClusterConfig {
            nodes: 2,
            topology: Topology::Custom {
                peers: vec![vec![1], vec![5]],
            },
            ..ClusterConfig::default()
        };
        assert!(Cluster::new(cfg).is_err());
    }
}
