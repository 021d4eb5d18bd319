//! Topologies, traffic sources and the named scenario presets.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Duration;
use crate::mac::{AcIndex, MacConfig};
use crate::phy::{NodeId, NodePosition, PhyProfile, Role, AP_TX_POWER_DBM, STA_TX_POWER_DBM};
use crate::ProtocolKind;

/// BSS whose STAs run the protocol under test; every other BSS runs EDCA.
pub const REFERENCE_BSS: u32 = 1;

pub const DEFAULT_DURATION_S: f64 = 10.0;
pub const DEFAULT_WARMUP_S: f64 = 0.5;
pub const DEFAULT_DRAIN_S: f64 = 1.0;
pub const PAYLOAD_BYTES: u32 = 1400;
pub const CBR_PERIOD_US: f64 = 5_000.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown scenario {name:?}; known: {known}")]
    UnknownPreset { name: String, known: String },
    #[error("scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario serialization: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObssLoad {
    Light,
    Medium,
    Large,
}

impl ObssLoad {
    pub const ALL: [ObssLoad; 3] = [ObssLoad::Light, ObssLoad::Medium, ObssLoad::Large];

    /// Active OBSS STAs, taken first-k by index.
    pub fn active_stas(self) -> usize {
        match self {
            ObssLoad::Light => 1,
            ObssLoad::Medium => 2,
            ObssLoad::Large => 4,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ObssLoad::Light => "light",
            ObssLoad::Medium => "medium",
            ObssLoad::Large => "large",
        }
    }
}

impl fmt::Display for ObssLoad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ObssLoad {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObssLoad::ALL
            .into_iter()
            .find(|l| l.tag() == s)
            .ok_or_else(|| format!("unknown OBSS load {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Uplink,
    Downlink,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrafficKind {
    /// One packet every `period_us`, first at `phase_us + period_us`, each
    /// node shifted by a uniform draw in `[0, jitter_us)`.
    Cbr {
        period_us: f64,
        payload_bytes: u32,
        #[serde(default)]
        phase_us: f64,
        #[serde(default)]
        jitter_us: f64,
    },
    /// Full buffer: the queue is refilled whenever a packet leaves it.
    Saturated { payload_bytes: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficSource {
    #[serde(flatten)]
    pub kind: TrafficKind,
    pub direction: Direction,
}

impl TrafficSource {
    pub fn cbr(period_us: f64, payload_bytes: u32, direction: Direction) -> Self {
        TrafficSource {
            kind: TrafficKind::Cbr {
                period_us,
                payload_bytes,
                phase_us: 0.0,
                jitter_us: 0.0,
            },
            direction,
        }
    }

    pub fn saturated(payload_bytes: u32, direction: Direction) -> Self {
        TrafficSource {
            kind: TrafficKind::Saturated { payload_bytes },
            direction,
        }
    }

    pub fn payload_bytes(&self) -> u32 {
        match self.kind {
            TrafficKind::Cbr { payload_bytes, .. } | TrafficKind::Saturated { payload_bytes } => {
                payload_bytes
            }
        }
    }

    /// CBR arrival instants `k·period + phase`, `k ≥ 1`, up to `horizon`.
    pub fn cbr_arrivals(&self, horizon: Duration) -> Vec<Duration> {
        match self.kind {
            TrafficKind::Cbr {
                period_us,
                phase_us,
                ..
            } => {
                let period = Duration::from_micros_f64(period_us);
                let phase = Duration::from_micros_f64(phase_us);
                (1..)
                    .map(|k| phase + period * k)
                    .take_while(|t| *t <= horizon)
                    .collect()
            }
            TrafficKind::Saturated { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub bss: u32,
    pub role: Role,
    pub x: f64,
    pub y: f64,
    pub tx_power_dbm: f64,
    pub ac: AcIndex,
}

impl NodeSpec {
    pub fn new(id: NodeId, bss: u32, role: Role, x: f64, y: f64, ac: AcIndex) -> Self {
        let tx_power_dbm = match role {
            Role::Ap => AP_TX_POWER_DBM,
            Role::Sta => STA_TX_POWER_DBM,
        };
        NodeSpec {
            id,
            bss,
            role,
            x,
            y,
            tx_power_dbm,
            ac,
        }
    }

    pub fn position(&self) -> NodePosition {
        NodePosition {
            node: self.id,
            x: self.x,
            y: self.y,
            tx_power_dbm: self.tx_power_dbm,
            role: self.role,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficBinding {
    pub node: NodeId,
    #[serde(flatten)]
    pub source: TrafficSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub protocol: ProtocolKind,
    pub obss_load: ObssLoad,
    pub obss_ac: AcIndex,
    pub duration_s: f64,
    #[serde(default = "default_warmup")]
    pub warmup_s: f64,
    /// Extra time after the last arrival for queued packets to clear.
    #[serde(default = "default_drain")]
    pub drain_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mac: MacConfig,
    #[serde(default)]
    pub phy: PhyProfile,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub traffic: Vec<TrafficBinding>,
}

fn default_warmup() -> f64 {
    DEFAULT_WARMUP_S
}

fn default_drain() -> f64 {
    DEFAULT_DRAIN_S
}

/// Canonical preset name, e.g. `sharing/obss-large/ac3`.
pub fn preset_name(protocol: ProtocolKind, load: ObssLoad, obss_ac: AcIndex) -> String {
    format!("{}/obss-{}/{}", protocol.tag(), load, obss_ac)
}

impl ScenarioConfig {
    /// The two-BSS topology with BSS1 CBR uplink and a saturated OBSS.
    pub fn preset(protocol: ProtocolKind, load: ObssLoad, obss_ac: AcIndex) -> Self {
        let ac3 = AcIndex::AC3;
        let mut nodes = vec![NodeSpec::new(0, 1, Role::Ap, 0.0, 0.0, ac3)];
        for (x, y) in [(5.0, 0.0), (-5.0, 0.0), (0.0, 5.0), (0.0, -5.0)] {
            nodes.push(NodeSpec::new(nodes.len(), 1, Role::Sta, x, y, ac3));
        }
        let ap2 = nodes.len();
        nodes.push(NodeSpec::new(ap2, 2, Role::Ap, 15.0, 0.0, obss_ac));
        for (x, y) in [(20.0, 0.0), (10.0, 0.0), (15.0, 5.0), (15.0, -5.0)] {
            nodes.push(NodeSpec::new(nodes.len(), 2, Role::Sta, x, y, obss_ac));
        }
        let mut traffic: Vec<TrafficBinding> = (1..=4)
            .map(|node| TrafficBinding {
                node,
                source: TrafficSource::cbr(CBR_PERIOD_US, PAYLOAD_BYTES, Direction::Uplink),
            })
            .collect();
        traffic.push(TrafficBinding {
            node: ap2,
            source: TrafficSource::saturated(PAYLOAD_BYTES, Direction::Downlink),
        });
        for k in 0..load.active_stas() {
            traffic.push(TrafficBinding {
                node: ap2 + 1 + k,
                source: TrafficSource::saturated(PAYLOAD_BYTES, Direction::Uplink),
            });
        }
        ScenarioConfig {
            name: preset_name(protocol, load, obss_ac),
            protocol,
            obss_load: load,
            obss_ac,
            duration_s: DEFAULT_DURATION_S,
            warmup_s: DEFAULT_WARMUP_S,
            drain_s: DEFAULT_DRAIN_S,
            seed: 1,
            mac: MacConfig::default(),
            phy: PhyProfile::default(),
            nodes,
            traffic,
        }
    }

    pub fn by_name(name: &str) -> Result<Self, ScenarioError> {
        scenario_matrix()
            .into_iter()
            .find(|c| c.name == name)
            .ok_or_else(|| ScenarioError::UnknownPreset {
                name: name.to_string(),
                known: scenario_matrix()
                    .iter()
                    .map(|c| c.name.as_str())
                    .collect::<Vec<_>>()
                    .join(", "),
            })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_duration(mut self, duration_s: f64) -> Self {
        self.duration_s = duration_s;
        self
    }

    pub fn duration(&self) -> Duration {
        Duration::from_secs_f64(self.duration_s)
    }

    pub fn warmup(&self) -> Duration {
        Duration::from_secs_f64(self.warmup_s)
    }

    pub fn drain(&self) -> Duration {
        Duration::from_secs_f64(self.drain_s)
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes.get(id)
    }

    pub fn ap_of(&self, bss: u32) -> Option<NodeId> {
        self.nodes
            .iter()
            .find(|n| n.bss == bss && n.role == Role::Ap)
            .map(|n| n.id)
    }

    /// STAs of the reference BSS, in index order.
    pub fn reference_stas(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.bss == REFERENCE_BSS && n.role == Role::Sta)
            .map(|n| n.id)
            .collect()
    }

    /// Nodes that carry traffic.
    pub fn active_nodes(&self) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.traffic.iter().map(|t| t.node).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.duration_s > 0.0) || self.duration_s > 1_000.0 {
            return bad(format!("duration_s must be in (0, 1000], got {}", self.duration_s));
        }
        if !(self.warmup_s >= 0.0) || self.warmup_s >= self.duration_s {
            return bad(format!("warmup_s must be in [0, duration), got {}", self.warmup_s));
        }
        if !(self.drain_s >= 0.0) {
            return bad("drain_s must be >= 0".into());
        }
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return bad(format!("node ids must be 0..n in order; found {} at {i}", n.id));
            }
            n.position()
                .validate()
                .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            let aps = self
                .nodes
                .iter()
                .filter(|m| m.bss == n.bss && m.role == Role::Ap)
                .count();
            if aps != 1 {
                return bad(format!("bss {} must have exactly one AP, has {aps}", n.bss));
            }
        }
        self.mac.validate().map_err(ScenarioError::Invalid)?;
        self.phy
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        for t in &self.traffic {
            let Some(node) = self.node(t.node) else {
                return bad(format!("traffic bound to unknown node {}", t.node));
            };
            if t.source.payload_bytes() == 0 {
                return bad(format!("node {}: payload must be >= 1 byte", t.node));
            }
            if let TrafficKind::Cbr {
                period_us,
                phase_us,
                jitter_us,
                ..
            } = t.source.kind
            {
                if !(period_us > 0.0) || !(phase_us >= 0.0) || !(jitter_us >= 0.0) {
                    return bad(format!("node {}: bad CBR timing", t.node));
                }
            }
            let ok_direction = match t.source.direction {
                Direction::Uplink => node.role == Role::Sta,
                Direction::Downlink => node.role == Role::Ap,
            };
            if !ok_direction {
                return bad(format!(
                    "node {}: {:?} traffic on a {}",
                    t.node, t.source.direction, node.role
                ));
            }
        }
        Ok(())
    }

    /// Node positions as seen by the medium; a pure function of the config.
    pub fn build_topology(&self) -> Vec<NodePosition> {
        self.nodes.iter().map(NodeSpec::position).collect()
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Scenario name made safe for file names.
    pub fn file_stem(&self) -> String {
        self.name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect()
    }
}

/// The full preset cross product: protocol × OBSS load × OBSS AC.
pub fn scenario_matrix() -> Vec<ScenarioConfig> {
    let mut out = Vec::with_capacity(18);
    for protocol in ProtocolKind::ALL {
        for load in ObssLoad::ALL {
            for ac in [AcIndex::AC0, AcIndex::AC3] {
                out.push(ScenarioConfig::preset(protocol, load, ac));
            }
        }
    }
    out
}
