//! Shared wireless medium: audibility, airtime and collision outcomes.

mod medium;

pub use medium::{Medium, Outcome, TransmissionRecord, TxId};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Duration;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyError {
    #[error("payload must be at least one byte")]
    EmptyPayload,
    #[error("{0} is not a control frame")]
    NotControl(FrameKind),
    #[error("invalid phy profile: {0}")]
    InvalidProfile(String),
    #[error("invalid node position: {0}")]
    InvalidPosition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Ap,
    Sta,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Ap => "ap",
            Role::Sta => "sta",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Data,
    Ack,
    BlockAck,
    RtsShare,
    CtsShare,
    CtsReject,
    CfEnd,
    Bsrp,
    Bsr,
    BasicTrigger,
}

impl FrameKind {
    pub const ALL: [FrameKind; 10] = [
        FrameKind::Data,
        FrameKind::Ack,
        FrameKind::BlockAck,
        FrameKind::RtsShare,
        FrameKind::CtsShare,
        FrameKind::CtsReject,
        FrameKind::CfEnd,
        FrameKind::Bsrp,
        FrameKind::Bsr,
        FrameKind::BasicTrigger,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FrameKind::Data => "data",
            FrameKind::Ack => "ack",
            FrameKind::BlockAck => "block_ack",
            FrameKind::RtsShare => "rts_share",
            FrameKind::CtsShare => "cts_share",
            FrameKind::CtsReject => "cts_reject",
            FrameKind::CfEnd => "cf_end",
            FrameKind::Bsrp => "bsrp",
            FrameKind::Bsr => "bsr",
            FrameKind::BasicTrigger => "basic_trigger",
        }
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FrameKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FrameKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| format!("unknown frame kind {s:?}"))
    }
}

/// Placement and transmit power of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePosition {
    pub node: NodeId,
    pub x: f64,
    pub y: f64,
    pub tx_power_dbm: f64,
    pub role: Role,
}

pub const AP_TX_POWER_DBM: f64 = 21.0;
pub const STA_TX_POWER_DBM: f64 = 15.0;

impl NodePosition {
    pub fn new(node: NodeId, x: f64, y: f64, role: Role) -> Self {
        let tx_power_dbm = match role {
            Role::Ap => AP_TX_POWER_DBM,
            Role::Sta => STA_TX_POWER_DBM,
        };
        NodePosition {
            node,
            x,
            y,
            tx_power_dbm,
            role,
        }
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(PhyError::InvalidPosition(format!(
                "node {} has non-finite coordinates",
                self.node
            )));
        }
        if !(-10.0..=30.0).contains(&self.tx_power_dbm) {
            return Err(PhyError::InvalidPosition(format!(
                "node {} tx power {} dBm outside [-10, 30]",
                self.node, self.tx_power_dbm
            )));
        }
        Ok(())
    }

    pub fn distance(&self, other: &NodePosition) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AudibilityMode {
    Disk,
    LogDistance,
}

/// Fixed control-frame durations in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlAirtimes {
    pub ack_us: f64,
    pub block_ack_us: f64,
    pub rts_share_us: f64,
    pub cts_share_us: f64,
    pub cts_reject_us: f64,
    pub cf_end_us: f64,
    pub bsrp_us: f64,
    pub bsr_us: f64,
    pub basic_trigger_us: f64,
}

impl Default for ControlAirtimes {
    fn default() -> Self {
        ControlAirtimes {
            ack_us: 32.0,
            block_ack_us: 32.0,
            rts_share_us: 36.0,
            cts_share_us: 36.0,
            cts_reject_us: 32.0,
            cf_end_us: 32.0,
            bsrp_us: 48.0,
            bsr_us: 32.0,
            basic_trigger_us: 48.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhyProfile {
    pub bandwidth_hz: f64,
    pub data_bits_per_symbol: u32,
    pub symbol_us: f64,
    pub preamble_us: f64,
    pub mac_header_bytes: u32,
    pub legacy_control_rate_bps: f64,
    pub cs_threshold_dbm: f64,
    pub audibility: AudibilityMode,
    pub disk_radius_m: f64,
    pub pathloss_exponent: f64,
    /// Path loss at the 1 m reference distance.
    pub pathloss_ref_db: f64,
    pub control: ControlAirtimes,
}

impl Default for PhyProfile {
    fn default() -> Self {
        PhyProfile {
            bandwidth_hz: 80e6,
            // 980 data subcarriers, 64-QAM, rate 3/4
            data_bits_per_symbol: 4410,
            symbol_us: 13.6,
            preamble_us: 40.0,
            mac_header_bytes: 40,
            legacy_control_rate_bps: 24e6,
            cs_threshold_dbm: -82.0,
            audibility: AudibilityMode::Disk,
            disk_radius_m: 10.0,
            pathloss_exponent: 3.5,
            pathloss_ref_db: 40.05,
            control: ControlAirtimes::default(),
        }
    }
}

impl PhyProfile {
    pub fn validate(&self) -> Result<(), PhyError> {
        let c = &self.control;
        let durations = [
            ("symbol_us", self.symbol_us),
            ("preamble_us", self.preamble_us),
            ("ack_us", c.ack_us),
            ("block_ack_us", c.block_ack_us),
            ("rts_share_us", c.rts_share_us),
            ("cts_share_us", c.cts_share_us),
            ("cts_reject_us", c.cts_reject_us),
            ("cf_end_us", c.cf_end_us),
            ("bsrp_us", c.bsrp_us),
            ("bsr_us", c.bsr_us),
            ("basic_trigger_us", c.basic_trigger_us),
        ];
        for (name, v) in durations {
            if !(v > 0.0) || !v.is_finite() {
                return Err(PhyError::InvalidProfile(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.data_bits_per_symbol == 0 {
            return Err(PhyError::InvalidProfile("data_bits_per_symbol must be > 0".into()));
        }
        if !(self.disk_radius_m >= 0.0) {
            return Err(PhyError::InvalidProfile("disk_radius_m must be >= 0".into()));
        }
        Ok(())
    }

    /// OFDM symbols needed for a data frame: SERVICE + MAC frame + tail bits.
    pub fn data_symbols(&self, payload_bytes: u32) -> u64 {
        let bits = 16 + 8 * (u64::from(self.mac_header_bytes) + u64::from(payload_bytes)) + 6;
        bits.div_ceil(u64::from(self.data_bits_per_symbol))
    }

    pub fn airtime_data(&self, payload_bytes: u32) -> Result<Duration, PhyError> {
        if payload_bytes == 0 {
            return Err(PhyError::EmptyPayload);
        }
        let symbols = self.data_symbols(payload_bytes) as f64;
        Ok(Duration::from_micros_f64(self.preamble_us + symbols * self.symbol_us))
    }

    pub fn airtime_control(&self, kind: FrameKind) -> Result<Duration, PhyError> {
        let c = &self.control;
        let us = match kind {
            FrameKind::Data => return Err(PhyError::NotControl(kind)),
            FrameKind::Ack => c.ack_us,
            FrameKind::BlockAck => c.block_ack_us,
            FrameKind::RtsShare => c.rts_share_us,
            FrameKind::CtsShare => c.cts_share_us,
            FrameKind::CtsReject => c.cts_reject_us,
            FrameKind::CfEnd => c.cf_end_us,
            FrameKind::Bsrp => c.bsrp_us,
            FrameKind::Bsr => c.bsr_us,
            FrameKind::BasicTrigger => c.basic_trigger_us,
        };
        Ok(Duration::from_micros_f64(us))
    }

    /// Control airtime for a kind known to be a control frame.
    pub(crate) fn control(&self, kind: FrameKind) -> Duration {
        self.airtime_control(kind).expect("control frame kind")
    }
}

/// Whether `b` can hear transmissions from `a`.
pub fn audible(a: &NodePosition, b: &NodePosition, profile: &PhyProfile) -> bool {
    let dist = a.distance(b);
    if dist == 0.0 {
        return true;
    }
    match profile.audibility {
        AudibilityMode::Disk => dist <= profile.disk_radius_m,
        AudibilityMode::LogDistance => {
            let rx = a.tx_power_dbm
                - profile.pathloss_ref_db
                - 10.0 * profile.pathloss_exponent * dist.log10();
            rx >= profile.cs_threshold_dbm
        }
    }
}
