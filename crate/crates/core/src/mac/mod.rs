//! Channel-access engines: EDCA contention, trigger-based uplink and
//! TxOP sharing. The per-node state machines live in [`crate::sim`]; this
//! module holds their parameters, frame formats and timing rules.

mod edca;
mod frame;
mod invariants;
mod nav;
mod sharing;
mod trigger;

pub use edca::{edca_draw_backoff, AcIndex, AccessCategory, Backoff, EdcaParams};
pub use frame::{Dest, Frame, ShareInfo};
pub use invariants::{InvariantChecker, Violation};
pub use nav::Nav;
pub use sharing::{frames_in_slot, plan_shared_txop, ShareTiming, TxopGrant};
pub use trigger::{frames_fitting, mu_data_duration, DueCycle, TriggerPhase, TriggerSchedule};

use serde::{Deserialize, Serialize};

use crate::engine::Duration;

/// MAC-wide settings shared by every node of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MacConfig {
    pub edca: EdcaParams,
    pub txop_limit_us: f64,
    pub trigger_period_us: f64,
    pub trigger_phase: TriggerPhase,
    /// Let the AP append its own downlink frames to a shared TxOP.
    pub ap_downlink_in_share: bool,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            edca: EdcaParams::default(),
            txop_limit_us: 5_000.0,
            trigger_period_us: 5_000.0,
            trigger_phase: TriggerPhase::Random,
            ap_downlink_in_share: false,
        }
    }
}

impl MacConfig {
    pub fn txop_limit(&self) -> Duration {
        Duration::from_micros_f64(self.txop_limit_us)
    }

    pub fn trigger_period(&self) -> Duration {
        Duration::from_micros_f64(self.trigger_period_us)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.edca.validate()?;
        if !(self.txop_limit_us > 0.0) {
            return Err("txop_limit_us must be positive".into());
        }
        if !(self.trigger_period_us > 0.0) {
            return Err("trigger_period_us must be positive".into());
        }
        if let TriggerPhase::Fixed(off) = self.trigger_phase {
            if !(off >= 0.0) {
                return Err("trigger phase offset must be >= 0".into());
            }
        }
        Ok(())
    }
}
