//! Channel-access models and a discrete-event simulator for comparing EDCA,
//! trigger-based and TxOP-sharing uplink access in overlapping BSSs.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod analysis;
pub mod analytic;
pub mod campaign;
pub mod engine;
pub mod mac;
pub mod metrics;
pub mod numfmt;
pub mod phy;
mod protocol;
pub mod scenario;
pub mod sim;

pub use campaign::{run_batch, run_scenario, BatchConfig, BatchReport, RunOptions, RunOutcome};
pub use engine::{Duration, SimTime, TraceRecord};
pub use mac::AcIndex;
pub use metrics::{EcdfTable, Summary};
pub use phy::{FrameKind, NodeId};
pub use protocol::{ProtocolKind, UnknownProtocol};
pub use scenario::{ObssLoad, ScenarioConfig};
pub use sim::{simulate, SimOptions, SimResult};
