use std::fmt;

use crate::engine::SimTime;
use crate::phy::NodeId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A TxOP's frames ran past its start plus the TxOP limit.
    TxopCap { node: NodeId, start: SimTime, end: SimTime, limit_end: SimTime },
    /// A node started a frame exchange while its NAV was set.
    NavHonor { node: NodeId, at: SimTime, nav_until: SimTime },
    /// A shared STA counted down or contended inside its shared slot.
    SharedContention { node: NodeId, at: SimTime },
    /// Two delivered frames overlapped at one receiver.
    DeliveredOverlap { receiver: NodeId, at: SimTime },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TxopCap { node, start, end, limit_end } => write!(
                f,
                "txop cap: node {node} txop from {start} reaches {end}, limit {limit_end}"
            ),
            Violation::NavHonor { node, at, nav_until } => {
                write!(f, "nav honor: node {node} transmitted at {at} with nav until {nav_until}")
            }
            Violation::SharedContention { node, at } => {
                write!(f, "shared contention: node {node} contended at {at} inside a shared slot")
            }
            Violation::DeliveredOverlap { receiver, at } => {
                write!(f, "delivered overlap: receiver {receiver} at {at}")
            }
        }
    }
}

const KEEP: usize = 64;

/// Collects MAC invariant violations; the first few are kept verbatim.
#[derive(Debug, Clone, Default)]
pub struct InvariantChecker {
    kept: Vec<Violation>,
    total: u64,
}

impl InvariantChecker {
    pub fn report(&mut self, v: Violation) {
        log::error!("invariant violated: {v}");
        self.total += 1;
        if self.kept.len() < KEEP {
            self.kept.push(v);
        }
    }

    pub fn check(&mut self, ok: bool, v: impl FnOnce() -> Violation) {
        if !ok {
            self.report(v());
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_clean(&self) -> bool {
        self.total == 0
    }

    pub fn violations(&self) -> &[Violation] {
        &self.kept
    }
}
