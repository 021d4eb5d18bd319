use std::collections::VecDeque;

use crate::engine::{Duration, EventHandle, RngStream, SimTime};
use crate::mac::{AcIndex, Backoff, Nav};
use crate::phy::{NodeId, Role};
use crate::scenario::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum NodeMode {
    Edca,
    /// Reference-BSS STA that only sends when triggered.
    TriggeredSta,
    TriggerAp,
    SharingSta,
}

#[derive(Debug, Clone)]
pub(super) struct Packet {
    pub id: u64,
    pub dst: NodeId,
    pub payload: u32,
    pub generated: SimTime,
    pub retries: u32,
    /// Generated inside the measurement window.
    pub measured: bool,
    pub cbr: bool,
}

pub(super) struct NodeMac {
    pub id: NodeId,
    pub bss: u32,
    #[allow(dead_code)]
    pub role: Role,
    pub ac: AcIndex,
    pub aifs: Duration,
    pub mode: NodeMode,
    pub ap: NodeId,
    /// Same-BSS STAs served by downlink round-robin.
    pub peers: Vec<NodeId>,
    pub rr: usize,
    pub rng: RngStream,
    pub queue: VecDeque<Packet>,
    pub saturated: Option<(u32, Direction)>,
    pub nav: Nav,
    pub idle_since: Option<SimTime>,
    pub backoff: Option<Backoff>,
    /// Earliest instant the current backoff may start its AIFS.
    pub backoff_ref: SimTime,
    pub backoff_ev: Option<(SimTime, EventHandle)>,
    /// Exchange this node is currently committed to.
    pub xid: Option<u64>,
    /// Between a received poll and the closing CTS-reject.
    pub shared_slot: bool,
}

impl NodeMac {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: NodeId,
        bss: u32,
        role: Role,
        ac: AcIndex,
        aifs: Duration,
        mode: NodeMode,
        ap: NodeId,
        peers: Vec<NodeId>,
        rng: RngStream,
    ) -> Self {
        NodeMac {
            id,
            bss,
            role,
            ac,
            aifs,
            mode,
            ap,
            peers,
            rr: 0,
            rng,
            queue: VecDeque::new(),
            saturated: None,
            nav: Nav::default(),
            idle_since: None,
            backoff: None,
            backoff_ref: SimTime::ZERO,
            backoff_ev: None,
            xid: None,
            shared_slot: false,
        }
    }
}
