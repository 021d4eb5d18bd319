//! Frame-exchange state machines: plain EDCA TxOPs, trigger cycles and
//! shared TxOPs.

use serde::{Deserialize, Serialize};

use super::node::NodeMode;
use super::Simulation;
use crate::engine::{Duration, EventHandle, SimTime};
use crate::mac::{
    frames_fitting, mu_data_duration, plan_shared_txop, Backoff, Dest, DueCycle, Frame,
    ShareInfo, TriggerSchedule, TxopGrant,
};
use crate::phy::{FrameKind, NodeId, Outcome};
use crate::scenario::REFERENCE_BSS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Step {
    AckTimeout,
    HolderTimeout,
    TriggerAfterBsr,
    TriggerBlockAck,
    /// AP's next move in a shared TxOP: poll, own downlink, or CF-End.
    ShareNext,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerStats {
    pub due: u64,
    /// Cycles whose first BSRP went out.
    pub started: u64,
    /// Cycles whose first BSRP went out later than the due time.
    pub postponed: u64,
    pub postponement_total_ns: u64,
    pub postponement_max_ns: u64,
    /// Attempts ending without any buffer report.
    pub failed_attempts: u64,
    pub superseded: u64,
    /// Cycles that carried uplink data.
    pub data_cycles: u64,
}

impl TriggerStats {
    pub fn postponed_fraction(&self) -> f64 {
        if self.started == 0 {
            0.0
        } else {
            self.postponed as f64 / self.started as f64
        }
    }
}

pub(super) struct TriggerState {
    pub ap: NodeId,
    pub schedule: TriggerSchedule,
    pub retries: u32,
    pub stats: TriggerStats,
    last_started: Option<u64>,
}

impl TriggerState {
    pub fn new(ap: NodeId, schedule: TriggerSchedule) -> Self {
        TriggerState {
            ap,
            schedule,
            retries: 0,
            stats: TriggerStats::default(),
            last_started: None,
        }
    }
}

pub(super) struct EdcaTxop {
    holder: NodeId,
    start: SimTime,
    limit_end: SimTime,
    packet: u64,
    dst: NodeId,
    timeout: Option<EventHandle>,
}

pub(super) struct TriggerCycle {
    ap: NodeId,
    start: SimTime,
    limit_end: SimTime,
    cycle: DueCycle,
    /// Queue depth each STA reports, fixed when it hears the BSRP.
    snapshot: Vec<(NodeId, usize)>,
    reports: Vec<(NodeId, usize)>,
    allot: Vec<(NodeId, usize)>,
    sent: Vec<(NodeId, Vec<u64>)>,
    received: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SharePhase {
    Handshake,
    Holder,
    Polling,
}

struct Slot {
    sta: NodeId,
    end: SimTime,
    packet: Option<u64>,
}

pub(super) struct SharedTxop {
    holder: NodeId,
    ap: NodeId,
    grant: TxopGrant,
    info: ShareInfo,
    phase: SharePhase,
    holder_sent: u32,
    holder_packet: Option<u64>,
    timeout: Option<EventHandle>,
    ap_joined: bool,
    next_poll: usize,
    slot: Option<Slot>,
    ap_packet: Option<u64>,
}

pub(super) enum Exchange {
    Edca(EdcaTxop),
    Trigger(TriggerCycle),
    Share(SharedTxop),
}

impl Exchange {
    pub fn start(&self) -> SimTime {
        match self {
            Exchange::Edca(x) => x.start,
            Exchange::Trigger(x) => x.start,
            Exchange::Share(x) => x.grant.start,
        }
    }

    pub fn limit_end(&self) -> SimTime {
        match self {
            Exchange::Edca(x) => x.limit_end,
            Exchange::Trigger(x) => x.limit_end,
            Exchange::Share(x) => x.grant.end_limit(),
        }
    }
}

impl Simulation<'_> {
    fn data_airtime(&self, payload: u32) -> Duration {
        self.cfg
            .phy
            .airtime_data(payload)
            .expect("payload validated as non-empty")
    }

    fn delivered(outcomes: &[Outcome], rx: NodeId) -> bool {
        outcomes.get(rx) == Some(&Outcome::Delivered)
    }

    fn control_frame(&self, kind: FrameKind, src: NodeId, dst: Dest, nav: Duration) -> (Frame, Duration) {
        (Frame::control(kind, src, dst, nav), self.cfg.phy.control(kind))
    }

    /// Releases every node committed to `xid` and forgets the exchange.
    fn end_exchange(&mut self, xid: u64) {
        self.exchanges.remove(&xid);
        for n in &mut self.nodes {
            if n.xid == Some(xid) {
                n.xid = None;
                n.shared_slot = false;
            }
        }
    }

    fn release(&mut self, node: NodeId, xid: u64) {
        let n = &mut self.nodes[node];
        if n.xid == Some(xid) {
            n.xid = None;
            n.shared_slot = false;
        }
    }

    pub(super) fn on_step(&mut self, xid: u64, step: Step) {
        if !self.exchanges.contains_key(&xid) {
            return;
        }
        match step {
            Step::AckTimeout => self.edca_timeout(xid),
            Step::HolderTimeout => self.share_holder_timeout(xid),
            Step::TriggerAfterBsr => self.trigger_after_bsr(xid),
            Step::TriggerBlockAck => self.trigger_block_ack(xid),
            Step::ShareNext => self.share_next(xid),
        }
    }

    pub(super) fn exchange_frame_end(&mut self, xid: u64, frame: &Frame, outcomes: &[Outcome]) {
        match self.exchanges.get(&xid) {
            Some(Exchange::Edca(_)) => self.edca_frame_end(xid, frame, outcomes),
            Some(Exchange::Trigger(_)) => self.trigger_frame_end(xid, frame, outcomes),
            Some(Exchange::Share(_)) => self.share_frame_end(xid, frame, outcomes),
            None => {}
        }
    }

    // ---- EDCA TxOP ----

    pub(super) fn start_edca_txop(&mut self, holder: NodeId) {
        let now = self.now();
        let xid = self.new_xid();
        self.nodes[holder].xid = Some(xid);
        self.exchanges.insert(
            xid,
            Exchange::Edca(EdcaTxop {
                holder,
                start: now,
                limit_end: now + self.timing.txop_limit,
                packet: 0,
                dst: 0,
                timeout: None,
            }),
        );
        self.edca_send_data(xid, now, true);
    }

    fn edca_send_data(&mut self, xid: u64, at: SimTime, initiating: bool) {
        let Some(Exchange::Edca(x)) = self.exchanges.get(&xid) else {
            return;
        };
        let holder = x.holder;
        let Some(p) = self.nodes[holder].queue.front() else {
            self.end_exchange(xid);
            return;
        };
        let (id, dst, payload) = (p.id, p.dst, p.payload);
        let air = self.data_airtime(payload);
        let nav = self.timing.sifs + self.timing.ack;
        let frame = Frame::data(holder, dst, payload, nav);
        self.stage(at, holder, frame, air, Some(xid), None, initiating, format!("packet={id}"));
        let timeout_at = at + air + self.timing.sifs + self.timing.ack + self.timing.slot;
        let h = self.schedule_step(timeout_at, xid, Step::AckTimeout);
        if let Some(Exchange::Edca(x)) = self.exchanges.get_mut(&xid) {
            x.packet = id;
            x.dst = dst;
            x.timeout = Some(h);
        }
    }

    fn edca_frame_end(&mut self, xid: u64, frame: &Frame, outcomes: &[Outcome]) {
        let now = self.now();
        let Some(Exchange::Edca(x)) = self.exchanges.get(&xid) else {
            return;
        };
        let (holder, dst, packet, limit_end, timeout) = (x.holder, x.dst, x.packet, x.limit_end, x.timeout);
        match frame.kind {
            FrameKind::Data if Self::delivered(outcomes, dst) => {
                let (ack, air) = self.control_frame(FrameKind::Ack, dst, Dest::Node(holder), Duration::ZERO);
                self.stage(now + self.timing.sifs, dst, ack, air, Some(xid), None, false, String::new());
            }
            FrameKind::Ack if Self::delivered(outcomes, holder) => {
                if let Some(h) = timeout {
                    self.sched.cancel(h);
                }
                self.packet_delivered(holder, packet);
                let next = self.nodes[holder].queue.front().map(|p| p.payload);
                let fits = next.is_some_and(|payload| {
                    let t = now
                        + self.timing.sifs
                        + self.data_airtime(payload)
                        + self.timing.sifs
                        + self.timing.ack;
                    t <= limit_end
                });
                if fits {
                    self.edca_send_data(xid, now + self.timing.sifs, false);
                } else {
                    self.end_exchange(xid);
                }
            }
            _ => {}
        }
    }

    fn edca_timeout(&mut self, xid: u64) {
        let Some(Exchange::Edca(x)) = self.exchanges.get(&xid) else {
            return;
        };
        let (holder, packet) = (x.holder, x.packet);
        self.packet_failed(holder, packet);
        self.end_exchange(xid);
    }

    // ---- trigger cycle ----

    pub(super) fn on_trigger_due(&mut self) {
        let now = self.now();
        let Some(t) = self.trigger.as_mut() else {
            return;
        };
        let ap = t.ap;
        let due = t.schedule.fire();
        t.stats.due += 1;
        t.stats.superseded = t.schedule.superseded();
        let next = t.schedule.next_due();
        if next <= self.end {
            self.sched
                .schedule(next, super::Ev::TriggerDue)
                .expect("future due");
        }
        self.trace_at(now, ap, "trigger_due", format!("cycle={}", due.cycle));
        let n = &self.nodes[ap];
        let free = n.xid.is_none() && n.backoff.is_none() && !self.medium.is_transmitting(ap);
        let retries = self.trigger.as_ref().map_or(0, |t| t.retries);
        if free && retries == 0 && self.channel_idle(ap) {
            // Idle medium at the due time: access after AIFS from the
            // start of the idle period, without a random backoff.
            let idle = self.nodes[ap].idle_since.unwrap_or(now);
            let n = &mut self.nodes[ap];
            n.backoff = Some(Backoff::new(0));
            n.backoff_ref = idle;
        }
    }

    pub(super) fn start_trigger_exchange(&mut self, ap: NodeId) {
        let now = self.now();
        let Some(t) = self.trigger.as_mut() else {
            return;
        };
        let Some(cycle) = t.schedule.take() else {
            return;
        };
        if t.last_started != Some(cycle.cycle) {
            t.last_started = Some(cycle.cycle);
            t.stats.started += 1;
            let late = now.since(cycle.due).0;
            if late > 0 {
                t.stats.postponed += 1;
                t.stats.postponement_total_ns += late;
                t.stats.postponement_max_ns = t.stats.postponement_max_ns.max(late);
            }
        }
        let xid = self.new_xid();
        self.nodes[ap].xid = Some(xid);
        let limit_end = now + self.timing.txop_limit;
        self.exchanges.insert(
            xid,
            Exchange::Trigger(TriggerCycle {
                ap,
                start: now,
                limit_end,
                cycle,
                snapshot: Vec::new(),
                reports: Vec::new(),
                allot: Vec::new(),
                sent: Vec::new(),
                received: Vec::new(),
            }),
        );
        let phy = &self.cfg.phy;
        let nav = self.timing.sifs
            + phy.control(FrameKind::Bsr)
            + self.timing.sifs
            + phy.control(FrameKind::BasicTrigger);
        let (bsrp, air) = self.control_frame(FrameKind::Bsrp, ap, Dest::Broadcast, nav);
        let detail = format!("cycle={} due={}", cycle.cycle, cycle.due.0);
        self.stage(now, ap, bsrp, air, Some(xid), None, true, detail);
    }

    fn trigger_frame_end(&mut self, xid: u64, frame: &Frame, outcomes: &[Outcome]) {
        let now = self.now();
        let sifs = self.timing.sifs;
        let Some(Exchange::Trigger(x)) = self.exchanges.get(&xid) else {
            return;
        };
        let ap = x.ap;
        match frame.kind {
            FrameKind::Bsrp => {
                let stas: Vec<NodeId> = self
                    .nodes
                    .iter()
                    .filter(|n| n.mode == NodeMode::TriggeredSta && Self::delivered(outcomes, n.id))
                    .map(|n| n.id)
                    .collect();
                let mut snapshot = Vec::with_capacity(stas.len());
                for s in stas {
                    let depth = self.nodes[s].queue.len();
                    snapshot.push((s, depth));
                    let (bsr, air) = self.control_frame(FrameKind::Bsr, s, Dest::Node(ap), Duration::ZERO);
                    self.stage(now + sifs, s, bsr, air, Some(xid), Some(xid << 1), false, format!("queued={depth}"));
                }
                let at = now + sifs + self.cfg.phy.control(FrameKind::Bsr) + sifs;
                self.schedule_step(at, xid, Step::TriggerAfterBsr);
                if let Some(Exchange::Trigger(x)) = self.exchanges.get_mut(&xid) {
                    x.snapshot = snapshot;
                }
            }
            FrameKind::Bsr if Self::delivered(outcomes, ap) => {
                if let Some(Exchange::Trigger(x)) = self.exchanges.get_mut(&xid) {
                    if let Some(&entry) = x.snapshot.iter().find(|e| e.0 == frame.src) {
                        x.reports.push(entry);
                    }
                }
            }
            FrameKind::BasicTrigger => {
                let allot = x.allot.clone();
                let mut air = Duration::ZERO;
                let mut sent = Vec::new();
                for (s, n) in allot {
                    if !Self::delivered(outcomes, s) {
                        continue;
                    }
                    let packets: Vec<(u64, u32)> = self.nodes[s]
                        .queue
                        .iter()
                        .take(n)
                        .map(|p| (p.id, p.payload))
                        .collect();
                    if packets.is_empty() {
                        continue;
                    }
                    air = self.mu_duration_of(xid);
                    let bytes = packets.iter().map(|p| p.1).sum();
                    let nav = sifs + self.timing.block_ack;
                    let data = Frame::data(s, ap, bytes, nav);
                    let detail = format!("frames={}", packets.len());
                    self.stage(now + sifs, s, data, air, Some(xid), Some(xid << 1 | 1), false, detail);
                    sent.push((s, packets.into_iter().map(|p| p.0).collect()));
                }
                let mu = if air == Duration::ZERO { self.mu_duration_of(xid) } else { air };
                self.schedule_step(now + sifs + mu + sifs, xid, Step::TriggerBlockAck);
                if let Some(Exchange::Trigger(x)) = self.exchanges.get_mut(&xid) {
                    x.sent = sent;
                }
            }
            FrameKind::Data if Self::delivered(outcomes, ap) => {
                if let Some(Exchange::Trigger(x)) = self.exchanges.get_mut(&xid) {
                    x.received.push(frame.src);
                }
            }
            FrameKind::BlockAck => {
                let sent = x.sent.clone();
                let received = x.received.clone();
                for (s, packets) in sent {
                    let ok = received.contains(&s) && Self::delivered(outcomes, s);
                    for p in packets {
                        if ok {
                            self.packet_delivered(s, p);
                        } else {
                            self.packet_failed(s, p);
                        }
                    }
                }
                self.trigger_done(xid, true);
            }
            _ => {}
        }
    }

    /// Common MU data duration stored at trigger time.
    fn mu_duration_of(&self, xid: u64) -> Duration {
        match self.exchanges.get(&xid) {
            Some(Exchange::Trigger(x)) => x
                .allot
                .iter()
                .map(|&(s, n)| self.queue_airtime(s, n))
                .max()
                .unwrap_or(Duration::ZERO)
                .min(self.mu_cap(x)),
            _ => Duration::ZERO,
        }
    }

    fn queue_airtime(&self, node: NodeId, n: usize) -> Duration {
        self.nodes[node]
            .queue
            .iter()
            .take(n)
            .map(|p| self.data_airtime(p.payload))
            .sum()
    }

    fn mu_cap(&self, x: &TriggerCycle) -> Duration {
        // Trigger sent at `basic_at`, then SIFS, data, SIFS, block ack.
        let basic_at = x.start
            + self.cfg.phy.control(FrameKind::Bsrp)
            + self.timing.sifs
            + self.cfg.phy.control(FrameKind::Bsr)
            + self.timing.sifs;
        let after = basic_at
            + self.cfg.phy.control(FrameKind::BasicTrigger)
            + self.timing.sifs
            + self.timing.sifs
            + self.timing.block_ack;
        x.limit_end.since(after.min(x.limit_end))
    }

    fn trigger_after_bsr(&mut self, xid: u64) {
        let now = self.now();
        let Some(Exchange::Trigger(x)) = self.exchanges.get(&xid) else {
            return;
        };
        if x.reports.is_empty() {
            self.trigger_done(xid, false);
            return;
        }
        let ap = x.ap;
        let cap = self.mu_cap(x);
        let reports: Vec<(NodeId, usize)> = x.reports.iter().copied().filter(|r| r.1 > 0).collect();
        let needs: Vec<Vec<Duration>> = reports
            .iter()
            .map(|&(s, n)| {
                self.nodes[s]
                    .queue
                    .iter()
                    .take(n)
                    .map(|p| self.data_airtime(p.payload))
                    .collect()
            })
            .collect();
        let totals: Vec<Duration> = needs.iter().map(|v| v.iter().copied().sum()).collect();
        let mu = mu_data_duration(&totals, cap);
        let allot: Vec<(NodeId, usize)> = reports
            .iter()
            .zip(&needs)
            .map(|(&(s, _), v)| (s, frames_fitting(v, mu)))
            .filter(|a| a.1 > 0)
            .collect();
        if allot.is_empty() {
            self.trigger_done(xid, true);
            return;
        }
        if let Some(Exchange::Trigger(x)) = self.exchanges.get_mut(&xid) {
            x.allot = allot;
        }
        let mu = self.mu_duration_of(xid);
        let nav = self.timing.sifs + mu + self.timing.sifs + self.timing.block_ack;
        let (trigger, air) = self.control_frame(FrameKind::BasicTrigger, ap, Dest::Broadcast, nav);
        self.stage(now, ap, trigger, air, Some(xid), None, false, String::new());
    }

    fn trigger_block_ack(&mut self, xid: u64) {
        let now = self.now();
        let Some(Exchange::Trigger(x)) = self.exchanges.get(&xid) else {
            return;
        };
        let ap = x.ap;
        if x.received.is_empty() {
            let sent = x.sent.clone();
            for (s, packets) in sent {
                for p in packets {
                    self.packet_failed(s, p);
                }
            }
            self.trigger_done(xid, true);
            return;
        }
        let (ba, air) = self.control_frame(FrameKind::BlockAck, ap, Dest::Broadcast, Duration::ZERO);
        self.stage(now, ap, ba, air, Some(xid), None, false, String::new());
    }

    /// Finishes a cycle; a failed attempt puts the cycle back and widens
    /// the AP's contention window.
    fn trigger_done(&mut self, xid: u64, executed: bool) {
        let Some(Exchange::Trigger(x)) = self.exchanges.get(&xid) else {
            return;
        };
        let cycle = x.cycle;
        let had_data = !x.sent.is_empty();
        self.end_exchange(xid);
        let limit = self.cfg.mac.edca.retry_limit;
        if let Some(t) = self.trigger.as_mut() {
            if executed {
                t.retries = 0;
                if had_data {
                    t.stats.data_cycles += 1;
                }
            } else {
                t.stats.failed_attempts += 1;
                t.retries += 1;
                if t.retries <= limit {
                    t.schedule.restore(cycle);
                } else {
                    t.retries = 0;
                }
                t.stats.superseded = t.schedule.superseded();
            }
        }
    }

    // ---- shared TxOP ----

    pub(super) fn start_shared_txop(&mut self, holder: NodeId) {
        let now = self.now();
        let group: Vec<NodeId> = self
            .cfg
            .reference_stas()
            .into_iter()
            .filter(|&s| s != holder && self.cfg.traffic.iter().any(|b| b.node == s))
            .collect();
        let airtimes: Vec<Duration> = self.nodes[holder]
            .queue
            .iter()
            .take(64)
            .map(|p| self.data_airtime(p.payload))
            .collect();
        let Some(&first) = airtimes.first() else {
            return;
        };
        let grant = plan_shared_txop(
            holder,
            now,
            self.timing.txop_limit,
            &airtimes,
            &group,
            first,
            &self.timing.share,
        );
        let Some(grant) = grant else {
            self.start_edca_txop(holder);
            return;
        };
        let ap = self.nodes[holder].ap;
        let info = ShareInfo {
            allocations: grant.shared_allocations.clone(),
            priority: grant
                .shared_allocations
                .iter()
                .map(|&(s, _)| (s, self.nodes[s].ac))
                .collect(),
            holder_frames: grant.holder_frames,
        };
        let xid = self.new_xid();
        self.nodes[holder].xid = Some(xid);
        let limit_end = grant.end_limit();
        let rts_air = self.timing.share.rts_share;
        let rts_end = now + rts_air;
        let frame = Frame::control(FrameKind::RtsShare, holder, Dest::Node(ap), limit_end.since(rts_end))
            .with_share(info.clone());
        let detail = format!(
            "holder_frames={} shared={}",
            grant.holder_frames,
            grant.shared_allocations.len()
        );
        self.stage(now, holder, frame, rts_air, Some(xid), None, true, detail);
        let timeout_at = rts_end + self.timing.sifs + self.timing.share.cts_share + self.timing.slot;
        let h = self.schedule_step(timeout_at, xid, Step::HolderTimeout);
        self.exchanges.insert(
            xid,
            Exchange::Share(SharedTxop {
                holder,
                ap,
                grant,
                info,
                phase: SharePhase::Handshake,
                holder_sent: 0,
                holder_packet: None,
                timeout: Some(h),
                ap_joined: false,
                next_poll: 0,
                slot: None,
                ap_packet: None,
            }),
        );
    }

    fn share_mut(&mut self, xid: u64) -> Option<&mut SharedTxop> {
        match self.exchanges.get_mut(&xid) {
            Some(Exchange::Share(x)) => Some(x),
            _ => None,
        }
    }

    fn share_holder_timeout(&mut self, xid: u64) {
        let Some(x) = self.share_mut(xid) else {
            return;
        };
        if x.phase != SharePhase::Handshake {
            return;
        }
        x.timeout = None;
        let (holder, joined) = (x.holder, x.ap_joined);
        self.holder_failed(xid, holder);
        if !joined {
            self.end_exchange(xid);
        }
    }

    /// The holder's RTS-share or current frame failed: it leaves the TxOP
    /// and falls back to EDCA recovery.
    fn holder_failed(&mut self, xid: u64, holder: NodeId) {
        let packet = self.nodes[holder].queue.front().map(|p| p.id);
        let packet = self
            .share_mut(xid)
            .and_then(|x| x.holder_packet.take())
            .or(packet);
        if let Some(p) = packet {
            self.packet_failed(holder, p);
        }
        self.release(holder, xid);
    }

    fn send_shared_frame(&mut self, xid: u64, at: SimTime, node: NodeId, mut frame: Frame, air: Duration, detail: String) {
        let limit_end = match self.share_mut(xid) {
            Some(x) => x.grant.end_limit(),
            None => return,
        };
        if frame.kind != FrameKind::CfEnd {
            frame.nav = limit_end.since((at + air).min(limit_end));
        }
        self.stage(at, node, frame, air, Some(xid), None, false, detail);
    }

    fn share_frame_end(&mut self, xid: u64, frame: &Frame, outcomes: &[Outcome]) {
        let now = self.now();
        let (sifs, pifs) = (self.timing.sifs, self.timing.pifs);
        let Some(x) = self.share_mut(xid) else {
            return;
        };
        let (holder, ap, phase) = (x.holder, x.ap, x.phase);
        let slot_sta = x.slot.as_ref().map(|s| s.sta);
        match frame.kind {
            FrameKind::RtsShare => {
                let ap_free = self.nodes[ap].xid.is_none() && !self.medium.is_transmitting(ap);
                if Self::delivered(outcomes, ap) && ap_free {
                    self.nodes[ap].xid = Some(xid);
                    let info = self.share_mut(xid).map(|x| {
                        x.ap_joined = true;
                        x.info.clone()
                    });
                    let info = info.expect("exchange present");
                    let cts = Frame::control(FrameKind::CtsShare, ap, Dest::Node(holder), Duration::ZERO)
                        .with_share(info);
                    let air = self.timing.share.cts_share;
                    self.send_shared_frame(xid, now + sifs, ap, cts, air, "holder=1".into());
                }
            }
            FrameKind::CtsShare if phase == SharePhase::Handshake => {
                let timeout = self.share_mut(xid).and_then(|x| x.timeout.take());
                if let Some(h) = timeout {
                    self.sched.cancel(h);
                }
                if Self::delivered(outcomes, holder) && self.nodes[holder].xid == Some(xid) {
                    if let Some(x) = self.share_mut(xid) {
                        x.phase = SharePhase::Holder;
                    }
                    self.holder_send(xid, now + sifs);
                } else {
                    if let Some(x) = self.share_mut(xid) {
                        x.phase = SharePhase::Polling;
                    }
                    self.holder_failed(xid, holder);
                    let at = now + sifs + self.timing.share.cts_reject;
                    self.schedule_step(at, xid, Step::ShareNext);
                }
            }
            FrameKind::Data if phase == SharePhase::Holder && frame.src == holder => {
                if Self::delivered(outcomes, ap) {
                    let ba = Frame::control(FrameKind::BlockAck, ap, Dest::Node(holder), Duration::ZERO);
                    let air = self.timing.block_ack;
                    self.send_shared_frame(xid, now + sifs, ap, ba, air, String::new());
                } else {
                    self.holder_failed(xid, holder);
                    self.share_begin_polling(xid, now + pifs);
                }
            }
            FrameKind::BlockAck if phase == SharePhase::Holder && frame.dst == Dest::Node(holder) => {
                if Self::delivered(outcomes, holder) {
                    let (packet, sent, planned) = {
                        let x = self.share_mut(xid).expect("exchange present");
                        (x.holder_packet.take(), x.holder_sent, x.grant.holder_frames)
                    };
                    if let Some(p) = packet {
                        self.packet_delivered(holder, p);
                    }
                    if sent < planned && !self.nodes[holder].queue.is_empty() {
                        self.holder_send(xid, now + sifs);
                    } else {
                        self.release(holder, xid);
                        let at = if sent == planned { now + sifs } else { now + pifs };
                        self.share_begin_polling(xid, at);
                    }
                } else {
                    self.holder_failed(xid, holder);
                    self.share_begin_polling(xid, now + pifs);
                }
            }
            FrameKind::CtsShare if phase == SharePhase::Polling => {
                let Some(s) = slot_sta else {
                    return;
                };
                let free = self.nodes[s].xid.is_none() && !self.medium.is_transmitting(s);
                if Self::delivered(outcomes, s) && free {
                    self.nodes[s].xid = Some(xid);
                    self.nodes[s].shared_slot = true;
                    self.trace_at(now, s, "shared_slot", "state=open".into());
                    self.shared_sta_decide(xid, now + sifs);
                } else {
                    if let Some(x) = self.share_mut(xid) {
                        x.slot = None;
                    }
                    let at = now + sifs + self.timing.share.cts_reject;
                    self.schedule_step(at, xid, Step::ShareNext);
                }
            }
            FrameKind::Data if phase == SharePhase::Polling && Some(frame.src) == slot_sta => {
                let s = frame.src;
                if Self::delivered(outcomes, ap) {
                    let ba = Frame::control(FrameKind::BlockAck, ap, Dest::Node(s), Duration::ZERO);
                    let air = self.timing.block_ack;
                    self.send_shared_frame(xid, now + sifs, ap, ba, air, String::new());
                } else {
                    self.shared_packet_result(xid, s, false);
                    self.close_slot(xid, s);
                    self.schedule_step(now + pifs, xid, Step::ShareNext);
                }
            }
            FrameKind::BlockAck if phase == SharePhase::Polling => {
                let Some(s) = slot_sta else {
                    return;
                };
                if Self::delivered(outcomes, s) {
                    self.shared_packet_result(xid, s, true);
                    self.shared_sta_decide(xid, now + sifs);
                } else {
                    self.shared_packet_result(xid, s, false);
                    self.close_slot(xid, s);
                    self.schedule_step(now + pifs, xid, Step::ShareNext);
                }
            }
            FrameKind::CtsReject => {
                self.close_slot(xid, frame.src);
                self.schedule_step(now + sifs, xid, Step::ShareNext);
            }
            FrameKind::Data if frame.src == ap => {
                let dst = frame.dst.node().expect("unicast data");
                if Self::delivered(outcomes, dst) {
                    let ack = Frame::control(FrameKind::Ack, dst, Dest::Node(ap), Duration::ZERO);
                    let air = self.timing.ack;
                    self.send_shared_frame(xid, now + sifs, dst, ack, air, String::new());
                } else {
                    if let Some(p) = self.share_mut(xid).and_then(|x| x.ap_packet.take()) {
                        self.packet_failed(ap, p);
                    }
                    self.schedule_step(now + pifs, xid, Step::ShareNext);
                }
            }
            FrameKind::Ack if frame.dst == Dest::Node(ap) => {
                let packet = self.share_mut(xid).and_then(|x| x.ap_packet.take());
                if let Some(p) = packet {
                    if Self::delivered(outcomes, ap) {
                        self.packet_delivered(ap, p);
                        self.schedule_step(now + sifs, xid, Step::ShareNext);
                    } else {
                        self.packet_failed(ap, p);
                        self.schedule_step(now + pifs, xid, Step::ShareNext);
                    }
                }
            }
            FrameKind::CfEnd => self.end_exchange(xid),
            _ => {}
        }
    }

    fn holder_send(&mut self, xid: u64, at: SimTime) {
        let Some(x) = self.share_mut(xid) else {
            return;
        };
        let (holder, ap) = (x.holder, x.ap);
        let Some(p) = self.nodes[holder].queue.front() else {
            return;
        };
        let (id, payload) = (p.id, p.payload);
        let air = self.data_airtime(payload);
        if let Some(x) = self.share_mut(xid) {
            x.holder_packet = Some(id);
            x.holder_sent += 1;
        }
        let frame = Frame::data(holder, ap, payload, Duration::ZERO);
        self.send_shared_frame(xid, at, holder, frame, air, format!("packet={id}"));
    }

    fn share_begin_polling(&mut self, xid: u64, at: SimTime) {
        if let Some(x) = self.share_mut(xid) {
            x.phase = SharePhase::Polling;
        }
        self.schedule_step(at, xid, Step::ShareNext);
    }

    fn shared_packet_result(&mut self, xid: u64, s: NodeId, ok: bool) {
        let packet = self
            .share_mut(xid)
            .and_then(|x| x.slot.as_mut())
            .and_then(|slot| slot.packet.take());
        if let Some(p) = packet {
            if ok {
                self.packet_delivered(s, p);
            } else {
                self.packet_failed(s, p);
            }
        }
    }

    fn close_slot(&mut self, xid: u64, s: NodeId) {
        if let Some(x) = self.share_mut(xid) {
            if x.slot.as_ref().is_some_and(|slot| slot.sta == s) {
                x.slot = None;
            }
        }
        if self.nodes[s].shared_slot {
            self.trace_at(self.now(), s, "shared_slot", "state=closed".into());
        }
        self.release(s, xid);
    }

    /// A polled STA sends its next frame if it still fits the slot,
    /// otherwise hands the slot back with a CTS-reject.
    fn shared_sta_decide(&mut self, xid: u64, at: SimTime) {
        let Some(x) = self.share_mut(xid) else {
            return;
        };
        let ap = x.ap;
        let Some(slot) = x.slot.as_ref() else {
            return;
        };
        let (s, slot_end) = (slot.sta, slot.end);
        let remaining = slot_end.since(at.min(slot_end));
        let head = self.nodes[s].queue.front().map(|p| (p.id, p.payload));
        let next = head.filter(|&(_, payload)| {
            self.timing.share.fits_next(remaining, self.data_airtime(payload))
        });
        match next {
            Some((id, payload)) => {
                let air = self.data_airtime(payload);
                if let Some(slot) = self.share_mut(xid).and_then(|x| x.slot.as_mut()) {
                    slot.packet = Some(id);
                }
                let frame = Frame::data(s, ap, payload, Duration::ZERO);
                self.send_shared_frame(xid, at, s, frame, air, format!("packet={id}"));
            }
            None => {
                let frame = Frame::control(FrameKind::CtsReject, s, Dest::Node(ap), Duration::ZERO);
                let air = self.timing.share.cts_reject;
                self.send_shared_frame(xid, at, s, frame, air, String::new());
            }
        }
    }

    fn share_next(&mut self, xid: u64) {
        let now = self.now();
        let ap_dl = self.cfg.mac.ap_downlink_in_share;
        let Some(x) = self.share_mut(xid) else {
            return;
        };
        x.phase = SharePhase::Polling;
        let (ap, limit_end) = (x.ap, x.grant.end_limit());
        if !x.ap_joined {
            return;
        }
        if let Some(&(s, alloc)) = x.grant.shared_allocations.get(x.next_poll) {
            x.next_poll += 1;
            x.slot = Some(Slot {
                sta: s,
                end: now + alloc,
                packet: None,
            });
            let info = x.info.clone();
            let cts = Frame::control(FrameKind::CtsShare, ap, Dest::Node(s), Duration::ZERO).with_share(info);
            let air = self.timing.share.cts_share;
            self.send_shared_frame(xid, now, ap, cts, air, format!("poll={s}"));
            return;
        }
        let cf_air = self.timing.share.cf_end;
        if ap_dl && self.nodes[ap].bss == REFERENCE_BSS {
            if let Some(p) = self.nodes[ap].queue.front() {
                let (id, dst, payload) = (p.id, p.dst, p.payload);
                let air = self.data_airtime(payload);
                let end = now + air + self.timing.sifs + self.timing.ack + self.timing.sifs + cf_air;
                if end <= limit_end {
                    if let Some(x) = self.share_mut(xid) {
                        x.ap_packet = Some(id);
                    }
                    let frame = Frame::data(ap, dst, payload, Duration::ZERO);
                    self.send_shared_frame(xid, now, ap, frame, air, format!("packet={id}"));
                    return;
                }
            }
        }
        let (cf_end, air) = self.control_frame(FrameKind::CfEnd, ap, Dest::Broadcast, Duration::ZERO);
        self.send_shared_frame(xid, now, ap, cf_end, air, String::new());
    }
}
