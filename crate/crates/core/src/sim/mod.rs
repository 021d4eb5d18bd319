//! Event-driven simulation of one scenario.
//!
//! Every node runs a single-AC EDCA contention engine; the reference BSS
//! additionally runs the trigger-based or sharing-based exchange on top of
//! it. Frame exchanges are explicit state machines keyed by an exchange id
//! and advanced from frame-end events.

mod exchange;
mod node;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::engine::{Duration, EngineError, EventHandle, RngStream, Scheduler, SimTime, TraceRecord};
use crate::mac::{
    edca_draw_backoff, Backoff, Dest, Frame, InvariantChecker, ShareTiming, TriggerPhase,
    TriggerSchedule, Violation,
};
use crate::metrics::{DelayCollector, DelayRecord, MetricsError};
use crate::phy::{FrameKind, Medium, NodeId, Outcome, Role, TxId};
use crate::scenario::{
    Direction, ScenarioConfig, ScenarioError, TrafficKind, REFERENCE_BSS,
};
use crate::ProtocolKind;

use exchange::Exchange;
use node::{NodeMac, NodeMode, Packet};

pub use exchange::TriggerStats;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeStats {
    /// Packets generated inside the measurement window.
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Measured packets still queued when the run stopped.
    pub pending_at_end: u64,
    /// Packets delivered over the whole run, warm-up included.
    pub delivered_total: u64,
    pub frames_sent: u64,
}

#[derive(Debug)]
pub struct SimResult {
    pub scenario: String,
    pub seed: u64,
    /// Delays of reference-BSS uplink packets.
    pub delays: DelayCollector,
    pub nodes: Vec<NodeStats>,
    pub trigger: Option<TriggerStats>,
    pub invariants: InvariantChecker,
    pub trace: Option<Vec<TraceRecord>>,
    pub events: u64,
    pub end: SimTime,
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    Arrival { node: NodeId, binding: usize },
    BackoffDone { node: NodeId },
    NavCheck,
    TxEnd { tx: TxId },
    Send { id: u64 },
    PhantomEnd { id: u64 },
    Step { xid: u64, step: exchange::Step },
    TriggerDue,
}

/// A frame queued for transmission at a precise instant.
#[derive(Debug)]
struct Staged {
    node: NodeId,
    frame: Frame,
    airtime: Duration,
    mu_group: Option<u64>,
    xid: Option<u64>,
    /// Starts a new exchange (subject to NAV) rather than answering one.
    initiating: bool,
    detail: String,
}

#[derive(Debug)]
struct OnAir {
    frame: Frame,
    xid: Option<u64>,
    start: SimTime,
}

struct Timing {
    sifs: Duration,
    slot: Duration,
    pifs: Duration,
    ack: Duration,
    block_ack: Duration,
    txop_limit: Duration,
    share: ShareTiming,
}

pub fn simulate(config: &ScenarioConfig, options: &SimOptions) -> Result<SimResult, SimError> {
    config.validate()?;
    let mut sim = Simulation::new(config, options)?;
    sim.run()?;
    Ok(sim.finish())
}

struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    sched: Scheduler<Ev>,
    medium: Medium,
    nodes: Vec<NodeMac>,
    timing: Timing,
    exchanges: BTreeMap<u64, Exchange>,
    next_xid: u64,
    next_packet: u64,
    next_stage: u64,
    staged: HashMap<u64, Staged>,
    on_air: HashMap<TxId, OnAir>,
    collector: DelayCollector,
    stats: Vec<NodeStats>,
    checker: InvariantChecker,
    trace: Option<Vec<TraceRecord>>,
    trigger: Option<exchange::TriggerState>,
    warmup_end: SimTime,
    arrivals_end: SimTime,
    end: SimTime,
    nav_check: Option<(SimTime, EventHandle)>,
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a ScenarioConfig, options: &SimOptions) -> Result<Self, SimError> {
        let positions = cfg.build_topology();
        let medium = Medium::new(&positions, &cfg.phy);
        let edca = &cfg.mac.edca;
        let timing = Timing {
            sifs: edca.sifs(),
            slot: edca.slot(),
            pifs: edca.pifs(),
            ack: cfg.phy.control(FrameKind::Ack),
            block_ack: cfg.phy.control(FrameKind::BlockAck),
            txop_limit: cfg.mac.txop_limit(),
            share: ShareTiming::new(&cfg.phy, edca),
        };
        let active = cfg.active_nodes();
        let mut nodes = Vec::with_capacity(cfg.nodes.len());
        for spec in &cfg.nodes {
            let ap = cfg.ap_of(spec.bss).expect("validated: one AP per BSS");
            let reference = spec.bss == REFERENCE_BSS;
            let mode = match (reference, cfg.protocol, spec.role) {
                (true, ProtocolKind::TriggerBased, Role::Sta) => NodeMode::TriggeredSta,
                (true, ProtocolKind::TriggerBased, Role::Ap) => NodeMode::TriggerAp,
                (true, ProtocolKind::SharingBased, Role::Sta) => NodeMode::SharingSta,
                _ => NodeMode::Edca,
            };
            let mut peers: Vec<NodeId> = cfg
                .nodes
                .iter()
                .filter(|n| n.bss == spec.bss && n.role == Role::Sta && active.contains(&n.id))
                .map(|n| n.id)
                .collect();
            if peers.is_empty() {
                peers = cfg
                    .nodes
                    .iter()
                    .filter(|n| n.bss == spec.bss && n.role == Role::Sta)
                    .map(|n| n.id)
                    .collect();
            }
            nodes.push(NodeMac::new(
                spec.id,
                spec.bss,
                spec.role,
                spec.ac,
                edca.aifs(spec.ac),
                mode,
                ap,
                peers,
                RngStream::new(cfg.seed, spec.id as u64),
            ));
        }
        let trace = options.trace.then(Vec::new);
        let warmup_end = SimTime::ZERO + cfg.warmup();
        let arrivals_end = SimTime::ZERO + cfg.duration();
        let end = arrivals_end + cfg.drain();
        let mut sim = Simulation {
            cfg,
            sched: Scheduler::new(),
            medium,
            nodes,
            timing,
            exchanges: BTreeMap::new(),
            next_xid: 0,
            next_packet: 0,
            next_stage: 0,
            staged: HashMap::new(),
            on_air: HashMap::new(),
            collector: DelayCollector::new(warmup_end),
            stats: vec![NodeStats::default(); cfg.nodes.len()],
            checker: InvariantChecker::default(),
            trace,
            trigger: None,
            warmup_end,
            arrivals_end,
            end,
            nav_check: None,
        };
        sim.install()?;
        Ok(sim)
    }

    fn install(&mut self) -> Result<(), SimError> {
        for spec in &self.cfg.nodes {
            let detail = format!(
                "bss={} role={} x={} y={} ac={}",
                spec.bss, spec.role, spec.x, spec.y, spec.ac
            );
            self.trace_at(SimTime::ZERO, spec.id, "node", detail);
        }
        for (idx, binding) in self.cfg.traffic.iter().enumerate() {
            let node = binding.node;
            match binding.source.kind {
                TrafficKind::Saturated { payload_bytes } => {
                    self.nodes[node].saturated = Some((payload_bytes, binding.source.direction));
                    self.refill(node);
                }
                TrafficKind::Cbr {
                    period_us,
                    phase_us,
                    jitter_us,
                    ..
                } => {
                    let jitter = if jitter_us > 0.0 {
                        self.nodes[node].rng.unit() * jitter_us
                    } else {
                        0.0
                    };
                    let first = Duration::from_micros_f64(phase_us + jitter + period_us);
                    let at = SimTime::ZERO + first;
                    if at <= self.arrivals_end {
                        self.sched.schedule(at, Ev::Arrival { node, binding: idx })?;
                    }
                }
            }
        }
        if self.cfg.protocol == ProtocolKind::TriggerBased {
            if let Some(ap) = self.cfg.ap_of(REFERENCE_BSS) {
                let period = self.cfg.mac.trigger_period();
                let first = match self.cfg.mac.trigger_phase {
                    TriggerPhase::Fixed(off) => SimTime::ZERO + Duration::from_micros_f64(off),
                    TriggerPhase::Random => {
                        let draw = self.nodes[ap].rng.unit();
                        SimTime::ZERO + Duration((draw * period.0 as f64) as u64)
                    }
                };
                let schedule = TriggerSchedule::new(period, first);
                self.sched.schedule(first, Ev::TriggerDue)?;
                self.trigger = Some(exchange::TriggerState::new(ap, schedule));
            }
        }
        self.refresh_all();
        Ok(())
    }

    fn run(&mut self) -> Result<(), SimError> {
        let end = self.end;
        while let Some((_, ev)) = self.sched.pop_until(end)? {
            self.handle(ev);
            self.refresh_all();
        }
        self.sched.advance_to(end);
        Ok(())
    }

    fn finish(mut self) -> SimResult {
        for node in &self.nodes {
            let pending = node
                .queue
                .iter()
                .filter(|p| p.measured)
                .count() as u64;
            self.stats[node.id].pending_at_end = pending;
        }
        SimResult {
            scenario: self.cfg.name.clone(),
            seed: self.cfg.seed,
            delays: self.collector,
            nodes: self.stats,
            trigger: self.trigger.map(|t| t.stats),
            invariants: self.checker,
            trace: self.trace,
            events: self.sched.total_fired(),
            end: self.end,
        }
    }

    fn now(&self) -> SimTime {
        self.sched.now()
    }

    fn handle(&mut self, ev: Ev) {
        match ev {
            Ev::Arrival { node, binding } => self.on_arrival(node, binding),
            Ev::BackoffDone { node } => self.on_backoff_done(node),
            Ev::NavCheck => self.nav_check = None,
            Ev::TxEnd { tx } => self.on_tx_end(tx),
            Ev::Send { id } => self.on_send(id),
            Ev::PhantomEnd { id } => self.on_phantom_end(id),
            Ev::Step { xid, step } => self.on_step(xid, step),
            Ev::TriggerDue => self.on_trigger_due(),
        }
    }

    // ---- traffic ----

    fn on_arrival(&mut self, node: NodeId, binding: usize) {
        let now = self.now();
        let b = self.cfg.traffic[binding];
        let TrafficKind::Cbr {
            period_us,
            payload_bytes,
            ..
        } = b.source.kind
        else {
            return;
        };
        let next = now + Duration::from_micros_f64(period_us);
        if next <= self.arrivals_end {
            self.sched
                .schedule(next, Ev::Arrival { node, binding })
                .expect("future arrival");
        }
        let dst = self.destination(node, b.source.direction);
        let id = self.enqueue(node, dst, payload_bytes, true);
        if self.nodes[node].bss == REFERENCE_BSS {
            self.trace_at(now, node, "arrival", format!("packet={id} dst={dst}"));
        }
    }

    fn destination(&mut self, node: NodeId, direction: Direction) -> NodeId {
        let n = &mut self.nodes[node];
        match direction {
            Direction::Uplink => n.ap,
            Direction::Downlink => {
                let dst = n.peers[n.rr % n.peers.len()];
                n.rr += 1;
                dst
            }
        }
    }

    fn enqueue(&mut self, node: NodeId, dst: NodeId, payload: u32, cbr: bool) -> u64 {
        let now = self.now();
        let id = self.next_packet;
        self.next_packet += 1;
        let measured = cbr && now >= self.warmup_end;
        if measured {
            self.stats[node].generated += 1;
        }
        self.nodes[node].queue.push_back(Packet {
            id,
            dst,
            payload,
            generated: now,
            retries: 0,
            measured,
            cbr,
        });
        id
    }

    fn refill(&mut self, node: NodeId) {
        if let Some((payload, direction)) = self.nodes[node].saturated {
            while self.nodes[node].queue.len() < 2 {
                let dst = self.destination(node, direction);
                self.enqueue(node, dst, payload, false);
            }
        }
    }

    /// Head packet of `node` acknowledged at `now`.
    fn packet_delivered(&mut self, node: NodeId, packet_id: u64) {
        let now = self.now();
        let Some(pos) = self.nodes[node].queue.iter().position(|p| p.id == packet_id) else {
            return;
        };
        let p = self.nodes[node].queue.remove(pos).expect("position valid");
        self.stats[node].delivered_total += 1;
        if p.measured {
            self.stats[node].delivered += 1;
        }
        self.record(node, &p, Some(now));
        self.refill(node);
    }

    /// Failed attempt for a packet; drops it past the retry limit.
    fn packet_failed(&mut self, node: NodeId, packet_id: u64) {
        let limit = self.cfg.mac.edca.retry_limit;
        let Some(pos) = self.nodes[node].queue.iter().position(|p| p.id == packet_id) else {
            return;
        };
        let p = &mut self.nodes[node].queue[pos];
        p.retries += 1;
        if p.retries > limit {
            let p = self.nodes[node].queue.remove(pos).expect("position valid");
            if p.measured {
                self.stats[node].dropped += 1;
            }
            self.record(node, &p, None);
            self.refill(node);
        }
    }

    fn record(&mut self, node: NodeId, p: &Packet, delivered_at: Option<SimTime>) {
        if self.nodes[node].bss != REFERENCE_BSS || !p.cbr {
            return;
        }
        let now = self.now();
        let kind = if delivered_at.is_some() { "delivered" } else { "dropped" };
        let detail = match delivered_at {
            Some(t) => format!("packet={} delay_ns={} retries={}", p.id, (t - p.generated).0, p.retries),
            None => format!("packet={} retries={}", p.id, p.retries),
        };
        self.trace_at(now, node, kind, detail);
        let rec = DelayRecord {
            packet_id: p.id,
            source: node,
            generated_at: p.generated,
            delivered_at,
            retries: p.retries,
        };
        if let Err(e) = self.collector.record_delivery(rec) {
            log::error!("delay record rejected: {e}");
        }
    }

    // ---- contention ----

    fn channel_idle(&self, node: NodeId) -> bool {
        !self.medium.is_busy(node) && !self.nodes[node].nav.is_set(self.now())
    }

    fn wants_access(&self, node: NodeId) -> bool {
        let n = &self.nodes[node];
        match n.mode {
            NodeMode::TriggeredSta => false,
            NodeMode::TriggerAp => self
                .trigger
                .as_ref()
                .is_some_and(|t| t.schedule.pending().is_some()),
            NodeMode::Edca | NodeMode::SharingSta => !n.queue.is_empty(),
        }
    }

    fn refresh_all(&mut self) {
        for node in 0..self.nodes.len() {
            self.refresh(node);
        }
        self.arm_nav_check();
    }

    /// Re-evaluates a node's contention state after anything changed.
    fn refresh(&mut self, node: NodeId) {
        let now = self.now();
        let idle = self.channel_idle(node);
        {
            let n = &mut self.nodes[node];
            if idle {
                n.idle_since.get_or_insert(now);
            } else {
                n.idle_since = None;
            }
        }
        let wants = self.wants_access(node);
        let free = {
            let n = &self.nodes[node];
            n.xid.is_none() && !n.shared_slot && !self.medium.is_transmitting(node)
        };
        if wants && free && self.nodes[node].backoff.is_none() {
            let n = &mut self.nodes[node];
            let ac = *self.cfg.mac.edca.category(n.ac);
            let retries = match n.mode {
                NodeMode::TriggerAp => self.trigger.as_ref().map_or(0, |t| t.retries),
                _ => n.queue.front().map_or(0, |p| p.retries),
            };
            let slots = edca_draw_backoff(&ac, retries, &mut n.rng);
            n.backoff = Some(Backoff::new(slots));
            n.backoff_ref = now;
        }
        let should_count = wants && free && idle && self.nodes[node].backoff.is_some();
        let counting = self.nodes[node].backoff_ev.is_some();
        if should_count && !counting {
            let (slot, aifs) = (self.timing.slot, self.nodes[node].aifs);
            let n = &mut self.nodes[node];
            let from = n.idle_since.unwrap_or(now).max(n.backoff_ref);
            let bo = n.backoff.as_mut().expect("checked");
            let expiry = bo.resume(from, aifs, slot).max(now);
            let h = self
                .sched
                .schedule(expiry, Ev::BackoffDone { node })
                .expect("expiry not in the past");
            self.nodes[node].backoff_ev = Some((expiry, h));
        } else if !should_count && counting {
            let (expiry, h) = self.nodes[node].backoff_ev.expect("counting");
            if expiry == now && wants && free {
                // Countdown hit zero in this slot: transmit regardless of
                // the medium turning busy at the same instant.
                return;
            }
            self.sched.cancel(h);
            let slot = self.timing.slot;
            let n = &mut self.nodes[node];
            n.backoff_ev = None;
            if let Some(bo) = n.backoff.as_mut() {
                bo.freeze(now, slot);
            }
            if !wants {
                n.backoff = None;
            }
        } else if !wants && !counting && free {
            self.nodes[node].backoff = None;
        }
    }

    fn arm_nav_check(&mut self) {
        let now = self.now();
        let next = self
            .nodes
            .iter()
            .map(|n| n.nav.until())
            .filter(|&t| t > now)
            .min();
        match (next, self.nav_check) {
            (Some(t), Some((armed, _))) if armed == t => {}
            (Some(t), prev) => {
                if let Some((_, h)) = prev {
                    self.sched.cancel(h);
                }
                let h = self.sched.schedule(t, Ev::NavCheck).expect("future nav");
                self.nav_check = Some((t, h));
            }
            (None, Some((_, h))) => {
                self.sched.cancel(h);
                self.nav_check = None;
            }
            (None, None) => {}
        }
    }

    fn on_backoff_done(&mut self, node: NodeId) {
        let now = self.now();
        self.nodes[node].backoff_ev = None;
        if self.nodes[node].shared_slot {
            self.checker.report(Violation::SharedContention { node, at: now });
            return;
        }
        let blocked = self.nodes[node].xid.is_some()
            || self.medium.is_transmitting(node)
            || self.nodes[node].nav.is_set(now)
            || !self.wants_access(node);
        if blocked {
            if let Some(bo) = self.nodes[node].backoff.as_mut() {
                bo.counting_from = None;
            }
            return;
        }
        self.nodes[node].backoff = None;
        match self.nodes[node].mode {
            NodeMode::TriggerAp => self.start_trigger_exchange(node),
            NodeMode::SharingSta => self.start_shared_txop(node),
            NodeMode::Edca => self.start_edca_txop(node),
            NodeMode::TriggeredSta => {}
        }
    }

    // ---- transmission plumbing ----

    fn new_xid(&mut self) -> u64 {
        self.next_xid += 1;
        self.next_xid
    }

    /// Queues `frame` for transmission by `node` at `at`.
    #[allow(clippy::too_many_arguments)]
    fn stage(
        &mut self,
        at: SimTime,
        node: NodeId,
        frame: Frame,
        airtime: Duration,
        xid: Option<u64>,
        mu_group: Option<u64>,
        initiating: bool,
        detail: String,
    ) {
        let id = self.next_stage;
        self.next_stage += 1;
        self.staged.insert(
            id,
            Staged {
                node,
                frame,
                airtime,
                mu_group,
                xid,
                initiating,
                detail,
            },
        );
        self.sched.schedule(at, Ev::Send { id }).expect("staged in the future");
    }

    fn on_send(&mut self, id: u64) {
        let now = self.now();
        let st = self.staged.remove(&id).expect("staged frame");
        let node = st.node;
        if self.medium.is_transmitting(node) {
            log::debug!("node {node} busy transmitting; {} at {now} not sent", st.frame.kind);
            // Let the exchange see a frame nobody received.
            let end = now + st.airtime;
            self.staged.insert(id, st);
            self.sched.schedule(end, Ev::PhantomEnd { id }).expect("future");
            return;
        }
        if st.initiating {
            let nav_until = self.nodes[node].nav.until();
            self.checker.check(nav_until <= now, || Violation::NavHonor {
                node,
                at: now,
                nav_until,
            });
            self.checker.check(!self.nodes[node].shared_slot, || {
                Violation::SharedContention { node, at: now }
            });
        }
        if let Some(xid) = st.xid {
            if let Some(limit_end) = self.exchanges.get(&xid).map(|x| x.limit_end()) {
                let end = now + st.airtime;
                let start = self.exchanges[&xid].start();
                self.checker.check(end <= limit_end, || Violation::TxopCap {
                    node,
                    start,
                    end,
                    limit_end,
                });
            }
        }
        // Any running countdown of the transmitter freezes now.
        if let Some((_, h)) = self.nodes[node].backoff_ev.take() {
            self.sched.cancel(h);
            let slot = self.timing.slot;
            if let Some(bo) = self.nodes[node].backoff.as_mut() {
                bo.freeze(now, slot);
            }
        }
        let end = now + st.airtime;
        let (tx, _) = self.medium.start(node, now, end, st.mu_group);
        self.stats[node].frames_sent += 1;
        let dst = match st.frame.dst {
            Dest::Node(d) => d.to_string(),
            Dest::Broadcast => "all".to_string(),
        };
        let mut detail = format!("frame={} dst={} end={}", st.frame.kind, dst, end.0);
        if let Some(x) = st.xid {
            detail.push_str(&format!(" xid={x}"));
        }
        if !st.detail.is_empty() {
            detail.push(' ');
            detail.push_str(&st.detail);
        }
        self.trace_at(now, node, "tx_start", detail);
        self.on_air.insert(
            tx,
            OnAir {
                frame: st.frame,
                xid: st.xid,
                start: now,
            },
        );
        self.sched.schedule(end, Ev::TxEnd { tx }).expect("future end");
    }

    fn on_phantom_end(&mut self, id: u64) {
        let st = self.staged.remove(&id).expect("phantom frame");
        if let Some(xid) = st.xid {
            let outcomes = vec![Outcome::Inaudible; self.nodes.len()];
            self.exchange_frame_end(xid, &st.frame, &outcomes);
        }
    }

    fn is_addressee(&self, frame: &Frame, rx: NodeId) -> bool {
        match frame.dst {
            Dest::Node(d) => d == rx,
            Dest::Broadcast => self.nodes[rx].bss == self.nodes[frame.src].bss,
        }
    }

    fn on_tx_end(&mut self, tx: TxId) {
        let now = self.now();
        let air = self.on_air.remove(&tx).expect("on-air record");
        self.medium.end(tx);
        let n = self.nodes.len();
        let outcomes: Vec<Outcome> = (0..n).map(|r| self.medium.reception_outcome(tx, r)).collect();
        let frame = &air.frame;
        for (rx, &o) in outcomes.iter().enumerate() {
            if o != Outcome::Delivered {
                continue;
            }
            if !self.medium.note_delivery(tx, rx) {
                self.checker.report(Violation::DeliveredOverlap { receiver: rx, at: now });
            }
            if frame.kind == FrameKind::CfEnd {
                self.nodes[rx].nav.clear(now);
            } else if frame.nav > Duration::ZERO && !self.is_addressee(frame, rx) {
                self.nodes[rx].nav.update(now, frame.nav);
            }
        }
        self.medium.forget(tx);
        if self.trace.is_some() {
            let src = frame.src;
            self.trace_at(
                now,
                src,
                "tx_end",
                format!("frame={} start={}", frame.kind, air.start.0),
            );
            let addressees: Vec<NodeId> = (0..n)
                .filter(|&r| r != src && self.is_addressee(frame, r))
                .collect();
            for r in addressees {
                let o = match outcomes[r] {
                    Outcome::Delivered => "delivered",
                    Outcome::Collided => "collided",
                    Outcome::Inaudible => "inaudible",
                };
                self.trace_at(now, r, "rx", format!("frame={} src={} outcome={o}", frame.kind, src));
            }
        }
        if let Some(xid) = air.xid {
            self.exchange_frame_end(xid, &air.frame, &outcomes);
        }
    }

    fn trace_at(&mut self, at: SimTime, node: NodeId, kind: &str, detail: String) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceRecord::new(at, node as u32, kind, detail));
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn schedule_step(&mut self, at: SimTime, xid: u64, step: exchange::Step) -> EventHandle {
        self.sched.schedule(at, Ev::Step { xid, step }).expect("future step")
    }
}

#[cfg(test)]
mod tests;
