use std::collections::HashMap;

use super::{audible, NodeId, NodePosition, PhyProfile};
use crate::engine::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransmissionRecord {
    pub id: TxId,
    pub transmitter: NodeId,
    pub start: SimTime,
    pub end: SimTime,
    /// Frames of one multi-user PPDU share a group and do not collide with
    /// each other.
    pub mu_group: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Inaudible,
    Collided,
    Delivered,
}

#[derive(Debug)]
struct Live {
    record: TransmissionRecord,
    // (transmitter, group) of every transmission that overlapped this one
    overlaps: Vec<(NodeId, Option<u64>)>,
}

/// Protocol-level channel: a frame is lost at a receiver whenever another
/// transmission audible there overlaps it. No capture.
#[derive(Debug)]
pub struct Medium {
    n: usize,
    hears: Vec<bool>,
    busy: Vec<u32>,
    live: HashMap<TxId, Live>,
    active: Vec<TxId>,
    transmitting: Vec<Option<TxId>>,
    next_id: u64,
    last_delivered: Vec<Option<(SimTime, Option<u64>)>>,
}

impl Medium {
    pub fn new(positions: &[NodePosition], profile: &PhyProfile) -> Self {
        let n = positions.len();
        let mut hears = vec![false; n * n];
        for (i, a) in positions.iter().enumerate() {
            for (j, b) in positions.iter().enumerate() {
                hears[i * n + j] = i == j || audible(a, b, profile);
            }
        }
        Self::from_matrix(n, hears)
    }

    /// `hears[tx * n + rx]` says whether `rx` can hear `tx`.
    pub fn from_matrix(n: usize, mut hears: Vec<bool>) -> Self {
        assert_eq!(hears.len(), n * n);
        for i in 0..n {
            hears[i * n + i] = true;
        }
        Medium {
            n,
            hears,
            busy: vec![0; n],
            live: HashMap::new(),
            active: Vec::new(),
            transmitting: vec![None; n],
            next_id: 0,
            last_delivered: vec![None; n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn hears(&self, tx: NodeId, rx: NodeId) -> bool {
        self.hears[tx * self.n + rx]
    }

    /// Physical carrier sense, including the observer's own transmission.
    pub fn is_busy(&self, observer: NodeId) -> bool {
        self.busy[observer] > 0
    }

    pub fn is_transmitting(&self, node: NodeId) -> bool {
        self.transmitting[node].is_some()
    }

    pub fn active(&self) -> impl Iterator<Item = &TransmissionRecord> {
        self.active.iter().map(|id| &self.live[id].record)
    }

    pub fn record(&self, id: TxId) -> Option<&TransmissionRecord> {
        self.live.get(&id).map(|l| &l.record)
    }

    /// Starts a transmission at `start`. Returns its id and the nodes whose
    /// physical carrier sense just turned busy.
    ///
    /// Panics if the transmitter is already on the air.
    pub fn start(
        &mut self,
        transmitter: NodeId,
        start: SimTime,
        end: SimTime,
        mu_group: Option<u64>,
    ) -> (TxId, Vec<NodeId>) {
        assert!(end > start, "transmission must have positive duration");
        assert!(
            self.transmitting[transmitter].is_none(),
            "node {transmitter} already transmitting"
        );
        let id = TxId(self.next_id);
        self.next_id += 1;
        let record = TransmissionRecord {
            id,
            transmitter,
            start,
            end,
            mu_group,
        };
        let mut overlaps = Vec::new();
        for other in &self.active {
            let live = self.live.get_mut(other).expect("active tx is live");
            if live.record.end > start {
                live.overlaps.push((transmitter, mu_group));
                overlaps.push((live.record.transmitter, live.record.mu_group));
            }
        }
        self.live.insert(id, Live { record, overlaps });
        self.active.push(id);
        self.transmitting[transmitter] = Some(id);
        let mut became_busy = Vec::new();
        for rx in 0..self.n {
            if self.hears(transmitter, rx) {
                self.busy[rx] += 1;
                if self.busy[rx] == 1 {
                    became_busy.push(rx);
                }
            }
        }
        (id, became_busy)
    }

    /// Takes a transmission off the air. Returns the nodes whose physical
    /// carrier sense just turned idle. Outcomes stay queryable until
    /// [`Medium::forget`].
    pub fn end(&mut self, id: TxId) -> Vec<NodeId> {
        let transmitter = self.live[&id].record.transmitter;
        self.active.retain(|a| *a != id);
        if self.transmitting[transmitter] == Some(id) {
            self.transmitting[transmitter] = None;
        }
        let mut became_idle = Vec::new();
        for rx in 0..self.n {
            if self.hears(transmitter, rx) {
                self.busy[rx] -= 1;
                if self.busy[rx] == 0 {
                    became_idle.push(rx);
                }
            }
        }
        became_idle
    }

    pub fn forget(&mut self, id: TxId) {
        self.live.remove(&id);
    }

    pub fn reception_outcome(&self, id: TxId, receiver: NodeId) -> Outcome {
        let live = &self.live[&id];
        let rec = &live.record;
        if receiver == rec.transmitter || !self.hears(rec.transmitter, receiver) {
            return Outcome::Inaudible;
        }
        let hit = live.overlaps.iter().any(|&(src, group)| {
            let same_group = group.is_some() && group == rec.mu_group;
            !same_group && self.hears(src, receiver)
        });
        if hit {
            Outcome::Collided
        } else {
            Outcome::Delivered
        }
    }

    /// Registers a delivery at `receiver`; returns false if it overlaps the
    /// previous delivery there (outside a shared MU group).
    pub fn note_delivery(&mut self, id: TxId, receiver: NodeId) -> bool {
        let rec = self.live[&id].record;
        let ok = match self.last_delivered[receiver] {
            Some((end, group)) => {
                rec.start >= end || (group.is_some() && group == rec.mu_group)
            }
            None => true,
        };
        let prev_end = self.last_delivered[receiver].map_or(rec.end, |(e, _)| e.max(rec.end));
        self.last_delivered[receiver] = Some((prev_end, rec.mu_group));
        ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::Role;

    fn line(xs: &[f64]) -> Medium {
        let pos: Vec<_> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| NodePosition::new(i, x, 0.0, Role::Sta))
            .collect();
        Medium::new(&pos, &PhyProfile::default())
    }

    #[test]
    fn idle_then_busy() {
        let mut m = line(&[0.0, 5.0, 30.0]);
        assert!(!m.is_busy(1));
        let (id, busy) = m.start(0, SimTime(0), SimTime(100), None);
        assert_eq!(busy, vec![0, 1]);
        assert!(m.is_busy(0) && m.is_busy(1));
        assert!(!m.is_busy(2), "far node is hidden");
        assert_eq!(m.end(id), vec![0, 1]);
        assert_eq!(m.reception_outcome(id, 1), Outcome::Delivered);
        assert_eq!(m.reception_outcome(id, 2), Outcome::Inaudible);
    }

    #[test]
    fn overlapping_frames_collide() {
        let mut m = line(&[0.0, 4.0, 8.0]);
        let (a, _) = m.start(0, SimTime(0), SimTime(100), None);
        let (b, _) = m.start(2, SimTime(50), SimTime(150), None);
        m.end(a);
        m.end(b);
        assert_eq!(m.reception_outcome(a, 1), Outcome::Collided);
        assert_eq!(m.reception_outcome(b, 1), Outcome::Collided);
    }

    #[test]
    fn back_to_back_do_not_collide() {
        let mut m = line(&[0.0, 4.0, 8.0]);
        let (a, _) = m.start(0, SimTime(0), SimTime(100), None);
        m.end(a);
        let (b, _) = m.start(2, SimTime(100), SimTime(200), None);
        m.end(b);
        assert_eq!(m.reception_outcome(a, 1), Outcome::Delivered);
        assert_eq!(m.reception_outcome(b, 1), Outcome::Delivered);
        assert!(m.note_delivery(a, 1));
        assert!(m.note_delivery(b, 1));
    }

    #[test]
    fn hidden_terminal() {
        // 0 - 1 - 2 - 3 at 8 m spacing: 0 and 2 both reach 1; 3 only hears 2.
        let mut m = line(&[0.0, 8.0, 16.0, 24.0]);
        assert!(!m.hears(0, 2));
        let (a, _) = m.start(0, SimTime(0), SimTime(100), None);
        let (b, _) = m.start(2, SimTime(10), SimTime(90), None);
        m.end(b);
        m.end(a);
        assert_eq!(m.reception_outcome(b, 3), Outcome::Delivered);
        assert_eq!(m.reception_outcome(b, 1), Outcome::Collided);
        assert_eq!(m.reception_outcome(a, 1), Outcome::Collided);
    }

    #[test]
    fn half_duplex_receiver_misses_frames() {
        let mut m = line(&[0.0, 5.0]);
        let (a, _) = m.start(0, SimTime(0), SimTime(100), None);
        let (b, _) = m.start(1, SimTime(20), SimTime(40), None);
        m.end(b);
        m.end(a);
        assert_eq!(m.reception_outcome(a, 1), Outcome::Collided);
    }

    #[test]
    fn mu_group_members_coexist() {
        let mut m = line(&[0.0, 5.0, -5.0]);
        let (a, _) = m.start(1, SimTime(0), SimTime(100), Some(7));
        let (b, _) = m.start(2, SimTime(0), SimTime(100), Some(7));
        m.end(a);
        m.end(b);
        assert_eq!(m.reception_outcome(a, 0), Outcome::Delivered);
        assert_eq!(m.reception_outcome(b, 0), Outcome::Delivered);
        assert!(m.note_delivery(a, 0));
        assert!(m.note_delivery(b, 0));
    }
}
