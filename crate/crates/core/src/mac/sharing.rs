use serde::{Deserialize, Serialize};

use crate::engine::{Duration, SimTime};
use crate::mac::EdcaParams;
use crate::phy::{FrameKind, NodeId, PhyProfile};

/// Durations the sharing exchange is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShareTiming {
    pub sifs: Duration,
    pub rts_share: Duration,
    pub cts_share: Duration,
    pub cts_reject: Duration,
    pub cf_end: Duration,
    pub block_ack: Duration,
}

impl ShareTiming {
    pub fn new(phy: &PhyProfile, edca: &EdcaParams) -> Self {
        ShareTiming {
            sifs: edca.sifs(),
            rts_share: phy.control(FrameKind::RtsShare),
            cts_share: phy.control(FrameKind::CtsShare),
            cts_reject: phy.control(FrameKind::CtsReject),
            cf_end: phy.control(FrameKind::CfEnd),
            block_ack: phy.control(FrameKind::BlockAck),
        }
    }

    /// One acknowledged data frame followed by the gap to the next frame.
    pub fn data_exchange(&self, data: Duration) -> Duration {
        data + self.sifs + self.block_ack + self.sifs
    }

    /// Handshake before the holder's own data: RTS-share, SIFS, CTS-share, SIFS.
    pub fn handshake(&self) -> Duration {
        self.rts_share + self.sifs + self.cts_share + self.sifs
    }

    /// Shortest possible poll: CTS-share, SIFS, CTS-reject, SIFS.
    pub fn empty_poll(&self) -> Duration {
        self.cts_share + self.sifs + self.cts_reject + self.sifs
    }

    /// Whether a shared STA with `remaining` time left in its slot (counted
    /// from the would-be data start) can send one more frame of airtime
    /// `data` and still close its slot with a CTS-reject.
    pub fn fits_next(&self, remaining: Duration, data: Duration) -> bool {
        self.data_exchange(data) + self.cts_reject + self.sifs <= remaining
    }
}

/// A won TxOP and the part of it handed to other STAs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxopGrant {
    pub holder: NodeId,
    pub start: SimTime,
    pub limit: Duration,
    /// Number of the holder's own queued frames sent before polling.
    pub holder_frames: u32,
    /// Polling order with each STA's slot length (poll to next poll).
    pub shared_allocations: Vec<(NodeId, Duration)>,
}

impl TxopGrant {
    pub fn end_limit(&self) -> SimTime {
        self.start + self.limit
    }

    /// Time consumed when every slot runs to its allocation.
    pub fn planned_total(&self, timing: &ShareTiming, holder_airtimes: &[Duration]) -> Duration {
        let holder: Duration = holder_airtimes
            .iter()
            .take(self.holder_frames as usize)
            .map(|&d| timing.data_exchange(d))
            .sum();
        timing.handshake()
            + holder
            + self.shared_allocations.iter().map(|a| a.1).sum()
            + timing.cf_end
    }
}

/// Plans a shared TxOP for `holder`, or `None` when it should fall back to
/// a plain EDCA TxOP (empty group or no residual time).
///
/// The holder keeps as many of its queued frames as fit; the residual is
/// split equally across the group in the given order. STAs that would not
/// get room for one acknowledged frame are dropped from the tail of the
/// group. Any rounding remainder goes to the last slot so that fully used
/// allocations end the CF-End exactly on the limit.
pub fn plan_shared_txop(
    holder: NodeId,
    start: SimTime,
    limit: Duration,
    holder_airtimes: &[Duration],
    group: &[NodeId],
    group_data_airtime: Duration,
    timing: &ShareTiming,
) -> Option<TxopGrant> {
    if group.is_empty() {
        return None;
    }
    let fixed = timing.handshake() + timing.cf_end;
    let mut used = fixed;
    let mut holder_frames = 0u32;
    for &d in holder_airtimes {
        let next = used + timing.data_exchange(d);
        if next > limit {
            break;
        }
        used = next;
        holder_frames += 1;
    }
    if holder_frames == 0 {
        return None;
    }
    let residual = limit.saturating_sub(used);
    let min_slot = timing.cts_share + timing.sifs + timing.data_exchange(group_data_airtime)
        + timing.cts_reject
        + timing.sifs;
    let mut k = group.len() as u64;
    while k > 0 && residual.0 / k < min_slot.0 {
        k -= 1;
    }
    if k == 0 {
        return None;
    }
    let each = Duration(residual.0 / k);
    let remainder = Duration(residual.0 - each.0 * k);
    let mut shared_allocations: Vec<(NodeId, Duration)> =
        group.iter().take(k as usize).map(|&n| (n, each)).collect();
    if let Some(last) = shared_allocations.last_mut() {
        last.1 += remainder;
    }
    Some(TxopGrant {
        holder,
        start,
        limit,
        holder_frames,
        shared_allocations,
    })
}

/// How many frames of the given airtimes a shared STA sends in a slot of
/// length `allocation` (measured from its poll).
pub fn frames_in_slot(allocation: Duration, airtimes: &[Duration], timing: &ShareTiming) -> usize {
    let mut remaining = allocation.saturating_sub(timing.cts_share + timing.sifs);
    let mut n = 0;
    for &d in airtimes {
        if !timing.fits_next(remaining, d) {
            break;
        }
        remaining = remaining - timing.data_exchange(d);
        n += 1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn timing() -> ShareTiming {
        ShareTiming::new(&PhyProfile::default(), &EdcaParams::default())
    }

    const DATA: Duration = Duration(80_800);

    #[test]
    fn equal_split_across_three() {
        let t = timing();
        let limit = Duration::from_millis(5);
        let g = plan_shared_txop(1, SimTime(0), limit, &[DATA], &[2, 3, 4], DATA, &t).unwrap();
        assert_eq!(g.holder_frames, 1);
        assert_eq!(g.shared_allocations.len(), 3);
        let residual = limit - t.handshake() - t.cf_end - t.data_exchange(DATA);
        let a = &g.shared_allocations;
        assert_eq!(a[0].1, a[1].1);
        assert!(a[2].1 >= a[0].1 && a[2].1.0 - a[0].1.0 < 3);
        assert_eq!(a.iter().map(|x| x.1).sum::<Duration>(), residual);
        assert_eq!(g.planned_total(&t, &[DATA]), limit);
    }

    #[test]
    fn empty_group_or_full_holder_falls_back() {
        let t = timing();
        let limit = Duration::from_millis(5);
        assert!(plan_shared_txop(1, SimTime(0), limit, &[DATA], &[], DATA, &t).is_none());
        let full = vec![DATA; 100];
        assert!(plan_shared_txop(1, SimTime(0), limit, &full, &[2, 3], DATA, &t).is_none());
    }

    #[test]
    fn group_trimmed_when_residual_is_small() {
        let t = timing();
        let limit = Duration::from_micros(700);
        let g = plan_shared_txop(1, SimTime(0), limit, &[DATA], &[2, 3, 4], DATA, &t).unwrap();
        assert_eq!(g.shared_allocations.len(), 1);
        assert_eq!(g.planned_total(&t, &[DATA]), limit);
    }

    #[test]
    fn slot_fill() {
        let t = timing();
        let one = t.cts_share + t.sifs + t.data_exchange(DATA) + t.cts_reject + t.sifs;
        assert_eq!(frames_in_slot(one, &[DATA, DATA], &t), 1);
        assert_eq!(frames_in_slot(one - Duration(1), &[DATA], &t), 0);
        assert_eq!(frames_in_slot(Duration::from_millis(5), &[], &t), 0);
        assert!(frames_in_slot(Duration::from_micros(1600), &[DATA; 20], &t) >= 9);
    }
}
