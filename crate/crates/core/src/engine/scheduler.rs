use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use super::{Duration, EngineError, SimTime};

/// Live-lock cap: longest run of events allowed at one instant.
pub const DEFAULT_LIVE_LOCK_CAP: u64 = 1_000_000;

/// Cancellation token returned by [`Scheduler::schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Entry<E> {
    at: SimTime,
    seq: u64,
    payload: E,
}

// BinaryHeap is a max-heap; reverse so the earliest (then lowest seq) pops first.
impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        other.at.cmp(&self.at).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub processed: u64,
    pub cancelled: u64,
}

/// Ordered event queue with a simulated clock.
///
/// Events at equal timestamps fire in scheduling order.
pub struct Scheduler<E> {
    now: SimTime,
    heap: BinaryHeap<Entry<E>>,
    pending: HashSet<u64>,
    next_seq: u64,
    live_lock_cap: u64,
    same_instant_run: u64,
    last_fire: Option<SimTime>,
    total_scheduled: u64,
    total_fired: u64,
    total_cancelled: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            heap: BinaryHeap::new(),
            pending: HashSet::new(),
            next_seq: 0,
            live_lock_cap: DEFAULT_LIVE_LOCK_CAP,
            same_instant_run: 0,
            last_fire: None,
            total_scheduled: 0,
            total_fired: 0,
            total_cancelled: 0,
        }
    }

    pub fn with_live_lock_cap(mut self, cap: u64) -> Self {
        self.live_lock_cap = cap;
        self
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn total_scheduled(&self) -> u64 {
        self.total_scheduled
    }

    pub fn total_fired(&self) -> u64 {
        self.total_fired
    }

    pub fn total_cancelled(&self) -> u64 {
        self.total_cancelled
    }

    pub fn schedule(&mut self, at: SimTime, payload: E) -> Result<EventHandle, EngineError> {
        if at < self.now {
            return Err(EngineError::ScheduledInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { at, seq, payload });
        self.pending.insert(seq);
        self.total_scheduled += 1;
        Ok(EventHandle(seq))
    }

    pub fn schedule_in(&mut self, delay: Duration, payload: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, payload)
            .expect("relative schedule is never in the past")
    }

    /// Returns `true` when the event was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        let was_pending = self.pending.remove(&handle.0);
        if was_pending {
            self.total_cancelled += 1;
        }
        was_pending
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.pending.contains(&handle.0)
    }

    /// Pops the next live event due no later than `t_end`, advancing the clock.
    pub fn pop_until(&mut self, t_end: SimTime) -> Result<Option<(SimTime, E)>, EngineError> {
        while let Some(top) = self.heap.peek() {
            if top.at > t_end {
                return Ok(None);
            }
            let entry = self.heap.pop().expect("peeked");
            if !self.pending.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.at >= self.now);
            if self.last_fire == Some(entry.at) {
                self.same_instant_run += 1;
                if self.same_instant_run > self.live_lock_cap {
                    return Err(EngineError::LiveLock {
                        at: entry.at,
                        events: self.same_instant_run,
                    });
                }
            } else {
                self.same_instant_run = 1;
                self.last_fire = Some(entry.at);
            }
            self.now = entry.at;
            self.total_fired += 1;
            return Ok(Some((entry.at, entry.payload)));
        }
        Ok(None)
    }

    /// Runs `handler` on every event due no later than `t_end`, then parks the
    /// clock at `t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<RunStats, EngineError>
    where
        F: FnMut(&mut Scheduler<E>, SimTime, E),
    {
        if t_end < self.now {
            return Err(EngineError::ScheduledInPast {
                at: t_end,
                now: self.now,
            });
        }
        let cancelled_before = self.total_cancelled;
        let mut processed = 0;
        while let Some((at, payload)) = self.pop_until(t_end)? {
            handler(self, at, payload);
            processed += 1;
        }
        self.now = t_end;
        Ok(RunStats {
            processed,
            cancelled: self.total_cancelled - cancelled_before,
        })
    }

    /// Advances the clock without processing events; used after draining.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_among_equal_times() {
        let mut s = Scheduler::new();
        s.schedule(SimTime(5), "b").unwrap();
        s.schedule(SimTime(3), "a").unwrap();
        s.schedule(SimTime(5), "c").unwrap();
        s.schedule(SimTime(0), "now").unwrap();
        let mut seen = Vec::new();
        s.run_until(SimTime(10), |_, _, e| seen.push(e)).unwrap();
        assert_eq!(seen, vec!["now", "a", "b", "c"]);
    }

    #[test]
    fn cancel_suppresses_handler() {
        let mut s = Scheduler::new();
        let h = s.schedule(SimTime(5), 1).unwrap();
        s.schedule(SimTime(6), 2).unwrap();
        assert!(s.cancel(h));
        assert!(!s.cancel(h));
        let mut seen = Vec::new();
        let stats = s.run_until(SimTime(10), |_, _, e| seen.push(e)).unwrap();
        assert_eq!(seen, vec![2]);
        assert_eq!(stats.processed, 1);
        assert_eq!(s.total_scheduled(), s.total_fired() + s.total_cancelled());
    }

    #[test]
    fn rejects_past() {
        let mut s: Scheduler<()> = Scheduler::new();
        s.run_until(SimTime(100), |_, _, _| {}).unwrap();
        assert!(matches!(
            s.schedule(SimTime(99), ()),
            Err(EngineError::ScheduledInPast { .. })
        ));
        assert!(s.run_until(SimTime(50), |_, _, _| {}).is_err());
    }

    #[test]
    fn empty_run_is_noop() {
        let mut s: Scheduler<()> = Scheduler::new();
        let stats = s.run_until(SimTime(1_000), |_, _, _| {}).unwrap();
        assert_eq!(stats.processed, 0);
        assert_eq!(s.now(), SimTime(1_000));
    }

    #[test]
    fn resumable() {
        fn drive(splits: &[u64]) -> Vec<(u64, u32)> {
            let mut s = Scheduler::new();
            s.schedule(SimTime(1), 0u32).unwrap();
            let mut log = Vec::new();
            for &t in splits {
                s.run_until(SimTime(t), |s, at, n| {
                    log.push((at.0, n));
                    if n < 50 {
                        s.schedule_in(Duration(7), n + 1);
                    }
                })
                .unwrap();
            }
            log
        }
        assert_eq!(drive(&[100, 400]), drive(&[400]));
        assert_eq!(drive(&[3, 8, 9, 200, 400]), drive(&[400]));
    }

    #[test]
    fn live_lock_detected() {
        let mut s = Scheduler::new().with_live_lock_cap(1_000);
        s.schedule(SimTime(1), ()).unwrap();
        let err = s
            .run_until(SimTime(10), |s, _, _| {
                s.schedule_in(Duration::ZERO, ());
            })
            .unwrap_err();
        assert!(matches!(err, EngineError::LiveLock { .. }));
    }

    #[test]
    fn causality() {
        let mut s = Scheduler::new();
        for t in [9u64, 2, 7, 7, 1, 30, 4] {
            s.schedule(SimTime(t), t).unwrap();
        }
        let mut last = SimTime::ZERO;
        s.run_until(SimTime(100), |s, at, _| {
            assert!(at >= last);
            assert_eq!(s.now(), at);
            last = at;
        })
        .unwrap();
    }
}
