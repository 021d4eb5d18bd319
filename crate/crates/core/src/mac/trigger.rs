use serde::{Deserialize, Serialize};

use crate::engine::{Duration, SimTime};

/// Where the periodic trigger schedule starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "offset_us")]
pub enum TriggerPhase {
    /// First due time at exactly this offset.
    Fixed(f64),
    /// First due time drawn uniformly in `[0, period)` from the AP's stream.
    Random,
}

/// A trigger cycle that is due but has not started its exchange yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DueCycle {
    pub cycle: u64,
    pub due: SimTime,
}

/// Periodic trigger generation with a depth-one backlog: a cycle that has
/// not won the medium by the time the next one falls due is superseded.
#[derive(Debug, Clone)]
pub struct TriggerSchedule {
    period: Duration,
    next_due: SimTime,
    next_cycle: u64,
    pending: Option<DueCycle>,
    superseded: u64,
}

impl TriggerSchedule {
    pub fn new(period: Duration, first_due: SimTime) -> Self {
        assert!(period.0 > 0, "trigger period must be positive");
        TriggerSchedule {
            period,
            next_due: first_due,
            next_cycle: 0,
            pending: None,
            superseded: 0,
        }
    }

    pub fn period(&self) -> Duration {
        self.period
    }

    pub fn next_due(&self) -> SimTime {
        self.next_due
    }

    pub fn superseded(&self) -> u64 {
        self.superseded
    }

    pub fn pending(&self) -> Option<DueCycle> {
        self.pending
    }

    /// Marks the next cycle due and advances the schedule by one period.
    pub fn fire(&mut self) -> DueCycle {
        let due = DueCycle {
            cycle: self.next_cycle,
            due: self.next_due,
        };
        if self.pending.replace(due).is_some() {
            self.superseded += 1;
        }
        self.next_cycle += 1;
        self.next_due += self.period;
        due
    }

    /// Claims the pending cycle for an exchange that is starting now.
    pub fn take(&mut self) -> Option<DueCycle> {
        self.pending.take()
    }

    /// Puts a cycle back after a failed attempt, unless a newer one is due.
    pub fn restore(&mut self, cycle: DueCycle) {
        if self.pending.is_none() {
            self.pending = Some(cycle);
        } else {
            self.superseded += 1;
        }
    }
}

/// Length of the multi-user data phase: the largest per-STA need, capped
/// by what is left of the TxOP.
pub fn mu_data_duration(needs: &[Duration], cap: Duration) -> Duration {
    needs.iter().copied().max().unwrap_or(Duration::ZERO).min(cap)
}

/// Number of leading frames whose summed airtime fits in `budget`.
pub fn frames_fitting(airtimes: &[Duration], budget: Duration) -> usize {
    let mut used = Duration::ZERO;
    airtimes
        .iter()
        .take_while(|&&d| {
            used += d;
            used <= budget
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_due_times() {
        let mut s = TriggerSchedule::new(Duration::from_millis(5), SimTime(1_000));
        let a = s.fire();
        assert_eq!(a, DueCycle { cycle: 0, due: SimTime(1_000) });
        assert_eq!(s.next_due(), SimTime(5_001_000));
        assert_eq!(s.take(), Some(a));
        assert_eq!(s.take(), None);
    }

    #[test]
    fn stale_cycle_replaced() {
        let mut s = TriggerSchedule::new(Duration::from_millis(5), SimTime(0));
        s.fire();
        let b = s.fire();
        assert_eq!(s.superseded(), 1);
        assert_eq!(s.pending(), Some(b));
        let taken = s.take().unwrap();
        let c = s.fire();
        s.restore(taken);
        assert_eq!(s.pending(), Some(c));
        assert_eq!(s.superseded(), 2);
    }

    #[test]
    fn mu_duration_rules() {
        let d = |us| Duration::from_micros(us);
        assert_eq!(mu_data_duration(&[d(80), d(160), d(40)], d(5_000)), d(160));
        assert_eq!(mu_data_duration(&[d(8_000)], d(5_000)), d(5_000));
        assert_eq!(mu_data_duration(&[], d(5_000)), Duration::ZERO);
        assert_eq!(frames_fitting(&[d(80), d(80), d(80)], d(200)), 2);
        assert_eq!(frames_fitting(&[d(80)], d(79)), 0);
    }
}
