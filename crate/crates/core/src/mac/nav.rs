use crate::engine::{Duration, SimTime};

/// Virtual carrier sense timer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Nav {
    until: SimTime,
}

impl Nav {
    pub fn until(&self) -> SimTime {
        self.until
    }

    pub fn is_set(&self, now: SimTime) -> bool {
        self.until > now
    }

    /// Applies a reservation heard at `arrival`; the timer never shrinks.
    /// Returns true if it was extended.
    pub fn update(&mut self, arrival: SimTime, reservation: Duration) -> bool {
        let candidate = arrival + reservation;
        if candidate > self.until {
            self.until = candidate;
            true
        } else {
            false
        }
    }

    /// CF-End: reservation cleared immediately.
    pub fn clear(&mut self, now: SimTime) {
        self.until = now;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_rule_and_clear() {
        let mut nav = Nav::default();
        assert!(!nav.is_set(SimTime(0)));
        assert!(nav.update(SimTime(1_000), Duration::from_millis(5)));
        assert_eq!(nav.until(), SimTime(5_001_000));
        assert!(!nav.update(SimTime(2_000), Duration::from_micros(100)));
        assert_eq!(nav.until(), SimTime(5_001_000));
        assert!(nav.is_set(SimTime(3_000)));
        nav.clear(SimTime(3_000));
        assert!(!nav.is_set(SimTime(3_000)));
    }
}
