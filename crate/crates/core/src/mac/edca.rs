use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{Duration, RngStream, SimTime};

/// EDCA access category, 0 lowest priority to 3 highest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct AcIndex(u8);

impl AcIndex {
    pub const AC0: AcIndex = AcIndex(0);
    pub const AC1: AcIndex = AcIndex(1);
    pub const AC2: AcIndex = AcIndex(2);
    pub const AC3: AcIndex = AcIndex(3);

    pub fn new(i: u8) -> Option<AcIndex> {
        (i < 4).then_some(AcIndex(i))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AcIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ac{}", self.0)
    }
}

impl FromStr for AcIndex {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix("ac")
            .or_else(|| s.strip_prefix("AC"))
            .unwrap_or(s);
        digits
            .parse::<u8>()
            .ok()
            .and_then(AcIndex::new)
            .ok_or_else(|| format!("unknown access category {s:?}"))
    }
}

impl From<AcIndex> for String {
    fn from(ac: AcIndex) -> String {
        ac.to_string()
    }
}

impl TryFrom<String> for AcIndex {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCategory {
    pub cw_min: u32,
    pub cw_max: u32,
    pub aifsn: u32,
}

impl AccessCategory {
    pub fn validate(&self) -> Result<(), String> {
        let pow2m1 = |v: u32| (v + 1).is_power_of_two();
        if self.cw_min > self.cw_max {
            return Err(format!("cw_min {} above cw_max {}", self.cw_min, self.cw_max));
        }
        if !pow2m1(self.cw_min) || !pow2m1(self.cw_max) {
            return Err(format!(
                "contention windows must be 2^k - 1, got {}/{}",
                self.cw_min, self.cw_max
            ));
        }
        Ok(())
    }

    /// Contention window after `retry` failed attempts.
    pub fn cw(&self, retry: u32) -> u32 {
        let grown = u64::from(self.cw_min + 1)
            .checked_shl(retry.min(40))
            .unwrap_or(u64::MAX)
            - 1;
        grown.min(u64::from(self.cw_max)) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdcaParams {
    pub slot_us: f64,
    pub sifs_us: f64,
    pub retry_limit: u32,
    pub ac: [AccessCategory; 4],
}

impl Default for EdcaParams {
    fn default() -> Self {
        EdcaParams {
            slot_us: 9.0,
            sifs_us: 16.0,
            retry_limit: 7,
            ac: [
                AccessCategory { cw_min: 15, cw_max: 1023, aifsn: 7 },
                AccessCategory { cw_min: 15, cw_max: 1023, aifsn: 3 },
                AccessCategory { cw_min: 7, cw_max: 15, aifsn: 2 },
                AccessCategory { cw_min: 3, cw_max: 7, aifsn: 2 },
            ],
        }
    }
}

impl EdcaParams {
    pub fn slot(&self) -> Duration {
        Duration::from_micros_f64(self.slot_us)
    }

    pub fn sifs(&self) -> Duration {
        Duration::from_micros_f64(self.sifs_us)
    }

    pub fn pifs(&self) -> Duration {
        self.sifs() + self.slot()
    }

    pub fn category(&self, ac: AcIndex) -> &AccessCategory {
        &self.ac[ac.index()]
    }

    pub fn aifs(&self, ac: AcIndex) -> Duration {
        self.sifs() + self.slot() * u64::from(self.category(ac).aifsn)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.slot_us > 0.0) || !(self.sifs_us > 0.0) {
            return Err("slot and SIFS must be positive".into());
        }
        self.ac.iter().try_for_each(AccessCategory::validate)
    }
}

/// Backoff slots, uniform on `[0, cw(retry)]`.
pub fn edca_draw_backoff(ac: &AccessCategory, retry: u32, rng: &mut RngStream) -> u32 {
    rng.below_inclusive(ac.cw(retry))
}

/// Countdown of one backoff instance with freeze/resume on busy medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Backoff {
    pub slots: u32,
    /// Instant at which counting (re)started: end of the AIFS that follows
    /// the last idle transition. `None` while frozen.
    pub counting_from: Option<SimTime>,
}

impl Backoff {
    pub fn new(slots: u32) -> Self {
        Backoff {
            slots,
            counting_from: None,
        }
    }

    /// Starts counting after AIFS of idle medium beginning at `idle_at`;
    /// returns the instant the countdown reaches zero.
    pub fn resume(&mut self, idle_at: SimTime, aifs: Duration, slot: Duration) -> SimTime {
        let from = idle_at + aifs;
        self.counting_from = Some(from);
        from + slot * u64::from(self.slots)
    }

    /// Freezes at `busy_at`, keeping only the slots not yet consumed.
    /// Returns the number of slots consumed.
    pub fn freeze(&mut self, busy_at: SimTime, slot: Duration) -> u32 {
        let consumed = match self.counting_from.take() {
            Some(from) if busy_at > from => ((busy_at - from).0 / slot.0) as u32,
            _ => 0,
        };
        let consumed = consumed.min(self.slots);
        self.slots -= consumed;
        consumed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cw_growth_and_cap() {
        let p = EdcaParams::default();
        let ac3 = p.category(AcIndex::AC3);
        assert_eq!(ac3.cw(0), 3);
        assert_eq!(ac3.cw(1), 7);
        assert_eq!(ac3.cw(3), 7);
        let ac0 = p.category(AcIndex::AC0);
        assert_eq!(ac0.cw(0), 15);
        assert_eq!(ac0.cw(6), 1023);
        assert_eq!(ac0.cw(60), 1023);
    }

    #[test]
    fn draw_bounds_and_mean() {
        let p = EdcaParams::default();
        let mut rng = RngStream::new(5, 0);
        for _ in 0..1000 {
            assert!(edca_draw_backoff(p.category(AcIndex::AC3), 0, &mut rng) <= 3);
            assert!(edca_draw_backoff(p.category(AcIndex::AC3), 3, &mut rng) <= 7);
        }
        let n = 100_000;
        let sum: u64 = (0..n)
            .map(|_| u64::from(edca_draw_backoff(p.category(AcIndex::AC0), 0, &mut rng)))
            .sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 7.5).abs() < 0.1, "{mean}");
    }

    #[test]
    fn aifs_values() {
        let p = EdcaParams::default();
        assert_eq!(p.aifs(AcIndex::AC3), Duration::from_micros(34));
        assert_eq!(p.aifs(AcIndex::AC0), Duration::from_micros(79));
        assert_eq!(p.pifs(), Duration::from_micros(25));
    }

    #[test]
    fn freeze_keeps_unconsumed_slots() {
        let slot = Duration::from_micros(9);
        let aifs = Duration::from_micros(34);
        let mut b = Backoff::new(5);
        let done = b.resume(SimTime(0), aifs, slot);
        assert_eq!(done, SimTime(34_000 + 45_000));
        // busy in the middle of the third slot
        assert_eq!(b.freeze(SimTime(34_000 + 20_000), slot), 2);
        assert_eq!(b.slots, 3);
        // busy during AIFS consumes nothing
        b.resume(SimTime(100_000), aifs, slot);
        assert_eq!(b.freeze(SimTime(120_000), slot), 0);
        assert_eq!(b.slots, 3);
        assert_eq!(b.freeze(SimTime(500_000), slot), 0, "already frozen");
    }

    #[test]
    fn ac_parse() {
        assert_eq!("ac3".parse::<AcIndex>().unwrap(), AcIndex::AC3);
        assert_eq!("AC0".parse::<AcIndex>().unwrap(), AcIndex::AC0);
        assert!("ac4".parse::<AcIndex>().is_err());
        let bad = AccessCategory { cw_min: 4, cw_max: 7, aifsn: 2 };
        assert!(bad.validate().is_err());
        assert!(EdcaParams::default().validate().is_ok());
    }
}
