//! Discrete-event core: simulated clock, event queue, random streams, traces.

mod rng;
mod scheduler;
mod time;
mod trace;

pub use rng::RngStream;
pub use scheduler::{EventHandle, RunStats, Scheduler, DEFAULT_LIVE_LOCK_CAP};
pub use time::{Duration, SimTime};
pub use trace::{read_trace, write_trace, TraceParseError, TraceReadError, TraceRecord, TRACE_HEADER};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("event at {at} is before the current time {now}")]
    ScheduledInPast { at: SimTime, now: SimTime },
    #[error("live-lock: {events} events at {at} without the clock advancing")]
    LiveLock { at: SimTime, events: u64 },
    #[error("empty range [{lo}, {hi}]")]
    EmptyRange { lo: i64, hi: i64 },
}
