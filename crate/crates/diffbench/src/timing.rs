//! Adaptive repetition timing.
//!
//! One calibration run (also the warm-up, excluded from the mean) decides
//! the repeat count; the mean is then the plain inclusive mean over the
//! timed repeats. A single run exceeding the time limit marks the task as
//! timed out.

use std::time::Instant;

/// Default single-run limit in seconds.
pub const DEFAULT_TIME_LIMIT_S: f64 = 40_000.0;

/// Monotonic seconds source, swappable for a synthetic clock in tests.
pub trait Clock {
    fn now(&self) -> f64;
}

pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        MonotonicClock {
            origin: Instant::now(),
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// Repeat-count rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepeatScheme {
    /// The benchmark protocol: 1000 repeats under 5 s, 100 for 5-30 s,
    /// 10 for 30-120 s, a single run otherwise.
    Paper,
    /// Reduced counts for test suites: 200 under 50 ms, 20 under 1 s,
    /// 3 under 10 s, otherwise one run.
    Quick,
}

impl RepeatScheme {
    pub fn repeats_for(self, calib_s: f64) -> u32 {
        match self {
            RepeatScheme::Paper => {
                if calib_s < 5.0 {
                    1000
                } else if calib_s < 30.0 {
                    100
                } else if calib_s < 120.0 {
                    10
                } else {
                    1
                }
            }
            RepeatScheme::Quick => {
                if calib_s < 0.05 {
                    200
                } else if calib_s < 1.0 {
                    20
                } else if calib_s < 10.0 {
                    3
                } else {
                    1
                }
            }
        }
    }
}

impl std::str::FromStr for RepeatScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(RepeatScheme::Paper),
            "quick" => Ok(RepeatScheme::Quick),
            other => Err(format!("unknown repeat scheme '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TimingPolicy {
    pub scheme: RepeatScheme,
    pub limit_s: f64,
}

impl Default for TimingPolicy {
    fn default() -> Self {
        TimingPolicy {
            scheme: RepeatScheme::Paper,
            limit_s: DEFAULT_TIME_LIMIT_S,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timing {
    Completed { mean_s: f64, repeats: u32 },
    TimedOut { calib_s: f64 },
}

/// Calibrate once, pick the repeat count, return the mean over the repeats.
pub fn time_adaptive<C: Clock>(
    clock: &C,
    policy: &TimingPolicy,
    task: &mut dyn FnMut(),
) -> Timing {
    let t0 = clock.now();
    task();
    let calib_s = clock.now() - t0;
    if calib_s > policy.limit_s {
        return Timing::TimedOut { calib_s };
    }
    let repeats = policy.scheme.repeats_for(calib_s);
    let t0 = clock.now();
    for _ in 0..repeats {
        task();
    }
    let total = clock.now() - t0;
    Timing::Completed {
        mean_s: total / repeats as f64,
        repeats,
    }
}
