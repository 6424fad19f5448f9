use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Time source for the limiter, replaceable in tests.
pub trait Clock: Send + Sync {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Caps issued requests per rolling window (a minute by default).
pub struct RateLimiter<C: Clock = SystemClock> {
    cap: usize,
    window: Duration,
    clock: C,
    issued: Mutex<VecDeque<Duration>>,
}

impl RateLimiter<SystemClock> {
    pub fn per_minute(cap: usize) -> Self {
        Self::with_clock(cap, Duration::from_secs(60), SystemClock::default())
    }
}

impl<C: Clock> RateLimiter<C> {
    pub fn with_clock(cap: usize, window: Duration, clock: C) -> Self {
        assert!(cap > 0, "rate limit must allow at least one request");
        Self {
            cap,
            window,
            clock,
            issued: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks until a request may be issued and records it. Returns the
    /// issue time.
    pub fn acquire(&self) -> Duration {
        loop {
            let wait = {
                let mut issued = self.issued.lock().expect("limiter lock");
                let now = self.clock.now();
                while issued.front().is_some_and(|&t| now.saturating_sub(t) >= self.window) {
                    issued.pop_front();
                }
                if issued.len() < self.cap {
                    issued.push_back(now);
                    return now;
                }
                (issued[0] + self.window).saturating_sub(now)
            };
            self.clock.sleep(wait.max(Duration::from_millis(1)));
        }
    }

    pub fn clock(&self) -> &C {
        &self.clock
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicU64, Ordering};

    /// Manual clock: `sleep` advances time instantly.
    #[derive(Default)]
    pub(crate) struct FakeClock {
        nanos: AtomicU64,
    }

    impl FakeClock {
        fn advance(&self, d: Duration) {
            self.nanos.fetch_add(d.as_nanos() as u64, Ordering::SeqCst);
        }
    }

    impl Clock for FakeClock {
        fn now(&self) -> Duration {
            Duration::from_nanos(self.nanos.load(Ordering::SeqCst))
        }

        fn sleep(&self, d: Duration) {
            self.advance(d);
        }
    }

    #[test]
    fn blocks_when_full() {
        let l = RateLimiter::with_clock(2, Duration::from_secs(60), FakeClock::default());
        assert_eq!(l.acquire(), Duration::ZERO);
        assert_eq!(l.acquire(), Duration::ZERO);
        assert_eq!(l.acquire(), Duration::from_secs(60));
    }

    proptest! {
        #[test]
        fn rolling_window_never_exceeds_cap(
            cap in 1usize..6,
            gaps in proptest::collection::vec(0u64..40_000, 1..60),
        ) {
            let window = Duration::from_secs(60);
            let l = RateLimiter::with_clock(cap, window, FakeClock::default());
            let mut times = Vec::new();
            for gap in gaps {
                l.clock().advance(Duration::from_millis(gap));
                times.push(l.acquire());
            }
            for (i, &t) in times.iter().enumerate() {
                let in_window = times[i..].iter().filter(|&&u| u < t + window).count();
                prop_assert!(in_window <= cap, "{} requests within a minute of {:?}", in_window, t);
            }
        }
    }
}
