use std::sync::Mutex;
use std::time::{Duration, Instant};

/// A single request budget shared by every thread that holds a reference.
///
/// Permits are handed out on a fixed grid `interval = 1 / rate` apart, so a
/// window of `w` seconds never sees more than `ceil(rate * w) + 1` requests.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    /// `rate` is in requests per second and must be positive.
    pub fn new(rate: f64) -> Self {
        assert!(rate > 0.0 && rate.is_finite(), "rate limit must be positive");
        Self { interval: Duration::from_secs_f64(1.0 / rate), next_slot: Mutex::new(None) }
    }

    /// Blocks until this caller's slot arrives.
    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = match *next {
                Some(t) if t > now => t,
                _ => now,
            };
            *next = Some(slot + self.interval);
            slot.saturating_duration_since(now)
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}
