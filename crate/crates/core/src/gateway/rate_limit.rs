use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use super::Clock;

const WINDOW: Duration = Duration::from_secs(60);

/// Shared per-provider limiter: at most `per_minute` grants in any 60 s window.
#[derive(Debug)]
pub struct RateLimiter {
    per_minute: usize,
    grants: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn per_minute(per_minute: u32) -> Self {
        Self { per_minute: per_minute.max(1) as usize, grants: Mutex::new(VecDeque::new()) }
    }

    /// Blocks (via `clock`) until a request may be sent, then records it.
    pub fn acquire(&self, clock: &dyn Clock) {
        loop {
            let wait = {
                let mut grants = self.grants.lock().unwrap();
                let now = clock.now();
                while grants.front().is_some_and(|&t| t + WINDOW <= now) {
                    grants.pop_front();
                }
                if grants.len() < self.per_minute {
                    grants.push_back(now);
                    return;
                }
                grants[0] + WINDOW - now
            };
            clock.sleep(wait);
        }
    }
}
