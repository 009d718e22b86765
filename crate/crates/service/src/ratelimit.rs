use std::collections::{HashMap, VecDeque};

use chrono::{DateTime, Duration, Utc};
use parking_lot::Mutex;

/// Sliding-window failure counter. Once `max_failures` failures fall inside
/// the window, further attempts for that key are refused until they age out.
#[derive(Debug)]
pub struct FailureLimiter {
    window: Duration,
    max_failures: usize,
    failures: Mutex<HashMap<String, VecDeque<DateTime<Utc>>>>,
}

impl FailureLimiter {
    pub fn new(window: Duration, max_failures: usize) -> Self {
        Self { window, max_failures, failures: Mutex::new(HashMap::new()) }
    }

    pub fn per_minute(max_failures: usize) -> Self {
        Self::new(Duration::minutes(1), max_failures)
    }

    pub fn is_throttled(&self, key: &str, now: DateTime<Utc>) -> bool {
        let mut map = self.failures.lock();
        let Some(q) = map.get_mut(key) else {
            return false;
        };
        while q.front().is_some_and(|t| *t <= now - self.window) {
            q.pop_front();
        }
        q.len() >= self.max_failures
    }

    pub fn record_failure(&self, key: &str, now: DateTime<Utc>) {
        self.failures.lock().entry(key.to_string()).or_default().push_back(now);
    }
}
