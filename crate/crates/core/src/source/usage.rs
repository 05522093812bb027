use std::collections::BTreeMap;

use parking_lot::Mutex;
use serde::Serialize;

/// Request units charged for one `getBlock`: 1 within the retention
/// boundary, 2 for older blocks. Skipped slots count as recent.
pub fn request_units_for_block(block_time: Option<i64>, now: i64, retention_hours: f64) -> u64 {
    match block_time {
        Some(t) if (now - t) as f64 > retention_hours * 3600.0 => 2,
        _ => 1,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct UsageReport {
    pub request_count: BTreeMap<String, u64>,
    pub request_units: u64,
}

impl UsageReport {
    pub fn count(&self, method: &str) -> u64 {
        self.request_count.get(method).copied().unwrap_or(0)
    }
}

/// Monotone per-method counters.
#[derive(Debug, Default)]
pub struct UsageCounters {
    inner: Mutex<UsageReport>,
}

impl UsageCounters {
    pub fn record(&self, method: &str, units: u64) {
        let mut r = self.inner.lock();
        *r.request_count.entry(method.to_string()).or_default() += 1;
        r.request_units += units;
    }

    pub fn snapshot(&self) -> UsageReport {
        self.inner.lock().clone()
    }
}
