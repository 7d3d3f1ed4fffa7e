use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Live gateway counters, shared between the ingest and classify loops.
#[derive(Debug, Default)]
pub struct Counters {
    pub frames_in: AtomicU64,
    pub frames_accepted: AtomicU64,
    pub frames_out_of_order: AtomicU64,
    /// Malformed lines and frames with non-finite values.
    pub frames_invalid: AtomicU64,
    pub buffer_resets: AtomicU64,
    pub windows_emitted: AtomicU64,
    /// Windows discarded from a full queue before classification.
    pub windows_dropped: AtomicU64,
    pub windows_classified: AtomicU64,
    pub alerts: AtomicU64,
    /// FALL windows that fell inside the debounce interval.
    pub alerts_suppressed: AtomicU64,
    /// Windows whose processing took longer than the stride.
    pub deadline_misses: AtomicU64,
    pub max_latency_ns: AtomicU64,
    pub total_latency_ns: AtomicU64,
}

impl Counters {
    pub(crate) fn bump(c: &AtomicU64) {
        c.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn record_latency(&self, ns: u64) {
        self.total_latency_ns.fetch_add(ns, Ordering::Relaxed);
        self.max_latency_ns.fetch_max(ns, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> GatewayStats {
        let get = |c: &AtomicU64| c.load(Ordering::Relaxed);
        let classified = get(&self.windows_classified);
        GatewayStats {
            frames_in: get(&self.frames_in),
            frames_accepted: get(&self.frames_accepted),
            frames_out_of_order: get(&self.frames_out_of_order),
            frames_invalid: get(&self.frames_invalid),
            buffer_resets: get(&self.buffer_resets),
            windows_emitted: get(&self.windows_emitted),
            windows_dropped: get(&self.windows_dropped),
            windows_classified: classified,
            alerts: get(&self.alerts),
            alerts_suppressed: get(&self.alerts_suppressed),
            deadline_misses: get(&self.deadline_misses),
            max_latency_ms: get(&self.max_latency_ns) as f64 / 1e6,
            mean_latency_ms: if classified == 0 {
                0.0
            } else {
                get(&self.total_latency_ns) as f64 / classified as f64 / 1e6
            },
        }
    }
}

/// Point-in-time copy of the counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub frames_in: u64,
    pub frames_accepted: u64,
    pub frames_out_of_order: u64,
    pub frames_invalid: u64,
    pub buffer_resets: u64,
    pub windows_emitted: u64,
    pub windows_dropped: u64,
    pub windows_classified: u64,
    pub alerts: u64,
    pub alerts_suppressed: u64,
    pub deadline_misses: u64,
    pub max_latency_ms: f64,
    pub mean_latency_ms: f64,
}

impl GatewayStats {
    pub fn frames_dropped(&self) -> u64 {
        self.frames_out_of_order + self.frames_invalid
    }
}
