//! Streaming fall detection over a newline-delimited JSON sample stream.
//!
//! Frames `{"t":<ms>,"ax":..,"ay":..,"az":..}` are cut into overlapping
//! windows of the model's record length. Each window goes through the same
//! feature pipeline and voting model used offline; a FALL vote produces an
//! [`AlertEvent`] unless another alert started less than the debounce
//! interval earlier.
//!
//! [`serve`] runs one ingest loop and one classify loop joined by a bounded
//! window queue. When classification falls behind, the oldest queued windows
//! are dropped and counted; frames are never dropped for backpressure.

mod counters;
mod window;

use std::collections::VecDeque;
use std::io::{self, BufRead, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use counters::{Counters, GatewayStats};
pub use window::{Frame, Window, Windower};

use crate::classifiers::{ClassifierError, ModelBundle, Votes};
use crate::dataset::{Label, Record};
use crate::features::{FeatureError, FeaturePipeline};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid gateway configuration: {0}")]
    Config(String),
    #[error("a {window_s} s window at {fs} Hz is {samples} samples, but the model was trained on {model_len}-sample records")]
    WindowMismatch {
        window_s: f64,
        fs: f64,
        samples: usize,
        model_len: usize,
    },
    #[error(
        "stream rate {stream} Hz differs from the model's {model} Hz; resample before streaming"
    )]
    RateMismatch { stream: f64, model: f64 },
    #[error(transparent)]
    Model(#[from] ClassifierError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// What to do with a new window when the classify queue is full.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Overflow {
    /// Discard the oldest queued window (live streams).
    #[default]
    DropOldest,
    /// Wait for room (replaying recorded files).
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPolicy {
    /// Window length, seconds.
    pub window: f64,
    /// Distance between window starts, seconds.
    pub stride: f64,
    /// Minimum time between alert window starts, seconds.
    pub debounce: f64,
    pub queue_capacity: usize,
    pub overflow: Overflow,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy {
            window: 3.0,
            stride: 0.5,
            debounce: 10.0,
            queue_capacity: 256,
            overflow: Overflow::DropOldest,
        }
    }
}

impl WindowPolicy {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: String| Err(GatewayError::Config(m));
        if !(self.window.is_finite() && self.window > 0.0) {
            return bad(format!("window must be positive, got {}", self.window));
        }
        if !(self.stride.is_finite() && self.stride > 0.0 && self.stride <= self.window) {
            return bad(format!(
                "stride must be in (0, window = {}], got {}",
                self.window, self.stride
            ));
        }
        if !(self.debounce.is_finite() && self.debounce >= 0.0) {
            return bad(format!(
                "debounce must be non-negative, got {}",
                self.debounce
            ));
        }
        if self.queue_capacity == 0 {
            return bad("queue capacity must be at least 1".into());
        }
        Ok(())
    }

    /// `(window, stride)` in samples at `fs` Hz, rounded to the nearest sample.
    pub fn samples(&self, fs: f64) -> (usize, usize) {
        (
            (self.window * fs).round() as usize,
            ((self.stride * fs).round() as usize).max(1),
        )
    }
}

/// Emitted for a FALL window outside the debounce interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    /// Timestamp of the window's first frame, ms.
    pub window_start: f64,
    /// Timestamp of the window's last frame, ms.
    pub window_end: f64,
    pub label: Label,
    pub votes: Votes,
    pub window_id: u64,
    pub model_id: String,
}

/// Result of classifying one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowLabel {
    pub label: Label,
    pub votes: Votes,
    pub latency_ns: u64,
}

/// Classifies windows and applies the debounce rule.
#[derive(Debug)]
pub struct Detector {
    bundle: ModelBundle,
    pipeline: FeaturePipeline,
    policy: WindowPolicy,
    model_id: String,
    last_alert: Option<f64>,
}

impl Detector {
    /// Checks that the policy's window matches the model's record length;
    /// a mismatch is a startup error.
    pub fn new(bundle: ModelBundle, policy: WindowPolicy) -> Result<Detector, GatewayError> {
        policy.validate()?;
        let (samples, _) = policy.samples(bundle.fs);
        if samples != bundle.record_len {
            return Err(GatewayError::WindowMismatch {
                window_s: policy.window,
                fs: bundle.fs,
                samples,
                model_len: bundle.record_len,
            });
        }
        let pipeline = FeaturePipeline::new(&bundle.features, bundle.record_len)?;
        if pipeline.vector_len() != bundle.model.dim() {
            return Err(GatewayError::Config(format!(
                "feature vector has {} values, model expects {}",
                pipeline.vector_len(),
                bundle.model.dim()
            )));
        }
        Ok(Detector {
            model_id: bundle.model_id(),
            bundle,
            pipeline,
            policy,
            last_alert: None,
        })
    }

    /// Also rejects a stream whose declared rate differs from the model's.
    pub fn with_stream_rate(
        bundle: ModelBundle,
        policy: WindowPolicy,
        fs: f64,
    ) -> Result<Detector, GatewayError> {
        if fs != bundle.fs {
            return Err(GatewayError::RateMismatch {
                stream: fs,
                model: bundle.fs,
            });
        }
        Detector::new(bundle, policy)
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn policy(&self) -> &WindowPolicy {
        &self.policy
    }

    pub fn bundle(&self) -> &ModelBundle {
        &self.bundle
    }

    /// A fresh windower for this model and policy.
    pub fn windower(&self) -> Windower {
        let (len, stride) = self.policy.samples(self.bundle.fs);
        Windower::new(len, stride, self.policy.window * 1000.0)
    }

    /// Samples of a window as a record, exactly as an offline file would hold them.
    pub fn window_record(&self, w: &Window) -> Result<Record, GatewayError> {
        Record::new(
            format!("window-{}", w.id),
            w.ax.clone(),
            w.ay.clone(),
            w.az.clone(),
            self.bundle.fs,
            "stream",
            Label::Adl,
        )
        .map_err(|e| GatewayError::Config(e.to_string()))
    }

    /// Features plus vote for one window; the same code path as offline classification.
    pub fn classify(&self, w: &Window) -> Result<WindowLabel, GatewayError> {
        let start = Instant::now();
        let record = self.window_record(w)?;
        let features = self.pipeline.extract_values(&record)?;
        let p = self.bundle.model.predict(&features)?;
        Ok(WindowLabel {
            label: p.label,
            votes: p.votes,
            latency_ns: start.elapsed().as_nanos() as u64,
        })
    }

    /// Classifies a window and returns an alert if one is due.
    pub fn offer(
        &mut self,
        w: &Window,
        counters: &Counters,
    ) -> Result<Option<AlertEvent>, GatewayError> {
        let out = self.classify(w)?;
        Counters::bump(&counters.windows_classified);
        counters.record_latency(out.latency_ns);
        if out.latency_ns as f64 > self.policy.stride * 1e9 {
            Counters::bump(&counters.deadline_misses);
            log::warn!(
                "window {} took {:.1} ms, longer than the {} s stride",
                w.id,
                out.latency_ns as f64 / 1e6,
                self.policy.stride
            );
        }
        if out.label != Label::Fall {
            return Ok(None);
        }
        let debounce_ms = self.policy.debounce * 1000.0;
        if let Some(last) = self.last_alert {
            if w.start - last < debounce_ms {
                Counters::bump(&counters.alerts_suppressed);
                return Ok(None);
            }
        }
        self.last_alert = Some(w.start);
        Counters::bump(&counters.alerts);
        Ok(Some(AlertEvent {
            window_start: w.start,
            window_end: w.end,
            label: Label::Fall,
            votes: out.votes,
            window_id: w.id,
            model_id: self.model_id.clone(),
        }))
    }
}

/// Runs a whole frame sequence through the detector on the calling thread.
pub fn detect(
    frames: impl IntoIterator<Item = Frame>,
    detector: &mut Detector,
    counters: &Counters,
) -> Result<Vec<AlertEvent>, GatewayError> {
    let mut windower = detector.windower();
    let mut alerts = Vec::new();
    for frame in frames {
        if let Some(w) = windower.push(frame, counters) {
            alerts.extend(detector.offer(&w, counters)?);
        }
    }
    Ok(alerts)
}

struct WindowQueue {
    state: Mutex<(VecDeque<Window>, bool)>,
    ready: Condvar,
    capacity: usize,
    overflow: Overflow,
}

impl WindowQueue {
    fn new(capacity: usize, overflow: Overflow) -> Self {
        WindowQueue {
            state: Mutex::new((VecDeque::with_capacity(capacity), false)),
            ready: Condvar::new(),
            capacity,
            overflow,
        }
    }

    fn push(&self, w: Window, counters: &Counters) {
        let mut guard = self.state.lock().unwrap_or_else(|p| p.into_inner());
        while guard.0.len() >= self.capacity && !guard.1 {
            match self.overflow {
                Overflow::DropOldest => {
                    guard.0.pop_front();
                    Counters::bump(&counters.windows_dropped);
                }
                Overflow::Block => {
                    guard = self.ready.wait(guard).unwrap_or_else(|p| p.into_inner());
                }
            }
        }
        if guard.1 {
            return;
        }
        guard.0.push_back(w);
        self.ready.notify_all();
    }

    fn pop(&self) -> Option<Window> {
        let mut guard = self.state.lock().unwrap_or_else(|p| p.into_inner());
        loop {
            if let Some(w) = guard.0.pop_front() {
                self.ready.notify_all();
                return Some(w);
            }
            if guard.1 {
                return None;
            }
            guard = self.ready.wait(guard).unwrap_or_else(|p| p.into_inner());
        }
    }

    fn close(&self) {
        let mut guard = self.state.lock().unwrap_or_else(|p| p.into_inner());
        guard.1 = true;
        self.ready.notify_all();
    }
}

/// Reads NDJSON frames from `input` until end of stream or `stop`, writing
/// one NDJSON alert per line to `output`. Malformed lines are counted as
/// invalid frames and skipped.
pub fn serve<R, W>(
    input: R,
    output: W,
    mut detector: Detector,
    counters: &Counters,
    stop: &AtomicBool,
) -> Result<GatewayStats, GatewayError>
where
    R: BufRead + Send,
    W: Write,
{
    let queue = WindowQueue::new(detector.policy.queue_capacity, detector.policy.overflow);
    let mut windower = detector.windower();
    let mut output = output;
    std::thread::scope(|scope| {
        let ingest = scope.spawn(|| -> io::Result<()> {
            let result = (|| {
                for line in input.lines() {
                    if stop.load(Ordering::Relaxed) {
                        break;
                    }
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<Frame>(&line) {
                        Ok(frame) => {
                            if let Some(w) = windower.push(frame, counters) {
                                queue.push(w, counters);
                            }
                        }
                        Err(e) => {
                            Counters::bump(&counters.frames_in);
                            Counters::bump(&counters.frames_invalid);
                            log::debug!("skipping malformed frame: {e}");
                        }
                    }
                }
                Ok(())
            })();
            queue.close();
            result
        });

        let mut classify = || -> Result<(), GatewayError> {
            while let Some(w) = queue.pop() {
                if let Some(alert) = detector.offer(&w, counters)? {
                    let line = serde_json::to_string(&alert).expect("alert serializes");
                    writeln!(output, "{line}")?;
                    output.flush()?;
                }
            }
            Ok(())
        };
        let outcome = classify();
        if outcome.is_err() {
            stop.store(true, Ordering::Relaxed);
            queue.close();
        }
        let ingested = ingest.join().expect("ingest thread panicked");
        outcome?;
        ingested?;
        Ok(counters.snapshot())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_validation() {
        assert!(WindowPolicy::default().validate().is_ok());
        let mut p = WindowPolicy::default();
        p.stride = 4.0;
        assert!(p.validate().is_err());
        p = WindowPolicy::default();
        p.debounce = -1.0;
        assert!(p.validate().is_err());
        p = WindowPolicy::default();
        p.stride = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn window_samples_round() {
        let p = WindowPolicy::default();
        assert_eq!(p.samples(50.0), (150, 25));
        let p = WindowPolicy {
            window: 3.02,
            ..WindowPolicy::default()
        };
        assert_eq!(p.samples(50.0), (151, 25));
    }

    #[test]
    fn drop_oldest_queue() {
        let c = Counters::default();
        let q = WindowQueue::new(2, Overflow::DropOldest);
        let w = |id| Window {
            id,
            start: 0.0,
            end: 0.0,
            ax: vec![],
            ay: vec![],
            az: vec![],
        };
        for id in 0..5 {
            q.push(w(id), &c);
        }
        q.close();
        assert_eq!(q.pop().map(|w| w.id), Some(3));
        assert_eq!(q.pop().map(|w| w.id), Some(4));
        assert_eq!(q.pop(), None);
        assert_eq!(c.snapshot().windows_dropped, 3);
    }
}
