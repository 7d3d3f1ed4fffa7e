use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::counters::Counters;

/// One accelerometer sample on the wire: `{"t":<ms>,"ax":..,"ay":..,"az":..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Timestamp in milliseconds.
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl Frame {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.ax.is_finite() && self.ay.is_finite() && self.az.is_finite()
    }
}

/// A complete window of consecutive accepted frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Sequence number of the window since the stream started.
    pub id: u64,
    /// Timestamp of the first frame, ms.
    pub start: f64,
    /// Timestamp of the last frame, ms.
    pub end: f64,
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    pub az: Vec<f64>,
}

/// Cuts an ordered frame stream into overlapping windows of `len` samples,
/// one every `stride` samples. Incomplete tail windows are never emitted.
///
/// Frames older than the previous one are dropped. A gap between accepted
/// frames longer than `max_gap_ms` empties the buffer, so no window ever
/// spans the gap.
#[derive(Debug)]
pub struct Windower {
    len: usize,
    stride: usize,
    max_gap_ms: f64,
    buf: VecDeque<Frame>,
    until_next: usize,
    last_t: Option<f64>,
    next_id: u64,
}

impl Windower {
    pub fn new(len: usize, stride: usize, max_gap_ms: f64) -> Self {
        assert!(
            len > 0 && stride > 0 && stride <= len,
            "need 0 < stride <= len"
        );
        Windower {
            len,
            stride,
            max_gap_ms,
            buf: VecDeque::with_capacity(len),
            until_next: len,
            last_t: None,
            next_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Frames currently held toward the next window.
    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    fn reset(&mut self) {
        self.buf.clear();
        self.until_next = self.len;
    }

    /// Feeds one frame; returns a window when this frame completes one.
    pub fn push(&mut self, frame: Frame, counters: &Counters) -> Option<Window> {
        Counters::bump(&counters.frames_in);
        if !frame.is_finite() {
            Counters::bump(&counters.frames_invalid);
            return None;
        }
        if let Some(last) = self.last_t {
            if frame.t < last {
                Counters::bump(&counters.frames_out_of_order);
                return None;
            }
            if frame.t - last > self.max_gap_ms {
                Counters::bump(&counters.buffer_resets);
                self.reset();
            }
        }
        Counters::bump(&counters.frames_accepted);
        self.last_t = Some(frame.t);
        if self.buf.len() == self.len {
            self.buf.pop_front();
        }
        self.buf.push_back(frame);
        self.until_next -= 1;
        if self.until_next > 0 {
            return None;
        }
        self.until_next = self.stride;
        let id = self.next_id;
        self.next_id += 1;
        Counters::bump(&counters.windows_emitted);
        Some(Window {
            id,
            start: self.buf.front().map_or(frame.t, |f| f.t),
            end: frame.t,
            ax: self.buf.iter().map(|f| f.ax).collect(),
            ay: self.buf.iter().map(|f| f.ay).collect(),
            az: self.buf.iter().map(|f| f.az).collect(),
        })
    }
}
