use std::collections::VecDeque;

use thiserror::Error;

pub trait Timestamped {
    fn seq(&self) -> u32;
    fn t_send(&self) -> f64;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnqueueError {
    #[error("out-of-order enqueue: t_now {t_now} before previous {previous}")]
    OutOfOrder { t_now: f64, previous: f64 },
    #[error("invalid delay {0}")]
    InvalidDelay(f64),
}

// Absorbs rounding of tick-derived times (k·dt) against t + δ.
const TIME_EPS: f64 = 1e-9;

/// Constant-delay, latest-wins channel.
#[derive(Debug, Clone)]
pub struct DelayLine<P> {
    delta: f64,
    queue: VecDeque<(f64, P)>,
    last_enqueue: Option<f64>,
}

impl<P: Timestamped + Clone> DelayLine<P> {
    pub fn new(delta: f64) -> Result<Self, EnqueueError> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(EnqueueError::InvalidDelay(delta));
        }
        Ok(Self {
            delta,
            queue: VecDeque::new(),
            last_enqueue: None,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Change δ for packets enqueued from now on. Packets already in flight
    /// keep their release times.
    pub fn set_delta(&mut self, delta: f64) -> Result<(), EnqueueError> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(EnqueueError::InvalidDelay(delta));
        }
        self.delta = delta;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn clear(&mut self) {
        self.queue.clear();
        self.last_enqueue = None;
    }

    pub fn enqueue(&mut self, packet: P, t_now: f64) -> Result<(), EnqueueError> {
        if let Some(prev) = self.last_enqueue {
            if t_now < prev {
                return Err(EnqueueError::OutOfOrder { t_now, previous: prev });
            }
        }
        self.last_enqueue = Some(t_now);
        self.queue.push_back((t_now + self.delta, packet));
        Ok(())
    }

    /// Newest packet released by `t_now`; older released packets are dropped.
    pub fn poll_latest(&mut self, t_now: f64) -> Option<P> {
        let mut latest = None;
        while let Some((release, _)) = self.queue.front() {
            if *release <= t_now + TIME_EPS {
                latest = self.queue.pop_front().map(|(_, p)| p);
            } else {
                break;
            }
        }
        latest
    }
}
