use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Detects when a moving average of the objective stops improving.
///
/// Once `window` values have been seen, the average of the most recent
/// `window` values is compared against the best average so far. An average
/// counts as an improvement when it beats the best by `min_improvement`
/// relative to the best's magnitude. After `patience` observations without
/// improvement the scheduler fires once and stays fired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    window: usize,
    min_improvement: f64,
    patience: usize,
    recent: VecDeque<f64>,
    best: Option<f64>,
    since_best: usize,
    fired: bool,
}

impl Plateau {
    pub fn new(window: usize, min_improvement: f64, patience: usize) -> Self {
        Self {
            window: window.max(1),
            min_improvement,
            patience,
            recent: VecDeque::with_capacity(window),
            best: None,
            since_best: 0,
            fired: false,
        }
    }

    /// Records one value; returns `true` on the observation that fires.
    pub fn observe(&mut self, value: f64) -> bool {
        self.recent.push_back(value);
        if self.recent.len() > self.window {
            self.recent.pop_front();
        }
        let Some(avg) = self.average() else {
            return false;
        };
        match self.best {
            Some(best) if avg >= best - self.min_improvement * best.abs() => self.since_best += 1,
            _ => {
                self.best = Some(avg);
                self.since_best = 0;
            }
        }
        if !self.fired && self.since_best >= self.patience {
            self.fired = true;
            return true;
        }
        false
    }

    /// Mean of the last `window` values, once that many have been seen.
    pub fn average(&self) -> Option<f64> {
        (self.recent.len() == self.window).then(|| self.recent.iter().sum::<f64>() / self.window as f64)
    }

    pub fn fired(&self) -> bool {
        self.fired
    }
}
