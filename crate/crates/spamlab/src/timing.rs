//! Wall-clock timing of prediction passes.

use std::sync::Mutex;
use std::time::Instant;

use spamlab_core::eval::PredictionTimer;

/// Median of `repetitions` timed runs after one untimed warm-up run.
///
/// Measurements hold a process-wide lock so that concurrent folds never
/// time their predictions at the same moment.
pub struct MedianTimer {
    pub repetitions: usize,
}

static TIMING_LANE: Mutex<()> = Mutex::new(());

impl Default for MedianTimer {
    fn default() -> Self {
        MedianTimer { repetitions: 5 }
    }
}

impl PredictionTimer for MedianTimer {
    fn time(&self, work: &mut dyn FnMut()) -> Option<f64> {
        let _lane = TIMING_LANE.lock().unwrap_or_else(|e| e.into_inner());
        work();
        let mut samples: Vec<f64> = (0..self.repetitions.max(1))
            .map(|_| {
                let start = Instant::now();
                work();
                start.elapsed().as_secs_f64()
            })
            .collect();
        samples.sort_by(f64::total_cmp);
        Some(samples[samples.len() / 2].max(f64::MIN_POSITIVE))
    }
}
