use serde::{Deserialize, Serialize};

use super::{Frame, MonitorError};

/// `base` frames, plus `per_minute` for every full minute past the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub base: usize,
    pub threshold_secs: f64,
    pub per_minute: usize,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy {
            base: 10,
            threshold_secs: 300.0,
            per_minute: 2,
        }
    }
}

impl SamplingPolicy {
    pub fn frame_count(&self, duration: f64) -> Result<usize, MonitorError> {
        if !duration.is_finite() || duration <= 0.0 {
            return Err(MonitorError::BadDuration(duration));
        }
        let extra_minutes = ((duration - self.threshold_secs) / 60.0).floor().max(0.0) as usize;
        Ok(self.base + self.per_minute * extra_minutes)
    }
}

/// Evenly spaced selection by timestamp, always keeping the first and last
/// frame. Each target time takes the nearest frame not yet used; indexes
/// strictly increase.
pub fn sample_frames(frames: &[Frame], duration: f64, policy: &SamplingPolicy) -> Result<Vec<Frame>, MonitorError> {
    let n = policy.frame_count(duration)?;
    Ok(select_indexes(frames, n)?.into_iter().map(|i| frames[i].clone()).collect())
}

pub(crate) fn select_indexes(frames: &[Frame], n: usize) -> Result<Vec<usize>, MonitorError> {
    if frames.is_empty() {
        return Err(MonitorError::NoFrames);
    }
    let len = frames.len();
    if n >= len {
        return Ok((0..len).collect());
    }
    if n <= 1 {
        return Ok(vec![0]);
    }
    let t0 = frames[0].timestamp;
    let t1 = frames[len - 1].timestamp;
    let mut picked = Vec::with_capacity(n);
    let mut next_free = 0;
    for k in 0..n {
        let lo = next_free;
        let hi = len - (n - k);
        let idx = if k == 0 {
            0
        } else if k == n - 1 {
            len - 1
        } else {
            let target = t0 + (t1 - t0) * k as f64 / (n - 1) as f64;
            (lo..=hi)
                .min_by(|&a, &b| {
                    let da = (frames[a].timestamp - target).abs();
                    let db = (frames[b].timestamp - target).abs();
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .expect("non-empty range")
        };
        picked.push(idx);
        next_free = idx + 1;
    }
    Ok(picked)
}
