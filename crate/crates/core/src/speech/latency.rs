use serde::Serialize;

use super::gateway::{UtteranceRecord, UtteranceStatus};
use crate::narrate::PlanKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no spoken narrations to report on")]
pub struct NoData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Complexity {
    Simple,
    Moderate,
    Complex,
}

impl Complexity {
    pub const ALL: [Complexity; 3] = [Complexity::Simple, Complexity::Moderate, Complexity::Complex];

    /// Simple: up to 2 frames. Moderate: 3 to 9. Complex: 10 or more.
    pub fn from_frames(frames: usize) -> Self {
        match frames {
            0..=2 => Complexity::Simple,
            3..=9 => Complexity::Moderate,
            _ => Complexity::Complex,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Complexity::Simple => "simple",
            Complexity::Moderate => "moderate",
            Complexity::Complex => "complex",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub median_s: Option<f64>,
    pub mean_s: Option<f64>,
    pub std_dev_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketStats {
    pub name: Complexity,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub buckets: Vec<BucketStats>,
    pub overall: Summary,
}

impl LatencyReport {
    pub fn bucket(&self, c: Complexity) -> &BucketStats {
        self.buckets.iter().find(|b| b.name == c).expect("all buckets present")
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

/// Population standard deviation alongside the mean.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

fn summarize(values: &[f64]) -> Summary {
    let ms = mean_std(values);
    Summary {
        count: values.len(),
        median_s: median(values),
        mean_s: ms.map(|m| m.0),
        std_dev_s: ms.map(|m| m.1),
    }
}

/// Voice latency (`started_at - captured_at`) of spoken narrations, bucketed by frame count.
pub fn latency_report(records: &[UtteranceRecord]) -> Result<LatencyReport, NoData> {
    let samples: Vec<(Complexity, f64)> = records
        .iter()
        .filter(|r| r.status == UtteranceStatus::Spoken && r.kind == PlanKind::Narration)
        .filter_map(|r| {
            let started = r.started_at?;
            let captured = r.captured_at?;
            let secs = (started - captured).num_milliseconds() as f64 / 1000.0;
            Some((Complexity::from_frames(r.frame_count), secs))
        })
        .collect();
    if samples.is_empty() {
        return Err(NoData);
    }
    let buckets = Complexity::ALL
        .iter()
        .map(|&c| {
            let v: Vec<f64> = samples.iter().filter(|s| s.0 == c).map(|s| s.1).collect();
            BucketStats {
                name: c,
                summary: summarize(&v),
            }
        })
        .collect();
    let all: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok(LatencyReport {
        buckets,
        overall: summarize(&all),
    })
}
