//! Percentiles, percentile curves and cohort aggregates.
//!
//! Percentiles interpolate linearly between order statistics at position
//! (p/100)(n-1); samples are unweighted (one value per surface node).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("percentile rank {0} outside [0, 100]")]
    BadRank(f64),
    #[error("empty cohort")]
    EmptyCohort,
}

pub fn percentile(values: &[f64], p: f64) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(StatsError::BadRank(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64 / 100.0;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let t = pos - lo as f64;
    if t == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + t * (sorted[hi] - sorted[lo])
    }
}

/// Values at percentile ranks 0, 1, ..., 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PercentileCurve(Vec<f64>);

impl PercentileCurve {
    pub fn from_values(values: &[f64]) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptySample);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(PercentileCurve((0..=100).map(|k| percentile_sorted(&sorted, k as f64)).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn at(&self, rank: usize) -> f64 {
        self.0[rank]
    }

    pub fn p99(&self) -> f64 {
        self.0[99]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PercentileCurve(self.0.iter().map(|v| v * factor).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CurveComparison {
    pub max_abs_diff: f64,
    pub max_abs_diff_at_or_above95: f64,
    pub rel_diff_at99: f64,
}

pub fn compare_curves(c1: &PercentileCurve, c2: &PercentileCurve) -> CurveComparison {
    let diff = |k: usize| (c1.at(k) - c2.at(k)).abs();
    let max_over = |r: std::ops::RangeInclusive<usize>| r.map(diff).fold(0.0, f64::max);
    CurveComparison {
        max_abs_diff: max_over(0..=100),
        max_abs_diff_at_or_above95: max_over(95..=100),
        rel_diff_at99: diff(99) / c1.p99().abs().max(f64::EPSILON),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CohortCase {
    pub name: String,
    pub p99_mpa: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Aggregate {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample (n - 1) standard deviation; absent for a single case.
    pub std: Option<f64>,
}

impl Aggregate {
    fn of(values: &[f64]) -> Aggregate {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() > 1)
            .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Aggregate {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CohortSummary {
    pub cases: Vec<CohortCase>,
    pub p99_mpa: Aggregate,
    pub seconds: Aggregate,
}

pub fn cohort_summary(cases: &[CohortCase]) -> Result<CohortSummary, StatsError> {
    if cases.is_empty() {
        return Err(StatsError::EmptyCohort);
    }
    let p99: Vec<f64> = cases.iter().map(|c| c.p99_mpa).collect();
    let secs: Vec<f64> = cases.iter().map(|c| c.seconds).collect();
    Ok(CohortSummary {
        cases: cases.to_vec(),
        p99_mpa: Aggregate::of(&p99),
        seconds: Aggregate::of(&secs),
    })
}
