//! Breaking-news detection from trading gaps after the release.

use serde::{Deserialize, Serialize};

use crate::cross_event::NewsClass;
use crate::error::{finite, Error, Result};
use crate::sim::ObservedSeries;

/// Slack for comparing gaps rebuilt from nanosecond timestamps.
const GAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapRule {
    /// Minimum gap between consecutive trades, seconds, inclusive.
    pub threshold: f64,
    /// Gaps must start within this many seconds after the release.
    pub window: f64,
}

impl Default for GapRule {
    fn default() -> Self {
        Self {
            threshold: 4.99,
            window: 180.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakInfo {
    /// Seconds from the release to the start of the first qualifying gap.
    pub time_to_first_break: f64,
    /// Summed length of all qualifying gaps, seconds.
    pub total_stop_time: f64,
    pub breaks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: NewsClass,
    pub break_info: Option<BreakInfo>,
}

/// Scans the gaps between consecutive observations that start in
/// `[tau, tau + window]`.
pub fn classify_event(series: &ObservedSeries, tau: f64, rule: &GapRule) -> Result<Classification> {
    finite("tau", tau)?;
    if !(finite("threshold", rule.threshold)? > 0.0) || !(finite("window", rule.window)? >= 0.0) {
        return Err(Error::param("rule", "need a positive threshold and nonnegative window"));
    }
    let first = series.count_before(tau);
    if first >= series.n() {
        return Err(Error::InsufficientData(format!("no observations at or after tau = {tau}")));
    }
    let t = &series.times;
    let mut info: Option<BreakInfo> = None;
    for i in first..series.n().saturating_sub(1) {
        if t[i] > tau + rule.window {
            break;
        }
        let gap = t[i + 1] - t[i];
        if gap >= rule.threshold - GAP_TOL {
            let b = info.get_or_insert(BreakInfo {
                time_to_first_break: t[i] - tau,
                total_stop_time: 0.0,
                breaks: 0,
            });
            b.total_stop_time += gap;
            b.breaks += 1;
        }
    }
    Ok(Classification {
        class: if info.is_some() {
            NewsClass::Breaking
        } else {
            NewsClass::Regular
        },
        break_info: info,
    })
}
