//! Per-class summaries of trading intensity, event returns and volatility shifts.

use serde::{Deserialize, Serialize};

use super::events::EventRecord;
use crate::cross_event::NewsClass;
use crate::error::{Error, Result};
use crate::estimators::{event_return, vol_bounds, PreAvgConfig};
use crate::stats::{mad, mean, quantile_sorted};

/// Seconds after the release over which trading intensity and the event
/// return are measured.
pub const FIRST_MINUTE: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    /// Median absolute deviation from the median, unscaled.
    pub mad: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("empty sample".into()));
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Ok(Self {
            count: s.len(),
            median: quantile_sorted(&s, 0.5),
            q25: quantile_sorted(&s, 0.25),
            q75: quantile_sorted(&s, 0.75),
            mad: mad(&s),
            min: s[0],
            max: s[s.len() - 1],
        })
    }
}

/// Statistics of one event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventStats {
    /// Observations per second over the first minute after the release.
    pub trades_per_second: f64,
    /// Absolute one-minute pre-average event return.
    pub abs_return: f64,
    /// Square root of the ratio of mean window variance after the first
    /// minute to mean window variance before the release.
    pub vol_shift: f64,
}

pub fn event_stats(e: &EventRecord, cfg: &PreAvgConfig) -> Result<EventStats> {
    let s = &e.series;
    let trades = s.count_before(e.tau + FIRST_MINUTE) - s.count_before(e.tau);
    let ret = event_return(s, e.tau, FIRST_MINUTE, cfg)?;
    let b = vol_bounds(s, e.tau, e.tau + FIRST_MINUTE, FIRST_MINUTE, cfg)?;
    Ok(EventStats {
        trades_per_second: trades as f64 / FIRST_MINUTE,
        abs_return: ret.value.abs(),
        vol_shift: (mean(&b.iv30_post) / mean(&b.iv30_pre)).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: NewsClass,
    pub events: usize,
    pub trades_per_second: Summary,
    pub abs_return: Summary,
    pub vol_shift: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub classes: Vec<ClassSummary>,
    /// Classes without usable events.
    pub omitted: Vec<NewsClass>,
    /// Events whose statistics could not be computed, with the reason.
    pub skipped: Vec<(String, String)>,
}

pub fn descriptives(events: &[EventRecord], cfg: &PreAvgConfig) -> Descriptives {
    let mut classes = Vec::new();
    let mut omitted = Vec::new();
    let mut skipped = Vec::new();
    for class in [NewsClass::Regular, NewsClass::Breaking] {
        let mut stats = Vec::new();
        for e in events.iter().filter(|e| e.class == class) {
            match event_stats(e, cfg) {
                Ok(s) => stats.push(s),
                Err(err) => skipped.push((e.event_id.clone(), err.to_string())),
            }
        }
        let col = |f: fn(&EventStats) -> f64| stats.iter().map(f).collect::<Vec<_>>();
        match (
            Summary::of(&col(|s| s.trades_per_second)),
            Summary::of(&col(|s| s.abs_return)),
            Summary::of(&col(|s| s.vol_shift)),
        ) {
            (Ok(t), Ok(r), Ok(v)) => classes.push(ClassSummary {
                class,
                events: stats.len(),
                trades_per_second: t,
                abs_return: r,
                vol_shift: v,
            }),
            _ => {
                log::warn!("no usable {class} events; class omitted from descriptives");
                omitted.push(class);
            }
        }
    }
    Descriptives {
        classes,
        omitted,
        skipped,
    }
}
