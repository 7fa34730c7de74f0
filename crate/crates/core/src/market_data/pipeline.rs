//! Leave-one-out feasible tests across an event sample.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::events::EventRecord;
use crate::cross_event::{
    build_factors, fit, leave_one_out_plan, predict_raw, FactorSpec, JumpRegressionFit, NewsClass,
};
use crate::error::{Error, Result};
use crate::estimators::{event_return, vol_bounds, PreAvgConfig};
use crate::inference::{test_event, CriticalValueInputs, TestMode, TestOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub deltas: Vec<f64>,
    pub alpha: f64,
    pub preavg: PreAvgConfig,
    pub factors: FactorSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            deltas: vec![20.0, 30.0, 40.0, 60.0, 120.0, 300.0, 600.0],
            alpha: 0.01,
            preavg: PreAvgConfig::default(),
            factors: FactorSpec::surprise_attention(),
        }
    }
}

/// Outcome of one event at one window: tested or skipped with a reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTestRecord {
    pub event_id: String,
    pub class: NewsClass,
    pub delta: f64,
    pub outcome: Option<TestOutcome>,
    pub skipped: Option<String>,
}

impl EventTestRecord {
    pub fn rejected(&self) -> bool {
        self.outcome.is_some_and(|o| o.reject)
    }
}

/// Counts for one class and window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAggregate {
    pub class: NewsClass,
    pub delta: f64,
    pub events: usize,
    pub tested: usize,
    pub rejected: usize,
    pub skipped: usize,
    pub overshooting: usize,
    /// Percent of tested events rejected.
    pub rejection_pct: f64,
    /// Percent of rejected events that overshoot.
    pub overshoot_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTestReport {
    pub config: PipelineConfig,
    pub records: Vec<EventTestRecord>,
    pub aggregates: Vec<ClassAggregate>,
}

impl EventTestReport {
    pub fn aggregate(&self, class: NewsClass, delta: f64) -> Option<&ClassAggregate> {
        self.aggregates
            .iter()
            .find(|a| a.class == class && a.delta == delta)
    }
}

/// Regression of event returns on the factors of the `training` events.
pub fn fit_events(
    events: &[EventRecord],
    training: &[usize],
    returns: &[f64],
    spec: &FactorSpec,
) -> Result<JumpRegressionFit> {
    let raw: Vec<Vec<f64>> = training.iter().map(|&i| events[i].raw_factors()).collect();
    let y: Vec<f64> = training.iter().map(|&i| returns[i]).collect();
    fit(&y, &build_factors(&raw, spec)?)
}

/// Fits the regression on all Regular events at each window.
pub fn fit_regular(events: &[EventRecord], cfg: &PipelineConfig) -> Result<Vec<(f64, JumpRegressionFit)>> {
    cfg.deltas
        .iter()
        .map(|&delta| {
            let mut training = Vec::new();
            let mut returns = vec![f64::NAN; events.len()];
            for (i, e) in events.iter().enumerate() {
                if e.class != NewsClass::Regular {
                    continue;
                }
                if let Ok(r) = event_return(&e.series, e.tau, delta, &cfg.preavg) {
                    returns[i] = r.value;
                    training.push(i);
                }
            }
            Ok((delta, fit_events(events, &training, &returns, &cfg.factors)?))
        })
        .collect()
}

fn test_one(
    events: &[EventRecord],
    classes: &[NewsClass],
    returns: &[Option<f64>],
    tested: usize,
    delta: f64,
    cfg: &PipelineConfig,
) -> Result<TestOutcome> {
    let e = &events[tested];
    let ret = event_return(&e.series, e.tau, delta, &cfg.preavg)?.value;
    let mut plan = leave_one_out_plan(classes, tested, cfg.factors.k(), delta, cfg.preavg)?;
    plan.training.retain(|&i| returns[i].is_some());
    if plan.training.len() < cfg.factors.k() + 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable training events",
            plan.training.len()
        )));
    }
    let y: Vec<f64> = returns.iter().map(|r| r.unwrap_or(f64::NAN)).collect();
    let f = fit_events(events, &plan.training, &y, &cfg.factors)?;
    let pred = predict_raw(&f, &e.raw_factors())?;
    let bounds = vol_bounds(&e.series, e.tau, e.tau + delta, delta, &cfg.preavg)?;
    let inputs = CriticalValueInputs::from_bounds(cfg.alpha, delta, &bounds).with_regression(
        plan.training.len(),
        f.c_e,
        pred.f_l1,
    );
    test_event(ret, pred.value, &inputs, TestMode::Feasible)
}

/// Tests every event at every window against a regression fit on the other
/// Regular events. Events failing a precondition are kept as skipped records.
pub fn run_event_tests(events: &[EventRecord], cfg: &PipelineConfig) -> Result<EventTestReport> {
    if cfg.deltas.is_empty() {
        return Err(Error::param("deltas", "need at least one window"));
    }
    let regular = events.iter().filter(|e| e.class == NewsClass::Regular).count();
    if regular < cfg.factors.k() + 2 {
        return Err(Error::InsufficientData(format!(
            "{regular} Regular events for {} regressors",
            cfg.factors.k()
        )));
    }
    let classes: Vec<NewsClass> = events.iter().map(|e| e.class).collect();
    let mut records = Vec::with_capacity(events.len() * cfg.deltas.len());
    for &delta in &cfg.deltas {
        let returns: Vec<Option<f64>> = events
            .iter()
            .map(|e| event_return(&e.series, e.tau, delta, &cfg.preavg).ok().map(|r| r.value))
            .collect();
        let batch: Vec<EventTestRecord> = (0..events.len())
            .into_par_iter()
            .map(|i| {
                let (outcome, skipped) = match test_one(events, &classes, &returns, i, delta, cfg) {
                    Ok(o) => (Some(o), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                EventTestRecord {
                    event_id: events[i].event_id.clone(),
                    class: events[i].class,
                    delta,
                    outcome,
                    skipped,
                }
            })
            .collect();
        records.extend(batch);
    }
    let aggregates = aggregate(&records, &cfg.deltas);
    Ok(EventTestReport {
        config: cfg.clone(),
        records,
        aggregates,
    })
}

fn aggregate(records: &[EventTestRecord], deltas: &[f64]) -> Vec<ClassAggregate> {
    let mut out = Vec::new();
    for class in [NewsClass::Regular, NewsClass::Breaking] {
        for &delta in deltas {
            let rs: Vec<&EventTestRecord> = records
                .iter()
                .filter(|r| r.class == class && r.delta == delta)
                .collect();
            let tested = rs.iter().filter(|r| r.outcome.is_some()).count();
            let rejected = rs.iter().filter(|r| r.rejected()).count();
            let overshooting = rs
                .iter()
                .filter(|r| r.outcome.is_some_and(|o| o.overshoot == Some(true)))
                .count();
            let pct = |a: usize, b: usize| if b > 0 { 100.0 * a as f64 / b as f64 } else { 0.0 };
            out.push(ClassAggregate {
                class,
                delta,
                events: rs.len(),
                tested,
                rejected,
                skipped: rs.len() - tested,
                overshooting,
                rejection_pct: pct(rejected, tested),
                overshoot_pct: pct(overshooting, rejected),
            });
        }
    }
    out
}

/// `class,delta,events,tested,rejected,skipped,rejection_pct,overshoot_pct`.
pub fn write_aggregates<W: Write>(out: W, report: &EventTestReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "class", "delta", "events", "tested", "rejected", "skipped", "rejection_pct", "overshoot_pct",
    ])?;
    for a in &report.aggregates {
        w.write_record([
            a.class.to_string(),
            format!("{}", a.delta),
            a.events.to_string(),
            a.tested.to_string(),
            a.rejected.to_string(),
            a.skipped.to_string(),
            format!("{:.2}", a.rejection_pct),
            format!("{:.2}", a.overshoot_pct),
        ])?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

/// Jump estimate against event return with the per-event critical value.
pub fn write_scatter<W: Write>(out: W, report: &EventTestReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "event_id", "class", "delta", "jump_estimate", "event_return", "kappa_star", "reject", "overshoot",
    ])?;
    for r in &report.records {
        let Some(o) = r.outcome else { continue };
        w.write_record([
            r.event_id.clone(),
            r.class.to_string(),
            format!("{}", r.delta),
            format!("{:e}", o.jump_estimate),
            format!("{:e}", o.event_return),
            format!("{:e}", o.critical),
            o.reject.to_string(),
            o.overshoot.map_or(String::new(), |b| b.to_string()),
        ])?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}
