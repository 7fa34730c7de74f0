//! Event factor files, manifests and per-event windows.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::classify::{classify_event, BreakInfo, GapRule};
use super::ticks::{load_ticks, ticks_to_series, TickLoadOptions, TickRecord};
use crate::cross_event::NewsClass;
use crate::error::{Error, Result};
use crate::sim::{ObservedSeries, SeriesSource};

const NS: i64 = 1_000_000_000;

/// One row of the events file `event_id,release_ts_ns,surprise_pp,attention`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub event_id: String,
    pub release_ts_ns: i64,
    pub surprise_pp: f64,
    pub attention: f64,
}

pub fn read_events<R: Read>(reader: R, label: &str) -> Result<Vec<EventSpec>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let want = ["event_id", "release_ts_ns", "surprise_pp", "attention"];
    if headers.iter().ne(want.iter().copied()) {
        return Err(Error::Parse {
            path: label.into(),
            line: 1,
            reason: format!("expected header `{}`", want.join(",")),
        });
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.deserialize::<EventSpec>().enumerate() {
        let ev = rec.map_err(|e| Error::Parse {
            path: label.into(),
            line: e.position().map_or(k + 2, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        if !(ev.surprise_pp.is_finite() && ev.attention.is_finite()) {
            return Err(Error::Parse {
                path: label.into(),
                line: k + 2,
                reason: "factors must be finite".into(),
            });
        }
        if out.iter().any(|e: &EventSpec| e.event_id == ev.event_id) {
            return Err(Error::Parse {
                path: label.into(),
                line: k + 2,
                reason: format!("duplicate event_id `{}`", ev.event_id),
            });
        }
        out.push(ev);
    }
    Ok(out)
}

pub fn load_events(path: &Path) -> Result<Vec<EventSpec>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_events(BufReader::new(f), &path.display().to_string())
}

pub fn write_events<W: Write>(out: W, events: &[EventSpec]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in events {
        w.serialize(e)?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

/// Joins the events file to one tick file per event. Relative paths are
/// resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub events: PathBuf,
    pub ticks: BTreeMap<String, PathBuf>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_reader(BufReader::new(f))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((m, base))
    }
}

/// Window and detection settings for building event records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Seconds kept on each side of the release.
    pub half_window: f64,
    pub gap_rule: GapRule,
    pub ticks: TickLoadOptions,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            half_window: 5400.0,
            gap_rule: GapRule::default(),
            ticks: TickLoadOptions::default(),
        }
    }
}

/// An event with its observed window. Series times are seconds after
/// `release_ts_ns - half_window`, so the release sits at `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_id: String,
    pub release_ts_ns: i64,
    pub surprise: f64,
    pub attention: f64,
    pub tau: f64,
    pub series: ObservedSeries,
    pub class: NewsClass,
    pub break_info: Option<BreakInfo>,
}

impl EventRecord {
    pub fn raw_factors(&self) -> Vec<f64> {
        vec![self.surprise, self.attention]
    }
}

/// Cuts the event window out of `ticks` and classifies it.
pub fn build_event(
    spec: &EventSpec,
    ticks: &[TickRecord],
    source: SeriesSource,
    cfg: &WindowConfig,
) -> Result<EventRecord> {
    let half = (cfg.half_window * NS as f64).round() as i64;
    let origin = spec.release_ts_ns - half;
    let series = ticks_to_series(ticks, origin, origin, spec.release_ts_ns + half, source)?;
    let tau = cfg.half_window;
    if series.count_before(tau) == 0 {
        return Err(Error::InsufficientData(format!(
            "event {} has no observations before the release",
            spec.event_id
        )));
    }
    let c = classify_event(&series, tau, &cfg.gap_rule)?;
    Ok(EventRecord {
        event_id: spec.event_id.clone(),
        release_ts_ns: spec.release_ts_ns,
        surprise: spec.surprise_pp,
        attention: spec.attention,
        tau,
        series,
        class: c.class,
        break_info: c.break_info,
    })
}

/// An event that could not be built, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedEvent {
    pub event_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub events: Vec<EventRecord>,
    pub skipped: Vec<SkippedEvent>,
}

/// Loads every event of a manifest. Events whose windows cannot be built are
/// recorded in `skipped`; unreadable files are errors.
pub fn load_sample(manifest: &Path, cfg: &WindowConfig) -> Result<Sample> {
    let (m, base) = Manifest::load(manifest)?;
    let specs = load_events(&base.join(&m.events))?;
    let mut events = Vec::new();
    let mut skipped = Vec::new();
    for spec in &specs {
        let Some(rel) = m.ticks.get(&spec.event_id) else {
            return Err(Error::InsufficientData(format!(
                "manifest has no tick file for event {}",
                spec.event_id
            )));
        };
        let path = base.join(rel);
        let ticks = load_ticks(&path, &cfg.ticks)?;
        let source = SeriesSource::TickFile {
            path: rel.display().to_string(),
        };
        match build_event(spec, &ticks, source, cfg) {
            Ok(e) => events.push(e),
            Err(e) => skipped.push(SkippedEvent {
                event_id: spec.event_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    Ok(Sample { events, skipped })
}
