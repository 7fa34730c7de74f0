//! Synthetic event samples with known jumps, written in the tick-file layout.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::events::{build_event, EventRecord, EventSpec, Manifest, WindowConfig};
use super::ticks::{write_ticks, TickRecord};
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::sim::{
    observe_with, simulate_efficient_path_with, EventDesign, HestonParams, JumpSpec, NoiseSpec,
    SeriesSource, TransitionSpec,
};

const NS: i64 = 1_000_000_000;
const SAMPLE_CELL: u32 = 3;

/// Generating law of a synthetic sample. Jumps are
/// `b_surprise * s + b_interaction * s * (a - 50) / 30` for surprise `s` and attention `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticDesign {
    pub regular: usize,
    pub breaking: usize,
    /// Breaking events whose price settles away from the efficient level.
    pub overshooting: usize,
    /// Terminal deviation as a fraction of the mean absolute Breaking jump.
    pub overshoot_fraction: f64,
    pub heston: HestonParams,
    /// Variance jump and transition law; `tau` is ignored.
    pub event: EventDesign,
    pub noise: NoiseSpec,
    pub n: usize,
    /// Seconds, centered on the release.
    pub window: f64,
    pub surprise_sd_regular: f64,
    pub surprise_sd_breaking: f64,
    pub attention_low: f64,
    pub attention_high: f64,
    pub b_surprise: f64,
    pub b_interaction: f64,
    /// Start of the trading gap after the release, uniform bounds, seconds.
    pub gap_offset: (f64, f64),
    /// Gap length, uniform bounds, seconds.
    pub gap_length: (f64, f64),
    pub first_release_ns: i64,
    pub release_spacing_days: i64,
    pub price_level: f64,
    pub seed: u64,
}

impl Default for SyntheticDesign {
    fn default() -> Self {
        Self {
            regular: 55,
            breaking: 14,
            overshooting: 7,
            overshoot_fraction: 0.25,
            heston: HestonParams::default(),
            event: EventDesign {
                vol_scale_low: 1.0,
                vol_scale_high: 4.0,
                ..EventDesign::default()
            },
            noise: NoiseSpec { q: 0.00004 },
            n: 21_600,
            window: 10_800.0,
            surprise_sd_regular: 0.1,
            surprise_sd_breaking: 0.3,
            attention_low: 20.0,
            attention_high: 80.0,
            b_surprise: 0.2,
            b_interaction: 0.04,
            gap_offset: (0.5, 2.0),
            gap_length: (5.0, 20.0),
            // 2020-01-14 13:30 UTC
            first_release_ns: 1_579_008_600 * NS,
            release_spacing_days: 30,
            price_level: 4000.0,
            seed: 20_200_114,
        }
    }
}

/// What generated one synthetic event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub event_id: String,
    pub breaking: bool,
    pub jump: f64,
    pub terminal_dev: f64,
    pub gap_start: Option<f64>,
    pub gap_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEvent {
    pub spec: EventSpec,
    pub ticks: Vec<TickRecord>,
    pub truth: SyntheticTruth,
}

impl SyntheticDesign {
    pub fn validate(&self) -> Result<()> {
        self.heston.validate()?;
        self.event.validate()?;
        self.noise.validate()?;
        if self.overshooting > self.breaking {
            return Err(Error::param("overshooting", "cannot exceed the Breaking count"));
        }
        if self.n < 100 || !(self.window > 0.0) {
            return Err(Error::param("n", "need n >= 100 and a positive window"));
        }
        if !(self.surprise_sd_regular > 0.0 && self.surprise_sd_breaking > 0.0) {
            return Err(Error::param("surprise_sd", "must be > 0"));
        }
        if !(self.attention_low < self.attention_high) {
            return Err(Error::param("attention_low", "must be below attention_high"));
        }
        if !(self.gap_offset.0 > 0.0
            && self.gap_offset.0 <= self.gap_offset.1
            && self.gap_length.0 > 0.0
            && self.gap_length.0 <= self.gap_length.1)
        {
            return Err(Error::param("gap", "need positive, ordered bounds"));
        }
        if !(self.price_level > 0.0) {
            return Err(Error::param("price_level", "must be > 0"));
        }
        Ok(())
    }

    fn jump(&self, s: f64, a: f64) -> f64 {
        self.b_surprise * s + self.b_interaction * s * (a - 50.0) / 30.0
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        Uniform::new(lo, hi).expect("ordered bounds").sample(rng)
    } else {
        lo
    }
}

/// Draws the sample: Regular events first, then Breaking events, the first
/// `overshooting` of which deviate at termination.
pub fn generate(design: &SyntheticDesign) -> Result<Vec<SyntheticEvent>> {
    design.validate()?;
    let total = design.regular + design.breaking;
    let tau = design.window / 2.0;

    struct Draw {
        s: f64,
        a: f64,
        jump: JumpSpec,
    }
    let mut draws = Vec::with_capacity(total);
    for k in 0..total {
        let mut rng = StreamKey::new(design.seed, SAMPLE_CELL, k as u64, 0).rng();
        let sd = if k < design.regular {
            design.surprise_sd_regular
        } else {
            design.surprise_sd_breaking
        };
        let s = Normal::new(0.0, sd).expect("validated sd").sample(&mut rng);
        let a = uniform(&mut rng, (design.attention_low, design.attention_high));
        let scale = uniform(&mut rng, (design.event.vol_scale_low, design.event.vol_scale_high));
        let jump = JumpSpec {
            tau,
            jump_size: design.jump(s, a),
            vol_jump: scale * design.heston.theta,
            vol_jump_decay: design.event.vol_jump_decay,
            vol_jump_scale: scale,
        };
        draws.push(Draw { s, a, jump });
    }
    let breaking_abs: Vec<f64> = draws[design.regular..]
        .iter()
        .map(|d| d.jump.jump_size.abs())
        .collect();
    let mean_abs = if breaking_abs.is_empty() {
        0.0
    } else {
        breaking_abs.iter().sum::<f64>() / breaking_abs.len() as f64
    };

    let mut out = Vec::with_capacity(total);
    for (k, d) in draws.iter().enumerate() {
        let breaking = k >= design.regular;
        let over = breaking && k - design.regular < design.overshooting;
        let sign = if d.jump.jump_size < 0.0 { -1.0 } else { 1.0 };
        let terminal_dev = if over {
            sign * design.overshoot_fraction * mean_abs
        } else {
            0.0
        };
        let trans = TransitionSpec {
            eta: design.event.eta,
            theta_pn: design.event.theta_pn,
            tau_bar: tau + design.event.transition_seconds,
            terminal_dev,
        };
        let mut rng = StreamKey::new(design.seed, SAMPLE_CELL, k as u64, 1).rng();
        let path = simulate_efficient_path_with(&design.heston, &d.jump, design.n, design.window, &mut rng)?;
        let series = observe_with(&path, &d.jump, &trans, &design.noise, &mut rng)?;

        let release_ns = design.first_release_ns + k as i64 * design.release_spacing_days * 86_400 * NS;
        let origin = release_ns - (tau * NS as f64).round() as i64;
        let level = design.price_level.ln();
        let mut ticks: Vec<TickRecord> = series
            .times
            .iter()
            .zip(&series.y)
            .map(|(&t, &y)| {
                let log_price = level + y;
                TickRecord {
                    ts_ns: origin + (t * NS as f64).round() as i64,
                    price: log_price.exp(),
                    log_price,
                    trades: 1,
                }
            })
            .collect();
        let (mut gap_start, mut gap_len) = (None, None);
        if breaking {
            let offset = uniform(&mut rng, design.gap_offset);
            let length = uniform(&mut rng, design.gap_length);
            let start = release_ns + (offset * NS as f64).round() as i64;
            let end = start + (length * NS as f64).round() as i64;
            let inside: Vec<TickRecord> = ticks
                .iter()
                .filter(|t| t.ts_ns >= start && t.ts_ns <= end)
                .copied()
                .collect();
            if let (Some(first), Some(last)) = (inside.first(), inside.last()) {
                ticks.retain(|t| t.ts_ns < start || t.ts_ns > end);
                let at = ticks.partition_point(|t| t.ts_ns < start);
                ticks.insert(at, TickRecord { ts_ns: start, ..*first });
                ticks.insert(at + 1, TickRecord { ts_ns: end, ..*last });
            }
            gap_start = Some(offset);
            gap_len = Some(length);
        }
        // round-trip through the file representation
        for t in &mut ticks {
            let p: f64 = format!("{:.10}", t.price).parse().expect("formatted float");
            t.price = p;
            t.log_price = p.ln();
        }
        let event_id = format!("E{:03}", k + 1);
        out.push(SyntheticEvent {
            spec: EventSpec {
                event_id: event_id.clone(),
                release_ts_ns: release_ns,
                surprise_pp: d.s,
                attention: d.a,
            },
            ticks,
            truth: SyntheticTruth {
                event_id,
                breaking,
                jump: d.jump.jump_size,
                terminal_dev,
                gap_start,
                gap_length: gap_len,
            },
        });
    }
    Ok(out)
}

/// Builds event records the same way file input would.
pub fn to_records(sample: &[SyntheticEvent], cfg: &WindowConfig) -> Result<Vec<EventRecord>> {
    sample
        .iter()
        .map(|e| {
            build_event(
                &e.spec,
                &e.ticks,
                SeriesSource::Synthetic {
                    label: e.spec.event_id.clone(),
                },
                cfg,
            )
        })
        .collect()
}

/// Writes `events.csv`, `ticks/<id>.csv`, `truth.json` and `manifest.json`
/// into `dir`; returns the manifest path.
pub fn write_sample(dir: &Path, sample: &[SyntheticEvent]) -> Result<PathBuf> {
    let tick_dir = dir.join("ticks");
    fs::create_dir_all(&tick_dir).map_err(|e| Error::io(&tick_dir, e))?;
    let mut ticks = BTreeMap::new();
    for e in sample {
        let rel = PathBuf::from("ticks").join(format!("{}.csv", e.spec.event_id));
        let path = dir.join(&rel);
        let f = File::create(&path).map_err(|err| Error::io(&path, err))?;
        write_ticks(BufWriter::new(f), &e.ticks)?;
        ticks.insert(e.spec.event_id.clone(), rel);
    }
    let events_path = dir.join("events.csv");
    let f = File::create(&events_path).map_err(|e| Error::io(&events_path, e))?;
    let specs: Vec<EventSpec> = sample.iter().map(|e| e.spec.clone()).collect();
    super::events::write_events(BufWriter::new(f), &specs)?;

    let truth_path = dir.join("truth.json");
    let truth: Vec<&SyntheticTruth> = sample.iter().map(|e| &e.truth).collect();
    fs::write(&truth_path, serde_json::to_string_pretty(&truth)? + "\n")
        .map_err(|e| Error::io(&truth_path, e))?;

    let manifest = Manifest {
        events: PathBuf::from("events.csv"),
        ticks,
    };
    let manifest_path = dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")
        .map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}
