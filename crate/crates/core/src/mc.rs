//! Monte Carlo studies of the jump estimators and of the feasible test.
//!
//! Every replication owns a set of random streams addressed by
//! `(master seed, study, replication, event)`; replications run in parallel
//! and are merged in replication order, so results do not depend on the
//! number of worker threads.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cross_event::{build_factors, fit, predict_jump, FactorSpec};
use crate::error::{Error, Result};
use crate::estimators::{event_return, vol_bounds, PreAvgConfig};
use crate::inference::{test_event, CriticalValueInputs, TestMode};
use crate::rng::StreamKey;
use crate::sim::{
    observe_with, simulate_efficient_path_with, EfficientPath, EventDesign, HestonParams,
    JumpSpec, NoiseSpec, ObservedSeries,
};
use crate::stats::{mean, sample_sd};

const JUMP_ERROR_CELL: u32 = 1;
const SIZE_POWER_CELL: u32 = 2;

/// Full configuration of a simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McDesign {
    pub rounds: usize,
    /// Observations per window.
    pub n: usize,
    /// Window length, seconds.
    pub window: f64,
    pub heston: HestonParams,
    pub event: EventDesign,
    pub noise: NoiseSpec,
    pub preavg: PreAvgConfig,
    /// Event-return windows, seconds.
    pub deltas: Vec<f64>,
    /// Training-set sizes of the regression estimator.
    pub n_events: Vec<usize>,
    /// Training-set size of the feasible test.
    pub test_events: usize,
    pub alpha: f64,
    /// Terminal deviations as fractions of the mean absolute jump.
    pub terminal_dev_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for McDesign {
    fn default() -> Self {
        Self {
            rounds: 2000,
            n: 21_600,
            window: 3.0 * 3600.0,
            heston: HestonParams::default(),
            event: EventDesign::default(),
            noise: NoiseSpec { q: 0.00004 },
            preavg: PreAvgConfig {
                block_seconds: 5.0,
                ..PreAvgConfig::default()
            },
            deltas: vec![20.0, 30.0, 40.0, 60.0, 120.0, 300.0, 600.0],
            n_events: vec![10, 50],
            test_events: 50,
            alpha: 0.01,
            terminal_dev_grid: linspace(0.0, 0.43, 12),
            seed: 20_240_710,
        }
    }
}

/// `count` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

impl McDesign {
    pub fn validate(&self) -> Result<()> {
        self.heston.validate()?;
        self.event.validate()?;
        self.noise.validate()?;
        self.preavg.validate()?;
        if self.rounds == 0 {
            return Err(Error::param("rounds", "must be >= 1"));
        }
        if self.n < 2 || !(self.window > 0.0) {
            return Err(Error::param("n", "need n >= 2 and a positive window"));
        }
        if self.event.tau <= 0.0 || self.event.tau + self.event.transition_seconds >= self.window {
            return Err(Error::param("event.tau", "release and transition must fit in the window"));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::param("deltas", "need a nonempty grid of nonnegative windows"));
        }
        if self.n_events.is_empty() || self.n_events.iter().any(|&k| k < 3) {
            return Err(Error::param("n_events", "need a nonempty grid of sizes >= 3"));
        }
        if self.test_events < 3 {
            return Err(Error::param("test_events", "must be >= 3"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", "must lie in (0, 1)"));
        }
        if self.terminal_dev_grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::param("terminal_dev_grid", "must be finite"));
        }
        Ok(())
    }

    fn path(&self, key: StreamKey) -> Result<(f64, JumpSpec, EfficientPath)> {
        let mut rng = key.rng();
        let draw = self.event.sample(&self.heston, 0.0, &mut rng);
        let path = simulate_efficient_path_with(&self.heston, &draw.jump, self.n, self.window, &mut rng)?;
        Ok((draw.factor, draw.jump, path))
    }

    fn observe(
        &self,
        key: StreamKey,
        jump: &JumpSpec,
        path: &EfficientPath,
        terminal_fraction: f64,
    ) -> Result<ObservedSeries> {
        let noise_key = StreamKey {
            sub: key.sub | 0x8000_0000,
            ..key
        };
        let trans = self.event.transition_for(jump, terminal_fraction);
        let mut series = observe_with(path, jump, &trans, &self.noise, &mut noise_key.rng())?;
        series.source = crate::sim::SeriesSource::Simulation { seed: self.seed };
        Ok(series)
    }

    /// Simulates one fundamentally priced event and its returns on the delta grid.
    fn event_returns(&self, key: StreamKey) -> Result<(f64, f64, Vec<f64>)> {
        let (factor, jump, path) = self.path(key)?;
        let series = self.observe(key, &jump, &path, 0.0)?;
        let returns = self
            .deltas
            .iter()
            .map(|&d| event_return(&series, jump.tau, d, &self.preavg).map(|r| r.value))
            .collect::<Result<Vec<_>>>()?;
        Ok((factor, jump.jump_size, returns))
    }
}

/// Replications `0..rounds` in parallel, merged in order.
fn replicate<T, F>(rounds: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..rounds as u64).into_par_iter().map(f).collect()
}

/// Training regression on the first `n` auxiliary events at one delta.
fn regress(
    factors: &[f64],
    returns: &[Vec<f64>],
    n: usize,
    d_idx: usize,
) -> Result<crate::cross_event::JumpRegressionFit> {
    let raw: Vec<Vec<f64>> = factors[..n].iter().map(|&f| vec![f]).collect();
    let x = build_factors(&raw, &FactorSpec::single_factor())?;
    let y: Vec<f64> = returns[..n].iter().map(|r| r[d_idx]).collect();
    fit(&y, &x)
}

/// Which jump estimator a jump-error cell describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    PreAverage,
    Regression { n_events: usize },
}

impl Estimator {
    pub fn label(&self) -> String {
        match self {
            Estimator::PreAverage => "pre_average".into(),
            Estimator::Regression { n_events } => format!("regression_n{n_events}"),
        }
    }
}

/// Estimation error of one estimator at one delta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpErrorCell {
    pub estimator: Estimator,
    pub delta: f64,
    /// `sum |estimate - J| / sum |J|`.
    pub mape: f64,
    pub mape_se: f64,
    /// Mean squared error, squared log units.
    pub mse: f64,
    pub mse_se: f64,
    /// Mean signed error.
    pub bias: f64,
    pub bias_se: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpErrorResult {
    pub design: McDesign,
    pub cells: Vec<JumpErrorCell>,
}

impl JumpErrorResult {
    pub fn cell(&self, estimator: Estimator, delta: f64) -> Option<&JumpErrorCell> {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.delta == delta)
    }
}

fn error_cell(estimator: Estimator, delta: f64, errors: &[f64], jumps: &[f64]) -> JumpErrorCell {
    let r = errors.len() as f64;
    let abs_j = mean(&jumps.iter().map(|j| j.abs()).collect::<Vec<_>>());
    let abs_e: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    let mape = mean(&abs_e) / abs_j;
    // delta-method standard error of a ratio of means
    let lin: Vec<f64> = abs_e
        .iter()
        .zip(jumps)
        .map(|(e, j)| (e - mape * j.abs()) / abs_j)
        .collect();
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    JumpErrorCell {
        estimator,
        delta,
        mape,
        mape_se: sample_sd(&lin) / r.sqrt(),
        mse: mean(&sq),
        mse_se: sample_sd(&sq) / r.sqrt(),
        bias: mean(errors),
        bias_se: sample_sd(errors) / r.sqrt(),
        rounds: errors.len(),
    }
}

/// Mean absolute percentage and squared errors of the pre-average and
/// regression jump estimators on the delta grid.
pub fn run_jump_error_study(design: &McDesign) -> Result<JumpErrorResult> {
    design.validate()?;
    let n_max = design.n_events.iter().copied().max().unwrap_or(0);
    let n_cols = design.n_events.len();
    let nd = design.deltas.len();

    // per replication: (true jump, raw errors per delta, regression errors per N per delta)
    let reps = replicate(design.rounds, |rep| {
        let key = |sub: u32| StreamKey::new(design.seed, JUMP_ERROR_CELL, rep, sub);
        let (f0, j0, r0) = design.event_returns(key(0))?;
        let mut factors = Vec::with_capacity(n_max);
        let mut returns = Vec::with_capacity(n_max);
        for e in 1..=n_max {
            let (f, _, r) = design.event_returns(key(e as u32))?;
            factors.push(f);
            returns.push(r);
        }
        let raw: Vec<f64> = r0.iter().map(|r| r - j0).collect();
        let mut reg = vec![vec![0.0; nd]; n_cols];
        for (c, &n) in design.n_events.iter().enumerate() {
            for d in 0..nd {
                let fit = regress(&factors, &returns, n, d)?;
                let z = fit.standardization.apply(&[f0])?;
                reg[c][d] = predict_jump(&fit, &z)?.value - j0;
            }
        }
        Ok((j0, raw, reg))
    })?;

    let jumps: Vec<f64> = reps.iter().map(|r| r.0).collect();
    let mut cells = Vec::new();
    for (d, &delta) in design.deltas.iter().enumerate() {
        let errs: Vec<f64> = reps.iter().map(|r| r.1[d]).collect();
        cells.push(error_cell(Estimator::PreAverage, delta, &errs, &jumps));
    }
    for (c, &n) in design.n_events.iter().enumerate() {
        for (d, &delta) in design.deltas.iter().enumerate() {
            let errs: Vec<f64> = reps.iter().map(|r| r.2[c][d]).collect();
            cells.push(error_cell(Estimator::Regression { n_events: n }, delta, &errs, &jumps));
        }
    }
    Ok(JumpErrorResult {
        design: design.clone(),
        cells,
    })
}

/// Rejection frequency of the feasible test at one (delta, terminal deviation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizePowerCell {
    pub delta: f64,
    pub terminal_dev_fraction: f64,
    pub rejection: f64,
    /// Binomial standard error.
    pub se: f64,
    /// Fraction of rejections that overshoot.
    pub overshoot: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePowerResult {
    pub design: McDesign,
    pub cells: Vec<SizePowerCell>,
}

impl SizePowerResult {
    pub fn cell(&self, delta: f64, fraction: f64) -> Option<&SizePowerCell> {
        self.cells
            .iter()
            .find(|c| c.delta == delta && (c.terminal_dev_fraction - fraction).abs() < 1e-12)
    }
}

/// Rejection frequencies of the feasible test over the delta and
/// terminal-deviation grids. The tested event shares its efficient path and
/// noise draws across the terminal-deviation grid.
pub fn run_size_power_study(design: &McDesign) -> Result<SizePowerResult> {
    design.validate()?;
    let nd = design.deltas.len();
    let ng = design.terminal_dev_grid.len();
    let n_train = design.test_events;

    // per replication: (rejected, overshoot) for each delta x grid point
    let reps = replicate(design.rounds, |rep| {
        let key = |sub: u32| StreamKey::new(design.seed, SIZE_POWER_CELL, rep, sub);
        let mut factors = Vec::with_capacity(n_train);
        let mut returns = Vec::with_capacity(n_train);
        for e in 1..=n_train {
            let (f, _, r) = design.event_returns(key(e as u32))?;
            factors.push(f);
            returns.push(r);
        }
        let fits = (0..nd)
            .map(|d| regress(&factors, &returns, n_train, d))
            .collect::<Result<Vec<_>>>()?;

        let (f0, jump, path) = design.path(key(0))?;
        let mut out = vec![(false, false); nd * ng];
        for (g, &frac) in design.terminal_dev_grid.iter().enumerate() {
            let series = design.observe(key(0), &jump, &path, frac)?;
            for (d, &delta) in design.deltas.iter().enumerate() {
                let ret = event_return(&series, jump.tau, delta, &design.preavg)?;
                let bounds = vol_bounds(&series, jump.tau, jump.tau + delta, delta, &design.preavg)?;
                let z = fits[d].standardization.apply(&[f0])?;
                let pred = predict_jump(&fits[d], &z)?;
                let inputs = CriticalValueInputs::from_bounds(design.alpha, delta, &bounds)
                    .with_regression(n_train, fits[d].c_e, pred.f_l1);
                let t = test_event(ret.value, pred.value, &inputs, TestMode::Feasible)?;
                out[d * ng + g] = (t.reject, t.overshoot == Some(true));
            }
        }
        Ok(out)
    })?;

    let r = design.rounds as f64;
    let mut cells = Vec::with_capacity(nd * ng);
    for (d, &delta) in design.deltas.iter().enumerate() {
        for (g, &frac) in design.terminal_dev_grid.iter().enumerate() {
            let rejects = reps.iter().filter(|o| o[d * ng + g].0).count();
            let overs = reps.iter().filter(|o| o[d * ng + g].1).count();
            let p = rejects as f64 / r;
            cells.push(SizePowerCell {
                delta,
                terminal_dev_fraction: frac,
                rejection: p,
                se: (p * (1.0 - p) / r).sqrt(),
                overshoot: if rejects > 0 {
                    overs as f64 / rejects as f64
                } else {
                    0.0
                },
                rounds: design.rounds,
            });
        }
    }
    Ok(SizePowerResult {
        design: design.clone(),
        cells,
    })
}

/// Writes one row per estimator and delta.
pub fn write_jump_error_csv<W: Write>(out: W, result: &JumpErrorResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "estimator", "delta", "mape", "mape_se", "mse", "mse_se", "bias", "bias_se", "rounds",
    ])?;
    for c in &result.cells {
        w.write_record([
            c.estimator.label(),
            format!("{}", c.delta),
            format!("{:.6}", c.mape),
            format!("{:.6}", c.mape_se),
            format!("{:.6e}", c.mse),
            format!("{:.6e}", c.mse_se),
            format!("{:.6e}", c.bias),
            format!("{:.6e}", c.bias_se),
            format!("{}", c.rounds),
        ])?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

/// Power-curve plot data: one series per delta, x = terminal deviation
/// fraction, y = rejection rate.
pub fn emit_figures<W: Write>(out: W, cells: &[SizePowerCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series_delta", "terminal_dev_fraction", "rejection", "se", "rounds"])?;
    for c in cells {
        w.write_record([
            format!("{}", c.delta),
            format!("{:.6}", c.terminal_dev_fraction),
            format!("{:.6}", c.rejection),
            format!("{:.6}", c.se),
            format!("{}", c.rounds),
        ])?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}
