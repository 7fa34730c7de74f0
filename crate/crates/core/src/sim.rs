//! Price-process simulation around a single news release.
//!
//! The efficient log-price is a Heston diffusion with one jump in price and
//! one decaying jump in variance at the release time. Observed prices add
//! i.i.d. microstructure noise and a transition component that is active only
//! between the release and the termination time.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::rng::seeded;

/// 252 trading days of 6.5 hours, in seconds.
pub const DEFAULT_ANNUALIZATION: f64 = 252.0 * 6.5 * 3600.0;

/// Annualized Heston variance parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HestonParams {
    /// Mean-reversion rate, per year.
    pub kappa: f64,
    /// Long-run variance, per year.
    pub theta: f64,
    /// Volatility of variance, per square-root year.
    pub vsigma: f64,
    /// Correlation of the price and variance shocks.
    pub rho: f64,
    /// Initial variance, per year.
    pub v0: f64,
    /// Seconds per year used to convert simulation time.
    pub annualization: f64,
}

impl Default for HestonParams {
    fn default() -> Self {
        Self {
            kappa: 5.0,
            theta: 0.0225,
            vsigma: 0.4,
            rho: -(0.5f64.sqrt()),
            v0: 0.0225,
            annualization: DEFAULT_ANNUALIZATION,
        }
    }
}

impl HestonParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("vsigma", self.vsigma),
            ("v0", self.v0),
        ] {
            if finite(name, v)? < 0.0 {
                return Err(Error::param(name, format!("must be >= 0, got {v}")));
            }
        }
        if !(-1.0..=1.0).contains(&finite("rho", self.rho)?) {
            return Err(Error::param("rho", format!("must lie in [-1, 1], got {}", self.rho)));
        }
        if finite("annualization", self.annualization)? <= 0.0 {
            return Err(Error::param("annualization", "must be > 0"));
        }
        Ok(())
    }

    /// Converts a duration in seconds to years.
    pub fn years(&self, seconds: f64) -> f64 {
        seconds / self.annualization
    }
}

/// The price and variance jump at the release time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    /// Release time, seconds from the window start.
    pub tau: f64,
    /// Log-price jump.
    pub jump_size: f64,
    /// Additive variance jump, per year.
    pub vol_jump: f64,
    /// Decay rate of the variance jump, per year.
    pub vol_jump_decay: f64,
    /// Multiple of the long-run variance that produced `vol_jump` in randomized designs.
    pub vol_jump_scale: f64,
}

impl JumpSpec {
    /// A price jump without any variance jump.
    pub fn price_only(tau: f64, jump_size: f64) -> Self {
        Self {
            tau,
            jump_size,
            vol_jump: 0.0,
            vol_jump_decay: 0.0,
            vol_jump_scale: 0.0,
        }
    }

    pub fn validate(&self, window: f64) -> Result<()> {
        finite("jump_size", self.jump_size)?;
        let tau = finite("tau", self.tau)?;
        if !(tau > 0.0 && tau < window) {
            return Err(Error::param("tau", format!("must lie in (0, {window}), got {tau}")));
        }
        if finite("vol_jump", self.vol_jump)? < 0.0 {
            return Err(Error::param("vol_jump", "must be >= 0"));
        }
        if finite("vol_jump_decay", self.vol_jump_decay)? < 0.0 {
            return Err(Error::param("vol_jump_decay", "must be >= 0"));
        }
        finite("vol_jump_scale", self.vol_jump_scale)?;
        Ok(())
    }

    /// Deterministic variance component added after the release, per year.
    pub fn variance_boost(&self, t: f64, heston: &HestonParams) -> f64 {
        if t < self.tau || self.vol_jump == 0.0 {
            0.0
        } else {
            self.vol_jump * (-self.vol_jump_decay * heston.years(t - self.tau)).exp()
        }
    }
}

/// Transition noise between the release and the termination time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionSpec {
    /// Fraction of the jump missing from the observed price at the release.
    pub eta: f64,
    /// Power-law exponent of the fade-out, in (0, 0.5).
    pub theta_pn: f64,
    /// Termination time, seconds from the window start.
    pub tau_bar: f64,
    /// Deviation left in the observed price after termination (0 under fundamental pricing).
    pub terminal_dev: f64,
}

impl TransitionSpec {
    /// No transition at all: the observed price adjusts instantly.
    pub fn instantaneous(tau: f64) -> Self {
        Self {
            eta: 0.0,
            theta_pn: 0.45,
            tau_bar: tau + 1.0,
            terminal_dev: 0.0,
        }
    }

    pub fn validate(&self, jump: &JumpSpec) -> Result<()> {
        let eta = finite("eta", self.eta)?;
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::param("eta", format!("must lie in [0, 1], got {eta}")));
        }
        let th = finite("theta_pn", self.theta_pn)?;
        if !(th > 0.0 && th < 0.5) {
            return Err(Error::param("theta_pn", format!("must lie in (0, 0.5), got {th}")));
        }
        if finite("tau_bar", self.tau_bar)? <= jump.tau {
            return Err(Error::param(
                "tau_bar",
                format!("must exceed tau = {}, got {}", jump.tau, self.tau_bar),
            ));
        }
        finite("terminal_dev", self.terminal_dev)?;
        Ok(())
    }

    /// Transition length in seconds.
    pub fn length(&self, jump: &JumpSpec) -> f64 {
        self.tau_bar - jump.tau
    }
}

/// Standard deviation of the i.i.d. microstructure noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub q: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { q: 0.00004 }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if finite("q", self.q)? < 0.0 {
            return Err(Error::param("q", "must be >= 0"));
        }
        Ok(())
    }
}

/// Efficient log-price and spot variance on an equidistant grid of `n + 1` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficientPath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// Spot variance, per year.
    pub v: Vec<f64>,
    pub jump: JumpSpec,
}

/// Where an observed series came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesSource {
    Simulation { seed: u64 },
    TickFile { path: String },
    Synthetic { label: String },
}

/// Discretely sampled observed log-prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSeries {
    /// Observation times in seconds, strictly increasing.
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub source: SeriesSource,
}

impl ObservedSeries {
    pub fn new(times: Vec<f64>, y: Vec<f64>, source: SeriesSource) -> Result<Self> {
        if times.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: y.len(),
            });
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::param(
                "times",
                format!("must be strictly increasing (violated at index {})", i + 1),
            ));
        }
        if let Some(i) = times.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::param("series", format!("non-finite value at position {i}")));
        }
        Ok(Self { times, y, source })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn start(&self) -> f64 {
        self.times.first().copied().unwrap_or(f64::NAN)
    }

    pub fn end(&self) -> f64 {
        self.times.last().copied().unwrap_or(f64::NAN)
    }

    /// Number of observations strictly before `t`.
    pub fn count_before(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }

    /// Average number of observations per second.
    pub fn rate(&self) -> f64 {
        if self.n() < 2 {
            return f64::NAN;
        }
        (self.n() - 1) as f64 / (self.end() - self.start())
    }
}

/// Simulates the efficient price with an Euler scheme on `n` steps over `window` seconds.
pub fn simulate_efficient_path(
    params: &HestonParams,
    jump: &JumpSpec,
    n: usize,
    window: f64,
    seed: u64,
) -> Result<EfficientPath> {
    simulate_efficient_path_with(params, jump, n, window, &mut seeded(seed))
}

/// As [`simulate_efficient_path`], drawing from a caller-owned generator.
pub fn simulate_efficient_path_with<R: Rng + ?Sized>(
    params: &HestonParams,
    jump: &JumpSpec,
    n: usize,
    window: f64,
    rng: &mut R,
) -> Result<EfficientPath> {
    params.validate()?;
    if n < 2 {
        return Err(Error::param("n", format!("must be >= 2, got {n}")));
    }
    if !(finite("window", window)? > 0.0) {
        return Err(Error::param("window", "must be > 0"));
    }
    jump.validate(window)?;

    let dt_s = window / n as f64;
    let dt = params.years(dt_s);
    let sqdt = dt.sqrt();
    let rho_perp = (1.0 - params.rho * params.rho).max(0.0).sqrt();

    let mut times = Vec::with_capacity(n + 1);
    let mut x = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);

    // `u` is the CIR state; it may go negative, only its positive part is used.
    let mut u = params.v0;
    let mut xi = 0.0;
    times.push(0.0);
    x.push(0.0);
    v.push(u.max(0.0) + jump.variance_boost(0.0, params));

    for i in 0..n {
        let t = i as f64 * dt_s;
        let t_next = (i + 1) as f64 * dt_s;
        let zb: f64 = rng.sample(StandardNormal);
        let zp: f64 = rng.sample(StandardNormal);
        let zw = params.rho * zb + rho_perp * zp;

        xi += v[i].sqrt() * sqdt * zw;
        if t < jump.tau && jump.tau <= t_next {
            xi += jump.jump_size;
        }
        let up = u.max(0.0);
        u += params.kappa * (params.theta - up) * dt + params.vsigma * up.sqrt() * sqdt * zb;

        times.push(t_next);
        x.push(xi);
        v.push(u.max(0.0) + jump.variance_boost(t_next, params));
    }

    Ok(EfficientPath {
        times,
        x,
        v,
        jump: *jump,
    })
}

/// Transition noise at time `t`.
///
/// Zero before the release, the power-law fade-out plus a linear blend to the
/// terminal deviation on `[tau, tau_bar)`, and the terminal deviation afterwards.
pub fn transition_value(t: f64, jump: &JumpSpec, spec: &TransitionSpec) -> f64 {
    if t < jump.tau {
        return 0.0;
    }
    if t >= spec.tau_bar {
        return spec.terminal_dev;
    }
    let r = (t - jump.tau) / (spec.tau_bar - jump.tau);
    -spec.eta * jump.jump_size * (1.0 - r.powf(spec.theta_pn)) + spec.terminal_dev * r
}

/// Observes the path at grid points `1..=n` with noise and transition.
pub fn observe(
    path: &EfficientPath,
    jump: &JumpSpec,
    trans: &TransitionSpec,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<ObservedSeries> {
    let mut s = observe_with(path, jump, trans, noise, &mut seeded(seed))?;
    s.source = SeriesSource::Simulation { seed };
    Ok(s)
}

pub fn observe_with<R: Rng + ?Sized>(
    path: &EfficientPath,
    jump: &JumpSpec,
    trans: &TransitionSpec,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<ObservedSeries> {
    if jump.tau != path.jump.tau {
        return Err(Error::param(
            "jump",
            format!("tau {} does not match the path's tau {}", jump.tau, path.jump.tau),
        ));
    }
    trans.validate(jump)?;
    noise.validate()?;
    let times = path.times[1..].to_vec();
    let y = times
        .iter()
        .zip(&path.x[1..])
        .map(|(&t, &x)| {
            let u: f64 = rng.sample(StandardNormal);
            x + noise.q * u + transition_value(t, jump, trans)
        })
        .collect();
    Ok(ObservedSeries {
        times,
        y,
        source: SeriesSource::Simulation { seed: 0 },
    })
}

/// Randomized event design: factor, price jump, variance jump and transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventDesign {
    /// Standard deviation of the Gaussian news factor.
    pub factor_sd: f64,
    /// Jump loading on the factor.
    pub loading: f64,
    /// Bounds of the uniform variance-jump multiple.
    pub vol_scale_low: f64,
    pub vol_scale_high: f64,
    /// Variance-jump decay, per year.
    pub vol_jump_decay: f64,
    pub eta: f64,
    pub theta_pn: f64,
    /// True transition length, seconds.
    pub transition_seconds: f64,
    /// Release time, seconds from window start.
    pub tau: f64,
}

impl Default for EventDesign {
    fn default() -> Self {
        Self {
            factor_sd: 0.03,
            loading: 0.3,
            vol_scale_low: 4.0,
            vol_scale_high: 16.0,
            vol_jump_decay: 2500.0,
            eta: 1.0,
            theta_pn: 0.45,
            transition_seconds: 30.0,
            tau: 5400.0,
        }
    }
}

/// One draw from an [`EventDesign`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignDraw {
    pub factor: f64,
    pub jump: JumpSpec,
    pub transition: TransitionSpec,
}

impl EventDesign {
    pub fn validate(&self) -> Result<()> {
        if !(finite("factor_sd", self.factor_sd)? >= 0.0) {
            return Err(Error::param("factor_sd", "must be >= 0"));
        }
        finite("loading", self.loading)?;
        if !(self.vol_scale_low <= self.vol_scale_high && self.vol_scale_low >= 0.0) {
            return Err(Error::param("vol_scale_low", "need 0 <= low <= high"));
        }
        if !(self.transition_seconds > 0.0) {
            return Err(Error::param("transition_seconds", "must be > 0"));
        }
        Ok(())
    }

    /// Mean absolute jump, `loading * factor_sd * sqrt(2 / pi)`.
    pub fn mean_abs_jump(&self) -> f64 {
        (self.loading * self.factor_sd).abs() * (2.0 / std::f64::consts::PI).sqrt()
    }

    /// Draws factor, jump and transition; `terminal_dev_fraction` scales the
    /// terminal deviation by the mean absolute jump, signed like the jump.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        heston: &HestonParams,
        terminal_dev_fraction: f64,
        rng: &mut R,
    ) -> DesignDraw {
        let factor = if self.factor_sd > 0.0 {
            Normal::new(0.0, self.factor_sd)
                .expect("validated sd")
                .sample(rng)
        } else {
            0.0
        };
        let scale = if self.vol_scale_high > self.vol_scale_low {
            Uniform::new(self.vol_scale_low, self.vol_scale_high)
                .expect("validated bounds")
                .sample(rng)
        } else {
            self.vol_scale_low
        };
        let jump_size = self.loading * factor;
        let jump = JumpSpec {
            tau: self.tau,
            jump_size,
            vol_jump: scale * heston.theta,
            vol_jump_decay: self.vol_jump_decay,
            vol_jump_scale: scale,
        };
        let transition = self.transition_for(&jump, terminal_dev_fraction);
        DesignDraw {
            factor,
            jump,
            transition,
        }
    }

    /// Transition of this design for a given jump.
    pub fn transition_for(&self, jump: &JumpSpec, terminal_dev_fraction: f64) -> TransitionSpec {
        let sign = if jump.jump_size < 0.0 { -1.0 } else { 1.0 };
        TransitionSpec {
            eta: self.eta,
            theta_pn: self.theta_pn,
            tau_bar: jump.tau + self.transition_seconds,
            terminal_dev: sign * terminal_dev_fraction * self.mean_abs_jump(),
        }
    }
}

/// Generating specs of one simulated window, written next to the CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub heston: HestonParams,
    pub jump: JumpSpec,
    pub transition: TransitionSpec,
    pub noise: NoiseSpec,
    pub n: usize,
    pub window: f64,
    pub seed: u64,
}

/// Writes `time_s,x,v,y`; the grid origin has no observation and an empty `y`.
pub fn write_path_csv<W: Write>(
    out: W,
    path: &EfficientPath,
    series: Option<&ObservedSeries>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_s", "x", "v", "y"])?;
    for i in 0..path.times.len() {
        let y = match series {
            Some(s) if i >= 1 && i - 1 < s.n() => format!("{:e}", s.y[i - 1]),
            _ => String::new(),
        };
        w.write_record([
            format!("{}", path.times[i]),
            format!("{:e}", path.x[i]),
            format!("{:e}", path.v[i]),
            y,
        ])?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

/// Simulates one window and writes `<stem>.csv` plus `<stem>.json`.
pub fn simulate_to_files(record: &SimulationRecord, dir: &Path, stem: &str) -> Result<()> {
    let path = simulate_efficient_path(&record.heston, &record.jump, record.n, record.window, record.seed)?;
    let series = observe(
        &path,
        &record.jump,
        &record.transition,
        &record.noise,
        crate::rng::mix64(record.seed),
    )?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let f = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_path_csv(std::io::BufWriter::new(f), &path, Some(&series))?;
    let json_path = dir.join(format!("{stem}.json"));
    let body = serde_json::to_string_pretty(record)?;
    std::fs::write(&json_path, body + "\n").map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}
