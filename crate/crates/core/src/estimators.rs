//! Pre-averaging estimators: block means, the delta-pre-average event return,
//! the noise variance, and the integrated-variance bound over the transition.

use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::sim::ObservedSeries;
use crate::stats::mean;

/// Block lengths used by the pre-averaging estimators, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreAvgConfig {
    /// Length of the block averaged on either side of the event.
    pub block_seconds: f64,
    /// Length of the windows on which integrated variance is estimated.
    pub iv_window_seconds: f64,
    /// Sub-block length used to pre-average inside each variance window.
    pub iv_subblock_seconds: f64,
}

impl Default for PreAvgConfig {
    fn default() -> Self {
        Self {
            block_seconds: 30.0,
            iv_window_seconds: 30.0,
            iv_subblock_seconds: 2.5,
        }
    }
}

impl PreAvgConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("block_seconds", self.block_seconds),
            ("iv_window_seconds", self.iv_window_seconds),
            ("iv_subblock_seconds", self.iv_subblock_seconds),
        ] {
            if !(finite(name, v)? > 0.0) {
                return Err(Error::param(name, "must be > 0"));
            }
        }
        if self.iv_subblock_seconds * 2.0 > self.iv_window_seconds {
            return Err(Error::param(
                "iv_subblock_seconds",
                "at least two sub-blocks must fit into one variance window",
            ));
        }
        Ok(())
    }

    /// Block length in observations, `M_n`, at the series' average sampling rate.
    pub fn block_len(&self, series: &ObservedSeries) -> Result<usize> {
        self.validate()?;
        let n = series.n();
        if n < 4 {
            return Err(Error::InsufficientData(format!("series has {n} observations")));
        }
        let m = ((self.block_seconds * series.rate()).round() as usize).max(1);
        if m > n / 4 {
            return Err(Error::param(
                "block_seconds",
                format!("block of {m} observations exceeds n/4 = {}", n / 4),
            ));
        }
        Ok(m)
    }

    /// The constant `c` in `M_n = c * sqrt(n)`.
    pub fn c(&self, series: &ObservedSeries) -> Result<f64> {
        Ok(self.block_len(series)? as f64 / (series.n() as f64).sqrt())
    }

    fn subblock_len(&self, series: &ObservedSeries) -> usize {
        ((self.iv_subblock_seconds * series.rate()).round() as usize).max(1)
    }
}

/// Mean of `y[j..min(j + m, n)]`.
pub fn preaverage(series: &ObservedSeries, j: usize, m: usize) -> Result<f64> {
    let n = series.n();
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, len: n });
    }
    if m == 0 {
        return Err(Error::param("m", "block length must be >= 1"));
    }
    let block = &series.y[j..(j + m).min(n)];
    Ok(mean(block))
}

/// The delta-pre-average event return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventReturn {
    pub value: f64,
    pub delta: f64,
    pub tau: f64,
    pub n: usize,
    /// Block length in observations.
    pub block_len: usize,
    pub config: PreAvgConfig,
}

/// Difference between the block mean starting at the first observation at or
/// after `tau + delta` and the block mean ending at the last observation before `tau`.
pub fn event_return(
    series: &ObservedSeries,
    tau: f64,
    delta: f64,
    config: &PreAvgConfig,
) -> Result<EventReturn> {
    if !(finite("delta", delta)? >= 0.0) {
        return Err(Error::param("delta", "must be >= 0"));
    }
    finite("tau", tau)?;
    let m = config.block_len(series)?;
    if tau - config.block_seconds < series.start() {
        return Err(Error::InsufficientData(format!(
            "need {} s of data before tau = {tau}, series starts at {}",
            config.block_seconds,
            series.start()
        )));
    }
    if tau + delta + config.block_seconds > series.end() {
        return Err(Error::InsufficientData(format!(
            "need data up to {}, series ends at {}",
            tau + delta + config.block_seconds,
            series.end()
        )));
    }
    let pre_end = series.count_before(tau);
    let post_start = series.count_before(tau + delta);
    if pre_end < m || post_start + m > series.n() {
        return Err(Error::InsufficientData(format!(
            "block of {m} observations does not fit around the event"
        )));
    }
    let value = preaverage(series, post_start, m)? - preaverage(series, pre_end - m, m)?;
    Ok(EventReturn {
        value,
        delta,
        tau,
        n: series.n(),
        block_len: m,
        config: *config,
    })
}

/// Noise variance from the negative first-order autocovariance of the returns
/// of `y[..end_index]`, floored at zero.
pub fn noise_variance(series: &ObservedSeries, end_index: usize) -> Result<f64> {
    let end = end_index.min(series.n());
    if end < 100 {
        return Err(Error::InsufficientData(format!(
            "noise variance needs >= 100 observations, got {end}"
        )));
    }
    let r: Vec<f64> = series.y[..end].windows(2).map(|w| w[1] - w[0]).collect();
    let gamma1 = r.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (r.len() - 1) as f64;
    Ok((-gamma1).max(0.0))
}

/// Pre-averaged integrated variance of `y[a..b]`, noise corrected and floored at zero.
///
/// The window is cut into sub-blocks of `m` observations; squared differences of
/// consecutive sub-block means have expectation `s2 (2m^2 + 1) / (3m) + 2 q2 / m`
/// where `s2` is the variance per observation interval.
pub fn window_integrated_variance(
    series: &ObservedSeries,
    a: usize,
    b: usize,
    m: usize,
    q2: f64,
) -> Option<f64> {
    let len = b.checked_sub(a)?;
    let m = m.max(1);
    let k = len / m;
    if k < 2 {
        return None;
    }
    let means: Vec<f64> = (0..k)
        .map(|i| mean(&series.y[a + i * m..a + (i + 1) * m]))
        .collect();
    let ss: f64 = means.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let mf = m as f64;
    let per_diff = (ss / (k - 1) as f64 - 2.0 * q2 / mf).max(0.0);
    let s2 = per_diff * 3.0 * mf / (2.0 * mf * mf + 1.0);
    Some(s2 * len as f64)
}

/// Variance inputs to the critical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolBounds {
    /// Worst-case integrated variance over the transition window.
    #[serde(rename = "C_delta")]
    pub c_delta: f64,
    /// Asymptotic variance of the pre-averaging error, in window-normalized units.
    #[serde(rename = "V")]
    pub v: f64,
    pub q2: f64,
    /// Per-window integrated variances before `tau`, nearest window first.
    pub iv30_pre: Vec<f64>,
    /// Per-window integrated variances after `tau_bar`, nearest window first.
    pub iv30_post: Vec<f64>,
    /// Post/pre scaling factor, at least 1.
    #[serde(rename = "c_Delta")]
    pub c_big_delta: f64,
    /// Spot variances per second at `tau-` and `tau_bar`.
    pub spot_pre: f64,
    pub spot_post: f64,
    /// `c = M_n / sqrt(n)`.
    pub c: f64,
    pub n: usize,
    pub iv_window_seconds: f64,
}

/// Minimum number of variance windows on each side of the event.
pub const MIN_IV_WINDOWS: usize = 10;

fn tile_windows(
    series: &ObservedSeries,
    anchor: f64,
    width: f64,
    forward: bool,
) -> Vec<(usize, usize)> {
    let tol = 1e-9 * width;
    let mut out = Vec::new();
    for k in 0.. {
        let (lo, hi) = if forward {
            (anchor + k as f64 * width, anchor + (k + 1) as f64 * width)
        } else {
            (anchor - (k + 1) as f64 * width, anchor - k as f64 * width)
        };
        if (forward && hi > series.end() + tol) || (!forward && lo < series.start() - tol) {
            break;
        }
        out.push((series.count_before(lo), series.count_before(hi)));
    }
    out
}

/// Estimates the integrated-variance bound and pre-averaging variance around an event.
pub fn vol_bounds(
    series: &ObservedSeries,
    tau: f64,
    tau_bar: f64,
    delta: f64,
    config: &PreAvgConfig,
) -> Result<VolBounds> {
    if !(finite("delta", delta)? >= 0.0) {
        return Err(Error::param("delta", "must be >= 0"));
    }
    if !(finite("tau_bar", tau_bar)? >= finite("tau", tau)?) {
        return Err(Error::param("tau_bar", "must be >= tau"));
    }
    let c = config.c(series)?;
    let w = config.iv_window_seconds;
    let q2 = noise_variance(series, series.count_before(tau))?;
    let m = config.subblock_len(series);

    let collect = |windows: Vec<(usize, usize)>| -> Vec<f64> {
        windows
            .into_iter()
            .filter_map(|(a, b)| window_integrated_variance(series, a, b, m, q2))
            .collect()
    };
    let pre = collect(tile_windows(series, tau, w, false));
    let post = collect(tile_windows(series, tau_bar, w, true));
    if pre.len() < MIN_IV_WINDOWS || post.len() < MIN_IV_WINDOWS {
        return Err(Error::InsufficientData(format!(
            "need {MIN_IV_WINDOWS} variance windows on each side, got {} before and {} after",
            pre.len(),
            post.len()
        )));
    }
    let mean_pre = mean(&pre);
    if !(mean_pre > 0.0) {
        return Err(Error::Degenerate("all pre-event integrated variances are zero".into()));
    }
    let c_big_delta = (mean(&post) / mean_pre).max(1.0);
    let max_pre = pre.iter().copied().fold(0.0, f64::max);
    let c_delta = delta * c_big_delta * max_pre / w;

    let spot_pre = pre[0] / w;
    let spot_post = post[0] / w;
    // spot variances rescaled to the unit-length window the asymptotics are stated on
    let span = series.n() as f64 / series.rate();
    let v = (spot_pre + spot_post) * span * c / 3.0 + 2.0 * q2;

    Ok(VolBounds {
        c_delta,
        v,
        q2,
        iv30_pre: pre,
        iv30_post: post,
        c_big_delta,
        spot_pre,
        spot_post,
        c,
        n: series.n(),
        iv_window_seconds: w,
    })
}

impl VolBounds {
    /// `C_delta` for another transition length, holding the variance windows fixed.
    pub fn c_delta_for(&self, delta: f64) -> f64 {
        let max_pre = self.iv30_pre.iter().copied().fold(0.0, f64::max);
        delta * self.c_big_delta * max_pre / self.iv_window_seconds
    }
}

/// One JSON record per estimated event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub value: f64,
    pub delta: f64,
    #[serde(rename = "C_delta")]
    pub c_delta: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub q2: f64,
    #[serde(rename = "c_Delta")]
    pub c_big_delta: f64,
}

impl EstimateRecord {
    pub fn new(ret: &EventReturn, bounds: &VolBounds) -> Self {
        Self {
            value: ret.value,
            delta: ret.delta,
            c_delta: bounds.c_delta,
            v: bounds.v,
            q2: bounds.q2,
            c_big_delta: bounds.c_big_delta,
        }
    }
}
