//! Critical values and event-wise tests for fundamental pricing.
//!
//! The infeasible test compares the event return with the true jump; the
//! feasible test replaces the jump by a cross-event regression prediction and
//! inflates the critical value by a Hoeffding term for the estimation error.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::estimators::VolBounds;

/// Mills-ratio bound on the two-sided tail `P(|Z| > t)` of `Z ~ N(0, v)`.
pub fn gaussian_tail_bound(t: f64, v: f64) -> Result<f64> {
    if !(finite("t", t)? > 0.0) {
        return Err(Error::param("t", "must be > 0"));
    }
    if !(finite("v", v)? > 0.0) {
        return Err(Error::param("v", "must be > 0"));
    }
    Ok((2.0 * v / PI).sqrt() * (-t * t / (2.0 * v)).exp() / t)
}

/// Argument `2 / (pi a^2)` of the tail inversion, checked against its domain.
fn tail_argument(a: f64) -> Result<f64> {
    if !(finite("a", a)? > 0.0 && a < 1.0) {
        return Err(Error::param("a", format!("must lie in (0, 1), got {a}")));
    }
    let y = 2.0 / (PI * a * a);
    if !(y > std::f64::consts::E) {
        return Err(Error::param(
            "a",
            format!("2/(pi a^2) = {y} must exceed e for the log-log approximation"),
        ));
    }
    Ok(y)
}

/// Threshold at which the Mills bound for `N(0, v)` equals `a`, using
/// `W(y) ~ log y - log log y`.
pub fn tail_quantile(a: f64, v: f64) -> Result<f64> {
    if !(finite("v", v)? >= 0.0) {
        return Err(Error::param("v", "must be >= 0"));
    }
    let y = tail_argument(a)?;
    Ok((v * (y.ln() - y.ln().ln())).sqrt())
}

/// As [`tail_quantile`] but with the exact Lambert-W solution.
pub fn tail_quantile_exact(a: f64, v: f64) -> Result<f64> {
    if !(finite("v", v)? >= 0.0) {
        return Err(Error::param("v", "must be >= 0"));
    }
    let y = tail_argument(a)?;
    Ok((v * lambert_w0(y)?).sqrt())
}

/// Principal branch of Lambert W for `y >= 0`: the root of `w e^w = y`.
///
/// Newton steps on `f(w) = w - y e^{-w}` safeguarded by a bracketing interval.
pub fn lambert_w0(y: f64) -> Result<f64> {
    if !(finite("y", y)? >= 0.0) {
        return Err(Error::param("y", "must be >= 0"));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    // W is increasing; W(y) <= y and W(y) <= ln(y) for y >= e.
    let mut lo = 0.0;
    let mut hi = if y > std::f64::consts::E { y.ln() } else { y.min(1.0) };
    let mut w = if y > std::f64::consts::E {
        let l = y.ln();
        l - l.ln()
    } else {
        0.5 * hi
    };
    for _ in 0..200 {
        let f = w - y * (-w).exp();
        if f > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let df = 1.0 + y * (-w).exp();
        let mut next = w - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 4.0 * f64::EPSILON * next.abs().max(1e-300) {
            return Ok(next);
        }
        w = next;
    }
    Ok(w)
}

/// Inputs to the critical values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueInputs {
    pub alpha: f64,
    /// Transition window, seconds.
    pub delta: f64,
    #[serde(rename = "C_delta")]
    pub c_delta: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub q2: f64,
    pub n: usize,
    /// Number of training events.
    #[serde(rename = "N")]
    pub n_events: usize,
    /// Bound on the absolute regression residuals.
    pub c_e: f64,
    /// l1 norm of the tested event's standardized factor vector.
    pub f_l1: f64,
}

impl CriticalValueInputs {
    /// Infeasible-test inputs from estimated variance bounds.
    pub fn from_bounds(alpha: f64, delta: f64, bounds: &VolBounds) -> Self {
        Self {
            alpha,
            delta,
            c_delta: bounds.c_delta,
            v: bounds.v,
            q2: bounds.q2,
            n: bounds.n,
            n_events: 0,
            c_e: 0.0,
            f_l1: 0.0,
        }
    }

    /// Adds the regression quantities used by the feasible test.
    pub fn with_regression(mut self, n_events: usize, c_e: f64, f_l1: f64) -> Self {
        self.n_events = n_events;
        self.c_e = c_e;
        self.f_l1 = f_l1;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(finite("alpha", self.alpha)? > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", "must lie in (0, 1)"));
        }
        for (name, v) in [("C_delta", self.c_delta), ("V", self.v), ("q2", self.q2)] {
            if !(finite(name, v)? >= 0.0) {
                return Err(Error::param(name, "must be >= 0"));
            }
        }
        if self.n == 0 {
            return Err(Error::param("n", "must be >= 1"));
        }
        Ok(())
    }
}

/// Union-bound multiplier `sqrt(log(8/(pi alpha^2)) - log log(8/(pi alpha^2)))`.
pub fn kappa_multiplier(alpha: f64) -> Result<f64> {
    tail_quantile(alpha / 2.0, 1.0)
}

/// Critical value of the infeasible test at level `alpha`.
pub fn critical_value(inputs: &CriticalValueInputs) -> Result<f64> {
    inputs.validate()?;
    let scale = inputs.c_delta.sqrt() + (inputs.n as f64).powf(-0.25) * inputs.v.sqrt();
    Ok(scale * kappa_multiplier(inputs.alpha)?)
}

/// Hoeffding correction `N^{-1/2} c_e ||F||_1 sqrt(2 log(6/alpha))`.
pub fn hoeffding_correction(alpha: f64, n_events: usize, c_e: f64, f_l1: f64) -> Result<f64> {
    if n_events == 0 {
        return Err(Error::param("N", "feasible test needs >= 1 training event"));
    }
    if !(finite("c_e", c_e)? >= 0.0) {
        return Err(Error::param("c_e", "must be >= 0"));
    }
    if !(finite("f_l1", f_l1)? >= 0.0) {
        return Err(Error::param("f_l1", "must be >= 0"));
    }
    Ok(c_e * f_l1 * (2.0 * (6.0 / alpha).ln()).sqrt() / (n_events as f64).sqrt())
}

/// Critical value of the feasible test: the infeasible value at level
/// `2 alpha / 3` plus the Hoeffding correction.
pub fn critical_value_feasible(inputs: &CriticalValueInputs) -> Result<f64> {
    inputs.validate()?;
    let inner = CriticalValueInputs {
        alpha: inputs.alpha * 2.0 / 3.0,
        ..*inputs
    };
    Ok(critical_value(&inner)?
        + hoeffding_correction(inputs.alpha, inputs.n_events, inputs.c_e, inputs.f_l1)?)
}

/// Which jump benchmark the test uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    /// The true jump is known.
    Infeasible,
    /// The jump is a regression prediction.
    Feasible,
}

/// Result of one event test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub reject: bool,
    /// Defined only for rejections: the residual shares the event return's sign.
    pub overshoot: Option<bool>,
    /// `event_return - jump_estimate`.
    pub residual: f64,
    pub event_return: f64,
    pub jump_estimate: f64,
    pub mode: TestMode,
    pub inputs: CriticalValueInputs,
}

/// Tests whether the event return is consistent with the jump benchmark.
pub fn test_event(
    event_return: f64,
    jump_estimate: f64,
    inputs: &CriticalValueInputs,
    mode: TestMode,
) -> Result<TestOutcome> {
    finite("event_return", event_return)?;
    finite("jump_estimate", jump_estimate)?;
    let critical = match mode {
        TestMode::Infeasible => critical_value(inputs)?,
        TestMode::Feasible => critical_value_feasible(inputs)?,
    };
    let residual = event_return - jump_estimate;
    let statistic = residual.abs();
    let reject = statistic > critical;
    let overshoot = reject.then(|| residual.signum() == event_return.signum() && event_return != 0.0);
    Ok(TestOutcome {
        statistic,
        critical,
        reject,
        overshoot,
        residual,
        event_return,
        jump_estimate,
        mode,
        inputs: *inputs,
    })
}
