//! Cross-event jump regression.
//!
//! Event returns of a homogeneous set of releases are regressed on
//! standardized news factors. The fitted loadings give the efficient-jump
//! benchmark for a held-out event; the largest absolute residual bounds the
//! regression error in the feasible critical value.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::PreAvgConfig;
use crate::stats::{mean, sample_sd};

/// One regressor built from the raw factors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorTerm {
    /// Raw factor `i`, standardized.
    Single(usize),
    /// Product of the standardized raw factors `i` and `j`.
    Interaction(usize, usize),
}

/// Which regressors enter the jump regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub intercept: bool,
    pub terms: Vec<FactorTerm>,
    /// Names of the raw factors, indexed like the raw factor vectors.
    pub names: Vec<String>,
    /// Restandardize interaction columns after forming the product.
    pub restandardize_interactions: bool,
}

impl FactorSpec {
    /// Intercept, surprise, attention and their interaction.
    pub fn surprise_attention() -> Self {
        Self {
            intercept: true,
            terms: vec![
                FactorTerm::Single(0),
                FactorTerm::Single(1),
                FactorTerm::Interaction(0, 1),
            ],
            names: vec!["surprise".into(), "attention".into()],
            restandardize_interactions: true,
        }
    }

    /// A single factor without intercept, `J = F b`.
    pub fn single_factor() -> Self {
        Self {
            intercept: false,
            terms: vec![FactorTerm::Single(0)],
            names: vec!["factor".into()],
            restandardize_interactions: true,
        }
    }

    /// Number of regressors `K`.
    pub fn k(&self) -> usize {
        self.terms.len() + usize::from(self.intercept)
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.k());
        if self.intercept {
            out.push("const".to_string());
        }
        for t in &self.terms {
            out.push(match *t {
                FactorTerm::Single(i) => self.name(i),
                FactorTerm::Interaction(i, j) => format!("{}x{}", self.name(i), self.name(j)),
            });
        }
        out
    }

    fn name(&self, i: usize) -> String {
        self.names.get(i).cloned().unwrap_or_else(|| format!("f{i}"))
    }

    fn raw_width(&self) -> usize {
        self.terms
            .iter()
            .map(|t| match *t {
                FactorTerm::Single(i) => i + 1,
                FactorTerm::Interaction(i, j) => i.max(j) + 1,
            })
            .max()
            .unwrap_or(0)
    }
}

/// Location and scale frozen on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub spec: FactorSpec,
    /// Per raw factor.
    pub raw_center: Vec<f64>,
    pub raw_scale: Vec<f64>,
    /// Per term.
    pub term_center: Vec<f64>,
    pub term_scale: Vec<f64>,
}

impl Standardization {
    /// Standardized regressor row (intercept first) for one raw factor vector.
    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let width = self.raw_center.len();
        if raw.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: raw.len(),
            });
        }
        let z: Vec<f64> = raw
            .iter()
            .zip(self.raw_center.iter().zip(&self.raw_scale))
            .map(|(x, (c, s))| (x - c) / s)
            .collect();
        let mut row = Vec::with_capacity(self.spec.k());
        if self.spec.intercept {
            row.push(1.0);
        }
        for (t, term) in self.spec.terms.iter().enumerate() {
            let value = match *term {
                FactorTerm::Single(i) => z[i],
                FactorTerm::Interaction(i, j) => z[i] * z[j],
            };
            row.push((value - self.term_center[t]) / self.term_scale[t]);
        }
        Ok(row)
    }
}

/// Standardized `N x K` design of the training events.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    pub rows: DMatrix<f64>,
    pub standardization: Standardization,
    pub labels: Vec<String>,
}

impl FactorMatrix {
    pub fn n_events(&self) -> usize {
        self.rows.nrows()
    }

    pub fn k(&self) -> usize {
        self.rows.ncols()
    }
}

/// Standardizes each column: centered and scaled to unit sample variance with
/// an intercept, scaled only when the regression has no intercept.
fn column_stats(values: &[f64], center: bool, label: &str) -> Result<(f64, f64)> {
    let c = if center { mean(values) } else { 0.0 };
    let sd = sample_sd(values);
    let size = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(sd.is_finite() && sd > 1e-12 * size) {
        return Err(Error::Degenerate(format!("factor column `{label}` is constant")));
    }
    Ok((c, sd))
}

/// Builds the standardized design from raw factor vectors, one per training event.
pub fn build_factors(raw: &[Vec<f64>], spec: &FactorSpec) -> Result<FactorMatrix> {
    let k = spec.k();
    if raw.len() < k + 2 {
        return Err(Error::InsufficientData(format!(
            "{} events for {k} regressors; need at least {}",
            raw.len(),
            k + 2
        )));
    }
    let width = spec.raw_width();
    for (r, row) in raw.iter().enumerate() {
        if row.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("factors", format!("non-finite factor in event {r}")));
        }
    }
    let center = spec.intercept;
    let mut raw_center = Vec::with_capacity(width);
    let mut raw_scale = Vec::with_capacity(width);
    for i in 0..width {
        let col: Vec<f64> = raw.iter().map(|r| r[i]).collect();
        let (c, s) = column_stats(&col, center, &spec.name(i))?;
        raw_center.push(c);
        raw_scale.push(s);
    }
    let z: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| {
            r.iter()
                .zip(raw_center.iter().zip(&raw_scale))
                .map(|(x, (c, s))| (x - c) / s)
                .collect()
        })
        .collect();
    let labels = spec.labels();
    let mut term_center = Vec::with_capacity(spec.terms.len());
    let mut term_scale = Vec::with_capacity(spec.terms.len());
    for (t, term) in spec.terms.iter().enumerate() {
        match *term {
            FactorTerm::Single(_) => {
                term_center.push(0.0);
                term_scale.push(1.0);
            }
            FactorTerm::Interaction(i, j) => {
                let col: Vec<f64> = z.iter().map(|r| r[i] * r[j]).collect();
                let label = &labels[t + usize::from(spec.intercept)];
                if spec.restandardize_interactions {
                    let (c, s) = column_stats(&col, center, label)?;
                    term_center.push(c);
                    term_scale.push(s);
                } else {
                    column_stats(&col, center, label)?;
                    term_center.push(0.0);
                    term_scale.push(1.0);
                }
            }
        }
    }
    let standardization = Standardization {
        spec: spec.clone(),
        raw_center,
        raw_scale,
        term_center,
        term_scale,
    };
    let mut rows = DMatrix::zeros(raw.len(), k);
    for (r, row) in raw.iter().enumerate() {
        for (c, v) in standardization.apply(row)?.into_iter().enumerate() {
            rows[(r, c)] = v;
        }
    }
    Ok(FactorMatrix {
        rows,
        standardization,
        labels,
    })
}

/// Least-squares fit of event returns on standardized factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRegressionFit {
    pub b_hat: Vec<f64>,
    /// HC1 heteroskedasticity-robust standard errors.
    pub robust_se: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r2: f64,
    /// Largest absolute residual.
    pub c_e: f64,
    pub labels: Vec<String>,
    pub standardization: Standardization,
}

impl JumpRegressionFit {
    pub fn n_events(&self) -> usize {
        self.residuals.len()
    }
}

/// Fits `returns = F b + e` by Householder QR.
pub fn fit(returns: &[f64], x: &FactorMatrix) -> Result<JumpRegressionFit> {
    let (n, k) = x.rows.shape();
    if returns.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: returns.len(),
        });
    }
    if n < k {
        return Err(Error::RankDeficient { rank: n, cols: k });
    }
    let y = DVector::from_column_slice(returns);
    let qr = x.rows.clone().qr();
    let r = qr.r();
    let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..k)
        .filter(|&i| r[(i, i)].abs() > 1e-10 * diag_max.max(f64::MIN_POSITIVE))
        .count();
    if rank < k {
        return Err(Error::RankDeficient { rank, cols: k });
    }
    let qty = qr.q().transpose() * &y;
    let b = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { rank, cols: k })?;
    let fitted = &x.rows * &b;
    let resid = &y - fitted;

    let ssr = resid.norm_squared();
    let sst = if x.standardization.spec.intercept {
        let m = y.mean();
        y.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    } else {
        y.norm_squared()
    };
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };

    // (X'X)^{-1} = R^{-1} R^{-T}
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(Error::RankDeficient { rank, cols: k })?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let mut meat = DMatrix::zeros(k, k);
    for i in 0..n {
        let xi = x.rows.row(i);
        meat += xi.transpose() * xi * resid[i].powi(2);
    }
    let dof = if n > k { n as f64 / (n - k) as f64 } else { 1.0 };
    let cov = &xtx_inv * meat * &xtx_inv * dof;
    let robust_se = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();

    let residuals: Vec<f64> = resid.iter().copied().collect();
    let c_e = residuals.iter().map(|e| e.abs()).fold(0.0, f64::max);
    Ok(JumpRegressionFit {
        b_hat: b.iter().copied().collect(),
        robust_se,
        residuals,
        r2,
        c_e,
        labels: x.labels.clone(),
        standardization: x.standardization.clone(),
    })
}

/// Jump benchmark for a held-out event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpPrediction {
    pub value: f64,
    /// l1 norm of the standardized factor vector, intercept included.
    pub f_l1: f64,
}

/// `F b_hat` for a factor vector already standardized with the fit's statistics.
pub fn predict_jump(fit: &JumpRegressionFit, factors: &[f64]) -> Result<JumpPrediction> {
    if factors.len() != fit.b_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: fit.b_hat.len(),
            got: factors.len(),
        });
    }
    let value = factors.iter().zip(&fit.b_hat).map(|(f, b)| f * b).sum();
    let f_l1 = factors.iter().map(|f| f.abs()).sum();
    Ok(JumpPrediction { value, f_l1 })
}

/// Standardizes raw factors with the fit's training statistics, then predicts.
pub fn predict_raw(fit: &JumpRegressionFit, raw: &[f64]) -> Result<JumpPrediction> {
    predict_jump(fit, &fit.standardization.apply(raw)?)
}

/// Breaking news trigger a trading break shortly after the release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewsClass {
    Regular,
    Breaking,
}

impl std::fmt::Display for NewsClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NewsClass::Regular => "regular",
            NewsClass::Breaking => "breaking",
        })
    }
}

/// Training set for one tested event. Carries the window length and block
/// configuration so training and tested returns are computed identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub tested: usize,
    pub training: Vec<usize>,
    pub delta: f64,
    pub config: PreAvgConfig,
}

/// All Regular events except the tested one.
pub fn leave_one_out_plan(
    classes: &[NewsClass],
    tested: usize,
    k: usize,
    delta: f64,
    config: PreAvgConfig,
) -> Result<TrainingPlan> {
    if tested >= classes.len() {
        return Err(Error::IndexOutOfRange {
            index: tested,
            len: classes.len(),
        });
    }
    let training: Vec<usize> = classes
        .iter()
        .enumerate()
        .filter(|&(i, c)| i != tested && *c == NewsClass::Regular)
        .map(|(i, _)| i)
        .collect();
    if training.len() < k + 2 {
        return Err(Error::InsufficientData(format!(
            "{} Regular training events for {k} regressors; need at least {}",
            training.len(),
            k + 2
        )));
    }
    Ok(TrainingPlan {
        tested,
        training,
        delta,
        config,
    })
}

/// Writes `delta,term,coef,robust_se,r2,n_events`, one row per coefficient.
pub fn write_fit_table<W: Write>(out: W, fits: &[(f64, &JumpRegressionFit)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta", "term", "coef", "robust_se", "r2", "n_events"])?;
    for (delta, fit) in fits {
        for ((label, b), se) in fit.labels.iter().zip(&fit.b_hat).zip(&fit.robust_se) {
            w.write_record([
                format!("{delta}"),
                label.clone(),
                format!("{b:e}"),
                format!("{se:e}"),
                format!("{}", fit.r2),
                format!("{}", fit.n_events()),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vec<Vec<f64>> {
        vec![
            vec![0.1, 40.0],
            vec![-0.2, 55.0],
            vec![0.05, 30.0],
            vec![0.3, 70.0],
            vec![-0.1, 45.0],
            vec![0.0, 60.0],
            vec![0.2, 35.0],
        ]
    }

    #[test]
    fn constant_column_is_rejected() {
        let raw = vec![vec![0.1]; 5];
        assert!(matches!(
            build_factors(&raw, &FactorSpec::single_factor()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn too_few_events() {
        let raw = toy()[..5].to_vec();
        assert!(matches!(
            build_factors(&raw, &FactorSpec::surprise_attention()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn standardized_columns_have_unit_variance() {
        for spec in [FactorSpec::surprise_attention(), FactorSpec::single_factor()] {
            let raw: Vec<Vec<f64>> = if spec.intercept {
                toy()
            } else {
                toy().into_iter().map(|r| vec![r[0]]).collect()
            };
            let x = build_factors(&raw, &spec).unwrap();
            let start = usize::from(spec.intercept);
            for c in start..x.k() {
                let col: Vec<f64> = x.rows.column(c).iter().copied().collect();
                assert!((sample_sd(&col) - 1.0).abs() < 1e-12);
                if spec.intercept {
                    assert!(mean(&col).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x = build_factors(&toy(), &FactorSpec::surprise_attention()).unwrap();
        let truth = [0.002, 0.004, -0.001, 0.0005];
        let y: Vec<f64> = (0..x.n_events())
            .map(|i| (0..4).map(|c| x.rows[(i, c)] * truth[c]).sum())
            .collect();
        let f = fit(&y, &x).unwrap();
        for (b, t) in f.b_hat.iter().zip(truth) {
            assert!((b - t).abs() < 1e-14);
        }
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(f.c_e < 1e-15);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let raw: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let spec = FactorSpec {
            intercept: true,
            terms: vec![FactorTerm::Single(0), FactorTerm::Single(1)],
            names: vec!["a".into(), "b".into()],
            restandardize_interactions: true,
        };
        let x = build_factors(&raw, &spec).unwrap();
        let y = vec![0.0, 1.0, 0.5, 0.2, 0.1, 0.3];
        assert!(matches!(fit(&y, &x), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn prediction_at_training_means_is_the_intercept() {
        let x = build_factors(&toy(), &FactorSpec::surprise_attention()).unwrap();
        let y = vec![0.01, -0.02, 0.004, 0.03, -0.012, 0.001, 0.02];
        let f = fit(&y, &x).unwrap();
        let z = vec![1.0, 0.0, 0.0, 0.0];
        let p = predict_jump(&f, &z).unwrap();
        assert_eq!(p.value, f.b_hat[0]);
        assert_eq!(p.f_l1, 1.0);
        assert!(predict_jump(&f, &[0.0; 3]).is_err());
    }

    #[test]
    fn tested_event_uses_training_statistics() {
        // five training events, single factor with intercept
        let spec = FactorSpec {
            intercept: true,
            terms: vec![FactorTerm::Single(0)],
            names: vec!["s".into()],
            restandardize_interactions: true,
        };
        let raw = vec![vec![1.0], vec![1.0], vec![2.0], vec![3.0], vec![3.0]];
        let x = build_factors(&raw, &spec).unwrap();
        // mean 2, sample sd 1: tested value 4.5 maps to 2.5; ||F||_1 = 1 + 2.5
        let z = x.standardization.apply(&[4.5]).unwrap();
        assert_eq!(z, vec![1.0, 2.5]);
        let f = fit(&[0.1, 0.1, 0.2, 0.3, 0.3], &x).unwrap();
        let p = predict_jump(&f, &z).unwrap();
        assert_eq!(p.f_l1, 3.5);
        // exact line y = 0.1 s: prediction 0.45
        assert!((p.value - 0.45).abs() < 1e-14);
    }

    #[test]
    fn leave_one_out_excludes_tested_and_breaking() {
        let mut classes = vec![NewsClass::Regular; 55];
        classes.extend(vec![NewsClass::Breaking; 14]);
        let cfg = PreAvgConfig::default();
        let p = leave_one_out_plan(&classes, 60, 4, 30.0, cfg).unwrap();
        assert_eq!(p.training.len(), 55);
        let p = leave_one_out_plan(&classes, 3, 4, 30.0, cfg).unwrap();
        assert_eq!(p.training.len(), 54);
        assert!(!p.training.contains(&3));
        assert!(p.training.iter().all(|&i| i < 55));
        let few = vec![NewsClass::Regular; 3];
        assert!(leave_one_out_plan(&few, 0, 4, 30.0, cfg).is_err());
    }

    #[test]
    fn leave_one_out_changes_the_estimate() {
        // five events on one factor with intercept; hand-computed below
        let spec = FactorSpec {
            intercept: true,
            terms: vec![FactorTerm::Single(0)],
            names: vec!["s".into()],
            restandardize_interactions: true,
        };
        let raw: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0, 5.0].iter().map(|&v| vec![v]).collect();
        let y = [1.0, 3.0, 2.0, 5.0, 4.0];
        let full = fit(&y, &build_factors(&raw, &spec).unwrap()).unwrap();
        let in_sample = predict_raw(&full, &[5.0]).unwrap().value;
        // y on s over all five: slope 0.8, intercept 0.6 -> 4.6 at s = 5
        assert!((in_sample - 4.6).abs() < 1e-12);

        let x4 = build_factors(&raw[..4], &spec).unwrap();
        let loo = fit(&y[..4], &x4).unwrap();
        let out = predict_raw(&loo, &[5.0]).unwrap().value;
        // first four: slope 1.1, intercept 0 -> 5.5 at s = 5
        assert!((out - 5.5).abs() < 1e-12);
        assert!((out - in_sample).abs() > 0.1);
    }

    #[test]
    fn fit_table_rows() {
        let x = build_factors(&toy(), &FactorSpec::surprise_attention()).unwrap();
        let y = vec![0.01, -0.02, 0.004, 0.03, -0.012, 0.001, 0.02];
        let f = fit(&y, &x).unwrap();
        let mut buf = Vec::new();
        write_fit_table(&mut buf, &[(30.0, &f), (60.0, &f)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 8);
        assert!(text.contains("30,surprisexattention"));
    }
}
