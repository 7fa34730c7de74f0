use newsjump_core::cross_event::{
    build_factors, fit, leave_one_out_plan, predict_raw, FactorSpec, NewsClass,
};
use newsjump_core::estimators::PreAvgConfig;
use proptest::prelude::*;

/// Centered, unit-sample-variance copy of a column.
fn standardize(col: &[f64]) -> Vec<f64> {
    let n = col.len() as f64;
    let m = col.iter().sum::<f64>() / n;
    let sd = (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    col.iter().map(|x| (x - m) / sd).collect()
}

fn raw_factors(seed: u64, n: usize) -> Vec<Vec<f64>> {
    // deterministic, well-spread factors from a linear congruential sequence
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n).map(|_| vec![next() - 0.5, 20.0 + 60.0 * next()]).collect()
}

#[test]
fn exact_linear_cross_section_is_recovered() {
    let raw = raw_factors(3, 40);
    let s = standardize(&raw.iter().map(|r| r[0]).collect::<Vec<_>>());
    let a = standardize(&raw.iter().map(|r| r[1]).collect::<Vec<_>>());
    let sa = standardize(&s.iter().zip(&a).map(|(x, y)| x * y).collect::<Vec<_>>());
    let b_true = [0.004, 0.012, -0.003, 0.0025];
    let y: Vec<f64> = (0..raw.len())
        .map(|i| b_true[0] + b_true[1] * s[i] + b_true[2] * a[i] + b_true[3] * sa[i])
        .collect();
    let x = build_factors(&raw, &FactorSpec::surprise_attention()).unwrap();
    let f = fit(&y, &x).unwrap();
    for (got, want) in f.b_hat.iter().zip(b_true) {
        assert!((got / want - 1.0).abs() < 1e-10, "{got} vs {want}");
    }
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(f.residuals.iter().all(|e| e.abs() < 1e-10 * scale));
    assert!((f.r2 - 1.0).abs() < 1e-10);
    let p = predict_raw(&f, &raw[5]).unwrap();
    assert!((p.value - y[5]).abs() < 1e-10 * scale);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residuals_are_orthogonal_to_the_design(seed in any::<u64>(), n in 8usize..80, noise in 1e-4..1e-1f64) {
        let raw = raw_factors(seed, n);
        let y: Vec<f64> = raw
            .iter()
            .enumerate()
            .map(|(i, r)| 0.1 * r[0] + 0.001 * r[1] + noise * ((i * 7919 % 13) as f64 - 6.0))
            .collect();
        let x = build_factors(&raw, &FactorSpec::surprise_attention()).unwrap();
        let f = fit(&y, &x).unwrap();
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..x.k() {
            let col = x.rows.column(j);
            let dot: f64 = col.iter().zip(&f.residuals).map(|(a, e)| a * e).sum();
            prop_assert!(dot.abs() <= 1e-10 * col.norm() * ynorm);
        }
        let max = f.residuals.iter().map(|e| e.abs()).fold(0.0, f64::max);
        prop_assert_eq!(f.c_e, max);
        prop_assert!(f.robust_se.iter().all(|s| *s >= 0.0));
    }

    #[test]
    fn held_out_event_never_trains(
        classes in proptest::collection::vec(prop_oneof![Just(NewsClass::Regular), Just(NewsClass::Breaking)], 6..60),
        pick in any::<prop::sample::Index>(),
    ) {
        let tested = pick.index(classes.len());
        match leave_one_out_plan(&classes, tested, 4, 30.0, PreAvgConfig::default()) {
            Ok(plan) => {
                prop_assert!(!plan.training.contains(&tested));
                prop_assert!(plan.training.iter().all(|&i| classes[i] == NewsClass::Regular));
                let others = classes.iter().enumerate().filter(|&(i, c)| i != tested && *c == NewsClass::Regular).count();
                prop_assert_eq!(plan.training.len(), others);
            }
            Err(_) => {
                let others = classes.iter().enumerate().filter(|&(i, c)| i != tested && *c == NewsClass::Regular).count();
                prop_assert!(others < 6);
            }
        }
    }
}
