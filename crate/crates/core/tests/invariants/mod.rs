//! Invariant checks shared by the property tests and the acceptance run.
//! Each check returns `Err` with the first counterexample found.

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use fairlos::cohort::{generate_cohort, GroupBias, SyntheticCohortConfig};
use fairlos::learners::{fit, predict, predict_proba, LearnerConfig, ModelParams, TrainedModel};
use fairlos::metrics::{auc, confusion, group_metric_table, rates, roc_curve, ConfusionCounts};
use fairlos::mitigation::{
    fit_exponentiated_gradient, predict_eg, predict_thresholded, replay_exponentiated_gradient,
    verify_multiplier_trace, EgParams, FairnessConstraint, ThresholdPolicy,
};
use fairlos::pipeline::{
    load_records, prepare_encoded, run_pipeline, CohortSource, MitigationSettings, PsiSource, RunConfig, SexFilter,
    StageSeeds,
};
use fairlos::stats::{binomial_test, chi_square_gof, los_threshold_psi, quartile_summary, spearman};
use fairlos::tabular::{
    encode_one_hot, long_stay_rate, zscore_apply, zscore_fit, AdmissionRecord, EncodedDataset, SchemaSpec, Sex,
};
use fairlos::FeatureMatrix;

pub type Check = fn() -> Result<(), String>;

/// Every check, labelled.
pub const ALL: &[(&str, Check)] = &[
    ("one-hot blocks sum to 1", one_hot_blocks_sum_to_one),
    (
        "long-stay rate is the size-weighted group mean",
        long_stay_rate_is_weighted_mean,
    ),
    ("z-score is invariant to positive affine maps", zscore_affine_invariance),
    ("split and downsample are seed-determined", split_is_seed_determined),
    ("generation is a pure function of config", generation_is_pure),
    ("generated records satisfy invariants", generated_records_are_valid),
    ("bias offset raises group long-stay rate", bias_offset_is_monotone),
    ("chi-square ignores category order", chi_square_permutation_invariance),
    ("binomial test is symmetric", binomial_symmetry),
    ("spearman is symmetric and bounded", spearman_symmetry),
    ("no outliers means whiskers at min and max", quartiles_without_outliers),
    ("integer weights equal duplicated rows", weight_duplication_equivalence),
    ("forest ignores tree order", forest_order_invariance),
    ("boosting loss never increases", gboost_loss_non_increasing),
    ("same seed gives identical model bytes", model_serialization_is_seeded),
    ("FNR + TPR = 1 and FPR + TNR = 1", rate_identities),
    ("AUC is invariant to increasing maps", auc_monotone_invariance),
    (
        "constant-positive classifier has BA 0.5",
        constant_positive_balanced_accuracy,
    ),
    ("ranges ignore group names and duplicates", range_relabel_and_duplicate),
    ("ROC points are monotone", roc_monotone),
    ("EG trace follows its update rule and replays", eg_trace_replays),
    ("EG with epsilon >= 1 is a no-op", eg_loose_constraint_is_noop),
    ("raising a threshold trades FPR for FNR", threshold_monotonicity),
    (
        "uniform 0.5 threshold equals plain prediction",
        uniform_threshold_matches_predict,
    ),
    ("every table and figure names its provenance", provenance_closure),
    ("male and female runs share no state", sexes_share_no_state),
    ("pipeline psi equals the stats computation", pipeline_psi_matches_stats),
];

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn fail<E: std::fmt::Display>(e: E) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn cohort(n_patients: usize, seed: u64) -> Vec<AdmissionRecord> {
    generate_cohort(&SyntheticCohortConfig {
        n_patients,
        seed,
        ..SyntheticCohortConfig::default()
    })
    .expect("default config generates")
}

fn encoded(n_patients: usize, seed: u64) -> EncodedDataset {
    encode_one_hot(&cohort(n_patients, seed), &SchemaSpec::los_inputs(), 4).expect("cohort encodes")
}

/// Labels and scores from a small range so ties are common.
fn scored_labels() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (2usize..120).prop_flat_map(|n| {
        (
            proptest::collection::vec(0u8..2, n),
            proptest::collection::vec(0u8..12, n),
        )
            .prop_map(|(y, s)| (y, s.into_iter().map(|v| f64::from(v) / 11.0).collect()))
    })
}

/// Small labelled design matrices with both classes present.
fn design(max_rows: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (8usize..max_rows).prop_flat_map(|n| {
        (
            proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), n),
            proptest::collection::vec(0u8..2, n),
        )
            .prop_filter("both classes", |(_, y)| y.contains(&0) && y.contains(&1))
    })
}

/// Rows, labels and three groups, each group holding both classes.
fn grouped_design() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>, Vec<String>)> {
    (30usize..90)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 2), n),
                proptest::collection::vec(0u8..2, n),
            )
        })
        .prop_map(|(rows, y)| {
            let groups = (0..rows.len()).map(|i| ["A", "B", "C"][i % 3].to_string()).collect();
            (rows, y, groups)
        })
        .prop_filter(
            "every group has both classes",
            |(_, y, g): &(Vec<Vec<f64>>, Vec<u8>, Vec<String>)| {
                ["A", "B", "C"].iter().all(|name| {
                    let ys: Vec<u8> = y
                        .iter()
                        .zip(g)
                        .filter(|(_, gi)| gi.as_str() == *name)
                        .map(|(v, _)| *v)
                        .collect();
                    ys.contains(&0) && ys.contains(&1)
                })
            },
        )
}

pub fn one_hot_blocks_sum_to_one() -> Result<(), String> {
    run(24, (1usize..40, any::<u64>()), |(n, seed)| {
        let data = encoded(n, seed);
        for (source, cols) in data.one_hot_blocks() {
            for r in 0..data.len() {
                let s: f64 = cols.iter().map(|&c| data.features.get(r, c)).sum();
                prop_assert_eq!(s, 1.0, "block {} row {}", source, r);
            }
        }
        Ok(())
    })
}

pub fn long_stay_rate_is_weighted_mean() -> Result<(), String> {
    run(64, (1usize..40, any::<u64>()), |(n, seed)| {
        let data = encoded(n, seed);
        let mut groups: BTreeMap<&str, Vec<u8>> = BTreeMap::new();
        for (y, g) in data.labels.iter().zip(&data.groups) {
            groups.entry(g.as_str()).or_default().push(*y);
        }
        let mut ones = 0u64;
        for labels in groups.values() {
            let rate = long_stay_rate(labels).map_err(fail)?;
            let count = rate * labels.len() as f64;
            prop_assert!((count - count.round()).abs() < 1e-9);
            ones += count.round() as u64;
        }
        let total = data.labels.iter().filter(|&&l| l == 1).count() as u64;
        prop_assert_eq!(ones, total);
        prop_assert_eq!(
            long_stay_rate(&data.labels).map_err(fail)?,
            total as f64 / data.len() as f64
        );
        Ok(())
    })
}

pub fn zscore_affine_invariance() -> Result<(), String> {
    run(
        24,
        (5usize..40, any::<u64>(), 0.1f64..20.0, -50.0f64..50.0),
        |(n, seed, a, b)| {
            let data = encoded(n, seed);
            let mut scaled = data.clone();
            for c in data.numeric_columns() {
                for r in 0..data.len() {
                    scaled.features.set(r, c, a * data.features.get(r, c) + b);
                }
            }
            let z = zscore_apply(&data, &zscore_fit(&data).map_err(fail)?).map_err(fail)?;
            let zs = zscore_apply(&scaled, &zscore_fit(&scaled).map_err(fail)?).map_err(fail)?;
            for c in data.numeric_columns() {
                for r in 0..data.len() {
                    let (u, v) = (z.features.get(r, c), zs.features.get(r, c));
                    prop_assert!((u - v).abs() < 1e-8, "col {} row {}: {} vs {}", c, r, u, v);
                }
            }
            Ok(())
        },
    )
}

pub fn split_is_seed_determined() -> Result<(), String> {
    run(
        12,
        (40usize..120, any::<u64>(), any::<u64>()),
        |(n, cohort_seed, seed)| {
            let data = encoded(n, cohort_seed);
            let seeds = StageSeeds::derive(seed, Sex::Male, 0);
            let a = prepare_encoded(data.clone(), 4, PsiSource::Pinned, 0.5, &seeds);
            let b = prepare_encoded(data, 4, PsiSource::Pinned, 0.5, &seeds);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    let bytes = |d: &EncodedDataset| {
                        let mut out = Vec::new();
                        d.write_csv(&mut out).map(|_| out)
                    };
                    prop_assert_eq!(bytes(&a.train).map_err(fail)?, bytes(&b.train).map_err(fail)?);
                    prop_assert_eq!(bytes(&a.test).map_err(fail)?, bytes(&b.test).map_err(fail)?);
                    prop_assert_eq!(a.train, b.train);
                }
                (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
                _ => return Err(TestCaseError::fail("one run failed and the other did not")),
            }
            Ok(())
        },
    )
}

pub fn generation_is_pure() -> Result<(), String> {
    run(16, (1usize..60, any::<u64>()), |(n, seed)| {
        prop_assert_eq!(cohort(n, seed), cohort(n, seed));
        Ok(())
    })
}

pub fn generated_records_are_valid() -> Result<(), String> {
    run(16, (1usize..200, any::<u64>(), any::<bool>()), |(n, seed, biased)| {
        let base = if biased {
            SyntheticCohortConfig::biased()
        } else {
            SyntheticCohortConfig::default()
        };
        let records = generate_cohort(&SyntheticCohortConfig {
            n_patients: n,
            seed,
            ..base
        })
        .map_err(fail)?;
        for r in &records {
            let v = r.violations();
            prop_assert!(v.is_empty(), "{:?}", v);
        }
        Ok(())
    })
}

pub fn bias_offset_is_monotone() -> Result<(), String> {
    let mut rates = Vec::new();
    for offset in [-0.5, 0.0, 0.5] {
        let mut cfg = SyntheticCohortConfig {
            n_patients: 12_000,
            seed: 17,
            ..SyntheticCohortConfig::biased()
        };
        cfg.group_bias.insert(
            "Black".into(),
            GroupBias {
                logit_offset: offset,
                label_noise: 0.0,
                under_recording: 0.0,
            },
        );
        let records = generate_cohort(&cfg).map_err(|e| e.to_string())?;
        if records.len() < 50_000 {
            return Err(format!("only {} admissions generated", records.len()));
        }
        let black: Vec<u8> = records
            .iter()
            .filter(|r| r.ethnic_group.label() == "Black")
            .map(|r| u8::from(r.los_days >= 4))
            .collect();
        rates.push(long_stay_rate(&black).map_err(|e| e.to_string())?);
    }
    if rates.windows(2).all(|w| w[0] <= w[1]) {
        Ok(())
    } else {
        Err(format!("long-stay rates {rates:?} are not monotone"))
    }
}

pub fn chi_square_permutation_invariance() -> Result<(), String> {
    run(
        128,
        proptest::collection::vec(0u64..500, 2..10)
            .prop_shuffle()
            .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle())),
        |(a, b)| {
            prop_assume!(a.iter().sum::<u64>() > 0);
            let (x, y) = (chi_square_gof(&a).map_err(fail)?, chi_square_gof(&b).map_err(fail)?);
            prop_assert!((x.statistic - y.statistic).abs() <= 1e-12 * x.statistic.max(1.0));
            prop_assert!((x.p_value - y.p_value).abs() <= 1e-12);
            Ok(())
        },
    )
}

pub fn binomial_symmetry() -> Result<(), String> {
    run(
        256,
        (1u64..300).prop_flat_map(|n| (0..=n, Just(n), 0.01f64..0.99)),
        |(k, n, p)| {
            let a = binomial_test(k, n, p).map_err(fail)?;
            let b = binomial_test(n - k, n, 1.0 - p).map_err(fail)?;
            prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
            Ok(())
        },
    )
}

pub fn spearman_symmetry() -> Result<(), String> {
    let pairs = (3usize..60).prop_flat_map(|n| {
        (
            proptest::collection::vec(0u8..20, n),
            proptest::collection::vec(-5.0f64..5.0, n),
        )
    });
    run(256, pairs, |(x, y)| {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        match (spearman(&x, &y), spearman(&y, &x)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a, b);
                prop_assert!(a.statistic.abs() <= 1.0);
            }
            (Err(_), Err(_)) => {}
            _ => return Err(TestCaseError::fail("only one direction failed")),
        }
        Ok(())
    })
}

pub fn quartiles_without_outliers() -> Result<(), String> {
    run(256, proptest::collection::vec(0.0f64..100.0, 4..80), |v| {
        let q = quartile_summary(&v).map_err(fail)?;
        prop_assume!(v.iter().all(|&x| x >= q.lower_fence && x <= q.upper_fence));
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(q.outlier_indices.is_empty());
        prop_assert_eq!((q.lower_whisker, q.upper_whisker), (min, max));
        Ok(())
    })
}

fn matrix(rows: &[Vec<f64>]) -> Result<FeatureMatrix, TestCaseError> {
    FeatureMatrix::from_rows(rows).map_err(fail)
}

fn logreg_params(m: &TrainedModel) -> Vec<f64> {
    match &m.params {
        ModelParams::Logreg(l) => std::iter::once(l.intercept)
            .chain(l.coefficients.iter().copied())
            .collect(),
        _ => unreachable!("logistic model expected"),
    }
}

pub fn weight_duplication_equivalence() -> Result<(), String> {
    let case = design(50).prop_flat_map(|(rows, y)| {
        let n = rows.len();
        (Just(rows), Just(y), proptest::collection::vec(1u32..4, n))
    });
    run(48, case, |(rows, y, w)| {
        let mut dup_rows = Vec::new();
        let mut dup_y = Vec::new();
        for ((r, &yi), &wi) in rows.iter().zip(&y).zip(&w) {
            for _ in 0..wi {
                dup_rows.push(r.clone());
                dup_y.push(yi);
            }
        }
        let weights: Vec<f64> = w.iter().map(|&v| f64::from(v)).collect();
        let cfg = LearnerConfig {
            tolerance: 1e-10,
            ..LearnerConfig::logreg()
        };
        let weighted = fit(&cfg, &matrix(&rows)?, &y, Some(&weights)).map_err(fail)?;
        let duplicated = fit(&cfg, &matrix(&dup_rows)?, &dup_y, None).map_err(fail)?;
        for (a, b) in logreg_params(&weighted).iter().zip(logreg_params(&duplicated)) {
            prop_assert!((a - b).abs() <= 1e-6, "{} vs {}", a, b);
        }
        Ok(())
    })
}

pub fn forest_order_invariance() -> Result<(), String> {
    run(16, (design(80), any::<u64>()), |((rows, y), seed)| {
        let x = matrix(&rows)?;
        let cfg = LearnerConfig {
            n_estimators: 15,
            ..LearnerConfig::forest()
        }
        .with_seed(seed);
        let model = fit(&cfg, &x, &y, None).map_err(fail)?;
        let mut reversed = model.clone();
        if let ModelParams::Forest { trees } = &mut reversed.params {
            trees.reverse();
        }
        prop_assert_eq!(
            predict_proba(&model, &x).map_err(fail)?,
            predict_proba(&reversed, &x).map_err(fail)?
        );
        Ok(())
    })
}

pub fn gboost_loss_non_increasing() -> Result<(), String> {
    run(16, design(80), |(rows, y)| {
        let model = fit(&LearnerConfig::gboost(), &matrix(&rows)?, &y, None).map_err(fail)?;
        let ModelParams::Gboost(b) = &model.params else {
            unreachable!()
        };
        prop_assert_eq!(b.loss_trace.len(), 101);
        for w in b.loss_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{} then {}", w[0], w[1]);
        }
        Ok(())
    })
}

pub fn model_serialization_is_seeded() -> Result<(), String> {
    run(12, (design(60), any::<u64>(), 0usize..4), |((rows, y), seed, kind)| {
        let x = matrix(&rows)?;
        let base = [
            LearnerConfig::logreg(),
            LearnerConfig::tree(),
            LearnerConfig::gboost(),
            LearnerConfig {
                n_estimators: 10,
                ..LearnerConfig::forest()
            },
        ][kind]
            .clone();
        let cfg = base.with_seed(seed);
        let a = fit(&cfg, &x, &y, None).map_err(fail)?.to_json().map_err(fail)?;
        let b = fit(&cfg, &x, &y, None).map_err(fail)?.to_json().map_err(fail)?;
        prop_assert_eq!(a, b);
        Ok(())
    })
}

pub fn rate_identities() -> Result<(), String> {
    run(
        512,
        (0u64..10_000, 0u64..10_000, 0u64..10_000, 0u64..10_000),
        |(tp, fn_, tn, fp)| {
            prop_assume!(tp + fn_ > 0 && tn + fp > 0);
            let m = rates(&ConfusionCounts::new(tp, fn_, tn, fp)).map_err(fail)?;
            prop_assert!((m.fnr + m.tpr - 1.0).abs() <= 1e-15);
            prop_assert!((m.fpr + m.tnr - 1.0).abs() <= 1e-15);
            Ok(())
        },
    )
}

pub fn auc_monotone_invariance() -> Result<(), String> {
    run(256, (scored_labels(), 0.1f64..5.0, -3.0f64..3.0), |((y, s), a, b)| {
        prop_assume!(y.contains(&0) && y.contains(&1));
        let t: Vec<f64> = s.iter().map(|&v| (a * v).exp() + b + v.powi(3)).collect();
        prop_assert_eq!(auc(&y, &s).map_err(fail)?, auc(&y, &t).map_err(fail)?);
        Ok(())
    })
}

pub fn constant_positive_balanced_accuracy() -> Result<(), String> {
    run(256, proptest::collection::vec(0u8..2, 2..200), |y| {
        prop_assume!(y.contains(&0) && y.contains(&1));
        let m = rates(&confusion(&y, &vec![1; y.len()]).map_err(fail)?).map_err(fail)?;
        prop_assert_eq!(m.balanced_accuracy, 0.5);
        Ok(())
    })
}

pub fn range_relabel_and_duplicate() -> Result<(), String> {
    let case = (20usize..200).prop_flat_map(|n| {
        (
            proptest::collection::vec(0u8..2, n),
            proptest::collection::vec(0u8..2, n),
            proptest::collection::vec(0usize..4, n),
        )
    });
    run(128, case, |(y, yhat, g)| {
        let names = ["A", "B", "C", "D"];
        let renamed = ["w", "x", "y", "z"];
        let groups: Vec<&str> = g.iter().map(|&i| names[i]).collect();
        let Ok(base) = group_metric_table(&y, &yhat, None, &groups) else {
            return Ok(());
        };
        let relabelled: Vec<&str> = g.iter().map(|&i| renamed[3 - i]).collect();
        let other = group_metric_table(&y, &yhat, None, &relabelled).map_err(fail)?;
        prop_assert_eq!(base.ranges, other.ranges);

        let mut y2 = y.clone();
        let mut yhat2 = yhat.clone();
        let mut groups2 = groups.clone();
        for i in (0..y.len()).filter(|&i| g[i] == 0) {
            y2.push(y[i]);
            yhat2.push(yhat[i]);
            groups2.push("copy");
        }
        let dup = group_metric_table(&y2, &yhat2, None, &groups2).map_err(fail)?;
        prop_assert!(dup.ranges.fnr <= base.ranges.fnr);
        prop_assert!(dup.ranges.fpr <= base.ranges.fpr);
        prop_assert!(dup.ranges.balanced_accuracy <= base.ranges.balanced_accuracy);
        Ok(())
    })
}

pub fn roc_monotone() -> Result<(), String> {
    run(256, scored_labels(), |(y, s)| {
        prop_assume!(y.contains(&0) && y.contains(&1));
        let curve = roc_curve(&y, &s).map_err(fail)?;
        for w in curve.points.windows(2) {
            prop_assert!(w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr);
        }
        let last = curve.points.last().unwrap();
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        Ok(())
    })
}

pub fn eg_trace_replays() -> Result<(), String> {
    run(12, (grouped_design(), 0.05f64..0.5), |((rows, y, groups), eps)| {
        let x = matrix(&rows)?;
        let learner = LearnerConfig::logreg();
        let constraint = FairnessConstraint::fnr_parity(eps, &groups).map_err(fail)?;
        let params = EgParams {
            iterations: 5,
            ..EgParams::default()
        };
        let eg = fit_exponentiated_gradient(&learner, &x, &y, &groups, &constraint, &params).map_err(fail)?;
        verify_multiplier_trace(&eg).map_err(fail)?;
        let replay = replay_exponentiated_gradient(&eg, &learner, &x, &y, &groups).map_err(fail)?;
        prop_assert_eq!(replay.to_json().map_err(fail)?, eg.to_json().map_err(fail)?);
        Ok(())
    })
}

pub fn eg_loose_constraint_is_noop() -> Result<(), String> {
    run(12, (grouped_design(), 1.0f64..5.0), |((rows, y, groups), eps)| {
        let x = matrix(&rows)?;
        let learner = LearnerConfig::logreg();
        let constraint = FairnessConstraint::unchecked(eps, &groups).map_err(fail)?;
        let eg =
            fit_exponentiated_gradient(&learner, &x, &y, &groups, &constraint, &EgParams::default()).map_err(fail)?;
        let plain = fit(&learner, &x, &y, None).map_err(fail)?;
        prop_assert_eq!(
            predict_eg(&eg, &x).map_err(fail)?,
            predict_proba(&plain, &x).map_err(fail)?
        );
        Ok(())
    })
}

pub fn threshold_monotonicity() -> Result<(), String> {
    let case = (
        scored_labels(),
        proptest::collection::vec(0usize..3, 120),
        0.0f64..1.0,
        0.0f64..1.0,
        0usize..3,
    );
    run(256, case, |((y, s), g, t1, t2, target)| {
        let names = ["A", "B", "C"];
        let groups: Vec<&str> = g[..y.len()].iter().map(|&i| names[i]).collect();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let policy = |t: f64| {
            let mut p = ThresholdPolicy::uniform(0.5).expect("0.5 is a valid threshold");
            for n in names {
                p.thresholds
                    .insert(n.to_string(), if n == names[target] { t } else { 0.5 });
            }
            p
        };
        let rows: Vec<usize> = (0..y.len()).filter(|&i| g[i] == target).collect();
        let pick = |v: &[u8]| rows.iter().map(|&i| v[i]).collect::<Vec<u8>>();
        let y_g = pick(&y);
        prop_assume!(y_g.contains(&0) && y_g.contains(&1));
        let a = predict_thresholded(&policy(lo), &s, &groups).map_err(fail)?;
        let b = predict_thresholded(&policy(hi), &s, &groups).map_err(fail)?;
        let ma = rates(&confusion(&y_g, &pick(&a.labels)).map_err(fail)?).map_err(fail)?;
        let mb = rates(&confusion(&y_g, &pick(&b.labels)).map_err(fail)?).map_err(fail)?;
        prop_assert!(mb.fnr >= ma.fnr && mb.fpr <= ma.fpr);
        Ok(())
    })
}

pub fn uniform_threshold_matches_predict() -> Result<(), String> {
    run(24, design(120), |(rows, y)| {
        let x = matrix(&rows)?;
        let model = fit(&LearnerConfig::logreg(), &x, &y, None).map_err(fail)?;
        let groups: Vec<&str> = (0..y.len()).map(|i| if i % 2 == 0 { "A" } else { "B" }).collect();
        let mut policy = ThresholdPolicy::uniform(0.5).map_err(fail)?;
        policy.thresholds.insert("A".into(), 0.5);
        policy.thresholds.insert("B".into(), 0.5);
        let scores = predict_proba(&model, &x).map_err(fail)?;
        let labels = predict_thresholded(&policy, &scores, &groups).map_err(fail)?.labels;
        prop_assert_eq!(labels, predict(&model, &x, 0.5).map_err(fail)?);
        Ok(())
    })
}

fn small_run(out: &std::path::Path, sex: SexFilter) -> RunConfig {
    let cohort = SyntheticCohortConfig {
        n_patients: 2500,
        ..SyntheticCohortConfig::default()
    };
    RunConfig {
        cohort: CohortSource::Synthetic {
            config: Box::new(cohort),
        },
        sex,
        learner: LearnerConfig {
            n_estimators: 10,
            ..LearnerConfig::forest()
        },
        mitigation: Some(MitigationSettings {
            eg: EgParams {
                iterations: 3,
                ..EgParams::default()
            },
            ..MitigationSettings::default()
        }),
        seed: 23,
        out_dir: out.to_path_buf(),
        ..RunConfig::default()
    }
}

pub fn provenance_closure() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = run_pipeline(&small_run(dir.path(), SexFilter::BothSeparately)).map_err(|e| e.to_string())?;
    let tag = report.provenance.tag();
    let mut checked = 0;
    for entry in std::fs::read_dir(dir.path()).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let text = std::fs::read_to_string(&path).unwrap_or_default();
        let named = match ext {
            "svg" => text.contains(&tag),
            "json" => text.contains(&report.provenance.config_hash) && text.contains("\"master_seed\": 23"),
            "csv" if path.file_name().is_some_and(|n| n != "admissions.csv") => text.starts_with(&format!("# {tag}")),
            _ => continue,
        };
        if !named {
            return Err(format!("{} does not name its provenance", path.display()));
        }
        checked += 1;
    }
    if checked < 10 {
        return Err(format!("only {checked} tables and figures written"));
    }
    Ok(())
}

pub fn sexes_share_no_state() -> Result<(), String> {
    let both = tempfile::tempdir().map_err(|e| e.to_string())?;
    let male = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = run_pipeline(&small_run(both.path(), SexFilter::BothSeparately)).map_err(|e| e.to_string())?;
    let b = run_pipeline(&small_run(male.path(), SexFilter::Male)).map_err(|e| e.to_string())?;
    let ma = serde_json::to_string(a.sex(Sex::Male).ok_or("male missing")?).map_err(|e| e.to_string())?;
    let mb = serde_json::to_string(b.sex(Sex::Male).ok_or("male missing")?).map_err(|e| e.to_string())?;
    if ma != mb {
        return Err("male results depend on whether the female cohort ran".into());
    }
    let model = |d: &std::path::Path| std::fs::read(d.join("male/model.json")).map_err(|e| e.to_string());
    if model(both.path())? != model(male.path())? {
        return Err("male model differs".into());
    }
    Ok(())
}

pub fn pipeline_psi_matches_stats() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        mitigation: None,
        ..small_run(dir.path(), SexFilter::BothSeparately)
    };
    let report = run_pipeline(&cfg).map_err(|e| e.to_string())?;
    let records = load_records(&cfg.cohort, cfg.seed).map_err(|e| e.to_string())?;
    for s in &report.sexes {
        let los: Vec<f64> = records
            .iter()
            .filter(|r| r.sex == s.sex)
            .map(|r| f64::from(r.los_days))
            .collect();
        let q = quartile_summary(&los).map_err(|e| e.to_string())?;
        let psi = los_threshold_psi(&q.inliers(&los)).map_err(|e| e.to_string())?;
        if psi != s.psi {
            return Err(format!(
                "{}: pipeline psi {} but stats give {psi}",
                s.sex.label(),
                s.psi
            ));
        }
    }
    Ok(())
}
