use proptest::prelude::*;
use tabkit_core::classify::{fit, ModelKind, ModelParams, TrainedClassifier};
use tabkit_core::modelsel::metrics::f1_binary;
use tabkit_core::modelsel::{
    auc, confusion, decode_params, evaluate, grid_search, kfold_splits, GridSearchOptions, ParamGrid, Scoring,
};
use tabkit_core::{Matrix, SplitMix64};

/// Fraction of (positive, negative) pairs ranked correctly, ties one half.
fn pairwise_auc(y: &[u8], s: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in (0..y.len()).filter(|&i| y[i] == 1) {
        for j in (0..y.len()).filter(|&j| y[j] == 0) {
            den += 1.0;
            num += if s[i] > s[j] {
                1.0
            } else if s[i] == s[j] {
                0.5
            } else {
                0.0
            };
        }
    }
    num / den
}

fn two_class_labels(max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, 2..max).prop_filter("both classes", |y| y.contains(&0) && y.contains(&1))
}

fn labels_and_scores() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    two_class_labels(60).prop_flat_map(|y| {
        let n = y.len();
        // Coarse scores so ties occur.
        (Just(y), prop::collection::vec((-8i32..8).prop_map(|v| f64::from(v) / 4.0), n))
    })
}

proptest! {
    #[test]
    fn auc_matches_pairwise_count((y, s) in labels_and_scores()) {
        let a = auc(&y, &s).unwrap();
        prop_assert!((a - pairwise_auc(&y, &s)).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_under_increasing_transform((y, s) in labels_and_scores(), shift in -5.0..5.0f64) {
        let t: Vec<f64> = s.iter().map(|v| (v * 3.0 + shift).exp() + v.powi(3)).collect();
        prop_assert_eq!(auc(&y, &s).unwrap(), auc(&y, &t).unwrap());
    }

    #[test]
    fn accuracy_from_confusion_is_agreement_rate(
        pairs in prop::collection::vec((0u8..2, 0u8..2), 1..100),
    ) {
        let (t, p): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let cm = confusion(&t, &p).unwrap();
        let agree = t.iter().zip(&p).filter(|(a, b)| a == b).count() as f64 / t.len() as f64;
        prop_assert!((cm.accuracy() - agree).abs() <= 1e-12);
        prop_assert_eq!(cm.total(), t.len());
    }

    #[test]
    fn weighted_f1_equals_macro_f1_on_balanced_support(
        half in 1usize..40,
        flips in prop::collection::vec(any::<bool>(), 80),
    ) {
        let y: Vec<u8> = (0..2 * half).map(|i| u8::from(i >= half)).collect();
        let p: Vec<u8> = y.iter().zip(&flips).map(|(&v, &f)| if f { 1 - v } else { v }).collect();
        let s: Vec<f64> = p.iter().map(|&v| f64::from(v)).collect();
        let r = evaluate(&y, &p, &s).unwrap();
        prop_assert!((r.weighted_avg.f1 - r.macro_avg.f1).abs() <= 1e-12);
        prop_assert!((r.binary.f1 - f1_binary(&y, &p).unwrap()).abs() <= 1e-12);
    }
}

fn random_data(n: usize, p: usize, seed: u64) -> (Matrix, Vec<u8>) {
    let mut rng = SplitMix64::new(seed);
    let mut data = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let class = u8::from(i % 2 == 0);
        y.push(class);
        for j in 0..p {
            let shift = if j == 0 { f64::from(class) * 1.2 } else { 0.0 };
            data.push(rng.next_f64() * 2.0 - 1.0 + shift);
        }
    }
    (Matrix::from_vec(n, p, data).unwrap(), y)
}

/// Mean fold F1 of `params`, computed fold by fold from the raw counts.
fn manual_cv_f1(params: &ModelParams, x: &Matrix, y: &[u8], folds: usize, seed: u64) -> f64 {
    let splits = kfold_splits(y, folds, seed).unwrap();
    let mut total = 0.0;
    for (train, held) in &splits {
        let y_train: Vec<u8> = train.iter().map(|&i| y[i]).collect();
        let model = fit(params, &x.select_rows(train), &y_train).unwrap().model;
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for &i in held {
            match (y[i], model.predict(x.row(i)).unwrap()) {
                (1, 1) => tp += 1.0,
                (0, 1) => fp += 1.0,
                (1, 0) => fn_ += 1.0,
                _ => {}
            }
        }
        let denom = 2.0 * tp + fp + fn_;
        total += if denom == 0.0 { 0.0 } else { 2.0 * tp / denom };
    }
    total / splits.len() as f64
}

#[test]
fn grid_search_agrees_with_manual_kfold() {
    let grids = [
        (ModelKind::Knn, "n_neighbors=1,9;weights=uniform;metric=euclidean"),
        (ModelKind::Logreg, "penalty=l2;C=0.01,10"),
        (ModelKind::Tree, "max_depth=1,4"),
        (ModelKind::Svm, "C=0.1,10;gamma=scale"),
    ];
    for (kind, text) in grids {
        for seed in 0..4u64 {
            let (x, y) = random_data(36, 3, 100 + seed);
            let grid: ParamGrid = text.parse().unwrap();
            let opts = GridSearchOptions {
                folds: 4,
                seed,
                scoring: Scoring::F1,
            };
            let out = grid_search(kind, &grid, &x, &y, &opts).unwrap();
            let configs = grid.configs();
            assert_eq!(configs.len(), 2);
            let manual: Vec<f64> = configs
                .iter()
                .map(|c| manual_cv_f1(&decode_params(kind, c).unwrap(), &x, &y, 4, seed))
                .collect();
            for (r, m) in out.cv.configs.iter().zip(&manual) {
                assert!((r.mean - m).abs() < 1e-12, "{kind} seed {seed}: {} vs {m}", r.mean);
            }
            let expect = if manual[1] > manual[0] { 1 } else { 0 };
            assert_eq!(out.best_index, expect, "{kind} seed {seed}");
        }
    }
}

fn distinct_points(n: usize, p: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0..10.0f64, p), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_prediction_ignores_training_order(
        rows in distinct_points(16, 2),
        labels in prop::collection::vec(0u8..2, 16),
        queries in distinct_points(5, 2),
        k in 1usize..10,
        distance_weighting in any::<bool>(),
        perm_seed in any::<u64>(),
    ) {
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let x = Matrix::from_rows(&rows).unwrap();
        // Equal distances from a query are where the index tiebreak binds.
        for q in &queries {
            let mut d: Vec<f64> = rows.iter().map(|r| (r[0] - q[0]).powi(2) + (r[1] - q[1]).powi(2)).collect();
            d.sort_by(f64::total_cmp);
            prop_assume!(d.windows(2).all(|w| w[0] != w[1]));
        }
        let grid: ParamGrid = format!(
            "n_neighbors={k};weights={};metric=euclidean",
            if distance_weighting { "distance" } else { "uniform" }
        )
        .parse()
        .unwrap();
        let params = decode_params(ModelKind::Knn, &grid.configs()[0]).unwrap();
        let a = fit(&params, &x, &labels).unwrap().model;

        let mut order: Vec<usize> = (0..rows.len()).collect();
        SplitMix64::new(perm_seed).shuffle(&mut order);
        let xp = x.select_rows(&order);
        let yp: Vec<u8> = order.iter().map(|&i| labels[i]).collect();
        let b = fit(&params, &xp, &yp).unwrap().model;
        for q in &queries {
            prop_assert_eq!(a.predict(q).unwrap(), b.predict(q).unwrap());
            prop_assert!((a.score(q).unwrap() - b.score(q).unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn every_model_predicts_the_side_of_its_score() {
    let (x, y) = random_data(60, 4, 9);
    let (probe, _) = random_data(80, 4, 10);
    for kind in [
        ModelKind::Logreg,
        ModelKind::Tree,
        ModelKind::Forest,
        ModelKind::Knn,
        ModelKind::Svm,
    ] {
        let model: TrainedClassifier = fit(&ModelParams::default_for(kind), &x, &y).unwrap().model;
        let t = model.threshold();
        for row in x.row_iter().chain(probe.row_iter()) {
            let s = model.score(row).unwrap();
            match model.predict(row).unwrap() {
                1 => assert!(s >= t, "{kind}: predicted 1 with score {s}"),
                _ => assert!(s <= t, "{kind}: predicted 0 with score {s}"),
            }
        }
    }
}
