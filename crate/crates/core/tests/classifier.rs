use noisy_ifa::classifier::{
    center_classes, fit_classifier, misclassification_rate, split_experiment, stratified_split,
};
use noisy_ifa::linmodel::center;
use noisy_ifa::rng;
use noisy_ifa::simbench::{generate, SyntheticTruth, TestDensity, TrueDensity};
use noisy_ifa::{ClassifierConfig, ClassifierModel, LdaModel, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

fn normal_rows(n: usize, mean: &[f64], seed: u64) -> Matrix<f64> {
    let mut r = rng::stream(seed, &[]);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| mean.iter().map(|m| m + r.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    Matrix::from_rows(&rows).unwrap()
}

fn with_known_noise(s2: f64) -> ClassifierConfig {
    let mut cfg = ClassifierConfig::default();
    cfg.aggregate.candidate.known_sigma2 = Some(s2);
    cfg
}

#[test]
fn identical_classes_tie_to_the_first() {
    let x = normal_rows(300, &[0.0, 0.0], 1);
    let data = center(x.clone()).unwrap();
    let agg = noisy_ifa::aggregator::fit_aggregate(&data, None, &Default::default()).unwrap();
    let model = ClassifierModel::from_parts(vec![agg.clone(), agg], vec![0.5, 0.5]).unwrap();
    for p in x.row_iter() {
        assert_eq!(model.predict(p), 0);
    }
}

#[test]
fn supplied_priors_are_kept() {
    let a = center(normal_rows(200, &[0.0, 0.0], 2)).unwrap();
    let b = center(normal_rows(200, &[3.0, 0.0], 3)).unwrap();
    let mut cfg = ClassifierConfig::default();
    cfg.priors = Some(vec![0.9, 0.1]);
    let model = fit_classifier(&[a, b], &cfg).unwrap();
    assert_eq!(model.priors(), &[0.9, 0.1]);
}

#[test]
fn small_class_is_rejected_by_name() {
    let a = center(normal_rows(200, &[0.0, 0.0], 4)).unwrap();
    let b = center(normal_rows(20, &[3.0, 0.0], 5)).unwrap();
    let err = fit_classifier(&[a, b], &ClassifierConfig::default()).unwrap_err();
    assert!(err.to_string().contains("class 1"), "{err}");
}

#[test]
fn one_dimensional_boundary_near_the_midpoint() {
    let a = center(normal_rows(4000, &[0.0], 6)).unwrap();
    let b = center(normal_rows(4000, &[2.0], 7)).unwrap();
    let mut cfg = with_known_noise(0.25);
    cfg.priors = Some(vec![0.5, 0.5]);
    let model = fit_classifier(&[a, b], &cfg).unwrap();
    let (mut lo, mut hi) = (0.0, 2.0);
    assert_eq!(model.predict(&[lo]), 0);
    assert_eq!(model.predict(&[hi]), 1);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if model.predict(&[mid]) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - 1.0).abs() < 0.15, "boundary at {lo}");
}

fn class_truths() -> [SyntheticTruth; 2] {
    let a0 = Matrix::from_columns(&[[1.0, 0.0]]).unwrap();
    let a1 = Matrix::from_columns(&[[0.6, 0.8]]).unwrap();
    [
        SyntheticTruth::with_mixing(a0, &[TestDensity::Normal], 3.0, 10).unwrap(),
        SyntheticTruth::with_mixing(a1, &[TestDensity::Normal], 3.0, 11)
            .unwrap()
            .with_offset(vec![0.0, 2.5])
            .unwrap(),
    ]
}

#[test]
fn test_error_close_to_bayes_risk() {
    let truths = class_truths();
    let train: Vec<_> = truths
        .iter()
        .enumerate()
        .map(|(j, t)| center(generate(t, 2000, 20 + j as u64).unwrap().x).unwrap())
        .collect();
    let model = fit_classifier(&train, &ClassifierConfig::default()).unwrap();
    let dens: Vec<TrueDensity> = truths.iter().map(|t| TrueDensity::new(t).unwrap()).collect();

    let mut wrong_plugin = 0usize;
    let mut wrong_bayes = 0usize;
    let per_class = 20_000;
    for (j, t) in truths.iter().enumerate() {
        let x = generate(t, per_class, 30 + j as u64).unwrap().x;
        for p in x.row_iter() {
            let bayes = if dens[1].eval(p) > dens[0].eval(p) { 1 } else { 0 };
            wrong_bayes += usize::from(bayes != j);
            wrong_plugin += usize::from(model.predict(p) != j);
        }
    }
    let total = (2 * per_class) as f64;
    let (plugin, bayes) = (wrong_plugin as f64 / total, wrong_bayes as f64 / total);
    assert!(plugin - bayes <= 0.05, "plug-in {plugin}, Bayes {bayes}");
}

#[test]
fn lda_error_matches_gaussian_risk() {
    let (m0, m1) = ([0.0, 0.0, 0.0], [1.5, 1.0, 0.0]);
    let lda = LdaModel::fit(&[normal_rows(2000, &m0, 40), normal_rows(2000, &m1, 41)], None).unwrap();
    let test0 = normal_rows(20_000, &m0, 42);
    let test1 = normal_rows(20_000, &m1, 43);
    let mut pred = lda.predict_batch(&test0);
    pred.extend(lda.predict_batch(&test1));
    let truth: Vec<usize> = (0..40_000).map(|i| usize::from(i >= 20_000)).collect();
    let rate = misclassification_rate(&pred, &truth, 2).unwrap();
    let delta = (1.5f64 * 1.5 + 1.0).sqrt();
    let risk = Normal::new(0.0, 1.0).unwrap().cdf(-delta / 2.0);
    assert!((rate - risk).abs() < 0.03, "rate {rate} vs {risk}");
}

#[test]
fn predictions_are_deterministic_and_survive_serialisation() {
    let truths = class_truths();
    let train: Vec<_> = truths
        .iter()
        .enumerate()
        .map(|(j, t)| center(generate(t, 500, 50 + j as u64).unwrap().x).unwrap())
        .collect();
    let cfg = ClassifierConfig::default();
    let a = fit_classifier(&train, &cfg).unwrap();
    let b = fit_classifier(&train, &cfg).unwrap();
    let test = generate(&truths[1], 500, 52).unwrap().x;
    assert_eq!(a.predict_batch(&test), b.predict_batch(&test));
    let back = ClassifierModel::<f64>::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(back, a);
    for p in test.row_iter() {
        let (x, y) = (a.log_scores(p), back.log_scores(p));
        assert!(x.iter().zip(&y).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
}

#[test]
fn split_experiment_reports_every_split() {
    let x0 = normal_rows(150, &[0.0, 0.0], 60);
    let x1 = normal_rows(90, &[2.5, 0.0], 61);
    let mut rows: Vec<Vec<f64>> = x0.row_iter().map(<[f64]>::to_vec).collect();
    rows.extend(x1.row_iter().map(<[f64]>::to_vec));
    let points = Matrix::from_rows(&rows).unwrap();
    let labels: Vec<usize> = (0..240).map(|i| usize::from(i >= 150)).collect();
    let out = split_experiment(&points, &labels, 5, 2.0 / 3.0, &ClassifierConfig::default(), 62).unwrap();
    assert_eq!(out.len(), 5);
    for (s, o) in out.iter().enumerate() {
        assert_eq!(o.split, s);
        assert_eq!(o.train_rows, 100 + 60);
        assert_eq!(o.test_rows, 80);
        assert!((0.0..=1.0).contains(&o.plugin_rate) && (0.0..=1.0).contains(&o.lda_rate));
        assert!(o.lda_rate < 0.2 && o.plugin_rate < 0.2);
    }
}

#[test]
fn stratification_within_one_sample_per_class() {
    let labels: Vec<usize> = (0..257).map(|i| i % 3).collect();
    for seed in 0..10 {
        let (tr, te) = stratified_split(&labels, 2.0 / 3.0, seed).unwrap();
        assert_eq!(tr.len() + te.len(), labels.len());
        for j in 0..3 {
            let nj = labels.iter().filter(|&&l| l == j).count() as f64;
            let tj = tr.iter().filter(|&&i| labels[i] == j).count() as f64;
            assert!((tj - 2.0 * nj / 3.0).abs() <= 1.0);
        }
    }
}

#[test]
fn centered_groups_keep_their_means() {
    let g = vec![normal_rows(50, &[1.0, 2.0], 70), normal_rows(60, &[-1.0, 0.0], 71)];
    let c = center_classes(g.clone()).unwrap();
    for (m, d) in g.iter().zip(&c) {
        let mean0 = m.column(0).iter().sum::<f64>() / m.rows() as f64;
        assert!((d.center()[0] - mean0).abs() < 1e-12);
    }
}
