//! The five subcommands. Each validates its whole configuration before
//! touching the filesystem.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use serde::Serialize;

use noisy_ifa::aggregator::fit_aggregate;
use noisy_ifa::classifier::{
    center_classes, fit_classifier, group_by_label, misclassification_rate, split_experiment, LdaModel,
};
use noisy_ifa::io::{feature_header, read_matrix, split_labels, write_matrix_file};
use noisy_ifa::simbench::harness::five_numbers;
use noisy_ifa::simbench::{generate, run_benchmark, BenchmarkConfig, I1Config, SyntheticTruth, TestDensity};
use noisy_ifa::{
    linmodel, AggregateConfig, AggregateDensity, CandidateConfig, ClassifierConfig, ClassifierModel, GridSpec,
    KernelId, Matrix, McConfig,
};

use crate::config::Settings;
use crate::error::{io_err, CliError};

type Res<T> = Result<T, CliError>;

fn ensure_dir(out: &Path) -> Res<()> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Res<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Numeric(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn factors(s: &Settings) -> Res<Vec<TestDensity>> {
    let ids: Vec<u8> = s.list("factors")?.unwrap_or_else(|| vec![2]);
    if ids.is_empty() {
        return Err(CliError::Validation("factors: at least one id required".into()));
    }
    ids.into_iter()
        .map(|i| TestDensity::from_id(i).map_err(CliError::from))
        .collect()
}

/// Candidate settings shared by fit-density, classify and benchmark.
pub fn candidate_config(s: &Settings) -> Res<CandidateConfig> {
    let kernel: KernelId = s
        .raw("kernel")
        .unwrap_or("sinc")
        .parse()
        .map_err(|e: noisy_ifa::IfaError| CliError::Validation(format!("kernel: {e}")))?;
    let points = s.usize_in("grid-points", 1024, 4, 1 << 24)?;
    if !points.is_power_of_two() {
        return Err(CliError::Validation(format!("grid-points = {points} is not a power of two")));
    }
    let q0 = s.usize_in("mc-q0", 4096, 1, usize::MAX)?;
    let max_draws = s.usize_in("mc-max-draws", 1 << 20, q0, usize::MAX)?;
    let cfg = CandidateConfig {
        kernel,
        grid: GridSpec { points, ..GridSpec::default() },
        bandwidth_scale: s.f64_where("bandwidth-scale", 1.0, "(0, inf)", |v| v > 0.0 && v.is_finite())?,
        ball_radius_multiplier: s.f64_where("ball-multiplier", 1.2, "(0, inf)", |v| v > 0.0 && v.is_finite())?,
        ball_quantile: s.f64_where("ball-quantile", 0.995, "(0, 1]", |v| v > 0.0 && v <= 1.0)?,
        mc: McConfig {
            q0,
            tol: s.f64_where("mc-tol", 0.005, "(0, inf)", |v| v > 0.0 && v.is_finite())?,
            max_draws,
            ..McConfig::default()
        },
        known_sigma2: match s.opt_f64("known-sigma2")? {
            Some(v) if !(v > 0.0 && v.is_finite()) => {
                return Err(CliError::Validation(format!("known-sigma2 = {v} must be positive")))
            }
            other => other,
        },
        ..CandidateConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn aggregate_config(s: &Settings, seed: u64) -> Res<AggregateConfig> {
    Ok(AggregateConfig {
        candidate: candidate_config(s)?,
        split_c: s.f64_where("split-c", 1.0, "(0, inf)", |v| v > 0.0 && v.is_finite())?,
        seed,
    })
}

fn max_rank(s: &Settings, d: usize, known: bool) -> Res<Option<usize>> {
    let upper = if known { d } else { d.saturating_sub(1) };
    match s.opt_usize("max-rank")? {
        None => Ok(None),
        Some(m) if m >= 1 && m <= upper => Ok(Some(m)),
        Some(m) => Err(CliError::Validation(format!("max-rank = {m} is outside 1..={upper}"))),
    }
}

pub fn simulate(s: &Settings, seed: u64, out: &Path) -> Res<()> {
    let d = s.usize_in("d", 2, 1, 64)?;
    let laws = factors(s)?;
    if laws.len() > d {
        return Err(CliError::Validation(format!(
            "{} factors exceed dimension d = {d}",
            laws.len()
        )));
    }
    let snr = s.f64_where("snr", 3.0, "(0, inf]", |v| v > 0.0)?;
    let n = s.usize_in("n", 1000, 1, usize::MAX)?;
    let truth = SyntheticTruth::new(d, &laws, snr, seed)?;
    let sample = generate(&truth, n, seed)?;
    ensure_dir(out)?;
    write_matrix_file(out.join("data.csv"), Some(&feature_header(d)), &sample.x)?;
    write_json(&out.join("truth.json"), &truth)
}

#[derive(Serialize)]
struct CandidateReport {
    k: usize,
    sigma2: f64,
    weight: f64,
    sq_integral: f64,
    sq_integral_stderr: f64,
    mc_draws: usize,
    sup_estimate: f64,
    bandwidth: Option<f64>,
}

#[derive(Serialize)]
struct FitReport {
    n: usize,
    d: usize,
    n1: usize,
    n2: usize,
    weights: Vec<f64>,
    beta: f64,
    l0: f64,
    ball_radius: f64,
    candidates: Vec<CandidateReport>,
    fit_seconds: f64,
}

pub fn fit_density(s: &Settings, seed: u64, out: &Path) -> Res<()> {
    let input = PathBuf::from(s.required("input")?);
    let cfg = aggregate_config(s, seed)?;
    let table = read_matrix::<f64>(&input)?;
    let d = table.values.cols();
    let m = max_rank(s, d, cfg.candidate.known_sigma2.is_some())?;
    if table.values.rows() < 4 {
        return Err(CliError::Validation(format!(
            "{}: need at least 4 rows, found {}",
            input.display(),
            table.values.rows()
        )));
    }
    let n = table.values.rows();
    let t0 = Instant::now();
    let data = linmodel::center(table.values)?;
    let agg = fit_aggregate(&data, m, &cfg)?;
    let secs = t0.elapsed().as_secs_f64();

    ensure_dir(out)?;
    agg.save(out.join("model.json"))?;
    let report = FitReport {
        n,
        d,
        n1: agg.n1(),
        n2: agg.n2(),
        weights: agg.weights().to_vec(),
        beta: agg.beta(),
        l0: agg.l0(),
        ball_radius: agg.ball().radius(),
        candidates: agg
            .candidates()
            .iter()
            .zip(agg.weights())
            .map(|(c, &w)| CandidateReport {
                k: c.k(),
                sigma2: c.frame().sigma2(),
                weight: w,
                sq_integral: c.sq_integral().estimate,
                sq_integral_stderr: c.sq_integral().stderr,
                mc_draws: c.sq_integral().draws,
                sup_estimate: c.sup_estimate(),
                bandwidth: c.marginals().first().and_then(|k| k.bandwidth()),
            })
            .collect(),
        fit_seconds: secs,
    };
    write_json(&out.join("report.json"), &report)
}

pub fn eval_density(s: &Settings, out: &Path) -> Res<()> {
    let model = AggregateDensity::<f64>::load(s.required("model")?)?;
    let points_path = PathBuf::from(s.required("points")?);
    let pts = read_matrix::<f64>(&points_path)?.values;
    if pts.cols() != model.dim() {
        return Err(CliError::Validation(format!(
            "{}: points have {} columns, the model expects d = {}",
            points_path.display(),
            pts.cols(),
            model.dim()
        )));
    }
    let values = model.eval_batch(&pts);
    ensure_dir(out)?;
    let path = out.join("density.csv");
    let f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = BufWriter::new(f);
    (|| {
        writeln!(w, "density")?;
        for v in values {
            writeln!(w, "{v:.16e}")?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(&path, e))
}

fn classifier_config(s: &Settings, seed: u64) -> Res<ClassifierConfig> {
    let priors: Option<Vec<f64>> = s.list("priors")?;
    Ok(ClassifierConfig {
        aggregate: aggregate_config(s, seed)?,
        max_rank: None,
        min_class_size: s.usize_in("min-class-size", 50, 4, usize::MAX)?,
        priors,
    })
}

#[derive(Serialize)]
struct ClassifyReport {
    classes: usize,
    priors: Vec<f64>,
    test_rows: usize,
    labeled: bool,
    misclassification_rate: Option<f64>,
    lda_misclassification_rate: Option<f64>,
    unseen_labels: usize,
}

#[derive(Serialize)]
struct SplitSummary {
    method: &'static str,
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
}

#[derive(Serialize)]
struct SplitReport {
    splits: usize,
    train_fraction: f64,
    summary: Vec<SplitSummary>,
}

pub fn classify(s: &Settings, seed: u64, out: &Path) -> Res<()> {
    let mut cfg = classifier_config(s, seed)?;
    let splits = s.usize_in("splits", 0, 0, 100_000)?;
    let frac = s.f64_where("train-fraction", 2.0 / 3.0, "(0, 1)", |v| v > 0.0 && v < 1.0)?;
    let train = s.raw("train").map(PathBuf::from);
    let test = s.raw("test").map(PathBuf::from);
    let model_path = s.raw("model").map(PathBuf::from);

    if splits > 0 {
        let train = train.ok_or_else(|| CliError::Validation("split mode needs 'train'".into()))?;
        let (x, y) = noisy_ifa::io::read_labeled::<f64>(&train)?;
        cfg.max_rank = max_rank(s, x.cols(), cfg.aggregate.candidate.known_sigma2.is_some())?;
        let outcomes = split_experiment(&x, &y, splits, frac, &cfg, seed)?;
        ensure_dir(out)?;
        let mut csv = String::from("split,method,rate\n");
        for o in &outcomes {
            csv += &format!("{},plugin,{:.16e}\n{},lda,{:.16e}\n", o.split, o.plugin_rate, o.split, o.lda_rate);
        }
        let p = out.join("splits.csv");
        fs::write(&p, csv).map_err(|e| io_err(&p, e))?;
        let summ = |method, v: Vec<f64>| {
            let [min, q1, median, q3, max] = five_numbers(&v);
            SplitSummary { method, min, q1, median, q3, max }
        };
        let report = SplitReport {
            splits,
            train_fraction: frac,
            summary: vec![
                summ("plugin", outcomes.iter().map(|o| o.plugin_rate).collect()),
                summ("lda", outcomes.iter().map(|o| o.lda_rate).collect()),
            ],
        };
        return write_json(&out.join("report.json"), &report);
    }

    let test = test.ok_or_else(|| CliError::Validation("missing required key 'test'".into()))?;
    let (model, lda) = match (train, model_path) {
        (Some(_), Some(_)) => {
            return Err(CliError::Validation("give either 'train' or 'model', not both".into()))
        }
        (None, None) => return Err(CliError::Validation("classify needs 'train' or 'model'".into())),
        (None, Some(p)) => (ClassifierModel::<f64>::load(&p)?, None),
        (Some(p), None) => {
            let (x, y) = noisy_ifa::io::read_labeled::<f64>(&p)?;
            let classes = y.iter().max().map_or(0, |m| m + 1);
            cfg.max_rank = max_rank(s, x.cols(), cfg.aggregate.candidate.known_sigma2.is_some())?;
            let groups = group_by_label(&x, &y, classes)?;
            let lda = LdaModel::fit(&groups, cfg.priors.as_deref())?;
            (fit_classifier(&center_classes(groups)?, &cfg)?, Some(lda))
        }
    };
    let d = model.dim();
    let table = read_matrix::<f64>(&test)?;
    let name = test.display().to_string();
    let (points, labels) = if table.values.cols() == d + 1 {
        let (x, y) = split_labels(table, &name)?;
        (x, Some(y))
    } else if table.values.cols() == d {
        (table.values, None)
    } else {
        return Err(CliError::Validation(format!(
            "{name}: expected {d} feature columns (plus an optional label), found {}",
            table.values.cols()
        )));
    };

    let predicted = model.predict_batch(&points);
    let classes = model.classes();
    let (rate, lda_rate, unseen) = match &labels {
        Some(y) => {
            let unseen = y.iter().filter(|&&l| l >= classes).count();
            if unseen > 0 {
                warn!("{unseen} test labels were not seen in training; counted as errors");
            }
            let lda_rate = match &lda {
                Some(l) => Some(misclassification_rate(&l.predict_batch(&points), y, classes)?),
                None => None,
            };
            (Some(misclassification_rate(&predicted, y, classes)?), lda_rate, unseen)
        }
        None => (None, None, 0),
    };

    ensure_dir(out)?;
    if lda.is_some() {
        model.save(out.join("classifier.json"))?;
    }
    write_predictions(&out.join("predictions.csv"), &model, &points, &predicted)?;
    let report = ClassifyReport {
        classes,
        priors: model.priors().to_vec(),
        test_rows: points.rows(),
        labeled: labels.is_some(),
        misclassification_rate: rate,
        lda_misclassification_rate: lda_rate,
        unseen_labels: unseen,
    };
    write_json(&out.join("report.json"), &report)
}

fn write_predictions(path: &Path, model: &ClassifierModel<f64>, pts: &Matrix<f64>, pred: &[usize]) -> Res<()> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    (|| {
        write!(w, "row,predicted")?;
        for j in 0..model.classes() {
            write!(w, ",log_score_{j}")?;
        }
        writeln!(w)?;
        for (i, (x, p)) in pts.row_iter().zip(pred).enumerate() {
            write!(w, "{i},{p}")?;
            for v in model.log_scores(x) {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))
}

pub fn benchmark(s: &Settings, seed: u64, out: &Path) -> Res<()> {
    let d = s.usize_in("d", 2, 1, 64)?;
    let laws = factors(s)?;
    let candidate = candidate_config(s)?;
    let cfg = BenchmarkConfig {
        d,
        snr: s.f64_where("snr", 3.0, "(0, inf)", |v| v > 0.0 && v.is_finite())?,
        n: s.usize_in("n", 1000, 20, usize::MAX)?,
        replications: s.usize_in("replications", 50, 1, usize::MAX)?,
        seed,
        baseline: s.bool("baseline", true)?,
        max_rank: max_rank(s, d, candidate.known_sigma2.is_some())?,
        factors: laws,
        candidate,
        split_c: s.f64_where("split-c", 1.0, "(0, inf)", |v| v > 0.0 && v.is_finite())?,
        i1: I1Config {
            box_stds: s.f64_where("box-stds", 6.0, "(0, inf)", |v| v > 0.0 && v.is_finite())?,
            spacing_factor: s.f64_where("spacing-factor", 0.8, "(0, inf)", |v| v > 0.0 && v.is_finite())?,
            max_nodes: s.usize_in("max-nodes", 20_000_000, 8, usize::MAX)?,
            is_draws: s.usize_in("is-draws", 100_000, 2, usize::MAX)?,
            ..I1Config::default()
        },
        ..BenchmarkConfig::default()
    };
    cfg.validate()?;
    let result = run_benchmark(&cfg)?;
    ensure_dir(out)?;
    result.write(&out.join("benchmark.json"), &out.join("benchmark.csv"))?;
    Ok(())
}
