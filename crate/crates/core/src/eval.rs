//! Repeated-holdout evaluation, tree-count sweeps, fit timing and the paired
//! t-test used to compare two classifiers across datasets.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::time::Instant;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cascade::{self, CascadeConfig};
use crate::dataset::{stratified_split, Dataset};
use crate::error::{Error, Result};
use crate::seed;

/// Train fraction of every repetition.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Outcome of one train/test repetition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Repetition {
    pub repetition: usize,
    /// Seed of the train/test split.
    pub seed: u64,
    pub accuracy: f64,
    pub fit_seconds: f64,
    pub levels: usize,
    /// Hash of the train row indices; equal hashes mean equal splits.
    pub split_hash: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub dataset: String,
    pub config: CascadeConfig,
    pub repetitions: usize,
    pub runs: Vec<Repetition>,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_fit_seconds: f64,
    pub levels_grown: Vec<usize>,
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Seed of the split used in repetition `r`.
pub fn split_seed(base_seed: u64, r: usize) -> u64 {
    seed::derive(base_seed, &[r as u64, 0])
}

/// Seed of the cascade fitted in repetition `r`.
pub fn fit_seed(base_seed: u64, r: usize) -> u64 {
    seed::derive(base_seed, &[r as u64, 1])
}

fn hash_rows(rows: &[usize]) -> u64 {
    let mut h = DefaultHasher::new();
    rows.hash(&mut h);
    h.finish()
}

/// Runs one repetition: split, fit on 80%, score on the remaining 20%.
pub fn run_repetition(ds: &Dataset, cfg: &CascadeConfig, r: usize, base_seed: u64) -> Result<Repetition> {
    let sseed = split_seed(base_seed, r);
    let split = stratified_split(ds, TRAIN_FRACTION, sseed)?;
    let cfg = CascadeConfig {
        seed: fit_seed(base_seed, r),
        ..cfg.clone()
    };
    let start = Instant::now();
    let model = cascade::fit(&split.train, &cfg)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    let accuracy = model.accuracy(&split.test)?;
    Ok(Repetition {
        repetition: r,
        seed: sseed,
        accuracy,
        fit_seconds,
        levels: model.n_levels(),
        split_hash: hash_rows(&split.train_rows),
    })
}

/// Aggregates per-repetition results into a [`RunResult`].
pub fn aggregate(ds_name: &str, cfg: &CascadeConfig, mut runs: Vec<Repetition>) -> RunResult {
    runs.sort_by_key(|r| r.repetition);
    let accuracies: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&accuracies);
    let times: Vec<f64> = runs.iter().map(|r| r.fit_seconds).collect();
    RunResult {
        dataset: ds_name.to_string(),
        config: cfg.clone(),
        repetitions: runs.len(),
        levels_grown: runs.iter().map(|r| r.levels).collect(),
        mean_fit_seconds: mean_std(&times).0,
        accuracies,
        mean_accuracy,
        std_accuracy,
        runs,
    }
}

/// Mean test accuracy over `repetitions` random 80/20 splits.
pub fn evaluate(ds: &Dataset, cfg: &CascadeConfig, repetitions: usize, base_seed: u64) -> Result<RunResult> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    let runs = (0..repetitions)
        .map(|r| run_repetition(ds, cfg, r, base_seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&ds.name, cfg, runs))
}

/// One [`evaluate`] per tree count, all on the same splits.
pub fn sweep_trees(
    ds: &Dataset,
    cfg: &CascadeConfig,
    tree_counts: &[usize],
    repetitions: usize,
    base_seed: u64,
) -> Result<Vec<RunResult>> {
    if tree_counts.is_empty() {
        return Err(Error::Empty("no tree counts to sweep"));
    }
    tree_counts
        .iter()
        .map(|&t| {
            let cfg = CascadeConfig {
                trees_per_forest: t,
                ..cfg.clone()
            };
            evaluate(ds, &cfg, repetitions, base_seed)
        })
        .collect()
}

/// The result with the highest mean accuracy; earlier entries win ties.
pub fn best_over_trees<'a>(results: impl IntoIterator<Item = &'a RunResult>) -> Option<&'a RunResult> {
    results
        .into_iter()
        .fold(None, |best: Option<&RunResult>, r| match best {
            Some(b) if b.mean_accuracy >= r.mean_accuracy => Some(b),
            _ => Some(r),
        })
}

#[derive(Debug, Clone, Serialize)]
pub struct FitTiming {
    pub seconds: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Wall-clock time of `cascade::fit` alone, one entry per repetition.
pub fn measure_fit_time(ds: &Dataset, cfg: &CascadeConfig, repetitions: usize, base_seed: u64) -> Result<FitTiming> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    let mut seconds = Vec::with_capacity(repetitions);
    for r in 0..repetitions {
        let split = stratified_split(ds, TRAIN_FRACTION, split_seed(base_seed, r))?;
        let cfg = CascadeConfig {
            seed: fit_seed(base_seed, r),
            ..cfg.clone()
        };
        let start = Instant::now();
        cascade::fit(&split.train, &cfg)?;
        seconds.push(start.elapsed().as_secs_f64());
    }
    let (mean, std) = mean_std(&seconds);
    Ok(FitTiming { seconds, mean, std })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub mean_difference: f64,
    pub t_statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub ci95: (f64, f64),
    pub degrees_of_freedom: usize,
}

/// Paired t-test of `a - b` against zero mean.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(format!(
            "{} vs {} paired values",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Degenerate("a paired t-test needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_std(&d);
    if !(sd > 0.0) {
        return Err(Error::Degenerate("differences have zero variance".into()));
    }
    let n = d.len();
    let df = n - 1;
    let se = sd / (n as f64).sqrt();
    let t = mean / se;
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Degenerate(e.to_string()))?;
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    let q = dist.inverse_cdf(0.975);
    Ok(TTestResult {
        mean_difference: mean,
        t_statistic: t,
        p_value,
        ci95: (mean - q * se, mean + q * se),
        degrees_of_freedom: df,
    })
}
