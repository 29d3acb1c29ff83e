//! Grid execution and report assembly.

use std::fs;
use std::path::Path;

use awdf::eval::{self, RunResult, TTestResult};
use awdf::{load_csv, Dataset};
use rayon::prelude::*;
use serde::Serialize;

use crate::manifest;
use crate::spec::{ConfigCell, ExperimentSpec};

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATASET: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

/// A failure that ends the run with a specific exit code.
#[derive(Debug)]
pub struct Fatal {
    pub code: i32,
    pub message: String,
}

impl Fatal {
    pub fn usage(message: impl Into<String>) -> Fatal {
        Fatal {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub dataset: String,
    pub scheme: String,
    pub strategy: String,
    pub eta: String,
    pub trees: usize,
    pub repetition: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub fit_seconds: f64,
    pub levels: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub dataset: String,
    pub config: String,
    pub scheme: String,
    pub strategy: String,
    pub eta: Option<f64>,
    pub trees: usize,
    pub repetitions: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_fit_seconds: f64,
    pub mean_levels: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BestSummary {
    pub dataset: String,
    pub config: String,
    pub trees: usize,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TTestBlock {
    pub comparison: String,
    /// "max_over_trees" or "trees=<T>".
    pub mode: String,
    pub datasets: Vec<String>,
    pub result: Option<TTestResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellFailure {
    pub dataset: String,
    pub config: String,
    pub trees: usize,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub repetitions: usize,
    pub base_seed: u64,
    pub results: Vec<CellSummary>,
    pub best_over_trees: Vec<BestSummary>,
    pub t_tests: Vec<TTestBlock>,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub rows: Vec<CsvRow>,
    pub summary: Summary,
    pub table: String,
    /// `results[dataset][cell][tree index]`.
    pub results: Vec<Vec<Vec<Option<RunResult>>>>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.summary.failures.is_empty() {
            EXIT_OK
        } else {
            EXIT_PARTIAL
        }
    }
}

/// Loads every dataset of the spec and checks it against the manifest.
pub fn load_datasets(spec: &ExperimentSpec) -> Result<Vec<Dataset>, Fatal> {
    spec.datasets
        .iter()
        .map(|d| {
            let fail = |message: String| Fatal {
                code: EXIT_DATASET,
                message: format!("dataset '{}': {message}", d.name),
            };
            let mut ds = load_csv(&d.path, &d.label(), d.has_header).map_err(|e| fail(e.to_string()))?;
            ds.name = d.name.clone();
            manifest::check(&d.name, &ds).map_err(fail)?;
            Ok(ds)
        })
        .collect()
}

/// Runs every (dataset, config, tree count) cell of the grid.
///
/// Cells run on a pool of `jobs` threads; a failing cell is recorded and the
/// rest of the grid still runs.
pub fn execute(spec: &ExperimentSpec, jobs: usize) -> Result<Outcome, Fatal> {
    let cells = spec.cells().map_err(Fatal::usage)?;
    let datasets = load_datasets(spec)?;

    let mut work = Vec::new();
    for d in 0..datasets.len() {
        for (c, cell) in cells.iter().enumerate() {
            for t in 0..cell.trees.len() {
                work.push((d, c, t));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Fatal::usage(e.to_string()))?;
    let outputs: Vec<Result<RunResult, String>> = pool.install(|| {
        work.par_iter()
            .map(|&(d, c, t)| {
                let cell = &cells[c];
                let cfg = cell.cascade_config(&spec.settings, cell.trees[t])?;
                eval::evaluate(&datasets[d], &cfg, spec.repetitions, spec.base_seed).map_err(|e| e.to_string())
            })
            .collect()
    });

    let mut results: Vec<Vec<Vec<Option<RunResult>>>> = datasets
        .iter()
        .map(|_| cells.iter().map(|c| vec![None; c.trees.len()]).collect())
        .collect();
    let mut failures = Vec::new();
    for (&(d, c, t), out) in work.iter().zip(outputs) {
        match out {
            Ok(r) => results[d][c][t] = Some(r),
            Err(error) => failures.push(CellFailure {
                dataset: datasets[d].name.clone(),
                config: cells[c].long_label(),
                trees: cells[c].trees[t],
                error,
            }),
        }
    }

    let rows = csv_rows(&datasets, &cells, &results);
    let summary = summarize(spec, &datasets, &cells, &results, failures);
    let table = render_table(&datasets, &cells, &results);
    Ok(Outcome {
        rows,
        summary,
        table,
        results,
    })
}

fn csv_rows(datasets: &[Dataset], cells: &[ConfigCell], results: &[Vec<Vec<Option<RunResult>>>]) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for (d, ds) in datasets.iter().enumerate() {
        for (c, cell) in cells.iter().enumerate() {
            for (t, &trees) in cell.trees.iter().enumerate() {
                let Some(r) = &results[d][c][t] else { continue };
                for rep in &r.runs {
                    rows.push(CsvRow {
                        dataset: ds.name.clone(),
                        scheme: cell.scheme_name(),
                        strategy: cell.strategy_name(),
                        eta: cell.eta_text(),
                        trees,
                        repetition: rep.repetition,
                        seed: rep.seed,
                        accuracy: rep.accuracy,
                        fit_seconds: rep.fit_seconds,
                        levels: rep.levels,
                    });
                }
            }
        }
    }
    rows
}

/// Best mean accuracy over tree counts for one (dataset, cell).
fn best_of(results: &[Option<RunResult>]) -> Option<&RunResult> {
    eval::best_over_trees(results.iter().flatten())
}

fn summarize(
    spec: &ExperimentSpec,
    datasets: &[Dataset],
    cells: &[ConfigCell],
    results: &[Vec<Vec<Option<RunResult>>>],
    failures: Vec<CellFailure>,
) -> Summary {
    let mut cell_summaries = Vec::new();
    let mut best = Vec::new();
    for (d, ds) in datasets.iter().enumerate() {
        for (c, cell) in cells.iter().enumerate() {
            for (t, &trees) in cell.trees.iter().enumerate() {
                let Some(r) = &results[d][c][t] else { continue };
                let levels: Vec<f64> = r.levels_grown.iter().map(|&l| l as f64).collect();
                cell_summaries.push(CellSummary {
                    dataset: ds.name.clone(),
                    config: cell.long_label(),
                    scheme: cell.scheme_name(),
                    strategy: cell.strategy_name(),
                    eta: cell.eta,
                    trees,
                    repetitions: r.repetitions,
                    mean_accuracy: r.mean_accuracy,
                    std_accuracy: r.std_accuracy,
                    mean_fit_seconds: r.mean_fit_seconds,
                    mean_levels: eval::mean_std(&levels).0,
                });
            }
            if let Some(b) = best_of(&results[d][c]) {
                best.push(BestSummary {
                    dataset: ds.name.clone(),
                    config: cell.long_label(),
                    trees: b.config.trees_per_forest,
                    mean_accuracy: b.mean_accuracy,
                });
            }
        }
    }

    Summary {
        repetitions: spec.repetitions,
        base_seed: spec.base_seed,
        results: cell_summaries,
        best_over_trees: best,
        t_tests: t_tests(datasets, cells, results),
        failures,
    }
}

fn t_block(comparison: String, mode: String, names: Vec<String>, a: &[f64], b: &[f64]) -> TTestBlock {
    match eval::paired_t_test(a, b) {
        Ok(r) => TTestBlock {
            comparison,
            mode,
            datasets: names,
            result: Some(r),
            error: None,
        },
        Err(e) => TTestBlock {
            comparison,
            mode,
            datasets: names,
            result: None,
            error: Some(e.to_string()),
        },
    }
}

/// Paired t-tests across datasets of each weighted config against the
/// baseline, on max-over-trees accuracies and at every shared tree count.
fn t_tests(datasets: &[Dataset], cells: &[ConfigCell], results: &[Vec<Vec<Option<RunResult>>>]) -> Vec<TTestBlock> {
    let Some(base) = cells.iter().position(ConfigCell::is_baseline) else {
        return Vec::new();
    };
    let mut blocks = Vec::new();
    let weighted: Vec<usize> = (0..cells.len()).filter(|&c| !cells[c].is_baseline()).collect();

    for &c in &weighted {
        let comparison = format!("{} vs {}", cells[c].long_label(), cells[base].long_label());
        let (mut a, mut b, mut names) = (Vec::new(), Vec::new(), Vec::new());
        for (d, ds) in datasets.iter().enumerate() {
            if let (Some(x), Some(y)) = (best_of(&results[d][c]), best_of(&results[d][base])) {
                a.push(x.mean_accuracy * 100.0);
                b.push(y.mean_accuracy * 100.0);
                names.push(ds.name.clone());
            }
        }
        blocks.push(t_block(comparison.clone(), "max_over_trees".into(), names, &a, &b));

        for (t, &trees) in cells[c].trees.iter().enumerate() {
            let Some(bt) = cells[base].trees.iter().position(|&x| x == trees) else {
                continue;
            };
            let (mut a, mut b, mut names) = (Vec::new(), Vec::new(), Vec::new());
            for (d, ds) in datasets.iter().enumerate() {
                if let (Some(x), Some(y)) = (&results[d][c][t], &results[d][base][bt]) {
                    a.push(x.mean_accuracy * 100.0);
                    b.push(y.mean_accuracy * 100.0);
                    names.push(ds.name.clone());
                }
            }
            blocks.push(t_block(comparison.clone(), format!("trees={trees}"), names, &a, &b));
        }
    }

    if !weighted.is_empty() {
        // Best weighted config per dataset against the baseline.
        let (mut a, mut b, mut names) = (Vec::new(), Vec::new(), Vec::new());
        for (d, ds) in datasets.iter().enumerate() {
            let top = weighted
                .iter()
                .filter_map(|&c| best_of(&results[d][c]).map(|r| r.mean_accuracy))
                .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
            if let (Some(x), Some(y)) = (top, best_of(&results[d][base])) {
                a.push(x * 100.0);
                b.push(y.mean_accuracy * 100.0);
                names.push(ds.name.clone());
            }
        }
        blocks.push(t_block(
            format!("best weighted vs {}", cells[base].long_label()),
            "max_over_trees".into(),
            names,
            &a,
            &b,
        ));
    }
    blocks
}

/// Accuracy table: one row per dataset, one column per config, best cell
/// starred.
pub fn render_table(datasets: &[Dataset], cells: &[ConfigCell], results: &[Vec<Vec<Option<RunResult>>>]) -> String {
    let short: Vec<String> = cells.iter().map(ConfigCell::short_label).collect();
    let unique = short.iter().enumerate().all(|(i, s)| !short[..i].contains(s));
    let labels: Vec<String> = if unique {
        short
    } else {
        cells.iter().map(ConfigCell::long_label).collect()
    };

    let name_w = datasets
        .iter()
        .map(|d| d.name.len())
        .max()
        .unwrap_or(0)
        .max("dataset".len());
    let col_w: Vec<usize> = labels.iter().map(|l| l.len().max(7)).collect();
    let mut out = format!("{:<name_w$}", "dataset");
    for (l, w) in labels.iter().zip(&col_w) {
        out.push_str(&format!(" | {l:>w$}"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(out.trim_end().len()));
    out.push('\n');

    for (d, ds) in datasets.iter().enumerate() {
        let values: Vec<Option<f64>> = (0..cells.len())
            .map(|c| best_of(&results[d][c]).map(|r| r.mean_accuracy * 100.0))
            .collect();
        let top = values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push_str(&format!("{:<name_w$}", ds.name));
        for (v, w) in values.iter().zip(&col_w) {
            let text = match v {
                Some(v) if *v == top => format!("*{v:.2}"),
                Some(v) => format!("{v:.2}"),
                None => "failed".into(),
            };
            out.push_str(&format!(" | {text:>w$}"));
        }
        out.push('\n');
    }
    out
}

/// Writes `results.csv` and `summary.json` into `dir`.
pub fn write_reports(outcome: &Outcome, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("results.csv"))?;
    for row in &outcome.rows {
        w.serialize(row)?;
    }
    if outcome.rows.is_empty() {
        w.write_record([
            "dataset",
            "scheme",
            "strategy",
            "eta",
            "trees",
            "repetition",
            "seed",
            "accuracy",
            "fit_seconds",
            "levels",
        ])?;
    }
    w.flush()?;
    let json = serde_json::to_string_pretty(&outcome.summary).map_err(std::io::Error::other)?;
    fs::write(dir.join("summary.json"), json + "\n")
}
