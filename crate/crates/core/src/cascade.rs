//! The level-by-level cascade.
//!
//! Level 1 sees the raw features. Every deeper level sees the raw features
//! followed by the class vectors of the previous level's forests, so its
//! arity is `m + M * C`. Training-time class vectors come from cross-fitting
//! so that a level never learns from vectors produced by trees that saw the
//! same instance.
//!
//! Between levels, each instance's weight is recomputed from the mean of its
//! class vectors. With a threshold `eta`, instances that the current level
//! already classifies confidently and correctly leave the training set for
//! good, and at prediction time an instance stops at the first level whose
//! mean vector reaches `eta`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{stratified_split, Dataset};
use crate::error::{Error, Result};
use crate::forest::{cross_fit_class_vectors, Forest, ForestParams, Strategy};
use crate::seed;
use crate::tree::{argmax, ClassVector, TrainView, TreeKind, TreeParams};
use crate::weighting::{
    instance_weight, mean_class_vector, screening_indicator, update_weights, weight_screening_indicator, WeightScheme,
};

/// How the number of levels is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EarlyStop {
    /// Hold out this fraction of the training set (stratified) and keep the
    /// level with the best holdout accuracy.
    Holdout { fraction: f64 },
    /// Score each level by the accuracy of its cross-fitted training vectors.
    CrossFit,
    /// Grow until another stopping condition fires.
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeConfig {
    pub forests_per_level: usize,
    pub trees_per_forest: usize,
    /// `None` runs the unweighted cascade.
    pub weight_scheme: Option<WeightScheme>,
    pub strategy: Strategy,
    /// Screening threshold; `None` disables screening.
    pub eta: Option<f64>,
    pub max_levels: usize,
    pub early_stop: EarlyStop,
    /// Levels without improvement before growth stops.
    pub early_stop_patience: usize,
    /// Folds for training-time class vectors; `None` uses resubstitution.
    pub crossfit_k: Option<usize>,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            forests_per_level: 4,
            trees_per_forest: 100,
            weight_scheme: None,
            strategy: Strategy::Baseline,
            eta: None,
            max_levels: 20,
            early_stop: EarlyStop::Holdout { fraction: 0.2 },
            early_stop_patience: 1,
            crossfit_k: Some(3),
            tree: TreeParams::default(),
            seed: 0,
        }
    }
}

impl CascadeConfig {
    /// The unweighted cascade with the given number of trees per forest.
    pub fn baseline(trees_per_forest: usize) -> CascadeConfig {
        CascadeConfig {
            trees_per_forest,
            ..CascadeConfig::default()
        }
    }

    /// A weighted cascade.
    pub fn weighted(trees_per_forest: usize, scheme: WeightScheme, strategy: Strategy) -> CascadeConfig {
        CascadeConfig {
            trees_per_forest,
            weight_scheme: Some(scheme),
            strategy,
            ..CascadeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.forests_per_level == 0 {
            return Err(Error::InvalidConfig("forests_per_level must be at least 1".into()));
        }
        if self.trees_per_forest == 0 {
            return Err(Error::InvalidConfig("trees_per_forest must be at least 1".into()));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidConfig("max_levels must be at least 1".into()));
        }
        match (self.strategy, self.weight_scheme) {
            (Strategy::Baseline, Some(s)) => {
                return Err(Error::InvalidConfig(format!(
                    "weight scheme {s} needs a weighting strategy, not baseline"
                )))
            }
            (Strategy::Resample | Strategy::WeightedSplit, None) => {
                return Err(Error::InvalidConfig(
                    "a weighting strategy needs a weight scheme".into(),
                ))
            }
            _ => {}
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidConfig(format!("eta {eta} outside (0, 1]")));
            }
        }
        if let EarlyStop::Holdout { fraction } = self.early_stop {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "holdout fraction {fraction} outside (0, 1)"
                )));
            }
        }
        if let Some(k) = self.crossfit_k {
            if k < 2 {
                return Err(Error::InvalidConfig(format!("crossfit_k must be at least 2, got {k}")));
            }
        }
        Ok(())
    }

    /// Tree kind of the `k`-th forest of a level: even slots use random
    /// subspaces, odd slots completely random trees.
    pub fn forest_kind(&self, k: usize) -> TreeKind {
        if k % 2 == 0 {
            TreeKind::RandomSubspace
        } else {
            TreeKind::CompletelyRandom
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub forests: Vec<Forest>,
    pub eta: Option<f64>,
    pub n_features: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxLevels,
    NoImprovement,
    AllPerfect,
    ActiveSetExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    pub levels: Vec<Level>,
    pub class_count: usize,
    pub input_arity: usize,
    /// Training rows used by each kept level.
    pub per_level_train_counts: Vec<usize>,
    /// Score of each grown level under the early-stopping rule.
    pub level_scores: Vec<f64>,
    /// Levels trained before truncating to the best one.
    pub levels_grown: usize,
    pub stop_reason: StopReason,
    /// For each row used to grow the cascade, the level it exited at.
    pub train_exit_level: Vec<Option<usize>>,
    /// Rows of the training set used to grow levels (the rest was holdout).
    pub grow_rows: Vec<usize>,
    pub config: CascadeConfig,
}

/// Predicted class with the mean class vector it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub class: usize,
    pub vector: ClassVector,
    /// Zero-based level that produced the prediction.
    pub level: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CascadeSummary {
    pub levels: usize,
    pub levels_grown: usize,
    pub per_level_train_counts: Vec<usize>,
    pub level_scores: Vec<f64>,
    pub level_arity: Vec<usize>,
    pub stop_reason: StopReason,
    pub config: CascadeConfig,
}

fn append_vectors(out: &mut Vec<f64>, base: &[f64], vectors: &[&ClassVector]) {
    out.extend_from_slice(base);
    for v in vectors {
        out.extend_from_slice(&v.0);
    }
}

impl CascadeModel {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn summary(&self) -> CascadeSummary {
        CascadeSummary {
            levels: self.levels.len(),
            levels_grown: self.levels_grown,
            per_level_train_counts: self.per_level_train_counts.clone(),
            level_scores: self.level_scores.clone(),
            level_arity: self.levels.iter().map(|l| l.n_features).collect(),
            stop_reason: self.stop_reason,
            config: self.config.clone(),
        }
    }

    /// Runs `x` down the cascade.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.input_arity {
            return Err(Error::Arity {
                expected: self.input_arity,
                found: x.len(),
            });
        }
        let c = self.class_count;
        let mut input = x.to_vec();
        let last = self.levels.len() - 1;
        for (q, level) in self.levels.iter().enumerate() {
            let vectors: Vec<ClassVector> = level
                .forests
                .iter()
                .map(|f| {
                    let mut out = vec![0.0; c];
                    f.accumulate(&input, &mut out);
                    ClassVector(out)
                })
                .collect();
            let mean = mean_class_vector(&vectors)?;
            let exits = level.eta.is_some_and(|eta| screening_indicator(&mean, eta));
            if exits || q == last {
                return Ok(Prediction {
                    class: mean.argmax(),
                    vector: mean,
                    level: q,
                });
            }
            input.clear();
            append_vectors(&mut input, x, &vectors.iter().collect::<Vec<_>>());
        }
        unreachable!("cascade has at least one level")
    }

    /// Predicts every row of a row-major matrix; output order follows input.
    pub fn predict_batch(&self, features: &[f64], n_features: usize) -> Result<Vec<Prediction>> {
        if n_features != self.input_arity {
            return Err(Error::Arity {
                expected: self.input_arity,
                found: n_features,
            });
        }
        features.par_chunks_exact(n_features).map(|x| self.predict(x)).collect()
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<Prediction>> {
        self.predict_batch(ds.features(), ds.n_features())
    }

    /// Fraction of `ds` rows whose predicted class matches the label.
    pub fn accuracy(&self, ds: &Dataset) -> Result<f64> {
        let preds = self.predict_dataset(ds)?;
        let hits = preds.iter().zip(ds.labels()).filter(|(p, &y)| p.class == y).count();
        Ok(hits as f64 / ds.n_rows() as f64)
    }
}

/// Rows being scored for early stopping outside the training pool.
struct Holdout {
    base: Dataset,
    input: Vec<f64>,
    width: usize,
    /// Class fixed at an earlier level by screening.
    decided: Vec<Option<usize>>,
}

/// Trains a cascade on `train`.
pub fn fit(train: &Dataset, cfg: &CascadeConfig) -> Result<CascadeModel> {
    cfg.validate()?;
    train.validate()?;
    let c = train.class_count();
    let m = train.n_features();
    let big_m = cfg.forests_per_level;

    let (grow, grow_rows, mut holdout) = match cfg.early_stop {
        EarlyStop::Holdout { fraction } => {
            let split = stratified_split(train, 1.0 - fraction, seed::derive(cfg.seed, &[u64::MAX]))?;
            if split.test.n_rows() == 0 || split.train.n_rows() < 2 {
                return Err(Error::InvalidDataset(format!(
                    "{} rows are too few for a {fraction} holdout",
                    train.n_rows()
                )));
            }
            let input = split.test.features().to_vec();
            let n_val = split.test.n_rows();
            let h = Holdout {
                base: split.test,
                input,
                width: m,
                decided: vec![None; n_val],
            };
            (split.train, split.train_rows, Some(h))
        }
        EarlyStop::CrossFit | EarlyStop::Disabled => (train.clone(), (0..train.n_rows()).collect(), None),
    };

    let n = grow.n_rows();
    let labels = grow.labels().to_vec();
    let mut input = grow.features().to_vec();
    let mut width = m;
    let mut active: Vec<usize> = (0..n).collect();
    let mut weights = vec![1.0; n];
    let mut exit_level: Vec<Option<usize>> = vec![None; n];
    // Class fixed for rows that exited, for cross-fit scoring.
    let mut exit_class: Vec<Option<usize>> = vec![None; n];

    let mut levels: Vec<Level> = Vec::new();
    let mut counts = Vec::new();
    let mut scores = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    let mut stop_reason = StopReason::MaxLevels;

    for q in 0..cfg.max_levels {
        let strategy = if q == 0 { Strategy::Baseline } else { cfg.strategy };
        let view = TrainView::new(&input, width, &labels, c);
        let k = cfg.crossfit_k.map(|k| k.min(active.len())).filter(|&k| k >= 2);

        let fits = (0..big_m)
            .into_par_iter()
            .map(|f| {
                let params = ForestParams {
                    n_trees: cfg.trees_per_forest,
                    kind: cfg.forest_kind(f),
                    strategy,
                    tree: cfg.tree,
                };
                cross_fit_class_vectors(
                    &view,
                    &active,
                    &weights,
                    &params,
                    k,
                    seed::derive(cfg.seed, &[q as u64, f as u64]),
                )
            })
            .collect::<Result<Vec<_>>>()?;

        // Per active row: the M cross-fitted vectors.
        let row_vectors: Vec<Vec<ClassVector>> = (0..active.len())
            .map(|i| fits.iter().map(|cf| cf.vectors[i].clone()).collect())
            .collect();
        let active_labels: Vec<usize> = active.iter().map(|&r| labels[r]).collect();
        let forests: Vec<Forest> = fits.into_iter().map(|cf| cf.forest).collect();

        let (means, next_weights, all_perfect) = match cfg.weight_scheme {
            Some(scheme) => {
                let normalize = cfg.strategy == Strategy::Resample;
                let upd = update_weights(&row_vectors, &active_labels, scheme, normalize)?;
                (upd.means, Some(upd.weights.weights), upd.all_perfect)
            }
            None => (
                row_vectors
                    .iter()
                    .map(|vs| mean_class_vector(vs))
                    .collect::<Result<Vec<_>>>()?,
                None,
                false,
            ),
        };

        // Score this level.
        let score = match holdout.as_mut() {
            Some(h) => score_holdout(h, &forests, cfg.eta, c, big_m)?,
            None => {
                let mut hits = exit_class
                    .iter()
                    .enumerate()
                    .filter(|(r, e)| e.is_some_and(|cls| cls == labels[*r]))
                    .count();
                hits += means
                    .iter()
                    .zip(&active_labels)
                    .filter(|(v, &y)| v.argmax() == y)
                    .count();
                hits as f64 / n as f64
            }
        };

        levels.push(Level {
            forests,
            eta: cfg.eta,
            n_features: width,
        });
        counts.push(active.len());
        scores.push(score);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((q, score));
        }

        if all_perfect {
            stop_reason = StopReason::AllPerfect;
            break;
        }
        if cfg.early_stop != EarlyStop::Disabled {
            let (best_q, _) = best.expect("scored at least one level");
            if q - best_q >= cfg.early_stop_patience {
                stop_reason = StopReason::NoImprovement;
                break;
            }
        }
        if q + 1 == cfg.max_levels {
            break;
        }

        // Training-time exits.
        let mut keep = vec![true; active.len()];
        if let Some(eta) = cfg.eta {
            for (i, v) in means.iter().enumerate() {
                let y = active_labels[i];
                let confident = screening_indicator(v, eta) && v.argmax() == y;
                let light = cfg.strategy == Strategy::Resample
                    && cfg
                        .weight_scheme
                        .is_some_and(|s| weight_screening_indicator(instance_weight(v, y, s), eta));
                if confident || light {
                    keep[i] = false;
                    exit_level[active[i]] = Some(q);
                    exit_class[active[i]] = Some(v.argmax());
                }
            }
        }

        // Next-level inputs: raw features followed by this level's vectors.
        let next_width = m + big_m * c;
        let mut next_input = vec![0.0; n * next_width];
        for (i, &r) in active.iter().enumerate() {
            let mut row = Vec::with_capacity(next_width);
            append_vectors(&mut row, grow.row(r), &row_vectors[i].iter().collect::<Vec<_>>());
            next_input[r * next_width..(r + 1) * next_width].copy_from_slice(&row);
        }
        input = next_input;
        width = next_width;

        if let Some(w) = next_weights {
            let mut full = vec![0.0; n];
            for (i, &r) in active.iter().enumerate() {
                full[r] = w[i];
            }
            weights = full;
        }
        active = active.iter().zip(&keep).filter(|(_, &k)| k).map(|(&r, _)| r).collect();

        if active.len() < 2 * c {
            stop_reason = StopReason::ActiveSetExhausted;
            break;
        }
        let remaining_classes = active
            .iter()
            .map(|&r| labels[r])
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        if remaining_classes < 2 {
            stop_reason = StopReason::ActiveSetExhausted;
            break;
        }
    }

    let levels_grown = levels.len();
    if cfg.early_stop != EarlyStop::Disabled {
        let (best_q, _) = best.expect("scored at least one level");
        levels.truncate(best_q + 1);
        counts.truncate(best_q + 1);
        for e in exit_level.iter_mut() {
            if e.is_some_and(|l| l > best_q) {
                *e = None;
            }
        }
    }

    Ok(CascadeModel {
        levels,
        class_count: c,
        input_arity: m,
        per_level_train_counts: counts,
        level_scores: scores,
        levels_grown,
        stop_reason,
        train_exit_level: exit_level,
        grow_rows,
        config: cfg.clone(),
    })
}

/// Pushes the holdout rows through a freshly trained level and returns the
/// holdout accuracy of the cascade truncated at that level.
fn score_holdout(h: &mut Holdout, forests: &[Forest], eta: Option<f64>, c: usize, big_m: usize) -> Result<f64> {
    let n = h.base.n_rows();
    let m = h.base.n_features();
    let rows: Vec<usize> = (0..n).collect();
    let per_forest = forests
        .iter()
        .map(|f| f.predict_rows(&h.input, h.width, &rows))
        .collect::<Result<Vec<_>>>()?;

    let next_width = m + big_m * c;
    let mut next_input = Vec::with_capacity(n * next_width);
    let mut hits = 0;
    for i in 0..n {
        let vectors: Vec<&ClassVector> = per_forest.iter().map(|pf| &pf[i]).collect();
        let mut mean = vec![0.0; c];
        for v in &vectors {
            for (a, p) in mean.iter_mut().zip(&v.0) {
                *a += p;
            }
        }
        mean.iter_mut().for_each(|a| *a /= big_m as f64);
        let predicted = match h.decided[i] {
            Some(cls) => cls,
            None => {
                let cls = argmax(&mean);
                if eta.is_some_and(|eta| screening_indicator(&ClassVector(mean.clone()), eta)) {
                    h.decided[i] = Some(cls);
                }
                cls
            }
        };
        if predicted == h.base.labels()[i] {
            hits += 1;
        }
        append_vectors(&mut next_input, h.base.row(i), &vectors);
    }
    h.input = next_input;
    h.width = next_width;
    Ok(hits as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n_per_class: usize) -> Dataset {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for c in 0..2 {
            for i in 0..n_per_class {
                x.push(c as f64 * 10.0 + (i % 5) as f64 * 0.1);
                x.push((i * 7 % 11) as f64);
                y.push(c);
            }
        }
        Dataset::new("blobs", x, 2, y, 2).unwrap()
    }

    #[test]
    fn config_invariants() {
        assert!(CascadeConfig::default().validate().is_ok());
        let mut cfg = CascadeConfig::default();
        cfg.weight_scheme = Some(WeightScheme::OneMinusW);
        assert!(cfg.validate().is_err());
        let mut cfg = CascadeConfig::default();
        cfg.strategy = Strategy::WeightedSplit;
        assert!(cfg.validate().is_err());
        let mut cfg = CascadeConfig::default();
        cfg.eta = Some(0.0);
        assert!(cfg.validate().is_err());
        let mut cfg = CascadeConfig::default();
        cfg.trees_per_forest = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn separable_data_stops_by_patience() {
        let ds = blobs(20);
        let cfg = CascadeConfig {
            trees_per_forest: 10,
            seed: 3,
            ..CascadeConfig::default()
        };
        let model = fit(&ds, &cfg).unwrap();
        assert_eq!(model.accuracy(&ds).unwrap(), 1.0);
        assert_eq!(model.n_levels(), 1);
        assert_eq!(model.levels_grown, 2);
        assert_eq!(model.stop_reason, StopReason::NoImprovement);
    }

    #[test]
    fn single_class_training_is_rejected() {
        let ds = blobs(10).subset(&[0, 1, 2, 3]);
        assert!(fit(&ds, &CascadeConfig::default()).is_err());
    }

    #[test]
    fn tie_predicts_lowest_class() {
        let tree = crate::Tree::leaf(ClassVector(vec![0.5, 0.5]), 1);
        let forest = Forest::from_trees(vec![tree], TreeKind::RandomSubspace, Strategy::Baseline).unwrap();
        let model = CascadeModel {
            levels: vec![Level {
                forests: vec![forest],
                eta: None,
                n_features: 1,
            }],
            class_count: 2,
            input_arity: 1,
            per_level_train_counts: vec![1],
            level_scores: vec![0.0],
            levels_grown: 1,
            stop_reason: StopReason::MaxLevels,
            train_exit_level: vec![],
            grow_rows: vec![],
            config: CascadeConfig::default(),
        };
        let p = model.predict(&[0.0]).unwrap();
        assert_eq!((p.class, p.level), (0, 0));
        assert!(model.predict(&[0.0, 1.0]).is_err());
    }
}
