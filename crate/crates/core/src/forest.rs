//! Forests of bootstrapped trees and cross-fitted class vectors.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::tree::{fit_tree, ClassVector, TrainView, Tree, TreeKind, TreeParams};

/// How instance weights reach the trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Strategy {
    /// Plain bootstrap with unit weights; weights are ignored.
    Baseline,
    /// Bootstrap drawn from the weight-proportional distribution.
    Resample,
    /// Plain bootstrap; weights enter the split criterion.
    WeightedSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub kind: TreeKind,
    pub strategy: Strategy,
    pub tree: TreeParams,
}

impl ForestParams {
    pub fn new(n_trees: usize, kind: TreeKind, strategy: Strategy) -> ForestParams {
        ForestParams {
            n_trees,
            kind,
            strategy,
            tree: TreeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    kind: TreeKind,
    strategy: Strategy,
    n_features: usize,
    class_count: usize,
    /// Rows the bootstrap samples were drawn from.
    pool: Vec<usize>,
}

impl Forest {
    /// Assembles a forest from already-trained trees.
    pub fn from_trees(trees: Vec<Tree>, kind: TreeKind, strategy: Strategy) -> Result<Forest> {
        let first = trees.first().ok_or(Error::Empty("forest needs at least one tree"))?;
        let (n_features, class_count) = (first.n_features(), first.class_count());
        if trees
            .iter()
            .any(|t| t.n_features() != n_features || t.class_count() != class_count)
        {
            return Err(Error::InvalidConfig("trees disagree on arity".into()));
        }
        Ok(Forest {
            trees,
            kind,
            strategy,
            n_features,
            class_count,
            pool: Vec::new(),
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn kind(&self) -> TreeKind {
        self.kind
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    /// Mean of the trees' leaf distributions for `x`.
    pub fn class_vector(&self, x: &[f64]) -> Result<ClassVector> {
        if x.len() != self.n_features {
            return Err(Error::Arity {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut out = vec![0.0; self.class_count];
        self.accumulate(x, &mut out);
        Ok(ClassVector(out))
    }

    /// Writes the class vector for `x` into `out` without arity checks.
    pub(crate) fn accumulate(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for t in &self.trees {
            for (o, p) in out.iter_mut().zip(t.leaf_for(x)) {
                *o += p;
            }
        }
        let scale = 1.0 / self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v *= scale);
    }

    /// Class vectors for the given rows of a row-major matrix.
    pub fn predict_rows(&self, features: &[f64], n_features: usize, rows: &[usize]) -> Result<Vec<ClassVector>> {
        if n_features != self.n_features {
            return Err(Error::Arity {
                expected: self.n_features,
                found: n_features,
            });
        }
        Ok(rows
            .par_iter()
            .map(|&r| {
                let mut out = vec![0.0; self.class_count];
                self.accumulate(&features[r * n_features..(r + 1) * n_features], &mut out);
                ClassVector(out)
            })
            .collect())
    }
}

fn all_equal(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

fn bootstrap(pool: &[usize], rng: &mut Rng) -> Vec<usize> {
    (0..pool.len()).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

/// Trains `params.n_trees` trees on bootstrap samples of `pool`.
///
/// `weights` is indexed by row of `view`. Each tree draws `pool.len()` rows
/// with replacement from its own stream derived from `(seed, tree index)`.
pub fn fit_forest(
    view: &TrainView<'_>,
    pool: &[usize],
    weights: &[f64],
    params: &ForestParams,
    seed: u64,
) -> Result<Forest> {
    if params.n_trees == 0 {
        return Err(Error::InvalidConfig("a forest needs at least one tree".into()));
    }
    if pool.is_empty() {
        return Err(Error::Empty("no training rows"));
    }
    if weights.len() != view.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "{} weights for {} rows",
            weights.len(),
            view.n_rows()
        )));
    }
    let pool_weights: Vec<f64> = pool.iter().map(|&r| weights[r]).collect();
    if let Some(w) = pool_weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::Degenerate(format!("invalid instance weight {w}")));
    }
    let total: f64 = pool_weights.iter().sum();
    if params.strategy != Strategy::Baseline && !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }

    let uniform = all_equal(&pool_weights);
    let sampler = match params.strategy {
        Strategy::Resample if !uniform => {
            let normalized: Vec<f64> = pool_weights.iter().map(|w| w / total).collect();
            Some(WeightedIndex::new(&normalized).map_err(|e| Error::Degenerate(e.to_string()))?)
        }
        _ => None,
    };
    let unit = vec![1.0; pool.len()];

    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed, &[t as u64]);
            let sample = match &sampler {
                Some(dist) => (0..pool.len()).map(|_| pool[dist.sample(&mut rng)]).collect(),
                None => bootstrap(pool, &mut rng),
            };
            match params.strategy {
                Strategy::WeightedSplit => {
                    let w: Vec<f64> = sample.iter().map(|&r| weights[r]).collect();
                    match fit_tree(view, &sample, &w, params.kind, &params.tree, &mut rng) {
                        // Every drawn row has zero weight; fall back to counts.
                        Err(Error::ZeroWeight) => fit_tree(view, &sample, &unit, params.kind, &params.tree, &mut rng),
                        other => other,
                    }
                }
                _ => fit_tree(view, &sample, &unit, params.kind, &params.tree, &mut rng),
            }
        })
        .collect::<Result<Vec<Tree>>>()?;

    Ok(Forest {
        trees,
        kind: params.kind,
        strategy: params.strategy,
        n_features: view.n_features,
        class_count: view.class_count,
        pool: pool.to_vec(),
    })
}

/// Training-time class vectors for a pool of rows.
#[derive(Debug, Clone)]
pub struct CrossFit {
    /// One vector per pool row, in pool order.
    pub vectors: Vec<ClassVector>,
    /// Fold of each pool row; empty without cross-fitting.
    pub fold_of: Vec<usize>,
    /// The forests that produced `vectors`, one per fold.
    pub fold_forests: Vec<Forest>,
    /// Forest trained on the whole pool, used at prediction time.
    pub forest: Forest,
}

/// Stratified assignment of `pool` positions to `k` folds.
pub fn stratified_folds(labels: &[usize], pool: &[usize], class_count: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    let mut fold_of = vec![0; pool.len()];
    let mut next = 0;
    for c in 0..class_count {
        let mut members: Vec<usize> = (0..pool.len()).filter(|&i| labels[pool[i]] == c).collect();
        members.shuffle(rng);
        for i in members {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    fold_of
}

/// Produces a class vector for every pool row.
///
/// With `k = Some(k)` the pool is split into `k` stratified folds and each
/// row's vector comes from a forest trained on the other folds. With
/// `k = None` the vectors are resubstitution predictions of the forest
/// trained on the whole pool.
pub fn cross_fit_class_vectors(
    view: &TrainView<'_>,
    pool: &[usize],
    weights: &[f64],
    params: &ForestParams,
    k: Option<usize>,
    seed: u64,
) -> Result<CrossFit> {
    let Some(k) = k else {
        let forest = fit_forest(view, pool, weights, params, seed::derive(seed, &[0]))?;
        let vectors = forest.predict_rows(view.features, view.n_features, pool)?;
        return Ok(CrossFit {
            vectors,
            fold_of: Vec::new(),
            fold_forests: Vec::new(),
            forest,
        });
    };
    if k < 2 {
        return Err(Error::InvalidConfig(format!("cross-fit needs k >= 2, got {k}")));
    }
    if pool.len() < k {
        return Err(Error::InvalidConfig(format!(
            "{} rows cannot fill {k} folds",
            pool.len()
        )));
    }

    let mut rng = seed::rng(seed, &[u64::MAX]);
    let fold_of = stratified_folds(view.labels, pool, view.class_count, k, &mut rng);

    // Index 0 is the full-pool forest, 1..=k the fold forests.
    let forests = (0..=k)
        .into_par_iter()
        .map(|job| {
            let train: Vec<usize> = if job == 0 {
                pool.to_vec()
            } else {
                pool.iter()
                    .zip(&fold_of)
                    .filter(|(_, &f)| f != job - 1)
                    .map(|(&r, _)| r)
                    .collect()
            };
            let fseed = seed::derive(seed, &[job as u64]);
            match fit_forest(view, &train, weights, params, fseed) {
                Err(Error::ZeroWeight) => {
                    let fallback = ForestParams {
                        strategy: Strategy::Baseline,
                        ..*params
                    };
                    fit_forest(view, &train, weights, &fallback, fseed)
                }
                other => other,
            }
        })
        .collect::<Result<Vec<Forest>>>()?;

    let mut forests = forests.into_iter();
    let forest = forests.next().expect("full-pool forest");
    let fold_forests: Vec<Forest> = forests.collect();

    let vectors = pool
        .par_iter()
        .zip(fold_of.par_iter())
        .map(|(&r, &f)| {
            let mut out = vec![0.0; view.class_count];
            fold_forests[f].accumulate(view.row(r), &mut out);
            ClassVector(out)
        })
        .collect();

    Ok(CrossFit {
        vectors,
        fold_of,
        fold_forests,
        forest,
    })
}
