//! Decision trees grown on weighted samples.
//!
//! Two node-splitting regimes are supported. `RandomSubspace` draws
//! `ceil(sqrt(m))` candidate features per node and picks the split with the
//! largest weighted information gain. `CompletelyRandom` picks one
//! non-constant feature and a uniform threshold between its node minimum and
//! maximum. Instance weights enter only through the class weight sums, so a
//! weight of zero is the same as removing the row and scaling every weight by
//! a constant changes nothing.

use rand::seq::index;
use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed::Rng;

/// Weights below this are treated as exactly zero.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Gains within this margin are ties; the earlier candidate wins.
const GAIN_EPS: f64 = 1e-12;

/// Probability distribution over classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassVector(pub Vec<f64>);

impl ClassVector {
    pub fn new(probs: Vec<f64>) -> ClassVector {
        ClassVector(probs)
    }

    pub fn uniform(class_count: usize) -> ClassVector {
        ClassVector(vec![1.0 / class_count as f64; class_count])
    }

    pub fn one_hot(class: usize, class_count: usize) -> ClassVector {
        let mut probs = vec![0.0; class_count];
        probs[class] = 1.0;
        ClassVector(probs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Index of the largest component; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Nonnegative components summing to one within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        !self.0.is_empty()
            && self.0.iter().all(|&p| p >= 0.0 && p.is_finite())
            && (self.0.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate().skip(1) {
        if p > v[best] {
            best = i;
        }
    }
    best
}

/// Borrowed row-major feature matrix with its labels.
#[derive(Debug, Clone, Copy)]
pub struct TrainView<'a> {
    pub features: &'a [f64],
    pub n_features: usize,
    pub labels: &'a [usize],
    pub class_count: usize,
}

impl<'a> TrainView<'a> {
    pub fn new(features: &'a [f64], n_features: usize, labels: &'a [usize], class_count: usize) -> TrainView<'a> {
        debug_assert_eq!(features.len(), labels.len() * n_features);
        TrainView {
            features,
            n_features,
            labels,
            class_count,
        }
    }

    pub fn from_dataset(ds: &'a crate::Dataset) -> TrainView<'a> {
        TrainView::new(ds.features(), ds.n_features(), ds.labels(), ds.class_count())
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.n_features + feature]
    }

    pub fn row(&self, row: usize) -> &'a [f64] {
        &self.features[row * self.n_features..(row + 1) * self.n_features]
    }
}

/// Entropy in bits of the distribution proportional to `class_weight_sums`.
pub fn weighted_entropy(class_weight_sums: &[f64]) -> Result<f64> {
    let total: f64 = class_weight_sums.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    Ok(entropy_with_total(class_weight_sums, total))
}

#[inline]
fn entropy_with_total(sums: &[f64], total: f64) -> f64 {
    let mut h = 0.0;
    for &s in sums {
        if s > 0.0 {
            let q = s / total;
            h -= q * q.log2();
        }
    }
    h
}

/// Threshold test: `value <= threshold` goes left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitRule {
    pub feature: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TreeKind {
    RandomSubspace,
    CompletelyRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeParams {
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_samples_split: 2,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split { rule: SplitRule, left: u32, right: u32 },
    Leaf(u32),
}

/// A trained tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    /// `n_leaves * class_count` leaf distributions.
    leaf_probs: Vec<f64>,
    /// Weighted class counts backing each leaf.
    leaf_support: Vec<f64>,
    n_features: usize,
    class_count: usize,
}

/// One training instance at a node.
#[derive(Debug, Clone, Copy)]
struct Sample {
    row: u32,
    label: u32,
    weight: f64,
}

impl Tree {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_probs.len() / self.class_count
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(t, left as usize).max(go(t, right as usize)),
            }
        }
        go(self, 0)
    }

    /// Rule at the root, if the root is not a leaf.
    pub fn root_rule(&self) -> Option<SplitRule> {
        match self.nodes[0] {
            Node::Split { rule, .. } => Some(rule),
            Node::Leaf(_) => None,
        }
    }

    /// All split rules in depth-first order.
    pub fn rules(&self) -> Vec<SplitRule> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { rule, .. } => Some(*rule),
                Node::Leaf(_) => None,
            })
            .collect()
    }

    /// Leaf distributions in creation order.
    pub fn leaf_distributions(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.leaf_probs.chunks_exact(self.class_count)
    }

    pub fn leaf_supports(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.leaf_support.chunks_exact(self.class_count)
    }

    #[inline]
    pub(crate) fn leaf_for(&self, x: &[f64]) -> &[f64] {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Split { rule, left, right } => {
                    i = if x[rule.feature] <= rule.threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                Node::Leaf(l) => {
                    let l = *l as usize * self.class_count;
                    return &self.leaf_probs[l..l + self.class_count];
                }
            }
        }
    }

    pub fn predict_distribution(&self, x: &[f64]) -> Result<ClassVector> {
        if x.len() != self.n_features {
            return Err(Error::Arity {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(ClassVector(self.leaf_for(x).to_vec()))
    }

    /// A tree that is a single leaf with the given distribution.
    pub fn leaf(distribution: ClassVector, n_features: usize) -> Tree {
        let class_count = distribution.len();
        Tree {
            nodes: vec![Node::Leaf(0)],
            leaf_support: distribution.0.clone(),
            leaf_probs: distribution.0,
            n_features,
            class_count,
        }
    }

    /// A stump splitting on `rule` with the given leaf distributions.
    pub fn stump(rule: SplitRule, left: ClassVector, right: ClassVector, n_features: usize) -> Tree {
        let class_count = left.len();
        let mut leaf_probs = left.0;
        leaf_probs.extend_from_slice(&right.0);
        Tree {
            nodes: vec![
                Node::Split {
                    rule,
                    left: 1,
                    right: 2,
                },
                Node::Leaf(0),
                Node::Leaf(1),
            ],
            leaf_support: leaf_probs.clone(),
            leaf_probs,
            n_features,
            class_count,
        }
    }
}

/// Best weighted-information-gain split over `candidate_features`.
///
/// `weights` is aligned with `rows`. Returns the rule and its gain, or `None`
/// when no candidate yields a positive gain. Ties keep the lowest feature
/// index, then the lowest threshold.
pub fn best_split(
    view: &TrainView<'_>,
    rows: &[usize],
    weights: &[f64],
    candidate_features: &[usize],
) -> Option<(SplitRule, f64)> {
    assert_eq!(rows.len(), weights.len(), "rows and weights differ in length");
    let samples: Vec<Sample> = rows
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w >= WEIGHT_FLOOR)
        .map(|(&r, &w)| Sample {
            row: r as u32,
            label: view.labels[r] as u32,
            weight: w,
        })
        .collect();
    if samples.len() < 2 {
        return None;
    }
    let mut sums = vec![0.0; view.class_count];
    for s in &samples {
        sums[s.label as usize] += s.weight;
    }
    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();
    let mut scratch = Scratch::new(view.class_count);
    scratch.best_split(view, &samples, &sums, &features)
}

struct Scratch {
    order: Vec<(f64, u32, f64)>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl Scratch {
    fn new(class_count: usize) -> Scratch {
        Scratch {
            order: Vec::new(),
            left: vec![0.0; class_count],
            right: vec![0.0; class_count],
        }
    }

    fn best_split(
        &mut self,
        view: &TrainView<'_>,
        samples: &[Sample],
        parent_sums: &[f64],
        features: &[usize],
    ) -> Option<(SplitRule, f64)> {
        let total: f64 = parent_sums.iter().sum();
        let parent_h = entropy_with_total(parent_sums, total);
        if parent_h <= GAIN_EPS {
            return None;
        }
        let mut best: Option<(SplitRule, f64)> = None;
        for &f in features {
            self.order.clear();
            self.order.extend(
                samples
                    .iter()
                    .map(|s| (view.value(s.row as usize, f), s.label, s.weight)),
            );
            self.order.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.order[0].0 == self.order[self.order.len() - 1].0 {
                continue;
            }
            self.left.iter_mut().for_each(|v| *v = 0.0);
            self.right.copy_from_slice(parent_sums);
            let mut w_left = 0.0;
            for i in 0..self.order.len() - 1 {
                let (v, label, w) = self.order[i];
                self.left[label as usize] += w;
                self.right[label as usize] -= w;
                w_left += w;
                let next = self.order[i + 1].0;
                if next == v {
                    continue;
                }
                let w_right = total - w_left;
                if w_left <= 0.0 || w_right <= 0.0 {
                    continue;
                }
                // Running subtraction can leave tiny negative residues.
                for r in self.right.iter_mut() {
                    if *r < 0.0 {
                        *r = 0.0;
                    }
                }
                let h = (w_left / total) * entropy_with_total(&self.left, w_left)
                    + (w_right / total) * entropy_with_total(&self.right, w_right);
                let gain = parent_h - h;
                if gain > GAIN_EPS && best.is_none_or(|(_, g)| gain > g + GAIN_EPS) {
                    best = Some((
                        SplitRule {
                            feature: f,
                            threshold: midpoint(v, next),
                        },
                        gain,
                    ));
                }
            }
        }
        best
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

/// Grows a full tree on `rows` (duplicates allowed) with per-row `weights`.
///
/// Rows whose weight is below [`WEIGHT_FLOOR`] are dropped first. Weights are
/// rescaled by their maximum, so uniform weights of any size behave exactly
/// like unit weights.
pub fn fit_tree(
    view: &TrainView<'_>,
    rows: &[usize],
    weights: &[f64],
    kind: TreeKind,
    params: &TreeParams,
    rng: &mut Rng,
) -> Result<Tree> {
    if rows.len() != weights.len() {
        return Err(Error::LengthMismatch(format!(
            "{} rows, {} weights",
            rows.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::Degenerate(format!("invalid instance weight {w}")));
    }
    let max_w = weights
        .iter()
        .copied()
        .filter(|&w| w >= WEIGHT_FLOOR)
        .fold(0.0, f64::max);
    if max_w <= 0.0 {
        return Err(Error::ZeroWeight);
    }
    let mut samples: Vec<Sample> = rows
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w >= WEIGHT_FLOOR)
        .map(|(&r, &w)| Sample {
            row: r as u32,
            label: view.labels[r] as u32,
            weight: w / max_w,
        })
        .collect();

    let mut builder = Builder {
        view,
        kind,
        params,
        rng,
        scratch: Scratch::new(view.class_count),
        candidates: Vec::new(),
        nodes: Vec::new(),
        leaf_probs: Vec::new(),
        leaf_support: Vec::new(),
    };
    builder.grow(&mut samples, 0);
    Ok(Tree {
        nodes: builder.nodes,
        leaf_probs: builder.leaf_probs,
        leaf_support: builder.leaf_support,
        n_features: view.n_features,
        class_count: view.class_count,
    })
}

struct Builder<'v, 'a, 'r> {
    view: &'v TrainView<'a>,
    kind: TreeKind,
    params: &'v TreeParams,
    rng: &'r mut Rng,
    scratch: Scratch,
    candidates: Vec<usize>,
    nodes: Vec<Node>,
    leaf_probs: Vec<f64>,
    leaf_support: Vec<f64>,
}

impl Builder<'_, '_, '_> {
    fn grow(&mut self, samples: &mut [Sample], depth: usize) -> u32 {
        let c = self.view.class_count;
        let mut sums = vec![0.0; c];
        for s in samples.iter() {
            sums[s.label as usize] += s.weight;
        }
        let pure = sums.iter().filter(|&&s| s > 0.0).count() <= 1;
        let stop = pure
            || samples.len() < self.params.min_samples_split.max(2)
            || self.params.max_depth.is_some_and(|d| depth >= d);

        let rule = if stop {
            None
        } else {
            match self.kind {
                TreeKind::RandomSubspace => self.subspace_rule(samples, &sums),
                TreeKind::CompletelyRandom => self.random_rule(samples),
            }
        };

        let Some(rule) = rule else {
            return self.push_leaf(&sums);
        };
        let view = self.view;
        let split = partition(samples, |s| view.value(s.row as usize, rule.feature) <= rule.threshold);
        if split == 0 || split == samples.len() {
            return self.push_leaf(&sums);
        }

        let id = self.nodes.len();
        self.nodes.push(Node::Split {
            rule,
            left: 0,
            right: 0,
        });
        let (l, r) = samples.split_at_mut(split);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split { rule, left, right };
        id as u32
    }

    fn push_leaf(&mut self, sums: &[f64]) -> u32 {
        let total: f64 = sums.iter().sum();
        let leaf = (self.leaf_probs.len() / self.view.class_count) as u32;
        self.leaf_probs.extend(sums.iter().map(|s| s / total));
        self.leaf_support.extend_from_slice(sums);
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf(leaf));
        id
    }

    fn subspace_rule(&mut self, samples: &[Sample], sums: &[f64]) -> Option<SplitRule> {
        let m = self.view.n_features;
        let k = (m as f64).sqrt().ceil() as usize;
        self.candidates.clear();
        self.candidates
            .extend(index::sample(self.rng, m, k.clamp(1, m)).into_iter());
        self.candidates.sort_unstable();
        let candidates = std::mem::take(&mut self.candidates);
        let found = self
            .scratch
            .best_split(self.view, samples, sums, &candidates)
            .map(|(rule, _)| rule);
        self.candidates = candidates;
        found
    }

    fn random_rule(&mut self, samples: &[Sample]) -> Option<SplitRule> {
        let m = self.view.n_features;
        self.candidates.clear();
        self.candidates.extend(0..m);
        for tried in 0..m {
            let pick = self.rng.random_range(tried..m);
            self.candidates.swap(tried, pick);
            let f = self.candidates[tried];
            let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                let v = self.view.value(s.row as usize, f);
                (lo.min(v), hi.max(v))
            });
            if lo < hi {
                let threshold = self.rng.random_range(lo..hi);
                return Some(SplitRule { feature: f, threshold });
            }
        }
        None
    }
}

/// In-place partition; items satisfying `pred` move to the front and their
/// count is returned.
fn partition<T, F: Fn(&T) -> bool>(items: &mut [T], pred: F) -> usize {
    let mut i = 0;
    for j in 0..items.len() {
        if pred(&items[j]) {
            items.swap(i, j);
            i += 1;
        }
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn view<'a>(x: &'a [f64], m: usize, y: &'a [usize], c: usize) -> TrainView<'a> {
        TrainView::new(x, m, y, c)
    }

    #[test]
    fn entropy_values() {
        assert_eq!(weighted_entropy(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(weighted_entropy(&[4.0, 0.0]).unwrap(), 0.0);
        let h = weighted_entropy(&[3.0, 1.0]).unwrap();
        assert!((h - 0.811_278_124_459_132_8).abs() < 1e-12);
        assert!(matches!(weighted_entropy(&[0.0, 0.0]), Err(Error::ZeroWeight)));
    }

    #[test]
    fn separable_split() {
        let x = [0.0, 0.0, 1.0, 1.0];
        let y = [0, 0, 1, 1];
        let v = view(&x, 1, &y, 2);
        let (rule, gain) = best_split(&v, &[0, 1, 2, 3], &[1.0; 4], &[0]).unwrap();
        assert_eq!(
            rule,
            SplitRule {
                feature: 0,
                threshold: 0.5
            }
        );
        assert!((gain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_weights_give_no_split() {
        let x = [0.0, 0.0, 1.0, 1.0];
        let y = [0, 0, 1, 1];
        let v = view(&x, 1, &y, 2);
        assert!(best_split(&v, &[0, 1, 2, 3], &[1.0, 1.0, 0.0, 0.0], &[0]).is_none());
        assert!(best_split(&v, &[0, 1, 2, 3], &[1.0; 4], &[]).is_none());
    }

    #[test]
    fn constant_feature_gives_no_split() {
        let x = [3.0, 3.0, 3.0];
        let y = [0, 1, 0];
        let v = view(&x, 1, &y, 2);
        assert!(best_split(&v, &[0, 1, 2], &[1.0; 3], &[0]).is_none());
    }

    #[test]
    fn one_row_is_a_leaf() {
        let x = [0.3, 0.7];
        let y = [1];
        let v = view(&x, 2, &y, 3);
        for kind in [TreeKind::RandomSubspace, TreeKind::CompletelyRandom] {
            let t = fit_tree(&v, &[0], &[1.0], kind, &TreeParams::default(), &mut seed::rng(1, &[])).unwrap();
            assert_eq!(t.n_nodes(), 1);
            assert_eq!(t.predict_distribution(&[9.0, 9.0]).unwrap().0, vec![0.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn pure_input_is_a_leaf() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y = vec![1; 10];
        let v = view(&x, 2, &y, 2);
        let rows: Vec<usize> = (0..10).collect();
        let t = fit_tree(
            &v,
            &rows,
            &[1.0; 10],
            TreeKind::CompletelyRandom,
            &TreeParams::default(),
            &mut seed::rng(2, &[]),
        )
        .unwrap();
        assert_eq!(t.n_leaves(), 1);
        assert_eq!(t.leaf_distributions().next().unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn zero_total_weight_is_an_error() {
        let x = [0.0, 1.0];
        let y = [0, 1];
        let v = view(&x, 1, &y, 2);
        let r = fit_tree(
            &v,
            &[0, 1],
            &[0.0, 0.0],
            TreeKind::RandomSubspace,
            &TreeParams::default(),
            &mut seed::rng(0, &[]),
        );
        assert!(matches!(r, Err(Error::ZeroWeight)));
    }

    #[test]
    fn fixed_stream_gives_identical_trees() {
        let x: Vec<f64> = (0..60).map(|i| ((i * 37) % 17) as f64).collect();
        let y: Vec<usize> = (0..20).map(|i| (i * 7) % 3).collect();
        let v = view(&x, 3, &y, 3);
        let rows: Vec<usize> = (0..20).collect();
        for kind in [TreeKind::RandomSubspace, TreeKind::CompletelyRandom] {
            let a = fit_tree(
                &v,
                &rows,
                &[1.0; 20],
                kind,
                &TreeParams::default(),
                &mut seed::rng(5, &[1]),
            )
            .unwrap();
            let b = fit_tree(
                &v,
                &rows,
                &[1.0; 20],
                kind,
                &TreeParams::default(),
                &mut seed::rng(5, &[1]),
            )
            .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn prediction_routes_by_rule() {
        let single = Tree::leaf(ClassVector(vec![0.3, 0.7]), 1);
        assert_eq!(single.predict_distribution(&[123.0]).unwrap().0, vec![0.3, 0.7]);
        let stump = Tree::stump(
            SplitRule {
                feature: 0,
                threshold: 0.5,
            },
            ClassVector(vec![1.0, 0.0]),
            ClassVector(vec![0.0, 1.0]),
            1,
        );
        assert_eq!(stump.predict_distribution(&[0.2]).unwrap().0, vec![1.0, 0.0]);
        assert_eq!(stump.predict_distribution(&[0.5]).unwrap().0, vec![1.0, 0.0]);
        assert_eq!(stump.predict_distribution(&[0.6]).unwrap().0, vec![0.0, 1.0]);
        assert!(matches!(
            stump.predict_distribution(&[0.1, 0.2]),
            Err(Error::Arity { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn completely_random_thresholds_split_both_sides() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [0, 1, 0, 1];
        let v = view(&x, 1, &y, 2);
        for s in 0..50 {
            let t = fit_tree(
                &v,
                &[0, 1, 2, 3],
                &[1.0; 4],
                TreeKind::CompletelyRandom,
                &TreeParams::default(),
                &mut seed::rng(s, &[]),
            )
            .unwrap();
            for rule in t.rules() {
                assert!(rule.threshold >= 1.0 && rule.threshold < 4.0);
            }
            for (i, row) in x.iter().enumerate() {
                assert_eq!(t.predict_distribution(&[*row]).unwrap().argmax(), y[i]);
            }
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(ClassVector(vec![0.5, 0.5]).argmax(), 0);
        assert_eq!(ClassVector(vec![0.2, 0.4, 0.4]).argmax(), 1);
    }
}
