//! Adaptive instance weights.
//!
//! After each cascade level every training instance gets a weight computed
//! from the level's mean class vector `v` and its true class `y`. A weight of
//! zero means the level already put all probability mass on `y`; larger
//! weights mark instances the level got wrong. The next level uses the
//! weights either to resample its bootstrap or inside the split criterion.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tree::ClassVector;

/// Indicator target for class `y`: a one at `y`, zeros elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHot {
    class: usize,
    class_count: usize,
}

impl OneHot {
    pub fn new(class: usize, class_count: usize) -> Result<OneHot> {
        if class >= class_count {
            return Err(Error::InvalidDataset(format!("class {class} outside 0..{class_count}")));
        }
        Ok(OneHot { class, class_count })
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn to_vec(&self) -> Vec<f64> {
        ClassVector::one_hot(self.class, self.class_count).0
    }

    /// Dot product with `v`, i.e. the probability `v` gives to the class.
    pub fn dot(&self, v: &ClassVector) -> f64 {
        v.0[self.class]
    }

    /// Euclidean distance from `v`.
    pub fn distance(&self, v: &ClassVector) -> f64 {
        v.0.iter()
            .enumerate()
            .map(|(c, &p)| {
                let d = if c == self.class { p - 1.0 } else { p };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Maps the mean class vector and true class of an instance to its weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightScheme {
    /// `1 - p`
    OneMinusW,
    /// `1 - p^2`
    OneMinusWSquared,
    /// `1 - sqrt(p)`
    OneMinusWSqrt,
    /// `||v - onehot(y)||_2`
    L2,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 4] = [
        WeightScheme::OneMinusWSquared,
        WeightScheme::OneMinusWSqrt,
        WeightScheme::L2,
        WeightScheme::OneMinusW,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightScheme::OneMinusW => "1-w",
            WeightScheme::OneMinusWSquared => "1-w2",
            WeightScheme::OneMinusWSqrt => "1-wsqrt",
            WeightScheme::L2 => "l2",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<WeightScheme> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1-w" => Ok(WeightScheme::OneMinusW),
            "1-w2" => Ok(WeightScheme::OneMinusWSquared),
            "1-wsqrt" => Ok(WeightScheme::OneMinusWSqrt),
            "l2" => Ok(WeightScheme::L2),
            other => Err(Error::InvalidConfig(format!(
                "unknown weight scheme '{other}' (expected 1-w, 1-w2, 1-wsqrt or l2)"
            ))),
        }
    }
}

impl Serialize for WeightScheme {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Componentwise mean of per-forest class vectors.
pub fn mean_class_vector(vectors: &[ClassVector]) -> Result<ClassVector> {
    let first = vectors.first().ok_or(Error::Empty("no class vectors to average"))?;
    let c = first.len();
    let mut mean = vec![0.0; c];
    for v in vectors {
        if v.len() != c {
            return Err(Error::LengthMismatch(format!(
                "class vectors of length {c} and {}",
                v.len()
            )));
        }
        for (m, p) in mean.iter_mut().zip(&v.0) {
            *m += p;
        }
    }
    let scale = 1.0 / vectors.len() as f64;
    mean.iter_mut().for_each(|m| *m *= scale);
    Ok(ClassVector(mean))
}

/// Weight of an instance with mean class vector `v` and true class `y`.
pub fn instance_weight(v: &ClassVector, y: usize, scheme: WeightScheme) -> f64 {
    let p = v.0[y];
    let w = match scheme {
        WeightScheme::OneMinusW => 1.0 - p,
        WeightScheme::OneMinusWSquared => 1.0 - p * p,
        WeightScheme::OneMinusWSqrt => 1.0 - p.sqrt(),
        WeightScheme::L2 => OneHot {
            class: y,
            class_count: v.len(),
        }
        .distance(v),
    };
    w.max(0.0)
}

/// Confidence screening: the largest class probability reaches `eta`.
pub fn screening_indicator(v: &ClassVector, eta: f64) -> bool {
    v.max() >= eta
}

/// Weight screening: `1 - w` reaches `eta`.
pub fn weight_screening_indicator(w: f64, eta: f64) -> bool {
    1.0 - w >= eta
}

/// Nonnegative per-instance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub normalized: bool,
}

impl WeightVector {
    pub fn uniform(n: usize) -> WeightVector {
        WeightVector {
            weights: vec![1.0 / n as f64; n],
            normalized: true,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Result of recomputing weights after a level.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightUpdate {
    pub weights: WeightVector,
    /// Mean class vector of each instance.
    pub means: Vec<ClassVector>,
    /// Every instance was classified with probability one; the weights were
    /// replaced by the uniform distribution.
    pub all_perfect: bool,
}

/// Computes next-level weights from each instance's per-forest class vectors.
pub fn update_weights(
    level_vectors: &[Vec<ClassVector>],
    labels: &[usize],
    scheme: WeightScheme,
    normalize: bool,
) -> Result<WeightUpdate> {
    if level_vectors.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} class-vector lists for {} labels",
            level_vectors.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Empty("no instances to weight"));
    }
    let means = level_vectors
        .iter()
        .map(|vs| mean_class_vector(vs))
        .collect::<Result<Vec<_>>>()?;
    let mut raw = Vec::with_capacity(labels.len());
    for (v, &y) in means.iter().zip(labels) {
        if y >= v.len() {
            return Err(Error::InvalidDataset(format!("label {y} outside 0..{}", v.len())));
        }
        raw.push(instance_weight(v, y, scheme));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Ok(WeightUpdate {
            weights: WeightVector::uniform(labels.len()),
            means,
            all_perfect: true,
        });
    }
    let weights = if normalize {
        WeightVector {
            weights: raw.iter().map(|w| w / total).collect(),
            normalized: true,
        }
    } else {
        WeightVector {
            weights: raw,
            normalized: false,
        }
    };
    Ok(WeightUpdate {
        weights,
        means,
        all_perfect: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(p: &[f64]) -> ClassVector {
        ClassVector(p.to_vec())
    }

    #[test]
    fn mean_of_two() {
        let m = mean_class_vector(&[cv(&[0.4, 0.6]), cv(&[0.6, 0.4])]).unwrap();
        assert!((m.0[0] - 0.5).abs() < 1e-15 && (m.0[1] - 0.5).abs() < 1e-15);
        let single = cv(&[0.2, 0.3, 0.5]);
        assert_eq!(mean_class_vector(std::slice::from_ref(&single)).unwrap(), single);
        assert!(mean_class_vector(&[]).is_err());
        assert!(mean_class_vector(&[cv(&[1.0]), cv(&[0.5, 0.5])]).is_err());
    }

    #[test]
    fn correct_instances_weigh_zero() {
        for scheme in WeightScheme::ALL {
            assert_eq!(instance_weight(&cv(&[0.0, 1.0, 0.0]), 1, scheme), 0.0);
        }
    }

    #[test]
    fn wrong_instances_weigh_most() {
        assert_eq!(instance_weight(&cv(&[1.0, 0.0]), 1, WeightScheme::OneMinusW), 1.0);
        let l2 = instance_weight(&cv(&[1.0, 0.0]), 1, WeightScheme::L2);
        assert!((l2 - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn half_half_values() {
        let v = cv(&[0.5, 0.5]);
        assert_eq!(instance_weight(&v, 0, WeightScheme::OneMinusW), 0.5);
        assert_eq!(instance_weight(&v, 0, WeightScheme::OneMinusWSquared), 0.75);
        assert!((instance_weight(&v, 0, WeightScheme::OneMinusWSqrt) - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
        assert!((instance_weight(&v, 0, WeightScheme::L2) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn screening_boundaries() {
        assert!(screening_indicator(&cv(&[0.96, 0.04]), 0.95));
        assert!(!screening_indicator(&cv(&[0.94, 0.06]), 0.95));
        assert!(screening_indicator(&cv(&[0.25; 4]), 0.25));
        assert!(weight_screening_indicator(0.03, 0.95));
        assert!(!weight_screening_indicator(0.06, 0.95));
        // 1 - 0.05 rounds to exactly 0.95.
        assert!(weight_screening_indicator(0.05, 0.95));
    }

    #[test]
    fn perfect_level_falls_back_to_uniform() {
        let lv = vec![vec![cv(&[1.0, 0.0])], vec![cv(&[0.0, 1.0])], vec![cv(&[1.0, 0.0])]];
        let u = update_weights(&lv, &[0, 1, 0], WeightScheme::OneMinusW, true).unwrap();
        assert!(u.all_perfect);
        assert_eq!(u.weights.weights, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn normalization() {
        let lv = vec![vec![cv(&[0.8, 0.2])], vec![cv(&[0.6, 0.4])]];
        let u = update_weights(&lv, &[0, 1], WeightScheme::OneMinusW, true).unwrap();
        assert!(!u.all_perfect);
        assert!((u.weights.weights[0] - 0.25).abs() < 1e-12);
        assert!((u.weights.weights[1] - 0.75).abs() < 1e-12);
        let raw = update_weights(&lv, &[0, 1], WeightScheme::OneMinusW, false).unwrap();
        assert!(!raw.weights.normalized);
        assert!((raw.weights.weights[0] - 0.2).abs() < 1e-12);
        assert!(update_weights(&lv, &[0], WeightScheme::OneMinusW, true).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in WeightScheme::ALL {
            assert_eq!(s.name().parse::<WeightScheme>().unwrap(), s);
        }
        assert!("w".parse::<WeightScheme>().is_err());
    }
}
