//! Datasets, preprocessing recipes and seeded splits.

mod idx;
mod builtin;
mod recipe;

pub use idx::{
    downscale_bilinear, load_mnist, parse_idx_images, parse_idx_labels, write_idx, IdxImages, MnistOptions, IMAGES_FILE,
    LABELS_FILE, MNIST_SIDE,
};
pub use builtin::{load_breast_cancer, load_iris, load_iris_seeded, load_pid_replica, IRIS_SEED};
pub use recipe::{load_csv, load_csv_str, PreprocessRecipe, RecipeStep};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::loss::one_hot;
use crate::scalar::Real;

/// Named index lists into a dataset.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Option<Vec<usize>>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn sizes(&self) -> (usize, Option<usize>, usize) {
        (self.train.len(), self.val.as_ref().map(Vec::len), self.test.len())
    }

    fn check(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        let all = self
            .train
            .iter()
            .chain(self.val.iter().flatten())
            .chain(&self.test);
        for &i in all {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidConfig(format!("split index {i} is out of range or repeated")));
            }
        }
        Ok(())
    }
}

/// How to partition a dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitSpec {
    /// Exact sizes; `train + val + test` must not exceed the sample count.
    Counts { train: usize, val: usize, test: usize },
    /// A held-out pool of `ceil(held_out · N)` samples, of which
    /// `ceil(test_fraction · pool)` form the test split and the remainder the
    /// validation split. Everything else is training data.
    Fractions { held_out: f64, test_fraction: f64 },
}

impl SplitSpec {
    /// Train/test only.
    pub fn holdout(test: f64) -> Self {
        SplitSpec::Fractions {
            held_out: test,
            test_fraction: 1.0,
        }
    }

    /// Sizes `(train, val, test)` for `n` samples.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        match *self {
            SplitSpec::Counts { train, val, test } => {
                if train + val + test > n {
                    return Err(Error::InvalidConfig(format!(
                        "split counts {train}+{val}+{test} exceed {n} samples"
                    )));
                }
                Ok((train, val, test))
            }
            SplitSpec::Fractions {
                held_out,
                test_fraction,
            } => {
                let ok = |f: f64| (0.0..=1.0).contains(&f);
                if !ok(held_out) || !ok(test_fraction) {
                    return Err(Error::InvalidConfig(format!(
                        "split fractions ({held_out}, {test_fraction}) outside [0, 1]"
                    )));
                }
                let pool = ceil_count(held_out, n);
                let test = ceil_count(test_fraction, pool);
                Ok((n - pool, pool - test, test))
            }
        }
    }
}

// the tolerance keeps products like 0.3 · 100 from rounding up to 31
fn ceil_count(frac: f64, n: usize) -> usize {
    ((frac * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Seeded shuffle of `indices`, then partition into train, validation and test.
/// The validation and test splits are both carved from the held-out tail.
pub fn split(indices: &[usize], spec: SplitSpec, seed: u64) -> Result<Splits> {
    let (n_train, n_val, n_test) = spec.sizes(indices.len())?;
    let mut order = indices.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = order[..n_train].to_vec();
    let held = &order[n_train..n_train + n_val + n_test];
    let (val, test) = held.split_at(n_val);
    Ok(Splits {
        train,
        val: (n_val > 0).then(|| val.to_vec()),
        test: test.to_vec(),
    })
}

/// A labelled feature matrix with its splits and input domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub name: String,
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<T>>,
    /// Class index per sample.
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub splits: Splits,
    /// Bounds every feature value lies in; used as the attack clip domain.
    pub domain: (T, T),
}

impl<T: Real> Dataset<T> {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn one_hot(&self, i: usize) -> Vec<T> {
        one_hot(self.labels[i], self.n_classes())
    }

    /// `(features, label)` pairs for the given indices.
    pub fn samples<'a>(&'a self, indices: &[usize]) -> Vec<(&'a [T], usize)> {
        indices
            .iter()
            .map(|&i| (self.features[i].as_slice(), self.labels[i]))
            .collect()
    }

    pub fn train(&self) -> Vec<(&[T], usize)> {
        self.samples(&self.splits.train)
    }

    pub fn test(&self) -> Vec<(&[T], usize)> {
        self.samples(&self.splits.test)
    }

    /// Validation split, or the test split when none exists.
    pub fn validation(&self) -> Vec<(&[T], usize)> {
        self.samples(self.splits.val.as_ref().unwrap_or(&self.splits.test))
    }

    /// Replaces the splits.
    pub fn resplit(&mut self, spec: SplitSpec, seed: u64) -> Result<()> {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.splits = split(&idx, spec, seed)?;
        Ok(())
    }

    /// Checks shape, label range, finiteness, domain and split consistency.
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.features.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows but {} labels",
                self.features.len(),
                self.labels.len()
            )));
        }
        let d = self.dim();
        let (lo, hi) = self.domain;
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::ShapeMismatch(format!("row {i} has {} features, expected {d}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite() || *v < lo || *v > hi) {
                return Err(Error::InvalidConfig(format!("row {i} has values outside [{lo}, {hi}]")));
            }
        }
        if let Some(&y) = self.labels.iter().find(|&&y| y >= self.n_classes()) {
            return Err(Error::ShapeMismatch(format!("label {y} with {} classes", self.n_classes())));
        }
        self.splits.check(self.len())
    }
}
