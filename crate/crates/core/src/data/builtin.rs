//! Datasets bundled with the crate.

use super::{load_csv_str, Dataset, PreprocessRecipe, SplitSpec};
use crate::error::Result;
use crate::scalar::Real;

const IRIS_CSV: &str = include_str!("../../data/iris.csv");
const BREAST_CANCER_CSV: &str = include_str!("../../data/breast_cancer_wisconsin.csv");
const PID_REPLICA_CSV: &str = include_str!("../../data/pima_shape_replica.csv");

/// Default split seed of [`load_iris`].
pub const IRIS_SEED: u64 = 42;

/// Two-class Iris (setosa vs virginica) on sepal length, sepal width and
/// petal length, zero-padded to 4 features and L2-normalized; 60 train, 40 test.
pub fn load_iris<T: Real>() -> Result<Dataset<T>> {
    load_iris_seeded(IRIS_SEED)
}

pub fn load_iris_seeded<T: Real>(seed: u64) -> Result<Dataset<T>> {
    let recipe = PreprocessRecipe::parse(&[
        "drop_class(versicolor)",
        "drop_feature(petal_width)",
        "zero_pad(4)",
        "l2_normalize",
        "one_hot",
    ])?;
    let split = SplitSpec::Counts { train: 60, val: 0, test: 40 };
    load_csv_str("iris", IRIS_CSV, "species", &recipe, split, seed)
}

/// Breast Cancer Wisconsin: incomplete rows and duplicates removed, identifier
/// columns dropped, rescaled into (0, 1] and zero-padded to 16 features;
/// 80/20 train/test.
pub fn load_breast_cancer<T: Real>(seed: u64) -> Result<Dataset<T>> {
    let recipe = PreprocessRecipe::parse(&[
        "drop_nan",
        "drop_duplicates",
        "drop_feature(sample)",
        "drop_feature(id)",
        "rescale_unit_interval",
        "zero_pad(16)",
        "one_hot",
    ])?;
    load_csv_str("breast_cancer", BREAST_CANCER_CSV, "class", &recipe, SplitSpec::holdout(0.2), seed)
}

/// Synthetic table with the row count, class balance and schema of the Pima
/// Indians Diabetes data (the values are not the real measurements). The
/// majority class is thinned by 232 rows, then standardized and rescaled into
/// (0, 1] with train statistics; 70/30 train/test.
pub fn load_pid_replica<T: Real>(seed: u64) -> Result<Dataset<T>> {
    let recipe = PreprocessRecipe::parse(&[
        "drop_nan".to_string(),
        "drop_duplicates".to_string(),
        format!("balance_drop_majority(232, {seed})"),
        "standardize".to_string(),
        "rescale_unit_interval".to_string(),
        "one_hot".to_string(),
    ])?;
    load_csv_str("pid_replica", PID_REPLICA_CSV, "outcome", &recipe, SplitSpec::holdout(0.3), seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iris_shape() {
        let d = load_iris::<f64>().unwrap();
        assert_eq!((d.len(), d.dim()), (100, 4));
        assert_eq!(d.splits.sizes(), (60, None, 40));
        assert_eq!(d.class_names, vec!["setosa", "virginica"]);
        for r in &d.features {
            let n: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-10);
            assert_eq!(r[3], 0.0);
        }
        assert_eq!(d.labels.iter().filter(|&&l| l == 0).count(), 50);
    }

    #[test]
    fn tabular_counts() {
        let bc = load_breast_cancer::<f64>(0).unwrap();
        assert_eq!(bc.len(), 683);
        assert_eq!(bc.splits.sizes(), (546, None, 137));
        assert_eq!(bc.dim(), 16);
        let pid = load_pid_replica::<f64>(0).unwrap();
        assert_eq!(pid.len(), 536);
        assert_eq!(pid.splits.sizes(), (375, None, 161));
        assert!(pid.features.iter().flatten().all(|&v| v > 0.0 && v <= 1.0));
    }
}
