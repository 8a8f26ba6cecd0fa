//! Tabular ingestion with an ordered preprocessing recipe.
//!
//! Row-level steps (dropping rows, classes, balancing) operate on the raw
//! table and must precede every value transform. The split is drawn when the
//! first value transform is reached (or at the end), so statistics-based
//! transforms only ever see training rows.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{split, Dataset, SplitSpec, Splits};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Offset keeping the rescaled minimum strictly above zero.
const RESCALE_ETA: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum RecipeStep {
    DropNan,
    DropDuplicates,
    DropClass(String),
    DropFeature(String),
    BalanceDropMajority { count: usize, seed: u64 },
    Standardize,
    RescaleUnitInterval,
    L2Normalize,
    ZeroPad(usize),
    OneHot,
}

impl RecipeStep {
    fn is_row_step(&self) -> bool {
        matches!(
            self,
            RecipeStep::DropNan
                | RecipeStep::DropDuplicates
                | RecipeStep::DropClass(_)
                | RecipeStep::BalanceDropMajority { .. }
        )
    }

    fn is_value_step(&self) -> bool {
        matches!(
            self,
            RecipeStep::Standardize | RecipeStep::RescaleUnitInterval | RecipeStep::L2Normalize | RecipeStep::ZeroPad(_)
        )
    }
}

impl FromStr for RecipeStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) if s.ends_with(')') => {
                let inner = &s[open + 1..s.len() - 1];
                (s[..open].trim(), inner.split(',').map(str::trim).filter(|a| !a.is_empty()).collect())
            }
            Some(_) => return Err(Error::Recipe(format!("malformed step `{s}`"))),
            None => (s, Vec::new()),
        };
        let bad_args = || Error::Recipe(format!("wrong arguments for step `{s}`"));
        let int = |a: &str| a.parse::<u64>().map_err(|_| bad_args());
        let step = match (name, args.as_slice()) {
            ("drop_nan", []) => RecipeStep::DropNan,
            ("drop_duplicates", []) => RecipeStep::DropDuplicates,
            ("drop_class", [c]) => RecipeStep::DropClass(c.to_string()),
            ("drop_feature", [f]) => RecipeStep::DropFeature(f.to_string()),
            ("balance_drop_majority", [c]) => RecipeStep::BalanceDropMajority { count: int(c)? as usize, seed: 0 },
            ("balance_drop_majority", [c, seed]) => RecipeStep::BalanceDropMajority {
                count: int(c)? as usize,
                seed: int(seed)?,
            },
            ("standardize", []) => RecipeStep::Standardize,
            ("rescale_unit_interval", []) => RecipeStep::RescaleUnitInterval,
            ("l2_normalize", []) => RecipeStep::L2Normalize,
            ("zero_pad", [d]) => RecipeStep::ZeroPad(int(d)? as usize),
            ("one_hot", []) => RecipeStep::OneHot,
            ("drop_nan" | "drop_duplicates" | "drop_class" | "drop_feature" | "balance_drop_majority"
            | "standardize" | "rescale_unit_interval" | "l2_normalize" | "zero_pad" | "one_hot", _) => {
                return Err(bad_args())
            }
            _ => return Err(Error::Recipe(format!("unknown step `{name}`"))),
        };
        Ok(step)
    }
}

impl fmt::Display for RecipeStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecipeStep::DropNan => write!(f, "drop_nan"),
            RecipeStep::DropDuplicates => write!(f, "drop_duplicates"),
            RecipeStep::DropClass(c) => write!(f, "drop_class({c})"),
            RecipeStep::DropFeature(c) => write!(f, "drop_feature({c})"),
            RecipeStep::BalanceDropMajority { count, seed } => write!(f, "balance_drop_majority({count}, {seed})"),
            RecipeStep::Standardize => write!(f, "standardize"),
            RecipeStep::RescaleUnitInterval => write!(f, "rescale_unit_interval"),
            RecipeStep::L2Normalize => write!(f, "l2_normalize"),
            RecipeStep::ZeroPad(d) => write!(f, "zero_pad({d})"),
            RecipeStep::OneHot => write!(f, "one_hot"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PreprocessRecipe {
    pub steps: Vec<RecipeStep>,
}

impl PreprocessRecipe {
    pub fn new(steps: Vec<RecipeStep>) -> Self {
        Self { steps }
    }

    pub fn parse<S: AsRef<str>>(steps: &[S]) -> Result<Self> {
        steps
            .iter()
            .map(|s| s.as_ref().parse())
            .collect::<Result<_>>()
            .map(Self::new)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Cell {
    Num(f64),
    Missing,
    Text(String),
}

impl Cell {
    fn parse(raw: &str) -> Self {
        let t = raw.trim();
        if t.is_empty() || matches!(t, "?" | "NA" | "NaN" | "nan" | "null") {
            return Cell::Missing;
        }
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Cell::Num(v),
            Ok(_) => Cell::Missing,
            Err(_) => Cell::Text(t.to_string()),
        }
    }

    fn key(&self) -> String {
        match self {
            Cell::Num(v) => format!("n{:016x}", v.to_bits()),
            Cell::Missing => "m".into(),
            Cell::Text(t) => format!("t{t}"),
        }
    }
}

struct Table {
    names: Vec<String>,
    rows: Vec<Vec<Cell>>,
    labels: Vec<String>,
}

impl Table {
    fn read(text: &str, label_column: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let label_at = headers
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| Error::UnknownColumn(label_column.to_string()))?;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let mut row = Vec::with_capacity(headers.len() - 1);
            for (j, v) in rec.iter().enumerate() {
                if j == label_at {
                    labels.push(v.to_string());
                } else {
                    row.push(Cell::parse(v));
                }
            }
            rows.push(row);
        }
        let names = headers
            .into_iter()
            .enumerate()
            .filter(|&(j, _)| j != label_at)
            .map(|(_, h)| h)
            .collect();
        Ok(Self { names, rows, labels })
    }

    fn retain_rows(&mut self, keep: impl Fn(usize) -> bool) {
        let mut i = 0;
        self.rows.retain(|_| {
            i += 1;
            keep(i - 1)
        });
        let mut i = 0;
        self.labels.retain(|_| {
            i += 1;
            keep(i - 1)
        });
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    fn apply_row_step(&mut self, step: &RecipeStep) -> Result<()> {
        match step {
            RecipeStep::DropNan => {
                let keep: Vec<bool> = self
                    .rows
                    .iter()
                    .zip(&self.labels)
                    .map(|(r, l)| !r.contains(&Cell::Missing) && !matches!(Cell::parse(l), Cell::Missing))
                    .collect();
                self.retain_rows(|i| keep[i]);
            }
            RecipeStep::DropDuplicates => {
                let mut seen = BTreeSet::new();
                let keep: Vec<bool> = self
                    .rows
                    .iter()
                    .zip(&self.labels)
                    .map(|(r, l)| {
                        let mut key: Vec<String> = r.iter().map(Cell::key).collect();
                        key.push(l.clone());
                        seen.insert(key)
                    })
                    .collect();
                self.retain_rows(|i| keep[i]);
            }
            RecipeStep::DropClass(c) => {
                if !self.labels.contains(c) {
                    return Err(Error::Recipe(format!("drop_class: no class `{c}`")));
                }
                let keep: Vec<bool> = self.labels.iter().map(|l| l != c).collect();
                self.retain_rows(|i| keep[i]);
            }
            RecipeStep::BalanceDropMajority { count, seed } => {
                let classes: BTreeSet<&String> = self.labels.iter().collect();
                let majority = classes
                    .iter()
                    .max_by_key(|c| (self.labels.iter().filter(|l| l == *c).count(), std::cmp::Reverse(**c)))
                    .map(|c| (*c).clone())
                    .ok_or_else(|| Error::EmptySplit("table".into()))?;
                let mut members: Vec<usize> = (0..self.labels.len()).filter(|&i| self.labels[i] == majority).collect();
                if *count >= members.len() {
                    return Err(Error::EmptyClass(majority));
                }
                members.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
                let mut drop = vec![false; self.labels.len()];
                for &i in &members[..*count] {
                    drop[i] = true;
                }
                self.retain_rows(|i| !drop[i]);
            }
            RecipeStep::DropFeature(f) => {
                let j = self.column(f)?;
                self.names.remove(j);
                for r in &mut self.rows {
                    r.remove(j);
                }
            }
            _ => unreachable!("not a table step"),
        }
        Ok(())
    }

    /// `(feature names, rows, raw labels)`.
    #[allow(clippy::type_complexity)]
    fn into_numeric(self) -> Result<(Vec<String>, Vec<Vec<f64>>, Vec<String>)> {
        let mut out = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            let mut r = Vec::with_capacity(row.len());
            for (j, c) in row.iter().enumerate() {
                match c {
                    Cell::Num(v) => r.push(*v),
                    Cell::Missing => {
                        return Err(Error::NonNumeric { row: i, column: self.names[j].clone(), value: "<missing>".into() })
                    }
                    Cell::Text(t) => {
                        return Err(Error::NonNumeric { row: i, column: self.names[j].clone(), value: t.clone() })
                    }
                }
            }
            out.push(r);
        }
        Ok((self.names, out, self.labels))
    }
}

fn class_names(labels: &[String]) -> Vec<String> {
    let mut names: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if names.iter().all(|n| n.parse::<f64>().is_ok()) {
        names.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    names
}

fn column_stats(x: &[Vec<f64>], rows: &[usize], j: usize) -> (f64, f64, f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&i| x[i][j]).sum::<f64>() / n;
    let var = rows.iter().map(|&i| (x[i][j] - mean).powi(2)).sum::<f64>() / n;
    let min = rows.iter().map(|&i| x[i][j]).fold(f64::INFINITY, f64::min);
    let max = rows.iter().map(|&i| x[i][j]).fold(f64::NEG_INFINITY, f64::max);
    (mean, var.sqrt(), min, max)
}

fn apply_value_step(step: &RecipeStep, names: &mut Vec<String>, x: &mut [Vec<f64>], train: &[usize]) -> Result<()> {
    let d = names.len();
    match step {
        RecipeStep::Standardize => {
            for j in 0..d {
                let (mean, std, _, _) = column_stats(x, train, j);
                // constant columns are centred only
                let scale = if std > 0.0 { std } else { 1.0 };
                x.iter_mut().for_each(|r| r[j] = (r[j] - mean) / scale);
            }
        }
        RecipeStep::RescaleUnitInterval => {
            for j in 0..d {
                let (_, _, min, max) = column_stats(x, train, j);
                let range = max - min + RESCALE_ETA;
                let floor = RESCALE_ETA / range;
                x.iter_mut().for_each(|r| r[j] = ((r[j] - min + RESCALE_ETA) / range).clamp(floor, 1.0));
            }
        }
        RecipeStep::L2Normalize => {
            for (i, r) in x.iter_mut().enumerate() {
                let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::Recipe(format!("l2_normalize: row {i} is all zeros")));
                }
                r.iter_mut().for_each(|v| *v /= norm);
            }
        }
        RecipeStep::ZeroPad(target) => {
            if *target < d {
                return Err(Error::Recipe(format!("zero_pad({target}) is smaller than the {d} features")));
            }
            for k in d..*target {
                names.push(format!("pad{k}"));
            }
            x.iter_mut().for_each(|r| r.resize(*target, 0.0));
        }
        RecipeStep::DropFeature(f) => {
            let j = names
                .iter()
                .position(|n| n == f)
                .ok_or_else(|| Error::UnknownColumn(f.clone()))?;
            names.remove(j);
            x.iter_mut().for_each(|r| {
                r.remove(j);
            });
        }
        RecipeStep::OneHot => {}
        row => return Err(Error::Recipe(format!("`{row}` must precede every value transform"))),
    }
    Ok(())
}

/// `[0, 1]` when every value lies there, otherwise the observed range.
fn infer_domain(x: &[Vec<f64>]) -> (f64, f64) {
    let (lo, hi) = x
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo >= 0.0 && hi <= 1.0 {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

/// Parses CSV text (header row required) and applies the recipe.
pub fn load_csv_str<T: Real>(
    name: &str,
    text: &str,
    label_column: &str,
    recipe: &PreprocessRecipe,
    split_spec: SplitSpec,
    seed: u64,
) -> Result<Dataset<T>> {
    let mut table = Table::read(text, label_column)?;
    let first_value = recipe
        .steps
        .iter()
        .position(RecipeStep::is_value_step)
        .unwrap_or(recipe.steps.len());
    for step in &recipe.steps[..first_value] {
        match step {
            RecipeStep::OneHot => {}
            s => table.apply_row_step(s)?,
        }
    }
    let (mut names, mut x, labels) = table.into_numeric()?;
    if x.is_empty() {
        return Err(Error::EmptySplit(format!("{name}: no rows left after preprocessing")));
    }
    let classes = class_names(&labels);
    let label_idx: Vec<usize> = labels
        .iter()
        .map(|l| classes.iter().position(|c| c == l).expect("label in class set"))
        .collect();
    let idx: Vec<usize> = (0..x.len()).collect();
    let splits: Splits = split(&idx, split_spec, seed)?;
    if splits.train.is_empty() && recipe.steps[first_value..].iter().any(|s| {
        matches!(s, RecipeStep::Standardize | RecipeStep::RescaleUnitInterval)
    }) {
        return Err(Error::EmptySplit("train split needed for fitted transforms".into()));
    }
    for step in &recipe.steps[first_value..] {
        if step.is_row_step() {
            return Err(Error::Recipe(format!("`{step}` must precede every value transform")));
        }
        apply_value_step(step, &mut names, &mut x, &splits.train)?;
    }
    let domain = infer_domain(&x);
    let ds = Dataset {
        name: name.to_string(),
        feature_names: names,
        features: x.into_iter().map(|r| r.into_iter().map(T::lit).collect()).collect(),
        labels: label_idx,
        class_names: classes,
        splits,
        domain: (T::lit(domain.0), T::lit(domain.1)),
    };
    ds.validate()?;
    Ok(ds)
}

pub fn load_csv<T: Real>(
    path: &Path,
    label_column: &str,
    recipe: &PreprocessRecipe,
    split_spec: SplitSpec,
    seed: u64,
) -> Result<Dataset<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_stem().map_or("csv".into(), |s| s.to_string_lossy().into_owned());
    load_csv_str(&name, &text, label_column, recipe, split_spec, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "a,b,label\n1,2,x\n3,4,y\n5,6,x\n";

    #[test]
    fn parse_steps() {
        let r = PreprocessRecipe::parse(&["drop_nan", "drop_feature(id)", "balance_drop_majority(232, 7)", "zero_pad(8)"]).unwrap();
        assert_eq!(r.steps[1], RecipeStep::DropFeature("id".into()));
        assert_eq!(r.steps[2], RecipeStep::BalanceDropMajority { count: 232, seed: 7 });
        for s in &r.steps {
            assert_eq!(&s.to_string().parse::<RecipeStep>().unwrap(), s);
        }
        let err = "normalise".parse::<RecipeStep>().unwrap_err().to_string();
        assert!(err.contains("normalise"));
        assert!("zero_pad(x)".parse::<RecipeStep>().is_err());
        assert!("drop_nan(3)".parse::<RecipeStep>().is_err());
        assert!("zero_pad(4".parse::<RecipeStep>().is_err());
    }

    #[test]
    fn identity_recipe_keeps_matrix() {
        let d: Dataset<f64> = load_csv_str("s", SMALL, "label", &PreprocessRecipe::default(), SplitSpec::holdout(0.0), 0).unwrap();
        assert_eq!(d.features, vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(d.labels, vec![0, 1, 0]);
        assert_eq!(d.class_names, vec!["x", "y"]);
        assert_eq!(d.domain, (1.0, 6.0));
    }

    #[test]
    fn missing_and_duplicates() {
        let text = "a,b,label\n1,?,x\n1,2,x\n1,2,x\n1,2,y\n";
        let r = PreprocessRecipe::parse(&["drop_nan", "drop_duplicates"]).unwrap();
        let d: Dataset<f64> = load_csv_str("s", text, "label", &r, SplitSpec::holdout(0.0), 0).unwrap();
        assert_eq!(d.len(), 2);
        let err = load_csv_str::<f64>("s", text, "label", &PreprocessRecipe::default(), SplitSpec::holdout(0.0), 0);
        assert!(matches!(err, Err(Error::NonNumeric { .. })));
    }

    #[test]
    fn text_columns_survive_only_if_dropped() {
        let text = "id,a,label\nfoo,1,x\nbar,2,y\n";
        assert!(load_csv_str::<f64>("s", text, "label", &PreprocessRecipe::default(), SplitSpec::holdout(0.0), 0).is_err());
        let r = PreprocessRecipe::parse(&["drop_feature(id)"]).unwrap();
        assert_eq!(load_csv_str::<f64>("s", text, "label", &r, SplitSpec::holdout(0.0), 0).unwrap().dim(), 1);
        let r = PreprocessRecipe::parse(&["drop_feature(nope)"]).unwrap();
        assert!(matches!(
            load_csv_str::<f64>("s", text, "label", &r, SplitSpec::holdout(0.0), 0),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn balance_and_empty_class() {
        let mut text = String::from("a,label\n");
        for i in 0..10 {
            text.push_str(&format!("{i},{}\n", if i < 7 { "m" } else { "n" }));
        }
        let r = PreprocessRecipe::parse(&["balance_drop_majority(4, 1)"]).unwrap();
        let d: Dataset<f64> = load_csv_str("s", &text, "label", &r, SplitSpec::holdout(0.0), 0).unwrap();
        assert_eq!(d.labels.iter().filter(|&&l| l == 0).count(), 3);
        let r = PreprocessRecipe::parse(&["balance_drop_majority(7, 1)"]).unwrap();
        assert!(matches!(
            load_csv_str::<f64>("s", &text, "label", &r, SplitSpec::holdout(0.0), 0),
            Err(Error::EmptyClass(_))
        ));
    }

    #[test]
    fn standardize_uses_train_rows_only() {
        let mut text = String::from("a,label\n");
        for i in 0..10 {
            text.push_str(&format!("{},{}\n", i * i, i % 2));
        }
        let r = PreprocessRecipe::parse(&["standardize"]).unwrap();
        let d: Dataset<f64> = load_csv_str("s", &text, "label", &r, SplitSpec::holdout(0.3), 5).unwrap();
        let train: Vec<f64> = d.splits.train.iter().map(|&i| d.features[i][0]).collect();
        let mean = train.iter().sum::<f64>() / train.len() as f64;
        let var = train.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / train.len() as f64;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        let all_mean = d.features.iter().map(|r| r[0]).sum::<f64>() / 10.0;
        assert!(all_mean.abs() > 1e-6);
    }

    #[test]
    fn rescale_lands_in_half_open_unit_interval() {
        let mut text = String::from("a,b,label\n");
        for i in 0..20 {
            text.push_str(&format!("{},{},{}\n", i as f64 - 7.5, 3.0, i % 2));
        }
        let r = PreprocessRecipe::parse(&["rescale_unit_interval"]).unwrap();
        let d: Dataset<f64> = load_csv_str("s", &text, "label", &r, SplitSpec::holdout(0.25), 2).unwrap();
        assert!(d.features.iter().flatten().all(|&v| v > 0.0 && v <= 1.0));
        let train_max = d.splits.train.iter().map(|&i| d.features[i][0]).fold(0.0, f64::max);
        assert!((train_max - 1.0).abs() < 1e-12);
        assert_eq!(d.domain, (0.0, 1.0));
    }

    #[test]
    fn row_steps_after_transforms_are_rejected() {
        let r = PreprocessRecipe::parse(&["l2_normalize", "drop_nan"]).unwrap();
        assert!(matches!(
            load_csv_str::<f64>("s", SMALL, "label", &r, SplitSpec::holdout(0.0), 0),
            Err(Error::Recipe(_))
        ));
        let r = PreprocessRecipe::parse(&["zero_pad(1)"]).unwrap();
        assert!(load_csv_str::<f64>("s", SMALL, "label", &r, SplitSpec::holdout(0.0), 0).is_err());
        assert!(matches!(
            load_csv_str::<f64>("s", SMALL, "nope", &PreprocessRecipe::default(), SplitSpec::holdout(0.0), 0),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let r = load_csv::<f64>(Path::new("/nonexistent/x.csv"), "y", &PreprocessRecipe::default(), SplitSpec::holdout(0.2), 0);
        assert!(matches!(r, Err(Error::Io { .. })));
    }
}
