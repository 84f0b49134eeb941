//! Standardization, one-hot encoding, IQR capping and stratified splitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SplitMix64;
use crate::stats;
use crate::tabular::{Column, ColumnData, Table};

/// Per-feature location and scale of a z-score transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    /// Sample standard deviations; zero marks a constant feature.
    pub stds: Vec<f64>,
}

impl ScalerParams {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        for (j, (o, &x)) in out.iter_mut().zip(row).enumerate() {
            let s = self.stds[j];
            *o = if s > 0.0 { (x - self.means[j]) / s } else { 0.0 };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub z: Matrix,
    pub params: ScalerParams,
    /// Columns with zero variance; they map to all zeros.
    pub zero_variance: Vec<usize>,
}

pub fn standardize_fit(x: &Matrix) -> Result<Standardized> {
    if x.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if x.rows() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            found: x.rows(),
        });
    }
    let mut means = Vec::with_capacity(x.cols());
    let mut stds = Vec::with_capacity(x.cols());
    let mut zero_variance = Vec::new();
    for j in 0..x.cols() {
        let col = x.column(j);
        let m = stats::mean(&col);
        let s = stats::sample_std(&col);
        // Constant columns can leave rounding residue in the variance.
        let s = if s <= 1e-12 * m.abs().max(1.0) { 0.0 } else { s };
        if s == 0.0 {
            zero_variance.push(j);
        }
        means.push(m);
        stds.push(s);
    }
    let params = ScalerParams { means, stds };
    let z = standardize_apply(&params, x)?;
    Ok(Standardized {
        z,
        params,
        zero_variance,
    })
}

pub fn standardize_apply(params: &ScalerParams, x: &Matrix) -> Result<Matrix> {
    if x.cols() != params.n_features() {
        return Err(Error::DimensionMismatch {
            expected: params.n_features(),
            found: x.cols(),
        });
    }
    let mut z = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        params.apply_row(x.row(i), z.row_mut(i));
    }
    Ok(z)
}

/// Layout of one categorical column expanded into indicator columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingMap {
    pub source: String,
    /// All levels seen at fit time, sorted.
    pub levels: Vec<String>,
    /// Levels that received an output column, paired with that column's name.
    pub outputs: Vec<(String, String)>,
    pub drop_first: bool,
}

impl EncodingMap {
    pub fn output_names(&self) -> Vec<String> {
        self.outputs.iter().map(|(_, c)| c.clone()).collect()
    }
}

fn categorical_parts<'a>(t: &'a Table, column: &str) -> Result<(usize, &'a [Option<u32>], &'a [String])> {
    let idx = t
        .column_index(column)
        .ok_or_else(|| Error::ColumnNotFound(column.to_string()))?;
    match &t.columns()[idx].data {
        ColumnData::Categorical { codes, levels } => Ok((idx, codes, levels)),
        ColumnData::Numeric(_) => Err(Error::ColumnNotCategorical(column.to_string())),
    }
}

/// Replaces a categorical column by 0/1 indicator columns named
/// `{column}_{level}`, one per level (minus the first level when
/// `drop_first`). A missing category gives an all-zero row.
pub fn one_hot(t: &Table, column: &str, drop_first: bool) -> Result<(Table, EncodingMap)> {
    let (_, _, levels) = categorical_parts(t, column)?;
    let kept = if drop_first && !levels.is_empty() {
        &levels[1..]
    } else {
        levels
    };
    let map = EncodingMap {
        source: column.to_string(),
        levels: levels.to_vec(),
        outputs: kept
            .iter()
            .map(|l| (l.clone(), format!("{column}_{l}")))
            .collect(),
        drop_first,
    };
    let (table, _) = apply_encoding(&map, t, true)?;
    Ok((table, map))
}

/// Applies a fitted encoding. Unseen levels fail in strict mode; otherwise
/// the row is encoded as all zeros and a warning is returned.
pub fn apply_encoding(map: &EncodingMap, t: &Table, strict: bool) -> Result<(Table, Vec<String>)> {
    let (idx, codes, levels) = categorical_parts(t, &map.source)?;
    for (_, out) in &map.outputs {
        if out != &map.source && t.column_index(out).is_some() {
            return Err(Error::DuplicateColumn(out.clone()));
        }
    }
    let mut warnings = Vec::new();
    let mut indicator: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(t.n_rows()); map.outputs.len()];
    for (row, code) in codes.iter().enumerate() {
        let level = code.map(|c| levels[c as usize].as_str());
        if let Some(l) = level {
            if !map.levels.iter().any(|k| k == l) {
                if strict {
                    return Err(Error::UnseenLevel {
                        column: map.source.clone(),
                        level: l.to_string(),
                    });
                }
                warnings.push(format!(
                    "column {:?}, row {row}: unseen level {l:?} encoded as all zeros",
                    map.source
                ));
            }
        }
        for (k, (lvl, _)) in map.outputs.iter().enumerate() {
            indicator[k].push(Some(if level == Some(lvl.as_str()) { 1.0 } else { 0.0 }));
        }
    }
    let cols = map
        .outputs
        .iter()
        .zip(indicator)
        .map(|((_, name), v)| Column::numeric(name.clone(), v))
        .collect();
    Ok((t.splice(idx, cols)?, warnings))
}

/// Capping bounds `[q1 − k·IQR, q3 + k·IQR]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fences {
    pub lower: f64,
    pub upper: f64,
}

impl Fences {
    pub fn cap(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }
}

pub fn iqr_fences(values: &[f64], k: f64) -> Result<Fences> {
    if values.len() < 4 {
        return Err(Error::TooFewValues {
            needed: 4,
            found: values.len(),
        });
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let q1 = stats::quantile_sorted(&s, 0.25);
    let q3 = stats::quantile_sorted(&s, 0.75);
    let iqr = q3 - q1;
    Ok(Fences {
        lower: q1 - k * iqr,
        upper: q3 + k * iqr,
    })
}

pub fn iqr_cap(values: &[f64], k: f64) -> Result<Vec<f64>> {
    let f = iqr_fences(values, k)?;
    Ok(values.iter().map(|&v| f.cap(v)).collect())
}

/// Binary target extracted from a label column; 1 marks the positive class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryLabels {
    pub values: Vec<u8>,
    pub negative: String,
    pub positive: String,
}

/// Reads a two-valued label column. Categorical columns need exactly two
/// levels; numeric columns must hold only 0 and 1. Without an explicit
/// `positive` level, "1", "yes" and "true" (any case) are positive, else the
/// second level in sorted order.
pub fn binary_labels(t: &Table, label: &str, positive: Option<&str>) -> Result<BinaryLabels> {
    let col = t.column(label)?;
    let not_binary = |detail: String| Error::LabelNotBinary {
        column: label.to_string(),
        detail,
    };
    if col.missing_count() > 0 {
        return Err(not_binary(format!("{} missing values", col.missing_count())));
    }
    match &col.data {
        ColumnData::Numeric(v) => {
            if v.iter().flatten().any(|&x| x != 0.0 && x != 1.0) {
                return Err(not_binary("numeric labels must be 0 or 1".into()));
            }
            let values: Vec<u8> = v.iter().flatten().map(|&x| x as u8).collect();
            if let Some(p) = positive {
                if p != "1" {
                    return Err(not_binary(format!("positive level {p:?} not present")));
                }
            }
            Ok(BinaryLabels {
                values,
                negative: "0".into(),
                positive: "1".into(),
            })
        }
        ColumnData::Categorical { codes, levels } => {
            if levels.len() != 2 {
                return Err(not_binary(format!("{} levels", levels.len())));
            }
            let pos = match positive {
                Some(p) => levels
                    .iter()
                    .position(|l| l == p)
                    .ok_or_else(|| not_binary(format!("positive level {p:?} not present")))?,
                None => levels
                    .iter()
                    .position(|l| matches!(l.to_ascii_lowercase().as_str(), "1" | "yes" | "true"))
                    .unwrap_or(1),
            };
            let values = codes.iter().flatten().map(|&c| u8::from(c as usize == pos)).collect();
            Ok(BinaryLabels {
                values,
                negative: levels[1 - pos].clone(),
                positive: levels[pos].clone(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSpec {
    Ratios { train: f64, validation: f64, test: f64 },
    Counts { train: usize, validation: usize, test: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Largest-remainder apportionment of `total` in proportion to `weights`.
/// Ties in the remainder go to the lower index.
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        let mut out = vec![0; weights.len()];
        if let Some(first) = out.first_mut() {
            *first = total;
        }
        return out;
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

pub fn stratified_split(t: &Table, label: &str, spec: SplitSpec, seed: u64) -> Result<SplitIndices> {
    let y = binary_labels(t, label, None)?;
    stratified_split_labels(&y.values, spec, seed)
}

/// Shuffles each class with its own stream and deals it out so every split
/// keeps the global class proportion to within one row per class.
pub fn stratified_split_labels(y: &[u8], spec: SplitSpec, seed: u64) -> Result<SplitIndices> {
    let n = y.len();
    let sizes = match spec {
        SplitSpec::Ratios {
            train,
            validation,
            test,
        } => {
            let r = [train, validation, test];
            let sum: f64 = r.iter().sum();
            if r.iter().any(|x| *x < 0.0 || !x.is_finite()) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::RatioSumInvalid(sum));
            }
            apportion(n, &r)
        }
        SplitSpec::Counts {
            train,
            validation,
            test,
        } => {
            let total = train + validation + test;
            if total != n {
                return Err(Error::CountMismatch {
                    expected: n,
                    found: total,
                });
            }
            vec![train, validation, test]
        }
    };
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &c) in y.iter().enumerate() {
        if c > 1 {
            return Err(Error::LabelNotBinary {
                column: String::new(),
                detail: format!("label value {c}"),
            });
        }
        by_class[c as usize].push(i);
    }
    let weights: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let class0 = apportion(by_class[0].len(), &weights);
    let class1: Vec<usize> = sizes.iter().zip(&class0).map(|(s, a)| s - a).collect();

    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (c, alloc) in [(0usize, &class0), (1, &class1)] {
        let mut idx = by_class[c].clone();
        SplitMix64::stream(seed, c as u64).shuffle(&mut idx);
        let mut start = 0;
        for (s, &count) in alloc.iter().enumerate() {
            parts[s].extend_from_slice(&idx[start..start + count]);
            start += count;
        }
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    let [train, validation, test] = parts;
    Ok(SplitIndices {
        train,
        validation,
        test,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_small_column() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let s = standardize_fit(&x).unwrap();
        assert_eq!(s.z.column(0), vec![-1.0, 0.0, 1.0]);
        assert!(s.zero_variance.is_empty());
    }

    #[test]
    fn constant_column_flagged() {
        let x = Matrix::from_rows(&[[7.0], [7.0], [7.0], [7.0]]).unwrap();
        let s = standardize_fit(&x).unwrap();
        assert_eq!(s.z.column(0), vec![0.0; 4]);
        assert_eq!(s.zero_variance, vec![0]);
    }

    #[test]
    fn apply_frozen_params() {
        let p = ScalerParams {
            means: vec![0.0],
            stds: vec![2.0],
        };
        let z = standardize_apply(&p, &Matrix::from_rows(&[[4.0]]).unwrap()).unwrap();
        assert_eq!(z[(0, 0)], 2.0);
        let p3 = ScalerParams {
            means: vec![0.0; 3],
            stds: vec![1.0; 3],
        };
        assert!(matches!(
            standardize_apply(&p3, &Matrix::from_rows(&[[1.0, 2.0]]).unwrap()),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn mean_row_maps_to_zero() {
        let x = Matrix::from_rows(&[[1.0, 10.0], [2.0, 30.0], [6.0, 20.0]]).unwrap();
        let s = standardize_fit(&x).unwrap();
        let m = Matrix::from_rows(std::slice::from_ref(&s.params.means)).unwrap();
        let z = standardize_apply(&s.params, &m).unwrap();
        assert!(z.as_slice().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn standardize_rejects_tiny_input() {
        assert!(matches!(standardize_fit(&Matrix::zeros(0, 0)), Err(Error::EmptyMatrix)));
        assert!(matches!(
            standardize_fit(&Matrix::from_rows(&[[1.0]]).unwrap()),
            Err(Error::TooFewRows { .. })
        ));
    }

    fn app_table(values: &[Option<&str>]) -> Table {
        Table::new(
            "t",
            vec![
                Column::dense("x", &vec![1.0; values.len()]),
                Column::categorical("App", values),
            ],
        )
        .unwrap()
    }

    #[test]
    fn one_hot_two_levels() {
        let t = app_table(&[Some("Instagram"), Some("TikTok"), None]);
        let (e, map) = one_hot(&t, "App", false).unwrap();
        assert_eq!(e.column_names(), vec!["x", "App_Instagram", "App_TikTok"]);
        assert_eq!(map.outputs.len(), 2);
        let ig = e.column("App_Instagram").unwrap().as_numeric().unwrap();
        let tt = e.column("App_TikTok").unwrap().as_numeric().unwrap();
        assert_eq!((ig[1], tt[1]), (Some(0.0), Some(1.0)));
        assert_eq!((ig[2], tt[2]), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn one_hot_drop_first_seven_platforms() {
        let apps = ["Facebook", "Instagram", "LinkedIn", "Pinterest", "Snapchat", "TikTok", "Twitter"];
        let vals: Vec<Option<&str>> = apps.iter().map(|a| Some(*a)).collect();
        let (e, map) = one_hot(&app_table(&vals), "App", true).unwrap();
        assert_eq!(map.outputs.len(), 6);
        assert!(e.column("App_Facebook").is_err());
        assert!(e.column("App_Instagram").is_ok());
        assert!(e.column("App_Twitter").is_ok());
    }

    #[test]
    fn unseen_level_strict_and_lenient() {
        let (_, map) = one_hot(&app_table(&[Some("A"), Some("B")]), "App", false).unwrap();
        let other = app_table(&[Some("A"), Some("C")]);
        assert!(matches!(
            apply_encoding(&map, &other, true),
            Err(Error::UnseenLevel { .. })
        ));
        let (e, warnings) = apply_encoding(&map, &other, false).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(e.column("App_A").unwrap().as_numeric().unwrap()[1], Some(0.0));
        assert_eq!(e.column("App_B").unwrap().as_numeric().unwrap()[1], Some(0.0));
    }

    #[test]
    fn one_hot_errors() {
        let t = app_table(&[Some("A")]);
        assert!(matches!(one_hot(&t, "nope", false), Err(Error::ColumnNotFound(_))));
        assert!(matches!(one_hot(&t, "x", false), Err(Error::ColumnNotCategorical(_))));
    }

    #[test]
    fn iqr_cap_examples() {
        assert_eq!(
            iqr_cap(&[1.0, 2.0, 3.0, 4.0, 100.0], 1.5).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0, 7.0]
        );
        let inside = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(iqr_cap(&inside, 1.5).unwrap(), inside.to_vec());
        assert_eq!(iqr_cap(&[3.0; 6], 1.5).unwrap(), vec![3.0; 6]);
        assert!(matches!(iqr_cap(&[1.0, 2.0, 3.0], 1.5), Err(Error::TooFewValues { .. })));
    }

    #[test]
    fn split_with_counts_override() {
        let y: Vec<u8> = (0..1092).map(|i| u8::from(i % 2 == 0)).collect();
        let s = stratified_split_labels(
            &y,
            SplitSpec::Counts {
                train: 764,
                validation: 65,
                test: 263,
            },
            42,
        )
        .unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (764, 65, 263));
    }

    #[test]
    fn split_with_ratios_balanced() {
        let y: Vec<u8> = (0..100).map(|i| u8::from(i < 50)).collect();
        let s = stratified_split_labels(
            &y,
            SplitSpec::Ratios {
                train: 0.7,
                validation: 0.1,
                test: 0.2,
            },
            3,
        )
        .unwrap();
        let pos = |v: &[usize]| v.iter().filter(|&&i| y[i] == 1).count();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (70, 10, 20));
        assert_eq!((pos(&s.train), pos(&s.validation), pos(&s.test)), (35, 5, 10));
        let again = stratified_split_labels(
            &y,
            SplitSpec::Ratios {
                train: 0.7,
                validation: 0.1,
                test: 0.2,
            },
            3,
        )
        .unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn split_errors() {
        let y = vec![0u8, 1, 0, 1];
        assert!(matches!(
            stratified_split_labels(&y, SplitSpec::Ratios { train: 0.5, validation: 0.5, test: 0.5 }, 1),
            Err(Error::RatioSumInvalid(_))
        ));
        assert!(matches!(
            stratified_split_labels(&y, SplitSpec::Counts { train: 1, validation: 1, test: 1 }, 1),
            Err(Error::CountMismatch { .. })
        ));
        let t = Table::new("t", vec![Column::categorical("y", &[Some("a"), Some("b"), Some("c")])]).unwrap();
        assert!(matches!(
            stratified_split(&t, "y", SplitSpec::Counts { train: 1, validation: 1, test: 1 }, 1),
            Err(Error::LabelNotBinary { .. })
        ));
    }

    #[test]
    fn label_positive_detection() {
        let t = Table::new("t", vec![Column::categorical("y", &[Some("No"), Some("Yes"), Some("No")])]).unwrap();
        let b = binary_labels(&t, "y", None).unwrap();
        assert_eq!(b.values, vec![0, 1, 0]);
        assert_eq!(b.positive, "Yes");
        let flipped = binary_labels(&t, "y", Some("No")).unwrap();
        assert_eq!(flipped.values, vec![1, 0, 1]);
    }
}
