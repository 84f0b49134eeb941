//! Feature preparation shared by the subcommands and the pipeline:
//! column selection, dropping incomplete rows, one-hot encoding, IQR
//! capping and z-scoring, with every fitted piece kept for reuse on new
//! data.

use serde::{Deserialize, Serialize};
use tabkit_core::classify::{ModelEnvelope, TrainedClassifier};
use tabkit_core::preprocess::{
    apply_encoding, binary_labels, iqr_fences, one_hot, standardize_apply, standardize_fit, BinaryLabels,
    EncodingMap, Fences, ScalerParams,
};
use tabkit_core::tabular::load_csv;
use tabkit_core::{ColumnKind, Error, Matrix, Table};

use crate::error::{CliError, CliResult};

pub fn load(path: &std::path::Path) -> CliResult<Table> {
    Ok(load_csv(path, None)?)
}

/// Keeps the rows with no missing value in `columns`.
pub fn drop_incomplete(t: &Table, columns: &[String]) -> CliResult<(Table, usize)> {
    let keep = t.complete_rows(columns)?;
    let dropped = t.n_rows() - keep.len();
    if keep.is_empty() {
        return Err(Error::EmptyInput.into());
    }
    Ok((if dropped == 0 { t.clone() } else { t.select_rows(&keep) }, dropped))
}

/// Splits `wanted` (or, when empty, every column but `exclude`) into
/// numeric and categorical names, in table order.
pub fn split_kinds(t: &Table, wanted: &[String], exclude: Option<&str>) -> CliResult<(Vec<String>, Vec<String>)> {
    for w in wanted {
        t.column(w)?;
    }
    let mut numeric = Vec::new();
    let mut categorical = Vec::new();
    for c in t.columns() {
        let chosen = if wanted.is_empty() {
            Some(c.name.as_str()) != exclude
        } else {
            wanted.contains(&c.name)
        };
        if !chosen {
            continue;
        }
        match c.kind() {
            ColumnKind::Numeric => numeric.push(c.name.clone()),
            ColumnKind::Categorical => categorical.push(c.name.clone()),
        }
    }
    Ok((numeric, categorical))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapRule {
    pub column: String,
    pub fences: Fences,
}

/// Fitted transform from raw table columns to the model's feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    /// Raw columns read from the input.
    pub inputs: Vec<String>,
    pub encodings: Vec<EncodingMap>,
    /// Output feature names, in matrix column order.
    pub features: Vec<String>,
    /// Indices into `features` of the one-hot indicator columns.
    pub indicators: Vec<usize>,
    pub caps: Vec<CapRule>,
    pub scaler: ScalerParams,
}

pub struct PrepareOptions<'a> {
    pub numeric: &'a [String],
    pub categorical: &'a [String],
    pub drop_first: bool,
    pub cap_columns: &'a [String],
    pub cap_k: f64,
    pub standardize_indicators: bool,
}

fn encode(t: &Table, maps: &[EncodingMap], strict: bool, warnings: &mut Vec<String>) -> CliResult<Table> {
    let mut t = t.clone();
    for m in maps {
        let (next, w) = apply_encoding(m, &t, strict)?;
        warnings.extend(w);
        t = next;
    }
    Ok(t)
}

impl Preprocessor {
    /// Fits encodings on all of `t` (levels are vocabulary, not
    /// statistics) and capping fences and scaling on `fit_rows` only.
    /// Returns the transformed matrix for every row of `t`.
    pub fn fit(t: &Table, opts: &PrepareOptions, fit_rows: &[usize]) -> CliResult<(Preprocessor, Matrix)> {
        let mut inputs: Vec<String> = Vec::new();
        for c in t.columns() {
            if opts.numeric.contains(&c.name) || opts.categorical.contains(&c.name) {
                inputs.push(c.name.clone());
            }
        }
        let mut encoded = t.clone();
        let mut encodings = Vec::with_capacity(opts.categorical.len());
        for c in opts.categorical {
            let (next, map) = one_hot(&encoded, c, opts.drop_first)?;
            encoded = next;
            encodings.push(map);
        }
        let dummy_names: Vec<String> = encodings.iter().flat_map(|m| m.output_names()).collect();
        let mut features = Vec::new();
        let mut indicators = Vec::new();
        for c in encoded.columns() {
            if dummy_names.contains(&c.name) {
                indicators.push(features.len());
                features.push(c.name.clone());
            } else if opts.numeric.contains(&c.name) {
                features.push(c.name.clone());
            }
        }
        if features.is_empty() {
            return Err(Error::NoNumericColumns.into());
        }
        let mut x = encoded.numeric_matrix(&features)?;
        let mut caps = Vec::with_capacity(opts.cap_columns.len());
        for name in opts.cap_columns {
            if !opts.numeric.contains(name) {
                return Err(CliError::Usage(format!("cap column {name:?} is not a numeric feature")));
            }
            let j = features.iter().position(|f| f == name).expect("numeric feature");
            let col = x.column(j);
            let fit: Vec<f64> = fit_rows.iter().map(|&i| col[i]).collect();
            let fences = iqr_fences(&fit, opts.cap_k)?;
            caps.push(CapRule {
                column: name.clone(),
                fences,
            });
        }
        apply_caps(&mut x, &features, &caps);
        let mut scaler = standardize_fit(&x.select_rows(fit_rows))?.params;
        if !opts.standardize_indicators {
            for &j in &indicators {
                scaler.means[j] = 0.0;
                scaler.stds[j] = 1.0;
            }
        }
        let z = standardize_apply(&scaler, &x)?;
        Ok((
            Preprocessor {
                inputs,
                encodings,
                features,
                indicators,
                caps,
                scaler,
            },
            z,
        ))
    }

    /// Applies the fitted transform to new rows. Unseen categorical levels
    /// fail in strict mode and otherwise encode as all zeros with a warning.
    pub fn transform(&self, t: &Table, strict: bool) -> CliResult<(Matrix, Vec<String>)> {
        let mut warnings = Vec::new();
        let encoded = encode(t, &self.encodings, strict, &mut warnings)?;
        let mut x = encoded.numeric_matrix(&self.features)?;
        apply_caps(&mut x, &self.features, &self.caps);
        Ok((standardize_apply(&self.scaler, &x)?, warnings))
    }
}

fn apply_caps(x: &mut Matrix, features: &[String], caps: &[CapRule]) {
    for rule in caps {
        let j = features.iter().position(|f| *f == rule.column).expect("capped feature");
        for i in 0..x.rows() {
            x[(i, j)] = rule.fences.cap(x[(i, j)]);
        }
    }
}

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Everything needed to score raw rows: preprocessing, label coding and the
/// classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub label: String,
    pub negative: String,
    pub positive: String,
    pub preprocessor: Preprocessor,
    pub model: ModelEnvelope,
}

impl ModelBundle {
    pub fn new(label: &str, labels: &BinaryLabels, preprocessor: Preprocessor, classifier: TrainedClassifier) -> Self {
        Self {
            format_version: BUNDLE_FORMAT_VERSION,
            label: label.to_string(),
            negative: labels.negative.clone(),
            positive: labels.positive.clone(),
            preprocessor,
            model: ModelEnvelope::new(classifier),
        }
    }

    pub fn read(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::FileUnreadable {
            path: path.display().to_string(),
            source,
        })?;
        let bundle: ModelBundle = serde_json::from_str(&text).map_err(Error::from)?;
        if bundle.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "model bundle format {} is not supported (expected {BUNDLE_FORMAT_VERSION})",
                bundle.format_version
            ))
            .into());
        }
        // Re-check the classifier envelope version as well.
        ModelEnvelope::from_json(&serde_json::to_string(&bundle.model).map_err(Error::from)?)?;
        Ok(bundle)
    }

    pub fn classifier(&self) -> &TrainedClassifier {
        &self.model.classifier
    }

    /// Labels of `t` coded with this bundle's positive level.
    pub fn labels(&self, t: &Table) -> CliResult<Vec<u8>> {
        Ok(binary_labels(t, &self.label, Some(&self.positive))?.values)
    }
}
