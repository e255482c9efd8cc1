//! Training and scoring pipeline (features -> scaler -> PCA -> MLP) and the
//! model bundle file.
//!
//! The bundle is line-oriented ASCII:
//!
//! ```text
//! PDFSIFT-MODEL v1
//! FEATURES 48
//! F_SIZE,F_PGC,...
//! SCALER 48
//! <means> / <stds> / <zero-variance flags>
//! PCA <input_dim> <P>
//! <column means> / <singular values> / P component rows
//! MLP <layer sizes> <dropout>
//! LAYER i <fan_in> <fan_out> then fan_in weight rows and one bias row
//! BATCHNORM i <units> <epsilon> then gamma, beta, running mean, running var
//! META
//! key=value lines
//! END
//! ```
//!
//! Reals use Rust's shortest round-trip formatting, so a save/load cycle is
//! bit-exact.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, ModelInvalidReason, Result};
use crate::features::{extract_from_bytes, feature_names, FeatureVector, FEATURE_COUNT};
use crate::mlp::{fit, init_mlp, BatchNorm, Dense, MlpModel, TrainConfig, TrainingHistory};
use crate::pca::{fit_pca, PcaModel};
use crate::preprocess::{fit_scaler, format_real, split_train_validation, FeatureMatrix, Scaler};

pub const MAGIC: &str = "PDFSIFT-MODEL v1";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Largest tolerated `|c_i . c_j - delta_ij|` for stored components.
pub const ORTHO_TOLERANCE: f64 = 1e-9;

/// Number of principal components fed to the MLP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Components {
    Fixed(usize),
    /// Smallest P whose cumulative explained variance reaches the ratio.
    Auto(f64),
}

impl FromStr for Components {
    type Err = String;

    /// `"32"` or `"auto:0.9"`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(r) = s.strip_prefix("auto:") {
            let ratio: f64 = r.parse().map_err(|_| format!("bad ratio in {s:?}"))?;
            return Ok(Components::Auto(ratio));
        }
        s.parse()
            .map(Components::Fixed)
            .map_err(|_| format!("expected a component count or auto:<ratio>, got {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub config: TrainConfig,
    pub train_rows: usize,
    pub validation_rows: usize,
    pub best_epoch: usize,
    /// Unix seconds; 0 when unset.
    pub created: u64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub scaler: Scaler,
    /// Truncated to the selected components.
    pub pca: PcaModel,
    pub components: usize,
    pub mlp: MlpModel,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Benign,
    Malicious,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Benign => "benign",
            Verdict::Malicious => "malicious",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub probability: f64,
    pub verdict: Verdict,
    pub features: FeatureVector,
}

/// Everything `train_pipeline` produced besides the bundle.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub history: TrainingHistory,
    pub train_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    /// Explained-variance curve of the full PCA fit.
    pub variance_curve: Vec<f64>,
}

fn identity_pca(train: &FeatureMatrix) -> PcaModel {
    let n = train.cols();
    let singular_values = (0..n)
        .map(|j| train.column(j).map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    PcaModel {
        column_means: vec![0.0; n],
        components: (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect(),
        singular_values,
        fitted_on: (train.rows(), n),
    }
}

/// Split, standardize on the training rows, fit PCA on the scaled training
/// rows, project, and train the MLP on `P` inputs. `P` equal to the full
/// feature count keeps the features as they are (identity projection).
pub fn train_pipeline(
    features: &FeatureMatrix,
    components: Components,
    cfg: &TrainConfig,
) -> Result<(ModelBundle, TrainReport)> {
    cfg.validate()?;
    let canonical: Vec<&str> = feature_names().collect();
    if features.names() != canonical.as_slice() {
        return Err(Error::SchemaMismatch(format!(
            "expected the {FEATURE_COUNT} canonical feature columns, got {} columns",
            features.cols()
        )));
    }
    match (features.class_count(0), features.class_count(1)) {
        (0, 0) => return Err(Error::InsufficientSamples { needed: 2, got: 0 }),
        (0, _) => return Err(Error::SingleClass(1)),
        (_, 0) => return Err(Error::SingleClass(0)),
        _ => {}
    }
    match components {
        Components::Fixed(p) if p == 0 || p > FEATURE_COUNT => {
            return Err(Error::InvalidComponentCount {
                requested: p,
                available: FEATURE_COUNT,
            })
        }
        Components::Auto(r) if !(r > 0.0 && r <= 1.0) => return Err(Error::InvalidFraction(r)),
        _ => {}
    }

    let split = split_train_validation(features, cfg.validation_fraction, cfg.seed)?;
    if split.train.rows() < 2 || split.validation.rows() == 0 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: features.rows(),
        });
    }
    let scaler = fit_scaler(&split.train)?;
    let train = scaler.apply(&split.train)?;
    let validation = scaler.apply(&split.validation)?;
    let full = fit_pca(&train)?;
    let variance_curve = full.explained_variance_curve();
    let p = match components {
        Components::Fixed(p) => p,
        Components::Auto(r) => full.choose_components(r),
    };
    let pca = if p == FEATURE_COUNT {
        identity_pca(&train)
    } else {
        if p > full.component_count() {
            return Err(Error::InvalidComponentCount {
                requested: p,
                available: full.component_count(),
            });
        }
        PcaModel {
            column_means: full.column_means.clone(),
            components: full.components[..p].to_vec(),
            singular_values: full.singular_values[..p].to_vec(),
            fitted_on: full.fitted_on,
        }
    };
    let train_p = pca.project(&train, p)?;
    let validation_p = pca.project(&validation, p)?;
    let mut mlp = init_mlp(p, cfg.seed)?;
    mlp.dropout_rate = cfg.dropout_rate;
    let (mlp, history) = fit(&mlp, &train_p, &validation_p, cfg)?;
    let bundle = ModelBundle {
        format_version: FORMAT_VERSION,
        feature_names: canonical.iter().map(|s| s.to_string()).collect(),
        scaler,
        pca,
        components: p,
        mlp,
        meta: TrainingMeta {
            config: cfg.clone(),
            train_rows: split.train.rows(),
            validation_rows: split.validation.rows(),
            best_epoch: history.best_epoch.unwrap_or(0),
            created: 0,
            threshold: DEFAULT_THRESHOLD,
        },
    };
    Ok((
        bundle,
        TrainReport {
            history,
            train_rows: split.train_rows,
            validation_rows: split.validation_rows,
            variance_curve,
        },
    ))
}

impl ModelBundle {
    pub fn dimensionality_reduction(&self) -> f64 {
        1.0 - self.components as f64 / self.feature_names.len() as f64
    }

    /// Probability for one raw 48-feature row.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        let scaled = self.scaler.apply_row(row)?;
        let projected = self.pca.project_row(&scaled, self.components)?;
        self.mlp.predict_proba(&projected)
    }

    /// Probabilities for every row of a raw feature matrix.
    pub fn predict_matrix(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        let scaled = self.scaler.apply(x)?;
        let projected = self.pca.project(&scaled, self.components)?;
        self.mlp.forward(projected.data())
    }

    pub fn verdict(&self, probability: f64) -> Verdict {
        if probability >= self.meta.threshold {
            Verdict::Malicious
        } else {
            Verdict::Benign
        }
    }

    pub fn score_bytes(&self, bytes: &[u8]) -> Result<Score> {
        let features = extract_from_bytes(bytes);
        let probability = self.predict_row(features.as_slice())?;
        Ok(Score {
            probability,
            verdict: self.verdict(probability),
            features,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let row = |s: &mut String, values: &[f64]| {
            let line: Vec<String> = values.iter().map(|v| format_real(*v)).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        };
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "FEATURES {}", self.feature_names.len());
        let _ = writeln!(s, "{}", self.feature_names.join(","));

        let _ = writeln!(s, "SCALER {}", self.scaler.means.len());
        row(&mut s, &self.scaler.means);
        row(&mut s, &self.scaler.stds);
        let flags: Vec<&str> = self
            .scaler
            .zero_variance
            .iter()
            .map(|f| if *f { "1" } else { "0" })
            .collect();
        let _ = writeln!(s, "{}", flags.join(","));

        let _ = writeln!(
            s,
            "PCA {} {} {} {}",
            self.pca.input_dim(),
            self.components,
            self.pca.fitted_on.0,
            self.pca.fitted_on.1
        );
        row(&mut s, &self.pca.column_means);
        row(&mut s, &self.pca.singular_values);
        for c in &self.pca.components {
            row(&mut s, c);
        }

        let sizes: Vec<String> = self.mlp.layer_sizes.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            s,
            "MLP {} {}",
            sizes.join(","),
            format_real(self.mlp.dropout_rate)
        );
        for (i, layer) in self.mlp.layers.iter().enumerate() {
            let _ = writeln!(s, "LAYER {i} {} {}", layer.fan_in, layer.fan_out);
            for w in layer.weights.chunks(layer.fan_out) {
                row(&mut s, w);
            }
            row(&mut s, &layer.biases);
        }
        for (i, bn) in self.mlp.norms.iter().enumerate() {
            let _ = writeln!(
                s,
                "BATCHNORM {i} {} {}",
                bn.gamma.len(),
                format_real(bn.epsilon)
            );
            row(&mut s, &bn.gamma);
            row(&mut s, &bn.beta);
            row(&mut s, &bn.running_mean);
            row(&mut s, &bn.running_var);
        }

        let m = &self.meta;
        let c = &m.config;
        let _ = writeln!(s, "META");
        let _ = writeln!(s, "threshold={}", format_real(m.threshold));
        let _ = writeln!(s, "seed={}", c.seed);
        let _ = writeln!(s, "epochs={}", c.epochs);
        let _ = writeln!(s, "batch_size={}", c.batch_size);
        let _ = writeln!(s, "learning_rate={}", format_real(c.learning_rate));
        let _ = writeln!(s, "dropout_rate={}", format_real(c.dropout_rate));
        let _ = writeln!(
            s,
            "validation_fraction={}",
            format_real(c.validation_fraction)
        );
        let _ = writeln!(s, "train_rows={}", m.train_rows);
        let _ = writeln!(s, "validation_rows={}", m.validation_rows);
        let _ = writeln!(s, "best_epoch={}", m.best_epoch);
        let _ = writeln!(s, "created={}", m.created);
        s.push_str("END\n");
        s
    }

    pub fn from_text(text: &str) -> Result<ModelBundle> {
        let mut r = Reader::new(text);
        let first = r.lines.next().unwrap_or("");
        if first != MAGIC {
            if first.starts_with("PDFSIFT-MODEL v") {
                return Err(Error::model(
                    ModelInvalidReason::VersionUnsupported,
                    format!("{first:?}, this build reads {MAGIC:?}"),
                ));
            }
            return Err(Error::model(
                ModelInvalidReason::BadMagic,
                format!("first line {first:?}"),
            ));
        }

        let n = r.header("FEATURES", 1)?[0];
        let names: Vec<String> = r.line()?.split(',').map(str::to_string).collect();
        let canonical: Vec<String> = feature_names().map(str::to_string).collect();
        if n != FEATURE_COUNT || names != canonical {
            return Err(shape("feature list differs from the canonical 48 features"));
        }

        r.header_exact("SCALER", &[n])?;
        let means = r.reals(n)?;
        let stds = r.reals(n)?;
        let zero_variance = r
            .line()?
            .split(',')
            .map(|f| match f {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(shape(format!("bad zero-variance flag {other:?}"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        if zero_variance.len() != n {
            return Err(shape("zero-variance flag count"));
        }
        if stds.iter().any(|s| *s <= 0.0) {
            return Err(shape("scaler standard deviations must be positive"));
        }

        let pca_dims = r.header("PCA", 4)?;
        let (input_dim, p) = (pca_dims[0], pca_dims[1]);
        if input_dim != n || p == 0 || p > n {
            return Err(shape(format!("PCA {input_dim}x{p} for {n} features")));
        }
        let column_means = r.reals(n)?;
        let singular_values = r.reals(p)?;
        if singular_values.iter().any(|s| *s < 0.0) {
            return Err(shape("negative singular value"));
        }
        let components = (0..p).map(|_| r.reals(n)).collect::<Result<Vec<_>>>()?;
        let pca = PcaModel {
            column_means,
            components,
            singular_values,
            fitted_on: (pca_dims[2], pca_dims[3]),
        };

        let line = r.line()?;
        let mut parts = line.split(' ');
        if parts.next() != Some("MLP") {
            return Err(shape(format!("expected MLP section, got {line:?}")));
        }
        let sizes = parts
            .next()
            .ok_or_else(|| shape("missing layer sizes"))?
            .split(',')
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| shape(format!("bad layer size {v:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let dropout_rate = parse_real(parts.next().ok_or_else(|| shape("missing dropout"))?)?;
        if parts.next().is_some() || sizes.len() < 2 || sizes.contains(&0) {
            return Err(shape(format!("bad MLP header {line:?}")));
        }
        if sizes[0] != p || *sizes.last().unwrap_or(&0) != 1 {
            return Err(shape(format!("MLP input {} vs {p} components", sizes[0])));
        }
        let mut layers = Vec::new();
        for (i, pair) in sizes.windows(2).enumerate() {
            r.header_exact("LAYER", &[i, pair[0], pair[1]])?;
            let mut weights = Vec::with_capacity(pair[0] * pair[1]);
            for _ in 0..pair[0] {
                weights.extend(r.reals(pair[1])?);
            }
            let biases = r.reals(pair[1])?;
            layers.push(Dense {
                fan_in: pair[0],
                fan_out: pair[1],
                weights,
                biases,
            });
        }
        let mut norms = Vec::new();
        for (i, units) in sizes[1..sizes.len() - 1].iter().enumerate() {
            let line = r.line()?;
            let fields: Vec<&str> = line.split(' ').collect();
            if fields.len() != 4
                || fields[0] != "BATCHNORM"
                || fields[1] != i.to_string()
                || fields[2] != units.to_string()
            {
                return Err(shape(format!(
                    "expected BATCHNORM {i} {units}, got {line:?}"
                )));
            }
            let epsilon = parse_real(fields[3])?;
            let gamma = r.reals(*units)?;
            let beta = r.reals(*units)?;
            let running_mean = r.reals(*units)?;
            let running_var = r.reals(*units)?;
            if running_var.iter().any(|v| *v < 0.0) || epsilon <= 0.0 {
                return Err(shape("batch-norm variance and epsilon must be nonnegative"));
            }
            norms.push(BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
                epsilon,
            });
        }
        let mlp = MlpModel {
            layer_sizes: sizes,
            layers,
            norms,
            dropout_rate,
        };

        if r.line()? != "META" {
            return Err(shape("missing META section"));
        }
        let mut kv = std::collections::BTreeMap::new();
        loop {
            let line = r.line()?;
            if line == "END" {
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| shape(format!("bad META line {line:?}")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        if r.lines.next() != Some("") || r.lines.next().is_some() {
            return Err(shape("bundle must end with a single END line"));
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| shape(format!("META lacks {k}")));
        let int = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| shape(format!("META {k} is not an integer")))
        };
        let real = |k: &str| -> Result<f64> { parse_real(get(k)?) };
        let meta = TrainingMeta {
            config: TrainConfig {
                epochs: int("epochs")? as usize,
                batch_size: int("batch_size")? as usize,
                learning_rate: real("learning_rate")?,
                dropout_rate: real("dropout_rate")?,
                validation_fraction: real("validation_fraction")?,
                seed: int("seed")?,
            },
            train_rows: int("train_rows")? as usize,
            validation_rows: int("validation_rows")? as usize,
            best_epoch: int("best_epoch")? as usize,
            created: int("created")?,
            threshold: real("threshold")?,
        };

        let scaler = Scaler {
            means,
            stds,
            zero_variance,
            feature_names: names.clone(),
        };
        let bundle = ModelBundle {
            format_version: FORMAT_VERSION,
            feature_names: names,
            scaler,
            pca,
            components: p,
            mlp,
            meta,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Finiteness and orthonormality checks shared by load and save.
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let scaler_ok = finite(&self.scaler.means) && finite(&self.scaler.stds);
        let pca_ok = finite(&self.pca.column_means)
            && finite(&self.pca.singular_values)
            && self.pca.components.iter().all(|c| finite(c));
        let meta_ok = self.meta.threshold.is_finite()
            && self.meta.config.learning_rate.is_finite()
            && self.meta.config.dropout_rate.is_finite()
            && self.meta.config.validation_fraction.is_finite()
            && self.mlp.dropout_rate.is_finite()
            && self.mlp.norms.iter().all(|b| b.epsilon.is_finite());
        if !(scaler_ok && pca_ok && meta_ok && self.mlp.is_finite()) {
            return Err(Error::model(
                ModelInvalidReason::NonFinite,
                "non-finite parameter",
            ));
        }
        if self.mlp.input_dim() != self.components || self.pca.component_count() != self.components
        {
            return Err(shape("component count disagrees between PCA and MLP"));
        }
        let err = self.pca.orthonormality_error();
        if err > ORTHO_TOLERANCE {
            return Err(Error::model(
                ModelInvalidReason::OrthoFail,
                format!("components deviate from orthonormal by {err:e}"),
            ));
        }
        Ok(())
    }
}

fn shape(detail: impl Into<String>) -> Error {
    Error::model(ModelInvalidReason::ShapeMismatch, detail)
}

fn parse_real(s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| shape(format!("bad number {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::model(
            ModelInvalidReason::NonFinite,
            format!("value {s}"),
        ));
    }
    Ok(v)
}

struct Reader<'a> {
    lines: std::str::Split<'a, char>,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Reader {
            lines: text.split('\n'),
        }
    }

    fn line(&mut self) -> Result<&'a str> {
        self.lines
            .next()
            .ok_or_else(|| shape("unexpected end of file"))
    }

    fn header(&mut self, name: &str, fields: usize) -> Result<Vec<usize>> {
        let line = self.line()?;
        let mut parts = line.split(' ');
        if parts.next() != Some(name) {
            return Err(shape(format!("expected {name} section, got {line:?}")));
        }
        let values = parts
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| shape(format!("bad {name} header {line:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != fields {
            return Err(shape(format!("bad {name} header {line:?}")));
        }
        Ok(values)
    }

    fn header_exact(&mut self, name: &str, expected: &[usize]) -> Result<()> {
        let got = self.header(name, expected.len())?;
        if got != expected {
            return Err(shape(format!(
                "{name} header {got:?}, expected {expected:?}"
            )));
        }
        Ok(())
    }

    fn reals(&mut self, n: usize) -> Result<Vec<f64>> {
        let values = self
            .line()?
            .split(',')
            .map(parse_real)
            .collect::<Result<Vec<_>>>()?;
        if values.len() != n {
            return Err(shape(format!(
                "row of {} values, expected {n}",
                values.len()
            )));
        }
        Ok(values)
    }
}

pub fn score_file(bundle: &ModelBundle, bytes: &[u8]) -> Result<Score> {
    bundle.score_bytes(bytes)
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    bundle.validate()?;
    write_atomic(path, bundle.to_text().as_bytes())
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::model(ModelInvalidReason::BadMagic, "bundle is not UTF-8 text"))?;
    ModelBundle::from_text(&text)
}

/// Write to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
