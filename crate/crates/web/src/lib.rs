//! Browser bindings for pdfsift.
//!
//! The plain functions return JSON values and are usable natively; the
//! `#[wasm_bindgen]` wrappers hand JSON text to the page.

use pdfsift::features::{extract_from_bytes, feature_names, FeatureVector};
use pdfsift::metrics::{confusion, rates};
use pdfsift::mlp::TrainConfig;
use pdfsift::pca::fit_pca;
use pdfsift::pdf::{count_pages, parse_document, ParseWarning};
use pdfsift::pipeline::{train_pipeline, Components, ModelBundle, TrainReport};
use pdfsift::preprocess::{fit_scaler, FeatureMatrix};
use pdfsift::synth::{generate_file, generate_in_memory, CorpusSpec};
use pdfsift::{Error, Result};
use serde_json::{json, Map, Value};
use wasm_bindgen::prelude::*;

fn feature_map(v: &FeatureVector) -> Value {
    let map: Map<String, Value> = feature_names()
        .zip(v.as_slice())
        .map(|(n, x)| (n.to_string(), json!(x)))
        .collect();
    Value::Object(map)
}

/// Parser summary and the 48 features of one file.
pub fn analyze(bytes: &[u8]) -> Value {
    let doc = parse_document(bytes);
    let mut warnings: Vec<ParseWarning> = doc.parse_warnings.clone();
    warnings.sort();
    warnings.dedup();
    let warnings: Map<String, Value> = warnings
        .into_iter()
        .map(|w| (w.code().to_string(), json!(doc.warning_count(w))))
        .collect();
    json!({
        "size": doc.raw_size_bytes,
        "header_version": doc.header_version,
        "xref_ok": doc.xref_ok,
        "eof_markers": doc.eof_marker_count,
        "objects": doc.objects.len(),
        "streams": doc.streams().count(),
        "pages": count_pages(&doc),
        "encrypted": doc.is_encrypted(),
        "warnings": warnings,
        "features": feature_map(&extract_from_bytes(bytes)),
    })
}

fn corpus(spec: &CorpusSpec) -> Result<FeatureMatrix> {
    let rows: Vec<_> = generate_in_memory(spec)?
        .into_iter()
        .map(|f| (f.name, f.label, extract_from_bytes(&f.bytes)))
        .collect();
    FeatureMatrix::from_vectors(&rows)
}

/// R_cev for every component count on a generated corpus.
pub fn variance_report(spec: &CorpusSpec) -> Result<Value> {
    let x = corpus(spec)?;
    let pca = fit_pca(&fit_scaler(&x)?.apply(&x)?)?;
    Ok(json!({
        "curve": pca.explained_variance_curve(),
        "auto_90": pca.choose_components(0.90),
        "auto_99": pca.choose_components(0.99),
    }))
}

/// A bundle trained on a generated corpus and checked on a second one.
pub struct Demo {
    pub bundle: ModelBundle,
    pub summary: Value,
}

pub fn train_demo(spec: &CorpusSpec, components: Components, epochs: usize) -> Result<Demo> {
    let train = corpus(spec)?;
    let held_out = CorpusSpec {
        n_benign: (spec.n_benign / 4).max(1),
        n_malicious: (spec.n_malicious / 4).max(1),
        seed: spec.seed.wrapping_add(1),
        trait_overlap: spec.trait_overlap,
    };
    let test = corpus(&held_out)?;
    let cfg = TrainConfig {
        epochs,
        seed: spec.seed,
        ..TrainConfig::default()
    };
    let (bundle, report) = train_pipeline(&train, components, &cfg)?;
    let probs = bundle.predict_matrix(&test)?;
    let c = confusion(&probs, test.labels(), bundle.meta.threshold)?;
    let r = rates(&c);
    let summary = json!({
        "components": bundle.components,
        "train_rows": bundle.meta.train_rows,
        "validation_rows": bundle.meta.validation_rows,
        "best_epoch": bundle.meta.best_epoch,
        "mean_epoch_seconds": report.history.mean_epoch_seconds(),
        "history": history(&report),
        "test": {
            "rows": test.rows(),
            "tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn_,
            "tpr": r.tpr, "fpr": r.fpr, "accuracy": r.accuracy,
        },
    });
    Ok(Demo { bundle, summary })
}

fn history(report: &TrainReport) -> Value {
    report
        .history
        .records
        .iter()
        .map(|r| json!([r.epoch, r.train_loss, r.train_acc, r.val_acc]))
        .collect()
}

pub fn score(bundle: &ModelBundle, bytes: &[u8]) -> Result<Value> {
    let s = bundle.score_bytes(bytes)?;
    Ok(json!({
        "probability": s.probability,
        "verdict": s.verdict.as_str(),
        "threshold": bundle.meta.threshold,
        "features": feature_map(&s.features),
    }))
}

/// One generated file, benign or with every malicious trait.
pub fn sample(malicious: bool, seed: u64) -> Vec<u8> {
    generate_file(&CorpusSpec::new(1, 1, seed), usize::from(malicious)).bytes
}

fn js_err(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn spec(
    n_benign: usize,
    n_malicious: usize,
    seed: u64,
    overlap: f64,
) -> std::result::Result<CorpusSpec, JsError> {
    let s = CorpusSpec::new(n_benign, n_malicious, seed).with_overlap(overlap);
    s.validate().map_err(js_err)?;
    Ok(s)
}

#[wasm_bindgen(js_name = analyzePdf)]
pub fn analyze_pdf(bytes: &[u8]) -> String {
    analyze(bytes).to_string()
}

#[wasm_bindgen(js_name = varianceCurve)]
pub fn variance_curve(
    n_benign: usize,
    n_malicious: usize,
    seed: u32,
    overlap: f64,
) -> std::result::Result<String, JsError> {
    let s = spec(n_benign, n_malicious, seed.into(), overlap)?;
    Ok(variance_report(&s).map_err(js_err)?.to_string())
}

#[wasm_bindgen(js_name = samplePdf)]
pub fn sample_pdf(malicious: bool, seed: u32) -> Vec<u8> {
    sample(malicious, seed.into())
}

#[wasm_bindgen]
pub struct Model {
    demo: Demo,
}

#[wasm_bindgen]
impl Model {
    /// `components` is a count in 1..=48 or `auto:<ratio>`.
    pub fn train(
        n_benign: usize,
        n_malicious: usize,
        seed: u32,
        overlap: f64,
        components: &str,
        epochs: usize,
    ) -> std::result::Result<Model, JsError> {
        let s = spec(n_benign, n_malicious, seed.into(), overlap)?;
        let c: Components = components.parse().map_err(|e: String| JsError::new(&e))?;
        let demo = train_demo(&s, c, epochs).map_err(js_err)?;
        Ok(Model { demo })
    }

    pub fn summary(&self) -> String {
        self.demo.summary.to_string()
    }

    pub fn score(&self, bytes: &[u8]) -> std::result::Result<String, JsError> {
        Ok(score(&self.demo.bundle, bytes).map_err(js_err)?.to_string())
    }

    #[wasm_bindgen(js_name = bundleText)]
    pub fn bundle_text(&self) -> String {
        self.demo.bundle.to_text()
    }
}
