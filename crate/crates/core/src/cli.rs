//! `pdfsift` command line.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data or model errors.
//! Results go to stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::features::{extract_from_bytes, feature_names, FEATURE_COUNT};
use crate::metrics::{confusion, rates, threshold_sweep};
use crate::mlp::TrainConfig;
use crate::pca::fit_pca;
use crate::pipeline::{load_bundle, save_bundle, train_pipeline, write_atomic, Components};
use crate::preprocess::{fit_scaler, format_real, FeatureMatrix};
use crate::synth::{generate_corpus, CorpusSpec, MANIFEST};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pdfsift", version, about = "Static PDF malware triage")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the 48 features from a file or a directory tree of PDFs.
    Extract(ExtractArgs),
    /// Train a model bundle from a feature CSV.
    Train(TrainArgs),
    /// Score one file with a model bundle.
    Score(ScoreArgs),
    /// Evaluate a model bundle on a labelled feature CSV.
    Eval(EvalArgs),
    /// Cumulative explained variance for every component count.
    Variance(VarianceArgs),
    /// Generate a labelled synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// 0, 1, or from-manifest (reads manifest.csv next to the input)
    #[arg(long)]
    pub label: LabelSource,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    Fixed(u8),
    Manifest,
}

impl std::str::FromStr for LabelSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "0" => Ok(LabelSource::Fixed(0)),
            "1" => Ok(LabelSource::Fixed(1)),
            "from-manifest" => Ok(LabelSource::Manifest),
            other => Err(format!("expected 0, 1 or from-manifest, got {other:?}")),
        }
    }
}

fn parse_components(s: &str) -> std::result::Result<Components, String> {
    let c: Components = s.parse()?;
    match c {
        Components::Fixed(p) if p == 0 || p > FEATURE_COUNT => Err(format!(
            "INVALID_COMPONENT_COUNT: {p} is outside 1..={FEATURE_COUNT}"
        )),
        Components::Auto(r) if !(r > 0.0 && r <= 1.0) => Err(format!(
            "INVALID_FRACTION: auto ratio {r} is outside (0, 1]"
        )),
        c => Ok(c),
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// P in 1..=48, or auto:<ratio>
    #[arg(long, value_parser = parse_components)]
    pub components: Components,
    #[arg(long, default_value_t = 5000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.15)]
    pub dropout: f64,
    #[arg(long = "val-frac", default_value_t = 0.2)]
    pub val_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Write `threshold,tpr,fpr` for thresholds 0, 0.01, ..., 1
    #[arg(long)]
    pub sweep: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub benign: usize,
    #[arg(long)]
    pub malicious: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub overlap: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse `argv` (including the program name) and run it.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(Failure {
            path: Some(p),
            error,
        }) => {
            let _ = writeln!(err, "error: {}: {error}", p.display());
            EXIT_DATA
        }
        Err(Failure { path: None, error }) => {
            let _ = writeln!(err, "error: {error}");
            EXIT_DATA
        }
    }
}

/// A command error with the input it concerns.
struct Failure {
    path: Option<PathBuf>,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { path: None, error }
    }
}

fn at(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |error| Failure {
        path: Some(path.to_path_buf()),
        error,
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match cmd {
        Command::Extract(a) => extract(&a, err),
        Command::Train(a) => train(&a, err),
        Command::Score(a) => score(&a, out),
        Command::Eval(a) => eval(&a, out),
        Command::Variance(a) => variance(&a),
        Command::Synth(a) => synth(&a, err),
    }
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn is_pdf(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pdf"))
}

fn collect_pdfs(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_pdfs(&path, found)?;
        } else if is_pdf(&path) {
            found.push(path);
        }
    }
    Ok(())
}

/// Labels keyed by the manifest's relative paths.
fn read_manifest(dir: &Path) -> Result<Vec<(PathBuf, u8)>> {
    let path = dir.join(MANIFEST);
    let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
        let (Some(p), Some(l)) = (rec.get(0), rec.get(1)) else {
            return Err(Error::Csv(format!(
                "{}: expected path,label",
                path.display()
            )));
        };
        let label = match l {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::Csv(format!("{}: label {other:?}", path.display()))),
        };
        rows.push((dir.join(p), label));
    }
    Ok(rows)
}

fn extract(a: &ExtractArgs, err: &mut dyn Write) -> CmdResult {
    let mut files = Vec::new();
    let meta = std::fs::metadata(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let base = if meta.is_dir() {
        collect_pdfs(&a.input, &mut files)?;
        a.input.clone()
    } else {
        files.push(a.input.clone());
        a.input.parent().map(Path::to_path_buf).unwrap_or_default()
    };
    files.sort();
    let manifest = match a.label {
        LabelSource::Manifest => Some(read_manifest(&base)?),
        LabelSource::Fixed(_) => None,
    };

    let mut rows = Vec::with_capacity(files.len());
    for path in &files {
        let label = match (&manifest, a.label) {
            (_, LabelSource::Fixed(l)) => l,
            (Some(m), _) => m
                .iter()
                .find(|(p, _)| p == path)
                .map(|(_, l)| *l)
                .ok_or_else(|| {
                    Error::Csv(format!("{} is not listed in {MANIFEST}", path.display()))
                })?,
            (None, LabelSource::Manifest) => unreachable!("manifest loaded above"),
        };
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        rows.push((
            path.display().to_string(),
            label,
            extract_from_bytes(&bytes),
        ));
    }
    let mut matrix = FeatureMatrix::from_vectors(&rows)?;
    if a.out.exists() {
        let mut existing = read_features(&a.out).map_err(at(&a.out))?;
        existing.extend(&matrix)?;
        matrix = existing;
    }
    let mut buf = Vec::new();
    matrix.write_csv(&mut buf)?;
    write_atomic(&a.out, &buf)?;
    let _ = writeln!(
        err,
        "extracted {} files into {}",
        rows.len(),
        a.out.display()
    );
    Ok(())
}

fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let names: Vec<&str> = feature_names().collect();
    FeatureMatrix::read_csv(file, Some(&names))
}

/// Deterministic creation stamp: `SOURCE_DATE_EPOCH` when set, else 0.
fn creation_time() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

fn train(a: &TrainArgs, err: &mut dyn Write) -> CmdResult {
    let x = read_features(&a.features).map_err(at(&a.features))?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        dropout_rate: a.dropout,
        validation_fraction: a.val_frac,
        seed: a.seed,
    };
    let (mut bundle, report) = train_pipeline(&x, a.components, &cfg)?;
    bundle.meta.created = creation_time();
    save_bundle(&bundle, &a.out)?;
    if let Some(h) = &a.history {
        let mut buf = Vec::new();
        report.history.write_csv(&mut buf)?;
        write_atomic(h, &buf)?;
    }
    let best = report
        .history
        .records
        .iter()
        .find(|r| Some(r.epoch) == report.history.best_epoch);
    let _ = writeln!(
        err,
        "trained P={} on {} rows; best epoch {} (validation accuracy {}); mean epoch {:.4}s",
        bundle.components,
        bundle.meta.train_rows,
        bundle.meta.best_epoch,
        best.map_or(0.0, |r| r.val_acc),
        report.history.mean_epoch_seconds()
    );
    Ok(())
}

fn score(a: &ScoreArgs, out: &mut dyn Write) -> CmdResult {
    let bundle = load_bundle(&a.model).map_err(at(&a.model))?;
    let bytes = std::fs::read(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let s = bundle.score_bytes(&bytes).map_err(at(&a.input))?;
    if a.json {
        let features: serde_json::Map<String, serde_json::Value> = feature_names()
            .zip(s.features.as_slice())
            .map(|(n, v)| (n.to_string(), serde_json::json!(v)))
            .collect();
        let doc = serde_json::json!({
            "path": a.input.display().to_string(),
            "probability": s.probability,
            "verdict": s.verdict.as_str(),
            "threshold": bundle.meta.threshold,
            "features": features,
        });
        writeln!(out, "{doc}").map_err(stdout_err)?;
    } else {
        writeln!(out, "{},{}", format_real(s.probability), s.verdict).map_err(stdout_err)?;
    }
    Ok(())
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> CmdResult {
    let bundle = load_bundle(&a.model).map_err(at(&a.model))?;
    let x = read_features(&a.features).map_err(at(&a.features))?;
    let probs = bundle.predict_matrix(&x)?;
    let c = confusion(&probs, x.labels(), a.threshold)?;
    let r = rates(&c);
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        c.tp,
        c.fp,
        c.tn,
        c.fn_,
        format_real(r.tpr),
        format_real(r.fpr),
        format_real(r.accuracy)
    )
    .map_err(stdout_err)?;
    if let Some(path) = &a.sweep {
        let thresholds: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let mut text = String::from("threshold,tpr,fpr\n");
        for row in threshold_sweep(&probs, x.labels(), &thresholds)? {
            text.push_str(&format!(
                "{},{},{}\n",
                format_real(row.threshold),
                format_real(row.tpr),
                format_real(row.fpr)
            ));
        }
        write_atomic(path, text.as_bytes())?;
    }
    Ok(())
}

fn variance(a: &VarianceArgs) -> CmdResult {
    let x = read_features(&a.features).map_err(at(&a.features))?;
    let scaled = fit_scaler(&x)?.apply(&x)?;
    let pca = fit_pca(&scaled)?;
    let mut text = String::from("P,R_cev\n");
    for (i, r) in pca.explained_variance_curve().iter().enumerate() {
        text.push_str(&format!("{},{}\n", i + 1, format_real(*r)));
    }
    Ok(write_atomic(&a.out, text.as_bytes())?)
}

fn synth(a: &SynthArgs, err: &mut dyn Write) -> CmdResult {
    let spec = CorpusSpec {
        n_benign: a.benign,
        n_malicious: a.malicious,
        seed: a.seed,
        trait_overlap: a.overlap,
    };
    let manifest = generate_corpus(&spec, &a.out)?;
    let _ = writeln!(err, "wrote {} files to {}", manifest.len(), a.out.display());
    Ok(())
}
