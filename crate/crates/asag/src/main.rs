//! Command-line front end: featurize, train, compare, explain, predict.
//!
//! Every command is a deterministic function of its input files, flags,
//! and seed. All artifacts land in the run's output directory together
//! with a `manifest.json` recording the merged configuration and a sha256
//! hash of every emitted file; `--verify-manifest` re-checks an existing
//! run directory instead of executing the command.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use asag::dataset::{load_corpus, make_5x2_folds, Corpus};
use asag::featurize::{
    featurize_corpus_with_ngrams, load_phrases, save_cache_misses, save_feature_matrix,
    CachedEmbeddings, EmbeddingProvider, EmbeddingVector, FallbackEmbedder, FeatureMatrix,
};
use asag::logreg::train_logreg;
use asag::model_io::{load_model, save_model, ModelFile};
use asag::nam::argmax;
use asag::report::{
    export_shapes, render_importance_svg, render_shape_svg, save_density_csv, save_importance_csv,
    save_shape_csv, ImportanceExport, DEFAULT_BINS, DEFAULT_GRID_SIZE, DEFAULT_TOP_N,
};
use asag::stats::{run_5x2_comparison_on_features, LogRegArm, NamArm};
use asag::trainer::{train_nam, Optimizer, TrainConfig};
use asag::{Error, Result};

#[derive(Parser)]
#[command(name = "asag", version, about = "Explainable short-answer grading")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Run seed driving folds, init, shuffles, and dropout.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Verify the manifest in --out against the files on disk instead of
    /// running the command.
    #[arg(long, global = true)]
    verify_manifest: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the rubric-phrase feature matrix.
    Featurize(CommonArgs),
    /// Train one model on the full corpus.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        model: ModelKind,
    },
    /// Run the 5x2 CV paired t-test comparing the additive model to the
    /// logistic-regression baseline, and save both full-corpus models.
    Compare(CommonArgs),
    /// Export feature importances and shape functions for a trained model.
    Explain {
        #[command(flatten)]
        common: CommonArgs,
        /// Path to a saved additive model file.
        #[arg(long)]
        model: PathBuf,
    },
    /// Score new responses with a trained model.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        /// Path to a saved model file (either kind).
        #[arg(long)]
        model: PathBuf,
        /// Input CSV with an `id,text[,rating]` header.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Nam,
    Logreg,
}

#[derive(Args, Default)]
struct CommonArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    phrases: Option<PathBuf>,
    /// Precomputed embedding cache (JSONL).
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    rating_min: Option<i32>,
    #[arg(long)]
    rating_max: Option<i32>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    hidden_units: Option<usize>,
    /// L2 strength for the logistic-regression baseline.
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    ngram_min: Option<usize>,
    #[arg(long)]
    ngram_max: Option<usize>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    /// Bars in the importance chart.
    #[arg(long)]
    top_n: Option<usize>,
    /// Shape SVGs emitted for the most important features.
    #[arg(long)]
    shape_count: Option<usize>,
    /// Features listed per prediction.
    #[arg(long)]
    top_k: Option<usize>,
}

/// Fully merged run configuration; file values fill unset flags, defaults
/// fill the rest. Serialized into the manifest verbatim.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    corpus: Option<PathBuf>,
    phrases: Option<PathBuf>,
    cache: Option<PathBuf>,
    rating_min: i32,
    rating_max: i32,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    dropout: f64,
    weight_decay: f64,
    hidden_units: usize,
    l2_strength: f64,
    ngram_min: usize,
    ngram_max: usize,
    grid_size: usize,
    bins: usize,
    top_n: usize,
    shape_count: usize,
    top_k: usize,
    seed: u64,
    out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        RunConfig {
            corpus: None,
            phrases: None,
            cache: None,
            rating_min: 1,
            rating_max: 5,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            dropout: t.dropout,
            weight_decay: t.weight_decay,
            hidden_units: t.hidden_units,
            l2_strength: 0.001,
            ngram_min: 1,
            ngram_max: 5,
            grid_size: DEFAULT_GRID_SIZE,
            bins: DEFAULT_BINS,
            top_n: DEFAULT_TOP_N,
            shape_count: 8,
            top_k: 5,
            seed: 0,
            out: None,
        }
    }
}

impl RunConfig {
    fn merge(file: Option<RunConfig>, args: &CommonArgs, cli: &Cli) -> RunConfig {
        let mut config = file.unwrap_or_default();
        macro_rules! take {
            ($field:ident, $src:expr) => {
                if let Some(v) = &$src {
                    config.$field = v.clone();
                }
            };
        }
        take!(corpus, args.corpus.clone().map(Some));
        take!(phrases, args.phrases.clone().map(Some));
        take!(cache, args.cache.clone().map(Some));
        take!(rating_min, args.rating_min);
        take!(rating_max, args.rating_max);
        take!(epochs, args.epochs);
        take!(batch_size, args.batch_size);
        take!(learning_rate, args.learning_rate);
        take!(dropout, args.dropout);
        take!(weight_decay, args.weight_decay);
        take!(hidden_units, args.hidden_units);
        take!(l2_strength, args.l2);
        take!(ngram_min, args.ngram_min);
        take!(ngram_max, args.ngram_max);
        take!(grid_size, args.grid_size);
        take!(bins, args.bins);
        take!(top_n, args.top_n);
        take!(shape_count, args.shape_count);
        take!(top_k, args.top_k);
        take!(seed, cli.seed);
        take!(out, cli.out.clone().map(Some));
        config
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            dropout: self.dropout,
            weight_decay: self.weight_decay,
            hidden_units: self.hidden_units,
            seed: self.seed,
            optimizer: Optimizer::Adam,
        }
    }

    fn corpus_path(&self) -> Result<&Path> {
        self.corpus
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("missing --corpus".into()))
    }

    fn phrases_path(&self) -> Result<&Path> {
        self.phrases
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("missing --phrases".into()))
    }

    fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("missing --out".into()))
    }

    fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_digest(json.as_bytes())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Either provider behind one type so commands stay monomorphic.
enum Provider {
    Fallback(FallbackEmbedder),
    Cached(CachedEmbeddings<FallbackEmbedder>),
}

impl Provider {
    fn open(cache: Option<&Path>) -> Result<Self> {
        Ok(match cache {
            Some(path) => Provider::Cached(CachedEmbeddings::load(path, FallbackEmbedder)?),
            None => Provider::Fallback(FallbackEmbedder),
        })
    }

    fn misses(&self) -> Option<Vec<String>> {
        match self {
            Provider::Fallback(_) => None,
            Provider::Cached(c) => Some(c.misses()),
        }
    }
}

impl EmbeddingProvider for Provider {
    fn dim(&self) -> usize {
        match self {
            Provider::Fallback(p) => p.dim(),
            Provider::Cached(p) => p.dim(),
        }
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        match self {
            Provider::Fallback(p) => p.embed(text),
            Provider::Cached(p) => p.embed(text),
        }
    }
}

/// Tracks artifacts written under the output directory; on failure every
/// partial output is removed, on success the manifest is emitted.
struct RunDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    command: String,
    seed: u64,
    config: RunConfig,
    /// Relative artifact path -> sha256 of the file contents.
    artifacts: BTreeMap<String, String>,
}

impl RunDir {
    fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(RunDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let path = self.root.join(name);
        self.written.push(path.clone());
        path
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.path(name);
        std::fs::write(path, contents)?;
        Ok(())
    }

    fn discard(&self) {
        for path in &self.written {
            let _ = std::fs::remove_file(path);
        }
    }

    fn finish(self, command: &str, config: &RunConfig) -> Result<()> {
        let mut artifacts = BTreeMap::new();
        for path in &self.written {
            let rel = path
                .strip_prefix(&self.root)
                .unwrap_or(path)
                .to_string_lossy()
                .to_string();
            let bytes = std::fs::read(path)?;
            artifacts.insert(rel, hex_digest(&bytes));
        }
        let manifest = Manifest {
            command: command.to_string(),
            seed: config.seed,
            config: config.clone(),
            artifacts,
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(self.root.join("manifest.json"), json)?;
        Ok(())
    }
}

fn verify_manifest(out: &Path) -> Result<()> {
    let data = std::fs::read_to_string(out.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&data)?;
    for (rel, expected) in &manifest.artifacts {
        let bytes = std::fs::read(out.join(rel))
            .map_err(|_| Error::Data(format!("manifest artifact `{rel}` missing")))?;
        let actual = hex_digest(&bytes);
        if &actual != expected {
            return Err(Error::Data(format!(
                "hash mismatch for `{rel}`: manifest {expected}, file {actual}"
            )));
        }
    }
    println!("manifest ok: {} artifact(s) verified", manifest.artifacts.len());
    Ok(())
}

fn load_inputs(config: &RunConfig) -> Result<(Corpus, FeatureMatrix, Provider)> {
    let corpus = load_corpus(config.corpus_path()?, config.rating_min, config.rating_max)?;
    let phrases = load_phrases(config.phrases_path()?)?;
    let provider = Provider::open(config.cache.as_deref())?;
    let features = featurize_corpus_with_ngrams(
        &corpus,
        &phrases,
        &provider,
        config.ngram_min,
        config.ngram_max,
    )?;
    Ok((corpus, features, provider))
}

fn cmd_featurize(config: &RunConfig) -> Result<()> {
    let (_, features, provider) = load_inputs(config)?;
    let mut run = RunDir::create(config.out_dir()?)?;
    let result = (|| {
        save_feature_matrix(&features, &run.path("features.csv"))?;
        if let Some(misses) = provider.misses() {
            save_cache_misses(&misses, &run.path("cache_misses.jsonl"))?;
        }
        Ok(())
    })();
    settle(run, result, "featurize", config)
}

fn cmd_train(config: &RunConfig, kind: ModelKind) -> Result<()> {
    let (corpus, features, _) = load_inputs(config)?;
    let labels = corpus.labels();
    let mut run = RunDir::create(config.out_dir()?)?;
    let result = (|| {
        let fingerprint = config.fingerprint();
        match kind {
            ModelKind::Nam => {
                let (model, report) =
                    train_nam(&features, &labels, corpus.num_classes(), &config.train_config())?;
                save_model(
                    &ModelFile::Nam {
                        model,
                        feature_names: features.feature_names.clone(),
                        rating_min: config.rating_min,
                        config_fingerprint: fingerprint,
                    },
                    &run.path("model.json"),
                )?;
                run.write("train_report.json", serde_json::to_string_pretty(&report)?.as_bytes())?;
            }
            ModelKind::Logreg => {
                let model =
                    train_logreg(&features, &labels, corpus.num_classes(), config.l2_strength)?;
                save_model(
                    &ModelFile::Logreg {
                        model,
                        feature_names: features.feature_names.clone(),
                        rating_min: config.rating_min,
                        config_fingerprint: fingerprint,
                    },
                    &run.path("model.json"),
                )?;
            }
        }
        Ok(())
    })();
    settle(run, result, "train", config)
}

fn cmd_compare(config: &RunConfig) -> Result<()> {
    let (corpus, features, _) = load_inputs(config)?;
    let labels = corpus.labels();
    let mut run = RunDir::create(config.out_dir()?)?;
    let result = (|| {
        let nam_arm = NamArm {
            config: config.train_config(),
        };
        let logreg_arm = LogRegArm {
            l2_strength: config.l2_strength,
        };
        let report = run_5x2_comparison_on_features(
            &corpus,
            &features,
            &nam_arm,
            &logreg_arm,
            config.seed,
            "nam",
            "logreg",
        )?;
        run.write("comparison.json", serde_json::to_string_pretty(&report)?.as_bytes())?;
        run.write("comparison.txt", report.to_table().as_bytes())?;

        let plan = make_5x2_folds(&corpus, config.seed)?;
        run.write("folds.json", serde_json::to_string_pretty(&plan)?.as_bytes())?;

        // Final full-corpus models for downstream explain/predict.
        let fingerprint = config.fingerprint();
        let (nam_model, _) =
            train_nam(&features, &labels, corpus.num_classes(), &config.train_config())?;
        save_model(
            &ModelFile::Nam {
                model: nam_model,
                feature_names: features.feature_names.clone(),
                rating_min: config.rating_min,
                config_fingerprint: fingerprint.clone(),
            },
            &run.path("nam_model.json"),
        )?;
        let logreg_model =
            train_logreg(&features, &labels, corpus.num_classes(), config.l2_strength)?;
        save_model(
            &ModelFile::Logreg {
                model: logreg_model,
                feature_names: features.feature_names.clone(),
                rating_min: config.rating_min,
                config_fingerprint: fingerprint,
            },
            &run.path("logreg_model.json"),
        )?;
        Ok(())
    })();
    settle(run, result, "compare", config)
}

fn sanitize_filename(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect()
}

fn cmd_explain(config: &RunConfig, model_path: &Path) -> Result<()> {
    let file = load_model(model_path)?;
    let ModelFile::Nam { model, feature_names, .. } = file else {
        return Err(Error::ModelKindMismatch {
            path: model_path.display().to_string(),
            found: "logreg".into(),
            expected: "nam".into(),
        });
    };
    let (_, features, _) = load_inputs(config)?;
    if features.feature_names != feature_names {
        return Err(Error::Data(
            "phrase file does not match the model's feature names".into(),
        ));
    }
    let mut run = RunDir::create(config.out_dir()?)?;
    let result = (|| {
        let importance = ImportanceExport::from_model(&model, &features)?;
        save_importance_csv(&importance, &run.path("importance.csv"))?;
        run.write(
            "importance.svg",
            render_importance_svg(&importance, config.top_n)?.as_bytes(),
        )?;

        let exports = export_shapes(&model, &features, config.grid_size, config.bins)?;
        save_shape_csv(&exports, &run.path("shapes.csv"))?;
        save_density_csv(&exports, &run.path("density.csv"))?;

        // Shape SVGs for the most important features, lowest and highest
        // class by default.
        let classes = vec![0, model.num_classes - 1];
        for (rank, (name, _)) in importance
            .entries
            .iter()
            .take(config.shape_count)
            .enumerate()
        {
            let export = exports
                .iter()
                .find(|e| &e.feature_name == name)
                .expect("export exists for every feature");
            let svg = render_shape_svg(export, &classes, model.num_classes, None)?;
            run.write(
                &format!("shape_{rank:02}_{}.svg", sanitize_filename(name)),
                svg.as_bytes(),
            )?;
        }
        Ok(())
    })();
    settle(run, result, "explain", config)
}

fn cmd_predict(config: &RunConfig, model_path: &Path, input: &Path) -> Result<()> {
    let file = load_model(model_path)?;
    let phrases = load_phrases(config.phrases_path()?)?;
    let names: Vec<String> = phrases.iter().map(|p| p.text.clone()).collect();
    if names != file.feature_names() {
        return Err(Error::Data(
            "phrase file does not match the model's feature names".into(),
        ));
    }
    let provider = Provider::open(config.cache.as_deref())?;

    // Input rows: id,text with an optional rating column that is ignored.
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(input)?;
    let mut rows: Vec<(String, String)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::MalformedRow {
            row: i + 1,
            msg: e.to_string(),
        })?;
        if record.len() < 2 {
            return Err(Error::MalformedRow {
                row: i + 1,
                msg: "expected at least id,text".into(),
            });
        }
        rows.push((record[0].to_string(), record[1].to_string()));
    }
    if rows.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let rating_min = file.rating_min();
    let num_classes = file.num_classes();
    let mut run = RunDir::create(config.out_dir()?)?;
    let result = (|| {
        let mut writer = csv::Writer::from_path(run.path("predictions.csv"))?;
        let mut header = vec!["id".to_string(), "predicted_rating".to_string()];
        for c in 0..num_classes {
            header.push(format!("prob_{}", rating_min + c as i32));
        }
        header.push("top_features".to_string());
        writer
            .write_record(&header)
            .map_err(|e| Error::Data(e.to_string()))?;

        for (id, text) in &rows {
            let x: Vec<f64> = phrases
                .iter()
                .map(|p| {
                    asag::featurize::phrase_feature_with_ngrams(
                        text,
                        p,
                        &provider,
                        config.ngram_min,
                        config.ngram_max,
                    )
                })
                .collect::<Result<_>>()?;
            let (probs, contributions): (Vec<f64>, Vec<f64>) = match &file {
                ModelFile::Nam { model, .. } => {
                    let probs = model.predict_proba(&x)?;
                    let class = argmax(&probs);
                    let breakdown = model.contributions(&x)?;
                    let contribs = breakdown
                        .per_feature
                        .iter()
                        .map(|per_class| per_class[class])
                        .collect();
                    (probs, contribs)
                }
                ModelFile::Logreg { model, .. } => {
                    let probs = model.predict_proba(&x)?;
                    let class = argmax(&probs);
                    let contribs = model.weights[class]
                        .iter()
                        .zip(&x)
                        .map(|(w, v)| w * v)
                        .collect();
                    (probs, contribs)
                }
            };
            let class = argmax(&probs);
            let mut ranked: Vec<(usize, f64)> =
                contributions.iter().copied().enumerate().collect();
            ranked.sort_by(|a, b| {
                b.1.abs()
                    .partial_cmp(&a.1.abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| a.0.cmp(&b.0))
            });
            let top: Vec<String> = ranked
                .iter()
                .take(config.top_k)
                .map(|(j, v)| format!("{}={:+.4}", names[*j], v))
                .collect();

            let mut record = vec![id.clone(), (rating_min + class as i32).to_string()];
            for p in &probs {
                record.push(format!("{p:.6}"));
            }
            record.push(top.join("; "));
            writer
                .write_record(&record)
                .map_err(|e| Error::Data(e.to_string()))?;
        }
        writer.flush()?;
        Ok(())
    })();
    settle(run, result, "predict", config)
}

fn settle(run: RunDir, result: Result<()>, command: &str, config: &RunConfig) -> Result<()> {
    match result {
        Ok(()) => run.finish(command, config),
        Err(e) => {
            run.discard();
            Err(e)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let file_config: Option<RunConfig> = match &cli.config {
        Some(path) => Some(serde_json::from_str(&std::fs::read_to_string(path)?)?),
        None => None,
    };
    let common = match &cli.command {
        Command::Featurize(c) | Command::Compare(c) => c,
        Command::Train { common, .. }
        | Command::Explain { common, .. }
        | Command::Predict { common, .. } => common,
    };
    let config = RunConfig::merge(file_config, common, cli);

    if cli.verify_manifest {
        return verify_manifest(config.out_dir()?);
    }
    config.train_config().validate()?;

    match &cli.command {
        Command::Featurize(_) => cmd_featurize(&config),
        Command::Train { model, .. } => cmd_train(&config, *model),
        Command::Compare(_) => cmd_compare(&config),
        Command::Explain { model, .. } => cmd_explain(&config, model),
        Command::Predict { model, input, .. } => cmd_predict(&config, model, input),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.exit_code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
