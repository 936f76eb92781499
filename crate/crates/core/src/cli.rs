//! Command-line driver.
//!
//! Every command writes into `--out` (default from `DREN_OUT_DIR`, else
//! `dren-out`) and finishes with a `manifest.json` listing the hashed inputs
//! and outputs. Usage errors exit with status 2, runtime failures with 1.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::checkpoint;
use crate::compare::{compare_tsne, CompareConfig};
use crate::divergence::DivergenceKind;
use crate::encoder::{embed, AdamConfig};
use crate::error::{invalid_input, DrenError, Result};
use crate::eval::{accuracy, knn_predict, DEFAULT_KNN_K};
use crate::histlayer::{HistMode, DEFAULT_BINS};
use crate::io::{self, EmbeddingFile, Manifest};
use crate::numerics::Matrix;
use crate::svg::scatter_svg;
use crate::synth::{gen_synthetic, Generator, SynthSpec};
use crate::trainer::{sweep, train_with_classes, Dataset, RunConfig};
use crate::tsne::{lle_weights_batch, oos_embed, tsne_fit, OosConfig, TsneConfig, DEFAULT_OOS_REG};

pub const OUT_DIR_ENV: &str = "DREN_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "dren", version, about = "Divergence regulated encoder networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an encoder and write checkpoint, report, embedding and figure.
    Train(TrainArgs),
    /// Train every (lambda, dim, fold) combination and aggregate test accuracy.
    Sweep(SweepArgs),
    /// Compare DREN and t-SNE + out-of-sample embeddings with k-NN.
    CompareTsne(CompareArgs),
    /// Classical t-SNE on a feature file.
    Tsne(TsneArgs),
    /// Place test points in an existing embedding from their training neighbors.
    EmbedOos(OosArgs),
    /// k-NN accuracy of a labeled test embedding against a training embedding.
    KnnEval(KnnArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "dren-out")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenArg {
    Blobs,
    Rings,
    Helix,
}

impl From<GenArg> for Generator {
    fn from(g: GenArg) -> Self {
        match g {
            GenArg::Blobs => Generator::Blobs,
            GenArg::Rings => Generator::Rings,
            GenArg::Helix => Generator::Helix,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthFlags {
    /// Number of classes.
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Feature dimension of generated data.
    #[arg(long = "synth-dim", default_value_t = 50)]
    pub synth_dim: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
    /// Within-class standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub std: f64,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
}

impl SynthFlags {
    fn spec(&self, generator: GenArg) -> SynthSpec {
        SynthSpec {
            generator: generator.into(),
            classes: self.classes,
            dim: self.synth_dim,
            per_class: self.per_class,
            separation: self.separation,
            std: self.std,
            seed: self.data_seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Feature file (comma-separated rows, optional header).
    #[arg(long, requires = "labels", conflicts_with = "synth")]
    pub features: Option<PathBuf>,
    /// Label file (one class index per line).
    #[arg(long, requires = "features")]
    pub labels: Option<PathBuf>,
    /// Optional class names (`id,name` per line).
    #[arg(long)]
    pub names: Option<PathBuf>,
    /// Generate the data instead of reading it.
    #[arg(long, value_enum, required_unless_present = "features")]
    pub synth: Option<GenArg>,
    #[command(flatten)]
    pub synth_flags: SynthFlags,
}

struct Loaded {
    data: Dataset,
    names: BTreeMap<usize, String>,
    inputs: Vec<PathBuf>,
    source: serde_json::Value,
    notes: Vec<String>,
}

impl DataArgs {
    fn load(&self) -> Result<Loaded> {
        let mut inputs = Vec::new();
        let names = match &self.names {
            Some(p) => {
                inputs.push(p.clone());
                io::read_names(p)?
            }
            None => BTreeMap::new(),
        };
        match (&self.features, &self.labels, self.synth) {
            (Some(f), Some(l), _) => {
                let data = io::read_dataset(f, l)?;
                inputs.insert(0, l.clone());
                inputs.insert(0, f.clone());
                Ok(Loaded {
                    data,
                    names,
                    inputs,
                    source: serde_json::json!({ "files": true }),
                    notes: Vec::new(),
                })
            }
            (_, _, Some(generator)) => {
                let spec = self.synth_flags.spec(generator);
                let synth = gen_synthetic(&spec)?;
                Ok(Loaded {
                    data: synth.data,
                    names,
                    inputs,
                    source: serde_json::to_value(&spec)?,
                    notes: synth.notes,
                })
            }
            _ => Err(invalid_input("give --features with --labels, or --synth")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DivArg {
    Kl,
    Renyi,
    W1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HistModeArg {
    Concat,
    Histogram,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Embedding dimension.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, value_enum, default_value = "kl")]
    pub divergence: DivArg,
    /// Renyi order (only with --divergence renyi).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = crate::affinity::DEFAULT_PERPLEXITY)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Put a soft histogram layer in front of the encoder.
    #[arg(long)]
    pub histogram: bool,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, value_enum, default_value = "concat")]
    pub hist_mode: HistModeArg,
    #[arg(long, default_value_t = 0.10)]
    pub val_fraction: f64,
}

impl ModelArgs {
    fn run_config(&self, lambda: f64) -> RunConfig {
        let divergence = match self.divergence {
            DivArg::Kl => DivergenceKind::Kl,
            DivArg::Renyi => DivergenceKind::Renyi {
                alpha: self.alpha.unwrap_or(crate::divergence::DEFAULT_RENYI_ALPHA),
            },
            DivArg::W1 => DivergenceKind::Wasserstein1Tv,
        };
        RunConfig {
            lambda,
            embed_dim: self.dim,
            divergence,
            disable_divergence: false,
            perplexity: self.perplexity,
            batch_size: self.batch,
            epochs: self.epochs,
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            val_fraction: self.val_fraction,
            seed: self.seed,
            histogram: self.histogram,
            bins: self.bins,
            hist_mode: match self.hist_mode {
                HistModeArg::Concat => HistMode::Concat,
                HistModeArg::Histogram => HistMode::HistogramOnly,
            },
            folds: 1,
        }
    }

    fn check_combinations(&self) -> std::result::Result<(), clap::Error> {
        if self.alpha.is_some() && self.divergence != DivArg::Renyi {
            return Err(Cli::command().error(
                ErrorKind::ArgumentConflict,
                "--alpha only applies to --divergence renyi",
            ));
        }
        Ok(())
    }
}

fn parse_lambda(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("lambda must lie in [0, 1], got {v}"))
    }
}

fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("fraction must lie in (0, 1), got {v}"))
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Weight of the divergence term.
    #[arg(long, default_value = "0.5", value_parser = parse_lambda)]
    pub lambda: f64,
    /// Record wall time in the report (makes it differ between runs).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated lambda grid.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',', value_parser = parse_lambda)]
    pub lambdas: Vec<f64>,
    /// Comma-separated embedding dimensions.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub folds: usize,
    /// Share of every class held out for testing.
    #[arg(long, default_value = "0.2", value_parser = parse_fraction)]
    pub test_fraction: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "0.5", value_parser = parse_lambda)]
    pub lambda: f64,
    /// Held-out test features; without them a stratified split is used.
    #[arg(long, requires = "test_labels")]
    pub test_features: Option<PathBuf>,
    #[arg(long, requires = "test_features")]
    pub test_labels: Option<PathBuf>,
    #[arg(long, default_value = "0.3333333333333333", value_parser = parse_fraction)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 1000)]
    pub tsne_iterations: usize,
    /// Neighbors for the out-of-sample projection.
    #[arg(long, default_value_t = crate::tsne::DEFAULT_OOS_K)]
    pub oos_k: usize,
    #[arg(long, default_value_t = DEFAULT_KNN_K)]
    pub knn_k: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct TsneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = crate::affinity::DEFAULT_PERPLEXITY)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 100.0)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct OosArgs {
    #[arg(long)]
    pub train_features: PathBuf,
    /// Embedding of the training rows, in the same order.
    #[arg(long)]
    pub train_embedding: PathBuf,
    #[arg(long)]
    pub test_features: PathBuf,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    #[arg(long, default_value_t = crate::tsne::DEFAULT_OOS_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_OOS_REG)]
    pub reg: f64,
    /// Ignore training points that coincide with the test point.
    #[arg(long)]
    pub exclude_self: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct KnnArgs {
    #[arg(long)]
    pub train_embedding: PathBuf,
    #[arg(long)]
    pub test_embedding: PathBuf,
    #[arg(long, default_value_t = DEFAULT_KNN_K)]
    pub k: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "blobs")]
    pub generator: GenArg,
    #[command(flatten)]
    pub synth_flags: SynthFlags,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Collects written files for the manifest.
struct OutDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| DrenError::io(dir, e))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn finish(self, mut manifest: Manifest, inputs: &[PathBuf]) -> Result<()> {
        manifest.add_inputs(inputs)?;
        manifest.add_outputs(&self.written)?;
        io::write_json(&self.dir.join("manifest.json"), &manifest)
    }
}

fn labeled(labels: &[usize]) -> Vec<Option<usize>> {
    labels.iter().map(|&l| Some(l)).collect()
}

#[derive(Serialize)]
struct DataConfig<'a, T: Serialize> {
    data: &'a serde_json::Value,
    #[serde(flatten)]
    settings: T,
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let start = Instant::now();
    let loaded = a.data.load()?;
    let config = a.model.run_config(a.lambda);
    let data = &loaded.data;
    let outcome = train_with_classes(&config, &data.features, &data.labels, data.classes())?;
    let mut out = OutDir::create(&a.out.out)?;

    let ckpt = out.path("model.ckpt");
    checkpoint::save(&ckpt, &outcome.params)?;
    let sidecar = checkpoint::save_sidecar(&ckpt, &config)?;
    out.written.push(sidecar);

    let mut report = outcome.report.clone();
    report.checkpoint = Some("model.ckpt".into());
    if a.timing {
        report.wall_time_secs = Some(start.elapsed().as_secs_f64());
    }
    io::write_json(&out.path("report.json"), &report)?;

    let z = embed(&outcome.params, &data.features)?;
    io::write_embedding(&out.path("embedding.csv"), &EmbeddingFile::new(z.clone(), Some(&data.labels))?)?;
    let title = format!("DREN embedding (lambda = {}, {})", config.lambda, config.divergence);
    io::write_text(
        &out.path("embedding.svg"),
        &scatter_svg(&z, &labeled(&data.labels), &title, &loaded.names),
    )?;

    let mut manifest = Manifest::new("train", &DataConfig { data: &loaded.source, settings: &config })?;
    manifest.notes = loaded.notes;
    out.finish(manifest, &loaded.inputs)?;
    println!(
        "best epoch {} validation accuracy {:.4}",
        report.best_epoch, report.best_val_accuracy
    );
    Ok(())
}

/// Exit status 1 when every cell failed.
fn cmd_sweep(a: &SweepArgs) -> Result<bool> {
    let loaded = a.data.load()?;
    let mut base = a.model.run_config(a.lambdas[0]);
    base.folds = a.folds;
    let report = sweep(&base, &loaded.data, &a.lambdas, &a.dims, a.folds, a.test_fraction)?;
    let mut out = OutDir::create(&a.out.out)?;
    io::write_json(&out.path("sweep.json"), &report)?;
    let table = report.text_table();
    io::write_text(&out.path("sweep.txt"), &table)?;
    let mut manifest = Manifest::new(
        "sweep",
        &DataConfig {
            data: &loaded.source,
            settings: serde_json::json!({
                "base": base,
                "lambdas": a.lambdas,
                "dims": a.dims,
                "folds": a.folds,
                "test_fraction": a.test_fraction,
            }),
        },
    )?;
    manifest.notes = loaded.notes;
    out.finish(manifest, &loaded.inputs)?;
    print!("{table}");
    Ok(!report.all_failed())
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let loaded = a.data.load()?;
    let mut inputs = loaded.inputs.clone();
    let (train, test) = match (&a.test_features, &a.test_labels) {
        (Some(f), Some(l)) => {
            let x = io::read_features(f)?;
            let y = io::read_labels(l)?;
            inputs.extend([f.clone(), l.clone()]);
            (loaded.data.clone(), Dataset::new(x, y)?)
        }
        _ => loaded.data.split(a.test_fraction, a.model.seed)?,
    };
    let mut cfg = CompareConfig::new(a.model.run_config(a.lambda));
    cfg.tsne.iterations = a.tsne_iterations;
    cfg.oos.k = a.oos_k;
    cfg.knn_k = a.knn_k;
    let cmp = compare_tsne(&cfg, &train, &test)?;

    let mut out = OutDir::create(&a.out.out)?;
    io::write_json(&out.path("compare.json"), &cmp.report)?;
    for (name, z_train, z_test, title) in [
        ("dren", &cmp.dren_train, &cmp.dren_test, "DREN"),
        ("tsne", &cmp.tsne_train, &cmp.tsne_test, "t-SNE + out-of-sample"),
    ] {
        let train_file = EmbeddingFile::new(z_train.clone(), Some(&train.labels))?;
        let test_file = EmbeddingFile::new(z_test.clone(), Some(&test.labels))?;
        io::write_embedding(&out.path(&format!("{name}_train.csv")), &train_file)?;
        io::write_embedding(&out.path(&format!("{name}_test.csv")), &test_file)?;
        let svg_title = format!("{title}: train (n = {}) and test (n = {})", train.len(), test.len());
        let mut z = z_train.as_slice().to_vec();
        z.extend_from_slice(z_test.as_slice());
        let z = Matrix::from_vec(train.len() + test.len(), z_train.cols(), z)?;
        let mut labels = labeled(&train.labels);
        labels.extend(labeled(&test.labels));
        io::write_text(&out.path(&format!("{name}.svg")), &scatter_svg(&z, &labels, &svg_title, &loaded.names))?;
    }
    let mut manifest = Manifest::new("compare-tsne", &DataConfig { data: &loaded.source, settings: &cfg })?;
    manifest.notes = loaded.notes;
    out.finish(manifest, &inputs)?;
    println!(
        "{}-NN test accuracy: DREN {:.4}, t-SNE {:.4}",
        cfg.knn_k, cmp.report.dren_knn_accuracy, cmp.report.tsne_knn_accuracy
    );
    Ok(())
}

#[derive(Serialize)]
struct TsneSummary<'a> {
    initial_kl: f64,
    final_kl: f64,
    unconverged_rows: usize,
    kl_history: &'a [f64],
}

fn cmd_tsne(a: &TsneArgs) -> Result<()> {
    let loaded = a.data.load()?;
    let cfg = TsneConfig {
        embed_dim: a.dim,
        perplexity: a.perplexity,
        iterations: a.iterations,
        learning_rate: a.learning_rate,
        seed: a.seed,
        ..TsneConfig::default()
    };
    let fit = tsne_fit(&loaded.data.features, &cfg)?;
    let mut out = OutDir::create(&a.out.out)?;
    let labels = &loaded.data.labels;
    io::write_embedding(
        &out.path("tsne_embedding.csv"),
        &EmbeddingFile::new(fit.embedding.clone(), Some(labels))?,
    )?;
    io::write_json(
        &out.path("tsne.json"),
        &TsneSummary {
            initial_kl: fit.initial_kl,
            final_kl: fit.final_kl,
            unconverged_rows: fit.unconverged_rows,
            kl_history: &fit.kl_history,
        },
    )?;
    io::write_text(
        &out.path("tsne.svg"),
        &scatter_svg(&fit.embedding, &labeled(labels), "t-SNE embedding", &loaded.names),
    )?;
    let mut manifest = Manifest::new("tsne", &DataConfig { data: &loaded.source, settings: &cfg })?;
    manifest.notes = loaded.notes;
    out.finish(manifest, &loaded.inputs)?;
    println!("KL {:.6} -> {:.6}", fit.initial_kl, fit.final_kl);
    Ok(())
}

fn cmd_embed_oos(a: &OosArgs) -> Result<()> {
    let x_train = io::read_features(&a.train_features)?;
    let train_emb = io::read_embedding(&a.train_embedding)?;
    if train_emb.z.rows() != x_train.rows() {
        return Err(invalid_input(format!(
            "{} training rows but {} embedded rows",
            x_train.rows(),
            train_emb.z.rows()
        )));
    }
    let x_test = io::read_features(&a.test_features)?;
    let mut inputs = vec![a.train_features.clone(), a.train_embedding.clone(), a.test_features.clone()];
    let test_labels = match &a.test_labels {
        Some(p) => {
            inputs.push(p.clone());
            Some(io::read_labels(p)?)
        }
        None => None,
    };
    let cfg = OosConfig {
        k: a.k,
        reg: a.reg,
        exclude_self: a.exclude_self,
    };
    let weights = lle_weights_batch(&x_test, &x_train, &cfg)?;
    let z = oos_embed(&weights, &train_emb.z)?;
    let mut out = OutDir::create(&a.out.out)?;
    io::write_embedding(&out.path("oos_embedding.csv"), &EmbeddingFile::new(z, test_labels.as_deref())?)?;
    io::write_json(&out.path("oos_weights.json"), &weights)?;
    out.finish(Manifest::new("embed-oos", &cfg)?, &inputs)?;
    println!("embedded {} test points", x_test.rows());
    Ok(())
}

fn cmd_knn_eval(a: &KnnArgs) -> Result<()> {
    let train = io::read_embedding(&a.train_embedding)?;
    let test = io::read_embedding(&a.test_embedding)?;
    let y_train = train
        .known_labels()
        .ok_or_else(|| invalid_input("training embedding has unlabeled rows"))?;
    let y_test = test
        .known_labels()
        .ok_or_else(|| invalid_input("test embedding has unlabeled rows"))?;
    let pred = knn_predict(&train.z, &y_train, &test.z, a.k)?;
    let metrics = accuracy(&pred, &y_test)?;
    let mut out = OutDir::create(&a.out.out)?;
    io::write_json(&out.path("metrics.json"), &metrics)?;
    out.finish(
        Manifest::new("knn-eval", &serde_json::json!({ "k": a.k }))?,
        &[a.train_embedding.clone(), a.test_embedding.clone()],
    )?;
    println!("{}-NN accuracy {:.4}", a.k, metrics.accuracy);
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = a.synth_flags.spec(a.generator);
    let synth = gen_synthetic(&spec)?;
    let mut out = OutDir::create(&a.out.out)?;
    io::write_features(&out.path("features.csv"), &synth.data.features)?;
    io::write_labels(&out.path("labels.csv"), &synth.data.labels)?;
    let mut manifest = Manifest::new("synth", &spec)?;
    manifest.notes = synth.notes;
    out.finish(manifest, &[])?;
    println!("wrote {} samples of dimension {}", synth.data.len(), spec.dim);
    Ok(())
}

fn usage_check(cli: &Cli) -> std::result::Result<(), clap::Error> {
    match &cli.command {
        Command::Train(a) => a.model.check_combinations(),
        Command::Sweep(a) => a.model.check_combinations(),
        Command::CompareTsne(a) => a.model.check_combinations(),
        _ => Ok(()),
    }
}

/// Runs a parsed command line. Configuration errors are reported as usage
/// errors (status 2).
pub fn execute(cli: &Cli) -> ExitCode {
    if let Err(e) = usage_check(cli) {
        let _ = e.print();
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a),
        Command::CompareTsne(a) => cmd_compare(a).map(|_| true),
        Command::Tsne(a) => cmd_tsne(a).map(|_| true),
        Command::EmbedOos(a) => cmd_embed_oos(a).map(|_| true),
        Command::KnnEval(a) => cmd_knn_eval(a).map(|_| true),
        Command::Synth(a) => cmd_synth(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: every sweep cell failed");
            ExitCode::from(1)
        }
        Err(e @ DrenError::InvalidConfig(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    execute(&cli)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn lambda_out_of_range_is_a_usage_error() {
        let err = Cli::try_parse_from(["dren", "train", "--synth", "blobs", "--lambda", "1.2"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(Cli::try_parse_from(["dren", "sweep", "--synth", "blobs", "--lambdas", "", "--dims", "2"]).is_err());
    }

    #[test]
    fn alpha_requires_renyi() {
        let cli = Cli::try_parse_from(["dren", "train", "--synth", "blobs", "--alpha", "0.3"]).unwrap();
        assert!(usage_check(&cli).is_err());
        let cli = Cli::try_parse_from([
            "dren", "train", "--synth", "blobs", "--divergence", "renyi", "--alpha", "0.3",
        ])
        .unwrap();
        assert!(usage_check(&cli).is_ok());
    }

    #[test]
    fn data_source_is_required() {
        assert!(Cli::try_parse_from(["dren", "train"]).is_err());
        assert!(Cli::try_parse_from(["dren", "train", "--features", "a.csv"]).is_err());
    }
}
