//! Command-line front end: `build`, `train`, `eval` and `predict`.

mod config;

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

use crate::data::{
    build_instances, load_instances, load_relations, split, synthetic, write_instances, write_relations, Embeddings,
    Lexicon, TermEntry,
};
use crate::error::{Error, Result};
use crate::eval::{infer_alldef, read_predictions, score_instances, write_predictions, EvalReport};
use crate::model::{read_model, train, write_model, Model};

#[derive(Parser, Debug)]
#[command(name = "hyperdef", version, about = "Hypernymy detection from terms and their definitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build train/dev/test instance files from a relation export.
    Build {
        #[command(flatten)]
        opts: Overrides,
        /// Generate a synthetic taxonomy instead of reading --relations.
        #[arg(long)]
        synthetic: bool,
    },
    /// Train a model and write it with a per-epoch TSV log.
    Train {
        #[command(flatten)]
        opts: Overrides,
    },
    /// Score an instance file and report P/R/F1/AP/AP@k.
    Eval {
        #[command(flatten)]
        opts: Overrides,
        /// Re-score an existing prediction file instead of running a model.
        #[arg(long, value_name = "FILE")]
        scores: Option<PathBuf>,
        /// Threshold for --scores runs.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Score one (x, y) pair.
    Predict {
        #[command(flatten)]
        opts: Overrides,
        x: String,
        y: String,
        /// Definition of x; looked up in --lexicon when omitted.
        #[arg(long)]
        dx: Option<String>,
        /// Definition of y; looked up in --lexicon when omitted.
        #[arg(long)]
        dy: Option<String>,
    },
}

/// Flags mirror `RunConfig` keys. Explicit flags override `--config`.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    relations: Option<String>,
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    lexicon: Option<String>,
    #[arg(long)]
    data_dir: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    eval_file: Option<String>,
    #[arg(long)]
    predictions: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    architecture: Option<String>,
    #[arg(long)]
    mask: Option<String>,
    #[arg(long)]
    share_weights: Option<String>,
    #[arg(long)]
    max_definition_len: Option<String>,
    #[arg(long, visible_alias = "lr")]
    learning_rate: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    patience: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    sense_cap: Option<String>,
    #[arg(long)]
    ap_k: Option<String>,
    #[arg(long)]
    split_mode: Option<String>,
    #[arg(long)]
    fractions: Option<String>,
    #[arg(long)]
    negative_ratio: Option<String>,
    #[arg(long)]
    synthetic_taxonomy: Option<String>,
    #[arg(long)]
    synthetic_vocab: Option<String>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for (key, value) in [
            ("relations", &self.relations),
            ("embeddings", &self.embeddings),
            ("lexicon", &self.lexicon),
            ("data_dir", &self.data_dir),
            ("model", &self.model),
            ("eval_file", &self.eval_file),
            ("predictions", &self.predictions),
            ("dim", &self.dim),
            ("architecture", &self.architecture),
            ("mask", &self.mask),
            ("share_weights", &self.share_weights),
            ("max_definition_len", &self.max_definition_len),
            ("learning_rate", &self.learning_rate),
            ("epsilon", &self.epsilon),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("patience", &self.patience),
            ("seed", &self.seed),
            ("mode", &self.mode),
            ("sense_cap", &self.sense_cap),
            ("ap_k", &self.ap_k),
            ("split_mode", &self.split_mode),
            ("fractions", &self.fractions),
            ("negative_ratio", &self.negative_ratio),
            ("synthetic_taxonomy", &self.synthetic_taxonomy),
            ("synthetic_vocab", &self.synthetic_vocab),
        ] {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("--{} is required", key.replace('_', "-"))))
}

/// Writes every file under a temporary name first and renames only once all
/// writes succeeded, so a failed command leaves no partial outputs.
fn commit(files: Vec<(PathBuf, Vec<u8>)>) -> Result<()> {
    let mut staged = Vec::new();
    let mut result = Ok(());
    for (path, bytes) in &files {
        let mut name = path.as_os_str().to_owned();
        name.push(".partial");
        let tmp = PathBuf::from(name);
        if let Err(e) = fs::write(&tmp, bytes) {
            result = Err(Error::io(&tmp, e));
            break;
        }
        staged.push((tmp, path.clone()));
    }
    if result.is_ok() {
        for (tmp, path) in &staged {
            if let Err(e) = fs::rename(tmp, path) {
                result = Err(Error::io(path, e));
                break;
            }
        }
    }
    if result.is_err() {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
    }
    result
}

fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    buf
}

fn load_embeddings(cfg: &RunConfig) -> Result<Arc<Embeddings>> {
    Ok(Arc::new(Embeddings::load(required(&cfg.embeddings, "embeddings")?)?))
}

fn load_lexicon(cfg: &RunConfig) -> Result<Option<Lexicon>> {
    cfg.lexicon.as_deref().map(Lexicon::load).transpose()
}

pub fn cmd_build(cfg: &RunConfig, use_synthetic: bool) -> Result<()> {
    let out = required(&cfg.data_dir, "data_dir")?;
    let mut files = Vec::new();
    let (records, lexicon) = if use_synthetic {
        let data = synthetic::generate(&synthetic::SyntheticConfig {
            taxonomy_size: cfg.synthetic_taxonomy,
            vocab_size: cfg.synthetic_vocab,
            seed: cfg.seed,
            dim: cfg.dim,
            negative_ratio: cfg.negative_ratio,
            ..Default::default()
        })?;
        files.push((out.join("embeddings.txt"), to_bytes(|b| data.embeddings.write_text(b))));
        files.push((out.join("relations.tsv"), to_bytes(|b| write_relations(b, &data.records))));
        (data.records, data.lexicon)
    } else {
        let records = load_relations(required(&cfg.relations, "relations")?)?;
        let lexicon = Lexicon::from_records(&records);
        (records, lexicon)
    };
    let built = build_instances(&records, Some(cfg.negative_ratio), cfg.seed)?;
    let parts = split(&built.instances, &cfg.split_spec())?;
    for (name, part) in ["train", "dev", "test"].iter().zip(parts.parts()) {
        files.push((out.join(format!("{name}.tsv")), to_bytes(|b| write_instances(b, part))));
    }
    files.push((out.join("lexicon.tsv"), to_bytes(|b| lexicon.write_tsv(b))));

    let s = &built.stats;
    let mut manifest = cfg.to_text();
    manifest.push_str(&format!(
        "synthetic={use_synthetic}\nrecords={}\nskipped_records={}\ncandidates={}\nduplicates={}\n\
         positives={}\nnegatives_generated={}\ndownsampled={}\nnegatives={}\nratio={}\n\
         train={}\ndev={}\ntest={}\ndropped={}\n",
        s.records,
        s.skipped_records,
        s.candidates,
        s.duplicates,
        s.positives,
        s.negatives_generated,
        s.downsampled,
        s.negatives,
        s.ratio(),
        parts.train.len(),
        parts.dev.len(),
        parts.test.len(),
        parts.dropped,
    ));
    files.push((out.join("manifest.txt"), manifest.into_bytes()));

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    commit(files)?;
    println!(
        "wrote {} train, {} dev, {} test instances to {} ({} dropped)",
        parts.train.len(),
        parts.dev.len(),
        parts.test.len(),
        out.display(),
        parts.dropped
    );
    Ok(())
}

pub fn log_path(model: &Path) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(".log.tsv");
    PathBuf::from(name)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let model_path = required(&cfg.model, "model")?;
    let dir = required(&cfg.data_dir, "data_dir")?;
    let embeddings = load_embeddings(cfg)?;
    // Fails on a dimension mismatch before any data is read.
    let mut model = Model::init(cfg.model_config(), embeddings)?;
    let train_set = load_instances(dir.join("train.tsv"))?;
    let dev_set = load_instances(dir.join("dev.tsv"))?;
    let report = train(&mut model, &train_set, &dev_set, &cfg.train_config())?;
    fs::write(log_path(model_path), report.to_tsv()).map_err(|e| Error::io(log_path(model_path), e))?;
    if let Err(e) = write_model(model_path, &model) {
        let _ = fs::remove_file(log_path(model_path));
        return Err(e);
    }
    println!(
        "best epoch {} of {}: dev AP {:.4}, threshold {:.4}; model written to {}",
        report.best_epoch,
        report.epochs.len(),
        report.best_dev_ap,
        report.threshold,
        model_path.display()
    );
    Ok(())
}

fn report_path(predictions: &Path) -> PathBuf {
    let mut name = predictions.as_os_str().to_owned();
    name.push(".report");
    PathBuf::from(name)
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    let model_path = required(&cfg.model, "model")?;
    let model = read_model(model_path, load_embeddings(cfg)?)?;
    let eval_file = match &cfg.eval_file {
        Some(p) => p.clone(),
        None => required(&cfg.data_dir, "data_dir")?.join("test.tsv"),
    };
    let instances = load_instances(&eval_file)?;
    let lexicon = load_lexicon(cfg)?;
    let scores = score_instances(&model, &instances, lexicon.as_ref(), cfg.mode, cfg.sense_cap)?;
    let report = EvalReport::compute(&scores, model.params().threshold, cfg.ap_k)?;
    let predictions = cfg.predictions.clone().unwrap_or_else(|| {
        let mut name = model_path.as_os_str().to_owned();
        name.push(format!(".{}.predictions.tsv", cfg.mode));
        PathBuf::from(name)
    });
    commit(vec![
        (predictions.clone(), to_bytes(|b| write_predictions(b, &scores))),
        (report_path(&predictions), report.to_machine().into_bytes()),
    ])?;
    println!("{report}");
    Ok(report)
}

/// Metrics from a prediction file alone.
pub fn cmd_rescore(path: &Path, threshold: f64, k: usize) -> Result<EvalReport> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let scores = read_predictions(BufReader::new(f), &path.display().to_string())?;
    let report = EvalReport::compute(&scores, threshold, k)?;
    println!("{report}");
    Ok(report)
}

/// Score and thresholded label for one pair. Missing definitions come from
/// the lexicon, else from the term itself.
pub fn cmd_predict(cfg: &RunConfig, x: &str, dx: Option<&str>, y: &str, dy: Option<&str>) -> Result<(f64, bool)> {
    let model = read_model(required(&cfg.model, "model")?, load_embeddings(cfg)?)?;
    let lexicon = load_lexicon(cfg)?.unwrap_or_default();
    let entry = |term: &str, def: Option<&str>| match def {
        Some(d) => TermEntry::with_definition(term, d),
        None => lexicon.lookup(term),
    };
    let score = infer_alldef(&entry(x, dx), &entry(y, dy), &model, cfg.sense_cap)?.score;
    let label = score >= model.params().threshold;
    println!("{score}\t{}", u8::from(label));
    Ok((score, label))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build { opts, synthetic } => cmd_build(&opts.resolve()?, synthetic),
        Command::Train { opts } => cmd_train(&opts.resolve()?),
        Command::Eval {
            opts,
            scores,
            threshold,
        } => {
            let cfg = opts.resolve()?;
            match scores {
                Some(path) => cmd_rescore(&path, threshold, cfg.ap_k).map(drop),
                None => cmd_eval(&cfg).map(drop),
            }
        }
        Command::Predict { opts, x, y, dx, dy } => {
            cmd_predict(&opts.resolve()?, &x, dx.as_deref(), &y, dy.as_deref()).map(drop)
        }
    }
}

fn error_line(kind: &str, msg: &str) -> String {
    format!("error: {kind}: {}", msg.split_whitespace().collect::<Vec<_>>().join(" "))
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on a runtime error, 2 on a usage error. Errors are one line on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", error_line("usage", first.trim_start_matches("error: ")));
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            0
        }
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            1
        }
    }
}
