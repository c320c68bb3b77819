//! Command-line entry points: training, evaluation, heatmap export, the
//! softmax-floor demonstration, gradient checking, and synthetic corpus
//! generation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqpair::data::{
    balance_and_split, build_vocab, encode_records, export_heatmap, generate_contrastive_corpus,
    load_quora_tsv, tokenize, write_tsv, DEFAULT_MAX_LEN,
};
use seqpair::encoder::{encode, DropoutCfg, EmbeddingTable, GruLayerParams, Vocab};
use seqpair::error::{Error, Result};
use seqpair::gradcheck;
use seqpair::interaction::{
    attention_floor_report, attention_scores, project, InteractionMode, ProjectionPair,
};
use seqpair::model::{load_checkpoint, predict, save_checkpoint, PairClassifier};
use seqpair::model::ModelConfig;
use seqpair::training::{evaluate, train, EvalRecord, TrainConfig};
use seqpair::Tape;

#[derive(Parser)]
#[command(name = "seqpair", about = "Sequence-pair classification with attention and conflict")]
struct Cli {
    /// Default RNG seed (flag overrides; SEQPAIR_SEED overrides the default)
    #[arg(long, global = true, env = "SEQPAIR_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a Quora-format TSV corpus
    Train {
        /// TSV file with question1/question2/is_duplicate columns
        #[arg(long)]
        data: PathBuf,
        /// Interaction mode: attention, conflict, or combined
        #[arg(long, default_value = "combined")]
        mode: String,
        /// Optional key=value config file (epochs, batch_size, lr, embed_dim, ...)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for model.ckpt, vocab.txt and metrics.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a TSV corpus
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Vocabulary file; defaults to vocab.txt next to the checkpoint
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Export interaction weight heatmaps for one pair as CSV
    Heatmap {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        q1: String,
        #[arg(long)]
        q2: String,
        /// Output directory; writes attention.csv and/or conflict.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Demonstrate the softmax floor: however unrelated the sequences,
    /// every attention row keeps a weight of at least 1/N
    FloorDemo {
        #[arg(long)]
        q1: String,
        #[arg(long)]
        q2: String,
    },
    /// Run the finite-difference gradient suite
    Gradcheck {
        /// Number of random composed expressions to check
        #[arg(long, default_value_t = 200)]
        expressions: usize,
    },
    /// Generate a synthetic contrastive corpus TSV
    GenSynthetic {
        #[arg(long, default_value_t = 4000)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        contrast_rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            data,
            mode,
            config,
            out,
        } => cmd_train(&data, &mode, config.as_deref(), &out, cli.seed),
        Command::Eval {
            checkpoint,
            data,
            vocab,
        } => cmd_eval(&checkpoint, &data, vocab.as_deref()),
        Command::Heatmap {
            checkpoint,
            vocab,
            q1,
            q2,
            out,
        } => cmd_heatmap(&checkpoint, vocab.as_deref(), &q1, &q2, &out),
        Command::FloorDemo { q1, q2 } => cmd_floor_demo(&q1, &q2, cli.seed),
        Command::Gradcheck { expressions } => cmd_gradcheck(expressions, cli.seed),
        Command::GenSynthetic {
            n,
            contrast_rate,
            out,
        } => {
            let records = generate_contrastive_corpus(n, contrast_rate, cli.seed)?;
            write_tsv(&out, &records)?;
            println!("wrote {} pairs to {}", records.len(), out.display());
            Ok(())
        }
    }
}

/// Overridable training/model settings read from a key=value file.
#[derive(Debug, Default)]
struct FileConfig {
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    embed_dim: Option<usize>,
    hidden_dim: Option<usize>,
    dropout: Option<f64>,
    max_len: Option<usize>,
    min_freq: Option<usize>,
    grad_clip: Option<f64>,
    bidirectional_pair: Option<bool>,
}

fn parse_file_config(path: &Path) -> Result<FileConfig> {
    let content =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut fc = FileConfig::default();
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("config line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |k: &str| Error::Format(format!("config: bad value for '{k}'"));
        match key {
            "epochs" => fc.epochs = Some(value.parse().map_err(|_| bad(key))?),
            "batch_size" => fc.batch_size = Some(value.parse().map_err(|_| bad(key))?),
            "lr" => fc.lr = Some(value.parse().map_err(|_| bad(key))?),
            "embed_dim" => fc.embed_dim = Some(value.parse().map_err(|_| bad(key))?),
            "hidden_dim" => fc.hidden_dim = Some(value.parse().map_err(|_| bad(key))?),
            "dropout" => fc.dropout = Some(value.parse().map_err(|_| bad(key))?),
            "max_len" => fc.max_len = Some(value.parse().map_err(|_| bad(key))?),
            "min_freq" => fc.min_freq = Some(value.parse().map_err(|_| bad(key))?),
            "grad_clip" => fc.grad_clip = Some(value.parse().map_err(|_| bad(key))?),
            "bidirectional_pair" => {
                fc.bidirectional_pair = Some(value.parse().map_err(|_| bad(key))?)
            }
            other => return Err(Error::Format(format!("config: unknown key '{other}'"))),
        }
    }
    Ok(fc)
}

fn cmd_train(
    data: &Path,
    mode: &str,
    config_path: Option<&Path>,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let mode: InteractionMode = mode.parse()?;
    let fc = match config_path {
        Some(p) => parse_file_config(p)?,
        None => FileConfig::default(),
    };
    let max_len = fc.max_len.unwrap_or(DEFAULT_MAX_LEN);
    let min_freq = fc.min_freq.unwrap_or(2);

    let report = load_quora_tsv(data)?;
    println!(
        "loaded {} pairs ({} malformed rows skipped)",
        report.records.len(),
        report.skipped
    );
    let split = balance_and_split(&report.records, seed)?;
    println!("split: {} train / {} test", split.train.len(), split.test.len());

    let vocab = build_vocab(&split.train, min_freq);
    println!("vocabulary: {} tokens", vocab.len());
    let train_set = encode_records(&split.train, &vocab, max_len);
    let test_set = encode_records(&split.test, &vocab, max_len);

    let mut model_config = ModelConfig::desk_scale(vocab.len(), mode);
    if let Some(d) = fc.embed_dim {
        model_config.embed_dim = d;
    }
    if let Some(d) = fc.hidden_dim {
        model_config.hidden_dim = d;
    }
    if let Some(d) = fc.dropout {
        model_config.dropout = d;
    }
    if let Some(b) = fc.bidirectional_pair {
        model_config.bidirectional_pair = b;
    }
    let train_config = TrainConfig {
        epochs: fc.epochs.unwrap_or(2),
        batch_size: fc.batch_size.unwrap_or(64),
        lr: fc.lr.unwrap_or(1e-3),
        seed,
        grad_clip: fc.grad_clip,
        ..TrainConfig::default()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = PairClassifier::init(model_config, &mut rng)?;
    println!(
        "model: mode={mode}, {} parameters",
        model.config.param_count()
    );

    let mut log = train(&model, &train_set, &train_config)?;
    for (split_name, set) in [("train", &train_set), ("test", &test_set)] {
        let (accuracy, cross_entropy) = evaluate(&model, set)?;
        println!("{split_name}: accuracy={accuracy:.4} cross_entropy={cross_entropy:.4}");
        log.evals.push(EvalRecord {
            split: split_name.to_string(),
            accuracy,
            cross_entropy,
        });
    }

    std::fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;
    save_checkpoint(&out.join("model.ckpt"), &model)?;
    vocab.save(&out.join("vocab.txt"))?;
    log.write_csv(&out.join("metrics.csv"))?;
    println!("wrote model.ckpt, vocab.txt, metrics.csv to {}", out.display());
    Ok(())
}

fn sibling_vocab(checkpoint: &Path, vocab: Option<&Path>) -> Result<Vocab> {
    let path = match vocab {
        Some(p) => p.to_path_buf(),
        None => checkpoint
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("vocab.txt"),
    };
    Vocab::load(&path)
}

fn cmd_eval(checkpoint: &Path, data: &Path, vocab: Option<&Path>) -> Result<()> {
    let model = load_checkpoint(checkpoint)?;
    let vocab = sibling_vocab(checkpoint, vocab)?;
    let report = load_quora_tsv(data)?;
    let set = encode_records(&report.records, &vocab, DEFAULT_MAX_LEN);
    let (accuracy, cross_entropy) = evaluate(&model, &set)?;
    println!("accuracy={accuracy:.4} cross_entropy={cross_entropy:.4}");
    Ok(())
}

fn cmd_heatmap(
    checkpoint: &Path,
    vocab: Option<&Path>,
    q1: &str,
    q2: &str,
    out: &Path,
) -> Result<()> {
    let model = load_checkpoint(checkpoint)?;
    let vocab = sibling_vocab(checkpoint, vocab)?;
    let tokens_u = tokenize(q1);
    let tokens_v = tokenize(q2);
    let ids_u = vocab.ids(&tokens_u, DEFAULT_MAX_LEN);
    let ids_v = vocab.ids(&tokens_v, DEFAULT_MAX_LEN);
    let tokens_u = tokens_u.into_iter().take(ids_u.len()).collect::<Vec<_>>();
    let tokens_v = tokens_v.into_iter().take(ids_v.len()).collect::<Vec<_>>();

    let tape = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let detail = model.forward_detailed(&tape, &ids_u, &ids_v, false, &mut rng)?;
    let (class, probs) = predict(&detail.logits)?;
    println!(
        "prediction: class={class} p(non-duplicate)={:.4} p(duplicate)={:.4}",
        probs[0], probs[1]
    );

    std::fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;
    let inter = &detail.forward_interaction;
    if let Some(w) = &inter.attn_weights {
        let path = out.join("attention.csv");
        export_heatmap(w, &tokens_u, &tokens_v, &path)?;
        println!("wrote {}", path.display());
    }
    if let Some(w) = &inter.conflict_weights {
        let path = out.join("conflict.csv");
        export_heatmap(w, &tokens_u, &tokens_v, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Build a throwaway randomly initialized encoder over exactly the tokens
/// of the two sentences, run the attention pipeline, and show that every
/// row of the weight matrix keeps a maximum weight of at least 1/N even
/// when nothing matches.
fn cmd_floor_demo(q1: &str, q2: &str, seed: u64) -> Result<()> {
    let tokens_u = tokenize(q1);
    let tokens_v = tokenize(q2);
    if tokens_u.is_empty() || tokens_v.is_empty() {
        return Err(Error::Data("both sequences must be non-empty".into()));
    }
    let texts = [tokens_u.clone(), tokens_v.clone()];
    let vocab = Vocab::build(texts.iter().map(Vec::as_slice), 1);

    let hidden = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = EmbeddingTable::init(vocab.len(), hidden, &mut rng)?;
    let l1 = GruLayerParams::init(hidden, hidden, &mut rng)?;
    let l2 = GruLayerParams::init(hidden, hidden, &mut rng)?;
    let proj = ProjectionPair::init(hidden, &mut rng)?;

    let tape = Tape::new();
    let ids_u = vocab.ids(&tokens_u, DEFAULT_MAX_LEN);
    let ids_v = vocab.ids(&tokens_v, DEFAULT_MAX_LEN);
    let u = encode(&tape, &ids_u, &table, &l1, &l2, DropoutCfg::off(), &mut rng)?;
    let v = encode(&tape, &ids_v, &table, &l1, &l2, DropoutCfg::off(), &mut rng)?;
    let u_lin = project(&tape, &u, &proj.wu)?;
    let v_lin = project(&tape, &v, &proj.wv)?;
    let scores = attention_scores(&tape, &u_lin, &v_lin)?;
    // sharpen: a freshly initialized encoder produces near-zero scores,
    // which would make every row trivially uniform
    let scores = seqpair::interaction::ScoreMatrix(tape.scale(&scores.0, 12.0));
    let rows = attention_floor_report(&scores, tokens_v.len())?;

    let n = tokens_v.len();
    println!("softmax floor demonstration (N = {n}, floor = 1/{n} = {:.4})", 1.0 / n as f64);
    println!("however dissimilar the sequences, each row's max weight cannot drop below the floor:");
    for (tok, row) in tokens_u.iter().zip(&rows) {
        println!(
            "  '{tok}': max weight {:.4} >= floor {:.4} (margin {:+.4})",
            row.max_weight, row.floor, row.margin
        );
    }
    debug_assert!(rows.iter().all(|r| r.max_weight >= r.floor - 1e-12));
    Ok(())
}

fn cmd_gradcheck(expressions: usize, seed: u64) -> Result<()> {
    println!("checking {expressions} random composed expressions (central differences, h = 1e-5)");
    let worst = gradcheck::run_expression_suite(seed, expressions)?;
    println!("  max relative error: {worst:.3e} (tolerance 1e-4)");
    if worst >= 1e-4 {
        return Err(Error::Numeric("expression gradient check failed".into()));
    }
    for mode in [
        InteractionMode::Attention,
        InteractionMode::Conflict,
        InteractionMode::Combined,
    ] {
        let report = gradcheck::check_model(mode, seed)?;
        println!(
            "end-to-end tiny model ({mode}): max relative error {:.3e} (tolerance 1e-3)",
            report.max_rel_error
        );
        if report.max_rel_error >= 1e-3 {
            for (name, err) in &report.per_param {
                if *err >= 1e-3 {
                    println!("  FAIL {name}: {err:.3e}");
                }
            }
            return Err(Error::Numeric(format!("model gradient check failed ({mode})")));
        }
    }
    println!("gradient suite passed");
    Ok(())
}
