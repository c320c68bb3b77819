//! Corpus ingestion (Quora-format TSV), balanced 8:2 splitting, the
//! synthetic contrastive-pair generator, and heatmap CSV export.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoder::Vocab;
use crate::error::{Error, Result};
use crate::interaction::WeightMatrix;

/// Default cap on tokens per sequence; longer texts are truncated.
pub const DEFAULT_MAX_LEN: usize = 40;

/// One labelled pair: label 1 = duplicate, 0 = not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencePairRecord {
    pub text1: String,
    pub text2: String,
    pub label: u8,
}

/// A pair already mapped to token ids.
#[derive(Debug, Clone)]
pub struct EncodedPair {
    pub q1: Vec<usize>,
    pub q2: Vec<usize>,
    pub label: u8,
}

/// Lowercase, trim, collapse whitespace runs, and split punctuation into
/// separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.to_lowercase().chars() {
        if ch.is_alphanumeric() || ch == '\'' {
            current.push(ch);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Result of parsing a TSV corpus.
#[derive(Debug)]
pub struct LoadReport {
    pub records: Vec<SequencePairRecord>,
    pub skipped: usize,
}

/// Parse a tab-separated file with a header naming at least `question1`,
/// `question2` and `is_duplicate`. Malformed rows (wrong field count,
/// empty question, non-binary label) are skipped and counted.
pub fn load_quora_tsv(path: &Path) -> Result<LoadReport> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = BufReader::new(f).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty TSV file".into()))?
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let cols: Vec<&str> = header.split('\t').collect();
    let find = |name: &str| -> Result<usize> {
        cols.iter()
            .position(|&c| c == name)
            .ok_or_else(|| Error::Format(format!("TSV header missing column '{name}'")))
    };
    let (c1, c2, cl) = (find("question1")?, find("question2")?, find("is_duplicate")?);
    let needed = c1.max(c2).max(cl) + 1;

    let mut records = Vec::new();
    let mut skipped = 0usize;
    for line in lines {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < needed {
            skipped += 1;
            continue;
        }
        let text1 = fields[c1].trim();
        let text2 = fields[c2].trim();
        let label = match fields[cl].trim() {
            "0" => 0,
            "1" => 1,
            _ => {
                skipped += 1;
                continue;
            }
        };
        if text1.is_empty() || text2.is_empty() {
            skipped += 1;
            continue;
        }
        records.push(SequencePairRecord {
            text1: text1.to_string(),
            text2: text2.to_string(),
            label,
        });
    }
    Ok(LoadReport { records, skipped })
}

/// Write records in the same TSV layout `load_quora_tsv` reads. Texts
/// containing tabs are rejected rather than quoted.
pub fn write_tsv(path: &Path, records: &[SequencePairRecord]) -> Result<()> {
    let io_err = |e| Error::io(path.display().to_string(), e);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(f, "question1\tquestion2\tis_duplicate").map_err(io_err)?;
    for r in records {
        if r.text1.contains('\t') || r.text2.contains('\t') {
            return Err(Error::Data("text contains a tab character".into()));
        }
        writeln!(f, "{}\t{}\t{}", r.text1, r.text2, r.label).map_err(io_err)?;
    }
    f.flush().map_err(io_err)
}

/// Class-balanced train/test split.
#[derive(Debug)]
pub struct DatasetSplit {
    pub train: Vec<SequencePairRecord>,
    pub test: Vec<SequencePairRecord>,
    pub seed: u64,
}

/// Downsample the majority class to the minority count with a seeded RNG,
/// shuffle, and split 8:2.
pub fn balance_and_split(records: &[SequencePairRecord], seed: u64) -> Result<DatasetSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<&SequencePairRecord> = records.iter().filter(|r| r.label == 1).collect();
    let mut neg: Vec<&SequencePairRecord> = records.iter().filter(|r| r.label == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Data(
            "balance_and_split needs both classes present".into(),
        ));
    }
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let keep = pos.len().min(neg.len());
    let mut all: Vec<SequencePairRecord> = pos[..keep]
        .iter()
        .chain(neg[..keep].iter())
        .map(|&r| r.clone())
        .collect();
    all.shuffle(&mut rng);
    let train_n = ((all.len() as f64) * 0.8).round() as usize;
    let test = all.split_off(train_n);
    Ok(DatasetSplit {
        train: all,
        test,
        seed,
    })
}

// ── synthetic contrastive corpus ─────────────────────────────────────

const SLOT_GROUPS: &[&[&str]] = &[
    &["french", "spanish", "german", "italian", "japanese"],
    &["guitar", "piano", "violin", "drums"],
    &["python", "java", "rust", "haskell"],
    &["london", "paris", "tokyo", "berlin"],
    &["dog", "cat", "horse", "rabbit"],
    &["tea", "coffee", "juice", "milk"],
];

const TEMPLATE_PAIRS: &[(&str, &str)] = &[
    (
        "what is the best way to learn {}",
        "how do i learn {} quickly",
    ),
    ("why do people like {}", "what makes {} so popular"),
    (
        "how can i improve my {} skills",
        "what helps to get better at {}",
    ),
    (
        "is it hard to master {}",
        "how difficult is it to master {}",
    ),
    (
        "where can i find good {} lessons",
        "who offers good {} lessons",
    ),
];

pub fn slot_words() -> Vec<&'static str> {
    SLOT_GROUPS.iter().flat_map(|g| g.iter().copied()).collect()
}

/// Template-generated near-duplicate pairs. A fraction `contrast_rate` of
/// the pairs swap the slot word for a different one from the same group
/// (label 0); the rest keep the slot word (label 1). Whether both sides
/// use the same template is independent of the label, so surface overlap
/// carries no signal — only the slot pair does.
pub fn generate_contrastive_corpus(
    n: usize,
    contrast_rate: f64,
    seed: u64,
) -> Result<Vec<SequencePairRecord>> {
    if n < 2 {
        return Err(Error::Config("corpus size must be >= 2".into()));
    }
    if !(0.0..=1.0).contains(&contrast_rate) {
        return Err(Error::Config(format!(
            "contrast_rate {contrast_rate} not in [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let (t1, t2) = TEMPLATE_PAIRS[rng.gen_range(0..TEMPLATE_PAIRS.len())];
        let group = SLOT_GROUPS[rng.gen_range(0..SLOT_GROUPS.len())];
        let x = group[rng.gen_range(0..group.len())];
        let same_template = rng.gen_bool(0.5);
        let contrastive = rng.gen_bool(contrast_rate);
        let y = if contrastive {
            loop {
                let cand = group[rng.gen_range(0..group.len())];
                if cand != x {
                    break cand;
                }
            }
        } else {
            x
        };
        let (side1, side2) = if same_template { (t1, t1) } else { (t1, t2) };
        records.push(SequencePairRecord {
            text1: side1.replace("{}", x),
            text2: side2.replace("{}", y),
            label: u8::from(!contrastive),
        });
    }
    Ok(records)
}

/// Tokenize a record set against a vocabulary, dropping nothing: every
/// record becomes an id pair (unknown tokens map to the UNK id).
pub fn encode_records(
    records: &[SequencePairRecord],
    vocab: &Vocab,
    max_len: usize,
) -> Vec<EncodedPair> {
    records
        .iter()
        .map(|r| EncodedPair {
            q1: vocab.ids(&tokenize(&r.text1), max_len),
            q2: vocab.ids(&tokenize(&r.text2), max_len),
            label: r.label,
        })
        .collect()
}

/// Build the vocabulary from the training split only.
pub fn build_vocab(train: &[SequencePairRecord], min_freq: usize) -> Vocab {
    let texts: Vec<Vec<String>> = train
        .iter()
        .flat_map(|r| [tokenize(&r.text1), tokenize(&r.text2)])
        .collect();
    Vocab::build(texts.iter().map(Vec::as_slice), min_freq)
}

// ── heatmap export ───────────────────────────────────────────────────

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write a weight matrix as CSV: header row = `v` tokens, first column =
/// `u` tokens, cells = weights at 6 decimal places.
pub fn export_heatmap(
    weights: &WeightMatrix,
    tokens_u: &[String],
    tokens_v: &[String],
    path: &Path,
) -> Result<()> {
    let (m, n) = weights.0.dims2();
    if tokens_u.len() != m || tokens_v.len() != n {
        return Err(Error::Usage(format!(
            "heatmap: {}x{} tokens for a {m}x{n} matrix",
            tokens_u.len(),
            tokens_v.len()
        )));
    }
    let io_err = |e| Error::io(path.display().to_string(), e);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    let header: Vec<String> = std::iter::once(String::new())
        .chain(tokens_v.iter().map(|t| csv_escape(t)))
        .collect();
    writeln!(f, "{}", header.join(",")).map_err(io_err)?;
    let data = weights.0.data();
    for i in 0..m {
        let mut row = vec![csv_escape(&tokens_u[i])];
        for j in 0..n {
            row.push(format!("{:.6}", data[i * n + j]));
        }
        writeln!(f, "{}", row.join(",")).map_err(io_err)?;
    }
    f.flush().map_err(io_err)
}

/// Parse a heatmap CSV back into (u tokens, v tokens, weights).
pub fn parse_heatmap(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>)> {
    let content =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = content.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty heatmap CSV".into()))?;
    let tokens_v: Vec<String> = split_csv(header)?.into_iter().skip(1).collect();
    let mut tokens_u = Vec::new();
    let mut rows = Vec::new();
    for line in lines {
        let fields = split_csv(line)?;
        if fields.len() != tokens_v.len() + 1 {
            return Err(Error::Format("ragged heatmap CSV row".into()));
        }
        tokens_u.push(fields[0].clone());
        let row: Vec<f64> = fields[1..]
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad weight cell '{s}'")))
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    Ok((tokens_u, tokens_v, rows))
}

fn split_csv(line: &str) -> Result<Vec<String>> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut in_quotes = false;
    let mut chars = line.chars().peekable();
    while let Some(ch) = chars.next() {
        match ch {
            '"' if in_quotes => {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    current.push('"');
                } else {
                    in_quotes = false;
                }
            }
            '"' => in_quotes = true,
            ',' if !in_quotes => fields.push(std::mem::take(&mut current)),
            _ => current.push(ch),
        }
    }
    if in_quotes {
        return Err(Error::Format("unterminated quote in CSV".into()));
    }
    fields.push(current);
    Ok(fields)
}
