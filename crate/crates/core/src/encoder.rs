//! Token embedding, vocabulary, and the two-layer stacked GRU encoder
//! shared between both sequences of a pair.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::{Tape, Tensor};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Token vocabulary. Id 0 is padding, id 1 is the unknown token; real
/// tokens start at 2 and require `min_freq` occurrences in the corpus.
#[derive(Debug, Clone)]
pub struct Vocab {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocab {
    pub fn build<'a, I>(texts: I, min_freq: usize) -> Vocab
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for text in texts {
            for tok in text {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<&str> = counts
            .iter()
            .filter(|(_, &c)| c >= min_freq)
            .map(|(&t, _)| t)
            .collect();
        kept.sort_unstable(); // deterministic id assignment
        let mut id_to_token = vec!["<pad>".to_string(), "<unk>".to_string()];
        id_to_token.extend(kept.iter().map(|t| t.to_string()));
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab {
            token_to_id,
            id_to_token,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Map tokens to ids, truncating at `max_len`.
    pub fn ids(&self, tokens: &[String], max_len: usize) -> Vec<usize> {
        tokens.iter().take(max_len).map(|t| self.id(t)).collect()
    }

    /// One token per line; the line number is the id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        for tok in &self.id_to_token {
            writeln!(f, "{tok}").map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocab> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut id_to_token = Vec::new();
        for line in BufReader::new(f).lines() {
            id_to_token.push(line.map_err(|e| Error::io(path.display().to_string(), e))?);
        }
        if id_to_token.len() < 2 {
            return Err(Error::Format("vocabulary file has fewer than 2 entries".into()));
        }
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocab {
            token_to_id,
            id_to_token,
        })
    }
}

/// Trainable lookup table of word vectors. Row 0 (padding) stays zero and
/// receives no gradient.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub weights: Tensor,
    pub vocab_size: usize,
    pub dim: usize,
}

impl EmbeddingTable {
    /// Rows ~ N(0, 0.1), except the padding row which is zero.
    pub fn init<R: Rng>(vocab_size: usize, dim: usize, rng: &mut R) -> Result<EmbeddingTable> {
        if vocab_size < 2 {
            return Err(Error::Config("vocab_size must be >= 2".into()));
        }
        let mut data = vec![0.0f64; vocab_size * dim];
        for row in 1..vocab_size {
            for j in 0..dim {
                data[row * dim + j] = normal(rng) * 0.1;
            }
        }
        Ok(EmbeddingTable {
            weights: Tensor::param(&[vocab_size, dim], data)?,
            vocab_size,
            dim,
        })
    }

    /// Row `t` of the output is the table row for `token_ids[t]`.
    pub fn embed(&self, tape: &Tape, token_ids: &[usize]) -> Result<Tensor> {
        tape.embedding(&self.weights, token_ids, &[PAD_ID])
    }
}

/// Box–Muller standard normal from a uniform generator.
fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Update/reset/candidate weights and biases of one GRU layer.
#[derive(Debug, Clone)]
pub struct GruLayerParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    // input-path weights [D×H]
    pub wz: Tensor,
    pub wr: Tensor,
    pub wh: Tensor,
    // hidden-path weights [H×H]
    pub uz: Tensor,
    pub ur: Tensor,
    pub uh: Tensor,
    // biases [1×H]
    pub bz: Tensor,
    pub br: Tensor,
    pub bh: Tensor,
}

impl GruLayerParams {
    /// Weights ~ U(−1/√H, 1/√H), zero biases.
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Result<GruLayerParams> {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mut mat = |r: usize, c: usize| -> Result<Tensor> {
            let data = (0..r * c).map(|_| rng.gen_range(-bound..bound)).collect();
            Tensor::param(&[r, c], data)
        };
        Ok(GruLayerParams {
            input_dim,
            hidden_dim,
            wz: mat(input_dim, hidden_dim)?,
            wr: mat(input_dim, hidden_dim)?,
            wh: mat(input_dim, hidden_dim)?,
            uz: mat(hidden_dim, hidden_dim)?,
            ur: mat(hidden_dim, hidden_dim)?,
            uh: mat(hidden_dim, hidden_dim)?,
            bz: Tensor::param(&[1, hidden_dim], vec![0.0; hidden_dim])?,
            br: Tensor::param(&[1, hidden_dim], vec![0.0; hidden_dim])?,
            bh: Tensor::param(&[1, hidden_dim], vec![0.0; hidden_dim])?,
        })
    }

    pub fn params(&self, prefix: &str) -> Vec<(String, Tensor)> {
        [
            ("wz", &self.wz),
            ("wr", &self.wr),
            ("wh", &self.wh),
            ("uz", &self.uz),
            ("ur", &self.ur),
            ("uh", &self.uh),
            ("bz", &self.bz),
            ("br", &self.br),
            ("bh", &self.bh),
        ]
        .into_iter()
        .map(|(n, t)| (format!("{prefix}.{n}"), t.clone()))
        .collect()
    }
}

/// Per-token hidden states with the true (pre-padding) length. Rows at
/// index >= `length` are exactly zero.
#[derive(Debug, Clone)]
pub struct EncodedSequence {
    pub states: Tensor,
    pub length: usize,
}

impl EncodedSequence {
    pub fn hidden_dim(&self) -> usize {
        self.states.dims2().1
    }
}

/// One GRU step: `h' = (1−z)⊙h + z⊙c` with sigmoid gates and tanh
/// candidate.
fn gru_step(
    tape: &Tape,
    x: &Tensor,
    h: &Tensor,
    p: &GruLayerParams,
    ones: &Tensor,
) -> Result<Tensor> {
    let z = tape.sigmoid(&tape.add_row(
        &tape.add(&tape.matmul(x, &p.wz)?, &tape.matmul(h, &p.uz)?)?,
        &p.bz,
    )?);
    let r = tape.sigmoid(&tape.add_row(
        &tape.add(&tape.matmul(x, &p.wr)?, &tape.matmul(h, &p.ur)?)?,
        &p.br,
    )?);
    let rh = tape.mul(&r, h)?;
    let c = tape.tanh(&tape.add_row(
        &tape.add(&tape.matmul(x, &p.wh)?, &tape.matmul(&rh, &p.uh)?)?,
        &p.bh,
    )?);
    let keep = tape.mul(&tape.sub(ones, &z)?, h)?;
    let new = tape.mul(&z, &c)?;
    tape.add(&keep, &new)
}

/// Run one GRU layer over the first `valid_len` rows of `inputs`; rows
/// beyond the valid length come out as exact zeros.
pub fn gru_layer(
    tape: &Tape,
    inputs: &Tensor,
    params: &GruLayerParams,
    h0: &Tensor,
    valid_len: usize,
) -> Result<Tensor> {
    let (t_total, d) = inputs.dims2();
    if d != params.input_dim {
        return Err(Error::Dimension {
            op: "gru_layer",
            lhs: inputs.shape().to_vec(),
            rhs: vec![params.input_dim, params.hidden_dim],
        });
    }
    if valid_len == 0 || valid_len > t_total {
        return Err(Error::Data(format!(
            "gru_layer: valid length {valid_len} over {t_total} rows"
        )));
    }
    let h_dim = params.hidden_dim;
    let ones = Tensor::constant(&[1, h_dim], vec![1.0; h_dim])?;
    let mut h = h0.clone();
    let mut states = Vec::with_capacity(t_total);
    for t in 0..valid_len {
        let x = tape.select_row(inputs, t)?;
        h = gru_step(tape, &x, &h, params, &ones)?;
        states.push(h.clone());
    }
    for _ in valid_len..t_total {
        states.push(Tensor::zeros(1, h_dim));
    }
    tape.concat(&states, 0)
}

/// Settings for dropout inside the encoder stack (after each GRU layer).
#[derive(Debug, Clone, Copy)]
pub struct DropoutCfg {
    pub rate: f64,
    pub training: bool,
}

impl DropoutCfg {
    pub fn off() -> Self {
        DropoutCfg {
            rate: 0.0,
            training: false,
        }
    }
}

/// Embed and run both stacked GRU layers. The true length is the id count
/// before the trailing padding run; dropout is applied after each layer
/// when enabled.
pub fn encode<R: Rng>(
    tape: &Tape,
    token_ids: &[usize],
    table: &EmbeddingTable,
    layer1: &GruLayerParams,
    layer2: &GruLayerParams,
    dropout: DropoutCfg,
    rng: &mut R,
) -> Result<EncodedSequence> {
    let length = token_ids
        .iter()
        .rposition(|&id| id != PAD_ID)
        .map(|p| p + 1)
        .unwrap_or(0);
    if length == 0 {
        return Err(Error::Data("encode: empty sequence".into()));
    }
    let h = layer1.hidden_dim;
    let h0 = Tensor::zeros(1, h);
    let embedded = table.embed(tape, token_ids)?;
    let s1 = gru_layer(tape, &embedded, layer1, &h0, length)?;
    let s1 = tape.dropout(&s1, dropout.rate, dropout.training, rng)?;
    let s2 = gru_layer(tape, &s1, layer2, &h0, length)?;
    let s2 = tape.dropout(&s2, dropout.rate, dropout.training, rng)?;
    Ok(EncodedSequence {
        states: s2,
        length,
    })
}
