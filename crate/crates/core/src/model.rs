//! The end-to-end pair classifier: shared encoder, interaction layer,
//! mean+max pooling, and a tapering stack of tanh dense layers feeding
//! two logits.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::{encode, DropoutCfg, EmbeddingTable, GruLayerParams};
use crate::error::{Error, Result};
use crate::interaction::{interact, InteractionMode, InteractionOutput, InteractionParams};
use crate::{Tape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub mode: InteractionMode,
    pub fc_layers: usize,
    pub dropout: f64,
    /// Run the interaction in both (q1|q2) and (q2|q1) directions and
    /// concatenate the pooled vectors.
    pub bidirectional_pair: bool,
}

impl ModelConfig {
    /// Desk-scale defaults: embed 64, hidden 64.
    pub fn desk_scale(vocab_size: usize, mode: InteractionMode) -> Self {
        ModelConfig {
            vocab_size,
            embed_dim: 64,
            hidden_dim: 64,
            mode,
            fc_layers: 4,
            dropout: 0.2,
            bidirectional_pair: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::Config("vocab_size must be >= 2".into()));
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.fc_layers == 0 {
            return Err(Error::Config("zero-sized model dimension".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} not in [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Input width of the dense stack: mean+max pooled fused vectors from
    /// one or two directions.
    pub fn fc_input_width(&self) -> usize {
        let fused = self.mode.fused_multiplier() * self.hidden_dim;
        let dirs = if self.bidirectional_pair { 2 } else { 1 };
        dirs * 2 * fused
    }

    /// Hidden widths of the dense stack: geometric taper from the input
    /// width down toward the 2 output logits.
    pub fn fc_widths(&self) -> Vec<usize> {
        let input = self.fc_input_width() as f64;
        let ratio = (2.0 / input).powf(1.0 / (self.fc_layers as f64 + 1.0));
        (1..=self.fc_layers)
            .map(|k| ((input * ratio.powi(k as i32)).round() as usize).max(2))
            .collect()
    }

    /// Closed-form trainable parameter count.
    pub fn param_count(&self) -> usize {
        let (v, e, h) = (self.vocab_size, self.embed_dim, self.hidden_dim);
        let embed = v * e;
        let gru1 = 3 * (e * h + h * h + h);
        let gru2 = 3 * (h * h + h * h + h);
        let inter = match self.mode {
            InteractionMode::Attention => 2 * h * h,
            InteractionMode::Conflict => 2 * h * h + h,
            InteractionMode::Combined => 4 * h * h + h,
        };
        let mut fc = 0;
        let mut prev = self.fc_input_width();
        for w in self.fc_widths() {
            fc += prev * w + w;
            prev = w;
        }
        fc += prev * 2 + 2; // output layer
        embed + gru1 + gru2 + inter + fc
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Tensor,
    pub b: Tensor,
}

impl Linear {
    fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Result<Linear> {
        let bound = 1.0 / (input as f64).sqrt();
        let data = (0..input * output)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Ok(Linear {
            w: Tensor::param(&[input, output], data)?,
            b: Tensor::param(&[1, output], vec![0.0; output])?,
        })
    }

    fn apply(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        tape.add_row(&tape.matmul(x, &self.w)?, &self.b)
    }
}

#[derive(Debug, Clone)]
pub struct PairClassifier {
    pub config: ModelConfig,
    pub embedding: EmbeddingTable,
    pub gru1: GruLayerParams,
    pub gru2: GruLayerParams,
    pub interaction: InteractionParams,
    pub fc: Vec<Linear>,
    pub out: Linear,
}

/// Logits plus the interaction outputs of both directions, for weight
/// matrix export.
#[derive(Debug, Clone)]
pub struct ForwardDetail {
    pub logits: Tensor,
    pub forward_interaction: InteractionOutput,
    pub backward_interaction: Option<InteractionOutput>,
}

impl PairClassifier {
    pub fn init<R: Rng>(config: ModelConfig, rng: &mut R) -> Result<PairClassifier> {
        config.validate()?;
        let embedding = EmbeddingTable::init(config.vocab_size, config.embed_dim, rng)?;
        let gru1 = GruLayerParams::init(config.embed_dim, config.hidden_dim, rng)?;
        let gru2 = GruLayerParams::init(config.hidden_dim, config.hidden_dim, rng)?;
        let interaction = InteractionParams::init(config.mode, config.hidden_dim, rng)?;
        let mut fc = Vec::with_capacity(config.fc_layers);
        let mut prev = config.fc_input_width();
        for width in config.fc_widths() {
            fc.push(Linear::init(prev, width, rng)?);
            prev = width;
        }
        let out = Linear::init(prev, 2, rng)?;
        Ok(PairClassifier {
            config,
            embedding,
            gru1,
            gru2,
            interaction,
            fc,
            out,
        })
    }

    /// All trainable tensors in a stable order.
    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![("embed.weights".to_string(), self.embedding.weights.clone())];
        out.extend(self.gru1.params("gru1"));
        out.extend(self.gru2.params("gru2"));
        out.extend(self.interaction.params("interaction"));
        for (i, layer) in self.fc.iter().enumerate() {
            out.push((format!("fc{i}.w"), layer.w.clone()));
            out.push((format!("fc{i}.b"), layer.b.clone()));
        }
        out.push(("out.w".to_string(), self.out.w.clone()));
        out.push(("out.b".to_string(), self.out.b.clone()));
        out
    }

    pub fn zero_grad(&self) {
        for (_, p) in self.params() {
            p.zero_grad();
        }
    }

    /// Encode both sequences, interact in one or both directions, pool,
    /// and classify. Returns `1×2` logits.
    pub fn forward_pair<R: Rng>(
        &self,
        tape: &Tape,
        q1_ids: &[usize],
        q2_ids: &[usize],
        training: bool,
        rng: &mut R,
    ) -> Result<Tensor> {
        Ok(self
            .forward_detailed(tape, q1_ids, q2_ids, training, rng)?
            .logits)
    }

    pub fn forward_detailed<R: Rng>(
        &self,
        tape: &Tape,
        q1_ids: &[usize],
        q2_ids: &[usize],
        training: bool,
        rng: &mut R,
    ) -> Result<ForwardDetail> {
        let drop = DropoutCfg {
            rate: self.config.dropout,
            training,
        };
        let u = encode(tape, q1_ids, &self.embedding, &self.gru1, &self.gru2, drop, rng)?;
        let v = encode(tape, q2_ids, &self.embedding, &self.gru1, &self.gru2, drop, rng)?;

        let fwd = interact(tape, &u, &v, &self.interaction)?;
        let mut pooled = vec![pool(tape, &fwd.fused, u.length)?];
        let bwd = if self.config.bidirectional_pair {
            let b = interact(tape, &v, &u, &self.interaction)?;
            pooled.push(pool(tape, &b.fused, v.length)?);
            Some(b)
        } else {
            None
        };
        let mut x = tape.concat(&pooled, 1)?;
        for layer in &self.fc {
            x = tape.tanh(&layer.apply(tape, &x)?);
            x = tape.dropout(&x, self.config.dropout, training, rng)?;
        }
        let logits = self.out.apply(tape, &x)?;
        Ok(ForwardDetail {
            logits,
            forward_interaction: fwd,
            backward_interaction: bwd,
        })
    }
}

/// Masked mean-pool and max-pool over the valid rows, concatenated into a
/// `1×2F` vector.
pub fn pool(tape: &Tape, fused: &Tensor, length: usize) -> Result<Tensor> {
    let mean = tape.mean_pool_rows(fused, length)?;
    let max = tape.max_pool_rows(fused, length)?;
    tape.concat(&[mean, max], 1)
}

/// Softmax over the two logits; ties go to class 0 (non-duplicate).
pub fn predict(logits: &Tensor) -> Result<(usize, [f64; 2])> {
    if logits.numel() != 2 {
        return Err(Error::Usage(format!(
            "predict expects 2 logits, got shape {:?}",
            logits.shape()
        )));
    }
    let d = logits.data();
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let m = d[0].max(d[1]);
    let e0 = (d[0] - m).exp();
    let e1 = (d[1] - m).exp();
    let p0 = e0 / (e0 + e1);
    let class = if d[1] > d[0] { 1 } else { 0 };
    Ok((class, [p0, 1.0 - p0]))
}

// ── checkpoints ──────────────────────────────────────────────────────

const MAGIC: &[u8; 8] = b"SPCK0001";

/// Write a checkpoint: a plain-text config header followed by every named
/// parameter as (name, shape, raw little-endian f64 values). Round-trips
/// bit-exactly.
pub fn save_checkpoint(path: &Path, model: &PairClassifier) -> Result<()> {
    let io_err = |e| Error::io(path.display().to_string(), e);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    f.write_all(MAGIC).map_err(io_err)?;
    let c = &model.config;
    let header = format!(
        "vocab_size={}\nembed_dim={}\nhidden_dim={}\nmode={}\nfc_layers={}\ndropout={}\nbidirectional_pair={}\n",
        c.vocab_size, c.embed_dim, c.hidden_dim, c.mode, c.fc_layers, c.dropout, c.bidirectional_pair
    );
    f.write_all(&(header.len() as u32).to_le_bytes()).map_err(io_err)?;
    f.write_all(header.as_bytes()).map_err(io_err)?;
    let params = model.params();
    f.write_all(&(params.len() as u32).to_le_bytes()).map_err(io_err)?;
    for (name, t) in params {
        f.write_all(&(name.len() as u32).to_le_bytes()).map_err(io_err)?;
        f.write_all(name.as_bytes()).map_err(io_err)?;
        let shape = t.shape();
        f.write_all(&(shape.len() as u32).to_le_bytes()).map_err(io_err)?;
        for &d in shape {
            f.write_all(&(d as u64).to_le_bytes()).map_err(io_err)?;
        }
        for &v in t.data().iter() {
            f.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    f.flush().map_err(io_err)
}

pub fn load_checkpoint(path: &Path) -> Result<PairClassifier> {
    use rand::SeedableRng;
    let io_err = |e| Error::io(path.display().to_string(), e);
    let mut f = std::io::BufReader::new(std::fs::File::open(path).map_err(io_err)?);

    let mut magic = [0u8; 8];
    f.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let header_len = read_u32(&mut f, path)? as usize;
    let mut header = vec![0u8; header_len];
    f.read_exact(&mut header).map_err(io_err)?;
    let header = String::from_utf8(header)
        .map_err(|_| Error::Format("checkpoint header is not UTF-8".into()))?;
    let config = parse_config_header(&header)?;

    // Build the skeleton, then overwrite every parameter from the file.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let model = PairClassifier::init(config, &mut rng)?;
    let by_name: std::collections::HashMap<String, Tensor> = model.params().into_iter().collect();

    let count = read_u32(&mut f, path)? as usize;
    if count != by_name.len() {
        return Err(Error::Format(format!(
            "checkpoint has {count} parameters, model expects {}",
            by_name.len()
        )));
    }
    for _ in 0..count {
        let name_len = read_u32(&mut f, path)? as usize;
        let mut name = vec![0u8; name_len];
        f.read_exact(&mut name).map_err(io_err)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
        let ndim = read_u32(&mut f, path)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut b = [0u8; 8];
            f.read_exact(&mut b).map_err(io_err)?;
            shape.push(u64::from_le_bytes(b) as usize);
        }
        let tensor = by_name
            .get(&name)
            .ok_or_else(|| Error::Format(format!("unknown parameter '{name}' in checkpoint")))?;
        if tensor.shape() != shape.as_slice() {
            return Err(Error::Format(format!(
                "parameter '{name}' shape {:?} != expected {:?}",
                shape,
                tensor.shape()
            )));
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            let mut b = [0u8; 8];
            f.read_exact(&mut b).map_err(io_err)?;
            data.push(f64::from_le_bytes(b));
        }
        *tensor.data_mut() = data;
    }
    Ok(model)
}

fn read_u32(f: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    f.read_exact(&mut b)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(u32::from_le_bytes(b))
}

fn parse_config_header(header: &str) -> Result<ModelConfig> {
    let mut map = std::collections::HashMap::new();
    for line in header.lines() {
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim(), v.trim());
        }
    }
    let get = |k: &str| -> Result<&str> {
        map.get(k)
            .copied()
            .ok_or_else(|| Error::Format(format!("checkpoint header missing '{k}'")))
    };
    let parse_usize = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::Format(format!("bad value for '{k}'")))
    };
    Ok(ModelConfig {
        vocab_size: parse_usize("vocab_size")?,
        embed_dim: parse_usize("embed_dim")?,
        hidden_dim: parse_usize("hidden_dim")?,
        mode: get("mode")?.parse()?,
        fc_layers: parse_usize("fc_layers")?,
        dropout: get("dropout")?
            .parse()
            .map_err(|_| Error::Format("bad value for 'dropout'".into()))?,
        bidirectional_pair: get("bidirectional_pair")?
            .parse()
            .map_err(|_| Error::Format("bad value for 'bidirectional_pair'".into()))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tiny_config(mode: InteractionMode) -> ModelConfig {
        ModelConfig {
            vocab_size: 20,
            embed_dim: 4,
            hidden_dim: 5,
            mode,
            fc_layers: 4,
            dropout: 0.2,
            bidirectional_pair: true,
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(99)
    }

    #[test]
    fn pool_single_row_duplicates_it() {
        let tape = Tape::new();
        let x = Tensor::from_rows(&[vec![1.0, -2.0, 3.0]]).unwrap();
        let p = pool(&tape, &x, 1).unwrap();
        assert_eq!(&*p.data(), &[1.0, -2.0, 3.0, 1.0, -2.0, 3.0]);
    }

    #[test]
    fn pool_constant_rows_mean_equals_max() {
        let tape = Tape::new();
        let x = Tensor::from_rows(&[vec![2.0, 5.0], vec![2.0, 5.0]]).unwrap();
        let p = pool(&tape, &x, 2).unwrap();
        assert_eq!(&*p.data(), &[2.0, 5.0, 2.0, 5.0]);
    }

    #[test]
    fn pool_matches_loop_oracle() {
        use rand::Rng as _;
        let mut r = rng();
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| r.gen_range(-2.0..2.0)).collect())
            .collect();
        let tape = Tape::new();
        let x = Tensor::from_rows(&rows).unwrap();
        let p = pool(&tape, &x, 3).unwrap(); // only first 3 rows valid
        for j in 0..3 {
            let mean: f64 = (0..3).map(|i| rows[i][j]).sum::<f64>() / 3.0;
            let max = (0..3).map(|i| rows[i][j]).fold(f64::NEG_INFINITY, f64::max);
            assert!((p.get(0, j) - mean).abs() < 1e-12);
            assert!((p.get(0, 3 + j) - max).abs() < 1e-12);
        }
    }

    #[test]
    fn pool_zero_length_is_error() {
        let tape = Tape::new();
        let x = Tensor::zeros(2, 2);
        assert!(pool(&tape, &x, 0).is_err());
    }

    #[test]
    fn forward_logits_shape_is_two() {
        let mut r = rng();
        let model = PairClassifier::init(tiny_config(InteractionMode::Combined), &mut r).unwrap();
        let tape = Tape::new();
        let logits = model
            .forward_pair(&tape, &[2, 5, 7], &[3, 4], false, &mut r)
            .unwrap();
        assert_eq!(logits.shape(), &[1, 2]);
    }

    #[test]
    fn forward_is_deterministic_without_dropout() {
        let mut r = rng();
        let model = PairClassifier::init(tiny_config(InteractionMode::Combined), &mut r).unwrap();
        let tape = Tape::new();
        let a = model
            .forward_pair(&tape, &[2, 5, 7], &[3, 4], false, &mut r)
            .unwrap();
        let b = model
            .forward_pair(&tape, &[2, 5, 7], &[3, 4], false, &mut r)
            .unwrap();
        assert_eq!(&*a.data(), &*b.data());
    }

    #[test]
    fn identical_inputs_give_equal_pooled_halves() {
        // with q1 == q2 both interaction directions are identical, so the
        // logits equal those of a forward with the halves swapped
        let mut r = rng();
        let model = PairClassifier::init(tiny_config(InteractionMode::Combined), &mut r).unwrap();
        let tape = Tape::new();
        let ids = [2, 5, 7];
        let a = model.forward_pair(&tape, &ids, &ids, false, &mut r).unwrap();
        let b = model.forward_pair(&tape, &ids, &ids, false, &mut r).unwrap();
        assert_eq!(&*a.data(), &*b.data());
        let detail = model
            .forward_detailed(&tape, &ids, &ids, false, &mut r)
            .unwrap();
        let fwd = detail.forward_interaction.fused;
        let bwd = detail.backward_interaction.unwrap().fused;
        assert_eq!(&*fwd.data(), &*bwd.data());
    }

    #[test]
    fn predict_tie_rule_and_probs() {
        let logits = Tensor::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let (class, probs) = predict(&logits).unwrap();
        assert_eq!(class, 0);
        assert_eq!(probs, [0.5, 0.5]);

        let logits = Tensor::from_rows(&[vec![-3.0, 3.0]]).unwrap();
        let (class, probs) = predict(&logits).unwrap();
        assert_eq!(class, 1);
        assert!((probs[0] + probs[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn param_count_matches_closed_form() {
        for mode in [
            InteractionMode::Attention,
            InteractionMode::Conflict,
            InteractionMode::Combined,
        ] {
            let mut r = rng();
            let config = tiny_config(mode);
            let model = PairClassifier::init(config.clone(), &mut r).unwrap();
            let actual: usize = model.params().iter().map(|(_, t)| t.numel()).sum();
            assert_eq!(actual, config.param_count(), "mode {mode}");
        }
    }

    #[test]
    fn combined_exceeds_attention_by_conflict_params_plus_fc_delta() {
        let attn = tiny_config(InteractionMode::Attention);
        let comb = tiny_config(InteractionMode::Combined);
        let h = attn.hidden_dim;
        let conflict_path = 2 * h * h + h; // Wu + Wv + Ws
        let fc_delta = |c: &ModelConfig| {
            let mut total = 0;
            let mut prev = c.fc_input_width();
            for w in c.fc_widths() {
                total += prev * w + w;
                prev = w;
            }
            total + prev * 2 + 2
        };
        let expected = conflict_path + fc_delta(&comb) - fc_delta(&attn);
        assert_eq!(comb.param_count() - attn.param_count(), expected);
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let mut r = rng();
        let model = PairClassifier::init(tiny_config(InteractionMode::Combined), &mut r).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &model).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.config, model.config);
        for ((n1, t1), (n2, t2)) in model.params().iter().zip(loaded.params().iter()) {
            assert_eq!(n1, n2);
            let d1 = t1.data();
            let d2 = t2.data();
            assert!(
                d1.iter().zip(d2.iter()).all(|(a, b)| a.to_bits() == b.to_bits()),
                "parameter {n1} not bit-identical"
            );
        }
        // saving the loaded model reproduces the same bytes
        let path2 = dir.path().join("model2.ckpt");
        save_checkpoint(&path2, &loaded).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn load_checkpoint_bad_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"definitely not a checkpoint").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));
    }
}
