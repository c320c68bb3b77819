//! Central finite-difference gradient checking.
//!
//! Used by the test suites and the `gradcheck` CLI subcommand. The forward
//! closure must be deterministic: it is re-run twice per parameter element
//! with that element perturbed by ±h.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::{Tape, Tensor};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Outcome of one gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// (parameter name, max relative error over its elements)
    pub per_param: Vec<(String, f64)>,
    pub max_rel_error: f64,
}

/// Relative error between an analytic and a numeric derivative. Pairs
/// where both magnitudes are below 1e-6 count as exact; the finite
/// difference itself is only good to ~h² there.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-6 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Check the analytic gradients of `params` for the scalar loss produced
/// by `forward`, which must build a fresh tape per call.
pub fn check_gradients(
    params: &[(String, Tensor)],
    forward: impl Fn() -> Result<f64>,
    h: f64,
) -> Result<GradCheckReport> {
    let mut per_param = Vec::with_capacity(params.len());
    let mut max_rel = 0.0f64;
    for (name, p) in params {
        let analytic = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
        let mut worst = 0.0f64;
        for i in 0..p.numel() {
            let orig = p.data()[i];
            p.data_mut()[i] = orig + h;
            let plus = forward()?;
            p.data_mut()[i] = orig - h;
            let minus = forward()?;
            p.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(rel_error(analytic[i], numeric));
        }
        max_rel = max_rel.max(worst);
        per_param.push((name.clone(), worst));
    }
    Ok(GradCheckReport {
        per_param,
        max_rel_error: max_rel,
    })
}

// ── random composed expressions over the op set ─────────────────────

/// One step of a randomly generated straight-line expression. Indices
/// refer to earlier values (parameters first, then instruction outputs).
#[derive(Debug, Clone)]
pub enum Instr {
    Tanh(usize),
    Sigmoid(usize),
    Scale(usize, f64),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MatMul(usize, usize),
    Transpose(usize),
    SoftmaxRows(usize),
    AddRow(usize, usize),
    ConcatRows(usize, usize),
    ConcatCols(usize, usize),
}

/// A reproducible random expression: parameter shapes plus a straight-line
/// program ending in `sum(last)`.
#[derive(Debug, Clone)]
pub struct Expression {
    pub param_shapes: Vec<(usize, usize)>,
    pub instrs: Vec<Instr>,
}

impl Expression {
    /// Evaluate on the given tape, returning the scalar loss tensor.
    pub fn eval(&self, tape: &Tape, params: &[Tensor]) -> Result<Tensor> {
        let mut vals: Vec<Tensor> = params.to_vec();
        for instr in &self.instrs {
            let out = match *instr {
                Instr::Tanh(a) => tape.tanh(&vals[a]),
                Instr::Sigmoid(a) => tape.sigmoid(&vals[a]),
                Instr::Scale(a, c) => tape.scale(&vals[a], c),
                Instr::Add(a, b) => tape.add(&vals[a], &vals[b])?,
                Instr::Sub(a, b) => tape.sub(&vals[a], &vals[b])?,
                Instr::Mul(a, b) => tape.mul(&vals[a], &vals[b])?,
                Instr::MatMul(a, b) => tape.matmul(&vals[a], &vals[b])?,
                Instr::Transpose(a) => tape.transpose(&vals[a])?,
                Instr::SoftmaxRows(a) => tape.softmax_rows(&vals[a])?,
                Instr::AddRow(a, b) => tape.add_row(&vals[a], &vals[b])?,
                Instr::ConcatRows(a, b) => tape.concat(&[vals[a].clone(), vals[b].clone()], 0)?,
                Instr::ConcatCols(a, b) => tape.concat(&[vals[a].clone(), vals[b].clone()], 1)?,
            };
            vals.push(out);
        }
        Ok(tape.sum(vals.last().expect("non-empty expression")))
    }

    /// Generate a random expression of `depth` instructions.
    pub fn random(rng: &mut ChaCha8Rng, depth: usize) -> Expression {
        let n_params = rng.gen_range(2..=4);
        let param_shapes: Vec<(usize, usize)> = (0..n_params)
            .map(|_| (rng.gen_range(1..=3), rng.gen_range(1..=3)))
            .collect();
        let mut shapes: Vec<(usize, usize)> = param_shapes.clone();
        let mut instrs = Vec::with_capacity(depth);
        let mut guard = 0;
        while instrs.len() < depth && guard < depth * 50 {
            guard += 1;
            let a = rng.gen_range(0..shapes.len());
            let (ra, ca) = shapes[a];
            let choice = rng.gen_range(0..9);
            let produced = match choice {
                0 => Some((Instr::Tanh(a), (ra, ca))),
                1 => Some((Instr::Sigmoid(a), (ra, ca))),
                2 => Some((Instr::Scale(a, rng.gen_range(-2.0..2.0)), (ra, ca))),
                3 => Some((Instr::SoftmaxRows(a), (ra, ca))),
                4 => Some((Instr::Transpose(a), (ca, ra))),
                5 => {
                    // equal-shape binary
                    let peers: Vec<usize> = (0..shapes.len())
                        .filter(|&b| shapes[b] == (ra, ca))
                        .collect();
                    let b = peers[rng.gen_range(0..peers.len())];
                    let op = match rng.gen_range(0..3) {
                        0 => Instr::Add(a, b),
                        1 => Instr::Sub(a, b),
                        _ => Instr::Mul(a, b),
                    };
                    Some((op, (ra, ca)))
                }
                6 => {
                    let peers: Vec<usize> =
                        (0..shapes.len()).filter(|&b| shapes[b].0 == ca).collect();
                    if peers.is_empty() {
                        None
                    } else {
                        let b = peers[rng.gen_range(0..peers.len())];
                        Some((Instr::MatMul(a, b), (ra, shapes[b].1)))
                    }
                }
                7 => {
                    let peers: Vec<usize> =
                        (0..shapes.len()).filter(|&b| shapes[b] == (1, ca)).collect();
                    if peers.is_empty() {
                        None
                    } else {
                        let b = peers[rng.gen_range(0..peers.len())];
                        Some((Instr::AddRow(a, b), (ra, ca)))
                    }
                }
                _ => {
                    let along_rows = rng.gen_bool(0.5);
                    let peers: Vec<usize> = (0..shapes.len())
                        .filter(|&b| {
                            if along_rows {
                                shapes[b].1 == ca
                            } else {
                                shapes[b].0 == ra
                            }
                        })
                        .collect();
                    if peers.is_empty() {
                        None
                    } else {
                        let b = peers[rng.gen_range(0..peers.len())];
                        if along_rows {
                            Some((Instr::ConcatRows(a, b), (ra + shapes[b].0, ca)))
                        } else {
                            Some((Instr::ConcatCols(a, b), (ra, ca + shapes[b].1)))
                        }
                    }
                }
            };
            if let Some((instr, shape)) = produced {
                instrs.push(instr);
                shapes.push(shape);
            }
        }
        Expression {
            param_shapes,
            instrs,
        }
    }
}

/// Check one random expression; returns its max relative gradient error.
pub fn check_expression(seed: u64, depth: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let expr = Expression::random(&mut rng, depth);
    let params: Vec<Tensor> = expr
        .param_shapes
        .iter()
        .map(|&(r, c)| {
            let data = (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Tensor::param(&[r, c], data)
        })
        .collect::<Result<_>>()?;
    let tape = Tape::new();
    let loss = expr.eval(&tape, &params)?;
    tape.backward(&loss)?;
    let named: Vec<(String, Tensor)> = params
        .iter()
        .enumerate()
        .map(|(i, p)| (format!("p{i}"), p.clone()))
        .collect();
    let expr2 = expr.clone();
    let params2 = params.clone();
    let report = check_gradients(
        &named,
        move || {
            let tape = Tape::new();
            Ok(expr2.eval(&tape, &params2)?.item())
        },
        DEFAULT_STEP,
    )?;
    Ok(report.max_rel_error)
}

/// Run `count` random-expression checks; returns the worst error seen.
pub fn run_expression_suite(base_seed: u64, count: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..count {
        worst = worst.max(check_expression(base_seed.wrapping_add(i as u64), 6)?);
    }
    Ok(worst)
}

/// End-to-end gradient check on a tiny pair classifier (vocab 20, embed 4,
/// hidden 5), dropout disabled. Deep composition accumulates more
/// finite-difference noise than single ops, hence the looser 1e-3 target
/// used by callers.
pub fn check_model(mode: crate::interaction::InteractionMode, seed: u64) -> Result<GradCheckReport> {
    use crate::model::{ModelConfig, PairClassifier};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = ModelConfig {
        vocab_size: 20,
        embed_dim: 4,
        hidden_dim: 5,
        mode,
        fc_layers: 4,
        dropout: 0.0,
        bidirectional_pair: true,
    };
    let model = PairClassifier::init(config, &mut rng)?;
    let q1: Vec<usize> = (0..3).map(|_| rng.gen_range(2..20)).collect();
    let q2: Vec<usize> = (0..3).map(|_| rng.gen_range(2..20)).collect();
    let label = 1usize;

    let forward = {
        let model = model.clone();
        let (q1, q2) = (q1.clone(), q2.clone());
        move || {
            let tape = Tape::new();
            let mut rng = ChaCha8Rng::seed_from_u64(0); // dropout off; rng unused
            let logits = model.forward_pair(&tape, &q1, &q2, false, &mut rng)?;
            Ok(tape.cross_entropy_logits(&logits, &[label])?.item())
        }
    };

    model.zero_grad();
    {
        let tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits = model.forward_pair(&tape, &q1, &q2, false, &mut rng)?;
        let loss = tape.cross_entropy_logits(&logits, &[label])?;
        tape.backward(&loss)?;
    }
    check_gradients(&model.params(), forward, DEFAULT_STEP)
}
