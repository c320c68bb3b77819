//! Attention, conflict, and combined interaction between two encoded
//! sequences.
//!
//! Attention scores similarity by a dot product of nonlinear projections;
//! conflict scores dissimilarity by a learned linear map of the
//! element-wise difference of the projections. Both normalize row-wise
//! with a masked softmax and take a weighted sum of the *original*
//! encoded states of `v`, which is then concatenated onto each word of
//! `u`. Combined mode runs both paths with independent projections
//! (a two-head layout) and concatenates all three parts.

use rand::Rng;

use crate::encoder::EncodedSequence;
use crate::error::{Error, Result};
use crate::{Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionMode {
    Attention,
    Conflict,
    Combined,
}

impl InteractionMode {
    /// Width of the fused output per word, as a multiple of the hidden dim.
    pub fn fused_multiplier(self) -> usize {
        match self {
            InteractionMode::Attention | InteractionMode::Conflict => 2,
            InteractionMode::Combined => 3,
        }
    }
}

impl std::str::FromStr for InteractionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "attention" => Ok(InteractionMode::Attention),
            "conflict" => Ok(InteractionMode::Conflict),
            "combined" => Ok(InteractionMode::Combined),
            other => Err(Error::Config(format!("unknown interaction mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for InteractionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            InteractionMode::Attention => "attention",
            InteractionMode::Conflict => "conflict",
            InteractionMode::Combined => "combined",
        };
        f.write_str(s)
    }
}

/// Projections of one scoring head: `W^u`, `W^v` (both `H×H`, no bias).
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    pub wu: Tensor,
    pub wv: Tensor,
}

impl ProjectionPair {
    pub fn init<R: Rng>(h: usize, rng: &mut R) -> Result<Self> {
        Ok(ProjectionPair {
            wu: uniform_mat(h, h, rng)?,
            wv: uniform_mat(h, h, rng)?,
        })
    }
}

fn uniform_mat<R: Rng>(r: usize, c: usize, rng: &mut R) -> Result<Tensor> {
    let bound = 1.0 / (c as f64).sqrt();
    let data = (0..r * c).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::param(&[r, c], data)
}

/// Learned parameters of the interaction layer. The combined layout owns
/// separate projections per head, mirroring multi-head attention where
/// each head projects independently.
#[derive(Debug, Clone)]
pub enum InteractionParams {
    Attention {
        attn: ProjectionPair,
    },
    Conflict {
        conflict: ProjectionPair,
        ws: Tensor,
    },
    Combined {
        attn: ProjectionPair,
        conflict: ProjectionPair,
        ws: Tensor,
    },
}

impl InteractionParams {
    pub fn init<R: Rng>(mode: InteractionMode, hidden_dim: usize, rng: &mut R) -> Result<Self> {
        match mode {
            InteractionMode::Attention => Ok(InteractionParams::Attention {
                attn: ProjectionPair::init(hidden_dim, rng)?,
            }),
            InteractionMode::Conflict => Ok(InteractionParams::Conflict {
                conflict: ProjectionPair::init(hidden_dim, rng)?,
                ws: uniform_mat(hidden_dim, 1, rng)?,
            }),
            InteractionMode::Combined => Ok(InteractionParams::Combined {
                attn: ProjectionPair::init(hidden_dim, rng)?,
                conflict: ProjectionPair::init(hidden_dim, rng)?,
                ws: uniform_mat(hidden_dim, 1, rng)?,
            }),
        }
    }

    pub fn mode(&self) -> InteractionMode {
        match self {
            InteractionParams::Attention { .. } => InteractionMode::Attention,
            InteractionParams::Conflict { .. } => InteractionMode::Conflict,
            InteractionParams::Combined { .. } => InteractionMode::Combined,
        }
    }

    pub fn params(&self, prefix: &str) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        match self {
            InteractionParams::Attention { attn } => {
                out.push((format!("{prefix}.attn.wu"), attn.wu.clone()));
                out.push((format!("{prefix}.attn.wv"), attn.wv.clone()));
            }
            InteractionParams::Conflict { conflict, ws } => {
                out.push((format!("{prefix}.conflict.wu"), conflict.wu.clone()));
                out.push((format!("{prefix}.conflict.wv"), conflict.wv.clone()));
                out.push((format!("{prefix}.conflict.ws"), ws.clone()));
            }
            InteractionParams::Combined { attn, conflict, ws } => {
                out.push((format!("{prefix}.attn.wu"), attn.wu.clone()));
                out.push((format!("{prefix}.attn.wv"), attn.wv.clone()));
                out.push((format!("{prefix}.conflict.wu"), conflict.wu.clone()));
                out.push((format!("{prefix}.conflict.wv"), conflict.wv.clone()));
                out.push((format!("{prefix}.conflict.ws"), ws.clone()));
            }
        }
        out
    }
}

/// Unnormalized `M×N` alignment or conflict scores.
#[derive(Debug, Clone)]
pub struct ScoreMatrix(pub Tensor);

/// Row-stochastic `M×N` weights; padded columns of `v` carry weight 0.
#[derive(Debug, Clone)]
pub struct WeightMatrix(pub Tensor);

/// Fused per-word representations plus the weight matrices behind them.
#[derive(Debug, Clone)]
pub struct InteractionOutput {
    /// `M×2H` in single modes, `M×3H` in combined mode; rows past the
    /// true length of `u` are zero.
    pub fused: Tensor,
    pub attn_weights: Option<WeightMatrix>,
    pub conflict_weights: Option<WeightMatrix>,
}

/// `tanh(states · W)` — the nonlinear projection of one sequence. Padded
/// rows stay zero because the states are zero and there is no bias.
pub fn project(tape: &Tape, seq: &EncodedSequence, w: &Tensor) -> Result<Tensor> {
    Ok(tape.tanh(&tape.matmul(&seq.states, w)?))
}

/// Dot-product alignment scores: `a_ij = uL_i · vL_j`, i.e. `uL · vLᵀ`.
pub fn attention_scores(tape: &Tape, u_lin: &Tensor, v_lin: &Tensor) -> Result<ScoreMatrix> {
    let vt = tape.transpose(v_lin)?;
    Ok(ScoreMatrix(tape.matmul(u_lin, &vt)?))
}

/// Conflict scores: `a_ij = (uL_i − vL_j) · Ws`. Computed as the outer
/// difference of the per-row projections `uL·Ws` and `vL·Ws`.
pub fn conflict_scores(
    tape: &Tape,
    u_lin: &Tensor,
    v_lin: &Tensor,
    ws: &Tensor,
) -> Result<ScoreMatrix> {
    let (_, hu) = u_lin.dims2();
    let (n, hv) = v_lin.dims2();
    if hu != hv {
        return Err(Error::Dimension {
            op: "conflict_scores",
            lhs: u_lin.shape().to_vec(),
            rhs: v_lin.shape().to_vec(),
        });
    }
    let su = tape.matmul(u_lin, ws)?; // M×1
    let sv = tape.matmul(v_lin, ws)?; // N×1
    let ones_row = Tensor::constant(&[1, n], vec![1.0; n])?;
    let tiled = tape.matmul(&su, &ones_row)?; // M×N of su_i
    let neg_sv_row = tape.scale(&tape.transpose(&sv)?, -1.0); // 1×N
    Ok(ScoreMatrix(tape.add_row(&tiled, &neg_sv_row)?))
}

/// Row-wise masked softmax over the first `valid_cols` columns of `v`;
/// padded columns come out exactly zero.
pub fn normalize(tape: &Tape, scores: &ScoreMatrix, valid_cols: usize) -> Result<WeightMatrix> {
    Ok(WeightMatrix(
        tape.softmax_rows_masked(&scores.0, valid_cols)?,
    ))
}

/// `w · v_states`: each output row is the weight-mixed summary of the
/// original (unprojected) encoded states of `v`.
pub fn weighted_sum(tape: &Tape, weights: &WeightMatrix, v_states: &Tensor) -> Result<Tensor> {
    tape.matmul(&weights.0, v_states)
}

fn head(
    tape: &Tape,
    u: &EncodedSequence,
    v: &EncodedSequence,
    pair: &ProjectionPair,
    ws: Option<&Tensor>,
) -> Result<(WeightMatrix, Tensor)> {
    let u_lin = project(tape, u, &pair.wu)?;
    let v_lin = project(tape, v, &pair.wv)?;
    let scores = match ws {
        None => attention_scores(tape, &u_lin, &v_lin)?,
        Some(ws) => conflict_scores(tape, &u_lin, &v_lin, ws)?,
    };
    let weights = normalize(tape, &scores, v.length)?;
    let summary = weighted_sum(tape, &weights, &v.states)?;
    Ok((weights, summary))
}

/// Fuse `u` with weighted summaries of `v` per the configured mode.
pub fn interact(
    tape: &Tape,
    u: &EncodedSequence,
    v: &EncodedSequence,
    params: &InteractionParams,
) -> Result<InteractionOutput> {
    if u.hidden_dim() != v.hidden_dim() {
        return Err(Error::Dimension {
            op: "interact",
            lhs: u.states.shape().to_vec(),
            rhs: v.states.shape().to_vec(),
        });
    }
    let (attn_weights, conflict_weights, fused) = match params {
        InteractionParams::Attention { attn } => {
            let (w, summary) = head(tape, u, v, attn, None)?;
            let fused = tape.concat(&[u.states.clone(), summary], 1)?;
            (Some(w), None, fused)
        }
        InteractionParams::Conflict { conflict, ws } => {
            let (w, summary) = head(tape, u, v, conflict, Some(ws))?;
            let fused = tape.concat(&[u.states.clone(), summary], 1)?;
            (None, Some(w), fused)
        }
        InteractionParams::Combined { attn, conflict, ws } => {
            let (wa, sa) = head(tape, u, v, attn, None)?;
            let (wc, sc) = head(tape, u, v, conflict, Some(ws))?;
            let fused = tape.concat(&[u.states.clone(), sa, sc], 1)?;
            (Some(wa), Some(wc), fused)
        }
    };
    let fused = tape.mask_rows(&fused, u.length)?;
    Ok(InteractionOutput {
        fused,
        attn_weights,
        conflict_weights,
    })
}

/// One row of the softmax-floor demonstration: however dissimilar the
/// sequences, some weight in each row is at least `1/N`.
#[derive(Debug, Clone)]
pub struct FloorRow {
    pub max_weight: f64,
    pub floor: f64,
    pub margin: f64,
}

/// Normalize `scores` and report, per row, the max weight against the
/// `1/N` floor over valid columns.
pub fn attention_floor_report(scores: &ScoreMatrix, valid_cols: usize) -> Result<Vec<FloorRow>> {
    let tape = Tape::new();
    let weights = normalize(&tape, scores, valid_cols)?;
    let (m, n) = weights.0.dims2();
    let floor = 1.0 / valid_cols as f64;
    let wd = weights.0.data();
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let max_weight = wd[i * n..i * n + valid_cols]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        debug_assert!(max_weight >= floor - 1e-12);
        rows.push(FloorRow {
            max_weight,
            floor,
            margin: max_weight - floor,
        });
    }
    Ok(rows)
}
