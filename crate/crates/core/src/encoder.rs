//! Light attentive-convolution pair encoder.
//!
//! For a pair of feature maps (S1, S2), every position i of S1 attends over
//! the states of S2 with dot-product energies, forms the aligned state
//! `h̃_i = Σ_j softmax(e_i)[j] · h_j^{S2}`, and convolves the window
//! `[h_{i-1}; h_i; h_{i+1}; h̃_i]` with `tanh(W · window + b)`. Max-pooling
//! over positions yields the pair vector. Boundary contexts are zero.
//!
//! Hidden states are the raw token embeddings. The encoder runs over S1, so
//! the pair vector is not symmetric in its arguments.

use rand::Rng;

use crate::data::Embeddings;
use crate::error::{Error, Result};
use crate::numcore::{Matrix, NodeId, Tape};

/// d×n matrix of hidden states, column i for token i.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    states: Matrix,
}

impl FeatureMap {
    pub fn new(states: Matrix) -> Result<Self> {
        if states.cols() == 0 {
            return Err(Error::Empty("feature map with no positions"));
        }
        Ok(FeatureMap { states })
    }

    pub fn dim(&self) -> usize {
        self.states.rows()
    }

    pub fn len(&self) -> usize {
        self.states.cols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn states(&self) -> &Matrix {
        &self.states
    }

    pub fn into_states(self) -> Matrix {
        self.states
    }
}

/// Embeds tokens through the frozen table; unknown tokens get their
/// hash-seeded vector.
pub fn embed_sequence<S: AsRef<str>>(tokens: &[S], table: &Embeddings) -> Result<FeatureMap> {
    FeatureMap::new(table.feature_map(tokens)?)
}

/// Raw matching energies and their row-wise softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights {
    pub scores: Matrix,
    pub weights: Matrix,
}

/// Convolution filter over a four-state window.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub w: Matrix,
    pub b: Matrix,
}

impl EncoderParams {
    pub fn new(w: Matrix, b: Matrix) -> Result<Self> {
        let d = w.rows();
        if w.shape() != (d, 4 * d) || b.shape() != (d, 1) {
            return Err(Error::Shape {
                op: "encoder params",
                left: w.shape(),
                right: b.shape(),
            });
        }
        Ok(EncoderParams { w, b })
    }

    pub fn zeros(d: usize) -> Self {
        EncoderParams {
            w: Matrix::zeros(d, 4 * d),
            b: Matrix::zeros(d, 1),
        }
    }

    /// Glorot-uniform filter, zero bias.
    pub fn random(d: usize, rng: &mut impl Rng) -> Self {
        EncoderParams {
            w: glorot(d, 4 * d, rng),
            b: Matrix::zeros(d, 1),
        }
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }
}

/// Plain convolution over `[h_{i-1}; h_i; h_{i+1}]` used by the attention-free
/// baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct CnnParams {
    pub w: Matrix,
    pub b: Matrix,
}

impl CnnParams {
    pub fn new(w: Matrix, b: Matrix) -> Result<Self> {
        let d = w.rows();
        if w.shape() != (d, 3 * d) || b.shape() != (d, 1) {
            return Err(Error::Shape {
                op: "cnn params",
                left: w.shape(),
                right: b.shape(),
            });
        }
        Ok(CnnParams { w, b })
    }

    pub fn random(d: usize, rng: &mut impl Rng) -> Self {
        CnnParams {
            w: glorot(d, 3 * d, rng),
            b: Matrix::zeros(d, 1),
        }
    }
}

pub(crate) fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-limit..=limit)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

/// Tape nodes for one filter's parameters.
#[derive(Clone, Copy, Debug)]
pub struct FilterNodes {
    pub w: NodeId,
    pub b: NodeId,
}

fn check_dims(tape: &Tape, a: NodeId, b: NodeId) -> Result<()> {
    let (av, bv) = (tape.value(a), tape.value(b));
    if av.rows() != bv.rows() {
        return Err(Error::Shape {
            op: "pair encoder dimensions",
            left: av.shape(),
            right: bv.shape(),
        });
    }
    Ok(())
}

/// Tape version of the attention step: returns (scores, weights, aligned)
/// where aligned is d×n1.
pub fn attend_on_tape(tape: &mut Tape, s1: NodeId, s2: NodeId) -> Result<(NodeId, NodeId, NodeId)> {
    check_dims(tape, s1, s2)?;
    let scores = tape.t_matmul(s1, s2)?;
    let weights = tape.softmax_rows(scores)?;
    let aligned = tape.matmul_t(s2, weights)?;
    Ok((scores, weights, aligned))
}

/// Zero-padded window stack `[h_{i-1}; h_i; h_{i+1}; extra...]`.
fn windows(tape: &mut Tape, s: NodeId, extra: Option<NodeId>) -> Result<NodeId> {
    let left = tape.shift_columns(s, -1)?;
    let right = tape.shift_columns(s, 1)?;
    match extra {
        Some(e) => tape.concat_rows(&[left, s, right, e]),
        None => tape.concat_rows(&[left, s, right]),
    }
}

fn filter(tape: &mut Tape, stacked: NodeId, f: FilterNodes) -> Result<NodeId> {
    let (w, x) = (tape.value(f.w), tape.value(stacked));
    if w.cols() != x.rows() {
        return Err(Error::Shape {
            op: "convolution filter",
            left: w.shape(),
            right: x.shape(),
        });
    }
    let pre = tape.matmul(f.w, stacked)?;
    let pre = tape.add_column(pre, f.b)?;
    tape.tanh(pre)
}

/// Column i = tanh(W·[h_{i-1}; h_i; h_{i+1}; aligned_i] + b).
pub fn attentive_convolve_on_tape(tape: &mut Tape, s1: NodeId, aligned: NodeId, f: FilterNodes) -> Result<NodeId> {
    let (sv, av) = (tape.value(s1), tape.value(aligned));
    if sv.shape() != av.shape() {
        return Err(Error::Shape {
            op: "attentive convolution",
            left: sv.shape(),
            right: av.shape(),
        });
    }
    let stacked = windows(tape, s1, Some(aligned))?;
    filter(tape, stacked, f)
}

/// Pair vector (d×1) for (S1, S2).
pub fn encode_pair_on_tape(tape: &mut Tape, s1: NodeId, s2: NodeId, f: FilterNodes) -> Result<NodeId> {
    let (_, _, aligned) = attend_on_tape(tape, s1, s2)?;
    let conv = attentive_convolve_on_tape(tape, s1, aligned, f)?;
    tape.max_pool_columns(conv)
}

/// Single-sequence vector (d×1) from a plain three-state convolution.
pub fn encode_cnn_on_tape(tape: &mut Tape, s: NodeId, f: FilterNodes) -> Result<NodeId> {
    let stacked = windows(tape, s, None)?;
    let conv = filter(tape, stacked, f)?;
    tape.max_pool_columns(conv)
}

fn encoder_leaves<'a>(tape: &mut Tape<'a>, params: &'a EncoderParams) -> Result<FilterNodes> {
    Ok(FilterNodes {
        w: tape.leaf_ref(&params.w)?,
        b: tape.leaf_ref(&params.b)?,
    })
}

pub fn match_scores(a: &FeatureMap, b: &FeatureMap) -> Result<AttentionWeights> {
    let mut tape = Tape::new();
    let s1 = tape.leaf_ref(a.states())?;
    let s2 = tape.leaf_ref(b.states())?;
    let (scores, weights, _) = attend_on_tape(&mut tape, s1, s2)?;
    Ok(AttentionWeights {
        scores: tape.value(scores).clone(),
        weights: tape.value(weights).clone(),
    })
}

/// Weighted average of the states of `b` (d×1).
pub fn align(b: &FeatureMap, weights: &[f64]) -> Result<Matrix> {
    if weights.len() != b.len() {
        return Err(Error::Shape {
            op: "align",
            left: b.states().shape(),
            right: (1, weights.len()),
        });
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Invalid(format!("alignment weights sum to {total}, expected 1")));
    }
    b.states().matmul(&Matrix::column(weights.to_vec()))
}

/// d×n1 output of the attentive convolution given precomputed aligned states.
pub fn attentive_convolve(a: &FeatureMap, aligned: &Matrix, params: &EncoderParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let s1 = tape.leaf_ref(a.states())?;
    let al = tape.leaf_ref(aligned)?;
    let f = encoder_leaves(&mut tape, params)?;
    let out = attentive_convolve_on_tape(&mut tape, s1, al, f)?;
    Ok(tape.value(out).clone())
}

pub fn encode_pair(s1: &FeatureMap, s2: &FeatureMap, params: &EncoderParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let a = tape.leaf_ref(s1.states())?;
    let b = tape.leaf_ref(s2.states())?;
    let f = encoder_leaves(&mut tape, params)?;
    let p = encode_pair_on_tape(&mut tape, a, b, f)?;
    Ok(tape.value(p).clone())
}

pub fn encode_cnn(s: &FeatureMap, params: &CnnParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let a = tape.leaf_ref(s.states())?;
    let f = FilterNodes {
        w: tape.leaf_ref(&params.w)?,
        b: tape.leaf_ref(&params.b)?,
    };
    let p = encode_cnn_on_tape(&mut tape, a, f)?;
    Ok(tape.value(p).clone())
}
