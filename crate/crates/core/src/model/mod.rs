//! Four-way pair model, its ablations, and the two baselines.
//!
//! The full model encodes (x, y), (x, d_y), (d_x, y) and (d_x, d_y) with the
//! attentive pair encoder and feeds the concatenation
//! `[p_ww; p_wd; p_dw; p_dd]` to a two-class logistic-regression head.

mod io;
mod train;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use io::{read_model, write_model, MAGIC};
pub use train::{train, EpochRecord, TrainConfig, TrainReport, Trainer};

use crate::data::{term_tokens, Embeddings, Instance, DEFAULT_MAX_DEFINITION_LEN};
use crate::encoder::{encode_cnn_on_tape, encode_pair_on_tape, glorot, CnnParams, EncoderParams, FilterNodes};
use crate::error::{Error, Result};
use crate::numcore::gradcheck::{self, CheckOutcome, Probe};
use crate::numcore::{softmax_row, Gradients, Matrix, NodeId, Tape, DEFAULT_EPSILON};

/// Floor applied to a probability before taking its log.
pub const PROB_FLOOR: f64 = 1e-12;
pub const DEFAULT_LEARNING_RATE: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Way {
    TermTerm,
    TermDef,
    DefTerm,
    DefDef,
}

impl Way {
    pub const ALL: [Way; 4] = [Way::TermTerm, Way::TermDef, Way::DefTerm, Way::DefDef];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["ww", "wd", "dw", "dd"][self.index()]
    }

    /// Indices into `[x, d_x, y, d_y]` of the (S1, S2) pair for this way.
    fn operands(self) -> (usize, usize) {
        match self {
            Way::TermTerm => (0, 2),
            Way::TermDef => (0, 3),
            Way::DefTerm => (1, 2),
            Way::DefDef => (1, 3),
        }
    }
}

/// Which of the four pair encodings feed the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AblationMask([bool; 4]);

impl Default for AblationMask {
    fn default() -> Self {
        AblationMask([true; 4])
    }
}

impl AblationMask {
    pub fn new(active: [bool; 4]) -> Result<Self> {
        if !active.iter().any(|&a| a) {
            return Err(Error::Invalid("ablation mask must keep at least one way".into()));
        }
        Ok(AblationMask(active))
    }

    /// Mask with a single way removed.
    pub fn without(way: Way) -> Self {
        let mut a = [true; 4];
        a[way.index()] = false;
        AblationMask(a)
    }

    pub fn is_active(&self, way: Way) -> bool {
        self.0[way.index()]
    }

    pub fn active_ways(&self) -> impl Iterator<Item = Way> + '_ {
        Way::ALL.into_iter().filter(|w| self.is_active(*w))
    }

    pub fn active_count(&self) -> usize {
        self.0.iter().filter(|&&a| a).count()
    }

    /// All 15 non-empty masks.
    pub fn all() -> Vec<AblationMask> {
        (1u8..16)
            .map(|bits| AblationMask([0, 1, 2, 3].map(|i| bits & (1 << i) != 0)))
            .collect()
    }
}

impl fmt::Display for AblationMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.active_ways().map(Way::name).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for AblationMask {
    type Err = Error;

    /// Accepts `ww,wd,dw,dd` style lists, `all`, or `-wd` style removals.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all" {
            return Ok(AblationMask::default());
        }
        let lookup = |name: &str| {
            Way::ALL
                .into_iter()
                .find(|w| w.name() == name)
                .ok_or_else(|| Error::Invalid(format!("unknown way {name:?} in mask {s:?}")))
        };
        if let Some(rest) = s.strip_prefix('-') {
            let mut active = [true; 4];
            for name in rest.split(',') {
                active[lookup(name.trim().trim_start_matches('-'))?.index()] = false;
            }
            return AblationMask::new(active);
        }
        let mut active = [false; 4];
        for name in s.split(',').filter(|n| !n.trim().is_empty()) {
            active[lookup(name.trim())?.index()] = true;
        }
        AblationMask::new(active)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Architecture {
    /// Four attentive pair encodings under an ablation mask.
    FourWay,
    /// Logistic regression over `[mean(x); mean(y)]`.
    NoDefinition,
    /// Logistic regression over `[mean(x); cnn(d_x); mean(y); cnn(d_y)]`.
    NoAttention,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::FourWay => "fourway",
            Architecture::NoDefinition => "no-definition",
            Architecture::NoAttention => "no-attention",
        })
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fourway" => Ok(Architecture::FourWay),
            "no-definition" => Ok(Architecture::NoDefinition),
            "no-attention" => Ok(Architecture::NoAttention),
            other => Err(Error::Invalid(format!("unknown architecture {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    pub architecture: Architecture,
    pub mask: AblationMask,
    /// One filter for all four ways instead of one per way.
    pub share_weights: bool,
    pub max_definition_len: usize,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(dim: usize) -> Self {
        ModelConfig {
            dim,
            architecture: Architecture::FourWay,
            mask: AblationMask::default(),
            share_weights: false,
            max_definition_len: DEFAULT_MAX_DEFINITION_LEN,
            learning_rate: DEFAULT_LEARNING_RATE,
            epsilon: DEFAULT_EPSILON,
            seed: 1,
        }
    }

    pub fn classifier_width(&self) -> usize {
        match self.architecture {
            Architecture::FourWay => self.dim * self.mask.active_count(),
            Architecture::NoDefinition => 2 * self.dim,
            Architecture::NoAttention => 4 * self.dim,
        }
    }
}

/// Every trainable tensor plus the decision threshold chosen on dev data.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub encoders: Vec<EncoderParams>,
    pub cnn: Option<CnnParams>,
    pub classifier_w: Matrix,
    pub classifier_b: Matrix,
    pub threshold: f64,
}

impl ModelParams {
    /// Seeded initialization: Glorot filters and classifier, zero biases.
    pub fn init(config: ModelConfig) -> Result<Self> {
        if config.dim == 0 {
            return Err(Error::Invalid("dimension must be positive".into()));
        }
        if config.max_definition_len == 0 {
            return Err(Error::Invalid("definition length cap must be positive".into()));
        }
        let d = config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (encoders, cnn) = match config.architecture {
            Architecture::FourWay => {
                let n = if config.share_weights { 1 } else { 4 };
                ((0..n).map(|_| EncoderParams::random(d, &mut rng)).collect(), None)
            }
            Architecture::NoDefinition => (Vec::new(), None),
            Architecture::NoAttention => (Vec::new(), Some(CnnParams::random(d, &mut rng))),
        };
        let width = config.classifier_width();
        Ok(ModelParams {
            classifier_w: glorot(2, width, &mut rng),
            classifier_b: Matrix::zeros(2, 1),
            encoders,
            cnn,
            config,
            threshold: 0.5,
        })
    }

    pub fn classifier_width(&self) -> usize {
        self.classifier_w.cols()
    }

    fn encoder_for(&self, way: Way) -> usize {
        if self.config.share_weights {
            0
        } else {
            way.index()
        }
    }

    /// Named trainable tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (i, e) in self.encoders.iter().enumerate() {
            out.push((format!("encoder{i}.w"), &e.w));
            out.push((format!("encoder{i}.b"), &e.b));
        }
        if let Some(c) = &self.cnn {
            out.push(("cnn.w".into(), &c.w));
            out.push(("cnn.b".into(), &c.b));
        }
        out.push(("classifier.w".into(), &self.classifier_w));
        out.push(("classifier.b".into(), &self.classifier_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for e in &mut self.encoders {
            out.push(&mut e.w);
            out.push(&mut e.b);
        }
        if let Some(c) = &mut self.cnn {
            out.push(&mut c.w);
            out.push(&mut c.b);
        }
        out.push(&mut self.classifier_w);
        out.push(&mut self.classifier_b);
        out
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.tensors().iter().map(|(_, m)| m.shape()).collect()
    }

    /// Copy with every trainable tensor replaced, in `tensors()` order.
    pub fn with_tensors(&self, values: &[Matrix]) -> Result<Self> {
        let mut out = self.clone();
        let slots = out.tensors_mut();
        if slots.len() != values.len() {
            return Err(Error::Invalid(format!("expected {} tensors, got {}", slots.len(), values.len())));
        }
        for (slot, v) in slots.into_iter().zip(values) {
            slot.check_same_shape(v, "with_tensors")?;
            *slot = v.clone();
        }
        Ok(out)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let d = self.config.dim;
        let expected_encoders = match self.config.architecture {
            Architecture::FourWay if self.config.share_weights => 1,
            Architecture::FourWay => 4,
            _ => 0,
        };
        if self.encoders.len() != expected_encoders {
            return Err(Error::Format(format!(
                "expected {expected_encoders} encoders, found {}",
                self.encoders.len()
            )));
        }
        for e in &self.encoders {
            EncoderParams::new(e.w.clone(), e.b.clone())?;
            if e.dim() != d {
                return Err(Error::Format(format!("encoder dimension {} != {d}", e.dim())));
            }
        }
        if (self.config.architecture == Architecture::NoAttention) != self.cnn.is_some() {
            return Err(Error::Format("cnn parameters do not match architecture".into()));
        }
        if self.classifier_w.shape() != (2, self.config.classifier_width()) || self.classifier_b.shape() != (2, 1) {
            return Err(Error::Shape {
                op: "classifier",
                left: self.classifier_w.shape(),
                right: (2, self.config.classifier_width()),
            });
        }
        Ok(())
    }
}

/// Term and definition token sequences of one (x, d_x; y, d_y) query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairInput {
    pub x: Vec<String>,
    pub dx: Vec<String>,
    pub y: Vec<String>,
    pub dy: Vec<String>,
}

impl PairInput {
    pub fn new(x: Vec<String>, dx: Vec<String>, y: Vec<String>, dy: Vec<String>) -> Self {
        PairInput { x, dx, y, dy }
    }

    pub fn from_instance(inst: &Instance) -> Self {
        PairInput {
            x: term_tokens(&inst.x),
            dx: inst.dx.clone(),
            y: term_tokens(&inst.y),
            dy: inst.dy.clone(),
        }
    }

    fn sequences(&self) -> [&[String]; 4] {
        [&self.x, &self.dx, &self.y, &self.dy]
    }
}

/// Per-way pair vectors and their masked concatenation.
#[derive(Clone, Debug, PartialEq)]
pub struct PairRepresentation {
    pub ways: [Option<Matrix>; 4],
    pub p: Matrix,
}

impl PairRepresentation {
    pub fn way(&self, way: Way) -> Option<&Matrix> {
        self.ways[way.index()].as_ref()
    }
}

/// Tape ids of every trainable tensor, in `ModelParams::tensors` order.
pub struct ParamNodes {
    pub all: Vec<NodeId>,
    encoders: Vec<FilterNodes>,
    cnn: Option<FilterNodes>,
    classifier_w: NodeId,
    classifier_b: NodeId,
}

pub fn register_params<'a>(tape: &mut Tape<'a>, params: &'a ModelParams) -> Result<ParamNodes> {
    let mut all = Vec::new();
    let mut filter = |tape: &mut Tape<'a>, w: &'a Matrix, b: &'a Matrix| -> Result<FilterNodes> {
        let f = FilterNodes {
            w: tape.leaf_ref(w)?,
            b: tape.leaf_ref(b)?,
        };
        all.extend([f.w, f.b]);
        Ok(f)
    };
    let encoders = params
        .encoders
        .iter()
        .map(|e| filter(tape, &e.w, &e.b))
        .collect::<Result<Vec<_>>>()?;
    let cnn = params.cnn.as_ref().map(|c| filter(tape, &c.w, &c.b)).transpose()?;
    let classifier_w = tape.leaf_ref(&params.classifier_w)?;
    let classifier_b = tape.leaf_ref(&params.classifier_b)?;
    all.extend([classifier_w, classifier_b]);
    Ok(ParamNodes {
        all,
        encoders,
        cnn,
        classifier_w,
        classifier_b,
    })
}

/// Builds the pair representation on a tape from the four sequence nodes
/// `[x, d_x, y, d_y]`. Returns the per-way nodes and the classifier input.
pub fn representation_on_tape(
    tape: &mut Tape,
    params: &ModelParams,
    nodes: &ParamNodes,
    seqs: [NodeId; 4],
) -> Result<([Option<NodeId>; 4], NodeId)> {
    let mut ways = [None; 4];
    let parts: Vec<NodeId> = match params.config.architecture {
        Architecture::FourWay => {
            for way in params.config.mask.active_ways() {
                let (a, b) = way.operands();
                let f = nodes.encoders[params.encoder_for(way)];
                ways[way.index()] = Some(encode_pair_on_tape(tape, seqs[a], seqs[b], f)?);
            }
            ways.iter().flatten().copied().collect()
        }
        Architecture::NoDefinition => vec![tape.mean_columns(seqs[0])?, tape.mean_columns(seqs[2])?],
        Architecture::NoAttention => {
            let f = nodes.cnn.ok_or_else(|| Error::Format("missing cnn parameters".into()))?;
            vec![
                tape.mean_columns(seqs[0])?,
                encode_cnn_on_tape(tape, seqs[1], f)?,
                tape.mean_columns(seqs[2])?,
                encode_cnn_on_tape(tape, seqs[3], f)?,
            ]
        }
    };
    let p = tape.concat_rows(&parts)?;
    Ok((ways, p))
}

/// Two-class probabilities (1×2) of the classifier applied to `p`.
pub fn probabilities_on_tape(tape: &mut Tape, nodes: &ParamNodes, p: NodeId) -> Result<NodeId> {
    let (w, x) = (tape.value(nodes.classifier_w), tape.value(p));
    if w.cols() != x.rows() {
        return Err(Error::Shape {
            op: "classifier input",
            left: w.shape(),
            right: x.shape(),
        });
    }
    let logits = tape.matmul(nodes.classifier_w, p)?;
    let logits = tape.add_column(logits, nodes.classifier_b)?;
    let row = tape.transpose(logits)?;
    tape.softmax_rows(row)
}

/// Probability of label 1 from a precomputed representation.
pub fn predict_proba(rep: &PairRepresentation, params: &ModelParams) -> Result<f64> {
    let w = &params.classifier_w;
    if w.cols() != rep.p.rows() || rep.p.cols() != 1 {
        return Err(Error::Shape {
            op: "predict_proba",
            left: w.shape(),
            right: rep.p.shape(),
        });
    }
    let logits = w.matmul(&rep.p)?.add(&params.classifier_b)?;
    Ok(softmax_row(logits.as_slice())?[1])
}

/// `-ln(max(prob, 1e-12))`.
pub fn loss_nll(prob: f64) -> f64 {
    -prob.max(PROB_FLOOR).ln()
}

/// Trained parameters bound to the frozen embedding table they expect.
#[derive(Clone, Debug)]
pub struct Model {
    params: ModelParams,
    embeddings: Arc<Embeddings>,
}

impl Model {
    pub fn new(params: ModelParams, embeddings: Arc<Embeddings>) -> Result<Self> {
        if embeddings.dim() != params.config.dim {
            return Err(Error::Invalid(format!(
                "embedding dimension {} does not match model dimension {}",
                embeddings.dim(),
                params.config.dim
            )));
        }
        params.validate()?;
        Ok(Model { params, embeddings })
    }

    pub fn init(config: ModelConfig, embeddings: Arc<Embeddings>) -> Result<Self> {
        Model::new(ModelParams::init(config)?, embeddings)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn embeddings(&self) -> &Arc<Embeddings> {
        &self.embeddings
    }

    pub fn config(&self) -> &ModelConfig {
        &self.params.config
    }

    fn sequence_leaves(&self, tape: &mut Tape, input: &PairInput) -> Result<[NodeId; 4]> {
        let cap = self.params.config.max_definition_len;
        let mut ids = Vec::with_capacity(4);
        for (i, seq) in input.sequences().into_iter().enumerate() {
            let seq = if i % 2 == 1 && seq.len() > cap { &seq[..cap] } else { seq };
            ids.push(tape.leaf(self.embeddings.feature_map(seq)?)?);
        }
        Ok([ids[0], ids[1], ids[2], ids[3]])
    }

    pub fn represent(&self, input: &PairInput) -> Result<PairRepresentation> {
        let mut tape = Tape::new();
        let nodes = register_params(&mut tape, &self.params)?;
        let seqs = self.sequence_leaves(&mut tape, input)?;
        let (ways, p) = representation_on_tape(&mut tape, &self.params, &nodes, seqs)?;
        Ok(PairRepresentation {
            ways: ways.map(|w| w.map(|id| tape.value(id).clone())),
            p: tape.value(p).clone(),
        })
    }

    /// Probability that y is a hypernym of x.
    pub fn predict(&self, input: &PairInput) -> Result<f64> {
        let mut tape = Tape::new();
        let nodes = register_params(&mut tape, &self.params)?;
        let seqs = self.sequence_leaves(&mut tape, input)?;
        let (_, p) = representation_on_tape(&mut tape, &self.params, &nodes, seqs)?;
        let probs = probabilities_on_tape(&mut tape, &nodes, p)?;
        Ok(tape.value(probs).get(0, 1))
    }

    pub fn predict_instance(&self, inst: &Instance) -> Result<f64> {
        self.predict(&PairInput::from_instance(inst))
    }

    /// NLL of the gold label and its gradient for every trainable tensor,
    /// in `ModelParams::tensors` order.
    pub fn loss_and_gradients(&self, input: &PairInput, label: bool) -> Result<(f64, Vec<Matrix>)> {
        let mut tape = Tape::new();
        let nodes = register_params(&mut tape, &self.params)?;
        let seqs = self.sequence_leaves(&mut tape, input)?;
        let (_, p) = representation_on_tape(&mut tape, &self.params, &nodes, seqs)?;
        let probs = probabilities_on_tape(&mut tape, &nodes, p)?;
        let loss = tape.neg_log_pick(probs, usize::from(label), PROB_FLOOR)?;
        let value = tape.value(loss).get(0, 0);
        let mut grads: Gradients = tape.backward(loss)?;
        Ok((value, nodes.all.iter().map(|&id| grads.take(id)).collect()))
    }

    /// Loss value and max-pool signature, without a backward pass.
    pub fn loss_probe(&self, input: &PairInput, label: bool) -> Result<(f64, Vec<usize>)> {
        let mut tape = Tape::new();
        let nodes = register_params(&mut tape, &self.params)?;
        let seqs = self.sequence_leaves(&mut tape, input)?;
        let (_, p) = representation_on_tape(&mut tape, &self.params, &nodes, seqs)?;
        let probs = probabilities_on_tape(&mut tape, &nodes, p)?;
        let loss = tape.neg_log_pick(probs, usize::from(label), PROB_FLOOR)?;
        Ok((tape.value(loss).get(0, 0), tape.pooling_signature()))
    }

    /// Finite-difference check of every trainable tensor's gradient on one
    /// labeled input.
    pub fn check_gradients(&self, input: &PairInput, label: bool, h: f64) -> Result<CheckOutcome> {
        let (_, analytic) = self.loss_and_gradients(input, label)?;
        let values: Vec<Matrix> = self.params.tensors().into_iter().map(|(_, m)| m.clone()).collect();
        gradcheck::check(&values, &analytic, h, |trial| {
            let probe = Model {
                params: self.params.with_tensors(trial)?,
                embeddings: Arc::clone(&self.embeddings),
            };
            let (value, signature) = probe.loss_probe(input, label)?;
            Ok(Probe { value, signature })
        })
    }
}

/// Full-model representation of (x, d_x; y, d_y).
pub fn forward_fourway(model: &Model, input: &PairInput) -> Result<PairRepresentation> {
    if model.config().architecture != Architecture::FourWay {
        return Err(Error::Invalid(format!("{} model has no four-way representation", model.config().architecture)));
    }
    model.represent(input)
}

pub fn baseline_no_definition(model: &Model, x: &[String], y: &[String]) -> Result<f64> {
    if model.config().architecture != Architecture::NoDefinition {
        return Err(Error::Invalid("model is not a no-definition baseline".into()));
    }
    // Definitions are not read by this architecture; pass the terms to keep
    // the shared input shape.
    model.predict(&PairInput::new(x.to_vec(), x.to_vec(), y.to_vec(), y.to_vec()))
}

pub fn baseline_no_attention(model: &Model, input: &PairInput) -> Result<f64> {
    if model.config().architecture != Architecture::NoAttention {
        return Err(Error::Invalid("model is not a no-attention baseline".into()));
    }
    model.predict(input)
}

#[cfg(test)]
mod tests;
