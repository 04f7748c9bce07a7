//! Two-phase training: base training with cross-entropy and last-epoch
//! prototype harvesting, then incremental training that carries old
//! prototypes forward unchanged, resets the head and applies the hybrid loss.

mod checkpoint;

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{
    doc_buckets, encode, encoder_backward, featurize_with, head_backward, head_logits, reset_head,
    Encoder, EncoderConfig, EncoderParams, Head, HeadGrads, LabelSpace,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gradcore::{adam_step, argmax, AdamState};
use crate::losses::{hybrid_loss, HybridLoss, HybridLossConfig, PhaseKind};
use crate::protopool::{KnnConfig, PrototypePool, DEFAULT_CAPACITY, DEFAULT_K};
use crate::synthdocs::{Document, KeyClass};

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};

pub const BASE_LR: f64 = 2e-5;
pub const INCREMENTAL_LR: f64 = 5e-6;
pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_BATCH_SIZE: usize = 8;
pub const DEFAULT_INCREMENTAL_DOCS: usize = 30;

const ORDER_STREAM: u64 = 1;
const HARVEST_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// Hybrid loss against carried-forward prototypes.
    Protoner,
    /// Plain cross-entropy fine-tuning; old prototypes are not kept.
    Naive,
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "protoner" => Ok(Self::Protoner),
            "naive" => Ok(Self::Naive),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Knn,
    Softmax,
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(Self::Knn),
            "softmax" => Ok(Self::Softmax),
            other => Err(Error::Config(format!("unknown head {other:?}"))),
        }
    }
}

impl std::fmt::Display for HeadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HeadKind::Knn => "knn",
            HeadKind::Softmax => "softmax",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Documents per optimizer step.
    pub batch_size: usize,
    pub prototypes_per_class: usize,
    pub knn_k: usize,
    pub seed: u64,
    pub mode: TrainMode,
}

impl TrainConfig {
    pub fn base() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            lr: BASE_LR,
            batch_size: DEFAULT_BATCH_SIZE,
            prototypes_per_class: DEFAULT_CAPACITY,
            knn_k: DEFAULT_K,
            seed: 0,
            mode: TrainMode::Protoner,
        }
    }

    pub fn incremental() -> Self {
        Self {
            lr: INCREMENTAL_LR,
            ..Self::base()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 || self.prototypes_per_class == 0 || self.knn_k == 0 {
            return Err(Error::Config(
                "batch_size, prototypes_per_class and knn_k must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn knn(&self) -> KnnConfig {
        KnnConfig { k: self.knn_k }
    }
}

/// Per-epoch training record. Losses are means over the epoch's tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_total: f64,
    pub mean_ce: f64,
    pub mean_proto: f64,
    pub tokens: usize,
    /// Tokens whose loss included the prototype term.
    pub proto_tokens: usize,
    /// Vectors offered to the pool after this epoch.
    pub harvest_calls: usize,
    /// Tokens of a harvested class skipped because the head misclassified them.
    pub harvest_rejected: usize,
}

/// LHL vector and head logits of one token.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenForward {
    pub h: Vec<f64>,
    pub logits: Vec<f64>,
}

pub fn forward_document(
    encoder: &Encoder,
    head: &Head,
    doc: &Document,
) -> Result<Vec<TokenForward>> {
    let buckets = doc_buckets(doc, encoder.config.hash_buckets);
    (0..doc.tokens.len())
        .map(|i| {
            let f = featurize_with(doc, &buckets, i, encoder)?;
            let (h, _) = encode(&f.x, encoder)?;
            let logits = head_logits(&h, head)?;
            Ok(TokenForward { h, logits })
        })
        .collect()
}

fn gold_indices(corpus: &[Document], space: &LabelSpace) -> Result<Vec<Vec<usize>>> {
    corpus
        .iter()
        .map(|d| {
            d.tokens
                .iter()
                .map(|t| {
                    space.index_of(t.label).ok_or_else(|| {
                        Error::Label(format!(
                            "document {} has label {} outside the label space",
                            d.id, t.label
                        ))
                    })
                })
                .collect()
        })
        .collect()
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn head_seed(seed: u64, phase: u32) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(phase as u64 + 1)
}

/// Gradient accumulators for every trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub encoder: EncoderParams,
    pub head: HeadGrads,
}

impl Gradients {
    pub fn zeros_like(encoder: &Encoder, head: &Head) -> Self {
        Self {
            encoder: EncoderParams::zeros(&encoder.config),
            head: HeadGrads::zeros_like(head),
        }
    }

    pub fn fill_zero(&mut self) {
        self.encoder.fill_zero();
        self.head.fill_zero();
    }

    pub fn scale(&mut self, s: f64) {
        self.encoder.scale(s);
        self.head.scale(s);
    }

    /// Encoder tensors followed by head weights and biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.encoder
            .tensors()
            .into_iter()
            .chain([self.head.w.as_slice(), self.head.b.as_slice()])
            .flat_map(|t| t.iter().copied())
            .collect()
    }
}

/// What the per-token loss needs besides the model.
pub struct LossContext<'a> {
    pub pool: &'a PrototypePool,
    pub space: &'a LabelSpace,
    pub config: &'a HybridLossConfig,
}

/// Forward and backward pass for token `i` of `doc`; parameter gradients are
/// added to `grads`.
#[allow(clippy::too_many_arguments)]
pub fn token_backward(
    doc: &Document,
    buckets: &[usize],
    i: usize,
    gold: KeyClass,
    encoder: &Encoder,
    head: &Head,
    ctx: &LossContext<'_>,
    grads: &mut Gradients,
) -> Result<HybridLoss> {
    let f = featurize_with(doc, buckets, i, encoder)?;
    let (h, cache) = encode(&f.x, encoder)?;
    let logits = head_logits(&h, head)?;
    let loss = hybrid_loss(&logits, gold, &h, ctx.pool, ctx.space, ctx.config)?;
    let mut gh = head_backward(&h, head, &loss.grad_logits, &mut grads.head)?;
    if loss.proto_applied {
        for (a, b) in gh.iter_mut().zip(&loss.grad_h) {
            *a += b;
        }
    }
    encoder_backward(&f, &cache, &gh, encoder, &mut grads.encoder)?;
    Ok(loss)
}

struct Optimizers {
    encoder: Vec<AdamState>,
    head: Vec<AdamState>,
}

impl Optimizers {
    fn new(enc: &Encoder, head: &Head) -> Self {
        Self {
            encoder: enc
                .params
                .tensors()
                .iter()
                .map(|t| AdamState::new(t.len()))
                .collect(),
            head: head
                .tensors()
                .iter()
                .map(|t| AdamState::new(t.len()))
                .collect(),
        }
    }

    fn step(
        &mut self,
        enc: &mut Encoder,
        head: &mut Head,
        grads: &Gradients,
        lr: f64,
    ) -> Result<()> {
        for ((p, g), s) in enc
            .params
            .tensors_mut()
            .into_iter()
            .zip(grads.encoder.tensors())
            .zip(&mut self.encoder)
        {
            adam_step(p, g, s, lr)?;
        }
        let hgs: [&[f64]; 2] = [grads.head.w.as_slice(), &grads.head.b];
        for ((p, g), s) in head.tensors_mut().into_iter().zip(hgs).zip(&mut self.head) {
            adam_step(p, g, s, lr)?;
        }
        Ok(())
    }
}

/// Runs the epoch loop, then the harvest pass with the final weights.
#[allow(clippy::too_many_arguments)]
fn run_phase(
    corpus: &[Document],
    space: &LabelSpace,
    encoder: &mut Encoder,
    head: &mut Head,
    pool: &mut PrototypePool,
    loss_cfg: &HybridLossConfig,
    harvest_classes: &[KeyClass],
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    let golds = gold_indices(corpus, space)?;
    let buckets: Vec<Vec<usize>> = corpus
        .iter()
        .map(|d| doc_buckets(d, encoder.config.hash_buckets))
        .collect();
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut order_rng = stream_rng(cfg.seed, ORDER_STREAM);
    let mut grads = Gradients::zeros_like(encoder, head);
    let mut opt = Optimizers::new(encoder, head);
    let ctx = LossContext {
        pool,
        space,
        config: loss_cfg,
    };
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut rec = EpochRecord {
            epoch,
            mean_total: 0.0,
            mean_ce: 0.0,
            mean_proto: 0.0,
            tokens: 0,
            proto_tokens: 0,
            harvest_calls: 0,
            harvest_rejected: 0,
        };
        for batch in order.chunks(cfg.batch_size) {
            grads.fill_zero();
            let mut n = 0usize;
            for &d in batch {
                let doc = &corpus[d];
                for (i, &gold_ix) in golds[d].iter().enumerate() {
                    let gold = space.classes()[gold_ix];
                    let loss =
                        token_backward(doc, &buckets[d], i, gold, encoder, head, &ctx, &mut grads)?;
                    if loss.proto_applied {
                        rec.proto_tokens += 1;
                    }
                    rec.mean_total += loss.total;
                    rec.mean_ce += loss.ce_part;
                    rec.mean_proto += loss.proto_part;
                    n += 1;
                }
            }
            if n == 0 {
                continue;
            }
            grads.scale(1.0 / n as f64);
            opt.step(encoder, head, &grads, cfg.lr)?;
            rec.tokens += n;
        }
        if rec.tokens > 0 {
            let inv = 1.0 / rec.tokens as f64;
            rec.mean_total *= inv;
            rec.mean_ce *= inv;
            rec.mean_proto *= inv;
        }
        if !rec.mean_total.is_finite() {
            return Err(Error::Numerics(format!("loss diverged in epoch {epoch}")));
        }
        trace.push(rec);
    }

    let mut rng = stream_rng(cfg.seed, HARVEST_STREAM);
    let last = trace.last_mut().expect("epochs ≥ 1");
    for (d, doc) in corpus.iter().enumerate() {
        for (i, fwd) in forward_document(encoder, head, doc)?
            .into_iter()
            .enumerate()
        {
            let gold_ix = golds[d][i];
            let gold = space.classes()[gold_ix];
            if !harvest_classes.contains(&gold) {
                continue;
            }
            if argmax(&fwd.logits) != gold_ix {
                last.harvest_rejected += 1;
                continue;
            }
            match pool.harvest(gold, &fwd.h, &mut rng) {
                Ok(()) => last.harvest_calls += 1,
                Err(Error::DegenerateVector { .. }) => {
                    log::warn!("skipping degenerate LHL vector in {} token {i}", doc.id)
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(trace)
}

/// Trains a fresh encoder on `base_classes` (plus OTHER) with cross-entropy
/// and harvests prototypes for every class after the last epoch.
pub fn train_base(
    corpus: &[Document],
    base_classes: &[KeyClass],
    encoder_cfg: &EncoderConfig,
    cfg: &TrainConfig,
) -> Result<Checkpoint> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::Config("training corpus is empty".into()));
    }
    let space = LabelSpace::base(base_classes)?;
    let mut encoder = Encoder::new(encoder_cfg.clone())?;
    let h = encoder.hidden_dim();
    let mut head = Head::init(&space, h, head_seed(cfg.seed, 0))?;
    let mut pool = PrototypePool::new(&space, h, cfg.prototypes_per_class)?;
    let trace = run_phase(
        corpus,
        &space,
        &mut encoder,
        &mut head,
        &mut pool,
        &HybridLossConfig::base(),
        space.classes(),
        cfg,
    )?;
    Ok(Checkpoint {
        label_space: space,
        encoder,
        head,
        pool,
        train_config: cfg.clone(),
        phase: PhaseKind::Base,
        seed: cfg.seed,
        loss_trace: trace,
    })
}

/// Adds `new_classes` to a trained model from a small corpus annotated for
/// old and new classes.
pub fn train_incremental(
    parent: &Checkpoint,
    corpus_small: &[Document],
    new_classes: &[KeyClass],
    cfg: &TrainConfig,
) -> Result<Checkpoint> {
    cfg.validate()?;
    parent.validate().map_err(|e| match e {
        Error::Dimension(m) => Error::Checkpoint(m),
        other => other,
    })?;
    if corpus_small.is_empty() {
        return Err(Error::Config("incremental corpus is empty".into()));
    }
    let space = parent.label_space.extend(new_classes)?;
    let old: Vec<KeyClass> = space.base_classes().to_vec();
    let mut pool = parent.pool.carry_forward(true).extend_to(&space)?;
    if pool.capacity_per_class() != cfg.prototypes_per_class {
        log::warn!(
            "keeping the parent's pool capacity {} (requested {})",
            pool.capacity_per_class(),
            cfg.prototypes_per_class
        );
    }
    let mut head = reset_head(&parent.head, &space, head_seed(cfg.seed, pool.phase()))?;
    let mut encoder = parent.encoder.clone();
    let loss_cfg = match cfg.mode {
        TrainMode::Protoner => HybridLossConfig::new(old.clone(), PhaseKind::Incremental)?,
        TrainMode::Naive => HybridLossConfig::new(Vec::new(), PhaseKind::Incremental)?,
    };
    if cfg.mode == TrainMode::Naive {
        for &k in &old {
            pool.clear_class(k)?;
        }
    }
    let harvest: Vec<KeyClass> = space
        .new_classes()
        .iter()
        .copied()
        .chain([KeyClass::Other])
        .collect();
    let trace = run_phase(
        corpus_small,
        &space,
        &mut encoder,
        &mut head,
        &mut pool,
        &loss_cfg,
        &harvest,
        cfg,
    )?;
    Ok(Checkpoint {
        label_space: space,
        encoder,
        head,
        pool,
        train_config: cfg.clone(),
        phase: PhaseKind::Incremental,
        seed: cfg.seed,
        loss_trace: trace,
    })
}

/// Per-token labels for `doc` from the prototype pool or the softmax head.
pub fn predict(ckpt: &Checkpoint, doc: &Document, head: HeadKind) -> Result<Vec<KeyClass>> {
    if head == HeadKind::Knn && ckpt.pool.is_empty() {
        return Err(Error::EmptyPool("checkpoint has no prototypes".into()));
    }
    let knn = ckpt.train_config.knn();
    forward_document(&ckpt.encoder, &ckpt.head, doc)?
        .into_iter()
        .map(|f| match head {
            HeadKind::Knn => Ok(ckpt.pool.knn_classify(&f.h, knn)?.0),
            HeadKind::Softmax => Ok(ckpt.label_space.classes()[argmax(&f.logits)]),
        })
        .collect()
}

pub fn predict_corpus(
    ckpt: &Checkpoint,
    docs: &[Document],
    head: HeadKind,
    exec: Execution,
) -> Result<Vec<Vec<KeyClass>>> {
    exec.map_slice(docs, |d| predict(ckpt, d, head))
        .into_iter()
        .collect()
}
