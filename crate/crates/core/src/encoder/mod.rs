//! Token encoder: hashed word embeddings, a context-window mean and the
//! normalized box feed a two-layer MLP whose output is the last hidden layer
//! (LHL) vector. A linear head maps LHL vectors to class logits.

mod head;
mod labels;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::gradcore::{
    activation_apply, affine_apply, affine_backward_accumulate, Activation, Matrix,
};
use crate::synthdocs::Document;

pub use head::{head_backward, head_logits, reset_head, Head, HeadGrads};
pub use labels::LabelSpace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    /// Length of the LHL vector.
    pub hidden_dim: usize,
    /// Tokens on each side included in the context mean.
    pub context_window: usize,
    pub hash_buckets: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            hidden_dim: 64,
            context_window: 2,
            hash_buckets: 4096,
            activation: Activation::Tanh,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.hash_buckets == 0 {
            return Err(Error::Config(
                "embed_dim, hidden_dim and hash_buckets must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        2 * self.embed_dim + 4
    }
}

/// Encoder parameters. The same shape doubles as the gradient accumulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub embedding: Matrix,
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl EncoderParams {
    pub fn zeros(cfg: &EncoderConfig) -> Self {
        let (e, h, d) = (cfg.embed_dim, cfg.hidden_dim, cfg.feature_dim());
        Self {
            embedding: Matrix::zeros(cfg.hash_buckets, e),
            w1: Matrix::zeros(h, d),
            b1: vec![0.0; h],
            w2: Matrix::zeros(h, h),
            b2: vec![0.0; h],
        }
    }

    /// Embeddings uniform in [−1, 1], weights uniform in ±1/√fan_in, zero biases.
    pub fn init(cfg: &EncoderConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (e, h, d) = (cfg.embed_dim, cfg.hidden_dim, cfg.feature_dim());
        let embedding = Matrix::from_fn(cfg.hash_buckets, e, || rng.gen_range(-1.0..1.0));
        let s1 = 1.0 / (d as f64).sqrt();
        let w1 = Matrix::from_fn(h, d, || rng.gen_range(-s1..s1));
        let s2 = 1.0 / (h as f64).sqrt();
        let w2 = Matrix::from_fn(h, h, || rng.gen_range(-s2..s2));
        Self {
            embedding,
            w1,
            b1: vec![0.0; h],
            w2,
            b2: vec![0.0; h],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [
            self.embedding.as_slice(),
            self.w1.as_slice(),
            &self.b1,
            self.w2.as_slice(),
            &self.b2,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.embedding.as_mut_slice(),
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    fn check(&self, cfg: &EncoderConfig) -> Result<()> {
        let (e, h, d) = (cfg.embed_dim, cfg.hidden_dim, cfg.feature_dim());
        let shapes = [
            (&self.embedding, cfg.hash_buckets, e, "embedding"),
            (&self.w1, h, d, "w1"),
            (&self.w2, h, h, "w2"),
        ];
        for (m, r, c, name) in shapes {
            m.check_shape()?;
            if m.rows() != r || m.cols() != c {
                return dim_err(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    m.rows(),
                    m.cols()
                ));
            }
        }
        if self.b1.len() != h || self.b2.len() != h {
            return dim_err("bias length differs from hidden_dim");
        }
        if !self
            .tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
        {
            return Err(Error::Numerics("encoder parameters are not finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub params: EncoderParams,
}

impl Encoder {
    pub fn new(config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let params = EncoderParams::init(&config);
        Ok(Self { config, params })
    }

    pub fn from_parts(config: EncoderConfig, params: EncoderParams) -> Result<Self> {
        config.validate()?;
        params.check(&config)?;
        Ok(Self { config, params })
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden_dim
    }
}

/// 64-bit FNV-1a of the lowercased token text.
pub fn token_hash(text: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    text.to_lowercase()
        .bytes()
        .fold(OFFSET, |h, b| (h ^ b as u64).wrapping_mul(PRIME))
}

pub fn token_bucket(text: &str, buckets: usize) -> usize {
    (token_hash(text) % buckets as u64) as usize
}

/// Input vector of one token plus the embedding rows it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    pub x: Vec<f64>,
    pub self_row: usize,
    pub window_rows: Vec<usize>,
}

/// Embedding-bucket index of every token in `doc`.
pub fn doc_buckets(doc: &Document, buckets: usize) -> Vec<usize> {
    doc.tokens
        .iter()
        .map(|t| token_bucket(&t.text, buckets))
        .collect()
}

/// `[emb(token) ; mean emb(window) ; x0/W, y0/H, x1/W, y1/H]`.
pub fn featurize(doc: &Document, i: usize, enc: &Encoder) -> Result<Features> {
    let buckets = doc_buckets(doc, enc.config.hash_buckets);
    featurize_with(doc, &buckets, i, enc)
}

/// As [`featurize`], reusing precomputed [`doc_buckets`].
pub fn featurize_with(
    doc: &Document,
    buckets: &[usize],
    i: usize,
    enc: &Encoder,
) -> Result<Features> {
    let n = doc.tokens.len();
    if i >= n {
        return Err(Error::Index { index: i, len: n });
    }
    let cfg = &enc.config;
    let e = cfg.embed_dim;
    let emb = &enc.params.embedding;
    let lo = i.saturating_sub(cfg.context_window);
    let hi = (i + cfg.context_window).min(n - 1);
    let window_rows: Vec<usize> = buckets[lo..=hi].to_vec();

    let mut x = Vec::with_capacity(cfg.feature_dim());
    x.extend_from_slice(emb.row(buckets[i]));
    let mut mean = vec![0.0; e];
    for &r in &window_rows {
        for (m, v) in mean.iter_mut().zip(emb.row(r)) {
            *m += v;
        }
    }
    let inv = 1.0 / window_rows.len() as f64;
    x.extend(mean.iter().map(|m| m * inv));
    let b = doc.tokens[i].bbox;
    x.extend([
        b.x0 / doc.page_width,
        b.y0 / doc.page_height,
        b.x1 / doc.page_width,
        b.y1 / doc.page_height,
    ]);
    Ok(Features {
        x,
        self_row: buckets[i],
        window_rows,
    })
}

/// Intermediates kept for the backward pass.
#[derive(Clone, Debug)]
pub struct EncodeCache {
    a1: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

/// Runs the MLP; returns the LHL vector and the cache for [`encoder_backward`].
pub fn encode(x: &[f64], enc: &Encoder) -> Result<(Vec<f64>, EncodeCache)> {
    let p = &enc.params;
    if x.len() != enc.config.feature_dim() {
        return dim_err(format!(
            "features have length {}, encoder expects {}",
            x.len(),
            enc.config.feature_dim()
        ));
    }
    let z1 = affine_apply(x, &p.w1, &p.b1)?;
    let (a1, d1) = activation_apply(&z1, enc.config.activation);
    let z2 = affine_apply(&a1, &p.w2, &p.b2)?;
    let (h, d2) = activation_apply(&z2, enc.config.activation);
    Ok((h, EncodeCache { a1, d1, d2 }))
}

/// Accumulates the gradient of a scalar loss with respect to every encoder
/// parameter into `grads`, given `grad_h = ∂loss/∂h`.
pub fn encoder_backward(
    features: &Features,
    cache: &EncodeCache,
    grad_h: &[f64],
    enc: &Encoder,
    grads: &mut EncoderParams,
) -> Result<()> {
    let p = &enc.params;
    if grad_h.len() != enc.config.hidden_dim {
        return dim_err("grad_h length differs from hidden_dim");
    }
    let gz2: Vec<f64> = grad_h.iter().zip(&cache.d2).map(|(g, d)| g * d).collect();
    let ga1 = affine_backward_accumulate(&cache.a1, &p.w2, &gz2, &mut grads.w2, &mut grads.b2)?;
    let gz1: Vec<f64> = ga1.iter().zip(&cache.d1).map(|(g, d)| g * d).collect();
    let gx = affine_backward_accumulate(&features.x, &p.w1, &gz1, &mut grads.w1, &mut grads.b1)?;

    let e = enc.config.embed_dim;
    for (g, v) in grads
        .embedding
        .row_mut(features.self_row)
        .iter_mut()
        .zip(&gx[..e])
    {
        *g += v;
    }
    let inv = 1.0 / features.window_rows.len() as f64;
    for &r in &features.window_rows {
        for (g, v) in grads.embedding.row_mut(r).iter_mut().zip(&gx[e..2 * e]) {
            *g += v * inv;
        }
    }
    Ok(())
}
