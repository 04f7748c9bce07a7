//! Finite-difference check of the full training gradient on random models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoder::{doc_buckets, Encoder, EncoderConfig, Head, LabelSpace};
use crate::error::Result;
use crate::gradcore::{finite_diff_check, DEFAULT_FD_STEP};
use crate::losses::{HybridLossConfig, PhaseKind};
use crate::protopool::PrototypePool;
use crate::synthdocs::{BBox, Document, KeyClass, Token};
use crate::trainer::{token_backward, Gradients, LossContext};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub hidden_dim: usize,
    pub prototypes: usize,
    pub parameters: usize,
    /// Max of `|fd − analytic| / max(1, |fd|, |analytic|)`.
    pub max_rel_error: f64,
}

fn toy_document(rng: &mut ChaCha8Rng, n: usize) -> Document {
    const WORDS: [&str; 6] = ["order", "no", "4417", "acme", "eur", "total"];
    let labels = [KeyClass::PoNumber, KeyClass::Country, KeyClass::Other];
    let tokens = (0..n)
        .map(|i| {
            let x = 40.0 * i as f64;
            Token {
                text: WORDS[rng.gen_range(0..WORDS.len())].into(),
                bbox: BBox::new(x, 100.0, x + 30.0, 110.0),
                // the first token always carries the retention term
                label: if i == 0 {
                    labels[0]
                } else {
                    labels[rng.gen_range(0..3)]
                },
            }
        })
        .collect();
    Document {
        id: "gradcheck".into(),
        template_id: 0,
        page_width: 612.0,
        page_height: 792.0,
        tokens,
    }
}

/// Compares the mean per-token hybrid-loss gradient over a small random
/// document against central differences, for every encoder, embedding and
/// head parameter.
pub fn hybrid_gradient_check(hidden_dim: usize, prototypes: usize, seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = EncoderConfig {
        embed_dim: 4,
        hidden_dim,
        context_window: 1,
        hash_buckets: 16,
        seed,
        ..EncoderConfig::default()
    };
    let mut encoder = Encoder::new(cfg)?;
    let space = LabelSpace::base(&[KeyClass::PoNumber])?.extend(&[KeyClass::Country])?;
    let mut head = Head::init(&space, hidden_dim, seed ^ 1)?;
    let mut pool = PrototypePool::new(&space, hidden_dim, prototypes.max(1))?;
    for _ in 0..prototypes {
        let v: Vec<f64> = (0..hidden_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        pool.harvest(KeyClass::PoNumber, &v, &mut rng)?;
    }
    let loss_cfg = HybridLossConfig::new(vec![KeyClass::PoNumber], PhaseKind::Incremental)?;
    let doc = toy_document(&mut rng, 4);
    let buckets = doc_buckets(&doc, encoder.config.hash_buckets);
    let n = doc.tokens.len();

    let ctx = LossContext {
        pool: &pool,
        space: &space,
        config: &loss_cfg,
    };
    let mean_loss = |enc: &Encoder, head: &Head| -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(enc, head);
        let mut total = 0.0;
        for (i, t) in doc.tokens.iter().enumerate() {
            total += token_backward(&doc, &buckets, i, t.label, enc, head, &ctx, &mut grads)?.total;
        }
        grads.scale(1.0 / n as f64);
        Ok((total / n as f64, grads))
    };
    let (_, grads) = mean_loss(&encoder, &head)?;
    let analytic = grads.flatten();
    let point: Vec<f64> = encoder
        .params
        .tensors()
        .into_iter()
        .chain(head.tensors())
        .flat_map(|t| t.iter().copied())
        .collect();

    let mut failure = None;
    let err = finite_diff_check(
        |x| {
            let mut at = 0;
            for t in encoder
                .params
                .tensors_mut()
                .into_iter()
                .chain(head.tensors_mut())
            {
                t.copy_from_slice(&x[at..at + t.len()]);
                at += t.len();
            }
            match mean_loss(&encoder, &head) {
                Ok((l, _)) => l,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &point,
        &analytic,
        DEFAULT_FD_STEP,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(GradCheck {
        hidden_dim,
        prototypes,
        parameters: point.len(),
        max_rel_error: err?,
    })
}
