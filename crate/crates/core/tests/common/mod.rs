#![allow(dead_code)]

use protoner::encoder::{
    encode, encoder_backward, featurize, head_backward, head_logits, Encoder, EncoderConfig,
    EncoderParams, Head, HeadGrads, LabelSpace,
};
use protoner::gradcore::{finite_diff_check, DEFAULT_FD_STEP};
use protoner::losses::{hybrid_loss, HybridLossConfig, PhaseKind};
use protoner::protopool::PrototypePool;
use protoner::synthdocs::{BBox, Document, Token};
use protoner::KeyClass;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const OLD: KeyClass = KeyClass::PoNumber;
pub const NEW: KeyClass = KeyClass::Country;

pub fn random_doc(rng: &mut ChaCha8Rng, n: usize) -> Document {
    const WORDS: [&str; 8] = ["po", "total", "12345", "acme", "usd", "ship", "to", "main"];
    let labels = [OLD, NEW, KeyClass::Other];
    let tokens = (0..n)
        .map(|i| {
            let y = 20.0 * i as f64;
            Token {
                text: WORDS[rng.gen_range(0..WORDS.len())].to_string(),
                bbox: BBox::new(10.0, y, 60.0, y + 10.0),
                label: labels[rng.gen_range(0..labels.len())],
            }
        })
        .collect();
    Document {
        id: "grad".into(),
        template_id: 0,
        page_width: 612.0,
        page_height: 792.0,
        tokens,
    }
}

fn flatten(enc: &EncoderParams, head: &Head) -> Vec<f64> {
    enc.tensors()
        .into_iter()
        .chain(head.tensors())
        .flat_map(|t| t.iter().copied())
        .collect()
}

fn unflatten(flat: &[f64], enc: &mut EncoderParams, head: &mut Head) {
    let mut at = 0;
    for t in enc.tensors_mut().into_iter().chain(head.tensors_mut()) {
        t.copy_from_slice(&flat[at..at + t.len()]);
        at += t.len();
    }
}

/// Mean hybrid loss over all tokens of `doc`.
fn doc_loss(
    doc: &Document,
    enc: &Encoder,
    head: &Head,
    pool: &PrototypePool,
    space: &LabelSpace,
    cfg: &HybridLossConfig,
) -> f64 {
    let n = doc.tokens.len();
    (0..n)
        .map(|i| {
            let f = featurize(doc, i, enc).unwrap();
            let (h, _) = encode(&f.x, enc).unwrap();
            let logits = head_logits(&h, head).unwrap();
            hybrid_loss(&logits, doc.tokens[i].label, &h, pool, space, cfg)
                .unwrap()
                .total
        })
        .sum::<f64>()
        / n as f64
}

/// Max relative error between the analytic gradient of the mean hybrid loss
/// (every encoder, embedding and head parameter) and central differences.
pub fn hybrid_gradient_error(hidden: usize, n_protos: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc_cfg = EncoderConfig {
        embed_dim: 4,
        hidden_dim: hidden,
        context_window: 1,
        hash_buckets: 16,
        seed,
        ..EncoderConfig::default()
    };
    let mut enc = Encoder::new(enc_cfg.clone()).unwrap();
    let space = LabelSpace::base(&[OLD]).unwrap().extend(&[NEW]).unwrap();
    let mut head = Head::init(&space, hidden, seed + 1).unwrap();
    head.b
        .iter_mut()
        .for_each(|b| *b = rng.gen_range(-0.5..0.5));
    let mut pool = PrototypePool::new(&space, hidden, n_protos).unwrap();
    for _ in 0..n_protos {
        let v: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
        pool.harvest(OLD, &v, &mut rng).unwrap();
    }
    let mut doc = random_doc(&mut rng, 4);
    doc.tokens[0].label = OLD;
    let cfg = HybridLossConfig::new(vec![OLD], PhaseKind::Incremental).unwrap();

    let mut eg = EncoderParams::zeros(&enc_cfg);
    let mut hg = HeadGrads::zeros_like(&head);
    let n = doc.tokens.len();
    for i in 0..n {
        let f = featurize(&doc, i, &enc).unwrap();
        let (h, cache) = encode(&f.x, &enc).unwrap();
        let logits = head_logits(&h, &head).unwrap();
        let loss = hybrid_loss(&logits, doc.tokens[i].label, &h, &pool, &space, &cfg).unwrap();
        let mut gh = head_backward(&h, &head, &loss.grad_logits, &mut hg).unwrap();
        for (a, b) in gh.iter_mut().zip(&loss.grad_h) {
            *a += b;
        }
        encoder_backward(&f, &cache, &gh, &enc, &mut eg).unwrap();
    }
    eg.scale(1.0 / n as f64);
    hg.scale(1.0 / n as f64);
    let analytic: Vec<f64> = eg
        .tensors()
        .into_iter()
        .chain([hg.w.as_slice(), hg.b.as_slice()])
        .flat_map(|t| t.iter().copied())
        .collect();
    let point = flatten(&enc.params, &head);
    assert_eq!(point.len(), analytic.len());
    finite_diff_check(
        |x| {
            unflatten(x, &mut enc.params, &mut head);
            doc_loss(&doc, &enc, &head, &pool, &space, &cfg)
        },
        &point,
        &analytic,
        DEFAULT_FD_STEP,
    )
    .unwrap()
}

/// Independent k-NN: rank every prototype by a stable sort on similarity,
/// vote, then break ties by mean similarity and label-space position.
pub fn brute_force_knn(pool: &PrototypePool, h: &[f64], k: usize) -> KeyClass {
    let cos = |a: &[f64], b: &[f64]| {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        (d / (na * nb)).clamp(-1.0, 1.0)
    };
    let mut all: Vec<(f64, usize)> = Vec::new();
    for (si, slot) in pool.slots().iter().enumerate() {
        for p in &slot.prototypes {
            all.push((cos(h, &p.vector), si));
        }
    }
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    all.truncate(k);
    let mut best: Option<(usize, f64, usize)> = None;
    for si in 0..pool.slots().len() {
        let members: Vec<f64> = all.iter().filter(|x| x.1 == si).map(|x| x.0).collect();
        if members.is_empty() {
            continue;
        }
        let count = members.len();
        let mean = members.iter().sum::<f64>() / count as f64;
        let better = match best {
            None => true,
            Some((bc, bm, _)) => count > bc || (count == bc && mean > bm),
        };
        if better {
            best = Some((count, mean, si));
        }
    }
    pool.slots()[best.unwrap().2].class
}

/// A random pool over up to four classes with coarse integer vectors, so
/// exact similarity ties and vote ties both occur.
pub fn random_knn_instance(seed: u64) -> (PrototypePool, Vec<f64>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys = [KeyClass::PoNumber, KeyClass::Country, KeyClass::Currency];
    let space = LabelSpace::base(&keys).unwrap();
    let dim = rng.gen_range(2..5);
    let mut pool = PrototypePool::new(&space, dim, 20).unwrap();
    let coarse = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2..=2) as f64).collect();
            if v.iter().any(|&x| x != 0.0) {
                return v;
            }
        }
    };
    let n = rng.gen_range(1..30);
    for _ in 0..n {
        let class = space.classes()[rng.gen_range(0..space.len())];
        let v = coarse(&mut rng);
        pool.harvest(class, &v, &mut rng).unwrap();
    }
    let q = coarse(&mut rng);
    let k = rng.gen_range(1..9);
    (pool, q, k)
}
