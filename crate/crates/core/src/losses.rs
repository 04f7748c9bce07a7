//! Hybrid loss: cross-entropy on every token plus, during incremental
//! training, the mean `1 − cos` distance between an old-class token's LHL
//! vector and that class's stored prototypes.

use serde::{Deserialize, Serialize};

use crate::encoder::LabelSpace;
use crate::error::{dim_err, Error, Result};
use crate::gradcore::{cosine_grad, softmax_cross_entropy};
use crate::protopool::PrototypePool;
use crate::synthdocs::KeyClass;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    Base,
    Incremental,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridLossConfig {
    /// Classes whose LHL vectors are held to their prototypes; never OTHER.
    pub old_classes: Vec<KeyClass>,
    pub phase: PhaseKind,
}

impl HybridLossConfig {
    pub fn new(old_classes: Vec<KeyClass>, phase: PhaseKind) -> Result<Self> {
        if old_classes.contains(&KeyClass::Other) {
            return Err(Error::Label("OTHER cannot be an old class".into()));
        }
        Ok(Self { old_classes, phase })
    }

    /// Cross-entropy only.
    pub fn base() -> Self {
        Self {
            old_classes: Vec::new(),
            phase: PhaseKind::Base,
        }
    }
}

/// `(1/|P|) Σ_p (1 − cos(h, p))` and its gradient with respect to `h`.
pub fn proto_cosine_loss(h: &[f64], protos: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
    if protos.is_empty() {
        return Err(Error::EmptyPool(
            "no prototypes for the retention term".into(),
        ));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; h.len()];
    for p in protos {
        if p.len() != h.len() {
            return dim_err(format!(
                "prototype length {} vs h length {}",
                p.len(),
                h.len()
            ));
        }
        let (cos, g) = cosine_grad(h, p)?;
        loss += 1.0 - cos;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc -= gi;
        }
    }
    let inv = 1.0 / protos.len() as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok(((loss * inv).clamp(0.0, 2.0), grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridLoss {
    pub total: f64,
    pub ce_part: f64,
    pub proto_part: f64,
    pub grad_logits: Vec<f64>,
    /// Gradient of the retention term with respect to `h` (zero when inactive).
    pub grad_h: Vec<f64>,
    /// Whether the retention term contributed.
    pub proto_applied: bool,
}

/// Loss for one token. `logits` are ordered as `space.classes()`.
pub fn hybrid_loss(
    logits: &[f64],
    gold: KeyClass,
    h: &[f64],
    pool: &PrototypePool,
    space: &LabelSpace,
    cfg: &HybridLossConfig,
) -> Result<HybridLoss> {
    let gold_idx = space
        .index_of(gold)
        .ok_or_else(|| Error::Label(format!("{gold} is not in the label space")))?;
    if logits.len() != space.len() {
        return dim_err(format!(
            "{} logits for {} classes",
            logits.len(),
            space.len()
        ));
    }
    let (ce_part, grad_logits) = softmax_cross_entropy(logits, gold_idx)?;

    let protos = if cfg.phase == PhaseKind::Incremental && cfg.old_classes.contains(&gold) {
        pool.class_prototypes(gold).unwrap_or_default()
    } else {
        Vec::new()
    };
    let (proto_part, grad_h, proto_applied) = if protos.is_empty() {
        (0.0, vec![0.0; h.len()], false)
    } else {
        let (l, g) = proto_cosine_loss(h, &protos)?;
        (l, g, true)
    };
    Ok(HybridLoss {
        total: ce_part + proto_part,
        ce_part,
        proto_part,
        grad_logits,
        grad_h,
        proto_applied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcore::{dot, finite_diff_check, DEFAULT_FD_STEP};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use KeyClass::{Country as New, Other, PoNumber as Old};

    fn setup() -> (LabelSpace, PrototypePool) {
        let space = LabelSpace::base(&[Old]).unwrap().extend(&[New]).unwrap();
        let mut pool = PrototypePool::new(&space, 3, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        pool.harvest(Old, &[1.0, 2.0, 3.0], &mut rng).unwrap();
        pool.harvest(Old, &[2.0, 4.0, 6.0], &mut rng).unwrap();
        (space, pool)
    }

    #[test]
    fn proto_loss_examples() {
        let p = [1.0, -2.0, 0.5];
        let (l, _) = proto_cosine_loss(&p, &[&p, &p]).unwrap();
        assert!(l.abs() < 1e-12);
        let (l, _) = proto_cosine_loss(&[1.0, 0.0], &[&[0.0, 1.0], &[0.0, -3.0]]).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
        let (l, _) = proto_cosine_loss(&[1.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        assert!((l - 0.5).abs() < 1e-15);
        assert!(matches!(
            proto_cosine_loss(&[1.0], &[]),
            Err(Error::EmptyPool(_))
        ));
        assert!(matches!(
            proto_cosine_loss(&[0.0, 0.0], &[&[1.0, 0.0]]),
            Err(Error::DegenerateVector { .. })
        ));
    }

    #[test]
    fn hybrid_phase_and_class_gates() {
        let (space, pool) = setup();
        let logits = [0.2, -0.1, 0.4];
        let h = [0.5, 0.1, -0.3];
        let inc = HybridLossConfig::new(vec![Old], PhaseKind::Incremental).unwrap();

        let base = hybrid_loss(&logits, Old, &h, &pool, &space, &HybridLossConfig::base()).unwrap();
        assert_eq!(base.proto_part, 0.0);
        assert!(!base.proto_applied);

        for gold in [New, Other] {
            let r = hybrid_loss(&logits, gold, &h, &pool, &space, &inc).unwrap();
            assert_eq!(r.total, r.ce_part);
            assert!(r.grad_h.iter().all(|&g| g == 0.0));
        }

        let r = hybrid_loss(&logits, Old, &[3.0, 6.0, 9.0], &pool, &space, &inc).unwrap();
        assert!(r.proto_applied);
        assert!(r.proto_part.abs() < 1e-12);
        assert!((r.total - r.ce_part).abs() < 1e-12);

        let r = hybrid_loss(&logits, Old, &h, &pool, &space, &inc).unwrap();
        assert!(r.proto_part > 0.0);
        assert_eq!(r.total, r.ce_part + r.proto_part);

        assert!(HybridLossConfig::new(vec![Other], PhaseKind::Incremental).is_err());
        assert!(matches!(
            hybrid_loss(&logits, KeyClass::Currency, &h, &pool, &space, &inc),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn old_class_without_prototypes_degrades_to_ce() {
        let space = LabelSpace::base(&[Old]).unwrap().extend(&[New]).unwrap();
        let pool = PrototypePool::new(&space, 3, 10).unwrap();
        let inc = HybridLossConfig::new(vec![Old], PhaseKind::Incremental).unwrap();
        let r = hybrid_loss(&[0.0; 3], Old, &[1.0, 0.0, 0.0], &pool, &space, &inc).unwrap();
        assert_eq!(r.total, r.ce_part);
    }

    #[test]
    fn proto_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..120 {
            let dim = rng.gen_range(2..12);
            let n = rng.gen_range(1..8);
            let h: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let protos: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let refs: Vec<&[f64]> = protos.iter().map(Vec::as_slice).collect();
            let (_, grad) = proto_cosine_loss(&h, &refs).unwrap();
            let err = finite_diff_check(
                |x| proto_cosine_loss(x, &refs).unwrap().0,
                &h,
                &grad,
                DEFAULT_FD_STEP,
            )
            .unwrap();
            assert!(err < 1e-6, "trial {trial}: {err}");
        }
    }

    proptest! {
        #[test]
        fn query_scale_invariance_and_radial_orthogonality(
            h in proptest::collection::vec(-3.0f64..3.0, 4),
            p in proptest::collection::vec(-3.0f64..3.0, 4),
            q in proptest::collection::vec(-3.0f64..3.0, 4),
            alpha in 0.01f64..100.0,
        ) {
            prop_assume!(crate::gradcore::norm(&h) > 1e-3);
            prop_assume!(crate::gradcore::norm(&p) > 1e-3 && crate::gradcore::norm(&q) > 1e-3);
            let refs: Vec<&[f64]> = vec![&p, &q];
            let (l, g) = proto_cosine_loss(&h, &refs).unwrap();
            let scaled: Vec<f64> = h.iter().map(|x| x * alpha).collect();
            let (ls, _) = proto_cosine_loss(&scaled, &refs).unwrap();
            prop_assert!((l - ls).abs() < 1e-12);
            prop_assert!(dot(&h, &g).abs() < 1e-9);
            prop_assert!((0.0..=2.0).contains(&l));
        }

        #[test]
        fn hybrid_total_nonnegative_and_ce_only_off_old(
            logits in proptest::collection::vec(-20.0f64..20.0, 3),
            h in proptest::collection::vec(-3.0f64..3.0, 3),
            gold_ix in 0usize..3,
            incremental in any::<bool>(),
        ) {
            prop_assume!(crate::gradcore::norm(&h) > 1e-3);
            let (space, pool) = setup();
            let gold = space.classes()[gold_ix];
            let phase = if incremental { PhaseKind::Incremental } else { PhaseKind::Base };
            let cfg = HybridLossConfig::new(vec![Old], phase).unwrap();
            let r = hybrid_loss(&logits, gold, &h, &pool, &space, &cfg).unwrap();
            prop_assert!(r.total >= 0.0);
            if gold != Old || !incremental {
                prop_assert_eq!(r.total, r.ce_part);
            }
        }
    }
}
