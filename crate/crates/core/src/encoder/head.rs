use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabelSpace;
use crate::error::{dim_err, Error, Result};
use crate::gradcore::{affine_apply, affine_backward_accumulate, Matrix};
use crate::synthdocs::KeyClass;

/// Linear classification head over LHL vectors; row `i` scores `classes[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub classes: Vec<KeyClass>,
    pub w: Matrix,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadGrads {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl HeadGrads {
    pub fn zeros_like(head: &Head) -> Self {
        Self {
            w: Matrix::zeros(head.w.rows(), head.w.cols()),
            b: vec![0.0; head.b.len()],
        }
    }

    pub fn fill_zero(&mut self) {
        self.w.fill(0.0);
        self.b.iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn scale(&mut self, s: f64) {
        self.w.as_mut_slice().iter_mut().for_each(|x| *x *= s);
        self.b.iter_mut().for_each(|x| *x *= s);
    }
}

impl Head {
    /// Weights uniform in ±1/√H from `seed`, zero biases.
    pub fn init(space: &LabelSpace, hidden_dim: usize, seed: u64) -> Result<Self> {
        if hidden_dim == 0 {
            return dim_err("head needs hidden_dim ≥ 1");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = 1.0 / (hidden_dim as f64).sqrt();
        Ok(Self {
            classes: space.classes().to_vec(),
            w: Matrix::from_fn(space.len(), hidden_dim, || rng.gen_range(-s..s)),
            b: vec![0.0; space.len()],
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn tensors(&self) -> [&[f64]; 2] {
        [self.w.as_slice(), &self.b]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 2] {
        [self.w.as_mut_slice(), &mut self.b]
    }

    pub(crate) fn check(&self, space: &LabelSpace, hidden_dim: usize) -> Result<()> {
        self.w.check_shape()?;
        if self.classes != space.classes() {
            return Err(Error::Checkpoint(
                "head class order differs from the label space".into(),
            ));
        }
        if self.w.rows() != space.len() || self.b.len() != space.len() {
            return dim_err(format!(
                "head has {} rows / {} biases for {} classes",
                self.w.rows(),
                self.b.len(),
                space.len()
            ));
        }
        if self.w.cols() != hidden_dim {
            return dim_err(format!(
                "head expects H={}, encoder has H={hidden_dim}",
                self.w.cols()
            ));
        }
        Ok(())
    }
}

pub fn head_logits(h: &[f64], head: &Head) -> Result<Vec<f64>> {
    affine_apply(h, &head.w, &head.b)
}

/// Accumulates head gradients; returns `∂loss/∂h`.
pub fn head_backward(
    h: &[f64],
    head: &Head,
    grad_logits: &[f64],
    grads: &mut HeadGrads,
) -> Result<Vec<f64>> {
    affine_backward_accumulate(h, &head.w, grad_logits, &mut grads.w, &mut grads.b)
}

/// Fresh head sized to `new_space`; nothing is copied from `old` but its
/// hidden dimension.
pub fn reset_head(old: &Head, new_space: &LabelSpace, seed: u64) -> Result<Head> {
    if old.w.cols() == 0 || old.b.len() != old.w.rows() {
        return dim_err("old head is malformed");
    }
    if let Some(k) = old.classes.iter().find(|k| !new_space.contains(**k)) {
        return Err(Error::Label(format!(
            "{k} missing from the new label space"
        )));
    }
    Head::init(new_space, old.hidden_dim(), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use KeyClass::*;

    #[test]
    fn zero_weights_give_biases() {
        let space = LabelSpace::base(&[PoNumber, Country]).unwrap();
        let mut head = Head::init(&space, 4, 1).unwrap();
        head.w.fill(0.0);
        head.b = vec![1.0, 2.0, 3.0];
        assert_eq!(
            head_logits(&[0.5, -1.0, 2.0, 9.0], &head).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert!(matches!(
            head_logits(&[1.0], &head),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn single_class_head() {
        let space = LabelSpace::base(&[]).unwrap();
        let head = Head::init(&space, 3, 1).unwrap();
        assert_eq!(head_logits(&[1.0, 2.0, 3.0], &head).unwrap().len(), 1);
    }

    #[test]
    fn logits_match_direct_evaluation() {
        let space = LabelSpace::base(&[PoNumber, Currency, Country]).unwrap();
        let mut head = Head::init(&space, 6, 99).unwrap();
        head.b = vec![0.1, -0.2, 0.3, 0.05];
        let h = [0.3, -1.2, 0.8, 0.0, 2.5, -0.4];
        let got = head_logits(&h, &head).unwrap();
        for (r, g) in got.iter().enumerate() {
            let want = head.b[r] + (0..6).map(|c| head.w.get(r, c) * h[c]).sum::<f64>();
            assert!((g - want).abs() < 1e-14);
        }
    }

    #[test]
    fn reset_examples() {
        let base = LabelSpace::base(&[
            PoNumber,
            LogoCustomerName,
            ShipToAddress,
            ShipToCustomerName,
        ])
        .unwrap();
        let head = Head::init(&base, 8, 1).unwrap();
        let same = reset_head(&head, &base, 2).unwrap();
        assert_ne!(same, head);
        assert_eq!((same.w.rows(), same.w.cols()), (5, 8));

        let full = base
            .extend(&[
                PoAmount,
                CustomerName,
                Country,
                Currency,
                BillToAddress,
                BillToCustomerName,
            ])
            .unwrap();
        let grown = reset_head(&head, &full, 3).unwrap();
        assert_eq!(grown.w.rows(), 11);
        assert_eq!(grown, reset_head(&head, &full, 3).unwrap());

        let other = LabelSpace::base(&[Country]).unwrap();
        assert!(matches!(reset_head(&head, &other, 3), Err(Error::Label(_))));
    }
}
