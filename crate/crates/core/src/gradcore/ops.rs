use serde::{Deserialize, Serialize};

use super::matrix::{dot, norm, Matrix};
use crate::error::{dim_err, Error, Result};

/// Norm below which a vector has no usable direction.
pub const NORM_EPS: f64 = 1e-12;

/// `y = W x + b`.
pub fn affine_apply(x: &[f64], w: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    check_affine(x, w, b.len())?;
    Ok((0..w.rows()).map(|r| dot(w.row(r), x) + b[r]).collect())
}

fn check_affine(x: &[f64], w: &Matrix, out_len: usize) -> Result<()> {
    if w.cols() != x.len() {
        return dim_err(format!("W has {} cols, x has length {}", w.cols(), x.len()));
    }
    if w.rows() != out_len {
        return dim_err(format!(
            "W has {} rows, output has length {out_len}",
            w.rows()
        ));
    }
    Ok(())
}

/// Gradients of an affine layer given the upstream gradient `grad_y`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineGrads {
    pub grad_x: Vec<f64>,
    pub grad_w: Matrix,
    pub grad_b: Vec<f64>,
}

pub fn affine_backward(x: &[f64], w: &Matrix, grad_y: &[f64]) -> Result<AffineGrads> {
    let mut grad_w = Matrix::zeros(w.rows(), w.cols());
    let mut grad_b = vec![0.0; w.rows()];
    let grad_x = affine_backward_accumulate(x, w, grad_y, &mut grad_w, &mut grad_b)?;
    Ok(AffineGrads {
        grad_x,
        grad_w,
        grad_b,
    })
}

/// Adds `grad_y xᵀ` into `grad_w` and `grad_y` into `grad_b`; returns `Wᵀ grad_y`.
pub fn affine_backward_accumulate(
    x: &[f64],
    w: &Matrix,
    grad_y: &[f64],
    grad_w: &mut Matrix,
    grad_b: &mut [f64],
) -> Result<Vec<f64>> {
    check_affine(x, w, grad_y.len())?;
    if grad_w.rows() != w.rows() || grad_w.cols() != w.cols() || grad_b.len() != w.rows() {
        return dim_err("gradient accumulators do not match W");
    }
    let mut grad_x = vec![0.0; x.len()];
    for (r, &gy) in grad_y.iter().enumerate() {
        if gy == 0.0 {
            continue;
        }
        grad_b[r] += gy;
        for ((gw, &xj), (gx, &wj)) in grad_w
            .row_mut(r)
            .iter_mut()
            .zip(x)
            .zip(grad_x.iter_mut().zip(w.row(r)))
        {
            *gw += gy * xj;
            *gx += gy * wj;
        }
    }
    Ok(grad_x)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    #[default]
    Tanh,
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Self::Relu),
            "tanh" => Ok(Self::Tanh),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

/// Elementwise activation; returns the outputs and their derivatives.
pub fn activation_apply(x: &[f64], kind: Activation) -> (Vec<f64>, Vec<f64>) {
    match kind {
        Activation::Relu => x
            .iter()
            .map(|&v| if v > 0.0 { (v, 1.0) } else { (0.0, 0.0) })
            .unzip(),
        Activation::Tanh => x
            .iter()
            .map(|&v| {
                let t = v.tanh();
                (t, 1.0 - t * t)
            })
            .unzip(),
    }
}

/// Returns `(−log softmax(logits)[gold], softmax(logits) − onehot(gold))`.
pub fn softmax_cross_entropy(logits: &[f64], gold: usize) -> Result<(f64, Vec<f64>)> {
    if gold >= logits.len() {
        return Err(Error::Label(format!(
            "gold index {gold} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = (sum.ln() - (logits[gold] - max)).max(0.0);
    let mut grad: Vec<f64> = exps.into_iter().map(|e| e / sum).collect();
    grad[gold] -= 1.0;
    Ok((loss, grad))
}

fn checked_norm(v: &[f64]) -> Result<f64> {
    let n = norm(v);
    if n.is_nan() || n <= NORM_EPS {
        return Err(Error::DegenerateVector {
            norm: n,
            eps: NORM_EPS,
        });
    }
    Ok(n)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return dim_err(format!("cosine of lengths {} and {}", a.len(), b.len()));
    }
    let na = checked_norm(a)?;
    let nb = checked_norm(b)?;
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `∇_a cos(a, b) = b / (‖a‖‖b‖) − cos(a, b) · a / ‖a‖²`, along with the
/// unclamped cosine.
pub fn cosine_grad(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>)> {
    if a.len() != b.len() {
        return dim_err(format!("cosine of lengths {} and {}", a.len(), b.len()));
    }
    let na = checked_norm(a)?;
    let nb = checked_norm(b)?;
    let cos = dot(a, b) / (na * nb);
    let grad = a
        .iter()
        .zip(b)
        .map(|(&ai, &bi)| bi / (na * nb) - cos * ai / (na * na))
        .collect();
    Ok((cos, grad))
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn affine_examples() {
        let y = affine_apply(&[1.0, 2.0], &Matrix::identity(2), &[0.0, 0.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0]);

        let w = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(
            affine_apply(&[1.0, 1.0], &w, &[0.0, 1.0]).unwrap(),
            vec![2.0, 5.0]
        );

        let w = Matrix::from_rows(&[vec![0.3, -7.0], vec![2.5, 9.0]]).unwrap();
        assert_eq!(
            affine_apply(&[0.0, 0.0], &w, &[3.0, 4.0]).unwrap(),
            vec![3.0, 4.0]
        );
    }

    #[test]
    fn affine_dimension_errors() {
        let w = Matrix::identity(2);
        assert!(matches!(
            affine_apply(&[1.0, 2.0, 3.0], &w, &[0.0, 0.0]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            affine_apply(&[1.0, 2.0], &w, &[0.0]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            affine_backward(&[1.0], &w, &[0.0, 0.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn affine_backward_examples() {
        let w = Matrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 3.0]]).unwrap();
        let g = affine_backward(&[1.0, 4.0], &w, &[0.0, 0.0]).unwrap();
        assert!(g.grad_x.iter().all(|&v| v == 0.0));
        assert!(g.grad_w.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.grad_b.iter().all(|&v| v == 0.0));

        let g = affine_backward(&[1.0, 0.0], &Matrix::identity(2), &[1.0, 0.0]).unwrap();
        assert_eq!(g.grad_x, vec![1.0, 0.0]);
        assert_eq!(g.grad_w.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(g.grad_b, vec![1.0, 0.0]);
    }

    #[test]
    fn activation_examples() {
        assert_eq!(
            activation_apply(&[-1.0, 2.0], Activation::Relu),
            (vec![0.0, 2.0], vec![0.0, 1.0])
        );
        assert_eq!(
            activation_apply(&[0.0], Activation::Tanh),
            (vec![0.0], vec![1.0])
        );
        let (y, d) = activation_apply(&[1e3], Activation::Tanh);
        assert_eq!(y, vec![1.0]);
        assert!(d[0].abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_examples() {
        let (loss, grad) = softmax_cross_entropy(&[0.0; 4], 2).unwrap();
        assert!(close(loss, 4f64.ln(), 1e-12));
        assert!(close(grad[2], -0.75, 1e-15));

        let (loss, _) = softmax_cross_entropy(&[100.0, 0.0], 0).unwrap();
        assert!((0.0..1e-40).contains(&loss));

        let (loss, _) = softmax_cross_entropy(&[1.0, 2.0, 3.0], 0).unwrap();
        assert!(close(loss, 2.40760596, 1e-8), "{loss}");

        assert!(matches!(
            softmax_cross_entropy(&[1.0, 2.0], 2),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn cross_entropy_survives_huge_logits() {
        let (loss, grad) = softmax_cross_entropy(&[1000.0, 0.0], 1).unwrap();
        assert!(close(loss, 1000.0, 1e-9), "{loss}");
        assert_eq!(grad, vec![1.0, -1.0]);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[2.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert!(close(
            cosine_similarity(&[1.0, 2.0], &[-1.0, -2.0]).unwrap(),
            -1.0,
            1e-15
        ));
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::DegenerateVector { .. })
        ));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(Error::Dimension(_))
        ));
    }
}
