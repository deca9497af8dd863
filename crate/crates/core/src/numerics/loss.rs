use crate::error::{Error, Result};
use crate::numerics::tensor::{Real, Tensor};

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mse_loss",
            format!("pred {:?} vs target {:?}", pred.shape(), target.shape()),
        ));
    }
    let n = T::of_f64(pred.len() as f64);
    let two = T::of_f64(2.0);
    let mut grad = Tensor::zeros(pred.shape());
    let mut sum = T::zero();
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        sum += d * d;
        *g = two * d / n;
    }
    Ok((sum / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_inputs_have_zero_loss() {
        let a = Tensor::new(vec![3], vec![0.1f32, 0.5, 0.9]).unwrap();
        let (l, g) = mse_loss(&a, &a).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_arithmetic() {
        let p = Tensor::new(vec![2], vec![1.0f32, 1.0]).unwrap();
        let t = Tensor::zeros(&[2]);
        let (l, g) = mse_loss(&p, &t).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g.data(), &[1.0, 1.0]);
    }

    #[test]
    fn shape_mismatch() {
        let p = Tensor::<f32>::zeros(&[2]);
        let t = Tensor::zeros(&[3]);
        assert!(mse_loss(&p, &t).is_err());
    }
}
