use crate::numerics::tensor::{Real, Tensor};

#[inline]
pub fn sigmoid_scalar<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

pub fn tanh<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.tanh())
}

/// Gradient through a sigmoid given its output `y`.
pub fn sigmoid_backward<T: Real>(y: &Tensor<T>, grad: &Tensor<T>) -> Tensor<T> {
    let mut out = grad.clone();
    for (g, &y) in out.data_mut().iter_mut().zip(y.data()) {
        *g *= y * (T::one() - y);
    }
    out
}

/// Gradient through a tanh given its output `y`.
pub fn tanh_backward<T: Real>(y: &Tensor<T>, grad: &Tensor<T>) -> Tensor<T> {
    let mut out = grad.clone();
    for (g, &y) in out.data_mut().iter_mut().zip(y.data()) {
        *g *= T::one() - y * y;
    }
    out
}
