//! Convolutional LSTM cell.
//!
//! Gate pre-activations are `W_x ∗ x + W_h ∗ h + b` with "same" padding and
//! stride 1. The four gates are stacked along the output-channel axis in the
//! order input, forget, output, candidate:
//!
//! ```text
//! i = σ(a_i)   f = σ(a_f)   o = σ(a_o)   g = tanh(a_g)
//! c_t = f ⊙ c_prev + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```

use crate::error::{Error, Result};
use crate::numerics::activation::sigmoid_scalar;
use crate::numerics::conv::{bias_grad_into, conv2d_accumulate, conv2d_backward_into, ConvSpec};
use crate::numerics::tensor::{dims3, expect_shape, Real, Tensor};

/// Number of stacked gates.
pub const GATES: usize = 4;
pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_OUTPUT: usize = 2;
pub const GATE_CANDIDATE: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLstmParams<T = f32> {
    /// `[4·hidden, in, k, k]`
    pub w_x: Tensor<T>,
    /// `[4·hidden, hidden, k, k]`
    pub w_h: Tensor<T>,
    /// `[4·hidden]`
    pub bias: Tensor<T>,
}

impl<T: Real> ConvLstmParams<T> {
    pub fn zeros(in_channels: usize, hidden: usize, kernel: usize) -> Self {
        ConvLstmParams {
            w_x: Tensor::zeros(&[GATES * hidden, in_channels, kernel, kernel]),
            w_h: Tensor::zeros(&[GATES * hidden, hidden, kernel, kernel]),
            bias: Tensor::zeros(&[GATES * hidden]),
        }
    }

    pub fn view(&self) -> ConvLstmWeights<'_, T> {
        ConvLstmWeights {
            w_x: &self.w_x,
            w_h: &self.w_h,
            bias: &self.bias,
        }
    }
}

/// Borrowed cell weights, so callers holding parameters in flat storage need
/// not copy them.
#[derive(Clone, Copy, Debug)]
pub struct ConvLstmWeights<'a, T = f32> {
    pub w_x: &'a Tensor<T>,
    pub w_h: &'a Tensor<T>,
    pub bias: &'a Tensor<T>,
}

impl<'a, T: Real> ConvLstmWeights<'a, T> {
    pub fn hidden_channels(&self) -> usize {
        self.w_x.shape()[0] / GATES
    }

    pub fn input_channels(&self) -> usize {
        self.w_x.shape()[1]
    }

    pub fn kernel_size(&self) -> usize {
        self.w_x.shape()[2]
    }

    fn validate(&self) -> Result<()> {
        let op = "convlstm";
        if self.w_x.ndim() != 4 || !self.w_x.shape()[0].is_multiple_of(GATES) {
            return Err(Error::shape(
                op,
                format!("w_x shape {:?} is not [4·hidden, in, k, k]", self.w_x.shape()),
            ));
        }
        let (hc, ci, k) = (self.hidden_channels(), self.input_channels(), self.kernel_size());
        if k % 2 == 0 {
            return Err(Error::InvalidArgument(format!("convlstm kernel must be odd, got {k}")));
        }
        expect_shape(self.w_x, &[GATES * hc, ci, k, k], op, "w_x")?;
        expect_shape(self.w_h, &[GATES * hc, hc, k, k], op, "w_h")?;
        expect_shape(self.bias, &[GATES * hc], op, "bias")
    }

    fn x_spec(&self) -> ConvSpec {
        let k = self.kernel_size();
        ConvSpec::new(self.input_channels(), GATES * self.hidden_channels(), k, 1, k / 2)
    }

    fn h_spec(&self) -> ConvSpec {
        let k = self.kernel_size();
        let hc = self.hidden_channels();
        ConvSpec::new(hc, GATES * hc, k, 1, k / 2)
    }
}

/// Activations saved by the forward step for the backward pass.
#[derive(Clone, Debug)]
pub struct ConvLstmCache<T = f32> {
    x: Tensor<T>,
    h_prev: Tensor<T>,
    c_prev: Tensor<T>,
    /// Post-activation gate values, stacked i, f, o, g.
    gates: Tensor<T>,
    tanh_c: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct ConvLstmStep<T = f32> {
    pub h: Tensor<T>,
    pub c: Tensor<T>,
    pub cache: ConvLstmCache<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLstmGrads<T = f32> {
    pub x: Tensor<T>,
    pub h_prev: Tensor<T>,
    pub c_prev: Tensor<T>,
    pub params: ConvLstmParams<T>,
}

pub fn convlstm_cell_step<T: Real>(
    x: &Tensor<T>,
    h_prev: &Tensor<T>,
    c_prev: &Tensor<T>,
    params: ConvLstmWeights<'_, T>,
) -> Result<ConvLstmStep<T>> {
    params.validate()?;
    let op = "convlstm";
    let hc = params.hidden_channels();
    let (_, h, w) = dims3(x, op, "x")?;
    expect_shape(h_prev, &[hc, h, w], op, "h_prev")?;
    expect_shape(c_prev, &[hc, h, w], op, "c_prev")?;

    let plane = h * w;
    let mut pre = Tensor::zeros(&[GATES * hc, h, w]);
    for (ch, &b) in params.bias.data().iter().enumerate() {
        pre.data_mut()[ch * plane..(ch + 1) * plane].fill(b);
    }
    conv2d_accumulate(x, &params.x_spec(), params.w_x, &mut pre)?;
    conv2d_accumulate(h_prev, &params.h_spec(), params.w_h, &mut pre)?;

    let n = hc * plane;
    let mut gates = pre;
    {
        let g = gates.data_mut();
        for v in &mut g[..3 * n] {
            *v = sigmoid_scalar(*v);
        }
        for v in &mut g[3 * n..] {
            *v = v.tanh();
        }
    }
    let gd = gates.data();
    let (gi, gf, go, gg) = (&gd[..n], &gd[n..2 * n], &gd[2 * n..3 * n], &gd[3 * n..]);
    let mut c = Tensor::zeros(&[hc, h, w]);
    let mut tanh_c = Tensor::zeros(&[hc, h, w]);
    let mut h_t = Tensor::zeros(&[hc, h, w]);
    {
        let (cd, td, hd) = (c.data_mut(), tanh_c.data_mut(), h_t.data_mut());
        let cp = c_prev.data();
        for j in 0..n {
            cd[j] = gf[j] * cp[j] + gi[j] * gg[j];
            td[j] = cd[j].tanh();
            hd[j] = go[j] * td[j];
        }
    }
    Ok(ConvLstmStep {
        h: h_t,
        c,
        cache: ConvLstmCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            gates,
            tanh_c,
        },
    })
}

/// Backward through one cell step given upstream gradients on `h_t` and `c_t`.
pub fn convlstm_cell_backward<T: Real>(
    cache: &ConvLstmCache<T>,
    grad_h: &Tensor<T>,
    grad_c: &Tensor<T>,
    params: ConvLstmWeights<'_, T>,
) -> Result<ConvLstmGrads<T>> {
    params.validate()?;
    let op = "convlstm_backward";
    expect_shape(grad_h, cache.c_prev.shape(), op, "grad_h")?;
    expect_shape(grad_c, cache.c_prev.shape(), op, "grad_c")?;
    let n = cache.c_prev.len();
    let gd = cache.gates.data();
    let (gi, gf, go, gg) = (&gd[..n], &gd[n..2 * n], &gd[2 * n..3 * n], &gd[3 * n..]);
    let (dh, dc) = (grad_h.data(), grad_c.data());
    let tc = cache.tanh_c.data();
    let cp = cache.c_prev.data();

    let mut d_pre = Tensor::zeros(cache.gates.shape());
    let mut d_c_prev = Tensor::zeros(cache.c_prev.shape());
    {
        let dp = d_pre.data_mut();
        let dcp = d_c_prev.data_mut();
        let one = T::one();
        for j in 0..n {
            let d_o = dh[j] * tc[j];
            let d_ct = dc[j] + dh[j] * go[j] * (one - tc[j] * tc[j]);
            let d_i = d_ct * gg[j];
            let d_g = d_ct * gi[j];
            let d_f = d_ct * cp[j];
            dcp[j] = d_ct * gf[j];
            dp[j] = d_i * gi[j] * (one - gi[j]);
            dp[n + j] = d_f * gf[j] * (one - gf[j]);
            dp[2 * n + j] = d_o * go[j] * (one - go[j]);
            dp[3 * n + j] = d_g * (one - gg[j] * gg[j]);
        }
    }

    let mut grads = ConvLstmGrads {
        x: Tensor::zeros(cache.x.shape()),
        h_prev: Tensor::zeros(cache.h_prev.shape()),
        c_prev: d_c_prev,
        params: ConvLstmParams {
            w_x: Tensor::zeros(params.w_x.shape()),
            w_h: Tensor::zeros(params.w_h.shape()),
            bias: Tensor::zeros(params.bias.shape()),
        },
    };
    conv2d_backward_into(
        &d_pre,
        &cache.x,
        &params.x_spec(),
        params.w_x,
        &mut grads.x,
        &mut grads.params.w_x,
    )?;
    conv2d_backward_into(
        &d_pre,
        &cache.h_prev,
        &params.h_spec(),
        params.w_h,
        &mut grads.h_prev,
        &mut grads.params.w_h,
    )?;
    bias_grad_into(&d_pre, &mut grads.params.bias);
    Ok(grads)
}
