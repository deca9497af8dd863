//! Forward and backward passes of the spatiotemporal autoencoder.
//!
//! Per frame: the frame shifted by `-INPUT_CENTER`, `tanh(conv)` encoder
//! layers, then one step through each ConvLSTM layer (state carried across the
//! clip, zero at clip start), then `tanh(deconv)` decoder layers with a final
//! sigmoid.

use crate::error::{Error, Result};
use crate::model::config::Architecture;
use crate::numerics::activation::{sigmoid_backward, tanh_backward};
use crate::numerics::conv::{bias_grad_into, conv2d_backward_into, deconv2d_backward_into};
use crate::numerics::convlstm::{convlstm_cell_backward, convlstm_cell_step, ConvLstmCache, ConvLstmWeights};
use crate::numerics::tensor::{expect_shape, Real, Tensor};
use crate::numerics::{conv2d_forward, deconv2d_forward, mse_loss, sigmoid, tanh};

struct FrameTrace<T> {
    /// Input to each encoder layer; `enc_in[0]` is the frame itself.
    enc_in: Vec<Tensor<T>>,
    /// Activated encoder outputs.
    enc_out: Vec<Tensor<T>>,
    lstm: Vec<ConvLstmCache<T>>,
    /// Input to each decoder layer.
    dec_in: Vec<Tensor<T>>,
    /// Activated decoder outputs; the last is the reconstruction.
    dec_out: Vec<Tensor<T>>,
}

fn check_params<T: Real>(arch: &Architecture, params: &[Tensor<T>]) -> Result<()> {
    let layout = arch.param_layout();
    if layout.len() != params.len() {
        return Err(Error::shape(
            "autoencoder",
            format!("expected {} parameter tensors, got {}", layout.len(), params.len()),
        ));
    }
    for ((name, shape), p) in layout.iter().zip(params) {
        if p.shape() != shape.as_slice() {
            return Err(Error::Layer {
                layer: name.clone(),
                detail: format!("parameter shape {:?}, expected {shape:?}", p.shape()),
            });
        }
    }
    Ok(())
}

fn lstm_weights<'a, T: Real>(arch: &Architecture, params: &'a [Tensor<T>], l: usize) -> ConvLstmWeights<'a, T> {
    let b = arch.lstm_base() + 3 * l;
    ConvLstmWeights {
        w_x: &params[b],
        w_h: &params[b + 1],
        bias: &params[b + 2],
    }
}

/// Subtracted from every input pixel before the first encoder layer.
pub const INPUT_CENTER: f64 = 0.5;

fn frame_of<T: Real>(clip: &Tensor<T>, t: usize, h: usize, w: usize) -> Tensor<T> {
    let center = T::from(INPUT_CENTER).expect("representable constant");
    let data = clip.outer(t).iter().map(|&v| v - center).collect();
    Tensor::new(vec![1, h, w], data).expect("frame slice matches clip shape")
}

fn run<T: Real>(
    arch: &Architecture,
    params: &[Tensor<T>],
    clip: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<FrameTrace<T>>)> {
    check_params(arch, params)?;
    expect_shape(clip, &arch.clip_shape(), "autoencoder", "clip")?;
    let (fh, fw) = (arch.frame_height, arch.frame_width);
    let (lh, lw) = arch.latent;
    let dec_base = arch.decoder_base();
    let mut h_state: Vec<Tensor<T>> = arch.lstm.iter().map(|s| Tensor::zeros(&[s.hidden, lh, lw])).collect();
    let mut c_state = h_state.clone();
    let mut out = Tensor::zeros(&arch.clip_shape());
    let mut traces = Vec::with_capacity(arch.window);

    for t in 0..arch.window {
        let mut x = frame_of(clip, t, fh, fw);
        let mut enc_in = Vec::with_capacity(arch.encoder.len());
        let mut enc_out = Vec::with_capacity(arch.encoder.len());
        for (i, spec) in arch.encoder.iter().enumerate() {
            let y = tanh(&conv2d_forward(&x, spec, &params[2 * i], &params[2 * i + 1])?);
            enc_in.push(x);
            enc_out.push(y.clone());
            x = y;
        }
        let mut lstm = Vec::with_capacity(arch.lstm.len());
        for l in 0..arch.lstm.len() {
            let step = convlstm_cell_step(&x, &h_state[l], &c_state[l], lstm_weights(arch, params, l))?;
            x = step.h.clone();
            h_state[l] = step.h;
            c_state[l] = step.c;
            lstm.push(step.cache);
        }
        let mut dec_in = Vec::with_capacity(arch.decoder.len());
        let mut dec_out = Vec::with_capacity(arch.decoder.len());
        let last = arch.decoder.len() - 1;
        for (j, spec) in arch.decoder.iter().enumerate() {
            let pre = deconv2d_forward(&x, spec, &params[dec_base + 2 * j], &params[dec_base + 2 * j + 1])?;
            let y = if j == last { sigmoid(&pre) } else { tanh(&pre) };
            dec_in.push(x);
            dec_out.push(y.clone());
            x = y;
        }
        out.outer_mut(t).copy_from_slice(x.data());
        traces.push(FrameTrace {
            enc_in,
            enc_out,
            lstm,
            dec_in,
            dec_out,
        });
    }
    Ok((out, traces))
}

/// Reconstruction of a `[W, 1, H, W']` clip; every output lies in `[0, 1]`.
pub fn forward<T: Real>(arch: &Architecture, params: &[Tensor<T>], clip: &Tensor<T>) -> Result<Tensor<T>> {
    run(arch, params, clip).map(|(out, _)| out)
}

/// Gradients of a scalar loss with respect to every parameter, given the loss
/// gradient on the reconstruction.
fn backward<T: Real>(
    arch: &Architecture,
    params: &[Tensor<T>],
    traces: &[FrameTrace<T>],
    grad_out: &Tensor<T>,
) -> Result<Vec<Tensor<T>>> {
    let mut grads: Vec<Tensor<T>> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
    let (lh, lw) = arch.latent;
    let dec_base = arch.decoder_base();
    let n_lstm = arch.lstm.len();
    let mut dh_next: Vec<Tensor<T>> = arch.lstm.iter().map(|s| Tensor::zeros(&[s.hidden, lh, lw])).collect();
    let mut dc_next = dh_next.clone();
    let last = arch.decoder.len() - 1;

    for t in (0..arch.window).rev() {
        let tr = &traces[t];
        let mut g = Tensor::new(vec![1, arch.frame_height, arch.frame_width], grad_out.outer(t).to_vec())?;
        for j in (0..arch.decoder.len()).rev() {
            let pre_grad = if j == last {
                sigmoid_backward(&tr.dec_out[j], &g)
            } else {
                tanh_backward(&tr.dec_out[j], &g)
            };
            let mut g_in = Tensor::zeros(tr.dec_in[j].shape());
            let (wi, bi) = (dec_base + 2 * j, dec_base + 2 * j + 1);
            deconv2d_backward_into(
                &pre_grad,
                &tr.dec_in[j],
                &arch.decoder[j],
                &params[wi],
                &mut g_in,
                &mut grads[wi],
            )?;
            bias_grad_into(&pre_grad, &mut grads[bi]);
            g = g_in;
        }
        for l in (0..n_lstm).rev() {
            g.add_assign(&dh_next[l])?;
            let cell = convlstm_cell_backward(&tr.lstm[l], &g, &dc_next[l], lstm_weights(arch, params, l))?;
            let b = arch.lstm_base() + 3 * l;
            grads[b].add_assign(&cell.params.w_x)?;
            grads[b + 1].add_assign(&cell.params.w_h)?;
            grads[b + 2].add_assign(&cell.params.bias)?;
            dh_next[l] = cell.h_prev;
            dc_next[l] = cell.c_prev;
            g = cell.x;
        }
        for i in (0..arch.encoder.len()).rev() {
            let pre_grad = tanh_backward(&tr.enc_out[i], &g);
            let mut g_in = Tensor::zeros(tr.enc_in[i].shape());
            conv2d_backward_into(
                &pre_grad,
                &tr.enc_in[i],
                &arch.encoder[i],
                &params[2 * i],
                &mut g_in,
                &mut grads[2 * i],
            )?;
            bias_grad_into(&pre_grad, &mut grads[2 * i + 1]);
            g = g_in;
        }
    }
    Ok(grads)
}

/// Mean squared reconstruction error of `clip` against itself and the
/// gradient of that loss with respect to every parameter.
pub fn loss_and_grad<T: Real>(
    arch: &Architecture,
    params: &[Tensor<T>],
    clip: &Tensor<T>,
) -> Result<(T, Vec<Tensor<T>>)> {
    let (out, traces) = run(arch, params, clip)?;
    let (loss, grad_out) = mse_loss(&out, clip)?;
    let grads = backward(arch, params, &traces, &grad_out)?;
    Ok((loss, grads))
}

/// Like [`loss_and_grad`] but with an arbitrary upstream gradient on the
/// reconstruction. Used by gradient checks with random projections.
pub fn output_vjp<T: Real>(
    arch: &Architecture,
    params: &[Tensor<T>],
    clip: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
    let (out, traces) = run(arch, params, clip)?;
    expect_shape(grad_out, out.shape(), "autoencoder", "grad_out")?;
    let grads = backward(arch, params, &traces, grad_out)?;
    Ok((out, grads))
}
