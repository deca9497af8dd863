//! 2-D convolution and transposed convolution over `[C, H, W]` tensors.
//!
//! Convolution is cross-correlation with zero padding. Weights are laid out
//! `[out, in, k, k]` for convolution and `[in, out, k, k]` for the transposed
//! form, so a transposed layer with the same spec undoes the shape arithmetic
//! of its forward twin.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::numerics::tensor::{dims3, expect_shape, Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
    /// Extra rows/columns appended to a transposed convolution's output.
    /// Ignored by the forward convolution.
    pub output_padding: usize,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize, stride: usize, padding: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            padding,
            output_padding: 0,
        }
    }

    pub fn with_output_padding(mut self, output_padding: usize) -> Self {
        self.output_padding = output_padding;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::InvalidArgument("convolution channels must be >= 1".into()));
        }
        if self.kernel_size == 0 {
            return Err(Error::InvalidArgument("kernel_size must be >= 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be >= 1".into()));
        }
        Ok(())
    }

    /// `floor((n + 2p - k) / s) + 1`, or an error when the padded input is
    /// smaller than the kernel.
    pub fn output_size(&self, n: usize) -> Result<usize> {
        self.validate()?;
        let padded = n + 2 * self.padding;
        if padded < self.kernel_size {
            return Err(Error::InvalidArgument(format!(
                "input size {n} with padding {} is smaller than kernel {}",
                self.padding, self.kernel_size
            )));
        }
        Ok((padded - self.kernel_size) / self.stride + 1)
    }

    /// `(n - 1) s - 2p + k + output_padding`.
    pub fn transposed_output_size(&self, n: usize) -> Result<usize> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidArgument(
                "transposed convolution input size is zero".into(),
            ));
        }
        let full = (n - 1) * self.stride + self.kernel_size + self.output_padding;
        if full <= 2 * self.padding {
            return Err(Error::InvalidArgument(format!(
                "transposed convolution of size {n} collapses under padding {}",
                self.padding
            )));
        }
        Ok(full - 2 * self.padding)
    }

    pub fn conv_weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel_size, self.kernel_size]
    }

    pub fn deconv_weight_shape(&self) -> [usize; 4] {
        [self.in_channels, self.out_channels, self.kernel_size, self.kernel_size]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T = f32> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Indices `a` in `0..a_len` with `a * stride + offset` in `0..b_len`.
#[inline]
fn tap_range(a_len: usize, b_len: usize, stride: usize, offset: isize) -> Range<usize> {
    let s = stride as isize;
    let lo = if offset < 0 { (-offset + s - 1) / s } else { 0 };
    let top = b_len as isize - 1 - offset;
    if top < 0 {
        return 0..0;
    }
    let hi = (top / s + 1).min(a_len as isize);
    if lo >= hi {
        0..0
    } else {
        lo as usize..hi as usize
    }
}

struct Geometry {
    ci: usize,
    co: usize,
    k: usize,
    s: usize,
    p: usize,
    ih: usize,
    iw: usize,
    oh: usize,
    ow: usize,
}

fn conv_geometry<T: Real>(
    input: &Tensor<T>,
    spec: &ConvSpec,
    weights: &Tensor<T>,
    op: &'static str,
) -> Result<Geometry> {
    spec.validate()?;
    let (c, ih, iw) = dims3(input, op, "input")?;
    if c != spec.in_channels {
        return Err(Error::shape(
            op,
            format!(
                "input has {c} channels (dimension 0) but spec expects {}",
                spec.in_channels
            ),
        ));
    }
    expect_shape(weights, &spec.conv_weight_shape(), op, "weights")?;
    let oh = spec
        .output_size(ih)
        .map_err(|e| Error::shape(op, format!("height: {e}")))?;
    let ow = spec
        .output_size(iw)
        .map_err(|e| Error::shape(op, format!("width: {e}")))?;
    Ok(Geometry {
        ci: spec.in_channels,
        co: spec.out_channels,
        k: spec.kernel_size,
        s: spec.stride,
        p: spec.padding,
        ih,
        iw,
        oh,
        ow,
    })
}

fn check_bias<T: Real>(bias: &Tensor<T>, n: usize, op: &'static str) -> Result<()> {
    expect_shape(bias, &[n], op, "bias")
}

/// Adds `weights ∗ input` to `out` (no bias).
pub(crate) fn conv2d_accumulate<T: Real>(
    input: &Tensor<T>,
    spec: &ConvSpec,
    weights: &Tensor<T>,
    out: &mut Tensor<T>,
) -> Result<()> {
    let g = conv_geometry(input, spec, weights, "conv2d")?;
    expect_shape(out, &[g.co, g.oh, g.ow], "conv2d", "output")?;
    let x = input.data();
    let w = weights.data();
    let y = out.data_mut();
    for o in 0..g.co {
        let y_plane = &mut y[o * g.oh * g.ow..(o + 1) * g.oh * g.ow];
        for i in 0..g.ci {
            let x_plane = &x[i * g.ih * g.iw..(i + 1) * g.ih * g.iw];
            for ky in 0..g.k {
                let rows = tap_range(g.oh, g.ih, g.s, ky as isize - g.p as isize);
                for kx in 0..g.k {
                    let wv = w[((o * g.ci + i) * g.k + ky) * g.k + kx];
                    let off = kx as isize - g.p as isize;
                    let cols = tap_range(g.ow, g.iw, g.s, off);
                    for oy in rows.clone() {
                        let iy = oy * g.s + ky - g.p;
                        let x_row = &x_plane[iy * g.iw..(iy + 1) * g.iw];
                        let y_row = &mut y_plane[oy * g.ow..(oy + 1) * g.ow];
                        for ox in cols.clone() {
                            let ix = (ox * g.s) as isize + off;
                            y_row[ox] += wv * x_row[ix as usize];
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    spec: &ConvSpec,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let g = conv_geometry(input, spec, weights, "conv2d")?;
    check_bias(bias, g.co, "conv2d")?;
    let mut out = Tensor::zeros(&[g.co, g.oh, g.ow]);
    let plane = g.oh * g.ow;
    for (o, &b) in bias.data().iter().enumerate() {
        out.data_mut()[o * plane..(o + 1) * plane].fill(b);
    }
    conv2d_accumulate(input, spec, weights, &mut out)?;
    Ok(out)
}

/// Gradients of [`conv2d_forward`]; `grad_input` is accumulated into the
/// returned tensor, weight gradients into `grad_weights`.
pub(crate) fn conv2d_backward_into<T: Real>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    spec: &ConvSpec,
    weights: &Tensor<T>,
    grad_input: &mut Tensor<T>,
    grad_weights: &mut Tensor<T>,
) -> Result<()> {
    let g = conv_geometry(input, spec, weights, "conv2d_backward")?;
    expect_shape(grad_out, &[g.co, g.oh, g.ow], "conv2d_backward", "grad_out")?;
    expect_shape(grad_input, input.shape(), "conv2d_backward", "grad_input")?;
    expect_shape(grad_weights, weights.shape(), "conv2d_backward", "grad_weights")?;
    let x = input.data();
    let w = weights.data();
    let gy = grad_out.data();
    let gx = grad_input.data_mut();
    let gw = grad_weights.data_mut();
    for o in 0..g.co {
        let gy_plane = &gy[o * g.oh * g.ow..(o + 1) * g.oh * g.ow];
        for i in 0..g.ci {
            let x_plane = &x[i * g.ih * g.iw..(i + 1) * g.ih * g.iw];
            let gx_plane = &mut gx[i * g.ih * g.iw..(i + 1) * g.ih * g.iw];
            for ky in 0..g.k {
                let rows = tap_range(g.oh, g.ih, g.s, ky as isize - g.p as isize);
                for kx in 0..g.k {
                    let widx = ((o * g.ci + i) * g.k + ky) * g.k + kx;
                    let wv = w[widx];
                    let off = kx as isize - g.p as isize;
                    let cols = tap_range(g.ow, g.iw, g.s, off);
                    let mut acc = T::zero();
                    for oy in rows.clone() {
                        let iy = oy * g.s + ky - g.p;
                        let gy_row = &gy_plane[oy * g.ow..(oy + 1) * g.ow];
                        let base = iy * g.iw;
                        for ox in cols.clone() {
                            let ix = base + ((ox * g.s) as isize + off) as usize;
                            let gv = gy_row[ox];
                            acc += gv * x_plane[ix];
                            gx_plane[ix] += wv * gv;
                        }
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn bias_grad_into<T: Real>(grad_out: &Tensor<T>, grad_bias: &mut Tensor<T>) {
    let c = grad_out.shape()[0];
    for o in 0..c {
        let s: T = grad_out.outer(o).iter().copied().sum();
        grad_bias.data_mut()[o] += s;
    }
}

pub fn conv2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    cached_input: &Tensor<T>,
    spec: &ConvSpec,
    weights: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let mut input = Tensor::zeros(cached_input.shape());
    let mut w = Tensor::zeros(weights.shape());
    conv2d_backward_into(grad_out, cached_input, spec, weights, &mut input, &mut w)?;
    let mut bias = Tensor::zeros(&[spec.out_channels]);
    bias_grad_into(grad_out, &mut bias);
    Ok(ConvGrads {
        input,
        weights: w,
        bias,
    })
}

fn deconv_geometry<T: Real>(
    input: &Tensor<T>,
    spec: &ConvSpec,
    weights: &Tensor<T>,
    op: &'static str,
) -> Result<Geometry> {
    spec.validate()?;
    let (c, ih, iw) = dims3(input, op, "input")?;
    if c != spec.in_channels {
        return Err(Error::shape(
            op,
            format!(
                "input has {c} channels (dimension 0) but spec expects {}",
                spec.in_channels
            ),
        ));
    }
    expect_shape(weights, &spec.deconv_weight_shape(), op, "weights")?;
    if spec.output_padding > 0 && spec.output_padding >= spec.stride {
        return Err(Error::InvalidArgument(format!(
            "output_padding {} must be smaller than stride {}",
            spec.output_padding, spec.stride
        )));
    }
    let oh = spec
        .transposed_output_size(ih)
        .map_err(|e| Error::shape(op, format!("height: {e}")))?;
    let ow = spec
        .transposed_output_size(iw)
        .map_err(|e| Error::shape(op, format!("width: {e}")))?;
    Ok(Geometry {
        ci: spec.in_channels,
        co: spec.out_channels,
        k: spec.kernel_size,
        s: spec.stride,
        p: spec.padding,
        ih,
        iw,
        oh,
        ow,
    })
}

/// Transposed convolution: every input pixel scatters a scaled kernel into
/// the output at `stride` spacing.
pub fn deconv2d_forward<T: Real>(
    input: &Tensor<T>,
    spec: &ConvSpec,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let g = deconv_geometry(input, spec, weights, "deconv2d")?;
    check_bias(bias, g.co, "deconv2d")?;
    let mut out = Tensor::zeros(&[g.co, g.oh, g.ow]);
    let plane = g.oh * g.ow;
    let x = input.data();
    let w = weights.data();
    let y = out.data_mut();
    for (o, &b) in bias.data().iter().enumerate() {
        y[o * plane..(o + 1) * plane].fill(b);
    }
    for i in 0..g.ci {
        let x_plane = &x[i * g.ih * g.iw..(i + 1) * g.ih * g.iw];
        for o in 0..g.co {
            let y_plane = &mut y[o * plane..(o + 1) * plane];
            for ky in 0..g.k {
                let rows = tap_range(g.ih, g.oh, g.s, ky as isize - g.p as isize);
                for kx in 0..g.k {
                    let wv = w[((i * g.co + o) * g.k + ky) * g.k + kx];
                    let off = kx as isize - g.p as isize;
                    let cols = tap_range(g.iw, g.ow, g.s, off);
                    for iy in rows.clone() {
                        let oy = iy * g.s + ky - g.p;
                        let x_row = &x_plane[iy * g.iw..(iy + 1) * g.iw];
                        let y_row = &mut y_plane[oy * g.ow..(oy + 1) * g.ow];
                        for ix in cols.clone() {
                            let ox = ((ix * g.s) as isize + off) as usize;
                            y_row[ox] += wv * x_row[ix];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn deconv2d_backward_into<T: Real>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    spec: &ConvSpec,
    weights: &Tensor<T>,
    grad_input: &mut Tensor<T>,
    grad_weights: &mut Tensor<T>,
) -> Result<()> {
    let g = deconv_geometry(input, spec, weights, "deconv2d_backward")?;
    expect_shape(grad_out, &[g.co, g.oh, g.ow], "deconv2d_backward", "grad_out")?;
    expect_shape(grad_input, input.shape(), "deconv2d_backward", "grad_input")?;
    expect_shape(grad_weights, weights.shape(), "deconv2d_backward", "grad_weights")?;
    let plane = g.oh * g.ow;
    let x = input.data();
    let w = weights.data();
    let gy = grad_out.data();
    let gx = grad_input.data_mut();
    let gw = grad_weights.data_mut();
    for i in 0..g.ci {
        let x_plane = &x[i * g.ih * g.iw..(i + 1) * g.ih * g.iw];
        let gx_plane = &mut gx[i * g.ih * g.iw..(i + 1) * g.ih * g.iw];
        for o in 0..g.co {
            let gy_plane = &gy[o * plane..(o + 1) * plane];
            for ky in 0..g.k {
                let rows = tap_range(g.ih, g.oh, g.s, ky as isize - g.p as isize);
                for kx in 0..g.k {
                    let widx = ((i * g.co + o) * g.k + ky) * g.k + kx;
                    let wv = w[widx];
                    let off = kx as isize - g.p as isize;
                    let cols = tap_range(g.iw, g.ow, g.s, off);
                    let mut acc = T::zero();
                    for iy in rows.clone() {
                        let oy = iy * g.s + ky - g.p;
                        let gy_row = &gy_plane[oy * g.ow..(oy + 1) * g.ow];
                        let base = iy * g.iw;
                        for ix in cols.clone() {
                            let gv = gy_row[((ix * g.s) as isize + off) as usize];
                            acc += gv * x_plane[base + ix];
                            gx_plane[base + ix] += wv * gv;
                        }
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
    Ok(())
}

pub fn deconv2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    cached_input: &Tensor<T>,
    spec: &ConvSpec,
    weights: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let mut input = Tensor::zeros(cached_input.shape());
    let mut w = Tensor::zeros(weights.shape());
    deconv2d_backward_into(grad_out, cached_input, spec, weights, &mut input, &mut w)?;
    let mut bias = Tensor::zeros(&[spec.out_channels]);
    bias_grad_into(grad_out, &mut bias);
    Ok(ConvGrads {
        input,
        weights: w,
        bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Quadruple loop straight from the definition, padding by bounds checks.
    fn naive_conv(x: &Tensor<f64>, spec: &ConvSpec, w: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
        let (ci, h, wd) = (x.shape()[0], x.shape()[1] as isize, x.shape()[2] as isize);
        let k = spec.kernel_size as isize;
        let (s, p) = (spec.stride as isize, spec.padding as isize);
        let oh = (h + 2 * p - k) / s + 1;
        let ow = (wd + 2 * p - k) / s + 1;
        let mut out = Vec::new();
        for o in 0..spec.out_channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.data()[o];
                    for i in 0..ci {
                        for ky in 0..k {
                            for kx in 0..k {
                                let (iy, ix) = (oy * s + ky - p, ox * s + kx - p);
                                if iy < 0 || ix < 0 || iy >= h || ix >= wd {
                                    continue;
                                }
                                let wv = w.data()[((o * ci + i) * k as usize + ky as usize) * k as usize + kx as usize];
                                acc += wv * x.data()[(i * h as usize + iy as usize) * wd as usize + ix as usize];
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[1, 4, 6], &mut rng);
        let spec = ConvSpec::new(1, 1, 1, 1, 0);
        let w = Tensor::full(&[1, 1, 1, 1], 1.0);
        let b = Tensor::zeros(&[1]);
        assert_eq!(conv2d_forward(&x, &spec, &w, &b).unwrap(), x);
        assert_eq!(deconv2d_forward(&x, &spec, &w, &b).unwrap(), x);
        let g = conv2d_backward(&x, &x, &spec, &w).unwrap();
        assert_eq!(g.input, x);
    }

    #[test]
    fn output_shape_arithmetic() {
        let spec = ConvSpec::new(1, 2, 11, 4, 0);
        assert_eq!(spec.output_size(32).unwrap(), 6);
        assert_eq!(spec.transposed_output_size(6).unwrap(), 31);
        assert_eq!(spec.with_output_padding(1).transposed_output_size(6).unwrap(), 32);
        assert!(spec.output_size(8).is_err());
        let x = Tensor::<f32>::zeros(&[1, 32, 32]);
        let y = conv2d_forward(&x, &spec, &Tensor::zeros(&[2, 1, 11, 11]), &Tensor::zeros(&[2])).unwrap();
        assert_eq!(y.shape(), &[2, 6, 6]);
    }

    #[test]
    fn matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (k, s, p) in [(3, 1, 0), (3, 1, 1), (3, 2, 1), (2, 2, 0)] {
            let x = random(&[1, 5, 5], &mut rng);
            let spec = ConvSpec::new(1, 2, k, s, p);
            let w = random(&[2, 1, k, k], &mut rng);
            let b = random(&[2], &mut rng);
            let y = conv2d_forward(&x, &spec, &w, &b).unwrap();
            let expected = naive_conv(&x, &spec, &w, &b);
            assert_eq!(y.len(), expected.len());
            for (a, e) in y.data().iter().zip(&expected) {
                assert!((a - e).abs() < 1e-6, "{a} vs {e} at k={k} s={s} p={p}");
            }
        }
    }

    #[test]
    fn zero_grad_out_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&[2, 5, 5], &mut rng);
        let spec = ConvSpec::new(2, 3, 3, 1, 1);
        let w = random(&[3, 2, 3, 3], &mut rng);
        let g = conv2d_backward(&Tensor::zeros(&[3, 5, 5]), &x, &spec, &w).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.weights.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deconv_is_adjoint_of_conv() {
        // <conv(x), y> == <x, deconv(y)> for shared weights and zero bias.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = ConvSpec::new(2, 3, 3, 2, 1);
        let x = random(&[2, 7, 7], &mut rng);
        let w = random(&[3, 2, 3, 3], &mut rng);
        let cx = conv2d_forward(&x, &spec, &w, &Tensor::zeros(&[3])).unwrap();
        let y = random(cx.shape(), &mut rng);
        let tspec = ConvSpec::new(3, 2, 3, 2, 1);
        let w_t = w.clone().reshape(vec![3, 2, 3, 3]).unwrap();
        let dy = deconv2d_forward(&y, &tspec, &w_t, &Tensor::zeros(&[2])).unwrap();
        assert_eq!(dy.shape(), x.shape());
        let lhs: f64 = cx.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn shape_errors_are_descriptive() {
        let spec = ConvSpec::new(2, 1, 3, 1, 0);
        let x = Tensor::<f32>::zeros(&[1, 5, 5]);
        let err = conv2d_forward(&x, &spec, &Tensor::zeros(&[1, 2, 3, 3]), &Tensor::zeros(&[1])).unwrap_err();
        assert!(err.to_string().contains("channels"), "{err}");
        let x = Tensor::<f32>::zeros(&[2, 5, 5]);
        let err = conv2d_forward(&x, &spec, &Tensor::zeros(&[1, 2, 5, 3]), &Tensor::zeros(&[1])).unwrap_err();
        assert!(err.to_string().contains("weights"), "{err}");
        let err = conv2d_backward(&Tensor::zeros(&[1, 2, 2]), &x, &spec, &Tensor::zeros(&[1, 2, 3, 3])).unwrap_err();
        assert!(err.to_string().contains("grad_out"), "{err}");
        assert!(tap_range(3, 5, 2, -1) == (1..3));
    }
}
