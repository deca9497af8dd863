use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::ConvSpec;

/// One strided convolution of the spatial encoder. The decoder mirrors it
/// with a transposed convolution of the same kernel, stride and padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderLayer {
    pub channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
}

impl EncoderLayer {
    pub const fn new(channels: usize, kernel_size: usize, stride: usize, padding: usize) -> Self {
        EncoderLayer {
            channels,
            kernel_size,
            stride,
            padding,
        }
    }
}

impl fmt::Display for EncoderLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}:{}",
            self.channels, self.kernel_size, self.stride, self.padding
        )
    }
}

impl FromStr for EncoderLayer {
    type Err = Error;

    /// `channels:kernel:stride:padding`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(':')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidArgument(format!("bad encoder layer {s:?}")))?;
        match parts[..] {
            [c, k, st, p] => Ok(EncoderLayer::new(c, k, st, p)),
            _ => Err(Error::InvalidArgument(format!(
                "encoder layer {s:?} must be channels:kernel:stride:padding"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AutoencoderConfig {
    pub frame_height: usize,
    pub frame_width: usize,
    /// Frames per clip.
    pub window: usize,
    pub encoder: Vec<EncoderLayer>,
    pub lstm_hidden: Vec<usize>,
    pub lstm_kernel: usize,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            frame_height: 32,
            frame_width: 32,
            window: 10,
            encoder: vec![EncoderLayer::new(32, 11, 4, 0), EncoderLayer::new(64, 5, 2, 2)],
            lstm_hidden: vec![64, 32, 64],
            lstm_kernel: 3,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmLayerSpec {
    pub in_channels: usize,
    pub hidden: usize,
    pub kernel_size: usize,
}

/// Resolved layer geometry of an [`AutoencoderConfig`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub window: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub encoder: Vec<ConvSpec>,
    pub lstm: Vec<LstmLayerSpec>,
    /// Transposed convolutions, applied in order; `decoder[j]` mirrors
    /// `encoder[n - 1 - j]`.
    pub decoder: Vec<ConvSpec>,
    /// Spatial size of the ConvLSTM state.
    pub latent: (usize, usize),
}

impl AutoencoderConfig {
    pub fn architecture(&self) -> Result<Architecture> {
        if self.window == 0 {
            return Err(Error::InvalidArgument("window must be >= 1".into()));
        }
        if self.frame_height == 0 || self.frame_width == 0 {
            return Err(Error::InvalidArgument("frame size must be positive".into()));
        }
        if self.encoder.is_empty() {
            return Err(Error::InvalidArgument("at least one encoder layer is required".into()));
        }
        if self.lstm_hidden.is_empty() {
            return Err(Error::InvalidArgument("at least one ConvLSTM layer is required".into()));
        }
        if self.lstm_kernel == 0 || self.lstm_kernel.is_multiple_of(2) {
            return Err(Error::Layer {
                layer: "lstm".into(),
                detail: format!("kernel size must be odd, got {}", self.lstm_kernel),
            });
        }

        let mut sizes = vec![(self.frame_height, self.frame_width)];
        let mut encoder = Vec::with_capacity(self.encoder.len());
        let mut channels = 1;
        for (i, layer) in self.encoder.iter().enumerate() {
            let spec = ConvSpec::new(channels, layer.channels, layer.kernel_size, layer.stride, layer.padding);
            let (h, w) = *sizes.last().unwrap();
            let name = format!("enc{i}");
            let oh = spec.output_size(h).map_err(|e| layer_err(&name, e))?;
            let ow = spec.output_size(w).map_err(|e| layer_err(&name, e))?;
            sizes.push((oh, ow));
            encoder.push(spec);
            channels = layer.channels;
        }

        let mut lstm = Vec::with_capacity(self.lstm_hidden.len());
        for (l, &hidden) in self.lstm_hidden.iter().enumerate() {
            if hidden == 0 {
                return Err(Error::Layer {
                    layer: format!("lstm{l}"),
                    detail: "hidden channels must be >= 1".into(),
                });
            }
            lstm.push(LstmLayerSpec {
                in_channels: channels,
                hidden,
                kernel_size: self.lstm_kernel,
            });
            channels = hidden;
        }

        let n = encoder.len();
        let mut decoder = Vec::with_capacity(n);
        for j in 0..n {
            let i = n - 1 - j;
            let enc = &encoder[i];
            let (in_h, in_w) = sizes[i + 1];
            let (target_h, target_w) = sizes[i];
            let name = format!("dec{j}");
            let base = ConvSpec::new(channels, enc.in_channels, enc.kernel_size, enc.stride, enc.padding);
            let bh = base.transposed_output_size(in_h).map_err(|e| layer_err(&name, e))?;
            let bw = base.transposed_output_size(in_w).map_err(|e| layer_err(&name, e))?;
            let (oph, opw) = (target_h as isize - bh as isize, target_w as isize - bw as isize);
            if oph != opw || oph < 0 || (oph > 0 && oph as usize >= enc.stride) {
                return Err(Error::Layer {
                    layer: name,
                    detail: format!(
                        "cannot mirror encoder layer {i}: transposed output {bh}x{bw} vs required {target_h}x{target_w}"
                    ),
                });
            }
            decoder.push(base.with_output_padding(oph as usize));
            channels = enc.in_channels;
        }

        Ok(Architecture {
            window: self.window,
            frame_height: self.frame_height,
            frame_width: self.frame_width,
            encoder,
            lstm,
            decoder,
            latent: sizes[n],
        })
    }

    /// Plain `key=value` lines, one per field.
    pub fn to_text(&self) -> String {
        let enc: Vec<String> = self.encoder.iter().map(|l| l.to_string()).collect();
        let hidden: Vec<String> = self.lstm_hidden.iter().map(|h| h.to_string()).collect();
        format!(
            "frame_height={}\nframe_width={}\nwindow={}\nencoder={}\nlstm_hidden={}\nlstm_kernel={}\nseed={}\n",
            self.frame_height,
            self.frame_width,
            self.window,
            enc.join(","),
            hidden.join(","),
            self.lstm_kernel,
            self.seed
        )
    }

    /// Applies one `key=value` pair produced by [`AutoencoderConfig::to_text`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::InvalidArgument(format!("bad value for {key}: {value:?}"));
        let num = |v: &str| v.trim().parse::<usize>().map_err(|_| bad());
        match key {
            "frame_height" => self.frame_height = num(value)?,
            "frame_width" => self.frame_width = num(value)?,
            "window" => self.window = num(value)?,
            "lstm_kernel" => self.lstm_kernel = num(value)?,
            "seed" => self.seed = value.trim().parse().map_err(|_| bad())?,
            "encoder" => {
                self.encoder = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "lstm_hidden" => {
                self.lstm_hidden = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(num)
                    .collect::<Result<_>>()?
            }
            _ => return Err(Error::InvalidArgument(format!("unknown model config key {key:?}"))),
        }
        Ok(())
    }
}

fn layer_err(layer: &str, e: Error) -> Error {
    Error::Layer {
        layer: layer.to_string(),
        detail: e.to_string(),
    }
}

impl Architecture {
    /// Names and shapes of every trainable tensor, in checkpoint order.
    pub fn param_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, spec) in self.encoder.iter().enumerate() {
            out.push((format!("enc{i}.weight"), spec.conv_weight_shape().to_vec()));
            out.push((format!("enc{i}.bias"), vec![spec.out_channels]));
        }
        for (l, spec) in self.lstm.iter().enumerate() {
            let (k, hc) = (spec.kernel_size, spec.hidden);
            out.push((format!("lstm{l}.w_x"), vec![4 * hc, spec.in_channels, k, k]));
            out.push((format!("lstm{l}.w_h"), vec![4 * hc, hc, k, k]));
            out.push((format!("lstm{l}.bias"), vec![4 * hc]));
        }
        for (j, spec) in self.decoder.iter().enumerate() {
            out.push((format!("dec{j}.weight"), spec.deconv_weight_shape().to_vec()));
            out.push((format!("dec{j}.bias"), vec![spec.out_channels]));
        }
        out
    }

    pub fn clip_shape(&self) -> [usize; 4] {
        [self.window, 1, self.frame_height, self.frame_width]
    }

    pub(crate) fn lstm_base(&self) -> usize {
        2 * self.encoder.len()
    }

    pub(crate) fn decoder_base(&self) -> usize {
        self.lstm_base() + 3 * self.lstm.len()
    }
}
