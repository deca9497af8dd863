//! The spatiotemporal autoencoder: configuration, initialization, training
//! and checkpoints.

mod checkpoint;
mod config;
pub mod network;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, ModelCheckpoint, TrainingMeta, CHECKPOINT_VERSION, MAGIC};
pub use config::{Architecture, AutoencoderConfig, EncoderLayer, LstmLayerSpec};

use crate::data::Clip;
use crate::error::{Error, Result};
use crate::numerics::{adam_step, AdamHyper, AdamState, Tensor};

/// Glorot-uniform weights and zero biases, except the ConvLSTM forget-gate
/// bias which starts at 1.
pub fn init_params(config: &AutoencoderConfig) -> Result<ModelCheckpoint> {
    let arch = config.architecture()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = Vec::new();
    for (name, shape) in arch.param_layout() {
        let n: usize = shape.iter().product();
        let data = if shape.len() == 1 {
            let mut b = vec![0.0f32; n];
            if name.starts_with("lstm") {
                let hidden = n / 4;
                b[hidden..2 * hidden].fill(1.0);
            }
            b
        } else {
            let receptive: usize = shape[2..].iter().product();
            let fan_in = shape[1] * receptive;
            let fan_out = shape[0] * receptive;
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
            (0..n).map(|_| (rng.random::<f32>() * 2.0 - 1.0) * limit).collect()
        };
        params.push(Tensor::new(shape, data)?);
    }
    Ok(ModelCheckpoint {
        version: CHECKPOINT_VERSION,
        config: config.clone(),
        params,
        meta: TrainingMeta {
            steps: 0,
            final_loss: None,
            seed: config.seed,
        },
    })
}

/// Reconstruction of one `[W, 1, H, W']` clip.
pub fn forward(checkpoint: &ModelCheckpoint, clip: &Tensor<f32>) -> Result<Tensor<f32>> {
    let arch = checkpoint.config.architecture()?;
    network::forward(&arch, &checkpoint.params, clip)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingHyper {
    pub lr: f32,
    /// Clips per optimizer step.
    pub batch_size: usize,
    pub max_steps: u64,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
}

impl Default for TrainingHyper {
    fn default() -> Self {
        TrainingHyper {
            lr: 1e-3,
            batch_size: 4,
            max_steps: 1000,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl TrainingHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be > 0, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidArgument("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamHyper {
        AdamHyper {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

/// Endless stream of clip indices: one seeded shuffle per epoch.
struct EpochSampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl EpochSampler {
    fn new(n: usize, seed: u64) -> Self {
        let mut s = EpochSampler {
            order: (0..n).collect(),
            pos: n,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x7261_696e_5f73_6875),
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        // Fisher-Yates with an explicit index draw so the order only depends
        // on the ChaCha stream.
        for i in (1..self.order.len()).rev() {
            let j = self.rng.random_range(0..=i);
            self.order.swap(i, j);
        }
        self.pos = 0;
    }

    fn next(&mut self) -> usize {
        if self.pos == self.order.len() {
            self.reshuffle();
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

/// Minimizes mean squared reconstruction error with Adam.
///
/// Returns the updated checkpoint and the mean batch loss of every step
/// (measured before that step's update).
pub fn train(
    checkpoint: &ModelCheckpoint,
    clips: &[Clip],
    hyper: &TrainingHyper,
) -> Result<(ModelCheckpoint, Vec<f32>)> {
    train_with_progress(checkpoint, clips, hyper, |_, _| {})
}

pub fn train_with_progress(
    checkpoint: &ModelCheckpoint,
    clips: &[Clip],
    hyper: &TrainingHyper,
    mut on_step: impl FnMut(u64, f32),
) -> Result<(ModelCheckpoint, Vec<f32>)> {
    hyper.validate()?;
    if clips.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let arch = checkpoint.config.architecture()?;
    let expected = arch.clip_shape();
    if let Some((k, c)) = clips.iter().enumerate().find(|(_, c)| c.tensor.shape() != expected) {
        return Err(Error::shape(
            "train",
            format!("clip {k} has shape {:?}, model expects {expected:?}", c.tensor.shape()),
        ));
    }
    let mut out = checkpoint.clone();
    let mut history = Vec::with_capacity(hyper.max_steps as usize);
    if hyper.max_steps == 0 {
        return Ok((out, history));
    }

    let names = out.param_names();
    let mut state = AdamState::new(&out.params).with_names(names);
    let mut sampler = EpochSampler::new(clips.len(), checkpoint.config.seed);
    let adam = hyper.adam();
    let scale = 1.0 / hyper.batch_size as f32;

    for step in 0..hyper.max_steps {
        let mut grads: Vec<Tensor<f32>> = out.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut loss_sum = 0.0f32;
        for _ in 0..hyper.batch_size {
            let clip = &clips[sampler.next()];
            let (loss, g) = network::loss_and_grad(&arch, &out.params, &clip.tensor)?;
            loss_sum += loss;
            for (acc, gi) in grads.iter_mut().zip(&g) {
                acc.add_assign(gi)?;
            }
        }
        let loss = loss_sum * scale;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        for g in &mut grads {
            g.scale(scale);
        }
        adam_step(&mut out.params, &grads, &mut state, &adam)?;
        history.push(loss);
        on_step(step, loss);
    }
    out.meta.steps += hyper.max_steps;
    out.meta.final_loss = history.last().copied();
    out.meta.seed = checkpoint.config.seed;
    Ok((out, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro_config(seed: u64) -> AutoencoderConfig {
        AutoencoderConfig {
            frame_height: 8,
            frame_width: 8,
            window: 3,
            encoder: vec![EncoderLayer::new(2, 3, 2, 1), EncoderLayer::new(2, 3, 2, 1)],
            lstm_hidden: vec![2, 2, 2],
            lstm_kernel: 3,
            seed,
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = init_params(&micro_config(1)).unwrap();
        let b = init_params(&micro_config(1)).unwrap();
        let c = init_params(&micro_config(2)).unwrap();
        assert!(a.bit_identical(&b));
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn biases_zero_except_forget_gate() {
        let ck = init_params(&micro_config(3)).unwrap();
        for (name, p) in ck.param_names().iter().zip(&ck.params) {
            if p.ndim() != 1 {
                continue;
            }
            if name.starts_with("lstm") {
                let h = p.len() / 4;
                for (k, &v) in p.data().iter().enumerate() {
                    let expected = if (h..2 * h).contains(&k) { 1.0 } else { 0.0 };
                    assert_eq!(v, expected, "{name}[{k}]");
                }
            } else {
                assert!(p.data().iter().all(|&v| v == 0.0), "{name}");
            }
        }
    }

    #[test]
    fn forward_shape_and_range() {
        let cfg = AutoencoderConfig {
            encoder: vec![EncoderLayer::new(4, 11, 4, 0), EncoderLayer::new(4, 5, 2, 2)],
            lstm_hidden: vec![4, 2, 4],
            ..AutoencoderConfig::default()
        };
        let ck = init_params(&cfg).unwrap();
        let n = 10 * 32 * 32;
        let clip = Tensor::new(
            vec![10, 1, 32, 32],
            (0..n).map(|i| ((i * 7919) % 256) as f32 / 255.0).collect(),
        )
        .unwrap();
        let y = forward(&ck, &clip).unwrap();
        assert_eq!(y.shape(), clip.shape());
        assert!(y.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let y2 = forward(&ck, &clip).unwrap();
        assert!(y.data().iter().zip(y2.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(forward(&ck, &Tensor::zeros(&[9, 1, 32, 32])).is_err());
    }

    #[test]
    fn zero_steps_returns_input() {
        let ck = init_params(&micro_config(4)).unwrap();
        let clip = Clip {
            start_frame: 0,
            tensor: Tensor::full(&[3, 1, 8, 8], 0.5),
        };
        let hyper = TrainingHyper {
            max_steps: 0,
            ..TrainingHyper::default()
        };
        let (out, hist) = train(&ck, &[clip], &hyper).unwrap();
        assert!(out.bit_identical(&ck));
        assert!(hist.is_empty());
    }

    #[test]
    fn empty_dataset_rejected() {
        let ck = init_params(&micro_config(5)).unwrap();
        assert!(matches!(
            train(&ck, &[], &TrainingHyper::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn non_finite_loss_reports_step() {
        let ck = init_params(&micro_config(6)).unwrap();
        let clip = Clip {
            start_frame: 0,
            tensor: Tensor::full(&[3, 1, 8, 8], f32::NAN),
        };
        let hyper = TrainingHyper {
            max_steps: 3,
            batch_size: 1,
            ..TrainingHyper::default()
        };
        match train(&ck, &[clip], &hyper) {
            Err(Error::NonFiniteLoss { step }) => assert_eq!(step, 0),
            other => panic!("expected non-finite loss, got {other:?}"),
        }
    }
}
