//! Randomized self-checks against independent reference computations.
//!
//! Gradient checks draw a fresh layer configuration, inputs and weights in
//! `f64`, form the scalar `L = Σ r ⊙ y` for a random probe `r` (the MSE check
//! uses the loss itself), and compare the analytic gradient with respect to
//! all inputs and parameters against central differences. The clustering and
//! windowing checks compare against brute-force references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clustering::{dbscan, homogeneity, NOISE};
use crate::data::clip_starts;
use crate::model::{network, AutoencoderConfig, EncoderLayer};
use crate::numerics::{
    conv2d_backward, conv2d_forward, convlstm_cell_backward, convlstm_cell_step, deconv2d_backward, deconv2d_forward,
    gradient_check, mse_loss, ConvLstmParams, ConvSpec, Tensor,
};

/// Step used for the central differences.
pub const GRADCHECK_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckSummary {
    pub trials: usize,
    /// Worst relative error over all trials and components.
    pub max_relative_error: f64,
    pub components: usize,
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-scale..scale)).collect(),
    )
    .unwrap()
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Flattens tensors into one vector and rebuilds them from slices of it.
struct Packing {
    shapes: Vec<Vec<usize>>,
}

impl Packing {
    fn of(tensors: &[&Tensor<f64>]) -> (Self, Vec<f64>) {
        let shapes = tensors.iter().map(|t| t.shape().to_vec()).collect();
        let flat = tensors.iter().flat_map(|t| t.data().iter().copied()).collect();
        (Packing { shapes }, flat)
    }

    fn unpack(&self, flat: &[f64]) -> Vec<Tensor<f64>> {
        let mut off = 0;
        self.shapes
            .iter()
            .map(|s| {
                let n: usize = s.iter().product();
                off += n;
                Tensor::new(s.clone(), flat[off - n..off].to_vec()).unwrap()
            })
            .collect()
    }
}

fn flatten(tensors: &[&Tensor<f64>]) -> Vec<f64> {
    tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
}

fn run_trials(trials: usize, seed: u64, mut trial: impl FnMut(&mut ChaCha8Rng) -> (f64, usize)) -> CheckSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = CheckSummary {
        trials,
        max_relative_error: 0.0,
        components: 0,
    };
    for _ in 0..trials {
        let (err, n) = trial(&mut rng);
        summary.max_relative_error = summary.max_relative_error.max(err);
        summary.components += n;
    }
    summary
}

fn random_spec(rng: &mut ChaCha8Rng) -> ConvSpec {
    let kernel_size = [1, 2, 3, 5][rng.random_range(0..4)];
    let stride = rng.random_range(1..=3);
    let padding = rng.random_range(0..=kernel_size / 2);
    ConvSpec::new(
        rng.random_range(1..=3),
        rng.random_range(1..=3),
        kernel_size,
        stride,
        padding,
    )
}

pub fn check_conv2d(trials: usize, seed: u64) -> CheckSummary {
    run_trials(trials, seed, |rng| {
        let spec = random_spec(rng);
        let (h, w) = (
            rng.random_range(spec.kernel_size..=9),
            rng.random_range(spec.kernel_size..=9),
        );
        let x = random_tensor(rng, &[spec.in_channels, h, w], 1.0);
        let wt = random_tensor(rng, &spec.conv_weight_shape(), 1.0);
        let b = random_tensor(rng, &[spec.out_channels], 1.0);
        let y = conv2d_forward(&x, &spec, &wt, &b).unwrap();
        let probe = random_tensor(rng, y.shape(), 1.0);
        let (pack, theta) = Packing::of(&[&x, &wt, &b]);
        let report = gradient_check(
            |flat| {
                let t = pack.unpack(flat);
                let y = conv2d_forward(&t[0], &spec, &t[1], &t[2]).unwrap();
                let g = conv2d_backward(&probe, &t[0], &spec, &t[1]).unwrap();
                (dot(&y, &probe), flatten(&[&g.input, &g.weights, &g.bias]))
            },
            &theta,
            GRADCHECK_EPS,
        );
        (report.max_relative_error, theta.len())
    })
}

pub fn check_deconv2d(trials: usize, seed: u64) -> CheckSummary {
    run_trials(trials, seed, |rng| {
        let mut spec = random_spec(rng);
        spec.output_padding = rng.random_range(0..spec.stride);
        let (h, w) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let x = random_tensor(rng, &[spec.in_channels, h, w], 1.0);
        let wt = random_tensor(rng, &spec.deconv_weight_shape(), 1.0);
        let b = random_tensor(rng, &[spec.out_channels], 1.0);
        // Degenerate draws where padding eats the whole output are skipped.
        let Ok(y) = deconv2d_forward(&x, &spec, &wt, &b) else {
            return (0.0, 0);
        };
        let probe = random_tensor(rng, y.shape(), 1.0);
        let (pack, theta) = Packing::of(&[&x, &wt, &b]);
        let report = gradient_check(
            |flat| {
                let t = pack.unpack(flat);
                let y = deconv2d_forward(&t[0], &spec, &t[1], &t[2]).unwrap();
                let g = deconv2d_backward(&probe, &t[0], &spec, &t[1]).unwrap();
                (dot(&y, &probe), flatten(&[&g.input, &g.weights, &g.bias]))
            },
            &theta,
            GRADCHECK_EPS,
        );
        (report.max_relative_error, theta.len())
    })
}

pub fn check_convlstm(trials: usize, seed: u64) -> CheckSummary {
    run_trials(trials, seed, |rng| {
        let ci = rng.random_range(1..=3);
        let hc = rng.random_range(1..=3);
        let k = [1, 3, 5][rng.random_range(0..3)];
        let (h, w) = (rng.random_range(2..=6), rng.random_range(2..=6));
        let x = random_tensor(rng, &[ci, h, w], 1.0);
        let h_prev = random_tensor(rng, &[hc, h, w], 1.0);
        let c_prev = random_tensor(rng, &[hc, h, w], 1.0);
        let mut p = ConvLstmParams::<f64>::zeros(ci, hc, k);
        p.w_x = random_tensor(rng, p.w_x.shape(), 0.5);
        p.w_h = random_tensor(rng, p.w_h.shape(), 0.5);
        p.bias = random_tensor(rng, p.bias.shape(), 0.5);
        let probe_h = random_tensor(rng, &[hc, h, w], 1.0);
        let probe_c = random_tensor(rng, &[hc, h, w], 1.0);
        let (pack, theta) = Packing::of(&[&x, &h_prev, &c_prev, &p.w_x, &p.w_h, &p.bias]);
        let report = gradient_check(
            |flat| {
                let t = pack.unpack(flat);
                let q = ConvLstmParams {
                    w_x: t[3].clone(),
                    w_h: t[4].clone(),
                    bias: t[5].clone(),
                };
                let step = convlstm_cell_step(&t[0], &t[1], &t[2], q.view()).unwrap();
                let g = convlstm_cell_backward(&step.cache, &probe_h, &probe_c, q.view()).unwrap();
                (
                    dot(&step.h, &probe_h) + dot(&step.c, &probe_c),
                    flatten(&[&g.x, &g.h_prev, &g.c_prev, &g.params.w_x, &g.params.w_h, &g.params.bias]),
                )
            },
            &theta,
            GRADCHECK_EPS,
        );
        (report.max_relative_error, theta.len())
    })
}

pub fn check_mse(trials: usize, seed: u64) -> CheckSummary {
    run_trials(trials, seed, |rng| {
        let shape = [
            rng.random_range(1..=3),
            rng.random_range(1..=5),
            rng.random_range(1..=5),
        ];
        let pred = random_tensor(rng, &shape, 1.0);
        let target = random_tensor(rng, &shape, 1.0);
        let report = gradient_check(
            |flat| {
                let p = Tensor::new(shape.to_vec(), flat.to_vec()).unwrap();
                let (l, g) = mse_loss(&p, &target).unwrap();
                (l, g.into_data())
            },
            pred.data(),
            GRADCHECK_EPS,
        );
        (report.max_relative_error, pred.len())
    })
}

/// The smallest complete autoencoder: 8×8 frames, 3-frame clips, two
/// stride-2 encoder layers and ConvLSTM widths 2/2/2.
pub fn micro_config(seed: u64) -> AutoencoderConfig {
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

/// End-to-end check of the reconstruction loss gradient with respect to every
/// parameter of a freshly initialized micro model.
pub fn check_micro_model(trials: usize, seed: u64) -> CheckSummary {
    run_trials(trials, seed, |rng| {
        let cfg = micro_config(rng.random());
        let arch = cfg.architecture().unwrap();
        let init = crate::model::init_params(&cfg).unwrap();
        let params: Vec<Tensor<f64>> = init.params.iter().map(|p| p.cast()).collect();
        let clip = Tensor::new(
            arch.clip_shape().to_vec(),
            (0..arch.clip_shape().iter().product())
                .map(|_| rng.random_range(0.0..1.0))
                .collect(),
        )
        .unwrap();
        let refs: Vec<&Tensor<f64>> = params.iter().collect();
        let (pack, theta) = Packing::of(&refs);
        let report = gradient_check(
            |flat| {
                let p = pack.unpack(flat);
                let (l, g) = network::loss_and_grad(&arch, &p, &clip).unwrap();
                (l, flatten(&g.iter().collect::<Vec<_>>()))
            },
            &theta,
            GRADCHECK_EPS,
        );
        (report.max_relative_error, theta.len())
    })
}

/// DBSCAN by connected components: core points within `eps` of each other
/// are unioned, components are numbered by their smallest core index, and a
/// border point joins the lowest-numbered component among its core
/// neighbours.
pub fn reference_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<i64> {
    let n = points.len();
    let within = |i: usize, j: usize| {
        let d2: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum();
        d2.sqrt() <= eps
    };
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| within(i, j)).count() >= min_pts)
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if core[i] && core[j] && within(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut id_of_root = vec![NOISE; n];
    let mut next = 0;
    let mut labels = vec![NOISE; n];
    for i in 0..n {
        if core[i] {
            let r = find(&mut parent, i);
            if id_of_root[r] == NOISE {
                id_of_root[r] = next;
                next += 1;
            }
            labels[i] = id_of_root[r];
        }
    }
    for i in 0..n {
        if !core[i] {
            labels[i] = (0..n)
                .filter(|&j| core[j] && within(i, j))
                .map(|j| labels[j])
                .min()
                .unwrap_or(NOISE);
        }
    }
    labels
}

/// Whether two labelings induce the same partition with the same noise set.
pub fn same_partition(a: &[i64], b: &[i64]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = std::collections::HashMap::new();
    let mut back = std::collections::HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        if (x == NOISE) != (y == NOISE) {
            return false;
        }
        if x == NOISE {
            continue;
        }
        if *fwd.entry(x).or_insert(y) != y || *back.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DbscanSummary {
    pub trials: usize,
    pub mismatches: usize,
    /// Trials whose result had at least two clusters and some noise.
    pub nontrivial: usize,
}

/// Random 2-D point sets (a few Gaussian blobs plus uniform clutter) with
/// random `eps` and `min_pts`, compared against [`reference_dbscan`].
pub fn check_dbscan(trials: usize, n_points: usize, seed: u64) -> DbscanSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = DbscanSummary {
        trials,
        mismatches: 0,
        nontrivial: 0,
    };
    for _ in 0..trials {
        let blobs: Vec<(f64, f64, f64)> = (0..rng.random_range(2..=5))
            .map(|_| {
                (
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.2..1.0),
                )
            })
            .collect();
        let points: Vec<Vec<f64>> = (0..n_points)
            .map(|_| {
                if rng.random_bool(0.2) {
                    vec![rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]
                } else {
                    let (cx, cy, r) = blobs[rng.random_range(0..blobs.len())];
                    vec![cx + rng.random_range(-r..r), cy + rng.random_range(-r..r)]
                }
            })
            .collect();
        let eps = rng.random_range(0.1..1.0);
        let min_pts = rng.random_range(1..=8);
        let got = dbscan(&points, eps, min_pts).expect("valid input");
        let want = reference_dbscan(&points, eps, min_pts);
        if !same_partition(&got, &want) {
            summary.mismatches += 1;
        }
        if got.contains(&NOISE) && got.contains(&1) {
            summary.nontrivial += 1;
        }
    }
    summary
}

/// Homogeneity from first principles: `1 − Σ_k p(k)·H(C | K = k) / H(C)` in
/// bits, counting with linear scans. Noise points are singletons.
pub fn reference_homogeneity(classes: &[u32], clusters: &[i64]) -> f64 {
    let n = classes.len() as f64;
    let h = |labels: &[u32]| -> f64 {
        let mut seen: Vec<u32> = Vec::new();
        let mut total = 0.0;
        for &c in labels {
            if seen.contains(&c) {
                continue;
            }
            seen.push(c);
            let p = labels.iter().filter(|&&x| x == c).count() as f64 / labels.len() as f64;
            total -= p * p.log2();
        }
        total
    };
    let h_c = h(classes);
    if h_c == 0.0 {
        return 1.0;
    }
    let mut done: Vec<i64> = Vec::new();
    let mut h_cond = 0.0;
    for (i, &k) in clusters.iter().enumerate() {
        if k == NOISE {
            // a singleton has zero conditional entropy
            continue;
        }
        if done.contains(&k) {
            continue;
        }
        done.push(k);
        let members: Vec<u32> = (i..clusters.len())
            .filter(|&j| clusters[j] == k)
            .map(|j| classes[j])
            .collect();
        h_cond += members.len() as f64 / n * h(&members);
    }
    1.0 - h_cond / h_c
}

/// Largest |homogeneity − reference| over random label vectors.
pub fn check_homogeneity(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.random_range(1..=60);
        let n_classes = rng.random_range(1..=5);
        let n_clusters = rng.random_range(1..=6);
        let classes: Vec<u32> = (0..n).map(|_| rng.random_range(0..n_classes)).collect();
        let clusters: Vec<i64> = (0..n).map(|_| rng.random_range(-1..n_clusters)).collect();
        let got = homogeneity(&classes, &clusters).expect("valid input");
        worst = worst.max((got - reference_homogeneity(&classes, &clusters)).abs());
    }
    worst
}

/// Number of random `(N, W, stride)` triples whose windows are wrong: count
/// other than `floor((N − W) / stride) + 1`, or starts not evenly spaced from
/// 0, or a further window would still fit.
pub fn check_windowing(triples: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..triples {
        let w = rng.random_range(1..=30);
        let n = w + rng.random_range(0..=400);
        let stride = rng.random_range(1..=12);
        let starts = clip_starts(n, w, stride).expect("n >= w");
        let expected = (n - w) / stride + 1;
        let last = *starts.last().expect("at least one clip");
        let evenly = starts.iter().enumerate().all(|(k, &s)| s == k * stride);
        if starts.len() != expected || !evenly || last + w > n || last + stride + w <= n {
            bad += 1;
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_comparison() {
        assert!(same_partition(&[0, 0, 1, -1], &[1, 1, 0, -1]));
        assert!(!same_partition(&[0, 0, 1], &[0, 1, 1]));
        assert!(!same_partition(&[0, -1], &[0, 1]));
    }

    #[test]
    fn reference_homogeneity_examples() {
        assert_eq!(reference_homogeneity(&[0, 0, 1, 1], &[0, 0, 1, 1]), 1.0);
        assert!((reference_homogeneity(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 2, 2]) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn packing_roundtrip() {
        let a = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(vec![1, 2], vec![3.0, 4.0]).unwrap();
        let (p, flat) = Packing::of(&[&a, &b]);
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.unpack(&flat), vec![a, b]);
    }
}
