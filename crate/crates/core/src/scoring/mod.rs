//! Per-frame reconstruction error, regularity scores, anomaly segments and
//! their CSV/SVG output.

mod plot;

use std::path::Path;

use crate::data::{clip_starts, make_clip, FrameSequence};
use crate::error::{Error, Result};
use crate::model::{self, ModelCheckpoint};
use crate::numerics::Tensor;

pub use plot::{render_plot, write_plot};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Dips separated by at most this many frames form one segment.
pub const MERGE_GAP: usize = 2;

/// Anything that maps a `[W, 1, H, W']` clip to a reconstruction of the same
/// shape.
pub trait Reconstructor {
    fn reconstruct(&self, clip: &Tensor<f32>) -> Result<Tensor<f32>>;
}

impl Reconstructor for ModelCheckpoint {
    fn reconstruct(&self, clip: &Tensor<f32>) -> Result<Tensor<f32>> {
        model::forward(self, clip)
    }
}

/// Returns every clip unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityReconstructor;

impl Reconstructor for IdentityReconstructor {
    fn reconstruct(&self, clip: &Tensor<f32>) -> Result<Tensor<f32>> {
        Ok(clip.clone())
    }
}

/// Start frames of the clips that are scored. With `stride > 1` a final clip
/// ending at the last frame is added so every frame is covered.
pub fn scoring_starts(len: usize, window: usize, stride: usize) -> Result<Vec<usize>> {
    let mut starts = clip_starts(len, window, stride)?;
    let last = len - window;
    if starts.last() != Some(&last) {
        starts.push(last);
    }
    Ok(starts)
}

/// `e(t)`: mean, over every scored clip containing frame `t`, of that frame's
/// mean squared reconstruction error.
pub fn frame_errors<R: Reconstructor + ?Sized>(
    model: &R,
    seq: &FrameSequence,
    window: usize,
    stride: usize,
) -> Result<Vec<f64>> {
    let n = seq.len();
    let mut sum = vec![0.0f64; n];
    let mut count = vec![0usize; n];
    for start in scoring_starts(n, window, stride)? {
        let clip = make_clip(seq, start, window);
        let recon = model.reconstruct(&clip.tensor)?;
        if recon.shape() != clip.tensor.shape() {
            return Err(Error::shape(
                "frame_errors",
                format!(
                    "reconstruction {:?} differs from clip {:?}",
                    recon.shape(),
                    clip.tensor.shape()
                ),
            ));
        }
        for k in 0..window {
            let (x, y) = (clip.tensor.outer(k), recon.outer(k));
            let se: f64 = x.iter().zip(y).map(|(&a, &b)| ((a - b) as f64).powi(2)).sum();
            sum[start + k] += se / x.len() as f64;
            count[start + k] += 1;
        }
    }
    let e: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    if let Some(t) = e.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("reconstruction error of frame {t}")));
    }
    Ok(e)
}

/// `s(t) = 1 − (e(t) − min e) / (max e − min e)`, or all ones for constant `e`.
pub fn regularity_score(e: &[f64]) -> Result<Vec<f64>> {
    if e.is_empty() {
        return Err(Error::InvalidArgument("error series is empty".into()));
    }
    if let Some(t) = e.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("error of frame {t} is {}", e[t])));
    }
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(vec![1.0; e.len()]);
    }
    let range = hi - lo;
    Ok(e.iter().map(|&v| 1.0 - (v - lo) / range).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityCurve {
    pub video_id: String,
    pub errors: Vec<f64>,
    pub scores: Vec<f64>,
}

impl RegularityCurve {
    pub fn from_errors(video_id: impl Into<String>, errors: Vec<f64>) -> Result<Self> {
        let scores = regularity_score(&errors)?;
        Ok(RegularityCurve {
            video_id: video_id.into(),
            errors,
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

pub fn score_video<R: Reconstructor + ?Sized>(
    model: &R,
    seq: &FrameSequence,
    window: usize,
    stride: usize,
) -> Result<RegularityCurve> {
    RegularityCurve::from_errors(seq.video_id.clone(), frame_errors(model, seq, window, stride)?)
}

/// Inclusive run of frames scored below `threshold`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnomalySegment {
    pub start: usize,
    pub end: usize,
    pub min_score: f64,
    pub threshold: f64,
}

impl AnomalySegment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Maximal runs of `s < threshold`, merging runs at most [`MERGE_GAP`]
/// frames apart.
pub fn detect_anomalies(s: &[f64], threshold: f64) -> Result<Vec<AnomalySegment>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let mut out: Vec<AnomalySegment> = Vec::new();
    for (t, &v) in s.iter().enumerate() {
        if v >= threshold {
            continue;
        }
        match out.last_mut() {
            Some(seg) if t - seg.end - 1 <= MERGE_GAP => {
                seg.end = t;
                seg.min_score = seg.min_score.min(v);
            }
            _ => out.push(AnomalySegment {
                start: t,
                end: t,
                min_score: v,
                threshold,
            }),
        }
    }
    Ok(out)
}

/// Area under the ROC curve of `scores` (higher means more anomalous)
/// against 0/1 `labels`, with tied scores counted as half. `None` when either
/// class is absent.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "one label per score");
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Mann-Whitney U from average ranks
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] != 0 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let n_pos = labels.iter().filter(|&&l| l != 0).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return None;
    }
    Some((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

pub const CURVE_CSV_HEADER: [&str; 3] = ["frame_index", "error", "regularity"];

pub fn curve_to_csv(curve: &RegularityCurve) -> String {
    let mut out = CURVE_CSV_HEADER.join(",");
    out.push('\n');
    for (t, (e, s)) in curve.errors.iter().zip(&curve.scores).enumerate() {
        out.push_str(&format!("{t},{e},{s}\n"));
    }
    out
}

pub fn write_curve_csv(curve: &RegularityCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, curve_to_csv(curve)).map_err(|e| Error::io(path, e))
}

/// Reads a curve CSV; the video id is the file stem.
pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<RegularityCurve> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let video_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_curve_csv(&text, video_id, path)
}

pub fn parse_curve_csv(text: &str, video_id: impl Into<String>, path: &Path) -> Result<RegularityCurve> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| Error::csv(path, e))?;
    if headers.iter().collect::<Vec<_>>() != CURVE_CSV_HEADER {
        return Err(Error::csv(
            path,
            format!("header must be {}", CURVE_CSV_HEADER.join(",")),
        ));
    }
    let (mut errors, mut scores) = (Vec::new(), Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let field = |i: usize| -> Result<&str> {
            rec.get(i)
                .ok_or_else(|| Error::csv(path, format!("row {} is missing a field", row + 1)))
        };
        let index: usize = field(0)?
            .parse()
            .map_err(|_| Error::csv(path, format!("row {}: bad frame index", row + 1)))?;
        if index != row {
            return Err(Error::csv(path, format!("row {} has frame index {index}", row + 1)));
        }
        let num = |i: usize| -> Result<f64> {
            field(i)?
                .parse()
                .map_err(|_| Error::csv(path, format!("row {}: bad number {:?}", row + 1, rec.get(i))))
        };
        errors.push(num(1)?);
        scores.push(num(2)?);
    }
    if errors.is_empty() {
        return Err(Error::csv(path, "no rows"));
    }
    Ok(RegularityCurve {
        video_id: video_id.into(),
        errors,
        scores,
    })
}
