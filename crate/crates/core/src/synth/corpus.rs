use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{split_corpus, write_frames, CorpusManifest, FrameSequence, ManifestRow, Split, NORMAL_LABEL};
use crate::error::{Error, Result};
use crate::synth::inject::{inject_bug, BugCategory, BugInjection, Region};
use crate::synth::scene::{render_normal, SceneSpec};

/// Subdirectory of the corpus root holding one folder per video.
pub const VIDEOS_DIR: &str = "videos";
pub const MANIFEST_FILE: &str = "manifest.csv";
/// Manifest of the pre-labelled exemplar videos, next to `MANIFEST_FILE`.
pub const EXEMPLARS_FILE: &str = "exemplars.csv";

/// Sizes and seeds of a synthetic corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusPlan {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub normal_videos: usize,
    pub normal_frames: usize,
    pub categories: Vec<BugCategory>,
    pub videos_per_category: usize,
    pub buggy_frames: usize,
    /// Share of normal videos assigned to training; buggy videos are always test.
    pub train_fraction: f64,
    /// Extra labelled buggy videos per category, drawn from an independent
    /// stream and kept out of the main manifest.
    pub exemplars_per_category: usize,
}

impl Default for CorpusPlan {
    fn default() -> Self {
        CorpusPlan {
            seed: 7,
            height: 32,
            width: 32,
            normal_videos: 30,
            normal_frames: 100,
            categories: vec![
                BugCategory::BlackScreen,
                BugCategory::TextureCorruption,
                BugCategory::BoundaryHole,
            ],
            videos_per_category: 10,
            buggy_frames: 60,
            train_fraction: 0.7,
            exemplars_per_category: 1,
        }
    }
}

/// Typical bug length for a category in an `n`-frame video.
pub fn default_duration(category: BugCategory, n: usize) -> usize {
    let d = match category {
        BugCategory::BlackScreen => n / 20,
        BugCategory::TextureCorruption => n / 6,
        BugCategory::BoundaryHole => 2 * n / 5,
        BugCategory::ScreenTear => n / 4,
    };
    d.clamp(1, n)
}

/// Draws an injection centred in the video with a little onset jitter and,
/// for localized bugs, a randomly placed region.
pub fn plan_injection(category: BugCategory, n_frames: usize, h: usize, w: usize, seed: u64) -> BugInjection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = default_duration(category, n_frames);
    let centre = (n_frames - duration) / 2;
    let jitter = rng.random_range(-2i64..=2);
    let onset = (centre as i64 + jitter).clamp(0, (n_frames - duration) as i64) as usize;
    let mut sized = |lo: f64, hi: f64| {
        let rh = ((h as f64 * rng.random_range(lo..hi)).round() as usize).clamp(1, h);
        let rw = ((w as f64 * rng.random_range(lo..hi)).round() as usize).clamp(1, w);
        Region {
            top: rng.random_range(0..=h - rh),
            left: rng.random_range(0..=w - rw),
            height: rh,
            width: rw,
        }
    };
    let region = match category {
        BugCategory::BlackScreen => None,
        BugCategory::TextureCorruption => Some(sized(0.4, 0.6)),
        BugCategory::BoundaryHole => Some(sized(0.5, 0.7)),
        BugCategory::ScreenTear => {
            let top = rng.random_range(h / 3..=(2 * h / 3).max(h / 3));
            Some(Region {
                top,
                left: 0,
                height: h - top,
                width: w,
            })
        }
    };
    BugInjection {
        category,
        onset,
        duration,
        region,
        seed: rng.random(),
    }
}

/// One rendered corpus video.
#[derive(Clone, Debug)]
pub struct CorpusVideo {
    pub row: ManifestRow,
    pub frames: FrameSequence,
}

/// Renders every video of `plan` in memory. Rows carry paths relative to
/// the corpus root.
pub fn render_corpus(plan: &CorpusPlan) -> Result<Vec<CorpusVideo>> {
    if plan.normal_videos < 2 {
        return Err(Error::InvalidArgument("a corpus needs at least 2 normal videos".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut videos = Vec::new();

    let mut normal_rows = Vec::new();
    for k in 0..plan.normal_videos {
        let id = format!("normal_{k:03}");
        let scene = SceneSpec::random(rng.random(), plan.height, plan.width);
        let mut frames = render_normal(&scene, plan.normal_frames)?;
        frames.video_id = id.clone();
        normal_rows.push(ManifestRow {
            video_id: id.clone(),
            path: Path::new(VIDEOS_DIR).join(&id),
            split: Split::Train,
            label: NORMAL_LABEL.into(),
            bug_ranges: vec![],
        });
        videos.push(CorpusVideo {
            row: normal_rows[k].clone(),
            frames,
        });
    }
    let (train, _) = split_corpus(&CorpusManifest::new(normal_rows, "")?, plan.train_fraction, plan.seed)?;
    for v in &mut videos {
        if train.get(&v.row.video_id).is_none() {
            v.row.split = Split::Test;
        }
    }

    for &category in &plan.categories {
        for k in 0..plan.videos_per_category {
            videos.push(buggy_video(plan, category, format!("{category}_{k:03}"), &mut rng)?);
        }
    }
    Ok(videos)
}

fn buggy_video(plan: &CorpusPlan, category: BugCategory, id: String, rng: &mut ChaCha8Rng) -> Result<CorpusVideo> {
    let scene = SceneSpec::random(rng.random(), plan.height, plan.width);
    let clean = render_normal(&scene, plan.buggy_frames)?;
    let injection = plan_injection(category, plan.buggy_frames, plan.height, plan.width, rng.random());
    let (mut frames, _) = inject_bug(&clean, &injection)?;
    frames.video_id = id.clone();
    Ok(CorpusVideo {
        row: ManifestRow {
            path: Path::new(VIDEOS_DIR).join(&id),
            video_id: id,
            split: Split::Test,
            label: category.name().into(),
            bug_ranges: vec![injection.range()],
        },
        frames,
    })
}

/// Renders the pre-labelled exemplar videos of `plan`, named
/// `exemplar_{category}_{k}`.
pub fn render_exemplars(plan: &CorpusPlan) -> Result<Vec<CorpusVideo>> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x6578_656d_706c_6172);
    let mut videos = Vec::new();
    for &category in &plan.categories {
        for k in 0..plan.exemplars_per_category {
            videos.push(buggy_video(
                plan,
                category,
                format!("exemplar_{category}_{k:03}"),
                &mut rng,
            )?);
        }
    }
    Ok(videos)
}

fn write_videos(videos: Vec<CorpusVideo>, out_dir: &Path, file: &str) -> Result<CorpusManifest> {
    let mut rows = Vec::with_capacity(videos.len());
    for v in videos {
        write_frames(&v.frames, out_dir.join(&v.row.path))?;
        rows.push(v.row);
    }
    let manifest = CorpusManifest::new(rows, PathBuf::from(out_dir))?;
    manifest.save(out_dir.join(file))?;
    Ok(manifest)
}

/// Renders the corpus, writes PGM frame folders under `out_dir/videos/` and
/// `out_dir/manifest.csv`, and returns the manifest. Exemplar videos, if the
/// plan asks for any, go to `out_dir/exemplars.csv`.
pub fn make_labeled_corpus(plan: &CorpusPlan, out_dir: impl AsRef<Path>) -> Result<CorpusManifest> {
    let out_dir = out_dir.as_ref();
    let manifest = write_videos(render_corpus(plan)?, out_dir, MANIFEST_FILE)?;
    if plan.exemplars_per_category > 0 && !plan.categories.is_empty() {
        write_videos(render_exemplars(plan)?, out_dir, EXEMPLARS_FILE)?;
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations_by_category() {
        assert_eq!(default_duration(BugCategory::BlackScreen, 60), 3);
        assert_eq!(default_duration(BugCategory::TextureCorruption, 60), 10);
        assert_eq!(default_duration(BugCategory::BoundaryHole, 60), 24);
        assert_eq!(default_duration(BugCategory::BlackScreen, 10), 1);
    }

    #[test]
    fn planned_injections_fit() {
        for c in BugCategory::ALL {
            for seed in 0..50 {
                let inj = plan_injection(c, 40, 16, 24, seed);
                assert!(inj.onset + inj.duration <= 40);
                let r = inj.effective_region(16, 24);
                assert!(r.top + r.height <= 16 && r.left + r.width <= 24, "{c} {r:?}");
            }
        }
    }
}
