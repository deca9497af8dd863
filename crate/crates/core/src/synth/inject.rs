use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{FrameRange, FrameSequence};
use crate::error::{Error, Result};

/// Intensity a boundary hole is filled with.
pub const VOID_INTENSITY: f32 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BugCategory {
    BlackScreen,
    TextureCorruption,
    BoundaryHole,
    ScreenTear,
}

impl BugCategory {
    pub const ALL: [BugCategory; 4] = [
        BugCategory::BlackScreen,
        BugCategory::TextureCorruption,
        BugCategory::BoundaryHole,
        BugCategory::ScreenTear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BugCategory::BlackScreen => "black_screen",
            BugCategory::TextureCorruption => "texture_corruption",
            BugCategory::BoundaryHole => "boundary_hole",
            BugCategory::ScreenTear => "screen_tear",
        }
    }

    pub fn is_localized(self) -> bool {
        !matches!(self, BugCategory::BlackScreen)
    }
}

impl fmt::Display for BugCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BugCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BugCategory::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown bug category {s:?}")))
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Region {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Region {
    pub fn full(height: usize, width: usize) -> Region {
        Region {
            top: 0,
            left: 0,
            height,
            width,
        }
    }

    fn check(&self, h: usize, w: usize) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.top + self.height > h || self.left + self.width > w {
            return Err(Error::InvalidArgument(format!(
                "region {}x{} at ({}, {}) does not fit a {h}x{w} frame",
                self.height, self.width, self.top, self.left
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BugInjection {
    pub category: BugCategory,
    /// First affected frame.
    pub onset: usize,
    pub duration: usize,
    /// Affected area for localized bugs; `None` picks the category default.
    pub region: Option<Region>,
    pub seed: u64,
}

impl BugInjection {
    pub fn range(&self) -> FrameRange {
        FrameRange {
            start: self.onset,
            end: self.onset + self.duration - 1,
        }
    }

    /// Region actually used on an `h × w` frame.
    pub fn effective_region(&self, h: usize, w: usize) -> Region {
        self.region.unwrap_or(match self.category {
            BugCategory::BlackScreen => Region::full(h, w),
            BugCategory::ScreenTear => Region {
                top: h / 2,
                left: 0,
                height: h - h / 2,
                width: w,
            },
            BugCategory::TextureCorruption | BugCategory::BoundaryHole => Region {
                top: h / 4,
                left: w / 4,
                height: (h / 2).max(1),
                width: (w / 2).max(1),
            },
        })
    }
}

/// Applies `injection` and returns the corrupted sequence with per-frame
/// ground truth (1 exactly on `[onset, onset + duration)`).
pub fn inject_bug(seq: &FrameSequence, injection: &BugInjection) -> Result<(FrameSequence, Vec<u8>)> {
    let n = seq.len();
    if injection.duration == 0 {
        return Err(Error::InvalidArgument("bug duration must be >= 1".into()));
    }
    if injection.onset + injection.duration > n {
        return Err(Error::InvalidArgument(format!(
            "bug window [{}, {}) exceeds the {n}-frame sequence",
            injection.onset,
            injection.onset + injection.duration
        )));
    }
    let (h, w) = (seq.height, seq.width);
    let region = injection.effective_region(h, w);
    region.check(h, w)?;

    let mut out = seq.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(injection.seed);
    for t in injection.onset..injection.onset + injection.duration {
        let px = out.frames[t].data_mut();
        let rows = region.top..region.top + region.height;
        let cols = region.left..region.left + region.width;
        match injection.category {
            BugCategory::BlackScreen => px.fill(0.0),
            BugCategory::TextureCorruption => {
                for y in rows {
                    for x in cols.clone() {
                        px[y * w + x] = rng.random::<f32>();
                    }
                }
            }
            BugCategory::BoundaryHole => {
                for y in rows {
                    px[y * w + cols.start..y * w + cols.end].fill(VOID_INTENSITY);
                }
            }
            BugCategory::ScreenTear => {
                let shift = (region.width / 2).max(1);
                for y in rows {
                    px[y * w + cols.start..y * w + cols.end].rotate_right(shift);
                }
            }
        }
    }
    let labels = (0..n).map(|t| injection.range().contains(t) as u8).collect();
    Ok((out, labels))
}
