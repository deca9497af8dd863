//! Corpus manifest CSV: `video_id,path,split,label,bug_ranges`.
//!
//! `bug_ranges` is empty or `start-end;start-end` with inclusive, 0-based
//! frame indices. Relative paths resolve against the manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const NORMAL_LABEL: &str = "normal";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(Error::Manifest(format!("split must be train or test, got {s:?}"))),
        }
    }
}

/// Inclusive frame range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrameRange {
    pub start: usize,
    pub end: usize,
}

impl FrameRange {
    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRow {
    pub video_id: String,
    pub path: PathBuf,
    pub split: Split,
    pub label: String,
    pub bug_ranges: Vec<FrameRange>,
}

impl ManifestRow {
    pub fn is_normal(&self) -> bool {
        self.label == NORMAL_LABEL
    }

    /// Per-frame 0/1 ground truth for a video of `n_frames`.
    pub fn frame_labels(&self, n_frames: usize) -> Vec<u8> {
        (0..n_frames)
            .map(|t| self.bug_ranges.iter().any(|r| r.contains(t)) as u8)
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusManifest {
    pub rows: Vec<ManifestRow>,
    /// Directory relative row paths are resolved against.
    pub base_dir: PathBuf,
}

pub fn format_ranges(ranges: &[FrameRange]) -> String {
    ranges
        .iter()
        .map(|r| format!("{}-{}", r.start, r.end))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_ranges(s: &str) -> Result<Vec<FrameRange>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|part| {
            let (a, b) = part
                .split_once('-')
                .ok_or_else(|| Error::Manifest(format!("bad range {part:?}, expected start-end")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Manifest(format!("bad range bound in {part:?}")))
            };
            let (start, end) = (parse(a)?, parse(b)?);
            if start > end {
                return Err(Error::Manifest(format!("range {part:?} has start after end")));
            }
            Ok(FrameRange { start, end })
        })
        .collect()
}

impl CorpusManifest {
    pub fn new(rows: Vec<ManifestRow>, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let m = CorpusManifest {
            rows,
            base_dir: base_dir.into(),
        };
        m.check_unique()?;
        Ok(m)
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.rows {
            if !seen.insert(r.video_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate video_id {:?}", r.video_id)));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, row: &ManifestRow) -> PathBuf {
        self.base_dir.join(&row.path)
    }

    pub fn get(&self, video_id: &str) -> Option<&ManifestRow> {
        self.rows.iter().find(|r| r.video_id == video_id)
    }

    pub fn filter(&self, keep: impl Fn(&ManifestRow) -> bool) -> CorpusManifest {
        CorpusManifest {
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
            base_dir: self.base_dir.clone(),
        }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Manifest(e.to_string());
        w.write_record(["video_id", "path", "split", "label", "bug_ranges"])
            .map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.video_id.as_str(),
                &r.path.to_string_lossy(),
                &r.split.to_string(),
                r.label.as_str(),
                &format_ranges(&r.bug_ranges),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Manifest(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()?).map_err(|e| Error::io(path, e))
    }

    /// Parses manifest CSV text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = r.headers().map_err(|e| Error::Manifest(e.to_string()))?.clone();
        let expected = ["video_id", "path", "split", "label", "bug_ranges"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Manifest(format!("header must be {}", expected.join(","))));
        }
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Manifest(e.to_string()))?;
            if rec.len() != 5 {
                return Err(Error::Manifest(format!("row {} has {} fields", line + 1, rec.len())));
            }
            rows.push(ManifestRow {
                video_id: rec[0].to_string(),
                path: PathBuf::from(&rec[1]),
                split: rec[2].parse()?,
                label: rec[3].to_string(),
                bug_ranges: parse_ranges(&rec[4])?,
            });
        }
        CorpusManifest::new(rows, base_dir)
    }

    /// Reads a manifest file and checks that every referenced directory exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = CorpusManifest::parse(&text, base)?;
        for row in &m.rows {
            let dir = m.resolve(row);
            if !dir.is_dir() {
                return Err(Error::io(
                    dir,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "video directory does not exist"),
                ));
            }
        }
        Ok(m)
    }
}

/// Seeded split by whole video: shuffle, then the first `ceil(n·fraction)`
/// rows (clamped so both sides are non-empty) go to train.
pub fn split_corpus(
    manifest: &CorpusManifest,
    train_fraction: f64,
    seed: u64,
) -> Result<(CorpusManifest, CorpusManifest)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = manifest.rows.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 videos to split, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    // Guard against 0.7 * 10 landing a hair above 7.
    let n_train = ((n as f64 * train_fraction) - 1e-9).ceil().clamp(1.0, (n - 1) as f64) as usize;
    let pick = |idx: &[usize], split: Split| CorpusManifest {
        rows: idx
            .iter()
            .map(|&i| ManifestRow {
                split,
                ..manifest.rows[i].clone()
            })
            .collect(),
        base_dir: manifest.base_dir.clone(),
    };
    Ok((
        pick(&order[..n_train], Split::Train),
        pick(&order[n_train..], Split::Test),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(n: usize) -> CorpusManifest {
        let rows = (0..n)
            .map(|i| ManifestRow {
                video_id: format!("v{i:02}"),
                path: PathBuf::from(format!("v{i:02}")),
                split: Split::Train,
                label: NORMAL_LABEL.into(),
                bug_ranges: vec![],
            })
            .collect();
        CorpusManifest::new(rows, "").unwrap()
    }

    #[test]
    fn seventy_thirty() {
        let (train, test) = split_corpus(&manifest(10), 0.7, 3).unwrap();
        assert_eq!((train.rows.len(), test.rows.len()), (7, 3));
        assert!(test.rows.iter().all(|r| r.split == Split::Test));
        let (again, _) = split_corpus(&manifest(10), 0.7, 3).unwrap();
        assert_eq!(train, again);
        let mut ids: Vec<_> = train
            .rows
            .iter()
            .chain(&test.rows)
            .map(|r| r.video_id.clone())
            .collect();
        ids.sort();
        assert_eq!(
            ids,
            manifest(10).rows.iter().map(|r| r.video_id.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn split_errors() {
        assert!(split_corpus(&manifest(1), 0.7, 0).is_err());
        assert!(split_corpus(&manifest(5), 1.0, 0).is_err());
        assert!(split_corpus(&manifest(5), 0.0, 0).is_err());
        let (tr, te) = split_corpus(&manifest(2), 0.7, 0).unwrap();
        assert_eq!((tr.rows.len(), te.rows.len()), (1, 1));
    }

    #[test]
    fn csv_roundtrip_and_ranges() {
        let mut m = manifest(2);
        m.rows[1].label = "black_screen".into();
        m.rows[1].split = Split::Test;
        m.rows[1].bug_ranges = vec![FrameRange { start: 3, end: 5 }, FrameRange { start: 9, end: 9 }];
        let text = m.to_csv_string().unwrap();
        assert!(text.contains("3-5;9-9"));
        assert_eq!(CorpusManifest::parse(&text, "").unwrap(), m);
        assert_eq!(m.rows[1].frame_labels(11), vec![0, 0, 0, 1, 1, 1, 0, 0, 0, 1, 0]);
    }

    #[test]
    fn rejects_duplicates_and_bad_ranges() {
        let text = "video_id,path,split,label,bug_ranges\na,a,train,normal,\na,b,test,normal,\n";
        assert!(CorpusManifest::parse(text, "").is_err());
        assert!(parse_ranges("5-3").is_err());
        assert!(parse_ranges("x").is_err());
    }

    #[test]
    fn load_checks_directories() {
        let tmp = tempfile::tempdir().unwrap();
        std::fs::create_dir(tmp.path().join("v00")).unwrap();
        let m = manifest(2);
        let p = tmp.path().join("manifest.csv");
        m.save(&p).unwrap();
        let err = CorpusManifest::load(&p).unwrap_err();
        assert!(err.to_string().contains("v01"), "{err}");
        std::fs::create_dir(tmp.path().join("v01")).unwrap();
        assert_eq!(CorpusManifest::load(&p).unwrap().rows.len(), 2);
    }
}
