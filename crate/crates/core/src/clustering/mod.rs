//! Fixed-length descriptors of regularity curves, DBSCAN, exemplar-based
//! cluster labelling and the homogeneity score.

mod dbscan;
mod homogeneity;

use std::collections::BTreeMap;
use std::path::Path;

pub use dbscan::{dbscan, euclidean, median, median_knn_distance, NOISE};
pub use homogeneity::homogeneity;

use crate::error::{Error, Result};
use crate::scoring::{detect_anomalies, RegularityCurve, DEFAULT_THRESHOLD};

pub const DEFAULT_RESAMPLE_LEN: usize = 128;
pub const DEFAULT_MIN_PTS: usize = 3;
/// Neighbour rank used for the default `eps`.
pub const EPS_NEIGHBOUR: usize = 4;
pub const SUMMARY_FEATURES: usize = 5;

/// Resampled curve followed by min, mean, fraction below 0.5, segment count
/// and longest segment length over curve length.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveDescriptor {
    pub values: Vec<f64>,
}

impl CurveDescriptor {
    pub fn resampled(&self) -> &[f64] {
        &self.values[..self.values.len() - SUMMARY_FEATURES]
    }

    pub fn summary(&self) -> &[f64] {
        &self.values[self.values.len() - SUMMARY_FEATURES..]
    }
}

/// Linear interpolation of `s` at `len` evenly spaced positions spanning
/// `[0, N − 1]`.
pub fn resample(s: &[f64], len: usize) -> Vec<f64> {
    let n = s.len();
    if len == 1 {
        return vec![s[0]];
    }
    (0..len)
        .map(|j| {
            let pos = j as f64 * (n - 1) as f64 / (len - 1) as f64;
            let i = (pos.floor() as usize).min(n - 2);
            let frac = pos - i as f64;
            s[i] + frac * (s[i + 1] - s[i])
        })
        .collect()
}

pub fn featurize(curve: &RegularityCurve, len: usize) -> Result<CurveDescriptor> {
    let s = &curve.scores;
    if s.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "curve {} has {} frames, at least 2 are required",
            curve.video_id,
            s.len()
        )));
    }
    if len < 2 {
        return Err(Error::InvalidArgument("resample length must be >= 2".into()));
    }
    let n = s.len() as f64;
    let segments = detect_anomalies(s, DEFAULT_THRESHOLD)?;
    let mut values = resample(s, len);
    values.push(s.iter().copied().fold(f64::INFINITY, f64::min));
    values.push(s.iter().sum::<f64>() / n);
    values.push(s.iter().filter(|&&v| v < DEFAULT_THRESHOLD).count() as f64 / n);
    values.push(segments.len() as f64);
    values.push(segments.iter().map(|g| g.len()).max().unwrap_or(0) as f64 / n);
    Ok(CurveDescriptor { values })
}

/// A pre-labelled descriptor used to name clusters.
#[derive(Clone, Debug, PartialEq)]
pub struct Exemplar {
    pub category: String,
    pub descriptor: CurveDescriptor,
}

/// Names every non-noise cluster after the category whose closest exemplar
/// has the smallest median distance to the cluster's members. Ties go to the
/// lexicographically smallest category.
pub fn label_clusters(
    descriptors: &[CurveDescriptor],
    cluster_ids: &[i64],
    exemplars: &[Exemplar],
) -> Result<BTreeMap<i64, String>> {
    if exemplars.is_empty() {
        return Err(Error::InvalidArgument("no exemplars to label clusters with".into()));
    }
    if descriptors.len() != cluster_ids.len() {
        return Err(Error::InvalidArgument(
            "one cluster id per descriptor is required".into(),
        ));
    }
    let mut members: BTreeMap<i64, Vec<&CurveDescriptor>> = BTreeMap::new();
    for (d, &k) in descriptors.iter().zip(cluster_ids) {
        if k != NOISE {
            members.entry(k).or_default().push(d);
        }
    }
    let mut out = BTreeMap::new();
    for (k, ms) in members {
        let mut best: Option<(f64, &str)> = None;
        for ex in exemplars {
            if ex.descriptor.values.len() != ms[0].values.len() {
                return Err(Error::shape(
                    "label_clusters",
                    "exemplar and curve descriptors differ in length",
                ));
            }
            let mut d: Vec<f64> = ms.iter().map(|m| euclidean(&m.values, &ex.descriptor.values)).collect();
            let med = median(&mut d);
            let better = match best {
                None => true,
                Some((bd, bc)) => med < bd || (med == bd && ex.category.as_str() < bc),
            };
            if better {
                best = Some((med, &ex.category));
            }
        }
        out.insert(k, best.expect("exemplars non-empty").1.to_string());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterParams {
    /// `None` picks the median distance to the 4th nearest neighbour.
    pub eps: Option<f64>,
    pub min_pts: usize,
    pub resample_len: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            eps: None,
            min_pts: DEFAULT_MIN_PTS,
            resample_len: DEFAULT_RESAMPLE_LEN,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub video_id: String,
    pub cluster_id: i64,
    /// Empty for noise points.
    pub assigned_category: String,
    pub true_label: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterReport {
    pub rows: Vec<ReportRow>,
    pub eps: f64,
    pub min_pts: usize,
    pub homogeneity: f64,
}

/// Featurizes, clusters and labels `curves`; `true_labels[i]` is the ground
/// truth category of `curves[i]`.
pub fn cluster_curves(
    curves: &[RegularityCurve],
    true_labels: &[String],
    exemplars: &[Exemplar],
    params: &ClusterParams,
) -> Result<ClusterReport> {
    if curves.len() != true_labels.len() {
        return Err(Error::InvalidArgument("one true label per curve is required".into()));
    }
    if curves.len() < 2 {
        return Err(Error::InvalidArgument("clustering needs at least 2 curves".into()));
    }
    let descriptors = curves
        .iter()
        .map(|c| featurize(c, params.resample_len))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<Vec<f64>> = descriptors.iter().map(|d| d.values.clone()).collect();
    let eps = match params.eps {
        Some(e) => e,
        None => median_knn_distance(&points, EPS_NEIGHBOUR)?,
    };
    if eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps resolved to {eps}; set it explicitly for duplicate-heavy inputs"
        )));
    }
    let ids = dbscan(&points, eps, params.min_pts)?;
    let names = label_clusters(&descriptors, &ids, exemplars)?;
    let h = homogeneity(true_labels, &ids)?;
    let rows = curves
        .iter()
        .zip(&ids)
        .zip(true_labels)
        .map(|((c, &k), t)| ReportRow {
            video_id: c.video_id.clone(),
            cluster_id: k,
            assigned_category: names.get(&k).cloned().unwrap_or_default(),
            true_label: t.clone(),
        })
        .collect();
    Ok(ClusterReport {
        rows,
        eps,
        min_pts: params.min_pts,
        homogeneity: h,
    })
}

pub const REPORT_HEADER: [&str; 4] = ["video_id", "cluster_id", "assigned_category", "true_label"];

impl ClusterReport {
    /// Homogeneity recomputed from the rows.
    pub fn recompute_homogeneity(&self) -> Result<f64> {
        let classes: Vec<&str> = self.rows.iter().map(|r| r.true_label.as_str()).collect();
        let ids: Vec<i64> = self.rows.iter().map(|r| r.cluster_id).collect();
        homogeneity(&classes, &ids)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::InvalidArgument(e.to_string());
        w.write_record(REPORT_HEADER).map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.video_id.as_str(),
                &r.cluster_id.to_string(),
                &r.assigned_category,
                &r.true_label,
            ])
            .map_err(err)?;
        }
        let mut text = String::from_utf8(w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?)
            .expect("csv output is UTF-8");
        text.push_str(&format!(
            "# homogeneity={} eps={} min_pts={}\n",
            self.homogeneity, self.eps, self.min_pts
        ));
        Ok(text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut footer = BTreeMap::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                for kv in rest.split_whitespace() {
                    if let Some((k, v)) = kv.split_once('=') {
                        footer.insert(k.to_string(), v.to_string());
                    }
                }
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let headers = r.headers().map_err(|e| Error::csv(path, e))?;
        if headers.iter().collect::<Vec<_>>() != REPORT_HEADER {
            return Err(Error::csv(path, format!("header must be {}", REPORT_HEADER.join(","))));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            rows.push(ReportRow {
                video_id: rec[0].to_string(),
                cluster_id: rec[1]
                    .parse()
                    .map_err(|_| Error::csv(path, format!("bad cluster id {:?}", &rec[1])))?,
                assigned_category: rec[2].to_string(),
                true_label: rec[3].to_string(),
            });
        }
        let num = |k: &str| footer.get(k).and_then(|v| v.parse::<f64>().ok());
        let mut report = ClusterReport {
            rows,
            eps: num("eps").unwrap_or(f64::NAN),
            min_pts: num("min_pts").map(|v| v as usize).unwrap_or(0),
            homogeneity: 0.0,
        };
        report.homogeneity = match num("homogeneity") {
            Some(h) => h,
            None => report.recompute_homogeneity()?,
        };
        Ok(report)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}
