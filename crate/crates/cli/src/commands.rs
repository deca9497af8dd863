//! The pipeline stages. Files are the only interface between stages.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use glitchguard_core::clustering::{
    cluster_curves, dbscan, featurize, homogeneity, median_knn_distance, ClusterParams, ClusterReport, Exemplar,
    EPS_NEIGHBOUR, NOISE,
};
use glitchguard_core::data::{load_frames, to_clips, CorpusManifest, FrameSequence, ManifestRow, Split};
use glitchguard_core::model::{init_params, load_checkpoint, save_checkpoint, train_with_progress, ModelCheckpoint};
use glitchguard_core::scoring::{
    detect_anomalies, read_curve_csv, roc_auc, score_video, write_curve_csv, write_plot, RegularityCurve,
};
use glitchguard_core::synth::{make_labeled_corpus, EXEMPLARS_FILE, MANIFEST_FILE};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Steps between training progress lines.
const LOG_EVERY: u64 = 100;

pub fn log(stage: &str, msg: impl AsRef<str>) {
    eprintln!("[{stage}] {}", msg.as_ref());
}

/// Logs the resolved configuration and its digest.
pub fn log_config(cfg: &RunConfig) {
    for line in cfg.to_text().lines() {
        log("config", line);
    }
    log("config", format!("sha256 = {}", cfg.digest()));
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn require(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::missing(path))
    }
}

fn load_manifest(path: &Path) -> CliResult<CorpusManifest> {
    require(path)?;
    Ok(CorpusManifest::load(path)?)
}

fn load_video(manifest: &CorpusManifest, row: &ManifestRow, cfg: &RunConfig) -> CliResult<FrameSequence> {
    let dir = manifest.resolve(row);
    require(&dir)?;
    let mut seq = load_frames(&dir)?;
    if (seq.height, seq.width) != (cfg.frame_height, cfg.frame_width) {
        return Err(CliError::config(format!(
            "video {} is {}x{} but frame_height x frame_width is {}x{}",
            row.video_id, seq.height, seq.width, cfg.frame_height, cfg.frame_width
        )));
    }
    seq.video_id = row.video_id.clone();
    Ok(seq)
}

/// Writes the synthetic corpus (`manifest.csv`, `exemplars.csv`, `videos/`).
pub fn cmd_gen(cfg: &RunConfig, out_dir: &Path) -> CliResult<CorpusManifest> {
    let manifest = make_labeled_corpus(&cfg.corpus_plan(), out_dir)?;
    let train = manifest.rows.iter().filter(|r| r.split == Split::Train).count();
    log(
        "gen",
        format!(
            "{} videos ({train} train) written to {}",
            manifest.rows.len(),
            out_dir.display()
        ),
    );
    Ok(manifest)
}

/// Loss history path written next to a checkpoint: `model.ckpt` gives
/// `model.loss.csv`.
pub fn loss_csv_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("loss.csv")
}

/// Trains on the manifest's train split and writes the checkpoint plus its
/// loss history.
pub fn cmd_train(cfg: &RunConfig, manifest_path: &Path, out: &Path) -> CliResult<(ModelCheckpoint, Vec<f32>)> {
    let manifest = load_manifest(manifest_path)?;
    let window = cfg.model.window;
    let mut clips = Vec::new();
    let mut frames = 0;
    for row in manifest.rows.iter().filter(|r| r.split == Split::Train) {
        let seq = load_video(&manifest, row, cfg)?;
        frames += seq.len();
        clips.extend(to_clips(&seq, window, 1)?);
    }
    log("train", format!("{frames} training frames, {} clips", clips.len()));
    let init = init_params(&cfg.model_config())?;
    let started = Instant::now();
    let (trained, history) = train_with_progress(&init, &clips, &cfg.train, |step, loss| {
        if step % LOG_EVERY == 0 || step + 1 == cfg.train.max_steps {
            log(
                "train",
                format!("step {step} loss {loss:.6} ({:.1}s)", started.elapsed().as_secs_f64()),
            );
        }
    })?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_checkpoint(&trained, out)?;
    let mut csv = String::from("step,loss\n");
    for (i, l) in history.iter().enumerate() {
        writeln!(csv, "{i},{l}").expect("write to string");
    }
    write_text(&loss_csv_path(out), &csv)?;
    log("train", format!("checkpoint written to {}", out.display()));
    Ok((trained, history))
}

/// Scores every test-split video of the manifest and writes
/// `<out_dir>/<video_id>.csv`.
pub fn cmd_score(
    cfg: &RunConfig,
    checkpoint_path: &Path,
    manifest_path: &Path,
    out_dir: &Path,
) -> CliResult<Vec<RegularityCurve>> {
    require(checkpoint_path)?;
    let checkpoint = load_checkpoint(checkpoint_path)?;
    let manifest = load_manifest(manifest_path)?;
    create_dir(out_dir)?;
    let window = checkpoint.config.window;
    let mut curves = Vec::new();
    for row in manifest.rows.iter().filter(|r| r.split == Split::Test) {
        let seq = load_video(&manifest, row, cfg)?;
        let curve = score_video(&checkpoint, &seq, window, cfg.stride)?;
        write_curve_csv(&curve, curve_path(out_dir, &row.video_id))?;
        curves.push(curve);
    }
    log(
        "score",
        format!("{} curves written to {}", curves.len(), out_dir.display()),
    );
    Ok(curves)
}

pub fn curve_path(dir: &Path, video_id: &str) -> PathBuf {
    dir.join(format!("{video_id}.csv"))
}

fn load_curve(dir: &Path, video_id: &str) -> CliResult<RegularityCurve> {
    let path = curve_path(dir, video_id);
    require(&path)?;
    Ok(read_curve_csv(&path)?)
}

/// Renders one curve as SVG, shading segments below the threshold of
/// `category` (or `score.threshold`).
pub fn cmd_plot(cfg: &RunConfig, curve_csv: &Path, out: &Path, category: Option<&str>) -> CliResult<()> {
    require(curve_csv)?;
    let curve = read_curve_csv(curve_csv)?;
    let segments = detect_anomalies(&curve.scores, cfg.threshold_for(category))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_plot(&curve, &segments, out)?;
    log("plot", format!("{} ({} segments)", out.display(), segments.len()));
    Ok(())
}

/// Clusters the curves of every buggy video in the manifest and labels the
/// clusters with the exemplar curves.
pub fn cmd_cluster(
    cfg: &RunConfig,
    curves_dir: &Path,
    manifest_path: &Path,
    exemplars_path: &Path,
    out: &Path,
) -> CliResult<ClusterReport> {
    require(curves_dir)?;
    let manifest = load_manifest(manifest_path)?;
    let exemplar_rows = load_manifest(exemplars_path)?;
    let mut curves = Vec::new();
    let mut labels = Vec::new();
    for row in manifest.rows.iter().filter(|r| !r.is_normal()) {
        curves.push(load_curve(curves_dir, &row.video_id)?);
        labels.push(row.label.clone());
    }
    let mut exemplars = Vec::new();
    for row in &exemplar_rows.rows {
        let curve = load_curve(curves_dir, &row.video_id)?;
        exemplars.push(Exemplar {
            category: row.label.clone(),
            descriptor: featurize(&curve, cfg.cluster.resample_len)?,
        });
    }
    let report = cluster_curves(&curves, &labels, &exemplars, &cfg.cluster)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    report.save(out)?;
    log(
        "cluster",
        format!(
            "{} curves, eps {:.6}, homogeneity {:.6}",
            report.rows.len(),
            report.eps,
            report.homogeneity
        ),
    );
    Ok(report)
}

/// Homogeneity with one category left out, under both readings of "removal".
#[derive(Clone, Debug, PartialEq)]
pub struct RemovalScore {
    pub category: String,
    /// The category's rows dropped from the existing clustering.
    pub after_clustering: f64,
    /// The category's curves dropped before clustering again.
    pub reclustered: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoryDetection {
    pub category: String,
    pub videos: usize,
    pub threshold: f64,
    /// Frame-level ROC AUC of `1 - RS` within this category's videos.
    pub auc: Option<f64>,
    /// Largest, over bug ranges, of the minimum RS inside the range.
    pub worst_min_rs: f64,
    /// Share of bug ranges overlapped by a detected segment.
    pub segment_recall: f64,
    /// Share of bug-free frames inside a detected segment.
    pub false_alarm_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub overall_auc: Option<f64>,
    pub categories: Vec<CategoryDetection>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub homogeneity: f64,
    pub eps: f64,
    pub min_pts: usize,
    pub clusters: usize,
    pub noise: usize,
    pub removal: Vec<RemovalScore>,
    pub detection: Option<Detection>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or("n/a".to_string(), |x| format!("{x:.6}"))
}

impl EvalSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        writeln!(w, "homogeneity = {:.6}", self.homogeneity).unwrap();
        writeln!(w, "eps = {:.6}", self.eps).unwrap();
        writeln!(w, "min_pts = {}", self.min_pts).unwrap();
        writeln!(w, "clusters = {}", self.clusters).unwrap();
        writeln!(w, "noise = {}", self.noise).unwrap();
        writeln!(w, "# homogeneity with one category removed (informational)").unwrap();
        for r in &self.removal {
            writeln!(
                w,
                "without {}: after_clustering = {:.6} reclustered = {}",
                r.category,
                r.after_clustering,
                opt(r.reclustered)
            )
            .unwrap();
        }
        if let Some(d) = &self.detection {
            writeln!(w, "# frame-level detection").unwrap();
            writeln!(w, "overall_auc = {}", opt(d.overall_auc)).unwrap();
            for c in &d.categories {
                writeln!(
                    w,
                    "{}: videos = {} auc = {} threshold = {} segment_recall = {:.6} false_alarm_rate = {:.6} worst_min_rs = {:.6}",
                    c.category,
                    c.videos,
                    opt(c.auc),
                    c.threshold,
                    c.segment_recall,
                    c.false_alarm_rate,
                    c.worst_min_rs
                )
                .unwrap();
            }
        }
        s
    }
}

/// DBSCAN ids of `curves` under `params`, with the default eps rule.
fn recluster(curves: &[&RegularityCurve], params: &ClusterParams) -> CliResult<Vec<i64>> {
    let points = curves
        .iter()
        .map(|c| featurize(c, params.resample_len).map(|d| d.values))
        .collect::<Result<Vec<_>, _>>()?;
    let eps = match params.eps {
        Some(e) => e,
        None => median_knn_distance(&points, EPS_NEIGHBOUR)?,
    };
    if eps <= 0.0 {
        return Err(CliError::config("default eps is 0; set cluster.eps"));
    }
    Ok(dbscan(&points, eps, params.min_pts)?)
}

fn detection_summary(cfg: &RunConfig, curves: &[(ManifestRow, RegularityCurve)]) -> CliResult<Detection> {
    let mut all_scores = Vec::new();
    let mut all_labels = Vec::new();
    let mut categories: Vec<String> = curves.iter().map(|(r, _)| r.label.clone()).collect();
    categories.sort();
    categories.dedup();
    let mut out = Vec::new();
    for category in categories {
        let threshold = cfg.threshold_for(Some(&category));
        let (mut scores, mut labels) = (Vec::new(), Vec::new());
        let (mut ranges, mut hit, mut clean, mut alarms) = (0usize, 0usize, 0usize, 0usize);
        let mut worst_min_rs: f64 = 0.0;
        let mut videos = 0;
        for (row, curve) in curves.iter().filter(|(r, _)| r.label == category) {
            videos += 1;
            let frame_labels = row.frame_labels(curve.len());
            let segments = detect_anomalies(&curve.scores, threshold)?;
            for r in &row.bug_ranges {
                ranges += 1;
                if segments.iter().any(|g| g.start <= r.end && r.start <= g.end) {
                    hit += 1;
                }
                let lo = (r.start..=r.end.min(curve.len() - 1))
                    .map(|t| curve.scores[t])
                    .fold(f64::INFINITY, f64::min);
                worst_min_rs = worst_min_rs.max(lo);
            }
            for (t, &l) in frame_labels.iter().enumerate() {
                if l == 0 {
                    clean += 1;
                    if segments.iter().any(|g| g.start <= t && t <= g.end) {
                        alarms += 1;
                    }
                }
            }
            scores.extend(curve.scores.iter().map(|s| 1.0 - s));
            labels.extend(frame_labels);
        }
        all_scores.extend(&scores);
        all_labels.extend(&labels);
        out.push(CategoryDetection {
            category,
            videos,
            threshold,
            auc: roc_auc(&scores, &labels),
            worst_min_rs,
            segment_recall: if ranges == 0 { 1.0 } else { hit as f64 / ranges as f64 },
            false_alarm_rate: if clean == 0 { 0.0 } else { alarms as f64 / clean as f64 },
        });
    }
    Ok(Detection {
        overall_auc: roc_auc(&all_scores, &all_labels),
        categories: out,
    })
}

/// Summarizes a cluster report: homogeneity, the two category-removal
/// readings and, when curves and the manifest are given, frame-level
/// detection quality. Writes the summary to `out`.
pub fn cmd_eval(
    cfg: &RunConfig,
    report_path: &Path,
    curves: Option<(&Path, &Path)>,
    out: &Path,
) -> CliResult<EvalSummary> {
    require(report_path)?;
    let report = ClusterReport::load(report_path)?;
    let h = report.recompute_homogeneity()?;
    let mut categories: Vec<String> = report.rows.iter().map(|r| r.true_label.clone()).collect();
    categories.sort();
    categories.dedup();

    let mut scored: Option<Vec<(ManifestRow, RegularityCurve)>> = None;
    if let Some((dir, manifest_path)) = curves {
        require(dir)?;
        let manifest = load_manifest(manifest_path)?;
        let mut v = Vec::new();
        for row in manifest.rows.iter().filter(|r| !r.is_normal()) {
            v.push((row.clone(), load_curve(dir, &row.video_id)?));
        }
        scored = Some(v);
    }

    let mut removal = Vec::new();
    if categories.len() > 1 {
        for c in &categories {
            let kept: Vec<_> = report.rows.iter().filter(|r| &r.true_label != c).collect();
            let classes: Vec<&str> = kept.iter().map(|r| r.true_label.as_str()).collect();
            let ids: Vec<i64> = kept.iter().map(|r| r.cluster_id).collect();
            let after_clustering = homogeneity(&classes, &ids)?;
            let reclustered = match &scored {
                Some(v) => {
                    let rest: Vec<_> = v.iter().filter(|(r, _)| &r.label != c).collect();
                    if rest.len() < 2 {
                        None
                    } else {
                        let ids = recluster(&rest.iter().map(|(_, k)| k).collect::<Vec<_>>(), &cfg.cluster)?;
                        let classes: Vec<&str> = rest.iter().map(|(r, _)| r.label.as_str()).collect();
                        Some(homogeneity(&classes, &ids)?)
                    }
                }
                None => None,
            };
            removal.push(RemovalScore {
                category: c.clone(),
                after_clustering,
                reclustered,
            });
        }
    }

    let mut ids: Vec<i64> = report
        .rows
        .iter()
        .map(|r| r.cluster_id)
        .filter(|&k| k != NOISE)
        .collect();
    ids.sort();
    ids.dedup();
    let summary = EvalSummary {
        homogeneity: h,
        eps: report.eps,
        min_pts: report.min_pts,
        clusters: ids.len(),
        noise: report.rows.iter().filter(|r| r.cluster_id == NOISE).count(),
        removal,
        detection: scored.as_deref().map(|v| detection_summary(cfg, v)).transpose()?,
    };
    let text = summary.to_text();
    write_text(out, &text)?;
    for line in text.lines() {
        log("eval", line);
    }
    Ok(summary)
}

/// Output layout of a demo run.
#[derive(Clone, Debug, PartialEq)]
pub struct DemoPaths {
    pub corpus: PathBuf,
    pub checkpoint: PathBuf,
    pub curves: PathBuf,
    pub plots: PathBuf,
    pub report: PathBuf,
    pub eval: PathBuf,
}

impl DemoPaths {
    pub fn new(workdir: &Path) -> Self {
        DemoPaths {
            corpus: workdir.join("corpus"),
            checkpoint: workdir.join("model.ckpt"),
            curves: workdir.join("curves"),
            plots: workdir.join("plots"),
            report: workdir.join("cluster_report.csv"),
            eval: workdir.join("eval.txt"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DemoSummary {
    pub paths: DemoPaths,
    pub training_frames: usize,
    pub final_loss: Option<f32>,
    pub curves: Vec<RegularityCurve>,
    pub report: ClusterReport,
    pub eval: EvalSummary,
}

/// gen, train, score, plot, cluster and eval in one go under `workdir`.
pub fn cmd_demo(cfg: &RunConfig, workdir: &Path) -> CliResult<DemoSummary> {
    let started = Instant::now();
    let paths = DemoPaths::new(workdir);
    let manifest = cmd_gen(cfg, &paths.corpus)?;
    let manifest_path = paths.corpus.join(MANIFEST_FILE);
    let exemplars_path = paths.corpus.join(EXEMPLARS_FILE);
    let (trained, history) = cmd_train(cfg, &manifest_path, &paths.checkpoint)?;
    log("demo", format!("trained in {:.1}s", started.elapsed().as_secs_f64()));
    let mut curves = cmd_score(cfg, &paths.checkpoint, &manifest_path, &paths.curves)?;
    curves.extend(cmd_score(cfg, &paths.checkpoint, &exemplars_path, &paths.curves)?);
    for row in manifest.rows.iter().filter(|r| !r.is_normal()) {
        cmd_plot(
            cfg,
            &curve_path(&paths.curves, &row.video_id),
            &paths.plots.join(format!("{}.svg", row.video_id)),
            Some(&row.label),
        )?;
    }
    let report = cmd_cluster(cfg, &paths.curves, &manifest_path, &exemplars_path, &paths.report)?;
    let eval = cmd_eval(cfg, &paths.report, Some((&paths.curves, &manifest_path)), &paths.eval)?;
    log("demo", format!("finished in {:.1}s", started.elapsed().as_secs_f64()));
    let training_frames = manifest.rows.iter().filter(|r| r.split == Split::Train).count() * cfg.corpus.normal_frames;
    Ok(DemoSummary {
        paths,
        training_frames,
        final_loss: trained.meta.final_loss.or(history.last().copied()),
        curves,
        report,
        eval,
    })
}
