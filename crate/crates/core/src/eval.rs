//! Batch evaluation: pairs prediction and ground-truth clips by id,
//! extracts aligned features over a fixed window, and aggregates the five
//! benchmark metrics into a deterministic report.

use crate::dataset::{load_clip, DatasetError};
use crate::hand::{HandShape, HandTemplate};
use crate::metrics::{
    compute_fid, fgd, fit_gmm, gmm_w2, Embedder, HandMetrics, MetricError, MetricReport,
    ReportMeta,
};
use crate::motion::{HandMotion, MotionSequence};
use crate::real::{real_of, Real};
use ndarray::Array2;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unpaired clip ids: {0:?}")]
    Pairing(Vec<String>),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("configuration: {0}")]
    Config(String),
}

/// Which metrics to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricSelection {
    pub fid: bool,
    pub fgd: bool,
    pub wgd: bool,
    pub pd: bool,
    pub smooth: bool,
}

impl Default for MetricSelection {
    fn default() -> Self {
        MetricSelection {
            fid: true,
            fgd: true,
            wgd: true,
            pd: true,
            smooth: true,
        }
    }
}

impl MetricSelection {
    /// Parses a comma-separated list such as `fid,fgd,wgd,pd,smooth`.
    pub fn parse(spec: &str) -> Result<Self, EvalError> {
        let mut sel = MetricSelection {
            fid: false,
            fgd: false,
            wgd: false,
            pd: false,
            smooth: false,
        };
        for token in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match token {
                "fid" => sel.fid = true,
                "fgd" => sel.fgd = true,
                "wgd" => sel.wgd = true,
                "pd" => sel.pd = true,
                "smooth" | "smoothness" => sel.smooth = true,
                other => {
                    return Err(EvalError::Config(format!("unknown metric `{other}`")));
                }
            }
        }
        if sel == (MetricSelection { fid: false, fgd: false, wgd: false, pd: false, smooth: false })
        {
            return Err(EvalError::Config("no metrics selected".into()));
        }
        Ok(sel)
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.fid {
            out.push("fid".to_string());
        }
        if self.fgd {
            out.push("fgd".to_string());
        }
        if self.wgd {
            out.push("wgd".to_string());
        }
        if self.pd {
            out.push("pd".to_string());
        }
        if self.smooth {
            out.push("smooth".to_string());
        }
        out
    }
}

/// Evaluation parameters. Defaults match the benchmark configuration:
/// seed 42, K = 8 mixture components, 32-dim latent space, 30 FPS clips,
/// 8-second evaluation windows.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub seed: u64,
    pub gmm_components: usize,
    pub latent_dim: usize,
    pub eval_window_s: f64,
    /// When set, every clip must run at this frame rate.
    pub expected_fps: Option<f64>,
    pub metrics: MetricSelection,
    pub jobs: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seed: 42,
            gmm_components: 8,
            latent_dim: 32,
            eval_window_s: 8.0,
            expected_fps: None,
            metrics: MetricSelection::default(),
            jobs: None,
        }
    }
}

/// One prediction/ground-truth clip pair.
#[derive(Debug, Clone)]
pub struct EvalPair<S> {
    pub clip_id: String,
    pub pred: MotionSequence<S>,
    pub gt: MotionSequence<S>,
}

struct ClipExtract<S> {
    fid_pred: Vec<S>,
    fid_gt: Vec<S>,
    /// Per hand: (pred flattened window θ, gt flattened window θ).
    fgd: [(Vec<S>, Vec<S>); 2],
    /// Per hand: per-frame θ vectors where the hand is visible on both sides.
    wgd: [(Vec<Vec<S>>, Vec<Vec<S>>); 2],
    /// Per hand: (Σ squared root-position distance, frame count).
    pd: [(S, usize); 2],
    /// Per hand: per-joint Σ|accel| and valid frame counts, pred then gt.
    accel: [(Vec<S>, usize, Vec<S>, usize); 2],
}

/// Evaluates prediction clips against ground truth from two directories of
/// annotation files. Clips are paired by file stem; any asymmetry is a
/// pairing error naming the offending ids.
pub fn evaluate_directories<S: Real>(
    pred_dir: &Path,
    gt_dir: &Path,
    config: &EvalConfig,
    template: &HandTemplate<S>,
    embedder: Option<&Embedder<S>>,
) -> Result<MetricReport<S>, EvalError> {
    let pred_files = clip_files(pred_dir)?;
    let gt_files = clip_files(gt_dir)?;

    let mut unpaired: Vec<String> = Vec::new();
    for id in pred_files.keys() {
        if !gt_files.contains_key(id) {
            unpaired.push(format!("{id} (prediction only)"));
        }
    }
    for id in gt_files.keys() {
        if !pred_files.contains_key(id) {
            unpaired.push(format!("{id} (ground truth only)"));
        }
    }
    if !unpaired.is_empty() {
        unpaired.sort();
        return Err(EvalError::Pairing(unpaired));
    }
    if gt_files.is_empty() {
        return Err(EvalError::Dataset(DatasetError::EmptyDataset(format!(
            "no clips under {}",
            gt_dir.display()
        ))));
    }

    let mut pairs = Vec::with_capacity(gt_files.len());
    for (id, gt_path) in &gt_files {
        let pred_clip = load_clip::<S>(&pred_files[id])?;
        let gt_clip = load_clip::<S>(gt_path)?;
        pairs.push(EvalPair {
            clip_id: id.clone(),
            pred: pred_clip.to_motion()?,
            gt: gt_clip.to_motion()?,
        });
    }
    evaluate_pairs(pairs, config, template, embedder)
}

fn clip_files(dir: &Path) -> Result<BTreeMap<String, std::path::PathBuf>, EvalError> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| EvalError::Dataset(DatasetError::Io(format!("{}: {e}", dir.display()))))?;
    for entry in entries.flatten() {
        let path = entry.path();
        if path.extension().is_some_and(|ext| ext == "json") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path);
            }
        }
    }
    Ok(out)
}

/// Evaluates in-memory clip pairs. Pairs are processed in lexicographic
/// clip-id order (in parallel when `jobs` allows) and aggregated
/// sequentially, so reports are byte-stable.
pub fn evaluate_pairs<S: Real>(
    mut pairs: Vec<EvalPair<S>>,
    config: &EvalConfig,
    template: &HandTemplate<S>,
    embedder: Option<&Embedder<S>>,
) -> Result<MetricReport<S>, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Config("no clip pairs to evaluate".into()));
    }
    pairs.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));

    let fps = pairs[0].gt.fps;
    if let Some(expected) = config.expected_fps {
        if (fps - expected).abs() > 1e-9 {
            return Err(EvalError::Config(format!(
                "clips run at {fps} FPS, expected {expected}"
            )));
        }
    }
    let joints = pairs[0].gt.joints();
    for pair in &pairs {
        for (what, seq) in [("prediction", &pair.pred), ("ground truth", &pair.gt)] {
            if seq.fps != fps {
                return Err(EvalError::Config(format!(
                    "clip {} {what} has fps {}, expected {fps}",
                    pair.clip_id, seq.fps
                )));
            }
            if seq.joints() != joints {
                return Err(EvalError::Metric(MetricError::DimensionMismatch(format!(
                    "clip {} {what} has {} joints, expected {joints}",
                    pair.clip_id,
                    seq.joints()
                ))));
            }
        }
    }

    // Common evaluation window: the configured length, cut down to the
    // shortest clip so every flattened feature has one length.
    let configured = (config.eval_window_s * fps).round() as usize;
    let shortest = pairs
        .iter()
        .flat_map(|p| [p.pred.frames(), p.gt.frames()])
        .min()
        .expect("non-empty");
    let window = configured.min(shortest);
    if window == 0 {
        return Err(EvalError::Config("evaluation window is empty".into()));
    }

    let shape = HandShape::<S>::default();
    let sel = config.metrics;
    let extract_one = |pair: &EvalPair<S>| -> Result<ClipExtract<S>, MetricError> {
        extract(pair, window, template, &shape, fps, sel)
    };
    let extracts: Vec<ClipExtract<S>> = match config.jobs {
        Some(1) => pairs.iter().map(extract_one).collect::<Result<_, _>>()?,
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| EvalError::Config(format!("thread pool: {e}")))?;
            pool.install(|| pairs.par_iter().map(extract_one).collect::<Result<_, _>>())?
        }
        None => pairs.par_iter().map(extract_one).collect::<Result<_, _>>()?,
    };

    let mut report = MetricReport {
        fid: None,
        left: HandMetrics::default(),
        right: HandMetrics::default(),
        meta: ReportMeta {
            seed: config.seed,
            gmm_components: config.gmm_components,
            latent_dim: config.latent_dim,
            fps,
            eval_window_s: window as f64 / fps,
            clip_count: pairs.len(),
            metrics: sel.names(),
        },
    };

    if sel.fid {
        let pred = rows_to_matrix(extracts.iter().map(|e| e.fid_pred.as_slice()));
        let gt = rows_to_matrix(extracts.iter().map(|e| e.fid_gt.as_slice()));
        let fitted;
        let embedder = match embedder {
            Some(e) => e,
            None => {
                fitted = Embedder::fit(&gt.view(), config.latent_dim)?;
                &fitted
            }
        };
        report.fid = Some(compute_fid(&pred.view(), &gt.view(), embedder)?);
    }

    for (hand_idx, side) in [(0usize, Hand::Left), (1, Hand::Right)] {
        let metrics = match side {
            Hand::Left => &mut report.left,
            Hand::Right => &mut report.right,
        };
        if sel.fgd {
            let pred = rows_to_matrix(extracts.iter().map(|e| e.fgd[hand_idx].0.as_slice()));
            let gt = rows_to_matrix(extracts.iter().map(|e| e.fgd[hand_idx].1.as_slice()));
            metrics.fgd = Some(fgd(&pred.view(), &gt.view())?);
        }
        if sel.wgd {
            let pred = stack_rows(extracts.iter().flat_map(|e| e.wgd[hand_idx].0.iter()));
            let gt = stack_rows(extracts.iter().flat_map(|e| e.wgd[hand_idx].1.iter()));
            let pred_fit = fit_gmm(&pred.view(), config.gmm_components, config.seed)?;
            let gt_fit = fit_gmm(&gt.view(), config.gmm_components, config.seed)?;
            metrics.wgd = Some(gmm_w2(&pred_fit.model, &gt_fit.model)?);
        }
        if sel.pd {
            let mut total = S::zero();
            let mut frames = 0usize;
            for e in &extracts {
                total += e.pd[hand_idx].0;
                frames += e.pd[hand_idx].1;
            }
            if frames == 0 {
                return Err(EvalError::Metric(MetricError::TooFewSamples {
                    got: 0,
                    needed: 1,
                }));
            }
            metrics.pd = Some(total / real_of::<S>(frames));
        }
        if sel.smooth {
            let out_joints = template.output_joints();
            let mut pred_sums = vec![S::zero(); out_joints];
            let mut gt_sums = vec![S::zero(); out_joints];
            let mut pred_count = 0usize;
            let mut gt_count = 0usize;
            for e in &extracts {
                let (ps, pc, gs, gc) = &e.accel[hand_idx];
                for (a, b) in pred_sums.iter_mut().zip(ps) {
                    *a += *b;
                }
                for (a, b) in gt_sums.iter_mut().zip(gs) {
                    *a += *b;
                }
                pred_count += pc;
                gt_count += gc;
            }
            if pred_count == 0 || gt_count == 0 {
                return Err(EvalError::Metric(MetricError::TooShort(0)));
            }
            let mut acc = S::zero();
            for (p, g) in pred_sums.iter().zip(&gt_sums) {
                let tau_pred = *p / real_of::<S>(pred_count);
                let tau_gt = *g / real_of::<S>(gt_count);
                acc += (tau_pred - tau_gt).abs();
            }
            metrics.smoothness = Some(acc);
        }
    }

    report.validate()?;
    Ok(report)
}

enum Hand {
    Left,
    Right,
}

fn extract<S: Real>(
    pair: &EvalPair<S>,
    window: usize,
    template: &HandTemplate<S>,
    shape: &HandShape<S>,
    fps: f64,
    sel: MetricSelection,
) -> Result<ClipExtract<S>, MetricError> {
    let pred = pair.pred.window(0, window);
    let gt = pair.gt.window(0, window);
    let joints = gt.joints();

    let mut fid_pred = Vec::new();
    let mut fid_gt = Vec::new();
    if sel.fid {
        fid_pred.reserve(window * 2 * joints * 3);
        for hand in [&pred.left, &pred.right] {
            flatten_theta(hand, &mut fid_pred);
        }
        for hand in [&gt.left, &gt.right] {
            flatten_theta(hand, &mut fid_gt);
        }
    }

    let mut out = ClipExtract {
        fid_pred,
        fid_gt,
        fgd: [(Vec::new(), Vec::new()), (Vec::new(), Vec::new())],
        wgd: [(Vec::new(), Vec::new()), (Vec::new(), Vec::new())],
        pd: [(S::zero(), 0), (S::zero(), 0)],
        accel: [
            (Vec::new(), 0, Vec::new(), 0),
            (Vec::new(), 0, Vec::new(), 0),
        ],
    };

    for (idx, (pred_hand, gt_hand, side)) in [
        (&pred.left, &gt.left, crate::hand::Side::Left),
        (&pred.right, &gt.right, crate::hand::Side::Right),
    ]
    .into_iter()
    .enumerate()
    {
        if sel.fgd {
            let mut p = Vec::with_capacity(window * joints * 3);
            let mut g = Vec::with_capacity(window * joints * 3);
            flatten_theta(pred_hand, &mut p);
            flatten_theta(gt_hand, &mut g);
            out.fgd[idx] = (p, g);
        }
        if sel.wgd {
            let mut p_rows = Vec::new();
            let mut g_rows = Vec::new();
            for n in 0..window {
                if pred_hand.visible[n] && gt_hand.visible[n] {
                    p_rows.push(pred_hand.frame_theta_vector(n).to_vec());
                    g_rows.push(gt_hand.frame_theta_vector(n).to_vec());
                }
            }
            out.wgd[idx] = (p_rows, g_rows);
        }
        if sel.pd {
            let mut total = S::zero();
            let mut count = 0usize;
            for n in 0..window {
                if pred_hand.visible[n] && gt_hand.visible[n] {
                    for k in 0..3 {
                        let d = pred_hand.trans[[n, k]] - gt_hand.trans[[n, k]];
                        if !d.is_finite() {
                            return Err(MetricError::NonFinite("root positions".into()));
                        }
                        total += d * d;
                    }
                    count += 1;
                }
            }
            out.pd[idx] = (total, count);
        }
        if sel.smooth {
            let (p_sums, p_count) = accel_sums(pred_hand, side, shape, template, fps)?;
            let (g_sums, g_count) = accel_sums(gt_hand, side, shape, template, fps)?;
            out.accel[idx] = (p_sums, p_count, g_sums, g_count);
        }
    }
    Ok(out)
}

fn accel_sums<S: Real>(
    hand: &HandMotion<S>,
    side: crate::hand::Side,
    shape: &HandShape<S>,
    template: &HandTemplate<S>,
    fps: f64,
) -> Result<(Vec<S>, usize), MetricError> {
    let series = crate::hand::joint_accelerations(hand, side, shape, template, fps)?;
    let joints = template.output_joints();
    let mut sums = vec![S::zero(); joints];
    let mut count = 0usize;
    for (n, &ok) in series.valid.iter().enumerate() {
        if !ok {
            continue;
        }
        count += 1;
        for (j, slot) in sums.iter_mut().enumerate() {
            let a = [
                series.accel[[n, j, 0]],
                series.accel[[n, j, 1]],
                series.accel[[n, j, 2]],
            ];
            *slot += (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        }
    }
    Ok((sums, count))
}

fn flatten_theta<S: Real>(hand: &HandMotion<S>, out: &mut Vec<S>) {
    out.extend(hand.theta.iter().copied());
}

fn rows_to_matrix<'a, S: Real>(rows: impl Iterator<Item = &'a [S]>) -> Array2<S> {
    let rows: Vec<&[S]> = rows.collect();
    let width = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut out = Array2::<S>::zeros((rows.len(), width));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    out
}

fn stack_rows<'a, S: Real>(rows: impl Iterator<Item = &'a Vec<S>>) -> Array2<S> {
    let rows: Vec<&Vec<S>> = rows.collect();
    let width = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut out = Array2::<S>::zeros((rows.len(), width));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    out
}

/// Serializes a report with a trailing newline; key order is fixed by the
/// struct layout so identical runs produce identical bytes.
pub fn report_to_json<S: Real>(report: &MetricReport<S>) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

/// Flat CSV form of a report: `metric,hand,value` rows.
pub fn report_to_csv<S: Real>(report: &MetricReport<S>) -> String {
    let mut out = String::from("metric,hand,value\n");
    if let Some(fid) = &report.fid {
        out.push_str(&format!("fid,both,{fid}\n"));
    }
    for (name, hand) in [("left", &report.left), ("right", &report.right)] {
        if let Some(v) = &hand.fgd {
            out.push_str(&format!("fgd,{name},{v}\n"));
        }
        if let Some(v) = &hand.wgd {
            out.push_str(&format!("wgd,{name},{v}\n"));
        }
        if let Some(v) = &hand.pd {
            out.push_str(&format!("pd,{name},{v}\n"));
        }
        if let Some(v) = &hand.smoothness {
            out.push_str(&format!("smooth,{name},{v}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::ARTICULATED_JOINTS;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_sequence(rng: &mut StdRng, frames: usize) -> MotionSequence<f64> {
        let mut make_hand = |offset: f64| {
            let mut hand = HandMotion::new_invisible(frames, ARTICULATED_JOINTS);
            for n in 0..frames {
                hand.visible[n] = true;
                for j in 0..ARTICULATED_JOINTS {
                    for k in 0..3 {
                        hand.theta[[n, j, k]] =
                            rng.random_range(-0.5..0.5) + offset * 0.01 * n as f64;
                    }
                }
                for k in 0..3 {
                    hand.trans[[n, k]] = rng.random_range(-0.2..0.2);
                }
            }
            hand
        };
        MotionSequence {
            fps: 30.0,
            left: make_hand(1.0),
            right: make_hand(-1.0),
        }
    }

    fn identity_pairs(count: usize, frames: usize, seed: u64) -> Vec<EvalPair<f64>> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                let seq = random_sequence(&mut rng, frames);
                EvalPair {
                    clip_id: format!("clip_{i:03}"),
                    pred: seq.clone(),
                    gt: seq,
                }
            })
            .collect()
    }

    fn small_config() -> EvalConfig {
        EvalConfig {
            seed: 42,
            gmm_components: 3,
            latent_dim: 4,
            eval_window_s: 1.0,
            expected_fps: Some(30.0),
            metrics: MetricSelection::default(),
            jobs: Some(1),
        }
    }

    #[test]
    fn identity_evaluation_is_all_zeros() {
        let pairs = identity_pairs(8, 45, 5);
        let template = HandTemplate::neutral();
        let report = evaluate_pairs(pairs, &small_config(), &template, None).unwrap();
        assert!(report.fid.unwrap() <= 1e-6);
        for hand in [&report.left, &report.right] {
            assert!(hand.fgd.unwrap() <= 1e-6);
            assert!(hand.wgd.unwrap() <= 1e-6);
            assert!(hand.pd.unwrap() <= 1e-6);
            assert!(hand.smoothness.unwrap() <= 1e-6);
        }
        assert_eq!(report.meta.clip_count, 8);
    }

    #[test]
    fn parallel_and_serial_extraction_agree_exactly() {
        let pairs = identity_pairs(6, 40, 9);
        let template = HandTemplate::neutral();
        let serial = evaluate_pairs(pairs.clone(), &small_config(), &template, None).unwrap();
        let mut parallel_cfg = small_config();
        parallel_cfg.jobs = Some(4);
        let parallel = evaluate_pairs(pairs, &parallel_cfg, &template, None).unwrap();
        assert_eq!(report_to_json(&serial), report_to_json(&parallel));
    }

    #[test]
    fn metric_selection_parses_and_rejects() {
        let sel = MetricSelection::parse("fid,pd").unwrap();
        assert!(sel.fid && sel.pd && !sel.fgd && !sel.wgd && !sel.smooth);
        assert!(MetricSelection::parse("bogus").is_err());
        assert!(MetricSelection::parse("").is_err());
    }

    #[test]
    fn mean_shifted_positions_give_expected_pd() {
        let mut pairs = identity_pairs(4, 30, 2);
        for pair in &mut pairs {
            for n in 0..pair.pred.frames() {
                pair.pred.left.trans[[n, 0]] += 3.0;
                pair.pred.left.trans[[n, 1]] += 4.0;
            }
        }
        let mut config = small_config();
        config.metrics = MetricSelection::parse("pd").unwrap();
        let template = HandTemplate::neutral();
        let report = evaluate_pairs(pairs, &config, &template, None).unwrap();
        let pd_left = report.left.pd.unwrap();
        assert!((pd_left - 25.0).abs() < 1e-9, "pd {pd_left}");
        assert!(report.right.pd.unwrap() <= 1e-12);
    }

    #[test]
    fn csv_report_lists_selected_metrics() {
        let pairs = identity_pairs(4, 30, 3);
        let mut config = small_config();
        config.metrics = MetricSelection::parse("pd,smooth").unwrap();
        let template = HandTemplate::neutral();
        let report = evaluate_pairs(pairs, &config, &template, None).unwrap();
        let csv = report_to_csv(&report);
        assert!(csv.contains("pd,left,"));
        assert!(csv.contains("smooth,right,"));
        assert!(!csv.contains("fid"));
    }
}
