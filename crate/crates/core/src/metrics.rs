//! Detection and tracking evaluation.
//!
//! Detection matching supports two criteria: IoU at a fixed threshold, and
//! the overlapping-centroid rule (each box must contain the other box's
//! centroid) which is insensitive to how much surrounding skin an annotator
//! included. Tracking is scored by matching accuracy (over lesion pairs
//! detected in both scans) and longitudinal accuracy (over all ground-truth
//! lesion pairs).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bbox::{confidence_order, iou, AnnotationSet, BoundingBox2D};
use crate::error::{Error, Result};

/// Rule deciding whether a predicted box counts as a detection of a
/// ground-truth box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchCriterion {
    /// Both boxes contain each other's centroid (inclusive bounds).
    Centroid,
    /// Intersection over union at or above `threshold`.
    Iou { threshold: f64 },
}

impl MatchCriterion {
    /// The conventional IoU criterion at 0.5.
    pub fn iou_half() -> Self {
        MatchCriterion::Iou { threshold: 0.5 }
    }

    pub fn matches(&self, a: &BoundingBox2D, b: &BoundingBox2D) -> bool {
        match self {
            MatchCriterion::Centroid => centroid_match(a, b),
            MatchCriterion::Iou { threshold } => iou(a, b) >= *threshold,
        }
    }

    /// Preference score for choosing among multiple matching candidates;
    /// higher is better.
    fn preference(&self, a: &BoundingBox2D, b: &BoundingBox2D) -> f64 {
        match self {
            MatchCriterion::Centroid => {
                let (ax, ay) = a.center();
                let (bx, by) = b.center();
                -((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
            }
            MatchCriterion::Iou { .. } => iou(a, b),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            MatchCriterion::Centroid => "centroid".into(),
            MatchCriterion::Iou { threshold } => format!("iou_{threshold}"),
        }
    }
}

/// Overlapping-centroid detection criterion: true iff each box contains the
/// other's centroid. Symmetric and reflexive.
pub fn centroid_match(a: &BoundingBox2D, b: &BoundingBox2D) -> bool {
    let (acx, acy) = a.center();
    let (bcx, bcy) = b.center();
    a.contains_point(bcx, bcy) && b.contains_point(acx, acy)
}

fn effective_confidence(b: &BoundingBox2D) -> f64 {
    // Manual annotations carry no score and count as fully confident.
    b.confidence.unwrap_or(1.0)
}

/// Outcome of one-to-one detection matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchOutcome {
    /// `(gt_index, pred_index)` pairs.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_gt: Vec<usize>,
    /// Predictions above the confidence threshold that matched nothing.
    pub unmatched_pred: Vec<usize>,
    /// Predictions discarded by the confidence threshold.
    pub discarded_pred: Vec<usize>,
}

/// One-to-one greedy matching of predictions to ground truth.
///
/// Predictions below `conf_threshold` are discarded; the rest are visited in
/// descending confidence (ties by coordinates) and each takes the
/// best-scoring unmatched ground-truth box it matches under the criterion.
pub fn match_sets(
    gt: &AnnotationSet,
    pred: &AnnotationSet,
    criterion: MatchCriterion,
    conf_threshold: f64,
) -> MatchOutcome {
    let mut order: Vec<usize> = (0..pred.boxes.len()).collect();
    order.sort_by(|&a, &b| confidence_order(&pred.boxes[a], &pred.boxes[b]));

    let mut gt_taken = vec![false; gt.boxes.len()];
    let mut pairs = Vec::new();
    let mut unmatched_pred = Vec::new();
    let mut discarded_pred = Vec::new();
    for p_idx in order {
        let p = &pred.boxes[p_idx];
        if effective_confidence(p) < conf_threshold {
            discarded_pred.push(p_idx);
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for (g_idx, g) in gt.boxes.iter().enumerate() {
            if gt_taken[g_idx] || !criterion.matches(g, p) {
                continue;
            }
            let score = criterion.preference(g, p);
            match best {
                Some((bs, bi)) if score < bs || (score == bs && g_idx > bi) => {}
                _ => best = Some((score, g_idx)),
            }
        }
        match best {
            Some((_, g_idx)) => {
                gt_taken[g_idx] = true;
                pairs.push((g_idx, p_idx));
            }
            None => unmatched_pred.push(p_idx),
        }
    }
    let unmatched_gt = gt_taken
        .iter()
        .enumerate()
        .filter(|(_, taken)| !**taken)
        .map(|(i, _)| i)
        .collect();
    MatchOutcome {
        pairs,
        unmatched_gt,
        unmatched_pred,
        discarded_pred,
    }
}

/// Precision, recall, and F1 from one-to-one matching counts.
///
/// Empty prediction sets score zero precision and recall unless the ground
/// truth is also empty, in which case both are 1.
pub fn precision_recall(
    gt: &AnnotationSet,
    pred: &AnnotationSet,
    criterion: MatchCriterion,
    conf_threshold: f64,
) -> (f64, f64, f64) {
    let outcome = match_sets(gt, pred, criterion, conf_threshold);
    let tp = outcome.pairs.len() as f64;
    let pred_count = (outcome.pairs.len() + outcome.unmatched_pred.len()) as f64;
    let gt_count = gt.boxes.len() as f64;
    let precision = if pred_count > 0.0 {
        tp / pred_count
    } else if gt_count == 0.0 {
        1.0
    } else {
        0.0
    };
    let recall = if gt_count > 0.0 { tp / gt_count } else { 1.0 };
    (precision, recall, f1_score(precision, recall))
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Interpolation rule for the area under the precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApInterpolation {
    AllPoint,
    ElevenPoint,
}

/// Average precision with all-point interpolation.
pub fn average_precision(
    gt: &AnnotationSet,
    pred: &AnnotationSet,
    criterion: MatchCriterion,
) -> Result<f64> {
    average_precision_with(gt, pred, criterion, ApInterpolation::AllPoint)
}

/// Area under the precision-recall curve, sweeping every distinct prediction
/// confidence as the threshold.
pub fn average_precision_with(
    gt: &AnnotationSet,
    pred: &AnnotationSet,
    criterion: MatchCriterion,
    interpolation: ApInterpolation,
) -> Result<f64> {
    for (i, b) in pred.boxes.iter().enumerate() {
        if b.confidence.is_none() {
            return Err(Error::MissingConfidence {
                context: format!("box {i} of prediction set {:?}", pred.image),
            });
        }
    }
    if gt.boxes.is_empty() {
        return Ok(if pred.boxes.is_empty() { 1.0 } else { 0.0 });
    }
    if pred.boxes.is_empty() {
        return Ok(0.0);
    }

    // Label each prediction TP/FP by greedy one-to-one matching in
    // confidence order, then sweep distinct confidences from high to low.
    let outcome = match_sets(gt, pred, criterion, f64::NEG_INFINITY);
    let matched: Vec<usize> = outcome.pairs.iter().map(|&(_, p)| p).collect();
    let mut order: Vec<usize> = (0..pred.boxes.len()).collect();
    order.sort_by(|&a, &b| confidence_order(&pred.boxes[a], &pred.boxes[b]));

    let gt_count = gt.boxes.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::new(); // (recall, precision)
    let mut tp = 0.0;
    let mut seen = 0.0;
    for (rank, &p_idx) in order.iter().enumerate() {
        seen += 1.0;
        if matched.contains(&p_idx) {
            tp += 1.0;
        }
        let this_conf = pred.boxes[p_idx].confidence.unwrap();
        let next_conf = order
            .get(rank + 1)
            .map(|&n| pred.boxes[n].confidence.unwrap());
        // Only cut between distinct confidence values.
        if next_conf != Some(this_conf) {
            points.push((tp / gt_count, tp / seen));
        }
    }

    // Interpolated precision: max precision at any recall >= r.
    let mut interp = points.clone();
    for i in (0..interp.len().saturating_sub(1)).rev() {
        interp[i].1 = interp[i].1.max(interp[i + 1].1);
    }

    let ap = match interpolation {
        ApInterpolation::AllPoint => {
            let mut area = 0.0;
            let mut prev_recall = 0.0;
            for &(r, p) in &interp {
                area += (r - prev_recall) * p;
                prev_recall = r;
            }
            area
        }
        ApInterpolation::ElevenPoint => {
            let mut total = 0.0;
            for step in 0..=10 {
                let r = step as f64 / 10.0;
                let p = interp
                    .iter()
                    .filter(|&&(pr, _)| pr >= r - 1e-12)
                    .map(|&(_, p)| p)
                    .fold(0.0, f64::max);
                total += p;
            }
            total / 11.0
        }
    };
    Ok(ap)
}

/// Detection metrics of one scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanMetrics {
    pub scan: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub average_precision: f64,
}

/// Per-scan detection metrics plus aggregates across scans.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionReport {
    pub criterion: String,
    pub confidence_threshold: f64,
    pub per_scan: Vec<ScanMetrics>,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub recall_mean: f64,
    pub recall_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub ap_mean: f64,
    pub ap_std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

/// Evaluate detection over aligned per-scan ground truth and predictions;
/// metrics are computed per scan, then averaged.
pub fn detection_report(
    gt_scans: &[AnnotationSet],
    pred_scans: &[AnnotationSet],
    criterion: MatchCriterion,
    conf_threshold: f64,
) -> Result<DetectionReport> {
    if gt_scans.len() != pred_scans.len() {
        return Err(Error::Config {
            message: format!(
                "{} ground-truth scans vs {} prediction scans",
                gt_scans.len(),
                pred_scans.len()
            ),
        });
    }
    let mut per_scan = Vec::with_capacity(gt_scans.len());
    for (gt, pred) in gt_scans.iter().zip(pred_scans) {
        let (precision, recall, f1) = precision_recall(gt, pred, criterion, conf_threshold);
        let ap = average_precision(gt, pred, criterion)?;
        per_scan.push(ScanMetrics {
            scan: gt.image.clone(),
            precision,
            recall,
            f1,
            average_precision: ap,
        });
    }
    let (p_mean, p_std) = mean_std(&per_scan.iter().map(|s| s.precision).collect::<Vec<_>>());
    let (r_mean, r_std) = mean_std(&per_scan.iter().map(|s| s.recall).collect::<Vec<_>>());
    let (f_mean, f_std) = mean_std(&per_scan.iter().map(|s| s.f1).collect::<Vec<_>>());
    let (a_mean, a_std) = mean_std(&per_scan.iter().map(|s| s.average_precision).collect::<Vec<_>>());
    Ok(DetectionReport {
        criterion: criterion.tag(),
        confidence_threshold: conf_threshold,
        per_scan,
        precision_mean: p_mean,
        precision_std: p_std,
        recall_mean: r_mean,
        recall_std: r_std,
        f1_mean: f_mean,
        f1_std: f_std,
        ap_mean: a_mean,
        ap_std: a_std,
    })
}

impl DetectionReport {
    /// Aligned-column text table, one row per criterion run.
    pub fn table_row(&self, label: &str) -> String {
        format!(
            "{:<10} {:<10} {:<14} {:<14} {:<14}",
            label,
            self.criterion,
            format!("{:.2} ({:.2})", self.precision_mean, self.precision_std),
            format!("{:.2} ({:.2})", self.recall_mean, self.recall_std),
            format!("{:.2} ({:.2})", self.ap_mean, self.ap_std),
        )
    }

    pub fn table_header() -> String {
        format!(
            "{:<10} {:<10} {:<14} {:<14} {:<14}",
            "GT", "Match", "Precision", "Recall", "Avg. Precision"
        )
    }
}

/// Pairwise precision/recall/F1 with each annotator in turn as ground truth.
///
/// `annotators[k]` holds annotator `k`'s sets, aligned across annotators by
/// position (same image list, same order). Entry `(g, p)` evaluates
/// annotator `p` against annotator `g` under the centroid criterion,
/// averaged over images; the diagonal is `(1, 1, 1)` by definition.
pub fn pairwise_annotator_matrix(
    annotators: &[Vec<AnnotationSet>],
    conf_threshold: f64,
) -> Result<Vec<Vec<(f64, f64, f64)>>> {
    if annotators.len() < 2 {
        return Err(Error::Config {
            message: "annotator matrix needs at least two annotators".into(),
        });
    }
    let images = annotators[0].len();
    for (k, sets) in annotators.iter().enumerate() {
        if sets.len() != images {
            return Err(Error::Config {
                message: format!(
                    "annotator {k} covers {} images, expected {images}",
                    sets.len()
                ),
            });
        }
    }
    let n = annotators.len();
    let mut matrix = vec![vec![(0.0, 0.0, 0.0); n]; n];
    for g in 0..n {
        for p in 0..n {
            if g == p {
                matrix[g][p] = (1.0, 1.0, 1.0);
                continue;
            }
            let mut ps = Vec::new();
            let mut rs = Vec::new();
            let mut fs = Vec::new();
            for img in 0..images {
                let (pr, rc, f1) = precision_recall(
                    &annotators[g][img],
                    &annotators[p][img],
                    MatchCriterion::Centroid,
                    conf_threshold,
                );
                ps.push(pr);
                rs.push(rc);
                fs.push(f1);
            }
            matrix[g][p] = (mean_std(&ps).0, mean_std(&rs).0, mean_std(&fs).0);
        }
    }
    Ok(matrix)
}

/// One ground-truth longitudinal lesion pair, mapped to the detected lesion
/// index on each scan (or `None` where it was not detected).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtLink {
    pub det_t: Option<usize>,
    pub det_t1: Option<usize>,
}

/// Link ground-truth lesion pairs (boxes sharing a `track_id` across the two
/// scans) to detections via one-to-one matching under `criterion`.
pub fn link_tracked_lesions(
    gt_t: &AnnotationSet,
    det_t: &AnnotationSet,
    gt_t1: &AnnotationSet,
    det_t1: &AnnotationSet,
    criterion: MatchCriterion,
) -> Vec<GtLink> {
    let det_map = |gt: &AnnotationSet, det: &AnnotationSet| -> HashMap<usize, usize> {
        match_sets(gt, det, criterion, f64::NEG_INFINITY)
            .pairs
            .into_iter()
            .collect()
    };
    let map_t = det_map(gt_t, det_t);
    let map_t1 = det_map(gt_t1, det_t1);

    let by_track = |set: &AnnotationSet| -> HashMap<String, usize> {
        let mut m = HashMap::new();
        for (i, b) in set.boxes.iter().enumerate() {
            if let Some(id) = &b.track_id {
                m.entry(id.clone()).or_insert(i);
            }
        }
        m
    };
    let tracks_t = by_track(gt_t);
    let tracks_t1 = by_track(gt_t1);

    let mut ids: Vec<&String> = tracks_t.keys().filter(|id| tracks_t1.contains_key(*id)).collect();
    ids.sort();
    ids.into_iter()
        .map(|id| GtLink {
            det_t: map_t.get(&tracks_t[id]).copied(),
            det_t1: map_t1.get(&tracks_t1[id]).copied(),
        })
        .collect()
}

/// Matching and longitudinal accuracy of a tracking result.
///
/// `matched_pairs` are the tracker's `(lesion_t, lesion_t1)` index pairs over
/// the detected lesion lists. Matching accuracy divides correctly tracked
/// pairs by ground-truth pairs detected in both scans; longitudinal accuracy
/// divides by all ground-truth pairs.
pub fn tracking_accuracy(matched_pairs: &[(usize, usize)], links: &[GtLink]) -> Result<(f64, f64)> {
    if links.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let mut both_detected = 0usize;
    let mut correct = 0usize;
    for link in links {
        if let (Some(a), Some(b)) = (link.det_t, link.det_t1) {
            both_detected += 1;
            if matched_pairs.contains(&(a, b)) {
                correct += 1;
            }
        }
    }
    let matching = if both_detected > 0 {
        correct as f64 / both_detected as f64
    } else {
        0.0
    };
    let longitudinal = correct as f64 / links.len() as f64;
    Ok((matching, longitudinal))
}

/// Tracking metrics of one scan pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectTracking {
    pub subject: String,
    pub matching_accuracy: f64,
    pub longitudinal_accuracy: f64,
}

/// Per-subject tracking accuracy plus aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackingReport {
    pub per_subject: Vec<SubjectTracking>,
    pub matching_mean: f64,
    pub matching_std: f64,
    pub longitudinal_mean: f64,
    pub longitudinal_std: f64,
}

impl TrackingReport {
    pub fn from_subjects(per_subject: Vec<SubjectTracking>) -> Self {
        let (m_mean, m_std) = mean_std(
            &per_subject
                .iter()
                .map(|s| s.matching_accuracy)
                .collect::<Vec<_>>(),
        );
        let (l_mean, l_std) = mean_std(
            &per_subject
                .iter()
                .map(|s| s.longitudinal_accuracy)
                .collect::<Vec<_>>(),
        );
        TrackingReport {
            per_subject,
            matching_mean: m_mean,
            matching_std: m_std,
            longitudinal_mean: l_mean,
            longitudinal_std: l_std,
        }
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<16} {:<16} {:<16}\n",
            "Subject", "Match Acc.", "Long. Acc."
        );
        for s in &self.per_subject {
            out.push_str(&format!(
                "{:<16} {:<16.2} {:<16.2}\n",
                s.subject, s.matching_accuracy, s.longitudinal_accuracy
            ));
        }
        out.push_str(&format!(
            "{:<16} {:<16} {:<16}\n",
            "mean (std)",
            format!("{:.2} ({:.2})", self.matching_mean, self.matching_std),
            format!("{:.2} ({:.2})", self.longitudinal_mean, self.longitudinal_std),
        ));
        out
    }
}
