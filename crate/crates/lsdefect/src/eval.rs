//! COCO-style AP50 evaluation: greedy per-image matching, 101-point
//! interpolated average precision per class, and the mean-AP aggregate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annot::{rasterize, ImageAnnotation};
use crate::defect::DefectClass;
use crate::error::{Error, Result};
use crate::kernels::{box_iou, mask_iou, BBox};
use crate::mask::BinaryMask;
use crate::segment::DefectInstance;

/// Which geometry to score AP over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Bounding-box AP only.
    Box,
    /// Segmentation (mask) AP only.
    Mask,
    /// Both (the default).
    Both,
}

/// Which IoU a single matching pass uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchKind {
    Box,
    Mask,
}

/// Evaluation thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Minimum IoU for a prediction to claim a ground-truth instance.
    pub iou_threshold: f64,
    /// Predictions scoring below this are discarded before matching.
    pub score_threshold: f64,
    pub mask_mode: MaskMode,
    /// Weight per-class APs by their ground-truth counts instead of the
    /// default unweighted mean.
    pub weighted_map: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_threshold: 0.5,
            score_threshold: 0.5,
            mask_mode: MaskMode::Both,
            weighted_map: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("iou_threshold", self.iou_threshold),
            ("score_threshold", self.score_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} {v} outside [0,1]")));
            }
        }
        Ok(())
    }
}

/// One ground-truth instance, rasterized.
#[derive(Debug, Clone)]
pub struct GtInstance {
    pub class: DefectClass,
    pub bbox: BBox,
    pub mask: BinaryMask,
}

/// Rasterized ground truth for a whole dataset, keyed by image id.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    pub images: BTreeMap<String, Vec<GtInstance>>,
}

impl GroundTruth {
    /// Rasterize polygon annotations; every image id must be unique and
    /// every polygon non-degenerate.
    pub fn from_annotations(annotations: &[ImageAnnotation]) -> Result<Self> {
        let mut images = BTreeMap::new();
        for ann in annotations {
            let mut instances = Vec::with_capacity(ann.instances.len());
            for inst in &ann.instances {
                let raster = rasterize(&inst.polygon, ann.width, ann.height);
                if raster.degenerate {
                    return Err(Error::InvalidPolygon(format!(
                        "degenerate ground-truth polygon in image {:?}",
                        ann.image_id
                    )));
                }
                let bbox = BBox::from_mask(&raster.mask).ok_or_else(|| {
                    Error::InvalidPolygon(format!(
                        "empty ground-truth mask in image {:?}",
                        ann.image_id
                    ))
                })?;
                instances.push(GtInstance {
                    class: inst.class,
                    bbox,
                    mask: raster.mask,
                });
            }
            if images.insert(ann.image_id.clone(), instances).is_some() {
                return Err(Error::DuplicateImageId(ann.image_id.clone()));
            }
        }
        Ok(GroundTruth { images })
    }

    pub fn count_for(&self, class: DefectClass) -> u64 {
        self.images
            .values()
            .flatten()
            .filter(|g| g.class == class)
            .count() as u64
    }
}

/// TP/FP verdict for one prediction, with the score that ranked it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchLabel {
    pub score: f64,
    pub tp: bool,
}

/// Greedily match same-class predictions against ground truth in one image.
///
/// Predictions are visited in descending score order (ties by original
/// index). Each prediction takes its best-IoU unmatched ground truth; it is
/// a TP iff that IoU meets the threshold. Returned labels follow the visit
/// order.
pub fn match_predictions(
    preds: &[DefectInstance],
    gts: &[GtInstance],
    cfg: &EvalConfig,
    kind: MatchKind,
) -> Result<Vec<MatchLabel>> {
    cfg.validate()?;
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| {
        preds[j].score
            .partial_cmp(&preds[i].score)
            .unwrap()
            .then(i.cmp(&j))
    });
    let mut gt_taken = vec![false; gts.len()];
    let mut labels = Vec::with_capacity(preds.len());
    for &pi in &order {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if gt_taken[gi] {
                continue;
            }
            let iou = match kind {
                MatchKind::Box => box_iou(&preds[pi].bbox, &gt.bbox),
                MatchKind::Mask => mask_iou(&preds[pi].mask, &gt.mask)?,
            };
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        let tp = match best {
            Some((gi, iou)) if iou >= cfg.iou_threshold => {
                gt_taken[gi] = true;
                true
            }
            _ => false,
        };
        labels.push(MatchLabel {
            score: preds[pi].score,
            tp,
        });
    }
    Ok(labels)
}

/// 101-point interpolated average precision.
///
/// Labels must be sorted by score descending. Returns None when there is no
/// ground truth (the class is then excluded from the mean).
pub fn average_precision(labels: &[MatchLabel], gt_count: u64) -> Option<f64> {
    if gt_count == 0 {
        return None;
    }
    let n = labels.len();
    let mut precisions = Vec::with_capacity(n);
    let mut recalls = Vec::with_capacity(n);
    let mut tp = 0u64;
    let mut fp = 0u64;
    for label in labels {
        if label.tp {
            tp += 1;
        } else {
            fp += 1;
        }
        precisions.push(tp as f64 / (tp + fp) as f64);
        recalls.push(tp as f64 / gt_count as f64);
    }
    // Precision envelope: max precision at recall >= r.
    for i in (0..n.saturating_sub(1)).rev() {
        precisions[i] = precisions[i].max(precisions[i + 1]);
    }
    let mut total = 0.0;
    let mut idx = 0usize;
    for k in 0..=100u32 {
        let r = k as f64 / 100.0;
        while idx < n && recalls[idx] < r {
            idx += 1;
        }
        if idx < n {
            total += precisions[idx];
        }
    }
    Some(total / 101.0)
}

/// Per-class evaluation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAP {
    pub class: DefectClass,
    pub bbox_ap: Option<f64>,
    pub segmentation_ap: Option<f64>,
    pub gt_count: u64,
    pub pred_count: u64,
}

/// Dataset-level evaluation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub per_class: Vec<ClassAP>,
    pub map_bbox: Option<f64>,
    pub map_segmentation: Option<f64>,
}

/// Mean of per-class APs: the mAP aggregator. None for an empty slice.
pub fn aggregate_map(aps: &[f64]) -> Option<f64> {
    if aps.is_empty() {
        return None;
    }
    Some(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Ground-truth-count weighted mean of per-class APs.
pub fn aggregate_map_weighted(aps_with_counts: &[(f64, u64)]) -> Option<f64> {
    let total: u64 = aps_with_counts.iter().map(|&(_, n)| n).sum();
    if total == 0 {
        return None;
    }
    Some(
        aps_with_counts
            .iter()
            .map(|&(ap, n)| ap * n as f64)
            .sum::<f64>()
            / total as f64,
    )
}

struct PooledLabel {
    score: f64,
    image_id: String,
    index: usize,
    tp: bool,
}

/// Evaluate dataset predictions against ground truth.
///
/// Predictions below the score threshold are discarded first. Matching is
/// greedy per image and class; labels pool globally with the deterministic
/// tie-break (score desc, image id, instance index) before the AP
/// computation. The mAP averages classes that have ground truth.
pub fn evaluate(
    preds: &BTreeMap<String, Vec<DefectInstance>>,
    gt: &GroundTruth,
    cfg: &EvalConfig,
) -> Result<EvalSummary> {
    cfg.validate()?;
    for image_id in preds.keys() {
        if !gt.images.contains_key(image_id) {
            return Err(Error::UnknownImageId(image_id.clone()));
        }
    }

    let kinds: Vec<MatchKind> = match cfg.mask_mode {
        MaskMode::Box => vec![MatchKind::Box],
        MaskMode::Mask => vec![MatchKind::Mask],
        MaskMode::Both => vec![MatchKind::Box, MatchKind::Mask],
    };

    let mut per_class = Vec::with_capacity(DefectClass::ALL.len());
    for class in DefectClass::ALL {
        let gt_count = gt.count_for(class);
        let mut pred_count = 0u64;
        let mut aps: BTreeMap<&'static str, Option<f64>> = BTreeMap::new();
        for &kind in &kinds {
            let mut pooled: Vec<PooledLabel> = Vec::new();
            for (image_id, gt_instances) in &gt.images {
                let empty = Vec::new();
                let image_preds = preds.get(image_id).unwrap_or(&empty);
                // Keep original per-image indices through filtering.
                let indexed: Vec<(usize, &DefectInstance)> = image_preds
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.class == class && p.score >= cfg.score_threshold)
                    .collect();
                let class_preds: Vec<DefectInstance> =
                    indexed.iter().map(|(_, p)| (*p).clone()).collect();
                let class_gts: Vec<GtInstance> = gt_instances
                    .iter()
                    .filter(|g| g.class == class)
                    .cloned()
                    .collect();
                let labels = match_predictions(&class_preds, &class_gts, cfg, kind)?;
                // match_predictions visits by (score desc, local index); map
                // back to original indices for the global tie-break.
                let mut order: Vec<usize> = (0..class_preds.len()).collect();
                order.sort_by(|&i, &j| {
                    class_preds[j].score
                        .partial_cmp(&class_preds[i].score)
                        .unwrap()
                        .then(i.cmp(&j))
                });
                for (label, &local) in labels.iter().zip(&order) {
                    pooled.push(PooledLabel {
                        score: label.score,
                        image_id: image_id.clone(),
                        index: indexed[local].0,
                        tp: label.tp,
                    });
                }
            }
            if kind == kinds[0] {
                pred_count = pooled.len() as u64;
            }
            pooled.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap()
                    .then_with(|| a.image_id.cmp(&b.image_id))
                    .then_with(|| a.index.cmp(&b.index))
            });
            let labels: Vec<MatchLabel> = pooled
                .iter()
                .map(|p| MatchLabel {
                    score: p.score,
                    tp: p.tp,
                })
                .collect();
            let name = match kind {
                MatchKind::Box => "box",
                MatchKind::Mask => "mask",
            };
            aps.insert(name, average_precision(&labels, gt_count));
        }
        per_class.push(ClassAP {
            class,
            bbox_ap: aps.get("box").copied().flatten(),
            segmentation_ap: aps.get("mask").copied().flatten(),
            gt_count,
            pred_count,
        });
    }

    let collect_map = |pick: fn(&ClassAP) -> Option<f64>| -> Option<f64> {
        let with_counts: Vec<(f64, u64)> = per_class
            .iter()
            .filter(|c| c.gt_count > 0)
            .filter_map(|c| pick(c).map(|ap| (ap, c.gt_count)))
            .collect();
        if cfg.weighted_map {
            aggregate_map_weighted(&with_counts)
        } else {
            let aps: Vec<f64> = with_counts.iter().map(|&(ap, _)| ap).collect();
            aggregate_map(&aps)
        }
    };
    let map_bbox = match cfg.mask_mode {
        MaskMode::Mask => None,
        _ => collect_map(|c| c.bbox_ap),
    };
    let map_segmentation = match cfg.mask_mode {
        MaskMode::Box => None,
        _ => collect_map(|c| c.segmentation_ap),
    };

    Ok(EvalSummary {
        per_class,
        map_bbox,
        map_segmentation,
    })
}

impl EvalSummary {
    /// Plain-text table: class rows with both APs, mAP footer.
    pub fn to_table(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            match v {
                Some(ap) => format!("{ap:.3}"),
                None => "-".to_string(),
            }
        }
        let mut out = String::new();
        out.push_str(&format!(
            "{:<18} {:>8} {:>16} {:>6} {:>6}\n",
            "Class", "BBox AP", "Segmentation AP", "GT", "Pred"
        ));
        for row in &self.per_class {
            out.push_str(&format!(
                "{:<18} {:>8} {:>16} {:>6} {:>6}\n",
                row.class.label(),
                cell(row.bbox_ap),
                cell(row.segmentation_ap),
                row.gt_count,
                row.pred_count
            ));
        }
        out.push_str(&format!(
            "{:<18} {:>8} {:>16}\n",
            "mAP",
            cell(self.map_bbox),
            cell(self.map_segmentation)
        ));
        out
    }
}
