//! Rule-based reference segmentor: estimates the line/space pattern, finds
//! residual components against the ideal raster, classifies them into the six
//! defect classes, and speaks the prediction-file format so an external
//! model's output can stand in for the built-in rules.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::defect::DefectClass;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::kernels::BBox;
use crate::mask::{rle_decode, rle_encode, BinaryMask, RleMask};
use crate::rules;

/// One detected defect: class, confidence, tight box, and mask.
#[derive(Debug, Clone)]
pub struct DefectInstance {
    pub class: DefectClass,
    pub score: f64,
    pub bbox: BBox,
    pub mask: BinaryMask,
}

impl DefectInstance {
    /// Build from a nonempty mask; the bbox is the mask's tight box.
    pub fn from_mask(class: DefectClass, score: f64, mask: BinaryMask) -> Result<Self> {
        let bbox = BBox::from_mask(&mask)
            .ok_or_else(|| Error::InvalidArgument("instance mask is empty".into()))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidArgument(format!(
                "score {score} outside [0,1]"
            )));
        }
        Ok(DefectInstance {
            class,
            score,
            bbox,
            mask,
        })
    }
}

/// Estimated geometric prior of a line/space raster.
///
/// `line_level` and `space_level` are the mean gray values of the two
/// binarization classes; the residual score normalizes against their gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternModel {
    pub pitch: u32,
    pub line_width: u32,
    /// x-offset of the first line's left edge, in `[0, pitch)`.
    pub phase: u32,
    /// True when lines are brighter than spaces.
    pub bright_lines: bool,
    pub binarization_threshold: u8,
    pub line_level: f64,
    pub space_level: f64,
}

impl PatternModel {
    /// Whether column `x` belongs to a line under the ideal pattern.
    pub fn is_line_col(&self, x: u32) -> bool {
        let rem = (x as i64 - self.phase as i64).rem_euclid(self.pitch as i64) as u32;
        rem < self.line_width
    }

    /// Pattern period index of column `x` (spaces inherit their line's index).
    pub fn period_index(&self, x: u32) -> i64 {
        (x as i64 - self.phase as i64).div_euclid(self.pitch as i64)
    }

    /// Left edge of the line with the given period index, unclamped.
    pub fn line_start(&self, k: i64) -> i64 {
        self.phase as i64 + k * self.pitch as i64
    }

    /// The ideal (defect-free) binary raster.
    pub fn ideal_mask(&self, width: u32, height: u32) -> BinaryMask {
        let cols: Vec<bool> = (0..width).map(|x| self.is_line_col(x)).collect();
        BinaryMask::from_fn(width, height, |x, _| cols[x as usize])
    }

    /// Ideal gray value of column `x`.
    pub fn ideal_gray(&self, x: u32) -> f64 {
        if self.is_line_col(x) {
            self.line_level
        } else {
            self.space_level
        }
    }
}

/// Tunable thresholds of the rule-based segmentor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    /// Residual components below this area are dropped as noise.
    pub min_area: u64,
    /// Thin vs single bridge threshold, as a fraction of the line width.
    pub thin_ratio: f64,
    /// Maximum per-space centroid y-spread for a horizontal multi-bridge.
    pub h_tolerance: f64,
    /// Collapse height threshold, in pitches.
    pub collapse_min_pitches: u32,
    /// Radius of the horizontal opening that suppresses line-edge roughness
    /// residue (strips up to `2*radius` px wide are removed).
    pub edge_open_radius: u32,
    /// Column slack when deciding that a bridge segment reaches a line.
    pub merge_slack: u32,
    /// Maximum vertical gap between bridge segments merged across a line,
    /// in pitches.
    pub merge_gap_pitches: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            min_area: 8,
            thin_ratio: rules::THIN_RATIO,
            h_tolerance: rules::H_TOLERANCE_PX,
            collapse_min_pitches: rules::COLLAPSE_MIN_HEIGHT_PITCHES,
            edge_open_radius: 1,
            merge_slack: 2,
            merge_gap_pitches: 1.0,
        }
    }
}

/// Otsu's threshold over a 256-bin histogram; returns the first gray level
/// of the bright class.
pub fn otsu_threshold(hist: &[u64; 256]) -> u8 {
    let total: u64 = hist.iter().sum();
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let mut w0 = 0u64;
    let mut sum0 = 0.0;
    let mut best = (0usize, f64::MIN);
    for (t, &count) in hist.iter().enumerate() {
        w0 += count;
        sum0 += t as f64 * count as f64;
        if w0 == 0 {
            continue;
        }
        let w1 = total - w0;
        if w1 == 0 {
            break;
        }
        let mu0 = sum0 / w0 as f64;
        let mu1 = (sum_all - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (mu0 - mu1).powi(2);
        if between > best.1 {
            best = (t, between);
        }
    }
    (best.0 + 1).min(255) as u8
}

/// Estimate the line/space pattern of an image.
///
/// Pitch comes from the dominant autocorrelation peak of the column-mean
/// profile, phase and line width from thresholded profile runs, and the
/// binarization threshold from Otsu's method on the global histogram.
pub fn estimate_pattern(img: &GrayImage) -> Result<PatternModel> {
    if img.width() < 4 || img.height() == 0 {
        return Err(Error::NoPattern("image too small".into()));
    }
    let profile = img.column_means();
    let n = profile.len();
    let mean = profile.iter().sum::<f64>() / n as f64;
    let var: f64 = profile.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var < 1e-9 {
        return Err(Error::NoPattern("flat column-mean profile".into()));
    }

    // Normalized autocorrelation over lags 2..=width/2; keep local maxima.
    let denom: f64 = profile.iter().map(|v| (v - mean).powi(2)).sum();
    let max_lag = n / 2;
    let corr: Vec<f64> = (0..=max_lag)
        .map(|lag| {
            let mut acc = 0.0;
            for i in 0..n - lag {
                acc += (profile[i] - mean) * (profile[i + lag] - mean);
            }
            acc / denom
        })
        .collect();
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for lag in 2..max_lag {
        if corr[lag] >= corr[lag - 1] && corr[lag] >= corr[lag + 1] {
            peaks.push((lag, corr[lag]));
        }
    }
    let best = peaks
        .iter()
        .map(|&(_, r)| r)
        .fold(f64::MIN, f64::max);
    if peaks.is_empty() || best < 0.2 {
        return Err(Error::NoPattern(
            "autocorrelation of the column-mean profile has no dominant peak".into(),
        ));
    }
    // Prefer the fundamental period over its multiples.
    let pitch = peaks
        .iter()
        .filter(|&&(_, r)| r >= 0.9 * best)
        .map(|&(lag, _)| lag)
        .min()
        .unwrap() as u32;

    let threshold = otsu_threshold(&img.histogram());

    // Bright/dark levels from the binarization classes.
    let mut bright_sum = 0.0;
    let mut bright_n = 0u64;
    let mut dark_sum = 0.0;
    let mut dark_n = 0u64;
    for (v, &c) in img.histogram().iter().enumerate() {
        if v as u8 >= threshold {
            bright_sum += v as f64 * c as f64;
            bright_n += c;
        } else {
            dark_sum += v as f64 * c as f64;
            dark_n += c;
        }
    }
    if bright_n == 0 || dark_n == 0 {
        return Err(Error::NoPattern("single-class gray histogram".into()));
    }
    let line_level = bright_sum / bright_n as f64;
    let space_level = dark_sum / dark_n as f64;

    // Runs of bright columns in the profile give phase and line width.
    let bright_cols: Vec<bool> = profile.iter().map(|&v| v >= threshold as f64).collect();
    let mut runs: Vec<(usize, usize)> = Vec::new(); // (start, len)
    let mut i = 0;
    while i < n {
        if bright_cols[i] {
            let start = i;
            while i < n && bright_cols[i] {
                i += 1;
            }
            runs.push((start, i - start));
        } else {
            i += 1;
        }
    }
    // Only whole runs (not clipped at either border) are trustworthy.
    let complete: Vec<(usize, usize)> = runs
        .iter()
        .copied()
        .filter(|&(s, l)| s > 0 && s + l < n)
        .collect();
    if complete.len() < 2 {
        return Err(Error::NoPattern(
            "fewer than two complete bright runs in the profile".into(),
        ));
    }
    let mut widths: Vec<usize> = complete.iter().map(|&(_, l)| l).collect();
    widths.sort_unstable();
    let line_width = (widths[widths.len() / 2] as u32).clamp(1, pitch - 1);

    // Circular mean of run starts modulo the pitch.
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    for &(s, _) in &complete {
        let a = std::f64::consts::TAU * (s % pitch as usize) as f64 / pitch as f64;
        sx += a.cos();
        sy += a.sin();
    }
    let ang = sy.atan2(sx).rem_euclid(std::f64::consts::TAU);
    let phase = ((ang / std::f64::consts::TAU * pitch as f64).round() as u32) % pitch;

    Ok(PatternModel {
        pitch,
        line_width,
        phase,
        bright_lines: true,
        binarization_threshold: threshold,
        line_level,
        space_level,
    })
}

/// Pixels at or above the threshold.
pub fn threshold_mask(img: &GrayImage, threshold: u8) -> BinaryMask {
    BinaryMask::from_fn(img.width(), img.height(), |x, y| img.get(x, y) >= threshold)
}

/// Morphological opening with a horizontal 1x(2r+1) element. Removes
/// vertical strips up to 2r px wide; solid rectangles pass unchanged.
pub fn open_horizontal(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let r = radius as i64;
    let eroded = BinaryMask::from_fn(w, h, |x, y| {
        (-r..=r).all(|dx| {
            let xx = x as i64 + dx;
            xx >= 0 && xx < w as i64 && mask.get(xx as u32, y)
        })
    });
    BinaryMask::from_fn(w, h, |x, y| {
        (-r..=r).any(|dx| {
            let xx = x as i64 + dx;
            xx >= 0 && xx < w as i64 && eroded.get(xx as u32, y)
        })
    })
}

/// 8-connected components of a mask, in row-major discovery order.
pub fn connected_components(mask: &BinaryMask) -> Vec<Vec<(u32, u32)>> {
    let (w, h) = (mask.width(), mask.height());
    let mut visited = BinaryMask::new(w, h);
    let mut components = Vec::new();
    let mut stack: Vec<(u32, u32)> = Vec::new();
    for (sx, sy) in mask.iter_set() {
        if visited.get(sx, sy) {
            continue;
        }
        let mut pixels = Vec::new();
        visited.set(sx, sy, true);
        stack.push((sx, sy));
        while let Some((x, y)) = stack.pop() {
            pixels.push((x, y));
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let (nx, ny) = (nx as u32, ny as u32);
                    if mask.get(nx, ny) && !visited.get(nx, ny) {
                        visited.set(nx, ny, true);
                        stack.push((nx, ny));
                    }
                }
            }
        }
        components.push(pixels);
    }
    components
}

/// Why a residual component could not be classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// The component is empty.
    Empty,
    /// Bright-excess and dark-deficit pixels are mixed beyond tolerance.
    MixedResidual,
}

/// Outcome of classifying one residual component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Classified(DefectClass),
    Rejected(RejectReason),
}

/// A residual component the segmentor could not classify; kept so nothing is
/// silently dropped.
#[derive(Debug, Clone)]
pub struct RejectedComponent {
    pub mask: BinaryMask,
    pub reason: RejectReason,
}

/// Everything the segmentor found in one image.
#[derive(Debug, Clone, Default)]
pub struct Detections {
    pub instances: Vec<DefectInstance>,
    pub rejects: Vec<RejectedComponent>,
}

/// Decision tree over a residual component (pixels where the observed
/// binarization disagrees with the ideal raster).
///
/// Bright-excess pixels live in space columns, dark-deficit pixels in line
/// columns. Collapse is tested before the bridge rules because a collapse
/// residual also fills a space.
pub fn classify_instance(
    component: &BinaryMask,
    model: &PatternModel,
    cfg: &RuleConfig,
) -> Classification {
    let mut space_px: Vec<(u32, u32)> = Vec::new();
    let mut line_px = 0usize;
    for (x, y) in component.iter_set() {
        if model.is_line_col(x) {
            line_px += 1;
        } else {
            space_px.push((x, y));
        }
    }
    let total = line_px + space_px.len();
    if total == 0 {
        return Classification::Rejected(RejectReason::Empty);
    }
    let frac_line = line_px as f64 / total as f64;
    if space_px.is_empty() || frac_line > 0.75 {
        return Classification::Classified(DefectClass::LineBreak);
    }
    if frac_line > 0.25 {
        return Classification::Rejected(RejectReason::MixedResidual);
    }

    let spaces: BTreeSet<i64> = space_px.iter().map(|&(x, _)| model.period_index(x)).collect();
    if spaces.len() == 1 {
        let y_min = space_px.iter().map(|&(_, y)| y).min().unwrap();
        let y_max = space_px.iter().map(|&(_, y)| y).max().unwrap();
        let run = y_max - y_min + 1;
        if run >= cfg.collapse_min_pitches * model.pitch {
            return Classification::Classified(DefectClass::LineCollapse);
        }
        // Thickness along the (vertical) line direction: tallest column.
        let mut per_col: BTreeMap<u32, u32> = BTreeMap::new();
        for &(x, _) in &space_px {
            *per_col.entry(x).or_insert(0) += 1;
        }
        let thickness = per_col.values().copied().max().unwrap_or(0) as f64;
        if thickness < cfg.thin_ratio * model.line_width as f64 {
            return Classification::Classified(DefectClass::ThinBridge);
        }
        return Classification::Classified(DefectClass::SingleBridge);
    }

    // Multi-space bridge: horizontal iff the per-space centroid rows agree.
    let mut sums: BTreeMap<i64, (f64, u64)> = BTreeMap::new();
    for &(x, y) in &space_px {
        let e = sums.entry(model.period_index(x)).or_insert((0.0, 0));
        e.0 += y as f64 + 0.5;
        e.1 += 1;
    }
    let centroids: Vec<f64> = sums.values().map(|&(s, n)| s / n as f64).collect();
    let spread = centroids.iter().cloned().fold(f64::MIN, f64::max)
        - centroids.iter().cloned().fold(f64::MAX, f64::min);
    if spread <= cfg.h_tolerance {
        Classification::Classified(DefectClass::MultiBridgeH)
    } else {
        Classification::Classified(DefectClass::MultiBridgeNh)
    }
}

struct Component {
    pixels: Vec<(u32, u32)>,
    min_x: u32,
    max_x: u32,
    min_y: u32,
    max_y: u32,
    /// Space period indices touched by bright-excess pixels.
    spaces: BTreeSet<i64>,
    /// Fraction of pixels on line columns.
    frac_line: f64,
}

fn component_stats(pixels: Vec<(u32, u32)>, model: &PatternModel) -> Component {
    let mut min_x = u32::MAX;
    let mut max_x = 0;
    let mut min_y = u32::MAX;
    let mut max_y = 0;
    let mut spaces = BTreeSet::new();
    let mut line_px = 0usize;
    for &(x, y) in &pixels {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
        if model.is_line_col(x) {
            line_px += 1;
        } else {
            spaces.insert(model.period_index(x));
        }
    }
    let frac_line = line_px as f64 / pixels.len() as f64;
    Component {
        pixels,
        min_x,
        max_x,
        min_y,
        max_y,
        spaces,
        frac_line,
    }
}

fn find_root(parents: &mut Vec<usize>, i: usize) -> usize {
    if parents[i] != i {
        let root = find_root(parents, parents[i]);
        parents[i] = root;
        root
    } else {
        i
    }
}

/// Detect, classify, and mask defect instances in one image.
///
/// Residual components of (observed XOR ideal) are cleaned with a horizontal
/// opening, filtered by `min_area`, merged across lines when bridge segments
/// in adjacent spaces line up, classified, and scored by normalized residual
/// contrast. Instances come back sorted by score, descending.
pub fn detect_instances(
    img: &GrayImage,
    model: &PatternModel,
    cfg: &RuleConfig,
) -> Result<Detections> {
    let (w, h) = (img.width(), img.height());
    let observed = threshold_mask(img, model.binarization_threshold);
    let ideal = model.ideal_mask(w, h);
    let diff = observed.xor(&ideal)?;
    let opened = open_horizontal(&diff, cfg.edge_open_radius);

    let comps: Vec<Component> = connected_components(&opened)
        .into_iter()
        .filter(|px| px.len() as u64 >= cfg.min_area)
        .map(|px| component_stats(px, model))
        .collect();

    // Merge bridge segments that flank the same line at compatible rows.
    let mut parents: Vec<usize> = (0..comps.len()).collect();
    let merge_gap = (cfg.merge_gap_pitches * model.pitch as f64).round() as i64;
    for i in 0..comps.len() {
        for j in i + 1..comps.len() {
            let (a, b) = (&comps[i], &comps[j]);
            // Only clean single-space bright segments participate.
            if a.spaces.len() != 1 || b.spaces.len() != 1 {
                continue;
            }
            if a.frac_line > 0.25 || b.frac_line > 0.25 {
                continue;
            }
            let sa = *a.spaces.first().unwrap();
            let sb = *b.spaces.first().unwrap();
            let (left, right, s) = if sb == sa + 1 {
                (a, b, sa)
            } else if sa == sb + 1 {
                (b, a, sb)
            } else {
                continue;
            };
            // The line between spaces s and s+1 has period index s+1.
            let line_x0 = model.line_start(s + 1);
            let reaches_left = left.max_x as i64 >= line_x0 - 1 - cfg.merge_slack as i64;
            let reaches_right =
                right.min_x as i64 <= line_x0 + model.line_width as i64 + cfg.merge_slack as i64;
            if !reaches_left || !reaches_right {
                continue;
            }
            let y_gap = (left.min_y.max(right.min_y) as i64
                - left.max_y.min(right.max_y) as i64
                - 1)
                .max(0);
            if y_gap > merge_gap {
                continue;
            }
            let (ri, rj) = (find_root(&mut parents, i), find_root(&mut parents, j));
            if ri != rj {
                let (lo, hi) = (ri.min(rj), ri.max(rj));
                parents[hi] = lo;
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..comps.len() {
        let root = find_root(&mut parents, i);
        groups.entry(root).or_default().push(i);
    }

    let mut detections = Detections::default();
    for (_, members) in groups {
        // Residual union (no fills): the component handed to the classifier.
        let mut residual = BinaryMask::new(w, h);
        for &i in &members {
            for &(x, y) in &comps[i].pixels {
                residual.set(x, y, true);
            }
        }
        let class = match classify_instance(&residual, model, cfg) {
            Classification::Classified(c) => c,
            Classification::Rejected(reason) => {
                detections.rejects.push(RejectedComponent {
                    mask: residual,
                    reason,
                });
                continue;
            }
        };

        // Reported mask: residual plus class-specific completion.
        let mut mask = residual.clone();
        match class {
            DefectClass::MultiBridgeH | DefectClass::MultiBridgeNh => {
                // Fill the line crossings between consecutive segments.
                let mut ordered: Vec<&Component> = members.iter().map(|&i| &comps[i]).collect();
                ordered.sort_by_key(|c| c.min_x);
                for pair in ordered.windows(2) {
                    let (a, b) = (pair[0], pair[1]);
                    let y0 = a.min_y.min(b.min_y);
                    let y1 = a.max_y.max(b.max_y);
                    for x in a.max_x + 1..b.min_x {
                        for y in y0..=y1 {
                            mask.set(x, y, true);
                        }
                    }
                }
            }
            DefectClass::LineCollapse => {
                // Extend over the two flanking lines for the full run height.
                let c = &comps[members[0]];
                let s = *c.spaces.first().unwrap();
                let x0 = model.line_start(s).max(0) as u32;
                let x1 = (model.line_start(s + 1) + model.line_width as i64).min(w as i64) as u32;
                for x in x0..x1 {
                    for y in c.min_y..=c.max_y {
                        mask.set(x, y, true);
                    }
                }
            }
            _ => {}
        }

        // Score: normalized mean residual contrast over the residual pixels.
        let contrast = (model.line_level - model.space_level).max(1.0);
        let mut acc = 0.0;
        let mut n = 0u64;
        for (x, y) in residual.iter_set() {
            acc += (img.get(x, y) as f64 - model.ideal_gray(x)).abs();
            n += 1;
        }
        let score = (acc / n.max(1) as f64 / contrast).min(1.0);

        detections
            .instances
            .push(DefectInstance::from_mask(class, score, mask)?);
    }

    detections
        .instances
        .sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    Ok(detections)
}

// ---------------------------------------------------------------------------
// Prediction file interface (JSON lines, one instance per record)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RleSegmentation {
    /// `[height, width]`.
    size: [u32; 2],
    counts: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct PredictionRecord {
    image_id: String,
    category_id: u32,
    score: f64,
    bbox: [f64; 4],
    segmentation: RleSegmentation,
}

/// Serialize per-image instances as JSON lines, sorted by image id.
pub fn write_predictions(per_image: &BTreeMap<String, Vec<DefectInstance>>) -> String {
    let mut out = String::new();
    for (image_id, instances) in per_image {
        for inst in instances {
            let rle = rle_encode(&inst.mask);
            let record = PredictionRecord {
                image_id: image_id.clone(),
                category_id: inst.class.category_id(),
                score: inst.score,
                bbox: inst.bbox.to_xywh(),
                segmentation: RleSegmentation {
                    size: [rle.height, rle.width],
                    counts: rle.counts,
                },
            };
            out.push_str(&serde_json::to_string(&record).expect("record serializes"));
            out.push('\n');
        }
    }
    out
}

/// Parse a prediction file into per-image instance lists.
///
/// Masks are RLE-decoded and each bbox is recomputed as its mask's tight
/// box; records with unknown categories, out-of-range scores, or
/// inconsistent RLE are rejected with their record index.
pub fn load_predictions(doc: &str) -> Result<BTreeMap<String, Vec<DefectInstance>>> {
    let mut per_image: BTreeMap<String, Vec<DefectInstance>> = BTreeMap::new();
    for (index, line) in doc.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord =
            serde_json::from_str(line).map_err(|e| Error::InvalidPrediction {
                index,
                reason: e.to_string(),
            })?;
        let class = DefectClass::from_category_id(record.category_id).map_err(|_| {
            Error::InvalidPrediction {
                index,
                reason: format!("unknown category id {}", record.category_id),
            }
        })?;
        if !(0.0..=1.0).contains(&record.score) {
            return Err(Error::InvalidPrediction {
                index,
                reason: format!("score {} outside [0,1]", record.score),
            });
        }
        let rle = RleMask {
            width: record.segmentation.size[1],
            height: record.segmentation.size[0],
            counts: record.segmentation.counts,
        };
        let mask = rle_decode(&rle).map_err(|e| Error::InvalidPrediction {
            index,
            reason: e.to_string(),
        })?;
        let inst =
            DefectInstance::from_mask(class, record.score, mask).map_err(|e| {
                Error::InvalidPrediction {
                    index,
                    reason: e.to_string(),
                }
            })?;
        per_image.entry(record.image_id).or_default().push(inst);
    }
    Ok(per_image)
}
