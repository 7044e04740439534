//! Geometry kernels: box/mask IoU, greedy NMS, and the two ROI pooling
//! operators (bilinear align vs floor-quantized max pool).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Axis-aligned box with continuous, half-open area semantics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite box coordinate".into()));
        }
        if x_max < x_min || y_max < y_min {
            return Err(Error::InvalidArgument(format!(
                "inverted box ({x_min},{y_min},{x_max},{y_max})"
            )));
        }
        Ok(b)
    }

    /// Continuous box covering a mask's tight pixel bounding box.
    pub fn from_mask(mask: &BinaryMask) -> Option<Self> {
        mask.tight_bbox().map(|(x0, y0, x1, y1)| BBox {
            x_min: x0 as f64,
            y_min: y0 as f64,
            x_max: x1 as f64 + 1.0,
            y_max: y1 as f64 + 1.0,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// As `[x, y, w, h]`, the layout used in annotation interchange files.
    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.width(), self.height()]
    }
}

/// Intersection over union of two boxes; 0 when the union has zero area.
pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

/// Intersection over union of two masks; 0 when both are empty.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    let union = a.union_area(b)?;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Greedy non-maximum suppression.
///
/// Candidates are visited in descending score order (ties broken by lower
/// original index); a box is kept iff its IoU with every already-kept box is
/// strictly below the threshold. Returns original indices in kept order.
pub fn nms(boxes: &[(BBox, f64)], iou_threshold: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::InvalidArgument(format!(
            "nms threshold {iou_threshold} outside [0,1]"
        )));
    }
    if let Some((i, _)) = boxes.iter().enumerate().find(|(_, (_, s))| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite score at index {i}"
        )));
    }
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| {
        boxes[j].1
            .partial_cmp(&boxes[i].1)
            .unwrap()
            .then(i.cmp(&j))
    });
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        if kept
            .iter()
            .all(|&k| box_iou(&boxes[i].0, &boxes[k].0) < iou_threshold)
        {
            kept.push(i);
        }
    }
    Ok(kept)
}

/// A dense float grid with one or more channels, row-major per channel.
///
/// The value stored at cell `(i, j)` of a channel sits at continuous
/// coordinate `(i, j)`; sampling outside the grid clamps to the border.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    width: u32,
    height: u32,
    channels: u32,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(width: u32, height: u32, channels: u32, values: Vec<f64>) -> Result<Self> {
        let expected = width as usize * height as usize * channels as usize;
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "feature buffer length {} does not match {}x{}x{}",
                values.len(),
                width,
                height,
                channels
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "non-finite feature value".to_string(),
            ));
        }
        Ok(FeatureMap {
            width,
            height,
            channels,
            values,
        })
    }

    /// Single-channel map from a per-cell function.
    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> f64) -> Self {
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        FeatureMap {
            width,
            height,
            channels: 1,
            values,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, channel: u32, x: u32, y: u32) -> f64 {
        let plane = self.width as usize * self.height as usize;
        self.values[channel as usize * plane + y as usize * self.width as usize + x as usize]
    }

    /// Bilinear sample at a continuous coordinate with border clamping.
    fn sample_bilinear(&self, channel: u32, x: f64, y: f64) -> f64 {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xc.floor() as u32;
        let y0 = yc.floor() as u32;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        let v00 = self.at(channel, x0, y0);
        let v10 = self.at(channel, x1, y0);
        let v01 = self.at(channel, x0, y1);
        let v11 = self.at(channel, x1, y1);
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    }
}

/// Result of pooling an ROI: the pooled grid, plus a flag marking a
/// degenerate (zero-area) ROI whose output is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub grid: FeatureMap,
    pub degenerate: bool,
}

fn zero_pooled(out_w: u32, out_h: u32, channels: u32) -> Pooled {
    Pooled {
        grid: FeatureMap {
            width: out_w,
            height: out_h,
            channels,
            values: vec![0.0; out_w as usize * out_h as usize * channels as usize],
        },
        degenerate: true,
    }
}

/// ROI-Align: split the ROI into `out_w`×`out_h` equal bins, bilinearly
/// sample `samples_per_axis`² points per bin at offsets `(k+0.5)/s` of the
/// bin size, and average them.
pub fn roi_align(
    fm: &FeatureMap,
    roi: &BBox,
    out_w: u32,
    out_h: u32,
    samples_per_axis: u32,
) -> Result<Pooled> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidArgument("zero output size".into()));
    }
    if samples_per_axis == 0 {
        return Err(Error::InvalidArgument("samples_per_axis must be >= 1".into()));
    }
    if fm.width == 0 || fm.height == 0 {
        return Err(Error::InvalidArgument("empty feature map".into()));
    }
    if roi.area() == 0.0 {
        return Ok(zero_pooled(out_w, out_h, fm.channels));
    }
    let bin_w = roi.width() / out_w as f64;
    let bin_h = roi.height() / out_h as f64;
    let s = samples_per_axis;
    let inv_n = 1.0 / (s as f64 * s as f64);
    let mut values =
        Vec::with_capacity(out_w as usize * out_h as usize * fm.channels as usize);
    for c in 0..fm.channels {
        for by in 0..out_h {
            for bx in 0..out_w {
                let x0 = roi.x_min + bx as f64 * bin_w;
                let y0 = roi.y_min + by as f64 * bin_h;
                let mut acc = 0.0;
                for ky in 0..s {
                    let sy = y0 + (ky as f64 + 0.5) / s as f64 * bin_h;
                    for kx in 0..s {
                        let sx = x0 + (kx as f64 + 0.5) / s as f64 * bin_w;
                        acc += fm.sample_bilinear(c, sx, sy);
                    }
                }
                values.push(acc * inv_n);
            }
        }
    }
    Ok(Pooled {
        grid: FeatureMap {
            width: out_w,
            height: out_h,
            channels: fm.channels,
            values,
        },
        degenerate: false,
    })
}

/// ROI-Pool: floor-quantize the ROI to integer cells and take the max over
/// each output bin's sub-window. Empty sub-windows fall back to the nearest
/// valid cell, so sub-cell ROI offsets are invisible to the output.
pub fn roi_pool(fm: &FeatureMap, roi: &BBox, out_w: u32, out_h: u32) -> Result<Pooled> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidArgument("zero output size".into()));
    }
    if fm.width == 0 || fm.height == 0 {
        return Err(Error::InvalidArgument("empty feature map".into()));
    }
    if roi.area() == 0.0 {
        return Ok(zero_pooled(out_w, out_h, fm.channels));
    }
    // Quantize, then clamp into the grid.
    let qx0 = (roi.x_min.floor() as i64).clamp(0, fm.width as i64 - 1);
    let qy0 = (roi.y_min.floor() as i64).clamp(0, fm.height as i64 - 1);
    let qx1 = (roi.x_max.floor() as i64).clamp(qx0 + 1, fm.width as i64);
    let qy1 = (roi.y_max.floor() as i64).clamp(qy0 + 1, fm.height as i64);
    let rw = (qx1 - qx0) as f64;
    let rh = (qy1 - qy0) as f64;

    let mut values =
        Vec::with_capacity(out_w as usize * out_h as usize * fm.channels as usize);
    for c in 0..fm.channels {
        for by in 0..out_h {
            let mut ys = qy0 + (by as f64 * rh / out_h as f64).floor() as i64;
            let mut ye = qy0 + ((by + 1) as f64 * rh / out_h as f64).ceil() as i64;
            if ys >= ye {
                ys = ys.min(qy1 - 1);
                ye = ys + 1;
            }
            for bx in 0..out_w {
                let mut xs = qx0 + (bx as f64 * rw / out_w as f64).floor() as i64;
                let mut xe = qx0 + ((bx + 1) as f64 * rw / out_w as f64).ceil() as i64;
                if xs >= xe {
                    xs = xs.min(qx1 - 1);
                    xe = xs + 1;
                }
                let mut best = f64::NEG_INFINITY;
                for y in ys..ye {
                    for x in xs..xe {
                        best = best.max(fm.at(c, x as u32, y as u32));
                    }
                }
                values.push(best);
            }
        }
    }
    Ok(Pooled {
        grid: FeatureMap {
            width: out_w,
            height: out_h,
            channels: fm.channels,
            values,
        },
        degenerate: false,
    })
}
