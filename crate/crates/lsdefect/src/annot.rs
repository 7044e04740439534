//! Annotation data model and ingestion: polygon parsing, rasterization to
//! binary masks, COCO-style export, and raster/annotation augmentation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::defect::DefectClass;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::mask::BinaryMask;

/// A closed polygon in pixel coordinates, at least 3 points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    points: Vec<(f64, f64)>,
}

impl Polygon {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "{} points, need at least 3",
                points.len()
            )));
        }
        if points
            .iter()
            .any(|&(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(Error::InvalidPolygon("non-finite coordinate".into()));
        }
        Ok(Polygon { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Shoelace area with sign (positive for counter-clockwise in math coords).
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        let mut acc = 0.0;
        for i in 0..n {
            let (x0, y0) = self.points[i];
            let (x1, y1) = self.points[(i + 1) % n];
            acc += x0 * y1 - x1 * y0;
        }
        acc / 2.0
    }

    /// `(x_min, y_min, x_max, y_max)` of the vertices.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut it = self.points.iter();
        let &(x0, y0) = it.next().unwrap();
        it.fold((x0, y0, x0, y0), |(a, b, c, d), &(x, y)| {
            (a.min(x), b.min(y), c.max(x), d.max(y))
        })
    }

    /// Apply an affine map to every vertex.
    pub fn transform(&self, m: &Affine) -> Polygon {
        Polygon {
            points: self.points.iter().map(|&(x, y)| m.apply(x, y)).collect(),
        }
    }

    /// Clamp every vertex into `[0, width] x [0, height]`.
    pub fn clamp(&self, width: u32, height: u32) -> Polygon {
        Polygon {
            points: self
                .points
                .iter()
                .map(|&(x, y)| (x.clamp(0.0, width as f64), y.clamp(0.0, height as f64)))
                .collect(),
        }
    }
}

/// One annotated defect instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub class: DefectClass,
    pub polygon: Polygon,
}

/// Ground truth for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAnnotation {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub instances: Vec<Instance>,
}

// ---------------------------------------------------------------------------
// Labelme ingestion / emission
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct LabelmeDoc {
    #[serde(rename = "imagePath")]
    image_path: String,
    #[serde(rename = "imageHeight")]
    image_height: u32,
    #[serde(rename = "imageWidth")]
    image_width: u32,
    shapes: Vec<LabelmeShape>,
}

#[derive(Deserialize)]
struct LabelmeShape {
    label: String,
    points: Vec<[f64; 2]>,
    shape_type: String,
}

/// Parse a Labelme polygon document into an [`ImageAnnotation`].
///
/// Only `shape_type == "polygon"` is supported; labels must be the canonical
/// snake_case forms. Vertex coordinates are clamped into the image frame.
pub fn parse_labelme(doc: &str) -> Result<ImageAnnotation> {
    let parsed: LabelmeDoc =
        serde_json::from_str(doc).map_err(|e| Error::MalformedDocument(e.to_string()))?;
    let mut instances = Vec::with_capacity(parsed.shapes.len());
    for (index, shape) in parsed.shapes.iter().enumerate() {
        if shape.shape_type != "polygon" {
            return Err(Error::UnsupportedShape {
                index,
                shape_type: shape.shape_type.clone(),
            });
        }
        let class = DefectClass::from_label(&shape.label)?;
        let poly = Polygon::new(shape.points.iter().map(|p| (p[0], p[1])).collect())?
            .clamp(parsed.image_width, parsed.image_height);
        instances.push(Instance {
            class,
            polygon: poly,
        });
    }
    let image_id = std::path::Path::new(&parsed.image_path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| parsed.image_path.clone());
    Ok(ImageAnnotation {
        image_id,
        width: parsed.image_width,
        height: parsed.image_height,
        instances,
    })
}

/// Emit an annotation as a Labelme polygon document.
pub fn write_labelme(ann: &ImageAnnotation) -> String {
    let shapes: Vec<serde_json::Value> = ann
        .instances
        .iter()
        .map(|inst| {
            serde_json::json!({
                "label": inst.class.label(),
                "points": inst.polygon.points().iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>(),
                "group_id": null,
                "shape_type": "polygon",
                "flags": {},
            })
        })
        .collect();
    let doc = serde_json::json!({
        "version": "5.2.1",
        "flags": {},
        "shapes": shapes,
        "imagePath": format!("{}.png", ann.image_id),
        "imageData": null,
        "imageHeight": ann.height,
        "imageWidth": ann.width,
    });
    serde_json::to_string_pretty(&doc).expect("labelme document serializes")
}

// ---------------------------------------------------------------------------
// Rasterization
// ---------------------------------------------------------------------------

/// Result of rasterizing a polygon. `degenerate` marks polygons with zero
/// area after removing repeated vertices; their mask is empty.
#[derive(Debug, Clone)]
pub struct RasterMask {
    pub mask: BinaryMask,
    pub degenerate: bool,
}

/// Scanline even-odd rasterization at pixel centers.
///
/// Pixel `(i, j)` is set iff its center `(i+0.5, j+0.5)` lies inside the
/// polygon; points exactly on an edge resolve by the half-open top-left rule
/// (left/top edges inside, right/bottom edges outside).
pub fn rasterize(poly: &Polygon, width: u32, height: u32) -> RasterMask {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(poly.points().len());
    for &p in poly.points() {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    let deduped = Polygon { points: pts };
    if deduped.points.len() < 3 || deduped.signed_area() == 0.0 {
        return RasterMask {
            mask: BinaryMask::new(width, height),
            degenerate: true,
        };
    }

    let mut mask = BinaryMask::new(width, height);
    let n = deduped.points.len();
    let mut xs: Vec<f64> = Vec::with_capacity(n);
    for j in 0..height {
        let y = j as f64 + 0.5;
        xs.clear();
        for i in 0..n {
            let (x0, y0) = deduped.points[i];
            let (x1, y1) = deduped.points[(i + 1) % n];
            if y0 == y1 {
                continue;
            }
            // Half-open in y: an edge spans [min, max).
            let (y_lo, y_hi) = if y0 < y1 { (y0, y1) } else { (y1, y0) };
            if y_lo <= y && y < y_hi {
                xs.push(x0 + (y - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in xs.chunks_exact(2) {
            // Fill pixel centers in [a, b).
            let start = (pair[0] - 0.5).ceil().max(0.0) as i64;
            let end = ((pair[1] - 0.5).ceil() as i64).min(width as i64);
            for i in start..end {
                mask.set(i as u32, j, true);
            }
        }
    }
    RasterMask {
        mask,
        degenerate: false,
    }
}

/// Trace the outer boundary of a 4-connected, hole-free pixel region as a
/// rectilinear polygon with vertices on the pixel-corner lattice.
///
/// Rasterizing the returned polygon reproduces the mask bit-exactly.
pub fn trace_boundary(mask: &BinaryMask) -> Result<Polygon> {
    let (w, h) = (mask.width(), mask.height());
    let at = |x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && mask.get(x as u32, y as u32)
    };
    // Directed edges with the region on the right of travel; each corner of a
    // 4-connected hole-free boundary has exactly one outgoing edge.
    let mut next: BTreeMap<(i64, i64), (i64, i64)> = BTreeMap::new();
    let mut edge_count = 0usize;
    for (x, y) in mask.iter_set() {
        let (x, y) = (x as i64, y as i64);
        let sides = [
            (!at(x, y - 1), (x, y), (x + 1, y)),         // top
            (!at(x + 1, y), (x + 1, y), (x + 1, y + 1)), // right
            (!at(x, y + 1), (x + 1, y + 1), (x, y + 1)), // bottom
            (!at(x - 1, y), (x, y + 1), (x, y)),         // left
        ];
        for (exposed, from, to) in sides {
            if exposed {
                if next.insert(from, to).is_some() {
                    return Err(Error::InvalidPolygon(
                        "ambiguous boundary (diagonally touching pixels)".into(),
                    ));
                }
                edge_count += 1;
            }
        }
    }
    let Some((&start, _)) = next.iter().next() else {
        return Err(Error::InvalidPolygon("empty mask has no boundary".into()));
    };
    let mut loop_points: Vec<(i64, i64)> = vec![start];
    let mut current = next[&start];
    let mut used = 1usize;
    while current != start {
        loop_points.push(current);
        current = *next.get(&current).ok_or_else(|| {
            Error::InvalidPolygon("open boundary chain".into())
        })?;
        used += 1;
        if used > edge_count {
            return Err(Error::InvalidPolygon("boundary walk does not close".into()));
        }
    }
    if used != edge_count {
        return Err(Error::InvalidPolygon(
            "mask is not a single hole-free region".into(),
        ));
    }
    // Merge collinear runs.
    let n = loop_points.len();
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let prev = loop_points[(i + n - 1) % n];
        let here = loop_points[i];
        let after = loop_points[(i + 1) % n];
        let d0 = (here.0 - prev.0, here.1 - prev.1);
        let d1 = (after.0 - here.0, after.1 - here.1);
        // Unit axis steps: collinear iff direction unchanged.
        if d0 != d1 {
            merged.push((here.0 as f64, here.1 as f64));
        }
    }
    Polygon::new(merged)
}

// ---------------------------------------------------------------------------
// COCO export
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CocoCategory {
    id: u32,
    name: &'static str,
    supercategory: &'static str,
}

#[derive(Serialize)]
struct CocoImage {
    id: u32,
    width: u32,
    height: u32,
    file_name: String,
}

#[derive(Serialize)]
struct CocoAnnotation {
    id: u32,
    image_id: u32,
    category_id: u32,
    segmentation: Vec<Vec<f64>>,
    bbox: [f64; 4],
    area: u64,
    iscrowd: u32,
}

#[derive(Serialize)]
struct CocoDataset {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

/// Export annotations as a COCO instances document.
///
/// Category ids follow labeling-convention order (`thin_bridge` = 1 through
/// `multi_bridge_nh` = 6); `area` is the rasterized mask popcount.
pub fn export_coco(annotations: &[ImageAnnotation]) -> Result<String> {
    let categories: Vec<CocoCategory> = DefectClass::ALL
        .iter()
        .map(|c| CocoCategory {
            id: c.category_id(),
            name: c.label(),
            supercategory: "defect",
        })
        .collect();

    let mut seen = std::collections::BTreeSet::new();
    let mut images = Vec::with_capacity(annotations.len());
    let mut records = Vec::new();
    let mut ann_id = 1u32;
    for (idx, ann) in annotations.iter().enumerate() {
        if !seen.insert(ann.image_id.clone()) {
            return Err(Error::DuplicateImageId(ann.image_id.clone()));
        }
        let image_id = idx as u32 + 1;
        images.push(CocoImage {
            id: image_id,
            width: ann.width,
            height: ann.height,
            file_name: format!("{}.png", ann.image_id),
        });
        for inst in &ann.instances {
            let (x0, y0, x1, y1) = inst.polygon.bounds();
            let area = rasterize(&inst.polygon, ann.width, ann.height).mask.area();
            let mut flat = Vec::with_capacity(inst.polygon.points().len() * 2);
            for &(x, y) in inst.polygon.points() {
                flat.push(x);
                flat.push(y);
            }
            records.push(CocoAnnotation {
                id: ann_id,
                image_id,
                category_id: inst.class.category_id(),
                segmentation: vec![flat],
                bbox: [x0, y0, x1 - x0, y1 - y0],
                area,
                iscrowd: 0,
            });
            ann_id += 1;
        }
    }
    let doc = CocoDataset {
        images,
        annotations: records,
        categories,
    };
    Ok(serde_json::to_string_pretty(&doc).expect("coco document serializes"))
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

/// Row-major 2x3 affine map: `(x, y) -> (a x + b y + c, d x + e y + f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub coeffs: [f64; 6],
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        coeffs: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    };

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let [a, b, c, d, e, f] = self.coeffs;
        (a * x + b * y + c, d * x + e * y + f)
    }

    /// Compose: apply `other` first, then `self`.
    pub fn then(&self, other: &Affine) -> Affine {
        let [a1, b1, c1, d1, e1, f1] = self.coeffs;
        let [a2, b2, c2, d2, e2, f2] = other.coeffs;
        Affine {
            coeffs: [
                a1 * a2 + b1 * d2,
                a1 * b2 + b1 * e2,
                a1 * c2 + b1 * f2 + c1,
                d1 * a2 + e1 * d2,
                d1 * b2 + e1 * e2,
                d1 * c2 + e1 * f2 + f1,
            ],
        }
    }

    pub fn inverse(&self) -> Result<Affine> {
        let [a, b, c, d, e, f] = self.coeffs;
        let det = a * e - b * d;
        if det.abs() < 1e-12 {
            return Err(Error::InvalidArgument(
                "augmentation map is not invertible".into(),
            ));
        }
        let (ia, ib, id, ie) = (e / det, -b / det, -d / det, a / det);
        Ok(Affine {
            coeffs: [ia, ib, -(ia * c + ib * f), id, ie, -(id * c + ie * f)],
        })
    }
}

/// One augmentation operation. Geometric ops are defined about the image
/// center; photometric ops leave annotations untouched. Hue and saturation
/// are documented identities on single-channel imagery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AugmentOp {
    /// Rotation in degrees, counter-clockwise in image coordinates.
    Rotate(f64),
    Translate(f64, f64),
    Shear(f64, f64),
    Scale(f64, f64),
    FlipX,
    FlipY,
    /// Gain about mid-gray 128.
    Contrast(f64),
    /// Additive gray-level offset.
    Brightness(f64),
    /// Identity on grayscale.
    Hue(f64),
    /// Identity on grayscale.
    Saturation(f64),
}

impl AugmentOp {
    /// The forward affine map for geometric ops; None for photometric ops.
    pub fn affine(&self, width: u32, height: u32) -> Result<Option<Affine>> {
        let cx = width as f64 / 2.0;
        let cy = height as f64 / 2.0;
        let about_center = |m: [f64; 6]| -> Affine {
            let to_origin = Affine {
                coeffs: [1.0, 0.0, -cx, 0.0, 1.0, -cy],
            };
            let back = Affine {
                coeffs: [1.0, 0.0, cx, 0.0, 1.0, cy],
            };
            back.then(&Affine { coeffs: m }).then(&to_origin)
        };
        let m = match *self {
            AugmentOp::Rotate(deg) => {
                let r = deg.to_radians();
                Some(about_center([
                    r.cos(),
                    -r.sin(),
                    0.0,
                    r.sin(),
                    r.cos(),
                    0.0,
                ]))
            }
            AugmentOp::Translate(dx, dy) => Some(Affine {
                coeffs: [1.0, 0.0, dx, 0.0, 1.0, dy],
            }),
            AugmentOp::Shear(kx, ky) => Some(about_center([1.0, kx, 0.0, ky, 1.0, 0.0])),
            AugmentOp::Scale(sx, sy) => {
                if sx <= 0.0 || sy <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "scale factors must be positive, got ({sx}, {sy})"
                    )));
                }
                Some(about_center([sx, 0.0, 0.0, 0.0, sy, 0.0]))
            }
            AugmentOp::FlipX => Some(Affine {
                coeffs: [-1.0, 0.0, width as f64, 0.0, 1.0, 0.0],
            }),
            AugmentOp::FlipY => Some(Affine {
                coeffs: [1.0, 0.0, 0.0, 0.0, -1.0, height as f64],
            }),
            _ => None,
        };
        Ok(m)
    }
}

/// Apply one augmentation to an image and its annotation.
///
/// Geometric ops resample the raster with nearest-neighbor interpolation
/// (out-of-frame source points take `fill`) and transform polygon vertices by
/// the same map. Photometric ops remap gray levels only.
pub fn augment(
    img: &GrayImage,
    ann: &ImageAnnotation,
    op: AugmentOp,
    fill: u8,
) -> Result<(GrayImage, ImageAnnotation)> {
    let (w, h) = (img.width(), img.height());
    if let Some(forward) = op.affine(w, h)? {
        let inv = forward.inverse()?;
        let mut out = GrayImage::filled(w, h, fill);
        for j in 0..h {
            for i in 0..w {
                let (sx, sy) = inv.apply(i as f64 + 0.5, j as f64 + 0.5);
                let px = sx.floor();
                let py = sy.floor();
                if px >= 0.0 && py >= 0.0 && px < w as f64 && py < h as f64 {
                    out.set(i, j, img.get(px as u32, py as u32));
                }
            }
        }
        let instances = ann
            .instances
            .iter()
            .map(|inst| Instance {
                class: inst.class,
                polygon: inst.polygon.transform(&forward),
            })
            .collect();
        let new_ann = ImageAnnotation {
            image_id: ann.image_id.clone(),
            width: ann.width,
            height: ann.height,
            instances,
        };
        return Ok((out, new_ann));
    }

    let map: Box<dyn Fn(u8) -> u8> = match op {
        AugmentOp::Contrast(c) => {
            if c < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "contrast gain must be non-negative, got {c}"
                )));
            }
            Box::new(move |v| ((v as f64 - 128.0) * c + 128.0).round().clamp(0.0, 255.0) as u8)
        }
        AugmentOp::Brightness(b) => {
            Box::new(move |v| (v as f64 + b).round().clamp(0.0, 255.0) as u8)
        }
        AugmentOp::Hue(_) | AugmentOp::Saturation(_) => Box::new(|v| v),
        _ => unreachable!("geometric ops handled above"),
    };
    let data: Vec<u8> = img.as_raw().iter().map(|&v| map(v)).collect();
    Ok((GrayImage::from_raw(w, h, data)?, ann.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(x0: f64, y0: f64, side: f64) -> Polygon {
        Polygon::new(vec![
            (x0, y0),
            (x0 + side, y0),
            (x0 + side, y0 + side),
            (x0, y0 + side),
        ])
        .unwrap()
    }

    /// Independent point-in-polygon oracle: even-odd parity of edge
    /// crossings at or left of the query point, matching the half-open
    /// top-left convention.
    fn point_in_polygon_oracle(poly: &Polygon, px: f64, py: f64) -> bool {
        let pts = poly.points();
        let n = pts.len();
        let mut crossings = 0;
        for i in 0..n {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % n];
            if y0 == y1 {
                continue;
            }
            let (y_lo, y_hi) = if y0 < y1 { (y0, y1) } else { (y1, y0) };
            if y_lo <= py && py < y_hi {
                let xi = x0 + (py - y0) * (x1 - x0) / (y1 - y0);
                if xi <= px {
                    crossings += 1;
                }
            }
        }
        crossings % 2 == 1
    }

    fn rasterize_oracle(poly: &Polygon, w: u32, h: u32) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| {
            point_in_polygon_oracle(poly, x as f64 + 0.5, y as f64 + 0.5)
        })
    }

    #[test]
    fn rasterize_unit_square_examples() {
        // (0,0),(4,0),(4,4),(0,4) on 8x8 fills exactly pixels 0..4 x 0..4.
        let m = rasterize(&square(0.0, 0.0, 4.0), 8, 8);
        assert!(!m.degenerate);
        assert_eq!(m.mask.area(), 16);
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(m.mask.get(x, y), x < 4 && y < 4);
            }
        }
    }

    #[test]
    fn rasterize_full_frame() {
        let m = rasterize(&square(0.0, 0.0, 480.0), 480, 480);
        assert_eq!(m.mask.area(), 230400);
    }

    #[test]
    fn rasterize_degenerate_collinear() {
        let poly = Polygon::new(vec![(1.0, 1.0), (3.0, 3.0), (5.0, 5.0)]).unwrap();
        let m = rasterize(&poly, 8, 8);
        assert!(m.degenerate);
        assert!(m.mask.is_empty());
    }

    #[test]
    fn rasterize_matches_point_oracle_on_irregular_polygon() {
        let poly = Polygon::new(vec![
            (1.2, 0.7),
            (6.9, 2.1),
            (5.4, 6.6),
            (3.0, 4.2),
            (0.8, 5.9),
        ])
        .unwrap();
        let got = rasterize(&poly, 8, 8).mask;
        assert_eq!(got, rasterize_oracle(&poly, 8, 8));
        assert!(got.area() > 0);
    }

    proptest! {
        #[test]
        fn rasterize_matches_oracle_random(
            xs in proptest::collection::vec(0.0f64..16.0, 3..8),
            ys in proptest::collection::vec(0.0f64..16.0, 3..8),
        ) {
            let n = xs.len().min(ys.len());
            let poly = Polygon::new(xs.iter().zip(&ys).take(n).map(|(&x, &y)| (x, y)).collect());
            if let Ok(poly) = poly {
                let got = rasterize(&poly, 16, 16).mask;
                prop_assert_eq!(got, rasterize_oracle(&poly, 16, 16));
            }
        }

        #[test]
        fn rasterize_translation_invariant(dx in 0u32..6, dy in 0u32..6) {
            let base = Polygon::new(vec![(1.0, 2.0), (7.0, 1.0), (8.0, 6.0), (2.0, 8.0)]).unwrap();
            let shifted = Polygon::new(
                base.points().iter().map(|&(x, y)| (x + dx as f64, y + dy as f64)).collect()
            ).unwrap();
            let a = rasterize(&base, 20, 20).mask.area();
            let b = rasterize(&shifted, 20, 20).mask.area();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn trace_boundary_round_trips_rect() {
        let mask = BinaryMask::from_fn(12, 9, |x, y| (3..7).contains(&x) && (2..5).contains(&y));
        let poly = trace_boundary(&mask).unwrap();
        assert_eq!(poly.points().len(), 4);
        let back = rasterize(&poly, 12, 9).mask;
        assert_eq!(back, mask);
    }

    #[test]
    fn trace_boundary_round_trips_staircase() {
        // L-shaped union of two rects.
        let mask = BinaryMask::from_fn(12, 12, |x, y| {
            ((1..5).contains(&x) && (1..9).contains(&y)) || ((1..9).contains(&x) && (6..9).contains(&y))
        });
        let poly = trace_boundary(&mask).unwrap();
        let back = rasterize(&poly, 12, 12).mask;
        assert_eq!(back, mask);
    }

    #[test]
    fn trace_boundary_rejects_diagonal_touch() {
        let mut mask = BinaryMask::new(4, 4);
        mask.set(0, 0, true);
        mask.set(1, 1, true);
        assert!(trace_boundary(&mask).is_err());
    }

    #[test]
    fn parse_labelme_happy_path() {
        let doc = r#"{
            "version": "5.2.1",
            "flags": {},
            "shapes": [
                {"label": "thin_bridge", "points": [[1.0,2.0],[5.0,2.0],[5.0,4.0],[1.0,4.0]],
                 "group_id": null, "shape_type": "polygon", "flags": {}}
            ],
            "imagePath": "img_007.png",
            "imageData": null,
            "imageHeight": 480,
            "imageWidth": 480
        }"#;
        let ann = parse_labelme(doc).unwrap();
        assert_eq!(ann.image_id, "img_007");
        assert_eq!(ann.width, 480);
        assert_eq!(ann.instances.len(), 1);
        assert_eq!(ann.instances[0].class, DefectClass::ThinBridge);
        assert_eq!(ann.instances[0].polygon.points().len(), 4);
    }

    #[test]
    fn parse_labelme_rejects_bad_inputs() {
        assert!(matches!(
            parse_labelme("not json"),
            Err(Error::MalformedDocument(_))
        ));

        let wrong_label = r#"{"shapes":[{"label":"THIN BRIDGE","points":[[0,0],[1,0],[1,1]],
            "shape_type":"polygon"}],"imagePath":"a.png","imageHeight":8,"imageWidth":8}"#;
        assert!(matches!(
            parse_labelme(wrong_label),
            Err(Error::UnknownLabel { .. })
        ));

        let two_points = r#"{"shapes":[{"label":"thin_bridge","points":[[0,0],[1,0]],
            "shape_type":"polygon"}],"imagePath":"a.png","imageHeight":8,"imageWidth":8}"#;
        assert!(matches!(
            parse_labelme(two_points),
            Err(Error::InvalidPolygon(_))
        ));

        let rect_shape = r#"{"shapes":[{"label":"thin_bridge","points":[[0,0],[1,0],[1,1]],
            "shape_type":"rectangle"}],"imagePath":"a.png","imageHeight":8,"imageWidth":8}"#;
        match parse_labelme(rect_shape) {
            Err(Error::UnsupportedShape { index, shape_type }) => {
                assert_eq!(index, 0);
                assert_eq!(shape_type, "rectangle");
            }
            other => panic!("expected UnsupportedShape, got {other:?}"),
        }
    }

    #[test]
    fn labelme_round_trip() {
        let ann = ImageAnnotation {
            image_id: "rt".into(),
            width: 32,
            height: 32,
            instances: vec![Instance {
                class: DefectClass::LineBreak,
                polygon: square(4.0, 6.0, 8.0),
            }],
        };
        let doc = write_labelme(&ann);
        let back = parse_labelme(&doc).unwrap();
        assert_eq!(back, ann);
    }

    #[test]
    fn export_coco_structure() {
        let ann = ImageAnnotation {
            image_id: "img_a".into(),
            width: 16,
            height: 16,
            instances: vec![Instance {
                class: DefectClass::SingleBridge,
                polygon: square(2.0, 3.0, 5.0),
            }],
        };
        let doc = export_coco(std::slice::from_ref(&ann)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["categories"].as_array().unwrap().len(), 6);
        assert_eq!(v["categories"][0]["name"], "thin_bridge");
        assert_eq!(v["categories"][5]["id"], 6);
        let records = v["annotations"].as_array().unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0]["category_id"], 2);
        assert_eq!(records[0]["iscrowd"], 0);
        // area equals the rasterized popcount of the square.
        let area = rasterize(&ann.instances[0].polygon, 16, 16).mask.area();
        assert_eq!(records[0]["area"].as_u64().unwrap(), area);
        assert_eq!(records[0]["bbox"], serde_json::json!([2.0, 3.0, 5.0, 5.0]));
    }

    #[test]
    fn export_coco_empty_and_duplicates() {
        let doc = export_coco(&[]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["categories"].as_array().unwrap().len(), 6);
        assert_eq!(v["images"].as_array().unwrap().len(), 0);

        let ann = ImageAnnotation {
            image_id: "dup".into(),
            width: 8,
            height: 8,
            instances: vec![],
        };
        assert!(matches!(
            export_coco(&[ann.clone(), ann]),
            Err(Error::DuplicateImageId(_))
        ));
    }

    fn sample_scene() -> (GrayImage, ImageAnnotation) {
        let mut img = GrayImage::filled(16, 16, 10);
        for y in 4..8 {
            for x in 2..6 {
                img.set(x, y, 200);
            }
        }
        let ann = ImageAnnotation {
            image_id: "aug".into(),
            width: 16,
            height: 16,
            instances: vec![Instance {
                class: DefectClass::ThinBridge,
                polygon: square(2.0, 4.0, 4.0),
            }],
        };
        (img, ann)
    }

    #[test]
    fn flip_x_is_involution() {
        let (img, ann) = sample_scene();
        let (i1, a1) = augment(&img, &ann, AugmentOp::FlipX, 0).unwrap();
        let (i2, a2) = augment(&i1, &a1, AugmentOp::FlipX, 0).unwrap();
        assert_eq!(i2, img);
        let m0 = rasterize(&ann.instances[0].polygon, 16, 16).mask;
        let m2 = rasterize(&a2.instances[0].polygon, 16, 16).mask;
        assert_eq!(m0, m2);
    }

    #[test]
    fn rotate_90_four_times_is_identity() {
        let (img, ann) = sample_scene();
        let (mut i, mut a) = (img.clone(), ann.clone());
        for _ in 0..4 {
            let (ni, na) = augment(&i, &a, AugmentOp::Rotate(90.0), 0).unwrap();
            i = ni;
            a = na;
        }
        assert_eq!(i, img);
        let m0 = rasterize(&ann.instances[0].polygon, 16, 16).mask;
        let m4 = rasterize(&a.instances[0].polygon, 16, 16).mask;
        assert_eq!(m0, m4);
    }

    #[test]
    fn translate_shifts_polygons_and_preserves_area() {
        let (img, ann) = sample_scene();
        let (_, a) = augment(&img, &ann, AugmentOp::Translate(5.0, 0.0), 0).unwrap();
        for (&(x0, y0), &(x1, y1)) in ann.instances[0]
            .polygon
            .points()
            .iter()
            .zip(a.instances[0].polygon.points())
        {
            assert_eq!(x1, x0 + 5.0);
            assert_eq!(y1, y0);
        }
        let before = rasterize(&ann.instances[0].polygon, 16, 16).mask.area();
        let after = rasterize(&a.instances[0].polygon, 16, 16).mask.area();
        assert_eq!(before, after);
    }

    #[test]
    fn flip_commutes_with_rasterization() {
        let (img, ann) = sample_scene();
        let (_, a) = augment(&img, &ann, AugmentOp::FlipX, 0).unwrap();
        let flipped_poly_mask = rasterize(&a.instances[0].polygon, 16, 16).mask;
        let original_mask = rasterize(&ann.instances[0].polygon, 16, 16).mask;
        let flipped_mask = BinaryMask::from_fn(16, 16, |x, y| original_mask.get(15 - x, y));
        assert_eq!(flipped_poly_mask, flipped_mask);
    }

    #[test]
    fn photometric_ops_leave_annotations_unchanged() {
        let (img, ann) = sample_scene();
        for op in [
            AugmentOp::Contrast(1.5),
            AugmentOp::Brightness(-20.0),
            AugmentOp::Hue(0.3),
            AugmentOp::Saturation(0.7),
        ] {
            let (out, a) = augment(&img, &ann, op, 0).unwrap();
            assert_eq!(a, ann);
            match op {
                AugmentOp::Hue(_) | AugmentOp::Saturation(_) => assert_eq!(out, img),
                _ => {}
            }
        }
    }

    #[test]
    fn brightness_and_contrast_remap() {
        let img = GrayImage::filled(2, 2, 100);
        let ann = ImageAnnotation {
            image_id: "p".into(),
            width: 2,
            height: 2,
            instances: vec![],
        };
        let (b, _) = augment(&img, &ann, AugmentOp::Brightness(30.0), 0).unwrap();
        assert_eq!(b.get(0, 0), 130);
        let (c, _) = augment(&img, &ann, AugmentOp::Contrast(2.0), 0).unwrap();
        assert_eq!(c.get(0, 0), 72); // (100-128)*2 + 128
    }

    #[test]
    fn scale_rejects_non_positive_factors() {
        let (img, ann) = sample_scene();
        assert!(augment(&img, &ann, AugmentOp::Scale(0.0, 1.0), 0).is_err());
        assert!(augment(&img, &ann, AugmentOp::Scale(1.0, -2.0), 0).is_err());
    }
}
