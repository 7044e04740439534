//! Per-instance defect morphometry and the report writer: central CSV,
//! per-class segregated image folders, and area statistics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::defect::DefectClass;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::mask::BinaryMask;
use crate::segment::DefectInstance;

/// Morphometry of one defect instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectParams {
    pub image_id: String,
    pub instance_index: usize,
    pub class: DefectClass,
    pub area_px: u64,
    pub length_px: f64,
    pub width_px: f64,
    pub centroid: (f64, f64),
    pub score: f64,
}

/// Surface-area statistics for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAreaStats {
    pub class: DefectClass,
    pub count: u64,
    pub area_min: u64,
    pub area_mean: f64,
    pub area_max: u64,
}

/// Measure one instance: pixel area, bbox-derived length/width, centroid.
///
/// Length is the longer bbox side, width the shorter one.
pub fn extract_params(
    inst: &DefectInstance,
    image_id: &str,
    instance_index: usize,
) -> Result<DefectParams> {
    let area_px = inst.mask.area();
    if area_px == 0 {
        return Err(Error::InvalidArgument(format!(
            "instance {instance_index} of image {image_id:?} has an empty mask"
        )));
    }
    let (bw, bh) = (inst.bbox.width(), inst.bbox.height());
    let centroid = inst.mask.centroid().expect("nonempty mask has a centroid");
    Ok(DefectParams {
        image_id: image_id.to_string(),
        instance_index,
        class: inst.class,
        area_px,
        length_px: bw.max(bh),
        width_px: bw.min(bh),
        centroid,
        score: inst.score,
    })
}

/// Per-class counts and area statistics; classes absent from the input get
/// a zero-count row, keeping all six classes visible.
pub fn summarize(params: &[DefectParams]) -> Vec<ClassAreaStats> {
    DefectClass::ALL
        .iter()
        .map(|&class| {
            let areas: Vec<u64> = params
                .iter()
                .filter(|p| p.class == class)
                .map(|p| p.area_px)
                .collect();
            if areas.is_empty() {
                ClassAreaStats {
                    class,
                    count: 0,
                    area_min: 0,
                    area_mean: 0.0,
                    area_max: 0,
                }
            } else {
                ClassAreaStats {
                    class,
                    count: areas.len() as u64,
                    area_min: *areas.iter().min().unwrap(),
                    area_mean: areas.iter().sum::<u64>() as f64 / areas.len() as f64,
                    area_max: *areas.iter().max().unwrap(),
                }
            }
        })
        .collect()
}

/// CSV header of the central report.
pub const CSV_HEADER: &str =
    "image_id,instance_index,defect_class,score,area_px,length_px,width_px,centroid_x,centroid_y";

/// Render the central CSV: one row per instance, sorted by image id then
/// instance index, floats fixed to 3 decimals, LF line endings.
pub fn render_csv(params: &[DefectParams]) -> String {
    let mut rows: Vec<&DefectParams> = params.iter().collect();
    rows.sort_by(|a, b| {
        a.image_id
            .cmp(&b.image_id)
            .then(a.instance_index.cmp(&b.instance_index))
    });
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in rows {
        writeln!(
            out,
            "{},{},{},{:.3},{},{:.3},{:.3},{:.3},{:.3}",
            p.image_id,
            p.instance_index,
            p.class.label(),
            p.score,
            p.area_px,
            p.length_px,
            p.width_px,
            p.centroid.0,
            p.centroid.1
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Boundary pixels of a mask: set pixels with at least one unset 4-neighbor
/// (frame borders count as unset).
fn mask_boundary(mask: &BinaryMask) -> impl Iterator<Item = (u32, u32)> + '_ {
    let (w, h) = (mask.width(), mask.height());
    mask.iter_set().filter(move |&(x, y)| {
        x == 0
            || y == 0
            || x == w - 1
            || y == h - 1
            || !mask.get(x - 1, y)
            || !mask.get(x + 1, y)
            || !mask.get(x, y - 1)
            || !mask.get(x, y + 1)
    })
}

/// Mask rendered as a black/white image.
fn mask_image(mask: &BinaryMask) -> GrayImage {
    let mut img = GrayImage::filled(mask.width(), mask.height(), 0);
    for (x, y) in mask.iter_set() {
        img.set(x, y, 255);
    }
    img
}

/// Source image with the mask's outer boundary drawn at full intensity.
fn overlay_image(img: &GrayImage, mask: &BinaryMask) -> GrayImage {
    let mut out = img.clone();
    for (x, y) in mask_boundary(mask) {
        out.set(x, y, 255);
    }
    out
}

/// Detections for one image, as handed to [`write_report`].
#[derive(Debug, Clone)]
pub struct ReportInput<'a> {
    pub image_id: &'a str,
    pub image: &'a GrayImage,
    pub instances: &'a [DefectInstance],
}

/// Files produced by [`write_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFiles {
    pub csv_path: PathBuf,
    pub stats_path: PathBuf,
    pub instance_count: usize,
}

/// Write the full report: `report.csv`, `stats.json`, and one directory per
/// defect class holding the source image copy plus a mask and an overlay PNG
/// per instance.
pub fn write_report(inputs: &[ReportInput<'_>], out_dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut params: Vec<DefectParams> = Vec::new();
    for input in inputs {
        for (index, inst) in input.instances.iter().enumerate() {
            params.push(extract_params(inst, input.image_id, index)?);
            let class_dir = out_dir.join(inst.class.label());
            std::fs::create_dir_all(&class_dir).map_err(|e| Error::io(&class_dir, e))?;
            input
                .image
                .save_png(&class_dir.join(format!("{}.png", input.image_id)))?;
            mask_image(&inst.mask)
                .save_png(&class_dir.join(format!("{}_inst{index}_mask.png", input.image_id)))?;
            overlay_image(input.image, &inst.mask).save_png(
                &class_dir.join(format!("{}_inst{index}_overlay.png", input.image_id)),
            )?;
        }
    }

    let csv_path = out_dir.join("report.csv");
    std::fs::write(&csv_path, render_csv(&params)).map_err(|e| Error::io(&csv_path, e))?;

    let stats = summarize(&params);
    let stats_path = out_dir.join("stats.json");
    let stats_json = serde_json::to_string_pretty(&stats).expect("stats serialize");
    std::fs::write(&stats_path, stats_json).map_err(|e| Error::io(&stats_path, e))?;

    Ok(ReportFiles {
        csv_path,
        stats_path,
        instance_count: params.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::BinaryMask;

    fn rect_instance(
        class: DefectClass,
        score: f64,
        x0: u32,
        y0: u32,
        w: u32,
        h: u32,
    ) -> DefectInstance {
        let mask = BinaryMask::from_fn(64, 64, |x, y| {
            (x0..x0 + w).contains(&x) && (y0..y0 + h).contains(&y)
        });
        DefectInstance::from_mask(class, score, mask).unwrap()
    }

    #[test]
    fn params_of_solid_rectangle() {
        // 10 wide x 20 tall: area 200, length 20, width 10, centered centroid.
        let inst = rect_instance(DefectClass::SingleBridge, 1.0, 5, 10, 10, 20);
        let p = extract_params(&inst, "img", 0).unwrap();
        assert_eq!(p.area_px, 200);
        assert_eq!(p.length_px, 20.0);
        assert_eq!(p.width_px, 10.0);
        assert_eq!(p.centroid, (10.0, 20.0));
    }

    #[test]
    fn params_of_single_pixel() {
        let mut mask = BinaryMask::new(64, 64);
        mask.set(7, 9, true);
        let inst = DefectInstance::from_mask(DefectClass::LineBreak, 0.5, mask).unwrap();
        let p = extract_params(&inst, "img", 3).unwrap();
        assert_eq!(p.area_px, 1);
        assert_eq!(p.length_px, 1.0);
        assert_eq!(p.width_px, 1.0);
        assert_eq!(p.centroid, (7.5, 9.5));
    }

    #[test]
    fn params_of_full_frame() {
        let mask = BinaryMask::from_fn(480, 480, |_, _| true);
        let inst = DefectInstance::from_mask(DefectClass::LineCollapse, 1.0, mask).unwrap();
        let p = extract_params(&inst, "img", 0).unwrap();
        assert_eq!(p.area_px, 230400);
    }

    #[test]
    fn summarize_covers_all_classes() {
        let stats = summarize(&[]);
        assert_eq!(stats.len(), 6);
        assert!(stats.iter().all(|s| s.count == 0));

        let params = vec![
            extract_params(
                &rect_instance(DefectClass::ThinBridge, 1.0, 0, 0, 4, 2),
                "a",
                0,
            )
            .unwrap(),
            extract_params(
                &rect_instance(DefectClass::ThinBridge, 1.0, 10, 0, 4, 4),
                "b",
                0,
            )
            .unwrap(),
        ];
        let stats = summarize(&params);
        let thin = &stats[0];
        assert_eq!(thin.count, 2);
        assert_eq!(thin.area_min, 8);
        assert_eq!(thin.area_max, 16);
        assert_eq!(thin.area_mean, 12.0);
        let total: u64 = stats.iter().map(|s| s.count).sum();
        assert_eq!(total, params.len() as u64);
    }

    #[test]
    fn csv_is_sorted_and_formatted() {
        let params = vec![
            extract_params(
                &rect_instance(DefectClass::SingleBridge, 0.75, 0, 0, 4, 2),
                "img_b",
                0,
            )
            .unwrap(),
            extract_params(
                &rect_instance(DefectClass::ThinBridge, 1.0, 0, 0, 2, 2),
                "img_a",
                1,
            )
            .unwrap(),
            extract_params(
                &rect_instance(DefectClass::ThinBridge, 1.0, 8, 8, 2, 2),
                "img_a",
                0,
            )
            .unwrap(),
        ];
        let csv = render_csv(&params);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("img_a,0,"));
        assert!(lines[2].starts_with("img_a,1,"));
        assert!(lines[3].starts_with("img_b,0,"));
        assert!(lines[3].contains("0.750"));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn empty_report_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_report(&[], dir.path()).unwrap();
        assert_eq!(files.instance_count, 0);
        let csv = std::fs::read_to_string(&files.csv_path).unwrap();
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
        // No class directories for an empty report.
        for class in DefectClass::ALL {
            assert!(!dir.path().join(class.label()).exists());
        }
    }

    #[test]
    fn report_writes_class_directories() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::filled(64, 64, 90);
        let instances = vec![
            rect_instance(DefectClass::ThinBridge, 1.0, 2, 2, 6, 3),
            rect_instance(DefectClass::LineBreak, 0.9, 20, 20, 4, 10),
        ];
        let inputs = vec![ReportInput {
            image_id: "img_x",
            image: &img,
            instances: &instances,
        }];
        let files = write_report(&inputs, dir.path()).unwrap();
        assert_eq!(files.instance_count, 2);
        assert!(dir.path().join("thin_bridge/img_x.png").exists());
        assert!(dir.path().join("thin_bridge/img_x_inst0_mask.png").exists());
        assert!(dir
            .path()
            .join("thin_bridge/img_x_inst0_overlay.png")
            .exists());
        assert!(dir.path().join("line_break/img_x_inst1_mask.png").exists());
        let csv = std::fs::read_to_string(&files.csv_path).unwrap();
        assert_eq!(csv.lines().count(), 3);

        // Re-running produces byte-identical outputs.
        let dir2 = tempfile::tempdir().unwrap();
        let files2 = write_report(&inputs, dir2.path()).unwrap();
        assert_eq!(
            std::fs::read(&files.csv_path).unwrap(),
            std::fs::read(&files2.csv_path).unwrap()
        );
        assert_eq!(
            std::fs::read(&files.stats_path).unwrap(),
            std::fs::read(&files2.stats_path).unwrap()
        );
    }

    #[test]
    fn overlay_draws_boundary_only() {
        let img = GrayImage::filled(16, 16, 100);
        let mask = BinaryMask::from_fn(16, 16, |x, y| (4..8).contains(&x) && (4..8).contains(&y));
        let overlay = overlay_image(&img, &mask);
        assert_eq!(overlay.get(4, 4), 255); // corner of the boundary
        assert_eq!(overlay.get(5, 5), 100); // interior untouched
        assert_eq!(overlay.get(0, 0), 100);
    }
}
