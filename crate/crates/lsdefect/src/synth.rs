//! Synthetic line/space pattern generation with injected defect instances
//! and exact ground-truth polygon annotations.
//!
//! Lines are vertical and bright on a dark background. Defects are painted
//! after edge roughness but before noise, so the painted pixel set (and the
//! polygon traced from it) is independent of the noise draw.

use std::fmt;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annot::{trace_boundary, write_labelme, ImageAnnotation, Instance};
use crate::defect::DefectClass;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::mask::BinaryMask;
use crate::rules;

/// RNG stream ids, so roughness and noise draws stay independent of each
/// other and of defect placement.
const STREAM_ROUGHNESS: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_PLACEMENT: u64 = 3;

/// Geometry and radiometry of one synthetic line/space scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    /// Pattern period in pixels (line plus space).
    pub pitch: u32,
    pub line_width: u32,
    pub line_intensity: u8,
    pub space_intensity: u8,
    /// Standard deviation of additive Gaussian noise, in gray levels.
    pub noise_sigma: f64,
    /// Bound of the per-row line-edge displacement random walk, in pixels.
    pub edge_roughness_amp: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            width: 480,
            height: 480,
            pitch: 32,
            line_width: 16,
            line_intensity: 200,
            space_intensity: 50,
            noise_sigma: 0.0,
            edge_roughness_amp: 0.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.line_width == 0 {
            return Err(Error::InvalidScene("line_width must be positive".into()));
        }
        if self.line_width >= self.pitch {
            return Err(Error::InvalidScene(format!(
                "line_width {} must be smaller than pitch {}",
                self.line_width, self.pitch
            )));
        }
        if self.pitch > self.width {
            return Err(Error::InvalidScene(format!(
                "pitch {} exceeds image width {}",
                self.pitch, self.width
            )));
        }
        if self.height == 0 {
            return Err(Error::InvalidScene("height must be positive".into()));
        }
        if self.line_intensity <= self.space_intensity {
            return Err(Error::InvalidScene(format!(
                "line_intensity {} must exceed space_intensity {}",
                self.line_intensity, self.space_intensity
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidScene(format!(
                "noise_sigma {} must be finite and non-negative",
                self.noise_sigma
            )));
        }
        if !self.edge_roughness_amp.is_finite() || self.edge_roughness_amp < 0.0 {
            return Err(Error::InvalidScene(format!(
                "edge_roughness_amp {} must be finite and non-negative",
                self.edge_roughness_amp
            )));
        }
        Ok(())
    }

    /// Width of a space (pitch minus line width).
    pub fn space_width(&self) -> u32 {
        self.pitch - self.line_width
    }

    /// Number of whole lines that fit in the frame.
    pub fn line_count(&self) -> u32 {
        (self.width - self.line_width) / self.pitch + 1
    }

    /// Number of whole spaces that fit in the frame.
    pub fn space_count(&self) -> u32 {
        self.width / self.pitch
    }
}

/// Class-specific defect geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DefectExtent {
    /// A resist bridge across `spaces` consecutive spaces, `thickness` pixels
    /// tall, shifted vertically by `shear` pixels per spanned space.
    Bridge {
        thickness: u32,
        spaces: u32,
        shear: i32,
    },
    /// A missing-resist gap of `gap` pixels within one line.
    Break { gap: u32 },
    /// A merged bright region over line + space + line, `height` pixels tall.
    Collapse { height: u32 },
}

/// One defect to inject: class, anchor position, and extent.
///
/// `anchor_line` is the leftmost line the defect touches; bridges occupy the
/// space to its right, breaks sit inside it, collapses merge it with the
/// next line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectSpec {
    pub class: DefectClass,
    pub anchor_line: u32,
    pub anchor_y: u32,
    pub extent: DefectExtent,
}

impl DefectSpec {
    pub fn thin_bridge(anchor_line: u32, anchor_y: u32, thickness: u32) -> Self {
        DefectSpec {
            class: DefectClass::ThinBridge,
            anchor_line,
            anchor_y,
            extent: DefectExtent::Bridge {
                thickness,
                spaces: 1,
                shear: 0,
            },
        }
    }

    pub fn single_bridge(anchor_line: u32, anchor_y: u32, thickness: u32) -> Self {
        DefectSpec {
            class: DefectClass::SingleBridge,
            anchor_line,
            anchor_y,
            extent: DefectExtent::Bridge {
                thickness,
                spaces: 1,
                shear: 0,
            },
        }
    }

    pub fn multi_bridge_h(anchor_line: u32, anchor_y: u32, thickness: u32, spaces: u32) -> Self {
        DefectSpec {
            class: DefectClass::MultiBridgeH,
            anchor_line,
            anchor_y,
            extent: DefectExtent::Bridge {
                thickness,
                spaces,
                shear: 0,
            },
        }
    }

    pub fn multi_bridge_nh(
        anchor_line: u32,
        anchor_y: u32,
        thickness: u32,
        spaces: u32,
        shear: i32,
    ) -> Self {
        DefectSpec {
            class: DefectClass::MultiBridgeNh,
            anchor_line,
            anchor_y,
            extent: DefectExtent::Bridge {
                thickness,
                spaces,
                shear,
            },
        }
    }

    pub fn line_break(anchor_line: u32, anchor_y: u32, gap: u32) -> Self {
        DefectSpec {
            class: DefectClass::LineBreak,
            anchor_line,
            anchor_y,
            extent: DefectExtent::Break { gap },
        }
    }

    pub fn line_collapse(anchor_line: u32, anchor_y: u32, height: u32) -> Self {
        DefectSpec {
            class: DefectClass::LineCollapse,
            anchor_line,
            anchor_y,
            extent: DefectExtent::Collapse { height },
        }
    }
}

/// Half-open integer rectangle.
#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
}

/// The rectangles a defect paints and the gray level it paints them with.
struct PaintPlan {
    rects: Vec<Rect>,
    value: u8,
}

fn checked_span(y0: u32, len: u32, height: u32, what: &str) -> Result<u32> {
    let end = y0
        .checked_add(len)
        .filter(|&e| e <= height)
        .ok_or_else(|| {
            Error::InvalidDefect(format!(
                "{what} at y={y0} with extent {len} leaves the {height}-px frame"
            ))
        })?;
    Ok(end)
}

fn paint_plan(spec: &SceneSpec, defect: &DefectSpec) -> Result<PaintPlan> {
    let p = spec.pitch;
    let lw = spec.line_width;
    let line_x0 = |k: u32| k * p;
    let space_x0 = |s: u32| s * p + lw;

    match (defect.class, defect.extent) {
        (
            DefectClass::ThinBridge | DefectClass::SingleBridge,
            DefectExtent::Bridge {
                thickness,
                spaces,
                shear,
            },
        ) => {
            if spaces != 1 || shear != 0 {
                return Err(Error::InvalidDefect(format!(
                    "{} must span exactly 1 space with no shear",
                    defect.class
                )));
            }
            let thin_limit = rules::THIN_RATIO * lw as f64;
            let is_thin = (thickness as f64) < thin_limit;
            if thickness == 0 {
                return Err(Error::InvalidDefect("bridge thickness must be positive".into()));
            }
            if defect.class == DefectClass::ThinBridge && !is_thin {
                return Err(Error::InvalidDefect(format!(
                    "thin_bridge thickness {thickness} is not below {thin_limit} px"
                )));
            }
            if defect.class == DefectClass::SingleBridge && is_thin {
                return Err(Error::InvalidDefect(format!(
                    "single_bridge thickness {thickness} is below {thin_limit} px"
                )));
            }
            if thickness >= rules::collapse_min_height(p) {
                return Err(Error::InvalidDefect(format!(
                    "bridge thickness {thickness} reaches the collapse height regime"
                )));
            }
            let s = defect.anchor_line;
            if (s + 1).checked_mul(p).is_none_or(|end| end > spec.width) {
                return Err(Error::InvalidDefect(format!(
                    "space {s} is not fully inside the frame"
                )));
            }
            let y1 = checked_span(defect.anchor_y, thickness, spec.height, "bridge")?;
            Ok(PaintPlan {
                rects: vec![Rect {
                    x0: space_x0(s),
                    y0: defect.anchor_y,
                    x1: (s + 1) * p,
                    y1,
                }],
                value: spec.line_intensity,
            })
        }
        (
            DefectClass::MultiBridgeH | DefectClass::MultiBridgeNh,
            DefectExtent::Bridge {
                thickness,
                spaces,
                shear,
            },
        ) => {
            if spaces < rules::MIN_MULTI_SPACES {
                return Err(Error::InvalidDefect(format!(
                    "multi-line bridge must span at least {} spaces",
                    rules::MIN_MULTI_SPACES
                )));
            }
            if thickness == 0 {
                return Err(Error::InvalidDefect("bridge thickness must be positive".into()));
            }
            if defect.class == DefectClass::MultiBridgeH && shear != 0 {
                return Err(Error::InvalidDefect(
                    "multi_bridge_h requires zero shear".into(),
                ));
            }
            if defect.class == DefectClass::MultiBridgeNh {
                let spread = (spaces - 1) as f64 * shear.unsigned_abs() as f64;
                if spread <= rules::H_TOLERANCE_PX {
                    return Err(Error::InvalidDefect(format!(
                        "multi_bridge_nh centroid spread {spread} px does not exceed the \
                         horizontal tolerance {} px",
                        rules::H_TOLERANCE_PX
                    )));
                }
                if shear.unsigned_abs() > p {
                    return Err(Error::InvalidDefect(format!(
                        "shear magnitude {} exceeds one pitch {p}",
                        shear.unsigned_abs()
                    )));
                }
            }
            let s = defect.anchor_line;
            if (s + spaces)
                .checked_mul(p)
                .is_none_or(|end| end > spec.width)
            {
                return Err(Error::InvalidDefect(format!(
                    "bridge spanning spaces {s}..{} is not fully inside the frame",
                    s + spaces - 1
                )));
            }
            let mut rects = Vec::new();
            let seg_y0 = |m: u32| -> Result<u32> {
                let y = defect.anchor_y as i64 + m as i64 * shear as i64;
                if y < 0 {
                    return Err(Error::InvalidDefect(format!(
                        "sheared bridge segment {m} starts above the frame"
                    )));
                }
                Ok(y as u32)
            };
            for m in 0..spaces {
                let y0 = seg_y0(m)?;
                let y1 = checked_span(y0, thickness, spec.height, "bridge segment")?;
                rects.push(Rect {
                    x0: space_x0(s + m),
                    y0,
                    x1: (s + m + 1) * p,
                    y1,
                });
            }
            // Crossing rectangles over the interior lines keep the painted
            // region contiguous; line pixels are already bright so the raster
            // is unchanged there.
            for m in 0..spaces - 1 {
                let ya = seg_y0(m)?;
                let yb = seg_y0(m + 1)?;
                let y0 = ya.min(yb);
                let y1 = checked_span(ya.max(yb), thickness, spec.height, "bridge crossing")?;
                rects.push(Rect {
                    x0: line_x0(s + m + 1),
                    y0,
                    x1: line_x0(s + m + 1) + lw,
                    y1,
                });
            }
            Ok(PaintPlan {
                rects,
                value: spec.line_intensity,
            })
        }
        (DefectClass::LineBreak, DefectExtent::Break { gap }) => {
            if gap < rules::MIN_BREAK_GAP_PX {
                return Err(Error::InvalidDefect(format!(
                    "break gap {gap} px is below the minimum {} px",
                    rules::MIN_BREAK_GAP_PX
                )));
            }
            let k = defect.anchor_line;
            if line_x0(k) + lw > spec.width {
                return Err(Error::InvalidDefect(format!(
                    "line {k} is not fully inside the frame"
                )));
            }
            let y1 = checked_span(defect.anchor_y, gap, spec.height, "break")?;
            Ok(PaintPlan {
                rects: vec![Rect {
                    x0: line_x0(k),
                    y0: defect.anchor_y,
                    x1: line_x0(k) + lw,
                    y1,
                }],
                value: spec.space_intensity,
            })
        }
        (DefectClass::LineCollapse, DefectExtent::Collapse { height }) => {
            let min_h = rules::collapse_min_height(spec.pitch);
            if height < min_h {
                return Err(Error::InvalidDefect(format!(
                    "collapse height {height} px is below the minimum {min_h} px"
                )));
            }
            let k = defect.anchor_line;
            // Needs lines k and k+1 plus the space between, all in frame.
            let x1 = (k + 1) * p + lw;
            if x1 > spec.width {
                return Err(Error::InvalidDefect(format!(
                    "collapse over lines {k} and {} leaves the frame",
                    k + 1
                )));
            }
            let y1 = checked_span(defect.anchor_y, height, spec.height, "collapse")?;
            Ok(PaintPlan {
                rects: vec![Rect {
                    x0: line_x0(k),
                    y0: defect.anchor_y,
                    x1,
                    y1,
                }],
                value: spec.line_intensity,
            })
        }
        (class, extent) => Err(Error::InvalidDefect(format!(
            "extent {extent:?} does not match class {class}"
        ))),
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on two 53-bit uniforms.
    let u: f64 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let v: f64 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * (1.0 - u).ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Render the defect-free pattern geometry (lines plus edge roughness),
/// without noise. Deterministic for a given seed.
pub fn render_clean_geometry(spec: &SceneSpec) -> Result<GrayImage> {
    spec.validate()?;
    let mut img = GrayImage::filled(spec.width, spec.height, spec.space_intensity);
    let amp = spec.edge_roughness_amp.round() as i64;
    let mut rng = stream_rng(spec.seed, STREAM_ROUGHNESS);
    for k in 0..spec.line_count() {
        let left = (k * spec.pitch) as i64;
        let right = left + spec.line_width as i64;
        if amp == 0 {
            for y in 0..spec.height {
                for x in left.max(0)..right.min(spec.width as i64) {
                    img.set(x as u32, y, spec.line_intensity);
                }
            }
        } else {
            // Independent bounded random walks for the two edges of the line.
            let mut dl = 0i64;
            let mut dr = 0i64;
            for y in 0..spec.height {
                dl = (dl + rng.random_range(-1..=1)).clamp(-amp, amp);
                dr = (dr + rng.random_range(-1..=1)).clamp(-amp, amp);
                let l = (left + dl).max(0);
                let r = (right + dr).min(spec.width as i64);
                for x in l..r {
                    img.set(x as u32, y, spec.line_intensity);
                }
            }
        }
    }
    Ok(img)
}

fn apply_noise(img: &mut GrayImage, spec: &SceneSpec) {
    if spec.noise_sigma == 0.0 {
        return;
    }
    let mut rng = stream_rng(spec.seed, STREAM_NOISE);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let v = img.get(x, y) as f64 + spec.noise_sigma * gaussian(&mut rng);
            img.set(x, y, v.round().clamp(0.0, 255.0) as u8);
        }
    }
}

/// Render a complete clean (defect-free) image: geometry, roughness, noise.
pub fn render_clean_pattern(spec: &SceneSpec) -> Result<GrayImage> {
    let mut img = render_clean_geometry(spec)?;
    apply_noise(&mut img, spec);
    Ok(img)
}

/// Paint defects onto a raster and return the modified raster plus exact
/// ground truth. The polygon of each instance traces the boundary of the
/// pixels that instance painted.
pub fn inject_defects(
    img: &GrayImage,
    spec: &SceneSpec,
    image_id: &str,
    defects: &[DefectSpec],
) -> Result<(GrayImage, ImageAnnotation)> {
    spec.validate()?;
    if img.width() != spec.width || img.height() != spec.height {
        return Err(Error::InvalidDefect(format!(
            "image is {}x{} but the scene spec says {}x{}",
            img.width(),
            img.height(),
            spec.width,
            spec.height
        )));
    }
    let mut out = img.clone();
    let mut masks: Vec<BinaryMask> = Vec::with_capacity(defects.len());
    let mut instances = Vec::with_capacity(defects.len());
    for defect in defects {
        let plan = paint_plan(spec, defect)?;
        let mut mask = BinaryMask::new(spec.width, spec.height);
        for r in &plan.rects {
            for y in r.y0..r.y1 {
                for x in r.x0..r.x1 {
                    out.set(x, y, plan.value);
                    mask.set(x, y, true);
                }
            }
        }
        for (j, prev) in masks.iter().enumerate() {
            if prev.intersection_area(&mask)? > 0 {
                return Err(Error::OverlappingDefects(j, masks.len()));
            }
        }
        let polygon = trace_boundary(&mask)?;
        instances.push(Instance {
            class: defect.class,
            polygon,
        });
        masks.push(mask);
    }
    Ok((
        out,
        ImageAnnotation {
            image_id: image_id.to_string(),
            width: spec.width,
            height: spec.height,
            instances,
        },
    ))
}

/// Render geometry, inject defects, then add noise: the canonical synthetic
/// inspection image. Ground truth is taken before the noise pass.
pub fn synthesize(
    spec: &SceneSpec,
    image_id: &str,
    defects: &[DefectSpec],
) -> Result<(GrayImage, ImageAnnotation)> {
    let base = render_clean_geometry(spec)?;
    let (mut img, ann) = inject_defects(&base, spec, image_id, defects)?;
    apply_noise(&mut img, spec);
    Ok((img, ann))
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

/// Dataset split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

/// Per-class image counts for each split, plus optional defect-free images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitPlan {
    pub train_per_class: u32,
    pub val_per_class: u32,
    pub test_per_class: u32,
    /// Clean (defect-free) images per split: train, val, test.
    pub clean_per_split: [u32; 3],
}

impl Default for SplitPlan {
    /// The 80/10/10 per-class distribution (480/60/60 image totals).
    fn default() -> Self {
        SplitPlan {
            train_per_class: 80,
            val_per_class: 10,
            test_per_class: 10,
            clean_per_split: [0, 0, 0],
        }
    }
}

impl SplitPlan {
    pub fn uniform(per_class: u32) -> Self {
        SplitPlan {
            train_per_class: per_class,
            val_per_class: per_class,
            test_per_class: per_class,
            clean_per_split: [0, 0, 0],
        }
    }

    pub fn count_for(&self, split: Split) -> u32 {
        match split {
            Split::Train => self.train_per_class,
            Split::Val => self.val_per_class,
            Split::Test => self.test_per_class,
        }
    }

    pub fn clean_for(&self, split: Split) -> u32 {
        match split {
            Split::Train => self.clean_per_split[0],
            Split::Val => self.clean_per_split[1],
            Split::Test => self.clean_per_split[2],
        }
    }

    /// Total number of images over all splits and classes.
    pub fn total_images(&self) -> u64 {
        let per_class =
            self.train_per_class as u64 + self.val_per_class as u64 + self.test_per_class as u64;
        per_class * DefectClass::ALL.len() as u64
            + self.clean_per_split.iter().map(|&c| c as u64).sum::<u64>()
    }
}

/// One generated image in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub split: Split,
    pub classes: Vec<DefectClass>,
}

/// Index of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub scene: SceneSpec,
    pub plan: SplitPlan,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn entries_for(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

/// FNV-1a over the canonical JSON of a config, for manifest audit trails.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in json.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Draw a random, in-frame defect of the requested class.
///
/// Placement margins keep every instance well separated from the frame
/// border so the closed detection loop is unambiguous.
pub fn sample_defect(spec: &SceneSpec, class: DefectClass, rng: &mut ChaCha8Rng) -> DefectSpec {
    let lw = spec.line_width;
    let p = spec.pitch;
    let h = spec.height;
    let spaces = spec.space_count();
    let lines = spec.line_count();
    match class {
        DefectClass::ThinBridge => {
            let max_t = ((rules::THIN_RATIO * lw as f64).ceil() as u32).saturating_sub(1).max(1);
            let t = rng.random_range(1..=max_t);
            let s = rng.random_range(0..spaces);
            let y = rng.random_range(0..=h - t);
            DefectSpec::thin_bridge(s, y, t)
        }
        DefectClass::SingleBridge => {
            let min_t = (rules::THIN_RATIO * lw as f64).ceil() as u32;
            let max_t = (2 * lw).min(rules::collapse_min_height(p) - 1).max(min_t);
            let t = rng.random_range(min_t..=max_t);
            let s = rng.random_range(0..spaces);
            let y = rng.random_range(0..=h - t);
            DefectSpec::single_bridge(s, y, t)
        }
        DefectClass::MultiBridgeH => {
            let n = rng.random_range(2..=4u32.min(spaces));
            let t = rng.random_range(2..=lw);
            let s = rng.random_range(0..=spaces - n);
            let y = rng.random_range(0..=h - t);
            DefectSpec::multi_bridge_h(s, y, t, n)
        }
        DefectClass::MultiBridgeNh => {
            let n = rng.random_range(2..=3u32.min(spaces));
            let t = rng.random_range(2..=lw);
            let s = rng.random_range(0..=spaces - n);
            let min_shear = (rules::H_TOLERANCE_PX.floor() as u32 + 1).div_ceil(n - 1).max(1);
            let shear_mag = rng.random_range(min_shear..=(p / 2).max(min_shear));
            let sign: i32 = if rng.random_range(0..2) == 0 { 1 } else { -1 };
            let shear = sign * shear_mag as i32;
            let drop = (n - 1) * shear_mag;
            let y = if sign > 0 {
                rng.random_range(0..=h - t - drop)
            } else {
                rng.random_range(drop..=h - t)
            };
            DefectSpec::multi_bridge_nh(s, y, t, n, shear)
        }
        DefectClass::LineBreak => {
            let g = rng.random_range(rules::MIN_BREAK_GAP_PX..=3 * lw);
            let k = rng.random_range(0..lines);
            let y = rng.random_range(0..=h - g);
            DefectSpec::line_break(k, y, g)
        }
        DefectClass::LineCollapse => {
            let min_h = rules::collapse_min_height(p);
            let max_h = (min_h + 2 * p).min(h);
            let ch = rng.random_range(min_h..=max_h);
            // Needs two whole lines: anchors run one short of the last line.
            let k = rng.random_range(0..lines - 1);
            let y = rng.random_range(0..=h - ch);
            DefectSpec::line_collapse(k, y, ch)
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Generate a full corpus: one PNG and one annotation document per image,
/// plus a manifest. Image `i` uses seed `base_seed + i`, so any subset can be
/// regenerated independently and runs are bit-identical for a given seed.
pub fn generate_dataset(
    base_spec: &SceneSpec,
    plan: &SplitPlan,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    base_spec.validate()?;
    let images_dir = out_dir.join("images");
    let ann_dir = out_dir.join("annotations");
    if plan.total_images() > 0 {
        std::fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
        std::fs::create_dir_all(&ann_dir).map_err(|e| Error::io(&ann_dir, e))?;
    } else {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    }

    let mut entries = Vec::new();
    let mut index: u64 = 0;
    for split in Split::ALL {
        for class in DefectClass::ALL {
            for k in 0..plan.count_for(split) {
                let id = format!("{split}_{}_{k:03}", class.label());
                let spec = SceneSpec {
                    seed: base_spec.seed.wrapping_add(index),
                    ..base_spec.clone()
                };
                let mut rng = stream_rng(spec.seed, STREAM_PLACEMENT);
                let defect = sample_defect(&spec, class, &mut rng);
                let (img, ann) = synthesize(&spec, &id, &[defect])?;
                img.save_png(&images_dir.join(format!("{id}.png")))?;
                write_text(&ann_dir.join(format!("{id}.json")), &write_labelme(&ann))?;
                entries.push(ManifestEntry {
                    file: format!("images/{id}.png"),
                    id,
                    split,
                    classes: vec![class],
                });
                index += 1;
            }
        }
        for k in 0..plan.clean_for(split) {
            let id = format!("{split}_clean_{k:03}");
            let spec = SceneSpec {
                seed: base_spec.seed.wrapping_add(index),
                ..base_spec.clone()
            };
            let (img, ann) = synthesize(&spec, &id, &[])?;
            img.save_png(&images_dir.join(format!("{id}.png")))?;
            write_text(&ann_dir.join(format!("{id}.json")), &write_labelme(&ann))?;
            entries.push(ManifestEntry {
                id: id.clone(),
                file: format!("images/{id}.png"),
                split,
                classes: vec![],
            });
            index += 1;
        }
    }

    let manifest = DatasetManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: base_spec.seed,
        config_hash: config_hash(&(base_spec, plan)),
        scene: base_spec.clone(),
        plan: plan.clone(),
        entries,
    };
    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&out_dir.join("manifest.json"), &manifest_json)?;
    Ok(manifest)
}

/// Load a manifest written by [`generate_dataset`].
pub fn load_manifest(out_dir: &Path) -> Result<DatasetManifest> {
    let path = out_dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedDocument(e.to_string()))
}
