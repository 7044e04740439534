//! Class-geometry constants shared by the generator and the rule-based
//! segmentor, so the closed generation/detection loop is well-posed.

/// A bridge is "thin" when its thickness along the line direction is below
/// this fraction of the line width.
pub const THIN_RATIO: f64 = 0.5;

/// Maximum per-space centroid y-spread, in pixels, for a multi-line bridge
/// to count as horizontal.
pub const H_TOLERANCE_PX: f64 = 3.0;

/// Minimum collapse run height, in pitches.
pub const COLLAPSE_MIN_HEIGHT_PITCHES: u32 = 4;

/// Minimum line-break gap length in pixels.
pub const MIN_BREAK_GAP_PX: u32 = 4;

/// Minimum number of spaces a multi-line bridge spans.
pub const MIN_MULTI_SPACES: u32 = 2;

/// Collapse height threshold for a given pitch.
pub fn collapse_min_height(pitch: u32) -> u32 {
    COLLAPSE_MIN_HEIGHT_PITCHES * pitch
}
