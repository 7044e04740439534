//! The closed six-class defect taxonomy of line/space patterning failures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the six stochastic defect classes.
///
/// The serialized label strings and the 1-based category ids follow the
/// labeling convention used by the annotation files, in this fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DefectClass {
    #[serde(rename = "thin_bridge")]
    ThinBridge,
    #[serde(rename = "single_bridge")]
    SingleBridge,
    #[serde(rename = "line_collapse")]
    LineCollapse,
    #[serde(rename = "line_break")]
    LineBreak,
    #[serde(rename = "multi_bridge_h")]
    MultiBridgeH,
    #[serde(rename = "multi_bridge_nh")]
    MultiBridgeNh,
}

impl DefectClass {
    /// All classes in labeling-convention order (matches category ids 1..=6).
    pub const ALL: [DefectClass; 6] = [
        DefectClass::ThinBridge,
        DefectClass::SingleBridge,
        DefectClass::LineCollapse,
        DefectClass::LineBreak,
        DefectClass::MultiBridgeH,
        DefectClass::MultiBridgeNh,
    ];

    /// Canonical snake_case label.
    pub fn label(self) -> &'static str {
        match self {
            DefectClass::ThinBridge => "thin_bridge",
            DefectClass::SingleBridge => "single_bridge",
            DefectClass::LineCollapse => "line_collapse",
            DefectClass::LineBreak => "line_break",
            DefectClass::MultiBridgeH => "multi_bridge_h",
            DefectClass::MultiBridgeNh => "multi_bridge_nh",
        }
    }

    /// Parse a canonical label. The label set is closed; anything else is an error.
    pub fn from_label(label: &str) -> Result<Self> {
        DefectClass::ALL
            .iter()
            .copied()
            .find(|c| c.label() == label)
            .ok_or_else(|| Error::UnknownLabel {
                label: label.to_string(),
            })
    }

    /// 1-based category id in labeling-convention order.
    pub fn category_id(self) -> u32 {
        DefectClass::ALL.iter().position(|&c| c == self).unwrap() as u32 + 1
    }

    /// Inverse of [`DefectClass::category_id`].
    pub fn from_category_id(id: u32) -> Result<Self> {
        if id == 0 || id as usize > DefectClass::ALL.len() {
            return Err(Error::UnknownCategory(id));
        }
        Ok(DefectClass::ALL[id as usize - 1])
    }
}

impl std::fmt::Display for DefectClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}
