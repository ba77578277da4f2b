use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RasterError;

/// Building damage level on the four-step xView2 scale, plus the mask
/// background code and the `un-classified` subtype found in some labels.
///
/// Mask codes are 0..=4. `Unclassified` has no code of its own; it is
/// painted as [`DamageClass::NoDamage`] and tracked separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DamageClass {
    Background,
    NoDamage,
    MinorDamage,
    MajorDamage,
    Destroyed,
    #[serde(rename = "un-classified")]
    Unclassified,
}

impl DamageClass {
    /// The four building damage classes in increasing severity.
    pub const DAMAGE_LEVELS: [DamageClass; 4] =
        [DamageClass::NoDamage, DamageClass::MinorDamage, DamageClass::MajorDamage, DamageClass::Destroyed];

    /// Code written into class masks.
    pub fn mask_code(self) -> u8 {
        match self {
            DamageClass::Background => 0,
            DamageClass::NoDamage | DamageClass::Unclassified => 1,
            DamageClass::MinorDamage => 2,
            DamageClass::MajorDamage => 3,
            DamageClass::Destroyed => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<DamageClass> {
        Some(match code {
            0 => DamageClass::Background,
            1 => DamageClass::NoDamage,
            2 => DamageClass::MinorDamage,
            3 => DamageClass::MajorDamage,
            4 => DamageClass::Destroyed,
            _ => return None,
        })
    }

    /// Position on the damage scale, `None` for background and unclassified.
    pub fn severity(self) -> Option<u8> {
        match self {
            DamageClass::NoDamage => Some(0),
            DamageClass::MinorDamage => Some(1),
            DamageClass::MajorDamage => Some(2),
            DamageClass::Destroyed => Some(3),
            DamageClass::Background | DamageClass::Unclassified => None,
        }
    }

    /// True for minor, major and destroyed.
    pub fn is_damaged(self) -> bool {
        self.severity().is_some_and(|s| s > 0)
    }

    /// COCO category id (1..=4); background and unclassified have none.
    pub fn category_id(self) -> Option<u32> {
        self.severity().map(|s| s as u32 + 1)
    }

    /// xBD `subtype` string.
    pub fn subtype(self) -> &'static str {
        match self {
            DamageClass::Background => "background",
            DamageClass::NoDamage => "no-damage",
            DamageClass::MinorDamage => "minor-damage",
            DamageClass::MajorDamage => "major-damage",
            DamageClass::Destroyed => "destroyed",
            DamageClass::Unclassified => "un-classified",
        }
    }
}

impl fmt::Display for DamageClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.subtype())
    }
}

impl FromStr for DamageClass {
    type Err = RasterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "no-damage" => DamageClass::NoDamage,
            "minor-damage" => DamageClass::MinorDamage,
            "major-damage" => DamageClass::MajorDamage,
            "destroyed" => DamageClass::Destroyed,
            "un-classified" => DamageClass::Unclassified,
            "background" => DamageClass::Background,
            other => return Err(RasterError::UnknownSubtype(other.to_string())),
        })
    }
}
