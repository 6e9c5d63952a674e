use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four land-cover classes produced by the MS classifier, in their fixed
/// order. The order doubles as the tie-break order for majority voting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandCover {
    Vegetation,
    Soil,
    Impervious,
    Water,
}

impl LandCover {
    pub const ALL: [LandCover; 4] = [
        LandCover::Vegetation,
        LandCover::Soil,
        LandCover::Impervious,
        LandCover::Water,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<LandCover> {
        Self::ALL.get(index).copied()
    }

    /// Decodes a class-map sample (the class index stored as a float).
    pub fn from_code(code: f32) -> Option<LandCover> {
        if code.fract() != 0.0 || code < 0.0 {
            return None;
        }
        Self::from_index(code as usize)
    }

    pub fn code(self) -> f32 {
        self.index() as f32
    }

    pub fn name(self) -> &'static str {
        match self {
            LandCover::Vegetation => "vegetation",
            LandCover::Soil => "soil",
            LandCover::Impervious => "impervious",
            LandCover::Water => "water",
        }
    }

    pub fn is_water(self) -> bool {
        self == LandCover::Water
    }
}

impl fmt::Display for LandCover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LandCover {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vegetation" => Ok(LandCover::Vegetation),
            "soil" => Ok(LandCover::Soil),
            "impervious" => Ok(LandCover::Impervious),
            "water" => Ok(LandCover::Water),
            other => Err(Error::InvalidInput(format!("unknown land-cover class `{other}`"))),
        }
    }
}
