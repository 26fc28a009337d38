use std::fmt;

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::ingest::CommunityProfile;

/// Key risk factor drawn as one RNA strand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RnaCategory {
    AgedMale,
    AgedFemale,
    LowerIncome,
    LonePerson,
}

impl RnaCategory {
    pub const ALL: [RnaCategory; 4] = [
        RnaCategory::AgedMale,
        RnaCategory::AgedFemale,
        RnaCategory::LowerIncome,
        RnaCategory::LonePerson,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RnaCategory::AgedMale => "aged_male",
            RnaCategory::AgedFemale => "aged_female",
            RnaCategory::LowerIncome => "lower_income",
            RnaCategory::LonePerson => "lone_person",
        }
    }

    /// This category's count in `profile`.
    pub fn value(self, profile: &CommunityProfile) -> u64 {
        profile.key_counts()[self.index()]
    }
}

impl fmt::Display for RnaCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Semantic colour class; the client maps it to a concrete colour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RnaColor {
    AzureBlue,
    MintPink,
    GoldYellow,
    PalePurple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSlot {
    pub category: RnaCategory,
    /// 1 (outermost) to 3 (innermost).
    pub channel: u8,
    /// 1 for a full channel, 2 for a half.
    pub share_n: u8,
    pub color: RnaColor,
    /// Starting angle, clockwise from the top.
    pub origin: f64,
    pub clockwise: bool,
}

/// Which channel draws which category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelAssignment {
    pub slots: Vec<ChannelSlot>,
}

impl Default for ChannelAssignment {
    /// Aged males and females share channel 1 and run in opposite
    /// directions from the top; lower income and lone person fill channels
    /// 2 and 3.
    fn default() -> Self {
        let slot = |category, channel, share_n, color, clockwise| ChannelSlot {
            category,
            channel,
            share_n,
            color,
            origin: 0.0,
            clockwise,
        };
        Self {
            slots: vec![
                slot(RnaCategory::AgedMale, 1, 2, RnaColor::AzureBlue, true),
                slot(RnaCategory::AgedFemale, 1, 2, RnaColor::MintPink, false),
                slot(RnaCategory::LowerIncome, 2, 1, RnaColor::GoldYellow, true),
                slot(RnaCategory::LonePerson, 3, 1, RnaColor::PalePurple, true),
            ],
        }
    }
}

impl ChannelAssignment {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let fail = |m: String| Err(GeometryError::InvalidChannels(m));
        for category in RnaCategory::ALL {
            let n = self.slots.iter().filter(|s| s.category == category).count();
            if n != 1 {
                return fail(format!("category {category} assigned {n} times"));
            }
        }
        for s in &self.slots {
            if !(1..=3).contains(&s.channel) || !(1..=2).contains(&s.share_n) || !s.origin.is_finite() {
                return fail(format!("slot for {} has channel {} share {}", s.category, s.channel, s.share_n));
            }
        }
        for channel in 1..=3u8 {
            let hosted: Vec<&ChannelSlot> = self.slots.iter().filter(|s| s.channel == channel).collect();
            let Some(first) = hosted.first() else { continue };
            if hosted.iter().any(|s| s.share_n != first.share_n) || hosted.len() != usize::from(first.share_n) {
                return fail(format!(
                    "channel {channel} hosts {} strands with share {}",
                    hosted.len(),
                    first.share_n
                ));
            }
            if hosted.len() == 2 && hosted[0].origin == hosted[1].origin && hosted[0].clockwise == hosted[1].clockwise {
                return fail(format!("shared channel {channel} strands coincide"));
            }
        }
        Ok(())
    }
}

/// Per-category maximum and total over all communities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub max: [f64; 4],
    pub sum: [f64; 4],
}

impl CategoryStats {
    pub fn from_profiles<'a>(profiles: impl IntoIterator<Item = &'a CommunityProfile>) -> Self {
        let mut stats = Self {
            max: [0.0; 4],
            sum: [0.0; 4],
        };
        for p in profiles {
            for (i, v) in p.key_counts().into_iter().enumerate() {
                let v = v as f64;
                stats.max[i] = stats.max[i].max(v);
                stats.sum[i] += v;
            }
        }
        stats
    }
}
