use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{
    protein_height, rna_arc_angle, rna_arc_length, rna_wave_path, CategoryStats, ChannelAssignment, ChannelSlot,
    GeometryError, PortraitConfig, RnaCategory, RnaColor,
};
use crate::ingest::CommunityProfile;
use crate::temporal::{CaseSeries, Phase, PhaseTimeline};

/// Whether bar heights encode raw counts or counts per capita.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CountMode {
    #[serde(rename = "actual")]
    Actual,
    #[serde(rename = "per_10k")]
    Per10k,
}

impl std::str::FromStr for CountMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "actual" => Ok(CountMode::Actual),
            "per_10k" => Ok(CountMode::Per10k),
            other => Err(format!("unknown mode `{other}` (expected actual or per_10k)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProteinKind {
    /// Non-zero case count.
    S,
    /// Zero cases.
    M,
    /// Intervention phase marker on the filter trigger.
    E,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProteinGlyph {
    /// Span index on the full grid.
    pub x: usize,
    pub kind: ProteinKind,
    pub height: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub phase: Option<Phase>,
}

impl ProteinGlyph {
    pub fn color_class(&self) -> &'static str {
        match (self.kind, self.phase) {
            (ProteinKind::S, _) => "bright_red",
            (ProteinKind::M, _) => "light_grey",
            (ProteinKind::E, Some(Phase::Eased)) => "silver_gray",
            (ProteinKind::E, Some(Phase::RestrictControlled)) => "dark_gray",
            (ProteinKind::E, _) => "normal_gray",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnaGlyph {
    pub category: RnaCategory,
    pub channel: u8,
    pub share_n: u8,
    /// Arc angle as computed, before the render clamp.
    pub theta: f64,
    pub length: f64,
    pub freq_share: f64,
    /// `[absolute angle, radius]` samples.
    pub path: Vec<[f64; 2]>,
    pub color: RnaColor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crown {
    pub rc: f64,
    pub rc_prime: f64,
}

/// A fully computed portrait, ready to render.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitGeometry {
    pub code: String,
    pub label: String,
    pub mode: CountMode,
    pub crown: Crown,
    pub proteins: Vec<ProteinGlyph>,
    pub rnas: Vec<RnaGlyph>,
}

impl PortraitGeometry {
    pub fn max_protein_height(&self) -> f64 {
        self.proteins.iter().map(|p| p.height).fold(0.0, f64::max)
    }

    /// Radius of the disc that encloses the whole glyph.
    pub fn outer_radius(&self) -> f64 {
        self.crown.rc_prime + self.max_protein_height()
    }
}

/// Parameters shared by every portrait of one dataset.
#[derive(Debug, Clone, Copy)]
pub struct PortraitContext<'a> {
    pub config: &'a PortraitConfig,
    pub channels: &'a ChannelAssignment,
    pub stats: &'a CategoryStats,
    /// Population unit of per-capita mode (10 000 by default).
    pub per_capita_divisor: f64,
}

fn absolute_path(slot: &ChannelSlot, local: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let sign = if slot.clockwise { 1.0 } else { -1.0 };
    local
        .into_iter()
        .map(|[phi, r]| [slot.origin + sign * phi, r])
        .collect()
}

fn crown(cfg: &PortraitConfig) -> Crown {
    Crown {
        rc: cfg.core_radius,
        rc_prime: cfg.crown_radius,
    }
}

/// Builds the portrait of one community.
///
/// `series` holds the spans to draw, which may be a window of the full grid
/// starting at span `first_span`; the bars divide the whole circle evenly
/// between them. `phases`, when given, is parallel to `series.counts`.
pub fn build_portrait(
    ctx: &PortraitContext,
    profile: &CommunityProfile,
    series: &CaseSeries,
    first_span: usize,
    phases: Option<&[Phase]>,
    mode: CountMode,
) -> Result<PortraitGeometry, GeometryError> {
    let cfg = ctx.config;
    let scale = match mode {
        CountMode::Actual => 1.0,
        CountMode::Per10k if profile.population == 0 => {
            return Err(GeometryError::ZeroPopulation(profile.code.clone()))
        }
        CountMode::Per10k => ctx.per_capita_divisor / profile.population as f64,
    };
    let spans = series.counts.len();
    let width = TAU / spans.max(1) as f64;
    let proteins = series
        .counts
        .iter()
        .enumerate()
        .map(|(k, &count)| ProteinGlyph {
            x: first_span + k,
            kind: if count == 0 { ProteinKind::M } else { ProteinKind::S },
            height: protein_height(count as f64 * scale, cfg),
            theta0: k as f64 * width,
            theta1: (k + 1) as f64 * width,
            phase: phases.and_then(|p| p.get(k).copied()),
        })
        .collect();

    let mut rnas = Vec::with_capacity(ctx.channels.slots.len());
    for slot in &ctx.channels.slots {
        let i = slot.category.index();
        let value = slot.category.value(profile) as f64;
        let theta = rna_arc_angle(value, ctx.stats.max[i], slot.share_n, cfg.min_arc)
            .map_err(|e| match e {
                GeometryError::DegenerateCategory(_) => GeometryError::DegenerateCategory(slot.category.to_string()),
                other => other,
            })?;
        let freq_share = value / ctx.stats.sum[i];
        rnas.push(RnaGlyph {
            category: slot.category,
            channel: slot.channel,
            share_n: slot.share_n,
            theta,
            length: rna_arc_length(theta, slot.channel, cfg),
            freq_share,
            path: absolute_path(slot, rna_wave_path(theta, freq_share, slot.channel, slot.share_n, cfg)),
            color: slot.color,
        });
    }

    Ok(PortraitGeometry {
        code: profile.code.clone(),
        label: profile.name.clone(),
        mode,
        crown: crown(cfg),
        proteins,
        rnas,
    })
}

/// The sample portrait of the control panel: one grey E bar per span shaded
/// by phase, and every channel drawn as a full ring. `state_totals` are the
/// state-wide key-factor counts; an empty category draws a flat ring.
pub fn build_filter_trigger(
    phases: &PhaseTimeline,
    state_totals: [f64; 4],
    cfg: &PortraitConfig,
    channels: &ChannelAssignment,
) -> PortraitGeometry {
    let spans = phases.labels.len();
    let width = TAU / spans.max(1) as f64;
    let proteins = phases
        .labels
        .iter()
        .enumerate()
        .map(|(x, &phase)| ProteinGlyph {
            x,
            kind: ProteinKind::E,
            height: cfg.base_height,
            theta0: x as f64 * width,
            theta1: (x + 1) as f64 * width,
            phase: Some(phase),
        })
        .collect();
    let rnas = channels
        .slots
        .iter()
        .map(|slot| {
            let theta = TAU / f64::from(slot.share_n);
            let freq_share = if state_totals[slot.category.index()] > 0.0 { 1.0 } else { 0.0 };
            RnaGlyph {
                category: slot.category,
                channel: slot.channel,
                share_n: slot.share_n,
                theta,
                length: rna_arc_length(theta, slot.channel, cfg),
                freq_share,
                path: absolute_path(slot, rna_wave_path(theta, freq_share, slot.channel, slot.share_n, cfg)),
                color: slot.color,
            }
        })
        .collect();
    PortraitGeometry {
        code: "state".into(),
        label: "State".into(),
        mode: CountMode::Actual,
        crown: crown(cfg),
        proteins,
        rnas,
    }
}
