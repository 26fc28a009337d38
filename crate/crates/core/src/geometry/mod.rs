//! Crown-glyph geometry.
//!
//! A portrait is a core disc of radius `R_c` ringed by a crown of radius
//! `R'_c`. Protein bars sit on the crown, one per time span, clockwise from
//! the top. Four RNA strands run inside the crown in three concentric
//! channels; channel 1 is outermost and may be shared by two half-length
//! strands.
//!
//! Angles are radians measured clockwise from the top point.

mod channels;
mod portrait;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use channels::{CategoryStats, ChannelAssignment, ChannelSlot, RnaCategory, RnaColor};
pub use portrait::{
    build_filter_trigger, build_portrait, CountMode, Crown, PortraitContext, PortraitGeometry, ProteinGlyph,
    ProteinKind, RnaGlyph,
};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid portrait config: {0}")]
    InvalidConfig(String),
    #[error("invalid channel assignment: {0}")]
    InvalidChannels(String),
    #[error("RNA category `{0}` is empty in every community")]
    DegenerateCategory(String),
    #[error("value {value} outside [0, {max}]")]
    ValueOutOfRange { value: f64, max: f64 },
    #[error("community `{0}` has zero population; per-capita mode is undefined")]
    ZeroPopulation(String),
}

/// Glyph dimensions. All lengths share one arbitrary unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PortraitConfig {
    pub core_radius: f64,
    pub crown_radius: f64,
    /// Height of a zero-case bar.
    pub base_height: f64,
    pub scale_a: f64,
    pub scale_b: f64,
    /// Smallest RNA arc, before dividing by the channel share.
    pub min_arc: f64,
    pub wave_count: f64,
    /// Fraction of the nominal wave amplitude actually drawn, in (0, 1].
    pub amplitude_factor: f64,
    /// Angular steps per RNA path.
    pub path_samples: usize,
}

impl Default for PortraitConfig {
    fn default() -> Self {
        Self {
            core_radius: 12.0,
            crown_radius: 40.0,
            base_height: 4.0,
            scale_a: 1.0,
            scale_b: 0.05,
            min_arc: 0.15,
            wave_count: 24.0,
            amplitude_factor: 0.8,
            path_samples: 256,
        }
    }
}

impl PortraitConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let fail = |m: &str| Err(GeometryError::InvalidConfig(m.to_string()));
        let all = [
            self.core_radius,
            self.crown_radius,
            self.base_height,
            self.scale_a,
            self.scale_b,
            self.min_arc,
            self.wave_count,
            self.amplitude_factor,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("non-finite parameter");
        }
        if !(self.core_radius > 0.0 && self.crown_radius > self.core_radius) {
            return fail("need crown_radius > core_radius > 0");
        }
        if self.base_height <= 0.0 {
            return fail("base_height must be positive");
        }
        if self.scale_a < 0.0 || self.scale_b <= 0.0 {
            return fail("need scale_a >= 0 and scale_b > 0");
        }
        if self.min_arc <= 0.0 {
            return fail("min_arc must be positive");
        }
        if self.wave_count < 1.0 {
            return fail("wave_count must be at least 1");
        }
        if !(self.amplitude_factor > 0.0 && self.amplitude_factor <= 1.0) {
            return fail("amplitude_factor must lie in (0, 1]");
        }
        if self.path_samples == 0 {
            return fail("path_samples must be positive");
        }
        Ok(())
    }

    /// Radial width of the crown band, `R'_c - R_c`.
    pub fn band(&self) -> f64 {
        self.crown_radius - self.core_radius
    }
}

/// Bar height for `cases` in one span.
///
/// Zero cases give the base height. From one case upwards the height is
/// `h + R'_c * (a + ln f) * b`. Per-capita values can fall strictly between
/// 0 and 1, where the logarithm would drop below the zero-case bar; there the
/// height follows the straight line from `h` to the value at `f = 1`, which
/// keeps the height strictly increasing in `f`.
pub fn protein_height(cases: f64, cfg: &PortraitConfig) -> f64 {
    let h = cfg.base_height;
    if cases <= 0.0 {
        h
    } else if cases < 1.0 {
        h + cfg.crown_radius * cfg.scale_a * cfg.scale_b * cases
    } else {
        h + cfg.crown_radius * (cfg.scale_a + cases.ln()) * cfg.scale_b
    }
}

/// RNA arc angle for a community value `value` in a category whose largest
/// value is `max`. `share_n` is 1 for a full channel and 2 for a half.
///
/// The result is not clamped: at `value == max` it exceeds `2π / share_n`
/// by the `min_arc / share_n` floor.
pub fn rna_arc_angle(value: f64, max: f64, share_n: u8, min_arc: f64) -> Result<f64, GeometryError> {
    if !(max > 0.0) {
        return Err(GeometryError::DegenerateCategory(format!("max = {max}")));
    }
    if !(0.0..=max).contains(&value) {
        return Err(GeometryError::ValueOutOfRange { value, max });
    }
    let n = f64::from(share_n);
    Ok(value / max * (TAU / n) + min_arc / n)
}

/// Radial spacing of channel `channel` from the core, `(R'_c - R_c) / m`.
pub fn channel_radius(channel: u8, cfg: &PortraitConfig) -> f64 {
    cfg.band() / f64::from(channel)
}

/// Arc length of an RNA strand in channel `channel`.
pub fn rna_arc_length(angle: f64, channel: u8, cfg: &PortraitConfig) -> f64 {
    channel_radius(channel, cfg) * angle
}

/// The wave radius evaluated exactly as printed, at the strand's own arc
/// angle, with full amplitude and no core offset:
/// `(R'_c - R_c)/3 * |cos(angle * share)| + (R'_c - R_c)/m`.
pub fn literal_wave_radius(angle: f64, share: f64, channel: u8, cfg: &PortraitConfig) -> f64 {
    cfg.band() / 3.0 * (angle * share).cos().abs() + channel_radius(channel, cfg)
}

/// Drawn radius at running angle `phi` along a strand with frequency share
/// `share`.
///
/// The wave hangs inward from the channel radius with amplitude
/// `alpha * (R'_c - R_c) / 3`, so every point stays within `[R_c, R'_c]` for
/// channels 1 to 3. Larger shares oscillate faster.
pub fn wave_radius(phi: f64, share: f64, channel: u8, cfg: &PortraitConfig) -> f64 {
    let amplitude = cfg.amplitude_factor * cfg.band() / 3.0;
    let wave = (phi * cfg.wave_count * share).cos().abs();
    cfg.core_radius + channel_radius(channel, cfg) - amplitude * (1.0 - wave)
}

/// Samples a strand as `(phi, r)` pairs, `phi` running from 0 to the arc
/// angle clamped at `2π / share_n`, in `cfg.path_samples` equal steps.
pub fn rna_wave_path(angle: f64, share: f64, channel: u8, share_n: u8, cfg: &PortraitConfig) -> Vec<[f64; 2]> {
    let drawn = angle.min(TAU / f64::from(share_n)).max(0.0);
    let steps = cfg.path_samples;
    let step = drawn / steps as f64;
    (0..=steps)
        .map(|k| {
            let phi = if k == steps { drawn } else { k as f64 * step };
            [phi, wave_radius(phi, share, channel, cfg)]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn example_cfg() -> PortraitConfig {
        PortraitConfig {
            core_radius: 12.0,
            crown_radius: 40.0,
            base_height: 4.0,
            scale_a: 1.0,
            scale_b: 0.05,
            ..PortraitConfig::default()
        }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn protein_height_examples() {
        let cfg = example_cfg();
        assert_eq!(protein_height(0.0, &cfg), 4.0);
        assert!(close(protein_height(1.0, &cfg), 6.0, 1e-15));
        // 4 + 40 * (1 + ln 100) * 0.05, evaluated at 40 digits
        assert!(close(protein_height(100.0, &cfg), 15.210340371976183, 1e-12));
    }

    #[test]
    fn protein_height_below_one_bridges_to_formula() {
        let cfg = example_cfg();
        let below = protein_height(1.0 - 1e-12, &cfg);
        assert!(close(below, protein_height(1.0, &cfg), 1e-9));
        assert!(protein_height(0.01, &cfg) > cfg.base_height);
        assert!(protein_height(0.5, &cfg) < protein_height(0.6, &cfg));
    }

    #[test]
    fn arc_angle_examples() {
        assert!(close(rna_arc_angle(0.0, 1000.0, 2, 0.2).unwrap(), 0.1, 1e-15));
        assert!(close(rna_arc_angle(250.0, 1000.0, 2, 0.2).unwrap(), 0.885398163397448, 1e-12));
        assert!(close(rna_arc_angle(1000.0, 1000.0, 1, 0.2).unwrap(), 6.483185307179586, 1e-12));
        assert_eq!(
            rna_arc_angle(1.0, 0.0, 1, 0.2),
            Err(GeometryError::DegenerateCategory("max = 0".into()))
        );
        assert!(rna_arc_angle(2.0, 1.0, 1, 0.2).is_err());
    }

    #[test]
    fn arc_length_examples() {
        let cfg = example_cfg();
        assert!(close(rna_arc_length(0.885398163, 2, &cfg), 12.395574282, 1e-9));
        assert!(close(rna_arc_length(0.1, 1, &cfg), 2.8, 1e-15));
        assert_eq!(rna_arc_length(0.0, 3, &cfg), 0.0);
    }

    #[test]
    fn literal_wave_examples() {
        let cfg = example_cfg();
        assert!(close(literal_wave_radius(0.0, 1.0, 3, &cfg), 56.0 / 3.0, 1e-15));
        assert!(close(literal_wave_radius(FRAC_PI_2, 1.0, 3, &cfg), 28.0 / 3.0, 1e-15));
        // (28/3) cos(π/4) + 28/3, evaluated at 40 digits
        assert!(close(literal_wave_radius(FRAC_PI_4, 1.0, 3, &cfg), 15.932996624407777, 1e-12));
    }

    #[test]
    fn wave_path_is_contained_and_evenly_sampled() {
        let cfg = PortraitConfig::default();
        for channel in 1..=3u8 {
            for share_n in 1..=2u8 {
                let path = rna_wave_path(2.0 * PI, 0.3, channel, share_n, &cfg);
                assert_eq!(path.len(), cfg.path_samples + 1);
                assert!(close(path.last().unwrap()[0], 2.0 * PI / f64::from(share_n), 1e-15));
                let step = path[1][0] - path[0][0];
                for pair in path.windows(2) {
                    assert!(close(pair[1][0] - pair[0][0], step, 1e-9));
                }
                for &[_, r] in &path {
                    assert!(r >= cfg.core_radius && r <= cfg.crown_radius, "r = {r}");
                }
            }
        }
    }

    #[test]
    fn wave_starts_at_channel_radius() {
        let cfg = PortraitConfig::default();
        assert_eq!(wave_radius(0.0, 0.5, 1, &cfg), cfg.crown_radius);
        assert!(close(wave_radius(0.0, 0.5, 3, &cfg), 12.0 + 28.0 / 3.0, 1e-15));
    }

    #[test]
    fn config_validation() {
        assert!(PortraitConfig::default().validate().is_ok());
        let bad = PortraitConfig {
            crown_radius: 10.0,
            ..PortraitConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PortraitConfig {
            amplitude_factor: 1.5,
            ..PortraitConfig::default()
        };
        assert!(bad.validate().is_err());
        let partial: PortraitConfig = serde_json::from_str(r#"{"scale_a": 2.0}"#).unwrap();
        assert_eq!(partial.scale_a, 2.0);
        assert_eq!(partial.core_radius, 12.0);
    }
}
