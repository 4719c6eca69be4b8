//! Scenario configuration: the on-disk JSON schema and seeded preset
//! generation.
//!
//! A scenario fixes an image, a pyramid, and a set of instances whose loss
//! surfaces are controlled by two hotspots (one per task). The JSON layout is
//! exactly the serde layout below; unknown keys are rejected.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, LevelSpec, PyramidGrid};
use crate::losses::{synth_loss_field, LossField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSize {
    pub w: u32,
    pub h: u32,
}

/// One pyramid level; the level index is the position in the list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    pub stride: u32,
    pub grid_w: u32,
    pub grid_h: u32,
}

/// One instance: ground-truth box plus the two loss hotspots.
///
/// `spread` carries the Gaussian spread of each task's surface as
/// `[cls_spread, reg_spread]` in pixels; `noise` is the amplitude (pixels) of
/// the seeded perturbation applied to both hotspot distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub id: u32,
    pub class: u32,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub cls_hotspot: [f64; 2],
    pub reg_hotspot: [f64; 2],
    pub spread: [f64; 2],
    pub noise: f64,
}

impl InstanceConfig {
    pub fn bbox(&self) -> Result<BBox> {
        BBox::new(self.bbox[0], self.bbox[1], self.bbox[2], self.bbox[3])
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.bbox()?;
        for (name, [x, y]) in [("cls", self.cls_hotspot), ("reg", self.reg_hotspot)] {
            if !b.contains(x, y) {
                return Err(Error::InvalidScenario(format!(
                    "instance {}: {name} hotspot ({x}, {y}) outside its box",
                    self.id
                )));
            }
        }
        if !(self.spread[0] > 0.0 && self.spread[1] > 0.0)
            || !self.spread.iter().all(|s| s.is_finite())
        {
            return Err(Error::InvalidScenario(format!(
                "instance {}: spreads must be positive",
                self.id
            )));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::InvalidScenario(format!(
                "instance {}: noise must be finite and >= 0",
                self.id
            )));
        }
        Ok(())
    }
}

/// A full scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub image: ImageSize,
    pub levels: Vec<LevelConfig>,
    pub instances: Vec<InstanceConfig>,
    pub seed: u64,
}

impl ScenarioConfig {
    /// The pyramid described by `levels`, indexed by list position.
    pub fn grid(&self) -> Result<PyramidGrid> {
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(i, l)| LevelSpec {
                level_index: i,
                stride: l.stride,
                grid_w: l.grid_w,
                grid_h: l.grid_h,
            })
            .collect();
        PyramidGrid::new(levels, self.image.w, self.image.h)
    }

    pub fn instance(&self, id: u32) -> Result<&InstanceConfig> {
        self.instances
            .iter()
            .find(|i| i.id == id)
            .ok_or_else(|| Error::InvalidScenario(format!("no instance with id {id}")))
    }

    /// Full schema validation: grid, non-empty unique instances, hotspots
    /// inside boxes, positive spreads.
    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if self.instances.is_empty() {
            return Err(Error::InvalidScenario(
                "at least one instance required".into(),
            ));
        }
        let mut ids: Vec<u32> = self.instances.iter().map(|i| i.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.instances.len() {
            return Err(Error::InvalidScenario("duplicate instance ids".into()));
        }
        for inst in &self.instances {
            inst.validate()?;
        }
        Ok(())
    }

    /// Validates, then synthesizes every instance's loss field.
    pub fn loss_fields(&self) -> Result<(PyramidGrid, Vec<LossField>)> {
        self.validate()?;
        let grid = self.grid()?;
        let fields = self
            .instances
            .iter()
            .map(|i| synth_loss_field(self, i.id))
            .collect::<Result<Vec<_>>>()?;
        Ok((grid, fields))
    }
}

/// Scenario families the generator can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Both hotspots at the box center: the two tasks agree spatially.
    Aligned,
    /// Hotspots at opposite box corners: maximal spatial misalignment.
    Misaligned,
    /// Hotspots placed independently at random, with mild noise.
    Random,
}

impl Preset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Aligned => "aligned",
            Preset::Misaligned => "misaligned",
            Preset::Random => "random",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(Preset::Aligned),
            "misaligned" => Ok(Preset::Misaligned),
            "random" => Ok(Preset::Random),
            other => Err(Error::InvalidScenario(format!("unknown preset '{other}'"))),
        }
    }
}

const GEN_IMAGE: u32 = 256;
const GEN_STRIDES: [u32; 3] = [8, 16, 32];

/// Generates a scenario deterministically from a preset and seed on a
/// 256x256 canvas with strides 8/16/32.
///
/// The misaligned preset puts the classification hotspot deep in one corner
/// (a steep, tight surface) and the localization hotspot past the box center
/// toward the opposite corner (a gentle, wide surface). The band where the
/// two losses agree then falls between the corner and the center, well away
/// from the region a center-sampling rule is allowed to pick.
pub fn generate(preset: Preset, seed: u64, instances: usize) -> Result<ScenarioConfig> {
    if instances == 0 {
        return Err(Error::InvalidScenario(
            "at least one instance required".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = GEN_STRIDES
        .iter()
        .map(|&stride| LevelConfig {
            stride,
            grid_w: GEN_IMAGE / stride,
            grid_h: GEN_IMAGE / stride,
        })
        .collect();

    let (size_lo, size_hi) = match preset {
        Preset::Aligned => (40.0, 64.0),
        Preset::Misaligned => (110.0, 200.0),
        Preset::Random => (64.0, 192.0),
    };

    let mut out = Vec::with_capacity(instances);
    for id in 0..instances {
        let w = rng.gen_range(size_lo..size_hi);
        let h = rng.gen_range(size_lo..size_hi);
        let x0 = rng.gen_range(4.0..(f64::from(GEN_IMAGE) - 4.0 - w));
        let y0 = rng.gen_range(4.0..(f64::from(GEN_IMAGE) - 4.0 - h));
        let bbox = [x0, y0, x0 + w, y0 + h];
        let diag = w.hypot(h);
        let at = |fx: f64, fy: f64| [x0 + fx * w, y0 + fy * h];

        let (cls_hotspot, reg_hotspot, spread, noise) = match preset {
            Preset::Aligned => {
                let c = at(0.5, 0.5);
                let spread = [
                    rng.gen_range(0.18..0.26) * diag,
                    rng.gen_range(0.18..0.26) * diag,
                ];
                (c, c, spread, 0.0)
            }
            Preset::Misaligned => {
                let lo = rng.gen_range(0.10..0.14);
                let hi = rng.gen_range(0.60..0.68);
                let flip_diag = rng.gen_bool(0.5);
                let swap_tasks = rng.gen_bool(0.5);
                let (corner_a, corner_b) = if flip_diag {
                    (at(lo, lo), at(hi, hi))
                } else {
                    (at(hi, lo), at(lo, hi))
                };
                let (cls, reg) = if swap_tasks {
                    (corner_b, corner_a)
                } else {
                    (corner_a, corner_b)
                };
                let spread = [
                    rng.gen_range(0.06..0.09) * diag,
                    rng.gen_range(0.26..0.34) * diag,
                ];
                (cls, reg, spread, 0.0)
            }
            Preset::Random => {
                let cls = at(rng.gen_range(0.15..0.85), rng.gen_range(0.15..0.85));
                let reg = at(rng.gen_range(0.15..0.85), rng.gen_range(0.15..0.85));
                let spread = [
                    rng.gen_range(0.06..0.20) * diag,
                    rng.gen_range(0.10..0.30) * diag,
                ];
                (cls, reg, spread, rng.gen_range(0.0..2.0))
            }
        };

        out.push(InstanceConfig {
            id: id as u32,
            class: rng.gen_range(0..20),
            bbox,
            cls_hotspot,
            reg_hotspot,
            spread,
            noise,
        });
    }

    let cfg = ScenarioConfig {
        image: ImageSize {
            w: GEN_IMAGE,
            h: GEN_IMAGE,
        },
        levels,
        instances: out,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_is_deterministic() {
        let a = generate(Preset::Misaligned, 7, 4).unwrap();
        let b = generate(Preset::Misaligned, 7, 4).unwrap();
        assert_eq!(a, b);
        let c = generate(Preset::Misaligned, 8, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generate_zero_instances_rejected() {
        assert!(matches!(
            generate(Preset::Aligned, 1, 0),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn misaligned_hotspots_sit_in_opposite_quadrants() {
        for seed in 0..20 {
            let cfg = generate(Preset::Misaligned, seed, 3).unwrap();
            for inst in &cfg.instances {
                let b = inst.bbox().unwrap();
                let (cx, cy) = b.center();
                let dx = (inst.cls_hotspot[0] - cx) * (inst.reg_hotspot[0] - cx);
                let dy = (inst.cls_hotspot[1] - cy) * (inst.reg_hotspot[1] - cy);
                assert!(dx < 0.0 && dy < 0.0, "hotspots must straddle the center");
                let dist = (inst.cls_hotspot[0] - inst.reg_hotspot[0])
                    .hypot(inst.cls_hotspot[1] - inst.reg_hotspot[1]);
                assert!(dist >= 0.4 * b.diagonal());
            }
        }
    }

    #[test]
    fn aligned_hotspots_coincide_at_center() {
        let cfg = generate(Preset::Aligned, 3, 3).unwrap();
        for inst in &cfg.instances {
            assert_eq!(inst.cls_hotspot, inst.reg_hotspot);
            let b = inst.bbox().unwrap();
            let (cx, cy) = b.center();
            assert!((inst.cls_hotspot[0] - cx).abs() < 1e-9);
            assert!((inst.cls_hotspot[1] - cy).abs() < 1e-9);
        }
    }

    #[test]
    fn json_round_trip_preserves_value() {
        let cfg = generate(Preset::Random, 11, 2).unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{
            "image": {"w": 64, "h": 64},
            "levels": [{"stride": 8, "grid_w": 8, "grid_h": 8}],
            "instances": [],
            "seed": 0,
            "surprise": true
        }"#;
        assert!(serde_json::from_str::<ScenarioConfig>(text).is_err());
    }

    #[test]
    fn validate_catches_schema_violations() {
        let mut cfg = generate(Preset::Aligned, 2, 2).unwrap();
        cfg.instances[1].id = cfg.instances[0].id;
        assert!(matches!(cfg.validate(), Err(Error::InvalidScenario(_))));

        let mut cfg = generate(Preset::Aligned, 2, 1).unwrap();
        cfg.instances[0].spread = [0.0, 10.0];
        assert!(matches!(cfg.validate(), Err(Error::InvalidScenario(_))));

        let mut cfg = generate(Preset::Aligned, 2, 1).unwrap();
        cfg.instances.clear();
        assert!(matches!(cfg.validate(), Err(Error::InvalidScenario(_))));
    }
}
