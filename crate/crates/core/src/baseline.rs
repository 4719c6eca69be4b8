//! Center-region baseline assigners used for comparison.
//!
//! These implement the classic hyperparameter-driven scheme: one level owns
//! each instance by a size range, and positives are confined to a radius (in
//! strides) around the box center.

use crate::error::{Error, Result};
use crate::geometry::{BBox, PointId, PyramidGrid};

/// Configuration of the center-sampling baseline.
///
/// `scale_ranges` holds one `(min_size, max_size)` interval per pyramid
/// level; a box is owned by the level whose interval contains its longest
/// side, with sizes matched as `min < size <= max`. Intervals must start at
/// zero and be contiguous; the last may be finite, in which case oversized
/// boxes fall outside every range and yield an empty, flagged assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterBaselineConfig {
    pub radius_in_strides: f64,
    pub scale_ranges: Vec<(f64, f64)>,
}

impl CenterBaselineConfig {
    pub fn new(radius_in_strides: f64, scale_ranges: Vec<(f64, f64)>) -> Result<Self> {
        if !(radius_in_strides > 0.0) {
            return Err(Error::Contract("radius must be positive".into()));
        }
        if scale_ranges.is_empty() {
            return Err(Error::Contract("at least one scale range required".into()));
        }
        if scale_ranges[0].0 != 0.0 {
            return Err(Error::Contract("scale ranges must start at 0".into()));
        }
        for w in scale_ranges.windows(2) {
            if w[0].1 != w[1].0 {
                return Err(Error::Contract(format!(
                    "scale ranges must be contiguous: ({}, {}) then ({}, {})",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        for &(lo, hi) in &scale_ranges {
            if !(lo < hi) {
                return Err(Error::Contract(format!(
                    "empty scale range ({lo}, {hi})"
                )));
            }
        }
        Ok(Self {
            radius_in_strides,
            scale_ranges,
        })
    }

    /// The standard partition for `n` levels: 64, 128, 256, ... boundaries
    /// with an unbounded last range, radius 1.5 strides.
    pub fn default_for_levels(n: usize) -> Self {
        assert!(n >= 1);
        let mut ranges = Vec::with_capacity(n);
        let mut lo = 0.0;
        for i in 0..n {
            let hi = if i + 1 == n {
                f64::INFINITY
            } else {
                64.0 * f64::powi(2.0, i as i32)
            };
            ranges.push((lo, hi));
            lo = hi;
        }
        Self {
            radius_in_strides: 1.5,
            scale_ranges: ranges,
        }
    }
}

impl Default for CenterBaselineConfig {
    fn default() -> Self {
        Self::default_for_levels(5)
    }
}

/// Result of the center-sampling baseline for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterAssignment {
    /// The owning level, if the box size matched a range.
    pub level: Option<usize>,
    pub positives: Vec<PointId>,
    /// Set when the box size fell outside every configured range.
    pub out_of_range: bool,
}

/// Center-sampling assignment: in-box points of the size-matched level within
/// `radius_in_strides * stride` (Euclidean) of the box center.
pub fn center_sampling_assign(
    bbox: &BBox,
    grid: &PyramidGrid,
    cfg: &CenterBaselineConfig,
) -> Result<CenterAssignment> {
    bbox.validate()?;
    if cfg.scale_ranges.len() != grid.levels().len() {
        return Err(Error::Contract(format!(
            "{} scale ranges for {} levels",
            cfg.scale_ranges.len(),
            grid.levels().len()
        )));
    }
    let size = bbox.width().max(bbox.height());
    let owning = grid
        .levels()
        .iter()
        .zip(&cfg.scale_ranges)
        .find(|(_, &(lo, hi))| size > lo && size <= hi)
        .map(|(spec, _)| spec.level_index);
    let Some(level) = owning else {
        return Ok(CenterAssignment {
            level: None,
            positives: Vec::new(),
            out_of_range: true,
        });
    };
    let stride = f64::from(grid.level(level)?.stride);
    let radius = cfg.radius_in_strides * stride;
    let (cx, cy) = bbox.center();
    let positives = grid
        .points_in_box(level, bbox)?
        .into_iter()
        .filter(|&p| {
            let (x, y) = grid.point_center(p).expect("in-box point is valid");
            (x - cx).hypot(y - cy) <= radius
        })
        .collect();
    Ok(CenterAssignment {
        level: Some(level),
        positives,
        out_of_range: false,
    })
}

/// The initial positive set: every in-box point of every level.
pub fn all_in_box_assign(bbox: &BBox, grid: &PyramidGrid) -> Result<Vec<PointId>> {
    let mut out = Vec::new();
    for spec in grid.levels() {
        out.extend(grid.points_in_box(spec.level_index, bbox)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LevelSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_5level() -> PyramidGrid {
        let levels = (0..5)
            .map(|i| LevelSpec {
                level_index: i,
                stride: 8 << i,
                grid_w: 128 >> i,
                grid_h: 128 >> i,
            })
            .collect();
        PyramidGrid::new(levels, 1024, 1024).unwrap()
    }

    #[test]
    fn nine_cells_around_a_centered_box() {
        let grid = grid_5level();
        // 32x32 box centered on the stride-8 cell center (100, 100).
        let bbox = BBox::new(84.0, 84.0, 116.0, 116.0).unwrap();
        let cfg = CenterBaselineConfig::default_for_levels(5);
        let got = center_sampling_assign(&bbox, &grid, &cfg).unwrap();
        assert_eq!(got.level, Some(0), "size 32 belongs to the (0, 64] range");
        assert_eq!(got.positives.len(), 9);
        for p in &got.positives {
            let (x, y) = grid.point_center(*p).unwrap();
            assert!((x - 100.0).hypot(y - 100.0) <= 12.0);
        }
    }

    #[test]
    fn sub_stride_box_can_be_empty() {
        let grid = grid_5level();
        let bbox = BBox::new(0.5, 0.5, 3.5, 3.5).unwrap();
        let cfg = CenterBaselineConfig::default_for_levels(5);
        let got = center_sampling_assign(&bbox, &grid, &cfg).unwrap();
        assert_eq!(got.level, Some(0));
        assert!(got.positives.is_empty());
        assert!(!got.out_of_range);
    }

    #[test]
    fn huge_radius_recovers_all_in_box_points_of_owning_level() {
        let grid = grid_5level();
        let bbox = BBox::new(100.0, 120.0, 180.0, 260.0).unwrap(); // size 140 -> level 2
        let cfg =
            CenterBaselineConfig::new(1e9, CenterBaselineConfig::default_for_levels(5).scale_ranges)
                .unwrap();
        let got = center_sampling_assign(&bbox, &grid, &cfg).unwrap();
        assert_eq!(got.level, Some(2));
        assert_eq!(got.positives, grid.points_in_box(2, &bbox).unwrap());
    }

    #[test]
    fn oversized_box_flags_out_of_range() {
        let grid = grid_5level();
        let mut ranges = CenterBaselineConfig::default_for_levels(5).scale_ranges;
        ranges[4] = (512.0, 700.0); // finite tail
        let cfg = CenterBaselineConfig::new(1.5, ranges).unwrap();
        let bbox = BBox::new(0.0, 0.0, 800.0, 800.0).unwrap();
        let got = center_sampling_assign(&bbox, &grid, &cfg).unwrap();
        assert!(got.out_of_range);
        assert!(got.positives.is_empty());
        assert_eq!(got.level, None);
    }

    #[test]
    fn config_validation() {
        assert!(CenterBaselineConfig::new(0.0, vec![(0.0, f64::INFINITY)]).is_err());
        assert!(CenterBaselineConfig::new(1.5, vec![(1.0, 64.0)]).is_err());
        assert!(CenterBaselineConfig::new(1.5, vec![(0.0, 64.0), (65.0, 128.0)]).is_err());
        assert!(CenterBaselineConfig::new(1.5, vec![(0.0, 64.0), (64.0, 128.0)]).is_ok());
    }

    #[test]
    fn all_in_box_matches_per_level_union() {
        let grid = grid_5level();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let w = rng.gen_range(10.0..500.0);
            let h = rng.gen_range(10.0..500.0);
            let x = rng.gen_range(0.0..(1024.0 - w));
            let y = rng.gen_range(0.0..(1024.0 - h));
            let bbox = BBox::new(x, y, x + w, y + h).unwrap();
            let got = all_in_box_assign(&bbox, &grid).unwrap();
            let mut expect = Vec::new();
            for spec in grid.levels() {
                expect.extend(grid.points_in_box(spec.level_index, &bbox).unwrap());
            }
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn center_sampling_is_a_subset_and_radius_monotone() {
        let grid = grid_5level();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let w = rng.gen_range(16.0..400.0);
            let h = rng.gen_range(16.0..400.0);
            let x = rng.gen_range(0.0..(1024.0 - w));
            let y = rng.gen_range(0.0..(1024.0 - h));
            let bbox = BBox::new(x, y, x + w, y + h).unwrap();
            let all: Vec<PointId> = all_in_box_assign(&bbox, &grid).unwrap();
            let mut prev: Option<Vec<PointId>> = None;
            for radius in [3.0, 1.5, 0.75] {
                let cfg = CenterBaselineConfig::new(
                    radius,
                    CenterBaselineConfig::default_for_levels(5).scale_ranges,
                )
                .unwrap();
                let got = center_sampling_assign(&bbox, &grid, &cfg).unwrap();
                for p in &got.positives {
                    assert!(all.contains(p));
                }
                if let Some(prev) = &prev {
                    for p in &got.positives {
                        assert!(prev.contains(p), "shrinking the radius added a point");
                    }
                }
                prev = Some(got.positives);
            }
        }
    }
}
