//! Feature-pyramid point grid, box geometry, and point-in-box membership.
//!
//! Every anchor point sits at the half-stride center of its grid cell. A point
//! is "in" a box when its center lies strictly inside the box; centers exactly
//! on the boundary are excluded so membership is deterministic.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Axis-aligned box in image-plane pixel coordinates.
///
/// Invariant: `x_min < x_max`, `y_min < y_max`, all coordinates finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    /// Re-checks the construction invariant; useful for values built field-wise.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::DegenerateBox {
                x_min: self.x_min,
                y_min: self.y_min,
                x_max: self.x_max,
                y_max: self.y_max,
            });
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Strict interior test; boundary points are outside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x > self.x_min && x < self.x_max && y > self.y_min && y < self.y_max
    }

    /// Translates the box by `(dx, dy)`.
    pub fn shifted(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    fn intersection_area(&self, other: &Self) -> f64 {
        let w = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let h = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        w * h
    }

    fn enclosing_area(&self, other: &Self) -> f64 {
        let w = self.x_max.max(other.x_max) - self.x_min.min(other.x_min);
        let h = self.y_max.max(other.y_max) - self.y_min.min(other.y_min);
        w * h
    }
}

/// Intersection over union of two valid boxes.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    Ok(inter / union)
}

/// Generalized IoU: `IoU - (|C| - |A∪B|) / |C|` with `C` the smallest
/// enclosing box. Lies in `(-1, 1]`; equals 1 iff the boxes coincide.
pub fn giou(a: &BBox, b: &BBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    let enclosing = a.enclosing_area(b);
    Ok(inter / union - (enclosing - union) / enclosing)
}

/// One scale level of the pyramid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelSpec {
    pub level_index: usize,
    /// Pixels per grid cell.
    pub stride: u32,
    pub grid_w: u32,
    pub grid_h: u32,
}

/// Identifies one anchor point: a grid cell on one scale level.
///
/// The ordering is the global deterministic tie-breaking order used by every
/// selection step: row-major position first (`cell_y`, then `cell_x`), then
/// the level index for cross-level ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PointId {
    pub level: usize,
    pub cell_x: u32,
    pub cell_y: u32,
}

impl Ord for PointId {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.cell_y, self.cell_x, self.level).cmp(&(other.cell_y, other.cell_x, other.level))
    }
}

impl PartialOrd for PointId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The multi-level point grid over one image.
///
/// Levels are kept sorted by `level_index`; construction accepts them in any
/// declaration order and rejects duplicate indices, non-increasing strides,
/// and grids that leave more than one stride of the image uncovered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PyramidGrid {
    levels: Vec<LevelSpec>,
    image_w: u32,
    image_h: u32,
}

impl PyramidGrid {
    pub fn new(mut levels: Vec<LevelSpec>, image_w: u32, image_h: u32) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidGrid("at least one level required".into()));
        }
        if image_w == 0 || image_h == 0 {
            return Err(Error::InvalidGrid("image dimensions must be positive".into()));
        }
        levels.sort_by_key(|l| l.level_index);
        for pair in levels.windows(2) {
            if pair[0].level_index == pair[1].level_index {
                return Err(Error::InvalidGrid(format!(
                    "duplicate level index {}",
                    pair[0].level_index
                )));
            }
            if pair[0].stride >= pair[1].stride {
                return Err(Error::InvalidGrid(format!(
                    "strides must be strictly increasing: {} then {}",
                    pair[0].stride, pair[1].stride
                )));
            }
        }
        for l in &levels {
            if l.stride < 1 || l.grid_w < 1 || l.grid_h < 1 {
                return Err(Error::InvalidGrid(format!(
                    "level {}: stride and grid dimensions must be at least 1",
                    l.level_index
                )));
            }
            let covers_w = u64::from(l.grid_w) * u64::from(l.stride) + u64::from(l.stride)
                >= u64::from(image_w);
            let covers_h = u64::from(l.grid_h) * u64::from(l.stride) + u64::from(l.stride)
                >= u64::from(image_h);
            if !covers_w || !covers_h {
                return Err(Error::InvalidGrid(format!(
                    "level {}: grid {}x{} at stride {} does not cover a {}x{} image",
                    l.level_index, l.grid_w, l.grid_h, l.stride, image_w, image_h
                )));
            }
        }
        Ok(Self {
            levels,
            image_w,
            image_h,
        })
    }

    pub fn levels(&self) -> &[LevelSpec] {
        &self.levels
    }

    pub fn image_size(&self) -> (u32, u32) {
        (self.image_w, self.image_h)
    }

    pub fn level(&self, level_index: usize) -> Result<&LevelSpec> {
        self.levels
            .iter()
            .find(|l| l.level_index == level_index)
            .ok_or(Error::UnknownLevel(level_index))
    }

    fn check_point(&self, p: PointId) -> Result<&LevelSpec> {
        let spec = self.level(p.level)?;
        if p.cell_x >= spec.grid_w || p.cell_y >= spec.grid_h {
            return Err(Error::PointOutOfRange { point: p });
        }
        Ok(spec)
    }

    /// Image-plane coordinates of a point: the half-stride cell center.
    pub fn point_center(&self, p: PointId) -> Result<(f64, f64)> {
        let spec = self.check_point(p)?;
        let s = f64::from(spec.stride);
        Ok((
            s * (f64::from(p.cell_x) + 0.5),
            s * (f64::from(p.cell_y) + 0.5),
        ))
    }

    /// Points of `level` whose centers lie strictly inside `bbox`, in
    /// row-major order (`cell_y`, then `cell_x`).
    pub fn points_in_box(&self, level: usize, bbox: &BBox) -> Result<Vec<PointId>> {
        bbox.validate()?;
        let spec = self.level(level)?;
        let s = f64::from(spec.stride);
        // Candidate cell range; the strict test below is authoritative.
        let lo_x = ((bbox.x_min / s - 0.5).floor().max(0.0)) as u32;
        let lo_y = ((bbox.y_min / s - 0.5).floor().max(0.0)) as u32;
        let hi_x = ((bbox.x_max / s).ceil().max(0.0) as u32).min(spec.grid_w.saturating_sub(1));
        let hi_y = ((bbox.y_max / s).ceil().max(0.0) as u32).min(spec.grid_h.saturating_sub(1));
        let mut out = Vec::new();
        for cy in lo_y..=hi_y {
            let y = s * (f64::from(cy) + 0.5);
            if y <= bbox.y_min || y >= bbox.y_max {
                continue;
            }
            for cx in lo_x..=hi_x {
                let x = s * (f64::from(cx) + 0.5);
                if x > bbox.x_min && x < bbox.x_max {
                    out.push(PointId {
                        level,
                        cell_x: cx,
                        cell_y: cy,
                    });
                }
            }
        }
        Ok(out)
    }

    /// All points of one level in row-major order.
    pub fn level_points(&self, level: usize) -> Result<Vec<PointId>> {
        let spec = self.level(level)?;
        let mut out = Vec::with_capacity((spec.grid_w * spec.grid_h) as usize);
        for cy in 0..spec.grid_h {
            for cx in 0..spec.grid_w {
                out.push(PointId {
                    level,
                    cell_x: cx,
                    cell_y: cy,
                });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_3level() -> PyramidGrid {
        PyramidGrid::new(
            vec![
                LevelSpec {
                    level_index: 0,
                    stride: 8,
                    grid_w: 4,
                    grid_h: 4,
                },
                LevelSpec {
                    level_index: 1,
                    stride: 16,
                    grid_w: 2,
                    grid_h: 2,
                },
                LevelSpec {
                    level_index: 2,
                    stride: 32,
                    grid_w: 1,
                    grid_h: 1,
                },
            ],
            32,
            32,
        )
        .unwrap()
    }

    #[test]
    fn point_center_half_stride() {
        let grid = grid_3level();
        let c = grid
            .point_center(PointId {
                level: 0,
                cell_x: 0,
                cell_y: 0,
            })
            .unwrap();
        assert_eq!(c, (4.0, 4.0));
        let c = grid
            .point_center(PointId {
                level: 0,
                cell_x: 2,
                cell_y: 1,
            })
            .unwrap();
        assert_eq!(c, (20.0, 12.0));
    }

    #[test]
    fn point_center_stride_16() {
        let grid = PyramidGrid::new(
            vec![LevelSpec {
                level_index: 0,
                stride: 16,
                grid_w: 4,
                grid_h: 4,
            }],
            64,
            64,
        )
        .unwrap();
        let c = grid
            .point_center(PointId {
                level: 0,
                cell_x: 0,
                cell_y: 3,
            })
            .unwrap();
        assert_eq!(c, (8.0, 56.0));
    }

    #[test]
    fn point_center_rejects_out_of_range() {
        let grid = grid_3level();
        let err = grid
            .point_center(PointId {
                level: 0,
                cell_x: 4,
                cell_y: 0,
            })
            .unwrap_err();
        assert!(matches!(err, Error::PointOutOfRange { .. }));
        let err = grid
            .point_center(PointId {
                level: 7,
                cell_x: 0,
                cell_y: 0,
            })
            .unwrap_err();
        assert_eq!(err, Error::UnknownLevel(7));
    }

    #[test]
    fn points_in_box_strict_interior() {
        let grid = grid_3level();
        let b = BBox::new(0.0, 0.0, 16.0, 16.0).unwrap();
        let pts = grid.points_in_box(0, &b).unwrap();
        let cells: Vec<(u32, u32)> = pts.iter().map(|p| (p.cell_x, p.cell_y)).collect();
        assert_eq!(cells, vec![(0, 0), (1, 0), (0, 1), (1, 1)]);
    }

    #[test]
    fn points_in_box_tiny_box_empty() {
        let grid = PyramidGrid::new(
            vec![LevelSpec {
                level_index: 0,
                stride: 16,
                grid_w: 2,
                grid_h: 2,
            }],
            32,
            32,
        )
        .unwrap();
        let b = BBox::new(0.0, 0.0, 7.0, 7.0).unwrap();
        assert!(grid.points_in_box(0, &b).unwrap().is_empty());
    }

    #[test]
    fn points_in_box_whole_image() {
        let grid = grid_3level();
        let b = BBox::new(-1.0, -1.0, 33.0, 33.0).unwrap();
        for spec in grid.levels() {
            let pts = grid.points_in_box(spec.level_index, &b).unwrap();
            assert_eq!(pts.len(), (spec.grid_w * spec.grid_h) as usize);
        }
    }

    #[test]
    fn boundary_centers_excluded() {
        let grid = grid_3level();
        // Center (4, 4) sits exactly on this box's corner: excluded.
        let b = BBox::new(4.0, 4.0, 20.0, 20.0).unwrap();
        let pts = grid.points_in_box(0, &b).unwrap();
        assert!(!pts.iter().any(|p| p.cell_x == 0 && p.cell_y == 0));
        assert!(pts.iter().any(|p| p.cell_x == 1 && p.cell_y == 1));
    }

    #[test]
    fn giou_closed_forms() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0).unwrap();
        let b = BBox::new(1.0, 1.0, 3.0, 3.0).unwrap();
        assert!((giou(&a, &b).unwrap() - (-5.0 / 63.0)).abs() < 1e-12);

        let a = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let b = BBox::new(9.0, 9.0, 10.0, 10.0).unwrap();
        assert!((giou(&a, &b).unwrap() - (-0.98)).abs() < 1e-12);
    }

    #[test]
    fn giou_rejects_degenerate() {
        let a = BBox {
            x_min: 0.0,
            y_min: 0.0,
            x_max: 0.0,
            y_max: 1.0,
        };
        let b = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            giou(&a, &b),
            Err(Error::DegenerateBox { .. })
        ));
    }

    #[test]
    fn grid_construction_rejects_bad_input() {
        let err = PyramidGrid::new(
            vec![
                LevelSpec {
                    level_index: 0,
                    stride: 8,
                    grid_w: 4,
                    grid_h: 4,
                },
                LevelSpec {
                    level_index: 1,
                    stride: 8,
                    grid_w: 4,
                    grid_h: 4,
                },
            ],
            32,
            32,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidGrid(_)));

        // Grid too small to cover the image.
        let err = PyramidGrid::new(
            vec![LevelSpec {
                level_index: 0,
                stride: 8,
                grid_w: 2,
                grid_h: 2,
            }],
            64,
            64,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidGrid(_)));
    }

    #[test]
    fn level_declaration_order_is_irrelevant() {
        let a = PyramidGrid::new(
            vec![
                LevelSpec {
                    level_index: 1,
                    stride: 16,
                    grid_w: 2,
                    grid_h: 2,
                },
                LevelSpec {
                    level_index: 0,
                    stride: 8,
                    grid_w: 4,
                    grid_h: 4,
                },
            ],
            32,
            32,
        )
        .unwrap();
        let b = BBox::new(2.0, 2.0, 30.0, 30.0).unwrap();
        let expected = grid_3level();
        assert_eq!(
            a.points_in_box(0, &b).unwrap(),
            expected.points_in_box(0, &b).unwrap()
        );
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (
            -50.0f64..150.0,
            -50.0f64..150.0,
            1.0f64..100.0,
            1.0f64..100.0,
        )
            .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
    }

    proptest! {
        #[test]
        fn giou_identity_and_symmetry(a in arb_box(), b in arb_box()) {
            prop_assert!((giou(&a, &a).unwrap() - 1.0).abs() < 1e-12);
            let ab = giou(&a, &b).unwrap();
            let ba = giou(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ab <= iou(&a, &b).unwrap() + 1e-12);
            prop_assert!(ab > -1.0 && ab <= 1.0);
        }

        #[test]
        fn nested_boxes_nest_points(a in arb_box(), shrink in 0.05f64..0.45) {
            let inner = BBox::new(
                a.x_min + shrink * a.width(),
                a.y_min + shrink * a.height(),
                a.x_max - shrink * a.width(),
                a.y_max - shrink * a.height(),
            ).unwrap();
            let grid = PyramidGrid::new(
                vec![
                    LevelSpec { level_index: 0, stride: 8, grid_w: 32, grid_h: 32 },
                    LevelSpec { level_index: 1, stride: 16, grid_w: 16, grid_h: 16 },
                ],
                256,
                256,
            ).unwrap();
            for level in 0..2 {
                let outer_pts = grid.points_in_box(level, &a).unwrap();
                let inner_pts = grid.points_in_box(level, &inner).unwrap();
                for p in &inner_pts {
                    prop_assert!(outer_pts.contains(p));
                }
            }
        }
    }
}
