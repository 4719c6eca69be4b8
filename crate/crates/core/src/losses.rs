//! Forward classification/localization losses and synthetic loss fields.
//!
//! The synthetic fields model the spatial misalignment phenomenon: each
//! instance carries one hotspot where classification is easy and one where
//! localization is easy, and the per-point losses grow with distance from the
//! respective hotspot. All randomness flows from the scenario seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{giou, BBox, PointId, PyramidGrid};
use crate::scenario::ScenarioConfig;

/// Conventional focal-loss defaults.
pub const FOCAL_ALPHA: f64 = 0.25;
pub const FOCAL_GAMMA: f64 = 2.0;

/// Peak predicted probability of the synthetic classifier surface.
const PROB_PEAK: f64 = 0.95;
/// Clamp keeping synthetic probabilities inside the focal-loss domain.
const PROB_EPS: f64 = 1e-6;
/// Box-perturbation scale: at three reg spreads of hotspot distance the
/// predicted box is shifted by half its width and height.
const SHIFT_SCALE: f64 = 0.5;
const SHIFT_REACH_SPREADS: f64 = 3.0;

/// One point's pair of task losses. Both entries are finite and non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPair {
    pub cls: f64,
    pub reg: f64,
}

impl LossPair {
    pub fn new(cls: f64, reg: f64) -> Self {
        debug_assert!(cls.is_finite() && cls >= 0.0);
        debug_assert!(reg.is_finite() && reg >= 0.0);
        Self { cls, reg }
    }

    /// Combined loss of the two tasks.
    pub fn sum(&self) -> f64 {
        self.cls + self.reg
    }

    /// Absolute loss gap between the two tasks.
    pub fn gap(&self) -> f64 {
        (self.cls - self.reg).abs()
    }
}

/// Binary focal loss evaluated on a predicted probability.
pub fn focal_loss(p: f64, y: bool, alpha: f64, gamma: f64) -> Result<f64> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(Error::Domain(format!("probability {p} outside (0, 1)")));
    }
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::Domain(format!("alpha {alpha} outside (0, 1)")));
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::Domain(format!("gamma {gamma} must be >= 0")));
    }
    Ok(if y {
        -alpha * (1.0 - p).powf(gamma) * p.ln()
    } else {
        -(1.0 - alpha) * p.powf(gamma) * (1.0 - p).ln()
    })
}

/// GIoU loss `1 - giou(pred, gt)`, in `[0, 2)`.
pub fn giou_loss(pred: &BBox, gt: &BBox) -> Result<f64> {
    Ok(1.0 - giou(pred, gt)?)
}

/// Per-instance losses over the initially positive points.
///
/// One entry per pyramid level, in level order; each entry lists the
/// instance's in-box points of that level in row-major order with their loss
/// pair. Levels with no in-box points carry empty lists.
#[derive(Debug, Clone, PartialEq)]
pub struct LossField {
    instance_id: u32,
    levels: Vec<(usize, Vec<(PointId, LossPair)>)>,
}

impl LossField {
    /// Builds a field over `points_in_box(bbox)` of every level, computing
    /// each point's losses with `f`. Membership and order are therefore
    /// correct by construction.
    pub fn from_fn<F>(
        grid: &PyramidGrid,
        bbox: &BBox,
        instance_id: u32,
        mut f: F,
    ) -> Result<Self>
    where
        F: FnMut(PointId, (f64, f64)) -> Result<LossPair>,
    {
        let mut levels = Vec::with_capacity(grid.levels().len());
        for spec in grid.levels() {
            let pts = grid.points_in_box(spec.level_index, bbox)?;
            let mut entries = Vec::with_capacity(pts.len());
            for p in pts {
                let center = grid.point_center(p)?;
                entries.push((p, f(p, center)?));
            }
            levels.push((spec.level_index, entries));
        }
        Ok(Self {
            instance_id,
            levels,
        })
    }

    pub fn instance_id(&self) -> u32 {
        self.instance_id
    }

    /// `(level_index, points)` pairs in level order.
    pub fn levels(&self) -> &[(usize, Vec<(PointId, LossPair)>)] {
        &self.levels
    }

    pub fn level_entries(&self, level: usize) -> Option<&[(PointId, LossPair)]> {
        self.levels
            .iter()
            .find(|(l, _)| *l == level)
            .map(|(_, v)| v.as_slice())
    }

    pub fn loss_at(&self, p: PointId) -> Option<LossPair> {
        self.level_entries(p.level)?
            .iter()
            .find(|(q, _)| *q == p)
            .map(|(_, l)| *l)
    }

    /// Total number of in-box points across levels.
    pub fn point_count(&self) -> usize {
        self.levels.iter().map(|(_, v)| v.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PointId, LossPair)> + '_ {
        self.levels.iter().flat_map(|(_, v)| v.iter().copied())
    }
}

/// Synthesizes the loss field of one scenario instance.
///
/// The predicted class probability peaks at the instance's cls hotspot and
/// decays as a Gaussian of the point-to-hotspot distance with the configured
/// cls spread; the predicted box drifts away from the ground truth linearly
/// in the distance to the reg hotspot, reaching a half-box shift at three reg
/// spreads. Noise perturbs the two distances by a uniform draw in
/// `[-noise, +noise]` pixels from a generator seeded by the scenario seed and
/// the instance id, so repeated evaluation is bit-identical.
pub fn synth_loss_field(cfg: &ScenarioConfig, instance_id: u32) -> Result<LossField> {
    let grid = cfg.grid()?;
    let inst = cfg.instance(instance_id)?;
    inst.validate()?;
    let bbox = inst.bbox()?;
    let (cls_x, cls_y) = (inst.cls_hotspot[0], inst.cls_hotspot[1]);
    let (reg_x, reg_y) = (inst.reg_hotspot[0], inst.reg_hotspot[1]);
    let (cls_spread, reg_spread) = (inst.spread[0], inst.spread[1]);
    let (w, h) = (bbox.width(), bbox.height());

    let mut rng = ChaCha8Rng::seed_from_u64(
        cfg.seed ^ u64::from(instance_id).wrapping_mul(0x9e37_79b9_7f4a_7c15),
    );

    LossField::from_fn(&grid, &bbox, instance_id, |_, (x, y)| {
        let n_cls: f64 = rng.gen_range(-1.0..=1.0);
        let n_reg: f64 = rng.gen_range(-1.0..=1.0);

        let d_cls = ((x - cls_x).hypot(y - cls_y) + inst.noise * n_cls).max(0.0);
        let p = (PROB_PEAK * (-d_cls * d_cls / (2.0 * cls_spread * cls_spread)).exp())
            .clamp(PROB_EPS, 1.0 - PROB_EPS);
        let cls = focal_loss(p, true, FOCAL_ALPHA, FOCAL_GAMMA)?;

        let d_reg = ((x - reg_x).hypot(y - reg_y) + inst.noise * n_reg).max(0.0);
        let u = d_reg / (SHIFT_REACH_SPREADS * reg_spread);
        let pred = bbox.shifted(SHIFT_SCALE * u * w, SHIFT_SCALE * u * h);
        let reg = giou_loss(&pred, &bbox)?;

        Ok(LossPair::new(cls, reg))
    })
}
