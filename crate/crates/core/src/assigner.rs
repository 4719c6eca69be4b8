//! The aligned points sampler: loss-driven candidate selection, two-level
//! scale choice, alignment scoring, and the mixture-based positive split.
//!
//! Per instance the pipeline is: cap the per-level candidate count at K, keep
//! the K smallest combined-loss in-box points of each level, choose the two
//! levels with the smallest mean candidate loss, score the concatenated
//! candidates jointly (one softmax over both levels), and let a two-component
//! mixture over the scores separate positives from negatives. All ties break
//! on the global point order, so identical inputs give identical assignments.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::geometry::PointId;
use crate::gmm;
use crate::losses::{LossField, LossPair};

/// Default per-level candidate cap.
pub const DEFAULT_TOP_K: usize = 9;

/// Number of candidate points a level may contribute.
pub fn candidate_count(k: usize, in_box_count: usize) -> usize {
    k.min(in_box_count)
}

fn by_loss_then_point(a: &(PointId, LossPair), b: &(PointId, LossPair)) -> std::cmp::Ordering {
    a.1.sum().total_cmp(&b.1.sum()).then_with(|| a.0.cmp(&b.0))
}

/// The `n` entries with the smallest combined loss, sorted ascending by
/// combined loss and then by point order.
pub fn select_candidates(level_points: &[(PointId, LossPair)], n: usize) -> Vec<(PointId, LossPair)> {
    if n == 0 {
        return Vec::new();
    }
    let mut entries = level_points.to_vec();
    if n < entries.len() {
        entries.select_nth_unstable_by(n - 1, by_loss_then_point);
        entries.truncate(n);
    }
    entries.sort_by(by_loss_then_point);
    entries
}

/// Chooses up to two scale levels by smallest mean candidate loss.
///
/// Input is `(level_index, candidates)` per level; empty levels are skipped.
/// Ties break toward the lower level index. The result is sorted ascending.
pub fn select_levels(per_level: &[(usize, Vec<(PointId, LossPair)>)]) -> Result<Vec<usize>> {
    let mut means: Vec<(f64, usize)> = per_level
        .iter()
        .filter(|(_, c)| !c.is_empty())
        .map(|(level, c)| {
            let mean = c.iter().map(|(_, l)| l.sum()).sum::<f64>() / c.len() as f64;
            (mean, *level)
        })
        .collect();
    if means.is_empty() {
        return Err(Error::AllLevelsEmpty);
    }
    means.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    means.truncate(2);
    let mut chosen: Vec<usize> = means.into_iter().map(|(_, l)| l).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

fn check_lengths(cls: &[f64], reg: &[f64]) -> Result<()> {
    if cls.len() != reg.len() {
        return Err(Error::Contract(format!(
            "loss vectors differ in length: {} vs {}",
            cls.len(),
            reg.len()
        )));
    }
    if cls.is_empty() {
        return Err(Error::Contract("loss vectors must be non-empty".into()));
    }
    if cls.iter().chain(reg).any(|v| !v.is_finite()) {
        return Err(Error::Contract("loss vectors must be finite".into()));
    }
    Ok(())
}

fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Unfitness score: the mean of the two per-task softmax components, taken
/// over the candidate axis. Low values mark points both tasks exploit well.
pub fn unfitness_scores(cls: &[f64], reg: &[f64]) -> Result<Vec<f64>> {
    check_lengths(cls, reg)?;
    let sc = softmax(cls);
    let sr = softmax(reg);
    Ok(sc.iter().zip(&sr).map(|(a, b)| 0.5 * (a + b)).collect())
}

/// Misalignment score: sigmoid of the absolute loss gap, in `[0.5, 1)`.
pub fn misalignment_scores(cls: &[f64], reg: &[f64]) -> Result<Vec<f64>> {
    check_lengths(cls, reg)?;
    Ok(cls
        .iter()
        .zip(reg)
        .map(|(c, r)| 1.0 / (1.0 + (-(c - r).abs()).exp()))
        .collect())
}

/// Final score: the geometric mean of unfitness and misalignment.
pub fn combined_scores(s_u: &[f64], s_m: &[f64]) -> Result<Vec<f64>> {
    if s_u.len() != s_m.len() {
        return Err(Error::Contract(format!(
            "score vectors differ in length: {} vs {}",
            s_u.len(),
            s_m.len()
        )));
    }
    s_u.iter()
        .zip(s_m)
        .map(|(&u, &m)| {
            if !(u >= 0.0) || !(m >= 0.0) {
                return Err(Error::Contract(format!(
                    "scores must be non-negative, got ({u}, {m})"
                )));
            }
            Ok((u * m).sqrt())
        })
        .collect()
}

/// The three score vectors over one candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignScores {
    pub s_u: Vec<f64>,
    pub s_m: Vec<f64>,
    pub s: Vec<f64>,
}

/// Computes unfitness, misalignment, and combined scores in one pass.
pub fn align_scores(cls: &[f64], reg: &[f64]) -> Result<AlignScores> {
    let s_u = unfitness_scores(cls, reg)?;
    let s_m = misalignment_scores(cls, reg)?;
    let s = combined_scores(&s_u, &s_m)?;
    Ok(AlignScores { s_u, s_m, s })
}

/// Candidates of one instance after level selection: the concatenation of the
/// chosen levels' top-K lists, in ascending level order.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub instance_id: u32,
    pub chosen_levels: Vec<usize>,
    pub candidates: Vec<(PointId, LossPair)>,
}

/// Runs candidate counting, per-level top-K, and level selection over a loss
/// field.
pub fn build_candidate_set(field: &LossField, k: usize) -> Result<CandidateSet> {
    if k == 0 {
        return Err(Error::Contract("K must be at least 1".into()));
    }
    let per_level: Vec<(usize, Vec<(PointId, LossPair)>)> = field
        .levels()
        .iter()
        .map(|(level, pts)| {
            let n = candidate_count(k, pts.len());
            (*level, select_candidates(pts, n))
        })
        .collect();
    let chosen_levels = select_levels(&per_level)?;
    let mut candidates = Vec::new();
    for (level, c) in &per_level {
        if chosen_levels.contains(level) {
            candidates.extend_from_slice(c);
        }
    }
    Ok(CandidateSet {
        instance_id: field.instance_id(),
        chosen_levels,
        candidates,
    })
}

fn argmin_score(s: &[f64], candidates: &[(PointId, LossPair)]) -> usize {
    (0..s.len())
        .min_by(|&i, &j| {
            s[i].total_cmp(&s[j])
                .then_with(|| candidates[i].0.cmp(&candidates[j].0))
        })
        .expect("non-empty candidate set")
}

/// Splits candidates into positives and negatives by clustering the combined
/// scores with a two-component mixture.
///
/// Positives are the candidates whose posterior for the low-mean component
/// exceeds one half. At least one positive is guaranteed: if the cluster split
/// returns none, or the mixture cannot be fitted (fewer than two candidates,
/// or all scores identical), the single smallest-score candidate is positive,
/// with ties broken by point order. Returns indices into `candidates`.
pub fn split_gmm(candidates: &[(PointId, LossPair)], s: &[f64]) -> Result<(Vec<usize>, Vec<usize>)> {
    if candidates.len() != s.len() {
        return Err(Error::Contract(format!(
            "score vector length {} does not match candidate count {}",
            s.len(),
            candidates.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::Contract("candidate set must be non-empty".into()));
    }
    let positives: Vec<usize> = match gmm::fit_em(s, gmm::DEFAULT_MAX_ITER, gmm::DEFAULT_TOL) {
        Ok(model) => {
            let resp = gmm::responsibilities(&model, s);
            let pos: Vec<usize> = (0..s.len()).filter(|&i| resp[i].0 > 0.5).collect();
            if pos.is_empty() {
                vec![argmin_score(s, candidates)]
            } else {
                pos
            }
        }
        Err(Error::InsufficientData(_)) | Err(Error::DegenerateData) => {
            vec![argmin_score(s, candidates)]
        }
        Err(e) => return Err(e),
    };
    let pos_set: BTreeSet<usize> = positives.iter().copied().collect();
    let negatives = (0..s.len()).filter(|i| !pos_set.contains(i)).collect();
    Ok((positives, negatives))
}

/// A positive point with the evidence that selected it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivePoint {
    pub point: PointId,
    pub loss: LossPair,
    pub score: f64,
}

/// Result of assigning one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceAssignment {
    pub instance_id: u32,
    pub chosen_levels: Vec<usize>,
    /// The candidate pool the positives were drawn from.
    pub candidates: Vec<(PointId, LossPair)>,
    pub positives: Vec<PositivePoint>,
}

/// Runs the full per-instance pipeline over a loss field.
pub fn assign_instance(field: &LossField, k: usize) -> Result<InstanceAssignment> {
    let set = match build_candidate_set(field, k) {
        Err(Error::AllLevelsEmpty) => return Err(Error::NoCandidates(field.instance_id())),
        other => other?,
    };
    let cls: Vec<f64> = set.candidates.iter().map(|(_, l)| l.cls).collect();
    let reg: Vec<f64> = set.candidates.iter().map(|(_, l)| l.reg).collect();
    let scores = align_scores(&cls, &reg)?;
    let (pos_idx, _) = split_gmm(&set.candidates, &scores.s)?;
    let positives = pos_idx
        .into_iter()
        .map(|i| PositivePoint {
            point: set.candidates[i].0,
            loss: set.candidates[i].1,
            score: scores.s[i],
        })
        .collect();
    Ok(InstanceAssignment {
        instance_id: set.instance_id,
        chosen_levels: set.chosen_levels,
        candidates: set.candidates,
        positives,
    })
}

/// Image-level assignment: per-instance results with cross-instance conflicts
/// resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// One entry per assignable instance, in input order.
    pub instances: Vec<InstanceAssignment>,
    /// Instances with no in-box point on any level, or none left after
    /// conflict resolution.
    pub unassigned: Vec<u32>,
}

impl Assignment {
    /// Positive points of one instance.
    pub fn positives_of(&self, instance_id: u32) -> Option<&[PositivePoint]> {
        self.instances
            .iter()
            .find(|a| a.instance_id == instance_id)
            .map(|a| a.positives.as_slice())
    }
}

/// Assigns every instance and resolves contested points.
///
/// A point positive for several instances goes to the one with the smallest
/// combined loss at that point (ties: smaller instance id); the displaced
/// instances keep their remaining positives. An instance emptied by that rule
/// reclaims its best-scoring original positive even if contested, displacing
/// the current owner; displaced owners that become empty are rescued by the
/// same rule. Each instance is rescued at most once and each rescued point is
/// locked, so the process terminates within the instance count.
pub fn assign_image(fields: &[LossField], k: usize) -> Result<Assignment> {
    let mut ids: Vec<u32> = fields.iter().map(|f| f.instance_id()).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != fields.len() {
        return Err(Error::Contract("duplicate instance ids in loss fields".into()));
    }

    let mut unassigned = Vec::new();
    let mut assigned = Vec::new();
    for field in fields {
        match assign_instance(field, k) {
            Ok(a) => assigned.push(a),
            Err(Error::NoCandidates(id)) => unassigned.push(id),
            Err(e) => return Err(e),
        }
    }

    // Original positive lists, kept for the rescue pass.
    let originals: Vec<Vec<PositivePoint>> =
        assigned.iter().map(|a| a.positives.clone()).collect();

    // Ownership claims per point.
    let mut claims: BTreeMap<PointId, Vec<usize>> = BTreeMap::new();
    for (idx, a) in assigned.iter().enumerate() {
        for p in &a.positives {
            claims.entry(p.point).or_default().push(idx);
        }
    }

    let mut owner: BTreeMap<PointId, usize> = BTreeMap::new();
    for (&point, claimants) in &claims {
        let &winner = claimants
            .iter()
            .min_by(|&&i, &&j| {
                let li = loss_at(&assigned[i], point);
                let lj = loss_at(&assigned[j], point);
                li.total_cmp(&lj)
                    .then_with(|| assigned[i].instance_id.cmp(&assigned[j].instance_id))
            })
            .expect("claimant list is non-empty");
        owner.insert(point, winner);
        for &loser in claimants.iter().filter(|&&c| c != winner) {
            assigned[loser].positives.retain(|p| p.point != point);
        }
    }

    // Rescue pass for instances emptied by the conflict rule.
    let mut locked: BTreeSet<PointId> = BTreeSet::new();
    let mut rescued: BTreeSet<u32> = BTreeSet::new();
    let mut queue: VecDeque<usize> = {
        let mut empty: Vec<usize> = (0..assigned.len())
            .filter(|&i| assigned[i].positives.is_empty())
            .collect();
        empty.sort_by_key(|&i| assigned[i].instance_id);
        empty.into_iter().collect()
    };
    while let Some(i) = queue.pop_front() {
        let id = assigned[i].instance_id;
        if !assigned[i].positives.is_empty() || rescued.contains(&id) {
            continue;
        }
        rescued.insert(id);
        let best = originals[i]
            .iter()
            .filter(|p| !locked.contains(&p.point))
            .min_by(|a, b| {
                a.score
                    .total_cmp(&b.score)
                    .then_with(|| a.point.cmp(&b.point))
            })
            .copied();
        let Some(best) = best else {
            unassigned.push(id);
            continue;
        };
        locked.insert(best.point);
        if let Some(&prev) = owner.get(&best.point) {
            if prev != i {
                assigned[prev].positives.retain(|p| p.point != best.point);
                if assigned[prev].positives.is_empty()
                    && !rescued.contains(&assigned[prev].instance_id)
                {
                    queue.push_back(prev);
                }
            }
        }
        owner.insert(best.point, i);
        assigned[i].positives.push(best);
    }

    // Drop any instance that still ended up empty (pathological overlap).
    let mut instances = Vec::with_capacity(assigned.len());
    for a in assigned {
        if a.positives.is_empty() {
            if !unassigned.contains(&a.instance_id) {
                unassigned.push(a.instance_id);
            }
        } else {
            instances.push(a);
        }
    }
    unassigned.sort_unstable();
    Ok(Assignment {
        instances,
        unassigned,
    })
}

fn loss_at(a: &InstanceAssignment, point: PointId) -> f64 {
    a.positives
        .iter()
        .find(|p| p.point == point)
        .map(|p| p.loss.sum())
        .unwrap_or(f64::INFINITY)
}

/// Collapses multi-anchor losses to one anchor per point: the anchor with the
/// smallest combined loss wins, ties going to the lowest anchor index.
pub fn reduce_anchors(per_point: &[Vec<LossPair>]) -> Result<Vec<(usize, LossPair)>> {
    let Some(first) = per_point.first() else {
        return Ok(Vec::new());
    };
    let anchor_count = first.len();
    if anchor_count == 0 {
        return Err(Error::Contract("empty anchor list".into()));
    }
    per_point
        .iter()
        .map(|anchors| {
            if anchors.len() != anchor_count {
                return Err(Error::Contract(format!(
                    "anchor count varies across points: {} vs {}",
                    anchors.len(),
                    anchor_count
                )));
            }
            let idx = anchors
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| a.sum().total_cmp(&b.sum()))
                .map(|(i, _)| i)
                .expect("anchor list is non-empty");
            Ok((idx, anchors[idx]))
        })
        .collect()
}
