//! Loss-gap / loss-sum diagnostics and assigner comparison over scenario
//! corpora.
//!
//! All means are instance-balanced: a scenario's number is the mean over its
//! instances (with at least one positive) of the per-instance mean, and a
//! corpus number is the mean over scenarios. Instances or scenarios without
//! positives are reported as absent rather than as zero.

use rayon::prelude::*;
use serde::Serialize;

use crate::assigner;
use crate::baseline::{all_in_box_assign, center_sampling_assign, CenterBaselineConfig};
use crate::error::{Error, Result};
use crate::geometry::PointId;
use crate::losses::LossField;
use crate::scenario::ScenarioConfig;

/// Mean absolute loss gap `|cls - reg|` over a positive set.
pub fn loss_gap(positives: &[PointId], field: &LossField) -> Result<f64> {
    mean_over_positives(positives, field, |l| l.gap())
}

/// Mean combined loss `cls + reg` over a positive set.
pub fn loss_sum(positives: &[PointId], field: &LossField) -> Result<f64> {
    mean_over_positives(positives, field, |l| l.sum())
}

fn mean_over_positives(
    positives: &[PointId],
    field: &LossField,
    f: impl Fn(&crate::losses::LossPair) -> f64,
) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::EmptyPositives);
    }
    let mut total = 0.0;
    for p in positives {
        let loss = field.loss_at(*p).ok_or_else(|| {
            Error::Contract(format!(
                "positive {p:?} not present in the loss field of instance {}",
                field.instance_id()
            ))
        })?;
        total += f(&loss);
    }
    Ok(total / positives.len() as f64)
}

/// The assigners the comparison can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignerKind {
    Aps,
    Center,
    AllInBox,
}

impl AssignerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssignerKind::Aps => "aps",
            AssignerKind::Center => "center",
            AssignerKind::AllInBox => "all-in-box",
        }
    }

    pub const ALL: [AssignerKind; 3] =
        [AssignerKind::Aps, AssignerKind::Center, AssignerKind::AllInBox];
}

impl std::fmt::Display for AssignerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AssignerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aps" => Ok(AssignerKind::Aps),
            "center" => Ok(AssignerKind::Center),
            "all-in-box" => Ok(AssignerKind::AllInBox),
            other => Err(Error::Contract(format!("unknown assigner '{other}'"))),
        }
    }
}

/// One instance's positives from one assigner.
#[derive(Debug, Clone, PartialEq)]
pub struct InstancePositives {
    pub instance_id: u32,
    /// Scale levels backing the assignment: the sampler's chosen levels, the
    /// center baseline's owning level, or every level holding a point.
    pub levels: Vec<usize>,
    pub points: Vec<PointId>,
}

/// Per-instance positives produced by one assigner on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignerRun {
    pub assigner: AssignerKind,
    /// In scenario instance order; instances the assigner could not serve are
    /// absent.
    pub positives: Vec<InstancePositives>,
    pub unassigned: Vec<u32>,
}

/// Runs one assigner over a scenario's loss fields.
pub fn run_assigner(
    kind: AssignerKind,
    cfg: &ScenarioConfig,
    fields: &[LossField],
    k: usize,
) -> Result<AssignerRun> {
    let grid = cfg.grid()?;
    match kind {
        AssignerKind::Aps => {
            let assignment = assigner::assign_image(fields, k)?;
            Ok(AssignerRun {
                assigner: kind,
                positives: assignment
                    .instances
                    .iter()
                    .map(|a| InstancePositives {
                        instance_id: a.instance_id,
                        levels: a.chosen_levels.clone(),
                        points: a.positives.iter().map(|p| p.point).collect(),
                    })
                    .collect(),
                unassigned: assignment.unassigned,
            })
        }
        AssignerKind::Center => {
            let baseline = CenterBaselineConfig::default_for_levels(grid.levels().len());
            let mut positives = Vec::new();
            let mut unassigned = Vec::new();
            for inst in &cfg.instances {
                let got = center_sampling_assign(&inst.bbox()?, &grid, &baseline)?;
                if got.positives.is_empty() {
                    unassigned.push(inst.id);
                } else {
                    positives.push(InstancePositives {
                        instance_id: inst.id,
                        levels: got.level.into_iter().collect(),
                        points: got.positives,
                    });
                }
            }
            Ok(AssignerRun {
                assigner: kind,
                positives,
                unassigned,
            })
        }
        AssignerKind::AllInBox => {
            let mut positives = Vec::new();
            let mut unassigned = Vec::new();
            for inst in &cfg.instances {
                let pts = all_in_box_assign(&inst.bbox()?, &grid)?;
                if pts.is_empty() {
                    unassigned.push(inst.id);
                } else {
                    let mut levels: Vec<usize> = pts.iter().map(|p| p.level).collect();
                    levels.sort_unstable();
                    levels.dedup();
                    positives.push(InstancePositives {
                        instance_id: inst.id,
                        levels,
                        points: pts,
                    });
                }
            }
            Ok(AssignerRun {
                assigner: kind,
                positives,
                unassigned,
            })
        }
    }
}

/// Per-instance metric breakdown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceMetrics {
    pub instance_id: u32,
    pub positive_count: usize,
    pub loss_gap: f64,
    pub loss_sum: f64,
}

/// One assigner's metrics on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioAssignerMetrics {
    pub assigner: String,
    /// Instance-balanced means; absent when no instance had positives.
    pub mean_loss_gap: Option<f64>,
    pub mean_loss_sum: Option<f64>,
    pub positive_count: usize,
    pub unassigned: Vec<u32>,
    /// Present when the assigner failed outright on this scenario.
    pub error: Option<String>,
    pub instances: Vec<InstanceMetrics>,
}

/// One corpus scenario's results across assigners.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRow {
    pub scenario: String,
    pub per_assigner: Vec<ScenarioAssignerMetrics>,
    /// Mean over the sampler's instances of the cheapest candidate's combined
    /// loss: the best mean loss sum any positive choice from the same pools
    /// could reach.
    pub aps_min_achievable_loss_sum: Option<f64>,
}

/// Corpus-level summary for one assigner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignerSummary {
    pub assigner: String,
    pub scenarios_evaluated: usize,
    pub positive_count: usize,
    pub mean_loss_gap: Option<f64>,
    pub mean_loss_sum: Option<f64>,
    pub failures: Vec<ScenarioFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioFailure {
    pub scenario: String,
    pub error: String,
}

/// Win-rate of the sampler against one baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WinRate {
    pub baseline: String,
    /// Scenarios where both sides produced a mean loss gap.
    pub comparable: usize,
    /// Fraction of comparable scenarios where the sampler's gap is strictly
    /// lower.
    pub aps_win_rate: f64,
}

/// Full comparison report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub k: usize,
    pub scenario_count: usize,
    pub assigners: Vec<AssignerSummary>,
    pub win_rates: Vec<WinRate>,
    pub scenarios: Vec<ScenarioRow>,
}

fn evaluate_run(fields: &[LossField], run: &AssignerRun) -> ScenarioAssignerMetrics {
    let mut instances = Vec::new();
    for entry in &run.positives {
        let Some(field) = fields.iter().find(|f| f.instance_id() == entry.instance_id) else {
            continue;
        };
        if entry.points.is_empty() {
            continue;
        }
        let gap = loss_gap(&entry.points, field).expect("non-empty positives");
        let sum = loss_sum(&entry.points, field).expect("non-empty positives");
        instances.push(InstanceMetrics {
            instance_id: entry.instance_id,
            positive_count: entry.points.len(),
            loss_gap: gap,
            loss_sum: sum,
        });
    }
    let n = instances.len();
    let (mean_gap, mean_sum) = if n == 0 {
        (None, None)
    } else {
        (
            Some(instances.iter().map(|m| m.loss_gap).sum::<f64>() / n as f64),
            Some(instances.iter().map(|m| m.loss_sum).sum::<f64>() / n as f64),
        )
    };
    ScenarioAssignerMetrics {
        assigner: run.assigner.as_str().to_string(),
        mean_loss_gap: mean_gap,
        mean_loss_sum: mean_sum,
        positive_count: instances.iter().map(|m| m.positive_count).sum(),
        unassigned: run.unassigned.clone(),
        error: None,
        instances,
    }
}

fn evaluate_scenario(
    name: &str,
    cfg: &ScenarioConfig,
    assigners: &[AssignerKind],
    k: usize,
) -> ScenarioRow {
    let (_, fields) = match cfg.loss_fields() {
        Ok(v) => v,
        Err(e) => {
            return ScenarioRow {
                scenario: name.to_string(),
                per_assigner: assigners
                    .iter()
                    .map(|a| ScenarioAssignerMetrics {
                        assigner: a.as_str().to_string(),
                        mean_loss_gap: None,
                        mean_loss_sum: None,
                        positive_count: 0,
                        unassigned: Vec::new(),
                        error: Some(e.to_string()),
                        instances: Vec::new(),
                    })
                    .collect(),
                aps_min_achievable_loss_sum: None,
            };
        }
    };

    let mut per_assigner = Vec::with_capacity(assigners.len());
    let mut min_achievable = None;
    for &kind in assigners {
        match run_assigner(kind, cfg, &fields, k) {
            Ok(run) => {
                per_assigner.push(evaluate_run(&fields, &run));
                if kind == AssignerKind::Aps {
                    min_achievable = aps_min_achievable(&fields, k);
                }
            }
            Err(e) => per_assigner.push(ScenarioAssignerMetrics {
                assigner: kind.as_str().to_string(),
                mean_loss_gap: None,
                mean_loss_sum: None,
                positive_count: 0,
                unassigned: Vec::new(),
                error: Some(e.to_string()),
                instances: Vec::new(),
            }),
        }
    }
    ScenarioRow {
        scenario: name.to_string(),
        per_assigner,
        aps_min_achievable_loss_sum: min_achievable,
    }
}

/// Mean over instances of the cheapest combined loss in the sampler's own
/// candidate pool.
fn aps_min_achievable(fields: &[LossField], k: usize) -> Option<f64> {
    let mut mins = Vec::new();
    for field in fields {
        let Ok(set) = assigner::build_candidate_set(field, k) else {
            continue;
        };
        let best = set
            .candidates
            .iter()
            .map(|(_, l)| l.sum())
            .fold(f64::INFINITY, f64::min);
        if best.is_finite() {
            mins.push(best);
        }
    }
    if mins.is_empty() {
        None
    } else {
        Some(mins.iter().sum::<f64>() / mins.len() as f64)
    }
}

/// Runs every assigner on every scenario and aggregates.
///
/// Scenarios evaluate in parallel (bounded by the active rayon pool) but the
/// report is a deterministic ordered reduction over the corpus order.
pub fn compare_assigners(
    corpus: &[(String, ScenarioConfig)],
    assigners: &[AssignerKind],
    k: usize,
) -> Result<ComparisonReport> {
    if corpus.is_empty() {
        return Err(Error::Contract("corpus must contain at least one scenario".into()));
    }
    if assigners.is_empty() {
        return Err(Error::Contract("at least one assigner required".into()));
    }
    let scenarios: Vec<ScenarioRow> = corpus
        .par_iter()
        .map(|(name, cfg)| evaluate_scenario(name, cfg, assigners, k))
        .collect();

    let mut summaries = Vec::with_capacity(assigners.len());
    for (ai, kind) in assigners.iter().enumerate() {
        // Keyed by scenario name and sorted before reduction, so the
        // floating-point sums cannot depend on corpus order.
        let mut measured: Vec<(&str, f64, f64)> = Vec::new();
        let mut positives = 0;
        let mut failures = Vec::new();
        for row in &scenarios {
            let m = &row.per_assigner[ai];
            if let Some(err) = &m.error {
                failures.push(ScenarioFailure {
                    scenario: row.scenario.clone(),
                    error: err.clone(),
                });
                continue;
            }
            positives += m.positive_count;
            if let (Some(g), Some(s)) = (m.mean_loss_gap, m.mean_loss_sum) {
                measured.push((&row.scenario, g, s));
            }
        }
        measured.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)));
        failures.sort_by(|a, b| a.scenario.cmp(&b.scenario));
        let gaps: Vec<f64> = measured.iter().map(|m| m.1).collect();
        let sums: Vec<f64> = measured.iter().map(|m| m.2).collect();
        summaries.push(AssignerSummary {
            assigner: kind.as_str().to_string(),
            scenarios_evaluated: scenarios.len() - failures.len(),
            positive_count: positives,
            mean_loss_gap: mean_of(&gaps),
            mean_loss_sum: mean_of(&sums),
            failures,
        });
    }

    let mut win_rates = Vec::new();
    if let Some(aps_idx) = assigners.iter().position(|a| *a == AssignerKind::Aps) {
        for (bi, kind) in assigners.iter().enumerate() {
            if bi == aps_idx {
                continue;
            }
            let mut comparable = 0;
            let mut wins = 0;
            for row in &scenarios {
                let aps = row.per_assigner[aps_idx].mean_loss_gap;
                let base = row.per_assigner[bi].mean_loss_gap;
                if let (Some(a), Some(b)) = (aps, base) {
                    comparable += 1;
                    if a < b {
                        wins += 1;
                    }
                }
            }
            win_rates.push(WinRate {
                baseline: kind.as_str().to_string(),
                comparable,
                aps_win_rate: if comparable == 0 {
                    0.0
                } else {
                    wins as f64 / comparable as f64
                },
            });
        }
    }

    Ok(ComparisonReport {
        k,
        scenario_count: corpus.len(),
        assigners: summaries,
        win_rates,
        scenarios,
    })
}

fn mean_of(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

impl ComparisonReport {
    /// Fixed-width text table of the corpus aggregates.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>10} {:>10} {:>14} {:>14} {:>9}\n",
            "assigner", "scenarios", "positives", "mean_loss_gap", "mean_loss_sum", "failures"
        ));
        let fmt_opt = |v: Option<f64>| match v {
            Some(v) => format!("{v:.6}"),
            None => "-".to_string(),
        };
        for s in &self.assigners {
            out.push_str(&format!(
                "{:<12} {:>10} {:>10} {:>14} {:>14} {:>9}\n",
                s.assigner,
                s.scenarios_evaluated,
                s.positive_count,
                fmt_opt(s.mean_loss_gap),
                fmt_opt(s.mean_loss_sum),
                s.failures.len(),
            ));
        }
        for w in &self.win_rates {
            out.push_str(&format!(
                "aps loss_gap win rate vs {:<12} {:.3} over {} comparable scenarios\n",
                w.baseline, w.aps_win_rate, w.comparable
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assigner::DEFAULT_TOP_K;
    use crate::geometry::{BBox, LevelSpec, PyramidGrid};
    use crate::losses::LossPair;
    use crate::scenario::{generate, Preset};

    fn toy_field(losses: &[(f64, f64)]) -> LossField {
        let grid = PyramidGrid::new(
            vec![LevelSpec {
                level_index: 0,
                stride: 8,
                grid_w: 8,
                grid_h: 8,
            }],
            64,
            64,
        )
        .unwrap();
        let bbox = BBox::new(0.0, 0.0, 8.0 * losses.len() as f64, 8.0).unwrap();
        let mut it = losses.iter();
        LossField::from_fn(&grid, &bbox, 0, |_, _| {
            let &(c, r) = it.next().unwrap();
            Ok(LossPair::new(c, r))
        })
        .unwrap()
    }

    #[test]
    fn loss_gap_means() {
        let field = toy_field(&[(0.3, 0.2), (0.1, 0.4)]);
        let pts: Vec<PointId> = field.iter().map(|(p, _)| p).collect();
        assert!((loss_gap(&pts, &field).unwrap() - 0.2).abs() < 1e-12);

        let field = toy_field(&[(0.25, 0.25), (0.4, 0.4)]);
        let pts: Vec<PointId> = field.iter().map(|(p, _)| p).collect();
        assert_eq!(loss_gap(&pts, &field).unwrap(), 0.0);

        let field = toy_field(&[(0.5, 0.5), (0.75, 0.25), (1.2, 0.2)]);
        let pts: Vec<PointId> = field.iter().map(|(p, _)| p).collect();
        assert!((loss_gap(&pts, &field).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn loss_sum_means() {
        let field = toy_field(&[(0.1, 0.2), (0.3, 0.4)]);
        let pts: Vec<PointId> = field.iter().map(|(p, _)| p).collect();
        assert!((loss_sum(&pts, &field).unwrap() - 0.5).abs() < 1e-12);

        let field = toy_field(&[(0.0, 0.0)]);
        let pts: Vec<PointId> = field.iter().map(|(p, _)| p).collect();
        assert_eq!(loss_sum(&pts, &field).unwrap(), 0.0);

        let field = toy_field(&[(0.2, 0.3)]);
        let pts: Vec<PointId> = field.iter().map(|(p, _)| p).collect();
        assert!((loss_sum(&pts, &field).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_positives_are_an_error() {
        let field = toy_field(&[(0.1, 0.2)]);
        assert_eq!(loss_gap(&[], &field), Err(Error::EmptyPositives));
    }

    #[test]
    fn gap_never_exceeds_sum() {
        let field = toy_field(&[(0.9, 0.1), (0.0, 0.7), (0.4, 0.4)]);
        let pts: Vec<PointId> = field.iter().map(|(p, _)| p).collect();
        assert!(loss_gap(&pts, &field).unwrap() <= loss_sum(&pts, &field).unwrap());
    }

    #[test]
    fn report_is_invariant_to_corpus_order() {
        let corpus: Vec<(String, ScenarioConfig)> = (0..6)
            .map(|s| (format!("s{s}"), generate(Preset::Random, s, 2).unwrap()))
            .collect();
        let mut reversed = corpus.clone();
        reversed.reverse();
        let a = compare_assigners(&corpus, &AssignerKind::ALL, DEFAULT_TOP_K).unwrap();
        let b = compare_assigners(&reversed, &AssignerKind::ALL, DEFAULT_TOP_K).unwrap();
        assert_eq!(a.assigners, b.assigners);
        assert_eq!(a.win_rates, b.win_rates);
    }

    #[test]
    fn single_scenario_report_reduces_to_its_metrics() {
        let corpus = vec![(
            "only".to_string(),
            generate(Preset::Misaligned, 5, 2).unwrap(),
        )];
        let report = compare_assigners(&corpus, &AssignerKind::ALL, DEFAULT_TOP_K).unwrap();
        assert_eq!(report.scenario_count, 1);
        for (summary, row) in report.assigners.iter().zip(&report.scenarios[0].per_assigner) {
            assert_eq!(summary.mean_loss_gap, row.mean_loss_gap);
            assert_eq!(summary.mean_loss_sum, row.mean_loss_sum);
            assert_eq!(summary.positive_count, row.positive_count);
        }
    }

    #[test]
    fn misaligned_corpus_shows_the_alignment_advantage() {
        let corpus: Vec<(String, ScenarioConfig)> = (0..25)
            .map(|s| (format!("m{s}"), generate(Preset::Misaligned, s, 3).unwrap()))
            .collect();
        let report =
            compare_assigners(&corpus, &[AssignerKind::Aps, AssignerKind::Center], DEFAULT_TOP_K)
                .unwrap();
        let win = &report.win_rates[0];
        assert!(
            win.aps_win_rate >= 0.9,
            "expected a win rate of at least 0.9, got {}",
            win.aps_win_rate
        );
    }

    #[test]
    fn aligned_corpus_shows_no_meaningful_difference() {
        let corpus: Vec<(String, ScenarioConfig)> = (0..25)
            .map(|s| (format!("a{s}"), generate(Preset::Aligned, s, 3).unwrap()))
            .collect();
        let report =
            compare_assigners(&corpus, &[AssignerKind::Aps, AssignerKind::Center], DEFAULT_TOP_K)
                .unwrap();
        let aps = report.assigners[0].mean_loss_gap.unwrap();
        let center = report.assigners[1].mean_loss_gap.unwrap();
        let rel = (aps - center).abs() / center.max(aps);
        assert!(
            rel <= 0.10,
            "aligned corpora should agree within 10%: aps {aps}, center {center}"
        );
    }
}
