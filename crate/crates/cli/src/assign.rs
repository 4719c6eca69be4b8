//! `assign`: run one assigner on a scenario and write the result as JSON.

use std::path::Path;

use anyhow::{Context, Result};
use aps_core::report::{run_assigner, AssignerRun};
use aps_core::{AssignerKind, PointId, PyramidGrid, ScenarioConfig};
use serde::Serialize;

#[derive(Serialize)]
pub struct AssignmentDoc {
    pub instances: Vec<InstanceDoc>,
    pub unassigned: Vec<u32>,
}

#[derive(Serialize)]
pub struct InstanceDoc {
    pub id: u32,
    pub levels: Vec<usize>,
    pub positives: Vec<PositiveDoc>,
}

/// One positive point, identified by its level and image-plane anchor
/// coordinates (the half-stride cell center).
#[derive(Serialize)]
pub struct PositiveDoc {
    pub level: usize,
    pub x: f64,
    pub y: f64,
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: ScenarioConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn to_doc(grid: &PyramidGrid, run: &AssignerRun) -> Result<AssignmentDoc> {
    let mut instances = Vec::with_capacity(run.positives.len());
    for entry in &run.positives {
        let mut points: Vec<PointId> = entry.points.clone();
        points.sort_by_key(|p| (p.level, p.cell_y, p.cell_x));
        let positives = points
            .iter()
            .map(|&p| {
                let (x, y) = grid.point_center(p)?;
                Ok(PositiveDoc {
                    level: p.level,
                    x,
                    y,
                })
            })
            .collect::<aps_core::Result<Vec<_>>>()?;
        instances.push(InstanceDoc {
            id: entry.instance_id,
            levels: entry.levels.clone(),
            positives,
        });
    }
    instances.sort_by_key(|i| i.id);
    let mut unassigned = run.unassigned.clone();
    unassigned.sort_unstable();
    Ok(AssignmentDoc {
        instances,
        unassigned,
    })
}

pub fn run(scenario: &Path, assigner: AssignerKind, k: usize, out: &Path) -> Result<()> {
    let cfg = load_scenario(scenario)?;
    let (grid, fields) = cfg.loss_fields()?;
    let run = run_assigner(assigner, &cfg, &fields, k)?;
    let doc = to_doc(&grid, &run)?;
    let mut text = serde_json::to_string_pretty(&doc).context("serializing assignment")?;
    text.push('\n');
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
