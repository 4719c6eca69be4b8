//! `render`: per-level PGM heatmaps of loss surfaces or assignment results.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{Context, Result};
use aps_core::report::run_assigner;
use aps_core::{AssignerKind, LossField, PointId, PyramidGrid};

use crate::assign::load_scenario;
use crate::pgm::{quantize, write_pgm};
use crate::RenderWhat;

/// Per-cell loss values for one level. A cell covered by several instances
/// takes the pair of the instance with the smallest combined loss there.
fn level_values(
    grid: &PyramidGrid,
    fields: &[LossField],
    level: usize,
    what: RenderWhat,
) -> Vec<Option<f64>> {
    let spec = grid.level(level).expect("level exists");
    let w = spec.grid_w as usize;
    let mut cells: Vec<Option<(f64, f64)>> = vec![None; w * spec.grid_h as usize];
    for field in fields {
        for (p, loss) in field.level_entries(level).unwrap_or(&[]).iter() {
            let idx = p.cell_y as usize * w + p.cell_x as usize;
            let keep = match cells[idx] {
                Some((c, r)) => loss.sum() < c + r,
                None => true,
            };
            if keep {
                cells[idx] = Some((loss.cls, loss.reg));
            }
        }
    }
    cells
        .into_iter()
        .map(|pair| {
            pair.map(|(c, r)| match what {
                RenderWhat::Cls => c,
                RenderWhat::Reg => r,
                RenderWhat::Gap => (c - r).abs(),
                RenderWhat::Assignment => unreachable!("assignment rendered separately"),
            })
        })
        .collect()
}

fn assignment_pixels(grid: &PyramidGrid, positives: &BTreeSet<PointId>, level: usize) -> Vec<u8> {
    let spec = grid.level(level).expect("level exists");
    let w = spec.grid_w as usize;
    let mut pixels = vec![0u8; w * spec.grid_h as usize];
    for p in positives.iter().filter(|p| p.level == level) {
        pixels[p.cell_y as usize * w + p.cell_x as usize] = 255;
    }
    pixels
}

pub fn run(
    scenario: &Path,
    what: RenderWhat,
    assigner: AssignerKind,
    k: usize,
    out: &Path,
) -> Result<()> {
    let cfg = load_scenario(scenario)?;
    let (grid, fields) = cfg.loss_fields()?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;

    let positives: BTreeSet<PointId> = if matches!(what, RenderWhat::Assignment) {
        run_assigner(assigner, &cfg, &fields, k)?
            .positives
            .iter()
            .flat_map(|entry| entry.points.iter().copied())
            .collect()
    } else {
        BTreeSet::new()
    };

    for spec in grid.levels() {
        let level = spec.level_index;
        let pixels = match what {
            RenderWhat::Assignment => assignment_pixels(&grid, &positives, level),
            _ => quantize(&level_values(&grid, &fields, level, what)),
        };
        let name = match what {
            RenderWhat::Cls => "cls",
            RenderWhat::Reg => "reg",
            RenderWhat::Gap => "gap",
            RenderWhat::Assignment => "assignment",
        };
        let path = out.join(format!("{name}_level{level}.pgm"));
        write_pgm(&path, spec.grid_w, spec.grid_h, &pixels)?;
    }
    Ok(())
}
