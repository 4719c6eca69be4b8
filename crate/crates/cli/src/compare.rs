//! `compare`: evaluate every assigner over a scenario corpus.

use std::path::Path;

use anyhow::{bail, Context, Result};
use aps_core::report::compare_assigners;
use aps_core::{AssignerKind, ScenarioConfig};

use crate::assign::load_scenario;

fn load_corpus(dir: &Path) -> Result<Vec<(String, ScenarioConfig)>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading corpus directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no scenario files (*.json) in {}", dir.display());
    }
    paths
        .into_iter()
        .map(|p| {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, load_scenario(&p)?))
        })
        .collect()
}

pub fn run(corpus: &Path, k: usize, json_out: Option<&Path>) -> Result<()> {
    let corpus = load_corpus(corpus)?;
    let report = compare_assigners(&corpus, &AssignerKind::ALL, k)?;
    print!("{}", report.text_table());
    let mut json = serde_json::to_string_pretty(&report).context("serializing report")?;
    json.push('\n');
    if let Some(path) = json_out {
        std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    } else {
        print!("{json}");
    }
    Ok(())
}
