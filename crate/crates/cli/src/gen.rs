//! `gen`: write a preset scenario to disk.

use std::path::Path;

use anyhow::{Context, Result};
use aps_core::scenario::generate;
use aps_core::Preset;

pub fn run(out: &Path, seed: u64, preset: Preset, instances: usize) -> Result<()> {
    let cfg = generate(preset, seed, instances)?;
    let mut text = serde_json::to_string_pretty(&cfg).context("serializing scenario")?;
    text.push('\n');
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
