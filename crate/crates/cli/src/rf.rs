//! `rf`: receptive-field table for a convolution stack.

use anyhow::{bail, Context, Result};
use aps_core::{deformed_rf_bound, ConvSpec, RfState};

/// Parses `k,s,p[,offset]` layer descriptions separated by `;`.
pub fn parse_stack(text: &str) -> Result<Vec<ConvSpec>> {
    let mut out = Vec::new();
    for (i, token) in text.split(';').enumerate() {
        let token = token.trim();
        if token.is_empty() {
            bail!("layer {}: empty layer description", i + 1);
        }
        let parts: Vec<&str> = token.split(',').map(str::trim).collect();
        if parts.len() < 3 || parts.len() > 4 {
            bail!("layer {} ('{token}'): expected k,s,p or k,s,p,offset", i + 1);
        }
        let num = |what: &str, s: &str| -> Result<u32> {
            s.parse()
                .with_context(|| format!("layer {} ('{token}'): bad {what} '{s}'", i + 1))
        };
        let kernel = num("kernel", parts[0])?;
        let stride = num("stride", parts[1])?;
        let padding = num("padding", parts[2])?;
        let mut spec = ConvSpec::new(kernel, stride, padding)
            .with_context(|| format!("layer {} ('{token}')", i + 1))?;
        if let Some(raw) = parts.get(3) {
            let offset: f64 = raw
                .parse()
                .with_context(|| format!("layer {} ('{token}'): bad offset '{raw}'", i + 1))?;
            spec = spec
                .with_max_offset(offset)
                .with_context(|| format!("layer {} ('{token}')", i + 1))?;
        }
        out.push(spec);
    }
    Ok(out)
}

/// One table row per stack prefix.
pub fn table(stack: &[ConvSpec]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>5} {:>10} {:>10} {:>10} {:>8}\n",
        "layer", "static_rf", "min_rf", "max_rf", "jump"
    ));
    for end in 1..=stack.len() {
        let prefix = &stack[..end];
        let (min, max) = deformed_rf_bound(prefix, RfState::INITIAL);
        out.push_str(&format!(
            "{:>5} {:>10} {:>10} {:>10} {:>8}\n",
            end, min.rf, min.rf, max.rf, min.jump
        ));
    }
    out
}

pub fn run(stack: &str) -> Result<()> {
    let stack = parse_stack(stack)?;
    print!("{}", table(&stack));
    Ok(())
}
