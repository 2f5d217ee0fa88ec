//! Embedded experiment presets, one JSON document per figure.

use crate::config::{parse_config, ExperimentConfig};
use crate::error::{CliError, CliResult};

pub const PRESETS: &[(&str, &str)] = &[
    ("fig1", include_str!("../presets/fig1.json")),
    ("fig2", include_str!("../presets/fig2.json")),
    ("fig3a", include_str!("../presets/fig3a.json")),
    ("fig3b", include_str!("../presets/fig3b.json")),
    ("fig3c", include_str!("../presets/fig3c.json")),
    ("fig5", include_str!("../presets/fig5.json")),
    ("fig6", include_str!("../presets/fig6.json")),
    ("fig7", include_str!("../presets/fig7.json")),
    ("fig9", include_str!("../presets/fig9.json")),
    ("fig10", include_str!("../presets/fig10.json")),
    ("fig11", include_str!("../presets/fig11.json")),
    ("fig13", include_str!("../presets/fig13.json")),
    ("rkhs-speedup", include_str!("../presets/rkhs-speedup.json")),
];

/// Alternative names accepted by [`preset`].
pub const ALIASES: &[(&str, &str)] = &[("fig3-variance", "fig3a"), ("fig9-epochwise", "fig9")];

pub fn preset(name: &str) -> CliResult<ExperimentConfig> {
    let canonical = ALIASES.iter().find(|a| a.0 == name).map_or(name, |a| a.1);
    match PRESETS.iter().find(|p| p.0 == canonical) {
        Some((_, text)) => parse_config(text),
        None => Err(CliError::UnknownExperiment { name: name.to_string(), suggestion: suggest(name) }),
    }
}

/// Closest preset or alias name, if any is reasonably similar.
pub fn suggest(name: &str) -> Option<String> {
    PRESETS
        .iter()
        .map(|p| p.0)
        .chain(ALIASES.iter().map(|a| a.0))
        .map(|c| (strsim::normalized_damerau_levenshtein(name, c), c))
        .filter(|(score, _)| *score >= 0.4)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.to_string())
}

/// `(name, description)` for every preset.
pub fn list_experiments() -> Vec<(String, String)> {
    PRESETS
        .iter()
        .map(|(name, _)| {
            let cfg = preset(name).expect("embedded presets are valid");
            (name.to_string(), cfg.description)
        })
        .collect()
}
