//! Bundled instance presets and the acceptance coverage matrix.

use crate::config::{parse_config, validate, ExperimentConfig};
use crate::CliError;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Acceptance criteria (1–12) the preset exercises.
    pub criteria: &'static [u8],
    pub toml: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "random-audit",
        description: "random symbolic instances: RPF residuals and rates, pressure jets, cocycle oracle",
        criteria: &[1, 2, 3, 4, 12],
        toml: include_str!("../presets/random-audit.toml"),
    },
    Preset {
        name: "scalar-iid",
        description: "fair coin base, u = ±1 simple random walk; CLT at n = 10^4",
        criteria: &[5, 6, 12],
        toml: include_str!("../presets/scalar-iid.toml"),
    },
    Preset {
        name: "span-2-counterexample",
        description: "u = ±1 on an odd lattice; lattice check and LLT must refuse it",
        criteria: &[7, 12],
        toml: include_str!("../presets/span-2-counterexample.toml"),
    },
    Preset {
        name: "two-state-base-lattice",
        description: "two-state base, depth-2 fibers, {0,1}-valued u; CLT, LLT, cf identity, decay surveys",
        criteria: &[5, 6, 7, 9, 12],
        toml: include_str!("../presets/two-state-base-lattice.toml"),
    },
    Preset {
        name: "coboundary-degenerate",
        description: "base coboundary observable; every limit runner takes the degenerate path",
        criteria: &[10, 12],
        toml: include_str!("../presets/coboundary-degenerate.toml"),
    },
    Preset {
        name: "renewal-γ-3/2",
        description: "steps 1 or 2 with mean γ = 3/2; truncated renewal sums at N = 200",
        criteria: &[8, 12],
        toml: include_str!("../presets/renewal-gamma-3-2.toml"),
    },
    Preset {
        name: "doeblin-iid",
        description: "iid choice of two Doeblin kernels; cf identity, CLT, LLT, renewal, order check",
        criteria: &[11, 12],
        toml: include_str!("../presets/doeblin-iid.toml"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

impl Preset {
    pub fn config(&self) -> Result<ExperimentConfig, CliError> {
        let cfg = parse_config(self.toml, false)?;
        validate(&cfg)?;
        Ok(cfg)
    }
}

/// One line per preset followed by the criterion coverage matrix.
pub fn catalog() -> String {
    let width = PRESETS.iter().map(|p| p.name.chars().count()).max().unwrap_or(0);
    let mut s = String::new();
    for p in PRESETS {
        s.push_str(&format!("{:<width$}  {}\n", p.name, p.description));
    }
    s.push_str("\ncoverage\n");
    s.push_str(&format!("{:<width$}", ""));
    for c in 1..=12 {
        s.push_str(&format!(" {c:>2}"));
    }
    s.push('\n');
    for p in PRESETS {
        s.push_str(&format!("{:<width$}", p.name));
        for c in 1..=12u8 {
            s.push_str(if p.criteria.contains(&c) { "  x" } else { "  ." });
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for p in PRESETS {
            p.config().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }

    #[test]
    fn catalog_covers_all_criteria() {
        for c in 1..=12u8 {
            assert!(PRESETS.iter().any(|p| p.criteria.contains(&c)), "criterion {c}");
        }
        let text = catalog();
        assert!(text.contains("span-2-counterexample") && text.contains("renewal-γ-3/2"));
    }
}
