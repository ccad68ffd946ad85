//! Run configuration, group loading and provenance headers.

use crate::ValidationError;
use anyhow::{Context, Result};
use bsgrowth::bsmap::OrientationChoice;
use bsgrowth::builtins::{self, BUILTIN_NAMES};
use bsgrowth::GroupSpec;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Built-in name or path to a JSON group spec.
    pub group: String,
    /// Largest cell-path length for the transfer matrix.
    pub depth: usize,
    /// Word length for the Poincaré series check.
    pub poincare_depth: usize,
    pub betas: Option<Vec<f64>>,
    pub alphas: Option<Vec<f64>>,
    /// Deviation interval `J` of the LDP experiment.
    pub interval: Option<(f64, f64)>,
    pub samples: usize,
    /// Random geodesics used by the parallel check in a report.
    pub geodesics: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub orientation: OrientationChoice,
    pub skip_even_corner_gate: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            group: "schottky-rank2".into(),
            depth: 12,
            poincare_depth: 10,
            betas: None,
            alphas: None,
            interval: None,
            samples: 1_000_000,
            geodesics: 200,
            seed: 1,
            out: PathBuf::from("out"),
            orientation: OrientationChoice::Auto,
            skip_even_corner_gate: false,
        }
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<(), ValidationError> {
    if grid.len() < 3 {
        return Err(ValidationError(format!("{name} needs at least three points")));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(ValidationError(format!("{name} has a non-finite entry")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ValidationError(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if !(2..=30).contains(&self.depth) {
            return Err(ValidationError(format!("depth {} is outside 2..=30", self.depth)));
        }
        if !(1..=16).contains(&self.poincare_depth) {
            return Err(ValidationError(format!(
                "Poincaré depth {} is outside 1..=16",
                self.poincare_depth
            )));
        }
        if let Some(b) = &self.betas {
            check_grid("beta grid", b)?;
        }
        if let Some(a) = &self.alphas {
            if a.iter().any(|&x| x <= 0.0) {
                return Err(ValidationError("alpha grid must be positive".into()));
            }
            if a.is_empty() || a.windows(2).any(|w| w[1] <= w[0]) || a.iter().any(|x| !x.is_finite()) {
                return Err(ValidationError("alpha grid must be finite and strictly increasing".into()));
            }
        }
        if let Some((a, b)) = self.interval {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(ValidationError(format!("interval [{a}, {b}] is empty")));
            }
        }
        if self.samples == 0 {
            return Err(ValidationError("samples must be positive".into()));
        }
        Ok(())
    }

    /// Canonical JSON echo of the configuration. The output directory is left out so that
    /// identical runs written to different places produce identical files.
    pub fn to_json(&self) -> String {
        json!({
            "group": self.group,
            "depth": self.depth,
            "poincare_depth": self.poincare_depth,
            "beta": self.betas,
            "alpha_grid": self.alphas,
            "interval": self.interval.map(|(a, b)| [a, b]),
            "samples": self.samples,
            "geodesics": self.geodesics,
            "seed": self.seed,
            "orientation": self.orientation,
            "skip_even_corner_gate": self.skip_even_corner_gate,
        })
        .to_string()
    }
}

/// Loads a built-in by name, or a JSON spec from disk.
pub fn load_spec(source: &str) -> Result<GroupSpec> {
    if let Some(s) = builtins::builtin(source) {
        return Ok(s);
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(ValidationError(format!(
            "'{source}' is neither a built-in ({}) nor an existing file",
            BUILTIN_NAMES.join(", ")
        ))
        .into());
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {source}"))?;
    Ok(GroupSpec::from_json(&text)?)
}

/// Git-style content hash (`blob <len>\0<bytes>`) of the canonical spec JSON, with SHA-256.
pub fn spec_hash(spec: &GroupSpec) -> String {
    let body = spec.to_json();
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Comment lines placed at the top of every output file.
pub fn header(config: &RunConfig, spec: &GroupSpec, kind: &str, extra: &[(&str, String)]) -> String {
    let mut s = format!(
        "# bsgrowth {} {kind}\n# config: {}\n# group: {} sha256:{}\n",
        env!("CARGO_PKG_VERSION"),
        config.to_json(),
        spec.name,
        spec_hash(spec)
    );
    for (k, v) in extra {
        s.push_str(&format!("# {k}: {v}\n"));
    }
    s
}
