//! Experiment configuration: parsed from CLI flags or a TOML file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Where the interface segments come from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometrySpec {
    /// Read segments from a text file (`x1 y1 x2 y2` per line, `#` comments).
    File { path: PathBuf },
    /// Random chords through the whole unit square.
    InfiniteChords { count: usize },
    /// Random finite segments of length at most `max_length`.
    FiniteSegments { count: usize, max_length: f64 },
}

/// Interface diffusion coefficient: one constant, or an independent uniform
/// draw per interface segment.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AIfaceSpec {
    Const { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl fmt::Display for AIfaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AIfaceSpec::Const { value } => write!(f, "const:{}", value),
            AIfaceSpec::Uniform { lo, hi } => write!(f, "uniform:{},{}", lo, hi),
        }
    }
}

impl FromStr for AIfaceSpec {
    type Err = String;

    /// Accepts `const:v` or `uniform:a,b`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("expected const:v or uniform:a,b, got {:?}", s))?;
        match kind {
            "const" => {
                let value: f64 = rest.parse().map_err(|e| format!("bad value in {:?}: {}", s, e))?;
                Ok(AIfaceSpec::Const { value })
            }
            "uniform" => {
                let (a, b) = rest
                    .split_once(',')
                    .ok_or_else(|| format!("uniform needs two bounds, got {:?}", s))?;
                let lo: f64 = a.trim().parse().map_err(|e| format!("bad bound in {:?}: {}", s, e))?;
                let hi: f64 = b.trim().parse().map_err(|e| format!("bad bound in {:?}: {}", s, e))?;
                Ok(AIfaceSpec::Uniform { lo, hi })
            }
            _ => Err(format!("unknown coefficient spec kind {:?}", kind)),
        }
    }
}

fn default_a_bulk() -> f64 {
    1.0
}
fn default_a_iface() -> AIfaceSpec {
    AIfaceSpec::Const { value: 1.0 }
}
fn default_b_values() -> Vec<f64> {
    vec![1.0]
}
fn default_h_target() -> f64 {
    0.1
}
fn default_levels() -> usize {
    4
}
fn default_reference_extra() -> usize {
    1
}
fn default_h_coarse() -> Vec<f64> {
    vec![0.125]
}
fn default_rtol() -> f64 {
    1e-8
}

/// Full description of one experiment run. Every random draw (geometry and
/// uniform coefficients) is derived from `seed`, so a fixed config gives
/// bit-identical output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_a_bulk")]
    pub a_bulk: f64,
    #[serde(default = "default_a_iface")]
    pub a_iface: AIfaceSpec,
    /// Robin coupling coefficients to sweep in the iteration study; the
    /// first entry is used by single-solve commands.
    #[serde(default = "default_b_values")]
    pub b_values: Vec<f64>,
    #[serde(default = "default_h_target")]
    pub h_target: f64,
    /// Number of solved refinement levels (0..levels) in the convergence
    /// study.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Extra refinements past the finest solved level for the reference
    /// solution.
    #[serde(default = "default_reference_extra")]
    pub reference_extra: usize,
    /// Coarse mesh sizes H for the two-level preconditioner.
    #[serde(default = "default_h_coarse")]
    pub h_coarse: Vec<f64>,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    /// Also run plain (unpreconditioned) CG in the iteration study.
    #[serde(default)]
    pub unpreconditioned: bool,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), String> {
        match &self.geometry {
            GeometrySpec::InfiniteChords { count } if *count == 0 => {
                return Err("chord count must be positive".into())
            }
            GeometrySpec::FiniteSegments { count, max_length } => {
                if *count == 0 {
                    return Err("segment count must be positive".into());
                }
                if !(*max_length > 0.0) {
                    return Err("max_length must be positive".into());
                }
            }
            _ => {}
        }
        if !(self.a_bulk > 0.0) {
            return Err("a_bulk must be positive".into());
        }
        match self.a_iface {
            AIfaceSpec::Const { value } if !(value > 0.0) => {
                return Err("a_iface must be positive".into())
            }
            AIfaceSpec::Uniform { lo, hi } if !(0.0 < lo && lo <= hi) => {
                return Err("uniform a_iface needs 0 < lo <= hi".into())
            }
            _ => {}
        }
        if self.b_values.is_empty() || self.b_values.iter().any(|b| *b < 0.0) {
            return Err("b_values must be non-empty and non-negative".into());
        }
        if !(self.h_target > 0.0) {
            return Err("h_target must be positive".into());
        }
        if self.levels < 1 {
            return Err("levels must be at least 1".into());
        }
        if self.h_coarse.is_empty() || self.h_coarse.iter().any(|h| !(*h > 0.0)) {
            return Err("h_coarse must be non-empty and positive".into());
        }
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err("rtol must lie in (0, 1)".into());
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig, String> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_iface_spec_round_trips_through_strings() {
        for s in ["const:2.5", "uniform:0.01,1"] {
            let spec: AIfaceSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("triangular:1".parse::<AIfaceSpec>().is_err());
        assert!("uniform:1".parse::<AIfaceSpec>().is_err());
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "[geometry]\nkind = \"infinite_chords\"\ncount = 8\n",
        )
        .unwrap();
        assert_eq!(cfg.geometry, GeometrySpec::InfiniteChords { count: 8 });
        assert_eq!(cfg.levels, 4);
        assert_eq!(cfg.rtol, 1e-8);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again.h_target, cfg.h_target);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut cfg = ExperimentConfig::from_toml(
            "[geometry]\nkind = \"finite_segments\"\ncount = 5\nmax_length = 0.2\n",
        )
        .unwrap();
        cfg.levels = 0;
        assert!(cfg.validate().is_err());
        cfg.levels = 2;
        cfg.b_values = vec![-1.0];
        assert!(cfg.validate().is_err());
    }
}
