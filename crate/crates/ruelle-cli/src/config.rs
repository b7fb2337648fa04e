//! Run configuration: a single structured TOML file per run, flag overrides,
//! validation, and a deterministic hash over the canonicalized result.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ruelle::potential::PotentialSpec;
use ruelle::subshift::SubshiftModel;
use ruelle::suspension::{Observable, PiecewisePoly};
use ruelle::{CylinderFunction, Error as CoreError};

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: ModelCfg,
    pub potential: Option<PotentialCfg>,
    pub roof: Option<PotentialCfg>,
    #[serde(default)]
    pub params: ParamsCfg,
    #[serde(default)]
    pub grids: GridsCfg,
    #[serde(default)]
    pub observables: ObservablesCfg,
    #[serde(default)]
    pub output: OutputCfg,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCfg {
    pub alphabet: usize,
    pub transitions: Vec<Vec<u8>>,
    pub theta: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialCfg {
    pub kind: String,
    pub depth: Option<usize>,
    pub values: Option<Vec<f64>>,
    pub base: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub ratio: Option<f64>,
    /// Optional pre-truncation of a series to a depth-`n` table.
    pub truncate_depth: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsCfg {
    /// Working cylinder depth `t`.
    pub depth: usize,
    /// Normalization parameter `a`.
    pub a: f64,
    /// Cap on `|a|`.
    pub a0: f64,
    /// Frequency for the contraction machinery.
    pub b: f64,
    /// Frequency threshold for family construction.
    pub b0: f64,
    pub n_branch: usize,
    pub ell0: usize,
    pub mu0: f64,
    pub cone_e: f64,
    pub epsilon1: f64,
    pub eps3: f64,
    pub sub_colength: usize,
    pub seed: u64,
    pub mc_samples: usize,
    /// Orbit/zeta symbolic length cap.
    pub n_max: usize,
    /// Enumeration refusal ceiling.
    pub ceiling: usize,
    /// Cylinder depth for the `gibbs` command.
    pub gibbs_depth: usize,
}

impl Default for ParamsCfg {
    fn default() -> Self {
        ParamsCfg {
            depth: 8,
            a: 0.0,
            a0: 0.1,
            b: 20.0,
            b0: 1.0,
            n_branch: 4,
            ell0: 2,
            mu0: 0.05,
            cone_e: 10.0,
            epsilon1: 1.0,
            eps3: 0.01,
            sub_colength: 1,
            seed: 42,
            mc_samples: 200_000,
            n_max: 25,
            ceiling: 26,
            gibbs_depth: 6,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridsCfg {
    pub b_min: f64,
    pub b_max: f64,
    pub b_steps: usize,
    pub m_max: usize,
    pub t_max: f64,
    pub t_steps: usize,
    pub lambda_max: f64,
    pub lambda_steps: usize,
    pub s_re: f64,
    pub s_im: f64,
    pub iterate_steps: usize,
    pub floor: f64,
}

impl Default for GridsCfg {
    fn default() -> Self {
        GridsCfg {
            b_min: 10.0,
            b_max: 100.0,
            b_steps: 10,
            m_max: 40,
            t_max: 30.0,
            t_steps: 61,
            lambda_max: 18.0,
            lambda_steps: 18,
            s_re: 1.0,
            s_im: 0.0,
            iterate_steps: 20,
            floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservablesCfg {
    /// "one" or "chi<k>" (indicator of first symbol `k`).
    pub a_base: String,
    /// "const", "ramp" or "bump".
    pub a_height: String,
    pub b_base: String,
    pub b_height: String,
}

impl Default for ObservablesCfg {
    fn default() -> Self {
        ObservablesCfg {
            a_base: "one".to_string(),
            a_height: "bump".to_string(),
            b_base: "one".to_string(),
            b_height: "bump".to_string(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputCfg {
    pub dir: Option<PathBuf>,
}

/// A validated configuration with every default resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub model: SubshiftModel,
    pub potential: PotentialSpec,
    pub roof: Option<PotentialSpec>,
    pub hash: String,
    pub outdir: PathBuf,
}

impl RunConfig {
    pub fn roof(&self) -> Result<&PotentialSpec, CliError> {
        self.roof
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a [roof] section".to_string()))
    }

    pub fn observable(&self, base: &str, height: &str) -> Result<Observable, CliError> {
        let base_cf = match base {
            "one" => None,
            s if s.starts_with("chi") => {
                let k: u8 = s[3..]
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad base observable '{s}'")))?;
                if k as usize >= self.model.alphabet_size() {
                    return Err(CliError::Config(format!("symbol {k} out of range")));
                }
                let words = self.model.enumerate_words(1).map_err(CliError::Core)?;
                Some(CylinderFunction::new(
                    1,
                    words
                        .iter()
                        .map(|w| f64::from(w.symbols()[0] == k))
                        .collect(),
                ))
            }
            s => return Err(CliError::Config(format!("unknown base observable '{s}'"))),
        };
        let height = match height {
            "const" => PiecewisePoly::constant(1.0),
            "ramp" => PiecewisePoly::poly_on(vec![0.0, 1.0], 1.0),
            "bump" => PiecewisePoly::smooth_bump(),
            s => return Err(CliError::Config(format!("unknown height profile '{s}'"))),
        };
        Ok(Observable {
            base: base_cf,
            height,
        })
    }
}

fn build_potential(
    model: &SubshiftModel,
    cfg: &PotentialCfg,
    what: &str,
) -> Result<PotentialSpec, CliError> {
    let spec = match cfg.kind.as_str() {
        "table" => {
            let depth = cfg
                .depth
                .ok_or_else(|| CliError::Config(format!("{what}: table needs 'depth'")))?;
            let values = cfg
                .values
                .clone()
                .ok_or_else(|| CliError::Config(format!("{what}: table needs 'values'")))?;
            PotentialSpec::table(model, depth, values).map_err(CliError::Core)?
        }
        "series" => {
            let base = cfg
                .base
                .ok_or_else(|| CliError::Config(format!("{what}: series needs 'base'")))?;
            let weights = cfg
                .weights
                .clone()
                .ok_or_else(|| CliError::Config(format!("{what}: series needs 'weights'")))?;
            let ratio = cfg
                .ratio
                .ok_or_else(|| CliError::Config(format!("{what}: series needs 'ratio'")))?;
            PotentialSpec::series(model, base, weights, ratio).map_err(CliError::Core)?
        }
        k => return Err(CliError::Config(format!("{what}: unknown kind '{k}'"))),
    };
    match cfg.truncate_depth {
        Some(t) => {
            let cf = spec.truncate_to_depth(model, t).map_err(CliError::Core)?;
            PotentialSpec::table(model, t, cf.values).map_err(CliError::Core)
        }
        None => Ok(spec),
    }
}

/// Parses and validates a config file; collects every violation it finds.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let raw: RawConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
    resolve_config(raw)
}

pub fn resolve_config(raw: RawConfig) -> Result<RunConfig, CliError> {
    let mut violations: Vec<String> = Vec::new();
    let model = match SubshiftModel::new(raw.model.alphabet, &raw.model.transitions, raw.model.theta)
    {
        Ok(m) => Some(m),
        Err(e) => {
            violations.push(e.to_string());
            None
        }
    };
    let mut potential = None;
    let mut roof = None;
    if let Some(m) = &model {
        potential = match &raw.potential {
            Some(p) => match build_potential(m, p, "potential") {
                Ok(p) => Some(p),
                Err(e) => {
                    violations.push(e.to_string());
                    None
                }
            },
            None => Some(PotentialSpec::zero(m)),
        };
        roof = match &raw.roof {
            Some(r) => match build_potential(m, r, "roof") {
                Ok(spec) => {
                    let probe = spec.table_depth().max(raw.params.depth.max(1));
                    match spec.min_on_depth(m, probe) {
                        Ok(t0) if t0 > 0.0 => Some(spec),
                        Ok(t0) => {
                            violations.push(format!("roof must be >= tau0 > 0 (found min {t0})"));
                            None
                        }
                        Err(e) => {
                            violations.push(e.to_string());
                            None
                        }
                    }
                }
                Err(e) => {
                    violations.push(e.to_string());
                    None
                }
            },
            None => None,
        };
    }
    if raw.params.a.abs() > raw.params.a0 {
        violations.push(format!(
            "|a| = {} exceeds the configured a0 = {}",
            raw.params.a.abs(),
            raw.params.a0
        ));
    }
    if raw.params.depth < 1 {
        violations.push("params.depth must be >= 1".to_string());
    }
    if !(raw.params.mu0 > 0.0 && raw.params.mu0 <= 0.5) {
        violations.push(format!("mu0 must lie in (0, 1/2], got {}", raw.params.mu0));
    }
    if !violations.is_empty() {
        return Err(CliError::Config(violations.join("; ")));
    }

    let hash = config_hash(&raw)?;
    let outdir = std::env::var_os("RUELLE_OUTDIR")
        .map(PathBuf::from)
        .or_else(|| raw.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(RunConfig {
        model: model.unwrap(),
        potential: potential.unwrap(),
        roof,
        hash,
        outdir,
        raw,
    })
}

/// SHA-256 over the canonicalized config, excluding the output section.
pub fn config_hash(raw: &RawConfig) -> Result<String, CliError> {
    let mut canonical = raw.clone();
    canonical.output = OutputCfg::default();
    let text = toml::to_string(&canonical)
        .map_err(|e| CliError::Config(format!("cannot canonicalize config: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(s: &str) -> Result<RunConfig, CliError> {
        let raw: RawConfig = toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        resolve_config(raw)
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_str(
            r#"
            [model]
            alphabet = 2
            transitions = [[1, 1], [1, 1]]
            theta = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.raw.params.depth, 8);
        assert_eq!(cfg.raw.params.seed, 42);
        assert!(cfg.roof.is_none());
        assert_eq!(cfg.hash.len(), 64);
    }

    #[test]
    fn non_square_matrix_is_rejected() {
        let err = parse_str(
            r#"
            [model]
            alphabet = 2
            transitions = [[1, 1, 0], [1, 1, 0]]
            theta = 0.5
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert!(err.to_string().contains("square"));
    }

    #[test]
    fn zero_roof_is_rejected() {
        let err = parse_str(
            r#"
            [model]
            alphabet = 2
            transitions = [[1, 1], [1, 1]]
            theta = 0.5
            [roof]
            kind = "table"
            depth = 1
            values = [0.0, 2.0]
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("tau0"));
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = parse_str(
            r#"
            [model]
            alphabet = 2
            transitions = [[1, 1], [1, 1]]
            theta = 0.5
            [output]
            dir = "x"
            "#,
        )
        .unwrap();
        let b = parse_str(
            r#"
            [model]
            alphabet = 2
            transitions = [[1, 1], [1, 1]]
            theta = 0.5
            [output]
            dir = "y"
            "#,
        )
        .unwrap();
        assert_eq!(a.hash, b.hash);
    }
}
