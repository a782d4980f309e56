//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use upa_codebook::codebook::{CodebookKind, Sweep};
use upa_codebook::sim::{ChannelScenario, DEFAULT_SNR_GRID_DB, DEFAULT_TAU_T};
use upa_codebook::{CodebookConfig, UpaConfig};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub upa: Option<UpaConfig>,
    pub codebook: Option<CodebookBlock>,
    pub scenario: Option<ScenarioBlock>,
    pub simulation: Option<SimulationBlock>,
    pub sweep: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookBlock {
    #[serde(default = "default_kind")]
    pub kind: String,
    pub q_h: usize,
    pub q_v: usize,
    pub l_h: Option<usize>,
    pub l_v: Option<usize>,
    pub i_phases: Option<usize>,
    #[serde(default)]
    pub gamma: f64,
    pub mse_grid_per_beam: Option<usize>,
    #[serde(default = "yes")]
    pub quantize: bool,
    #[serde(default)]
    pub requantize_shift: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    /// `scenario1`, `scenario2` or `los_only`; explicit fields override it.
    pub preset: Option<String>,
    pub k_factor_db: Option<f64>,
    pub n_nlos: Option<usize>,
    pub los_present: Option<bool>,
    pub normalize_to_m: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub snr_db: Option<Vec<f64>>,
    pub realizations: usize,
    pub tau_t: Option<f64>,
}

fn default_kind() -> String {
    "proposed".into()
}

fn yes() -> bool {
    true
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::new(2, msg)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::new(e.code, format!("{}: {}", path.display(), e.message)))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every block that is present before any work starts.
    fn validate(&self) -> Result<(), CliError> {
        if let Some(upa) = &self.upa {
            upa.validate().map_err(|e| invalid(format!("[upa]: {e}")))?;
        }
        if let Some(cb) = &self.codebook {
            let kind = self.kind()?;
            if let Some(upa) = &self.upa {
                if kind != CodebookKind::KpDft {
                    let c = cb.to_config(kind)?;
                    c.validate(upa).map_err(CliError::from)?;
                }
            }
        }
        if let Some(sc) = &self.scenario {
            sc.resolve()?.validate().map_err(|e| invalid(format!("[scenario]: {e}")))?;
        }
        if let Some(s) = &self.simulation {
            if s.realizations == 0 {
                return Err(invalid("[simulation]: realizations must be >= 1"));
            }
            if let Some(t) = s.tau_t {
                if t.is_nan() || t < 1.0 {
                    return Err(invalid("[simulation]: tau_t must be >= 1"));
                }
            }
        }
        self.sweep()?;
        Ok(())
    }

    pub fn upa(&self) -> Result<UpaConfig, CliError> {
        self.upa.ok_or_else(|| invalid("missing [upa] block"))
    }

    pub fn codebook(&self) -> Result<&CodebookBlock, CliError> {
        self.codebook.as_ref().ok_or_else(|| invalid("missing [codebook] block"))
    }

    pub fn kind(&self) -> Result<CodebookKind, CliError> {
        CodebookKind::parse(&self.codebook()?.kind).map_err(|e| invalid(format!("[codebook]: {e}")))
    }

    pub fn sweep(&self) -> Result<Sweep, CliError> {
        match &self.sweep {
            None => Ok(Sweep::Full),
            Some(s) => Sweep::parse(s).map_err(|e| invalid(e.to_string())),
        }
    }

    pub fn scenario(&self) -> Result<ChannelScenario, CliError> {
        self.scenario
            .as_ref()
            .ok_or_else(|| invalid("missing [scenario] block"))?
            .resolve()
    }

    pub fn simulation(&self) -> Result<&SimulationBlock, CliError> {
        self.simulation
            .as_ref()
            .ok_or_else(|| invalid("missing [simulation] block"))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

impl CodebookBlock {
    /// Design parameters; `l_h`, `l_v` and `i_phases` are required for the
    /// proposed codebook only.
    pub fn to_config(&self, kind: CodebookKind) -> Result<CodebookConfig, CliError> {
        let need = |v: Option<usize>, name: &str| -> Result<usize, CliError> {
            v.ok_or_else(|| invalid(format!("[codebook]: missing field `{name}` (required for kind = \"proposed\")")))
        };
        let mut cfg = match kind {
            CodebookKind::Proposed => CodebookConfig::new(
                self.q_h,
                self.q_v,
                need(self.l_h, "l_h")?,
                need(self.l_v, "l_v")?,
                need(self.i_phases, "i_phases")?,
            ),
            _ => CodebookConfig::new(self.q_h, self.q_v, 1, 1, 1),
        };
        cfg.gamma = self.gamma;
        if let Some(n) = self.mse_grid_per_beam {
            cfg.mse_grid_per_beam = n;
        }
        Ok(cfg)
    }
}

impl ScenarioBlock {
    pub fn resolve(&self) -> Result<ChannelScenario, CliError> {
        let mut sc = match self.preset.as_deref() {
            None | Some("scenario1") => ChannelScenario::scenario1(),
            Some("scenario2") => ChannelScenario::scenario2(),
            Some("los_only") => ChannelScenario::los_only(),
            Some(other) => return Err(invalid(format!("[scenario]: unknown preset `{other}`"))),
        };
        if let Some(k) = self.k_factor_db {
            sc.k_factor_db = k;
        }
        if let Some(r) = self.n_nlos {
            sc.n_nlos = r;
        }
        if let Some(l) = self.los_present {
            sc.los_present = l;
        }
        if let Some(n) = self.normalize_to_m {
            sc.normalize_to_m = n;
        }
        Ok(sc)
    }
}

impl SimulationBlock {
    pub fn snr_grid(&self) -> Vec<f64> {
        self.snr_db.clone().unwrap_or_else(|| DEFAULT_SNR_GRID_DB.to_vec())
    }

    pub fn tau_t(&self) -> f64 {
        self.tau_t.unwrap_or(DEFAULT_TAU_T)
    }
}
