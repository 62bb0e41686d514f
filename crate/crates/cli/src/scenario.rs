//! Scenario files: versioned, strict JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stackcomm::{ChannelSpec, QuadraticObjective, SideInfoModel, SimConfig, SourcePairModel};

use crate::fail::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Noiseless,
    Rd,
    Noisy,
    SiNoiseless,
    SiRd,
    SiMatch,
    Control,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Noiseless => "noiseless",
            Kind::Rd => "rd",
            Kind::Noisy => "noisy",
            Kind::SiNoiseless => "si_noiseless",
            Kind::SiRd => "si_rd",
            Kind::SiMatch => "si_match",
            Kind::Control => "control",
        }
    }

    pub fn uses_side_info(self) -> bool {
        matches!(self, Kind::SiNoiseless | Kind::SiRd | Kind::SiMatch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Objectives {
    pub phi_e: QuadraticObjective,
    pub phi_d: QuadraticObjective,
}

/// On-disk form. `model` is parsed once the kind is known.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: u32,
    kind: Kind,
    model: serde_json::Value,
    #[serde(default)]
    channel: Option<ChannelSpec>,
    /// In the units selected by `--rate-units`.
    #[serde(default)]
    rate: Option<f64>,
    #[serde(default)]
    objectives: Option<Objectives>,
    #[serde(default)]
    sim: Option<SimConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Pair(SourcePairModel),
    SideInfo(SideInfoModel),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: Kind,
    pub model: Model,
    pub channel: Option<ChannelSpec>,
    pub rate: Option<f64>,
    pub objectives: Option<Objectives>,
    pub sim: Option<SimConfig>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("scenario: cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawScenario =
            serde_json::from_str(text).map_err(|e| CliError::validation(format!("scenario: {e}")))?;
        if raw.schema != SCHEMA_VERSION {
            return Err(CliError::validation(format!(
                "schema: unsupported version {}, expected {SCHEMA_VERSION}",
                raw.schema
            )));
        }
        let model = if raw.kind.uses_side_info() {
            let m: SideInfoModel = serde_json::from_value(raw.model)
                .map_err(|e| CliError::validation(format!("model: {e}")))?;
            m.validate().map_err(|v| CliError::validation(format!("model.{v}")))?;
            Model::SideInfo(m)
        } else {
            let m: SourcePairModel = serde_json::from_value(raw.model)
                .map_err(|e| CliError::validation(format!("model: {e}")))?;
            m.validate().map_err(|v| CliError::validation(format!("model.{v}")))?;
            Model::Pair(m)
        };
        if let Some(ch) = &raw.channel {
            ch.validate()?;
        }
        if let Some(sim) = &raw.sim {
            sim.validate().map_err(|e| CliError::validation(format!("sim: {e}")))?;
        }
        if let Some(r) = raw.rate {
            if !r.is_finite() || r < 0.0 {
                return Err(CliError::validation(format!("rate: must be finite and >= 0, got {r}")));
            }
        }
        let s = Scenario {
            kind: raw.kind,
            model,
            channel: raw.channel,
            rate: raw.rate,
            objectives: raw.objectives,
            sim: raw.sim,
        };
        s.check_required()?;
        Ok(s)
    }

    fn check_required(&self) -> Result<(), CliError> {
        let missing = |field: &str| CliError::validation(format!("{field}: required for kind {}", self.kind.name()));
        match self.kind {
            Kind::Rd | Kind::SiRd if self.rate.is_none() => Err(missing("rate")),
            Kind::Noisy | Kind::SiMatch | Kind::Control if self.channel.is_none() => Err(missing("channel")),
            Kind::Control if self.objectives.is_none() => Err(missing("objectives")),
            _ => Ok(()),
        }
    }

    pub fn pair(&self) -> Result<SourcePairModel, CliError> {
        match self.model {
            Model::Pair(m) => Ok(m),
            Model::SideInfo(_) => Err(CliError::validation(format!(
                "kind: {} carries a side-information model",
                self.kind.name()
            ))),
        }
    }

    pub fn side_info(&self) -> Result<SideInfoModel, CliError> {
        match self.model {
            Model::SideInfo(m) => Ok(m),
            Model::Pair(_) => Err(CliError::validation(format!(
                "kind: {} carries a source-pair model",
                self.kind.name()
            ))),
        }
    }

    pub fn channel(&self) -> Result<ChannelSpec, CliError> {
        self.channel
            .ok_or_else(|| CliError::validation(format!("channel: required for kind {}", self.kind.name())))
    }
}
