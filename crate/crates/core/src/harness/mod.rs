//! Experiment driver: scenario description, simulation loops, metrics,
//! parameter sweeps and the formula-vs-simulation suite.

mod metrics;
mod sim;
mod sweep;
pub mod validate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelError;
use crate::codec::{CodecError, GenerationConfig};
use crate::galois::FieldSpec;
use crate::recovery::RecoveryConfig;
use crate::relay::RelayConfig;

pub use metrics::{MetricsRow, TrialRecord};
pub use sim::{run, run_point_to_point, run_snc, run_two_hop, Simulation};
pub use sweep::{sweep, write_csv, GridSpec, CSV_HEADER};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("trial {trial} did not decode within {limit} transmissions")]
    NoConvergence { trial: usize, limit: usize },
    #[error("grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    PointToPoint,
    TwoHop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CodingMode {
    /// Dense random coefficients.
    Dense,
    /// Sparse coefficients with `w` nonzero entries.
    Snc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryMode {
    Fprac,
    /// Partial packets are discarded.
    #[serde(rename = "none")]
    #[value(name = "none")]
    Disabled,
}

/// When the source learns that the destination has decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Feedback {
    /// Immediately after the packet that completes decoding.
    Packet,
    /// At the end of the dependent group in flight.
    Group,
}

/// How a repaired packet is judged before it is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Verification {
    /// Compare with the true content known to the simulator, so a wrong
    /// correction counts as a failure.
    Oracle,
    /// Trust the CRC checks alone, as a real receiver must.
    Crc,
}

impl std::fmt::Display for Verification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verification::Oracle => "oracle",
            Verification::Crc => "crc",
        })
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Topology::PointToPoint => "point-to-point",
            Topology::TwoHop => "two-hop",
        })
    }
}

impl std::fmt::Display for CodingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CodingMode::Dense => "dense",
            CodingMode::Snc => "snc",
        })
    }
}

impl std::fmt::Display for RecoveryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RecoveryMode::Fprac => "fprac",
            RecoveryMode::Disabled => "none",
        })
    }
}

impl std::fmt::Display for Feedback {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Feedback::Packet => "packet",
            Feedback::Group => "group",
        })
    }
}

/// One simulated scenario. Loaded from TOML; every field has a default.
///
/// `l` counts symbols per packet, so with `q = 8` it is the payload size in
/// bytes. The inner and outer CRCs share one generator, so a wrong
/// correction that satisfies its segment CRC also satisfies the outer CRC;
/// `verification` decides whether such repairs are caught (see
/// [`Verification`]). `dependent_rows` defaults to on whenever something consumes the
/// dependent groups (FPRAC recovery, or a relay) and in snc mode, where the
/// baseline and FPRAC receivers see the same sender; the recovery-disabled
/// dense point-to-point baseline sends plain random combinations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: Topology,
    pub mode: CodingMode,
    pub w: usize,
    pub recovery: RecoveryMode,
    pub dependent_rows: Option<bool>,
    pub feedback: Feedback,
    pub verification: Verification,
    pub g: usize,
    pub l: usize,
    pub s: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub q: u8,
    pub epsilon: f64,
    /// Second-link bit error rate; defaults to `epsilon`.
    pub epsilon_hop2: Option<f64>,
    /// Bits per second, for the modeled transmission time.
    pub data_rate: f64,
    pub trials: usize,
    pub seed: u64,
    pub max_flip_weight: usize,
    pub max_trials_per_segment: u64,
    /// Per-trial cap on transmissions before giving up.
    pub max_transmissions: usize,
    /// Measure compute time of recovery and decoding.
    pub timing: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let rc = RecoveryConfig::default();
        Self {
            topology: Topology::PointToPoint,
            mode: CodingMode::Dense,
            w: 2,
            recovery: RecoveryMode::Fprac,
            dependent_rows: None,
            feedback: Feedback::Packet,
            verification: Verification::Oracle,
            g: 50,
            l: 900,
            s: 5,
            r: 10,
            q: 8,
            epsilon: 1e-4,
            epsilon_hop2: None,
            data_rate: 500_000.0,
            trials: 100,
            seed: 1,
            max_flip_weight: rc.max_flip_weight,
            max_trials_per_segment: rc.max_trials_per_segment,
            max_transmissions: 1_000_000,
            timing: false,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn uses_dependent_rows(&self) -> bool {
        self.dependent_rows.unwrap_or(
            self.recovery == RecoveryMode::Fprac
                || self.topology == Topology::TwoHop
                || self.mode == CodingMode::Snc,
        )
    }

    pub fn epsilon_hop2(&self) -> f64 {
        self.epsilon_hop2.unwrap_or(self.epsilon)
    }

    pub fn generation(&self) -> Result<GenerationConfig, HarnessError> {
        let field = FieldSpec::for_bits(self.q).map_err(|e| HarnessError::Config(e.to_string()))?;
        let mut gen = if self.uses_dependent_rows() {
            GenerationConfig::dense(self.g, self.l, self.s, self.r)
        } else {
            GenerationConfig::plain(self.g, self.l, self.s)
        };
        if self.mode == CodingMode::Snc {
            gen = gen.with_sparsity(Some(self.w));
        }
        let gen = gen.with_field(field);
        gen.validate()?;
        Ok(gen)
    }

    pub fn recovery_config(&self) -> RecoveryConfig {
        RecoveryConfig {
            max_flip_weight: self.max_flip_weight,
            max_trials_per_segment: self.max_trials_per_segment,
        }
    }

    pub fn relay_config(&self) -> RelayConfig {
        match self.recovery {
            RecoveryMode::Fprac => RelayConfig::fprac(),
            RecoveryMode::Disabled => RelayConfig::store_and_forward(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if !(self.data_rate > 0.0 && self.data_rate.is_finite()) {
            return bad("data_rate must be positive");
        }
        for e in [self.epsilon, self.epsilon_hop2()] {
            if !(0.0..=1.0).contains(&e) {
                return Err(ChannelError::Epsilon(e).into());
            }
        }
        if self.max_transmissions == 0 {
            return bad("max_transmissions must be positive");
        }
        self.recovery_config()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.generation()?;
        Ok(())
    }
}
