use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::Law;
use crate::limits::FcltOptions;
use crate::mixing::toy::ThresholdToy;
use crate::process::EnvironmentSpec;
use crate::queue::{AssumptionOptions, CouplingExperimentOptions, QueueModel};

/// One experiment, selected by the top-level `kind` key.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    MixingTable(MixingTableConfig),
    TransferBound(TransferBoundConfig),
    Drift(DriftConfig),
    Contractivity(ContractivityConfig),
    Coupling(CouplingConfig),
    Lln(LlnConfig),
    Clt(CltConfig),
    Fclt(FcltConfig),
    QueueSuite(QueueSuiteConfig),
    Felsmann(FelsmannConfig),
    Borovkov(BorovkovConfig),
}

pub const KINDS: [&str; 11] = [
    "mixing-table",
    "transfer-bound",
    "drift",
    "contractivity",
    "coupling",
    "lln",
    "clt",
    "fclt",
    "queue-suite",
    "felsmann",
    "borovkov",
];

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingTableConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub environment: EnvironmentSpec,
    pub max_gap: usize,
    pub block_len: usize,
    pub js: Vec<i64>,
    /// Horizons of the Cesàro averages to report.
    #[serde(default)]
    pub cesaro: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferBoundConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub toy: ThresholdToy,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftKernel {
    /// Lindley kernel with V(w) = e^{tw} − 1.
    Queue { arrival: Law, t: f64 },
    /// x' = a·x + ξ with centered ξ and V(x) = 1 + x².
    Affine { a: f64, noise: Law },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub master_seed: u64,
    pub replicas: usize,
    pub kernel: DriftKernel,
    pub y_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractivityConfig {
    pub master_seed: u64,
    pub replicas: usize,
    pub service: EnvironmentSpec,
    pub arrival: Law,
    pub t: f64,
    pub n_max: usize,
    pub j_max: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub master_seed: u64,
    pub model: QueueModel,
    /// Its `seed` and `assumptions.seed` are replaced by `master_seed`.
    #[serde(default)]
    pub experiment: CouplingExperimentOptions,
}

fn default_b_grid() -> Vec<f64> {
    vec![1.0, 2.0, 5.0, 10.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlnConfig {
    pub master_seed: u64,
    pub model: QueueModel,
    pub replicas: usize,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_b_grid")]
    pub b_grid: Vec<f64>,
    /// Optional check on the last over first L¹ error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_final_ratio: Option<f64>,
}

fn default_a_multiples() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltConfig {
    pub master_seed: u64,
    pub model: QueueModel,
    pub replicas: usize,
    pub n: usize,
    /// Thresholds a as multiples of the sample standard deviation of n^{-1/2} S_n.
    #[serde(default = "default_a_multiples")]
    pub a_multiples: Vec<f64>,
}

fn default_dump_paths() -> usize {
    50
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcltConfig {
    pub master_seed: u64,
    pub model: QueueModel,
    pub replicas: usize,
    pub n: usize,
    #[serde(default)]
    pub fclt: FcltOptions,
    /// Number of B_n paths written to `paths.csv`.
    #[serde(default = "default_dump_paths")]
    pub dump_paths: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoynesConfig {
    pub depth: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorConfig {
    pub ns: Vec<usize>,
    pub replicas: usize,
}

fn default_steps() -> usize {
    100_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueSuiteConfig {
    pub master_seed: u64,
    pub model: QueueModel,
    /// Its `seed` is replaced by `master_seed`.
    #[serde(default)]
    pub assumptions: AssumptionOptions,
    /// Length of the single path behind the time-average waiting time.
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loynes: Option<LoynesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_floor: Option<FloorConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FelsmannConfig {
    pub master_seed: u64,
    #[serde(default)]
    pub epsilon: f64,
    pub n_max: usize,
    #[serde(default)]
    pub mc_n_max: usize,
    #[serde(default)]
    pub replicas: usize,
}

fn default_coupling_replicas() -> usize {
    20_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BorovkovConfig {
    pub master_seed: u64,
    pub model: QueueModel,
    pub ns: Vec<usize>,
    pub replicas: usize,
    pub depth: usize,
    /// Replicas of the coupling run behind the bound column 2·P̂(τ > n).
    #[serde(default = "default_coupling_replicas")]
    pub coupling_replicas: usize,
    #[serde(default)]
    pub assumptions: AssumptionOptions,
}

#[derive(Deserialize)]
struct KindProbe {
    kind: Option<toml::Spanned<String>>,
}

/// Blanks the line holding the top-level `kind` key so that the per-kind
/// schema sees the rest of the document with its original line numbers.
fn without_kind_line(text: &str, span: std::ops::Range<usize>) -> String {
    let start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
    let end = text[span.end..].find('\n').map_or(text.len(), |i| span.end + i);
    let mut out = String::with_capacity(text.len());
    out.push_str(&text[..start]);
    out.extend(text[start..end].chars().map(|c| if c == '\t' { '\t' } else { ' ' }));
    out.push_str(&text[end..]);
    out
}

fn parse_as<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

impl ExperimentConfig {
    /// Parses a TOML document; errors carry line and column where the parser knows them.
    pub fn from_toml(text: &str) -> Result<Self> {
        let probe: KindProbe = parse_as(text)?;
        let kind = probe.kind.ok_or_else(|| Error::Config(format!("missing key `kind`; expected one of {}", KINDS.join(", "))))?;
        let body = without_kind_line(text, kind.span());
        Ok(match kind.get_ref().as_str() {
            "mixing-table" => Self::MixingTable(parse_as(&body)?),
            "transfer-bound" => Self::TransferBound(parse_as(&body)?),
            "drift" => Self::Drift(parse_as(&body)?),
            "contractivity" => Self::Contractivity(parse_as(&body)?),
            "coupling" => Self::Coupling(parse_as(&body)?),
            "lln" => Self::Lln(parse_as(&body)?),
            "clt" => Self::Clt(parse_as(&body)?),
            "fclt" => Self::Fclt(parse_as(&body)?),
            "queue-suite" => Self::QueueSuite(parse_as(&body)?),
            "felsmann" => Self::Felsmann(parse_as(&body)?),
            "borovkov" => Self::Borovkov(parse_as(&body)?),
            other => {
                let line = text[..kind.span().start].matches('\n').count() + 1;
                return Err(Error::Config(format!(
                    "line {line}: unknown kind `{other}`; expected one of {}",
                    KINDS.join(", ")
                )));
            }
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::MixingTable(_) => KINDS[0],
            Self::TransferBound(_) => KINDS[1],
            Self::Drift(_) => KINDS[2],
            Self::Contractivity(_) => KINDS[3],
            Self::Coupling(_) => KINDS[4],
            Self::Lln(_) => KINDS[5],
            Self::Clt(_) => KINDS[6],
            Self::Fclt(_) => KINDS[7],
            Self::QueueSuite(_) => KINDS[8],
            Self::Felsmann(_) => KINDS[9],
            Self::Borovkov(_) => KINDS[10],
        }
    }

    pub fn master_seed(&self) -> u64 {
        *self.seed_slot()
    }

    pub fn set_master_seed(&mut self, seed: u64) {
        *self.seed_slot_mut() = seed;
    }

    fn seed_slot(&self) -> &u64 {
        match self {
            Self::MixingTable(c) => &c.master_seed,
            Self::TransferBound(c) => &c.master_seed,
            Self::Drift(c) => &c.master_seed,
            Self::Contractivity(c) => &c.master_seed,
            Self::Coupling(c) => &c.master_seed,
            Self::Lln(c) => &c.master_seed,
            Self::Clt(c) => &c.master_seed,
            Self::Fclt(c) => &c.master_seed,
            Self::QueueSuite(c) => &c.master_seed,
            Self::Felsmann(c) => &c.master_seed,
            Self::Borovkov(c) => &c.master_seed,
        }
    }

    fn seed_slot_mut(&mut self) -> &mut u64 {
        match self {
            Self::MixingTable(c) => &mut c.master_seed,
            Self::TransferBound(c) => &mut c.master_seed,
            Self::Drift(c) => &mut c.master_seed,
            Self::Contractivity(c) => &mut c.master_seed,
            Self::Coupling(c) => &mut c.master_seed,
            Self::Lln(c) => &mut c.master_seed,
            Self::Clt(c) => &mut c.master_seed,
            Self::Fclt(c) => &mut c.master_seed,
            Self::QueueSuite(c) => &mut c.master_seed,
            Self::Felsmann(c) => &mut c.master_seed,
            Self::Borovkov(c) => &mut c.master_seed,
        }
    }

    /// Copies `master_seed` into nested seeds so the echo shows what actually ran.
    pub fn resolve(&mut self) {
        match self {
            Self::Coupling(c) => {
                c.experiment.seed = c.master_seed;
                c.experiment.assumptions.seed = c.master_seed;
            }
            Self::QueueSuite(c) => c.assumptions.seed = c.master_seed,
            Self::Borovkov(c) => c.assumptions.seed = c.master_seed,
            _ => {}
        }
    }
}
