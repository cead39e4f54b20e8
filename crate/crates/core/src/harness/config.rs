//! Experiment configuration: a TOML file of flat key-value sections, with
//! command-line style overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::SnrModel;
use crate::detector::{DetectorConfig, FilterKind, InitialFilter};
use crate::error::{Error, Result};
use crate::signal::{qam_rail_order, SignalSpace};
use crate::stbc::{CdaCode, CodeVariant};

/// How the receiver learns the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsirMode {
    Perfect,
    OneShot,
    Iterative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub code: CodeVariant,
    pub n_t: usize,
    pub n_r: usize,
    /// Square QAM order (4, 16, 64, ...).
    pub modulation: usize,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            code: CodeVariant::IllOnly,
            n_t: 4,
            n_r: 4,
            modulation: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub filter: FilterKind,
    /// Highest sub-stage order; 0 reports the quantized filter output.
    pub m_max: usize,
}

impl Default for DetectorSection {
    fn default() -> Self {
        DetectorSection {
            filter: FilterKind::Mmse,
            m_max: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub csir: CsirMode,
    /// Re-estimation rounds for `csir = "iterative"`.
    pub iterations: usize,
    /// Data matrices per frame, `N_d`.
    pub data_blocks: usize,
    pub beta_p: f64,
    pub beta_d: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            csir: CsirMode::Perfect,
            iterations: 4,
            data_blocks: 1,
            beta_p: 1.0,
            beta_d: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub snr_db: Vec<f64>,
    pub min_errors: u64,
    pub max_bits: u64,
    pub seed: Option<u64>,
    /// Off gives `wall_ms = 0`, making output files byte-reproducible.
    pub record_timing: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            snr_db: vec![0.0, 4.0, 8.0, 12.0],
            min_errors: 200,
            max_bits: 2_000_000,
            seed: None,
            record_timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacitySection {
    /// Coherence time `T` in channel uses.
    pub coherence: usize,
    /// Training length; 0 means `N_t`.
    pub tau: usize,
    pub trials: usize,
}

impl Default for CapacitySection {
    fn default() -> Self {
        CapacitySection {
            coherence: 48,
            tau: 0,
            trials: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    pub detector: DetectorSection,
    pub channel: ChannelSection,
    pub sweep: SweepSection,
    pub capacity: CapacitySection,
}

const SECTIONS: [&str; 5] = ["system", "detector", "channel", "sweep", "capacity"];

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))?;
        Self::from_table(table)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Loads `path` (or the defaults) and applies `key=value` overrides, then
    /// validates.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(vec![format!("{}: {}", p.display(), e.message())]))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let cfg = Self::from_table(table)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        ExperimentConfig::deserialize(table).map_err(|e| Error::Config(vec![e.message().to_string()]))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks every field, reporting all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let s = &self.system;
        if s.n_t == 0 {
            errs.push("system.n_t must be at least 1".to_string());
        }
        if s.n_r == 0 {
            errs.push("system.n_r must be at least 1".to_string());
        }
        if qam_rail_order(s.modulation).is_err() {
            errs.push(format!("system.modulation {} is not a square QAM order", s.modulation));
        }
        if s.code == CodeVariant::Custom {
            errs.push("system.code must be \"fd-ill\" or \"ill-only\"".to_string());
        }
        if self.detector.m_max > 2 * s.n_t * s.n_t {
            errs.push(format!("detector.m_max {} exceeds 2 N_t^2 = {}", self.detector.m_max, 2 * s.n_t * s.n_t));
        }
        let c = &self.channel;
        if c.data_blocks == 0 {
            errs.push("channel.data_blocks must be at least 1".to_string());
        }
        if !(c.beta_p > 0.0 && c.beta_d > 0.0) {
            errs.push("channel.beta_p and channel.beta_d must be positive".to_string());
        } else {
            let nd = c.data_blocks as f64;
            if (c.beta_p + nd * c.beta_d - (nd + 1.0)).abs() > 1e-3 {
                errs.push(format!(
                    "channel.beta_p + data_blocks * channel.beta_d = {} must equal data_blocks + 1",
                    c.beta_p + nd * c.beta_d
                ));
            }
        }
        let w = &self.sweep;
        if w.snr_db.is_empty() {
            errs.push("sweep.snr_db must not be empty".to_string());
        }
        if w.snr_db.iter().any(|v| !v.is_finite()) {
            errs.push("sweep.snr_db values must be finite".to_string());
        }
        if w.snr_db.windows(2).any(|p| p[1] <= p[0]) {
            errs.push("sweep.snr_db must be strictly increasing".to_string());
        }
        if w.min_errors == 0 {
            errs.push("sweep.min_errors must be positive".to_string());
        }
        if w.max_bits == 0 {
            errs.push("sweep.max_bits must be positive".to_string());
        }
        let k = &self.capacity;
        if k.trials < 2 {
            errs.push("capacity.trials must be at least 2".to_string());
        }
        let tau = self.training_length();
        if tau < s.n_t {
            errs.push(format!("capacity.tau {tau} is shorter than N_t"));
        }
        if k.coherence <= tau {
            errs.push(format!("capacity.coherence {} must exceed the training length {tau}", k.coherence));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn training_length(&self) -> usize {
        if self.capacity.tau == 0 {
            self.system.n_t
        } else {
            self.capacity.tau
        }
    }

    pub fn code(&self) -> Result<CdaCode> {
        CdaCode::new(self.system.n_t, self.system.code)
    }

    pub fn space(&self) -> Result<SignalSpace> {
        SignalSpace::qam(self.system.modulation, self.system.n_t * self.system.n_t)
    }

    /// Mean energy of one complex symbol.
    pub fn symbol_energy(&self) -> Result<f64> {
        let rail = qam_rail_order(self.system.modulation)? as f64;
        Ok(2.0 * (rail * rail - 1.0) / 3.0)
    }

    pub fn snr_model(&self, snr_db: f64) -> Result<SnrModel> {
        SnrModel::with_betas(
            crate::channel::db_to_linear(snr_db),
            self.symbol_energy()?,
            self.channel.beta_p,
            self.channel.beta_d,
            self.channel.data_blocks,
        )
    }

    pub fn detector_config(&self, snr: &SnrModel) -> DetectorConfig {
        let filter = match self.detector.filter {
            FilterKind::Mmse => InitialFilter::mmse(snr.noise_to_signal(self.system.n_t)),
            FilterKind::Zf => InitialFilter::zf(),
            FilterKind::Mf => InitialFilter::mf(),
        };
        DetectorConfig::new(filter, self.detector.m_max)
    }

    /// Estimation rounds after the pilot-only estimate, or `None` with
    /// perfect CSIR.
    pub fn estimation_rounds(&self) -> Option<usize> {
        match self.channel.csir {
            CsirMode::Perfect => None,
            CsirMode::OneShot => Some(0),
            CsirMode::Iterative => Some(self.channel.iterations),
        }
    }
}

/// Sets `key` (`section.key`, or a bare key unique across sections) to
/// `value`, parsed as a TOML value when possible and as a string otherwise.
pub fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let (section, field) = match key.split_once('.') {
        Some((s, f)) => (s.to_string(), f.to_string()),
        None => (find_section(key)?.to_string(), key.to_string()),
    };
    if !SECTIONS.contains(&section.as_str()) {
        return Err(Error::Config(vec![format!("unknown section `{section}` in override `{key}`")]));
    }
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let entry = table
        .entry(section.clone())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(field, parsed);
            Ok(())
        }
        _ => Err(Error::Config(vec![format!("`{section}` is not a section")])),
    }
}

fn find_section(field: &str) -> Result<&'static str> {
    let defaults = toml::Table::try_from(ExperimentConfig::default()).expect("defaults serialize");
    let mut hits = SECTIONS.iter().filter(|s| {
        defaults
            .get(**s)
            .and_then(|v| v.as_table())
            .is_some_and(|t| t.contains_key(field))
            || (**s == "sweep" && field == "seed")
    });
    match (hits.next(), hits.next()) {
        (Some(s), None) => Ok(s),
        (None, _) => Err(Error::Config(vec![format!("unknown configuration key `{field}`")])),
        (Some(_), Some(_)) => Err(Error::Config(vec![format!("key `{field}` is ambiguous, use section.key")])),
    }
}
