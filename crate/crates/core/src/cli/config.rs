//! Scenario configuration files: strict JSON schema, defaults, dotted-path
//! overrides and field-precise validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::{snr_serde, ChannelConfig, Nonlinearity, DEFAULT_F3DB_NORM};
use crate::equalizers::{EqTapConfig, LmsParams, SvmParams, SvmSolver};
use crate::error::Error;
use crate::metrics::{EqualizerSpec, Scenario};
use crate::txgen::TxConfig;

use super::CliError;

/// SNR grid used by `sweep-snr` when the config gives none.
pub const DEFAULT_SNR_GRID: [f64; 5] = [8.0, 10.0, 12.0, 14.0, 16.0];
/// Training lengths used by `sweep-train` when the config gives none.
pub const DEFAULT_TRAIN_GRID: [f64; 6] = [250.0, 500.0, 1000.0, 2000.0, 5000.0, 10000.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub tx: TxSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default = "default_equalizers")]
    pub equalizers: Vec<EqualizerEntry>,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TxSection {
    pub prbs_seed: u32,
    pub rolloff: f64,
    pub sps: usize,
    pub span_symbols: usize,
}

impl Default for TxSection {
    fn default() -> Self {
        let tx = TxConfig::default();
        Self {
            prbs_seed: tx.prbs_seed,
            rolloff: tx.rolloff,
            sps: tx.sps,
            span_symbols: tx.span_symbols,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub f3db_norm: f64,
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub nonlinearity: Option<Nonlinearity>,
    pub timing_offset: usize,
    pub matched_filter: bool,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            f3db_norm: DEFAULT_F3DB_NORM,
            snr_db: 14.0,
            nonlinearity: None,
            timing_offset: 0,
            matched_filter: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualizerKindName {
    Svm,
    FfeDfe,
    Slicer,
}

/// Union of every equalizer's hyperparameters; fields that do not belong to
/// the entry's kind are rejected during validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SvmSolver>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualizerEntry {
    pub kind: EqualizerKindName,
    /// Label used in the results; defaults to `<kind>_<ffe>_<dfe>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_ffe_taps")]
    pub ffe_taps: usize,
    #[serde(default = "default_dfe_taps")]
    pub dfe_taps: usize,
    #[serde(default)]
    pub hyperparams: Hyperparams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SnrSweep,
    TrainSweep,
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    /// SNR values in dB for `snr_sweep`, training lengths for `train_sweep`;
    /// empty selects the built-in grid.
    #[serde(default, with = "snr_serde::vec")]
    pub grid: Vec<f64>,
    #[serde(default = "default_n_symbols")]
    pub n_symbols: usize,
    #[serde(default = "default_train_length")]
    pub train_length: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub path: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            path: PathBuf::from("results.csv"),
            format: OutputFormat::Csv,
        }
    }
}

fn default_equalizers() -> Vec<EqualizerEntry> {
    [EqualizerKindName::Svm, EqualizerKindName::FfeDfe]
        .into_iter()
        .map(|kind| EqualizerEntry {
            kind,
            name: None,
            ffe_taps: default_ffe_taps(),
            dfe_taps: default_dfe_taps(),
            hyperparams: Hyperparams::default(),
        })
        .collect()
}

fn default_ffe_taps() -> usize {
    EqTapConfig::ENHANCED.ffe_taps
}

fn default_dfe_taps() -> usize {
    EqTapConfig::ENHANCED.dfe_taps
}

fn default_n_symbols() -> usize {
    1_000_000
}

fn default_train_length() -> usize {
    5000
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

/// Reads `path`, applies `overrides` (`key=value` with dotted keys) and
/// validates the result.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigIo {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path, overrides)
}

/// Same as [`load_config`] for text already in memory; `origin` only
/// appears in error messages.
pub fn parse_config(text: &str, origin: &Path, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let mut config: ScenarioConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        let message = e.inner().to_string();
        let field = match unknown_key(&message) {
            Some(key) if field == "." => key.to_string(),
            Some(key) if !field.ends_with(key) => format!("{field}.{key}"),
            _ => field,
        };
        invalid(field, message)
    })?;
    config.validate()?;
    config.resolve();
    Ok(config)
}

/// Extracts `key` from serde's "unknown field `key`" message.
fn unknown_key(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

/// Sets a dotted path (`channel.snr_db`, `equalizers.0.ffe_taps`) in a JSON
/// tree. The value is parsed as JSON when possible and kept as a string
/// otherwise, so `inf` and `snr_sweep` need no quoting.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let bad = |message: String| CliError::Override {
        assignment: assignment.to_string(),
        message,
    };
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| bad("expected KEY=VALUE".into()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(bad(format!("malformed key {key:?}")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));

    let mut node = root;
    for segment in key.split('.') {
        node = match node {
            Value::Array(items) => {
                let len = items.len();
                let idx: usize = segment
                    .parse()
                    .map_err(|_| bad(format!("{segment:?} is not a list index")))?;
                items
                    .get_mut(idx)
                    .ok_or_else(|| bad(format!("index {idx} out of range for a list of {len}")))?
            }
            other => {
                if !other.is_object() {
                    *other = Value::Object(Default::default());
                }
                other
                    .as_object_mut()
                    .expect("just made an object")
                    .entry(segment)
                    .or_insert(Value::Null)
            }
        };
    }
    *node = value;
    Ok(())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let tx = self.tx_config();
        tx.validate().map_err(|e| {
            let field = match e {
                Error::InvalidSeed(_) => "tx.prbs_seed",
                Error::InvalidRolloff(_) => "tx.rolloff",
                Error::InvalidSpan(_) => "tx.span_symbols",
                Error::InvalidSps { .. } => "tx.sps",
                _ => "tx",
            };
            invalid(field, e.to_string())
        })?;
        self.channel_config().validate(tx.sps).map_err(|e| {
            let field = match e {
                Error::InvalidBandwidth { .. } => "channel.f3db_norm",
                Error::InvalidSaturation(_) => "channel.nonlinearity.sat_level",
                Error::InvalidTimingOffset { .. } => "channel.timing_offset",
                Error::InvalidParameter(_) => "channel.snr_db",
                _ => "channel",
            };
            invalid(field, e.to_string())
        })?;

        if self.equalizers.is_empty() {
            return Err(invalid("equalizers", "at least one equalizer is required"));
        }
        let mut names = Vec::new();
        for (i, entry) in self.equalizers.iter().enumerate() {
            entry.validate(&format!("equalizers[{i}]"))?;
            let name = entry.spec().name;
            if names.contains(&name) {
                return Err(invalid(
                    format!("equalizers[{i}].name"),
                    format!("duplicate equalizer name {name:?}"),
                ));
            }
            names.push(name);
        }

        let exp = &self.experiment;
        if exp.seeds.is_empty() {
            return Err(invalid("experiment.seeds", "at least one seed is required"));
        }
        if exp.train_length == 0 {
            return Err(invalid("experiment.train_length", "must be positive"));
        }
        let warmup = self.equalizers.iter().map(|e| e.taps().warmup()).max().unwrap_or(0);
        if exp.train_length <= warmup {
            return Err(invalid(
                "experiment.train_length",
                format!("must exceed the {warmup}-symbol equalizer warm-up"),
            ));
        }
        for (i, &x) in exp.grid.iter().enumerate() {
            let field = format!("experiment.grid[{i}]");
            match exp.kind {
                ExperimentKind::SnrSweep | ExperimentKind::Single => {
                    if x.is_nan() || x == f64::NEG_INFINITY {
                        return Err(invalid(field, "SNR must be a number of dB or \"inf\""));
                    }
                }
                ExperimentKind::TrainSweep => {
                    if !(x >= 1.0 && x.fract() == 0.0 && x.is_finite()) {
                        return Err(invalid(
                            field,
                            format!("training length must be a positive integer, got {x}"),
                        ));
                    }
                    if i > 0 && x <= exp.grid[i - 1] {
                        return Err(invalid(field, "training lengths must be strictly ascending"));
                    }
                }
            }
        }
        let longest = match exp.kind {
            ExperimentKind::TrainSweep => self.train_grid().last().copied().unwrap_or(0),
            _ => exp.train_length,
        };
        if exp.n_symbols <= longest + warmup {
            return Err(invalid(
                "experiment.n_symbols",
                format!(
                    "{} symbols leave no test data after {longest} training symbols",
                    exp.n_symbols
                ),
            ));
        }
        if self.output.path.as_os_str().is_empty() {
            return Err(invalid("output.path", "must not be empty"));
        }
        Ok(())
    }

    /// Fills every optional hyperparameter with its default so the
    /// serialized config is complete.
    fn resolve(&mut self) {
        for e in &mut self.equalizers {
            let h = &mut e.hyperparams;
            match e.kind {
                EqualizerKindName::Svm => {
                    let d = SvmParams::default();
                    h.lambda.get_or_insert(d.lambda);
                    h.epochs.get_or_insert(d.epochs);
                    h.seed.get_or_insert(d.seed);
                    h.solver.get_or_insert(d.solver);
                }
                EqualizerKindName::FfeDfe => {
                    let d = LmsParams::default();
                    h.step.get_or_insert(d.step);
                    h.epochs.get_or_insert(d.epochs);
                }
                EqualizerKindName::Slicer => {}
            }
            if e.name.is_none() {
                e.name = Some(e.spec().name);
            }
        }
    }

    pub fn tx_config(&self) -> TxConfig {
        TxConfig {
            prbs_seed: self.tx.prbs_seed,
            rolloff: self.tx.rolloff,
            span_symbols: self.tx.span_symbols,
            sps: self.tx.sps,
        }
    }

    pub fn channel_config(&self) -> ChannelConfig {
        let c = &self.channel;
        ChannelConfig {
            f3db_norm: c.f3db_norm,
            snr_db: c.snr_db,
            nonlinearity: c.nonlinearity,
            timing_offset: c.timing_offset,
            rng_seed: 0,
            matched_filter: c.matched_filter,
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            tx: self.tx_config(),
            channel: self.channel_config(),
            n_symbols: self.experiment.n_symbols,
            train_length: self.experiment.train_length,
        }
    }

    pub fn equalizer_specs(&self) -> Vec<EqualizerSpec> {
        self.equalizers.iter().map(EqualizerEntry::spec).collect()
    }

    pub fn snr_grid(&self) -> Vec<f64> {
        if self.experiment.grid.is_empty() {
            DEFAULT_SNR_GRID.to_vec()
        } else {
            self.experiment.grid.clone()
        }
    }

    pub fn train_grid(&self) -> Vec<usize> {
        let grid: &[f64] = if self.experiment.grid.is_empty() {
            &DEFAULT_TRAIN_GRID
        } else {
            &self.experiment.grid
        };
        grid.iter().map(|&x| x as usize).collect()
    }
}

impl EqualizerEntry {
    pub fn taps(&self) -> EqTapConfig {
        match self.kind {
            EqualizerKindName::Slicer => EqTapConfig {
                ffe_taps: 1,
                dfe_taps: 0,
            },
            _ => EqTapConfig {
                ffe_taps: self.ffe_taps,
                dfe_taps: self.dfe_taps,
            },
        }
    }

    pub fn spec(&self) -> EqualizerSpec {
        let h = &self.hyperparams;
        let mut spec = match self.kind {
            EqualizerKindName::Svm => {
                let d = SvmParams::default();
                EqualizerSpec::svm(
                    self.taps(),
                    SvmParams {
                        lambda: h.lambda.unwrap_or(d.lambda),
                        epochs: h.epochs.unwrap_or(d.epochs),
                        seed: h.seed.unwrap_or(d.seed),
                        solver: h.solver.unwrap_or(d.solver),
                    },
                )
            }
            EqualizerKindName::FfeDfe => {
                let d = LmsParams::default();
                EqualizerSpec::ffe_dfe(
                    self.taps(),
                    LmsParams {
                        step: h.step.unwrap_or(d.step),
                        epochs: h.epochs.unwrap_or(d.epochs),
                    },
                )
            }
            EqualizerKindName::Slicer => EqualizerSpec::slicer(),
        };
        if let Some(name) = &self.name {
            spec.name = name.clone();
        }
        spec
    }

    fn validate(&self, at: &str) -> Result<(), CliError> {
        let h = &self.hyperparams;
        let foreign: &[(&str, bool)] = match self.kind {
            EqualizerKindName::Svm => &[("step", h.step.is_some())],
            EqualizerKindName::FfeDfe => &[
                ("lambda", h.lambda.is_some()),
                ("seed", h.seed.is_some()),
                ("solver", h.solver.is_some()),
            ],
            EqualizerKindName::Slicer => &[
                ("lambda", h.lambda.is_some()),
                ("epochs", h.epochs.is_some()),
                ("seed", h.seed.is_some()),
                ("solver", h.solver.is_some()),
                ("step", h.step.is_some()),
            ],
        };
        if let Some((key, _)) = foreign.iter().find(|(_, set)| *set) {
            return Err(invalid(
                format!("{at}.hyperparams.{key}"),
                format!("not a hyperparameter of {:?} equalizers", self.kind),
            ));
        }
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains([',', '\n', '"']) {
                return Err(invalid(
                    format!("{at}.name"),
                    "must be nonempty without commas or quotes",
                ));
            }
        }
        if self.kind != EqualizerKindName::Slicer && (self.ffe_taps == 0 || self.ffe_taps.is_multiple_of(2)) {
            return Err(invalid(
                format!("{at}.ffe_taps"),
                format!("ffe_taps must be odd, got {}", self.ffe_taps),
            ));
        }
        let spec = self.spec();
        let check = match spec.kind {
            crate::metrics::EqualizerKind::Svm(p) => p.validate(),
            crate::metrics::EqualizerKind::FfeDfe(p) => p.validate(),
            crate::metrics::EqualizerKind::Slicer => Ok(()),
        };
        check.map_err(|e| {
            let key = match e.to_string() {
                m if m.contains("lambda") => "lambda",
                m if m.contains("epochs") => "epochs",
                _ => "step",
            };
            invalid(format!("{at}.hyperparams.{key}"), e.to_string())
        })
    }
}
