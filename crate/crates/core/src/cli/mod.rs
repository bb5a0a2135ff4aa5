//! Command-line front end: loads a scenario config, runs one experiment and
//! writes results, a reproducibility manifest and trained models.

mod config;

pub use config::{
    apply_override, load_config, parse_config, ChannelSection, EqualizerEntry, EqualizerKindName, ExperimentKind,
    ExperimentSection, Hyperparams, OutputFormat, OutputSection, ScenarioConfig, TxSection, DEFAULT_SNR_GRID,
    DEFAULT_TRAIN_GRID,
};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::channel::{self, snr_serde, ChannelConfig};
use crate::equalizers::{build_train_features, svm_equalize, svm_train, SvmModel};
use crate::metrics::{self, count_errors, EqualizerKind, EqualizerSpec, SweepPoint, XKind};
use crate::txgen;

/// Exit status for configuration problems (unreadable, malformed or invalid).
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for failures while running an experiment.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {}: {source}", path.display())]
    ConfigIo { path: PathBuf, source: std::io::Error },

    #[error("{}:{line}:{column}: malformed config: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("bad override {assignment:?}: {message}")]
    Override { assignment: String, message: String },

    #[error("cannot read model {}: {message}", path.display())]
    Model { path: PathBuf, message: String },

    #[error(transparent)]
    Run(#[from] crate::Error),

    #[error("cannot write {}: {source}", path.display())]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigIo { .. }
            | CliError::Parse { .. }
            | CliError::Validation { .. }
            | CliError::Override { .. } => EXIT_CONFIG,
            CliError::Model { .. } | CliError::Run(_) | CliError::Output { .. } => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pam4eq",
    version,
    about = "PAM4 link simulator with SVM and FFE/DFE equalizers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario config file (JSON).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output file; overrides `output.path` from the config.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Config override applied after loading, e.g. `channel.snr_db=inf`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Maximum worker threads.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Added to every seed in the config.
    #[arg(long, value_name = "K", default_value_t = 0)]
    pub seed_offset: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One realization per seed at `channel.snr_db`.
    Simulate(CommonArgs),
    /// BER versus SNR over `experiment.grid`.
    SweepSnr(CommonArgs),
    /// BER versus training length over `experiment.grid`.
    SweepTrain(CommonArgs),
    /// Train the first SVM equalizer on the first seed and save it as JSON.
    TrainModel(CommonArgs),
    /// Evaluate a saved SVM model at `channel.snr_db` on every seed.
    EvalModel {
        #[command(flatten)]
        common: CommonArgs,
        /// Model file written by `train-model`.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate(c) | Command::SweepSnr(c) | Command::SweepTrain(c) | Command::TrainModel(c) => c,
            Command::EvalModel { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::SweepSnr(_) => "sweep-snr",
            Command::SweepTrain(_) => "sweep-train",
            Command::TrainModel(_) => "train-model",
            Command::EvalModel { .. } => "eval-model",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamRecord {
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub seed: u64,
    pub hash: String,
}

/// Everything needed to rerun a command and get the same output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_path: PathBuf,
    pub overrides: Vec<String>,
    pub config: ScenarioConfig,
    pub seed_offset: u64,
    pub seeds: Vec<u64>,
    pub equalizers: Vec<EqualizerSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    pub output: PathBuf,
    pub stream_hashes: Vec<StreamRecord>,
}

/// Files written by a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub output: PathBuf,
    pub manifest: PathBuf,
}

/// Manifest path for an output file: `results.csv` -> `results.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status, reporting errors on standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(out) => {
            log::info!("wrote {} and {}", out.output.display(), out.manifest.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: &Command) -> Result<RunOutput, CliError> {
    let common = command.common();
    let config = load_config(&common.config, &common.overrides)?;
    let seeds: Vec<u64> = config
        .experiment
        .seeds
        .iter()
        .map(|s| s.wrapping_add(common.seed_offset))
        .collect();
    let require_kind = |kind: ExperimentKind| {
        if config.experiment.kind == kind {
            Ok(())
        } else {
            Err(CliError::Validation {
                field: "experiment.kind".into(),
                message: format!(
                    "`{}` needs kind {kind:?}, config has {:?}",
                    command.name(),
                    config.experiment.kind
                ),
            })
        }
    };

    let mut model_path = None;
    let (output, stream_hashes) = match command {
        Command::Simulate(_) => {
            let point = metrics::simulate(&config.scenario(), &config.equalizer_specs(), &seeds, common.jobs)?;
            let points = vec![point];
            let out = results_path(&config, common);
            write_results(&points, config.output.format, &out)?;
            (out, hashes_of(&points))
        }
        Command::SweepSnr(_) => {
            require_kind(ExperimentKind::SnrSweep)?;
            let points = metrics::sweep_snr(
                &config.scenario(),
                &config.snr_grid(),
                &config.equalizer_specs(),
                &seeds,
                common.jobs,
            )?;
            let out = results_path(&config, common);
            write_results(&points, config.output.format, &out)?;
            (out, hashes_of(&points))
        }
        Command::SweepTrain(_) => {
            require_kind(ExperimentKind::TrainSweep)?;
            let points = metrics::sweep_training_length(
                &config.scenario(),
                &config.train_grid(),
                &config.equalizer_specs(),
                &seeds,
                common.jobs,
            )?;
            let out = results_path(&config, common);
            write_results(&points, config.output.format, &out)?;
            let snr = config.channel.snr_db;
            let mut hashes = hashes_of(&points);
            for h in &mut hashes {
                h.snr_db = snr;
            }
            hashes.dedup();
            (out, hashes)
        }
        Command::TrainModel(_) => train_model(&config, common, seeds[0])?,
        Command::EvalModel { model, .. } => {
            model_path = Some(model.clone());
            eval_model(&config, common, model, &seeds)?
        }
    };

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        config_path: common.config.clone(),
        overrides: common.overrides.clone(),
        config: config.clone(),
        seed_offset: common.seed_offset,
        seeds,
        equalizers: config.equalizer_specs(),
        model_path,
        output: output.clone(),
        stream_hashes,
    };
    let manifest_file = manifest_path(&output);
    write_file(&manifest_file, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest).map_err(std::io::Error::from)?;
        writeln!(w)
    })?;
    Ok(RunOutput {
        output,
        manifest: manifest_file,
    })
}

fn results_path(config: &ScenarioConfig, common: &CommonArgs) -> PathBuf {
    common.out.clone().unwrap_or_else(|| config.output.path.clone())
}

fn hashes_of(points: &[SweepPoint]) -> Vec<StreamRecord> {
    points
        .iter()
        .flat_map(|p| {
            p.runs.iter().map(move |r| StreamRecord {
                snr_db: p.x_value,
                seed: r.seed,
                hash: r.stream_hash.clone(),
            })
        })
        .collect()
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let wrap = |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(wrap)?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
    body(&mut w).map_err(wrap)?;
    w.flush().map_err(wrap)
}

fn write_results(points: &[SweepPoint], format: OutputFormat, path: &Path) -> Result<(), CliError> {
    write_file(path, |w| match format {
        OutputFormat::Csv => metrics::write_csv(points, w),
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *w, points).map_err(std::io::Error::from)?;
            writeln!(w)
        }
    })
}

fn link_for(config: &ScenarioConfig, seed: u64) -> Result<(txgen::SymbolFrame, channel::ReceivedSymbols), CliError> {
    let tx = config.tx_config();
    let frame = txgen::prbs_frame(tx.prbs_seed, config.experiment.n_symbols)?;
    let ch = ChannelConfig {
        rng_seed: seed,
        ..config.channel_config()
    };
    let rx = channel::run_link(&frame, &tx, &ch)?;
    Ok((frame, rx))
}

fn train_model(
    config: &ScenarioConfig,
    common: &CommonArgs,
    seed: u64,
) -> Result<(PathBuf, Vec<StreamRecord>), CliError> {
    let spec = config
        .equalizer_specs()
        .into_iter()
        .find(|s| matches!(s.kind, EqualizerKind::Svm(_)))
        .ok_or_else(|| CliError::Validation {
            field: "equalizers".into(),
            message: "train-model needs an svm equalizer".into(),
        })?;
    let EqualizerKind::Svm(params) = spec.kind else {
        unreachable!("filtered above")
    };
    let (frame, rx) = link_for(config, seed)?;
    let n_train = config.experiment.train_length;
    let (features, labels) = build_train_features(&rx.slice(0..n_train), &frame.slice(0..n_train), &spec.taps)?;
    let params = crate::equalizers::SvmParams {
        seed: params.seed.wrapping_add(seed),
        ..params
    };
    let model = svm_train(&features, &labels, &params)?;
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| config.output.path.with_extension("model.json"));
    write_file(&out, |w| {
        w.write_all(model.to_json().as_bytes())?;
        writeln!(w)
    })?;
    let record = StreamRecord {
        snr_db: config.channel.snr_db,
        seed,
        hash: rx.stream_hash(),
    };
    Ok((out, vec![record]))
}

fn eval_model(
    config: &ScenarioConfig,
    common: &CommonArgs,
    model_path: &Path,
    seeds: &[u64],
) -> Result<(PathBuf, Vec<StreamRecord>), CliError> {
    let model_err = |message: String| CliError::Model {
        path: model_path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(model_path).map_err(|e| model_err(e.to_string()))?;
    let model = SvmModel::from_json(&text).map_err(|e| model_err(e.to_string()))?;
    let name = format!("svm_model_{}_{}", model.config.ffe_taps, model.config.dfe_taps);
    let n_train = config.experiment.train_length;
    let n = config.experiment.n_symbols;
    let skip = model.config.warmup();

    let mut point = SweepPoint {
        x_kind: XKind::Single,
        x_value: config.channel.snr_db,
        seeds: seeds.to_vec(),
        runs: Vec::new(),
    };
    for &seed in seeds {
        let (frame, rx) = link_for(config, seed)?;
        let decided = svm_equalize(&rx.slice(n_train..n), &model)?;
        let ber = count_errors(&decided, &frame.slice(n_train..n), skip)?;
        let hash = rx.stream_hash();
        point.runs.push(metrics::SeedRun {
            seed,
            stream_hash: hash.clone(),
            outcomes: vec![metrics::EqOutcome {
                equalizer: name.clone(),
                ber,
                stream_hash: hash,
                warnings: Vec::new(),
            }],
        });
    }
    point.runs.sort_by_key(|r| r.seed);
    let points = vec![point];
    let out = results_path(config, common);
    write_results(&points, config.output.format, &out)?;
    Ok((out, hashes_of(&points)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let v = CliError::Validation {
            field: "x".into(),
            message: "y".into(),
        };
        assert_eq!(v.exit_code(), EXIT_CONFIG);
        assert_eq!(CliError::Run(crate::Error::EmptyFilter).exit_code(), EXIT_RUNTIME);
    }

    #[test]
    fn manifest_next_to_output() {
        assert_eq!(manifest_path(Path::new("out/r.csv")), Path::new("out/r.manifest.json"));
        assert_eq!(manifest_path(Path::new("r")), Path::new("r.manifest.json"));
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from([
            "pam4eq",
            "sweep-snr",
            "--config",
            "c.json",
            "--set",
            "a=1",
            "--set",
            "b=2",
            "--jobs",
            "2",
            "--seed-offset",
            "7",
        ])
        .unwrap();
        let c = cli.command.common();
        assert_eq!(c.overrides, ["a=1", "b=2"]);
        assert_eq!((c.jobs, c.seed_offset), (Some(2), 7));
        assert!(Cli::try_parse_from(["pam4eq", "eval-model", "--config", "c.json"]).is_err());
    }
}
