use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelConfig, ReceivedSymbols};
use crate::equalizers::{
    build_train_features, lms_equalize, lms_train, slicer_equalize, svm_equalize, svm_train, EqTapConfig, LmsParams,
    SvmParams,
};
use crate::error::{Error, Result};
use crate::txgen::{self, SymbolFrame, TxConfig};

use super::{count_errors, BerResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EqualizerKind {
    Svm(SvmParams),
    FfeDfe(LmsParams),
    Slicer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualizerSpec {
    pub name: String,
    pub taps: EqTapConfig,
    pub kind: EqualizerKind,
}

impl EqualizerSpec {
    pub fn svm(taps: EqTapConfig, params: SvmParams) -> Self {
        Self {
            name: format!("svm_{}_{}", taps.ffe_taps, taps.dfe_taps),
            taps,
            kind: EqualizerKind::Svm(params),
        }
    }

    pub fn ffe_dfe(taps: EqTapConfig, params: LmsParams) -> Self {
        Self {
            name: format!("ffe_dfe_{}_{}", taps.ffe_taps, taps.dfe_taps),
            taps,
            kind: EqualizerKind::FfeDfe(params),
        }
    }

    pub fn slicer() -> Self {
        Self {
            name: "slicer".into(),
            taps: EqTapConfig {
                ffe_taps: 1,
                dfe_taps: 0,
            },
            kind: EqualizerKind::Slicer,
        }
    }
}

/// One link scenario. The sweep drivers override `channel.snr_db` and
/// `channel.rng_seed` per work unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tx: TxConfig,
    pub channel: ChannelConfig,
    pub n_symbols: usize,
    pub train_length: usize,
}

impl Scenario {
    fn validate(&self) -> Result<()> {
        self.tx.validate()?;
        self.channel.validate(self.tx.sps)
    }

    fn frame(&self) -> Result<SymbolFrame> {
        txgen::prbs_frame(self.tx.prbs_seed, self.n_symbols)
    }

    fn link(&self, frame: &SymbolFrame, snr_db: f64, seed: u64) -> Result<ReceivedSymbols> {
        let ch = ChannelConfig {
            snr_db,
            rng_seed: seed,
            ..self.channel.clone()
        };
        channel::run_link(frame, &self.tx, &ch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XKind {
    SnrDb,
    TrainLength,
    Single,
}

impl XKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            XKind::SnrDb => "snr_db",
            XKind::TrainLength => "train_length",
            XKind::Single => "single",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqOutcome {
    pub equalizer: String,
    pub ber: BerResult,
    /// Hash of the received stream this equalizer was trained and tested on.
    pub stream_hash: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub stream_hash: String,
    pub outcomes: Vec<EqOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x_kind: XKind,
    #[serde(with = "crate::channel::snr_serde")]
    pub x_value: f64,
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedRun>,
}

impl SweepPoint {
    /// Counts pooled over all seeds for one equalizer.
    pub fn aggregate(&self, equalizer: &str) -> Option<BerResult> {
        self.runs
            .iter()
            .flat_map(|r| r.outcomes.iter())
            .filter(|o| o.equalizer == equalizer)
            .map(|o| o.ber)
            .reduce(|a, b| a.merge(&b))
    }

    pub fn aggregates(&self) -> BTreeMap<String, BerResult> {
        let mut out: BTreeMap<String, BerResult> = BTreeMap::new();
        for o in self.runs.iter().flat_map(|r| r.outcomes.iter()) {
            out.entry(o.equalizer.clone())
                .and_modify(|b| *b = b.merge(&o.ber))
                .or_insert(o.ber);
        }
        out
    }
}

/// Trains `spec` on `rx[..train_length]` and counts errors on `test`, after
/// the equalizer's warm-up prefix.
pub fn evaluate_equalizer(
    spec: &EqualizerSpec,
    rx: &ReceivedSymbols,
    frame: &SymbolFrame,
    train_length: usize,
    test: Range<usize>,
    seed: u64,
) -> Result<EqOutcome> {
    if test.end > rx.len() || test.is_empty() {
        return Err(Error::TooShort(format!(
            "test range {test:?} outside {} received symbols",
            rx.len()
        )));
    }
    if train_length > rx.len() {
        return Err(Error::TooShort(format!(
            "train_length {train_length} exceeds {} received symbols",
            rx.len()
        )));
    }
    let test_rx = rx.slice(test.clone());
    let truth = frame.slice(test);
    let mut warnings = Vec::new();
    let decided = match spec.kind {
        EqualizerKind::Slicer => slicer_equalize(&test_rx),
        EqualizerKind::Svm(params) => {
            let (features, labels) =
                build_train_features(&rx.slice(0..train_length), &frame.slice(0..train_length), &spec.taps)?;
            let params = SvmParams {
                seed: params.seed.wrapping_add(seed),
                ..params
            };
            let model = svm_train(&features, &labels, &params)?;
            if let Some(w) = model.check_ordinal() {
                warnings.push(w.to_string());
            }
            svm_equalize(&test_rx, &model)?
        }
        EqualizerKind::FfeDfe(params) => {
            let trained = lms_train(rx, frame, &spec.taps, train_length, &params)?;
            if let Some(w) = trained.warning {
                warnings.push(format!(
                    "LMS nonconvergence: windowed MSE {:e} -> {:e}",
                    w.initial_mse, w.final_mse
                ));
            }
            lms_equalize(&test_rx, &trained.model)?
        }
    };
    let skip = spec.taps.warmup().min(truth.len() - 1);
    Ok(EqOutcome {
        equalizer: spec.name.clone(),
        ber: count_errors(&decided, &truth, skip)?,
        stream_hash: rx.stream_hash(),
        warnings,
    })
}

fn check_specs(equalizers: &[EqualizerSpec]) -> Result<()> {
    if equalizers.is_empty() {
        return Err(Error::InvalidParameter("no equalizers given".into()));
    }
    let mut names: Vec<&str> = equalizers.iter().map(|e| e.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter(format!("duplicate equalizer name {:?}", w[0])));
    }
    for e in equalizers {
        e.taps.validate()?;
        match e.kind {
            EqualizerKind::Svm(p) => p.validate()?,
            EqualizerKind::FfeDfe(p) => p.validate()?,
            EqualizerKind::Slicer => {}
        }
    }
    Ok(())
}

fn run_seed(
    equalizers: &[EqualizerSpec],
    rx: &ReceivedSymbols,
    frame: &SymbolFrame,
    train_length: usize,
    test: Range<usize>,
    seed: u64,
) -> Result<SeedRun> {
    let outcomes = equalizers
        .iter()
        .map(|spec| evaluate_equalizer(spec, rx, frame, train_length, test.clone(), seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedRun {
        seed,
        stream_hash: rx.stream_hash(),
        outcomes,
    })
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

fn warn_low_confidence(points: &[SweepPoint]) {
    for p in points {
        for run in &p.runs {
            for o in run.outcomes.iter().filter(|o| o.ber.low_confidence()) {
                log::warn!(
                    "low confidence: {}={} seed {} {}: only {} bit errors",
                    p.x_kind.as_str(),
                    p.x_value,
                    run.seed,
                    o.equalizer,
                    o.ber.bit_errors
                );
            }
        }
    }
}

fn check_split(scenario: &Scenario, equalizers: &[EqualizerSpec], train_length: usize) -> Result<()> {
    let warmup = equalizers.iter().map(|e| e.taps.warmup()).max().unwrap_or(0);
    if scenario.n_symbols <= train_length + warmup {
        return Err(Error::TooShort(format!(
            "{} symbols leave no test data after {train_length} training symbols",
            scenario.n_symbols
        )));
    }
    Ok(())
}

/// Paired BER-versus-SNR sweep.
///
/// Every (SNR, seed) unit runs the link once; all equalizers are trained on
/// the first `train_length` symbols of that same stream and tested on the
/// rest. Units run in parallel; output is ordered by SNR then seed.
pub fn sweep_snr(
    scenario: &Scenario,
    grid: &[f64],
    equalizers: &[EqualizerSpec],
    seeds: &[u64],
    jobs: Option<usize>,
) -> Result<Vec<SweepPoint>> {
    scenario.validate()?;
    check_specs(equalizers)?;
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidGrid("SNR grid and seed list must be nonempty".into()));
    }
    if let Some(bad) = grid.iter().find(|s| s.is_nan() || **s == f64::NEG_INFINITY) {
        return Err(Error::InvalidGrid(format!("invalid SNR {bad}")));
    }
    check_split(scenario, equalizers, scenario.train_length)?;
    let frame = scenario.frame()?;
    let n = scenario.n_symbols;

    let units: Vec<(usize, u64)> = (0..grid.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let runs: Vec<SeedRun> = with_jobs(jobs, || {
        units
            .par_iter()
            .map(|&(i, seed)| {
                let rx = scenario.link(&frame, grid[i], seed)?;
                run_seed(
                    equalizers,
                    &rx,
                    &frame,
                    scenario.train_length,
                    scenario.train_length..n,
                    seed,
                )
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut points: Vec<SweepPoint> = grid
        .iter()
        .map(|&x| SweepPoint {
            x_kind: XKind::SnrDb,
            x_value: x,
            seeds: seeds.to_vec(),
            runs: Vec::new(),
        })
        .collect();
    for (&(i, _), run) in units.iter().zip(runs) {
        points[i].runs.push(run);
    }
    finish(&mut points);
    warn_low_confidence(&points);
    Ok(points)
}

fn finish(points: &mut [SweepPoint]) {
    points.sort_by(|a, b| a.x_value.total_cmp(&b.x_value));
    for p in points.iter_mut() {
        p.runs.sort_by_key(|r| r.seed);
        for r in p.runs.iter_mut() {
            r.outcomes.sort_by(|a, b| a.equalizer.cmp(&b.equalizer));
        }
    }
}

/// Training-length sweep at the scenario's SNR.
///
/// One link realization per seed; each equalizer is trained on the first `L`
/// symbols for every `L` in `grid` and always tested on the tail that follows
/// the largest `L`.
pub fn sweep_training_length(
    scenario: &Scenario,
    grid: &[usize],
    equalizers: &[EqualizerSpec],
    seeds: &[u64],
    jobs: Option<usize>,
) -> Result<Vec<SweepPoint>> {
    scenario.validate()?;
    check_specs(equalizers)?;
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidGrid("length grid and seed list must be nonempty".into()));
    }
    if grid.contains(&0) {
        return Err(Error::TooShort("training length 0".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid("training lengths must be strictly ascending".into()));
    }
    let longest = *grid.last().expect("nonempty");
    check_split(scenario, equalizers, longest)?;
    let frame = scenario.frame()?;
    let n = scenario.n_symbols;

    let streams: Vec<(u64, ReceivedSymbols)> = with_jobs(jobs, || {
        seeds
            .par_iter()
            .map(|&seed| Ok((seed, scenario.link(&frame, scenario.channel.snr_db, seed)?)))
            .collect::<Result<Vec<_>>>()
    })?;
    let units: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|i| (0..streams.len()).map(move |s| (i, s)))
        .collect();
    let runs: Vec<SeedRun> = with_jobs(jobs, || {
        units
            .par_iter()
            .map(|&(i, s)| {
                let (seed, rx) = &streams[s];
                run_seed(equalizers, rx, &frame, grid[i], longest..n, *seed)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut points: Vec<SweepPoint> = grid
        .iter()
        .map(|&l| SweepPoint {
            x_kind: XKind::TrainLength,
            x_value: l as f64,
            seeds: seeds.to_vec(),
            runs: Vec::new(),
        })
        .collect();
    for (&(i, _), run) in units.iter().zip(runs) {
        points[i].runs.push(run);
    }
    finish(&mut points);
    warn_low_confidence(&points);
    Ok(points)
}

/// Single realization per seed at the scenario's SNR.
pub fn simulate(
    scenario: &Scenario,
    equalizers: &[EqualizerSpec],
    seeds: &[u64],
    jobs: Option<usize>,
) -> Result<SweepPoint> {
    let mut points = sweep_snr(scenario, &[scenario.channel.snr_db], equalizers, seeds, jobs)?;
    let mut point = points.pop().expect("one grid point");
    point.x_kind = XKind::Single;
    Ok(point)
}

/// First SNR (or length) at which an equalizer's pooled BER falls to
/// `threshold`, interpolated linearly in `(x, log10 BER)`.
///
/// Zero-error points are floored at half a bit error. Returns `None` when
/// the curve never reaches the threshold.
pub fn threshold_crossing(curve: &[SweepPoint], threshold: f64, equalizer: &str) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = curve
        .iter()
        .filter_map(|p| {
            let b = p.aggregate(equalizer)?;
            let ber = if b.bit_errors == 0 {
                0.5 / b.bits_total.max(1) as f64
            } else {
                b.ber
            };
            Some((p.x_value, ber))
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let first = pts.first()?;
    if first.1 <= threshold {
        return Some(first.0);
    }
    pts.windows(2).find_map(|w| {
        let ((x0, b0), (x1, b1)) = (w[0], w[1]);
        if b0 > threshold && b1 <= threshold {
            if x1.is_infinite() {
                return Some(x0);
            }
            let (l0, l1, lt) = (b0.log10(), b1.log10(), threshold.log10());
            Some(x0 + (x1 - x0) * (l0 - lt) / (l0 - l1))
        } else {
            None
        }
    })
}
