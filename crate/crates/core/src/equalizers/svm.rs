//! Linear SVM equalizer.
//!
//! Four PAM4 levels are separated by three ordinal hyperplanes: plane `j`
//! splits `{level <= j}` from `{level > j}` and the decision is the number of
//! planes with a strictly positive margin. Each plane minimizes
//!
//! ```text
//! lambda/2 * |w|^2 + 1/N * sum_i max(0, 1 - y_i (w . x_i + b))
//! ```
//!
//! Two solvers are available. [`SvmSolver::DualCd`] runs randomized dual
//! coordinate descent on the box-constrained dual, with the bias carried as
//! an extra feature of constant value [`BIAS_FEATURE`] (so the bias is
//! regularized with weight `1 / BIAS_FEATURE^2`). [`SvmSolver::Pegasos`] is
//! the stochastic subgradient method with the `1 / (lambda t)` schedule,
//! projection onto `|w| <= sqrt(2/lambda)` and suffix averaging; its bias is
//! unregularized.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ReceivedSymbols;
use crate::error::{Error, Result};
use crate::txgen::{SymbolFrame, ALPHABET};

use super::features::{fill_feature, FeatureMatrix};
use super::EqTapConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Hyperplane {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b
    }
}

/// Constant appended to every feature vector by the dual solver.
pub const BIAS_FEATURE: f64 = 10.0;

/// Dual solver stops early once the projected-gradient spread of an epoch
/// falls below this.
const DUAL_TOLERANCE: f64 = 1e-4;

/// Coordinate-step budget floor for the dual solver on small training sets.
pub const MIN_DUAL_UPDATES: usize = 100_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvmSolver {
    #[default]
    DualCd,
    Pegasos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// L2 weight of the hinge objective.
    pub lambda: f64,
    /// Passes over the training set; the dual solver may stop earlier.
    pub epochs: usize,
    /// Seeds the visiting order.
    pub seed: u64,
    pub solver: SvmSolver,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            lambda: 3e-3,
            epochs: 200,
            seed: 1,
            solver: SvmSolver::DualCd,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub train_length: usize,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SvmSolver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmModel {
    pub planes: Vec<Hyperplane>,
    pub config: EqTapConfig,
    pub training_meta: TrainingMeta,
}

/// Decision boundaries of a trained model are not ordered along the cursor.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalWarning {
    pub boundaries: [f64; 3],
}

impl std::fmt::Display for OrdinalWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ordinal boundaries out of order: {:?}", self.boundaries)
    }
}

impl SvmModel {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.planes.len() != 3 {
            return Err(Error::Dimension {
                expected: 3,
                actual: self.planes.len(),
            });
        }
        for p in &self.planes {
            if p.w.len() != self.config.dim() {
                return Err(Error::Dimension {
                    expected: self.config.dim(),
                    actual: p.w.len(),
                });
            }
        }
        Ok(())
    }

    /// Boundaries `-b_j / w_j` projected on the cursor (centre FFE) weight.
    pub fn cursor_boundaries(&self) -> [f64; 3] {
        let c = self.config.half_window();
        std::array::from_fn(|j| -self.planes[j].b / self.planes[j].w[c])
    }

    /// Flags models whose cursor-projected boundaries are not nondecreasing.
    pub fn check_ordinal(&self) -> Option<OrdinalWarning> {
        let boundaries = self.cursor_boundaries();
        let ordered = boundaries.windows(2).all(|p| p[0] <= p[1])
            && self.planes.iter().all(|p| p.w[self.config.half_window()] > 0.0);
        (!ordered).then_some(OrdinalWarning { boundaries })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let model: SvmModel = serde_json::from_str(text).map_err(|e| e.to_string())?;
        model.validate().map_err(|e| e.to_string())?;
        Ok(model)
    }
}

/// Regularized hinge objective of a binary plane on `(x_i, y_i)` rows.
pub fn hinge_objective(plane: &Hyperplane, rows: &[&[f64]], targets: &[f64], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * plane.w.iter().map(|w| w * w).sum::<f64>();
    let loss: f64 = rows
        .iter()
        .zip(targets)
        .map(|(x, y)| (1.0 - y * plane.margin(x)).max(0.0))
        .sum();
    reg + loss / rows.len() as f64
}

/// Trains one max-margin plane on rows with targets in `{-1, +1}`.
pub fn train_binary(rows: &[&[f64]], targets: &[f64], params: &SvmParams) -> Result<Hyperplane> {
    params.validate()?;
    if rows.is_empty() {
        return Err(Error::TooShort("no training rows".into()));
    }
    if rows.len() != targets.len() {
        return Err(Error::Alignment(format!(
            "{} rows vs {} targets",
            rows.len(),
            targets.len()
        )));
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            actual: bad.len(),
        });
    }
    Ok(match params.solver {
        SvmSolver::DualCd => dual_cd(rows, targets, params),
        SvmSolver::Pegasos => pegasos(rows, targets, params),
    })
}

/// Dual coordinate descent for the hinge loss with box `0 <= alpha_i <= C`,
/// `C = 1 / (lambda N)`, maintaining `w = sum_i alpha_i y_i x_i`.
///
/// Runs `epochs` passes, or more on small sets so that at least
/// [`MIN_DUAL_UPDATES`] coordinate steps are taken; stops early once the
/// projected-gradient spread drops below the tolerance.
fn dual_cd(rows: &[&[f64]], targets: &[f64], params: &SvmParams) -> Hyperplane {
    let dim = rows[0].len();
    let c = 1.0 / (params.lambda * rows.len() as f64);
    let q: Vec<f64> = rows.iter().map(|x| dot(x, x) + BIAS_FEATURE * BIAS_FEATURE).collect();
    let mut alpha = vec![0.0; rows.len()];
    let mut w = vec![0.0; dim];
    // bias weight; the effective bias is wb * BIAS_FEATURE
    let mut wb = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let passes = params.epochs.max(MIN_DUAL_UPDATES.div_ceil(rows.len()));

    for _ in 0..passes {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let (x, y) = (rows[i], targets[i]);
            let g = y * (dot(&w, x) + wb * BIAS_FEATURE) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 && q[i] > 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, c);
                let delta = (alpha[i] - old) * y;
                for (wk, xk) in w.iter_mut().zip(x) {
                    *wk += delta * xk;
                }
                wb += delta * BIAS_FEATURE;
            }
        }
        if pg_max - pg_min < DUAL_TOLERANCE {
            break;
        }
    }
    Hyperplane {
        w,
        b: wb * BIAS_FEATURE,
    }
}

fn pegasos(rows: &[&[f64]], targets: &[f64], params: &SvmParams) -> Hyperplane {
    let dim = rows[0].len();
    let lambda = params.lambda;
    let radius = (2.0 / lambda).sqrt();
    let total = params.epochs * rows.len();
    let avg_from = total / 2;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut w_avg = vec![0.0; dim];
    let mut b_avg = 0.0;
    let mut averaged = 0usize;
    let mut t = 0usize;

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let (x, y) = (rows[i], targets[i]);
            let margin = y * (dot(&w, x) + b);
            let shrink = 1.0 - eta * lambda;
            if margin < 1.0 {
                for (wk, xk) in w.iter_mut().zip(x) {
                    *wk = shrink * *wk + eta * y * xk;
                }
                b += eta * y;
            } else {
                w.iter_mut().for_each(|wk| *wk *= shrink);
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|wk| *wk *= s);
            }
            if t > avg_from {
                averaged += 1;
                let a = 1.0 / averaged as f64;
                for (ak, wk) in w_avg.iter_mut().zip(&w) {
                    *ak += a * (wk - *ak);
                }
                b_avg += a * (b - b_avg);
            }
        }
    }
    Hyperplane { w: w_avg, b: b_avg }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains the three ordinal planes.
pub fn svm_train(features: &FeatureMatrix, levels: &[u8], params: &SvmParams) -> Result<SvmModel> {
    params.validate()?;
    if features.rows != levels.len() {
        return Err(Error::Alignment(format!(
            "{} feature rows vs {} labels",
            features.rows,
            levels.len()
        )));
    }
    for level in 0..4u8 {
        if !levels.contains(&level) {
            return Err(Error::DegenerateTrainingSet(level));
        }
    }
    let rows: Vec<&[f64]> = features.iter_rows().collect();
    let planes = (0..3u8)
        .map(|j| {
            let targets: Vec<f64> = levels.iter().map(|&l| if l > j { 1.0 } else { -1.0 }).collect();
            let plane_params = SvmParams {
                seed: params.seed.wrapping_add(j as u64),
                ..*params
            };
            train_binary(&rows, &targets, &plane_params)
        })
        .collect::<Result<Vec<_>>>()?;
    let model = SvmModel {
        planes,
        config: features.config,
        training_meta: TrainingMeta {
            train_length: features.rows,
            lambda: params.lambda,
            epochs: params.epochs,
            seed: params.seed,
            solver: params.solver,
        },
    };
    if let Some(w) = model.check_ordinal() {
        log::warn!("SVM model quality: {w}");
    }
    Ok(model)
}

/// Number of planes with a strictly positive margin.
pub fn svm_classify(fv: &[f64], model: &SvmModel) -> Result<u8> {
    if fv.len() != model.config.dim() {
        return Err(Error::Dimension {
            expected: model.config.dim(),
            actual: fv.len(),
        });
    }
    Ok(classify_unchecked(fv, model))
}

fn classify_unchecked(fv: &[f64], model: &SvmModel) -> u8 {
    model.planes.iter().filter(|p| p.margin(fv) > 0.0).count() as u8
}

/// Decision-directed equalization: the feedback slots carry the model's own
/// previous decisions.
pub fn svm_equalize(rx: &ReceivedSymbols, model: &SvmModel) -> Result<SymbolFrame> {
    run_svm(rx, model, None)
}

/// Diagnostic variant whose feedback slots carry the true symbols.
pub fn svm_equalize_genie(rx: &ReceivedSymbols, model: &SvmModel, truth: &SymbolFrame) -> Result<SymbolFrame> {
    super::check_aligned(rx, truth)?;
    run_svm(rx, model, Some(truth))
}

fn run_svm(rx: &ReceivedSymbols, model: &SvmModel, genie: Option<&SymbolFrame>) -> Result<SymbolFrame> {
    model.validate()?;
    let cfg = model.config;
    if rx.len() <= cfg.half_window() {
        return Err(Error::TooShort(format!(
            "{} symbols for a {}-tap FFE window",
            rx.len(),
            cfg.ffe_taps
        )));
    }
    let n = cfg.dfe_taps;
    let mut levels = Vec::with_capacity(rx.len());
    let mut feedback = vec![0.0; n];
    let mut fv = vec![0.0; cfg.dim()];
    for k in 0..rx.len() {
        fill_feature(&rx.values, k, &cfg, &feedback, &mut fv);
        let level = classify_unchecked(&fv, model);
        levels.push(level);
        if n > 0 {
            feedback.rotate_right(1);
            feedback[0] = match genie {
                Some(truth) => truth.symbols[k],
                None => ALPHABET[level as usize],
            };
        }
    }
    Ok(SymbolFrame::from_levels(levels))
}
