//! Segmentation losses with analytic gradients with respect to predictions.
//!
//! Every loss takes a target vector `y` and a prediction vector `y_hat` and
//! returns the scalar value plus `dL/dy_hat`. Logarithms see `y_hat`
//! clamped to `[CLAMP_EPS, 1 - CLAMP_EPS]`; the gradient of those terms is
//! zero where the clamp is active. Overlap terms (dice, ECL, smooth L1) use
//! the unclamped prediction.

mod gradcheck;

pub use gradcheck::{finite_difference, gradient_check, gradient_suite, random_instance, GradCheck, SuiteConfig, SuiteRow};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Prediction clamp applied before any logarithm.
pub const CLAMP_EPS: f64 = 1e-7;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LossError {
    #[error("target and prediction lengths differ: {y} vs {y_hat}")]
    LengthMismatch { y: usize, y_hat: usize },
    #[error("loss inputs must be non-empty")]
    Empty,
    #[error("target entry {index} is {value}; targets must be finite and non-negative")]
    InvalidTarget { index: usize, value: f64 },
    #[error("prediction entry {index} is {value}; predictions must lie in [0, 1]")]
    InvalidPrediction { index: usize, value: f64 },
    #[error("target entry {index} is {value}; this loss needs binary targets")]
    NonBinaryTarget { index: usize, value: f64 },
    #[error("invalid loss configuration: {0}")]
    InvalidConfig(String),
}

/// Validated target/prediction pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTensor {
    y: Vec<f64>,
    y_hat: Vec<f64>,
}

impl LossTensor {
    pub fn new(y: Vec<f64>, y_hat: Vec<f64>) -> Result<Self, LossError> {
        if y.len() != y_hat.len() {
            return Err(LossError::LengthMismatch { y: y.len(), y_hat: y_hat.len() });
        }
        if y.is_empty() {
            return Err(LossError::Empty);
        }
        if let Some((index, &value)) = y.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(LossError::InvalidTarget { index, value });
        }
        if let Some((index, &value)) = y_hat.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(LossError::InvalidPrediction { index, value });
        }
        Ok(Self { y, y_hat })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn y_hat(&self) -> &[f64] {
        &self.y_hat
    }

    /// Same targets with a different prediction vector.
    pub fn with_prediction(&self, y_hat: Vec<f64>) -> Result<Self, LossError> {
        Self::new(self.y.clone(), y_hat)
    }

    fn require_binary(&self) -> Result<(), LossError> {
        match self.y.iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
            Some((index, &value)) => Err(LossError::NonBinaryTarget { index, value }),
            None => Ok(()),
        }
    }

    /// Clamped prediction and whether the clamp left it unchanged.
    fn clamped(&self, i: usize) -> (f64, bool) {
        let v = self.y_hat[i];
        let c = v.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
        (c, c == v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Focusing parameter.
    pub gamma: f64,
    /// Shift inside the Focal-v2 logarithm.
    pub beta: f64,
    /// Weight of cross-entropy in the contour loss.
    pub lambda_contour: f64,
    /// Weight of the edge constraint term.
    pub lambda_1: f64,
    /// Weight of the smooth L1 term in the localization loss.
    pub lambda_4: f64,
    /// Additive smoothing of the contour dice ratio.
    pub epsilon_dice: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { gamma: 2.0, beta: 1.0, lambda_contour: 1.0, lambda_1: 1.0, lambda_4: 1.0, epsilon_dice: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// `dL/dy_hat`, same length as the inputs.
    pub gradient: Vec<f64>,
    /// A conventional value was substituted (zero dice denominator, clamped log argument).
    pub degenerate: bool,
}

impl LossResult {
    fn plus(mut self, other: LossResult, weight: f64) -> LossResult {
        self.value += weight * other.value;
        for (g, o) in self.gradient.iter_mut().zip(other.gradient) {
            *g += weight * o;
        }
        self.degenerate |= other.degenerate;
        self
    }
}

/// `1 - 2 sum(y y_hat) / sum(y + y_hat)`; 0 (flagged) when the denominator is 0.
pub fn soft_dice(t: &LossTensor) -> LossResult {
    let n = t.len();
    let inter: f64 = t.y.iter().zip(&t.y_hat).map(|(y, p)| y * p).sum();
    let total: f64 = t.y.iter().zip(&t.y_hat).map(|(y, p)| y + p).sum();
    if total == 0.0 {
        return LossResult { value: 0.0, gradient: vec![0.0; n], degenerate: true };
    }
    let gradient = t.y.iter().map(|y| -2.0 * (y * total - inter) / (total * total)).collect();
    LossResult { value: 1.0 - 2.0 * inter / total, gradient, degenerate: false }
}

/// Per-pixel focal term `-(1 - h)^gamma ln h` and its derivative in `h`.
fn focal_term(h: f64, gamma: f64) -> (f64, f64) {
    let q = 1.0 - h;
    let ln = h.ln();
    let value = -q.powf(gamma) * ln;
    let slope = if gamma == 0.0 { 0.0 } else { gamma * q.powf(gamma - 1.0) * ln };
    (value, slope - q.powf(gamma) / h)
}

fn check_gamma(gamma: f64) -> Result<(), LossError> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(LossError::InvalidConfig(format!("gamma must be finite and >= 0, got {gamma}")))
    }
}

/// Mean focal loss on `p_i = y_i y_hat_i + (1 - y_i)(1 - y_hat_i)`; binary targets only.
pub fn focal_restated(t: &LossTensor, cfg: &LossConfig) -> Result<LossResult, LossError> {
    t.require_binary()?;
    check_gamma(cfg.gamma)?;
    let n = t.len() as f64;
    let mut value = 0.0;
    let mut gradient = Vec::with_capacity(t.len());
    for i in 0..t.len() {
        let (u, free) = t.clamped(i);
        let y = t.y[i];
        let p = y * u + (1.0 - y) * (1.0 - u);
        let (v, dv_dp) = focal_term(p, cfg.gamma);
        value += v;
        gradient.push(if free { dv_dp * (2.0 * y - 1.0) / n } else { 0.0 });
    }
    Ok(LossResult { value: value / n, gradient, degenerate: false })
}

/// Soft dice plus the restated focal loss.
pub fn focal_4ps(t: &LossTensor, cfg: &LossConfig) -> Result<LossResult, LossError> {
    Ok(soft_dice(t).plus(focal_restated(t, cfg)?, 1.0))
}

/// Summed binary cross-entropy `-sum[y ln y_hat + (1 - y) ln(1 - y_hat)]`.
pub fn bce(t: &LossTensor) -> LossResult {
    let mut value = 0.0;
    let mut gradient = Vec::with_capacity(t.len());
    for i in 0..t.len() {
        let (u, free) = t.clamped(i);
        let y = t.y[i];
        value -= y * u.ln() + (1.0 - y) * (1.0 - u).ln();
        gradient.push(if free { (u - y) / (u * (1.0 - u)) } else { 0.0 });
    }
    LossResult { value, gradient, degenerate: false }
}

/// `lambda_contour * bce + 1 - (sum(y y_hat) + eps) / (sum(y^2) + sum(y_hat^2) + eps)`.
pub fn contour(t: &LossTensor, cfg: &LossConfig) -> LossResult {
    let eps = cfg.epsilon_dice;
    let num: f64 = t.y.iter().zip(&t.y_hat).map(|(y, p)| y * p).sum::<f64>() + eps;
    let den: f64 = t.y.iter().zip(&t.y_hat).map(|(y, p)| y * y + p * p).sum::<f64>() + eps;
    let (value, degenerate, gradient) = if den == 0.0 {
        (0.0, true, vec![0.0; t.len()])
    } else {
        let g = t.y.iter().zip(&t.y_hat).map(|(y, p)| -(y * den - 2.0 * num * p) / (den * den)).collect();
        (1.0 - num / den, false, g)
    };
    LossResult { value, gradient, degenerate }.plus(bce(t), cfg.lambda_contour)
}

/// Edge constraint term `(sum(y - y_hat))^2 / 2`.
pub fn ecl(t: &LossTensor) -> LossResult {
    let s: f64 = t.y.iter().zip(&t.y_hat).map(|(y, p)| y - p).sum();
    LossResult { value: 0.5 * s * s, gradient: vec![-s; t.len()], degenerate: false }
}

/// `bce + lambda_1 * ecl`.
pub fn edge_ecl(t: &LossTensor, cfg: &LossConfig) -> LossResult {
    bce(t).plus(ecl(t), cfg.lambda_1)
}

/// Focal loss with the piecewise `h` (y_hat where y == 1, else 1 - y_hat), averaged.
pub fn focal_v1(t: &LossTensor, cfg: &LossConfig) -> Result<LossResult, LossError> {
    check_gamma(cfg.gamma)?;
    let n = t.len() as f64;
    let mut value = 0.0;
    let mut gradient = Vec::with_capacity(t.len());
    for i in 0..t.len() {
        let (u, free) = t.clamped(i);
        let positive = t.y[i] == 1.0;
        let h = if positive { u } else { 1.0 - u };
        let (v, dv_dh) = focal_term(h, cfg.gamma);
        value += v;
        let dh_du = if positive { 1.0 } else { -1.0 };
        gradient.push(if free { dv_dh * dh_du / n } else { 0.0 });
    }
    Ok(LossResult { value: value / n, gradient, degenerate: false })
}

/// Mean of `-ln(h(y, gamma * y * y_hat + beta)) / gamma` with
/// `h(y, z) = z` where `y == 1` and `1 - z` elsewhere.
///
/// The value can be negative. Where `y != 1` the argument is `1 - beta`,
/// which is 0 at the default `beta = 1`; it is clamped to `CLAMP_EPS` and
/// the result flagged degenerate.
pub fn focal_v2(t: &LossTensor, cfg: &LossConfig) -> Result<LossResult, LossError> {
    let (gamma, beta) = (cfg.gamma, cfg.beta);
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(LossError::InvalidConfig(format!("focal-v2 needs gamma > 0, got {gamma}")));
    }
    let n = t.len() as f64;
    let mut value = 0.0;
    let mut degenerate = false;
    let mut gradient = Vec::with_capacity(t.len());
    for i in 0..t.len() {
        let (u, free) = t.clamped(i);
        let y = t.y[i];
        let z = gamma * y * u + beta;
        let (h, dh_du) = if y == 1.0 { (z, gamma) } else { (1.0 - z, -gamma * y) };
        if h < CLAMP_EPS {
            degenerate = true;
            value -= CLAMP_EPS.ln() / gamma;
            gradient.push(0.0);
            continue;
        }
        value -= h.ln() / gamma;
        gradient.push(if free { -dh_du / (gamma * h * n) } else { 0.0 });
    }
    Ok(LossResult { value: value / n, gradient, degenerate })
}

/// `0.5 x^2` for `|x| < 1`, else `|x| - 0.5`.
pub fn smooth_l1(x: f64) -> f64 {
    if x.abs() < 1.0 {
        0.5 * x * x
    } else {
        x.abs() - 0.5
    }
}

/// Derivative of [`smooth_l1`].
pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// `bce + lambda_4 * sum over {y_i >= 1} of smooth_l1(y_i - y_hat_i)`.
pub fn localization_smooth_l1(t: &LossTensor, cfg: &LossConfig) -> LossResult {
    let mut value = 0.0;
    let mut gradient = vec![0.0; t.len()];
    for ((g, &y), &p) in gradient.iter_mut().zip(&t.y).zip(&t.y_hat) {
        if y >= 1.0 {
            value += smooth_l1(y - p);
            *g = -smooth_l1_grad(y - p);
        }
    }
    bce(t).plus(LossResult { value, gradient, degenerate: false }, cfg.lambda_4)
}

/// Every loss, for table-driven checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    SoftDice,
    FocalRestated,
    Focal4ps,
    Bce,
    Contour,
    EdgeEcl,
    FocalV1,
    FocalV2,
    LocalizationSmoothL1,
}

impl Loss {
    pub const ALL: [Loss; 9] = [
        Loss::SoftDice,
        Loss::FocalRestated,
        Loss::Focal4ps,
        Loss::Bce,
        Loss::Contour,
        Loss::EdgeEcl,
        Loss::FocalV1,
        Loss::FocalV2,
        Loss::LocalizationSmoothL1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Loss::SoftDice => "soft_dice",
            Loss::FocalRestated => "focal_restated",
            Loss::Focal4ps => "focal_4ps",
            Loss::Bce => "bce",
            Loss::Contour => "contour",
            Loss::EdgeEcl => "edge_ecl",
            Loss::FocalV1 => "focal_v1",
            Loss::FocalV2 => "focal_v2",
            Loss::LocalizationSmoothL1 => "localization_smooth_l1",
        }
    }

    /// Whether the loss is only defined for targets in {0, 1}.
    pub fn needs_binary_targets(self) -> bool {
        matches!(self, Loss::FocalRestated | Loss::Focal4ps)
    }

    pub fn evaluate(self, t: &LossTensor, cfg: &LossConfig) -> Result<LossResult, LossError> {
        match self {
            Loss::SoftDice => Ok(soft_dice(t)),
            Loss::FocalRestated => focal_restated(t, cfg),
            Loss::Focal4ps => focal_4ps(t, cfg),
            Loss::Bce => Ok(bce(t)),
            Loss::Contour => Ok(contour(t, cfg)),
            Loss::EdgeEcl => Ok(edge_ecl(t, cfg)),
            Loss::FocalV1 => focal_v1(t, cfg),
            Loss::FocalV2 => focal_v2(t, cfg),
            Loss::LocalizationSmoothL1 => Ok(localization_smooth_l1(t, cfg)),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Loss {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Loss::ALL.into_iter().find(|l| l.name() == s).ok_or_else(|| format!("unknown loss {s:?}"))
    }
}
