use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{bce, focal_restated, focal_v1, Loss, LossConfig, LossError, LossTensor};

/// Central differences `(L(x + h e_i) - L(x - h e_i)) / 2h` for every entry.
///
/// Entries are perturbed in place without re-validation, so callers keep
/// `x +- h` inside [0, 1].
pub fn finite_difference(
    f: impl Fn(&LossTensor) -> Result<f64, LossError>,
    t: &LossTensor,
    step: f64,
) -> Result<Vec<f64>, LossError> {
    let mut probe = t.clone();
    let mut out = Vec::with_capacity(t.len());
    for i in 0..t.len() {
        let x = t.y_hat[i];
        probe.y_hat[i] = x + step;
        let up = f(&probe)?;
        probe.y_hat[i] = x - step;
        let down = f(&probe)?;
        probe.y_hat[i] = x;
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Worst disagreement between the analytic and numeric gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub max_abs_error: f64,
    /// `|analytic - numeric| / max(|analytic|, |numeric|)` over entries whose
    /// absolute error exceeds `abs_floor`.
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Compares `loss`'s gradient with central differences of step `step`.
///
/// An entry passes when its absolute error is at most `abs_floor` or its
/// relative error is at most `rel_tol`.
pub fn gradient_check(
    loss: Loss,
    t: &LossTensor,
    cfg: &LossConfig,
    step: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<GradCheck, LossError> {
    let analytic = loss.evaluate(t, cfg)?.gradient;
    let numeric = finite_difference(|x| loss.evaluate(x, cfg).map(|r| r.value), t, step)?;
    let mut max_abs_error: f64 = 0.0;
    let mut max_rel_error: f64 = 0.0;
    for (a, n) in analytic.iter().zip(&numeric) {
        let err = (a - n).abs();
        max_abs_error = max_abs_error.max(err);
        if err > abs_floor {
            max_rel_error = max_rel_error.max(err / a.abs().max(n.abs()));
        }
    }
    Ok(GradCheck { max_abs_error, max_rel_error, passed: max_rel_error <= rel_tol })
}

/// Settings of the randomized gradient suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub instances: usize,
    pub length: usize,
    pub seed: u64,
    pub step: f64,
    pub rel_tol: f64,
    pub abs_floor: f64,
    /// Predictions are drawn from `[margin, 1 - margin]`, away from the clamp.
    pub margin: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { instances: 100, length: 64, seed: 0x5eed, step: 1e-5, rel_tol: 1e-5, abs_floor: 1e-8, margin: 0.05 }
    }
}

/// One line of the suite: a loss gradient check or an exact identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub name: String,
    pub instances: usize,
    /// Largest relative gradient error, or largest absolute difference for identities.
    pub worst: f64,
    pub passed: bool,
}

/// Random instance for `loss`: binary targets (0..=2 for the localization
/// loss, which reads counts), predictions uniform in the margin band.
pub fn random_instance(loss: Loss, rng: &mut impl Rng, length: usize, margin: f64) -> LossTensor {
    let top = if loss == Loss::LocalizationSmoothL1 { 3 } else { 2 };
    let y = (0..length).map(|_| rng.random_range(0..top) as f64).collect();
    let p = (0..length).map(|_| rng.random_range(margin..1.0 - margin)).collect();
    LossTensor::new(y, p).expect("generated inputs are valid")
}

/// Gradient check of every loss plus the identities
/// `focal_restated(gamma = 0) == bce / n` and `focal_restated == focal_v1`.
pub fn gradient_suite(cfg: &LossConfig, suite: &SuiteConfig) -> Result<Vec<SuiteRow>, LossError> {
    let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
    let mut rows = Vec::new();
    for loss in Loss::ALL {
        let mut worst: f64 = 0.0;
        let mut passed = true;
        for _ in 0..suite.instances {
            let t = random_instance(loss, &mut rng, suite.length, suite.margin);
            let r = gradient_check(loss, &t, cfg, suite.step, suite.rel_tol, suite.abs_floor)?;
            worst = worst.max(r.max_rel_error);
            passed &= r.passed;
        }
        rows.push(SuiteRow { name: loss.name().to_string(), instances: suite.instances, worst, passed });
    }

    let gamma0 = LossConfig { gamma: 0.0, ..*cfg };
    let (mut bce_gap, mut v1_gap): (f64, f64) = (0.0, 0.0);
    for _ in 0..suite.instances {
        let t = random_instance(Loss::Bce, &mut rng, suite.length, suite.margin);
        let f = focal_restated(&t, &gamma0)?.value;
        bce_gap = bce_gap.max((f - bce(&t).value / t.len() as f64).abs());
        let (a, b) = (focal_restated(&t, cfg)?, focal_v1(&t, cfg)?);
        v1_gap = v1_gap.max((a.value - b.value).abs());
        v1_gap = a.gradient.iter().zip(&b.gradient).fold(v1_gap, |m, (x, y)| m.max((x - y).abs()));
    }
    // Same terms summed in a different grouping; agreement to rounding.
    rows.push(SuiteRow { name: "identity focal(gamma=0) == bce/n".into(), instances: suite.instances, worst: bce_gap, passed: bce_gap <= 1e-12 });
    rows.push(SuiteRow { name: "identity focal_restated == focal_v1".into(), instances: suite.instances, worst: v1_gap, passed: v1_gap == 0.0 });
    Ok(rows)
}
