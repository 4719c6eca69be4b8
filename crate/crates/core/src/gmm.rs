//! Two-component one-dimensional Gaussian mixture fitted by EM.
//!
//! Used to split candidate scores into a low-score (positive-leaning) and a
//! high-score (negative-leaning) cluster. The fit is deterministic: means are
//! initialized at the sample minimum and maximum, weights at one half each,
//! variances at the floored sample variance, and there are no random
//! restarts. Samples are sorted internally, so the fitted model is exactly
//! invariant to input order.

use crate::error::{Error, Result};

/// Lower bound keeping component variances away from singular collapse.
pub const VARIANCE_FLOOR: f64 = 1e-8;
/// Lower bound on mixture weights.
const WEIGHT_FLOOR: f64 = 1e-9;
/// Default EM iteration cap.
pub const DEFAULT_MAX_ITER: usize = 100;
/// Default log-likelihood improvement threshold.
pub const DEFAULT_TOL: f64 = 1e-6;

const LN_TAU: f64 = 1.837877066409345483560659472811; // ln(2*pi)

/// A fitted two-component mixture. After `fit_em`, `mu1 <= mu2`: component 1
/// is the low-score component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gmm2 {
    pub w1: f64,
    pub w2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub var1: f64,
    pub var2: f64,
}

impl Gmm2 {
    fn log_pdf(x: f64, mu: f64, var: f64) -> f64 {
        let d = x - mu;
        -0.5 * (LN_TAU + var.ln()) - d * d / (2.0 * var)
    }

    /// Per-component log of weight times density.
    fn weighted_log_densities(&self, x: f64) -> (f64, f64) {
        (
            self.w1.ln() + Self::log_pdf(x, self.mu1, self.var1),
            self.w2.ln() + Self::log_pdf(x, self.mu2, self.var2),
        )
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Posterior membership probabilities `(r1, r2)` per sample; `r1 + r2 = 1`.
pub fn responsibilities(model: &Gmm2, samples: &[f64]) -> Vec<(f64, f64)> {
    samples
        .iter()
        .map(|&x| {
            let (l1, l2) = model.weighted_log_densities(x);
            // r1 = 1 / (1 + exp(l2 - l1)), computed on the safe side.
            let r1 = if l1 >= l2 {
                1.0 / (1.0 + (l2 - l1).exp())
            } else {
                let e = (l1 - l2).exp();
                e / (1.0 + e)
            };
            (r1, 1.0 - r1)
        })
        .collect()
}

/// Total log-likelihood of the samples under the mixture.
pub fn log_likelihood(model: &Gmm2, samples: &[f64]) -> f64 {
    samples
        .iter()
        .map(|&x| {
            let (l1, l2) = model.weighted_log_densities(x);
            log_sum_exp(l1, l2)
        })
        .sum()
}

/// Fits the mixture by EM and returns it with the per-iteration
/// log-likelihood trace (entry 0 is the likelihood at initialization).
pub fn fit_em_with_trace(
    samples: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<(Gmm2, Vec<f64>)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(n));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite sample in mixture input".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let (min, max) = (xs[0], xs[n - 1]);
    if min == max {
        return Err(Error::DegenerateData);
    }

    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64)
        .max(VARIANCE_FLOOR);
    let mut model = Gmm2 {
        w1: 0.5,
        w2: 0.5,
        mu1: min,
        mu2: max,
        var1: var,
        var2: var,
    };

    let mut trace = vec![log_likelihood(&model, &xs)];
    for _ in 0..max_iter {
        let resp = responsibilities(&model, &xs);
        model = m_step(&xs, &resp, &model);
        let ll = log_likelihood(&model, &xs);
        let improved = ll - trace[trace.len() - 1];
        trace.push(ll);
        if improved < tol {
            break;
        }
    }

    if model.mu1 > model.mu2 {
        model = Gmm2 {
            w1: model.w2,
            w2: model.w1,
            mu1: model.mu2,
            mu2: model.mu1,
            var1: model.var2,
            var2: model.var1,
        };
    }
    Ok((model, trace))
}

/// Fits the mixture by EM; see [`fit_em_with_trace`].
pub fn fit_em(samples: &[f64], max_iter: usize, tol: f64) -> Result<Gmm2> {
    fit_em_with_trace(samples, max_iter, tol).map(|(m, _)| m)
}

fn m_step(xs: &[f64], resp: &[(f64, f64)], prev: &Gmm2) -> Gmm2 {
    let n = xs.len() as f64;
    let (mut n1, mut n2) = (0.0, 0.0);
    let (mut s1, mut s2) = (0.0, 0.0);
    for (&x, &(r1, r2)) in xs.iter().zip(resp) {
        n1 += r1;
        n2 += r2;
        s1 += r1 * x;
        s2 += r2 * x;
    }
    // A component whose responsibility mass vanished keeps its parameters.
    let (mu1, mu2) = (
        if n1 > 1e-12 { s1 / n1 } else { prev.mu1 },
        if n2 > 1e-12 { s2 / n2 } else { prev.mu2 },
    );
    let (mut v1, mut v2) = (0.0, 0.0);
    for (&x, &(r1, r2)) in xs.iter().zip(resp) {
        v1 += r1 * (x - mu1) * (x - mu1);
        v2 += r2 * (x - mu2) * (x - mu2);
    }
    let var1 = if n1 > 1e-12 { (v1 / n1).max(VARIANCE_FLOOR) } else { prev.var1 };
    let var2 = if n2 > 1e-12 { (v2 / n2).max(VARIANCE_FLOOR) } else { prev.var2 };
    let w1 = (n1 / n).clamp(WEIGHT_FLOOR, 1.0 - WEIGHT_FLOOR);
    Gmm2 {
        w1,
        w2: 1.0 - w1,
        mu1,
        mu2,
        var1,
        var2,
    }
}
