//! Success probabilities, time-to-solution figures, deviation diagnostics
//! and scaling fits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Energies match the target within this absolute rounding band. Discrete
/// couplings make energies exact multiples of 0.05; continuous ensembles
/// store doubles, so success is E <= E0 + band.
pub const ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty trajectory set")]
    Empty,
    #[error("trajectories disagree on the time grid ({0} vs {1} samples)")]
    GridMismatch(usize, usize),
    #[error("scaling fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("scaling fit requires positive values")]
    NonPositiveValue,
}

/// Fraction of trajectories whose final energy reached `e0`.
pub fn success_probability(final_energies: &[f64], e0: f64) -> Result<f64, MetricsError> {
    if final_energies.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = final_energies
        .iter()
        .filter(|&&e| e <= e0 + ENERGY_TOL)
        .count();
    Ok(hits as f64 / final_energies.len() as f64)
}

/// Cumulative success curve: at index k, the fraction of trajectories whose
/// running-minimum energy has reached `e0` by sample k. Nondecreasing by
/// construction.
pub fn cumulative_success(
    energy_series: &[Vec<f64>],
    e0: f64,
) -> Result<Vec<f64>, MetricsError> {
    if energy_series.is_empty() {
        return Err(MetricsError::Empty);
    }
    let len = energy_series[0].len();
    for s in energy_series {
        if s.len() != len {
            return Err(MetricsError::GridMismatch(len, s.len()));
        }
    }
    let mut counts = vec![0usize; len];
    for series in energy_series {
        let mut hit = false;
        for (k, &e) in series.iter().enumerate() {
            if !hit && e <= e0 + ENERGY_TOL {
                hit = true;
            }
            if hit {
                counts[k] += 1;
            }
        }
    }
    Ok(counts
        .iter()
        .map(|&c| c as f64 / energy_series.len() as f64)
        .collect())
}

/// Same curve from per-trajectory first-hit step indices (1-based step of the
/// first success), on a grid of `n_steps` samples.
pub fn cumulative_success_from_hits(
    first_hit_steps: &[Option<u64>],
    n_steps: usize,
) -> Result<Vec<f64>, MetricsError> {
    if first_hit_steps.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut counts = vec![0usize; n_steps];
    for hit in first_hit_steps {
        if let Some(step) = hit {
            let idx = (*step as usize).saturating_sub(1);
            if idx < n_steps {
                counts[idx] += 1;
            }
        }
    }
    let mut acc = 0usize;
    Ok(counts
        .iter()
        .map(|&c| {
            acc += c;
            acc as f64 / first_hit_steps.len() as f64
        })
        .collect())
}

/// Matrix-vector-multiplication count to reach the target with 99%
/// probability, per time point: MVMTS(t) = (t/dt) ln(0.01)/ln(1 - Ps'(t)).
/// Ps' = 0 maps to +inf (excluded from the minimum); Ps' = 1 maps to 0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MvmtsResult {
    pub per_t: Vec<f64>,
    /// Minimum over the grid and the time where it is attained; None when the
    /// curve never left zero ("unsolved").
    pub min: Option<(f64, f64)>,
}

pub fn mvmts(ps_prime: &[f64], ts: &[f64], dt: f64) -> MvmtsResult {
    let ln001 = (0.01f64).ln();
    let per_t: Vec<f64> = ps_prime
        .iter()
        .zip(ts)
        .map(|(&ps, &t)| {
            if ps <= 0.0 {
                f64::INFINITY
            } else {
                (t / dt) * ln001 / (1.0 - ps).ln()
            }
        })
        .collect();
    let mut min: Option<(f64, f64)> = None;
    for (&v, &t) in per_t.iter().zip(ts) {
        if v.is_finite() {
            match min {
                Some((best, _)) if best <= v => {}
                _ => min = Some((v, t)),
            }
        }
    }
    MvmtsResult { per_t, min }
}

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Relative deviations between model success probabilities:
/// d1 = ps_skew/ps_gauss - 1, d2 = ps_swapped/ps_gauss - 1,
/// d3 = ps_skew/ps_swapped - 1, where "swapped" is the skew state scored
/// with the Gaussian readout.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Deviations {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

pub fn deviations(ps_skew: f64, ps_gauss: f64, ps_swapped: f64) -> Deviations {
    Deviations {
        d1: ps_skew / ps_gauss - 1.0,
        d2: ps_swapped / ps_gauss - 1.0,
        d3: ps_skew / ps_swapped - 1.0,
    }
}

/// One exponential fit ln(v) = a + b f(N).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FitCoeffs {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
}

/// Both candidate scalings of a time-to-solution curve: exp(a + b sqrt(N))
/// and exp(a + b N).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScalingFit {
    pub sqrt: FitCoeffs,
    pub linear: FitCoeffs,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> FitCoeffs {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let a = (sy - b * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y) * (y - mean_y)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (a + b * x);
            r * r
        })
        .sum();
    FitCoeffs {
        a,
        b,
        r_squared: 1.0 - ss_res / ss_tot,
    }
}

pub fn fit_exp_sqrt(ns: &[f64], values: &[f64]) -> Result<ScalingFit, MetricsError> {
    if ns.len() < 3 || ns.len() != values.len() {
        return Err(MetricsError::TooFewPoints(ns.len()));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(MetricsError::NonPositiveValue);
    }
    let ln_v: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let sqrt_n: Vec<f64> = ns.iter().map(|n| n.sqrt()).collect();
    Ok(ScalingFit {
        sqrt: least_squares(&sqrt_n, &ln_v),
        linear: least_squares(ns, &ln_v),
    })
}
