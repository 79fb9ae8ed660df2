//! Mean-field-coupled single-pulse steady states.
//!
//! Two independent routes to the same observables live here: a terminating
//! hypergeometric-series closed form for the driven DOPO's exact moments
//! (with a self-consistency loop closing the drive on the mean amplitude),
//! and direct time evolution of the density matrix under the mean-field
//! generator. The analytic route also has closed-form steady-state skews from
//! the linearized moment equations, used as sign/magnitude cross-checks.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qme::{accumulate_rhs_det, DensityMatrix, DetCoeffs, RhoMoments};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Parameters of the mean-field-coupled system. The injection gain `gf`
/// fixes the oscillation threshold p_thr = 1 + j - j gf.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MeanFieldParams {
    pub p_thr: f64,
    pub gf: f64,
    pub p: f64,
    pub g2: f64,
    pub j: f64,
}

impl MeanFieldParams {
    /// Build from a threshold value; gf = (1 - p_thr + j)/j.
    pub fn from_threshold(p_thr: f64, p: f64, g2: f64, j: f64) -> Self {
        let gf = (1.0 - p_thr + j) / j;
        Self {
            p_thr,
            gf,
            p,
            g2,
            j,
        }
    }

    /// Series scale c = sqrt(p)/g.
    pub fn c(&self) -> f64 {
        (self.p / self.g2).sqrt()
    }

    /// Series parameter x = (1 + j)/g^2.
    pub fn x(&self) -> f64 {
        (1.0 + self.j) / self.g2
    }

    /// Normalized drive e = eps/sqrt(p g^2).
    pub fn e_of(&self, eps: f64) -> f64 {
        eps / (self.p * self.g2).sqrt()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("denominator parameter hits a pole at term {term} (c + i = 0)")]
    Pole { term: u32 },
    #[error("series not converged after {kmax} terms; last term ratio {last_ratio:e}")]
    NotConverged { kmax: u32, last_ratio: f64 },
    #[error("exact-moment series requires p > 0, got {p}")]
    InvalidPump { p: f64 },
    #[error("non-finite value in series evaluation")]
    NonFinite,
}

/// Terminating Gauss series 2F1(-k, b; c; z), evaluated as the (k+1)-term
/// polynomial with a forward product recurrence on the terms. Exact up to
/// rounding; subject to cancellation when the terms dwarf the value, which
/// for this crate's operating ranges (k <= a few tens) is benign.
pub fn hyp2f1_neg_int(k: u32, b: f64, c: f64, z: f64) -> Result<f64, SeriesError> {
    let mut total = 1.0f64;
    let mut term = 1.0f64;
    for i in 0..k {
        let denom = c + i as f64;
        if denom == 0.0 {
            return Err(SeriesError::Pole { term: i });
        }
        term *= (-(k as f64) + i as f64) * (b + i as f64) / (denom * (i as f64 + 1.0)) * z;
        total += term;
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(SeriesError::NonFinite)
    }
}

/// The family F_k = 2F1(-k, x+e; 2x; 2) for k = 0..=kmax, via the
/// three-term contiguous recurrence
///     (2x + k) F_{k+1} = k F_{k-1} - 2 e F_k,
/// which at this argument is numerically stable in the forward direction
/// across the whole parameter domain used here (checked against
/// high-precision reference values; the direct sums lose all accuracy for
/// k beyond a few tens).
pub fn hyp2f1_family_z2(kmax: usize, x: f64, e: f64) -> Vec<f64> {
    let c = 2.0 * x;
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(1.0);
    if kmax == 0 {
        return out;
    }
    out.push(-e / x);
    for k in 1..kmax {
        let next = (k as f64 * out[k - 1] - 2.0 * e * out[k]) / (c + k as f64);
        out.push(next);
    }
    out
}

fn series_kmax(c: f64, kmax_cap: usize) -> usize {
    let suggested = (2.0 * c * c + 60.0 + 14.0 * c).ceil() as usize;
    suggested.min(kmax_cap)
}

/// Normally ordered generalized moment <a^dag^m a^n> of the driven DOPO
/// steady state, from the double terminating-series ratio. `kmax` caps the
/// outer sum; the sum stops earlier once the tail ratio drops below 1e-14.
pub fn dopo_exact_moment(
    mf: &MeanFieldParams,
    eps: f64,
    m: u32,
    n: u32,
    kmax: usize,
) -> Result<f64, SeriesError> {
    if !(mf.p > 0.0) {
        return Err(SeriesError::InvalidPump { p: mf.p });
    }
    let c = mf.c();
    let x = mf.x();
    let e = mf.e_of(eps);
    let shift = m.max(n) as usize;
    let outer = series_kmax(c, kmax);
    let f = hyp2f1_family_z2(outer + shift + 1, x, e);
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    let mut pref = 1.0f64; // 2^k c^{2k} / k!
    let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
    let cmn = c.powi((m + n) as i32);
    let mut converged = false;
    let mut last_ratio = f64::INFINITY;
    for k in 0..=outer {
        let tden = pref * f[k] * f[k];
        num += pref * sign * cmn * f[k + m as usize] * f[k + n as usize];
        den += tden;
        last_ratio = (tden / den).abs();
        if k as f64 > 2.0 * c * c + 10.0 && last_ratio < 1e-14 {
            converged = true;
            break;
        }
        pref *= 2.0 * c * c / (k as f64 + 1.0);
        if pref > 1e250 {
            pref *= 1e-250;
            num *= 1e-250;
            den *= 1e-250;
        }
    }
    if !converged && outer == kmax {
        return Err(SeriesError::NotConverged {
            kmax: kmax as u32,
            last_ratio,
        });
    }
    let v = num / den;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SeriesError::NonFinite)
    }
}

/// Default outer-series cap; generous for every operating point in this
/// crate (the adaptive cutoff normally stops far earlier).
pub const DEFAULT_KMAX: usize = 4000;

/// Centered moments and quadrature observables of the exact driven-DOPO
/// steady state.
pub fn exact_state_moments(mf: &MeanFieldParams, eps: f64) -> Result<RhoMoments, SeriesError> {
    let a1 = dopo_exact_moment(mf, eps, 0, 1, DEFAULT_KMAX)?;
    let a2 = dopo_exact_moment(mf, eps, 0, 2, DEFAULT_KMAX)?;
    let nb = dopo_exact_moment(mf, eps, 1, 1, DEFAULT_KMAX)?;
    let a3 = dopo_exact_moment(mf, eps, 0, 3, DEFAULT_KMAX)?;
    let ad2 = dopo_exact_moment(mf, eps, 1, 2, DEFAULT_KMAX)?;
    let mu = a1;
    let m2 = a2 - mu * mu;
    let n2 = nb - mu * mu;
    let gamma = a3 - 3.0 * mu * a2 + 2.0 * mu * mu * mu;
    let kappa = ad2 - 2.0 * mu * nb - mu * a2 + 2.0 * mu * mu * mu;
    Ok(RhoMoments {
        mu,
        m: m2,
        n: n2,
        gamma,
        kappa,
        mean_x: SQRT2 * mu,
        var_x: n2 + m2 + 0.5,
        var_p: n2 - m2 + 0.5,
        skew_self: (gamma + 3.0 * kappa) / SQRT2,
        skew_cross: (-gamma + kappa) / SQRT2,
        photon: nb,
    })
}

/// Result of the fixed-point drive closure.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SelfConsistentResult {
    pub mu: f64,
    /// |mu - F(mu)| after the final iteration.
    pub residual: f64,
    pub iterations: u32,
}

/// Close eps = j gf mu on the exact mean amplitude by plain fixed-point
/// iteration (up to `iters` rounds, stopping early at machine-level
/// stationarity). A half-step damping kicks in if the iterates oscillate.
pub fn solve_self_consistent(
    mf: &MeanFieldParams,
    mu0: f64,
    iters: u32,
) -> Result<SelfConsistentResult, SeriesError> {
    let mut mu = mu0;
    let mut prev_delta = 0.0f64;
    let mut damping = 1.0f64;
    let mut used = 0;
    for it in 0..iters {
        let next = dopo_exact_moment(mf, mf.j * mf.gf * mu, 0, 1, DEFAULT_KMAX)?;
        if !next.is_finite() {
            return Err(SeriesError::NonFinite);
        }
        let delta = next - mu;
        if delta * prev_delta < 0.0 {
            damping = 0.5;
        }
        mu += damping * delta;
        prev_delta = delta;
        used = it + 1;
        if delta.abs() <= 1e-15 * (1.0 + mu.abs()) {
            break;
        }
    }
    let residual = (dopo_exact_moment(mf, mf.j * mf.gf * mu, 0, 1, DEFAULT_KMAX)? - mu).abs();
    Ok(SelfConsistentResult {
        mu,
        residual,
        iterations: used,
    })
}

/// Linearized normally ordered steady-state variances of the mean-field
/// system above threshold.
pub fn linearized_normal_variances(p_thr: f64, p: f64, j: f64) -> (f64, f64) {
    let vx_no = p_thr / (2.0 * (2.0 * p + 1.0 - 3.0 * p_thr + j));
    let vp_no = -p_thr / (2.0 * (2.0 * p + 1.0 - p_thr + j));
    (vx_no, vp_no)
}

#[derive(Debug, Error, PartialEq)]
pub enum SkewFormulaError {
    #[error("zero denominator in steady-state skew formula")]
    ZeroDenominator,
}

/// Closed-form steady-state self- and cross-skewness from the linearized
/// moment hierarchy, given the mean amplitude and the normally ordered
/// variances.
pub fn steady_skew_analytic(
    mu: f64,
    p: f64,
    g2: f64,
    j: f64,
    vx_no: f64,
    vp_no: f64,
) -> Result<(f64, f64), SkewFormulaError> {
    let d1 = 3.0 * g2 * mu * mu + 1.0 + j - p;
    let d2 = 5.0 * g2 * mu * mu + 3.0 + 3.0 * j + p;
    if d1 == 0.0 || d2 == 0.0 {
        return Err(SkewFormulaError::ZeroDenominator);
    }
    let sks = -SQRT2 * g2 * mu / d1 * vx_no * (3.0 * vx_no + 1.0);
    let skc = -SQRT2 * g2 * mu / d2 * (2.0 * vp_no - vx_no + vp_no * (2.0 * vx_no + vp_no));
    Ok((sks, skc))
}

/// Output of a mean-field density-matrix evolution.
#[derive(Clone, Debug)]
pub struct MeanFieldQmeRun {
    pub moments: RhoMoments,
    pub rho: DensityMatrix,
    /// Worst per-step trace defect of the generator before renormalization.
    pub max_trace_defect: f64,
}

/// Evolve a single pulse from vacuum under the mean-field generator
/// (pump, saturation, total linear loss 1 + j, coherent drive
/// eps = j gf <a>), deterministically, to `t_end`. The drive of the very
/// first step uses eps = j gf.
pub fn run_meanfield_qme(
    mf: &MeanFieldParams,
    dt: f64,
    t_end: f64,
    cutoff: usize,
) -> MeanFieldQmeRun {
    let steps = crate::ct::steps_for(t_end, dt);
    let mut rho = DensityMatrix::vacuum(cutoff);
    let mut scratch = Array2::zeros((cutoff + 1, cutoff + 1));
    let mut max_trace_defect = 0.0f64;
    for step in 0..steps {
        let mu = 0.5 * rho.mean_x_operator();
        let eps = if step == 0 {
            mf.j * mf.gf
        } else {
            mf.j * mf.gf * mu
        };
        let coeffs = DetCoeffs {
            loss: 1.0 + mf.j,
            jfp: 0.0,
            jfpp: 0.0,
            g2: mf.g2,
            p: mf.p,
            eps,
        };
        scratch.fill(0.0);
        accumulate_rhs_det(&rho.data, &coeffs, dt, &mut scratch);
        for i in 0..=cutoff {
            for jx in i..=cutoff {
                rho.data[(i, jx)] += scratch[(i, jx)];
                if jx != i {
                    rho.data[(jx, i)] = rho.data[(i, jx)];
                }
            }
        }
        max_trace_defect = max_trace_defect.max((rho.trace() - 1.0).abs());
        rho.normalize();
    }
    MeanFieldQmeRun {
        moments: rho.moments(),
        rho,
        max_trace_defect,
    }
}

/// One row of a threshold sweep, for the CSV interface.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub p_thr: f64,
    pub p: f64,
    pub source: SweepSource,
    pub mean_x: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub skew_self: f64,
    pub skew_cross: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepSource {
    Qme,
    Analytic,
}

/// Threshold sweep settings matching the density-matrix comparison runs.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SweepSettings {
    pub g2: f64,
    pub j: f64,
    /// Pump offset above threshold: p = p_thr + pump_offset.
    pub pump_offset: f64,
    pub dt: f64,
    pub t_end: f64,
    pub cutoff: usize,
    pub iterations: u32,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            g2: 5.0,
            j: 5.0,
            pump_offset: 10.0,
            dt: 5e-4,
            t_end: 10.0,
            cutoff: 20,
            iterations: 2000,
        }
    }
}

/// For each threshold value, report the density-matrix steady state and the
/// self-consistent analytic moments.
pub fn threshold_sweep(
    p_thrs: &[f64],
    settings: &SweepSettings,
) -> Result<Vec<SweepRow>, SeriesError> {
    let mut rows = Vec::with_capacity(p_thrs.len() * 2);
    for &p_thr in p_thrs {
        let p = p_thr + settings.pump_offset;
        let mf = MeanFieldParams::from_threshold(p_thr, p, settings.g2, settings.j);
        let qme = run_meanfield_qme(&mf, settings.dt, settings.t_end, settings.cutoff);
        rows.push(SweepRow {
            p_thr,
            p,
            source: SweepSource::Qme,
            mean_x: qme.moments.mean_x,
            var_x: qme.moments.var_x,
            var_p: qme.moments.var_p,
            skew_self: qme.moments.skew_self,
            skew_cross: qme.moments.skew_cross,
        });
        let sc = solve_self_consistent(&mf, 1.0, settings.iterations)?;
        let an = exact_state_moments(&mf, mf.j * mf.gf * sc.mu)?;
        rows.push(SweepRow {
            p_thr,
            p,
            source: SweepSource::Analytic,
            mean_x: an.mean_x,
            var_x: an.var_x,
            var_p: an.var_p,
            skew_self: an.skew_self,
            skew_cross: an.skew_cross,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("p_thr,p,source,mean_x,var_x,var_p,skew_self,skew_cross\n");
    for r in rows {
        let source = match r.source {
            SweepSource::Qme => "qme",
            SweepSource::Analytic => "analytic",
        };
        out.push_str(&format!(
            "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            r.p_thr, r.p, source, r.mean_x, r.var_x, r.var_p, r.skew_self, r.skew_cross
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn hyp_trivial_cases() {
        // k = 0 is the empty product
        assert_eq!(hyp2f1_neg_int(0, 3.7, -2.5, 9.0).unwrap(), 1.0);
        // k = 1: 1 - z b / c
        let v = hyp2f1_neg_int(1, 0.7, 1.9, 2.0).unwrap();
        assert_abs_diff_eq!(v, 1.0 - 2.0 * 0.7 / 1.9, epsilon = 1e-15);
    }

    #[test]
    fn hyp_pole_detection() {
        assert_eq!(
            hyp2f1_neg_int(3, 1.0, -1.0, 2.0),
            Err(SeriesError::Pole { term: 1 })
        );
        // c = 0 pole fires at the first term
        assert_eq!(
            hyp2f1_neg_int(2, 1.0, 0.0, 2.0),
            Err(SeriesError::Pole { term: 0 })
        );
    }

    /// Independent oracle: explicit factorial/Pochhammer sums.
    fn hyp_factorial_sum(k: u32, b: f64, c: f64, z: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..=k {
            let mut poch_neg_k = 1.0;
            let mut poch_b = 1.0;
            let mut poch_c = 1.0;
            let mut fact = 1.0;
            for l in 0..i {
                poch_neg_k *= -(k as f64) + l as f64;
                poch_b *= b + l as f64;
                poch_c *= c + l as f64;
                fact *= l as f64 + 1.0;
            }
            total += poch_neg_k * poch_b / poch_c * z.powi(i as i32) / fact;
        }
        total
    }

    /// Sum of absolute terms, for conditioning the comparison below.
    fn hyp_term_scale(k: u32, b: f64, c: f64, z: f64) -> f64 {
        let mut total = 1.0f64;
        let mut term = 1.0f64;
        for i in 0..k {
            term *= (-(k as f64) + i as f64) * (b + i as f64) / ((c + i as f64) * (i as f64 + 1.0))
                * z;
            total += term.abs();
        }
        total
    }

    #[test]
    fn recurrence_matches_factorial_sums() {
        // Both routes sum the same terms; they can only differ by per-term
        // rounding, which cancellation amplifies by the term/value ratio.
        // Draws are filtered to condition number <= 1e3 so the 1e-10 bound
        // tests algorithmic agreement rather than f64 conditioning limits.
        let mut rng = 8675309u64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut accepted = 0u32;
        while accepted < 10_000 {
            let k = (next() * 31.0) as u32;
            let b = -3.0 + 6.0 * next();
            let c = 1.0 + 19.0 * next();
            let z = 2.0;
            let oracle = hyp_factorial_sum(k, b, c, z);
            if hyp_term_scale(k, b, c, z) > 1e3 * oracle.abs() {
                continue;
            }
            accepted += 1;
            let a = hyp2f1_neg_int(k, b, c, z).unwrap();
            assert!(
                ((a - oracle) / oracle).abs() < 1e-10,
                "k={k} b={b} c={c}: {a} vs {oracle}"
            );
        }
    }

    #[test]
    fn family_recurrence_agrees_with_direct_sums() {
        // small-k regime where the direct sum is trustworthy
        let (x, e) = (1.2, 3.157);
        let fam = hyp2f1_family_z2(53, x, e);
        for (k, v) in fam.iter().enumerate().take(13) {
            let direct = hyp2f1_neg_int(k as u32, x + e, 2.0 * x, 2.0).unwrap();
            assert_relative_eq!(*v, direct, max_relative = 1e-10);
        }
        // beyond that the direct sum cancels catastrophically; check the
        // recurrence against 40-digit reference values instead
        assert_relative_eq!(fam[16], 132.29167288033501936, max_relative = 1e-12);
        assert_relative_eq!(fam[28], 372.24258034332530461, max_relative = 1e-12);
        assert_relative_eq!(fam[40], 729.93636470848762761, max_relative = 1e-12);
        assert_relative_eq!(fam[53], -1248.2679038171848485, max_relative = 1e-12);
    }

    #[test]
    fn family_recurrence_survives_heavy_cancellation() {
        // regime where every fixed-precision summation fails outright
        let fam = hyp2f1_family_z2(250, 200.0, 106.066);
        assert_relative_eq!(fam[50], 4.2765767426541125491e-12, max_relative = 1e-12);
        assert_relative_eq!(fam[150], 2.0736214156563580193e-27, max_relative = 1e-12);
        assert_relative_eq!(fam[250], 3.0152243223802278465e-38, max_relative = 1e-12);
    }

    #[test]
    fn family_handles_zero_drive_parity() {
        // e = 0 makes odd-k members vanish identically
        let fam = hyp2f1_family_z2(15, 2.0, 0.0);
        for (k, v) in fam.iter().enumerate() {
            if k % 2 == 1 {
                assert_eq!(*v, 0.0, "k = {k}");
            } else {
                assert!(v.abs() > 0.0);
            }
        }
    }

    #[test]
    fn moment_normalization() {
        let mf = MeanFieldParams::from_threshold(2.0, 12.0, 5.0, 5.0);
        assert_eq!(dopo_exact_moment(&mf, 4.0, 0, 0, 4000).unwrap(), 1.0);
    }

    #[test]
    fn exact_moments_match_reference_values() {
        // frozen from a 60-digit evaluation of the series ratios
        let mf = MeanFieldParams::from_threshold(2.0, 12.0, 5.0, 5.0);
        let sm = exact_state_moments(&mf, 4.0).unwrap();
        assert_relative_eq!(sm.mu, 1.2784281537783588, max_relative = 1e-11);
        assert_relative_eq!(sm.m, 0.14254877455307624, max_relative = 1e-9);
        assert_relative_eq!(sm.n, 0.07147604210704261, max_relative = 1e-9);
        assert_relative_eq!(sm.gamma, -0.17278739958708123, max_relative = 1e-8);
        assert_relative_eq!(sm.kappa, -0.120314096299726, max_relative = 1e-8);

        let mf = MeanFieldParams::from_threshold(-5.0, 5.0, 5.0, 5.0);
        let sm = exact_state_moments(&mf, 11.0).unwrap();
        assert_relative_eq!(sm.mean_x, 1.7839425982876298, max_relative = 1e-10);
        assert_relative_eq!(sm.skew_self, 0.010463731312454714, max_relative = 1e-7);
        assert_relative_eq!(sm.skew_cross, -0.03020662058125381, max_relative = 1e-7);

        // strongly cancelled regime: small g^2, large photon number
        let mf = MeanFieldParams::from_threshold(1.0, 1.5, 0.02, 3.0);
        let sm = exact_state_moments(&mf, 15.0).unwrap();
        assert_relative_eq!(sm.mu, 4.9963584951498605, max_relative = 1e-9);
        assert_relative_eq!(sm.var_x, 0.6250806070089112, max_relative = 1e-7);
        assert_relative_eq!(sm.skew_self, -0.006064705031385297, max_relative = 1e-5);
        assert_relative_eq!(sm.skew_cross, 0.0026901072027693883, max_relative = 1e-5);
    }

    #[test]
    fn self_consistent_below_threshold_is_symmetric() {
        // no drive feedback: gf = 0 keeps eps = 0, mu collapses to zero
        let mf = MeanFieldParams {
            p_thr: 1.0,
            gf: 0.0,
            p: 0.5,
            g2: 1.0,
            j: 1.0,
        };
        let sc = solve_self_consistent(&mf, 1.0, 200).unwrap();
        assert_abs_diff_eq!(sc.mu, 0.0, epsilon = 1e-12);
        assert!(sc.residual <= 1e-12);
    }

    #[test]
    fn self_consistent_large_photon_limit() {
        // g^2 = 0.02, j = 3, p_thr = 1: the mean coordinate approaches 10 as p -> 2
        let mf = MeanFieldParams::from_threshold(1.0, 2.0, 0.02, 3.0);
        let sc = solve_self_consistent(&mf, 1.0, 1000).unwrap();
        let x = SQRT2 * sc.mu;
        assert!((x - 10.0).abs() < 0.1, "mean X = {x}");
        assert!(sc.residual < 1e-10);
    }

    #[test]
    fn skew_formula_trivial_cases() {
        // odd in mu
        let (s, c) = steady_skew_analytic(0.0, 1.5, 0.02, 3.0, 0.1, -0.05).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(c, 0.0);
        // positive normally ordered variance with positive mu gives negative
        // self-skewness
        let (s, _) = steady_skew_analytic(5.0, 1.5, 0.02, 3.0, 0.1, -0.05).unwrap();
        assert!(s < 0.0);
    }

    #[test]
    fn skew_formula_zero_denominator() {
        // 3 g^2 mu^2 + 1 + j - p = 0
        assert_eq!(
            steady_skew_analytic(1.0, 2.0, 1.0 / 3.0, 0.0, 0.1, 0.1),
            Err(SkewFormulaError::ZeroDenominator)
        );
    }

    #[test]
    fn meanfield_qme_below_threshold_stays_unbroken() {
        // gf = 0, p < 1: squeezed thermal state with zero mean
        let mf = MeanFieldParams {
            p_thr: 1.0,
            gf: 0.0,
            p: 0.5,
            g2: 0.0,
            j: 0.0,
        };
        let run = run_meanfield_qme(&mf, 5e-4, 4.0, 16);
        assert_abs_diff_eq!(run.moments.mu, 0.0, epsilon = 1e-12);
        assert!(run.moments.var_x > 0.5); // anti-squeezed X above vacuum
        assert!(run.moments.var_p < 0.5);
    }

    #[test]
    fn threshold_crossing_flips_sign_adjusted_skew() {
        let settings = SweepSettings {
            t_end: 6.0,
            ..SweepSettings::default()
        };
        let rows = threshold_sweep(&[1.0, -1.0], &settings).unwrap();
        let sign_adj = |r: &SweepRow| r.mean_x.signum() * r.skew_self;
        let plus: Vec<&SweepRow> = rows.iter().filter(|r| r.p_thr == 1.0).collect();
        let minus: Vec<&SweepRow> = rows.iter().filter(|r| r.p_thr == -1.0).collect();
        for r in &plus {
            assert!(sign_adj(r) < 0.0, "p_thr=+1 {:?}", r.source);
        }
        for r in &minus {
            assert!(sign_adj(r) > 0.0, "p_thr=-1 {:?}", r.source);
        }
    }
}
