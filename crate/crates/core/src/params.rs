//! Scalar model parameters shared by every simulation model, and the derived
//! quantities (beam-splitter split, probe squeezing coefficients, amplitude
//! control target) computed from them once at campaign start.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which simulation model a campaign runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Continuous-time five-moment closure (mean, two variances, two skews).
    SkewGaussian,
    /// Continuous-time three-moment closure (skews held at zero).
    Gaussian,
    /// Gaussian closure without the variance-product saturation terms.
    Gapp,
    /// Continuous-time stochastic master equation in the photon-number basis.
    QmeCt,
    /// Discrete-component (per round trip) skew-Gaussian pipeline.
    DcSkewGaussian,
    /// Discrete-component Gaussian pipeline.
    DcGaussian,
    /// Discrete-component two-mode density-matrix pipeline.
    DcQme,
}

/// Form of the auxiliary-variable update used for chaotic amplitude control.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CacVariant {
    /// de/dt = -beta (mu_tilde^2 - tau) e
    Standard,
    /// de/dt = -beta (g^2 mu_tilde^2 - tau) e, used for large-photon operation.
    LargePhoton,
}

/// How the amplitude-control target `tau` is assembled from `tau0`.
///
/// `ContinuousTime` and `DiscreteComponent` add the model-specific offset that
/// compensates the probe-noise contribution to the squared measured value;
/// `Direct` uses `tau0` verbatim (large-photon operation).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauFormula {
    ContinuousTime,
    DiscreteComponent,
    Direct,
}

/// All scalar model parameters.
///
/// Rates are normalized to the background amplitude decay rate, so `dt`, `j`
/// and `p` are dimensionless. Physical pump/nonlinearity constants are already
/// absorbed into `p` and `g2` and have no separate representation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SystemParams {
    /// Normalized pump rate.
    pub p: f64,
    /// Saturation (two-photon absorption) coefficient g².
    pub g2: f64,
    /// Normalized coupling loss, j = j1/2 + j2/2.
    pub j: f64,
    /// Ratio of beam-splitter reflectivities R = R1/R2.
    pub r_ratio: f64,
    /// Probe squeeze gain G_j >= 1 (1 = vacuum probe).
    pub gj: f64,
    /// Round-trip / integration step in normalized time.
    pub dt: f64,
    /// Amplitude-control strength.
    pub beta: f64,
    /// Actual amplitude target tau_0 (squared internal amplitude).
    pub tau0: f64,
    /// Initial value of the auxiliary control variables e_r(0).
    pub e_init: f64,
    pub cac: CacVariant,
    pub model: ModelKind,
}

impl SystemParams {
    /// Convenience constructor with the standard CAC variant.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: ModelKind,
        p: f64,
        g2: f64,
        j: f64,
        r_ratio: f64,
        gj: f64,
        dt: f64,
        beta: f64,
        tau0: f64,
        e_init: f64,
    ) -> Self {
        Self {
            p,
            g2,
            j,
            r_ratio,
            gj,
            dt,
            beta,
            tau0,
            e_init,
            cac: CacVariant::Standard,
            model,
        }
    }
}

/// Quantities derived from [`SystemParams`]; validated once, then shared
/// read-only by every trajectory.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Extraction-side coupling loss, j1 = 2R/(1+R) j.
    pub j1: f64,
    /// Injection-side coupling loss, j2 = 2/(1+R) j.
    pub j2: f64,
    /// Intensity reflection of the extraction beam splitter, R1 = j1 dt.
    pub r1: f64,
    /// Intensity reflection of the injection beam splitter, R2 = j2 dt.
    pub r2: f64,
    /// Thermal-like probe coefficient n_j = (G_j + 1/G_j)/4 - 1/2.
    pub nj: f64,
    /// Anomalous probe coefficient m_j = (G_j - 1/G_j)/4.
    pub mj: f64,
    /// Amplitude-control target, including the formula-specific noise offset.
    pub tau: f64,
    /// Standard deviation of the per-step measured-amplitude noise,
    /// 1/sqrt(4 j1 G_j dt).
    pub noise_std: f64,
}

/// Probe squeezing coefficients on their own; they satisfy
/// `nj (1 + nj) = mj^2` exactly up to rounding.
#[derive(Clone, Copy, Debug)]
pub struct SqueezeParams {
    pub nj: f64,
    pub mj: f64,
}

impl SqueezeParams {
    pub fn from_gain(gj: f64) -> Self {
        let nj = 0.25 * (gj + 1.0 / gj) - 0.5;
        let mj = 0.25 * (gj - 1.0 / gj);
        Self { nj, mj }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("dt must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("probe gain G_j must be >= 1, got {0}")]
    GainBelowOne(f64),
    #[error("coupling loss j must be >= 0, got {0}")]
    NegativeJ(f64),
    #[error("reflection ratio R must be positive, got {0}")]
    NonPositiveRatio(f64),
    #[error("saturation coefficient g^2 must be >= 0, got {0}")]
    NegativeG2(f64),
    #[error("j = 0 gives an infinite measurement-noise target correction; use TauFormula::Direct")]
    ZeroJTauCorrection,
    #[error("discrete-component target requires 1 - p + j != 0 (p = {p}, j = {j})")]
    PumpBalancesLoss { p: f64, j: f64 },
}

/// Validate raw parameters and compute the derived set.
///
/// The `tau` member of the result depends on the chosen formula:
/// continuous-time adds `1/(4 j1 G_j dt)` to `tau0`, the discrete-component
/// form additionally compensates the linearized internal variance, and
/// `Direct` passes `tau0` through unchanged.
pub fn derive_params(raw: &SystemParams, formula: TauFormula) -> Result<DerivedParams, ParamError> {
    if !(raw.dt > 0.0) {
        return Err(ParamError::NonPositiveDt(raw.dt));
    }
    if !(raw.gj >= 1.0) {
        return Err(ParamError::GainBelowOne(raw.gj));
    }
    if !(raw.j >= 0.0) {
        return Err(ParamError::NegativeJ(raw.j));
    }
    if !(raw.r_ratio > 0.0) {
        return Err(ParamError::NonPositiveRatio(raw.r_ratio));
    }
    if !(raw.g2 >= 0.0) {
        return Err(ParamError::NegativeG2(raw.g2));
    }
    let j1 = 2.0 * raw.r_ratio / (1.0 + raw.r_ratio) * raw.j;
    let j2 = 2.0 / (1.0 + raw.r_ratio) * raw.j;
    let SqueezeParams { nj, mj } = SqueezeParams::from_gain(raw.gj);
    let tau = match formula {
        TauFormula::ContinuousTime => {
            if j1 == 0.0 {
                return Err(ParamError::ZeroJTauCorrection);
            }
            raw.tau0 + 1.0 / (4.0 * j1 * raw.gj * raw.dt)
        }
        TauFormula::DiscreteComponent => {
            if j1 == 0.0 {
                return Err(ParamError::ZeroJTauCorrection);
            }
            let denom = 1.0 - raw.p + raw.j;
            if denom == 0.0 {
                return Err(ParamError::PumpBalancesLoss { p: raw.p, j: raw.j });
            }
            raw.tau0
                + (1.0 - j1 * raw.dt) / (4.0 * raw.gj * j1 * raw.dt)
                + (1.0 + j1 / (2.0 * raw.gj) + j2 / 2.0) / (4.0 * denom)
        }
        TauFormula::Direct => raw.tau0,
    };
    // with no probe path (j1 = 0) there is no measurement; the inferred value
    // then degenerates to the mean amplitude
    let noise_std = if j1 > 0.0 {
        1.0 / (4.0 * j1 * raw.gj * raw.dt).sqrt()
    } else {
        0.0
    };
    Ok(DerivedParams {
        j1,
        j2,
        r1: j1 * raw.dt,
        r2: j2 * raw.dt,
        nj,
        mj,
        tau,
        noise_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn base() -> SystemParams {
        SystemParams::new(
            ModelKind::SkewGaussian,
            0.8,
            4.0,
            5.0,
            9.0,
            2.0,
            2.5e-4,
            0.1,
            0.5,
            0.4,
        )
    }

    #[test]
    fn reflectivity_split() {
        let d = derive_params(&base(), TauFormula::ContinuousTime).unwrap();
        assert_eq!(d.j1, 9.0);
        assert_eq!(d.j2, 1.0);
        // j1/2 + j2/2 = j exactly for these values
        assert_eq!(0.5 * d.j1 + 0.5 * d.j2, 5.0);
    }

    #[test]
    fn split_sums_to_total_loss() {
        for &r in &[0.1, 0.5, 1.0, 3.0, 9.0, 100.0] {
            for &j in &[0.0, 0.3, 5.0, 100.0] {
                let mut raw = base();
                raw.r_ratio = r;
                raw.j = j;
                let d = derive_params(&raw, TauFormula::Direct).unwrap();
                assert_relative_eq!(d.j1 + d.j2, 2.0 * j, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn vacuum_probe_has_no_squeezing() {
        let s = SqueezeParams::from_gain(1.0);
        assert_eq!(s.nj, 0.0);
        assert_eq!(s.mj, 0.0);
    }

    #[test]
    fn squeeze_coefficients_consistency() {
        for &gj in &[1.0, 1.1, 1.5, 2.0, 5.0, 20.0] {
            let s = SqueezeParams::from_gain(gj);
            assert_abs_diff_eq!(s.nj * (1.0 + s.nj), s.mj * s.mj, epsilon = 1e-12);
        }
    }

    #[test]
    fn measured_noise_std_matches_operating_point() {
        // dt = 2.5e-4, G_j = 2, j = 5, R = 9 puts the measurement noise near 7.5
        let d = derive_params(&base(), TauFormula::ContinuousTime).unwrap();
        assert_relative_eq!(d.noise_std, 7.45356, max_relative = 1e-5);
        assert_relative_eq!(d.tau, 0.5 + 1.0 / 0.018, max_relative = 1e-12);
    }

    #[test]
    fn discrete_target_value() {
        let mut raw = base();
        raw.p = 2.0;
        raw.g2 = 5.0;
        raw.gj = 1.1;
        raw.j = 10.0;
        raw.dt = 3.2e-3;
        raw.tau0 = 1.0;
        let d = derive_params(&raw, TauFormula::DiscreteComponent).unwrap();
        // j1 = 18, j2 = 2, 1 - p + j = 9
        let expect = 1.0 + (1.0 - 18.0 * 3.2e-3) / (4.0 * 1.1 * 18.0 * 3.2e-3)
            + (1.0 + 18.0 / 2.2 + 1.0) / 36.0;
        assert_relative_eq!(d.tau, expect, max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut raw = base();
        raw.dt = 0.0;
        assert!(matches!(
            derive_params(&raw, TauFormula::Direct),
            Err(ParamError::NonPositiveDt(_))
        ));

        let mut raw = base();
        raw.gj = 0.9;
        assert!(matches!(
            derive_params(&raw, TauFormula::Direct),
            Err(ParamError::GainBelowOne(_))
        ));

        let mut raw = base();
        raw.j = 0.0;
        assert!(matches!(
            derive_params(&raw, TauFormula::ContinuousTime),
            Err(ParamError::ZeroJTauCorrection)
        ));
        // direct target is fine without coupling
        assert!(derive_params(&raw, TauFormula::Direct).is_ok());

        let mut raw = base();
        raw.p = 1.0 + raw.j;
        assert!(matches!(
            derive_params(&raw, TauFormula::DiscreteComponent),
            Err(ParamError::PumpBalancesLoss { .. })
        ));
    }
}
