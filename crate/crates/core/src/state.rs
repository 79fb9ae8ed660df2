//! Per-pulse state in its two equivalent five-variable forms.
//!
//! The moment form holds centered ladder-operator moments of a single optical
//! pulse; the quadrature form holds the observable canonical-coordinate
//! statistics. Both assume a real mean amplitude and zero mean momentum, so
//! the conversion between them is a linear bijection.

use serde::{Deserialize, Serialize};

/// Centered ladder-operator moments: mean amplitude mu = <a>, anomalous
/// second moment m = <da^2>, occupation fluctuation n = <da^dag da>, and the
/// two third-order products gamma = <da^3>, kappa = <da^dag da^2>.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub mu: f64,
    pub m: f64,
    pub n: f64,
    pub gamma: f64,
    pub kappa: f64,
}

/// Canonical-coordinate statistics: mean <X>, variances <dX^2>, <dP^2>,
/// self-skewness <dX^3> and cross-skewness <dX dP^2>.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadratureState {
    pub mean_x: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub skew_self: f64,
    pub skew_cross: f64,
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

impl MomentState {
    /// Vacuum: every centered moment is zero.
    pub fn vacuum() -> Self {
        Self::default()
    }

    pub fn to_quadrature(&self) -> QuadratureState {
        QuadratureState {
            mean_x: SQRT2 * self.mu,
            var_x: self.n + self.m + 0.5,
            var_p: self.n - self.m + 0.5,
            skew_self: (self.gamma + 3.0 * self.kappa) / SQRT2,
            skew_cross: (-self.gamma + self.kappa) / SQRT2,
        }
    }

    /// Mean photon number <a^dag a> = n + mu^2.
    pub fn photon_number(&self) -> f64 {
        self.n + self.mu * self.mu
    }

    pub fn is_finite(&self) -> bool {
        self.mu.is_finite()
            && self.m.is_finite()
            && self.n.is_finite()
            && self.gamma.is_finite()
            && self.kappa.is_finite()
    }
}

impl QuadratureState {
    /// Vacuum: <dX^2> = <dP^2> = 1/2, everything else zero.
    pub fn vacuum() -> Self {
        QuadratureState {
            mean_x: 0.0,
            var_x: 0.5,
            var_p: 0.5,
            skew_self: 0.0,
            skew_cross: 0.0,
        }
    }

    pub fn to_moments(&self) -> MomentState {
        MomentState {
            mu: self.mean_x / SQRT2,
            m: 0.5 * (self.var_x - self.var_p),
            n: 0.5 * (self.var_x + self.var_p - 1.0),
            gamma: (self.skew_self - 3.0 * self.skew_cross) / (2.0 * SQRT2),
            kappa: (self.skew_self + self.skew_cross) / (2.0 * SQRT2),
        }
    }

    pub fn photon_number(&self) -> f64 {
        0.5 * (self.var_x + self.var_p - 1.0) + 0.5 * self.mean_x * self.mean_x
    }

    pub fn is_finite(&self) -> bool {
        self.mean_x.is_finite()
            && self.var_x.is_finite()
            && self.var_p.is_finite()
            && self.skew_self.is_finite()
            && self.skew_cross.is_finite()
    }
}

/// A pulse state in whichever form the caller currently holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PulseState {
    Moments(MomentState),
    Quadratures(QuadratureState),
}

impl PulseState {
    /// Convert to the other form. Total on valid states; applying it twice is
    /// the identity up to rounding.
    pub fn converted(&self) -> PulseState {
        match self {
            PulseState::Moments(s) => PulseState::Quadratures(s.to_quadrature()),
            PulseState::Quadratures(s) => PulseState::Moments(s.to_moments()),
        }
    }
}
