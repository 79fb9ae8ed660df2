//! Wigner functions from truncated density matrices, plus the reduced
//! profile diagnostics that expose non-Gaussian tails.
//!
//! Convention: X = (a + a^dag)/sqrt(2), and the phase-space density
//! integrates to one, W(X, P) = (1/pi) Int <X+y| rho |X-y> exp(-2iPy) dy.

use ndarray::Array2;
use thiserror::Error;

use crate::qme::DensityMatrix;

/// Oscillator eigenfunctions psi_0..psi_nmax at one point, by the scaled
/// recurrence with the Gaussian weight folded in; stays bounded for any
/// order used here (naive Hermite values overflow beyond order ~30).
pub fn oscillator_eigenfunctions(nmax: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    let psi0 = (-0.5 * x * x).exp() * std::f64::consts::PI.powf(-0.25);
    out.push(psi0);
    if nmax == 0 {
        return;
    }
    out.push(std::f64::consts::SQRT_2 * x * psi0);
    for n in 1..nmax {
        let np1 = (n + 1) as f64;
        let next = (2.0 / np1).sqrt() * x * out[n] - ((n as f64) / np1).sqrt() * out[n - 1];
        out.push(next);
    }
}

/// Wigner values on an (X, P) product grid.
#[derive(Clone, Debug)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// w[(i, j)] = W(xs[i], ps[j]).
    pub w: Array2<f64>,
    /// Integral of W over the grid (should be 1 for a covering grid).
    pub norm: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum WignerError {
    #[error("grid must have at least two points per axis")]
    DegenerateGrid,
    #[error("reference variance must be positive, got {0}")]
    NonPositiveVariance(f64),
}

/// Evenly spaced grid of `points` values spanning `lo..=hi`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + step * i as f64).collect()
}

/// Default grid: `points` x `points` covering six standard deviations of both
/// quadratures around the mean.
pub fn default_grid(mean_x: f64, var_x: f64, var_p: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    let span = 6.0 * var_x.max(var_p).sqrt().max(0.5);
    (
        linspace(mean_x - span, mean_x + span, points),
        linspace(-span, span, points),
    )
}

/// Evaluate the Wigner function by direct quadrature of the defining
/// integral, using the oscillator eigenfunction expansion of rho. The
/// integrand decays like a Gaussian, so the trapezoid rule converges
/// spectrally once the oscillation of exp(-2iPy) is resolved.
pub fn wigner_from_rho(rho: &DensityMatrix, xs: &[f64], ps: &[f64]) -> WignerGrid {
    let dim = rho.dim();
    let nmax = rho.cutoff();
    // support radius of the highest basis function plus Gaussian tails
    let support = (2.0 * (nmax as f64 + 1.0)).sqrt() + 5.0;
    let x_abs = xs.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let y_max = support + x_abs;
    let p_abs = ps.iter().fold(0.0f64, |a, &p| a.max(p.abs()));
    // resolve both the basis structure and the cos(2 P y) oscillation
    let dy_target = (0.02f64).min(std::f64::consts::PI / (8.0 * p_abs.max(1.0)));
    let n_half = (y_max / dy_target).ceil() as usize;
    let dy = y_max / n_half as f64;
    let ys: Vec<f64> = (-(n_half as isize)..=n_half as isize)
        .map(|i| i as f64 * dy)
        .collect();

    let mut w = Array2::zeros((xs.len(), ps.len()));
    let mut u_plus = Vec::with_capacity(dim);
    let mut u_minus = Vec::with_capacity(dim);
    let mut f_of_y = vec![0.0f64; ys.len()];
    for (ix, &x) in xs.iter().enumerate() {
        for (iy, &y) in ys.iter().enumerate() {
            oscillator_eigenfunctions(nmax, x + y, &mut u_plus);
            oscillator_eigenfunctions(nmax, x - y, &mut u_minus);
            // u(x+y)^T rho u(x-y)
            let mut acc = 0.0;
            for i in 0..dim {
                let ui = u_plus[i];
                if ui == 0.0 {
                    continue;
                }
                let row = rho.data.row(i);
                let mut inner = 0.0;
                for j in 0..dim {
                    inner += row[j] * u_minus[j];
                }
                acc += ui * inner;
            }
            f_of_y[iy] = acc;
        }
        for (ip, &p) in ps.iter().enumerate() {
            let mut acc = 0.0;
            for (iy, &y) in ys.iter().enumerate() {
                acc += f_of_y[iy] * (2.0 * p * y).cos();
            }
            w[(ix, ip)] = acc * dy / std::f64::consts::PI;
        }
    }

    let dx = xs[1] - xs[0];
    let dp = ps[1] - ps[0];
    let norm = w.sum() * dx * dp;
    WignerGrid {
        xs: xs.to_vec(),
        ps: ps.to_vec(),
        w,
        norm,
    }
}

/// Marginal over momentum: W_X(X) = Int W dP.
pub fn reduced_profile(grid: &WignerGrid) -> Vec<f64> {
    let dp = grid.ps[1] - grid.ps[0];
    (0..grid.xs.len())
        .map(|ix| grid.w.row(ix).sum() * dp)
        .collect()
}

/// Reduced profile compared against the Gaussian of the same mean and
/// variance; `deviation[i] = W_X(x_i)/W_gauss(x_i) - 1`.
#[derive(Clone, Debug)]
pub struct ReducedComparison {
    pub w_x: Vec<f64>,
    pub w_gauss: Vec<f64>,
    pub deviation: Vec<f64>,
}

pub fn reduced_and_reference(
    grid: &WignerGrid,
    mean_x: f64,
    var_x: f64,
) -> Result<ReducedComparison, WignerError> {
    if grid.xs.len() < 2 || grid.ps.len() < 2 {
        return Err(WignerError::DegenerateGrid);
    }
    if !(var_x > 0.0) {
        return Err(WignerError::NonPositiveVariance(var_x));
    }
    let w_x = reduced_profile(grid);
    let norm = 1.0 / (2.0 * std::f64::consts::PI * var_x).sqrt();
    let w_gauss: Vec<f64> = grid
        .xs
        .iter()
        .map(|&x| norm * (-(x - mean_x) * (x - mean_x) / (2.0 * var_x)).exp())
        .collect();
    let deviation = w_x
        .iter()
        .zip(&w_gauss)
        .map(|(&a, &b)| a / b - 1.0)
        .collect();
    Ok(ReducedComparison {
        w_x,
        w_gauss,
        deviation,
    })
}

/// Mean, variance and third central moment of the reduced profile.
pub fn profile_moments(grid: &WignerGrid) -> (f64, f64, f64) {
    let w_x = reduced_profile(grid);
    let dx = grid.xs[1] - grid.xs[0];
    let total: f64 = w_x.iter().sum::<f64>() * dx;
    let mean: f64 = grid.xs.iter().zip(&w_x).map(|(&x, &w)| x * w).sum::<f64>() * dx / total;
    let mut var = 0.0;
    let mut third = 0.0;
    for (&x, &w) in grid.xs.iter().zip(&w_x) {
        let d = x - mean;
        var += d * d * w;
        third += d * d * d * w;
    }
    (mean, var * dx / total, third * dx / total)
}

/// Wigner value at the grid point closest to (x, p).
pub fn value_at(grid: &WignerGrid, x: f64, p: f64) -> f64 {
    let ix = nearest(&grid.xs, x);
    let ip = nearest(&grid.ps, p);
    grid.w[(ix, ip)]
}

fn nearest(axis: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut dist = f64::INFINITY;
    for (i, &a) in axis.iter().enumerate() {
        let d = (a - v).abs();
        if d < dist {
            dist = d;
            best = i;
        }
    }
    best
}

/// CSV dump, one row per grid point: x, p, w.
pub fn grid_csv(grid: &WignerGrid) -> String {
    let mut out = String::from("x,p,w\n");
    for (ix, &x) in grid.xs.iter().enumerate() {
        for (ip, &p) in grid.ps.iter().enumerate() {
            out.push_str(&format!("{x:.9e},{p:.9e},{:.12e}\n", grid.w[(ix, ip)]));
        }
    }
    out
}

/// CSV dump of the reduced profile and its Gaussian reference.
pub fn reduced_csv(xs: &[f64], cmp: &ReducedComparison) -> String {
    let mut out = String::from("x,w_x,w_gauss,deviation\n");
    for (i, &x) in xs.iter().enumerate() {
        out.push_str(&format!(
            "{x:.9e},{:.12e},{:.12e},{:.12e}\n",
            cmp.w_x[i], cmp.w_gauss[i], cmp.deviation[i]
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn eigenfunctions_are_orthonormal() {
        let xs = linspace(-12.0, 12.0, 2401);
        let dx = xs[1] - xs[0];
        let mut buf = Vec::new();
        let mut gram = [[0.0f64; 6]; 6];
        for &x in &xs {
            oscillator_eigenfunctions(5, x, &mut buf);
            for i in 0..6 {
                for j in 0..6 {
                    gram[i][j] += buf[i] * buf[j] * dx;
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[i][j], expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn eigenfunctions_stay_bounded_at_high_order() {
        let mut buf = Vec::new();
        for &x in &[0.0, 3.0, 9.5, -9.5] {
            oscillator_eigenfunctions(45, x, &mut buf);
            assert!(buf.iter().all(|v| v.is_finite() && v.abs() < 2.0));
        }
    }

    #[test]
    fn vacuum_peak_value() {
        let rho = DensityMatrix::vacuum(6);
        let (xs, ps) = default_grid(0.0, 0.5, 0.5, 101);
        let grid = wigner_from_rho(&rho, &xs, &ps);
        assert_relative_eq!(
            value_at(&grid, 0.0, 0.0),
            1.0 / std::f64::consts::PI,
            max_relative = 1e-6
        );
        assert_abs_diff_eq!(grid.norm, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn fock_one_is_negative_at_origin() {
        let rho = DensityMatrix::fock(1, 8);
        let (xs, ps) = default_grid(0.0, 1.5, 1.5, 101);
        let grid = wigner_from_rho(&rho, &xs, &ps);
        assert_relative_eq!(
            value_at(&grid, 0.0, 0.0),
            -1.0 / std::f64::consts::PI,
            max_relative = 1e-6
        );
        assert_abs_diff_eq!(grid.norm, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn coherent_state_grid_moments() {
        let rho = DensityMatrix::coherent(1.0, 24);
        let m = rho.moments();
        let (xs, ps) = default_grid(m.mean_x, m.var_x, m.var_p, 161);
        let grid = wigner_from_rho(&rho, &xs, &ps);
        let (mean, var, third) = profile_moments(&grid);
        assert_abs_diff_eq!(mean, m.mean_x, epsilon = 1e-3);
        assert_abs_diff_eq!(var, m.var_x, epsilon = 1e-3);
        assert_abs_diff_eq!(third, m.skew_self, epsilon = 1e-3);
    }

    #[test]
    fn vacuum_reduced_profile_is_gaussian() {
        let rho = DensityMatrix::vacuum(6);
        let (xs, ps) = default_grid(0.0, 0.5, 0.5, 161);
        let grid = wigner_from_rho(&rho, &xs, &ps);
        let cmp = reduced_and_reference(&grid, 0.0, 0.5).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            if x.abs() <= 3.0 * (0.5f64).sqrt() {
                assert!(
                    cmp.deviation[i].abs() < 1e-3,
                    "x={x}: dev {}",
                    cmp.deviation[i]
                );
            }
        }
    }

    #[test]
    fn marginal_normalization() {
        let rho = DensityMatrix::coherent(0.8, 16);
        let (xs, ps) = default_grid(0.8 * std::f64::consts::SQRT_2, 0.5, 0.5, 121);
        let grid = wigner_from_rho(&rho, &xs, &ps);
        let w_x = reduced_profile(&grid);
        let dx = xs[1] - xs[0];
        let total: f64 = w_x.iter().sum::<f64>() * dx;
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn rejects_bad_reference_variance() {
        let rho = DensityMatrix::vacuum(4);
        let (xs, ps) = default_grid(0.0, 0.5, 0.5, 41);
        let grid = wigner_from_rho(&rho, &xs, &ps);
        assert!(matches!(
            reduced_and_reference(&grid, 0.0, 0.0),
            Err(WignerError::NonPositiveVariance(_))
        ));
    }
}
