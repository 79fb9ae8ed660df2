//! Stochastic master equation in the truncated photon-number basis.
//!
//! Density matrices here are real and symmetric: every generator used in this
//! crate (parametric gain, one- and two-photon loss, squeezed-probe terms,
//! coherent drive along X, and the homodyne back-action rows) maps real
//! symmetric matrices to real symmetric matrices, so only the upper triangle
//! is propagated and the mirror copy keeps Hermiticity exact.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

use crate::instances::{spins_from_amplitudes, Instance};
use crate::noise::TrajectoryNoise;
use crate::params::{DerivedParams, SystemParams};
use crate::record::{EnergyCheck, EnergyTracker, ReadoutMode, RecordSpec, SnapshotRow, TrajectoryRecord};

/// Truncated single-mode density matrix (photon numbers 0..=cutoff).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub data: Array2<f64>,
}

impl DensityMatrix {
    pub fn vacuum(cutoff: usize) -> Self {
        let mut data = Array2::zeros((cutoff + 1, cutoff + 1));
        data[(0, 0)] = 1.0;
        Self { data }
    }

    pub fn fock(k: usize, cutoff: usize) -> Self {
        assert!(k <= cutoff);
        let mut data = Array2::zeros((cutoff + 1, cutoff + 1));
        data[(k, k)] = 1.0;
        Self { data }
    }

    /// Coherent state |alpha> truncated and renormalized at the cutoff.
    pub fn coherent(alpha: f64, cutoff: usize) -> Self {
        let dim = cutoff + 1;
        let mut c = vec![0.0f64; dim];
        c[0] = 1.0;
        for k in 1..dim {
            c[k] = c[k - 1] * alpha / (k as f64).sqrt();
        }
        let norm: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut data = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                data[(i, j)] = c[i] * c[j] / (norm * norm);
            }
        }
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn cutoff(&self) -> usize {
        self.dim() - 1
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.data[(i, i)]).sum()
    }

    pub fn normalize(&mut self) {
        let tr = self.trace();
        self.data.mapv_inplace(|v| v / tr);
    }

    /// Largest |rho_ij - rho_ji|.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for j in (i + 1)..self.dim() {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)]).abs());
            }
        }
        worst
    }

    /// Population stuck at the truncation level.
    pub fn leakage(&self) -> f64 {
        let k = self.cutoff();
        self.data[(k, k)]
    }

    /// Expectation <a + a^dag> (twice the real mean amplitude).
    pub fn mean_x_operator(&self) -> f64 {
        let mut acc = 0.0;
        for n in 0..self.cutoff() {
            acc += ((n + 1) as f64).sqrt() * (self.data[(n + 1, n)] + self.data[(n, n + 1)]);
        }
        acc
    }

    /// Centered moments and quadrature observables.
    pub fn moments(&self) -> RhoMoments {
        let d = self.dim();
        let get = |i: usize, j: usize| self.data[(i, j)];
        let mut a1 = 0.0; // <a>
        let mut a2 = 0.0; // <a^2>
        let mut nbar = 0.0; // <a^dag a>
        let mut a3 = 0.0; // <a^3>
        let mut ada2 = 0.0; // <a^dag a^2> = sum_M sqrt(M)(M-1) rho_{M,M-1}
        for n in 0..d {
            let nf = n as f64;
            nbar += nf * get(n, n);
            if n + 1 < d {
                a1 += ((n + 1) as f64).sqrt() * get(n + 1, n);
                ada2 += ((n + 1) as f64).sqrt() * nf * get(n + 1, n);
            }
            if n + 2 < d {
                a2 += (((n + 1) * (n + 2)) as f64).sqrt() * get(n + 2, n);
            }
            if n + 3 < d {
                a3 += (((n + 1) * (n + 2) * (n + 3)) as f64).sqrt() * get(n + 3, n);
            }
        }
        let mu = a1;
        let m2 = a2 - mu * mu;
        let n2 = nbar - mu * mu;
        let gamma = a3 - 3.0 * mu * a2 + 2.0 * mu * mu * mu;
        let kappa = ada2 - 2.0 * mu * nbar - mu * a2 + 2.0 * mu * mu * mu;
        let sqrt2 = std::f64::consts::SQRT_2;
        RhoMoments {
            mu,
            m: m2,
            n: n2,
            gamma,
            kappa,
            mean_x: sqrt2 * mu,
            var_x: n2 + m2 + 0.5,
            var_p: n2 - m2 + 0.5,
            skew_self: (gamma + 3.0 * kappa) / sqrt2,
            skew_cross: (-gamma + kappa) / sqrt2,
            photon: nbar,
        }
    }

    /// Smallest eigenvalue via cyclic Jacobi; diagnostic only.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let mut a = self.data.clone();
        for _sweep in 0..30 {
            let mut off = 0.0;
            for p in 0..d {
                for q in (p + 1)..d {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = a[(p, q)];
                    if apq.abs() < 1e-18 {
                        continue;
                    }
                    let theta = 0.5 * (a[(q, q)] - a[(p, p)]) / apq;
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..d).map(|i| a[(i, i)]).fold(f64::INFINITY, f64::min)
    }
}

/// Quadrature and ladder observables extracted from a density matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RhoMoments {
    pub mu: f64,
    pub m: f64,
    pub n: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub mean_x: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub skew_self: f64,
    pub skew_cross: f64,
    pub photon: f64,
}

/// Coefficients of the deterministic generator. `loss` multiplies the
/// one-photon-loss pair, `jfp`/`jfpp` the feedback-uncertainty and squeezed
/// probe double-commutator rows, `eps` the coherent drive.
#[derive(Clone, Copy, Debug, Default)]
pub struct DetCoeffs {
    pub loss: f64,
    pub jfp: f64,
    pub jfpp: f64,
    pub g2: f64,
    pub p: f64,
    pub eps: f64,
}

#[inline]
fn at(rho: &Array2<f64>, dim: usize, i: isize, j: isize) -> f64 {
    if i < 0 || j < 0 || i as usize >= dim || j as usize >= dim {
        0.0
    } else {
        rho[(i as usize, j as usize)]
    }
}

/// Deterministic right-hand side, accumulated as `out += rhs(rho) * scale`.
/// Only the upper triangle of `out` is touched; callers mirror afterwards.
pub fn accumulate_rhs_det(rho: &Array2<f64>, c: &DetCoeffs, scale: f64, out: &mut Array2<f64>) {
    let dim = rho.nrows();
    let sq = |v: isize| -> f64 { (v as f64).sqrt() };
    for nr in 0..dim as isize {
        for nc in nr..dim as isize {
            let nrf = nr as f64;
            let ncf = nc as f64;
            let mut acc = 0.0;
            // one-photon loss (background + both beam splitters + feedback noise)
            acc += 2.0 * c.loss * sq((nr + 1) * (nc + 1)) * at(rho, dim, nr + 1, nc + 1)
                - c.loss * (nrf + ncf) * rho[(nr as usize, nc as usize)];
            if c.jfp != 0.0 {
                acc += 2.0 * c.jfp * sq(nr * nc) * at(rho, dim, nr - 1, nc - 1)
                    - c.jfp * (nrf + ncf + 2.0) * rho[(nr as usize, nc as usize)];
            }
            if c.jfpp != 0.0 {
                acc += c.jfpp
                    * (-2.0 * sq((nr + 1) * nc) * at(rho, dim, nr + 1, nc - 1)
                        + sq((nr + 1) * (nr + 2)) * at(rho, dim, nr + 2, nc)
                        + sq(nc * (nc - 1)) * at(rho, dim, nr, nc - 2)
                        - 2.0 * sq(nr * (nc + 1)) * at(rho, dim, nr - 1, nc + 1)
                        + sq((nc + 1) * (nc + 2)) * at(rho, dim, nr, nc + 2)
                        + sq(nr * (nr - 1)) * at(rho, dim, nr - 2, nc));
            }
            // two-photon absorption
            acc += c.g2 * sq((nr + 1) * (nr + 2)) * sq((nc + 1) * (nc + 2))
                * at(rho, dim, nr + 2, nc + 2)
                - 0.5
                    * c.g2
                    * (nrf * (nrf - 1.0) + ncf * (ncf - 1.0))
                    * rho[(nr as usize, nc as usize)];
            // coherent drive along X
            if c.eps != 0.0 {
                acc += c.eps
                    * (sq(nr) * at(rho, dim, nr - 1, nc) + sq(nc) * at(rho, dim, nr, nc - 1)
                        - sq(nr + 1) * at(rho, dim, nr + 1, nc)
                        - sq(nc + 1) * at(rho, dim, nr, nc + 1));
            }
            // parametric gain
            acc += 0.5
                * c.p
                * (sq(nr * (nr - 1)) * at(rho, dim, nr - 2, nc)
                    + sq(nc * (nc - 1)) * at(rho, dim, nr, nc - 2)
                    - sq((nr + 1) * (nr + 2)) * at(rho, dim, nr + 2, nc)
                    - sq((nc + 1) * (nc + 2)) * at(rho, dim, nr, nc + 2));
            out[(nr as usize, nc as usize)] += scale * acc;
        }
    }
}

/// Homodyne back-action rows, accumulated as `out += rhs(rho) * scale` where
/// `scale` already contains the deviate and the sqrt(dt) factor. Upper
/// triangle only.
pub fn accumulate_rhs_measurement(
    rho: &Array2<f64>,
    gj: f64,
    j1: f64,
    mean_x_op: f64,
    scale: f64,
    out: &mut Array2<f64>,
) {
    let dim = rho.nrows();
    let amp = (j1 * gj).sqrt();
    let c_lower = amp * 0.5 * (1.0 + 1.0 / gj);
    let c_raise = amp * 0.5 * (1.0 - 1.0 / gj);
    let sq = |v: isize| -> f64 { (v as f64).sqrt() };
    for nr in 0..dim as isize {
        for nc in nr..dim as isize {
            let mut acc = 0.0;
            acc += c_lower
                * (sq(nr + 1) * at(rho, dim, nr + 1, nc) + sq(nc + 1) * at(rho, dim, nr, nc + 1));
            acc += c_raise
                * (sq(nr) * at(rho, dim, nr - 1, nc) + sq(nc) * at(rho, dim, nr, nc - 1));
            acc -= amp * mean_x_op * rho[(nr as usize, nc as usize)];
            out[(nr as usize, nc as usize)] += scale * acc;
        }
    }
}

fn mirror_upper(m: &mut Array2<f64>) {
    let dim = m.nrows();
    for i in 0..dim {
        for j in (i + 1)..dim {
            m[(j, i)] = m[(i, j)];
        }
    }
}

#[derive(Debug, Error)]
pub enum QmeError {
    #[error("trace deviated to {trace} at step {step}, site {site}; cutoff too small")]
    TraceDeviation { step: u64, site: usize, trace: f64 },
    #[error("non-finite density matrix at step {step}, site {site}")]
    NonFinite { step: u64, site: usize },
}

/// Cutoff and stepping controls for the stochastic solver.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QmeCtConfig {
    pub cutoff: usize,
    /// Deterministic sub-steps per measurement interval dt.
    pub substeps: u32,
    /// Evaluate the smallest eigenvalue at sampled steps (diagnostic).
    pub check_negativity: bool,
}

impl Default for QmeCtConfig {
    fn default() -> Self {
        Self {
            cutoff: 16,
            substeps: 1,
            check_negativity: false,
        }
    }
}

/// Multi-site state for the measurement-feedback master equation.
#[derive(Clone, Debug)]
pub struct QmeCtState {
    pub rhos: Vec<DensityMatrix>,
    pub e: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    pub t: f64,
    pub step: u64,
    pub max_leakage: f64,
    pub min_eig_seen: f64,
}

impl QmeCtState {
    pub fn vacuum(n: usize, cutoff: usize, e_init: f64) -> Self {
        Self {
            rhos: vec![DensityMatrix::vacuum(cutoff); n],
            e: vec![e_init; n],
            mu_tilde: vec![0.0; n],
            t: 0.0,
            step: 0,
            max_leakage: 0.0,
            min_eig_seen: f64::INFINITY,
        }
    }

    pub fn mean_amplitudes(&self) -> Vec<f64> {
        self.rhos.iter().map(|r| 0.5 * r.mean_x_operator()).collect()
    }
}

/// One measurement interval dt of the coupled stochastic master equation:
/// read out every site, build the feedback drives, advance each density
/// matrix (deterministic part sub-stepped, back-action applied once with this
/// interval's deviate), renormalize, and update the control variables.
pub fn qme_ct_step(
    state: &mut QmeCtState,
    inst: &Instance,
    sp: &SystemParams,
    dp: &DerivedParams,
    cfg: &QmeCtConfig,
    noise: &mut TrajectoryNoise,
    w_buf: &mut [f64],
    scratch: &mut Array2<f64>,
) -> Result<(), QmeError> {
    let n_sites = state.rhos.len();
    let dt = sp.dt;
    let sqdt = dt.sqrt();
    noise.fill_step(state.step, w_buf);

    let mean_x_ops: Vec<f64> = state.rhos.iter().map(|r| r.mean_x_operator()).collect();
    for r in 0..n_sites {
        state.mu_tilde[r] = 0.5 * mean_x_ops[r] + w_buf[r] * dp.noise_std;
    }

    for r in 0..n_sites {
        let mut eps = 0.0;
        let row = inst.j.row(r);
        for rp in 0..n_sites {
            eps += row[rp] * state.mu_tilde[rp];
        }
        eps *= sp.j * state.e[r];

        let jf = 0.5 * eps * eps * dt;
        let coeffs = DetCoeffs {
            loss: 1.0 + sp.j + (jf + 0.5 * dp.j1 * dp.nj),
            jfp: jf + 0.5 * dp.j1 * dp.nj,
            jfpp: jf - 0.5 * dp.j1 * dp.mj,
            g2: sp.g2,
            p: sp.p,
            eps,
        };

        let rho = &mut state.rhos[r];
        let dt_sub = dt / cfg.substeps as f64;
        for sub in 0..cfg.substeps {
            scratch.fill(0.0);
            accumulate_rhs_det(&rho.data, &coeffs, dt_sub, scratch);
            if sub == 0 {
                accumulate_rhs_measurement(
                    &rho.data,
                    sp.gj,
                    dp.j1,
                    mean_x_ops[r],
                    w_buf[r] * sqdt,
                    scratch,
                );
            }
            for i in 0..rho.dim() {
                for j in i..rho.dim() {
                    rho.data[(i, j)] += scratch[(i, j)];
                }
            }
            mirror_upper(&mut rho.data);
        }
        let tr = rho.trace();
        if !tr.is_finite() {
            return Err(QmeError::NonFinite {
                step: state.step,
                site: r,
            });
        }
        if (tr - 1.0).abs() > 0.1 {
            return Err(QmeError::TraceDeviation {
                step: state.step,
                site: r,
                trace: tr,
            });
        }
        rho.data.mapv_inplace(|v| v / tr);
        state.max_leakage = state.max_leakage.max(rho.leakage());

        state.e[r] = crate::ct::cac_update(
            state.e[r],
            state.mu_tilde[r],
            sp.beta,
            dp.tau,
            sp.g2,
            dt,
            sp.cac,
        );
    }

    state.step += 1;
    state.t = state.step as f64 * dt;
    Ok(())
}

/// Trajectory runner for the stochastic master equation; mirrors the
/// continuous-time moment-model runner.
pub fn run_trajectory_qme(
    inst: &Instance,
    sp: &SystemParams,
    dp: &DerivedParams,
    cfg: &QmeCtConfig,
    t_end: f64,
    noise: &mut TrajectoryNoise,
    spec: &RecordSpec,
) -> Result<TrajectoryRecord, QmeError> {
    let n_steps = crate::ct::steps_for(t_end, sp.dt);
    let mut state = QmeCtState::vacuum(inst.n, cfg.cutoff, sp.e_init);
    let mut w_buf = vec![0.0; inst.n];
    let mut scratch = Array2::zeros((cfg.cutoff + 1, cfg.cutoff + 1));
    let mut rec = TrajectoryRecord::default();
    let keep_series = spec.stride.is_some() && spec.energy_check == EnergyCheck::EveryStep;
    let mut tracker = EnergyTracker::new(spec.e0, keep_series);
    let mut photon_acc = 0.0;

    let energy_of = |state: &QmeCtState, readout: ReadoutMode| {
        let spins = match readout {
            ReadoutMode::Mean => spins_from_amplitudes(&state.mean_amplitudes()),
            _ => spins_from_amplitudes(&state.mu_tilde),
        };
        crate::instances::ising_energy(inst, &spins).expect("readout dimension")
    };

    let snapshot = |state: &QmeCtState, energy: f64| {
        let moments: Vec<RhoMoments> = state.rhos.iter().map(|r| r.moments()).collect();
        SnapshotRow {
            t: state.t,
            mu: moments.iter().map(|m| m.mu).collect(),
            var_x: moments.iter().map(|m| m.var_x).collect(),
            var_p: moments.iter().map(|m| m.var_p).collect(),
            skew_self: moments.iter().map(|m| m.skew_self).collect(),
            skew_cross: moments.iter().map(|m| m.skew_cross).collect(),
            e: state.e.clone(),
            mu_tilde: state.mu_tilde.clone(),
            energy,
        }
    };

    if spec.stride.is_some() {
        rec.rows.push(snapshot(&state, energy_of(&state, spec.readout)));
    }

    for k in 0..n_steps {
        qme_ct_step(
            &mut state,
            inst,
            sp,
            dp,
            cfg,
            noise,
            &mut w_buf,
            &mut scratch,
        )?;
        photon_acc += state.rhos.iter().map(|r| r.moments().photon).sum::<f64>()
            / inst.n as f64;
        let check = spec.energy_check == EnergyCheck::EveryStep || k + 1 == n_steps;
        if check {
            tracker.observe(state.step, state.t, energy_of(&state, spec.readout));
        }
        if let Some(stride) = spec.stride {
            if (k + 1) % stride as u64 == 0 || k + 1 == n_steps {
                if cfg.check_negativity {
                    for rho in &state.rhos {
                        state.min_eig_seen = state.min_eig_seen.min(rho.min_eigenvalue());
                    }
                }
                rec.rows.push(snapshot(&state, energy_of(&state, spec.readout)));
            }
        }
    }

    let amps = state.mean_amplitudes();
    rec.final_spins_mean = spins_from_amplitudes(&amps);
    rec.final_spins_measured = spins_from_amplitudes(&state.mu_tilde);
    rec.final_energy = energy_of(&state, spec.readout);
    rec.min_energy = if n_steps > 0 {
        tracker.min_energy
    } else {
        rec.final_energy
    };
    rec.min_energy_t = tracker.min_energy_t;
    rec.first_hit_t = tracker.first_hit_t;
    rec.first_hit_step = tracker.first_hit_step;
    rec.energies = tracker.energies;
    rec.energy_ts = tracker.energy_ts;
    rec.success = spec.e0.map(|e0| rec.final_energy <= e0 + 1e-9);
    let photon_final = state.rhos.iter().map(|r| r.moments().photon).sum::<f64>() / inst.n as f64;
    rec.photon_final = photon_final;
    rec.photon_time_avg = if n_steps > 0 {
        photon_acc / n_steps as f64
    } else {
        photon_final
    };
    rec.steps = n_steps;
    Ok(rec)
}

/// Write per-site density matrices with a small header; the wigner tooling
/// reads this back.
pub fn write_rho_snapshot<P: AsRef<Path>>(
    path: P,
    rhos: &[DensityMatrix],
    t: f64,
) -> std::io::Result<()> {
    let mut out = String::new();
    let cutoff = rhos.first().map_or(0, |r| r.cutoff());
    let _ = writeln!(out, "n {}", rhos.len());
    let _ = writeln!(out, "nm {cutoff}");
    let _ = writeln!(out, "t {t:.17e}");
    for rho in rhos {
        for i in 0..rho.dim() {
            let mut line = String::new();
            for j in 0..rho.dim() {
                if j > 0 {
                    line.push(' ');
                }
                let _ = write!(line, "{:.17e}", rho.data[(i, j)]);
            }
            out.push_str(&line);
            out.push('\n');
        }
    }
    std::fs::write(path, out)
}

/// Read a snapshot produced by [`write_rho_snapshot`]; returns the matrices
/// and the recorded time.
pub fn read_rho_snapshot<P: AsRef<Path>>(path: P) -> std::io::Result<(Vec<DensityMatrix>, f64)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let parse_err = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
    let n: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("n "))
        .ok_or_else(|| parse_err("missing n header"))?
        .trim()
        .parse()
        .map_err(|_| parse_err("bad n header"))?;
    let nm: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("nm "))
        .ok_or_else(|| parse_err("missing nm header"))?
        .trim()
        .parse()
        .map_err(|_| parse_err("bad nm header"))?;
    let t: f64 = lines
        .next()
        .and_then(|l| l.strip_prefix("t "))
        .ok_or_else(|| parse_err("missing t header"))?
        .trim()
        .parse()
        .map_err(|_| parse_err("bad t header"))?;
    let dim = nm + 1;
    let mut rhos = Vec::with_capacity(n);
    for _ in 0..n {
        let mut data = Array2::zeros((dim, dim));
        for i in 0..dim {
            let line = lines.next().ok_or_else(|| parse_err("truncated matrix"))?;
            let vals: Result<Vec<f64>, _> = line.split_whitespace().map(|v| v.parse()).collect();
            let vals = vals.map_err(|_| parse_err("bad matrix entry"))?;
            if vals.len() != dim {
                return Err(parse_err("wrong row length"));
            }
            for (j, v) in vals.into_iter().enumerate() {
                data[(i, j)] = v;
            }
        }
        rhos.push(DensityMatrix { data });
    }
    Ok((rhos, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_params, ModelKind, TauFormula};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn vacuum_moments() {
        let rho = DensityMatrix::vacuum(10);
        let m = rho.moments();
        assert_eq!(m.mu, 0.0);
        assert_eq!(m.var_x, 0.5);
        assert_eq!(m.var_p, 0.5);
        assert_eq!(m.skew_self, 0.0);
        assert_eq!(m.photon, 0.0);
    }

    #[test]
    fn fock_one_moments() {
        let rho = DensityMatrix::fock(1, 10);
        let m = rho.moments();
        assert_eq!(m.photon, 1.0);
        assert_eq!(m.mu, 0.0);
        assert_eq!(m.var_x, 1.5);
        assert_eq!(m.var_p, 1.5);
    }

    #[test]
    fn coherent_moments_truncated() {
        let rho = DensityMatrix::coherent(1.0, 20);
        let m = rho.moments();
        assert_abs_diff_eq!(m.mu, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(m.m, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(m.n, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(m.gamma, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(m.kappa, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn vacuum_is_deterministic_fixed_point() {
        let rho = DensityMatrix::vacuum(8);
        let coeffs = DetCoeffs {
            loss: 1.0,
            g2: 0.0,
            p: 0.0,
            ..Default::default()
        };
        let mut out = Array2::zeros((9, 9));
        accumulate_rhs_det(&rho.data, &coeffs, 1.0, &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pump_generates_photon_pairs() {
        // one deterministic Euler step from vacuum: rho_20 and rho_02 pick up
        // (p/2) sqrt(2) dt from the parametric term
        let p = 0.8;
        let dt = 1e-3;
        let rho = DensityMatrix::vacuum(8);
        let coeffs = DetCoeffs {
            loss: 1.0,
            p,
            ..Default::default()
        };
        let mut out = Array2::zeros((9, 9));
        accumulate_rhs_det(&rho.data, &coeffs, dt, &mut out);
        mirror_upper(&mut out);
        let expect = 0.5 * p * 2.0f64.sqrt() * dt;
        assert_abs_diff_eq!(out[(0, 2)], expect, epsilon = 1e-15);
        assert_abs_diff_eq!(out[(2, 0)], expect, epsilon = 1e-15);
        // cross-check against an independent operator-algebra evaluation:
        // d<a^2>/dt at vacuum must equal p
        let mut rho1 = rho.clone();
        rho1.data.zip_mut_with(&out, |a, b| *a += b);
        let da2 = (rho1.moments().m - rho.moments().m) / dt;
        assert_relative_eq!(da2, p, max_relative = 1e-9);
    }

    #[test]
    fn deterministic_part_preserves_trace_and_symmetry() {
        // random-ish symmetric rho with trace 1
        // deterministic filler with a rapidly decaying tail, so the cutoff
        // boundary carries no weight and the generator telescopes cleanly
        let dim = 14;
        let mut rho = DensityMatrix::vacuum(dim - 1);
        for i in 0..dim {
            for j in i..dim {
                let x = (0.3 + ((3 * i + 7 * j + 1) as f64).sin())
                    * 0.05
                    * (-((i + j) as f64)).exp();
                rho.data[(i, j)] = x;
                rho.data[(j, i)] = x;
            }
        }
        let tr = rho.trace();
        rho.data.mapv_inplace(|x| x / tr);
        let coeffs = DetCoeffs {
            loss: 1.0 + 5.0 + 0.01,
            jfp: 0.01,
            jfpp: -0.02,
            g2: 4.0,
            p: 0.8,
            eps: 0.3,
        };
        let mut out = Array2::zeros((dim, dim));
        accumulate_rhs_det(&rho.data, &coeffs, 1.0, &mut out);
        mirror_upper(&mut out);
        let dtrace: f64 = (0..dim).map(|i| out[(i, i)]).sum();
        // trace change comes only from cutoff leakage at the top of the basis
        assert!(dtrace.abs() < 1e-10, "trace defect {dtrace}");
        let sym = DensityMatrix { data: out };
        assert_eq!(sym.hermiticity_defect(), 0.0);
    }

    #[test]
    fn feedback_noise_trace_behaviour() {
        // with jfp rows active the deterministic generator still telescopes
        let rho = DensityMatrix::coherent(0.7, 16);
        let coeffs = DetCoeffs {
            loss: 1.0 + 0.5,
            jfp: 0.5,
            jfpp: 0.3,
            g2: 2.0,
            p: 1.0,
            eps: -0.4,
        };
        let mut out = Array2::zeros((17, 17));
        accumulate_rhs_det(&rho.data, &coeffs, 1.0, &mut out);
        mirror_upper(&mut out);
        let dtrace: f64 = (0..17).map(|i| out[(i, i)]).sum();
        assert!(dtrace.abs() < 1e-10, "trace defect {dtrace}");
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho.txt");
        let rhos = vec![DensityMatrix::coherent(0.9, 6), DensityMatrix::fock(2, 6)];
        write_rho_snapshot(&path, &rhos, 2.5).unwrap();
        let (back, t) = read_rho_snapshot(&path).unwrap();
        assert_eq!(t, 2.5);
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].data, rhos[0].data);
        assert_eq!(back[1].data, rhos[1].data);
    }

    #[test]
    fn stochastic_step_stays_normalized() {
        let sp = SystemParams::new(
            ModelKind::QmeCt,
            0.8,
            4.0,
            5.0,
            9.0,
            2.0,
            2.5e-4,
            0.1,
            0.5,
            0.4,
        );
        let dp = derive_params(&sp, TauFormula::ContinuousTime).unwrap();
        let inst = crate::instances::gen_discrete_instance(2, 5).unwrap();
        let cfg = QmeCtConfig {
            cutoff: 14,
            substeps: 1,
            check_negativity: false,
        };
        let stream = crate::noise::NoiseStream::new(3);
        let mut noise = stream.trajectory(0, 0, 2);
        let mut state = QmeCtState::vacuum(2, cfg.cutoff, sp.e_init);
        let mut w = vec![0.0; 2];
        let mut scratch = Array2::zeros((15, 15));
        for _ in 0..400 {
            qme_ct_step(
                &mut state,
                &inst,
                &sp,
                &dp,
                &cfg,
                &mut noise,
                &mut w,
                &mut scratch,
            )
            .unwrap();
        }
        for rho in &state.rhos {
            assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-12);
            assert_eq!(rho.hermiticity_defect(), 0.0);
            assert!(rho.moments().photon >= 0.0);
        }
        assert!(state.max_leakage < 1e-6, "leakage {}", state.max_leakage);
    }
}
