//! Discrete-component round-trip models.
//!
//! One round trip is an explicit pipeline of optical components: intracavity
//! DOPO evolution, mixing with a squeezed probe at the extraction beam
//! splitter, homodyne measurement of the reflected port, measurement-induced
//! state reduction of the transmitted pulse, coherent feedback injection at
//! the second beam splitter, and the amplitude-control update. The pipeline
//! exists in two accuracies: a five-variable skew-Gaussian form (with a
//! Gaussian reduction) and a two-mode density-matrix form for small systems.
//!
//! A single Gaussian deviate per site per round trip drives both the sampled
//! measurement value and the conditional state reduction.

use ndarray::Array2;
use thiserror::Error;

use crate::ct::{cac_update, dopo_drift, CtVariant};
use crate::instances::{spins_from_amplitudes, Instance};
use crate::noise::TrajectoryNoise;
use crate::params::{DerivedParams, ModelKind, SystemParams};
use crate::qme::{accumulate_rhs_det, DensityMatrix, DetCoeffs};
use crate::record::{EnergyCheck, EnergyTracker, ReadoutMode, RecordSpec, SnapshotRow, TrajectoryRecord};
use crate::state::QuadratureState;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Closure level of the round-trip pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DcVariant {
    Skew,
    Gaussian,
}

impl DcVariant {
    pub fn from_model(kind: ModelKind) -> Option<Self> {
        match kind {
            ModelKind::DcSkewGaussian => Some(DcVariant::Skew),
            ModelKind::DcGaussian => Some(DcVariant::Gaussian),
            _ => None,
        }
    }

    fn ct(self) -> CtVariant {
        match self {
            DcVariant::Skew => CtVariant::Skew,
            DcVariant::Gaussian => CtVariant::Gaussian,
        }
    }
}

/// Pipeline abort with the failing stage attached.
#[derive(Clone, Debug, Error, PartialEq)]
#[error("{what} at round trip {step}, site {site}, stage {stage}")]
pub struct DcAbort {
    pub step: u64,
    pub site: usize,
    pub stage: &'static str,
    pub what: &'static str,
}

/// System state of the discrete-component moment pipeline.
#[derive(Clone, Debug)]
pub struct DcSystemState {
    /// Pulse states after the latest full round trip (post-injection).
    pub pulses: Vec<QuadratureState>,
    /// Pulse states right after the DOPO segment of the latest round trip;
    /// readout definitions reference these.
    pub post_dopo: Vec<QuadratureState>,
    pub e: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    pub t: f64,
    pub step: u64,
    /// Count of measurement draws whose square-root argument was clamped.
    pub clamp_events: u64,
}

impl DcSystemState {
    pub fn vacuum(n: usize, e_init: f64) -> Self {
        Self {
            pulses: vec![QuadratureState::vacuum(); n],
            post_dopo: vec![QuadratureState::vacuum(); n],
            e: vec![e_init; n],
            mu_tilde: vec![0.0; n],
            t: 0.0,
            step: 0,
            clamp_events: 0,
        }
    }
}

/// Sample the homodyne value of a pulse with mean, variance and
/// self-skewness (mean_r, var_r, skew_r), using the deviate `dev`. The same
/// deviate appears inside and outside the square root; a negative argument
/// is clamped at zero and reported.
pub fn dc_measure(mean_r: f64, var_r: f64, skew_r: f64, dev: f64) -> (f64, bool) {
    debug_assert!(var_r > 0.0);
    let arg = var_r + skew_r / (3.0 * var_r.sqrt()) * dev;
    let (arg, clamped) = if arg < 0.0 { (0.0, true) } else { (arg, false) };
    let x = mean_r - skew_r / (6.0 * var_r) + arg.sqrt() * dev;
    (x, clamped)
}

/// Full-extraction readout: sign of a homodyne sample of the skewed pulse
/// distribution. sgn(0) = +1.
pub fn direct_measurement_spin(mean: f64, var: f64, skew: f64, dev: f64) -> i8 {
    let (x, _) = dc_measure(mean, var, skew, dev);
    if x < 0.0 {
        -1
    } else {
        1
    }
}

/// Same readout sampled from the plain Gaussian of matching mean/variance.
pub fn gaussian_readout_spin(mean: f64, var: f64, dev: f64) -> i8 {
    let x = mean + var.sqrt() * dev;
    if x < 0.0 {
        -1
    } else {
        1
    }
}

/// Sign-adjusted skew diagnostics: sgn(<X>) (3 S + C) and sgn(<X>) S.
pub fn deviation_weight(mean_x: f64, skew_self: f64, skew_cross: f64) -> (f64, f64) {
    let sgn = if mean_x < 0.0 { -1.0 } else { 1.0 };
    (
        sgn * (3.0 * skew_self + skew_cross),
        sgn * skew_self,
    )
}

/// Per-stage snapshot for the debug dump.
#[derive(Clone, Debug)]
pub struct StageSnapshot {
    pub site: usize,
    pub stage: &'static str,
    pub state: QuadratureState,
}

/// One full round trip of the skew-Gaussian (or Gaussian) pipeline.
///
/// `substeps` controls the Euler sub-division of the intracavity segment.
/// When `trace` is given, per-stage states are appended to it.
#[allow(clippy::too_many_arguments)]
pub fn dc_skew_roundtrip(
    state: &mut DcSystemState,
    inst: &Instance,
    sp: &SystemParams,
    dp: &DerivedParams,
    variant: DcVariant,
    substeps: u32,
    noise: &mut TrajectoryNoise,
    w_buf: &mut [f64],
    mut trace: Option<&mut Vec<StageSnapshot>>,
) -> Result<(), DcAbort> {
    let n_sites = state.pulses.len();
    let r1 = dp.r1;
    let r2 = dp.r2;
    let vb_x = 0.5 / sp.gj; // squeezed probe variances
    let vb_p = 0.5 * sp.gj;
    let t1 = (1.0 - r1).sqrt();
    let t1_cubed = t1 * t1 * t1;
    let t2 = (1.0 - r2).sqrt();
    let t2_cubed = t2 * t2 * t2;
    let reduction_scale = (2.0 * dp.j1 * sp.gj * sp.dt).sqrt();
    noise.fill_step(state.step, w_buf);

    let abort = |step: u64, site: usize, stage: &'static str, what: &'static str| DcAbort {
        step,
        site,
        stage,
        what,
    };

    // stage 1-4 per site: DOPO, splitter, measurement, state reduction
    let mut reduced: Vec<QuadratureState> = Vec::with_capacity(n_sites);
    for r in 0..n_sites {
        // intracavity evolution in moment form
        let mut mom = state.pulses[r].to_moments();
        let dt_sub = sp.dt / substeps as f64;
        for _ in 0..substeps {
            let d = dopo_drift(&mom, sp.p, sp.g2, variant.ct());
            mom.mu += d[0] * dt_sub;
            mom.m += d[1] * dt_sub;
            mom.n += d[2] * dt_sub;
            mom.gamma += d[3] * dt_sub;
            mom.kappa += d[4] * dt_sub;
        }
        let prime = mom.to_quadrature();
        if !prime.is_finite() {
            return Err(abort(state.step, r, "dopo", "non-finite state"));
        }
        state.post_dopo[r] = prime;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(StageSnapshot {
                site: r,
                stage: "dopo",
                state: prime,
            });
        }

        // extraction splitter: transmitted and reflected ports
        let x_t = t1 * prime.mean_x;
        let v_t_x = (1.0 - r1) * prime.var_x + r1 * vb_x;
        let v_t_p = (1.0 - r1) * prime.var_p + r1 * vb_p;
        let s_t = t1_cubed * prime.skew_self;
        let c_t = t1_cubed * prime.skew_cross;

        let x_r = r1.sqrt() * prime.mean_x;
        let v_r_x = (1.0 - r1) * vb_x + r1 * prime.var_x;
        let s_r = r1.powf(1.5) * prime.skew_self;
        if v_r_x <= 0.0 {
            return Err(abort(state.step, r, "bs1", "non-positive reflected variance"));
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(StageSnapshot {
                site: r,
                stage: "bs1-transmitted",
                state: QuadratureState {
                    mean_x: x_t,
                    var_x: v_t_x,
                    var_p: v_t_p,
                    skew_self: s_t,
                    skew_cross: c_t,
                },
            });
        }

        // homodyne sample of the reflected port; with no extraction path
        // there is no measurement record
        let dev = w_buf[r];
        let (x_b, clamped) = dc_measure(x_r, v_r_x, s_r, dev);
        if clamped {
            state.clamp_events += 1;
        }
        state.mu_tilde[r] = if r1 > 0.0 { x_b / (2.0 * r1).sqrt() } else { 0.0 };

        // conditional state reduction of the transmitted pulse
        let v_tr = (r1 * (1.0 - r1)).sqrt() * (prime.var_x - vb_x);
        let mean_red = x_t + v_tr / v_r_x.sqrt() * dev;
        let mut var_x_red = v_t_x - v_tr * v_tr / v_r_x;
        let mut var_p_red = v_t_p;
        let mut s_red = s_t;
        let mut c_red = c_t;
        if variant == DcVariant::Skew {
            var_x_red += reduction_scale * dev * prime.skew_self;
            var_p_red += reduction_scale * dev * prime.skew_cross;
            let damp = prime.var_x - vb_x;
            s_red -= 6.0 * dp.j1 * sp.gj * sp.dt * prime.skew_self * damp;
            c_red -= 2.0 * dp.j1 * sp.gj * sp.dt * prime.skew_cross * damp;
        }
        if var_x_red < -1e-9 || var_p_red < -1e-9 {
            return Err(abort(state.step, r, "reduction", "negative variance"));
        }
        if !(mean_red.is_finite() && var_x_red.is_finite() && var_p_red.is_finite()) {
            return Err(abort(state.step, r, "reduction", "non-finite state"));
        }
        let red = QuadratureState {
            mean_x: mean_red,
            var_x: var_x_red,
            var_p: var_p_red,
            skew_self: s_red,
            skew_cross: c_red,
        };
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(StageSnapshot {
                site: r,
                stage: "reduced",
                state: red,
            });
        }
        reduced.push(red);
    }

    // stage 5-7: feedback, injection splitter, amplitude control
    for r in 0..n_sites {
        let mut feed = 0.0;
        let row = inst.j.row(r);
        for rp in 0..n_sites {
            feed += row[rp] * state.mu_tilde[rp];
        }
        let zeta = if r2 > 0.0 {
            sp.j * sp.dt * state.e[r] * feed / r2.sqrt()
        } else {
            0.0
        };
        let x_z = SQRT2 * zeta;

        let red = reduced[r];
        let out = QuadratureState {
            mean_x: t2 * red.mean_x + r2.sqrt() * x_z,
            var_x: (1.0 - r2) * red.var_x + r2 * 0.5,
            var_p: (1.0 - r2) * red.var_p + r2 * 0.5,
            skew_self: t2_cubed * red.skew_self,
            skew_cross: t2_cubed * red.skew_cross,
        };
        if !out.is_finite() {
            return Err(abort(state.step, r, "bs2", "non-finite state"));
        }
        state.pulses[r] = out;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(StageSnapshot {
                site: r,
                stage: "bs2",
                state: out,
            });
        }

        let e_new = cac_update(
            state.e[r],
            state.mu_tilde[r],
            sp.beta,
            dp.tau,
            sp.g2,
            sp.dt,
            sp.cac,
        );
        if !e_new.is_finite() {
            return Err(abort(state.step, r, "cac", "non-finite control"));
        }
        state.e[r] = e_new;
    }

    state.step += 1;
    state.t = state.step as f64 * sp.dt;
    Ok(())
}

/// Spin readout from the discrete-component pipeline state. Mean and direct
/// modes reference the post-DOPO pulse; the measured mode uses the inferred
/// homodyne values. Direct modes draw one extra deviate per site, addressed
/// one step past the final round trip.
pub fn readout_spins_dc(
    state: &DcSystemState,
    mode: ReadoutMode,
    noise: &mut TrajectoryNoise,
) -> Vec<i8> {
    match mode {
        ReadoutMode::Mean => {
            spins_from_amplitudes(&state.post_dopo.iter().map(|p| p.mean_x).collect::<Vec<_>>())
        }
        ReadoutMode::Measured => spins_from_amplitudes(&state.mu_tilde),
        ReadoutMode::Direct => (0..state.post_dopo.len())
            .map(|r| {
                let p = state.post_dopo[r];
                let dev = noise.deviate(state.step, r);
                direct_measurement_spin(p.mean_x, p.var_x, p.skew_self, dev)
            })
            .collect(),
        ReadoutMode::DirectGaussian => (0..state.post_dopo.len())
            .map(|r| {
                let p = state.post_dopo[r];
                let dev = noise.deviate(state.step, r);
                gaussian_readout_spin(p.mean_x, p.var_x, dev)
            })
            .collect(),
    }
}

fn dc_snapshot(state: &DcSystemState, energy: f64) -> SnapshotRow {
    SnapshotRow {
        t: state.t,
        mu: state.pulses.iter().map(|p| p.mean_x / SQRT2).collect(),
        var_x: state.pulses.iter().map(|p| p.var_x).collect(),
        var_p: state.pulses.iter().map(|p| p.var_p).collect(),
        skew_self: state.pulses.iter().map(|p| p.skew_self).collect(),
        skew_cross: state.pulses.iter().map(|p| p.skew_cross).collect(),
        e: state.e.clone(),
        mu_tilde: state.mu_tilde.clone(),
        energy,
    }
}

/// Run one seeded discrete-component trajectory from vacuum to `t_end`.
pub fn run_trajectory_dc(
    inst: &Instance,
    sp: &SystemParams,
    dp: &DerivedParams,
    variant: DcVariant,
    substeps: u32,
    t_end: f64,
    noise: &mut TrajectoryNoise,
    spec: &RecordSpec,
) -> Result<TrajectoryRecord, DcAbort> {
    let n_steps = crate::ct::steps_for(t_end, sp.dt);
    let mut state = DcSystemState::vacuum(inst.n, sp.e_init);
    let mut w_buf = vec![0.0; inst.n];
    let mut rec = TrajectoryRecord::default();
    let keep_series = spec.stride.is_some() && spec.energy_check == EnergyCheck::EveryStep;
    let mut tracker = EnergyTracker::new(spec.e0, keep_series);
    let mut photon_acc = 0.0;

    // direct readouts consume a fresh deviate; only final-step scoring makes
    // sense for them
    let scoring_readout = match spec.readout {
        ReadoutMode::Direct | ReadoutMode::DirectGaussian => ReadoutMode::Measured,
        other => other,
    };
    let energy_of = |state: &DcSystemState, mode: ReadoutMode| {
        let spins = match mode {
            ReadoutMode::Mean => spins_from_amplitudes(
                &state.post_dopo.iter().map(|p| p.mean_x).collect::<Vec<_>>(),
            ),
            _ => spins_from_amplitudes(&state.mu_tilde),
        };
        crate::instances::ising_energy(inst, &spins).expect("readout dimension")
    };

    if spec.stride.is_some() {
        rec.rows.push(dc_snapshot(&state, f64::NAN));
    }

    for k in 0..n_steps {
        dc_skew_roundtrip(
            &mut state, inst, sp, dp, variant, substeps, noise, &mut w_buf, None,
        )?;
        photon_acc += state
            .pulses
            .iter()
            .map(|p| p.photon_number())
            .sum::<f64>()
            / inst.n as f64;
        let check = spec.energy_check == EnergyCheck::EveryStep || k + 1 == n_steps;
        if check {
            tracker.observe(state.step, state.t, energy_of(&state, scoring_readout));
        }
        if let Some(stride) = spec.stride {
            if (k + 1) % stride as u64 == 0 || k + 1 == n_steps {
                rec.rows
                    .push(dc_snapshot(&state, energy_of(&state, scoring_readout)));
            }
        }
    }

    rec.final_spins_mean = readout_spins_dc(&state, ReadoutMode::Mean, noise);
    rec.final_spins_measured = readout_spins_dc(&state, ReadoutMode::Measured, noise);
    let final_spins = match spec.readout {
        ReadoutMode::Mean => rec.final_spins_mean.clone(),
        ReadoutMode::Measured => rec.final_spins_measured.clone(),
        ReadoutMode::Direct => {
            let spins = readout_spins_dc(&state, ReadoutMode::Direct, noise);
            rec.final_spins_direct = Some(spins.clone());
            // the paired Gaussian readout shares the same deviate
            rec.final_spins_direct_gaussian =
                Some(readout_spins_dc(&state, ReadoutMode::DirectGaussian, noise));
            spins
        }
        ReadoutMode::DirectGaussian => {
            let spins = readout_spins_dc(&state, ReadoutMode::DirectGaussian, noise);
            rec.final_spins_direct_gaussian = Some(spins.clone());
            spins
        }
    };
    rec.final_energy = crate::instances::ising_energy(inst, &final_spins).expect("dims");
    if matches!(spec.readout, ReadoutMode::Direct) {
        let g_spins = rec.final_spins_direct_gaussian.as_ref().unwrap();
        // keep both energies reachable for paired deviation statistics
        rec.energies = vec![
            rec.final_energy,
            crate::instances::ising_energy(inst, g_spins).expect("dims"),
        ];
    } else {
        rec.energies = tracker.energies;
    }
    rec.energy_ts = tracker.energy_ts;
    rec.min_energy = if n_steps > 0 {
        tracker.min_energy.min(rec.final_energy)
    } else {
        rec.final_energy
    };
    rec.min_energy_t = tracker.min_energy_t;
    rec.first_hit_t = tracker.first_hit_t;
    rec.first_hit_step = tracker.first_hit_step;
    rec.success = spec.e0.map(|e0| rec.final_energy <= e0 + 1e-9);
    rec.photon_final = state
        .pulses
        .iter()
        .map(|p| p.photon_number())
        .sum::<f64>()
        / inst.n as f64;
    rec.photon_time_avg = if n_steps > 0 {
        photon_acc / n_steps as f64
    } else {
        rec.photon_final
    };
    rec.clamp_events = state.clamp_events;
    rec.steps = n_steps;
    let (wsum, ssum) = state.pulses.iter().fold((0.0, 0.0), |(a, b), q| {
        let (w, s) = deviation_weight(q.mean_x, q.skew_self, q.skew_cross);
        (a + w, b + s)
    });
    rec.skew_weight_final = Some((wsum / inst.n as f64, ssum / inst.n as f64));
    Ok(rec)
}

// ---------------------------------------------------------------------------
// Two-mode density-matrix pipeline
// ---------------------------------------------------------------------------

/// Cutoffs and discretization controls for the density-matrix pipeline.
#[derive(Clone, Copy, Debug)]
pub struct DcQmeConfig {
    /// Photon cutoff of the internal mode.
    pub nm_a: usize,
    /// Photon cutoff of the probe / feedback mode.
    pub nm_b: usize,
    /// Euler sub-steps of the intracavity segment.
    pub dopo_substeps: u32,
    /// Probe preparation: None uses the closed-form squeezed amplitudes,
    /// Some(n) builds the state by n-fold splitting of the squeeze generator.
    pub probe_trotter: Option<u32>,
    /// Splitting counts of the two beam-splitter couplings.
    pub nt1: u32,
    pub nt2: u32,
}

impl Default for DcQmeConfig {
    fn default() -> Self {
        Self {
            nm_a: 14,
            nm_b: 14,
            dopo_substeps: 64,
            probe_trotter: None,
            nt1: 256,
            nt2: 64,
        }
    }
}

#[derive(Debug, Error)]
pub enum DcQmeError {
    #[error("trace drifted by {defect:e} in one splitting pass at round trip {step}, site {site}; raise the splitting count or lower the cutoff")]
    TraceDrift { step: u64, site: usize, defect: f64 },
    #[error("non-finite joint state at round trip {step}, site {site}, stage {stage}")]
    NonFinite {
        step: u64,
        site: usize,
        stage: &'static str,
    },
}

/// Fock amplitudes of the squeezed vacuum with X-variance 1/(2 gj):
/// c_{2n} = (-tanh r)^n sqrt((2n)!)/(2^n n!)/sqrt(cosh r), r = ln sqrt(gj).
pub fn squeezed_probe_exact(gj: f64, cutoff: usize) -> Vec<f64> {
    let r = gj.sqrt().ln();
    let th = r.tanh();
    let mut c = vec![0.0; cutoff + 1];
    c[0] = 1.0 / r.cosh().sqrt();
    let mut n = 1usize;
    while 2 * n <= cutoff {
        // c_{2n}/c_{2n-2} = -tanh r sqrt((2n-1)(2n))/(2n)
        let f = -th * (((2 * n - 1) * (2 * n)) as f64).sqrt() / (2.0 * n as f64);
        c[2 * n] = c[2 * n - 2] * f;
        n += 1;
    }
    c
}

/// Probe amplitudes via n-fold splitting of the squeeze generator,
/// (1 + (s/2n)(b^dag^2 - b^2))^n |0>, normalized at the end.
pub fn squeezed_probe_trotter(gj: f64, cutoff: usize, nt: u32) -> Vec<f64> {
    let s = -(gj.sqrt().ln());
    let step = 0.5 * s / nt as f64;
    let dim = cutoff + 1;
    let mut c = vec![0.0f64; dim];
    let mut next = vec![0.0f64; dim];
    c[0] = 1.0;
    for _ in 0..nt {
        for (n, slot) in next.iter_mut().enumerate() {
            let mut v = c[n];
            if n >= 2 {
                v += step * ((n * (n - 1)) as f64).sqrt() * c[n - 2];
            }
            if n + 2 < dim {
                v -= step * (((n + 1) * (n + 2)) as f64).sqrt() * c[n + 2];
            }
            *slot = v;
        }
        std::mem::swap(&mut c, &mut next);
    }
    let norm: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in c.iter_mut() {
        *v /= norm;
    }
    c
}

/// Coherent-state amplitudes for a real displacement.
pub fn coherent_amplitudes(alpha: f64, cutoff: usize) -> Vec<f64> {
    let mut c = vec![0.0; cutoff + 1];
    c[0] = (-0.5 * alpha * alpha).exp();
    for n in 1..=cutoff {
        c[n] = c[n - 1] * alpha / (n as f64).sqrt();
    }
    c
}

/// Joint two-mode state rho_AB = rho_A (x) |psi_B><psi_B| over the product
/// basis (a-index major).
pub fn joint_with_pure(rho_a: &Array2<f64>, psi_b: &[f64]) -> Array2<f64> {
    let da = rho_a.nrows();
    let db = psi_b.len();
    let mut joint = Array2::zeros((da * db, da * db));
    for a in 0..da {
        for ap in 0..da {
            let raa = rho_a[(a, ap)];
            if raa == 0.0 {
                continue;
            }
            for b in 0..db {
                for bp in 0..db {
                    joint[(a * db + b, ap * db + bp)] = raa * psi_b[b] * psi_b[bp];
                }
            }
        }
    }
    joint
}

/// Left-multiplication by the coupling generator K = a^dag b - b^dag a.
fn apply_k(src: &Array2<f64>, da: usize, db: usize, out: &mut Array2<f64>) {
    let dim = da * db;
    out.fill(0.0);
    for a in 0..da {
        for b in 0..db {
            let row = a * db + b;
            // <a,b|a^dag b|a-1,b+1> = sqrt(a (b+1))
            if a >= 1 && b + 1 < db {
                let coeff = ((a * (b + 1)) as f64).sqrt();
                let from = (a - 1) * db + (b + 1);
                for col in 0..dim {
                    out[(row, col)] += coeff * src[(from, col)];
                }
            }
            // -<a,b|b^dag a|a+1,b-1> = -sqrt((a+1) b)
            if b >= 1 && a + 1 < da {
                let coeff = (((a + 1) * b) as f64).sqrt();
                let from = (a + 1) * db + (b - 1);
                for col in 0..dim {
                    out[(row, col)] -= coeff * src[(from, col)];
                }
            }
        }
    }
}

/// n-fold splitting of the beam-splitter coupling exp(theta (a^dag b - b^dag a))
/// acting on a joint state. Each pass applies the commutator expansion to
/// second order, rho += s [K, rho] + (s^2/2) [K, [K, rho]] with s = theta/n;
/// K is real antisymmetric, so with symmetric rho both commutators reduce to
/// M + M^T forms and symmetry is preserved exactly.
pub fn bs_mix(joint: &mut Array2<f64>, da: usize, db: usize, theta: f64, passes: u32) -> f64 {
    let dim = da * db;
    let step = theta / passes as f64;
    let mut k1 = Array2::zeros((dim, dim));
    let mut c1 = Array2::zeros((dim, dim));
    let mut k2 = Array2::zeros((dim, dim));
    let mut max_defect = 0.0f64;
    for _ in 0..passes {
        apply_k(joint, da, db, &mut k1);
        for i in 0..dim {
            for j in 0..dim {
                c1[(i, j)] = k1[(i, j)] + k1[(j, i)];
            }
        }
        apply_k(&c1, da, db, &mut k2);
        let before: f64 = (0..dim).map(|i| joint[(i, i)]).sum();
        let half_sq = 0.5 * step * step;
        for i in 0..dim {
            for j in 0..dim {
                joint[(i, j)] += step * c1[(i, j)] + half_sq * (k2[(i, j)] + k2[(j, i)]);
            }
        }
        let after: f64 = (0..dim).map(|i| joint[(i, i)]).sum();
        max_defect = max_defect.max((after - before).abs());
    }
    max_defect
}

/// Trace out the second (minor-index) mode.
pub fn trace_out_b(joint: &Array2<f64>, da: usize, db: usize) -> Array2<f64> {
    let mut out = Array2::zeros((da, da));
    for a in 0..da {
        for ap in 0..da {
            let mut acc = 0.0;
            for b in 0..db {
                acc += joint[(a * db + b, ap * db + b)];
            }
            out[(a, ap)] = acc;
        }
    }
    out
}

/// Trace out the first (major-index) mode.
pub fn trace_out_a(joint: &Array2<f64>, da: usize, db: usize) -> Array2<f64> {
    let mut out = Array2::zeros((db, db));
    for b in 0..db {
        for bp in 0..db {
            let mut acc = 0.0;
            for a in 0..da {
                acc += joint[(a * db + b, a * db + bp)];
            }
            out[(b, bp)] = acc;
        }
    }
    out
}

/// First three X-moments of a single-mode state, X = (b + b^dag)/sqrt(2).
pub fn x_moments(rho: &Array2<f64>) -> (f64, f64, f64) {
    let d = rho.nrows();
    // X in the Fock basis is tridiagonal: X_{n+1,n} = sqrt((n+1)/2)
    let mut x = Array2::zeros((d, d));
    for n in 0..d - 1 {
        let v = ((n + 1) as f64 / 2.0).sqrt();
        x[(n + 1, n)] = v;
        x[(n, n + 1)] = v;
    }
    let x2 = x.dot(&x);
    let x3 = x2.dot(&x);
    let trace_with = |m: &Array2<f64>| -> f64 {
        let prod = m.dot(rho);
        (0..d).map(|i| prod[(i, i)]).sum()
    };
    (trace_with(&x), trace_with(&x2), trace_with(&x3))
}

/// State of the two-mode density-matrix pipeline.
#[derive(Clone, Debug)]
pub struct DcQmeState {
    pub rhos: Vec<DensityMatrix>,
    pub e: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    pub t: f64,
    pub step: u64,
    pub clamp_events: u64,
}

impl DcQmeState {
    pub fn vacuum(n: usize, cutoff: usize, e_init: f64) -> Self {
        Self {
            rhos: vec![DensityMatrix::vacuum(cutoff); n],
            e: vec![e_init; n],
            mu_tilde: vec![0.0; n],
            t: 0.0,
            step: 0,
            clamp_events: 0,
        }
    }
}

/// One round trip of the density-matrix pipeline. Desk-scale only: cost grows
/// with the fourth power of the joint dimension.
#[allow(clippy::too_many_arguments)]
pub fn dc_qme_roundtrip(
    state: &mut DcQmeState,
    inst: &Instance,
    sp: &SystemParams,
    dp: &DerivedParams,
    cfg: &DcQmeConfig,
    noise: &mut TrajectoryNoise,
    w_buf: &mut [f64],
) -> Result<(), DcQmeError> {
    let n_sites = state.rhos.len();
    noise.fill_step(state.step, w_buf);
    let theta1 = -(dp.r1.sqrt().asin());
    let theta2 = dp.r2.sqrt().asin();
    let psi_b = match cfg.probe_trotter {
        None => squeezed_probe_exact(sp.gj, cfg.nm_b),
        Some(nt) => squeezed_probe_trotter(sp.gj, cfg.nm_b, nt),
    };
    let mut eig = Vec::new();

    // per-site: DOPO, extraction splitter, measurement, projection
    for r in 0..n_sites {
        let rho = &mut state.rhos[r];
        let dim = rho.dim();
        // intracavity master equation over dt
        let coeffs = DetCoeffs {
            loss: 1.0,
            jfp: 0.0,
            jfpp: 0.0,
            g2: sp.g2,
            p: sp.p,
            eps: 0.0,
        };
        let dt_sub = sp.dt / cfg.dopo_substeps as f64;
        let mut scratch = Array2::zeros((dim, dim));
        for _ in 0..cfg.dopo_substeps {
            scratch.fill(0.0);
            accumulate_rhs_det(&rho.data, &coeffs, dt_sub, &mut scratch);
            for i in 0..dim {
                for j in i..dim {
                    rho.data[(i, j)] += scratch[(i, j)];
                    if j != i {
                        rho.data[(j, i)] = rho.data[(i, j)];
                    }
                }
            }
        }
        rho.normalize();

        // joint state with the squeezed probe, mixed at the extraction splitter
        let db = cfg.nm_b + 1;
        let mut joint = joint_with_pure(&rho.data, &psi_b);
        let defect = bs_mix(&mut joint, dim, db, theta1, cfg.nt1);
        if defect > 1e-6 {
            return Err(DcQmeError::TraceDrift {
                step: state.step,
                site: r,
                defect,
            });
        }
        if joint.iter().any(|v| !v.is_finite()) {
            return Err(DcQmeError::NonFinite {
                step: state.step,
                site: r,
                stage: "bs1",
            });
        }

        // reflected-port X moments drive the sampled measurement value
        let rho_b = trace_out_a(&joint, dim, db);
        let (m1, m2, m3) = x_moments(&rho_b);
        let var = m2 - m1 * m1;
        let skew = m3 - 3.0 * m2 * m1 + 2.0 * m1 * m1 * m1;
        let (x_b, clamped) = dc_measure(m1, var, skew, w_buf[r]);
        if clamped {
            state.clamp_events += 1;
        }
        state.mu_tilde[r] = if dp.r1 > 0.0 {
            x_b / (2.0 * dp.r1).sqrt()
        } else {
            0.0
        };

        // project the probe mode on the measured quadrature value
        eig.clear();
        crate::wigner::oscillator_eigenfunctions(cfg.nm_b, x_b, &mut eig);
        let mut projected = Array2::zeros((dim, dim));
        for a in 0..dim {
            for ap in a..dim {
                let mut acc = 0.0;
                for b in 0..db {
                    let eb = eig[b];
                    if eb == 0.0 {
                        continue;
                    }
                    for bp in 0..db {
                        acc += eb * eig[bp] * joint[(a * db + b, ap * db + bp)];
                    }
                }
                projected[(a, ap)] = acc;
                projected[(ap, a)] = acc;
            }
        }
        let tr: f64 = (0..dim).map(|i| projected[(i, i)]).sum();
        if !(tr.is_finite() && tr > 0.0) {
            return Err(DcQmeError::NonFinite {
                step: state.step,
                site: r,
                stage: "projection",
            });
        }
        projected.mapv_inplace(|v| v / tr);
        rho.data = projected;
    }

    // feedback injection and amplitude control
    for r in 0..n_sites {
        let mut feed = 0.0;
        let row = inst.j.row(r);
        for rp in 0..n_sites {
            feed += row[rp] * state.mu_tilde[rp];
        }
        let zeta = if dp.r2 > 0.0 {
            sp.j * sp.dt * state.e[r] * feed / dp.r2.sqrt()
        } else {
            0.0
        };
        let psi_z = coherent_amplitudes(zeta, cfg.nm_b);
        let dim = state.rhos[r].dim();
        let db = cfg.nm_b + 1;
        let mut joint = joint_with_pure(&state.rhos[r].data, &psi_z);
        let defect = bs_mix(&mut joint, dim, db, theta2, cfg.nt2);
        if defect > 1e-6 {
            return Err(DcQmeError::TraceDrift {
                step: state.step,
                site: r,
                defect,
            });
        }
        let mut out = trace_out_b(&joint, dim, db);
        let tr: f64 = (0..dim).map(|i| out[(i, i)]).sum();
        out.mapv_inplace(|v| v / tr);
        state.rhos[r].data = out;

        state.e[r] = cac_update(
            state.e[r],
            state.mu_tilde[r],
            sp.beta,
            dp.tau,
            sp.g2,
            sp.dt,
            sp.cac,
        );
    }

    state.step += 1;
    state.t = state.step as f64 * sp.dt;
    Ok(())
}
