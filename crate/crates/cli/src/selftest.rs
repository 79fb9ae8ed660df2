//! Fast invariant suite behind `cim selftest`: one line per check,
//! nonzero exit when anything fails.

use std::process::ExitCode;

use cim_core::ct::{ct_step, run_trajectory_ct, CtSystemState, CtVariant};
use cim_core::instances::{brute_force_ground, gen_discrete_instance, gen_wishart_planted, ising_energy};
use cim_core::meanfield::{
    exact_state_moments, hyp2f1_neg_int, run_meanfield_qme, solve_self_consistent, MeanFieldParams,
};
use cim_core::metrics::{deviations, fit_exp_sqrt, mvmts};
use cim_core::noise::NoiseStream;
use cim_core::params::{derive_params, CacVariant, SqueezeParams, TauFormula};
use cim_core::qme::{qme_ct_step, QmeCtConfig, QmeCtState};
use cim_core::record::{EnergyCheck, ReadoutMode, RecordSpec};
use cim_core::wigner::{default_grid, value_at, wigner_from_rho};
use cim_core::{ModelKind, MomentState, SystemParams};

type Check = (&'static str, fn() -> Result<(), String>);

fn base_params(model: ModelKind) -> SystemParams {
    SystemParams::new(model, 0.8, 4.0, 5.0, 9.0, 2.0, 2.5e-4, 0.1, 0.5, 0.4)
}

fn check_param_relations() -> Result<(), String> {
    for &r in &[0.2, 1.0, 9.0, 40.0] {
        for &j in &[0.5, 5.0, 100.0] {
            let mut sp = base_params(ModelKind::SkewGaussian);
            sp.r_ratio = r;
            sp.j = j;
            let d = derive_params(&sp, TauFormula::ContinuousTime).map_err(|e| e.to_string())?;
            if ((d.j1 + d.j2) - 2.0 * j).abs() > 1e-12 * j {
                return Err(format!("j1 + j2 != 2j at R={r}, j={j}"));
            }
        }
    }
    for &gj in &[1.0, 1.1, 2.0, 10.0] {
        let s = SqueezeParams::from_gain(gj);
        if (s.nj * (1.0 + s.nj) - s.mj * s.mj).abs() > 1e-12 {
            return Err(format!("squeeze identity violated at gj={gj}"));
        }
    }
    Ok(())
}

fn check_state_conversion() -> Result<(), String> {
    let mut x = 0x243F_6A88u64;
    let mut next = move || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    for _ in 0..2000 {
        let s = MomentState {
            mu: 8.0 * next(),
            m: 3.0 * next(),
            n: 3.0 * next(),
            gamma: next(),
            kappa: next(),
        };
        let back = s.to_quadrature().to_moments();
        let ok = (back.mu - s.mu).abs() <= 1e-13 * (1.0 + s.mu.abs())
            && (back.m - s.m).abs() <= 1e-13
            && (back.n - s.n).abs() <= 1e-13
            && (back.gamma - s.gamma).abs() <= 1e-13
            && (back.kappa - s.kappa).abs() <= 1e-13;
        if !ok {
            return Err(format!("conversion round trip drifted: {s:?} -> {back:?}"));
        }
    }
    Ok(())
}

fn check_noise_addressing() -> Result<(), String> {
    let stream = NoiseStream::new(99);
    let mut a = stream.trajectory(4, 9, 5);
    let mut b = stream.trajectory(4, 9, 5);
    let mut buf = [0.0; 5];
    a.fill_step(123, &mut buf);
    for (site, &v) in buf.iter().enumerate() {
        if v != b.deviate(123, site) {
            return Err("step-filled deviates differ from random access".into());
        }
    }
    Ok(())
}

fn check_energy_invariants() -> Result<(), String> {
    for seed in 0..20u64 {
        let inst = gen_discrete_instance(7, seed).map_err(|e| e.to_string())?;
        let gs = brute_force_ground(&inst).map_err(|e| e.to_string())?;
        let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        for _ in 0..10 {
            let sigma: Vec<i8> = (0..7)
                .map(|_| {
                    x ^= x << 13;
                    x ^= x >> 7;
                    x ^= x << 17;
                    if x & 1 == 0 {
                        1
                    } else {
                        -1
                    }
                })
                .collect();
            let flipped: Vec<i8> = sigma.iter().map(|s| -s).collect();
            let e = ising_energy(&inst, &sigma).map_err(|e| e.to_string())?;
            let ef = ising_energy(&inst, &flipped).map_err(|e| e.to_string())?;
            if e != ef {
                return Err("energy not flip-invariant".into());
            }
            if e < gs.energy - 1e-9 {
                return Err("random state below the exhaustive minimum".into());
            }
        }
    }
    Ok(())
}

fn check_wishart_planted() -> Result<(), String> {
    for seed in 0..12u64 {
        let inst = gen_wishart_planted(8, 0.8, seed).map_err(|e| e.to_string())?;
        let gs = brute_force_ground(&inst).map_err(|e| e.to_string())?;
        let planted = inst.ground_energy.unwrap();
        if (planted - gs.energy).abs() > 1e-9 {
            return Err(format!(
                "planted energy {planted} is not the exhaustive minimum {}",
                gs.energy
            ));
        }
    }
    Ok(())
}

fn check_ct_gaussian_reduction() -> Result<(), String> {
    let sp = base_params(ModelKind::SkewGaussian);
    let dp = derive_params(&sp, TauFormula::ContinuousTime).map_err(|e| e.to_string())?;
    let inst = gen_discrete_instance(6, 3).map_err(|e| e.to_string())?;
    let stream = NoiseStream::new(17);
    let mut s1 = CtSystemState::vacuum(6, sp.e_init);
    let mut s2 = CtSystemState::vacuum(6, sp.e_init);
    let mut n1 = stream.trajectory(0, 0, 6);
    let mut n2 = stream.trajectory(0, 0, 6);
    let mut w = vec![0.0; 6];
    for _ in 0..500 {
        ct_step(&mut s1, &inst, &sp, &dp, CtVariant::Skew, &mut n1, &mut w)
            .map_err(|e| e.to_string())?;
        for p in s1.pulses.iter_mut() {
            p.gamma = 0.0;
            p.kappa = 0.0;
        }
        ct_step(&mut s2, &inst, &sp, &dp, CtVariant::Gaussian, &mut n2, &mut w)
            .map_err(|e| e.to_string())?;
        for (a, b) in s1.pulses.iter().zip(&s2.pulses) {
            if a.mu != b.mu || a.m != b.m || a.n != b.n {
                return Err("skew model with skews pinned differs from the Gaussian model".into());
            }
        }
    }
    Ok(())
}

fn check_qme_hygiene() -> Result<(), String> {
    let sp = base_params(ModelKind::QmeCt);
    let dp = derive_params(&sp, TauFormula::ContinuousTime).map_err(|e| e.to_string())?;
    let inst = gen_discrete_instance(2, 1).map_err(|e| e.to_string())?;
    let cfg = QmeCtConfig {
        cutoff: 14,
        substeps: 1,
        check_negativity: false,
    };
    let stream = NoiseStream::new(5);
    let mut noise = stream.trajectory(0, 0, 2);
    let mut state = QmeCtState::vacuum(2, cfg.cutoff, sp.e_init);
    let mut w = vec![0.0; 2];
    let mut scratch = cim_core::ndarray::Array2::zeros((15, 15));
    for _ in 0..300 {
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
        .map_err(|e| e.to_string())?;
    }
    for rho in &state.rhos {
        if (rho.trace() - 1.0).abs() > 1e-12 {
            return Err(format!("trace drifted to {}", rho.trace()));
        }
        if rho.hermiticity_defect() > 1e-12 {
            return Err("hermiticity defect".into());
        }
    }
    if state.max_leakage > 1e-6 {
        return Err(format!("cutoff leakage {}", state.max_leakage));
    }
    Ok(())
}

fn check_hypergeometric() -> Result<(), String> {
    let mut x = 0x1234_5678u64;
    let mut next = move || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        (x >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..500 {
        let k = (next() * 20.0) as u32;
        let b = -2.0 + 4.0 * next();
        let c = 1.0 + 10.0 * next();
        let direct = hyp2f1_neg_int(k, b, c, 2.0).map_err(|e| e.to_string())?;
        // factorial-sum oracle
        let mut oracle = 0.0;
        for i in 0..=k {
            let mut term = 1.0;
            for l in 0..i {
                term *= (-(k as f64) + l as f64) * (b + l as f64)
                    / ((c + l as f64) * (l as f64 + 1.0))
                    * 2.0;
            }
            oracle += term;
        }
        let scale = direct.abs().max(oracle.abs()).max(1e-6);
        if ((direct - oracle) / scale).abs() > 1e-9 {
            return Err(format!("recurrence vs factorial sum at k={k}, b={b}, c={c}"));
        }
    }
    Ok(())
}

fn check_meanfield_oracle() -> Result<(), String> {
    let mf = MeanFieldParams::from_threshold(2.0, 12.0, 5.0, 5.0);
    let qme = run_meanfield_qme(&mf, 5e-4, 6.0, 18);
    let sc = solve_self_consistent(&mf, 1.0, 500).map_err(|e| e.to_string())?;
    let an = exact_state_moments(&mf, mf.j * mf.gf * sc.mu).map_err(|e| e.to_string())?;
    let rel = ((qme.moments.mean_x - an.mean_x) / an.mean_x).abs();
    if rel > 0.02 {
        return Err(format!("mean-field routes disagree by {rel:.3e}"));
    }
    Ok(())
}

fn check_wigner_normalization() -> Result<(), String> {
    let rho = cim_core::qme::DensityMatrix::vacuum(8);
    let (xs, ps) = default_grid(0.0, 0.5, 0.5, 81);
    let grid = wigner_from_rho(&rho, &xs, &ps);
    if (grid.norm - 1.0).abs() > 1e-3 {
        return Err(format!("vacuum grid norm {}", grid.norm));
    }
    let peak = value_at(&grid, 0.0, 0.0);
    if (peak - 1.0 / std::f64::consts::PI).abs() > 1e-4 {
        return Err(format!("vacuum peak {peak}"));
    }
    Ok(())
}

fn check_metrics_identities() -> Result<(), String> {
    let r = mvmts(&[0.99], &[4.0], 1e-3);
    let (v, _) = r.min.unwrap();
    if (v - 4000.0).abs() > 1e-9 {
        return Err(format!("mvmts at 99% gave {v}"));
    }
    let d = deviations(0.4, 0.32, 0.36);
    if (((1.0 + d.d3) * (1.0 + d.d2)) - (1.0 + d.d1)).abs() > 1e-12 {
        return Err("deviation identity violated".into());
    }
    let ns: [f64; 4] = [50.0, 100.0, 150.0, 200.0];
    let vals: Vec<f64> = ns.iter().map(|n| (1.0 + 2.0 * n.sqrt()).exp()).collect();
    let fit = fit_exp_sqrt(&ns, &vals).map_err(|e| e.to_string())?;
    if (fit.sqrt.a - 1.0).abs() > 1e-9 || (fit.sqrt.b - 2.0).abs() > 1e-9 {
        return Err("synthetic scaling not recovered".into());
    }
    Ok(())
}

fn check_trajectory_determinism() -> Result<(), String> {
    let mut sp = base_params(ModelKind::SkewGaussian);
    sp.cac = CacVariant::Standard;
    let dp = derive_params(&sp, TauFormula::ContinuousTime).map_err(|e| e.to_string())?;
    let inst = gen_discrete_instance(5, 8).map_err(|e| e.to_string())?;
    let stream = NoiseStream::new(21);
    let spec = RecordSpec::success_only(-100.0, EnergyCheck::FinalOnly, ReadoutMode::Mean);
    let mut n1 = stream.trajectory(1, 1, 5);
    let a = run_trajectory_ct(&inst, &sp, &dp, CtVariant::Skew, 0.5, &mut n1, &spec)
        .map_err(|e| e.to_string())?;
    let mut n2 = stream.trajectory(1, 1, 5);
    let b = run_trajectory_ct(&inst, &sp, &dp, CtVariant::Skew, 0.5, &mut n2, &spec)
        .map_err(|e| e.to_string())?;
    if a.final_energy != b.final_energy || a.final_spins_mean != b.final_spins_mean {
        return Err("same seed produced different trajectories".into());
    }
    Ok(())
}

pub fn run() -> ExitCode {
    let checks: Vec<Check> = vec![
        ("parameter relations", check_param_relations),
        ("state conversion round trip", check_state_conversion),
        ("noise addressing", check_noise_addressing),
        ("energy invariants", check_energy_invariants),
        ("wishart planted optimality", check_wishart_planted),
        ("ct gaussian reduction", check_ct_gaussian_reduction),
        ("qme trace and hermiticity", check_qme_hygiene),
        ("hypergeometric recurrence", check_hypergeometric),
        ("mean-field oracle equivalence", check_meanfield_oracle),
        ("wigner normalization", check_wigner_normalization),
        ("metrics identities", check_metrics_identities),
        ("trajectory determinism", check_trajectory_determinism),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        let start = std::time::Instant::now();
        match check() {
            Ok(()) => println!("[PASS] {name} ({:.2?})", start.elapsed()),
            Err(msg) => {
                failures += 1;
                println!("[FAIL] {name}: {msg}");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{failures} checks failed");
        ExitCode::FAILURE
    }
}
