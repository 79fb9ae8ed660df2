use cim_core::campaign::*;
use cim_core::params::*;
use cim_core::qme::QmeCtConfig;
use cim_core::record::{EnergyCheck, ReadoutMode};
use std::time::Instant;

fn main() {
    let count: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let cfg = CampaignConfig {
        models: vec![ModelKind::SkewGaussian, ModelKind::Gaussian, ModelKind::QmeCt],
        params: SystemParams::new(ModelKind::SkewGaussian, 0.8, 2.0, 5.0, 9.0, 2.0, 2.5e-4, 0.1, 0.5, 0.4),
        tau_formula: TauFormula::ContinuousTime,
        instances: InstanceSpec { ensemble: EnsembleKind::Discrete, n: 4, count, alpha: 0.8, seed: 4242, dir: None },
        runs_per_instance: 1,
        t_end: 5.0,
        master_seed: 99,
        energy_check: EnergyCheck::FinalOnly,
        readout: ReadoutMode::Mean,
        qme: QmeCtConfig { cutoff: 12, substeps: 1, check_negativity: false },
        dc_substeps: 1,
        record_stride: None,
        out_dir: None,
        threads: 0,
        allow_aborts: false,
        per_run_table: false,
    };
    let start = Instant::now();
    let out = run_campaign(&cfg).unwrap();
    for m in &out.models {
        println!("{:?}: Ps = {:.4} ({}/{}), photon_final = {:.3}", m.model, m.ps, m.successes, m.trials, m.photon_final_mean);
    }
    // paired gap statistics
    let s = &out.models[0].per_task_success;
    let g = &out.models[1].per_task_success;
    let q = &out.models[2].per_task_success;
    let mut sq_agree = 0; let mut gq_agree = 0; let mut n = 0;
    for i in 0..s.len() {
        if let (Some(a), Some(b), Some(c)) = (s[i], g[i], q[i]) {
            n += 1;
            if a == c { sq_agree += 1; }
            if b == c { gq_agree += 1; }
        }
    }
    println!("agree with QME: skew {}/{}  gauss {}/{}", sq_agree, n, gq_agree, n);
    println!("elapsed: {:.1?} for {count} instances", start.elapsed());
}
