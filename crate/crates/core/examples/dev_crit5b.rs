use cim_core::campaign::*;
use cim_core::params::*;
use cim_core::qme::QmeCtConfig;
use cim_core::record::{EnergyCheck, ReadoutMode};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let g2: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let count: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(300);
    let nm: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(12);
    let cfg = CampaignConfig {
        models: vec![ModelKind::SkewGaussian, ModelKind::Gaussian, ModelKind::QmeCt],
        params: SystemParams::new(ModelKind::SkewGaussian, 0.8, g2, 5.0, 9.0, 2.0, 2.5e-4, 0.1, 0.5, 0.4),
        tau_formula: TauFormula::ContinuousTime,
        instances: InstanceSpec { ensemble: EnsembleKind::Discrete, n, count, alpha: 0.8, seed: 4242, dir: None },
        runs_per_instance: 1,
        t_end: 5.0,
        master_seed: 99,
        energy_check: EnergyCheck::FinalOnly,
        readout: ReadoutMode::Mean,
        qme: QmeCtConfig { cutoff: nm, substeps: 1, check_negativity: false },
        dc_substeps: 1,
        record_stride: None,
        out_dir: None,
        threads: 0,
        allow_aborts: false,
        per_run_table: false,
    };
    let start = Instant::now();
    let out = run_campaign(&cfg).unwrap();
    let s = &out.models[0].per_task_success;
    let g = &out.models[1].per_task_success;
    let q = &out.models[2].per_task_success;
    let (mut sq01, mut sq10, mut gq01, mut gq10) = (0, 0, 0, 0);
    for i in 0..s.len() {
        if let (Some(a), Some(b), Some(c)) = (s[i], g[i], q[i]) {
            if a && !c { sq10 += 1; } if !a && c { sq01 += 1; }
            if b && !c { gq10 += 1; } if !b && c { gq01 += 1; }
        }
    }
    println!("N={n} g2={g2} count={count} nm={nm}");
    for m in &out.models {
        println!("  {:?}: Ps = {:.4} photon = {:.3}", m.model, m.ps, m.photon_final_mean);
    }
    println!("  skew-vs-qme discord: +{sq10}/-{sq01}  gauss-vs-qme discord: +{gq10}/-{gq01}");
    println!("  elapsed {:.1?}", start.elapsed());
}
