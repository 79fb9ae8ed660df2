use cim_core::campaign::*;
use cim_core::params::*;
use cim_core::qme::QmeCtConfig;
use cim_core::record::{EnergyCheck, ReadoutMode};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let p: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(-10.0);
    let count: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20000);
    let mut params = SystemParams::new(ModelKind::DcSkewGaussian, p, 5.0, 10.0, 9.0, 1.1, 3.2e-3, 1.0, 1.0, 0.4);
    params.cac = CacVariant::Standard;
    let cfg = CampaignConfig {
        models: vec![ModelKind::DcSkewGaussian, ModelKind::DcGaussian],
        params,
        tau_formula: TauFormula::DiscreteComponent,
        instances: InstanceSpec { ensemble: EnsembleKind::Discrete, n: 6, count, alpha: 0.8, seed: 777, dir: None },
        runs_per_instance: 1,
        t_end: 10.0,
        master_seed: 31,
        energy_check: EnergyCheck::FinalOnly,
        readout: ReadoutMode::Measured,
        qme: QmeCtConfig::default(),
        dc_substeps: 1,
        record_stride: None,
        out_dir: None,
        threads: 0,
        allow_aborts: false,
        per_run_table: false,
    };
    let start = Instant::now();
    let out = run_campaign(&cfg).unwrap();
    let s = &out.models[0];
    let g = &out.models[1];
    println!("p={p} count={count}: Ps_skew = {:.5}, Ps_gauss = {:.5}, D1 = {:+.5}", s.ps, g.ps, s.ps / g.ps - 1.0);
    println!("  photon: skew {:.3} gauss {:.3}; skew_weight = {:?}", s.photon_final_mean, g.photon_final_mean, s.skew_weight_mean);
    let (mut n10, mut n01) = (0u64, 0u64);
    for i in 0..s.per_task_success.len() {
        if let (Some(a), Some(b)) = (s.per_task_success[i], g.per_task_success[i]) {
            if a && !b { n10 += 1; }
            if !a && b { n01 += 1; }
        }
    }
    let z = (n10 as f64 - n01 as f64) / ((n10 + n01).max(1) as f64).sqrt();
    println!("  paired discord +{n10}/-{n01}, z = {z:+.2}; elapsed {:.1?}", start.elapsed());
}
