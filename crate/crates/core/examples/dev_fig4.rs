use cim_core::ct::{run_trajectory_ct, CtVariant};
use cim_core::instances::gen_discrete_instance;
use cim_core::noise::NoiseStream;
use cim_core::params::*;
use cim_core::record::{ReadoutMode, RecordSpec};

fn main() {
    let sp = SystemParams::new(ModelKind::SkewGaussian, 0.8, 4.0, 5.0, 9.0, 2.0, 2.5e-4, 0.1, 0.5, 0.4);
    let dp = derive_params(&sp, TauFormula::ContinuousTime).unwrap();
    println!("tau = {:.3}, noise_std = {:.3}", dp.tau, dp.noise_std);
    let inst = gen_discrete_instance(6, 7).unwrap();
    let stream = NoiseStream::new(1);
    let mut noise = stream.trajectory(0, 0, 6);
    let spec = RecordSpec::full(2000, ReadoutMode::Mean);
    let rec = run_trajectory_ct(&inst, &sp, &dp, CtVariant::Skew, 5.0, &mut noise, &spec).unwrap();
    println!("t      X1      vX1     skS1     e1      photon");
    for row in &rec.rows {
        let x1 = row.mu[0] * std::f64::consts::SQRT_2;
        let ph: f64 = (0..6).map(|i| (row.var_x[i] + row.var_p[i] - 1.0) / 2.0 + row.mu[i] * row.mu[i]).sum::<f64>() / 6.0;
        println!("{:5.2} {:+8.4} {:7.4} {:+9.5} {:7.4} {:7.4}", row.t, x1, row.var_x[0], row.skew_self[0], row.e[0], ph);
    }
    println!("final photon avg {:.4}", rec.photon_final);
}
