use cim_core::meanfield::*;

fn main() {
    let settings = SweepSettings::default();
    let rows = threshold_sweep(&[-5.0, -3.0, -1.0, 0.0, 1.0, 2.0, 3.0], &settings).unwrap();
    println!("{}", sweep_csv(&rows));
}
