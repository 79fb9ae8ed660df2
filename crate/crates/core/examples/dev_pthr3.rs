use cim_core::meanfield::*;

fn main() {
    let mf = MeanFieldParams::from_threshold(3.0, 13.0, 5.0, 5.0);
    for (t_end, cutoff) in [(10.0, 20), (20.0, 20), (40.0, 20), (10.0, 24), (80.0, 20)] {
        let run = run_meanfield_qme(&mf, 5e-4, t_end, cutoff);
        println!(
            "t={t_end:>4} nm={cutoff}: X={:.8} vX={:.8} skS={:.8}",
            run.moments.mean_x, run.moments.var_x, run.moments.skew_self
        );
    }
    let sc = solve_self_consistent(&mf, 1.0, 2000).unwrap();
    let an = exact_state_moments(&mf, mf.j * mf.gf * sc.mu).unwrap();
    println!("analytic:    X={:.8} vX={:.8} skS={:.8} (residual {:.2e})", an.mean_x, an.var_x, an.skew_self, sc.residual);
}
