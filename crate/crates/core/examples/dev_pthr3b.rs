use cim_core::meanfield::*;

fn main() {
    let mf = MeanFieldParams::from_threshold(3.0, 13.0, 5.0, 5.0);
    for (t_end, dt) in [(10.0, 5e-4), (10.0, 1e-4), (12.0, 5e-4), (14.0, 5e-4), (16.0, 5e-4)] {
        let run = run_meanfield_qme(&mf, dt, t_end, 20);
        println!(
            "t={t_end:>4} dt={dt:.0e}: X={:.8} vX={:.8} skS={:.8}",
            run.moments.mean_x, run.moments.var_x, run.moments.skew_self
        );
    }
    // how do the other six points look at t=10 vs analytic? max rel errors:
    for pthr in [-5.0f64, -3.0, -1.0, 0.0, 1.0, 2.0] {
        let mf = MeanFieldParams::from_threshold(pthr, pthr + 10.0, 5.0, 5.0);
        let q = run_meanfield_qme(&mf, 5e-4, 10.0, 20).moments;
        let sc = solve_self_consistent(&mf, 1.0, 2000).unwrap();
        let a = exact_state_moments(&mf, mf.j * mf.gf * sc.mu).unwrap();
        let rel = |x: f64, y: f64| ((x - y) / y).abs();
        println!(
            "pthr={pthr:+}: relX={:.2e} relvX={:.2e} relvP={:.2e} dskS={:.2e} dskC={:.2e}",
            rel(q.mean_x, a.mean_x),
            rel(q.var_x, a.var_x),
            rel(q.var_p, a.var_p),
            (q.skew_self - a.skew_self).abs(),
            (q.skew_cross - a.skew_cross).abs()
        );
    }
}
