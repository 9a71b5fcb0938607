//! Resolve all tuning parameters on a simulated panel and print the
//! diagnostic curves behind the data-driven choices.
//!
//!     cargo run --release --example tuning_curves

use lswn::bootstrap::resolve_pipeline;
use lswn::{generate, Hypothesis, SimSpec, TestSettings};

fn main() -> lswn::Result<()> {
    let spec = SimSpec {
        model: 2,
        hypothesis: Hypothesis::Null,
        n: 300,
        p: 3,
        num_grid: 25,
        delta: 0.0,
        seed: 11,
        burn_in: 200,
    };
    let panel = generate(&spec)?;
    let rp = resolve_pipeline(&panel, &TestSettings::default())?;
    let r = &rp.report;

    println!("chosen: b={:.4} tau={:.4} s_n={} M_n={} L={}", r.b, r.tau, r.s_n, r.m_n, r.window_l);
    println!("\nGCV curve for b (bandwidth, score):");
    for (b, g) in &r.gcv_b_curve {
        println!("  {b:.4}  {g:.6e}");
    }
    println!("\nGCV curve for tau (bandwidth, score):");
    for (t, g) in &r.gcv_tau_curve {
        println!("  {t:.4}  {g:.6e}");
    }
    println!("\nMinimum volatility curve for L (length, objective):");
    for (l, v) in &r.mv_curve {
        println!("  {l}  {v:.6e}");
    }
    Ok(())
}
