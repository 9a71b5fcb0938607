//! Draw one panel from each benchmark model and write it as long CSV.
//!
//!     cargo run --release --example simulate_panel

use lswn::{generate, Hypothesis, PanelFormat, SimSpec};
use std::fs::File;
use std::io::BufWriter;

fn main() -> lswn::Result<()> {
    for model in 1..=3u8 {
        let spec = SimSpec {
            model,
            hypothesis: Hypothesis::Null,
            n: 100,
            p: 3,
            num_grid: 20,
            delta: 0.0,
            seed: 1,
            burn_in: 200,
        };
        let panel = generate(&spec)?;
        let path = format!("model{model}_panel.csv");
        panel.save(BufWriter::new(File::create(&path)?), PanelFormat::LongCsv)?;
        println!(
            "wrote {path}: n={} N={} p={}",
            panel.n(),
            panel.num_grid(),
            panel.p()
        );
    }
    Ok(())
}
