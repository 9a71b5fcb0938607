//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line. Statistical criteria run seeded Monte Carlo at desk
//! scale; analytic criteria cross-check the fast paths against direct
//! oracles. Run with `--nocapture` to see the lines as they complete.

use lswn::bootstrap::{bootstrap_draw, moving_sums, resolve_pipeline};
use lswn::covstat::{build_window_tensor, g_sum_oracle, q_statistic, WindowTensor};
use lswn::sim::monte_carlo_counts;
use lswn::smoothing::{compute_residuals, estimate_mean};
use lswn::{
    FunctionalPanel, Hypothesis, Kernel, ResidualPanel, Setting, SimSpec, TestConfig, TestSettings,
};
use rand::Rng;
use std::process::Command;

fn verdict(num: u32, desc: &str, pass: bool, detail: &str) {
    println!(
        "criterion {num} [{}]: {desc} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {num} failed: {detail}");
}

fn spec(model: u8, hypothesis: Hypothesis, n: usize, p: usize, delta: f64, seed: u64) -> SimSpec {
    SimSpec {
        model,
        hypothesis,
        n,
        p,
        num_grid: 50,
        delta,
        seed,
        burn_in: 200,
    }
}

fn mc_settings() -> TestSettings {
    TestSettings {
        boot_reps: 500,
        ..Default::default()
    }
}

fn rejection_rates(s: &SimSpec, reps: usize, alphas: &[f64]) -> Vec<f64> {
    let counts = monte_carlo_counts(s, &mc_settings(), 0, reps, alphas).unwrap();
    counts.iter().map(|&c| c as f64 / reps as f64).collect()
}

#[test]
fn c1_size_model1() {
    let reps = 500;
    let s = spec(1, Hypothesis::Null, 200, 5, 0.0, 101);
    let rates = rejection_rates(&s, reps, &[0.05, 0.10]);
    let pass = (rates[0] - 0.05).abs() <= 0.030 && (rates[1] - 0.10).abs() <= 0.030;
    verdict(
        1,
        "size, model 1, n=200 p=5 N=50",
        pass,
        &format!(
            "alpha 5%: {:.1}%, alpha 10%: {:.1}%, reps={reps}",
            100.0 * rates[0],
            100.0 * rates[1]
        ),
    );
}

#[test]
fn c2_size_model3() {
    let reps = 300;
    let s = spec(3, Hypothesis::Null, 400, 5, 0.0, 102);
    let rates = rejection_rates(&s, reps, &[0.05]);
    let pass = (rates[0] - 0.05).abs() <= 0.040;
    verdict(
        2,
        "size, model 3, n=400 p=5",
        pass,
        &format!("alpha 5%: {:.1}%, reps={reps}", 100.0 * rates[0]),
    );
}

#[test]
fn c3_power_model1_grows_with_n() {
    let reps = 200;
    let targets = [(200usize, 0.077), (400, 0.311), (600, 0.776)];
    let mut rates = Vec::new();
    for (n, _) in targets {
        let s = spec(1, Hypothesis::Alt, n, 5, 0.4, 103);
        rates.push(rejection_rates(&s, reps, &[0.05])[0]);
    }
    let within = rates
        .iter()
        .zip(targets.iter())
        .all(|(&r, &(_, t))| (r - t).abs() <= 0.10);
    let increasing = rates[0] < rates[1] && rates[1] < rates[2];
    verdict(
        3,
        "power, model 1, delta=0.4 across n",
        within && increasing,
        &format!(
            "n=200: {:.1}%, n=400: {:.1}%, n=600: {:.1}%, reps={reps}",
            100.0 * rates[0],
            100.0 * rates[1],
            100.0 * rates[2]
        ),
    );
}

#[test]
fn c4_power_model3() {
    let reps = 200;
    let s = spec(3, Hypothesis::Alt, 400, 5, 0.4, 104);
    let rate = rejection_rates(&s, reps, &[0.05])[0];
    verdict(
        4,
        "power, model 3, n=400 delta=0.4",
        rate >= 0.75,
        &format!("alpha 5%: {:.1}%, reps={reps}", 100.0 * rate),
    );
}

#[test]
fn c5_power_monotone_in_delta_and_p() {
    let reps = 200;
    let deltas = [0.2, 0.4, 0.6, 0.8];
    let mut p5 = Vec::new();
    for &d in &deltas {
        let s = spec(1, Hypothesis::Alt, 400, 5, d, 105);
        p5.push(rejection_rates(&s, reps, &[0.10])[0]);
    }
    let s10 = spec(1, Hypothesis::Alt, 400, 10, 0.4, 105);
    let p10 = rejection_rates(&s10, reps, &[0.10])[0];
    let nondecreasing = p5.windows(2).all(|w| w[1] >= w[0]);
    let dim_gain = p10 >= p5[1] - 0.05;
    verdict(
        5,
        "power increases with delta and dimension",
        nondecreasing && dim_gain,
        &format!(
            "p=5 over delta: {:?}%, p=10 at delta=0.4: {:.1}%",
            p5.iter().map(|r| (1000.0 * r).round() / 10.0).collect::<Vec<_>>(),
            100.0 * p10
        ),
    );
}

fn random_resid(n: usize, num_grid: usize, p: usize, seed: u64) -> ResidualPanel {
    let mut rng = lswn::rng::stream(seed, &[977]);
    let values = (0..n * num_grid * p)
        .map(|_| rng.gen::<f64>() * 2.0 - 1.0)
        .collect();
    ResidualPanel(FunctionalPanel::from_values(n, num_grid, p, values).unwrap())
}

#[test]
fn c6_oracle_identities() {
    let mut worst_stat = 0.0f64;
    for inst in 0..25u64 {
        let mut rng = lswn::rng::stream(4242, &[inst]);
        let n = 40 + (rng.gen::<u64>() % 21) as usize;
        let p = 1 + (rng.gen::<u64>() % 3) as usize;
        let num_grid = 2 + (rng.gen::<u64>() % 4) as usize;
        let s_n = 2 + (rng.gen::<u64>() % 4) as usize;
        let m_n = 1 + (rng.gen::<u64>() % s_n.min(2) as u64) as usize;
        let m_n = m_n.min(s_n - 1);
        let cfg = TestConfig {
            b: 0.2,
            tau: 0.2,
            s_n,
            m_n,
            window_l: 3,
            boot_reps: 100,
            alpha: 0.05,
            kernel: Kernel::Triangular,
            seed: 0,
        };
        cfg.validate(n).unwrap();
        let resid = random_resid(n, num_grid, p, 5000 + inst);
        let tensor = build_window_tensor(&resid, &cfg).unwrap();
        let scale = n as f64 * cfg.tau * cfg.s_n as f64;
        let mut acc = vec![0.0f64; num_grid];
        for w in 0..tensor.n_offsets {
            let t = (tensor.half + w) as f64 / n as f64;
            tensor.column_sum(w, &mut acc);
            for (j, &v) in acc.iter().enumerate() {
                let slow = g_sum_oracle(&resid, t, j, &cfg).unwrap();
                let rel = (v / scale - slow).abs() / slow.abs().max(1e-12);
                worst_stat = worst_stat.max(rel);
            }
        }
    }

    // naive three-loop bootstrap draw on a handful of the same instances
    let mut worst_boot = 0.0f64;
    for inst in 0..5u64 {
        let cfg = TestConfig {
            b: 0.2,
            tau: 0.2,
            s_n: 3,
            m_n: 1,
            window_l: 3,
            boot_reps: 100,
            alpha: 0.05,
            kernel: Kernel::Triangular,
            seed: 0,
        };
        let n = 50;
        let resid = random_resid(n, 4, 2, 7000 + inst);
        let tensor = build_window_tensor(&resid, &cfg).unwrap();
        let s = moving_sums(&tensor, cfg.window_l).unwrap();
        let mut rng = lswn::rng::stream(99, &[inst]);
        let mult: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let fast = bootstrap_draw(&s, &mult);
        let mut best = 0.0f64;
        for w in 0..s.n_offsets {
            for m in 0..s.num_grid {
                let mut acc = 0.0;
                for j in cfg.window_l..=(2 * s.half - cfg.window_l) {
                    acc += mult[w + j - 1] * s.entry(j, w, m);
                }
                best = best.max(acc.abs());
            }
        }
        let slow = best / ((s.half - cfg.window_l) as f64).sqrt();
        worst_boot = worst_boot.max((fast - slow).abs());
    }

    let pass = worst_stat < 1e-9 && worst_boot < 1e-12;
    verdict(
        6,
        "linearized statistic and bootstrap match direct oracles",
        pass,
        &format!("max rel stat err {worst_stat:.2e}, max abs draw err {worst_boot:.2e}"),
    );
}

#[test]
fn c7_invariants() {
    let cfg = TestConfig {
        b: 0.2,
        tau: 0.2,
        s_n: 3,
        m_n: 1,
        window_l: 3,
        boot_reps: 100,
        alpha: 0.05,
        kernel: Kernel::Triangular,
        seed: 0,
    };
    let n = 48;
    let (num_grid, p) = (4, 3);
    let resid = random_resid(n, num_grid, p, 31);
    let q = q_statistic(&build_window_tensor(&resid, &cfg).unwrap());

    // dimension permutation
    let perm = [2usize, 0, 1];
    let mut pv = vec![0.0f64; n * num_grid * p];
    for i in 0..n {
        for j in 0..num_grid {
            let c = resid.curve(i, j);
            for (d, &src) in perm.iter().enumerate() {
                pv[(i * num_grid + j) * p + d] = c[src];
            }
        }
    }
    let resid_p = ResidualPanel(FunctionalPanel::from_values(n, num_grid, p, pv).unwrap());
    let q_perm = q_statistic(&build_window_tensor(&resid_p, &cfg).unwrap());
    let perm_ok = (q - q_perm).abs() <= 1e-12 * q.abs().max(1.0);

    // scale equivariance: residuals * c drive the quartic statistic by c^4
    let c = 1.7f64;
    let sv: Vec<f64> = resid.0.values().iter().map(|&v| c * v).collect();
    let resid_s = ResidualPanel(FunctionalPanel::from_values(n, num_grid, p, sv).unwrap());
    let q_scaled = q_statistic(&build_window_tensor(&resid_s, &cfg).unwrap());
    let scale_ok = (q_scaled - c.powi(4) * q).abs() <= 1e-10 * (c.powi(4) * q).abs().max(1.0);

    // differencing kills an i-constant window tensor exactly
    let (nn, tau, grid) = (40usize, 0.2f64, 3usize);
    let half = (nn as f64 * tau).ceil() as usize;
    let n_offsets = nn - 2 * half + 1;
    let mut wv = vec![0.0f64; n_offsets * 2 * half * grid];
    for w in 0..n_offsets {
        for i in 0..2 * half {
            for j in 0..grid {
                // constant in i, arbitrary in (w, j)
                wv[((w * 2 * half) + i) * grid + j] = (w as f64 + 1.0) * (j as f64 - 0.7);
            }
        }
    }
    let t = WindowTensor::from_values(nn, grid, tau, 3, 1, wv).unwrap();
    let s = moving_sums(&t, 3).unwrap();
    let mut diff_ok = true;
    for w in 0..s.n_offsets {
        for jrow in 0..s.n_rows {
            diff_ok &= s.row(jrow, w).iter().all(|&v| v == 0.0);
        }
    }

    // local-linear smoother reproduces linear-in-t data
    let lin: Vec<f64> = (0..60)
        .map(|i| 0.5 - 2.0 * (i + 1) as f64 / 60.0)
        .collect();
    let panel = FunctionalPanel::from_values(60, 1, 1, lin).unwrap();
    let mean = estimate_mean(&panel, 0.15, Kernel::Triangular).unwrap();
    let r = compute_residuals(&panel, &mean).unwrap();
    let lin_ok = r.0.values().iter().all(|&v| v.abs() <= 1e-10);

    // thread-count determinism of the full pipeline through the binary
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("panel.csv");
    let bin = env!("CARGO_BIN_EXE_lswn");
    let sim = Command::new(bin)
        .args([
            "simulate", "--model", "1", "--n", "120", "--p", "2", "--N", "10", "--seed", "5",
            "--output",
        ])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let run = |jobs: &str| {
        let out = Command::new(bin)
            .args(["--jobs", jobs, "test", "--seed", "9", "--boot", "200", "--input"])
            .arg(&csv)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let jobs_ok = run("1") == run("3");

    let pass = perm_ok && scale_ok && diff_ok && lin_ok && jobs_ok;
    verdict(
        7,
        "invariant suite",
        pass,
        &format!(
            "perm {perm_ok}, scale {scale_ok}, differencing {diff_ok}, linear {lin_ok}, jobs {jobs_ok}"
        ),
    );
}

#[test]
fn c8_size_model1_p10() {
    let reps = 200;
    let s = spec(1, Hypothesis::Null, 400, 10, 0.0, 108);
    let rate = rejection_rates(&s, reps, &[0.05])[0];
    let pass = (rate - 0.05).abs() <= 0.040;
    verdict(
        8,
        "size, model 1, n=400 p=10",
        pass,
        &format!("alpha 5%: {:.1}%, reps={reps}", 100.0 * rate),
    );
}
