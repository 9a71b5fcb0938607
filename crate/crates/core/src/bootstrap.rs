//! Difference-based block multiplier bootstrap and the end-to-end test.
//!
//! Forward-minus-backward block sums of the window tensor filter out smooth
//! signal; scaled by shared standard-normal multipliers their maximum
//! mimics the null distribution of Q_n / sqrt(s_n).

use crate::config::{Method, Provenance, Setting, TestConfig, TestResult, TestSettings};
use crate::covstat::{build_window_tensor, q_statistic, WindowTensor};
use crate::error::{Error, Result};
use crate::panel::{FunctionalPanel, ResidualPanel};
use crate::rng::{self, TAG_MULTIPLIER};
use crate::smoothing::{compute_residuals, default_bandwidth_grid, estimate_mean, gcv_bandwidth};
use crate::tuning::{
    default_tau_grid, default_window_grid, gcv_tau, method_of, mv_window, rule_gap, rule_lags,
    TuningReport,
};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Moving block-difference sums S[j][w][m], j = L .. 2h - L, scaled by
/// (2 s_n^2 L)^(-1/2).
#[derive(Debug, Clone)]
pub struct MovingSumTensor {
    pub n: usize,
    pub half: usize,
    pub window_l: usize,
    pub num_grid: usize,
    pub n_offsets: usize,
    /// rows j - L for j = L ..= 2h - L
    pub n_rows: usize,
    /// indexed ((w * n_rows) + jrow) * N + m
    s: Vec<f64>,
}

impl MovingSumTensor {
    #[inline]
    pub fn row(&self, jrow: usize, w: usize) -> &[f64] {
        let base = ((w * self.n_rows) + jrow) * self.num_grid;
        &self.s[base..base + self.num_grid]
    }

    /// Entry at 1-based paper row j (L <= j <= 2h - L).
    pub fn entry(&self, j: usize, w: usize, m: usize) -> f64 {
        self.row(j - self.window_l, w)[m]
    }
}

/// Block differencing of the window tensor rows over i.
///
/// Row indices follow the algorithm's convention in which both blocks stay
/// inside 1..2h for every j in L..2h-L: the forward block covers rows
/// j+1..j+L and the backward block rows j-L+1..j, so an i-constant tensor
/// cancels exactly at every row.
pub fn moving_sums(tensor: &WindowTensor, window_l: usize) -> Result<MovingSumTensor> {
    let half = tensor.half;
    if window_l >= half {
        return Err(Error::WindowTooLarge {
            l: window_l,
            half,
        });
    }
    let two_h = 2 * half;
    let num_grid = tensor.num_grid;
    let n_rows = two_h - 2 * window_l + 1;
    let scale = 1.0 / (2.0 * (tensor.s_n * tensor.s_n) as f64 * window_l as f64).sqrt();
    let mut s = vec![0.0f64; tensor.n_offsets * n_rows * num_grid];
    // direct block sums; both blocks add L rows in ascending order, so
    // identical rows cancel bitwise
    let mut forward = vec![0.0f64; num_grid];
    let mut backward = vec![0.0f64; num_grid];
    for w in 0..tensor.n_offsets {
        for j in window_l..=(two_h - window_l) {
            forward.iter_mut().for_each(|v| *v = 0.0);
            backward.iter_mut().for_each(|v| *v = 0.0);
            for x in 1..=window_l {
                for (f, &v) in forward.iter_mut().zip(tensor.row(j + x, w)) {
                    *f += v;
                }
                for (bk, &v) in backward.iter_mut().zip(tensor.row(j - window_l + x, w)) {
                    *bk += v;
                }
            }
            let out_base = ((w * n_rows) + (j - window_l)) * num_grid;
            for m in 0..num_grid {
                s[out_base + m] = scale * (forward[m] - backward[m]);
            }
        }
    }
    Ok(MovingSumTensor {
        n: tensor.n,
        half,
        window_l,
        num_grid,
        n_offsets: tensor.n_offsets,
        n_rows,
        s,
    })
}

/// One bootstrap value: max over offsets of the sup-norm of the
/// multiplier-weighted row sums, normalized by sqrt(ceil(n tau) - L).
/// `multipliers` covers absolute positions 1..n; position w + j is shared
/// across every window whose row range contains it.
pub fn bootstrap_draw(s: &MovingSumTensor, multipliers: &[f64]) -> f64 {
    debug_assert!(multipliers.len() >= s.n - s.window_l);
    let mut best = 0.0f64;
    let mut acc = vec![0.0f64; s.num_grid];
    for w in 0..s.n_offsets {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for jrow in 0..s.n_rows {
            // paper row j = jrow + L; multiplier index w + j, 1-based
            let r = multipliers[w + jrow + s.window_l - 1];
            for (a, &v) in acc.iter_mut().zip(s.row(jrow, w).iter()) {
                *a += r * v;
            }
        }
        for &v in &acc {
            best = best.max(v.abs());
        }
    }
    best / ((s.half - s.window_l) as f64).sqrt()
}

/// B bootstrap replicates with a deterministic multiplier stream per
/// replicate; output is independent of thread count.
pub fn bootstrap_draws(s: &MovingSumTensor, boot_reps: usize, seed: u64) -> Vec<f64> {
    (0..boot_reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, &[TAG_MULTIPLIER, r]);
            let multipliers: Vec<f64> = (0..s.n)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            bootstrap_draw(s, &multipliers)
        })
        .collect()
}

/// The ceil((1 - alpha) B)-th ascending order statistic.
pub fn bootstrap_quantile(draws: &[f64], alpha: f64) -> f64 {
    assert!(!draws.is_empty());
    let b = draws.len();
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = (((1.0 - alpha) * b as f64).ceil() as usize).clamp(1, b);
    sorted[k - 1]
}

/// Everything resolved ahead of drawing: the configuration, how each
/// parameter was chosen, and the intermediate surfaces.
pub struct ResolvedPipeline {
    pub cfg: TestConfig,
    pub provenance: Provenance,
    pub report: TuningReport,
    pub resid: ResidualPanel,
    pub tensor: WindowTensor,
}

/// Runs mean estimation, residual computation, parameter resolution and the
/// window tensor build; everything except the bootstrap.
pub fn resolve_pipeline(panel: &FunctionalPanel, settings: &TestSettings) -> Result<ResolvedPipeline> {
    panel.check_testable()?;
    let n = panel.n();
    if !(settings.alpha > 0.0 && settings.alpha < 1.0) {
        return Err(Error::ConfigInfeasible(format!(
            "alpha = {} must lie in (0, 1)",
            settings.alpha
        )));
    }

    let mut provenance = Provenance::new();
    let (b, gcv_b_curve) = match settings.b {
        Setting::Fixed(v) => (v, Vec::new()),
        Setting::Auto => gcv_bandwidth(panel, &default_bandwidth_grid(n), settings.kernel)?,
    };
    provenance.insert("b".into(), method_of(&settings.b, Method::Gcv));

    let mean = estimate_mean(panel, b, settings.kernel)?;
    let resid = compute_residuals(panel, &mean)?;

    let s_n = match settings.s_n {
        Setting::Fixed(v) => v,
        Setting::Auto => rule_lags(n),
    };
    provenance.insert("s_n".into(), method_of(&settings.s_n, Method::Rule));
    let m_n = match settings.m_n {
        Setting::Fixed(v) => v,
        Setting::Auto => rule_gap(n).min(s_n.saturating_sub(1)).max(1),
    };
    provenance.insert("M_n".into(), method_of(&settings.m_n, Method::Rule));

    let (tau, gcv_tau_curve) = match settings.tau {
        Setting::Fixed(v) => (v, Vec::new()),
        Setting::Auto => gcv_tau(&resid, s_n, &default_tau_grid(n), settings.kernel)?,
    };
    provenance.insert("tau".into(), method_of(&settings.tau, Method::Gcv));

    let mut cfg = TestConfig {
        b,
        tau,
        s_n,
        m_n,
        window_l: 2, // placeholder until L is resolved below
        boot_reps: settings.boot_reps,
        alpha: settings.alpha,
        kernel: settings.kernel,
        seed: settings.seed,
    };
    let half = cfg.half_window(n);
    if 2 * half >= n || s_n + 1 >= half {
        // produce the full constraint report
        cfg.validate(n)?;
    }
    let tensor = build_window_tensor(&resid, &cfg)?;

    let mut mv_curve = Vec::new();
    let window_l = match settings.window_l {
        Setting::Fixed(v) => {
            provenance.insert("L".into(), Method::User);
            v
        }
        Setting::Auto => {
            let grid = default_window_grid(n, half);
            if grid.len() >= 3 {
                let (l, curve) = mv_window(&tensor, &grid)?;
                mv_curve = curve;
                provenance.insert("L".into(), Method::Mv);
                l
            } else if half > 2 {
                // too few candidates for minimum volatility at this n
                provenance.insert("L".into(), Method::Rule);
                2
            } else {
                return Err(Error::ConfigInfeasible(format!(
                    "no feasible bootstrap window: ceil(n*tau) = {half}"
                )));
            }
        }
    };
    cfg.window_l = window_l;
    cfg.validate(n)?;

    let report = TuningReport {
        b,
        tau,
        s_n,
        m_n,
        window_l,
        methods: provenance.clone(),
        gcv_b_curve,
        gcv_tau_curve,
        mv_curve,
    };
    Ok(ResolvedPipeline {
        cfg,
        provenance,
        report,
        resid,
        tensor,
    })
}

/// The white-noise test: reject when Q_n / sqrt(s_n) exceeds the bootstrap
/// critical value at level alpha.
pub fn run_test(panel: &FunctionalPanel, settings: &TestSettings) -> Result<TestResult> {
    let rp = resolve_pipeline(panel, settings)?;
    let s = moving_sums(&rp.tensor, rp.cfg.window_l)?;
    let q_n = q_statistic(&rp.tensor);
    let q_scaled = q_n / (rp.cfg.s_n as f64).sqrt();
    let draws = bootstrap_draws(&s, rp.cfg.boot_reps, rp.cfg.seed);
    let r_boot = bootstrap_quantile(&draws, rp.cfg.alpha);
    Ok(TestResult {
        q_n,
        q_scaled,
        r_boot,
        reject: q_scaled > r_boot,
        alpha: rp.cfg.alpha,
        params: rp.cfg,
        provenance: rp.provenance,
        draws: settings.retain_draws.then_some(draws),
    })
}
