//! Generators for the three benchmark models under the null and the
//! AR-type alternatives, plus the Monte Carlo driver that tabulates
//! empirical rejection rates.
//!
//! All three models share the trend m(t, u) = (1 + u)(10 sin(pi(t - 1/2)) + 1)
//! and i.i.d. standard normal innovations. Model 1 has a fixed variance
//! profile in u; Model 2 mixes two amplitude curves with a deterministic
//! time-varying scale; Model 3 drives each coordinate with a time-varying
//! GARCH(1,1) recursion. Alternatives add an AR(1)-type layer whose
//! strength is controlled by delta.

use crate::bootstrap::{bootstrap_draws, bootstrap_quantile, moving_sums, resolve_pipeline};
use crate::config::TestSettings;
use crate::covstat::q_statistic;
use crate::error::{Error, Result};
use crate::panel::FunctionalPanel;
use crate::rng::{self, TAG_SIM};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    Null,
    Alt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    /// 1, 2 or 3.
    pub model: u8,
    pub hypothesis: Hypothesis,
    pub n: usize,
    pub p: usize,
    pub num_grid: usize,
    /// Alternative strength; ignored under the null.
    pub delta: f64,
    pub seed: u64,
    /// GARCH burn-in steps (Model 3 only).
    pub burn_in: usize,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.model) {
            return Err(Error::ConfigInfeasible(format!(
                "model must be 1, 2 or 3, got {}",
                self.model
            )));
        }
        if self.n == 0 || self.p == 0 || self.num_grid == 0 {
            return Err(Error::ConfigInfeasible("empty simulation shape".into()));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::ConfigInfeasible(format!(
                "delta = {} must be >= 0",
                self.delta
            )));
        }
        Ok(())
    }
}

fn trend(t: f64, u: f64) -> f64 {
    (1.0 + u) * (10.0 * (PI * (t - 0.5)).sin() + 1.0)
}

fn amplitude_one(u: f64) -> f64 {
    0.1 * (PI * u / 3.0).cos() + 0.5
}

fn amplitude_two(u: f64) -> f64 {
    0.4 * u
}

fn sigma_smooth(t: f64) -> f64 {
    0.5 + 0.5 * (PI * t).sin()
}

fn garch_intercept(t: f64) -> f64 {
    0.9 + 0.1 * (PI / 3.0 + 2.0 * PI * t).cos()
}

/// Null errors eps_i for i = 0..=n, stored time-major (grid, dim inner).
/// The extra i = 0 slice seeds the alternative recursion; the stream is
/// keyed without hypothesis or delta so a delta = 0 alternative matches
/// its null panel bit for bit.
fn null_errors(spec: &SimSpec) -> Vec<f64> {
    let (n, p, num_grid) = (spec.n, spec.p, spec.num_grid);
    let nf = n as f64;
    let mut rng = rng::stream(
        spec.seed,
        &[TAG_SIM, spec.model as u64, n as u64, p as u64, num_grid as u64],
    );
    let grid: Vec<f64> = (1..=num_grid).map(|j| j as f64 / num_grid as f64).collect();
    let width = num_grid * p;
    let mut eps = vec![0.0f64; (n + 1) * width];
    match spec.model {
        1 => {
            for i in 0..=n {
                for d in 0..p {
                    let eta: f64 = StandardNormal.sample(&mut rng);
                    for (j, &u) in grid.iter().enumerate() {
                        let scale = 0.1 * (u - 0.5) * (u - 0.5) + 0.8;
                        eps[i * width + j * p + d] = scale * eta;
                    }
                }
            }
        }
        2 => {
            // one amplitude-curve assignment per coordinate per replication
            let branch: Vec<bool> = (0..p).map(|_| rng.gen::<f64>() < 0.5).collect();
            for i in 0..=n {
                let t = i as f64 / nf;
                let s = sigma_smooth(t);
                for d in 0..p {
                    let eta: f64 = StandardNormal.sample(&mut rng);
                    for (j, &u) in grid.iter().enumerate() {
                        let a = if branch[d] {
                            amplitude_one(u)
                        } else {
                            amplitude_two(u)
                        };
                        eps[i * width + j * p + d] = a * s * eta;
                    }
                }
            }
        }
        3 => {
            let branch: Vec<bool> = (0..p).map(|_| rng.gen::<f64>() < 0.5).collect();
            let t0 = 1.0 / nf;
            let mut var = vec![garch_intercept(t0); p];
            let mut eta_prev: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            let step = |t: f64, var: &mut Vec<f64>, eta_prev: &mut Vec<f64>, rng: &mut _| {
                let coef = 0.1 + 0.2 * t;
                let omega = garch_intercept(t);
                let mut etas = Vec::with_capacity(p);
                for d in 0..p {
                    let shock = var[d].sqrt() * eta_prev[d];
                    var[d] = omega + coef * shock * shock + coef * var[d];
                    etas.push(StandardNormal.sample(rng));
                }
                *eta_prev = etas.clone();
                etas
            };
            for _ in 0..spec.burn_in {
                step(t0, &mut var, &mut eta_prev, &mut rng);
            }
            for i in 0..=n {
                let t = (i.max(1)) as f64 / nf;
                let etas = step(t, &mut var, &mut eta_prev, &mut rng);
                for d in 0..p {
                    debug_assert!(var[d] > 0.0);
                    let sd = var[d].sqrt();
                    for (j, &u) in grid.iter().enumerate() {
                        let a = if branch[d] {
                            amplitude_one(u)
                        } else {
                            amplitude_two(u)
                        };
                        eps[i * width + j * p + d] = a * sd * etas[d];
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    eps
}

/// Tridiagonal AR matrix: diagonal delta, off-diagonals 0.1.
fn tridiag_apply(delta: f64, x: &[f64], out: &mut [f64]) {
    let p = x.len();
    for d in 0..p {
        let mut v = delta * x[d];
        if d > 0 {
            v += 0.1 * x[d - 1];
        }
        if d + 1 < p {
            v += 0.1 * x[d + 1];
        }
        out[d] = v;
    }
}

/// Draws one panel X_i(j/N) = m(i/n, j/N) + eps_i(j/N).
pub fn generate(spec: &SimSpec) -> Result<FunctionalPanel> {
    spec.validate()?;
    let (n, p, num_grid) = (spec.n, spec.p, spec.num_grid);
    let nf = n as f64;
    let width = num_grid * p;
    let grid: Vec<f64> = (1..=num_grid).map(|j| j as f64 / num_grid as f64).collect();
    let mut eps = null_errors(spec);

    if spec.hypothesis == Hypothesis::Alt {
        match spec.model {
            1 | 2 => {
                // eps^A_i = 6 A_1 sin(pi i / 2n) (u - 1/2)^2 eps^A_{i-1} + eps_i
                let mut scratch = vec![0.0f64; p];
                let mut ar = vec![0.0f64; p];
                for i in 1..=n {
                    let coef = 6.0 * (PI * i as f64 / (2.0 * nf)).sin();
                    for (j, &u) in grid.iter().enumerate() {
                        let offset = i * width + j * p;
                        let prev_offset = (i - 1) * width + j * p;
                        let shape = (u - 0.5) * (u - 0.5);
                        let prev = &eps[prev_offset..prev_offset + p];
                        tridiag_apply(spec.delta, prev, &mut scratch);
                        for d in 0..p {
                            ar[d] = coef * shape * scratch[d];
                        }
                        for d in 0..p {
                            eps[offset + d] += ar[d];
                        }
                    }
                }
            }
            3 => {
                // integral-operator recursion with separable Gaussian kernel
                let g: Vec<f64> = grid.iter().map(|&u| (-u * u / 2.0).exp()).collect();
                let gmean = g.iter().sum::<f64>() / num_grid as f64;
                let c = gmean * gmean; // Riemann double sum of exp(-(u^2+s^2)/2)
                for i in 1..=n {
                    let t = i as f64 / nf;
                    let a2 = spec.delta * (1.0 + 0.25 * (PI * t / 2.0).cos()) / c;
                    // per-dim average of g(u) * eps^A_{i-1}(u)
                    let mut avg = vec![0.0f64; p];
                    for (j, &gj) in g.iter().enumerate() {
                        let prev = (i - 1) * width + j * p;
                        for d in 0..p {
                            avg[d] += gj * eps[prev + d];
                        }
                    }
                    avg.iter_mut().for_each(|v| *v /= num_grid as f64);
                    for (j, &gj) in g.iter().enumerate() {
                        let offset = i * width + j * p;
                        for d in 0..p {
                            eps[offset + d] += a2 * gj * avg[d];
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    // drop the seed slice i = 0 and add the trend
    let mut values = vec![0.0f64; n * width];
    for i in 1..=n {
        let t = i as f64 / nf;
        for (j, &u) in grid.iter().enumerate() {
            let m = trend(t, u);
            let src = i * width + j * p;
            let dst = (i - 1) * width + j * p;
            for d in 0..p {
                values[dst + d] = m + eps[src + d];
            }
        }
    }
    FunctionalPanel::from_values(n, num_grid, p, values)
}

/// One Monte Carlo cell: rejection rate with its binomial standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub model: u8,
    pub n: usize,
    pub p: usize,
    pub delta: f64,
    pub alpha: f64,
    pub reps: usize,
    pub reject_rate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "model,n,p,delta,alpha,reps,reject_rate,se")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.6},{:.6}",
                r.model, r.n, r.p, r.delta, r.alpha, r.reps, r.reject_rate, r.se
            )?;
        }
        Ok(())
    }
}

/// Rejection counts per alpha over the replicate range [rep_start, rep_end).
/// Replicate seeds derive from the spec seed and the absolute replicate
/// index, so partial runs compose to the same totals as a single run.
pub fn monte_carlo_counts(
    spec: &SimSpec,
    settings: &TestSettings,
    rep_start: usize,
    rep_end: usize,
    alphas: &[f64],
) -> Result<Vec<usize>> {
    let results: Result<Vec<Vec<bool>>> = (rep_start..rep_end)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = rng::replicate_seed(spec.seed, rep as u64);
            let mut rep_spec = spec.clone();
            rep_spec.seed = rep_seed;
            let panel = generate(&rep_spec)?;
            let mut rep_settings = settings.clone();
            rep_settings.seed = rep_seed;
            let rp = resolve_pipeline(&panel, &rep_settings)?;
            let s = moving_sums(&rp.tensor, rp.cfg.window_l)?;
            let q_scaled = q_statistic(&rp.tensor) / (rp.cfg.s_n as f64).sqrt();
            let draws = bootstrap_draws(&s, rp.cfg.boot_reps, rp.cfg.seed);
            Ok(alphas
                .iter()
                .map(|&a| q_scaled > bootstrap_quantile(&draws, a))
                .collect())
        })
        .collect();
    let results = results?;
    let mut counts = vec![0usize; alphas.len()];
    for flags in &results {
        for (c, &f) in counts.iter_mut().zip(flags.iter()) {
            if f {
                *c += 1;
            }
        }
    }
    Ok(counts)
}

/// Full Monte Carlo study over one spec: `reps` independent panels,
/// tabulated at each requested level.
pub fn monte_carlo(
    spec: &SimSpec,
    settings: &TestSettings,
    reps: usize,
    alphas: &[f64],
) -> Result<McReport> {
    if reps < 50 {
        return Err(Error::ConfigInfeasible(format!(
            "need at least 50 replicates, got {reps}"
        )));
    }
    let counts = monte_carlo_counts(spec, settings, 0, reps, alphas)?;
    let rows = alphas
        .iter()
        .zip(counts.iter())
        .map(|(&alpha, &c)| {
            let f = c as f64 / reps as f64;
            McRow {
                model: spec.model,
                n: spec.n,
                p: spec.p,
                delta: if spec.hypothesis == Hypothesis::Null {
                    0.0
                } else {
                    spec.delta
                },
                alpha,
                reps,
                reject_rate: f,
                se: (f * (1.0 - f) / reps as f64).sqrt(),
            }
        })
        .collect();
    Ok(McReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(model: u8, hypothesis: Hypothesis, n: usize, p: usize, delta: f64) -> SimSpec {
        SimSpec {
            model,
            hypothesis,
            n,
            p,
            num_grid: 10,
            delta,
            seed: 31,
            burn_in: 200,
        }
    }

    #[test]
    fn shapes_and_reproducibility() {
        for model in 1..=3u8 {
            let s = spec(model, Hypothesis::Null, 50, 3, 0.0);
            let a = generate(&s).unwrap();
            let b = generate(&s).unwrap();
            assert_eq!(a, b);
            assert_eq!((a.n(), a.num_grid(), a.p()), (50, 10, 3));
        }
    }

    #[test]
    fn delta_zero_alt_equals_null() {
        for model in 1..=3u8 {
            let null = generate(&spec(model, Hypothesis::Null, 40, 2, 0.7)).unwrap();
            let alt = generate(&spec(model, Hypothesis::Alt, 40, 2, 0.0)).unwrap();
            if model == 3 {
                assert_eq!(null, alt);
            } else {
                // models 1-2: the off-diagonal 0.1 stays in A_1 at delta = 0
                let altd = generate(&spec(model, Hypothesis::Alt, 40, 1, 0.0));
                let nulld = generate(&spec(model, Hypothesis::Null, 40, 1, 0.0));
                assert_eq!(altd.unwrap(), nulld.unwrap());
            }
        }
    }

    #[test]
    fn model1_alt_center_grid_behaves_as_null() {
        // (u - 1/2)^2 vanishes at u = 1/2: with an odd grid point at 0.5
        // the alternative equals the null there
        let mut s = spec(1, Hypothesis::Alt, 30, 2, 0.8);
        s.num_grid = 10; // u_5 = 0.5
        let alt = generate(&s).unwrap();
        s.hypothesis = Hypothesis::Null;
        let null = generate(&s).unwrap();
        let j_mid = 4; // 0-based: u = 5/10
        for i in 0..30 {
            for d in 0..2 {
                assert_abs_diff_eq!(
                    alt.value(i, j_mid, d),
                    null.value(i, j_mid, d),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn model1_null_lag1_autocorrelation_small() {
        // innovations are i.i.d.: average lag-1 sample autocorrelation of
        // the errors is O(n^{-1/2}) over seeds
        let n = 400;
        let mut total = 0.0;
        let seeds = 20;
        for seed in 0..seeds {
            let mut s = spec(1, Hypothesis::Null, n, 2, 0.0);
            s.seed = seed;
            s.num_grid = 5;
            let panel = generate(&s).unwrap();
            // remove the deterministic trend exactly
            let mut acc = 0.0;
            let mut cells = 0usize;
            for j in 0..5 {
                let u = (j + 1) as f64 / 5.0;
                for d in 0..2 {
                    let e: Vec<f64> = (0..n)
                        .map(|i| {
                            panel.value(i, j, d) - trend((i + 1) as f64 / n as f64, u)
                        })
                        .collect();
                    let mean = e.iter().sum::<f64>() / n as f64;
                    let var: f64 =
                        e.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
                    let cov: f64 = (1..n)
                        .map(|i| (e[i] - mean) * (e[i - 1] - mean))
                        .sum::<f64>()
                        / n as f64;
                    acc += cov / var;
                    cells += 1;
                }
            }
            total += (acc / cells as f64).abs();
        }
        let avg = total / seeds as f64;
        assert!(
            avg < 3.0 / (n as f64).sqrt(),
            "avg |lag-1 autocorr| = {avg}"
        );
    }

    #[test]
    fn model3_variance_positive_and_bounded() {
        let s = spec(3, Hypothesis::Null, 200, 3, 0.0);
        let panel = generate(&s).unwrap();
        // the GARCH recursion is a contraction (alpha + beta <= 0.6): the
        // generated errors stay finite and not absurdly large
        for v in panel.values() {
            assert!(v.is_finite());
            assert!(v.abs() < 1e3);
        }
    }

    #[test]
    fn model3_alt_normalizer_matches_quadrature() {
        // (1/N sum exp(-u^2/2))^2 against the continuum double integral
        let n = 10_000usize;
        let gmean = (1..=n)
            .map(|j| {
                let u = j as f64 / n as f64;
                (-u * u / 2.0).exp()
            })
            .sum::<f64>()
            / n as f64;
        let c = gmean * gmean;
        assert_abs_diff_eq!(c, 0.732, epsilon = 1e-3);
    }

    #[test]
    fn bad_spec_rejected() {
        let mut s = spec(4, Hypothesis::Null, 20, 1, 0.0);
        assert!(generate(&s).is_err());
        s.model = 1;
        s.delta = -0.5;
        assert!(generate(&s).is_err());
    }

    #[test]
    fn mc_counts_compose() {
        let s = spec(1, Hypothesis::Null, 60, 1, 0.0);
        let settings = TestSettings {
            boot_reps: 100,
            ..Default::default()
        };
        let full = monte_carlo_counts(&s, &settings, 0, 6, &[0.1]).unwrap();
        let a = monte_carlo_counts(&s, &settings, 0, 3, &[0.1]).unwrap();
        let b = monte_carlo_counts(&s, &settings, 3, 6, &[0.1]).unwrap();
        assert_eq!(full[0], a[0] + b[0]);
    }
}
