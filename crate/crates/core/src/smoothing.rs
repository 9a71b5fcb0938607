//! Mean-surface estimation and bandwidth selection.
//!
//! The mean m(t, u) is estimated by a kernel smoother in rescaled time with
//! discrete local-linear weights. These weights reduce to the plain
//! kernel-weighted average in the interior and build in the boundary
//! correction near t = 0 and t = 1; they reproduce data that are constant
//! or linear in i/n exactly, at every t.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::panel::{FunctionalPanel, ResidualPanel};

/// Estimated mean m(i/n, j/N) on the full lattice; same layout as the panel.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSurface {
    pub n: usize,
    pub num_grid: usize,
    pub p: usize,
    pub values: Vec<f64>,
}

impl MeanSurface {
    #[inline]
    pub fn value(&self, i: usize, j: usize, d: usize) -> f64 {
        self.values[(i * self.num_grid + j) * self.p + d]
    }
}

/// Discrete local-linear weights w_l(t), l = 1..n, normalized to sum 1.
///
/// w_l(t) is proportional to K_b(l/n - t) * {S_2(t) - S_1(t)(l/n - t)} with
/// S_r(t) = sum_l K_b(l/n - t) (l/n - t)^r, so the weighted design is
/// centered and constants and linears in l/n are reproduced exactly.
pub fn local_linear_weights(n: usize, t: f64, b: f64, kernel: Kernel) -> Result<Vec<f64>> {
    let nf = n as f64;
    // only l with |l/n - t| < b contribute
    let lo = (((t - b) * nf).floor().max(0.0)) as usize;
    let hi = (((t + b) * nf).ceil() as usize).min(n);
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut k_cache = vec![0.0f64; hi.saturating_sub(lo)];
    for l in lo..hi {
        let x = (l + 1) as f64 / nf - t;
        let k = kernel.eval_scaled(x, b);
        k_cache[l - lo] = k;
        s0 += k;
        s1 += k * x;
        s2 += k * x * x;
    }
    let denom = s0 * s2 - s1 * s1;
    // all mass on one point (or none): the local-linear system is singular
    let scale = (s0 * s2).abs().max(s1 * s1);
    if !(denom > scale * 1e-13) && !(s0 > 0.0 && s2 == 0.0 && s1 == 0.0) {
        return Err(Error::DegenerateWindow { t });
    }
    let mut w = vec![0.0f64; n];
    if s2 == 0.0 {
        // single support point: weight 1 there
        let mut total = 0.0;
        for l in lo..hi {
            total += k_cache[l - lo];
        }
        if total <= 0.0 {
            return Err(Error::DegenerateWindow { t });
        }
        for l in lo..hi {
            w[l] = k_cache[l - lo] / total;
        }
        return Ok(w);
    }
    for l in lo..hi {
        let x = (l + 1) as f64 / nf - t;
        w[l] = k_cache[l - lo] * (s2 - s1 * x) / denom;
    }
    Ok(w)
}

/// Smooths the panel over time at every (grid, dim).
pub fn estimate_mean(panel: &FunctionalPanel, b: f64, kernel: Kernel) -> Result<MeanSurface> {
    let n = panel.n();
    if (n as f64) * b < 3.0 {
        return Err(Error::ConfigInfeasible(format!(
            "mean bandwidth too small: n*b = {} < 3",
            n as f64 * b
        )));
    }
    let width = panel.num_grid() * panel.p();
    let mut values = vec![0.0f64; n * width];
    for i in 0..n {
        let t = (i + 1) as f64 / n as f64;
        let w = local_linear_weights(n, t, b, kernel)?;
        let out = &mut values[i * width..(i + 1) * width];
        for (l, &wl) in w.iter().enumerate() {
            if wl == 0.0 {
                continue;
            }
            let row = panel.row(l);
            for (o, &x) in out.iter_mut().zip(row.iter()) {
                *o += wl * x;
            }
        }
    }
    Ok(MeanSurface {
        n,
        num_grid: panel.num_grid(),
        p: panel.p(),
        values,
    })
}

/// eps_i(j/N) = X_i(j/N) - m(i/n, j/N).
pub fn compute_residuals(panel: &FunctionalPanel, mean: &MeanSurface) -> Result<ResidualPanel> {
    if panel.n() != mean.n || panel.num_grid() != mean.num_grid || panel.p() != mean.p {
        return Err(Error::InconsistentShape(
            "panel and mean surface shapes differ".into(),
        ));
    }
    let values: Vec<f64> = panel
        .values()
        .iter()
        .zip(mean.values.iter())
        .map(|(x, m)| x - m)
        .collect();
    Ok(ResidualPanel(FunctionalPanel::from_values(
        panel.n(),
        panel.num_grid(),
        panel.p(),
        values,
    )?))
}

/// Default bandwidth grid: 12 log-spaced candidates centered on the n^(-1/4)
/// rate, clipped below 1/2.
pub fn default_bandwidth_grid(n: usize) -> Vec<f64> {
    let rate = (n as f64).powf(-0.25);
    log_spaced(0.5 * rate, (2.0 * rate).min(0.49), 12)
}

pub(crate) fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 || hi <= lo {
        return vec![lo];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// GCV bandwidth selection for the mean smoother.
///
/// GCV(b) = [n^-1 sum of squared residuals over (j, d)] / [1 - tr Q(b)/n]^2
/// with tr Q(b) the sum of diagonal smoother weights w_i(i/n). Ties and
/// near-ties break toward the larger candidate. Returns the winner plus the
/// (b, GCV) diagnostic curve.
pub fn gcv_bandwidth(
    panel: &FunctionalPanel,
    grid: &[f64],
    kernel: Kernel,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let n = panel.n();
    let nf = n as f64;
    let mut curve = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &b in grid {
        if nf * b < 3.0 {
            continue;
        }
        let mut rss = 0.0f64;
        let mut trace = 0.0f64;
        let mut ok = true;
        for i in 0..n {
            let t = (i + 1) as f64 / nf;
            let w = match local_linear_weights(n, t, b, kernel) {
                Ok(w) => w,
                Err(_) => {
                    ok = false;
                    break;
                }
            };
            trace += w[i];
            let row = panel.row(i);
            let width = row.len();
            let mut fitted = vec![0.0f64; width];
            for (l, &wl) in w.iter().enumerate() {
                if wl == 0.0 {
                    continue;
                }
                for (f, &x) in fitted.iter_mut().zip(panel.row(l).iter()) {
                    *f += wl * x;
                }
            }
            for (f, &x) in fitted.iter().zip(row.iter()) {
                let e = x - f;
                rss += e * e;
            }
        }
        if !ok {
            continue;
        }
        let shrink = 1.0 - trace / nf;
        if shrink <= 0.0 {
            continue;
        }
        let gcv = (rss / nf) / (shrink * shrink);
        curve.push((b, gcv));
        // ascending grid: <= keeps the larger b on ties
        match best {
            Some((_, g)) if gcv > g => {}
            _ => best = Some((b, gcv)),
        }
    }
    match best {
        Some((b, _)) => Ok((b, curve)),
        None => Err(Error::AllCandidatesDegenerate),
    }
}
