//! Second-order statistics: lag products, the banded inner-product table,
//! window traces, the test statistic Q_n, and the brute-force reference
//! path used to validate the linearized computation.
//!
//! The fast path rests on the rank-one trace identity
//! tr(phi_{i,k} phi_{l,k}^T) = (eps_{i-k} . eps_{l-k}) (eps_i . eps_l),
//! which collapses the sum over lags k into a banded prefix sum along
//! diagonals of the inner-product table. The direct double-sum definition
//! is kept as [`g_sum_oracle`] and the two routes are compared exactly in
//! the test suite.

use crate::config::TestConfig;
use crate::error::{Error, Result};
use crate::panel::ResidualPanel;

/// phi_{i,k}(j/N) = eps_{i-k} eps_i^T as a p x p row-major matrix.
/// Zero matrix when i <= k (times are 1-based).
pub fn lag_product(resid: &ResidualPanel, i: usize, k: usize, j: usize) -> Result<Vec<f64>> {
    let (n, num_grid, p) = (resid.n(), resid.num_grid(), resid.p());
    if i < 1 || i > n || k < 1 || j < 1 || j > num_grid {
        return Err(Error::IndexOutOfRange(format!(
            "lag_product(i={i}, k={k}, j={j}) outside 1..{n} x 1.. x 1..{num_grid}"
        )));
    }
    let mut out = vec![0.0f64; p * p];
    if i > k {
        let a = resid.curve(i - 1 - k, j - 1);
        let b = resid.curve(i - 1, j - 1);
        for (r, &av) in a.iter().enumerate() {
            for (c, &bv) in b.iter().enumerate() {
                out[r * p + c] = av * bv;
            }
        }
    }
    Ok(out)
}

/// Inner products d[i][l][j] = eps_i(j/N) . eps_l(j/N) for 0 <= i-l <= s_n,
/// with per-diagonal prefix sums so banded lag sums are O(1).
#[derive(Debug, Clone)]
pub struct InnerProductTable {
    n: usize,
    num_grid: usize,
    s_n: usize,
    /// d[(g*n + i)*N + j]: dot of times (i+1, i+1-g), zero when i < g.
    d: Vec<f64>,
    /// prefix[(g*n + i)*N + j] = sum over i' <= i of d[g][i'][j].
    prefix: Vec<f64>,
}

impl InnerProductTable {
    pub fn s_n(&self) -> usize {
        self.s_n
    }

    /// Symmetric accessor, 1-based times with |i - l| <= s_n.
    #[inline]
    pub fn dot(&self, i: usize, l: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= l { (i, l) } else { (l, i) };
        let g = hi - lo;
        debug_assert!(g <= self.s_n);
        self.d[(g * self.n + (hi - 1)) * self.num_grid + j]
    }

    #[inline]
    fn cum(&self, g: usize, i0: isize, j: usize) -> f64 {
        if i0 < 0 {
            0.0
        } else {
            self.prefix[(g * self.n + i0 as usize) * self.num_grid + j]
        }
    }

    /// Banded sum over lags: sum_{k=1}^{s_n} d[i-k][l-k][j] for 1-based
    /// i > l with g = i - l <= s_n; out-of-range terms are zero.
    #[inline]
    pub fn band_sum(&self, i: usize, l: usize, j: usize) -> f64 {
        debug_assert!(i > l && i - l <= self.s_n);
        let g = i - l;
        // terms live at 0-based rows i-1-k, k = 1..s_n, on diagonal g
        self.cum(g, i as isize - 2, j) - self.cum(g, i as isize - 2 - self.s_n as isize, j)
    }
}

pub fn build_inner_products(resid: &ResidualPanel, s_n: usize) -> Result<InnerProductTable> {
    let (n, num_grid, p) = (resid.n(), resid.num_grid(), resid.p());
    if s_n >= n {
        return Err(Error::ConfigInfeasible(format!("s_n = {s_n} must be < n = {n}")));
    }
    let size = (s_n + 1) * n * num_grid;
    let mut d = vec![0.0f64; size];
    for g in 0..=s_n {
        for i in g..n {
            let base = (g * n + i) * num_grid;
            for j in 0..num_grid {
                let a = resid.curve(i, j);
                let b = resid.curve(i - g, j);
                let mut s = 0.0;
                for dd in 0..p {
                    s += a[dd] * b[dd];
                }
                d[base + j] = s;
            }
        }
    }
    let mut prefix = vec![0.0f64; size];
    for g in 0..=s_n {
        for i in 0..n {
            let base = (g * n + i) * num_grid;
            for j in 0..num_grid {
                let prev = if i == 0 {
                    0.0
                } else {
                    prefix[(g * n + i - 1) * num_grid + j]
                };
                prefix[base + j] = prev + d[base + j];
            }
        }
    }
    Ok(InnerProductTable {
        n,
        num_grid,
        s_n,
        d,
        prefix,
    })
}

/// tr U_i(t, j/N) via the rank-one reduction:
/// 2 * sum_{l=(i-s_n) or 1}^{i-M_n-1} K_tau(l/n - t) d[i][l][j] BandSum(i, l, j).
pub fn u_trace(
    table: &InnerProductTable,
    i: usize,
    t: f64,
    j: usize,
    cfg: &TestConfig,
    n: usize,
) -> f64 {
    if i < cfg.m_n + 2 {
        return 0.0;
    }
    let lo = i.saturating_sub(cfg.s_n).max(1);
    let hi = i - cfg.m_n - 1;
    let nf = n as f64;
    let mut acc = 0.0;
    for l in lo..=hi {
        let k = cfg.kernel.eval_scaled(l as f64 / nf - t, cfg.tau);
        if k == 0.0 {
            continue;
        }
        acc += k * table.dot(i, l, j) * table.band_sum(i, l, j);
    }
    2.0 * acc
}

/// Kernel-weighted window traces shared by Q_n and the bootstrap.
///
/// W[i][w][j] = K_tau((i - h)/n) * tr U_{i+w}(c_w/n, j/N) where h =
/// ceil(n*tau), window centers c_w = h + w, i = 1..2h, w = 0..n-2h.
#[derive(Debug, Clone)]
pub struct WindowTensor {
    pub n: usize,
    pub num_grid: usize,
    pub tau: f64,
    pub s_n: usize,
    pub m_n: usize,
    /// ceil(n * tau)
    pub half: usize,
    /// number of window offsets, n - 2h + 1
    pub n_offsets: usize,
    /// entries indexed ((w * 2h) + (i-1)) * N + j
    pub(crate) w: Vec<f64>,
}

impl WindowTensor {
    /// Builds a tensor from externally computed window traces, indexed
    /// ((w * 2h) + (i - 1)) * N + j with h = ceil(n * tau).
    pub fn from_values(
        n: usize,
        num_grid: usize,
        tau: f64,
        s_n: usize,
        m_n: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let half = (n as f64 * tau).ceil() as usize;
        if 2 * half >= n {
            return Err(Error::ConfigInfeasible(format!(
                "2*ceil(n*tau) = {} >= n = {}",
                2 * half,
                n
            )));
        }
        let n_offsets = n - 2 * half + 1;
        if values.len() != n_offsets * 2 * half * num_grid {
            return Err(Error::InconsistentShape(format!(
                "expected {} window trace values, got {}",
                n_offsets * 2 * half * num_grid,
                values.len()
            )));
        }
        Ok(WindowTensor {
            n,
            num_grid,
            tau,
            s_n,
            m_n,
            half,
            n_offsets,
            w: values,
        })
    }

    /// Entry at window row i (1-based, 1..2h), offset w, grid j (0-based).
    #[inline]
    pub fn entry(&self, i: usize, w: usize, j: usize) -> f64 {
        self.w[((w * 2 * self.half) + (i - 1)) * self.num_grid + j]
    }

    /// Row slice over j at (i, w).
    #[inline]
    pub(crate) fn row(&self, i: usize, w: usize) -> &[f64] {
        let base = ((w * 2 * self.half) + (i - 1)) * self.num_grid;
        &self.w[base..base + self.num_grid]
    }

    /// Column sums over i for one offset: out[j] = sum_i W[i][w][j].
    pub fn column_sum(&self, w: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 1..=2 * self.half {
            for (o, &v) in out.iter_mut().zip(self.row(i, w).iter()) {
                *o += v;
            }
        }
    }
}

pub fn build_window_tensor(resid: &ResidualPanel, cfg: &TestConfig) -> Result<WindowTensor> {
    let n = resid.n();
    let num_grid = resid.num_grid();
    let half = cfg.half_window(n);
    if 2 * half >= n {
        return Err(Error::ConfigInfeasible(format!(
            "2*ceil(n*tau) = {} >= n = {}",
            2 * half,
            n
        )));
    }
    let table = build_inner_products(resid, cfg.s_n)?;
    build_window_tensor_from_table(&table, cfg, n, num_grid, half)
}

pub(crate) fn build_window_tensor_from_table(
    table: &InnerProductTable,
    cfg: &TestConfig,
    n: usize,
    num_grid: usize,
    half: usize,
) -> Result<WindowTensor> {
    let n_offsets = n - 2 * half + 1;
    let nf = n as f64;
    let two_h = 2 * half;
    let mut w = vec![0.0f64; n_offsets * two_h * num_grid];
    for ofs in 0..n_offsets {
        let center = half + ofs; // 1-based window center
        let t = center as f64 / nf;
        for i in 1..=two_h {
            let kw = cfg
                .kernel
                .eval_scaled((i as f64 - half as f64) / nf, cfg.tau);
            if kw == 0.0 {
                continue;
            }
            let a = i + ofs; // absolute 1-based time
            let base = ((ofs * two_h) + (i - 1)) * num_grid;
            for j in 0..num_grid {
                w[base + j] = kw * u_trace(table, a, t, j, cfg, n);
            }
        }
    }
    Ok(WindowTensor {
        n,
        num_grid,
        tau: cfg.tau,
        s_n: cfg.s_n,
        m_n: cfg.m_n,
        half,
        n_offsets,
        w,
    })
}

/// Q_n = (n tau s_n)^(-1/2) max over (w, j) of |sum_i W[i][w][j]|.
pub fn q_statistic(tensor: &WindowTensor) -> f64 {
    let mut acc = vec![0.0f64; tensor.num_grid];
    let mut best = 0.0f64;
    for w in 0..tensor.n_offsets {
        tensor.column_sum(w, &mut acc);
        for &v in &acc {
            best = best.max(v.abs());
        }
    }
    let scale = tensor.n as f64 * tensor.tau * tensor.s_n as f64;
    best / scale.sqrt()
}

/// Direct double-sum evaluation of sum_k tr G_k(t, j/N) built from explicit
/// lag-product matrices. O(n^2 s_n p^3) per point; the brute-force
/// reference for the linearized path.
pub fn g_sum_oracle(resid: &ResidualPanel, t: f64, j: usize, cfg: &TestConfig) -> Result<f64> {
    let n = resid.n();
    let p = resid.p();
    let nf = n as f64;
    let mut total = 0.0f64;
    for k in 1..=cfg.s_n {
        for i in 1..=n {
            let ki = cfg.kernel.eval_scaled(i as f64 / nf - t, cfg.tau);
            if ki == 0.0 {
                continue;
            }
            let phi_i = lag_product(resid, i, k, j + 1)?;
            for l in 1..=n {
                let gap = i.abs_diff(l);
                if gap <= cfg.m_n || gap > cfg.s_n {
                    continue;
                }
                let kl = cfg.kernel.eval_scaled(l as f64 / nf - t, cfg.tau);
                if kl == 0.0 {
                    continue;
                }
                let phi_l = lag_product(resid, l, k, j + 1)?;
                // tr(phi_i phi_l^T) = sum of elementwise products
                let mut tr = 0.0;
                for e in 0..p * p {
                    tr += phi_i[e] * phi_l[e];
                }
                total += ki * kl * tr;
            }
        }
    }
    Ok(total / (nf * cfg.tau * cfg.s_n as f64))
}

/// Nadaraya-Watson autocovariance estimate Gamma_k(t, j/N) as a p x p
/// row-major matrix: (n tau)^-1 sum_i eps_{i-k} eps_i^T K_tau(i/n - t).
pub fn gamma_hat(
    resid: &ResidualPanel,
    k: usize,
    t: f64,
    j: usize,
    tau: f64,
    kernel: crate::kernel::Kernel,
) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(Error::IndexOutOfRange("lag k must be >= 1".into()));
    }
    let n = resid.n();
    let p = resid.p();
    let nf = n as f64;
    let mut out = vec![0.0f64; p * p];
    if k < n {
        for i in (k + 1)..=n {
            let kw = kernel.eval_scaled(i as f64 / nf - t, tau);
            if kw == 0.0 {
                continue;
            }
            let a = resid.curve(i - 1 - k, j);
            let b = resid.curve(i - 1, j);
            for (r, &av) in a.iter().enumerate() {
                for (c, &bv) in b.iter().enumerate() {
                    out[r * p + c] += kw * av * bv;
                }
            }
        }
    }
    let scale = nf * tau;
    out.iter_mut().for_each(|v| *v /= scale);
    Ok(out)
}
