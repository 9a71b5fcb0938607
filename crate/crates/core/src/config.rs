//! Test configuration, parameter provenance and the test result.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A tuning parameter that is either auto-selected or pinned by the user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting<T> {
    Auto,
    Fixed(T),
}

impl<T> Default for Setting<T> {
    fn default() -> Self {
        Setting::Auto
    }
}

/// How a parameter value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    User,
    Rule,
    Gcv,
    Mv,
}

/// User-facing settings for [`crate::bootstrap::run_test`]; every tuning
/// parameter defaults to the documented auto-resolution chain.
#[derive(Debug, Clone)]
pub struct TestSettings {
    pub b: Setting<f64>,
    pub tau: Setting<f64>,
    pub s_n: Setting<usize>,
    pub m_n: Setting<usize>,
    pub window_l: Setting<usize>,
    pub boot_reps: usize,
    pub alpha: f64,
    pub kernel: Kernel,
    pub seed: u64,
    /// Keep the B bootstrap values in the result.
    pub retain_draws: bool,
}

impl Default for TestSettings {
    fn default() -> Self {
        Self {
            b: Setting::Auto,
            tau: Setting::Auto,
            s_n: Setting::Auto,
            m_n: Setting::Auto,
            window_l: Setting::Auto,
            boot_reps: 1000,
            alpha: 0.05,
            kernel: Kernel::Triangular,
            seed: 0,
            retain_draws: false,
        }
    }
}

/// Fully resolved tuning parameters; validated jointly against `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub b: f64,
    pub tau: f64,
    pub s_n: usize,
    #[serde(rename = "M_n")]
    pub m_n: usize,
    #[serde(rename = "L")]
    pub window_l: usize,
    #[serde(rename = "B")]
    pub boot_reps: usize,
    pub alpha: f64,
    pub kernel: Kernel,
    pub seed: u64,
}

impl TestConfig {
    /// ceil(n * tau): window half-width in time steps.
    pub fn half_window(&self, n: usize) -> usize {
        (n as f64 * self.tau).ceil() as usize
    }

    /// Joint feasibility against the sample size.
    pub fn validate(&self, n: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::ConfigInfeasible(msg));
        if !(self.b > 0.0 && self.b < 0.5) {
            return fail(format!("b = {} must lie in (0, 1/2)", self.b));
        }
        if !(self.tau > 0.0 && self.tau < 0.5) {
            return fail(format!("tau = {} must lie in (0, 1/2)", self.tau));
        }
        if self.s_n < 2 {
            return fail(format!("s_n = {} must be >= 2", self.s_n));
        }
        if self.m_n < 1 || self.m_n >= self.s_n {
            return fail(format!(
                "M_n = {} must satisfy 1 <= M_n < s_n = {}",
                self.m_n, self.s_n
            ));
        }
        let half = self.half_window(n);
        if 2 * half >= n {
            return fail(format!(
                "2*ceil(n*tau) = {} must be < n = {} (no window center exists)",
                2 * half,
                n
            ));
        }
        if self.s_n + 1 >= half {
            return fail(format!(
                "s_n + 1 = {} must be < ceil(n*tau) = {} (lag window must fit in kernel support)",
                self.s_n + 1,
                half
            ));
        }
        if self.window_l < 2 || self.window_l >= half {
            return fail(format!(
                "L = {} must satisfy 2 <= L < ceil(n*tau) = {}",
                self.window_l, half
            ));
        }
        if self.boot_reps < 100 {
            return fail(format!("B = {} must be >= 100", self.boot_reps));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        Ok(())
    }
}

/// Per-parameter record of which resolution path fired.
pub type Provenance = BTreeMap<String, Method>;

/// Outcome of the white-noise test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// The max-type statistic Q_n.
    pub q_n: f64,
    /// Q_n / sqrt(s_n), compared against the bootstrap critical value.
    pub q_scaled: f64,
    /// Bootstrap critical value at level alpha.
    pub r_boot: f64,
    pub reject: bool,
    pub alpha: f64,
    pub params: TestConfig,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> TestConfig {
        TestConfig {
            b: 0.2,
            tau: 0.15,
            s_n: 4,
            m_n: 1,
            window_l: 3,
            boot_reps: 500,
            alpha: 0.05,
            kernel: Kernel::Triangular,
            seed: 0,
        }
    }

    #[test]
    fn valid_config_passes() {
        base().validate(200).unwrap();
    }

    #[test]
    fn tau_too_large_fails() {
        let mut c = base();
        c.tau = 0.49;
        // 2*ceil(200*0.49) = 196 < 200, still feasible
        c.validate(200).unwrap();
        c.tau = 0.6;
        assert!(c.validate(200).is_err());
    }

    #[test]
    fn window_center_must_exist() {
        let mut c = base();
        c.tau = 0.45; // 2*ceil(9*0.45) = 10 >= 9: no window center fits
        assert!(c.validate(9).is_err());
    }

    #[test]
    fn lag_window_must_fit() {
        let mut c = base();
        c.s_n = 30; // s_n + 1 >= ceil(200*0.15) = 30
        c.m_n = 1;
        assert!(c.validate(200).is_err());
    }

    #[test]
    fn gap_below_lags() {
        let mut c = base();
        c.m_n = 4;
        assert!(c.validate(200).is_err());
    }

    #[test]
    fn result_serializes_with_renames() {
        let r = TestResult {
            q_n: 1.0,
            q_scaled: 0.5,
            r_boot: 0.4,
            reject: true,
            alpha: 0.05,
            params: base(),
            provenance: Provenance::new(),
            draws: None,
        };
        let j = serde_json::to_value(&r).unwrap();
        assert!(j["params"]["M_n"].is_number());
        assert!(j["params"]["L"].is_number());
        assert!(j["params"]["B"].is_number());
        assert!(j.get("draws").is_none());
    }
}
