//! Smoothing kernels used for the mean surface and the covariance statistics.
//!
//! Both kernels are symmetric, supported on (-1, 1) and integrate to one.
//! The triangular kernel additionally satisfies K(0) = 1, which is the
//! default for the test statistic.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Triangular,
    Epanechnikov,
}

impl Kernel {
    /// K(x); zero outside (-1, 1).
    pub fn eval(self, x: f64) -> f64 {
        let a = x.abs();
        if a >= 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Triangular => 1.0 - a,
            Kernel::Epanechnikov => 0.75 * (1.0 - x * x),
        }
    }

    /// K_h(x) = K(x / h).
    pub fn eval_scaled(self, x: f64, h: f64) -> f64 {
        self.eval(x / h)
    }

    /// K(0).
    pub fn at_zero(self) -> f64 {
        self.eval(0.0)
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Triangular => write!(f, "triangular"),
            Kernel::Epanechnikov => write!(f, "epanechnikov"),
        }
    }
}

impl FromStr for Kernel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "triangular" => Ok(Kernel::Triangular),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            other => Err(format!("unknown kernel `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn triangular_values() {
        assert_eq!(Kernel::Triangular.eval(0.0), 1.0);
        assert_eq!(Kernel::Triangular.eval(0.5), 0.5);
        assert_eq!(Kernel::Triangular.eval(-0.5), 0.5);
        assert_eq!(Kernel::Triangular.eval(1.0), 0.0);
        assert_eq!(Kernel::Triangular.eval(-1.3), 0.0);
    }

    #[test]
    fn symmetry() {
        for k in [Kernel::Triangular, Kernel::Epanechnikov] {
            for i in 0..200 {
                let x = -1.5 + 3.0 * i as f64 / 199.0;
                assert_eq!(k.eval(x), k.eval(-x));
            }
        }
    }

    // midpoint quadrature over (-1,1) with 10^4 points
    fn integral(k: Kernel) -> f64 {
        let m = 10_000;
        let h = 2.0 / m as f64;
        (0..m).map(|i| k.eval(-1.0 + (i as f64 + 0.5) * h) * h).sum()
    }

    #[test]
    fn integrates_to_one() {
        assert_abs_diff_eq!(integral(Kernel::Triangular), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(integral(Kernel::Epanechnikov), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn parse_roundtrip() {
        assert_eq!("triangular".parse::<Kernel>().unwrap(), Kernel::Triangular);
        assert_eq!(
            "epanechnikov".parse::<Kernel>().unwrap(),
            Kernel::Epanechnikov
        );
        assert!("gauss".parse::<Kernel>().is_err());
    }
}
