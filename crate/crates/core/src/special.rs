//! Special functions and the exact chi-square moment identities the
//! covariance engines are built from.
//!
//! If `s_p` is a pooled standard deviation with `v` degrees of freedom drawn
//! from normal groups with common standard deviation `sigma`, then
//! `v s_p^2 / sigma^2` is chi-square with `v` degrees of freedom and:
//!
//! ```text
//! E(1/s_p)   = 1 / (sigma J(v))
//! E(1/s_p^2) = v / ((v - 2) sigma^2)
//! Var(1/s_p) = (v / (v - 2) - 1 / J(v)^2) / sigma^2
//! ```
//!
//! where `J(v) = Gamma(v/2) / (sqrt(v/2) Gamma((v-1)/2))` is the small-sample
//! bias correction of Hedges' g.

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Shift threshold for the asymptotic series.
const STIRLING_MIN: f64 = 10.0;

/// `B_2k / (2k (2k - 1))` for k = 1..=8.
const STIRLING_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// Pooled degrees of freedom: total subjects minus the number of groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dof(u32);

impl Dof {
    pub fn new(v: u32) -> Result<Self> {
        if v < 2 {
            return Err(domain("degrees of freedom", format!("v must be >= 2, got {v}")));
        }
        Ok(Self(v))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }

    /// Fails with a singularity error unless `v >= 3`.
    pub(crate) fn require_finite_inverse_variance(self, op: &'static str) -> Result<()> {
        if self.0 < 3 {
            Err(Error::Singularity { op, v: self.0 })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for Dof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl FromStr for Dof {
    type Err = Error;

    /// Only integer literals are accepted; `"10.0"` or `"9.5"` are rejected.
    fn from_str(s: &str) -> Result<Self> {
        let v: u32 = s
            .trim()
            .parse()
            .map_err(|_| domain("degrees of freedom", format!("'{s}' is not a positive integer")))?;
        Self::new(v)
    }
}

/// Natural log of the gamma function for `x > 0`.
///
/// Arguments below 10 are shifted upward with the recurrence
/// `Gamma(x + 1) = x Gamma(x)`; the shifted value is evaluated with the
/// Stirling series truncated after eight correction terms.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("ln_gamma", format!("x must be finite and > 0, got {x}")));
    }
    if x >= STIRLING_MIN {
        return Ok(stirling(x));
    }
    let mut y = x;
    let mut prod = 1.0;
    while y < STIRLING_MIN {
        prod *= y;
        y += 1.0;
    }
    Ok(stirling(y) - prod.ln())
}

fn stirling(x: f64) -> f64 {
    (x - 0.5).mul_add(x.ln(), -x) + (HALF_LN_2PI + stirling_series(x))
}

fn stirling_series(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    STIRLING_COEFFS
        .iter()
        .rev()
        .fold(0.0_f64, |acc, &c| acc.mul_add(inv2, c))
        * inv
}

/// `ln Gamma(a) - ln Gamma(a - 1/2) - ln(a) / 2`, the log of `J(2a)`.
fn ln_half_step_ratio(a: f64) -> f64 {
    let b = a - 0.5;
    if b < STIRLING_MIN {
        let ln_num = ln_gamma(a).expect("a > 0");
        let ln_den = ln_gamma(b).expect("b > 0");
        return ln_num - ln_den - 0.5 * a.ln();
    }
    // Differencing the two Stirling expansions by hand keeps the large
    // `x ln x` terms from cancelling: what remains is
    // (a - 1) ln(a / b) - 1/2 + S(a) - S(b).
    (a - 1.0).mul_add((0.5 / b).ln_1p(), -0.5) + (stirling_series(a) - stirling_series(b))
}

/// Hedges' small-sample bias correction `J(v)`, in `(0, 1)`.
///
/// Evaluated as a log-gamma difference; a direct gamma ratio overflows once
/// `v` exceeds roughly 340.
pub fn bias_correction(v: Dof) -> f64 {
    // v >= 2 keeps both gamma arguments positive.
    ln_half_step_ratio(v.as_f64() / 2.0).exp()
}

fn check_sigma(op: &'static str, sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(domain(op, format!("sigma must be finite and > 0, got {sigma}")))
    }
}

/// `E(1/s_p) = 1 / (sigma J(v))`.
pub fn inv_sd_mean(v: Dof, sigma: f64) -> Result<f64> {
    check_sigma("inv_sd_mean", sigma)?;
    Ok(1.0 / (sigma * bias_correction(v)))
}

/// `E(1/s_p^2) = v / ((v - 2) sigma^2)`; infinite for `v <= 2`.
pub fn inv_var_mean(v: Dof, sigma: f64) -> Result<f64> {
    v.require_finite_inverse_variance("inv_var_mean")?;
    check_sigma("inv_var_mean", sigma)?;
    let v = v.as_f64();
    Ok(v / ((v - 2.0) * sigma * sigma))
}

/// `Var(1/s_p) = (v/(v-2) - 1/J(v)^2) / sigma^2`.
pub fn inv_sd_variance(v: Dof, sigma: f64) -> Result<f64> {
    v.require_finite_inverse_variance("inv_sd_variance")?;
    check_sigma("inv_sd_variance", sigma)?;
    let j = bias_correction(v);
    let vf = v.as_f64();
    Ok((vf / (vf - 2.0) - 1.0 / (j * j)) / (sigma * sigma))
}
