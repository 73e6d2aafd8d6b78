//! Scalar special functions and root solvers.
//!
//! Everything here is a pure function of its arguments. The solvers use a
//! bracketed Newton iteration that falls back to bisection whenever the Newton
//! step leaves the current bracket, so they always converge once a sign change
//! is found.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by the scalar solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("{what}: no convergence after {iterations} iterations (best iterate {best})")]
    NoConvergence {
        what: &'static str,
        best: f64,
        iterations: usize,
    },
    #[error("{what}: argument {value} outside the domain")]
    Domain { what: &'static str, value: f64 },
}

/// Convergence controls shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_iter: 200,
        }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, max_iter: usize) -> Result<Self, NumericsError> {
        if !(abs_tol > 0.0) || !abs_tol.is_finite() {
            return Err(NumericsError::Domain {
                what: "tolerance abs_tol",
                value: abs_tol,
            });
        }
        if max_iter == 0 {
            return Err(NumericsError::Domain {
                what: "tolerance max_iter",
                value: 0.0,
            });
        }
        Ok(Self { abs_tol, max_iter })
    }
}

/// Finds a root of `f` inside `[lo, hi]` where `f(lo)` and `f(hi)` have
/// opposite signs. `f` returns the value and the derivative.
///
/// Newton steps are accepted only when they land strictly inside the bracket
/// and shrink the step faster than bisection would; otherwise the interval is
/// halved.
pub fn bracketed_newton<F>(
    what: &'static str,
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: Tolerance,
) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (f_lo, _) = f(lo);
    let (f_hi, _) = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(NumericsError::Domain {
            what,
            value: f64::NAN,
        });
    }
    // Orient so that f(lo) < 0 < f(hi).
    if f_lo > 0.0 {
        std::mem::swap(&mut lo, &mut hi);
    }

    let mut x = 0.5 * (lo + hi);
    let mut step_before_last = (hi - lo).abs();
    let mut last_step = step_before_last;
    let (mut fx, mut dfx) = f(x);

    for _ in 0..tol.max_iter {
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton_ok = dfx != 0.0 && {
            let candidate = x - fx / dfx;
            let inside = (candidate - lo) * (candidate - hi) < 0.0;
            inside && (2.0 * fx).abs() <= (step_before_last * dfx).abs()
        };
        step_before_last = last_step;
        let next = if newton_ok {
            x - fx / dfx
        } else {
            0.5 * (lo + hi)
        };
        last_step = (next - x).abs();
        x = next;
        if last_step <= tol.abs_tol * (1.0 + x.abs()) {
            return Ok(x);
        }
        (fx, dfx) = f(x);
        if (hi - lo).abs() <= tol.abs_tol * (1.0 + x.abs()) {
            return Ok(x);
        }
    }
    Err(NumericsError::NoConvergence {
        what,
        best: x,
        iterations: tol.max_iter,
    })
}

/// Time per row `λ > a` solving `e^{μ(λ−a)} = μλ + 1`.
///
/// The left side is strictly convex in `λ` and equals `1 < μa + 1` at
/// `λ = a`, so exactly one root lies above `a`. The upper end of the bracket
/// starts at `a + 1/μ` and doubles its distance from `a` until the residual
/// turns positive.
pub fn solve_lambda(mu: f64, a: f64, tol: Tolerance) -> Result<f64, NumericsError> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(NumericsError::Domain {
            what: "solve_lambda mu",
            value: mu,
        });
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(NumericsError::Domain {
            what: "solve_lambda a",
            value: a,
        });
    }
    let residual = |lambda: f64| {
        let e = (mu * (lambda - a)).exp();
        (e - mu * lambda - 1.0, mu * (e - 1.0))
    };
    let mut width = 1.0 / mu;
    let mut hi = a + width;
    let mut doublings = 0;
    while residual(hi).0 <= 0.0 {
        width *= 2.0;
        hi = a + width;
        doublings += 1;
        if doublings > 2048 || !hi.is_finite() {
            return Err(NumericsError::NoConvergence {
                what: "solve_lambda bracket",
                best: hi,
                iterations: doublings,
            });
        }
    }
    bracketed_newton("solve_lambda", residual, a, hi, tol)
}

/// Lower real branch `W₋₁(x)` for `x ∈ [−1/e, 0)`.
pub fn lambert_w_minus1(x: f64, tol: Tolerance) -> Result<f64, NumericsError> {
    let branch_point = -(-1.0f64).exp();
    if !(x < 0.0) || x < branch_point - 4.0 * f64::EPSILON || !x.is_finite() {
        return Err(NumericsError::Domain {
            what: "lambert_w_minus1",
            value: x,
        });
    }
    if x <= branch_point {
        return Ok(-1.0);
    }
    lambert_w_minus1_log((-x).ln(), tol)
}

/// `W₋₁` evaluated from `L = ln(−x)`, with `L ≤ −1`.
///
/// Works on `w + ln(−w) = L`, which is the log of `w·e^w = x`. This keeps
/// arguments such as `−e^{−800}` representable.
pub(crate) fn lambert_w_minus1_log(log_neg_x: f64, tol: Tolerance) -> Result<f64, NumericsError> {
    if !(log_neg_x <= -1.0) || log_neg_x.is_nan() {
        return Err(NumericsError::Domain {
            what: "lambert_w_minus1",
            value: -log_neg_x.exp(),
        });
    }
    let gap = log_neg_x + 1.0;
    if gap.abs() < 1e-300 {
        return Ok(-1.0);
    }
    // f(w) = w + ln(−w) − L is increasing on (−∞, −1] with f(−1) ≥ 0.
    let f = |w: f64| (w + (-w).ln() - log_neg_x, 1.0 + 1.0 / w);
    // Asymptotic start L − 2·ln(−L), padded, then pushed out until f < 0.
    let mut lo = log_neg_x - 2.0 * (-log_neg_x).ln() - 2.0;
    let mut pushes = 0;
    while f(lo).0 >= 0.0 {
        lo = 2.0 * lo - 1.0;
        pushes += 1;
        if pushes > 64 {
            return Err(NumericsError::NoConvergence {
                what: "lambert_w_minus1 bracket",
                best: lo,
                iterations: pushes,
            });
        }
    }
    bracketed_newton("lambert_w_minus1", f, lo, -1.0, tol)
}

/// `α = 1 + 1/W₋₁(−e^{−aμ−1})`, the optimal ratio of recovery threshold to
/// participant count for MDS coding with shifted-exponential runtimes.
pub fn mds_alpha(mu: f64, a: f64) -> Result<f64, NumericsError> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(NumericsError::Domain {
            what: "mds_alpha mu",
            value: mu,
        });
    }
    if !(a >= 0.0) || !a.is_finite() {
        return Err(NumericsError::Domain {
            what: "mds_alpha a",
            value: a,
        });
    }
    let w = lambert_w_minus1_log(-a * mu - 1.0, Tolerance::default())?;
    Ok((1.0 + 1.0 / w).clamp(0.0, 1.0))
}

/// Harmonic number `H_n = Σ_{i=1}^{n} 1/i`, with `H_0 = 0`.
pub fn harmonic(n: u64) -> f64 {
    // smallest terms first
    (1..=n).rev().map(|i| 1.0 / i as f64).sum()
}

/// `H_n − H_{n−k}` summed directly over the `k` trailing terms.
pub fn harmonic_tail(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    (n - k + 1..=n).rev().map(|i| 1.0 / i as f64).sum()
}
