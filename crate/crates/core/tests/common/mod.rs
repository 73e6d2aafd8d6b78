#![allow(dead_code)]

use coded_incentives::rng::{self, SimRng};
use coded_incentives::worker::{build_population, Population, WorkerType};
use rand::Rng;

pub fn log_uniform(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Heterogeneous population with `m` types drawn around the reference ranges.
pub fn random_population(rng: &mut SimRng, m: usize) -> Population {
    let types = (0..m)
        .map(|i| {
            WorkerType::new(
                i + 1,
                log_uniform(rng, 0.5, 25.0),
                log_uniform(rng, 5.0, 1000.0),
                log_uniform(rng, 0.005, 0.2),
                rng.random_range(1..=500),
            )
            .unwrap()
        })
        .collect();
    build_population(types).unwrap()
}

/// Types sharing `(μ, a)` with random costs and headcounts summing to at most `max_total`.
pub fn random_homogeneous(rng: &mut SimRng, m: usize, max_total: u64) -> Population {
    let mu = log_uniform(rng, 5.0, 1000.0);
    let a = log_uniform(rng, 0.005, 0.2);
    let per = (max_total / m as u64).max(1);
    let types = (0..m)
        .map(|i| {
            WorkerType::new(
                i + 1,
                log_uniform(rng, 0.5, 25.0),
                mu,
                a,
                rng.random_range(1..=per),
            )
            .unwrap()
        })
        .collect();
    build_population(types).unwrap()
}

pub fn stream(key: u64) -> SimRng {
    rng::stream(0xacce_97a7, &[key])
}

/// Harmonic tail `Σ_{j=n−k+1}^{n} 1/j`, summed directly.
pub fn harmonic_tail(n: u64, k: u64) -> f64 {
    ((n - k + 1)..=n).map(|j| 1.0 / j as f64).sum()
}

/// `λ` by plain bisection on `e^{μ(λ−a)} − μλ − 1` over a bracket found by doubling.
pub fn lambda_bisection(mu: f64, a: f64) -> f64 {
    let g = |l: f64| (mu * (l - a)).exp() - mu * l - 1.0;
    let (mut lo, mut hi) = (a, a + 1.0 / mu);
    while g(hi) <= 0.0 {
        hi = a + 2.0 * (hi - a);
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `W₋₁(x)` by bisection on `w + ln(−w) = ln(−x)` over `w ≤ −1`.
pub fn lambert_bisection(x: f64) -> f64 {
    let target = (-x).ln();
    let g = |w: f64| w + (-w).ln() - target;
    let mut lo = -1.0;
    let mut step = 1.0;
    while g(lo) > 0.0 {
        lo -= step;
        step *= 2.0;
    }
    let mut hi = -1.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
