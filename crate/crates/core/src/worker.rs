//! Worker types, their performance summaries and completion-time sampling.

use std::cmp::Ordering;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, NumericsError, Tolerance};

/// One-based index of a worker type inside a [`Population`].
pub type TypeId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("worker type field `{field}` must be {requirement}, got {value}")]
    InvalidParameter {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("population needs at least one worker type")]
    EmptyPopulation,
    #[error("unknown worker type {0}")]
    UnknownType(TypeId),
    #[error("expected {expected} counts, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// A class of workers sharing cost rate, speed and start-up time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerType {
    pub id: TypeId,
    /// Cost per unit time `c`.
    pub cost_rate: f64,
    /// Per-row rate `μ`.
    pub speed: f64,
    /// Per-row start-up time `a`.
    pub startup: f64,
    /// Headcount `N_m`.
    pub count: u64,
}

impl WorkerType {
    pub fn new(
        id: TypeId,
        cost_rate: f64,
        speed: f64,
        startup: f64,
        count: u64,
    ) -> Result<Self, ModelError> {
        let t = Self {
            id,
            cost_rate,
            speed,
            startup,
            count,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, value) in [
            ("cost_rate", self.cost_rate),
            ("speed", self.speed),
            ("startup", self.startup),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ModelError::InvalidParameter {
                    field,
                    requirement: "finite and strictly positive",
                    value,
                });
            }
        }
        Ok(())
    }

    /// Mean completion time for `load` rows: `ℓ(a + 1/μ)`.
    pub fn mean_time(&self, load: f64) -> f64 {
        load * (self.startup + 1.0 / self.speed)
    }

    /// CDF of the completion time for `load` rows at time `t`.
    pub fn time_cdf(&self, load: f64, t: f64) -> f64 {
        let shifted = t / load - self.startup;
        if shifted <= 0.0 {
            0.0
        } else {
            1.0 - (-self.speed * shifted).exp()
        }
    }
}

/// Performance summary derived from `(μ, a)` and the cost rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceProfile {
    /// Time per row `λ`.
    pub lambda: f64,
    /// Effective throughput `φ = μ/(1 + μλ)`.
    pub phi: f64,
    /// Cost-performance ratio `Ω = c/φ`.
    pub ratio: f64,
}

pub fn derive_profile(t: &WorkerType) -> Result<PerformanceProfile, ModelError> {
    t.validate()?;
    let lambda = numerics::solve_lambda(t.speed, t.startup, Tolerance::default())?;
    let phi = t.speed / (1.0 + t.speed * lambda);
    Ok(PerformanceProfile {
        lambda,
        phi,
        ratio: t.cost_rate / phi,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeEntry {
    pub worker: WorkerType,
    pub profile: PerformanceProfile,
}

/// Worker types sorted by nondecreasing cost-performance ratio, ids `1..=M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    entries: Vec<TypeEntry>,
    total: u64,
}

/// Derives every profile, sorts by `Ω` and relabels ids to the sorted order.
///
/// Ties in `Ω` are broken by cost rate, then speed, start-up and headcount, so
/// the result does not depend on the input order.
pub fn build_population(raw: Vec<WorkerType>) -> Result<Population, ModelError> {
    if raw.is_empty() {
        return Err(ModelError::EmptyPopulation);
    }
    let mut entries = raw
        .into_iter()
        .map(|worker| {
            let profile = derive_profile(&worker)?;
            Ok(TypeEntry { worker, profile })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    entries.sort_by(|x, y| {
        x.profile
            .ratio
            .total_cmp(&y.profile.ratio)
            .then(x.worker.cost_rate.total_cmp(&y.worker.cost_rate))
            .then(x.worker.speed.total_cmp(&y.worker.speed))
            .then(x.worker.startup.total_cmp(&y.worker.startup))
            .then(x.worker.count.cmp(&y.worker.count))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.worker.id = i + 1;
    }
    let total = entries.iter().map(|e| e.worker.count).sum();
    Ok(Population { entries, total })
}

impl Population {
    /// Number of types `M`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total headcount `N`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn entries(&self) -> &[TypeEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = TypeId> + '_ {
        self.entries.iter().map(|e| e.worker.id)
    }

    pub fn get(&self, id: TypeId) -> Result<&TypeEntry, ModelError> {
        id.checked_sub(1)
            .and_then(|i| self.entries.get(i))
            .ok_or(ModelError::UnknownType(id))
    }

    pub fn worker(&self, id: TypeId) -> Result<&WorkerType, ModelError> {
        self.get(id).map(|e| &e.worker)
    }

    pub fn profile(&self, id: TypeId) -> Result<&PerformanceProfile, ModelError> {
        self.get(id).map(|e| &e.profile)
    }

    pub fn counts(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.worker.count).collect()
    }

    /// Same types with new headcounts, listed in id order. Profiles do not
    /// depend on headcount, so the ordering is kept.
    pub fn with_counts(&self, counts: &[u64]) -> Result<Population, ModelError> {
        if counts.len() != self.entries.len() {
            return Err(ModelError::CountMismatch {
                expected: self.entries.len(),
                got: counts.len(),
            });
        }
        let mut entries = self.entries.clone();
        for (e, &c) in entries.iter_mut().zip(counts) {
            e.worker.count = c;
        }
        Ok(Population {
            entries,
            total: counts.iter().sum(),
        })
    }

    /// Sum of `N_m φ_m` over the given ids.
    pub fn throughput(&self, ids: &[TypeId]) -> Result<f64, ModelError> {
        ids.iter().try_fold(0.0, |acc, &id| {
            let e = self.get(id)?;
            Ok(acc + e.worker.count as f64 * e.profile.phi)
        })
    }

    /// True when every type shares the same `(μ, a)`, up to relative `1e-12`.
    pub fn is_performance_homogeneous(&self) -> bool {
        let first = &self.entries[0].worker;
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
        self.entries
            .iter()
            .all(|e| close(e.worker.speed, first.speed) && close(e.worker.startup, first.startup))
    }
}

/// Draws a completion time `ℓ(a + E/μ)` with `E` a unit-rate exponential.
pub fn sample_time<R: Rng + ?Sized>(t: &WorkerType, load: f64, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    load * (t.startup + e / t.speed)
}

/// Largest-remainder split of `total` proportionally to `weights`.
///
/// Equal remainders go to the lower index. All-zero weights split evenly.
pub fn apportion(total: u64, weights: &[f64]) -> Vec<u64> {
    if weights.is_empty() {
        return Vec::new();
    }
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| total as f64 * w / sum).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = quotas[i] - quotas[i].floor();
        let rj = quotas[j] - quotas[j].floor();
        rj.partial_cmp(&ri)
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

/// The ten-type heterogeneous population used by the figure sweeps, each
/// type with `count` workers. Already in nondecreasing `Ω` order.
pub fn reference_types(count: u64) -> Vec<WorkerType> {
    const PARAMS: [(f64, f64, f64); 10] = [
        (1.0, 50.0, 0.012),
        (7.0, 100.0, 0.024),
        (8.0, 200.0, 0.033),
        (3.0, 10.0, 0.031),
        (16.0, 400.0, 0.040),
        (5.0, 20.0, 0.081),
        (21.0, 800.0, 0.044),
        (9.0, 40.0, 0.123),
        (12.0, 80.0, 0.153),
        (20.0, 160.0, 0.172),
    ];
    PARAMS
        .iter()
        .enumerate()
        .map(|(i, &(cost_rate, speed, startup))| WorkerType {
            id: i + 1,
            cost_rate,
            speed,
            startup,
            count,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_relative_eq;

    fn wt(c: f64, mu: f64, a: f64, n: u64) -> WorkerType {
        WorkerType::new(0, c, mu, a, n).unwrap()
    }

    #[test]
    fn ratio_linear_in_cost() {
        let p1 = derive_profile(&wt(1.0, 30.0, 0.05, 1)).unwrap();
        let p2 = derive_profile(&wt(2.0, 30.0, 0.05, 1)).unwrap();
        assert_relative_eq!(p2.ratio / p1.ratio, 2.0, max_relative = 1e-14);
        assert_eq!(p1.phi, p2.phi);
    }

    #[test]
    fn large_speed_profile() {
        let t = wt(1.0, 1e6, 0.012, 1);
        let p = derive_profile(&t).unwrap();
        let g = |l: f64| (1e6 * (l - 0.012)).exp() - 1e6 * l - 1.0;
        // bisection oracle
        let (mut lo, mut hi) = (0.012, 0.012 + 1e-6);
        while g(hi) < 0.0 {
            hi = 0.012 + 2.0 * (hi - 0.012);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert_relative_eq!(p.lambda, lo, max_relative = 1e-9);
        // φ approaches 1/λ as μ grows
        assert_relative_eq!(p.phi, 1.0 / p.lambda, max_relative = 1e-3);
    }

    #[test]
    fn reference_population_is_already_sorted() {
        let raw = reference_types(100);
        let pop = build_population(raw.clone()).unwrap();
        for (e, r) in pop.entries().iter().zip(&raw) {
            assert_eq!(e.worker.cost_rate, r.cost_rate);
            assert_eq!(e.worker.speed, r.speed);
        }
        let ratios: Vec<f64> = pop.entries().iter().map(|e| e.profile.ratio).collect();
        assert!(ratios.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(pop.total(), 1000);
    }

    #[test]
    fn reversed_input_gives_same_population() {
        let mut raw = reference_types(100);
        let forward = build_population(raw.clone()).unwrap();
        raw.reverse();
        assert_eq!(build_population(raw).unwrap(), forward);
    }

    #[test]
    fn single_type_and_empty() {
        let pop = build_population(vec![wt(1.0, 2.0, 0.5, 3)]).unwrap();
        assert_eq!(pop.len(), 1);
        assert_eq!(pop.worker(1).unwrap().id, 1);
        assert!(matches!(
            build_population(vec![]),
            Err(ModelError::EmptyPopulation)
        ));
        assert!(WorkerType::new(1, -1.0, 1.0, 1.0, 1).is_err());
        assert!(pop.get(0).is_err());
        assert!(pop.get(2).is_err());
    }

    #[test]
    fn sample_support_and_moments() {
        let t = wt(1.0, 50.0, 0.012, 1);
        let load = 3.0;
        let mut rng = rng::stream(11, &[0]);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut below = 0usize;
        let mean = t.mean_time(load);
        for _ in 0..n {
            let x = sample_time(&t, load, &mut rng);
            assert!(x >= t.startup * load);
            sum += x;
            if x <= mean {
                below += 1;
            }
        }
        assert_relative_eq!(sum / n as f64, mean, max_relative = 5e-3);
        let ecdf = below as f64 / n as f64;
        assert_relative_eq!(ecdf, 1.0 - (-1.0f64).exp(), max_relative = 5e-3);
    }

    #[test]
    fn sample_passes_ks_test() {
        let t = wt(1.0, 20.0, 0.081, 1);
        let load = 2.5;
        let mut rng = rng::stream(3, &[1]);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| sample_time(&t, load, &mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = t.time_cdf(load, x);
                (f - i as f64 / n as f64)
                    .abs()
                    .max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // critical value for α = 0.001
        let critical = (-(0.001f64 / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt();
        assert!(d < critical, "KS statistic {d} ≥ {critical}");
    }

    #[test]
    fn phi_monotone_in_speed_and_startup() {
        for &a in &[0.01, 0.05, 0.2] {
            let mut prev = 0.0;
            for i in 1..40 {
                let phi = derive_profile(&wt(1.0, 5.0 * i as f64, a, 1)).unwrap().phi;
                assert!(phi >= prev);
                prev = phi;
            }
        }
        for &mu in &[10.0, 100.0] {
            let mut prev = f64::INFINITY;
            for i in 1..40 {
                let phi = derive_profile(&wt(1.0, mu, 0.005 * i as f64, 1))
                    .unwrap()
                    .phi;
                assert!(phi <= prev);
                prev = phi;
            }
        }
    }

    #[test]
    fn apportion_largest_remainder() {
        assert_eq!(apportion(1400, &[1.0; 10]), vec![140; 10]);
        assert_eq!(apportion(1403, &[1.0; 10]).iter().sum::<u64>(), 1403);
        assert_eq!(&apportion(1403, &[1.0; 10])[..4], &[141, 141, 141, 140]);
        assert_eq!(apportion(10, &[0.0, 0.0]), vec![5, 5]);
        assert_eq!(apportion(7, &[1.0, 2.0, 4.0]), vec![1, 2, 4]);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn population_permutation_invariant(
                params in proptest::collection::vec((0.1f64..20.0, 1.0f64..500.0, 0.001f64..0.2, 0u64..50), 1..8),
                seed in any::<u64>(),
            ) {
                let raw: Vec<WorkerType> = params.iter().enumerate()
                    .map(|(i, &(c, mu, a, n))| WorkerType::new(i + 1, c, mu, a, n).unwrap())
                    .collect();
                let mut shuffled = raw.clone();
                let k = shuffled.len();
                shuffled.rotate_left((seed as usize) % k);
                prop_assert_eq!(build_population(raw).unwrap(), build_population(shuffled).unwrap());
            }

            #[test]
            fn apportion_sums(total in 0u64..100_000, w in proptest::collection::vec(0.0f64..5.0, 1..12)) {
                prop_assert_eq!(apportion(total, &w).iter().sum::<u64>(), total);
            }
        }
    }
}
