//! The platform's offers: which types to target, what to pay them and
//! how to split the task.
//!
//! Three information scenarios are covered:
//!
//! * [`solve_complete`]: the platform knows every worker's cost and pays each
//!   targeted type exactly its expected cost;
//! * [`solve_incomplete`]: costs are private, so rewards are proportional to
//!   throughput `φ_m` at the boundary type's cost-performance ratio;
//! * [`solve_cost_only`]: identical performance, private costs, an `(n, k)`
//!   MDS code with `k` proportional to the number of participants.
//!
//! All selections are prefixes of the `Ω`-sorted population.
//! [`brute_force_complete`] enumerates every subset and serves as the
//! reference for the complete-information rule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, NumericsError};
use crate::runtime::{self, LoadAssignment, LoadScheme, RuntimeError};
use crate::worker::{ModelError, Population, TypeId};

/// Largest population the subset enumeration accepts.
pub const BRUTE_FORCE_MAX_TYPES: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanismError {
    #[error("invalid platform configuration: {0}")]
    InvalidConfig(String),
    #[error("subset enumeration is limited to {max} types, population has {m}")]
    TooManyTypes { m: usize, max: usize },
    #[error("cost-only scenario needs every type to share speed and start-up time")]
    NotHomogeneous,
    #[error("no targeted worker is available: {0}")]
    Infeasible(String),
    #[error("mechanism does not match the population: {0}")]
    Inconsistent(String),
    #[error("order probabilities sum to {0}, expected 1")]
    ProbabilityMass(f64),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// The platform's valuations `γ₁` (runtime) and `γ₂` (payment), and the task
/// size `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformConfig {
    pub gamma_time: f64,
    pub gamma_pay: f64,
    pub total_rows: f64,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        Self {
            gamma_time: 2000.0,
            gamma_pay: 1.0,
            total_rows: 1000.0,
        }
    }
}

impl PlatformConfig {
    pub fn new(gamma_time: f64, gamma_pay: f64, total_rows: f64) -> Result<Self, MechanismError> {
        let cfg = Self {
            gamma_time,
            gamma_pay,
            total_rows,
        };
        cfg.check(false)?;
        Ok(cfg)
    }

    /// Solvers need `γ₂ > 0`; cost evaluation also accepts `γ₂ = 0`.
    fn check(&self, allow_free_payment: bool) -> Result<(), MechanismError> {
        if !(self.gamma_time >= 0.0) || !self.gamma_time.is_finite() {
            return Err(MechanismError::InvalidConfig(format!(
                "gamma_time must be finite and ≥ 0, got {}",
                self.gamma_time
            )));
        }
        let pay_ok = if allow_free_payment {
            self.gamma_pay >= 0.0
        } else {
            self.gamma_pay > 0.0
        };
        if !pay_ok || !self.gamma_pay.is_finite() {
            return Err(MechanismError::InvalidConfig(format!(
                "gamma_pay must be finite and {}, got {}",
                if allow_free_payment { "≥ 0" } else { "> 0" },
                self.gamma_pay
            )));
        }
        if !(self.total_rows > 0.0) || !self.total_rows.is_finite() {
            return Err(MechanismError::InvalidConfig(format!(
                "total_rows must be finite and > 0, got {}",
                self.total_rows
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    CompleteHetero,
    IncompleteHetero,
    IncompleteHeteCostOnly,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::CompleteHetero => "complete",
            Scenario::IncompleteHetero => "incomplete",
            Scenario::IncompleteHeteCostOnly => "cost-only",
        }
    }

    /// Whether workers can misreport their type.
    pub fn has_private_costs(self) -> bool {
        !matches!(self, Scenario::CompleteHetero)
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the cost-only scenario evaluates `H_n − H_{n−k}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RuntimeMode {
    #[default]
    ExactHarmonic,
    /// `ln(n/(n−k))`; falls back to the exact sum when `k = n`.
    LogApprox,
}

/// A posted offer: targeted prefix, per-type expected rewards and loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub scenario: Scenario,
    /// Prefix `{1..n*}` of the `Ω`-sorted population.
    pub targeted: Vec<TypeId>,
    /// Boundary type `n*`.
    pub threshold_type: TypeId,
    /// Expected reward per round for every type, indexed by `id − 1`.
    pub rewards: Vec<f64>,
    pub assignment: LoadAssignment,
    /// MDS recovery threshold `k*` (cost-only scenario).
    pub recovery_threshold: Option<usize>,
    pub expected_runtime: f64,
    pub expected_cost: f64,
}

impl Mechanism {
    pub fn reward(&self, id: TypeId) -> Option<f64> {
        id.checked_sub(1).and_then(|i| self.rewards.get(i)).copied()
    }

    pub fn is_targeted(&self, id: TypeId) -> bool {
        self.targeted.contains(&id)
    }

    /// Number of participating workers `N^(S)`.
    pub fn participants(&self, pop: &Population) -> Result<u64, ModelError> {
        self.targeted
            .iter()
            .try_fold(0, |acc, &id| Ok(acc + pop.worker(id)?.count))
    }

    /// Structural checks against `pop`: reward table size, known ids, loads
    /// exactly on the targeted set.
    pub fn check_against(&self, pop: &Population) -> Result<(), MechanismError> {
        if self.rewards.len() != pop.len() {
            return Err(MechanismError::Inconsistent(format!(
                "{} rewards for {} types",
                self.rewards.len(),
                pop.len()
            )));
        }
        if self.targeted.is_empty() {
            return Err(MechanismError::Inconsistent("empty targeted set".into()));
        }
        for &id in &self.targeted {
            pop.get(id)?;
        }
        if !self.targeted.contains(&self.threshold_type) {
            return Err(MechanismError::Inconsistent(format!(
                "threshold type {} is not targeted",
                self.threshold_type
            )));
        }
        let mut targeted = self.targeted.clone();
        targeted.sort_unstable();
        if self.assignment.targeted() != targeted {
            return Err(MechanismError::Inconsistent(
                "loads are not assigned to exactly the targeted types".into(),
            ));
        }
        if let LoadScheme::MdsUniform { k } = self.assignment.scheme {
            if self.recovery_threshold != Some(k) {
                return Err(MechanismError::Inconsistent(
                    "recovery threshold differs from the MDS load scheme".into(),
                ));
            }
        }
        if self.rewards.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(MechanismError::Inconsistent(
                "rewards must be finite and ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

/// Prefix sums `Σ_{m≤n} N_m φ_m`, `Σ_{m≤n} N_m c_m` and `Σ_{m≤n} N_m`.
struct Prefix {
    throughput: Vec<f64>,
    cost: Vec<f64>,
    heads: Vec<u64>,
}

fn prefix_sums(pop: &Population) -> Prefix {
    let mut p = Prefix {
        throughput: Vec::with_capacity(pop.len()),
        cost: Vec::with_capacity(pop.len()),
        heads: Vec::with_capacity(pop.len()),
    };
    let (mut phi, mut cost, mut heads) = (0.0, 0.0, 0u64);
    for e in pop.entries() {
        let n = e.worker.count as f64;
        phi += n * e.profile.phi;
        cost += n * e.worker.cost_rate;
        heads += e.worker.count;
        p.throughput.push(phi);
        p.cost.push(cost);
        p.heads.push(heads);
    }
    p
}

/// Runtime of `mech` under its own scenario's model.
pub fn scenario_runtime(
    mech: &Mechanism,
    pop: &Population,
    mode: RuntimeMode,
) -> Result<f64, MechanismError> {
    let r = mech.assignment.total_rows;
    match mech.scenario {
        Scenario::CompleteHetero | Scenario::IncompleteHetero => {
            Ok(runtime::expected_runtime_hetero(pop, &mech.targeted, r)?.expected_runtime)
        }
        Scenario::IncompleteHeteCostOnly => {
            let k = mech.recovery_threshold.ok_or_else(|| {
                MechanismError::Inconsistent(
                    "cost-only mechanism without recovery threshold".into(),
                )
            })?;
            let n = mech.participants(pop)?;
            let w = pop.worker(mech.threshold_type)?;
            let est = runtime::expected_runtime_mds(n, k as u64, r, w.speed, w.startup)?;
            Ok(match mode {
                RuntimeMode::ExactHarmonic => est.expected_runtime,
                RuntimeMode::LogApprox => est.log_approx.unwrap_or(est.expected_runtime),
            })
        }
    }
}

/// Complete information: target the largest `n` with
/// `Ω_n ≤ (γ₁ + γ₂ Σ_{m≤n} N_m c_m) / (γ₂ Σ_{m≤n} N_m φ_m)` and pay each
/// targeted type exactly `c_m E[T]`.
pub fn solve_complete(pop: &Population, cfg: &PlatformConfig) -> Result<Mechanism, MechanismError> {
    cfg.check(false)?;
    let pre = prefix_sums(pop);
    let mut threshold = 1;
    for (i, e) in pop.entries().iter().enumerate() {
        // multiplied out so that an all-empty prefix does not divide by zero
        if e.profile.ratio * cfg.gamma_pay * pre.throughput[i]
            <= cfg.gamma_time + cfg.gamma_pay * pre.cost[i]
        {
            threshold = i + 1;
        }
    }
    let targeted: Vec<TypeId> = (1..=threshold).collect();
    let et = runtime::expected_runtime_hetero(pop, &targeted, cfg.total_rows)
        .map_err(no_workers)?
        .expected_runtime;
    let rewards = pop
        .entries()
        .iter()
        .map(|e| {
            if e.worker.id <= threshold {
                e.worker.cost_rate * et
            } else {
                0.0
            }
        })
        .collect();
    finish(
        Scenario::CompleteHetero,
        pop,
        cfg,
        targeted,
        rewards,
        runtime::assign_loads_hetero(pop, &(1..=threshold).collect::<Vec<_>>(), cfg.total_rows)?,
        None,
    )
}

/// Exhaustive search of `(γ₁ + γ₂ Σ_S N_m c_m) · r / Σ_S N_m φ_m` over every
/// nonempty subset. Exact ties go to the lexicographically smallest subset.
pub fn brute_force_complete(
    pop: &Population,
    cfg: &PlatformConfig,
) -> Result<(Vec<TypeId>, f64), MechanismError> {
    cfg.check(false)?;
    let m = pop.len();
    if m > BRUTE_FORCE_MAX_TYPES {
        return Err(MechanismError::TooManyTypes {
            m,
            max: BRUTE_FORCE_MAX_TYPES,
        });
    }
    let weights: Vec<(f64, f64)> = pop
        .entries()
        .iter()
        .map(|e| {
            let n = e.worker.count as f64;
            (n * e.worker.cost_rate, n * e.profile.phi)
        })
        .collect();
    let mut best: Option<(u32, f64)> = None;
    for mask in 1u32..(1u32 << m) {
        let (mut cost, mut phi) = (0.0, 0.0);
        for (i, &(c, p)) in weights.iter().enumerate() {
            if mask >> i & 1 == 1 {
                cost += c;
                phi += p;
            }
        }
        if phi <= 0.0 {
            continue;
        }
        let value = (cfg.gamma_time + cfg.gamma_pay * cost) * cfg.total_rows / phi;
        let better = match best {
            None => true,
            Some((best_mask, best_value)) => {
                value < best_value || (value == best_value && lex_less(mask, best_mask))
            }
        };
        if better {
            best = Some((mask, value));
        }
    }
    let (mask, value) =
        best.ok_or_else(|| MechanismError::Infeasible("every type has zero headcount".into()))?;
    Ok((
        (0..m)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| i + 1)
            .collect(),
        value,
    ))
}

/// Lexicographic order on the sorted id lists encoded by two masks.
fn lex_less(a: u32, b: u32) -> bool {
    let (mut x, mut y) = (a, b);
    loop {
        match (x == 0, y == 0) {
            (true, true) => return false,
            (true, false) => return true,
            (false, true) => return false,
            _ => {}
        }
        let (ix, iy) = (x.trailing_zeros(), y.trailing_zeros());
        if ix != iy {
            return ix < iy;
        }
        x &= x - 1;
        y &= y - 1;
    }
}

/// Incomplete information: `n* = argmin_n (γ₁ + γ₂ Ω_n Σ_{m≤n} N_m φ_m) /
/// Σ_{m≤n} N_m φ_m` (smallest `n` on ties), rewards
/// `p_m = φ_m · r c_{n*} / (φ_{n*} Σ_{m∈S} N_m φ_m)` for every type.
pub fn solve_incomplete(
    pop: &Population,
    cfg: &PlatformConfig,
) -> Result<Mechanism, MechanismError> {
    cfg.check(false)?;
    let pre = prefix_sums(pop);
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in pop.entries().iter().enumerate() {
        let phi = pre.throughput[i];
        if phi <= 0.0 {
            continue;
        }
        let value = (cfg.gamma_time + cfg.gamma_pay * e.profile.ratio * phi) / phi;
        if best.is_none_or(|(_, v)| value < v) {
            best = Some((i + 1, value));
        }
    }
    let (threshold, _) =
        best.ok_or_else(|| MechanismError::Infeasible("every type has zero headcount".into()))?;
    let targeted: Vec<TypeId> = (1..=threshold).collect();
    let boundary = pop.get(threshold)?;
    let throughput = pre.throughput[threshold - 1];
    let scale = cfg.total_rows * boundary.worker.cost_rate / (boundary.profile.phi * throughput);
    let rewards = pop
        .entries()
        .iter()
        .map(|e| e.profile.phi * scale)
        .collect();
    let assignment = runtime::assign_loads_hetero(pop, &targeted, cfg.total_rows)?;
    finish(
        Scenario::IncompleteHetero,
        pop,
        cfg,
        targeted,
        rewards,
        assignment,
        None,
    )
}

/// Identical `(μ, a)`, private costs. Targets
/// `n* = argmin_n (γ₁ + γ₂ c_n Σ_{m≤n} N_m) / Σ_{m≤n} N_m`, uses an MDS code
/// with `k* ≈ α N^(S)` and pays every type the same reward, which covers the
/// boundary type's expected cost.
///
/// `α N^(S)` is rounded to whichever of its floor and ceiling (clamped to
/// `[1, N^(S)]`) gives the smaller exact expected runtime.
pub fn solve_cost_only(
    pop: &Population,
    cfg: &PlatformConfig,
) -> Result<Mechanism, MechanismError> {
    cfg.check(false)?;
    if !pop.is_performance_homogeneous() {
        return Err(MechanismError::NotHomogeneous);
    }
    let pre = prefix_sums(pop);
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in pop.entries().iter().enumerate() {
        let heads = pre.heads[i] as f64;
        if heads <= 0.0 {
            continue;
        }
        let value = (cfg.gamma_time + cfg.gamma_pay * e.worker.cost_rate * heads) / heads;
        if best.is_none_or(|(_, v)| value < v) {
            best = Some((i + 1, value));
        }
    }
    let (threshold, _) =
        best.ok_or_else(|| MechanismError::Infeasible("every type has zero headcount".into()))?;
    let boundary = pop.worker(threshold)?.clone();
    let participants = pre.heads[threshold - 1];
    let alpha = numerics::mds_alpha(boundary.speed, boundary.startup)?;
    let k = recovery_threshold(
        alpha,
        participants,
        cfg.total_rows,
        boundary.speed,
        boundary.startup,
    )?;
    let et = runtime::expected_runtime_mds(
        participants,
        k,
        cfg.total_rows,
        boundary.speed,
        boundary.startup,
    )?
    .expected_runtime;
    let reward = boundary.cost_rate * et;
    let targeted: Vec<TypeId> = (1..=threshold).collect();
    let assignment = LoadAssignment::mds_uniform(&targeted, k as usize, cfg.total_rows);
    finish(
        Scenario::IncompleteHeteCostOnly,
        pop,
        cfg,
        targeted,
        vec![reward; pop.len()],
        assignment,
        Some(k as usize),
    )
}

/// Integer `k` next to `α n` with the smaller exact expected runtime.
pub fn recovery_threshold(
    alpha: f64,
    n: u64,
    r: f64,
    mu: f64,
    a: f64,
) -> Result<u64, MechanismError> {
    if n == 0 {
        return Err(MechanismError::Infeasible("no participants".into()));
    }
    let target = alpha * n as f64;
    let lo = (target.floor() as u64).clamp(1, n);
    let hi = (target.ceil() as u64).clamp(1, n);
    if lo == hi {
        return Ok(lo);
    }
    let t_lo = runtime::expected_runtime_mds(n, lo, r, mu, a)?.expected_runtime;
    let t_hi = runtime::expected_runtime_mds(n, hi, r, mu, a)?.expected_runtime;
    Ok(if t_hi < t_lo { hi } else { lo })
}

fn no_workers(e: RuntimeError) -> MechanismError {
    match e {
        RuntimeError::NoWorkers => {
            MechanismError::Infeasible("targeted types have no workers".into())
        }
        other => other.into(),
    }
}

fn finish(
    scenario: Scenario,
    pop: &Population,
    cfg: &PlatformConfig,
    targeted: Vec<TypeId>,
    rewards: Vec<f64>,
    assignment: LoadAssignment,
    recovery_threshold: Option<usize>,
) -> Result<Mechanism, MechanismError> {
    let threshold_type = *targeted.last().expect("targeted set is never empty");
    let mut mech = Mechanism {
        scenario,
        targeted,
        threshold_type,
        rewards,
        assignment,
        recovery_threshold,
        expected_runtime: 0.0,
        expected_cost: 0.0,
    };
    mech.expected_runtime = scenario_runtime(&mech, pop, RuntimeMode::ExactHarmonic)?;
    mech.expected_cost = platform_cost(&mech, pop, cfg)?;
    Ok(mech)
}

/// `γ₁ E[T] + γ₂ Σ_{m∈S} N_m p_m`, recomputed from the population with the
/// runtime model of the mechanism's scenario (exact harmonic sums for MDS).
pub fn platform_cost(
    mech: &Mechanism,
    pop: &Population,
    cfg: &PlatformConfig,
) -> Result<f64, MechanismError> {
    platform_cost_with_mode(mech, pop, cfg, RuntimeMode::ExactHarmonic)
}

pub fn platform_cost_with_mode(
    mech: &Mechanism,
    pop: &Population,
    cfg: &PlatformConfig,
    mode: RuntimeMode,
) -> Result<f64, MechanismError> {
    cfg.check(true)?;
    mech.check_against(pop)?;
    let r = mech.assignment.total_rows;
    if (r - cfg.total_rows).abs() > 1e-12 * cfg.total_rows {
        return Err(MechanismError::Inconsistent(format!(
            "mechanism splits {r} rows, configuration has {}",
            cfg.total_rows
        )));
    }
    let et = scenario_runtime(mech, pop, mode).map_err(|e| match e {
        MechanismError::Runtime(inner) => no_workers(inner),
        other => other,
    })?;
    let payments = mech.targeted.iter().try_fold(0.0, |acc, &id| {
        Ok::<_, MechanismError>(acc + pop.worker(id)?.count as f64 * mech.rewards[id - 1])
    })?;
    Ok(cfg.gamma_time * et + cfg.gamma_pay * payments)
}

/// Per-rank rewards `p_m^j` whose expectation under `order_probs` is `p_m`.
/// Always the constant schedule.
pub fn order_reward_schedule(reward: f64, order_probs: &[f64]) -> Result<Vec<f64>, MechanismError> {
    let mass: f64 = order_probs.iter().sum();
    if (mass - 1.0).abs() > 1e-9 || order_probs.iter().any(|p| *p < 0.0) {
        return Err(MechanismError::ProbabilityMass(mass));
    }
    Ok(vec![reward; order_probs.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worker::{build_population, reference_types, WorkerType};
    use approx::assert_relative_eq;

    fn table(n_per_type: u64) -> Population {
        build_population(reference_types(n_per_type)).unwrap()
    }

    #[test]
    fn single_type_both_scenarios_agree() {
        let pop = build_population(vec![WorkerType::new(1, 3.0, 40.0, 0.02, 25).unwrap()]).unwrap();
        let cfg = PlatformConfig::default();
        let c = solve_complete(&pop, &cfg).unwrap();
        let i = solve_incomplete(&pop, &cfg).unwrap();
        assert_eq!(c.targeted, vec![1]);
        assert_eq!(i.targeted, vec![1]);
        assert_relative_eq!(c.rewards[0], i.rewards[0], max_relative = 1e-12);
        assert_relative_eq!(c.expected_cost, i.expected_cost, max_relative = 1e-12);
        assert_relative_eq!(c.rewards[0], 3.0 * c.expected_runtime, max_relative = 1e-14);
    }

    #[test]
    fn reference_population_at_1400() {
        let pop = table(140);
        let cfg = PlatformConfig::default();
        assert_eq!(solve_complete(&pop, &cfg).unwrap().targeted.len(), 3);
    }

    #[test]
    fn dominant_type_wins_brute_force() {
        let pop = build_population(vec![
            WorkerType::new(1, 0.1, 100.0, 0.01, 10_000).unwrap(),
            WorkerType::new(2, 5.0, 20.0, 0.05, 3).unwrap(),
            WorkerType::new(3, 9.0, 10.0, 0.09, 2).unwrap(),
        ])
        .unwrap();
        let cfg = PlatformConfig::new(1.0, 1.0, 100.0).unwrap();
        // hand evaluation of all seven subsets
        let e = pop.entries();
        let mut costs = Vec::new();
        for mask in 1..8u32 {
            let (mut c, mut p) = (0.0, 0.0);
            for (i, t) in e.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    c += t.worker.count as f64 * t.worker.cost_rate;
                    p += t.worker.count as f64 * t.profile.phi;
                }
            }
            costs.push((mask, (1.0 + c) * 100.0 / p));
        }
        let min = costs
            .iter()
            .cloned()
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        assert_eq!(min.0, 1);
        let (set, cost) = brute_force_complete(&pop, &cfg).unwrap();
        assert_eq!(set, vec![1]);
        assert_relative_eq!(cost, min.1, max_relative = 1e-14);
        assert_eq!(solve_complete(&pop, &cfg).unwrap().targeted, vec![1]);
    }

    #[test]
    fn brute_force_guard() {
        let types: Vec<_> = (0..21)
            .map(|i| WorkerType::new(i, 1.0 + i as f64, 10.0, 0.01, 1).unwrap())
            .collect();
        let pop = build_population(types).unwrap();
        assert!(matches!(
            brute_force_complete(&pop, &PlatformConfig::default()),
            Err(MechanismError::TooManyTypes { .. })
        ));
    }

    #[test]
    fn lexicographic_masks() {
        assert!(lex_less(0b011, 0b111)); // {1,2} < {1,2,3}
        assert!(lex_less(0b101, 0b110)); // {1,3} < {2,3}
        assert!(!lex_less(0b110, 0b101));
        assert!(!lex_less(0b1, 0b1));
    }

    #[test]
    fn complete_cost_matches_selection_objective() {
        let pop = table(100);
        let cfg = PlatformConfig::default();
        let mech = solve_complete(&pop, &cfg).unwrap();
        let (c, p): (f64, f64) = mech.targeted.iter().fold((0.0, 0.0), |(c, p), &id| {
            let e = pop.get(id).unwrap();
            (c + 100.0 * e.worker.cost_rate, p + 100.0 * e.profile.phi)
        });
        let objective = (2000.0 + c) * 1000.0 / p;
        assert_relative_eq!(mech.expected_cost, objective, max_relative = 1e-12);
        assert_relative_eq!(
            platform_cost(&mech, &pop, &cfg).unwrap(),
            mech.expected_cost,
            max_relative = 1e-14
        );
    }

    #[test]
    fn free_payment_cost_is_time_only() {
        let pop = table(100);
        let mech = solve_incomplete(&pop, &PlatformConfig::default()).unwrap();
        let free = PlatformConfig {
            gamma_pay: 0.0,
            ..PlatformConfig::default()
        };
        assert_relative_eq!(
            platform_cost(&mech, &pop, &free).unwrap(),
            2000.0 * mech.expected_runtime,
            max_relative = 1e-14
        );
        assert!(solve_incomplete(&pop, &free).is_err());
    }

    #[test]
    fn incomplete_rewards_proportional_to_phi() {
        let pop = table(140);
        let mech = solve_incomplete(&pop, &PlatformConfig::default()).unwrap();
        let base = mech.rewards[0] / pop.profile(1).unwrap().phi;
        for e in pop.entries() {
            assert_relative_eq!(
                mech.rewards[e.worker.id - 1] / e.profile.phi,
                base,
                max_relative = 1e-12
            );
        }
        // boundary type is paid exactly its expected cost
        let b = pop.worker(mech.threshold_type).unwrap();
        assert_relative_eq!(
            mech.rewards[mech.threshold_type - 1],
            b.cost_rate * mech.expected_runtime,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cost_only_equal_costs_targets_everyone() {
        let types: Vec<_> = (0..4)
            .map(|i| WorkerType::new(i, 2.0, 50.0, 0.012, 10 + i as u64).unwrap())
            .collect();
        let pop = build_population(types).unwrap();
        let mech = solve_cost_only(&pop, &PlatformConfig::default()).unwrap();
        assert_eq!(mech.threshold_type, 4);
        let k = mech.recovery_threshold.unwrap();
        assert!(k >= 1 && k as u64 <= pop.total());
        assert!(mech.rewards.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn cost_only_rejects_heterogeneous_performance() {
        assert!(matches!(
            solve_cost_only(&table(10), &PlatformConfig::default()),
            Err(MechanismError::NotHomogeneous)
        ));
    }

    #[test]
    fn cost_only_two_type_instance() {
        let pop = build_population(vec![
            WorkerType::new(1, 1.0, 50.0, 0.012, 50).unwrap(),
            WorkerType::new(2, 10.0, 50.0, 0.012, 50).unwrap(),
        ])
        .unwrap();
        let cfg = PlatformConfig::default();
        let mech = solve_cost_only(&pop, &cfg).unwrap();
        // direct evaluation of both candidates
        let first = (2000.0 + 1.0 * 50.0) / 50.0;
        let second = (2000.0 + 10.0 * 100.0) / 100.0;
        assert_eq!(mech.threshold_type, if first <= second { 1 } else { 2 });
        let n = mech.participants(&pop).unwrap();
        // grid search of the cost over every integer k
        let c = pop.worker(mech.threshold_type).unwrap().cost_rate;
        let grid_best = (1..=n)
            .map(|k| {
                let et = runtime::expected_runtime_mds(n, k, 1000.0, 50.0, 0.012)
                    .unwrap()
                    .expected_runtime;
                (k, (2000.0 + c * n as f64) * et)
            })
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        assert_eq!(mech.recovery_threshold.unwrap() as u64, grid_best.0);
        assert_relative_eq!(mech.expected_cost, grid_best.1, max_relative = 1e-12);
    }

    #[test]
    fn recovery_threshold_clamps_at_branch_point() {
        assert_eq!(recovery_threshold(0.0, 30, 100.0, 1.0, 0.0).unwrap(), 1);
        assert_eq!(recovery_threshold(1.0, 30, 100.0, 1.0, 5.0).unwrap(), 30);
    }

    #[test]
    fn order_schedule() {
        assert_eq!(
            order_reward_schedule(5.0, &[0.2, 0.3, 0.5]).unwrap(),
            vec![5.0; 3]
        );
        assert_eq!(order_reward_schedule(5.0, &[1.0]).unwrap(), vec![5.0]);
        let probs = [0.1, 0.6, 0.3];
        let sched = order_reward_schedule(2.5, &probs).unwrap();
        let expectation: f64 = sched.iter().zip(&probs).map(|(p, q)| p * q).sum();
        assert_relative_eq!(expectation, 2.5, max_relative = 1e-15);
        assert!(order_reward_schedule(5.0, &[0.2, 0.2]).is_err());
    }

    #[test]
    fn inconsistent_mechanism_rejected() {
        let pop = table(10);
        let cfg = PlatformConfig::default();
        let mut mech = solve_incomplete(&pop, &cfg).unwrap();
        mech.rewards.pop();
        assert!(matches!(
            platform_cost(&mech, &pop, &cfg),
            Err(MechanismError::Inconsistent(_))
        ));
        let other = PlatformConfig {
            total_rows: 10.0,
            ..cfg
        };
        let mech = solve_incomplete(&pop, &cfg).unwrap();
        assert!(platform_cost(&mech, &pop, &other).is_err());
    }

    #[test]
    fn zero_headcount_prefix_is_skipped() {
        let pop = table(10)
            .with_counts(&[0, 0, 5, 5, 5, 5, 5, 5, 5, 5])
            .unwrap();
        let cfg = PlatformConfig::default();
        let inc = solve_incomplete(&pop, &cfg).unwrap();
        assert!(inc.threshold_type >= 3);
        let com = solve_complete(&pop, &cfg).unwrap();
        assert!(com.expected_cost.is_finite());
        let empty = table(10).with_counts(&[0; 10]).unwrap();
        assert!(matches!(
            solve_incomplete(&empty, &cfg),
            Err(MechanismError::Infeasible(_))
        ));
        assert!(matches!(
            solve_complete(&empty, &cfg),
            Err(MechanismError::Infeasible(_))
        ));
    }
}
