//! Load assignment and expected overall runtime, analytic and Monte Carlo.
//!
//! Two regimes are modelled:
//!
//! * heterogeneous types with the asymptotically optimal loads
//!   `ℓ_m = r / (λ_m Σ_{m∈S} N_m φ_m)` and runtime `r / Σ_{m∈S} N_m φ_m`;
//! * homogeneous workers under an `(n, k)` MDS code, every worker carrying
//!   `r/k` rows, where the runtime is the `k`-th order statistic of `n`
//!   shifted exponentials.
//!
//! The Monte Carlo path keeps loads fractional. A round ends once the rows
//! returned in finish order add up to `r`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::harmonic_tail;
use crate::rng;
use crate::worker::{sample_time, ModelError, Population, TypeId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("targeted type set is empty")]
    EmptySelection,
    #[error("total rows must be positive, got {0}")]
    InvalidRows(f64),
    #[error("recovery threshold k={k} must satisfy 1 ≤ k ≤ n={n}")]
    InvalidThreshold { n: u64, k: u64 },
    #[error("assigned rows {assigned} cannot cover the {required} rows of the task")]
    InfeasibleAssignment { assigned: f64, required: f64 },
    #[error("targeted types have no workers")]
    NoWorkers,
    #[error("replicate count must be at least 1")]
    NoReplicates,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoadScheme {
    HeteroAsymptotic,
    MdsUniform { k: usize },
}

/// Rows per worker for every targeted type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadAssignment {
    /// `(type id, rows per worker)`, sorted by id.
    pub loads: Vec<(TypeId, f64)>,
    pub total_rows: f64,
    pub scheme: LoadScheme,
}

impl LoadAssignment {
    /// Every targeted type carries `r/k` rows.
    pub fn mds_uniform(targeted: &[TypeId], k: usize, total_rows: f64) -> Self {
        let mut ids = targeted.to_vec();
        ids.sort_unstable();
        ids.dedup();
        Self {
            loads: ids
                .into_iter()
                .map(|id| (id, total_rows / k as f64))
                .collect(),
            total_rows,
            scheme: LoadScheme::MdsUniform { k },
        }
    }

    pub fn load(&self, id: TypeId) -> Option<f64> {
        self.loads.iter().find(|(t, _)| *t == id).map(|&(_, l)| l)
    }

    pub fn targeted(&self) -> Vec<TypeId> {
        self.loads.iter().map(|&(id, _)| id).collect()
    }

    /// Total coded rows handed out, `Σ N_m ℓ_m`.
    pub fn coded_rows(&self, pop: &Population) -> Result<f64, ModelError> {
        self.loads.iter().try_fold(0.0, |acc, &(id, l)| {
            Ok(acc + pop.worker(id)?.count as f64 * l)
        })
    }

    /// Whole-row version of the assignment.
    ///
    /// MDS loads become `⌈r/k⌉` (the task is zero-padded to a multiple of
    /// `k`). Heterogeneous loads are floored and then raised one type at a
    /// time, largest fractional part first, until the coded total reaches
    /// `⌈Σ N_m ℓ_m⌉`; every type keeps at least one row.
    pub fn integerized(&self, pop: &Population) -> Result<LoadAssignment, ModelError> {
        let loads = match self.scheme {
            LoadScheme::MdsUniform { k } => {
                let per = (self.total_rows / k as f64 - 1e-9).ceil().max(1.0);
                self.loads.iter().map(|&(id, _)| (id, per)).collect()
            }
            LoadScheme::HeteroAsymptotic => {
                let target = (self.coded_rows(pop)? - 1e-9).ceil();
                let mut rows: Vec<(TypeId, f64, f64)> = self
                    .loads
                    .iter()
                    .map(|&(id, l)| (id, l.floor().max(1.0), l - l.floor()))
                    .collect();
                let mut order: Vec<usize> = (0..rows.len()).collect();
                order.sort_by(|&i, &j| rows[j].2.total_cmp(&rows[i].2).then(i.cmp(&j)));
                let mut covered = 0.0;
                for &(id, l, _) in &rows {
                    covered += pop.worker(id)?.count as f64 * l;
                }
                let counts = rows
                    .iter()
                    .map(|&(id, _, _)| Ok(pop.worker(id)?.count as f64))
                    .collect::<Result<Vec<_>, ModelError>>()?;
                if counts.iter().any(|&c| c > 0.0) {
                    for &i in order.iter().cycle() {
                        if covered >= target {
                            break;
                        }
                        rows[i].1 += 1.0;
                        covered += counts[i];
                    }
                }
                rows.into_iter().map(|(id, l, _)| (id, l)).collect()
            }
        };
        Ok(LoadAssignment {
            loads,
            total_rows: self.total_rows,
            scheme: self.scheme,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateMethod {
    Analytic,
    MonteCarlo,
}

/// `Pr_m^j`: probability that a given type-`m` worker finishes `j`-th among
/// all participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinishOrderProbs {
    pub participants: usize,
    pub by_type: Vec<(TypeId, Vec<f64>)>,
}

impl FinishOrderProbs {
    /// Probability for `rank` in `1..=participants`.
    pub fn get(&self, id: TypeId, rank: usize) -> Option<f64> {
        let (_, row) = self.by_type.iter().find(|(t, _)| *t == id)?;
        rank.checked_sub(1).and_then(|j| row.get(j)).copied()
    }

    pub fn row(&self, id: TypeId) -> Option<&[f64]> {
        self.by_type
            .iter()
            .find(|(t, _)| *t == id)
            .map(|(_, r)| r.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeEstimate {
    pub expected_runtime: f64,
    pub method: EstimateMethod,
    /// Standard error of the Monte Carlo mean.
    pub stderr: Option<f64>,
    /// `(r/k)(a + ln(n/(n−k))/μ)` next to the exact MDS value, when `k < n`.
    pub log_approx: Option<f64>,
    pub finish_order_probs: Option<FinishOrderProbs>,
    /// `(realized k, probability)` sorted by `k`.
    pub realized_k: Option<Vec<(usize, f64)>>,
}

impl RuntimeEstimate {
    fn analytic(expected_runtime: f64) -> Self {
        Self {
            expected_runtime,
            method: EstimateMethod::Analytic,
            stderr: None,
            log_approx: None,
            finish_order_probs: None,
            realized_k: None,
        }
    }
}

fn check_selection(
    pop: &Population,
    targeted: &[TypeId],
    r: f64,
) -> Result<Vec<TypeId>, RuntimeError> {
    if targeted.is_empty() {
        return Err(RuntimeError::EmptySelection);
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(RuntimeError::InvalidRows(r));
    }
    let mut ids = targeted.to_vec();
    ids.sort_unstable();
    ids.dedup();
    for &id in &ids {
        pop.get(id)?;
    }
    Ok(ids)
}

/// Asymptotically optimal loads `ℓ_m = r / (λ_m Σ_{m∈S} N_m φ_m)`.
pub fn assign_loads_hetero(
    pop: &Population,
    targeted: &[TypeId],
    r: f64,
) -> Result<LoadAssignment, RuntimeError> {
    let ids = check_selection(pop, targeted, r)?;
    let throughput = pop.throughput(&ids)?;
    if throughput <= 0.0 {
        return Err(RuntimeError::NoWorkers);
    }
    let loads = ids
        .iter()
        .map(|&id| Ok((id, r / (pop.profile(id)?.lambda * throughput))))
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(LoadAssignment {
        loads,
        total_rows: r,
        scheme: LoadScheme::HeteroAsymptotic,
    })
}

/// `E[T] = r / Σ_{m∈S} N_m φ_m`.
pub fn expected_runtime_hetero(
    pop: &Population,
    targeted: &[TypeId],
    r: f64,
) -> Result<RuntimeEstimate, RuntimeError> {
    let ids = check_selection(pop, targeted, r)?;
    let throughput = pop.throughput(&ids)?;
    if throughput <= 0.0 {
        return Err(RuntimeError::NoWorkers);
    }
    Ok(RuntimeEstimate::analytic(r / throughput))
}

/// Exact expected `k`-th order statistic of `n` workers each carrying `r/k`
/// rows: `(r/k)(a + (H_n − H_{n−k})/μ)`.
pub fn expected_runtime_mds(
    n: u64,
    k: u64,
    r: f64,
    mu: f64,
    a: f64,
) -> Result<RuntimeEstimate, RuntimeError> {
    if k < 1 || k > n {
        return Err(RuntimeError::InvalidThreshold { n, k });
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(RuntimeError::InvalidRows(r));
    }
    let load = r / k as f64;
    let mut est = RuntimeEstimate::analytic(load * (a + harmonic_tail(n, k) / mu));
    if k < n {
        est.log_approx = Some(load * (a + (n as f64 / (n - k) as f64).ln() / mu));
    }
    Ok(est)
}

/// One simulated worker slot.
#[derive(Clone, Copy)]
struct Slot {
    type_index: usize,
    load: f64,
}

struct McAccumulator {
    times: Vec<(u64, f64)>,
    rank_counts: Vec<Vec<u64>>,
    k_counts: Vec<u64>,
}

/// Simulates `reps` rounds. Every replicate uses the stream `(seed, rep)`;
/// per-replicate results are combined in replicate order, so the estimate is
/// identical however rayon schedules the work.
pub fn monte_carlo_runtime(
    pop: &Population,
    assignment: &LoadAssignment,
    reps: u64,
    seed: u64,
) -> Result<RuntimeEstimate, RuntimeError> {
    if reps == 0 {
        return Err(RuntimeError::NoReplicates);
    }
    let r = assignment.total_rows;
    if !(r > 0.0) || !r.is_finite() {
        return Err(RuntimeError::InvalidRows(r));
    }
    if assignment.loads.is_empty() {
        return Err(RuntimeError::EmptySelection);
    }
    let types = assignment
        .loads
        .iter()
        .map(|&(id, _)| pop.worker(id).cloned())
        .collect::<Result<Vec<_>, ModelError>>()?;
    let slots: Vec<Slot> = assignment
        .loads
        .iter()
        .enumerate()
        .flat_map(|(ti, &(_, load))| {
            (0..types[ti].count).map(move |_| Slot {
                type_index: ti,
                load,
            })
        })
        .collect();
    let assigned: f64 = slots.iter().map(|s| s.load).sum();
    let need = r * (1.0 - 1e-12);
    if assigned < need {
        return Err(RuntimeError::InfeasibleAssignment {
            assigned,
            required: r,
        });
    }
    let n = slots.len();
    let m = types.len();

    let acc = (0..reps)
        .into_par_iter()
        .fold(
            || {
                (
                    McAccumulator {
                        times: Vec::new(),
                        rank_counts: vec![vec![0; n]; m],
                        k_counts: vec![0; n + 1],
                    },
                    vec![(0.0f64, 0usize); n],
                )
            },
            |(mut acc, mut scratch), rep| {
                let mut rng = rng::stream(seed, &[rep]);
                for (i, (slot, cell)) in slots.iter().zip(scratch.iter_mut()).enumerate() {
                    *cell = (sample_time(&types[slot.type_index], slot.load, &mut rng), i);
                }
                scratch.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                let mut rows = 0.0;
                let mut stop = None;
                for (rank, &(t, i)) in scratch.iter().enumerate() {
                    acc.rank_counts[slots[i].type_index][rank] += 1;
                    if stop.is_none() {
                        rows += slots[i].load;
                        if rows >= need {
                            stop = Some((rank + 1, t));
                        }
                    }
                }
                let (k, t) = stop.expect("feasibility checked above");
                acc.k_counts[k] += 1;
                acc.times.push((rep, t));
                (acc, scratch)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(
            || McAccumulator {
                times: Vec::new(),
                rank_counts: vec![vec![0; n]; m],
                k_counts: vec![0; n + 1],
            },
            |mut a, b| {
                a.times.extend(b.times);
                for (ra, rb) in a.rank_counts.iter_mut().zip(&b.rank_counts) {
                    for (x, y) in ra.iter_mut().zip(rb) {
                        *x += y;
                    }
                }
                for (x, y) in a.k_counts.iter_mut().zip(&b.k_counts) {
                    *x += y;
                }
                a
            },
        );

    let mut times = acc.times;
    times.sort_unstable_by_key(|&(rep, _)| rep);
    let count = reps as f64;
    let mean = times.iter().map(|&(_, t)| t).sum::<f64>() / count;
    let stderr = if reps > 1 {
        let var = times.iter().map(|&(_, t)| (t - mean).powi(2)).sum::<f64>() / (count - 1.0);
        (var / count).sqrt()
    } else {
        0.0
    };
    let by_type = assignment
        .loads
        .iter()
        .zip(&acc.rank_counts)
        .zip(&types)
        .map(|((&(id, _), counts), t)| {
            let denom = count * t.count as f64;
            let row = counts
                .iter()
                .map(|&c| if denom > 0.0 { c as f64 / denom } else { 0.0 })
                .collect();
            (id, row)
        })
        .collect();
    let realized_k = acc
        .k_counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (k, c as f64 / count))
        .collect();

    Ok(RuntimeEstimate {
        expected_runtime: mean,
        method: EstimateMethod::MonteCarlo,
        stderr: Some(stderr),
        log_approx: None,
        finish_order_probs: Some(FinishOrderProbs {
            participants: n,
            by_type,
        }),
        realized_k: Some(realized_k),
    })
}
