//! Encoding a matrix-vector product `A x` across workers and recovering it
//! from the first results to arrive.
//!
//! An `(n, k)` MDS code splits `A` row-wise into `k` blocks and hands each
//! worker one linear combination given by a row of an `n × k` generator; any
//! `k` results determine `A x`. The heterogeneous scheme hands out individual
//! coded rows instead (Gaussian generator) and decodes by least squares once
//! the returned rows span the row space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{best_response, GameError, WorkerDecision};
use crate::mechanism::{Mechanism, MechanismError, PlatformConfig};
use crate::rng::{self, SimRng};
use crate::runtime::{LoadScheme, RuntimeError};
use crate::worker::{sample_time, ModelError, Population, TypeId};

/// Decoding refuses generator submatrices with a larger 2-norm condition number.
pub const MAX_CONDITION: f64 = 1e13;

/// Largest code length for which simulations use a Vandermonde generator.
pub const VANDERMONDE_MAX_N: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodedError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid code: need 1 ≤ k={k} ≤ n={n}")]
    InvalidCode { n: usize, k: usize },
    #[error("generator submatrix is ill-conditioned (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("only {received} of the {needed} results needed have arrived")]
    InsufficientWorkers { received: usize, needed: usize },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Parses `r s` followed by `r·s` whitespace-separated values in row-major order.
pub fn read_matrix(text: &str) -> Result<DMatrix<f64>, CodedError> {
    let mut tokens = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#'))
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)));
    let mut dim = |what: &str| -> Result<usize, CodedError> {
        let (line, t) = tokens.next().ok_or_else(|| CodedError::Parse {
            line: 1,
            msg: format!("missing {what}"),
        })?;
        t.parse().map_err(|_| CodedError::Parse {
            line,
            msg: format!("{what} must be a nonnegative integer, got {t:?}"),
        })
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let mut values = Vec::with_capacity(rows * cols);
    for (line, t) in tokens {
        let v: f64 = t.parse().map_err(|_| CodedError::Parse {
            line,
            msg: format!("not a number: {t:?}"),
        })?;
        if !v.is_finite() {
            return Err(CodedError::Parse {
                line,
                msg: format!("non-finite value {t}"),
            });
        }
        values.push(v);
    }
    if values.len() != rows * cols {
        return Err(CodedError::Shape(format!(
            "header declares {rows}×{cols} = {} values, found {}",
            rows * cols,
            values.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn write_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Reads a column vector written as an `s × 1` matrix.
pub fn read_vector(text: &str) -> Result<DVector<f64>, CodedError> {
    let m = read_matrix(text)?;
    if m.ncols() != 1 {
        return Err(CodedError::Shape(format!(
            "vector must be s×1, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.column(0).into_owned())
}

/// `n × k` Vandermonde matrix on nodes `1..=n`, columns scaled to unit norm.
pub fn vandermonde_generator(n: usize, k: usize) -> Result<DMatrix<f64>, CodedError> {
    if k == 0 || k > n {
        return Err(CodedError::InvalidCode { n, k });
    }
    let mut g = DMatrix::from_fn(n, k, |i, j| ((i + 1) as f64).powi(j as i32));
    for mut col in g.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    Ok(g)
}

/// `n × k` matrix of standard normal entries.
pub fn gaussian_generator(
    n: usize,
    k: usize,
    rng: &mut SimRng,
) -> Result<DMatrix<f64>, CodedError> {
    if k == 0 || k > n {
        return Err(CodedError::InvalidCode { n, k });
    }
    Ok(DMatrix::from_fn(n, k, |_, _| rng.sample(StandardNormal)))
}

/// Three workers, two blocks: `A₁`, `A₂` and `A₁ + A₂`.
pub fn three_worker_generator() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0])
}

/// `A` split into `k` zero-padded row blocks and encoded for `n` workers.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedTask {
    pub generator: DMatrix<f64>,
    /// Coded block held by each worker.
    pub blocks: Vec<DMatrix<f64>>,
    pub block_rows: usize,
    pub original_rows: usize,
}

impl CodedTask {
    pub fn n(&self) -> usize {
        self.generator.nrows()
    }

    pub fn k(&self) -> usize {
        self.generator.ncols()
    }

    /// What worker `i` sends back.
    pub fn compute(&self, worker: usize, x: &DVector<f64>) -> Result<DVector<f64>, CodedError> {
        let block = self.blocks.get(worker).ok_or_else(|| {
            CodedError::Shape(format!(
                "no worker {worker} in a code of length {}",
                self.n()
            ))
        })?;
        if block.ncols() != x.len() {
            return Err(CodedError::Shape(format!(
                "x has {} entries, A has {} columns",
                x.len(),
                block.ncols()
            )));
        }
        Ok(block * x)
    }
}

/// Encodes with the Vandermonde generator.
pub fn mds_encode(a: &DMatrix<f64>, n: usize, k: usize) -> Result<CodedTask, CodedError> {
    encode_with_generator(a, vandermonde_generator(n, k)?)
}

pub fn encode_with_generator(
    a: &DMatrix<f64>,
    generator: DMatrix<f64>,
) -> Result<CodedTask, CodedError> {
    let (n, k) = generator.shape();
    if k == 0 || k > n {
        return Err(CodedError::InvalidCode { n, k });
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(CodedError::Shape("A must be nonempty".into()));
    }
    let block_rows = a.nrows().div_ceil(k);
    let mut padded = DMatrix::zeros(block_rows * k, a.ncols());
    padded.rows_mut(0, a.nrows()).copy_from(a);
    let parts: Vec<DMatrix<f64>> = (0..k)
        .map(|j| padded.rows(j * block_rows, block_rows).into_owned())
        .collect();
    let blocks = (0..n)
        .map(|i| {
            let mut b = DMatrix::zeros(block_rows, a.ncols());
            for (j, part) in parts.iter().enumerate() {
                b += part * generator[(i, j)];
            }
            b
        })
        .collect();
    Ok(CodedTask {
        generator,
        blocks,
        block_rows,
        original_rows: a.nrows(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeStatus {
    Pending { received: usize, needed: usize },
    Decoded(DVector<f64>),
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Recovers `A x` from `(worker index, result)` pairs. Uses the first `k`
/// distinct workers in the order given.
pub fn mds_decode(
    task: &CodedTask,
    received: &[(usize, DVector<f64>)],
) -> Result<DecodeStatus, CodedError> {
    let k = task.k();
    let mut used: Vec<&(usize, DVector<f64>)> = Vec::with_capacity(k);
    for item in received {
        if item.0 >= task.n() {
            return Err(CodedError::Shape(format!(
                "no worker {} in a code of length {}",
                item.0,
                task.n()
            )));
        }
        if item.1.len() != task.block_rows {
            return Err(CodedError::Shape(format!(
                "worker {} returned {} values, expected {}",
                item.0,
                item.1.len(),
                task.block_rows
            )));
        }
        if used.len() < k && !used.iter().any(|u| u.0 == item.0) {
            used.push(item);
        }
    }
    if used.len() < k {
        return Ok(DecodeStatus::Pending {
            received: used.len(),
            needed: k,
        });
    }
    let sub = DMatrix::from_fn(k, k, |i, j| task.generator[(used[i].0, j)]);
    let cond = condition_number(&sub);
    if !(cond <= MAX_CONDITION) {
        return Err(CodedError::IllConditioned { cond });
    }
    let y = DMatrix::from_fn(k, task.block_rows, |i, j| used[i].1[j]);
    let z = sub.lu().solve(&y).ok_or(CodedError::IllConditioned {
        cond: f64::INFINITY,
    })?;
    let mut out = DVector::zeros(task.original_rows);
    for row in 0..task.original_rows {
        out[row] = z[(row / task.block_rows, row % task.block_rows)];
    }
    Ok(DecodeStatus::Decoded(out))
}

/// One simulated round of a posted mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    /// Time at which `A x` became decodable.
    pub runtime: f64,
    pub result: Vec<f64>,
    /// Largest absolute deviation from the directly computed `A x`.
    pub max_abs_error: f64,
    /// Workers per participating type.
    pub participants: Vec<(TypeId, u64)>,
    /// Workers whose results were used.
    pub used_workers: usize,
    pub total_paid: f64,
    /// `Σ c_m T` over participants.
    pub total_worker_cost: f64,
    pub total_worker_surplus: f64,
    /// `γ₁ T + γ₂ · total_paid`.
    pub platform_cost: f64,
}

struct Slot {
    rows: usize,
    finish: f64,
    reward: f64,
    cost_rate: f64,
}

/// Runs one round: every type best-responds, participants draw completion
/// times, the platform decodes as soon as it can and pays each participant
/// the constant reward schedule.
///
/// MDS mechanisms use the Vandermonde code for up to
/// [`VANDERMONDE_MAX_N`] workers and a Gaussian code beyond. Heterogeneous
/// mechanisms use integer loads and a Gaussian row generator.
pub fn simulate_round(
    mech: &Mechanism,
    pop: &Population,
    cfg: &PlatformConfig,
    a: &DMatrix<f64>,
    x: &DVector<f64>,
    seed: u64,
) -> Result<SimOutcome, CodedError> {
    mech.check_against(pop)?;
    let r = mech.assignment.total_rows;
    if a.nrows() as f64 != r {
        return Err(CodedError::Shape(format!(
            "A has {} rows, mechanism splits {r}",
            a.nrows()
        )));
    }
    if a.ncols() != x.len() {
        return Err(CodedError::Shape(format!(
            "x has {} entries, A has {} columns",
            x.len(),
            a.ncols()
        )));
    }
    let loads = mech.assignment.integerized(pop)?;
    let mut time_rng = rng::stream(seed, &[0]);
    let mut code_rng = rng::stream(seed, &[1]);

    let mut slots = Vec::new();
    let mut participants = Vec::new();
    for id in pop.ids() {
        let (decision, _) = best_response(mech, pop, id)?;
        let WorkerDecision::Participate { report } = decision else {
            continue;
        };
        let Some(rows) = loads.load(report) else {
            continue;
        };
        let truth = pop.get(id)?;
        let claim = pop.get(report)?;
        let reward = mech.rewards[report - 1] * truth.profile.phi / claim.profile.phi;
        participants.push((id, truth.worker.count));
        for _ in 0..truth.worker.count {
            slots.push(Slot {
                rows: rows as usize,
                finish: sample_time(&truth.worker, rows, &mut time_rng),
                reward,
                cost_rate: truth.worker.cost_rate,
            });
        }
    }
    let mut order: Vec<usize> = (0..slots.len()).collect();
    order.sort_by(|&i, &j| slots[i].finish.total_cmp(&slots[j].finish).then(i.cmp(&j)));

    let (runtime, result, used_workers) = match mech.assignment.scheme {
        LoadScheme::MdsUniform { k } => decode_mds_round(a, x, &slots, &order, k, &mut code_rng)?,
        LoadScheme::HeteroAsymptotic => decode_row_round(a, x, &slots, &order, &mut code_rng)?,
    };

    let direct = a * x;
    let max_abs_error = (&result - &direct).amax();
    let total_paid: f64 = slots.iter().map(|s| s.reward).sum();
    let total_worker_cost: f64 = slots.iter().map(|s| s.cost_rate * runtime).sum();
    let total_worker_surplus = total_paid - total_worker_cost;
    let platform_cost = cfg.gamma_time * runtime + cfg.gamma_pay * total_paid;
    debug_assert!(
        (total_worker_cost + total_worker_surplus - total_paid).abs()
            <= 1e-9 * (1.0 + total_paid.abs())
    );
    Ok(SimOutcome {
        runtime,
        result: result.iter().copied().collect(),
        max_abs_error,
        participants,
        used_workers,
        total_paid,
        total_worker_cost,
        total_worker_surplus,
        platform_cost,
    })
}

fn decode_mds_round(
    a: &DMatrix<f64>,
    x: &DVector<f64>,
    slots: &[Slot],
    order: &[usize],
    k: usize,
    code_rng: &mut SimRng,
) -> Result<(f64, DVector<f64>, usize), CodedError> {
    let n = slots.len();
    if n < k {
        return Err(CodedError::InsufficientWorkers {
            received: n,
            needed: k,
        });
    }
    let generator = if n <= VANDERMONDE_MAX_N {
        vandermonde_generator(n, k)?
    } else {
        gaussian_generator(n, k, code_rng)?
    };
    let task = encode_with_generator(a, generator)?;
    let mut received = Vec::with_capacity(k);
    for &i in order {
        received.push((i, task.compute(i, x)?));
        if let DecodeStatus::Decoded(v) = mds_decode(&task, &received)? {
            return Ok((slots[i].finish, v, received.len()));
        }
    }
    Err(CodedError::InsufficientWorkers {
        received: received.len(),
        needed: k,
    })
}

fn decode_row_round(
    a: &DMatrix<f64>,
    x: &DVector<f64>,
    slots: &[Slot],
    order: &[usize],
    code_rng: &mut SimRng,
) -> Result<(f64, DVector<f64>, usize), CodedError> {
    let r = a.nrows();
    let total: usize = slots.iter().map(|s| s.rows).sum();
    if total < r {
        return Err(CodedError::InsufficientWorkers {
            received: total,
            needed: r,
        });
    }
    let generator = gaussian_generator(total, r, code_rng)?;
    let mut offsets = Vec::with_capacity(slots.len());
    let mut acc = 0;
    for s in slots {
        offsets.push(acc);
        acc += s.rows;
    }
    let mut rows_used: Vec<usize> = Vec::new();
    for (used, &i) in order.iter().enumerate() {
        rows_used.extend(offsets[i]..offsets[i] + slots[i].rows);
        if rows_used.len() < r {
            continue;
        }
        let g = generator.select_rows(rows_used.iter());
        let y = (&g * a) * x;
        let svd = g.svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd.rank(smax * 1e-10 * r as f64);
        if rank < r {
            continue;
        }
        let sol = svd
            .solve(&y, smax * 1e-10 * r as f64)
            .map_err(|e| CodedError::Shape(e.to_string()))?;
        return Ok((slots[i].finish, sol, used + 1));
    }
    Err(CodedError::InsufficientWorkers {
        received: rows_used.len(),
        needed: r,
    })
}

/// Worker pair (0-based) and the product decoded from their results.
pub type PairDecode = ([usize; 2], DVector<f64>);

/// Three workers holding `A₁`, `A₂`, `A₁ + A₂`: `A x` decoded from every pair.
pub fn three_worker_demo(
    a: &DMatrix<f64>,
    x: &DVector<f64>,
) -> Result<Vec<PairDecode>, CodedError> {
    let task = encode_with_generator(a, three_worker_generator())?;
    let results: Vec<DVector<f64>> = (0..3)
        .map(|i| task.compute(i, x))
        .collect::<Result<_, _>>()?;
    [[0, 1], [0, 2], [1, 2]]
        .into_iter()
        .map(|pair| {
            let got = pair.map(|i| (i, results[i].clone()));
            match mds_decode(&task, &got)? {
                DecodeStatus::Decoded(v) => Ok((pair, v)),
                DecodeStatus::Pending { received, needed } => {
                    Err(CodedError::InsufficientWorkers { received, needed })
                }
            }
        })
        .collect()
}
