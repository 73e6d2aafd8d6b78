use rand::Rng;
use rand_distr::Binomial;
use rayon::prelude::*;

use super::config::{ExperimentName, ExperimentSpec};
use super::table::{Cell, ResultTable};
use super::ExperimentError;
use crate::game::{best_response, WorkerDecision};
use crate::mechanism::{
    platform_cost, solve_complete, solve_cost_only, solve_incomplete, Mechanism, PlatformConfig,
};
use crate::rng::{self, SimRng};
use crate::worker::{apportion, build_population, Population, TypeId, WorkerType};

/// Sorted population plus, for each sorted position, the index of the type
/// in the configured list.
fn base_population(spec: &ExperimentSpec) -> Result<(Population, Vec<usize>), ExperimentError> {
    // tag each type with its input position; build_population keeps counts
    let tagged: Vec<WorkerType> = spec
        .population
        .iter()
        .enumerate()
        .map(|(i, t)| WorkerType {
            count: i as u64,
            ..t.clone()
        })
        .collect();
    let pop = build_population(tagged)?;
    let order = pop.counts().iter().map(|&c| c as usize).collect();
    Ok((pop, order))
}

struct Sweep {
    base: Population,
    weights: Vec<f64>,
    cfg: PlatformConfig,
}

impl Sweep {
    fn new(spec: &ExperimentSpec) -> Result<Self, ExperimentError> {
        spec.validate()?;
        let (base, order) = base_population(spec)?;
        let raw = spec.weights();
        let weights = order.iter().map(|&i| raw[i]).collect();
        let cfg = PlatformConfig::new(spec.gamma_time, spec.gamma_pay, spec.total_rows)?;
        Ok(Self { base, weights, cfg })
    }

    fn at(&self, n: u64) -> Result<Population, ExperimentError> {
        Ok(self.base.with_counts(&apportion(n, &self.weights))?)
    }

    fn rows<F>(&self, spec: &ExperimentSpec, row: F) -> Result<Vec<Vec<Cell>>, ExperimentError>
    where
        F: Fn(u64, &Population) -> Result<Vec<Cell>, ExperimentError> + Sync,
    {
        spec.n_sweep
            .par_iter()
            .map(|&n| row(n, &self.at(n)?))
            .collect()
    }
}

fn table(spec: &ExperimentSpec, columns: &[&str], rows: Vec<Vec<Cell>>) -> ResultTable {
    let mut t = ResultTable::new(
        columns.iter().map(|c| c.to_string()).collect(),
        spec.clone(),
    );
    for r in rows {
        t.push(r);
    }
    t
}

/// Number of targeted types under complete and incomplete information.
pub fn run_fig4(spec: &ExperimentSpec) -> Result<ResultTable, ExperimentError> {
    let sweep = Sweep::new(spec)?;
    let rows = sweep.rows(spec, |n, pop| {
        let complete = solve_complete(pop, &sweep.cfg)?;
        let incomplete = solve_incomplete(pop, &sweep.cfg)?;
        Ok(vec![
            Cell::Int(n as i64),
            Cell::Int(complete.threshold_type as i64),
            Cell::Int(incomplete.threshold_type as i64),
        ])
    })?;
    Ok(table(spec, &["N", "n_complete", "n_incomplete"], rows))
}

/// Platform cost under both information scenarios and their difference.
pub fn run_fig5(spec: &ExperimentSpec) -> Result<ResultTable, ExperimentError> {
    let sweep = Sweep::new(spec)?;
    let rows = sweep.rows(spec, |n, pop| {
        let complete = solve_complete(pop, &sweep.cfg)?.expected_cost;
        let incomplete = solve_incomplete(pop, &sweep.cfg)?.expected_cost;
        Ok(vec![
            Cell::Int(n as i64),
            Cell::Real(complete),
            Cell::Real(incomplete),
            Cell::Real(incomplete - complete),
        ])
    })?;
    Ok(table(
        spec,
        &["N", "cost_complete", "cost_incomplete", "gap"],
        rows,
    ))
}

/// Each type's payoff under incomplete information; 0 for types that decline.
pub fn run_fig6(spec: &ExperimentSpec) -> Result<ResultTable, ExperimentError> {
    let sweep = Sweep::new(spec)?;
    let m = sweep.base.len();
    let rows = sweep.rows(spec, |n, pop| {
        let mech = solve_incomplete(pop, &sweep.cfg)?;
        let mut row = vec![Cell::Int(n as i64), Cell::Int(mech.threshold_type as i64)];
        for id in pop.ids() {
            row.push(Cell::Real(best_response(&mech, pop, id)?.1));
        }
        Ok(row)
    })?;
    let mut columns = vec!["N".to_string(), "n_incomplete".to_string()];
    columns.extend((1..=m).map(|id| format!("payoff_{id}")));
    let mut t = ResultTable::new(columns, spec.clone());
    for r in rows {
        t.push(r);
    }
    Ok(t)
}

/// Headcounts of `n` workers whose types are drawn independently.
fn sample_counts(n: u64, probs: &[f64], rng: &mut SimRng) -> Vec<u64> {
    let mut counts = vec![0; probs.len()];
    let mut remaining = n;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= p {
            counts[i] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q).expect("probability in [0, 1]");
        counts[i] = rng.sample(draw);
        remaining -= counts[i];
        mass -= p;
    }
    counts
}

/// Cost of a mechanism committed on expected headcounts when the realized
/// headcounts differ. Types that accept the offer are those whose best
/// response to the announced terms is to participate; loads are split over
/// the workers that actually show up.
fn realized_cost(
    mech: &Mechanism,
    participating: &[TypeId],
    realized: &Population,
    cfg: &PlatformConfig,
) -> Result<f64, ExperimentError> {
    let throughput = realized.throughput(participating)?;
    if throughput <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let mut paid = 0.0;
    for &id in participating {
        paid += realized.worker(id)?.count as f64 * mech.rewards[id - 1];
    }
    Ok(cfg.gamma_time * cfg.total_rows / throughput + cfg.gamma_pay * paid)
}

/// Cost increase when the platform only knows the type distribution and
/// commits to the incomplete-information mechanism for the expected
/// headcounts, relative to knowing the realized headcounts.
pub fn run_fig7(spec: &ExperimentSpec) -> Result<ResultTable, ExperimentError> {
    let sweep = Sweep::new(spec)?;
    let (_, order) = base_population(spec)?;
    let raw = spec.probabilities();
    let probs: Vec<f64> = order.iter().map(|&i| raw[i]).collect();
    let reps = spec.replications;

    let mut points = Vec::with_capacity(spec.n_sweep.len());
    for (i, &n) in spec.n_sweep.iter().enumerate() {
        let expected = sweep.base.with_counts(&apportion(n, &probs))?;
        let mech = solve_incomplete(&expected, &sweep.cfg)?;
        let mut participating = Vec::new();
        for id in expected.ids() {
            if let (WorkerDecision::Participate { .. }, _) = best_response(&mech, &expected, id)? {
                participating.push(id);
            }
        }
        points.push((i as u64, n, mech, participating));
    }

    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..reps).map(move |j| (p, j)))
        .collect();
    let samples: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(p, j)| {
            let (i, n, mech, participating) = &points[p];
            let mut rng = rng::stream(spec.seed, &[*i, j]);
            let realized = sweep
                .base
                .with_counts(&sample_counts(*n, &probs, &mut rng))?;
            let strong = realized_cost(mech, participating, &realized, &sweep.cfg)?;
            let informed = platform_cost(
                &solve_incomplete(&realized, &sweep.cfg)?,
                &realized,
                &sweep.cfg,
            )?;
            Ok((strong, informed))
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut t = ResultTable::new(
        [
            "N",
            "cost_strong_mean",
            "cost_incomplete_mean",
            "gap_mean",
            "gap_stderr",
            "replications",
        ]
        .iter()
        .map(|c| c.to_string())
        .collect(),
        spec.clone(),
    );
    for (p, chunk) in samples.chunks(reps as usize).enumerate() {
        let k = chunk.len() as f64;
        let strong = chunk.iter().map(|s| s.0).sum::<f64>() / k;
        let informed = chunk.iter().map(|s| s.1).sum::<f64>() / k;
        let gaps: Vec<f64> = chunk.iter().map(|s| s.0 - s.1).collect();
        let mean = gaps.iter().sum::<f64>() / k;
        let stderr = if chunk.len() > 1 {
            let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            0.0
        };
        t.push(vec![
            Cell::Int(points[p].1 as i64),
            Cell::Real(strong),
            Cell::Real(informed),
            Cell::Real(mean),
            Cell::Real(stderr),
            Cell::Int(reps as i64),
        ]);
    }
    Ok(t)
}

/// Targeted types, cost and runtime for every applicable scenario.
pub fn run_custom(spec: &ExperimentSpec) -> Result<ResultTable, ExperimentError> {
    let sweep = Sweep::new(spec)?;
    let homogeneous = sweep.base.is_performance_homogeneous();
    let rows = sweep.rows(spec, |n, pop| {
        let complete = solve_complete(pop, &sweep.cfg)?;
        let incomplete = solve_incomplete(pop, &sweep.cfg)?;
        let mut row = vec![
            Cell::Int(n as i64),
            Cell::Int(complete.threshold_type as i64),
            Cell::Int(incomplete.threshold_type as i64),
            Cell::Real(complete.expected_cost),
            Cell::Real(incomplete.expected_cost),
            Cell::Real(complete.expected_runtime),
            Cell::Real(incomplete.expected_runtime),
        ];
        if homogeneous {
            let cost_only = solve_cost_only(pop, &sweep.cfg)?;
            row.push(Cell::Int(cost_only.threshold_type as i64));
            row.push(Cell::Int(cost_only.recovery_threshold.unwrap_or(0) as i64));
            row.push(Cell::Real(cost_only.expected_cost));
        }
        Ok(row)
    })?;
    let mut columns = vec![
        "N",
        "n_complete",
        "n_incomplete",
        "cost_complete",
        "cost_incomplete",
        "runtime_complete",
        "runtime_incomplete",
    ];
    if homogeneous {
        columns.extend(["n_cost_only", "k_cost_only", "cost_cost_only"]);
    }
    Ok(table(spec, &columns, rows))
}

pub fn run(spec: &ExperimentSpec) -> Result<ResultTable, ExperimentError> {
    match spec.name {
        ExperimentName::Fig4 => run_fig4(spec),
        ExperimentName::Fig5 => run_fig5(spec),
        ExperimentName::Fig6 => run_fig6(spec),
        ExperimentName::Fig7 => run_fig7(spec),
        ExperimentName::Custom => run_custom(spec),
    }
}
