//! The workers' side: each type's best response to a posted mechanism, and
//! individual-rationality / incentive-compatibility checks.
//!
//! A worker of true type `m` that reports `m̃` receives the reward posted for
//! `m̃`, scaled by how much of `m̃`'s throughput it actually delivers
//! (`φ_m / φ_m̃`), and bears its own cost `c_m E[T]`. Under complete
//! information the platform observes types, so only the truthful report
//! exists.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanism::{Mechanism, MechanismError};
use crate::worker::{ModelError, Population, TypeId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error(
        "type {true_type} cannot report {reported}: types are observed under complete information"
    )]
    MisreportNotAllowed { true_type: TypeId, reported: TypeId },
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Noise floor for payoff comparisons.
pub fn payoff_tolerance(a: f64, b: f64) -> f64 {
    1e-9 * (1.0 + a.abs().max(b.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorkerDecision {
    Participate { report: TypeId },
    Decline,
}

/// Expected payoff of a type-`true_type` worker that accepts the contract
/// for `reported`.
pub fn worker_payoff(
    mech: &Mechanism,
    pop: &Population,
    true_type: TypeId,
    reported: TypeId,
) -> Result<f64, GameError> {
    if !mech.scenario.has_private_costs() && true_type != reported {
        return Err(GameError::MisreportNotAllowed {
            true_type,
            reported,
        });
    }
    let truth = pop.get(true_type)?;
    let claim = pop.get(reported)?;
    let reward = mech.reward(reported).ok_or_else(|| {
        MechanismError::Inconsistent(format!("no reward posted for type {reported}"))
    })?;
    Ok(reward * truth.profile.phi / claim.profile.phi
        - truth.worker.cost_rate * mech.expected_runtime)
}

fn candidate_reports(mech: &Mechanism, pop: &Population, true_type: TypeId) -> Vec<TypeId> {
    if mech.scenario.has_private_costs() {
        pop.ids().collect()
    } else {
        vec![true_type]
    }
}

/// Payoff-maximizing decision, with its payoff (0 when declining).
///
/// Near-ties favour the truthful report, then the smallest id. A worker
/// participates when its best payoff is not below zero beyond the noise floor.
pub fn best_response(
    mech: &Mechanism,
    pop: &Population,
    true_type: TypeId,
) -> Result<(WorkerDecision, f64), GameError> {
    let truthful = worker_payoff(mech, pop, true_type, true_type)?;
    let mut best = (true_type, truthful);
    for report in candidate_reports(mech, pop, true_type) {
        let u = worker_payoff(mech, pop, true_type, report)?;
        if u > best.1 + payoff_tolerance(u, best.1) {
            best = (report, u);
        }
    }
    if best.1 >= -payoff_tolerance(best.1, 0.0) {
        Ok((WorkerDecision::Participate { report: best.0 }, best.1))
    } else {
        Ok((WorkerDecision::Decline, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcViolation {
    pub true_type: TypeId,
    pub report: TypeId,
    /// Payoff gained over truthful reporting.
    pub gain: f64,
}

/// Per-type row of a [`ComplianceReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeCompliance {
    pub id: TypeId,
    pub targeted: bool,
    pub truthful_payoff: f64,
    pub decision: WorkerDecision,
    pub best_payoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    /// Targeted types whose truthful payoff is negative: `(id, payoff)`.
    pub ir_violations: Vec<(TypeId, f64)>,
    /// Profitable misreports onto targeted types.
    pub ic_violations: Vec<IcViolation>,
    /// Profitable misreports onto any type, targeted or not.
    pub ic_violations_unrestricted: Vec<IcViolation>,
    /// Non-targeted types that strictly prefer to participate.
    pub exclusion_violations: Vec<(TypeId, f64)>,
    pub rows: Vec<TypeCompliance>,
    pub truthful: bool,
}

/// Checks IR for targeted types, IC for every type against every report, and
/// that non-targeted types stay out.
pub fn verify_ir_ic(mech: &Mechanism, pop: &Population) -> Result<ComplianceReport, GameError> {
    mech.check_against(pop)?;
    let mut report = ComplianceReport {
        ir_violations: Vec::new(),
        ic_violations: Vec::new(),
        ic_violations_unrestricted: Vec::new(),
        exclusion_violations: Vec::new(),
        rows: Vec::with_capacity(pop.len()),
        truthful: true,
    };
    for m in pop.ids() {
        let targeted = mech.is_targeted(m);
        let truthful = worker_payoff(mech, pop, m, m)?;
        if targeted && truthful < -payoff_tolerance(truthful, 0.0) {
            report.ir_violations.push((m, truthful));
        }
        for alt in candidate_reports(mech, pop, m) {
            if alt == m {
                continue;
            }
            let u = worker_payoff(mech, pop, m, alt)?;
            if u > truthful + payoff_tolerance(u, truthful) {
                let v = IcViolation {
                    true_type: m,
                    report: alt,
                    gain: u - truthful,
                };
                if mech.is_targeted(alt) {
                    report.ic_violations.push(v.clone());
                }
                report.ic_violations_unrestricted.push(v);
            }
        }
        let (decision, best_payoff) = best_response(mech, pop, m)?;
        if !targeted && best_payoff > payoff_tolerance(best_payoff, 0.0) {
            report.exclusion_violations.push((m, best_payoff));
        }
        report.rows.push(TypeCompliance {
            id: m,
            targeted,
            truthful_payoff: truthful,
            decision,
            best_payoff,
        });
    }
    report.truthful = report.ir_violations.is_empty()
        && report.ic_violations.is_empty()
        && report.ic_violations_unrestricted.is_empty()
        && report.exclusion_violations.is_empty();
    Ok(report)
}

impl ComplianceReport {
    /// Tab-separated table, one line per type.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("type\ttargeted\ttruthful_payoff\tdecision\tbest_payoff\n");
        for row in &self.rows {
            let decision = match row.decision {
                WorkerDecision::Participate { report } => format!("report:{report}"),
                WorkerDecision::Decline => "decline".to_string(),
            };
            out.push_str(&format!(
                "{}\t{}\t{:.16e}\t{}\t{:.16e}\n",
                row.id, row.targeted, row.truthful_payoff, decision, row.best_payoff
            ));
        }
        out
    }
}

impl fmt::Display for ComplianceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.truthful {
            writeln!(
                f,
                "mechanism is individually rational and incentive compatible"
            )?;
        }
        for (id, u) in &self.ir_violations {
            writeln!(
                f,
                "IR violated: type {id} expects payoff {u:.6e} when truthful"
            )?;
        }
        for v in &self.ic_violations_unrestricted {
            writeln!(
                f,
                "IC violated: type {} gains {:.6e} by reporting type {}",
                v.true_type, v.gain, v.report
            )?;
        }
        for (id, u) in &self.exclusion_violations {
            writeln!(
                f,
                "non-targeted type {id} would participate with payoff {u:.6e}"
            )?;
        }
        Ok(())
    }
}
