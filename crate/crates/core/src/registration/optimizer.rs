use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::objective::{ObjectiveBreakdown, Problem, State};
use super::RegistrationConfig;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// The three stages of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Step {
    Affine,
    Piecewise,
    Local,
}

impl Step {
    pub fn as_str(self) -> &'static str {
        match self {
            Step::Affine => "affine",
            Step::Piecewise => "piecewise",
            Step::Local => "local",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Termination {
    /// No improvement for `patience` iterations.
    Converged,
    MaxIterations,
    StepUnderflow,
    /// Every trial step folded the surface or inverted an element.
    FoldOver,
}

/// Objective history of one step: entry 0 is the starting state, entry `i`
/// the best state after iteration `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub step: Step,
    pub objective: Vec<ObjectiveBreakdown>,
    pub accepted: Vec<bool>,
    pub termination: Termination,
    pub warning: Option<String>,
}

impl StepTrace {
    pub fn iterations(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_monotone(&self) -> bool {
        self.objective.windows(2).all(|w| w[1].total <= w[0].total)
    }

    pub fn final_objective(&self) -> ObjectiveBreakdown {
        *self.objective.last().expect("trace starts with the initial state")
    }
}

const DAMPING_START: f64 = 1e-4;
const DAMPING_MIN: f64 = 1e-12;
const DAMPING_MAX: f64 = 1e16;

/// Solves `(H + μ diag H) δ = −G`, raising μ until the system factors.
fn damped_step(h: &DMatrix<f64>, g: &DMatrix<f64>, mu: &mut f64) -> Option<Vec<Vec3>> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1e-300);
    // weakly constrained controls are damped as if they had average curvature
    let floor = (0..n).map(|i| h[(i, i)]).sum::<f64>() / n.max(1) as f64;
    while *mu <= DAMPING_MAX {
        let mut a = h.clone();
        for i in 0..n {
            a[(i, i)] += *mu * h[(i, i)].max(floor) + 1e-12 * scale;
        }
        if let Some(chol) = a.cholesky() {
            let d = chol.solve(&(-g));
            return Some((0..n).map(|j| Vec3::new(d[(j, 0)], d[(j, 1)], d[(j, 2)])).collect());
        }
        *mu *= 10.0;
    }
    None
}

pub(crate) struct Outcome {
    pub state: State,
    pub trace: StepTrace,
}

/// Monotone damped reweighted Gauss-Newton with correspondences refreshed
/// at every trial point.
pub(crate) fn minimize(
    problem: &Problem,
    theta0: Vec<Vec3>,
    step: Step,
    config: &RegistrationConfig,
    max_move: f64,
) -> Result<Outcome> {
    let mut current = problem.state(theta0).ok_or_else(|| {
        Error::Optimization(format!("{} step starts from an inadmissible configuration", step.as_str()))
    })?;
    if !current.breakdown.total.is_finite() {
        return Err(Error::Optimization(format!("{} step objective is not finite", step.as_str())));
    }
    let mut trace = StepTrace {
        step,
        objective: alloc::vec![current.breakdown],
        accepted: Vec::new(),
        termination: Termination::MaxIterations,
        warning: None,
    };
    let mut mu = DAMPING_START;
    let mut stalled = 0;
    let mut blocked = 0;

    for _ in 0..config.max_iters {
        if stalled >= config.patience {
            trace.termination = Termination::Converged;
            break;
        }
        let (h, g) = problem.normal_equations(&current.theta, &current.placements, &current.matches, true);
        let h = h.expect("hessian requested");
        let Some(mut delta) = damped_step(&h, &g, &mut mu) else {
            trace.termination = Termination::StepUnderflow;
            trace.warning = Some(format!("{} step: damped system could not be factored", step.as_str()));
            break;
        };
        let mut length = problem.max_displacement(&delta);
        if length > max_move {
            let s = max_move / length;
            delta.iter_mut().for_each(|d| *d *= s);
            length = max_move;
        }
        if length < config.min_step_mm {
            // a short undamped step means a stationary point; a short step
            // forced by repeated rejections is reported
            if trace.accepted.last() == Some(&false) {
                trace.termination = Termination::StepUnderflow;
                trace.warning =
                    Some(format!("{} step: step length fell below {} mm", step.as_str(), config.min_step_mm));
            } else {
                trace.termination = Termination::Converged;
            }
            break;
        }

        let mut scale = 1.0;
        let mut accepted = None;
        let mut all_inadmissible = true;
        for _ in 0..config.max_backtracks {
            let theta: Vec<Vec3> = current.theta.iter().zip(&delta).map(|(t, d)| t + d * scale).collect();
            if let Some(candidate) = problem.state(theta) {
                all_inadmissible = false;
                if candidate.breakdown.total < current.breakdown.total {
                    accepted = Some(candidate);
                    break;
                }
            }
            scale *= config.backtrack_factor;
            if length * scale < config.min_step_mm {
                break;
            }
        }

        let improvement = match accepted {
            Some(candidate) => {
                let gain = current.breakdown.total - candidate.breakdown.total;
                current = candidate;
                mu = (mu / 3.0).max(DAMPING_MIN);
                blocked = 0;
                trace.accepted.push(true);
                gain
            }
            None => {
                mu = (mu * 10.0).min(DAMPING_MAX);
                blocked = if all_inadmissible { blocked + 1 } else { 0 };
                trace.accepted.push(false);
                0.0
            }
        };
        trace.objective.push(current.breakdown);
        stalled = if improvement < config.min_improvement { stalled + 1 } else { 0 };

        if blocked > 0 && step == Step::Local {
            trace.termination = Termination::FoldOver;
            trace.warning = Some(format!(
                "{} step: every trial within {} halvings folded the surface; keeping the best state",
                step.as_str(),
                config.max_backtracks
            ));
            break;
        }
    }
    if stalled >= config.patience {
        trace.termination = Termination::Converged;
    }
    Ok(Outcome { state: current, trace })
}
