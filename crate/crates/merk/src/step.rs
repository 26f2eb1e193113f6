//! The multirate stepper: builds forcing polynomials group by group, hands
//! each fast IVP to an inner solver, and assembles the step.

use alloc::vec::Vec;

use crate::erk::{erk_integrate, FastIvp};
use crate::error::MerkError;
use crate::phi::solve_modified_ivp_exact;
use crate::problem::{SplitOdeProblem, StateVector};
use crate::rational::{to_f64, Frac};
use crate::scheme::{MerkScheme, Slot};
use crate::tableau::ButcherTableau;

/// Strategy for solving the fast modified IVPs.
///
/// Production uses [`ErkFastSolver`]; [`ExactFastSolver`] substitutes exact
/// phi-function solves and exists so tests can separate multirate error from
/// inner-solver error.
pub trait FastIvpSolver {
    fn solve(&self, problem: &SplitOdeProblem, ivp: &FastIvp<'_>) -> Result<Vec<StateVector>, MerkError>;
}

/// Fixed-step explicit RK fast solver with target micro step `h`.
pub struct ErkFastSolver<'a> {
    pub tableau: &'a ButcherTableau,
    pub micro_step: f64,
}

impl FastIvpSolver for ErkFastSolver<'_> {
    fn solve(&self, problem: &SplitOdeProblem, ivp: &FastIvp<'_>) -> Result<Vec<StateVector>, MerkError> {
        erk_integrate(self.tableau, problem, ivp, self.micro_step)
    }
}

/// Exact fast solver via matrix phi-functions; requires `dense_linear`.
pub struct ExactFastSolver;

impl FastIvpSolver for ExactFastSolver {
    fn solve(&self, problem: &SplitOdeProblem, ivp: &FastIvp<'_>) -> Result<Vec<StateVector>, MerkError> {
        let l = problem.dense_linear().ok_or(MerkError::OracleScaleExceeded {
            dimension: problem.dimension(),
            limit: crate::phi::ORACLE_DIM_LIMIT,
        })?;
        problem.counters_internal().add_duration(ivp.duration_in_h);
        ivp.landing_points
            .iter()
            .map(|&tau| solve_modified_ivp_exact(l, ivp.forcing, ivp.y0, tau))
            .collect()
    }
}

/// One MERK step from `(t_n, u_n)` with macro step `H`.
///
/// `stage_solver` integrates the internal-stage IVPs (order q), and
/// `final_solver` the step IVP on `[0, H]` (order r).
pub fn merk_step_with(
    scheme: &MerkScheme,
    problem: &SplitOdeProblem,
    stage_solver: &dyn FastIvpSolver,
    final_solver: &dyn FastIvpSolver,
    t_n: f64,
    u_n: &StateVector,
    h_macro: f64,
) -> Result<StateVector, MerkError> {
    if h_macro <= 0.0 {
        return Err(MerkError::ContractViolation("macro step must be positive"));
    }
    let dim = problem.dimension();
    if u_n.dim() != dim {
        return Err(MerkError::ContractViolation("state dimension mismatch"));
    }

    // N(t_n, u_n) is evaluated once and reused by every polynomial.
    let mut n0 = StateVector::zeros(dim);
    problem.eval_nonlinear(t_n, u_n.as_slice(), n0.as_mut_slice());

    let mut d_hat: Vec<Option<StateVector>> = alloc::vec![None; scheme.stage_count() + 1];
    let mut scratch = StateVector::zeros(dim);
    for (g, group) in scheme.groups.iter().enumerate() {
        let forcing = scheme.build_polynomial(Slot::Group(g), &n0, &d_hat, h_macro)?;
        let landing: Vec<f64> = group.members.iter().map(|&(_, c)| to_f64(c) * h_macro).collect();
        let ivp = FastIvp {
            forcing: &forcing,
            y0: u_n,
            interval_end: to_f64(group.interval_end) * h_macro,
            landing_points: &landing,
            duration_in_h: group.interval_end,
            stage_label: group.members.last().expect("groups are non-empty").0,
        };
        let stage_values = stage_solver.solve(problem, &ivp)?;
        for (&(stage, c), value) in group.members.iter().zip(stage_values.iter()) {
            problem.eval_nonlinear(t_n + to_f64(c) * h_macro, value.as_slice(), scratch.as_mut_slice());
            let mut diff = scratch.clone();
            diff.add_scaled(-1.0, &n0);
            d_hat[stage] = Some(diff);
        }
    }

    let forcing = scheme.build_polynomial(Slot::Final, &n0, &d_hat, h_macro)?;
    let landing = [h_macro];
    let ivp = FastIvp {
        forcing: &forcing,
        y0: u_n,
        interval_end: h_macro,
        landing_points: &landing,
        duration_in_h: Frac::from_integer(1),
        stage_label: 0,
    };
    let mut values = final_solver.solve(problem, &ivp)?;
    Ok(values.pop().expect("final IVP has one landing point"))
}

/// One MERK step with explicit RK fast solves at micro step `h = H / m`.
#[allow(clippy::too_many_arguments)]
pub fn merk_step(
    scheme: &MerkScheme,
    problem: &SplitOdeProblem,
    inner_stage: &ButcherTableau,
    inner_final: &ButcherTableau,
    t_n: f64,
    u_n: &StateVector,
    h_macro: f64,
    m: u32,
) -> Result<StateVector, MerkError> {
    if m == 0 {
        return Err(MerkError::ContractViolation("time scale separation factor must be >= 1"));
    }
    let micro = h_macro / m as f64;
    let stage_solver = ErkFastSolver { tableau: inner_stage, micro_step: micro };
    let final_solver = ErkFastSolver { tableau: inner_final, micro_step: micro };
    merk_step_with(scheme, problem, &stage_solver, &final_solver, t_n, u_n, h_macro)
}

/// Number of macro steps covering `[t0, t_end]`; the span must be an
/// integer multiple of H (within 1e-9 relative).
pub fn macro_step_count(t0: f64, t_end: f64, h_macro: f64) -> Result<usize, MerkError> {
    if h_macro <= 0.0 {
        return Err(MerkError::ContractViolation("macro step must be positive"));
    }
    let span = t_end - t0;
    if span < 0.0 {
        return Err(MerkError::ContractViolation("t_end must not precede t0"));
    }
    let ratio = span / h_macro;
    let n = crate::fmath::round(ratio);
    if crate::fmath::abs(ratio - n) > 1e-9 * ratio.max(1.0) {
        return Err(MerkError::ContractViolation("macro step must divide the time span"));
    }
    Ok(n as usize)
}

/// Integrates the whole problem span with constant `H` and `m`, returning
/// the trajectory including the initial point.
pub fn merk_integrate(
    scheme: &MerkScheme,
    problem: &SplitOdeProblem,
    inner_stage: &ButcherTableau,
    inner_final: &ButcherTableau,
    h_macro: f64,
    m: u32,
) -> Result<Vec<(f64, StateVector)>, MerkError> {
    let (t0, t_end) = problem.time_span();
    let steps = macro_step_count(t0, t_end, h_macro)?;
    let mut trajectory = Vec::with_capacity(steps + 1);
    let mut u = problem.initial_state().clone();
    trajectory.push((t0, u.clone()));
    for n in 0..steps {
        let t_n = t0 + n as f64 * h_macro;
        u = merk_step(scheme, problem, inner_stage, inner_final, t_n, &u, h_macro, m)?;
        trajectory.push((t0 + (n + 1) as f64 * h_macro, u.clone()));
    }
    Ok(trajectory)
}
