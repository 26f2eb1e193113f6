//! Experiment harness: convergence studies, efficiency bookkeeping,
//! m-sweeps, the inner-order study, reference solutions, and rate fitting.
//!
//! Everything here is pure computation over in-memory data; CSV emission and
//! reference caching live in the companion CLI crate.

use alloc::vec::Vec;

use crate::error::MerkError;
use crate::fmath;
use crate::mis::{mis_integrate, mis_kw3};
use crate::phi::expm;
use crate::problem::StateVector;
use crate::problems::{self, Category, ProblemId, ReferenceKind};
use crate::scheme;
use crate::step::{macro_step_count, merk_integrate};
use crate::tableau;

/// Integration methods exposed by the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Merk2,
    Merk3,
    Merk4,
    Merk5,
    MisKw3,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Merk2, Method::Merk3, Method::Merk4, Method::Merk5, Method::MisKw3];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Merk2 => "MERK2",
            Method::Merk3 => "MERK3",
            Method::Merk4 => "MERK4",
            Method::Merk5 => "MERK5",
            Method::MisKw3 => "MIS-KW3",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.iter().copied().find(|m| m.name().eq_ignore_ascii_case(s))
    }

    /// Classical order of the method.
    pub fn order(&self) -> u32 {
        match self {
            Method::Merk2 => 2,
            Method::Merk3 => 3,
            Method::Merk4 => 4,
            Method::Merk5 => 5,
            Method::MisKw3 => 3,
        }
    }
}

/// Macro/micro step policy: stiff (category I) problems fix the micro step
/// `h`, coupling (category II) problems fix the separation factor `m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepPolicy {
    FixedH(f64),
    FixedM(u32),
}

impl StepPolicy {
    pub fn kind(&self) -> &'static str {
        match self {
            StepPolicy::FixedH(_) => "fixed_h",
            StepPolicy::FixedM(_) => "fixed_m",
        }
    }

    /// Time-scale separation factor for a given macro step.
    pub fn separation_factor(&self, h_macro: f64) -> Result<u32, MerkError> {
        match *self {
            StepPolicy::FixedM(m) if m >= 1 => Ok(m),
            StepPolicy::FixedM(_) => Err(MerkError::ContractViolation("m must be >= 1")),
            StepPolicy::FixedH(h) => {
                if h.is_nan() || h <= 0.0 {
                    return Err(MerkError::ContractViolation("micro step must be positive"));
                }
                let ratio = h_macro / h;
                let rounded = fmath::round(ratio);
                // Keep the effective micro step at or below the stability
                // bound: round only when the ratio is essentially integral.
                let m = if fmath::abs(ratio - rounded) <= 1e-6 * ratio.max(1.0) {
                    rounded
                } else {
                    fmath::ceil(ratio)
                };
                Ok((m as u32).max(1))
            }
        }
    }
}

/// One study configuration (one method, one problem, one H sweep).
#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub method: Method,
    pub problem: ProblemId,
    pub policy: StepPolicy,
    /// Macro steps, descending.
    pub macro_steps: Vec<f64>,
    /// Inner solver orders (q, r); defaults to (p, p).
    pub inner_orders: Option<(u32, u32)>,
}

impl StudyConfig {
    /// Resolved inner orders.
    pub fn orders(&self) -> (u32, u32) {
        match self.method {
            Method::MisKw3 => (3, 3),
            _ => self.inner_orders.unwrap_or((self.method.order(), self.method.order())),
        }
    }
}

/// One measured row of a convergence/efficiency study.
#[derive(Clone, Copy, Debug)]
pub struct ReportRow {
    pub macro_h: f64,
    pub micro_h: f64,
    pub m: u32,
    pub max_error: f64,
    pub slow_calls: u64,
    pub fast_calls: u64,
}

impl ReportRow {
    pub fn total_calls(&self) -> u64 {
        self.slow_calls + self.fast_calls
    }
}

/// A finished study: rows plus the fitted convergence rate.
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub method: Method,
    pub problem: ProblemId,
    pub policy: StepPolicy,
    pub q: u32,
    pub r: u32,
    pub rows: Vec<ReportRow>,
    pub best_fit_rate: f64,
    pub floor_cutoff: f64,
}

/// Error floor below which rows are excluded from rate fits: reference
/// solutions are exact to roundoff for analytic/expm references and to
/// about 1e-12 for fine-RK references.
pub fn default_floor(reference: ReferenceKind) -> f64 {
    match reference {
        ReferenceKind::Analytic | ReferenceKind::ExpmExact => 1e-13,
        ReferenceKind::FineRk => 1e-11,
    }
}

/// Micro step used by the fine-RK reference integrator (the fixed stiff
/// micro step 1e-3 divided by 20).
pub const DEFAULT_FINE_REFERENCE_STEP: f64 = 5e-5;

/// Maximum absolute error over all steps and components, excluding the
/// initial point (which is zero by construction). `reference` must be
/// parallel to `trajectory`.
pub fn max_abs_error(
    trajectory: &[(f64, StateVector)],
    reference: &[StateVector],
) -> Result<f64, MerkError> {
    if trajectory.len() != reference.len() {
        return Err(MerkError::ContractViolation("trajectory and reference lengths differ"));
    }
    let mut worst = 0.0_f64;
    for ((_, u), r) in trajectory.iter().zip(reference.iter()).skip(1) {
        if u.dim() != r.dim() {
            return Err(MerkError::ContractViolation("trajectory and reference dimensions differ"));
        }
        worst = worst.max(u.max_abs_diff(r));
    }
    Ok(worst)
}

/// Least-squares slope of `log(error)` versus `log(H)` over the rows whose
/// error exceeds the floor.
pub fn fit_rate(points: &[(f64, f64)], floor_cutoff: f64) -> Result<f64, MerkError> {
    let surviving: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(h, e)| h > 0.0 && e > floor_cutoff)
        .collect();
    if surviving.len() < 2 {
        return Err(MerkError::InsufficientData { surviving: surviving.len() });
    }
    let n = surviving.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (h, e) in surviving {
        let (x, y) = (fmath::ln(h), fmath::ln(e));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Provides reference trajectories at requested time grids.
pub trait ReferenceSource {
    fn trajectory(&self, problem: ProblemId, t_grid: &[f64]) -> Result<Vec<StateVector>, MerkError>;
}

/// Computes the reference solution at the given times (including t0).
///
/// Analytic and expm references are evaluated pointwise; the fine-RK
/// reference integrates the full right-hand side with the Cash-Karp method
/// between consecutive grid points using steps of at most `fine_step`.
pub fn reference_trajectory(
    problem: ProblemId,
    t_grid: &[f64],
    fine_step: f64,
) -> Result<Vec<StateVector>, MerkError> {
    match problems::spec_of(problem).reference {
        ReferenceKind::Analytic => {
            Ok(t_grid.iter().map(|&t| problems::analytic_solution_one_directional(t)).collect())
        }
        ReferenceKind::ExpmExact => {
            let a = problems::bi_directional_full_matrix();
            let u0 = problems::build(problem).initial_state().clone();
            t_grid
                .iter()
                .map(|&t| {
                    if t == 0.0 {
                        Ok(u0.clone())
                    } else {
                        Ok(StateVector::new(expm(&a.scaled(t))?.mat_vec(u0.as_slice())))
                    }
                })
                .collect()
        }
        ReferenceKind::FineRk => {
            if fine_step.is_nan() || fine_step <= 0.0 {
                return Err(MerkError::ContractViolation("reference micro step must be positive"));
            }
            let p = problems::build(problem);
            let ck = tableau::cash_karp5();
            let s = ck.stages();
            let mut u = p.initial_state().clone();
            let mut t = p.time_span().0;
            let mut out = Vec::with_capacity(t_grid.len());
            let mut k: Vec<StateVector> = Vec::with_capacity(s);
            for &target in t_grid {
                if target < t - 1e-12 {
                    return Err(MerkError::ContractViolation("reference grid must be ascending"));
                }
                let span = target - t;
                if span > 1e-14 {
                    let steps = (fmath::ceil(span / fine_step - 1e-9) as usize).max(1);
                    let h = span / steps as f64;
                    for step in 0..steps {
                        let t_step = t + span * (step as f64 / steps as f64);
                        k.clear();
                        for i in 0..s {
                            let mut y = u.clone();
                            for (j, kj) in k.iter().enumerate().take(i) {
                                let aij = ck.coeff(i, j);
                                if aij != 0.0 {
                                    y.add_scaled(h * aij, kj);
                                }
                            }
                            k.push(p.evaluate_full_rhs(t_step + ck.node(i) * h, &y)?);
                        }
                        for (i, ki) in k.iter().enumerate() {
                            let bi = ck.weight(i);
                            if bi != 0.0 {
                                u.add_scaled(h * bi, ki);
                            }
                        }
                    }
                    t = target;
                }
                out.push(u.clone());
            }
            Ok(out)
        }
    }
}

/// Reference source that recomputes on every request.
pub struct ComputedReference {
    pub fine_step: f64,
}

impl Default for ComputedReference {
    fn default() -> Self {
        ComputedReference { fine_step: DEFAULT_FINE_REFERENCE_STEP }
    }
}

impl ReferenceSource for ComputedReference {
    fn trajectory(&self, problem: ProblemId, t_grid: &[f64]) -> Result<Vec<StateVector>, MerkError> {
        reference_trajectory(problem, t_grid, self.fine_step)
    }
}

/// Reference precomputed once on the union of several macro grids and
/// served by lookup, so a whole H sweep costs one fine integration.
pub struct PreparedReference {
    problem: ProblemId,
    times: Vec<f64>,
    states: Vec<StateVector>,
}

impl PreparedReference {
    /// Union time grid of all macro grids of `macro_steps` over the problem
    /// span (plus t0), deduplicated.
    pub fn union_grid(problem: ProblemId, macro_steps: &[f64]) -> Result<Vec<f64>, MerkError> {
        let p = problems::build(problem);
        let (t0, t_end) = p.time_span();
        let mut times = alloc::vec![t0];
        for &h in macro_steps {
            let n = macro_step_count(t0, t_end, h)?;
            for i in 1..=n {
                times.push(t0 + i as f64 * h);
            }
        }
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        times.dedup_by(|a, b| fmath::abs(*a - *b) <= 1e-12 * fmath::abs(*a).max(1.0));
        Ok(times)
    }

    pub fn prepare(
        problem: ProblemId,
        macro_steps: &[f64],
        fine_step: f64,
    ) -> Result<Self, MerkError> {
        let times = Self::union_grid(problem, macro_steps)?;
        let states = reference_trajectory(problem, &times, fine_step)?;
        Ok(PreparedReference { problem, times, states })
    }

    /// Rebuilds from externally stored data (e.g. a disk cache).
    pub fn from_parts(problem: ProblemId, times: Vec<f64>, states: Vec<StateVector>) -> Self {
        assert_eq!(times.len(), states.len());
        PreparedReference { problem, times, states }
    }

    pub fn parts(&self) -> (&[f64], &[StateVector]) {
        (&self.times, &self.states)
    }

    pub fn problem(&self) -> ProblemId {
        self.problem
    }
}

impl ReferenceSource for PreparedReference {
    fn trajectory(&self, problem: ProblemId, t_grid: &[f64]) -> Result<Vec<StateVector>, MerkError> {
        if problem != self.problem {
            return Err(MerkError::ContractViolation("prepared reference is for another problem"));
        }
        t_grid
            .iter()
            .map(|&t| {
                let idx = self
                    .times
                    .partition_point(|&x| x < t - 1e-12 * fmath::abs(t).max(1.0));
                if idx < self.times.len()
                    && fmath::abs(self.times[idx] - t) <= 1e-9 * fmath::abs(t).max(1.0)
                {
                    Ok(self.states[idx].clone())
                } else {
                    Err(MerkError::ContractViolation("time missing from prepared reference grid"))
                }
            })
            .collect()
    }
}

/// Macro grid (including t0) for one H value.
pub fn macro_grid(problem: ProblemId, h_macro: f64) -> Result<Vec<f64>, MerkError> {
    let p = problems::build(problem);
    let (t0, t_end) = p.time_span();
    let n = macro_step_count(t0, t_end, h_macro)?;
    Ok((0..=n).map(|i| t0 + i as f64 * h_macro).collect())
}

/// Runs one (method, problem, H, m, q, r) measurement on a fresh problem
/// instance: reset counters, integrate, compare against the reference.
pub fn run_row(
    method: Method,
    problem: ProblemId,
    h_macro: f64,
    m: u32,
    q: u32,
    r: u32,
    reference: &[StateVector],
) -> Result<ReportRow, MerkError> {
    let p = problems::build(problem);
    p.counters_reset();
    let trajectory = match method {
        Method::MisKw3 => mis_integrate(&mis_kw3(), &p, h_macro, m)?,
        _ => {
            let s = match method {
                Method::Merk2 => scheme::merk2(),
                Method::Merk3 => scheme::merk3(),
                Method::Merk4 => scheme::merk4(),
                Method::Merk5 => scheme::merk5(),
                Method::MisKw3 => unreachable!(),
            };
            let stage_tab = tableau::by_order(q)
                .ok_or(MerkError::ContractViolation("no inner tableau of the requested order q"))?;
            let final_tab = tableau::by_order(r)
                .ok_or(MerkError::ContractViolation("no inner tableau of the requested order r"))?;
            merk_integrate(&s, &p, &stage_tab, &final_tab, h_macro, m)?
        }
    };
    let max_error = max_abs_error(&trajectory, reference)?;
    let c = p.counters_snapshot();
    Ok(ReportRow {
        macro_h: h_macro,
        micro_h: h_macro / m as f64,
        m,
        max_error,
        slow_calls: c.slow_calls,
        fast_calls: c.fast_calls,
    })
}

fn check_policy(problem: ProblemId, policy: StepPolicy) -> Result<(), MerkError> {
    match (problems::spec_of(problem).category, policy) {
        (Category::I, StepPolicy::FixedH(_)) | (Category::II, StepPolicy::FixedM(_)) => Ok(()),
        (Category::I, StepPolicy::FixedM(_)) => {
            Err(MerkError::ContractViolation("category-I problems use the fixed-h policy"))
        }
        (Category::II, StepPolicy::FixedH(_)) => {
            Err(MerkError::ContractViolation("category-II problems use the fixed-m policy"))
        }
    }
}

/// Runs a convergence study: one row per macro step, then a rate fit.
pub fn run_convergence(
    config: &StudyConfig,
    reference: &dyn ReferenceSource,
) -> Result<ConvergenceReport, MerkError> {
    if config.macro_steps.len() < 4 {
        return Err(MerkError::ContractViolation("rate fitting needs at least 4 macro steps"));
    }
    check_policy(config.problem, config.policy)?;
    let (q, r) = config.orders();
    let mut rows = Vec::with_capacity(config.macro_steps.len());
    for &h in &config.macro_steps {
        let m = config.policy.separation_factor(h)?;
        let grid = macro_grid(config.problem, h)?;
        let ref_states = reference.trajectory(config.problem, &grid)?;
        rows.push(run_row(config.method, config.problem, h, m, q, r, &ref_states)?);
    }
    let floor_cutoff = default_floor(problems::spec_of(config.problem).reference);
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.macro_h, r.max_error)).collect();
    let best_fit_rate = fit_rate(&points, floor_cutoff)?;
    Ok(ConvergenceReport {
        method: config.method,
        problem: config.problem,
        policy: config.policy,
        q,
        r,
        rows,
        best_fit_rate,
        floor_cutoff,
    })
}

/// The (q, r) grid of the inner-order study for a method of order p:
/// (p-1, p-1), (p, p-1), (p-1, p), (p, p), (p+1, p+1).
pub fn inner_order_pairs(p: u32) -> [(u32, u32); 5] {
    [(p - 1, p - 1), (p, p - 1), (p - 1, p), (p, p), (p + 1, p + 1)]
}

/// Separation factors used for the bi-directional study (the balanced
/// values selected by the m-sweep procedure).
pub fn bidirectional_default_m(method: Method) -> u32 {
    match method {
        Method::Merk2 => 50,
        Method::Merk3 => 50,
        Method::Merk4 => 50,
        Method::Merk5 => 10,
        Method::MisKw3 => 25,
    }
}

/// One line of the inner-order study.
#[derive(Clone, Copy, Debug)]
pub struct InnerOrderRow {
    pub q: u32,
    pub r: u32,
    pub observed_order: f64,
}

/// Reruns the bi-directional convergence study for each (q, r) pair.
pub fn run_inner_order_study(
    method: Method,
    pairs: &[(u32, u32)],
    macro_steps: &[f64],
    reference: &dyn ReferenceSource,
) -> Result<Vec<InnerOrderRow>, MerkError> {
    if matches!(method, Method::MisKw3) {
        return Err(MerkError::ContractViolation("the inner-order study applies to MERK methods"));
    }
    let mut out = Vec::with_capacity(pairs.len());
    for &(q, r) in pairs {
        let config = StudyConfig {
            method,
            problem: ProblemId::BiDirectional,
            policy: StepPolicy::FixedM(bidirectional_default_m(method)),
            macro_steps: macro_steps.to_vec(),
            inner_orders: Some((q, r)),
        };
        let report = run_convergence(&config, reference)?;
        out.push(InnerOrderRow { q, r, observed_order: report.best_fit_rate });
    }
    Ok(out)
}

/// Error-vs-H curve for one separation factor.
#[derive(Clone, Debug)]
pub struct MsweepCurve {
    pub m: u32,
    pub rows: Vec<ReportRow>,
}

/// m-sweep result: per-m curves and the selected factor.
#[derive(Clone, Debug)]
pub struct MsweepReport {
    pub method: Method,
    pub problem: ProblemId,
    pub curves: Vec<MsweepCurve>,
    /// Smallest m whose error curve stays within the envelope factor of the
    /// pointwise-best envelope (the slow-only efficiency reading).
    pub slow_pick: u32,
    /// Largest m whose curve stays cost-competitive in total calls (the
    /// total-efficiency reading).
    pub total_pick: u32,
    /// The final selection (the slow-only pick; it wins on disagreement).
    pub selected_m: u32,
    pub agreed: bool,
}

/// Envelope factor of the m-selection rule.
pub const MSWEEP_ENVELOPE_FACTOR: f64 = 1.5;
/// Cost slack when testing total-calls competitiveness.
const MSWEEP_COST_SLACK: f64 = 1.05;

fn msweep_select(curves: &[MsweepCurve], floor: f64) -> (u32, u32) {
    let n_h = curves[0].rows.len();
    let clamped = |row: &ReportRow| row.max_error.max(floor);
    let mut envelope = alloc::vec![f64::INFINITY; n_h];
    for curve in curves {
        for (i, row) in curve.rows.iter().enumerate() {
            envelope[i] = envelope[i].min(clamped(row));
        }
    }
    // Slow-only reading: slow calls depend on H alone, so curves of
    // sufficiently large m coincide with the envelope; pick the smallest m
    // that stays within the factor everywhere.
    let slow_pick = curves
        .iter()
        .find(|c| {
            c.rows
                .iter()
                .enumerate()
                .all(|(i, row)| clamped(row) <= MSWEEP_ENVELOPE_FACTOR * envelope[i])
        })
        .map(|c| c.m)
        .unwrap_or_else(|| curves.last().expect("at least one curve").m);
    // Total reading: a point is competitive when no other point reaches a
    // substantially smaller error at no more total cost; the optimal m is
    // the largest whose whole curve stays competitive.
    let mut total_pick = curves[0].m;
    for curve in curves {
        let competitive = curve.rows.iter().all(|row| {
            let err = clamped(row);
            if err <= floor * MSWEEP_ENVELOPE_FACTOR {
                return true; // at the reference floor everything ties
            }
            !curves.iter().any(|other| {
                other.rows.iter().any(|cand| {
                    (cand.total_calls() as f64) <= MSWEEP_COST_SLACK * row.total_calls() as f64
                        && clamped(cand) * MSWEEP_ENVELOPE_FACTOR <= err
                })
            })
        });
        if competitive {
            total_pick = total_pick.max(curve.m);
        }
    }
    (slow_pick, total_pick)
}

/// Runs the m-sweep procedure on a category-II problem and applies the
/// balanced-error selection rule.
pub fn run_msweep(
    method: Method,
    problem: ProblemId,
    m_list: &[u32],
    macro_steps: &[f64],
    reference: &dyn ReferenceSource,
) -> Result<MsweepReport, MerkError> {
    if problems::spec_of(problem).category != Category::II {
        return Err(MerkError::ContractViolation("the m-sweep applies to category-II problems"));
    }
    if m_list.is_empty() {
        return Err(MerkError::ContractViolation("m list must not be empty"));
    }
    let mut m_sorted: Vec<u32> = m_list.to_vec();
    m_sorted.sort_unstable();
    let (q, r) = (method.order(), method.order());
    let mut curves = Vec::with_capacity(m_sorted.len());
    for &m in &m_sorted {
        let mut rows = Vec::with_capacity(macro_steps.len());
        for &h in macro_steps {
            let grid = macro_grid(problem, h)?;
            let ref_states = reference.trajectory(problem, &grid)?;
            rows.push(run_row(method, problem, h, m, q, r, &ref_states)?);
        }
        curves.push(MsweepCurve { m, rows });
    }
    Ok(msweep_from_curves(method, problem, curves))
}

/// Applies the balanced-m selection rule to precomputed curves (the sweep
/// rows may have been measured by an external runner).
pub fn msweep_from_curves(
    method: Method,
    problem: ProblemId,
    curves: Vec<MsweepCurve>,
) -> MsweepReport {
    assert!(!curves.is_empty(), "selection needs at least one curve");
    let floor = default_floor(problems::spec_of(problem).reference);
    let (slow_pick, total_pick) = msweep_select(&curves, floor);
    MsweepReport {
        method,
        problem,
        curves,
        slow_pick,
        total_pick,
        selected_m: slow_pick,
        agreed: slow_pick == total_pick,
    }
}

/// Default macro-step sweeps per problem: geometric sequences with ratio 2
/// spanning the asymptotic regime of each test.
pub fn default_macro_steps(problem: ProblemId) -> Vec<f64> {
    match problem {
        // t in (0, 3], fixed h = 1e-3. The window is coarse: the initial
        // profile violates the Neumann condition, so the trajectory has a
        // short square-root-in-time transient whose first-step error
        // (~H^1.4) overtakes the H^p error of the higher-order methods
        // below H ~ 0.2.
        ProblemId::ReactionDiffusion => geometric(3.0, 4),
        // t in (0, 2], fixed h = 1e-3.
        ProblemId::Brusselator => geometric(0.1, 5),
        // t in (0, 1].
        ProblemId::OneDirectional => geometric(0.1, 6),
        // t in (0, 2].
        ProblemId::BiDirectional => geometric(0.02, 6),
    }
}

/// Default micro step for category-I problems (CFL-stable for both stiff
/// tests).
pub const DEFAULT_STIFF_MICRO_STEP: f64 = 1e-3;

/// The m grid of the m-sweep procedure.
pub const DEFAULT_MSWEEP_FACTORS: [u32; 8] = [5, 10, 25, 50, 75, 85, 100, 125];

fn geometric(start: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start / (1u64 << k) as f64).collect()
}
