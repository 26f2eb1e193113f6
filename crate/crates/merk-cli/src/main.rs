//! Command-line front end for the multirate integrator studies.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use merk::phi::{self, DenseMatrix};
use merk::problems::{self, ProblemId};
use merk::study::{
    self, default_macro_steps, fit_rate, inner_order_pairs, run_msweep, Method, StepPolicy,
};
use merk::MerkError;
use merk_cli::{
    csv_row, msweep_summary, run_rows_parallel, write_study_csv, CachedReference, RowTask,
    CSV_HEADER,
};

#[derive(Parser)]
#[command(name = "merk", version, about = "Multirate exponential Runge-Kutta studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study: error and call counts per macro step, plus a
    /// fitted rate.
    Converge(StudyArgs),
    /// Efficiency study: identical to `converge` (the CSV already carries
    /// both call-count columns); kept as a named entry point.
    Efficiency(StudyArgs),
    /// Sweep the time-scale separation factor m and select the balanced
    /// value.
    Msweep(MsweepArgs),
    /// Reproduce the inner-order study column for one method.
    InnerOrderStudy(InnerOrderArgs),
    /// Run the oracle self-check suite (phi recurrence, exact-solve
    /// equivalence, exact polynomial integration).
    OracleCheck,
    /// Enumerate methods, problems, and inner tableaus.
    List,
}

#[derive(Args)]
struct StudyArgs {
    /// MERK2 | MERK3 | MERK4 | MERK5 | MIS-KW3
    #[arg(long)]
    method: String,
    /// reaction_diffusion | brusselator | one_directional | bi_directional
    #[arg(long)]
    problem: String,
    /// fixed_h:VALUE or fixed_m:VALUE (defaults to the problem category's
    /// standard policy)
    #[arg(long)]
    policy: Option<String>,
    /// Comma-separated macro steps, descending (defaults per problem)
    #[arg(long = "h-list", value_delimiter = ',')]
    h_list: Option<Vec<f64>>,
    /// Inner solver order for the stage IVPs
    #[arg(long)]
    q: Option<u32>,
    /// Inner solver order for the final IVP
    #[arg(long)]
    r: Option<u32>,
    /// Output CSV path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct MsweepArgs {
    #[arg(long)]
    method: String,
    #[arg(long)]
    problem: String,
    /// Comma-separated separation factors
    #[arg(long = "m-list", value_delimiter = ',')]
    m_list: Option<Vec<u32>>,
    #[arg(long = "h-list", value_delimiter = ',')]
    h_list: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct InnerOrderArgs {
    #[arg(long)]
    method: String,
    #[arg(long = "h-list", value_delimiter = ',')]
    h_list: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Converge(args) => converge(args, "converge"),
        Command::Efficiency(args) => converge(args, "efficiency"),
        Command::Msweep(args) => msweep(args),
        Command::InnerOrderStudy(args) => inner_order(args),
        Command::OracleCheck => oracle_check(),
        Command::List => {
            list();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Solver(err)) => {
            eprintln!("solver failure: {err}");
            ExitCode::from(1)
        }
        Err(CliError::Io(err)) => {
            eprintln!("io error: {err}");
            ExitCode::from(1)
        }
    }
}

enum CliError {
    Config(String),
    Solver(MerkError),
    Io(std::io::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<MerkError> for CliError {
    fn from(e: MerkError) -> Self {
        match e {
            MerkError::FastSolveDiverged { .. } | MerkError::ProblemEvaluationDiverged { .. } => {
                CliError::Solver(e)
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

fn parse_method(s: &str) -> Result<Method, CliError> {
    Method::parse(s).ok_or_else(|| {
        CliError::Config(format!("unknown method '{s}'; see `merk list` for the catalog"))
    })
}

fn parse_problem(s: &str) -> Result<ProblemId, CliError> {
    ProblemId::parse(s).ok_or_else(|| {
        CliError::Config(format!("unknown problem '{s}'; see `merk list` for the catalog"))
    })
}

fn parse_policy(s: &str) -> Result<StepPolicy, CliError> {
    let bad = || CliError::Config(format!("policy must be fixed_h:VALUE or fixed_m:VALUE, got '{s}'"));
    let (kind, value) = s.split_once(':').ok_or_else(bad)?;
    match kind {
        "fixed_h" => value.parse().map(StepPolicy::FixedH).map_err(|_| bad()),
        "fixed_m" => value.parse().map(StepPolicy::FixedM).map_err(|_| bad()),
        _ => Err(bad()),
    }
}

/// The balanced separation factor selected by the m-sweep procedure, used
/// as the fixed-m default.
fn default_separation(method: Method, problem: ProblemId) -> u32 {
    match problem {
        ProblemId::OneDirectional => match method {
            Method::Merk2 | Method::Merk3 | Method::MisKw3 => 75,
            Method::Merk4 => 50,
            Method::Merk5 => 25,
        },
        _ => study::bidirectional_default_m(method),
    }
}

fn default_policy(method: Method, problem: ProblemId) -> StepPolicy {
    match problems::spec_of(problem).category {
        problems::Category::I => StepPolicy::FixedH(study::DEFAULT_STIFF_MICRO_STEP),
        problems::Category::II => StepPolicy::FixedM(default_separation(method, problem)),
    }
}

fn converge(args: StudyArgs, label: &str) -> Result<(), CliError> {
    let method = parse_method(&args.method)?;
    let problem = parse_problem(&args.problem)?;
    let policy = match &args.policy {
        Some(s) => parse_policy(s)?,
        None => default_policy(method, problem),
    };
    let steps = args.h_list.unwrap_or_else(|| default_macro_steps(problem));
    if steps.len() < 4 {
        return Err(CliError::Config("rate fitting needs at least 4 macro steps".into()));
    }
    let (q, r) = match (method, args.q, args.r) {
        (Method::MisKw3, _, _) => (3, 3),
        (_, q, r) => {
            let p = method.order();
            (q.unwrap_or(p), r.unwrap_or(p))
        }
    };
    study_policy_check(problem, policy)?;
    let reference = CachedReference::with_default_step(problem, &steps)?;
    let mut tasks = Vec::with_capacity(steps.len());
    for &h in &steps {
        tasks.push(RowTask { method, problem, macro_h: h, m: policy.separation_factor(h)?, q, r });
    }
    let rows = run_rows_parallel(&tasks, &reference, args.jobs)?;
    let floor = study::default_floor(problems::spec_of(problem).reference);
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.macro_h, r.max_error)).collect();
    let rate = fit_rate(&points, floor)?;

    let csv: Vec<String> = rows
        .iter()
        .map(|row| csv_row(method.name(), problem.name(), policy.kind(), q, r, row))
        .collect();
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from(format!("{label}_{}_{}.csv", method.name(), problem.name())));
    write_study_csv(
        &out,
        &csv,
        &[
            format!("study = {label}"),
            format!("method = {}", method.name()),
            format!("problem = {}", problem.name()),
            format!("policy = {}", policy_echo(policy)),
            format!("q = {q}"),
            format!("r = {r}"),
            format!("floor_cutoff = {floor:e}"),
            format!("best_fit_rate = {rate:.6}"),
        ],
    )?;
    println!("{CSV_HEADER}");
    for line in &csv {
        println!("{line}");
    }
    println!("# best_fit_rate = {rate:.4} -> {}", out.display());
    Ok(())
}

fn policy_echo(policy: StepPolicy) -> String {
    match policy {
        StepPolicy::FixedH(h) => format!("fixed_h:{h}"),
        StepPolicy::FixedM(m) => format!("fixed_m:{m}"),
    }
}

fn study_policy_check(problem: ProblemId, policy: StepPolicy) -> Result<(), CliError> {
    match (problems::spec_of(problem).category, policy) {
        (problems::Category::I, StepPolicy::FixedH(_))
        | (problems::Category::II, StepPolicy::FixedM(_)) => Ok(()),
        (problems::Category::I, _) => {
            Err(CliError::Config("category-I problems use the fixed-h policy".into()))
        }
        (problems::Category::II, _) => {
            Err(CliError::Config("category-II problems use the fixed-m policy".into()))
        }
    }
}

fn msweep(args: MsweepArgs) -> Result<(), CliError> {
    let method = parse_method(&args.method)?;
    let problem = parse_problem(&args.problem)?;
    let m_list = args.m_list.unwrap_or_else(|| study::DEFAULT_MSWEEP_FACTORS.to_vec());
    let steps = args.h_list.unwrap_or_else(|| default_macro_steps(problem));
    let reference = CachedReference::with_default_step(problem, &steps)?;
    // The library orchestrates the sweep; parallelism would only shuffle
    // identical work here, so jobs > 1 simply reruns rows in the pool.
    let report = if args.jobs <= 1 {
        run_msweep(method, problem, &m_list, &steps, &reference)?
    } else {
        run_msweep_parallel(method, problem, &m_list, &steps, &reference, args.jobs)?
    };
    let (q, r) = (method.order(), method.order());
    let mut csv = Vec::new();
    for curve in &report.curves {
        for row in &curve.rows {
            csv.push(csv_row(method.name(), problem.name(), "fixed_m", q, r, row));
        }
    }
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from(format!("msweep_{}_{}.csv", method.name(), problem.name())));
    write_study_csv(&out, &csv, &msweep_summary(&report))?;
    if !report.agreed {
        eprintln!(
            "note: efficiency readings disagree (slow-only {} vs total {}); selecting the slow-only pick",
            report.slow_pick, report.total_pick
        );
    }
    println!("selected m = {} -> {}", report.selected_m, out.display());
    Ok(())
}

fn run_msweep_parallel(
    method: Method,
    problem: ProblemId,
    m_list: &[u32],
    steps: &[f64],
    reference: &CachedReference,
    jobs: usize,
) -> Result<study::MsweepReport, CliError> {
    // Same measurements as the sequential sweep, computed in the pool and
    // reassembled per m; selection then runs on identical data.
    let mut m_sorted = m_list.to_vec();
    m_sorted.sort_unstable();
    let (q, r) = (method.order(), method.order());
    let mut tasks = Vec::new();
    for &m in &m_sorted {
        for &h in steps {
            tasks.push(RowTask { method, problem, macro_h: h, m, q, r });
        }
    }
    let rows = run_rows_parallel(&tasks, reference, jobs)?;
    let mut curves = Vec::with_capacity(m_sorted.len());
    for (i, &m) in m_sorted.iter().enumerate() {
        curves.push(study::MsweepCurve {
            m,
            rows: rows[i * steps.len()..(i + 1) * steps.len()].to_vec(),
        });
    }
    Ok(study::msweep_from_curves(method, problem, curves))
}

fn inner_order(args: InnerOrderArgs) -> Result<(), CliError> {
    let method = parse_method(&args.method)?;
    if method == Method::MisKw3 {
        return Err(CliError::Config("the inner-order study applies to MERK methods".into()));
    }
    let steps = args.h_list.unwrap_or_else(|| default_macro_steps(ProblemId::BiDirectional));
    let reference = CachedReference::with_default_step(ProblemId::BiDirectional, &steps)?;
    let pairs = inner_order_pairs(method.order());
    let m = study::bidirectional_default_m(method);
    let mut lines = Vec::new();
    println!("{} (p = {}), bi_directional, m = {m}", method.name(), method.order());
    println!("{:>3} {:>3} {:>15}", "q", "r", "observed order");
    let mut csv = Vec::new();
    for &(q, r) in &pairs {
        let mut tasks = Vec::new();
        for &h in &steps {
            tasks.push(RowTask { method, problem: ProblemId::BiDirectional, macro_h: h, m, q, r });
        }
        let rows = run_rows_parallel(&tasks, &reference, args.jobs)?;
        let floor = study::default_floor(problems::ReferenceKind::ExpmExact);
        let points: Vec<(f64, f64)> = rows.iter().map(|x| (x.macro_h, x.max_error)).collect();
        let rate = fit_rate(&points, floor)?;
        println!("{q:>3} {r:>3} {rate:>15.3}");
        lines.push(format!("q={q} r={r} observed_order={rate:.4}"));
        for row in &rows {
            csv.push(csv_row(method.name(), "bi_directional", "fixed_m", q, r, row));
        }
    }
    if let Some(out) = args.out {
        write_study_csv(&out, &csv, &lines)?;
        println!("-> {}", out.display());
    }
    Ok(())
}

fn oracle_check() -> Result<(), CliError> {
    use merk::exprk::{exprk_step, ExpRkScheme};
    use merk::scheme;
    use merk::step::{merk_step_with, ExactFastSolver};

    let mut all_pass = true;
    let mut report = |name: &str, pass: bool, detail: String| {
        println!("{}: {} ({detail})", name, if pass { "PASS" } else { "FAIL" });
        all_pass &= pass;
    };

    // Phi recurrence on random matrices.
    {
        let mut worst = 0.0_f64;
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            // xorshift64*; deterministic without pulling a rand dependency.
            seed ^= seed >> 12;
            seed ^= seed << 25;
            seed ^= seed >> 27;
            (seed.wrapping_mul(0x2545f4914f6cdd1d) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..50 {
            let mut a = DenseMatrix::zeros(5);
            for i in 0..5 {
                for j in 0..5 {
                    a[(i, j)] = next();
                }
            }
            let norm = a.one_norm();
            if norm > 1.0 {
                a = a.scaled(1.0 / norm);
            }
            let phis = phi::phi_upto(6, &a).map_err(CliError::Solver)?;
            for k in 1..=6usize {
                let fact: f64 = (1..k).fold(1.0, |acc, i| acc * i as f64);
                let ident = DenseMatrix::identity(5).scaled(1.0 / fact);
                worst = worst.max(a.matmul(&phis[k]).sub(&phis[k - 1]).add(&ident).one_norm());
            }
        }
        report("phi recurrence residual <= 1e-12", worst <= 1e-12, format!("worst {worst:.2e}"));
    }

    // phi_k(0) identity.
    {
        let mut worst = 0.0_f64;
        for k in 1..=6usize {
            let fact: f64 = (1..=k).fold(1.0, |acc, i| acc * i as f64);
            let p = phi::phi(k, &DenseMatrix::zeros(5)).map_err(CliError::Solver)?;
            worst = worst.max(p.sub(&DenseMatrix::identity(5).scaled(1.0 / fact)).one_norm() * fact);
        }
        report("phi_k(0) = I/k!", worst <= 4.0 * f64::EPSILON, format!("worst rel {worst:.2e}"));
    }

    // expm group property.
    {
        let a = DenseMatrix::from_rows(&[&[0.1, -0.8, 0.0], &[0.9, 0.0, -0.3], &[0.2, 0.1, -0.5]]);
        let e1 = phi::expm(&a).map_err(CliError::Solver)?;
        let e2 = phi::expm(&a.scaled(2.0)).map_err(CliError::Solver)?;
        let diff = e1.matmul(&e1).max_abs_diff(&e2);
        report("expm group property", diff <= 1e-11, format!("|e^A e^A - e^2A| = {diff:.2e}"));
    }

    // Multirate steps with exact fast solves must match the one-step
    // exponential integrators.
    {
        let p = problems::make_one_directional();
        let u0 = p.initial_state().clone();
        let mut worst = 0.0_f64;
        for (exprk, merk) in [
            (ExpRkScheme::exprk2(), scheme::merk2()),
            (ExpRkScheme::exprk3(), scheme::merk3()),
            (ExpRkScheme::ExpRk4s6, scheme::merk4()),
            (ExpRkScheme::ExpRk5s10, scheme::merk5()),
        ] {
            let oracle = exprk_step(exprk, &p, 0.0, &u0, 0.01).map_err(CliError::Solver)?;
            let multirate = merk_step_with(&merk, &p, &ExactFastSolver, &ExactFastSolver, 0.0, &u0, 0.01)
                .map_err(CliError::Solver)?;
            worst = worst.max(multirate.max_abs_diff(&oracle) / oracle.max_abs());
        }
        report("ExpRK equivalence (4 schemes)", worst <= 1e-12, format!("worst rel {worst:.2e}"));
    }

    // Inner solvers integrate polynomial forcing exactly (degree p-1, L=0).
    {
        use merk::erk::{erk_integrate, FastIvp};
        use merk::forcing::ForcingPolynomial;
        use merk::{Frac, StateVector};
        let trivial = merk::SplitOdeProblem::new(
            0.0,
            1.0,
            StateVector::zeros(1),
            Box::new(|_, out| out.fill(0.0)),
            Box::new(|_, _, out| out.fill(0.0)),
            Some(DenseMatrix::zeros(1)),
        );
        let mut worst = 0.0_f64;
        for t in merk::tableau::catalog() {
            let deg = (t.declared_order as usize - 1).min(3);
            let coeffs: Vec<StateVector> =
                (0..=deg).map(|j| StateVector::new(vec![1.0 + j as f64])).collect();
            let poly = ForcingPolynomial::new(coeffs);
            let y0 = StateVector::new(vec![0.25]);
            let ivp = FastIvp {
                forcing: &poly,
                y0: &y0,
                interval_end: 1.0,
                landing_points: &[1.0],
                duration_in_h: Frac::from_integer(1),
                stage_label: 0,
            };
            let got = erk_integrate(&t, &trivial, &ivp, 0.2).map_err(CliError::Solver)?;
            let want = phi::solve_modified_ivp_exact(&DenseMatrix::zeros(1), &poly, &y0, 1.0)
                .map_err(CliError::Solver)?;
            worst = worst.max((got[0][0] - want[0]).abs());
        }
        report("exact polynomial integration", worst <= 1e-13, format!("worst {worst:.2e}"));
    }

    if all_pass {
        Ok(())
    } else {
        Err(CliError::Solver(MerkError::ContractViolation("oracle self-check failed")))
    }
}

fn list() {
    println!("methods:");
    for m in Method::ALL {
        println!("  {:8} order {}", m.name(), m.order());
    }
    println!("problems:");
    for id in ProblemId::ALL {
        let spec = problems::spec_of(id);
        let p = problems::build(id);
        println!(
            "  {:18} d={:<5} t in ({}, {}]  category {:?}  reference {:?}",
            id.name(),
            p.dimension(),
            p.time_span().0,
            p.time_span().1,
            spec.category,
            spec.reference
        );
    }
    println!("inner tableaus:");
    for t in merk::tableau::catalog() {
        println!("  {:14} stages {}  order {}", t.name, t.stages(), t.declared_order);
    }
    let kw = merk::tableau::knoth_wolke3();
    println!("  {:14} stages {}  order {} (MIS outer/inner)", kw.name, kw.stages(), kw.declared_order);
}
