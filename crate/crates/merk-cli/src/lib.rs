//! File formats, reference caching, and parallel study execution for the
//! `merk` library.
//!
//! The CSV schema shared by all studies is:
//!
//! ```text
//! method,problem,policy,H,h,m,q,r,max_error,slow_calls,fast_calls,total_calls
//! ```
//!
//! one row per (method, H, m) measurement. A sidecar text file next to each
//! CSV records the configuration echo and the fitted rates. Fine-RK
//! reference trajectories are cached on disk keyed by problem, reference
//! step, and time grid; set `MERK_REF_CACHE` to relocate the cache
//! directory (defaults to `./.merk-ref-cache`).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use merk::problems::{self, ProblemId, ReferenceKind};
use merk::study::{
    macro_grid, run_row, MsweepReport, PreparedReference, ReferenceSource, ReportRow,
    DEFAULT_FINE_REFERENCE_STEP,
};
use merk::{MerkError, StateVector};

/// Header of every study CSV, in exact column order.
pub const CSV_HEADER: &str = "method,problem,policy,H,h,m,q,r,max_error,slow_calls,fast_calls,total_calls";

/// One CSV row; `policy` is `fixed_h` or `fixed_m`.
pub fn csv_row(
    method: &str,
    problem: &str,
    policy: &str,
    q: u32,
    r: u32,
    row: &ReportRow,
) -> String {
    format!(
        "{method},{problem},{policy},{H},{h},{m},{q},{r},{err:e},{slow},{fast},{total}",
        H = row.macro_h,
        h = row.micro_h,
        m = row.m,
        err = row.max_error,
        slow = row.slow_calls,
        fast = row.fast_calls,
        total = row.total_calls(),
    )
}

/// Writes a CSV plus its sidecar; `sidecar_lines` typically carries the
/// config echo and fitted rates.
pub fn write_study_csv(
    path: &Path,
    rows: &[String],
    sidecar_lines: &[String],
) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut out = String::with_capacity(rows.len() * 64);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    fs::write(path, out)?;
    let mut sidecar = PathBuf::from(path);
    sidecar.set_extension("rate.txt");
    let mut f = fs::File::create(sidecar)?;
    for line in sidecar_lines {
        writeln!(f, "{line}")?;
    }
    Ok(())
}

fn cache_dir() -> PathBuf {
    std::env::var_os("MERK_REF_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".merk-ref-cache"))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn grid_key(times: &[f64]) -> u64 {
    let mut bytes = Vec::with_capacity(times.len() * 8);
    for t in times {
        bytes.extend_from_slice(&t.to_bits().to_le_bytes());
    }
    fnv1a(&bytes)
}

/// Disk-backed reference provider.
///
/// Cache files are plain text: a header line
/// `merk-ref v1 <problem> <fine_step_bits> <points> <dim>` followed by one
/// line per time point holding the hex bit patterns of the time and the
/// state components. Bit-exact round trips; the format is a cache, not an
/// interchange contract.
pub struct CachedReference {
    inner: PreparedReference,
}

impl CachedReference {
    /// Loads the reference for this problem/grid from the cache or computes
    /// and stores it. Analytic and expm references are cheap and never
    /// cached.
    pub fn prepare(
        problem: ProblemId,
        macro_steps: &[f64],
        fine_step: f64,
    ) -> Result<Self, MerkError> {
        if problems::spec_of(problem).reference != ReferenceKind::FineRk {
            let inner = PreparedReference::prepare(problem, macro_steps, fine_step)?;
            return Ok(CachedReference { inner });
        }
        let times = PreparedReference::union_grid(problem, macro_steps)?;
        let path = cache_dir().join(format!(
            "{}_h{:016x}_g{:016x}.ref",
            problem.name(),
            fine_step.to_bits(),
            grid_key(&times)
        ));
        if let Some(inner) = load_cache(&path, problem, &times) {
            return Ok(CachedReference { inner });
        }
        let inner = PreparedReference::prepare(problem, macro_steps, fine_step)?;
        let _ = store_cache(&path, fine_step, &inner);
        Ok(CachedReference { inner })
    }

    pub fn with_default_step(problem: ProblemId, macro_steps: &[f64]) -> Result<Self, MerkError> {
        Self::prepare(problem, macro_steps, DEFAULT_FINE_REFERENCE_STEP)
    }
}

impl ReferenceSource for CachedReference {
    fn trajectory(&self, problem: ProblemId, t_grid: &[f64]) -> Result<Vec<StateVector>, MerkError> {
        self.inner.trajectory(problem, t_grid)
    }
}

fn load_cache(path: &Path, problem: ProblemId, want_times: &[f64]) -> Option<PreparedReference> {
    let text = fs::read_to_string(path).ok()?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next()?.split(' ').collect();
    if header.len() != 6 || header[0] != "merk-ref" || header[1] != "v1" || header[2] != problem.name() {
        return None;
    }
    let points: usize = header[4].parse().ok()?;
    let dim: usize = header[5].parse().ok()?;
    if points != want_times.len() {
        return None;
    }
    let mut times = Vec::with_capacity(points);
    let mut states = Vec::with_capacity(points);
    for line in lines.take(points) {
        let mut words = line.split(' ');
        let t = f64::from_bits(u64::from_str_radix(words.next()?, 16).ok()?);
        let mut u = Vec::with_capacity(dim);
        for w in words {
            u.push(f64::from_bits(u64::from_str_radix(w, 16).ok()?));
        }
        if u.len() != dim {
            return None;
        }
        times.push(t);
        states.push(StateVector::new(u));
    }
    if times.len() != points || times != want_times {
        return None;
    }
    Some(PreparedReference::from_parts(problem, times, states))
}

fn store_cache(path: &Path, fine_step: f64, reference: &PreparedReference) -> std::io::Result<()> {
    fs::create_dir_all(cache_dir())?;
    let (times, states) = reference.parts();
    let dim = states.first().map(|s| s.dim()).unwrap_or(0);
    let mut out = String::new();
    out.push_str(&format!(
        "merk-ref v1 {} {:016x} {} {}\n",
        reference.problem().name(),
        fine_step.to_bits(),
        times.len(),
        dim
    ));
    for (t, u) in times.iter().zip(states.iter()) {
        out.push_str(&format!("{:016x}", t.to_bits()));
        for x in u.as_slice() {
            out.push_str(&format!(" {:016x}", x.to_bits()));
        }
        out.push('\n');
    }
    fs::write(path, out)
}

/// One unit of study work: a (H, m) measurement with fixed inner orders.
#[derive(Clone, Copy, Debug)]
pub struct RowTask {
    pub method: merk::study::Method,
    pub problem: ProblemId,
    pub macro_h: f64,
    pub m: u32,
    pub q: u32,
    pub r: u32,
}

/// Runs tasks on up to `jobs` worker threads; results keep task order, so
/// output is byte-identical regardless of parallelism. Each task builds its
/// own problem instance and owns its counters.
pub fn run_rows_parallel(
    tasks: &[RowTask],
    reference: &(dyn ReferenceSource + Sync),
    jobs: usize,
) -> Result<Vec<ReportRow>, MerkError> {
    let jobs = jobs.max(1);
    if jobs == 1 || tasks.len() <= 1 {
        return tasks.iter().map(|t| run_task(t, reference)).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<Result<ReportRow, MerkError>>>> =
        tasks.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(tasks.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= tasks.len() {
                    break;
                }
                *results[i].lock().unwrap() = Some(run_task(&tasks[i], reference));
            });
        }
    });
    results
        .into_iter()
        .map(|cell| cell.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

fn run_task(task: &RowTask, reference: &dyn ReferenceSource) -> Result<ReportRow, MerkError> {
    let grid = macro_grid(task.problem, task.macro_h)?;
    let refs = reference.trajectory(task.problem, &grid)?;
    run_row(task.method, task.problem, task.macro_h, task.m, task.q, task.r, &refs)
}

/// Formats the m-sweep selection summary for the sidecar.
pub fn msweep_summary(report: &MsweepReport) -> Vec<String> {
    let mut lines = vec![
        format!("method = {}", report.method.name()),
        format!("problem = {}", report.problem.name()),
        format!("slow_only_pick = {}", report.slow_pick),
        format!("total_calls_pick = {}", report.total_pick),
        format!("selected_m = {}", report.selected_m),
    ];
    if !report.agreed {
        lines.push(format!(
            "note: the two efficiency readings disagree ({} vs {}); the slow-only pick wins",
            report.slow_pick, report.total_pick
        ));
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use merk::study::Method;

    #[test]
    fn csv_row_layout() {
        let row = ReportRow {
            macro_h: 0.01,
            micro_h: 0.0002,
            m: 50,
            max_error: 1.5e-8,
            slow_calls: 1200,
            fast_calls: 96000,
        };
        let line = csv_row("MERK4", "bi_directional", "fixed_m", 3, 4, &row);
        assert_eq!(line, "MERK4,bi_directional,fixed_m,0.01,0.0002,50,3,4,1.5e-8,1200,96000,97200");
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        std::env::set_var("MERK_REF_CACHE", dir.path());
        let steps = [0.5, 0.25];
        let a = CachedReference::prepare(ProblemId::Brusselator, &steps, 1e-3).unwrap();
        // Second load must come from disk and agree bit-exactly.
        let b = CachedReference::prepare(ProblemId::Brusselator, &steps, 1e-3).unwrap();
        let grid = macro_grid(ProblemId::Brusselator, 0.25).unwrap();
        let ua = a.trajectory(ProblemId::Brusselator, &grid).unwrap();
        let ub = b.trajectory(ProblemId::Brusselator, &grid).unwrap();
        for (x, y) in ua.iter().zip(ub.iter()) {
            assert_eq!(x.as_slice(), y.as_slice());
        }
        let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
        std::env::remove_var("MERK_REF_CACHE");
    }

    #[test]
    fn parallel_rows_match_sequential() {
        let steps = [0.1, 0.05];
        let reference = CachedReference::prepare(ProblemId::OneDirectional, &steps, 1e-3).unwrap();
        let tasks: Vec<RowTask> = steps
            .iter()
            .map(|&h| RowTask {
                method: Method::Merk3,
                problem: ProblemId::OneDirectional,
                macro_h: h,
                m: 20,
                q: 3,
                r: 3,
            })
            .collect();
        let seq = run_rows_parallel(&tasks, &reference, 1).unwrap();
        let par = run_rows_parallel(&tasks, &reference, 4).unwrap();
        for (a, b) in seq.iter().zip(par.iter()) {
            assert_eq!(a.max_error.to_bits(), b.max_error.to_bits());
            assert_eq!(a.fast_calls, b.fast_calls);
        }
    }
}
