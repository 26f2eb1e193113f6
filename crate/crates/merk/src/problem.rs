//! Split ODE problems `u' = L u + N(t, u)`, state vectors, and evaluation
//! counters.
//!
//! Counter attribution follows the multirate cost model: every evaluation of
//! the slow nonlinearity `N` increments `slow_calls`, every fast right-hand
//! side `L y + p(tau)` evaluated inside an inner solver increments
//! `fast_calls`, and polynomial evaluations are free (they reuse stored
//! tendency vectors). `fast_duration` accumulates the total fast interval
//! length in exact rational units of the macro step H, so per-step identities
//! like 13/6 or 16/5 hold bit-exactly.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::error::MerkError;
use crate::phi::DenseMatrix;
use crate::rational::Frac;

/// A real state vector of fixed dimension.
#[derive(Clone, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(components: Vec<f64>) -> Self {
        StateVector(components)
    }

    pub fn zeros(dim: usize) -> Self {
        StateVector(alloc::vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Index of the first non-finite component, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.0.iter().position(|x| !x.is_finite())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, scale: f64, other: &StateVector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (x, y) in self.0.iter_mut().zip(other.0.iter()) {
            *x += scale * y;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for x in self.0.iter_mut() {
            *x *= factor;
        }
    }

    /// Componentwise `self - other`.
    pub fn sub(&self, other: &StateVector) -> StateVector {
        debug_assert_eq!(self.dim(), other.dim());
        StateVector(self.0.iter().zip(other.0.iter()).map(|(a, b)| a - b).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, &x| acc.max(crate::fmath::abs(x)))
    }

    /// Max-norm distance to another vector.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max(crate::fmath::abs(a - b)))
    }
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("StateVector").field(&self.0).finish()
    }
}

impl core::ops::Index<usize> for StateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        StateVector(v)
    }
}

/// Immutable view of the evaluation counters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterSnapshot {
    /// Evaluations of the slow nonlinearity `N`.
    pub slow_calls: u64,
    /// Inner-solver right-hand-side evaluations (`L y + p(tau)` each).
    pub fast_calls: u64,
    /// Total fast interval length integrated, in exact units of H.
    pub fast_duration: Frac,
}

impl CounterSnapshot {
    pub fn total_calls(&self) -> u64 {
        self.slow_calls + self.fast_calls
    }
}

/// Rational accumulator with lock-free updates.
///
/// The value is packed as (numerator: i32, denominator: u32) into one atomic
/// word and updated by compare-and-swap, which keeps counter updates safe
/// when stage groups are evaluated concurrently. Denominators stay small
/// because every increment is a scheme constant (halves, thirds, tenths...),
/// and the reduced sum's denominator always divides their lcm.
struct RationalCell {
    bits: AtomicU64,
}

impl RationalCell {
    const fn zero() -> Self {
        // 0/1
        RationalCell { bits: AtomicU64::new(1) }
    }

    fn pack(r: Frac) -> u64 {
        let num = *r.numer();
        let den = *r.denom();
        assert!(
            num >= i32::MIN as i64 && num <= i32::MAX as i64 && den > 0 && den <= u32::MAX as i64,
            "fast_duration accumulator out of packable range"
        );
        ((num as i32 as u32 as u64) << 32) | den as u32 as u64
    }

    fn unpack(bits: u64) -> Frac {
        let num = (bits >> 32) as u32 as i32 as i64;
        let den = (bits & 0xffff_ffff) as u32 as i64;
        Frac::new_raw(num, den)
    }

    fn get(&self) -> Frac {
        Self::unpack(self.bits.load(Ordering::Acquire))
    }

    fn add(&self, delta: Frac) {
        let mut cur = self.bits.load(Ordering::Acquire);
        loop {
            let next = Self::pack(Self::unpack(cur) + delta);
            match self.bits.compare_exchange_weak(cur, next, Ordering::AcqRel, Ordering::Acquire) {
                Ok(_) => return,
                Err(seen) => cur = seen,
            }
        }
    }

    fn reset(&self) {
        self.bits.store(1, Ordering::Release);
    }
}

/// Monotone evaluation counters; reset only explicitly.
pub struct EvalCounters {
    slow: AtomicU64,
    fast: AtomicU64,
    duration: RationalCell,
}

impl EvalCounters {
    const fn new() -> Self {
        EvalCounters {
            slow: AtomicU64::new(0),
            fast: AtomicU64::new(0),
            duration: RationalCell::zero(),
        }
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            slow_calls: self.slow.load(Ordering::Acquire),
            fast_calls: self.fast.load(Ordering::Acquire),
            fast_duration: self.duration.get(),
        }
    }

    pub fn reset(&self) {
        self.slow.store(0, Ordering::Release);
        self.fast.store(0, Ordering::Release);
        self.duration.reset();
    }

    pub(crate) fn count_slow(&self) {
        self.slow.fetch_add(1, Ordering::AcqRel);
    }

    pub(crate) fn count_fast(&self, n: u64) {
        self.fast.fetch_add(n, Ordering::AcqRel);
    }

    pub(crate) fn add_duration(&self, delta: Frac) {
        self.duration.add(delta);
    }
}

type LinearOp = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type NonlinearOp = Box<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// The decomposition `F(t, u) = L u + N(t, u)` with instrumented evaluation.
///
/// `linear` must be time-independent and linear; this is spot-tested rather
/// than enforced. Evaluation is reentrant: the only mutable state is the
/// counters, which are updated atomically.
pub struct SplitOdeProblem {
    dimension: usize,
    t0: f64,
    t_end: f64,
    u0: StateVector,
    linear: LinearOp,
    nonlinear: NonlinearOp,
    dense_l: Option<DenseMatrix>,
    counters: EvalCounters,
}

impl SplitOdeProblem {
    pub fn new(
        t0: f64,
        t_end: f64,
        u0: StateVector,
        linear: LinearOp,
        nonlinear: NonlinearOp,
        dense_l: Option<DenseMatrix>,
    ) -> Self {
        let dimension = u0.dim();
        assert!(dimension >= 1, "problem dimension must be >= 1");
        if let Some(l) = &dense_l {
            assert_eq!(l.dim(), dimension, "dense L dimension mismatch");
        }
        SplitOdeProblem { dimension, t0, t_end, u0, linear, nonlinear, dense_l, counters: EvalCounters::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn time_span(&self) -> (f64, f64) {
        (self.t0, self.t_end)
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.u0
    }

    /// Dense view of L, present only for oracle-scale problems.
    pub fn dense_linear(&self) -> Option<&DenseMatrix> {
        self.dense_l.as_ref()
    }

    /// Applies `L` without touching any counter; the fast-RHS and full-RHS
    /// wrappers below attribute the cost.
    pub fn apply_linear(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.dimension);
        (self.linear)(u, out);
    }

    /// Evaluates `N(t, u)` into `out`, counting one slow call.
    pub fn eval_nonlinear(&self, t: f64, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.dimension);
        self.counters.count_slow();
        (self.nonlinear)(t, u, out);
    }

    /// Full right-hand side `F(t, u) = L u + N(t, u)`.
    ///
    /// Attributed to slow cost only; used by single-rate reference solvers.
    pub fn evaluate_full_rhs(&self, t: f64, u: &StateVector) -> Result<StateVector, MerkError> {
        if u.dim() != self.dimension {
            return Err(MerkError::ContractViolation("state dimension mismatch"));
        }
        let mut lin = alloc::vec![0.0; self.dimension];
        self.apply_linear(u.as_slice(), &mut lin);
        let mut out = alloc::vec![0.0; self.dimension];
        self.eval_nonlinear(t, u.as_slice(), &mut out);
        for (o, l) in out.iter_mut().zip(lin.iter()) {
            *o += l;
        }
        let out = StateVector::new(out);
        match out.first_non_finite() {
            Some(index) => Err(MerkError::ProblemEvaluationDiverged { index }),
            None => Ok(out),
        }
    }

    /// Fast right-hand side `L y + p(tau)`; one fast call.
    pub(crate) fn eval_fast_rhs(&self, tau: f64, y: &[f64], forcing: &crate::forcing::ForcingPolynomial, out: &mut [f64]) {
        self.counters.count_fast(1);
        self.apply_linear(y, out);
        forcing.eval_add(tau, out);
    }

    pub(crate) fn counters_internal(&self) -> &EvalCounters {
        &self.counters
    }

    pub fn counters_snapshot(&self) -> CounterSnapshot {
        self.counters.snapshot()
    }

    pub fn counters_reset(&self) {
        self.counters.reset();
    }
}
