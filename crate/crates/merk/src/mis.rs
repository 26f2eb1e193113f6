//! Third-order multirate infinitesimal step baseline (MIS-KW3).
//!
//! Each stage advances a fast IVP from the previous stage value over
//! `[(c_{i-1})H, c_i H]` with a constant tendency built from the outer
//! tableau rows:
//!
//! ```text
//! v' = L v + sum_j (a_ij - a_{i-1,j}) / (c_i - c_{i-1}) N(t_n + c_j H, U_j)
//! ```
//!
//! (with the weight row `b` standing in for row `s+1` and `c_{s+1} = 1`).
//! The fast scale therefore traverses `[t_n, t_n + H]` exactly once per
//! step, unlike the MERK schemes.

use alloc::vec::Vec;

use crate::erk::{erk_integrate, FastIvp};
use crate::error::MerkError;
use crate::forcing::ForcingPolynomial;
use crate::problem::{SplitOdeProblem, StateVector};
use crate::rational::{frac, to_f64, Frac};
use crate::step::macro_step_count;
use crate::tableau::{knoth_wolke3, ButcherTableau};

/// A multirate infinitesimal step scheme: an outer method with sorted
/// abscissae whose stage increments drive fast IVPs, and an inner explicit
/// method for solving them.
pub struct MisScheme {
    pub name: &'static str,
    pub outer: ButcherTableau,
    pub inner: ButcherTableau,
    /// Outer abscissae as exact rationals (for duration accounting).
    abscissae: Vec<Frac>,
}

impl MisScheme {
    pub fn new(name: &'static str, outer: ButcherTableau, inner: ButcherTableau, abscissae: Vec<Frac>) -> Self {
        assert_eq!(abscissae.len(), outer.stages());
        for (i, &c) in abscissae.iter().enumerate() {
            assert!(crate::fmath::abs(to_f64(c) - outer.node(i)) <= 1e-15, "rational abscissae must match the tableau");
        }
        for pair in abscissae.windows(2) {
            assert!(pair[0] < pair[1], "MIS requires strictly ascending abscissae");
        }
        assert!(*abscissae.last().unwrap() < Frac::from_integer(1));
        MisScheme { name, outer, inner, abscissae }
    }

    /// Fast interval traversed per step, in units of H (always 1: the step
    /// interval is traversed exactly once).
    pub fn fast_duration_per_step(&self) -> Frac {
        Frac::from_integer(1)
    }

    pub fn slow_calls_per_step(&self) -> u64 {
        self.outer.stages() as u64
    }
}

/// The Knoth-Wolke third-order scheme, used both as the outer method and as
/// the inner fast solver.
pub fn mis_kw3() -> MisScheme {
    MisScheme::new(
        "MIS-KW3",
        knoth_wolke3(),
        knoth_wolke3(),
        alloc::vec![frac(0, 1), frac(1, 3), frac(3, 4)],
    )
}

/// One MIS step from `(t_n, u_n)` with macro step `H` and micro step `H/m`.
pub fn mis_step(
    scheme: &MisScheme,
    problem: &SplitOdeProblem,
    t_n: f64,
    u_n: &StateVector,
    h_macro: f64,
    m: u32,
) -> Result<StateVector, MerkError> {
    if h_macro <= 0.0 || m == 0 {
        return Err(MerkError::ContractViolation("H must be positive and m >= 1"));
    }
    let dim = problem.dimension();
    let s = scheme.outer.stages();
    let micro = h_macro / m as f64;

    let mut tendencies: Vec<StateVector> = Vec::with_capacity(s);
    let mut n_buf = StateVector::zeros(dim);
    problem.eval_nonlinear(t_n, u_n.as_slice(), n_buf.as_mut_slice());
    tendencies.push(n_buf.clone());

    let mut u = u_n.clone();
    for i in 1..=s {
        let (c_lo, c_hi) = if i < s {
            (scheme.abscissae[i - 1], scheme.abscissae[i])
        } else {
            (scheme.abscissae[s - 1], Frac::from_integer(1))
        };
        let dc = c_hi - c_lo;
        let row = |j: usize| if i < s { scheme.outer.coeff(i, j) } else { scheme.outer.weight(j) };
        let prev_row = |j: usize| scheme.outer.coeff(i - 1, j);
        let dc_f = to_f64(dc);
        let mut forcing_vec = StateVector::zeros(dim);
        for (j, n_j) in tendencies.iter().enumerate() {
            let w = (row(j) - prev_row(j)) / dc_f;
            if w != 0.0 {
                forcing_vec.add_scaled(w, n_j);
            }
        }
        let forcing = ForcingPolynomial::constant(forcing_vec);
        let interval = dc_f * h_macro;
        let landing = [interval];
        let ivp = FastIvp {
            forcing: &forcing,
            y0: &u,
            interval_end: interval,
            landing_points: &landing,
            duration_in_h: dc,
            stage_label: i,
        };
        u = erk_integrate(&scheme.inner, problem, &ivp, micro)?
            .pop()
            .expect("single landing point");
        if i < s {
            problem.eval_nonlinear(t_n + to_f64(c_hi) * h_macro, u.as_slice(), n_buf.as_mut_slice());
            tendencies.push(n_buf.clone());
        }
    }
    Ok(u)
}

/// Integrates the whole problem span, returning the trajectory including
/// the initial point.
pub fn mis_integrate(
    scheme: &MisScheme,
    problem: &SplitOdeProblem,
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
        u = mis_step(scheme, problem, t_n, &u, h_macro, m)?;
        trajectory.push((t0 + (n + 1) as f64 * h_macro, u.clone()));
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::DenseMatrix;
    use crate::problems;
    use alloc::boxed::Box;

    #[test]
    fn traverses_the_step_interval_once() {
        let p = problems::make_bi_directional();
        let scheme = mis_kw3();
        let u0 = p.initial_state().clone();
        mis_step(&scheme, &p, 0.0, &u0, 0.01, 4).unwrap();
        let c = p.counters_snapshot();
        assert_eq!(c.fast_duration, Frac::from_integer(1));
        assert_eq!(c.slow_calls, 3);
    }

    #[test]
    fn zero_nonlinearity_matches_plain_inner_integration() {
        // With N = 0 all tendencies vanish and the stages chain into one
        // homogeneous fast integration of y' = L y across [0, H].
        let l = DenseMatrix::from_rows(&[&[0.0, 1.0], &[-4.0, -0.3]]);
        let l2 = l.clone();
        let p = SplitOdeProblem::new(
            0.0,
            1.0,
            StateVector::new(alloc::vec![1.0, 0.5]),
            Box::new(move |u, out| out.copy_from_slice(&l2.mat_vec(u))),
            Box::new(|_, _, out| out.fill(0.0)),
            Some(l.clone()),
        );
        let scheme = mis_kw3();
        let u0 = p.initial_state().clone();
        let h = 0.5;
        let m = 12;
        let got = mis_step(&scheme, &p, 0.0, &u0, h, m).unwrap();

        // Reference: the same inner tableau on the same piecewise micro
        // grid (ceil(dc m) steps per stage interval).
        let forcing = ForcingPolynomial::constant(StateVector::zeros(2));
        let mut want = u0.clone();
        for (lo, hi) in [(0.0, 1.0 / 3.0), (1.0 / 3.0, 0.75), (0.75, 1.0)] {
            let interval = (hi - lo) * h;
            let landing = [interval];
            let ivp = FastIvp {
                forcing: &forcing,
                y0: &want,
                interval_end: interval,
                landing_points: &landing,
                duration_in_h: frac(1, 1),
                stage_label: 0,
            };
            want = erk_integrate(&scheme.inner, &p, &ivp, h / m as f64).unwrap().pop().unwrap();
        }
        assert!(got.max_abs_diff(&want) <= 1e-14);
    }

    #[test]
    fn reduces_to_outer_method_when_l_vanishes_and_fast_is_exact() {
        // With L = 0 the stage IVPs integrate constants exactly, so the MIS
        // step telescopes to a plain Knoth-Wolke step on u' = N(t, u).
        let p = SplitOdeProblem::new(
            0.0,
            1.0,
            StateVector::new(alloc::vec![0.4]),
            Box::new(|_, out| out.fill(0.0)),
            Box::new(|t, u, out| out[0] = -u[0] + crate::fmath::sin(t)),
            Some(DenseMatrix::zeros(1)),
        );
        let scheme = mis_kw3();
        let u0 = p.initial_state().clone();
        let h = 0.2;
        let got = mis_step(&scheme, &p, 0.0, &u0, h, 1).unwrap();

        // Hand-rolled KW3 step.
        let t = &scheme.outer;
        let f = |time: f64, y: f64| -y + crate::fmath::sin(time);
        let k1 = f(0.0, u0[0]);
        let k2 = f(t.node(1) * h, u0[0] + h * t.coeff(1, 0) * k1);
        let k3 = f(t.node(2) * h, u0[0] + h * (t.coeff(2, 0) * k1 + t.coeff(2, 1) * k2));
        let want = u0[0] + h * (t.weight(0) * k1 + t.weight(1) * k2 + t.weight(2) * k3);
        assert!((got[0] - want).abs() <= 1e-14);
    }
}
