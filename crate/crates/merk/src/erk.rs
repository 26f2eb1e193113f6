//! Fixed-step explicit Runge-Kutta engine for the fast modified IVPs.
//!
//! A fast IVP is `y'(tau) = L y + p(tau)` on `[0, T]` with a set of interior
//! landing points at which solution values must be produced. Because one IVP
//! solve can serve several stage abscissae (e.g. sampling `c_4 H` inside
//! `[0, c_3 H]`), the micro grid is built per subinterval: the interval is
//! partitioned at every landing point and each piece of length `l` is cut
//! into `ceil(l / h_target)` equal steps. Landing points are therefore step
//! boundaries and no interpolation is ever performed.

use alloc::vec::Vec;

use crate::error::MerkError;
use crate::forcing::ForcingPolynomial;
use crate::problem::{SplitOdeProblem, StateVector};
use crate::rational::Frac;
use crate::tableau::ButcherTableau;

/// One fast initial value problem, ready to hand to a solver.
pub struct FastIvp<'a> {
    pub forcing: &'a ForcingPolynomial,
    pub y0: &'a StateVector,
    /// Right end of the integration interval (`c_i H` or `H`).
    pub interval_end: f64,
    /// Strictly increasing sample points in `(0, interval_end]`; the last
    /// entry must equal `interval_end`.
    pub landing_points: &'a [f64],
    /// Interval length in exact units of H, credited to `fast_duration`.
    pub duration_in_h: Frac,
    /// Stage index used to annotate divergence errors (0 if not applicable).
    pub stage_label: usize,
}

fn subintervals(interval_end: f64, landing: &[f64], h_target: f64) -> Result<Vec<(f64, f64, usize)>, MerkError> {
    if h_target <= 0.0 || !h_target.is_finite() {
        return Err(MerkError::ContractViolation("micro step must be positive"));
    }
    if landing.is_empty() {
        return Err(MerkError::ContractViolation("landing points must not be empty"));
    }
    let mut pieces = Vec::with_capacity(landing.len());
    let mut left = 0.0;
    for &point in landing {
        if !(point > left && point <= interval_end) {
            return Err(MerkError::ContractViolation(
                "landing points must be sorted, distinct, and within (0, interval_end]",
            ));
        }
        let len = point - left;
        let steps = (crate::fmath::ceil(len / h_target - 1e-9) as usize).max(1);
        pieces.push((left, point, steps));
        left = point;
    }
    if landing.last().copied() != Some(interval_end) {
        return Err(MerkError::ContractViolation("last landing point must equal interval_end"));
    }
    Ok(pieces)
}

/// Partitions `[0, interval_end]` at every landing point and subdivides each
/// piece into equal steps no longer than `h_target`. Returns the step sizes,
/// which sum to `interval_end` up to roundoff.
pub fn plan_micro_grid(interval_end: f64, landing: &[f64], h_target: f64) -> Result<Vec<f64>, MerkError> {
    let pieces = subintervals(interval_end, landing, h_target)?;
    let mut sizes = Vec::new();
    for (a, b, n) in pieces {
        let h = (b - a) / n as f64;
        sizes.extend(core::iter::repeat_n(h, n));
    }
    Ok(sizes)
}

/// Integrates a fast IVP, landing exactly on every landing point.
///
/// Returns the solution values at the landing points, in order. Every
/// right-hand-side evaluation counts one fast call; the whole solve credits
/// `duration_in_h` to the fast-duration accumulator.
pub fn erk_integrate(
    tableau: &ButcherTableau,
    problem: &SplitOdeProblem,
    ivp: &FastIvp<'_>,
    h_target: f64,
) -> Result<Vec<StateVector>, MerkError> {
    let pieces = subintervals(ivp.interval_end, ivp.landing_points, h_target)?;
    let dim = problem.dimension();
    if ivp.y0.dim() != dim || ivp.forcing.dim() != dim {
        return Err(MerkError::ContractViolation("fast IVP dimension mismatch"));
    }
    problem.counters_internal().add_duration(ivp.duration_in_h);

    let s = tableau.stages();
    let mut k = alloc::vec![0.0; s * dim];
    let mut y_stage = alloc::vec![0.0; dim];
    let mut y = ivp.y0.clone();
    let mut out = Vec::with_capacity(ivp.landing_points.len());

    for (a, b, steps) in pieces {
        let span = b - a;
        let h = span / steps as f64;
        for step in 0..steps {
            let tau0 = a + span * (step as f64 / steps as f64);
            for i in 0..s {
                y_stage.copy_from_slice(y.as_slice());
                for j in 0..i {
                    let aij = tableau.coeff(i, j);
                    if aij != 0.0 {
                        let kj = &k[j * dim..(j + 1) * dim];
                        for (ys, &kv) in y_stage.iter_mut().zip(kj.iter()) {
                            *ys += h * aij * kv;
                        }
                    }
                }
                let tau = tau0 + tableau.node(i) * h;
                let (head, tail) = k.split_at_mut(i * dim);
                let _ = head;
                problem.eval_fast_rhs(tau, &y_stage, ivp.forcing, &mut tail[..dim]);
            }
            for i in 0..s {
                let bi = tableau.weight(i);
                if bi != 0.0 {
                    let ki = &k[i * dim..(i + 1) * dim];
                    for (yv, &kv) in y.as_mut_slice().iter_mut().zip(ki.iter()) {
                        *yv += h * bi * kv;
                    }
                }
            }
            if y.first_non_finite().is_some() {
                return Err(MerkError::FastSolveDiverged { tau: tau0 + h, stage: ivp.stage_label });
            }
        }
        // Each subinterval boundary is a landing point by construction.
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::{solve_modified_ivp_exact, DenseMatrix};
    use crate::problem::SplitOdeProblem;
    use crate::rational::frac;
    use crate::tableau;
    use alloc::boxed::Box;

    fn trivial_problem(dim: usize) -> SplitOdeProblem {
        SplitOdeProblem::new(
            0.0,
            1.0,
            StateVector::zeros(dim),
            Box::new(|_, out| out.fill(0.0)),
            Box::new(|_, _, out| out.fill(0.0)),
            None,
        )
    }

    fn decay_problem() -> SplitOdeProblem {
        SplitOdeProblem::new(
            0.0,
            1.0,
            StateVector::new(alloc::vec![1.0]),
            Box::new(|u, out| out[0] = -u[0]),
            Box::new(|_, _, out| out.fill(0.0)),
            None,
        )
    }

    #[test]
    fn micro_grid_partitions_at_landing_points() {
        let grid = plan_micro_grid(0.5, &[1.0 / 3.0, 0.5], 0.1).unwrap();
        assert_eq!(grid.len(), 6);
        for h in &grid {
            assert!((h - 1.0 / 12.0).abs() <= 1e-15);
        }
        let total: f64 = grid.iter().sum();
        assert!((total - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn micro_grid_uniform_when_single_landing() {
        let grid = plan_micro_grid(0.5, &[0.5], 0.125).unwrap();
        assert_eq!(grid.len(), 4);
        assert!(grid.iter().all(|h| (*h - 0.125).abs() <= 1e-16));
    }

    #[test]
    fn micro_grid_three_piece_shape() {
        // The {8,9,10} group of the fifth-order scheme with H = 1.
        let grid = plan_micro_grid(0.7, &[0.5, 2.0 / 3.0, 0.7], 0.1).unwrap();
        let total: f64 = grid.iter().sum();
        assert!((total - 0.7).abs() <= 1e-15);
        // 5 steps on [0,1/2], 2 on [1/2,2/3], 1 on [2/3,7/10].
        assert_eq!(grid.len(), 8);
    }

    #[test]
    fn micro_grid_rejects_bad_input() {
        assert!(plan_micro_grid(1.0, &[1.0], 0.0).is_err());
        assert!(plan_micro_grid(1.0, &[], 0.1).is_err());
        assert!(plan_micro_grid(1.0, &[0.5], 0.1).is_err());
        assert!(plan_micro_grid(1.0, &[0.5, 0.5, 1.0], 0.1).is_err());
    }

    #[test]
    fn constant_forcing_is_integrated_exactly() {
        let problem = trivial_problem(2);
        let forcing = ForcingPolynomial::constant(StateVector::new(alloc::vec![2.0, -1.0]));
        let y0 = StateVector::new(alloc::vec![1.0, 1.0]);
        for t in [tableau::heun2(), tableau::erk33(), tableau::cash_karp5()] {
            let ivp = FastIvp {
                forcing: &forcing,
                y0: &y0,
                interval_end: 0.8,
                landing_points: &[0.8],
                duration_in_h: frac(4, 5),
                stage_label: 0,
            };
            let out = erk_integrate(&t, &problem, &ivp, 0.1).unwrap();
            assert!((out[0][0] - (1.0 + 0.8 * 2.0)).abs() <= 1e-14);
            assert!((out[0][1] - (1.0 - 0.8)).abs() <= 1e-14);
        }
    }

    #[test]
    fn exact_on_polynomials_below_order_matches_oracle() {
        // With L = 0 an order-p method integrates forcing of degree p-1
        // exactly; cross-check against the phi-function solve.
        let problem = trivial_problem(1);
        for (t, deg) in [
            (tableau::heun2(), 1usize),
            (tableau::erk33(), 2),
            (tableau::rk4_classic(), 3),
            (tableau::cash_karp5(), 3),
        ] {
            let coeffs: Vec<StateVector> =
                (0..=deg).map(|j| StateVector::new(alloc::vec![1.0 + j as f64])).collect();
            let forcing = ForcingPolynomial::new(coeffs);
            let y0 = StateVector::new(alloc::vec![0.5]);
            let ivp = FastIvp {
                forcing: &forcing,
                y0: &y0,
                interval_end: 1.0,
                landing_points: &[1.0],
                duration_in_h: frac(1, 1),
                stage_label: 0,
            };
            let got = erk_integrate(&t, &problem, &ivp, 0.25).unwrap();
            let want = solve_modified_ivp_exact(&DenseMatrix::zeros(1), &forcing, &y0, 1.0).unwrap();
            assert!((got[0][0] - want[0]).abs() <= 1e-13, "{} degree {deg}", t.name);
        }
    }

    #[test]
    fn erk33_order_probe_on_linear_decay() {
        // y' = -y, y(0)=1, error at T=1 should shrink as h^3.
        let problem = decay_problem();
        let forcing = ForcingPolynomial::constant(StateVector::zeros(1));
        let y0 = StateVector::new(alloc::vec![1.0]);
        let t = tableau::erk33();
        let mut errors = Vec::new();
        for m in [10usize, 20, 40, 80] {
            let ivp = FastIvp {
                forcing: &forcing,
                y0: &y0,
                interval_end: 1.0,
                landing_points: &[1.0],
                duration_in_h: frac(1, 1),
                stage_label: 0,
            };
            let out = erk_integrate(&t, &problem, &ivp, 1.0 / m as f64).unwrap();
            errors.push((1.0 / m as f64, (out[0][0] - crate::fmath::exp(-1.0)).abs()));
        }
        let slope = crate::study::fit_rate(&errors, 0.0).unwrap();
        assert!((slope - 3.0).abs() <= 0.1, "slope {slope}");
    }

    #[test]
    fn cash_karp_order_probe_on_linear_decay() {
        let problem = decay_problem();
        let forcing = ForcingPolynomial::constant(StateVector::zeros(1));
        let y0 = StateVector::new(alloc::vec![1.0]);
        let t = tableau::cash_karp5();
        let mut errors = Vec::new();
        for m in [5usize, 10, 20, 40] {
            let ivp = FastIvp {
                forcing: &forcing,
                y0: &y0,
                interval_end: 1.0,
                landing_points: &[1.0],
                duration_in_h: frac(1, 1),
                stage_label: 0,
            };
            let out = erk_integrate(&t, &problem, &ivp, 1.0 / m as f64).unwrap();
            errors.push((1.0 / m as f64, (out[0][0] - crate::fmath::exp(-1.0)).abs()));
        }
        let slope = crate::study::fit_rate(&errors, 0.0).unwrap();
        assert!((slope - 5.0).abs() <= 0.15, "slope {slope}");
    }

    #[test]
    fn counters_track_fast_work() {
        let problem = trivial_problem(1);
        let forcing = ForcingPolynomial::constant(StateVector::zeros(1));
        let y0 = StateVector::new(alloc::vec![1.0]);
        let ivp = FastIvp {
            forcing: &forcing,
            y0: &y0,
            interval_end: 0.5,
            landing_points: &[0.5],
            duration_in_h: frac(1, 2),
            stage_label: 0,
        };
        erk_integrate(&tableau::erk33(), &problem, &ivp, 0.1).unwrap();
        let c = problem.counters_snapshot();
        assert_eq!(c.fast_calls, 5 * 3); // 5 micro steps, 3 stages
        assert_eq!(c.slow_calls, 0);
        assert_eq!(c.fast_duration, frac(1, 2));
    }

    #[test]
    fn divergence_is_reported_with_tau() {
        let problem = SplitOdeProblem::new(
            0.0,
            1.0,
            StateVector::new(alloc::vec![1.0]),
            Box::new(|u, out| out[0] = u[0] * u[0] * 1e300),
            Box::new(|_, _, out| out.fill(0.0)),
            None,
        );
        let forcing = ForcingPolynomial::constant(StateVector::zeros(1));
        let y0 = StateVector::new(alloc::vec![1e200]);
        let ivp = FastIvp {
            forcing: &forcing,
            y0: &y0,
            interval_end: 1.0,
            landing_points: &[1.0],
            duration_in_h: frac(1, 1),
            stage_label: 4,
        };
        match erk_integrate(&tableau::heun2(), &problem, &ivp, 0.5) {
            Err(MerkError::FastSolveDiverged { stage: 4, .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
