//! Direct exponential Runge-Kutta steppers evaluated with matrix
//! phi-functions (no fast sub-stepping).
//!
//! These are the one-step methods the multirate schemes are derived from;
//! a MERK step converges to the corresponding ExpRK step as the micro step
//! vanishes, and equals it exactly when the fast IVPs are solved with
//! phi-functions. Each stage here is coded from the stage formulas with the
//! named alpha/beta/gamma coefficients, independently of the polynomial
//! tables in [`crate::scheme`], so the two routes cross-check each other.
//!
//! Oracle only: requires a dense view of L and small dimension.

use alloc::vec::Vec;

use crate::error::MerkError;
use crate::phi::{phi_upto, DenseMatrix, ORACLE_DIM_LIMIT};
use crate::problem::{SplitOdeProblem, StateVector};
use crate::rational::{frac, to_f64, Frac};

/// Identifiers of the stiffly-accurate ExpRK schemes underlying MERK2-5.
///
/// The free abscissa of the two- and three-stage families is configurable
/// and must match the MERK scheme it is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpRkScheme {
    ExpRk2 { c2: Frac },
    ExpRk3 { c2: Frac },
    ExpRk4s6,
    ExpRk5s10,
}

impl ExpRkScheme {
    pub fn exprk2() -> Self {
        ExpRkScheme::ExpRk2 { c2: frac(1, 2) }
    }

    pub fn exprk3() -> Self {
        ExpRkScheme::ExpRk3 { c2: frac(1, 2) }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExpRkScheme::ExpRk2 { .. } => "expRK2",
            ExpRkScheme::ExpRk3 { .. } => "expRK3",
            ExpRkScheme::ExpRk4s6 => "expRK4s6",
            ExpRkScheme::ExpRk5s10 => "expRK5s10",
        }
    }
}

/// `u_n + sum_k c^k H phi_k(c H L) g_k` for the combination vectors `g_k`
/// (`g_1` is the full right-hand side F, higher ones are D-combinations).
fn stage_value(
    u_n: &StateVector,
    c: f64,
    h: f64,
    l: &DenseMatrix,
    combos: &[StateVector],
) -> Result<StateVector, MerkError> {
    let phis = phi_upto(combos.len(), &l.scaled(c * h))?;
    let mut out = u_n.clone();
    let mut c_pow = c;
    for (k, g) in combos.iter().enumerate() {
        out.add_scaled(c_pow * h, &StateVector::new(phis[k + 1].mat_vec(g.as_slice())));
        c_pow *= c;
    }
    Ok(out)
}

struct SlowData<'a> {
    problem: &'a SplitOdeProblem,
    t_n: f64,
    h: f64,
    n0: StateVector,
}

impl SlowData<'_> {
    /// Tendency difference `D_i = N(t_n + c_i H, U_i) - N(t_n, u_n)`.
    fn tendency_diff(&self, c: f64, u_stage: &StateVector) -> StateVector {
        let mut n_i = StateVector::zeros(self.n0.dim());
        self.problem.eval_nonlinear(self.t_n + c * self.h, u_stage.as_slice(), n_i.as_mut_slice());
        n_i.add_scaled(-1.0, &self.n0);
        n_i
    }
}

fn combo(parts: &[(f64, &StateVector)]) -> StateVector {
    let mut out = StateVector::zeros(parts[0].1.dim());
    for &(w, v) in parts {
        out.add_scaled(w, v);
    }
    out
}

/// One step of the chosen ExpRK scheme with matrix functions.
pub fn exprk_step(
    scheme: ExpRkScheme,
    problem: &SplitOdeProblem,
    t_n: f64,
    u_n: &StateVector,
    h: f64,
) -> Result<StateVector, MerkError> {
    let l = problem.dense_linear().ok_or(MerkError::OracleScaleExceeded {
        dimension: problem.dimension(),
        limit: ORACLE_DIM_LIMIT,
    })?;
    if h <= 0.0 {
        return Err(MerkError::ContractViolation("macro step must be positive"));
    }
    let dim = problem.dimension();
    let mut n0 = StateVector::zeros(dim);
    problem.eval_nonlinear(t_n, u_n.as_slice(), n0.as_mut_slice());
    let mut f = StateVector::new(l.mat_vec(u_n.as_slice()));
    f.add_scaled(1.0, &n0);
    let slow = SlowData { problem, t_n, h, n0 };

    match scheme {
        ExpRkScheme::ExpRk2 { c2 } => {
            let c2 = to_f64(c2);
            let u2 = stage_value(u_n, c2, h, l, core::slice::from_ref(&f))?;
            let d2 = slow.tendency_diff(c2, &u2);
            // b_2 = (1/c2) phi_2.
            stage_value(u_n, 1.0, h, l, &[f.clone(), combo(&[(1.0 / c2, &d2)])])
        }
        ExpRkScheme::ExpRk3 { c2 } => {
            let c2 = to_f64(c2);
            let c3 = 2.0 / 3.0;
            let u2 = stage_value(u_n, c2, h, l, core::slice::from_ref(&f))?;
            let d2 = slow.tendency_diff(c2, &u2);
            // a_32 = (c3^2 / c2) phi_2(c3 H L), i.e. g_2 = D_2 / c2.
            let u3 = stage_value(u_n, c3, h, l, &[f.clone(), combo(&[(1.0 / c2, &d2)])])?;
            let d3 = slow.tendency_diff(c3, &u3);
            // b_3 = (3/2) phi_2.
            stage_value(u_n, 1.0, h, l, &[f.clone(), combo(&[(1.5, &d3)])])
        }
        ExpRkScheme::ExpRk4s6 => {
            let (c2, c3, c4, c5, c6) = (0.5, 0.5, 1.0 / 3.0, 5.0 / 6.0, 1.0 / 3.0);
            let u2 = stage_value(u_n, c2, h, l, core::slice::from_ref(&f))?;
            let d2 = slow.tendency_diff(c2, &u2);
            let g2 = combo(&[(1.0 / c2, &d2)]);
            let u3 = stage_value(u_n, c3, h, l, &[f.clone(), g2.clone()])?;
            let d3 = slow.tendency_diff(c3, &u3);
            let u4 = stage_value(u_n, c4, h, l, &[f.clone(), g2])?;
            let d4 = slow.tendency_diff(c4, &u4);
            let g2 = combo(&[(-c4 / (c3 * (c3 - c4)), &d3), (c3 / (c4 * (c3 - c4)), &d4)]);
            let g3 = combo(&[(2.0 / (c3 * (c3 - c4)), &d3), (-2.0 / (c4 * (c3 - c4)), &d4)]);
            let u5 = stage_value(u_n, c5, h, l, &[f.clone(), g2.clone(), g3.clone()])?;
            let d5 = slow.tendency_diff(c5, &u5);
            let u6 = stage_value(u_n, c6, h, l, &[f.clone(), g2, g3])?;
            let d6 = slow.tendency_diff(c6, &u6);
            let g2 = combo(&[(-c6 / (c5 * (c5 - c6)), &d5), (c5 / (c6 * (c5 - c6)), &d6)]);
            let g3 = combo(&[(2.0 / (c5 * (c5 - c6)), &d5), (-2.0 / (c6 * (c5 - c6)), &d6)]);
            stage_value(u_n, 1.0, h, l, &[f.clone(), g2, g3])
        }
        ExpRkScheme::ExpRk5s10 => {
            let (c2, c3, c4) = (0.5, 0.5, 1.0 / 3.0);
            let (c5, c6, c7) = (0.5, 1.0 / 3.0, 0.25);
            let (c8, c9, c10) = (0.7, 0.5, 2.0 / 3.0);

            let u2 = stage_value(u_n, c2, h, l, core::slice::from_ref(&f))?;
            let d2 = slow.tendency_diff(c2, &u2);
            let g2 = combo(&[(1.0 / c2, &d2)]);
            let u3 = stage_value(u_n, c3, h, l, &[f.clone(), g2.clone()])?;
            let d3 = slow.tendency_diff(c3, &u3);
            let u4 = stage_value(u_n, c4, h, l, &[f.clone(), g2])?;
            let d4 = slow.tendency_diff(c4, &u4);

            let alpha3 = c4 / (c3 * (c4 - c3));
            let alpha4 = c3 / (c4 * (c3 - c4));
            let beta3 = 2.0 / (c3 * (c3 - c4));
            let beta4 = 2.0 / (c4 * (c3 - c4));
            let g2 = combo(&[(alpha3, &d3), (alpha4, &d4)]);
            let g3 = combo(&[(beta3, &d3), (-beta4, &d4)]);
            let mut d567 = Vec::with_capacity(3);
            for c in [c5, c6, c7] {
                let u = stage_value(u_n, c, h, l, &[f.clone(), g2.clone(), g3.clone()])?;
                d567.push(slow.tendency_diff(c, &u));
            }
            let (d5, d6, d7) = (&d567[0], &d567[1], &d567[2]);

            let alpha5 = c6 * c7 / (c5 * (c5 - c6) * (c5 - c7));
            let alpha6 = c5 * c7 / (c6 * (c6 - c5) * (c6 - c7));
            let alpha7 = c5 * c6 / (c7 * (c7 - c5) * (c7 - c6));
            let beta5 = 2.0 * (c6 + c7) / (c5 * (c5 - c6) * (c5 - c7));
            let beta6 = 2.0 * (c5 + c7) / (c6 * (c6 - c5) * (c6 - c7));
            let beta7 = 2.0 * (c5 + c6) / (c7 * (c7 - c5) * (c7 - c6));
            let gamma5 = 6.0 / (c5 * (c5 - c6) * (c5 - c7));
            let gamma6 = 6.0 / (c6 * (c6 - c5) * (c6 - c7));
            let gamma7 = 6.0 / (c7 * (c7 - c5) * (c7 - c6));
            let g2 = combo(&[(alpha5, d5), (alpha6, d6), (alpha7, d7)]);
            let g3 = combo(&[(-beta5, d5), (-beta6, d6), (-beta7, d7)]);
            let g4 = combo(&[(gamma5, d5), (gamma6, d6), (gamma7, d7)]);
            let mut d8910 = Vec::with_capacity(3);
            for c in [c8, c9, c10] {
                let u = stage_value(u_n, c, h, l, &[f.clone(), g2.clone(), g3.clone(), g4.clone()])?;
                d8910.push(slow.tendency_diff(c, &u));
            }
            let (d8, d9, d10) = (&d8910[0], &d8910[1], &d8910[2]);

            let alpha8 = c9 * c10 / (c8 * (c8 - c9) * (c8 - c10));
            let alpha9 = c8 * c10 / (c9 * (c9 - c8) * (c9 - c10));
            let alpha10 = c8 * c9 / (c10 * (c10 - c8) * (c10 - c9));
            let beta8 = 2.0 * (c9 + c10) / (c8 * (c8 - c9) * (c8 - c10));
            let beta9 = 2.0 * (c8 + c10) / (c9 * (c9 - c8) * (c9 - c10));
            let beta10 = 2.0 * (c8 + c9) / (c10 * (c10 - c8) * (c10 - c9));
            let gamma8 = 6.0 / (c8 * (c8 - c9) * (c8 - c10));
            let gamma9 = 6.0 / (c9 * (c9 - c8) * (c9 - c10));
            let gamma10 = 6.0 / (c10 * (c10 - c8) * (c10 - c9));
            let g2 = combo(&[(alpha8, d8), (alpha9, d9), (alpha10, d10)]);
            let g3 = combo(&[(-beta8, d8), (-beta9, d9), (-beta10, d10)]);
            let g4 = combo(&[(gamma8, d8), (gamma9, d9), (gamma10, d10)]);
            stage_value(u_n, 1.0, h, l, &[f.clone(), g2, g3, g4])
        }
    }
}

/// All four oracle schemes, paired with the matching MERK order.
pub fn all_schemes() -> [ExpRkScheme; 4] {
    [ExpRkScheme::exprk2(), ExpRkScheme::exprk3(), ExpRkScheme::ExpRk4s6, ExpRkScheme::ExpRk5s10]
}
