//! The four benchmark problems, ready-made as split ODE problems, plus
//! their reference-solution kinds.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::fmath;
use crate::phi::DenseMatrix;
use crate::problem::{SplitOdeProblem, StateVector};

/// Benchmark problem identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemId {
    ReactionDiffusion,
    Brusselator,
    OneDirectional,
    BiDirectional,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [
        ProblemId::ReactionDiffusion,
        ProblemId::Brusselator,
        ProblemId::OneDirectional,
        ProblemId::BiDirectional,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProblemId::ReactionDiffusion => "reaction_diffusion",
            ProblemId::Brusselator => "brusselator",
            ProblemId::OneDirectional => "one_directional",
            ProblemId::BiDirectional => "bi_directional",
        }
    }

    pub fn parse(s: &str) -> Option<ProblemId> {
        ProblemId::ALL.iter().copied().find(|id| id.name() == s)
    }
}

/// Step-policy category: stiff problems fix the micro step for stability
/// (category I); coupling-accuracy problems fix the rate ratio m
/// (category II).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    I,
    II,
}

/// How reference solutions are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Closed-form solution (one-directional problem).
    Analytic,
    /// Matrix-exponential propagation of the full linear system.
    ExpmExact,
    /// Fine-step high-order explicit RK on the full right-hand side.
    FineRk,
}

#[derive(Clone, Copy, Debug)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub category: Category,
    pub reference: ReferenceKind,
}

pub fn spec_of(id: ProblemId) -> ProblemSpec {
    match id {
        ProblemId::ReactionDiffusion => {
            ProblemSpec { id, category: Category::I, reference: ReferenceKind::FineRk }
        }
        ProblemId::Brusselator => {
            ProblemSpec { id, category: Category::I, reference: ReferenceKind::FineRk }
        }
        ProblemId::OneDirectional => {
            ProblemSpec { id, category: Category::II, reference: ReferenceKind::Analytic }
        }
        ProblemId::BiDirectional => {
            ProblemSpec { id, category: Category::II, reference: ReferenceKind::ExpmExact }
        }
    }
}

/// Builds a problem with its default parameters.
pub fn build(id: ProblemId) -> SplitOdeProblem {
    match id {
        ProblemId::ReactionDiffusion => make_reaction_diffusion(1000),
        ProblemId::Brusselator => make_brusselator(),
        ProblemId::OneDirectional => make_one_directional(),
        ProblemId::BiDirectional => make_bi_directional(),
    }
}

/// Traveling-wave reaction-diffusion problem on `x in [0, 5]`, `t in (0, 3]`:
///
/// ```text
/// u_t = (1/100) u_xx + u^2 (1 - u),   u_x(0,t) = u_x(5,t) = 0,
/// u(x,0) = (1 + e^{lambda (x-1)})^{-1},   lambda = 5 sqrt(2),
/// ```
///
/// discretized by second-order central differences on `n_points` nodes
/// including both boundaries, with homogeneous Neumann conditions enforced
/// by ghost-point reflection. The diffusion term is the fast linear part
/// (applied as a stencil; no dense matrix), the reaction `u^2 (1 - u)` the
/// slow part.
pub fn make_reaction_diffusion(n_points: usize) -> SplitOdeProblem {
    assert!(n_points >= 3, "need at least 3 spatial points");
    let dx = 5.0 / (n_points - 1) as f64;
    let scale = 0.01 / (dx * dx);
    let lambda = 5.0 * fmath::sqrt(2.0);
    let u0: Vec<f64> = (0..n_points)
        .map(|i| {
            let x = 5.0 * i as f64 / (n_points - 1) as f64;
            1.0 / (1.0 + fmath::exp(lambda * (x - 1.0)))
        })
        .collect();
    let n = n_points;
    SplitOdeProblem::new(
        0.0,
        3.0,
        StateVector::new(u0),
        Box::new(move |u, out| {
            out[0] = scale * (2.0 * u[1] - 2.0 * u[0]);
            for i in 1..n - 1 {
                out[i] = scale * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
            }
            out[n - 1] = scale * (2.0 * u[n - 2] - 2.0 * u[n - 1]);
        }),
        Box::new(|_, u, out| {
            for (o, &x) in out.iter_mut().zip(u.iter()) {
                *o = x * x * (1.0 - x);
            }
        }),
        None,
    )
}

/// Stiff brusselator variant on `t in (0, 2]` with `a = 1`, `b = 3.5`,
/// `1/eps = 100`; the fast part is the single entry `L_33 = -100`.
pub fn make_brusselator() -> SplitOdeProblem {
    let mut l = DenseMatrix::zeros(3);
    l[(2, 2)] = -100.0;
    SplitOdeProblem::new(
        0.0,
        2.0,
        StateVector::new(alloc::vec![1.2, 3.1, 3.0]),
        Box::new(|u, out| {
            out[0] = 0.0;
            out[1] = 0.0;
            out[2] = -100.0 * u[2];
        }),
        Box::new(|_, u, out| {
            let (x, y, w) = (u[0], u[1], u[2]);
            out[0] = 1.0 - (w + 1.0) * x + x * x * y;
            out[1] = w * x - x * x * y;
            out[2] = 350.0 - x * w;
        }),
        Some(l),
    )
}

/// One-directionally coupled linear system on `t in (0, 1]`:
/// the oscillator (u, v) drives the slow variable w but not vice versa.
/// Splitting: L keeps the oscillator and the (1, 1, 0) coupling row,
/// N = (0, 0, -w).
pub fn make_one_directional() -> SplitOdeProblem {
    let l = DenseMatrix::from_rows(&[&[0.0, -50.0, 0.0], &[50.0, 0.0, 0.0], &[1.0, 1.0, 0.0]]);
    SplitOdeProblem::new(
        0.0,
        1.0,
        StateVector::new(alloc::vec![1.0, 0.0, 2.0]),
        Box::new(|u, out| {
            out[0] = -50.0 * u[1];
            out[1] = 50.0 * u[0];
            out[2] = u[0] + u[1];
        }),
        Box::new(|_, u, out| {
            out[0] = 0.0;
            out[1] = 0.0;
            out[2] = -u[2];
        }),
        Some(l),
    )
}

/// Closed-form solution of the one-directional problem.
pub fn analytic_solution_one_directional(t: f64) -> StateVector {
    let (s, c) = (fmath::sin(50.0 * t), fmath::cos(50.0 * t));
    StateVector::new(alloc::vec![
        c,
        s,
        5051.0 / 2501.0 * fmath::exp(-t) - 49.0 / 2501.0 * c + 51.0 / 2501.0 * s,
    ])
}

/// Bi-directionally coupled linear system on `t in (0, 2]`: the
/// oscillator (u, v) and the slow variable w feed each other.
/// Splitting: L keeps the oscillator and the w -> u' row head,
/// N = (w, 0, -w).
pub fn make_bi_directional() -> SplitOdeProblem {
    let l = DenseMatrix::from_rows(&[&[0.0, 100.0, 0.0], &[-100.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]);
    SplitOdeProblem::new(
        0.0,
        2.0,
        StateVector::new(alloc::vec![9001.0 / 10001.0, 100000.0 / 10001.0, 1000.0]),
        Box::new(|u, out| {
            out[0] = 100.0 * u[1];
            out[1] = -100.0 * u[0];
            out[2] = u[0];
        }),
        Box::new(|_, u, out| {
            out[0] = u[2];
            out[1] = 0.0;
            out[2] = -u[2];
        }),
        Some(l),
    )
}

/// Full system matrix of the bi-directional problem (for the exact
/// matrix-exponential reference).
pub fn bi_directional_full_matrix() -> DenseMatrix {
    DenseMatrix::from_rows(&[&[0.0, 100.0, 1.0], &[-100.0, 0.0, 0.0], &[1.0, 0.0, -1.0]])
}
