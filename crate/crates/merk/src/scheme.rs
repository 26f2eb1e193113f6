//! MERK scheme definitions: abscissae, polynomial coefficient tables, and
//! stage-IVP grouping plans.
//!
//! Every forcing polynomial of the second- through fifth-order schemes
//! interpolates the slow data `(0, N(t_n, u_n))` and
//! `(c_j H, N(t_n, u_n) + D_j)` over its group's data stages, so the
//! coefficient tables are expanded once, exactly, from the rational
//! abscissae. Tables are converted to floating point (and divided by the
//! matching power of H) once per polynomial build.

use alloc::vec::Vec;

use crate::error::MerkError;
use crate::forcing::ForcingPolynomial;
use crate::problem::StateVector;
use crate::rational::{frac, lagrange_weights, to_f64, Frac};

/// Scheme identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MerkOrder {
    Merk2,
    Merk3,
    Merk4,
    Merk5,
}

/// Coefficient rule mapping tendency differences to polynomial coefficients:
/// the `tau^k` coefficient is `(1 / H^k) * sum_j weights[k-1][j] * D_j`.
#[derive(Clone, Debug)]
pub struct PolynomialTable {
    pub data_stages: Vec<usize>,
    pub weights: Vec<Vec<Frac>>,
}

impl PolynomialTable {
    fn from_nodes(data_stages: Vec<usize>, nodes: &[Frac]) -> Self {
        assert_eq!(data_stages.len(), nodes.len());
        let degree = nodes.len();
        let mut weights = alloc::vec![alloc::vec![Frac::from_integer(0); nodes.len()]; degree];
        for (j, _) in nodes.iter().enumerate() {
            let basis = lagrange_weights(nodes, j);
            for (k, &w) in basis.iter().enumerate() {
                weights[k][j] = w;
            }
        }
        PolynomialTable { data_stages, weights }
    }

    fn constant() -> Self {
        PolynomialTable { data_stages: Vec::new(), weights: Vec::new() }
    }

    pub fn degree(&self) -> usize {
        self.weights.len()
    }
}

/// A group of stages served by one fast IVP solve.
#[derive(Clone, Debug)]
pub struct StageGroup {
    pub table: PolynomialTable,
    /// Interval end in units of H (the largest member abscissa).
    pub interval_end: Frac,
    /// `(stage index, abscissa)` sorted by abscissa ascending.
    pub members: Vec<(usize, Frac)>,
}

/// Which polynomial to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Group(usize),
    Final,
}

/// A MERK scheme as data: abscissae, grouping plan, and coefficient tables.
#[derive(Clone, Debug)]
pub struct MerkScheme {
    pub name: &'static str,
    pub order: u32,
    /// `abscissae[i]` is `c_{i+1}` in stage numbering (so `abscissae[0] = 0`).
    pub abscissae: Vec<Frac>,
    pub groups: Vec<StageGroup>,
    pub final_table: PolynomialTable,
    pub fast_duration_per_step: Frac,
}

impl MerkScheme {
    fn assemble(
        name: &'static str,
        order: u32,
        abscissae: Vec<Frac>,
        plan: Vec<(Vec<usize>, Vec<usize>)>,
        final_data: Vec<usize>,
    ) -> Self {
        let zero = Frac::from_integer(0);
        assert_eq!(abscissae[0], zero, "first abscissa must be 0");
        let c = |stage: usize| abscissae[stage - 1];
        let mut groups = Vec::with_capacity(plan.len());
        let mut duration = Frac::from_integer(1); // the final solve on [0, H]
        for (data_stages, member_stages) in plan {
            let nodes: Vec<Frac> = data_stages.iter().map(|&s| c(s)).collect();
            let table = if data_stages.is_empty() {
                PolynomialTable::constant()
            } else {
                PolynomialTable::from_nodes(data_stages, &nodes)
            };
            let mut members: Vec<(usize, Frac)> = member_stages.iter().map(|&s| (s, c(s))).collect();
            members.sort_by_key(|&(_, c)| c);
            for pair in members.windows(2) {
                assert!(pair[0].1 < pair[1].1, "member abscissae must be distinct");
            }
            let interval_end = members.last().expect("groups are non-empty").1;
            assert!(members.iter().all(|&(_, ci)| ci > zero && ci <= interval_end));
            duration += interval_end;
            groups.push(StageGroup { table, interval_end, members });
        }
        let final_nodes: Vec<Frac> = final_data.iter().map(|&s| c(s)).collect();
        let final_table = PolynomialTable::from_nodes(final_data, &final_nodes);
        MerkScheme { name, order, abscissae, groups, final_table, fast_duration_per_step: duration }
    }

    /// Number of stages (including stage 1 at c = 0).
    pub fn stage_count(&self) -> usize {
        self.abscissae.len()
    }

    /// Slow (`N`) evaluations performed per step: one at `(t_n, u_n)` plus
    /// one per positive-abscissa stage.
    pub fn slow_calls_per_step(&self) -> u64 {
        1 + self.groups.iter().map(|g| g.members.len() as u64).sum::<u64>()
    }

    fn table(&self, slot: Slot) -> &PolynomialTable {
        match slot {
            Slot::Group(g) => &self.groups[g].table,
            Slot::Final => &self.final_table,
        }
    }

    /// Assembles a forcing polynomial for `slot` from the slow tendency
    /// `n0 = N(t_n, u_n)` and the tendency differences computed so far.
    ///
    /// The constant coefficient is always `n0`; the `tau^k` coefficient is
    /// the exact rational table row divided by `H^k`.
    pub fn build_polynomial(
        &self,
        slot: Slot,
        n0: &StateVector,
        d_hat: &[Option<StateVector>],
        h_macro: f64,
    ) -> Result<ForcingPolynomial, MerkError> {
        if h_macro <= 0.0 {
            return Err(MerkError::ContractViolation("macro step must be positive"));
        }
        let table = self.table(slot);
        let dim = n0.dim();
        let mut coeffs = Vec::with_capacity(table.degree() + 1);
        coeffs.push(n0.clone());
        let mut h_pow = 1.0;
        for row in &table.weights {
            h_pow *= h_macro;
            let mut a_k = StateVector::zeros(dim);
            for (&stage, &w) in table.data_stages.iter().zip(row.iter()) {
                let d = d_hat
                    .get(stage)
                    .and_then(|o| o.as_ref())
                    .ok_or(MerkError::SchedulingBug { stage })?;
                a_k.add_scaled(to_f64(w) / h_pow, d);
            }
            coeffs.push(a_k);
        }
        Ok(ForcingPolynomial::new(coeffs))
    }
}

/// Second-order scheme; the free abscissa `c2` defaults to 1/2.
pub fn merk2_with(c2: Frac) -> MerkScheme {
    assert!(c2 > Frac::from_integer(0) && c2 <= Frac::from_integer(1));
    MerkScheme::assemble(
        "MERK2",
        2,
        alloc::vec![frac(0, 1), c2],
        alloc::vec![(alloc::vec![], alloc::vec![2])],
        alloc::vec![2],
    )
}

pub fn merk2() -> MerkScheme {
    merk2_with(frac(1, 2))
}

/// Third-order scheme with `c2 = 1/2`, `c3 = 2/3`.
pub fn merk3() -> MerkScheme {
    MerkScheme::assemble(
        "MERK3",
        3,
        alloc::vec![frac(0, 1), frac(1, 2), frac(2, 3)],
        alloc::vec![
            (alloc::vec![], alloc::vec![2]),
            (alloc::vec![2], alloc::vec![3]),
        ],
        alloc::vec![3],
    )
}

/// Fourth-order scheme with `c2 = c3 = 1/2`, `c4 = c6 = 1/3`, `c5 = 5/6`.
///
/// The stage pairs {3,4} and {5,6} share one fast IVP each, so the fast time
/// scale is traversed for a total of 17/6 H per step.
pub fn merk4() -> MerkScheme {
    MerkScheme::assemble(
        "MERK4",
        4,
        alloc::vec![frac(0, 1), frac(1, 2), frac(1, 2), frac(1, 3), frac(5, 6), frac(1, 3)],
        alloc::vec![
            (alloc::vec![], alloc::vec![2]),
            (alloc::vec![2], alloc::vec![3, 4]),
            (alloc::vec![3, 4], alloc::vec![5, 6]),
        ],
        alloc::vec![5, 6],
    )
}

/// Fifth-order scheme with `c2 = c3 = c5 = c9 = 1/2`, `c4 = c6 = 1/3`,
/// `c7 = 1/4`, `c8 = 7/10`, `c10 = 2/3`.
///
/// Stage groups {3,4}, {5,6,7}, and {8,9,10} each share one fast IVP; the
/// fast time scale is traversed for 16/5 H per step.
pub fn merk5() -> MerkScheme {
    MerkScheme::assemble(
        "MERK5",
        5,
        alloc::vec![
            frac(0, 1),
            frac(1, 2),
            frac(1, 2),
            frac(1, 3),
            frac(1, 2),
            frac(1, 3),
            frac(1, 4),
            frac(7, 10),
            frac(1, 2),
            frac(2, 3),
        ],
        alloc::vec![
            (alloc::vec![], alloc::vec![2]),
            (alloc::vec![2], alloc::vec![3, 4]),
            (alloc::vec![3, 4], alloc::vec![5, 6, 7]),
            (alloc::vec![5, 6, 7], alloc::vec![8, 9, 10]),
        ],
        alloc::vec![8, 9, 10],
    )
}

pub fn by_order(order: MerkOrder) -> MerkScheme {
    match order {
        MerkOrder::Merk2 => merk2(),
        MerkOrder::Merk3 => merk3(),
        MerkOrder::Merk4 => merk4(),
        MerkOrder::Merk5 => merk5(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_durations_match_scheme_constants() {
        assert_eq!(merk2().fast_duration_per_step, frac(3, 2));
        assert_eq!(merk3().fast_duration_per_step, frac(13, 6));
        assert_eq!(merk4().fast_duration_per_step, frac(17, 6));
        assert_eq!(merk5().fast_duration_per_step, frac(16, 5));
    }

    #[test]
    fn slow_calls_per_step() {
        assert_eq!(merk2().slow_calls_per_step(), 2);
        assert_eq!(merk3().slow_calls_per_step(), 3);
        assert_eq!(merk4().slow_calls_per_step(), 6);
        assert_eq!(merk5().slow_calls_per_step(), 10);
    }

    #[test]
    fn member_abscissae_stay_within_group_interval() {
        for scheme in [merk2(), merk3(), merk4(), merk5()] {
            for group in &scheme.groups {
                for &(_, ci) in &group.members {
                    assert!(ci <= group.interval_end);
                }
            }
        }
    }

    #[test]
    fn merk3_final_table_is_three_halves() {
        let s = merk3();
        assert_eq!(s.final_table.data_stages, alloc::vec![3]);
        assert_eq!(s.final_table.weights, alloc::vec![alloc::vec![frac(3, 2)]]);
    }

    #[test]
    fn merk4_third_group_coefficients() {
        // With c3 = 1/2 and c4 = 1/3 the tau and tau^2 rows reduce to
        // (-4, 9) and (12, -18).
        let s = merk4();
        let g = &s.groups[2];
        assert_eq!(g.table.data_stages, alloc::vec![3, 4]);
        assert_eq!(g.table.weights[0], alloc::vec![frac(-4, 1), frac(9, 1)]);
        assert_eq!(g.table.weights[1], alloc::vec![frac(12, 1), frac(-18, 1)]);
    }

    #[test]
    fn merk5_final_table_matches_named_coefficients() {
        // alpha_8..10 = 500/7, 28, -189/2; the tau^2 row is -beta/2 and the
        // tau^3 row is gamma/6 for beta_8..10 = 500, 164, -648 and
        // gamma_8..10 = 9000/7, 360, -1620.
        let s = merk5();
        let t = &s.final_table;
        assert_eq!(t.data_stages, alloc::vec![8, 9, 10]);
        assert_eq!(t.weights[0], alloc::vec![frac(500, 7), frac(28, 1), frac(-189, 2)]);
        assert_eq!(t.weights[1], alloc::vec![frac(-250, 1), frac(-82, 1), frac(324, 1)]);
        assert_eq!(t.weights[2], alloc::vec![frac(1500, 7), frac(60, 1), frac(-270, 1)]);
    }

    #[test]
    fn merk5_middle_group_matches_named_coefficients() {
        // Group {5,6,7} from data {3,4}: alpha_3 = -4, alpha_4 = 9 and the
        // tau^2 row is (beta_3/2, -beta_4/2) = (12, -18).
        let s = merk5();
        let g = &s.groups[2];
        assert_eq!(g.table.weights[0], alloc::vec![frac(-4, 1), frac(9, 1)]);
        assert_eq!(g.table.weights[1], alloc::vec![frac(12, 1), frac(-18, 1)]);
        // Group {8,9,10} from data {5,6,7}: alpha_5..7 = 4, -27, 32;
        // -beta/2 = -28, 162, -160; gamma/6 = 48, -216, 192.
        let g = &s.groups[3];
        assert_eq!(g.table.weights[0], alloc::vec![frac(4, 1), frac(-27, 1), frac(32, 1)]);
        assert_eq!(g.table.weights[1], alloc::vec![frac(-28, 1), frac(162, 1), frac(-160, 1)]);
        assert_eq!(g.table.weights[2], alloc::vec![frac(48, 1), frac(-216, 1), frac(192, 1)]);
    }

    #[test]
    fn build_polynomial_merk3_final() {
        let s = merk3();
        let n0 = StateVector::new(alloc::vec![1.0, -2.0]);
        let d3 = StateVector::new(alloc::vec![0.5, 0.25]);
        let mut d_hat: Vec<Option<StateVector>> = alloc::vec![None; 4];
        d_hat[3] = Some(d3);
        let h = 0.25;
        let p = s.build_polynomial(Slot::Final, &n0, &d_hat, h).unwrap();
        assert_eq!(p.degree(), 1);
        assert_eq!(p.coefficient(0).as_slice(), n0.as_slice());
        assert!((p.coefficient(1)[0] - 1.5 / h * 0.5).abs() <= 1e-15);
        assert!((p.coefficient(1)[1] - 1.5 / h * 0.25).abs() <= 1e-15);
    }

    #[test]
    fn build_polynomial_with_zero_differences_is_constant_n0() {
        let s = merk5();
        let n0 = StateVector::new(alloc::vec![3.0]);
        let mut d_hat: Vec<Option<StateVector>> = alloc::vec![None; 11];
        for entry in d_hat.iter_mut().skip(2) {
            *entry = Some(StateVector::zeros(1));
        }
        let p = s.build_polynomial(Slot::Final, &n0, &d_hat, 0.1).unwrap();
        assert_eq!(p.eval(0.07).as_slice(), &[3.0]);
    }

    #[test]
    fn missing_tendency_is_a_scheduling_bug() {
        let s = merk3();
        let n0 = StateVector::new(alloc::vec![1.0]);
        let d_hat: Vec<Option<StateVector>> = alloc::vec![None; 4];
        let err = s.build_polynomial(Slot::Final, &n0, &d_hat, 0.1).unwrap_err();
        assert_eq!(err, MerkError::SchedulingBug { stage: 3 });
    }
}
