//! Explicit Runge-Kutta tableaus for the fast (inner) solves.

use alloc::vec::Vec;

/// An explicit Butcher tableau with a declared classical order.
///
/// `a` is stored dense row-major but must be strictly lower triangular; the
/// row-sum condition `c_i = sum_j a_ij` is checked at construction.
#[derive(Clone, Debug)]
pub struct ButcherTableau {
    pub name: &'static str,
    pub declared_order: u32,
    stages: usize,
    c: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ButcherTableau {
    pub fn new(name: &'static str, declared_order: u32, c: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Self {
        let s = c.len();
        assert_eq!(a.len(), s * s, "coefficient matrix must be s x s");
        assert_eq!(b.len(), s, "weights must have one entry per stage");
        for i in 0..s {
            for j in i..s {
                assert_eq!(a[i * s + j], 0.0, "tableau must be explicit");
            }
            let row_sum: f64 = a[i * s..i * s + i].iter().sum();
            assert!(crate::fmath::abs(row_sum - c[i]) <= 1e-14, "row-sum condition violated at stage {i}");
        }
        let weight_sum: f64 = b.iter().sum();
        assert!(crate::fmath::abs(weight_sum - 1.0) <= 1e-14, "weights must sum to 1");
        ButcherTableau { name, declared_order, stages: s, c, a, b }
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn node(&self, i: usize) -> f64 {
        self.c[i]
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stages + j]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.b[i]
    }
}

/// Heun's two-stage second-order method.
pub fn heun2() -> ButcherTableau {
    ButcherTableau::new(
        "Heun-2-2",
        2,
        alloc::vec![0.0, 1.0],
        alloc::vec![
            0.0, 0.0, //
            1.0, 0.0,
        ],
        alloc::vec![0.5, 0.5],
    )
}

/// The ERK-3-3 method used as the third-order inner solver.
pub fn erk33() -> ButcherTableau {
    ButcherTableau::new(
        "ERK-3-3",
        3,
        alloc::vec![0.0, 0.5, 1.0],
        alloc::vec![
            0.0, 0.0, 0.0, //
            0.5, 0.0, 0.0, //
            -1.0, 2.0, 0.0,
        ],
        alloc::vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    )
}

/// The classical four-stage fourth-order method (ERK-4-4).
pub fn rk4_classic() -> ButcherTableau {
    ButcherTableau::new(
        "ERK-4-4",
        4,
        alloc::vec![0.0, 0.5, 0.5, 1.0],
        alloc::vec![
            0.0, 0.0, 0.0, 0.0, //
            0.5, 0.0, 0.0, 0.0, //
            0.0, 0.5, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        ],
        alloc::vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
    )
}

/// Cash-Karp 6-stage method, used with its fifth-order weights only.
pub fn cash_karp5() -> ButcherTableau {
    ButcherTableau::new(
        "Cash-Karp-ERK",
        5,
        alloc::vec![0.0, 1.0 / 5.0, 3.0 / 10.0, 3.0 / 5.0, 1.0, 7.0 / 8.0],
        alloc::vec![
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
            1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
            3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0, //
            3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0, 0.0, //
            -11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0, 0.0, //
            1631.0 / 55296.0, 175.0 / 512.0, 575.0 / 13824.0, 44275.0 / 110592.0, 253.0 / 4096.0, 0.0,
        ],
        alloc::vec![37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0],
    )
}

/// Butcher's seven-stage sixth-order method.
pub fn butcher6() -> ButcherTableau {
    ButcherTableau::new(
        "Butcher-7-6",
        6,
        alloc::vec![0.0, 0.5, 2.0 / 3.0, 1.0 / 3.0, 5.0 / 6.0, 1.0 / 6.0, 1.0],
        alloc::vec![
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
            0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
            2.0 / 9.0, 4.0 / 9.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
            7.0 / 36.0, 2.0 / 9.0, -1.0 / 12.0, 0.0, 0.0, 0.0, 0.0, //
            -35.0 / 144.0, -55.0 / 36.0, 35.0 / 48.0, 15.0 / 8.0, 0.0, 0.0, 0.0, //
            -1.0 / 360.0, -11.0 / 36.0, -1.0 / 8.0, 0.5, 1.0 / 10.0, 0.0, 0.0, //
            -41.0 / 260.0, 22.0 / 13.0, 43.0 / 156.0, -118.0 / 39.0, 32.0 / 195.0, 80.0 / 39.0, 0.0,
        ],
        alloc::vec![13.0 / 200.0, 0.0, 11.0 / 40.0, 11.0 / 40.0, 4.0 / 25.0, 4.0 / 25.0, 13.0 / 200.0],
    )
}

/// The Knoth-Wolke three-stage third-order method (outer and inner method
/// of the MIS-KW3 baseline).
pub fn knoth_wolke3() -> ButcherTableau {
    ButcherTableau::new(
        "Knoth-Wolke-ERK",
        3,
        alloc::vec![0.0, 1.0 / 3.0, 3.0 / 4.0],
        alloc::vec![
            0.0, 0.0, 0.0, //
            1.0 / 3.0, 0.0, 0.0, //
            -3.0 / 16.0, 15.0 / 16.0, 0.0,
        ],
        alloc::vec![1.0 / 6.0, 3.0 / 10.0, 8.0 / 15.0],
    )
}

/// The five inner methods of orders 2 through 6.
pub fn catalog() -> Vec<ButcherTableau> {
    alloc::vec![heun2(), erk33(), rk4_classic(), cash_karp5(), butcher6()]
}

/// Catalog lookup by declared order (2..=6).
pub fn by_order(order: u32) -> Option<ButcherTableau> {
    match order {
        2 => Some(heun2()),
        3 => Some(erk33()),
        4 => Some(rk4_classic()),
        5 => Some(cash_karp5()),
        6 => Some(butcher6()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erk33_coefficients() {
        let t = erk33();
        assert_eq!(t.weight(0), 1.0 / 6.0);
        assert_eq!(t.weight(1), 2.0 / 3.0);
        assert_eq!(t.weight(2), 1.0 / 6.0);
        assert_eq!(t.coeff(2, 0), -1.0);
        assert_eq!(t.coeff(2, 1), 2.0);
        assert_eq!(t.node(1), 0.5);
    }

    #[test]
    fn catalog_orders_are_two_through_six() {
        let orders: Vec<u32> = catalog().iter().map(|t| t.declared_order).collect();
        assert_eq!(orders, alloc::vec![2, 3, 4, 5, 6]);
        assert_eq!(cash_karp5().stages(), 6);
    }

    #[test]
    fn knoth_wolke_satisfies_third_order_conditions() {
        let t = knoth_wolke3();
        let s = t.stages();
        let bc: f64 = (0..s).map(|i| t.weight(i) * t.node(i)).sum();
        let bc2: f64 = (0..s).map(|i| t.weight(i) * t.node(i) * t.node(i)).sum();
        let bac: f64 = (0..s)
            .map(|i| {
                t.weight(i) * (0..s).map(|j| t.coeff(i, j) * t.node(j)).sum::<f64>()
            })
            .sum();
        assert!((bc - 0.5).abs() <= 1e-15);
        assert!((bc2 - 1.0 / 3.0).abs() <= 1e-15);
        assert!((bac - 1.0 / 6.0).abs() <= 1e-15);
    }
}
