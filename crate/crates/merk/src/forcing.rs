//! Vector-valued forcing polynomials in the fast time variable `tau`.

use alloc::vec::Vec;

use crate::problem::StateVector;

/// `p(tau) = a_0 + a_1 tau + ... + a_deg tau^deg` with vector coefficients.
///
/// In a MERK scheme the constant coefficient is always the slow tendency
/// `N(t_n, u_n)` and the higher coefficients are combinations of stage
/// tendency differences; degree never exceeds 3.
#[derive(Clone, Debug)]
pub struct ForcingPolynomial {
    coeffs: Vec<StateVector>,
}

impl ForcingPolynomial {
    /// Builds from coefficients `a_0 ..= a_deg`; they must share a dimension.
    pub fn new(coeffs: Vec<StateVector>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs at least a constant term");
        let dim = coeffs[0].dim();
        assert!(coeffs.iter().all(|c| c.dim() == dim), "coefficient dimension mismatch");
        ForcingPolynomial { coeffs }
    }

    pub fn constant(a0: StateVector) -> Self {
        Self::new(alloc::vec![a0])
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].dim()
    }

    pub fn coefficient(&self, j: usize) -> &StateVector {
        &self.coeffs[j]
    }

    /// Adds `p(tau)` onto `out` (componentwise Horner).
    pub fn eval_add(&self, tau: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        if self.coeffs.len() == 1 {
            for (o, &c) in out.iter_mut().zip(self.coeffs[0].as_slice()) {
                *o += c;
            }
            return;
        }
        let deg = self.degree();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = self.coeffs[deg][i];
            for j in (0..deg).rev() {
                acc = acc * tau + self.coeffs[j][i];
            }
            *o += acc;
        }
    }

    pub fn eval(&self, tau: f64) -> StateVector {
        let mut out = alloc::vec![0.0; self.dim()];
        self.eval_add(tau, &mut out);
        StateVector::new(out)
    }
}
