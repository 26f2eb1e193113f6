//! Dense matrix exponential, phi-functions, and the exact solver for
//! linear problems with polynomial forcing.
//!
//! Everything here is an oracle: it is only meant for small dense problems
//! (dimension <= 64) used to cross-check the multirate path. The matrix
//! exponential uses [13/13] Pade with scaling and squaring; `phi_k` embeds
//! the argument in an augmented block matrix and exponentiates once, which
//! is stable where the naive recurrence `phi_k = A^{-1}(phi_{k-1} - I/(k-1)!)`
//! is not.

use alloc::vec::Vec;

use crate::error::MerkError;
use crate::forcing::ForcingPolynomial;
use crate::problem::StateVector;

/// Hard cap on oracle problem dimension.
pub const ORACLE_DIM_LIMIT: usize = 64;
/// Hard cap on the phi index.
pub const PHI_INDEX_LIMIT: usize = 8;

/// Square dense matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: alloc::vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds from rows; panics unless the slice is square.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix rows must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scaled(&self, factor: f64) -> DenseMatrix {
        let mut out = self.clone();
        for x in out.data.iter_mut() {
            *x *= factor;
        }
        out
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(other.data.iter()) {
            *x += y;
        }
        out
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(other.data.iter()) {
            *x -= y;
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.data[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row.iter()) {
                    *d += aik * b;
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        let n = self.n;
        let mut out = alloc::vec![0.0; n];
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(n)) {
            *o = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let n = self.n;
        let mut best = 0.0_f64;
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += crate::fmath::abs(self.data[i * n + j]);
            }
            best = best.max(s);
        }
        best
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0_f64, |m, (a, b)| m.max(crate::fmath::abs(a - b)))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Solves `self * X = rhs` by LU with partial pivoting, overwriting `rhs`
    /// with X. Panics on an exactly singular pivot (does not happen for the
    /// diagonally dominant Pade denominators this is used on).
    fn lu_solve_in_place(mut self, rhs: &mut DenseMatrix) {
        let n = self.n;
        assert_eq!(rhs.n, n);
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut pivot = col;
            let mut best = crate::fmath::abs(self.data[col * n + col]);
            for row in col + 1..n {
                let v = crate::fmath::abs(self.data[row * n + col]);
                if v > best {
                    best = v;
                    pivot = row;
                }
            }
            assert!(best > 0.0, "singular matrix in lu_solve");
            if pivot != col {
                for j in 0..n {
                    self.data.swap(col * n + j, pivot * n + j);
                }
                perm.swap(col, pivot);
            }
            let diag = self.data[col * n + col];
            for row in col + 1..n {
                let factor = self.data[row * n + col] / diag;
                self.data[row * n + col] = factor;
                for j in col + 1..n {
                    self.data[row * n + j] -= factor * self.data[col * n + j];
                }
            }
        }
        // Apply row permutation to the right-hand side.
        let mut permuted = alloc::vec![0.0; n * n];
        for (row, &src) in perm.iter().enumerate() {
            permuted[row * n..(row + 1) * n].copy_from_slice(&rhs.data[src * n..(src + 1) * n]);
        }
        rhs.data.copy_from_slice(&permuted);
        // Forward substitution (unit lower triangle).
        for col in 0..n {
            for row in col + 1..n {
                let factor = self.data[row * n + col];
                for j in 0..n {
                    rhs.data[row * n + j] -= factor * rhs.data[col * n + j];
                }
            }
        }
        // Back substitution.
        for col in (0..n).rev() {
            let diag = self.data[col * n + col];
            for j in 0..n {
                rhs.data[col * n + j] /= diag;
            }
            for row in 0..col {
                let factor = self.data[row * n + col];
                for j in 0..n {
                    rhs.data[row * n + j] -= factor * rhs.data[col * n + j];
                }
            }
        }
    }
}

impl core::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// [13/13] Pade numerator coefficients (Higham 2005).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
/// Scaling threshold theta_13 for the [13/13] approximant.
const PADE13_THETA: f64 = 5.371920351148152;

fn expm_unchecked(a: &DenseMatrix) -> DenseMatrix {
    // Scale so the 1-norm is below theta_13, apply Pade, square back.
    let mut squarings = 0u32;
    let mut norm = a.one_norm();
    let mut shrink = 1.0;
    while norm > PADE13_THETA {
        norm *= 0.5;
        shrink *= 0.5;
        squarings += 1;
    }
    let a_scaled = a.scaled(shrink);

    let a2 = a_scaled.matmul(&a_scaled);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let n = a.dim();
    let ident = DenseMatrix::identity(n);

    // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let u_inner = a6
        .scaled(PADE13[13])
        .add(&a4.scaled(PADE13[11]))
        .add(&a2.scaled(PADE13[9]));
    let u_poly = a6
        .matmul(&u_inner)
        .add(&a6.scaled(PADE13[7]))
        .add(&a4.scaled(PADE13[5]))
        .add(&a2.scaled(PADE13[3]))
        .add(&ident.scaled(PADE13[1]));
    let u = a_scaled.matmul(&u_poly);
    // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let v_inner = a6
        .scaled(PADE13[12])
        .add(&a4.scaled(PADE13[10]))
        .add(&a2.scaled(PADE13[8]));
    let v = a6
        .matmul(&v_inner)
        .add(&a6.scaled(PADE13[6]))
        .add(&a4.scaled(PADE13[4]))
        .add(&a2.scaled(PADE13[2]))
        .add(&ident.scaled(PADE13[0]));

    let denom = v.sub(&u);
    let mut result = v.add(&u);
    denom.lu_solve_in_place(&mut result);
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

fn check_oracle_scale(dim: usize) -> Result<(), MerkError> {
    if dim > ORACLE_DIM_LIMIT {
        Err(MerkError::OracleScaleExceeded { dimension: dim, limit: ORACLE_DIM_LIMIT })
    } else {
        Ok(())
    }
}

/// Matrix exponential `e^A` (scaling and squaring, [13/13] Pade).
pub fn expm(a: &DenseMatrix) -> Result<DenseMatrix, MerkError> {
    check_oracle_scale(a.dim())?;
    if !a.is_finite() {
        return Err(MerkError::ContractViolation("expm requires finite entries"));
    }
    Ok(expm_unchecked(a))
}

/// All of `phi_0(A) ..= phi_k(A)` from one augmented exponential.
///
/// The block matrix `W = [[A, I, 0], [0, 0, I], [0, 0, 0]]` (with k shifted
/// identity blocks) satisfies `e^W = [[e^A, phi_1(A), ..., phi_k(A)], ...]`,
/// so a single `expm` of dimension `(k+1) d` yields the whole family.
pub fn phi_upto(k: usize, a: &DenseMatrix) -> Result<Vec<DenseMatrix>, MerkError> {
    check_oracle_scale(a.dim())?;
    if k > PHI_INDEX_LIMIT {
        return Err(MerkError::ContractViolation("phi index limited to k <= 8"));
    }
    let d = a.dim();
    if k == 0 {
        return Ok(alloc::vec![expm(a)?]);
    }
    let big = (k + 1) * d;
    let mut w = DenseMatrix::zeros(big);
    for i in 0..d {
        for j in 0..d {
            w[(i, j)] = a[(i, j)];
        }
    }
    for block in 0..k {
        for i in 0..d {
            w[(block * d + i, (block + 1) * d + i)] = 1.0;
        }
    }
    let e = expm_unchecked(&w);
    let mut out = Vec::with_capacity(k + 1);
    for block in 0..=k {
        let mut m = DenseMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = e[(i, block * d + j)];
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// `phi_k(A)`; `phi_0 = e^A`, and `phi_k(0) = I / k!`.
pub fn phi(k: usize, a: &DenseMatrix) -> Result<DenseMatrix, MerkError> {
    Ok(phi_upto(k, a)?.pop().expect("phi_upto returns k+1 matrices"))
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Exact solution at time `T` of `y' = L y + poly(tau)`, `y(0) = y0`:
///
/// ```text
/// y(T) = e^{T L} y0 + sum_j j! T^{j+1} phi_{j+1}(T L) a_j
/// ```
///
/// where `a_j` are the polynomial coefficients. Exact up to the accuracy of
/// the phi evaluations.
pub fn solve_modified_ivp_exact(
    l: &DenseMatrix,
    poly: &ForcingPolynomial,
    y0: &StateVector,
    t: f64,
) -> Result<StateVector, MerkError> {
    if poly.degree() > 7 {
        return Err(MerkError::ContractViolation("forcing degree limited to <= 7"));
    }
    if y0.dim() != l.dim() {
        return Err(MerkError::ContractViolation("state dimension mismatch"));
    }
    let phis = phi_upto(poly.degree() + 1, &l.scaled(t))?;
    let mut y = StateVector::new(phis[0].mat_vec(y0.as_slice()));
    let mut t_pow = t;
    for j in 0..=poly.degree() {
        let term = phis[j + 1].mat_vec(poly.coefficient(j).as_slice());
        y.add_scaled(factorial(j) * t_pow, &StateVector::new(term));
        t_pow *= t;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_matrix(rng: &mut impl Rng, n: usize, norm_cap: f64) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        let norm = m.one_norm();
        if norm > norm_cap {
            m = m.scaled(norm_cap / norm);
        }
        m
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm(&DenseMatrix::zeros(4)).unwrap();
        assert_eq!(e.max_abs_diff(&DenseMatrix::identity(4)), 0.0);
    }

    #[test]
    fn expm_of_diagonal() {
        let mut a = DenseMatrix::zeros(3);
        let entries = [0.3, -1.7, 2.5];
        for (i, &x) in entries.iter().enumerate() {
            a[(i, i)] = x;
        }
        let e = expm(&a).unwrap();
        for (i, &x) in entries.iter().enumerate() {
            assert!((e[(i, i)] - crate::fmath::exp(x)).abs() <= 1e-14 * crate::fmath::exp(x));
        }
        assert!(e[(0, 1)].abs() < 1e-16);
    }

    #[test]
    fn expm_matches_closed_form_rotation_system() {
        // Full matrix of the one-directional test problem; u(1) has a
        // closed form with u = cos(50), v = sin(50).
        let a = DenseMatrix::from_rows(&[&[0.0, -50.0, 0.0], &[50.0, 0.0, 0.0], &[1.0, 1.0, -1.0]]);
        let e = expm(&a).unwrap();
        let u1 = e.mat_vec(&[1.0, 0.0, 2.0]);
        let expected = [
            crate::fmath::cos(50.0),
            crate::fmath::sin(50.0),
            5051.0 / 2501.0 * crate::fmath::exp(-1.0) - 49.0 / 2501.0 * crate::fmath::cos(50.0)
                + 51.0 / 2501.0 * crate::fmath::sin(50.0),
        ];
        for i in 0..3 {
            assert!((u1[i] - expected[i]).abs() <= 1e-11, "component {i}: {} vs {}", u1[i], expected[i]);
        }
    }

    #[test]
    fn expm_group_property() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 6, 2.0);
            let e1 = expm(&a).unwrap();
            let e2 = expm(&a.scaled(2.0)).unwrap();
            assert!(e1.matmul(&e1).max_abs_diff(&e2) <= 1e-11);
        }
    }

    #[test]
    fn phi_zero_argument_is_inverse_factorial() {
        let z = DenseMatrix::zeros(5);
        for k in 1..=6 {
            let p = phi(k, &z).unwrap();
            let expected = 1.0 / factorial(k);
            for i in 0..5 {
                for j in 0..5 {
                    let want = if i == j { expected } else { 0.0 };
                    assert!(
                        (p[(i, j)] - want).abs() <= 4.0 * f64::EPSILON * expected,
                        "phi_{k}(0)[{i},{j}] = {}",
                        p[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn phi_zero_index_is_expm() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 4, 3.0);
        let p0 = phi(0, &a).unwrap();
        assert!(p0.max_abs_diff(&expm(&a).unwrap()) == 0.0);
    }

    #[test]
    fn phi_recurrence_residual() {
        // A phi_k(A) = phi_{k-1}(A) - I/(k-1)!, checked on random matrices.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = random_matrix(&mut rng, 5, 1.0);
            let phis = phi_upto(6, &a).unwrap();
            for k in 1..=6 {
                let ident = DenseMatrix::identity(5).scaled(1.0 / factorial(k - 1));
                let residual = a.matmul(&phis[k]).sub(&phis[k - 1]).add(&ident);
                assert!(residual.one_norm() <= 1e-12, "k={k}: residual {}", residual.one_norm());
            }
        }
    }

    #[test]
    fn oracle_scale_is_enforced() {
        let a = DenseMatrix::zeros(65);
        assert!(matches!(expm(&a), Err(MerkError::OracleScaleExceeded { .. })));
    }

    #[test]
    fn exact_ivp_homogeneous_and_quadrature_cases() {
        use crate::problem::StateVector;
        let l = DenseMatrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let y0 = StateVector::new(alloc::vec![1.0, 0.0]);

        // poly == 0: pure matrix exponential propagation.
        let zero = ForcingPolynomial::constant(StateVector::zeros(2));
        let y = solve_modified_ivp_exact(&l, &zero, &y0, 0.7).unwrap();
        let e = expm(&l.scaled(0.7)).unwrap();
        let want = e.mat_vec(y0.as_slice());
        for i in 0..2 {
            assert!((y[i] - want[i]).abs() <= 1e-14);
        }

        // L = 0, constant forcing: y0 + T a0.
        let l0 = DenseMatrix::zeros(2);
        let a0 = StateVector::new(alloc::vec![2.0, -3.0]);
        let y = solve_modified_ivp_exact(&l0, &ForcingPolynomial::constant(a0), &y0, 0.5).unwrap();
        assert!((y[0] - 2.0).abs() <= 1e-15 && (y[1] + 1.5).abs() <= 1e-15);

        // L = 0, linear forcing a1 tau: y0 + T^2/2 a1.
        let poly = ForcingPolynomial::new(alloc::vec![
            StateVector::zeros(2),
            StateVector::new(alloc::vec![4.0, 1.0]),
        ]);
        let y = solve_modified_ivp_exact(&l0, &poly, &y0, 0.5).unwrap();
        assert!((y[0] - (1.0 + 0.125 * 4.0)).abs() <= 1e-15);
        assert!((y[1] - 0.125).abs() <= 1e-15);
    }
}
