//! Exact rational bookkeeping for abscissae, coefficient tables, and the
//! fast-duration counter.

use num_rational::Ratio;

/// Exact rational scalar used for scheme abscissae, polynomial coefficient
/// tables, and fast-duration accounting (all in units of the macro step H).
pub type Frac = Ratio<i64>;

/// Shorthand constructor; panics on a zero denominator.
pub fn frac(num: i64, den: i64) -> Frac {
    Frac::new(num, den)
}

/// Lossless-enough conversion to f64 (single rounding).
pub fn to_f64(r: Frac) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Expands the Lagrange basis polynomial through the node set
/// `{0} ∪ nodes` associated with `nodes[j]`, as coefficients of
/// `x^1 ..= x^nodes.len()` (the `x^0` coefficient is always zero because
/// every basis polynomial vanishes at the origin node).
///
/// Nodes must be nonzero and pairwise distinct.
pub fn lagrange_weights(nodes: &[Frac], j: usize) -> alloc::vec::Vec<Frac> {
    let zero = Frac::from_integer(0);
    let one = Frac::from_integer(1);
    // Numerator polynomial: x * prod_{k != j} (x - nodes[k]), then divide by
    // the scalar prod of (nodes[j] - node_k) including node 0.
    let mut poly = alloc::vec![zero, one]; // starts as `x`
    let mut denom = nodes[j]; // (nodes[j] - 0)
    for (k, &node) in nodes.iter().enumerate() {
        if k == j {
            continue;
        }
        assert!(node != nodes[j], "lagrange nodes must be distinct");
        denom *= nodes[j] - node;
        // poly <- poly * (x - node)
        let mut next = alloc::vec![zero; poly.len() + 1];
        for (power, &coeff) in poly.iter().enumerate() {
            next[power + 1] += coeff;
            next[power] -= coeff * node;
        }
        poly = next;
    }
    poly.drain(..1); // drop the zero x^0 term
    for c in poly.iter_mut() {
        *c /= denom;
    }
    poly
}
