//! Exact rational weights `A(n, ℓ) = multinomial(n; ℓ) · ∫_{I_k} ∏ (λ_i - λ_{i+1})^{ℓ_i} dλ`
//! over the ordered simplex `I_k = {0 < λ_k < … < λ_1 < 1}`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

/// A tuple `(ℓ_1, …, ℓ_{k-1})` of nonnegative exponents; its order is
/// `n = Σ ℓ_i` and its arity is `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Composition {
    parts: Vec<u32>,
}

impl Composition {
    /// # Panics
    /// If `parts` is empty (arity would be 1).
    pub fn new(parts: Vec<u32>) -> Self {
        assert!(!parts.is_empty(), "a composition needs at least one slot");
        Composition { parts }
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn order(&self) -> u32 {
        self.parts.iter().sum()
    }

    pub fn arity(&self) -> usize {
        self.parts.len() + 1
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// All `slots`-tuples of nonnegative integers summing to `n`, first part
/// descending: `n = 2, slots = 2` gives `(2,0), (1,1), (0,2)`.
pub fn enumerate_compositions(n: u32, slots: usize) -> Vec<Composition> {
    assert!(slots >= 1, "need at least one slot");
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(slots);
    fill(n, slots, &mut current, &mut out);
    out
}

fn fill(remaining: u32, slots: usize, current: &mut Vec<u32>, out: &mut Vec<Composition>) {
    if slots == 1 {
        current.push(remaining);
        out.push(Composition::new(current.clone()));
        current.pop();
        return;
    }
    for first in (0..=remaining).rev() {
        current.push(first);
        fill(remaining - first, slots - 1, current, out);
        current.pop();
    }
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// `B(a, b) = (a-1)! (b-1)! / (a+b-1)!` for positive integers.
fn beta(a: u64, b: u64) -> BigRational {
    assert!(a >= 1 && b >= 1, "beta arguments must be positive integers, got ({a}, {b})");
    BigRational::new(factorial(a - 1) * factorial(b - 1), factorial(a + b - 1))
}

/// `n! / (ℓ_1! ⋯ ℓ_{k-1}!)`.
pub fn multinomial(parts: &[u32]) -> BigInt {
    let n: u64 = parts.iter().map(|&p| p as u64).sum();
    let denom = parts.iter().fold(BigInt::one(), |acc, &p| acc * factorial(p as u64));
    factorial(n) / denom
}

/// `∫_{I_k} ∏_{i=1}^{k-1} (λ_i - λ_{i+1})^{ℓ_i} dλ`, exactly.
///
/// For `k = 2` this is `1/((1+n)(2+n))`; for `k ≥ 3` the substitution
/// `λ_{i+1} = λ_i s_i` factors it into
/// `1/((k+n)(ℓ_{k-1}+1)) · ∏_{i=1}^{k-2} B(ℓ_i + 1, k + n - i - Σ_{j≤i} ℓ_j)`.
pub fn simplex_integral(ell: &Composition) -> BigRational {
    let k = ell.arity() as u64;
    let n = ell.order() as u64;
    if k == 2 {
        return BigRational::new(BigInt::one(), BigInt::from((1 + n) * (2 + n)));
    }
    let last = *ell.parts.last().unwrap() as u64;
    let mut value = BigRational::new(BigInt::one(), BigInt::from((k + n) * (last + 1)));
    let mut prefix = 0u64;
    for (idx, &part) in ell.parts[..ell.parts.len() - 1].iter().enumerate() {
        let i = idx as u64 + 1;
        prefix += part as u64;
        let b = k + n - i - prefix;
        value *= beta(part as u64 + 1, b);
    }
    value
}

/// The exact weight `A(n, ℓ)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SimplexWeight(BigRational);

impl SimplexWeight {
    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().expect("weights are finite")
    }
}

impl fmt::Display for SimplexWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl Serialize for SimplexWeight {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub fn weight_a(ell: &Composition) -> SimplexWeight {
    let w = BigRational::from_integer(multinomial(&ell.parts)) * simplex_integral(ell);
    debug_assert!(w > BigRational::zero());
    SimplexWeight(w)
}

/// One row of the `A(n, ℓ)` table.
#[derive(Debug, Clone, Serialize)]
pub struct WeightRow {
    pub n: u32,
    pub k: usize,
    pub composition: Composition,
    pub weight: SimplexWeight,
}

/// Every `A(n, ℓ)` with `n ≤ max_order` and `2 ≤ k ≤ max_arity`, in
/// `(k, n, composition)` order.
pub fn weight_table(max_order: u32, max_arity: usize) -> Vec<WeightRow> {
    let mut rows = Vec::new();
    for k in 2..=max_arity {
        for n in 0..=max_order {
            for ell in enumerate_compositions(n, k - 1) {
                rows.push(WeightRow {
                    n,
                    k,
                    weight: weight_a(&ell),
                    composition: ell,
                });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn a(parts: &[u32]) -> BigRational {
        weight_a(&Composition::new(parts.to_vec())).0
    }

    #[test]
    fn enumeration_examples() {
        let c = |v: &[u32]| Composition::new(v.to_vec());
        assert_eq!(enumerate_compositions(1, 2), vec![c(&[1, 0]), c(&[0, 1])]);
        assert_eq!(enumerate_compositions(0, 3), vec![c(&[0, 0, 0])]);
        assert_eq!(enumerate_compositions(2, 2), vec![c(&[2, 0]), c(&[1, 1]), c(&[0, 2])]);
        // stars and bars: C(n + s - 1, s - 1)
        assert_eq!(enumerate_compositions(4, 3).len(), 15);
        assert_eq!(enumerate_compositions(3, 4).len(), 20);
    }

    #[test]
    fn simplex_integral_examples() {
        assert_eq!(simplex_integral(&Composition::new(vec![0])), q(1, 2));
        assert_eq!(simplex_integral(&Composition::new(vec![1])), q(1, 6));
        let mut fact = 1i64;
        for k in 2..=7usize {
            fact *= k as i64;
            assert_eq!(simplex_integral(&Composition::new(vec![0; k - 1])), q(1, fact));
        }
    }

    #[test]
    fn weights_from_closed_forms() {
        assert_eq!(a(&[1]), q(1, 6));
        assert_eq!(a(&[1, 0]), q(1, 24));
        assert_eq!(a(&[0, 1]), q(1, 24));
        assert_eq!(a(&[1, 1]), q(1, 60));
        assert_eq!(a(&[2, 0]), q(1, 60));
        assert_eq!(a(&[0, 2]), q(1, 60));
        assert_eq!(a(&[2]), q(1, 12));
        assert_eq!(a(&[3]), q(1, 20));
        assert_eq!(a(&[1, 0, 0]), q(1, 120));
        assert_eq!(a(&[0, 1, 0]), q(1, 120));
        assert_eq!(a(&[0, 0, 1]), q(1, 120));
    }

    #[test]
    fn display_is_exact_fraction() {
        assert_eq!(weight_a(&Composition::new(vec![1])).to_string(), "1/6");
        assert_eq!(Composition::new(vec![1, 0]).to_string(), "(1,0)");
    }

    #[test]
    fn multinomial_values() {
        assert_eq!(multinomial(&[2, 1, 1]), BigInt::from(12));
        assert_eq!(multinomial(&[0, 0]), BigInt::from(1));
    }

    #[test]
    fn table_is_ordered_and_complete() {
        let t = weight_table(2, 3);
        // k=2: n=0,1,2 (3 rows); k=3: 1 + 2 + 3 rows
        assert_eq!(t.len(), 9);
        assert_eq!(t[0].k, 2);
        assert_eq!(t.last().unwrap().composition, Composition::new(vec![0, 2]));
    }
}
