//! Prime-field arithmetic and the Galois-field transform pair.
//!
//! Tone indices live in GF(p) with p prime, so a uniform integer frequency
//! shift of a codeword is exactly field addition of a constant vector. The
//! transform `Z` has entries `beta^(r*c)` where `beta` has multiplicative
//! order exactly `n`; it is a length-`n` field DFT and its inverse is
//! `n^-1 * [beta^(-r*c)]`.

use crate::error::{domain, Result};

/// Field elements are stored reduced in `[0, p)`.
pub type Element = u32;

/// Largest modulus accepted (exclusive).
pub const MAX_MODULUS: u32 = 1 << 16;

/// Deterministic trial-division primality test.
pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u32;
    while (d as u64) * (d as u64) <= n as u64 {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Distinct prime factors of `n`, ascending.
fn prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= n as u64 {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn pow_mod(base: u32, mut exp: u64, p: u32) -> u32 {
    let p64 = p as u64;
    let mut b = base as u64 % p64;
    let mut acc = 1 % p64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % p64;
        }
        b = b * b % p64;
        exp >>= 1;
    }
    acc as u32
}

/// Smallest primitive root of the prime `p`.
///
/// `a` is primitive iff `a^((p-1)/q) != 1` for every prime `q | p-1`.
pub fn find_primitive_root(p: u32) -> Result<Element> {
    if !is_prime(p) {
        return domain(format!("{p} is not prime"));
    }
    if p >= MAX_MODULUS {
        return domain(format!("modulus {p} exceeds {MAX_MODULUS}"));
    }
    if p == 2 {
        return Ok(1);
    }
    let order = p - 1;
    let factors = prime_factors(order);
    (2..p)
        .find(|&a| factors.iter().all(|&q| pow_mod(a, (order / q) as u64, p) != 1))
        .ok_or_else(|| crate::Error::Domain(format!("no primitive root for {p}")))
}

/// The prime field GF(p) together with a fixed primitive root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    p: u32,
    alpha: u32,
}

impl PrimeField {
    /// GF(p) with its smallest primitive root.
    pub fn new(p: u32) -> Result<Self> {
        let alpha = find_primitive_root(p)?;
        Ok(Self { p, alpha })
    }

    /// GF(p) with a caller-chosen primitive root, which is verified.
    pub fn with_root(p: u32, alpha: u32) -> Result<Self> {
        let field = Self::new(p)?;
        if alpha == 0 || alpha >= p || field.order_of(alpha) != p - 1 {
            return domain(format!("{alpha} is not a primitive root of {p}"));
        }
        Ok(Self { p, alpha })
    }

    #[inline]
    pub fn modulus(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn primitive_root(&self) -> Element {
        self.alpha
    }

    #[inline]
    pub fn add(&self, a: Element, b: Element) -> Element {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: Element, b: Element) -> Element {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(&self, a: Element) -> Element {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: Element, b: Element) -> Element {
        ((a as u64 * b as u64) % self.p as u64) as u32
    }

    pub fn pow(&self, a: Element, exp: u64) -> Element {
        pow_mod(a, exp, self.p)
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(&self, a: Element) -> Result<Element> {
        if a.is_multiple_of(self.p) {
            return domain("inverse of zero");
        }
        Ok(self.pow(a, (self.p - 2) as u64))
    }

    /// Reduces any signed integer into `[0, p)`.
    #[inline]
    pub fn reduce(&self, x: i64) -> Element {
        x.rem_euclid(self.p as i64) as u32
    }

    /// Signed representative in `(-p/2, p/2]`.
    #[inline]
    pub fn signed(&self, a: Element) -> i64 {
        let a = a as i64;
        let p = self.p as i64;
        if a > p / 2 {
            a - p
        } else {
            a
        }
    }

    /// Multiplicative order of a non-zero element.
    pub fn order_of(&self, a: Element) -> u32 {
        debug_assert!(!a.is_multiple_of(self.p));
        let group = self.p - 1;
        let mut order = group;
        for q in prime_factors(group) {
            while order.is_multiple_of(q) && self.pow(a, (order / q) as u64) == 1 {
                order /= q;
            }
        }
        order
    }
}

/// Forward/inverse transform pair of length `n` over a prime field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GftPair {
    field: PrimeField,
    n: usize,
    beta: Element,
    n_inv: Element,
    /// Row-major `n x n`, entry `(r, c) = beta^(r*c)`.
    z: Vec<Element>,
    /// Row-major `n x n`, entry `(r, c) = n^-1 * beta^(-r*c)`.
    z_inv: Vec<Element>,
}

impl GftPair {
    /// Builds the pair with `beta = alpha^((p-1)/n)`. Requires `n | p-1`.
    pub fn new(field: PrimeField, n: usize) -> Result<Self> {
        let group = (field.modulus() - 1) as usize;
        if n == 0 || !group.is_multiple_of(n) {
            return domain(format!(
                "transform length {n} must divide p-1 = {group}"
            ));
        }
        let beta = field.pow(field.primitive_root(), (group / n) as u64);
        let beta_inv = field.inv(beta)?;
        let n_inv = field.inv((n as u64 % field.modulus() as u64) as u32)?;

        let mut z = vec![0; n * n];
        let mut z_inv = vec![0; n * n];
        for r in 0..n {
            for c in 0..n {
                let e = ((r * c) % n) as u64;
                z[r * n + c] = field.pow(beta, e);
                z_inv[r * n + c] = field.mul(n_inv, field.pow(beta_inv, e));
            }
        }
        Ok(Self {
            field,
            n,
            beta,
            n_inv,
            z,
            z_inv,
        })
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn beta(&self) -> Element {
        self.beta
    }

    /// `n^-1` in the field, the scale on the inverse transform.
    pub fn n_inv(&self) -> Element {
        self.n_inv
    }

    pub fn z(&self, row: usize, col: usize) -> Element {
        self.z[row * self.n + col]
    }

    pub fn z_inv(&self, row: usize, col: usize) -> Element {
        self.z_inv[row * self.n + col]
    }

    fn apply(&self, m: &[Element], x: &[Element]) -> Vec<Element> {
        assert_eq!(x.len(), self.n, "vector length must equal transform length");
        let p = self.field.modulus() as u64;
        m.chunks_exact(self.n)
            .map(|row| {
                let acc = row
                    .iter()
                    .zip(x)
                    .fold(0u64, |acc, (&a, &b)| (acc + a as u64 * b as u64) % p);
                acc as u32
            })
            .collect()
    }

    /// `Z x`.
    pub fn forward(&self, x: &[Element]) -> Vec<Element> {
        self.apply(&self.z, x)
    }

    /// `Z^-1 x`.
    pub fn inverse(&self, x: &[Element]) -> Vec<Element> {
        self.apply(&self.z_inv, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Order by repeated multiplication; independent of `order_of`.
    fn brute_order(a: u32, p: u32) -> u32 {
        let mut x = a % p;
        let mut k = 1;
        while x != 1 {
            x = (x as u64 * a as u64 % p as u64) as u32;
            k += 1;
        }
        k
    }

    #[test]
    fn field_ops_small_cases() {
        let f = PrimeField::new(7).unwrap();
        assert_eq!(f.mul(3, 5), 1);
        assert_eq!(f.add(6, 1), 0);
        assert_eq!(f.sub(2, 5), 4);
        assert_eq!(f.neg(3), 4);
        assert_eq!(f.inv(1).unwrap(), 1);
        for p in [2, 3, 23, 199, 65521] {
            assert_eq!(PrimeField::new(p).unwrap().inv(1).unwrap(), 1);
        }
        assert!(matches!(f.inv(0), Err(crate::Error::Domain(_))));
        assert_eq!(f.signed(6), -1);
        assert_eq!(f.signed(3), 3);
        assert_eq!(f.reduce(-1), 6);
    }

    #[test]
    fn primitive_roots_small_primes() {
        assert_eq!(find_primitive_root(3).unwrap(), 2);
        assert_eq!(find_primitive_root(5).unwrap(), 2);
        assert_eq!(find_primitive_root(7).unwrap(), 3);
        assert_eq!(find_primitive_root(23).unwrap(), 5);
        assert!(find_primitive_root(9).is_err());
        assert!(find_primitive_root(1).is_err());
        assert!(PrimeField::new(256).is_err());
    }

    #[test]
    fn primitive_root_matches_brute_force_below_1000() {
        for p in (3..1000u32).filter(|&p| is_prime(p)) {
            let expected = (1..p).find(|&a| brute_order(a, p) == p - 1).unwrap();
            assert_eq!(find_primitive_root(p).unwrap(), expected, "p = {p}");
            let f = PrimeField::new(p).unwrap();
            assert_eq!(f.order_of(expected), brute_order(expected, p));
        }
    }

    #[test]
    fn with_root_rejects_non_primitive() {
        assert!(PrimeField::with_root(7, 2).is_err());
        assert_eq!(PrimeField::with_root(7, 5).unwrap().primitive_root(), 5);
    }

    #[test]
    fn gft_p23_n11() {
        let g = GftPair::new(PrimeField::new(23).unwrap(), 11).unwrap();
        assert_eq!(g.field().primitive_root(), 5);
        assert_eq!(g.beta(), 2);
        assert_eq!(g.n_inv(), 21);
        assert_eq!(brute_order(g.beta(), 23), 11);
        for i in 0..11 {
            assert_eq!(g.z(0, i), 1);
            assert_eq!(g.z(i, 0), 1);
        }
    }

    #[test]
    fn gft_rejects_non_divisor() {
        let f = PrimeField::new(23).unwrap();
        assert!(GftPair::new(f, 5).is_err());
        assert!(GftPair::new(f, 0).is_err());
    }

    #[test]
    fn z_times_z_inv_is_identity() {
        for (p, n) in [(23, 11), (23, 22), (11, 5), (29, 7), (67, 11), (199, 11), (7, 1)] {
            let g = GftPair::new(PrimeField::new(p).unwrap(), n).unwrap();
            let f = g.field();
            for r in 0..n {
                for c in 0..n {
                    let mut acc = 0;
                    for k in 0..n {
                        acc = f.add(acc, f.mul(g.z(r, k), g.z_inv(k, c)));
                    }
                    assert_eq!(acc, (r == c) as u32, "p={p} n={n} ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn inverse_of_all_ones_is_e0() {
        for (p, n) in [(23, 11), (11, 5), (199, 11), (29, 7)] {
            let g = GftPair::new(PrimeField::new(p).unwrap(), n).unwrap();
            let w = g.inverse(&vec![1; n]);
            assert_eq!(w[0], 1);
            assert!(w[1..].iter().all(|&x| x == 0));
        }
    }

    proptest! {
        #[test]
        fn transform_round_trip(seed in proptest::collection::vec(0u32..199, 11)) {
            let g = GftPair::new(PrimeField::new(199).unwrap(), 11).unwrap();
            prop_assert_eq!(g.inverse(&g.forward(&seed)), seed.clone());
            prop_assert_eq!(g.forward(&g.inverse(&seed)), seed);
        }
    }
}
