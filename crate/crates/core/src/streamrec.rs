//! Streaming recovery of the k numbers missing from a stream over `1..=n`.
//!
//! The sketch keeps the first k power sums of the streamed set modulo a prime
//! `q` in `(n, 2n]`. Subtracting them from the power sums of the full range
//! gives the power sums of the missing set; Newton's identities turn those
//! into elementary symmetric polynomials, and the missing numbers are the
//! roots of the resulting monic polynomial, found by testing every candidate.

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{counter_width, push_uint, StateBits};

/// Largest ground set the field arithmetic supports (products stay in u64).
pub const MAX_N: usize = (1 << 31) - 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecoveryError {
    #[error("{x} is outside 1..={n}")]
    OutOfRange { x: usize, n: usize },
    #[error("{k} power sums need a modulus larger than {k}, got {q}")]
    DegenerateModulus { k: usize, q: u64 },
    #[error("ground set size {0} is not supported")]
    UnsupportedN(usize),
    #[error("inconsistent sketch: {0}")]
    InconsistentSketch(String),
    #[error("sketches over different parameters cannot be merged")]
    Incompatible,
}

/// Arithmetic modulo a prime `q < 2^32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeField {
    q: u64,
}

impl PrimeField {
    pub fn modulus(&self) -> u64 {
        self.q
    }

    /// Bits per stored field element.
    pub fn element_bits(&self) -> u64 {
        counter_width(self.q as usize - 1)
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        x % self.q
    }

    #[inline]
    pub fn add(&self, x: u64, y: u64) -> u64 {
        let s = x + y;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, x: u64, y: u64) -> u64 {
        if x >= y {
            x - y
        } else {
            x + self.q - y
        }
    }

    #[inline]
    pub fn mul(&self, x: u64, y: u64) -> u64 {
        x * y % self.q
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.q;
        base %= self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat; `x` must be nonzero mod q.
    pub fn inv(&self, x: u64) -> u64 {
        debug_assert!(!x.is_multiple_of(self.q));
        self.pow(x, self.q - 2)
    }
}

fn is_prime(m: u64) -> bool {
    if m < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= m {
        if m.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest prime in `(n, 2n]`, found by trial division.
pub fn select_prime(n: usize) -> Result<PrimeField, RecoveryError> {
    if !(2..=MAX_N).contains(&n) {
        return Err(RecoveryError::UnsupportedN(n));
    }
    let n = n as u64;
    let q = (n + 1..=2 * n)
        .find(|&m| is_prime(m))
        .expect("Bertrand's postulate");
    Ok(PrimeField { q })
}

/// First k power sums of a streamed set over `1..=n`, modulo a prime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerSumSketch {
    field: PrimeField,
    n: usize,
    sums: Vec<u64>,
    count: usize,
}

impl PowerSumSketch {
    /// Empty sketch tracking `k` power sums over `1..=n`, using the field
    /// from [`select_prime`].
    pub fn new(n: usize, k: usize) -> Result<Self, RecoveryError> {
        // n = 1 has no prime in (1, 2]; 2 still exceeds every element.
        let field = if n == 1 {
            PrimeField { q: 2 }
        } else {
            select_prime(n)?
        };
        Self::with_field(n, k, field)
    }

    pub fn with_field(n: usize, k: usize, field: PrimeField) -> Result<Self, RecoveryError> {
        if n == 0 || n > MAX_N || field.q as usize <= n {
            return Err(RecoveryError::UnsupportedN(n));
        }
        Ok(Self {
            field,
            n,
            sums: vec![0; k],
            count: 0,
        })
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of tracked power sums.
    pub fn k(&self) -> usize {
        self.sums.len()
    }

    /// `sums()[i]` is the (i+1)-th power sum.
    pub fn sums(&self) -> &[u64] {
        &self.sums
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn ingest(&mut self, x: usize) -> Result<(), RecoveryError> {
        if x == 0 || x > self.n {
            return Err(RecoveryError::OutOfRange { x, n: self.n });
        }
        let f = self.field;
        let x = x as u64;
        let mut power = x;
        for s in &mut self.sums {
            *s = f.add(*s, power);
            power = f.mul(power, x);
        }
        self.count += 1;
        Ok(())
    }

    /// Adds the sketch of a disjoint stream.
    pub fn merge(&mut self, other: &PowerSumSketch) -> Result<(), RecoveryError> {
        if self.field != other.field || self.n != other.n || self.k() != other.k() {
            return Err(RecoveryError::Incompatible);
        }
        let f = self.field;
        for (s, o) in self.sums.iter_mut().zip(&other.sums) {
            *s = f.add(*s, *o);
        }
        self.count += other.count;
        Ok(())
    }

    /// Serialized size: k field elements and the element counter.
    pub fn state_bits(&self) -> u64 {
        self.k() as u64 * self.field.element_bits() + counter_width(self.n)
    }

    pub fn encode(&self, bits: &mut StateBits) {
        let width = self.field.element_bits();
        for &s in &self.sums {
            push_uint(bits, s, width);
        }
        push_uint(bits, self.count as u64, counter_width(self.n));
    }

    pub fn to_bits(&self) -> StateBits {
        let mut bits = BitVec::new();
        self.encode(&mut bits);
        bits
    }
}

/// Elementary symmetric polynomials e_1..e_k from power sums p_1..p_k via
/// Newton's identities: i·e_i = Σ_{j=1..i} (-1)^{j-1} e_{i-j} p_j, e_0 = 1.
pub fn elementary_from_power(power: &[u64], field: PrimeField) -> Result<Vec<u64>, RecoveryError> {
    let k = power.len();
    if k as u64 >= field.q {
        return Err(RecoveryError::DegenerateModulus { k, q: field.q });
    }
    let f = field;
    // Inverses of 1..=k by the linear recurrence inv[i] = -(q / i) * inv[q mod i].
    let mut inverses = vec![0u64; k + 1];
    if k >= 1 {
        inverses[1] = 1;
    }
    for i in 2..=k {
        let i64_ = i as u64;
        inverses[i] = f.mul(f.q - f.q / i64_, inverses[(f.q % i64_) as usize]);
    }

    let mut e = Vec::with_capacity(k + 1);
    e.push(1u64);
    for i in 1..=k {
        let mut acc = 0u64;
        for j in 1..=i {
            let term = f.mul(e[i - j], f.reduce(power[j - 1]));
            acc = if j % 2 == 1 {
                f.add(acc, term)
            } else {
                f.sub(acc, term)
            };
        }
        e.push(f.mul(acc, inverses[i]));
    }
    e.remove(0);
    Ok(e)
}

/// Power sums p_1..p_k of the full range `1..=n`.
pub fn full_range_power_sums(n: usize, k: usize, field: PrimeField) -> Vec<u64> {
    let f = field;
    let mut sums = vec![0u64; k];
    for x in 1..=n as u64 {
        let mut power = x;
        for s in &mut sums {
            *s = f.add(*s, power);
            power = f.mul(power, x);
        }
    }
    sums
}

/// Evaluates x^k - e_1 x^{k-1} + e_2 x^{k-2} - ... + (-1)^k e_k by Horner.
fn root_polynomial_at(e: &[u64], x: u64, field: PrimeField) -> u64 {
    let f = field;
    let mut acc = 1u64;
    for (i, &ei) in e.iter().enumerate() {
        acc = f.mul(acc, x);
        acc = if i % 2 == 0 {
            f.sub(acc, ei)
        } else {
            f.add(acc, ei)
        };
    }
    acc
}

/// Recovers the `k` numbers of `1..=n` that never entered `seen`.
///
/// `seen` must hold at least `k` power sums of a stream of distinct numbers
/// with exactly `k` numbers missing. Only the first `k` sums are used.
pub fn recover_missing(
    seen: &PowerSumSketch,
    n: usize,
    k: usize,
) -> Result<Vec<usize>, RecoveryError> {
    if n != seen.n {
        return Err(RecoveryError::InconsistentSketch(format!(
            "sketch is over 1..={}, asked about 1..={n}",
            seen.n
        )));
    }
    if k > seen.k() {
        return Err(RecoveryError::InconsistentSketch(format!(
            "{k} missing numbers but only {} power sums tracked",
            seen.k()
        )));
    }
    if seen.count + k != n {
        return Err(RecoveryError::InconsistentSketch(format!(
            "{} numbers streamed, {k} missing, but n = {n}",
            seen.count
        )));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let f = seen.field;
    let full = full_range_power_sums(n, k, f);
    let missing_power: Vec<u64> = full
        .iter()
        .zip(&seen.sums[..k])
        .map(|(&all, &s)| f.sub(all, s))
        .collect();
    let e = elementary_from_power(&missing_power, f)?;

    let roots: Vec<usize> = (1..=n)
        .filter(|&x| root_polynomial_at(&e, x as u64, f) == 0)
        .collect();
    if roots.len() != k {
        return Err(RecoveryError::InconsistentSketch(format!(
            "expected {k} roots in 1..={n}, found {}",
            roots.len()
        )));
    }
    Ok(roots)
}
