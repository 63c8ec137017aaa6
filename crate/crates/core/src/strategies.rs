//! Strategies for the mirror game.
//!
//! Every strategy implements [`Strategy`] and declares a canonical state
//! encoding. Fixed-width fields use [`counter_width`]`(n)` bits per number.
//!
//! | strategy            | state                                   |
//! |---------------------|-----------------------------------------|
//! | mirror, tuple, odd  | pending reply                           |
//! | rand-log            | pending reply                           |
//! | unsaid pickers      | said bitmap, said count, optional T / D |
//! | rand-sqrt           | backups, flags, power sums, reply, tail |
//! | constant            | nothing                                 |

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use bitvec::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{counter_width, push_uint, GameConfig, Player, StateBits, Strategy, Tape};
use crate::streamrec::{recover_missing, PowerSumSketch};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StrategyError {
    #[error("n = {0} must be even")]
    OddN(usize),
    #[error("n = {0} must be odd")]
    EvenN(usize),
    #[error("b + 1 = {tuple} does not divide n = {n}")]
    Indivisible { n: usize, tuple: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown strategy {0:?}")]
    Unknown(String),
    #[error("strategy {name} cannot play as {player}")]
    WrongRole { name: String, player: Player },
}

/// A perfect matching on `1..=n`, queried as an involution.
#[derive(Debug)]
pub struct MatchingOracle {
    partner: Vec<usize>,
    queries: AtomicU64,
}

impl Clone for MatchingOracle {
    fn clone(&self) -> Self {
        Self {
            partner: self.partner.clone(),
            queries: AtomicU64::new(self.query_count()),
        }
    }
}

impl PartialEq for MatchingOracle {
    fn eq(&self, other: &Self) -> bool {
        self.partner == other.partner
    }
}

impl MatchingOracle {
    /// Builds the matching from explicit pairs covering `1..=n`.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self, StrategyError> {
        if !n.is_multiple_of(2) {
            return Err(StrategyError::OddN(n));
        }
        let mut partner = vec![0usize; n + 1];
        for &(x, y) in pairs {
            let ok = (1..=n).contains(&x) && (1..=n).contains(&y) && x != y;
            if !ok || partner[x] != 0 || partner[y] != 0 {
                return Err(StrategyError::InvalidParameter(format!(
                    "({x},{y}) is not a valid matching edge"
                )));
            }
            partner[x] = y;
            partner[y] = x;
        }
        if partner[1..].contains(&0) {
            return Err(StrategyError::InvalidParameter(
                "pairs do not cover every number".into(),
            ));
        }
        Ok(Self {
            partner,
            queries: AtomicU64::new(0),
        })
    }

    pub fn n(&self) -> usize {
        self.partner.len() - 1
    }

    /// Partner of `x`. Counts the query.
    pub fn matched(&self, x: usize) -> usize {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.partner[x]
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Pairs `(x, y)` with `x < y`, sorted by `x`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (1..=self.n())
            .filter(|&x| x < self.partner[x])
            .map(|x| (x, self.partner[x]))
            .collect()
    }
}

/// Uniformly random perfect matching on `1..=n`: shuffle, then pair up
/// consecutive positions. Every matching is hit by exactly 2^{n/2}(n/2)!
/// permutations.
pub fn sample_matching(n: usize, seed: u64) -> Result<MatchingOracle, StrategyError> {
    if !n.is_multiple_of(2) {
        return Err(StrategyError::OddN(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(&mut rng);
    let pairs: Vec<(usize, usize)> = order.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    MatchingOracle::from_pairs(n, &pairs)
}

// ---------------------------------------------------------------------------
// Pairing strategies
// ---------------------------------------------------------------------------

/// Replies to each opponent number with a fixed function of it.
#[derive(Clone)]
struct PairingReply {
    name: &'static str,
    n: usize,
    pending: usize,
    rule: PairingRule,
}

#[derive(Clone, Copy)]
enum PairingRule {
    /// x -> n + 1 - x
    Mirror,
    /// x -> n - x, opening with n
    OddMirror,
}

impl Strategy for PairingReply {
    fn name(&self) -> String {
        self.name.to_string()
    }

    fn quota(&self) -> usize {
        1
    }

    fn budget_bits(&self) -> u64 {
        counter_width(self.n)
    }

    fn state_bits(&self) -> u64 {
        counter_width(self.n)
    }

    fn encode_state(&self) -> StateBits {
        let mut bits = StateBits::new();
        push_uint(&mut bits, self.pending as u64, counter_width(self.n));
        bits
    }

    fn start(&mut self, _tape: &mut Tape) {
        self.pending = match self.rule {
            PairingRule::Mirror => 0,
            PairingRule::OddMirror => self.n,
        };
    }

    fn observe(&mut self, opponent: &[usize], _round: usize, _tape: &mut Tape) {
        let y = opponent[0];
        self.pending = match self.rule {
            PairingRule::Mirror => self.n + 1 - y,
            // y = n is only possible after an illegal repeat; answer with a
            // repeat rather than an out-of-range number.
            PairingRule::OddMirror if y == self.n => self.n,
            PairingRule::OddMirror => self.n - y,
        };
    }

    fn respond(&mut self, _round: usize, _tape: &mut Tape) -> Vec<usize> {
        vec![self.pending]
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Bob's mirror strategy for even n: answer x with n + 1 - x.
pub fn bob_mirror(n: usize) -> Result<Box<dyn Strategy>, StrategyError> {
    if !n.is_multiple_of(2) || n == 0 {
        return Err(StrategyError::OddN(n));
    }
    Ok(Box::new(PairingReply {
        name: "mirror",
        n,
        pending: 0,
        rule: PairingRule::Mirror,
    }))
}

/// Alice's strategy for odd n: open with n, then answer y with n - y.
pub fn alice_odd_mirror(n: usize) -> Result<Box<dyn Strategy>, StrategyError> {
    if n.is_multiple_of(2) {
        return Err(StrategyError::EvenN(n));
    }
    Ok(Box::new(PairingReply {
        name: "odd-mirror",
        n,
        pending: n,
        rule: PairingRule::OddMirror,
    }))
}

/// Bob's strategy for the (1,b)-game with (b+1) | n: answer x with the rest
/// of the consecutive (b+1)-block containing x.
#[derive(Clone)]
struct TupleMirror {
    n: usize,
    b: usize,
    pending: usize,
}

impl Strategy for TupleMirror {
    fn name(&self) -> String {
        "tuple-mirror".into()
    }

    fn quota(&self) -> usize {
        self.b
    }

    fn budget_bits(&self) -> u64 {
        counter_width(self.n)
    }

    fn state_bits(&self) -> u64 {
        counter_width(self.n)
    }

    fn encode_state(&self) -> StateBits {
        let mut bits = StateBits::new();
        push_uint(&mut bits, self.pending as u64, counter_width(self.n));
        bits
    }

    fn start(&mut self, _tape: &mut Tape) {
        self.pending = 0;
    }

    fn observe(&mut self, opponent: &[usize], _round: usize, _tape: &mut Tape) {
        self.pending = opponent[0];
    }

    fn respond(&mut self, _round: usize, _tape: &mut Tape) -> Vec<usize> {
        let x = self.pending.max(1);
        let width = self.b + 1;
        let first = (x - 1) / width * width + 1;
        (first..first + width).filter(|&y| y != x).collect()
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

pub fn bob_tuple_mirror(n: usize, b: usize) -> Result<Box<dyn Strategy>, StrategyError> {
    if b == 0 {
        return Err(StrategyError::InvalidParameter("b must be positive".into()));
    }
    if n == 0 || !n.is_multiple_of(b + 1) {
        return Err(StrategyError::Indivisible { n, tuple: b + 1 });
    }
    Ok(Box::new(TupleMirror { n, b, pending: 0 }))
}

// ---------------------------------------------------------------------------
// Full-memory pickers
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
enum PickRule {
    Smallest,
    Largest,
    Uniform,
    /// Smallest unsaid member of T, then smallest unsaid overall.
    PreferSet(BitVec<u64, Lsb0>),
    /// Smallest unsaid non-member of D, then smallest unsaid member of D.
    AvoidSet(BitVec<u64, Lsb0>),
}

/// Remembers every number said so far and picks fresh numbers by a rule.
/// Number `x` lives at bit `x - 1`.
#[derive(Clone)]
struct UnsaidPicker {
    name: String,
    n: usize,
    quota: usize,
    said: BitVec<u64, Lsb0>,
    count: usize,
    rule: PickRule,
}

/// First index set in `mask` and clear in `said`, optionally inverting `mask`.
fn first_masked_unsaid(
    mask: &BitVec<u64, Lsb0>,
    said: &BitVec<u64, Lsb0>,
    invert: bool,
    n: usize,
) -> Option<usize> {
    mask.as_raw_slice()
        .iter()
        .zip(said.as_raw_slice())
        .enumerate()
        .find_map(|(w, (&m, &s))| {
            let m = if invert { !m } else { m };
            let free = m & !s;
            (free != 0).then(|| w * 64 + free.trailing_zeros() as usize)
        })
        .filter(|&i| i < n)
}

/// Index of the `j`-th (0-based) clear bit of `said` below `n`.
fn nth_unsaid(said: &BitVec<u64, Lsb0>, mut j: usize, n: usize) -> Option<usize> {
    for (w, &word) in said.as_raw_slice().iter().enumerate() {
        let mut free = !word;
        let zeros = free.count_ones() as usize;
        if j >= zeros {
            j -= zeros;
            continue;
        }
        for _ in 0..j {
            free &= free - 1;
        }
        let i = w * 64 + free.trailing_zeros() as usize;
        return (i < n).then_some(i);
    }
    None
}

impl UnsaidPicker {
    fn new(name: String, n: usize, quota: usize, rule: PickRule) -> Self {
        Self {
            name,
            n,
            quota,
            said: bitvec![u64, Lsb0; 0; n],
            count: 0,
            rule,
        }
    }

    fn mark(&mut self, x: usize) {
        if (1..=self.n).contains(&x) && !self.said[x - 1] {
            self.said.set(x - 1, true);
            self.count += 1;
        }
    }

    fn pick(&self, tape: &mut Tape) -> Option<usize> {
        if self.count == self.n {
            return None;
        }
        let index =
            match &self.rule {
                PickRule::Smallest => self.said.first_zero(),
                PickRule::Largest => self.said.last_zero(),
                PickRule::Uniform => {
                    let j = tape.random_range(0..self.n - self.count);
                    nth_unsaid(&self.said, j, self.n)
                }
                PickRule::PreferSet(t) => first_masked_unsaid(t, &self.said, false, self.n)
                    .or_else(|| self.said.first_zero()),
                PickRule::AvoidSet(d) => first_masked_unsaid(d, &self.said, true, self.n)
                    .or_else(|| self.said.first_zero()),
            };
        index.map(|i| i + 1)
    }

    fn mask_bits(&self) -> u64 {
        match self.rule {
            PickRule::PreferSet(_) | PickRule::AvoidSet(_) => self.n as u64,
            _ => 0,
        }
    }
}

impl Strategy for UnsaidPicker {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn quota(&self) -> usize {
        self.quota
    }

    fn budget_bits(&self) -> u64 {
        self.state_bits()
    }

    fn state_bits(&self) -> u64 {
        self.n as u64 + counter_width(self.n) + self.mask_bits()
    }

    fn encode_state(&self) -> StateBits {
        let mut bits = StateBits::with_capacity(self.state_bits() as usize);
        bits.extend_from_bitslice(&self.said);
        push_uint(&mut bits, self.count as u64, counter_width(self.n));
        if let PickRule::PreferSet(mask) | PickRule::AvoidSet(mask) = &self.rule {
            bits.extend_from_bitslice(mask);
        }
        bits
    }

    fn start(&mut self, _tape: &mut Tape) {
        self.said.fill(false);
        self.count = 0;
    }

    fn observe(&mut self, opponent: &[usize], _round: usize, _tape: &mut Tape) {
        for &x in opponent {
            self.mark(x);
        }
    }

    fn respond(&mut self, _round: usize, tape: &mut Tape) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.quota);
        for _ in 0..self.quota {
            // Out of fresh numbers: 1 has been said, so this is the forced repeat.
            let x = self.pick(tape).unwrap_or(1);
            self.mark(x);
            out.push(x);
        }
        out
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

fn subset_mask(n: usize, set: &BTreeSet<usize>) -> Result<BitVec<u64, Lsb0>, StrategyError> {
    let mut mask = bitvec![u64, Lsb0; 0; n];
    for &x in set {
        if !(1..=n).contains(&x) {
            return Err(StrategyError::InvalidParameter(format!(
                "{x} is outside 1..={n}"
            )));
        }
        mask.set(x - 1, true);
    }
    Ok(mask)
}

fn check_picker(n: usize, quota: usize) -> Result<(), StrategyError> {
    if n == 0 || quota == 0 {
        return Err(StrategyError::InvalidParameter(
            "n and quota must be positive".into(),
        ));
    }
    Ok(())
}

/// Alice's full-memory strategy: always say the smallest unsaid number.
pub fn alice_naive(n: usize) -> Result<Box<dyn Strategy>, StrategyError> {
    check_picker(n, 1)?;
    Ok(Box::new(UnsaidPicker::new(
        "naive".into(),
        n,
        1,
        PickRule::Smallest,
    )))
}

pub fn adversary_smallest_unsaid(
    n: usize,
    quota: usize,
) -> Result<Box<dyn Strategy>, StrategyError> {
    check_picker(n, quota)?;
    Ok(Box::new(UnsaidPicker::new(
        "smallest-unsaid".into(),
        n,
        quota,
        PickRule::Smallest,
    )))
}

pub fn adversary_largest_unsaid(
    n: usize,
    quota: usize,
) -> Result<Box<dyn Strategy>, StrategyError> {
    check_picker(n, quota)?;
    Ok(Box::new(UnsaidPicker::new(
        "largest-unsaid".into(),
        n,
        quota,
        PickRule::Largest,
    )))
}

pub fn adversary_random_unsaid(n: usize, quota: usize) -> Result<Box<dyn Strategy>, StrategyError> {
    check_picker(n, quota)?;
    Ok(Box::new(UnsaidPicker::new(
        "random-unsaid".into(),
        n,
        quota,
        PickRule::Uniform,
    )))
}

/// Says the smallest unsaid member of `t`; once `t` is exhausted, the
/// smallest unsaid number overall.
pub fn adversary_prefer_t(
    n: usize,
    quota: usize,
    t: &BTreeSet<usize>,
) -> Result<Box<dyn Strategy>, StrategyError> {
    check_picker(n, quota)?;
    let mask = subset_mask(n, t)?;
    Ok(Box::new(UnsaidPicker::new(
        format!("prefer-T:{}", join(t)),
        n,
        quota,
        PickRule::PreferSet(mask),
    )))
}

/// Says the smallest unsaid number outside `d`; once only members of `d`
/// remain, the smallest unsaid member of `d`.
pub fn adversary_avoid_d(
    n: usize,
    quota: usize,
    d: &BTreeSet<usize>,
) -> Result<Box<dyn Strategy>, StrategyError> {
    check_picker(n, quota)?;
    let mask = subset_mask(n, d)?;
    Ok(Box::new(UnsaidPicker::new(
        format!("avoid-D:{}", join(d)),
        n,
        quota,
        PickRule::AvoidSet(mask),
    )))
}

fn join(set: &BTreeSet<usize>) -> String {
    set.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Says the same numbers every move. Stateless.
#[derive(Clone)]
struct Constant {
    numbers: Vec<usize>,
}

impl Strategy for Constant {
    fn name(&self) -> String {
        format!(
            "constant:{}",
            self.numbers
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )
    }

    fn quota(&self) -> usize {
        self.numbers.len()
    }

    fn budget_bits(&self) -> u64 {
        0
    }

    fn state_bits(&self) -> u64 {
        0
    }

    fn encode_state(&self) -> StateBits {
        StateBits::new()
    }

    fn observe(&mut self, _opponent: &[usize], _round: usize, _tape: &mut Tape) {}

    fn respond(&mut self, _round: usize, _tape: &mut Tape) -> Vec<usize> {
        self.numbers.clone()
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

pub fn constant(numbers: Vec<usize>) -> Result<Box<dyn Strategy>, StrategyError> {
    if numbers.is_empty() {
        return Err(StrategyError::InvalidParameter(
            "constant strategy needs a number".into(),
        ));
    }
    Ok(Box::new(Constant { numbers }))
}

// ---------------------------------------------------------------------------
// Randomized strategies with a matching oracle
// ---------------------------------------------------------------------------

/// Logarithmic-space Alice: open with a uniform x, then answer y with M(y).
#[derive(Clone)]
struct RandLog {
    n: usize,
    oracle: Arc<MatchingOracle>,
    pending: usize,
}

impl Strategy for RandLog {
    fn name(&self) -> String {
        "rand-log".into()
    }

    fn quota(&self) -> usize {
        1
    }

    fn budget_bits(&self) -> u64 {
        counter_width(self.n)
    }

    fn state_bits(&self) -> u64 {
        counter_width(self.n)
    }

    fn encode_state(&self) -> StateBits {
        let mut bits = StateBits::new();
        push_uint(&mut bits, self.pending as u64, counter_width(self.n));
        bits
    }

    fn start(&mut self, tape: &mut Tape) {
        self.pending = tape.random_range(1..=self.n);
    }

    fn observe(&mut self, opponent: &[usize], _round: usize, _tape: &mut Tape) {
        self.pending = self.oracle.matched(opponent[0]);
    }

    fn respond(&mut self, _round: usize, _tape: &mut Tape) -> Vec<usize> {
        vec![self.pending]
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

fn check_oracle(n: usize, oracle: &MatchingOracle) -> Result<(), StrategyError> {
    if !n.is_multiple_of(2) {
        return Err(StrategyError::OddN(n));
    }
    if oracle.n() != n {
        return Err(StrategyError::InvalidParameter(format!(
            "oracle is over 1..={}, game is over 1..={n}",
            oracle.n()
        )));
    }
    Ok(())
}

pub fn alice_rand_log(
    n: usize,
    oracle: Arc<MatchingOracle>,
) -> Result<Box<dyn Strategy>, StrategyError> {
    check_oracle(n, &oracle)?;
    Ok(Box::new(RandLog {
        n,
        oracle,
        pending: 0,
    }))
}

/// The r sampled backup numbers and which of them have been said.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackupSet {
    elements: Vec<usize>,
    said: Vec<bool>,
}

impl BackupSet {
    /// r distinct numbers drawn uniformly from `1..=n`, sorted.
    pub fn sample(n: usize, r: usize, tape: &mut Tape) -> Self {
        let mut elements: Vec<usize> = rand::seq::index::sample(tape, n, r)
            .into_iter()
            .map(|i| i + 1)
            .collect();
        elements.sort_unstable();
        Self {
            said: vec![false; r],
            elements,
        }
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn position(&self, x: usize) -> Option<usize> {
        self.elements.binary_search(&x).ok()
    }

    pub fn is_said(&self, i: usize) -> bool {
        self.said[i]
    }

    pub fn mark_said(&mut self, x: usize) {
        if let Some(i) = self.position(x) {
            self.said[i] = true;
        }
    }

    pub fn unsaid_count(&self) -> usize {
        self.said.iter().filter(|&&s| !s).count()
    }

    /// Uniform unsaid backup, if any.
    pub fn draw_unsaid(&self, tape: &mut Tape) -> Option<usize> {
        let free = self.unsaid_count();
        if free == 0 {
            return None;
        }
        let j = tape.random_range(0..free);
        self.elements
            .iter()
            .zip(&self.said)
            .filter(|(_, &s)| !s)
            .nth(j)
            .map(|(&x, _)| x)
    }
}

/// Parameters of the square-root strategy at a given n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandSqrtParams {
    /// Backup set size, ⌈√n⌉.
    pub r: usize,
    /// Tracked power sums, ⌈r·log₂ n⌉ capped at n.
    pub k: usize,
}

impl RandSqrtParams {
    pub fn for_n(n: usize) -> Self {
        let mut r = (n as f64).sqrt() as usize;
        while r * r < n {
            r += 1;
        }
        let k = ((r as f64) * (n as f64).log2()).ceil() as usize;
        Self { r, k: k.min(n) }
    }
}

/// Square-root-space Alice.
///
/// Mirrors Bob through M, keeping r backup numbers for when M(y) turns out to
/// be an already-said backup, and the first k power sums of every number
/// said. Once at most k numbers remain she recovers them from the sums and
/// says them smallest-first.
#[derive(Clone)]
struct RandSqrt {
    n: usize,
    oracle: Arc<MatchingOracle>,
    params: RandSqrtParams,
    backups: BackupSet,
    sketch: PowerSumSketch,
    pending: usize,
    /// Unsaid numbers, recovered once on entering the endgame.
    remaining: Option<Vec<usize>>,
}

impl RandSqrt {
    fn width(&self) -> u64 {
        counter_width(self.n)
    }

    fn record(&mut self, x: usize) {
        // Out-of-range numbers never reach a strategy; a repeat would already
        // have ended the game.
        let _ = self.sketch.ingest(x);
        self.backups.mark_said(x);
        if let Some(remaining) = &mut self.remaining {
            if let Ok(i) = remaining.binary_search(&x) {
                remaining.remove(i);
            }
        }
    }

    fn in_endgame(&self) -> bool {
        self.sketch.count() + self.params.k >= self.n
    }
}

impl Strategy for RandSqrt {
    fn name(&self) -> String {
        "rand-sqrt".into()
    }

    fn quota(&self) -> usize {
        1
    }

    fn budget_bits(&self) -> u64 {
        let w = self.width();
        let r = self.params.r as u64;
        let k = self.params.k as u64;
        r * w + r + k * self.sketch.field().element_bits() + w + w + w + k * w
    }

    fn state_bits(&self) -> u64 {
        let w = self.width();
        let r = self.params.r as u64;
        let tail = self.remaining.as_ref().map_or(0, |t| t.len() as u64);
        r * w + r + self.sketch.state_bits() + w + w + tail * w
    }

    fn encode_state(&self) -> StateBits {
        let w = self.width();
        let mut bits = StateBits::new();
        for &x in self.backups.elements() {
            push_uint(&mut bits, x as u64, w);
        }
        for &s in &self.backups.said {
            bits.push(s);
        }
        self.sketch.encode(&mut bits);
        push_uint(&mut bits, self.pending as u64, w);
        let tail = self.remaining.as_deref().unwrap_or(&[]);
        push_uint(&mut bits, tail.len() as u64, w);
        for &x in tail {
            push_uint(&mut bits, x as u64, w);
        }
        bits
    }

    fn start(&mut self, tape: &mut Tape) {
        self.backups = BackupSet::sample(self.n, self.params.r, tape);
        self.sketch = PowerSumSketch::with_field(self.n, self.params.k, self.sketch.field())
            .expect("field chosen for this n");
        self.remaining = None;
        self.pending = self
            .backups
            .draw_unsaid(tape)
            .expect("backup set is non-empty");
    }

    fn observe(&mut self, opponent: &[usize], _round: usize, tape: &mut Tape) {
        let y = opponent[0];
        self.record(y);

        if self.in_endgame() {
            if self.remaining.is_none() {
                let missing = self.n - self.sketch.count();
                self.remaining = recover_missing(&self.sketch, self.n, missing).ok();
            }
            if let Some(&x) = self.remaining.as_ref().and_then(|t| t.first()) {
                self.pending = x;
                return;
            }
        }

        let reply = self.oracle.matched(y);
        self.pending = match self.backups.position(reply) {
            Some(i) if self.backups.is_said(i) => self
                .backups
                .draw_unsaid(tape)
                .unwrap_or_else(|| tape.random_range(1..=self.n)),
            _ => reply,
        };
    }

    fn respond(&mut self, _round: usize, _tape: &mut Tape) -> Vec<usize> {
        let x = self.pending;
        self.record(x);
        vec![x]
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

pub fn alice_rand_sqrt(
    n: usize,
    oracle: Arc<MatchingOracle>,
) -> Result<Box<dyn Strategy>, StrategyError> {
    check_oracle(n, &oracle)?;
    if n < 16 {
        return Err(StrategyError::InvalidParameter(format!(
            "rand-sqrt needs n >= 16, got {n}"
        )));
    }
    let params = RandSqrtParams::for_n(n);
    let sketch = PowerSumSketch::new(n, params.k)
        .map_err(|e| StrategyError::InvalidParameter(e.to_string()))?;
    Ok(Box::new(RandSqrt {
        n,
        oracle,
        params,
        backups: BackupSet {
            elements: Vec::new(),
            said: Vec::new(),
        },
        sketch,
        pending: 0,
        remaining: None,
    }))
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// A strategy named by registry key and parameters, e.g. `bob:prefer-T:2,4`.
///
/// The `alice:` / `bob:` prefix is optional; when present it must match the
/// seat the strategy is built for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyName {
    pub role: Option<Player>,
    pub kind: StrategyKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrategyKind {
    Mirror,
    TupleMirror,
    OddMirror,
    Naive,
    RandLog,
    RandSqrt,
    SmallestUnsaid,
    LargestUnsaid,
    RandomUnsaid,
    PreferT(BTreeSet<usize>),
    AvoidD(BTreeSet<usize>),
    Constant(Vec<usize>),
}

fn parse_numbers(text: &str) -> Result<Vec<usize>, StrategyError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| StrategyError::InvalidParameter(format!("{t:?} is not a number")))
        })
        .collect()
}

impl FromStr for StrategyName {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (role, rest) = match s.split_once(':') {
            Some(("alice", rest)) => (Some(Player::Alice), rest),
            Some(("bob", rest)) => (Some(Player::Bob), rest),
            _ => (None, s),
        };
        let (key, params) = match rest.split_once(':') {
            Some((key, params)) => (key, Some(params)),
            None => (rest, None),
        };
        let kind = match (key, params) {
            ("mirror", None) => StrategyKind::Mirror,
            ("tuple-mirror", None) => StrategyKind::TupleMirror,
            ("odd-mirror", None) => StrategyKind::OddMirror,
            ("naive", None) => StrategyKind::Naive,
            ("rand-log", None) => StrategyKind::RandLog,
            ("rand-sqrt", None) => StrategyKind::RandSqrt,
            ("smallest-unsaid", None) => StrategyKind::SmallestUnsaid,
            ("largest-unsaid", None) => StrategyKind::LargestUnsaid,
            ("random-unsaid", None) => StrategyKind::RandomUnsaid,
            ("prefer-T", Some(p)) => StrategyKind::PreferT(parse_numbers(p)?.into_iter().collect()),
            ("avoid-D", Some(p)) => StrategyKind::AvoidD(parse_numbers(p)?.into_iter().collect()),
            ("constant", Some(p)) => StrategyKind::Constant(parse_numbers(p)?),
            _ => return Err(StrategyError::Unknown(s.to_string())),
        };
        Ok(Self { role, kind })
    }
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.role {
            Some(Player::Alice) => f.write_str("alice:")?,
            Some(Player::Bob) => f.write_str("bob:")?,
            None => {}
        }
        let list = |v: &mut dyn Iterator<Item = &usize>| {
            v.map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        match &self.kind {
            StrategyKind::Mirror => f.write_str("mirror"),
            StrategyKind::TupleMirror => f.write_str("tuple-mirror"),
            StrategyKind::OddMirror => f.write_str("odd-mirror"),
            StrategyKind::Naive => f.write_str("naive"),
            StrategyKind::RandLog => f.write_str("rand-log"),
            StrategyKind::RandSqrt => f.write_str("rand-sqrt"),
            StrategyKind::SmallestUnsaid => f.write_str("smallest-unsaid"),
            StrategyKind::LargestUnsaid => f.write_str("largest-unsaid"),
            StrategyKind::RandomUnsaid => f.write_str("random-unsaid"),
            StrategyKind::PreferT(t) => write!(f, "prefer-T:{}", list(&mut t.iter())),
            StrategyKind::AvoidD(d) => write!(f, "avoid-D:{}", list(&mut d.iter())),
            StrategyKind::Constant(c) => write!(f, "constant:{}", list(&mut c.iter())),
        }
    }
}

impl StrategyName {
    /// Whether building this strategy needs a matching oracle.
    pub fn needs_oracle(&self) -> bool {
        matches!(self.kind, StrategyKind::RandLog | StrategyKind::RandSqrt)
    }

    /// Builds the strategy for `player`'s seat in a game with `config`.
    /// Oracle-backed strategies require `oracle`.
    pub fn build(
        &self,
        config: &GameConfig,
        player: Player,
        oracle: Option<Arc<MatchingOracle>>,
    ) -> Result<Box<dyn Strategy>, StrategyError> {
        if let Some(role) = self.role {
            if role != player {
                return Err(StrategyError::WrongRole {
                    name: self.to_string(),
                    player,
                });
            }
        }
        let wrong_role = || StrategyError::WrongRole {
            name: self.to_string(),
            player,
        };
        let n = config.n();
        let quota = config.quota(player);
        let need_oracle = || {
            oracle.clone().ok_or_else(|| {
                StrategyError::InvalidParameter(format!("{self} needs a matching oracle"))
            })
        };
        match &self.kind {
            StrategyKind::Mirror if player == Player::Bob && quota == 1 => bob_mirror(n),
            StrategyKind::TupleMirror if player == Player::Bob && config.a() == 1 => {
                bob_tuple_mirror(n, quota)
            }
            StrategyKind::OddMirror if player == Player::Alice && quota == 1 && config.b() == 1 => {
                alice_odd_mirror(n)
            }
            StrategyKind::Naive if quota == 1 => alice_naive(n),
            StrategyKind::RandLog
                if player == Player::Alice && config.a() == 1 && config.b() == 1 =>
            {
                alice_rand_log(n, need_oracle()?)
            }
            StrategyKind::RandSqrt
                if player == Player::Alice && config.a() == 1 && config.b() == 1 =>
            {
                alice_rand_sqrt(n, need_oracle()?)
            }
            StrategyKind::Naive => adversary_smallest_unsaid(n, quota),
            StrategyKind::SmallestUnsaid => adversary_smallest_unsaid(n, quota),
            StrategyKind::LargestUnsaid => adversary_largest_unsaid(n, quota),
            StrategyKind::RandomUnsaid => adversary_random_unsaid(n, quota),
            StrategyKind::PreferT(t) => adversary_prefer_t(n, quota, t),
            StrategyKind::AvoidD(d) => adversary_avoid_d(n, quota, d),
            StrategyKind::Constant(c) if c.len() == quota => constant(c.clone()),
            StrategyKind::Constant(c) => Err(StrategyError::InvalidParameter(format!(
                "constant move has {} numbers, quota is {quota}",
                c.len()
            ))),
            _ => Err(wrong_role()),
        }
    }
}
