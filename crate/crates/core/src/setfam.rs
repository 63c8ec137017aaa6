//! Set families over `1..=n`: parity towns, Modtowns, covering collections
//! and matching vector families.
//!
//! Sets are 64-bit masks with element `x` at bit `x - 1`, so verifiers take
//! `n <= 64`. The exhaustive search is limited to `n <= 8`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest ground set for verifiers.
pub const MAX_GROUND: usize = 64;
/// Largest ground set for [`max_town_size`].
pub const MAX_SEARCH_N: usize = 8;
/// Largest ground set for [`eventown_pairing`].
pub const MAX_PAIRING_N: usize = 40;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SetFamError {
    #[error("ground set size {n} exceeds the limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("{x} is outside 1..={n}")]
    OutOfRange { x: usize, n: usize },
    #[error("set {0:?} appears twice")]
    DuplicateSet(Vec<usize>),
    #[error("n = {0} must be even")]
    OddN(usize),
    #[error("vector lengths disagree: {0}")]
    DimensionMismatch(String),
    #[error("family is not a Modtown for modulus {m}: {reason}")]
    NotModtown { m: u64, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Distinct subsets of `1..=ground_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetFamily {
    ground_n: usize,
    sets: Vec<u64>,
}

/// JSON form: `{"n": 4, "sets": [[1,2],[3,4]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyFile {
    pub n: usize,
    pub sets: Vec<Vec<usize>>,
}

fn mask_to_list(mask: u64) -> Vec<usize> {
    (0..64)
        .filter(|i| mask >> i & 1 == 1)
        .map(|i| i + 1)
        .collect()
}

impl SetFamily {
    pub fn from_masks(ground_n: usize, sets: Vec<u64>) -> Result<Self, SetFamError> {
        if ground_n > MAX_GROUND {
            return Err(SetFamError::TooLarge {
                n: ground_n,
                limit: MAX_GROUND,
            });
        }
        let universe = universe_mask(ground_n);
        let mut seen = HashSet::with_capacity(sets.len());
        for &s in &sets {
            if s & !universe != 0 {
                let x = 64 - (s & !universe).leading_zeros() as usize;
                return Err(SetFamError::OutOfRange { x, n: ground_n });
            }
            if !seen.insert(s) {
                return Err(SetFamError::DuplicateSet(mask_to_list(s)));
            }
        }
        Ok(Self { ground_n, sets })
    }

    pub fn from_lists(ground_n: usize, sets: &[Vec<usize>]) -> Result<Self, SetFamError> {
        let masks = sets
            .iter()
            .map(|set| {
                set.iter().try_fold(0u64, |mask, &x| {
                    if x == 0 || x > ground_n.min(MAX_GROUND) {
                        Err(SetFamError::OutOfRange { x, n: ground_n })
                    } else {
                        Ok(mask | 1 << (x - 1))
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_masks(ground_n, masks)
    }

    pub fn empty(ground_n: usize) -> Self {
        Self {
            ground_n,
            sets: Vec::new(),
        }
    }

    pub fn ground_n(&self) -> usize {
        self.ground_n
    }

    pub fn masks(&self) -> &[u64] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn to_lists(&self) -> Vec<Vec<usize>> {
        self.sets.iter().map(|&s| mask_to_list(s)).collect()
    }

    pub fn to_file(&self) -> FamilyFile {
        FamilyFile {
            n: self.ground_n,
            sets: self.to_lists(),
        }
    }

    pub fn from_file(file: &FamilyFile) -> Result<Self, SetFamError> {
        Self::from_lists(file.n, &file.sets)
    }

    /// Sorted copy (by mask), for order-independent comparison.
    pub fn canonical(&self) -> Self {
        let mut sets = self.sets.clone();
        sets.sort_unstable();
        Self {
            ground_n: self.ground_n,
            sets,
        }
    }

    fn pairs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.sets
            .iter()
            .enumerate()
            .flat_map(move |(i, &a)| self.sets[i + 1..].iter().map(move |&b| (a, b)))
    }
}

fn universe_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn of(count: u32) -> Self {
        if count.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// One of the four parity town classes: parity of every set size, then
/// parity of every pairwise intersection size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TownKind {
    pub set_parity: Parity,
    pub intersection_parity: Parity,
}

impl TownKind {
    pub const ODD_EVEN: Self = Self::new(Parity::Odd, Parity::Even);
    pub const EVEN_ODD: Self = Self::new(Parity::Even, Parity::Odd);
    pub const EVEN_EVEN: Self = Self::new(Parity::Even, Parity::Even);
    pub const ODD_ODD: Self = Self::new(Parity::Odd, Parity::Odd);

    pub const fn new(set_parity: Parity, intersection_parity: Parity) -> Self {
        Self {
            set_parity,
            intersection_parity,
        }
    }

    fn admits_set(&self, mask: u64) -> bool {
        Parity::of(mask.count_ones()) == self.set_parity
    }

    fn admits_pair(&self, a: u64, b: u64) -> bool {
        Parity::of((a & b).count_ones()) == self.intersection_parity
    }
}

impl fmt::Display for TownKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word = |p: Parity| match p {
            Parity::Odd => "odd",
            Parity::Even => "even",
        };
        write!(
            f,
            "{}-{}",
            word(self.set_parity),
            word(self.intersection_parity)
        )
    }
}

impl FromStr for TownKind {
    type Err = SetFamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "odd-even" => Ok(Self::ODD_EVEN),
            "even-odd" => Ok(Self::EVEN_ODD),
            "even-even" => Ok(Self::EVEN_EVEN),
            "odd-odd" => Ok(Self::ODD_ODD),
            _ => Err(SetFamError::InvalidParameter(format!(
                "unknown town kind {s:?}"
            ))),
        }
    }
}

pub fn check_town(family: &SetFamily, kind: TownKind) -> bool {
    family.sets.iter().all(|&s| kind.admits_set(s))
        && family.pairs().all(|(a, b)| kind.admits_pair(a, b))
}

/// (p, L): set sizes avoid L modulo p, pairwise intersections land in L.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModtownSpec {
    p: u64,
    residues: BTreeSet<u64>,
}

impl ModtownSpec {
    pub fn new(p: u64, residues: impl IntoIterator<Item = u64>) -> Result<Self, SetFamError> {
        if p < 2 {
            return Err(SetFamError::InvalidParameter(format!(
                "modulus {p} is below 2"
            )));
        }
        let residues: BTreeSet<u64> = residues.into_iter().collect();
        if let Some(&bad) = residues.iter().find(|&&l| l >= p) {
            return Err(SetFamError::InvalidParameter(format!(
                "residue {bad} is not below {p}"
            )));
        }
        Ok(Self { p, residues })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn residues(&self) -> &BTreeSet<u64> {
        &self.residues
    }

    /// s = |L|
    pub fn s(&self) -> usize {
        self.residues.len()
    }
}

impl FromStr for ModtownSpec {
    type Err = SetFamError;

    /// `p` followed by the residues of L, comma separated: `3,0,1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut values = s.split(',').filter(|t| !t.trim().is_empty()).map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| SetFamError::InvalidParameter(format!("{t:?} is not a number")))
        });
        let p = values
            .next()
            .ok_or_else(|| SetFamError::InvalidParameter("missing modulus".into()))??;
        Self::new(p, values.collect::<Result<Vec<_>, _>>()?)
    }
}

pub fn check_modtown(family: &SetFamily, spec: &ModtownSpec) -> bool {
    let residue = |mask: u64| mask.count_ones() as u64 % spec.p;
    family
        .sets
        .iter()
        .all(|&s| !spec.residues.contains(&residue(s)))
        && family
            .pairs()
            .all(|(a, b)| spec.residues.contains(&residue(a & b)))
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    num_integer::binomial(BigUint::from(n), BigUint::from(k))
}

/// Σ_{i=0..s} C(n, i), the Frankl–Wilson bound on a (p, L)-Modtown with |L| = s.
pub fn frankl_wilson_bound(n: u64, s: u64) -> BigUint {
    (0..=s.min(n)).map(|i| binomial(n, i)).sum()
}

/// Result of an exhaustive town search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TownSearch {
    pub kind: TownKind,
    /// Largest family, ∅ admitted.
    pub size: usize,
    /// Largest family of non-empty sets.
    pub size_without_empty: usize,
    /// A largest family (∅ admitted).
    pub witness: SetFamily,
}

/// Exact largest `kind`-town on `1..=n`, by maximum clique over the
/// compatibility graph of parity-eligible subsets.
pub fn max_town_size(n: usize, kind: TownKind) -> Result<TownSearch, SetFamError> {
    if n > MAX_SEARCH_N {
        return Err(SetFamError::TooLarge {
            n,
            limit: MAX_SEARCH_N,
        });
    }
    let vertices: Vec<u64> = (0..1u64 << n).filter(|&s| kind.admits_set(s)).collect();
    let graph = CompatGraph::new(&vertices, |a, b| kind.admits_pair(a, b));
    let with_empty = graph.max_clique(|_| true);
    let without_empty = graph.max_clique(|v| vertices[v] != 0);
    let witness = SetFamily::from_masks(n, with_empty.iter().map(|&v| vertices[v]).collect())?;
    Ok(TownSearch {
        kind,
        size: with_empty.len(),
        size_without_empty: without_empty.len(),
        witness,
    })
}

/// Bitset over at most 256 vertices.
#[derive(Clone, Copy, Default, PartialEq, Eq)]
struct VertexSet([u64; 4]);

impl VertexSet {
    fn insert(&mut self, v: usize) {
        self.0[v / 64] |= 1 << (v % 64);
    }

    fn remove(&mut self, v: usize) {
        self.0[v / 64] &= !(1 << (v % 64));
    }

    fn and(&self, other: &Self) -> Self {
        let mut out = *self;
        for (o, b) in out.0.iter_mut().zip(other.0) {
            *o &= b;
        }
        out
    }

    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    fn first(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
    }
}

struct CompatGraph {
    adjacency: Vec<VertexSet>,
}

impl CompatGraph {
    fn new(vertices: &[u64], compatible: impl Fn(u64, u64) -> bool) -> Self {
        assert!(vertices.len() <= 256);
        let mut adjacency = vec![VertexSet::default(); vertices.len()];
        for (i, &a) in vertices.iter().enumerate() {
            for (j, &b) in vertices.iter().enumerate().skip(i + 1) {
                if compatible(a, b) {
                    adjacency[i].insert(j);
                    adjacency[j].insert(i);
                }
            }
        }
        Self { adjacency }
    }

    /// Maximum clique among vertices passing `keep`.
    fn max_clique(&self, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        let mut candidates = VertexSet::default();
        for v in (0..self.adjacency.len()).filter(|&v| keep(v)) {
            candidates.insert(v);
        }
        let mut best = Vec::new();
        let mut current = Vec::new();
        self.expand(&mut current, candidates, &mut best);
        best
    }

    /// Greedy sequential coloring of `candidates`: vertices in color order
    /// with the color count of each prefix, an upper bound on any clique
    /// inside that prefix.
    fn color_order(&self, candidates: VertexSet) -> Vec<(usize, usize)> {
        let mut order = Vec::new();
        let mut uncolored = candidates;
        let mut color = 0;
        while !uncolored.is_empty() {
            color += 1;
            let mut available = uncolored;
            while let Some(v) = available.first() {
                uncolored.remove(v);
                available.remove(v);
                available = complement_within(&self.adjacency[v], &available);
                order.push((v, color));
            }
        }
        order
    }

    fn expand(&self, current: &mut Vec<usize>, mut candidates: VertexSet, best: &mut Vec<usize>) {
        let order = self.color_order(candidates);
        for &(v, color) in order.iter().rev() {
            if current.len() + color <= best.len() {
                return;
            }
            current.push(v);
            let next = candidates.and(&self.adjacency[v]);
            if next.is_empty() {
                if current.len() > best.len() {
                    *best = current.clone();
                }
            } else {
                self.expand(current, next, best);
            }
            current.pop();
            candidates.remove(v);
        }
    }
}

/// `set \ adjacency`, i.e. the vertices of `set` not adjacent to the pivot.
fn complement_within(adjacency: &VertexSet, set: &VertexSet) -> VertexSet {
    let mut out = *set;
    for (o, a) in out.0.iter_mut().zip(adjacency.0) {
        *o &= !a;
    }
    out
}

/// All 2^{n/2} unions of the pairs {1,2}, {3,4}, ..., an (Even, Even)-town
/// that includes ∅.
pub fn eventown_pairing(n: usize) -> Result<SetFamily, SetFamError> {
    if !n.is_multiple_of(2) {
        return Err(SetFamError::OddN(n));
    }
    if n > MAX_PAIRING_N {
        return Err(SetFamError::TooLarge {
            n,
            limit: MAX_PAIRING_N,
        });
    }
    let pairs = n / 2;
    let sets = (0..1u64 << pairs)
        .map(|choice| {
            (0..pairs)
                .filter(|i| choice >> i & 1 == 1)
                .fold(0u64, |mask, i| mask | 0b11 << (2 * i))
        })
        .collect();
    SetFamily::from_masks(n, sets)
}

/// Adds element n+1 to every set: turns an (Even, Odd)-town on `1..=n` into
/// an (Odd, Even)-town on `1..=n+1`.
pub fn lift_even_odd(family: &SetFamily) -> Result<SetFamily, SetFamError> {
    let n = family.ground_n;
    if n + 1 > MAX_GROUND {
        return Err(SetFamError::TooLarge {
            n: n + 1,
            limit: MAX_GROUND,
        });
    }
    SetFamily::from_masks(n + 1, family.sets.iter().map(|&s| s | 1 << n).collect())
}

/// Iterates every `r`-subset of `1..=n` as a mask (Gosper's hack).
fn subsets_of_size(n: usize, r: usize) -> impl Iterator<Item = u64> {
    let limit = if n >= 64 { None } else { Some(1u64 << n) };
    let first = if r == 0 {
        Some(0)
    } else if r <= n {
        Some(universe_mask(r))
    } else {
        None
    };
    std::iter::successors(first, move |&s| {
        if s == 0 {
            return None;
        }
        let c = s & s.wrapping_neg();
        let (high, overflow) = s.overflowing_add(c);
        if overflow || high == 0 {
            return None;
        }
        let next = (((s ^ high) >> 2) / c) | high;
        match limit {
            Some(l) if next >= l => None,
            _ => Some(next),
        }
    })
}

/// Whether every member has size p·r and every r-subset of `1..=n` lies
/// inside some member.
pub fn check_covering(collection: &SetFamily, p: usize, r: usize) -> bool {
    let size = p * r;
    if collection
        .sets
        .iter()
        .any(|&s| s.count_ones() as usize != size)
    {
        return false;
    }
    subsets_of_size(collection.ground_n, r).all(|t| collection.sets.iter().any(|&s| s & t == t))
}

/// ⌈C(n, r) / C(pr, r)⌉, the least size of a (p, r)-covering collection.
pub fn covering_lower_bound(n: u64, p: u64, r: u64) -> Result<BigUint, SetFamError> {
    if p * r > n {
        return Err(SetFamError::InvalidParameter(format!(
            "p·r = {} exceeds n = {n}",
            p * r
        )));
    }
    Ok(binomial(n, r).div_ceil(&binomial(p * r, r)))
}

/// Paired vector lists over Z_m^dim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MVFamily {
    pub m: u64,
    pub dim: usize,
    pub u: Vec<Vec<u64>>,
    pub v: Vec<Vec<u64>>,
}

impl MVFamily {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

fn dot_mod(a: &[u64], b: &[u64], m: u64) -> u64 {
    a.iter()
        .zip(b)
        .fold(0, |acc, (&x, &y)| (acc + x % m * (y % m)) % m)
}

/// u_i·v_i ≡ 0 and u_i·v_j ≢ 0 (i ≠ j), all mod m.
pub fn check_mv(family: &MVFamily) -> Result<bool, SetFamError> {
    if family.m < 2 {
        return Err(SetFamError::InvalidParameter(format!(
            "modulus {} is below 2",
            family.m
        )));
    }
    if family.u.len() != family.v.len() {
        return Err(SetFamError::DimensionMismatch(format!(
            "|U| = {} but |V| = {}",
            family.u.len(),
            family.v.len()
        )));
    }
    if let Some(bad) = family
        .u
        .iter()
        .chain(&family.v)
        .find(|w| w.len() != family.dim)
    {
        return Err(SetFamError::DimensionMismatch(format!(
            "vector of length {} in dimension {}",
            bad.len(),
            family.dim
        )));
    }
    let m = family.m;
    Ok(family.u.iter().enumerate().all(|(i, ui)| {
        family
            .v
            .iter()
            .enumerate()
            .all(|(j, vj)| (dot_mod(ui, vj, m) == 0) == (i == j))
    }))
}

/// Characteristic vectors of a family with |S| ≡ 0 and |S ∩ S'| ≢ 0 (mod m)
/// form an MV family with U = V.
pub fn modtown_to_mv(family: &SetFamily, m: u64) -> Result<MVFamily, SetFamError> {
    if m < 2 {
        return Err(SetFamError::InvalidParameter(format!(
            "modulus {m} is below 2"
        )));
    }
    if let Some(&s) = family
        .sets
        .iter()
        .find(|&&s| !(s.count_ones() as u64).is_multiple_of(m))
    {
        return Err(SetFamError::NotModtown {
            m,
            reason: format!("|{:?}| is not divisible by {m}", mask_to_list(s)),
        });
    }
    if let Some((a, b)) = family
        .pairs()
        .find(|&(a, b)| ((a & b).count_ones() as u64).is_multiple_of(m))
    {
        return Err(SetFamError::NotModtown {
            m,
            reason: format!(
                "|{:?} ∩ {:?}| is divisible by {m}",
                mask_to_list(a),
                mask_to_list(b)
            ),
        });
    }
    let n = family.ground_n;
    let vectors: Vec<Vec<u64>> = family
        .sets
        .iter()
        .map(|&s| (0..n).map(|i| s >> i & 1).collect())
        .collect();
    Ok(MVFamily {
        m,
        dim: n,
        u: vectors.clone(),
        v: vectors,
    })
}
