//! Finitely generated abelian group arithmetic.
//!
//! Groups are kept in canonical invariant-factor form `Z^f x Z/d_1 x ... x
//! Z/d_k` with `d_1 | d_2 | ... | d_k`, each `d_i >= 2`. Counting operations
//! (automorphisms, pairing-preserving automorphisms, perfect pairings,
//! subgroup lattices) are brute force over explicit elements within stated
//! size bounds; cheap closed forms exist for some of them but the enumerators
//! here are the ground truth the rest of the crate is checked against.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("group of order {order} exceeds the bound {bound} for this operation")]
    TooLarge { order: BigInt, bound: u64 },
    #[error("operation requires a finite group")]
    NotFinite,
    #[error("torsion is not of the form H x H")]
    NotSquare,
    #[error("brute-force search space of {0} candidates is too large")]
    SearchTooLarge(f64),
    #[error("group parse error: {0}")]
    Parse(String),
}

/// Finitely generated abelian group in canonical invariant-factor form.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct AbelianGroup {
    free_rank: usize,
    torsion: Vec<BigInt>, // d_1 | d_2 | ... | d_k, each >= 2
}

impl AbelianGroup {
    /// Build from a free rank and a divisibility chain (entries `>= 2`,
    /// each dividing the next). Panics when the chain is malformed; use
    /// [`AbelianGroup::from_factors`] for arbitrary factor lists.
    pub fn new(free_rank: usize, torsion: Vec<BigInt>) -> Self {
        for w in torsion.windows(2) {
            assert!(
                w[1].is_multiple_of(&w[0]),
                "invariant factors must form a divisibility chain"
            );
        }
        assert!(
            torsion.iter().all(|d| *d >= BigInt::from(2)),
            "invariant factors must be >= 2"
        );
        Self { free_rank, torsion }
    }

    pub fn trivial() -> Self {
        Self { free_rank: 0, torsion: vec![] }
    }

    pub fn free(rank: usize) -> Self {
        Self { free_rank: rank, torsion: vec![] }
    }

    pub fn cyclic(d: u64) -> Self {
        if d <= 1 {
            Self::trivial()
        } else {
            Self { free_rank: 0, torsion: vec![BigInt::from(d)] }
        }
    }

    /// Canonicalize an arbitrary list of finite cyclic factors (plus a free
    /// rank) into invariant-factor form, e.g. `[2, 3] -> [6]` and
    /// `[2, 4] -> [2, 4]`.
    pub fn from_factors(free_rank: usize, factors: &[u64]) -> Self {
        let mut by_prime: HashMap<u64, Vec<u32>> = HashMap::new();
        for &f in factors {
            if f <= 1 {
                continue;
            }
            for (p, e) in factor_u64(f) {
                by_prime.entry(p).or_default().push(e);
            }
        }
        let depth = by_prime.values().map(Vec::len).max().unwrap_or(0);
        for parts in by_prime.values_mut() {
            parts.sort_unstable_by(|a, b| b.cmp(a));
        }
        // d_k is the largest factor; build from the largest slot down.
        let mut chain = vec![BigInt::one(); depth];
        for (p, parts) in &by_prime {
            for (slot, &e) in parts.iter().enumerate() {
                chain[depth - 1 - slot] *= BigInt::from(*p).pow(e);
            }
        }
        Self::new(free_rank, chain)
    }

    pub fn free_rank(&self) -> usize {
        self.free_rank
    }

    pub fn torsion(&self) -> &[BigInt] {
        &self.torsion
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.free_rank == 0
    }

    pub fn torsion_order(&self) -> BigInt {
        self.torsion.iter().product()
    }

    /// Order of the group; `None` when infinite.
    pub fn order(&self) -> Option<BigInt> {
        self.is_finite().then(|| self.torsion_order())
    }

    /// Smallest `a >= 1` with `a G_tors = 0`.
    pub fn exponent(&self) -> BigInt {
        self.torsion.last().cloned().unwrap_or_else(BigInt::one)
    }

    /// Cyclic means generated by one element: at most one torsion factor and
    /// free rank at most one, but not both.
    pub fn is_cyclic(&self) -> bool {
        self.torsion.len() <= 1 && self.free_rank <= 1 && !(self.free_rank == 1 && self.torsion.len() == 1)
    }

    /// Torsion of the form `H x H`.
    pub fn torsion_is_square(&self) -> bool {
        self.torsion.len() % 2 == 0
            && self.torsion.chunks(2).all(|pair| pair[0] == pair[1])
    }

    /// Torsion of the form `C x C` with `C` cyclic (possibly trivial).
    pub fn is_square_of_cyclic_torsion(&self) -> bool {
        match self.torsion.len() {
            0 => true,
            2 => self.torsion[0] == self.torsion[1],
            _ => false,
        }
    }

    /// Sylow p-part as a partition of p-adic valuations.
    pub fn sylow(&self, p: u64) -> PartitionType {
        let bp = BigInt::from(p);
        let mut parts: Vec<u32> = self
            .torsion
            .iter()
            .map(|d| {
                let mut v = 0u32;
                let mut d = d.clone();
                while d.is_multiple_of(&bp) {
                    d /= &bp;
                    v += 1;
                }
                v
            })
            .filter(|&v| v > 0)
            .collect();
        parts.sort_unstable_by(|a, b| b.cmp(a));
        PartitionType { p, parts }
    }

    /// Primes dividing the torsion order (requires word-size torsion order).
    pub fn torsion_primes(&self) -> Result<Vec<u64>, GroupError> {
        let order = self.torsion_order();
        let order = order.to_u64().ok_or(GroupError::TooLarge {
            order: self.torsion_order(),
            bound: u64::MAX,
        })?;
        Ok(factor_u64(order).into_iter().map(|(p, _)| p).collect())
    }

    /// `G (x) Z/a`: the free part becomes `(Z/a)^f`, each `Z/d` becomes
    /// `Z/gcd(d, a)`.
    pub fn tensor_mod(&self, a: u64) -> AbelianGroup {
        let ba = BigInt::from(a);
        let mut factors: Vec<BigInt> = self
            .torsion
            .iter()
            .map(|d| d.gcd(&ba))
            .filter(|g| !g.is_one())
            .collect();
        for _ in 0..self.free_rank {
            factors.push(ba.clone());
        }
        factors.sort();
        if a == 1 {
            return AbelianGroup::trivial();
        }
        // gcds of a chain with a fixed number again form a chain
        AbelianGroup::new(0, factors)
    }

    /// Parse "Z^f x Z/d1 x Z/d2"; accepts "0", "1" and "trivial" for the
    /// trivial group.
    pub fn parse(text: &str) -> Result<Self, GroupError> {
        let t = text.trim();
        if t == "0" || t == "1" || t.eq_ignore_ascii_case("trivial") {
            return Ok(Self::trivial());
        }
        let mut free = 0usize;
        let mut factors = Vec::new();
        for raw in t.split(['x', '×']) {
            let tok = raw.trim();
            if tok.is_empty() {
                return Err(GroupError::Parse(format!("empty factor in {text:?}")));
            }
            if let Some(rest) = tok.strip_prefix("Z^") {
                free += rest
                    .parse::<usize>()
                    .map_err(|e| GroupError::Parse(format!("bad free rank {tok:?}: {e}")))?;
            } else if tok == "Z" {
                free += 1;
            } else if let Some(rest) = tok.strip_prefix("Z/") {
                let d: u64 = rest
                    .parse()
                    .map_err(|e| GroupError::Parse(format!("bad torsion factor {tok:?}: {e}")))?;
                if d == 0 {
                    free += 1; // Z/0 = Z
                } else {
                    factors.push(d);
                }
            } else {
                return Err(GroupError::Parse(format!("unrecognized factor {tok:?}")));
            }
        }
        Ok(Self::from_factors(free, &factors))
    }

    fn torsion_u64(&self, bound: u64) -> Result<Vec<u64>, GroupError> {
        let order = self.torsion_order();
        if order > BigInt::from(bound) {
            return Err(GroupError::TooLarge { order, bound });
        }
        Ok(self.torsion.iter().map(|d| d.to_u64().expect("bounded")).collect())
    }
}

impl fmt::Display for AbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        for d in &self.torsion {
            parts.push(format!("Z/{d}"));
        }
        write!(f, "{}", parts.join(" x "))
    }
}

/// Type of a finite abelian p-group: prime plus weakly decreasing positive
/// exponents.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct PartitionType {
    pub p: u64,
    pub parts: Vec<u32>,
}

impl PartitionType {
    pub fn new(p: u64, mut parts: Vec<u32>) -> Self {
        parts.retain(|&x| x > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Self { p, parts }
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Conjugate partition: `conj_k = #{i : parts_i >= k}`.
    pub fn conjugate(&self) -> Vec<u32> {
        let max = self.parts.first().copied().unwrap_or(0);
        (1..=max)
            .map(|k| self.parts.iter().filter(|&&x| x >= k).count() as u32)
            .collect()
    }

    /// Group order `p^(sum of parts)`.
    pub fn order(&self) -> BigInt {
        BigInt::from(self.p).pow(self.parts.iter().sum::<u32>())
    }

    pub fn group(&self) -> AbelianGroup {
        let mut asc = self.parts.clone();
        asc.sort_unstable();
        AbelianGroup::new(0, asc.iter().map(|&e| BigInt::from(self.p).pow(e)).collect())
    }
}

/// `|Sym^2 G|` for the p-group of type `lambda`: `p^(sum_j j*lambda_j)`.
pub fn sym2_order(lambda: &PartitionType) -> BigInt {
    let e: u64 = lambda
        .parts
        .iter()
        .enumerate()
        .map(|(i, &l)| (i as u64 + 1) * l as u64)
        .sum();
    pow_u64(lambda.p, e)
}

/// `|Wedge^2 G|` for the p-group of type `lambda`: `p^(sum_i (i-1)*lambda_i)`.
pub fn wedge2_order(lambda: &PartitionType) -> BigInt {
    let e: u64 = lambda
        .parts
        .iter()
        .enumerate()
        .map(|(i, &l)| (i as u64) * l as u64)
        .sum();
    pow_u64(lambda.p, e)
}

fn pow_u64(base: u64, exp: u64) -> BigInt {
    BigInt::from(base).pow(exp.try_into().expect("exponent fits u32"))
}

/// `|Sym^2 G|` over all primes of a finite group.
pub fn sym2_order_of_group(g: &AbelianGroup) -> Result<BigInt, GroupError> {
    if !g.is_finite() {
        return Err(GroupError::NotFinite);
    }
    let mut total = BigInt::one();
    for p in g.torsion_primes()? {
        total *= sym2_order(&g.sylow(p));
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Hom and Sur counting
// ---------------------------------------------------------------------------

/// `|Hom(A, G)|` for finite `G`: the free part of `A` contributes `|G|^f`,
/// each `Z/d` contributes `|G[d]| = prod_j gcd(d, e_j)`.
pub fn hom_count(a: &AbelianGroup, g: &AbelianGroup) -> Result<BigInt, GroupError> {
    if !g.is_finite() {
        return Err(GroupError::NotFinite);
    }
    let mut count = g.torsion_order().pow(a.free_rank as u32);
    for d in &a.torsion {
        for e in &g.torsion {
            count *= d.gcd(e);
        }
    }
    Ok(count)
}

/// `|Sur(A, G)|` by Moebius inversion over the subgroup lattice of `G`:
/// `Hom(A, G) = sum_{H <= G} Sur(A, H)` solved top-down.
pub fn sur_count(a: &AbelianGroup, g: &AbelianGroup) -> Result<BigInt, GroupError> {
    let mut memo: HashMap<Vec<BigInt>, BigInt> = HashMap::new();
    sur_count_memo(a, g, &mut memo)
}

fn sur_count_memo(
    a: &AbelianGroup,
    g: &AbelianGroup,
    memo: &mut HashMap<Vec<BigInt>, BigInt>,
) -> Result<BigInt, GroupError> {
    if let Some(hit) = memo.get(&g.torsion) {
        return Ok(hit.clone());
    }
    let mut total = hom_count(a, g)?;
    for (sub, mult) in subgroups(g)? {
        if sub.torsion == g.torsion {
            continue;
        }
        let s = sur_count_memo(a, &sub, memo)?;
        total -= s * BigInt::from(mult);
    }
    if total.is_negative() {
        panic!("Moebius inversion produced a negative count");
    }
    memo.insert(g.torsion.clone(), total.clone());
    Ok(total)
}

pub const SUBGROUP_ORDER_BOUND: u64 = 10_000;

/// All subgroups of a finite `G` with `|G| <= 10^4`, grouped by isomorphism
/// type with multiplicities. Subgroups decompose over Sylow parts, so the
/// lattice is enumerated per prime and crossed.
pub fn subgroups(g: &AbelianGroup) -> Result<Vec<(AbelianGroup, u64)>, GroupError> {
    if !g.is_finite() {
        return Err(GroupError::NotFinite);
    }
    g.torsion_u64(SUBGROUP_ORDER_BOUND)?;
    let mut acc: Vec<(Vec<(u64, Vec<u32>)>, u64)> = vec![(vec![], 1)];
    for p in g.torsion_primes()? {
        let syl = g.sylow(p);
        let local = p_group_subgroup_types(&syl);
        let mut next = Vec::with_capacity(acc.len() * local.len());
        for (types, mult) in &acc {
            for (parts, m) in &local {
                let mut t = types.clone();
                if !parts.is_empty() {
                    t.push((p, parts.clone()));
                }
                next.push((t, mult * m));
            }
        }
        acc = next;
    }
    let mut merged: HashMap<Vec<BigInt>, u64> = HashMap::new();
    for (types, mult) in acc {
        let group = group_from_local_types(&types);
        *merged.entry(group.torsion).or_insert(0) += mult;
    }
    let mut out: Vec<(AbelianGroup, u64)> = merged
        .into_iter()
        .map(|(torsion, m)| (AbelianGroup { free_rank: 0, torsion }, m))
        .collect();
    out.sort_by(|a, b| {
        a.0.torsion_order()
            .cmp(&b.0.torsion_order())
            .then_with(|| a.0.torsion.cmp(&b.0.torsion))
    });
    Ok(out)
}

fn group_from_local_types(types: &[(u64, Vec<u32>)]) -> AbelianGroup {
    let depth = types.iter().map(|(_, parts)| parts.len()).max().unwrap_or(0);
    let mut chain = vec![BigInt::one(); depth];
    for (p, parts) in types {
        for (slot, &e) in parts.iter().enumerate() {
            chain[depth - 1 - slot] *= BigInt::from(*p).pow(e);
        }
    }
    AbelianGroup::new(0, chain)
}

/// Subgroup isomorphism types (as partitions) of the p-group of type `lambda`,
/// with multiplicities, by breadth-first closure over explicit elements.
fn p_group_subgroup_types(lambda: &PartitionType) -> Vec<(Vec<u32>, u64)> {
    let moduli: Vec<u64> = lambda.parts.iter().map(|&e| lambda.p.pow(e)).collect();
    let grp = Concrete::new(moduli);
    let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
    let mut by_type: HashMap<Vec<u32>, u64> = HashMap::new();
    let trivial = grp.closure_of(&[]);
    let mut queue = vec![trivial.clone()];
    seen.insert(trivial.words().to_vec(), ());
    while let Some(h) = queue.pop() {
        *by_type.entry(grp.p_type(&h, lambda.p)).or_insert(0) += 1;
        for g in 0..grp.order() {
            if h.contains(g) {
                continue;
            }
            let bigger = grp.extend(&h, g);
            if seen.insert(bigger.words().to_vec(), ()).is_none() {
                queue.push(bigger);
            }
        }
    }
    let mut out: Vec<(Vec<u32>, u64)> = by_type.into_iter().collect();
    out.sort();
    out
}

// ---------------------------------------------------------------------------
// Explicit finite groups for brute-force counts
// ---------------------------------------------------------------------------

/// A finite abelian group as `Z/m_1 x ... x Z/m_k` with explicit element
/// indices in mixed radix.
struct Concrete {
    moduli: Vec<u64>,
    strides: Vec<u64>,
    order: u64,
}

/// Subset of a `Concrete` group as a bitset over element indices.
#[derive(Clone, PartialEq, Eq)]
struct ElemSet {
    words: Vec<u64>,
    len: u64,
}

impl ElemSet {
    fn empty(order: u64) -> Self {
        Self { words: vec![0; (order as usize + 63) / 64], len: 0 }
    }
    fn contains(&self, idx: u64) -> bool {
        self.words[(idx / 64) as usize] >> (idx % 64) & 1 == 1
    }
    fn insert(&mut self, idx: u64) -> bool {
        let w = &mut self.words[(idx / 64) as usize];
        let bit = 1u64 << (idx % 64);
        if *w & bit == 0 {
            *w |= bit;
            self.len += 1;
            true
        } else {
            false
        }
    }
    fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64).filter_map(move |b| (w >> b & 1 == 1).then_some(wi as u64 * 64 + b))
        })
    }
    fn len(&self) -> u64 {
        self.len
    }
    fn words(&self) -> &[u64] {
        &self.words
    }
}

impl Concrete {
    fn new(moduli: Vec<u64>) -> Self {
        let mut strides = vec![1u64; moduli.len()];
        for i in 1..moduli.len() {
            strides[i] = strides[i - 1] * moduli[i - 1];
        }
        let order = moduli.iter().product::<u64>().max(1);
        Self { moduli, strides, order }
    }

    fn order(&self) -> u64 {
        self.order
    }

    fn decode(&self, idx: u64) -> Vec<u64> {
        self.moduli
            .iter()
            .zip(&self.strides)
            .map(|(&m, &s)| idx / s % m)
            .collect()
    }

    fn encode(&self, coords: &[u64]) -> u64 {
        coords
            .iter()
            .zip(&self.strides)
            .zip(&self.moduli)
            .map(|((&c, &s), &m)| (c % m) * s)
            .sum()
    }

    fn add(&self, a: u64, b: u64) -> u64 {
        let mut idx = 0;
        for (&m, &s) in self.moduli.iter().zip(&self.strides) {
            let xa = a / s % m;
            let xb = b / s % m;
            idx += (xa + xb) % m * s;
        }
        idx
    }

    /// Subgroup generated by the given elements.
    fn closure_of(&self, gens: &[u64]) -> ElemSet {
        let mut set = ElemSet::empty(self.order);
        set.insert(0);
        for &g in gens {
            set = self.extend(&set, g);
        }
        set
    }

    /// `<H, g>` for a subgroup bitset `H`: union of the cosets `H + k g`.
    fn extend(&self, h: &ElemSet, g: u64) -> ElemSet {
        let mut out = h.clone();
        let mut kg = g;
        while !out.contains(kg) {
            for m in h.iter() {
                out.insert(self.add(m, kg));
            }
            kg = self.add(kg, g);
        }
        out
    }

    /// Partition type of a subgroup of a p-group: read off conjugate-partition
    /// prefix sums from the sizes of the p^k-torsion layers.
    fn p_type(&self, h: &ElemSet, p: u64) -> Vec<u32> {
        let mut conj = Vec::new();
        let mut prev = 1u64; // |{x : p^0 x = 0}|
        let mut k = 1u32;
        loop {
            let pk = p.pow(k);
            let layer = h
                .iter()
                .filter(|&x| {
                    self.decode(x)
                        .iter()
                        .zip(&self.moduli)
                        .all(|(&c, &m)| (c as u128 * pk as u128) % m as u128 == 0)
                })
                .count() as u64;
            if layer == prev {
                break;
            }
            let mut ratio = layer / prev;
            let mut cnt = 0u32;
            while ratio > 1 {
                ratio /= p;
                cnt += 1;
            }
            conj.push(cnt);
            prev = layer;
            k += 1;
        }
        // conj is the conjugate partition; transpose back
        let max = conj.first().copied().unwrap_or(0);
        (1..=max)
            .map(|j| conj.iter().filter(|&&c| c >= j).count() as u32)
            .collect()
    }

    /// Elements killed by `d`, i.e. the d-torsion subgroup, as raw indices.
    fn torsion_elements(&self, d: u64) -> Vec<u64> {
        let per_coord: Vec<Vec<u64>> = self
            .moduli
            .iter()
            .map(|&m| {
                let g = gcd_u64(d, m);
                let step = m / g;
                (0..g).map(|k| k * step).collect()
            })
            .collect();
        let mut out = vec![vec![]];
        for coords in &per_coord {
            let mut next = Vec::with_capacity(out.len() * coords.len());
            for prefix in &out {
                for &c in coords {
                    let mut v: Vec<u64> = prefix.clone();
                    v.push(c);
                    next.push(v);
                }
            }
            out = next;
        }
        out.into_iter().map(|coords| self.encode(&coords)).collect()
    }
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd_u64(b, a % b)
    }
}

pub const AUT_ORDER_BOUND: u64 = 1 << 12;
const SEARCH_BOUND: f64 = (1u64 << 24) as f64;

/// `|Aut(G)|` by enumerating endomorphisms as generator-image tuples and
/// counting the surjective ones (finite, so surjective = bijective).
pub fn aut_order(g: &AbelianGroup) -> Result<BigInt, GroupError> {
    let moduli = g.torsion_u64(AUT_ORDER_BOUND)?;
    if !g.is_finite() {
        return Err(GroupError::NotFinite);
    }
    if moduli.is_empty() {
        return Ok(BigInt::one());
    }
    let grp = Concrete::new(moduli.clone());
    let candidates: Vec<Vec<u64>> = moduli.iter().map(|&d| grp.torsion_elements(d)).collect();
    let space: f64 = candidates.iter().map(|c| c.len() as f64).product();
    if space > SEARCH_BOUND {
        return Err(GroupError::SearchTooLarge(space));
    }
    let mut count = BigInt::zero();
    let mut images = Vec::with_capacity(moduli.len());
    aut_search(&grp, &candidates, &mut images, &grp.closure_of(&[]), &mut count, None);
    Ok(count)
}

/// Count surjective generator-image tuples, optionally filtered by a pairing
/// preservation predicate evaluated pairwise as images are chosen.
fn aut_search(
    grp: &Concrete,
    candidates: &[Vec<u64>],
    images: &mut Vec<u64>,
    span: &ElemSet,
    count: &mut BigInt,
    pairing: Option<&PairingCheck<'_>>,
) {
    let i = images.len();
    if i == candidates.len() {
        if span.len() == grp.order() {
            *count += 1;
        }
        return;
    }
    // Remaining generators can multiply the span by at most prod of their orders.
    let remaining: f64 = candidates[i..].iter().map(|c| c.len() as f64).product();
    if (span.len() as f64) * remaining < grp.order() as f64 {
        return;
    }
    'cand: for &g in &candidates[i] {
        if let Some(check) = pairing {
            for (j, &h) in images.iter().enumerate() {
                if !check.preserved(j, h, i, g) {
                    continue 'cand;
                }
            }
            if !check.preserved(i, g, i, g) {
                continue 'cand;
            }
        }
        let new_span = if span.contains(g) { span.clone() } else { grp.extend(span, g) };
        images.push(g);
        aut_search(grp, candidates, images, &new_span, count, pairing);
        images.pop();
    }
}

struct PairingCheck<'a> {
    grp: &'a Concrete,
    exponent: u64,
    /// pairing of the standard generators, numerators mod `exponent`
    base: Vec<Vec<u64>>,
}

impl PairingCheck<'_> {
    /// Pairing of two arbitrary elements by bilinear expansion.
    fn pair(&self, x: u64, y: u64) -> u64 {
        let xc = self.grp.decode(x);
        let yc = self.grp.decode(y);
        let mut acc: u128 = 0;
        for (i, &xi) in xc.iter().enumerate() {
            if xi == 0 {
                continue;
            }
            for (j, &yj) in yc.iter().enumerate() {
                if yj == 0 {
                    continue;
                }
                acc += xi as u128 * yj as u128 % self.exponent as u128
                    * self.base[i][j] as u128
                    % self.exponent as u128;
                acc %= self.exponent as u128;
            }
        }
        acc as u64
    }

    /// Does mapping generator `i -> gi`, `j -> gj` preserve the base pairing?
    fn preserved(&self, i: usize, gi: u64, j: usize, gj: u64) -> bool {
        self.pair(gi, gj) == self.base_gen(i, j)
    }

    fn base_gen(&self, i: usize, j: usize) -> u64 {
        self.base[i][j]
    }
}

/// `|Sp(B)|` for `B = H x H`: automorphisms preserving the standard
/// hyperbolic alternating pairing `<(x,y),(x',y')> = sum_i (x_i y'_i - x'_i
/// y_i)/e_i`, counted by brute force.
pub fn sp_order(b: &AbelianGroup) -> Result<BigInt, GroupError> {
    if !b.is_finite() {
        return Err(GroupError::NotFinite);
    }
    if !b.torsion_is_square() {
        return Err(GroupError::NotSquare);
    }
    let moduli = b.torsion_u64(AUT_ORDER_BOUND)?;
    if moduli.is_empty() {
        return Ok(BigInt::one());
    }
    let grp = Concrete::new(moduli.clone());
    let exponent = *moduli.last().unwrap();
    // Generators come in hyperbolic pairs (2i, 2i+1), both of order e_i =
    // moduli[2i]; <g_{2i}, g_{2i+1}> = 1/e_i, all other generator pairs 0.
    let k = moduli.len();
    let mut base = vec![vec![0u64; k]; k];
    for i in (0..k).step_by(2) {
        let e = moduli[i];
        let val = exponent / e; // numerator of 1/e_i in units of 1/exponent
        base[i][i + 1] = val;
        base[i + 1][i] = exponent - val;
    }
    let candidates: Vec<Vec<u64>> = moduli.iter().map(|&d| grp.torsion_elements(d)).collect();
    let space: f64 = candidates.iter().map(|c| c.len() as f64).product();
    if space > SEARCH_BOUND {
        return Err(GroupError::SearchTooLarge(space));
    }
    let check = PairingCheck { grp: &grp, exponent, base };
    let mut count = BigInt::zero();
    let mut images = Vec::with_capacity(k);
    aut_search(&grp, &candidates, &mut images, &grp.closure_of(&[]), &mut count, Some(&check));
    Ok(count)
}

/// Bilinear pairing `B x B -> (1/exp B) Z/Z` on a fixed generator basis,
/// stored as numerators mod `exp(B)`.
#[derive(Clone, Debug)]
pub struct BilinearPairing {
    pub group: AbelianGroup,
    pub kind: PairingKind,
    /// `values[i][j]` = numerator of `phi(g_i, g_j)` in units of `1/exp(B)`.
    pub values: Vec<Vec<u64>>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PairingKind {
    Symmetric,
    Alternating,
}

impl BilinearPairing {
    /// Check order constraints, symmetry, and (for alternating) the vanishing
    /// diagonal.
    pub fn is_valid(&self) -> bool {
        let Ok(moduli) = self.group.torsion_u64(u64::MAX) else {
            return false;
        };
        let exp = moduli.last().copied().unwrap_or(1);
        let k = moduli.len();
        for i in 0..k {
            for j in 0..k {
                let v = self.values[i][j] % exp;
                // d_i phi(g_i, g_j) = 0 and d_j phi(g_i, g_j) = 0
                if (v as u128 * moduli[i] as u128) % exp as u128 != 0 {
                    return false;
                }
                if (v as u128 * moduli[j] as u128) % exp as u128 != 0 {
                    return false;
                }
                let mirror = self.values[j][i] % exp;
                match self.kind {
                    PairingKind::Symmetric => {
                        if v != mirror {
                            return false;
                        }
                    }
                    PairingKind::Alternating => {
                        if (v + mirror) % exp != 0 {
                            return false;
                        }
                    }
                }
            }
            if self.kind == PairingKind::Alternating && self.values[i][i] % exp != 0 {
                return false;
            }
        }
        true
    }

    /// Perfect means the induced map `B -> Hom(B, Q/Z)` is injective (hence
    /// bijective).
    pub fn is_perfect(&self) -> bool {
        let moduli = self.group.torsion_u64(u64::MAX).expect("finite");
        if moduli.is_empty() {
            return true;
        }
        let exp = *moduli.last().unwrap();
        let grp = Concrete::new(moduli.clone());
        let k = moduli.len();
        'elems: for x in 1..grp.order() {
            let xc = grp.decode(x);
            for j in 0..k {
                let mut acc: u128 = 0;
                for (i, &xi) in xc.iter().enumerate() {
                    acc += xi as u128 * self.values[i][j] as u128 % exp as u128;
                }
                if acc % exp as u128 != 0 {
                    continue 'elems; // phi(x, .) nonzero
                }
            }
            return false; // x is in the kernel
        }
        true
    }
}

pub const PAIRING_ORDER_BOUND: u64 = 1 << 10;

/// Number of perfect bilinear pairings of the given symmetry on a finite `B`,
/// by brute force over generator value matrices.
pub fn perfect_pairing_count(b: &AbelianGroup, kind: PairingKind) -> Result<BigInt, GroupError> {
    if !b.is_finite() {
        return Err(GroupError::NotFinite);
    }
    let moduli = b.torsion_u64(PAIRING_ORDER_BOUND)?;
    let k = moduli.len();
    if k == 0 {
        return Ok(BigInt::one()); // the empty pairing on the trivial group
    }
    let exp = *moduli.last().unwrap();
    // Free slots: phi(g_i, g_j) for i <= j (symmetric) or i < j (alternating),
    // with gcd(d_i, d_j) = d_min choices each.
    let mut slots: Vec<(usize, usize, u64)> = Vec::new();
    let mut space = 1f64;
    for i in 0..k {
        let lo = match kind {
            PairingKind::Symmetric => i,
            PairingKind::Alternating => i + 1,
        };
        for j in lo..k {
            let choices = gcd_u64(moduli[i], moduli[j]);
            space *= choices as f64;
            slots.push((i, j, choices));
        }
    }
    if space > SEARCH_BOUND {
        return Err(GroupError::SearchTooLarge(space));
    }
    let mut values = vec![vec![0u64; k]; k];
    let mut count = BigInt::zero();
    pairing_search(b, kind, &moduli, exp, &slots, 0, &mut values, &mut count);
    Ok(count)
}

#[allow(clippy::too_many_arguments)]
fn pairing_search(
    b: &AbelianGroup,
    kind: PairingKind,
    moduli: &[u64],
    exp: u64,
    slots: &[(usize, usize, u64)],
    at: usize,
    values: &mut Vec<Vec<u64>>,
    count: &mut BigInt,
) {
    if at == slots.len() {
        let pairing = BilinearPairing { group: b.clone(), kind, values: values.clone() };
        debug_assert!(pairing.is_valid());
        if pairing.is_perfect() {
            *count += 1;
        }
        return;
    }
    let (i, j, choices) = slots[at];
    let unit = exp / gcd_u64(moduli[i], moduli[j]);
    for c in 0..choices {
        let v = c * unit;
        values[i][j] = v;
        values[j][i] = match kind {
            PairingKind::Symmetric => v,
            PairingKind::Alternating => (exp - v) % exp,
        };
        pairing_search(b, kind, moduli, exp, slots, at + 1, values, count);
    }
    values[i][j] = 0;
    if i != j {
        values[j][i] = 0;
    }
}

// ---------------------------------------------------------------------------
// Small factorization helpers
// ---------------------------------------------------------------------------

/// Factor a u64 into `(prime, exponent)` pairs, ascending.
pub fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    for p in [2u64, 3, 5] {
        let mut e = 0;
        while n % p == 0 {
            n /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
    }
    let mut p = 7u64;
    let wheel = [4u64, 2, 4, 2, 4, 6, 2, 6];
    let mut w = 0;
    while p * p <= n && p < 1_000_000 {
        let mut e = 0;
        while n % p == 0 {
            n /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
        p += wheel[w];
        w = (w + 1) % wheel.len();
    }
    if n > 1 {
        if crate::exact_linalg::is_prime_u64(n) {
            out.push((n, 1));
        } else {
            // composite with no factor below 10^6: split by Pollard rho
            let mut stack = vec![n];
            let mut primes = Vec::new();
            while let Some(m) = stack.pop() {
                if crate::exact_linalg::is_prime_u64(m) {
                    primes.push(m);
                    continue;
                }
                let d = pollard_rho(m);
                stack.push(d);
                stack.push(m / d);
            }
            primes.sort_unstable();
            let mut i = 0;
            while i < primes.len() {
                let p = primes[i];
                let e = primes[i..].iter().take_while(|&&q| q == p).count();
                out.push((p, e as u32));
                i += e;
            }
        }
    }
    out.sort_unstable();
    out
}

fn pollard_rho(n: u64) -> u64 {
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul(x, x) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd_u64(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_linalg::{cokernel, IntegerMatrix};

    fn grp(text: &str) -> AbelianGroup {
        AbelianGroup::parse(text).unwrap()
    }

    #[test]
    fn canonical_form_and_parse() {
        assert_eq!(grp("Z/2 x Z/3"), grp("Z/6"));
        assert_eq!(grp("Z/4 x Z/2").torsion(), &[BigInt::from(2), BigInt::from(4)]);
        assert_eq!(grp("Z^2 x Z/12").free_rank(), 2);
        assert_eq!(grp("0"), AbelianGroup::trivial());
        assert_eq!(grp("Z").to_string(), "Z");
        assert_eq!(grp("Z/6 x Z/4").to_string(), "Z/2 x Z/12");
        assert!(AbelianGroup::parse("Q/7").is_err());
    }

    #[test]
    fn sylow_examples() {
        assert_eq!(grp("Z/12").sylow(2).parts, vec![2]);
        assert_eq!(grp("Z/2 x Z/2").sylow(2).parts, vec![1, 1]);
        assert!(grp("Z/3").sylow(2).parts.is_empty());
    }

    #[test]
    fn cyclicity_predicates() {
        assert!(grp("Z/6").is_cyclic());
        assert!(grp("Z").is_cyclic());
        assert!(AbelianGroup::trivial().is_cyclic());
        assert!(!grp("Z x Z/2").is_cyclic());
        assert!(!grp("Z/2 x Z/2").is_cyclic());
        assert!(grp("Z/2 x Z/2").torsion_is_square());
        assert!(grp("Z/2 x Z/2").is_square_of_cyclic_torsion());
        assert!(!grp("Z/2 x Z/4").torsion_is_square());
        assert!(!grp("Z/2 x Z/4").is_square_of_cyclic_torsion());
        assert!(grp("Z/2 x Z/2 x Z/6 x Z/6").torsion_is_square());
        assert!(!grp("Z/2 x Z/2 x Z/6 x Z/6").is_square_of_cyclic_torsion());
        assert!(AbelianGroup::trivial().torsion_is_square());
    }

    #[test]
    fn hom_count_examples() {
        assert_eq!(hom_count(&grp("Z/4"), &grp("Z/2 x Z/2")).unwrap(), BigInt::from(4));
        assert_eq!(hom_count(&grp("Z"), &grp("Z/6 x Z/2")).unwrap(), BigInt::from(12));
        assert_eq!(hom_count(&grp("Z/3"), &grp("Z/2")).unwrap(), BigInt::one());
    }

    #[test]
    fn sur_count_examples() {
        assert_eq!(sur_count(&grp("Z/2 x Z/2"), &grp("Z/2")).unwrap(), BigInt::from(3));
        assert_eq!(sur_count(&grp("Z/4"), &grp("Z/2")).unwrap(), BigInt::one());
        assert_eq!(sur_count(&grp("Z/2"), &grp("Z/2 x Z/2")).unwrap(), BigInt::zero());
        assert_eq!(sur_count(&grp("Z"), &grp("Z/5")).unwrap(), BigInt::from(4));
    }

    #[test]
    fn subgroups_examples() {
        let z4 = subgroups(&grp("Z/4")).unwrap();
        // {1, Z/2, Z/4}, one each
        assert_eq!(z4.len(), 3);
        assert!(z4.iter().all(|(_, m)| *m == 1));
        let v4 = subgroups(&grp("Z/2 x Z/2")).unwrap();
        let as_map: HashMap<String, u64> =
            v4.iter().map(|(g, m)| (g.to_string(), *m)).collect();
        assert_eq!(as_map["0"], 1);
        assert_eq!(as_map["Z/2"], 3);
        assert_eq!(as_map["Z/2 x Z/2"], 1);
        let zp = subgroups(&grp("Z/7")).unwrap();
        assert_eq!(zp.iter().map(|(_, m)| m).sum::<u64>(), 2);
    }

    #[test]
    fn moebius_identity_on_all_groups_up_to_64() {
        let a1 = grp("Z/8 x Z/2");
        let a2 = grp("Z x Z/6");
        for g in all_finite_groups_up_to(64) {
            let subs = subgroups(&g).unwrap();
            for a in [&a1, &a2] {
                let total: BigInt = subs
                    .iter()
                    .map(|(h, m)| sur_count(a, h).unwrap() * BigInt::from(*m))
                    .sum();
                assert_eq!(total, hom_count(a, &g).unwrap(), "G={g}");
            }
        }
    }

    fn all_finite_groups_up_to(n: u64) -> Vec<AbelianGroup> {
        fn partitions(total: u32) -> Vec<Vec<u32>> {
            fn rec(rem: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
                if rem == 0 {
                    out.push(cur.clone());
                    return;
                }
                for next in (1..=rem.min(max)).rev() {
                    cur.push(next);
                    rec(rem - next, next, cur, out);
                    cur.pop();
                }
            }
            let mut out = Vec::new();
            rec(total, total, &mut Vec::new(), &mut out);
            out
        }
        let mut groups = vec![AbelianGroup::trivial()];
        for order in 2..=n {
            let facs = factor_u64(order);
            let mut variants: Vec<Vec<u64>> = vec![vec![]];
            for (p, e) in facs {
                let mut next = Vec::new();
                for lam in partitions(e) {
                    for v in &variants {
                        let mut v = v.clone();
                        v.extend(lam.iter().map(|&x| p.pow(x)));
                        next.push(v);
                    }
                }
                variants = next;
            }
            for v in variants {
                groups.push(AbelianGroup::from_factors(0, &v));
            }
        }
        groups
    }

    #[test]
    fn aut_order_examples() {
        assert_eq!(aut_order(&grp("Z/2")).unwrap(), BigInt::one());
        assert_eq!(aut_order(&grp("Z/2 x Z/2")).unwrap(), BigInt::from(6));
        assert_eq!(aut_order(&grp("Z/2 x Z/4")).unwrap(), BigInt::from(8));
        assert_eq!(aut_order(&AbelianGroup::trivial()).unwrap(), BigInt::one());
    }

    #[test]
    fn aut_order_of_elementary_abelian_matches_gl_order() {
        for p in [2u64, 3] {
            for r in 1..=3u32 {
                let g = AbelianGroup::from_factors(0, &vec![p; r as usize]);
                let expected: BigInt = (0..r)
                    .map(|i| BigInt::from(p).pow(r) - BigInt::from(p).pow(i))
                    .product();
                assert_eq!(aut_order(&g).unwrap(), expected, "p={p} r={r}");
            }
        }
    }

    #[test]
    fn aut_order_of_cyclic_is_euler_phi() {
        for d in [2u64, 3, 4, 6, 8, 9, 12, 30] {
            let phi: u64 = factor_u64(d)
                .iter()
                .map(|&(p, e)| p.pow(e - 1) * (p - 1))
                .product();
            assert_eq!(aut_order(&AbelianGroup::cyclic(d)).unwrap(), BigInt::from(phi));
        }
    }

    #[test]
    fn sp_order_examples() {
        assert_eq!(sp_order(&AbelianGroup::trivial()).unwrap(), BigInt::one());
        assert_eq!(sp_order(&grp("Z/2 x Z/2")).unwrap(), BigInt::from(6));
        assert_eq!(sp_order(&grp("Z/3 x Z/3")).unwrap(), BigInt::from(24));
        assert!(sp_order(&grp("Z/2 x Z/4")).is_err());
        assert!(sp_order(&grp("Z x Z/2 x Z/2")).is_err());
    }

    #[test]
    fn sp_divides_aut_on_squares() {
        for text in ["Z/2 x Z/2", "Z/3 x Z/3", "Z/4 x Z/4", "Z/2 x Z/2 x Z/4 x Z/4"] {
            let b = grp(text);
            let sp = sp_order(&b).unwrap();
            let aut = aut_order(&b).unwrap();
            assert!(aut.is_multiple_of(&sp), "B={b}: {aut} vs {sp}");
        }
    }

    #[test]
    fn pairing_count_examples() {
        assert_eq!(
            perfect_pairing_count(&grp("Z/2"), PairingKind::Symmetric).unwrap(),
            BigInt::one()
        );
        assert_eq!(
            perfect_pairing_count(&grp("Z/2"), PairingKind::Alternating).unwrap(),
            BigInt::zero()
        );
        assert_eq!(
            perfect_pairing_count(&grp("Z/2 x Z/2"), PairingKind::Alternating).unwrap(),
            BigInt::one()
        );
    }

    #[test]
    fn pairing_existence_criteria() {
        let smalls = [
            "0", "Z/2", "Z/3", "Z/4", "Z/2 x Z/2", "Z/2 x Z/4", "Z/3 x Z/3", "Z/6",
            "Z/2 x Z/2 x Z/2", "Z/4 x Z/4", "Z/6 x Z/6",
        ];
        for text in smalls {
            let b = grp(text);
            let sym = perfect_pairing_count(&b, PairingKind::Symmetric).unwrap();
            assert!(sym > BigInt::zero(), "symmetric count vanished for {b}");
            let alt = perfect_pairing_count(&b, PairingKind::Alternating).unwrap();
            assert_eq!(alt > BigInt::zero(), b.torsion_is_square(), "alternating for {b}");
        }
    }

    #[test]
    fn symmetric_pairing_count_on_cyclic_is_euler_phi() {
        for d in [2u64, 3, 4, 5, 8, 9] {
            let phi: u64 = factor_u64(d)
                .iter()
                .map(|&(p, e)| p.pow(e - 1) * (p - 1))
                .product();
            assert_eq!(
                perfect_pairing_count(&AbelianGroup::cyclic(d), PairingKind::Symmetric).unwrap(),
                BigInt::from(phi),
                "d={d}"
            );
        }
    }

    /// Independent tensor-square oracle: present `G (x) G` by generators
    /// `x (x) y` over all element pairs with bilinearity relations, quotient
    /// by symmetry (or by squares), and read off the cokernel order.
    fn tensor_square_order(moduli: &[u64], wedge: bool) -> BigInt {
        let grp = Concrete::new(moduli.to_vec());
        let n = grp.order() as usize;
        let pair_idx = |x: u64, y: u64| (x as usize) * n + y as usize;
        let mut relations: Vec<Vec<i64>> = Vec::new();
        let mut rel = |spec: &[(usize, i64)]| {
            let mut row = vec![0i64; n * n];
            for &(i, c) in spec {
                row[i] += c;
            }
            relations.push(row);
        };
        for x in 0..grp.order() {
            for y in 0..grp.order() {
                for z in 0..grp.order() {
                    rel(&[
                        (pair_idx(grp.add(x, z), y), 1),
                        (pair_idx(x, y), -1),
                        (pair_idx(z, y), -1),
                    ]);
                    rel(&[
                        (pair_idx(x, grp.add(y, z)), 1),
                        (pair_idx(x, y), -1),
                        (pair_idx(x, z), -1),
                    ]);
                }
                if wedge {
                    if x == y {
                        rel(&[(pair_idx(x, x), 1)]);
                    }
                } else {
                    rel(&[(pair_idx(x, y), 1), (pair_idx(y, x), -1)]);
                }
            }
        }
        let mat = IntegerMatrix::from_fn(n * n, relations.len(), |r, c| relations[c][r]);
        let cok = cokernel(&mat);
        assert!(cok.is_finite());
        cok.torsion_order()
    }

    #[test]
    fn sym2_wedge2_examples_against_tensor_oracle() {
        // lambda = (1), p = 2
        let l1 = PartitionType::new(2, vec![1]);
        assert_eq!(sym2_order(&l1), BigInt::from(2));
        assert_eq!(sym2_order(&l1), tensor_square_order(&[2], false));
        assert_eq!(wedge2_order(&l1), tensor_square_order(&[2], true));
        // lambda = (1,1), p = 2
        let l11 = PartitionType::new(2, vec![1, 1]);
        assert_eq!(sym2_order(&l11), BigInt::from(8));
        assert_eq!(wedge2_order(&l11), BigInt::from(2));
        assert_eq!(sym2_order(&l11), tensor_square_order(&[2, 2], false));
        assert_eq!(wedge2_order(&l11), tensor_square_order(&[2, 2], true));
        // lambda = (2,1), p = 2: oracle on Z/4 x Z/2
        let l21 = PartitionType::new(2, vec![2, 1]);
        assert_eq!(sym2_order(&l21), tensor_square_order(&[4, 2], false));
        assert_eq!(wedge2_order(&l21), tensor_square_order(&[4, 2], true));
        // empty partition
        let empty = PartitionType::new(2, vec![]);
        assert_eq!(sym2_order(&empty), BigInt::one());
        assert_eq!(wedge2_order(&empty), BigInt::one());
    }

    #[test]
    fn sym2_times_wedge2_is_tensor_square_order() {
        for p in [2u64, 3] {
            for parts in [vec![1], vec![2], vec![1, 1], vec![2, 1], vec![3, 2, 1], vec![2, 2, 1]] {
                let lam = PartitionType::new(p, parts.clone());
                // |G (x) G| = p^(sum_{i,j} min(lambda_i, lambda_j))
                let mut e = 0u64;
                for &a in &parts {
                    for &b in &parts {
                        e += a.min(b) as u64;
                    }
                }
                let tensor = pow_u64(p, e);
                assert_eq!(sym2_order(&lam) * wedge2_order(&lam), tensor, "p={p} {parts:?}");
            }
        }
    }

    #[test]
    fn tensor_mod_examples() {
        assert_eq!(grp("Z x Z/6").tensor_mod(2), grp("Z/2 x Z/2"));
        assert_eq!(grp("Z/3").tensor_mod(2), AbelianGroup::trivial());
        assert_eq!(grp("Z/4 x Z/8").tensor_mod(4), grp("Z/4 x Z/4"));
    }

    #[test]
    fn factor_u64_spot_checks() {
        assert_eq!(factor_u64(1), vec![]);
        assert_eq!(factor_u64(12), vec![(2, 2), (3, 1)]);
        assert_eq!(factor_u64(97), vec![(97, 1)]);
        assert_eq!(factor_u64(1_000_003 * 2), vec![(2, 1), (1_000_003, 1)]);
        // needs rho: product of two primes above the trial-division bound
        assert_eq!(
            factor_u64(1_000_003u64 * 1_000_033),
            vec![(1_000_003, 1), (1_000_033, 1)]
        );
    }

    #[test]
    fn conjugate_partition() {
        let lam = PartitionType::new(3, vec![3, 1, 1]);
        assert_eq!(lam.conjugate(), vec![3, 1, 1]);
        let lam = PartitionType::new(2, vec![2, 2, 1]);
        assert_eq!(lam.conjugate(), vec![3, 2]);
    }
}
