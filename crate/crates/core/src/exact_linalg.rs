//! Exact integer and mod-p linear algebra: Smith normal forms, determinants,
//! ranks over prime fields, and minor gcds.
//!
//! Everything here is exact. Matrices carry arbitrary-precision entries; the
//! Smith normal form runs a classic row/column gcd elimination with pivots
//! chosen by minimal absolute value. Elimination is first attempted in
//! checked `i128` arithmetic and transparently rerun over `BigInt` if any
//! intermediate value overflows, so results never depend on which path ran.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::abelian::AbelianGroup;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("minor order {k} exceeds matrix dimensions {rows}x{cols}")]
    MinorOrder { k: usize, rows: usize, cols: usize },
    #[error("{0} is not an odd prime below 2^61")]
    BadPrime(u64),
    #[error("matrix parse error: {0}")]
    Parse(String),
}

/// Dense matrix of arbitrary-precision integers, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct IntegerMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl fmt::Debug for IntegerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "IntegerMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self[(r, c)].to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl IntegerMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> i64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(BigInt::from(f(r, c)));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)].clone();
            }
        }
        t
    }

    /// Submatrix with row `r` and column `c` deleted.
    pub fn delete_row_col(&self, r: usize, c: usize) -> Self {
        assert!(r < self.rows && c < self.cols);
        let mut out = Self::zeros(self.rows - 1, self.cols - 1);
        for i in 0..self.rows - 1 {
            for j in 0..self.cols - 1 {
                let si = if i < r { i } else { i + 1 };
                let sj = if j < c { j } else { j + 1 };
                out[(i, j)] = self[(si, sj)].clone();
            }
        }
        out
    }

    /// Leading principal `k x k` submatrix.
    pub fn leading_principal(&self, k: usize) -> Self {
        assert!(k <= self.rows && k <= self.cols);
        let mut out = Self::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                out[(i, j)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let prod = a * &other[(k, j)];
                    out[(i, j)] += prod;
                }
            }
        }
        out
    }

    /// Text format: first line `rows cols`, then row-major whitespace-separated
    /// integers.
    pub fn parse_text(input: &str) -> Result<Self, LinalgError> {
        let mut tokens = input.split_whitespace();
        let rows: usize = tokens
            .next()
            .ok_or_else(|| LinalgError::Parse("missing row count".into()))?
            .parse()
            .map_err(|e| LinalgError::Parse(format!("bad row count: {e}")))?;
        let cols: usize = tokens
            .next()
            .ok_or_else(|| LinalgError::Parse("missing column count".into()))?
            .parse()
            .map_err(|e| LinalgError::Parse(format!("bad column count: {e}")))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let tok = tokens
                .next()
                .ok_or_else(|| LinalgError::Parse("too few entries".into()))?;
            let v = BigInt::from_str(tok)
                .map_err(|e| LinalgError::Parse(format!("bad entry {tok:?}: {e}")))?;
            data.push(v);
        }
        if tokens.next().is_some() {
            return Err(LinalgError::Parse("trailing tokens after matrix".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// JSON array-of-arrays; entries either integers or decimal strings.
    pub fn parse_json(input: &str) -> Result<Self, LinalgError> {
        let val: serde_json::Value =
            serde_json::from_str(input).map_err(|e| LinalgError::Parse(e.to_string()))?;
        let arr = val
            .as_array()
            .ok_or_else(|| LinalgError::Parse("expected array of arrays".into()))?;
        let rows = arr.len();
        let mut data = Vec::new();
        let mut cols = None;
        for row in arr {
            let row = row
                .as_array()
                .ok_or_else(|| LinalgError::Parse("expected array of arrays".into()))?;
            match cols {
                None => cols = Some(row.len()),
                Some(c) if c != row.len() => {
                    return Err(LinalgError::Parse("ragged rows".into()))
                }
                _ => {}
            }
            for v in row {
                let entry = if let Some(i) = v.as_i64() {
                    BigInt::from(i)
                } else if let Some(s) = v.as_str() {
                    BigInt::from_str(s)
                        .map_err(|e| LinalgError::Parse(format!("bad entry {s:?}: {e}")))?
                } else {
                    return Err(LinalgError::Parse(format!("bad entry {v}")));
                };
                data.push(entry);
            }
        }
        let cols = cols.unwrap_or(0);
        Ok(Self { rows, cols, data })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.rows, self.cols);
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self[(r, c)].to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    fn to_i128(&self) -> Option<Vec<i128>> {
        self.data.iter().map(ToPrimitive::to_i128).collect()
    }
}

impl std::ops::Index<(usize, usize)> for IntegerMatrix {
    type Output = BigInt;
    fn index(&self, (r, c): (usize, usize)) -> &BigInt {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntegerMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut BigInt {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Smith normal form: invariant factors `d_1 | d_2 | ... | d_r`, all >= 1,
/// with optional unimodular transforms `U, V` so that `U M V` is the diagonal
/// of the `d_i` padded with zeros.
#[derive(Clone, Debug)]
pub struct SmithForm {
    pub invariant_factors: Vec<BigInt>,
    pub rank: usize,
    pub left: Option<IntegerMatrix>,
    pub right: Option<IntegerMatrix>,
}

impl SmithForm {
    /// Product of the first `k` invariant factors (equals the gcd of all
    /// `k x k` minors; zero when `k` exceeds the rank).
    pub fn minor_gcd(&self, k: usize) -> BigInt {
        if k > self.rank {
            return BigInt::zero();
        }
        self.invariant_factors[..k].iter().product()
    }
}

// ---------------------------------------------------------------------------
// Elimination core, generic over the entry type so the checked-i128 fast path
// and the BigInt fallback share one implementation.
// ---------------------------------------------------------------------------

trait Entry: Clone + PartialEq + Sized {
    fn ent_zero() -> Self;
    fn ent_one() -> Self;
    fn ent_is_zero(&self) -> bool;
    fn ent_is_negative(&self) -> bool;
    fn abs_cmp(&self, other: &Self) -> Ordering;
    fn checked_neg(&self) -> Option<Self>;
    fn checked_mul_by(&self, other: &Self) -> Option<Self>;
    fn checked_sub_by(&self, other: &Self) -> Option<Self>;
    /// `self - q * b`, or `None` on overflow.
    fn checked_sub_mul(&self, q: &Self, b: &Self) -> Option<Self>;
    /// Nearest-integer quotient of `self / d` (`d` nonzero).
    fn round_quotient(&self, d: &Self) -> Option<Self>;
    fn divisible_by(&self, d: &Self) -> bool;
    fn to_bigint(&self) -> BigInt;
}

impl Entry for i128 {
    fn ent_zero() -> Self {
        0
    }
    fn ent_one() -> Self {
        1
    }
    fn ent_is_zero(&self) -> bool {
        *self == 0
    }
    fn ent_is_negative(&self) -> bool {
        *self < 0
    }
    fn abs_cmp(&self, other: &Self) -> Ordering {
        self.unsigned_abs().cmp(&other.unsigned_abs())
    }
    fn checked_neg(&self) -> Option<Self> {
        i128::checked_neg(*self)
    }
    fn checked_mul_by(&self, other: &Self) -> Option<Self> {
        self.checked_mul(*other)
    }
    fn checked_sub_by(&self, other: &Self) -> Option<Self> {
        self.checked_sub(*other)
    }
    fn checked_sub_mul(&self, q: &Self, b: &Self) -> Option<Self> {
        self.checked_sub(q.checked_mul(*b)?)
    }
    fn round_quotient(&self, d: &Self) -> Option<Self> {
        let mut q = self.checked_div_euclid(*d)?;
        let r = self.checked_rem_euclid(*d)?; // 0 <= r < |d|
        if r.checked_mul(2)? > d.checked_abs()? {
            q = q.checked_add(d.signum())?;
        }
        Some(q)
    }
    fn divisible_by(&self, d: &Self) -> bool {
        self % d == 0
    }
    fn to_bigint(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl Entry for BigInt {
    fn ent_zero() -> Self {
        Zero::zero()
    }
    fn ent_one() -> Self {
        One::one()
    }
    fn ent_is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn ent_is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn abs_cmp(&self, other: &Self) -> Ordering {
        self.abs().cmp(&other.abs())
    }
    fn checked_neg(&self) -> Option<Self> {
        Some(-self)
    }
    fn checked_mul_by(&self, other: &Self) -> Option<Self> {
        Some(self * other)
    }
    fn checked_sub_by(&self, other: &Self) -> Option<Self> {
        Some(self - other)
    }
    fn checked_sub_mul(&self, q: &Self, b: &Self) -> Option<Self> {
        Some(self - q * b)
    }
    fn round_quotient(&self, d: &Self) -> Option<Self> {
        let (mut q, r) = self.div_mod_floor(d); // 0 <= r < |d|
        if &r * 2 > d.abs() {
            q += d.signum();
        }
        Some(q)
    }
    fn divisible_by(&self, d: &Self) -> bool {
        self.is_multiple_of(d)
    }
    fn to_bigint(&self) -> BigInt {
        self.clone()
    }
}

struct MatBuf<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Entry> MatBuf<T> {
    fn identity(n: usize) -> Self {
        let mut data = vec![T::ent_zero(); n * n];
        for i in 0..n {
            data[i * n + i] = T::ent_one();
        }
        Self { rows: n, cols: n, data }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for r in 0..self.rows {
            self.data.swap(r * self.cols + a, r * self.cols + b);
        }
    }

    /// row_i -= q * row_t
    fn row_sub_mul(&mut self, i: usize, t: usize, q: &T) -> Option<()> {
        for c in 0..self.cols {
            let b = self.at(t, c).clone();
            if b.ent_is_zero() {
                continue;
            }
            let cur = self.at(i, c);
            self.data[i * self.cols + c] = cur.checked_sub_mul(q, &b)?;
        }
        Some(())
    }

    /// col_j -= q * col_t
    fn col_sub_mul(&mut self, j: usize, t: usize, q: &T) -> Option<()> {
        for r in 0..self.rows {
            let b = self.at(r, t).clone();
            if b.ent_is_zero() {
                continue;
            }
            let cur = self.at(r, j);
            self.data[r * self.cols + j] = cur.checked_sub_mul(q, &b)?;
        }
        Some(())
    }

    fn negate_row(&mut self, i: usize) -> Option<()> {
        for c in 0..self.cols {
            self.data[i * self.cols + c] = self.at(i, c).checked_neg()?;
        }
        Some(())
    }

    fn to_integer_matrix(&self) -> IntegerMatrix {
        IntegerMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(Entry::to_bigint).collect(),
        }
    }
}

struct Eliminated<T> {
    diag: Vec<T>,
    left: Option<MatBuf<T>>,
    right: Option<MatBuf<T>>,
}

/// Classic gcd elimination. Returns `None` if the entry type overflowed.
fn snf_eliminate<T: Entry>(a: &mut MatBuf<T>, want_transforms: bool) -> Option<Eliminated<T>> {
    let rows = a.rows;
    let cols = a.cols;
    let mut u = want_transforms.then(|| MatBuf::<T>::identity(rows));
    let mut v = want_transforms.then(|| MatBuf::<T>::identity(cols));
    let bound = rows.min(cols);
    let mut diag = Vec::with_capacity(bound);

    'outer: for t in 0..bound {
        'pivot: loop {
            // Min-abs nonzero pivot in the trailing submatrix.
            let mut best: Option<(usize, usize)> = None;
            for i in t..rows {
                for j in t..cols {
                    if a.at(i, j).ent_is_zero() {
                        continue;
                    }
                    match best {
                        Some((bi, bj)) if a.at(bi, bj).abs_cmp(a.at(i, j)) != Ordering::Greater => {}
                        _ => best = Some((i, j)),
                    }
                }
            }
            let Some((pi, pj)) = best else {
                break 'outer; // trailing submatrix is zero
            };
            a.swap_rows(t, pi);
            if let Some(u) = u.as_mut() {
                u.swap_rows(t, pi);
            }
            a.swap_cols(t, pj);
            if let Some(v) = v.as_mut() {
                v.swap_cols(t, pj);
            }

            // Clear row t and column t by repeated nearest-quotient steps.
            loop {
                let mut shrunk = false;
                for i in t + 1..rows {
                    if a.at(i, t).ent_is_zero() {
                        continue;
                    }
                    let q = a.at(i, t).round_quotient(a.at(t, t))?;
                    a.row_sub_mul(i, t, &q)?;
                    if let Some(u) = u.as_mut() {
                        u.row_sub_mul(i, t, &q)?;
                    }
                    if !a.at(i, t).ent_is_zero() {
                        // remainder is strictly smaller than the pivot
                        a.swap_rows(t, i);
                        if let Some(u) = u.as_mut() {
                            u.swap_rows(t, i);
                        }
                        shrunk = true;
                    }
                }
                for j in t + 1..cols {
                    if a.at(t, j).ent_is_zero() {
                        continue;
                    }
                    let q = a.at(t, j).round_quotient(a.at(t, t))?;
                    a.col_sub_mul(j, t, &q)?;
                    if let Some(v) = v.as_mut() {
                        v.col_sub_mul(j, t, &q)?;
                    }
                    if !a.at(t, j).ent_is_zero() {
                        a.swap_cols(t, j);
                        if let Some(v) = v.as_mut() {
                            v.swap_cols(t, j);
                        }
                        shrunk = true;
                    }
                }
                if !shrunk {
                    break;
                }
            }

            // Divisibility sweep: the pivot must divide every remaining entry.
            for i in t + 1..rows {
                for j in t + 1..cols {
                    if !a.at(i, j).divisible_by(a.at(t, t)) {
                        let minus_one = T::ent_one().checked_neg()?;
                        a.row_sub_mul(t, i, &minus_one)?; // row_t += row_i
                        if let Some(u) = u.as_mut() {
                            u.row_sub_mul(t, i, &minus_one)?;
                        }
                        continue 'pivot;
                    }
                }
            }
            break;
        }
        if a.at(t, t).ent_is_negative() {
            a.negate_row(t)?;
            if let Some(u) = u.as_mut() {
                u.negate_row(t)?;
            }
        }
        diag.push(a.at(t, t).clone());
    }

    Some(Eliminated { diag, left: u, right: v })
}

/// Smith normal form of `M`.
///
/// The diagonal satisfies `d_i | d_{i+1}`; the product `d_1 ... d_k` equals
/// the gcd of all `k x k` minors. An empty matrix yields an empty factor
/// list. With `want_transforms`, unimodular `U` and `V` with `U M V = D` are
/// returned as well.
pub fn snf(m: &IntegerMatrix, want_transforms: bool) -> SmithForm {
    // Fast path in checked i128; rerun over BigInt on any overflow.
    if let Some(small) = m.to_i128() {
        let mut buf = MatBuf { rows: m.rows, cols: m.cols, data: small };
        if let Some(done) = snf_eliminate(&mut buf, want_transforms) {
            return finish_snf(done);
        }
    }
    let mut buf = MatBuf { rows: m.rows, cols: m.cols, data: m.data.clone() };
    let done = snf_eliminate(&mut buf, want_transforms).expect("BigInt elimination cannot overflow");
    finish_snf(done)
}

fn finish_snf<T: Entry>(done: Eliminated<T>) -> SmithForm {
    let invariant_factors: Vec<BigInt> = done
        .diag
        .iter()
        .take_while(|d| !d.ent_is_zero())
        .map(Entry::to_bigint)
        .collect();
    let rank = invariant_factors.len();
    SmithForm {
        invariant_factors,
        rank,
        left: done.left.as_ref().map(MatBuf::to_integer_matrix),
        right: done.right.as_ref().map(MatBuf::to_integer_matrix),
    }
}

/// Cokernel `Z^rows / M Z^cols` as an abelian group: free rank plus the
/// invariant factors exceeding 1.
pub fn cokernel(m: &IntegerMatrix) -> AbelianGroup {
    let form = snf(m, false);
    let torsion: Vec<BigInt> =
        form.invariant_factors.iter().filter(|d| !d.is_one()).cloned().collect();
    AbelianGroup::new(m.rows() - form.rank, torsion)
}

// ---------------------------------------------------------------------------
// Determinants
// ---------------------------------------------------------------------------

fn bareiss<T: Entry>(buf: &mut MatBuf<T>, exact_div: impl Fn(&T, &T) -> Option<T>) -> Option<T> {
    let n = buf.rows;
    if n == 0 {
        return Some(T::ent_one());
    }
    let mut sign_flip = false;
    let mut prev = T::ent_one();
    for t in 0..n - 1 {
        if buf.at(t, t).ent_is_zero() {
            let swap = (t + 1..n).find(|&i| !buf.at(i, t).ent_is_zero());
            match swap {
                Some(i) => {
                    buf.swap_rows(t, i);
                    sign_flip = !sign_flip;
                }
                None => return Some(T::ent_zero()),
            }
        }
        for i in t + 1..n {
            for j in t + 1..n {
                // (a_tt * a_ij - a_it * a_tj) / prev, always exact
                let lhs = buf.at(t, t).checked_mul_by(buf.at(i, j))?;
                let rhs = buf.at(i, t).checked_mul_by(buf.at(t, j))?;
                let num = lhs.checked_sub_by(&rhs)?;
                buf.data[i * n + j] = exact_div(&num, &prev)?;
            }
            buf.data[i * n + t] = T::ent_zero();
        }
        prev = buf.at(t, t).clone();
    }
    let det = buf.at(n - 1, n - 1).clone();
    if sign_flip {
        det.checked_neg()
    } else {
        Some(det)
    }
}

/// Exact determinant by Bareiss fraction-free elimination.
pub fn determinant(m: &IntegerMatrix) -> Result<BigInt, LinalgError> {
    if m.rows != m.cols {
        return Err(LinalgError::NotSquare { rows: m.rows, cols: m.cols });
    }
    if let Some(small) = m.to_i128() {
        let mut buf = MatBuf { rows: m.rows, cols: m.cols, data: small };
        let div = |a: &i128, b: &i128| a.checked_div(*b);
        if let Some(det) = bareiss(&mut buf, div) {
            return Ok(BigInt::from(det));
        }
    }
    let mut buf = MatBuf { rows: m.rows, cols: m.cols, data: m.data.clone() };
    let div = |a: &BigInt, b: &BigInt| Some(a / b);
    Ok(bareiss(&mut buf, div).expect("BigInt Bareiss cannot overflow"))
}

/// Exact singularity test: the determinant is declared zero only when it
/// vanishes modulo enough word-size primes that their product exceeds twice
/// the Hadamard bound, which forces `det = 0` over `Z`. A single prime with
/// full rank certifies nonsingularity, so the common case costs one mod-p
/// elimination.
pub fn determinant_is_zero(m: &IntegerMatrix) -> Result<bool, LinalgError> {
    if m.rows != m.cols {
        return Err(LinalgError::NotSquare { rows: m.rows, cols: m.cols });
    }
    let n = m.rows;
    if n == 0 {
        return Ok(false); // det of the empty matrix is 1
    }
    // bits(|det|) <= sum_r bits(sum_c a_rc^2) / 2 + n/2 (Hadamard, padded up).
    let mut bound_bits = 0u64;
    for r in 0..n {
        let mut s = BigInt::zero();
        for c in 0..n {
            s += &m[(r, c)] * &m[(r, c)];
        }
        if s.is_zero() {
            return Ok(true); // zero row
        }
        bound_bits += s.bits() / 2 + 1;
    }
    let primes = certification_primes();
    let mut certified_bits = 0u64;
    let mut idx = 0;
    while certified_bits <= bound_bits + 1 {
        let p = primes[idx];
        idx += 1;
        let reduced = PrimeFieldMatrix::reduce(m, p).expect("certification primes are prime");
        if reduced.rank() == n {
            return Ok(false);
        }
        certified_bits += 60;
    }
    Ok(true)
}

fn certification_primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let mut primes = Vec::new();
        let mut cand = (1u64 << 61) - 1;
        while primes.len() < 64 {
            if is_prime_u64(cand) {
                primes.push(cand);
            }
            cand -= 2;
        }
        primes
    })
}

// ---------------------------------------------------------------------------
// Minor gcds
// ---------------------------------------------------------------------------

/// Gcd over all `k x k` minors of `M` (zero if they all vanish). Brute-force
/// oracle, feasible for small dimensions only.
pub fn gcd_minors(m: &IntegerMatrix, k: usize) -> Result<BigInt, LinalgError> {
    if k > m.rows || k > m.cols {
        return Err(LinalgError::MinorOrder { k, rows: m.rows, cols: m.cols });
    }
    if k == 0 {
        return Ok(BigInt::one());
    }
    let mut acc = BigInt::zero();
    let row_sets = combinations(m.rows, k);
    let col_sets = combinations(m.cols, k);
    'outer: for rs in &row_sets {
        for cs in &col_sets {
            let mut sub = IntegerMatrix::zeros(k, k);
            for (i, &r) in rs.iter().enumerate() {
                for (j, &c) in cs.iter().enumerate() {
                    sub[(i, j)] = m[(r, c)].clone();
                }
            }
            let det = determinant(&sub)?;
            acc = acc.gcd(&det);
            if acc.is_one() {
                break 'outer;
            }
        }
    }
    Ok(acc)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Mod-p matrices
// ---------------------------------------------------------------------------

/// Dense matrix over `F_p` for a machine-word prime `p < 2^61`.
#[derive(Clone, Debug)]
pub struct PrimeFieldMatrix {
    p: u64,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl PrimeFieldMatrix {
    pub fn new(p: u64, rows: usize, cols: usize, data: Vec<u64>) -> Result<Self, LinalgError> {
        check_prime(p)?;
        assert_eq!(data.len(), rows * cols);
        let data = data.into_iter().map(|x| x % p).collect();
        Ok(Self { p, rows, cols, data })
    }

    /// Reduce an integer matrix mod `p`.
    pub fn reduce(m: &IntegerMatrix, p: u64) -> Result<Self, LinalgError> {
        check_prime(p)?;
        let pp = BigInt::from(p);
        let data = m
            .data
            .iter()
            .map(|v| {
                let r = v.mod_floor(&pp);
                r.to_u64().expect("residue fits u64")
            })
            .collect();
        Ok(Self { p, rows: m.rows, cols: m.cols, data })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Rank by Gaussian elimination over `F_p`.
    pub fn rank(&self) -> usize {
        if self.p < (1 << 31) {
            rank_impl(self.p, self.rows, self.cols, &mut self.data.clone(), |a, b, p| {
                a * b % p
            })
        } else {
            rank_impl(self.p, self.rows, self.cols, &mut self.data.clone(), |a, b, p| {
                ((a as u128 * b as u128) % p as u128) as u64
            })
        }
    }
}

fn rank_impl(
    p: u64,
    rows: usize,
    cols: usize,
    data: &mut [u64],
    mulmod: impl Fn(u64, u64, u64) -> u64,
) -> usize {
    let at = |data: &[u64], r: usize, c: usize| data[r * cols + c];
    let mut rank = 0;
    let mut col = 0;
    while rank < rows && col < cols {
        let pivot_row = (rank..rows).find(|&r| at(data, r, col) != 0);
        let Some(pr) = pivot_row else {
            col += 1;
            continue;
        };
        for c in 0..cols {
            data.swap(rank * cols + c, pr * cols + c);
        }
        let inv = mod_inverse(at(data, rank, col), p);
        for r in rank + 1..rows {
            let factor = at(data, r, col);
            if factor == 0 {
                continue;
            }
            let scale = mulmod(factor, inv, p);
            for c in col..cols {
                let sub = mulmod(scale, at(data, rank, c), p);
                let cur = at(data, r, c);
                data[r * cols + c] = (cur + p - sub) % p;
            }
        }
        rank += 1;
        col += 1;
    }
    rank
}

fn mod_inverse(a: u64, p: u64) -> u64 {
    // extended Euclid; p prime, a != 0 mod p
    let (mut old_r, mut r) = (a as i128, p as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    old_s.rem_euclid(p as i128) as u64
}

/// Rank of `M` mod `p`.
pub fn rank_mod_p(m: &IntegerMatrix, p: u64) -> Result<usize, LinalgError> {
    Ok(PrimeFieldMatrix::reduce(m, p)?.rank())
}

fn check_prime(p: u64) -> Result<(), LinalgError> {
    if p >= (1 << 61) || !is_prime_u64(p) {
        return Err(LinalgError::BadPrime(p));
    }
    Ok(())
}

/// Deterministic Miller-Rabin for u64.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &q in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        b %= n;
        while e > 0 {
            if e & 1 == 1 {
                acc = mul(acc, b);
            }
            b = mul(b, b);
            e >>= 1;
        }
        acc
    };
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
