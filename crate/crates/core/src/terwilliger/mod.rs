//! Exact block diagonalization of the commutant of the symmetric group
//! `S_n` acting on binary words of length `n` by coordinate permutation —
//! the Terwilliger algebra of the binary Hamming scheme.
//!
//! Everything here is exact: block dimensions and orbit sizes are
//! integers, matrix-unit entries are rationals times symbolic square
//! roots ([`QuadExact`]), and the algebraic identities (matrix-unit
//! multiplication, orthogonality, reconstruction) are verified with zero
//! residual. The module doubles as a cross-validation oracle for the
//! numeric decomposer.

mod exact;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use exact::{pochhammer, ratio, rational, rational_to_f64, QuadExact, QuadSum, Rational};

use crate::error::{Error, Result};
use exact::binomial;

/// Largest `n` for which coefficient tables are built.
pub const TABLE_CAP: u64 = 12;
/// Largest `n` for which full `2^n × 2^n` matrices are assembled.
pub const MATRIX_CAP: u64 = 8;
/// Largest `n` for which the exact multiplication check runs at build time.
const BUILD_CHECK_CAP: u64 = 6;

/// Hahn polynomial `Q_k(x; -a-1, -b-1, m)`, exact:
///
/// `Q_k(x) = (1/C(m,k)) Σ_t (-1)^t [C(b-k+t, t)/C(a, t)] C(m-x, k-t) C(x, t)`
///
/// for integers with `a ≥ m`, `b ≥ m ≥ 0`, `0 ≤ k ≤ m`, `0 ≤ x ≤ m`.
/// These are the orthogonal polynomials for the weight `C(a,x) C(b,m-x)`
/// on `x = 0, …, m`, normalized by `Q_k(0) = 1`.
pub fn hahn_q(k: u64, a: u64, b: u64, m: u64, x: u64) -> Result<Rational> {
    if a < m || b < m || k > m || x > m {
        return Err(Error::Domain(format!(
            "hahn_q requires a >= m, b >= m, k <= m, x <= m; got k={k} a={a} b={b} m={m} x={x}"
        )));
    }
    Ok(hahn_q_value(k, a, b, m, x))
}

/// The Hahn sum itself, defined whenever the denominators are nonzero
/// (`a ≥ k`, `b ≥ k`, `m ≥ k`). The matrix-unit formula evaluates it
/// outside the orthogonality regime `a ≥ m`.
fn hahn_q_value(k: u64, a: u64, b: u64, m: u64, x: u64) -> Rational {
    debug_assert!(a >= k && b >= k && m >= k);
    let mut sum = Rational::zero();
    for t in 0..=k {
        let numerator = binomial(b - k + t, t) * binomial(m - x, k - t) * binomial(x, t);
        if numerator.is_zero() {
            continue;
        }
        let term = Rational::new(numerator, binomial(a, t));
        if t % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum / Rational::from_integer(binomial(m, k))
}

/// Verifies the exact weight-orthogonality
/// `Σ_x C(a,x) C(b,m-x) Q_k(x) Q_l(x) = 0` for all `0 ≤ k < l ≤ m`.
/// Returns `None` when every pair is orthogonal, otherwise the first
/// failing pair `(k, l)` as a witness.
pub fn hahn_orthogonality_check(a: u64, b: u64, m: u64) -> Result<Option<(u64, u64)>> {
    if a < m || b < m {
        return Err(Error::Domain(format!(
            "orthogonality check requires a >= m and b >= m; got a={a} b={b} m={m}"
        )));
    }
    for k in 0..=m {
        for l in (k + 1)..=m {
            let mut sum = Rational::zero();
            for x in 0..=m {
                let weight = Rational::from_integer(binomial(a, x) * binomial(b, m - x));
                sum += weight * hahn_q_value(k, a, b, m, x) * hahn_q_value(l, a, b, m, x);
            }
            if !sum.is_zero() {
                return Ok(Some((k, l)));
            }
        }
    }
    Ok(None)
}

/// Dimensions of one isotypic block: the irreducible type `k`, its
/// dimension `h = C(n,k) - C(n,k-1)` and its multiplicity `m = n - 2k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockDims {
    pub k: u64,
    pub h: u64,
    pub m: u64,
}

/// Block dimensions for word length `n`, for `k = 0, …, ⌊n/2⌋`.
pub fn dims(n: u64) -> Vec<BlockDims> {
    (0..=n / 2)
        .map(|k| {
            let h = if k == 0 {
                BigInt::one()
            } else {
                binomial(n, k) - binomial(n, k - 1)
            };
            BlockDims {
                k,
                h: h.to_u64().expect("block dimension fits u64"),
                m: n - 2 * k + 1,
            }
        })
        .collect()
}

/// One pair orbit of the `S_n` action on `{0,1}^n × {0,1}^n`, labeled by
/// the weights of both words and the count `d = |{l : x_l = 1, y_l = 0}|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrbitTriple {
    pub r: u64,
    pub s: u64,
    pub d: u64,
    /// Number of pairs in the orbit:
    /// `C(n,d) C(n-d, r-d) C(n-r, s-r+d)`.
    pub size: u64,
}

impl OrbitTriple {
    /// Label of the transposed orbit.
    pub fn transposed(&self) -> (u64, u64, u64) {
        (self.s, self.r, self.s + self.d - self.r)
    }
}

/// All pair orbits for word length `n`, ordered by `(r, s, d)`. There are
/// `C(n+3, 3)` of them.
pub fn orbit_triples(n: u64) -> Vec<OrbitTriple> {
    let mut triples = Vec::new();
    for r in 0..=n {
        for s in 0..=n {
            let d_min = r.saturating_sub(s);
            let d_max = r.min(n - s);
            for d in d_min..=d_max {
                let size = binomial(n, d) * binomial(n - d, r - d) * binomial(n - r, s + d - r);
                triples.push(OrbitTriple {
                    r,
                    s,
                    d,
                    size: size.to_u64().expect("orbit size fits u64"),
                });
            }
        }
    }
    triples
}

/// Valid values of `d` for a pair of weights `(i, j)`.
fn valid_d_range(n: u64, i: u64, j: u64) -> std::ops::RangeInclusive<u64> {
    i.saturating_sub(j)..=i.min(n - j)
}

/// Matrix-unit entry of the commutant in closed form. For
/// `k ≤ i ≤ j ≤ n-k`, `x` of weight `i`, `y` of weight `j`, and
/// `d = |{l : x_l = 1, y_l = 0}|`:
///
/// `E_{k,i,j}(x,y) = h_k (C(n,i) C(n,j))^{-1/2} ρ^{-1/2}
///                   Q_k(d; -(n-j)-1, -j-1, i)`
///
/// with `ρ = (-j)_k (i-n)_k / ((-i)_k (j-n)_k)`. Entries vanish off
/// `X_i × X_j`; the orientation `i > j` follows from transposition, which
/// relabels `d ↦ d + j - i`.
///
/// The Hahn parameterization `(n-j, j, i)` is forced: it is the unique
/// choice under which the units multiply as matrix units, which the exact
/// build-time check confirms with zero residual.
pub fn e_analytic(n: u64, k: u64, i: u64, j: u64, d: u64) -> Result<QuadExact> {
    if k > n / 2 || i < k || j < k || i > n - k || j > n - k {
        return Err(Error::Domain(format!(
            "matrix unit indices out of range: n={n} k={k} i={i} j={j}"
        )));
    }
    if i > j {
        return e_analytic(n, k, j, i, d + j - i);
    }
    if !valid_d_range(n, i, j).contains(&d) {
        return Err(Error::Domain(format!(
            "no pair with weights ({i}, {j}) and difference count {d} exists for n={n}"
        )));
    }
    let h = Rational::from_integer(if k == 0 {
        BigInt::one()
    } else {
        binomial(n, k) - binomial(n, k - 1)
    });
    let signed = |v: u64| rational(0) - Rational::from_integer(BigInt::from(v));
    let num = pochhammer(&signed(j), k) * pochhammer(&(rational(i as i64) - rational(n as i64)), k);
    let den = pochhammer(&signed(i), k) * pochhammer(&(rational(j as i64) - rational(n as i64)), k);
    let rho = num / den;
    if !rho.is_positive() {
        return Err(Error::ExactInconsistency(format!(
            "Pochhammer ratio not positive for n={n} k={k} i={i} j={j}: {rho}"
        )));
    }
    // h_k * sqrt( 1 / (C(n,i) C(n,j) rho) ) * Q_k(d)
    let radicand = Rational::new(BigInt::one(), binomial(n, i) * binomial(n, j)) * rho.recip();
    let root = QuadExact::sqrt_of_rational(&radicand)?;
    let q = hahn_q_value(k, n - j, j, i, d);
    Ok(root.mul_rational(&(h * q)))
}

/// Expansion coefficient `p_{r,s,d}(k,i,j) = v_{r,s,d} E_{k,i,j}(x,y) / h_k`
/// of the orbit indicator `B_{r,s,d}` in the matrix-unit basis. Zero
/// whenever `(r,s) ≠ (i,j)`, since the unit vanishes off `X_i × X_j`.
pub fn p_analytic(n: u64, r: u64, s: u64, d: u64, k: u64, i: u64, j: u64) -> Result<QuadExact> {
    if r > n || s > n || !valid_d_range(n, r, s).contains(&d) {
        return Err(Error::Domain(format!(
            "invalid orbit triple ({r}, {s}, {d}) for n={n}"
        )));
    }
    if (r, s) != (i, j) {
        if k > n / 2 || i < k || j < k || i > n - k || j > n - k {
            return Err(Error::Domain(format!(
                "matrix unit indices out of range: n={n} k={k} i={i} j={j}"
            )));
        }
        return Ok(QuadExact::zero());
    }
    let size = binomial(n, d) * binomial(n - d, r - d) * binomial(n - r, s + d - r);
    let h = if k == 0 {
        BigInt::one()
    } else {
        binomial(n, k) - binomial(n, k - 1)
    };
    let entry = e_analytic(n, k, i, j, d)?;
    Ok(entry.mul_rational(&Rational::new(size, h)))
}

/// Bit weight of a word.
fn weight(mask: usize) -> u64 {
    mask.count_ones() as u64
}

/// `v(x, y) = |{l : x_l = 1, y_l = 0}|` on bitmask words.
fn v_count(x: usize, y: usize) -> u64 {
    (x & !y).count_ones() as u64
}

/// Canonical pair of words with weights `(r, s)` and difference count `d`:
/// `x` takes the lowest `r` positions, `y` overlaps it on `r - d` of them.
fn triple_representative(n: u64, r: u64, s: u64, d: u64) -> (usize, usize) {
    debug_assert!(s + d <= n);
    let x = (1usize << r) - 1;
    let shared = ((1usize << (r - d)) - 1) << d;
    let fresh = ((1usize << (s + d - r)) - 1) << r;
    (x, shared | fresh)
}

/// Complete exact tables for one word length: block dimensions, orbit
/// triples with sizes, every matrix-unit entry, and the expansion
/// coefficients of the orbit basis.
#[derive(Debug, Clone)]
pub struct TerwilligerTables {
    n: u64,
    dims: Vec<BlockDims>,
    triples: Vec<OrbitTriple>,
    entries: BTreeMap<(u64, u64, u64, u64), QuadExact>,
    sign_flips: Vec<(u64, u64, u64)>,
}

impl TerwilligerTables {
    /// Builds the tables. For `n ≤ 6` the exact multiplication identity is
    /// checked entry by entry at build time; if any unit comes out with the
    /// wrong sign it is flipped deterministically (ascending `k`, then
    /// `j - i`, then `i`) and recorded.
    pub fn build(n: u64) -> Result<TerwilligerTables> {
        if n == 0 || n > TABLE_CAP {
            return Err(Error::ResourceLimit(format!(
                "table construction capped at n = {TABLE_CAP}, got {n}"
            )));
        }
        let dims = dims(n);
        let triples = orbit_triples(n);
        let mut entries = BTreeMap::new();
        for block in &dims {
            let k = block.k;
            for i in k..=(n - k) {
                for j in k..=(n - k) {
                    for d in valid_d_range(n, i, j) {
                        entries.insert((k, i, j, d), e_analytic(n, k, i, j, d)?);
                    }
                }
            }
        }
        let mut tables = TerwilligerTables {
            n,
            dims,
            triples,
            entries,
            sign_flips: Vec::new(),
        };
        if n <= BUILD_CHECK_CAP {
            tables.fix_signs()?;
            tables.verify_multiplication_exact()?;
        }
        Ok(tables)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn dims(&self) -> &[BlockDims] {
        &self.dims
    }

    pub fn triples(&self) -> &[OrbitTriple] {
        &self.triples
    }

    /// Sign flips applied at build time to restore the multiplication
    /// formula; empty when the closed form is already consistent.
    pub fn sign_flips(&self) -> &[(u64, u64, u64)] {
        &self.sign_flips
    }

    fn h(&self, k: u64) -> u64 {
        self.dims[k as usize].h
    }

    /// Matrix-unit entry `E_{k,i,j}` on pairs with difference count `d`.
    pub fn entry(&self, k: u64, i: u64, j: u64, d: u64) -> Result<&QuadExact> {
        self.entries.get(&(k, i, j, d)).ok_or_else(|| {
            Error::Domain(format!(
                "no table entry for k={k} i={i} j={j} d={d} at n={}",
                self.n
            ))
        })
    }

    /// Expansion coefficient `p_{r,s,d}(k,i,j)` from the sign-fixed tables.
    pub fn p(&self, r: u64, s: u64, d: u64, k: u64, i: u64, j: u64) -> Result<QuadExact> {
        if (r, s) != (i, j) {
            return Ok(QuadExact::zero());
        }
        let size = self
            .triples
            .iter()
            .find(|t| (t.r, t.s, t.d) == (r, s, d))
            .ok_or_else(|| Error::Domain(format!("invalid orbit triple ({r}, {s}, {d})")))?
            .size;
        let entry = self.entry(k, i, j, d)?;
        Ok(entry.mul_rational(&Rational::new(BigInt::from(size), BigInt::from(self.h(k)))))
    }

    /// Full `2^n × 2^n` matrix of one unit, assembled on demand.
    pub fn unit_matrix(&self, k: u64, i: u64, j: u64) -> Result<Vec<Vec<QuadExact>>> {
        if self.n > MATRIX_CAP {
            return Err(Error::ResourceLimit(format!(
                "full matrices capped at n = {MATRIX_CAP}, tables built for n = {}",
                self.n
            )));
        }
        let size = 1usize << self.n;
        let mut out = vec![vec![QuadExact::zero(); size]; size];
        for (x, row) in out.iter_mut().enumerate() {
            if weight(x) != i {
                continue;
            }
            for (y, value) in row.iter_mut().enumerate() {
                if weight(y) == j {
                    *value = self.entry(k, i, j, v_count(x, y))?.clone();
                }
            }
        }
        Ok(out)
    }

    fn masks_of_weight(&self, w: u64) -> Vec<usize> {
        (0..(1usize << self.n))
            .filter(|&m| weight(m) == w)
            .collect()
    }

    /// Product entry `(E_{k,i,j} E_{k',i',j'})(x, y)` by direct summation
    /// over the middle index set, exact. Nonzero terms need `wt(z) = j = i'`.
    fn product_entry(
        &self,
        left: (u64, u64, u64),
        right: (u64, u64, u64),
        x: usize,
        y: usize,
    ) -> Result<QuadSum> {
        let (lk, li, lj) = left;
        let (rk, ri, rj) = right;
        let mut sum = QuadSum::new();
        if weight(x) != li || weight(y) != rj || lj != ri {
            return Ok(sum);
        }
        for z in self.masks_of_weight(lj) {
            let a = self.entry(lk, li, lj, v_count(x, z))?;
            let b = self.entry(rk, ri, rj, v_count(z, y))?;
            sum.accumulate(&a.mul(b));
        }
        Ok(sum)
    }

    /// Unit index tuples `(k, i, j)` in deterministic order.
    fn unit_indices(&self) -> Vec<(u64, u64, u64)> {
        let mut out = Vec::new();
        for block in &self.dims {
            let k = block.k;
            for i in k..=(self.n - k) {
                for j in k..=(self.n - k) {
                    out.push((k, i, j));
                }
            }
        }
        out
    }

    /// Restores the multiplication formula by flipping signs of whole
    /// units where needed. Any two valid assignments differ by a diagonal
    /// gauge, so comparing `E_{k,i,k} E_{k,k,j}` against `±E_{k,i,j}` and
    /// flipping the mismatches is sufficient.
    fn fix_signs(&mut self) -> Result<()> {
        let n = self.n;
        let mut flips = Vec::new();
        for block_index in 0..self.dims.len() {
            let k = self.dims[block_index].k;
            // Diagonal units must have positive trace h_k.
            for i in k..=(n - k) {
                let diag = self.entry(k, i, i, 0)?;
                if diag.coefficient().is_negative() {
                    return Err(Error::ExactInconsistency(format!(
                        "diagonal unit (k={k}, i={i}) has negative trace"
                    )));
                }
            }
            let mut pairs: Vec<(u64, u64)> = Vec::new();
            for i in k..=(n - k) {
                for j in (i + 1)..=(n - k) {
                    pairs.push((i, j));
                }
            }
            pairs.sort_by_key(|&(i, j)| (j - i, i));
            for (i, j) in pairs {
                if i == k {
                    continue; // gauge: units in the base row stay as built
                }
                match self.sign_against_base(k, i, j)? {
                    1 => {}
                    -1 => {
                        flips.push((k, i, j));
                        self.flip_unit(k, i, j);
                    }
                    _ => unreachable!(),
                }
            }
        }
        self.sign_flips = flips;
        Ok(())
    }

    /// Compares `E_{k,i,k} E_{k,k,j}` with `±E_{k,i,j}`; returns the sign.
    fn sign_against_base(&self, k: u64, i: u64, j: u64) -> Result<i32> {
        let mut sign: Option<i32> = None;
        for d in valid_d_range(self.n, i, j) {
            let (x, y) = triple_representative(self.n, i, j, d);
            let product = self.product_entry((k, i, k), (k, k, j), x, y)?;
            let expected = self.entry(k, i, j, d)?;
            let mut plus = product.clone();
            plus.accumulate(&expected.negate());
            let mut minus = product;
            minus.accumulate(expected);
            let this = match (plus.is_zero(), minus.is_zero()) {
                (true, true) => continue, // entry is exactly zero here
                (true, false) => 1,
                (false, true) => -1,
                (false, false) => {
                    return Err(Error::ExactInconsistency(format!(
                        "unit product (k={k}, i={i}, j={j}, d={d}) is not ± the expected unit"
                    )))
                }
            };
            match sign {
                None => sign = Some(this),
                Some(s) if s != this => {
                    return Err(Error::ExactInconsistency(format!(
                        "inconsistent sign pattern within unit (k={k}, i={i}, j={j})"
                    )))
                }
                _ => {}
            }
        }
        Ok(sign.unwrap_or(1))
    }

    fn flip_unit(&mut self, k: u64, i: u64, j: u64) {
        let keys: Vec<_> = self
            .entries
            .keys()
            .filter(|&&(kk, ii, jj, _)| (kk, ii, jj) == (k, i, j) || (kk, ii, jj) == (k, j, i))
            .cloned()
            .collect();
        for key in keys {
            let flipped = self.entries[&key].negate();
            self.entries.insert(key, flipped);
        }
    }

    /// Verifies `E_{k,i,j} E_{k',i',j'} = δ_{kk'} δ_{ji'} E_{k,i,j'}` with
    /// zero residual, by evaluating both sides at one representative per
    /// pair orbit.
    pub fn verify_multiplication_exact(&self) -> Result<()> {
        if self.n > MATRIX_CAP {
            return Err(Error::ResourceLimit(format!(
                "exact multiplication check capped at n = {MATRIX_CAP}"
            )));
        }
        let n = self.n;
        let units = self.unit_indices();
        for &(lk, li, lj) in &units {
            for &(rk, ri, rj) in &units {
                if lj != ri {
                    continue; // supports do not meet; both sides vanish
                }
                let expect_unit = lk == rk;
                for d in valid_d_range(n, li, rj) {
                    let (x, y) = triple_representative(n, li, rj, d);
                    let mut residual = self.product_entry((lk, li, lj), (rk, ri, rj), x, y)?;
                    if expect_unit {
                        residual.accumulate(&self.entry(lk, li, rj, d)?.negate());
                    }
                    if !residual.is_zero() {
                        return Err(Error::ExactInconsistency(format!(
                            "multiplication identity fails at ({lk},{li},{lj})x({rk},{ri},{rj}) d={d}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Verifies the orthogonality relation
    /// `Σ_{(r,s,d)} v_{r,s,d} q q' = δ_{kk'} δ_{ii'} δ_{jj'} 4^n h_k` with
    /// `q = 2^n E`, exactly.
    pub fn verify_orthogonality_exact(&self) -> Result<()> {
        let n = self.n;
        let four_n = Rational::from_integer(BigInt::from(2u8).pow(2 * n as u32));
        let two_n = Rational::from_integer(BigInt::from(2u8).pow(n as u32));
        let units = self.unit_indices();
        for &(lk, li, lj) in &units {
            for &(rk, ri, rj) in &units {
                if (li, lj) != (ri, rj) {
                    continue; // q supports are disjoint; the sum is trivially zero
                }
                let mut sum = QuadSum::new();
                for triple in &self.triples {
                    if (triple.r, triple.s) != (li, lj) {
                        continue;
                    }
                    let q = self.entry(lk, li, lj, triple.d)?.mul_rational(&two_n);
                    let qp = self.entry(rk, ri, rj, triple.d)?.mul_rational(&two_n);
                    sum.accumulate(
                        &q.mul(&qp)
                            .mul_rational(&Rational::from_integer(BigInt::from(triple.size))),
                    );
                }
                if lk == rk {
                    let expected = &four_n * Rational::from_integer(BigInt::from(self.h(lk)));
                    sum.accumulate(&QuadExact::from_rational(expected).negate());
                }
                if !sum.is_zero() {
                    return Err(Error::ExactInconsistency(format!(
                        "orthogonality relation fails at ({lk},{li},{lj}) x ({rk},{ri},{rj})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Verifies the expansion `Σ_k Σ_{i,j} p_{r,s,d}(k,i,j) E_{k,i,j}`
    /// reproduces the 0/1 orbit indicator, entry class by entry class.
    pub fn verify_reconstruction_exact(&self) -> Result<()> {
        let n = self.n;
        for triple in &self.triples {
            let (r, s, d) = (triple.r, triple.s, triple.d);
            for d_other in valid_d_range(n, r, s) {
                let mut sum = QuadSum::new();
                for block in &self.dims {
                    let k = block.k;
                    if r < k || s < k || r > n - k || s > n - k {
                        continue;
                    }
                    let p = self.p(r, s, d, k, r, s)?;
                    sum.accumulate(&p.mul(self.entry(k, r, s, d_other)?));
                }
                let expected = if d == d_other {
                    Rational::one()
                } else {
                    Rational::zero()
                };
                sum.accumulate(&QuadExact::from_rational(expected).negate());
                if !sum.is_zero() {
                    return Err(Error::ExactInconsistency(format!(
                        "reconstruction fails for orbit ({r},{s},{d}) at entry class d'={d_other}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Verifies `C(n,j) · E_{k,j,j}(d = 0) = h_k` — the trace of each
    /// diagonal idempotent equals its rank.
    pub fn verify_traces_exact(&self) -> Result<()> {
        let n = self.n;
        for block in &self.dims {
            let k = block.k;
            for j in k..=(n - k) {
                let diag = self.entry(k, j, j, 0)?;
                let trace = diag.mul_rational(&Rational::from_integer(binomial(n, j)));
                if trace.as_rational() != Some(&Rational::from_integer(BigInt::from(block.h))) {
                    return Err(Error::ExactInconsistency(format!(
                        "trace of diagonal unit (k={k}, j={j}) is {trace}, expected {}",
                        block.h
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of cross-validating the numeric decomposer against the exact
/// tables on the same action.
#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub n: u64,
    /// Sorted `(h, m)` pairs, identical for both pipelines.
    pub block_dims: Vec<(u64, u64)>,
    /// Worst gap between structure constants of the orbit algebra
    /// computed through the two block diagonalizations.
    pub structure_constant_gap: f64,
    /// Worst gap between matched block spectra over the random trials.
    pub spectrum_gap: f64,
}

const CROSS_VALIDATE_TOL: f64 = 1e-7;
const CROSS_VALIDATE_TRIALS: usize = 20;

/// Runs the numeric decomposer on the coordinate-permutation action on
/// binary words and compares it against the exact tables: identical
/// `(h, m)` multisets, identical structure constants of the orbit algebra
/// through both block maps, and matching block spectra on random
/// invariant matrices. Any divergence beyond `1e-7` is an error.
pub fn cross_validate(n: u64, seed: u64) -> Result<CrossValidation> {
    if n == 0 || n > 6 {
        return Err(Error::ResourceLimit(format!(
            "cross validation runs for 1 <= n <= 6, got {n}"
        )));
    }
    let tables = TerwilligerTables::build(n)?;
    let action = crate::permgroup::GroupAction::hamming(n as usize)?;
    let orbits = crate::permgroup::PairOrbits::compute(&action)?;
    let config = crate::decomposer::DecomposeConfig {
        seed,
        ..Default::default()
    };
    let decomposition = crate::decomposer::decompose(&action, &orbits, &config)?;
    let image = crate::decomposer::coefficients(&decomposition, &orbits)?;

    // (a) identical block dimension multisets.
    let mut numeric_dims: Vec<(u64, u64)> = decomposition
        .block_dims()
        .iter()
        .map(|&(h, m)| (h as u64, m as u64))
        .collect();
    numeric_dims.sort_unstable();
    let mut exact_dims: Vec<(u64, u64)> = tables.dims().iter().map(|b| (b.h, b.m)).collect();
    exact_dims.sort_unstable();
    if numeric_dims != exact_dims {
        return Err(Error::Verification {
            check: format!(
                "block dimensions diverge: numeric {numeric_dims:?}, exact {exact_dims:?}"
            ),
            residual: f64::INFINITY,
            tolerance: 0.0,
        });
    }

    // Orbit correspondence: numeric orbit index -> triple index, with a
    // size cross-check against the product formula.
    let triples = tables.triples();
    let triple_index: BTreeMap<(u64, u64, u64), usize> = triples
        .iter()
        .enumerate()
        .map(|(i, t)| ((t.r, t.s, t.d), i))
        .collect();
    let mut orbit_to_triple = vec![usize::MAX; orbits.count()];
    for r in 0..orbits.count() {
        let (x, y) = orbits.representative(r);
        let key = (weight(x), weight(y), v_count(x, y));
        let index = *triple_index.get(&key).ok_or_else(|| Error::Verification {
            check: format!("numeric orbit {r} has no matching triple {key:?}"),
            residual: f64::INFINITY,
            tolerance: 0.0,
        })?;
        if triples[index].size != orbits.size(r) as u64 {
            return Err(Error::Verification {
                check: format!(
                    "orbit size diverges for triple {key:?}: numeric {}, formula {}",
                    orbits.size(r),
                    triples[index].size
                ),
                residual: f64::INFINITY,
                tolerance: 0.0,
            });
        }
        orbit_to_triple[r] = index;
    }

    // Exact block images as floating tables, one single-entry matrix per
    // (triple, k). Block index within type k runs over weights k..n-k.
    let exact_blocks: Vec<Vec<Option<(usize, usize, f64)>>> = triples
        .iter()
        .map(|t| {
            tables
                .dims()
                .iter()
                .map(|b| {
                    let k = b.k;
                    if t.r < k || t.s < k || t.r > n - k || t.s > n - k {
                        return Ok(None);
                    }
                    let value = tables.p(t.r, t.s, t.d, k, t.r, t.s)?.to_f64();
                    Ok(Some(((t.r - k) as usize, (t.s - k) as usize, value)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let exact_ms: Vec<usize> = tables.dims().iter().map(|b| b.m as usize).collect();

    // (b) structure constants through both block maps.
    let numeric_constants =
        crate::decomposer::block_structure_constants(&decomposition, &image, &orbits);
    let mut constant_gap = 0.0f64;
    for r in 0..orbits.count() {
        for s in 0..orbits.count() {
            // Product of two single-entry-per-block images, expanded back
            // in the orbit basis through the exact unit values.
            let mut product: Vec<Option<(usize, usize, f64)>> = vec![None; exact_ms.len()];
            for (k, slot) in product.iter_mut().enumerate() {
                if let (Some(&Some((i1, j1, v1))), Some(&Some((i2, j2, v2)))) = (
                    exact_blocks[orbit_to_triple[r]].get(k),
                    exact_blocks[orbit_to_triple[s]].get(k),
                ) {
                    if j1 == i2 {
                        *slot = Some((i1, j2, v1 * v2));
                    }
                }
            }
            for t in 0..orbits.count() {
                let triple = &triples[orbit_to_triple[t]];
                let mut exact_value = 0.0f64;
                for (k, entry) in product.iter().enumerate() {
                    let kk = tables.dims()[k].k;
                    if let Some((i, j, v)) = entry {
                        if (*i as u64 + kk, *j as u64 + kk) == (triple.r, triple.s) {
                            exact_value +=
                                v * tables.entry(kk, triple.r, triple.s, triple.d)?.to_f64();
                        }
                    }
                }
                let numeric_value = numeric_constants[r][s][t];
                constant_gap = constant_gap.max((numeric_value.re - exact_value).abs());
                constant_gap = constant_gap.max(numeric_value.im.abs());
            }
        }
    }
    if constant_gap > CROSS_VALIDATE_TOL {
        return Err(Error::Verification {
            check: "structure constants diverge between pipelines".into(),
            residual: constant_gap,
            tolerance: CROSS_VALIDATE_TOL,
        });
    }

    // (c) matched block spectra on random invariant matrices. Blocks are
    // matched by multiplicity, which is strictly decreasing in k.
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x7e57);
    let numeric_dims_raw = decomposition.block_dims();
    let mut spectrum_gap = 0.0f64;
    for _ in 0..CROSS_VALIDATE_TRIALS {
        let mut y = vec![0.0f64; orbits.count()];
        for r in 0..orbits.count() {
            let rt = orbits.transpose_of(r);
            if r <= rt {
                let value = rng.gen_range(-1.0..1.0);
                y[r] = value;
                y[rt] = value;
            }
        }
        let y_complex: Vec<crate::Complex> =
            y.iter().map(|&v| crate::Complex::new(v, 0.0)).collect();
        let numeric_pencils = image.assemble(&y_complex)?;

        for (k, block_dim) in tables.dims().iter().enumerate() {
            let m = exact_ms[k];
            let mut exact_pencil = nalgebra::DMatrix::<f64>::zeros(m, m);
            for r in 0..orbits.count() {
                if let Some((i, j, v)) = exact_blocks[orbit_to_triple[r]][k] {
                    exact_pencil[(i, j)] += y[r] * v;
                }
            }
            let exact_complex = exact_pencil.map(|v| crate::Complex::new(v, 0.0));
            let mut exact_eigs = crate::decomposer::hermitian_eigenvalues(&exact_complex)?;
            exact_eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());

            let numeric_k = numeric_dims_raw
                .iter()
                .position(|&(_, mm)| mm == m)
                .expect("multiplicities are distinct for this action");
            let mut numeric_eigs =
                crate::decomposer::hermitian_eigenvalues(&numeric_pencils[numeric_k])?;
            numeric_eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in exact_eigs.iter().zip(&numeric_eigs) {
                spectrum_gap = spectrum_gap.max((a - b).abs());
            }
            let _ = block_dim;
        }
    }
    if spectrum_gap > CROSS_VALIDATE_TOL {
        return Err(Error::Verification {
            check: "block spectra diverge between pipelines".into(),
            residual: spectrum_gap,
            tolerance: CROSS_VALIDATE_TOL,
        });
    }

    Ok(CrossValidation {
        n,
        block_dims: exact_dims,
        structure_constant_gap: constant_gap,
        spectrum_gap,
    })
}

/// Brute-force orbit sizes by enumerating all `4^n` pairs of words; the
/// independent check for the product formula in [`orbit_triples`].
pub fn orbit_sizes_by_enumeration(n: u64) -> BTreeMap<(u64, u64, u64), u64> {
    let size = 1usize << n;
    let mut counts = BTreeMap::new();
    for x in 0..size {
        for y in 0..size {
            let key = (weight(x), weight(y), v_count(x, y));
            *counts.entry(key).or_insert(0u64) += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use exact::ratio;

    #[test]
    fn hahn_normalization_at_zero() {
        for m in 0..=6u64 {
            for a in m..=10 {
                for b in m..=10 {
                    for k in 0..=m {
                        assert_eq!(hahn_q(k, a, b, m, 0).unwrap(), Rational::one());
                    }
                }
            }
        }
    }

    #[test]
    fn hahn_degree_zero_is_constant() {
        for x in 0..=4u64 {
            assert_eq!(hahn_q(0, 7, 5, 4, x).unwrap(), Rational::one());
        }
    }

    #[test]
    fn hahn_small_values() {
        // Q_1(x; -3, -3, 2) at a = b = m = 2 is 1 - x.
        assert_eq!(hahn_q(1, 2, 2, 2, 1).unwrap(), Rational::zero());
        assert_eq!(hahn_q(1, 2, 2, 2, 2).unwrap(), rational(-1));
    }

    #[test]
    fn hahn_precondition_is_enforced() {
        assert!(hahn_q(1, 1, 2, 2, 0).is_err());
        assert!(hahn_q(3, 2, 2, 2, 0).is_err());
        assert!(hahn_q(1, 2, 2, 2, 3).is_err());
    }

    #[test]
    fn hahn_orthogonality_small_parameters() {
        assert_eq!(hahn_orthogonality_check(2, 2, 0).unwrap(), None);
        assert_eq!(hahn_orthogonality_check(2, 2, 2).unwrap(), None);
        assert_eq!(hahn_orthogonality_check(4, 4, 3).unwrap(), None);
    }

    #[test]
    fn dims_small_cases() {
        let d2 = dims(2);
        assert_eq!(
            d2,
            vec![
                BlockDims { k: 0, h: 1, m: 3 },
                BlockDims { k: 1, h: 1, m: 1 }
            ]
        );
        let d4 = dims(4);
        let hs: Vec<u64> = d4.iter().map(|b| b.h).collect();
        let ms: Vec<u64> = d4.iter().map(|b| b.m).collect();
        assert_eq!(hs, vec![1, 3, 2]);
        assert_eq!(ms, vec![5, 3, 1]);
    }

    #[test]
    fn dimension_identity_up_to_ten() {
        for n in 1..=10u64 {
            let total: u64 = dims(n).iter().map(|b| b.h * b.m).sum();
            assert_eq!(total, 1 << n);
        }
    }

    #[test]
    fn triple_count_matches_binomial_and_multiplicities() {
        for n in 1..=12u64 {
            let triples = orbit_triples(n);
            let expected = binomial(n + 3, 3).to_u64().unwrap();
            assert_eq!(triples.len() as u64, expected);
            let sum_m2: u64 = dims(n).iter().map(|b| b.m * b.m).sum();
            assert_eq!(triples.len() as u64, sum_m2);
        }
    }

    #[test]
    fn triple_sizes_match_enumeration() {
        for n in 1..=6u64 {
            let enumerated = orbit_sizes_by_enumeration(n);
            let triples = orbit_triples(n);
            assert_eq!(triples.len(), enumerated.len());
            for t in triples {
                assert_eq!(enumerated[&(t.r, t.s, t.d)], t.size, "n={n} triple {t:?}");
            }
        }
    }

    #[test]
    fn triple_sizes_examples() {
        let n4 = orbit_triples(4);
        let v221 = n4.iter().find(|t| (t.r, t.s, t.d) == (2, 2, 1)).unwrap();
        assert_eq!(v221.size, 24);
        let n2 = orbit_triples(2);
        let v000 = n2.iter().find(|t| (t.r, t.s, t.d) == (0, 0, 0)).unwrap();
        assert_eq!(v000.size, 1);
    }

    #[test]
    fn transposed_triples_have_equal_size() {
        for n in 1..=6u64 {
            let triples = orbit_triples(n);
            for t in &triples {
                let (r2, s2, d2) = t.transposed();
                let partner = triples
                    .iter()
                    .find(|u| (u.r, u.s, u.d) == (r2, s2, d2))
                    .expect("transposed triple exists");
                assert_eq!(partner.size, t.size);
                assert_eq!(partner.transposed(), (t.r, t.s, t.d));
            }
        }
    }

    #[test]
    fn unit_entries_for_k_zero_are_constant() {
        for n in 1..=5u64 {
            for i in 0..=n {
                for j in 0..=n {
                    let expected = QuadExact::sqrt_of_rational(&Rational::new(
                        BigInt::one(),
                        binomial(n, i) * binomial(n, j),
                    ))
                    .unwrap();
                    for d in valid_d_range(n, i, j) {
                        assert_eq!(e_analytic(n, 0, i, j, d).unwrap(), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn unit_entries_n2_k1() {
        assert_eq!(
            e_analytic(2, 1, 1, 1, 0).unwrap().as_rational(),
            Some(&ratio(1, 2))
        );
        assert_eq!(
            e_analytic(2, 1, 1, 1, 1).unwrap().as_rational(),
            Some(&ratio(-1, 2))
        );
    }

    #[test]
    fn unit_domain_errors() {
        assert!(e_analytic(4, 3, 3, 3, 0).is_err());
        assert!(e_analytic(4, 1, 0, 2, 0).is_err());
        assert!(e_analytic(4, 1, 2, 2, 3).is_err());
    }

    #[test]
    fn p_values_small_cases() {
        // p_{1,1,1}(1,1,1) = v * E / h = 2 * (-1/2) / 1 = -1 at n = 2.
        assert_eq!(
            p_analytic(2, 1, 1, 1, 1, 1, 1).unwrap().as_rational(),
            Some(&rational(-1))
        );
        assert!(p_analytic(2, 1, 2, 0, 1, 1, 1).unwrap().is_zero());
        assert!(p_analytic(2, 1, 1, 2, 1, 1, 1).is_err());
    }

    #[test]
    fn tables_build_without_sign_flips_up_to_six() {
        for n in 1..=6u64 {
            let tables = TerwilligerTables::build(n).unwrap();
            assert!(
                tables.sign_flips().is_empty(),
                "unexpected sign flips at n = {n}: {:?}",
                tables.sign_flips()
            );
        }
    }

    #[test]
    fn exact_identities_hold() {
        for n in 1..=5u64 {
            let tables = TerwilligerTables::build(n).unwrap();
            tables.verify_multiplication_exact().unwrap();
            tables.verify_orthogonality_exact().unwrap();
            tables.verify_reconstruction_exact().unwrap();
            tables.verify_traces_exact().unwrap();
        }
    }

    #[test]
    fn exact_multiplication_at_six() {
        let tables = TerwilligerTables::build(6).unwrap();
        tables.verify_multiplication_exact().unwrap();
        tables.verify_traces_exact().unwrap();
    }

    #[test]
    fn transpose_rule_relabels_difference_count() {
        let n = 5;
        let tables = TerwilligerTables::build(n).unwrap();
        for block in tables.dims() {
            let k = block.k;
            for i in k..=(n - k) {
                for j in k..=(n - k) {
                    for d in valid_d_range(n, i, j) {
                        let lhs = tables.entry(k, i, j, d).unwrap();
                        let rhs = tables.entry(k, j, i, d + j - i).unwrap();
                        assert_eq!(lhs, rhs);
                    }
                }
            }
        }
    }

    #[test]
    fn full_matrix_reconstruction_n_le_4() {
        for n in 1..=4u64 {
            let tables = TerwilligerTables::build(n).unwrap();
            let size = 1usize << n;
            for triple in tables.triples() {
                let (r, s, d) = (triple.r, triple.s, triple.d);
                // Assemble sum over k of p * E as full matrices and compare
                // against the 0/1 indicator of the orbit.
                let mut acc = vec![vec![QuadSum::new(); size]; size];
                for block in tables.dims() {
                    let k = block.k;
                    if r < k || s < k || r > n - k || s > n - k {
                        continue;
                    }
                    let p = tables.p(r, s, d, k, r, s).unwrap();
                    let unit = tables.unit_matrix(k, r, s).unwrap();
                    for x in 0..size {
                        for y in 0..size {
                            acc[x][y].accumulate(&p.mul(&unit[x][y]));
                        }
                    }
                }
                for (x, row) in acc.iter().enumerate() {
                    for (y, sum) in row.iter().enumerate() {
                        let indicator = weight(x) == r && weight(y) == s && v_count(x, y) == d;
                        let mut check = sum.clone();
                        if indicator {
                            check.accumulate(&QuadExact::one().negate());
                        }
                        assert!(check.is_zero(), "n={n} orbit ({r},{s},{d}) entry ({x},{y})");
                    }
                }
            }
        }
    }

    #[test]
    fn cross_validation_small_cases() {
        for n in [2u64, 3] {
            let report = cross_validate(n, 42).unwrap();
            assert!(report.structure_constant_gap < 1e-7, "n={n}");
            assert!(report.spectrum_gap < 1e-7, "n={n}");
        }
        let report = cross_validate(4, 42).unwrap();
        assert_eq!(report.block_dims, vec![(1, 5), (2, 1), (3, 3)]);
        assert!(cross_validate(9, 1).is_err());
    }

    #[test]
    fn build_cap_is_enforced() {
        assert!(matches!(
            TerwilligerTables::build(100),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn n2_block_structure() {
        let tables = TerwilligerTables::build(2).unwrap();
        let ms: Vec<u64> = tables.dims().iter().map(|b| b.m).collect();
        assert_eq!(ms, vec![3, 1]);
        // The change of basis between orbit indicators and matrix units is
        // square: 10 triples against 10 unit tuples.
        assert_eq!(tables.triples().len(), 10);
        assert_eq!(tables.unit_indices().len(), 10);
    }
}
