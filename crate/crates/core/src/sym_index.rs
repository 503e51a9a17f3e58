//! Indexing of the symmetric subspace by nondecreasing sequences.
//!
//! A nondecreasing length-`k` sequence over `{0..d-1}` is stored by its
//! occurrence counts `(l_0, ..., l_{d-1})`. Sequences are ordered
//! lexicographically and ranked in closed form.

use crate::error::{Error, Result};

/// `C(n, r)` with overflow detection.
pub fn binomial(n: usize, r: usize) -> Option<u128> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut c: u128 = 1;
    for i in 0..r {
        // c * (n - i) is divisible by (i + 1) after the multiplication.
        c = c.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(c)
}

/// Number of nondecreasing sequences of length `r` over `v` symbols.
fn multisets(v: usize, r: usize) -> Option<u128> {
    if r == 0 {
        return Some(1);
    }
    if v == 0 {
        return Some(0);
    }
    binomial(v + r - 1, r)
}

/// Dimension `d_k = C(d+k-1, k)` of the symmetric subspace.
pub fn dim_sym(d: usize, k: usize) -> Result<usize> {
    if d == 0 {
        return Err(Error::InvalidParam("local dimension must be positive".into()));
    }
    multisets(d, k)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or(Error::Overflow { d, k })
}

/// Multinomial `k! / prod(l_i!)` for a count tuple.
pub fn perm_count(counts: &[u32]) -> Option<u128> {
    let mut total = 0usize;
    let mut acc: u128 = 1;
    for &c in counts {
        total += c as usize;
        acc = acc.checked_mul(binomial(total, c as usize)?)?;
    }
    Some(acc)
}

/// Lexicographically ordered table of nondecreasing sequences.
#[derive(Clone, Debug)]
pub struct SeqTable {
    d: usize,
    k: usize,
    /// Row-major `len x d` occurrence counts.
    counts: Vec<u32>,
    perm: Vec<u128>,
    /// `mset[v * (k + 1) + r]` = number of length-`r` sequences over `v` symbols.
    mset: Vec<usize>,
}

impl SeqTable {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        let len = dim_sym(d, k)?;
        let mut mset = vec![0usize; (d + 1) * (k + 1)];
        for v in 0..=d {
            for r in 0..=k {
                mset[v * (k + 1) + r] = multisets(v, r)
                    .and_then(|c| usize::try_from(c).ok())
                    .ok_or(Error::Overflow { d, k })?;
            }
        }
        let mut counts = Vec::with_capacity(len * d);
        let mut perm = Vec::with_capacity(len);
        let mut seq = vec![0usize; k];
        loop {
            let mut row = vec![0u32; d];
            for &s in &seq {
                row[s] += 1;
            }
            perm.push(perm_count(&row).ok_or(Error::Overflow { d, k })?);
            counts.extend_from_slice(&row);
            // Advance to the lexicographic successor.
            let Some(p) = (0..k).rev().find(|&p| seq[p] + 1 < d) else {
                break;
            };
            let v = seq[p] + 1;
            for s in &mut seq[p..] {
                *s = v;
            }
        }
        debug_assert_eq!(perm.len(), len);
        Ok(SeqTable { d, k, counts, perm, mset })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Occurrence counts of the sequence at rank `r`.
    pub fn counts(&self, r: usize) -> &[u32] {
        &self.counts[r * self.d..(r + 1) * self.d]
    }

    /// Symbols of the sequence at rank `r`, in nondecreasing order.
    pub fn symbols(&self, r: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.k);
        for (i, &c) in self.counts(r).iter().enumerate() {
            out.extend(std::iter::repeat_n(i, c as usize));
        }
        out
    }

    pub fn perm(&self, r: usize) -> u128 {
        self.perm[r]
    }

    pub fn perms(&self) -> &[u128] {
        &self.perm
    }

    fn mset(&self, v: usize, r: usize) -> usize {
        self.mset[v * (self.k + 1) + r]
    }

    /// Rank of a count tuple in this table.
    pub fn rank(&self, counts: &[u32]) -> Result<usize> {
        if counts.len() != self.d {
            return Err(Error::DimMismatch { expected: self.d, got: counts.len() });
        }
        if counts.iter().map(|&c| c as usize).sum::<usize>() != self.k {
            return Err(Error::InvalidSequence(format!("counts do not sum to {}", self.k)));
        }
        Ok(self.rank_unchecked(counts))
    }

    fn rank_unchecked(&self, counts: &[u32]) -> usize {
        let mut rank = 0;
        let mut pos = 0;
        let mut prev = 0;
        for (sym, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                let rest = self.k - pos - 1;
                for v in prev..sym {
                    rank += self.mset(self.d - v, rest);
                }
                prev = sym;
                pos += 1;
            }
        }
        rank
    }

    /// Rank of a nondecreasing symbol list in this table.
    pub fn rank_symbols(&self, seq: &[usize]) -> Result<usize> {
        if seq.len() != self.k {
            return Err(Error::DimMismatch { expected: self.k, got: seq.len() });
        }
        let mut counts = vec![0u32; self.d];
        for w in seq.windows(2) {
            if w[0] > w[1] {
                return Err(Error::InvalidSequence("sequence is not nondecreasing".into()));
            }
        }
        for &s in seq {
            if s >= self.d {
                return Err(Error::SymbolOutOfRange { sym: s, d: self.d });
            }
            counts[s] += 1;
        }
        Ok(self.rank_unchecked(&counts))
    }
}

/// Rank, in the `(d, k)` table, of the merge of a length-`(k-1)` sequence
/// `counts` from `table` with one extra symbol `sym`.
pub fn rank_with_insert(table: &SeqTable, target: &SeqTable, counts: &[u32], sym: usize) -> Result<usize> {
    let d = table.d();
    if target.d() != d || target.k() != table.k() + 1 {
        return Err(Error::InvalidParam("target table must have the same d and level k+1".into()));
    }
    if sym >= d {
        return Err(Error::SymbolOutOfRange { sym, d });
    }
    let mut merged = counts.to_vec();
    if merged.len() != d {
        return Err(Error::DimMismatch { expected: d, got: merged.len() });
    }
    merged[sym] += 1;
    target.rank(&merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_insert_rank(table: &SeqTable, target: &SeqTable, r: usize, sym: usize) -> usize {
        let mut s = table.symbols(r);
        s.push(sym);
        s.sort_unstable();
        (0..target.len()).find(|&q| target.symbols(q) == s).unwrap()
    }

    #[test]
    fn dims() {
        assert_eq!(dim_sym(2, 3).unwrap(), 4);
        assert_eq!(dim_sym(3, 2).unwrap(), 6);
        for d in 1..8 {
            assert_eq!(dim_sym(d, 1).unwrap(), d);
        }
        assert_eq!(dim_sym(16, 32).unwrap() as u128, binomial(47, 32).unwrap());
        assert!(matches!(dim_sym(1000, 1000), Err(Error::Overflow { .. })));
    }

    #[test]
    fn small_tables() {
        let t = SeqTable::new(2, 3).unwrap();
        let seqs: Vec<_> = (0..t.len()).map(|r| t.symbols(r)).collect();
        assert_eq!(seqs, vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 1], vec![1, 1, 1]]);
        assert_eq!(t.perms(), &[1, 3, 3, 1]);
        let t = SeqTable::new(3, 2).unwrap();
        let seqs: Vec<_> = (0..t.len()).map(|r| t.symbols(r)).collect();
        assert_eq!(
            seqs,
            vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 1], vec![1, 2], vec![2, 2]]
        );
        let t = SeqTable::new(1, 5).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.perms(), &[1]);
    }

    #[test]
    fn insert_examples() {
        let t2 = SeqTable::new(2, 2).unwrap();
        let t3 = SeqTable::new(2, 3).unwrap();
        assert_eq!(rank_with_insert(&t2, &t3, &[1, 1], 0).unwrap(), 1);
        assert_eq!(rank_with_insert(&t2, &t3, &[1, 1], 1).unwrap(), 2);
        assert_eq!(rank_with_insert(&t2, &t3, &[2, 0], 0).unwrap(), 0);
        assert!(matches!(
            rank_with_insert(&t2, &t3, &[2, 0], 2),
            Err(Error::SymbolOutOfRange { .. })
        ));
    }

    #[test]
    fn table_invariants() {
        for d in 1..=6 {
            for k in 1..=10 {
                let t = SeqTable::new(d, k).unwrap();
                assert_eq!(t.len(), dim_sym(d, k).unwrap());
                let total: u128 = t.perms().iter().sum();
                assert_eq!(total, (d as u128).pow(k as u32));
                for r in 0..t.len() {
                    assert_eq!(t.rank(t.counts(r)).unwrap(), r);
                    if r > 0 {
                        assert!(t.symbols(r - 1) < t.symbols(r));
                    }
                }
            }
        }
    }

    #[test]
    fn insert_matches_naive() {
        for d in 1..=4 {
            for k in 2..=5 {
                let small = SeqTable::new(d, k - 1).unwrap();
                let big = SeqTable::new(d, k).unwrap();
                for r in 0..small.len() {
                    for sym in 0..d {
                        assert_eq!(
                            rank_with_insert(&small, &big, small.counts(r), sym).unwrap(),
                            naive_insert_rank(&small, &big, r, sym)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn rank_symbols_rejects_bad_input() {
        let t = SeqTable::new(3, 2).unwrap();
        assert_eq!(t.rank_symbols(&[1, 2]).unwrap(), 4);
        assert!(t.rank_symbols(&[2, 1]).is_err());
        assert!(t.rank_symbols(&[0, 3]).is_err());
    }
}
