//! Multi-indices over countably many variables and finite index sets.
//!
//! A [`MultiIndex`] stores only its nonzero exponents, keyed by 1-based
//! variable position. [`IndexSet`] is an ordered, duplicate-free collection
//! with constant-time membership lookup; downward closedness is checked on
//! demand rather than enforced, so that malformed sets can be diagnosed.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// Finitely supported sequence of nonnegative integers.
///
/// Entries are `(position, exponent)` pairs sorted by position, with
/// `position >= 1` and `exponent >= 1`. Zeros are never stored, so the
/// derived `Eq` and `Hash` only see the support.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<(usize, u32)>,
}

impl MultiIndex {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The unit index `e_j`.
    pub fn unit(position: usize) -> Self {
        assert!(position >= 1, "positions are 1-based");
        Self {
            entries: vec![(position, 1)],
        }
    }

    /// Builds an index from a dense exponent vector; `dense[0]` is position 1.
    pub fn from_dense(dense: &[u32]) -> Self {
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| (i + 1, e))
            .collect();
        Self { entries }
    }

    /// Builds an index from `(position, exponent)` pairs in any order.
    /// Zero exponents are dropped; repeated or zero positions are rejected.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u32)>) -> Option<Self> {
        let mut entries: Vec<(usize, u32)> = pairs.into_iter().filter(|&(_, e)| e > 0).collect();
        entries.sort_unstable_by_key(|&(p, _)| p);
        if entries.iter().any(|&(p, _)| p == 0) || entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return None;
        }
        Some(Self { entries })
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exponent at a 1-based position.
    pub fn get(&self, position: usize) -> u32 {
        match self.entries.binary_search_by_key(&position, |&(p, _)| p) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0,
        }
    }

    /// Total degree `|nu|_1`.
    pub fn degree(&self) -> u64 {
        self.entries.iter().map(|&(_, e)| e as u64).sum()
    }

    /// Nonzero `(position, exponent)` pairs in increasing position.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (usize, u32)> + '_ {
        self.entries.iter().copied()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Largest position with a nonzero exponent, 0 for the zero index.
    pub fn max_position(&self) -> usize {
        self.entries.last().map_or(0, |&(p, _)| p)
    }

    pub fn max_exponent(&self) -> u32 {
        self.entries.iter().map(|&(_, e)| e).max().unwrap_or(0)
    }

    /// `nu + e_j`.
    pub fn add_unit(&self, position: usize) -> Self {
        assert!(position >= 1, "positions are 1-based");
        let mut entries = self.entries.clone();
        match entries.binary_search_by_key(&position, |&(p, _)| p) {
            Ok(i) => entries[i].1 += 1,
            Err(i) => entries.insert(i, (position, 1)),
        }
        Self { entries }
    }

    /// `nu - e_j`, or `None` when `nu_j = 0`.
    pub fn sub_unit(&self, position: usize) -> Option<Self> {
        let i = self
            .entries
            .binary_search_by_key(&position, |&(p, _)| p)
            .ok()?;
        let mut entries = self.entries.clone();
        if entries[i].1 == 1 {
            entries.remove(i);
        } else {
            entries[i].1 -= 1;
        }
        Some(Self { entries })
    }

    /// Immediate predecessors `nu - e_j` over the support.
    pub fn predecessors(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        self.entries
            .iter()
            .map(move |&(p, _)| self.sub_unit(p).expect("position is in the support"))
    }

    /// Exponents swapped between two positions.
    pub fn swap_positions(&self, a: usize, b: usize) -> Self {
        let (ea, eb) = (self.get(a), self.get(b));
        let pairs = self
            .entries
            .iter()
            .copied()
            .filter(|&(p, _)| p != a && p != b)
            .chain([(a, eb), (b, ea)]);
        Self::from_pairs(pairs).expect("swap keeps positions distinct")
    }

    /// Text form `j1:e1 j2:e2 ...`; the zero index is the empty string.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(p, e)| format!("{p}:{e}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse_text(text: &str) -> std::result::Result<Self, String> {
        let mut pairs = Vec::new();
        for token in text.split_whitespace() {
            let (p, e) = token
                .split_once(':')
                .ok_or_else(|| format!("expected `position:exponent`, got `{token}`"))?;
            let p: usize = p.parse().map_err(|_| format!("bad position `{p}`"))?;
            let e: u32 = e.parse().map_err(|_| format!("bad exponent `{e}`"))?;
            if p == 0 {
                return Err("positions are 1-based".into());
            }
            if e == 0 {
                return Err(format!("zero exponent stored at position {p}"));
            }
            pairs.push((p, e));
        }
        Self::from_pairs(pairs).ok_or_else(|| "repeated position".to_string())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.to_text())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            f.write_str("0")
        } else {
            f.write_str(&self.to_text())
        }
    }
}

/// Componentwise partial order `a <= b`.
pub fn leq(a: &MultiIndex, b: &MultiIndex) -> bool {
    a.iter().all(|(p, e)| e <= b.get(p))
}

/// Reverse-lexicographic comparison: exponent vectors are compared from the
/// highest position downward, and the smaller exponent at the first
/// difference sorts first.
pub fn revlex_cmp(a: &MultiIndex, b: &MultiIndex) -> Ordering {
    let (mut i, mut j) = (a.entries.len(), b.entries.len());
    loop {
        match (i, j) {
            (0, 0) => return Ordering::Equal,
            (0, _) => return Ordering::Less,
            (_, 0) => return Ordering::Greater,
            _ => {}
        }
        let (pa, ea) = a.entries[i - 1];
        let (pb, eb) = b.entries[j - 1];
        match pa.cmp(&pb) {
            // a has a zero where b is positive
            Ordering::Less => return Ordering::Less,
            Ordering::Greater => return Ordering::Greater,
            Ordering::Equal => match ea.cmp(&eb) {
                Ordering::Equal => {
                    i -= 1;
                    j -= 1;
                }
                other => return other,
            },
        }
    }
}

/// Canonical total order without a weight context: total degree, then
/// reverse-lexicographic.
pub fn canonical_cmp(a: &MultiIndex, b: &MultiIndex) -> Ordering {
    a.degree()
        .cmp(&b.degree())
        .then_with(|| revlex_cmp(a, b))
}

/// Canonical total order with a weight context: total degree, then weight
/// ascending, then reverse-lexicographic.
pub fn weighted_canonical_cmp(a: &MultiIndex, wa: f64, b: &MultiIndex, wb: f64) -> Ordering {
    a.degree()
        .cmp(&b.degree())
        .then_with(|| wa.total_cmp(&wb))
        .then_with(|| revlex_cmp(a, b))
}

/// Ordered, duplicate-free finite set of multi-indices.
#[derive(Clone, Default)]
pub struct IndexSet {
    members: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

impl IndexSet {
    /// Keeps the given order; rejects duplicates.
    pub fn from_ordered(members: Vec<MultiIndex>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(members.len());
        for (i, nu) in members.iter().enumerate() {
            if lookup.insert(nu.clone(), i).is_some() {
                return Err(Error::DuplicateIndex(nu.to_string()));
            }
        }
        Ok(Self { members, lookup })
    }

    /// Sorts by the canonical order; rejects duplicates.
    pub fn from_members(mut members: Vec<MultiIndex>) -> Result<Self> {
        members.sort_by(canonical_cmp);
        Self::from_ordered(members)
    }

    /// Like [`IndexSet::from_members`] but also requires downward closedness.
    pub fn downward_closed(members: Vec<MultiIndex>) -> Result<Self> {
        let set = Self::from_members(members)?;
        set.check_downward_closed()?;
        Ok(set)
    }

    /// The zero index alone.
    pub fn singleton_zero() -> Self {
        Self::from_ordered(vec![MultiIndex::zero()]).expect("single member")
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[MultiIndex] {
        &self.members
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.members.iter()
    }

    pub fn contains(&self, nu: &MultiIndex) -> bool {
        self.lookup.contains_key(nu)
    }

    pub fn position(&self, nu: &MultiIndex) -> Option<usize> {
        self.lookup.get(nu).copied()
    }

    /// Largest variable position used by any member.
    pub fn max_position(&self) -> usize {
        self.members.iter().map(MultiIndex::max_position).max().unwrap_or(0)
    }

    pub fn max_exponent(&self) -> u32 {
        self.members.iter().map(MultiIndex::max_exponent).max().unwrap_or(0)
    }

    /// Largest exponent of variable `position` over the set.
    pub fn max_exponent_at(&self, position: usize) -> u32 {
        self.members.iter().map(|nu| nu.get(position)).max().unwrap_or(0)
    }

    /// Local downward-closedness test: every `nu - e_j` over the support of
    /// every member is a member.
    pub fn is_downward_closed(&self) -> bool {
        self.check_downward_closed().is_ok()
    }

    fn check_downward_closed(&self) -> Result<()> {
        for nu in &self.members {
            if nu.predecessors().any(|p| !self.contains(&p)) {
                return Err(Error::NotDownwardClosed(nu.to_string()));
            }
        }
        if !self.is_empty() && !self.contains(&MultiIndex::zero()) {
            return Err(Error::NotDownwardClosed("0".into()));
        }
        Ok(())
    }

    /// Indices outside the set whose predecessors all lie in it, restricted
    /// to variables `1..=num_vars`, in canonical order.
    pub fn reduced_margin(&self, num_vars: usize) -> Result<Vec<MultiIndex>> {
        self.check_downward_closed()?;
        if self.is_empty() {
            return Ok(vec![MultiIndex::zero()]);
        }
        let mut seen = HashSet::new();
        let mut margin = Vec::new();
        for nu in &self.members {
            for j in 1..=num_vars {
                let cand = nu.add_unit(j);
                if self.contains(&cand) || seen.contains(&cand) {
                    continue;
                }
                if cand.predecessors().all(|p| self.contains(&p)) {
                    seen.insert(cand.clone());
                    margin.push(cand);
                }
            }
        }
        margin.sort_by(canonical_cmp);
        Ok(margin)
    }

    /// Members with every variable outside `positions` equal to zero,
    /// reported as exponent tuples over `positions`.
    pub fn section(&self, positions: &[usize]) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = self
            .members
            .iter()
            .filter(|nu| nu.iter().all(|(p, _)| positions.contains(&p)))
            .map(|nu| positions.iter().map(|&p| nu.get(p)).collect())
            .collect();
        out.sort();
        out
    }

    /// One index per line in `j:e` form; the zero index is an empty line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for nu in &self.members {
            s.push_str(&nu.to_text());
            s.push('\n');
        }
        s
    }

    /// Inverse of [`IndexSet::to_text`]; member order is preserved.
    pub fn parse_text(text: &str) -> Result<Self> {
        let body = text.strip_suffix('\n').map_or(text, |b| b);
        if text.is_empty() {
            return Ok(Self::default());
        }
        let members = body
            .split('\n')
            .enumerate()
            .map(|(i, line)| {
                MultiIndex::parse_text(line.trim_end_matches('\r')).map_err(|reason| Error::Parse {
                    line: i + 1,
                    reason,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_ordered(members)
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members.iter()).finish()
    }
}

impl PartialEq for IndexSet {
    /// Set equality, ignoring member order.
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.members.iter().all(|nu| other.contains(nu))
    }
}

impl<'a> IntoIterator for &'a IndexSet {
    type Item = &'a MultiIndex;
    type IntoIter = std::slice::Iter<'a, MultiIndex>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}
