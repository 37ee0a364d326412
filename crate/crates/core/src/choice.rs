//! Choice functions on integer boxes.
//!
//! A choice function maps a local vector `z` (one entry per incident edge of
//! its owner) to `C(z) <= z`. Every rule here is positional: the owner's
//! incident edges are stored in the order the rule needs (preference order
//! for ordered rules, column order for tableaux), so rules never see edge
//! ids.

pub mod axioms;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::model::Vertex;

/// Quota-filling choice by a strict order on positions, most preferred first.
///
/// If `|z| <= quota` the offer is kept whole; otherwise the longest prefix
/// that fits is kept, the next position receives the remainder and the tail
/// is dropped.
pub fn choose_by_order(z: &[u64], quota: u64) -> Vec<u64> {
    let total: u64 = z.iter().sum();
    if total <= quota {
        return z.to_vec();
    }
    let mut out = vec![0; z.len()];
    let mut room = quota;
    for (slot, &value) in out.iter_mut().zip(z) {
        if room == 0 {
            break;
        }
        let take = value.min(room);
        *slot = take;
        room -= take;
    }
    out
}

/// A column-monotone tableau with a quota.
///
/// Column `i` (0-based here) has cells `0..=height(i)`; `filling[i][j]` is
/// the label of cell `(i, j)`. Labels form a bijection onto `1..=N`, the base
/// cell of column `i` is labelled `i + 1`, and labels grow up every column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tableau {
    filling: Vec<Vec<u64>>,
    quota: u64,
}

impl Tableau {
    pub fn new(filling: Vec<Vec<u64>>, quota: u64) -> Result<Self, String> {
        if filling.is_empty() {
            return Err("tableau needs at least one column".into());
        }
        if quota == 0 {
            return Err("tableau quota must be positive".into());
        }
        let k = filling.len();
        let cells: usize = filling.iter().map(Vec::len).sum();
        let mut seen = vec![false; cells + 1];
        for (i, column) in filling.iter().enumerate() {
            match column.first() {
                Some(&base) if base == i as u64 + 1 => {}
                Some(&base) => {
                    return Err(format!(
                        "column {} base cell is labelled {base}, expected {}",
                        i + 1,
                        i + 1
                    ))
                }
                None => return Err(format!("column {} has no base cell", i + 1)),
            }
            if column.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("column {} is not increasing", i + 1));
            }
            for &label in column {
                if label == 0 || label as usize > cells || seen[label as usize] {
                    return Err(format!("label {label} breaks the bijection onto 1..={cells}"));
                }
                seen[label as usize] = true;
            }
        }
        debug_assert!(k <= cells);
        Ok(Tableau { filling, quota })
    }

    /// The three-column tableau with heights `(q, q/2, q/2)` whose upper
    /// cells alternate between the last two columns.
    pub fn alternating(quota: u64) -> Result<Self, String> {
        if quota < 2 || !quota.is_multiple_of(2) {
            return Err(format!("quota must be an even integer >= 2, got {quota}"));
        }
        let p = quota / 2;
        let first = std::iter::once(1).chain((1..=quota).map(|j| 3 + j)).collect();
        let second = std::iter::once(2).chain((1..=p).map(|j| 2 + quota + 2 * j)).collect();
        let third = std::iter::once(3).chain((1..=p).map(|j| 3 + quota + 2 * j)).collect();
        Tableau::new(vec![first, second, third], quota)
    }

    pub fn columns(&self) -> usize {
        self.filling.len()
    }

    pub fn heights(&self) -> Vec<u64> {
        self.filling.iter().map(|c| c.len() as u64 - 1).collect()
    }

    pub fn filling(&self) -> &[Vec<u64>] {
        &self.filling
    }

    pub fn quota(&self) -> u64 {
        self.quota
    }

    /// Keep the `k + min(|z|, q)` smallest labels of the lower set of `z`.
    pub fn choose(&self, z: &[u64]) -> Vec<u64> {
        debug_assert_eq!(z.len(), self.filling.len());
        let total: u64 = z.iter().sum();
        if total <= self.quota {
            return z.to_vec();
        }
        let keep = self.filling.len() + self.quota as usize;
        let mut labels: Vec<u64> = self
            .filling
            .iter()
            .zip(z)
            .flat_map(|(column, &h)| column[..=h as usize].iter().copied())
            .collect();
        let (_, &mut threshold, _) = labels.select_nth_unstable(keep - 1);
        self.filling
            .iter()
            .zip(z)
            .map(|(column, &h)| {
                // column labels increase, so the kept cells form a prefix
                let kept = column[..=h as usize].partition_point(|&t| t <= threshold);
                kept as u64 - 1
            })
            .collect()
    }
}

/// The rule behind a choice function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChoiceRule {
    /// Rule [`choose_by_order`] with positions in preference order.
    Ordered { quota: u64 },
    Tableau(Tableau),
}

impl ChoiceRule {
    pub fn choose(&self, z: &[u64]) -> Vec<u64> {
        match self {
            ChoiceRule::Ordered { quota } => choose_by_order(z, *quota),
            ChoiceRule::Tableau(t) => t.choose(z),
        }
    }

    pub fn quota(&self) -> u64 {
        match self {
            ChoiceRule::Ordered { quota } => *quota,
            ChoiceRule::Tableau(t) => t.quota(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChoiceKind {
    WorkerLinear,
    FirmLinear,
    Tableau,
}

/// Memoizing evaluator for one vertex's choice function.
///
/// `misses` counts distinct vectors actually evaluated (the oracle calls);
/// `requests` counts every lookup.
pub struct ChoiceEvaluator {
    owner: Vertex,
    kind: ChoiceKind,
    rule: ChoiceRule,
    bounds: Vec<u64>,
    cache: Mutex<HashMap<Vec<u64>, Vec<u64>>>,
    misses: AtomicU64,
    requests: AtomicU64,
}

impl fmt::Debug for ChoiceEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChoiceEvaluator")
            .field("owner", &self.owner)
            .field("kind", &self.kind)
            .field("bounds", &self.bounds)
            .field("misses", &self.misses())
            .finish()
    }
}

impl ChoiceEvaluator {
    pub fn new(owner: Vertex, kind: ChoiceKind, rule: ChoiceRule, bounds: Vec<u64>) -> Self {
        ChoiceEvaluator {
            owner,
            kind,
            rule,
            bounds,
            cache: Mutex::new(HashMap::new()),
            misses: AtomicU64::new(0),
            requests: AtomicU64::new(0),
        }
    }

    pub fn owner(&self) -> Vertex {
        self.owner
    }

    pub fn kind(&self) -> ChoiceKind {
        self.kind
    }

    pub fn rule(&self) -> &ChoiceRule {
        &self.rule
    }

    pub fn bounds(&self) -> &[u64] {
        &self.bounds
    }

    pub fn quota(&self) -> u64 {
        self.rule.quota()
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn eval(&self, z: &[u64]) -> Vec<u64> {
        debug_assert!(
            z.len() == self.bounds.len() && z.iter().zip(&self.bounds).all(|(v, b)| v <= b),
            "{:?}: {z:?} outside box {:?}",
            self.owner,
            self.bounds
        );
        self.requests.fetch_add(1, Ordering::Relaxed);
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(hit) = cache.get(z) {
            return hit.clone();
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let chosen = self.rule.choose(z);
        cache.insert(z.to_vec(), chosen.clone());
        chosen
    }

    pub fn is_acceptable(&self, z: &[u64]) -> bool {
        self.eval(z) == z
    }

    /// `C(z + 1^pos) != z`, i.e. a unit increase at `pos` changes the choice.
    /// Saturated positions are never interesting.
    pub fn is_interesting(&self, z: &[u64], pos: usize) -> bool {
        if z[pos] >= self.bounds[pos] {
            return false;
        }
        let mut up = z.to_vec();
        up[pos] += 1;
        self.eval(&up) != z
    }

    /// True iff `z` is revealed preferred to `other`: `C(z ∨ other) = z`.
    /// Equal vectors are never strictly preferred.
    pub fn revealed_prefers(&self, z: &[u64], other: &[u64]) -> Result<bool> {
        if !self.is_acceptable(z) || !self.is_acceptable(other) {
            return Err(Error::NotAcceptable(format!("{:?}", self.owner)));
        }
        if z == other {
            return Ok(false);
        }
        Ok(self.eval(&join(z, other)) == z)
    }

    /// Comparison of two acceptable vectors under revealed preference.
    pub fn compare(&self, z: &[u64], other: &[u64]) -> Result<Comparison> {
        if z == other {
            if !self.is_acceptable(z) {
                return Err(Error::NotAcceptable(format!("{:?}", self.owner)));
            }
            return Ok(Comparison::Equal);
        }
        if self.revealed_prefers(other, z)? {
            Ok(Comparison::Less)
        } else if self.revealed_prefers(z, other)? {
            Ok(Comparison::Greater)
        } else {
            Ok(Comparison::Incomparable)
        }
    }
}

/// Outcome of comparing two acceptable vectors or assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Less,
    Greater,
    Equal,
    Incomparable,
}

impl Comparison {
    /// Fold the per-vertex comparisons into a componentwise one.
    pub fn combine(self, other: Comparison) -> Comparison {
        use Comparison::*;
        match (self, other) {
            (Equal, c) | (c, Equal) => c,
            (Less, Less) => Less,
            (Greater, Greater) => Greater,
            _ => Incomparable,
        }
    }

    pub fn reversed(self) -> Comparison {
        match self {
            Comparison::Less => Comparison::Greater,
            Comparison::Greater => Comparison::Less,
            c => c,
        }
    }

    pub fn is_le(self) -> bool {
        matches!(self, Comparison::Less | Comparison::Equal)
    }
}

pub fn join(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| *x.max(y)).collect()
}

pub fn meet(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| *x.min(y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix(q: u64) -> Tableau {
        Tableau::alternating(q).unwrap()
    }

    #[test]
    fn ordered_rule_keeps_prefix_and_remainder() {
        assert_eq!(choose_by_order(&[2, 2, 1], 3), vec![2, 1, 0]);
        assert_eq!(choose_by_order(&[0, 0, 0], 3), vec![0, 0, 0]);
        assert_eq!(choose_by_order(&[1, 1, 1], 3), vec![1, 1, 1]);
        assert_eq!(choose_by_order(&[0, 5, 4], 3), vec![0, 3, 0]);
    }

    #[test]
    fn alternating_tableau_matches_picture() {
        let t = appendix(4);
        assert_eq!(
            t.filling(),
            &[vec![1, 4, 5, 6, 7], vec![2, 8, 10], vec![3, 9, 11]]
        );
        assert_eq!(t.heights(), vec![4, 2, 2]);
    }

    #[test]
    fn tableau_choice_examples() {
        let t = appendix(4);
        // lower set of (4,2,2) has labels 1..=11; the seven smallest are column 1 and the bases
        assert_eq!(t.choose(&[4, 2, 2]), vec![4, 0, 0]);
        assert_eq!(t.choose(&[1, 2, 2]), vec![1, 2, 1]);
        assert_eq!(t.choose(&[1, 1, 1]), vec![1, 1, 1]);
        assert_eq!(t.choose(&[0, 0, 0]), vec![0, 0, 0]);
    }

    #[test]
    fn tableau_rejects_bad_fillings() {
        assert!(Tableau::new(vec![vec![1, 3], vec![2, 3]], 1).is_err());
        assert!(Tableau::new(vec![vec![2, 3], vec![1, 4]], 1).is_err());
        assert!(Tableau::new(vec![vec![1, 4, 3], vec![2]], 1).is_err());
        assert!(Tableau::new(vec![vec![1, 5], vec![2, 3]], 1).is_err());
        assert!(Tableau::new(vec![vec![1, 3], vec![2, 4]], 1).is_ok());
        assert!(Tableau::alternating(3).is_err());
    }

    #[test]
    fn revealed_preference_examples() {
        let ev = ChoiceEvaluator::new(
            Vertex::Firm(0),
            ChoiceKind::Tableau,
            ChoiceRule::Tableau(appendix(4)),
            vec![4, 2, 2],
        );
        assert!(ev.revealed_prefers(&[1, 2, 1], &[0, 2, 2]).unwrap());
        assert!(!ev.revealed_prefers(&[0, 2, 2], &[1, 2, 1]).unwrap());
        assert!(!ev.revealed_prefers(&[0, 2, 2], &[0, 2, 2]).unwrap());
        assert!(ev.revealed_prefers(&[4, 2, 2], &[0, 0, 0]).is_err());

        let worker = ChoiceEvaluator::new(
            Vertex::Worker(0),
            ChoiceKind::WorkerLinear,
            ChoiceRule::Ordered { quota: 1 },
            vec![1, 1],
        );
        assert!(worker.revealed_prefers(&[1, 0], &[0, 1]).unwrap());
        assert_eq!(worker.compare(&[0, 1], &[1, 0]).unwrap(), Comparison::Less);
    }

    #[test]
    fn evaluator_counts_misses_only_once() {
        let ev = ChoiceEvaluator::new(
            Vertex::Worker(0),
            ChoiceKind::WorkerLinear,
            ChoiceRule::Ordered { quota: 2 },
            vec![2, 2],
        );
        ev.eval(&[2, 2]);
        ev.eval(&[2, 2]);
        ev.eval(&[1, 2]);
        assert_eq!(ev.misses(), 2);
        assert_eq!(ev.requests(), 3);
    }

    #[test]
    fn interesting_needs_room() {
        let ev = ChoiceEvaluator::new(
            Vertex::Firm(0),
            ChoiceKind::Tableau,
            ChoiceRule::Tableau(appendix(4)),
            vec![4, 2, 2],
        );
        assert!(ev.is_interesting(&[0, 2, 2], 0));
        assert!(!ev.is_interesting(&[4, 0, 0], 0));
    }
}
