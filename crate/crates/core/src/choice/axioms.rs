//! Exhaustive checkers for the choice-function axioms and the gapless
//! condition on small boxes.

use serde::Serialize;

use crate::choice::{join, meet};
use crate::error::{Error, Result};
use crate::grid::{self, box_size, dominates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axiom {
    /// `z >= z' >= C(z)` implies `C(z') = C(z)`.
    Consistence,
    /// `z >= z'` implies `C(z) ∧ z' <= C(z')`.
    Substitutability,
    /// `z >= z'` implies `|C(z)| >= |C(z')|`.
    SizeMonotonicity,
    /// `|C(z)| = min(|z|, q)`.
    QuotaFilling,
    /// `C(z ∨ z') = C(C(z) ∨ z')`.
    Stationarity,
    /// For acceptable `z ≺ z'` and `z(a) <= z'(a)`: if `a` is not interesting
    /// under `z`, it is not interesting under `z'`.
    InterestPersistence,
    /// Revealed preference is transitive on acceptable vectors.
    Transitivity,
}

impl Axiom {
    pub const ALL: [Axiom; 7] = [
        Axiom::Consistence,
        Axiom::Substitutability,
        Axiom::SizeMonotonicity,
        Axiom::QuotaFilling,
        Axiom::Stationarity,
        Axiom::InterestPersistence,
        Axiom::Transitivity,
    ];
}

/// Size guards for exhaustive checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckLimits {
    /// Upper bound on `|box|^2`.
    pub pairs: u128,
    /// Upper bound on `|box|^3`.
    pub triples: u128,
    /// At most this many gapless witnesses are kept (all are counted).
    pub max_witnesses: usize,
}

impl Default for CheckLimits {
    fn default() -> Self {
        CheckLimits {
            pairs: 1_000_000,
            triples: 100_000_000,
            max_witnesses: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub z: Vec<u64>,
    pub z_prime: Vec<u64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AxiomOutcome {
    pub axiom: Axiom,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AxiomReport {
    /// Failure of the basic requirement `C(z) <= z`; when set, no axiom was checked.
    pub precheck: Option<Counterexample>,
    pub outcomes: Vec<AxiomOutcome>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.precheck.is_none() && self.outcomes.iter().all(|o| o.counterexample.is_none())
    }

    pub fn failure(&self, axiom: Axiom) -> Option<&Counterexample> {
        self.outcomes
            .iter()
            .find(|o| o.axiom == axiom)
            .and_then(|o| o.counterexample.as_ref())
    }
}

/// Every point of a box together with its choice.
struct Table {
    bounds: Vec<u64>,
    points: Vec<Vec<u64>>,
    chosen: Vec<Vec<u64>>,
}

impl Table {
    fn build<F: Fn(&[u64]) -> Vec<u64>>(choose: &F, bounds: &[u64]) -> Self {
        let points: Vec<Vec<u64>> = grid::points(bounds).collect();
        let chosen = points.iter().map(|z| choose(z)).collect();
        Table {
            bounds: bounds.to_vec(),
            points,
            chosen,
        }
    }

    fn choice_of(&self, z: &[u64]) -> &[u64] {
        &self.chosen[grid::rank(&self.bounds, z)]
    }

    fn acceptable(&self) -> Vec<usize> {
        (0..self.points.len())
            .filter(|&i| self.chosen[i] == self.points[i])
            .collect()
    }

    fn interesting(&self, z: &[u64], pos: usize) -> bool {
        if z[pos] >= self.bounds[pos] {
            return false;
        }
        let mut up = z.to_vec();
        up[pos] += 1;
        self.choice_of(&up) != z
    }

    /// The displaced partner `c` when `C(z + 1^a) = z + 1^a - 1^c`.
    fn tandem(&self, z: &[u64], a: usize) -> Option<usize> {
        if z[a] >= self.bounds[a] {
            return None;
        }
        let mut up = z.to_vec();
        up[a] += 1;
        let chosen = self.choice_of(&up);
        let mut lost = None;
        for (pos, (&c, &u)) in chosen.iter().zip(&up).enumerate() {
            if c == u {
                continue;
            }
            if pos == a || c + 1 != u || lost.is_some() {
                return None;
            }
            lost = Some(pos);
        }
        lost
    }

    fn prefers(&self, better: usize, worse: usize) -> bool {
        better != worse
            && self.choice_of(&join(&self.points[better], &self.points[worse])) == self.points[better]
    }
}

fn guard(size: u128, power: u32, limit: u128) -> Result<()> {
    let total = size.checked_pow(power).unwrap_or(u128::MAX);
    if total > limit {
        return Err(Error::LimitExceeded { size: total, limit });
    }
    Ok(())
}

fn example(z: &[u64], z_prime: &[u64], detail: String) -> Option<Counterexample> {
    Some(Counterexample {
        z: z.to_vec(),
        z_prime: z_prime.to_vec(),
        detail,
    })
}

/// Check the requested axioms over every point and ordered pair of the box.
///
/// `quota` is required for [`Axiom::QuotaFilling`].
pub fn check_axioms<F: Fn(&[u64]) -> Vec<u64>>(
    choose: F,
    bounds: &[u64],
    quota: Option<u64>,
    which: &[Axiom],
    limits: &CheckLimits,
) -> Result<AxiomReport> {
    let size = box_size(bounds);
    guard(size, 2, limits.pairs)?;
    if which.contains(&Axiom::Transitivity) {
        guard(size, 3, limits.triples)?;
    }
    let points: Vec<Vec<u64>> = grid::points(bounds).collect();
    for z in &points {
        let c = choose(z);
        if c.len() != z.len() || !dominates(z, &c) {
            return Ok(AxiomReport {
                precheck: example(z, &c, "C(z) <= z fails".into()),
                outcomes: Vec::new(),
            });
        }
    }
    let table = Table::build(&choose, bounds);
    let outcomes = which
        .iter()
        .map(|&axiom| {
            let counterexample = match axiom {
                Axiom::Consistence => consistence(&table),
                Axiom::Substitutability => substitutability(&table),
                Axiom::SizeMonotonicity => size_monotonicity(&table),
                Axiom::QuotaFilling => quota_filling(&table, quota),
                Axiom::Stationarity => stationarity(&table),
                Axiom::InterestPersistence => interest_persistence(&table),
                Axiom::Transitivity => transitivity(&table),
            };
            AxiomOutcome {
                axiom,
                counterexample,
            }
        })
        .collect();
    Ok(AxiomReport {
        precheck: None,
        outcomes,
    })
}

fn dominated_pairs(table: &Table) -> impl Iterator<Item = (usize, usize)> + '_ {
    let n = table.points.len();
    (0..n).flat_map(move |i| {
        (0..n)
            .filter(move |&j| dominates(&table.points[i], &table.points[j]))
            .map(move |j| (i, j))
    })
}

fn consistence(table: &Table) -> Option<Counterexample> {
    dominated_pairs(table).find_map(|(i, j)| {
        let (z, zp) = (&table.points[i], &table.points[j]);
        let c = &table.chosen[i];
        (dominates(zp, c) && &table.chosen[j] != c)
            .then(|| example(z, zp, format!("C(z') = {:?} != C(z) = {c:?}", table.chosen[j])))
            .flatten()
    })
}

fn substitutability(table: &Table) -> Option<Counterexample> {
    dominated_pairs(table).find_map(|(i, j)| {
        let (z, zp) = (&table.points[i], &table.points[j]);
        let lhs = meet(&table.chosen[i], zp);
        (!dominates(&table.chosen[j], &lhs))
            .then(|| example(z, zp, format!("C(z) ∧ z' = {lhs:?} > C(z') = {:?}", table.chosen[j])))
            .flatten()
    })
}

fn size_monotonicity(table: &Table) -> Option<Counterexample> {
    dominated_pairs(table).find_map(|(i, j)| {
        let big: u64 = table.chosen[i].iter().sum();
        let small: u64 = table.chosen[j].iter().sum();
        (big < small)
            .then(|| example(&table.points[i], &table.points[j], format!("|C(z)| = {big} < |C(z')| = {small}")))
            .flatten()
    })
}

fn quota_filling(table: &Table, quota: Option<u64>) -> Option<Counterexample> {
    let Some(q) = quota else {
        let z = vec![0; table.bounds.len()];
        return example(&z, &z, "no quota supplied".into());
    };
    table.points.iter().zip(&table.chosen).find_map(|(z, c)| {
        let size: u64 = c.iter().sum();
        let want = z.iter().sum::<u64>().min(q);
        (size != want)
            .then(|| example(z, c, format!("|C(z)| = {size}, expected {want}")))
            .flatten()
    })
}

fn stationarity(table: &Table) -> Option<Counterexample> {
    let n = table.points.len();
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).find_map(|(i, j)| {
        let (z, zp) = (&table.points[i], &table.points[j]);
        let lhs = table.choice_of(&join(z, zp));
        let rhs = table.choice_of(&join(&table.chosen[i], zp));
        (lhs != rhs)
            .then(|| example(z, zp, format!("C(z ∨ z') = {lhs:?} != C(C(z) ∨ z') = {rhs:?}")))
            .flatten()
    })
}

fn interest_persistence(table: &Table) -> Option<Counterexample> {
    let acceptable = table.acceptable();
    for &i in &acceptable {
        for &j in &acceptable {
            // z = points[i] ≺ z' = points[j]
            if !table.prefers(j, i) {
                continue;
            }
            let (z, zp) = (&table.points[i], &table.points[j]);
            for a in 0..z.len() {
                if z[a] <= zp[a] && !table.interesting(z, a) && table.interesting(zp, a) {
                    return example(z, zp, format!("position {a} becomes interesting"));
                }
            }
        }
    }
    None
}

fn transitivity(table: &Table) -> Option<Counterexample> {
    let acceptable = table.acceptable();
    for &i in &acceptable {
        for &j in &acceptable {
            if !table.prefers(j, i) {
                continue;
            }
            for &k in &acceptable {
                if k != i && table.prefers(k, j) && !table.prefers(k, i) {
                    return example(
                        &table.points[i],
                        &table.points[k],
                        format!("via {:?}", table.points[j]),
                    );
                }
            }
        }
    }
    None
}

/// A chain `z1 ≺ z2 ≺ z3` on which the partner displaced by position
/// `entering` changes and then changes back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GaplessWitness {
    pub chain: [Vec<u64>; 3],
    pub entering: usize,
    pub displaced: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GaplessReport {
    pub acceptable: usize,
    pub violations: u64,
    /// The first `max_witnesses` violations, ordered by entering position,
    /// then middle, first and last vector in lexicographic order.
    pub witnesses: Vec<GaplessWitness>,
}

impl GaplessReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Search every acceptable chain `z1 ≺ z2 ≺ z3` and entering position `a`
/// with tandems `(a, c1)`, `(a, c2)`, `(a, c3)` for a violation `c1 = c3 != c2`.
pub fn check_gapless<F: Fn(&[u64]) -> Vec<u64>>(
    choose: F,
    bounds: &[u64],
    limits: &CheckLimits,
) -> Result<GaplessReport> {
    guard(box_size(bounds), 3, limits.triples)?;
    let table = Table::build(&choose, bounds);
    let acceptable = table.acceptable();
    let m = acceptable.len();
    // below[j] lists acceptable indices (into `acceptable`) strictly preferred less than j
    let mut below = vec![Vec::new(); m];
    let mut above = vec![Vec::new(); m];
    for (x, &i) in acceptable.iter().enumerate() {
        for (y, &j) in acceptable.iter().enumerate() {
            if table.prefers(j, i) {
                below[y].push(x);
                above[x].push(y);
            }
        }
    }
    let k = bounds.len();
    let tandems: Vec<Vec<Option<usize>>> = acceptable
        .iter()
        .map(|&i| (0..k).map(|a| table.tandem(&table.points[i], a)).collect())
        .collect();

    let mut report = GaplessReport {
        acceptable: m,
        violations: 0,
        witnesses: Vec::new(),
    };
    for a in 0..k {
        for mid in 0..m {
            let Some(c2) = tandems[mid][a] else { continue };
            for &lo in &below[mid] {
                let Some(c1) = tandems[lo][a] else { continue };
                if c1 == c2 {
                    continue;
                }
                for &hi in &above[mid] {
                    if tandems[hi][a] != Some(c1) {
                        continue;
                    }
                    report.violations += 1;
                    if report.witnesses.len() < limits.max_witnesses {
                        report.witnesses.push(GaplessWitness {
                            chain: [
                                table.points[acceptable[lo]].clone(),
                                table.points[acceptable[mid]].clone(),
                                table.points[acceptable[hi]].clone(),
                            ],
                            entering: a,
                            displaced: [c1, c2, c1],
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::{choose_by_order, Tableau};

    #[test]
    fn ordered_rule_satisfies_everything() {
        let bounds = [2, 1, 3];
        let report =
            check_axioms(|z: &[u64]| choose_by_order(z, 3), &bounds, Some(3), &Axiom::ALL, &CheckLimits::default())
                .unwrap();
        assert!(report.passed(), "{report:?}");
        let gapless = check_gapless(|z: &[u64]| choose_by_order(z, 3), &bounds, &CheckLimits::default()).unwrap();
        assert!(gapless.passed());
    }

    #[test]
    fn alternating_tableau_satisfies_axioms_but_not_gapless() {
        let t = Tableau::alternating(4).unwrap();
        let bounds = t.heights();
        let report =
            check_axioms(|z: &[u64]| t.choose(z), &bounds, Some(4), &Axiom::ALL, &CheckLimits::default()).unwrap();
        assert!(report.passed(), "{report:?}");
        let gapless = check_gapless(|z: &[u64]| t.choose(z), &bounds, &CheckLimits::default()).unwrap();
        assert!(!gapless.passed());
        let witness = GaplessWitness {
            chain: [vec![0, 2, 2], vec![1, 2, 1], vec![2, 1, 1]],
            entering: 0,
            displaced: [2, 1, 2],
        };
        assert!(gapless.witnesses.contains(&witness));
    }

    #[test]
    fn precheck_catches_expanding_function() {
        let report = check_axioms(
            |z: &[u64]| z.iter().map(|v| v + 1).collect(),
            &[1, 1],
            None,
            &[Axiom::Consistence],
            &CheckLimits::default(),
        )
        .unwrap();
        assert!(!report.passed());
        assert!(report.precheck.is_some());
    }

    #[test]
    fn quota_filling_detects_short_choice() {
        let report = check_axioms(
            |z: &[u64]| choose_by_order(z, 1),
            &[2, 2],
            Some(2),
            &[Axiom::QuotaFilling],
            &CheckLimits::default(),
        )
        .unwrap();
        assert!(report.failure(Axiom::QuotaFilling).is_some());
    }

    #[test]
    fn guard_refuses_large_boxes() {
        let bounds = [9u64; 4];
        let err = check_axioms(|z: &[u64]| z.to_vec(), &bounds, None, &[Axiom::Consistence], &CheckLimits::default());
        assert!(matches!(err, Err(Error::LimitExceeded { .. })));
    }
}
