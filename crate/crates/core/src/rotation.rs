//! Auxiliary and active graphs, rotations, maximal feasible weights and
//! termination events.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::Market;
use crate::model::{Assignment, Instance, Vertex};
use crate::stability::{ensure_stable, last_edge, worker_load};

/// `D(x)`: W-admissible edges per worker, and for each the displaced partner
/// at its firm (`None` when the firm takes the extra unit without
/// displacing anything).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxiliaryGraph {
    pub admissible: Vec<Option<usize>>,
    pub partner: Vec<Option<usize>>,
}

impl AuxiliaryGraph {
    /// Live tandems `(a, c)`, ordered by the worker of `a`.
    pub fn tandems(&self) -> Vec<(usize, usize)> {
        self.admissible
            .iter()
            .zip(&self.partner)
            .filter_map(|(a, c)| Some(((*a)?, (*c)?)))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.admissible.iter().all(Option::is_none)
    }
}

/// `Γ(x)`: the balanced remainder of `D(x)`, as its tandems.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActiveGraph {
    /// `(a, c)` for every remaining worker, ordered by the worker of `a`.
    pub tandems: Vec<(usize, usize)>,
}

impl ActiveGraph {
    pub fn workers(&self, inst: &Instance) -> BTreeSet<usize> {
        self.tandems.iter().map(|&(a, _)| inst.edge(a).worker).collect()
    }

    pub fn firms(&self, inst: &Instance) -> BTreeSet<usize> {
        self.tandems.iter().map(|&(a, _)| inst.edge(a).firm).collect()
    }

    pub fn to_dot(&self, inst: &Instance) -> String {
        let mut out = String::from("digraph active {\n");
        for w in self.workers(inst) {
            out.push_str(&format!("  \"{}\" [shape=box];\n", inst.workers()[w]));
        }
        for f in self.firms(inst) {
            out.push_str(&format!("  \"{}\" [shape=ellipse];\n", inst.firms()[f]));
        }
        for &(a, c) in &self.tandems {
            let (ea, ec) = (inst.edge(a), inst.edge(c));
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [label=\"{}\"];\n  \"{}\" -> \"{}\" [label=\"{}\", style=dashed];\n",
                inst.workers()[ea.worker],
                inst.firms()[ea.firm],
                ea.id,
                inst.firms()[ec.firm],
                inst.workers()[ec.worker],
                ec.id
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// An edge-simple alternating cycle of `Γ(x)`.
///
/// Stored as its tandems `(a_1, c_1), (a_2, c_2), …` in cycle order, where
/// `a_i` is a positive edge, `c_i` its displaced partner at the same firm
/// and `c_i` shares its worker with `a_{i+1}`. The first tandem is the one
/// whose positive edge has the smallest worker index, which makes the
/// flattened edge sequence a canonical key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Rotation {
    key: Vec<usize>,
}

impl Rotation {
    /// Build from tandems in cycle order, rotating to the canonical start.
    pub fn from_cycle(inst: &Instance, tandems: &[(usize, usize)]) -> Self {
        let start = (0..tandems.len())
            .min_by_key(|&i| inst.edge(tandems[i].0).worker)
            .unwrap_or(0);
        let key = tandems[start..]
            .iter()
            .chain(&tandems[..start])
            .flat_map(|&(a, c)| [a, c])
            .collect();
        Rotation { key }
    }

    /// Flattened `[a_1, c_1, a_2, c_2, …]`.
    pub fn key(&self) -> &[usize] {
        &self.key
    }

    pub fn tandems(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.key.chunks_exact(2).map(|p| (p[0], p[1]))
    }

    pub fn plus_edges(&self) -> Vec<usize> {
        self.key.iter().step_by(2).copied().collect()
    }

    pub fn minus_edges(&self) -> Vec<usize> {
        self.key.iter().skip(1).step_by(2).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.key.is_empty()
    }

    pub fn tandems_by_firm(&self, inst: &Instance) -> BTreeMap<usize, Vec<(usize, usize)>> {
        let mut map: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for (a, c) in self.tandems() {
            map.entry(inst.edge(a).firm).or_default().push((a, c));
        }
        map
    }

    /// The edge ids along the cycle, e.g. `(a1,d2,a2,d3,a3,d1)`.
    pub fn label(&self, inst: &Instance) -> String {
        format!("({})", inst.edge_names(&self.key).join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WeightedRotation {
    pub rotation: Rotation,
    pub tau: u64,
    /// Oracle calls spent by the bisection, after the weight-1 check.
    pub search_calls: u64,
}

impl WeightedRotation {
    /// `tandems · ⌈log2 b^max⌉ + 2`.
    pub fn call_budget(&self, max_capacity: u64) -> u64 {
        let log = u64::from(64 - max_capacity.saturating_sub(1).leading_zeros());
        (self.rotation.len() as u64 / 2) * log + 2
    }
}

/// `D(x)` for a stable `x`.
pub fn build_auxiliary(market: &Market, x: &Assignment) -> Result<AuxiliaryGraph> {
    ensure_stable(market, x)?;
    Ok(auxiliary_unchecked(market, x))
}

pub(crate) fn auxiliary_unchecked(market: &Market, x: &Assignment) -> AuxiliaryGraph {
    let inst = market.instance();
    let nw = inst.workers().len();
    let mut admissible = vec![None; nw];
    let mut partner = vec![None; nw];
    for w in 0..nw {
        let q = inst.worker_quota(w);
        if q == 0 || worker_load(inst, x, w) != q {
            continue;
        }
        let list = inst.incident(Vertex::Worker(w));
        let Some(last) = last_edge(inst, x, w) else { continue };
        let from = inst.position(Vertex::Worker(w), last);
        let found = list[from..]
            .iter()
            .copied()
            .find(|&e| market.interesting(Vertex::Firm(inst.edge(e).firm), x, e));
        if let Some(a) = found {
            admissible[w] = Some(a);
            partner[w] = displaced_by(market, x, a, 1);
        }
    }
    AuxiliaryGraph { admissible, partner }
}

/// The edge `c` with `C_f(x_f + μ·1^a) = x_f + μ·1^a − μ·1^c`, if any.
pub(crate) fn displaced_by(market: &Market, x: &Assignment, a: usize, mu: u64) -> Option<usize> {
    let inst = market.instance();
    let f = Vertex::Firm(inst.edge(a).firm);
    let (z, chosen) = market.choose_shifted(f, x, &[(a, mu as i64)])?;
    let list = inst.incident(f);
    let pa = inst.position(f, a);
    if chosen[pa] != z[pa] {
        return None;
    }
    let mut lost = None;
    for (pos, (&c, &u)) in chosen.iter().zip(&z).enumerate() {
        if c == u {
            continue;
        }
        if c + mu != u || lost.is_some() {
            return None;
        }
        lost = Some(list[pos]);
    }
    lost
}

/// Whether `C_f(x_f + μ·1^a) = x_f + μ·1^a − μ·1^c`.
pub(crate) fn tandem_holds(market: &Market, x: &Assignment, a: usize, c: usize, mu: u64) -> bool {
    let inst = market.instance();
    let f = Vertex::Firm(inst.edge(a).firm);
    let Some((mut z, chosen)) = market.choose_shifted(f, x, &[(a, mu as i64)]) else {
        return false;
    };
    let pc = inst.position(f, c);
    if z[pc] < mu {
        return false;
    }
    z[pc] -= mu;
    chosen == z
}

/// Order in which the cleaning work-queue visits workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CleanOrder {
    Forward,
    Reverse,
}

/// Run the cleaning procedure to its fixpoint and check balancedness.
pub fn clean(inst: &Instance, aux: &AuxiliaryGraph) -> Result<ActiveGraph> {
    clean_with(inst, aux, CleanOrder::Forward)
}

pub fn clean_with(inst: &Instance, aux: &AuxiliaryGraph, order: CleanOrder) -> Result<ActiveGraph> {
    let nw = aux.admissible.len();
    let mut alive: Vec<bool> = aux.admissible.iter().map(Option::is_some).collect();
    // live tandems using each F-admissible edge
    let mut uses: BTreeMap<usize, usize> = BTreeMap::new();
    for w in 0..nw {
        if let (Some(_), Some(c)) = (aux.admissible[w], aux.partner[w]) {
            *uses.entry(c).or_default() += 1;
        }
    }
    let mut entering = vec![0usize; nw];
    for &c in uses.keys() {
        entering[inst.edge(c).worker] += 1;
    }
    let mut queue: Vec<usize> = match order {
        CleanOrder::Forward => (0..nw).rev().collect(),
        CleanOrder::Reverse => (0..nw).collect(),
    };
    while let Some(w) = queue.pop() {
        if !alive[w] || entering[w] > 0 {
            continue;
        }
        alive[w] = false;
        let Some(c) = aux.partner[w] else { continue };
        let count = uses.get_mut(&c).expect("partner is counted");
        *count -= 1;
        if *count == 0 {
            uses.remove(&c);
            let u = inst.edge(c).worker;
            entering[u] -= 1;
            if entering[u] == 0 && alive[u] {
                queue.push(u);
            }
        }
    }

    let mut tandems = Vec::new();
    for w in 0..nw {
        if !alive[w] {
            if entering[w] > 0 {
                return Err(Error::invariant(format!(
                    "worker `{}` keeps an entering edge but has no leaving edge after cleaning",
                    inst.workers()[w]
                )));
            }
            continue;
        }
        let a = aux.admissible[w].expect("alive workers have an admissible edge");
        let c = aux.partner[w].ok_or_else(|| {
            Error::invariant(format!("tandem-less edge `{}` survived cleaning", inst.edge(a).id))
        })?;
        if entering[w] != 1 {
            return Err(Error::invariant(format!(
                "worker `{}` has {} entering edges after cleaning",
                inst.workers()[w],
                entering[w]
            )));
        }
        tandems.push((a, c));
    }
    if uses.values().any(|&n| n != 1) {
        return Err(Error::invariant("tandems at a firm share a displaced edge after cleaning"));
    }
    Ok(ActiveGraph { tandems })
}

/// Decompose `Γ(x)` into its rotations, sorted by canonical key.
pub fn extract_rotations(inst: &Instance, gamma: &ActiveGraph) -> Result<Vec<Rotation>> {
    let by_worker: BTreeMap<usize, (usize, usize)> =
        gamma.tandems.iter().map(|&(a, c)| (inst.edge(a).worker, (a, c))).collect();
    let mut seen = BTreeSet::new();
    let mut rotations = Vec::new();
    for &start in by_worker.keys() {
        if seen.contains(&start) {
            continue;
        }
        let mut cycle = Vec::new();
        let mut w = start;
        loop {
            if !seen.insert(w) {
                if w != start {
                    return Err(Error::invariant("active graph is not a union of cycles"));
                }
                break;
            }
            let &(a, c) = by_worker
                .get(&w)
                .ok_or_else(|| Error::invariant("displaced edge leads to a worker outside the active graph"))?;
            cycle.push((a, c));
            w = inst.edge(c).worker;
        }
        rotations.push(Rotation::from_cycle(inst, &cycle));
    }
    rotations.sort();
    Ok(rotations)
}

/// `L(x)` for a stable `x`.
pub fn rotations(market: &Market, x: &Assignment) -> Result<Vec<Rotation>> {
    let aux = build_auxiliary(market, x)?;
    extract_rotations(market.instance(), &clean(market.instance(), &aux)?)
}

pub(crate) fn rotations_unchecked(market: &Market, x: &Assignment) -> Result<Vec<Rotation>> {
    let aux = auxiliary_unchecked(market, x);
    extract_rotations(market.instance(), &clean(market.instance(), &aux)?)
}

/// Box bound `ν_0` from conditions (a) and (b) of feasibility.
pub fn box_bound(inst: &Instance, x: &Assignment, rotation: &Rotation) -> u64 {
    rotation
        .tandems()
        .map(|(a, c)| (inst.edge(a).capacity - x.get(a)).min(x.get(c)))
        .min()
        .unwrap_or(0)
}

/// Condition (c) of feasibility at weight `mu`.
pub fn weight_feasible(market: &Market, x: &Assignment, rotation: &Rotation, mu: u64) -> bool {
    mu <= box_bound(market.instance(), x, rotation)
        && rotation.tandems().all(|(a, c)| tandem_holds(market, x, a, c, mu))
}

/// Maximal feasible weight by bisection.
///
/// The upper end starts one past the box bound, where feasibility is known
/// to fail, so every probe halves the open interval and no final probe is
/// needed.
pub fn max_feasible_weight(market: &Market, x: &Assignment, rotation: &Rotation) -> Result<WeightedRotation> {
    let inst = market.instance();
    if rotation.is_empty() || !weight_feasible(market, x, rotation, 1) {
        return Err(Error::NotARotation(rotation.label(inst)));
    }
    let before = market.firm_oracle_calls();
    let mut lo = 1;
    let mut hi = box_bound(inst, x, rotation) + 1;
    while hi - lo > 1 {
        let mu = lo + (hi - lo) / 2;
        if rotation.tandems().all(|(a, c)| tandem_holds(market, x, a, c, mu)) {
            lo = mu;
        } else {
            hi = mu;
        }
    }
    Ok(WeightedRotation {
        rotation: rotation.clone(),
        tau: lo,
        search_calls: market.firm_oracle_calls() - before,
    })
}

/// Largest `μ` such that every weight in `1..=μ` is feasible (0 if none).
pub fn max_feasible_weight_scan(market: &Market, x: &Assignment, rotation: &Rotation) -> u64 {
    let bound = box_bound(market.instance(), x, rotation);
    (1..=bound)
        .take_while(|&mu| rotation.tandems().all(|(a, c)| tandem_holds(market, x, a, c, mu)))
        .last()
        .unwrap_or(0)
}

/// Shift `x` along `rotation` with `weight <= τ`.
pub fn apply_rotation(market: &Market, x: &Assignment, rotation: &Rotation, weight: u64) -> Result<Assignment> {
    if !rotations(market, x)?.contains(rotation) {
        return Err(Error::NotARotation(rotation.label(market.instance())));
    }
    let tau = max_feasible_weight(market, x, rotation)?.tau;
    if weight == 0 || weight > tau {
        return Err(Error::WeightTooLarge { weight, tau });
    }
    shift_unchecked(market, x, rotation, weight)
}

pub(crate) fn shift_unchecked(market: &Market, x: &Assignment, rotation: &Rotation, weight: u64) -> Result<Assignment> {
    let y = market
        .instance()
        .shift(x, &rotation.plus_edges(), &rotation.minus_edges(), weight)
        .map_err(|e| Error::invariant(format!("feasible shift left the box: {e}")))?;
    #[cfg(debug_assertions)]
    ensure_stable(market, &y).map_err(|e| Error::invariant(format!("shift along a rotation lost stability: {e}")))?;
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Event {
    /// A negative edge drops to 0.
    I,
    /// A positive edge becomes saturated.
    II,
    /// A tandem with slack left breaks.
    III,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventWitness {
    pub event: Event,
    /// Edge for I and II; the positive edge of the broken tandem for III.
    pub edge: usize,
    pub partner: Option<usize>,
}

/// Which events happen when shifting with the full weight `tau`.
pub fn classify_events(market: &Market, x: &Assignment, rotation: &Rotation, tau: u64) -> Result<Vec<EventWitness>> {
    let inst = market.instance();
    let y = inst.shift(x, &rotation.plus_edges(), &rotation.minus_edges(), tau)?;
    let mut events = Vec::new();
    for c in rotation.minus_edges() {
        if y.get(c) == 0 {
            events.push(EventWitness { event: Event::I, edge: c, partner: None });
        }
    }
    for a in rotation.plus_edges() {
        if y.get(a) == inst.edge(a).capacity {
            events.push(EventWitness { event: Event::II, edge: a, partner: None });
        }
    }
    for (a, c) in rotation.tandems() {
        let slack = (inst.edge(a).capacity - x.get(a)).min(x.get(c));
        if tau < slack && !tandem_holds(market, &y, a, c, 1) {
            events.push(EventWitness { event: Event::III, edge: a, partner: Some(c) });
        }
    }
    if events.is_empty() {
        return Err(Error::invariant(format!(
            "full-weight shift along {} triggers no termination event",
            rotation.label(inst)
        )));
    }
    Ok(events)
}
