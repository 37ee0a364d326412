//! The extremal stable assignments and routes between stable assignments.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::choice::Comparison;
use crate::error::{Error, Result};
use crate::market::Market;
use crate::model::{Assignment, Instance, Vertex};
use crate::rotation::{
    displaced_by, max_feasible_weight, rotations_unchecked, shift_unchecked, tandem_holds, weight_feasible, Rotation,
};
use crate::stability::{compare_f, ensure_stable, is_stable, last_edge, worker_load};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Outcome {
    pub x: Assignment,
    /// Bound updates for the iteration, shifts for Stage I and II.
    pub iterations: u64,
}

/// The pseudo-polynomial iteration: workers choose from the current bounds,
/// firms choose from the workers' offers, and rejected amounts lower the
/// bounds until nothing is rejected.
pub fn xmin_ag_iteration(market: &Market) -> Result<Outcome> {
    let inst = market.instance();
    let mut bound = inst.capacities();
    let limit = inst.num_edges() as u64 * inst.max_capacity();
    let mut updates = 0u64;
    loop {
        let mut x = vec![0; inst.num_edges()];
        for w in 0..inst.workers().len() {
            let v = Vertex::Worker(w);
            let list = inst.incident(v);
            let offer: Vec<u64> = list.iter().map(|&e| bound[e]).collect();
            for (&e, value) in list.iter().zip(market.choose(v, &offer)) {
                x[e] = value;
            }
        }
        let mut y = vec![0; inst.num_edges()];
        for f in 0..inst.firms().len() {
            let v = Vertex::Firm(f);
            let list = inst.incident(v);
            let offer: Vec<u64> = list.iter().map(|&e| x[e]).collect();
            for (&e, value) in list.iter().zip(market.choose(v, &offer)) {
                y[e] = value;
            }
        }
        if x == y {
            let x = Assignment(x);
            ensure_stable(market, &x).map_err(|e| Error::invariant(format!("iteration ended unstable: {e}")))?;
            return Ok(Outcome { x, iterations: updates });
        }
        for e in 0..inst.num_edges() {
            if y[e] < x[e] {
                bound[e] = y[e];
            }
        }
        updates += 1;
        if updates > limit {
            return Err(Error::invariant(format!("bound vector decreased more than |E|·b^max = {limit} times")));
        }
    }
}

/// Least stable assignment for the firms.
pub fn xmin(market: &Market) -> Result<Assignment> {
    Ok(xmin_ag_iteration(market)?.x)
}

fn step_budget(inst: &Instance) -> u64 {
    let e = inst.num_edges() as u64 + 1;
    10_000 + e * e * (inst.max_capacity() + 1) * (inst.num_vertices() as u64 + 1)
}

/// `ℓ_w` and the first edge at or after it that is interesting for its firm.
fn stage1_admissible(market: &Market, x: &Assignment, w: usize) -> Option<usize> {
    let inst = market.instance();
    let last = last_edge(inst, x, w)?;
    let from = inst.position(Vertex::Worker(w), last);
    inst.incident(Vertex::Worker(w))[from..]
        .iter()
        .copied()
        .find(|&e| market.interesting(Vertex::Firm(inst.edge(e).firm), x, e))
}

/// Box, worker quotas, firm acceptability, and no edge preferred to `ℓ_w`
/// interesting for its firm.
fn stage1_invariant(market: &Market, x: &Assignment) -> bool {
    let inst = market.instance();
    if inst.check_box(x).is_err() {
        return false;
    }
    for w in 0..inst.workers().len() {
        if worker_load(inst, x, w) > inst.worker_quota(w) {
            return false;
        }
    }
    if !(0..inst.firms().len()).all(|f| market.accepts(Vertex::Firm(f), x)) {
        return false;
    }
    (0..inst.workers().len()).all(|w| {
        let Some(last) = last_edge(inst, x, w) else { return true };
        let to = inst.position(Vertex::Worker(w), last);
        inst.incident(Vertex::Worker(w))[..to]
            .iter()
            .all(|&e| !market.interesting(Vertex::Firm(inst.edge(e).firm), x, e))
    })
}

/// `C_f(x_f + μ·1^a) = x_f + μ·1^a`.
fn accepts_whole(market: &Market, x: &Assignment, a: usize, mu: u64) -> bool {
    let f = Vertex::Firm(market.instance().edge(a).firm);
    market.choose_shifted(f, x, &[(a, mu as i64)]).is_some_and(|(z, chosen)| z == chosen)
}

/// Largest `μ` in `[1, cap]` with `ok(μ)`, given `ok(1)`, by bisection.
fn bisect(cap: u64, mut ok: impl FnMut(u64) -> Result<bool>) -> Result<u64> {
    let (mut lo, mut hi) = (1, cap + 1);
    while hi - lo > 1 {
        let mu = lo + (hi - lo) / 2;
        if ok(mu)? {
            lo = mu;
        } else {
            hi = mu;
        }
    }
    Ok(lo)
}

/// Stage I: grow from zero along admissible paths and cycles until no
/// deficit worker has an admissible edge.
pub fn stage1_find_stable(market: &Market) -> Result<Outcome> {
    let inst = market.instance();
    let nw = inst.workers().len();
    let mut x = inst.zero();
    let budget = step_budget(inst);
    let mut iterations = 0;
    loop {
        let admissible: Vec<Option<usize>> = (0..nw).map(|w| stage1_admissible(market, &x, w)).collect();
        let start = (0..nw).find(|&w| worker_load(inst, &x, w) < inst.worker_quota(w) && admissible[w].is_some());
        let Some(start) = start else {
            ensure_stable(market, &x).map_err(|e| Error::invariant(format!("Stage I ended unstable: {e}")))?;
            return Ok(Outcome { x, iterations });
        };
        iterations += 1;
        if iterations > budget {
            return Err(Error::BudgetExhausted(budget));
        }

        let mut path: Vec<(usize, Option<usize>)> = Vec::new();
        let mut seen: HashMap<usize, usize> = HashMap::new();
        let mut w = start;
        let (from, is_cycle) = loop {
            seen.insert(w, path.len());
            let a = admissible[w].expect("path workers have admissible edges");
            let c = displaced_by(market, &x, a, 1);
            path.push((a, c));
            let Some(c) = c else { break (0, false) };
            let next = inst.edge(c).worker;
            if let Some(&i) = seen.get(&next) {
                break (i, true);
            }
            if admissible[next].is_none() {
                break (0, false);
            }
            w = next;
        };
        let used = &path[from..];
        let plus: Vec<usize> = used.iter().map(|&(a, _)| a).collect();
        let minus: Vec<usize> = used.iter().filter_map(|&(_, c)| c).collect();
        let mut cap = plus
            .iter()
            .map(|&a| inst.edge(a).capacity - x.get(a))
            .chain(minus.iter().map(|&c| x.get(c)))
            .min()
            .unwrap_or(0);
        if !is_cycle {
            cap = cap.min(inst.worker_quota(start) - worker_load(inst, &x, start));
        }
        let shifted = |mu: u64| inst.shift(&x, &plus, &minus, mu);
        let good = |mu: u64| -> Result<bool> {
            let tandems = used.iter().all(|&(a, c)| match c {
                Some(c) => tandem_holds(market, &x, a, c, mu),
                None => accepts_whole(market, &x, a, mu),
            });
            Ok(tandems
                && match shifted(mu) {
                    Ok(y) => stage1_invariant(market, &y),
                    Err(_) => false,
                })
        };
        if cap == 0 || !good(1)? {
            return Err(Error::invariant("Stage I unit shift breaks its invariants"));
        }
        let tau = bisect(cap, good)?;
        x = shifted(tau)?;
    }
}

/// Edge sets for reversing rotations at a stable `x`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReversalSets {
    /// `ℓ_w` for each fully filled worker with positive quota.
    pub minus: BTreeMap<usize, usize>,
    /// Unsaturated edges strictly preferred to `ℓ_w`, per fully filled worker.
    pub plus: BTreeMap<usize, Vec<usize>>,
}

impl ReversalSets {
    pub fn new(inst: &Instance, x: &Assignment) -> Self {
        let mut sets = ReversalSets::default();
        for w in 0..inst.workers().len() {
            let q = inst.worker_quota(w);
            if q == 0 || worker_load(inst, x, w) != q {
                continue;
            }
            let last = last_edge(inst, x, w).expect("filled worker has edges");
            let to = inst.position(Vertex::Worker(w), last);
            let up = inst.incident(Vertex::Worker(w))[..to]
                .iter()
                .copied()
                .filter(|&e| x.get(e) < inst.edge(e).capacity)
                .collect();
            sets.minus.insert(w, last);
            sets.plus.insert(w, up);
        }
        sets
    }

    pub fn firm_minus(&self, inst: &Instance, f: usize) -> Vec<usize> {
        self.minus.values().copied().filter(|&e| inst.edge(e).firm == f).collect()
    }

    pub fn firm_plus(&self, inst: &Instance, f: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.plus.values().flatten().copied().filter(|&e| inst.edge(e).firm == f).collect();
        out.sort_unstable();
        out
    }
}

/// Essential legal pairs `(c, a)` at firm `f`: `x_f + 1^c − 1^a` is
/// acceptable and leaves no other edge of `f` that its worker finds
/// interesting under `x` interesting for `f`.
///
/// Besides `U_f^+`, this rules out edges of workers below their quota, which
/// would otherwise block the shifted assignment.
pub fn essential_f_pairs(market: &Market, x: &Assignment, sets: &ReversalSets, f: usize) -> Vec<(usize, usize)> {
    let inst = market.instance();
    let v = Vertex::Firm(f);
    let ev = market.evaluator(v);
    let plus = sets.firm_plus(inst, f);
    let wanted: Vec<usize> = inst
        .incident(v)
        .iter()
        .copied()
        .filter(|&d| market.interesting(Vertex::Worker(inst.edge(d).worker), x, d))
        .collect();
    let mut out = Vec::new();
    for a in sets.firm_minus(inst, f) {
        for &c in &plus {
            let mut z = inst.local(x, v);
            z[inst.position(v, c)] += 1;
            z[inst.position(v, a)] -= 1;
            if !ev.is_acceptable(&z) {
                continue;
            }
            let essential = wanted
                .iter()
                .filter(|&&d| d != c)
                .all(|&d| !ev.is_interesting(&z, inst.position(v, d)));
            if essential {
                out.push((c, a));
            }
        }
    }
    out
}

/// A legal cycle of `G(x)` as its essential pairs `(c_i, a_i)` in order, where
/// `a_i` and `c_{i+1}` share a worker.
pub fn find_legal_cycle(market: &Market, x: &Assignment) -> Option<Vec<(usize, usize)>> {
    let inst = market.instance();
    let sets = ReversalSets::new(inst, x);
    // nodes: 2e for the worker copy of edge e, 2e + 1 for the firm copy
    let mut succ: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&w, &a) in &sets.minus {
        succ.entry(2 * a + 1).or_default().push(2 * a);
        for &c in &sets.plus[&w] {
            succ.entry(2 * a).or_default().push(2 * c);
            succ.entry(2 * c).or_default().push(2 * c + 1);
        }
    }
    for f in 0..inst.firms().len() {
        for (c, a) in essential_f_pairs(market, x, &sets, f) {
            succ.entry(2 * c + 1).or_default().push(2 * a + 1);
        }
    }
    for list in succ.values_mut() {
        list.sort_unstable();
        list.dedup();
    }

    let cycle = find_cycle(&succ)?;
    // rotate so the cycle starts at a worker copy of some c
    let start = cycle
        .iter()
        .position(|&n| n % 2 == 0 && sets.plus.values().any(|l| l.contains(&(n / 2))))
        .expect("legal cycles pass a positive edge");
    let nodes: Vec<usize> = cycle[start..].iter().chain(&cycle[..start]).copied().collect();
    // pattern: w^c, f^c, f^a, w^a, ...
    Some(nodes.chunks_exact(4).map(|q| (q[0] / 2, q[2] / 2)).collect())
}

/// Deterministic DFS for a simple directed cycle.
fn find_cycle(succ: &BTreeMap<usize, Vec<usize>>) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut mark: HashMap<usize, Mark> = HashMap::new();
    for &root in succ.keys() {
        if mark.contains_key(&root) {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark.insert(root, Mark::Open);
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            let children = succ.get(&node).map(Vec::as_slice).unwrap_or(&[]);
            if let Some(&child) = children.get(*next) {
                *next += 1;
                match mark.get(&child) {
                    Some(Mark::Open) => {
                        let at = stack.iter().position(|&(n, _)| n == child).expect("open node on stack");
                        return Some(stack[at..].iter().map(|&(n, _)| n).collect());
                    }
                    Some(Mark::Done) => {}
                    None => {
                        mark.insert(child, Mark::Open);
                        stack.push((child, 0));
                    }
                }
            } else {
                mark.insert(node, Mark::Done);
                stack.pop();
            }
        }
    }
    None
}

/// The rotation at `x'` whose application undoes the legal cycle.
fn reversed_rotation(inst: &Instance, pairs: &[(usize, usize)]) -> Rotation {
    let tandems: Vec<(usize, usize)> = pairs.iter().rev().map(|&(c, a)| (a, c)).collect();
    Rotation::from_cycle(inst, &tandems)
}

/// Stage II: descend from a stable `x` along reversed rotations until `G(x)`
/// has no cycle.
///
/// The weight of each step is the largest `μ` for which the shifted point is
/// stable and has the reversed cycle as a rotation with feasible weight `μ`;
/// shifting back along a rotation keeps its active graph, so this predicate
/// is monotone in `μ`.
pub fn stage2_descend_to_xmin(market: &Market, x: &Assignment) -> Result<Outcome> {
    let inst = market.instance();
    ensure_stable(market, x)?;
    let mut x = x.clone();
    let budget = step_budget(inst);
    let mut iterations = 0;
    while let Some(pairs) = find_legal_cycle(market, &x) {
        iterations += 1;
        if iterations > budget {
            return Err(Error::BudgetExhausted(budget));
        }
        let plus: Vec<usize> = pairs.iter().map(|&(c, _)| c).collect();
        let minus: Vec<usize> = pairs.iter().map(|&(_, a)| a).collect();
        let back = reversed_rotation(inst, &pairs);
        let cap = plus
            .iter()
            .map(|&c| inst.edge(c).capacity - x.get(c))
            .chain(minus.iter().map(|&a| x.get(a)))
            .min()
            .unwrap_or(0);
        let good = |mu: u64| -> Result<bool> {
            let Ok(y) = inst.shift(&x, &plus, &minus, mu) else { return Ok(false) };
            if !is_stable(market, &y) {
                return Ok(false);
            }
            Ok(rotations_unchecked(market, &y)?.contains(&back) && weight_feasible(market, &y, &back, mu))
        };
        if cap == 0 || !good(1)? {
            return Err(Error::invariant(format!(
                "legal cycle {} does not reverse a rotation",
                back.label(inst)
            )));
        }
        let tau = bisect(cap, good)?;
        let y = inst.shift(&x, &plus, &minus, tau)?;
        if cfg!(debug_assertions) && compare_f(market, &y, &x)? != Comparison::Less {
            return Err(Error::invariant("Stage II step does not descend"));
        }
        x = y;
    }
    Ok(Outcome { x, iterations })
}

/// Rotation choice when several apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Smallest,
    Largest,
    Seeded(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteStep {
    pub rotation: Rotation,
    pub weight: u64,
    pub tau: u64,
    pub after: Assignment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub start: Assignment,
    pub steps: Vec<RouteStep>,
}

impl Route {
    pub fn new(start: Assignment) -> Self {
        Route { start, steps: Vec::new() }
    }

    pub fn end(&self) -> &Assignment {
        self.steps.last().map_or(&self.start, |s| &s.after)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `(rotation, weight)` for every step, as a sorted multiset.
    pub fn pairs(&self) -> Vec<(Rotation, u64)> {
        let mut out: Vec<(Rotation, u64)> = self.steps.iter().map(|s| (s.rotation.clone(), s.weight)).collect();
        out.sort();
        out
    }

    pub fn to_json(&self, inst: &Instance) -> serde_json::Value {
        serde_json::json!({
            "start": inst.assignment_json(&self.start),
            "end": inst.assignment_json(self.end()),
            "length": self.len(),
            "steps": self.steps.iter().map(|s| serde_json::json!({
                "rotation": s.rotation.label(inst),
                "plus": inst.edge_names(&s.rotation.plus_edges()),
                "minus": inst.edge_names(&s.rotation.minus_edges()),
                "weight": s.weight,
                "tau": s.tau,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Route monitors: length bounds, repeated rotations under the gapless
/// condition, and the per-rotation oracle budget of the weight search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Monitor {
    pub gapless: bool,
    /// The gapless condition was verified rather than assumed, so a
    /// repeated rotation is an internal contradiction.
    pub proven: bool,
}

impl Monitor {
    pub fn general() -> Self {
        Monitor { gapless: false, proven: false }
    }

    fn length_limit(&self, inst: &Instance) -> u64 {
        let e = inst.num_edges() as u64;
        if self.gapless {
            inst.num_vertices() as u64 * e * e
        } else {
            inst.max_capacity().max(1) * e * e
        }
    }
}

/// Continue `route` with maximal weights, letting `pick` choose among the
/// rotations of the current end (`None` stops).
pub fn extend_route(
    market: &Market,
    route: &mut Route,
    monitor: &Monitor,
    mut pick: impl FnMut(&Assignment, &[Rotation]) -> Option<usize>,
) -> Result<()> {
    let inst = market.instance();
    let limit = monitor.length_limit(inst);
    let mut used: BTreeSet<Rotation> = route.steps.iter().map(|s| s.rotation.clone()).collect();
    loop {
        let x = route.end().clone();
        let available = rotations_unchecked(market, &x)?;
        if available.is_empty() {
            return Ok(());
        }
        let Some(i) = pick(&x, &available) else { return Ok(()) };
        let rotation = &available[i];
        let weighted = max_feasible_weight(market, &x, rotation)?;
        let budget = weighted.call_budget(inst.max_capacity());
        if weighted.search_calls > budget {
            return Err(Error::invariant(format!(
                "weight search for {} used {} oracle calls, budget {budget}",
                rotation.label(inst),
                weighted.search_calls
            )));
        }
        if monitor.gapless && !used.insert(rotation.clone()) {
            let msg = format!("rotation {} occurs twice in a non-excessive route", rotation.label(inst));
            return Err(if monitor.proven { Error::invariant(msg) } else { Error::GaplessViolated(msg) });
        }
        let after = shift_unchecked(market, &x, rotation, weighted.tau)?;
        route.steps.push(RouteStep {
            rotation: rotation.clone(),
            weight: weighted.tau,
            tau: weighted.tau,
            after,
        });
        if route.len() as u64 >= limit.max(1) {
            return Err(Error::invariant(format!("route reached {} steps, bound {limit}", route.len())));
        }
    }
}

/// A non-excessive route from `start` to the maximum.
pub fn route_from(market: &Market, start: Assignment, policy: Policy, monitor: &Monitor) -> Result<Route> {
    let mut route = Route::new(start);
    let mut rng = match policy {
        Policy::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    extend_route(market, &mut route, monitor, |_, avail| {
        Some(match policy {
            Policy::Smallest => 0,
            Policy::Largest => avail.len() - 1,
            Policy::Seeded(_) => rng.as_mut().expect("seeded").gen_range(0..avail.len()),
        })
    })?;
    Ok(route)
}

/// A full route from the minimum to the maximum.
pub fn build_full_route(market: &Market, policy: Policy, monitor: &Monitor) -> Result<Route> {
    route_from(market, xmin(market)?, policy, monitor)
}

/// Greatest stable assignment for the firms.
pub fn xmax(market: &Market, monitor: &Monitor) -> Result<Assignment> {
    Ok(build_full_route(market, Policy::Smallest, monitor)?.end().clone())
}

/// A non-excessive route from `start` to `target`, choosing at each step
/// the first rotation that stays below the target with the largest weight
/// that does.
pub fn route_towards(market: &Market, start: Assignment, target: &Assignment) -> Result<Route> {
    let inst = market.instance();
    let mut route = Route::new(start);
    let limit = inst.max_capacity().max(1) * (inst.num_edges() as u64).pow(2) + 1;
    while route.end() != target {
        let x = route.end().clone();
        let below = |y: &Assignment| -> Result<bool> { Ok(compare_f(market, y, target)?.is_le()) };
        let mut moved = false;
        for rotation in rotations_unchecked(market, &x)? {
            let tau = max_feasible_weight(market, &x, &rotation)?.tau;
            let shifted = |mu: u64| inst.shift(&x, &rotation.plus_edges(), &rotation.minus_edges(), mu);
            if !below(&shifted(1)?)? {
                continue;
            }
            let weight = bisect(tau, |mu| below(&shifted(mu)?))?;
            let after = shifted(weight)?;
            route.steps.push(RouteStep { rotation, weight, tau, after });
            moved = true;
            break;
        }
        if !moved {
            return Err(Error::invariant("no rotation leads towards a stable assignment above the start"));
        }
        if route.len() as u64 > limit {
            return Err(Error::invariant("route towards target exceeds its length bound"));
        }
    }
    Ok(route)
}
