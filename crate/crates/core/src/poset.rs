//! The rotation poset, closed functions and the minimum-cost stable
//! assignment.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::choice::axioms::{check_gapless, CheckLimits, GaplessWitness};
use crate::cost::{CostVector, Decimal};
use crate::error::{Error, Result};
use crate::flow::{Capacity, FlowNetwork};
use crate::lattice::{build_full_route, extend_route, route_towards, Monitor, Policy, Route, RouteStep};
use crate::market::Market;
use crate::model::{Assignment, FirmChoice, Instance, Vertex};
use crate::rotation::{apply_rotation, max_feasible_weight, rotations_unchecked, shift_unchecked, Rotation};
use crate::stability::ensure_stable;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum GaplessStatus {
    Holds,
    Violated { firm: String, witness: GaplessWitness },
    /// The boxes of these firms are too large to check.
    Unknown { firms: Vec<String> },
}

/// Whether every firm's choice function satisfies the gapless condition.
/// Linear firms pass without a search.
pub fn gapless_status(inst: &Instance, limits: &CheckLimits) -> Result<GaplessStatus> {
    let mut unknown = Vec::new();
    for f in 0..inst.firms().len() {
        let v = Vertex::Firm(f);
        let bounds = inst.bounds(v);
        if matches!(inst.firm_choice(f), FirmChoice::Linear { .. }) {
            continue;
        }
        let ev = inst.evaluator(v);
        match check_gapless(|z| ev.eval(z), &bounds, limits) {
            Ok(report) => {
                if let Some(w) = report.witnesses.into_iter().next() {
                    return Ok(GaplessStatus::Violated { firm: inst.firms()[f].clone(), witness: w });
                }
            }
            Err(Error::LimitExceeded { .. }) => unknown.push(inst.firms()[f].clone()),
            Err(e) => return Err(e),
        }
    }
    Ok(if unknown.is_empty() { GaplessStatus::Holds } else { GaplessStatus::Unknown { firms: unknown } })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosetMode {
    Gapless,
    General,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PosetElement {
    pub rotation: Rotation,
    /// 0-based; always 0 in gapless mode.
    pub occurrence: usize,
    pub tau: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationPoset {
    pub mode: PosetMode,
    pub elements: Vec<PosetElement>,
    /// `(i, j)`: element `i` immediately precedes element `j`.
    pub hasse_edges: Vec<(usize, usize)>,
    pub xmin: Assignment,
    pub xmax: Assignment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(Default)]
pub struct PosetOptions {
    /// Accept firms whose gapless condition cannot be checked.
    pub trust_gapless: bool,
    pub limits: CheckLimits,
    /// Total route steps allowed while building; `None` picks a bound from
    /// the instance size.
    pub step_budget: Option<u64>,
}


fn default_budget(inst: &Instance) -> u64 {
    let e = inst.num_edges() as u64 + 1;
    let b = inst.max_capacity() + 1;
    1_000 + b * b * e.pow(4)
}

/// Extends `route` without using `avoid` until `avoid` is the only rotation
/// left, and returns that point.
fn defer(market: &Market, route: &mut Route, avoid: &Rotation, monitor: &Monitor, steps: &mut u64, budget: u64) -> Result<()> {
    let mut over = false;
    extend_route(market, route, monitor, |_, avail| {
        if *steps >= budget {
            over = true;
            return None;
        }
        *steps += 1;
        avail.iter().position(|r| r != avoid)
    })?;
    if over {
        return Err(Error::BudgetExhausted(budget));
    }
    let left = rotations_unchecked(market, route.end())?;
    if left != std::slice::from_ref(avoid) {
        return Err(Error::invariant(format!(
            "deferring {} ended with {} rotations available",
            avoid.label(market.instance()),
            left.len()
        )));
    }
    Ok(())
}

/// Applies `rotation` with its maximal weight at the end of `route`.
fn push_full(market: &Market, route: &mut Route, rotation: &Rotation) -> Result<u64> {
    let x = route.end().clone();
    let tau = max_feasible_weight(market, &x, rotation)?.tau;
    let after = shift_unchecked(market, &x, rotation, tau)?;
    route.steps.push(RouteStep { rotation: rotation.clone(), weight: tau, tau, after });
    Ok(tau)
}

/// The poset of rotations under the gapless condition, from one deferring
/// route per rotation.
pub fn build_poset_gapless(market: &Market, opts: &PosetOptions) -> Result<RotationPoset> {
    let inst = market.instance();
    let proven = match gapless_status(inst, &opts.limits)? {
        GaplessStatus::Holds => true,
        GaplessStatus::Violated { firm, witness } => {
            return Err(Error::GaplessViolated(format!(
                "firm `{firm}` on chain {:?} (use the general poset)",
                witness.chain
            )))
        }
        GaplessStatus::Unknown { firms } if !opts.trust_gapless => {
            return Err(Error::GaplessViolated(format!(
                "cannot verify firms {} within the enumeration limit",
                firms.join(", ")
            )))
        }
        GaplessStatus::Unknown { .. } => false,
    };
    let monitor = Monitor { gapless: true, proven };
    let full = build_full_route(market, Policy::Smallest, &monitor)?;
    let mut elements: Vec<PosetElement> = full
        .steps
        .iter()
        .map(|s| PosetElement { rotation: s.rotation.clone(), occurrence: 0, tau: s.weight })
        .collect();
    elements.sort_by(|a, b| a.rotation.cmp(&b.rotation));
    let index: BTreeMap<&Rotation, usize> = elements.iter().enumerate().map(|(i, e)| (&e.rotation, i)).collect();

    let budget = opts.step_budget.unwrap_or_else(|| default_budget(inst));
    let mut steps = 0;
    let mut hasse = Vec::new();
    for (i, el) in elements.iter().enumerate() {
        let mut route = Route::new(full.start.clone());
        defer(market, &mut route, &el.rotation, &monitor, &mut steps, budget)?;
        let tau = push_full(market, &mut route, &el.rotation)?;
        if tau != el.tau {
            return Err(Error::invariant(format!(
                "{} has weight {tau} on one route and {} on another",
                el.rotation.label(inst),
                el.tau
            )));
        }
        for next in rotations_unchecked(market, route.end())? {
            let j = *index.get(&next).ok_or_else(|| {
                Error::invariant(format!("{} is missing from the full route", next.label(inst)))
            })?;
            hasse.push((i, j));
        }
    }
    hasse.sort_unstable();
    let poset = RotationPoset {
        mode: PosetMode::Gapless,
        elements,
        hasse_edges: hasse,
        xmin: full.start.clone(),
        xmax: full.end().clone(),
    };
    poset.check_reconstruction(inst)?;
    Ok(poset)
}

/// The occurrence poset without the gapless condition: for each rotation,
/// a route that defers it stage by stage.
pub fn build_poset_general(market: &Market, opts: &PosetOptions) -> Result<RotationPoset> {
    let inst = market.instance();
    let monitor = Monitor::general();
    let full = build_full_route(market, Policy::Smallest, &monitor)?;
    let mut counts: BTreeMap<Rotation, usize> = BTreeMap::new();
    for s in &full.steps {
        *counts.entry(s.rotation.clone()).or_default() += 1;
    }
    let mut first = BTreeMap::new();
    let mut total = 0;
    for (r, &k) in &counts {
        first.insert(r.clone(), total);
        total += k;
    }

    let budget = opts.step_budget.unwrap_or_else(|| default_budget(inst));
    let mut steps = 0;
    let mut elements: Vec<Option<PosetElement>> = vec![None; total];
    let mut hasse = Vec::new();
    for (rotation, &k) in &counts {
        let mut route = Route::new(full.start.clone());
        let mut marks = Vec::with_capacity(k);
        for i in 0..k {
            defer(market, &mut route, rotation, &monitor, &mut steps, budget)?;
            let tau = push_full(market, &mut route, rotation)?;
            elements[first[rotation] + i] = Some(PosetElement { rotation: rotation.clone(), occurrence: i, tau });
            marks.push(route.len());
        }
        let mut over = false;
        extend_route(market, &mut route, &monitor, |_, _| {
            if steps >= budget {
                over = true;
                return None;
            }
            steps += 1;
            Some(0)
        })?;
        if over {
            return Err(Error::BudgetExhausted(budget));
        }
        if route.steps.iter().filter(|s| &s.rotation == rotation).count() != k {
            return Err(Error::invariant(format!("{} occurs a different number of times", rotation.label(inst))));
        }
        for (i, &mark) in marks.iter().enumerate() {
            let x = &route.steps[mark - 1].after;
            for next in rotations_unchecked(market, x)? {
                let kn = *counts.get(&next).ok_or_else(|| {
                    Error::invariant(format!("{} is missing from the full route", next.label(inst)))
                })?;
                let remaining = route.steps[mark..].iter().filter(|s| s.rotation == next).count();
                if remaining == 0 || remaining > kn {
                    return Err(Error::invariant(format!(
                        "{} is available but used {remaining} more times",
                        next.label(inst)
                    )));
                }
                hasse.push((first[rotation] + i, first[&next] + kn - remaining));
            }
        }
    }
    hasse.sort_unstable();
    hasse.dedup();
    let elements = elements.into_iter().map(|e| e.expect("every occurrence is built")).collect();
    let poset = RotationPoset {
        mode: PosetMode::General,
        elements,
        hasse_edges: hasse,
        xmin: full.start.clone(),
        xmax: full.end().clone(),
    };
    poset.check_reconstruction(inst)?;
    Ok(poset)
}

impl RotationPoset {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn predecessors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.hasse_edges.iter().filter(move |e| e.1 == j).map(|e| e.0)
    }

    /// Elements in an order extending the poset, smallest index first
    /// among ready elements. `None` if the Hasse edges have a cycle.
    pub fn linear_extension(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indegree = vec![0; n];
        let mut succ = vec![Vec::new(); n];
        for &(i, j) in &self.hasse_edges {
            indegree[j] += 1;
            succ[i].push(j);
        }
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut out = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            out.push(i);
            for &j in &succ[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        (out.len() == n).then_some(out)
    }

    /// `below[i][j]`: element `i` strictly precedes element `j`.
    pub fn order_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.len();
        let mut below = vec![vec![false; n]; n];
        let order = self.linear_extension().unwrap_or_default();
        for &j in order.iter().rev() {
            for &(a, b) in &self.hasse_edges {
                if a == j {
                    below[j][b] = true;
                    let row = below[b].clone();
                    for (k, v) in row.into_iter().enumerate() {
                        below[j][k] |= v;
                    }
                }
            }
        }
        below
    }

    /// Acyclic, and no Hasse edge is implied by the others.
    pub fn is_reduced(&self) -> bool {
        if self.linear_extension().is_none() {
            return false;
        }
        let below = self.order_matrix();
        self.hasse_edges
            .iter()
            .all(|&(i, j)| !self.hasse_edges.iter().any(|&(a, k)| a == i && k != j && below[k][j]))
    }

    /// `x^min + Σ τ (χ^{L+} − χ^{L−}) = x^max`.
    fn check_reconstruction(&self, inst: &Instance) -> Result<()> {
        let mut x: Vec<i128> = self.xmin.values().iter().map(|&v| v as i128).collect();
        for el in &self.elements {
            for e in el.rotation.plus_edges() {
                x[e] += el.tau as i128;
            }
            for e in el.rotation.minus_edges() {
                x[e] -= el.tau as i128;
            }
        }
        let ok = x.iter().zip(self.xmax.values()).all(|(&a, &b)| a == b as i128);
        if !ok || self.linear_extension().is_none() {
            return Err(Error::invariant(format!(
                "poset with {} elements does not reconstruct x^max acyclically on {} edges",
                self.len(),
                inst.num_edges()
            )));
        }
        Ok(())
    }

    pub fn element_label(&self, inst: &Instance, i: usize) -> String {
        let el = &self.elements[i];
        match self.mode {
            PosetMode::Gapless => format!("{}:{}", el.rotation.label(inst), el.tau),
            PosetMode::General => format!("{}#{}:{}", el.rotation.label(inst), el.occurrence, el.tau),
        }
    }

    pub fn to_json(&self, inst: &Instance) -> serde_json::Value {
        serde_json::json!({
            "mode": self.mode,
            "elements": self.elements.iter().enumerate().map(|(i, el)| serde_json::json!({
                "id": i,
                "rotation": el.rotation.label(inst),
                "occurrence": el.occurrence,
                "tau": el.tau,
                "plus": inst.edge_names(&el.rotation.plus_edges()),
                "minus": inst.edge_names(&el.rotation.minus_edges()),
            })).collect::<Vec<_>>(),
            "hasse_edges": self.hasse_edges,
            "xmin": inst.assignment_json(&self.xmin),
            "xmax": inst.assignment_json(&self.xmax),
        })
    }

    pub fn to_dot(&self, inst: &Instance) -> String {
        let mut out = String::from("digraph poset {\n");
        for i in 0..self.len() {
            out.push_str(&format!("  n{i} [label=\"{}\"];\n", self.element_label(inst, i)));
        }
        for &(i, j) in &self.hasse_edges {
            out.push_str(&format!("  n{i} -> n{j};\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Integer weights on poset elements.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ClosedFunction {
    pub values: Vec<u64>,
}

impl ClosedFunction {
    pub fn zero(poset: &RotationPoset) -> Self {
        ClosedFunction { values: vec![0; poset.len()] }
    }

    pub fn full(poset: &RotationPoset) -> Self {
        ClosedFunction { values: poset.elements.iter().map(|e| e.tau).collect() }
    }

    /// The first violation of `ξ <= τ` or of `i ◁ j, ξ(j) > 0 ⇒ ξ(i) = τ_i`.
    pub fn violation(&self, poset: &RotationPoset) -> Option<String> {
        if self.values.len() != poset.len() {
            return Some(format!("{} values for {} elements", self.values.len(), poset.len()));
        }
        for (i, (&v, el)) in self.values.iter().zip(&poset.elements).enumerate() {
            if v > el.tau {
                return Some(format!("value {v} at element {i} exceeds τ = {}", el.tau));
            }
        }
        poset
            .hasse_edges
            .iter()
            .find(|&&(i, j)| self.values[j] > 0 && self.values[i] != poset.elements[i].tau)
            .map(|&(i, j)| format!("element {j} is used while its predecessor {i} is not full"))
    }

    pub fn is_closed(&self, poset: &RotationPoset) -> bool {
        self.violation(poset).is_none()
    }

    /// Pointwise `self <= other`.
    pub fn le(&self, other: &ClosedFunction) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }
}

/// The closed function of a stable `x`: the weights of a route from the
/// minimum to `x`.
pub fn omega(market: &Market, poset: &RotationPoset, x: &Assignment) -> Result<ClosedFunction> {
    ensure_stable(market, x)?;
    let inst = market.instance();
    let route = route_towards(market, poset.xmin.clone(), x)?;
    let mut slots: BTreeMap<&Rotation, Vec<usize>> = BTreeMap::new();
    for (i, el) in poset.elements.iter().enumerate() {
        slots.entry(&el.rotation).or_default().push(i);
    }
    let mut xi = ClosedFunction::zero(poset);
    let mut cursor: BTreeMap<&Rotation, usize> = BTreeMap::new();
    for step in &route.steps {
        let list = slots.get(&step.rotation).ok_or_else(|| {
            Error::invariant(format!("{} is not a poset element", step.rotation.label(inst)))
        })?;
        let at = cursor.entry(&step.rotation).or_default();
        if xi.values[list[*at]] == poset.elements[list[*at]].tau {
            *at += 1;
        }
        let i = *list.get(*at).ok_or_else(|| {
            Error::invariant(format!("{} is used more often than in the poset", step.rotation.label(inst)))
        })?;
        xi.values[i] += step.weight;
        if xi.values[i] > poset.elements[i].tau {
            return Err(Error::invariant(format!("{} overshoots its weight", step.rotation.label(inst))));
        }
    }
    if let Some(v) = xi.violation(poset) {
        return Err(Error::invariant(format!("image of a stable assignment is not closed: {v}")));
    }
    Ok(xi)
}

/// The stable assignment of a closed function.
pub fn omega_inverse(market: &Market, poset: &RotationPoset, xi: &ClosedFunction) -> Result<Assignment> {
    if let Some(v) = xi.violation(poset) {
        return Err(Error::NotClosed(v));
    }
    let order = poset.linear_extension().ok_or_else(|| Error::invariant("poset has a cycle"))?;
    let mut x = poset.xmin.clone();
    for i in order {
        if xi.values[i] == 0 {
            continue;
        }
        x = apply_rotation(market, &x, &poset.elements[i].rotation, xi.values[i])
            .map_err(|e| Error::invariant(format!("closed function does not apply at element {i}: {e}")))?;
    }
    ensure_stable(market, &x).map_err(|e| Error::invariant(e.to_string()))?;
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinCost {
    pub x: Assignment,
    pub cost: Decimal,
    /// Elements taken in full.
    pub ideal: Vec<usize>,
}

/// A stable assignment of least `c · x`, the least such one for the firms.
pub fn min_cost_stable(market: &Market, poset: &RotationPoset, costs: &CostVector) -> Result<MinCost> {
    if poset.mode == PosetMode::General {
        return Err(Error::GeneralModeRefused);
    }
    let inst = market.instance();
    if costs.0.len() != inst.num_edges() {
        return Err(Error::BadCost(format!("{} costs for {} edges", costs.0.len(), inst.num_edges())));
    }
    let overflow = || Error::BadCost("costs overflow the exact range".into());
    let (scale, c) = costs.scaled().ok_or_else(overflow)?;
    let weights: Vec<Capacity> = poset
        .elements
        .iter()
        .map(|el| {
            let plus = el.rotation.plus_edges().iter().try_fold(0i128, |s, &e| s.checked_add(c[e]));
            let minus = el.rotation.minus_edges().iter().try_fold(0i128, |s, &e| s.checked_add(c[e]));
            plus?.checked_sub(minus?)?.checked_mul(el.tau as i128)
        })
        .collect::<Option<_>>()
        .ok_or_else(overflow)?;

    let (s, t) = (0, 1);
    let mut net = FlowNetwork::<Capacity>::new(poset.len() + 2);
    let finite = weights.iter().try_fold(0i128, |sum, w| sum.checked_add(w.abs())).ok_or_else(overflow)?;
    let infinite = finite.checked_add(1).ok_or_else(overflow)?;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0 {
            net.add_arc(s, i + 2, w);
        } else if w < 0 {
            net.add_arc(i + 2, t, -w);
        }
    }
    for &(i, j) in &poset.hasse_edges {
        net.add_arc(i + 2, j + 2, infinite);
    }
    net.max_flow(s, t);
    let source_side = net.source_side(s);
    let ideal: Vec<usize> = (0..poset.len()).filter(|&i| !source_side[i + 2]).collect();

    let mut xi = ClosedFunction::zero(poset);
    for &i in &ideal {
        xi.values[i] = poset.elements[i].tau;
    }
    let x = omega_inverse(market, poset, &xi)?;
    let base = costs.dot(&poset.xmin).ok_or_else(overflow)?.at_scale(scale).ok_or_else(overflow)?;
    let total = ideal.iter().try_fold(base, |sum, &i| sum.checked_add(weights[i])).ok_or_else(overflow)?;
    let direct = costs.dot(&x).ok_or_else(overflow)?;
    let cost = Decimal::new(total, scale);
    if direct != cost {
        return Err(Error::invariant(format!("cost {direct} of the assignment differs from {cost} of the ideal")));
    }
    Ok(MinCost { x, cost, ideal })
}

/// Every closed function of the poset, in lexicographic order of a linear
/// extension.
pub fn enumerate_closed_functions(poset: &RotationPoset, limit: u128) -> Result<Vec<ClosedFunction>> {
    let size = poset
        .elements
        .iter()
        .try_fold(1u128, |p, el| p.checked_mul(el.tau as u128 + 1))
        .unwrap_or(u128::MAX);
    if size > limit {
        return Err(Error::LimitExceeded { size, limit });
    }
    let order = poset.linear_extension().ok_or_else(|| Error::invariant("poset has a cycle"))?;
    let preds: Vec<Vec<usize>> = (0..poset.len()).map(|j| poset.predecessors(j).collect()).collect();
    let mut out = Vec::new();
    let mut values = vec![0u64; poset.len()];
    // depth-first over positions of `order`, each trying values 0..=max
    fn walk(
        depth: usize,
        order: &[usize],
        preds: &[Vec<usize>],
        poset: &RotationPoset,
        values: &mut Vec<u64>,
        out: &mut Vec<ClosedFunction>,
    ) {
        let Some(&i) = order.get(depth) else {
            out.push(ClosedFunction { values: values.clone() });
            return;
        };
        let open = preds[i].iter().all(|&p| values[p] == poset.elements[p].tau);
        let max = if open { poset.elements[i].tau } else { 0 };
        for v in 0..=max {
            values[i] = v;
            walk(depth + 1, order, preds, poset, values, out);
        }
        values[i] = 0;
    }
    walk(0, &order, &preds, poset, &mut values, &mut out);
    Ok(out)
}
