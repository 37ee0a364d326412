//! Instances, assignments and their arithmetic.
//!
//! Workers, firms and edges are identified by their index in the input file;
//! that order is the canonical order used for every tie-break.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::choice::{ChoiceEvaluator, ChoiceKind, ChoiceRule, Tableau};
use crate::error::{Error, Result, ValidationError};
use crate::io::{RawChoice, RawEdge, RawInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Vertex {
    Worker(usize),
    Firm(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeInfo {
    pub id: String,
    pub worker: usize,
    pub firm: usize,
    pub capacity: u64,
}

/// A firm's choice function, with positions referring to the firm's
/// incident edges as listed by [`Instance::incident`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FirmChoice {
    /// Ordered rule; positions are in the firm's preference order.
    Linear { quota: u64 },
    /// Tableau rule; positions are columns. `alternating` marks the
    /// three-column family generated from the quota alone.
    Tableau { tableau: Tableau, alternating: bool },
}

impl FirmChoice {
    pub fn rule(&self) -> ChoiceRule {
        match self {
            FirmChoice::Linear { quota } => ChoiceRule::Ordered { quota: *quota },
            FirmChoice::Tableau { tableau, .. } => ChoiceRule::Tableau(tableau.clone()),
        }
    }

    pub fn kind(&self) -> ChoiceKind {
        match self {
            FirmChoice::Linear { .. } => ChoiceKind::FirmLinear,
            FirmChoice::Tableau { .. } => ChoiceKind::Tableau,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, FirmChoice::Linear { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    workers: Vec<String>,
    firms: Vec<String>,
    edges: Vec<EdgeInfo>,
    worker_quotas: Vec<u64>,
    worker_edges: Vec<Vec<usize>>,
    firm_edges: Vec<Vec<usize>>,
    firm_choices: Vec<FirmChoice>,
    worker_pos: Vec<usize>,
    firm_pos: Vec<usize>,
    edge_index: HashMap<String, usize>,
    meta: Option<serde_json::Value>,
}

fn index_ids(kind: &'static str, ids: &[String]) -> Result<HashMap<String, usize>, ValidationError> {
    let mut map = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if map.insert(id.clone(), i).is_some() {
            return Err(ValidationError::DuplicateId { kind, id: id.clone() });
        }
    }
    Ok(map)
}

/// Map `order` onto positions, requiring it to be a permutation of `incident`.
fn permutation_of(order: &[String], incident: &[usize], edge_index: &HashMap<String, usize>) -> Option<Vec<usize>> {
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let &e = edge_index.get(id)?;
        if !incident.contains(&e) || out.contains(&e) {
            return None;
        }
        out.push(e);
    }
    (out.len() == incident.len()).then_some(out)
}

/// Check a raw instance and fix its canonical ordering.
pub fn validate_instance(raw: RawInstance) -> Result<Instance, ValidationError> {
    let worker_index = index_ids("worker", &raw.workers)?;
    let firm_index = index_ids("firm", &raw.firms)?;
    if let Some(id) = raw.firms.iter().find(|f| worker_index.contains_key(*f)) {
        return Err(ValidationError::DuplicateId { kind: "vertex", id: id.clone() });
    }

    let mut edges = Vec::with_capacity(raw.edges.len());
    let mut edge_index = HashMap::with_capacity(raw.edges.len());
    let mut pairs = HashMap::new();
    for RawEdge { id, worker, firm, capacity } in &raw.edges {
        if edge_index.insert(id.clone(), edges.len()).is_some() {
            return Err(ValidationError::DuplicateId { kind: "edge", id: id.clone() });
        }
        let &w = worker_index.get(worker).ok_or_else(|| ValidationError::DanglingReference {
            kind: "worker",
            id: worker.clone(),
        })?;
        let &f = firm_index.get(firm).ok_or_else(|| ValidationError::DanglingReference {
            kind: "firm",
            id: firm.clone(),
        })?;
        if pairs.insert((w, f), ()).is_some() {
            return Err(ValidationError::MultipleEdges { worker: worker.clone(), firm: firm.clone() });
        }
        if *capacity < 0 {
            return Err(ValidationError::NegativeCapacity(id.clone()));
        }
        edges.push(EdgeInfo { id: id.clone(), worker: w, firm: f, capacity: *capacity as u64 });
    }

    let mut incident_w = vec![Vec::new(); raw.workers.len()];
    let mut incident_f = vec![Vec::new(); raw.firms.len()];
    for (e, edge) in edges.iter().enumerate() {
        incident_w[edge.worker].push(e);
        incident_f[edge.firm].push(e);
    }

    for id in raw.worker_quotas.keys().chain(raw.worker_orders.keys()) {
        if !worker_index.contains_key(id) {
            return Err(ValidationError::DanglingReference { kind: "worker", id: id.clone() });
        }
    }
    for id in raw.firm_cfs.keys() {
        if !firm_index.contains_key(id) {
            return Err(ValidationError::DanglingReference { kind: "firm", id: id.clone() });
        }
    }

    let mut worker_quotas = Vec::with_capacity(raw.workers.len());
    let mut worker_edges = Vec::with_capacity(raw.workers.len());
    for (w, id) in raw.workers.iter().enumerate() {
        let quota = *raw.worker_quotas.get(id).ok_or_else(|| ValidationError::MissingQuota(id.clone()))?;
        if quota < 0 {
            return Err(ValidationError::NegativeQuota(id.clone()));
        }
        worker_quotas.push(quota as u64);
        let order = raw.worker_orders.get(id).ok_or_else(|| ValidationError::IncompleteOrder(id.clone()))?;
        for e in order {
            if !edge_index.contains_key(e) {
                return Err(ValidationError::DanglingReference { kind: "edge", id: e.clone() });
            }
        }
        let order = permutation_of(order, &incident_w[w], &edge_index)
            .ok_or_else(|| ValidationError::IncompleteOrder(id.clone()))?;
        worker_edges.push(order);
    }

    let mut firm_edges = Vec::with_capacity(raw.firms.len());
    let mut firm_choices = Vec::with_capacity(raw.firms.len());
    for (f, id) in raw.firms.iter().enumerate() {
        let spec = raw.firm_cfs.get(id).ok_or_else(|| ValidationError::MissingChoice(id.clone()))?;
        let bad = |reason: String| ValidationError::BadChoice { firm: id.clone(), reason };
        let listed = match spec {
            RawChoice::Linear { order, .. } => Some(order),
            RawChoice::Tableau { columns, .. } => Some(columns),
            RawChoice::TableauA3 { columns, .. } => columns.as_ref(),
        };
        let Some(listed) = listed else {
            return Err(bad("\"tableau-a3\" needs \"columns\" mapping its three edges to columns".into()));
        };
        for e in listed {
            if !edge_index.contains_key(e) {
                return Err(ValidationError::DanglingReference { kind: "edge", id: e.clone() });
            }
        }
        let positions = permutation_of(listed, &incident_f[f], &edge_index)
            .ok_or_else(|| bad("edge list is not a permutation of the firm's edges".into()))?;
        let heights: Vec<u64> = positions.iter().map(|&e| edges[e].capacity).collect();
        let choice = match spec {
            RawChoice::Linear { quota, .. } => {
                if *quota < 0 {
                    return Err(bad(format!("negative quota {quota}")));
                }
                FirmChoice::Linear { quota: *quota as u64 }
            }
            RawChoice::Tableau { quota, filling, .. } => {
                if *quota <= 0 {
                    return Err(bad(format!("tableau quota must be positive, got {quota}")));
                }
                if filling.len() != heights.len()
                    || filling.iter().zip(&heights).any(|(col, &h)| col.len() as u64 != h + 1)
                {
                    return Err(bad("filling shape does not match the column capacities".into()));
                }
                let tableau = Tableau::new(filling.clone(), *quota as u64).map_err(bad)?;
                FirmChoice::Tableau { tableau, alternating: false }
            }
            RawChoice::TableauA3 { quota, .. } => {
                if *quota < 2 || quota % 2 != 0 {
                    return Err(bad(format!("quota must be an even integer >= 2, got {quota}")));
                }
                let q = *quota as u64;
                if heights != [q, q / 2, q / 2] {
                    return Err(bad(format!("column capacities {heights:?} differ from ({q}, {}, {})", q / 2, q / 2)));
                }
                let tableau = Tableau::alternating(q).map_err(bad)?;
                FirmChoice::Tableau { tableau, alternating: true }
            }
        };
        firm_edges.push(positions);
        firm_choices.push(choice);
    }

    let mut worker_pos = vec![0; edges.len()];
    let mut firm_pos = vec![0; edges.len()];
    for list in &worker_edges {
        for (i, &e) in list.iter().enumerate() {
            worker_pos[e] = i;
        }
    }
    for list in &firm_edges {
        for (i, &e) in list.iter().enumerate() {
            firm_pos[e] = i;
        }
    }

    Ok(Instance {
        workers: raw.workers,
        firms: raw.firms,
        edges,
        worker_quotas,
        worker_edges,
        firm_edges,
        firm_choices,
        worker_pos,
        firm_pos,
        edge_index,
        meta: raw.meta,
    })
}

impl Instance {
    pub fn workers(&self) -> &[String] {
        &self.workers
    }

    pub fn firms(&self) -> &[String] {
        &self.firms
    }

    pub fn edges(&self) -> &[EdgeInfo] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &EdgeInfo {
        &self.edges[e]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.workers.len() + self.firms.len()
    }

    pub fn worker_quota(&self, w: usize) -> u64 {
        self.worker_quotas[w]
    }

    pub fn firm_choice(&self, f: usize) -> &FirmChoice {
        &self.firm_choices[f]
    }

    pub fn meta(&self) -> Option<&serde_json::Value> {
        self.meta.as_ref()
    }

    pub fn capacities(&self) -> Vec<u64> {
        self.edges.iter().map(|e| e.capacity).collect()
    }

    pub fn max_capacity(&self) -> u64 {
        self.edges.iter().map(|e| e.capacity).max().unwrap_or(0)
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> {
        (0..self.workers.len())
            .map(Vertex::Worker)
            .chain((0..self.firms.len()).map(Vertex::Firm))
    }

    /// Incident edges of `v` in choice-rule position order: preference order
    /// for workers and linear firms, column order for tableau firms.
    pub fn incident(&self, v: Vertex) -> &[usize] {
        match v {
            Vertex::Worker(w) => &self.worker_edges[w],
            Vertex::Firm(f) => &self.firm_edges[f],
        }
    }

    /// Position of edge `e` in `incident(v)`; `e` must be incident to `v`.
    pub fn position(&self, v: Vertex, e: usize) -> usize {
        match v {
            Vertex::Worker(w) => {
                debug_assert_eq!(self.edges[e].worker, w);
                self.worker_pos[e]
            }
            Vertex::Firm(f) => {
                debug_assert_eq!(self.edges[e].firm, f);
                self.firm_pos[e]
            }
        }
    }

    pub fn endpoints(&self, e: usize) -> (Vertex, Vertex) {
        (Vertex::Worker(self.edges[e].worker), Vertex::Firm(self.edges[e].firm))
    }

    pub fn bounds(&self, v: Vertex) -> Vec<u64> {
        self.incident(v).iter().map(|&e| self.edges[e].capacity).collect()
    }

    pub fn edge_by_id(&self, id: &str) -> Result<usize> {
        self.edge_index.get(id).copied().ok_or_else(|| Error::UnknownEdge(id.into()))
    }

    pub fn vertex_by_id(&self, id: &str) -> Result<Vertex> {
        if let Some(w) = self.workers.iter().position(|x| x == id) {
            return Ok(Vertex::Worker(w));
        }
        if let Some(f) = self.firms.iter().position(|x| x == id) {
            return Ok(Vertex::Firm(f));
        }
        Err(Error::UnknownVertex(id.into()))
    }

    pub fn vertex_name(&self, v: Vertex) -> &str {
        match v {
            Vertex::Worker(w) => &self.workers[w],
            Vertex::Firm(f) => &self.firms[f],
        }
    }

    pub fn evaluator(&self, v: Vertex) -> ChoiceEvaluator {
        let (kind, rule) = match v {
            Vertex::Worker(w) => (ChoiceKind::WorkerLinear, ChoiceRule::Ordered { quota: self.worker_quotas[w] }),
            Vertex::Firm(f) => (self.firm_choices[f].kind(), self.firm_choices[f].rule()),
        };
        ChoiceEvaluator::new(v, kind, rule, self.bounds(v))
    }

    /// Local vector of `x` at `v`, positional in `incident(v)` order.
    pub fn local(&self, x: &Assignment, v: Vertex) -> Vec<u64> {
        self.incident(v).iter().map(|&e| x.0[e]).collect()
    }

    pub fn restrict(&self, x: &Assignment, v: Vertex) -> LocalVector {
        LocalVector { owner: v, values: self.local(x, v) }
    }

    pub fn restrict_by_id(&self, x: &Assignment, id: &str) -> Result<LocalVector> {
        Ok(self.restrict(x, self.vertex_by_id(id)?))
    }

    /// Check `0 <= x <= b` and the edge count.
    pub fn check_box(&self, x: &Assignment) -> Result<()> {
        if x.0.len() != self.edges.len() {
            return Err(Error::invariant(format!(
                "assignment has {} entries for {} edges",
                x.0.len(),
                self.edges.len()
            )));
        }
        match x.0.iter().zip(&self.edges).find(|(v, e)| **v > e.capacity) {
            Some((_, e)) => Err(Error::OutOfBox(e.id.clone())),
            None => Ok(()),
        }
    }

    /// `x + weight·χ^plus − weight·χ^minus`, required to stay in the box.
    pub fn shift(&self, x: &Assignment, plus: &[usize], minus: &[usize], weight: u64) -> Result<Assignment> {
        debug_assert!(plus.iter().all(|e| !minus.contains(e)), "plus and minus overlap");
        let mut values = x.0.clone();
        for &e in plus {
            values[e] = values[e]
                .checked_add(weight)
                .filter(|&v| v <= self.edges[e].capacity)
                .ok_or_else(|| Error::OutOfBox(self.edges[e].id.clone()))?;
        }
        for &e in minus {
            values[e] = values[e]
                .checked_sub(weight)
                .ok_or_else(|| Error::OutOfBox(self.edges[e].id.clone()))?;
        }
        Ok(Assignment(values))
    }

    pub fn zero(&self) -> Assignment {
        Assignment(vec![0; self.edges.len()])
    }

    pub fn assignment_from_map(&self, map: &HashMap<String, i64>) -> Result<Assignment> {
        let mut values = vec![0; self.edges.len()];
        for (id, &v) in map {
            let e = self.edge_by_id(id)?;
            if v < 0 {
                return Err(Error::OutOfBox(id.clone()));
            }
            values[e] = v as u64;
        }
        let x = Assignment(values);
        self.check_box(&x)?;
        Ok(x)
    }

    /// Edge id → value, in canonical edge order.
    pub fn assignment_json(&self, x: &Assignment) -> serde_json::Value {
        let map = self
            .edges
            .iter()
            .zip(&x.0)
            .map(|(e, &v)| (e.id.clone(), serde_json::Value::from(v)))
            .collect();
        serde_json::Value::Object(map)
    }

    /// Human-readable edge sequence, e.g. `[a1, d2]`.
    pub fn edge_names(&self, edges: &[usize]) -> Vec<String> {
        edges.iter().map(|&e| self.edges[e].id.clone()).collect()
    }

    pub fn to_raw(&self) -> RawInstance {
        let ids = |list: &[usize]| list.iter().map(|&e| self.edges[e].id.clone()).collect::<Vec<_>>();
        RawInstance {
            workers: self.workers.clone(),
            firms: self.firms.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| RawEdge {
                    id: e.id.clone(),
                    worker: self.workers[e.worker].clone(),
                    firm: self.firms[e.firm].clone(),
                    capacity: e.capacity as i64,
                })
                .collect(),
            worker_quotas: self
                .workers
                .iter()
                .zip(&self.worker_quotas)
                .map(|(w, &q)| (w.clone(), q as i64))
                .collect(),
            worker_orders: self
                .workers
                .iter()
                .zip(&self.worker_edges)
                .map(|(w, list)| (w.clone(), ids(list)))
                .collect(),
            firm_cfs: self
                .firms
                .iter()
                .zip(&self.firm_edges)
                .zip(&self.firm_choices)
                .map(|((f, list), choice)| {
                    let spec = match choice {
                        FirmChoice::Linear { quota } => RawChoice::Linear { order: ids(list), quota: *quota as i64 },
                        FirmChoice::Tableau { tableau, alternating: true } => RawChoice::TableauA3 {
                            columns: Some(ids(list)),
                            quota: tableau.quota() as i64,
                        },
                        FirmChoice::Tableau { tableau, alternating: false } => RawChoice::Tableau {
                            columns: ids(list),
                            quota: tableau.quota() as i64,
                            filling: tableau.filling().to_vec(),
                        },
                    };
                    (f.clone(), spec)
                })
                .collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = Some(meta);
        self
    }
}

/// An integer function on edges, indexed by canonical edge index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Assignment(pub Vec<u64>);

impl Assignment {
    pub fn values(&self) -> &[u64] {
        &self.0
    }

    pub fn get(&self, e: usize) -> u64 {
        self.0[e]
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Restriction of an assignment to the edges of one vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalVector {
    pub owner: Vertex,
    /// Positional in [`Instance::incident`] order.
    pub values: Vec<u64>,
}

impl LocalVector {
    pub fn size(&self) -> u64 {
        self.values.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_instance;

    const TWO_BY_TWO: &str = r#"{
        "workers": ["w1", "w2"],
        "firms": ["f1", "f2"],
        "edges": [
            {"id": "e11", "worker": "w1", "firm": "f1", "capacity": 2},
            {"id": "e12", "worker": "w1", "firm": "f2", "capacity": 1},
            {"id": "e21", "worker": "w2", "firm": "f1", "capacity": 1},
            {"id": "e22", "worker": "w2", "firm": "f2", "capacity": 2}
        ],
        "worker_quotas": {"w1": 2, "w2": 2},
        "worker_orders": {"w1": ["e12", "e11"], "w2": ["e21", "e22"]},
        "firm_cfs": {
            "f1": {"type": "linear", "order": ["e11", "e21"], "quota": 2},
            "f2": {"type": "tableau", "columns": ["e22", "e12"], "quota": 2,
                   "filling": [[1, 3, 4], [2, 5]]}
        }
    }"#;

    fn edit(f: impl FnOnce(&mut serde_json::Value)) -> Result<Instance> {
        let mut v: serde_json::Value = serde_json::from_str(TWO_BY_TWO).unwrap();
        f(&mut v);
        parse_instance(&v.to_string())
    }

    #[test]
    fn parses_well_formed_instance() {
        let inst = parse_instance(TWO_BY_TWO).unwrap();
        assert_eq!(inst.num_edges(), 4);
        assert_eq!(inst.incident(Vertex::Worker(0)), &[1, 0]);
        assert_eq!(inst.incident(Vertex::Firm(1)), &[3, 1]);
        assert_eq!(inst.position(Vertex::Firm(1), 1), 1);
        assert_eq!(inst.bounds(Vertex::Firm(1)), vec![2, 1]);
    }

    #[test]
    fn reports_validation_errors() {
        let err = edit(|v| v["worker_orders"]["w1"] = serde_json::json!(["e12"])).unwrap_err();
        assert!(err.to_string().contains("incomplete order"), "{err}");
        let err = edit(|v| v["edges"][0]["capacity"] = serde_json::json!(-1)).unwrap_err();
        assert!(err.to_string().contains("negative capacity"), "{err}");
        let err = edit(|v| v["edges"][1]["id"] = serde_json::json!("e11")).unwrap_err();
        assert!(err.to_string().contains("duplicate edge"), "{err}");
        let err = edit(|v| v["edges"][1]["firm"] = serde_json::json!("f9")).unwrap_err();
        assert!(err.to_string().contains("unknown firm `f9`"), "{err}");
        let err = edit(|v| v["edges"][1]["firm"] = serde_json::json!("f1")).unwrap_err();
        assert!(err.to_string().contains("multiple edges"), "{err}");
        let err = edit(|v| v["worker_quotas"]["w2"] = serde_json::json!(-3)).unwrap_err();
        assert!(err.to_string().contains("negative quota"), "{err}");
        let err = edit(|v| v["firm_cfs"]["f2"]["filling"] = serde_json::json!([[1, 4, 3], [2, 5]])).unwrap_err();
        assert!(err.to_string().contains("not increasing"), "{err}");
        let err = edit(|v| {
            v["firm_cfs"]["f2"] = serde_json::json!({"type": "tableau-a3", "quota": 2});
        })
        .unwrap_err();
        assert!(err.to_string().contains("columns"), "{err}");
    }

    #[test]
    fn restrict_and_shift() {
        let inst = parse_instance(TWO_BY_TWO).unwrap();
        let b = Assignment(inst.capacities());
        assert_eq!(inst.restrict(&b, Vertex::Worker(0)).values, vec![1, 2]);
        assert_eq!(inst.restrict(&inst.zero(), Vertex::Firm(0)).size(), 0);
        assert!(matches!(inst.restrict_by_id(&b, "nobody"), Err(Error::UnknownVertex(_))));

        let x = Assignment(vec![1, 0, 0, 0]);
        assert_eq!(inst.shift(&x, &[], &[], 1).unwrap(), x);
        assert_eq!(inst.shift(&x, &[0], &[], 1).unwrap(), Assignment(vec![2, 0, 0, 0]));
        assert!(matches!(inst.shift(&x, &[], &[1], 1), Err(Error::OutOfBox(_))));
        assert!(matches!(inst.shift(&x, &[0], &[], 2), Err(Error::OutOfBox(_))));
    }

    #[test]
    fn raw_round_trip() {
        let inst = parse_instance(TWO_BY_TWO).unwrap();
        let again = validate_instance(inst.to_raw()).unwrap();
        assert_eq!(inst, again);
    }
}
