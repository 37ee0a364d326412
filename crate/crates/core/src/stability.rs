//! Interesting and blocking edges, acceptability, stability and the global
//! orders on acceptable assignments.

use serde::Serialize;

use crate::choice::Comparison;
use crate::error::{Error, Result};
use crate::market::Market;
use crate::model::{Assignment, Instance, Vertex};

/// Whether `e` is interesting for `v` under the acceptable local vector `z`.
pub fn is_interesting(market: &Market, v: Vertex, z: &[u64], e: usize) -> Result<bool> {
    let inst = market.instance();
    let pos = inst
        .incident(v)
        .iter()
        .position(|&x| x == e)
        .ok_or_else(|| Error::UnknownEdge(format!("{} at {}", inst.edge(e).id, inst.vertex_name(v))))?;
    let ev = market.evaluator(v);
    if !ev.is_acceptable(z) {
        return Err(Error::NotAcceptable(inst.vertex_name(v).into()));
    }
    Ok(ev.is_interesting(z, pos))
}

pub fn is_acceptable(market: &Market, x: &Assignment) -> bool {
    market.instance().vertices().all(|v| market.accepts(v, x))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StabilityReport {
    pub stable: bool,
    pub blocking_edges: Vec<usize>,
    pub unacceptable_vertices: Vec<Vertex>,
    pub quota_violations: Vec<usize>,
}

#[derive(Serialize)]
struct NamedReport<'a> {
    stable: bool,
    blocking_edges: Vec<&'a str>,
    unacceptable_vertices: Vec<&'a str>,
    quota_violations: Vec<&'a str>,
}

impl StabilityReport {
    pub fn to_json(&self, inst: &Instance) -> serde_json::Value {
        let named = NamedReport {
            stable: self.stable,
            blocking_edges: self.blocking_edges.iter().map(|&e| inst.edge(e).id.as_str()).collect(),
            unacceptable_vertices: self.unacceptable_vertices.iter().map(|&v| inst.vertex_name(v)).collect(),
            quota_violations: self.quota_violations.iter().map(|&w| inst.workers()[w].as_str()).collect(),
        };
        serde_json::to_value(named).expect("report serializes")
    }
}

/// Blocking edges, unacceptable vertices and quota violations of `x`.
///
/// Interest is only defined on acceptable vectors, so edges with an
/// unacceptable endpoint are not tested for blocking.
pub fn check_stability(market: &Market, x: &Assignment) -> Result<StabilityReport> {
    let inst = market.instance();
    inst.check_box(x)?;
    let mut report = StabilityReport::default();
    let mut acceptable = Vec::with_capacity(inst.num_vertices());
    for v in inst.vertices() {
        let ok = market.accepts(v, x);
        if !ok {
            report.unacceptable_vertices.push(v);
        }
        acceptable.push(ok);
    }
    let nw = inst.workers().len();
    for w in 0..nw {
        let size: u64 = inst.incident(Vertex::Worker(w)).iter().map(|&e| x.get(e)).sum();
        if size > inst.worker_quota(w) {
            report.quota_violations.push(w);
        }
    }
    for (e, edge) in inst.edges().iter().enumerate() {
        if !acceptable[edge.worker] || !acceptable[nw + edge.firm] {
            continue;
        }
        if market.interesting(Vertex::Worker(edge.worker), x, e) && market.interesting(Vertex::Firm(edge.firm), x, e) {
            report.blocking_edges.push(e);
        }
    }
    report.stable =
        report.blocking_edges.is_empty() && report.unacceptable_vertices.is_empty() && report.quota_violations.is_empty();
    Ok(report)
}

pub fn is_stable(market: &Market, x: &Assignment) -> bool {
    check_stability(market, x).map(|r| r.stable).unwrap_or(false)
}

pub(crate) fn ensure_stable(market: &Market, x: &Assignment) -> Result<()> {
    let report = check_stability(market, x)?;
    if report.stable {
        return Ok(());
    }
    let inst = market.instance();
    let detail = if let Some(&e) = report.blocking_edges.first() {
        format!("edge `{}` blocks", inst.edge(e).id)
    } else if let Some(&v) = report.unacceptable_vertices.first() {
        format!("`{}` does not accept its edges", inst.vertex_name(v))
    } else {
        "quota exceeded".to_string()
    };
    Err(Error::NotStable(detail))
}

fn compare_side(market: &Market, x: &Assignment, y: &Assignment, side: impl Iterator<Item = Vertex>) -> Result<Comparison> {
    let inst = market.instance();
    let mut total = Comparison::Equal;
    for v in side {
        let ev = market.evaluator(v);
        let c = ev
            .compare(&inst.local(x, v), &inst.local(y, v))
            .map_err(|_| Error::NotAcceptable(inst.vertex_name(v).into()))?;
        total = total.combine(c);
    }
    Ok(total)
}

/// `Less` means `x ≺_F y`: every firm weakly prefers `y`, and they differ.
pub fn compare_f(market: &Market, x: &Assignment, y: &Assignment) -> Result<Comparison> {
    let firms = market.instance().firms().len();
    compare_side(market, x, y, (0..firms).map(Vertex::Firm))
}

/// Same as [`compare_f`] with the workers' revealed preferences.
pub fn compare_w(market: &Market, x: &Assignment, y: &Assignment) -> Result<Comparison> {
    let workers = market.instance().workers().len();
    compare_side(market, x, y, (0..workers).map(Vertex::Worker))
}

/// Least-preferred edge of `supp(x_w)`, or the most preferred edge of `E_w`
/// when `x_w = 0`. `None` only when `E_w` is empty.
pub fn last_edge(inst: &Instance, x: &Assignment, w: usize) -> Option<usize> {
    let list = inst.incident(Vertex::Worker(w));
    list.iter().rev().find(|&&e| x.get(e) > 0).or(list.first()).copied()
}

pub fn worker_load(inst: &Instance, x: &Assignment, w: usize) -> u64 {
    inst.incident(Vertex::Worker(w)).iter().map(|&e| x.get(e)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_instance;

    fn single_edge() -> Market {
        Market::new(
            parse_instance(
                r#"{"workers":["w"],"firms":["f"],
                "edges":[{"id":"e","worker":"w","firm":"f","capacity":1}],
                "worker_quotas":{"w":1},"worker_orders":{"w":["e"]},
                "firm_cfs":{"f":{"type":"linear","order":["e"],"quota":1}}}"#,
            )
            .unwrap(),
        )
    }

    #[test]
    fn zero_is_blocked_on_single_edge() {
        let m = single_edge();
        let zero = m.instance().zero();
        let report = check_stability(&m, &zero).unwrap();
        assert!(!report.stable);
        assert_eq!(report.blocking_edges, vec![0]);
        let one = Assignment(vec![1]);
        assert!(check_stability(&m, &one).unwrap().stable);
        assert!(!is_interesting(&m, Vertex::Worker(0), &[1], 0).unwrap());
        assert!(is_interesting(&m, Vertex::Worker(0), &[0], 0).unwrap());
    }

    #[test]
    fn compare_needs_acceptable_inputs() {
        let m = single_edge();
        let x = m.instance().zero();
        assert_eq!(compare_f(&m, &x, &x).unwrap(), Comparison::Equal);
        assert_eq!(compare_f(&m, &x, &Assignment(vec![1])).unwrap(), Comparison::Less);
    }
}
