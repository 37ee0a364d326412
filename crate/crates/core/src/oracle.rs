//! Brute-force enumeration of stable assignments and checks of the lattice
//! properties.

use serde::Serialize;

use crate::choice::Comparison;
use crate::error::{Error, Result};
use crate::grid::box_size;
use crate::market::Market;
use crate::model::{Assignment, Vertex};
use crate::stability::{compare_f, compare_w};

pub use crate::poset::enumerate_closed_functions;

pub const DEFAULT_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumeratedLattice {
    /// Stable assignments in mixed-radix order over edges.
    pub elements: Vec<Assignment>,
    /// `order[i][j]` compares element `i` with element `j` for the firms.
    pub order: Vec<Vec<Comparison>>,
    pub min: usize,
    pub max: usize,
}

impl EnumeratedLattice {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn le(&self, i: usize, j: usize) -> bool {
        self.order[i][j].is_le()
    }

    pub fn index_of(&self, x: &Assignment) -> Option<usize> {
        self.elements.iter().position(|y| y == x)
    }

    fn extremal(&self, candidates: impl Iterator<Item = usize> + Clone, least: bool) -> Option<usize> {
        candidates
            .clone()
            .find(|&c| candidates.clone().all(|d| if least { self.le(c, d) } else { self.le(d, c) }))
    }

    /// Least upper bound of `i` and `j`.
    pub fn join(&self, i: usize, j: usize) -> Option<usize> {
        self.extremal((0..self.len()).filter(|&u| self.le(i, u) && self.le(j, u)), true)
    }

    /// Greatest lower bound of `i` and `j`.
    pub fn meet(&self, i: usize, j: usize) -> Option<usize> {
        self.extremal((0..self.len()).filter(|&u| self.le(u, i) && self.le(u, j)), false)
    }
}

/// Whether `C_v(z')(e) > z(e)` for some `z'` raising `z` only at `e`.
fn brute_interesting(market: &Market, v: Vertex, z: &[u64], pos: usize, cap: u64) -> bool {
    (z[pos] + 1..=cap).any(|t| {
        let mut zt = z.to_vec();
        zt[pos] = t;
        market.choose(v, &zt)[pos] > z[pos]
    })
}

fn brute_stable(market: &Market, x: &[u64]) -> bool {
    let inst = market.instance();
    let x = Assignment(x.to_vec());
    inst.edges().iter().enumerate().all(|(e, edge)| {
        let blocks = [Vertex::Worker(edge.worker), Vertex::Firm(edge.firm)].iter().all(|&v| {
            brute_interesting(market, v, &inst.local(&x, v), inst.position(v, e), edge.capacity)
        });
        !blocks
    })
}

/// Every stable assignment, ordered for the firms.
pub fn enumerate_stable(market: &Market, limit: u128) -> Result<EnumeratedLattice> {
    let inst = market.instance();
    let bounds = inst.capacities();
    let size = box_size(&bounds);
    if size > limit {
        return Err(Error::LimitExceeded { size, limit });
    }
    // the last edge index of each vertex, at which it can be checked
    let mut complete: Vec<Vec<Vertex>> = vec![Vec::new(); inst.num_edges()];
    for v in inst.vertices() {
        if let Some(&last) = inst.incident(v).iter().max() {
            complete[last].push(v);
        }
    }
    let mut load = vec![0u64; inst.workers().len()];
    let mut x = vec![0u64; inst.num_edges()];
    let mut found = Vec::new();
    search(market, 0, &bounds, &complete, &mut load, &mut x, &mut found);
    if found.is_empty() {
        return Err(Error::invariant("no stable assignment exists"));
    }

    let n = found.len();
    let mut order = vec![vec![Comparison::Equal; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let c = compare_f(market, &found[i], &found[j])?;
            order[i][j] = c;
            order[j][i] = c.reversed();
        }
    }
    let all = 0..n;
    let min = all.clone().find(|&i| all.clone().all(|j| order[i][j].is_le()));
    let max = all.clone().find(|&i| all.clone().all(|j| order[j][i].is_le()));
    let (Some(min), Some(max)) = (min, max) else {
        return Err(Error::invariant("stable assignments have no least or greatest element"));
    };
    Ok(EnumeratedLattice { elements: found, order, min, max })
}

fn search(
    market: &Market,
    e: usize,
    bounds: &[u64],
    complete: &[Vec<Vertex>],
    load: &mut [u64],
    x: &mut Vec<u64>,
    found: &mut Vec<Assignment>,
) {
    let inst = market.instance();
    if e == bounds.len() {
        if brute_stable(market, x) {
            found.push(Assignment(x.clone()));
        }
        return;
    }
    let w = inst.edge(e).worker;
    for t in 0..=bounds[e] {
        if load[w] + t > inst.worker_quota(w) {
            break;
        }
        x[e] = t;
        load[w] += t;
        let y = Assignment(x.clone());
        if complete[e].iter().all(|&v| market.accepts(v, &y)) {
            search(market, e + 1, bounds, complete, load, x, found);
        }
        load[w] -= t;
    }
    x[e] = 0;
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct LatticeReport {
    pub lattice: bool,
    pub distributive: bool,
    pub polarity: bool,
    pub unisize: bool,
    /// Vertices below their quota get the same vector in every stable
    /// assignment.
    pub deficit_fixed: bool,
    pub witnesses: Vec<String>,
}

impl LatticeReport {
    pub fn passed(&self) -> bool {
        self.lattice && self.distributive && self.polarity && self.unisize && self.deficit_fixed
    }
}

pub fn verify_lattice_properties(market: &Market, lat: &EnumeratedLattice) -> Result<LatticeReport> {
    let inst = market.instance();
    let n = lat.len();
    let mut report = LatticeReport {
        lattice: true,
        distributive: true,
        polarity: true,
        unisize: true,
        deficit_fixed: true,
        witnesses: Vec::new(),
    };
    let mut joins = vec![vec![0; n]; n];
    let mut meets = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            match (lat.join(i, j), lat.meet(i, j)) {
                (Some(u), Some(l)) => {
                    joins[i][j] = u;
                    meets[i][j] = l;
                }
                _ => {
                    report.lattice = false;
                    report.witnesses.push(format!("elements {i} and {j} lack a join or meet"));
                }
            }
        }
    }
    if report.lattice {
        'outer: for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let left = meets[a][joins[b][c]];
                    let right = joins[meets[a][b]][meets[a][c]];
                    if left != right {
                        report.distributive = false;
                        report.witnesses.push(format!("meet does not distribute on ({a}, {b}, {c})"));
                        break 'outer;
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let w = compare_w(market, &lat.elements[i], &lat.elements[j])?;
            if w != lat.order[i][j].reversed() {
                report.polarity = false;
                report.witnesses.push(format!("elements {i} and {j}: firms {:?}, workers {w:?}", lat.order[i][j]));
            }
        }
    }
    for v in inst.vertices() {
        let locals: Vec<Vec<u64>> = lat.elements.iter().map(|x| inst.local(x, v)).collect();
        let sizes: Vec<u64> = locals.iter().map(|z| z.iter().sum()).collect();
        if sizes.iter().any(|&s| s != sizes[0]) {
            report.unisize = false;
            report.witnesses.push(format!("`{}` has sizes {sizes:?}", inst.vertex_name(v)));
            continue;
        }
        let quota = market.evaluator(v).quota();
        if sizes[0] < quota && locals.iter().any(|z| z != &locals[0]) {
            report.deficit_fixed = false;
            report.witnesses.push(format!("`{}` is below quota but its vector varies", inst.vertex_name(v)));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genrand::make_appendix_instance;
    use crate::io::parse_instance;

    #[test]
    fn single_edge_has_one_stable_assignment() {
        let m = Market::new(
            parse_instance(
                r#"{"workers":["w"],"firms":["f"],
                "edges":[{"id":"e","worker":"w","firm":"f","capacity":1}],
                "worker_quotas":{"w":1},"worker_orders":{"w":["e"]},
                "firm_cfs":{"f":{"type":"linear","order":["e"],"quota":1}}}"#,
            )
            .unwrap(),
        );
        let lat = enumerate_stable(&m, DEFAULT_LIMIT).unwrap();
        assert_eq!(lat.elements, vec![Assignment(vec![1])]);
        assert!(verify_lattice_properties(&m, &lat).unwrap().passed());
    }

    #[test]
    fn appendix_lattice_is_a_chain() {
        let m = Market::new(make_appendix_instance(4).unwrap());
        let lat = enumerate_stable(&m, DEFAULT_LIMIT).unwrap();
        assert_eq!(lat.len(), 5);
        for i in 0..5 {
            for j in 0..5 {
                assert!(lat.le(i, j) || lat.le(j, i));
            }
        }
        assert!(verify_lattice_properties(&m, &lat).unwrap().passed());
    }

    #[test]
    fn limit_is_enforced() {
        let m = Market::new(make_appendix_instance(4).unwrap());
        assert!(matches!(enumerate_stable(&m, 10), Err(Error::LimitExceeded { .. })));
    }
}
