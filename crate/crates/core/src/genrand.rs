//! Seeded random instances and the alternating-tableau family.
//!
//! The random source is `ChaCha8Rng` from `rand_chacha`, seeded with
//! `SeedableRng::seed_from_u64`; its name is written into every generated
//! instance's `meta` so runs can be reproduced elsewhere.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::choice::Tableau;
use crate::error::{Error, Result};
use crate::io::{RawChoice, RawEdge, RawInstance};
use crate::model::{validate_instance, Instance};

pub const GENERATOR: &str = "rand_chacha::ChaCha8Rng/seed_from_u64";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Linear,
    Tableau,
    TableauA3,
    Mixed,
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" => Ok(Family::Linear),
            "tableau" => Ok(Family::Tableau),
            "tableau-a3" => Ok(Family::TableauA3),
            "mixed" => Ok(Family::Mixed),
            other => Err(format!("unknown family `{other}` (linear, tableau, tableau-a3, mixed)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub workers: usize,
    pub firms: usize,
    /// Probability of each worker–firm edge, in `(0, 1]`.
    pub density: f64,
    pub max_capacity: u64,
    pub max_quota: u64,
    pub family: Family,
    /// Caps every capacity. Linear firms are always gapless; tableau firms
    /// with capacities of at most 2 usually are, but not always.
    pub b_cap_for_gapless: Option<u64>,
    /// Linear firms rank first the workers that rank them last.
    #[serde(default)]
    pub opposed: bool,
    /// Every quota equals `max_quota` instead of being drawn from `1..=max_quota`.
    #[serde(default)]
    pub fixed_quota: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            workers: 3,
            firms: 3,
            density: 0.7,
            max_capacity: 3,
            max_quota: 4,
            family: Family::Linear,
            b_cap_for_gapless: None,
            opposed: false,
            fixed_quota: false,
        }
    }
}

const CONNECT_ATTEMPTS: usize = 200;

fn bad_config(msg: impl Into<String>) -> Error {
    Error::Invalid(crate::error::ValidationError::BadChoice {
        firm: "<generator>".into(),
        reason: msg.into(),
    })
}

fn draw_quota<R: Rng>(rng: &mut R, config: &GeneratorConfig) -> i64 {
    let q = rng.gen_range(1..=config.max_quota);
    (if config.fixed_quota { config.max_quota } else { q }) as i64
}

/// A uniformly random column-monotone filling for the given column heights.
pub fn random_filling<R: Rng>(rng: &mut R, heights: &[u64]) -> Vec<Vec<u64>> {
    let k = heights.len() as u64;
    let upper: u64 = heights.iter().sum();
    let mut labels: Vec<u64> = (k + 1..=k + upper).collect();
    labels.shuffle(rng);
    let mut rest = labels.as_slice();
    heights
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let (mine, tail) = rest.split_at(h as usize);
            rest = tail;
            let mut column = mine.to_vec();
            column.sort_unstable();
            column.insert(0, i as u64 + 1);
            column
        })
        .collect()
}

pub fn random_tableau<R: Rng>(rng: &mut R, heights: &[u64], quota: u64) -> Tableau {
    Tableau::new(random_filling(rng, heights), quota).expect("random filling is valid")
}

fn connected(nw: usize, nf: usize, pairs: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..nw + nf).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for &(w, f) in pairs {
        let (a, b) = (find(&mut parent, w), find(&mut parent, nw + f));
        parent[a] = b;
    }
    let root = find(&mut parent, 0);
    (0..nw + nf).all(|i| find(&mut parent, i) == root)
}

/// A connected random instance, deterministic in the configuration.
pub fn generate(config: &GeneratorConfig) -> Result<Instance> {
    let GeneratorConfig { seed, workers: nw, firms: nf, density, .. } = *config;
    if nw == 0 || nf == 0 {
        return Err(bad_config("need at least one worker and one firm"));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(bad_config(format!("density {density} is outside (0, 1]")));
    }
    if config.max_capacity == 0 || config.max_quota == 0 {
        return Err(bad_config("capacity and quota bounds must be positive"));
    }
    let cap = config.b_cap_for_gapless.map_or(config.max_capacity, |c| c.min(config.max_capacity)).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pairs = Vec::new();
    for attempt in 0..=CONNECT_ATTEMPTS {
        if attempt == CONNECT_ATTEMPTS {
            return Err(bad_config(format!(
                "no connected graph after {CONNECT_ATTEMPTS} attempts at density {density}"
            )));
        }
        pairs = (0..nw)
            .flat_map(|w| (0..nf).map(move |f| (w, f)))
            .filter(|_| rng.gen_bool(density))
            .collect();
        if connected(nw, nf, &pairs) {
            break;
        }
    }

    let worker_ids: Vec<String> = (1..=nw).map(|i| format!("w{i}")).collect();
    let firm_ids: Vec<String> = (1..=nf).map(|i| format!("f{i}")).collect();
    let mut edges: Vec<RawEdge> = pairs
        .iter()
        .map(|&(w, f)| RawEdge {
            id: format!("e{}_{}", w + 1, f + 1),
            worker: worker_ids[w].clone(),
            firm: firm_ids[f].clone(),
            capacity: rng.gen_range(1..=cap) as i64,
        })
        .collect();

    let mut firm_cfs = std::collections::BTreeMap::new();
    for (f, id) in firm_ids.iter().enumerate() {
        let mut mine: Vec<usize> = (0..edges.len()).filter(|&e| pairs[e].1 == f).collect();
        mine.shuffle(&mut rng);
        let names: Vec<String> = mine.iter().map(|&e| edges[e].id.clone()).collect();
        let quota = draw_quota(&mut rng, config);
        let linear = match config.family {
            Family::Linear => true,
            Family::Tableau | Family::TableauA3 => false,
            Family::Mixed => rng.gen_bool(0.5),
        };
        let spec = if linear {
            RawChoice::Linear { order: names, quota }
        } else if config.family == Family::TableauA3 && mine.len() == 3 {
            let half = rng.gen_range(1..=(cap / 2).max(1));
            edges[mine[0]].capacity = (2 * half) as i64;
            edges[mine[1]].capacity = half as i64;
            edges[mine[2]].capacity = half as i64;
            RawChoice::TableauA3 { columns: Some(names), quota: (2 * half) as i64 }
        } else {
            let heights: Vec<u64> = mine.iter().map(|&e| edges[e].capacity as u64).collect();
            RawChoice::Tableau { columns: names, quota, filling: random_filling(&mut rng, &heights) }
        };
        firm_cfs.insert(id.clone(), spec);
    }

    let mut worker_quotas = std::collections::BTreeMap::new();
    let mut worker_orders = std::collections::BTreeMap::new();
    for (w, id) in worker_ids.iter().enumerate() {
        let mut mine: Vec<String> = (0..edges.len())
            .filter(|&e| pairs[e].0 == w)
            .map(|e| edges[e].id.clone())
            .collect();
        mine.shuffle(&mut rng);
        worker_quotas.insert(id.clone(), draw_quota(&mut rng, config));
        worker_orders.insert(id.clone(), mine);
    }
    if config.opposed {
        let rank: std::collections::HashMap<&str, usize> = worker_orders
            .values()
            .flat_map(|order| order.iter().enumerate().map(|(i, e)| (e.as_str(), i)))
            .collect();
        for spec in firm_cfs.values_mut() {
            if let RawChoice::Linear { order, .. } = spec {
                order.sort_by_key(|e| std::cmp::Reverse(rank[e.as_str()]));
            }
        }
    }

    let raw = RawInstance {
        workers: worker_ids,
        firms: firm_ids,
        edges,
        worker_quotas,
        worker_orders,
        firm_cfs,
        meta: Some(serde_json::json!({ "generator": GENERATOR, "config": config })),
    };
    Ok(validate_instance(raw)?)
}

/// Three workers and three firms on a hexagon-with-chords, firm choices
/// given by the alternating tableau of quota `q`.
///
/// Worker `w_i` has edges `a_i = w_i f_i`, `c_i = w_i f_{i+1}` and
/// `d_i = w_i f_{i-1}` (indices mod 3) preferred `c_i > d_i > a_i`; firm
/// `f_i` sees `(a_i, c_{i-1}, d_{i+1})` as columns 1, 2, 3.
pub fn make_appendix_instance(q: u64) -> Result<Instance> {
    if q < 2 || !q.is_multiple_of(2) {
        return Err(bad_config(format!("quota must be an even integer >= 2, got {q}")));
    }
    let next = |i: usize| i % 3 + 1;
    let prev = |i: usize| (i + 1) % 3 + 1;
    let mut edges = Vec::new();
    for (name, cap, other) in [("a", q, 0), ("c", q / 2, 1), ("d", q / 2, 2)] {
        for i in 1..=3 {
            let f = match other {
                0 => i,
                1 => next(i),
                _ => prev(i),
            };
            edges.push(RawEdge {
                id: format!("{name}{i}"),
                worker: format!("w{i}"),
                firm: format!("f{f}"),
                capacity: cap as i64,
            });
        }
    }
    let raw = RawInstance {
        workers: (1..=3).map(|i| format!("w{i}")).collect(),
        firms: (1..=3).map(|i| format!("f{i}")).collect(),
        edges,
        worker_quotas: (1..=3).map(|i| (format!("w{i}"), q as i64)).collect(),
        worker_orders: (1..=3)
            .map(|i| (format!("w{i}"), vec![format!("c{i}"), format!("d{i}"), format!("a{i}")]))
            .collect(),
        firm_cfs: (1..=3)
            .map(|i| {
                let columns = vec![format!("a{i}"), format!("c{}", prev(i)), format!("d{}", next(i))];
                (format!("f{i}"), RawChoice::TableauA3 { columns: Some(columns), quota: q as i64 })
            })
            .collect(),
        meta: Some(serde_json::json!({ "family": "alternating-tableau", "q": q })),
    };
    Ok(validate_instance(raw)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Assignment, FirmChoice, Vertex};

    #[test]
    fn same_seed_same_instance() {
        let config = GeneratorConfig { seed: 7, family: Family::Mixed, ..Default::default() };
        assert_eq!(generate(&config).unwrap(), generate(&config).unwrap());
        let other = GeneratorConfig { seed: 8, ..config.clone() };
        assert_ne!(generate(&config).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn linear_family_is_linear_everywhere() {
        for seed in 0..20 {
            let inst = generate(&GeneratorConfig { seed, ..Default::default() }).unwrap();
            assert!((0..inst.firms().len()).all(|f| inst.firm_choice(f).is_linear()));
        }
    }

    #[test]
    fn capacity_cap_is_respected() {
        let config = GeneratorConfig {
            family: Family::Tableau,
            max_capacity: 5,
            b_cap_for_gapless: Some(2),
            opposed: false,
            fixed_quota: false,
            ..Default::default()
        };
        for seed in 0..20 {
            let inst = generate(&GeneratorConfig { seed, ..config.clone() }).unwrap();
            assert!(inst.max_capacity() <= 2);
        }
    }

    #[test]
    fn sparse_graph_is_refused() {
        let config = GeneratorConfig { workers: 6, firms: 6, density: 0.01, ..Default::default() };
        assert!(generate(&config).is_err());
    }

    #[test]
    fn appendix_instance_shape() {
        let inst = make_appendix_instance(4).unwrap();
        assert_eq!(inst.num_edges(), 9);
        let FirmChoice::Tableau { tableau, .. } = inst.firm_choice(0) else { panic!("tableau expected") };
        assert_eq!(tableau.filling(), &[vec![1, 4, 5, 6, 7], vec![2, 8, 10], vec![3, 9, 11]]);
        assert_eq!(inst.edge_names(inst.incident(Vertex::Firm(0))), ["a1", "c3", "d2"]);
        assert_eq!(inst.edge_names(inst.incident(Vertex::Worker(1))), ["c2", "d2", "a2"]);

        let x0 = Assignment(
            inst.edges().iter().map(|e| if e.id.starts_with('a') { 0 } else { 2 }).collect(),
        );
        assert_eq!(inst.restrict(&x0, Vertex::Firm(0)).values, vec![0, 2, 2]);
        assert!(make_appendix_instance(3).is_err());
        assert!(make_appendix_instance(0).is_err());
    }
}
