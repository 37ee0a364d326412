//! An instance bundled with memoizing evaluators for every vertex.

use serde::Serialize;

use crate::choice::ChoiceEvaluator;
use crate::model::{Assignment, Instance, Vertex};

#[derive(Debug)]
pub struct Market {
    inst: Instance,
    evaluators: Vec<ChoiceEvaluator>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallCount {
    pub vertex: String,
    pub calls: u64,
}

impl Market {
    pub fn new(inst: Instance) -> Self {
        let evaluators = inst.vertices().map(|v| inst.evaluator(v)).collect();
        Market { inst, evaluators }
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    pub fn into_instance(self) -> Instance {
        self.inst
    }

    pub fn evaluator(&self, v: Vertex) -> &ChoiceEvaluator {
        match v {
            Vertex::Worker(w) => &self.evaluators[w],
            Vertex::Firm(f) => &self.evaluators[self.inst.workers().len() + f],
        }
    }

    pub fn choose(&self, v: Vertex, z: &[u64]) -> Vec<u64> {
        self.evaluator(v).eval(z)
    }

    /// `C_v(x_v) = x_v`.
    pub fn accepts(&self, v: Vertex, x: &Assignment) -> bool {
        self.evaluator(v).is_acceptable(&self.inst.local(x, v))
    }

    /// Whether edge `e` is interesting for its endpoint `v` under `x_v`.
    pub fn interesting(&self, v: Vertex, x: &Assignment, e: usize) -> bool {
        let z = self.inst.local(x, v);
        self.evaluator(v).is_interesting(&z, self.inst.position(v, e))
    }

    /// The result of `C_f(x_f + delta)` written back onto edges: returns the
    /// positional choice for `z = x_f + Σ d·1^e`.
    pub fn choose_shifted(&self, v: Vertex, x: &Assignment, delta: &[(usize, i64)]) -> Option<(Vec<u64>, Vec<u64>)> {
        let mut z = self.inst.local(x, v);
        for &(e, d) in delta {
            let pos = self.inst.position(v, e);
            let value = z[pos] as i64 + d;
            if value < 0 || value as u64 > self.inst.edge(e).capacity {
                return None;
            }
            z[pos] = value as u64;
        }
        let chosen = self.choose(v, &z);
        Some((z, chosen))
    }

    /// Total oracle calls (cache misses) across all evaluators.
    pub fn oracle_calls(&self) -> u64 {
        self.evaluators.iter().map(ChoiceEvaluator::misses).sum()
    }

    pub fn firm_oracle_calls(&self) -> u64 {
        (0..self.inst.firms().len())
            .map(|f| self.evaluator(Vertex::Firm(f)).misses())
            .sum()
    }

    pub fn calls_by_vertex(&self) -> Vec<CallCount> {
        self.inst
            .vertices()
            .map(|v| CallCount {
                vertex: self.inst.vertex_name(v).to_string(),
                calls: self.evaluator(v).misses(),
            })
            .collect()
    }
}
