//! Maximum flow and minimum cut by Dinic's algorithm.

use std::collections::VecDeque;

use num_traits::PrimInt;

/// Capacity type used by the closure computation.
pub type Capacity = i128;

#[derive(Debug, Clone)]
struct Arc<T> {
    to: usize,
    cap: T,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork<T> {
    arcs: Vec<Arc<T>>,
    out: Vec<Vec<usize>>,
}

impl<T: PrimInt> FlowNetwork<T> {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork { arcs: Vec::new(), out: vec![Vec::new(); nodes] }
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cap: T) {
        self.out[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap });
        self.out[to].push(self.arcs.len());
        self.arcs.push(Arc { to: from, cap: T::zero() });
    }

    fn levels(&self, s: usize) -> Vec<Option<usize>> {
        let mut level = vec![None; self.len()];
        level[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &i in &self.out[u] {
                let arc = &self.arcs[i];
                if arc.cap > T::zero() && level[arc.to].is_none() {
                    level[arc.to] = level[u].map(|l| l + 1);
                    queue.push_back(arc.to);
                }
            }
        }
        level
    }

    fn augment(&mut self, u: usize, t: usize, limit: T, level: &[Option<usize>], next: &mut [usize]) -> T {
        if u == t {
            return limit;
        }
        while next[u] < self.out[u].len() {
            let i = self.out[u][next[u]];
            let Arc { to, cap } = self.arcs[i];
            if cap > T::zero() && level[to] == level[u].map(|l| l + 1) {
                let pushed = self.augment(to, t, limit.min(cap), level, next);
                if pushed > T::zero() {
                    self.arcs[i].cap = self.arcs[i].cap - pushed;
                    self.arcs[i ^ 1].cap = self.arcs[i ^ 1].cap + pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        T::zero()
    }

    /// Pushes a maximum flow from `s` to `t` and returns its value.
    pub fn max_flow(&mut self, s: usize, t: usize) -> T {
        let mut total = T::zero();
        loop {
            let level = self.levels(s);
            if level[t].is_none() {
                return total;
            }
            let mut next = vec![0; self.len()];
            loop {
                let pushed = self.augment(s, t, T::max_value(), &level, &mut next);
                if pushed == T::zero() {
                    break;
                }
                total = total + pushed;
            }
        }
    }

    /// Nodes reachable from `s` in the residual network.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        self.levels(s).iter().map(Option::is_some).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_network() {
        let mut g = FlowNetwork::<Capacity>::new(4);
        g.add_arc(0, 1, 3);
        g.add_arc(0, 2, 2);
        g.add_arc(1, 2, 5);
        g.add_arc(1, 3, 2);
        g.add_arc(2, 3, 3);
        assert_eq!(g.max_flow(0, 3), 5);
        assert_eq!(g.source_side(0), vec![true, false, false, false]);
    }

    #[test]
    fn works_over_narrow_integers() {
        let mut g = FlowNetwork::<u8>::new(3);
        g.add_arc(0, 1, 200);
        g.add_arc(1, 2, 7);
        assert_eq!(g.max_flow(0, 2), 7);
        assert_eq!(g.source_side(0), vec![true, true, false]);
    }
}
