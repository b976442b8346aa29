//! Directed observation networks.
//!
//! Edge convention: an edge `i -> j` means agent `i` observes agent `j`,
//! i.e. `j` is in `N_i`. Every agent observes itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Complete,
    /// Agent 0 observes everyone; every other agent observes only itself.
    Star,
    /// Agent `i` observes itself and `i - 1 (mod n)`.
    Ring,
    Autarky,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Network {
    neighbors: Vec<Vec<usize>>,
}

impl Network {
    /// Build from explicit neighbor lists; self-loops are added, duplicates removed.
    pub fn from_neighbors(mut neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        if n == 0 {
            return Err(Error::InvalidNetwork("network needs at least one agent".into()));
        }
        for (i, list) in neighbors.iter_mut().enumerate() {
            if let Some(&bad) = list.iter().find(|&&j| j >= n) {
                return Err(Error::InvalidNetwork(format!(
                    "agent {i} observes agent {bad}, but there are only {n} agents"
                )));
            }
            list.push(i);
            list.sort_unstable();
            list.dedup();
        }
        Ok(Network { neighbors })
    }

    /// Build from `(observer, observed)` pairs.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidNetwork("network needs at least one agent".into()));
        }
        let mut lists = vec![Vec::new(); n];
        let mut has_self = vec![false; n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidNetwork(format!("edge ({i}, {j}) out of range for {n} agents")));
            }
            if i == j {
                has_self[i] = true;
            }
            lists[i].push(j);
        }
        let missing: Vec<usize> = (0..n).filter(|&i| !has_self[i]).collect();
        if !missing.is_empty() {
            log::warn!("custom network: adding missing self-loops for agents {missing:?}");
        }
        Network::from_neighbors(lists)
    }

    pub fn make(kind: Topology, n: usize, edges: Option<&[(usize, usize)]>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidNetwork("network needs at least one agent".into()));
        }
        let lists = match kind {
            Topology::Complete => (0..n).map(|_| (0..n).collect()).collect(),
            Topology::Star => (0..n).map(|i| if i == 0 { (0..n).collect() } else { vec![i] }).collect(),
            Topology::Ring => (0..n).map(|i| vec![i, (i + n - 1) % n]).collect(),
            Topology::Autarky => (0..n).map(|i| vec![i]).collect(),
            Topology::Custom => {
                let edges = edges.ok_or_else(|| Error::InvalidNetwork("custom topology requires an edge list".into()))?;
                return Network::from_edges(n, edges);
            }
        };
        Network::from_neighbors(lists)
    }

    pub fn n_agents(&self) -> usize {
        self.neighbors.len()
    }

    /// Sorted observed set `N_i` (contains `i`).
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn observes(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn is_complete(&self) -> bool {
        let n = self.n_agents();
        self.neighbors.iter().all(|l| l.len() == n)
    }

    /// Center of a star (agent 0 sees all, everyone else sees only itself).
    pub fn star_center(&self) -> Option<usize> {
        let n = self.n_agents();
        let center_ok = self.neighbors[0].len() == n;
        let rest_ok = (1..n).all(|i| self.neighbors[i] == [i]);
        (center_ok && rest_ok).then_some(0)
    }

    /// Every observed agent's observations are also observed (`N_k ⊆ N_i` for `k ∈ N_i`).
    pub fn is_nested(&self) -> bool {
        (0..self.n_agents()).all(|i| {
            self.neighbors[i]
                .iter()
                .all(|&k| self.neighbors[k].iter().all(|j| self.observes(i, *j)))
        })
    }

    /// Observation paths exist between every ordered pair of agents.
    pub fn is_strongly_connected(&self) -> bool {
        let comps = self.strongly_connected_components();
        comps.len() == 1
    }

    /// Tarjan SCC decomposition; components sorted internally and by smallest member.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        let mut comps = tarjan(&self.neighbors);
        for c in &mut comps {
            c.sort_unstable();
        }
        comps.sort_by_key(|c| c[0]);
        comps
    }

    /// Strongly connected components closed under observation.
    pub fn sink_components(&self) -> Vec<Vec<usize>> {
        let comps = self.strongly_connected_components();
        let mut member_of = vec![0; self.n_agents()];
        for (k, c) in comps.iter().enumerate() {
            for &i in c {
                member_of[i] = k;
            }
        }
        comps
            .iter()
            .enumerate()
            .filter(|(k, c)| c.iter().all(|&i| self.neighbors[i].iter().all(|&j| member_of[j] == *k)))
            .map(|(_, c)| c.clone())
            .collect()
    }
}

struct Tarjan<'a> {
    adj: &'a [Vec<usize>],
    counter: usize,
    index: Vec<Option<usize>>,
    lowlink: Vec<usize>,
    on_stack: Vec<bool>,
    stack: Vec<usize>,
    out: Vec<Vec<usize>>,
}

fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut st = Tarjan {
        adj,
        counter: 0,
        index: vec![None; n],
        lowlink: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        out: Vec::new(),
    };
    for v in 0..n {
        if st.index[v].is_none() {
            st.visit(v);
        }
    }
    st.out
}

impl Tarjan<'_> {
    fn visit(&mut self, v: usize) {
        self.index[v] = Some(self.counter);
        self.lowlink[v] = self.counter;
        self.counter += 1;
        self.stack.push(v);
        self.on_stack[v] = true;
        for &w in &self.adj[v] {
            match self.index[w] {
                None => {
                    self.visit(w);
                    self.lowlink[v] = self.lowlink[v].min(self.lowlink[w]);
                }
                Some(iw) if self.on_stack[w] => self.lowlink[v] = self.lowlink[v].min(iw),
                Some(_) => {}
            }
        }
        if Some(self.lowlink[v]) == self.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = self.stack.pop().expect("tarjan stack underflow");
                self.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            self.out.push(comp);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standard_topologies() {
        let star = Network::make(Topology::Star, 3, None).unwrap();
        assert_eq!(star.neighbors(0), &[0, 1, 2]);
        assert_eq!(star.neighbors(1), &[1]);
        assert_eq!(star.neighbors(2), &[2]);
        assert_eq!(star.star_center(), Some(0));

        let k2 = Network::make(Topology::Complete, 2, None).unwrap();
        assert_eq!(k2.neighbors(0), &[0, 1]);
        assert_eq!(k2.neighbors(1), &[0, 1]);

        let aut = Network::make(Topology::Autarky, 5, None).unwrap();
        assert!((0..5).all(|i| aut.neighbors(i) == [i]));
    }

    #[test]
    fn custom_requires_edges_and_range() {
        assert!(Network::make(Topology::Custom, 3, None).is_err());
        assert!(Network::make(Topology::Custom, 2, Some(&[(0, 5)])).is_err());
        assert!(Network::make(Topology::Complete, 0, None).is_err());
        let net = Network::make(Topology::Custom, 2, Some(&[(0, 1), (0, 1)])).unwrap();
        assert_eq!(net.neighbors(0), &[0, 1]);
        assert_eq!(net.neighbors(1), &[1]);
    }

    #[test]
    fn strong_connectivity() {
        assert!(Network::make(Topology::Complete, 4, None).unwrap().is_strongly_connected());
        assert!(!Network::make(Topology::Star, 3, None).unwrap().is_strongly_connected());
        assert!(Network::make(Topology::Ring, 5, None).unwrap().is_strongly_connected());
        assert!(Network::make(Topology::Autarky, 1, None).unwrap().is_strongly_connected());
    }

    #[test]
    fn sinks() {
        let star = Network::make(Topology::Star, 3, None).unwrap();
        assert_eq!(star.sink_components(), vec![vec![1], vec![2]]);
        let k4 = Network::make(Topology::Complete, 4, None).unwrap();
        assert_eq!(k4.sink_components(), vec![vec![0, 1, 2, 3]]);
        // 1 observes 2, 2 observes 2, 3 observes 3 (1-based)
        let custom = Network::make(Topology::Custom, 3, Some(&[(0, 1)])).unwrap();
        assert_eq!(custom.sink_components(), vec![vec![1], vec![2]]);
    }

    #[test]
    fn nested_observation() {
        assert!(Network::make(Topology::Star, 4, None).unwrap().is_nested());
        assert!(Network::make(Topology::Complete, 4, None).unwrap().is_nested());
        assert!(!Network::make(Topology::Ring, 3, None).unwrap().is_nested());
    }

    fn arb_network() -> impl Strategy<Value = Network> {
        (1usize..8).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n), 0..(n * n)).prop_map(move |edges| Network::from_edges(n, &edges).unwrap())
        })
    }

    fn reachable(net: &Network, from: usize) -> Vec<bool> {
        let mut seen = vec![false; net.n_agents()];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if !std::mem::replace(&mut seen[v], true) {
                stack.extend(net.neighbors(v));
            }
        }
        seen
    }

    proptest! {
        #[test]
        fn sink_properties(net in arb_network()) {
            let n = net.n_agents();
            let sinks = net.sink_components();
            let all: Vec<usize> = (0..n).collect();
            prop_assert_eq!(net.is_strongly_connected(), sinks == vec![all]);

            let mut owner = vec![None; n];
            for (k, s) in sinks.iter().enumerate() {
                for &i in s {
                    prop_assert!(owner[i].is_none(), "sinks overlap");
                    owner[i] = Some(k);
                    // closed under observation
                    prop_assert!(net.neighbors(i).iter().all(|j| s.contains(j)));
                    // strongly connected inside
                    let r = reachable(&net, i);
                    prop_assert!(s.iter().all(|&j| r[j]));
                }
            }
            for i in 0..n {
                let r = reachable(&net, i);
                prop_assert!((0..n).any(|j| r[j] && owner[j].is_some()), "agent {} reaches no sink", i);
            }
        }
    }
}
