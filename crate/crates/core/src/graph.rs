//! Bipartite factor (multi)graphs: representation, generators, and girth.
//!
//! Variables and factors are indexed 0-based; edges are (variable, factor)
//! pairs stored with multiplicity. Parallel edges are first-class — the
//! configuration model produces them, and they count as cycles of length 2.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("n_vars*d = {stubs} stubs not divisible by factor degree k = {k}")]
    DivisibilityError { stubs: usize, k: usize },
    #[error("no simple graph found after {0} resampling attempts")]
    SimpleGraphTimeout(usize),
    #[error("truncated tree would exceed the node cap of {cap} nodes")]
    DepthTooLarge { cap: usize },
    #[error("no graph with girth >= {target} found after {retries} attempts")]
    GirthTimeout { target: usize, retries: usize },
}

/// One binary value per variable node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    /// Low `n` bits of `mask`, bit i = variable i.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self((0..n).map(|i| mask >> i & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, v: usize) -> bool {
        self.0[v]
    }

    pub fn set(&mut self, v: usize, value: bool) {
        self.0[v] = value;
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|b| !b).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }
}

/// Direction of a message along an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    VarToFactor,
    FactorToVar,
}

/// An edge instance together with a direction; indexes into 2|E| message slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DirectedEdgeId {
    pub edge: usize,
    pub dir: Direction,
}

impl DirectedEdgeId {
    /// Bijection onto 0..2|E|: variable→factor messages first.
    pub fn index(&self, n_edges: usize) -> usize {
        match self.dir {
            Direction::VarToFactor => self.edge,
            Direction::FactorToVar => n_edges + self.edge,
        }
    }
}

/// Bipartite multigraph with variable and factor partitions.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    n_vars: usize,
    n_factors: usize,
    edges: Vec<(usize, usize)>,
    var_adj: Vec<Vec<usize>>,
    factor_adj: Vec<Vec<usize>>,
    biregular: Option<(usize, usize)>,
}

impl FactorGraph {
    /// Builds a graph from an edge list, checking endpoint ranges and flagging
    /// (d,k)-biregularity when every degree matches.
    pub fn from_edges(n_vars: usize, n_factors: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut var_adj = vec![Vec::new(); n_vars];
        let mut factor_adj = vec![Vec::new(); n_factors];
        for (id, &(v, f)) in edges.iter().enumerate() {
            assert!(v < n_vars, "edge {id}: variable {v} out of range");
            assert!(f < n_factors, "edge {id}: factor {f} out of range");
            var_adj[v].push(id);
            factor_adj[f].push(id);
        }
        let mut g = Self {
            n_vars,
            n_factors,
            edges,
            var_adj,
            factor_adj,
            biregular: None,
        };
        g.biregular = g.detect_biregular();
        g
    }

    fn detect_biregular(&self) -> Option<(usize, usize)> {
        let d = self.var_adj.first().map(Vec::len)?;
        let k = self.factor_adj.first().map(Vec::len)?;
        if d == 0 || k == 0 {
            return None;
        }
        if self.var_adj.iter().all(|a| a.len() == d)
            && self.factor_adj.iter().all(|a| a.len() == k)
        {
            Some((d, k))
        } else {
            None
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_factors(&self) -> usize {
        self.n_factors
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_var(&self, e: usize) -> usize {
        self.edges[e].0
    }

    pub fn edge_factor(&self, e: usize) -> usize {
        self.edges[e].1
    }

    /// Edge ids incident to a variable.
    pub fn var_edges(&self, v: usize) -> &[usize] {
        &self.var_adj[v]
    }

    /// Edge ids incident to a factor.
    pub fn factor_edges(&self, f: usize) -> &[usize] {
        &self.factor_adj[f]
    }

    pub fn var_degree(&self, v: usize) -> usize {
        self.var_adj[v].len()
    }

    pub fn factor_degree(&self, f: usize) -> usize {
        self.factor_adj[f].len()
    }

    /// Neighbor variables of a factor, one entry per edge instance.
    pub fn factor_vars(&self, f: usize) -> impl Iterator<Item = usize> + '_ {
        self.factor_adj[f].iter().map(move |&e| self.edges[e].0)
    }

    /// Distinct neighbor variables of a factor with multiplicities.
    pub fn factor_vars_grouped(&self, f: usize) -> Vec<(usize, usize)> {
        let mut vars: Vec<usize> = self.factor_vars(f).collect();
        vars.sort_unstable();
        let mut grouped: Vec<(usize, usize)> = Vec::new();
        for v in vars {
            match grouped.last_mut() {
                Some((w, m)) if *w == v => *m += 1,
                _ => grouped.push((v, 1)),
            }
        }
        grouped
    }

    /// Per-variable incident factors with edge multiplicities.
    pub fn var_factors_grouped(&self, v: usize) -> Vec<(usize, usize)> {
        let mut factors: Vec<usize> = self.var_adj[v].iter().map(|&e| self.edges[e].1).collect();
        factors.sort_unstable();
        let mut grouped: Vec<(usize, usize)> = Vec::new();
        for f in factors {
            match grouped.last_mut() {
                Some((w, m)) if *w == f => *m += 1,
                _ => grouped.push((f, 1)),
            }
        }
        grouped
    }

    /// (d,k) when every variable has degree d and every factor degree k.
    pub fn biregular(&self) -> Option<(usize, usize)> {
        self.biregular
    }

    /// Uniform configuration-model (d,k)-biregular multigraph: n_vars*d
    /// variable stubs matched to a uniformly shuffled list of factor stubs.
    /// With `simple`, resamples until no parallel edge (bounded retries).
    pub fn biregular_random(
        d: usize,
        k: usize,
        n_vars: usize,
        seed: u64,
        simple: bool,
    ) -> Result<Self, GraphError> {
        let stubs = n_vars * d;
        if stubs % k != 0 {
            return Err(GraphError::DivisibilityError { stubs, k });
        }
        let n_factors = stubs / k;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        const MAX_RETRIES: usize = 1000;
        for _ in 0..MAX_RETRIES {
            let mut factor_stubs: Vec<usize> = (0..stubs).map(|s| s / k).collect();
            factor_stubs.shuffle(&mut rng);
            let edges: Vec<(usize, usize)> = factor_stubs
                .iter()
                .enumerate()
                .map(|(s, &f)| (s / d, f))
                .collect();
            let has_parallel = {
                let mut sorted = edges.clone();
                sorted.sort_unstable();
                sorted.windows(2).any(|w| w[0] == w[1])
            };
            if !simple || !has_parallel {
                return Ok(Self::from_edges(n_vars, n_factors, edges));
            }
        }
        Err(GraphError::SimpleGraphTimeout(MAX_RETRIES))
    }

    /// Resamples `biregular_random(simple=true)` until girth >= target.
    pub fn biregular_with_girth(
        d: usize,
        k: usize,
        n_vars: usize,
        seed: u64,
        min_girth: usize,
    ) -> Result<Self, GraphError> {
        const MAX_RETRIES: usize = 2000;
        for attempt in 0..MAX_RETRIES {
            let g = Self::biregular_random(d, k, n_vars, seed.wrapping_add(attempt as u64), true)?;
            if g.girth().map_or(true, |gi| gi >= min_girth) {
                return Ok(g);
            }
        }
        Err(GraphError::GirthTimeout {
            target: min_girth,
            retries: MAX_RETRIES,
        })
    }

    /// Alternating cycle v_0 f_0 v_1 f_1 ... v_{n-1} f_{n-1} v_0; n=1 yields a
    /// single variable doubly connected to a single factor.
    pub fn cycle(n: usize) -> Self {
        assert!(n >= 1);
        let mut edges = Vec::with_capacity(2 * n);
        for i in 0..n {
            edges.push((i, i));
            edges.push(((i + 1) % n, i));
        }
        Self::from_edges(n, n, edges)
    }

    /// Ball of the given factor-depth around a root factor: depth 0 is one
    /// factor with k leaf variables; each further level attaches d-1 fresh
    /// factors to every boundary variable and k-1 fresh variables to each of
    /// those. Returns the tree and the outermost (degree-1) variables.
    pub fn truncated_tree(d: usize, k: usize, depth: usize) -> Result<(Self, Vec<usize>), GraphError> {
        Self::truncated_tree_with_cap(d, k, depth, 1_000_000)
    }

    pub fn truncated_tree_with_cap(
        d: usize,
        k: usize,
        depth: usize,
        node_cap: usize,
    ) -> Result<(Self, Vec<usize>), GraphError> {
        assert!(d >= 2 && k >= 2);
        // Size check before allocating anything.
        let mut nodes = 1usize + k;
        let mut ring = k as u128;
        for _ in 0..depth {
            let new_factors = ring * (d as u128 - 1);
            let new_vars = new_factors * (k as u128 - 1);
            nodes = nodes
                .checked_add((new_factors + new_vars) as usize)
                .filter(|&n| n <= node_cap)
                .ok_or(GraphError::DepthTooLarge { cap: node_cap })?;
            ring = new_vars;
        }

        let mut edges = Vec::new();
        let mut n_vars = 0usize;
        let mut n_factors = 1usize;
        let mut boundary: Vec<usize> = (0..k).collect();
        n_vars += k;
        for v in &boundary {
            edges.push((*v, 0));
        }
        for _ in 0..depth {
            let mut next_boundary = Vec::new();
            for &v in &boundary {
                for _ in 0..d - 1 {
                    let f = n_factors;
                    n_factors += 1;
                    edges.push((v, f));
                    for _ in 0..k - 1 {
                        let w = n_vars;
                        n_vars += 1;
                        edges.push((w, f));
                        next_boundary.push(w);
                    }
                }
            }
            boundary = next_boundary;
        }
        Ok((Self::from_edges(n_vars, n_factors, edges), boundary))
    }

    /// Random bipartite tree grown by attaching factors of degree <= k_max to
    /// uniformly chosen existing variables. Connected and acyclic.
    pub fn random_tree(k_max: usize, n_vars_target: usize, seed: u64) -> Self {
        assert!(k_max >= 1 && n_vars_target >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut n_vars = 1usize;
        let mut n_factors = 0usize;
        let mut edges = Vec::new();
        while n_vars < n_vars_target {
            let anchor = rand::Rng::random_range(&mut rng, 0..n_vars);
            let remain = n_vars_target - n_vars;
            let deg = rand::Rng::random_range(&mut rng, 1..=k_max.min(remain + 1));
            let f = n_factors;
            n_factors += 1;
            edges.push((anchor, f));
            for _ in 0..deg - 1 {
                let w = n_vars;
                n_vars += 1;
                edges.push((w, f));
            }
        }
        Self::from_edges(n_vars, n_factors, edges)
    }

    /// Disjoint union; variable/factor ids of `other` are shifted.
    pub fn disjoint_union(&self, other: &Self) -> Self {
        let mut edges = self.edges.clone();
        edges.extend(
            other
                .edges
                .iter()
                .map(|&(v, f)| (v + self.n_vars, f + self.n_factors)),
        );
        Self::from_edges(
            self.n_vars + other.n_vars,
            self.n_factors + other.n_factors,
            edges,
        )
    }

    /// Length in edges of the shortest cycle of the bipartite incidence graph
    /// (always even), or `None` for forests. Any parallel edge gives 2.
    pub fn girth(&self) -> Option<usize> {
        // Parallel edges: duplicate (v,f) pairs.
        let mut sorted = self.edges.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Some(2);
        }
        // Simple graph: BFS from every node; min over roots of the first
        // non-tree edge closing a cycle is exact.
        let n_nodes = self.n_vars + self.n_factors;
        let adj = self.node_adjacency();
        let mut best: Option<usize> = None;
        let mut dist = vec![usize::MAX; n_nodes];
        let mut parent = vec![usize::MAX; n_nodes];
        let mut queue = std::collections::VecDeque::new();
        for root in 0..n_nodes {
            dist.fill(usize::MAX);
            parent.fill(usize::MAX);
            queue.clear();
            dist[root] = 0;
            queue.push_back(root);
            while let Some(u) = queue.pop_front() {
                if let Some(b) = best {
                    // Cycles through deeper nodes can't beat the current best.
                    if 2 * dist[u] + 2 > b {
                        break;
                    }
                }
                for &w in &adj[u] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        parent[w] = u;
                        queue.push_back(w);
                    } else if w != parent[u] {
                        let len = dist[u] + dist[w] + 1;
                        if best.map_or(true, |b| len < b) {
                            best = Some(len);
                        }
                    }
                }
            }
        }
        debug_assert!(best.map_or(true, |b| b % 2 == 0), "bipartite graphs have even girth");
        best
    }

    pub fn is_forest(&self) -> bool {
        self.girth().is_none()
    }

    /// Longest shortest path in edges over the bipartite incidence graph,
    /// taken over all connected pairs.
    pub fn diameter(&self) -> usize {
        let n_nodes = self.n_vars + self.n_factors;
        let adj = self.node_adjacency();
        let mut best = 0;
        let mut dist = vec![usize::MAX; n_nodes];
        for root in 0..n_nodes {
            dist.fill(usize::MAX);
            let mut queue = std::collections::VecDeque::new();
            dist[root] = 0;
            queue.push_back(root);
            while let Some(u) = queue.pop_front() {
                best = best.max(dist[u]);
                for &w in &adj[u] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        best
    }

    /// Unified node adjacency: node v in 0..n_vars is a variable, node
    /// n_vars+f a factor.
    fn node_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vars + self.n_factors];
        for &(v, f) in &self.edges {
            adj[v].push(self.n_vars + f);
            adj[self.n_vars + f].push(v);
        }
        adj
    }

    /// Internal consistency of the adjacency indexes against the edge list.
    pub fn audit(&self) -> bool {
        let mut count = 0;
        for (v, adj) in self.var_adj.iter().enumerate() {
            for &e in adj {
                if self.edges[e].0 != v {
                    return false;
                }
                count += 1;
            }
        }
        if count != self.edges.len() {
            return false;
        }
        for (f, adj) in self.factor_adj.iter().enumerate() {
            for &e in adj {
                if self.edges[e].1 != f {
                    return false;
                }
            }
        }
        true
    }

    /// Relabels nodes by the given permutations (testing utility).
    pub fn relabeled(&self, var_perm: &[usize], factor_perm: &[usize]) -> Self {
        let edges = self
            .edges
            .iter()
            .map(|&(v, f)| (var_perm[v], factor_perm[f]))
            .collect();
        Self::from_edges(self.n_vars, self.n_factors, edges)
    }
}
