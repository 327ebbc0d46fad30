//! Bipartite matching kernels.
//!
//! * [`max_cardinality_matching`] uses Hopcroft-Karp.
//! * [`max_vertex_weight_matching`] inserts left vertices in
//!   descending weight order and the matching only ever grows through
//!   augmenting paths, so a saturated left vertex is never unmatched. This
//!   is the matroid greedy algorithm for transversal matroids: the result
//!   maximizes the matched weight, and whenever the `k` heaviest left
//!   vertices can be saturated together, they are.
//! * [`max_edge_weight_matching`] runs the Hungarian method on the
//!   rectangular cost matrix (smaller side as rows), missing edges cost 0.
//!
//! All weights are exact integers.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchingError {
    #[error("edge ({left}, {right}) out of bounds for a {left_count}x{right_count} graph")]
    EdgeOutOfBounds { left: usize, right: usize, left_count: usize, right_count: usize },
    #[error("duplicate edge ({left}, {right})")]
    DuplicateEdge { left: usize, right: usize },
    #[error("perfect matching needs equal sides, got {left} and {right}")]
    UnequalSides { left: usize, right: usize },
    #[error("graph has no left vertex weights")]
    MissingVertexWeights,
    #[error("graph has no edge weights")]
    MissingEdgeWeights,
    #[error("expected {expected} left weights, got {got}")]
    WeightCount { expected: usize, got: usize },
}

const NONE: usize = usize::MAX;

/// Bipartite graph with optional left-vertex weights or edge weights.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BipartiteGraph {
    left_count: usize,
    right_count: usize,
    adj: Vec<Vec<usize>>,
    edge_weights: Option<Vec<Vec<u64>>>,
    left_weights: Option<Vec<u64>>,
}

impl BipartiteGraph {
    pub fn new(left_count: usize, right_count: usize) -> Self {
        Self { left_count, right_count, adj: vec![Vec::new(); left_count], edge_weights: None, left_weights: None }
    }

    pub fn left_count(&self) -> usize {
        self.left_count
    }

    pub fn right_count(&self) -> usize {
        self.right_count
    }

    pub fn neighbors(&self, left: usize) -> &[usize] {
        &self.adj[left]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, left: usize, right: usize) -> bool {
        self.adj.get(left).is_some_and(|a| a.contains(&right))
    }

    fn check_edge(&self, left: usize, right: usize) -> Result<(), MatchingError> {
        if left >= self.left_count || right >= self.right_count {
            return Err(MatchingError::EdgeOutOfBounds {
                left,
                right,
                left_count: self.left_count,
                right_count: self.right_count,
            });
        }
        if self.adj[left].contains(&right) {
            return Err(MatchingError::DuplicateEdge { left, right });
        }
        Ok(())
    }

    pub fn add_edge(&mut self, left: usize, right: usize) -> Result<(), MatchingError> {
        self.check_edge(left, right)?;
        self.adj[left].push(right);
        if let Some(w) = &mut self.edge_weights {
            w[left].push(0);
        }
        Ok(())
    }

    pub fn add_weighted_edge(&mut self, left: usize, right: usize, weight: u64) -> Result<(), MatchingError> {
        self.check_edge(left, right)?;
        let adj = &self.adj;
        let weights = self.edge_weights.get_or_insert_with(|| adj.iter().map(|a| vec![0; a.len()]).collect());
        self.adj[left].push(right);
        weights[left].push(weight);
        Ok(())
    }

    /// Pushes an edge the caller knows is in bounds and new.
    pub(crate) fn push_edge_unchecked(&mut self, left: usize, right: usize) {
        debug_assert!(left < self.left_count && right < self.right_count);
        debug_assert!(self.edge_weights.is_none());
        self.adj[left].push(right);
    }

    pub(crate) fn push_weighted_edge_unchecked(&mut self, left: usize, right: usize, weight: u64) {
        debug_assert!(left < self.left_count && right < self.right_count);
        let adj = &self.adj;
        let weights = self.edge_weights.get_or_insert_with(|| adj.iter().map(|a| vec![0; a.len()]).collect());
        self.adj[left].push(right);
        weights[left].push(weight);
    }

    pub fn set_left_weights(&mut self, weights: Vec<u64>) -> Result<(), MatchingError> {
        if weights.len() != self.left_count {
            return Err(MatchingError::WeightCount { expected: self.left_count, got: weights.len() });
        }
        self.left_weights = Some(weights);
        Ok(())
    }

    pub fn left_weights(&self) -> Option<&[u64]> {
        self.left_weights.as_deref()
    }

    /// Weight of edge `(left, right)` if the graph carries edge weights.
    pub fn edge_weight(&self, left: usize, right: usize) -> Option<u64> {
        let w = self.edge_weights.as_ref()?;
        let pos = self.adj[left].iter().position(|&r| r == right)?;
        Some(w[left][pos])
    }
}

/// A set of vertex-disjoint `(left, right)` edges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn from_pairs(mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        Self { pairs }
    }

    fn from_left_mates(mate: &[usize]) -> Self {
        Self { pairs: mate.iter().enumerate().filter(|(_, &r)| r != NONE).map(|(l, &r)| (l, r)).collect() }
    }

    /// Pairs sorted by left vertex.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn right_of(&self, left: usize) -> Option<usize> {
        self.pairs.iter().find(|(l, _)| *l == left).map(|&(_, r)| r)
    }

    pub fn is_left_matched(&self, left: usize) -> bool {
        self.right_of(left).is_some()
    }

    /// No vertex twice and every pair an edge of `g`.
    pub fn is_valid_for(&self, g: &BipartiteGraph) -> bool {
        let mut left_used = vec![false; g.left_count];
        let mut right_used = vec![false; g.right_count];
        for &(l, r) in &self.pairs {
            if l >= g.left_count || r >= g.right_count || left_used[l] || right_used[r] || !g.has_edge(l, r) {
                return false;
            }
            left_used[l] = true;
            right_used[r] = true;
        }
        true
    }

    pub fn left_weight_sum(&self, g: &BipartiteGraph) -> Option<u64> {
        let w = g.left_weights()?;
        Some(self.pairs.iter().map(|&(l, _)| w[l]).sum())
    }

    pub fn edge_weight_sum(&self, g: &BipartiteGraph) -> Option<u64> {
        self.pairs.iter().map(|&(l, r)| g.edge_weight(l, r)).sum()
    }
}

/// Maximum-cardinality matching (Hopcroft-Karp).
pub fn max_cardinality_matching(g: &BipartiteGraph) -> Matching {
    let mut mate_l = vec![NONE; g.left_count];
    let mut mate_r = vec![NONE; g.right_count];
    let mut dist = vec![0u32; g.left_count];
    let mut queue = VecDeque::new();

    loop {
        // BFS layers from free left vertices.
        queue.clear();
        let mut found = false;
        for u in 0..g.left_count {
            if mate_l[u] == NONE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = u32::MAX;
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &g.adj[u] {
                let w = mate_r[v];
                if w == NONE {
                    found = true;
                } else if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        let mut it = vec![0usize; g.left_count];
        for u in 0..g.left_count {
            if mate_l[u] == NONE {
                hk_dfs(g, u, &mut mate_l, &mut mate_r, &mut dist, &mut it);
            }
        }
    }
    Matching::from_left_mates(&mate_l)
}

fn hk_dfs(
    g: &BipartiteGraph,
    u: usize,
    mate_l: &mut [usize],
    mate_r: &mut [usize],
    dist: &mut [u32],
    it: &mut [usize],
) -> bool {
    while it[u] < g.adj[u].len() {
        let v = g.adj[u][it[u]];
        it[u] += 1;
        let w = mate_r[v];
        let ok = w == NONE || (dist[w] == dist[u] + 1 && hk_dfs(g, w, mate_l, mate_r, dist, it));
        if ok {
            mate_l[u] = v;
            mate_r[v] = u;
            return true;
        }
    }
    dist[u] = u32::MAX;
    false
}

pub fn has_perfect_matching(g: &BipartiteGraph) -> Result<bool, MatchingError> {
    if g.left_count != g.right_count {
        return Err(MatchingError::UnequalSides { left: g.left_count, right: g.right_count });
    }
    Ok(max_cardinality_matching(g).len() == g.left_count)
}

/// Maximum vertex-weighted matching on the left-vertex weights.
///
/// Ties between equal weights are broken by lower left index.
pub fn max_vertex_weight_matching(g: &BipartiteGraph) -> Result<Matching, MatchingError> {
    let weights = g.left_weights().ok_or(MatchingError::MissingVertexWeights)?;
    let mut order: Vec<usize> = (0..g.left_count).collect();
    order.sort_by(|&a, &b| weights[b].cmp(&weights[a]).then(a.cmp(&b)));

    let mut mate_l = vec![NONE; g.left_count];
    let mut mate_r = vec![NONE; g.right_count];
    let mut visited = vec![false; g.right_count];
    for u in order {
        if g.adj[u].is_empty() {
            continue;
        }
        visited.iter_mut().for_each(|v| *v = false);
        augment(g, u, &mut mate_l, &mut mate_r, &mut visited);
    }
    Ok(Matching::from_left_mates(&mate_l))
}

fn augment(g: &BipartiteGraph, u: usize, mate_l: &mut [usize], mate_r: &mut [usize], visited: &mut [bool]) -> bool {
    // Free neighbour first keeps most insertions O(deg).
    for &v in &g.adj[u] {
        if mate_r[v] == NONE {
            mate_l[u] = v;
            mate_r[v] = u;
            return true;
        }
    }
    for &v in &g.adj[u] {
        if visited[v] {
            continue;
        }
        visited[v] = true;
        if augment(g, mate_r[v], mate_l, mate_r, visited) {
            mate_l[u] = v;
            mate_r[v] = u;
            return true;
        }
    }
    false
}

/// Maximum edge-weight matching. Edges of weight 0 are never reported.
pub fn max_edge_weight_matching(g: &BipartiteGraph) -> Result<Matching, MatchingError> {
    if g.edge_weights.is_none() {
        if g.edge_count() == 0 {
            return Ok(Matching::default());
        }
        return Err(MatchingError::MissingEdgeWeights);
    }
    let transpose = g.left_count > g.right_count;
    let (rows, cols) = if transpose { (g.right_count, g.left_count) } else { (g.left_count, g.right_count) };
    if rows == 0 {
        return Ok(Matching::default());
    }
    let mut weight = vec![0i64; rows * cols];
    for (l, adj) in g.adj.iter().enumerate() {
        for (k, &r) in adj.iter().enumerate() {
            let w = g.edge_weights.as_ref().map_or(0, |ew| ew[l][k]) as i64;
            let (row, col) = if transpose { (r, l) } else { (l, r) };
            weight[row * cols + col] = w;
        }
    }
    let row_to_col = max_weight_assignment(rows, cols, &weight);
    let pairs = row_to_col
        .into_iter()
        .enumerate()
        .filter(|&(row, col)| weight[row * cols + col] > 0)
        .map(|(row, col)| if transpose { (col, row) } else { (row, col) })
        .collect();
    Ok(Matching::from_pairs(pairs))
}

/// Hungarian method (potentials + shortest augmenting paths) maximizing the
/// total weight of a row-perfect assignment on a dense `rows x cols` matrix,
/// `rows <= cols`. Runs in `O(rows^2 * cols)`.
pub(crate) fn max_weight_assignment(rows: usize, cols: usize, weight: &[i64]) -> Vec<usize> {
    assert!(rows <= cols, "assignment needs rows <= cols");
    let cost = |r: usize, c: usize| -weight[r * cols + c];
    let mut u = vec![0i64; rows + 1];
    let mut v = vec![0i64; cols + 1];
    // col_row[c] is the 1-based row owning 1-based column c; index 0 is the virtual column.
    let mut col_row = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![0i64; cols + 1];
    let mut used = vec![false; cols + 1];

    for i in 1..=rows {
        col_row[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = i64::MAX);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; rows];
    for j in 1..=cols {
        if col_row[j] != 0 {
            row_to_col[col_row[j] - 1] = j - 1;
        }
    }
    row_to_col
}
