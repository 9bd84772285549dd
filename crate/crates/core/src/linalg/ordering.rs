//! Fill-reducing column ordering.
//!
//! Greedy minimum degree on the pattern of `A + A^T` using an explicit
//! elimination graph. Adequate for the few-thousand-row systems the tracker
//! factors; ties go to the lowest index so the ordering is deterministic.

use std::collections::HashSet;
use std::sync::Mutex;

use super::SparseMatrix;

/// Remembers the ordering of the last sparsity pattern seen, so that a
/// sequence of matrices sharing one pattern is ordered only once.
#[derive(Debug, Default)]
pub struct OrderingCache {
    slot: Mutex<Option<Cached>>,
}

#[derive(Debug)]
struct Cached {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    order: Vec<usize>,
}

impl OrderingCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Minimum-degree ordering of `m`, reused when the pattern is unchanged.
    pub fn ordering(&self, m: &SparseMatrix) -> Vec<usize> {
        let mut slot = match self.slot.lock() {
            Ok(guard) => guard,
            Err(poisoned) => poisoned.into_inner(),
        };
        if let Some(c) = slot.as_ref() {
            if c.col_ptr == m.col_ptr() && c.row_idx == m.row_idx() {
                return c.order.clone();
            }
        }
        let order = minimum_degree(m);
        *slot = Some(Cached {
            col_ptr: m.col_ptr().to_vec(),
            row_idx: m.row_idx().to_vec(),
            order: order.clone(),
        });
        order
    }
}

/// Returns a permutation `q` where `q[k]` is the column eliminated at step `k`.
pub fn minimum_degree(m: &SparseMatrix) -> Vec<usize> {
    let n = m.ncols();
    assert!(m.is_square());
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for (i, j, _) in m.iter() {
        if i != j {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best = usize::MAX;
        let mut best_deg = usize::MAX;
        for v in 0..n {
            if !eliminated[v] && adj[v].len() < best_deg {
                best_deg = adj[v].len();
                best = v;
            }
        }
        eliminated[best] = true;
        order.push(best);
        let nbrs: Vec<usize> = adj[best].drain().collect();
        for &u in &nbrs {
            adj[u].remove(&best);
        }
        for (a, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[a + 1..] {
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
    }
    order
}
