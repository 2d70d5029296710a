use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed summary graph over `N` variables. `adjacency[i][j]` means `i → j`.
/// The diagonal is always false.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalGraph {
    n: usize,
    adjacency: Vec<bool>,
}

impl CausalGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adjacency: vec![false; n * n],
        }
    }

    /// Every ordered off-diagonal pair set.
    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for (i, j) in off_diagonal_pairs(n) {
            g.set(i, j, true);
        }
        g
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::empty(n);
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!("edge {i}->{j} outside {n} nodes")));
            }
            if i == j {
                return Err(Error::InvalidParameter(format!("self-edge on node {i}")));
            }
            g.set(i, j, true);
        }
        Ok(g)
    }

    /// Builds from nested 0/1 rows; the diagonal must be zero.
    pub fn from_matrix(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut g = Self::empty(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                match (v, i == j) {
                    (0, _) => {}
                    (1, false) => g.set(i, j, true),
                    (1, true) => return Err(Error::InvalidParameter(format!("self-edge on node {i}"))),
                    _ => return Err(Error::InvalidParameter(format!("adjacency entry {v} is not 0/1"))),
                }
            }
        }
        Ok(g)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    /// Sets `i → j`. Diagonal writes are ignored.
    pub fn set(&mut self, i: usize, j: usize, present: bool) {
        if i != j {
            self.adjacency[i * self.n + j] = present;
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        off_diagonal_pairs(self.n).filter(|&(i, j)| self.has_edge(i, j))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&b| b).count()
    }

    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| u8::from(self.has_edge(i, j))).collect())
            .collect()
    }
}

/// All ordered pairs `(i, j)` with `i ≠ j`, row-major.
pub fn off_diagonal_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
}
