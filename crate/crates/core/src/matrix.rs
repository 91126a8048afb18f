//! Dense 0/1 matrices for the incidence and adjacency encodings.
//!
//! Networks handled here are small (tens to a few hundred nodes), so a
//! row-major `Vec<u8>` is simpler and faster than a sparse format. The
//! sparse coordinate view is still available through [`BinaryMatrix::nonzeros`].

use crate::error::{Error, Result};
use crate::vectors::SwitchVector;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Zero-based access.
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.cols + col] = u8::from(value);
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn total(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.cols];
        for r in 0..self.rows {
            for (c, &v) in self.row(r).iter().enumerate() {
                sums[c] += v as usize;
            }
        }
        sums
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn diagonal_is_zero(&self) -> bool {
        (0..self.rows.min(self.cols)).all(|i| self.get(i, i) == 0)
    }

    /// Zero-based `(row, col)` coordinates of every 1, row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(k, _)| (k / self.cols, k % self.cols))
    }

    /// `self · selfᵀ` with integer accumulation.
    fn gram(&self) -> Vec<u32> {
        let n = self.rows;
        let mut out = vec![0u32; n * n];
        for i in 0..n {
            let ri = self.row(i);
            for k in i..n {
                let rk = self.row(k);
                let dot: u32 = ri.iter().zip(rk).map(|(&a, &b)| (a & b) as u32).sum();
                out[i * n + k] = dot;
                out[k * n + i] = dot;
            }
        }
        out
    }
}

/// `|V| × |E|` node/edge incidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix(pub(crate) BinaryMatrix);

/// `|V| × |V|` node adjacency over closed edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix(pub(crate) BinaryMatrix);

impl IncidenceMatrix {
    pub fn matrix(&self) -> &BinaryMatrix {
        &self.0
    }

    pub fn node_count(&self) -> usize {
        self.0.rows
    }

    pub fn edge_count(&self) -> usize {
        self.0.cols
    }

    /// Incidence of a bare graph given zero-based edge endpoints.
    pub fn from_endpoints(nodes: usize, endpoints: &[(usize, usize)]) -> Result<IncidenceMatrix> {
        let mut m = BinaryMatrix::zeros(nodes, endpoints.len());
        for (j, &(a, b)) in endpoints.iter().enumerate() {
            if a >= nodes || b >= nodes || a == b {
                return Err(Error::InvalidParameter(format!(
                    "edge {} has endpoints ({a}, {b}) in a {nodes}-node graph",
                    j + 1
                )));
            }
            m.set(a, j, true);
            m.set(b, j, true);
        }
        Ok(IncidenceMatrix(m))
    }

    /// Zero every column whose switch is open, i.e. `M_i · diag(V_r)`.
    pub fn masked(&self, switches: &SwitchVector) -> Result<IncidenceMatrix> {
        if switches.len() != self.edge_count() {
            return Err(Error::DimensionMismatch {
                expected: self.edge_count(),
                found: switches.len(),
            });
        }
        let mut m = self.0.clone();
        for (c, closed) in switches.bits().iter().enumerate() {
            if !closed {
                for r in 0..m.rows {
                    m.set(r, c, false);
                }
            }
        }
        Ok(IncidenceMatrix(m))
    }
}

impl AdjacencyMatrix {
    pub fn matrix(&self) -> &BinaryMatrix {
        &self.0
    }

    pub fn node_count(&self) -> usize {
        self.0.rows
    }

    /// Zero-based neighbour test.
    pub fn connected(&self, i: usize, j: usize) -> bool {
        self.0.get(i, j) != 0
    }
}

/// Switched-topology adjacency: mask the open columns of the incidence
/// matrix, form `M_i · M_iᵀ`, clear the diagonal (node degrees) and clamp
/// what remains to `{0, 1}`.
pub fn adjacency_from_incidence(
    incidence: &IncidenceMatrix,
    switches: &SwitchVector,
) -> Result<AdjacencyMatrix> {
    let masked = incidence.masked(switches)?;
    let n = masked.node_count();
    let gram = masked.0.gram();
    let mut adj = BinaryMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && gram[i * n + j] != 0 {
                adj.set(i, j, true);
            }
        }
    }
    Ok(AdjacencyMatrix(adj))
}
