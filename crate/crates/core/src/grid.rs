//! Observation grid and its sparse neighbor graph.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SparkError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `D⁻¹A`: each row sums to one (neighbor mean).
    #[default]
    Row,
    /// `D^{-1/2} A D^{-1/2}`.
    Symmetric,
    /// Raw 0/1 adjacency.
    Binary,
}

/// Sparse `n×n` matrix in CSR form, with its transpose kept for backward passes.
///
/// Row entries keep the order in which edges were supplied, so relabeling the
/// nodes of an edge list relabels every row sum without reordering it.
#[derive(Clone, Debug, PartialEq)]
pub struct Adjacency {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    t_row_ptr: Vec<usize>,
    t_cols: Vec<usize>,
    t_vals: Vec<f64>,
}

fn build_csr(n: usize, entries: &[(usize, usize, f64)]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let mut counts = vec![0usize; n + 1];
    for &(r, _, _) in entries {
        counts[r + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let row_ptr = counts.clone();
    let mut fill = counts;
    let mut cols = vec![0; entries.len()];
    let mut vals = vec![0.0; entries.len()];
    for &(r, c, v) in entries {
        let at = fill[r];
        cols[at] = c;
        vals[at] = v;
        fill[r] += 1;
    }
    (row_ptr, cols, vals)
}

impl Adjacency {
    /// Build from an undirected edge list. Each `(a, b)` contributes both
    /// directions; duplicates are dropped and self-loops are kept only when
    /// listed explicitly as `(i, i)`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], norm: Normalization) -> Result<Self> {
        let mut directed: Vec<(usize, usize)> = Vec::with_capacity(edges.len() * 2);
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(SparkError::shape(
                    "adjacency",
                    format!("edge ({a}, {b}) outside {n} nodes"),
                ));
            }
            for (r, c) in [(a, b), (b, a)] {
                if seen.insert((r, c)) {
                    directed.push((r, c));
                }
            }
        }
        let mut degree = vec![0usize; n];
        for &(r, _) in &directed {
            degree[r] += 1;
        }
        let entries: Vec<(usize, usize, f64)> = directed
            .iter()
            .map(|&(r, c)| {
                let v = match norm {
                    Normalization::Binary => 1.0,
                    Normalization::Row => 1.0 / degree[r] as f64,
                    Normalization::Symmetric => 1.0 / ((degree[r] as f64).sqrt() * (degree[c] as f64).sqrt()),
                };
                (r, c, v)
            })
            .collect();
        let (row_ptr, cols, vals) = build_csr(n, &entries);
        let transposed: Vec<(usize, usize, f64)> = entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        let (t_row_ptr, t_cols, t_vals) = build_csr(n, &transposed);
        Ok(Self {
            n,
            row_ptr,
            cols,
            vals,
            t_row_ptr,
            t_cols,
            t_vals,
        })
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn isolated_nodes(&self) -> usize {
        (0..self.n).filter(|&i| self.degree(i) == 0).count()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    fn apply(row_ptr: &[usize], cols: &[usize], vals: &[f64], x: &[f64], c: usize) -> Vec<f64> {
        let n = row_ptr.len() - 1;
        let mut out = vec![0.0; n * c];
        for i in 0..n {
            let orow = &mut out[i * c..(i + 1) * c];
            for e in row_ptr[i]..row_ptr[i + 1] {
                let src = &x[cols[e] * c..(cols[e] + 1) * c];
                let v = vals[e];
                for (o, s) in orow.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        out
    }

    /// `A · x` for `x` of shape `[n, c]`.
    pub fn spmm(&self, x: &[f64], c: usize) -> Vec<f64> {
        Self::apply(&self.row_ptr, &self.cols, &self.vals, x, c)
    }

    /// `Aᵀ · x`.
    pub fn spmm_t(&self, x: &[f64], c: usize) -> Vec<f64> {
        Self::apply(&self.t_row_ptr, &self.t_cols, &self.t_vals, x, c)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.neighbors(i) {
                d[i * self.n + j] += v;
            }
        }
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    /// 4 or 8.
    pub neighbors: usize,
    pub periodic: bool,
    pub self_loops: bool,
    pub normalization: Normalization,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            height: 32,
            width: 32,
            neighbors: 4,
            periodic: true,
            self_loops: false,
            normalization: Normalization::Row,
        }
    }
}

/// `H×W` regular grid of observation points with a normalized neighbor graph.
#[derive(Clone, Debug)]
pub struct GridGraph {
    pub spec: GridSpec,
    pub adjacency: Arc<Adjacency>,
}

impl GridGraph {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let GridSpec {
            height: h,
            width: w,
            neighbors,
            periodic,
            self_loops,
            normalization,
        } = spec;
        if h == 0 || w == 0 {
            return Err(SparkError::Config("grid extents must be positive".into()));
        }
        let offsets: &[(i64, i64)] = match neighbors {
            4 => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            8 => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
            k => return Err(SparkError::Config(format!("neighbors must be 4 or 8, got {k}"))),
        };
        let mut edges = Vec::new();
        for i in 0..h {
            for j in 0..w {
                let a = i * w + j;
                if self_loops {
                    edges.push((a, a));
                }
                for &(di, dj) in offsets {
                    let (mut ni, mut nj) = (i as i64 + di, j as i64 + dj);
                    if periodic {
                        ni = ni.rem_euclid(h as i64);
                        nj = nj.rem_euclid(w as i64);
                    } else if ni < 0 || nj < 0 || ni >= h as i64 || nj >= w as i64 {
                        continue;
                    }
                    let b = ni as usize * w + nj as usize;
                    if b != a {
                        edges.push((a, b));
                    }
                }
            }
        }
        let adjacency = Adjacency::from_edges(h * w, &edges, normalization)?;
        if adjacency.isolated_nodes() > 0 {
            return Err(SparkError::Config(format!(
                "{h}×{w} grid leaves {} node(s) without neighbors",
                adjacency.isolated_nodes()
            )));
        }
        Ok(Self {
            spec,
            adjacency: Arc::new(adjacency),
        })
    }

    pub fn periodic(height: usize, width: usize) -> Result<Self> {
        Self::new(GridSpec {
            height,
            width,
            ..GridSpec::default()
        })
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn nodes(&self) -> usize {
        self.spec.height * self.spec.width
    }

    /// Position `s_i = (x, y) ∈ [0,1)²` of node `i = row·W + col`.
    pub fn position(&self, i: usize) -> (f64, f64) {
        let (row, col) = (i / self.spec.width, i % self.spec.width);
        (
            col as f64 / self.spec.width as f64,
            row as f64 / self.spec.height as f64,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_four_neighbor_is_symmetric_and_row_stochastic() {
        let g = GridGraph::new(GridSpec {
            height: 5,
            width: 4,
            normalization: Normalization::Binary,
            ..GridSpec::default()
        })
        .unwrap();
        let n = g.nodes();
        let d = g.adjacency.to_dense();
        for i in 0..n {
            assert_eq!(d[i * n + i], 0.0, "no self loops");
            for j in 0..n {
                assert_eq!(d[i * n + j], d[j * n + i]);
            }
            assert_eq!(g.adjacency.degree(i), 4);
        }
        let r = GridGraph::periodic(5, 4).unwrap();
        let d = r.adjacency.to_dense();
        for i in 0..n {
            let s: f64 = d[i * n..(i + 1) * n].iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn open_boundary_corners_have_two_neighbors() {
        let g = GridGraph::new(GridSpec {
            height: 3,
            width: 3,
            periodic: false,
            ..GridSpec::default()
        })
        .unwrap();
        assert_eq!(g.adjacency.degree(0), 2);
        assert_eq!(g.adjacency.degree(4), 4);
        let g8 = GridGraph::new(GridSpec {
            height: 3,
            width: 3,
            periodic: false,
            neighbors: 8,
            ..GridSpec::default()
        })
        .unwrap();
        assert_eq!(g8.adjacency.degree(0), 3);
        assert_eq!(g8.adjacency.degree(4), 8);
    }

    #[test]
    fn single_node_grid_is_rejected() {
        assert!(GridGraph::new(GridSpec {
            height: 1,
            width: 1,
            ..GridSpec::default()
        })
        .is_err());
    }

    #[test]
    fn symmetric_normalization_matches_dense_formula() {
        let g = GridGraph::new(GridSpec {
            height: 3,
            width: 4,
            periodic: false,
            normalization: Normalization::Symmetric,
            ..GridSpec::default()
        })
        .unwrap();
        let n = g.nodes();
        let d = g.adjacency.to_dense();
        for i in 0..n {
            for (j, v) in g.adjacency.neighbors(i) {
                let want = 1.0 / ((g.adjacency.degree(i) as f64) * (g.adjacency.degree(j) as f64)).sqrt();
                assert!((v - want).abs() < 1e-15);
                assert_eq!(d[i * n + j], d[j * n + i]);
            }
        }
    }

    #[test]
    fn spmm_transpose_matches_dense() {
        let g = GridGraph::new(GridSpec {
            height: 3,
            width: 3,
            periodic: false,
            ..GridSpec::default()
        })
        .unwrap();
        let n = g.nodes();
        let x: Vec<f64> = (0..n * 2).map(|v| v as f64 * 0.5 - 2.0).collect();
        let d = g.adjacency.to_dense();
        let got = g.adjacency.spmm_t(&x, 2);
        for j in 0..n {
            for c in 0..2 {
                let want: f64 = (0..n).map(|i| d[i * n + j] * x[i * 2 + c]).sum();
                assert!((got[j * 2 + c] - want).abs() < 1e-14);
            }
        }
    }
}
