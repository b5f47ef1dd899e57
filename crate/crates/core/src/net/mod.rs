//! Interference networks.
//!
//! A [`Network`] is a symmetric, nonnegative, zero-diagonal weight matrix
//! stored as sorted per-row adjacency lists. The neighbour set of unit `i` is
//! exactly the set of `j` with a nonzero weight.

mod distance;
mod generate;
mod pagerank;

pub use distance::{inverse_distance_network, AngularDistance};
pub use generate::{gen_barabasi_albert, gen_erdos_renyi};
pub use pagerank::{pagerank, pagerank_default, PageRankScores};

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Network {
    pub fn empty(n: usize) -> Self {
        Network {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    /// Builds a network from undirected edges. Each edge is mirrored; an edge
    /// given in both directions must carry the same weight. Zero weights are
    /// dropped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({i},{j}) out of range for {n} units"
                )));
            }
            if i == j {
                return Err(Error::InvalidNetwork(format!("self loop at unit {i}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({i},{j}) has weight {w}; weights must be finite and nonnegative"
                )));
            }
            let key = (i.min(j), i.max(j));
            match map.get(&key) {
                Some(&prev) if prev != w => {
                    return Err(Error::InvalidNetwork(format!(
                        "asymmetric weights for pair ({},{}): {prev} vs {w}",
                        key.0, key.1
                    )));
                }
                _ => {
                    map.insert(key, w);
                }
            }
        }
        let mut rows = vec![Vec::new(); n];
        for ((i, j), w) in map {
            if w > 0.0 {
                rows[i].push((j, w));
                rows[j].push((i, w));
            }
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(j, _)| j);
        }
        Ok(Network { n, rows })
    }

    /// Complete subgraph (unit weights) within each group label.
    pub fn from_groups(groups: &[usize]) -> Self {
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &g) in groups.iter().enumerate() {
            members.entry(g).or_default().push(i);
        }
        let mut rows = vec![Vec::new(); groups.len()];
        for units in members.values() {
            for &i in units {
                rows[i] = units
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (j, 1.0))
                    .collect();
            }
        }
        Network {
            n: groups.len(),
            rows,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(j, A_ij)` pairs for the neighbours of `i`, sorted by `j`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[i].iter().map(|&(j, _)| j)
    }

    /// `|N_i|`.
    pub fn degree(&self, i: usize) -> usize {
        self.rows[i].len()
    }

    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map(|pos| self.rows[i][pos].1)
            .unwrap_or(0.0)
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, w)| (i, j, w))
        })
    }

    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.n
    }

    /// Checks symmetry, zero diagonal, nonnegativity and sorted rows.
    pub fn validate(&self) -> Result<()> {
        if self.rows.len() != self.n {
            return Err(Error::InvalidNetwork("row count differs from n".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::InvalidNetwork(format!(
                    "row {i} not strictly sorted"
                )));
            }
            for &(j, w) in row {
                if j == i || j >= self.n {
                    return Err(Error::InvalidNetwork(format!("bad neighbour {j} of {i}")));
                }
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::InvalidNetwork(format!(
                        "bad weight {w} at ({i},{j})"
                    )));
                }
                if self.weight(j, i) != w {
                    return Err(Error::InvalidNetwork(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRecord {
    src: usize,
    dst: usize,
    w: f64,
}

/// Reads an edge list with header `src,dst,w` and 0-based unit indices.
/// Returns the network and the number of edges that had to be mirrored.
pub fn read_edge_list<R: Read>(reader: R, n: usize) -> Result<(Network, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut edges = Vec::new();
    for rec in rdr.deserialize() {
        let rec: EdgeRecord = rec?;
        edges.push((rec.src, rec.dst, rec.w));
    }
    let directed: std::collections::HashSet<(usize, usize)> =
        edges.iter().map(|&(i, j, _)| (i, j)).collect();
    let mirrored = edges
        .iter()
        .filter(|&&(i, j, _)| !directed.contains(&(j, i)))
        .count();
    Ok((Network::from_edges(n, edges)?, mirrored))
}

/// Writes each undirected edge once (`i < j`) under header `src,dst,w`.
pub fn write_edge_list<W: Write>(net: &Network, writer: W) -> Result<()> {
    // Explicit header so that an edgeless graph still gives a valid file.
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    wtr.write_record(["src", "dst", "w"])?;
    for (src, dst, w) in net.edges() {
        wtr.serialize(EdgeRecord { src, dst, w })?;
    }
    wtr.flush()?;
    Ok(())
}
