use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRankScores {
    pub scores: Vec<f64>,
    pub damping: f64,
    pub tolerance: f64,
    pub iterations: usize,
}

impl PageRankScores {
    /// L1 distance between `scores` and one application of the damped operator.
    pub fn residual(&self, net: &Network) -> f64 {
        let next = apply(net, &self.scores, self.damping);
        l1(&next, &self.scores)
    }
}

/// One step of the damped random-walk operator. Mass leaves node `j` along
/// its edges in proportion to weight; isolated nodes spread it uniformly.
pub(crate) fn apply(net: &Network, x: &[f64], damping: f64) -> Vec<f64> {
    let n = net.n();
    let nf = n as f64;
    let mut dangling = 0.0;
    let mut next = vec![0.0; n];
    for (j, &xj) in x.iter().enumerate() {
        let dj = net.weighted_degree(j);
        if dj > 0.0 {
            for &(i, w) in net.row(j) {
                next[i] += xj * w / dj;
            }
        } else {
            dangling += xj;
        }
    }
    let base = (1.0 - damping) / nf + damping * dangling / nf;
    for v in &mut next {
        *v = base + damping * *v;
    }
    next
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Power iteration from the uniform vector until successive iterates are
/// within `tol` in L1.
pub fn pagerank(net: &Network, damping: f64, tol: f64, max_iter: usize) -> Result<PageRankScores> {
    if !(damping > 0.0 && damping < 1.0) {
        return Err(invalid("damping", format!("{damping} is outside (0, 1)")));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let n = net.n();
    if n == 0 {
        return Err(invalid("net", "empty network"));
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let mut next = apply(net, &x, damping);
        let total: f64 = next.iter().sum();
        for v in &mut next {
            *v /= total;
        }
        residual = l1(&next, &x);
        x = next;
        if residual < tol {
            return Ok(PageRankScores {
                scores: x,
                damping,
                tolerance: tol,
                iterations: it,
            });
        }
    }
    Err(Error::PageRankNotConverged {
        iterations: max_iter,
        residual,
    })
}

pub fn pagerank_default(net: &Network) -> Result<PageRankScores> {
    pagerank(net, DEFAULT_DAMPING, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)
}
