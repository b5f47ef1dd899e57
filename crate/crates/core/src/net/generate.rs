use rand::Rng;

use super::Network;
use crate::error::{invalid, Result};

/// G(n, p): each unordered pair is joined independently with probability `p`.
pub fn gen_erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Network> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("{p} is outside [0, 1]")));
    }
    let mut rows = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                rows[i].push((j, 1.0));
                rows[j].push((i, 1.0));
            }
        }
    }
    // Pairs are visited in lexicographic order, so every row is already sorted.
    Ok(Network { n, rows })
}

/// Preferential attachment grown from a ring on the first `n0` nodes.
///
/// The seed graph is a cycle when `n0 >= 3`, a single edge when `n0 == 2`
/// and an isolated node when `n0 == 1`. Every later node attaches to `k`
/// distinct existing nodes chosen with probability proportional to degree
/// (uniformly while all degrees are zero).
pub fn gen_barabasi_albert<R: Rng + ?Sized>(
    n: usize,
    n0: usize,
    k: usize,
    rng: &mut R,
) -> Result<Network> {
    if k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    if k > n0 {
        return Err(invalid(
            "k",
            format!("k = {k} exceeds the seed size n0 = {n0}"),
        ));
    }
    if n0 > n {
        return Err(invalid("n0", format!("n0 = {n0} exceeds n = {n}")));
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    // Each edge endpoint appears once, so uniform sampling from this list
    // is degree-proportional sampling.
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * (n0 + (n - n0) * k));
    match n0 {
        0 | 1 => {}
        2 => connect(&mut rows, &mut endpoints, 0, 1),
        _ => {
            for i in 0..n0 {
                connect(&mut rows, &mut endpoints, i, (i + 1) % n0);
            }
        }
    }
    let mut targets: Vec<usize> = Vec::with_capacity(k);
    for new in n0..n {
        targets.clear();
        while targets.len() < k {
            let t = if endpoints.is_empty() {
                rng.random_range(0..new)
            } else {
                endpoints[rng.random_range(0..endpoints.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            connect(&mut rows, &mut endpoints, new, t);
        }
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|&(j, _)| j);
    }
    Ok(Network { n, rows })
}

fn connect(rows: &mut [Vec<(usize, f64)>], endpoints: &mut Vec<usize>, a: usize, b: usize) {
    rows[a].push((b, 1.0));
    rows[b].push((a, 1.0));
    endpoints.push(a);
    endpoints.push(b);
}

#[cfg(test)]
/// Edge count of the ring seed graph used by [`gen_barabasi_albert`].
pub(crate) fn ring_edges(n0: usize) -> usize {
    match n0 {
        0 | 1 => 0,
        2 => 1,
        _ => n0,
    }
}
