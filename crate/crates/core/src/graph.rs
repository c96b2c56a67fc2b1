//! Undirected multigraphs over photons, and the edge-list file format.
//!
//! Nodes are zero-based in memory and one-based in files.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Self-loops are rejected; parallel edges and isolated nodes are allowed.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        for (id, &(u, v)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {} ({}, {}) references a node beyond {n}",
                    id + 1,
                    u + 1,
                    v + 1
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!(
                    "edge {} is a self-loop on node {}",
                    id + 1,
                    u + 1
                )));
            }
        }
        Ok(Graph { n, edges })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Degree with parallel edges counted separately.
    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == v || b == v)
            .count()
    }

    /// Edge ids touching `v`, in file order.
    pub fn incident_edges(&self, v: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&id| {
                let (a, b) = self.edges[id];
                a == v || b == v
            })
            .collect()
    }

    pub fn other_end(&self, id: usize, v: usize) -> usize {
        let (a, b) = self.edges[id];
        if a == v {
            b
        } else {
            a
        }
    }

    /// Distinct neighbours of `v`.
    pub fn neighbours(&self, v: usize) -> BTreeSet<usize> {
        self.incident_edges(v)
            .into_iter()
            .map(|id| self.other_end(id, v))
            .collect()
    }

    /// Connected components, each sorted, ordered by smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(u, v) in &self.edges {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; self.n];
        for v in 0..self.n {
            let r = find(&mut parent, v);
            if slot[r] == usize::MAX {
                slot[r] = out.len();
                out.push(Vec::new());
            }
            out[slot[r]].push(v);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// PEPS graphs need every photon on at least one edge.
    pub fn check_no_isolated(&self) -> Result<()> {
        match (0..self.n).find(|&v| self.degree(v) == 0) {
            Some(v) => Err(Error::InvalidGraph(format!("node {} has no edges", v + 1))),
            None => Ok(()),
        }
    }

    pub fn check_simple(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (id, &(u, v)) in self.edges.iter().enumerate() {
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!(
                    "edge {} duplicates ({}, {}); graph must be simple",
                    id + 1,
                    u + 1,
                    v + 1
                )));
            }
        }
        Ok(())
    }
}

/// Parses `u v` lines (one-based). A line with a single id declares a node
/// without adding an edge; `#` starts a comment.
pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut n = 0usize;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let ids = line
            .split_whitespace()
            .map(|t| match t.parse::<usize>() {
                Ok(0) | Err(_) => Err(Error::Parse(format!(
                    "line {}: expected positive node id, got {t:?}",
                    lineno + 1
                ))),
                Ok(x) => Ok(x),
            })
            .collect::<Result<Vec<_>>>()?;
        match ids[..] {
            [u] => n = n.max(u),
            [u, v] => {
                if u == v {
                    return Err(Error::Parse(format!(
                        "line {}: self-loop on node {u}",
                        lineno + 1
                    )));
                }
                n = n.max(u).max(v);
                edges.push((u - 1, v - 1));
            }
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: expected \"u v\", got {} fields",
                    lineno + 1,
                    ids.len()
                )))
            }
        }
    }
    Graph::new(n, edges)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    parse_graph(&std::fs::read_to_string(path)?)
}

pub fn format_graph(g: &Graph) -> String {
    let mut s = String::new();
    for v in (0..g.n).filter(|&v| g.degree(v) == 0) {
        let _ = writeln!(s, "{}", v + 1);
    }
    for &(u, v) in &g.edges {
        let _ = writeln!(s, "{} {}", u + 1, v + 1);
    }
    s
}

/// Multigraph on `n` nodes with `e ≥ ⌈n/2⌉` edges and no isolated node.
/// Parallel edges are allowed; the graph may be disconnected.
pub fn random_multigraph<R: Rng + ?Sized>(rng: &mut R, n: usize, e: usize) -> Graph {
    assert!(n >= 2 && e >= n.div_ceil(2));
    let mut edges = Vec::with_capacity(e);
    let mut covered = vec![false; n];
    for v in 0..n {
        if !covered[v] {
            covered[v] = true;
            let open: Vec<usize> = (0..n).filter(|&w| !covered[w]).collect();
            let w = if open.is_empty() {
                let w = rng.gen_range(0..n - 1);
                w + usize::from(w >= v)
            } else {
                open[rng.gen_range(0..open.len())]
            };
            covered[w] = true;
            edges.push((v, w));
        }
    }
    while edges.len() < e {
        let u = rng.gen_range(0..n);
        let mut v = rng.gen_range(0..n - 1);
        if v >= u {
            v += 1;
        }
        edges.push((u, v));
    }
    Graph::new(n, edges).expect("generated graph is valid")
}

/// Connected multigraph: a random spanning tree plus `e − n + 1` extra edges.
pub fn random_connected_graph<R: Rng + ?Sized>(rng: &mut R, n: usize, e: usize) -> Graph {
    assert!(n >= 2 && e + 1 >= n);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    while edges.len() < e {
        let u = rng.gen_range(0..n);
        let mut v = rng.gen_range(0..n - 1);
        if v >= u {
            v += 1;
        }
        edges.push((u, v));
    }
    Graph::new(n, edges).expect("generated graph is valid")
}

/// Erdős–Rényi graph with edge probability `p`, edges in shuffled order.
pub fn random_simple_graph<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> Graph {
    use rand::seq::SliceRandom;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    edges.shuffle(rng);
    Graph::new(n, edges).expect("generated graph is valid")
}
