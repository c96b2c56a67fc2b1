//! PEPS from protocols with rescattering.
//!
//! Each scattering event is the tensor `U S^{ij}` (the atom rotations that
//! follow an event are folded into it). A node multiplies its events in
//! visit order, chaining the photon index, and the atom index between two
//! consecutive events of a trail becomes the bond for the edge the walk
//! traverses. Node tensors carry axes `p` then `e<id>` for each incident
//! edge in file order (ids one-based).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::atom::{AtomModel, A_IN, B_OUT, I_IN, J_OUT};
use crate::error::{Error, Result};
use crate::format::{nested_to_tensor, tensor_to_nested};
use crate::graph::Graph;
use crate::protocol::{Instruction, Protocol};
use crate::tensor::Tensor;

pub const PHYS: &str = "p";

pub fn bond_label(edge: usize) -> String {
    format!("e{}", edge + 1)
}

/// Node visits grouped into trails, each consecutive pair consuming one
/// graph edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScatterWalk {
    graph: Graph,
    trails: Vec<Vec<usize>>,
    trail_edges: Vec<Vec<usize>>,
}

impl ScatterWalk {
    /// Each step takes the first not-yet-used edge joining its endpoints.
    /// Every edge must be used exactly once.
    pub fn new(graph: Graph, trails: Vec<Vec<usize>>) -> Result<Self> {
        let mut used = vec![false; graph.edge_count()];
        let mut trail_edges = Vec::with_capacity(trails.len());
        let mut event = 0;
        for (t, trail) in trails.iter().enumerate() {
            if trail.is_empty() {
                return Err(Error::InvalidWalk(format!("trail {} is empty", t + 1)));
            }
            if let Some(&v) = trail.iter().find(|&&v| v >= graph.node_count()) {
                return Err(Error::InvalidWalk(format!(
                    "node {} is not in the graph",
                    v + 1
                )));
            }
            let mut ids = Vec::with_capacity(trail.len().saturating_sub(1));
            event += 1;
            for w in trail.windows(2) {
                event += 1;
                let (u, v) = (w[0], w[1]);
                let joins = |&(a, b): &(usize, usize)| (a, b) == (u, v) || (a, b) == (v, u);
                let mut matching = graph
                    .edges()
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| joins(e))
                    .peekable();
                if matching.peek().is_none() {
                    return Err(Error::InvalidWalk(format!(
                        "scatter event {event}: ({}, {}) is not an edge",
                        u + 1,
                        v + 1
                    )));
                }
                let id = matching
                    .map(|(id, _)| id)
                    .find(|&id| !used[id])
                    .ok_or_else(|| {
                        Error::InvalidWalk(format!(
                            "scatter event {event}: edge ({}, {}) consumed twice",
                            u + 1,
                            v + 1
                        ))
                    })?;
                used[id] = true;
                ids.push(id);
            }
            trail_edges.push(ids);
        }
        if let Some(id) = used.iter().position(|u| !u) {
            let (a, b) = graph.edges()[id];
            return Err(Error::InvalidWalk(format!(
                "edge {} ({}, {}) is never traversed",
                id + 1,
                a + 1,
                b + 1
            )));
        }
        Ok(ScatterWalk {
            graph,
            trails,
            trail_edges,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn trails(&self) -> &[Vec<usize>] {
        &self.trails
    }

    /// Edge ids consumed by each trail, in walk order.
    pub fn trail_edges(&self) -> &[Vec<usize>] {
        &self.trail_edges
    }

    pub fn visits(&self) -> Vec<usize> {
        self.trails.iter().flatten().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Peps {
    graph: Graph,
    tensors: Vec<Tensor>,
}

impl Peps {
    /// Tensors are permuted to `(p, incident edges in file order)`.
    pub fn new(graph: Graph, tensors: Vec<Tensor>) -> Result<Self> {
        graph.check_no_isolated()?;
        if tensors.len() != graph.node_count() {
            return Err(Error::InvalidPeps(format!(
                "{} tensors for {} nodes",
                tensors.len(),
                graph.node_count()
            )));
        }
        let tensors = tensors
            .into_iter()
            .enumerate()
            .map(|(v, t)| {
                let labels = node_labels(&graph, v);
                let want: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
                let got: BTreeSet<&str> = t.labels().iter().map(String::as_str).collect();
                if want != got || t.rank() != labels.len() {
                    return Err(Error::InvalidPeps(format!(
                        "node {} has axes {:?}, expected {:?}",
                        v + 1,
                        t.labels(),
                        labels
                    )));
                }
                let order: Vec<&str> = labels.iter().map(String::as_str).collect();
                Ok(t.permuted(&order)?)
            })
            .collect::<Result<Vec<_>>>()?;
        for (id, &(u, v)) in graph.edges().iter().enumerate() {
            let l = bond_label(id);
            let (du, dv) = (tensors[u].dim(&l)?, tensors[v].dim(&l)?);
            if du != dv {
                return Err(Error::InvalidPeps(format!(
                    "bond {l} has size {du} at node {} but {dv} at node {}",
                    u + 1,
                    v + 1
                )));
            }
        }
        Ok(Peps { graph, tensors })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn node_tensor(&self, v: usize) -> &Tensor {
        &self.tensors[v]
    }

    pub fn bond_axis_count(&self, v: usize) -> usize {
        self.tensors[v].rank() - 1
    }

    /// Replaces a node tensor, e.g. to insert a gauge transformation.
    pub fn with_tensor(&self, v: usize, t: Tensor) -> Result<Self> {
        let mut tensors = self.tensors.clone();
        tensors[v] = t;
        Peps::new(self.graph.clone(), tensors)
    }
}

fn node_labels(g: &Graph, v: usize) -> Vec<String> {
    std::iter::once(PHYS.to_string())
        .chain(g.incident_edges(v).into_iter().map(bond_label))
        .collect()
}

struct Event {
    node: usize,
    trail: usize,
    pos: usize,
    rotation: nalgebra::DMatrix<C64>,
}

/// Compiles a protocol whose scatter order follows `walk` into node tensors.
pub fn build_peps(p: &Protocol, walk: &ScatterWalk) -> Result<Peps> {
    let g = walk.graph();
    g.check_no_isolated()?;
    if p.photon_count() != g.node_count() {
        return Err(Error::Dimension {
            what: "photons vs graph nodes".into(),
            expected: g.node_count(),
            got: p.photon_count(),
        });
    }
    let scatters: Vec<usize> = p.trails().into_iter().flatten().collect();
    let visits = walk.visits();
    for (event, (&want, &got)) in visits.iter().zip(&scatters).enumerate() {
        if want != got {
            return Err(Error::WalkMismatch {
                event: event + 1,
                expected: want + 1,
                got: got + 1,
            });
        }
    }
    if visits.len() != scatters.len() {
        return Err(Error::InvalidWalk(format!(
            "protocol has {} scatter events, walk has {}",
            scatters.len(),
            visits.len()
        )));
    }
    let lens: Vec<usize> = p.trails().iter().map(Vec::len).collect();
    let walk_lens: Vec<usize> = walk.trails().iter().map(Vec::len).collect();
    if lens != walk_lens {
        return Err(Error::InvalidWalk(format!(
            "protocol trail lengths {lens:?} differ from walk trail lengths {walk_lens:?}"
        )));
    }

    let model = p.model();
    let dd = model.atom_dim();
    let mut events: Vec<Event> = Vec::with_capacity(visits.len());
    let mut bounds: Vec<(DVector<C64>, DVector<C64>)> = Vec::new();
    let mut init: Option<DVector<C64>> = None;
    let mut pos = 0usize;
    for step in p.steps() {
        match step {
            Instruction::InitAtom(v) => {
                init = Some(v.clone());
                pos = 0;
            }
            Instruction::Scatter(k) => {
                events.push(Event {
                    node: *k,
                    trail: bounds.len(),
                    pos,
                    rotation: nalgebra::DMatrix::identity(dd, dd),
                });
                pos += 1;
            }
            Instruction::AtomUnitary(u) => {
                if pos == 0 {
                    let i = init.as_mut().expect("validated protocol starts with init");
                    *i = u * &*i;
                } else {
                    let ev = events.last_mut().expect("scatter precedes");
                    ev.rotation = u * &ev.rotation;
                }
            }
            Instruction::ProjectAtom(f) => {
                bounds.push((init.take().expect("validated"), f.clone()));
            }
        }
    }

    let mut acc: Vec<Tensor> = p
        .photons()
        .iter()
        .map(|ph| Tensor::from_vector(ph.amplitudes(), PHYS))
        .collect::<std::result::Result<_, _>>()?;
    for ev in &events {
        let trail_len = walk.trails()[ev.trail].len();
        let mut t = event_tensor(model, &ev.rotation)?;
        t = if ev.pos == 0 {
            let i = Tensor::from_vector(&bounds[ev.trail].0, "x")?;
            t.contract(&i, &[("a", "x")])?
        } else {
            t.relabel("a", &bond_label(walk.trail_edges()[ev.trail][ev.pos - 1]))?
        };
        t = if ev.pos + 1 == trail_len {
            let f = Tensor::from_vector(&bounds[ev.trail].1, "x")?.conj();
            t.contract(&f, &[("b", "x")])?
        } else {
            t.relabel("b", &bond_label(walk.trail_edges()[ev.trail][ev.pos]))?
        };
        let prev = &acc[ev.node];
        acc[ev.node] = prev.contract(&t, &[(PHYS, "pin")])?.relabel("pout", PHYS)?;
    }
    Peps::new(g.clone(), acc)
}

/// `E[pout, b, pin, a] = Σ_γ U_{bγ} S[pout, γ, pin, a]`.
fn event_tensor(model: &AtomModel, u: &nalgebra::DMatrix<C64>) -> Result<Tensor> {
    let s = model
        .tensor()
        .clone()
        .relabel(J_OUT, "pout")?
        .relabel(B_OUT, "g")?
        .relabel(I_IN, "pin")?
        .relabel(A_IN, "a")?;
    let ut = Tensor::from_matrix(u, "b", "g")?;
    Ok(ut.contract(&s, &[("g", "g")])?)
}

/// Exact contraction of every bond. Nodes are absorbed greedily, always
/// picking the one that keeps the intermediate tensor smallest.
pub fn contract_peps(s: &Peps) -> Result<Vec<C64>> {
    let n = s.graph.node_count();
    let phys = |v: usize| format!("{PHYS}{}", v + 1);
    let nodes: Vec<Tensor> = s
        .tensors
        .iter()
        .enumerate()
        .map(|(v, t)| t.clone().relabel(PHYS, &phys(v)))
        .collect::<std::result::Result<_, _>>()?;
    let mut acc = Tensor::scalar(C64::new(1.0, 0.0));
    let mut done = vec![false; n];
    for _ in 0..n {
        let size_after = |v: usize| -> usize {
            let t = &nodes[v];
            let shared: usize = t
                .labels()
                .iter()
                .filter(|l| acc.has_label(l))
                .map(|l| t.dim(l).unwrap_or(1))
                .product();
            (acc.len() / shared) * (t.len() / shared)
        };
        let v = (0..n)
            .filter(|&v| !done[v])
            .min_by_key(|&v| (size_after(v), v))
            .expect("nodes remain");
        done[v] = true;
        let t = &nodes[v];
        let pairs: Vec<(&str, &str)> = t
            .labels()
            .iter()
            .filter(|l| acc.has_label(l))
            .map(|l| (l.as_str(), l.as_str()))
            .collect();
        acc = acc.contract(t, &pairs)?;
    }
    if let Some(l) = acc.labels().iter().find(|l| !l.starts_with(PHYS)) {
        return Err(Error::InvalidPeps(format!("bond {l} is unpaired")));
    }
    let order: Vec<String> = (0..n).rev().map(phys).collect();
    let order: Vec<&str> = order.iter().map(String::as_str).collect();
    Ok(acc.permuted(&order)?.into_data())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PepsDoc {
    pub nodes: usize,
    pub phys_dim: usize,
    pub bond_dim: usize,
    /// One-based endpoints.
    pub edges: Vec<[usize; 2]>,
    /// Keyed by one-based node id; axes `(physical, incident edges in file order)`.
    pub tensors: BTreeMap<String, Value>,
}

impl PepsDoc {
    pub fn from_peps(s: &Peps) -> Self {
        let phys_dim = s.tensors.iter().map(|t| t.shape()[0]).max().unwrap_or(0);
        let bond_dim = s
            .tensors
            .iter()
            .flat_map(|t| t.shape()[1..].to_vec())
            .max()
            .unwrap_or(0);
        PepsDoc {
            nodes: s.graph.node_count(),
            phys_dim,
            bond_dim,
            edges: s
                .graph
                .edges()
                .iter()
                .map(|&(u, v)| [u + 1, v + 1])
                .collect(),
            tensors: s
                .tensors
                .iter()
                .enumerate()
                .map(|(v, t)| ((v + 1).to_string(), tensor_to_nested(t)))
                .collect(),
        }
    }

    pub fn build(&self) -> Result<Peps> {
        let edges = self
            .edges
            .iter()
            .map(|&[u, v]| {
                if u == 0 || v == 0 {
                    Err(Error::InvalidPeps("node ids are one-based".into()))
                } else {
                    Ok((u - 1, v - 1))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let graph = Graph::new(self.nodes, edges)?;
        if let Some(k) = self.tensors.keys().find(|k| {
            k.parse::<usize>()
                .map_or(true, |v| v == 0 || v > self.nodes)
        }) {
            return Err(Error::InvalidPeps(format!(
                "tensor key {k:?} is not a node id"
            )));
        }
        let tensors = (0..self.nodes)
            .map(|v| {
                let value = self.tensors.get(&(v + 1).to_string()).ok_or_else(|| {
                    Error::InvalidPeps(format!("missing tensor for node {}", v + 1))
                })?;
                let t =
                    nested_to_tensor(value, &node_labels(&graph, v), &format!("node {}", v + 1))?;
                if t.shape()[0] > self.phys_dim || t.shape()[1..].iter().any(|&b| b > self.bond_dim)
                {
                    return Err(Error::InvalidPeps(format!(
                        "node {} shape {:?} exceeds phys_dim {} / bond_dim {}",
                        v + 1,
                        t.shape(),
                        self.phys_dim,
                        self.bond_dim
                    )));
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        Peps::new(graph, tensors)
    }
}

pub fn parse_peps(text: &str) -> Result<Peps> {
    let doc: PepsDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.build()
}

pub fn load_peps(path: impl AsRef<Path>) -> Result<Peps> {
    parse_peps(&std::fs::read_to_string(path)?)
}

pub fn save_peps(s: &Peps) -> String {
    serde_json::to_string_pretty(&PepsDoc::from_peps(s)).expect("peps serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{parse_graph, random_connected_graph};
    use crate::linalg;
    use crate::mps::{build_mps, contract_mps, SequentialProtocol};
    use crate::protocol::{run_protocol, PhotonInput};
    use crate::random::{random_matrix, random_unit_vector, rng_from_seed};
    use crate::verify::{random_sequential_protocol, random_walk_protocol};
    use rand::Rng;

    fn two_triangles() -> Graph {
        parse_graph("1 2\n2 3\n3 4\n4 1\n1 3\n").unwrap()
    }

    fn random_protocol_for(seed: u64, walk: &ScatterWalk, d: usize, dd: usize) -> Protocol {
        random_walk_protocol(&mut rng_from_seed(seed), walk, d, dd)
    }

    #[test]
    fn walk_maps_edges_and_rejects_reuse() {
        let w = ScatterWalk::new(two_triangles(), vec![vec![0, 1, 2, 3, 0, 2]]).unwrap();
        assert_eq!(w.trail_edges(), &[vec![0, 1, 2, 3, 4]]);
        let err = ScatterWalk::new(two_triangles(), vec![vec![0, 1, 0, 3, 2, 0]]).unwrap_err();
        assert!(
            err.to_string()
                .contains("event 3: edge (2, 1) consumed twice"),
            "{err}"
        );
        assert!(ScatterWalk::new(two_triangles(), vec![vec![0, 1, 2, 3]]).is_err());
        assert!(ScatterWalk::new(two_triangles(), vec![vec![1, 3]]).is_err());
    }

    #[test]
    fn two_triangle_matches_oracle() {
        let w = ScatterWalk::new(two_triangles(), vec![vec![0, 1, 2, 3, 0, 2]]).unwrap();
        for seed in 0..5 {
            let p = random_protocol_for(seed, &w, 2, 2);
            let peps = build_peps(&p, &w).unwrap();
            let bonds: Vec<usize> = (0..4).map(|v| peps.bond_axis_count(v)).collect();
            assert_eq!(bonds, vec![3, 2, 3, 2]);
            let oracle = run_protocol(&p).unwrap().final_unnormalized;
            assert!(linalg::max_abs_diff(&contract_peps(&peps).unwrap(), &oracle) <= 1e-12);
        }
    }

    /// Node tensors spelled out index by index, following the grouping
    /// `A^{[4]} T^{[3]} A^{[2]} T^{[1]}` for the walk 1→2→3→4→1→3.
    #[test]
    fn two_triangle_explicit_sum() {
        let w = ScatterWalk::new(two_triangles(), vec![vec![0, 1, 2, 3, 0, 2]]).unwrap();
        let p = random_protocol_for(11, &w, 2, 2);
        let s = |j: usize, b: usize, i: usize, a: usize| p.model().entry(j, b, i, a);
        let mut us = Vec::new();
        let (mut init, mut fin) = (DVector::zeros(2), DVector::zeros(2));
        for step in p.steps() {
            match step {
                Instruction::InitAtom(v) => init = v.clone(),
                Instruction::AtomUnitary(u) => us.push(u.clone()),
                Instruction::ProjectAtom(f) => fin = f.clone(),
                Instruction::Scatter(_) => {}
            }
        }
        let ph: Vec<&DVector<C64>> = p.photons().iter().map(PhotonInput::amplitudes).collect();
        // event k: out photon j, out atom b (after U_k), in photon i, in atom a
        let ev = |k: usize, j: usize, b: usize, i: usize, a: usize| -> C64 {
            (0..2).map(|g| us[k][(b, g)] * s(j, g, i, a)).sum()
        };
        let mut want = vec![C64::new(0.0, 0.0); 16];
        for (flat, slot) in want.iter_mut().enumerate() {
            let bit = |k: usize| (flat >> k) & 1;
            let mut amp = C64::new(0.0, 0.0);
            for a in 0..2usize.pow(7) {
                let x: Vec<usize> = (0..7).map(|k| (a >> k) & 1).collect();
                // x[0] = atom before event 1, x[k] after event k
                for j1 in 0..2 {
                    for j3 in 0..2 {
                        let mut term = init[x[0]] * fin[x[6]].conj();
                        term *= (0..2)
                            .map(|i| ev(0, j1, x[1], i, x[0]) * ph[0][i])
                            .sum::<C64>();
                        term *= (0..2)
                            .map(|i| ev(1, bit(1), x[2], i, x[1]) * ph[1][i])
                            .sum::<C64>();
                        term *= (0..2)
                            .map(|i| ev(2, j3, x[3], i, x[2]) * ph[2][i])
                            .sum::<C64>();
                        term *= (0..2)
                            .map(|i| ev(3, bit(3), x[4], i, x[3]) * ph[3][i])
                            .sum::<C64>();
                        term *= ev(4, bit(0), x[5], j1, x[4]);
                        term *= ev(5, bit(2), x[6], j3, x[5]);
                        amp += term;
                    }
                }
            }
            *slot = amp;
        }
        let got = contract_peps(&build_peps(&p, &w).unwrap()).unwrap();
        assert!(linalg::max_abs_diff(&got, &want) <= 1e-12);
    }

    #[test]
    fn chain_reduces_to_mps() {
        let g = parse_graph("1 2\n2 3\n").unwrap();
        let w = ScatterWalk::new(g, vec![vec![0, 1, 2]]).unwrap();
        let seq = random_sequential_protocol(&mut rng_from_seed(5), 3, 2, 3);
        let p = seq.to_protocol().unwrap();
        let peps = build_peps(&p, &w).unwrap();
        let mps = build_mps(&SequentialProtocol::from_protocol(&p).unwrap()).unwrap();
        let (a, b) = (contract_peps(&peps).unwrap(), contract_mps(&mps));
        assert!(linalg::max_abs_diff(&a, &b) <= 1e-14);
        // middle node tensor equals the middle MPS site
        let site = mps.sites()[1]
            .clone()
            .relabel("phys", PHYS)
            .unwrap()
            .relabel("left", "e1")
            .unwrap()
            .relabel("right", "e2")
            .unwrap();
        assert!(peps.node_tensor(1).max_abs_diff(&site).unwrap() <= 1e-15);
    }

    #[test]
    fn two_nodes_one_edge() {
        let g = Graph::new(2, vec![(0, 1)]).unwrap();
        let w = ScatterWalk::new(g, vec![vec![0, 1]]).unwrap();
        let model = AtomModel::identity(2, 2).unwrap();
        let mut rng = rng_from_seed(1);
        let (i, f) = (
            random_unit_vector(&mut rng, 2),
            random_unit_vector(&mut rng, 2),
        );
        let (a, b) = (
            random_unit_vector(&mut rng, 2),
            random_unit_vector(&mut rng, 2),
        );
        let p = Protocol::new(
            model,
            vec![
                PhotonInput::new(a.clone()).unwrap(),
                PhotonInput::new(b.clone()).unwrap(),
            ],
            vec![
                Instruction::InitAtom(i.clone()),
                Instruction::Scatter(0),
                Instruction::Scatter(1),
                Instruction::ProjectAtom(f.clone()),
            ],
        )
        .unwrap();
        let got = contract_peps(&build_peps(&p, &w).unwrap()).unwrap();
        let overlap = f.dotc(&i);
        let want: Vec<C64> = (0..4).map(|x| b[x >> 1] * a[x & 1] * overlap).collect();
        assert!(linalg::max_abs_diff(&got, &want) <= 1e-15);
    }

    #[test]
    fn random_connected_graphs_match_oracle() {
        for seed in 0..10 {
            let mut rng = rng_from_seed(500 + seed);
            let n = rng.gen_range(2..=5);
            let e = rng.gen_range(n - 1..=7);
            let g = random_connected_graph(&mut rng, n, e);
            let dec = crate::scheduler::euler_trails(&g);
            let w = ScatterWalk::new(g, dec.trails).unwrap();
            let p = random_walk_protocol(&mut rng, &w, 2, 2);
            let peps = build_peps(&p, &w).unwrap();
            let oracle = run_protocol(&p).unwrap().final_unnormalized;
            assert!(linalg::max_abs_diff(&contract_peps(&peps).unwrap(), &oracle) <= 1e-10);
            for v in 0..n {
                assert_eq!(peps.bond_axis_count(v), w.graph().degree(v));
            }
        }
    }

    #[test]
    fn gauge_on_one_edge_is_invisible() {
        let w = ScatterWalk::new(two_triangles(), vec![vec![0, 1, 2, 3, 0, 2]]).unwrap();
        let p = random_protocol_for(21, &w, 2, 2);
        let peps = build_peps(&p, &w).unwrap();
        let mut rng = rng_from_seed(22);
        let g = random_matrix(&mut rng, 2, 2);
        let ginv = g.clone().try_inverse().unwrap();
        for (id, &(u, v)) in w.graph().edges().iter().enumerate() {
            let l = bond_label(id);
            let gt = Tensor::from_matrix(&g, "new", &l).unwrap();
            let gi = Tensor::from_matrix(&ginv, &l, "new").unwrap();
            let tu = peps
                .node_tensor(u)
                .contract(&gt, &[(&l, &l)])
                .unwrap()
                .relabel("new", &l)
                .unwrap();
            let tv = peps
                .node_tensor(v)
                .contract(&gi, &[(&l, &l)])
                .unwrap()
                .relabel("new", &l)
                .unwrap();
            let gauged = peps.with_tensor(u, tu).unwrap().with_tensor(v, tv).unwrap();
            let (a, b) = (
                contract_peps(&peps).unwrap(),
                contract_peps(&gauged).unwrap(),
            );
            assert!(linalg::max_abs_diff(&a, &b) <= 1e-10);
        }
    }

    #[test]
    fn mismatched_walk_names_event() {
        let w = ScatterWalk::new(two_triangles(), vec![vec![0, 1, 2, 3, 0, 2]]).unwrap();
        let other = ScatterWalk::new(two_triangles(), vec![vec![0, 2, 1, 0, 3, 2]]).unwrap();
        let p = random_protocol_for(2, &other, 2, 2);
        match build_peps(&p, &w) {
            Err(Error::WalkMismatch {
                event,
                expected,
                got,
            }) => assert_eq!((event, expected, got), (2, 2, 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn multi_edge_and_multi_trail() {
        let g = parse_graph("1 2\n2 1\n2 3\n2 4\n").unwrap();
        let dec = crate::scheduler::euler_trails(&g);
        assert_eq!(dec.trails.len(), 1);
        let star = parse_graph("1 2\n1 3\n1 4\n1 5\n").unwrap();
        let dec2 = crate::scheduler::euler_trails(&star);
        assert_eq!(dec2.trails.len(), 2);
        for (g, trails) in [(g, dec.trails), (star, dec2.trails)] {
            let w = ScatterWalk::new(g, trails).unwrap();
            let p = random_walk_protocol(&mut rng_from_seed(8), &w, 3, 2);
            let oracle = run_protocol(&p).unwrap().final_unnormalized;
            assert!(
                linalg::max_abs_diff(
                    &contract_peps(&build_peps(&p, &w).unwrap()).unwrap(),
                    &oracle
                ) <= 1e-12
            );
        }
    }

    #[test]
    fn file_round_trip() {
        let w = ScatterWalk::new(two_triangles(), vec![vec![0, 1, 2, 3, 0, 2]]).unwrap();
        let peps = build_peps(&random_protocol_for(3, &w, 2, 3), &w).unwrap();
        let text = save_peps(&peps);
        assert_eq!(parse_peps(&text).unwrap(), peps);
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["bond_dim"], 3);
        assert_eq!(doc["tensors"]["1"].as_array().unwrap().len(), 2);
        let bad = text.replace("\"nodes\": 4", "\"nodes\": 5");
        assert!(parse_peps(&bad).is_err());
    }
}
