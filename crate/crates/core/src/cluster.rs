//! Cluster states from a photon–atom controlled-phase scattering matrix.
//!
//! With atom Hadamards around it, a photon–atom CZ becomes a CNOT onto the
//! atom, so the gadget `H, S_u, H, S_v, H, S_u, H` computes
//! `CNOT(u→a) · CZ(a, v) · CNOT(u→a) = CZ(u, v)` and leaves the atom back in
//! `|g₀⟩`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::atom::cz_model;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg;
use crate::parallel::{map_range, Exec};
use crate::protocol::{
    run_protocol_observed, Instruction, PhotonInput, Protocol, RunResult, Stage,
};

pub const STABILIZER_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ClusterProtocol {
    pub protocol: Protocol,
    /// Index of the last step of each edge gadget, in edge order.
    pub gadget_ends: Vec<usize>,
}

fn hadamard() -> DMatrix<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(2, 2, &[h, h, h, -h]).map(|x| C64::new(x, 0.0))
}

fn ground() -> DVector<C64> {
    DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
}

/// Photons start in `(|0⟩+|1⟩)/√2`, the atom in `|g₀⟩`. A node without
/// edges is scattered once before any gadget, while the atom is still in
/// `|g₀⟩`, which leaves it unchanged.
pub fn compile_cluster_protocol(g: &Graph) -> Result<ClusterProtocol> {
    g.check_simple()?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let plus = PhotonInput::new(DVector::from_vec(vec![C64::new(h, 0.0), C64::new(h, 0.0)]))?;
    let mut steps = vec![Instruction::InitAtom(ground())];
    for v in (0..g.node_count()).filter(|&v| g.degree(v) == 0) {
        steps.push(Instruction::Scatter(v));
    }
    let mut gadget_ends = Vec::with_capacity(g.edge_count());
    for &(u, v) in g.edges() {
        for k in [u, v, u] {
            steps.push(Instruction::AtomUnitary(hadamard()));
            steps.push(Instruction::Scatter(k));
        }
        steps.push(Instruction::AtomUnitary(hadamard()));
        gadget_ends.push(steps.len() - 1);
    }
    steps.push(Instruction::ProjectAtom(ground()));
    let protocol = Protocol::new(cz_model(), vec![plus; g.node_count()], steps)?;
    Ok(ClusterProtocol {
        protocol,
        gadget_ends,
    })
}

/// Runs the protocol and records, after each gadget, how far the joint state
/// is from `(photons) ⊗ |g₀⟩`.
pub fn run_with_disentanglement(c: &ClusterProtocol) -> Result<(RunResult, Vec<f64>)> {
    let mut residuals = Vec::with_capacity(c.gadget_ends.len());
    let g0 = ground();
    let mut failure = None;
    let run = run_protocol_observed(&c.protocol, |idx, stage| {
        if c.gadget_ends.binary_search(&idx).is_ok() {
            if let Stage::Attached(s) = stage {
                match s.atom_residual(&g0) {
                    Ok(r) => residuals.push(r),
                    Err(e) => failure = Some(e),
                }
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok((run, residuals)),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilizerReport {
    /// `⟨K_v⟩` per node.
    pub expectations: Vec<f64>,
    pub pass: bool,
}

impl StabilizerReport {
    pub fn worst_deviation(&self) -> f64 {
        self.expectations
            .iter()
            .map(|e| (e - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `⟨ψ|X_v ∏_{u∈N(v)} Z_u|ψ⟩` for every node, photon `k` on bit `k`.
pub fn verify_stabilizers(state: &[C64], g: &Graph) -> Result<StabilizerReport> {
    verify_stabilizers_with(state, g, STABILIZER_TOL, Exec::Parallel)
}

pub fn verify_stabilizers_with(
    state: &[C64],
    g: &Graph,
    tol: f64,
    exec: Exec,
) -> Result<StabilizerReport> {
    let n = g.node_count();
    let expected = 1usize << n;
    if state.len() != expected {
        return Err(Error::Dimension {
            what: "state vector".into(),
            expected,
            got: state.len(),
        });
    }
    let norm = linalg::norm_sqr(state).sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized {
            what: "state".into(),
            norm,
        });
    }
    let expectations = map_range(exec, n, |v| {
        let mask: usize = g.neighbours(v).into_iter().map(|u| 1usize << u).sum();
        let flip = 1usize << v;
        state
            .iter()
            .enumerate()
            .map(|(x, amp)| {
                let sign = if (x & mask).count_ones().is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                (state[x ^ flip].conj() * amp).re * sign
            })
            .sum::<f64>()
    });
    let pass = expectations.iter().all(|e| (e - 1.0).abs() <= tol);
    Ok(StabilizerReport { expectations, pass })
}

/// `|⟨a|b⟩|²` for normalized vectors.
pub fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.conj() * y)
        .sum::<C64>()
        .norm_sqr()
}
