//! Matrix product states from purely sequential protocols.
//!
//! Site `k` stores `A^{[k]}` with axes `(phys, left, right)`: `left` is the
//! atom state before the `k`-th scattering, `right` the state after it. As a
//! matrix, `A^{[k]i}` has rows indexed by `right` and columns by `left`, so
//! an amplitude reads `F† A^{[n]i_n} ⋯ A^{[1]i_1} I`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::atom::AtomModel;
use crate::error::{Error, Result};
use crate::format::{nested_to_tensor, pairs_to_dvector, tensor_to_nested, vec_to_pairs, Pair};
use crate::linalg;
use crate::parallel::{map_range, Exec};
use crate::protocol::{Instruction, PhotonInput, Protocol};
use crate::tensor::Tensor;

pub const PHYS: &str = "phys";
pub const LEFT: &str = "left";
pub const RIGHT: &str = "right";

/// Tolerance on `Σ_i A^{i†} A^i = 1` accepted as left-canonical input.
pub const CANONICAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Mps {
    sites: Vec<Tensor>,
    boundary_in: DVector<C64>,
    boundary_out: DVector<C64>,
}

impl Mps {
    pub fn new(
        sites: Vec<Tensor>,
        boundary_in: DVector<C64>,
        boundary_out: DVector<C64>,
    ) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidMps("no sites".into()));
        }
        let sites = sites
            .into_iter()
            .map(|t| t.permuted(&[PHYS, LEFT, RIGHT]))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut bond = boundary_in.len();
        for (k, s) in sites.iter().enumerate() {
            if s.shape()[1] != bond {
                return Err(Error::InvalidMps(format!(
                    "site {} left bond {} does not match incoming bond {bond}",
                    k + 1,
                    s.shape()[1]
                )));
            }
            bond = s.shape()[2];
        }
        if boundary_out.len() != bond {
            return Err(Error::InvalidMps(format!(
                "boundary_out length {} does not match final bond {bond}",
                boundary_out.len()
            )));
        }
        Ok(Mps {
            sites,
            boundary_in,
            boundary_out,
        })
    }

    /// Builds from per-site lists of `A^i` matrices (rows right, columns left).
    pub fn from_matrices(
        sites: &[Vec<DMatrix<C64>>],
        boundary_in: DVector<C64>,
        boundary_out: DVector<C64>,
    ) -> Result<Self> {
        let tensors = sites
            .iter()
            .map(|mats| {
                let (r, l) = mats[0].shape();
                if mats.iter().any(|m| m.shape() != (r, l)) {
                    return Err(Error::InvalidMps("site matrices differ in shape".into()));
                }
                Ok(Tensor::from_fn(
                    [PHYS, LEFT, RIGHT],
                    vec![mats.len(), l, r],
                    |x| mats[x[0]][(x[2], x[1])],
                )?)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(tensors, boundary_in, boundary_out)
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    pub fn boundary_in(&self) -> &DVector<C64> {
        &self.boundary_in
    }

    pub fn boundary_out(&self) -> &DVector<C64> {
        &self.boundary_out
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s.shape()[0]).collect()
    }

    /// Bond dimensions from `I` through every site's right bond.
    pub fn bond_dims(&self) -> Vec<usize> {
        std::iter::once(self.boundary_in.len())
            .chain(self.sites.iter().map(|s| s.shape()[2]))
            .collect()
    }

    /// `A^{[k]i}` for zero-based site `k`, rows right and columns left.
    pub fn site_matrix(&self, k: usize, i: usize) -> DMatrix<C64> {
        let s = &self.sites[k];
        let (l, r) = (s.shape()[1], s.shape()[2]);
        DMatrix::from_fn(r, l, |b, a| s.get(&[i, a, b]))
    }

    pub fn site_matrices(&self, k: usize) -> Vec<DMatrix<C64>> {
        (0..self.sites[k].shape()[0])
            .map(|i| self.site_matrix(k, i))
            .collect()
    }
}

/// A protocol of the form: init, then each photon scattered once in index
/// order followed by an optional atom rotation, then a single projection.
#[derive(Clone, Debug, PartialEq)]
pub struct SequentialProtocol {
    pub model: AtomModel,
    pub photons: Vec<PhotonInput>,
    /// `R^{[k]}` applied after photon `k` scatters.
    pub rotations: Vec<DMatrix<C64>>,
    pub init: DVector<C64>,
    pub project: DVector<C64>,
}

impl SequentialProtocol {
    /// Extracts the sequential view. Rotations placed between the
    /// initialization and the first scattering are folded into `I`, and
    /// consecutive rotations are multiplied together.
    pub fn from_protocol(p: &Protocol) -> Result<Self> {
        let dd = p.model().atom_dim();
        let n = p.photon_count();
        let mut rotations: Vec<DMatrix<C64>> = Vec::with_capacity(n);
        let mut init: Option<DVector<C64>> = None;
        let mut project: Option<DVector<C64>> = None;
        for (idx, step) in p.steps().iter().enumerate() {
            if project.is_some() {
                return Err(Error::NotSequential(format!(
                    "step {idx} follows the projection (multiple trails)"
                )));
            }
            match step {
                Instruction::InitAtom(v) => {
                    if init.is_some() {
                        return Err(Error::NotSequential(format!(
                            "second initialization at step {idx}"
                        )));
                    }
                    init = Some(v.clone());
                }
                Instruction::Scatter(k) => {
                    if *k != rotations.len() {
                        let why = if *k < rotations.len() {
                            format!("photon {} is scattered again at step {idx}", k + 1)
                        } else {
                            format!("photon {} scattered out of order at step {idx}", k + 1)
                        };
                        return Err(Error::NotSequential(why));
                    }
                    rotations.push(DMatrix::identity(dd, dd));
                }
                Instruction::AtomUnitary(u) => match rotations.last_mut() {
                    Some(r) => *r = u * &*r,
                    None => {
                        let i = init.as_mut().expect("validated protocol starts with init");
                        *i = u * &*i;
                    }
                },
                Instruction::ProjectAtom(f) => project = Some(f.clone()),
            }
        }
        Ok(SequentialProtocol {
            model: p.model().clone(),
            photons: p.photons().to_vec(),
            rotations,
            init: init.expect("validated"),
            project: project.expect("validated"),
        })
    }

    pub fn to_protocol(&self) -> Result<Protocol> {
        let mut steps = vec![Instruction::InitAtom(self.init.clone())];
        for (k, r) in self.rotations.iter().enumerate() {
            steps.push(Instruction::Scatter(k));
            steps.push(Instruction::AtomUnitary(r.clone()));
        }
        steps.push(Instruction::ProjectAtom(self.project.clone()));
        Protocol::new(self.model.clone(), self.photons.clone(), steps)
    }
}

/// `A^{[k]i} = R^{[k]} Σ_j S^{ij} d^{[k]j}`.
pub fn build_mps(p: &SequentialProtocol) -> Result<Mps> {
    if p.rotations.len() != p.photons.len() {
        return Err(Error::InvalidProtocol(format!(
            "{} rotations for {} photons",
            p.rotations.len(),
            p.photons.len()
        )));
    }
    let m = &p.model;
    let (d, dd) = (m.photon_dim(), m.atom_dim());
    let sites = p
        .photons
        .iter()
        .zip(&p.rotations)
        .map(|(ph, r)| {
            (0..d)
                .map(|i| {
                    let mixed = (0..d).fold(DMatrix::zeros(dd, dd), |acc, j| {
                        acc + m.block(i, j) * ph.amplitudes()[j]
                    });
                    r * mixed
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    Mps::from_matrices(&sites, p.init.clone(), p.project.clone())
}

pub fn contract_mps(m: &Mps) -> Vec<C64> {
    contract_mps_with(m, Exec::Parallel)
}

/// Full state vector over `|i_n ⋯ i_1⟩`, built by sweeping from `I` toward
/// `F` and keeping every photon prefix.
pub fn contract_mps_with(m: &Mps, exec: Exec) -> Vec<C64> {
    // env[p * bond + α]: prefix p over photons 1..k, atom state α
    let mut env: Vec<C64> = m.boundary_in.iter().copied().collect();
    let mut prefixes = 1usize;
    for k in 0..m.len() {
        let mats = m.site_matrices(k);
        let (right, left) = mats[0].shape();
        let prev = &env;
        let blocks = map_range(exec, mats.len() * prefixes, |ip| {
            let (i, p) = (ip / prefixes, ip % prefixes);
            let v = DVector::from_column_slice(&prev[p * left..(p + 1) * left]);
            (&mats[i] * v).iter().copied().collect::<Vec<_>>()
        });
        debug_assert!(blocks.iter().all(|b| b.len() == right));
        env = blocks.into_iter().flatten().collect();
        prefixes *= mats.len();
    }
    let bond = m.boundary_out.len();
    env.chunks(bond)
        .map(|c| {
            c.iter()
                .zip(m.boundary_out.iter())
                .map(|(x, f)| f.conj() * x)
                .sum()
        })
        .collect()
}

/// Max over sites of `|Σ_i A^{i†} A^i − 1|`.
pub fn left_canonical_deviation(m: &Mps) -> f64 {
    (0..m.len())
        .map(|k| {
            let mats = m.site_matrices(k);
            let l = mats[0].ncols();
            let g = mats
                .iter()
                .fold(DMatrix::zeros(l, l), |acc, a| acc + a.adjoint() * a);
            linalg::max_abs(&(g - DMatrix::identity(l, l)))
        })
        .fold(0.0, f64::max)
}

/// Brings every site to `Σ_i A^{i†} A^i = 1` by QR sweeps from the `F` end
/// toward `I`. The leftover triangular factor ends up in the input boundary,
/// which then carries the state's norm. Bonds shrink where a site is rank
/// deficient; an all-zero site collapses its bond to length 1.
pub fn left_canonicalize(m: &Mps) -> Mps {
    let n = m.len();
    let mut carry: Option<DMatrix<C64>> = None;
    let mut new_sites: Vec<Vec<DMatrix<C64>>> = vec![Vec::new(); n];
    for k in (0..n).rev() {
        let mats: Vec<DMatrix<C64>> = m
            .site_matrices(k)
            .into_iter()
            .map(|a| carry.as_ref().map_or_else(|| a.clone(), |c| c * &a))
            .collect();
        let (r, l) = mats[0].shape();
        let d = mats.len();
        let stacked = DMatrix::from_fn(d * r, l, |row, col| mats[row / r][(row % r, col)]);
        let (q, rr) = linalg::qr(&stacked);
        let bond = q.ncols();
        new_sites[k] = (0..d)
            .map(|i| q.view((i * r, 0), (r, bond)).into_owned())
            .collect();
        carry = Some(rr);
    }
    let boundary_in = carry.expect("at least one site") * &m.boundary_in;
    Mps::from_matrices(&new_sites, boundary_in, m.boundary_out.clone()).expect("bond bookkeeping")
}

/// Result of [`synthesize_smatrix`]. Running `protocol` reproduces the
/// target contraction divided by `boundary_scale = |I|·|F|`.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub model: AtomModel,
    pub protocol: SequentialProtocol,
    pub boundary_scale: f64,
}

/// Scattering matrix whose `j = 0` input columns are the site tensor:
/// `S^{i0}_{βα} = A^i_{βα}`. The remaining columns complete it to a unitary.
fn site_to_model(mats: &[DMatrix<C64>]) -> Result<AtomModel> {
    let (r, l) = mats[0].shape();
    if r != l {
        return Err(Error::InvalidMps(format!(
            "site bonds differ ({l} in, {r} out)"
        )));
    }
    let d = mats.len();
    let dd = r;
    let iso = DMatrix::from_fn(d * dd, dd, |row, a| mats[row / dd][(row % dd, a)]);
    let dev = linalg::isometry_deviation(&iso);
    if dev > CANONICAL_TOL {
        return Err(Error::NotCanonical { deviation: dev });
    }
    AtomModel::from_matrix(d, dd, &linalg::complete_unitary(&iso))
}

/// Designs a scattering matrix that regenerates a translation-invariant,
/// left-canonical target with photons in `|0⟩` and no atom rotations.
pub fn synthesize_smatrix(target: &Mps) -> Result<Synthesis> {
    let first = &target.sites[0];
    for (k, s) in target.sites.iter().enumerate().skip(1) {
        let same = s.shape() == first.shape()
            && s.data()
                .iter()
                .zip(first.data())
                .all(|(a, b)| (a - b).norm() <= 1e-12);
        if !same {
            return Err(Error::NotTranslationInvariant { site: k + 1 });
        }
    }
    let model = site_to_model(&target.site_matrices(0))?;
    let (d, dd) = (model.photon_dim(), model.atom_dim());
    let in_norm = target.boundary_in.norm();
    let out_norm = target.boundary_out.norm();
    let init = linalg::normalized(&target.boundary_in)
        .ok_or_else(|| Error::ZeroNorm("boundary_in".into()))?;
    let project = linalg::normalized(&target.boundary_out)
        .ok_or_else(|| Error::ZeroNorm("boundary_out".into()))?;
    let protocol = SequentialProtocol {
        model: model.clone(),
        photons: vec![PhotonInput::basis(d, 0); target.len()],
        rotations: vec![DMatrix::identity(dd, dd); target.len()],
        init,
        project,
    };
    Ok(Synthesis {
        model,
        protocol,
        boundary_scale: in_norm * out_norm,
    })
}

/// One synthesized model per site, for targets that are not translation
/// invariant.
pub fn synthesize_site_models(target: &Mps) -> Result<Vec<AtomModel>> {
    (0..target.len())
        .map(|k| site_to_model(&target.site_matrices(k)))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpsDoc {
    pub bond_dim: usize,
    pub phys_dim: usize,
    /// Each site indexed `[physical][left][right]`.
    pub sites: Vec<Value>,
    pub boundary_in: Vec<Pair>,
    pub boundary_out: Vec<Pair>,
}

impl MpsDoc {
    pub fn from_mps(m: &Mps) -> Self {
        MpsDoc {
            bond_dim: m.bond_dims().into_iter().max().unwrap_or(0),
            phys_dim: m.phys_dims().into_iter().max().unwrap_or(0),
            sites: m.sites.iter().map(tensor_to_nested).collect(),
            boundary_in: vec_to_pairs(m.boundary_in.as_slice()),
            boundary_out: vec_to_pairs(m.boundary_out.as_slice()),
        }
    }

    pub fn build(&self) -> Result<Mps> {
        let labels: Vec<String> = [PHYS, LEFT, RIGHT].iter().map(|s| s.to_string()).collect();
        let sites = self
            .sites
            .iter()
            .enumerate()
            .map(|(k, v)| nested_to_tensor(v, &labels, &format!("site {}", k + 1)))
            .collect::<Result<Vec<_>>>()?;
        for (k, s) in sites.iter().enumerate() {
            if s.shape()[0] > self.phys_dim
                || s.shape()[1] > self.bond_dim
                || s.shape()[2] > self.bond_dim
            {
                return Err(Error::InvalidMps(format!(
                    "site {} shape {:?} exceeds phys_dim {} / bond_dim {}",
                    k + 1,
                    s.shape(),
                    self.phys_dim,
                    self.bond_dim
                )));
            }
        }
        Mps::new(
            sites,
            pairs_to_dvector(&self.boundary_in),
            pairs_to_dvector(&self.boundary_out),
        )
    }
}

pub fn parse_mps(text: &str) -> Result<Mps> {
    let doc: MpsDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.build()
}

pub fn load_mps(path: impl AsRef<Path>) -> Result<Mps> {
    parse_mps(&std::fs::read_to_string(path)?)
}

pub fn save_mps(m: &Mps) -> String {
    serde_json::to_string_pretty(&MpsDoc::from_mps(m)).expect("mps serializes")
}
