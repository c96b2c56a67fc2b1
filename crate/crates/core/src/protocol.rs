//! Sequential-scattering protocols and their exact state-vector execution.
//!
//! Basis ordering: photon amplitudes are indexed by `|i_n ⋯ i_2 i_1⟩` with
//! photon 1 the least significant digit. A [`JointState`] appends the atom
//! ground state as the fastest index: `flat = photon_index · D + α`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::atom::{self, AtomModel, ModelDoc, UnitarityReport, UNITARITY_TOL};
use crate::error::{Error, Result};
use crate::format::{matrix_to_rows, pairs_to_dvector, rows_to_matrix, vec_to_pairs, Pair};
use crate::linalg;

/// Unit-norm tolerance for photon inputs and atom boundary vectors.
pub const NORM_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);

fn check_unit(v: &DVector<C64>, what: &str) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized {
            what: what.into(),
            norm: n,
        });
    }
    Ok(())
}

fn normalize(v: DVector<C64>, what: &str) -> Result<DVector<C64>> {
    linalg::normalized(&v).ok_or_else(|| Error::ZeroNorm(what.into()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhotonInput {
    amplitudes: DVector<C64>,
}

impl PhotonInput {
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        check_unit(&amplitudes, "photon input")?;
        Ok(PhotonInput { amplitudes })
    }

    pub fn normalized(amplitudes: DVector<C64>) -> Result<Self> {
        Ok(PhotonInput {
            amplitudes: normalize(amplitudes, "photon input")?,
        })
    }

    /// Basis state `|k⟩` of a `d`-level photon.
    pub fn basis(d: usize, k: usize) -> Self {
        let mut v = DVector::zeros(d);
        v[k] = C64::new(1.0, 0.0);
        PhotonInput { amplitudes: v }
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    InitAtom(DVector<C64>),
    /// Zero-based photon index.
    Scatter(usize),
    AtomUnitary(DMatrix<C64>),
    ProjectAtom(DVector<C64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Protocol {
    model: AtomModel,
    photons: Vec<PhotonInput>,
    steps: Vec<Instruction>,
}

impl Protocol {
    pub fn new(
        model: AtomModel,
        photons: Vec<PhotonInput>,
        steps: Vec<Instruction>,
    ) -> Result<Self> {
        let d = model.photon_dim();
        let dd = model.atom_dim();
        if photons.is_empty() {
            return Err(Error::InvalidProtocol("no photons".into()));
        }
        for (k, ph) in photons.iter().enumerate() {
            if ph.dim() != d {
                return Err(Error::Dimension {
                    what: format!("photon {}", k + 1),
                    expected: d,
                    got: ph.dim(),
                });
            }
            check_unit(&ph.amplitudes, &format!("photon {}", k + 1))?;
        }

        let mut attached = false;
        let mut scattered = vec![false; photons.len()];
        for (idx, step) in steps.iter().enumerate() {
            let res = match step {
                Instruction::InitAtom(v) => {
                    if attached {
                        Err(Error::InvalidProtocol(
                            "atom initialized twice without a projection in between".into(),
                        ))
                    } else {
                        attached = true;
                        check_len(v.len(), dd, "init vector")
                            .and_then(|_| check_unit(v, "init vector"))
                    }
                }
                Instruction::ProjectAtom(v) => {
                    if !attached {
                        Err(Error::InvalidProtocol(
                            "projection without an initialized atom".into(),
                        ))
                    } else {
                        attached = false;
                        check_len(v.len(), dd, "projection vector")
                            .and_then(|_| check_unit(v, "projection vector"))
                    }
                }
                Instruction::Scatter(k) => {
                    if !attached {
                        Err(Error::InvalidProtocol(
                            "scatter without an initialized atom".into(),
                        ))
                    } else if *k >= photons.len() {
                        Err(Error::InvalidProtocol(format!(
                            "scatter names photon {} but only {} photons exist",
                            k + 1,
                            photons.len()
                        )))
                    } else {
                        scattered[*k] = true;
                        Ok(())
                    }
                }
                Instruction::AtomUnitary(u) => {
                    if !attached {
                        Err(Error::InvalidProtocol(
                            "atom unitary without an initialized atom".into(),
                        ))
                    } else {
                        check_atom_unitary(u, dd)
                    }
                }
            };
            res.map_err(|e| e.at_step(idx))?;
        }
        if !matches!(steps.first(), Some(Instruction::InitAtom(_))) {
            return Err(Error::InvalidProtocol(
                "steps must begin with an atom initialization".into(),
            ));
        }
        if attached {
            return Err(Error::InvalidProtocol(
                "steps must end with an atom projection".into(),
            ));
        }
        if let Some(k) = scattered.iter().position(|s| !s) {
            return Err(Error::InvalidProtocol(format!(
                "photon {} is never scattered",
                k + 1
            )));
        }
        Ok(Protocol {
            model,
            photons,
            steps,
        })
    }

    pub fn model(&self) -> &AtomModel {
        &self.model
    }

    pub fn photons(&self) -> &[PhotonInput] {
        &self.photons
    }

    pub fn steps(&self) -> &[Instruction] {
        &self.steps
    }

    pub fn photon_count(&self) -> usize {
        self.photons.len()
    }

    pub fn photon_dims(&self) -> Vec<usize> {
        vec![self.model.photon_dim(); self.photons.len()]
    }

    /// Scatter order (zero-based photon ids) of each init/project segment.
    pub fn trails(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for step in &self.steps {
            match step {
                Instruction::InitAtom(_) => out.push(Vec::new()),
                Instruction::Scatter(k) => out.last_mut().expect("validated").push(*k),
                _ => {}
            }
        }
        out
    }
}

fn check_len(got: usize, expected: usize, what: &str) -> Result<()> {
    if got != expected {
        return Err(Error::Dimension {
            what: what.into(),
            expected,
            got,
        });
    }
    Ok(())
}

fn check_atom_unitary(u: &DMatrix<C64>, dd: usize) -> Result<()> {
    if u.shape() != (dd, dd) {
        return Err(Error::Dimension {
            what: "atom unitary".into(),
            expected: dd,
            got: u.nrows(),
        });
    }
    let dev = linalg::unitarity_deviation(u);
    if dev > UNITARITY_TOL {
        return Err(Error::NotUnitary {
            what: "atom unitary".into(),
            deviation: dev,
        });
    }
    Ok(())
}

/// Unnormalized amplitude vector over `(⊗_k photon_k) ⊗ atom`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    photon_dims: Vec<usize>,
    atom_dim: usize,
    amplitudes: Vec<C64>,
}

fn kron_photons(photons: &[PhotonInput]) -> Vec<C64> {
    let mut state = vec![C64::new(1.0, 0.0)];
    for ph in photons {
        // photon k becomes the most significant digit so far
        let mut next = Vec::with_capacity(state.len() * ph.dim());
        for &a in ph.amplitudes.iter() {
            next.extend(state.iter().map(|&s| a * s));
        }
        state = next;
    }
    state
}

impl JointState {
    /// `(⊗_k d^{[k]}) ⊗ I`.
    pub fn product(photons: &[PhotonInput], init: &DVector<C64>) -> Self {
        let dims = photons.iter().map(PhotonInput::dim).collect();
        Self::attach(dims, &kron_photons(photons), init)
    }

    /// Tensors a photon-space state with a fresh atom state.
    pub fn attach(photon_dims: Vec<usize>, photons: &[C64], init: &DVector<C64>) -> Self {
        assert_eq!(photons.len(), photon_dims.iter().product::<usize>());
        let amplitudes = photons
            .iter()
            .flat_map(|&p| init.iter().map(move |&a| p * a))
            .collect();
        JointState {
            photon_dims,
            atom_dim: init.len(),
            amplitudes,
        }
    }

    pub fn photon_dims(&self) -> &[usize] {
        &self.photon_dims
    }

    pub fn atom_dim(&self) -> usize {
        self.atom_dim
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        linalg::norm_sqr(&self.amplitudes)
    }

    /// Applies the scattering matrix to photon `k` (zero-based) and the atom.
    pub fn apply_scatter(&self, k: usize, m: &AtomModel) -> Result<JointState> {
        let d = *self
            .photon_dims
            .get(k)
            .ok_or_else(|| Error::InvalidProtocol(format!("photon {} out of range", k + 1)))?;
        check_len(
            d,
            m.photon_dim(),
            &format!("photon {} vs model photon_dim", k + 1),
        )?;
        check_len(self.atom_dim, m.atom_dim(), "atom vs model atom_dim")?;
        let dd = self.atom_dim;
        let stride: usize = self.photon_dims[..k].iter().product();
        let block = stride * d;
        let outer = self.amplitudes.len() / (block * dd);
        let s = m.matrix();
        let mut out = vec![ZERO; self.amplitudes.len()];
        let mut buf = DVector::<C64>::zeros(d * dd);
        for hi in 0..outer {
            for lo in 0..stride {
                let at = |i: usize, a: usize| (hi * block + i * stride + lo) * dd + a;
                for i in 0..d {
                    for a in 0..dd {
                        buf[i * dd + a] = self.amplitudes[at(i, a)];
                    }
                }
                let res = &s * &buf;
                for j in 0..d {
                    for b in 0..dd {
                        out[at(j, b)] = res[j * dd + b];
                    }
                }
            }
        }
        Ok(JointState {
            photon_dims: self.photon_dims.clone(),
            atom_dim: dd,
            amplitudes: out,
        })
    }

    pub fn apply_atom_unitary(&self, u: &DMatrix<C64>) -> Result<JointState> {
        check_atom_unitary(u, self.atom_dim)?;
        let dd = self.atom_dim;
        let mut out = vec![ZERO; self.amplitudes.len()];
        for (chunk, dst) in self.amplitudes.chunks(dd).zip(out.chunks_mut(dd)) {
            for (b, o) in dst.iter_mut().enumerate() {
                *o = (0..dd).map(|a| u[(b, a)] * chunk[a]).sum();
            }
        }
        Ok(JointState {
            photon_dims: self.photon_dims.clone(),
            atom_dim: dd,
            amplitudes: out,
        })
    }

    /// Contracts `conj(f)` into the atom axis. Returns the unnormalized photon
    /// state and its squared norm.
    pub fn project_atom(&self, f: &DVector<C64>) -> Result<(Vec<C64>, f64)> {
        check_len(f.len(), self.atom_dim, "projection vector")?;
        let photons: Vec<C64> = self
            .amplitudes
            .chunks(self.atom_dim)
            .map(|c| c.iter().zip(f.iter()).map(|(x, y)| y.conj() * x).sum())
            .collect();
        let p = linalg::norm_sqr(&photons);
        Ok((photons, p))
    }

    /// Norm of the part of the state not of the form `φ ⊗ f`.
    pub fn atom_residual(&self, f: &DVector<C64>) -> Result<f64> {
        let fu = normalize(f.clone(), "reference atom state")?;
        let (phi, _) = self.project_atom(&fu)?;
        let mut r = 0.0;
        for (chunk, p) in self.amplitudes.chunks(self.atom_dim).zip(&phi) {
            for (x, a) in chunk.iter().zip(fu.iter()) {
                r += (x - p * a).norm_sqr();
            }
        }
        Ok(r.sqrt())
    }
}

/// State of a run between steps: with the atom attached, or photons alone
/// after a projection.
#[derive(Clone, Debug)]
pub enum Stage {
    Attached(JointState),
    Detached(Vec<C64>),
}

impl Stage {
    pub fn norm_sqr(&self) -> f64 {
        match self {
            Stage::Attached(s) => s.norm_sqr(),
            Stage::Detached(v) => linalg::norm_sqr(v),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub photon_dims: Vec<usize>,
    pub final_unnormalized: Vec<C64>,
    /// All zeros when the success probability vanishes.
    pub final_normalized: Vec<C64>,
    pub success_probability: f64,
    /// Squared norm after each step.
    pub trace: Vec<f64>,
}

pub fn run_protocol(p: &Protocol) -> Result<RunResult> {
    run_protocol_observed(p, |_, _| {})
}

/// Runs the protocol, calling `observe(step_index, stage)` after every step.
pub fn run_protocol_observed<F>(p: &Protocol, mut observe: F) -> Result<RunResult>
where
    F: FnMut(usize, &Stage),
{
    let dims = p.photon_dims();
    let mut stage = Stage::Detached(kron_photons(&p.photons));
    let mut trace = Vec::with_capacity(p.steps.len());
    for (idx, step) in p.steps.iter().enumerate() {
        stage = apply_step(stage, step, &p.model, &dims).map_err(|e| e.at_step(idx))?;
        trace.push(stage.norm_sqr());
        observe(idx, &stage);
    }
    let final_unnormalized = match stage {
        Stage::Detached(v) => v,
        Stage::Attached(_) => {
            return Err(Error::InvalidProtocol(
                "run ended with the atom attached".into(),
            ))
        }
    };
    let prob = linalg::norm_sqr(&final_unnormalized);
    let final_normalized = if prob > 0.0 {
        let n = prob.sqrt();
        final_unnormalized.iter().map(|z| z / n).collect()
    } else {
        vec![ZERO; final_unnormalized.len()]
    };
    Ok(RunResult {
        photon_dims: dims,
        final_unnormalized,
        final_normalized,
        success_probability: prob,
        trace,
    })
}

fn apply_step(
    stage: Stage,
    step: &Instruction,
    model: &AtomModel,
    dims: &[usize],
) -> Result<Stage> {
    Ok(match (stage, step) {
        (Stage::Detached(v), Instruction::InitAtom(init)) => {
            Stage::Attached(JointState::attach(dims.to_vec(), &v, init))
        }
        (Stage::Attached(s), Instruction::Scatter(k)) => {
            Stage::Attached(s.apply_scatter(*k, model)?)
        }
        (Stage::Attached(s), Instruction::AtomUnitary(u)) => {
            Stage::Attached(s.apply_atom_unitary(u)?)
        }
        (Stage::Attached(s), Instruction::ProjectAtom(f)) => Stage::Detached(s.project_atom(f)?.0),
        (_, step) => {
            return Err(Error::InvalidProtocol(format!(
                "instruction {step:?} not allowed in the current atom state"
            )))
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepDoc {
    Init(Vec<Pair>),
    /// One-based photon index.
    Scatter(usize),
    Unitary(Vec<Vec<Pair>>),
    Project(Vec<Pair>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonDoc {
    pub amplitudes: Vec<Pair>,
}

/// Protocol file. `model` is either an inline model document or a path to a
/// model file, resolved relative to the protocol file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDoc {
    pub model: Value,
    pub photons: Vec<PhotonDoc>,
    pub steps: Vec<StepDoc>,
}

#[derive(Clone, Debug)]
pub struct LoadedProtocol {
    pub protocol: Protocol,
    pub model_unitarity: UnitarityReport,
}

impl ProtocolDoc {
    pub fn from_protocol(p: &Protocol, model: &ModelDoc) -> Self {
        let steps = p
            .steps
            .iter()
            .map(|s| match s {
                Instruction::InitAtom(v) => StepDoc::Init(vec_to_pairs(v.as_slice())),
                Instruction::Scatter(k) => StepDoc::Scatter(k + 1),
                Instruction::AtomUnitary(u) => StepDoc::Unitary(matrix_to_rows(u)),
                Instruction::ProjectAtom(v) => StepDoc::Project(vec_to_pairs(v.as_slice())),
            })
            .collect();
        ProtocolDoc {
            model: serde_json::to_value(model).expect("model doc serializes"),
            photons: p
                .photons
                .iter()
                .map(|ph| PhotonDoc {
                    amplitudes: vec_to_pairs(ph.amplitudes.as_slice()),
                })
                .collect(),
            steps,
        }
    }

    /// Builds the protocol, normalizing photon inputs and atom boundary
    /// vectors. `model_override` replaces the document's model.
    pub fn build(
        &self,
        base_dir: Option<&Path>,
        model_override: Option<&AtomModel>,
    ) -> Result<LoadedProtocol> {
        let (model, model_unitarity) = match model_override {
            Some(m) => (m.clone(), atom::validate_unitarity(m)),
            None => {
                let loaded = match &self.model {
                    Value::String(path) => {
                        let full = base_dir
                            .map_or_else(|| Path::new(path).to_path_buf(), |b| b.join(path));
                        atom::load_model(full)?
                    }
                    v => {
                        let doc: ModelDoc = serde_json::from_value(v.clone())
                            .map_err(|e| Error::Parse(format!("model: {e}")))?;
                        doc.build()?
                    }
                };
                (loaded.model, loaded.unitarity)
            }
        };
        let photons = self
            .photons
            .iter()
            .enumerate()
            .map(|(k, ph)| {
                PhotonInput::normalized(pairs_to_dvector(&ph.amplitudes))
                    .map_err(|e| Error::Parse(format!("photon {}: {e}", k + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let steps = self
            .steps
            .iter()
            .enumerate()
            .map(|(idx, s)| {
                let ins = || -> Result<Instruction> {
                    Ok(match s {
                        StepDoc::Init(v) => {
                            Instruction::InitAtom(normalize(pairs_to_dvector(v), "init vector")?)
                        }
                        StepDoc::Project(v) => Instruction::ProjectAtom(normalize(
                            pairs_to_dvector(v),
                            "projection vector",
                        )?),
                        StepDoc::Scatter(0) => {
                            return Err(Error::Parse("scatter indices are 1-based".into()));
                        }
                        StepDoc::Scatter(k) => Instruction::Scatter(k - 1),
                        StepDoc::Unitary(rows) => {
                            Instruction::AtomUnitary(rows_to_matrix(rows, "unitary")?)
                        }
                    })
                };
                ins().map_err(|e| e.at_step(idx))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LoadedProtocol {
            protocol: Protocol::new(model, photons, steps)?,
            model_unitarity,
        })
    }
}

pub fn parse_protocol(
    text: &str,
    base_dir: Option<&Path>,
    model_override: Option<&AtomModel>,
) -> Result<LoadedProtocol> {
    let doc: ProtocolDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.build(base_dir, model_override)
}

pub fn load_protocol(
    path: impl AsRef<Path>,
    model_override: Option<&AtomModel>,
) -> Result<LoadedProtocol> {
    let path = path.as_ref();
    parse_protocol(
        &std::fs::read_to_string(path)?,
        path.parent(),
        model_override,
    )
}

pub fn save_protocol(p: &Protocol, model: &ModelDoc) -> String {
    serde_json::to_string_pretty(&ProtocolDoc::from_protocol(p, model))
        .expect("protocol serializes")
}
