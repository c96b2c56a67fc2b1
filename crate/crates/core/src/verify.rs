//! Seeded random instances and the batch verification suites.
//!
//! Every suite draws case `k` from its own stream of `seed`, so results do
//! not depend on how cases are spread across threads.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::Serialize;

use crate::atom::{
    finite_detuning_model, reduced_blocks, validate_unitarity, AtomModel, FourLevelParams,
    ReducedBlockValues,
};
use crate::cluster::{compile_cluster_protocol, run_with_disentanglement, verify_stabilizers_with};
use crate::error::Result;
use crate::graph::{random_connected_graph, random_multigraph, random_simple_graph, Graph};
use crate::linalg;
use crate::mps::{
    build_mps, contract_mps_with, left_canonical_deviation, synthesize_smatrix, Mps,
    SequentialProtocol,
};
use crate::parallel::{map_range, Exec};
use crate::peps::{build_peps, contract_peps, ScatterWalk};
use crate::protocol::{run_protocol, Instruction, PhotonInput, Protocol};
use crate::random::{case_rng, haar_unitary, random_isometry, random_unit_vector};
use crate::scheduler::{
    euler_trails, minimal_trail_counts, schedule, trails_per_component, EventPolicy,
    TrailDecomposition,
};

/// Haar scattering matrix, random photon states, Haar rotations and random
/// boundary vectors.
pub fn random_sequential_protocol<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    d: usize,
    atom_dim: usize,
) -> SequentialProtocol {
    let s = haar_unitary(rng, d * atom_dim);
    let model = AtomModel::from_matrix(d, atom_dim, &s).expect("haar matrix is unitary");
    SequentialProtocol {
        model,
        photons: random_photons(rng, n, d),
        rotations: (0..n).map(|_| haar_unitary(rng, atom_dim)).collect(),
        init: random_unit_vector(rng, atom_dim),
        project: random_unit_vector(rng, atom_dim),
    }
}

fn random_photons<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Vec<PhotonInput> {
    (0..n)
        .map(|_| PhotonInput::new(random_unit_vector(rng, d)).expect("unit vector"))
        .collect()
}

/// Haar model and photons, a Haar rotation after every scattering and
/// random boundaries per trail, with scatter order following `walk`.
pub fn random_walk_protocol<R: Rng + ?Sized>(
    rng: &mut R,
    walk: &ScatterWalk,
    d: usize,
    atom_dim: usize,
) -> Protocol {
    let s = haar_unitary(rng, d * atom_dim);
    let model = AtomModel::from_matrix(d, atom_dim, &s).expect("haar matrix is unitary");
    let photons = random_photons(rng, walk.graph().node_count(), d);
    let mut steps = Vec::new();
    for trail in walk.trails() {
        steps.push(Instruction::InitAtom(random_unit_vector(rng, atom_dim)));
        for &v in trail {
            steps.push(Instruction::Scatter(v));
            steps.push(Instruction::AtomUnitary(haar_unitary(rng, atom_dim)));
        }
        steps.push(Instruction::ProjectAtom(random_unit_vector(rng, atom_dim)));
    }
    Protocol::new(model, photons, steps).expect("generated protocol is valid")
}

/// Pre-drawn random boundaries and Haar rotations for [`schedule`].
pub struct RandomPolicy {
    inits: Vec<DVector<C64>>,
    projects: Vec<DVector<C64>>,
    unitaries: Vec<DMatrix<C64>>,
}

impl RandomPolicy {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, d: &TrailDecomposition, atom_dim: usize) -> Self {
        let events: usize = d.trails.iter().map(Vec::len).sum();
        let t = d.trails.len();
        RandomPolicy {
            inits: (0..t).map(|_| random_unit_vector(rng, atom_dim)).collect(),
            projects: (0..t).map(|_| random_unit_vector(rng, atom_dim)).collect(),
            unitaries: (0..events).map(|_| haar_unitary(rng, atom_dim)).collect(),
        }
    }
}

impl EventPolicy for RandomPolicy {
    fn init(&self, trail: usize, _atom_dim: usize) -> DVector<C64> {
        self.inits[trail].clone()
    }

    fn project(&self, trail: usize, _atom_dim: usize) -> DVector<C64> {
        self.projects[trail].clone()
    }

    fn unitary(&self, event: usize, _node: usize, _atom_dim: usize) -> DMatrix<C64> {
        self.unitaries[event].clone()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    /// Largest deviation seen (or failed-case count for structural suites).
    pub worst: f64,
    pub tolerance: f64,
    pub failures: usize,
    /// Up to five failing cases with the reason.
    pub examples: Vec<String>,
    pub seconds: f64,
    pub pass: bool,
}

fn run_suite<F>(name: &str, cases: usize, tolerance: f64, exec: Exec, case: F) -> SuiteReport
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    let start = Instant::now();
    let results = map_range(exec, cases, case);
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut examples = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        let why = match r {
            Ok(dev) if dev <= tolerance => {
                worst = worst.max(dev);
                None
            }
            Ok(dev) => {
                worst = if dev.is_nan() {
                    f64::INFINITY
                } else {
                    worst.max(dev)
                };
                Some(format!("case {k}: deviation {dev:.3e}"))
            }
            Err(e) => Some(format!("case {k}: {e}")),
        };
        if let Some(w) = why {
            failures += 1;
            if examples.len() < 5 {
                examples.push(w);
            }
        }
    }
    SuiteReport {
        name: name.into(),
        cases,
        worst,
        tolerance,
        failures,
        examples,
        seconds: start.elapsed().as_secs_f64(),
        pass: failures == 0,
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// `ξ² + η² = 1` and unitarity of the reduced model for random rates.
pub fn reduced_block_suite(seed: u64, cases: usize, tolerance: f64, exec: Exec) -> SuiteReport {
    run_suite("reduced_blocks", cases, tolerance, exec, |k| {
        let mut rng = case_rng(seed, k);
        let (g0, g1) = (
            log_uniform(&mut rng, 1e-3, 1e3),
            log_uniform(&mut rng, 1e-3, 1e3),
        );
        let v = ReducedBlockValues::from_gammas(g0, g1);
        let p = FourLevelParams::new(g0, g1, 0.0, 1e3, rng.gen_bool(0.5))?;
        let dev = validate_unitarity(&reduced_blocks(&p)).max_deviation;
        Ok((v.xi * v.xi + v.eta * v.eta - 1.0).abs().max(dev))
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DetuningReport {
    pub separations: Vec<f64>,
    pub errors: Vec<f64>,
    pub ratios: Vec<f64>,
    pub pass: bool,
}

/// Truncation error of the finite-detuning model at each separation
/// (`γ₀ = γ₁ = 1`); passes when errors fall with every successive ratio in
/// `[lo, hi]`.
pub fn detuning_convergence(separations: &[f64], lo: f64, hi: f64) -> Result<DetuningReport> {
    let errors = separations
        .iter()
        .map(|&delta| {
            let p = FourLevelParams::new(1.0, 1.0, 0.0, delta, false)?;
            Ok(finite_detuning_model(&p)?.1)
        })
        .collect::<Result<Vec<f64>>>()?;
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[1] / w[0]).collect();
    let pass = ratios.iter().all(|r| (lo..=hi).contains(r));
    Ok(DetuningReport {
        separations: separations.to_vec(),
        errors,
        ratios,
        pass,
    })
}

/// `contract_mps ∘ build_mps` against the state-vector oracle.
pub fn mps_oracle_suite(seed: u64, cases: usize, tolerance: f64, exec: Exec) -> SuiteReport {
    run_suite("mps_oracle", cases, tolerance, exec, |k| {
        let mut rng = case_rng(seed, k);
        let (n, d, dd) = (
            rng.gen_range(1..=6),
            rng.gen_range(2..=3),
            rng.gen_range(1..=4),
        );
        let p = random_sequential_protocol(&mut rng, n, d, dd);
        let oracle = run_protocol(&p.to_protocol()?)?;
        let got = contract_mps_with(&build_mps(&p)?, Exec::Sequential);
        Ok(linalg::max_abs_diff(&got, &oracle.final_unnormalized))
    })
}

/// Site tensors built from unitary models are left-canonical. Even cases
/// use the four-level model, odd cases a Haar model.
pub fn left_canonical_suite(seed: u64, cases: usize, tolerance: f64, exec: Exec) -> SuiteReport {
    run_suite("left_canonical", cases, tolerance, exec, |k| {
        let mut rng = case_rng(seed, k);
        let n = rng.gen_range(1..=6);
        let p = if k % 2 == 0 {
            let params = FourLevelParams::new(
                log_uniform(&mut rng, 1e-2, 1e2),
                log_uniform(&mut rng, 1e-2, 1e2),
                0.0,
                1e3,
                rng.gen_bool(0.5),
            )?;
            let model = reduced_blocks(&params);
            let dd = model.atom_dim();
            SequentialProtocol {
                photons: random_photons(&mut rng, n, 2),
                rotations: (0..n).map(|_| haar_unitary(&mut rng, dd)).collect(),
                init: random_unit_vector(&mut rng, dd),
                project: random_unit_vector(&mut rng, dd),
                model,
            }
        } else {
            let (d, dd) = (rng.gen_range(2..=3), rng.gen_range(1..=4));
            random_sequential_protocol(&mut rng, n, d, dd)
        };
        Ok(left_canonical_deviation(&build_mps(&p)?))
    })
}

/// Random connected multigraph with `n ≤ max_n` nodes and at most `max_e`
/// edges.
pub fn random_peps_graph<R: Rng + ?Sized>(rng: &mut R, max_n: usize, max_e: usize) -> Graph {
    let n = rng.gen_range(2..=max_n);
    let e = rng.gen_range(n - 1..=max_e);
    random_connected_graph(rng, n, e)
}

/// `contract_peps ∘ build_peps ∘ schedule` against the oracle on random
/// connected graphs with Haar models, rotations and boundaries.
pub fn peps_oracle_suite(seed: u64, cases: usize, tolerance: f64, exec: Exec) -> SuiteReport {
    run_suite("peps_oracle", cases, tolerance, exec, |k| {
        let mut rng = case_rng(seed, k);
        let g = random_peps_graph(&mut rng, 6, 9);
        let (d, dd) = (rng.gen_range(2..=3), rng.gen_range(2..=3));
        let model = AtomModel::from_matrix(d, dd, &haar_unitary(&mut rng, d * dd))?;
        let photons = random_photons(&mut rng, g.node_count(), d);
        let dec = euler_trails(&g);
        let policy = RandomPolicy::new(&mut rng, &dec, dd);
        let (p, walk) = schedule(&g, &dec, &model, photons, &policy)?;
        let oracle = run_protocol(&p)?;
        let peps = build_peps(&p, &walk)?;
        for v in 0..g.node_count() {
            if peps.bond_axis_count(v) != g.degree(v) {
                return Ok(f64::INFINITY);
            }
        }
        Ok(linalg::max_abs_diff(
            &contract_peps(&peps)?,
            &oracle.final_unnormalized,
        ))
    })
}

/// Edge cover, minimal trail count per component and determinism; each
/// failed case counts 1.
pub fn scheduler_suite(seed: u64, cases: usize, exec: Exec) -> SuiteReport {
    run_suite("euler_scheduler", cases, 0.0, exec, |k| {
        let mut rng = case_rng(seed, k);
        let n: usize = rng.gen_range(2..=8);
        let e = rng.gen_range(n.div_ceil(2)..=14);
        let g = random_multigraph(&mut rng, n, e);
        let d = euler_trails(&g);
        let mut walked: Vec<(usize, usize)> = d
            .trails
            .iter()
            .flat_map(|t| t.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1]))))
            .collect();
        let mut edges: Vec<(usize, usize)> = g
            .edges()
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        walked.sort_unstable();
        edges.sort_unstable();
        let ok = walked == edges
            && trails_per_component(&g, &d) == minimal_trail_counts(&g)
            && euler_trails(&g) == d
            && ScatterWalk::new(g.clone(), d.trails.clone()).is_ok();
        Ok(if ok { 0.0 } else { 1.0 })
    })
}

/// Cluster compilation on random simple graphs: stabilizers, success
/// probability and atom disentanglement after every gadget.
pub fn cluster_suite(seed: u64, cases: usize, tolerance: f64, exec: Exec) -> SuiteReport {
    run_suite("cluster_stabilizers", cases, tolerance, exec, |k| {
        let mut rng = case_rng(seed, k);
        let n = rng.gen_range(1..=8);
        let p = rng.gen_range(0.2..0.8);
        let g = random_simple_graph(&mut rng, n, p);
        let (out, residuals) = run_with_disentanglement(&compile_cluster_protocol(&g)?)?;
        let rep = verify_stabilizers_with(&out.final_normalized, &g, tolerance, Exec::Sequential)?;
        let res = residuals.iter().copied().fold(0.0, f64::max);
        Ok(rep
            .worst_deviation()
            .max(res)
            .max((out.success_probability - 1.0).abs()))
    })
}

/// Largest deviation between the synthesized protocol's output and the
/// target contraction (rescaled by the boundary norms), together with the
/// model's unitarity deviation.
pub fn synthesis_deviation(target: &Mps) -> Result<f64> {
    let syn = synthesize_smatrix(target)?;
    let unitarity = validate_unitarity(&syn.model).max_deviation;
    let regenerated = run_protocol(&syn.protocol.to_protocol()?)?;
    let want: Vec<C64> = contract_mps_with(target, Exec::Sequential)
        .iter()
        .map(|z| z / syn.boundary_scale)
        .collect();
    Ok(linalg::max_abs_diff(&regenerated.final_unnormalized, &want).max(unitarity))
}

/// Translation-invariant left-canonical target with a random isometric
/// site and random (unnormalized) boundaries.
pub fn random_canonical_target<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, dd: usize) -> Mps {
    let iso = random_isometry(rng, d * dd, dd);
    let site: Vec<DMatrix<C64>> = (0..d)
        .map(|i| iso.view((i * dd, 0), (dd, dd)).into_owned())
        .collect();
    let scale = rng.gen_range(0.5..2.0);
    Mps::from_matrices(
        &vec![site; n],
        random_unit_vector(rng, dd) * C64::new(scale, 0.0),
        random_unit_vector(rng, dd),
    )
    .expect("consistent bonds")
}

pub fn synthesis_suite(seed: u64, cases: usize, tolerance: f64, exec: Exec) -> SuiteReport {
    run_suite("synthesis_round_trip", cases, tolerance, exec, |k| {
        let mut rng = case_rng(seed, k);
        let (n, d, dd) = (
            rng.gen_range(1..=5),
            rng.gen_range(2..=3),
            rng.gen_range(1..=4),
        );
        synthesis_deviation(&random_canonical_target(&mut rng, n, d, dd))
    })
}

/// Every randomized suite at its default size and tolerance.
pub fn run_all(seed: u64, exec: Exec, tolerance: Option<f64>) -> Vec<SuiteReport> {
    let tol = |t: f64| tolerance.unwrap_or(t);
    vec![
        reduced_block_suite(seed, 100, tol(1e-12), exec),
        mps_oracle_suite(seed, 200, tol(1e-10), exec),
        left_canonical_suite(seed, 200, tol(1e-12), exec),
        peps_oracle_suite(seed, 100, tol(1e-10), exec),
        scheduler_suite(seed, 500, exec),
        cluster_suite(seed, 50, tol(1e-10), exec),
        synthesis_suite(seed, 50, tol(1e-10), exec),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_small_and_are_thread_independent() {
        for exec in [Exec::Sequential, Exec::Parallel] {
            assert!(mps_oracle_suite(1, 10, 1e-10, exec).pass);
            assert!(peps_oracle_suite(1, 5, 1e-10, exec).pass);
            assert!(scheduler_suite(1, 20, exec).pass);
            assert!(cluster_suite(1, 5, 1e-10, exec).pass);
            assert!(synthesis_suite(1, 5, 1e-10, exec).pass);
            assert!(left_canonical_suite(1, 10, 1e-12, exec).pass);
            assert!(reduced_block_suite(1, 10, 1e-12, exec).pass);
        }
        let a = mps_oracle_suite(9, 8, 1e-10, Exec::Sequential);
        let b = mps_oracle_suite(9, 8, 1e-10, Exec::Parallel);
        assert_eq!(a.worst, b.worst);
    }

    #[test]
    fn failing_cases_are_reported() {
        let r = run_suite("t", 3, 0.5, Exec::Sequential, |k| Ok(k as f64 / 2.0));
        assert_eq!((r.failures, r.pass), (1, false));
        assert_eq!(r.examples.len(), 1);
        let r = run_suite("t", 1, 0.5, Exec::Sequential, |_| Ok(f64::NAN));
        assert!(!r.pass && r.worst.is_infinite());
    }

    #[test]
    fn detuning_errors_shrink() {
        let r = detuning_convergence(&[1e2, 1e3, 1e4], 0.05, 0.2).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.errors.windows(2).all(|w| w[1] < w[0]));
    }
}
