use std::path::Path;

use anyhow::{bail, Context, Result};
use photon_tn::atom::{self, AtomModel, ModelDoc};
use photon_tn::cluster::{
    compile_cluster_protocol, fidelity, run_with_disentanglement, verify_stabilizers_with,
};
use photon_tn::graph::{parse_graph, Graph};
use photon_tn::linalg;
use photon_tn::mps::{self, build_mps, contract_mps, left_canonical_deviation, SequentialProtocol};
use photon_tn::parallel::with_jobs;
use photon_tn::peps::{build_peps, contract_peps, PepsDoc, ScatterWalk};
use photon_tn::protocol::{parse_protocol, run_protocol, PhotonInput, Protocol, ProtocolDoc};
use photon_tn::scheduler::{
    euler_trails, minimal_trail_counts, schedule as emit, trails_per_component, DefaultPolicy,
};
use photon_tn::verify;
use photon_tn::{Exec, C64};
use serde_json::{json, Value};

use crate::report::{amplitudes, Report};
use crate::Global;

fn one_based(trails: &[Vec<usize>]) -> Value {
    json!(trails
        .iter()
        .map(|t| t.iter().map(|v| v + 1).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn write_out(r: &mut Report, g: &Global, key: &str, text: String) -> Result<()> {
    match &g.out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            r.set(key, json!({ "written_to": path.display().to_string() }));
        }
        None => r.set(key, serde_json::from_str(&text)?),
    }
    Ok(())
}

/// The `--model` file, if given, as both a model and its document.
fn model_override(r: &mut Report, g: &Global) -> Result<Option<(AtomModel, Value)>> {
    let Some(path) = &g.model else {
        return Ok(None);
    };
    let text = r.read_input(path)?;
    let loaded = atom::parse_model(&text).with_context(|| format!("model {}", path.display()))?;
    r.check_max(
        "model_unitarity",
        loaded.unitarity.max_deviation,
        atom::UNITARITY_TOL,
    );
    Ok(Some((loaded.model, serde_json::from_str(&text)?)))
}

fn load_protocol(r: &mut Report, g: &Global, path: &Path) -> Result<Protocol> {
    let model = model_override(r, g)?;
    let text = r.read_input(path)?;
    let loaded = parse_protocol(&text, path.parent(), model.as_ref().map(|m| &m.0))
        .with_context(|| format!("protocol {}", path.display()))?;
    if model.is_none() {
        r.check_max(
            "model_unitarity",
            loaded.model_unitarity.max_deviation,
            atom::UNITARITY_TOL,
        );
    }
    Ok(loaded.protocol)
}

fn load_graph(r: &mut Report, g: &Global) -> Result<Graph> {
    let Some(path) = &g.graph else {
        bail!("--graph is required")
    };
    let text = r.read_input(path)?;
    parse_graph(&text).with_context(|| format!("graph {}", path.display()))
}

pub fn run(argv: Vec<String>, g: &Global, path: &Path) -> Result<Report> {
    let mut r = Report::new(argv);
    let p = load_protocol(&mut r, g, path)?;
    let out = run_protocol(&p)?;
    r.set("photon_dims", json!(out.photon_dims));
    r.set("success_probability", json!(out.success_probability));
    r.set(
        "unnormalized",
        amplitudes(&out.final_unnormalized, &out.photon_dims),
    );
    r.set(
        "normalized",
        amplitudes(&out.final_normalized, &out.photon_dims),
    );
    r.set("norm_trace", json!(out.trace));
    Ok(r)
}

pub fn build(argv: Vec<String>, g: &Global, path: &Path, as_mps: bool) -> Result<Report> {
    let mut r = Report::new(argv);
    let p = load_protocol(&mut r, g, path)?;
    let oracle = run_protocol(&p)?.final_unnormalized;
    let tol = g.tolerance.unwrap_or(1e-12);
    if as_mps {
        let seq = SequentialProtocol::from_protocol(&p)?;
        let m = build_mps(&seq)?;
        let dev = linalg::max_abs_diff(&contract_mps(&m), &oracle);
        r.set("kind", json!("mps"));
        r.set("bond_dims", json!(m.bond_dims()));
        r.set(
            "left_canonical_deviation",
            json!(left_canonical_deviation(&m)),
        );
        r.check_max("oracle_deviation", dev, tol);
        write_out(&mut r, g, "mps", mps::save_mps(&m))?;
    } else {
        let graph = load_graph(&mut r, g)?;
        let walk = ScatterWalk::new(graph, p.trails())?;
        let peps = build_peps(&p, &walk)?;
        let dev = linalg::max_abs_diff(&contract_peps(&peps)?, &oracle);
        let axes: Vec<usize> = (0..walk.graph().node_count())
            .map(|v| peps.bond_axis_count(v))
            .collect();
        r.set("kind", json!("peps"));
        r.set("trails", one_based(walk.trails()));
        r.set("bond_axes", json!(axes));
        r.check_max("oracle_deviation", dev, tol);
        write_out(
            &mut r,
            g,
            "peps",
            serde_json::to_string_pretty(&PepsDoc::from_peps(&peps))?,
        )?;
    }
    Ok(r)
}

pub fn schedule(argv: Vec<String>, g: &Global) -> Result<Report> {
    let mut r = Report::new(argv);
    let graph = load_graph(&mut r, g)?;
    let (model, model_doc) = match model_override(&mut r, g)? {
        Some(m) => m,
        None => (atom::cz_model(), serde_json::to_value(ModelDoc::cz())?),
    };
    let dec = euler_trails(&graph);
    let photons = vec![PhotonInput::basis(model.photon_dim(), 0); graph.node_count()];
    let (p, walk) = emit(&graph, &dec, &model, photons, &DefaultPolicy)?;
    let mut walked: Vec<(usize, usize)> = walk
        .trails()
        .iter()
        .flat_map(|t| t.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1]))))
        .collect();
    let mut edges: Vec<(usize, usize)> = graph
        .edges()
        .iter()
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect();
    walked.sort_unstable();
    edges.sort_unstable();
    r.set(
        "odd_nodes",
        json!(dec.odd_nodes.iter().map(|v| v + 1).collect::<Vec<_>>()),
    );
    r.set("trails", one_based(&dec.trails));
    r.set(
        "trails_per_component",
        json!(trails_per_component(&graph, &dec)),
    );
    r.check_flag("edge_cover", walked == edges);
    r.check_flag(
        "minimal_trail_count",
        trails_per_component(&graph, &dec) == minimal_trail_counts(&graph),
    );
    let mut doc = ProtocolDoc::from_protocol(&p, &ModelDoc::default());
    doc.model = model_doc;
    write_out(&mut r, g, "protocol", serde_json::to_string_pretty(&doc)?)?;
    Ok(r)
}

pub fn cluster(argv: Vec<String>, g: &Global) -> Result<Report> {
    let mut r = Report::new(argv);
    let graph = load_graph(&mut r, g)?;
    let tol = g.tolerance.unwrap_or(1e-10);
    let cp = compile_cluster_protocol(&graph)?;
    let (out, residuals) = run_with_disentanglement(&cp)?;
    let rep = verify_stabilizers_with(&out.final_normalized, &graph, tol, Exec::Parallel)?;
    r.set("stabilizer_expectations", json!(rep.expectations));
    r.set("success_probability", json!(out.success_probability));
    r.set("gadget_residuals", json!(residuals));
    r.set("state", amplitudes(&out.final_normalized, &out.photon_dims));
    r.check_max("stabilizers", rep.worst_deviation(), tol);
    r.check_max(
        "success_probability",
        (out.success_probability - 1.0).abs(),
        tol,
    );
    r.check_max(
        "disentanglement",
        residuals.iter().copied().fold(0.0, f64::max),
        tol,
    );
    write_out(
        &mut r,
        g,
        "protocol",
        photon_tn::protocol::save_protocol(&cp.protocol, &ModelDoc::cz()),
    )?;
    Ok(r)
}

pub fn synthesize(argv: Vec<String>, g: &Global, path: &Path) -> Result<Report> {
    let mut r = Report::new(argv);
    let text = r.read_input(path)?;
    let target = mps::parse_mps(&text).with_context(|| format!("MPS {}", path.display()))?;
    let tol = g.tolerance.unwrap_or(1e-10);
    let syn = mps::synthesize_smatrix(&target)?;
    let unitarity = atom::validate_unitarity(&syn.model).max_deviation;
    let protocol = syn.protocol.to_protocol()?;
    let regenerated = run_protocol(&protocol)?;
    let want: Vec<C64> = contract_mps(&target)
        .iter()
        .map(|z| z / syn.boundary_scale)
        .collect();
    let dev = linalg::max_abs_diff(&regenerated.final_unnormalized, &want);
    let norm = linalg::norm_sqr(&want).sqrt();
    let fid = if norm > 0.0 {
        let unit: Vec<C64> = want.iter().map(|z| z / norm).collect();
        fidelity(&unit, &regenerated.final_normalized)
    } else {
        0.0
    };
    r.set("photon_dim", json!(syn.model.photon_dim()));
    r.set("atom_dim", json!(syn.model.atom_dim()));
    r.set("boundary_scale", json!(syn.boundary_scale));
    r.set("fidelity", json!(fid));
    r.set(
        "protocol",
        serde_json::to_value(ProtocolDoc::from_protocol(
            &protocol,
            &ModelDoc::explicit(&syn.model),
        ))?,
    );
    r.check_max("unitarity", unitarity, tol);
    r.check_max("round_trip_deviation", dev, tol);
    write_out(&mut r, g, "model", atom::save_model(&syn.model))?;
    Ok(r)
}

pub fn verify(argv: Vec<String>, g: &Global) -> Result<Report> {
    let mut r = Report::new(argv);
    let (seed, tol) = (g.seed, g.tolerance);
    let (suites, detuning) = with_jobs(g.jobs, || {
        (
            verify::run_all(seed, Exec::Parallel, tol),
            verify::detuning_convergence(&[1e2, 1e3, 1e4], 0.05, 0.2),
        )
    });
    let detuning = detuning?;
    for s in &suites {
        r.check_flag(&s.name, s.pass);
    }
    r.check_flag("finite_detuning_convergence", detuning.pass);
    r.set("seed", json!(seed));
    r.set("suites", serde_json::to_value(&suites)?);
    r.set("finite_detuning", serde_json::to_value(&detuning)?);
    Ok(r)
}
