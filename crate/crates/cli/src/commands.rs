use std::fmt::Write as _;
use std::path::Path;

use cracklab::capacity::{capacity_table, table_csv};
use cracklab::dual::{conjugate_from_primal, duality_gap, solve_dual_with};
use cracklab::gamma::{
    family_meshes, run_annulus_experiment, run_jump_experiment, run_junction_experiment, run_stability_experiment,
    ConvergenceReport, ExperimentConfig,
};
use cracklab::geometry::{
    connected_components, contact_point, example_boundary, example_domain, hausdorff_distance, limit_crack, Domain, Rect,
};
use cracklab::integrand::Integrand;
use cracklab::mesh::{build_mesh, Grid, GridMesh, ScalarField};
use cracklab::primal::{solve_primal_with, SolveOptions, SolveReport};

use crate::config::{default_boundary, load, CapacityFile, Document, GammaFile, ProblemFile, SetListFile};
use crate::{CliError, Overrides};

const DEFAULT_RESOLUTION: usize = 32;

fn write(ov: &Overrides, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(&ov.out).map_err(|e| CliError::Io(format!("{}: {e}", ov.out.display())))?;
    let path = ov.out.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `name,value` rows and the matching `name: value` report.
struct Summary(Vec<(String, String)>);

impl Summary {
    fn push(&mut self, name: &str, value: impl std::fmt::Display) {
        self.0.push((name.to_string(), value.to_string()));
    }

    fn solve_report(&mut self, prefix: &str, r: &SolveReport) {
        self.push(&format!("{prefix}iterations"), r.iterations);
        self.push(&format!("{prefix}residual"), format!("{:e}", r.residual));
        self.push(&format!("{prefix}stages"), r.epsilon_trace.len());
    }

    fn csv(&self) -> String {
        let mut out = String::from("name,value\n");
        for (n, v) in &self.0 {
            let _ = writeln!(out, "{n},{v}");
        }
        out
    }

    fn text(&self) -> String {
        let mut out = String::new();
        for (n, v) in &self.0 {
            let _ = writeln!(out, "{n}: {v}");
        }
        out
    }
}

struct Problem {
    mesh: GridMesh,
    f: Integrand,
    g: ScalarField,
    opts: SolveOptions,
}

fn problem(doc: &Document<ProblemFile>, ov: &Overrides) -> Result<Problem, CliError> {
    let file = &doc.value;
    let geo = &file.geometry;
    let resolution = ov.resolution.or(file.resolution).unwrap_or(DEFAULT_RESOLUTION);
    let example = geo.example().map_err(|e| doc.error_at("example", e))?;
    let mesh = match example {
        Some(ex) => {
            if geo.domain.is_some() || geo.cracks.is_some() || geo.holes.is_some() || geo.dirichlet.is_some() {
                return Err(doc.error_at("example", "an example geometry cannot be combined with explicit pieces"));
            }
            let mut cfg = ExperimentConfig::new(ex);
            cfg.p = file.p;
            cfg.resolution = resolution;
            cfg.hs = vec![geo.h.unwrap_or(2)];
            if let Some(c) = geo.c {
                cfg.c = c;
            }
            if let (Some(a), Some(b)) = (geo.a, geo.b) {
                cfg.channels = Some(vec![(a, b)]);
            }
            if let Some(gap) = geo.gap {
                cfg.gap_scale = gap * cfg.hs[0] as f64;
            }
            if geo.h.is_some() {
                let (mut members, _) = family_meshes(&cfg).map_err(|e| doc.error_at("example", e))?;
                members.remove(0)
            } else {
                let domain = example_domain(ex);
                let k = limit_crack(ex);
                let snap: Vec<_> = k.vertices().collect();
                let grid = Grid::uniform(domain.outer(), resolution, &snap).map_err(|e| doc.error_at("resolution", e))?;
                let contacts: Vec<_> = contact_point(ex).into_iter().collect();
                GridMesh::new(&domain, &k, &example_boundary(ex), grid, &contacts).map_err(|e| doc.error_at("example", e))?
            }
        }
        None => {
            let ex = geo.explicit().map_err(|e| doc.error_at("domain", e))?;
            build_mesh(&ex.domain, &ex.cracks, &ex.boundary, resolution).map_err(|e| doc.error_at("cracks", e))?
        }
    };
    let f = Integrand::power(file.p)
        .and_then(|f| f.with_epsilon(file.epsilon.unwrap_or(0.0)))
        .map_err(|e| doc.error_at("p", e))?;
    let data = match &file.boundary {
        Some(b) => b.to_data().map_err(|e| doc.error_at("affine", e))?,
        None => default_boundary(example),
    };
    let g = data.field(&mesh).map_err(|e| doc.error_at("per_arc", e))?;
    let mut opts = SolveOptions::default();
    opts.tol = ov.tol.or(file.tol);
    if let Some(m) = file.max_iter {
        opts.max_iter = m;
    }
    Ok(Problem { mesh, f, g, opts })
}

fn mesh_summary(s: &mut Summary, mesh: &GridMesh) {
    s.push("dofs", mesh.dof_count());
    s.push("cells", mesh.cell_count());
    s.push("edges", mesh.edges().len());
}

pub fn solve(path: &Path, ov: &Overrides) -> Result<(), CliError> {
    let doc = load::<ProblemFile>(path)?;
    let pr = problem(&doc, ov)?;
    let (u, _, report) = solve_primal_with(&pr.mesh, &pr.f, &pr.g, &pr.opts)?;
    let mut s = Summary(Vec::new());
    mesh_summary(&mut s, &pr.mesh);
    s.push("p", pr.f.p());
    s.push("energy", format!("{:e}", report.energy));
    s.solve_report("", &report);
    write(ov, "u.csv", &pr.mesh.field_csv(&u)?)?;
    write(ov, "summary.csv", &s.csv())?;
    write(ov, "report.txt", &s.text())?;
    print!("{}", s.text());
    Ok(())
}

pub fn dual(path: &Path, ov: &Overrides) -> Result<(), CliError> {
    let doc = load::<ProblemFile>(path)?;
    let pr = problem(&doc, ov)?;
    let fstar = pr.f.conjugate().map_err(|e| doc.error_at("epsilon", e))?;
    let (u, _, primal) = solve_primal_with(&pr.mesh, &pr.f, &pr.g, &pr.opts)?;
    let mut s = Summary(Vec::new());
    mesh_summary(&mut s, &pr.mesh);
    s.push("p", pr.f.p());
    s.push("q", fstar.q());
    s.push("energy_primal", format!("{:e}", primal.energy));
    s.solve_report("primal_", &primal);
    let v = if doc.value.conjugate_from_primal == Some(true) {
        conjugate_from_primal(&pr.mesh, &pr.f, &u).map_err(|e| match e {
            cracklab::Error::NotSimplyConnected => doc.error_at("conjugate_from_primal", e),
            other => other.into(),
        })?
    } else {
        let partition = connected_components(pr.mesh.cracks(), pr.mesh.boundary(), pr.mesh.domain());
        let (v, report) = solve_dual_with(&pr.mesh, &fstar, &pr.g, &partition, &pr.opts)?;
        s.solve_report("dual_", &report);
        v
    };
    let value = cracklab::dual::dual_value(&pr.mesh, &fstar, &v, &pr.g)?;
    let gap = duality_gap(&pr.mesh, &pr.f, &fstar, &u, &v, &pr.g)?;
    s.push("energy_dual", format!("{value:e}"));
    s.push("gap", format!("{gap:e}"));
    s.push("components", v.component_values.len());
    write(ov, "v.csv", &v.edge_csv(&pr.mesh)?)?;
    write(ov, "components.csv", &v.component_csv())?;
    write(ov, "summary.csv", &s.csv())?;
    write(ov, "report.txt", &s.text())?;
    print!("{}", s.text());
    Ok(())
}

/// Threshold each verdict flag is tested against, for the printed lines.
fn verdicts(r: &ConvergenceReport, cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let line = |out: &mut String, name: &str, value: Option<f64>, limit: f64| {
        if let Some(v) = value {
            let verdict = if v <= limit { "pass" } else { "fail" };
            let _ = writeln!(out, "verdict: {name} <= {limit} ({v:e}): {verdict}");
        }
    };
    line(&mut out, "grad_dist_ratio", r.metric("grad_dist_ratio"), cfg.distance_ratio);
    line(&mut out, "energy_rel_error_final", r.metric("energy_rel_error_final"), cfg.energy_tol);
    line(&mut out, "jump_relation_residual", r.metric("jump_relation_residual"), cfg.relation_tol);
    line(&mut out, "euler_lagrange_max_relative", r.metric("euler_lagrange_max_relative"), cfg.el_tol);
    line(&mut out, "a_spread_relative", r.metric("a_spread_relative"), cfg.symmetry_tol);
    if let Some(m) = r.metric("margin") {
        let verdict = if m >= cfg.annulus_margin { "pass" } else { "fail" };
        let _ = writeln!(out, "verdict: margin >= {} ({m:e}): {verdict}", cfg.annulus_margin);
    }
    for (n, v) in &r.flags {
        let _ = writeln!(out, "flag: {n} = {v}");
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

pub fn gamma(path: &Path, ov: &Overrides) -> Result<(), CliError> {
    let doc = load::<GammaFile>(path)?;
    let (mut cfg, experiment) = doc.experiment_config()?;
    if let Some(r) = ov.resolution {
        cfg.resolution = r;
    }
    if ov.tol.is_some() {
        cfg.tol = ov.tol;
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    let run = match experiment.as_str() {
        "stability" => run_stability_experiment(&cfg),
        "jump" => run_jump_experiment(&cfg),
        "annulus" => run_annulus_experiment(&cfg),
        _ => run_junction_experiment(&cfg),
    };
    let report = run.map_err(|e| match e {
        cracklab::Error::Config(m) => doc.error_at("example", m),
        other => other.into(),
    })?;
    write(ov, "convergence.csv", &report.to_csv())?;
    write(ov, "metrics.csv", &report.metrics_csv())?;
    write(ov, "report.txt", &report.to_text())?;
    print!("{}", verdicts(&report, &cfg));
    Ok(())
}

pub fn capacity(path: &Path, ov: &Overrides) -> Result<(), CliError> {
    let doc = load::<CapacityFile>(path)?;
    let (mut q, mut resolutions) = doc.query()?;
    if let Some(r) = ov.resolution {
        resolutions = vec![r];
    }
    q.tol = ov.tol.or(q.tol);
    if doc.value.set_is_degenerate() {
        return Err(doc.error_at("radius", "the disk radius must be positive"));
    }
    let rows = capacity_table(&q, &resolutions).map_err(|e| match e {
        cracklab::Error::Config(m) => doc.error_at("r", m),
        other => other.into(),
    })?;
    let csv = table_csv(&rows);
    write(ov, "capacity.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn hausdorff(first: &Path, second: &Path, ov: &Overrides) -> Result<(), CliError> {
    let a = load::<SetListFile>(first)?;
    let b = load::<SetListFile>(second)?;
    let domain = match (a.domain()?, b.domain()?) {
        (Some(d), _) | (None, Some(d)) => d,
        (None, None) => Domain::rectangle(Rect::centered(1.0)),
    };
    let d = hausdorff_distance(&a.crack_set()?, &b.crack_set()?, &domain)?;
    write(ov, "hausdorff.csv", &format!("name,value\nhausdorff,{d:e}\n"))?;
    println!("{d}");
    Ok(())
}

impl CapacityFile {
    fn set_is_degenerate(&self) -> bool {
        matches!(self.set, crate::config::SetFile::Disk { radius, .. } if !(radius > 0.0))
    }
}
