//! Acceptance run: one line per criterion, `PASS` or `FAIL`, with the
//! measured numbers. A criterion that fails for a reason recorded in
//! `KNOWN_RED` is reported as `FAIL` and, instead of the threshold, the
//! recorded explanation is checked against the measurements. The process
//! exits nonzero only when a criterion fails without such an explanation,
//! or when the explanation does not hold.
//!
//! Runs for a long time (about half an hour on one core). Pick criteria
//! with `ACCEPTANCE_ONLY=1,3,9`.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use cracklab::capacity::{capacity_table, last_relative_change, strictly_decreasing, CapacityQuery, CapacitySet, Container};
use cracklab::dual::{conjugate_from_primal_in, duality_gap, fenchel_residuals, solve_dual, DualField};
use cracklab::gamma::{
    balanced_junction_data, family_meshes, run_annulus_experiment, run_jump_experiment, run_junction_experiment,
    run_stability_experiment, ConvergenceReport, ExperimentConfig,
};
use cracklab::geometry::{connected_components, hausdorff_distance, BoundarySpec, CrackSet, Domain, ExampleId, Rect};
use cracklab::integrand::Integrand;
use cracklab::mesh::{build_mesh, GradientField, GridMesh, ScalarField};
use cracklab::primal::{solve_primal, Affine, BoundaryData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
    /// For a failing known-red criterion: whether the recorded explanation
    /// matches the run, and what was checked.
    explained: Option<(bool, String)>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, explained: None }
    }
}

/// Criteria whose threshold is not met by the discretization, and why.
const KNOWN_RED: &[(usize, &str)] = &[
    (
        5,
        "the limit crack separates the Dirichlet arcs, so the distance is the member's own \
         gradient norm; each member connects the arcs through a channel of width 2/h in \
         series with the bulk, whose energy decays only like h^(-1) asymptotically \
         (distance like h^(-1/p)) and much slower at h <= 16",
    ),
    (
        6,
        "c=0 branch: same mechanism as criterion 5 with the gap channel of ex5_3; the \
         distance falls monotonically but the 10% ratio of the stable verdict lies far \
         beyond h=32",
    ),
];

/// Runs that produced a primal solution, for the conjugate relation check:
/// `(label, distance, node residual)`.
type RelationLog = Vec<(String, f64, f64)>;

fn unit_square() -> Domain {
    Domain::rectangle(Rect::new(0.0, 0.0, 1.0, 1.0).unwrap())
}

fn relation_entry(log: &mut RelationLog, label: &str, mesh: &GridMesh, f: &Integrand, u: &ScalarField) -> cracklab::Result<()> {
    if !mesh.domain().is_simply_connected() {
        return Ok(());
    }
    let partition = connected_components(mesh.cracks(), mesh.boundary(), mesh.domain());
    let (v, cons) = conjugate_from_primal_in(mesh, f, u, &partition)?;
    let d = cracklab::dual::conjugate_relation_distance(mesh, f, u, &v)?;
    log.push((label.to_string(), d, cons.node_residual));
    Ok(())
}

fn affine_exactness(log: &mut RelationLog) -> cracklab::Result<Outcome> {
    let t = Instant::now();
    let domain = unit_square();
    let mesh = build_mesh(&domain, &CrackSet::empty(), &BoundarySpec::everywhere(&domain), 64)?;
    let g = BoundaryData::Affine(Affine::new(0.0, 1.0, 0.0)).field(&mesh)?;
    let partition = connected_components(mesh.cracks(), mesh.boundary(), mesh.domain());
    let mut worst_energy = 0.0f64;
    let mut worst_grad = 0.0f64;
    let mut worst_v = 0.0f64;
    let mut worst_gap = 0.0f64;
    for p in [2.0, 3.0, 4.0] {
        let f = Integrand::power(p)?;
        let (u, grad, report) = solve_primal(&mesh, &f, &g, None, 2000)?;
        worst_energy = worst_energy.max((report.energy - 1.0 / p).abs());
        for d in &grad.values {
            worst_grad = worst_grad.max((d[0] - 1.0).abs().max(d[1].abs()));
        }
        let fs = f.conjugate()?;
        let (v, _) = solve_dual(&mesh, &fs, &g, &partition, None)?;
        for (e, val) in mesh.edges().iter().zip(&v.edge_values) {
            worst_v = worst_v.max((val - (0.5 - e.segment.midpoint()[1])).abs());
        }
        worst_gap = worst_gap.max(duality_gap(&mesh, &f, &fs, &u, &v, &g)?.abs());
        relation_entry(log, &format!("affine p={p}"), &mesh, &f, &u)?;
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst_energy <= 1e-8 && worst_grad <= 1e-6 && worst_v <= 1e-6 && worst_gap <= 1e-10 && secs < 5.0;
    Ok(Outcome::new(
        pass,
        format!(
            "energy err {worst_energy:.1e} (<=1e-8), grad err {worst_grad:.1e} (<=1e-6), \
             |v-(1/2-y)| {worst_v:.1e}, gap {worst_gap:.1e} (<=1e-10), {secs:.1}s (<5s)"
        ),
    ))
}

/// Symmetric sparse matrix as row maps, assembled by hand.
struct Assembled {
    rows: Vec<BTreeMap<usize, f64>>,
}

impl Assembled {
    fn new(n: usize) -> Self {
        Self { rows: vec![BTreeMap::new(); n] }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        *self.rows[i].entry(j).or_insert(0.0) += v;
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|(j, v)| v * x[*j]).sum()).collect()
    }
}

/// Jacobi-preconditioned conjugate gradients, from zero. Also used on
/// consistent singular systems, whose iterates stay in the range.
fn pcg(a: &Assembled, b: &[f64], rel_tol: f64) -> Vec<f64> {
    let n = b.len();
    let diag: Vec<f64> = (0..n).map(|i| a.rows[i].get(&i).copied().unwrap_or(1.0)).collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let bnorm = dot(b, b).sqrt();
    for _ in 0..20 * n + 100 {
        if dot(&r, &r).sqrt() <= rel_tol * bnorm {
            break;
        }
        let ap = a.apply(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

/// Linear P1 solve of the p=2 problem with the same boundary values.
fn oracle_primal(mesh: &GridMesh, g: &ScalarField) -> ScalarField {
    let n = mesh.dof_count();
    let mut index = vec![usize::MAX; n];
    let mut free = 0;
    for (d, slot) in index.iter_mut().enumerate() {
        if !mesh.is_dirichlet(d) {
            *slot = free;
            free += 1;
        }
    }
    let mut a = Assembled::new(free);
    let mut b = vec![0.0; free];
    for c in mesh.cells() {
        for k in 0..3 {
            let i = c.dofs[k];
            if index[i] == usize::MAX {
                continue;
            }
            for l in 0..3 {
                let j = c.dofs[l];
                let kij = c.area * (c.basis[k][0] * c.basis[l][0] + c.basis[k][1] * c.basis[l][1]);
                if index[j] == usize::MAX {
                    b[index[i]] -= kij * g.values[j];
                } else {
                    a.add(index[i], index[j], kij);
                }
            }
        }
    }
    let x = pcg(&a, &b, 1e-14);
    ScalarField::new((0..n).map(|d| if index[d] == usize::MAX { g.values[d] } else { x[index[d]] }).collect())
}

/// Linear edge-midpoint solve of the p=2 dual problem: one unknown per
/// component of cracks and Neumann arcs and per remaining edge.
fn oracle_dual_gradient(mesh: &GridMesh, g: &ScalarField) -> cracklab::Result<GradientField> {
    let partition = connected_components(mesh.cracks(), mesh.boundary(), mesh.domain());
    let comps = cracklab::dual::edge_components(mesh, &partition)?;
    let mut comp_unknown = vec![usize::MAX; partition.len()];
    let mut n = 0;
    let mut unknown = Vec::with_capacity(comps.len());
    for c in &comps {
        let u = match c {
            Some(k) if comp_unknown[*k] != usize::MAX => comp_unknown[*k],
            Some(k) => {
                comp_unknown[*k] = n;
                n += 1;
                n - 1
            }
            None => {
                n += 1;
                n - 1
            }
        };
        unknown.push(u);
    }
    let gg = mesh.gradient(g)?;
    let mut a = Assembled::new(n);
    let mut b = vec![0.0; n];
    for ((c, e), dg) in mesh.cells().iter().zip(mesh.cell_edges()).zip(&gg.values) {
        let phi = c.basis.map(|l| [-2.0 * l[0], -2.0 * l[1]]);
        let load = [dg[1], -dg[0]];
        for k in 0..3 {
            let i = unknown[e[k]];
            b[i] += c.area * (load[0] * phi[k][0] + load[1] * phi[k][1]);
            for l in 0..3 {
                a.add(i, unknown[e[l]], c.area * (phi[k][0] * phi[l][0] + phi[k][1] * phi[l][1]));
            }
        }
    }
    let x = pcg(&a, &b, 1e-14);
    let values = mesh
        .cells()
        .iter()
        .zip(mesh.cell_edges())
        .map(|(c, e)| {
            let mut d = [0.0; 2];
            for k in 0..3 {
                let val = x[unknown[e[k]]];
                d[0] += -2.0 * c.basis[k][0] * val;
                d[1] += -2.0 * c.basis[k][1] * val;
            }
            d
        })
        .collect();
    GradientField::from_cells(mesh, values)
}

/// `‖a − b‖ / max(‖b‖, ‖∇g‖)` in L2. The data term keeps the ratio
/// meaningful when a separating crack makes the exact gradient vanish.
fn relative_l2(mesh: &GridMesh, a: &GradientField, b: &GradientField, g: &ScalarField) -> cracklab::Result<f64> {
    let scale = mesh.lp_norm(b, 2.0)?.max(mesh.lp_norm(&mesh.gradient(g)?, 2.0)?);
    Ok(mesh.lp_distance(a, b, 2.0)? / scale)
}

fn linear_oracle(log: &mut RelationLog) -> cracklab::Result<Outcome> {
    let mut worst_primal = 0.0f64;
    let mut worst_dual = 0.0f64;
    let mut parts = Vec::new();
    for (ex, h) in [(ExampleId::Ex51, 4), (ExampleId::Ex53, 4), (ExampleId::Ex55, 1), (ExampleId::Ex57, 2)] {
        let mut cfg = ExperimentConfig::new(ex);
        cfg.p = 2.0;
        cfg.hs = vec![h];
        cfg.resolution = 32;
        if ex == ExampleId::Ex55 {
            cfg.channels = Some(vec![(0.125, 0.125)]);
        }
        let (mut members, limit) = family_meshes(&cfg)?;
        let f = Integrand::power(2.0)?;
        let fs = f.conjugate()?;
        let mut local = 0.0f64;
        for (which, mesh) in [("member", members.remove(0)), ("limit", limit)] {
            let g = cfg.boundary.field(&mesh)?;
            let (u, grad, _) = solve_primal(&mesh, &f, &g, None, 2000)?;
            let og = mesh.gradient(&oracle_primal(&mesh, &g))?;
            let ep = relative_l2(&mesh, &grad, &og, &g)?;
            let partition = connected_components(mesh.cracks(), mesh.boundary(), mesh.domain());
            let (v, _): (DualField, _) = solve_dual(&mesh, &fs, &g, &partition, None)?;
            let ed = relative_l2(&mesh, &v.gradient(&mesh)?, &oracle_dual_gradient(&mesh, &g)?, &g)?;
            worst_primal = worst_primal.max(ep);
            worst_dual = worst_dual.max(ed);
            local = local.max(ep).max(ed);
            relation_entry(log, &format!("{} {which} p=2", ex.as_str()), &mesh, &f, &u)?;
        }
        parts.push(format!("{} {local:.0e}", ex.as_str()));
    }
    Ok(Outcome::new(
        worst_primal <= 1e-8 && worst_dual <= 1e-8,
        format!(
            "primal rel grad err {worst_primal:.1e}, dual {worst_dual:.1e} (<=1e-8); {}",
            parts.join(", ")
        ),
    ))
}

fn duality_certificate(log: &mut RelationLog) -> cracklab::Result<Outcome> {
    let t = Instant::now();
    let mut cfg = ExperimentConfig::new(ExampleId::Ex51);
    cfg.hs = vec![4];
    let (mut members, _) = family_meshes(&cfg)?;
    let mesh = members.remove(0);
    let f = Integrand::power(3.0)?;
    let fs = f.conjugate()?;
    let g = cfg.boundary.field(&mesh)?;
    let (u, _, report) = solve_primal(&mesh, &f, &g, None, 2000)?;
    let partition = connected_components(mesh.cracks(), mesh.boundary(), mesh.domain());
    let (v, _) = solve_dual(&mesh, &fs, &g, &partition, None)?;
    let gap = duality_gap(&mesh, &f, &fs, &u, &v, &g)?;
    let res = fenchel_residuals(&mesh, &f, &fs, &u, &v)?;
    let good = res.iter().filter(|r| **r <= 1e-3).count() as f64 / res.len() as f64;
    let secs = t.elapsed().as_secs_f64();
    relation_entry(log, "ex5_1 h=4 p=3", &mesh, &f, &u)?;
    let bound = 1e-4 * (1.0 + report.energy);
    Ok(Outcome::new(
        gap.abs() <= bound && good >= 0.99 && secs < 120.0,
        format!(
            "gap {gap:.1e} (<={bound:.1e}), cells with residual <=1e-3: {:.2}% (>=99%), {secs:.0}s (<120s)",
            100.0 * good
        ),
    ))
}

fn conjugate_relation(log: &RelationLog) -> Outcome {
    let mut worst = (String::new(), 0.0f64);
    let mut pass = true;
    for (label, d, r) in log {
        let bound = 10.0 * r;
        if *d > bound {
            pass = false;
        }
        let ratio = d / r.max(f64::MIN_POSITIVE);
        if ratio > worst.1 {
            worst = (label.clone(), ratio);
        }
    }
    Outcome::new(
        pass && !log.is_empty(),
        format!("{} runs, largest distance/residual {:.2} ({}), bound 10", log.len(), worst.1, worst.0),
    )
}

/// The limit crack separates the two Dirichlet arcs, so the limit gradient
/// is zero and the distance is `(p·E_h)^{1/p}`. The members connect the arcs
/// through one thin channel in series with the O(1) bulk. A channel of
/// width `w` and length `l` has conductance `C_h = w·l^{1-p}`, so
/// `E_h ∝ (C_h^{-1/(p-1)} + β)^{-(p-1)}` and `dist^{-p/(p-1)}` is affine
/// in `X = C_h^{-1/(p-1)}`. Checks the fit and
/// reports how far `h` would have to go for the 10% ratio.
fn series_explains(r: &ConvergenceReport, p: f64, conductance: impl Fn(usize) -> f64, h_of_x: impl Fn(f64) -> f64) -> (bool, String) {
    let decreasing = r.flag("grad_dist_decreasing") == Some(true);
    let e = p / (p - 1.0);
    let xs: Vec<f64> = (0..r.rows.len()).map(|i| conductance(i).powf(-1.0 / (p - 1.0))).collect();
    let ys: Vec<f64> = r.rows.iter().map(|row| row.grad_dist.powf(-e)).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = sxy * sxy / (sxx * syy);
    let target = (0.1 * r.rows[0].grad_dist).powf(-e);
    let h_needed = h_of_x((target - (my - slope * mx)) / slope);
    let ok = decreasing && slope > 0.0 && r2 >= 0.98;
    (
        ok,
        format!(
            "distances decreasing: {decreasing}; channel-in-series fit of dist^(-p/(p-1)) \
             against C_h^(-1/(p-1)): slope {slope:.3}, R^2 {r2:.4} (>=0.98); the 10% ratio needs h ~ {h_needed:.0}"
        ),
    )
}

fn dists(r: &ConvergenceReport) -> String {
    r.rows.iter().map(|row| format!("{:.3e}", row.grad_dist)).collect::<Vec<_>>().join(" ")
}

fn stability() -> cracklab::Result<Outcome> {
    let t = Instant::now();
    let cfg = ExperimentConfig::new(ExampleId::Ex51);
    let r = run_stability_experiment(&cfg)?;
    let ratio = r.metric("grad_dist_ratio").unwrap_or(f64::NAN);
    let decreasing = r.flag("grad_dist_decreasing") == Some(true);
    let secs = t.elapsed().as_secs_f64();
    let pass = decreasing && ratio <= 0.1 && secs < 600.0;
    let mut out = Outcome::new(
        pass,
        format!("distances {} ratio {ratio:.3} (<=0.1), decreasing {decreasing}, {secs:.0}s (<600s)", dists(&r)),
    );
    if !pass {
        // Overlap of length 1 between slits 2/h apart.
        out.explained = Some(series_explains(&r, cfg.p, |i| 2.0 / cfg.hs[i] as f64, |x| 2.0 * x.powf(cfg.p - 1.0)));
    }
    Ok(out)
}

fn jump_limit() -> cracklab::Result<Outcome> {
    let t = Instant::now();
    let cfg = ExperimentConfig::new(ExampleId::Ex53);
    let r = run_jump_experiment(&cfg)?;
    let energy = r.metric("energy_rel_error_final").unwrap_or(f64::NAN);
    let relation = r.metric("jump_relation_residual").unwrap_or(f64::NAN);
    let mut c0 = ExperimentConfig::new(ExampleId::Ex53);
    c0.c = 0.0;
    c0.with_dual = false;
    let s = run_stability_experiment(&c0)?;
    let ratio = s.metric("grad_dist_ratio").unwrap_or(f64::NAN);
    let stable = s.flag("stable") == Some(true);
    let secs = t.elapsed().as_secs_f64();
    let jump_ok = energy <= 0.05 && relation <= 0.10;
    let mut out = Outcome::new(
        jump_ok && stable,
        format!(
            "energy rel err {energy:.4} (<=0.05), relation residual {relation:.4} (<=0.10); \
             c=0 distances {} ratio {ratio:.3}, stable verdict {stable}; {secs:.0}s",
            dists(&s)
        ),
    );
    if !out.pass && jump_ok {
        // Gap of width a_h between walls of length b_h. With a_h = b_h^p the
        // conductance a b^(1-p) is b_h = scale/h.
        out.explained = Some(series_explains(
            &s,
            c0.p,
            |i| {
                let (a, b) = c0.channel(i);
                a * b.powf(1.0 - c0.p)
            },
            |x| c0.channel_scale * x.powf(c0.p - 1.0),
        ));
    }
    Ok(out)
}

fn annulus() -> cracklab::Result<Outcome> {
    let t = Instant::now();
    let cfg = ExperimentConfig::new(ExampleId::Ex55);
    let r = run_annulus_experiment(&cfg)?;
    let cracked = r.metric("cracked_energy").unwrap_or(f64::NAN);
    let margin = r.metric("margin").unwrap_or(f64::NAN);
    let conclusive = r.flag("conclusive") == Some(true);
    Ok(Outcome::new(
        cracked <= 1e-6 && margin >= 0.10 && conclusive,
        format!(
            "cracked energy {cracked:.1e} (<=1e-6), margin {margin:.3} of c (>=0.10), conclusive {conclusive}, {:.0}s",
            t.elapsed().as_secs_f64()
        ),
    ))
}

fn junction() -> cracklab::Result<Outcome> {
    let t = Instant::now();
    let cfg = ExperimentConfig::new(ExampleId::Ex57);
    let r = run_junction_experiment(&cfg)?;
    let el = r.metric("euler_lagrange_max_relative").unwrap_or(f64::NAN);
    let mut sym = ExperimentConfig::new(ExampleId::Ex57);
    sym.boundary = balanced_junction_data();
    let s = run_junction_experiment(&sym)?;
    let spread = s.metric("a_spread_relative").unwrap_or(f64::NAN);
    let a: Vec<String> = ["a1", "a2", "a3"].iter().map(|k| format!("{:.4}", s.metric(k).unwrap_or(f64::NAN))).collect();
    Ok(Outcome::new(
        el <= 1e-3 && spread <= 0.02,
        format!(
            "EL residual {el:.1e} (<=1e-3, 20 fields), symmetric a = [{}] spread {spread:.1e} (<=0.02), {:.0}s",
            a.join(", "),
            t.elapsed().as_secs_f64()
        ),
    ))
}

fn capacity() -> cracklab::Result<Outcome> {
    let t = Instant::now();
    let unit = Container::Disk { center: [0.0, 0.0], radius: 1.0 };
    let disk = CapacitySet::Disk { center: [0.0, 0.0], radius: 0.25 };
    let exact = std::f64::consts::TAU / 4f64.ln();
    let est = capacity_table(&CapacityQuery::new(disk, unit, 2.0, 256), &[256])?[0].estimate;
    let rel = (est / exact - 1.0).abs();
    let point = CapacitySet::Points(vec![[0.0, 0.0]]);
    let resolutions = [32, 64, 128, 256];
    let r2 = capacity_table(&CapacityQuery::new(point.clone(), unit, 2.0, 32), &resolutions)?;
    let r3 = capacity_table(&CapacityQuery::new(point, unit, 3.0, 32), &resolutions)?;
    let change = last_relative_change(&r3).unwrap_or(f64::NAN);
    let fmt = |rows: &[cracklab::capacity::CapacityRow]| rows.iter().map(|r| format!("{:.3}", r.estimate)).collect::<Vec<_>>().join(" ");
    Ok(Outcome::new(
        rel <= 0.05 && strictly_decreasing(&r2) && change.abs() <= 0.10,
        format!(
            "disk {est:.4} vs {exact:.4} ({:.2}%, <=5%); point r=2 [{}] decreasing {}; point r=3 [{}] last change {:.1}% (<=10%); {:.0}s",
            100.0 * rel,
            fmt(&r2),
            strictly_decreasing(&r2),
            fmt(&r3),
            100.0 * change,
            t.elapsed().as_secs_f64()
        ),
    ))
}

/// Union of one to three axis-aligned segments with endpoints on the
/// lattice of spacing 1/8 in `[-1, 1]^2`, or the empty set.
fn random_set(rng: &mut ChaCha8Rng) -> CrackSet {
    if rng.random_bool(0.1) {
        return CrackSet::empty();
    }
    let n = rng.random_range(1..=3);
    let lines = (0..n)
        .map(|_| {
            let x = rng.random_range(-8i32..=8) as f64 / 8.0;
            let y = rng.random_range(-8i32..=8) as f64 / 8.0;
            let (lo, hi) = loop {
                let a = rng.random_range(-8i32..=8);
                let b = rng.random_range(-8i32..=8);
                if a != b {
                    break (a.min(b) as f64 / 8.0, a.max(b) as f64 / 8.0);
                }
            };
            if rng.random_bool(0.5) {
                vec![[lo, y], [hi, y]]
            } else {
                vec![[x, lo], [x, hi]]
            }
        })
        .collect();
    CrackSet::new(lines).expect("lattice segments are valid")
}

fn hausdorff_axioms() -> cracklab::Result<Outcome> {
    let domain = Domain::rectangle(Rect::centered(1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut symmetry, mut triangle, mut identity, mut empty) = (0, 0, 0, 0);
    let mut empties_seen = 0;
    for _ in 0..500 {
        let (a, b, c) = (random_set(&mut rng), random_set(&mut rng), random_set(&mut rng));
        let dab = hausdorff_distance(&a, &b, &domain)?;
        let dba = hausdorff_distance(&b, &a, &domain)?;
        let dbc = hausdorff_distance(&b, &c, &domain)?;
        let dac = hausdorff_distance(&a, &c, &domain)?;
        if dab != dba {
            symmetry += 1;
        }
        if dac > dab + dbc {
            triangle += 1;
        }
        if hausdorff_distance(&a, &a, &domain)? != 0.0 || dab < 0.0 {
            identity += 1;
        }
        if a.is_empty() || b.is_empty() {
            empties_seen += 1;
            let expected = if a.is_empty() && b.is_empty() { 0.0 } else { domain.diameter() };
            if dab != expected {
                empty += 1;
            }
        }
    }
    Ok(Outcome::new(
        symmetry + triangle + identity + empty == 0,
        format!(
            "500 triples: symmetry violations {symmetry}, triangle {triangle}, d(A,A)!=0 {identity}, \
             empty-set convention {empty} of {empties_seen}"
        ),
    ))
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().map_or(true, |o| o.contains(&n) || (n == 4 && o.iter().any(|k| *k <= 3)));
    let names = [
        "affine exactness",
        "p=2 linear oracle",
        "duality certificate",
        "conjugate relation",
        "stability sequence",
        "jump limit",
        "annulus non-stability",
        "junction limit",
        "capacity",
        "hausdorff axioms",
    ];
    let mut log = RelationLog::new();
    let mut unexpected = 0;
    for (i, name) in names.iter().enumerate() {
        let n = i + 1;
        if !wanted(n) {
            continue;
        }
        let result = match n {
            1 => affine_exactness(&mut log),
            2 => linear_oracle(&mut log),
            3 => duality_certificate(&mut log),
            4 => Ok(conjugate_relation(&log)),
            5 => stability(),
            6 => jump_limit(),
            7 => annulus(),
            8 => junction(),
            9 => capacity(),
            _ => hausdorff_axioms(),
        };
        match result {
            Ok(o) if o.pass => println!("criterion {n:>2} {name}: PASS  {}", o.detail),
            Ok(o) => {
                println!("criterion {n:>2} {name}: FAIL  {}", o.detail);
                let reason = KNOWN_RED.iter().find(|(k, _)| *k == n).map(|(_, r)| *r);
                match (reason, o.explained) {
                    (Some(reason), Some((true, check))) => {
                        println!("             known: {reason}");
                        println!("             explanation holds: {check}");
                    }
                    (_, Some((false, check))) => {
                        println!("             explanation does not hold: {check}");
                        unexpected += 1;
                    }
                    _ => unexpected += 1,
                }
            }
            Err(e) => {
                println!("criterion {n:>2} {name}: FAIL  error: {e}");
                unexpected += 1;
            }
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria failed without a recorded explanation");
        ExitCode::FAILURE
    }
}
