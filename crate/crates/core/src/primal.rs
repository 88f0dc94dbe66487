//! The cracked-domain minimization: minimize `Σ area·f(∇w)` over nodal
//! fields equal to the boundary data on the Dirichlet degrees of freedom.

use crate::error::{Error, Result};
use crate::geometry::UnionFind;
use crate::integrand::Integrand;
use crate::mesh::{GradientField, GridMesh, ScalarField};
use crate::solver::{self, Model, ModelCell, Penalty, Slot, Stage};

/// `a + b·x + c·y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Affine {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        self.a + self.b * p[0] + self.c * p[1]
    }
}

/// Boundary data. Only values on Dirichlet degrees of freedom matter; the
/// field is extended by the affine function (global case) or by zero.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    Affine(Affine),
    /// One affine function per Dirichlet arc, in the order the arcs were
    /// given.
    PerArc(Vec<Affine>),
}

impl BoundaryData {
    pub fn field(&self, mesh: &GridMesh) -> Result<ScalarField> {
        match self {
            BoundaryData::Affine(f) => Ok(mesh.interpolate(|p| f.eval(p))),
            BoundaryData::PerArc(arcs) => {
                let expected = mesh.boundary().dirichlet_arcs().len();
                if arcs.len() != expected {
                    return Err(Error::SizeMismatch { expected, got: arcs.len() });
                }
                Ok(ScalarField::new(
                    mesh.dofs()
                        .iter()
                        .enumerate()
                        .map(|(d, dof)| mesh.dirichlet_arc(d).map_or(0.0, |a| arcs[a].eval(dof.pos)))
                        .collect(),
                ))
            }
        }
    }
}

/// Stopping and continuation controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Bound on the largest free component of the energy gradient; defaults
    /// to [`default_tol`].
    pub tol: Option<f64>,
    pub max_iter: usize,
    /// Regularization stages; defaults to [`solver::default_schedule`].
    pub epsilon_schedule: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: None,
            max_iter: 2000,
            epsilon_schedule: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol: Some(tol),
            ..Self::default()
        }
    }

    pub(crate) fn resolve(&self, p: f64, epsilon: f64) -> (f64, Vec<f64>) {
        let tol = self.tol.unwrap_or_else(|| default_tol(p));
        let schedule = self
            .epsilon_schedule
            .clone()
            .unwrap_or_else(|| solver::default_schedule(p, epsilon));
        (tol, schedule)
    }
}

pub fn default_tol(p: f64) -> f64 {
    if p == 2.0 {
        1e-8
    } else {
        1e-6
    }
}

/// Outcome of a minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Energy with the density as given (its own regularization).
    pub energy: f64,
    pub iterations: usize,
    /// Largest free gradient component at the last regularization stage.
    pub residual: f64,
    pub epsilon_trace: Vec<Stage>,
    /// Energy change of every accepted step (nonpositive).
    pub decrements: Vec<f64>,
}

/// `Σ area·f(∇w)`.
pub fn energy(mesh: &GridMesh, f: &Integrand, w: &ScalarField) -> Result<f64> {
    let grad = mesh.gradient(w)?;
    Ok(mesh
        .cells()
        .iter()
        .zip(&grad.values)
        .enumerate()
        .map(|(t, (c, g))| c.area * f.eval(t, *g))
        .sum())
}

/// Extra terms coupling degrees of freedom, used by the limit functionals.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Couplings {
    /// `c·|z_a − z_b|^p`.
    pub penalties: Vec<(usize, usize, f64)>,
    /// Degrees of freedom forced to share a value.
    pub merges: Vec<(usize, usize)>,
    /// Energy contains `−ℓ·z`.
    pub loads: Vec<(usize, f64)>,
    /// Extra clamped values; Dirichlet data wins where both apply.
    pub fixed: Vec<(usize, f64)>,
}

pub(crate) struct PrimalModel {
    pub model: Model,
    /// Degrees of freedom of each component without Dirichlet data.
    pub floating: Vec<Vec<usize>>,
}

pub(crate) fn primal_model(mesh: &GridMesh, f: &Integrand, g: &ScalarField, couplings: &Couplings) -> Result<PrimalModel> {
    let n = mesh.dof_count();
    if g.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: g.len() });
    }
    if mesh.dirichlet_dofs().is_empty() {
        return Err(Error::InvalidGeometry("no Dirichlet degree of freedom on this mesh".into()));
    }
    let mut merged = UnionFind::new(n);
    for &(a, b) in &couplings.merges {
        merged.union(a, b);
    }
    let mut connected = UnionFind::new(n);
    for c in mesh.cells() {
        connected.union(c.dofs[0], c.dofs[1]);
        connected.union(c.dofs[0], c.dofs[2]);
    }
    for &(a, b) in &couplings.merges {
        connected.union(a, b);
    }
    for &(a, b, _) in &couplings.penalties {
        connected.union(a, b);
    }

    let mut fixed_value = vec![None; n];
    for &d in mesh.dirichlet_dofs() {
        let r = merged.find(d);
        fixed_value[r].get_or_insert(g.values[d]);
    }
    for &(d, v) in &couplings.fixed {
        let r = merged.find(d);
        fixed_value[r].get_or_insert(v);
    }
    let mut anchored = vec![false; n];
    for &d in mesh.dirichlet_dofs().iter().chain(couplings.fixed.iter().map(|(d, _)| d)) {
        let r = connected.find(d);
        anchored[r] = true;
    }
    let mut floating_of_root: Vec<Option<usize>> = vec![None; n];
    let mut floating: Vec<Vec<usize>> = Vec::new();
    for d in 0..n {
        let r = connected.find(d);
        if anchored[r] {
            continue;
        }
        let id = *floating_of_root[r].get_or_insert_with(|| {
            floating.push(Vec::new());
            floating.len() - 1
        });
        if floating[id].is_empty() {
            // Pin one value per floating component.
            let m = merged.find(d);
            fixed_value[m].get_or_insert(0.0);
        }
        floating[id].push(d);
    }

    let mut clamp = vec![None; n];
    for &(d, v) in &couplings.fixed {
        clamp[d] = Some(v);
    }
    let mut slots = vec![Slot::Fixed(0.0); n];
    let mut free_of_root = vec![usize::MAX; n];
    let mut free_coords = Vec::new();
    for d in 0..n {
        let r = merged.find(d);
        slots[d] = match fixed_value[r] {
            Some(v) => Slot::Fixed(if mesh.is_dirichlet(d) { g.values[d] } else { clamp[d].unwrap_or(v) }),
            None => {
                if free_of_root[r] == usize::MAX {
                    free_of_root[r] = free_coords.len();
                    free_coords.push(mesh.dofs()[d].pos);
                }
                Slot::Free(free_of_root[r])
            }
        };
    }
    let cells = mesh
        .cells()
        .iter()
        .enumerate()
        .map(|(t, c)| ModelCell {
            area: c.area,
            weight: f.weight(t),
            dofs: c.dofs,
            basis: c.basis,
        })
        .collect();
    Ok(PrimalModel {
        model: Model {
            p: f.p(),
            slots,
            n_free: free_coords.len(),
            free_coords,
            cells,
            cell_load: None,
            dof_load: couplings.loads.clone(),
            penalties: couplings.penalties.iter().map(|&(a, b, c)| Penalty { a, b, c }).collect(),
        },
        floating,
    })
}

pub(crate) fn solve_model(mesh: &GridMesh, f: &Integrand, pm: &PrimalModel, opts: &SolveOptions) -> Result<(ScalarField, SolveReport)> {
    let (tol, schedule) = opts.resolve(f.p(), f.epsilon());
    let x0 = vec![0.0; pm.model.n_free];
    let out = solver::minimize(&pm.model, x0, &schedule, tol, opts.max_iter)?;
    let mut u = ScalarField::new(out.z);
    shift_floating(mesh, &pm.floating, &mut u);
    let energy = pm.model.energy(&u.values, f.epsilon());
    Ok((
        u,
        SolveReport {
            energy,
            iterations: out.iterations,
            residual: out.residual,
            epsilon_trace: out.stages,
            decrements: out.decrements,
        },
    ))
}

/// Moves each floating component to zero area-weighted mean.
fn shift_floating(mesh: &GridMesh, floating: &[Vec<usize>], u: &mut ScalarField) {
    if floating.is_empty() {
        return;
    }
    let mut comp = vec![usize::MAX; mesh.dof_count()];
    for (i, dofs) in floating.iter().enumerate() {
        for &d in dofs {
            comp[d] = i;
        }
    }
    let mut sum = vec![0.0; floating.len()];
    let mut area = vec![0.0; floating.len()];
    for c in mesh.cells() {
        let k = comp[c.dofs[0]];
        if k != usize::MAX {
            sum[k] += c.area * c.dofs.iter().map(|&d| u.values[d]).sum::<f64>() / 3.0;
            area[k] += c.area;
        }
    }
    for (d, &k) in comp.iter().enumerate() {
        if k != usize::MAX && area[k] > 0.0 {
            u.values[d] -= sum[k] / area[k];
        }
    }
}

/// Minimizes the energy with Dirichlet data `g`.
pub fn solve_primal(mesh: &GridMesh, f: &Integrand, g: &ScalarField, tol: Option<f64>, max_iter: usize) -> Result<(ScalarField, GradientField, SolveReport)> {
    solve_primal_with(
        mesh,
        f,
        g,
        &SolveOptions {
            tol,
            max_iter,
            epsilon_schedule: None,
        },
    )
}

pub fn solve_primal_with(mesh: &GridMesh, f: &Integrand, g: &ScalarField, opts: &SolveOptions) -> Result<(ScalarField, GradientField, SolveReport)> {
    let pm = primal_model(mesh, f, g, &Couplings::default())?;
    let (u, report) = solve_model(mesh, f, &pm, opts)?;
    let grad = mesh.gradient(&u)?;
    Ok((u, grad, report))
}

/// Nodal residual `Σ_T area·σ_T·∇λ_i` of a flux field, per degree of
/// freedom. Free degrees of freedom of an exact minimizer have zero
/// residual.
pub fn nodal_residual(mesh: &GridMesh, flux: &[[f64; 2]]) -> Vec<f64> {
    let mut r = vec![0.0; mesh.dof_count()];
    for (c, s) in mesh.cells().iter().zip(flux) {
        for k in 0..3 {
            r[c.dofs[k]] += c.area * (s[0] * c.basis[k][0] + s[1] * c.basis[k][1]);
        }
    }
    r
}

/// Result of comparing a sequence of solutions with a limit solution.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongConvergenceReport {
    pub distances: Vec<f64>,
    pub energy_gaps: Vec<f64>,
    /// Final energy gap below `energy_tol·(1 + |limit energy|)`.
    pub energies_converge: bool,
    /// Distances decrease, allowing at most one inversion.
    pub distances_decrease: bool,
    /// Final distance at most `distance_ratio` times the first one.
    pub distances_converge: bool,
    /// Energies converge but gradients do not: contradicts strong
    /// convergence.
    pub flagged: bool,
}

/// Witness that convergence of energies comes with strong convergence of
/// gradients on a shared grid.
pub fn strong_convergence_check(
    mesh: &GridMesh,
    f: &Integrand,
    fields: &[GradientField],
    limit: &GradientField,
    energies: &[f64],
    limit_energy: f64,
    energy_tol: f64,
    distance_ratio: f64,
) -> Result<StrongConvergenceReport> {
    if fields.len() != energies.len() {
        return Err(Error::SizeMismatch { expected: fields.len(), got: energies.len() });
    }
    let distances = fields
        .iter()
        .map(|g| mesh.lp_distance(g, limit, f.p()))
        .collect::<Result<Vec<_>>>()?;
    let energy_gaps: Vec<f64> = energies.iter().map(|e| (e - limit_energy).abs()).collect();
    let energies_converge = energy_gaps.last().is_some_and(|&g| g <= energy_tol * (1.0 + limit_energy.abs()));
    let inversions = distances.windows(2).filter(|w| w[1] > w[0]).count();
    let distances_decrease = inversions <= 1;
    let first = distances.first().copied().unwrap_or(0.0);
    let last = distances.last().copied().unwrap_or(0.0);
    let distances_converge = last <= distance_ratio * first || last == 0.0;
    Ok(StrongConvergenceReport {
        flagged: energies_converge && !(distances_decrease && distances_converge),
        distances,
        energy_gaps,
        energies_converge,
        distances_decrease,
        distances_converge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundarySpec, CrackSet, Domain, Rect, Segment};
    use crate::mesh::build_mesh;

    fn unit_square_lr() -> (Domain, BoundarySpec) {
        let d = Domain::rectangle(Rect::new(0.0, 0.0, 1.0, 1.0).unwrap());
        let b = BoundarySpec::new(
            vec![
                Segment::new([0.0, 0.0], [0.0, 1.0]).unwrap(),
                Segment::new([1.0, 0.0], [1.0, 1.0]).unwrap(),
            ],
            &d,
        )
        .unwrap();
        (d, b)
    }

    #[test]
    fn affine_solution_is_exact() {
        let (d, b) = unit_square_lr();
        let mesh = build_mesh(&d, &CrackSet::empty(), &b, 8).unwrap();
        let g = BoundaryData::Affine(Affine::new(0.0, 1.0, 0.0)).field(&mesh).unwrap();
        for p in [1.5, 2.0, 3.0, 4.0] {
            let f = Integrand::power(p).unwrap();
            let (_, grad, rep) = solve_primal(&mesh, &f, &g, None, 500).unwrap();
            assert!((rep.energy - 1.0 / p).abs() < 1e-8, "p={p}: {}", rep.energy);
            assert!(grad.values.iter().all(|v| (v[0] - 1.0).abs() < 1e-6 && v[1].abs() < 1e-6));
            assert!(rep.decrements.iter().all(|&d| d <= 0.0));
        }
    }

    #[test]
    fn separating_crack_gives_zero_energy() {
        let d = Domain::rectangle(Rect::centered(1.0));
        let b = crate::geometry::example_boundary(crate::geometry::ExampleId::Ex51);
        let k = CrackSet::new(vec![vec![[-1.0, 0.0], [1.0, 0.0]]]).unwrap();
        let mesh = build_mesh(&d, &k, &b, 4).unwrap();
        let g = mesh.interpolate(|p| p[1].signum());
        let (u, _, rep) = solve_primal(&mesh, &Integrand::power(3.0).unwrap(), &g, None, 500).unwrap();
        assert!(rep.energy.abs() < 1e-12);
        for (dof, v) in mesh.dofs().iter().zip(&u.values) {
            let above = dof.pos[1] > 0.0 || (dof.pos[1] == 0.0 && dof.side == crate::mesh::Side::Plus);
            assert!((v - if above { 1.0 } else { -1.0 }).abs() < 1e-9, "{dof:?} {v} {rep:?}");
        }
    }

    #[test]
    fn floating_component_has_zero_mean() {
        let d = Domain::rectangle(Rect::centered(1.0));
        let b = BoundarySpec::new(vec![Segment::new([-1.0, -1.0], [1.0, -1.0]).unwrap()], &d).unwrap();
        let k = CrackSet::new(vec![vec![[-1.0, 0.0], [1.0, 0.0]]]).unwrap();
        let mesh = build_mesh(&d, &k, &b, 4).unwrap();
        let g = mesh.interpolate(|p| p[0]);
        let (u, _, _) = solve_primal(&mesh, &Integrand::power(2.0).unwrap(), &g, None, 10).unwrap();
        let upper: Vec<f64> = mesh
            .dofs()
            .iter()
            .zip(&u.values)
            .filter(|(d, _)| d.pos[1] > 0.0 || d.side == crate::mesh::Side::Plus)
            .map(|(_, v)| *v)
            .collect();
        assert!(upper.iter().all(|v| v.abs() < 1e-12));
    }
}
