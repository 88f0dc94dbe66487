//! The dual problem in terms of a scalar potential `v` whose rotated
//! gradient `R∇v = (−∂_y v, ∂_x v)` is the flux.
//!
//! `v` is piecewise linear and continuous at edge midpoints of the
//! uncracked triangulation (one unknown per edge). With this choice the
//! rotated gradients are exactly the piecewise constant fields that are
//! discretely divergence free against the cracked nodal space, so the
//! discrete primal and dual optima coincide.

use crate::error::{Error, Result};
use crate::geometry::{connected_components, ComponentPartition};
use crate::integrand::{ConjugateIntegrand, Integrand};
use crate::mesh::{GradientField, GridMesh, ScalarField};
use crate::primal::{SolveOptions, SolveReport};
use crate::solver::{self, Model, ModelCell, Slot};

/// Edge-midpoint potential constant on every component of `K ∪ ∂_N Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField {
    /// Value at the midpoint of every mesh edge.
    pub edge_values: Vec<f64>,
    pub component_values: Vec<f64>,
    /// Component carried by each edge, for crack and Neumann edges.
    pub edge_component: Vec<Option<usize>>,
}

impl DualField {
    /// `x,y,edge_id,component,value` at every edge midpoint; the component
    /// column is empty for edges off the cracks and Neumann arcs.
    pub fn edge_csv(&self, mesh: &GridMesh) -> Result<String> {
        check_len(mesh, &self.edge_values)?;
        let mut out = String::from("x,y,edge_id,component,value\n");
        for (e, (edge, v)) in mesh.edges().iter().zip(&self.edge_values).enumerate() {
            let m = edge.segment.midpoint();
            let c = self.edge_component[e].map(|c| c.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{:e}\n", m[0], m[1], e, c, v));
        }
        Ok(out)
    }

    /// `component_id,value`.
    pub fn component_csv(&self) -> String {
        let mut out = String::from("component_id,value\n");
        for (c, v) in self.component_values.iter().enumerate() {
            out.push_str(&format!("{c},{v:e}\n"));
        }
        out
    }

    /// `∇v` on every cell.
    pub fn gradient(&self, mesh: &GridMesh) -> Result<GradientField> {
        check_len(mesh, &self.edge_values)?;
        GradientField::from_cells(mesh, edge_gradients(mesh, &self.edge_values))
    }

    /// `R∇v` on every cell.
    pub fn rotated_gradient(&self, mesh: &GridMesh) -> Result<GradientField> {
        let g = self.gradient(mesh)?;
        GradientField::from_cells(mesh, g.values.iter().map(|v| rotate(*v)).collect())
    }

    /// Area-weighted mean.
    pub fn mean(&self, mesh: &GridMesh) -> f64 {
        let mut total = 0.0;
        let mut area = 0.0;
        for (c, e) in mesh.cells().iter().zip(mesh.cell_edges()) {
            total += c.area * e.iter().map(|&k| self.edge_values[k]).sum::<f64>() / 3.0;
            area += c.area;
        }
        total / area
    }

    fn shift_to_zero_mean(&mut self, mesh: &GridMesh) {
        let m = self.mean(mesh);
        self.edge_values.iter_mut().for_each(|v| *v -= m);
        self.component_values.iter_mut().for_each(|v| *v -= m);
    }
}

/// `R(y₁, y₂) = (−y₂, y₁)`.
pub fn rotate(y: [f64; 2]) -> [f64; 2] {
    [-y[1], y[0]]
}

/// Inverse quarter turn.
pub fn rotate_back(y: [f64; 2]) -> [f64; 2] {
    [y[1], -y[0]]
}

fn check_len(mesh: &GridMesh, values: &[f64]) -> Result<()> {
    if values.len() != mesh.edges().len() {
        return Err(Error::SizeMismatch {
            expected: mesh.edges().len(),
            got: values.len(),
        });
    }
    Ok(())
}

/// The edge opposite local vertex `k` carries the basis function
/// `1 − 2λ_k`.
fn edge_basis(basis: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    basis.map(|g| [-2.0 * g[0], -2.0 * g[1]])
}

fn edge_gradients(mesh: &GridMesh, values: &[f64]) -> Vec<[f64; 2]> {
    mesh.cells()
        .iter()
        .zip(mesh.cell_edges())
        .map(|(c, e)| {
            let b = edge_basis(&c.basis);
            let mut g = [0.0; 2];
            for k in 0..3 {
                g[0] += values[e[k]] * b[k][0];
                g[1] += values[e[k]] * b[k][1];
            }
            g
        })
        .collect()
}

/// Component of every crack or Neumann edge.
pub fn edge_components(mesh: &GridMesh, partition: &ComponentPartition) -> Result<Vec<Option<usize>>> {
    mesh.edges()
        .iter()
        .map(|e| {
            if e.on_crack || (e.on_boundary && e.dirichlet_arc.is_none()) {
                partition
                    .component_of(&e.segment)
                    .map(Some)
                    .ok_or_else(|| Error::InvalidGeometry(format!("edge {} belongs to no component", e.segment)))
            } else {
                Ok(None)
            }
        })
        .collect()
}

/// Dual objective `Σ area·(−f*(R∇v) + R∇v·∇g)`.
pub fn dual_value(mesh: &GridMesh, fstar: &ConjugateIntegrand, v: &DualField, g: &ScalarField) -> Result<f64> {
    check_admissible(mesh, v)?;
    let rv = v.rotated_gradient(mesh)?;
    let gg = mesh.gradient(g)?;
    Ok(mesh
        .cells()
        .iter()
        .enumerate()
        .map(|(t, c)| {
            let s = rv.values[t];
            let d = gg.values[t];
            c.area * (-fstar.eval(t, s) + s[0] * d[0] + s[1] * d[1])
        })
        .sum())
}

fn check_admissible(mesh: &GridMesh, v: &DualField) -> Result<()> {
    check_len(mesh, &v.edge_values)?;
    if v.edge_component.len() != v.edge_values.len() {
        return Err(Error::InvalidDualField("edge component table has the wrong length".into()));
    }
    for (e, (val, comp)) in v.edge_values.iter().zip(&v.edge_component).enumerate() {
        if let Some(k) = comp {
            match v.component_values.get(*k) {
                Some(c) if c == val => {}
                Some(c) => {
                    return Err(Error::InvalidDualField(format!(
                        "edge {} has value {val}, its component {k} has {c}",
                        mesh.edges()[e].segment
                    )))
                }
                None => return Err(Error::InvalidDualField(format!("unknown component {k}"))),
            }
        }
    }
    let scale = 1.0 + v.edge_values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mean = v.mean(mesh);
    if mean.abs() > 1e-9 * scale {
        return Err(Error::InvalidDualField(format!("mean {mean} is not zero")));
    }
    Ok(())
}

/// Maximizes the dual objective over potentials constant on every
/// component of `partition`.
pub fn solve_dual(
    mesh: &GridMesh,
    fstar: &ConjugateIntegrand,
    g: &ScalarField,
    partition: &ComponentPartition,
    tol: Option<f64>,
) -> Result<(DualField, SolveReport)> {
    solve_dual_with(
        mesh,
        fstar,
        g,
        partition,
        &SolveOptions {
            tol,
            ..SolveOptions::default()
        },
    )
}

pub fn solve_dual_with(
    mesh: &GridMesh,
    fstar: &ConjugateIntegrand,
    g: &ScalarField,
    partition: &ComponentPartition,
    opts: &SolveOptions,
) -> Result<(DualField, SolveReport)> {
    let edge_component = edge_components(mesh, partition)?;
    let gg = mesh.gradient(g)?;
    let n_comp = partition.len();

    // One unknown per component and per remaining edge. The first unknown
    // is pinned, the constant being fixed afterwards by the mean.
    let mut unknown_of_comp = vec![usize::MAX; n_comp];
    let mut coords: Vec<[f64; 2]> = Vec::new();
    let unknown_of_edge: Vec<usize> = edge_component
        .iter()
        .zip(mesh.edges())
        .map(|(comp, e)| {
            let pos = e.segment.midpoint();
            let mut fresh = || {
                coords.push(pos);
                coords.len() - 1
            };
            match comp {
                Some(k) => {
                    if unknown_of_comp[*k] == usize::MAX {
                        unknown_of_comp[*k] = fresh();
                    }
                    unknown_of_comp[*k]
                }
                None => fresh(),
            }
        })
        .collect();
    let slots = unknown_of_edge
        .iter()
        .map(|&k| if k == 0 { Slot::Fixed(0.0) } else { Slot::Free(k - 1) })
        .collect();
    let free_coords = coords[1..].to_vec();

    let density = fstar.as_power_density(0.0);
    let cells = mesh
        .cells()
        .iter()
        .zip(mesh.cell_edges())
        .enumerate()
        .map(|(t, (c, e))| ModelCell {
            area: c.area,
            weight: density.weight(t),
            dofs: *e,
            basis: edge_basis(&c.basis),
        })
        .collect();
    let load = gg.values.iter().map(|d| [d[1], -d[0]]).collect();
    let model = Model {
        p: fstar.q(),
        slots,
        n_free: free_coords.len(),
        free_coords,
        cells,
        cell_load: Some(load),
        dof_load: Vec::new(),
        penalties: Vec::new(),
    };
    let (tol, schedule) = opts.resolve(fstar.q(), 0.0);
    let out = solver::minimize(&model, vec![0.0; model.n_free], &schedule, tol, opts.max_iter)?;

    let mut component_values = vec![0.0; n_comp];
    for (e, comp) in edge_component.iter().enumerate() {
        if let Some(k) = comp {
            component_values[*k] = out.z[e];
        }
    }
    let mut v = DualField {
        edge_values: out.z,
        component_values,
        edge_component,
    };
    v.shift_to_zero_mean(mesh);
    let value = dual_value(mesh, fstar, &v, g)?;
    Ok((
        v,
        SolveReport {
            energy: value,
            iterations: out.iterations,
            residual: out.residual,
            epsilon_trace: out.stages,
            decrements: out.decrements,
        },
    ))
}

/// How far the integrated flux is from being a rotated gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conservation {
    /// Largest mismatch found when a midpoint is reached along two paths.
    pub path_defect: f64,
    /// Sum over interior nodes of the absolute nodal flux residual; bounds
    /// every path mismatch.
    pub node_residual: f64,
    /// Largest spread of the integrated values over the edges of one
    /// component, before they are replaced by their average.
    pub component_spread: f64,
}

/// Potential of the flux of a primal solution, integrated along the
/// midpoint graph and averaged on every component of `K ∪ ∂_N Ω`.
pub fn conjugate_from_primal(mesh: &GridMesh, f: &Integrand, u: &ScalarField) -> Result<DualField> {
    let partition = connected_components(mesh.cracks(), mesh.boundary(), mesh.domain());
    conjugate_from_primal_in(mesh, f, u, &partition).map(|(v, _)| v)
}

/// As [`conjugate_from_primal`] with an explicit partition, for limit
/// problems whose potential may differ on pieces meeting at a point.
pub fn conjugate_from_primal_in(
    mesh: &GridMesh,
    f: &Integrand,
    u: &ScalarField,
    partition: &ComponentPartition,
) -> Result<(DualField, Conservation)> {
    if !mesh.domain().is_simply_connected() {
        return Err(Error::NotSimplyConnected);
    }
    let grads = mesh.gradient(u)?;
    let flux = grads
        .values
        .iter()
        .enumerate()
        .map(|(t, &xi)| match f.grad(t, xi) {
            Err(Error::Singular) => Ok([0.0, 0.0]),
            other => other,
        })
        .collect::<Result<Vec<_>>>()?;
    let node_residual = interior_node_residual(mesh, &flux);

    let edges = mesh.edges();
    let mid: Vec<[f64; 2]> = edges.iter().map(|e| e.segment.midpoint()).collect();
    let mut value = vec![f64::NAN; edges.len()];
    let mut seen = vec![false; edges.len()];
    let mut defect = 0.0f64;
    let mut scale = 0.0f64;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..edges.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        value[start] = 0.0;
        queue.push_back(start);
        while let Some(e) = queue.pop_front() {
            for &t in &edges[e].cells {
                let dv = rotate_back(flux[t]);
                for &e2 in &mesh.cell_edges()[t] {
                    if e2 == e {
                        continue;
                    }
                    let cand = value[e] + dv[0] * (mid[e2][0] - mid[e][0]) + dv[1] * (mid[e2][1] - mid[e][1]);
                    scale = scale.max(cand.abs());
                    if seen[e2] {
                        defect = defect.max((cand - value[e2]).abs());
                    } else {
                        seen[e2] = true;
                        value[e2] = cand;
                        queue.push_back(e2);
                    }
                }
            }
        }
    }
    let allowed = 10.0 * node_residual + 1e-11 * (1.0 + scale);
    if defect > allowed {
        return Err(Error::FluxNotConservative { found: defect, allowed });
    }

    let edge_component = edge_components(mesh, partition)?;
    let n = partition.len();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for (e, comp) in edge_component.iter().enumerate() {
        if let Some(k) = *comp {
            sum[k] += value[e];
            count[k] += 1;
            lo[k] = lo[k].min(value[e]);
            hi[k] = hi[k].max(value[e]);
        }
    }
    let component_values: Vec<f64> = (0..n).map(|k| if count[k] > 0 { sum[k] / count[k] as f64 } else { 0.0 }).collect();
    let component_spread = (0..n).filter(|&k| count[k] > 0).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    for (e, comp) in edge_component.iter().enumerate() {
        if let Some(k) = *comp {
            value[e] = component_values[k];
        }
    }
    let mut v = DualField {
        edge_values: value,
        component_values,
        edge_component,
    };
    v.shift_to_zero_mean(mesh);
    Ok((
        v,
        Conservation {
            path_defect: defect,
            node_residual,
            component_spread,
        },
    ))
}

/// `Σ |Σ_{dofs at node} Σ_T area·σ·∇λ|` over nodes off the boundary
/// carrying no Dirichlet degree of freedom.
fn interior_node_residual(mesh: &GridMesh, flux: &[[f64; 2]]) -> f64 {
    let r = crate::primal::nodal_residual(mesh, flux);
    let grid = mesh.grid();
    let mut node_sum = vec![0.0; grid.node_count()];
    let mut excluded = vec![false; grid.node_count()];
    for (d, dof) in mesh.dofs().iter().enumerate() {
        node_sum[dof.node] += r[d];
        if mesh.is_dirichlet(d) {
            excluded[dof.node] = true;
        }
    }
    for e in mesh.edges() {
        if e.on_boundary {
            excluded[e.nodes[0]] = true;
            excluded[e.nodes[1]] = true;
        }
    }
    node_sum
        .iter()
        .zip(&excluded)
        .filter(|(_, &x)| !x)
        .map(|(s, _)| s.abs())
        .sum()
}

/// `Σ area·(f(∇u) + f*(R∇v) − R∇v·∇u)`; zero exactly for an optimal pair.
pub fn duality_gap(mesh: &GridMesh, f: &Integrand, fstar: &ConjugateIntegrand, u: &ScalarField, v: &DualField, g: &ScalarField) -> Result<f64> {
    check_admissible(mesh, v)?;
    if g.len() != u.len() {
        return Err(Error::SizeMismatch { expected: u.len(), got: g.len() });
    }
    Ok(fenchel_residuals(mesh, f, fstar, u, v)?
        .iter()
        .zip(mesh.cells())
        .map(|(r, c)| c.area * r)
        .sum())
}

/// Per-cell `f(∇u) + f*(R∇v) − R∇v·∇u`, nonnegative by the Fenchel–Young
/// inequality.
pub fn fenchel_residuals(mesh: &GridMesh, f: &Integrand, fstar: &ConjugateIntegrand, u: &ScalarField, v: &DualField) -> Result<Vec<f64>> {
    let gu = mesh.gradient(u)?;
    let rv = v.rotated_gradient(mesh)?;
    Ok(gu
        .values
        .iter()
        .zip(&rv.values)
        .enumerate()
        .map(|(t, (a, s))| f.eval(t, *a) + fstar.eval(t, *s) - (s[0] * a[0] + s[1] * a[1]))
        .collect())
}

/// `(Σ area·|R∇v − σ(∇u)|^q)^{1/q}` with `σ` the flux of `f`.
pub fn conjugate_relation_distance(mesh: &GridMesh, f: &Integrand, u: &ScalarField, v: &DualField) -> Result<f64> {
    let gu = mesh.gradient(u)?;
    let flux = gu
        .values
        .iter()
        .enumerate()
        .map(|(t, &xi)| match f.grad(t, xi) {
            Err(Error::Singular) => Ok([0.0, 0.0]),
            other => other,
        })
        .collect::<Result<Vec<_>>>()?;
    let q = f.p() / (f.p() - 1.0);
    mesh.lp_distance(&v.rotated_gradient(mesh)?, &GradientField::from_cells(mesh, flux)?, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundarySpec, CrackSet, Domain, Rect, Segment};
    use crate::mesh::build_mesh;
    use crate::primal::solve_primal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn affine_setup(r: usize) -> (GridMesh, ComponentPartition) {
        let d = Domain::rectangle(Rect::new(0.0, 0.0, 1.0, 1.0).unwrap());
        let b = BoundarySpec::new(
            vec![
                Segment::new([0.0, 0.0], [0.0, 1.0]).unwrap(),
                Segment::new([1.0, 0.0], [1.0, 1.0]).unwrap(),
            ],
            &d,
        )
        .unwrap();
        let k = CrackSet::empty();
        let part = connected_components(&k, &b, &d);
        (build_mesh(&d, &k, &b, r).unwrap(), part)
    }

    #[test]
    fn affine_dual_is_linear_in_y() {
        let (mesh, part) = affine_setup(8);
        let g = mesh.interpolate(|p| p[0]);
        let f = Integrand::power(3.0).unwrap();
        let fs = f.conjugate().unwrap();
        let (v, rep) = solve_dual(&mesh, &fs, &g, &part, None).unwrap();
        assert!((rep.energy - 1.0 / 3.0).abs() < 1e-9, "{}", rep.energy);
        for (e, val) in mesh.edges().iter().zip(&v.edge_values) {
            assert!((val - (0.5 - e.segment.midpoint()[1])).abs() < 1e-6);
        }
        let bottom = part.component_at([0.5, 0.0]).unwrap();
        let top = part.component_at([0.5, 1.0]).unwrap();
        assert!((v.component_values[top] + 0.5).abs() < 1e-6);
        assert!((v.component_values[bottom] - 0.5).abs() < 1e-6);

        let exact = DualField {
            edge_values: mesh.edges().iter().map(|e| 0.5 - e.segment.midpoint()[1]).collect(),
            component_values: {
                let mut c = vec![0.0; 2];
                c[top] = -0.5;
                c[bottom] = 0.5;
                c
            },
            edge_component: v.edge_component.clone(),
        };
        assert!((dual_value(&mesh, &fs, &exact, &g).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let (u, _, _) = solve_primal(&mesh, &f, &g, None, 100).unwrap();
        assert!(duality_gap(&mesh, &f, &fs, &u, &exact, &g).unwrap().abs() < 1e-10);
        let c = conjugate_from_primal(&mesh, &f, &u).unwrap();
        for (a, b) in c.edge_values.iter().zip(&exact.edge_values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_potential_has_zero_value_and_positive_gap() {
        let (mesh, part) = affine_setup(4);
        let g = mesh.interpolate(|p| p[0]);
        let f = Integrand::power(2.0).unwrap();
        let fs = f.conjugate().unwrap();
        let zero = DualField {
            edge_values: vec![0.0; mesh.edges().len()],
            component_values: vec![0.0; part.len()],
            edge_component: edge_components(&mesh, &part).unwrap(),
        };
        assert_eq!(dual_value(&mesh, &fs, &zero, &g).unwrap(), 0.0);
        let (u, _, _) = solve_primal(&mesh, &f, &g, None, 10).unwrap();
        assert!((duality_gap(&mesh, &f, &fs, &u, &zero, &g).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn violations_are_rejected() {
        let (mesh, part) = affine_setup(4);
        let g = mesh.interpolate(|p| p[0]);
        let fs = Integrand::power(2.0).unwrap().conjugate().unwrap();
        let ec = edge_components(&mesh, &part).unwrap();
        let mut v = DualField {
            edge_values: vec![0.0; mesh.edges().len()],
            component_values: vec![0.0; part.len()],
            edge_component: ec.clone(),
        };
        let e = ec.iter().position(|c| c.is_some()).unwrap();
        v.edge_values[e] = 1e-3;
        assert!(matches!(dual_value(&mesh, &fs, &v, &g), Err(Error::InvalidDualField(_))));
        let shifted = DualField {
            edge_values: vec![1.0; mesh.edges().len()],
            component_values: vec![1.0; part.len()],
            edge_component: ec,
        };
        assert!(matches!(dual_value(&mesh, &fs, &shifted, &g), Err(Error::InvalidDualField(_))));
    }

    #[test]
    fn rotated_gradient_is_weakly_divergence_free() {
        let d = crate::geometry::example_domain(crate::geometry::ExampleId::Ex53);
        let b = crate::geometry::example_boundary(crate::geometry::ExampleId::Ex53);
        let k = crate::geometry::crack_family(
            crate::geometry::ExampleId::Ex53,
            4,
            &crate::geometry::FamilyParams {
                a: Some(0.25),
                b: Some(0.25),
                ..Default::default()
            },
        )
        .unwrap();
        let mesh = build_mesh(&d, &k, &b, 8).unwrap();
        let part = connected_components(&k, &b, &d);
        let g = mesh.interpolate(|p| p[1]);
        let fs = Integrand::power(3.0).unwrap().conjugate().unwrap();
        let (v, _) = solve_dual(&mesh, &fs, &g, &part, None).unwrap();
        let rv = v.rotated_gradient(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let phi: Vec<f64> = (0..mesh.dof_count())
                .map(|i| if mesh.is_dirichlet(i) { 0.0 } else { rng.random_range(-1.0..1.0) })
                .collect();
            let gp = mesh.gradient(&ScalarField::new(phi)).unwrap();
            let pairing: f64 = mesh
                .cells()
                .iter()
                .enumerate()
                .map(|(t, c)| c.area * (rv.values[t][0] * gp.values[t][0] + rv.values[t][1] * gp.values[t][1]))
                .sum();
            assert!(pairing.abs() < 1e-8, "{pairing}");
        }
    }

    #[test]
    fn holes_refuse_integration() {
        let id = crate::geometry::ExampleId::Ex55;
        let d = crate::geometry::example_domain(id);
        let b = crate::geometry::example_boundary(id);
        let k = crate::geometry::limit_crack(id);
        let mesh = build_mesh(&d, &k, &b, 8).unwrap();
        let u = ScalarField::zeros(mesh.dof_count());
        let f = Integrand::power(2.0).unwrap();
        assert!(matches!(conjugate_from_primal(&mesh, &f, &u), Err(Error::NotSimplyConnected)));
    }
}
