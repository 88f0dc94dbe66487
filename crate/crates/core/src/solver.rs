//! Minimizer shared by every convex problem in the crate.
//!
//! A problem is a sum over triangles of `area·w·φ_ε(|G|)` where `G` is the
//! gradient of the unknown field on the triangle and
//! `φ_ε(s) = ((s² + ε²)^{p/2} − ε^p)/p`, minus linear loads, plus optional
//! pairwise penalties `c·((d² + ε²)^{p/2} − ε^p)` on differences of two
//! unknowns. Degrees of freedom either carry a fixed value or point to an
//! unknown; several may share one unknown.
//!
//! Each step solves with the lagged-diffusivity matrix (the weighted
//! Laplacian with weights `w·(|G|² + ε²)^{(p−2)/2}`), scales the step with
//! the exact second derivative along the direction and backtracks until the
//! Armijo condition holds. Energy differences are evaluated cell by cell so
//! that the line search stays meaningful when they are far below the
//! rounding level of the total energy.

use crate::error::{Error, Result};
use crate::sparse::{CholeskyFactor, CholeskySymbolic, SparsePattern, SymmetricMatrix};

pub(crate) const FIXED: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Slot {
    Free(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ModelCell {
    pub area: f64,
    pub weight: f64,
    pub dofs: [usize; 3],
    pub basis: [[f64; 2]; 3],
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Penalty {
    pub a: usize,
    pub b: usize,
    pub c: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub p: f64,
    pub slots: Vec<Slot>,
    pub n_free: usize,
    /// Position of each unknown, used for the fill-reducing ordering.
    pub free_coords: Vec<[f64; 2]>,
    pub cells: Vec<ModelCell>,
    /// Per-cell load `b`: the energy contains `−area·b·G`.
    pub cell_load: Option<Vec<[f64; 2]>>,
    /// Per-dof load `ℓ`: the energy contains `−ℓ·z`.
    pub dof_load: Vec<(usize, f64)>,
    pub penalties: Vec<Penalty>,
}

/// One continuation stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage {
    pub epsilon: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct MinimizeOutcome {
    pub z: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub stages: Vec<Stage>,
    /// Energy changes of accepted steps; all nonpositive.
    pub decrements: Vec<f64>,
}

impl Model {
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| match *s {
                Slot::Free(k) => x[k],
                Slot::Fixed(v) => v,
            })
            .collect()
    }

    fn expand_direction(&self, d: &[f64]) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| match *s {
                Slot::Free(k) => d[k],
                Slot::Fixed(_) => 0.0,
            })
            .collect()
    }

    pub fn cell_gradients(&self, z: &[f64]) -> Vec<[f64; 2]> {
        self.cells
            .iter()
            .map(|c| {
                let mut g = [0.0; 2];
                for k in 0..3 {
                    let v = z[c.dofs[k]];
                    g[0] += v * c.basis[k][0];
                    g[1] += v * c.basis[k][1];
                }
                g
            })
            .collect()
    }

    /// Total energy at regularization `eps`.
    pub fn energy(&self, z: &[f64], eps: f64) -> f64 {
        let grads = self.cell_gradients(z);
        let mut e = 0.0;
        for (t, c) in self.cells.iter().enumerate() {
            let g = grads[t];
            e += c.area * c.weight * crate::integrand::power_density(self.p, eps, g[0] * g[0] + g[1] * g[1]);
            if let Some(b) = &self.cell_load {
                e -= c.area * (b[t][0] * g[0] + b[t][1] * g[1]);
            }
        }
        for &(d, l) in &self.dof_load {
            e -= l * z[d];
        }
        for pen in &self.penalties {
            let d = z[pen.a] - z[pen.b];
            e += pen.c * self.p * crate::integrand::power_density(self.p, eps, d * d);
        }
        e
    }

    /// Gradient with respect to the unknowns and, optionally, the
    /// lagged-diffusivity matrix.
    fn gradient(&self, z: &[f64], grads: &[[f64; 2]], eps: f64, cell_free: &[[usize; 3]], out: &mut [f64], mut matrix: Option<(&mut [f64], &Scatter)>) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if let Some((vals, _)) = matrix.as_mut() {
            vals.iter_mut().for_each(|v| *v = 0.0);
        }
        let e2 = eps * eps;
        let half = 0.5 * (self.p - 2.0);
        for (t, c) in self.cells.iter().enumerate() {
            let g = grads[t];
            let s = g[0] * g[0] + g[1] * g[1] + e2;
            let kappa = if self.p == 2.0 { 1.0 } else if s == 0.0 { 0.0 } else { s.powf(half) };
            let aw = c.area * c.weight;
            let mut flux = [aw * kappa * g[0], aw * kappa * g[1]];
            if let Some(b) = &self.cell_load {
                flux[0] -= c.area * b[t][0];
                flux[1] -= c.area * b[t][1];
            }
            let free = cell_free[t];
            for k in 0..3 {
                if free[k] != FIXED {
                    out[free[k]] += flux[0] * c.basis[k][0] + flux[1] * c.basis[k][1];
                }
            }
            if let Some((vals, scatter)) = matrix.as_mut() {
                let pos = &scatter.cell[t];
                for i in 0..3 {
                    for j in 0..3 {
                        let p = pos[3 * i + j];
                        if p != FIXED {
                            let bij = c.basis[i][0] * c.basis[j][0] + c.basis[i][1] * c.basis[j][1];
                            vals[p] += aw * kappa * bij;
                        }
                    }
                }
            }
        }
        for &(d, l) in &self.dof_load {
            if let Slot::Free(k) = self.slots[d] {
                out[k] -= l;
            }
        }
        for (n, pen) in self.penalties.iter().enumerate() {
            let d = z[pen.a] - z[pen.b];
            let s = d * d + e2;
            let kappa = if self.p == 2.0 { 1.0 } else if s == 0.0 { 0.0 } else { s.powf(half) };
            let k = pen.c * self.p * kappa;
            if let Slot::Free(i) = self.slots[pen.a] {
                out[i] += k * d;
            }
            if let Slot::Free(j) = self.slots[pen.b] {
                out[j] -= k * d;
            }
            if let Some((vals, scatter)) = matrix.as_mut() {
                let pos = &scatter.penalty[n];
                for (idx, sign) in [(0, 1.0), (1, -1.0), (2, -1.0), (3, 1.0)] {
                    if pos[idx] != FIXED {
                        vals[pos[idx]] += sign * k;
                    }
                }
            }
        }
    }

    /// Second derivative of the energy along `dz`.
    fn curvature(&self, z: &[f64], dz: &[f64], grads: &[[f64; 2]], dgrads: &[[f64; 2]], eps: f64) -> f64 {
        let e2 = eps * eps;
        let p = self.p;
        let mut h = 0.0;
        for (t, c) in self.cells.iter().enumerate() {
            let (g, dg) = (grads[t], dgrads[t]);
            let s = g[0] * g[0] + g[1] * g[1] + e2;
            let dd = dg[0] * dg[0] + dg[1] * dg[1];
            if p == 2.0 {
                h += c.area * c.weight * dd;
            } else if s > 0.0 {
                let gd = g[0] * dg[0] + g[1] * dg[1];
                h += c.area * c.weight * (s.powf(0.5 * (p - 2.0)) * dd + (p - 2.0) * s.powf(0.5 * (p - 4.0)) * gd * gd);
            }
        }
        for pen in &self.penalties {
            let d = z[pen.a] - z[pen.b];
            let dd = dz[pen.a] - dz[pen.b];
            let s = d * d + e2;
            if p == 2.0 {
                h += pen.c * p * dd * dd;
            } else if s > 0.0 {
                h += pen.c * p * (s.powf(0.5 * (p - 2.0)) + (p - 2.0) * s.powf(0.5 * (p - 4.0)) * d * d) * dd * dd;
            }
        }
        h
    }

    /// `E(z + t·dz) − E(z)`, summed from per-term differences.
    fn energy_delta(&self, z: &[f64], dz: &[f64], grads: &[[f64; 2]], dgrads: &[[f64; 2]], t: f64, eps: f64) -> f64 {
        let e2 = eps * eps;
        let mut delta = 0.0;
        for (k, c) in self.cells.iter().enumerate() {
            let (g, dg) = (grads[k], dgrads[k]);
            let s0 = g[0] * g[0] + g[1] * g[1] + e2;
            let ds = t * (2.0 * (g[0] * dg[0] + g[1] * dg[1]) + t * (dg[0] * dg[0] + dg[1] * dg[1]));
            delta += c.area * c.weight * power_difference(self.p, s0, ds);
            if let Some(b) = &self.cell_load {
                delta -= c.area * t * (b[k][0] * dg[0] + b[k][1] * dg[1]);
            }
        }
        for &(d, l) in &self.dof_load {
            delta -= l * t * dz[d];
        }
        for pen in &self.penalties {
            let d = z[pen.a] - z[pen.b];
            let dd = dz[pen.a] - dz[pen.b];
            let s0 = d * d + e2;
            let ds = t * (2.0 * d * dd + t * dd * dd);
            delta += pen.c * self.p * power_difference(self.p, s0, ds);
        }
        delta
    }
}

/// `((s0 + ds)^{p/2} − s0^{p/2})/p`, accurate when `ds` is tiny.
fn power_difference(p: f64, s0: f64, ds: f64) -> f64 {
    if p == 2.0 {
        return 0.5 * ds;
    }
    if s0 == 0.0 {
        return ds.max(0.0).powf(0.5 * p) / p;
    }
    let r = ds / s0;
    if r <= -1.0 {
        return -s0.powf(0.5 * p) / p;
    }
    s0.powf(0.5 * p) * (0.5 * p * r.ln_1p()).exp_m1() / p
}

/// Positions of local matrix entries in the global value array.
pub(crate) struct Scatter {
    cell: Vec<[usize; 9]>,
    penalty: Vec<[usize; 4]>,
}

pub(crate) struct Structure {
    pub pattern: SparsePattern,
    pub cell_free: Vec<[usize; 3]>,
    scatter: Scatter,
}

impl Structure {
    pub fn new(model: &Model) -> Self {
        let free_of = |d: usize| match model.slots[d] {
            Slot::Free(k) => k,
            Slot::Fixed(_) => FIXED,
        };
        let cell_free: Vec<[usize; 3]> = model.cells.iter().map(|c| c.dofs.map(free_of)).collect();
        let mut edges = Vec::new();
        for f in &cell_free {
            for i in 0..3 {
                for j in i + 1..3 {
                    if f[i] != FIXED && f[j] != FIXED {
                        edges.push((f[i], f[j]));
                    }
                }
            }
        }
        for pen in &model.penalties {
            let (a, b) = (free_of(pen.a), free_of(pen.b));
            if a != FIXED && b != FIXED {
                edges.push((a, b));
            }
        }
        let pattern = SparsePattern::from_edges(model.n_free, edges);
        let pos = |i: usize, j: usize| {
            if i == FIXED || j == FIXED {
                FIXED
            } else {
                pattern.position(i, j).unwrap()
            }
        };
        let cell = cell_free
            .iter()
            .map(|f| {
                let mut out = [FIXED; 9];
                for i in 0..3 {
                    for j in 0..3 {
                        out[3 * i + j] = pos(f[i], f[j]);
                    }
                }
                out
            })
            .collect();
        let penalty = model
            .penalties
            .iter()
            .map(|pen| {
                let (a, b) = (free_of(pen.a), free_of(pen.b));
                [pos(a, a), pos(a, b), pos(b, a), pos(b, b)]
            })
            .collect();
        Self {
            pattern,
            cell_free,
            scatter: Scatter { cell, penalty },
        }
    }
}

/// Largest accepted final correction to any unknown.
const STEP_TOL: f64 = 1e-9;

/// Default continuation: a decade schedule down to `1e-6` when the density
/// is far from quadratic, a single stage otherwise.
pub fn default_schedule(p: f64, final_epsilon: f64) -> Vec<f64> {
    let last = if final_epsilon > 0.0 { final_epsilon } else { 1e-6 };
    if p > 2.25 || p < 2.0 {
        let mut s: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6].into_iter().filter(|&e| e > last).collect();
        s.push(last);
        s
    } else {
        vec![last]
    }
}

/// Minimizes the model from the starting unknowns `x`.
pub(crate) fn minimize(model: &Model, mut x: Vec<f64>, schedule: &[f64], tol: f64, max_iter: usize) -> Result<MinimizeOutcome> {
    let n = model.n_free;
    let structure = Structure::new(model);
    let mut stages = Vec::new();
    let mut decrements = Vec::new();
    let mut iterations = 0;
    let mut residual = 0.0;
    let mut g = vec![0.0; n];

    if n == 0 {
        return Ok(MinimizeOutcome {
            z: model.expand(&x),
            iterations: 0,
            residual: 0.0,
            stages: schedule.iter().map(|&e| Stage { epsilon: e, iterations: 0, residual: 0.0 }).collect(),
            decrements,
        });
    }

    let symbolic = CholeskySymbolic::analyze(&structure.pattern, &model.free_coords);
    let mut matrix = SymmetricMatrix::zeros(&structure.pattern);
    let constant_matrix = model.p == 2.0;
    let mut cached: Option<CholeskyFactor<'_>> = None;

    for (si, &eps) in schedule.iter().enumerate() {
        let last = si + 1 == schedule.len();
        let stage_tol = if last { tol } else { tol.max(1e-3 * eps) };
        // A small gradient alone says little where the density is flat, so
        // the correction itself must be small as well.
        let step_tol = if last { STEP_TOL } else { STEP_TOL.max(1e-2 * eps) };
        let mut stage_iters = 0;
        loop {
            let z = model.expand(&x);
            let grads = model.cell_gradients(&z);
            let need_matrix = !(constant_matrix && cached.is_some());
            let scatter = &structure.scatter;
            model.gradient(
                &z,
                &grads,
                eps,
                &structure.cell_free,
                &mut g,
                need_matrix.then_some((matrix.values_mut(), scatter)),
            );
            residual = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !residual.is_finite() {
                return Err(Error::NonConvergence { iterations, residual });
            }
            let gradient_small = residual <= stage_tol;
            if gradient_small && !need_matrix {
                break;
            }
            if need_matrix {
                // Guard against a vanishing diagonal where the field is flat
                // and the density has no quadratic part.
                let diag_floor = 1e-300;
                for i in 0..n {
                    let p = structure.pattern.position(i, i).unwrap();
                    if matrix.values()[p] < diag_floor {
                        matrix.values_mut()[p] = diag_floor;
                    }
                }
                cached = Some(symbolic.factor(&matrix)?);
            }
            let factor = cached.as_ref().unwrap();
            let d: Vec<f64> = factor.solve(&g).into_iter().map(|v| -v).collect();
            if gradient_small && d.iter().all(|v| v.abs() <= step_tol) {
                break;
            }
            if iterations >= max_iter {
                return Err(Error::NonConvergence { iterations, residual });
            }
            let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                break;
            }
            let dz = model.expand_direction(&d);
            let dgrads = model.cell_gradients(&dz);
            let curv = model.curvature(&z, &dz, &grads, &dgrads, eps);
            let mut t = if curv > 0.0 && curv.is_finite() { -slope / curv } else { 1.0 };
            if !(t > 0.0 && t.is_finite()) {
                t = 1.0;
            }
            let mut accepted = None;
            for _ in 0..60 {
                let delta = model.energy_delta(&z, &dz, &grads, &dgrads, t, eps);
                if delta <= 1e-4 * t * slope {
                    accepted = Some(delta);
                    break;
                }
                t *= 0.5;
            }
            iterations += 1;
            stage_iters += 1;
            match accepted {
                Some(delta) => {
                    for (xi, di) in x.iter_mut().zip(&d) {
                        *xi += t * di;
                    }
                    decrements.push(delta);
                }
                // No representable decrease left along a descent direction.
                None => break,
            }
        }
        stages.push(Stage {
            epsilon: eps,
            iterations: stage_iters,
            residual,
        });
    }
    if residual > tol {
        return Err(Error::NonConvergence { iterations, residual });
    }
    Ok(MinimizeOutcome {
        z: model.expand(&x),
        iterations,
        residual,
        stages,
        decrements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_difference_matches_direct_evaluation() {
        for p in [1.5, 2.0, 3.0, 4.5] {
            for (s0, ds) in [(1.0, 0.5), (2.0, -1.5), (0.0, 3.0), (1e-3, 1e-9)] {
                let direct = ((s0 + ds) as f64).powf(p / 2.0) / p - (s0 as f64).powf(p / 2.0) / p;
                let got = power_difference(p, s0, ds);
                assert!((got - direct).abs() <= 1e-12 * (1.0 + direct.abs()), "{p} {s0} {ds}");
            }
        }
    }

    #[test]
    fn schedules() {
        assert_eq!(default_schedule(2.0, 0.0), vec![1e-6]);
        assert_eq!(default_schedule(3.0, 0.0).len(), 6);
        assert_eq!(default_schedule(1.5, 1e-3), vec![1e-1, 1e-2, 1e-3]);
    }
}
