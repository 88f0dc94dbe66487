//! Capacity estimates: the least `∫_B |∇u|^r` over fields equal to one near
//! a set `E` and zero on the boundary of a container `B`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{BoundarySpec, CrackSet, Domain, Point, Rect};
use crate::integrand::Integrand;
use crate::mesh::{build_mesh, ScalarField};
use crate::primal::{self, Couplings, SolveOptions};

/// The set whose capacity is estimated.
#[derive(Debug, Clone, PartialEq)]
pub enum CapacitySet {
    Empty,
    Disk { center: Point, radius: f64 },
    Points(Vec<Point>),
    Segments(CrackSet),
}

impl CapacitySet {
    fn is_empty(&self) -> bool {
        match self {
            CapacitySet::Empty => true,
            CapacitySet::Points(p) => p.is_empty(),
            CapacitySet::Segments(k) => k.is_empty(),
            CapacitySet::Disk { .. } => false,
        }
    }

    /// Distance from `p` to the set.
    pub fn distance(&self, p: Point) -> f64 {
        match self {
            CapacitySet::Empty => f64::INFINITY,
            CapacitySet::Disk { center, radius } => ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).max(0.0),
            CapacitySet::Points(pts) => pts.iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).fold(f64::INFINITY, f64::min),
            CapacitySet::Segments(k) => k.segments().iter().map(|s| s.distance_to_point(p)).fold(f64::INFINITY, f64::min),
        }
    }

    /// Farthest points of the set, used for the containment check.
    fn extreme_points(&self) -> Vec<(Point, f64)> {
        match self {
            CapacitySet::Empty => Vec::new(),
            CapacitySet::Disk { center, radius } => vec![(*center, *radius)],
            CapacitySet::Points(pts) => pts.iter().map(|&p| (p, 0.0)).collect(),
            CapacitySet::Segments(k) => k.vertices().map(|p| (p, 0.0)).collect(),
        }
    }
}

/// The container on whose boundary the field vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Container {
    Disk { center: Point, radius: f64 },
    Rect(Rect),
}

impl Container {
    fn bounding(&self) -> Result<Rect> {
        match *self {
            Container::Disk { center, radius } => Rect::new(center[0] - radius, center[1] - radius, center[0] + radius, center[1] + radius),
            Container::Rect(r) => Ok(r),
        }
    }

    /// Signed distance to the boundary, positive inside.
    fn depth(&self, p: Point) -> f64 {
        match *self {
            Container::Disk { center, radius } => radius - (p[0] - center[0]).hypot(p[1] - center[1]),
            Container::Rect(r) => (p[0] - r.x0).min(r.x1 - p[0]).min(p[1] - r.y0).min(r.y1 - p[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityQuery {
    pub set: CapacitySet,
    pub container: Container,
    /// Exponent of the energy.
    pub r: f64,
    /// Clamping radius around the set; defaults to 1.5 cells.
    pub delta: Option<f64>,
    /// Cells per unit length.
    pub resolution: usize,
    pub tol: Option<f64>,
}

impl CapacityQuery {
    pub fn new(set: CapacitySet, container: Container, r: f64, resolution: usize) -> Self {
        Self {
            set,
            container,
            r,
            delta: None,
            resolution,
            tol: None,
        }
    }

    pub fn cell(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(1.5 * self.cell())
    }

    fn validate(&self) -> Result<()> {
        if !(self.r > 1.0 && self.r.is_finite()) {
            return Err(Error::InvalidExponent(self.r));
        }
        if self.resolution == 0 {
            return Err(Error::Config("resolution must be positive".into()));
        }
        if !(self.delta() >= self.cell()) {
            return Err(Error::Config(format!(
                "clamping radius {} is smaller than one cell {}",
                self.delta(),
                self.cell()
            )));
        }
        for (p, reach) in self.set.extreme_points() {
            if self.container.depth(p) <= reach + self.delta() {
                return Err(Error::Config(format!("the set reaches the container boundary near ({}, {})", p[0], p[1])));
            }
        }
        Ok(())
    }
}

/// `r` times the least discrete `r`-energy with `u = 1` on degrees of
/// freedom within the clamping radius of the set and `u = 0` outside the
/// container.
pub fn estimate_capacity(q: &CapacityQuery) -> Result<f64> {
    q.validate()?;
    if q.set.is_empty() {
        return Ok(0.0);
    }
    let domain = Domain::rectangle(q.container.bounding()?);
    let boundary = BoundarySpec::everywhere(&domain);
    let mesh = build_mesh(&domain, &CrackSet::empty(), &boundary, q.resolution)?;
    let delta = q.delta();
    let mut couplings = Couplings::default();
    for (d, dof) in mesh.dofs().iter().enumerate() {
        if q.container.depth(dof.pos) <= 0.0 {
            couplings.fixed.push((d, 0.0));
        } else if q.set.distance(dof.pos) <= delta {
            couplings.fixed.push((d, 1.0));
        }
    }
    let f = Integrand::power(q.r)?;
    let g = ScalarField::zeros(mesh.dof_count());
    let pm = primal::primal_model(&mesh, &f, &g, &couplings)?;
    let opts = SolveOptions {
        tol: q.tol,
        ..SolveOptions::default()
    };
    let (_, report) = primal::solve_model(&mesh, &f, &pm, &opts)?;
    Ok(q.r * report.energy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityRow {
    pub resolution: usize,
    pub delta: f64,
    pub estimate: f64,
}

/// Estimates over a list of resolutions, with the clamping radius at its
/// default of 1.5 cells unless the query fixes it.
pub fn capacity_table(q: &CapacityQuery, resolutions: &[usize]) -> Result<Vec<CapacityRow>> {
    resolutions
        .iter()
        .map(|&resolution| {
            let q = CapacityQuery { resolution, ..q.clone() };
            Ok(CapacityRow {
                resolution,
                delta: q.delta(),
                estimate: estimate_capacity(&q)?,
            })
        })
        .collect()
}

pub fn table_csv(rows: &[CapacityRow]) -> String {
    let mut out = String::from("resolution,delta,estimate\n");
    for r in rows {
        let _ = writeln!(out, "{},{:e},{:e}", r.resolution, r.delta, r.estimate);
    }
    out
}

/// Every estimate below the previous one.
pub fn strictly_decreasing(rows: &[CapacityRow]) -> bool {
    rows.windows(2).all(|w| w[1].estimate < w[0].estimate)
}

/// Relative change between the last two estimates.
pub fn last_relative_change(rows: &[CapacityRow]) -> Option<f64> {
    match rows {
        [.., a, b] => Some((b.estimate - a.estimate).abs() / a.estimate.abs()),
        _ => None,
    }
}
