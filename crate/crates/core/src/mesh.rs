//! Tensor grids and the crack-conforming split-square triangulation.
//!
//! Every grid square is cut into two triangles. Degrees of freedom live on
//! (node, side) pairs: around each node the four incident squares are
//! grouped by connectivity, two neighbouring squares being connected unless
//! the grid edge between them lies on the crack. One degree of freedom is
//! created per group, so nodes inside a crack are doubled, junction nodes get
//! one copy per adjacent region and crack tips stay single.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::geometry::{BoundarySpec, CrackSet, Domain, Point, Rect, Segment};

pub(crate) const NONE: usize = usize::MAX;

/// Rate at which graded grids coarsen away from a focus point.
pub const GRADING_RATE: f64 = 0.15;

/// Tensor-product grid on the outer rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

/// A point the grid must resolve with at most the given local spacing,
/// per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Focus {
    pub at: Point,
    pub spacing: [f64; 2],
}

impl Grid {
    /// Builds a grid from explicit, strictly increasing line coordinates.
    pub fn from_lines(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        for v in [&xs, &ys] {
            if v.len() < 2 || v.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidGeometry("grid lines must be strictly increasing".into()));
            }
        }
        Ok(Self { xs, ys })
    }

    /// Uniform grid with `resolution` cells per unit length. Coordinates in
    /// `snap_to` that fall on a grid line up to rounding are written into the
    /// grid exactly, so crack coordinates computed elsewhere match.
    pub fn uniform(outer: &Rect, resolution: usize, snap_to: &[Point]) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::Config("resolution must be positive".into()));
        }
        let h = 1.0 / resolution as f64;
        let axis = |lo: f64, hi: f64| -> Result<Vec<f64>> {
            let n = ((hi - lo) * resolution as f64).round();
            if ((hi - lo) - n * h).abs() > 1e-9 * h || n < 1.0 {
                return Err(Error::Resolution { coord: hi });
            }
            let n = n as usize;
            let mut v: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
            v[n] = hi;
            Ok(v)
        };
        let mut xs = axis(outer.x0, outer.x1)?;
        let mut ys = axis(outer.y0, outer.y1)?;
        for p in snap_to {
            snap_line(&mut xs, p[0], h)?;
            snap_line(&mut ys, p[1], h)?;
        }
        Ok(Self { xs, ys })
    }

    /// Grid whose lines include every breakpoint coordinate, refined by
    /// bisection until each interval is no longer than the local target
    /// spacing `min(base, min_i(s_i + rate·dist_i))`.
    pub fn graded(outer: &Rect, base: f64, breakpoints: &[Point], focus: &[Focus]) -> Result<Self> {
        if !(base > 0.0) || focus.iter().any(|f| !(f.spacing[0] > 0.0 && f.spacing[1] > 0.0)) {
            return Err(Error::Config("grid spacings must be positive".into()));
        }
        let axis = |lo: f64, hi: f64, d: usize| {
            let mut breaks: Vec<f64> = vec![lo, hi];
            breaks.extend(breakpoints.iter().map(|p| p[d]).filter(|&t| t > lo && t < hi));
            breaks.extend(focus.iter().map(|f| f.at[d]).filter(|&t| t > lo && t < hi));
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let target = |a: f64, b: f64| {
                focus.iter().fold(base, |s, f| {
                    let t = f.at[d];
                    let dist = (a - t).max(t - b).max(0.0);
                    s.min(f.spacing[d] + GRADING_RATE * dist)
                })
            };
            let mut out = vec![lo];
            for w in breaks.windows(2) {
                bisect(w[0], w[1], &target, &mut out);
            }
            out
        };
        let xs = axis(outer.x0, outer.x1, 0);
        let ys = axis(outer.y0, outer.y1, 1);
        Self::from_lines(xs, ys)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn nx(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn ny(&self) -> usize {
        self.ys.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.xs.len() + i
    }

    pub fn node_pos(&self, n: usize) -> Point {
        let w = self.xs.len();
        [self.xs[n % w], self.ys[n / w]]
    }

    /// Smallest line spacing in either direction.
    pub fn min_spacing(&self) -> f64 {
        self.xs
            .windows(2)
            .chain(self.ys.windows(2))
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    fn x_index(&self, x: f64) -> Option<usize> {
        self.xs.binary_search_by(|v| v.total_cmp(&x)).ok()
    }

    fn y_index(&self, y: f64) -> Option<usize> {
        self.ys.binary_search_by(|v| v.total_cmp(&y)).ok()
    }

    /// Line index of an exact coordinate, or a resolution error.
    pub fn line_index(&self, p: Point) -> Result<(usize, usize)> {
        match (self.x_index(p[0]), self.y_index(p[1])) {
            (Some(i), Some(j)) => Ok((i, j)),
            (None, _) => Err(Error::Resolution { coord: p[0] }),
            (_, None) => Err(Error::Resolution { coord: p[1] }),
        }
    }

    /// Cell `(i, j)` whose closure contains the point.
    pub fn locate(&self, p: Point) -> Option<(usize, usize)> {
        let find = |v: &[f64], t: f64| -> Option<usize> {
            if t < v[0] || t > v[v.len() - 1] {
                return None;
            }
            let k = v.partition_point(|&s| s <= t);
            Some(k.saturating_sub(1).min(v.len() - 2))
        };
        Some((find(&self.xs, p[0])?, find(&self.ys, p[1])?))
    }

    /// Stable fingerprint of the line coordinates.
    fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for v in self.xs.iter().chain([f64::NAN].iter()).chain(self.ys.iter()) {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

fn snap_line(lines: &mut [f64], t: f64, h: f64) -> Result<()> {
    let k = lines.partition_point(|&s| s < t);
    for c in [k.wrapping_sub(1), k] {
        if let Some(v) = lines.get_mut(c) {
            if (*v - t).abs() <= 1e-9 * h {
                *v = t;
                return Ok(());
            }
        }
    }
    Err(Error::Resolution { coord: t })
}

fn bisect(a: f64, b: f64, target: &dyn Fn(f64, f64) -> f64, out: &mut Vec<f64>) {
    if b - a > target(a, b) * (1.0 + 1e-12) {
        let m = 0.5 * (a + b);
        bisect(a, m, target, out);
        bisect(m, b, target, out);
    } else {
        out.push(b);
    }
}

/// Which side of a crack a degree of freedom sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    None,
    /// The group holding the first present square in the order NE, NW, SW,
    /// SE: above a horizontal crack, right of a vertical one.
    Plus,
    Minus,
    /// One of three or more groups at a junction, numbered in the same order.
    Junction(u8),
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::None => f.write_str("none"),
            Side::Plus => f.write_str("plus"),
            Side::Minus => f.write_str("minus"),
            Side::Junction(k) => write!(f, "junction_{k}"),
        }
    }
}

/// Squares around a node, counterclockwise from the north-east one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrant {
    NE = 0,
    NW = 1,
    SW = 2,
    SE = 3,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::NE, Quadrant::NW, Quadrant::SW, Quadrant::SE];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dof {
    pub pos: Point,
    pub node: usize,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub dofs: [usize; 3],
    pub nodes: [usize; 3],
    pub area: f64,
    /// Gradients of the three barycentric coordinates.
    pub basis: [[f64; 2]; 3],
    /// Index of the grid square the triangle belongs to.
    pub square: usize,
}

/// Pair of degrees of freedom on both sides of a crack node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacePair {
    pub plus: usize,
    pub minus: usize,
    pub contact: bool,
}

/// Edge of the uncracked triangulation, carrier of the edge-midpoint
/// unknowns of dual fields.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshEdge {
    pub nodes: [usize; 2],
    pub segment: Segment,
    /// Triangles sharing the edge (one on the boundary).
    pub cells: Vec<usize>,
    pub on_crack: bool,
    pub on_boundary: bool,
    /// Dirichlet arc containing the edge, when it is a boundary edge.
    pub dirichlet_arc: Option<usize>,
}

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// Crack-conforming triangulation with duplicated degrees of freedom.
#[derive(Debug, Clone)]
pub struct GridMesh {
    id: u64,
    layout: u64,
    grid: Grid,
    domain: Domain,
    cracks: CrackSet,
    boundary: BoundarySpec,
    active_square: Vec<bool>,
    dofs: Vec<Dof>,
    quad_dof: Vec<[usize; 4]>,
    cells: Vec<Triangle>,
    square_cells: Vec<[usize; 2]>,
    dirichlet: Vec<Option<usize>>,
    dirichlet_dofs: Vec<usize>,
    face_pairs: Vec<FacePair>,
    edges: Vec<MeshEdge>,
    cell_edges: Vec<[usize; 3]>,
    crack_h: Vec<bool>,
    crack_v: Vec<bool>,
}

/// Builds the mesh on a uniform grid with `resolution` cells per unit.
pub fn build_mesh(domain: &Domain, k: &CrackSet, boundary: &BoundarySpec, resolution: usize) -> Result<GridMesh> {
    let mut snap: Vec<Point> = k.vertices().collect();
    for h in domain.holes() {
        snap.push([h.x0, h.y0]);
        snap.push([h.x1, h.y1]);
    }
    for arc in boundary.dirichlet_arcs() {
        snap.push(arc.a);
        snap.push(arc.b);
    }
    let grid = Grid::uniform(domain.outer(), resolution, &snap)?;
    GridMesh::new(domain, k, boundary, grid, &[])
}

impl GridMesh {
    /// Builds the mesh on a given grid. `contacts` lists points whose crack
    /// face pairs are flagged as contact pairs.
    pub fn new(domain: &Domain, k: &CrackSet, boundary: &BoundarySpec, grid: Grid, contacts: &[Point]) -> Result<Self> {
        k.check_inside(domain)?;
        let outer = domain.outer();
        if grid.xs[0] != outer.x0 || *grid.xs.last().unwrap() != outer.x1 || grid.ys[0] != outer.y0 || *grid.ys.last().unwrap() != outer.y1 {
            return Err(Error::InvalidGeometry("grid does not span the outer rectangle".into()));
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        let wn = nx + 1;

        let mut active_square = vec![true; nx * ny];
        for h in domain.holes() {
            let (i0, j0) = grid.line_index([h.x0, h.y0])?;
            let (i1, j1) = grid.line_index([h.x1, h.y1])?;
            for j in j0..j1 {
                for i in i0..i1 {
                    active_square[j * nx + i] = false;
                }
            }
        }
        for arc in boundary.dirichlet_arcs() {
            grid.line_index(arc.a)?;
            grid.line_index(arc.b)?;
        }

        // Crack edges: horizontal edge (i, j)-(i+1, j) and vertical edge
        // (i, j)-(i, j+1).
        let mut crack_h = vec![false; nx * (ny + 1)];
        let mut crack_v = vec![false; (nx + 1) * ny];
        for s in k.segments() {
            let (i0, j0) = grid.line_index(s.a)?;
            let (i1, j1) = grid.line_index(s.b)?;
            if s.is_vertical() {
                for j in j0..j1 {
                    crack_v[j * wn + i0] = true;
                }
            } else {
                for i in i0..i1 {
                    crack_h[j0 * nx + i] = true;
                }
            }
        }

        let square = |i: isize, j: isize| -> Option<usize> {
            if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                return None;
            }
            let c = j as usize * nx + i as usize;
            active_square[c].then_some(c)
        };

        let mut dofs = Vec::new();
        let mut quad_dof = vec![[NONE; 4]; grid.node_count()];
        let mut face_pairs = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                let (ii, jj) = (i as isize, j as isize);
                let quads = [
                    square(ii, jj),
                    square(ii - 1, jj),
                    square(ii - 1, jj - 1),
                    square(ii, jj - 1),
                ];
                // Edges separating quadrant q from q+1: north, west, south, east.
                let sep = [
                    j < ny && crack_v[j * wn + i],
                    i > 0 && crack_h[j * nx + i - 1],
                    j > 0 && crack_v[(j - 1) * wn + i],
                    i < nx && crack_h[j * nx + i],
                ];
                let mut group = [NONE; 4];
                let mut groups = 0usize;
                for q in 0..4 {
                    if quads[q].is_none() || group[q] != NONE {
                        continue;
                    }
                    group[q] = groups;
                    // Walk both ways around the node until blocked.
                    let mut cur = q;
                    loop {
                        let next = (cur + 1) % 4;
                        if sep[cur] || quads[next].is_none() || group[next] != NONE {
                            break;
                        }
                        group[next] = groups;
                        cur = next;
                    }
                    let mut cur = q;
                    loop {
                        let prev = (cur + 3) % 4;
                        if sep[prev] || quads[prev].is_none() || group[prev] != NONE {
                            break;
                        }
                        group[prev] = groups;
                        cur = prev;
                    }
                    groups += 1;
                }
                let node = grid.node(i, j);
                let pos = grid.node_pos(node);
                let base = dofs.len();
                for g in 0..groups {
                    let side = match groups {
                        1 => Side::None,
                        2 if g == 0 => Side::Plus,
                        2 => Side::Minus,
                        _ => Side::Junction(g as u8),
                    };
                    dofs.push(Dof { pos, node, side });
                }
                for q in 0..4 {
                    if group[q] != NONE {
                        quad_dof[node][q] = base + group[q];
                    }
                }
                let contact = contacts.contains(&pos);
                for a in 0..groups {
                    for b in a + 1..groups {
                        face_pairs.push(FacePair {
                            plus: base + a,
                            minus: base + b,
                            contact,
                        });
                    }
                }
            }
        }

        // Triangles, with the diagonal mirrored across the domain centre so
        // symmetric problems stay symmetric.
        let center = outer.center();
        let mut cells = Vec::with_capacity(2 * nx * ny);
        let mut square_cells = vec![[NONE; 2]; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let c = j * nx + i;
                if !active_square[c] {
                    continue;
                }
                let sw = (grid.node(i, j), Quadrant::NE);
                let se = (grid.node(i + 1, j), Quadrant::NW);
                let ne = (grid.node(i + 1, j + 1), Quadrant::SW);
                let nw = (grid.node(i, j + 1), Quadrant::SE);
                let xc = 0.5 * (grid.xs[i] + grid.xs[i + 1]) - center[0];
                let yc = 0.5 * (grid.ys[j] + grid.ys[j + 1]) - center[1];
                let tris = if xc * yc >= 0.0 { [[sw, se, ne], [sw, ne, nw]] } else { [[sw, se, nw], [se, ne, nw]] };
                for (t, tri) in tris.iter().enumerate() {
                    let nodes = tri.map(|(n, _)| n);
                    let dofs_t = tri.map(|(n, q)| quad_dof[n][q as usize]);
                    let p = nodes.map(|n| grid.node_pos(n));
                    let (area, basis) = p1_basis(p);
                    square_cells[c][t] = cells.len();
                    cells.push(Triangle {
                        dofs: dofs_t,
                        nodes,
                        area,
                        basis,
                        square: c,
                    });
                }
            }
        }

        // Edges of the uncracked triangulation.
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<MeshEdge> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (t, cell) in cells.iter().enumerate() {
            let mut ce = [0; 3];
            for (k, slot) in ce.iter_mut().enumerate() {
                let (a, b) = (cell.nodes[(k + 1) % 3], cell.nodes[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let e = *edge_index.entry(key).or_insert_with(|| {
                    let segment = Segment::new(grid.node_pos(key.0), grid.node_pos(key.1))
                        .unwrap_or(Segment { a: grid.node_pos(key.0), b: grid.node_pos(key.1) });
                    edges.push(MeshEdge {
                        nodes: [key.0, key.1],
                        segment,
                        cells: Vec::new(),
                        on_crack: false,
                        on_boundary: false,
                        dirichlet_arc: None,
                    });
                    edges.len() - 1
                });
                edges[e].cells.push(t);
                *slot = e;
            }
            cell_edges.push(ce);
        }
        for e in edges.iter_mut() {
            let (a, b) = (e.nodes[0], e.nodes[1]);
            let (ia, ja) = (a % wn, a / wn);
            let (ib, jb) = (b % wn, b / wn);
            e.on_crack = if ja == jb && ib == ia + 1 {
                crack_h[ja * nx + ia]
            } else if ia == ib && jb == ja + 1 {
                crack_v[ja * wn + ia]
            } else {
                false
            };
            e.on_boundary = e.cells.len() == 1;
            if e.on_boundary {
                e.dirichlet_arc = boundary.arc_containing(&e.segment);
            }
        }

        // Dirichlet degrees of freedom: endpoints of Dirichlet boundary edges
        // off the crack, on the side of the adjacent triangle.
        let mut dirichlet = vec![None; dofs.len()];
        for e in &edges {
            if let (true, false, Some(arc)) = (e.on_boundary, e.on_crack, e.dirichlet_arc) {
                let cell = &cells[e.cells[0]];
                for n in e.nodes {
                    let k = cell.nodes.iter().position(|&m| m == n).unwrap();
                    let d = cell.dofs[k];
                    dirichlet[d].get_or_insert(arc);
                }
            }
        }
        let dirichlet_dofs = (0..dofs.len()).filter(|&d| dirichlet[d].is_some()).collect();

        let mut layout = grid.fingerprint();
        for (c, a) in active_square.iter().enumerate() {
            if !a {
                layout = (layout ^ c as u64).wrapping_mul(0x100000001b3);
            }
        }

        Ok(Self {
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            layout,
            grid,
            domain: domain.clone(),
            cracks: k.clone(),
            boundary: boundary.clone(),
            active_square,
            dofs,
            quad_dof,
            cells,
            square_cells,
            dirichlet,
            dirichlet_dofs,
            face_pairs,
            edges,
            cell_edges,
            crack_h,
            crack_v,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Fingerprint of the cell layout; gradient fields on meshes with equal
    /// layouts are comparable cell by cell.
    pub fn layout(&self) -> u64 {
        self.layout
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn cracks(&self) -> &CrackSet {
        &self.cracks
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.boundary
    }

    pub fn nx(&self) -> usize {
        self.grid.nx()
    }

    pub fn ny(&self) -> usize {
        self.grid.ny()
    }

    pub fn dof_count(&self) -> usize {
        self.dofs.len()
    }

    pub fn dofs(&self) -> &[Dof] {
        &self.dofs
    }

    pub fn cells(&self) -> &[Triangle] {
        &self.cells
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.dirichlet[dof].is_some()
    }

    /// Dirichlet arc index of a Dirichlet degree of freedom.
    pub fn dirichlet_arc(&self, dof: usize) -> Option<usize> {
        self.dirichlet[dof]
    }

    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet_dofs
    }

    pub fn crack_face_pairs(&self) -> &[FacePair] {
        &self.face_pairs
    }

    pub fn edges(&self) -> &[MeshEdge] {
        &self.edges
    }

    /// Edge opposite each local vertex of each triangle.
    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    pub fn is_square_active(&self, square: usize) -> bool {
        self.active_square[square]
    }

    /// Degree of freedom of `node` seen from the given square.
    pub fn dof_at(&self, node: usize, q: Quadrant) -> Option<usize> {
        let d = self.quad_dof[node][q as usize];
        (d != NONE).then_some(d)
    }

    /// All degrees of freedom at a grid node, in quadrant order.
    pub fn dofs_at_node(&self, node: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.quad_dof[node].iter().copied().filter(|&d| d != NONE).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Degrees of freedom at an exact grid point, ordered plus side first.
    pub fn dofs_at_point(&self, p: Point) -> Result<Vec<usize>> {
        let (i, j) = self.grid.line_index(p).map_err(|_| Error::MissingContact(p[0], p[1]))?;
        Ok(self.dofs_at_node(self.grid.node(i, j)))
    }

    /// Degrees of freedom at a contact point; there must be at least two.
    pub fn contact_dofs(&self, p: Point) -> Result<Vec<usize>> {
        let d = self.dofs_at_point(p)?;
        if d.len() < 2 {
            return Err(Error::MissingContact(p[0], p[1]));
        }
        Ok(d)
    }

    /// Whether the horizontal grid edge right of node `(i, j)` is a crack edge.
    pub fn is_crack_h(&self, i: usize, j: usize) -> bool {
        self.crack_h[j * self.nx() + i]
    }

    /// Whether the vertical grid edge above node `(i, j)` is a crack edge.
    pub fn is_crack_v(&self, i: usize, j: usize) -> bool {
        self.crack_v[j * (self.nx() + 1) + i]
    }

    /// Triangle containing `p` and its barycentric coordinates. Points on
    /// the boundary of several triangles resolve to one of them.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let (i, j) = self.grid.locate(p)?;
        let sq = j * self.nx() + i;
        for &t in &self.square_cells[sq] {
            if t == NONE {
                continue;
            }
            let lam = self.barycentric(t, p);
            if lam.iter().all(|&l| l >= -1e-12) {
                return Some((t, lam));
            }
        }
        None
    }

    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let c = &self.cells[t];
        let x0 = self.grid.node_pos(c.nodes[0]);
        let mut lam = [0.0; 3];
        for k in 0..3 {
            let g = c.basis[k];
            let base = if k == 0 { 1.0 } else { 0.0 };
            lam[k] = base + g[0] * (p[0] - x0[0]) + g[1] * (p[1] - x0[1]);
        }
        lam
    }

    /// Value of a P1 field at a point (see [`GridMesh::locate`] for ties).
    pub fn eval(&self, field: &ScalarField, p: Point) -> Option<f64> {
        let (t, lam) = self.locate(p)?;
        let c = &self.cells[t];
        Some((0..3).map(|k| lam[k] * field.values[c.dofs[k]]).sum())
    }

    /// Gradient of a nodal field on every triangle.
    pub fn gradient(&self, field: &ScalarField) -> Result<GradientField> {
        if field.values.len() != self.dofs.len() {
            return Err(Error::SizeMismatch {
                expected: self.dofs.len(),
                got: field.values.len(),
            });
        }
        let values = self
            .cells
            .iter()
            .map(|c| {
                let mut g = [0.0; 2];
                for k in 0..3 {
                    let v = field.values[c.dofs[k]];
                    g[0] += v * c.basis[k][0];
                    g[1] += v * c.basis[k][1];
                }
                g
            })
            .collect();
        Ok(GradientField {
            layout: self.layout,
            values,
        })
    }

    /// Interpolates a function of position at every degree of freedom.
    /// `x,y,dof_id,side,value`, one row per degree of freedom.
    pub fn field_csv(&self, field: &ScalarField) -> Result<String> {
        if field.len() != self.dof_count() {
            return Err(Error::SizeMismatch { expected: self.dof_count(), got: field.len() });
        }
        let mut out = String::from("x,y,dof_id,side,value\n");
        for (d, (dof, v)) in self.dofs.iter().zip(&field.values).enumerate() {
            out.push_str(&format!("{},{},{},{},{:e}\n", dof.pos[0], dof.pos[1], d, dof.side, v));
        }
        Ok(out)
    }

    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> ScalarField {
        ScalarField::new(self.dofs.iter().map(|d| f(d.pos)).collect())
    }

    /// Area-weighted mean of a P1 field.
    pub fn mean(&self, field: &ScalarField) -> f64 {
        let mut total = 0.0;
        let mut area = 0.0;
        for c in &self.cells {
            let m: f64 = c.dofs.iter().map(|&d| field.values[d]).sum::<f64>() / 3.0;
            total += c.area * m;
            area += c.area;
        }
        total / area
    }

    /// `(Σ area·|a − b|^p)^{1/p}`; fields must share the cell layout.
    pub fn lp_distance(&self, a: &GradientField, b: &GradientField, p: f64) -> Result<f64> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidExponent(p));
        }
        if a.layout != self.layout || b.layout != self.layout {
            return Err(Error::MeshMismatch);
        }
        let sum: f64 = self
            .cells
            .iter()
            .zip(a.values.iter().zip(&b.values))
            .map(|(c, (u, v))| c.area * (u[0] - v[0]).hypot(u[1] - v[1]).powf(p))
            .sum();
        Ok(sum.powf(1.0 / p))
    }

    /// `(Σ area·|a|^p)^{1/p}`.
    pub fn lp_norm(&self, a: &GradientField, p: f64) -> Result<f64> {
        let zero = GradientField {
            layout: self.layout,
            values: vec![[0.0; 2]; self.cells.len()],
        };
        self.lp_distance(a, &zero, p)
    }

    /// Connected components of the degree-of-freedom graph (degrees of
    /// freedom sharing a triangle are adjacent).
    pub fn dof_components(&self) -> (usize, Vec<usize>) {
        let mut uf = crate::geometry::UnionFind::new(self.dofs.len());
        for c in &self.cells {
            uf.union(c.dofs[0], c.dofs[1]);
            uf.union(c.dofs[0], c.dofs[2]);
        }
        let mut label = vec![NONE; self.dofs.len()];
        let mut ids = vec![0; self.dofs.len()];
        let mut count = 0;
        for d in 0..self.dofs.len() {
            let r = uf.find(d);
            if label[r] == NONE {
                label[r] = count;
                count += 1;
            }
            ids[d] = label[r];
        }
        (count, ids)
    }
}

/// Area and barycentric gradients of a counterclockwise triangle.
pub(crate) fn p1_basis(p: [Point; 3]) -> (f64, [[f64; 2]; 3]) {
    let [a, b, c] = p;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let inv = 1.0 / det;
    let basis = [
        [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv],
        [(c[1] - a[1]) * inv, (a[0] - c[0]) * inv],
        [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv],
    ];
    (0.5 * det, basis)
}

/// One value per degree of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One vector per triangle. Cracks have zero area, so the convention of
/// extending gradients by zero on the crack needs no storage.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    layout: u64,
    pub values: Vec<[f64; 2]>,
}

impl GradientField {
    /// Wraps per-cell vectors computed elsewhere for this mesh.
    pub fn from_cells(mesh: &GridMesh, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != mesh.cell_count() {
            return Err(Error::SizeMismatch {
                expected: mesh.cell_count(),
                got: values.len(),
            });
        }
        Ok(Self {
            layout: mesh.layout,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
