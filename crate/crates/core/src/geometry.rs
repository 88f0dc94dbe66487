//! Domains, crack sets, boundary decompositions and the crack families of
//! the experiment catalog.
//!
//! Everything here is axis-aligned. Touching is decided by exact coordinate
//! equality, so callers are expected to build coordinates from the same
//! arithmetic (the family constructors snap to a pitch when asked).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "rectangle [{x0}, {x1}] x [{y0}, {y1}] is empty"
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// The square `[-r, r]²`.
    pub fn centered(r: f64) -> Self {
        Self::new(-r, -r, r, r).expect("positive half width")
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn contains_strictly(&self, p: Point) -> bool {
        p[0] > self.x0 && p[0] < self.x1 && p[1] > self.y0 && p[1] < self.y1
    }

    /// Bottom, right, top, left.
    pub fn sides(&self) -> [Segment; 4] {
        let (a, b, c, d) = (
            [self.x0, self.y0],
            [self.x1, self.y0],
            [self.x1, self.y1],
            [self.x0, self.y1],
        );
        [
            Segment::new(a, b).unwrap(),
            Segment::new(b, c).unwrap(),
            Segment::new(d, c).unwrap(),
            Segment::new(a, d).unwrap(),
        ]
    }
}

/// Outer rectangle minus a set of closed rectangular holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    outer: Rect,
    holes: Vec<Rect>,
}

impl Domain {
    pub fn new(outer: Rect, holes: Vec<Rect>) -> Result<Self> {
        for (i, h) in holes.iter().enumerate() {
            if !(outer.contains_strictly([h.x0, h.y0]) && outer.contains_strictly([h.x1, h.y1])) {
                return Err(Error::InvalidGeometry(format!(
                    "hole {i} is not inside the open outer rectangle"
                )));
            }
            for g in &holes[..i] {
                if h.x0 <= g.x1 && g.x0 <= h.x1 && h.y0 <= g.y1 && g.y0 <= h.y1 {
                    return Err(Error::InvalidGeometry(format!("hole {i} meets another hole")));
                }
            }
        }
        Ok(Self { outer, holes })
    }

    pub fn rectangle(outer: Rect) -> Self {
        Self {
            outer,
            holes: Vec::new(),
        }
    }

    pub fn outer(&self) -> &Rect {
        &self.outer
    }

    pub fn holes(&self) -> &[Rect] {
        &self.holes
    }

    pub fn diameter(&self) -> f64 {
        self.outer.diameter()
    }

    pub fn is_simply_connected(&self) -> bool {
        self.holes.is_empty()
    }

    /// Whether `p` lies in the closure of the domain.
    pub fn contains(&self, p: Point) -> bool {
        self.outer.contains(p) && !self.holes.iter().any(|h| h.contains_strictly(p))
    }

    /// Whether the segment lies in the closure of the domain.
    pub fn contains_segment(&self, s: &Segment) -> bool {
        if !(self.outer.contains(s.a) && self.outer.contains(s.b)) {
            return false;
        }
        // An axis-aligned segment enters an open rectangle iff its closed
        // extent overlaps the open rectangle.
        !self
            .holes
            .iter()
            .any(|h| s.a[0] < h.x1 && s.b[0] > h.x0 && s.a[1] < h.y1 && s.b[1] > h.y0)
    }

    /// Every side of the outer rectangle and of each hole.
    pub fn boundary_sides(&self) -> Vec<Segment> {
        let mut sides = self.outer.sides().to_vec();
        for h in &self.holes {
            sides.extend_from_slice(&h.sides());
        }
        sides
    }
}

/// Closed axis-aligned segment with `a <= b` componentwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    /// Accepts the endpoints in either order; they must differ in exactly one
    /// coordinate.
    pub fn new(p: Point, q: Point) -> Result<Self> {
        let dx = p[0] != q[0];
        let dy = p[1] != q[1];
        if dx == dy || !p.iter().chain(q.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "({}, {}) -> ({}, {}) is not an axis-aligned segment",
                p[0], p[1], q[0], q[1]
            )));
        }
        let (a, b) = if (p[0], p[1]) <= (q[0], q[1]) { (p, q) } else { (q, p) };
        Ok(Self { a, b })
    }

    pub fn is_vertical(&self) -> bool {
        self.a[0] == self.b[0]
    }

    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]) + (self.b[1] - self.a[1])
    }

    pub fn midpoint(&self) -> Point {
        [0.5 * (self.a[0] + self.b[0]), 0.5 * (self.a[1] + self.b[1])]
    }

    pub fn contains_point(&self, p: Point) -> bool {
        p[0] >= self.a[0] && p[0] <= self.b[0] && p[1] >= self.a[1] && p[1] <= self.b[1]
    }

    pub fn contains_segment(&self, s: &Segment) -> bool {
        self.contains_point(s.a) && self.contains_point(s.b)
    }

    /// Closed intersection, as the box `[lo, hi]` (empty when `None`).
    pub fn intersection(&self, other: &Segment) -> Option<(Point, Point)> {
        let lo = [self.a[0].max(other.a[0]), self.a[1].max(other.a[1])];
        let hi = [self.b[0].min(other.b[0]), self.b[1].min(other.b[1])];
        (lo[0] <= hi[0] && lo[1] <= hi[1]).then_some((lo, hi))
    }

    pub fn distance_to_point(&self, p: Point) -> f64 {
        let c = [p[0].clamp(self.a[0], self.b[0]), p[1].clamp(self.a[1], self.b[1])];
        (p[0] - c[0]).hypot(p[1] - c[1])
    }

    /// Splits at every listed point lying strictly inside the segment.
    pub fn split_at(&self, points: &[Point]) -> Vec<Segment> {
        let axis = if self.is_vertical() { 1 } else { 0 };
        let mut cuts: Vec<f64> = points
            .iter()
            .filter(|p| self.contains_point(**p) && p[axis] > self.a[axis] && p[axis] < self.b[axis])
            .map(|p| p[axis])
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out = Vec::with_capacity(cuts.len() + 1);
        let mut start = self.a;
        for c in cuts {
            let mut end = start;
            end[axis] = c;
            out.push(Segment { a: start, b: end });
            start = end;
        }
        out.push(Segment { a: start, b: self.b });
        out
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[({}, {}), ({}, {})]", self.a[0], self.a[1], self.b[0], self.b[1])
    }
}

/// Finite union of axis-aligned polylines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrackSet {
    polylines: Vec<Vec<Point>>,
}

impl CrackSet {
    pub fn new(polylines: Vec<Vec<Point>>) -> Result<Self> {
        for (i, pl) in polylines.iter().enumerate() {
            if pl.len() < 2 {
                return Err(Error::InvalidGeometry(format!("polyline {i} has fewer than 2 vertices")));
            }
            for w in pl.windows(2) {
                Segment::new(w[0], w[1])?;
            }
        }
        Ok(Self { polylines })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }

    pub fn polylines(&self) -> &[Vec<Point>] {
        &self.polylines
    }

    /// All segments, tagged with the index of their polyline.
    pub fn segments_with_owner(&self) -> Vec<(usize, Segment)> {
        self.polylines
            .iter()
            .enumerate()
            .flat_map(|(i, pl)| pl.windows(2).map(move |w| (i, Segment::new(w[0], w[1]).unwrap())))
            .collect()
    }

    pub fn segments(&self) -> Vec<Segment> {
        self.segments_with_owner().into_iter().map(|(_, s)| s).collect()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Point> + '_ {
        self.polylines.iter().flatten().copied()
    }

    /// Union of two crack sets (polylines are concatenated).
    pub fn union(&self, other: &CrackSet) -> CrackSet {
        let mut polylines = self.polylines.clone();
        polylines.extend(other.polylines.iter().cloned());
        CrackSet { polylines }
    }

    pub fn check_inside(&self, domain: &Domain) -> Result<()> {
        for s in self.segments() {
            if !domain.contains_segment(&s) {
                return Err(Error::DomainViolation(s.to_string()));
            }
        }
        Ok(())
    }

    /// Whether the point lies on one of the segments.
    pub fn contains_point(&self, p: Point) -> bool {
        self.segments().iter().any(|s| s.contains_point(p))
    }
}

/// Dirichlet part of the boundary; everything else on the boundary is
/// Neumann.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    dirichlet_arcs: Vec<Segment>,
}

impl BoundarySpec {
    pub fn new(dirichlet_arcs: Vec<Segment>, domain: &Domain) -> Result<Self> {
        if dirichlet_arcs.is_empty() {
            return Err(Error::InvalidGeometry("the Dirichlet boundary is empty".into()));
        }
        let sides = domain.boundary_sides();
        for arc in &dirichlet_arcs {
            if !sides.iter().any(|s| s.contains_segment(arc)) {
                return Err(Error::InvalidGeometry(format!("Dirichlet arc {arc} is not on the boundary")));
            }
        }
        Ok(Self { dirichlet_arcs })
    }

    /// The whole boundary is Dirichlet.
    pub fn everywhere(domain: &Domain) -> Self {
        Self {
            dirichlet_arcs: domain.boundary_sides(),
        }
    }

    pub fn dirichlet_arcs(&self) -> &[Segment] {
        &self.dirichlet_arcs
    }

    /// Index of the first Dirichlet arc containing `s`.
    pub fn arc_containing(&self, s: &Segment) -> Option<usize> {
        self.dirichlet_arcs.iter().position(|a| a.contains_segment(s))
    }

    /// The Neumann arcs: closures of the maximal boundary pieces not covered
    /// by Dirichlet arcs, one per side and gap.
    pub fn neumann_arcs(&self, domain: &Domain) -> Vec<Segment> {
        let mut out = Vec::new();
        for side in domain.boundary_sides() {
            let axis = if side.is_vertical() { 1 } else { 0 };
            let mut covered: Vec<(f64, f64)> = self
                .dirichlet_arcs
                .iter()
                .filter(|a| side.contains_segment(a))
                .map(|a| (a.a[axis], a.b[axis]))
                .collect();
            covered.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut cursor = side.a[axis];
            let end = side.b[axis];
            let mut push = |lo: f64, hi: f64| {
                if lo < hi {
                    let (mut p, mut q) = (side.a, side.a);
                    p[axis] = lo;
                    q[axis] = hi;
                    out.push(Segment { a: p, b: q });
                }
            };
            for (lo, hi) in covered {
                push(cursor, lo.min(end));
                cursor = cursor.max(hi);
            }
            push(cursor, end);
        }
        out
    }
}

/// Exact Hausdorff distance between two segment unions, with
/// `d(∅, ∅) = 0` and `d(∅, K) = diam(Ω)` for nonempty `K`.
pub fn hausdorff_distance(a: &CrackSet, b: &CrackSet, domain: &Domain) -> Result<f64> {
    a.check_inside(domain)?;
    b.check_inside(domain)?;
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => return Ok(domain.diameter()),
        _ => {}
    }
    let (sa, sb) = (a.segments(), b.segments());
    Ok(directed_hausdorff(&sa, &sb).max(directed_hausdorff(&sb, &sa)))
}

/// `sup_{x ∈ A} dist(x, B)` for nonempty segment lists.
pub fn directed_hausdorff(a: &[Segment], b: &[Segment]) -> f64 {
    let mut worst = 0.0f64;
    for s in a {
        let base = s.a;
        let dir = [s.b[0] - s.a[0], s.b[1] - s.a[1]];
        let at = |t: f64| [base[0] + t * dir[0], base[1] + t * dir[1]];
        let dist = |t: f64| {
            let p = at(t);
            b.iter().map(|q| q.distance_to_point(p)).fold(f64::INFINITY, f64::min)
        };
        // The distance to B along the segment is a minimum of convex
        // functions; its maximum sits at an endpoint or where two of them
        // cross, and each squared distance is piecewise quadratic.
        let mut candidates = vec![0.0, 1.0];
        let pieces: Vec<Vec<(f64, f64, [f64; 3])>> =
            b.iter().map(|q| squared_distance_pieces(q, base, dir)).collect();
        for j in 0..b.len() {
            for k in j + 1..b.len() {
                crossings(&pieces[j], &pieces[k], &mut candidates);
            }
        }
        for t in candidates {
            worst = worst.max(dist(t));
        }
    }
    worst
}

/// Squared distance from `base + t·dir` to segment `q`, as quadratic pieces
/// `(t_lo, t_hi, [c0, c1, c2])` covering `[0, 1]`.
fn squared_distance_pieces(q: &Segment, base: Point, dir: Point) -> Vec<(f64, f64, [f64; 3])> {
    let len = q.length();
    let e = if q.is_vertical() { [0.0, 1.0] } else { [1.0, 0.0] };
    let w = [base[0] - q.a[0], base[1] - q.a[1]];
    let s0 = w[0] * e[0] + w[1] * e[1];
    let sd = dir[0] * e[0] + dir[1] * e[1];
    let dd = dir[0] * dir[0] + dir[1] * dir[1];
    let mut breaks = vec![0.0, 1.0];
    if sd != 0.0 {
        for target in [0.0, len] {
            let t = (target - s0) / sd;
            if t > 0.0 && t < 1.0 {
                breaks.push(t);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    let point_coeffs = |c: Point| {
        let u = [base[0] - c[0], base[1] - c[1]];
        [
            u[0] * u[0] + u[1] * u[1],
            2.0 * (dir[0] * u[0] + dir[1] * u[1]),
            dd,
        ]
    };
    breaks
        .windows(2)
        .map(|win| {
            let tm = 0.5 * (win[0] + win[1]);
            let s = s0 + tm * sd;
            let coeffs = if s <= 0.0 {
                point_coeffs(q.a)
            } else if s >= len {
                point_coeffs(q.b)
            } else {
                [
                    w[0] * w[0] + w[1] * w[1] - s0 * s0,
                    2.0 * (dir[0] * w[0] + dir[1] * w[1] - s0 * sd),
                    dd - sd * sd,
                ]
            };
            (win[0], win[1], coeffs)
        })
        .collect()
}

fn crossings(p: &[(f64, f64, [f64; 3])], q: &[(f64, f64, [f64; 3])], out: &mut Vec<f64>) {
    for &(a0, a1, ca) in p {
        for &(b0, b1, cb) in q {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo > hi {
                continue;
            }
            out.push(lo);
            out.push(hi);
            let c = [ca[0] - cb[0], ca[1] - cb[1], ca[2] - cb[2]];
            for t in quadratic_roots(c) {
                if t >= lo && t <= hi {
                    out.push(t);
                }
            }
        }
    }
}

fn quadratic_roots(c: [f64; 3]) -> Vec<f64> {
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let [c0, c1, c2] = c.map(|v| v / scale);
    if c2.abs() < 1e-14 {
        if c1.abs() < 1e-14 {
            return Vec::new();
        }
        return vec![-c0 / c1];
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let qv = -0.5 * (c1 + c1.signum() * sq);
    let mut roots = vec![qv / c2];
    if qv != 0.0 {
        roots.push(c0 / qv);
    }
    roots
}

/// What a piece of `K ∪ ∂_N Ω` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceOrigin {
    /// Crack polyline with this index.
    Crack(usize),
    /// Neumann arc with this index in [`BoundarySpec::neumann_arcs`] order.
    Neumann(usize),
}

/// Connected components of `K ∪ ∂_N Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentPartition {
    pieces: Vec<(Segment, PieceOrigin, usize)>,
    count: usize,
}

impl ComponentPartition {
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// `(segment, origin, component)` for every crack segment and Neumann
    /// arc, split at cut points if any were given.
    pub fn pieces(&self) -> &[(Segment, PieceOrigin, usize)] {
        &self.pieces
    }

    /// Component of the piece containing `s`, if any.
    pub fn component_of(&self, s: &Segment) -> Option<usize> {
        self.pieces
            .iter()
            .find(|(p, _, _)| p.contains_segment(s))
            .map(|&(_, _, c)| c)
    }

    /// Component containing the point (first match).
    pub fn component_at(&self, p: Point) -> Option<usize> {
        self.pieces
            .iter()
            .find(|(s, _, _)| s.contains_point(p))
            .map(|&(_, _, c)| c)
    }

    /// Component ids of each crack polyline (several when cuts split it).
    pub fn polyline_components(&self, polyline: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .pieces
            .iter()
            .filter(|(_, o, _)| *o == PieceOrigin::Crack(polyline))
            .map(|&(_, _, c)| c)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn arc_component(&self, arc: usize) -> Option<usize> {
        self.pieces
            .iter()
            .find(|(_, o, _)| *o == PieceOrigin::Neumann(arc))
            .map(|&(_, _, c)| c)
    }
}

/// Connected components of `K ∪ ∂_N Ω`: two pieces share a component iff a
/// chain of touching pieces joins them.
pub fn connected_components(k: &CrackSet, boundary: &BoundarySpec, domain: &Domain) -> ComponentPartition {
    connected_components_with_cuts(k, boundary, domain, &[])
}

/// As [`connected_components`], except that touching at one of the `cuts`
/// points does not connect. Used for limit sets whose pieces come from
/// different components of an approximating sequence.
pub fn connected_components_with_cuts(
    k: &CrackSet,
    boundary: &BoundarySpec,
    domain: &Domain,
    cuts: &[Point],
) -> ComponentPartition {
    let mut pieces: Vec<(Segment, PieceOrigin)> = Vec::new();
    for (owner, s) in k.segments_with_owner() {
        for piece in s.split_at(cuts) {
            pieces.push((piece, PieceOrigin::Crack(owner)));
        }
    }
    for (i, arc) in boundary.neumann_arcs(domain).into_iter().enumerate() {
        for piece in arc.split_at(cuts) {
            pieces.push((piece, PieceOrigin::Neumann(i)));
        }
    }
    let n = pieces.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if let Some((lo, hi)) = pieces[i].0.intersection(&pieces[j].0) {
                if lo == hi && cuts.contains(&lo) {
                    continue;
                }
                uf.union(i, j);
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut count = 0;
    let mut out = Vec::with_capacity(n);
    for (i, (s, o)) in pieces.into_iter().enumerate() {
        let r = uf.find(i);
        if label[r] == usize::MAX {
            label[r] = count;
            count += 1;
        }
        out.push((s, o, label[r]));
    }
    ComponentPartition { pieces: out, count }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// The four crack families of the experiment catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExampleId {
    /// Two offset horizontal half-cracks closing onto a straight crack.
    Ex51,
    /// H-shaped crack: a straight crack with a narrow channel at the origin.
    Ex53,
    /// Square loop around a hole, with a narrow channel through the loop.
    Ex55,
    /// Three branches meeting at the origin, approximated with gaps.
    Ex57,
}

impl ExampleId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExampleId::Ex51 => "ex5_1",
            ExampleId::Ex53 => "ex5_3",
            ExampleId::Ex55 => "ex5_5",
            ExampleId::Ex57 => "ex5_7",
        }
    }

    pub const ALL: [ExampleId; 4] = [ExampleId::Ex51, ExampleId::Ex53, ExampleId::Ex55, ExampleId::Ex57];
}

impl FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ex5_1" => Ok(ExampleId::Ex51),
            "ex5_3" => Ok(ExampleId::Ex53),
            "ex5_5" => Ok(ExampleId::Ex55),
            "ex5_7" => Ok(ExampleId::Ex57),
            other => Err(Error::UnknownExample(other.to_string())),
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Shape parameters of a crack family member.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FamilyParams {
    /// Channel width along the crack (`ex5_3`, `ex5_5`).
    pub a: Option<f64>,
    /// Channel length across the crack (`ex5_3`, `ex5_5`).
    pub b: Option<f64>,
    /// Gap between branches and the junction (`ex5_7`); default `1/(4h)`.
    pub gap: Option<f64>,
    /// Snap every coordinate to a multiple of this pitch.
    pub pitch: Option<f64>,
}

fn snap(v: f64, pitch: Option<f64>) -> f64 {
    match pitch {
        Some(p) if p > 0.0 => (v / p).round() * p,
        _ => v,
    }
}

/// The default domain of each example.
pub fn example_domain(example: ExampleId) -> Domain {
    match example {
        ExampleId::Ex55 => Domain::new(Rect::centered(1.0), vec![Rect::centered(0.25)]).unwrap(),
        _ => Domain::rectangle(Rect::centered(1.0)),
    }
}

/// The default Dirichlet boundary of each example: top and bottom for the
/// straight-crack families, everything otherwise. The three-branch family
/// splits the outer boundary where the branches reach it so boundary data can
/// be given per arc.
pub fn example_boundary(example: ExampleId) -> BoundarySpec {
    let domain = example_domain(example);
    let seg = |p: Point, q: Point| Segment::new(p, q).unwrap();
    match example {
        ExampleId::Ex51 | ExampleId::Ex53 => BoundarySpec::new(
            vec![seg([-1.0, 1.0], [1.0, 1.0]), seg([-1.0, -1.0], [1.0, -1.0])],
            &domain,
        )
        .unwrap(),
        ExampleId::Ex55 => BoundarySpec::everywhere(&domain),
        ExampleId::Ex57 => BoundarySpec::new(junction_arcs().to_vec(), &domain).unwrap(),
    }
}

/// Dirichlet arcs of the three-branch example, counterclockwise from the
/// left side above the west branch.
pub fn junction_arcs() -> [Segment; 7] {
    let seg = |p: Point, q: Point| Segment::new(p, q).unwrap();
    [
        seg([-1.0, 0.0], [-1.0, 1.0]),
        seg([-1.0, 1.0], [1.0, 1.0]),
        seg([1.0, 0.0], [1.0, 1.0]),
        seg([1.0, -1.0], [1.0, 0.0]),
        seg([0.0, -1.0], [1.0, -1.0]),
        seg([-1.0, -1.0], [0.0, -1.0]),
        seg([-1.0, -1.0], [-1.0, 0.0]),
    ]
}

/// The limit crack of each family.
pub fn limit_crack(example: ExampleId) -> CrackSet {
    let polylines = match example {
        ExampleId::Ex51 | ExampleId::Ex53 => vec![vec![[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]],
        ExampleId::Ex55 => vec![vec![
            [0.5, 0.0],
            [0.5, 0.5],
            [-0.5, 0.5],
            [-0.5, -0.5],
            [0.5, -0.5],
            [0.5, 0.0],
        ]],
        ExampleId::Ex57 => vec![
            vec![[-1.0, 0.0], [0.0, 0.0]],
            vec![[0.0, -1.0], [0.0, 0.0]],
            vec![[0.0, 0.0], [1.0, 0.0]],
        ],
    };
    CrackSet::new(polylines).unwrap()
}

/// Point where the approximating components of a family meet in the limit.
pub fn contact_point(example: ExampleId) -> Option<Point> {
    match example {
        ExampleId::Ex51 => None,
        ExampleId::Ex53 | ExampleId::Ex57 => Some([0.0, 0.0]),
        ExampleId::Ex55 => Some([0.5, 0.0]),
    }
}

/// The `h`-th member of a crack family.
pub fn crack_family(example: ExampleId, h: u32, params: &FamilyParams) -> Result<CrackSet> {
    if h == 0 {
        return Err(Error::InvalidGeometry("family index h must be at least 1".into()));
    }
    let pitch = params.pitch;
    let s = |v: f64| snap(v, pitch);
    let channel = |name: &str| -> Result<(f64, f64)> {
        let (a, b) = match (params.a, params.b) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::InvalidGeometry(format!(
                    "{name} needs channel width `a` and length `b`"
                )))
            }
        };
        if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
            return Err(Error::InvalidGeometry(format!("channel sizes a={a}, b={b} must lie in (0, 1)")));
        }
        let (ha, hb) = (s(0.5 * a), s(0.5 * b));
        if ha <= 0.0 || hb <= 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "channel a={a}, b={b} collapses at the grid pitch"
            )));
        }
        Ok((ha, hb))
    };
    let polylines = match example {
        ExampleId::Ex51 => {
            let y = s(1.0 / h as f64);
            if y <= 0.0 {
                return Err(Error::InvalidGeometry("crack offset collapses at the grid pitch".into()));
            }
            vec![vec![[-1.0, y], [s(0.5), y]], vec![[s(-0.5), -y], [1.0, -y]]]
        }
        ExampleId::Ex53 => {
            let (ha, hb) = channel("ex5_3")?;
            vec![
                vec![[-1.0, 0.0], [-ha, 0.0]],
                vec![[ha, 0.0], [1.0, 0.0]],
                vec![[-ha, -hb], [-ha, hb]],
                vec![[ha, -hb], [ha, hb]],
            ]
        }
        ExampleId::Ex55 => {
            let (ha, hb) = channel("ex5_5")?;
            if ha >= 0.5 || hb >= 0.25 {
                return Err(Error::InvalidGeometry("channel does not fit between hole and boundary".into()));
            }
            vec![
                vec![[0.5, ha], [0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5], [0.5, -ha]],
                vec![[0.5 - hb, ha], [0.5 + hb, ha]],
                vec![[0.5 - hb, -ha], [0.5 + hb, -ha]],
            ]
        }
        ExampleId::Ex57 => {
            let d = s(params.gap.unwrap_or(0.25 / h as f64));
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::InvalidGeometry(format!("junction gap {d} must lie in (0, 1)")));
            }
            vec![
                vec![[-1.0, 0.0], [-d, 0.0]],
                vec![[0.0, -1.0], [0.0, -d]],
                vec![[d, 0.0], [1.0, 0.0]],
            ]
        }
    };
    CrackSet::new(polylines)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Domain {
        Domain::rectangle(Rect::centered(1.0))
    }

    #[test]
    fn empty_set_conventions() {
        let d = square();
        let k = limit_crack(ExampleId::Ex51);
        assert_eq!(hausdorff_distance(&CrackSet::empty(), &CrackSet::empty(), &d).unwrap(), 0.0);
        assert_eq!(hausdorff_distance(&CrackSet::empty(), &k, &d).unwrap(), d.diameter());
        assert_eq!(hausdorff_distance(&k, &CrackSet::empty(), &d).unwrap(), d.diameter());
        assert_eq!(hausdorff_distance(&k, &k, &d).unwrap(), 0.0);
    }

    #[test]
    fn outside_segment_is_rejected() {
        let k = CrackSet::new(vec![vec![[0.0, 0.0], [2.0, 0.0]]]).unwrap();
        assert!(matches!(
            hausdorff_distance(&k, &k, &square()),
            Err(Error::DomainViolation(_))
        ));
        let annulus = example_domain(ExampleId::Ex55);
        let through_hole = CrackSet::new(vec![vec![[-0.5, 0.0], [0.5, 0.0]]]).unwrap();
        assert!(through_hole.check_inside(&annulus).is_err());
        let on_hole_side = CrackSet::new(vec![vec![[-0.25, -0.25], [-0.25, 0.25]]]).unwrap();
        assert!(on_hole_side.check_inside(&annulus).is_ok());
    }

    #[test]
    fn h_family_distance_to_limit() {
        let d = square();
        let k = limit_crack(ExampleId::Ex53);
        for (a, b) in [(0.1, 0.2), (0.3, 0.05), (0.125, 0.125)] {
            let kh = crack_family(ExampleId::Ex53, 1, &FamilyParams { a: Some(a), b: Some(b), ..Default::default() }).unwrap();
            let got = hausdorff_distance(&kh, &k, &d).unwrap();
            assert!((got - f64::max(a / 2.0, b / 2.0)).abs() < 1e-15, "{got}");
        }
    }

    #[test]
    fn offset_family_distance_to_limit() {
        let d = square();
        let k = limit_crack(ExampleId::Ex51);
        let mut last = f64::INFINITY;
        for h in [2, 4, 8, 16] {
            let kh = crack_family(ExampleId::Ex51, h, &FamilyParams::default()).unwrap();
            let got = hausdorff_distance(&kh, &k, &d).unwrap();
            // The limit segment near x = ±1 is farthest from the far half-crack.
            assert!(got < last);
            last = got;
        }
    }

    #[test]
    fn example_component_counts() {
        let d = square();
        let b = example_boundary(ExampleId::Ex51);
        let kh = crack_family(ExampleId::Ex51, 4, &FamilyParams::default()).unwrap();
        let parts = connected_components(&kh, &b, &d);
        // Each half-crack touches one lateral Neumann side.
        assert_eq!(parts.len(), 2);
        let k = limit_crack(ExampleId::Ex53);
        let parts = connected_components(&k, &b, &d);
        assert_eq!(parts.len(), 1);
        let cut = connected_components_with_cuts(&k, &b, &d, &[[0.0, 0.0]]);
        assert_eq!(cut.len(), 2);
        let parts = connected_components(&CrackSet::empty(), &b, &d);
        assert_eq!(parts.len(), 2);
    }

    #[test]
    fn neumann_arcs_complement_dirichlet() {
        let d = square();
        let b = BoundarySpec::new(vec![Segment::new([-1.0, 1.0], [0.0, 1.0]).unwrap()], &d).unwrap();
        let arcs = b.neumann_arcs(&d);
        let total: f64 = arcs.iter().map(Segment::length).sum();
        assert_eq!(total, 7.0);
        let parts = connected_components(&CrackSet::empty(), &b, &d);
        assert_eq!(parts.len(), 1);
    }

    #[test]
    fn degenerate_channel_is_rejected() {
        let p = FamilyParams { a: Some(1e-4), b: Some(0.2), pitch: Some(1.0 / 64.0), gap: None };
        assert!(crack_family(ExampleId::Ex53, 1, &p).is_err());
    }

    #[test]
    fn h_family_shape() {
        let p = FamilyParams { a: Some(0.1), b: Some(0.2), ..Default::default() };
        let k = crack_family(ExampleId::Ex53, 1, &p).unwrap();
        let segs = k.segments();
        assert_eq!(segs.len(), 4);
        assert!(segs.contains(&Segment::new([-0.05, -0.1], [-0.05, 0.1]).unwrap()));
        assert!(segs.contains(&Segment::new([-1.0, 0.0], [-0.05, 0.0]).unwrap()));
    }
}
