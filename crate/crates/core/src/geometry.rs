//! Polylines, polygons and triangle meshes with uniform-grid indexes.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub type P2 = [f64; 2];
pub type P3 = [f64; 3];

/// Which piece of a set boundary a primitive belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundaryPart {
    Barrier,
    UsablePart,
    /// `S = 0`
    SZero,
    /// `I = 0` (equilibria)
    Axis,
    /// `S + I = 1`
    SimplexFace,
}

fn sub2(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot2(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance2(p: P2, a: P2, b: P2) -> f64 {
    let ab = sub2(b, a);
    let ap = sub2(p, a);
    let len2 = dot2(ab, ab);
    let t = if len2 > 0.0 { (dot2(ap, ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    dot2(d, d).sqrt()
}

fn seg_intersect_proper(a: P2, b: P2, c: P2, d: P2) -> bool {
    fn orient(a: P2, b: P2, c: P2) -> f64 {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    }
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Resamples a polyline to `n` points equally spaced in arc length.
pub fn resample_arc_length<const D: usize>(pts: &[[f64; D]], n: usize) -> Vec<[f64; D]> {
    resample_by_prefix(pts, n, D)
}

/// Like [`resample_arc_length`], but arc length is measured over the first
/// `arc_dims` coordinates only; the remaining ones are carried along by
/// linear interpolation.
pub fn resample_by_prefix<const D: usize>(pts: &[[f64; D]], n: usize, arc_dims: usize) -> Vec<[f64; D]> {
    if pts.is_empty() || n == 0 {
        return Vec::new();
    }
    if pts.len() == 1 || n == 1 {
        return vec![pts[0]; n];
    }
    let mut cum = Vec::with_capacity(pts.len());
    cum.push(0.0);
    for w in pts.windows(2) {
        let d: f64 = (0..arc_dims).map(|k| (w[1][k] - w[0][k]).powi(2)).sum::<f64>().sqrt();
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    if total == 0.0 {
        return vec![pts[0]; n];
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for j in 0..n {
        let target = total * j as f64 / (n - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let u = if span > 0.0 { ((target - cum[seg]) / span).clamp(0.0, 1.0) } else { 0.0 };
        let mut p = [0.0; D];
        for k in 0..D {
            p[k] = pts[seg][k] + u * (pts[seg + 1][k] - pts[seg][k]);
        }
        out.push(p);
    }
    *out.last_mut().unwrap() = *pts.last().unwrap();
    out
}

/// Serialized form of [`Polygon`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonData {
    /// Closed ring; the edge `i` joins vertex `i` to vertex `i + 1 (mod n)`.
    pub vertices: Vec<P2>,
    /// Part of each ring edge.
    pub parts: Vec<BoundaryPart>,
    /// Segments that count for distance but not for parity.
    pub extra: Vec<(P2, P2, BoundaryPart)>,
}

/// Closed polygon with a grid index for parity and distance queries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "PolygonData", into = "PolygonData")]
pub struct Polygon {
    data: PolygonData,
    lo: P2,
    cell: P2,
    nx: usize,
    ny: usize,
    /// Edge ids (ring edges first, then extras) per cell, row-major.
    cells: Vec<Vec<u32>>,
    /// Ring edge ids per horizontal band of height `band_h`.
    bands: Vec<Vec<u32>>,
    band_h: f64,
}

impl PartialEq for Polygon {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

impl From<Polygon> for PolygonData {
    fn from(p: Polygon) -> Self {
        p.data
    }
}

impl From<PolygonData> for Polygon {
    fn from(data: PolygonData) -> Self {
        Polygon::new(data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest2 {
    pub distance: f64,
    pub part: BoundaryPart,
}

impl Polygon {
    const GRID: usize = 96;

    pub fn new(data: PolygonData) -> Self {
        assert_eq!(data.vertices.len(), data.parts.len());
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let all = data
            .vertices
            .iter()
            .chain(data.extra.iter().flat_map(|(a, b, _)| [a, b]));
        for p in all {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        // Near-square cells for distance queries, so that a ring of cells
        // bounds the distance in both directions; separate thin bands for
        // the parity ray.
        let mut span = [0.0; 2];
        for k in 0..2 {
            span[k] = (hi[k] - lo[k]).max(1e-12);
            lo[k] -= 1e-9 * span[k].max(1.0);
            span[k] *= 1.0 + 2e-9;
        }
        let floor = span[0].max(span[1]) / Self::GRID as f64;
        let total = (Self::GRID * Self::GRID) as f64;
        let aspect = span[0].max(floor) / span[1].max(floor);
        let nx = ((total * aspect).sqrt().round() as usize).clamp(1, 16 * Self::GRID);
        let ny = ((total / nx as f64).round() as usize).clamp(1, 16 * Self::GRID);
        let cell = [span[0] / nx as f64, span[1] / ny as f64];
        let band_h = span[1] / Self::GRID as f64;
        let mut poly = Polygon {
            data,
            lo,
            cell,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
            bands: vec![Vec::new(); Self::GRID],
            band_h,
        };
        let n_ring = poly.data.vertices.len();
        for id in 0..poly.n_edges() {
            let (a, b, _) = poly.edge(id);
            let (i0, j0) = poly.cell_of(a);
            let (i1, j1) = poly.cell_of(b);
            for j in j0.min(j1)..=j0.max(j1) {
                for i in i0.min(i1)..=i0.max(i1) {
                    poly.cells[j * nx + i].push(id as u32);
                }
            }
            if id < n_ring {
                let (b0, b1) = (poly.band_of(a[1]), poly.band_of(b[1]));
                for j in b0.min(b1)..=b0.max(b1) {
                    poly.bands[j].push(id as u32);
                }
            }
        }
        poly
    }

    pub fn data(&self) -> &PolygonData {
        &self.data
    }

    pub fn vertices(&self) -> &[P2] {
        &self.data.vertices
    }

    fn n_edges(&self) -> usize {
        self.data.vertices.len() + self.data.extra.len()
    }

    fn edge(&self, id: usize) -> (P2, P2, BoundaryPart) {
        let n = self.data.vertices.len();
        if id < n {
            (self.data.vertices[id], self.data.vertices[(id + 1) % n], self.data.parts[id])
        } else {
            self.data.extra[id - n]
        }
    }

    fn cell_of(&self, p: P2) -> (usize, usize) {
        let i = ((p[0] - self.lo[0]) / self.cell[0]).floor();
        let j = ((p[1] - self.lo[1]) / self.cell[1]).floor();
        (
            (i.max(0.0) as usize).min(self.nx - 1),
            (j.max(0.0) as usize).min(self.ny - 1),
        )
    }

    fn band_of(&self, y: f64) -> usize {
        let j = ((y - self.lo[1]) / self.band_h).floor();
        (j.max(0.0) as usize).min(Self::GRID - 1)
    }

    /// Even-odd test with a ray in the `+x` direction.
    pub fn contains(&self, p: P2) -> bool {
        let j = ((p[1] - self.lo[1]) / self.band_h).floor();
        if j < 0.0 || j >= Self::GRID as f64 {
            return false;
        }
        let mut inside = false;
        for &id in &self.bands[j as usize] {
            let (a, b, _) = self.edge(id as usize);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if x > p[0] {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Nearest boundary primitive (ring edges and extras).
    pub fn nearest(&self, p: P2) -> Nearest2 {
        let mut best = Nearest2 {
            distance: f64::INFINITY,
            part: BoundaryPart::Barrier,
        };
        let visit = |id: u32, best: &mut Nearest2| {
            let (a, b, part) = self.edge(id as usize);
            let d = segment_distance2(p, a, b);
            if d < best.distance {
                *best = Nearest2 { distance: d, part };
            }
        };
        let n = [self.nx, self.ny];
        let inside_box = (0..2).all(|k| p[k] >= self.lo[k] && p[k] <= self.lo[k] + self.cell[k] * n[k] as f64);
        if !inside_box {
            for id in 0..self.n_edges() {
                visit(id as u32, &mut best);
            }
            return best;
        }
        let (ci, cj) = self.cell_of(p);
        let step = self.cell[0].min(self.cell[1]);
        for r in 0..self.nx.max(self.ny) {
            let (r_i, r_j) = (r as isize, r as isize);
            for dj in -r_j..=r_j {
                for di in -r_i..=r_i {
                    if di.abs() != r_i && dj.abs() != r_j {
                        continue;
                    }
                    let (i, j) = (ci as isize + di, cj as isize + dj);
                    if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
                        continue;
                    }
                    for &id in &self.cells[j as usize * self.nx + i as usize] {
                        visit(id, &mut best);
                    }
                }
            }
            if best.distance <= r as f64 * step {
                break;
            }
        }
        best
    }

    /// True when no two non-adjacent ring edges cross.
    pub fn is_simple(&self) -> bool {
        let n = self.data.vertices.len();
        for cell in &self.cells {
            let ring: Vec<usize> = cell.iter().map(|&i| i as usize).filter(|&i| i < n).collect();
            for (x, &e) in ring.iter().enumerate() {
                for &f in &ring[x + 1..] {
                    if (e + 1) % n == f || (f + 1) % n == e {
                        continue;
                    }
                    let (a, b, _) = self.edge(e);
                    let (c, d, _) = self.edge(f);
                    if seg_intersect_proper(a, b, c, d) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

pub fn sub3(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot3(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: P3, b: P3) -> P3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm3(a: P3) -> f64 {
    dot3(a, a).sqrt()
}

/// Closest distance from `p` to triangle `abc`.
pub fn triangle_distance(p: P3, a: P3, b: P3, c: P3) -> f64 {
    let q = closest_on_triangle(p, a, b, c);
    norm3(sub3(p, q))
}

fn lerp3(a: P3, b: P3, t: f64) -> P3 {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
}

fn closest_on_triangle(p: P3, a: P3, b: P3, c: P3) -> P3 {
    let ab = sub3(b, a);
    let ac = sub3(c, a);
    let ap = sub3(p, a);
    let d1 = dot3(ab, ap);
    let d2 = dot3(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub3(p, b);
    let d3 = dot3(ab, bp);
    let d4 = dot3(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return lerp3(a, b, d1 / (d1 - d3));
    }
    let cp = sub3(p, c);
    let d5 = dot3(ab, cp);
    let d6 = dot3(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return lerp3(a, c, d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return lerp3(b, c, (d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [
        a[0] + ab[0] * v + ac[0] * w,
        a[1] + ab[1] * v + ac[1] * w,
        a[2] + ab[2] * v + ac[2] * w,
    ]
}

/// Segment/triangle crossing. Returns the barycentric coordinates `(u, v, w)`
/// of the hit and the segment parameter, or `None`.
pub fn segment_triangle(p: P3, q: P3, a: P3, b: P3, c: P3) -> Option<([f64; 3], f64)> {
    let dir = sub3(q, p);
    let e1 = sub3(b, a);
    let e2 = sub3(c, a);
    let h = cross3(dir, e2);
    let det = dot3(e1, h);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = sub3(p, a);
    let u = inv * dot3(s, h);
    let qv = cross3(s, e1);
    let v = inv * dot3(dir, qv);
    let t = inv * dot3(e2, qv);
    if !(0.0..=1.0).contains(&t) {
        return None;
    }
    let w = 1.0 - u - v;
    if u < 0.0 || v < 0.0 || w < 0.0 {
        return None;
    }
    Some(([w, u, v], t))
}

/// Serialized form of [`Mesh`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshData {
    pub nodes: Vec<P3>,
    pub triangles: Vec<[u32; 3]>,
    /// Outward unit normal per triangle.
    pub normals: Vec<P3>,
}

/// Triangle mesh with a uniform 3D grid index.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "MeshData", into = "MeshData")]
pub struct Mesh {
    data: MeshData,
    lo: P3,
    cell: P3,
    n: usize,
    cells: Vec<Vec<u32>>,
    /// Edges used by a single triangle.
    open_edges: HashSet<(u32, u32)>,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

impl From<Mesh> for MeshData {
    fn from(m: Mesh) -> Self {
        m.data
    }
}

impl From<MeshData> for Mesh {
    fn from(data: MeshData) -> Self {
        Mesh::new(data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossings {
    pub count: usize,
    /// The segment passed within the ambiguity tolerance of a triangle edge
    /// or vertex, so the count cannot be trusted.
    pub ambiguous: bool,
}

impl Mesh {
    const GRID: usize = 40;

    pub fn new(data: MeshData) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &data.nodes {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if data.nodes.is_empty() {
            lo = [0.0; 3];
            hi = [1.0; 3];
        }
        let widest = (0..3).map(|k| hi[k] - lo[k]).fold(1e-9, f64::max);
        let mut cell = [0.0; 3];
        for k in 0..3 {
            // Flat directions get a floor so cells stay roughly cubic.
            let span = (hi[k] - lo[k]).max(widest / Self::GRID as f64);
            lo[k] -= 1e-9;
            cell[k] = (span + 2e-9) / Self::GRID as f64;
        }
        let n = Self::GRID;
        let mut mesh = Mesh {
            data,
            lo,
            cell,
            n,
            cells: vec![Vec::new(); n * n * n],
            open_edges: HashSet::new(),
        };
        let mut edge_count = std::collections::HashMap::<(u32, u32), u32>::new();
        for (id, tri) in mesh.data.triangles.iter().enumerate() {
            let pts = tri.map(|v| mesh.data.nodes[v as usize]);
            let mut c0 = [usize::MAX; 3];
            let mut c1 = [0usize; 3];
            for p in pts {
                let c = mesh.cell_of(p);
                for k in 0..3 {
                    c0[k] = c0[k].min(c[k]);
                    c1[k] = c1[k].max(c[k]);
                }
            }
            for z in c0[2]..=c1[2] {
                for y in c0[1]..=c1[1] {
                    for x in c0[0]..=c1[0] {
                        mesh.cells[(z * n + y) * n + x].push(id as u32);
                    }
                }
            }
            for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        mesh.open_edges = edge_count.into_iter().filter(|(_, c)| *c == 1).map(|(e, _)| e).collect();
        mesh
    }

    pub fn data(&self) -> &MeshData {
        &self.data
    }

    pub fn triangle(&self, id: usize) -> [P3; 3] {
        self.data.triangles[id].map(|v| self.data.nodes[v as usize])
    }

    fn cell_of(&self, p: P3) -> [usize; 3] {
        let mut c = [0; 3];
        for k in 0..3 {
            let i = ((p[k] - self.lo[k]) / self.cell[k]).floor();
            c[k] = (i.max(0.0) as usize).min(self.n - 1);
        }
        c
    }

    fn in_box(&self, p: P3) -> bool {
        (0..3).all(|k| p[k] >= self.lo[k] && p[k] <= self.lo[k] + self.cell[k] * self.n as f64)
    }

    /// Distance to the nearest triangle.
    pub fn distance(&self, p: P3) -> f64 {
        if self.data.triangles.is_empty() {
            return f64::INFINITY;
        }
        let mut visit = |id: u32, best: &mut f64| {
            let [a, b, c] = self.triangle(id as usize);
            *best = best.min(triangle_distance(p, a, b, c));
        };
        self.ring_search(p, &mut visit)
    }

    fn ring_search(&self, p: P3, visit: &mut impl FnMut(u32, &mut f64)) -> f64 {
        let c = self.cell_of(p);
        let step = self.cell.iter().cloned().fold(f64::INFINITY, f64::min);
        let n = self.n as isize;
        let mut best = f64::INFINITY;
        let mut seen = HashSet::new();
        for r in 0..self.n as isize {
            for dz in -r..=r {
                for dy in -r..=r {
                    for dx in -r..=r {
                        if dx.abs() != r && dy.abs() != r && dz.abs() != r {
                            continue;
                        }
                        let (x, y, z) = (c[0] as isize + dx, c[1] as isize + dy, c[2] as isize + dz);
                        if x < 0 || y < 0 || z < 0 || x >= n || y >= n || z >= n {
                            continue;
                        }
                        for &id in &self.cells[((z * n + y) * n + x) as usize] {
                            if seen.insert(id) {
                                visit(id, &mut best);
                            }
                        }
                    }
                }
            }
            // Cells beyond ring r are at least r cell widths from the query
            // cell; for queries outside the box this bound is conservative.
            if best <= r as f64 * step && self.in_box(p) {
                break;
            }
        }
        best
    }

    /// Grid cells visited by the segment `p -> q` (voxel traversal), each
    /// widened by its face neighbours to absorb rounding at cell walls.
    fn cells_on_segment(&self, p: P3, q: P3) -> Vec<usize> {
        let d = sub3(q, p);
        let top: Vec<f64> = (0..3).map(|k| self.lo[k] + self.cell[k] * self.n as f64).collect();
        // Clip to the grid box.
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for k in 0..3 {
            if d[k].abs() < 1e-300 {
                if p[k] < self.lo[k] || p[k] > top[k] {
                    return Vec::new();
                }
            } else {
                let a = (self.lo[k] - p[k]) / d[k];
                let b = (top[k] - p[k]) / d[k];
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
            }
        }
        if t0 > t1 {
            return Vec::new();
        }
        let start = lerp3(p, q, t0);
        let mut c = self.cell_of(start).map(|v| v as isize);
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        let mut step = [0isize; 3];
        for k in 0..3 {
            if d[k] > 0.0 {
                step[k] = 1;
                t_max[k] = (self.lo[k] + (c[k] + 1) as f64 * self.cell[k] - p[k]) / d[k];
                t_delta[k] = self.cell[k] / d[k];
            } else if d[k] < 0.0 {
                step[k] = -1;
                t_max[k] = (self.lo[k] + c[k] as f64 * self.cell[k] - p[k]) / d[k];
                t_delta[k] = -self.cell[k] / d[k];
            }
        }
        let n = self.n as isize;
        let mut out = Vec::new();
        let push = |c: [isize; 3], out: &mut Vec<usize>| {
            for (k, o) in [(0, 0), (0, -1), (0, 1), (1, -1), (1, 1), (2, -1), (2, 1)] {
                let mut x = c;
                x[k] += o;
                if x.iter().all(|v| *v >= 0 && *v < n) {
                    out.push(((x[2] * n + x[1]) * n + x[0]) as usize);
                }
            }
        };
        loop {
            push(c, &mut out);
            let k = (0..3).min_by(|&a, &b| t_max[a].total_cmp(&t_max[b])).unwrap();
            if t_max[k] > t1 {
                break;
            }
            c[k] += step[k];
            if c[k] < 0 || c[k] >= n {
                break;
            }
            t_max[k] += t_delta[k];
        }
        out
    }

    /// Counts crossings of the segment `p -> q` with the mesh. A hit whose
    /// barycentric coordinates come within `amb_tol` of an edge is flagged
    /// ambiguous, as is a near miss of an open (boundary) edge.
    pub fn crossings(&self, p: P3, q: P3, amb_tol: f64) -> Crossings {
        let mut ids = HashSet::new();
        for c in self.cells_on_segment(p, q) {
            ids.extend(self.cells[c].iter().copied());
        }
        let mut count = 0;
        let mut ambiguous = false;
        let mut ids: Vec<u32> = ids.into_iter().collect();
        ids.sort_unstable();
        for id in ids {
            let [a, b, c] = self.triangle(id as usize);
            if let Some((bary, _)) = segment_triangle(p, q, a, b, c) {
                count += 1;
                if bary.iter().any(|v| *v < amb_tol) {
                    ambiguous = true;
                }
            } else if !ambiguous {
                // Near miss of a boundary edge of the surface.
                let tri = self.data.triangles[id as usize];
                for (k, (u, v)) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])].into_iter().enumerate() {
                    if self.open_edges.contains(&(u.min(v), u.max(v))) {
                        let (e0, e1) = [(a, b), (b, c), (c, a)][k];
                        if segment_segment_distance(p, q, e0, e1) < amb_tol * edge_scale(a, b, c) {
                            ambiguous = true;
                        }
                    }
                }
            }
        }
        Crossings { count, ambiguous }
    }
}

fn edge_scale(a: P3, b: P3, c: P3) -> f64 {
    norm3(sub3(b, a)).max(norm3(sub3(c, b))).max(norm3(sub3(a, c)))
}

/// Minimum distance between segments `[p1, q1]` and `[p2, q2]`.
pub fn segment_segment_distance(p1: P3, q1: P3, p2: P3, q2: P3) -> f64 {
    let d1 = sub3(q1, p1);
    let d2 = sub3(q2, p2);
    let r = sub3(p1, p2);
    let a = dot3(d1, d1);
    let e = dot3(d2, d2);
    let f = dot3(d2, r);
    let (s, t);
    if a <= 1e-300 && e <= 1e-300 {
        return norm3(r);
    }
    if a <= 1e-300 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot3(d1, r);
        if e <= 1e-300 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot3(d1, d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = lerp3(p1, q1, s);
    let c2 = lerp3(p2, q2, t);
    norm3(sub3(c1, c2))
}

/// Distance from `(x, y)` to a convex polygon given counter-clockwise; zero
/// inside.
pub fn convex_polygon_distance(p: P2, poly: &[P2]) -> f64 {
    let n = poly.len();
    if n == 0 {
        return f64::INFINITY;
    }
    let inside = (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
    });
    if inside {
        return 0.0;
    }
    (0..n)
        .map(|i| segment_distance2(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}
