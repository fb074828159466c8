//! Conforming simplicial meshes of intervals and axis-aligned rectangles.
//!
//! Cells are stored with a fixed local vertex order:
//!
//! - intervals: `[left, right]`, so the signed length is positive;
//! - triangles: counter-clockwise `[a, b, c]` where `c` is the newest vertex and
//!   the edge `(a, b)` opposite to it is the refinement edge used by
//!   newest-vertex bisection.
//!
//! Facets are points in 1D and edges in 2D. An interior facet has exactly two
//! adjacent cells; its unit normal points from the lower-indexed cell towards the
//! higher-indexed one. Boundary facets carry the outward normal.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    vertices: [usize; 2],
    arity: usize,
    owner: usize,
    neighbor: Option<usize>,
    normal: Point,
    measure: f64,
}

impl Facet {
    /// One vertex in 1D, two (sorted ascending) in 2D.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices[..self.arity]
    }

    /// Lower-indexed adjacent cell; the only adjacent cell of a boundary facet.
    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn neighbor(&self) -> Option<usize> {
        self.neighbor
    }

    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }

    pub fn normal(&self) -> Point {
        self.normal
    }

    /// Edge length in 2D, 1 in 1D (point measure).
    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// +1 when the stored normal is outward for `cell`, -1 otherwise.
    pub fn orientation_for(&self, cell: usize) -> f64 {
        if cell == self.owner {
            1.0
        } else {
            -1.0
        }
    }
}

/// Affine cell data, constant per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGeometry {
    pub measure: f64,
    pub diameter: f64,
    pub centroid: Point,
    /// Gradients of the barycentric coordinates, one per local vertex.
    pub bary_grad: [Point; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<usize>,
    cell_facets: Vec<usize>,
    facets: Vec<Facet>,
    geometry: Vec<CellGeometry>,
    boundary_vertex: Vec<bool>,
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

impl Mesh {
    /// Builds a mesh from vertex coordinates and a flat cell list with stride `dim + 1`.
    ///
    /// Rejects non-positive cell measures, unused or out-of-range vertex indices, and
    /// facets shared by more than two cells.
    pub fn from_cells(dim: usize, vertices: Vec<Point>, cells: Vec<usize>) -> Result<Mesh> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidMesh(format!("unsupported dimension {dim}")));
        }
        let stride = dim + 1;
        if cells.is_empty() || cells.len() % stride != 0 {
            return Err(Error::InvalidMesh(format!(
                "cell list length {} is not a positive multiple of {stride}",
                cells.len()
            )));
        }
        if let Some(&bad) = cells.iter().find(|&&v| v >= vertices.len()) {
            return Err(Error::InvalidMesh(format!("vertex index {bad} out of range")));
        }
        let ncells = cells.len() / stride;

        let mut geometry = Vec::with_capacity(ncells);
        for (c, cell) in cells.chunks(stride).enumerate() {
            let g = if dim == 1 {
                interval_geometry(vertices[cell[0]][0], vertices[cell[1]][0])
            } else {
                triangle_geometry(vertices[cell[0]], vertices[cell[1]], vertices[cell[2]])
            };
            if !(g.measure > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} has non-positive measure {}",
                    g.measure
                )));
            }
            geometry.push(g);
        }

        let mut used = vec![false; vertices.len()];
        for &v in &cells {
            used[v] = true;
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} belongs to no cell")));
        }

        let mut lookup: HashMap<[usize; 2], usize> = HashMap::new();
        let mut facets: Vec<Facet> = Vec::new();
        let mut cell_facets = Vec::with_capacity(cells.len());
        for (c, cell) in cells.chunks(stride).enumerate() {
            for local in 0..stride {
                // 1D: the facet at local vertex `local`; 2D: the edge opposite it.
                let (key, arity) = if dim == 1 {
                    ([cell[local], cell[local]], 1)
                } else {
                    let a = cell[(local + 1) % 3];
                    let b = cell[(local + 2) % 3];
                    ([a.min(b), a.max(b)], 2)
                };
                let f = match lookup.get(&key) {
                    Some(&f) => {
                        let facet = &mut facets[f];
                        if facet.neighbor.is_some() {
                            return Err(Error::InvalidMesh(format!(
                                "facet {:?} shared by more than two cells",
                                facet.vertices()
                            )));
                        }
                        facet.neighbor = Some(c);
                        f
                    }
                    None => {
                        let measure = if dim == 1 {
                            1.0
                        } else {
                            norm(sub(vertices[key[1]], vertices[key[0]]))
                        };
                        facets.push(Facet {
                            vertices: key,
                            arity,
                            owner: c,
                            neighbor: None,
                            normal: [0.0, 0.0],
                            measure,
                        });
                        lookup.insert(key, facets.len() - 1);
                        facets.len() - 1
                    }
                };
                cell_facets.push(f);
            }
        }

        for facet in &mut facets {
            let owner = &cells[facet.owner * stride..(facet.owner + 1) * stride];
            facet.normal = if dim == 1 {
                if facet.vertices[0] == owner[1] {
                    [1.0, 0.0]
                } else {
                    [-1.0, 0.0]
                }
            } else {
                let a = vertices[facet.vertices[0]];
                let b = vertices[facet.vertices[1]];
                let t = sub(b, a);
                let len = norm(t);
                let mut n = [t[1] / len, -t[0] / len];
                let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let out = sub(mid, geometry[facet.owner].centroid);
                if n[0] * out[0] + n[1] * out[1] < 0.0 {
                    n = [-n[0], -n[1]];
                }
                n
            };
        }

        let mut boundary_vertex = vec![false; vertices.len()];
        for facet in facets.iter().filter(|f| f.is_boundary()) {
            for &v in facet.vertices() {
                boundary_vertex[v] = true;
            }
        }

        Ok(Mesh {
            dim,
            vertices,
            cells,
            cell_facets,
            facets,
            geometry,
            boundary_vertex,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.geometry.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.cells[c * s..(c + 1) * s]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks(self.dim + 1)
    }

    /// Facet indices of cell `c`, aligned with its local vertices (see module docs).
    pub fn cell_facets(&self, c: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.cell_facets[c * s..(c + 1) * s]
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet(&self, f: usize) -> &Facet {
        &self.facets[f]
    }

    pub fn geometry(&self, c: usize) -> &CellGeometry {
        &self.geometry[c]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn diameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.geometry.iter().map(|g| g.diameter)
    }

    pub fn max_diameter(&self) -> f64 {
        self.diameters().fold(0.0, f64::max)
    }

    pub fn total_measure(&self) -> f64 {
        self.geometry.iter().map(|g| g.measure).sum()
    }

    /// Axis-aligned bounding box `(min, max)` of the vertex set.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    pub fn check_cell(&self, c: usize) -> Result<()> {
        if c < self.num_cells() {
            Ok(())
        } else {
            Err(Error::CellOutOfRange {
                index: c,
                count: self.num_cells(),
            })
        }
    }

    /// Writes the ASCII dump: `dim nv nc nf`, then coordinates, cells, and facets
    /// (`v0 [v1] b|i`).
    pub fn write_dump<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(self.dump_string().as_bytes())
    }

    pub fn dump_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {} {}",
            self.dim,
            self.num_vertices(),
            self.num_cells(),
            self.num_facets()
        );
        for p in &self.vertices {
            if self.dim == 1 {
                let _ = writeln!(s, "{}", p[0]);
            } else {
                let _ = writeln!(s, "{} {}", p[0], p[1]);
            }
        }
        for cell in self.cells() {
            let line: Vec<String> = cell.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        for f in &self.facets {
            let line: Vec<String> = f.vertices().iter().map(|v| v.to_string()).collect();
            let tag = if f.is_boundary() { "b" } else { "i" };
            let _ = writeln!(s, "{} {tag}", line.join(" "));
        }
        s
    }
}

fn interval_geometry(x0: f64, x1: f64) -> CellGeometry {
    let len = x1 - x0;
    CellGeometry {
        measure: len,
        diameter: len.abs(),
        centroid: [0.5 * (x0 + x1), 0.0],
        bary_grad: [[-1.0 / len, 0.0], [1.0 / len, 0.0], [0.0, 0.0]],
    }
}

fn triangle_geometry(a: Point, b: Point, c: Point) -> CellGeometry {
    let twice_area = cross(sub(b, a), sub(c, a));
    // grad(lambda_i) = rot90(opposite edge) / (2|T|)
    let grad = |p: Point, q: Point| [(p[1] - q[1]) / twice_area, (q[0] - p[0]) / twice_area];
    CellGeometry {
        measure: 0.5 * twice_area,
        diameter: norm(sub(b, a)).max(norm(sub(c, b))).max(norm(sub(a, c))),
        centroid: [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0],
        bary_grad: [grad(b, c), grad(c, a), grad(a, b)],
    }
}

/// Uniform partition of `[a, b]` into `n` cells.
pub fn build_interval_mesh(a: f64, b: f64, n: usize) -> Result<Mesh> {
    if !(a < b) {
        return Err(Error::InvalidMesh(format!("interval requires a < b, got [{a}, {b}]")));
    }
    if n == 0 {
        return Err(Error::InvalidMesh("interval mesh needs at least one cell".into()));
    }
    let h = (b - a) / n as f64;
    let vertices = (0..=n)
        .map(|i| [if i == n { b } else { a + i as f64 * h }, 0.0])
        .collect();
    let cells = (0..n).flat_map(|i| [i, i + 1]).collect();
    Mesh::from_cells(1, vertices, cells)
}

/// `nx` by `ny` grid of rectangles, each split along its lower-left to upper-right
/// diagonal. The diagonal is the refinement edge of both halves.
pub fn build_rectangle_mesh(lo: Point, hi: Point, nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidMesh("rectangle mesh needs n >= 1 in each direction".into()));
    }
    if !(lo[0] < hi[0] && lo[1] < hi[1]) {
        return Err(Error::InvalidMesh(format!("degenerate rectangle {lo:?}..{hi:?}")));
    }
    let coord = |i: usize, n: usize, l: f64, h: f64| {
        if i == n {
            h
        } else {
            l + (h - l) * i as f64 / n as f64
        }
    };
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([coord(i, nx, lo[0], hi[0]), coord(j, ny, lo[1], hi[1])]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(6 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            cells.extend_from_slice(&[v11, v00, v10]);
            cells.extend_from_slice(&[v00, v11, v01]);
        }
    }
    Mesh::from_cells(2, vertices, cells)
}

pub fn build_unit_square_mesh(n: usize) -> Result<Mesh> {
    build_rectangle_mesh([0.0, 0.0], [1.0, 1.0], n, n)
}

/// Refines the marked cells. Intervals are bisected; triangles use newest-vertex
/// bisection, with neighbouring cells bisected as needed so that no hanging
/// vertices remain.
pub fn refine(mesh: &Mesh, marked: &[usize]) -> Result<Mesh> {
    for &c in marked {
        mesh.check_cell(c)?;
    }
    if mesh.dim == 1 {
        refine_intervals(mesh, marked)
    } else {
        refine_triangles(mesh, marked)
    }
}

pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let all: Vec<usize> = (0..mesh.num_cells()).collect();
    refine(mesh, &all)
}

fn refine_intervals(mesh: &Mesh, marked: &[usize]) -> Result<Mesh> {
    let mut flag = vec![false; mesh.num_cells()];
    for &c in marked {
        flag[c] = true;
    }
    let mut vertices = mesh.vertices.clone();
    let mut cells = Vec::with_capacity(2 * mesh.cells.len());
    for (c, cell) in mesh.cells().enumerate() {
        if flag[c] {
            let m = vertices.len();
            vertices.push([0.5 * (vertices[cell[0]][0] + vertices[cell[1]][0]), 0.0]);
            cells.extend_from_slice(&[cell[0], m, m, cell[1]]);
        } else {
            cells.extend_from_slice(cell);
        }
    }
    Mesh::from_cells(1, vertices, cells)
}

fn edge_key(a: usize, b: usize) -> [usize; 2] {
    [a.min(b), a.max(b)]
}

fn refine_triangles(mesh: &Mesh, marked: &[usize]) -> Result<Mesh> {
    let mut marked_edges: HashMap<[usize; 2], Option<usize>> = HashMap::new();
    for &c in marked {
        let t = mesh.cell(c);
        marked_edges.insert(edge_key(t[0], t[1]), None);
    }
    // Closure: a cell touching a marked edge must also split its refinement edge.
    loop {
        let mut changed = false;
        for t in mesh.cells() {
            let refinement = edge_key(t[0], t[1]);
            if marked_edges.contains_key(&refinement) {
                continue;
            }
            if marked_edges.contains_key(&edge_key(t[1], t[2]))
                || marked_edges.contains_key(&edge_key(t[2], t[0]))
            {
                marked_edges.insert(refinement, None);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertices = mesh.vertices.clone();
    for t in mesh.cells() {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            if let Some(slot) = marked_edges.get_mut(&edge_key(a, b)) {
                if slot.is_none() {
                    let (p, q) = (vertices[a], vertices[b]);
                    vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                    *slot = Some(vertices.len() - 1);
                }
            }
        }
    }

    fn bisect(t: [usize; 3], edges: &HashMap<[usize; 2], Option<usize>>, out: &mut Vec<usize>) {
        match edges.get(&edge_key(t[0], t[1])) {
            Some(&Some(m)) => {
                bisect([t[2], t[0], m], edges, out);
                bisect([t[1], t[2], m], edges, out);
            }
            _ => out.extend_from_slice(&t),
        }
    }

    let mut cells = Vec::with_capacity(mesh.cells.len() * 2);
    for t in mesh.cells() {
        bisect([t[0], t[1], t[2]], &marked_edges, &mut cells);
    }
    Mesh::from_cells(2, vertices, cells)
}
