//! Structured triangular meshes on rectangles and L-shaped footprints.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryTag {
    /// Clamped support.
    GammaU,
    /// Loaded strip; also carries the level set Dirichlet value 1.
    GammaT,
    /// Mechanism input port.
    GammaA,
    /// Mechanism output port.
    GammaB,
    GammaVoidA,
    GammaVoidB,
    /// Mirror plane of a half model; zero normal displacement.
    Symmetry,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Axis-aligned piece of the outline: the line `axis = at`, restricted to `[from, to)` along the
/// other coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySegment {
    pub tag: BoundaryTag,
    pub axis: Axis,
    pub at: f64,
    pub from: f64,
    pub to: f64,
}

impl BoundarySegment {
    pub fn new(tag: BoundaryTag, axis: Axis, at: f64, from: f64, to: f64) -> Self {
        BoundarySegment {
            tag,
            axis,
            at,
            from,
            to,
        }
    }

    fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        let (fixed, free) = match self.axis {
            Axis::X => (p[0], p[1]),
            Axis::Y => (p[1], p[0]),
        };
        (fixed - self.at).abs() <= tol && free >= self.from - tol && free < self.to + tol
    }

    fn overlaps(&self, other: &BoundarySegment, tol: f64) -> bool {
        self.axis == other.axis
            && (self.at - other.at).abs() <= tol
            && self.from.max(other.from) < self.to.min(other.to) - tol
    }
}

/// Axis-aligned box, used to mark fixed solid elements by centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectRegion {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl RectRegion {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Design,
    FixedSolid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Cell layout of the generating grid; `cells[j * nx + i]` holds the two triangles of a cell, or
/// `None` where the footprint excludes it.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub cells: Vec<Option<[usize; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    regions: Vec<Region>,
    grid: Option<StructuredGrid>,
    analytic_area: f64,
}

pub fn generate_rect_mesh(width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(width > 0.0 && height > 0.0) || !width.is_finite() || !height.is_finite() {
        return Err(Error::invalid(format!(
            "rectangle dimensions must be positive, got {width} x {height}"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(format!(
            "cell counts must be at least 1, got {nx} x {ny}"
        )));
    }
    Ok(build_grid_mesh(
        width / nx as f64,
        height / ny as f64,
        nx,
        ny,
        width * height,
        |_, _| true,
    ))
}

/// Square of side `l` with the upper-right `(1 - arm_fraction) * l` square removed, on an `n x n`
/// cell grid.
pub fn generate_lbracket_mesh(l: f64, arm_fraction: f64, n: usize) -> Result<Mesh> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::invalid(format!(
            "L-bracket size must be positive, got {l}"
        )));
    }
    if !(arm_fraction > 0.0 && arm_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "arm fraction must lie in (0, 1), got {arm_fraction}"
        )));
    }
    let corner = arm_fraction * n as f64;
    let ci = corner.round();
    if n == 0 || (corner - ci).abs() > 1e-9 * n as f64 || ci < 1.0 || ci as usize >= n {
        return Err(Error::invalid(format!(
            "re-entrant corner at {arm_fraction} * L does not fall on a grid line of {n} cells"
        )));
    }
    let ci = ci as usize;
    let h = l / n as f64;
    let area = l * l * (1.0 - (1.0 - arm_fraction).powi(2));
    Ok(build_grid_mesh(h, h, n, n, area, |i, j| i < ci || j < ci))
}

fn build_grid_mesh(
    dx: f64,
    dy: f64,
    nx: usize,
    ny: usize,
    analytic_area: f64,
    keep: impl Fn(usize, usize) -> bool,
) -> Mesh {
    let stride = nx + 1;
    let mut used = vec![false; stride * (ny + 1)];
    for j in 0..ny {
        for i in 0..nx {
            if keep(i, j) {
                for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                    used[b * stride + a] = true;
                }
            }
        }
    }
    let mut index = vec![usize::MAX; used.len()];
    let mut nodes = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if used[j * stride + i] {
                index[j * stride + i] = nodes.len();
                nodes.push([i as f64 * dx, j as f64 * dy]);
            }
        }
    }
    let mut triangles = Vec::new();
    let mut cells = vec![None; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let a = index[j * stride + i];
            let b = index[j * stride + i + 1];
            let c = index[(j + 1) * stride + i + 1];
            let d = index[(j + 1) * stride + i];
            let t = triangles.len();
            // Alternating diagonals give the union-jack pattern.
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
            cells[j * nx + i] = Some([t, t + 1]);
        }
    }
    let boundary_edges = extract_boundary(&triangles);
    let regions = vec![Region::Design; triangles.len()];
    Mesh {
        nodes,
        triangles,
        boundary_edges,
        regions,
        grid: Some(StructuredGrid {
            nx,
            ny,
            dx,
            dy,
            cells,
        }),
        analytic_area,
    }
}

fn extract_boundary(triangles: &[[usize; 3]]) -> Vec<BoundaryEdge> {
    let mut count: BTreeMap<(usize, usize), ([usize; 2], usize)> = BTreeMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            count.entry((a.min(b), a.max(b))).or_insert(([a, b], 0)).1 += 1;
        }
    }
    count
        .into_values()
        .filter(|&(_, c)| c == 1)
        .map(|(nodes, _)| BoundaryEdge {
            nodes,
            tag: BoundaryTag::Free,
        })
        .collect()
}

pub fn tag_boundaries(mut mesh: Mesh, segments: &[BoundarySegment]) -> Result<Mesh> {
    mesh.tag(segments)?;
    Ok(mesh)
}

pub fn triangle_geometry(mesh: &Mesh, elem: usize) -> Result<TriangleGeometry> {
    mesh.geometry(elem)
}

/// Area and P1 shape-function gradients of a triangle given by its vertices.
pub fn triangle_geometry_of(p: [[f64; 2]; 3]) -> Result<TriangleGeometry> {
    let [p0, p1, p2] = p;
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let scale = [p0, p1, p2]
        .iter()
        .flat_map(|q| [(q[0] - p0[0]).abs(), (q[1] - p0[1]).abs()])
        .fold(0.0_f64, f64::max);
    if !(det > 1e-14 * scale * scale) {
        return Err(Error::degenerate(format!(
            "triangle with signed double area {det:e}"
        )));
    }
    let g0 = [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det];
    let g1 = [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det];
    let g2 = [-(g0[0] + g1[0]), -(g0[1] + g1[1])];
    Ok(TriangleGeometry {
        area: 0.5 * det,
        grads: [g0, g1, g2],
    })
}

impl Mesh {
    /// Builds a mesh from raw arrays; boundary edges are derived and tagged Free.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        analytic_area: f64,
    ) -> Result<Mesh> {
        for t in &triangles {
            if t.iter().any(|&v| v >= nodes.len()) {
                return Err(Error::invalid(format!(
                    "triangle {t:?} references a missing node"
                )));
            }
        }
        let boundary_edges = extract_boundary(&triangles);
        let regions = vec![Region::Design; triangles.len()];
        let mesh = Mesh {
            nodes,
            triangles,
            boundary_edges,
            regions,
            grid: None,
            analytic_area,
        };
        for e in 0..mesh.n_elements() {
            mesh.geometry(e)?;
        }
        Ok(mesh)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn grid(&self) -> Option<&StructuredGrid> {
        self.grid.as_ref()
    }

    pub fn analytic_area(&self) -> f64 {
        self.analytic_area
    }

    pub fn vertices(&self, e: usize) -> [[f64; 2]; 3] {
        let t = self.triangles[e];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]
    }

    pub fn geometry(&self, e: usize) -> Result<TriangleGeometry> {
        if e >= self.triangles.len() {
            return Err(Error::invalid(format!(
                "element {e} out of range ({} elements)",
                self.triangles.len()
            )));
        }
        triangle_geometry_of(self.vertices(e))
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let v = self.vertices(e);
        [
            (v[0][0] + v[1][0] + v[2][0]) / 3.0,
            (v[0][1] + v[1][1] + v[2][1]) / 3.0,
        ]
    }

    /// Sum of element areas.
    pub fn area(&self) -> f64 {
        (0..self.n_elements())
            .map(|e| self.geometry(e).map(|g| g.area).unwrap_or(0.0))
            .sum()
    }

    /// Bounding box as `[xmin, ymin, xmax, ymax]`.
    pub fn bounds(&self) -> [f64; 4] {
        self.nodes
            .iter()
            .fold([f64::MAX, f64::MAX, f64::MIN, f64::MIN], |b, p| {
                [
                    b[0].min(p[0]),
                    b[1].min(p[1]),
                    b[2].max(p[0]),
                    b[3].max(p[1]),
                ]
            })
    }

    pub fn length_scale(&self) -> f64 {
        let b = self.bounds();
        (b[2] - b[0]).max(b[3] - b[1])
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let [a, b] = edge.nodes;
        let (p, q) = (self.nodes[a], self.nodes[b]);
        ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.edges_with_tag(tag).next().is_some()
    }

    /// Sorted, deduplicated nodes touched by edges carrying `tag`.
    pub fn nodes_with_tag(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self.edges_with_tag(tag).flat_map(|e| e.nodes).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn tag_length(&self, tag: BoundaryTag) -> f64 {
        self.edges_with_tag(tag).map(|e| self.edge_length(e)).sum()
    }

    pub fn tag(&mut self, segments: &[BoundarySegment]) -> Result<()> {
        let tol = 1e-9 * self.length_scale();
        for (i, a) in segments.iter().enumerate() {
            if !(a.from < a.to) {
                return Err(Error::invalid(format!(
                    "segment {i} has an empty interval [{}, {})",
                    a.from, a.to
                )));
            }
            for b in &segments[i + 1..] {
                if a.overlaps(b, tol) {
                    return Err(Error::invalid(format!(
                        "segments {:?} and {:?} overlap",
                        a.tag, b.tag
                    )));
                }
            }
        }
        let mut tags = Vec::with_capacity(self.boundary_edges.len());
        for edge in &self.boundary_edges {
            let [p, q] = edge.nodes.map(|n| self.nodes[n]);
            let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            let mut hit = segments.iter().filter(|s| s.contains(mid, tol));
            let tag = match (hit.next(), hit.next()) {
                (None, _) => BoundaryTag::Free,
                (Some(s), None) => s.tag,
                (Some(s), Some(t)) => {
                    return Err(Error::invalid(format!(
                        "edge at ({}, {}) matched by both {:?} and {:?}",
                        mid[0], mid[1], s.tag, t.tag
                    )))
                }
            };
            tags.push(tag);
        }
        for (edge, tag) in self.boundary_edges.iter_mut().zip(tags) {
            edge.tag = tag;
        }
        Ok(())
    }

    /// Marks every element whose centroid lies in one of `rects` as fixed solid.
    pub fn mark_fixed_solid(&mut self, rects: &[RectRegion]) {
        for e in 0..self.n_elements() {
            let c = self.centroid(e);
            self.regions[e] = if rects.iter().any(|r| r.contains(c)) {
                Region::FixedSolid
            } else {
                Region::Design
            };
        }
    }

    pub fn is_fixed(&self, e: usize) -> bool {
        self.regions[e] == Region::FixedSolid
    }

    /// Nodes belonging to at least one fixed solid element.
    pub fn fixed_solid_nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.n_elements())
            .filter(|&e| self.is_fixed(e))
            .flat_map(|e| self.triangles[e])
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Per node, the total area of the surrounding elements.
    pub fn node_patch_areas(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n_nodes()];
        for (e, t) in self.triangles.iter().enumerate() {
            let a = self.geometry(e).map(|g| g.area).unwrap_or(0.0);
            for &n in t {
                s[n] += a;
            }
        }
        s
    }

    /// Elements sharing an edge with each element.
    pub fn element_neighbors(&self) -> Vec<Vec<usize>> {
        let mut owner: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (e, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                owner.entry((a.min(b), a.max(b))).or_default().push(e);
            }
        }
        let mut adj = vec![Vec::new(); self.n_elements()];
        for pair in owner.values().filter(|v| v.len() == 2) {
            adj[pair[0]].push(pair[1]);
            adj[pair[1]].push(pair[0]);
        }
        adj
    }

    /// Legacy VTK unstructured grid with optional nodal scalars.
    pub fn write_vtk<W: Write>(
        &self,
        mut w: W,
        point_data: &[(&str, &[f64])],
    ) -> std::io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "wavetopo mesh")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.n_nodes())?;
        for p in &self.nodes {
            writeln!(w, "{:.17e} {:.17e} 0", p[0], p[1])?;
        }
        writeln!(w, "CELLS {} {}", self.n_elements(), 4 * self.n_elements())?;
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "CELL_TYPES {}", self.n_elements())?;
        for _ in &self.triangles {
            writeln!(w, "5")?;
        }
        if !point_data.is_empty() {
            writeln!(w, "POINT_DATA {}", self.n_nodes())?;
            for (name, values) in point_data {
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for v in values.iter() {
                    writeln!(w, "{v:.17e}")?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_counts() {
        let m = generate_rect_mesh(1.0, 0.5, 80, 40).unwrap();
        assert_eq!(m.n_nodes(), 3321);
        assert_eq!(m.n_elements(), 6400);
        let single = generate_rect_mesh(1.0, 1.0, 1, 1).unwrap();
        assert_eq!((single.n_nodes(), single.n_elements()), (4, 2));
        assert!((single.area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(
            generate_rect_mesh(1.0, 1.0, 0, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(generate_rect_mesh(-1.0, 1.0, 2, 2).is_err());
        assert!(generate_lbracket_mesh(1.5, 1.0, 5).is_err());
        assert!(generate_lbracket_mesh(1.5, 0.33, 5).is_err());
    }

    #[test]
    fn lbracket_area_and_corner() {
        let m = generate_lbracket_mesh(1.5, 0.4, 5).unwrap();
        assert!((m.area() - 1.44).abs() < 1e-10 * 1.44);
        for n in [5, 10, 25, 60] {
            let m = generate_lbracket_mesh(1.5, 0.4, n).unwrap();
            let c = 0.4 * 1.5;
            assert!(m
                .nodes()
                .iter()
                .any(|p| (p[0] - c).abs() < 1e-12 && (p[1] - c).abs() < 1e-12));
            assert!((m.area() - m.analytic_area()).abs() <= 1e-10 * m.analytic_area());
        }
    }

    #[test]
    fn unit_right_triangle() {
        let g = triangle_geometry_of([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(g.area, 0.5);
        assert_eq!(g.grads, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
        let bad = triangle_geometry_of([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]);
        assert!(matches!(bad, Err(Error::NumericDegeneracy(_))));
    }

    #[test]
    fn boundary_edges_have_one_owner() {
        let m = generate_lbracket_mesh(1.5, 0.4, 10).unwrap();
        // Outline length of the L footprint is 4L.
        let total: f64 = m.boundary_edges().iter().map(|e| m.edge_length(e)).sum();
        assert!((total - 6.0).abs() < 1e-12);
        let adj = m.element_neighbors();
        let boundary_sides: usize = adj.iter().map(|a| 3 - a.len()).sum();
        assert_eq!(boundary_sides, m.boundary_edges().len());
    }

    #[test]
    fn tagging() {
        let m = generate_rect_mesh(1.0, 0.5, 8, 4).unwrap();
        let untagged = tag_boundaries(m.clone(), &[]).unwrap();
        assert!(untagged
            .boundary_edges()
            .iter()
            .all(|e| e.tag == BoundaryTag::Free));

        let segments = [
            BoundarySegment::new(BoundaryTag::GammaU, Axis::X, 0.0, 0.0, 0.5),
            BoundarySegment::new(BoundaryTag::GammaT, Axis::X, 1.0, 0.125, 0.375),
        ];
        let t = tag_boundaries(m.clone(), &segments).unwrap();
        assert_eq!(t.edges_with_tag(BoundaryTag::GammaU).count(), 4);
        assert!((t.tag_length(BoundaryTag::GammaT) - 0.25).abs() < 1e-12);
        let again = tag_boundaries(m.clone(), &segments).unwrap();
        assert_eq!(t.boundary_edges(), again.boundary_edges());

        let clash = [
            BoundarySegment::new(BoundaryTag::GammaU, Axis::X, 0.0, 0.0, 0.5),
            BoundarySegment::new(BoundaryTag::GammaT, Axis::X, 0.0, 0.2, 0.3),
        ];
        assert!(tag_boundaries(m, &clash).is_err());
    }

    #[test]
    fn union_jack_is_mirror_symmetric() {
        let m = generate_rect_mesh(2.0, 1.0, 8, 4).unwrap();
        let key = |p: [f64; 2]| ((p[0] * 1e6).round() as i64, (p[1] * 1e6).round() as i64);
        let mut edges: Vec<_> = Vec::new();
        let mut mirrored: Vec<_> = Vec::new();
        for t in m.triangles() {
            for k in 0..3 {
                let (a, b) = (m.nodes()[t[k]], m.nodes()[t[(k + 1) % 3]]);
                let e = [key(a), key(b)];
                edges.push(if e[0] < e[1] { e } else { [e[1], e[0]] });
                let (ma, mb) = (key([a[0], 1.0 - a[1]]), key([b[0], 1.0 - b[1]]));
                mirrored.push(if ma < mb { [ma, mb] } else { [mb, ma] });
            }
        }
        edges.sort();
        edges.dedup();
        mirrored.sort();
        mirrored.dedup();
        assert_eq!(edges, mirrored);
    }
}
