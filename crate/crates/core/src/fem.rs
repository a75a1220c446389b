//! P1 assembly: scalar mass and Laplacian, plane elasticity, boundary loads and springs,
//! Dirichlet elimination.

use std::ops::{Deref, DerefMut};

use crate::elasticity::{constitutive_matrix, Material};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh, TriangleGeometry};
use crate::sparse::{CsrMatrix, ElementAssembler};

/// One value per mesh node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodalField(pub Vec<f64>);

impl NodalField {
    pub fn constant(n: usize, value: f64) -> Self {
        NodalField(vec![value; n])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        NodalField(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl Deref for NodalField {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for NodalField {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

impl From<Vec<f64>> for NodalField {
    fn from(v: Vec<f64>) -> Self {
        NodalField(v)
    }
}

pub fn element_mass(area: f64) -> [[f64; 3]; 3] {
    let (d, o) = (area / 6.0, area / 12.0);
    [[d, o, o], [o, d, o], [o, o, d]]
}

pub fn element_laplacian(g: &TriangleGeometry) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = g.area * (g.grads[a][0] * g.grads[b][0] + g.grads[a][1] * g.grads[b][1]);
        }
    }
    k
}

/// Strain-displacement matrix for Voigt strain `(ε_xx, ε_yy, γ_xy)` and dofs
/// `(u0x, u0y, u1x, u1y, u2x, u2y)`.
pub fn strain_matrix(g: &TriangleGeometry) -> [[f64; 6]; 3] {
    let mut b = [[0.0; 6]; 3];
    for a in 0..3 {
        let [gx, gy] = g.grads[a];
        b[0][2 * a] = gx;
        b[1][2 * a + 1] = gy;
        b[2][2 * a] = gy;
        b[2][2 * a + 1] = gx;
    }
    b
}

pub fn element_stiffness(g: &TriangleGeometry, d: &[[f64; 3]; 3]) -> [[f64; 6]; 6] {
    let b = strain_matrix(g);
    let mut db = [[0.0; 6]; 3];
    for i in 0..3 {
        for j in 0..6 {
            db[i][j] = (0..3).map(|k| d[i][k] * b[k][j]).sum();
        }
    }
    let mut k = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            k[i][j] = g.area * (0..3).map(|m| b[m][i] * db[m][j]).sum::<f64>();
        }
    }
    k
}

fn geometries(mesh: &Mesh) -> Result<Vec<TriangleGeometry>> {
    (0..mesh.n_elements()).map(|e| mesh.geometry(e)).collect()
}

fn scalar_assembler(mesh: &Mesh) -> Result<ElementAssembler> {
    let dofs: Vec<Vec<usize>> = mesh.triangles().iter().map(|t| t.to_vec()).collect();
    ElementAssembler::new(mesh.n_nodes(), 3, &dofs)
}

pub(crate) fn vector_dofs(mesh: &Mesh) -> Vec<Vec<usize>> {
    mesh.triangles()
        .iter()
        .map(|t| t.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect())
        .collect()
}

pub fn assemble_mass(mesh: &Mesh) -> Result<CsrMatrix> {
    let geo = geometries(mesh)?;
    let asm = scalar_assembler(mesh)?;
    Ok(asm.assemble(|e, out| {
        let m = element_mass(geo[e].area);
        for a in 0..3 {
            out[3 * a..3 * a + 3].copy_from_slice(&m[a]);
        }
    }))
}

pub fn assemble_laplacian(mesh: &Mesh) -> Result<CsrMatrix> {
    let geo = geometries(mesh)?;
    let asm = scalar_assembler(mesh)?;
    Ok(asm.assemble(|e, out| {
        let k = element_laplacian(&geo[e]);
        for a in 0..3 {
            out[3 * a..3 * a + 3].copy_from_slice(&k[a]);
        }
    }))
}

/// Row sums of a mass matrix.
pub fn lump_mass(m: &CsrMatrix) -> Result<Vec<f64>> {
    let d = m.row_sums();
    if let Some((i, v)) = d.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::degenerate(format!("lumped mass {v:e} at node {i}")));
    }
    Ok(d)
}

/// Nodal quadrature weights `Σ area/3` over the elements accepted by `keep`.
pub fn lumped_weights(mesh: &Mesh, keep: impl Fn(usize) -> bool) -> Result<Vec<f64>> {
    let mut w = vec![0.0; mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        if keep(e) {
            let a = mesh.geometry(e)?.area / 3.0;
            for &n in &mesh.triangles()[e] {
                w[n] += a;
            }
        }
    }
    Ok(w)
}

/// Plane elasticity stiffness with element-wise scaling `tau_elem` in `[ersatz_floor, 1]`.
pub fn assemble_elasticity(
    mesh: &Mesh,
    material: &Material,
    tau_elem: &[f64],
    ersatz_floor: f64,
) -> Result<CsrMatrix> {
    if tau_elem.len() != mesh.n_elements() {
        return Err(Error::invalid(format!(
            "{} τ values for {} elements",
            tau_elem.len(),
            mesh.n_elements()
        )));
    }
    if let Some(t) = tau_elem
        .iter()
        .find(|&&t| !(t >= ersatz_floor - 1e-12 && t <= 1.0 + 1e-12))
    {
        return Err(Error::invalid(format!(
            "τ = {t} outside [{ersatz_floor}, 1]"
        )));
    }
    Ok(ElasticityAssembler::new(mesh, material)?.assemble(tau_elem))
}

/// Reusable element stiffness blocks and pattern for repeated assembly.
#[derive(Debug, Clone)]
pub struct ElasticityAssembler {
    blocks: Vec<[[f64; 6]; 6]>,
    asm: ElementAssembler,
}

impl ElasticityAssembler {
    pub fn new(mesh: &Mesh, material: &Material) -> Result<Self> {
        let d = constitutive_matrix(material)?;
        let blocks = geometries(mesh)?
            .iter()
            .map(|g| element_stiffness(g, &d))
            .collect();
        let asm = ElementAssembler::new(2 * mesh.n_nodes(), 6, &vector_dofs(mesh))?;
        Ok(ElasticityAssembler { blocks, asm })
    }

    /// No range check on `tau_elem`; linear in it.
    pub fn assemble(&self, tau_elem: &[f64]) -> CsrMatrix {
        self.asm.assemble(|e, out| {
            let t = tau_elem[e];
            for i in 0..6 {
                for j in 0..6 {
                    out[6 * i + j] = t * self.blocks[e][i][j];
                }
            }
        })
    }
}

/// Consistent nodal forces of a uniform traction (force per length) on the edges carrying `tag`.
pub fn assemble_boundary_load(
    mesh: &Mesh,
    traction: [f64; 2],
    tag: BoundaryTag,
) -> Result<Vec<f64>> {
    if !mesh.has_tag(tag) {
        return Err(Error::invalid(format!("no boundary edges tagged {tag:?}")));
    }
    let mut f = vec![0.0; 2 * mesh.n_nodes()];
    for edge in mesh.edges_with_tag(tag) {
        let half = 0.5 * mesh.edge_length(edge);
        for &n in &edge.nodes {
            f[2 * n] += traction[0] * half;
            f[2 * n + 1] += traction[1] * half;
        }
    }
    Ok(f)
}

/// `∫ k (r ⊗ r) u · v dΓ` over the edges carrying `tag`, with the consistent edge mass.
pub fn assemble_boundary_spring(
    mesh: &Mesh,
    tag: BoundaryTag,
    k: f64,
    r: [f64; 2],
) -> Result<CsrMatrix> {
    if !mesh.has_tag(tag) {
        return Err(Error::invalid(format!("no boundary edges tagged {tag:?}")));
    }
    let rr = [[r[0] * r[0], r[0] * r[1]], [r[1] * r[0], r[1] * r[1]]];
    let mut t = Vec::new();
    for edge in mesh.edges_with_tag(tag) {
        let len = mesh.edge_length(edge);
        for (a, &na) in edge.nodes.iter().enumerate() {
            for (b, &nb) in edge.nodes.iter().enumerate() {
                let w = if a == b { len / 3.0 } else { len / 6.0 };
                for p in 0..2 {
                    for q in 0..2 {
                        t.push((2 * na + p, 2 * nb + q, k * w * rr[p][q]));
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(2 * mesh.n_nodes(), 2 * mesh.n_nodes(), &t)?.with_symmetry(true))
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constraints: Vec<(usize, f64)>,
}

/// Validated, deduplicated constraint list sorted by dof.
pub fn normalize_constraints(n: usize, constraints: &[(usize, f64)]) -> Result<Vec<(usize, f64)>> {
    let mut c = constraints.to_vec();
    c.sort_by_key(|a| a.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(c.len());
    for (dof, val) in c {
        if dof >= n {
            return Err(Error::invalid(format!(
                "constrained dof {dof} out of range ({n} dofs)"
            )));
        }
        if !val.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite prescribed value at dof {dof}"
            )));
        }
        match out.last() {
            Some(&(d, v)) if d == dof => {
                if v != val {
                    return Err(Error::invalid(format!(
                        "dof {dof} prescribed both {v} and {val}"
                    )));
                }
            }
            _ => out.push((dof, val)),
        }
    }
    Ok(out)
}

/// Symmetric elimination in place: returns the lifted right-hand side.
pub(crate) fn eliminate(
    matrix: &mut CsrMatrix,
    rhs: &[f64],
    constraints: &[(usize, f64)],
) -> Vec<f64> {
    let n = matrix.nrows();
    let mut fixed = vec![false; n];
    let mut g = vec![0.0; n];
    for &(d, v) in constraints {
        fixed[d] = true;
        g[d] = v;
    }
    let lift = matrix.mul_vec(&g);
    let mut b: Vec<f64> = rhs.iter().zip(&lift).map(|(r, l)| r - l).collect();
    for &(d, v) in constraints {
        b[d] = v;
    }
    let row_ptr = matrix.row_ptr().to_vec();
    let cols = matrix.col_indices().to_vec();
    let vals = matrix.values_mut();
    for i in 0..n {
        for k in row_ptr[i]..row_ptr[i + 1] {
            let j = cols[k];
            if fixed[i] || fixed[j] {
                vals[k] = if i == j { 1.0 } else { 0.0 };
            }
        }
    }
    b
}

pub fn apply_dirichlet(system: LinearSystem) -> Result<LinearSystem> {
    let LinearSystem {
        mut matrix,
        rhs,
        constraints,
    } = system;
    if !matrix.is_square() || rhs.len() != matrix.nrows() {
        return Err(Error::invalid(
            "system matrix and right-hand side do not conform",
        ));
    }
    let constraints = normalize_constraints(matrix.nrows(), &constraints)?;
    for &(d, _) in &constraints {
        if matrix.row(d).0.binary_search(&d).is_err() {
            let t = vec![(d, d, 0.0)];
            let sym = matrix.is_symmetric();
            matrix = matrix
                .add_scaled(
                    &CsrMatrix::from_triplets(matrix.nrows(), matrix.ncols(), &t)?,
                    1.0,
                )?
                .with_symmetry(sym);
        }
    }
    let rhs = eliminate(&mut matrix, &rhs, &constraints);
    Ok(LinearSystem {
        matrix,
        rhs,
        constraints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elasticity::PlaneMode;
    use crate::mesh::generate_rect_mesh;
    use crate::solver::solve_linear;

    #[test]
    fn mass_and_laplacian_basics() {
        let mesh = generate_rect_mesh(1.0, 1.0, 4, 4).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        let b = assemble_laplacian(&mesh).unwrap();
        assert_eq!(m.symmetry_error(), 0.0);
        assert_eq!(b.symmetry_error(), 0.0);
        let ones = vec![1.0; mesh.n_nodes()];
        assert!((m.quad_form(&ones) - 1.0).abs() < 1e-14);
        let lumped = lump_mass(&m).unwrap();
        assert!((lumped.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // Union-jack grids have two interior patch shapes: eight triangles where diagonals
        // meet, four elsewhere.
        let (hub, plain) = (lumped[6], lumped[7]);
        assert!((lumped[8] - hub).abs() < 1e-15 && (lumped[12] - hub).abs() < 1e-15);
        assert!((lumped[11] - plain).abs() < 1e-15 && (2.0 * plain - hub).abs() < 1e-15);
    }

    #[test]
    fn boundary_load_resultant() {
        use crate::mesh::{Axis, BoundarySegment};
        let mesh = generate_rect_mesh(1.0, 1.0, 10, 10).unwrap();
        let mesh = crate::mesh::tag_boundaries(
            mesh,
            &[BoundarySegment::new(
                BoundaryTag::GammaT,
                Axis::X,
                1.0,
                0.4,
                0.5,
            )],
        )
        .unwrap();
        let f = assemble_boundary_load(&mesh, [0.0, -1e3], BoundaryTag::GammaT).unwrap();
        let fy: f64 = f.iter().skip(1).step_by(2).sum();
        assert!((fy + 100.0).abs() < 1e-10);
        let zero = assemble_boundary_load(&mesh, [0.0, 0.0], BoundaryTag::GammaT).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert!(assemble_boundary_load(&mesh, [1.0, 0.0], BoundaryTag::GammaU).is_err());
    }

    #[test]
    fn dirichlet_elimination() {
        let a = CsrMatrix::from_dense(&[
            vec![4.0, -1.0, 0.0],
            vec![-1.0, 4.0, -1.0],
            vec![0.0, -1.0, 4.0],
        ])
        .with_symmetry(true);
        let sys = LinearSystem {
            matrix: a.clone(),
            rhs: vec![1.0, 2.0, 3.0],
            constraints: vec![(0, 0.5), (0, 0.5)],
        };
        let out = apply_dirichlet(sys).unwrap();
        assert_eq!(out.matrix.get(0, 0), 1.0);
        assert_eq!(out.matrix.get(1, 0), 0.0);
        let x = solve_linear(&out.matrix, &out.rhs).unwrap();
        assert_eq!(x[0], 0.5);
        // Free equations of the original system hold.
        let r = a.mul_vec(&x);
        assert!((r[1] - 2.0).abs() < 1e-12 && (r[2] - 3.0).abs() < 1e-12);

        let zero = apply_dirichlet(LinearSystem {
            matrix: a.clone(),
            rhs: vec![1.0, 2.0, 3.0],
            constraints: vec![(0, 0.0)],
        })
        .unwrap();
        assert_eq!(zero.rhs, vec![0.0, 2.0, 3.0]);

        let all = apply_dirichlet(LinearSystem {
            matrix: a.clone(),
            rhs: vec![0.0; 3],
            constraints: vec![(0, 1.0), (1, 2.0), (2, 3.0)],
        })
        .unwrap();
        assert_eq!(
            solve_linear(&all.matrix, &all.rhs).unwrap(),
            vec![1.0, 2.0, 3.0]
        );

        let clash = LinearSystem {
            matrix: a,
            rhs: vec![0.0; 3],
            constraints: vec![(1, 0.0), (1, 1.0)],
        };
        assert!(matches!(
            apply_dirichlet(clash),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn elasticity_range_checked() {
        let mesh = generate_rect_mesh(1.0, 1.0, 2, 2).unwrap();
        let mat = Material {
            youngs_modulus: 1.0,
            poisson_ratio: 0.3,
            mode: PlaneMode::PlaneStrain,
        };
        let n = mesh.n_elements();
        assert!(assemble_elasticity(&mesh, &mat, &vec![1.0; n], 1e-3).is_ok());
        assert!(assemble_elasticity(&mesh, &mat, &vec![1e-4; n], 1e-3).is_err());
        assert!(assemble_elasticity(&mesh, &mat, &vec![1.1; n], 1e-3).is_err());
    }
}
