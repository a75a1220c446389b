//! Linear elastic state and adjoint problems on the fixed mesh, von Mises post-processing and
//! mechanism output metrics.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::constraints::AugmentedMultiplier;
use crate::error::{Error, Result};
use crate::fem::{
    assemble_boundary_load, assemble_boundary_spring, eliminate, lumped_weights, strain_matrix,
    ElasticityAssembler, NodalField,
};
use crate::mesh::{BoundaryTag, Mesh};
use crate::solver::Factorized;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaneMode {
    PlaneStrain,
    PlaneStress,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub mode: PlaneMode,
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        if !(self.youngs_modulus > 0.0) || !self.youngs_modulus.is_finite() {
            return Err(Error::invalid(format!(
                "Young's modulus must be positive, got {}",
                self.youngs_modulus
            )));
        }
        let nu = self.poisson_ratio;
        if nu >= 0.5 {
            return Err(Error::invalid(format!(
                "Poisson ratio {nu} is at or beyond the incompressible limit"
            )));
        }
        if !(nu > -1.0) {
            return Err(Error::invalid(format!("Poisson ratio {nu} must exceed -1")));
        }
        Ok(())
    }
}

/// `(μ, λ)`; in plane stress `λ` is replaced by `2λμ / (λ + 2μ)`.
pub fn lame_constants(material: &Material) -> Result<(f64, f64)> {
    material.validate()?;
    let (e, nu) = (material.youngs_modulus, material.poisson_ratio);
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    Ok(match material.mode {
        PlaneMode::PlaneStrain => (mu, lambda),
        PlaneMode::PlaneStress => (mu, 2.0 * lambda * mu / (lambda + 2.0 * mu)),
    })
}

/// Voigt matrix mapping `(ε_xx, ε_yy, γ_xy)` to `(σ_xx, σ_yy, σ_xy)`.
pub fn constitutive_matrix(material: &Material) -> Result<[[f64; 3]; 3]> {
    let (mu, lambda) = lame_constants(material)?;
    Ok([
        [lambda + 2.0 * mu, lambda, 0.0],
        [lambda, lambda + 2.0 * mu, 0.0],
        [0.0, 0.0, mu],
    ])
}

/// Coefficient `c` in `σ_zz = c (ε_xx + ε_yy)`.
fn out_of_plane_coefficient(material: &Material) -> Result<f64> {
    Ok(match material.mode {
        PlaneMode::PlaneStrain => lame_constants(material)?.1,
        PlaneMode::PlaneStress => 0.0,
    })
}

/// von Mises stress of `(σ_xx, σ_yy, σ_xy, σ_zz)` from the 3D deviator.
pub fn von_mises_of(s: [f64; 4]) -> f64 {
    let p = (s[0] + s[1] + s[3]) / 3.0;
    let (dx, dy, dz) = (s[0] - p, s[1] - p, s[3] - p);
    (1.5 * (dx * dx + dy * dy + dz * dz + 2.0 * s[2] * s[2])).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    Compliance,
    Mechanism,
    StressBiObjective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemDef {
    Compliance {
        traction: [f64; 2],
        volume_fraction: f64,
    },
    Mechanism {
        traction: [f64; 2],
        volume_fraction: f64,
        k_a: f64,
        k_b: f64,
        r_a: [f64; 2],
        r_b: [f64; 2],
    },
    StressBiObjective {
        traction: [f64; 2],
        yield_stress: f64,
        weight: f64,
        gamma: f64,
        kappa: f64,
        arsinh_scaling: bool,
        helmholtz_filter: bool,
    },
}

impl ProblemDef {
    pub fn kind(&self) -> ProblemKind {
        match self {
            ProblemDef::Compliance { .. } => ProblemKind::Compliance,
            ProblemDef::Mechanism { .. } => ProblemKind::Mechanism,
            ProblemDef::StressBiObjective { .. } => ProblemKind::StressBiObjective,
        }
    }

    pub fn traction(&self) -> [f64; 2] {
        match *self {
            ProblemDef::Compliance { traction, .. }
            | ProblemDef::Mechanism { traction, .. }
            | ProblemDef::StressBiObjective { traction, .. } => traction,
        }
    }

    pub fn with_traction(&self, t: [f64; 2]) -> Self {
        let mut p = self.clone();
        match &mut p {
            ProblemDef::Compliance { traction, .. }
            | ProblemDef::Mechanism { traction, .. }
            | ProblemDef::StressBiObjective { traction, .. } => *traction = t,
        }
        p
    }

    pub fn volume_fraction(&self) -> Option<f64> {
        match *self {
            ProblemDef::Compliance {
                volume_fraction, ..
            }
            | ProblemDef::Mechanism {
                volume_fraction, ..
            } => Some(volume_fraction),
            ProblemDef::StressBiObjective { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.traction().iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("traction must be finite"));
        }
        if let Some(vf) = self.volume_fraction() {
            if !(vf > 0.0 && vf < 1.0) {
                return Err(Error::invalid(format!(
                    "volume fraction {vf} outside (0, 1)"
                )));
            }
        }
        match *self {
            ProblemDef::Mechanism {
                k_a, k_b, r_a, r_b, ..
            } => {
                for (name, r) in [("r_a", r_a), ("r_b", r_b)] {
                    let len = (r[0] * r[0] + r[1] * r[1]).sqrt();
                    if (len - 1.0).abs() > 1e-12 {
                        return Err(Error::invalid(format!(
                            "{name} must be a unit vector, has length {len}"
                        )));
                    }
                }
                if !(k_a >= 0.0 && k_b >= 0.0) {
                    return Err(Error::invalid("spring stiffnesses must be non-negative"));
                }
            }
            ProblemDef::StressBiObjective {
                yield_stress,
                weight,
                gamma,
                kappa,
                ..
            } => {
                if !(yield_stress > 0.0) {
                    return Err(Error::invalid(format!(
                        "yield stress must be positive, got {yield_stress}"
                    )));
                }
                if !(weight > 0.0 && weight < 1.0) {
                    return Err(Error::invalid(format!("weight {weight} outside (0, 1)")));
                }
                if !(gamma > 0.0) || !(kappa >= 0.0) {
                    return Err(Error::invalid(
                        "scaling γ must be positive and filter radius κ non-negative",
                    ));
                }
            }
            ProblemDef::Compliance { .. } => {}
        }
        Ok(())
    }
}

/// Interleaved nodal displacements `(u_x, u_y)` per node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Displacement(pub Vec<f64>);

impl Displacement {
    pub fn zeros(n_nodes: usize) -> Self {
        Displacement(vec![0.0; 2 * n_nodes])
    }

    pub fn n_nodes(&self) -> usize {
        self.0.len() / 2
    }

    pub fn at(&self, node: usize) -> [f64; 2] {
        [self.0[2 * node], self.0[2 * node + 1]]
    }

    pub fn magnitude(&self) -> NodalField {
        NodalField(self.0.chunks(2).map(|c| c[0].hypot(c[1])).collect())
    }
}

impl Deref for Displacement {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for Displacement {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

#[derive(Debug, Clone)]
struct ElementData {
    nodes: [usize; 3],
    area: f64,
    b: [[f64; 6]; 3],
}

/// Factorized stiffness and displacement for one material layout.
#[derive(Debug, Clone)]
pub struct StateSolution {
    pub u: Displacement,
    tau_elem: Vec<f64>,
    system: Factorized,
}

impl StateSolution {
    pub fn tau_elem(&self) -> &[f64] {
        &self.tau_elem
    }
}

/// Mesh-level precomputation for repeated state and adjoint solves.
#[derive(Debug, Clone)]
pub struct ElasticModel {
    n_nodes: usize,
    material: Material,
    problem: ProblemDef,
    d: [[f64; 3]; 3],
    szz: f64,
    elements: Vec<ElementData>,
    fixed: Vec<bool>,
    patch_area: Vec<f64>,
    lumped: Vec<f64>,
    assembler: ElasticityAssembler,
    springs: Option<CsrMatrix>,
    load: Vec<f64>,
    output_load: Option<Vec<f64>>,
    constraints: Vec<(usize, f64)>,
}

impl ElasticModel {
    pub fn new(mesh: &Mesh, material: &Material, problem: &ProblemDef) -> Result<Self> {
        material.validate()?;
        problem.validate()?;
        let required: &[BoundaryTag] = match problem.kind() {
            ProblemKind::Mechanism => &[
                BoundaryTag::GammaU,
                BoundaryTag::GammaA,
                BoundaryTag::GammaB,
            ],
            _ => &[BoundaryTag::GammaU, BoundaryTag::GammaT],
        };
        for &tag in required {
            if !mesh.has_tag(tag) {
                return Err(Error::invalid(format!(
                    "{:?} problem needs boundary edges tagged {tag:?}",
                    problem.kind()
                )));
            }
        }
        let d = constitutive_matrix(material)?;
        let szz = out_of_plane_coefficient(material)?;
        let mut elements = Vec::with_capacity(mesh.n_elements());
        for (e, &nodes) in mesh.triangles().iter().enumerate() {
            let g = mesh.geometry(e)?;
            elements.push(ElementData {
                nodes,
                area: g.area,
                b: strain_matrix(&g),
            });
        }
        let n = mesh.n_nodes();
        let (load, springs, output_load) = match *problem {
            ProblemDef::Mechanism {
                traction,
                k_a,
                k_b,
                r_a,
                r_b,
                ..
            } => {
                let ka = assemble_boundary_spring(mesh, BoundaryTag::GammaA, k_a, r_a)?;
                let kb = assemble_boundary_spring(mesh, BoundaryTag::GammaB, k_b, r_b)?;
                (
                    assemble_boundary_load(mesh, traction, BoundaryTag::GammaA)?,
                    Some(ka.add_scaled(&kb, 1.0)?),
                    Some(assemble_boundary_load(mesh, r_b, BoundaryTag::GammaB)?),
                )
            }
            _ => (
                assemble_boundary_load(mesh, problem.traction(), BoundaryTag::GammaT)?,
                None,
                None,
            ),
        };
        let mut constraints = Vec::new();
        for node in mesh.nodes_with_tag(BoundaryTag::GammaU) {
            constraints.push((2 * node, 0.0));
            constraints.push((2 * node + 1, 0.0));
        }
        for edge in mesh.edges_with_tag(BoundaryTag::Symmetry) {
            let [a, b] = edge.nodes.map(|k| mesh.nodes()[k]);
            let normal = if (a[1] - b[1]).abs() <= (a[0] - b[0]).abs() {
                1
            } else {
                0
            };
            for &node in &edge.nodes {
                constraints.push((2 * node + normal, 0.0));
            }
        }
        let constraints = crate::fem::normalize_constraints(2 * n, &constraints)?;
        Ok(ElasticModel {
            n_nodes: n,
            material: *material,
            problem: problem.clone(),
            d,
            szz,
            elements,
            fixed: (0..mesh.n_elements()).map(|e| mesh.is_fixed(e)).collect(),
            patch_area: mesh.node_patch_areas(),
            lumped: lumped_weights(mesh, |_| true)?,
            assembler: ElasticityAssembler::new(mesh, material)?,
            springs,
            load,
            output_load,
            constraints,
        })
    }

    pub fn problem(&self) -> &ProblemDef {
        &self.problem
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn constrained_dofs(&self) -> &[(usize, f64)] {
        &self.constraints
    }

    pub fn is_fixed(&self, e: usize) -> bool {
        self.fixed[e]
    }

    /// Element mean of nodal τ; fixed solid elements are forced to 1.
    pub fn element_tau(&self, tau_nodal: &[f64]) -> Vec<f64> {
        self.elements
            .iter()
            .zip(&self.fixed)
            .map(|(el, &fixed)| {
                if fixed {
                    1.0
                } else {
                    el.nodes.iter().map(|&n| tau_nodal[n]).sum::<f64>() / 3.0
                }
            })
            .collect()
    }

    pub fn stiffness(&self, tau_elem: &[f64]) -> Result<CsrMatrix> {
        let k = self.assembler.assemble(tau_elem);
        match &self.springs {
            Some(s) => Ok(k.add_scaled(s, 1.0)?.with_symmetry(true)),
            None => Ok(k),
        }
    }

    pub fn solve_state(&self, tau_elem: &[f64]) -> Result<StateSolution> {
        if tau_elem.len() != self.elements.len() {
            return Err(Error::invalid(format!(
                "{} τ values for {} elements",
                tau_elem.len(),
                self.elements.len()
            )));
        }
        self.solve_state_with_load(tau_elem, &self.load)
    }

    pub fn solve_state_with_load(&self, tau_elem: &[f64], load: &[f64]) -> Result<StateSolution> {
        let mut k = self.stiffness(tau_elem)?;
        let rhs = eliminate(&mut k, load, &self.constraints);
        let system = Factorized::new(k)?;
        let u = Displacement(system.solve(&rhs)?);
        Ok(StateSolution {
            u,
            tau_elem: tau_elem.to_vec(),
            system,
        })
    }

    /// Solve `K v = rhs` with the state's factorization and homogeneous constraints.
    pub fn solve_with(&self, state: &StateSolution, rhs: &[f64]) -> Result<Displacement> {
        let mut b = rhs.to_vec();
        for &(d, _) in &self.constraints {
            b[d] = 0.0;
        }
        Ok(Displacement(state.system.solve(&b)?))
    }

    /// Adjoint field for the configured problem; the stress problem needs the multiplier field
    /// and nodal τ.
    pub fn solve_adjoint(
        &self,
        state: &StateSolution,
        tau_nodal: &[f64],
        multiplier: &AugmentedMultiplier,
    ) -> Result<Displacement> {
        if state.u.len() != 2 * self.n_nodes || tau_nodal.len() != self.n_nodes {
            return Err(Error::invalid("state or τ does not match the mesh"));
        }
        match self.problem {
            // Self-adjoint, but solved anyway so the identity stays checkable.
            ProblemDef::Compliance { .. } => self.solve_with(state, &self.load),
            ProblemDef::Mechanism { .. } => {
                let fb = self
                    .output_load
                    .as_ref()
                    .expect("mechanism model carries its output load");
                let rhs: Vec<f64> = fb.iter().map(|v| -v).collect();
                self.solve_with(state, &rhs)
            }
            ProblemDef::StressBiObjective { weight, .. } => {
                let b = self.stress_constraint_gradient(&state.u, tau_nodal, multiplier)?;
                let rhs: Vec<f64> = self
                    .load
                    .iter()
                    .zip(&b)
                    .map(|(f, g)| (1.0 - weight) * f + g)
                    .collect();
                self.solve_with(state, &rhs)
            }
        }
    }

    pub fn element_strain(&self, u: &[f64], e: usize) -> [f64; 3] {
        let el = &self.elements[e];
        let mut eps = [0.0; 3];
        for (r, row) in el.b.iter().enumerate() {
            for (a, &n) in el.nodes.iter().enumerate() {
                eps[r] += row[2 * a] * u[2 * n] + row[2 * a + 1] * u[2 * n + 1];
            }
        }
        eps
    }

    /// Untempered stress `(σ_xx, σ_yy, σ_xy, σ_zz)` of element `e`.
    pub fn element_stress(&self, u: &[f64], e: usize) -> [f64; 4] {
        let eps = self.element_strain(u, e);
        let s = mat3_vec(&self.d, eps);
        [s[0], s[1], s[2], self.szz * (eps[0] + eps[1])]
    }

    /// `ε(u) : C : ε(v)` per element.
    pub fn energy_density(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        (0..self.elements.len())
            .map(|e| {
                let eu = self.element_strain(u, e);
                let ev = self.element_strain(v, e);
                let s = mat3_vec(&self.d, ev);
                eu[0] * s[0] + eu[1] * s[1] + eu[2] * s[2]
            })
            .collect()
    }

    pub fn von_mises_elements(&self, u: &[f64]) -> Vec<f64> {
        (0..self.elements.len())
            .map(|e| von_mises_of(self.element_stress(u, e)))
            .collect()
    }

    /// Area-weighted average of element values at each node.
    pub fn project_to_nodes(&self, values: &[f64]) -> NodalField {
        let mut acc = vec![0.0; self.n_nodes];
        for (el, v) in self.elements.iter().zip(values) {
            for &n in &el.nodes {
                acc[n] += el.area * v;
            }
        }
        NodalField(
            acc.iter()
                .zip(&self.patch_area)
                .map(|(a, s)| a / s)
                .collect(),
        )
    }

    /// Area-weighted nodal sum over design elements only, normalized by the full patch area.
    pub fn project_design_to_nodes(&self, values: &[f64]) -> NodalField {
        let masked: Vec<f64> = values
            .iter()
            .zip(&self.fixed)
            .map(|(&v, &f)| if f { 0.0 } else { v })
            .collect();
        self.project_to_nodes(&masked)
    }

    pub fn von_mises(&self, u: &[f64]) -> NodalField {
        self.project_to_nodes(&self.von_mises_elements(u))
    }

    /// Mean compliance `Fᵀu`.
    pub fn compliance(&self, u: &[f64]) -> f64 {
        self.load.iter().zip(u).map(|(f, u)| f * u).sum()
    }

    /// `∫_{Γb} r_b · u dΓ` for mechanisms.
    pub fn output_work(&self, u: &[f64]) -> Option<f64> {
        self.output_load
            .as_ref()
            .map(|f| f.iter().zip(u).map(|(f, u)| f * u).sum())
    }

    /// `∂G*/∂u` of the nodal augmented stress penalty `Σ m_i (λ_i ḡ_i + r/2 ḡ_i²)`.
    pub fn stress_constraint_gradient(
        &self,
        u: &[f64],
        tau_nodal: &[f64],
        multiplier: &AugmentedMultiplier,
    ) -> Result<Vec<f64>> {
        let ProblemDef::StressBiObjective { yield_stress, .. } = self.problem else {
            return Err(Error::invalid(
                "stress gradient requested for a problem without a stress constraint",
            ));
        };
        let sigma_e = self.von_mises_elements(u);
        let sigma = self.project_to_nodes(&sigma_e);
        let eval = crate::constraints::eval_stress_constraint(
            &sigma,
            tau_nodal,
            yield_stress,
            multiplier,
        )?;
        let lambda = multiplier.lambda();
        let r = multiplier.penalty;
        // dG*/dσ_i, nodal.
        let c: Vec<f64> = (0..self.n_nodes)
            .map(|i| {
                self.lumped[i] * (lambda[i] + r * eval.value[i]) * eval.indicator[i] * tau_nodal[i]
                    / yield_stress
            })
            .collect();
        let mut grad = vec![0.0; 2 * self.n_nodes];
        for (e, el) in self.elements.iter().enumerate() {
            let w: f64 = el
                .nodes
                .iter()
                .map(|&n| c[n] * el.area / self.patch_area[n])
                .sum();
            if w == 0.0 || sigma_e[e] <= 0.0 {
                continue;
            }
            let s = self.element_stress(u, e);
            let p = (s[0] + s[1] + s[3]) / 3.0;
            let dev = [s[0] - p, s[1] - p, 2.0 * s[2]];
            let dzz = s[3] - p;
            let scale = 1.5 / sigma_e[e];
            // dσ = D B du; dσ_zz = szz (B_0 + B_1) du.
            let t = mat3t_vec(&self.d, dev);
            for (a, &n) in el.nodes.iter().enumerate() {
                for k in 0..2 {
                    let col = 2 * a + k;
                    let mut v = (0..3).map(|r| t[r] * el.b[r][col]).sum::<f64>();
                    v += dzz * self.szz * (el.b[0][col] + el.b[1][col]);
                    grad[2 * n + k] += w * scale * v;
                }
            }
        }
        Ok(grad)
    }
}

fn mat3_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

fn mat3t_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|j| m[0][j] * v[0] + m[1][j] * v[1] + m[2][j] * v[2])
}

/// Element τ from nodal Θ through the Ersatz law.
pub fn tau_elements(model: &ElasticModel, theta: &[f64], e: f64, q: f64) -> Result<Vec<f64>> {
    let tau = crate::levelset::tau(theta, e, q)?;
    Ok(model.element_tau(&tau))
}

pub fn solve_state(
    problem: &ProblemDef,
    mesh: &Mesh,
    material: &Material,
    theta: &[f64],
    ersatz: (f64, f64),
) -> Result<Displacement> {
    let model = ElasticModel::new(mesh, material, problem)?;
    if theta.len() != mesh.n_nodes() {
        return Err(Error::invalid(format!(
            "{} Θ values for {} nodes",
            theta.len(),
            mesh.n_nodes()
        )));
    }
    let tau = tau_elements(&model, theta, ersatz.0, ersatz.1)?;
    Ok(model.solve_state(&tau)?.u)
}

pub fn solve_adjoint(
    problem: &ProblemDef,
    mesh: &Mesh,
    material: &Material,
    theta: &[f64],
    ersatz: (f64, f64),
    multiplier: &AugmentedMultiplier,
) -> Result<(Displacement, Displacement)> {
    let model = ElasticModel::new(mesh, material, problem)?;
    if theta.len() != mesh.n_nodes() {
        return Err(Error::invalid(format!(
            "{} Θ values for {} nodes",
            theta.len(),
            mesh.n_nodes()
        )));
    }
    let tau_nodal = crate::levelset::tau(theta, ersatz.0, ersatz.1)?;
    let state = model.solve_state(&model.element_tau(&tau_nodal))?;
    let v = model.solve_adjoint(&state, &tau_nodal, multiplier)?;
    Ok((state.u, v))
}

/// Nodal von Mises stress of the untempered material, area-weighted from elements.
pub fn von_mises(mesh: &Mesh, material: &Material, u: &Displacement) -> Result<NodalField> {
    if u.len() != 2 * mesh.n_nodes() {
        return Err(Error::invalid("displacement does not match the mesh"));
    }
    let d = constitutive_matrix(material)?;
    let szz = out_of_plane_coefficient(material)?;
    let mut acc = vec![0.0; mesh.n_nodes()];
    let patch = mesh.node_patch_areas();
    for (e, t) in mesh.triangles().iter().enumerate() {
        let g = mesh.geometry(e)?;
        let b = strain_matrix(&g);
        let mut eps = [0.0; 3];
        for (r, row) in b.iter().enumerate() {
            for (a, &n) in t.iter().enumerate() {
                eps[r] += row[2 * a] * u[2 * n] + row[2 * a + 1] * u[2 * n + 1];
            }
        }
        let s = mat3_vec(&d, eps);
        let vm = von_mises_of([s[0], s[1], s[2], szz * (eps[0] + eps[1])]);
        for &n in t {
            acc[n] += g.area * vm;
        }
    }
    Ok(NodalField(
        acc.iter().zip(patch).map(|(a, s)| a / s).collect(),
    ))
}

/// `(1/S_b) ∫_{Γ} r · u dΓ` by the edgewise trapezoidal rule.
pub fn mean_output_displacement(
    mesh: &Mesh,
    u: &Displacement,
    tag: BoundaryTag,
    r: [f64; 2],
) -> Result<f64> {
    if !mesh.has_tag(tag) {
        return Err(Error::invalid(format!("no boundary edges tagged {tag:?}")));
    }
    let (mut integral, mut length) = (0.0, 0.0);
    for edge in mesh.edges_with_tag(tag) {
        let len = mesh.edge_length(edge);
        let val: f64 = edge
            .nodes
            .iter()
            .map(|&n| r[0] * u[2 * n] + r[1] * u[2 * n + 1])
            .sum();
        integral += 0.5 * len * val;
        length += len;
    }
    Ok(integral / length)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lame_values() {
        let steel = Material {
            youngs_modulus: 210e9,
            poisson_ratio: 0.3,
            mode: PlaneMode::PlaneStrain,
        };
        let (mu, lambda) = lame_constants(&steel).unwrap();
        assert!((mu / 8.076923076923077e10 - 1.0).abs() < 1e-12);
        assert!((lambda / 1.2115384615384616e11 - 1.0).abs() < 1e-12);
        let zero = Material {
            youngs_modulus: 2.0,
            poisson_ratio: 0.0,
            mode: PlaneMode::PlaneStrain,
        };
        assert_eq!(lame_constants(&zero).unwrap(), (1.0, 0.0));
        let ps = Material {
            youngs_modulus: 1.0,
            poisson_ratio: 0.3,
            mode: PlaneMode::PlaneStress,
        };
        let (mu, ls) = lame_constants(&ps).unwrap();
        let l = 0.3 / (1.3 * 0.4);
        assert!((ls - 2.0 * l * mu / (l + 2.0 * mu)).abs() < 1e-15);
        // Plane stress modulus E/(1-ν²) on the diagonal.
        assert!((ls + 2.0 * mu - 1.0 / (1.0 - 0.09)).abs() < 1e-14);
        let bad = Material {
            youngs_modulus: 1.0,
            poisson_ratio: 0.5,
            mode: PlaneMode::PlaneStrain,
        };
        assert!(lame_constants(&bad).is_err());
    }

    #[test]
    fn von_mises_cases() {
        assert!((von_mises_of([3.0, 0.0, 0.0, 0.0]) - 3.0).abs() < 1e-15);
        assert!((von_mises_of([-2.5, 0.0, 0.0, 0.0]) - 2.5).abs() < 1e-15);
        assert!((von_mises_of([2.0, 2.0, 0.0, 0.0]) - 2.0).abs() < 1e-15);
        assert_eq!(von_mises_of([0.0; 4]), 0.0);
        assert!(von_mises_of([1.0, 1.0, 0.0, 1.0]).abs() < 1e-15);
        // Pure shear τ has σ_M = √3 τ; rotated by 45° it is σ = (τ, -τ).
        let shear = von_mises_of([0.0, 0.0, 1.0, 0.0]);
        let rotated = von_mises_of([1.0, -1.0, 0.0, 0.0]);
        assert!((shear - 3f64.sqrt()).abs() < 1e-14 && (shear - rotated).abs() < 1e-10);
    }
}
