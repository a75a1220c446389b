//! Level set projection, Ersatz interpolation and the wave-type evolution schemes.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{element_laplacian, element_mass, NodalField};
use crate::mesh::Mesh;
use crate::solver::Factorized;
use crate::sparse::{CsrMatrix, ElementAssembler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    We,
    Dwe,
    Bwe,
    Dbwe,
    Gwe,
    Dgwe,
    Rde,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::We,
        Scheme::Dwe,
        Scheme::Bwe,
        Scheme::Dbwe,
        Scheme::Gwe,
        Scheme::Dgwe,
        Scheme::Rde,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::We => "we",
            Scheme::Dwe => "dwe",
            Scheme::Bwe => "bwe",
            Scheme::Dbwe => "dbwe",
            Scheme::Gwe => "gwe",
            Scheme::Dgwe => "dgwe",
            Scheme::Rde => "rde",
        }
    }

    /// Whether each of `(ℓ, m, k)` may be non-zero.
    pub fn allows(self) -> (bool, bool, bool) {
        match self {
            Scheme::We => (true, false, false),
            Scheme::Dwe => (true, true, false),
            Scheme::Bwe => (false, false, true),
            Scheme::Dbwe => (false, true, true),
            Scheme::Gwe => (true, false, true),
            Scheme::Dgwe => (true, true, true),
            Scheme::Rde => (true, true, false),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionParams {
    pub scheme: Scheme,
    pub ell: f64,
    pub m: f64,
    pub k: f64,
    pub beta: f64,
    pub c_f: f64,
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("ell", self.ell), ("m", self.m), ("k", self.k)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be a finite non-negative number, got {v}"
                )));
            }
        }
        if !(self.beta > 0.0) || !(self.c_f > 0.0) {
            return Err(Error::invalid(format!(
                "beta and c_f must be positive, got {} and {}",
                self.beta, self.c_f
            )));
        }
        let (ell_ok, m_ok, k_ok) = self.scheme.allows();
        for (name, ok, v) in [
            ("ell", ell_ok, self.ell),
            ("m", m_ok, self.m),
            ("k", k_ok, self.k),
        ] {
            if !ok && v != 0.0 {
                return Err(Error::invalid(format!(
                    "scheme {} requires {name} = 0, got {v}",
                    self.scheme
                )));
            }
        }
        if self.scheme == Scheme::Rde && !(self.m > 0.0) {
            return Err(Error::invalid("scheme rde requires m > 0"));
        }
        Ok(())
    }

    /// Accepted but questionable settings.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if matches!(self.scheme, Scheme::Gwe | Scheme::Dgwe)
            && self.k > 0.0
            && self.ell / self.k > 1.0
        {
            w.push(format!(
                "ell/k = {:.3} > 1: outside the band where the fourth-order term shapes the layout",
                self.ell / self.k
            ));
        }
        w
    }
}

/// `Θ = (tanh(2βφ) + 1) / 2`.
pub fn heaviside_scalar(phi: f64, beta: f64) -> f64 {
    0.5 * ((2.0 * beta * phi).tanh() + 1.0)
}

pub fn heaviside(phi: &[f64], beta: f64) -> NodalField {
    NodalField(phi.iter().map(|&p| heaviside_scalar(p, beta)).collect())
}

/// Constant approximation of the smoothed delta function.
pub fn delta_const(beta: f64) -> f64 {
    beta
}

fn check_ersatz(theta: &[f64], e: f64, q: f64) -> Result<()> {
    if !(e > 0.0 && e < 1.0) || !(q > 1.0) {
        return Err(Error::invalid(format!(
            "Ersatz parameters need e in (0, 1) and q > 1, got e = {e}, q = {q}"
        )));
    }
    if let Some(t) = theta
        .iter()
        .find(|&&t| !(-1e-12..=1.0 + 1e-12).contains(&t))
    {
        return Err(Error::invalid(format!("Θ = {t} outside [0, 1]")));
    }
    Ok(())
}

/// `τ = (1 − e) Θ^q + e`.
pub fn tau(theta: &[f64], e: f64, q: f64) -> Result<NodalField> {
    check_ersatz(theta, e, q)?;
    Ok(NodalField(
        theta
            .iter()
            .map(|&t| (1.0 - e) * t.clamp(0.0, 1.0).powf(q) + e)
            .collect(),
    ))
}

/// Simplified slope `q (1 − e) Θ`, exact at Θ ∈ {0, 1}.
pub fn dtau(theta: &[f64], e: f64, q: f64) -> Result<NodalField> {
    check_ersatz(theta, e, q)?;
    Ok(NodalField(
        theta
            .iter()
            .map(|&t| q * (1.0 - e) * t.clamp(0.0, 1.0))
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetState {
    pub phi: NodalField,
    pub phi_prev: NodalField,
    pub iteration: usize,
}

impl LevelSetState {
    pub fn in_range(&self) -> bool {
        self.phi
            .iter()
            .chain(self.phi_prev.iter())
            .all(|v| (-1.0..=1.0).contains(v))
    }
}

/// Scheme operator assembled from `M`, `B` and the lumped mass, before boundary conditions.
pub fn operator_matrix(
    params: &EvolutionParams,
    m: &CsrMatrix,
    b: &CsrMatrix,
    m_lumped: &[f64],
) -> Result<CsrMatrix> {
    params.validate()?;
    let mass_coeff = if params.scheme == Scheme::Rde {
        params.m
    } else {
        1.0 + params.m
    };
    let mut a = m.scaled(mass_coeff).with_symmetry(true);
    if params.ell > 0.0 {
        a = a.add_scaled(b, params.ell * params.ell)?;
    }
    if params.k > 0.0 {
        a = a.add_scaled(&biharmonic(b, m_lumped)?, params.k.powi(4))?;
    }
    Ok(a.with_symmetry(true))
}

/// `B M_L⁻¹ B`, symmetrized exactly.
pub fn biharmonic(b: &CsrMatrix, m_lumped: &[f64]) -> Result<CsrMatrix> {
    if let Some(v) = m_lumped.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::degenerate(format!("lumped mass entry {v:e}")));
    }
    let inv: Vec<f64> = m_lumped.iter().map(|v| 1.0 / v).collect();
    let p = b.matmul_diag(Some(&inv), b)?;
    Ok(p.add_scaled(&p.transpose(), 1.0)?
        .scaled(0.5)
        .with_symmetry(true))
}

/// Direct weak-form assembly of `∫ m φ δφ + ℓ² ∇φ·∇δφ`.
pub fn assemble_reaction_diffusion(mesh: &Mesh, m: f64, ell: f64) -> Result<CsrMatrix> {
    let geo: Vec<_> = (0..mesh.n_elements())
        .map(|e| mesh.geometry(e))
        .collect::<Result<_>>()?;
    let dofs: Vec<Vec<usize>> = mesh.triangles().iter().map(|t| t.to_vec()).collect();
    let asm = ElementAssembler::new(mesh.n_nodes(), 3, &dofs)?;
    let l2 = ell * ell;
    Ok(asm
        .assemble(|e, out| {
            let me = element_mass(geo[e].area);
            let be = element_laplacian(&geo[e]);
            for a in 0..3 {
                for c in 0..3 {
                    out[3 * a + c] = m * me[a][c] + l2 * be[a][c];
                }
            }
        })
        .with_symmetry(true))
}

/// Factorized evolution operator with its Dirichlet data; reused for every step of a run.
#[derive(Debug, Clone)]
pub struct EvolutionOperator {
    params: EvolutionParams,
    matrix: CsrMatrix,
    mass: CsrMatrix,
    dirichlet: Vec<(usize, f64)>,
    lift: Vec<f64>,
    system: Factorized,
}

pub fn build_evolution_operator(
    params: &EvolutionParams,
    m: &CsrMatrix,
    b: &CsrMatrix,
    m_lumped: &[f64],
    dirichlet: &[(usize, f64)],
) -> Result<EvolutionOperator> {
    let matrix = operator_matrix(params, m, b, m_lumped)?;
    let n = matrix.nrows();
    let dirichlet = crate::fem::normalize_constraints(n, dirichlet)?;
    let mut reduced = matrix.clone();
    let lift = crate::fem::eliminate(&mut reduced, &vec![0.0; n], &dirichlet);
    Ok(EvolutionOperator {
        params: *params,
        matrix,
        mass: m.clone(),
        dirichlet,
        lift,
        system: Factorized::new(reduced)?,
    })
}

impl EvolutionOperator {
    pub fn params(&self) -> &EvolutionParams {
        &self.params
    }

    /// Operator without boundary conditions.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dirichlet(&self) -> &[(usize, f64)] {
        &self.dirichlet
    }

    /// Solves `A x = rhs` with the Dirichlet rows; no clamping.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut b: Vec<f64> = rhs.iter().zip(&self.lift).map(|(r, l)| r + l).collect();
        for &(d, v) in &self.dirichlet {
            b[d] = v;
        }
        self.system.solve(&b)
    }

    /// Right-hand side `M(−S + (2+m)φ_v − φ_{v−1})`, or `M(−S + mφ_v)` for reaction-diffusion.
    pub fn rhs(&self, state: &LevelSetState, source: &[f64]) -> Vec<f64> {
        let m = self.params.m;
        let w: Vec<f64> = if self.params.scheme == Scheme::Rde {
            source
                .iter()
                .zip(state.phi.iter())
                .map(|(s, p)| -s + m * p)
                .collect()
        } else {
            source
                .iter()
                .zip(state.phi.iter().zip(state.phi_prev.iter()))
                .map(|(s, (p, q))| -s + (2.0 + m) * p - q)
                .collect()
        };
        self.mass.mul_vec(&w)
    }
}

pub fn evolve(
    state: &LevelSetState,
    op: &EvolutionOperator,
    source: &[f64],
) -> Result<LevelSetState> {
    let n = op.matrix.nrows();
    if source.len() != n || state.phi.len() != n || state.phi_prev.len() != n {
        return Err(Error::invalid("level set fields do not match the operator"));
    }
    if source.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("evolution source is not finite"));
    }
    let mut next = op.solve(&op.rhs(state, source))?;
    for v in next.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
    for &(d, v) in &op.dirichlet {
        next[d] = v;
    }
    Ok(LevelSetState {
        phi: NodalField(next),
        phi_prev: state.phi.clone(),
        iteration: state.iteration + 1,
    })
}

/// `½|φ_v − φ_{v−1}|²_M + ½ℓ² φ_vᵀBφ_v + ½k⁴ (Bφ_v)ᵀ M_L⁻¹ (Bφ_v)`.
pub fn evolution_energy(
    state: &LevelSetState,
    ell: f64,
    k: f64,
    m: &CsrMatrix,
    b: &CsrMatrix,
    m_lumped: &[f64],
) -> f64 {
    let d: Vec<f64> = state
        .phi
        .iter()
        .zip(state.phi_prev.iter())
        .map(|(a, b)| a - b)
        .collect();
    let bphi = b.mul_vec(&state.phi);
    let kinetic = 0.5 * m.quad_form(&d);
    let grad = 0.5 * ell * ell * state.phi.iter().zip(&bphi).map(|(p, q)| p * q).sum::<f64>();
    let curv = 0.5
        * k.powi(4)
        * bphi
            .iter()
            .zip(m_lumped)
            .map(|(q, w)| q * q / w)
            .sum::<f64>();
    kinetic + grad + curv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPreset {
    Filled,
    SingleHole,
    Perforated,
    HalfFilled,
    Custom(Vec<f64>),
}

impl FromStr for InitPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "filled" => Ok(InitPreset::Filled),
            "hole" | "single-hole" => Ok(InitPreset::SingleHole),
            "perforated" => Ok(InitPreset::Perforated),
            "half" | "half-filled" => Ok(InitPreset::HalfFilled),
            other => Err(Error::invalid(format!(
                "unknown initial configuration `{other}`"
            ))),
        }
    }
}

fn element_size(mesh: &Mesh) -> f64 {
    match mesh.grid() {
        Some(g) => g.dx.min(g.dy),
        None => (2.0 * mesh.area() / mesh.n_elements().max(1) as f64).sqrt(),
    }
}

/// Nodal level set values of an initial configuration, before boundary values.
pub fn initial_field(mesh: &Mesh, preset: &InitPreset, seed: u64) -> Result<NodalField> {
    let [x0, y0, x1, y1] = mesh.bounds();
    let (w, h) = (x1 - x0, y1 - y0);
    let width = 2.0 * element_size(mesh);
    let holes = |centers: &[[f64; 2]], radius: f64| -> NodalField {
        NodalField(
            mesh.nodes()
                .iter()
                .map(|p| {
                    centers
                        .iter()
                        .map(|c| (((p[0] - c[0]).hypot(p[1] - c[1]) - radius) / width).tanh())
                        .fold(1.0, f64::min)
                })
                .collect(),
        )
    };
    let field = match preset {
        InitPreset::Filled => NodalField::constant(mesh.n_nodes(), 1.0),
        InitPreset::SingleHole => holes(&[[x0 + 0.5 * w, y0 + 0.5 * h]], 0.2 * w.min(h)),
        InitPreset::Perforated => {
            let spacing = w.min(h) / 3.0;
            let (nx, ny) = (
                (w / spacing).round().max(1.0) as usize,
                (h / spacing).round().max(1.0) as usize,
            );
            let (sx, sy) = (w / nx as f64, h / ny as f64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut centers = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let jx = rng.random_range(-0.1..0.1) * sx;
                    let jy = rng.random_range(-0.1..0.1) * sy;
                    centers.push([
                        x0 + (i as f64 + 0.5) * sx + jx,
                        y0 + (j as f64 + 0.5) * sy + jy,
                    ]);
                }
            }
            holes(&centers, 0.25 * sx.min(sy))
        }
        InitPreset::HalfFilled => {
            let mid = y0 + 0.5 * h;
            NodalField(
                mesh.nodes()
                    .iter()
                    .map(|p| -((p[1] - mid) / width).tanh())
                    .collect(),
            )
        }
        InitPreset::Custom(values) => {
            if values.len() != mesh.n_nodes() {
                return Err(Error::invalid(format!(
                    "{} custom values for {} nodes",
                    values.len(),
                    mesh.n_nodes()
                )));
            }
            NodalField(values.iter().map(|v| v.clamp(-1.0, 1.0)).collect())
        }
    };
    Ok(field)
}

/// Initial `(φ₀, φ₋₁)` with the evolution boundary values imposed on both.
pub fn initialize(
    mesh: &Mesh,
    phi0: &InitPreset,
    phi_prev: &InitPreset,
    dirichlet: &[(usize, f64)],
    seed: u64,
) -> Result<LevelSetState> {
    let mut a = initial_field(mesh, phi0, seed)?;
    let mut b = initial_field(mesh, phi_prev, seed)?;
    for &(d, v) in dirichlet {
        if d >= a.len() {
            return Err(Error::invalid(format!("boundary node {d} out of range")));
        }
        a[d] = v;
        b[d] = v;
    }
    Ok(LevelSetState {
        phi: a,
        phi_prev: b,
        iteration: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_laplacian, assemble_mass, lump_mass};
    use crate::mesh::generate_rect_mesh;

    fn params(scheme: Scheme, ell: f64, m: f64, k: f64) -> EvolutionParams {
        EvolutionParams {
            scheme,
            ell,
            m,
            k,
            beta: 5.0,
            c_f: 1.0,
        }
    }

    #[test]
    fn heaviside_values() {
        assert_eq!(heaviside_scalar(0.0, 5.0), 0.5);
        assert!((heaviside_scalar(1.0, 5.0) - 0.999_999_997_938_846_2).abs() < 1e-15);
        assert_eq!(delta_const(5.0), 5.0);
        assert_eq!(delta_const(2.0), 2.0);
    }

    #[test]
    fn ersatz_values() {
        let t = tau(&[1.0, 0.0, 0.5], 1e-3, 3.0).unwrap();
        let d = dtau(&[1.0, 0.0, 0.5], 1e-3, 3.0).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-15 && (t[1] - 1e-3).abs() < 1e-18);
        assert!((t[2] - 0.125875).abs() < 1e-15);
        assert!((d[0] - 2.997).abs() < 1e-15 && d[1] == 0.0);
        assert!(tau(&[1.1], 1e-3, 3.0).is_err());
    }

    #[test]
    fn parameter_consistency() {
        assert!(params(Scheme::We, 0.008, 0.0, 0.0).validate().is_ok());
        assert!(params(Scheme::We, 0.008, 0.1, 0.0).validate().is_err());
        assert!(params(Scheme::Bwe, 0.01, 0.0, 0.01).validate().is_err());
        assert!(params(Scheme::Rde, 0.01, 0.0, 0.0).validate().is_err());
        assert!(params(Scheme::Gwe, 0.02, 0.0, 0.01).warnings().len() == 1);
        assert!(params(Scheme::Gwe, 0.01, 0.0, 0.011).warnings().is_empty());
        assert_eq!("DGWE".parse::<Scheme>().unwrap(), Scheme::Dgwe);
    }

    #[test]
    fn fixed_points_and_constant_mode() {
        let mesh = generate_rect_mesh(1.0, 1.0, 6, 6).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        let b = assemble_laplacian(&mesh).unwrap();
        let ml = lump_mass(&m).unwrap();
        let n = mesh.n_nodes();
        let flat = LevelSetState {
            phi: NodalField::constant(n, 0.3),
            phi_prev: NodalField::constant(n, 0.3),
            iteration: 0,
        };
        for p in [
            params(Scheme::We, 0.05, 0.0, 0.0),
            params(Scheme::Dwe, 0.05, 1.0, 0.0),
            params(Scheme::Bwe, 0.0, 0.0, 0.05),
            params(Scheme::Dbwe, 0.0, 1.0, 0.05),
            params(Scheme::Gwe, 0.05, 0.0, 0.06),
            params(Scheme::Dgwe, 0.05, 1.0, 0.06),
            params(Scheme::Rde, 0.05, 1.0, 0.0),
        ] {
            let op = build_evolution_operator(&p, &m, &b, &ml, &[]).unwrap();
            let next = evolve(&flat, &op, &vec![0.0; n]).unwrap();
            assert!(
                next.phi.iter().all(|v| (v - 0.3).abs() < 1e-12),
                "{}",
                p.scheme
            );
            assert_eq!(next.phi_prev, flat.phi);
        }
        let op = build_evolution_operator(&params(Scheme::We, 0.05, 0.0, 0.0), &m, &b, &ml, &[])
            .unwrap();
        let next = evolve(&flat, &op, &vec![0.2; n]).unwrap();
        assert!(next.phi.iter().all(|v| (v - 0.1).abs() < 1e-12));
        let clamped = evolve(&flat, &op, &vec![-1.4; n]).unwrap();
        assert!(clamped.phi.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn initial_configurations() {
        let mesh = generate_rect_mesh(2.0, 1.0, 20, 10).unwrap();
        let filled = initialize(
            &mesh,
            &InitPreset::Filled,
            &InitPreset::Filled,
            &[(0, -1.0)],
            0,
        )
        .unwrap();
        assert_eq!(filled.phi[0], -1.0);
        assert!(filled.phi[1..].iter().all(|&v| v == 1.0));
        let half = initial_field(&mesh, &InitPreset::HalfFilled, 0).unwrap();
        assert!(half[0] > 0.98 && half[mesh.n_nodes() - 1] < -0.98);
        let fine = generate_rect_mesh(2.0, 1.0, 60, 30).unwrap();
        let mixed =
            initialize(&fine, &InitPreset::Filled, &InitPreset::Perforated, &[], 3).unwrap();
        assert!(mixed.phi_prev.min() < -0.5 && mixed.phi.min() == 1.0);
        let hole = initial_field(&fine, &InitPreset::SingleHole, 0).unwrap();
        assert!(hole.min() < -0.9 && hole.max() > 0.9);
        let again = initial_field(&fine, &InitPreset::Perforated, 3).unwrap();
        assert_eq!(again, mixed.phi_prev);
    }
}
