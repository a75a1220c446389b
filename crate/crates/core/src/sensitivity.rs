//! Perturbation fields driving the evolution, their normalization, and the stress-problem
//! regularization.

use crate::constraints::{
    eval_stress_constraint, volume_sensitivity, AugmentedMultiplier, ConstraintEval,
};
use crate::elasticity::{ElasticModel, ProblemDef};
use crate::error::{Error, Result};
use crate::fem::NodalField;
use crate::levelset::dtau;
use crate::solver::Factorized;
use crate::sparse::CsrMatrix;

pub const NORMALIZATION_FLOOR: f64 = 1e-12;

/// Quantities shared by all perturbation terms.
#[derive(Debug, Clone)]
pub struct SensitivityContext {
    pub ersatz_floor: f64,
    pub exponent: f64,
    pub v0: f64,
    /// Factor applied to the mechanical (objective and equilibrium) terms.
    pub objective_scale: f64,
    /// Per node, the share of its quadrature weight lying in the constrained region.
    pub region_share: Vec<f64>,
}

fn check(
    model: &ElasticModel,
    u: &[f64],
    v: &[f64],
    theta: &[f64],
    ctx: &SensitivityContext,
) -> Result<()> {
    let n = model.n_nodes();
    if u.len() != 2 * n || v.len() != 2 * n || theta.len() != n || ctx.region_share.len() != n {
        return Err(Error::invalid("perturbation inputs do not match the mesh"));
    }
    Ok(())
}

/// `s · ε(u) : ∂τ/∂Θ C : ε(v)` at nodes.
pub fn residual_sensitivity(
    model: &ElasticModel,
    u: &[f64],
    v: &[f64],
    theta: &[f64],
    ctx: &SensitivityContext,
) -> Result<NodalField> {
    check(model, u, v, theta, ctx)?;
    let dt = dtau(theta, ctx.ersatz_floor, ctx.exponent)?;
    let w = model.project_design_to_nodes(&model.energy_density(u, v));
    Ok(NodalField(
        w.iter()
            .zip(dt.iter())
            .map(|(w, d)| ctx.objective_scale * w * d)
            .collect(),
    ))
}

fn volume_term(
    eval: &ConstraintEval,
    multiplier: &AugmentedMultiplier,
    ctx: &SensitivityContext,
) -> Vec<f64> {
    let c = volume_sensitivity(eval, multiplier, ctx.v0);
    ctx.region_share.iter().map(|s| c * s).collect()
}

/// `(λ + rG) 𝕀_G / V₀ − ε(u) : ∂τ/∂Θ C : ε(u)`.
pub fn perturbation_compliance(
    model: &ElasticModel,
    u: &[f64],
    theta: &[f64],
    eval: &ConstraintEval,
    multiplier: &AugmentedMultiplier,
    ctx: &SensitivityContext,
) -> Result<NodalField> {
    perturbation_mechanism(model, u, u, theta, eval, multiplier, ctx)
}

/// `(λ + rG) 𝕀_G / V₀ − ε(u) : ∂τ/∂Θ C : ε(v)`; fixed solid elements contribute nothing.
pub fn perturbation_mechanism(
    model: &ElasticModel,
    u: &[f64],
    v: &[f64],
    theta: &[f64],
    eval: &ConstraintEval,
    multiplier: &AugmentedMultiplier,
    ctx: &SensitivityContext,
) -> Result<NodalField> {
    let mech = residual_sensitivity(model, u, v, theta, ctx)?;
    let vol = volume_term(eval, multiplier, ctx);
    Ok(NodalField(
        vol.iter().zip(mech.iter()).map(|(a, b)| a - b).collect(),
    ))
}

/// `{(λ + rg) σ_M/f_y 𝕀_g + ε(u) : C : ((1−w)/2 ε(u) − ε(v))} ∂τ/∂Θ + w/V₀`.
pub fn perturbation_stress(
    model: &ElasticModel,
    u: &[f64],
    v: &[f64],
    theta: &[f64],
    multiplier: &AugmentedMultiplier,
    ctx: &SensitivityContext,
) -> Result<NodalField> {
    check(model, u, v, theta, ctx)?;
    let ProblemDef::StressBiObjective {
        yield_stress,
        weight,
        ..
    } = *model.problem()
    else {
        return Err(Error::invalid(
            "stress perturbation requested for a problem without a stress constraint",
        ));
    };
    let dt = dtau(theta, ctx.ersatz_floor, ctx.exponent)?;
    let tau = crate::levelset::tau(theta, ctx.ersatz_floor, ctx.exponent)?;
    let sigma = model.von_mises(u);
    let eval = eval_stress_constraint(&sigma, &tau, yield_stress, multiplier)?;
    let uu = model.energy_density(u, u);
    let uv = model.energy_density(u, v);
    let mixed: Vec<f64> = uu
        .iter()
        .zip(&uv)
        .map(|(a, b)| 0.5 * (1.0 - weight) * a - b)
        .collect();
    let mixed = model.project_design_to_nodes(&mixed);
    let lambda = multiplier.lambda();
    let r = multiplier.penalty;
    Ok(NodalField(
        (0..model.n_nodes())
            .map(|i| {
                let stress =
                    (lambda[i] + r * eval.value[i]) * sigma[i] / yield_stress * eval.indicator[i];
                (stress + ctx.objective_scale * mixed[i]) * dt[i]
                    + weight * ctx.region_share[i] / ctx.v0
            })
            .collect(),
    ))
}

/// `(1/(c_f V₀)) Σ w_i |field_i|`, floored; the flag reports whether the floor was hit.
pub fn normalization_factor(field: &[f64], weights: &[f64], v0: f64, c_f: f64) -> (f64, bool) {
    let integral: f64 = field.iter().zip(weights).map(|(f, w)| f.abs() * w).sum();
    let c = integral / (c_f * v0);
    if c > NORMALIZATION_FLOOR && c.is_finite() {
        (c, false)
    } else {
        log::warn!("normalization integral vanished; using floor {NORMALIZATION_FLOOR:e}");
        (NORMALIZATION_FLOOR, true)
    }
}

/// `arsinh(γ f) / γ`.
pub fn arsinh_scale(f: &[f64], gamma: f64) -> NodalField {
    NodalField(f.iter().map(|&x| (gamma * x).asinh() / gamma).collect())
}

/// Solver for `(M + κB) f̄ = M f` with natural boundary conditions.
#[derive(Debug, Clone)]
pub struct HelmholtzFilter {
    mass: CsrMatrix,
    system: Option<Factorized>,
}

impl HelmholtzFilter {
    pub fn new(kappa: f64, m: &CsrMatrix, b: &CsrMatrix) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(Error::invalid(format!(
                "filter radius must be non-negative, got {kappa}"
            )));
        }
        let system = if kappa == 0.0 {
            None
        } else {
            Some(Factorized::new(
                m.add_scaled(b, kappa)?.with_symmetry(true),
            )?)
        };
        Ok(HelmholtzFilter {
            mass: m.clone(),
            system,
        })
    }

    pub fn apply(&self, f: &[f64]) -> Result<NodalField> {
        match &self.system {
            None => Ok(NodalField(f.to_vec())),
            Some(s) => Ok(NodalField(s.solve(&self.mass.mul_vec(f))?)),
        }
    }
}

pub fn helmholtz_filter(f: &[f64], kappa: f64, m: &CsrMatrix, b: &CsrMatrix) -> Result<NodalField> {
    HelmholtzFilter::new(kappa, m, b)?.apply(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_laplacian, assemble_mass};
    use crate::mesh::generate_rect_mesh;

    #[test]
    fn normalization_values() {
        let w = [0.25; 4];
        assert_eq!(normalization_factor(&[1.0; 4], &w, 1.0, 1.0), (1.0, false));
        assert_eq!(normalization_factor(&[2.0; 4], &w, 1.0, 0.5), (4.0, false));
        assert_eq!(
            normalization_factor(&[0.0; 4], &w, 1.0, 1.0),
            (NORMALIZATION_FLOOR, true)
        );
    }

    #[test]
    fn arsinh_values() {
        assert_eq!(arsinh_scale(&[0.0], 3.0)[0], 0.0);
        assert!((arsinh_scale(&[1.0], 4.0)[0] - 0.523_678_136_815_275_3).abs() < 1e-15);
    }

    #[test]
    fn helmholtz_properties() {
        let mesh = generate_rect_mesh(1.0, 1.0, 8, 8).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        let b = assemble_laplacian(&mesh).unwrap();
        let n = mesh.n_nodes();
        let c = helmholtz_filter(&vec![0.7; n], 0.01, &m, &b).unwrap();
        assert!(c.iter().all(|v| (v - 0.7).abs() < 1e-12));
        let mut spike = vec![0.0; n];
        spike[40] = 1.0;
        let same = helmholtz_filter(&spike, 0.0, &m, &b).unwrap();
        assert_eq!(same.0, spike);
        let smooth = helmholtz_filter(&spike, 0.01, &m, &b).unwrap();
        assert!(smooth.max() < 1.0);
        let ones = vec![1.0; n];
        let before = crate::sparse::dot(&ones, &m.mul_vec(&spike));
        let after = crate::sparse::dot(&ones, &m.mul_vec(&smooth));
        assert!((before - after).abs() <= 1e-10 * before.abs());
    }
}
