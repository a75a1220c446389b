//! Augmented Lagrangian handling of the global volume and the local stress constraints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyParams {
    pub r0: f64,
    pub growth: f64,
    pub r_max: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        PenaltyParams {
            r0: 1.0,
            growth: 1.1,
            r_max: 100.0,
        }
    }
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.growth >= 1.0 && self.r_max >= self.r0) {
            return Err(Error::invalid(format!(
                "penalty needs r0 > 0, growth >= 1 and r_max >= r0 (got {}, {}, {})",
                self.r0, self.growth, self.r_max
            )));
        }
        Ok(())
    }
}

/// Multiplier `λ` (one value for the volume constraint, one per node for the stress
/// constraint), its previous value `λ′` and the penalty state.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMultiplier {
    lambda: Vec<f64>,
    lambda_prev: Vec<f64>,
    pub penalty: f64,
    pub growth: f64,
    pub r_max: f64,
}

impl AugmentedMultiplier {
    pub fn scalar(p: &PenaltyParams) -> Self {
        Self::field(1, p)
    }

    pub fn field(n: usize, p: &PenaltyParams) -> Self {
        AugmentedMultiplier {
            lambda: vec![0.0; n],
            lambda_prev: vec![0.0; n],
            penalty: p.r0,
            growth: p.growth,
            r_max: p.r_max,
        }
    }

    /// Overrides `λ` and `λ′`; both must have the current length and be non-negative.
    pub fn with_values(mut self, lambda: Vec<f64>, lambda_prev: Vec<f64>) -> Result<Self> {
        if lambda.len() != self.lambda.len() || lambda_prev.len() != self.lambda.len() {
            return Err(Error::invalid("multiplier length mismatch"));
        }
        if lambda.iter().chain(&lambda_prev).any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("multipliers must be non-negative"));
        }
        self.lambda = lambda;
        self.lambda_prev = lambda_prev;
        Ok(self)
    }

    pub fn with_penalty(mut self, r: f64) -> Self {
        self.penalty = r;
        self
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda_prev(&self) -> &[f64] {
        &self.lambda_prev
    }

    pub fn is_field(&self) -> bool {
        self.lambda.len() != 1
    }

    pub fn max_lambda(&self) -> f64 {
        self.lambda.iter().copied().fold(0.0, f64::max)
    }

    fn grown_penalty(&self) -> f64 {
        (self.penalty * self.growth).min(self.r_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintEval {
    /// `G` (length 1) or nodal `g`.
    pub value: Vec<f64>,
    /// 1.0 where `λ′ + r G > 0`, else 0.0.
    pub indicator: Vec<f64>,
    /// `Ḡ = G 𝕀 + (−λ′/r)(1 − 𝕀)`.
    pub augmented: Vec<f64>,
}

impl ConstraintEval {
    pub fn max_value(&self) -> f64 {
        self.value.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn evaluate(value: Vec<f64>, m: &AugmentedMultiplier) -> ConstraintEval {
    let r = m.penalty;
    let lp = |i: usize| m.lambda_prev[if m.lambda_prev.len() == 1 { 0 } else { i }];
    let indicator: Vec<f64> = value
        .iter()
        .enumerate()
        .map(|(i, g)| if lp(i) + r * g > 0.0 { 1.0 } else { 0.0 })
        .collect();
    let augmented = value
        .iter()
        .zip(&indicator)
        .enumerate()
        .map(|(i, (g, ind))| if *ind == 1.0 { *g } else { -lp(i) / r })
        .collect();
    ConstraintEval {
        value,
        indicator,
        augmented,
    }
}

/// `(1/V₀) Σ w_i Θ_i` with nodal quadrature weights of the constrained region.
pub fn volume_fraction(theta: &[f64], weights: &[f64], v0: f64) -> f64 {
    theta.iter().zip(weights).map(|(t, w)| t * w).sum::<f64>() / v0
}

pub fn eval_volume_constraint(
    volume_fraction: f64,
    target: f64,
    multiplier: &AugmentedMultiplier,
) -> ConstraintEval {
    evaluate(vec![volume_fraction - target], multiplier)
}

/// `∂G*/∂Θ` density for the volume constraint: `(λ + r G) 𝕀 / V₀`.
pub fn volume_sensitivity(eval: &ConstraintEval, multiplier: &AugmentedMultiplier, v0: f64) -> f64 {
    (multiplier.lambda[0] + multiplier.penalty * eval.value[0]) * eval.indicator[0] / v0
}

/// `λ ← λ + r max(G, 0)`, `λ′ ← λ`, then the penalty grows toward its cap.
pub fn update_multiplier_global(multiplier: &AugmentedMultiplier, g: f64) -> AugmentedMultiplier {
    let mut next = multiplier.clone();
    next.lambda_prev = multiplier.lambda.clone();
    next.lambda = vec![multiplier.lambda[0] + multiplier.penalty * g.max(0.0)];
    next.penalty = multiplier.grown_penalty();
    next
}

/// Nodal `g = σ_M τ / f_y − 1` and its indicator.
pub fn eval_stress_constraint(
    sigma_vm: &[f64],
    tau: &[f64],
    yield_stress: f64,
    multiplier: &AugmentedMultiplier,
) -> Result<ConstraintEval> {
    if sigma_vm.len() != tau.len()
        || (multiplier.lambda.len() != tau.len() && multiplier.lambda.len() != 1)
    {
        return Err(Error::invalid(
            "stress, τ and multiplier fields differ in length",
        ));
    }
    let g = sigma_vm
        .iter()
        .zip(tau)
        .map(|(s, t)| s * t / yield_stress - 1.0)
        .collect();
    Ok(evaluate(g, multiplier))
}

/// Nodewise `λ ← max(λ + r g, 0)`, `λ′ ← λ`, then the penalty grows toward its cap.
pub fn update_multiplier_field(
    multiplier: &AugmentedMultiplier,
    g: &[f64],
) -> Result<AugmentedMultiplier> {
    if g.len() != multiplier.lambda.len() {
        return Err(Error::invalid(
            "constraint field and multiplier differ in length",
        ));
    }
    let mut next = multiplier.clone();
    next.lambda_prev = multiplier.lambda.clone();
    next.lambda = multiplier
        .lambda
        .iter()
        .zip(g)
        .map(|(l, g)| (l + multiplier.penalty * g).max(0.0))
        .collect();
    next.penalty = multiplier.grown_penalty();
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(lambda: f64, lambda_prev: f64, r: f64) -> AugmentedMultiplier {
        AugmentedMultiplier::scalar(&PenaltyParams::default())
            .with_values(vec![lambda], vec![lambda_prev])
            .unwrap()
            .with_penalty(r)
    }

    #[test]
    fn volume_fraction_values() {
        let w = [0.25; 4];
        assert_eq!(volume_fraction(&[1.0; 4], &w, 1.0), 1.0);
        assert!((volume_fraction(&[0.45; 4], &w, 1.0) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn indicator_branches() {
        let e = eval_volume_constraint(0.55, 0.45, &scalar(0.0, 0.0, 10.0));
        assert_eq!(e.indicator, vec![1.0]);
        assert!((e.augmented[0] - 0.1).abs() < 1e-15);
        let e = eval_volume_constraint(0.0, 0.5, &scalar(1.0, 1.0, 1.0));
        assert_eq!(e.indicator, vec![1.0]);
        let e = eval_volume_constraint(0.0, 0.5, &scalar(0.0, 0.0, 0.5));
        assert_eq!((e.indicator[0], e.augmented[0]), (0.0, 0.0));
    }

    #[test]
    fn global_update() {
        let next = update_multiplier_global(&scalar(0.0, 0.0, 10.0).with_penalty(10.0), 0.2);
        assert!((next.lambda()[0] - 2.0).abs() < 1e-15);
        assert_eq!(next.lambda_prev(), &[0.0]);
        let same = update_multiplier_global(&scalar(0.7, 0.3, 1.0), -0.1);
        assert_eq!(same.lambda(), &[0.7]);
        let capped = update_multiplier_global(&scalar(0.0, 0.0, 100.0), 0.0);
        assert_eq!(capped.penalty, 100.0);
        let grown = update_multiplier_global(&scalar(0.0, 0.0, 1.0), 0.0);
        assert!((grown.penalty - 1.1).abs() < 1e-15);
    }

    #[test]
    fn stress_constraint() {
        let m = AugmentedMultiplier::field(3, &PenaltyParams::default());
        let e =
            eval_stress_constraint(&[42.0, 0.0, 42.0 / 1e-3], &[1.0, 1.0, 1e-3], 42.0, &m).unwrap();
        assert_eq!(e.value[0], 0.0);
        assert_eq!(e.value[1], -1.0);
        assert!(e.value[2].abs() < 1e-12);
        assert_eq!(e.indicator[1], 0.0);
        let m2 = m.clone().with_values(vec![2.0; 3], vec![2.0; 3]).unwrap();
        let e2 = eval_stress_constraint(&[0.0; 3], &[1.0; 3], 42.0, &m2).unwrap();
        assert_eq!(e2.indicator, vec![1.0; 3]);

        let zero = update_multiplier_field(&m, &[-1.0; 3]).unwrap();
        assert_eq!(zero.lambda(), &[0.0; 3]);
        let one = update_multiplier_field(&m2, &[-1.0; 3]).unwrap();
        assert_eq!(one.lambda(), &[1.0; 3]);
    }
}
