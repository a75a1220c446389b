//! The optimization loop: state, adjoint, perturbation, evaluation, convergence check,
//! multiplier update and level set evolution, with a per-iteration history.

use serde::{Deserialize, Serialize};

use crate::constraints::{
    eval_stress_constraint, eval_volume_constraint, update_multiplier_field,
    update_multiplier_global, volume_fraction, AugmentedMultiplier, ConstraintEval, PenaltyParams,
};
use crate::elasticity::{Displacement, ElasticModel, Material, ProblemDef};
use crate::error::{Error, Result};
use crate::fem::{assemble_laplacian, assemble_mass, lump_mass, lumped_weights, NodalField};
use crate::levelset::{
    build_evolution_operator, delta_const, evolve, heaviside, initialize, tau, EvolutionOperator,
    EvolutionParams, InitPreset, LevelSetState,
};
use crate::mesh::{
    generate_lbracket_mesh, generate_rect_mesh, tag_boundaries, BoundarySegment, BoundaryTag, Mesh,
    RectRegion,
};
use crate::sensitivity::{
    arsinh_scale, normalization_factor, perturbation_mechanism, perturbation_stress,
    residual_sensitivity, HelmholtzFilter, SensitivityContext,
};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Domain {
    Rect {
        width: f64,
        height: f64,
    },
    /// Outer square of side `length` minus its upper-right corner square; the arms are
    /// `arm_fraction * length` wide.
    LBracket {
        length: f64,
        arm_fraction: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshResolution {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErsatzParams {
    pub e: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub phi0: InitPreset,
    pub phi_prev: InitPreset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceParams {
    pub window: usize,
    pub tol: f64,
    pub tol_constraint: f64,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        ConvergenceParams {
            window: 10,
            tol: 1e-3,
            tol_constraint: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    pub max_iterations: usize,
    pub seed: u64,
    pub domain: Domain,
    pub mesh: MeshResolution,
    pub boundaries: Vec<BoundarySegment>,
    #[serde(default)]
    pub fixed_solid: Vec<RectRegion>,
    pub material: Material,
    pub ersatz: ErsatzParams,
    pub problem: ProblemDef,
    pub evolution: EvolutionParams,
    pub penalty: PenaltyParams,
    pub init: InitSpec,
    pub convergence: ConvergenceParams,
}

impl RunConfig {
    /// Checks every invariant that does not need the mesh.
    pub fn validate(&self) -> Result<()> {
        let cfg = |key: &str, e: Error| Error::config(key, e.to_string());
        if self.max_iterations < 1 {
            return Err(Error::config("max_iterations", "must be at least 1"));
        }
        if self.mesh.nx < 1 || self.mesh.ny < 1 {
            return Err(Error::config("mesh", "nx and ny must be at least 1"));
        }
        if let Domain::LBracket { .. } = self.domain {
            if self.mesh.nx != self.mesh.ny {
                return Err(Error::config(
                    "mesh",
                    "the L-bracket grid is square: nx must equal ny",
                ));
            }
        }
        if !(self.convergence.tol > 0.0)
            || !(self.convergence.tol_constraint > 0.0)
            || self.convergence.window < 1
        {
            return Err(Error::config(
                "convergence",
                "window must be at least 1 and tolerances positive",
            ));
        }
        let ErsatzParams { e, q } = self.ersatz;
        if !(e > 0.0 && e < 1.0) || !(q > 1.0) {
            return Err(Error::config(
                "ersatz",
                format!("need 0 < e < 1 and q > 1, got e = {e}, q = {q}"),
            ));
        }
        self.material.validate().map_err(|e| cfg("material", e))?;
        self.problem.validate().map_err(|e| cfg("problem", e))?;
        self.evolution.validate()?;
        self.penalty.validate().map_err(|e| cfg("penalty", e))?;
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        let mesh = match self.domain {
            Domain::Rect { width, height } => {
                generate_rect_mesh(width, height, self.mesh.nx, self.mesh.ny)?
            }
            Domain::LBracket {
                length,
                arm_fraction,
            } => generate_lbracket_mesh(length, arm_fraction, self.mesh.nx)?,
        };
        let mut mesh = tag_boundaries(mesh, &self.boundaries)?;
        mesh.mark_fixed_solid(&self.fixed_solid);
        Ok(mesh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub objective: f64,
    pub objective_ratio: f64,
    /// `G` for the volume constraint, `max g` for the stress constraint.
    pub constraint: f64,
    pub volume_fraction: f64,
    pub max_von_mises: f64,
    pub normalization: f64,
    /// `λ`, or `max λ` for a multiplier field.
    pub lambda: f64,
    pub wall_ms: f64,
}

impl HistoryRow {
    /// Equality of everything except timing.
    pub fn same_values(&self, other: &HistoryRow) -> bool {
        HistoryRow {
            wall_ms: 0.0,
            ..*self
        } == HistoryRow {
            wall_ms: 0.0,
            ..*other
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub rows: Vec<HistoryRow>,
}

impl History {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&HistoryRow> {
        self.rows.last()
    }

    pub fn same_values(&self, other: &History) -> bool {
        self.len() == other.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.same_values(b))
    }
}

/// True iff the last `window` changes of `J/J₀` stay within `tol` and the latest constraint value
/// is at most `tol_constraint`.
pub fn check_convergence(history: &History, window: usize, tol: f64, tol_constraint: f64) -> bool {
    let rows = &history.rows;
    if window == 0 || rows.len() < window + 1 {
        return false;
    }
    let tail = &rows[rows.len() - window - 1..];
    let flat = tail
        .windows(2)
        .all(|w| (w[1].objective_ratio - w[0].objective_ratio).abs() <= tol);
    flat && tail[window].constraint <= tol_constraint
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveCounters {
    pub state: usize,
    pub adjoint: usize,
    pub evolution: usize,
}

/// The driving source of one iteration at its successive stages.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationField {
    pub raw: NodalField,
    pub scaled: Option<NodalField>,
    pub regularized: Option<NodalField>,
    pub normalization: f64,
}

impl PerturbationField {
    /// The stage that feeds the evolution.
    pub fn effective(&self) -> &NodalField {
        self.regularized
            .as_ref()
            .or(self.scaled.as_ref())
            .unwrap_or(&self.raw)
    }
}

/// Fields of the most recently evaluated configuration.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub phi: NodalField,
    pub theta: NodalField,
    pub tau: NodalField,
    pub u: Displacement,
    pub v: Displacement,
    /// Nodal von Mises stress of the Ersatz-weighted material, `τ σ_M`.
    pub von_mises: NodalField,
    pub constraint: ConstraintEval,
    pub perturbation: PerturbationField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Converged,
    MaxIterations,
}

/// Everything fixed for the whole run.
#[derive(Debug, Clone)]
struct Setup {
    mesh: Mesh,
    model: ElasticModel,
    mass: CsrMatrix,
    lumped: Vec<f64>,
    design_weights: Vec<f64>,
    v0: f64,
    operator: EvolutionOperator,
    filter: Option<HelmholtzFilter>,
    dirichlet: Vec<(usize, f64)>,
}

/// Level set boundary values: 1 on loaded ports and fixed solid, −1 on void strips.
pub fn evolution_dirichlet(mesh: &Mesh) -> Vec<(usize, f64)> {
    let mut value = vec![None; mesh.n_nodes()];
    for tag in [BoundaryTag::GammaVoidA, BoundaryTag::GammaVoidB] {
        for n in mesh.nodes_with_tag(tag) {
            value[n] = Some(-1.0);
        }
    }
    let mut solid = mesh.fixed_solid_nodes();
    for tag in [
        BoundaryTag::GammaT,
        BoundaryTag::GammaA,
        BoundaryTag::GammaB,
    ] {
        solid.extend(mesh.nodes_with_tag(tag));
    }
    for n in solid {
        value[n] = Some(1.0);
    }
    value
        .iter()
        .enumerate()
        .filter_map(|(n, v)| v.map(|v| (n, v)))
        .collect()
}

impl Setup {
    fn new(config: &RunConfig) -> Result<Self> {
        let mesh = config.build_mesh()?;
        let model = ElasticModel::new(&mesh, &config.material, &config.problem)?;
        let mass = assemble_mass(&mesh)?;
        let lap = assemble_laplacian(&mesh)?;
        let lumped = lump_mass(&mass)?;
        let design_weights = lumped_weights(&mesh, |e| !mesh.is_fixed(e))?;
        let v0: f64 = design_weights.iter().sum();
        if !(v0 > 0.0) {
            return Err(Error::config(
                "fixed_solid",
                "the fixed solid region covers the whole domain",
            ));
        }
        let dirichlet = evolution_dirichlet(&mesh);
        let operator =
            build_evolution_operator(&config.evolution, &mass, &lap, &lumped, &dirichlet)?;
        let filter = match config.problem {
            ProblemDef::StressBiObjective {
                helmholtz_filter: true,
                kappa,
                ..
            } => Some(HelmholtzFilter::new(kappa, &mass, &lap)?),
            _ => None,
        };
        Ok(Setup {
            mesh,
            model,
            mass,
            lumped,
            design_weights,
            v0,
            operator,
            filter,
            dirichlet,
        })
    }
}

/// One optimization run, advanced an iteration at a time.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: RunConfig,
    setup: Setup,
    level_set: LevelSetState,
    multiplier: AugmentedMultiplier,
    history: History,
    counters: SolveCounters,
    j0: Option<f64>,
    snapshot: Option<Snapshot>,
    outcome: StepOutcome,
    filter_mean_error: f64,
}

impl Optimizer {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        for w in config.evolution.warnings() {
            log::warn!("{w}");
        }
        let setup = Setup::new(config)?;
        let level_set = initialize(
            &setup.mesh,
            &config.init.phi0,
            &config.init.phi_prev,
            &setup.dirichlet,
            config.seed,
        )?;
        let multiplier = match config.problem {
            ProblemDef::StressBiObjective { .. } => {
                AugmentedMultiplier::field(setup.mesh.n_nodes(), &config.penalty)
            }
            _ => AugmentedMultiplier::scalar(&config.penalty),
        };
        Ok(Optimizer {
            config: config.clone(),
            setup,
            level_set,
            multiplier,
            history: History::default(),
            counters: SolveCounters::default(),
            j0: None,
            snapshot: None,
            outcome: StepOutcome::Continue,
            filter_mean_error: 0.0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn mesh(&self) -> &Mesh {
        &self.setup.mesh
    }

    pub fn model(&self) -> &ElasticModel {
        &self.setup.model
    }

    pub fn level_set(&self) -> &LevelSetState {
        &self.level_set
    }

    pub fn multiplier(&self) -> &AugmentedMultiplier {
        &self.multiplier
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn counters(&self) -> SolveCounters {
        self.counters
    }

    pub fn snapshot(&self) -> Option<&Snapshot> {
        self.snapshot.as_ref()
    }

    pub fn outcome(&self) -> StepOutcome {
        self.outcome
    }

    pub fn design_volume(&self) -> f64 {
        self.setup.v0
    }

    /// Largest relative change of `1ᵀM f` across the Helmholtz filter so far.
    pub fn filter_mean_error(&self) -> f64 {
        self.filter_mean_error
    }

    pub fn is_finished(&self) -> bool {
        self.outcome != StepOutcome::Continue
    }

    fn objective(&self, u: &[f64], theta: &[f64]) -> Result<(f64, f64)> {
        let vf = volume_fraction(theta, &self.setup.design_weights, self.setup.v0);
        let model = &self.setup.model;
        let j = match self.config.problem {
            ProblemDef::Compliance { .. } => model.compliance(u),
            ProblemDef::Mechanism { .. } => -model.output_work(u).unwrap_or(0.0),
            ProblemDef::StressBiObjective { weight, .. } => {
                weight * vf + 0.5 * (1.0 - weight) * model.compliance(u)
            }
        };
        if !j.is_finite() {
            return Err(Error::degenerate(format!("objective evaluated to {j}")));
        }
        Ok((j, vf))
    }

    fn context(&self, objective_scale: f64) -> SensitivityContext {
        SensitivityContext {
            ersatz_floor: self.config.ersatz.e,
            exponent: self.config.ersatz.q,
            v0: self.setup.v0,
            objective_scale,
            region_share: self
                .setup
                .design_weights
                .iter()
                .zip(&self.setup.lumped)
                .map(|(d, l)| d / l)
                .collect(),
        }
    }

    /// Runs one iteration. Returns the outcome after it; once finished, further calls are no-ops.
    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.is_finished() {
            return Ok(self.outcome);
        }
        let iteration = self.history.len();
        self.step_inner(iteration).map_err(|e| Error::Iteration {
            iteration,
            source: Box::new(e),
        })
    }

    fn step_inner(&mut self, iteration: usize) -> Result<StepOutcome> {
        let started = now();
        let ErsatzParams { e, q } = self.config.ersatz;
        let beta = self.config.evolution.beta;
        let phi = self.level_set.phi.clone();
        let theta = heaviside(&phi, beta);
        let tau_nodal = tau(&theta, e, q)?;
        let model = &self.setup.model;

        let state = model.solve_state(&model.element_tau(&tau_nodal))?;
        self.counters.state += 1;
        let v = model.solve_adjoint(&state, &tau_nodal, &self.multiplier)?;
        self.counters.adjoint += 1;
        let u = state.u;

        let (j, vf) = self.objective(&u, &theta)?;
        let j0 = *self.j0.get_or_insert(j);
        let scale = match self.config.problem {
            ProblemDef::StressBiObjective { .. } => 1.0,
            _ if j0.abs() > f64::MIN_POSITIVE => 1.0 / j0.abs(),
            _ => {
                log::warn!("initial objective vanished; sensitivities are left unscaled");
                1.0
            }
        };
        let ctx = self.context(scale);
        let sigma = model.von_mises(&u);
        let weighted: NodalField = NodalField(
            sigma
                .iter()
                .zip(tau_nodal.iter())
                .map(|(s, t)| s * t)
                .collect(),
        );
        let c_f = self.config.evolution.c_f;

        let (constraint, perturbation) = match self.config.problem {
            ProblemDef::StressBiObjective {
                yield_stress,
                gamma,
                arsinh_scaling,
                ..
            } => {
                let eval =
                    eval_stress_constraint(&sigma, &tau_nodal, yield_stress, &self.multiplier)?;
                let raw = perturbation_stress(model, &u, &v, &theta, &self.multiplier, &ctx)?;
                let scaled = arsinh_scaling.then(|| arsinh_scale(&raw, gamma));
                let input = scaled.as_ref().unwrap_or(&raw);
                let regularized = match &self.setup.filter {
                    Some(filter) => {
                        let out = filter.apply(input)?;
                        let ones = vec![1.0; out.len()];
                        let before = crate::sparse::dot(&ones, &self.setup.mass.mul_vec(input));
                        let after = crate::sparse::dot(&ones, &self.setup.mass.mul_vec(&out));
                        let size: f64 = input
                            .iter()
                            .zip(&self.setup.lumped)
                            .map(|(f, w)| f.abs() * w)
                            .sum();
                        if size > 0.0 {
                            self.filter_mean_error =
                                self.filter_mean_error.max((after - before).abs() / size);
                        }
                        Some(out)
                    }
                    None => None,
                };
                let stage = regularized.as_ref().or(scaled.as_ref()).unwrap_or(&raw);
                let (normalization, _) =
                    normalization_factor(stage, &self.setup.lumped, self.setup.v0, c_f);
                (
                    eval,
                    PerturbationField {
                        raw,
                        scaled,
                        regularized,
                        normalization,
                    },
                )
            }
            _ => {
                let target = self
                    .config
                    .problem
                    .volume_fraction()
                    .expect("volume-constrained problem");
                let eval = eval_volume_constraint(vf, target, &self.multiplier);
                let raw =
                    perturbation_mechanism(model, &u, &v, &theta, &eval, &self.multiplier, &ctx)?;
                let dr = residual_sensitivity(model, &u, &v, &theta, &ctx)?;
                let (normalization, _) =
                    normalization_factor(&dr, &self.setup.lumped, self.setup.v0, c_f);
                (
                    eval,
                    PerturbationField {
                        raw,
                        scaled: None,
                        regularized: None,
                        normalization,
                    },
                )
            }
        };

        let lambda = if self.multiplier.is_field() {
            self.multiplier.max_lambda()
        } else {
            self.multiplier.lambda()[0]
        };
        let row = HistoryRow {
            iteration,
            objective: j,
            objective_ratio: if iteration == 0 { 1.0 } else { j / j0 },
            constraint: constraint.max_value(),
            volume_fraction: vf,
            max_von_mises: weighted.max(),
            normalization: perturbation.normalization,
            lambda,
            wall_ms: 0.0,
        };
        self.history.rows.push(row);
        let conv = self.config.convergence;
        let converged =
            check_convergence(&self.history, conv.window, conv.tol, conv.tol_constraint);

        let source: Vec<f64> = {
            let s = delta_const(beta) / perturbation.normalization;
            perturbation.effective().iter().map(|f| f * s).collect()
        };
        self.snapshot = Some(Snapshot {
            phi,
            theta,
            tau: tau_nodal,
            u,
            v,
            von_mises: weighted,
            constraint: constraint.clone(),
            perturbation,
        });

        self.outcome = if converged {
            StepOutcome::Converged
        } else {
            self.multiplier = if self.multiplier.is_field() {
                update_multiplier_field(&self.multiplier, &constraint.value)?
            } else {
                update_multiplier_global(&self.multiplier, constraint.value[0])
            };
            if self.multiplier.lambda().iter().any(|l| !l.is_finite()) {
                return Err(Error::degenerate("multiplier is not finite"));
            }
            self.level_set = evolve(&self.level_set, &self.setup.operator, &source)?;
            self.counters.evolution += 1;
            if !self.level_set.in_range() {
                return Err(Error::degenerate("level set left [-1, 1] after evolution"));
            }
            if self.history.len() >= self.config.max_iterations {
                StepOutcome::MaxIterations
            } else {
                StepOutcome::Continue
            }
        };
        if let Some(last) = self.history.rows.last_mut() {
            last.wall_ms = elapsed_ms(started);
        }
        Ok(self.outcome)
    }

    /// Steps until convergence or the iteration limit, calling `observer` after every iteration.
    pub fn run_with(
        &mut self,
        mut observer: impl FnMut(&Optimizer) -> Result<()>,
    ) -> Result<StepOutcome> {
        while !self.is_finished() {
            self.step()?;
            observer(self)?;
        }
        Ok(self.outcome)
    }
}

/// Runs a configuration to completion.
pub fn run(config: &RunConfig) -> Result<(History, LevelSetState, Displacement)> {
    let mut opt = Optimizer::new(config)?;
    opt.run_with(|_| Ok(()))?;
    let u = opt.snapshot.map(|s| s.u).unwrap_or_default();
    Ok((opt.history, opt.level_set, u))
}

#[cfg(not(target_arch = "wasm32"))]
fn now() -> Option<std::time::Instant> {
    Some(std::time::Instant::now())
}

#[cfg(target_arch = "wasm32")]
fn now() -> Option<()> {
    None
}

#[cfg(not(target_arch = "wasm32"))]
fn elapsed_ms(t: Option<std::time::Instant>) -> f64 {
    t.map_or(0.0, |t| t.elapsed().as_secs_f64() * 1e3)
}

#[cfg(target_arch = "wasm32")]
fn elapsed_ms(_: Option<()>) -> f64 {
    0.0
}
