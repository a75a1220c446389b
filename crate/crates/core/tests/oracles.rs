use approx::assert_relative_eq;
use proptest::prelude::*;

use wavetopo::constraints::{
    update_multiplier_field, update_multiplier_global, AugmentedMultiplier, PenaltyParams,
};
use wavetopo::elasticity::ElasticModel;
use wavetopo::fem::{assemble_laplacian, assemble_mass, lump_mass};
use wavetopo::levelset::{
    build_evolution_operator, evolve, heaviside_scalar, tau, EvolutionParams, LevelSetState, Scheme,
};
use wavetopo::mesh::generate_rect_mesh;
use wavetopo::optimizer::StepOutcome;
use wavetopo::sensitivity::HelmholtzFilter;
use wavetopo::sparse::dot;
use wavetopo::{preset, Optimizer, PresetId, RunConfig};

fn small(id: PresetId, iterations: usize) -> RunConfig {
    let mut c = preset(id);
    c.mesh.nx /= 2;
    c.mesh.ny /= 2;
    c.max_iterations = iterations;
    c
}

fn cantilever_model() -> (wavetopo::mesh::Mesh, ElasticModel) {
    let c = small(PresetId::Cantilever, 1);
    let mesh = c.build_mesh().unwrap();
    let model = ElasticModel::new(&mesh, &c.material, &c.problem).unwrap();
    (mesh, model)
}

#[test]
fn stiffness_has_rigid_body_null_space() {
    let (mesh, model) = cantilever_model();
    let k = model.stiffness(&vec![1.0; mesh.n_elements()]).unwrap();
    let scale = k.max_abs();
    let modes: [fn([f64; 2]) -> [f64; 2]; 3] = [|_| [1.0, 0.0], |_| [0.0, 1.0], |p| [-p[1], p[0]]];
    for mode in modes {
        let u: Vec<f64> = mesh.nodes().iter().flat_map(|&p| mode(p)).collect();
        let r = k.mul_vec(&u);
        assert!(r.iter().all(|v| v.abs() < 1e-12 * scale));
    }
}

#[test]
fn reciprocity_and_linearity() {
    let (mesh, model) = cantilever_model();
    let n = mesh.n_nodes();
    let theta: Vec<f64> = mesh
        .nodes()
        .iter()
        .map(|p| 0.5 + 0.4 * (3.0 * p[0]).sin() * (4.0 * p[1]).cos())
        .collect();
    let tn = tau(&theta, 1e-3, 3.0).unwrap();
    let te = model.element_tau(&tn);
    let f1: Vec<f64> = (0..2 * n).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
    let f2: Vec<f64> = (0..2 * n).map(|i| ((i * 3) % 7) as f64 - 3.0).collect();
    let u1 = model.solve_state_with_load(&te, &f1).unwrap().u;
    let u2 = model.solve_state_with_load(&te, &f2).unwrap().u;
    // Constrained dofs carry no work, so zero them in the loads before pairing.
    let free = |f: &[f64]| {
        let mut f = f.to_vec();
        for &(d, _) in model.constrained_dofs() {
            f[d] = 0.0;
        }
        f
    };
    assert_relative_eq!(
        dot(&u1, &free(&f2)),
        dot(&u2, &free(&f1)),
        max_relative = 1e-10
    );

    let flipped: Vec<f64> = f1.iter().map(|v| -v).collect();
    let u3 = model.solve_state_with_load(&te, &flipped).unwrap().u;
    assert!(u1.iter().zip(u3.iter()).all(|(a, b)| *a == -*b));
}

#[test]
fn histories_are_deterministic() {
    let mut c = small(PresetId::Cantilever, 12);
    c.init.phi_prev = wavetopo::levelset::InitPreset::Perforated;
    let a = wavetopo::optimizer::run(&c).unwrap();
    let b = wavetopo::optimizer::run(&c).unwrap();
    assert!(a.0.same_values(&b.0));
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
}

#[test]
fn loop_order_and_counters() {
    for id in PresetId::ALL {
        let mut opt = Optimizer::new(&small(id, 5)).unwrap();
        let outcome = opt.run_with(|_| Ok(())).unwrap();
        let rows = opt.history().len();
        let c = opt.counters();
        assert_eq!((c.state, c.adjoint), (rows, rows), "{id}");
        match outcome {
            StepOutcome::MaxIterations => assert_eq!(c.evolution, rows, "{id}"),
            StepOutcome::Converged => assert_eq!(c.evolution, rows - 1, "{id}"),
            StepOutcome::Continue => unreachable!(),
        }
        let first = &opt.history().rows[0];
        assert_eq!(first.objective_ratio, 1.0);
        assert!(
            first.objective.is_finite() && first.objective != 0.0,
            "{id}"
        );
        // Further steps are no-ops once finished.
        opt.step().unwrap();
        assert_eq!(opt.history().len(), rows);
    }
}

#[test]
fn compliance_start_is_positive() {
    for id in [PresetId::AsymPlate, PresetId::Cantilever, PresetId::Girder] {
        let mut opt = Optimizer::new(&small(id, 1)).unwrap();
        opt.step().unwrap();
        assert!(opt.history().rows[0].objective > 0.0, "{id}");
    }
}

fn operator(scheme: Scheme, ell: f64, m: f64, k: f64) -> wavetopo::levelset::EvolutionOperator {
    let mesh = generate_rect_mesh(2.0, 1.0, 8, 4).unwrap();
    let mm = assemble_mass(&mesh).unwrap();
    let b = assemble_laplacian(&mesh).unwrap();
    let ml = lump_mass(&mm).unwrap();
    let params = EvolutionParams {
        scheme,
        ell,
        m,
        k,
        beta: 5.0,
        c_f: 1.0,
    };
    build_evolution_operator(&params, &mm, &b, &ml, &[(0, 1.0), (44, -1.0)]).unwrap()
}

proptest! {
    #[test]
    fn heaviside_is_bounded_and_monotone(a in -1.0f64..1.0, d in 0.0f64..1.0, beta in 0.5f64..20.0) {
        let (x, y) = (heaviside_scalar(a, beta), heaviside_scalar(a + d, beta));
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert!(x <= y);
        prop_assert!((heaviside_scalar(-a, beta) - (1.0 - x)).abs() < 1e-15);
    }

    #[test]
    fn ersatz_stays_in_band(theta in prop::collection::vec(0.0f64..=1.0, 1..40), e in 1e-6f64..0.5) {
        let t = tau(&theta, e, 3.0).unwrap();
        prop_assert!(t.iter().all(|v| *v >= e && *v <= 1.0));
    }

    #[test]
    fn scalar_multiplier_never_decreases(gs in prop::collection::vec(-1.0f64..1.0, 1..30)) {
        let mut m = AugmentedMultiplier::scalar(&PenaltyParams::default());
        for g in gs {
            let next = update_multiplier_global(&m, g);
            prop_assert!(next.lambda()[0] >= m.lambda()[0]);
            prop_assert!(next.penalty >= m.penalty && next.penalty <= next.r_max);
            m = next;
        }
    }

    #[test]
    fn field_multiplier_stays_non_negative(gs in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 6), 1..20)) {
        let mut m = AugmentedMultiplier::field(6, &PenaltyParams::default());
        for g in gs {
            m = update_multiplier_field(&m, &g).unwrap();
            prop_assert!(m.lambda().iter().all(|l| *l >= 0.0));
        }
    }

    #[test]
    fn evolution_keeps_range_and_boundary_values(
        source in prop::collection::vec(-50.0f64..50.0, 45),
        phi in prop::collection::vec(-1.0f64..=1.0, 45),
        scheme in prop::sample::select(vec![Scheme::We, Scheme::Dgwe, Scheme::Rde]),
    ) {
        let (ell, m, k) = match scheme {
            Scheme::We => (0.05, 0.0, 0.0),
            Scheme::Dgwe => (0.05, 1.0, 0.05),
            _ => (0.05, 1.0, 0.0),
        };
        let op = operator(scheme, ell, m, k);
        let state = LevelSetState { phi: phi.clone().into(), phi_prev: phi.into(), iteration: 0 };
        let next = evolve(&state, &op, &source).unwrap();
        prop_assert!(next.in_range());
        prop_assert_eq!((next.phi[0], next.phi[44]), (1.0, -1.0));
        prop_assert_eq!(next.iteration, 1);
    }

    #[test]
    fn helmholtz_filter_preserves_the_mean(f in prop::collection::vec(-10.0f64..10.0, 45), kappa in 1e-6f64..1e-2) {
        let mesh = generate_rect_mesh(2.0, 1.0, 8, 4).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        let b = assemble_laplacian(&mesh).unwrap();
        let out = HelmholtzFilter::new(kappa, &m, &b).unwrap().apply(&f).unwrap();
        let ones = vec![1.0; f.len()];
        let before = dot(&ones, &m.mul_vec(&f));
        let after = dot(&ones, &m.mul_vec(&out));
        let size: f64 = f.iter().map(|v| v.abs()).sum::<f64>() * mesh.area() / f.len() as f64;
        prop_assert!((after - before).abs() <= 1e-10 * size.max(1e-30));
    }
}
