use wavetopo::elasticity::{PlaneMode, ProblemDef};
use wavetopo::levelset::{InitPreset, Scheme};
use wavetopo::preset::{dump_preset, lbracket_scheme_settings, preset, PresetId};

fn golden(id: PresetId) -> String {
    let path = format!("{}/tests/golden/{id}.toml", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

#[test]
fn dumps_match_golden_files() {
    for id in PresetId::ALL {
        assert_eq!(
            dump_preset(id).unwrap(),
            golden(id),
            "{id} drifted from its golden file"
        );
        assert_eq!(
            wavetopo::config::parse_config(&golden(id)).unwrap(),
            preset(id)
        );
    }
}

#[test]
fn compliance_parameters() {
    for id in [PresetId::AsymPlate, PresetId::Cantilever, PresetId::Girder] {
        let c = preset(id);
        assert_eq!(c.material.youngs_modulus, 210e9);
        assert_eq!(c.material.poisson_ratio, 0.3);
        assert_eq!(c.material.mode, PlaneMode::PlaneStrain);
        assert_eq!((c.ersatz.q, c.ersatz.e), (3.0, 1e-3));
        assert_eq!(c.evolution.c_f, 1.0);
        assert_eq!(c.init.phi0, InitPreset::Filled);
        let ProblemDef::Compliance {
            traction,
            volume_fraction,
        } = c.problem
        else {
            panic!("{id}")
        };
        assert_eq!(traction[0].hypot(traction[1]), 1e3);
        assert_eq!(volume_fraction, 0.45);
    }
    let c = preset(PresetId::Cantilever);
    assert_eq!(
        (
            c.evolution.scheme,
            c.evolution.ell,
            c.evolution.m,
            c.evolution.k
        ),
        (Scheme::We, 0.008, 0.0, 0.0)
    );
    assert_eq!(c.evolution.beta, 5.0);
    let g = preset(PresetId::Girder);
    assert_eq!(
        (g.evolution.ell, g.evolution.m, g.evolution.k),
        (0.010, 1.0, 0.011)
    );
}

#[test]
fn mechanism_parameters() {
    for (id, vf, rb) in [
        (PresetId::Inverter, 0.20, [-1.0, 0.0]),
        (PresetId::Gripper, 0.30, [0.0, -1.0]),
    ] {
        let c = preset(id);
        assert_eq!(
            (c.material.youngs_modulus, c.material.poisson_ratio),
            (1.0, 0.3)
        );
        assert_eq!(c.evolution.beta, 2.0);
        assert!(!c.fixed_solid.is_empty());
        let ProblemDef::Mechanism {
            volume_fraction,
            k_a,
            k_b,
            r_a,
            r_b,
            ..
        } = c.problem
        else {
            panic!("{id}")
        };
        assert_eq!(
            (volume_fraction, k_a, k_b, r_a, r_b),
            (vf, 1e5, 1e3, [1.0, 0.0], rb)
        );
        let wavetopo::optimizer::Domain::Rect { width, .. } = c.domain else {
            panic!("{id}")
        };
        assert_eq!(width, 0.1);
    }
}

#[test]
fn lbracket_parameters() {
    let c = preset(PresetId::LBracket);
    assert_eq!(c.material.mode, PlaneMode::PlaneStress);
    assert_eq!(
        (c.material.youngs_modulus, c.material.poisson_ratio),
        (1.0, 0.3)
    );
    let wavetopo::optimizer::Domain::LBracket { length, .. } = c.domain else {
        panic!()
    };
    assert_eq!(length, 1.5);
    let ProblemDef::StressBiObjective {
        traction,
        yield_stress,
        weight,
        gamma,
        kappa,
        ..
    } = c.problem
    else {
        panic!()
    };
    assert_eq!(
        (yield_stress, weight, gamma, kappa),
        (42.0, 0.99, 3.0, 1e-5)
    );
    // Unit total force over the load strip.
    let strip = c
        .boundaries
        .iter()
        .find(|b| b.tag == wavetopo::mesh::BoundaryTag::GammaT)
        .unwrap();
    assert!((traction[1].abs() * (strip.to - strip.from) - 1.0).abs() < 1e-12);
    assert_eq!(
        (c.evolution.scheme, c.evolution.beta, c.evolution.c_f),
        (Scheme::Dgwe, 5.0, 0.1)
    );

    let table = [
        (Scheme::We, 0.02, 4.0),
        (Scheme::Dwe, 0.01, 4.0),
        (Scheme::Bwe, 0.004, 3.0),
        (Scheme::Dbwe, 0.004, 3.0),
        (Scheme::Gwe, 0.1, 3.0),
        (Scheme::Dgwe, 0.1, 3.0),
        (Scheme::Rde, 0.01, 4.0),
    ];
    for (s, c_f, gamma) in table {
        assert_eq!(lbracket_scheme_settings(s), (c_f, gamma), "{s}");
    }
}
