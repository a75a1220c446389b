//! Browser bindings: run a small optimization step by step and read back the material layout.

use wasm_bindgen::prelude::*;
use wavetopo::config::Overrides;
use wavetopo::export::raster;
use wavetopo::levelset::{heaviside_scalar, Scheme};
use wavetopo::preset::{lbracket_scheme_settings, preset, PresetId};
use wavetopo::{Optimizer, RunConfig};

/// Demo grids are coarsened so a step stays well under a frame budget.
pub fn demo_config(
    preset_id: &str,
    scheme: &str,
    beta: f64,
    scale: usize,
) -> Result<RunConfig, String> {
    let id: PresetId = preset_id
        .parse()
        .map_err(|e: wavetopo::Error| e.to_string())?;
    let scheme: Scheme = scheme.parse().map_err(|e: wavetopo::Error| e.to_string())?;
    let base = preset(id);
    let scale = scale.max(1);
    let mut o = Overrides {
        scheme: Some(scheme),
        beta: Some(beta),
        nx: Some(base.mesh.nx / scale),
        ny: Some(base.mesh.ny / scale),
        max_iterations: Some(300),
        ..Overrides::default()
    };
    let (ell_ok, m_ok, k_ok) = scheme.allows();
    let ev = &base.evolution;
    o.ell = Some(if ell_ok {
        if ev.ell > 0.0 {
            ev.ell
        } else {
            0.010
        }
    } else {
        0.0
    });
    o.m = Some(if m_ok { 1.0 } else { 0.0 });
    o.k = Some(if k_ok { 0.011 } else { 0.0 });
    if id == PresetId::LBracket {
        o.c_f = Some(lbracket_scheme_settings(scheme).0);
    }
    o.apply(&base).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    opt: Optimizer,
}

impl Demo {
    pub fn create(preset_id: &str, scheme: &str, beta: f64, scale: usize) -> Result<Demo, String> {
        let config = demo_config(preset_id, scheme, beta, scale)?;
        Ok(Demo {
            opt: Optimizer::new(&config).map_err(|e| e.to_string())?,
        })
    }

    /// Runs up to `n` iterations; true once the run has finished.
    pub fn advance(&mut self, n: usize) -> Result<bool, String> {
        for _ in 0..n {
            if self.opt.is_finished() {
                break;
            }
            self.opt.step().map_err(|e| e.to_string())?;
        }
        Ok(self.opt.is_finished())
    }

    pub fn pixels(&self) -> Vec<u8> {
        let grid = self
            .opt
            .mesh()
            .grid()
            .expect("presets use structured meshes");
        let theta = match self.opt.snapshot() {
            Some(_) => {
                wavetopo::levelset::heaviside(
                    &self.opt.level_set().phi,
                    self.opt.config().evolution.beta,
                )
                .0
            }
            None => vec![1.0; self.opt.mesh().n_nodes()],
        };
        raster(self.opt.mesh(), &theta)
            .map(|r| r.2)
            .unwrap_or_else(|_| vec![0; grid.nx * grid.ny])
    }

    fn last(&self, f: impl Fn(&wavetopo::HistoryRow) -> f64) -> f64 {
        self.opt.history().last().map_or(f64::NAN, f)
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(preset_id: &str, scheme: &str, beta: f64, scale: usize) -> Result<Demo, JsError> {
        Demo::create(preset_id, scheme, beta, scale).map_err(|e| JsError::new(&e))
    }

    pub fn step(&mut self, n: usize) -> Result<bool, JsError> {
        self.advance(n).map_err(|e| JsError::new(&e))
    }

    /// Grayscale raster of the current layout, top row first.
    pub fn raster(&self) -> Vec<u8> {
        self.pixels()
    }

    pub fn width(&self) -> usize {
        self.opt.mesh().grid().map_or(0, |g| g.nx)
    }

    pub fn height(&self) -> usize {
        self.opt.mesh().grid().map_or(0, |g| g.ny)
    }

    pub fn iteration(&self) -> usize {
        self.opt.history().len()
    }

    pub fn objective_ratio(&self) -> f64 {
        self.last(|r| r.objective_ratio)
    }

    pub fn volume_fraction(&self) -> f64 {
        self.last(|r| r.volume_fraction)
    }

    pub fn constraint(&self) -> f64 {
        self.last(|r| r.constraint)
    }

    pub fn converged(&self) -> bool {
        self.opt.outcome() == wavetopo::optimizer::StepOutcome::Converged
    }
}

/// `Θ(φ)` sampled at `n` points on [-1, 1].
#[wasm_bindgen]
pub fn heaviside_curve(beta: f64, n: usize) -> Vec<f64> {
    sample(n, |phi| heaviside_scalar(phi, beta))
}

/// `arsinh(γx)/γ` sampled at `n` points on [-extent, extent].
#[wasm_bindgen]
pub fn arsinh_curve(gamma: f64, extent: f64, n: usize) -> Vec<f64> {
    sample(n, |t| {
        wavetopo::sensitivity::arsinh_scale(&[t * extent], gamma)[0]
    })
}

fn sample(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| f(-1.0 + 2.0 * i as f64 / (n - 1) as f64))
        .collect()
}
