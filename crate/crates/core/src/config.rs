//! TOML run configurations and command-line style overrides.

use std::path::Path;

use crate::error::{Error, Result};
use crate::levelset::{InitPreset, Scheme};
use crate::optimizer::RunConfig;

/// Parses and validates a configuration; unknown keys are rejected with their path.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de =
        toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.message()))?;
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(
            if path.is_empty() || path == "." {
                "<root>".to_string()
            } else {
                path
            },
            e.inner().message(),
        )
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn dump_config(config: &RunConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::config("<root>", e.to_string()))
}

/// Individually settable run parameters; `None` keeps the base value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scheme: Option<Scheme>,
    pub ell: Option<f64>,
    pub m: Option<f64>,
    pub k: Option<f64>,
    pub beta: Option<f64>,
    pub c_f: Option<f64>,
    pub max_iterations: Option<usize>,
    pub init: Option<InitPreset>,
    pub seed: Option<u64>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
}

impl Overrides {
    /// Applies the overrides and revalidates. Switching scheme zeroes the parameters the new
    /// scheme forbids unless they are given explicitly.
    pub fn apply(&self, base: &RunConfig) -> Result<RunConfig> {
        let mut c = base.clone();
        let ev = &mut c.evolution;
        if let Some(s) = self.scheme {
            ev.scheme = s;
            let (ell_ok, m_ok, k_ok) = s.allows();
            if !ell_ok {
                ev.ell = 0.0;
            }
            if !m_ok {
                ev.m = 0.0;
            }
            if !k_ok {
                ev.k = 0.0;
            }
        }
        for (slot, value) in [
            (&mut ev.ell, self.ell),
            (&mut ev.m, self.m),
            (&mut ev.k, self.k),
            (&mut ev.beta, self.beta),
            (&mut ev.c_f, self.c_f),
        ] {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if let Some(n) = self.max_iterations {
            c.max_iterations = n;
        }
        if let Some(init) = &self.init {
            c.init.phi0 = init.clone();
            c.init.phi_prev = init.clone();
        }
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(nx) = self.nx {
            c.mesh.nx = nx;
        }
        if let Some(ny) = self.ny {
            c.mesh.ny = ny;
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preset::{preset, PresetId};

    #[test]
    fn round_trip_all_presets() {
        for id in PresetId::ALL {
            let c = preset(id);
            let text = dump_config(&c).unwrap();
            assert_eq!(parse_config(&text).unwrap(), c, "{id:?}");
        }
    }

    #[test]
    fn unknown_key_reports_path() {
        let text = dump_config(&preset(PresetId::Cantilever))
            .unwrap()
            .replace("beta =", "betta =");
        match parse_config(&text) {
            Err(Error::Config { key, .. }) => assert!(key.starts_with("evolution"), "{key}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_mesh_is_config_error() {
        let text = dump_config(&preset(PresetId::Cantilever)).unwrap();
        let start = text.find("[mesh]").unwrap();
        let end = start + text[start..].find("\n\n").unwrap();
        let broken = format!("{}{}", &text[..start], &text[end..]);
        assert!(matches!(parse_config(&broken), Err(Error::Config { .. })));
    }

    #[test]
    fn overrides_merge_last_wins() {
        let base = preset(PresetId::Cantilever);
        let o = Overrides {
            scheme: Some(Scheme::We),
            ell: Some(0.008),
            beta: Some(5.0),
            ..Default::default()
        };
        let c = o.apply(&base).unwrap();
        assert_eq!((c.evolution.ell, c.evolution.beta), (0.008, 5.0));

        let gwe = Overrides {
            scheme: Some(Scheme::Gwe),
            ell: Some(0.02),
            k: Some(0.01),
            ..Default::default()
        };
        let c = gwe.apply(&base).unwrap();
        assert_eq!(c.evolution.warnings().len(), 1);

        let girder = preset(PresetId::Girder);
        let we = Overrides {
            scheme: Some(Scheme::We),
            ..Default::default()
        }
        .apply(&girder)
        .unwrap();
        assert_eq!((we.evolution.m, we.evolution.k), (0.0, 0.0));
        let bad = Overrides {
            scheme: Some(Scheme::We),
            m: Some(0.5),
            ..Default::default()
        };
        assert!(bad.apply(&girder).is_err());
        let zero = Overrides {
            max_iterations: Some(0),
            ..Default::default()
        };
        assert!(matches!(zero.apply(&base), Err(Error::Config { .. })));
    }
}
