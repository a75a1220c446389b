//! History tables, nodal field files and material rasters. Every file is written to a temporary
//! sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::optimizer::{History, HistoryRow};

pub const HISTORY_FORMAT_VERSION: u32 = 1;
pub const HISTORY_HEADER: [&str; 9] = [
    "iteration",
    "J",
    "J_over_J0",
    "G",
    "vol_frac",
    "max_vm",
    "C_v",
    "lambda",
    "wall_ms",
];

/// Gray level of raster pixels outside the domain footprint.
pub const OUTSIDE_GRAY: u8 = 128;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn history_csv(history: &History) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::invalid(format!("csv encoding failed: {e}"));
    w.write_record(HISTORY_HEADER).map_err(io)?;
    for r in &history.rows {
        w.write_record([
            r.iteration.to_string(),
            fmt(r.objective),
            fmt(r.objective_ratio),
            fmt(r.constraint),
            fmt(r.volume_fraction),
            fmt(r.max_von_mises),
            fmt(r.normalization),
            fmt(r.lambda),
            fmt(r.wall_ms),
        ])
        .map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| Error::invalid(format!("csv encoding failed: {e}")))
}

pub fn export_history(history: &History, path: &Path) -> Result<()> {
    write_atomic(path, &history_csv(history)?)
}

pub fn read_history(path: &Path) -> Result<History> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let bad = |e: &dyn std::fmt::Display| Error::invalid(format!("{}: {e}", path.display()));
    let header = r.headers().map_err(|e| bad(&e))?.clone();
    if header.iter().ne(HISTORY_HEADER) {
        return Err(bad(&"unexpected history header"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(&e))?;
        let f = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(&e));
        rows.push(HistoryRow {
            iteration: rec[0].parse().map_err(|e| bad(&e))?,
            objective: f(1)?,
            objective_ratio: f(2)?,
            constraint: f(3)?,
            volume_fraction: f(4)?,
            max_von_mises: f(5)?,
            normalization: f(6)?,
            lambda: f(7)?,
            wall_ms: f(8)?,
        });
    }
    Ok(History { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldFormat {
    NodalText,
    Raster,
}

/// Nodal fields of one configuration.
#[derive(Debug, Clone, Copy)]
pub struct FieldSet<'a> {
    pub phi: &'a [f64],
    pub theta: &'a [f64],
    pub von_mises: &'a [f64],
    /// Interleaved `(u_x, u_y)`.
    pub displacement: &'a [f64],
}

/// Grayscale raster with one pixel per grid cell, top row first: 255 where the cell's mean `Θ`
/// is at least 0.5, 0 below, [`OUTSIDE_GRAY`] outside the footprint.
pub fn raster(mesh: &Mesh, theta: &[f64]) -> Result<(u32, u32, Vec<u8>)> {
    let grid = mesh
        .grid()
        .ok_or_else(|| Error::invalid("rasters need a structured mesh"))?;
    if theta.len() != mesh.n_nodes() {
        return Err(Error::invalid("Θ does not match the mesh"));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let mut px = vec![OUTSIDE_GRAY; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            if let Some(tris) = grid.cells[j * nx + i] {
                let mut nodes: Vec<usize> =
                    tris.iter().flat_map(|&t| mesh.triangles()[t]).collect();
                nodes.sort_unstable();
                nodes.dedup();
                let mean = nodes.iter().map(|&n| theta[n]).sum::<f64>() / nodes.len() as f64;
                px[(ny - 1 - j) * nx + i] = if mean >= 0.5 { 255 } else { 0 };
            }
        }
    }
    Ok((nx as u32, ny as u32, px))
}

pub fn raster_png(mesh: &Mesh, theta: &[f64]) -> Result<Vec<u8>> {
    let (w, h, px) = raster(mesh, theta)?;
    let img = image::GrayImage::from_raw(w, h, px).expect("buffer sized to the grid");
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::invalid(format!("png encoding failed: {e}")))?;
    Ok(out.into_inner())
}

pub fn nodal_text(mesh: &Mesh, fields: &FieldSet<'_>) -> Result<Vec<u8>> {
    let n = mesh.n_nodes();
    if fields.phi.len() != n
        || fields.theta.len() != n
        || fields.von_mises.len() != n
        || fields.displacement.len() != 2 * n
    {
        return Err(Error::invalid("fields do not match the mesh"));
    }
    let mag: Vec<f64> = fields
        .displacement
        .chunks(2)
        .map(|c| c[0].hypot(c[1]))
        .collect();
    let mut out = Vec::new();
    mesh.write_vtk(
        &mut out,
        &[
            ("phi", fields.phi),
            ("theta", fields.theta),
            ("von_mises", fields.von_mises),
            ("u_magnitude", &mag),
        ],
    )
    .expect("writing to memory");
    Ok(out)
}

pub fn export_fields(
    mesh: &Mesh,
    fields: &FieldSet<'_>,
    path: &Path,
    format: FieldFormat,
) -> Result<()> {
    let bytes = match format {
        FieldFormat::NodalText => nodal_text(mesh, fields)?,
        FieldFormat::Raster => raster_png(mesh, fields.theta)?,
    };
    write_atomic(path, &bytes)
}

/// Paths written for one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExportBundle {
    pub format_version: u32,
    pub history: PathBuf,
    pub fields: Vec<(usize, PathBuf)>,
    pub rasters: Vec<(usize, PathBuf)>,
}

impl ExportBundle {
    pub fn new(dir: &Path) -> Self {
        ExportBundle {
            format_version: HISTORY_FORMAT_VERSION,
            history: dir.join("history.csv"),
            fields: Vec::new(),
            rasters: Vec::new(),
        }
    }

    pub fn field_path(dir: &Path, iteration: usize) -> PathBuf {
        dir.join(format!("fields_{iteration:05}.vtk"))
    }

    pub fn raster_path(dir: &Path, iteration: usize) -> PathBuf {
        dir.join(format!("material_{iteration:05}.png"))
    }

    pub fn write_manifest(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self)
            .map_err(|e| Error::invalid(format!("manifest encoding failed: {e}")))?;
        write_atomic(&dir.join("manifest.toml"), text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_lbracket_mesh, generate_rect_mesh};

    fn row(i: usize) -> HistoryRow {
        HistoryRow {
            iteration: i,
            objective: 0.1 * (i + 1) as f64,
            objective_ratio: 1.0 / 3.0 * i as f64 + 1.0,
            constraint: -1e-17 * i as f64,
            volume_fraction: std::f64::consts::PI / 7.0,
            max_von_mises: 1.234_567_890_123_456_7e8,
            normalization: 6.02e23,
            lambda: 0.0,
            wall_ms: 12.5,
        }
    }

    #[test]
    fn history_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        export_history(&History::default(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "iteration,J,J_over_J0,G,vol_frac,max_vm,C_v,lambda,wall_ms\n"
        );
        let h = History {
            rows: (0..3).map(row).collect(),
        };
        export_history(&h, &path).unwrap();
        assert_eq!(read_history(&path).unwrap(), h);
        assert!(fs::read_dir(dir.path()).unwrap().all(|e| !e
            .unwrap()
            .file_name()
            .to_string_lossy()
            .ends_with(".tmp")));
    }

    #[test]
    fn rasters() {
        let mesh = generate_rect_mesh(2.0, 1.0, 4, 2).unwrap();
        let (w, h, px) = raster(&mesh, &vec![1.0; mesh.n_nodes()]).unwrap();
        assert_eq!((w, h), (4, 2));
        assert!(px.iter().all(|&p| p == 255));
        let split: Vec<f64> = mesh
            .nodes()
            .iter()
            .map(|p| if p[0] < 1.0 { 1.0 } else { 0.0 })
            .collect();
        let (_, _, px) = raster(&mesh, &split).unwrap();
        assert_eq!(px, vec![255, 255, 0, 0, 255, 255, 0, 0]);

        let l = generate_lbracket_mesh(1.5, 0.4, 5).unwrap();
        let (_, _, px) = raster(&l, &vec![1.0; l.n_nodes()]).unwrap();
        // Top rows: the first two cells are the vertical arm, the rest is cut away.
        assert_eq!(
            &px[..5],
            &[255, 255, OUTSIDE_GRAY, OUTSIDE_GRAY, OUTSIDE_GRAY]
        );
        assert_eq!(px.iter().filter(|&&p| p == OUTSIDE_GRAY).count(), 9);
        let png = raster_png(&l, &vec![0.0; l.n_nodes()]).unwrap();
        assert_eq!(&png[1..4], b"PNG");
    }
}
