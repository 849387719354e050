use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::risk_field::field::total_directional_force;
use crate::risk_field::params::RiskFieldParams;
use crate::scalar::Real;
use crate::scenario::{graph_for, AgentId, AgentState, Scenario};

/// Id given to the virtual probe agent.
pub const PROBE_ID: AgentId = AgentId::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    /// Lower-left corner of cell (0, 0), meters.
    pub origin: Vec2<T>,
    /// Cell edge, meters.
    pub cell: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> GridSpec<T> {
    /// Grid covering `[min, max]` with square cells; partial cells round up.
    pub fn covering(min: Vec2<T>, max: Vec2<T>, cell: T) -> Result<Self> {
        if !(cell > T::zero()) || !(max.x > min.x) || !(max.y > min.y) {
            return Err(Error::BadParams("grid needs positive cell and extent".into()));
        }
        let n = |span: T| (span / cell).ceil().to_usize().unwrap_or(0).max(1);
        Ok(Self {
            origin: min,
            cell,
            width: n(max.x - min.x),
            height: n(max.y - min.y),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell > T::zero()) || self.width == 0 || self.height == 0 || !self.origin.is_finite() {
            return Err(Error::BadParams("grid spec must be positive".into()));
        }
        Ok(())
    }

    /// Center of cell (column `i`, row `j`).
    pub fn center(&self, i: usize, j: usize) -> Vec2<T> {
        let half = T::lit(0.5);
        Vec2::new(
            self.origin.x + (T::lit(i as f64) + half) * self.cell,
            self.origin.y + (T::lit(j as f64) + half) * self.cell,
        )
    }
}

/// Row-major grid of total directional force on a probe at each cell center.
/// Row 0 is the lowest y.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskRaster<T> {
    pub grid: GridSpec<T>,
    pub frame: i64,
    pub values: Vec<T>,
}

impl<T: Real> RiskRaster<T> {
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[j * self.grid.width + i]
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }
}

/// Evaluates `value(probe)` for a probe placed at every cell center. Cells
/// are independent, so the parallel evaluation is order-free.
pub fn sample_grid<T: Real>(
    grid: &GridSpec<T>,
    frame: i64,
    probe: &AgentState<T>,
    value: impl Fn(&AgentState<T>) -> T + Sync,
) -> Result<RiskRaster<T>> {
    grid.validate()?;
    let mut values = vec![T::zero(); grid.width * grid.height];
    values
        .par_chunks_mut(grid.width)
        .enumerate()
        .for_each(|(j, row)| {
            let mut p = probe.clone();
            p.agent_id = PROBE_ID;
            for (i, v) in row.iter_mut().enumerate() {
                p.position = grid.center(i, j);
                *v = value(&p);
            }
        });
    Ok(RiskRaster {
        grid: *grid,
        frame,
        values,
    })
}

/// Directional force field a probe (velocity, mass, kind from `probe`)
/// would experience at each cell of `frame`. Agents in `exclude` are not
/// field sources.
pub fn rasterize<T: Real>(
    scenario: &Scenario<T>,
    frame: i64,
    probe: &AgentState<T>,
    grid: &GridSpec<T>,
    params: &RiskFieldParams<T>,
    exclude: Option<AgentId>,
) -> Result<RiskRaster<T>> {
    let (first, last) = match (scenario.first_frame(), scenario.last_frame()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::EmptyFrame(frame)),
    };
    if frame < first || frame > last {
        return Err(Error::EmptyFrame(frame));
    }
    let sources: Vec<AgentState<T>> = scenario
        .frame(frame)
        .unwrap_or(&[])
        .iter()
        .filter(|s| Some(s.agent_id) != exclude)
        .cloned()
        .collect();
    rasterize_states(&sources, frame, probe, grid, params)
}

pub fn rasterize_states<T: Real>(
    sources: &[AgentState<T>],
    frame: i64,
    probe: &AgentState<T>,
    grid: &GridSpec<T>,
    params: &RiskFieldParams<T>,
) -> Result<RiskRaster<T>> {
    sample_grid(grid, frame, probe, |p| {
        let g = graph_for(p, sources, params.radius);
        total_directional_force(p, &g, sources, params)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterSidecar {
    pub origin: [f64; 2],
    pub cell: f64,
    pub width: usize,
    pub height: usize,
    pub frame: i64,
    pub units: String,
    /// `csv` or `f32le`.
    pub payload: String,
    pub payload_file: String,
    pub probabilistic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(default)]
    pub config: serde_json::Value,
}

/// Writes `<stem>.json` plus `<stem>.csv` or `<stem>.bin`; returns the paths.
pub fn write_raster<T: Real>(
    raster: &RiskRaster<T>,
    stem: &Path,
    binary: bool,
    probabilistic: bool,
    step: Option<usize>,
    config: serde_json::Value,
) -> Result<(PathBuf, PathBuf)> {
    let payload_path = stem.with_extension(if binary { "bin" } else { "csv" });
    let sidecar_path = stem.with_extension("json");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&payload_path)?);
    if binary {
        for v in &raster.values {
            out.write_all(&(v.as_f64() as f32).to_le_bytes())?;
        }
    } else {
        for row in raster.values.chunks(raster.grid.width) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
    }
    out.flush()?;
    let sidecar = RasterSidecar {
        origin: [raster.grid.origin.x.as_f64(), raster.grid.origin.y.as_f64()],
        cell: raster.grid.cell.as_f64(),
        width: raster.grid.width,
        height: raster.grid.height,
        frame: raster.frame,
        units: "N".into(),
        payload: if binary { "f32le" } else { "csv" }.into(),
        payload_file: payload_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        probabilistic,
        step,
        config,
    };
    std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok((sidecar_path, payload_path))
}

/// Reads a raster written by [`write_raster`] from its sidecar path.
pub fn read_raster(sidecar_path: &Path) -> Result<(RasterSidecar, RiskRaster<f64>)> {
    let sidecar: RasterSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path)?)?;
    let payload = sidecar_path.with_file_name(&sidecar.payload_file);
    let values: Vec<f64> = match sidecar.payload.as_str() {
        "f32le" => std::fs::read(&payload)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect(),
        "csv" => {
            let text = std::fs::read_to_string(&payload)?;
            let mut v = Vec::new();
            for tok in text.lines().flat_map(|l| l.split(',')) {
                v.push(tok.parse().map_err(|_| Error::BadParams(format!("bad raster value `{tok}`")))?);
            }
            v
        }
        other => return Err(Error::BadParams(format!("unknown raster payload `{other}`"))),
    };
    if values.len() != sidecar.width * sidecar.height {
        return Err(Error::ShapeMismatch(format!(
            "raster payload has {} values, sidecar declares {}x{}",
            values.len(),
            sidecar.width,
            sidecar.height
        )));
    }
    let raster = RiskRaster {
        grid: GridSpec {
            origin: Vec2::new(sidecar.origin[0], sidecar.origin[1]),
            cell: sidecar.cell,
            width: sidecar.width,
            height: sidecar.height,
        },
        frame: sidecar.frame,
        values,
    };
    Ok((sidecar, raster))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(cell: f64, n: usize, origin: f64) -> GridSpec<f64> {
        GridSpec {
            origin: Vec2::new(origin, origin),
            cell,
            width: n,
            height: n,
        }
    }

    #[test]
    fn empty_sources_give_zero_raster() {
        let probe = AgentState::new(0, 0, Vec2::zero(), Vec2::new(10.0, 0.0));
        let r = rasterize_states(&[], 0, &probe, &grid(1.0, 4, 0.0), &RiskFieldParams::default()).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn radial_symmetry_around_stationary_source() {
        let src = AgentState::new(1, 0, Vec2::new(0.0, 0.0), Vec2::zero());
        let probe = AgentState::new(0, 0, Vec2::zero(), Vec2::new(12.0, 0.0));
        let r = rasterize_states(&[src], 0, &probe, &grid(1.0, 20, -10.0), &RiskFieldParams::default()).unwrap();
        // mirror images of a cell have equal distance to the origin
        for j in 0..20 {
            for i in 0..20 {
                let v = r.at(i, j);
                assert_eq!(v, r.at(19 - i, j));
                assert_eq!(v, r.at(i, 19 - j));
                assert_eq!(v, r.at(j, i));
            }
        }
        assert!(r.max() > 0.0);
    }

    #[test]
    fn covering_rounds_up() {
        let g = GridSpec::covering(Vec2::new(0.0, 0.0), Vec2::new(10.0, 4.5), 2.0).unwrap();
        assert_eq!((g.width, g.height), (5, 3));
        assert!(GridSpec::covering(Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let raster = RiskRaster {
            grid: grid(0.5, 2, 1.0),
            frame: 3,
            values: vec![0.0, 1.25, 2.5, 1e-3],
        };
        for binary in [false, true] {
            let (side, _) = write_raster(&raster, &dir.path().join("m"), binary, false, None, serde_json::Value::Null)
                .unwrap();
            let (meta, back) = read_raster(&side).unwrap();
            assert_eq!(meta.payload, if binary { "f32le" } else { "csv" });
            for (a, b) in back.values.iter().zip(&raster.values) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
