//! Tracks-format CSV ingestion and export (highD/inD/rounD column layout).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::scalar::Real;
use crate::scenario::types::{AgentKind, AgentState, KindTable, Scenario};

const REQUIRED: [&str; 8] = [
    "frame",
    "id",
    "x",
    "y",
    "xVelocity",
    "yVelocity",
    "width",
    "height",
];
const OPTIONAL: [&str; 4] = ["class", "xAcceleration", "yAcceleration", "mass"];

/// Canonical column key → column name in the file.
///
/// Canonical keys follow the highD naming: `width` is the along-track extent
/// and `height` the across-track extent.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSchema {
    columns: BTreeMap<String, String>,
}

impl Default for TrackSchema {
    fn default() -> Self {
        let columns = REQUIRED
            .iter()
            .chain(OPTIONAL.iter())
            .map(|k| (k.to_string(), k.to_string()))
            .collect();
        Self { columns }
    }
}

impl TrackSchema {
    /// Applies `key=column` overrides, rejecting unknown canonical keys.
    pub fn with_overrides<S: AsRef<str>>(mut self, pairs: &[S]) -> Result<Self> {
        for p in pairs {
            let p = p.as_ref();
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::BadParams(format!("schema override `{p}` is not key=col")))?;
            if !self.columns.contains_key(k) {
                return Err(Error::BadParams(format!("unknown schema key `{k}`")));
            }
            self.columns.insert(k.to_string(), v.to_string());
        }
        Ok(self)
    }

    pub fn column(&self, key: &str) -> &str {
        &self.columns[key]
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions<T> {
    pub schema: TrackSchema,
    pub masses: KindTable<T>,
    pub frame_rate: T,
    /// `x`/`y` give the bounding-box corner (highD convention) rather than
    /// the center.
    pub bbox_corner: bool,
    /// Kind assigned when the log has no class column.
    pub default_kind: AgentKind,
}

impl<T: Real> Default for LoadOptions<T> {
    fn default() -> Self {
        Self {
            schema: TrackSchema::default(),
            masses: KindTable::default_masses(),
            frame_rate: T::lit(25.0),
            bbox_corner: false,
            default_kind: AgentKind::Car,
        }
    }
}

pub fn load_tracks<T: Real>(path: impl AsRef<Path>, opts: &LoadOptions<T>) -> Result<Scenario<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_tracks(file, opts, path.display().to_string())
}

pub fn read_tracks<T: Real, R: Read>(
    reader: R,
    opts: &LoadOptions<T>,
    source: impl Into<String>,
) -> Result<Scenario<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |key: &str| -> Option<usize> {
        let name = opts.schema.column(key);
        headers.iter().position(|h| h == name)
    };
    let mut idx = BTreeMap::new();
    for key in REQUIRED {
        let i = find(key).ok_or_else(|| Error::MissingColumn(opts.schema.column(key).to_string()))?;
        idx.insert(key, i);
    }
    let class_col = find("class");
    let ax_col = find("xAcceleration");
    let ay_col = find("yAcceleration");
    let mass_col = find("mass");

    let mut states = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            let v: f64 = rec
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or(Error::NonFinite(row))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(row))
            }
        };
        let int = |i: usize| -> Result<i64> {
            let v = num(i)?;
            if v.fract() != 0.0 {
                return Err(Error::NonFinite(row));
            }
            Ok(v as i64)
        };
        let frame = int(idx["frame"])?;
        let id = int(idx["id"])?;
        if id < 0 {
            return Err(Error::BadParams(format!("row {row}: negative agent id")));
        }
        let length = num(idx["width"])?;
        let width = num(idx["height"])?;
        let (mut x, mut y) = (num(idx["x"])?, num(idx["y"])?);
        if opts.bbox_corner {
            x += length / 2.0;
            y += width / 2.0;
        }
        let kind = match class_col {
            Some(i) => AgentKind::parse(rec.get(i).unwrap_or("")),
            None => opts.default_kind.clone(),
        };
        let mass = match mass_col {
            Some(i) if !rec.get(i).unwrap_or("").is_empty() => T::lit(num(i)?),
            _ => opts.masses.get(&kind),
        };
        let opt_num = |c: Option<usize>| -> Result<f64> {
            match c {
                Some(i) if !rec.get(i).unwrap_or("").is_empty() => num(i),
                _ => Ok(0.0),
            }
        };
        let state = AgentState {
            agent_id: id as u64,
            frame,
            position: Vec2::new(T::lit(x), T::lit(y)),
            velocity: Vec2::new(T::lit(num(idx["xVelocity"])?), T::lit(num(idx["yVelocity"])?)),
            acceleration: Vec2::new(T::lit(opt_num(ax_col)?), T::lit(opt_num(ay_col)?)),
            length: T::lit(length),
            width: T::lit(width),
            mass,
            kind,
        };
        state.validate().map_err(|_| Error::NonFinite(row))?;
        states.push(state);
    }
    let mut scenario = Scenario::from_states(opts.frame_rate, states, source)?;
    let min = scenario.bounds.min;
    let shift = Vec2::new(
        T::zero().max(-min.x),
        T::zero().max(-min.y),
    );
    if shift != Vec2::zero() {
        scenario.translate(shift);
    }
    Ok(scenario)
}

/// Writes the scenario in the schema's column naming, undoing the ingestion
/// offset. Numbers use the shortest round-trip representation.
pub fn export_tracks<T: Real, W: Write>(
    scenario: &Scenario<T>,
    writer: W,
    schema: &TrackSchema,
    bbox_corner: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let keys = [
        "frame",
        "id",
        "x",
        "y",
        "width",
        "height",
        "xVelocity",
        "yVelocity",
        "xAcceleration",
        "yAcceleration",
        "class",
        "mass",
    ];
    w.write_record(keys.iter().map(|k| schema.column(k)))?;
    for (_, states) in scenario.frames() {
        for s in states {
            let mut p = s.position - scenario.offset;
            if bbox_corner {
                p.x -= s.length / T::lit(2.0);
                p.y -= s.width / T::lit(2.0);
            }
            w.write_record([
                s.frame.to_string(),
                s.agent_id.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                s.length.to_string(),
                s.width.to_string(),
                s.velocity.x.to_string(),
                s.velocity.y.to_string(),
                s.acceleration.x.to_string(),
                s.acceleration.y.to_string(),
                s.kind.label().to_string(),
                s.mass.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_tracks<T: Real>(scenario: &Scenario<T>, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    export_tracks(scenario, std::io::BufWriter::new(f), &TrackSchema::default(), false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(csv: &str) -> Result<Scenario<f64>> {
        read_tracks(csv.as_bytes(), &LoadOptions::default(), "inline")
    }

    #[test]
    fn minimal_two_rows() {
        let s = load(
            "frame,id,x,y,xVelocity,yVelocity,width,height\n0,1,10,2,5,0,4.5,1.8\n1,1,10.2,2,5,0,4.5,1.8\n",
        )
        .unwrap();
        assert_eq!(s.num_frames(), 2);
        assert_eq!(s.agents().len(), 1);
        assert_eq!(s.agent(1).unwrap().mass, 1500.0);
    }

    #[test]
    fn gap_is_rejected() {
        let e = load(
            "frame,id,x,y,xVelocity,yVelocity,width,height\n0,1,0,0,1,0,4,2\n1,1,0,0,1,0,4,2\n3,1,0,0,1,0,4,2\n",
        );
        assert!(matches!(
            e,
            Err(Error::NonContiguousTrack {
                agent_id: 1,
                gap_frame: 2
            })
        ));
    }

    #[test]
    fn missing_and_non_finite() {
        let e = load("frame,id,x,y,xVelocity,width,height\n0,1,0,0,1,4,2\n");
        assert!(matches!(e, Err(Error::MissingColumn(c)) if c == "yVelocity"));
        let e = load("frame,id,x,y,xVelocity,yVelocity,width,height\n0,1,0,0,1,0,4,2\n1,1,NaN,0,1,0,4,2\n");
        assert!(matches!(e, Err(Error::NonFinite(1))));
    }

    #[test]
    fn schema_remap_class_and_negative_origin() {
        let opts = LoadOptions::<f64> {
            schema: TrackSchema::default()
                .with_overrides(&["x=xCenter", "y=yCenter"])
                .unwrap(),
            ..Default::default()
        };
        let csv = "frame,id,xCenter,yCenter,xVelocity,yVelocity,width,height,class\n\
                   0,7,-5,3,1,0,0.5,0.5,pedestrian\n0,8,2,-1,0,0,2,1,Tram\n";
        let s = read_tracks(csv.as_bytes(), &opts, "x").unwrap();
        assert_eq!(s.agent(7).unwrap().kind, AgentKind::Pedestrian);
        assert_eq!(s.agent(7).unwrap().mass, 75.0);
        assert_eq!(s.agent(8).unwrap().kind, AgentKind::Other("Tram".into()));
        assert!(s.bounds.min.x >= 0.0 && s.bounds.min.y >= 0.0);
        assert_eq!(s.state(7, 0).unwrap().position, Vec2::new(0.0, 4.0));
        assert!(TrackSchema::default().with_overrides(&["bogus=x"]).is_err());
    }

    #[test]
    fn bbox_corner_round_trip() {
        let opts = LoadOptions::<f64> {
            bbox_corner: true,
            ..Default::default()
        };
        let csv = "frame,id,x,y,xVelocity,yVelocity,width,height\n0,1,10,2,5,0,4,2\n";
        let s = read_tracks(csv.as_bytes(), &opts, "x").unwrap();
        assert_eq!(s.state(1, 0).unwrap().position, Vec2::new(12.0, 3.0));
        let mut out = Vec::new();
        export_tracks(&s, &mut out, &TrackSchema::default(), true).unwrap();
        let back = read_tracks(out.as_slice(), &opts, "y").unwrap();
        assert_eq!(back.state(1, 0), s.state(1, 0));
    }
}
