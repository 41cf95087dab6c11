use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{write_file, Error, Result};

/// A sequence of `(lat, lon, sog)` samples at a fixed interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<[f64; 3]>,
    /// Hours between samples.
    pub timestep: f64,
}

impl Trajectory {
    pub fn new(points: Vec<[f64; 3]>, timestep: f64) -> Result<Self> {
        let t = Trajectory { points, timestep };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::InvalidArgument("a trajectory needs at least two points".into()));
        }
        if !(self.timestep > 0.0 && self.timestep.is_finite()) {
            return Err(Error::InvalidArgument(format!("timestep {} must be positive", self.timestep)));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.iter().any(|v| !v.is_finite()) || p[2] < 0.0 || p[0].abs() > 90.0 {
                return Err(Error::InvalidArgument(format!("trajectory point {i} is invalid: {p:?}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total duration in hours.
    pub fn duration(&self) -> f64 {
        (self.points.len() - 1) as f64 * self.timestep
    }

    /// `(lat, lon, sog)` at `hours` after the first sample, linearly
    /// interpolated; `None` outside the recorded span.
    pub fn at(&self, hours: f64) -> Option<[f64; 3]> {
        if hours < 0.0 || hours > self.duration() || !hours.is_finite() {
            return None;
        }
        let x = hours / self.timestep;
        let i = (x.floor() as usize).min(self.points.len() - 2);
        let f = x - i as f64;
        let (a, b) = (self.points[i], self.points[i + 1]);
        let mut lon_b = b[1];
        if lon_b - a[1] > 180.0 {
            lon_b -= 360.0;
        } else if a[1] - lon_b > 180.0 {
            lon_b += 360.0;
        }
        Some([
            a[0] + f * (b[0] - a[0]),
            crate::geo::wrap_longitude(a[1] + f * (lon_b - a[1])),
            a[2] + f * (b[2] - a[2]),
        ])
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    trajectory_id: u64,
    index: usize,
    lat: f64,
    lon: f64,
    sog: f64,
}

/// Reads a table with columns `trajectory_id,index,lat,lon,sog`. Rows are
/// grouped by id and ordered by index.
pub fn read_trajectories(path: &Path, timestep: f64) -> Result<Vec<Trajectory>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    let mut groups: BTreeMap<u64, Vec<(usize, [f64; 3])>> = BTreeMap::new();
    for row in reader.deserialize() {
        let r: Row = row.map_err(|e| Error::parse(path, e))?;
        groups.entry(r.trajectory_id).or_default().push((r.index, [r.lat, r.lon, r.sog]));
    }
    groups
        .into_iter()
        .map(|(id, mut pts)| {
            pts.sort_by_key(|p| p.0);
            if pts.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::parse(path, format!("trajectory {id} repeats an index")));
            }
            Trajectory::new(pts.into_iter().map(|p| p.1).collect(), timestep)
                .map_err(|e| Error::parse(path, format!("trajectory {id}: {e}")))
        })
        .collect()
}

pub fn write_trajectories(trajectories: &[Trajectory], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (id, t) in trajectories.iter().enumerate() {
        for (index, p) in t.points.iter().enumerate() {
            w.serialize(Row {
                trajectory_id: id as u64,
                index,
                lat: p[0],
                lon: p[1],
                sog: p[2],
            })
            .map_err(|e| Error::parse(path, e))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::parse(path, e))?;
    write_file(path, &String::from_utf8(bytes).expect("csv is utf-8"))
}
