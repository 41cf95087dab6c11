use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{CurrentVector, GeoPoint, Region};

/// Currents for one month: one vector everywhere, or a regular lat/lon grid
/// interpolated bilinearly in `(east, north)` components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MonthCurrents {
    Uniform { direction: f64, speed: f64 },
    Grid(CurrentGrid),
}

/// `direction[i][j]` and `speed[i][j]` are at `(lats[i], lons[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentGrid {
    pub lats: Vec<f64>,
    pub lons: Vec<f64>,
    pub direction: Vec<Vec<f64>>,
    pub speed: Vec<Vec<f64>>,
}

impl CurrentGrid {
    fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| v.len() >= 2 && v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.lats) || !increasing(&self.lons) {
            return Err(Error::Scenario("current grid axes need at least two increasing values".into()));
        }
        let shape_ok = |m: &[Vec<f64>]| m.len() == self.lats.len() && m.iter().all(|r| r.len() == self.lons.len());
        if !shape_ok(&self.direction) || !shape_ok(&self.speed) {
            return Err(Error::Scenario("current grid tables must be lats × lons".into()));
        }
        if self.speed.iter().flatten().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::Scenario("current speeds must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn covers(&self, r: &Region) -> bool {
        self.lats[0] <= r.lat_min
            && *self.lats.last().expect("validated") >= r.lat_max
            && self.lons[0] <= r.lon_min
            && *self.lons.last().expect("validated") >= r.lon_max
    }

    fn at(&self, p: GeoPoint) -> Result<CurrentVector> {
        let outside = Error::OutsideGrid { lat: p.lat, lon: p.lon };
        let (i, fy) = locate(&self.lats, p.lat).ok_or(outside)?;
        let (j, fx) = locate(&self.lons, p.lon).ok_or(Error::OutsideGrid { lat: p.lat, lon: p.lon })?;
        let comp = |a: usize, b: usize| {
            CurrentVector {
                direction: self.direction[a][b],
                speed: self.speed[a][b],
            }
            .components()
        };
        let corners = [comp(i, j), comp(i, j + 1), comp(i + 1, j), comp(i + 1, j + 1)];
        let w = [(1.0 - fy) * (1.0 - fx), (1.0 - fy) * fx, fy * (1.0 - fx), fy * fx];
        let (mut e, mut n) = (0.0, 0.0);
        for (c, w) in corners.iter().zip(w) {
            e += w * c.0;
            n += w * c.1;
        }
        Ok(CurrentVector::from_components(e, n))
    }
}

/// Cell index and fractional position of `x` on an increasing axis.
fn locate(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let last = axis.len() - 1;
    if !(axis[0]..=axis[last]).contains(&x) {
        return None;
    }
    let i = axis.partition_point(|a| *a <= x).saturating_sub(1).min(last - 1);
    Some((i, (x - axis[i]) / (axis[i + 1] - axis[i])))
}

/// Monthly current tables keyed by calendar month (1–12).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CurrentField {
    pub months: BTreeMap<u32, MonthCurrents>,
}

impl CurrentField {
    /// The same vector everywhere, every month.
    pub fn uniform(direction: f64, speed: f64) -> Self {
        let c = MonthCurrents::Uniform { direction, speed };
        CurrentField {
            months: (1..=12).map(|m| (m, c.clone())).collect(),
        }
    }

    pub fn validate(&self, region: &Region) -> Result<()> {
        for (m, table) in &self.months {
            if !(1..=12).contains(m) {
                return Err(Error::Scenario(format!("current table for month {m} is not a calendar month")));
            }
            match table {
                MonthCurrents::Uniform { speed, direction } => {
                    if !(*speed >= 0.0) || !speed.is_finite() || !direction.is_finite() {
                        return Err(Error::Scenario(format!("month {m}: invalid uniform current")));
                    }
                }
                MonthCurrents::Grid(g) => {
                    g.validate().map_err(|e| Error::Scenario(format!("month {m}: {e}")))?;
                    if !g.covers(region) {
                        return Err(Error::Scenario(format!("month {m}: current grid does not cover the region")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn has_month(&self, month: u32) -> bool {
        self.months.contains_key(&month)
    }
}

/// Current at `p` in the month containing `time`.
pub fn current_at(field: &CurrentField, p: GeoPoint, time: DateTime<Utc>) -> Result<CurrentVector> {
    let month = time.month();
    match field.months.get(&month) {
        None => Err(Error::MissingCurrentMonth(month)),
        Some(MonthCurrents::Uniform { direction, speed }) => CurrentVector::new(*direction, *speed),
        Some(MonthCurrents::Grid(g)) => g.at(p),
    }
}
