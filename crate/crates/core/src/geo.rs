//! Spherical-earth navigation: great-circle distance and bearing, vessel
//! velocity composition under ocean currents, and dead reckoning.
//!
//! Angles are degrees at the API boundary and radians inside the formulas.
//! The earth is a sphere whose radius makes one degree of arc exactly
//! 60 nautical miles.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Sphere radius in nautical miles: `10800 / π ≈ 3437.7468`, so that one
/// degree of arc is exactly 60 nm.
pub const EARTH_RADIUS_NM: f64 = 10_800.0 / PI;

/// Nautical miles per degree of latitude.
pub const NM_PER_DEGREE: f64 = 60.0;

/// Metres per nautical mile.
pub const METRES_PER_NM: f64 = 1852.0;

/// Wraps any angle into `[0, 360)`.
pub fn normalize_degrees(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Wraps a longitude into `[-180, 180)`.
pub fn wrap_longitude(lon: f64) -> f64 {
    let r = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if r >= 180.0 {
        -180.0
    } else {
        r
    }
}

/// A position on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Builds a point, rejecting latitudes outside `[-90, 90]` and wrapping the
    /// longitude.
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidArgument(format!(
                "invalid position lat={lat} lon={lon}"
            )));
        }
        Ok(GeoPoint {
            lat,
            lon: wrap_longitude(lon),
        })
    }

    /// Builds a point from values already known to be valid (clamps latitude).
    pub(crate) fn from_radians(lat: f64, lon: f64) -> Self {
        GeoPoint {
            lat: lat.to_degrees().clamp(-90.0, 90.0),
            lon: wrap_longitude(lon.to_degrees()),
        }
    }
}

/// Ocean current: the direction it flows *toward* and its speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentVector {
    pub direction: f64,
    pub speed: f64,
}

impl CurrentVector {
    pub fn new(direction: f64, speed: f64) -> Result<Self> {
        if !speed.is_finite() || speed < 0.0 || !direction.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "invalid current direction={direction} speed={speed}"
            )));
        }
        Ok(CurrentVector {
            direction: normalize_degrees(direction),
            speed,
        })
    }

    pub fn still() -> Self {
        CurrentVector {
            direction: 0.0,
            speed: 0.0,
        }
    }

    /// `(east, north)` velocity components in knots.
    pub fn components(&self) -> (f64, f64) {
        velocity_components(self.direction, self.speed)
    }

    /// Inverse of [`CurrentVector::components`]. A zero vector points north.
    pub fn from_components(east: f64, north: f64) -> Self {
        let speed = east.hypot(north);
        let direction = if speed == 0.0 {
            0.0
        } else {
            normalize_degrees(east.atan2(north).to_degrees())
        };
        CurrentVector { direction, speed }
    }
}

/// Latitude/longitude bounding box (no antimeridian crossing).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Region {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lat_min < self.lat_max
            && self.lon_min < self.lon_max
            && self.lat_min >= -90.0
            && self.lat_max <= 90.0
            && self.lon_min >= -180.0
            && self.lon_max <= 180.0;
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid region {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.lat_min..=self.lat_max).contains(&p.lat) && (self.lon_min..=self.lon_max).contains(&p.lon)
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            lat: 0.5 * (self.lat_min + self.lat_max),
            lon: 0.5 * (self.lon_min + self.lon_max),
        }
    }
}

/// Kinematic state of a vessel at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselKinematics {
    pub position: GeoPoint,
    pub heading: f64,
    pub stw: f64,
    pub sog: f64,
    pub cog: f64,
}

impl VesselKinematics {
    /// A vessel whose motion over ground is `(cog, sog)` and which is not
    /// affected by current (used for traffic playback).
    pub fn over_ground(position: GeoPoint, cog: f64, sog: f64) -> Self {
        let cog = normalize_degrees(cog);
        VesselKinematics {
            position,
            heading: cog,
            stw: sog,
            sog,
            cog,
        }
    }

    /// Ground velocity `(east, north)` in knots.
    pub fn ground_velocity(&self) -> (f64, f64) {
        velocity_components(self.cog, self.sog)
    }
}

/// `(east, north)` components of a speed along a compass direction.
pub fn velocity_components(direction_deg: f64, speed: f64) -> (f64, f64) {
    let d = direction_deg.to_radians();
    (speed * d.sin(), speed * d.cos())
}

/// Great-circle distance in nautical miles (haversine form).
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_NM * h.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing from `a` toward `b`, clockwise from north.
pub fn initial_bearing(a: GeoPoint, b: GeoPoint) -> Result<f64> {
    if great_circle_distance(a, b) == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlon = (b.lon - a.lon).to_radians();
    let y = dlon.sin() * lat2.cos();
    let x = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
    Ok(normalize_degrees(y.atan2(x).to_degrees()))
}

/// Adds the current to the through-water velocity. Returns `(cog, sog)`.
///
/// When the two cancel exactly the course keeps the heading.
pub fn compose_over_ground(heading: f64, stw: f64, current: CurrentVector) -> (f64, f64) {
    if current.speed == 0.0 {
        return (normalize_degrees(heading), stw);
    }
    let (we, wn) = velocity_components(heading, stw);
    let (ce, cn) = current.components();
    let (e, n) = (we + ce, wn + cn);
    let sog = e.hypot(n);
    // Cancellation leaves rounding residue of order 1e-15 kn.
    if sog < 1e-12 {
        return (normalize_degrees(heading), 0.0);
    }
    (normalize_degrees(e.atan2(n).to_degrees()), sog)
}

/// Position after travelling `sog * dt` nm along the great circle that leaves
/// `p` on course `cog`.
pub fn dead_reckon(p: GeoPoint, cog: f64, sog: f64, dt: f64) -> GeoPoint {
    let dist = sog * dt;
    if dist == 0.0 {
        return p;
    }
    let delta = dist / EARTH_RADIUS_NM;
    let theta = cog.to_radians();
    let lat1 = p.lat.to_radians();
    let lon1 = p.lon.to_radians();
    let sin_lat2 = (lat1.sin() * delta.cos() + lat1.cos() * delta.sin() * theta.cos()).clamp(-1.0, 1.0);
    let lat2 = sin_lat2.asin();
    let lon2 = lon1
        + (theta.sin() * delta.sin() * lat1.cos()).atan2(delta.cos() - lat1.sin() * sin_lat2);
    GeoPoint::from_radians(lat2, lon2)
}

/// Equirectangular offset of `p` from `origin` in nautical miles,
/// `(east, north)`. Accurate for the few-mile windows used around a vessel.
pub fn local_offset(origin: GeoPoint, p: GeoPoint) -> (f64, f64) {
    let dlon = wrap_longitude(p.lon - origin.lon);
    let east = dlon * NM_PER_DEGREE * origin.lat.to_radians().cos();
    let north = (p.lat - origin.lat) * NM_PER_DEGREE;
    (east, north)
}
