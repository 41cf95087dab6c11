//! Trajectory synthesis with a denoising diffusion model over normalized
//! `(lat, lon, sog)` sequences.

mod denoiser;
mod schedule;
mod trajectory;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use denoiser::{
    diffusion_loss, sample_normalized, sample_trajectory, time_embedding, train_denoiser,
    DenoiserParams, DenoiserShape, DenoiserTraining, DiffusionConfig, DiffusionModel,
    NoisePredictor,
};
pub use schedule::{build_schedule, forward_sample, reverse_mean, NoiseSchedule};
pub use trajectory::{read_trajectories, write_trajectories, Trajectory};

use crate::error::{Error, Result};
use crate::geo::{dead_reckon, normalize_degrees, GeoPoint, Region};

/// Per-channel min–max map of `(lat, lon, sog)` onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionNormalizer {
    pub lat: (f64, f64),
    pub lon: (f64, f64),
    pub sog: (f64, f64),
}

impl RegionNormalizer {
    /// Bounds covering every point in `data`. A channel with no spread gets a
    /// unit-wide range around its value.
    pub fn fit(data: &[Trajectory]) -> Result<Self> {
        let mut b = [(f64::INFINITY, f64::NEG_INFINITY); 3];
        for p in data.iter().flat_map(|t| &t.points) {
            for c in 0..3 {
                b[c].0 = b[c].0.min(p[c]);
                b[c].1 = b[c].1.max(p[c]);
            }
        }
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for r in b.iter_mut() {
            if r.1 - r.0 <= 0.0 {
                *r = (r.0 - 0.5, r.1 + 0.5);
            }
        }
        Ok(RegionNormalizer {
            lat: b[0],
            lon: b[1],
            sog: b[2],
        })
    }

    fn ranges(&self) -> [(f64, f64); 3] {
        [self.lat, self.lon, self.sog]
    }

    /// Flattened `[lat, lon, sog, lat, ...]` in normalized units.
    pub fn normalize(&self, t: &Trajectory) -> Vec<f64> {
        let r = self.ranges();
        t.points
            .iter()
            .flat_map(|p| (0..3).map(move |c| 2.0 * (p[c] - r[c].0) / (r[c].1 - r[c].0) - 1.0))
            .collect()
    }

    /// Inverse of [`RegionNormalizer::normalize`] after clamping to `[-1, 1]`.
    pub fn denormalize(&self, flat: &[f64], timestep: f64) -> Result<Trajectory> {
        if flat.len() % 3 != 0 {
            return Err(Error::Shape(format!("{} values do not form (lat, lon, sog) triples", flat.len())));
        }
        let r = self.ranges();
        let points = flat
            .chunks_exact(3)
            .map(|c| {
                let mut p = [0.0; 3];
                for k in 0..3 {
                    let v = c[k].clamp(-1.0, 1.0);
                    p[k] = r[k].0 + (v + 1.0) * 0.5 * (r[k].1 - r[k].0);
                }
                p[2] = p[2].max(0.0);
                p
            })
            .collect();
        Trajectory::new(points, timestep)
    }
}

/// Straight great-circle legs with jittered course and speed, starting inside
/// the middle of `region`.
pub fn synthetic_trajectories(
    count: usize,
    points: usize,
    timestep: f64,
    region: &Region,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    region.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let speed_noise = Normal::new(0.0, 0.5).expect("valid normal");
    let course_noise = Normal::new(0.0, 2.0).expect("valid normal");
    let (dlat, dlon) = (region.lat_max - region.lat_min, region.lon_max - region.lon_min);
    (0..count)
        .map(|_| {
            let mut pos = GeoPoint::new(
                region.lat_min + dlat * rng.gen_range(0.2..0.8),
                region.lon_min + dlon * rng.gen_range(0.2..0.8),
            )?;
            let mut course: f64 = rng.gen_range(0.0..360.0);
            let cruise: f64 = rng.gen_range(8.0..16.0);
            let mut pts = Vec::with_capacity(points);
            for _ in 0..points {
                let sog = (cruise + speed_noise.sample(&mut rng)).max(0.0);
                pts.push([pos.lat, pos.lon, sog]);
                pos = dead_reckon(pos, course, sog, timestep);
                course = normalize_degrees(course + course_noise.sample(&mut rng));
            }
            Trajectory::new(pts, timestep)
        })
        .collect()
}
