//! Synthetic operational records with a known fuel law, for exercising the
//! surrogate without proprietary data.
//!
//! `fcr = SPEED_COEFFICIENT * sog³ / gt + type_offset + seasonal + noise`,
//! with Gaussian noise of standard deviation [`NOISE_STD`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{OperationalRecord, SHIP_TYPES};

pub const SPEED_COEFFICIENT: f64 = 15.0;
pub const NOISE_STD: f64 = 0.05;

/// Offset added per ship type, mt/hour.
pub fn type_offset(ship_type: u32) -> f64 {
    0.05 * ship_type as f64
}

/// Seasonal swing, mt/hour.
pub fn seasonal(month: u32) -> f64 {
    0.2 * (2.0 * std::f64::consts::PI * (month as f64 - 1.0) / 12.0).sin()
}

/// Noise-free fuel law.
pub fn fuel_law(sog: f64, gt: f64, ship_type: u32, month: u32) -> f64 {
    SPEED_COEFFICIENT * sog.powi(3) / gt + type_offset(ship_type) + seasonal(month)
}

/// Draws `n` records with targets from the fuel law.
pub fn generate_records(n: usize, seed: u64) -> Vec<OperationalRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_STD).expect("valid normal");
    (0..n)
        .map(|_| {
            let sog: f64 = rng.gen_range(6.0..20.0);
            let gt: f64 = rng.gen_range(20_000.0..80_000.0);
            let ship_type = rng.gen_range(0..SHIP_TYPES as u32);
            let month = rng.gen_range(1..=12);
            let loa = 120.0 + gt / 400.0 + rng.gen_range(-10.0..10.0);
            let fcr = fuel_law(sog, gt, ship_type, month) + noise.sample(&mut rng);
            OperationalRecord {
                distance_travelled: sog * rng.gen_range(0.9..1.1),
                lat: rng.gen_range(-10.0..20.0),
                lon: rng.gen_range(50.0..100.0),
                sog,
                loa,
                beam: loa / 6.5,
                gt,
                ship_type,
                month,
                day: rng.gen_range(1..=28),
                hour: rng.gen_range(0..24),
                fcr_target: Some(fcr),
            }
        })
        .collect()
}
