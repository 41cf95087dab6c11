use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of ship-type categories in the one-hot block.
pub const SHIP_TYPES: usize = 12;
const MONTHS: usize = 12;
const DAYS: usize = 31;
const HOURS: usize = 24;
const NUMERIC: usize = 7;

/// Length of an encoded feature vector: 7 numeric slots followed by the
/// ship-type, month, day-of-month and hour one-hot blocks.
pub const FEATURE_DIM: usize = NUMERIC + SHIP_TYPES + MONTHS + DAYS + HOURS;

/// Identifier of the layout above, written into model files.
pub const FEATURE_LAYOUT: &str = "fcr-v1";

/// Offsets of the one-hot blocks inside a [`FeatureVector`].
pub mod offsets {
    pub const SHIP_TYPE: usize = 7;
    pub const MONTH: usize = SHIP_TYPE + super::SHIP_TYPES;
    pub const DAY: usize = MONTH + 12;
    pub const HOUR: usize = DAY + 31;
}

/// One row of operational data. Field names double as the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationalRecord {
    /// Distance covered in the reporting interval, nm.
    pub distance_travelled: f64,
    pub lat: f64,
    pub lon: f64,
    /// Speed over ground, knots.
    pub sog: f64,
    /// Length overall, m.
    pub loa: f64,
    /// Beam, m.
    pub beam: f64,
    /// Gross tonnage.
    pub gt: f64,
    pub ship_type: u32,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
    /// Fuel consumption rate, mt/hour. Only present in training data.
    #[serde(default)]
    pub fcr_target: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn one_hot(values: &mut [f64], offset: usize, index: usize) {
    values[offset + index] = 1.0;
}

fn check_range(field: &'static str, value: u32, lo: u32, hi: u32) -> Result<()> {
    if value < lo || value > hi {
        return Err(Error::CategoricalOutOfRange { field, value });
    }
    Ok(())
}

pub fn encode_features(record: &OperationalRecord) -> Result<FeatureVector> {
    if record.ship_type as usize >= SHIP_TYPES {
        return Err(Error::UnknownShipType(record.ship_type, SHIP_TYPES));
    }
    check_range("month", record.month, 1, 12)?;
    check_range("day", record.day, 1, 31)?;
    check_range("hour", record.hour, 0, 23)?;

    let numeric = [
        record.distance_travelled,
        record.lat,
        record.lon,
        record.sog,
        record.loa,
        record.beam,
        record.gt,
    ];
    if let Some(bad) = numeric.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite numeric feature {bad}"
        )));
    }

    let mut values = [0.0; FEATURE_DIM];
    values[..NUMERIC].copy_from_slice(&numeric);
    one_hot(&mut values, offsets::SHIP_TYPE, record.ship_type as usize);
    one_hot(&mut values, offsets::MONTH, record.month as usize - 1);
    one_hot(&mut values, offsets::DAY, record.day as usize - 1);
    one_hot(&mut values, offsets::HOUR, record.hour as usize);
    Ok(FeatureVector(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn record(ship_type: u32, month: u32, day: u32, hour: u32) -> OperationalRecord {
        OperationalRecord {
            distance_travelled: 12.0,
            lat: 5.0,
            lon: 80.0,
            sog: 12.0,
            loa: 250.0,
            beam: 40.0,
            gt: 60_000.0,
            ship_type,
            month,
            day,
            hour,
            fcr_target: None,
        }
    }

    #[test]
    fn layout_is_86_wide() {
        assert_eq!(FEATURE_DIM, 86);
        assert_eq!(offsets::HOUR + 24, FEATURE_DIM);
    }

    #[test]
    fn january_sets_first_month_slot() {
        let v = encode_features(&record(0, 1, 1, 0)).unwrap();
        let month = &v.0[offsets::MONTH..offsets::MONTH + 12];
        assert_eq!(month[0], 1.0);
        assert!(month[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_out_of_vocabulary() {
        let err = encode_features(&record(99, 1, 1, 0)).unwrap_err();
        assert!(err.to_string().contains("99"), "{err}");
        assert!(encode_features(&record(0, 13, 1, 0)).is_err());
        assert!(encode_features(&record(0, 1, 0, 0)).is_err());
        assert!(encode_features(&record(0, 1, 1, 24)).is_err());
    }

    proptest! {
        #[test]
        fn exactly_four_ones_in_categorical_blocks(
            t in 0u32..12, m in 1u32..=12, d in 1u32..=31, h in 0u32..24,
        ) {
            let v = encode_features(&record(t, m, d, h)).unwrap();
            let cat = &v.0[NUMERIC..];
            prop_assert_eq!(cat.iter().filter(|&&x| x == 1.0).count(), 4);
            prop_assert_eq!(cat.iter().filter(|&&x| x == 0.0).count(), FEATURE_DIM - NUMERIC - 4);
            for (lo, len) in [(offsets::SHIP_TYPE, 12), (offsets::MONTH, 12), (offsets::DAY, 31), (offsets::HOUR, 24)] {
                prop_assert_eq!(v.0[lo..lo + len].iter().sum::<f64>(), 1.0);
            }
        }

        #[test]
        fn distinct_records_encode_distinctly(
            a in (0u32..12, 1u32..=12, 1u32..=31, 0u32..24, 0.0f64..30.0),
            b in (0u32..12, 1u32..=12, 1u32..=31, 0u32..24, 0.0f64..30.0),
        ) {
            let mut ra = record(a.0, a.1, a.2, a.3);
            ra.sog = a.4;
            let mut rb = record(b.0, b.1, b.2, b.3);
            rb.sog = b.4;
            let same = ra == rb;
            prop_assert_eq!(encode_features(&ra).unwrap() == encode_features(&rb).unwrap(), same);
        }
    }
}
