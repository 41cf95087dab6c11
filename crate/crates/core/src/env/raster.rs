use crate::geo::{local_offset, VesselKinematics};
use crate::nn::Tensor;

/// Speed that maps to a full SOG channel, knots.
pub const SOG_SCALE: f64 = 30.0;

pub const CHANNELS: usize = 3;

/// Egocentric north-up grid: row 0 is the northern edge, column 0 the
/// western edge. Channels are occupancy, scaled SOG and scaled COG.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterTensor {
    pub size: usize,
    /// Row-major `[size, size, 3]`.
    pub data: Vec<f64>,
}

impl RasterTensor {
    pub fn zeros(size: usize) -> Self {
        RasterTensor {
            size,
            data: vec![0.0; size * size * CHANNELS],
        }
    }

    pub fn cell(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.size + col) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.size, self.size, CHANNELS], self.data.clone()).expect("sized")
    }

    pub fn to_sparse(&self) -> SparseRaster {
        let cells = self
            .data
            .chunks_exact(CHANNELS)
            .enumerate()
            .filter(|(_, c)| c[0] != 0.0)
            .map(|(i, c)| (i as u32, [c[0], c[1], c[2]]))
            .collect();
        SparseRaster { size: self.size, cells }
    }
}

/// Occupied cells only, in increasing cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRaster {
    pub size: usize,
    pub cells: Vec<(u32, [f64; 3])>,
}

impl SparseRaster {
    pub fn to_dense(&self) -> RasterTensor {
        let mut r = RasterTensor::zeros(self.size);
        for (i, v) in &self.cells {
            let k = *i as usize * CHANNELS;
            r.data[k..k + CHANNELS].copy_from_slice(v);
        }
        r
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// `(row, col)` of an offset in nm, or `None` outside the window.
pub fn cell_of(east: f64, north: f64, window_nm: f64, size: usize) -> Option<(usize, usize)> {
    let half = 0.5 * window_nm;
    let cell = window_nm / size as f64;
    let col = ((east + half) / cell).floor();
    let row = ((half - north) / cell).floor();
    let n = size as f64;
    if (0.0..n).contains(&col) && (0.0..n).contains(&row) {
        Some((row as usize, col as usize))
    } else {
        None
    }
}

/// Targets whose position falls inside the window around `own`.
pub fn in_window<'a, T>(
    targets: &'a [T],
    kin: impl Fn(&T) -> &VesselKinematics + 'a,
    own: &'a VesselKinematics,
    window_nm: f64,
    size: usize,
) -> impl Iterator<Item = &'a T> + 'a {
    targets.iter().filter(move |t| {
        let (e, n) = local_offset(own.position, kin(t).position);
        cell_of(e, n, window_nm, size).is_some()
    })
}

/// Rasterizes traffic around `own`. When several vessels share a cell the
/// nearest one is kept; exact ties go to the later vessel in `traffic`.
pub fn rasterize(traffic: &[VesselKinematics], own: &VesselKinematics, window_nm: f64, size: usize) -> RasterTensor {
    let mut placed: Vec<(f64, usize, usize)> = traffic
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            let (e, n) = local_offset(own.position, t.position);
            cell_of(e, n, window_nm, size).map(|(r, c)| (e.hypot(n), i, r * size + c))
        })
        .collect();
    // Farthest first so nearer vessels overwrite; the sort is stable.
    placed.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = RasterTensor::zeros(size);
    for (_, i, cell) in placed {
        let t = &traffic[i];
        let k = cell * CHANNELS;
        out.data[k] = 1.0;
        out.data[k + 1] = (t.sog / SOG_SCALE).min(1.0);
        out.data[k + 2] = t.cog / 360.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;

    fn vessel(lat: f64, lon: f64, cog: f64, sog: f64) -> VesselKinematics {
        VesselKinematics::over_ground(GeoPoint::new(lat, lon).unwrap(), cog, sog)
    }

    #[test]
    fn empty_traffic_is_all_zero() {
        let own = vessel(5.0, 70.0, 0.0, 10.0);
        let r = rasterize(&[], &own, 10.0, 64);
        assert!(r.data.iter().all(|v| *v == 0.0));
        assert!(r.to_sparse().is_empty());
    }

    #[test]
    fn one_mile_north() {
        let own = vessel(0.0, 70.0, 0.0, 10.0);
        let t = vessel(1.0 / 60.0, 70.0, 90.0, 12.0);
        let r = rasterize(&[t], &own, 10.0, 64);
        // half-width 5 nm, cell 10/64 nm: column floor(5/0.15625)=32, row floor(4/0.15625)=25
        assert_eq!(r.cell(25, 32), [1.0, 0.4, 0.25]);
        assert_eq!(r.data.iter().filter(|v| **v != 0.0).count(), 3);
    }

    #[test]
    fn outside_window_ignored() {
        let own = vessel(0.0, 70.0, 0.0, 10.0);
        let t = vessel(8.0 / 60.0, 70.0, 0.0, 10.0);
        assert_eq!(rasterize(&[t], &own, 10.0, 64), RasterTensor::zeros(64));
    }

    #[test]
    fn nearest_vessel_wins_a_shared_cell() {
        let own = vessel(0.0, 70.0, 0.0, 10.0);
        let near = vessel(1.0 / 60.0, 70.0, 90.0, 3.0);
        let far = vessel(1.001 / 60.0, 70.0, 180.0, 6.0);
        for order in [[near, far], [far, near]] {
            let r = rasterize(&order, &own, 10.0, 64);
            assert_eq!(r.cell(25, 32)[1], 0.1);
        }
    }

    #[test]
    fn sparse_round_trip() {
        let own = vessel(0.0, 70.0, 0.0, 10.0);
        let ts = [vessel(0.01, 70.02, 10.0, 5.0), vessel(-0.03, 69.99, 300.0, 45.0)];
        let r = rasterize(&ts, &own, 10.0, 64);
        let s = r.to_sparse();
        assert_eq!(s.cells.len(), 2);
        assert_eq!(s.to_dense(), r);
    }
}
