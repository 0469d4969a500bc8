use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Real, Tensor};

/// Latitude/longitude box in degrees (north positive, east positive,
/// longitudes in −180..180).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

/// Rounding slack when converting degree offsets to cell indices.
const INDEX_SLACK: f64 = 1e-9;

impl Region {
    /// Germany/Austria/Switzerland: 45–55°N, 5–15°E.
    pub const DACH: Region = Region {
        lat_min: 45.0,
        lat_max: 55.0,
        lon_min: 5.0,
        lon_max: 15.0,
    };

    /// Continental United States portion: 35–50°N, 125–70°W.
    pub const NORTH_AMERICA: Region = Region {
        lat_min: 35.0,
        lat_max: 50.0,
        lon_min: -125.0,
        lon_max: -70.0,
    };

    pub const GLOBAL: Region = Region {
        lat_min: -90.0,
        lat_max: 90.0,
        lon_min: -180.0,
        lon_max: 180.0,
    };

    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self> {
        let r = Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lat_min < self.lat_max) || self.lat_min < -90.0 || self.lat_max > 90.0 {
            return Err(Error::Bounds {
                axis: "latitude",
                detail: format!("invalid range {}..{}", self.lat_min, self.lat_max),
            });
        }
        if !(self.lon_min < self.lon_max) || self.lon_min < -180.0 || self.lon_max > 180.0 {
            return Err(Error::Bounds {
                axis: "longitude",
                detail: format!("invalid range {}..{}", self.lon_min, self.lon_max),
            });
        }
        Ok(())
    }

    /// True when the two boxes share a region of positive area.
    pub fn overlaps(&self, other: &Region) -> bool {
        self.lat_min < other.lat_max
            && other.lat_min < self.lat_max
            && self.lon_min < other.lon_max
            && other.lon_min < self.lon_max
    }

    pub fn contains(&self, other: &Region) -> bool {
        other.lat_min >= self.lat_min
            && other.lat_max <= self.lat_max
            && other.lon_min >= self.lon_min
            && other.lon_max <= self.lon_max
    }
}

/// Index window `(row0, row1, col0, col1)` (half-open) of `want` inside a
/// grid covering `bounds` with `cell = (dlat, dlon)` degrees per cell.
/// Rows run north to south.
pub fn region_window(bounds: &Region, cell: (f64, f64), want: &Region) -> Result<(usize, usize, usize, usize)> {
    bounds.validate()?;
    want.validate()?;
    let (dlat, dlon) = cell;
    if !(dlat > 0.0 && dlon > 0.0) {
        return Err(Error::config(format!("cell size must be positive, got {dlat}x{dlon}")));
    }
    if want.lat_min < bounds.lat_min || want.lat_max > bounds.lat_max {
        return Err(Error::Bounds {
            axis: "latitude",
            detail: format!(
                "{}..{} outside grid {}..{}",
                want.lat_min, want.lat_max, bounds.lat_min, bounds.lat_max
            ),
        });
    }
    if want.lon_min < bounds.lon_min || want.lon_max > bounds.lon_max {
        return Err(Error::Bounds {
            axis: "longitude",
            detail: format!(
                "{}..{} outside grid {}..{}",
                want.lon_min, want.lon_max, bounds.lon_min, bounds.lon_max
            ),
        });
    }
    let lo = |v: f64| (v + INDEX_SLACK).floor().max(0.0) as usize;
    let hi = |v: f64| (v - INDEX_SLACK).ceil().max(0.0) as usize;
    let row0 = lo((bounds.lat_max - want.lat_max) / dlat);
    let row1 = hi((bounds.lat_max - want.lat_min) / dlat).max(row0 + 1);
    let col0 = lo((want.lon_min - bounds.lon_min) / dlon);
    let col1 = hi((want.lon_max - bounds.lon_min) / dlon).max(col0 + 1);
    Ok((row0, row1, col0, col1))
}

/// Cuts `want` out of a field covering `bounds`.
pub fn extract_region<T: Real>(
    grid: &Tensor<T>,
    bounds: &Region,
    cell: (f64, f64),
    want: &Region,
) -> Result<Tensor<T>> {
    let (h, w) = grid.hw();
    let (r0, r1, c0, c1) = region_window(bounds, cell, want)?;
    if r1 > h {
        return Err(Error::Bounds {
            axis: "latitude",
            detail: format!("window rows {r0}..{r1} exceed grid height {h}"),
        });
    }
    if c1 > w {
        return Err(Error::Bounds {
            axis: "longitude",
            detail: format!("window columns {c0}..{c1} exceed grid width {w}"),
        });
    }
    let (oh, ow) = (r1 - r0, c1 - c0);
    let planes = grid.planes();
    let mut out = Vec::with_capacity(planes * oh * ow);
    for plane in grid.data().chunks_exact(h * w) {
        for r in r0..r1 {
            out.extend_from_slice(&plane[r * w + c0..r * w + c1]);
        }
    }
    Tensor::new(grid.with_hw(oh, ow), out)
}
