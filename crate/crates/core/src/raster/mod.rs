//! Raster data model shared by every stage of the pipeline.
//!
//! Map coordinates follow the usual north-up convention: column index grows
//! eastward (+x) and row index grows southward (−y) from the upper-left
//! corner `(origin_x, origin_y)`.

mod io;
mod resample;
mod window;

pub use io::{read_mask, read_raster, write_mask, write_raster};
pub use resample::resample_nearest;
pub use window::{window_ratio, window_ratio_valid};
pub(crate) use window::{window_bounds, IntegralCounts};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    /// Square pixel edge length in meters.
    pub pixel_size: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl GridGeometry {
    pub fn new(
        width: usize,
        height: usize,
        pixel_size: f64,
        origin_x: f64,
        origin_y: f64,
    ) -> Result<Self> {
        let g = GridGeometry {
            width,
            height,
            pixel_size,
            origin_x,
            origin_y,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Geometry(format!(
                "grid must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.pixel_size.is_finite() && self.pixel_size > 0.0) {
            return Err(Error::Geometry(format!(
                "pixel size must be positive, got {}",
                self.pixel_size
            )));
        }
        if !self.origin_x.is_finite() || !self.origin_y.is_finite() {
            return Err(Error::Geometry("origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Map coordinates of the center of pixel `(row, col)`.
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.pixel_size,
            self.origin_y - (row as f64 + 0.5) * self.pixel_size,
        )
    }

    /// The pixel containing map point `(x, y)`, if it lies inside the grid.
    pub fn pixel_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin_x) / self.pixel_size).floor();
        let r = ((self.origin_y - y) / self.pixel_size).floor();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            None
        } else {
            Some((r as usize, c as usize))
        }
    }

    /// Map extent as `(min_x, min_y, max_x, max_y)`.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.origin_x,
            self.origin_y - self.height as f64 * self.pixel_size,
            self.origin_x + self.width as f64 * self.pixel_size,
            self.origin_y,
        )
    }

    pub(crate) fn ensure_same(&self, other: &GridGeometry, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "{what}: {}x{}@{} vs {}x{}@{}",
                self.width,
                self.height,
                self.pixel_size,
                other.width,
                other.height,
                other.pixel_size
            )));
        }
        Ok(())
    }
}

/// A band-sequential stack of 32-bit samples on a [`GridGeometry`].
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    geometry: GridGeometry,
    band_names: Vec<String>,
    data: Vec<f32>,
    nodata: Option<f32>,
}

impl RasterGrid {
    pub fn new(
        geometry: GridGeometry,
        band_names: Vec<String>,
        data: Vec<f32>,
        nodata: Option<f32>,
    ) -> Result<Self> {
        geometry.validate()?;
        if band_names.is_empty() {
            return Err(Error::InvalidInput("raster needs at least one band".into()));
        }
        for name in &band_names {
            if name.is_empty() || name.contains([',', '\n', '\r']) {
                return Err(Error::InvalidInput(format!("invalid band name `{name}`")));
            }
        }
        let expected = geometry.len() * band_names.len();
        if data.len() != expected {
            return Err(Error::InvalidInput(format!(
                "raster data holds {} samples, expected {expected}",
                data.len()
            )));
        }
        let r = RasterGrid {
            geometry,
            band_names,
            data,
            nodata,
        };
        if let Some(index) = r.data.iter().position(|&v| !v.is_finite() && !r.is_nodata(v)) {
            return Err(Error::NonFinite { index });
        }
        Ok(r)
    }

    pub fn single_band(geometry: GridGeometry, name: &str, data: Vec<f32>) -> Result<Self> {
        Self::new(geometry, vec![name.to_string()], data, None)
    }

    pub fn filled(geometry: GridGeometry, band_names: &[&str], value: f32) -> Result<Self> {
        let n = geometry.len() * band_names.len();
        Self::new(
            geometry,
            band_names.iter().map(|s| s.to_string()).collect(),
            vec![value; n],
            None,
        )
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn band_count(&self) -> usize {
        self.band_names.len()
    }

    pub fn band_names(&self) -> &[String] {
        &self.band_names
    }

    pub fn band_index(&self, name: &str) -> Option<usize> {
        self.band_names.iter().position(|b| b == name)
    }

    pub fn nodata(&self) -> Option<f32> {
        self.nodata
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn band(&self, band: usize) -> &[f32] {
        let n = self.geometry.len();
        &self.data[band * n..(band + 1) * n]
    }

    pub fn band_mut(&mut self, band: usize) -> &mut [f32] {
        let n = self.geometry.len();
        &mut self.data[band * n..(band + 1) * n]
    }

    #[inline]
    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data[band * self.geometry.len() + self.geometry.index(row, col)]
    }

    /// True when `v` is this raster's nodata sentinel (NaN sentinels match any NaN).
    #[inline]
    pub fn is_nodata(&self, v: f32) -> bool {
        match self.nodata {
            Some(nd) if nd.is_nan() => v.is_nan(),
            Some(nd) => v == nd,
            None => false,
        }
    }

    /// True when no band holds nodata at pixel `index`.
    pub fn pixel_valid(&self, index: usize) -> bool {
        if self.nodata.is_none() {
            return true;
        }
        let n = self.geometry.len();
        (0..self.band_count()).all(|b| !self.is_nodata(self.data[b * n + index]))
    }

    /// Copies the spectrum of pixel `index` into `out` (length = band count).
    pub fn spectrum_into(&self, index: usize, out: &mut [f64]) {
        let n = self.geometry.len();
        for (b, o) in out.iter_mut().enumerate() {
            *o = self.data[b * n + index] as f64;
        }
    }

    pub fn require_single_band(&self, what: &str) -> Result<()> {
        if self.band_count() != 1 {
            return Err(Error::InvalidInput(format!(
                "{what} must be single-band, got {} bands",
                self.band_count()
            )));
        }
        Ok(())
    }

    /// New raster holding the given bands, in the given order.
    pub fn select_bands(&self, bands: &[usize]) -> Result<RasterGrid> {
        let mut data = Vec::with_capacity(bands.len() * self.geometry.len());
        let mut names = Vec::with_capacity(bands.len());
        for &b in bands {
            if b >= self.band_count() {
                return Err(Error::InvalidInput(format!("band {b} out of range")));
            }
            data.extend_from_slice(self.band(b));
            names.push(self.band_names[b].clone());
        }
        RasterGrid::new(self.geometry, names, data, self.nodata)
    }
}

/// A 0/1 mask on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    geometry: GridGeometry,
    bits: Vec<u8>,
}

impl BinaryMask {
    pub fn new(geometry: GridGeometry, bits: Vec<u8>) -> Result<Self> {
        geometry.validate()?;
        if bits.len() != geometry.len() {
            return Err(Error::InvalidInput(format!(
                "mask holds {} values, expected {}",
                bits.len(),
                geometry.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidInput("mask values must be 0 or 1".into()));
        }
        Ok(BinaryMask { geometry, bits })
    }

    pub fn zeros(geometry: GridGeometry) -> Self {
        BinaryMask {
            bits: vec![0; geometry.len()],
            geometry,
        }
    }

    pub fn from_fn(geometry: GridGeometry, f: impl Fn(usize) -> bool + Sync + Send) -> Self {
        let mut bits = vec![0u8; geometry.len()];
        crate::par::fill_indexed(&mut bits, |i| f(i) as u8);
        BinaryMask { geometry, bits }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, index: usize) -> bool {
        self.bits[index] != 0
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> bool {
        self.bits[self.geometry.index(row, col)] != 0
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.bits[index] = value as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn to_raster(&self, band_name: &str) -> RasterGrid {
        RasterGrid {
            geometry: self.geometry,
            band_names: vec![band_name.to_string()],
            data: self.bits.iter().map(|&b| b as f32).collect(),
            nodata: None,
        }
    }

    /// Accepts a single-band raster holding only 0.0 / 1.0.
    pub fn from_raster(raster: &RasterGrid) -> Result<Self> {
        raster.require_single_band("mask")?;
        let mut bits = Vec::with_capacity(raster.data.len());
        for &v in &raster.data {
            bits.push(match v {
                x if x == 0.0 => 0,
                x if x == 1.0 => 1,
                x => {
                    return Err(Error::InvalidInput(format!(
                        "mask sample {x} is not 0 or 1"
                    )))
                }
            });
        }
        Ok(BinaryMask {
            geometry: raster.geometry,
            bits,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_center_round_trips() {
        let g = GridGeometry::new(7, 5, 0.8, 500_000.0, 4_400_000.0).unwrap();
        for r in 0..g.height {
            for c in 0..g.width {
                let (x, y) = g.pixel_center(r, c);
                assert_eq!(g.pixel_at(x, y), Some((r, c)));
            }
        }
        assert_eq!(g.pixel_at(499_999.0, 4_399_999.0), None);
    }

    #[test]
    fn geometry_rejects_bad_values() {
        assert!(GridGeometry::new(0, 3, 1.0, 0.0, 0.0).is_err());
        assert!(GridGeometry::new(3, 3, 0.0, 0.0, 0.0).is_err());
        assert!(GridGeometry::new(3, 3, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn non_finite_needs_nodata() {
        let g = GridGeometry::new(2, 1, 1.0, 0.0, 0.0).unwrap();
        let bad = RasterGrid::new(g, vec!["b".into()], vec![1.0, f32::NAN], None);
        assert!(matches!(bad, Err(Error::NonFinite { index: 1 })));
        let ok = RasterGrid::new(g, vec!["b".into()], vec![1.0, f32::NAN], Some(f32::NAN)).unwrap();
        assert!(!ok.pixel_valid(1));
        assert!(ok.pixel_valid(0));
    }

    #[test]
    fn mask_from_raster_rejects_other_values() {
        let g = GridGeometry::new(2, 1, 1.0, 0.0, 0.0).unwrap();
        let r = RasterGrid::single_band(g, "m", vec![0.0, 0.5]).unwrap();
        assert!(BinaryMask::from_raster(&r).is_err());
    }
}
