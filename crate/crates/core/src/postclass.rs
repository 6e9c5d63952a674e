//! Post-classification: shadow relabelling of water segments and local
//! two-endmember unmixing along the water/land boundary.

use crate::error::{Error, Result};
use crate::morpho::SegmentMap;
use crate::par;
use crate::raster::{window_bounds, BinaryMask, IntegralCounts, RasterGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostClassParams {
    pub shadow_relabel_threshold: f64,
    pub boundary_band_px: usize,
    pub unmix_window_px: usize,
    pub water_fraction_threshold: f64,
}

impl Default for PostClassParams {
    fn default() -> Self {
        PostClassParams {
            shadow_relabel_threshold: 0.85,
            boundary_band_px: 4,
            unmix_window_px: 33,
            water_fraction_threshold: 0.5,
        }
    }
}

impl PostClassParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("shadow_relabel_threshold", self.shadow_relabel_threshold),
            ("water_fraction_threshold", self.water_fraction_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} = {v} outside (0, 1)")));
            }
        }
        if self.boundary_band_px == 0 {
            return Err(Error::Config("boundary_band_px must be at least 1".into()));
        }
        if self.unmix_window_px == 0 || self.unmix_window_px.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "unmix_window_px = {} must be odd",
                self.unmix_window_px
            )));
        }
        Ok(())
    }
}

/// Water segments whose shadow proportion exceeds the threshold become
/// non-water; everything else keeps its label.
pub fn relabel_shadow_segments(water: &[bool], segmap: &SegmentMap, params: &PostClassParams) -> Result<Vec<bool>> {
    if water.len() != segmap.len() {
        return Err(Error::InvalidInput("one label per segment required".into()));
    }
    Ok(water
        .iter()
        .zip(&segmap.records)
        .map(|(&w, r)| w && r.p_shadow <= params.shadow_relabel_threshold)
        .collect())
}

/// Least-squares water fraction of `x` between the two endmembers, clamped
/// to [0, 1]. `None` when the endmembers coincide.
pub fn unmix_fraction(x: &[f64], water: &[f64], land: &[f64]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for ((&xi, &wi), &li) in x.iter().zip(water).zip(land) {
        let d = wi - li;
        num += (xi - li) * d;
        den += d * d;
    }
    (den > 0.0).then(|| (num / den).clamp(0.0, 1.0))
}

/// Pixels within `band` (Chebyshev) of a pixel carrying the opposite label.
pub fn boundary_band(mask: &BinaryMask, band: usize) -> BinaryMask {
    let g = *mask.geometry();
    let ones = IntegralCounts::new(g.width, g.height, |i| mask.get(i) as u32);
    BinaryMask::from_fn(g, |i| {
        let (r, c) = (i / g.width, i % g.width);
        let (r0, r1) = window_bounds(r, band, g.height);
        let (c0, c1) = window_bounds(c, band, g.width);
        let n = ((r1 - r0) * (c1 - c0)) as u32;
        let water = ones.sum(r0, r1, c0, c1);
        if mask.get(i) { water < n } else { water > 0 }
    })
}

/// Summed-area table over f64 values.
struct IntegralSums {
    width: usize,
    table: Vec<f64>,
}

impl IntegralSums {
    fn new(width: usize, height: usize, value: impl Fn(usize) -> f64) -> Self {
        let stride = width + 1;
        let mut table = vec![0f64; stride * (height + 1)];
        for r in 0..height {
            let mut run = 0.0;
            for c in 0..width {
                run += value(r * width + c);
                table[(r + 1) * stride + c + 1] = table[r * stride + c + 1] + run;
            }
        }
        IntegralSums { width, table }
    }

    fn sum(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        let s = self.width + 1;
        (self.table[r1 * s + c1] - self.table[r0 * s + c1]) - (self.table[r1 * s + c0] - self.table[r0 * s + c0])
    }
}

/// Relabels boundary-band pixels by local two-endmember unmixing of the MS
/// spectrum (already on the mask grid). Endmembers are the mean spectra of
/// interior water and interior land pixels in the centred window.
pub fn boundary_unmix(water: &BinaryMask, ms: &RasterGrid, params: &PostClassParams) -> Result<BinaryMask> {
    params.validate()?;
    let g = *water.geometry();
    g.ensure_same(ms.geometry(), "MS on the PAN grid")?;
    let band = boundary_band(water, params.boundary_band_px);
    let interior_water = |i: usize| water.get(i) && !band.get(i) && ms.pixel_valid(i);
    let interior_land = |i: usize| !water.get(i) && !band.get(i) && ms.pixel_valid(i);
    let nw = IntegralCounts::new(g.width, g.height, |i| interior_water(i) as u32);
    let nl = IntegralCounts::new(g.width, g.height, |i| interior_land(i) as u32);
    let d = ms.band_count();
    let sums: Vec<(IntegralSums, IntegralSums)> = (0..d)
        .map(|b| {
            let v = ms.band(b);
            (
                IntegralSums::new(g.width, g.height, |i| if interior_water(i) { v[i] as f64 } else { 0.0 }),
                IntegralSums::new(g.width, g.height, |i| if interior_land(i) { v[i] as f64 } else { 0.0 }),
            )
        })
        .collect();
    let radius = params.unmix_window_px / 2;
    let t = params.water_fraction_threshold;
    let mut bits = water.bits().to_vec();
    par::fill_indexed(&mut bits, |i| {
        let current = water.get(i);
        if !band.get(i) || !ms.pixel_valid(i) {
            return current as u8;
        }
        let (r, c) = (i / g.width, i % g.width);
        let (r0, r1) = window_bounds(r, radius, g.height);
        let (c0, c1) = window_bounds(c, radius, g.width);
        let (cw, cl) = (nw.sum(r0, r1, c0, c1), nl.sum(r0, r1, c0, c1));
        if cw == 0 || cl == 0 {
            return current as u8;
        }
        let mut x = vec![0f64; d];
        ms.spectrum_into(i, &mut x);
        let ew: Vec<f64> = sums.iter().map(|(s, _)| s.sum(r0, r1, c0, c1) / cw as f64).collect();
        let el: Vec<f64> = sums.iter().map(|(_, s)| s.sum(r0, r1, c0, c1) / cl as f64).collect();
        match unmix_fraction(&x, &ew, &el) {
            Some(f) => (f > t) as u8,
            None => current as u8,
        }
    });
    BinaryMask::new(g, bits)
}
