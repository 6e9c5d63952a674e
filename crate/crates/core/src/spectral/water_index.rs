use crate::error::{Error, Result};
use crate::par;
use crate::raster::RasterGrid;

pub const DEFAULT_VISIBLE_BANDS: [&str; 3] = ["blue", "green", "red"];
pub const DEFAULT_SWIR_BANDS: [&str; 2] = ["swir1", "swir2"];

fn band_indices(raster: &RasterGrid, names: &[&str]) -> Result<Vec<usize>> {
    if names.is_empty() {
        return Err(Error::InvalidInput("empty band set".into()));
    }
    names
        .iter()
        .map(|n| {
            raster
                .band_index(n)
                .ok_or_else(|| Error::InvalidInput(format!("raster has no band `{n}`")))
        })
        .collect()
}

fn max_over(raster: &RasterGrid, bands: &[usize], i: usize) -> f32 {
    bands
        .iter()
        .map(|&b| raster.band(b)[i])
        .fold(f32::NEG_INFINITY, f32::max)
}

/// Single-date index: `Some(true)` where the brightest visible band beats the
/// brightest SWIR band strictly, `None` on nodata.
fn date_index(raster: &RasterGrid, vis: &[usize], swir: &[usize]) -> Vec<Option<bool>> {
    par::map_range(raster.geometry().len(), |i| {
        raster
            .pixel_valid(i)
            .then(|| max_over(raster, vis, i) > max_over(raster, swir, i))
    })
}

/// Binary water index of one date as a 0/1 raster (NaN on nodata).
pub fn water_index_date(raster: &RasterGrid, visible: &[&str], swir: &[&str]) -> Result<RasterGrid> {
    let vis = band_indices(raster, visible)?;
    let sw = band_indices(raster, swir)?;
    let wi = date_index(raster, &vis, &sw);
    let any_nodata = wi.iter().any(Option::is_none);
    let data = wi
        .into_iter()
        .map(|v| v.map_or(f32::NAN, |w| w as u8 as f32))
        .collect();
    RasterGrid::new(
        *raster.geometry(),
        vec!["wi".into()],
        data,
        any_nodata.then_some(f32::NAN),
    )
}

/// Fraction of dates on which the water index fires, per pixel. A pixel that
/// is nodata on any date is nodata in the output.
pub fn landsat_water_index(stack: &[RasterGrid], visible: &[&str], swir: &[&str]) -> Result<RasterGrid> {
    let first = stack
        .first()
        .ok_or_else(|| Error::InvalidInput("empty Landsat stack".into()))?;
    let g = *first.geometry();
    let mut hits = vec![Some(0u32); g.len()];
    for date in stack {
        g.ensure_same(date.geometry(), "Landsat date")?;
        let vis = band_indices(date, visible)?;
        let sw = band_indices(date, swir)?;
        for (h, wi) in hits.iter_mut().zip(date_index(date, &vis, &sw)) {
            *h = match (*h, wi) {
                (Some(n), Some(w)) => Some(n + w as u32),
                _ => None,
            };
        }
    }
    let m = stack.len() as f32;
    let any_nodata = hits.iter().any(Option::is_none);
    let data = hits
        .into_iter()
        .map(|h| h.map_or(f32::NAN, |k| k as f32 / m))
        .collect();
    RasterGrid::new(g, vec!["p_lan".into()], data, any_nodata.then_some(f32::NAN))
}
