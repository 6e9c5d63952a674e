use super::{GridGeometry, RasterGrid};
use crate::error::Result;
use crate::par;

/// Nearest-neighbor resampling onto `target`.
///
/// Each target pixel takes the source pixel whose center is nearest to the
/// target pixel center, i.e. the source pixel containing that center. Target
/// pixels falling outside the source extent take the source nodata value, or
/// NaN (declared as nodata) when the source has none.
pub fn resample_nearest(src: &RasterGrid, target: &GridGeometry) -> Result<RasterGrid> {
    target.validate()?;
    let sg = *src.geometry();
    let n = target.len();
    let mut lookup = vec![usize::MAX; n];
    par::fill_indexed(&mut lookup, |i| {
        let (row, col) = (i / target.width, i % target.width);
        let (x, y) = target.pixel_center(row, col);
        sg.pixel_at(x, y)
            .map(|(r, c)| sg.index(r, c))
            .unwrap_or(usize::MAX)
    });
    let outside = lookup.contains(&usize::MAX);
    let fill = src.nodata().unwrap_or(f32::NAN);
    let nodata = if outside { Some(fill) } else { src.nodata() };

    let bands = src.band_count();
    let mut data = vec![0f32; n * bands];
    for b in 0..bands {
        let band = src.band(b);
        let out = &mut data[b * n..(b + 1) * n];
        par::fill_indexed(out, |i| match lookup[i] {
            usize::MAX => fill,
            s => band[s],
        });
    }
    RasterGrid::new(*target, src.band_names().to_vec(), data, nodata)
}
