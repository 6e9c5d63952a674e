use super::{BinaryMask, RasterGrid};
use crate::error::{Error, Result};
use crate::par;

/// Summed-area table with one extra leading row and column of zeros.
pub(crate) struct IntegralCounts {
    width: usize,
    table: Vec<u32>,
}

impl IntegralCounts {
    pub(crate) fn new(width: usize, height: usize, value: impl Fn(usize) -> u32) -> Self {
        let stride = width + 1;
        let mut table = vec![0u32; stride * (height + 1)];
        for r in 0..height {
            let mut run = 0u32;
            for c in 0..width {
                run += value(r * width + c);
                table[(r + 1) * stride + c + 1] = table[r * stride + c + 1] + run;
            }
        }
        IntegralCounts { width, table }
    }

    /// Sum over rows `r0..r1` and columns `c0..c1` (half-open).
    #[inline]
    pub(crate) fn sum(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> u32 {
        let s = self.width + 1;
        self.table[r1 * s + c1] + self.table[r0 * s + c0]
            - self.table[r0 * s + c1]
            - self.table[r1 * s + c0]
    }
}

/// Clipped half-open window bounds around `center` with the given radius.
#[inline]
pub(crate) fn window_bounds(center: usize, radius: usize, len: usize) -> (usize, usize) {
    (center.saturating_sub(radius), (center + radius + 1).min(len))
}

/// Fraction of ones in the centered `window`×`window` neighborhood of each
/// pixel. Windows are clipped at the image border and normalised by the
/// in-bounds pixel count.
pub fn window_ratio(mask: &BinaryMask, window: usize) -> Result<RasterGrid> {
    window_ratio_impl(mask, None, window)
}

/// Like [`window_ratio`], but pixels with `valid == 0` are excluded from both
/// numerator and denominator. Pixels whose window holds no valid pixel are NaN
/// (declared nodata).
pub fn window_ratio_valid(mask: &BinaryMask, valid: &BinaryMask, window: usize) -> Result<RasterGrid> {
    mask.geometry().ensure_same(valid.geometry(), "validity mask")?;
    window_ratio_impl(mask, Some(valid), window)
}

fn window_ratio_impl(mask: &BinaryMask, valid: Option<&BinaryMask>, window: usize) -> Result<RasterGrid> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "window must be odd and at least 1, got {window}"
        )));
    }
    let g = *mask.geometry();
    let bits = mask.bits();
    let ones = IntegralCounts::new(g.width, g.height, |i| match valid {
        Some(v) => (bits[i] & v.bits()[i]) as u32,
        None => bits[i] as u32,
    });
    let counts = valid.map(|v| IntegralCounts::new(g.width, g.height, |i| v.bits()[i] as u32));
    let radius = window / 2;
    let mut out = vec![0f32; g.len()];
    par::for_each_row(&mut out, g.width, |r, row| {
        let (r0, r1) = window_bounds(r, radius, g.height);
        for (c, o) in row.iter_mut().enumerate() {
            let (c0, c1) = window_bounds(c, radius, g.width);
            let n = match &counts {
                Some(t) => t.sum(r0, r1, c0, c1),
                None => ((r1 - r0) * (c1 - c0)) as u32,
            };
            *o = if n == 0 {
                f32::NAN
            } else {
                (ones.sum(r0, r1, c0, c1) as f64 / n as f64) as f32
            };
        }
    });
    let nodata = out.iter().any(|v| v.is_nan()).then_some(f32::NAN);
    RasterGrid::new(g, vec!["ratio".into()], out, nodata)
}
