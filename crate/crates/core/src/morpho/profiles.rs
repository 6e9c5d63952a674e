//! Grayscale morphology with flat structuring elements.
//!
//! Erosion takes the minimum of `f(x + b)` over the element, dilation the
//! maximum of `f(x - b)`; coordinates are clamped to the image (edge
//! replication). The pair is an adjunction, so opening and closing are
//! exactly idempotent and bracket the input.

use crate::error::Result;
use crate::par;
use crate::raster::RasterGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeShape {
    HorizontalLine,
    VerticalLine,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuringElement {
    pub shape: SeShape,
    pub size: usize,
}

/// The ten-profile family: opening and closing by each of these, in order.
pub const PROFILE_ELEMENTS: [StructuringElement; 5] = [
    StructuringElement { shape: SeShape::HorizontalLine, size: 4 },
    StructuringElement { shape: SeShape::VerticalLine, size: 4 },
    StructuringElement { shape: SeShape::Square, size: 4 },
    StructuringElement { shape: SeShape::Square, size: 6 },
    StructuringElement { shape: SeShape::Square, size: 8 },
];

impl StructuringElement {
    /// Offset range `lo..=hi` along each extended axis. Even sizes anchor at
    /// the top-left cell of the central pair.
    pub fn extent(&self) -> (isize, isize) {
        let s = self.size as isize;
        let lo = -((s - 1) / 2);
        (lo, lo + s - 1)
    }

    fn spans(&self) -> ((isize, isize), (isize, isize)) {
        let e = self.extent();
        match self.shape {
            SeShape::HorizontalLine => ((0, 0), e),
            SeShape::VerticalLine => (e, (0, 0)),
            SeShape::Square => (e, e),
        }
    }

    fn label(&self) -> String {
        match self.shape {
            SeShape::HorizontalLine => format!("hline{}", self.size),
            SeShape::VerticalLine => format!("vline{}", self.size),
            SeShape::Square => format!("square{}", self.size),
        }
    }
}

#[derive(Clone, Copy)]
enum Op {
    Min,
    Max,
}

impl Op {
    fn apply(self, a: f32, b: f32) -> f32 {
        match self {
            Op::Min => a.min(b),
            Op::Max => a.max(b),
        }
    }
}

/// Windowed min/max along rows over offsets `lo..=hi`.
fn filter_rows(src: &[f32], width: usize, lo: isize, hi: isize, op: Op) -> Vec<f32> {
    if lo == 0 && hi == 0 {
        return src.to_vec();
    }
    let mut out = vec![0f32; src.len()];
    let last = width as isize - 1;
    par::for_each_row(&mut out, width, |r, row| {
        let line = &src[r * width..(r + 1) * width];
        for (c, v) in row.iter_mut().enumerate() {
            let mut acc = line[(c as isize + lo).clamp(0, last) as usize];
            for o in lo + 1..=hi {
                acc = op.apply(acc, line[(c as isize + o).clamp(0, last) as usize]);
            }
            *v = acc;
        }
    });
    out
}

/// Windowed min/max along columns over offsets `lo..=hi`.
fn filter_cols(src: &[f32], width: usize, lo: isize, hi: isize, op: Op) -> Vec<f32> {
    if lo == 0 && hi == 0 {
        return src.to_vec();
    }
    let height = src.len() / width;
    let last = height as isize - 1;
    let mut out = vec![0f32; src.len()];
    par::for_each_row(&mut out, width, |r, row| {
        let base = (r as isize + lo).clamp(0, last) as usize;
        row.copy_from_slice(&src[base * width..(base + 1) * width]);
        for o in lo + 1..=hi {
            let rr = (r as isize + o).clamp(0, last) as usize;
            let other = &src[rr * width..(rr + 1) * width];
            for (v, &x) in row.iter_mut().zip(other) {
                *v = op.apply(*v, x);
            }
        }
    });
    out
}

pub fn erode(img: &[f32], width: usize, se: StructuringElement) -> Vec<f32> {
    let ((rlo, rhi), (clo, chi)) = se.spans();
    let tmp = filter_rows(img, width, clo, chi, Op::Min);
    filter_cols(&tmp, width, rlo, rhi, Op::Min)
}

pub fn dilate(img: &[f32], width: usize, se: StructuringElement) -> Vec<f32> {
    let ((rlo, rhi), (clo, chi)) = se.spans();
    let tmp = filter_rows(img, width, -chi, -clo, Op::Max);
    filter_cols(&tmp, width, -rhi, -rlo, Op::Max)
}

pub fn opening(img: &[f32], width: usize, se: StructuringElement) -> Vec<f32> {
    dilate(&erode(img, width, se), width, se)
}

pub fn closing(img: &[f32], width: usize, se: StructuringElement) -> Vec<f32> {
    erode(&dilate(img, width, se), width, se)
}

/// Ten-band morphological profile stack of a single-band image.
pub fn morphological_profiles(pan: &RasterGrid) -> Result<RasterGrid> {
    pan.require_single_band("morphological profiles")?;
    let w = pan.width();
    let img = pan.band(0);
    let mut names = Vec::with_capacity(10);
    let mut data = Vec::with_capacity(img.len() * 10);
    for se in PROFILE_ELEMENTS {
        names.push(format!("open_{}", se.label()));
        data.extend(opening(img, w, se));
        names.push(format!("close_{}", se.label()));
        data.extend(closing(img, w, se));
    }
    RasterGrid::new(*pan.geometry(), names, data, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GridGeometry;
    use proptest::prelude::*;

    const SQ4: StructuringElement = StructuringElement { shape: SeShape::Square, size: 4 };

    #[test]
    fn extents() {
        let e = |s| StructuringElement { shape: SeShape::Square, size: s }.extent();
        assert_eq!(e(4), (-1, 2));
        assert_eq!(e(6), (-2, 3));
        assert_eq!(e(8), (-3, 4));
        assert_eq!(e(3), (-1, 1));
    }

    #[test]
    fn constant_image_is_fixed() {
        let g = GridGeometry::new(7, 5, 0.8, 0.0, 0.0).unwrap();
        let pan = RasterGrid::filled(g, &["pan"], 0.3).unwrap();
        let mp = morphological_profiles(&pan).unwrap();
        assert_eq!(mp.band_count(), 10);
        assert!(mp.data().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn opening_removes_bright_speck() {
        let mut img = vec![1.0f32; 100];
        img[4 * 10 + 5] = 9.0;
        assert!(opening(&img, 10, SQ4).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn closing_fills_dark_speck() {
        let mut img = vec![1.0f32; 100];
        img[4 * 10 + 5] = -3.0;
        assert!(closing(&img, 10, SQ4).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn erosion_window_matches_definition() {
        // 1-D ramp: erosion by hline4 at column c is f(clamp(c - 1)).
        let img: Vec<f32> = (0..8).map(|v| v as f32).collect();
        let se = StructuringElement { shape: SeShape::HorizontalLine, size: 4 };
        assert_eq!(erode(&img, 8, se), vec![0., 0., 1., 2., 3., 4., 5., 6.]);
        assert_eq!(dilate(&img, 8, se), vec![1., 2., 3., 4., 5., 6., 7., 7.]);
    }

    fn image() -> impl Strategy<Value = (usize, Vec<f32>)> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            (Just(w), prop::collection::vec(-5.0f32..5.0, w * h))
        })
    }

    proptest! {
        #[test]
        fn bracketing_and_idempotence((w, img) in image(), which in 0usize..5) {
            let se = PROFILE_ELEMENTS[which];
            let o = opening(&img, w, se);
            let c = closing(&img, w, se);
            for i in 0..img.len() {
                prop_assert!(o[i] <= img[i] && img[i] <= c[i]);
            }
            prop_assert_eq!(opening(&o, w, se), o);
            prop_assert_eq!(closing(&c, w, se), c);
        }
    }
}
