//! Shadow geometry: projecting object pixels along the anti-solar direction,
//! building-intensity mapping, segment classification and the per-segment
//! shadow proportion.

use crate::error::{Error, Result};
use crate::landcover::LandCover;
use crate::morpho::SegmentMap;
use crate::par;
use crate::raster::{window_ratio, BinaryMask, GridGeometry};
use crate::spectral::otsu_threshold;

/// Sun and view angles in degrees. Azimuths run clockwise from north.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowGeometry {
    pub sun_elevation_deg: f64,
    pub sun_azimuth_deg: f64,
    pub view_elevation_deg: f64,
    pub view_azimuth_deg: f64,
}

impl ShadowGeometry {
    pub fn nadir(sun_elevation_deg: f64, sun_azimuth_deg: f64) -> Self {
        ShadowGeometry {
            sun_elevation_deg,
            sun_azimuth_deg,
            view_elevation_deg: 90.0,
            view_azimuth_deg: 0.0,
        }
    }

    /// `(a, b)`: column and row displacement per meter of height, in meters.
    pub fn coefficients(&self) -> Result<(f64, f64)> {
        shadow_offset_coefficients(self)
    }
}

pub fn shadow_offset_coefficients(geom: &ShadowGeometry) -> Result<(f64, f64)> {
    let elev = geom.sun_elevation_deg;
    if !(elev > 0.0 && elev <= 90.0) {
        return Err(Error::Config(format!("sun elevation {elev} outside (0, 90]")));
    }
    if elev == 90.0 {
        return Ok((0.0, 0.0));
    }
    let t = elev.to_radians().tan();
    let az = geom.sun_azimuth_deg.to_radians();
    Ok((-az.sin() / t, az.cos() / t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightRanges {
    pub high_intensity_building: HeightRange,
    pub low_intensity_building: HeightRange,
    pub tree: HeightRange,
    /// Meters of height between marks; `None` picks the gap-free default.
    pub sweep_step: Option<f64>,
}

impl Default for HeightRanges {
    fn default() -> Self {
        HeightRanges {
            high_intensity_building: HeightRange { min: 3.0, max: 300.0 },
            low_intensity_building: HeightRange { min: 3.0, max: 50.0 },
            tree: HeightRange { min: 3.0, max: 50.0 },
            sweep_step: None,
        }
    }
}

impl HeightRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("high-intensity building", self.high_intensity_building),
            ("low-intensity building", self.low_intensity_building),
            ("tree", self.tree),
        ] {
            if !(r.min > 0.0 && r.min <= r.max && r.max.is_finite()) {
                return Err(Error::Config(format!("{name} height range [{}, {}]", r.min, r.max)));
            }
        }
        if let Some(s) = self.sweep_step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sweep step {s} must be positive")));
            }
        }
        Ok(())
    }

    pub fn range(&self, kind: ObjectKind) -> HeightRange {
        match kind {
            ObjectKind::HighIntensityBuilding => self.high_intensity_building,
            ObjectKind::LowIntensityBuilding => self.low_intensity_building,
            ObjectKind::Tree => self.tree,
        }
    }
}

/// Largest height step that keeps consecutive marks on adjacent pixels.
pub fn gap_free_step(a: f64, b: f64, r: f64) -> f64 {
    r / a.abs().max(b.abs()).max(1.0)
}

/// Default sweep step: `r·tan(elevation)`, clamped to the gap-free bound.
pub fn default_sweep_step(geom: &ShadowGeometry, r: f64) -> Result<f64> {
    let (a, b) = geom.coefficients()?;
    let natural = if geom.sun_elevation_deg >= 90.0 {
        f64::INFINITY
    } else {
        r * geom.sun_elevation_deg.to_radians().tan()
    };
    Ok(natural.min(gap_free_step(a, b, r)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityParams {
    pub window: usize,
    pub ratio_threshold: f64,
}

impl Default for IntensityParams {
    fn default() -> Self {
        IntensityParams {
            window: 101,
            ratio_threshold: 0.30,
        }
    }
}

impl IntensityParams {
    pub fn validate(&self) -> Result<()> {
        if self.window.is_multiple_of(2) {
            return Err(Error::Config(format!("intensity window {} must be odd", self.window)));
        }
        if !(self.ratio_threshold > 0.0 && self.ratio_threshold < 1.0) {
            return Err(Error::Config(format!(
                "intensity ratio {} outside (0, 1)",
                self.ratio_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectKind {
    HighIntensityBuilding,
    LowIntensityBuilding,
    Tree,
}

/// Segment label after majority voting and the tree/grass split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentClass {
    Grass,
    Tree,
    Soil,
    Impervious,
    Water,
}

impl SegmentClass {
    pub fn from_cover(c: LandCover) -> Self {
        match c {
            LandCover::Vegetation => SegmentClass::Grass,
            LandCover::Soil => SegmentClass::Soil,
            LandCover::Impervious => SegmentClass::Impervious,
            LandCover::Water => SegmentClass::Water,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SegmentClass::Grass => "grass",
            SegmentClass::Tree => "tree",
            SegmentClass::Soil => "soil",
            SegmentClass::Impervious => "impervious",
            SegmentClass::Water => "water",
        }
    }
}

/// Majority MS class of every segment.
pub fn classify_segments_majority(segmap: &SegmentMap) -> Result<Vec<LandCover>> {
    segmap
        .records
        .iter()
        .map(|r| {
            r.majority_class()
                .ok_or_else(|| Error::InvalidInput(format!("segment {} has no class votes", r.id)))
        })
        .collect()
}

/// Data-driven tree threshold: Otsu over the vegetation segments' profile
/// deviations. `None` when fewer than two distinct values exist.
pub fn default_tree_threshold(segmap: &SegmentMap, classes: &[LandCover]) -> Option<f64> {
    let values: Vec<f32> = segmap
        .records
        .iter()
        .zip(classes)
        .filter(|(_, c)| **c == LandCover::Vegetation)
        .map(|(r, _)| r.mp_std as f32)
        .collect();
    otsu_threshold(&values).ok()
}

/// Vegetation segments with `mp_std > t_tree` become trees, the rest grass.
pub fn tree_grass_split(segmap: &SegmentMap, classes: &[LandCover], t_tree: f64) -> Vec<SegmentClass> {
    segmap
        .records
        .iter()
        .zip(classes)
        .map(|(r, &c)| match c {
            LandCover::Vegetation if r.mp_std > t_tree => SegmentClass::Tree,
            other => SegmentClass::from_cover(other),
        })
        .collect()
}

/// High-intensity building area: impervious ratio in the window above the threshold.
pub fn building_intensity_map(impervious: &BinaryMask, params: &IntensityParams) -> Result<BinaryMask> {
    params.validate()?;
    let ratio = window_ratio(impervious, params.window)?;
    let t = params.ratio_threshold as f32;
    let band = ratio.band(0);
    Ok(BinaryMask::from_fn(*impervious.geometry(), |i| band[i] > t))
}

/// Per-pixel object kinds: impervious segments are buildings (high or low
/// intensity by `intensity`), tree segments are trees.
pub fn object_kinds(segmap: &SegmentMap, classes: &[SegmentClass], intensity: &BinaryMask) -> Vec<Option<ObjectKind>> {
    segmap
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| match classes[l as usize] {
            SegmentClass::Impervious if intensity.get(i) => Some(ObjectKind::HighIntensityBuilding),
            SegmentClass::Impervious => Some(ObjectKind::LowIntensityBuilding),
            SegmentClass::Tree => Some(ObjectKind::Tree),
            _ => None,
        })
        .collect()
}

/// Heights visited for a range: `min, min+step, …` and always `max`.
fn sweep(range: HeightRange, step: f64) -> Vec<f64> {
    let mut hs = Vec::new();
    let mut k = 0u32;
    loop {
        let h = range.min + k as f64 * step;
        if h >= range.max {
            break;
        }
        hs.push(h);
        k += 1;
    }
    hs.push(range.max);
    hs
}

/// Marks every pixel reached by projecting object pixels over their kind's
/// height range.
pub fn potential_shadow_mask(
    grid: &GridGeometry,
    kinds: &[Option<ObjectKind>],
    geom: &ShadowGeometry,
    ranges: &HeightRanges,
) -> Result<BinaryMask> {
    if kinds.len() != grid.len() {
        return Err(Error::GridMismatch("object kind map does not match grid".into()));
    }
    ranges.validate()?;
    let r = grid.pixel_size;
    let (a, b) = geom.coefficients()?;
    let step = match ranges.sweep_step {
        Some(s) => s,
        None => default_sweep_step(geom, r)?,
    };
    // Pixel offsets per kind, deduplicated. Coordinates round half up, which
    // for integer origins is the same as rounding the offset half up. Offsets
    // are first snapped to 1e-9 px so trigonometric noise (tan 45° ≠ 1) cannot
    // flip an exact half.
    let round = |x: f64| ((x * 1e9).round() / 1e9 + 0.5).floor() as i64;
    let offsets = |kind: ObjectKind| -> Vec<(i64, i64)> {
        let mut v: Vec<(i64, i64)> = sweep(ranges.range(kind), step)
            .into_iter()
            .map(|h| (round(b * h / r), round(a * h / r)))
            .collect();
        v.dedup();
        v
    };
    let table = [
        offsets(ObjectKind::HighIntensityBuilding),
        offsets(ObjectKind::LowIntensityBuilding),
        offsets(ObjectKind::Tree),
    ];
    let (w, h) = (grid.width as i64, grid.height as i64);
    // Each row collects its marks; the union is order-independent.
    let rows: Vec<Vec<usize>> = par::map_range(grid.height, |row| {
        let mut marks = Vec::new();
        for col in 0..grid.width {
            let Some(kind) = kinds[row * grid.width + col] else {
                continue;
            };
            let idx = match kind {
                ObjectKind::HighIntensityBuilding => 0,
                ObjectKind::LowIntensityBuilding => 1,
                ObjectKind::Tree => 2,
            };
            for &(dr, dc) in &table[idx] {
                let (rr, cc) = (row as i64 + dr, col as i64 + dc);
                if (0..h).contains(&rr) && (0..w).contains(&cc) {
                    marks.push((rr * w + cc) as usize);
                }
            }
        }
        marks
    });
    let mut mask = BinaryMask::zeros(*grid);
    for i in rows.into_iter().flatten() {
        mask.set(i, true);
    }
    Ok(mask)
}

/// Sets `p_shadow` of every segment to its fraction of masked pixels.
pub fn segment_shadow_proportion(segmap: &mut SegmentMap, shadow: &BinaryMask) -> Result<()> {
    segmap.geometry().ensure_same(shadow.geometry(), "shadow mask")?;
    let mut hits = vec![0u64; segmap.len()];
    for (i, &l) in segmap.labels().iter().enumerate() {
        hits[l as usize] += shadow.get(i) as u64;
    }
    for (rec, h) in segmap.records.iter_mut().zip(hits) {
        rec.p_shadow = h as f64 / rec.pixel_count as f64;
    }
    Ok(())
}

/// Everything the shadow stage derives from a segment map.
#[derive(Debug, Clone)]
pub struct ShadowAnalysis {
    pub classes: Vec<SegmentClass>,
    pub t_tree: Option<f64>,
    pub intensity: BinaryMask,
    pub shadow: BinaryMask,
}

/// Majority voting, tree/grass split, intensity mapping and shadow
/// projection; fills `p_shadow` on `segmap`.
pub fn analyse_shadows(
    segmap: &mut SegmentMap,
    geom: &ShadowGeometry,
    ranges: &HeightRanges,
    intensity: &IntensityParams,
    t_tree: Option<f64>,
) -> Result<ShadowAnalysis> {
    let cover = classify_segments_majority(segmap)?;
    let t_tree = t_tree.or_else(|| default_tree_threshold(segmap, &cover));
    let classes = tree_grass_split(segmap, &cover, t_tree.unwrap_or(f64::INFINITY));
    let impervious = BinaryMask::from_fn(*segmap.geometry(), |i| {
        classes[segmap.labels()[i] as usize] == SegmentClass::Impervious
    });
    let intensity = building_intensity_map(&impervious, intensity)?;
    let kinds = object_kinds(segmap, &classes, &intensity);
    let shadow = potential_shadow_mask(segmap.geometry(), &kinds, geom, ranges)?;
    segment_shadow_proportion(segmap, &shadow)?;
    Ok(ShadowAnalysis {
        classes,
        t_tree,
        intensity,
        shadow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: (f64, f64), b: (f64, f64)) -> bool {
        (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12
    }

    #[test]
    fn analytic_coefficients() {
        assert_eq!(ShadowGeometry::nadir(90.0, 123.0).coefficients().unwrap(), (0.0, 0.0));
        assert!(close(ShadowGeometry::nadir(45.0, 180.0).coefficients().unwrap(), (0.0, -1.0)));
        assert!(close(ShadowGeometry::nadir(45.0, 90.0).coefficients().unwrap(), (-1.0, 0.0)));
        assert!(ShadowGeometry::nadir(0.0, 0.0).coefficients().is_err());
    }

    fn grid() -> GridGeometry {
        GridGeometry::new(200, 200, 0.8, 0.0, 0.0).unwrap()
    }

    fn single(h: (f64, f64), geom: ShadowGeometry) -> BinaryMask {
        let g = grid();
        let mut kinds = vec![None; g.len()];
        kinds[g.index(100, 100)] = Some(ObjectKind::LowIntensityBuilding);
        let ranges = HeightRanges {
            low_intensity_building: HeightRange { min: h.0, max: h.1 },
            ..HeightRanges::default()
        };
        potential_shadow_mask(&g, &kinds, &geom, &ranges).unwrap()
    }

    #[test]
    fn single_height_mark() {
        let m = single((3.0, 3.0), ShadowGeometry::nadir(45.0, 180.0));
        assert_eq!(m.count_ones(), 1);
        assert!(m.at(96, 100));
    }

    #[test]
    fn swept_heights_have_no_gaps() {
        let m = single((3.0, 6.0), ShadowGeometry::nadir(45.0, 180.0));
        let rows: Vec<usize> = (0..200).filter(|&r| m.at(r, 100)).collect();
        assert_eq!(rows, vec![93, 94, 95, 96]);
        assert_eq!(m.count_ones(), 4);
    }

    #[test]
    fn zenith_sun_returns_objects() {
        let g = grid();
        let kinds: Vec<_> = (0..g.len())
            .map(|i| (i % 7 == 0).then_some(ObjectKind::Tree))
            .collect();
        let m = potential_shadow_mask(&g, &kinds, &ShadowGeometry::nadir(90.0, 0.0), &HeightRanges::default()).unwrap();
        for (i, k) in kinds.iter().enumerate() {
            assert_eq!(m.get(i), k.is_some());
        }
    }

    #[test]
    fn oblique_ray_is_connected() {
        let geom = ShadowGeometry::nadir(30.0, 135.0);
        let m = single((3.0, 40.0), geom);
        // Every marked pixel except the farthest has an 8-neighbour farther out.
        let marked: Vec<(i64, i64)> = (0..200 * 200)
            .filter(|&i| m.get(i))
            .map(|i| ((i / 200) as i64, (i % 200) as i64))
            .collect();
        assert!(marked.len() > 10);
        for &(r, c) in &marked {
            let n = marked
                .iter()
                .filter(|&&(r2, c2)| (r2 - r).abs() <= 1 && (c2 - c).abs() <= 1 && (r2, c2) != (r, c))
                .count();
            assert!(n >= 1);
        }
    }

    #[test]
    fn larger_ranges_only_add() {
        let geom = ShadowGeometry::nadir(40.0, 200.0);
        let small = single((5.0, 10.0), geom);
        let big = single((3.0, 20.0), geom);
        for i in 0..small.bits().len() {
            assert!(!small.get(i) || big.get(i));
        }
    }

    #[test]
    fn intensity_map_extremes() {
        let g = GridGeometry::new(30, 20, 0.8, 0.0, 0.0).unwrap();
        let p = IntensityParams { window: 11, ..IntensityParams::default() };
        let all = building_intensity_map(&BinaryMask::from_fn(g, |_| true), &p).unwrap();
        assert_eq!(all.count_ones(), g.len());
        let none = building_intensity_map(&BinaryMask::zeros(g), &p).unwrap();
        assert_eq!(none.count_ones(), 0);
    }

    #[test]
    fn intensity_half_plane_transition() {
        // Impervious for columns < 150 in a 300-wide strip; the window is
        // clipped at the image edge, so count by hand.
        let g = GridGeometry::new(300, 5, 0.8, 0.0, 0.0).unwrap();
        let mask = BinaryMask::from_fn(g, |i| i % 300 < 150);
        let p = IntensityParams::default();
        let m = building_intensity_map(&mask, &p).unwrap();
        for c in 0..300usize {
            let (lo, hi) = (c.saturating_sub(50), (c + 50).min(299));
            let ones = (lo..=hi).filter(|&x| x < 150).count();
            let want = ones as f64 / (hi - lo + 1) as f64 > 0.30;
            assert_eq!(m.at(2, c), want, "column {c}");
        }
    }

    fn segmap_with(records: usize) -> SegmentMap {
        let g = GridGeometry::new(records, 1, 0.8, 0.0, 0.0).unwrap();
        SegmentMap::from_clusters(g, &(0..records as u32).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn majority_votes() {
        let mut m = segmap_with(3);
        m.records[0].class_votes = [10, 0, 0, 2];
        m.records[1].class_votes = [5, 5, 0, 0];
        m.records[2].class_votes = [0, 0, 0, 7];
        let c = classify_segments_majority(&m).unwrap();
        assert_eq!(c, vec![LandCover::Vegetation, LandCover::Vegetation, LandCover::Water]);
        m.records[2].class_votes = [0; 4];
        assert!(classify_segments_majority(&m).is_err());
    }

    #[test]
    fn tree_split_is_strict_and_gated() {
        let mut m = segmap_with(3);
        m.records[0].mp_std = 0.2;
        m.records[1].mp_std = 0.2 + 1e-9;
        m.records[2].mp_std = 99.0;
        let cover = [LandCover::Vegetation, LandCover::Vegetation, LandCover::Impervious];
        let c = tree_grass_split(&m, &cover, 0.2);
        assert_eq!(c, vec![SegmentClass::Grass, SegmentClass::Tree, SegmentClass::Impervious]);
    }

    #[test]
    fn shadow_proportion_counts() {
        let g = GridGeometry::new(10, 10, 0.8, 0.0, 0.0).unwrap();
        let mut m = SegmentMap::from_clusters(g, &vec![0; 100]).unwrap();
        let mask = BinaryMask::from_fn(g, |i| i < 40);
        segment_shadow_proportion(&mut m, &mask).unwrap();
        assert_eq!(m.records[0].p_shadow, 0.4);
        segment_shadow_proportion(&mut m, &BinaryMask::from_fn(g, |_| true)).unwrap();
        assert_eq!(m.records[0].p_shadow, 1.0);
    }
}
