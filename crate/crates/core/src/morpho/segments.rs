use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::landcover::LandCover;
use crate::raster::{GridGeometry, RasterGrid};

use super::kmeans::{kmeans, Features};

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub id: u32,
    /// K-Means cluster the segment was cut from.
    pub cluster: u32,
    pub pixel_count: u64,
    pub area_m2: f64,
    /// Pixel edges shared with another segment or the image border.
    pub perimeter_px: u64,
    /// Hydraulic diameter 4·area/perimeter, meters.
    pub w: f64,
    pub p_pan: f64,
    pub p_ms: f64,
    pub p_lan: f64,
    pub p_shadow: f64,
    /// Pixel counts of the MS argmax class, indexed by [`LandCover::index`].
    pub class_votes: [u64; 4],
    pub mp_std: f64,
}

impl SegmentRecord {
    /// Class with the most votes; ties go to the earlier class.
    pub fn majority_class(&self) -> Option<LandCover> {
        let mut best: Option<(usize, u64)> = None;
        for (i, &v) in self.class_votes.iter().enumerate() {
            if v > 0 && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.and_then(|(i, _)| LandCover::from_index(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMap {
    geometry: GridGeometry,
    labels: Vec<u32>,
    pub records: Vec<SegmentRecord>,
}

impl SegmentMap {
    /// Splits a per-pixel cluster map into 4-connected segments. Ids follow
    /// the raster-scan order of each segment's first pixel.
    pub fn from_clusters(geometry: GridGeometry, clusters: &[u32]) -> Result<Self> {
        if clusters.len() != geometry.len() {
            return Err(Error::GridMismatch(format!(
                "cluster map holds {} pixels, grid has {}",
                clusters.len(),
                geometry.len()
            )));
        }
        let (w, h) = (geometry.width, geometry.height);
        let mut labels = vec![u32::MAX; clusters.len()];
        let mut cluster_of = Vec::new();
        let mut stack = Vec::new();
        for start in 0..labels.len() {
            if labels[start] != u32::MAX {
                continue;
            }
            let id = cluster_of.len() as u32;
            let c = clusters[start];
            cluster_of.push(c);
            labels[start] = id;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (r, col) = (i / w, i % w);
                let mut visit = |j: usize| {
                    if labels[j] == u32::MAX && clusters[j] == c {
                        labels[j] = id;
                        stack.push(j);
                    }
                };
                if col > 0 {
                    visit(i - 1);
                }
                if col + 1 < w {
                    visit(i + 1);
                }
                if r > 0 {
                    visit(i - w);
                }
                if r + 1 < h {
                    visit(i + w);
                }
            }
        }
        Self::from_labels_with_clusters(geometry, labels, &cluster_of)
    }

    /// Wraps an existing label image (ids `0..S`, each id used). Connectivity
    /// is the caller's responsibility.
    pub fn from_labels(geometry: GridGeometry, labels: Vec<u32>) -> Result<Self> {
        let s = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        let clusters: Vec<u32> = (0..s as u32).collect();
        Self::from_labels_with_clusters(geometry, labels, &clusters)
    }

    fn from_labels_with_clusters(geometry: GridGeometry, labels: Vec<u32>, cluster_of: &[u32]) -> Result<Self> {
        if labels.len() != geometry.len() {
            return Err(Error::GridMismatch("label image does not match grid".into()));
        }
        let s = cluster_of.len();
        let mut count = vec![0u64; s];
        let mut perim = vec![0u64; s];
        let (w, h) = (geometry.width, geometry.height);
        for (i, &l) in labels.iter().enumerate() {
            let l = l as usize;
            if l >= s {
                return Err(Error::InvalidInput(format!("segment id {l} out of range")));
            }
            count[l] += 1;
            let (r, c) = (i / w, i % w);
            let differs = |j: usize| labels[j] as usize != l;
            perim[l] += (c == 0 || differs(i - 1)) as u64
                + (c + 1 == w || differs(i + 1)) as u64
                + (r == 0 || differs(i - w)) as u64
                + (r + 1 == h || differs(i + w)) as u64;
        }
        if let Some(empty) = count.iter().position(|&c| c == 0) {
            return Err(Error::InvalidInput(format!("segment id {empty} has no pixels")));
        }
        let r = geometry.pixel_size;
        let records = (0..s)
            .map(|id| {
                let area = count[id] as f64 * r * r;
                SegmentRecord {
                    id: id as u32,
                    cluster: cluster_of[id],
                    pixel_count: count[id],
                    area_m2: area,
                    perimeter_px: perim[id],
                    w: 4.0 * area / (perim[id] as f64 * r),
                    p_pan: 0.0,
                    p_ms: 0.0,
                    p_lan: 0.0,
                    p_shadow: 0.0,
                    class_votes: [0; 4],
                    mp_std: 0.0,
                }
            })
            .collect();
        Ok(SegmentMap {
            geometry,
            labels,
            records,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn label_at(&self, index: usize) -> u32 {
        self.labels[index]
    }

    /// Pixel indices of every segment, in raster order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m: Vec<Vec<usize>> = self
            .records
            .iter()
            .map(|r| Vec::with_capacity(r.pixel_count as usize))
            .collect();
        for (i, &l) in self.labels.iter().enumerate() {
            m[l as usize].push(i);
        }
        m
    }

    /// Paints one value per segment onto the grid.
    pub fn broadcast(&self, values: &[f64], band_name: &str) -> Result<RasterGrid> {
        if values.len() != self.records.len() {
            return Err(Error::InvalidInput("one value per segment required".into()));
        }
        let data = self.labels.iter().map(|&l| values[l as usize] as f32).collect();
        RasterGrid::single_band(self.geometry, band_name, data)
    }

    pub fn label_raster(&self) -> RasterGrid {
        let data = self.labels.iter().map(|&l| l as f32).collect();
        RasterGrid::single_band(self.geometry, "segment", data).expect("label raster is valid")
    }

    /// Reads a label raster written by [`Self::label_raster`]; statistics
    /// other than the geometric ones start at zero.
    pub fn from_label_raster(raster: &RasterGrid) -> Result<Self> {
        raster.require_single_band("segment labels")?;
        let labels = raster
            .band(0)
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f32 {
                    Ok(v as u32)
                } else {
                    Err(Error::InvalidInput(format!("bad segment label {v}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_labels(*raster.geometry(), labels)
    }

    /// Segment table, one line per segment.
    pub fn table(&self) -> String {
        let mut s = String::from("# id, pixel_count, w, p_pan, p_ms, p_lan, p_shadow, majority_class\n");
        for r in &self.records {
            let class = r.majority_class().map_or("none", LandCover::name);
            let _ = writeln!(
                s,
                "{}, {}, {:.6}, {:.6}, {:.6}, {:.6}, {:.6}, {}",
                r.id, r.pixel_count, r.w, r.p_pan, r.p_ms, r.p_lan, r.p_shadow, class
            );
        }
        s
    }

    pub fn write_table(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.table()).map_err(|e| Error::io(path, e))
    }

    /// Restores the probability columns from a table produced by
    /// [`Self::table`] onto a map with the same segments.
    pub fn load_table(&mut self, text: &str, origin: &str) -> Result<()> {
        let mut seen = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let loc = || format!("{origin}:{}", lineno + 1);
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 8 {
                return Err(Error::parse(loc(), "expected 8 fields"));
            }
            let num = |k: usize| {
                f[k].parse::<f64>()
                    .map_err(|_| Error::parse(loc(), format!("bad number `{}`", f[k])))
            };
            let id = f[0]
                .parse::<usize>()
                .map_err(|_| Error::parse(loc(), "bad id"))?;
            let rec = self
                .records
                .get_mut(id)
                .ok_or_else(|| Error::parse(loc(), format!("unknown segment {id}")))?;
            if f[1].parse::<u64>().ok() != Some(rec.pixel_count) {
                return Err(Error::parse(loc(), "pixel count disagrees with label raster"));
            }
            rec.p_pan = num(3)?;
            rec.p_ms = num(4)?;
            rec.p_lan = num(5)?;
            rec.p_shadow = num(6)?;
            seen += 1;
        }
        if seen != self.records.len() {
            return Err(Error::parse(origin, "table does not cover every segment"));
        }
        Ok(())
    }
}

/// Clusters (PAN, profiles) feature vectors and cuts the clusters into
/// 4-connected segments.
pub fn kmeans_segment(pan: &RasterGrid, mps: &RasterGrid, k: usize, seed: u64) -> Result<SegmentMap> {
    pan.require_single_band("PAN")?;
    pan.geometry().ensure_same(mps.geometry(), "morphological profiles")?;
    let mut columns: Vec<&[f32]> = vec![pan.band(0)];
    columns.extend((0..mps.band_count()).map(|b| mps.band(b)));
    let features = Features::standardized(&columns)?;
    let result = kmeans(&features, k, seed)?;
    SegmentMap::from_clusters(*pan.geometry(), &result.labels)
}

/// Fraction of the segment's pixels with PAN value strictly below `t_pan`.
pub fn pan_water_probability(segmap: &SegmentMap, segment: u32, pan: &RasterGrid, t_pan: f64) -> Result<f64> {
    segmap.geometry().ensure_same(pan.geometry(), "PAN")?;
    let (mut n, mut below) = (0u64, 0u64);
    for (l, &v) in segmap.labels().iter().zip(pan.band(0)) {
        if *l == segment {
            n += 1;
            below += ((v as f64) < t_pan) as u64;
        }
    }
    if n == 0 {
        return Err(Error::InvalidInput(format!("segment {segment} is empty")));
    }
    Ok(below as f64 / n as f64)
}

/// Per-pixel population standard deviation across bands.
fn band_std(mps: &RasterGrid, i: usize) -> f64 {
    let k = mps.band_count() as f64;
    let mean = (0..mps.band_count()).map(|b| mps.band(b)[i] as f64).sum::<f64>() / k;
    let var = (0..mps.band_count())
        .map(|b| (mps.band(b)[i] as f64 - mean).powi(2))
        .sum::<f64>()
        / k;
    var.sqrt()
}

/// Inputs of [`segment_stats`], all on the segment grid.
pub struct SegmentInputs<'a> {
    pub pan: &'a RasterGrid,
    pub mps: &'a RasterGrid,
    pub p_ms: &'a RasterGrid,
    pub p_lan: &'a RasterGrid,
    pub ms_class_map: &'a RasterGrid,
    pub t_pan: f64,
}

/// Fills every record field except `p_shadow`. Probability means skip
/// nodata pixels; a segment with no valid pixel gets 0.
pub fn segment_stats(segmap: &mut SegmentMap, inputs: &SegmentInputs<'_>) -> Result<()> {
    let g = segmap.geometry;
    for (what, r) in [
        ("PAN", inputs.pan),
        ("profiles", inputs.mps),
        ("MS probability", inputs.p_ms),
        ("Landsat probability", inputs.p_lan),
        ("MS class map", inputs.ms_class_map),
    ] {
        g.ensure_same(r.geometry(), what)?;
    }
    let s = segmap.records.len();
    let mut below = vec![0u64; s];
    let mut ms = vec![(0f64, 0u64); s];
    let mut lan = vec![(0f64, 0u64); s];
    let mut votes = vec![[0u64; 4]; s];
    let mut std_sum = vec![0f64; s];
    let (pan, pms, plan, cls) = (
        inputs.pan.band(0),
        inputs.p_ms.band(0),
        inputs.p_lan.band(0),
        inputs.ms_class_map.band(0),
    );
    for (i, &l) in segmap.labels.iter().enumerate() {
        let l = l as usize;
        below[l] += ((pan[i] as f64) < inputs.t_pan) as u64;
        if inputs.p_ms.pixel_valid(i) {
            ms[l].0 += pms[i] as f64;
            ms[l].1 += 1;
        }
        if inputs.p_lan.pixel_valid(i) {
            lan[l].0 += plan[i] as f64;
            lan[l].1 += 1;
        }
        if let Some(c) = LandCover::from_code(cls[i]) {
            votes[l][c.index()] += 1;
        }
        std_sum[l] += band_std(inputs.mps, i);
    }
    let mean = |(sum, n): (f64, u64)| if n > 0 { (sum / n as f64).clamp(0.0, 1.0) } else { 0.0 };
    for (id, rec) in segmap.records.iter_mut().enumerate() {
        let n = rec.pixel_count as f64;
        rec.p_pan = below[id] as f64 / n;
        rec.p_ms = mean(ms[id]);
        rec.p_lan = mean(lan[id]);
        rec.class_votes = votes[id];
        rec.mp_std = std_sum[id] / n;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize) -> GridGeometry {
        GridGeometry::new(w, h, 0.8, 0.0, 0.0).unwrap()
    }

    #[test]
    fn disjoint_regions_split() {
        // Cluster 1 appears on both sides of a cluster-0 column.
        let clusters = vec![1, 0, 1, 1, 0, 1];
        let m = SegmentMap::from_clusters(grid(3, 2), &clusters).unwrap();
        assert_eq!(m.labels(), &[0, 1, 2, 0, 1, 2]);
        assert_eq!(m.records[0].cluster, m.records[2].cluster);
        assert_eq!(m.records.iter().map(|r| r.pixel_count).sum::<u64>(), 6);
    }

    #[test]
    fn ribbon_hydraulic_diameter() {
        // 3 × 100 ribbon inside a 5 × 102 image.
        let (w, h) = (102, 5);
        let clusters: Vec<u32> = (0..w * h)
            .map(|i| {
                let (r, c) = (i / w, i % w);
                ((1..4).contains(&r) && (1..101).contains(&c)) as u32
            })
            .collect();
        let m = SegmentMap::from_clusters(grid(w, h), &clusters).unwrap();
        let rib = m.records.iter().find(|r| r.cluster == 1).unwrap();
        assert_eq!(rib.pixel_count, 300);
        assert_eq!(rib.perimeter_px, 206);
        let want = 4.0 * (300.0 * 0.64) / (206.0 * 0.8);
        assert!((rib.w - want).abs() < 1e-12);
        assert!((rib.w - 4.66).abs() < 0.01);
    }

    #[test]
    fn square_hydraulic_diameter() {
        let m = SegmentMap::from_clusters(grid(40, 40), &vec![0; 1600]).unwrap();
        assert_eq!(m.records[0].perimeter_px, 160);
        assert!((m.records[0].w - 32.0).abs() < 1e-12);
    }

    #[test]
    fn pan_probability_counts() {
        let g = grid(10, 10);
        let m = SegmentMap::from_clusters(g, &vec![0; 100]).unwrap();
        let data: Vec<f32> = (0..100).map(|i| if i < 80 { 0.05 } else { 0.3 }).collect();
        let pan = RasterGrid::single_band(g, "pan", data).unwrap();
        assert_eq!(pan_water_probability(&m, 0, &pan, 0.1).unwrap(), 0.8);
        assert_eq!(pan_water_probability(&m, 0, &pan, 1.0).unwrap(), 1.0);
        assert_eq!(pan_water_probability(&m, 0, &pan, 0.0).unwrap(), 0.0);
        assert!(pan_water_probability(&m, 1, &pan, 0.1).is_err());
    }

    #[test]
    fn majority_tie_breaks_by_class_order() {
        let mut r = SegmentMap::from_clusters(grid(1, 1), &[0]).unwrap().records.remove(0);
        r.class_votes = [5, 5, 0, 0];
        assert_eq!(r.majority_class(), Some(LandCover::Vegetation));
        r.class_votes = [10, 0, 0, 2];
        assert_eq!(r.majority_class(), Some(LandCover::Vegetation));
        r.class_votes = [0, 0, 0, 0];
        assert_eq!(r.majority_class(), None);
    }

    #[test]
    fn table_round_trip() {
        let mut m = SegmentMap::from_clusters(grid(3, 2), &[1, 0, 1, 1, 0, 1]).unwrap();
        m.records[1].p_ms = 0.25;
        m.records[2].p_shadow = 0.5;
        let mut back = SegmentMap::from_label_raster(&m.label_raster()).unwrap();
        back.load_table(&m.table(), "t").unwrap();
        assert_eq!(back.records[1].p_ms, 0.25);
        assert_eq!(back.records[2].p_shadow, 0.5);
    }
}
