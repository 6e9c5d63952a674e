//! Deterministic synthetic scene generator.
//!
//! Features are rasterized on a 0.1 m supersample grid. Each sensor pixel is
//! the area-weighted mean of the material values in its footprint plus
//! Gaussian noise whose stream is keyed by (seed, sensor, date, band, pixel),
//! so output never depends on thread count.

mod shapes;
mod spec;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::landcover::LandCover;
use crate::par;
use crate::raster::{write_mask, write_raster, BinaryMask, GridGeometry, RasterGrid};
use crate::shadow::ShadowGeometry;
use crate::spectral::TrainingSamples;

pub use shapes::Shape;
pub use spec::{
    default_library, Feature, Material, SceneSpec, DARK_FILM_MATERIAL, LANDSAT_BANDS, LANDSAT_PIXEL, MS_BANDS,
    MS_PIXEL, PAN_PIXEL, SUPERSAMPLE, TREE_MATERIAL, WATER_MATERIAL,
};

/// Multiplier applied to every value of a shadowed supersample.
pub const SHADOW_FACTOR: f64 = 0.35;

const SHADOW_BIT: u16 = 0x8000;
const ENTRY_MASK: u16 = 0x7fff;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EntryKind {
    Ground,
    Water,
    River,
    DarkField,
    Object,
}

/// One painted feature (entry 0 is the background).
struct Entry {
    material: usize,
    /// Material substituted on Landsat dates flagged `true`.
    dry: Option<(usize, Vec<bool>)>,
    kind: EntryKind,
}

#[derive(Debug, Clone)]
pub struct LandsatScene {
    pub day_of_year: u32,
    pub raster: RasterGrid,
}

#[derive(Debug, Clone)]
pub struct SceneBundle {
    pub sun: ShadowGeometry,
    pub pan: RasterGrid,
    pub ms: RasterGrid,
    pub landsat: Vec<LandsatScene>,
    /// Supersample-majority water on the PAN grid.
    pub truth: BinaryMask,
    /// Supersample-majority land-cover code on the PAN grid.
    pub class_truth: RasterGrid,
    /// Supersample-majority cast shadow on the PAN grid.
    pub shadow_truth: BinaryMask,
    /// PAN pixels crossed by a river centerline.
    pub river_axis: BinaryMask,
    /// Supersample-majority dark-film cover on the PAN grid.
    pub dark_field: BinaryMask,
    /// Water area fraction per MS pixel.
    pub ms_water_fraction: RasterGrid,
    /// Noise-free fraction of dates on which the visible maximum exceeds the
    /// SWIR maximum, per Landsat pixel, evaluated in f64 from composition.
    pub landsat_index_truth: RasterGrid,
    pub training: TrainingSamples,
}

struct Canvas {
    width: usize,
    height: usize,
    codes: Vec<u16>,
}

impl Canvas {
    /// `(code, count)` pairs of the `factor x factor` block at sensor pixel `(row, col)`.
    fn composition(&self, factor: usize, row: usize, col: usize, out: &mut Vec<(u16, u32)>) {
        out.clear();
        for r in row * factor..(row + 1) * factor {
            let line = &self.codes[r * self.width + col * factor..r * self.width + (col + 1) * factor];
            for &code in line {
                match out.iter_mut().find(|(c, _)| *c == code) {
                    Some(slot) => slot.1 += 1,
                    None => out.push((code, 1)),
                }
            }
        }
        out.sort_unstable();
    }
}

fn cells(extent: f64, pixel: f64) -> usize {
    (extent / pixel).round() as usize
}

fn split_mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d4_9bb1_1331_11eb);
    z ^ (z >> 31)
}

/// Standard normal draw for one (stream, pixel) pair.
fn noise(key: u64, pixel: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(pixel as u64);
    rng.sample(StandardNormal)
}

fn stream_key(seed: u64, sensor: u64, date: u64, band: u64) -> u64 {
    split_mix(split_mix(split_mix(split_mix(seed) ^ sensor) ^ date) ^ band)
}

struct Scene<'a> {
    spec: &'a SceneSpec,
    entries: Vec<Entry>,
    canvas: Canvas,
}

impl Scene<'_> {
    fn material(&self, code: u16, date: Option<usize>) -> &Material {
        let e = &self.entries[(code & ENTRY_MASK) as usize];
        let idx = match (&e.dry, date) {
            (Some((dry, dates)), Some(d)) if dates[d] => *dry,
            _ => e.material,
        };
        &self.spec.materials[idx]
    }

    /// Mean value and sigma of a composition, with `value(material)` giving
    /// the unshadowed `(mean, sigma)`.
    fn mix(&self, comp: &[(u16, u32)], date: Option<usize>, value: impl Fn(&Material) -> (f64, f64)) -> (f64, f64) {
        let n: u32 = comp.iter().map(|c| c.1).sum();
        let (mut v, mut s) = (0.0, 0.0);
        for &(code, count) in comp {
            let (mut cv, mut cs) = value(self.material(code, date));
            if code & SHADOW_BIT != 0 {
                cv *= SHADOW_FACTOR;
                cs *= SHADOW_FACTOR;
            }
            let w = count as f64 / n as f64;
            v += w * cv;
            s += w * cs;
        }
        (v, s)
    }

    /// Renders `bands` sensor bands at `pixel` meters.
    fn render(
        &self,
        pixel: f64,
        sensor: u64,
        date: Option<usize>,
        names: &[&str],
        value: impl Fn(&Material, usize) -> (f64, f64) + Sync,
    ) -> Result<RasterGrid> {
        let geom = self.geometry(pixel)?;
        let factor = cells(pixel, SUPERSAMPLE);
        let npx = geom.len();
        let keys: Vec<u64> = (0..names.len())
            .map(|b| stream_key(self.spec.seed, sensor, date.map_or(0, |d| d as u64 + 1), b as u64))
            .collect();
        let scale = self.spec.noise_scale;
        let per_pixel: Vec<Vec<f32>> = par::map_range(npx, |i| {
            let mut comp = Vec::new();
            self.canvas.composition(factor, i / geom.width, i % geom.width, &mut comp);
            (0..names.len())
                .map(|b| {
                    let (v, s) = self.mix(&comp, date, |m| value(m, b));
                    let z = if scale > 0.0 && s > 0.0 { noise(keys[b], i) } else { 0.0 };
                    (v + scale * s * z) as f32
                })
                .collect()
        });
        let mut data = vec![0f32; npx * names.len()];
        for (i, px) in per_pixel.iter().enumerate() {
            for (b, &v) in px.iter().enumerate() {
                data[b * npx + i] = v;
            }
        }
        RasterGrid::new(geom, names.iter().map(|s| s.to_string()).collect(), data, None)
    }

    fn geometry(&self, pixel: f64) -> Result<GridGeometry> {
        GridGeometry::new(
            cells(self.spec.width_m, pixel),
            cells(self.spec.height_m, pixel),
            pixel,
            self.spec.origin_x,
            self.spec.origin_y,
        )
    }

    /// PAN-grid mask of pixels where more than half the supersamples satisfy `pred`.
    fn majority_mask(&self, pred: impl Fn(u16) -> bool + Sync) -> Result<BinaryMask> {
        let geom = self.geometry(PAN_PIXEL)?;
        let factor = cells(PAN_PIXEL, SUPERSAMPLE);
        let half = (factor * factor / 2) as u32;
        Ok(BinaryMask::from_fn(geom, |i| {
            let mut comp = Vec::new();
            self.canvas.composition(factor, i / geom.width, i % geom.width, &mut comp);
            comp.iter().filter(|(c, _)| pred(*c)).map(|c| c.1).sum::<u32>() > half
        }))
    }

    fn entry(&self, code: u16) -> &Entry {
        &self.entries[(code & ENTRY_MASK) as usize]
    }
}

fn build_entries(spec: &SceneSpec) -> Result<(Vec<Entry>, Vec<(Shape, u16)>, Vec<Shape>)> {
    let idx = |name: &str| spec.material(name).ok_or_else(|| Error::Config(format!("unknown material {name:?}")));
    let mut entries = vec![Entry {
        material: idx(&spec.background)?,
        dry: None,
        kind: EntryKind::Ground,
    }];
    let mut painted = Vec::new();
    let mut shadows = Vec::new();
    let (a, b) = spec.sun.coefficients()?;
    for f in &spec.features {
        let (material, dry, kind) = match f {
            Feature::Surface { material, .. } => (idx(material)?, None, EntryKind::Ground),
            Feature::Lake(_) => (idx(WATER_MATERIAL)?, None, EntryKind::Water),
            Feature::River { .. } => (idx(WATER_MATERIAL)?, None, EntryKind::River),
            Feature::DarkField(_) => (idx(DARK_FILM_MATERIAL)?, None, EntryKind::DarkField),
            Feature::Pond {
                dry_dates,
                dry_material,
                ..
            } => {
                let mut flags = vec![false; spec.dates.len()];
                for &d in dry_dates {
                    flags[d] = true;
                }
                (idx(WATER_MATERIAL)?, Some((idx(dry_material)?, flags)), EntryKind::Water)
            }
            Feature::Building { material, .. } => (idx(material)?, None, EntryKind::Object),
            Feature::Tree { .. } => (idx(TREE_MATERIAL)?, None, EntryKind::Object),
        };
        if entries.len() > ENTRY_MASK as usize {
            return Err(Error::Config(format!("scene has more than {ENTRY_MASK} features")));
        }
        let shape = f.shape();
        if let Some(h) = f.height() {
            // Map y runs north while the row offset b runs south.
            shadows.push(shape.swept(a * h, -b * h));
        }
        painted.push((shape, entries.len() as u16));
        entries.push(Entry { material, dry, kind });
    }
    Ok((entries, painted, shadows))
}

fn rasterize(spec: &SceneSpec, entries: &[Entry], painted: &[(Shape, u16)], shadows: &[Shape]) -> Canvas {
    let width = cells(spec.width_m, SUPERSAMPLE);
    let height = cells(spec.height_m, SUPERSAMPLE);
    let span = |lo: f64, hi: f64, n: usize| -> (usize, usize) {
        let a = ((lo / SUPERSAMPLE).floor().max(0.0) as usize).min(n);
        let b = ((hi / SUPERSAMPLE).ceil().max(0.0) as usize).min(n);
        (a, b)
    };
    let boxes: Vec<_> = painted.iter().map(|(s, _)| s.bbox()).collect();
    let shadow_boxes: Vec<_> = shadows.iter().map(|s| s.bbox()).collect();
    let mut codes = vec![0u16; width * height];
    par::for_each_row(&mut codes, width, |row, line| {
        let y = spec.height_m - (row as f64 + 0.5) * SUPERSAMPLE;
        for ((shape, code), bb) in painted.iter().zip(&boxes) {
            if y < bb.1 || y > bb.3 {
                continue;
            }
            let (c0, c1) = span(bb.0, bb.2, width);
            for (col, v) in line.iter_mut().enumerate().take(c1).skip(c0) {
                if shape.contains((col as f64 + 0.5) * SUPERSAMPLE, y) {
                    *v = *code;
                }
            }
        }
        for (shape, bb) in shadows.iter().zip(&shadow_boxes) {
            if y < bb.1 || y > bb.3 {
                continue;
            }
            let (c0, c1) = span(bb.0, bb.2, width);
            for (col, v) in line.iter_mut().enumerate().take(c1).skip(c0) {
                if entries[(*v & ENTRY_MASK) as usize].kind != EntryKind::Object
                    && shape.contains((col as f64 + 0.5) * SUPERSAMPLE, y)
                {
                    *v |= SHADOW_BIT;
                }
            }
        }
    });
    Canvas { width, height, codes }
}

/// Renders every sensor and truth layer of `spec`.
pub fn generate_scene(spec: &SceneSpec) -> Result<SceneBundle> {
    spec.validate()?;
    let (entries, painted, shadows) = build_entries(spec)?;
    let canvas = rasterize(spec, &entries, &painted, &shadows);
    debug_assert_eq!(canvas.codes.len(), canvas.width * canvas.height);
    let scene = Scene { spec, entries, canvas };

    let pan = scene.render(PAN_PIXEL, 0, None, &["pan"], |m, _| (m.pan, m.pan_sigma))?;
    let ms = scene.render(MS_PIXEL, 1, None, &MS_BANDS, |m, b| (m.ms[b], m.ms_sigma))?;
    let landsat = spec
        .dates
        .iter()
        .enumerate()
        .map(|(d, &doy)| {
            let raster = scene.render(LANDSAT_PIXEL, 2, Some(d), &LANDSAT_BANDS, |m, b| {
                (m.landsat[b], m.landsat_sigma)
            })?;
            Ok(LandsatScene { day_of_year: doy, raster })
        })
        .collect::<Result<Vec<_>>>()?;

    let is_water = |c: u16| scene.material(c, None).class == LandCover::Water;
    let truth = scene.majority_mask(is_water)?;
    let shadow_truth = scene.majority_mask(|c| c & SHADOW_BIT != 0)?;
    let dark_field = scene.majority_mask(|c| scene.entry(c).kind == EntryKind::DarkField)?;
    let class_truth = class_majority(&scene)?;
    let river_axis = river_axis_mask(&scene)?;
    let ms_water_fraction = fraction(&scene, MS_PIXEL, "water_fraction", is_water)?;
    let landsat_index_truth = landsat_index(&scene)?;
    let training = training_samples(&scene, &ms)?;

    Ok(SceneBundle {
        sun: spec.sun,
        pan,
        ms,
        landsat,
        truth,
        class_truth,
        shadow_truth,
        river_axis,
        dark_field,
        ms_water_fraction,
        landsat_index_truth,
        training,
    })
}

fn class_majority(scene: &Scene) -> Result<RasterGrid> {
    let geom = scene.geometry(PAN_PIXEL)?;
    let factor = cells(PAN_PIXEL, SUPERSAMPLE);
    let mut data = vec![0f32; geom.len()];
    par::fill_indexed(&mut data, |i| {
        let mut comp = Vec::new();
        scene.canvas.composition(factor, i / geom.width, i % geom.width, &mut comp);
        let mut votes = [0u32; 4];
        for &(c, n) in &comp {
            votes[scene.material(c, None).class.index()] += n;
        }
        // First maximum wins ties.
        let best = (0..4).fold(0, |b, k| if votes[k] > votes[b] { k } else { b });
        best as f32
    });
    RasterGrid::single_band(geom, "class", data)
}

fn fraction(scene: &Scene, pixel: f64, name: &str, pred: impl Fn(u16) -> bool + Sync) -> Result<RasterGrid> {
    let geom = scene.geometry(pixel)?;
    let factor = cells(pixel, SUPERSAMPLE);
    let total = (factor * factor) as f64;
    let mut data = vec![0f32; geom.len()];
    par::fill_indexed(&mut data, |i| {
        let mut comp = Vec::new();
        scene.canvas.composition(factor, i / geom.width, i % geom.width, &mut comp);
        let n: u32 = comp.iter().filter(|(c, _)| pred(*c)).map(|c| c.1).sum();
        (n as f64 / total) as f32
    });
    RasterGrid::single_band(geom, name, data)
}

fn river_axis_mask(scene: &Scene) -> Result<BinaryMask> {
    let geom = scene.geometry(PAN_PIXEL)?;
    let mut mask = BinaryMask::zeros(geom);
    let (ox, top) = (scene.spec.origin_x, scene.spec.origin_y - scene.spec.height_m);
    for f in &scene.spec.features {
        let Feature::River { points, .. } = f else { continue };
        for seg in points.windows(2) {
            let (p, q) = (seg[0], seg[1]);
            let len = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
            let steps = (len / 0.05).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                let (x, y) = (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1));
                if let Some((r, c)) = geom.pixel_at(ox + x, top + y) {
                    mask.set(geom.index(r, c), true);
                }
            }
        }
    }
    Ok(mask)
}

fn landsat_index(scene: &Scene) -> Result<RasterGrid> {
    let geom = scene.geometry(LANDSAT_PIXEL)?;
    let factor = cells(LANDSAT_PIXEL, SUPERSAMPLE);
    let dates = scene.spec.dates.len();
    let mut data = vec![0f32; geom.len()];
    par::fill_indexed(&mut data, |i| {
        let mut comp = Vec::new();
        scene.canvas.composition(factor, i / geom.width, i % geom.width, &mut comp);
        let k = (0..dates)
            .filter(|&d| {
                let band = |b: usize| scene.mix(&comp, Some(d), |m| (m.landsat[b], 0.0)).0;
                let vis = band(1).max(band(2)).max(band(3));
                let swir = band(5).max(band(6));
                vis > swir
            })
            .count();
        k as f32 / dates as f32
    });
    RasterGrid::single_band(geom, "p_lan", data)
}

fn training_samples(scene: &Scene, ms: &RasterGrid) -> Result<TrainingSamples> {
    let geom = *ms.geometry();
    let factor = cells(MS_PIXEL, SUPERSAMPLE);
    let pure: Vec<Option<LandCover>> = par::map_range(geom.len(), |i| {
        let mut comp = Vec::new();
        scene.canvas.composition(factor, i / geom.width, i % geom.width, &mut comp);
        match comp.as_slice() {
            [(code, _)] if code & SHADOW_BIT == 0 => {
                let m = scene.material(*code, None);
                m.train.then_some(m.class)
            }
            _ => None,
        }
    });
    let mut rng = ChaCha8Rng::seed_from_u64(stream_key(scene.spec.seed, 3, 0, 0));
    let mut samples = TrainingSamples::default();
    for class in LandCover::ALL {
        let mut idx: Vec<usize> = (0..pure.len()).filter(|&i| pure[i] == Some(class)).collect();
        let take = scene.spec.training_per_class.min(idx.len());
        let (chosen, _) = idx.partial_shuffle(&mut rng, take);
        let mut chosen = chosen.to_vec();
        chosen.sort_unstable();
        let mut spectrum = vec![0.0; MS_BANDS.len()];
        for i in chosen {
            ms.spectrum_into(i, &mut spectrum);
            samples.push(class, spectrum.clone());
        }
    }
    Ok(samples)
}

/// File names used by [`write_bundle`], relative to the bundle directory.
pub mod files {
    pub const PAN: &str = "pan";
    pub const MS: &str = "ms";
    pub const TRUTH: &str = "truth";
    pub const CLASS_TRUTH: &str = "class_truth";
    pub const SHADOW_TRUTH: &str = "shadow_truth";
    pub const RIVER_AXIS: &str = "river_axis";
    pub const DARK_FIELD: &str = "dark_field";
    pub const MS_WATER_FRACTION: &str = "ms_water_fraction";
    pub const LANDSAT_INDEX_TRUTH: &str = "landsat_index_truth";
    pub const TRAINING: &str = "training.txt";
    pub const MANIFEST: &str = "scene.conf";

    pub fn landsat(day_of_year: u32) -> String {
        format!("landsat_{day_of_year:03}")
    }
}

/// Writes every layer of `bundle` under `dir`, plus a `key = value` manifest
/// listing sun geometry and the Landsat stems.
pub fn write_bundle(bundle: &SceneBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_raster(&bundle.pan, dir.join(files::PAN))?;
    write_raster(&bundle.ms, dir.join(files::MS))?;
    let mut stems = Vec::new();
    for l in &bundle.landsat {
        let stem = files::landsat(l.day_of_year);
        write_raster(&l.raster, dir.join(&stem))?;
        stems.push(stem);
    }
    write_mask(&bundle.truth, "water", dir.join(files::TRUTH))?;
    write_raster(&bundle.class_truth, dir.join(files::CLASS_TRUTH))?;
    write_mask(&bundle.shadow_truth, "shadow", dir.join(files::SHADOW_TRUTH))?;
    write_mask(&bundle.river_axis, "river_axis", dir.join(files::RIVER_AXIS))?;
    write_mask(&bundle.dark_field, "dark_field", dir.join(files::DARK_FIELD))?;
    write_raster(&bundle.ms_water_fraction, dir.join(files::MS_WATER_FRACTION))?;
    write_raster(&bundle.landsat_index_truth, dir.join(files::LANDSAT_INDEX_TRUTH))?;
    bundle.training.write(dir.join(files::TRAINING))?;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "sun_elevation = {}", bundle.sun.sun_elevation_deg);
    let _ = writeln!(manifest, "sun_azimuth = {}", bundle.sun.sun_azimuth_deg);
    let _ = writeln!(manifest, "landsat = {}", stems.join(","));
    let path = dir.join(files::MANIFEST);
    std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}
