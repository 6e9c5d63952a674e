//! Flat `key = value` pipeline configuration.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fusion::FusionParams;
use crate::landcover::LandCover;
use crate::postclass::PostClassParams;
use crate::shadow::{HeightRange, HeightRanges, IntensityParams};
use crate::spectral::{DEFAULT_SWIR_BANDS, DEFAULT_VISIBLE_BANDS};

/// Every recognised key.
pub const KEYS: [&str; 40] = [
    "out",
    "seed",
    "scene",
    "scene_seed",
    "pan",
    "ms",
    "landsat",
    "training",
    "truth",
    "sun_elevation_deg",
    "sun_azimuth_deg",
    "view_elevation_deg",
    "view_azimuth_deg",
    "visible_bands",
    "swir_bands",
    "kmeans_k",
    "t_pan",
    "t_tree",
    "sweep_step_m",
    "intensity_window",
    "intensity_ratio",
    "high_building_min_m",
    "high_building_max_m",
    "low_building_min_m",
    "low_building_max_m",
    "tree_min_m",
    "tree_max_m",
    "n1",
    "n2",
    "r_ms",
    "r_l",
    "decision_threshold",
    "shadow_relabel_threshold",
    "boundary_band_px",
    "unmix_window_px",
    "water_fraction_threshold",
    "samples_vegetation",
    "samples_soil",
    "samples_impervious",
    "samples_water",
];

/// Pipeline settings. `None` fields mean `auto`.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
    pub out: PathBuf,
    /// Seeds K-Means and validation sampling.
    pub seed: u64,
    /// Scene description for `synth`; `None` uses the bundled scene.
    pub scene: Option<PathBuf>,
    /// Overrides the scene file's seed.
    pub scene_seed: Option<u64>,
    pub pan: Option<PathBuf>,
    pub ms: Option<PathBuf>,
    pub landsat: Option<Vec<PathBuf>>,
    pub training: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub sun_elevation_deg: Option<f64>,
    pub sun_azimuth_deg: Option<f64>,
    pub view_elevation_deg: f64,
    pub view_azimuth_deg: f64,
    pub visible_bands: Vec<String>,
    pub swir_bands: Vec<String>,
    pub kmeans_k: usize,
    pub t_pan: Option<f64>,
    pub t_tree: Option<f64>,
    pub heights: HeightRanges,
    pub intensity: IntensityParams,
    pub fusion: FusionParams,
    pub postclass: PostClassParams,
    /// Validation points per class of the baseline class map.
    pub strata: [(LandCover, usize); 4],
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            base_dir: PathBuf::from("."),
            out: PathBuf::from("out"),
            seed: 42,
            scene: None,
            scene_seed: None,
            pan: None,
            ms: None,
            landsat: None,
            training: None,
            truth: None,
            sun_elevation_deg: None,
            sun_azimuth_deg: None,
            view_elevation_deg: 90.0,
            view_azimuth_deg: 0.0,
            visible_bands: DEFAULT_VISIBLE_BANDS.iter().map(|s| s.to_string()).collect(),
            swir_bands: DEFAULT_SWIR_BANDS.iter().map(|s| s.to_string()).collect(),
            kmeans_k: 8,
            t_pan: None,
            t_tree: None,
            heights: HeightRanges::default(),
            intensity: IntensityParams::default(),
            fusion: FusionParams::default(),
            postclass: PostClassParams::default(),
            strata: crate::eval::DEFAULT_STRATA,
        }
    }
}

fn auto(v: &str) -> bool {
    v.eq_ignore_ascii_case("auto")
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("{key} = {v:?}: {e}")))
}

fn opt<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if auto(v) {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

impl PipelineConfig {
    /// Reads a config file; relative paths resolve against its directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig {
            base_dir: base_dir.to_path_buf(),
            ..Default::default()
        };
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if seen.contains(&k) {
                return Err(Error::Config(format!("line {}: duplicate key {k}", n + 1)));
            }
            seen.push(k);
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let path = |v: &str| (!auto(v)).then(|| PathBuf::from(v));
        let range = |r: &mut HeightRange, max: bool| -> Result<()> {
            let x = num(key, v)?;
            if max {
                r.max = x;
            } else {
                r.min = x;
            }
            Ok(())
        };
        match key {
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = num(key, v)?,
            "scene" => self.scene = path(v),
            "scene_seed" => self.scene_seed = opt(key, v)?,
            "pan" => self.pan = path(v),
            "ms" => self.ms = path(v),
            "landsat" => self.landsat = (!auto(v)).then(|| list(v).into_iter().map(PathBuf::from).collect()),
            "training" => self.training = path(v),
            "truth" => self.truth = path(v),
            "sun_elevation_deg" => self.sun_elevation_deg = opt(key, v)?,
            "sun_azimuth_deg" => self.sun_azimuth_deg = opt(key, v)?,
            "view_elevation_deg" => self.view_elevation_deg = num(key, v)?,
            "view_azimuth_deg" => self.view_azimuth_deg = num(key, v)?,
            "visible_bands" => self.visible_bands = list(v),
            "swir_bands" => self.swir_bands = list(v),
            "kmeans_k" => self.kmeans_k = num(key, v)?,
            "t_pan" => self.t_pan = opt(key, v)?,
            "t_tree" => self.t_tree = opt(key, v)?,
            "sweep_step_m" => self.heights.sweep_step = opt(key, v)?,
            "intensity_window" => self.intensity.window = num(key, v)?,
            "intensity_ratio" => self.intensity.ratio_threshold = num(key, v)?,
            "high_building_min_m" => range(&mut self.heights.high_intensity_building, false)?,
            "high_building_max_m" => range(&mut self.heights.high_intensity_building, true)?,
            "low_building_min_m" => range(&mut self.heights.low_intensity_building, false)?,
            "low_building_max_m" => range(&mut self.heights.low_intensity_building, true)?,
            "tree_min_m" => range(&mut self.heights.tree, false)?,
            "tree_max_m" => range(&mut self.heights.tree, true)?,
            "n1" => self.fusion.n1 = num(key, v)?,
            "n2" => self.fusion.n2 = num(key, v)?,
            "r_ms" => self.fusion.r_ms = num(key, v)?,
            "r_l" => self.fusion.r_l = num(key, v)?,
            "decision_threshold" => self.fusion.decision_threshold = num(key, v)?,
            "shadow_relabel_threshold" => self.postclass.shadow_relabel_threshold = num(key, v)?,
            "boundary_band_px" => self.postclass.boundary_band_px = num(key, v)?,
            "unmix_window_px" => self.postclass.unmix_window_px = num(key, v)?,
            "water_fraction_threshold" => self.postclass.water_fraction_threshold = num(key, v)?,
            "samples_vegetation" => self.strata[0].1 = num(key, v)?,
            "samples_soil" => self.strata[1].1 = num(key, v)?,
            "samples_impervious" => self.strata[2].1 = num(key, v)?,
            "samples_water" => self.strata[3].1 = num(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.kmeans_k == 0 {
            return Err(Error::Config("kmeans_k must be at least 1".into()));
        }
        if self.visible_bands.is_empty() || self.swir_bands.is_empty() {
            return Err(Error::Config("band lists must not be empty".into()));
        }
        for (name, v) in [("t_pan", self.t_pan), ("t_tree", self.t_tree)] {
            if v.is_some_and(|x| !x.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        if let Some(e) = self.sun_elevation_deg {
            if !(e > 0.0 && e <= 90.0) {
                return Err(Error::Config(format!("sun_elevation_deg = {e} outside (0, 90]")));
            }
        }
        self.heights.validate()?;
        self.intensity.validate()?;
        self.fusion.validate()?;
        self.postclass.validate()?;
        Ok(())
    }

    pub fn with_out(mut self, out: impl Into<PathBuf>) -> Self {
        // Command-line paths are taken as given, not against the config dir.
        let out = out.into();
        self.out = if out.is_absolute() {
            out
        } else {
            std::env::current_dir().map(|d| d.join(&out)).unwrap_or(out)
        };
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out)
    }
}
