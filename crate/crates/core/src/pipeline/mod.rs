//! Subcommand implementations. Every step reads and writes named artifacts
//! in the output directory, so `run-all` is the plain composition of the
//! individual steps.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use config::{PipelineConfig, KEYS};

use crate::error::{Error, Result};
use crate::eval::{evaluate_at, format_report, stratified_sample, ConfusionMatrix, SamplePoint};
use crate::fusion::fuse_all_segments;
use crate::landcover::LandCover;
use crate::morpho::{kmeans_segment, morphological_profiles, segment_stats, SegmentInputs, SegmentMap};
use crate::postclass::{boundary_unmix, relabel_shadow_segments};
use crate::raster::{read_mask, read_raster, resample_nearest, write_mask, write_raster, BinaryMask, RasterGrid};
use crate::shadow::{analyse_shadows, ShadowGeometry};
use crate::spectral::{
    classify_probabilities, fit_classifier, landsat_water_index, otsu_threshold, pca_fuse, ClassifierModel,
    TrainingSamples,
};
use crate::synth::{files, generate_scene, write_bundle, SceneSpec};

/// Artifact names inside the output directory. Rasters are stems.
pub mod artifacts {
    pub const SCENE_DIR: &str = "scene";
    pub const MODEL: &str = "model.json";
    pub const MS_PROBABILITY: &str = "ms_probability";
    pub const MS_CLASS: &str = "ms_class";
    pub const P_LAN: &str = "p_lan";
    pub const LANDSAT_WATER: &str = "landsat_water";
    pub const PCA_FUSED: &str = "pca_fused";
    pub const PCA_CLASS: &str = "pca_class";
    pub const PCA_WATER: &str = "pca_water";
    pub const PROFILES: &str = "profiles";
    pub const SEGMENTS: &str = "segments";
    pub const SEGMENT_TABLE: &str = "segments.txt";
    pub const THRESHOLDS: &str = "thresholds.txt";
    pub const SHADOW: &str = "shadow";
    pub const SEGMENT_CLASSES: &str = "segment_classes";
    pub const SHADOW_TABLE: &str = "segments_shadow.txt";
    pub const P_WATER: &str = "p_water";
    pub const PGM_WATER: &str = "pgm_water";
    pub const PAN_WATER: &str = "pan_threshold_water";
    pub const MS_WATER: &str = "ms_only_water";
    pub const RELABELLED_WATER: &str = "relabelled_water";
    pub const POSTCLASS_WATER: &str = "postclass_water";
    pub const SAMPLES: &str = "samples.txt";
    pub const REPORT: &str = "report.txt";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Synth,
    Train,
    ClassifyMs,
    WaterIndex,
    PcaFuse,
    Segment,
    Shadow,
    Fuse,
    PostClass,
    Evaluate,
    RunAll,
}

impl Step {
    pub const ALL: [Step; 11] = [
        Step::Synth,
        Step::Train,
        Step::ClassifyMs,
        Step::WaterIndex,
        Step::PcaFuse,
        Step::Segment,
        Step::Shadow,
        Step::Fuse,
        Step::PostClass,
        Step::Evaluate,
        Step::RunAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Step::Synth => "synth",
            Step::Train => "train",
            Step::ClassifyMs => "classify-ms",
            Step::WaterIndex => "water-index",
            Step::PcaFuse => "pca-fuse",
            Step::Segment => "segment",
            Step::Shadow => "shadow",
            Step::Fuse => "fuse",
            Step::PostClass => "postclass",
            Step::Evaluate => "evaluate",
            Step::RunAll => "run-all",
        }
    }
}

impl FromStr for Step {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Step::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand {s:?}")))
    }
}

/// Steps `run-all` executes, in order.
pub const RUN_ALL_ORDER: [Step; 10] = [
    Step::Synth,
    Step::Train,
    Step::ClassifyMs,
    Step::WaterIndex,
    Step::PcaFuse,
    Step::Segment,
    Step::Shadow,
    Step::Fuse,
    Step::PostClass,
    Step::Evaluate,
];

pub fn run(step: Step, cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    let p = Pipeline::new(cfg)?;
    match step {
        Step::Synth => p.synth(),
        Step::Train => p.train(),
        Step::ClassifyMs => p.classify_ms(),
        Step::WaterIndex => p.water_index(),
        Step::PcaFuse => p.pca_fuse(),
        Step::Segment => p.segment(),
        Step::Shadow => p.shadow(),
        Step::Fuse => p.fuse(),
        Step::PostClass => p.postclass(),
        Step::Evaluate => p.evaluate().map(|_| ()),
        Step::RunAll => {
            for s in RUN_ALL_ORDER {
                run(s, cfg)?;
            }
            Ok(())
        }
    }
}

/// One evaluated map of the report.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub title: &'static str,
    pub artifact: &'static str,
    pub matrix: ConfusionMatrix,
}

/// Maps compared by `evaluate`, in report order.
pub const METHODS: [(&str, &str); 6] = [
    ("PCA + classifier", artifacts::PCA_WATER),
    ("PAN threshold", artifacts::PAN_WATER),
    ("MS only", artifacts::MS_WATER),
    ("Landsat index", artifacts::LANDSAT_WATER),
    ("PGM", artifacts::PGM_WATER),
    ("PGM + post-classification", artifacts::POSTCLASS_WATER),
];

struct Pipeline<'a> {
    cfg: &'a PipelineConfig,
    out: PathBuf,
}

fn require(path: &Path) -> Result<()> {
    let mut hdr = path.as_os_str().to_owned();
    let is_raster = path.extension().is_none();
    if is_raster {
        hdr.push(".hdr");
    }
    let probe = PathBuf::from(hdr);
    if probe.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(probe))
    }
}

fn load(path: &Path) -> Result<RasterGrid> {
    require(path)?;
    read_raster(path)
}

fn load_mask(path: &Path) -> Result<BinaryMask> {
    require(path)?;
    read_mask(path)
}

fn load_text(path: &Path) -> Result<String> {
    require(path)?;
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn strip_raster_ext(p: PathBuf) -> PathBuf {
    match p.extension().and_then(|e| e.to_str()) {
        Some("hdr") | Some("bin") => p.with_extension(""),
        _ => p,
    }
}

fn parse_kv(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split('#').next())
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

impl<'a> Pipeline<'a> {
    fn new(cfg: &'a PipelineConfig) -> Result<Self> {
        let out = cfg.out_dir();
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        Ok(Pipeline { cfg, out })
    }

    fn art(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn scene_dir(&self) -> PathBuf {
        self.art(artifacts::SCENE_DIR)
    }

    fn input(&self, configured: &Option<PathBuf>, default: &str) -> PathBuf {
        match configured {
            Some(p) => strip_raster_ext(self.cfg.resolve(p)),
            None => self.scene_dir().join(default),
        }
    }

    fn pan_path(&self) -> PathBuf {
        self.input(&self.cfg.pan, files::PAN)
    }

    fn ms_path(&self) -> PathBuf {
        self.input(&self.cfg.ms, files::MS)
    }

    fn scene_manifest(&self) -> Result<Vec<(String, String)>> {
        Ok(parse_kv(&load_text(&self.scene_dir().join(files::MANIFEST))?))
    }

    fn landsat_paths(&self) -> Result<Vec<PathBuf>> {
        if let Some(list) = &self.cfg.landsat {
            return Ok(list.iter().map(|p| strip_raster_ext(self.cfg.resolve(p))).collect());
        }
        let manifest = self.scene_manifest()?;
        let stems = manifest
            .iter()
            .find(|(k, _)| k == "landsat")
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::Config("landsat = auto but the scene manifest lists no dates".into()))?;
        Ok(stems.split(',').map(|s| self.scene_dir().join(s.trim())).collect())
    }

    fn sun(&self) -> Result<ShadowGeometry> {
        let from_manifest = |key: &str| -> Result<f64> {
            let manifest = self.scene_manifest()?;
            let v = manifest
                .iter()
                .find(|(k, _)| k == key)
                .ok_or_else(|| Error::Config(format!("{key} = auto but the scene manifest lacks it")))?;
            v.1.parse()
                .map_err(|e| Error::Config(format!("scene manifest {key}: {e}")))
        };
        let elev = match self.cfg.sun_elevation_deg {
            Some(v) => v,
            None => from_manifest("sun_elevation")?,
        };
        let az = match self.cfg.sun_azimuth_deg {
            Some(v) => v,
            None => from_manifest("sun_azimuth")?,
        };
        Ok(ShadowGeometry {
            sun_elevation_deg: elev,
            sun_azimuth_deg: az,
            view_elevation_deg: self.cfg.view_elevation_deg,
            view_azimuth_deg: self.cfg.view_azimuth_deg,
        })
    }

    fn model(&self) -> Result<ClassifierModel> {
        ClassifierModel::from_json(&load_text(&self.art(artifacts::MODEL))?)
    }

    fn synth(&self) -> Result<()> {
        let mut spec = match &self.cfg.scene {
            Some(p) => SceneSpec::read(self.cfg.resolve(p))?,
            None => SceneSpec::default_scene(),
        };
        if let Some(seed) = self.cfg.scene_seed {
            spec = spec.with_seed(seed);
        }
        let bundle = generate_scene(&spec)?;
        write_bundle(&bundle, self.scene_dir())
    }

    fn train(&self) -> Result<()> {
        let path = match &self.cfg.training {
            Some(p) => self.cfg.resolve(p),
            None => self.scene_dir().join(files::TRAINING),
        };
        require(&path)?;
        let samples = TrainingSamples::read(&path)?;
        let model = fit_classifier(&samples)?;
        write_text(&self.art(artifacts::MODEL), &model.to_json())
    }

    fn classify_ms(&self) -> Result<()> {
        let model = self.model()?;
        let ms = load(&self.ms_path())?;
        let c = classify_probabilities(&model, &ms)?;
        write_raster(&c.probabilities, self.art(artifacts::MS_PROBABILITY))?;
        write_raster(&c.class_map, self.art(artifacts::MS_CLASS))
    }

    fn water_index(&self) -> Result<()> {
        let paths = self.landsat_paths()?;
        let pan = load(&self.pan_path())?;
        let stack = paths.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
        let vis: Vec<&str> = self.cfg.visible_bands.iter().map(String::as_str).collect();
        let swir: Vec<&str> = self.cfg.swir_bands.iter().map(String::as_str).collect();
        let p_lan = landsat_water_index(&stack, &vis, &swir)?;
        write_raster(&p_lan, self.art(artifacts::P_LAN))?;
        let up = resample_nearest(&p_lan, pan.geometry())?;
        let water = BinaryMask::from_fn(*pan.geometry(), |i| up.pixel_valid(i) && up.band(0)[i] > 0.5);
        write_mask(&water, "water", self.art(artifacts::LANDSAT_WATER))
    }

    fn pca_fuse(&self) -> Result<()> {
        let model = self.model()?;
        let pan = load(&self.pan_path())?;
        let ms = load(&self.ms_path())?;
        let fused = pca_fuse(&ms, &pan)?;
        write_raster(&fused, self.art(artifacts::PCA_FUSED))?;
        let c = classify_probabilities(&model, &fused)?;
        write_raster(&c.class_map, self.art(artifacts::PCA_CLASS))?;
        let water = class_water_mask(&c.class_map);
        write_mask(&water, "water", self.art(artifacts::PCA_WATER))
    }

    /// Segment-level inputs on the PAN grid, shared by `segment` and `shadow`.
    fn segment_inputs(&self) -> Result<(RasterGrid, [RasterGrid; 4], f64)> {
        let pan = load(&self.pan_path())?;
        let g = *pan.geometry();
        let probs = load(&self.art(artifacts::MS_PROBABILITY))?;
        let water_band = probs
            .band_index(LandCover::Water.name())
            .ok_or_else(|| Error::InvalidInput("MS probabilities lack a water band".into()))?;
        let p_ms = resample_nearest(&probs.select_bands(&[water_band])?, &g)?;
        let p_lan = resample_nearest(&load(&self.art(artifacts::P_LAN))?, &g)?;
        let class = resample_nearest(&load(&self.art(artifacts::MS_CLASS))?, &g)?;
        let mps = match load(&self.art(artifacts::PROFILES)) {
            Ok(m) => m,
            Err(Error::MissingArtifact(_)) => morphological_profiles(&pan)?,
            Err(e) => return Err(e),
        };
        let t_pan = match self.cfg.t_pan {
            Some(t) => t,
            None => otsu_threshold(pan.band(0))?,
        };
        Ok((pan, [mps, p_ms, p_lan, class], t_pan))
    }

    fn segment(&self) -> Result<()> {
        let pan = load(&self.pan_path())?;
        let mps = morphological_profiles(&pan)?;
        write_raster(&mps, self.art(artifacts::PROFILES))?;
        let (pan, [mps, p_ms, p_lan, class], t_pan) = self.segment_inputs()?;
        let mut segmap = kmeans_segment(&pan, &mps, self.cfg.kmeans_k, self.cfg.seed)?;
        segment_stats(
            &mut segmap,
            &SegmentInputs {
                pan: &pan,
                mps: &mps,
                p_ms: &p_ms,
                p_lan: &p_lan,
                ms_class_map: &class,
                t_pan,
            },
        )?;
        write_raster(&segmap.label_raster(), self.art(artifacts::SEGMENTS))?;
        segmap.write_table(self.art(artifacts::SEGMENT_TABLE))?;
        write_text(&self.art(artifacts::THRESHOLDS), &format!("t_pan = {t_pan}\n"))
    }

    fn shadow(&self) -> Result<()> {
        let sun = self.sun()?;
        let (pan, [mps, p_ms, p_lan, class], t_pan) = self.segment_inputs()?;
        let mut segmap = SegmentMap::from_label_raster(&load(&self.art(artifacts::SEGMENTS))?)?;
        segment_stats(
            &mut segmap,
            &SegmentInputs {
                pan: &pan,
                mps: &mps,
                p_ms: &p_ms,
                p_lan: &p_lan,
                ms_class_map: &class,
                t_pan,
            },
        )?;
        let analysis = analyse_shadows(&mut segmap, &sun, &self.cfg.heights, &self.cfg.intensity, self.cfg.t_tree)?;
        write_mask(&analysis.shadow, "shadow", self.art(artifacts::SHADOW))?;
        let codes: Vec<f64> = analysis.classes.iter().map(|c| *c as u8 as f64).collect();
        write_raster(&segmap.broadcast(&codes, "segment_class")?, self.art(artifacts::SEGMENT_CLASSES))?;
        segmap.write_table(self.art(artifacts::SHADOW_TABLE))?;
        let mut thresholds = format!("t_pan = {t_pan}\n");
        match analysis.t_tree {
            Some(t) => writeln!(thresholds, "t_tree = {t}"),
            None => writeln!(thresholds, "t_tree = none"),
        }
        .expect("string write");
        write_text(&self.art(artifacts::THRESHOLDS), &thresholds)
    }

    fn fused_segments(&self) -> Result<SegmentMap> {
        let mut segmap = SegmentMap::from_label_raster(&load(&self.art(artifacts::SEGMENTS))?)?;
        let path = self.art(artifacts::SHADOW_TABLE);
        segmap.load_table(&load_text(&path)?, &path.display().to_string())?;
        Ok(segmap)
    }

    fn fuse(&self) -> Result<()> {
        let segmap = self.fused_segments()?;
        let fused = fuse_all_segments(&segmap, &self.cfg.fusion)?;
        write_raster(&fused.probability, self.art(artifacts::P_WATER))?;
        write_mask(&fused.water, "water", self.art(artifacts::PGM_WATER))?;
        let t = self.cfg.fusion.decision_threshold;
        let by_segment = |f: fn(&crate::morpho::SegmentRecord) -> f64| {
            BinaryMask::from_fn(*segmap.geometry(), |i| f(&segmap.records[segmap.label_at(i) as usize]) > t)
        };
        write_mask(&by_segment(|r| r.p_pan), "water", self.art(artifacts::PAN_WATER))?;
        write_mask(&by_segment(|r| r.p_ms), "water", self.art(artifacts::MS_WATER))
    }

    fn postclass(&self) -> Result<()> {
        let segmap = self.fused_segments()?;
        let fused = fuse_all_segments(&segmap, &self.cfg.fusion)?;
        let water: Vec<bool> = fused.segments.iter().map(|s| s.water).collect();
        let kept = relabel_shadow_segments(&water, &segmap, &self.cfg.postclass)?;
        let relabelled = BinaryMask::from_fn(*segmap.geometry(), |i| kept[segmap.label_at(i) as usize]);
        write_mask(&relabelled, "water", self.art(artifacts::RELABELLED_WATER))?;
        // The pan-sharpened MS is the MS spectrum already on the PAN grid.
        let ms = load(&self.art(artifacts::PCA_FUSED))?;
        let refined = boundary_unmix(&relabelled, &ms, &self.cfg.postclass)?;
        write_mask(&refined, "water", self.art(artifacts::POSTCLASS_WATER))
    }

    fn evaluate(&self) -> Result<Vec<MethodResult>> {
        let class_map = load(&self.art(artifacts::PCA_CLASS))?;
        let truth = load_mask(&self.input(&self.cfg.truth, files::TRUTH))?;
        let maps = METHODS
            .iter()
            .map(|(_, a)| load_mask(&self.art(a)))
            .collect::<Result<Vec<_>>>()?;
        let points = stratified_sample(&class_map, &self.cfg.strata, self.cfg.seed)?;
        write_text(&self.art(artifacts::SAMPLES), &samples_text(&points))?;
        let mut report = String::new();
        let mut results = Vec::new();
        for ((title, artifact), map) in METHODS.iter().zip(&maps) {
            let matrix = evaluate_at(&points, map, &truth)?;
            if !report.is_empty() {
                report.push('\n');
            }
            report.push_str(&format_report(title, &matrix)?);
            results.push(MethodResult {
                title,
                artifact,
                matrix,
            });
        }
        write_text(&self.art(artifacts::REPORT), &report)?;
        Ok(results)
    }
}

fn class_water_mask(class_map: &RasterGrid) -> BinaryMask {
    let water = LandCover::Water.code();
    BinaryMask::from_fn(*class_map.geometry(), |i| class_map.band(0)[i] == water)
}

fn samples_text(points: &[SamplePoint]) -> String {
    let mut s = String::from("# row, col, stratum\n");
    for p in points {
        let _ = writeln!(s, "{}, {}, {}", p.row, p.col, p.class);
    }
    s
}

/// Runs `evaluate` and returns the per-method confusion matrices.
pub fn evaluate(cfg: &PipelineConfig) -> Result<Vec<MethodResult>> {
    cfg.validate()?;
    Pipeline::new(cfg)?.evaluate()
}

/// Splits a report into `(title, pa, ua, oa)` sections.
pub fn parse_report(text: &str) -> Vec<(String, f64, f64, f64)> {
    text.split("\n\n")
        .filter_map(|section| {
            let title = section.lines().next()?.to_string();
            let (pa, ua, oa) = crate::eval::parse_metrics_line(section)?;
            Some((title, pa, ua, oa))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_names_round_trip() {
        for s in Step::ALL {
            assert_eq!(s.name().parse::<Step>().unwrap(), s);
        }
        assert!("bogus".parse::<Step>().is_err());
    }

    #[test]
    fn missing_input_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::default().with_out(dir.path());
        let e = run(Step::Train, &cfg).unwrap_err();
        assert!(matches!(e, Error::MissingArtifact(_)), "{e}");
        assert_eq!(e.kind(), crate::ErrorKind::Io);
    }
}
