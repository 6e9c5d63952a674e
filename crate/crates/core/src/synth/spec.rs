//! Scene description: header directives, material library and features.
//!
//! One directive per line, whitespace-separated, `#` starts a comment.
//! Coordinates are local meters: `x` east from the west edge, `y` north from
//! the south edge.
//!
//! ```text
//! extent <width_m> <height_m>
//! origin <ulx> <uly>
//! seed <u64>
//! sun <elevation_deg> <azimuth_deg>
//! dates <doy> ...                       # Landsat acquisition days
//! background <material>
//! noise <scale>                         # multiplies every sigma, default 1
//! training <per_class>                  # training pixels per class, default 60
//! material <name> <class> <train|notrain> pan <v> <s> ms <v x4> <s> landsat <v x7> <s>
//! polygon <material> <x y>...
//! rect <material> <x0> <y0> <x1> <y1>
//! strip <material> <width> <x y>...
//! lake <x y>...
//! river <width> <x y>...
//! dark_field <x y>...
//! pond <dry_date_indices,comma,separated> <dry_material> <x0> <y0> <x1> <y1>
//! building <height> <material> <x0> <y0> <x1> <y1>
//! tree <height> <cx> <cy> <radius>
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::landcover::LandCover;
use crate::shadow::ShadowGeometry;

use super::shapes::Shape;

pub const PAN_PIXEL: f64 = 0.8;
pub const MS_PIXEL: f64 = 3.2;
pub const LANDSAT_PIXEL: f64 = 30.0;
pub const SUPERSAMPLE: f64 = 0.1;
pub const MS_BANDS: [&str; 4] = ["blue", "green", "red", "nir"];
pub const LANDSAT_BANDS: [&str; 7] = ["coastal", "blue", "green", "red", "nir", "swir1", "swir2"];

/// Material names the water-like features render with.
pub const WATER_MATERIAL: &str = "water";
pub const TREE_MATERIAL: &str = "tree";
pub const DARK_FILM_MATERIAL: &str = "dark_film";

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub class: LandCover,
    /// Whether pure pixels of this material feed the classifier training set.
    pub train: bool,
    pub pan: f64,
    pub pan_sigma: f64,
    pub ms: [f64; 4],
    pub ms_sigma: f64,
    pub landsat: [f64; 7],
    pub landsat_sigma: f64,
}

impl Material {
    fn validate(&self) -> Result<()> {
        let values = std::iter::once(self.pan).chain(self.ms).chain(self.landsat);
        let sigmas = [self.pan_sigma, self.ms_sigma, self.landsat_sigma];
        if values.chain(sigmas).any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("material {}: non-finite value", self.name)));
        }
        if sigmas.iter().any(|&s| s < 0.0) {
            return Err(Error::Config(format!("material {}: negative noise sigma", self.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    Surface { material: String, shape: Shape },
    Lake(Shape),
    River { width: f64, points: Vec<(f64, f64)> },
    DarkField(Shape),
    /// Water body that renders as `dry_material` on the listed Landsat dates.
    Pond { dry_dates: Vec<usize>, dry_material: String, shape: Shape },
    Building { height: f64, material: String, shape: Shape },
    Tree { height: f64, cx: f64, cy: f64, radius: f64 },
}

impl Feature {
    pub fn shape(&self) -> Shape {
        match self {
            Feature::Surface { shape, .. }
            | Feature::Lake(shape)
            | Feature::DarkField(shape)
            | Feature::Pond { shape, .. }
            | Feature::Building { shape, .. } => shape.clone(),
            Feature::River { width, points } => Shape::Strip {
                width: *width,
                points: points.clone(),
            },
            Feature::Tree { cx, cy, radius, .. } => Shape::Disk {
                cx: *cx,
                cy: *cy,
                r: *radius,
            },
        }
    }

    pub fn height(&self) -> Option<f64> {
        match self {
            Feature::Building { height, .. } | Feature::Tree { height, .. } => Some(*height),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width_m: f64,
    pub height_m: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub seed: u64,
    pub sun: ShadowGeometry,
    pub dates: Vec<u32>,
    pub background: String,
    pub noise_scale: f64,
    pub training_per_class: usize,
    pub materials: Vec<Material>,
    pub features: Vec<Feature>,
}

const DEFAULT_SCENE: &str = include_str!("../../fixtures/default_scene.scene");

impl SceneSpec {
    /// The bundled default scene.
    pub fn default_scene() -> SceneSpec {
        SceneSpec::parse(DEFAULT_SCENE, "default_scene.scene").expect("bundled scene parses")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<SceneSpec> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SceneSpec::parse(&text, &path.display().to_string())
    }

    pub fn material(&self, name: &str) -> Option<usize> {
        self.materials.iter().position(|m| m.name == name)
    }

    pub fn with_seed(mut self, seed: u64) -> SceneSpec {
        self.seed = seed;
        self
    }

    pub fn without_noise(mut self) -> SceneSpec {
        self.noise_scale = 0.0;
        self
    }

    pub fn parse(text: &str, origin: &str) -> Result<SceneSpec> {
        let mut spec = SceneSpec {
            width_m: 0.0,
            height_m: 0.0,
            origin_x: 0.0,
            origin_y: 0.0,
            seed: 0,
            sun: ShadowGeometry::nadir(90.0, 0.0),
            dates: Vec::new(),
            background: String::new(),
            noise_scale: 1.0,
            training_per_class: 60,
            materials: default_library(),
            features: Vec::new(),
        };
        let mut have_extent = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let loc = format!("{origin}:{}", n + 1);
            let mut toks = line.split_whitespace();
            let key = toks.next().unwrap_or_default();
            let rest: Vec<&str> = toks.collect();
            let mut args = Args::new(&rest, &loc);
            match key {
                "extent" => {
                    spec.width_m = args.num()?;
                    spec.height_m = args.num()?;
                    have_extent = true;
                }
                "origin" => {
                    spec.origin_x = args.num()?;
                    spec.origin_y = args.num()?;
                }
                "seed" => spec.seed = args.parse()?,
                "sun" => spec.sun = ShadowGeometry::nadir(args.num()?, args.num()?),
                "dates" => spec.dates = args.rest_parsed()?,
                "background" => spec.background = args.word()?.to_string(),
                "noise" => spec.noise_scale = args.num()?,
                "training" => spec.training_per_class = args.parse()?,
                "material" => {
                    let m = parse_material(&mut args)?;
                    match spec.material(&m.name) {
                        Some(i) => spec.materials[i] = m,
                        None => spec.materials.push(m),
                    }
                }
                "polygon" => spec.features.push(Feature::Surface {
                    material: args.word()?.to_string(),
                    shape: Shape::Polygon(args.points(3)?),
                }),
                "rect" => spec.features.push(Feature::Surface {
                    material: args.word()?.to_string(),
                    shape: args.rect()?,
                }),
                "strip" => spec.features.push(Feature::Surface {
                    material: args.word()?.to_string(),
                    shape: Shape::Strip {
                        width: args.positive()?,
                        points: args.points(2)?,
                    },
                }),
                "lake" => spec.features.push(Feature::Lake(Shape::Polygon(args.points(3)?))),
                "river" => spec.features.push(Feature::River {
                    width: args.positive()?,
                    points: args.points(2)?,
                }),
                "dark_field" => spec.features.push(Feature::DarkField(Shape::Polygon(args.points(3)?))),
                "pond" => {
                    let dry_dates = args
                        .word()?
                        .split(',')
                        .map(|s| s.parse::<usize>().map_err(|e| Error::parse(&loc, format!("date index {s:?}: {e}"))))
                        .collect::<Result<Vec<_>>>()?;
                    spec.features.push(Feature::Pond {
                        dry_dates,
                        dry_material: args.word()?.to_string(),
                        shape: args.rect()?,
                    });
                }
                "building" => spec.features.push(Feature::Building {
                    height: args.positive()?,
                    material: args.word()?.to_string(),
                    shape: args.rect()?,
                }),
                "tree" => spec.features.push(Feature::Tree {
                    height: args.positive()?,
                    cx: args.num()?,
                    cy: args.num()?,
                    radius: args.positive()?,
                }),
                other => return Err(Error::parse(&loc, format!("unknown directive {other:?}"))),
            }
            args.finish()?;
        }
        if !have_extent {
            return Err(Error::parse(origin, "missing extent"));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        for (name, v) in [("width", self.width_m), ("height", self.height_m)] {
            if !(v > 0.0) {
                return cfg(format!("scene {name} must be positive"));
            }
            for px in [PAN_PIXEL, MS_PIXEL, LANDSAT_PIXEL] {
                let n = v / px;
                if (n - n.round()).abs() > 1e-6 {
                    return cfg(format!("scene {name} {v} m is not a multiple of {px} m"));
                }
            }
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return cfg("noise scale must be finite and non-negative".into());
        }
        if self.dates.is_empty() {
            return cfg("at least one Landsat date is required".into());
        }
        self.sun.coefficients()?;
        for m in &self.materials {
            m.validate()?;
        }
        let need = |name: &str| -> Result<()> {
            match self.material(name) {
                Some(_) => Ok(()),
                None => Err(Error::Config(format!("unknown material {name:?}"))),
            }
        };
        need(&self.background)?;
        need(WATER_MATERIAL)?;
        for (i, f) in self.features.iter().enumerate() {
            match f {
                Feature::Surface { material, .. } | Feature::Building { material, .. } => need(material)?,
                Feature::Tree { .. } => need(TREE_MATERIAL)?,
                Feature::DarkField(_) => need(DARK_FILM_MATERIAL)?,
                Feature::Pond {
                    dry_dates,
                    dry_material,
                    ..
                } => {
                    need(dry_material)?;
                    if let Some(d) = dry_dates.iter().find(|&&d| d >= self.dates.len()) {
                        return cfg(format!("feature {}: dry date index {d} out of range", i + 1));
                    }
                }
                _ => {}
            }
            // Strips are checked by their centerline so rivers may run edge to edge.
            let (x0, y0, x1, y1) = match f.shape() {
                Shape::Strip { points, .. } => Shape::Polygon(points).bbox(),
                s => s.bbox(),
            };
            if x0 < 0.0 || y0 < 0.0 || x1 > self.width_m || y1 > self.height_m {
                return cfg(format!("feature {} extends outside the scene", i + 1));
            }
        }
        Ok(())
    }
}

struct Args<'a> {
    toks: &'a [&'a str],
    pos: usize,
    loc: &'a str,
}

impl<'a> Args<'a> {
    fn new(toks: &'a [&'a str], loc: &'a str) -> Self {
        Args { toks, pos: 0, loc }
    }

    fn word(&mut self) -> Result<&'a str> {
        let t = self
            .toks
            .get(self.pos)
            .ok_or_else(|| Error::parse(self.loc, "too few arguments"))?;
        self.pos += 1;
        Ok(t)
    }

    fn parse<T: std::str::FromStr>(&mut self) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let w = self.word()?;
        w.parse().map_err(|e| Error::parse(self.loc, format!("{w:?}: {e}")))
    }

    fn num(&mut self) -> Result<f64> {
        let v: f64 = self.parse()?;
        if !v.is_finite() {
            return Err(Error::parse(self.loc, "non-finite number"));
        }
        Ok(v)
    }

    fn positive(&mut self) -> Result<f64> {
        let v = self.num()?;
        if v <= 0.0 {
            return Err(Error::parse(self.loc, format!("{v} must be positive")));
        }
        Ok(v)
    }

    fn keyword(&mut self, k: &str) -> Result<()> {
        let w = self.word()?;
        if w != k {
            return Err(Error::parse(self.loc, format!("expected {k:?}, found {w:?}")));
        }
        Ok(())
    }

    fn rest_parsed<T: std::str::FromStr>(&mut self) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let mut v = Vec::new();
        while self.pos < self.toks.len() {
            v.push(self.parse()?);
        }
        Ok(v)
    }

    fn points(&mut self, min: usize) -> Result<Vec<(f64, f64)>> {
        let nums: Vec<f64> = self.rest_parsed()?;
        if !nums.len().is_multiple_of(2) || nums.len() / 2 < min {
            return Err(Error::parse(self.loc, format!("expected at least {min} x y pairs")));
        }
        Ok(nums.chunks(2).map(|c| (c[0], c[1])).collect())
    }

    fn rect(&mut self) -> Result<Shape> {
        let (x0, y0, x1, y1) = (self.num()?, self.num()?, self.num()?, self.num()?);
        if x0 == x1 || y0 == y1 {
            return Err(Error::parse(self.loc, "empty rectangle"));
        }
        Ok(Shape::rect(x0, y0, x1, y1))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.toks.len() {
            return Err(Error::parse(self.loc, "too many arguments"));
        }
        Ok(())
    }
}

fn parse_material(args: &mut Args) -> Result<Material> {
    let name = args.word()?.to_string();
    let class: LandCover = args.parse()?;
    let train = match args.word()? {
        "train" => true,
        "notrain" => false,
        w => return Err(Error::parse(args.loc, format!("expected train or notrain, found {w:?}"))),
    };
    args.keyword("pan")?;
    let (pan, pan_sigma) = (args.num()?, args.num()?);
    args.keyword("ms")?;
    let mut ms = [0.0; 4];
    for v in &mut ms {
        *v = args.num()?;
    }
    let ms_sigma = args.num()?;
    args.keyword("landsat")?;
    let mut landsat = [0.0; 7];
    for v in &mut landsat {
        *v = args.num()?;
    }
    let landsat_sigma = args.num()?;
    Ok(Material {
        name,
        class,
        train,
        pan,
        pan_sigma,
        ms,
        ms_sigma,
        landsat,
        landsat_sigma,
    })
}

#[allow(clippy::too_many_arguments)]
fn mat(
    name: &str,
    class: LandCover,
    train: bool,
    pan: (f64, f64),
    ms: [f64; 4],
    ms_sigma: f64,
    landsat: [f64; 7],
    landsat_sigma: f64,
) -> Material {
    Material {
        name: name.into(),
        class,
        train,
        pan: pan.0,
        pan_sigma: pan.1,
        ms,
        ms_sigma,
        landsat,
        landsat_sigma,
    }
}

/// Built-in reflectance library. Water, shadowed surfaces and the dark film
/// overlap in VNIR; only the film is bright in SWIR.
pub fn default_library() -> Vec<Material> {
    use LandCover::*;
    vec![
        mat("water", Water, true, (0.05, 0.006), [0.07, 0.06, 0.04, 0.02], 0.005,
            [0.08, 0.07, 0.06, 0.04, 0.02, 0.01, 0.005], 0.003),
        mat("grass", Vegetation, true, (0.18, 0.01), [0.04, 0.08, 0.05, 0.35], 0.008,
            [0.04, 0.04, 0.08, 0.05, 0.35, 0.20, 0.10], 0.005),
        mat("tree", Vegetation, true, (0.12, 0.045), [0.03, 0.06, 0.04, 0.30], 0.02,
            [0.03, 0.03, 0.06, 0.04, 0.30, 0.16, 0.08], 0.005),
        mat("soil", Soil, true, (0.22, 0.01), [0.12, 0.15, 0.18, 0.25], 0.008,
            [0.11, 0.12, 0.15, 0.18, 0.25, 0.32, 0.28], 0.005),
        mat("concrete", Impervious, true, (0.26, 0.01), [0.23, 0.25, 0.27, 0.29], 0.006,
            [0.20, 0.22, 0.24, 0.25, 0.27, 0.30, 0.28], 0.005),
        mat("asphalt", Impervious, true, (0.11, 0.008), [0.09, 0.10, 0.11, 0.12], 0.006,
            [0.09, 0.09, 0.10, 0.11, 0.12, 0.14, 0.13], 0.004),
        mat("roof", Impervious, true, (0.30, 0.012), [0.25, 0.27, 0.29, 0.31], 0.006,
            [0.24, 0.25, 0.27, 0.30, 0.32, 0.35, 0.33], 0.005),
        mat("paving", Impervious, false, (0.16, 0.01), [0.20, 0.171, 0.114, 0.057], 0.008,
            [0.20, 0.19, 0.16, 0.12, 0.06, 0.30, 0.26], 0.005),
        mat("dark_film", Soil, false, (0.075, 0.003), [0.07, 0.06, 0.04, 0.02], 0.004,
            [0.08, 0.07, 0.06, 0.04, 0.02, 0.15, 0.12], 0.003),
        mat("mud", Soil, false, (0.14, 0.01), [0.08, 0.09, 0.10, 0.14], 0.006,
            [0.08, 0.08, 0.09, 0.10, 0.14, 0.22, 0.20], 0.004),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = "
extent 480 480
origin 1000 2000
seed 7
sun 50 160
dates 10 20 30
background grass
lake 10 10 40 10 40 40 10 40
river 2.4 0 60 96 60
pond 0,2 mud 60 10 90 40
building 10 roof 60 70 70 80   # comment
tree 8 20 80 3
";

    #[test]
    fn parses_minimal_scene() {
        let s = SceneSpec::parse(MINI, "mini").unwrap();
        assert_eq!(s.width_m, 480.0);
        assert_eq!(s.dates, vec![10, 20, 30]);
        assert_eq!(s.features.len(), 5);
        assert_eq!(s.features[3].height(), Some(10.0));
        assert!(s.material("dark_film").is_some());
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            MINI.replace("extent 480 480", "extent 100 480"),
            MINI.replace("river 2.4", "river -2.4"),
            MINI.replace("tree 8 20 80 3", "tree 8 20 479 3"),
            MINI.replace("pond 0,2", "pond 0,3"),
            format!("{MINI}\nwidget 1 2"),
            format!("{MINI}\nmaterial x water train pan 0.1 -0.1 ms 1 1 1 1 0 landsat 1 1 1 1 1 1 1 0"),
        ];
        for text in bad {
            assert!(SceneSpec::parse(&text, "bad").is_err(), "{text}");
        }
    }

    #[test]
    fn material_override_replaces_library_entry() {
        let text = format!("{MINI}\nmaterial grass vegetation train pan 0.2 0 ms 0 0 0 0.4 0 landsat 0 0 0 0 0.4 0.2 0.1 0");
        let s = SceneSpec::parse(&text, "m").unwrap();
        let g = &s.materials[s.material("grass").unwrap()];
        assert_eq!(g.pan, 0.2);
        assert_eq!(s.materials.len(), default_library().len());
    }

    #[test]
    fn bundled_scene_is_valid() {
        let s = SceneSpec::default_scene();
        assert_eq!(s.dates.len(), 7);
    }
}
