//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pgmwater::eval::{accuracy_metrics, AccuracyReport, ConfusionMatrix};
use pgmwater::fusion::{cpd_pm, cpd_w, fuse_all_segments, fuse_pm, fuse_w, FusionParams, State};
use pgmwater::morpho::{closing, kmeans, opening, Features, SeShape, SegmentMap, StructuringElement};
use pgmwater::pipeline::{self, artifacts, MethodResult, PipelineConfig, Step};
use pgmwater::raster::{read_mask, read_raster, write_raster};
use pgmwater::shadow::{shadow_offset_coefficients, ShadowGeometry};
use pgmwater::spectral::{landsat_water_index, DEFAULT_SWIR_BANDS, DEFAULT_VISIBLE_BANDS};
use pgmwater::synth::{files, generate_scene, SceneSpec};
use pgmwater::{GridGeometry, RasterGrid};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Run {
    _dir: tempfile::TempDir,
    out: PathBuf,
    cfg: PipelineConfig,
    results: Vec<MethodResult>,
}

fn run_all(out: &Path) -> PipelineConfig {
    let cfg = PipelineConfig::default().with_out(out);
    pipeline::run(Step::RunAll, &cfg).expect("run-all");
    cfg
}

fn shared_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let cfg = run_all(&out);
        let results = pipeline::evaluate(&cfg).expect("evaluate");
        Run {
            _dir: dir,
            out,
            cfg,
            results,
        }
    })
}

/// Segments with their PGM outcome, read back from the run's artifacts.
fn fused_segments(run: &Run) -> (SegmentMap, Vec<bool>) {
    let mut seg = SegmentMap::from_label_raster(&read_raster(run.out.join(artifacts::SEGMENTS)).unwrap()).unwrap();
    let table = std::fs::read_to_string(run.out.join(artifacts::SHADOW_TABLE)).unwrap();
    seg.load_table(&table, "segments").unwrap();
    let fused = fuse_all_segments(&seg, &run.cfg.fusion).unwrap();
    let water = fused.segments.iter().map(|s| s.water).collect();
    (seg, water)
}

/// Per-segment count of pixels set in the scene mask `stem`.
fn overlap(run: &Run, seg: &SegmentMap, stem: &str) -> Vec<usize> {
    let mask = read_mask(run.out.join(artifacts::SCENE_DIR).join(stem)).unwrap();
    let mut n = vec![0usize; seg.len()];
    for (i, &l) in seg.labels().iter().enumerate() {
        n[l as usize] += mask.get(i) as usize;
    }
    n
}

fn ac1() -> Check {
    let tables: [(&str, [u64; 2], [u64; 2], [&str; 3]); 6] = [
        ("PCA", [299, 2], [69, 230], ["99.1", "76.9", "88.2"]),
        ("PAN", [249, 0], [119, 232], ["100.0", "66.1", "80.2"]),
        ("MS", [339, 12], [29, 220], ["95.0", "88.4", "93.2"]),
        ("Landsat", [361, 33], [7, 199], ["85.8", "96.7", "93.3"]),
        ("PGM", [341, 8], [27, 224], ["96.6", "89.2", "94.2"]),
        ("post", [350, 7], [18, 225], ["97.0", "92.6", "95.8"]),
    ];
    let mut bad = Vec::new();
    for (name, nw, w, printed) in tables {
        let r = accuracy_metrics(&ConfusionMatrix::from_rows(nw, w)).map_err(|e| e.to_string())?;
        let got = [r.pa.to_string(), r.ua.to_string(), r.oa.to_string()];
        for ((metric, g), p) in ["PA", "UA", "OA"].iter().zip(&got).zip(printed) {
            if g != p {
                bad.push(format!("{name} {metric} {g} vs printed {p}"));
            }
        }
    }
    if bad.is_empty() {
        Ok("18/18 printed values reproduced".into())
    } else {
        Err(format!("{}/18 mismatched: {}", bad.len(), bad.join("; ")))
    }
}

fn sig(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Full-joint enumeration over PAN, MS, PM, LAN and W, written from the
/// conditional tables alone.
fn enumerate(p_pan: f64, p_ms: f64, p_lan: f64, w: f64, p_sh: f64, p: &FusionParams) -> (f64, f64) {
    let s = sig((w / (p.n1 as f64 * p.r_ms) + p_sh) / 2.0);
    let scale = p.n2 as f64 * p.r_l;
    let s_l = if w >= scale { sig(w / scale) } else { 0.0 };
    let pr = |x: u8, q: f64| if x == 1 { q } else { 1.0 - q };
    let table = |child: u8, a: u8, b: u8, weight_b: f64| -> f64 {
        match (child == a, child == b) {
            (true, true) => 1.0,
            (true, false) => 1.0 - weight_b,
            (false, true) => weight_b,
            (false, false) => 0.0,
        }
    };
    let (mut pm1, mut w1) = (0.0, 0.0);
    for pan in 0..2u8 {
        for ms in 0..2u8 {
            for lan in 0..2u8 {
                for pm in 0..2u8 {
                    let joint = pr(pan, p_pan) * pr(ms, p_ms) * pr(lan, p_lan) * table(pm, pan, ms, s);
                    if pm == 1 {
                        pm1 += joint;
                    }
                    w1 += joint * table(1, pm, lan, s_l);
                }
            }
        }
    }
    (pm1, w1)
}

fn ac2() -> Check {
    let p = FusionParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (pa, pb, pl, sh) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        let w = rng.random_range(0.1..=500.0);
        let (pm_ref, w_ref) = enumerate(pa, pb, pl, w, sh, &p);
        let pm = fuse_pm(pa, pb, w, sh, &p);
        let pw = fuse_w(pm, pl, w, &p);
        worst = worst.max((pm - pm_ref).abs()).max((pw - w_ref).abs());
        for a in State::BOTH {
            for b in State::BOTH {
                let rows = [
                    State::BOTH.iter().map(|&c| cpd_pm(c, a, b, w, sh, &p)).sum::<f64>(),
                    State::BOTH.iter().map(|&c| cpd_w(c, a, b, w, &p)).sum::<f64>(),
                ];
                ensure(rows == [1.0, 1.0], || format!("CPD row sums {rows:?} at w = {w}"))?;
            }
        }
        let c = (fuse_pm(pa, pa, w, sh, &p) - pa).abs().max((fuse_w(pa, pa, w, &p) - pa).abs());
        ensure(c <= 1e-12, || format!("consensus drift {c:e} at p = {pa}"))?;
    }
    ensure(worst <= 1e-12, || format!("max deviation from enumeration {worst:e}"))?;
    Ok(format!("10^4 points, max deviation {worst:.1e}"))
}

fn ac3() -> Check {
    let p = FusionParams::default();
    let pm = fuse_pm(0.9, 0.1, 3.2, 0.0, &p);
    let pw = fuse_w(0.9, 0.1, 60.0, &p);
    let small = fuse_w(0.37, 0.91, 15.0, &p);
    let detail = format!("fuse_pm = {pm:.7} (expected 0.450247), fuse_w = {pw:.7} (expected 0.195360)");
    ensure(small == 0.37, || format!("w = 15 returned {small}"))?;
    ensure((pm - 0.450247).abs() <= 1e-6 && (pw - 0.195360).abs() <= 1e-6, || detail.clone())?;
    Ok(detail)
}

fn ac4() -> Check {
    let run = shared_run();
    let (seg, water) = fused_segments(run);
    let axis = overlap(run, &seg, files::RIVER_AXIS);
    let ids: Vec<usize> = (0..seg.len()).filter(|&k| axis[k] > 0).collect();
    ensure(!ids.is_empty(), || "no segment on the river axis".into())?;
    let ok = ids
        .iter()
        .filter(|&&k| seg.records[k].p_ms < 0.5 && water[k])
        .count();
    let detail = format!(
        "{ok}/{} river-axis segments MS non-water and PGM water (p_ms {})",
        ids.len(),
        ids.iter().map(|&k| format!("{:.3}", seg.records[k].p_ms)).collect::<Vec<_>>().join(",")
    );
    ensure(ok * 10 >= ids.len() * 9, || detail.clone())?;
    Ok(detail)
}

fn ac5() -> Check {
    let run = shared_run();
    let (seg, water) = fused_segments(run);
    let dark = overlap(run, &seg, files::DARK_FIELD);
    let ids: Vec<usize> = (0..seg.len())
        .filter(|&k| dark[k] * 2 >= seg.records[k].pixel_count as usize)
        .collect();
    ensure(!ids.is_empty(), || "no segment in the dark field".into())?;
    let t = run.cfg.fusion.decision_threshold;
    let bad: Vec<String> = ids
        .iter()
        .filter(|&&k| {
            let r = &seg.records[k];
            !(r.p_pan > t && r.p_ms > t && !water[k])
        })
        .map(|&k| {
            let r = &seg.records[k];
            format!("segment {} (n {}, p_pan {:.2}, p_ms {:.2}, pgm {})", r.id, r.pixel_count, r.p_pan, r.p_ms, water[k])
        })
        .collect();
    ensure(bad.is_empty(), || format!("{} of {} segments wrong: {}", bad.len(), ids.len(), bad.join("; ")))?;
    Ok(format!("{} dark-field segments: PAN and MS water, PGM non-water", ids.len()))
}

fn ac6() -> Check {
    let run = shared_run();
    let by_artifact: BTreeMap<&str, (AccuracyReport, u64)> = run
        .results
        .iter()
        .map(|r| (r.artifact, (accuracy_metrics(&r.matrix).unwrap(), r.matrix.total())))
        .collect();
    let get = |a: &str| by_artifact[a].0;
    let oa = |a: &str| get(a).oa.percent();
    let (pgm, post) = (get(artifacts::PGM_WATER), get(artifacts::POSTCLASS_WATER));
    let detail = format!(
        "OA pgm {:.1} ms {:.1} pca {:.1} pan {:.1}; post UA {:.1} -> {:.1}, PA {:.1} -> {:.1}",
        oa(artifacts::PGM_WATER),
        oa(artifacts::MS_WATER),
        oa(artifacts::PCA_WATER),
        oa(artifacts::PAN_WATER),
        pgm.ua.percent(),
        post.ua.percent(),
        pgm.pa.percent(),
        post.pa.percent()
    );
    ensure(by_artifact.values().all(|v| v.1 == 600), || "sample count is not 600".into())?;
    ensure(
        oa(artifacts::PGM_WATER) > oa(artifacts::MS_WATER)
            && oa(artifacts::MS_WATER) > oa(artifacts::PCA_WATER)
            && oa(artifacts::PGM_WATER) > oa(artifacts::PAN_WATER),
        || format!("ordering violated: {detail}"),
    )?;
    ensure(post.ua.percent() > pgm.ua.percent() && post.pa.percent() >= pgm.pa.percent(), || {
        format!("post-classification: {detail}")
    })?;
    ensure(oa(artifacts::PGM_WATER) >= 95.0, || format!("PGM OA below 95: {detail}"))?;
    Ok(detail)
}

fn ac7() -> Check {
    let close = |g: ShadowGeometry, want: (f64, f64)| {
        let (a, b) = shadow_offset_coefficients(&g).unwrap();
        (a - want.0).abs() < 1e-12 && (b - want.1).abs() < 1e-12
    };
    ensure(close(ShadowGeometry::nadir(90.0, 123.0), (0.0, 0.0)), || "zenith sun".into())?;
    ensure(close(ShadowGeometry::nadir(45.0, 180.0), (0.0, -1.0)), || "sun due south".into())?;
    ensure(close(ShadowGeometry::nadir(45.0, 90.0), (-1.0, 0.0)), || "sun due east".into())?;
    let run = shared_run();
    let truth = read_mask(run.out.join(artifacts::SCENE_DIR).join(files::SHADOW_TRUTH)).unwrap();
    let predicted = read_mask(run.out.join(artifacts::SHADOW)).unwrap();
    let rendered = truth.count_ones();
    let hit = (0..truth.bits().len()).filter(|&i| truth.get(i) && predicted.get(i)).count();
    let cov = hit as f64 / rendered as f64;
    let detail = format!("analytic (a, b) cases ok; coverage {hit}/{rendered} = {:.2}%", 100.0 * cov);
    ensure(rendered > 0 && cov >= 0.95, || detail.clone())?;
    Ok(detail)
}

fn ac8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let elements = [
        StructuringElement { shape: SeShape::HorizontalLine, size: 4 },
        StructuringElement { shape: SeShape::VerticalLine, size: 3 },
        StructuringElement { shape: SeShape::Square, size: 5 },
        StructuringElement { shape: SeShape::Square, size: 6 },
    ];
    for n in 0..100 {
        let (w, h) = (rng.random_range(1..24usize), rng.random_range(1..24usize));
        let img: Vec<f32> = (0..w * h).map(|_| rng.random_range(0..16) as f32 / 4.0).collect();
        let se = elements[n % elements.len()];
        let o = opening(&img, w, se);
        let c = closing(&img, w, se);
        ensure((0..img.len()).all(|i| o[i] <= img[i] && img[i] <= c[i]), || format!("bracketing, image {n}"))?;
        ensure(opening(&o, w, se) == o && closing(&c, w, se) == c, || format!("idempotence, image {n}"))?;
    }
    for trial in 0..20u64 {
        let n = 300;
        let cols: Vec<Vec<f32>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random::<f32>() * 10.0).collect())
            .collect();
        let refs: Vec<&[f32]> = cols.iter().map(|c| c.as_slice()).collect();
        let f = Features::standardized(&refs).map_err(|e| e.to_string())?;
        let r = kmeans(&f, 6, trial).map_err(|e| e.to_string())?;
        ensure(r.objective.windows(2).all(|p| p[1] <= p[0]), || format!("objective increased, trial {trial}"))?;
    }
    let run = shared_run();
    let (seg, _) = fused_segments(run);
    let g = seg.geometry();
    let total: u64 = seg.records.iter().map(|r| r.pixel_count).sum();
    ensure(total == (g.width * g.height) as u64, || format!("segments cover {total} pixels"))?;
    Ok(format!("100 images, 20 K-Means runs, {} segments cover {total} pixels", seg.len()))
}

fn ac9() -> Check {
    let bundle = generate_scene(&SceneSpec::default_scene().without_noise()).map_err(|e| e.to_string())?;
    let stack: Vec<RasterGrid> = bundle.landsat.iter().map(|s| s.raster.clone()).collect();
    let index = landsat_water_index(&stack, &DEFAULT_VISIBLE_BANDS, &DEFAULT_SWIR_BANDS).map_err(|e| e.to_string())?;
    let want = bundle.landsat_index_truth.band(0);
    let got = index.band(0);
    let wrong = (0..want.len()).filter(|&i| got[i] != want[i]).count();
    ensure(wrong == 0, || format!("{wrong}/{} pixels differ from k/M", want.len()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let swir: Vec<usize> = DEFAULT_SWIR_BANDS.iter().map(|b| stack[0].band_index(b).unwrap()).collect();
    for trial in 0..20 {
        let inflated: Vec<RasterGrid> = stack
            .iter()
            .map(|r| {
                let mut r = r.clone();
                for &b in &swir {
                    for v in r.band_mut(b) {
                        *v += rng.random_range(0.0..0.2f32);
                    }
                }
                r
            })
            .collect();
        let after = landsat_water_index(&inflated, &DEFAULT_VISIBLE_BANDS, &DEFAULT_SWIR_BANDS).unwrap();
        let up = (0..want.len()).filter(|&i| after.band(0)[i] > got[i]).count();
        ensure(up == 0, || format!("index rose at {up} pixels, trial {trial}"))?;
    }
    Ok(format!("{} pixels exact; 20 SWIR inflations monotone", want.len()))
}

/// Relative path → bytes of every file under `root`.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn ac10() -> Check {
    let run = shared_run();
    let dir = tempfile::tempdir().unwrap();
    let second = dir.path().join("out");
    run_all(&second);
    let (a, b) = (tree(&run.out), tree(&second));
    ensure(a.keys().eq(b.keys()), || "artifact trees list different files".into())?;
    let differing: Vec<_> = a.iter().filter(|(k, v)| b[*k] != **v).map(|(k, _)| k.display().to_string()).collect();
    ensure(differing.is_empty(), || format!("files differ: {}", differing.join(", ")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let g = GridGeometry::new(37, 23, 0.8, 500000.0, 4200000.0).unwrap();
    let mut data: Vec<f32> = (0..3 * g.len()).map(|_| f32::from_bits(rng.random::<u32>() & 0x7f7f_ffff)).collect();
    data[5] = f32::NAN;
    data[6] = -0.0;
    let raster = RasterGrid::new(g, vec!["a".into(), "b".into(), "c".into()], data, Some(f32::NAN)).unwrap();
    let path = dir.path().join("roundtrip");
    write_raster(&raster, &path).map_err(|e| e.to_string())?;
    let back = read_raster(&path).map_err(|e| e.to_string())?;
    let bits = |r: &RasterGrid| r.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure(back.geometry() == raster.geometry() && back.band_names() == raster.band_names(), || {
        "header changed in round trip".into()
    })?;
    ensure(bits(&back) == bits(&raster), || "raster data changed in round trip".into())?;
    Ok(format!("{} artifacts byte-identical; raster round trip bit-exact", a.len()))
}

fn main() {
    let checks: [(&str, fn() -> Check); 10] = [
        ("AC-1", ac1),
        ("AC-2", ac2),
        ("AC-3", ac3),
        ("AC-4", ac4),
        ("AC-5", ac5),
        ("AC-6", ac6),
        ("AC-7", ac7),
        ("AC-8", ac8),
        ("AC-9", ac9),
        ("AC-10", ac10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| id == f) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {id}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
