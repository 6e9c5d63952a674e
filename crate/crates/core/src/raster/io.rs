//! Flat raster format: `<stem>.hdr` (text, `key = value`) plus `<stem>.bin`
//! (little-endian f32, band-sequential, row-major within a band).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{BinaryMask, GridGeometry, RasterGrid};
use crate::error::{Error, Result};

fn stem_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("hdr") | Some("bin") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut hdr = stem.clone().into_os_string();
    hdr.push(".hdr");
    let mut bin = stem.into_os_string();
    bin.push(".bin");
    (PathBuf::from(hdr), PathBuf::from(bin))
}

struct Header {
    samples: usize,
    lines: usize,
    bands: usize,
    pixel_size: f64,
    ulx: f64,
    uly: f64,
    band_names: Vec<String>,
    nodata: Option<f32>,
}

fn parse_header(text: &str, path: &Path) -> Result<Header> {
    let err = |message: String| Error::Header {
        path: path.to_path_buf(),
        message,
    };
    let mut samples = None;
    let mut lines = None;
    let mut bands = None;
    let mut pixel_size = None;
    let mut ulx = None;
    let mut uly = None;
    let mut band_names = None;
    let mut nodata = None;
    let mut data_type = None;
    let mut interleave = None;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("line {}: expected `key = value`", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| err(format!("line {}: bad {what} `{value}`", lineno + 1));
        match key {
            "samples" => samples = Some(value.parse::<usize>().map_err(|_| bad(key))?),
            "lines" => lines = Some(value.parse::<usize>().map_err(|_| bad(key))?),
            "bands" => bands = Some(value.parse::<usize>().map_err(|_| bad(key))?),
            "pixel_size" => pixel_size = Some(value.parse::<f64>().map_err(|_| bad(key))?),
            "ulx" => ulx = Some(value.parse::<f64>().map_err(|_| bad(key))?),
            "uly" => uly = Some(value.parse::<f64>().map_err(|_| bad(key))?),
            "nodata" => nodata = Some(value.parse::<f32>().map_err(|_| bad(key))?),
            "band_names" => {
                band_names = Some(value.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>())
            }
            "data_type" => data_type = Some(value.to_string()),
            "interleave" => interleave = Some(value.to_string()),
            other => return Err(err(format!("line {}: unknown key `{other}`", lineno + 1))),
        }
    }
    let missing = |k: &str| err(format!("missing key `{k}`"));
    match data_type.as_deref() {
        Some("float32le") => {}
        Some(other) => return Err(err(format!("unsupported data_type `{other}`"))),
        None => return Err(missing("data_type")),
    }
    match interleave.as_deref() {
        Some("bsq") => {}
        Some(other) => return Err(err(format!("unsupported interleave `{other}`"))),
        None => return Err(missing("interleave")),
    }
    let header = Header {
        samples: samples.ok_or_else(|| missing("samples"))?,
        lines: lines.ok_or_else(|| missing("lines"))?,
        bands: bands.ok_or_else(|| missing("bands"))?,
        pixel_size: pixel_size.ok_or_else(|| missing("pixel_size"))?,
        ulx: ulx.ok_or_else(|| missing("ulx"))?,
        uly: uly.ok_or_else(|| missing("uly"))?,
        band_names: band_names.ok_or_else(|| missing("band_names"))?,
        nodata,
    };
    if header.band_names.len() != header.bands {
        return Err(err(format!(
            "{} band names for {} bands",
            header.band_names.len(),
            header.bands
        )));
    }
    Ok(header)
}

/// Reads a flat raster. `path` may be the stem or either of the two files.
pub fn read_raster(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let (hdr_path, bin_path) = stem_paths(path.as_ref());
    let text = fs::read_to_string(&hdr_path).map_err(|e| Error::io(&hdr_path, e))?;
    let h = parse_header(&text, &hdr_path)?;
    let geometry = GridGeometry::new(h.samples, h.lines, h.pixel_size, h.ulx, h.uly)?;
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let expected = (geometry.len() * h.bands * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::LengthMismatch {
            path: bin_path,
            expected,
            found: bytes.len() as u64,
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    RasterGrid::new(geometry, h.band_names, data, h.nodata)
}

fn header_text(raster: &RasterGrid) -> String {
    let g = raster.geometry();
    let mut s = String::new();
    let _ = writeln!(s, "samples = {}", g.width);
    let _ = writeln!(s, "lines = {}", g.height);
    let _ = writeln!(s, "bands = {}", raster.band_count());
    let _ = writeln!(s, "data_type = float32le");
    let _ = writeln!(s, "interleave = bsq");
    let _ = writeln!(s, "pixel_size = {}", g.pixel_size);
    let _ = writeln!(s, "ulx = {}", g.origin_x);
    let _ = writeln!(s, "uly = {}", g.origin_y);
    let _ = writeln!(s, "band_names = {}", raster.band_names().join(","));
    if let Some(nd) = raster.nodata() {
        let _ = writeln!(s, "nodata = {nd}");
    }
    s
}

/// Writes `<stem>.hdr` and `<stem>.bin`. Output bytes depend only on the raster.
pub fn write_raster(raster: &RasterGrid, path: impl AsRef<Path>) -> Result<()> {
    let (hdr_path, bin_path) = stem_paths(path.as_ref());
    let mut bytes = Vec::with_capacity(raster.data().len() * 4);
    for v in raster.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&hdr_path, header_text(raster)).map_err(|e| Error::io(&hdr_path, e))?;
    fs::write(&bin_path, bytes).map_err(|e| Error::io(&bin_path, e))?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    BinaryMask::from_raster(&read_raster(path)?)
}

pub fn write_mask(mask: &BinaryMask, band_name: &str, path: impl AsRef<Path>) -> Result<()> {
    write_raster(&mask.to_raster(band_name), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geometry(w: usize, h: usize) -> GridGeometry {
        GridGeometry::new(w, h, 0.8, 500_000.0, 4_400_000.0).unwrap()
    }

    #[test]
    fn zero_sample_is_four_zero_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("z");
        let r = RasterGrid::single_band(geometry(1, 1), "b", vec![0.0]).unwrap();
        write_raster(&r, &stem).unwrap();
        assert_eq!(fs::read(dir.path().join("z.bin")).unwrap(), vec![0, 0, 0, 0]);
    }

    #[test]
    fn writes_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let r = RasterGrid::new(
            geometry(3, 2),
            vec!["a".into(), "b".into()],
            (0..12).map(|v| v as f32 * 0.1).collect(),
            Some(-9999.0),
        )
        .unwrap();
        write_raster(&r, dir.path().join("one")).unwrap();
        write_raster(&r, dir.path().join("two")).unwrap();
        for ext in ["hdr", "bin"] {
            assert_eq!(
                fs::read(dir.path().join(format!("one.{ext}"))).unwrap(),
                fs::read(dir.path().join(format!("two.{ext}"))).unwrap()
            );
        }
    }

    #[test]
    fn second_band_follows_first() {
        let dir = tempfile::tempdir().unwrap();
        let r = RasterGrid::new(
            geometry(2, 2),
            vec!["a".into(), "b".into()],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
            None,
        )
        .unwrap();
        write_raster(&r, dir.path().join("r")).unwrap();
        let bytes = fs::read(dir.path().join("r.bin")).unwrap();
        let vals: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(vals, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn short_data_file_is_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let r = RasterGrid::single_band(geometry(2, 2), "b", vec![1.0; 4]).unwrap();
        write_raster(&r, dir.path().join("r")).unwrap();
        fs::write(dir.path().join("r.bin"), [0u8; 12]).unwrap();
        assert!(matches!(
            read_raster(dir.path().join("r")),
            Err(Error::LengthMismatch { expected: 16, found: 12, .. })
        ));
    }

    #[test]
    fn zero_pixel_size_is_geometry_error() {
        let dir = tempfile::tempdir().unwrap();
        let r = RasterGrid::single_band(geometry(1, 1), "b", vec![1.0]).unwrap();
        write_raster(&r, dir.path().join("r")).unwrap();
        let hdr = fs::read_to_string(dir.path().join("r.hdr")).unwrap();
        fs::write(
            dir.path().join("r.hdr"),
            hdr.replace("pixel_size = 0.8", "pixel_size = 0"),
        )
        .unwrap();
        assert!(matches!(read_raster(dir.path().join("r")), Err(Error::Geometry(_))));
    }

    #[test]
    fn missing_file_and_unknown_key() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_raster(dir.path().join("absent")),
            Err(Error::MissingArtifact(_))
        ));
        let r = RasterGrid::single_band(geometry(1, 1), "b", vec![1.0]).unwrap();
        write_raster(&r, dir.path().join("r")).unwrap();
        let mut hdr = fs::read_to_string(dir.path().join("r.hdr")).unwrap();
        hdr.push_str("colour = blue\n");
        fs::write(dir.path().join("r.hdr"), hdr).unwrap();
        assert!(matches!(read_raster(dir.path().join("r.hdr")), Err(Error::Header { .. })));
    }

    #[test]
    fn non_finite_sample_without_nodata_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let r = RasterGrid::single_band(geometry(2, 1), "b", vec![1.0, 2.0]).unwrap();
        write_raster(&r, dir.path().join("r")).unwrap();
        let mut bytes = fs::read(dir.path().join("r.bin")).unwrap();
        bytes[4..8].copy_from_slice(&f32::INFINITY.to_le_bytes());
        fs::write(dir.path().join("r.bin"), bytes).unwrap();
        assert!(matches!(
            read_raster(dir.path().join("r")),
            Err(Error::NonFinite { index: 1 })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn read_after_write_is_identity(
            w in 1usize..6,
            h in 1usize..6,
            bands in 1usize..4,
            px in 0.01f64..100.0,
            ox in -1e6f64..1e6,
            oy in -1e6f64..1e6,
            seed in any::<u64>(),
            with_nodata in any::<bool>(),
        ) {
            let g = GridGeometry::new(w, h, px, ox, oy).unwrap();
            let mut state = seed;
            let data: Vec<f32> = (0..w * h * bands)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    f32::from_bits(((state >> 33) as u32) & 0x7f7f_ffff)
                })
                .collect();
            let names = (0..bands).map(|b| format!("band{b}")).collect();
            let nodata = with_nodata.then_some(-1.5e-7f32);
            let r = RasterGrid::new(g, names, data, nodata).unwrap();
            let dir = tempfile::tempdir().unwrap();
            write_raster(&r, dir.path().join("p")).unwrap();
            let back = read_raster(dir.path().join("p")).unwrap();
            prop_assert_eq!(back.geometry(), r.geometry());
            prop_assert_eq!(back.band_names(), r.band_names());
            prop_assert_eq!(back.nodata().map(f32::to_bits), r.nodata().map(f32::to_bits));
            let a: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = r.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
