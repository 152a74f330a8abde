//! Scene bundles: `manifest.json` plus one NPY file per array.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CameraModel, CorrespondenceSet, Image, Mat3, PixelGrid, PointMap, ScenePair, Vec3, ViewBundle};

use super::npy::{read_npy, write_npy, NpyArray};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BUNDLE_VERSION: &str = "1.0.0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameConvention {
    CameraFrame,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewEntry {
    pub image_file: String,
    pub points_file: String,
    pub confidence_file: String,
    /// Row-major 3x3.
    pub intrinsics: Vec<f64>,
    /// Row-major 3x3, world from camera.
    pub rotation: Vec<f64>,
    pub translation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneBundleManifest {
    pub version: String,
    pub views: Vec<ViewEntry>,
    pub matches_file: String,
    pub frame_convention: FrameConvention,
    pub units: String,
}

pub(crate) fn mat_row_major(m: &Mat3) -> Vec<f64> {
    (0..3).flat_map(|r| (0..3).map(move |c| m[(r, c)])).collect()
}

pub fn read_manifest(dir: &Path) -> Result<SceneBundleManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: SceneBundleManifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if m.views.len() != 2 {
        return Err(Error::format(&path, format!("expected exactly 2 views, found {}", m.views.len())));
    }
    Ok(m)
}

fn expect_shape(path: &Path, a: &NpyArray, expected: &[Option<usize>], label: &str) -> Result<()> {
    let ok = a.shape.len() == expected.len() && a.shape.iter().zip(expected).all(|(s, e)| e.is_none_or(|e| e == *s));
    if ok {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            path: path.to_path_buf(),
            expected: label.to_string(),
            found: a.shape.clone(),
        })
    }
}

fn camera_from_entry(path: &Path, v: &ViewEntry) -> Result<CameraModel> {
    let fields = [("intrinsics", &v.intrinsics, 9), ("rotation", &v.rotation, 9), ("translation", &v.translation, 3)];
    for (name, vals, n) in fields {
        if vals.len() != n {
            return Err(Error::format(path, format!("{name} needs {n} values, found {}", vals.len())));
        }
        if vals.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidCamera(format!("{}: non-finite {name}", path.display())));
        }
    }
    CameraModel::new(
        Mat3::from_row_slice(&v.intrinsics),
        Mat3::from_row_slice(&v.rotation),
        Vec3::from_row_slice(&v.translation),
    )
}

fn to_vec3(data: &[f32]) -> Vec<Vec3> {
    data.chunks_exact(3)
        .map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64))
        .collect()
}

fn load_view(dir: &Path, v: &ViewEntry, confidence_threshold: f64, grid: &mut Option<PixelGrid>) -> Result<ViewBundle> {
    let manifest = dir.join(MANIFEST_FILE);
    let camera = camera_from_entry(&manifest, v)?;
    let image_path = dir.join(&v.image_file);
    let image = read_npy(&image_path)?;
    expect_shape(&image_path, &image, &[None, None, Some(3)], "(H, W, 3)")?;
    let (h, w) = (image.shape[0], image.shape[1]);
    let g = PixelGrid::new(w, h)?;
    if let Some(prev) = grid {
        if *prev != g {
            return Err(Error::ShapeMismatch {
                path: image_path,
                expected: format!("({}, {}, 3)", prev.height, prev.width),
                found: image.shape.clone(),
            });
        }
    }
    *grid = Some(g);

    let points_path = dir.join(&v.points_file);
    let points = read_npy(&points_path)?;
    expect_shape(&points_path, &points, &[Some(h), Some(w), Some(3)], &format!("({h}, {w}, 3)"))?;
    let conf_path = dir.join(&v.confidence_file);
    let conf = read_npy(&conf_path)?;
    expect_shape(&conf_path, &conf, &[Some(h), Some(w)], &format!("({h}, {w})"))?;

    let pts = to_vec3(&points.data);
    let confidence: Vec<f64> = conf.data.iter().map(|&c| c as f64).collect();
    let valid = confidence.iter().map(|&c| c >= confidence_threshold).collect();
    let pm = PointMap::new(g, pts, valid, confidence)?;
    ViewBundle::new(Image::new(g, to_vec3(&image.data))?, pm, camera)
}

/// Loads a two-view bundle. A pixel is valid when its point is finite and
/// its confidence is at least `confidence_threshold`.
pub fn load_bundle(dir: &Path, confidence_threshold: f64) -> Result<ScenePair> {
    let manifest = read_manifest(dir)?;
    let mut grid = None;
    let reference = load_view(dir, &manifest.views[0], confidence_threshold, &mut grid)?;
    let source = load_view(dir, &manifest.views[1], confidence_threshold, &mut grid)?;
    let mpath = dir.join(&manifest.matches_file);
    let m = read_npy(&mpath)?;
    expect_shape(&mpath, &m, &[None, Some(4)], "(N, 4)")?;
    let rows: Vec<&[f32]> = m.data.chunks_exact(4).collect();
    let set = CorrespondenceSet::new(
        rows.iter().map(|r| [r[0] as f64, r[1] as f64]).collect(),
        rows.iter().map(|r| [r[2] as f64, r[3] as f64]).collect(),
    )?;
    ScenePair::new(reference, source, set).map_err(|e| Error::format(&mpath, e.to_string()))
}

fn vec3_array(grid: PixelGrid, pts: impl Iterator<Item = Vec3>) -> NpyArray {
    NpyArray::new(
        vec![grid.height, grid.width, 3],
        pts.flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect(),
    )
}

/// Points of a map with invalid pixels written as NaN.
pub(crate) fn masked_points(pm: &PointMap) -> NpyArray {
    let nan = Vec3::repeat(f64::NAN);
    vec3_array(pm.grid, pm.points.iter().zip(&pm.valid).map(|(p, &v)| if v { *p } else { nan }))
}

pub fn save_bundle(pair: &ScenePair, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut views = Vec::new();
    for (name, view) in [("ref", &pair.reference), ("src", &pair.source)] {
        let grid = view.grid();
        let entry = ViewEntry {
            image_file: format!("{name}_image.npy"),
            points_file: format!("{name}_points.npy"),
            confidence_file: format!("{name}_confidence.npy"),
            intrinsics: mat_row_major(view.camera.intrinsics()),
            rotation: mat_row_major(view.camera.rotation()),
            translation: view.camera.translation().iter().copied().collect(),
        };
        write_npy(&dir.join(&entry.image_file), &vec3_array(grid, view.image.rgb.iter().copied()))?;
        write_npy(&dir.join(&entry.points_file), &masked_points(&view.pointmap))?;
        let conf = NpyArray::new(
            vec![grid.height, grid.width],
            view.pointmap.confidence.iter().map(|&c| c as f32).collect(),
        );
        write_npy(&dir.join(&entry.confidence_file), &conf)?;
        views.push(entry);
    }
    let m = &pair.matches;
    let data = (0..m.len())
        .flat_map(|k| {
            let (a, b) = (m.ref_pixels[k], m.src_pixels[k]);
            [a[0] as f32, a[1] as f32, b[0] as f32, b[1] as f32]
        })
        .collect();
    let manifest = SceneBundleManifest {
        version: BUNDLE_VERSION.into(),
        views,
        matches_file: "matches.npy".into(),
        frame_convention: FrameConvention::CameraFrame,
        units: "scene units".into(),
    };
    write_npy(&dir.join(&manifest.matches_file), &NpyArray::new(vec![m.len(), 4], data))?;
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}
