//! Result directories: refined arrays, alignment, loss trace, cameras and a
//! merged PLY cloud.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{RefinementState, REF, SRC};
use crate::model::{AffineAlignment, CameraModel, Image, Mat3, NormalMap, PointMap, Vec3};
use crate::optimizer::LossTrace;

use super::bundle::{mat_row_major, masked_points};
use super::npy::{read_npy, write_npy, NpyArray};

pub const ALIGNMENT_FILE: &str = "alignment.json";
pub const CAMERAS_FILE: &str = "cameras.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const PLY_FILE: &str = "merged.ply";
pub const VIEW_NAMES: [&str; 2] = ["ref", "src"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentFile {
    pub scale: f64,
    pub shift: [f64; 3],
    pub s_ref: f64,
    pub s_src: f64,
}

impl AlignmentFile {
    pub fn new(a: &AffineAlignment, s: [f64; 2]) -> Self {
        Self {
            scale: a.scale,
            shift: a.shift.into(),
            s_ref: s[REF],
            s_src: s[SRC],
        }
    }

    pub fn alignment(&self) -> Result<AffineAlignment> {
        AffineAlignment::new(self.scale, Vec3::from(self.shift))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    pub intrinsics: Vec<f64>,
    pub rotation: Vec<f64>,
    pub translation: Vec<f64>,
}

impl CameraEntry {
    pub fn new(cam: &CameraModel) -> Self {
        Self {
            intrinsics: mat_row_major(cam.intrinsics()),
            rotation: mat_row_major(cam.rotation()),
            translation: cam.translation().iter().copied().collect(),
        }
    }

    pub fn camera(&self) -> Result<CameraModel> {
        if self.intrinsics.len() != 9 || self.rotation.len() != 9 || self.translation.len() != 3 {
            return Err(Error::InvalidCamera("camera entry needs 9 + 9 + 3 values".into()));
        }
        CameraModel::new(
            Mat3::from_row_slice(&self.intrinsics),
            Mat3::from_row_slice(&self.rotation),
            Vec3::from_row_slice(&self.translation),
        )
    }
}

/// What `save_result` writes.
pub struct RefinementResult<'a> {
    pub state: &'a RefinementState,
    pub alignment: &'a AffineAlignment,
    pub trace: &'a LossTrace,
    pub images: [&'a Image; 2],
    pub cameras: [&'a CameraModel; 2],
}

/// Arrays read back from a result directory.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedResult {
    pub points: [NpyArray; 2],
    pub normals: [NpyArray; 2],
    pub alignment: AlignmentFile,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn masked_normals(nm: &NormalMap) -> NpyArray {
    let g = nm.grid;
    NpyArray::new(
        vec![g.height, g.width, 3],
        nm.normals
            .iter()
            .zip(&nm.valid)
            .flat_map(|(n, &v)| if v { [n.x as f32, n.y as f32, n.z as f32] } else { [f32::NAN; 3] })
            .collect(),
    )
}

/// Writes `{prefix}_points_{ref,src}.npy` with invalid pixels as NaN.
pub fn write_point_maps(dir: &Path, prefix: &str, maps: [&PointMap; 2]) -> Result<()> {
    for (name, pm) in VIEW_NAMES.iter().zip(maps) {
        write_npy(&dir.join(format!("{prefix}_points_{name}.npy")), &masked_points(pm))?;
    }
    Ok(())
}

pub fn write_cameras(dir: &Path, cameras: [&CameraModel; 2]) -> Result<()> {
    write_json(&dir.join(CAMERAS_FILE), &[CameraEntry::new(cameras[0]), CameraEntry::new(cameras[1])])
}

pub fn read_cameras(dir: &Path) -> Result<[CameraModel; 2]> {
    let entries: [CameraEntry; 2] = read_json(&dir.join(CAMERAS_FILE))?;
    Ok([entries[0].camera()?, entries[1].camera()?])
}

pub fn save_result(dir: &Path, r: &RefinementResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let st = r.state;
    write_point_maps(dir, "refined", [&st.points[REF], &st.points[SRC]])?;
    for (v, name) in VIEW_NAMES.iter().enumerate() {
        write_npy(&dir.join(format!("refined_normals_{name}.npy")), &masked_normals(&st.normals[v]))?;
    }
    write_json(&dir.join(ALIGNMENT_FILE), &AlignmentFile::new(r.alignment, st.scale))?;
    write_text(&dir.join(TRACE_FILE), &r.trace.to_csv())?;
    write_cameras(dir, r.cameras)?;
    write_ply(&dir.join(PLY_FILE), [&st.points[REF], &st.points[SRC]], r.images)
}

pub fn load_result(dir: &Path) -> Result<LoadedResult> {
    let read = |kind: &str, name: &str| read_npy(&dir.join(format!("refined_{kind}_{name}.npy")));
    Ok(LoadedResult {
        points: [read("points", "ref")?, read("points", "src")?],
        normals: [read("normals", "ref")?, read("normals", "src")?],
        alignment: read_json(&dir.join(ALIGNMENT_FILE))?,
    })
}

fn to_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary little-endian PLY of the valid points of both views, colored by
/// their images.
pub fn write_ply(path: &Path, maps: [&PointMap; 2], images: [&Image; 2]) -> Result<()> {
    let count: usize = maps.iter().map(|m| m.valid_count()).sum();
    let mut out = Vec::with_capacity(256 + 15 * count);
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {count}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n"
    )
    .expect("writing to a Vec");
    for (pm, img) in maps.iter().zip(images) {
        for i in pm.valid_indices() {
            let p = pm.points[i];
            for x in [p.x, p.y, p.z] {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
            let c = img.rgb[i];
            out.extend_from_slice(&[to_u8(c.x), to_u8(c.y), to_u8(c.z)]);
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Vertex count from a PLY header.
pub fn ply_vertex_count(path: &Path) -> Result<usize> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let end = bytes
        .windows(11)
        .position(|w| w == b"end_header\n")
        .ok_or_else(|| Error::format(path, "no PLY header"))?;
    let header = String::from_utf8_lossy(&bytes[..end]);
    header
        .lines()
        .find_map(|l| l.strip_prefix("element vertex "))
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| Error::format(path, "no vertex element"))
}
