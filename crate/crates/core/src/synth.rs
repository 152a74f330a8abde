//! Synthetic two-view scenes with exact ground truth.
//!
//! Surfaces are ray-cast per pixel. Each view's world points are distorted
//! by a per-view affine map, moved to the camera frame, and perturbed by
//! isotropic Gaussian noise with standard deviation `noise_sigma * depth`.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::npy::{read_npz, write_npz, NpyArray};
use crate::model::{AffineAlignment, CameraModel, CorrespondenceSet, Image, Mat3, PixelGrid, PointMap, ScenePair, Vec3, ViewBundle};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Surface {
    /// Points with `normal . X = offset`.
    Plane { normal: [f64; 3], offset: f64 },
    /// Two half-planes meeting along the y axis at depth `depth`, with the
    /// given interior angle in degrees (180 is flat).
    TwoPlanes { dihedral_deg: f64, depth: f64 },
    Sphere { center: [f64; 3], radius: f64 },
    /// Treads at `z = depth - k * step_height` for `x` in
    /// `[k * step_width, (k + 1) * step_width)`, joined by risers.
    Staircase {
        step_height: f64,
        #[serde(default = "default_step_width")]
        step_width: f64,
        depth: f64,
    },
}

fn default_step_width() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    /// Row-major 3x3 intrinsics.
    pub intrinsics: [f64; 9],
    #[serde(default = "identity9")]
    pub rotation: [f64; 9],
    #[serde(default)]
    pub translation: [f64; 3],
}

fn identity9() -> [f64; 9] {
    [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
}

impl CameraSpec {
    pub fn camera(&self) -> Result<CameraModel> {
        CameraModel::new(
            Mat3::from_row_slice(&self.intrinsics),
            Mat3::from_row_slice(&self.rotation),
            Vec3::from(self.translation),
        )
    }

    pub fn from_camera(cam: &CameraModel) -> Self {
        let flat = |m: &Mat3| {
            let mut out = [0.0; 9];
            for r in 0..3 {
                for c in 0..3 {
                    out[3 * r + c] = m[(r, c)];
                }
            }
            out
        };
        Self {
            intrinsics: flat(cam.intrinsics()),
            rotation: flat(cam.rotation()),
            translation: (*cam.translation()).into(),
        }
    }
}

fn default_period() -> usize {
    8
}

fn identity_pair() -> [AffineAlignment; 2] {
    [AffineAlignment::identity(), AffineAlignment::identity()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub surface: Surface,
    pub width: usize,
    pub height: usize,
    /// Reference camera first.
    pub cameras: [CameraSpec; 2],
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "identity_pair")]
    pub distortion: [AffineAlignment; 2],
    #[serde(default)]
    pub outlier_fraction: f64,
    /// Checker period in reference-image pixels; 0 gives uniform albedo.
    #[serde(default = "default_period")]
    pub checker_period: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    /// Fronto-parallel plane at `depth` seen by two cameras `baseline`
    /// apart along x, focal length `focal`, principal point at the center.
    pub fn plane_pair(width: usize, height: usize, focal: f64, depth: f64, baseline: f64) -> Self {
        let cam = CameraModel::simple(focal, width, height);
        let ref_cam = CameraSpec::from_camera(&cam);
        let mut src_cam = ref_cam.clone();
        src_cam.translation = [baseline, 0.0, 0.0];
        Self {
            surface: Surface::Plane {
                normal: [0.0, 0.0, 1.0],
                offset: depth,
            },
            width,
            height,
            cameras: [ref_cam, src_cam],
            noise_sigma: 0.0,
            distortion: identity_pair(),
            outlier_fraction: 0.0,
            checker_period: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    /// Undistorted world points per view; NaN where the ray misses.
    pub true_points: [Vec<Vec3>; 2],
    /// Affine distortion applied to each view.
    pub distortion: [AffineAlignment; 2],
    /// Per match: true correspondence or injected outlier.
    pub inlier_labels: Vec<bool>,
}

impl GroundTruth {
    /// The map taking distorted source points onto distorted reference
    /// points.
    pub fn expected_alignment(&self) -> AffineAlignment {
        self.distortion[0].compose(&self.distortion[1].inverse())
    }
}

#[derive(Clone, Debug)]
pub struct SynthScene {
    pub pair: ScenePair,
    pub truth: GroundTruth,
}

/// Smallest positive ray parameter at which `o + t d` meets the surface.
pub fn ray_cast(surface: &Surface, o: &Vec3, d: &Vec3) -> Option<f64> {
    let plane = |n: Vec3, offset: f64| -> Option<f64> {
        let den = n.dot(d);
        if den.abs() < 1e-15 {
            return None;
        }
        let t = (offset - n.dot(o)) / den;
        (t > 0.0).then_some(t)
    };
    let min = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    };
    match surface {
        Surface::Plane { normal, offset } => plane(Vec3::from(*normal), *offset),
        Surface::TwoPlanes { dihedral_deg, depth } => {
            let slope = ((PI - dihedral_deg.to_radians()) / 2.0).tan();
            // z - slope * x = depth for x >= 0, z + slope * x = depth for x <= 0
            let right = plane(Vec3::new(-slope, 0.0, 1.0), *depth).filter(|t| o.x + t * d.x >= 0.0);
            let left = plane(Vec3::new(slope, 0.0, 1.0), *depth).filter(|t| o.x + t * d.x <= 0.0);
            min(right, left)
        }
        Surface::Sphere { center, radius } => {
            let oc = o - Vec3::from(*center);
            let a = d.dot(d);
            let b = 2.0 * oc.dot(d);
            let c = oc.dot(&oc) - radius * radius;
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            let t0 = (-b - sq) / (2.0 * a);
            let t1 = (-b + sq) / (2.0 * a);
            [t0, t1].into_iter().find(|&t| t > 0.0)
        }
        Surface::Staircase {
            step_height,
            step_width,
            depth,
        } => {
            let mut best = None;
            for k in -64i32..=64 {
                let k = k as f64;
                let (x0, x1) = (k * step_width, (k + 1.0) * step_width);
                let tread = plane(Vec3::new(0.0, 0.0, 1.0), depth - k * step_height).filter(|t| {
                    let x = o.x + t * d.x;
                    x >= x0 && x < x1
                });
                // riser at x0 between the treads of steps k - 1 and k
                let (za, zb) = (depth - k * step_height, depth - (k - 1.0) * step_height);
                let riser = plane(Vec3::new(1.0, 0.0, 0.0), x0).filter(|t| {
                    let z = o.z + t * d.z;
                    z >= za.min(zb) && z <= za.max(zb)
                });
                best = min(best, min(tread, riser));
            }
            best
        }
    }
}

fn checker(period: usize, row: f64, col: f64) -> Vec3 {
    const LIGHT: [f64; 3] = [0.85, 0.75, 0.6];
    const DARK: [f64; 3] = [0.2, 0.3, 0.45];
    if period == 0 || !row.is_finite() || !col.is_finite() {
        return Vec3::repeat(0.5);
    }
    let p = period as f64;
    let parity = ((row / p).floor() + (col / p).floor()).rem_euclid(2.0);
    if parity == 0.0 {
        Vec3::from(LIGHT)
    } else {
        Vec3::from(DARK)
    }
}

pub fn generate(spec: &SceneSpec) -> Result<SynthScene> {
    if !(0.0..0.5).contains(&spec.outlier_fraction) {
        return Err(Error::InvalidConfig(format!(
            "outlier_fraction must be in [0, 0.5), got {}",
            spec.outlier_fraction
        )));
    }
    if !(spec.noise_sigma.is_finite() && spec.noise_sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise_sigma must be >= 0, got {}", spec.noise_sigma)));
    }
    for d in &spec.distortion {
        AffineAlignment::new(d.scale, d.shift)?;
    }
    let grid = PixelGrid::new(spec.width, spec.height)?;
    let cams = [spec.cameras[0].camera()?, spec.cameras[1].camera()?];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut true_points: [Vec<Vec3>; 2] = [Vec::new(), Vec::new()];
    for v in 0..2 {
        let cam = &cams[v];
        let o = cam.center();
        let pts: Vec<Vec3> = (0..grid.len())
            .map(|i| {
                let (r, c) = grid.row_col(i);
                let d = cam.rotation() * cam.pixel_direction(r as f64, c as f64);
                ray_cast(&spec.surface, &o, &d).map_or(Vec3::repeat(f64::NAN), |t| o + t * d)
            })
            .collect();
        let missed = pts.iter().filter(|p| !p.x.is_finite()).count();
        if 2 * missed > grid.len() {
            return Err(Error::SurfaceMiss {
                missed,
                total: grid.len(),
            });
        }
        true_points[v] = pts;
    }

    let mut views = Vec::with_capacity(2);
    for v in 0..2 {
        let cam = &cams[v];
        let mut points = Vec::with_capacity(grid.len());
        let mut rgb = Vec::with_capacity(grid.len());
        for (i, x) in true_points[v].iter().enumerate() {
            if !x.x.is_finite() {
                points.push(Vec3::repeat(f64::NAN));
                rgb.push(Vec3::repeat(0.5));
                continue;
            }
            let depth = cam.to_camera(x).z;
            let mut p = cam.to_camera(&spec.distortion[v].apply(x));
            if spec.noise_sigma > 0.0 {
                let n = Normal::new(0.0, spec.noise_sigma * depth).expect("positive std");
                p += Vec3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng));
            }
            points.push(p);
            let color = if v == 0 {
                let (r, c) = grid.row_col(i);
                checker(spec.checker_period, r as f64, c as f64)
            } else {
                cams[0]
                    .project(x)
                    .map_or(Vec3::repeat(0.5), |(r, c)| checker(spec.checker_period, r, c))
            };
            rgb.push(color);
        }
        let confidence = points.iter().map(|p| if p.x.is_finite() { 1.0 } else { 0.0 }).collect();
        let valid = points.iter().map(|p| p.x.is_finite()).collect();
        let pm = PointMap::new(grid, points, valid, confidence)?;
        views.push(ViewBundle::new(Image::new(grid, rgb)?, pm, cam.clone())?);
    }

    // true matches: reference surface points visible in the source within
    // half a pixel of a source pixel center
    let mut matches: Vec<([f64; 2], [f64; 2], bool)> = Vec::new();
    let src_center = cams[1].center();
    for (i, x) in true_points[0].iter().enumerate() {
        if !x.x.is_finite() {
            continue;
        }
        let Some((sr, sc)) = cams[1].project(x) else { continue };
        let (nr, nc) = (sr.round(), sc.round());
        if !grid.contains(nr as isize, nc as isize) || (sr - nr).hypot(sc - nc) >= 0.5 {
            continue;
        }
        let to_x = x - src_center;
        let visible = ray_cast(&spec.surface, &src_center, &to_x).is_some_and(|t| t >= 1.0 - 1e-9);
        if !visible {
            continue;
        }
        let (r, c) = grid.row_col(i);
        matches.push(([r as f64, c as f64], [sr, sc], true));
    }
    let n_true = matches.len();
    let f = spec.outlier_fraction;
    let n_out = (f * n_true as f64 / (1.0 - f)).round() as usize;
    for _ in 0..n_out {
        let a = [rng.random_range(0..spec.height) as f64, rng.random_range(0..spec.width) as f64];
        let b = [rng.random_range(0..spec.height) as f64, rng.random_range(0..spec.width) as f64];
        matches.push((a, b, false));
    }
    matches.shuffle(&mut rng);

    let labels = matches.iter().map(|m| m.2).collect();
    let set = CorrespondenceSet::new(matches.iter().map(|m| m.0).collect(), matches.iter().map(|m| m.1).collect())?;
    let src = views.pop().expect("two views");
    let reference = views.pop().expect("two views");
    Ok(SynthScene {
        pair: ScenePair::new(reference, src, set)?,
        truth: GroundTruth {
            true_points,
            distortion: spec.distortion,
            inlier_labels: labels,
        },
    })
}

pub const GROUND_TRUTH_FILE: &str = "ground_truth.npz";

fn points_array(grid: PixelGrid, pts: &[Vec3]) -> NpyArray {
    NpyArray::new(
        vec![grid.height, grid.width, 3],
        pts.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect(),
    )
}

/// Writes the bundle plus `ground_truth.npz`.
pub fn write_bundle(scene: &SynthScene, dir: &Path) -> Result<()> {
    crate::io::bundle::save_bundle(&scene.pair, dir)?;
    let grid = scene.pair.reference.grid();
    let t = &scene.truth;
    let alpha = NpyArray::new(vec![2], t.distortion.iter().map(|d| d.scale as f32).collect());
    let beta = NpyArray::new(
        vec![2, 3],
        t.distortion.iter().flat_map(|d| [d.shift.x as f32, d.shift.y as f32, d.shift.z as f32]).collect(),
    );
    let labels = NpyArray::new(
        vec![t.inlier_labels.len()],
        t.inlier_labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect(),
    );
    write_npz(
        &dir.join(GROUND_TRUTH_FILE),
        &[
            ("true_points_ref", &points_array(grid, &t.true_points[0])),
            ("true_points_src", &points_array(grid, &t.true_points[1])),
            ("true_alpha", &alpha),
            ("true_beta", &beta),
            ("inlier_labels", &labels),
        ],
    )
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let arrays = read_npz(path)?;
    let get = |name: &str| {
        arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, a)| a)
            .ok_or_else(|| Error::format(path, format!("missing array {name}")))
    };
    let points = |name: &str| -> Result<Vec<Vec3>> {
        let a = get(name)?;
        if a.shape.len() != 3 || a.shape[2] != 3 {
            return Err(Error::ShapeMismatch {
                path: path.join(name),
                expected: "(H, W, 3)".into(),
                found: a.shape.clone(),
            });
        }
        Ok(a.data.chunks_exact(3).map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64)).collect())
    };
    let alpha = get("true_alpha")?;
    let beta = get("true_beta")?;
    if alpha.shape != [2] || beta.shape != [2, 3] {
        return Err(Error::format(path, "true_alpha must be (2,) and true_beta (2, 3)"));
    }
    let distortion = [0, 1].map(|v| AffineAlignment {
        scale: alpha.data[v] as f64,
        shift: Vec3::new(beta.data[3 * v] as f64, beta.data[3 * v + 1] as f64, beta.data[3 * v + 2] as f64),
    });
    Ok(GroundTruth {
        true_points: [points("true_points_ref")?, points("true_points_src")?],
        distortion,
        inlier_labels: get("inlier_labels")?.data.iter().map(|&l| l != 0.0).collect(),
    })
}
