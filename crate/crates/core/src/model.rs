//! Domain types shared by every stage of the pipeline.
//!
//! Pixels are addressed as `(row, col)` and stored row-major, so the flat
//! index of a pixel is `row * width + col`. A pixel's continuous image
//! coordinate is its center, `(col + 0.5, row + 0.5)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelGrid {
    pub width: usize,
    pub height: usize,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidGrid { width, height });
        }
        Ok(Self { width, height })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn row_col(&self, idx: usize) -> (usize, usize) {
        (idx / self.width, idx % self.width)
    }

    #[inline]
    pub fn contains(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    /// Index of the pixel nearest to a subpixel `(row, col)` position, if inside.
    pub fn nearest(&self, row: f64, col: f64) -> Option<usize> {
        if !row.is_finite() || !col.is_finite() {
            return None;
        }
        let (r, c) = (row.round() as isize, col.round() as isize);
        self.contains(r, c)
            .then(|| self.index(r as usize, c as usize))
    }

    /// Flat indices of the in-bounds pixels in the square window of `radius`
    /// around `idx`, in row-major order, including `idx` itself.
    pub fn window(&self, idx: usize, radius: usize) -> impl Iterator<Item = usize> + '_ {
        let (row, col) = self.row_col(idx);
        let r = radius as isize;
        let (row, col) = (row as isize, col as isize);
        (-r..=r).flat_map(move |dr| {
            (-r..=r).filter_map(move |dc| {
                let (rr, cc) = (row + dr, col + dc);
                self.contains(rr, cc)
                    .then(|| self.index(rr as usize, cc as usize))
            })
        })
    }
}

/// Per-pixel 3D points with validity and confidence.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMap {
    pub grid: PixelGrid,
    pub points: Vec<Vec3>,
    pub valid: Vec<bool>,
    pub confidence: Vec<f64>,
}

impl PointMap {
    pub fn new(grid: PixelGrid, points: Vec<Vec3>, valid: Vec<bool>, confidence: Vec<f64>) -> Result<Self> {
        for len in [points.len(), valid.len(), confidence.len()] {
            if len != grid.len() {
                return Err(Error::LengthMismatch {
                    expected: grid.len(),
                    found: len,
                });
            }
        }
        // Invalid pixels may hold anything; valid ones must be usable.
        let valid = valid
            .iter()
            .zip(&points)
            .zip(&confidence)
            .map(|((&v, p), c)| v && p.iter().all(|x| x.is_finite()) && c.is_finite())
            .collect();
        Ok(Self {
            grid,
            points,
            valid,
            confidence,
        })
    }

    /// Validity from finiteness, unit confidence everywhere.
    pub fn from_points(grid: PixelGrid, points: Vec<Vec3>) -> Result<Self> {
        let n = points.len();
        Self::new(grid, points, vec![true; n], vec![1.0; n])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn valid_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.valid.iter().enumerate().filter_map(|(i, &v)| v.then_some(i))
    }

    /// Mask `m`: valid and confidence at or above `threshold`.
    pub fn confidence_mask(&self, threshold: f64) -> Vec<bool> {
        self.valid
            .iter()
            .zip(&self.confidence)
            .map(|(&v, &c)| v && c >= threshold)
            .collect()
    }

    /// Applies `f` to every valid point.
    pub fn map_valid(&self, f: impl Fn(&Vec3) -> Vec3) -> PointMap {
        let points = self
            .points
            .iter()
            .zip(&self.valid)
            .map(|(p, &v)| if v { f(p) } else { *p })
            .collect();
        PointMap {
            grid: self.grid,
            points,
            valid: self.valid.clone(),
            confidence: self.confidence.clone(),
        }
    }
}

/// Per-pixel unit normals.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalMap {
    pub grid: PixelGrid,
    pub normals: Vec<Vec3>,
    pub valid: Vec<bool>,
}

impl NormalMap {
    pub fn rotated(&self, rotation: &Mat3) -> NormalMap {
        NormalMap {
            grid: self.grid,
            normals: self.normals.iter().map(|n| rotation * n).collect(),
            valid: self.valid.clone(),
        }
    }
}

/// RGB image with channels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub grid: PixelGrid,
    pub rgb: Vec<Vec3>,
}

impl Image {
    pub fn new(grid: PixelGrid, rgb: Vec<Vec3>) -> Result<Self> {
        if rgb.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: rgb.len(),
            });
        }
        Ok(Self { grid, rgb })
    }

    pub fn constant(grid: PixelGrid, color: Vec3) -> Self {
        Self {
            grid,
            rgb: vec![color; grid.len()],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

/// Pinhole camera: intrinsics `K` and a world-from-camera pose, so that a
/// camera-frame point `p` sits at `R p + t` in the world.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraModel {
    intrinsics: Mat3,
    intrinsics_inv: Mat3,
    rotation: Mat3,
    translation: Vec3,
}

impl CameraModel {
    pub fn new(intrinsics: Mat3, rotation: Mat3, translation: Vec3) -> Result<Self> {
        let k = &intrinsics;
        if k.iter().any(|x| !x.is_finite())
            || rotation.iter().any(|x| !x.is_finite())
            || translation.iter().any(|x| !x.is_finite())
        {
            return Err(Error::InvalidCamera("non-finite entry".into()));
        }
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(Error::InvalidCamera("intrinsics must be upper-triangular".into()));
        }
        if k[(0, 0)] <= 0.0 || k[(1, 1)] <= 0.0 || k[(2, 2)] <= 0.0 {
            return Err(Error::InvalidCamera("intrinsics must have positive diagonal".into()));
        }
        let intrinsics_inv = intrinsics
            .try_inverse()
            .ok_or_else(|| Error::InvalidCamera("singular intrinsics".into()))?;
        let ortho = (rotation.transpose() * rotation - Mat3::identity()).abs().max();
        if ortho > 1e-9 {
            return Err(Error::InvalidCamera(format!(
                "rotation is not orthonormal (|R^T R - I| = {ortho:e})"
            )));
        }
        if rotation.determinant() <= 0.0 {
            return Err(Error::InvalidCamera("rotation has negative determinant".into()));
        }
        Ok(Self {
            intrinsics,
            intrinsics_inv,
            rotation,
            translation,
        })
    }

    /// Identity pose with focal length `f` and the principal point at the
    /// center of a `width x height` image.
    pub fn simple(f: f64, width: usize, height: usize) -> Self {
        let k = Mat3::new(f, 0.0, width as f64 / 2.0, 0.0, f, height as f64 / 2.0, 0.0, 0.0, 1.0);
        Self::new(k, Mat3::identity(), Vec3::zeros()).expect("valid by construction")
    }

    pub fn with_pose(&self, rotation: Mat3, translation: Vec3) -> Result<Self> {
        Self::new(self.intrinsics, rotation, translation)
    }

    pub fn intrinsics(&self) -> &Mat3 {
        &self.intrinsics
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        self.translation
    }

    pub fn to_world(&self, p_cam: &Vec3) -> Vec3 {
        self.rotation * p_cam + self.translation
    }

    pub fn to_camera(&self, p_world: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p_world - self.translation)
    }

    /// Camera-frame direction through a pixel center with unit depth (z = 1).
    pub fn pixel_direction(&self, row: f64, col: f64) -> Vec3 {
        let d = self.intrinsics_inv * Vec3::new(col + 0.5, row + 0.5, 1.0);
        d / d.z
    }

    pub fn viewing_ray(&self, row: f64, col: f64) -> Ray {
        let d = self.intrinsics_inv * Vec3::new(col + 0.5, row + 0.5, 1.0);
        Ray {
            origin: self.center(),
            direction: self.rotation * d.normalize(),
        }
    }

    /// Continuous `(row, col)` of the projection of a world point, or `None`
    /// when it lies behind the camera.
    pub fn project(&self, p_world: &Vec3) -> Option<(f64, f64)> {
        let pc = self.to_camera(p_world);
        if pc.z <= 0.0 {
            return None;
        }
        let uv = self.intrinsics * (pc / pc.z);
        Some((uv.y - 0.5, uv.x - 0.5))
    }

    /// Camera for an image downsampled by `factor` in both axes, keeping
    /// pixel footprints aligned.
    pub fn downscaled(&self, factor: f64) -> Self {
        let s = Mat3::new(1.0 / factor, 0.0, 0.0, 0.0, 1.0 / factor, 0.0, 0.0, 0.0, 1.0);
        let k = s * self.intrinsics;
        let intrinsics_inv = k.try_inverse().expect("scaled intrinsics stay invertible");
        Self {
            intrinsics: k,
            intrinsics_inv,
            rotation: self.rotation,
            translation: self.translation,
        }
    }
}

/// Maps camera-frame points into the world frame.
pub fn transform_to_world(pm: &PointMap, cam: &CameraModel) -> PointMap {
    pm.map_valid(|p| cam.to_world(p))
}

/// Maps world-frame points back into the camera frame.
pub fn transform_to_camera(pm: &PointMap, cam: &CameraModel) -> PointMap {
    pm.map_valid(|p| cam.to_camera(p))
}

/// Unit viewing ray through the center of pixel `(row, col)`, in world frame.
pub fn viewing_ray(cam: &CameraModel, row: usize, col: usize) -> Ray {
    cam.viewing_ray(row as f64, col as f64)
}

/// Matched subpixel positions `(row, col)` between the reference and source views.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceSet {
    pub ref_pixels: Vec<[f64; 2]>,
    pub src_pixels: Vec<[f64; 2]>,
    pub inlier: Vec<bool>,
}

impl CorrespondenceSet {
    pub fn new(ref_pixels: Vec<[f64; 2]>, src_pixels: Vec<[f64; 2]>) -> Result<Self> {
        if ref_pixels.len() != src_pixels.len() {
            return Err(Error::LengthMismatch {
                expected: ref_pixels.len(),
                found: src_pixels.len(),
            });
        }
        let inlier = vec![true; ref_pixels.len()];
        Ok(Self {
            ref_pixels,
            src_pixels,
            inlier,
        })
    }

    pub fn len(&self) -> usize {
        self.ref_pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ref_pixels.is_empty()
    }

    pub fn inlier_count(&self) -> usize {
        self.inlier.iter().filter(|&&v| v).count()
    }

    /// Rounded `(ref index, src index, match index)` for inlier matches
    /// whose pixels are valid in both maps.
    pub fn usable<'a>(
        &'a self,
        ref_pm: &'a PointMap,
        src_pm: &'a PointMap,
    ) -> impl Iterator<Item = (usize, usize, usize)> + 'a {
        (0..self.len()).filter_map(move |m| {
            if !self.inlier[m] {
                return None;
            }
            let [rr, rc] = self.ref_pixels[m];
            let [sr, sc] = self.src_pixels[m];
            let i = ref_pm.grid.nearest(rr, rc)?;
            let j = src_pm.grid.nearest(sr, sc)?;
            (ref_pm.valid[i] && src_pm.valid[j]).then_some((i, j, m))
        })
    }
}

/// Scale-and-shift map `p -> scale * p + shift`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineAlignment {
    pub scale: f64,
    pub shift: Vec3,
}

impl AffineAlignment {
    pub fn new(scale: f64, shift: Vec3) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) || shift.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alignment scale must be positive and finite, got {scale}"
            )));
        }
        Ok(Self { scale, shift })
    }

    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            shift: Vec3::zeros(),
        }
    }

    #[inline]
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.scale * p + self.shift
    }

    pub fn inverse(&self) -> Self {
        Self {
            scale: 1.0 / self.scale,
            shift: -self.shift / self.scale,
        }
    }

    /// `self` after `other`.
    pub fn compose(&self, other: &AffineAlignment) -> Self {
        Self {
            scale: self.scale * other.scale,
            shift: self.scale * other.shift + self.shift,
        }
    }
}

/// One view's inputs. The point map is in the camera frame as loaded.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewBundle {
    pub image: Image,
    pub pointmap: PointMap,
    pub camera: CameraModel,
    pub normals: NormalMap,
}

impl ViewBundle {
    /// Bundles a camera-frame point map with its image and camera, deriving
    /// camera-frame normals.
    pub fn new(image: Image, pointmap: PointMap, camera: CameraModel) -> Result<Self> {
        if image.grid != pointmap.grid {
            return Err(Error::LengthMismatch {
                expected: pointmap.grid.len(),
                found: image.grid.len(),
            });
        }
        let origin = Vec3::zeros();
        let normals = crate::normals::normals_toward(&pointmap, &origin);
        Ok(Self {
            image,
            pointmap,
            camera,
            normals,
        })
    }

    pub fn grid(&self) -> PixelGrid {
        self.pointmap.grid
    }

    pub fn world_points(&self) -> PointMap {
        transform_to_world(&self.pointmap, &self.camera)
    }

    pub fn world_normals(&self) -> NormalMap {
        self.normals.rotated(self.camera.rotation())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenePair {
    pub reference: ViewBundle,
    pub source: ViewBundle,
    pub matches: CorrespondenceSet,
}

impl ScenePair {
    pub fn new(reference: ViewBundle, source: ViewBundle, matches: CorrespondenceSet) -> Result<Self> {
        if reference.grid() != source.grid() {
            return Err(Error::InvalidConfig("reference and source grids differ".into()));
        }
        let grid = reference.grid();
        for px in matches.ref_pixels.iter().chain(&matches.src_pixels) {
            if grid.nearest(px[0], px[1]).is_none() {
                return Err(Error::InvalidConfig(format!(
                    "match ({}, {}) lies outside the {}x{} grid",
                    px[0], px[1], grid.width, grid.height
                )));
            }
        }
        Ok(Self {
            reference,
            source,
            matches,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    /// Inlier threshold in scene units; `None` picks 0.05 x median reference depth.
    pub threshold: Option<f64>,
    pub max_iters: usize,
    pub enabled: bool,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            threshold: None,
            max_iters: 500,
            enabled: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementConfig {
    pub gamma: f64,
    pub rho: f64,
    pub sigma_int: f64,
    pub sigma_spa: f64,
    pub lambda_p: f64,
    pub lambda_r: f64,
    pub lambda_s: f64,
    pub lambda_n: f64,
    pub levels: usize,
    pub iters_per_level: Vec<usize>,
    pub learning_rate: f64,
    pub knn_k: usize,
    pub knn_refresh_every: usize,
    pub patch_radius: usize,
    pub neighbor_radius: usize,
    pub ransac: RansacConfig,
    pub confidence_threshold: f64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            rho: 0.1,
            sigma_int: 0.07,
            sigma_spa: 3.0,
            lambda_p: 30.0,
            lambda_r: 50.0,
            lambda_s: 0.1,
            lambda_n: 10.0,
            levels: 2,
            iters_per_level: vec![50, 50],
            learning_rate: 5e-3,
            knn_k: 3,
            knn_refresh_every: 25,
            patch_radius: 1,
            neighbor_radius: 1,
            ransac: RansacConfig::default(),
            confidence_threshold: 0.0,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("gamma", self.gamma),
            ("rho", self.rho),
            ("lambda_p", self.lambda_p),
            ("lambda_r", self.lambda_r),
            ("lambda_s", self.lambda_s),
            ("lambda_n", self.lambda_n),
            ("learning_rate", self.learning_rate),
        ];
        for (name, w) in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {w}")));
            }
        }
        for (name, s) in [("sigma_int", self.sigma_int), ("sigma_spa", self.sigma_spa)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {s}")));
            }
        }
        if self.levels == 0 {
            return Err(Error::InvalidConfig("levels must be >= 1".into()));
        }
        if self.iters_per_level.len() != self.levels {
            return Err(Error::InvalidConfig(format!(
                "iters_per_level has {} entries for {} levels",
                self.iters_per_level.len(),
                self.levels
            )));
        }
        if self.knn_refresh_every == 0 {
            return Err(Error::InvalidConfig("knn_refresh_every must be >= 1".into()));
        }
        if let Some(t) = self.ransac.threshold {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidConfig(format!("ransac.threshold must be positive, got {t}")));
            }
        }
        Ok(())
    }
}
