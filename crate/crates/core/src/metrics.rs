//! Depth and point-cloud evaluation.

use serde::Serialize;

use crate::alignment::percentile;
use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::model::{CameraModel, PixelGrid, PointMap, Vec3};

/// Default ratio threshold of the inlier ratio.
pub const INLIER_THRESHOLD: f64 = 1.03;

#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub grid: PixelGrid,
    pub depth: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    pub fn new(grid: PixelGrid, depth: Vec<f64>) -> Self {
        let valid = depth.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Self { grid, depth, valid }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DepthEvalResult {
    pub abs_rel: f64,
    pub inlier_ratio: f64,
    pub n_evaluated: usize,
    pub scale_applied: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointCloudEval {
    pub accuracy: f64,
    pub completeness: f64,
    pub overall: f64,
}

/// Camera-frame z of each valid point; non-positive depths are invalid.
pub fn depth_from_points(pm: &PointMap, cam: &CameraModel) -> DepthMap {
    let depth = pm
        .points
        .iter()
        .zip(&pm.valid)
        .map(|(p, &v)| if v { cam.to_camera(p).z } else { f64::NAN })
        .collect();
    DepthMap::new(pm.grid, depth)
}

fn common_pixels(pred: &DepthMap, gt: &DepthMap) -> Result<Vec<usize>> {
    if pred.depth.len() != gt.depth.len() {
        return Err(Error::LengthMismatch {
            expected: gt.depth.len(),
            found: pred.depth.len(),
        });
    }
    let idx: Vec<usize> = (0..gt.depth.len()).filter(|&i| pred.valid[i] && gt.valid[i]).collect();
    if idx.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok(idx)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    percentile(&v, 0.5)
}

/// `median(gt) / median(pred)` over pixels valid in both.
pub fn median_scale(pred: &DepthMap, gt: &DepthMap) -> Result<f64> {
    let idx = common_pixels(pred, gt)?;
    let mp = median(idx.iter().map(|&i| pred.depth[i]).collect());
    let mg = median(idx.iter().map(|&i| gt.depth[i]).collect());
    if mp == 0.0 || mg == 0.0 {
        return Err(Error::ZeroMedian);
    }
    Ok(mg / mp)
}

/// AbsRel and the fraction of pixels with `max(p/g, g/p) < threshold`.
pub fn eval_depth(pred: &DepthMap, gt: &DepthMap, threshold: f64, use_median_scaling: bool) -> Result<DepthEvalResult> {
    let idx = common_pixels(pred, gt)?;
    let scale = if use_median_scaling { median_scale(pred, gt)? } else { 1.0 };
    let mut rel = 0.0;
    let mut inliers = 0usize;
    for &i in &idx {
        let (p, g) = (pred.depth[i] * scale, gt.depth[i]);
        rel += (p - g).abs() / g;
        if (p / g).max(g / p) < threshold {
            inliers += 1;
        }
    }
    let n = idx.len();
    Ok(DepthEvalResult {
        abs_rel: rel / n as f64,
        inlier_ratio: inliers as f64 / n as f64,
        n_evaluated: n,
        scale_applied: scale,
    })
}

fn mean_nearest(from: &[Vec3], to: &KdTree) -> f64 {
    let d: Vec<f64> = crate::par::map(from, |p| to.nearest_one(p).map_or(f64::NAN, |n| n.dist_sq.sqrt()));
    d.iter().sum::<f64>() / from.len() as f64
}

/// Mean nearest-neighbor distance pred to gt (accuracy), gt to pred
/// (completeness), and their mean.
pub fn eval_pointcloud(pred: &[Vec3], gt: &[Vec3]) -> Result<PointCloudEval> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::NoValidPixels);
    }
    let accuracy = mean_nearest(pred, &KdTree::new(gt.to_vec()));
    let completeness = mean_nearest(gt, &KdTree::new(pred.to_vec()));
    Ok(PointCloudEval {
        accuracy,
        completeness,
        overall: 0.5 * (accuracy + completeness),
    })
}
