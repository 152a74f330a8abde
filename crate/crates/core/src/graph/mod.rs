//! Constraint graph over both views and the refinement objective.

mod build;
mod loss;
pub mod weights;

pub use build::{build_graph, knn_edges, InterEdge, KnnEdge, PairEdge, PairedEdge, RayAnchor, RefinementGraph};
pub use loss::{
    evaluate, evaluate_term, loss_inter, loss_intra, loss_knn, loss_normal_prior, loss_ray, loss_similarity,
    total_loss_and_grad, Evaluation, Gradient, LossTerms, Term, SMOOTHING_EPS,
};

use crate::error::{Error, Result};
use crate::model::{CameraModel, CorrespondenceSet, Image, NormalMap, PointMap, Vec3};
use crate::normals::normals_from_pointmap;

pub const REF: usize = 0;
pub const SRC: usize = 1;

/// Optimized quantities of both views, in the world frame.
///
/// Index 0 is the reference view, 1 the source.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementState {
    pub points: [PointMap; 2],
    pub normals: [NormalMap; 2],
    /// Per-view similarity scale, starting at 1.
    pub scale: [f64; 2],
}

impl RefinementState {
    /// Starts from world-frame point maps with normals estimated toward
    /// each camera.
    pub fn from_points(points: [PointMap; 2], cameras: &[CameraModel; 2]) -> Self {
        let normals = [
            normals_from_pointmap(&points[REF], &cameras[REF]),
            normals_from_pointmap(&points[SRC], &cameras[SRC]),
        ];
        Self {
            points,
            normals,
            scale: [1.0, 1.0],
        }
    }

    /// Pixels that take part in the objective: valid point and valid normal.
    pub fn active(&self, view: usize) -> Vec<bool> {
        self.points[view]
            .valid
            .iter()
            .zip(&self.normals[view].valid)
            .map(|(&p, &n)| p && n)
            .collect()
    }

    pub fn renormalize_normals(&mut self) {
        for nm in &mut self.normals {
            for (n, &v) in nm.normals.iter_mut().zip(&nm.valid) {
                if v {
                    let len = n.norm();
                    // already-unit normals keep their bits
                    if len > 0.0 && (len - 1.0).abs() > 4.0 * f64::EPSILON {
                        *n /= len;
                    }
                }
            }
        }
    }
}

/// Fixed per-level inputs: images, cameras and matches of both views.
#[derive(Clone, Debug)]
pub struct SceneLevel {
    pub images: [Image; 2],
    pub cameras: [CameraModel; 2],
    pub matches: CorrespondenceSet,
}

/// Reference quantities the refined maps are regularized toward.
#[derive(Clone, Debug, PartialEq)]
pub struct Priors {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub mask: Vec<bool>,
    pub centroid: Vec3,
}

impl Priors {
    /// Priors for `view` from a state, masking pixels by confidence.
    pub fn from_state(state: &RefinementState, view: usize, confidence_threshold: f64) -> Result<Self> {
        let active = state.active(view);
        let pm = &state.points[view];
        let mut sum = Vec3::zeros();
        let mut count = 0usize;
        for (p, _) in pm.points.iter().zip(&active).filter(|(_, &a)| a) {
            sum += p;
            count += 1;
        }
        if count == 0 {
            return Err(Error::NoValidPixels);
        }
        let mask = active
            .iter()
            .zip(&pm.confidence)
            .map(|(&a, &c)| a && c >= confidence_threshold)
            .collect();
        Ok(Self {
            points: pm.points.clone(),
            normals: state.normals[view].normals.clone(),
            mask,
            centroid: sum / count as f64,
        })
    }
}
