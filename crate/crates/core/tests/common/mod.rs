#![allow(dead_code)]

pub mod oracle;

use more_core::graph::{build_graph, Priors, RefinementGraph, RefinementState, SceneLevel, REF, SRC};
use more_core::model::{CameraModel, CorrespondenceSet, Image, PixelGrid, PointMap, RefinementConfig, Vec3};
use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub scene: SceneLevel,
    pub state: RefinementState,
    pub graph: RefinementGraph,
    pub cfg: RefinementConfig,
}

fn jitter(rng: &mut ChaCha8Rng, s: f64) -> Vec3 {
    Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
}

/// Two views of a bumpy surface with noisy normals, off-unit scales, a few
/// invalid pixels, and priors taken from a perturbed copy of the state.
pub fn random_scene(width: usize, height: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = PixelGrid::new(width, height).unwrap();
    let c0 = CameraModel::simple(width as f64, width, height);
    let rot = Rotation3::from_euler_angles(0.02, -0.05, 0.01).into_inner();
    let c1 = c0.with_pose(rot, Vec3::new(0.4, 0.05, -0.02)).unwrap();
    let cams = [c0, c1];

    let view = |cam: &CameraModel, rng: &mut ChaCha8Rng| {
        let pts = (0..grid.len())
            .map(|i| {
                let (r, c) = grid.row_col(i);
                let dir = cam.pixel_direction(r as f64, c as f64);
                let d = 3.0 + rng.random_range(0.0..0.4);
                // keep points visibly off their rays so every smoothed norm stays smooth
                let off = loop {
                    let j = jitter(rng, 0.05);
                    if j.cross(&dir).norm() > 0.02 * dir.norm() {
                        break j;
                    }
                };
                cam.to_world(&(dir * d + off))
            })
            .collect();
        let mut valid = vec![true; grid.len()];
        for _ in 0..2 {
            valid[rng.random_range(0..grid.len())] = false;
        }
        let confidence = (0..grid.len()).map(|_| rng.random_range(0.0..1.0)).collect();
        PointMap::new(grid, pts, valid, confidence).unwrap()
    };
    let points = [view(&cams[0], &mut rng), view(&cams[1], &mut rng)];
    let mut state = RefinementState::from_points(points, &cams);
    for nm in &mut state.normals {
        for n in nm.normals.iter_mut() {
            let j = jitter(&mut rng, 0.2);
            *n = (*n + j).normalize();
        }
    }
    state.scale = [1.1, 0.93];

    let mut prior_state = state.clone();
    for v in [REF, SRC] {
        for p in prior_state.points[v].points.iter_mut() {
            *p += jitter(&mut rng, 0.05);
        }
        for n in prior_state.normals[v].normals.iter_mut() {
            let j = jitter(&mut rng, 0.1);
            *n = (*n + j).normalize();
        }
    }
    let mut cfg = RefinementConfig::default();
    cfg.confidence_threshold = 0.2;
    let priors = [REF, SRC].map(|v| Priors::from_state(&prior_state, v, cfg.confidence_threshold).unwrap());

    let pix = |rng: &mut ChaCha8Rng| [rng.random_range(0.0..height as f64 - 0.5), rng.random_range(0.0..width as f64 - 0.5)];
    let n = 12;
    let (a, b): (Vec<_>, Vec<_>) = (0..n).map(|_| (pix(&mut rng), pix(&mut rng))).unzip();
    let matches = CorrespondenceSet::new(a, b).unwrap();
    // low-contrast texture so that the intensity weights stay well above zero
    let image = |rng: &mut ChaCha8Rng| {
        let base = Vec3::new(0.4, 0.5, 0.6);
        Image::new(grid, (0..grid.len()).map(|_| base + jitter(rng, 0.03)).collect()).unwrap()
    };
    let images = [image(&mut rng), image(&mut rng)];
    let scene = SceneLevel {
        images,
        cameras: cams,
        matches,
    };
    let graph = build_graph(&scene, &state, priors, &cfg).unwrap();
    Fixture {
        scene,
        state,
        graph,
        cfg,
    }
}

/// Number of scalar parameters: points and normals of both views, then the
/// two scales.
pub fn param_count(state: &RefinementState) -> usize {
    6 * (state.points[REF].points.len() + state.points[SRC].points.len()) + 2
}

/// Mutable access to parameter `k` in the order points ref, points src,
/// normals ref, normals src, scales.
pub fn param_mut(state: &mut RefinementState, k: usize) -> &mut f64 {
    let n = [state.points[REF].points.len(), state.points[SRC].points.len()];
    let mut k = k;
    for v in [REF, SRC] {
        if k < 3 * n[v] {
            return &mut state.points[v].points[k / 3][k % 3];
        }
        k -= 3 * n[v];
    }
    for v in [REF, SRC] {
        if k < 3 * n[v] {
            return &mut state.normals[v].normals[k / 3][k % 3];
        }
        k -= 3 * n[v];
    }
    &mut state.scale[k]
}

pub fn flat_gradient(g: &more_core::graph::Gradient) -> Vec<f64> {
    let mut out = Vec::new();
    for v in [REF, SRC] {
        out.extend(g.points[v].iter().flat_map(|p| [p.x, p.y, p.z]));
    }
    for v in [REF, SRC] {
        out.extend(g.normals[v].iter().flat_map(|p| [p.x, p.y, p.z]));
    }
    out.extend_from_slice(&g.scale);
    out
}

pub const FD_STEP: f64 = 1e-5;

/// Central differences with step `FD_STEP` over every parameter.
pub fn central_difference(state: &RefinementState, f: impl Fn(&RefinementState) -> f64) -> Vec<f64> {
    let mut s = state.clone();
    (0..param_count(state))
        .map(|k| {
            let x = *param_mut(&mut s, k);
            *param_mut(&mut s, k) = x + FD_STEP;
            let up = f(&s);
            *param_mut(&mut s, k) = x - FD_STEP;
            let down = f(&s);
            *param_mut(&mut s, k) = x;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `|a - b| / |b|` in the Euclidean norm.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let scale: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}
