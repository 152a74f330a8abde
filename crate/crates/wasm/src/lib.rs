//! Browser bindings for three small demos on synthetic scenes: normal
//! estimation, cross-view alignment, and graph refinement.

use more_core::alignment::align_pair;
use more_core::graph::{RefinementState, REF, SRC};
use more_core::model::{AffineAlignment, CameraModel, RefinementConfig, ScenePair, Vec3};
use more_core::normals::normals_from_pointmap;
use more_core::optimizer::{prepare, run_refinement};
use more_core::synth::{generate, SceneSpec, Surface, SynthScene};
use serde_json::json;
use wasm_bindgen::prelude::*;

pub const WIDTH: usize = 64;
pub const HEIGHT: usize = 48;

fn base_spec(seed: u64) -> SceneSpec {
    let mut spec = SceneSpec::plane_pair(WIDTH, HEIGHT, 64.0, 4.0, 0.5);
    spec.seed = seed;
    spec
}

fn surface(name: &str, param: f64) -> Result<Surface, String> {
    Ok(match name {
        "plane" => {
            let t = param.to_radians();
            Surface::Plane {
                normal: [0.0, t.sin(), t.cos()],
                offset: 4.0 * t.cos(),
            }
        }
        "two_planes" => Surface::TwoPlanes {
            dihedral_deg: param,
            depth: 4.0,
        },
        "sphere" => Surface::Sphere {
            center: [0.0, 0.0, 4.0 + param],
            radius: param,
        },
        "staircase" => Surface::Staircase {
            step_height: param,
            step_width: 0.5,
            depth: 4.0,
        },
        other => return Err(format!("unknown surface `{other}`")),
    })
}

fn rgba(colors: impl Iterator<Item = Option<[f64; 3]>>) -> Vec<u8> {
    let byte = |c: f64| (c.clamp(0.0, 1.0) * 255.0).round() as u8;
    colors
        .flat_map(|c| match c {
            Some([r, g, b]) => [byte(r), byte(g), byte(b), 255],
            None => [0, 0, 0, 0],
        })
        .collect()
}

/// RGBA image of the reference-view normals of a synthetic surface, with
/// each component mapped from [-1, 1] to [0, 255]. Invalid pixels are
/// transparent.
///
/// `param` is the tilt in degrees for `plane`, the interior angle for
/// `two_planes`, the radius for `sphere` and the step height for
/// `staircase`.
#[wasm_bindgen]
pub fn normal_image(surface_name: &str, param: f64, noise: f64, seed: u64) -> Result<Vec<u8>, String> {
    let mut spec = base_spec(seed);
    spec.surface = surface(surface_name, param)?;
    spec.noise_sigma = noise;
    let scene = generate(&spec).map_err(|e| e.to_string())?;
    let view = &scene.pair.reference;
    let nm = normals_from_pointmap(&view.world_points(), &view.camera);
    Ok(rgba(nm.normals.iter().zip(&nm.valid).map(|(n, &v)| {
        v.then(|| [0.5 + 0.5 * n.x, 0.5 + 0.5 * n.y, 0.5 + 0.5 * n.z])
    })))
}

/// Distorts the source view of a plane pair by `scale` and `shift`, mixes in
/// outlier matches, and aligns it back. Returns a JSON report.
#[wasm_bindgen]
pub fn align_scene(scale: f64, sx: f64, sy: f64, sz: f64, outlier_fraction: f64, seed: u64) -> Result<String, String> {
    let mut spec = base_spec(seed);
    spec.distortion[1] = AffineAlignment::new(scale, Vec3::new(sx, sy, sz)).map_err(|e| e.to_string())?;
    spec.outlier_fraction = outlier_fraction;
    spec.noise_sigma = 0.002;
    let scene = generate(&spec).map_err(|e| e.to_string())?;
    let expect = scene.truth.expected_alignment();
    let mut cfg = RefinementConfig::default();
    cfg.ransac.seed = seed;
    let out = align_pair(&scene.pair, &cfg).map_err(|e| e.to_string())?;
    let a = out.alignment;
    let caught = out
        .matches
        .inlier
        .iter()
        .zip(&scene.truth.inlier_labels)
        .filter(|(&kept, &truth)| !kept && !truth)
        .count();
    let outliers = scene.truth.inlier_labels.iter().filter(|&&t| !t).count();
    Ok(json!({
        "expected": {"scale": expect.scale, "shift": [expect.shift.x, expect.shift.y, expect.shift.z]},
        "recovered": {"scale": a.scale, "shift": [a.shift.x, a.shift.y, a.shift.z]},
        "scale_error": (a.scale - expect.scale).abs(),
        "shift_error": (a.shift - expect.shift).norm(),
        "matches": out.matches.len(),
        "inliers": out.ransac.inlier_count,
        "outliers_injected": outliers,
        "outliers_rejected": caught,
        "objective_identity": out.objective_identity,
        "objective_final": out.objective_final,
    })
    .to_string())
}

/// A refined noisy plane pair.
#[wasm_bindgen]
pub struct RefineRun {
    totals: Vec<f64>,
    levels: Vec<u32>,
    before: Vec<f64>,
    after: Vec<f64>,
    residual_before: f64,
    residual_after: f64,
}

fn camera_depths(state: &RefinementState, cam: &CameraModel) -> Vec<f64> {
    let pm = &state.points[REF];
    pm.points
        .iter()
        .zip(&pm.valid)
        .map(|(p, &v)| if v { cam.to_camera(p).z } else { f64::NAN })
        .collect()
}

fn match_residual(pair: &ScenePair, state: &RefinementState) -> f64 {
    let (sum, n) = pair
        .matches
        .usable(&state.points[REF], &state.points[SRC])
        .fold((0.0, 0usize), |(s, n), (i, j, _)| {
            (s + (state.points[REF].points[i] - state.points[SRC].points[j]).norm(), n + 1)
        });
    sum / n.max(1) as f64
}

fn depth_colors(depth: &[f64], lo: f64, hi: f64) -> Vec<u8> {
    rgba(depth.iter().map(|&d| {
        d.is_finite().then(|| {
            let t = ((d - lo) / (hi - lo)).clamp(0.0, 1.0);
            [t, 0.35 + 0.3 * (1.0 - t), 1.0 - t]
        })
    }))
}

#[wasm_bindgen]
impl RefineRun {
    /// Total loss after every optimizer step, coarse level first.
    pub fn totals(&self) -> Vec<f64> {
        self.totals.clone()
    }

    /// Pyramid level of each entry of `totals`.
    pub fn levels(&self) -> Vec<u32> {
        self.levels.clone()
    }

    pub fn residual_before(&self) -> f64 {
        self.residual_before
    }

    pub fn residual_after(&self) -> f64 {
        self.residual_after
    }

    /// Reference depth before (`refined = false`) or after refinement, as
    /// RGBA over `[lo, hi]`.
    pub fn depth_image(&self, refined: bool, lo: f64, hi: f64) -> Vec<u8> {
        depth_colors(if refined { &self.after } else { &self.before }, lo, hi)
    }
}

/// Generates a noisy plane pair and refines it with the given weights.
#[wasm_bindgen]
pub fn refine_scene(
    noise: f64,
    iters_per_level: usize,
    lambda_p: f64,
    lambda_r: f64,
    lambda_s: f64,
    lambda_n: f64,
    seed: u64,
) -> Result<RefineRun, String> {
    let mut spec = base_spec(seed);
    spec.noise_sigma = noise;
    let scene: SynthScene = generate(&spec).map_err(|e| e.to_string())?;
    let mut cfg = RefinementConfig::default();
    cfg.iters_per_level = vec![iters_per_level; cfg.levels];
    cfg.lambda_p = lambda_p;
    cfg.lambda_r = lambda_r;
    cfg.lambda_s = lambda_s;
    cfg.lambda_n = lambda_n;
    cfg.validate().map_err(|e| e.to_string())?;
    let aligned = align_pair(&scene.pair, &cfg).map_err(|e| e.to_string())?;
    let (level, init) = prepare(&scene.pair, &aligned);
    let (state, trace) = run_refinement(&level, &init, &cfg).map_err(|e| e.to_string())?;
    let cam = &level.cameras[REF];
    Ok(RefineRun {
        totals: trace.rows.iter().map(|r| r.total).collect(),
        levels: trace.rows.iter().map(|r| r.level as u32).collect(),
        before: camera_depths(&init, cam),
        after: camera_depths(&state, cam),
        residual_before: match_residual(&scene.pair, &init),
        residual_after: match_residual(&scene.pair, &state),
    })
}
