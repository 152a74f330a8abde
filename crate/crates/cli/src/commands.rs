use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use more_core::alignment::{align_pair, align_pair_with, AlignmentOutcome};
use more_core::graph::{REF, SRC};
use more_core::io::bundle::load_bundle;
use more_core::io::npy::{read_npy, NpyArray};
use more_core::io::result::{
    read_cameras, read_json, save_result, write_cameras, write_json, write_point_maps, AlignmentFile, RefinementResult,
    ALIGNMENT_FILE, TRACE_FILE,
};
use more_core::metrics::{eval_depth, eval_pointcloud, DepthMap};
use more_core::model::{CameraModel, PixelGrid, RefinementConfig, ScenePair, Vec3};
use more_core::optimizer::{prepare, run_refinement};
use more_core::synth::{generate, read_ground_truth, write_bundle, SceneSpec};
use serde_json::json;

use crate::{AlignArgs, EvalArgs, RefineArgs, Report, SynthArgs};

/// A user-supplied file that could not be read or parsed.
#[derive(Debug)]
pub struct LoadError(pub String);

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for LoadError {}

fn load_error(path: &Path, e: impl std::fmt::Display) -> anyhow::Error {
    LoadError(format!("{}: {e}", path.display())).into()
}

fn read_config(path: Option<&Path>) -> Result<RefinementConfig> {
    let Some(path) = path else {
        return Ok(RefinementConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| load_error(path, e))?;
    let cfg: RefinementConfig = serde_json::from_str(&text).map_err(|e| load_error(path, e))?;
    cfg.validate()?;
    Ok(cfg)
}

fn load(bundle: &Path, cfg: &RefinementConfig) -> Result<ScenePair> {
    load_bundle(bundle, cfg.confidence_threshold).with_context(|| format!("loading bundle {}", bundle.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn alignment_json(out: &AlignmentOutcome) -> serde_json::Value {
    json!({
        "inlier_count": out.ransac.inlier_count,
        "match_count": out.matches.len(),
        "ransac_threshold": out.ransac.threshold_used,
        "scale": out.alignment.scale,
        "shift": [out.alignment.shift.x, out.alignment.shift.y, out.alignment.shift.z],
        "objective_identity": out.objective_identity,
        "objective_init": out.objective_init,
        "objective_final": out.objective_final,
    })
}

fn alignment_text(out: &AlignmentOutcome) -> String {
    let s = out.alignment.shift;
    format!(
        "inliers: {} of {}\nscale: {}\nshift: [{}, {}, {}]\nobjective: {:.6e} -> {:.6e}\n",
        out.ransac.inlier_count,
        out.matches.len(),
        out.alignment.scale,
        s.x,
        s.y,
        s.z,
        out.objective_identity,
        out.objective_final
    )
}

pub fn align(args: &AlignArgs) -> Result<Report> {
    let mut cfg = read_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.ransac.seed = seed;
    }
    if args.no_ransac {
        cfg.ransac.enabled = false;
    }
    let pair = load(&args.bundle, &cfg)?;
    let out = align_pair(&pair, &cfg)?;
    create_dir(&args.out)?;
    write_json(&args.out.join(ALIGNMENT_FILE), &AlignmentFile::new(&out.alignment, [1.0, 1.0]))?;
    write_point_maps(&args.out, "aligned", [&out.ref_world, &out.src_world])?;
    write_cameras(&args.out, [&pair.reference.camera, &pair.source.camera])?;
    Ok(Report {
        json: alignment_json(&out),
        text: alignment_text(&out),
    })
}

fn stored_alignment(args: &RefineArgs) -> Option<PathBuf> {
    if let Some(p) = &args.alignment {
        return Some(p.clone());
    }
    let p = args.bundle.join(ALIGNMENT_FILE);
    p.exists().then_some(p)
}

pub fn refine(args: &RefineArgs) -> Result<Report> {
    let cfg = read_config(args.config.as_deref())?;
    let pair = load(&args.bundle, &cfg)?;
    let aligned = match stored_alignment(args) {
        Some(path) => {
            let file: AlignmentFile = read_json(&path)?;
            align_pair_with(&pair, &cfg, file.alignment()?)?
        }
        None => align_pair(&pair, &cfg)?,
    };
    let (scene, init) = prepare(&pair, &aligned);
    create_dir(&args.out)?;
    let (state, trace) = match run_refinement(&scene, &init, &cfg) {
        Ok(r) => r,
        Err(aborted) => {
            // keep what was traced up to the failure
            std::fs::write(args.out.join(TRACE_FILE), aborted.trace.to_csv())
                .with_context(|| format!("writing {}", args.out.display()))?;
            return Err(aborted.into());
        }
    };
    save_result(
        &args.out,
        &RefinementResult {
            state: &state,
            alignment: &aligned.alignment,
            trace: &trace,
            images: [&scene.images[REF], &scene.images[SRC]],
            cameras: [&scene.cameras[REF], &scene.cameras[SRC]],
        },
    )?;

    let levels: Vec<_> = trace
        .levels
        .iter()
        .map(|l| {
            json!({
                "level": l.level,
                "iterations": l.iterations,
                "initial_total": l.initial_total,
                "final_total": l.final_total,
            })
        })
        .collect();
    let mut text = alignment_text(&aligned);
    for l in &trace.levels {
        let _ = writeln!(
            text,
            "level {}: {} iterations, loss {:.6e} -> {:.6e}",
            l.level, l.iterations, l.initial_total, l.final_total
        );
    }
    let _ = writeln!(text, "wrote {}", args.out.display());
    Ok(Report {
        json: json!({
            "alignment": alignment_json(&aligned),
            "s_ref": state.scale[REF],
            "s_src": state.scale[SRC],
            "levels": levels,
            "trace_rows": trace.rows.len(),
        }),
        text,
    })
}

fn to_points(a: &NpyArray, path: &Path) -> Result<(PixelGrid, Vec<Vec3>)> {
    if a.shape.len() != 3 || a.shape[2] != 3 {
        return Err(load_error(path, format!("expected shape (H, W, 3), found {:?}", a.shape)));
    }
    let grid = PixelGrid::new(a.shape[1], a.shape[0]).map_err(|e| load_error(path, e))?;
    let pts = a.data.chunks_exact(3).map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64)).collect();
    Ok((grid, pts))
}

/// Refined points if present, otherwise aligned ones.
fn prediction(dir: &Path, view: &str) -> Result<(PixelGrid, Vec<Vec3>)> {
    for prefix in ["refined", "aligned"] {
        let path = dir.join(format!("{prefix}_points_{view}.npy"));
        if path.exists() {
            return to_points(&read_npy(&path)?, &path);
        }
    }
    Err(load_error(dir, format!("no refined_points_{view}.npy or aligned_points_{view}.npy")))
}

fn depth_map(grid: PixelGrid, pts: &[Vec3], cam: &CameraModel) -> DepthMap {
    DepthMap::new(
        grid,
        pts.iter()
            .map(|p| if p.iter().all(|x| x.is_finite()) { cam.to_camera(p).z } else { f64::NAN })
            .collect(),
    )
}

fn finite(pts: &[Vec3]) -> impl Iterator<Item = Vec3> + '_ {
    pts.iter().filter(|p| p.iter().all(|x| x.is_finite())).copied()
}

pub fn eval(args: &EvalArgs) -> Result<Report> {
    let cameras = read_cameras(&args.pred)?;
    let gt = read_ground_truth(&args.gt)?;
    let (grid, pred_ref) = prediction(&args.pred, "ref")?;
    if gt.true_points[REF].len() != grid.len() {
        return Err(load_error(&args.gt, "ground truth grid differs from the prediction"));
    }
    let pred_depth = depth_map(grid, &pred_ref, &cameras[REF]);
    let gt_depth = depth_map(grid, &gt.true_points[REF], &cameras[REF]);
    let d = eval_depth(&pred_depth, &gt_depth, args.threshold, args.median_scaling)?;

    let mut out = json!({
        "abs_rel": d.abs_rel,
        "tau": d.inlier_ratio,
        "n_evaluated": d.n_evaluated,
        "scale_applied": d.scale_applied,
        "accuracy": null,
        "completeness": null,
        "overall": null,
    });
    let mut text = format!(
        "abs_rel: {:.6}\ntau: {:.6}\nevaluated: {} pixels (scale {})\n",
        d.abs_rel, d.inlier_ratio, d.n_evaluated, d.scale_applied
    );
    if args.pointcloud {
        let (_, pred_src) = prediction(&args.pred, "src")?;
        let pred: Vec<Vec3> = finite(&pred_ref).chain(finite(&pred_src)).collect();
        let truth: Vec<Vec3> = finite(&gt.true_points[REF]).chain(finite(&gt.true_points[SRC])).collect();
        let pc = eval_pointcloud(&pred, &truth)?;
        out["accuracy"] = json!(pc.accuracy);
        out["completeness"] = json!(pc.completeness);
        out["overall"] = json!(pc.overall);
        let _ = writeln!(
            text,
            "accuracy: {:.6}\ncompleteness: {:.6}\noverall: {:.6}",
            pc.accuracy, pc.completeness, pc.overall
        );
    }
    Ok(Report { json: out, text })
}

pub fn synth(args: &SynthArgs) -> Result<Report> {
    let text = std::fs::read_to_string(&args.spec).map_err(|e| load_error(&args.spec, e))?;
    let spec: SceneSpec = serde_json::from_str(&text).map_err(|e| load_error(&args.spec, e))?;
    let scene = generate(&spec)?;
    write_bundle(&scene, &args.out)?;
    let n = scene.pair.matches.len();
    let inliers = scene.truth.inlier_labels.iter().filter(|&&l| l).count();
    Ok(Report {
        json: json!({
            "out": args.out,
            "width": spec.width,
            "height": spec.height,
            "matches": n,
            "true_matches": inliers,
        }),
        text: format!(
            "wrote {}x{} scene with {} matches ({} true) to {}\n",
            spec.width,
            spec.height,
            n,
            inliers,
            args.out.display()
        ),
    })
}
