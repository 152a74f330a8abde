use std::fmt;

use crate::alignment::AlignmentOutcome;
use crate::error::Error;
use crate::graph::{build_graph, evaluate, Evaluation, Gradient, LossTerms, Priors, RefinementState, SceneLevel, REF, SRC};
use crate::model::{RefinementConfig, ScenePair, Vec3};

use super::adam::{Adam, AdamParams};
use super::pyramid::{downsample_state, upsample_delta, PyramidLevel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub level: usize,
    pub terms: LossTerms,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub iterations: usize,
    pub initial_total: f64,
    pub final_total: f64,
}

/// Row 0 is the initial evaluation at the coarsest level; every optimizer
/// step then appends the loss after the step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossTrace {
    pub rows: Vec<TraceRow>,
    pub levels: Vec<LevelSummary>,
}

pub const TRACE_HEADER: &str = "iter,level,intra,inter,knn,ray,sim,normal,total";

impl LossTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let t = &r.terms;
            out.push_str(&format!(
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                r.iter, r.level, t.intra, t.inter, t.knn, t.ray, t.sim, t.normal, r.total
            ));
        }
        out
    }
}

/// A refinement stopped by an error, with the trace recorded so far.
#[derive(Debug)]
pub struct RefinementAborted {
    pub error: Error,
    pub trace: LossTrace,
}

impl fmt::Display for RefinementAborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "refinement aborted after {} trace rows: {}", self.trace.rows.len(), self.error)
    }
}

impl std::error::Error for RefinementAborted {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Full-resolution problem and starting state from an aligned pair.
pub fn prepare(pair: &ScenePair, aligned: &AlignmentOutcome) -> (SceneLevel, RefinementState) {
    let cameras = [pair.reference.camera.clone(), pair.source.camera.clone()];
    let state = RefinementState::from_points([aligned.ref_world.clone(), aligned.src_world.clone()], &cameras);
    let scene = SceneLevel {
        images: [pair.reference.image.clone(), pair.source.image.clone()],
        cameras,
        matches: aligned.matches.clone(),
    };
    (scene, state)
}

fn flatten(state: &RefinementState, out: &mut Vec<f64>) {
    out.clear();
    for v in [REF, SRC] {
        out.extend(state.points[v].points.iter().flat_map(|p| [p.x, p.y, p.z]));
    }
    for v in [REF, SRC] {
        out.extend(state.normals[v].normals.iter().flat_map(|p| [p.x, p.y, p.z]));
    }
    out.extend_from_slice(&state.scale);
}

fn flatten_grad(g: &Gradient, out: &mut Vec<f64>) {
    out.clear();
    for v in [REF, SRC] {
        out.extend(g.points[v].iter().flat_map(|p| [p.x, p.y, p.z]));
    }
    for v in [REF, SRC] {
        out.extend(g.normals[v].iter().flat_map(|p| [p.x, p.y, p.z]));
    }
    out.extend_from_slice(&g.scale);
}

fn unflatten(x: &[f64], state: &mut RefinementState) {
    let mut chunks = x.chunks_exact(3);
    let mut fill = |dst: &mut Vec<Vec3>| {
        for p in dst.iter_mut() {
            let c = chunks.next().expect("parameter length matches state");
            *p = Vec3::new(c[0], c[1], c[2]);
        }
    };
    for v in [REF, SRC] {
        fill(&mut state.points[v].points);
    }
    for v in [REF, SRC] {
        fill(&mut state.normals[v].normals);
    }
    let n = x.len();
    state.scale = [x[n - 2], x[n - 1]];
}

/// Coarse-to-fine Adam over all levels. Returns the refined full-resolution
/// state and the loss trace.
pub fn run_refinement(
    scene: &SceneLevel,
    initial: &RefinementState,
    cfg: &RefinementConfig,
) -> Result<(RefinementState, LossTrace), RefinementAborted> {
    let mut trace = LossTrace::default();
    let abort = |error: Error, trace: &LossTrace| RefinementAborted {
        error,
        trace: trace.clone(),
    };
    cfg.validate().map_err(|e| abort(e, &trace))?;

    let levels: Vec<PyramidLevel> = (0..cfg.levels)
        .map(|l| downsample_state(scene, initial, l))
        .collect::<Result<_, _>>()
        .map_err(|e| abort(e, &trace))?;

    let mut current: Option<(RefinementState, usize)> = None;
    for l in (0..cfg.levels).rev() {
        let lvl = &levels[l];
        let mut state = match &current {
            None => lvl.state.clone(),
            Some((coarse, cl)) => upsample_delta(coarse, &levels[*cl].state, &lvl.state, &lvl.scene.cameras),
        };
        let result = optimize_level(lvl, &mut state, cfg, &mut trace);
        if let Err(e) = result {
            return Err(abort(e, &trace));
        }
        current = Some((state, l));
    }
    let (state, _) = current.expect("at least one level");
    Ok((state, trace))
}

fn optimize_level(
    lvl: &PyramidLevel,
    state: &mut RefinementState,
    cfg: &RefinementConfig,
    trace: &mut LossTrace,
) -> crate::Result<()> {
    let iters = cfg.iters_per_level[lvl.level];
    let priors = [
        Priors::from_state(&lvl.state, REF, cfg.confidence_threshold)?,
        Priors::from_state(&lvl.state, SRC, cfg.confidence_threshold)?,
    ];
    let mut graph = build_graph(&lvl.scene, state, priors, cfg)?;
    let mut eval: Evaluation = evaluate(state, &graph, cfg)?;
    if trace.rows.is_empty() {
        trace.rows.push(TraceRow {
            iter: 0,
            level: lvl.level,
            terms: eval.terms,
            total: eval.total,
        });
    }
    let initial_total = eval.total;

    let mut x = Vec::new();
    let mut g = Vec::new();
    flatten(state, &mut x);
    let mut adam = Adam::new(AdamParams::with_lr(cfg.learning_rate), x.len());
    for k in 0..iters {
        flatten_grad(&eval.gradient, &mut g);
        adam.step(&mut x, &g);
        unflatten(&x, state);
        state.renormalize_normals();
        flatten(state, &mut x);
        if cfg.knn_refresh_every > 0 && (k + 1) % cfg.knn_refresh_every == 0 && k + 1 < iters {
            graph.refresh_knn(&lvl.scene, state, cfg);
        }
        eval = evaluate(state, &graph, cfg)?;
        trace.rows.push(TraceRow {
            iter: trace.rows.len(),
            level: lvl.level,
            terms: eval.terms,
            total: eval.total,
        });
    }
    trace.levels.push(LevelSummary {
        level: lvl.level,
        iterations: iters,
        initial_total,
        final_total: eval.total,
    });
    Ok(())
}
