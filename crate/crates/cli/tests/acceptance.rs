//! One PASS/FAIL line per acceptance criterion, with its measured values
//! and runtime. Exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod fixture;
mod common;

use std::time::{Duration, Instant};

use fixture::oracle::{brute_knn, cloud, grid_oracle, percentile_oracle};
use fixture::{central_difference, flat_gradient, random_scene, rel_error};
use more_core::alignment::{align_pair, clamp_shift_iqr, l1_objective, solve_scale_shift};
use more_core::graph::{build_graph, evaluate, evaluate_term, knn_edges, total_loss_and_grad, Priors, RefinementState, Term, REF, SRC};
use more_core::metrics::{eval_depth, DepthMap, INLIER_THRESHOLD};
use more_core::model::{AffineAlignment, PixelGrid, RefinementConfig, ScenePair, Vec3};
use more_core::optimizer::{prepare, run_refinement};
use more_core::synth::{generate, SceneSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn distorted_plane(outliers: f64) -> SceneSpec {
    let mut spec = SceneSpec::plane_pair(64, 48, 64.0, 4.0, 0.5);
    spec.distortion[1] = AffineAlignment::new(2.0, Vec3::new(0.3, -0.2, 0.5)).unwrap();
    spec.outlier_fraction = outliers;
    spec.seed = 21;
    spec
}

fn affine_recovery() -> Outcome {
    let cfg = RefinementConfig::default();
    let clean = generate(&distorted_plane(0.0)).unwrap();
    let expect = clean.truth.expected_alignment();
    let a = align_pair(&clean.pair, &cfg).unwrap().alignment;
    let (da, db) = ((a.scale - expect.scale).abs(), (a.shift - expect.shift).norm());

    let noisy = generate(&distorted_plane(0.2)).unwrap();
    let b = align_pair(&noisy.pair, &cfg).unwrap().alignment;
    let da_out = (b.scale - expect.scale).abs();
    check(
        da < 1e-8 && db < 1e-8 && da_out < 1e-2,
        format!("clean |da| {da:.1e} |db| {db:.1e}; 20% outliers |da| {da_out:.1e}"),
    )
}

fn gradient_correctness() -> Outcome {
    let fx = random_scene(8, 6, 17);
    let mut worst: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    let mut record = |analytic: &[f64], numeric: &[f64]| {
        worst = worst.max(rel_error(analytic, numeric));
        let n = analytic.len();
        for k in n - 2..n {
            let (a, b) = (analytic[k], numeric[k]);
            if a.abs().max(b.abs()) > 1e-8 {
                worst_scale = worst_scale.max((a - b).abs() / a.abs().max(b.abs()));
            }
        }
    };
    for term in Term::ALL {
        let (_, _, g) = evaluate_term(&fx.state, &fx.graph, &fx.cfg, term).unwrap();
        let numeric = central_difference(&fx.state, |s| evaluate_term(s, &fx.graph, &fx.cfg, term).unwrap().0);
        record(&flat_gradient(&g), &numeric);
    }
    let (_, g) = total_loss_and_grad(&fx.state, &fx.graph, &fx.cfg).unwrap();
    let numeric = central_difference(&fx.state, |s| total_loss_and_grad(s, &fx.graph, &fx.cfg).unwrap().0);
    record(&flat_gradient(&g), &numeric);
    check(
        worst < 1e-4 && worst_scale < 1e-4,
        format!("6 terms + total, worst relative error {worst:.1e}, scale partials {worst_scale:.1e}"),
    )
}

fn planar_fixed_point() -> Outcome {
    let scene = generate(&SceneSpec::plane_pair(64, 48, 64.0, 4.0, 0.5)).unwrap();
    let cfg = RefinementConfig::default();
    let aligned = align_pair(&scene.pair, &cfg).unwrap();
    let (level, init) = prepare(&scene.pair, &aligned);
    let priors = [REF, SRC].map(|v| Priors::from_state(&init, v, 0.0).unwrap());
    let g = build_graph(&level, &init, priors, &cfg).unwrap();
    let e = evaluate(&init, &g, &cfg).unwrap();
    let worst_term = Term::ALL.iter().map(|&t| e.terms.get(t) - e.floor.get(t)).fold(0.0, f64::max);
    let grad = e.gradient.norm();

    let mut one = cfg.clone();
    one.levels = 1;
    one.iters_per_level = vec![50];
    let (out, _) = run_refinement(&level, &init, &one).unwrap();
    let moved = max_displacement(&out, &init);
    check(
        worst_term < 1e-10 && grad < 1e-6 && moved < 1e-6,
        format!("max term {worst_term:.1e}, |grad| {grad:.1e}, 50 steps move {moved:.1e}"),
    )
}

fn max_displacement(a: &RefinementState, b: &RefinementState) -> f64 {
    (0..2)
        .flat_map(|v| a.points[v].points.iter().zip(&b.points[v].points).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max)
}

fn match_residual(pair: &ScenePair, state: &RefinementState) -> f64 {
    let pairs: Vec<_> = pair.matches.usable(&state.points[REF], &state.points[SRC]).collect();
    pairs
        .iter()
        .map(|&(i, j, _)| (state.points[REF].points[i] - state.points[SRC].points[j]).norm())
        .sum::<f64>()
        / pairs.len() as f64
}

fn refinement_efficacy() -> Outcome {
    let mut spec = SceneSpec::plane_pair(64, 48, 64.0, 4.0, 0.5);
    spec.noise_sigma = 0.01;
    spec.seed = 5;
    let scene = generate(&spec).unwrap();
    let cfg = RefinementConfig::default();
    let aligned = align_pair(&scene.pair, &cfg).unwrap();
    let (level, init) = prepare(&scene.pair, &aligned);
    let before = match_residual(&scene.pair, &init);
    let (out, trace) = run_refinement(&level, &init, &cfg).unwrap();
    let after = match_residual(&scene.pair, &out);
    let drops = trace.levels.iter().all(|l| l.final_total < l.initial_total);
    check(
        after <= 0.5 * before && drops,
        format!(
            "residual {before:.4} -> {after:.4} (x{:.3}), loss lower at all {} levels: {drops}",
            after / before,
            trace.levels.len()
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut knn_ok = true;
    for (nq, ns, k) in [(500, 500, 3), (300, 120, 6), (50, 500, 1)] {
        let q = cloud(&mut rng, nq);
        let s = cloud(&mut rng, ns);
        let (qa, sa) = (vec![true; nq], vec![true; ns]);
        knn_ok &= knn_edges(&q, &qa, &s, &sa, k) == brute_knn(&q, &qa, &s, &sa, k);
    }

    let mut worst_gap: f64 = 0.0;
    for _ in 0..10 {
        let r = cloud(&mut rng, 30);
        let alpha = rng.random_range(0.3..3.0);
        let s: Vec<Vec3> = r
            .iter()
            .map(|p| p / alpha + Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
            .collect();
        let z: Vec<f64> = r.iter().map(|p| p.z).collect();
        let a = solve_scale_shift(&r, &s, &z).unwrap();
        let ours = l1_objective(&r, &s, &z, a.scale, &a.shift);
        worst_gap = worst_gap.max(ours - grid_oracle(&r, &s, &z));
    }

    let mut iqr_ok = true;
    for n in [4, 9, 50] {
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..9.0)).collect();
        let bound = 0.5 * (percentile_oracle(&d, 0.75) - percentile_oracle(&d, 0.25));
        for shift in [0.1, -3.0, 3.0, 100.0] {
            iqr_ok &= clamp_shift_iqr(&d, shift).unwrap() == shift.clamp(-bound, bound);
        }
    }
    check(
        knn_ok && worst_gap < 1e-6 && iqr_ok,
        format!("kNN exact: {knn_ok}; L1 worst gap to grid {worst_gap:.1e}; IQR exact: {iqr_ok}"),
    )
}

fn metric_correctness() -> Outcome {
    let grid = PixelGrid::new(8, 6).unwrap();
    let gt: Vec<f64> = (0..48).map(|i| 1.0 + 0.25 * i as f64).collect();
    let pred: Vec<f64> = gt.iter().map(|g| 1.05 * g).collect();
    let (p, g) = (DepthMap::new(grid, pred), DepthMap::new(grid, gt));
    let raw = eval_depth(&p, &g, INLIER_THRESHOLD, false).unwrap();
    let scaled = eval_depth(&p, &g, INLIER_THRESHOLD, true).unwrap();
    // 1.2875 / 1.25 is exactly 1.03 in binary
    let edge = eval_depth(
        &DepthMap::new(grid, (0..48).map(|i| if i == 0 { 1.2875 } else { 2.0 }).collect()),
        &DepthMap::new(grid, (0..48).map(|i| if i == 0 { 1.25 } else { 2.0 }).collect()),
        1.03,
        false,
    )
    .unwrap();
    check(
        (raw.abs_rel - 0.05).abs() < 1e-12 && raw.inlier_ratio == 0.0 && scaled.abs_rel < 1e-12 && edge.inlier_ratio == 47.0 / 48.0,
        format!(
            "abs_rel {:.12}, tau {}, scaled abs_rel {:.1e}, ratio-1.03 pixel counted: {}",
            raw.abs_rel,
            raw.inlier_ratio,
            scaled.abs_rel,
            edge.inlier_ratio != 47.0 / 48.0
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("bundle");
    let mut spec = distorted_plane(0.2);
    spec.noise_sigma = 0.01;
    more_core::synth::write_bundle(&generate(&spec).unwrap(), &bundle).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("out{threads}"));
        let run = common::more(&["--threads", threads, "refine", common::p(&bundle), "--out", common::p(&out)]);
        if run.code != 0 {
            return check(false, format!("refine failed: {}", run.stderr));
        }
        outputs.push((
            std::fs::read(out.join("trace.csv")).unwrap(),
            std::fs::read(out.join("refined_points_ref.npy")).unwrap(),
        ));
    }
    let same_trace = outputs[0].0 == outputs[1].0;
    let same_points = outputs[0].1 == outputs[1].1;
    check(
        same_trace && same_points,
        format!("--threads 1 vs 4: trace.csv identical {same_trace}, refined points identical {same_points}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 7] = [
        ("affine recovery", affine_recovery, Duration::from_secs(1)),
        ("gradient correctness", gradient_correctness, Duration::from_secs(30)),
        ("planar fixed point", planar_fixed_point, Duration::MAX),
        ("refinement efficacy", refinement_efficacy, Duration::from_secs(10)),
        ("oracle equivalence", oracle_equivalence, Duration::MAX),
        ("metric correctness", metric_correctness, Duration::MAX),
        ("determinism", determinism, Duration::MAX),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let in_time = took < budget;
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = if budget == Duration::MAX { String::new() } else { format!(" < {budget:?}") };
        println!(
            "{} {name}: {} [{:.2}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
