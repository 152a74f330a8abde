use more_core::alignment::align_pair;
use more_core::graph::{build_graph, evaluate, Priors, RefinementState, Term, REF, SRC};
use more_core::model::{RefinementConfig, ScenePair};
use more_core::optimizer::{prepare, run_refinement};
use more_core::synth::{generate, SceneSpec};

fn match_residual(pair: &ScenePair, state: &RefinementState) -> f64 {
    let m = &pair.matches;
    let mut sum = 0.0;
    let mut n = 0;
    for (i, j, _) in m.usable(&state.points[REF], &state.points[SRC]) {
        sum += (state.points[REF].points[i] - state.points[SRC].points[j]).norm();
        n += 1;
    }
    sum / n as f64
}

#[test]
fn coincident_plane_is_a_fixed_point() {
    let scene = generate(&SceneSpec::plane_pair(32, 24, 64.0, 4.0, 0.5)).unwrap();
    let cfg = RefinementConfig::default();
    let aligned = align_pair(&scene.pair, &cfg).unwrap();
    let (level, init) = prepare(&scene.pair, &aligned);
    let priors = [REF, SRC].map(|v| Priors::from_state(&init, v, 0.0).unwrap());
    let g = build_graph(&level, &init, priors, &cfg).unwrap();
    let e = evaluate(&init, &g, &cfg).unwrap();
    for t in Term::ALL {
        assert!(e.terms.get(t) - e.floor.get(t) < 1e-10, "{}: {}", t.name(), e.terms.get(t) - e.floor.get(t));
    }
    assert!(e.gradient.norm() < 1e-6, "{}", e.gradient.norm());

    let mut one = cfg.clone();
    one.levels = 1;
    one.iters_per_level = vec![50];
    let (out, _) = run_refinement(&level, &init, &one).unwrap();
    for v in [REF, SRC] {
        for (a, b) in out.points[v].points.iter().zip(&init.points[v].points) {
            assert!((a - b).norm() < 1e-6);
        }
    }
}

#[test]
fn noisy_plane_residual_halves() {
    let mut spec = SceneSpec::plane_pair(64, 48, 64.0, 4.0, 0.5);
    spec.noise_sigma = 0.01;
    spec.seed = 3;
    let scene = generate(&spec).unwrap();
    let cfg = RefinementConfig::default();
    let aligned = align_pair(&scene.pair, &cfg).unwrap();
    let (level, init) = prepare(&scene.pair, &aligned);
    let before = match_residual(&scene.pair, &init);
    let (out, trace) = run_refinement(&level, &init, &cfg).unwrap();
    let after = match_residual(&scene.pair, &out);
    println!("residual {before:.5} -> {after:.5} ratio {:.3}", after / before);
    for l in &trace.levels {
        println!("level {} {:.6} -> {:.6}", l.level, l.initial_total, l.final_total);
        assert!(l.final_total < l.initial_total);
    }
    assert!(after <= 0.5 * before);
}
