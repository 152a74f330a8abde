use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{RefinementConfig, Vec3};
use crate::par::for_each_ordered;

use super::{Priors, RefinementGraph, RefinementState, REF, SRC};

/// Smoothing constant of every norm in the objective.
pub const SMOOTHING_EPS: f64 = 1e-8;

#[inline]
fn sn(x: f64) -> f64 {
    (x * x + SMOOTHING_EPS * SMOOTHING_EPS).sqrt()
}

#[inline]
fn sn3(x: &Vec3) -> f64 {
    (x.dot(x) + SMOOTHING_EPS * SMOOTHING_EPS).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Intra,
    Inter,
    Knn,
    Ray,
    Similarity,
    Normal,
}

impl Term {
    pub const ALL: [Term; 6] = [
        Term::Intra,
        Term::Inter,
        Term::Knn,
        Term::Ray,
        Term::Similarity,
        Term::Normal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::Intra => "intra",
            Term::Inter => "inter",
            Term::Knn => "knn",
            Term::Ray => "ray",
            Term::Similarity => "sim",
            Term::Normal => "normal",
        }
    }

    /// Weight of the term in the total.
    pub fn lambda(self, cfg: &RefinementConfig) -> f64 {
        match self {
            Term::Intra | Term::Inter | Term::Knn => cfg.lambda_p,
            Term::Ray => cfg.lambda_r,
            Term::Similarity => cfg.lambda_s,
            Term::Normal => cfg.lambda_n,
        }
    }
}

/// Unweighted term values summed over both views.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LossTerms {
    pub intra: f64,
    pub inter: f64,
    pub knn: f64,
    pub ray: f64,
    pub sim: f64,
    pub normal: f64,
}

impl LossTerms {
    pub fn get(&self, term: Term) -> f64 {
        match term {
            Term::Intra => self.intra,
            Term::Inter => self.inter,
            Term::Knn => self.knn,
            Term::Ray => self.ray,
            Term::Similarity => self.sim,
            Term::Normal => self.normal,
        }
    }

    fn slot(&mut self, term: Term) -> &mut f64 {
        match term {
            Term::Intra => &mut self.intra,
            Term::Inter => &mut self.inter,
            Term::Knn => &mut self.knn,
            Term::Ray => &mut self.ray,
            Term::Similarity => &mut self.sim,
            Term::Normal => &mut self.normal,
        }
    }

    pub fn weighted_total(&self, cfg: &RefinementConfig) -> f64 {
        Term::ALL.iter().map(|&t| t.lambda(cfg) * self.get(t)).sum()
    }
}

/// Partial derivatives with respect to every optimized quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub points: [Vec<Vec3>; 2],
    pub normals: [Vec<Vec3>; 2],
    pub scale: [f64; 2],
}

impl Gradient {
    pub fn zeros(state: &RefinementState) -> Self {
        let z = |v: usize| vec![Vec3::zeros(); state.points[v].points.len()];
        Self {
            points: [z(REF), z(SRC)],
            normals: [z(REF), z(SRC)],
            scale: [0.0; 2],
        }
    }

    pub fn norm(&self) -> f64 {
        let mut sq = self.scale[0] * self.scale[0] + self.scale[1] * self.scale[1];
        for v in 0..2 {
            sq += self.points[v].iter().chain(&self.normals[v]).map(|g| g.norm_squared()).sum::<f64>();
        }
        sq.sqrt()
    }

    fn add_scaled(&mut self, other: &Gradient, f: f64) {
        for v in 0..2 {
            for (a, b) in self.points[v].iter_mut().zip(&other.points[v]) {
                *a += f * b;
            }
            for (a, b) in self.normals[v].iter_mut().zip(&other.normals[v]) {
                *a += f * b;
            }
            self.scale[v] += f * other.scale[v];
        }
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub terms: LossTerms,
    /// Value each term takes when every smoothed norm has a zero argument.
    pub floor: LossTerms,
    pub total: f64,
    pub gradient: Gradient,
}

/// One summand with the gradient entries it touches. Unused slots carry
/// zero vectors.
struct Contrib {
    value: f64,
    floor: f64,
    points: [(usize, usize, Vec3); 2],
    normals: [(usize, usize, Vec3); 2],
    scale: (usize, f64),
}

const NONE: (usize, usize, Vec3) = (0, 0, Vec3::new(0.0, 0.0, 0.0));

struct Sum<'a> {
    value: f64,
    floor: f64,
    grad: Option<&'a mut Gradient>,
}

impl Sum<'_> {
    fn add(&mut self, c: Contrib) {
        self.value += c.value;
        self.floor += c.floor;
        if let Some(g) = self.grad.as_deref_mut() {
            for (v, i, d) in c.points {
                g.points[v][i] += d;
            }
            for (v, i, d) in c.normals {
                g.normals[v][i] += d;
            }
            g.scale[c.scale.0] += c.scale.1;
        }
    }
}

/// Summand `w * (|n_a . (P_b - P_a)| + gamma |n_b - n_a|)`, shared by the
/// intra edges and the first inter-view sum.
fn plane_pair(state: &RefinementState, (va, a): (usize, usize), (vb, b): (usize, usize), w: f64, gamma: f64) -> Contrib {
    let n_a = state.normals[va].normals[a];
    let n_b = state.normals[vb].normals[b];
    let d = state.points[vb].points[b] - state.points[va].points[a];
    let t = n_a.dot(&d);
    let u = n_b - n_a;
    let (st, su) = (sn(t), sn3(&u));
    let gt = w * t / st;
    let gu = (w * gamma / su) * u;
    Contrib {
        value: w * st + w * gamma * su,
        floor: w * SMOOTHING_EPS + w * gamma * SMOOTHING_EPS,
        points: [(vb, b, gt * n_a), (va, a, -gt * n_a)],
        normals: [(va, a, gt * d - gu), (vb, b, gu)],
        scale: (0, 0.0),
    }
}

fn intra(state: &RefinementState, graph: &RefinementGraph, view: usize, gamma: f64, sum: &mut Sum) {
    for_each_ordered(
        &graph.intra[view],
        |e| plane_pair(state, (view, e.a), (view, e.b), e.w, gamma),
        |c| sum.add(c),
    );
}

fn inter(state: &RefinementState, graph: &RefinementGraph, anchor: usize, gamma: f64, rho: f64, sum: &mut Sum) {
    let other = 1 - anchor;
    for_each_ordered(
        &graph.inter[anchor],
        |e| plane_pair(state, (anchor, e.anchor), (other, e.other), e.w, gamma),
        |c| sum.add(c),
    );
    if rho == 0.0 {
        return;
    }
    let half = 0.5 * gamma;
    for_each_ordered(
        &graph.paired[anchor],
        |e| {
            let n_a = state.normals[anchor].normals[e.anchor];
            let n_b = state.normals[other].normals[e.anchor_match];
            let d = state.points[anchor].points[e.anchor_offset] - state.points[other].points[e.other_offset];
            let t = n_a.dot(&d);
            let u = n_a - n_b;
            let (st, su) = (sn(t), sn3(&u));
            let w = rho * e.w;
            let gt = w * t / st;
            let gu = (w * half / su) * u;
            Contrib {
                value: w * st + w * half * su,
                floor: w * SMOOTHING_EPS + w * half * SMOOTHING_EPS,
                points: [(anchor, e.anchor_offset, gt * n_a), (other, e.other_offset, -gt * n_a)],
                normals: [(anchor, e.anchor, gt * d + gu), (other, e.anchor_match, -gu)],
                scale: (0, 0.0),
            }
        },
        |c| sum.add(c),
    );
}

fn knn(state: &RefinementState, graph: &RefinementGraph, query: usize, sum: &mut Sum) {
    let support = 1 - query;
    for_each_ordered(
        &graph.knn[query],
        |e| {
            let n_a = state.normals[query].normals[e.query];
            let n_b = state.normals[support].normals[e.support];
            let d = state.points[query].points[e.query] - state.points[support].points[e.support];
            let t1 = n_a.dot(&d);
            let t2 = -n_b.dot(&d);
            let u = n_a - n_b;
            let (s1, s2, su) = (sn(t1), sn(t2), sn3(&u));
            let w = e.w;
            let g1 = w * t1 / s1;
            let g2 = w * t2 / s2;
            let gu = (w / su) * u;
            let gp = g1 * n_a - g2 * n_b;
            Contrib {
                value: w * s1 + w * s2 + w * su,
                floor: 3.0 * w * SMOOTHING_EPS,
                points: [(query, e.query, gp), (support, e.support, -gp)],
                normals: [(query, e.query, g1 * d + gu), (support, e.support, -g2 * d - gu)],
                scale: (0, 0.0),
            }
        },
        |c| sum.add(c),
    );
}

fn ray(state: &RefinementState, graph: &RefinementGraph, view: usize, sum: &mut Sum) {
    for_each_ordered(
        &graph.rays[view],
        |r| {
            let x = state.points[view].points[r.pixel] - r.origin;
            let c = r.direction.cross(&x) * r.inv_norm;
            let s = sn3(&c);
            Contrib {
                value: s,
                floor: SMOOTHING_EPS,
                points: [(view, r.pixel, c.cross(&r.direction) * (r.inv_norm / s)), NONE],
                normals: [NONE; 2],
                scale: (0, 0.0),
            }
        },
        |c| sum.add(c),
    );
}

fn similarity(state: &RefinementState, priors: &Priors, view: usize, sum: &mut Sum) {
    let s = state.scale[view];
    let pixels: Vec<usize> = (0..priors.mask.len()).filter(|&i| priors.mask[i]).collect();
    for_each_ordered(
        &pixels,
        |&i| {
            let x = state.points[view].points[i] - priors.centroid;
            let a = sn3(&x);
            let b = sn3(&(priors.points[i] - priors.centroid));
            let e = a - s * b;
            let se = sn(e);
            let g = e / se;
            Contrib {
                value: se,
                floor: SMOOTHING_EPS,
                points: [(view, i, x * (g / a)), NONE],
                normals: [NONE; 2],
                scale: (view, -g * b),
            }
        },
        |c| sum.add(c),
    );
}

fn normal_prior(state: &RefinementState, priors: &Priors, view: usize, sum: &mut Sum) {
    let pixels: Vec<usize> = (0..priors.mask.len()).filter(|&i| priors.mask[i]).collect();
    for_each_ordered(
        &pixels,
        |&i| {
            let u = state.normals[view].normals[i] - priors.normals[i];
            let s = sn3(&u);
            Contrib {
                value: s,
                floor: SMOOTHING_EPS,
                points: [NONE; 2],
                normals: [(view, i, u / s), NONE],
                scale: (0, 0.0),
            }
        },
        |c| sum.add(c),
    );
}

fn run_term(state: &RefinementState, graph: &RefinementGraph, cfg: &RefinementConfig, term: Term, sum: &mut Sum) {
    for v in [REF, SRC] {
        match term {
            Term::Intra => intra(state, graph, v, cfg.gamma, sum),
            Term::Inter => inter(state, graph, v, cfg.gamma, cfg.rho, sum),
            Term::Knn => knn(state, graph, v, sum),
            Term::Ray => ray(state, graph, v, sum),
            Term::Similarity => similarity(state, &graph.priors[v], v, sum),
            Term::Normal => normal_prior(state, &graph.priors[v], v, sum),
        }
    }
}

/// Value, floor and gradient of one unweighted term over both views.
pub fn evaluate_term(
    state: &RefinementState,
    graph: &RefinementGraph,
    cfg: &RefinementConfig,
    term: Term,
) -> Result<(f64, f64, Gradient)> {
    let mut grad = Gradient::zeros(state);
    let mut sum = Sum {
        value: 0.0,
        floor: 0.0,
        grad: Some(&mut grad),
    };
    run_term(state, graph, cfg, term, &mut sum);
    let (value, floor) = (sum.value, sum.floor);
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss { term: term.name() });
    }
    Ok((value, floor, grad))
}

/// All terms, the weighted total, and its gradient.
pub fn evaluate(state: &RefinementState, graph: &RefinementGraph, cfg: &RefinementConfig) -> Result<Evaluation> {
    let mut terms = LossTerms::default();
    let mut floor = LossTerms::default();
    let mut gradient = Gradient::zeros(state);
    for term in Term::ALL {
        let (value, fl, g) = evaluate_term(state, graph, cfg, term)?;
        *terms.slot(term) = value;
        *floor.slot(term) = fl;
        let lambda = term.lambda(cfg);
        if lambda != 0.0 {
            gradient.add_scaled(&g, lambda);
        }
    }
    let total = terms.weighted_total(cfg);
    if !total.is_finite() {
        return Err(Error::NonFiniteLoss { term: "total" });
    }
    Ok(Evaluation {
        terms,
        floor,
        total,
        gradient,
    })
}

pub fn total_loss_and_grad(
    state: &RefinementState,
    graph: &RefinementGraph,
    cfg: &RefinementConfig,
) -> Result<(f64, Gradient)> {
    let e = evaluate(state, graph, cfg)?;
    Ok((e.total, e.gradient))
}

fn value_only(f: impl FnOnce(&mut Sum)) -> f64 {
    let mut sum = Sum {
        value: 0.0,
        floor: 0.0,
        grad: None,
    };
    f(&mut sum);
    sum.value
}

/// Intra-view coplanarity loss of one view.
pub fn loss_intra(state: &RefinementState, graph: &RefinementGraph, view: usize, gamma: f64) -> f64 {
    value_only(|s| intra(state, graph, view, gamma, s))
}

/// Cross-view coplanarity loss anchored in `anchor_view`.
pub fn loss_inter(state: &RefinementState, graph: &RefinementGraph, anchor_view: usize, gamma: f64, rho: f64) -> f64 {
    value_only(|s| inter(state, graph, anchor_view, gamma, rho, s))
}

/// kNN coplanarity loss with `query_view` as the query side.
pub fn loss_knn(state: &RefinementState, graph: &RefinementGraph, query_view: usize) -> f64 {
    value_only(|s| knn(state, graph, query_view, s))
}

pub fn loss_ray(state: &RefinementState, graph: &RefinementGraph, view: usize) -> f64 {
    value_only(|s| ray(state, graph, view, s))
}

pub fn loss_similarity(state: &RefinementState, priors: &Priors, view: usize) -> f64 {
    value_only(|s| similarity(state, priors, view, s))
}

pub fn loss_normal_prior(state: &RefinementState, priors: &Priors, view: usize) -> f64 {
    value_only(|s| normal_prior(state, priors, view, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, InterEdge, KnnEdge, PairEdge, PairedEdge, RayAnchor, SceneLevel};
    use crate::model::{CameraModel, CorrespondenceSet, Image, NormalMap, PixelGrid, PointMap};

    const EPS: f64 = SMOOTHING_EPS;

    /// `a` equals the unsmoothed value `b` up to `norms` smoothing floors.
    fn close(a: f64, b: f64, norms: usize) -> bool {
        (a - b).abs() <= norms as f64 * EPS + 1e-12
    }

    fn tiny_state(p: [Vec<Vec3>; 2], n: [Vec<Vec3>; 2]) -> RefinementState {
        let grid = PixelGrid::new(2, 2).unwrap();
        let pm = |pts: Vec<Vec3>| PointMap::from_points(grid, pts).unwrap();
        let nm = |ns: Vec<Vec3>| NormalMap {
            grid,
            normals: ns,
            valid: vec![true; 4],
        };
        let [p0, p1] = p;
        let [n0, n1] = n;
        RefinementState {
            points: [pm(p0), pm(p1)],
            normals: [nm(n0), nm(n1)],
            scale: [1.0, 1.0],
        }
    }

    fn empty_graph(state: &RefinementState) -> RefinementGraph {
        let priors = [0, 1].map(|v| Priors::from_state(state, v, 0.0).unwrap());
        RefinementGraph {
            intra: [vec![], vec![]],
            inter: [vec![], vec![]],
            paired: [vec![], vec![]],
            knn: [vec![], vec![]],
            rays: [vec![], vec![]],
            priors,
            active: [vec![true; 4], vec![true; 4]],
        }
    }

    fn z() -> Vec3 {
        Vec3::new(0.0, 0.0, 1.0)
    }

    #[test]
    fn single_intra_edge() {
        let pts = vec![Vec3::zeros(), Vec3::new(0.0, 0.0, 0.2), Vec3::zeros(), Vec3::zeros()];
        let st = tiny_state([pts.clone(), pts], [vec![z(); 4], vec![z(); 4]]);
        let mut g = empty_graph(&st);
        g.intra[REF].push(PairEdge { a: 0, b: 1, w: 1.0 });
        let l = loss_intra(&st, &g, REF, 0.5);
        assert!(close(l, 0.2, 2), "{l}");
        g.intra[REF][0].w = 2.0;
        assert!((loss_intra(&st, &g, REF, 0.5) - 2.0 * l).abs() < 1e-15);
    }

    #[test]
    fn single_inter_edge() {
        let r = vec![Vec3::zeros(); 4];
        let mut s = vec![Vec3::zeros(); 4];
        s[0] = Vec3::new(0.3, 0.0, 0.1);
        let st = tiny_state([r, s], [vec![z(); 4], vec![z(); 4]]);
        let mut g = empty_graph(&st);
        g.inter[REF].push(InterEdge {
            anchor: 0,
            other: 0,
            w: 1.0,
        });
        g.paired[REF].push(PairedEdge {
            anchor: 0,
            anchor_match: 0,
            anchor_offset: 0,
            other_offset: 0,
            w: 1.0,
        });
        assert!(close(loss_inter(&st, &g, REF, 0.5, 0.0), 0.1, 2));
        // the paired part only adds when rho > 0
        let with = loss_inter(&st, &g, REF, 0.5, 0.1);
        assert!(close(with, 0.1 + 0.1 * 0.1, 4), "{with}");
    }

    #[test]
    fn single_knn_pair() {
        let mut r = vec![Vec3::zeros(); 4];
        r[0] = Vec3::new(0.0, 0.0, 0.4);
        let st = tiny_state([r, vec![Vec3::zeros(); 4]], [vec![z(); 4], vec![z(); 4]]);
        let mut g = empty_graph(&st);
        g.knn[REF].push(KnnEdge {
            query: 0,
            support: 0,
            w: 1.0,
        });
        assert!(close(loss_knn(&st, &g, REF), 0.8, 3));
    }

    #[test]
    fn ray_distance() {
        let mut r = vec![Vec3::zeros(); 4];
        r[0] = Vec3::new(0.3, 0.0, 5.0);
        r[1] = Vec3::new(0.0, 0.0, 7.0);
        let st = tiny_state([r, vec![Vec3::zeros(); 4]], [vec![z(); 4], vec![z(); 4]]);
        let mut g = empty_graph(&st);
        let anchor = |pixel, scale: f64| RayAnchor {
            pixel,
            origin: Vec3::zeros(),
            direction: z() * scale,
            inv_norm: 1.0 / scale,
        };
        g.rays[REF].push(anchor(0, 2.0));
        assert!((loss_ray(&st, &g, REF) - 0.3).abs() < 1e-12);
        g.rays[REF] = vec![anchor(1, 1.0)];
        assert!((loss_ray(&st, &g, REF) - EPS).abs() < 1e-20);
    }

    #[test]
    fn similarity_cases() {
        let base = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
            Vec3::new(0.0, -2.0, 0.0),
        ];
        let mut st = tiny_state([base.clone(), base.clone()], [vec![z(); 4], vec![z(); 4]]);
        let priors = Priors::from_state(&st, REF, 0.0).unwrap();
        assert_eq!(priors.centroid, Vec3::zeros());
        assert!(loss_similarity(&st, &priors, REF) <= 4.0 * EPS);

        st.points[REF].points = base.iter().map(|p| 2.0 * p).collect();
        st.scale[REF] = 2.0;
        assert!(close(loss_similarity(&st, &priors, REF), 0.0, 4));

        st.points[REF].points = base.clone();
        st.points[REF].points[2] = Vec3::new(0.0, 2.1, 0.0);
        st.scale[REF] = 1.0;
        assert!(close(loss_similarity(&st, &priors, REF), 0.1, 4));
    }

    #[test]
    fn normal_prior_chord_and_mask() {
        let mut st = tiny_state([vec![Vec3::zeros(); 4], vec![Vec3::zeros(); 4]], [vec![z(); 4], vec![z(); 4]]);
        let mut priors = Priors::from_state(&st, REF, 0.0).unwrap();
        let a = 60f64.to_radians();
        st.normals[REF].normals[0] = Vec3::new(a.sin(), 0.0, a.cos());
        let l = loss_normal_prior(&st, &priors, REF);
        assert!(close(l, 1.0, 4), "{l}");
        priors.mask[0] = false;
        assert!(close(loss_normal_prior(&st, &priors, REF), 0.0, 3));
    }

    fn plane_level() -> (SceneLevel, RefinementState) {
        let grid = PixelGrid::new(6, 5).unwrap();
        let c0 = CameraModel::simple(8.0, 6, 5);
        let c1 = c0
            .with_pose(nalgebra::Matrix3::identity(), Vec3::new(0.5, 0.0, 0.0))
            .unwrap();
        let sample = |cam: &CameraModel| {
            let pts = (0..grid.len())
                .map(|i| {
                    let (r, c) = grid.row_col(i);
                    cam.to_world(&(cam.pixel_direction(r as f64, c as f64) * 4.0))
                })
                .collect();
            PointMap::from_points(grid, pts).unwrap()
        };
        let cams = [c0.clone(), c1.clone()];
        let state = RefinementState::from_points([sample(&c0), sample(&c1)], &cams);
        let m = CorrespondenceSet::new(vec![[2.0, 3.0], [1.0, 1.0]], vec![[2.0, 2.0], [1.0, 0.0]]).unwrap();
        let img = Image::constant(grid, Vec3::repeat(0.3));
        (
            SceneLevel {
                images: [img.clone(), img],
                cameras: cams,
                matches: m,
            },
            state,
        )
    }

    #[test]
    fn plane_terms_vanish_and_are_translation_invariant() {
        let (scene, state) = plane_level();
        let cfg = RefinementConfig::default();
        let priors = [0, 1].map(|v| Priors::from_state(&state, v, 0.0).unwrap());
        let g = build_graph(&scene, &state, priors, &cfg).unwrap();
        let e = evaluate(&state, &g, &cfg).unwrap();
        for t in [Term::Intra, Term::Inter, Term::Knn, Term::Similarity, Term::Normal] {
            assert!(e.terms.get(t) - e.floor.get(t) < 1e-10, "{t:?}");
        }

        let shift = Vec3::new(0.7, -1.1, 0.4);
        let mut moved = state.clone();
        for v in 0..2 {
            for p in &mut moved.points[v].points {
                *p += shift;
            }
        }
        let mut g2 = g.clone();
        for v in 0..2 {
            g2.priors[v].centroid += shift;
            for p in &mut g2.priors[v].points {
                *p += shift;
            }
            for r in &mut g2.rays[v] {
                r.origin += shift;
            }
        }
        let e2 = evaluate(&moved, &g2, &cfg).unwrap();
        for t in Term::ALL {
            assert!((e.terms.get(t) - e2.terms.get(t)).abs() < 1e-9, "{t:?}");
        }
    }

    #[test]
    fn pure_coplanarity_without_regularizers() {
        let (scene, mut state) = plane_level();
        state.points[SRC].points[7].z += 0.05;
        let mut cfg = RefinementConfig::default();
        cfg.lambda_r = 0.0;
        cfg.lambda_s = 0.0;
        cfg.lambda_n = 0.0;
        cfg.gamma = 0.0;
        cfg.rho = 0.0;
        let priors = [0, 1].map(|v| Priors::from_state(&state, v, 0.0).unwrap());
        let g = build_graph(&scene, &state, priors, &cfg).unwrap();
        let e = evaluate(&state, &g, &cfg).unwrap();
        let sums: f64 = [REF, SRC]
            .iter()
            .map(|&v| loss_intra(&state, &g, v, 0.0) + loss_inter(&state, &g, v, 0.0, 0.0) + loss_knn(&state, &g, v))
            .sum();
        assert!((e.total - cfg.lambda_p * sums).abs() < 1e-9 * e.total.max(1.0));
    }

    #[test]
    fn non_finite_names_the_term() {
        let (scene, mut state) = plane_level();
        let cfg = RefinementConfig::default();
        let priors = [0, 1].map(|v| Priors::from_state(&state, v, 0.0).unwrap());
        let g = build_graph(&scene, &state, priors, &cfg).unwrap();
        state.scale[SRC] = f64::INFINITY;
        match evaluate(&state, &g, &cfg) {
            Err(Error::NonFiniteLoss { term }) => assert_eq!(term, "sim"),
            other => panic!("{other:?}"),
        }
    }
}
