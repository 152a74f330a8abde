//! Cross-view scale/shift alignment.
//!
//! The source view is brought onto the reference view with a single scale
//! `alpha` and shift `beta` minimizing the depth-weighted L1 distance between
//! matched points, `sum_i (1/z_i) |alpha * src_i + beta - ref_i|_1`.
//! Matches are screened first by RANSAC over the same model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    AffineAlignment, CameraModel, CorrespondenceSet, PointMap, RansacConfig, RefinementConfig,
    ScenePair, Vec3,
};

const IRLS_MAX_ITERS: usize = 100;
const IRLS_REL_TOL: f64 = 1e-10;
const IRLS_RESIDUAL_FLOOR: f64 = 1e-6;
const RANSAC_DEPTH_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RansacReport {
    pub inlier_count: usize,
    pub threshold_used: f64,
    pub iterations_run: usize,
}

/// Matched world points gathered from a pair, with the reference depth used
/// as the solver weight denominator.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchedPoints {
    pub ref_pts: Vec<Vec3>,
    pub src_pts: Vec<Vec3>,
    pub ref_depths: Vec<f64>,
    /// Position of each entry in the originating correspondence set.
    pub match_index: Vec<usize>,
}

impl MatchedPoints {
    pub fn len(&self) -> usize {
        self.ref_pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ref_pts.is_empty()
    }

    fn select(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut out = Self::default();
        for k in (0..self.len()).filter(|&k| keep(k)) {
            out.ref_pts.push(self.ref_pts[k]);
            out.src_pts.push(self.src_pts[k]);
            out.ref_depths.push(self.ref_depths[k]);
            out.match_index.push(self.match_index[k]);
        }
        out
    }
}

/// Collects inlier-flagged matches whose pixels are valid in both world-frame
/// maps and whose reference point lies in front of the reference camera.
pub fn gather_matches(
    ref_world: &PointMap,
    ref_cam: &CameraModel,
    src_world: &PointMap,
    matches: &CorrespondenceSet,
) -> MatchedPoints {
    let mut out = MatchedPoints::default();
    for (i, j, m) in matches.usable(ref_world, src_world) {
        let depth = ref_cam.to_camera(&ref_world.points[i]).z;
        if depth > 0.0 {
            out.ref_pts.push(ref_world.points[i]);
            out.src_pts.push(src_world.points[j]);
            out.ref_depths.push(depth);
            out.match_index.push(m);
        }
    }
    out
}

/// Screens matches with RANSAC on the model `ref ~ alpha * src + beta`.
///
/// Both maps must be in the world frame. The returned set keeps every match
/// but clears `inlier` for rejected or unusable ones.
pub fn filter_matches_ransac(
    ref_world: &PointMap,
    ref_cam: &CameraModel,
    src_world: &PointMap,
    matches: &CorrespondenceSet,
    cfg: &RansacConfig,
) -> Result<(CorrespondenceSet, RansacReport)> {
    let cand = gather_matches(ref_world, ref_cam, src_world, matches);
    let n = cand.len();
    if n < 3 {
        return Err(Error::TooFewMatches { needed: 3, got: n });
    }
    let threshold = match cfg.threshold {
        Some(t) => t,
        None => RANSAC_DEPTH_FRACTION * median(&cand.ref_depths),
    };

    let mut keep = vec![true; n];
    let mut iterations_run = 0;
    if cfg.enabled {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let unit = vec![1.0; 3];
        let mut best_count = 0;
        for _ in 0..cfg.max_iters {
            iterations_run += 1;
            let sample = rand::seq::index::sample(&mut rng, n, 3);
            let r: Vec<Vec3> = sample.iter().map(|k| cand.ref_pts[k]).collect();
            let s: Vec<Vec3> = sample.iter().map(|k| cand.src_pts[k]).collect();
            let Some((alpha, beta)) = weighted_least_squares(&r, &s, &unit) else {
                continue;
            };
            if !(alpha > 0.0) {
                continue;
            }
            let flags: Vec<bool> = (0..n)
                .map(|k| (alpha * cand.src_pts[k] + beta - cand.ref_pts[k]).norm() < threshold)
                .collect();
            let count = flags.iter().filter(|&&f| f).count();
            if count > best_count {
                best_count = count;
                keep = flags;
                if count == n {
                    break;
                }
            }
        }
        if best_count == 0 {
            return Err(Error::NoInliers { threshold });
        }
    }

    let mut filtered = matches.clone();
    filtered.inlier.iter_mut().for_each(|f| *f = false);
    for (k, &m) in cand.match_index.iter().enumerate() {
        filtered.inlier[m] = keep[k];
    }
    let report = RansacReport {
        inlier_count: filtered.inlier_count(),
        threshold_used: threshold,
        iterations_run,
    };
    Ok((filtered, report))
}

/// Closed-form minimizer of `sum_i w_i |alpha * src_i + beta - ref_i|^2`.
/// `None` when the weighted source spread vanishes.
pub fn weighted_least_squares(ref_pts: &[Vec3], src_pts: &[Vec3], weights: &[f64]) -> Option<(f64, Vec3)> {
    let coord_weights: Vec<[f64; 3]> = weights.iter().map(|&w| [w; 3]).collect();
    per_coordinate_least_squares(ref_pts, src_pts, &coord_weights)
}

/// Least squares with an independent weight per residual coordinate: the
/// shift decouples per axis, leaving a scalar normal equation in `alpha`.
fn per_coordinate_least_squares(
    ref_pts: &[Vec3],
    src_pts: &[Vec3],
    weights: &[[f64; 3]],
) -> Option<(f64, Vec3)> {
    let mut src_mean = Vec3::zeros();
    let mut ref_mean = Vec3::zeros();
    for axis in 0..3 {
        let (mut ws, mut wsum_s, mut wsum_r) = (0.0, 0.0, 0.0);
        for ((s, r), w) in src_pts.iter().zip(ref_pts).zip(weights) {
            ws += w[axis];
            wsum_s += w[axis] * s[axis];
            wsum_r += w[axis] * r[axis];
        }
        if !(ws > 0.0) {
            return None;
        }
        src_mean[axis] = wsum_s / ws;
        ref_mean[axis] = wsum_r / ws;
    }
    let (mut num, mut den, mut mag) = (0.0, 0.0, 0.0);
    for ((s, r), w) in src_pts.iter().zip(ref_pts).zip(weights) {
        for axis in 0..3 {
            let ds = s[axis] - src_mean[axis];
            num += w[axis] * ds * (r[axis] - ref_mean[axis]);
            den += w[axis] * ds * ds;
            mag += w[axis] * s[axis] * s[axis];
        }
    }
    if !(den > 1e-24 * mag) || !den.is_normal() {
        return None;
    }
    let alpha = num / den;
    let beta = ref_mean - alpha * src_mean;
    Some((alpha, beta))
}

/// `sum_i (1/z_i) |alpha * src_i + beta - ref_i|_1`
pub fn l1_objective(ref_pts: &[Vec3], src_pts: &[Vec3], ref_depths: &[f64], alpha: f64, beta: &Vec3) -> f64 {
    ref_pts
        .iter()
        .zip(src_pts)
        .zip(ref_depths)
        .map(|((r, s), z)| (alpha * s + beta - r).abs().sum() / z)
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub alignment: AffineAlignment,
    /// Objective at the weighted least-squares initialization.
    pub objective_init: f64,
    pub objective_final: f64,
    /// Objective after initialization and after each accepted update.
    pub history: Vec<f64>,
}

/// Minimizes the depth-weighted L1 alignment objective.
pub fn solve_scale_shift(ref_pts: &[Vec3], src_pts: &[Vec3], ref_depths: &[f64]) -> Result<AffineAlignment> {
    solve_scale_shift_report(ref_pts, src_pts, ref_depths).map(|r| r.alignment)
}

/// [`solve_scale_shift`] with the objective trace.
///
/// Iteratively reweighted least squares from the weighted least-squares
/// start, then an exact line search on `alpha` with the shift at its
/// per-axis weighted median. Updates that would raise the objective are
/// rejected, so the trace never increases.
pub fn solve_scale_shift_report(ref_pts: &[Vec3], src_pts: &[Vec3], ref_depths: &[f64]) -> Result<SolveReport> {
    let n = ref_pts.len();
    if src_pts.len() != n || ref_depths.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: src_pts.len().min(ref_depths.len()),
        });
    }
    if n < 3 {
        return Err(Error::TooFewMatches { needed: 3, got: n });
    }
    if let Some(z) = ref_depths.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
        return Err(Error::InvalidConfig(format!("reference depth must be positive, got {z}")));
    }

    // Canonical order makes the result independent of input ordering.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let key = |k: usize| {
            [ref_pts[k].x, ref_pts[k].y, ref_pts[k].z, src_pts[k].x, src_pts[k].y, src_pts[k].z, ref_depths[k]]
        };
        let (ka, kb) = (key(a), key(b));
        ka.iter()
            .zip(&kb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let r: Vec<Vec3> = order.iter().map(|&k| ref_pts[k]).collect();
    let s: Vec<Vec3> = order.iter().map(|&k| src_pts[k]).collect();
    let z: Vec<f64> = order.iter().map(|&k| ref_depths[k]).collect();
    let w: Vec<f64> = z.iter().map(|z| 1.0 / z).collect();

    let (mut alpha, mut beta) = weighted_least_squares(&r, &s, &w).ok_or(Error::ScaleUnobservable)?;
    let objective_init = l1_objective(&r, &s, &z, alpha, &beta);
    let mut current = objective_init;
    let mut history = vec![current];

    for _ in 0..IRLS_MAX_ITERS {
        let coord_weights: Vec<[f64; 3]> = (0..n)
            .map(|k| {
                let res = alpha * s[k] + beta - r[k];
                [0, 1, 2].map(|a| w[k] / res[a].abs().max(IRLS_RESIDUAL_FLOOR))
            })
            .collect();
        let Some((a, b)) = per_coordinate_least_squares(&r, &s, &coord_weights) else {
            break;
        };
        let next = l1_objective(&r, &s, &z, a, &b);
        if !(next <= current) {
            break;
        }
        let rel = (current - next) / current.max(f64::MIN_POSITIVE);
        alpha = a;
        beta = b;
        current = next;
        history.push(current);
        if rel < IRLS_REL_TOL {
            break;
        }
    }

    let (a, b) = refine_alpha(&r, &s, &w, alpha);
    let polished = l1_objective(&r, &s, &z, a, &b);
    if polished < current {
        alpha = a;
        beta = b;
        current = polished;
        history.push(current);
    }

    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::NonPositiveScale(alpha));
    }
    Ok(SolveReport {
        alignment: AffineAlignment { scale: alpha, shift: beta },
        objective_init,
        objective_final: current,
        history,
    })
}

/// Minimizer of `sum_i w_i |x_i - b|` over `b` (lower weighted median).
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for &(v, wt) in &pairs {
        acc += wt;
        if acc >= 0.5 * total {
            return v;
        }
    }
    pairs.last().map_or(0.0, |p| p.0)
}

fn best_shift(r: &[Vec3], s: &[Vec3], w: &[f64], alpha: f64) -> Vec3 {
    let mut beta = Vec3::zeros();
    for axis in 0..3 {
        let vals: Vec<f64> = r.iter().zip(s).map(|(r, s)| r[axis] - alpha * s[axis]).collect();
        beta[axis] = weighted_median(&vals, w);
    }
    beta
}

/// Objective with the shift minimized out; convex and piecewise linear in `alpha`.
fn profile_objective(r: &[Vec3], s: &[Vec3], w: &[f64], alpha: f64) -> f64 {
    let beta = best_shift(r, s, w, alpha);
    r.iter()
        .zip(s)
        .zip(w)
        .map(|((r, s), w)| w * (alpha * s + beta - r).abs().sum())
        .sum()
}

/// Golden-section search on the profile objective around `alpha0`.
fn refine_alpha(r: &[Vec3], s: &[Vec3], w: &[f64], alpha0: f64) -> (f64, Vec3) {
    let f = |a: f64| profile_objective(r, s, w, a);
    let f0 = f(alpha0);
    let mut step = 1e-3 * alpha0.abs().max(1e-12);
    let (mut lo, mut hi) = (alpha0 - step, alpha0 + step);
    // expand until both ends are no better than the center (convexity)
    for _ in 0..60 {
        let (flo, fhi) = (f(lo), f(hi));
        if flo >= f0 && fhi >= f0 {
            break;
        }
        step *= 2.0;
        if flo < fhi {
            lo = alpha0 - step;
        } else {
            hi = alpha0 + step;
        }
    }
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * alpha0.abs().max(1e-300) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    let alpha = if f1 <= f2 { x1 } else { x2 };
    (alpha, best_shift(r, s, w, alpha))
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] + t * (sorted[hi] - sorted[lo])
}

/// Clamps a depth shift to `[-0.5 IQR, 0.5 IQR]` of the given depths.
pub fn clamp_shift_iqr(depths: &[f64], shift: f64) -> Result<f64> {
    let mut sorted: Vec<f64> = depths.to_vec();
    if sorted.len() < 4 {
        return Err(Error::TooFewValues {
            needed: 4,
            got: sorted.len(),
        });
    }
    if sorted.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidConfig("depths must be finite".into()));
    }
    sorted.sort_by(f64::total_cmp);
    let iqr = percentile(&sorted, 0.75) - percentile(&sorted, 0.25);
    let bound = 0.5 * iqr;
    Ok(shift.clamp(-bound, bound))
}

pub fn apply_alignment(pm: &PointMap, a: &AffineAlignment) -> PointMap {
    pm.map_valid(|p| a.apply(p))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile(&v, 0.5)
}

/// Result of aligning a pair: world-frame maps with the source aligned.
#[derive(Clone, Debug)]
pub struct AlignmentOutcome {
    pub ref_world: PointMap,
    pub src_world: PointMap,
    pub alignment: AffineAlignment,
    pub matches: CorrespondenceSet,
    pub ransac: RansacReport,
    /// Objective with the identity map, before any alignment.
    pub objective_identity: f64,
    pub objective_init: f64,
    pub objective_final: f64,
}

/// Moves both views to the world frame, screens matches, and solves for
/// the source scale and shift.
pub fn align_pair(pair: &ScenePair, cfg: &RefinementConfig) -> Result<AlignmentOutcome> {
    let ref_world = pair.reference.world_points();
    let src_world = pair.source.world_points();
    let ref_cam = &pair.reference.camera;
    let (matches, ransac) = filter_matches_ransac(&ref_world, ref_cam, &src_world, &pair.matches, &cfg.ransac)?;
    let inl = gather_matches(&ref_world, ref_cam, &src_world, &matches);
    let report = solve_scale_shift_report(&inl.ref_pts, &inl.src_pts, &inl.ref_depths)?;
    let objective_identity = l1_objective(&inl.ref_pts, &inl.src_pts, &inl.ref_depths, 1.0, &Vec3::zeros());
    let src_world = apply_alignment(&src_world, &report.alignment);
    Ok(AlignmentOutcome {
        ref_world,
        src_world,
        alignment: report.alignment,
        matches,
        ransac,
        objective_identity,
        objective_init: report.objective_init,
        objective_final: report.objective_final,
    })
}

/// [`align_pair`] with a known alignment: matches are still screened, but
/// the scale and shift are taken as given.
pub fn align_pair_with(pair: &ScenePair, cfg: &RefinementConfig, alignment: AffineAlignment) -> Result<AlignmentOutcome> {
    let ref_world = pair.reference.world_points();
    let src_world = pair.source.world_points();
    let ref_cam = &pair.reference.camera;
    let (matches, ransac) = filter_matches_ransac(&ref_world, ref_cam, &src_world, &pair.matches, &cfg.ransac)?;
    let inl = gather_matches(&ref_world, ref_cam, &src_world, &matches);
    let objective_identity = l1_objective(&inl.ref_pts, &inl.src_pts, &inl.ref_depths, 1.0, &Vec3::zeros());
    let objective = l1_objective(&inl.ref_pts, &inl.src_pts, &inl.ref_depths, alignment.scale, &alignment.shift);
    Ok(AlignmentOutcome {
        ref_world,
        src_world: apply_alignment(&src_world, &alignment),
        alignment,
        matches,
        ransac,
        objective_identity,
        objective_init: objective,
        objective_final: objective,
    })
}

/// Gathered inliers of `matches`, dropping rejected entries.
pub fn inlier_points(
    ref_world: &PointMap,
    ref_cam: &CameraModel,
    src_world: &PointMap,
    matches: &CorrespondenceSet,
) -> MatchedPoints {
    let all = gather_matches(ref_world, ref_cam, src_world, matches);
    all.select(|k| matches.inlier[all.match_index[k]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PixelGrid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_points(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(3.0..8.0)))
            .collect()
    }

    #[test]
    fn identity_alignment() {
        let pts = random_points(20, 1);
        let depths: Vec<f64> = pts.iter().map(|p| p.z).collect();
        let a = solve_scale_shift(&pts, &pts, &depths).unwrap();
        assert!((a.scale - 1.0).abs() < 1e-12);
        assert!(a.shift.norm() < 1e-12);
    }

    #[test]
    fn exact_inverse_of_applied_affine() {
        let r = random_points(30, 2);
        let s: Vec<Vec3> = r.iter().map(|p| 2.0 * p + Vec3::new(1.0, 0.0, 0.0)).collect();
        let depths: Vec<f64> = r.iter().map(|p| p.z).collect();
        let a = solve_scale_shift(&r, &s, &depths).unwrap();
        assert!((a.scale - 0.5).abs() < 1e-8);
        assert!((a.shift - Vec3::new(-0.5, 0.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn degenerate_source_is_unobservable() {
        let r = random_points(10, 3);
        let s = vec![Vec3::new(1.0, 2.0, 3.0); 10];
        let depths = vec![1.0; 10];
        assert!(matches!(solve_scale_shift(&r, &s, &depths), Err(Error::ScaleUnobservable)));
    }

    #[test]
    fn too_few_points() {
        let r = random_points(2, 3);
        assert!(matches!(
            solve_scale_shift(&r, &r, &[1.0, 1.0]),
            Err(Error::TooFewMatches { .. })
        ));
    }

    #[test]
    fn objective_trace_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = random_points(60, 4);
        let mut s: Vec<Vec3> = r.iter().map(|p| (p - Vec3::new(0.1, 0.2, -0.3)) * 2.0).collect();
        for p in s.iter_mut().take(12) {
            *p += Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        }
        let depths: Vec<f64> = r.iter().map(|p| p.z).collect();
        let rep = solve_scale_shift_report(&r, &s, &depths).unwrap();
        assert!(rep.history.windows(2).all(|w| w[1] <= w[0]), "{:?}", rep.history);
        assert!(rep.objective_final <= rep.objective_init);
        assert!((rep.alignment.scale - 0.5).abs() < 1e-2);
    }

    #[test]
    fn weighted_median_minimizes() {
        let v = [3.0, 1.0, 2.0, 10.0];
        let w = [1.0, 1.0, 1.0, 0.5];
        let m = weighted_median(&v, &w);
        let cost = |b: f64| v.iter().zip(&w).map(|(x, w)| w * (x - b).abs()).sum::<f64>();
        for k in 0..200 {
            let b = k as f64 * 0.06 - 1.0;
            assert!(cost(m) <= cost(b) + 1e-12);
        }
    }

    #[test]
    fn iqr_clamp_examples() {
        let d = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(clamp_shift_iqr(&d, 2.0).unwrap(), 0.75);
        assert_eq!(clamp_shift_iqr(&d, 0.0).unwrap(), 0.0);
        assert_eq!(clamp_shift_iqr(&d, -10.0).unwrap(), -0.75);
        assert_eq!(clamp_shift_iqr(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap(), 0.5);
        assert!(matches!(
            clamp_shift_iqr(&[1.0, 2.0, 3.0], 1.0),
            Err(Error::TooFewValues { .. })
        ));
    }

    #[test]
    fn apply_and_invert() {
        let g = PixelGrid::new(2, 2).unwrap();
        let pm = PointMap::from_points(g, vec![Vec3::new(1.0, 1.0, 1.0); 4]).unwrap();
        let a = AffineAlignment::new(2.0, Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(apply_alignment(&pm, &AffineAlignment::identity()), pm);
        let moved = apply_alignment(&pm, &a);
        assert_eq!(moved.points[0], Vec3::new(2.0, 2.0, 3.0));
        let back = apply_alignment(&moved, &a.inverse());
        assert!((back.points[0] - pm.points[0]).norm() < 1e-9);
    }

    fn simple_matches(n: usize) -> (PointMap, PointMap, CorrespondenceSet, CameraModel) {
        // n x 1 strip of points; the same pixel index matches in both views
        let g = PixelGrid::new(n, 2).unwrap();
        let pts = random_points(2 * n, 11);
        let pm = PointMap::from_points(g, pts).unwrap();
        let cam = CameraModel::simple(10.0, n, 2);
        let px: Vec<[f64; 2]> = (0..n).map(|c| [0.0, c as f64]).collect();
        let m = CorrespondenceSet::new(px.clone(), px).unwrap();
        (pm.clone(), pm, m, cam)
    }

    #[test]
    fn ransac_identity_keeps_all() {
        let (r, s, m, cam) = simple_matches(12);
        let (f, rep) = filter_matches_ransac(&r, &cam, &s, &m, &RansacConfig::default()).unwrap();
        assert_eq!(rep.inlier_count, 12);
        assert!(f.inlier.iter().all(|&x| x));
    }

    #[test]
    fn ransac_finds_consensus() {
        let n = 20;
        let (r, _, m, cam) = simple_matches(n);
        let truth = AffineAlignment::new(2.0, Vec3::new(1.0, 0.0, 0.0)).unwrap();
        // ref = 2 src + (1,0,0) for 16 matches; 4 gross outliers
        let mut src = r.map_valid(|p| truth.inverse().apply(p));
        for c in [1, 6, 11, 17] {
            src.points[c] += Vec3::new(5.0, -4.0, 3.0);
        }
        let (f, rep) = filter_matches_ransac(&r, &cam, &src, &m, &RansacConfig::default()).unwrap();
        assert_eq!(rep.inlier_count, 16);
        for c in [1, 6, 11, 17] {
            assert!(!f.inlier[c]);
        }
    }

    #[test]
    fn ransac_needs_three() {
        let (r, s, mut m, cam) = simple_matches(12);
        m.ref_pixels.truncate(2);
        m.src_pixels.truncate(2);
        m.inlier.truncate(2);
        assert!(matches!(
            filter_matches_ransac(&r, &cam, &s, &m, &RansacConfig::default()),
            Err(Error::TooFewMatches { .. })
        ));
    }

    #[test]
    fn ransac_is_deterministic() {
        let n = 30;
        let (r, _, m, cam) = simple_matches(n);
        let mut src = r.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in src.points.iter_mut() {
            if rng.random::<f64>() < 0.3 {
                *p += Vec3::new(1.0, 2.0, 3.0);
            }
        }
        let cfg = RansacConfig {
            seed: 77,
            ..Default::default()
        };
        let a = filter_matches_ransac(&r, &cam, &src, &m, &cfg).unwrap();
        let b = filter_matches_ransac(&r, &cam, &src, &m, &cfg).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn permutation_equivariance(seed in 0u64..1000, rot in 1usize..29) {
            let r = random_points(30, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let s: Vec<Vec3> = r
                .iter()
                .map(|p| 1.7 * p + Vec3::new(rng.random_range(-0.2..0.2), 0.1, rng.random_range(-0.2..0.2)))
                .collect();
            let z: Vec<f64> = r.iter().map(|p| p.z).collect();
            let base = solve_scale_shift(&r, &s, &z).unwrap();
            let perm = |v: &[Vec3]| { let mut v = v.to_vec(); v.rotate_left(rot); v };
            let mut zp = z.clone();
            zp.rotate_left(rot);
            let permuted = solve_scale_shift(&perm(&r), &perm(&s), &zp).unwrap();
            prop_assert_eq!(base, permuted);
        }

        #[test]
        fn clean_recovery_independent_of_weights(seed in 0u64..1000, scale in 0.2f64..5.0) {
            let r = random_points(25, seed);
            let shift = Vec3::new(0.3, -0.2, 0.5);
            let s: Vec<Vec3> = r.iter().map(|p| scale * p + shift).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z: Vec<f64> = (0..25).map(|_| rng.random_range(0.1..50.0)).collect();
            let a = solve_scale_shift(&r, &s, &z).unwrap();
            prop_assert!((a.scale - 1.0 / scale).abs() < 1e-8);
        }
    }
}
