//! Independent reference implementations.

use more_core::alignment::l1_objective;
use more_core::model::Vec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(2.0..4.0)))
        .collect()
}

pub fn brute_knn(query: &[Vec3], qa: &[bool], support: &[Vec3], sa: &[bool], k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, q) in query.iter().enumerate().filter(|(i, _)| qa[*i]) {
        let mut d: Vec<(f64, usize)> = support
            .iter()
            .enumerate()
            .filter(|(j, _)| sa[*j])
            .map(|(j, s)| ((q - s).norm_squared(), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.extend(d.iter().take(k).map(|&(_, j)| (i, j)));
    }
    out
}

/// Best shift per axis for a fixed scale: the L1 optimum sits at one of the
/// residual values, so try them all.
pub fn best_shift_by_enumeration(r: &[Vec3], s: &[Vec3], w: &[f64], alpha: f64) -> Vec3 {
    let mut beta = Vec3::zeros();
    for axis in 0..3 {
        let cand: Vec<f64> = r.iter().zip(s).map(|(r, s)| r[axis] - alpha * s[axis]).collect();
        let cost = |b: f64| cand.iter().zip(w).map(|(c, w)| w * (c - b).abs()).sum::<f64>();
        beta[axis] = cand.iter().copied().min_by(|a, b| cost(*a).total_cmp(&cost(*b))).unwrap();
    }
    beta
}

/// Scale grid refined by repeated zooming around the best node.
pub fn grid_oracle(r: &[Vec3], s: &[Vec3], z: &[f64]) -> f64 {
    let w: Vec<f64> = z.iter().map(|z| 1.0 / z).collect();
    let eval = |a: f64| l1_objective(r, s, z, a, &best_shift_by_enumeration(r, s, &w, a));
    let (mut lo, mut hi) = (1e-3, 10.0);
    let mut best = f64::INFINITY;
    for _ in 0..40 {
        let n = 200;
        let step = (hi - lo) / n as f64;
        let (ka, fa) = (0..=n)
            .map(|k| (k, eval(lo + k as f64 * step)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        best = best.min(fa);
        let center = lo + ka as f64 * step;
        lo = (center - 2.0 * step).max(1e-6);
        hi = center + 2.0 * step;
    }
    best
}

/// Linear-interpolation percentile written out from its definition.
pub fn percentile_oracle(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() - 1) as f64;
    let below = pos.floor();
    let frac = pos - below;
    let i = below as usize;
    let j = (i + 1).min(v.len() - 1);
    v[i] + frac * (v[j] - v[i])
}
