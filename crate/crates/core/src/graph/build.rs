use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::model::{RefinementConfig, Vec3};

use super::weights::{weight_2d, weight_2d_with_distance, weight_3d};
use super::{Priors, RefinementState, SceneLevel, REF, SRC};

/// Edge between two pixels of the same view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairEdge {
    pub a: usize,
    pub b: usize,
    pub w: f64,
}

/// Anchor pixel in one view to a neighbor of its match in the other.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterEdge {
    pub anchor: usize,
    pub other: usize,
    pub w: f64,
}

/// Matched anchors `(anchor, anchor_match)` and the pixels at one shared
/// offset from each, `(anchor_offset, other_offset)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedEdge {
    pub anchor: usize,
    pub anchor_match: usize,
    pub anchor_offset: usize,
    pub other_offset: usize,
    pub w: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnnEdge {
    pub query: usize,
    pub support: usize,
    pub w: f64,
}

/// Viewing ray of one pixel. `direction` is not normalized; `inv_norm` is
/// `1 / |direction|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayAnchor {
    pub pixel: usize,
    pub origin: Vec3,
    pub direction: Vec3,
    pub inv_norm: f64,
}

/// Edge lists indexed by view. Cross-view lists are indexed by the anchoring
/// (or querying) view; the other endpoint lives in the opposite view.
#[derive(Clone, Debug)]
pub struct RefinementGraph {
    pub intra: [Vec<PairEdge>; 2],
    pub inter: [Vec<InterEdge>; 2],
    pub paired: [Vec<PairedEdge>; 2],
    pub knn: [Vec<KnnEdge>; 2],
    pub rays: [Vec<RayAnchor>; 2],
    pub priors: [Priors; 2],
    pub active: [Vec<bool>; 2],
}

pub fn build_graph(
    scene: &SceneLevel,
    state: &RefinementState,
    priors: [Priors; 2],
    cfg: &RefinementConfig,
) -> Result<RefinementGraph> {
    let active = [state.active(REF), state.active(SRC)];
    if active.iter().any(|a| !a.iter().any(|&v| v)) {
        return Err(Error::NoValidPixels);
    }
    let intra = [0, 1].map(|v| intra_edges(scene, &active[v], v, cfg));
    let (inter_ref, paired_ref) = inter_edges(scene, &active, REF, cfg);
    let (inter_src, paired_src) = inter_edges(scene, &active, SRC, cfg);
    let rays = [0, 1].map(|v| ray_anchors(scene, &active[v], v));
    let mut graph = RefinementGraph {
        intra,
        inter: [inter_ref, inter_src],
        paired: [paired_ref, paired_src],
        knn: [Vec::new(), Vec::new()],
        rays,
        priors,
        active,
    };
    graph.refresh_knn(scene, state, cfg);
    Ok(graph)
}

impl RefinementGraph {
    /// Recomputes kNN neighbors and their weights from the current state.
    pub fn refresh_knn(&mut self, scene: &SceneLevel, state: &RefinementState, cfg: &RefinementConfig) {
        for q in [REF, SRC] {
            let s = 1 - q;
            let pairs = knn_edges(
                &state.points[q].points,
                &self.active[q],
                &state.points[s].points,
                &self.active[s],
                cfg.knn_k,
            );
            self.knn[q] = pairs
                .into_iter()
                .map(|(query, support)| KnnEdge {
                    query,
                    support,
                    w: weight_3d(
                        &scene.images[q].rgb[query],
                        &scene.images[s].rgb[support],
                        &state.normals[q].normals[query],
                        &state.normals[s].normals[support],
                        cfg.sigma_int,
                    ),
                })
                .collect();
        }
    }

    pub fn edge_count(&self) -> usize {
        (0..2)
            .map(|v| self.intra[v].len() + self.inter[v].len() + self.paired[v].len() + self.knn[v].len())
            .sum()
    }
}

/// `(query pixel, support pixel)` for the `k` nearest active support points
/// of every active query point, closest first.
pub fn knn_edges(
    query: &[Vec3],
    query_active: &[bool],
    support: &[Vec3],
    support_active: &[bool],
    k: usize,
) -> Vec<(usize, usize)> {
    let (pts, labels): (Vec<Vec3>, Vec<usize>) = support
        .iter()
        .zip(support_active)
        .enumerate()
        .filter(|(_, (_, &a))| a)
        .map(|(i, (p, _))| (*p, i))
        .unzip();
    let tree = KdTree::with_labels(pts, labels);
    let queries: Vec<usize> = (0..query.len()).filter(|&i| query_active[i]).collect();
    let lists = crate::par::map(&queries, |&i| tree.nearest(&query[i], k));
    queries
        .iter()
        .zip(lists)
        .flat_map(|(&i, list)| list.into_iter().map(move |n| (i, n.index)))
        .collect()
}

fn intra_edges(scene: &SceneLevel, active: &[bool], view: usize, cfg: &RefinementConfig) -> Vec<PairEdge> {
    let image = &scene.images[view];
    let grid = image.grid;
    let nodes: Vec<usize> = (0..grid.len()).filter(|&i| active[i]).collect();
    let per_node = crate::par::map(&nodes, |&a| {
        grid.window(a, cfg.neighbor_radius)
            .filter(|&b| b != a && active[b])
            .map(|b| PairEdge {
                a,
                b,
                w: weight_2d(image, a, b, cfg.patch_radius, cfg.sigma_int, cfg.sigma_spa),
            })
            .collect::<Vec<_>>()
    });
    per_node.into_iter().flatten().collect()
}

fn inter_edges(
    scene: &SceneLevel,
    active: &[Vec<bool>; 2],
    anchor_view: usize,
    cfg: &RefinementConfig,
) -> (Vec<InterEdge>, Vec<PairedEdge>) {
    let other_view = 1 - anchor_view;
    let (img_a, img_b) = (&scene.images[anchor_view], &scene.images[other_view]);
    let grid = img_a.grid;
    let m = &scene.matches;
    let (anchor_px, other_px) = if anchor_view == REF {
        (&m.ref_pixels, &m.src_pixels)
    } else {
        (&m.src_pixels, &m.ref_pixels)
    };
    let sub_dist_sq = |sub: [f64; 2], idx: usize| {
        let (r, c) = grid.row_col(idx);
        (sub[0] - r as f64).powi(2) + (sub[1] - c as f64).powi(2)
    };
    let weight = |img, sub: [f64; 2], center: usize, neighbor: usize| {
        weight_2d_with_distance(
            img,
            center,
            neighbor,
            sub_dist_sq(sub, neighbor),
            cfg.patch_radius,
            cfg.sigma_int,
            cfg.sigma_spa,
        )
    };

    let mut first = Vec::new();
    let mut paired = Vec::new();
    let radius = cfg.neighbor_radius as isize;
    for k in 0..m.len() {
        if !m.inlier[k] {
            continue;
        }
        let (sa, sb) = (anchor_px[k], other_px[k]);
        let (Some(p), Some(q)) = (grid.nearest(sa[0], sa[1]), grid.nearest(sb[0], sb[1])) else {
            continue;
        };
        if !active[anchor_view][p] || !active[other_view][q] {
            continue;
        }
        for q2 in grid.window(q, cfg.neighbor_radius) {
            if active[other_view][q2] {
                first.push(InterEdge {
                    anchor: p,
                    other: q2,
                    w: weight(img_b, sb, q, q2),
                });
            }
        }
        let (pr, pc) = grid.row_col(p);
        let (qr, qc) = grid.row_col(q);
        for dr in -radius..=radius {
            for dc in -radius..=radius {
                let (p2r, p2c) = (pr as isize + dr, pc as isize + dc);
                let (q2r, q2c) = (qr as isize + dr, qc as isize + dc);
                if !grid.contains(p2r, p2c) || !grid.contains(q2r, q2c) {
                    continue;
                }
                let p2 = grid.index(p2r as usize, p2c as usize);
                let q2 = grid.index(q2r as usize, q2c as usize);
                if !active[anchor_view][p2] || !active[other_view][q2] {
                    continue;
                }
                paired.push(PairedEdge {
                    anchor: p,
                    anchor_match: q,
                    anchor_offset: p2,
                    other_offset: q2,
                    w: weight(img_a, sa, p, p2) * weight(img_b, sb, q, q2),
                });
            }
        }
    }
    (first, paired)
}

fn ray_anchors(scene: &SceneLevel, active: &[bool], view: usize) -> Vec<RayAnchor> {
    let cam = &scene.cameras[view];
    let grid = scene.images[view].grid;
    (0..grid.len())
        .filter(|&i| active[i])
        .map(|i| {
            let (r, c) = grid.row_col(i);
            let d = cam.rotation() * cam.pixel_direction(r as f64, c as f64);
            RayAnchor {
                pixel: i,
                origin: cam.center(),
                direction: d,
                inv_norm: 1.0 / d.norm(),
            }
        })
        .collect()
}
