//! Static 3-d tree for exact k-nearest-neighbor queries.
//!
//! Neighbors are ordered by `(squared distance, index)`, so ties resolve to
//! the lower index and results equal a brute-force scan with the same order.

use std::cmp::Ordering;

use crate::model::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

pub struct KdTree {
    points: Vec<Vec3>,
    /// Positions in `points` permuted into tree order.
    order: Vec<usize>,
    /// Caller-facing index for each entry of `points`.
    labels: Vec<usize>,
    root: Option<Node>,
}

impl KdTree {
    /// Builds a tree whose neighbors report positions in `points`.
    pub fn new(points: Vec<Vec3>) -> Self {
        let labels = (0..points.len()).collect();
        Self::with_labels(points, labels)
    }

    /// Builds a tree whose neighbors report `labels[k]` for `points[k]`.
    pub fn with_labels(points: Vec<Vec3>, labels: Vec<usize>) -> Self {
        assert_eq!(points.len(), labels.len());
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = (!points.is_empty()).then(|| build(&points, &mut order, 0, points.len()));
        Self {
            points,
            order,
            labels,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points to `query`, closest first.
    pub fn nearest(&self, query: &Vec3, k: usize) -> Vec<Neighbor> {
        let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
        if k == 0 {
            return best;
        }
        if let Some(root) = &self.root {
            self.search(root, query, k, &mut best);
        }
        best
    }

    pub fn nearest_one(&self, query: &Vec3) -> Option<Neighbor> {
        self.nearest(query, 1).into_iter().next()
    }

    fn search(&self, node: &Node, query: &Vec3, k: usize, best: &mut Vec<Neighbor>) {
        match node {
            Node::Leaf { start, end } => {
                for &pos in &self.order[*start..*end] {
                    let cand = Neighbor {
                        index: self.labels[pos],
                        dist_sq: (self.points[pos] - query).norm_squared(),
                    };
                    insert(best, cand, k);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, best);
                // Equal distances must still be visited for index tie-breaks.
                if best.len() < k || diff * diff <= best[best.len() - 1].dist_sq {
                    self.search(far, query, k, best);
                }
            }
        }
    }
}

fn insert(best: &mut Vec<Neighbor>, cand: Neighbor, k: usize) {
    if best.len() == k && cand.cmp_key(&best[k - 1]) != Ordering::Less {
        return;
    }
    let pos = best
        .binary_search_by(|probe| probe.cmp_key(&cand))
        .unwrap_or_else(|p| p);
    best.insert(pos, cand);
    best.truncate(k);
}

fn build(points: &[Vec3], order: &mut [usize], start: usize, end: usize) -> Node {
    if end - start <= LEAF_SIZE {
        return Node::Leaf { start, end };
    }
    let slice = &mut order[start..end];
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &i in slice.iter() {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let axis = (hi - lo).imax();
    if hi[axis] - lo[axis] <= 0.0 {
        // all points coincide
        return Node::Leaf { start, end };
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    let value = points[slice[mid]][axis];
    // left holds coordinates <= value, right >= value; the search visits
    // the far side whenever the split plane is within the current radius.
    Node::Split {
        axis,
        value,
        left: Box::new(build(points, order, start, start + mid)),
        right: Box::new(build(points, order, start + mid, end)),
    }
}

/// Exhaustive k-nearest scan with the same ordering as [`KdTree`].
pub fn brute_force_nearest(points: &[Vec3], query: &Vec3, k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = points
        .iter()
        .enumerate()
        .map(|(index, p)| Neighbor {
            index,
            dist_sq: (p - query).norm_squared(),
        })
        .collect();
    all.sort_by(|a, b| a.cmp_key(b));
    all.truncate(k);
    all
}
