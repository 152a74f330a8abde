//! Normal maps from point maps.
//!
//! Each valid pixel takes the cross products of the differences to its
//! 4-neighbors, in the cyclic order right, down, left, up. Consecutive pairs
//! with both neighbors valid are summed and the sum normalized. The result is
//! flipped to face the viewpoint.

use crate::model::{CameraModel, NormalMap, PointMap, Vec3};

const DEGENERATE_NORM: f64 = 1e-12;

/// Normals of a world-frame point map, oriented toward the camera center.
pub fn normals_from_pointmap(pm: &PointMap, cam: &CameraModel) -> NormalMap {
    normals_toward(pm, &cam.center())
}

/// Normals oriented so that `n . (viewpoint - p) >= 0`.
pub fn normals_toward(pm: &PointMap, viewpoint: &Vec3) -> NormalMap {
    let grid = pm.grid;
    let (w, h) = (grid.width as isize, grid.height as isize);
    let mut normals = vec![Vec3::zeros(); grid.len()];
    let mut valid = vec![false; grid.len()];

    let neighbor = |row: isize, col: isize| -> Option<Vec3> {
        if row < 0 || col < 0 || row >= h || col >= w {
            return None;
        }
        let idx = (row * w + col) as usize;
        pm.valid[idx].then(|| pm.points[idx])
    };

    for idx in pm.valid_indices() {
        let (row, col) = grid.row_col(idx);
        let (row, col) = (row as isize, col as isize);
        let p = pm.points[idx];
        // right, down, left, up
        let ring = [
            neighbor(row, col + 1),
            neighbor(row + 1, col),
            neighbor(row, col - 1),
            neighbor(row - 1, col),
        ];
        if ring.iter().flatten().count() < 2 {
            continue;
        }
        let mut sum = Vec3::zeros();
        for k in 0..4 {
            if let (Some(a), Some(b)) = (ring[k], ring[(k + 1) % 4]) {
                sum += (a - p).cross(&(b - p));
            }
        }
        let norm = sum.norm();
        if !(norm >= DEGENERATE_NORM) {
            continue;
        }
        let mut n = sum / norm;
        if n.dot(&(viewpoint - p)) < 0.0 {
            n = -n;
        }
        normals[idx] = n;
        valid[idx] = true;
    }

    NormalMap {
        grid,
        normals,
        valid,
    }
}
