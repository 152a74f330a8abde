//! Edge weights from image appearance, pixel distance, and normal agreement.

use crate::model::{Image, Vec3};

/// Weights below this are flushed to zero.
pub const WEIGHT_FLOOR: f64 = 1e-100;

/// Squared Frobenius distance between the patches of `radius` around pixels
/// `a` and `b`. Near borders only offsets in bounds for both patches count,
/// and the sum is rescaled to the full patch size.
pub fn patch_distance_sq(image: &Image, a: usize, b: usize, radius: usize) -> f64 {
    let grid = image.grid;
    let (ra, ca) = grid.row_col(a);
    let (rb, cb) = grid.row_col(b);
    let r = radius as isize;
    let mut sum = 0.0;
    let mut overlap = 0usize;
    for dr in -r..=r {
        for dc in -r..=r {
            let (pa_r, pa_c) = (ra as isize + dr, ca as isize + dc);
            let (pb_r, pb_c) = (rb as isize + dr, cb as isize + dc);
            if !grid.contains(pa_r, pa_c) || !grid.contains(pb_r, pb_c) {
                continue;
            }
            let ia = grid.index(pa_r as usize, pa_c as usize);
            let ib = grid.index(pb_r as usize, pb_c as usize);
            sum += (image.rgb[ia] - image.rgb[ib]).norm_squared();
            overlap += 1;
        }
    }
    let full = (2 * radius + 1).pow(2);
    if overlap == 0 {
        return 0.0;
    }
    if overlap == full {
        sum
    } else {
        sum * full as f64 / overlap as f64
    }
}

/// Appearance-and-distance weight between two pixels of one image, with
/// the spatial distance given explicitly (in pixels, squared).
pub fn weight_2d_with_distance(
    image: &Image,
    a: usize,
    b: usize,
    spatial_dist_sq: f64,
    patch_radius: usize,
    sigma_int: f64,
    sigma_spa: f64,
) -> f64 {
    let intensity = patch_distance_sq(image, a, b, patch_radius) / (2.0 * sigma_int * sigma_int);
    let spatial = spatial_dist_sq / (2.0 * sigma_spa * sigma_spa);
    flush((-intensity).exp() * (-spatial).exp())
}

/// `exp(-|Q_a - Q_b|_F^2 / 2 sigma_int^2) * exp(-|a - b|^2 / 2 sigma_spa^2)`
pub fn weight_2d(image: &Image, a: usize, b: usize, patch_radius: usize, sigma_int: f64, sigma_spa: f64) -> f64 {
    let (ra, ca) = image.grid.row_col(a);
    let (rb, cb) = image.grid.row_col(b);
    let dr = ra as f64 - rb as f64;
    let dc = ca as f64 - cb as f64;
    weight_2d_with_distance(image, a, b, dr * dr + dc * dc, patch_radius, sigma_int, sigma_spa)
}

/// Cross-view weight from color and normal similarity.
pub fn weight_3d(color_a: &Vec3, color_b: &Vec3, normal_a: &Vec3, normal_b: &Vec3, sigma_int: f64) -> f64 {
    let denom = 2.0 * sigma_int * sigma_int;
    let color = (color_a - color_b).norm_squared() / denom;
    let normal = (normal_a - normal_b).norm_squared() / denom;
    flush((-color).exp() * (-normal).exp())
}

#[inline]
fn flush(w: f64) -> f64 {
    if w < WEIGHT_FLOOR {
        0.0
    } else {
        w
    }
}
