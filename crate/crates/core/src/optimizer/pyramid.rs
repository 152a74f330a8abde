use crate::error::{Error, Result};
use crate::graph::{RefinementState, SceneLevel, REF, SRC};
use crate::model::{CameraModel, CorrespondenceSet, Image, PixelGrid, PointMap, Vec3};

/// The problem at one resolution: inputs plus the unrefined state.
#[derive(Clone, Debug)]
pub struct PyramidLevel {
    pub level: usize,
    pub scene: SceneLevel,
    pub state: RefinementState,
}

impl PyramidLevel {
    pub fn grid(&self) -> PixelGrid {
        self.scene.images[REF].grid
    }
}

fn coarse_grid(grid: PixelGrid, level: usize) -> Result<PixelGrid> {
    let f = 1usize << level;
    let (w, h) = (grid.width / f, grid.height / f);
    if w < 2 || h < 2 {
        return Err(Error::GridTooSmall {
            level,
            width: w,
            height: h,
        });
    }
    PixelGrid::new(w, h)
}

/// Confidence-weighted block mean of the valid points. A block is valid if
/// any of its points is; all-zero confidences fall back to the plain mean.
pub fn downsample_pointmap(pm: &PointMap, level: usize) -> Result<PointMap> {
    if level == 0 {
        return Ok(pm.clone());
    }
    let grid = coarse_grid(pm.grid, level)?;
    let f = 1usize << level;
    let mut points = vec![Vec3::zeros(); grid.len()];
    let mut valid = vec![false; grid.len()];
    let mut confidence = vec![0.0; grid.len()];
    for (idx, (p_out, (v_out, c_out))) in points
        .iter_mut()
        .zip(valid.iter_mut().zip(confidence.iter_mut()))
        .enumerate()
    {
        let (r, c) = grid.row_col(idx);
        let (mut wsum, mut psum_w) = (0.0, Vec3::zeros());
        let (mut n, mut psum, mut csum) = (0usize, Vec3::zeros(), 0.0);
        for rr in r * f..(r + 1) * f {
            for cc in c * f..(c + 1) * f {
                let i = pm.grid.index(rr, cc);
                if pm.valid[i] {
                    let w = pm.confidence[i];
                    wsum += w;
                    psum_w += w * pm.points[i];
                    psum += pm.points[i];
                    csum += w;
                    n += 1;
                }
            }
        }
        if n == 0 {
            continue;
        }
        *p_out = if wsum > 0.0 { psum_w / wsum } else { psum / n as f64 };
        *c_out = csum / n as f64;
        *v_out = true;
    }
    PointMap::new(grid, points, valid, confidence)
}

pub fn downsample_image(image: &Image, level: usize) -> Result<Image> {
    if level == 0 {
        return Ok(image.clone());
    }
    let grid = coarse_grid(image.grid, level)?;
    let f = 1usize << level;
    let rgb = (0..grid.len())
        .map(|idx| {
            let (r, c) = grid.row_col(idx);
            let mut sum = Vec3::zeros();
            for rr in r * f..(r + 1) * f {
                for cc in c * f..(c + 1) * f {
                    sum += image.rgb[image.grid.index(rr, cc)];
                }
            }
            sum / (f * f) as f64
        })
        .collect();
    Image::new(grid, rgb)
}

/// Inlier matches moved to the coarse block containing their nearest fine
/// pixel. Repeated pairs are kept once, in first-seen order.
pub fn downsample_matches(m: &CorrespondenceSet, fine: PixelGrid, level: usize) -> Result<CorrespondenceSet> {
    if level == 0 {
        return Ok(m.clone());
    }
    let grid = coarse_grid(fine, level)?;
    let f = 1usize << level;
    let block = |px: [f64; 2]| -> Option<[usize; 2]> {
        let idx = fine.nearest(px[0], px[1])?;
        let (r, c) = fine.row_col(idx);
        let (r, c) = (r / f, c / f);
        (r < grid.height && c < grid.width).then_some([r, c])
    };
    let mut seen = std::collections::HashSet::new();
    let (mut refs, mut srcs) = (Vec::new(), Vec::new());
    for k in 0..m.len() {
        if !m.inlier[k] {
            continue;
        }
        let (Some(a), Some(b)) = (block(m.ref_pixels[k]), block(m.src_pixels[k])) else {
            continue;
        };
        if seen.insert((a, b)) {
            refs.push([a[0] as f64, a[1] as f64]);
            srcs.push([b[0] as f64, b[1] as f64]);
        }
    }
    CorrespondenceSet::new(refs, srcs)
}

/// Problem and unrefined state at pyramid level `level`. Normals are
/// re-estimated from the downsampled points; scales carry over.
pub fn downsample_state(scene: &SceneLevel, state: &RefinementState, level: usize) -> Result<PyramidLevel> {
    if level == 0 {
        return Ok(PyramidLevel {
            level,
            scene: scene.clone(),
            state: state.clone(),
        });
    }
    let f = (1usize << level) as f64;
    let points = [
        downsample_pointmap(&state.points[REF], level)?,
        downsample_pointmap(&state.points[SRC], level)?,
    ];
    let cameras = [scene.cameras[REF].downscaled(f), scene.cameras[SRC].downscaled(f)];
    let mut coarse = RefinementState::from_points(points, &cameras);
    coarse.scale = state.scale;
    let images = [
        downsample_image(&scene.images[REF], level)?,
        downsample_image(&scene.images[SRC], level)?,
    ];
    let matches = downsample_matches(&scene.matches, scene.images[REF].grid, level)?;
    Ok(PyramidLevel {
        level,
        scene: SceneLevel {
            images,
            cameras,
            matches,
        },
        state: coarse,
    })
}

/// Bilinear sample of a sparse coarse field at continuous coarse position
/// `(y, x)`. With all four samples present the interpolation extends
/// linearly past the outermost samples; otherwise the clamped weights of the
/// present samples are renormalized.
fn sample_bilinear(grid: PixelGrid, field: &[Option<Vec3>], y: f64, x: f64) -> Option<Vec3> {
    let r0 = (y.floor() as isize).clamp(0, grid.height as isize - 2) as usize;
    let c0 = (x.floor() as isize).clamp(0, grid.width as isize - 2) as usize;
    let (ty, tx) = (y - r0 as f64, x - c0 as f64);
    let corners = [
        (r0, c0, (1.0 - ty), (1.0 - tx)),
        (r0, c0 + 1, (1.0 - ty), tx),
        (r0 + 1, c0, ty, (1.0 - tx)),
        (r0 + 1, c0 + 1, ty, tx),
    ];
    let values: Vec<Option<Vec3>> = corners.iter().map(|&(r, c, _, _)| field[grid.index(r, c)]).collect();
    if values.iter().all(Option::is_some) {
        let mut out = Vec3::zeros();
        for (&(_, _, wy, wx), v) in corners.iter().zip(&values) {
            out += wy * wx * v.unwrap();
        }
        return Some(out);
    }
    let (tyc, txc) = (ty.clamp(0.0, 1.0), tx.clamp(0.0, 1.0));
    let mut out = Vec3::zeros();
    let mut wsum = 0.0;
    for (k, v) in values.iter().enumerate() {
        let Some(v) = v else { continue };
        let wy = if k < 2 { 1.0 - tyc } else { tyc };
        let wx = if k % 2 == 0 { 1.0 - txc } else { txc };
        out += wy * wx * v;
        wsum += wy * wx;
    }
    (wsum > 0.0).then(|| out / wsum)
}

/// Moves `fine_init` by the coarse displacement `coarse_refined -
/// coarse_init`, bilinearly upsampled by 2. Only valid fine pixels move.
pub fn upsample_delta(
    coarse_refined: &RefinementState,
    coarse_init: &RefinementState,
    fine_init: &RefinementState,
    fine_cameras: &[CameraModel; 2],
) -> RefinementState {
    let mut points = fine_init.points.clone();
    for v in [REF, SRC] {
        let cg = coarse_init.points[v].grid;
        let field: Vec<Option<Vec3>> = (0..cg.len())
            .map(|i| {
                (coarse_init.points[v].valid[i] && coarse_refined.points[v].valid[i])
                    .then(|| coarse_refined.points[v].points[i] - coarse_init.points[v].points[i])
            })
            .collect();
        let fine = &mut points[v];
        let fg = fine.grid;
        for i in 0..fg.len() {
            if !fine.valid[i] {
                continue;
            }
            let (r, c) = fg.row_col(i);
            let y = (r as f64 + 0.5) / 2.0 - 0.5;
            let x = (c as f64 + 0.5) / 2.0 - 0.5;
            if let Some(d) = sample_bilinear(cg, &field, y, x) {
                fine.points[i] += d;
            }
        }
    }
    let mut out = RefinementState::from_points(points, fine_cameras);
    out.scale = coarse_refined.scale;
    out
}
