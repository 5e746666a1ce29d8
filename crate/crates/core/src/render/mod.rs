//! Tile-based software rasterizer with stereo work reuse.

mod image;
mod raster;
mod stereo;

pub use image::{read_ppm, write_ppm};
pub use raster::{rasterize_mono, Framebuffer, RasterStats};
pub use stereo::{
    disparity, merge_tile_lists, rasterize_right_reference, rasterize_stereo,
    rasterize_stereo_diagnostic, right_tile_oracle_lists, ListEntry, StereoListDiag, StereoStats,
};

use crate::camera::{Camera, StereoRig};
use crate::config::RenderConfig;
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::math::{Mat3, Sym2};
use crate::sh::evaluate_sh;

/// A splat after shared (both-eye) preprocessing: projected with the left
/// camera, 2D covariance from the EWA first-order approximation, color
/// evaluated toward the mid-eye position.
#[derive(Debug, Clone)]
pub struct ProjectedGaussian {
    pub id: u32,
    /// Left-eye screen center, pixels.
    pub center: [f64; 2],
    pub depth: f64,
    /// Screen-space covariance (after the low-pass floor).
    pub cov: Sym2,
    /// Inverse covariance.
    pub conic: Sym2,
    pub rgb: [f32; 3],
    pub opacity: f64,
    /// Pixel radius covering every alpha >= alpha* contribution.
    pub radius: f64,
}

impl ProjectedGaussian {
    /// Inclusive tile rectangle covered on a grid for a given center x; the
    /// same span logic serves the left eye and the disparity-shifted right
    /// eye. Returns None when the footprint misses the grid entirely.
    pub fn tile_span(
        &self,
        center_x: f64,
        tiles_x: u32,
        tiles_y: u32,
        tile: u32,
    ) -> Option<(u32, u32, u32, u32)> {
        let t = tile as f64;
        let x0 = ((center_x - self.radius) / t).floor();
        let x1 = ((center_x + self.radius) / t).floor();
        let y0 = ((self.center[1] - self.radius) / t).floor();
        let y1 = ((self.center[1] + self.radius) / t).floor();
        if x1 < 0.0 || y1 < 0.0 || x0 >= tiles_x as f64 || y0 >= tiles_y as f64 {
            return None;
        }
        Some((
            x0.max(0.0) as u32,
            y0.max(0.0) as u32,
            x1.min(tiles_x as f64 - 1.0) as u32,
            y1.min(tiles_y as f64 - 1.0) as u32,
        ))
    }
}

/// The left camera plus the one-sided screen margin (in pixels, toward the
/// right eye) that makes its frustum cover everything either eye can see at
/// depth >= near. Used only for culling.
#[derive(Debug, Clone, PartialEq)]
pub struct WidenedFov {
    pub camera: Camera,
    pub margin_px: f64,
}

pub fn widened_fov(rig: &StereoRig) -> WidenedFov {
    let margin = (rig.left.focal * rig.baseline / rig.left.near).ceil();
    WidenedFov {
        camera: rig.left.clone(),
        margin_px: margin,
    }
}

/// Shared preprocessing for both eyes: cull against the widened field of
/// view, project with the left camera, build the screen-space covariance
/// `J W Sigma W^T J^T + 0.3 I`, and evaluate SH toward the mid-eye.
pub fn preprocess<'a>(
    gaussians: impl IntoIterator<Item = &'a Gaussian>,
    rig: &StereoRig,
    config: &RenderConfig,
) -> Result<Vec<ProjectedGaussian>> {
    config.validate()?;
    let cam = &rig.left;
    if !cam.width.is_multiple_of(config.tile_size) || !cam.height.is_multiple_of(config.tile_size) {
        return Err(Error::contract(format!(
            "resolution {}x{} not divisible by tile size {}",
            cam.width, cam.height, config.tile_size
        )));
    }
    let wide = widened_fov(rig);
    let mid_eye = rig.mid_eye();
    let w_mat = cam.rotation.to_mat3();
    // covers every pixel whose alpha can reach alpha_star at opacity <= 1
    let radius_factor = (2.0 * (1.0 / config.alpha_star).ln()).sqrt();

    let mut out = Vec::new();
    for g in gaussians {
        let cam_pos = cam.to_camera(g.position);
        let depth = cam_pos.z;
        if depth < cam.near || depth > cam.far {
            continue;
        }
        let screen = [
            cam.focal * cam_pos.x / depth + cam.principal[0],
            cam.focal * cam_pos.y / depth + cam.principal[1],
        ];

        // EWA first-order screen covariance
        let sigma = g.covariance();
        let v = w_mat.mul_mat(&sigma).mul_mat(&w_mat.transpose());
        let fz = cam.focal / depth;
        let jx = [fz, 0.0, -cam.focal * cam_pos.x / (depth * depth)];
        let jy = [0.0, fz, -cam.focal * cam_pos.y / (depth * depth)];
        let jv = |j: &[f64; 3], m: &Mat3, k: usize| -> f64 {
            j[0] * m.m[0][k] + j[1] * m.m[1][k] + j[2] * m.m[2][k]
        };
        let row = |j: &[f64; 3]| -> [f64; 3] { [jv(j, &v, 0), jv(j, &v, 1), jv(j, &v, 2)] };
        let rx = row(&jx);
        let ry = row(&jy);
        let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let cov = Sym2::new(dot(&rx, &jx) + 0.3, dot(&rx, &jy), dot(&ry, &jy) + 0.3);
        let Some(conic) = cov.inverse() else {
            continue;
        };
        let radius = radius_factor * cov.max_eigenvalue().sqrt();

        // one-sided widened cull, footprint-aware
        if screen[0] < -radius
            || screen[0] > cam.width as f64 + wide.margin_px + radius
            || screen[1] < -radius
            || screen[1] > cam.height as f64 + radius
        {
            continue;
        }

        let dir = (g.position - mid_eye).normalized();
        let rgb64 = evaluate_sh(&g.sh, dir, config.sh_degree.min(g.sh_degree().unwrap_or(0)))?;
        out.push(ProjectedGaussian {
            id: g.id,
            center: screen,
            depth,
            cov,
            conic,
            rgb: [rgb64[0] as f32, rgb64[1] as f32, rgb64[2] as f32],
            opacity: g.opacity,
            radius,
        });
    }
    Ok(out)
}

/// Stable sort by depth, nearest first; equal depths fall back to ascending
/// id so the order is deterministic.
pub fn depth_sort(mut projected: Vec<ProjectedGaussian>) -> Vec<ProjectedGaussian> {
    projected.sort_by(|a, b| {
        a.depth
            .partial_cmp(&b.depth)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.id.cmp(&b.id))
    });
    projected
}

pub(crate) fn check_depth_sorted(projected: &[ProjectedGaussian]) -> Result<()> {
    for w in projected.windows(2) {
        if w[0].depth > w[1].depth {
            return Err(Error::contract(
                "rasterizer input not depth-sorted (depth inversion)",
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Projected;
    use crate::math::{Quat, Vec3};

    fn rig_64(baseline: f64) -> StereoRig {
        let left = Camera::new(
            Quat::IDENTITY,
            Vec3::ZERO,
            128.0,
            [32.0, 32.0],
            64,
            64,
            0.5,
            100.0,
        )
        .unwrap();
        StereoRig::new(left, baseline).unwrap()
    }

    fn splat(id: u32, pos: Vec3, scale: f64, opacity: f64) -> Gaussian {
        Gaussian {
            id,
            position: pos,
            scale: Vec3::splat(scale),
            rotation: Quat::IDENTITY,
            opacity,
            sh: vec![[0.2, 0.0, -0.1]],
        }
    }

    #[test]
    fn widened_margin_matches_disparity_cap() {
        // f=1000, B=0.06, near=3.75 -> 16 px
        let left = Camera::new(
            Quat::IDENTITY,
            Vec3::ZERO,
            1000.0,
            [32.0, 32.0],
            64,
            64,
            3.75,
            100.0,
        )
        .unwrap();
        let rig = StereoRig::new(left, 0.06).unwrap();
        assert_eq!(widened_fov(&rig).margin_px, 16.0);
        // degenerate rig: zero margin, camera unchanged
        let rig0 = rig_64(0.0);
        let w = widened_fov(&rig0);
        assert_eq!(w.margin_px, 0.0);
        assert_eq!(w.camera, rig0.left);
    }

    #[test]
    fn isotropic_covariance_on_axis() {
        let rig = rig_64(0.0);
        let s = 0.2;
        let z = 4.0;
        let g = splat(0, Vec3::new(0.0, 0.0, z), s, 0.7);
        let p = preprocess([&g], &rig, &RenderConfig::default()).unwrap();
        assert_eq!(p.len(), 1);
        let expected = (128.0 * s / z) * (128.0 * s / z) + 0.3;
        assert!((p[0].cov.a - expected).abs() < 1e-9);
        assert!((p[0].cov.c - expected).abs() < 1e-9);
        assert!(p[0].cov.b.abs() < 1e-12);
    }

    #[test]
    fn near_and_far_culled() {
        let rig = rig_64(0.0);
        let config = RenderConfig::default();
        let near_g = splat(0, Vec3::new(0.0, 0.0, 0.25), 0.1, 0.7);
        let far_g = splat(1, Vec3::new(0.0, 0.0, 500.0), 0.1, 0.7);
        let ok_g = splat(2, Vec3::new(0.0, 0.0, 5.0), 0.1, 0.7);
        let p = preprocess([&near_g, &far_g, &ok_g], &rig, &config).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].id, 2);
    }

    #[test]
    fn span_covers_passing_pixels() {
        // dense sweep: every pixel with alpha >= alpha* lies inside the span
        let rig = rig_64(0.0);
        let config = RenderConfig::default();
        let g = splat(0, Vec3::new(0.04, -0.03, 3.0), 0.35, 0.99);
        let p = &preprocess([&g], &rig, &config).unwrap()[0];
        let tiles = 64 / config.tile_size;
        let span = p
            .tile_span(p.center[0], tiles, tiles, config.tile_size)
            .unwrap();
        for py in 0..64u32 {
            for px in 0..64u32 {
                let dx = px as f64 + 0.5 - p.center[0];
                let dy = py as f64 + 0.5 - p.center[1];
                let alpha = (p.opacity * (-0.5 * p.conic.quad(dx, dy)).exp()).min(config.alpha_cap);
                if alpha >= config.alpha_star {
                    let (tx, ty) = (px / config.tile_size, py / config.tile_size);
                    assert!(
                        tx >= span.0 && tx <= span.2 && ty >= span.1 && ty <= span.3,
                        "pixel ({px},{py}) alpha {alpha} outside span {span:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn depth_sort_is_stable_and_idempotent() {
        let rig = rig_64(0.0);
        let gs: Vec<Gaussian> = vec![
            splat(2, Vec3::new(0.0, 0.0, 5.0), 0.1, 0.5),
            splat(0, Vec3::new(0.1, 0.0, 5.0), 0.1, 0.5),
            splat(1, Vec3::new(0.0, 0.1, 2.0), 0.1, 0.5),
        ];
        let p = preprocess(gs.iter(), &rig, &RenderConfig::default()).unwrap();
        let sorted = depth_sort(p);
        assert_eq!(sorted[0].id, 1);
        // equal depths tie-break by id
        assert_eq!(sorted[1].id, 0);
        assert_eq!(sorted[2].id, 2);
        let twice = depth_sort(sorted.clone());
        let ids: Vec<u32> = twice.iter().map(|p| p.id).collect();
        assert_eq!(ids, vec![1, 0, 2]);
    }

    #[test]
    fn right_eye_visible_passes_widened_cull() {
        // anything whose center is on the right camera's screen must pass
        // the widened cull on the left camera
        let rig = rig_64(0.12);
        let right = rig.right();
        let wide = widened_fov(&rig);
        let mut rng_pos = Vec::new();
        for i in 0..200 {
            let x = -2.0 + 0.02 * i as f64;
            rng_pos.push(Vec3::new(x, 0.0, 1.0 + (i % 7) as f64));
        }
        for pos in rng_pos {
            let g = splat(0, pos, 0.05, 0.9);
            if crate::camera::frustum_test(&right, &g, 0.0) {
                let on_left = match rig.left.project(g.position) {
                    Projected::InFront { screen, depth } => {
                        depth >= rig.left.near
                            && screen[0] >= -wide.margin_px
                            && screen[0] <= 64.0 + wide.margin_px
                    }
                    _ => false,
                };
                assert!(
                    on_left,
                    "right-visible splat at {pos:?} missed widened cull"
                );
            }
        }
    }
}
