//! Shared helpers for integration tests: independent reference
//! implementations (recursive cut traversal, all-pixel renderer) and scene
//! builders. The references are deliberately written against the public
//! contracts, not the library internals.

#![allow(dead_code)]

use splatcast::camera::{Camera, StereoRig};
use splatcast::gaussian::Gaussian;
use splatcast::harness::{Trajectory, TrajectorySample};
use splatcast::math::{Quat, Vec3};
use splatcast::render::{Framebuffer, ProjectedGaussian};
use splatcast::scene::{
    build_lod_tree, generate_synthetic_scene, partition_subtrees, LodTree, SyntheticSpec,
};
use splatcast::search::projected_size_px;
use splatcast::RenderConfig;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain recursive depth-first traversal: descend while too coarse, select
/// the first node at or under the threshold (or a leaf).
pub fn recursive_reference_cut(tree: &LodTree, camera: &Camera, config: &RenderConfig) -> Vec<u32> {
    fn walk(tree: &LodTree, camera: &Camera, config: &RenderConfig, ix: u32, out: &mut Vec<u32>) {
        let size = projected_size_px(camera, tree, ix, config.lod_margin_px);
        if size <= config.tau_star || tree.node(ix).is_leaf() {
            out.push(ix);
        } else {
            for c in tree.children(ix) {
                walk(tree, camera, config, c, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(tree, camera, config, tree.root(), &mut out);
    out.sort_unstable();
    out
}

/// All-pixel, all-gaussian brute-force renderer: no tiles, no binning. The
/// per-pixel blend mirrors the documented formula exactly, so the tile
/// renderer must match it bit for bit.
pub fn naive_render(
    projected: &[ProjectedGaussian],
    width: u32,
    height: u32,
    config: &RenderConfig,
) -> Framebuffer {
    let mut fb = Framebuffer::new(width, height);
    for py in 0..height {
        for px in 0..width {
            let x = px as f64 + 0.5;
            let y = py as f64 + 0.5;
            let mut t: f32 = 1.0;
            let base = ((py * width + px) * 3) as usize;
            for g in projected {
                let dx = x - g.center[0];
                let dy = y - g.center[1];
                let q = g.conic.quad(dx, dy);
                let alpha = (g.opacity * (-0.5 * q).exp()).min(config.alpha_cap);
                if alpha < config.alpha_star {
                    continue;
                }
                let a = alpha as f32;
                let w = a * t;
                fb.rgb[base] += g.rgb[0] * w;
                fb.rgb[base + 1] += g.rgb[1] * w;
                fb.rgb[base + 2] += g.rgb[2] * w;
                t *= 1.0 - a;
                if t < config.transmittance_floor as f32 {
                    break;
                }
            }
            fb.transmittance[(py * width + px) as usize] = t;
        }
    }
    fb
}

/// A synthetic tree with its partition installed.
pub fn make_tree(cells: u32, per_cell: u32, seed: u64, partition_target: u32) -> LodTree {
    let scene = generate_synthetic_scene(
        &SyntheticSpec {
            cells_x: cells,
            cells_y: cells,
            gaussians_per_cell: per_cell,
            ..Default::default()
        },
        seed,
    )
    .unwrap();
    let mut tree = build_lod_tree(&scene, 4).unwrap();
    let p = partition_subtrees(&tree, partition_target).unwrap();
    tree.install_partition(p);
    tree
}

pub fn camera(position: Vec3, target: Vec3, focal: f64, wh: u32, near: f64) -> Camera {
    Camera::look_at(position, target, focal, wh, wh, near, 2000.0).unwrap()
}

/// A random pose: position on a shell around the origin, looking at a
/// jittered target near the center. Shell radii span from inside the scene
/// to far outside.
pub fn random_pose(rng: &mut ChaCha8Rng, scene_radius: f64) -> (Vec3, Vec3) {
    let r = rng.random_range(0.3..4.0) * scene_radius;
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let z = rng.random_range(-0.9..0.9);
    let xy = (1.0f64 - z * z).sqrt();
    let position = Vec3::new(r * xy * theta.cos(), r * xy * theta.sin(), r * z);
    let target = Vec3::new(
        rng.random_range(-0.4..0.4) * scene_radius,
        rng.random_range(-0.4..0.4) * scene_radius,
        rng.random_range(-0.2..0.4) * scene_radius,
    );
    (position, target)
}

/// Random scatter of splats in a frustum-friendly slab, for renderer tests.
pub fn scatter_scene(seed: u64, n: usize, z_range: (f64, f64), lateral: f64) -> Vec<Gaussian> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let z = rng.random_range(z_range.0..z_range.1);
            let axis = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let rot = if axis.norm() < 1e-9 {
                Quat::IDENTITY
            } else {
                Quat::from_axis_angle(axis, rng.random_range(0.0..std::f64::consts::TAU))
            };
            Gaussian {
                id: i as u32,
                position: Vec3::new(
                    rng.random_range(-lateral..lateral) * z,
                    rng.random_range(-lateral..lateral) * z,
                    z,
                ),
                scale: Vec3::new(
                    rng.random_range(0.05..0.3),
                    rng.random_range(0.05..0.3),
                    rng.random_range(0.05..0.3),
                ),
                rotation: rot,
                opacity: rng.random_range(0.35..0.95),
                sh: vec![
                    [
                        rng.random_range(-0.8..0.8),
                        rng.random_range(-0.8..0.8),
                        rng.random_range(-0.8..0.8),
                    ],
                    [rng.random_range(-0.1..0.1); 3],
                    [rng.random_range(-0.1..0.1); 3],
                    [rng.random_range(-0.1..0.1); 3],
                ],
            }
        })
        .collect()
}

/// An orbit trajectory around the origin sampled at 90 fps spacing.
pub fn smooth_orbit(radius: f64, height: f64, frames: u64) -> Trajectory {
    Trajectory::orbit(Vec3::ZERO, radius, height, frames, 90.0)
}

pub fn pose_sample(frame: u64, position: Vec3, target: Vec3) -> TrajectorySample {
    TrajectorySample {
        frame,
        position,
        orientation: Trajectory::look_at_orientation(position, target),
        time_s: frame as f64 / 90.0,
    }
}

pub fn rig_from(camera: Camera, baseline: f64) -> StereoRig {
    StereoRig::new(camera, baseline).unwrap()
}
