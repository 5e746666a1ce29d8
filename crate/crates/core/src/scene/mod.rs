//! Scene ingestion and offline LoD-tree construction.

mod format;
mod partition;
mod ply;
mod tree;

pub use format::{decode_tree, encode_tree, load_tree, save_tree, NLOD_MAGIC, NLOD_VERSION};
pub use partition::{partition_subtrees, SubtreeInfo, SubtreePartition};
pub use ply::{load_ply, save_ply};
pub use tree::{build_lod_tree, level_order_layout, merge_gaussians, LodNode, LodTree, NO_NODE};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::math::{Quat, Vec3};

/// Parameters for the procedural city-block test scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub cells_x: u32,
    pub cells_y: u32,
    /// Ground-grid cell edge, meters.
    pub cell_size: f64,
    pub gaussians_per_cell: u32,
    pub sh_degree: u8,
    /// Typical splat standard deviation, meters.
    pub base_scale: f64,
    /// Per-splat SH jitter around the cell base color.
    pub color_noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            cells_x: 10,
            cells_y: 10,
            cell_size: 4.0,
            gaussians_per_cell: 50,
            sh_degree: 1,
            base_scale: 0.25,
            color_noise: 0.3,
        }
    }
}

/// Deterministic splat scene on a ground grid: every cell holds one cluster
/// ("building") of jittered gaussians. Same spec + seed gives a
/// byte-identical scene.
pub fn generate_synthetic_scene(spec: &SyntheticSpec, seed: u64) -> Result<Vec<Gaussian>> {
    if spec.cells_x == 0 || spec.cells_y == 0 || spec.gaussians_per_cell == 0 {
        return Err(Error::contract("synthetic scene: zero extents"));
    }
    if spec.sh_degree > 3 {
        return Err(Error::contract("synthetic scene: sh_degree > 3"));
    }
    if !(spec.cell_size > 0.0 && spec.base_scale > 0.0) {
        return Err(Error::contract("synthetic scene: non-positive dimensions"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sh_len = (spec.sh_degree as usize + 1) * (spec.sh_degree as usize + 1);
    let half_x = spec.cells_x as f64 * spec.cell_size / 2.0;
    let half_y = spec.cells_y as f64 * spec.cell_size / 2.0;
    let mut out = Vec::with_capacity(
        spec.cells_x as usize * spec.cells_y as usize * spec.gaussians_per_cell as usize,
    );
    let mut id = 0u32;
    for cy in 0..spec.cells_y {
        for cx in 0..spec.cells_x {
            let cell_center = Vec3::new(
                (cx as f64 + 0.5) * spec.cell_size - half_x,
                (cy as f64 + 0.5) * spec.cell_size - half_y,
                0.0,
            );
            let jitter = Vec3::new(
                rng.random_range(-0.2..0.2) * spec.cell_size,
                rng.random_range(-0.2..0.2) * spec.cell_size,
                0.0,
            );
            let height: f64 = rng.random_range(0.5..3.0) * spec.cell_size;
            let footprint: f64 = rng.random_range(0.15..0.4) * spec.cell_size;
            // per-cell base color
            let base_rgb = [
                rng.random_range(-0.8..0.8),
                rng.random_range(-0.8..0.8),
                rng.random_range(-0.8..0.8),
            ];
            for _ in 0..spec.gaussians_per_cell {
                let p = cell_center
                    + jitter
                    + Vec3::new(
                        rng.random_range(-1.0..1.0) * footprint,
                        rng.random_range(-1.0..1.0) * footprint,
                        rng.random_range(0.0..1.0) * height,
                    );
                let s = Vec3::new(
                    spec.base_scale * rng.random_range(0.5..1.8),
                    spec.base_scale * rng.random_range(0.5..1.8),
                    spec.base_scale * rng.random_range(0.5..1.8),
                );
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
                let noise = spec.color_noise.max(1e-9);
                let mut sh = vec![[0.0f64; 3]; sh_len];
                for c in 0..3 {
                    sh[0][c] = base_rgb[c] + rng.random_range(-noise..noise);
                }
                for coeff in sh.iter_mut().skip(1) {
                    for c in coeff.iter_mut() {
                        *c = rng.random_range(-noise / 2.0..noise / 2.0);
                    }
                }
                out.push(Gaussian {
                    id,
                    position: p,
                    scale: s,
                    rotation: rot,
                    opacity: rng.random_range(0.3..0.9),
                    sh,
                });
                id += 1;
            }
        }
    }
    Ok(out)
}
