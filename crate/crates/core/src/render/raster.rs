//! Front-to-back tile rasterization with per-pixel alpha checks, early
//! termination on transmittance, and f32 accumulation.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::camera::Camera;
use crate::config::RenderConfig;
use crate::error::Result;
use crate::render::{check_depth_sorted, ProjectedGaussian};

#[derive(Debug, Clone, PartialEq)]
pub struct Framebuffer {
    pub width: u32,
    pub height: u32,
    /// RGB accumulation, 3 floats per pixel, row-major.
    pub rgb: Vec<f32>,
    /// Remaining per-pixel transmittance after blending.
    pub transmittance: Vec<f32>,
}

impl Framebuffer {
    pub fn new(width: u32, height: u32) -> Framebuffer {
        Framebuffer {
            width,
            height,
            rgb: vec![0.0; (width * height * 3) as usize],
            transmittance: vec![1.0; (width * height) as usize],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    /// 8-bit image: clamp to [0,1], scale, round.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.rgb
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RasterStats {
    /// Per-pixel alpha evaluations performed.
    pub alpha_evals: u64,
    /// Evaluations that passed the alpha check and blended.
    pub blended: u64,
    /// Pixels that hit the transmittance floor early.
    pub early_terminated: u64,
}

pub(crate) struct StatCounters {
    pub alpha_evals: AtomicU64,
    pub blended: AtomicU64,
    pub early_terminated: AtomicU64,
}

impl StatCounters {
    pub fn new() -> Self {
        StatCounters {
            alpha_evals: AtomicU64::new(0),
            blended: AtomicU64::new(0),
            early_terminated: AtomicU64::new(0),
        }
    }

    pub fn snapshot(&self) -> RasterStats {
        RasterStats {
            alpha_evals: self.alpha_evals.load(Ordering::Relaxed),
            blended: self.blended.load(Ordering::Relaxed),
            early_terminated: self.early_terminated.load(Ordering::Relaxed),
        }
    }
}

/// A tile-local render target copied into the framebuffer once finished.
pub(crate) struct TileBuffer {
    pub x0: u32,
    pub y0: u32,
    pub size: u32,
    pub rgb: Vec<f32>,
    pub transmittance: Vec<f32>,
}

impl TileBuffer {
    pub fn new(x0: u32, y0: u32, size: u32) -> TileBuffer {
        TileBuffer {
            x0,
            y0,
            size,
            rgb: vec![0.0; (size * size * 3) as usize],
            transmittance: vec![1.0; (size * size) as usize],
        }
    }

    pub fn store(&self, fb: &mut Framebuffer) {
        for dy in 0..self.size {
            for dx in 0..self.size {
                let src = ((dy * self.size + dx) * 3) as usize;
                let px = self.x0 + dx;
                let py = self.y0 + dy;
                let dst = ((py * fb.width + px) * 3) as usize;
                fb.rgb[dst..dst + 3].copy_from_slice(&self.rgb[src..src + 3]);
                fb.transmittance[(py * fb.width + px) as usize] =
                    self.transmittance[(dy * self.size + dx) as usize];
            }
        }
    }
}

/// Blends one tile front-to-back. `list` indexes into `projected` and must
/// be depth-ordered. `center_shift_x` displaces every splat center (the
/// right eye passes its negative disparity). When `passed` is given, it is
/// set for list entries that survived the alpha check on any pixel.
pub(crate) fn render_tile(
    projected: &[ProjectedGaussian],
    list: &[u32],
    tile: &mut TileBuffer,
    center_shift_x: &dyn Fn(&ProjectedGaussian) -> f64,
    config: &RenderConfig,
    counters: &StatCounters,
    mut passed: Option<&mut Vec<bool>>,
) {
    let mut alpha_evals = 0u64;
    let mut blended = 0u64;
    let mut early = 0u64;
    for dy in 0..tile.size {
        for dx in 0..tile.size {
            let px = (tile.x0 + dx) as f64 + 0.5;
            let py = (tile.y0 + dy) as f64 + 0.5;
            let ti = (dy * tile.size + dx) as usize;
            let mut t = tile.transmittance[ti];
            if t < config.transmittance_floor as f32 {
                continue;
            }
            for (li, &gi) in list.iter().enumerate() {
                let g = &projected[gi as usize];
                let cx = g.center[0] + center_shift_x(g);
                let ddx = px - cx;
                let ddy = py - g.center[1];
                let q = g.conic.quad(ddx, ddy);
                alpha_evals += 1;
                let alpha = (g.opacity * (-0.5 * q).exp()).min(config.alpha_cap);
                if alpha < config.alpha_star {
                    continue;
                }
                blended += 1;
                if let Some(flags) = passed.as_deref_mut() {
                    flags[li] = true;
                }
                let a = alpha as f32;
                let w = a * t;
                let base = ti * 3;
                tile.rgb[base] += g.rgb[0] * w;
                tile.rgb[base + 1] += g.rgb[1] * w;
                tile.rgb[base + 2] += g.rgb[2] * w;
                t *= 1.0 - a;
                if t < config.transmittance_floor as f32 {
                    early += 1;
                    break;
                }
            }
            tile.transmittance[ti] = t;
        }
    }
    counters
        .alpha_evals
        .fetch_add(alpha_evals, Ordering::Relaxed);
    counters.blended.fetch_add(blended, Ordering::Relaxed);
    counters
        .early_terminated
        .fetch_add(early, Ordering::Relaxed);
}

/// Bins depth-sorted splats per tile; per-tile lists inherit the depth
/// order.
pub(crate) fn bin_tiles(
    projected: &[ProjectedGaussian],
    tiles_x: u32,
    tiles_y: u32,
    tile: u32,
    center_shift_x: &dyn Fn(&ProjectedGaussian) -> f64,
) -> Vec<Vec<u32>> {
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); (tiles_x * tiles_y) as usize];
    for (i, g) in projected.iter().enumerate() {
        let cx = g.center[0] + center_shift_x(g);
        if let Some((x0, y0, x1, y1)) = g.tile_span(cx, tiles_x, tiles_y, tile) {
            for ty in y0..=y1 {
                for tx in x0..=x1 {
                    lists[(ty * tiles_x + tx) as usize].push(i as u32);
                }
            }
        }
    }
    lists
}

/// Standard tile-based rasterization of a depth-sorted list.
pub fn rasterize_mono(
    projected: &[ProjectedGaussian],
    camera: &Camera,
    config: &RenderConfig,
) -> Result<(Framebuffer, RasterStats)> {
    config.validate()?;
    check_depth_sorted(projected)?;
    let tile = config.tile_size;
    if !camera.width.is_multiple_of(tile) || !camera.height.is_multiple_of(tile) {
        return Err(crate::error::Error::contract(
            "resolution not divisible by tile size",
        ));
    }
    let (tiles_x, tiles_y) = (camera.width / tile, camera.height / tile);
    let shift = |_: &ProjectedGaussian| 0.0;
    let lists = bin_tiles(projected, tiles_x, tiles_y, tile, &shift);
    let counters = StatCounters::new();
    let mut fb = Framebuffer::new(camera.width, camera.height);
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            let mut buf = TileBuffer::new(tx * tile, ty * tile, tile);
            render_tile(
                projected,
                &lists[(ty * tiles_x + tx) as usize],
                &mut buf,
                &shift,
                config,
                &counters,
                None,
            );
            buf.store(&mut fb);
        }
    }
    Ok((fb, counters.snapshot()))
}
