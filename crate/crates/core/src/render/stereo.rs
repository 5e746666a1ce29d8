//! Triangulation-based stereo rasterization.
//!
//! The left eye renders normally. Every splat that survives the alpha
//! check in a left tile is re-projected by its disparity `B*f/depth` and
//! appended to one of four per-tile offset lists (0..3 tiles of shift).
//! A right tile then merges the four pre-sorted lists from its source left
//! tiles instead of re-binning and re-sorting the whole frame. Alpha is
//! recomputed per right-eye pixel, so wherever the merged list equals the
//! independently built list the right image is bit-identical.
//!
//! The three tile columns on the border without a full set of source tiles
//! render through the independent mono path.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::{Condvar, Mutex, OnceLock};

use crate::camera::StereoRig;
use crate::config::RenderConfig;
use crate::error::{Error, Result};
use crate::render::raster::{bin_tiles, render_tile, RasterStats, StatCounters, TileBuffer};
use crate::render::{check_depth_sorted, Framebuffer, ProjectedGaussian};

/// Horizontal pixel displacement between the eyes for a given depth.
pub fn disparity(depth: f64, rig: &StereoRig) -> Result<f64> {
    if depth < rig.left.near {
        return Err(Error::contract(format!(
            "disparity: depth {depth} in front of the near plane {}",
            rig.left.near
        )));
    }
    Ok(rig.baseline * rig.left.focal / depth)
}

/// One entry of a per-tile depth-ordered list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ListEntry {
    pub depth: f64,
    pub id: u32,
    /// Index into the projected slice.
    pub index: u32,
}

impl ListEntry {
    fn key(&self) -> (f64, u32) {
        (self.depth, self.id)
    }
}

/// 4-way merge of pre-sorted lists with duplicate-id removal. Inputs must
/// be sorted by (depth, id); the output is the sorted deduplicated union.
pub fn merge_tile_lists(lists: [&[ListEntry]; 4]) -> Result<Vec<ListEntry>> {
    for l in &lists {
        for w in l.windows(2) {
            if w[1].key() < w[0].key() {
                return Err(Error::contract("merge_tile_lists: input not sorted"));
            }
        }
    }
    let mut heads = [0usize; 4];
    let total: usize = lists.iter().map(|l| l.len()).sum();
    let mut out: Vec<ListEntry> = Vec::with_capacity(total);
    loop {
        let mut best: Option<(usize, (f64, u32))> = None;
        for (li, l) in lists.iter().enumerate() {
            if heads[li] < l.len() {
                let k = l[heads[li]].key();
                if best.is_none_or(|(_, bk)| k < bk) {
                    best = Some((li, k));
                }
            }
        }
        let Some((li, _)) = best else { break };
        let e = lists[li][heads[li]];
        heads[li] += 1;
        match out.last() {
            Some(last) if last.id == e.id && last.depth == e.depth => {} // duplicate
            _ => out.push(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StereoStats {
    pub left: RasterStats,
    pub right: RasterStats,
    /// Right-tile list entries obtained through the offset lists.
    pub via_lists: u64,
    /// Right-tile list entries binned by the independent border path.
    pub via_independent: u64,
    pub border_tiles: u32,
    pub merged_duplicates: u64,
}

/// Per-tile list diagnostics from a stereo render.
#[derive(Debug, Clone, Default)]
pub struct StereoListDiag {
    /// Merged id list per right tile; `None` for border tiles.
    pub merged: Vec<Option<Vec<u32>>>,
    /// Ids that passed the left alpha check, per left tile.
    pub passed_left: Vec<Vec<u32>>,
}

enum Task {
    Left(u32),
    RightInterior(u32),
    RightBorder(u32),
}

struct Pool {
    queue: Mutex<VecDeque<Task>>,
    cv: Condvar,
    completed: AtomicU32,
    total: u32,
}

impl Pool {
    fn push(&self, t: Task) {
        self.queue.lock().unwrap().push_back(t);
        self.cv.notify_all();
    }

    fn pop(&self) -> Option<Task> {
        let mut q = self.queue.lock().unwrap();
        loop {
            if let Some(t) = q.pop_front() {
                return Some(t);
            }
            if self.completed.load(Ordering::SeqCst) >= self.total {
                return None;
            }
            q = self.cv.wait(q).unwrap();
        }
    }

    fn finish_one(&self) {
        self.completed.fetch_add(1, Ordering::SeqCst);
        self.cv.notify_all();
    }
}

pub fn rasterize_stereo(
    projected: &[ProjectedGaussian],
    rig: &StereoRig,
    config: &RenderConfig,
    workers: usize,
) -> Result<(Framebuffer, Framebuffer, StereoStats)> {
    let (l, r, stats, _) = rasterize_stereo_inner(projected, rig, config, workers, false)?;
    Ok((l, r, stats))
}

/// `rasterize_stereo` plus per-tile list diagnostics.
pub fn rasterize_stereo_diagnostic(
    projected: &[ProjectedGaussian],
    rig: &StereoRig,
    config: &RenderConfig,
    workers: usize,
) -> Result<(Framebuffer, Framebuffer, StereoStats, StereoListDiag)> {
    let (l, r, stats, diag) = rasterize_stereo_inner(projected, rig, config, workers, true)?;
    Ok((l, r, stats, diag.unwrap_or_default()))
}

fn rasterize_stereo_inner(
    projected: &[ProjectedGaussian],
    rig: &StereoRig,
    config: &RenderConfig,
    workers: usize,
    collect_diag: bool,
) -> Result<(
    Framebuffer,
    Framebuffer,
    StereoStats,
    Option<StereoListDiag>,
)> {
    config.validate()?;
    check_depth_sorted(projected)?;
    let cam = &rig.left;
    let tile = config.tile_size;
    if !cam.width.is_multiple_of(tile) || !cam.height.is_multiple_of(tile) {
        return Err(Error::contract("resolution not divisible by tile size"));
    }
    if rig.max_disparity_px() > config.max_disparity_px + 1e-9 {
        return Err(Error::contract(format!(
            "rig misconfigured: max disparity {:.3} px exceeds the {:.0} px bound",
            rig.max_disparity_px(),
            config.max_disparity_px
        )));
    }
    let (tiles_x, tiles_y) = (cam.width / tile, cam.height / tile);
    let n_tiles = (tiles_x * tiles_y) as usize;
    let workers = workers.max(1);

    let zero_shift = |_: &ProjectedGaussian| 0.0;
    let left_lists = bin_tiles(projected, tiles_x, tiles_y, tile, &zero_shift);

    // precomputed per-splat disparity
    let disparities: Vec<f64> = projected
        .iter()
        .map(|g| rig.baseline * cam.focal / g.depth)
        .collect();
    let right_shift = |g: &ProjectedGaussian| -(rig.baseline * cam.focal / g.depth);

    // border = the right-edge columns whose four source tiles do not all
    // exist (content shifts toward -x in the right eye)
    let is_interior = |col: u32| col + 3 < tiles_x;
    let border_right_lists = {
        // independent binning restricted to border columns
        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); n_tiles];
        for (i, g) in projected.iter().enumerate() {
            let cx = g.center[0] - disparities[i];
            if let Some((x0, y0, x1, y1)) = g.tile_span(cx, tiles_x, tiles_y, tile) {
                for ty in y0..=y1 {
                    for tx in x0..=x1 {
                        if !is_interior(tx) {
                            lists[(ty * tiles_x + tx) as usize].push(i as u32);
                        }
                    }
                }
            }
        }
        lists
    };

    let left_tiles: Vec<OnceLock<TileBuffer>> = (0..n_tiles).map(|_| OnceLock::new()).collect();
    let right_tiles: Vec<OnceLock<TileBuffer>> = (0..n_tiles).map(|_| OnceLock::new()).collect();
    let offset_lists: Vec<OnceLock<[Vec<ListEntry>; 4]>> =
        (0..n_tiles).map(|_| OnceLock::new()).collect();
    let passed_lists: Vec<OnceLock<Vec<u32>>> = (0..n_tiles).map(|_| OnceLock::new()).collect();
    let merged_ids: Vec<OnceLock<Vec<u32>>> = (0..n_tiles).map(|_| OnceLock::new()).collect();

    let left_counters = StatCounters::new();
    let right_counters = StatCounters::new();
    let via_lists = AtomicU64::new(0);
    let via_independent = AtomicU64::new(0);
    let merged_duplicates = AtomicU64::new(0);

    // dependency counters for interior right tiles
    let deps: Vec<AtomicU32> = (0..n_tiles).map(|_| AtomicU32::new(4)).collect();
    let pool = Pool {
        queue: Mutex::new(VecDeque::new()),
        cv: Condvar::new(),
        completed: AtomicU32::new(0),
        total: 0,
    };
    let mut total_tasks = 0u32;
    {
        let mut q = pool.queue.lock().unwrap();
        for ix in 0..n_tiles as u32 {
            q.push_back(Task::Left(ix));
            total_tasks += 1;
        }
        for row in 0..tiles_y {
            for col in 0..tiles_x {
                if !is_interior(col) {
                    q.push_back(Task::RightBorder(row * tiles_x + col));
                    total_tasks += 1;
                } else {
                    total_tasks += 1; // interior task enqueued when deps clear
                }
            }
        }
    }
    let pool = Pool {
        total: total_tasks,
        ..pool
    };

    let run_worker = || {
        while let Some(task) = pool.pop() {
            match task {
                Task::Left(ix) => {
                    let (row, col) = (ix / tiles_x, ix % tiles_x);
                    let list = &left_lists[ix as usize];
                    let mut buf = TileBuffer::new(col * tile, row * tile, tile);
                    let mut passed = vec![false; list.len()];
                    render_tile(
                        projected,
                        list,
                        &mut buf,
                        &zero_shift,
                        config,
                        &left_counters,
                        Some(&mut passed),
                    );
                    // feed the stereo offset lists: passing splats go to the
                    // offset categories whose target right tile their
                    // disparity-shifted footprint covers
                    let mut offsets: [Vec<ListEntry>; 4] = Default::default();
                    let mut passed_ids = Vec::new();
                    for (li, &gi) in list.iter().enumerate() {
                        if !passed[li] {
                            continue;
                        }
                        let g = &projected[gi as usize];
                        passed_ids.push(g.id);
                        let cx = g.center[0] - disparities[gi as usize];
                        let Some((x0, _, x1, _)) = g.tile_span(cx, tiles_x, tiles_y, tile) else {
                            continue;
                        };
                        for k in 0..4u32 {
                            if col < k {
                                break;
                            }
                            let target = col - k;
                            if target >= x0 && target <= x1 {
                                offsets[k as usize].push(ListEntry {
                                    depth: g.depth,
                                    id: g.id,
                                    index: gi,
                                });
                            }
                        }
                    }
                    let _ = left_tiles[ix as usize].set(buf);
                    let _ = offset_lists[ix as usize].set(offsets);
                    let _ = passed_lists[ix as usize].set(passed_ids);
                    // release dependents: right tile (col - k) consumes this
                    // tile's offset-k list
                    for k in 0..4u32 {
                        if col < k {
                            break;
                        }
                        let target = col - k;
                        if is_interior(target) {
                            let t_ix = row * tiles_x + target;
                            if deps[t_ix as usize].fetch_sub(1, Ordering::SeqCst) == 1 {
                                pool.push(Task::RightInterior(t_ix));
                            }
                        }
                    }
                }
                Task::RightInterior(ix) => {
                    let (row, col) = (ix / tiles_x, ix % tiles_x);
                    let sources: [&[ListEntry]; 4] = std::array::from_fn(|k| {
                        offset_lists[(row * tiles_x + col + k as u32) as usize]
                            .get()
                            .expect("dependency not satisfied")[k]
                            .as_slice()
                    });
                    let raw_len: usize = sources.iter().map(|s| s.len()).sum();
                    let merged = merge_tile_lists(sources).expect("offset lists are sorted");
                    merged_duplicates.fetch_add((raw_len - merged.len()) as u64, Ordering::Relaxed);
                    via_lists.fetch_add(merged.len() as u64, Ordering::Relaxed);
                    let indices: Vec<u32> = merged.iter().map(|e| e.index).collect();
                    let mut buf = TileBuffer::new(col * tile, row * tile, tile);
                    render_tile(
                        projected,
                        &indices,
                        &mut buf,
                        &right_shift,
                        config,
                        &right_counters,
                        None,
                    );
                    if collect_diag {
                        let _ = merged_ids[ix as usize].set(merged.iter().map(|e| e.id).collect());
                    }
                    let _ = right_tiles[ix as usize].set(buf);
                }
                Task::RightBorder(ix) => {
                    let (row, col) = (ix / tiles_x, ix % tiles_x);
                    let list = &border_right_lists[ix as usize];
                    via_independent.fetch_add(list.len() as u64, Ordering::Relaxed);
                    let mut buf = TileBuffer::new(col * tile, row * tile, tile);
                    render_tile(
                        projected,
                        list,
                        &mut buf,
                        &right_shift,
                        config,
                        &right_counters,
                        None,
                    );
                    let _ = right_tiles[ix as usize].set(buf);
                }
            }
            pool.finish_one();
        }
    };

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(run_worker);
        }
    });

    let mut left_fb = Framebuffer::new(cam.width, cam.height);
    let mut right_fb = Framebuffer::new(cam.width, cam.height);
    let mut border_tiles = 0u32;
    for ix in 0..n_tiles {
        left_tiles[ix].get().unwrap().store(&mut left_fb);
        right_tiles[ix].get().unwrap().store(&mut right_fb);
        if !is_interior(ix as u32 % tiles_x) {
            border_tiles += 1;
        }
    }

    let stats = StereoStats {
        left: left_counters.snapshot(),
        right: right_counters.snapshot(),
        via_lists: via_lists.load(Ordering::Relaxed),
        via_independent: via_independent.load(Ordering::Relaxed),
        border_tiles,
        merged_duplicates: merged_duplicates.load(Ordering::Relaxed),
    };
    let diag = collect_diag.then(|| StereoListDiag {
        merged: (0..n_tiles)
            .map(|ix| merged_ids[ix].get().cloned())
            .collect(),
        passed_left: (0..n_tiles)
            .map(|ix| passed_lists[ix].get().cloned().unwrap_or_default())
            .collect(),
    });
    Ok((left_fb, right_fb, stats, diag))
}

/// Independent right-eye render sharing the preprocessing: every center is
/// shifted by its disparity, then the frame is re-binned and blended from
/// scratch. This is the reference the merged-list path is checked against.
pub fn rasterize_right_reference(
    projected: &[ProjectedGaussian],
    rig: &StereoRig,
    config: &RenderConfig,
) -> Result<(Framebuffer, RasterStats)> {
    config.validate()?;
    check_depth_sorted(projected)?;
    let cam = &rig.left;
    let tile = config.tile_size;
    let (tiles_x, tiles_y) = (cam.width / tile, cam.height / tile);
    let shift = |g: &ProjectedGaussian| -(rig.baseline * cam.focal / g.depth);
    let lists = bin_tiles(projected, tiles_x, tiles_y, tile, &shift);
    let counters = StatCounters::new();
    let mut fb = Framebuffer::new(cam.width, cam.height);
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

/// Right-eye per-tile id lists built independently (bin over the shifted
/// centers); the oracle for list-level stereo equivalence.
pub fn right_tile_oracle_lists(
    projected: &[ProjectedGaussian],
    rig: &StereoRig,
    config: &RenderConfig,
) -> Vec<Vec<u32>> {
    let cam = &rig.left;
    let tile = config.tile_size;
    let (tiles_x, tiles_y) = (cam.width / tile, cam.height / tile);
    let shift = |g: &ProjectedGaussian| -(rig.baseline * cam.focal / g.depth);
    bin_tiles(projected, tiles_x, tiles_y, tile, &shift)
        .into_iter()
        .map(|l| l.into_iter().map(|i| projected[i as usize].id).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Camera;
    use crate::gaussian::Gaussian;
    use crate::math::{Quat, Vec3};
    use crate::render::{depth_sort, preprocess, rasterize_mono};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rig(baseline: f64, near: f64) -> StereoRig {
        let left = Camera::new(
            Quat::IDENTITY,
            Vec3::ZERO,
            128.0,
            [32.0, 32.0],
            64,
            64,
            near,
            100.0,
        )
        .unwrap();
        StereoRig::new(left, baseline).unwrap()
    }

    fn scatter(seed: u64, n: usize, z_lo: f64, z_hi: f64) -> Vec<Gaussian> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let z = rng.random_range(z_lo..z_hi);
                Gaussian {
                    id: i as u32,
                    position: Vec3::new(
                        rng.random_range(-0.15..0.15) * z,
                        rng.random_range(-0.2..0.2) * z,
                        z,
                    ),
                    scale: Vec3::splat(rng.random_range(0.05..0.25)),
                    rotation: Quat::IDENTITY,
                    opacity: rng.random_range(0.4..0.95),
                    sh: vec![[
                        rng.random_range(-0.8..0.8),
                        rng.random_range(-0.8..0.8),
                        rng.random_range(-0.8..0.8),
                    ]],
                }
            })
            .collect()
    }

    #[test]
    fn disparity_formula() {
        let r = rig(0.06, 0.5);
        let mut r2 = r.clone();
        r2.left.focal = 1000.0;
        r2.left.near = 3.75;
        assert_eq!(disparity(10.0, &r2).unwrap(), 0.06 * 1000.0 / 10.0); // 6 px
        assert_eq!(disparity(3.75, &r2).unwrap(), 16.0); // boundary equals cap
        assert!(disparity(1.0, &r2).is_err()); // in front of near
        let far = disparity(100.0, &r2).unwrap();
        assert!((far - 0.6).abs() < 1e-12);
    }

    #[test]
    fn merge_examples_and_fuzz() {
        let e = |depth: f64, id: u32| ListEntry {
            depth,
            id,
            index: id,
        };
        let (a, b, c, d) = (
            vec![e(1.0, 1)],
            vec![e(2.0, 2)],
            vec![e(3.0, 3)],
            vec![e(4.0, 4)],
        );
        let m = merge_tile_lists([&a, &b, &c, &d]).unwrap();
        assert_eq!(m.iter().map(|x| x.id).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        // duplicate id in two lists appears once
        let b2 = vec![e(1.0, 1), e(2.0, 2)];
        let m = merge_tile_lists([&a, &b2, &c, &d]).unwrap();
        assert_eq!(m.iter().map(|x| x.id).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        // unsorted input is a contract violation
        let bad = vec![e(5.0, 5), e(1.0, 6)];
        assert!(merge_tile_lists([&bad, &b, &c, &d]).is_err());
        // fuzz vs sort-dedup-concat oracle
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let mut lists: [Vec<ListEntry>; 4] = Default::default();
            let mut all = Vec::new();
            for l in &mut lists {
                let n = rng.random_range(0..10);
                for _ in 0..n {
                    let id = rng.random_range(0..20u32);
                    let entry = e(id as f64 * 0.5, id); // depth keyed to id
                    l.push(entry);
                    all.push(entry);
                }
                l.sort_by(|a, b| a.key().partial_cmp(&b.key()).unwrap());
            }
            let m = merge_tile_lists([&lists[0], &lists[1], &lists[2], &lists[3]]).unwrap();
            all.sort_by(|a, b| a.key().partial_cmp(&b.key()).unwrap());
            all.dedup_by_key(|x| x.id);
            assert_eq!(m.len(), all.len());
            for (x, y) in m.iter().zip(&all) {
                assert_eq!(x.id, y.id);
            }
        }
    }

    #[test]
    fn zero_baseline_right_equals_left() {
        let r = rig(0.0, 0.5);
        let config = RenderConfig::default();
        let scene = scatter(3, 120, 2.0, 20.0);
        let p = depth_sort(preprocess(scene.iter(), &r, &config).unwrap());
        let (left, right, _) = rasterize_stereo(&p, &r, &config, 4).unwrap();
        assert_eq!(left.rgb, right.rgb);
    }

    #[test]
    fn misconfigured_rig_rejected() {
        // near small enough that max disparity exceeds 16 px
        let r = rig(0.5, 0.5); // 0.5 * 128 / 0.5 = 128 px
        let config = RenderConfig::default();
        let scene = scatter(4, 10, 2.0, 10.0);
        let p = depth_sort(preprocess(scene.iter(), &r, &config).unwrap());
        assert!(rasterize_stereo(&p, &r, &config, 1).is_err());
    }

    #[test]
    fn stereo_matches_reference_on_safe_scene() {
        // disparities well under 3 tiles and content away from borders
        let r = rig(0.06, 1.0); // max disparity 7.68 px < 12
        let config = RenderConfig::default();
        let scene = scatter(5, 150, 2.5, 30.0);
        let p = depth_sort(preprocess(scene.iter(), &r, &config).unwrap());
        let (_, right, stats) = rasterize_stereo(&p, &r, &config, 4).unwrap();
        let (reference, _) = rasterize_right_reference(&p, &r, &config).unwrap();
        assert_eq!(right.rgb, reference.rgb, "right image diverged");
        assert!(stats.via_lists > 0);
    }

    #[test]
    fn schedule_independent_of_worker_count() {
        let r = rig(0.06, 1.0);
        let config = RenderConfig::default();
        let scene = scatter(6, 100, 2.0, 25.0);
        let p = depth_sort(preprocess(scene.iter(), &r, &config).unwrap());
        let (l1, r1, s1) = rasterize_stereo(&p, &r, &config, 1).unwrap();
        let (l8, r8, s8) = rasterize_stereo(&p, &r, &config, 8).unwrap();
        assert_eq!(l1.rgb, l8.rgb);
        assert_eq!(r1.rgb, r8.rgb);
        assert_eq!(s1, s8);
    }

    #[test]
    fn right_saves_alpha_evaluations() {
        let r = rig(0.06, 1.0);
        let config = RenderConfig::default();
        let scene = scatter(7, 200, 2.0, 25.0);
        let p = depth_sort(preprocess(scene.iter(), &r, &config).unwrap());
        let (_, _, stats) = rasterize_stereo(&p, &r, &config, 2).unwrap();
        let (_, mono_left) = rasterize_mono(&p, &r.left, &config).unwrap();
        let (_, mono_right) = rasterize_right_reference(&p, &r, &config).unwrap();
        let stereo_total = stats.left.alpha_evals + stats.right.alpha_evals;
        let two_mono = mono_left.alpha_evals + mono_right.alpha_evals;
        assert!(
            stereo_total < two_mono,
            "stereo {stereo_total} vs two monos {two_mono}"
        );
    }
}
