//! LoD cut search.
//!
//! `full_cut_search` walks the level-ordered tree top-down, streaming each
//! level in fixed-size blocks of consecutive nodes and classifying only the
//! children of nodes that were still too coarse. `temporal_cut_search`
//! starts from the previous frame's cut instead: only the subtrees owning a
//! previous member are searched, escalating into the top tree (when the
//! frontier moved up) or into child subtrees (when it moved down). Both
//! produce the same cut as a plain recursive traversal, exactly.
//!
//! Counter semantics: the streaming search counts every node of every
//! dispatched block as visited (that is what it reads), while the temporal
//! search does random access and counts only the nodes it classifies.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::camera::{Camera, Projected};
use crate::config::RenderConfig;
use crate::error::{Error, Result};
use crate::scene::LodTree;

/// The frontier of tree nodes at the target level of detail for one pose.
#[derive(Debug, Clone)]
pub struct Cut {
    pub frame: u64,
    pub tree_id: u64,
    pub camera: Camera,
    /// Node indices, ascending.
    pub members: Vec<u32>,
}

impl Cut {
    pub fn member_set(&self) -> BTreeSet<u32> {
        self.members.iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes_visited: u64,
    pub blocks_dispatched: u64,
    pub subtrees_searched: u64,
    pub escalations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutClass {
    TooCoarse,
    Selected,
    BelowCut,
}

/// Screen-space extent of a splat in pixels: `f * 3max(scale) / depth`,
/// with depth clamped at the near plane. Splats behind the camera or far
/// outside the widened screen rectangle count as size 0 (kept coarse; the
/// renderer culls them later).
pub fn projected_size_px_free(
    camera: &Camera,
    g: &crate::gaussian::Gaussian,
    margin_px: f64,
) -> f64 {
    match camera.project(g.position) {
        Projected::Behind { .. } => 0.0,
        Projected::InFront { screen, depth } => {
            if screen[0] < -margin_px
                || screen[0] > camera.width as f64 + margin_px
                || screen[1] < -margin_px
                || screen[1] > camera.height as f64 + margin_px
            {
                return 0.0;
            }
            camera.focal * g.extent() / depth.max(camera.near)
        }
    }
}

/// `projected_size_px_free` for a tree node.
pub fn projected_size_px(camera: &Camera, tree: &LodTree, node: u32, margin_px: f64) -> f64 {
    projected_size_px_free(camera, &tree.node(node).gaussian, margin_px)
}

/// Classifies one node against the LoD threshold, considering its parent.
pub fn cut_predicate(
    tree: &LodTree,
    node: u32,
    camera: &Camera,
    config: &RenderConfig,
) -> CutClass {
    let size = projected_size_px(camera, tree, node, config.lod_margin_px);
    if let Some(parent) = tree.node(node).parent {
        let parent_size = projected_size_px(camera, tree, parent, config.lod_margin_px);
        if parent_size <= config.tau_star {
            return CutClass::BelowCut;
        }
    }
    if size <= config.tau_star {
        CutClass::Selected
    } else if tree.node(node).is_leaf() {
        // an oversized leaf still joins the cut so the frontier stays total
        CutClass::Selected
    } else {
        CutClass::TooCoarse
    }
}

/// Classification for a node already known to be reachable (parent too
/// coarse or root).
#[inline]
fn classify_reachable(
    tree: &LodTree,
    node: u32,
    camera: &Camera,
    config: &RenderConfig,
) -> CutClass {
    let size = projected_size_px(camera, tree, node, config.lod_margin_px);
    if size <= config.tau_star || tree.node(node).is_leaf() {
        CutClass::Selected
    } else {
        CutClass::TooCoarse
    }
}

/// Fully-streaming level-order traversal. Each level's candidate nodes
/// (children of too-coarse parents) are covered by fixed-grid blocks of at
/// most `config.block_size` consecutive nodes, dispatched dynamically to
/// idle workers. The result is independent of worker count and dispatch
/// order.
pub fn full_cut_search(
    tree: &LodTree,
    camera: &Camera,
    config: &RenderConfig,
    worker_count: usize,
) -> (Cut, SearchStats) {
    let workers = worker_count.max(1);
    let block = config.block_size.max(1);
    let mut members: Vec<u32> = Vec::new();
    let mut stats = SearchStats::default();

    // candidate index ranges within the current level, ascending & disjoint
    let mut candidates: Vec<(u32, u32)> = vec![(0, 1)];
    for level in 0..tree.levels() {
        if candidates.is_empty() {
            break;
        }
        let lo = tree.level_offsets[level] as u32;
        let level_end = tree.level_offsets[level + 1] as u32;
        // blocks on a fixed grid anchored at the level start; a cell is
        // dispatched when it intersects any candidate range
        type Block = (u32, u32, Vec<(u32, u32)>);
        let mut blocks: Vec<Block> = Vec::new();
        {
            let b = block as u32;
            let mut ci = 0usize;
            let mut grid = (candidates[0].0 - lo) / b;
            while ci < candidates.len() {
                let bstart = lo + grid * b;
                let bend = (bstart + b).min(level_end);
                if candidates[ci].0 >= bend {
                    grid = (candidates[ci].0 - lo) / b;
                    continue;
                }
                let mut inside = Vec::new();
                while ci < candidates.len() && candidates[ci].0 < bend {
                    let (clo, chi) = candidates[ci];
                    inside.push((clo.max(bstart), chi.min(bend)));
                    if chi <= bend {
                        ci += 1;
                    } else {
                        break;
                    }
                }
                blocks.push((bstart, bend, inside));
                grid += 1;
            }
        }

        stats.blocks_dispatched += blocks.len() as u64;
        for (bstart, bend, _) in &blocks {
            stats.nodes_visited += (*bend - *bstart) as u64;
        }

        // classify candidates block-by-block on the worker pool
        let next = AtomicUsize::new(0);
        let results: Vec<Mutex<(Vec<u32>, Vec<u32>)>> = blocks
            .iter()
            .map(|_| Mutex::new((Vec::new(), Vec::new())))
            .collect();
        std::thread::scope(|scope| {
            for _ in 0..workers.min(blocks.len().max(1)) {
                scope.spawn(|| loop {
                    let bi = next.fetch_add(1, Ordering::Relaxed);
                    if bi >= blocks.len() {
                        break;
                    }
                    let (_, _, ranges) = &blocks[bi];
                    let mut selected = Vec::new();
                    let mut coarse = Vec::new();
                    for &(clo, chi) in ranges {
                        for ix in clo..chi {
                            match classify_reachable(tree, ix, camera, config) {
                                CutClass::Selected => selected.push(ix),
                                CutClass::TooCoarse => coarse.push(ix),
                                CutClass::BelowCut => unreachable!(),
                            }
                        }
                    }
                    *results[bi].lock().unwrap() = (selected, coarse);
                });
            }
        });

        let mut coarse_all: Vec<u32> = Vec::new();
        for slot in results {
            let (selected, coarse) = slot.into_inner().unwrap();
            members.extend(selected);
            coarse_all.extend(coarse);
        }

        // children of too-coarse nodes form the next level's candidates;
        // contiguous runs coalesce
        let mut next_ranges: Vec<(u32, u32)> = Vec::new();
        for ix in coarse_all {
            let r = tree.children(ix);
            if r.is_empty() {
                continue;
            }
            match next_ranges.last_mut() {
                Some(last) if last.1 == r.start => last.1 = r.end,
                _ => next_ranges.push((r.start, r.end)),
            }
        }
        candidates = next_ranges;
    }

    members.sort_unstable();
    (
        Cut {
            frame: 0,
            tree_id: tree.id,
            camera: camera.clone(),
            members,
        },
        stats,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum RegionKey {
    Subtree(u32),
    TopTree,
}

/// Temporal-aware search: set-equal to `full_cut_search` for any valid
/// previous cut from the same tree.
pub fn temporal_cut_search(
    tree: &LodTree,
    camera: &Camera,
    prev: &Cut,
    config: &RenderConfig,
    worker_count: usize,
) -> Result<(Cut, SearchStats)> {
    if prev.tree_id != tree.id {
        return Err(Error::contract(
            "temporal_cut_search: previous cut is from a different tree",
        ));
    }
    if prev.members.is_empty() {
        return Err(Error::contract("temporal_cut_search: previous cut empty"));
    }
    let workers = worker_count.max(1);

    // regions owning a previous member
    let mut keys: HashSet<RegionKey> = HashSet::new();
    for &m in &prev.members {
        keys.insert(match tree.node(m).subtree_id {
            Some(sid) => RegionKey::Subtree(sid),
            None => RegionKey::TopTree,
        });
    }
    let mut seeds: Vec<RegionKey> = keys.iter().copied().collect();
    seeds.sort_by_key(|k| match k {
        RegionKey::TopTree => 0u64,
        RegionKey::Subtree(sid) => 1 + *sid as u64,
    });

    let region_root = |key: RegionKey| -> u32 {
        match key {
            RegionKey::TopTree => tree.root(),
            RegionKey::Subtree(sid) => tree.partition.subtrees[sid as usize].root,
        }
    };

    let mut stats = SearchStats::default();
    let mut members: BTreeSet<u32> = BTreeSet::new();

    // Validate every region root's ancestor chain once, memoized. A chain
    // containing a fine node means the frontier sits above the region: the
    // topmost fine node on that chain is the member for the whole branch.
    let mut size_memo: HashMap<u32, bool> = HashMap::new(); // node -> too coarse
    let mut descend_seeds: Vec<RegionKey> = Vec::new();
    for &key in &seeds {
        let root = region_root(key);
        let mut chain = Vec::new();
        let mut cur = tree.node(root).parent;
        while let Some(p) = cur {
            chain.push(p);
            cur = tree.node(p).parent;
        }
        chain.reverse(); // root first
        let mut topmost_fine: Option<u32> = None;
        for &a in &chain {
            let coarse = *size_memo.entry(a).or_insert_with(|| {
                stats.nodes_visited += 1;
                projected_size_px(camera, tree, a, config.lod_margin_px) > config.tau_star
            });
            if !coarse {
                topmost_fine = Some(a);
                break;
            }
        }
        match topmost_fine {
            Some(f) => {
                members.insert(f);
                stats.escalations += 1;
            }
            None => descend_seeds.push(key),
        }
    }

    // Parallel region descents; downward escalations enqueue child subtrees.
    // Nodes already classified during chain validation are not recounted,
    // so nodes_visited stays a per-node count.
    let prepassed: HashSet<u32> = size_memo.keys().copied().collect();
    let queue: Mutex<VecDeque<RegionKey>> = Mutex::new(descend_seeds.iter().copied().collect());
    let enqueued: Mutex<HashSet<RegionKey>> = Mutex::new(descend_seeds.iter().copied().collect());
    let in_flight = AtomicUsize::new(0);
    let found: Mutex<Vec<u32>> = Mutex::new(Vec::new());
    let visited = AtomicUsize::new(0);
    let regions_searched = AtomicUsize::new(0);
    let down_escalations = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let key = {
                    let mut q = queue.lock().unwrap();
                    match q.pop_front() {
                        Some(k) => {
                            in_flight.fetch_add(1, Ordering::SeqCst);
                            Some(k)
                        }
                        None => None,
                    }
                };
                let Some(key) = key else {
                    if in_flight.load(Ordering::SeqCst) == 0 {
                        break;
                    }
                    std::thread::yield_now();
                    continue;
                };

                regions_searched.fetch_add(1, Ordering::Relaxed);
                let mut local_members = Vec::new();
                let mut local_visited = 0usize;
                let in_region = |ix: u32| -> bool {
                    match key {
                        RegionKey::TopTree => tree.node(ix).subtree_id.is_none(),
                        RegionKey::Subtree(sid) => tree.node(ix).subtree_id == Some(sid),
                    }
                };
                let mut stack = vec![region_root(key)];
                while let Some(ix) = stack.pop() {
                    local_visited += usize::from(!prepassed.contains(&ix));
                    match classify_reachable(tree, ix, camera, config) {
                        CutClass::Selected => local_members.push(ix),
                        CutClass::TooCoarse => {
                            for c in tree.children(ix) {
                                if in_region(c) {
                                    stack.push(c);
                                } else {
                                    // frontier exits this region: continue in
                                    // the child's own subtree
                                    let ckey = match tree.node(c).subtree_id {
                                        Some(sid) => RegionKey::Subtree(sid),
                                        None => RegionKey::TopTree,
                                    };
                                    let mut seen = enqueued.lock().unwrap();
                                    if seen.insert(ckey) {
                                        down_escalations.fetch_add(1, Ordering::Relaxed);
                                        queue.lock().unwrap().push_back(ckey);
                                    }
                                }
                            }
                        }
                        CutClass::BelowCut => unreachable!(),
                    }
                }
                visited.fetch_add(local_visited, Ordering::Relaxed);
                found.lock().unwrap().extend(local_members);
                in_flight.fetch_sub(1, Ordering::SeqCst);
            });
        }
    });

    stats.nodes_visited += visited.load(Ordering::Relaxed) as u64;
    stats.subtrees_searched = regions_searched.load(Ordering::Relaxed) as u64;
    stats.escalations += down_escalations.load(Ordering::Relaxed) as u64;
    members.extend(found.into_inner().unwrap());

    Ok((
        Cut {
            frame: 0,
            tree_id: tree.id,
            camera: camera.clone(),
            members: members.into_iter().collect(),
        },
        stats,
    ))
}

/// True iff every root-to-leaf path contains exactly one cut member.
pub fn validate_cut(tree: &LodTree, cut: &Cut) -> bool {
    let mut is_member = vec![false; tree.len()];
    for &m in &cut.members {
        if (m as usize) >= tree.len() {
            return false;
        }
        is_member[m as usize] = true;
    }
    // path_count[i] = members on the root path down to and including i
    let mut path_count = vec![0u8; tree.len()];
    for ix in 0..tree.len() {
        let inherited = match tree.nodes[ix].parent {
            Some(p) => path_count[p as usize],
            None => 0,
        };
        let c = inherited + is_member[ix] as u8;
        if c > 1 {
            return false;
        }
        path_count[ix] = c;
        if tree.nodes[ix].is_leaf() && c != 1 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Gaussian;
    use crate::math::{Quat, Vec3};
    use crate::scene::{
        build_lod_tree, generate_synthetic_scene, partition_subtrees, SyntheticSpec,
    };

    fn flat_gaussians(n: u32, spacing: f64, scale: f64) -> Vec<Gaussian> {
        (0..n)
            .map(|i| Gaussian {
                id: i,
                position: Vec3::new((i % 8) as f64 * spacing, (i / 8) as f64 * spacing, 0.0),
                scale: Vec3::splat(scale),
                rotation: Quat::IDENTITY,
                opacity: 0.8,
                sh: vec![[0.0; 3]],
            })
            .collect()
    }

    fn camera_at(dist: f64) -> Camera {
        Camera::look_at(
            Vec3::new(8.0, 8.0, -dist),
            Vec3::new(8.0, 8.0, 0.0),
            256.0,
            64,
            64,
            0.5,
            1000.0,
        )
        .unwrap()
    }

    /// Plain recursive reference traversal.
    fn recursive_cut(tree: &LodTree, camera: &Camera, config: &RenderConfig) -> Vec<u32> {
        fn walk(
            tree: &LodTree,
            camera: &Camera,
            config: &RenderConfig,
            ix: u32,
            out: &mut Vec<u32>,
        ) {
            match classify_reachable(tree, ix, camera, config) {
                CutClass::Selected => out.push(ix),
                CutClass::TooCoarse => {
                    for c in tree.children(ix) {
                        walk(tree, camera, config, c, out);
                    }
                }
                CutClass::BelowCut => unreachable!(),
            }
        }
        let mut out = Vec::new();
        walk(tree, camera, config, tree.root(), &mut out);
        out.sort_unstable();
        out
    }

    #[test]
    fn single_node_tree() {
        let tree = build_lod_tree(&flat_gaussians(1, 1.0, 0.1), 4).unwrap();
        let cam = camera_at(20.0);
        let (cut, stats) = full_cut_search(&tree, &cam, &RenderConfig::default(), 1);
        assert_eq!(cut.members, vec![0]);
        assert_eq!(stats.nodes_visited, 1);
        assert!(validate_cut(&tree, &cut));
    }

    #[test]
    fn predicate_basic_cases() {
        // two gaussians wide apart -> 3-node tree (root + 2 leaves)
        let gs = flat_gaussians(2, 8.0, 0.1);
        let tree = build_lod_tree(&gs, 4).unwrap();
        let cam = camera_at(10.0);
        // unbounded margin: pure size semantics for this test
        let mut config = RenderConfig {
            lod_margin_px: 1e9,
            ..Default::default()
        };
        // find sizes, then pick tau between leaf and root size
        let root_size = projected_size_px(&cam, &tree, 0, config.lod_margin_px);
        let leaf_size = projected_size_px(&cam, &tree, 1, config.lod_margin_px);
        assert!(root_size > leaf_size);
        config.tau_star = (root_size + leaf_size) / 2.0;
        assert_eq!(cut_predicate(&tree, 0, &cam, &config), CutClass::TooCoarse);
        assert_eq!(cut_predicate(&tree, 1, &cam, &config), CutClass::Selected);
        // root fine enough -> root selected, leaves below
        config.tau_star = root_size * 1.01;
        assert_eq!(cut_predicate(&tree, 0, &cam, &config), CutClass::Selected);
        assert_eq!(cut_predicate(&tree, 1, &cam, &config), CutClass::BelowCut);
    }

    #[test]
    fn forced_leaf_rule() {
        let gs = flat_gaussians(2, 8.0, 0.5);
        let tree = build_lod_tree(&gs, 4).unwrap();
        let cam = camera_at(5.0);
        let config = RenderConfig {
            lod_margin_px: 1e9,
            tau_star: 1e-3, // everything oversized
            ..Default::default()
        };
        let leaf = tree.nodes.iter().position(|n| n.is_leaf()).unwrap() as u32;
        assert_eq!(
            cut_predicate(&tree, leaf, &cam, &config),
            CutClass::Selected
        );
        let (cut, _) = full_cut_search(&tree, &cam, &config, 1);
        assert!(validate_cut(&tree, &cut));
    }

    #[test]
    fn matches_recursive_reference_and_counts() {
        let scene = generate_synthetic_scene(
            &SyntheticSpec {
                cells_x: 4,
                cells_y: 4,
                gaussians_per_cell: 16,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let tree = build_lod_tree(&scene, 4).unwrap();
        let cam = Camera::look_at(
            Vec3::new(10.0, -30.0, 18.0),
            Vec3::ZERO,
            256.0,
            64,
            64,
            0.5,
            1000.0,
        )
        .unwrap();
        for tau in [2.0, 8.0, 32.0, 128.0] {
            let config = RenderConfig::default().with_tau(tau);
            let (cut, _) = full_cut_search(&tree, &cam, &config, 3);
            assert_eq!(cut.members, recursive_cut(&tree, &cam, &config));
            assert!(validate_cut(&tree, &cut));
        }
    }

    #[test]
    fn worker_count_does_not_change_cut() {
        let scene = generate_synthetic_scene(
            &SyntheticSpec {
                cells_x: 5,
                cells_y: 5,
                gaussians_per_cell: 20,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let tree = build_lod_tree(&scene, 4).unwrap();
        let cam = camera_at(40.0);
        let config = RenderConfig::default().with_tau(6.0);
        let (c1, s1) = full_cut_search(&tree, &cam, &config, 1);
        let (c8, s8) = full_cut_search(&tree, &cam, &config, 8);
        assert_eq!(c1.members, c8.members);
        assert_eq!(s1, s8);
    }

    #[test]
    fn temporal_fixed_point_and_equality() {
        let scene = generate_synthetic_scene(
            &SyntheticSpec {
                cells_x: 5,
                cells_y: 5,
                gaussians_per_cell: 24,
                ..Default::default()
            },
            7,
        )
        .unwrap();
        let mut tree = build_lod_tree(&scene, 4).unwrap();
        let p = partition_subtrees(&tree, 32).unwrap();
        tree.install_partition(p);
        let cam = camera_at(35.0);
        let config = RenderConfig::default().with_tau(6.0);
        let (full, _) = full_cut_search(&tree, &cam, &config, 2);
        // identical pose: fixed point
        let (again, stats) = temporal_cut_search(&tree, &cam, &full, &config, 2).unwrap();
        assert_eq!(again.members, full.members);
        let owning: std::collections::HashSet<_> = full
            .members
            .iter()
            .map(|&m| tree.node(m).subtree_id)
            .collect();
        assert!(stats.subtrees_searched <= owning.len() as u64 + 1);
        // perturbed pose still equals the full search
        let cam2 = camera_at(30.0);
        let (t2, _) = temporal_cut_search(&tree, &cam2, &full, &config, 4).unwrap();
        let (f2, _) = full_cut_search(&tree, &cam2, &config, 4);
        assert_eq!(t2.members, f2.members);
        assert!(validate_cut(&tree, &t2));
    }

    #[test]
    fn static_pose_temporal_visits_fewer_nodes() {
        let scene = generate_synthetic_scene(
            &SyntheticSpec {
                cells_x: 6,
                cells_y: 6,
                gaussians_per_cell: 24,
                ..Default::default()
            },
            19,
        )
        .unwrap();
        let mut tree = build_lod_tree(&scene, 4).unwrap();
        let p = partition_subtrees(&tree, 16).unwrap();
        tree.install_partition(p);
        let cam = camera_at(45.0);
        let config = RenderConfig::default().with_tau(10.0);
        let (full, full_stats) = full_cut_search(&tree, &cam, &config, 2);
        // the cut must leave some subtree untouched for skipping to matter
        let owning: std::collections::HashSet<_> = full
            .members
            .iter()
            .filter_map(|&m| tree.node(m).subtree_id)
            .collect();
        assert!(owning.len() < tree.partition.subtree_count());
        let mut prev = full;
        for _ in 0..3 {
            let (cut, stats) = temporal_cut_search(&tree, &cam, &prev, &config, 2).unwrap();
            assert_eq!(cut.members, prev.members);
            assert!(
                stats.nodes_visited < full_stats.nodes_visited,
                "temporal {} vs full {}",
                stats.nodes_visited,
                full_stats.nodes_visited
            );
            prev = cut;
        }
    }

    #[test]
    fn temporal_zoom_escalates_and_matches() {
        let scene = generate_synthetic_scene(
            &SyntheticSpec {
                cells_x: 6,
                cells_y: 6,
                gaussians_per_cell: 16,
                ..Default::default()
            },
            13,
        )
        .unwrap();
        let mut tree = build_lod_tree(&scene, 4).unwrap();
        let p = partition_subtrees(&tree, 24).unwrap();
        tree.install_partition(p);
        let config = RenderConfig::default().with_tau(8.0);
        // near view first (deep cut) ...
        let near_cam = camera_at(12.0);
        let (near_cut, _) = full_cut_search(&tree, &near_cam, &config, 2);
        // ... then zoom far out: frontier rises above the subtree roots
        let far_cam = camera_at(400.0);
        let (t, stats) = temporal_cut_search(&tree, &far_cam, &near_cut, &config, 2).unwrap();
        let (f, _) = full_cut_search(&tree, &far_cam, &config, 2);
        assert_eq!(t.members, f.members);
        assert!(stats.escalations > 0);
        assert!(stats.nodes_visited <= tree.len() as u64);
    }

    #[test]
    fn temporal_rejects_foreign_cut() {
        let t1 = build_lod_tree(&flat_gaussians(8, 2.0, 0.2), 4).unwrap();
        let t2 = build_lod_tree(&flat_gaussians(9, 2.0, 0.2), 4).unwrap();
        let cam = camera_at(10.0);
        let config = RenderConfig::default();
        let (cut, _) = full_cut_search(&t1, &cam, &config, 1);
        assert!(temporal_cut_search(&t2, &cam, &cut, &config, 1).is_err());
    }

    #[test]
    fn validate_cut_cases() {
        let tree = build_lod_tree(&flat_gaussians(8, 2.0, 0.2), 2).unwrap();
        let leaves: Vec<u32> = (0..tree.len() as u32)
            .filter(|&i| tree.node(i).is_leaf())
            .collect();
        let mk = |members: Vec<u32>| Cut {
            frame: 0,
            tree_id: tree.id,
            camera: camera_at(10.0),
            members,
        };
        assert!(validate_cut(&tree, &mk(leaves.clone())));
        assert!(validate_cut(&tree, &mk(vec![0])));
        let mut double = vec![0];
        double.push(leaves[0]);
        assert!(!validate_cut(&tree, &mk(double)));
        assert!(!validate_cut(&tree, &mk(vec![])));
    }

    #[test]
    fn three_level_visit_count() {
        // 16 leaves, branching 4 -> levels: 1 root, 4 mid, 16 leaves
        let gs = flat_gaussians(16, 4.0, 0.05);
        let tree = build_lod_tree(&gs, 4).unwrap();
        assert_eq!(tree.levels(), 3);
        let cam = camera_at(30.0);
        // tau between root size and mid size selects level 1
        let root_size = projected_size_px(&cam, &tree, 0, 64.0);
        let mid_sizes: Vec<f64> = tree
            .children(0)
            .map(|c| projected_size_px(&cam, &tree, c, 64.0))
            .collect();
        let max_mid = mid_sizes.iter().cloned().fold(0.0, f64::max);
        assert!(root_size > max_mid);
        let config = RenderConfig::default().with_tau((root_size + max_mid) / 2.0);
        let (cut, stats) = full_cut_search(&tree, &cam, &config, 1);
        let level1: Vec<u32> = tree.children(0).collect();
        assert_eq!(cut.members, level1);
        // visits root block (1 node) + the level-1 candidates (4 nodes)
        assert_eq!(stats.nodes_visited, 1 + 4);
    }
}
