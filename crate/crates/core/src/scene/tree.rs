//! Hierarchical level-of-detail tree over a flat set of Gaussians.
//!
//! Leaves are the input splats; every interior node is a moment-matched
//! merge of its children, so walking upward trades detail for coverage.
//! Nodes are stored in strict level order (root first) with contiguous
//! child runs, which lets the cut search stream whole levels in blocks.

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::math::{eigen_symmetric3, Fnv64, Mat3, Quat, Vec3};
use crate::scene::partition::SubtreePartition;

pub const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct LodNode {
    pub gaussian: Gaussian,
    pub parent: Option<u32>,
    pub first_child: Option<u32>,
    pub child_count: u32,
    pub subtree_id: Option<u32>,
    pub level: u32,
}

impl LodNode {
    pub fn is_leaf(&self) -> bool {
        self.child_count == 0
    }
}

#[derive(Debug, Clone)]
pub struct LodTree {
    /// Strict level order: level 0 (the root) first, children contiguous.
    pub nodes: Vec<LodNode>,
    /// Start index of each level plus an end sentinel; length = levels + 1.
    pub level_offsets: Vec<usize>,
    pub partition: SubtreePartition,
    /// Structural content hash; identifies the tree across cloud and client.
    pub id: u64,
}

impl LodTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn levels(&self) -> usize {
        self.level_offsets.len() - 1
    }

    pub fn root(&self) -> u32 {
        0
    }

    pub fn node(&self, ix: u32) -> &LodNode {
        &self.nodes[ix as usize]
    }

    /// Child index range of a node (empty for leaves).
    pub fn children(&self, ix: u32) -> std::ops::Range<u32> {
        let n = &self.nodes[ix as usize];
        match n.first_child {
            Some(fc) => fc..fc + n.child_count,
            None => 0..0,
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Installs a partition and stamps per-node subtree ids.
    pub fn install_partition(&mut self, partition: SubtreePartition) {
        for n in &mut self.nodes {
            n.subtree_id = None;
        }
        for (sid, st) in partition.subtrees.iter().enumerate() {
            for &(lo, hi) in &st.ranges {
                for ix in lo..hi {
                    self.nodes[ix as usize].subtree_id = Some(sid as u32);
                }
            }
        }
        self.partition = partition;
    }

    pub fn content_hash(nodes: &[LodNode]) -> u64 {
        let mut h = Fnv64::default();
        h.write_u64(nodes.len() as u64);
        for n in nodes {
            h.write_u64(n.gaussian.id as u64);
            h.write_u64(n.parent.map_or(NO_NODE, |p| p) as u64);
            h.write_u64(n.level as u64);
            h.write_f64(n.gaussian.position.x);
            h.write_f64(n.gaussian.position.y);
            h.write_f64(n.gaussian.position.z);
            h.write_f64(n.gaussian.scale.max_elem());
        }
        h.finish()
    }

    /// Checks the structural invariants: single root, parent-before-child,
    /// strictly increasing level offsets, contiguous children, level links.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::contract("tree: empty"));
        }
        if self.level_offsets.first() != Some(&0)
            || self.level_offsets.last() != Some(&self.nodes.len())
        {
            return Err(Error::contract("tree: bad level offset bounds"));
        }
        if !self.level_offsets.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::contract("tree: level offsets not increasing"));
        }
        let mut roots = 0usize;
        for (ix, n) in self.nodes.iter().enumerate() {
            let lo = self.level_offsets[n.level as usize];
            let hi = self.level_offsets[n.level as usize + 1];
            if !(lo..hi).contains(&ix) {
                return Err(Error::contract(format!("tree: node {ix} outside level")));
            }
            match n.parent {
                None => roots += 1,
                Some(p) => {
                    if p as usize >= ix {
                        return Err(Error::contract(format!(
                            "tree: node {ix} has parent {p} >= itself"
                        )));
                    }
                    if self.nodes[p as usize].level + 1 != n.level {
                        return Err(Error::contract(format!("tree: node {ix} level mismatch")));
                    }
                }
            }
            for c in self.children(ix as u32) {
                if self.nodes[c as usize].parent != Some(ix as u32) {
                    return Err(Error::contract(format!(
                        "tree: child {c} does not point back to {ix}"
                    )));
                }
            }
        }
        if roots != 1 {
            return Err(Error::contract(format!("tree: {roots} roots")));
        }
        Ok(())
    }
}

/// Weighted moment-matched merge of a set of Gaussians. The merged
/// covariance is the weighted mixture covariance, re-decomposed to
/// scale + rotation; opacity and SH are weighted means.
pub fn merge_gaussians(children: &[&Gaussian]) -> Gaussian {
    assert!(!children.is_empty());
    let mut weights: Vec<f64> = children.iter().map(|g| g.opacity * g.volume()).collect();
    let mut total: f64 = weights.iter().sum();
    if total <= 0.0 {
        weights.iter_mut().for_each(|w| *w = 1.0);
        total = weights.len() as f64;
    }

    let mut mean = Vec3::ZERO;
    for (g, w) in children.iter().zip(&weights) {
        mean += g.position * (*w / total);
    }

    let mut cov = Mat3 { m: [[0.0; 3]; 3] };
    for (g, w) in children.iter().zip(&weights) {
        let c = g.covariance();
        let d = g.position;
        let f = *w / total;
        for i in 0..3 {
            for j in 0..3 {
                cov.m[i][j] += f * (c.m[i][j] + d.to_array()[i] * d.to_array()[j]);
            }
        }
    }
    let m = mean.to_array();
    for i in 0..3 {
        for j in 0..3 {
            cov.m[i][j] -= m[i] * m[j];
        }
    }

    let (eigvals, eigvecs) = eigen_symmetric3(&cov);
    let mut scale = Vec3::new(
        eigvals.x.max(1e-12).sqrt(),
        eigvals.y.max(1e-12).sqrt(),
        eigvals.z.max(1e-12).sqrt(),
    );
    let mut basis = eigvecs;
    if basis.det() < 0.0 {
        for i in 0..3 {
            basis.m[i][2] = -basis.m[i][2];
        }
    }
    let rotation = Quat::from_mat3(&basis);

    // Bounding-sphere containment: the parent extent must reach past every
    // child's extent from the parent center, so coarser levels never shrink.
    let mut required = 0.0f64;
    for g in children {
        let r = (g.position - mean).norm();
        required = required.max(g.extent() + r);
    }
    let current = 3.0 * scale.max_elem();
    if current < required {
        scale = scale * (required / current);
    }

    let mut opacity = 0.0;
    for (g, w) in children.iter().zip(&weights) {
        opacity += g.opacity * (*w / total);
    }
    let sh_len = children.iter().map(|g| g.sh.len()).max().unwrap();
    let mut sh = vec![[0.0f64; 3]; sh_len];
    for (g, w) in children.iter().zip(&weights) {
        let f = *w / total;
        for (k, coeff) in g.sh.iter().enumerate() {
            for c in 0..3 {
                sh[k][c] += f * coeff[c];
            }
        }
    }

    Gaussian {
        id: 0, // assigned by the layout
        position: mean,
        scale,
        rotation,
        opacity: opacity.clamp(0.0, 1.0),
        sh,
    }
}

/// Recursive median split along the widest axis until groups are at most
/// `branching` elements. Deterministic for a fixed input order.
fn cluster_indices(items: &mut [(usize, Vec3)], branching: usize, out: &mut Vec<Vec<usize>>) {
    if items.len() <= branching {
        out.push(items.iter().map(|(i, _)| *i).collect());
        return;
    }
    let mut lo = items[0].1;
    let mut hi = items[0].1;
    for (_, p) in items.iter() {
        lo = lo.min(*p);
        hi = hi.max(*p);
    }
    let span = hi - lo;
    let axis = if span.x >= span.y && span.x >= span.z {
        0
    } else if span.y >= span.z {
        1
    } else {
        2
    };
    items.sort_by(|a, b| {
        let ka = a.1.to_array()[axis];
        let kb = b.1.to_array()[axis];
        ka.partial_cmp(&kb).unwrap().then(a.0.cmp(&b.0))
    });
    let mid = items.len() / 2;
    let (left, right) = items.split_at_mut(mid);
    cluster_indices(left, branching, out);
    cluster_indices(right, branching, out);
}

/// Builds a LoD tree bottom-up: leaves are the input Gaussians in order,
/// each spatial cluster of at most `branching` nodes gets one merged
/// parent, repeated until a single root remains. Node ids are rewritten to
/// equal their level-order index so streams and tables can share one key.
pub fn build_lod_tree(gaussians: &[Gaussian], branching: usize) -> Result<LodTree> {
    if gaussians.is_empty() {
        return Err(Error::contract("build_lod_tree: no gaussians"));
    }
    if branching < 2 {
        return Err(Error::contract("build_lod_tree: branching must be >= 2"));
    }
    for (i, g) in gaussians.iter().enumerate() {
        g.validate()
            .map_err(|e| Error::data(i, format!("invalid gaussian: {e}")))?;
    }

    // levels_rev[0] = leaves, last = root level
    struct TmpNode {
        gaussian: Gaussian,
        children: Vec<usize>, // indices into the level below
    }
    let mut levels_rev: Vec<Vec<TmpNode>> = Vec::new();
    levels_rev.push(
        gaussians
            .iter()
            .map(|g| TmpNode {
                gaussian: g.clone(),
                children: Vec::new(),
            })
            .collect(),
    );

    while levels_rev.last().unwrap().len() > 1 {
        let below = levels_rev.last().unwrap();
        let mut items: Vec<(usize, Vec3)> = below
            .iter()
            .enumerate()
            .map(|(i, n)| (i, n.gaussian.position))
            .collect();
        let mut groups = Vec::new();
        cluster_indices(&mut items, branching, &mut groups);
        // keep group order stable by first member
        groups.sort_by_key(|g| g[0]);
        let mut parents = Vec::with_capacity(groups.len());
        for group in groups {
            let refs: Vec<&Gaussian> = group.iter().map(|&i| &below[i].gaussian).collect();
            parents.push(TmpNode {
                gaussian: merge_gaussians(&refs),
                children: group,
            });
        }
        levels_rev.push(parents);
    }

    // Reorder each level so children of consecutive parents are contiguous,
    // then emit level-order nodes top-down.
    let depth = levels_rev.len();
    let mut nodes: Vec<LodNode> = Vec::with_capacity(gaussians.len() * 2);
    let mut level_offsets = vec![0usize];
    // order[l] = permutation of levels_rev[l] in emission order
    let mut order: Vec<Vec<usize>> = vec![Vec::new(); depth];
    order[depth - 1] = vec![0];
    for l in (1..depth).rev() {
        let mut child_order = Vec::new();
        for &pi in &order[l] {
            child_order.extend(levels_rev[l][pi].children.iter().copied());
        }
        order[l - 1] = child_order;
    }

    // position of each (level, local index) in the final array
    let mut slot: Vec<Vec<u32>> = levels_rev.iter().map(|lv| vec![0u32; lv.len()]).collect();
    let mut next = 0u32;
    for l in (0..depth).rev() {
        for &i in &order[l] {
            slot[l][i] = next;
            next += 1;
        }
        level_offsets.push(next as usize);
    }

    for l in (0..depth).rev() {
        for &i in &order[l] {
            let tmp = &levels_rev[l][i];
            let mut g = tmp.gaussian.clone();
            g.id = slot[l][i];
            nodes.push(LodNode {
                gaussian: g,
                parent: None,
                first_child: if tmp.children.is_empty() {
                    None
                } else {
                    Some(slot[l - 1][tmp.children[0]])
                },
                child_count: tmp.children.len() as u32,
                subtree_id: None,
                level: (depth - 1 - l) as u32,
            });
        }
    }
    // fix parent links from child links
    let mut parents = vec![None; nodes.len()];
    for (ix, n) in nodes.iter().enumerate() {
        if let Some(fc) = n.first_child {
            for c in fc..fc + n.child_count {
                parents[c as usize] = Some(ix as u32);
            }
        }
    }
    for (n, p) in nodes.iter_mut().zip(parents) {
        n.parent = p;
    }

    let id = LodTree::content_hash(&nodes);
    let tree = LodTree {
        partition: SubtreePartition::unpartitioned(nodes.len()),
        nodes,
        level_offsets,
        id,
    };
    tree.validate()?;
    Ok(tree)
}

/// Re-indexes an arbitrary valid tree into strict level order: nodes sorted
/// by (level, parent order), children contiguous, all links rewritten.
/// Detects parent-pointer cycles.
pub fn level_order_layout(mut nodes: Vec<LodNode>) -> Result<LodTree> {
    if nodes.is_empty() {
        return Err(Error::contract("layout: empty node list"));
    }
    let n = nodes.len();
    let mut roots = Vec::new();
    for (i, node) in nodes.iter().enumerate() {
        match node.parent {
            None => roots.push(i),
            Some(p) if (p as usize) < n => {}
            Some(p) => return Err(Error::data(i, format!("parent {p} out of bounds"))),
        }
    }
    if roots.len() != 1 {
        return Err(Error::data(0, format!("{} roots, expected 1", roots.len())));
    }

    // children from parent pointers, in old-index order
    let mut children: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, node) in nodes.iter().enumerate() {
        if let Some(p) = node.parent {
            children[p as usize].push(i as u32);
        }
    }

    // BFS; a cycle leaves nodes unvisited
    let mut order: Vec<u32> = Vec::with_capacity(n);
    let mut level_of = vec![0u32; n];
    let mut level_offsets = vec![0usize];
    let mut frontier = vec![roots[0] as u32];
    while !frontier.is_empty() {
        order.extend(frontier.iter().copied());
        level_offsets.push(order.len());
        let mut next = Vec::new();
        for &ix in &frontier {
            for &c in &children[ix as usize] {
                level_of[c as usize] = level_of[ix as usize] + 1;
                next.push(c);
            }
        }
        frontier = next;
    }
    if order.len() != n {
        return Err(Error::data(
            order.len(),
            "cycle detected: unreachable nodes remain",
        ));
    }

    let mut new_index = vec![0u32; n];
    for (new, &old) in order.iter().enumerate() {
        new_index[old as usize] = new as u32;
    }

    let mut out: Vec<LodNode> = Vec::with_capacity(n);
    for &old in &order {
        let node = &mut nodes[old as usize];
        let kids = &children[old as usize];
        let mut g = node.gaussian.clone();
        g.id = new_index[old as usize];
        out.push(LodNode {
            gaussian: g,
            parent: node.parent.map(|p| new_index[p as usize]),
            first_child: kids.first().map(|&c| new_index[c as usize]),
            child_count: kids.len() as u32,
            subtree_id: node.subtree_id,
            level: level_of[old as usize],
        });
    }

    let id = LodTree::content_hash(&out);
    let tree = LodTree {
        partition: SubtreePartition::unpartitioned(out.len()),
        nodes: out,
        level_offsets,
        id,
    };
    tree.validate()?;
    Ok(tree)
}
