//! Offline subtree partitioning for the temporal cut search.
//!
//! Greedy bottom-up sealing: walking nodes deepest-first, once the pending
//! (not yet sealed) region under a node reaches `target_size` it is sealed
//! as one subtree; oversized regions first shed their largest child region.
//! Every subtree is a connected region rooted at a single node, sizes never
//! exceed 2x the target, and whatever remains unsealed above all subtree
//! roots is the top tree.

use crate::error::{Error, Result};
use crate::scene::tree::LodTree;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtreeInfo {
    /// Level-order index of the subtree root.
    pub root: u32,
    /// Half-open member index ranges, ascending and disjoint.
    pub ranges: Vec<(u32, u32)>,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtreePartition {
    pub target_size: u32,
    pub subtrees: Vec<SubtreeInfo>,
    /// Nodes above all subtree roots, ascending.
    pub top_tree: Vec<u32>,
}

impl SubtreePartition {
    pub fn subtree_count(&self) -> usize {
        self.subtrees.len()
    }

    /// The trivial partition: no subtrees, everything in the top tree.
    pub fn unpartitioned(node_count: usize) -> SubtreePartition {
        SubtreePartition {
            target_size: 0,
            subtrees: Vec::new(),
            top_tree: (0..node_count as u32).collect(),
        }
    }

    pub fn total_members(&self) -> usize {
        self.subtrees.iter().map(|s| s.size as usize).sum::<usize>() + self.top_tree.len()
    }
}

/// Partitions the tree into balanced connected subtrees of at most
/// `2 * target_size` nodes plus a top tree.
pub fn partition_subtrees(tree: &LodTree, target_size: u32) -> Result<SubtreePartition> {
    if target_size == 0 {
        return Err(Error::contract("partition: target_size must be >= 1"));
    }
    let n = tree.len();
    // assignment per node; NONE = unsealed
    let mut owner: Vec<Option<u32>> = vec![None; n];
    let mut pending: Vec<u32> = vec![0; n];
    let mut subtree_roots: Vec<u32> = Vec::new();

    // Collects the unsealed region rooted at `root` and seals it.
    let seal = |root: u32,
                owner: &mut Vec<Option<u32>>,
                pending: &mut Vec<u32>,
                subtree_roots: &mut Vec<u32>,
                tree: &LodTree| {
        let sid = subtree_roots.len() as u32;
        subtree_roots.push(root);
        let mut stack = vec![root];
        while let Some(ix) = stack.pop() {
            owner[ix as usize] = Some(sid);
            pending[ix as usize] = 0;
            for c in tree.children(ix) {
                if owner[c as usize].is_none() {
                    stack.push(c);
                }
            }
        }
    };

    for ix in (0..n as u32).rev() {
        let mut size = 1u32;
        for c in tree.children(ix) {
            size += pending[c as usize];
        }
        if size >= target_size {
            // shed largest unsealed child regions until within 2x target
            while size > 2 * target_size {
                let mut best: Option<(u32, u32)> = None; // (pending, child)
                for c in tree.children(ix) {
                    if owner[c as usize].is_none() && pending[c as usize] > 0 {
                        let p = pending[c as usize];
                        if best.is_none_or(|(bp, bc)| p > bp || (p == bp && c < bc)) {
                            best = Some((p, c));
                        }
                    }
                }
                let (p, c) = best.expect("oversized region must have unsealed children");
                seal(c, &mut owner, &mut pending, &mut subtree_roots, tree);
                size -= p;
            }
            seal(ix, &mut owner, &mut pending, &mut subtree_roots, tree);
        } else {
            pending[ix as usize] = size;
        }
    }

    // renumber subtrees by ascending root index for a canonical result
    let mut order: Vec<u32> = (0..subtree_roots.len() as u32).collect();
    order.sort_by_key(|&sid| subtree_roots[sid as usize]);
    let mut renumber = vec![0u32; subtree_roots.len()];
    for (new, &old) in order.iter().enumerate() {
        renumber[old as usize] = new as u32;
    }

    let mut subtrees: Vec<SubtreeInfo> = order
        .iter()
        .map(|&old| SubtreeInfo {
            root: subtree_roots[old as usize],
            ranges: Vec::new(),
            size: 0,
        })
        .collect();
    let mut top_tree = Vec::new();
    let mut run: Option<(u32, u32, u32)> = None; // (sid, start, end)
    for ix in 0..n as u32 {
        match owner[ix as usize].map(|sid| renumber[sid as usize]) {
            None => {
                top_tree.push(ix);
                if let Some((sid, lo, hi)) = run.take() {
                    subtrees[sid as usize].ranges.push((lo, hi));
                }
            }
            Some(sid) => match run {
                Some((rsid, lo, hi)) if rsid == sid && hi == ix => run = Some((sid, lo, ix + 1)),
                Some((rsid, lo, hi)) => {
                    subtrees[rsid as usize].ranges.push((lo, hi));
                    run = Some((sid, ix, ix + 1));
                }
                None => run = Some((sid, ix, ix + 1)),
            },
        }
    }
    if let Some((sid, lo, hi)) = run {
        subtrees[sid as usize].ranges.push((lo, hi));
    }
    for st in &mut subtrees {
        st.size = st.ranges.iter().map(|(lo, hi)| hi - lo).sum();
    }

    let partition = SubtreePartition {
        target_size,
        subtrees,
        top_tree,
    };
    debug_assert_eq!(partition.total_members(), n);
    Ok(partition)
}
