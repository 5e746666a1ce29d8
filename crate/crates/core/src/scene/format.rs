//! Versioned binary tree file ("NLOD"): header, level offsets, fixed-width
//! node records in level order, then the subtree partition. Fixed-width
//! records allow O(1) slicing of any level block during streaming traversal.
//! The byte layout is documented in docs/formats.md.

use std::fs;
use std::path::Path;

use crate::bytes::{Reader, WriteLe};
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::math::{Quat, Vec3};
use crate::scene::partition::{SubtreeInfo, SubtreePartition};
use crate::scene::tree::{LodNode, LodTree, NO_NODE};

pub const NLOD_MAGIC: &[u8; 4] = b"NLOD";
pub const NLOD_VERSION: u32 = 1;

pub fn save_tree(path: &Path, tree: &LodTree) -> Result<()> {
    fs::write(path, encode_tree(tree))?;
    Ok(())
}

pub fn load_tree(path: &Path) -> Result<LodTree> {
    let bytes = fs::read(path)?;
    decode_tree(&bytes)
}

pub fn encode_tree(tree: &LodTree) -> Vec<u8> {
    let sh_len = tree.nodes[0].gaussian.sh.len();
    let mut out = Vec::new();
    out.extend_from_slice(NLOD_MAGIC);
    out.put_u32(NLOD_VERSION);
    out.put_u64(tree.nodes.len() as u64);
    out.put_u8(match sh_len {
        1 => 0,
        4 => 1,
        9 => 2,
        _ => 3,
    });
    out.put_u32(tree.levels() as u32);
    for &off in &tree.level_offsets {
        out.put_u64(off as u64);
    }
    for n in &tree.nodes {
        out.put_u32(n.gaussian.id);
        out.put_u32(n.parent.unwrap_or(NO_NODE));
        out.put_u32(n.first_child.unwrap_or(NO_NODE));
        out.put_u32(n.child_count);
        out.put_u32(n.subtree_id.unwrap_or(NO_NODE));
        out.put_u32(n.level);
        for v in n.gaussian.position.to_array() {
            out.put_f64(v);
        }
        for v in n.gaussian.scale.to_array() {
            out.put_f64(v);
        }
        for v in [
            n.gaussian.rotation.w,
            n.gaussian.rotation.x,
            n.gaussian.rotation.y,
            n.gaussian.rotation.z,
        ] {
            out.put_f64(v);
        }
        out.put_f64(n.gaussian.opacity);
        for coeff in &n.gaussian.sh {
            for &v in coeff {
                out.put_f64(v);
            }
        }
    }
    // partition block
    out.put_u32(tree.partition.target_size);
    out.put_u32(tree.partition.subtrees.len() as u32);
    for st in &tree.partition.subtrees {
        out.put_u32(st.root);
        out.put_u32(st.size);
        out.put_u32(st.ranges.len() as u32);
        for &(lo, hi) in &st.ranges {
            out.put_u32(lo);
            out.put_u32(hi);
        }
    }
    out.put_u32(tree.partition.top_tree.len() as u32);
    for &ix in &tree.partition.top_tree {
        out.put_u32(ix);
    }
    out
}

pub fn decode_tree(bytes: &[u8]) -> Result<LodTree> {
    let mut r = Reader::new(bytes);
    let magic = r
        .take(4)
        .map_err(|_| Error::format("nlod: truncated magic"))?;
    if magic != NLOD_MAGIC {
        return Err(Error::format("nlod: bad magic"));
    }
    let version = r.u32().map_err(to_format)?;
    if version != NLOD_VERSION {
        return Err(Error::format(format!(
            "nlod: unsupported version {version}"
        )));
    }
    let count = r.u64().map_err(to_format)? as usize;
    let sh_degree = r.u8().map_err(to_format)?;
    if sh_degree > 3 {
        return Err(Error::format("nlod: bad sh degree"));
    }
    let sh_len = (sh_degree as usize + 1) * (sh_degree as usize + 1);
    let levels = r.u32().map_err(to_format)? as usize;
    let mut level_offsets = Vec::with_capacity(levels + 1);
    for _ in 0..=levels {
        level_offsets.push(r.u64().map_err(to_format)? as usize);
    }
    let mut nodes = Vec::with_capacity(count);
    for _ in 0..count {
        let id = r.u32().map_err(to_format)?;
        let parent = opt(r.u32().map_err(to_format)?);
        let first_child = opt(r.u32().map_err(to_format)?);
        let child_count = r.u32().map_err(to_format)?;
        let subtree_id = opt(r.u32().map_err(to_format)?);
        let level = r.u32().map_err(to_format)?;
        let position = Vec3::new(
            r.f64().map_err(to_format)?,
            r.f64().map_err(to_format)?,
            r.f64().map_err(to_format)?,
        );
        let scale = Vec3::new(
            r.f64().map_err(to_format)?,
            r.f64().map_err(to_format)?,
            r.f64().map_err(to_format)?,
        );
        let rotation = Quat::new(
            r.f64().map_err(to_format)?,
            r.f64().map_err(to_format)?,
            r.f64().map_err(to_format)?,
            r.f64().map_err(to_format)?,
        );
        let opacity = r.f64().map_err(to_format)?;
        let mut sh = Vec::with_capacity(sh_len);
        for _ in 0..sh_len {
            sh.push([
                r.f64().map_err(to_format)?,
                r.f64().map_err(to_format)?,
                r.f64().map_err(to_format)?,
            ]);
        }
        nodes.push(LodNode {
            gaussian: Gaussian {
                id,
                position,
                scale,
                rotation,
                opacity,
                sh,
            },
            parent,
            first_child,
            child_count,
            subtree_id,
            level,
        });
    }
    let target_size = r.u32().map_err(to_format)?;
    let subtree_count = r.u32().map_err(to_format)? as usize;
    let mut subtrees = Vec::with_capacity(subtree_count);
    for _ in 0..subtree_count {
        let root = r.u32().map_err(to_format)?;
        let size = r.u32().map_err(to_format)?;
        let range_count = r.u32().map_err(to_format)? as usize;
        let mut ranges = Vec::with_capacity(range_count);
        for _ in 0..range_count {
            let lo = r.u32().map_err(to_format)?;
            let hi = r.u32().map_err(to_format)?;
            ranges.push((lo, hi));
        }
        subtrees.push(SubtreeInfo { root, ranges, size });
    }
    let top_count = r.u32().map_err(to_format)? as usize;
    let mut top_tree = Vec::with_capacity(top_count);
    for _ in 0..top_count {
        top_tree.push(r.u32().map_err(to_format)?);
    }

    let id = LodTree::content_hash(&nodes);
    let tree = LodTree {
        nodes,
        level_offsets,
        partition: SubtreePartition {
            target_size,
            subtrees,
            top_tree,
        },
        id,
    };
    tree.validate()?;
    Ok(tree)
}

fn opt(v: u32) -> Option<u32> {
    if v == NO_NODE {
        None
    } else {
        Some(v)
    }
}

fn to_format(e: Error) -> Error {
    Error::format(format!("nlod: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::partition::partition_subtrees;
    use crate::scene::tree::build_lod_tree;
    use crate::scene::{generate_synthetic_scene, SyntheticSpec};

    fn sample_tree() -> LodTree {
        let scene = generate_synthetic_scene(
            &SyntheticSpec {
                cells_x: 3,
                cells_y: 3,
                cell_size: 4.0,
                gaussians_per_cell: 6,
                sh_degree: 1,
                base_scale: 0.2,
                color_noise: 0.3,
            },
            9,
        )
        .unwrap();
        let mut tree = build_lod_tree(&scene, 4).unwrap();
        let p = partition_subtrees(&tree, 8).unwrap();
        tree.install_partition(p);
        tree
    }

    #[test]
    fn roundtrip_bit_equal() {
        let tree = sample_tree();
        let bytes = encode_tree(&tree);
        let back = decode_tree(&bytes).unwrap();
        assert_eq!(back.nodes.len(), tree.nodes.len());
        assert_eq!(back.level_offsets, tree.level_offsets);
        assert_eq!(back.partition, tree.partition);
        assert_eq!(back.id, tree.id);
        for (a, b) in back.nodes.iter().zip(&tree.nodes) {
            assert_eq!(a, b); // bit-equal via f64 PartialEq on every field
        }
        // and re-encoding is byte-identical
        assert_eq!(encode_tree(&back), bytes);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let tree = sample_tree();
        let mut bytes = encode_tree(&tree);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_tree(&bad), Err(Error::Format(_))));
        bytes.truncate(bytes.len() / 2);
        assert!(matches!(decode_tree(&bytes), Err(Error::Format(_))));
    }
}
