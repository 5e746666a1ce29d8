//! Cloud-client collaboration: the cloud tracks what the client holds in a
//! management table keyed by reuse windows; each LoD round ships only the
//! cut members the client is missing (the delta cut), and both sides run
//! the same aging/eviction rule so their views never diverge.

mod channel;
mod session;
mod wire;

pub use channel::{
    bandwidth_report, BandwidthReport, ChannelModel, DeliveryRecord, DEFAULT_ENERGY_PER_BYTE,
    DEFAULT_LATENCY_S, DEFAULT_RATE_BPS,
};
pub use session::{ClientSession, CloudSession, RoundStats};
pub use wire::{SimLink, StreamTransport, Transport, WireMessage, PROTOCOL_VERSION};

use std::collections::BTreeMap;

use crate::camera::Camera;
use crate::config::RenderConfig;
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::search::{projected_size_px_free, Cut};

/// Default reuse threshold (frames) and LoD frame interval.
pub const DEFAULT_REUSE_THRESHOLD: u32 = 32;
pub const DEFAULT_FRAME_INTERVAL: u32 = 4;

/// Cloud-side mirror of the client's resident set. Each key carries a reuse
/// window: frames since the id last appeared in a cut.
#[derive(Debug, Clone)]
pub struct ManagementTable {
    entries: BTreeMap<u32, u32>,
    pub round: u64,
    pub reuse_threshold: u32,
    pub frame_interval: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeltaPlan {
    /// Cut members the client does not hold yet, ascending.
    pub delta: Vec<u32>,
    /// Ids whose reuse window ran out this round, ascending.
    pub evictions: Vec<u32>,
}

impl ManagementTable {
    pub fn new(reuse_threshold: u32, frame_interval: u32) -> Self {
        ManagementTable {
            entries: BTreeMap::new(),
            round: 0,
            reuse_threshold,
            frame_interval,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.keys().copied()
    }

    pub fn reuse_window(&self, id: u32) -> Option<u32> {
        self.entries.get(&id).copied()
    }

    /// One LoD round: resets windows of cut members (inserting new ones),
    /// ages everything else by the frame interval, evicts expired ids.
    pub fn cloud_update(&mut self, new_cut: &Cut) -> DeltaPlan {
        let mut plan = DeltaPlan::default();
        for &id in &new_cut.members {
            if !self.entries.contains_key(&id) {
                plan.delta.push(id);
            }
        }
        let member: std::collections::BTreeSet<u32> = new_cut.members.iter().copied().collect();
        for (&id, w) in self.entries.iter_mut() {
            if member.contains(&id) {
                *w = 0;
            } else {
                *w += self.frame_interval;
            }
        }
        for &id in &plan.delta {
            self.entries.insert(id, 0);
        }
        let threshold = self.reuse_threshold;
        plan.evictions = self
            .entries
            .iter()
            .filter(|(_, &w)| w > threshold)
            .map(|(&id, _)| id)
            .collect();
        for id in &plan.evictions {
            self.entries.remove(id);
        }
        self.round += 1;
        plan
    }
}

#[derive(Debug, Clone)]
pub struct ClientNode {
    pub gaussian: Gaussian,
    pub parent: Option<u32>,
}

/// Client-side resident subgraph: decoded Gaussians with parent pointers
/// plus the same reuse bookkeeping the cloud runs.
#[derive(Debug, Clone)]
pub struct ClientSubgraph {
    nodes: BTreeMap<u32, ClientNode>,
    windows: BTreeMap<u32, u32>,
    pub reuse_threshold: u32,
    pub frame_interval: u32,
    pub duplicate_inserts: u64,
    pub round: u64,
}

impl ClientSubgraph {
    pub fn new(reuse_threshold: u32, frame_interval: u32) -> Self {
        ClientSubgraph {
            nodes: BTreeMap::new(),
            windows: BTreeMap::new(),
            reuse_threshold,
            frame_interval,
            duplicate_inserts: 0,
            round: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes.keys().copied()
    }

    pub fn node(&self, id: u32) -> Option<&ClientNode> {
        self.nodes.get(&id)
    }

    pub fn gaussian(&self, id: u32) -> Option<&Gaussian> {
        self.nodes.get(&id).map(|n| &n.gaussian)
    }

    /// Applies one round: inserts decoded delta records, then runs the
    /// cloud's aging/eviction rule against the round's full cut membership.
    pub fn client_apply(
        &mut self,
        decoded: Vec<(Gaussian, Option<u32>)>,
        full_cut: &[u32],
    ) -> Result<()> {
        for (g, parent) in decoded {
            let id = g.id;
            if self
                .nodes
                .insert(
                    id,
                    ClientNode {
                        gaussian: g,
                        parent,
                    },
                )
                .is_some()
            {
                self.duplicate_inserts += 1;
            }
            self.windows.entry(id).or_insert(0);
        }
        let member: std::collections::BTreeSet<u32> = full_cut.iter().copied().collect();
        for &id in full_cut {
            if !self.nodes.contains_key(&id) {
                return Err(Error::protocol(
                    0,
                    format!("full cut references id {id} the client does not hold"),
                ));
            }
        }
        for (&id, w) in self.windows.iter_mut() {
            if member.contains(&id) {
                *w = 0;
            } else {
                *w += self.frame_interval;
            }
        }
        let threshold = self.reuse_threshold;
        let evict: Vec<u32> = self
            .windows
            .iter()
            .filter(|(_, &w)| w > threshold)
            .map(|(&id, _)| id)
            .collect();
        for id in evict {
            self.windows.remove(&id);
            self.nodes.remove(&id);
        }
        self.round += 1;
        Ok(())
    }

    /// Local mirror of the cut predicate, evaluated at the client's current
    /// (possibly drifted) pose. An absent parent counts as coarser than
    /// tau*, so orphans stay renderable.
    pub fn client_select_queue(&self, camera: &Camera, config: &RenderConfig) -> Vec<u32> {
        let mut queue = Vec::new();
        for (&id, node) in &self.nodes {
            let size = projected_size_px_free(camera, &node.gaussian, config.lod_margin_px);
            if size > config.tau_star {
                continue;
            }
            let parent_coarser = match node.parent.and_then(|p| self.nodes.get(&p)) {
                None => true,
                Some(p) => {
                    projected_size_px_free(camera, &p.gaussian, config.lod_margin_px)
                        > config.tau_star
                }
            };
            if parent_coarser {
                queue.push(id);
            }
        }
        queue
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Quat, Vec3};

    fn cut_of(members: Vec<u32>) -> Cut {
        Cut {
            frame: 0,
            tree_id: 0,
            camera: test_camera(),
            members,
        }
    }

    fn test_camera() -> Camera {
        Camera::look_at(
            Vec3::new(0.0, 0.0, -10.0),
            Vec3::ZERO,
            128.0,
            64,
            64,
            0.5,
            100.0,
        )
        .unwrap()
    }

    fn g(id: u32, pos: Vec3, scale: f64) -> Gaussian {
        Gaussian {
            id,
            position: pos,
            scale: Vec3::splat(scale),
            rotation: Quat::IDENTITY,
            opacity: 0.8,
            sh: vec![[0.0; 3]],
        }
    }

    #[test]
    fn delta_is_set_difference() {
        let mut table = ManagementTable::new(32, 4);
        table.cloud_update(&cut_of(vec![1, 2, 3]));
        let plan = table.cloud_update(&cut_of(vec![2, 3, 4]));
        assert_eq!(plan.delta, vec![4]);
        assert!(plan.evictions.is_empty());
        assert_eq!(table.reuse_window(1), Some(4));
        assert_eq!(table.reuse_window(2), Some(0));
    }

    #[test]
    fn eviction_at_threshold() {
        let mut table = ManagementTable::new(32, 4);
        table.cloud_update(&cut_of(vec![1, 2]));
        // age id 1 to w_r = 32: still resident (32 <= 32)
        for _ in 0..8 {
            let plan = table.cloud_update(&cut_of(vec![2]));
            assert!(plan.evictions.is_empty());
        }
        assert_eq!(table.reuse_window(1), Some(32));
        // one more round: 36 > 32 -> evicted
        let plan = table.cloud_update(&cut_of(vec![2]));
        assert_eq!(plan.evictions, vec![1]);
        assert!(!table.contains(1));
    }

    #[test]
    fn steady_state_sends_nothing() {
        let mut table = ManagementTable::new(32, 4);
        table.cloud_update(&cut_of(vec![5, 6, 7]));
        for _ in 0..20 {
            let plan = table.cloud_update(&cut_of(vec![5, 6, 7]));
            assert!(plan.delta.is_empty());
            assert!(plan.evictions.is_empty());
        }
    }

    #[test]
    fn client_mirrors_cloud() {
        let mut table = ManagementTable::new(8, 4);
        let mut client = ClientSubgraph::new(8, 4);
        let scene: Vec<Gaussian> = (0..20)
            .map(|i| g(i, Vec3::new(i as f64, 0.0, 0.0), 0.2))
            .collect();
        // rounds with a sliding membership window
        for round in 0..12u32 {
            let members: Vec<u32> = (round..round + 8).map(|i| i % 20).collect();
            let mut sorted = members.clone();
            sorted.sort_unstable();
            sorted.dedup();
            let plan = table.cloud_update(&cut_of(sorted.clone()));
            let decoded: Vec<(Gaussian, Option<u32>)> = plan
                .delta
                .iter()
                .map(|&id| (scene[id as usize].clone(), None))
                .collect();
            client.client_apply(decoded, &sorted).unwrap();
            let cloud_ids: Vec<u32> = table.ids().collect();
            let client_ids: Vec<u32> = client.ids().collect();
            assert_eq!(cloud_ids, client_ids, "diverged at round {round}");
        }
    }

    #[test]
    fn orphan_children_stay_renderable() {
        let mut client = ClientSubgraph::new(4, 4);
        // parent 0 (big), child 1 (small) near origin
        let parent = g(0, Vec3::ZERO, 5.0);
        let child = g(1, Vec3::new(0.5, 0.0, 0.0), 0.05);
        client
            .client_apply(vec![(parent, None), (child, Some(0))], &[1])
            .unwrap();
        // age parent out: rounds where only 1 is in the cut
        for _ in 0..2 {
            client.client_apply(vec![], &[1]).unwrap();
        }
        assert!(!client.contains(0), "parent should be evicted");
        assert!(client.contains(1));
        let cam = test_camera();
        let config = RenderConfig::default().with_tau(1e9);
        let queue = client.client_select_queue(&cam, &config);
        assert_eq!(queue, vec![1], "orphan treated as parent-coarser");
    }

    #[test]
    fn queue_excludes_fine_parent_child_pairs() {
        let mut client = ClientSubgraph::new(32, 4);
        let parent = g(0, Vec3::ZERO, 0.3);
        let child = g(1, Vec3::new(0.1, 0.0, 0.0), 0.1);
        client
            .client_apply(
                vec![(parent.clone(), None), (child.clone(), Some(0))],
                &[0, 1],
            )
            .unwrap();
        let cam = test_camera();
        // both below tau: exactly the parent (its own parent is absent)
        let config = RenderConfig::default().with_tau(1e9);
        assert_eq!(client.client_select_queue(&cam, &config), vec![0]);
        // tau between child and parent size: exactly the child
        let p_size = projected_size_px_free(&cam, &parent, 64.0);
        let c_size = projected_size_px_free(&cam, &child, 64.0);
        let config = RenderConfig::default().with_tau((p_size + c_size) / 2.0);
        assert_eq!(client.client_select_queue(&cam, &config), vec![1]);
    }
}
