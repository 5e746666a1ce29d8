//! Cloud and client session state machines. Both sides are plain structs
//! driven by whoever owns the transport (the replay loop, the socket
//! server, or a test), so one thread can deterministically run a whole
//! co-simulation.

use crate::camera::Camera;
use crate::codec::{decode_payload, encode_payload, Codebook, QuantParams};
use crate::config::RenderConfig;
use crate::error::{Error, Result};
use crate::scene::LodTree;
use crate::search::{full_cut_search, temporal_cut_search, Cut, SearchStats};
use crate::stream::{ClientSubgraph, ManagementTable, WireMessage, PROTOCOL_VERSION};

/// Cloud-side metrics of one LoD round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundStats {
    pub round: u32,
    pub cut_size: usize,
    pub delta_size: usize,
    pub evictions: usize,
    pub overlap_with_prev: f64,
    pub search: SearchStats,
    pub used_temporal: bool,
}

pub struct CloudSession {
    pub tree: LodTree,
    pub table: ManagementTable,
    pub params: QuantParams,
    pub codebook: Codebook,
    pub config: RenderConfig,
    pub workers: usize,
    pub prev_cut: Option<Cut>,
    round: u32,
}

impl CloudSession {
    pub fn new(
        tree: LodTree,
        params: QuantParams,
        codebook: Codebook,
        config: RenderConfig,
        reuse_threshold: u32,
        frame_interval: u32,
        workers: usize,
    ) -> Result<CloudSession> {
        config.validate()?;
        params.validate()?;
        Ok(CloudSession {
            tree,
            table: ManagementTable::new(reuse_threshold, frame_interval),
            params,
            codebook,
            config,
            workers,
            prev_cut: None,
            round: 0,
        })
    }

    pub fn hello(&self) -> WireMessage {
        WireMessage::Hello {
            protocol: PROTOCOL_VERSION,
            scene_hash: self.tree.id,
        }
    }

    /// Codebook file bytes plus the quantization parameter block.
    pub fn codebook_message(&self) -> WireMessage {
        let mut bytes = self.codebook.to_bytes();
        bytes.extend_from_slice(&self.params.to_bytes());
        WireMessage::Codebook { bytes }
    }

    /// Runs one LoD round at `camera`: full search on the first round,
    /// temporal-aware afterwards. Returns the delta-cut message and stats.
    pub fn lod_round(&mut self, camera: &Camera, frame: u64) -> Result<(WireMessage, RoundStats)> {
        let (mut cut, search) = match &self.prev_cut {
            None => full_cut_search(&self.tree, camera, &self.config, self.workers),
            Some(prev) => {
                temporal_cut_search(&self.tree, camera, prev, &self.config, self.workers)?
            }
        };
        cut.frame = frame;
        let overlap = match &self.prev_cut {
            None => 1.0,
            Some(prev) => crate::harness::overlap_ratio(&prev.members, &cut.members),
        };
        let used_temporal = self.prev_cut.is_some();
        let plan = self.table.cloud_update(&cut);
        let items: Vec<(&crate::gaussian::Gaussian, Option<u32>)> = plan
            .delta
            .iter()
            .map(|&id| {
                let n = self.tree.node(id);
                (&n.gaussian, n.parent)
            })
            .collect();
        let (payload, _) = encode_payload(&items, &self.params, &self.codebook)?;
        let msg = WireMessage::DeltaCut {
            round: self.round,
            full_cut: cut.members.clone(),
            payload,
        };
        let stats = RoundStats {
            round: self.round,
            cut_size: cut.members.len(),
            delta_size: plan.delta.len(),
            evictions: plan.evictions.len(),
            overlap_with_prev: overlap,
            search,
            used_temporal,
        };
        self.round += 1;
        self.prev_cut = Some(cut);
        Ok((msg, stats))
    }

    /// Byte cost of retransmitting the entire current cut, for the
    /// delta-vs-full accounting.
    pub fn full_cut_payload_len(&self) -> usize {
        let count = self.prev_cut.as_ref().map_or(0, |c| c.members.len());
        crate::codec::payload_len(count, self.codebook.k)
    }
}

pub struct ClientSession {
    pub subgraph: ClientSubgraph,
    pub codebook: Option<Codebook>,
    pub params: Option<QuantParams>,
    pub config: RenderConfig,
    pub scene_hash: Option<u64>,
    pub last_round: Option<u32>,
}

impl ClientSession {
    pub fn new(config: RenderConfig, reuse_threshold: u32, frame_interval: u32) -> ClientSession {
        ClientSession {
            subgraph: ClientSubgraph::new(reuse_threshold, frame_interval),
            codebook: None,
            params: None,
            config,
            scene_hash: None,
            last_round: None,
        }
    }

    /// Feeds one downstream message into the session.
    pub fn apply(&mut self, msg: &WireMessage) -> Result<()> {
        match msg {
            WireMessage::Hello {
                protocol,
                scene_hash,
            } => {
                if *protocol != PROTOCOL_VERSION {
                    return Err(Error::protocol(
                        0,
                        format!("protocol version {protocol} unsupported"),
                    ));
                }
                self.scene_hash = Some(*scene_hash);
                Ok(())
            }
            WireMessage::Codebook { bytes } => {
                let cb = Codebook::from_bytes(bytes)?;
                let cb_len = cb.to_bytes().len();
                let params = QuantParams::from_bytes(&bytes[cb_len..])?;
                self.codebook = Some(cb);
                self.params = Some(params);
                Ok(())
            }
            WireMessage::DeltaCut {
                round,
                full_cut,
                payload,
            } => {
                let (Some(cb), Some(params)) = (&self.codebook, &self.params) else {
                    return Err(Error::protocol(0, "delta cut before codebook sync"));
                };
                let decoded = decode_payload(payload, params, cb)?;
                self.subgraph.client_apply(decoded, full_cut)?;
                self.last_round = Some(*round);
                Ok(())
            }
            other => Err(Error::protocol(
                0,
                format!("unexpected downstream message {other:?}"),
            )),
        }
    }

    pub fn render_queue(&self, camera: &Camera) -> Vec<u32> {
        self.subgraph.client_select_queue(camera, &self.config)
    }

    pub fn queue_gaussians<'a>(&'a self, queue: &[u32]) -> Vec<&'a crate::gaussian::Gaussian> {
        queue
            .iter()
            .filter_map(|&id| self.subgraph.gaussian(id))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{flatten_sh, train_codebook};
    use crate::math::Vec3;
    use crate::scene::{
        build_lod_tree, generate_synthetic_scene, partition_subtrees, SyntheticSpec,
    };

    fn setup() -> (CloudSession, ClientSession) {
        let scene = generate_synthetic_scene(
            &SyntheticSpec {
                cells_x: 4,
                cells_y: 4,
                gaussians_per_cell: 10,
                ..Default::default()
            },
            21,
        )
        .unwrap();
        let mut tree = build_lod_tree(&scene, 4).unwrap();
        let p = partition_subtrees(&tree, 16).unwrap();
        tree.install_partition(p);
        let vectors: Vec<Vec<f64>> = tree.nodes.iter().map(|n| flatten_sh(&n.gaussian)).collect();
        let codebook = train_codebook(&vectors, 64, 3).unwrap();
        let params = QuantParams::from_gaussians(tree.nodes.iter().map(|n| &n.gaussian)).unwrap();
        let config = RenderConfig::default().with_tau(6.0);
        let cloud = CloudSession::new(tree, params, codebook, config.clone(), 32, 4, 2).unwrap();
        let client = ClientSession::new(config, 32, 4);
        (cloud, client)
    }

    fn camera_at(d: f64) -> Camera {
        Camera::look_at(Vec3::new(d, -d, d), Vec3::ZERO, 256.0, 64, 64, 0.5, 1000.0).unwrap()
    }

    #[test]
    fn handshake_then_rounds_stay_consistent() {
        let (mut cloud, mut client) = setup();
        client.apply(&cloud.hello()).unwrap();
        client.apply(&cloud.codebook_message()).unwrap();
        for round in 0..10 {
            let cam = camera_at(25.0 + round as f64 * 0.5);
            let (msg, stats) = cloud.lod_round(&cam, round * 4).unwrap();
            client.apply(&msg).unwrap();
            let cloud_ids: Vec<u32> = cloud.table.ids().collect();
            let client_ids: Vec<u32> = client.subgraph.ids().collect();
            assert_eq!(cloud_ids, client_ids, "round {round}");
            assert_eq!(stats.used_temporal, round > 0);
        }
    }

    #[test]
    fn delta_cut_before_codebook_is_protocol_error() {
        let (mut cloud, mut client) = setup();
        let cam = camera_at(25.0);
        let (msg, _) = cloud.lod_round(&cam, 0).unwrap();
        assert!(client.apply(&msg).is_err());
    }

    #[test]
    fn queue_matches_cut_at_cloud_pose() {
        let (mut cloud, mut client) = setup();
        client.apply(&cloud.hello()).unwrap();
        client.apply(&cloud.codebook_message()).unwrap();
        // far enough that every leaf projects under tau (no forced leaves),
        // so the local predicate reproduces the cut exactly
        let cam = camera_at(80.0);
        let (msg, _) = cloud.lod_round(&cam, 0).unwrap();
        client.apply(&msg).unwrap();
        let cut = cloud.prev_cut.as_ref().unwrap();
        let max_member_size = cut
            .members
            .iter()
            .map(|&m| {
                crate::search::projected_size_px(&cam, &cloud.tree, m, cloud.config.lod_margin_px)
            })
            .fold(0.0f64, f64::max);
        assert!(
            max_member_size <= cloud.config.tau_star,
            "forced leaves present"
        );
        let queue = client.render_queue(&cam);
        assert_eq!(queue, cut.members);
    }
}
