//! Replay driver: runs the full cloud-client co-simulation over a camera
//! trajectory, collects per-frame metrics, and emits CSV for plotting.

mod trajectory;

pub use trajectory::{Trajectory, TrajectorySample};

use std::path::Path;
use std::time::Instant;

use crate::camera::{Camera, StereoRig};
use crate::codec::{flatten_sh, train_codebook, Codebook, QuantParams};
use crate::config::RenderConfig;
use crate::error::{Error, Result};
use crate::render::{
    depth_sort, preprocess, rasterize_mono, rasterize_right_reference, rasterize_stereo, write_ppm,
    Framebuffer,
};
use crate::scene::LodTree;
use crate::search::{full_cut_search, validate_cut, SearchStats};
use crate::stream::{
    bandwidth_report, BandwidthReport, ChannelModel, ClientSession, CloudSession, SimLink,
};

pub const REPLAY_CSV_SCHEMA: &str = "splatcast-replay/v1";
pub const REPLAY_CSV_SCHEMA_TIMINGS: &str = "splatcast-replay/v1+timings";

/// Peak signal-to-noise ratio over RGB in [0,1]; identical images cap at
/// 100 dB.
pub fn psnr(a: &Framebuffer, b: &Framebuffer) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::contract("psnr: dimension mismatch"));
    }
    let mut mse = 0.0f64;
    for (x, y) in a.rgb.iter().zip(&b.rgb) {
        let d = (x.clamp(0.0, 1.0) - y.clamp(0.0, 1.0)) as f64;
        mse += d * d;
    }
    mse /= a.rgb.len() as f64;
    if mse == 0.0 {
        return Ok(100.0);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(100.0))
}

/// |prev ∩ curr| / |prev|; an empty previous set counts as full overlap.
pub fn overlap_ratio(prev: &[u32], curr: &[u32]) -> f64 {
    if prev.is_empty() {
        return 1.0;
    }
    let curr_set: std::collections::HashSet<u32> = curr.iter().copied().collect();
    let inter = prev.iter().filter(|id| curr_set.contains(id)).count();
    inter as f64 / prev.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub frame: u64,
    pub is_round: bool,
    pub cut_size: usize,
    pub delta_size: usize,
    pub delta_bytes: usize,
    pub overlap: f64,
    pub required_bps: f64,
    pub energy_j: f64,
    pub psnr_db: f64,
    pub nodes_visited: u64,
    pub ms_search: f64,
    pub ms_stream: f64,
    pub ms_render: f64,
}

impl MetricsRow {
    pub fn csv_header(timings: bool) -> String {
        let mut h = String::from(
            "frame,cut_size,delta_size,delta_bytes,overlap,required_bps,energy_j,psnr_db,nodes_visited",
        );
        if timings {
            h.push_str(",ms_search,ms_stream,ms_render");
        }
        h
    }

    pub fn to_csv(&self, timings: bool) -> String {
        let mut s = format!(
            "{},{},{},{},{:.6},{:.1},{:.9},{:.4},{}",
            self.frame,
            self.cut_size,
            self.delta_size,
            self.delta_bytes,
            self.overlap,
            self.required_bps,
            self.energy_j,
            self.psnr_db,
            self.nodes_visited
        );
        if timings {
            s.push_str(&format!(
                ",{:.3},{:.3},{:.3}",
                self.ms_search, self.ms_stream, self.ms_render
            ));
        }
        s
    }
}

pub fn rows_to_csv(rows: &[MetricsRow], timings: bool) -> String {
    let schema = if timings {
        REPLAY_CSV_SCHEMA_TIMINGS
    } else {
        REPLAY_CSV_SCHEMA
    };
    let mut out = format!("# schema: {schema}\n{}\n", MetricsRow::csv_header(timings));
    for r in rows {
        out.push_str(&r.to_csv(timings));
        out.push('\n');
    }
    out
}

/// Intrinsics shared by every camera on a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RigSpec {
    pub focal: f64,
    pub width: u32,
    pub height: u32,
    pub near: f64,
    pub far: f64,
    pub baseline: f64,
}

impl Default for RigSpec {
    fn default() -> Self {
        RigSpec {
            focal: 256.0,
            width: 256,
            height: 256,
            near: 1.0,
            far: 1000.0,
            baseline: 0.06,
        }
    }
}

impl RigSpec {
    pub fn camera_for(&self, sample: &TrajectorySample) -> Result<Camera> {
        let rotation = sample.orientation.conjugate();
        let translation = -rotation.rotate(sample.position);
        Camera::new(
            rotation,
            translation,
            self.focal,
            [self.width as f64 / 2.0, self.height as f64 / 2.0],
            self.width,
            self.height,
            self.near,
            self.far,
        )
    }

    pub fn rig_for(&self, sample: &TrajectorySample) -> Result<StereoRig> {
        StereoRig::new(self.camera_for(sample)?, self.baseline)
    }
}

#[derive(Debug, Clone)]
pub struct ReplayConfig {
    pub render: RenderConfig,
    pub rig: RigSpec,
    /// LoD round every `frame_interval` frames.
    pub frame_interval: u32,
    pub reuse_threshold: u32,
    pub workers: usize,
    pub target_fps: f64,
    /// Dump stereo PPM pairs every N frames (0 = never).
    pub image_every: u32,
    pub image_dir: Option<std::path::PathBuf>,
    /// Assert each temporal cut against the full search and frontier check.
    pub check_oracle: bool,
    /// Compute the per-frame PSNR column against a lossless full-cut render.
    pub compute_psnr: bool,
    pub codebook_k: usize,
    pub codebook_seed: u64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            render: RenderConfig::default(),
            rig: RigSpec::default(),
            frame_interval: 4,
            reuse_threshold: 32,
            workers: 4,
            target_fps: 90.0,
            image_every: 0,
            image_dir: None,
            check_oracle: false,
            compute_psnr: true,
            codebook_k: 256,
            codebook_seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct ReplayOutput {
    pub rows: Vec<MetricsRow>,
    pub bandwidth: BandwidthReport,
    /// Cumulative delta bytes vs what full-cut retransmission would cost.
    pub delta_bytes_total: u64,
    pub full_retx_bytes_total: u64,
    pub final_resident: usize,
}

/// Trains the session codebook over the whole tree's SH vectors.
pub fn train_tree_codebook(tree: &LodTree, k: usize, seed: u64) -> Result<Codebook> {
    let vectors: Vec<Vec<f64>> = tree.nodes.iter().map(|n| flatten_sh(&n.gaussian)).collect();
    train_codebook(&vectors, k, seed)
}

/// Runs the cloud+client co-simulation over a trajectory.
///
/// Per LoD round (every `frame_interval` frames): cut search on the cloud
/// (full on round 0, temporal after), delta-cut encoding, simulated
/// transfer, client apply. Per frame: client queue selection at the current
/// pose, shared preprocessing, depth sort, stereo rasterization.
pub fn replay(tree: &LodTree, trajectory: &Trajectory, cfg: &ReplayConfig) -> Result<ReplayOutput> {
    if trajectory.samples.is_empty() {
        return Err(Error::contract("replay: empty trajectory"));
    }
    cfg.render.validate()?;
    let codebook = train_tree_codebook(tree, cfg.codebook_k, cfg.codebook_seed)?;
    let params = QuantParams::from_gaussians(tree.nodes.iter().map(|n| &n.gaussian))?;
    let mut cloud = CloudSession::new(
        tree.clone(),
        params,
        codebook,
        cfg.render.clone(),
        cfg.reuse_threshold,
        cfg.frame_interval,
        cfg.workers,
    )?;
    let mut client =
        ClientSession::new(cfg.render.clone(), cfg.reuse_threshold, cfg.frame_interval);
    let mut link = SimLink::new(ChannelModel::default());

    // session bootstrap
    let hello = cloud.hello();
    link.send(&hello);
    let cb_msg = cloud.codebook_message();
    link.send(&cb_msg);
    while let Some((msg, _)) = link.recv() {
        client.apply(&msg)?;
    }

    let mut rows = Vec::with_capacity(trajectory.samples.len());
    let mut round_bytes: Vec<(u64, u64)> = Vec::new();
    let mut delta_total = 0u64;
    let mut full_retx_total = 0u64;
    let mut max_resident = 0usize;

    for (i, sample) in trajectory.samples.iter().enumerate() {
        let frame = sample.frame;
        let rig = cfg.rig.rig_for(sample)?;
        let stage = |e: Error| -> Error { Error::contract(format!("frame {frame}: {e}")) };

        let mut row = MetricsRow {
            frame,
            is_round: false,
            cut_size: 0,
            delta_size: 0,
            delta_bytes: 0,
            overlap: 1.0,
            required_bps: 0.0,
            energy_j: 0.0,
            psnr_db: 100.0,
            nodes_visited: 0,
            ms_search: 0.0,
            ms_stream: 0.0,
            ms_render: 0.0,
        };

        if (i as u32).is_multiple_of(cfg.frame_interval) {
            row.is_round = true;
            link.now = sample.time_s;
            let t0 = Instant::now();
            let (msg, stats) = cloud.lod_round(&rig.left, frame).map_err(&stage)?;
            row.ms_search = t0.elapsed().as_secs_f64() * 1e3;

            if cfg.check_oracle {
                let cut = cloud.prev_cut.as_ref().unwrap();
                let (oracle, _) = full_cut_search(&cloud.tree, &rig.left, &cfg.render, cfg.workers);
                if cut.members != oracle.members {
                    return Err(stage(Error::contract(
                        "temporal cut diverged from the full search",
                    )));
                }
                if !validate_cut(&cloud.tree, cut) {
                    return Err(stage(Error::contract("cut is not a frontier")));
                }
            }

            let t1 = Instant::now();
            let bytes = msg.frame_len();
            let energy_before = link.channel.energy_spent;
            link.send(&msg);
            let (delivered, _) = link.recv().expect("fifo link");
            client.apply(&delivered).map_err(&stage)?;
            row.ms_stream = t1.elapsed().as_secs_f64() * 1e3;

            row.cut_size = stats.cut_size;
            row.delta_size = stats.delta_size;
            row.delta_bytes = bytes;
            row.overlap = stats.overlap_with_prev;
            row.energy_j = link.channel.energy_spent - energy_before;
            row.nodes_visited = stats.search.nodes_visited;
            row.required_bps = 8.0 * bytes as f64 / (cfg.frame_interval as f64 / cfg.target_fps);
            round_bytes.push((stats.round as u64, bytes as u64));
            delta_total += bytes as u64;
            full_retx_total += (cloud.full_cut_payload_len() + 5) as u64;

            // bookkeeping consistency is an invariant, not a metric
            debug_assert!(cloud.table.ids().eq(client.subgraph.ids()));
        } else if let Some(prev) = &cloud.prev_cut {
            row.cut_size = prev.members.len();
        }
        max_resident = max_resident.max(client.subgraph.len());

        // client-side frame: queue -> preprocess -> sort -> stereo raster
        let t2 = Instant::now();
        let queue = client.render_queue(&rig.left);
        let gaussians = client.queue_gaussians(&queue);
        let projected = depth_sort(preprocess(gaussians, &rig, &cfg.render).map_err(&stage)?);
        let (left_img, right_img, _stats) =
            rasterize_stereo(&projected, &rig, &cfg.render, cfg.workers).map_err(&stage)?;
        row.ms_render = t2.elapsed().as_secs_f64() * 1e3;

        if cfg.compute_psnr {
            // lossless reference: full cut at this pose, original attributes
            let (oracle_cut, _) = full_cut_search(tree, &rig.left, &cfg.render, cfg.workers);
            let oracle_gaussians: Vec<&crate::gaussian::Gaussian> = oracle_cut
                .members
                .iter()
                .map(|&ix| &tree.node(ix).gaussian)
                .collect();
            let oracle_proj =
                depth_sort(preprocess(oracle_gaussians, &rig, &cfg.render).map_err(&stage)?);
            let (oracle_img, _) =
                rasterize_mono(&oracle_proj, &rig.left, &cfg.render).map_err(&stage)?;
            row.psnr_db = psnr(&left_img, &oracle_img)?;
        }

        if cfg.image_every > 0 && (i as u32).is_multiple_of(cfg.image_every) {
            if let Some(dir) = &cfg.image_dir {
                std::fs::create_dir_all(dir)?;
                write_ppm(&dir.join(format!("frame_{frame:06}_left.ppm")), &left_img)?;
                write_ppm(&dir.join(format!("frame_{frame:06}_right.ppm")), &right_img)?;
            }
        }

        rows.push(row);
    }

    let bandwidth = bandwidth_report(
        &round_bytes,
        cfg.frame_interval,
        cfg.target_fps,
        link.channel.energy_spent,
    );
    Ok(ReplayOutput {
        rows,
        bandwidth,
        delta_bytes_total: delta_total,
        full_retx_bytes_total: full_retx_total,
        final_resident: client.subgraph.len(),
    })
}

/// Work-counter and wall-time comparison of the two search policies and the
/// two stereo policies over a trajectory.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rounds: usize,
    pub full_nodes_visited: u64,
    pub temporal_nodes_visited: u64,
    pub full_search_ms: f64,
    pub temporal_search_ms: f64,
    pub stereo_alpha_evals: u64,
    pub two_mono_alpha_evals: u64,
    pub stereo_ms: f64,
    pub two_mono_ms: f64,
    pub debug_build: bool,
}

impl BenchReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        if self.debug_build {
            s.push_str("# WARNING: debug build; wall times are not representative\n");
        }
        s.push_str(&format!("rounds: {}\n", self.rounds));
        s.push_str(&format!(
            "search nodes visited: full {} temporal {} (ratio {:.3})\n",
            self.full_nodes_visited,
            self.temporal_nodes_visited,
            self.temporal_nodes_visited as f64 / self.full_nodes_visited.max(1) as f64
        ));
        s.push_str(&format!(
            "search wall ms: full {:.2} temporal {:.2}\n",
            self.full_search_ms, self.temporal_search_ms
        ));
        s.push_str(&format!(
            "alpha evals: stereo {} two-mono {} (ratio {:.3})\n",
            self.stereo_alpha_evals,
            self.two_mono_alpha_evals,
            self.stereo_alpha_evals as f64 / self.two_mono_alpha_evals.max(1) as f64
        ));
        s.push_str(&format!(
            "render wall ms: stereo {:.2} two-mono {:.2}\n",
            self.stereo_ms, self.two_mono_ms
        ));
        s
    }
}

pub fn bench(tree: &LodTree, trajectory: &Trajectory, cfg: &ReplayConfig) -> Result<BenchReport> {
    use crate::search::temporal_cut_search;
    if trajectory.samples.is_empty() {
        return Err(Error::contract("bench: empty trajectory"));
    }
    let mut report = BenchReport {
        rounds: 0,
        full_nodes_visited: 0,
        temporal_nodes_visited: 0,
        full_search_ms: 0.0,
        temporal_search_ms: 0.0,
        stereo_alpha_evals: 0,
        two_mono_alpha_evals: 0,
        stereo_ms: 0.0,
        two_mono_ms: 0.0,
        debug_build: cfg!(debug_assertions),
    };
    let mut prev = None;
    for (i, sample) in trajectory.samples.iter().enumerate() {
        if !(i as u32).is_multiple_of(cfg.frame_interval) {
            continue;
        }
        let rig = cfg.rig.rig_for(sample)?;
        let t0 = Instant::now();
        let (full, full_stats) = full_cut_search(tree, &rig.left, &cfg.render, cfg.workers);
        report.full_search_ms += t0.elapsed().as_secs_f64() * 1e3;
        let mut temporal_stats = SearchStats::default();
        if let Some(prev_cut) = &prev {
            let t1 = Instant::now();
            let (tcut, ts) =
                temporal_cut_search(tree, &rig.left, prev_cut, &cfg.render, cfg.workers)?;
            report.temporal_search_ms += t1.elapsed().as_secs_f64() * 1e3;
            temporal_stats = ts;
            debug_assert_eq!(tcut.members, full.members);
        }
        report.full_nodes_visited += full_stats.nodes_visited;
        report.temporal_nodes_visited += temporal_stats.nodes_visited;
        report.rounds += 1;

        let gaussians: Vec<&crate::gaussian::Gaussian> = full
            .members
            .iter()
            .map(|&ix| &tree.node(ix).gaussian)
            .collect();
        let projected = depth_sort(preprocess(gaussians, &rig, &cfg.render)?);
        let t2 = Instant::now();
        let (_, _, sstats) = rasterize_stereo(&projected, &rig, &cfg.render, cfg.workers)?;
        report.stereo_ms += t2.elapsed().as_secs_f64() * 1e3;
        let t3 = Instant::now();
        let (_, lm) = rasterize_mono(&projected, &rig.left, &cfg.render)?;
        let (_, rm) = rasterize_right_reference(&projected, &rig, &cfg.render)?;
        report.two_mono_ms += t3.elapsed().as_secs_f64() * 1e3;
        report.stereo_alpha_evals += sstats.left.alpha_evals + sstats.right.alpha_evals;
        report.two_mono_alpha_evals += lm.alpha_evals + rm.alpha_evals;

        prev = Some(full);
    }
    Ok(report)
}

/// Writes rows (and the schema header) to a file or stdout.
pub fn write_csv(path: Option<&Path>, rows: &[MetricsRow], timings: bool) -> Result<()> {
    let csv = rows_to_csv(rows, timings);
    match path {
        Some(p) => std::fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
