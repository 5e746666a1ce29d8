use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};

use splatcast::codec::QuantParams;
use splatcast::harness::{
    bench as run_bench, replay as run_replay, train_tree_codebook, write_csv, ReplayConfig,
    RigSpec, Trajectory,
};
use splatcast::math::Vec3;
use splatcast::render::{depth_sort, preprocess, rasterize_stereo, write_ppm};
use splatcast::scene::{
    build_lod_tree, generate_synthetic_scene, load_ply, load_tree, partition_subtrees, save_ply,
    save_tree, SyntheticSpec,
};
use splatcast::stream::{ClientSession, CloudSession, StreamTransport, Transport, WireMessage};
use splatcast::{Error, RenderConfig, Result};

use crate::args::Args;

fn help(text: &str) {
    print!("{text}");
}

pub fn gen_scene(argv: &[String]) -> Result<()> {
    let args = Args::parse(argv)?;
    if args.help {
        help(
            "splatcast gen-scene --out scene.ply [--cells-x 10] [--cells-y 10] \
              [--cell-size 4.0] [--per-cell 50] [--sh-degree 1] [--base-scale 0.25] \
              [--color-noise 0.3] [--seed 0]\n",
        );
        return Ok(());
    }
    let spec = SyntheticSpec {
        cells_x: args.parsed("cells-x", 10u32)?,
        cells_y: args.parsed("cells-y", 10u32)?,
        cell_size: args.parsed("cell-size", 4.0f64)?,
        gaussians_per_cell: args.parsed("per-cell", 50u32)?,
        sh_degree: args.parsed("sh-degree", 1u8)?,
        base_scale: args.parsed("base-scale", 0.25f64)?,
        color_noise: args.parsed("color-noise", 0.3f64)?,
    };
    let seed = args.parsed("seed", 0u64)?;
    let out = PathBuf::from(args.required("out")?);
    let scene = generate_synthetic_scene(&spec, seed)?;
    save_ply(&out, &scene)?;
    println!("wrote {} gaussians to {}", scene.len(), out.display());
    Ok(())
}

pub fn build_tree(argv: &[String]) -> Result<()> {
    let args = Args::parse(argv)?;
    if args.help {
        help(
            "splatcast build-tree --scene scene.ply --out tree.nlod \
              [--branching 4] [--partition-target 64]\n",
        );
        return Ok(());
    }
    let scene = load_ply(Path::new(args.required("scene")?))?;
    let branching = args.parsed("branching", 4usize)?;
    let target = args.parsed("partition-target", 64u32)?;
    let mut tree = build_lod_tree(&scene, branching)?;
    if target > 0 {
        let p = partition_subtrees(&tree, target)?;
        tree.install_partition(p);
    }
    let out = PathBuf::from(args.required("out")?);
    save_tree(&out, &tree)?;
    println!(
        "tree: {} nodes, {} levels, {} subtrees -> {}",
        tree.len(),
        tree.levels(),
        tree.partition.subtree_count(),
        out.display()
    );
    Ok(())
}

pub fn partition(argv: &[String]) -> Result<()> {
    let args = Args::parse(argv)?;
    if args.help {
        help("splatcast partition --tree in.nlod --out out.nlod --target 64\n");
        return Ok(());
    }
    let mut tree = load_tree(Path::new(args.required("tree")?))?;
    let target: u32 = args.parsed_required("target")?;
    let p = partition_subtrees(&tree, target)?;
    tree.install_partition(p);
    let out = PathBuf::from(args.required("out")?);
    save_tree(&out, &tree)?;
    println!(
        "partitioned into {} subtrees (top tree {} nodes) -> {}",
        tree.partition.subtree_count(),
        tree.partition.top_tree.len(),
        out.display()
    );
    Ok(())
}

pub fn train_codebook(argv: &[String]) -> Result<()> {
    let args = Args::parse(argv)?;
    if args.help {
        help("splatcast train-codebook --tree tree.nlod --out cb.ncbk [--k 256] [--seed 0]\n");
        return Ok(());
    }
    let tree = load_tree(Path::new(args.required("tree")?))?;
    let k = args.parsed("k", 256usize)?;
    let seed = args.parsed("seed", 0u64)?;
    let cb = train_tree_codebook(&tree, k, seed)?;
    let out = PathBuf::from(args.required("out")?);
    cb.save(&out)?;
    println!(
        "codebook: K={} dim={} version={:#010x} -> {}",
        cb.k,
        cb.dim,
        cb.version,
        out.display()
    );
    Ok(())
}

fn rig_from_args(args: &Args) -> Result<RigSpec> {
    Ok(RigSpec {
        focal: args.parsed("focal", 256.0f64)?,
        width: args.parsed("width", 256u32)?,
        height: args.parsed("height", 256u32)?,
        near: args.parsed("near", 1.0f64)?,
        far: args.parsed("far", 1000.0f64)?,
        baseline: args.parsed("baseline", 0.06f64)?,
    })
}

fn render_from_args(args: &Args) -> Result<RenderConfig> {
    let tile_size = args.parsed("tile-size", 4u32)?;
    let config = RenderConfig {
        tile_size,
        tau_star: args.parsed("tau", 8.0f64)?,
        max_disparity_px: 4.0 * tile_size as f64,
        sh_degree: args.parsed("sh-degree", 1u8)?,
        lod_margin_px: args.parsed("lod-margin", 64.0f64)?,
        block_size: args.parsed("block-size", 4096usize)?,
        ..RenderConfig::default()
    };
    config.validate()?;
    Ok(config)
}

fn replay_config(args: &Args) -> Result<ReplayConfig> {
    Ok(ReplayConfig {
        render: render_from_args(args)?,
        rig: rig_from_args(args)?,
        frame_interval: args.parsed("w", 4u32)?,
        reuse_threshold: args.parsed("wr-star", 32u32)?,
        workers: args.parsed("workers", 4usize)?,
        target_fps: args.parsed("fps", 90.0f64)?,
        image_every: args.parsed("image-every", 0u32)?,
        image_dir: args.get("images").map(PathBuf::from),
        check_oracle: args.parsed("check-oracle", false)?,
        compute_psnr: args.parsed("psnr", true)?,
        codebook_k: args.parsed("k", 256usize)?,
        codebook_seed: args.parsed("codebook-seed", 0u64)?,
    })
}

fn trajectory_from_args(args: &Args) -> Result<Trajectory> {
    if let Some(path) = args.get("trajectory") {
        return Trajectory::load(Path::new(path));
    }
    // synthesized orbit fallback: --orbit frames,radius,height
    let spec = args.get("orbit").unwrap_or("120,60,20");
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::contract("--orbit wants frames,radius,height"));
    }
    let frames: u64 = parts[0]
        .parse()
        .map_err(|_| Error::contract("--orbit: bad frame count"))?;
    let radius: f64 = parts[1]
        .parse()
        .map_err(|_| Error::contract("--orbit: bad radius"))?;
    let height: f64 = parts[2]
        .parse()
        .map_err(|_| Error::contract("--orbit: bad height"))?;
    Ok(Trajectory::orbit(Vec3::ZERO, radius, height, frames, 90.0))
}

pub fn replay(argv: &[String]) -> Result<()> {
    let args = Args::parse(argv)?;
    if args.help {
        help(
            "splatcast replay --tree tree.nlod [--trajectory traj.txt | --orbit N,R,H] \
              [--csv out.csv] [--timings true] [--images dir --image-every 8] \
              [--w 4] [--wr-star 32] [--tau 8] [--workers 4] [--check-oracle true] \
              [--width 256 --height 256 --focal 256 --near 1 --far 1000 --baseline 0.06]\n",
        );
        return Ok(());
    }
    let tree = load_tree(Path::new(args.required("tree")?))?;
    let traj = trajectory_from_args(&args)?;
    let cfg = replay_config(&args)?;
    let timings = args.parsed("timings", false)?;
    let out = run_replay(&tree, &traj, &cfg)?;
    let csv_path = args.get("csv").map(PathBuf::from);
    write_csv(csv_path.as_deref(), &out.rows, timings)?;
    eprintln!(
        "rounds: {}  delta bytes: {}  full-retx bytes: {}  mean required: {:.2} Mbit/s  p95: {:.2} Mbit/s  energy: {:.4} J  resident: {}",
        out.bandwidth.per_round.len(),
        out.delta_bytes_total,
        out.full_retx_bytes_total,
        out.bandwidth.mean_required_bps / 1e6,
        out.bandwidth.p95_required_bps / 1e6,
        out.bandwidth.total_energy,
        out.final_resident
    );
    Ok(())
}

pub fn bench(argv: &[String]) -> Result<()> {
    let args = Args::parse(argv)?;
    if args.help {
        help(
            "splatcast bench --tree tree.nlod [--trajectory traj.txt | --orbit N,R,H] \
              [--w 4] [--tau 8] [--workers 4] [--width 256 ...]\n",
        );
        return Ok(());
    }
    let tree = load_tree(Path::new(args.required("tree")?))?;
    let traj = trajectory_from_args(&args)?;
    let cfg = replay_config(&args)?;
    let report = run_bench(&tree, &traj, &cfg)?;
    print!("{}", report.summary());
    Ok(())
}

pub fn serve(argv: &[String]) -> Result<()> {
    let args = Args::parse(argv)?;
    if args.help {
        help(
            "splatcast serve --tree tree.nlod --port 7878 [--k 256] [--w 4] [--wr-star 32] \
              [--tau 8] [--workers 4] [--width 256 ...]\n",
        );
        return Ok(());
    }
    let tree = load_tree(Path::new(args.required("tree")?))?;
    let cfg = replay_config(&args)?;
    let port: u16 = args.parsed("port", 7878u16)?;
    let codebook = train_tree_codebook(&tree, cfg.codebook_k, cfg.codebook_seed)?;
    let params = QuantParams::from_gaussians(tree.nodes.iter().map(|n| &n.gaussian))?;
    let mut cloud = CloudSession::new(
        tree,
        params,
        codebook,
        cfg.render.clone(),
        cfg.reuse_threshold,
        cfg.frame_interval,
        cfg.workers,
    )?;

    let listener = TcpListener::bind(("127.0.0.1", port))?;
    println!("listening on 127.0.0.1:{port}");
    let (socket, peer) = listener.accept()?;
    println!("client connected from {peer}");
    let mut transport = StreamTransport::new(socket);

    // the client speaks first
    match transport.recv()? {
        Some(WireMessage::Hello { protocol, .. }) => {
            if protocol != splatcast::stream::PROTOCOL_VERSION {
                return Err(Error::protocol(0, "protocol version mismatch"));
            }
        }
        other => return Err(Error::protocol(0, format!("expected hello, got {other:?}"))),
    }
    transport.send(&cloud.hello())?;
    transport.send(&cloud.codebook_message())?;

    while let Some(msg) = transport.recv()? {
        match msg {
            WireMessage::Pose { frame, pose } => {
                let sample = splatcast::harness::TrajectorySample {
                    frame: frame as u64,
                    orientation: splatcast::math::Quat::new(
                        pose[0] as f64,
                        pose[1] as f64,
                        pose[2] as f64,
                        pose[3] as f64,
                    )
                    .normalized(),
                    position: Vec3::new(pose[4] as f64, pose[5] as f64, pose[6] as f64),
                    time_s: 0.0,
                };
                let camera = cfg.rig.camera_for(&sample)?;
                let (delta, stats) = cloud.lod_round(&camera, frame as u64)?;
                println!(
                    "round {}: cut {} delta {} evictions {}",
                    stats.round, stats.cut_size, stats.delta_size, stats.evictions
                );
                transport.send(&delta)?;
            }
            WireMessage::Ack { .. } => {}
            other => {
                return Err(Error::protocol(0, format!("unexpected message {other:?}")));
            }
        }
    }
    println!("client disconnected");
    Ok(())
}

pub fn client(argv: &[String]) -> Result<()> {
    let args = Args::parse(argv)?;
    if args.help {
        help(
            "splatcast client --addr 127.0.0.1:7878 [--trajectory traj.txt | --orbit N,R,H] \
              [--csv out.csv] [--images dir --image-every 8] [--w 4] [--wr-star 32] \
              [--tau 8] [--width 256 ...]\n",
        );
        return Ok(());
    }
    let addr = args.required("addr")?;
    let cfg = replay_config(&args)?;
    let traj = trajectory_from_args(&args)?;
    let image_dir = args.get("images").map(PathBuf::from);
    let image_every: u32 = args.parsed("image-every", 0u32)?;

    let socket = TcpStream::connect(addr)?;
    let mut transport = StreamTransport::new(socket);
    let mut session =
        ClientSession::new(cfg.render.clone(), cfg.reuse_threshold, cfg.frame_interval);

    transport.send(&WireMessage::Hello {
        protocol: splatcast::stream::PROTOCOL_VERSION,
        scene_hash: 0,
    })?;
    for _ in 0..2 {
        let msg = transport
            .recv()?
            .ok_or_else(|| Error::protocol(0, "server closed during handshake"))?;
        session.apply(&msg)?;
    }

    let mut rows = Vec::new();
    for (i, sample) in traj.samples.iter().enumerate() {
        let rig = cfg.rig.rig_for(sample)?;
        if (i as u32).is_multiple_of(cfg.frame_interval) {
            transport.send(&WireMessage::Pose {
                frame: sample.frame as u32,
                pose: [
                    sample.orientation.w as f32,
                    sample.orientation.x as f32,
                    sample.orientation.y as f32,
                    sample.orientation.z as f32,
                    sample.position.x as f32,
                    sample.position.y as f32,
                    sample.position.z as f32,
                ],
            })?;
            let msg = transport
                .recv()?
                .ok_or_else(|| Error::protocol(0, "server closed mid-session"))?;
            session.apply(&msg)?;
        }
        let queue = session.render_queue(&rig.left);
        let gaussians = session.queue_gaussians(&queue);
        let projected = depth_sort(preprocess(gaussians, &rig, &cfg.render)?);
        let (left, right, _) = rasterize_stereo(&projected, &rig, &cfg.render, cfg.workers)?;
        if image_every > 0 && (i as u32).is_multiple_of(image_every) {
            if let Some(dir) = &image_dir {
                std::fs::create_dir_all(dir)?;
                write_ppm(
                    &dir.join(format!("frame_{:06}_left.ppm", sample.frame)),
                    &left,
                )?;
                write_ppm(
                    &dir.join(format!("frame_{:06}_right.ppm", sample.frame)),
                    &right,
                )?;
            }
        }
        rows.push(format!(
            "{},{},{}",
            sample.frame,
            queue.len(),
            session.subgraph.len()
        ));
    }
    if let Some(path) = args.get("csv") {
        let mut csv = String::from("# schema: splatcast-client/v1\nframe,queue,resident\n");
        for r in rows {
            csv.push_str(&r);
            csv.push('\n');
        }
        std::fs::write(path, csv)?;
    }
    println!(
        "done: {} frames, resident {}",
        traj.samples.len(),
        session.subgraph.len()
    );
    Ok(())
}
