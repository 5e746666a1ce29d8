//! splatcast command-line driver.
//!
//! Subcommands: gen-scene, build-tree, partition, train-codebook, replay,
//! bench, serve, client. Every parameter can be set by a `--flag value`
//! pair or a `key=value` config file (`--config path`); flags win.

mod args;
mod commands;

use std::process::ExitCode;

const USAGE: &str = "\
usage: splatcast <command> [--config FILE] [--flag value]...

commands:
  gen-scene       generate a synthetic splat scene (PLY)
  build-tree      build a LoD tree from a PLY scene (NLOD)
  partition       re-partition an existing tree into subtrees
  train-codebook  train the SH vector-quantization codebook (NCBK)
  replay          run the cloud+client co-simulation over a trajectory
  bench           compare search and stereo policies (counters + wall time)
  serve           run the cloud side on a TCP socket
  client          connect to a server and stream a trajectory

run `splatcast <command> --help` for the command's flags.
";

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let Some((cmd, rest)) = argv.split_first() else {
        eprint!("{USAGE}");
        return ExitCode::from(2);
    };
    let result = match cmd.as_str() {
        "gen-scene" => commands::gen_scene(rest),
        "build-tree" => commands::build_tree(rest),
        "partition" => commands::partition(rest),
        "train-codebook" => commands::train_codebook(rest),
        "replay" => commands::replay(rest),
        "bench" => commands::bench(rest),
        "serve" => commands::serve(rest),
        "client" => commands::client(rest),
        "--help" | "-h" | "help" => {
            print!("{USAGE}");
            return ExitCode::SUCCESS;
        }
        other => {
            eprintln!("unknown command {other:?}\n");
            eprint!("{USAGE}");
            return ExitCode::from(2);
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
