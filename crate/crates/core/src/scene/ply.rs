//! Reader/writer for the binary little-endian PLY layout used by
//! Gaussian-splat assets: raw scales are log-domain, raw opacity is a logit,
//! `f_dc_*` is the SH DC term and `f_rest_*` holds higher orders
//! channel-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::math::{Quat, Vec3};

const REQUIRED: [&str; 13] = [
    "x", "y", "z", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
    "f_dc_0", "f_dc_1",
];

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-7, 1.0 - 1e-7);
    (p / (1.0 - p)).ln()
}

pub fn load_ply(path: &Path) -> Result<Vec<Gaussian>> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut header = Vec::new();
    // read header byte-by-byte until "end_header\n"
    let mut line = Vec::new();
    loop {
        let mut b = [0u8; 1];
        if reader.read(&mut b)? == 0 {
            return Err(Error::format("unexpected EOF in ply header"));
        }
        line.push(b[0]);
        if b[0] == b'\n' {
            let text = String::from_utf8_lossy(&line).trim().to_string();
            let done = text == "end_header";
            header.push(text);
            line.clear();
            if done {
                break;
            }
        }
    }

    if header.first().map(String::as_str) != Some("ply") {
        return Err(Error::format("missing ply magic"));
    }
    if !header
        .iter()
        .any(|l| l == "format binary_little_endian 1.0")
    {
        return Err(Error::format(
            "unsupported ply format (need binary_little_endian 1.0)",
        ));
    }

    let mut count: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    for l in &header {
        let parts: Vec<&str> = l.split_whitespace().collect();
        match parts.as_slice() {
            ["element", "vertex", n] => {
                count = Some(n.parse().map_err(|_| Error::format("bad vertex count"))?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", ty, name] if in_vertex => {
                if *ty != "float" {
                    return Err(Error::format(format!(
                        "property {name}: unsupported type {ty} (need float)"
                    )));
                }
                props.push((*name).to_string());
            }
            _ => {}
        }
    }
    let count = count.ok_or_else(|| Error::format("missing vertex element"))?;

    let index_of = |name: &str| props.iter().position(|p| p == name);
    for required in REQUIRED.iter().chain(std::iter::once(&"f_dc_2")) {
        if index_of(required).is_none() {
            return Err(Error::format(format!("missing property {required}")));
        }
    }
    let rest_count = props.iter().filter(|p| p.starts_with("f_rest_")).count();
    if rest_count % 3 != 0 {
        return Err(Error::format(format!(
            "f_rest_* count {rest_count} not divisible by 3"
        )));
    }
    let per_channel = rest_count / 3;
    let sh_len = per_channel + 1;
    if ![1usize, 4, 9, 16].contains(&sh_len) {
        return Err(Error::format(format!(
            "sh coefficient count {sh_len} is not (d+1)^2 for d <= 3"
        )));
    }
    // f_rest indices must be contiguous 0..rest_count
    for i in 0..rest_count {
        if index_of(&format!("f_rest_{i}")).is_none() {
            return Err(Error::format(format!("missing property f_rest_{i}")));
        }
    }

    let stride = props.len();
    let mut raw = vec![0u8; stride * 4];
    let mut out = Vec::with_capacity(count);
    let ix = |name: &str| index_of(name).unwrap();
    let (px, py, pz) = (ix("x"), ix("y"), ix("z"));
    let pop = ix("opacity");
    let ps: [usize; 3] = [ix("scale_0"), ix("scale_1"), ix("scale_2")];
    let pr: [usize; 4] = [ix("rot_0"), ix("rot_1"), ix("rot_2"), ix("rot_3")];
    let pdc: [usize; 3] = [ix("f_dc_0"), ix("f_dc_1"), ix("f_dc_2")];
    let prest: Vec<usize> = (0..rest_count)
        .map(|i| ix(&format!("f_rest_{i}")))
        .collect();

    for rec in 0..count {
        reader
            .read_exact(&mut raw)
            .map_err(|_| Error::format(format!("truncated vertex data at record {rec}")))?;
        let field = |i: usize| -> f64 {
            f32::from_le_bytes(raw[i * 4..i * 4 + 4].try_into().unwrap()) as f64
        };
        let mut values = Vec::with_capacity(stride);
        for i in 0..stride {
            values.push(field(i));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::data(rec, "NaN field"));
        }

        let mut sh = vec![[0.0f64; 3]; sh_len];
        sh[0] = [values[pdc[0]], values[pdc[1]], values[pdc[2]]];
        for c in 0..3 {
            for k in 0..per_channel {
                sh[k + 1][c] = values[prest[c * per_channel + k]];
            }
        }

        let rotation =
            Quat::new(values[pr[0]], values[pr[1]], values[pr[2]], values[pr[3]]).normalized();
        out.push(Gaussian {
            id: rec as u32,
            position: Vec3::new(values[px], values[py], values[pz]),
            scale: Vec3::new(
                values[ps[0]].exp(),
                values[ps[1]].exp(),
                values[ps[2]].exp(),
            ),
            rotation,
            opacity: sigmoid(values[pop]),
            sh,
        });
    }
    Ok(out)
}

/// Writes the inverse transform of `load_ply`; all gaussians must share one
/// SH degree.
pub fn save_ply(path: &Path, gaussians: &[Gaussian]) -> Result<()> {
    if gaussians.is_empty() {
        return Err(Error::contract("save_ply: empty scene"));
    }
    let sh_len = gaussians[0].sh.len();
    if gaussians.iter().any(|g| g.sh.len() != sh_len) {
        return Err(Error::contract("save_ply: mixed sh degrees"));
    }
    let per_channel = sh_len - 1;

    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "element vertex {}", gaussians.len())?;
    for name in ["x", "y", "z"] {
        writeln!(w, "property float {name}")?;
    }
    for i in 0..3 {
        writeln!(w, "property float f_dc_{i}")?;
    }
    for i in 0..per_channel * 3 {
        writeln!(w, "property float f_rest_{i}")?;
    }
    writeln!(w, "property float opacity")?;
    for i in 0..3 {
        writeln!(w, "property float scale_{i}")?;
    }
    for i in 0..4 {
        writeln!(w, "property float rot_{i}")?;
    }
    writeln!(w, "end_header")?;

    let put = |v: f64, w: &mut BufWriter<File>| -> Result<()> {
        w.write_all(&(v as f32).to_le_bytes())?;
        Ok(())
    };
    for g in gaussians {
        put(g.position.x, &mut w)?;
        put(g.position.y, &mut w)?;
        put(g.position.z, &mut w)?;
        for c in 0..3 {
            put(g.sh[0][c], &mut w)?;
        }
        for c in 0..3 {
            for k in 0..per_channel {
                put(g.sh[k + 1][c], &mut w)?;
            }
        }
        put(logit(g.opacity), &mut w)?;
        put(g.scale.x.ln(), &mut w)?;
        put(g.scale.y.ln(), &mut w)?;
        put(g.scale.z.ln(), &mut w)?;
        put(g.rotation.w, &mut w)?;
        put(g.rotation.x, &mut w)?;
        put(g.rotation.y, &mut w)?;
        put(g.rotation.z, &mut w)?;
    }
    w.flush()?;
    Ok(())
}
