//! Attribute compression for transmitted Gaussians: k-means vector
//! quantization for SH coefficients, 16-bit fixed point for everything
//! else. Encoded records are fixed-width so bandwidth accounting is exact.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bytes::{Reader, WriteLe};
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::math::{Fnv64, Quat, Vec3};
use crate::scene::NO_NODE;

pub const NCBK_MAGIC: &[u8; 4] = b"NCBK";
pub const MAX_CODEBOOK: usize = 65536;

/// Trained SH codebook. Entries are stored as f32 (the file format's unit).
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    /// K * dim entries, row-major.
    pub entries: Vec<f32>,
    pub k: usize,
    /// Flattened SH dimension: 3 * (degree + 1)^2.
    pub dim: usize,
    /// Content hash; payload headers carry it so decoders can detect a
    /// mismatched codebook.
    pub version: u32,
}

impl Codebook {
    pub fn entry(&self, i: usize) -> &[f32] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn sh_degree(&self) -> Result<u8> {
        match self.dim {
            3 => Ok(0),
            12 => Ok(1),
            27 => Ok(2),
            48 => Ok(3),
            d => Err(Error::contract(format!(
                "codebook dim {d} is not an sh layout"
            ))),
        }
    }

    /// Index of the nearest entry (Euclidean); ties resolve to the lowest
    /// index.
    pub fn nearest(&self, v: &[f64]) -> usize {
        debug_assert_eq!(v.len(), self.dim);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for i in 0..self.k {
            let e = self.entry(i);
            let mut d = 0.0f64;
            for (a, b) in v.iter().zip(e) {
                let diff = a - *b as f64;
                d += diff * diff;
            }
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn content_version(entries: &[f32], k: usize, dim: usize) -> u32 {
        let mut h = Fnv64::default();
        h.write_u64(k as u64);
        h.write_u64(dim as u64);
        for &e in entries {
            h.write(&e.to_bits().to_le_bytes());
        }
        (h.finish() & 0xffff_ffff) as u32
    }

    pub fn index_width(&self) -> usize {
        if self.k <= 256 {
            1
        } else {
            2
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(NCBK_MAGIC);
        out.put_u32(self.version);
        out.put_u32(self.k as u32);
        out.put_u32(self.dim as u32);
        for &e in &self.entries {
            out.put_f32(e);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Codebook> {
        let mut r = Reader::new(bytes);
        let magic = r.take(4).map_err(|_| Error::format("ncbk: truncated"))?;
        if magic != NCBK_MAGIC {
            return Err(Error::format("ncbk: bad magic"));
        }
        let version = r.u32().map_err(|e| Error::format(format!("ncbk: {e}")))?;
        let k = r.u32().map_err(|e| Error::format(format!("ncbk: {e}")))? as usize;
        let dim = r.u32().map_err(|e| Error::format(format!("ncbk: {e}")))? as usize;
        if k == 0 || k > MAX_CODEBOOK {
            return Err(Error::format(format!("ncbk: bad K {k}")));
        }
        let mut entries = Vec::with_capacity(k * dim);
        for _ in 0..k * dim {
            entries.push(r.f32().map_err(|e| Error::format(format!("ncbk: {e}")))?);
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::format("ncbk: non-finite entry"));
        }
        Ok(Codebook {
            entries,
            k,
            dim,
            version,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Codebook> {
        Codebook::from_bytes(&fs::read(path)?)
    }
}

/// Lloyd k-means with k-means++ seeding; deterministic for a fixed seed.
/// Also returns the mean squared distortion after each iteration.
pub fn train_codebook_traced(
    vectors: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<(Codebook, Vec<f64>)> {
    if vectors.is_empty() {
        return Err(Error::contract("train_codebook: empty input"));
    }
    if k == 0 || k > MAX_CODEBOOK {
        return Err(Error::contract(format!("train_codebook: bad K {k}")));
    }
    let dim = vectors[0].len();
    if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::contract("train_codebook: inconsistent dimensions"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = vectors.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(vectors[rng.random_range(0..n)].clone());
    let mut dist = vec![0.0f64; n];
    while centroids.len() < k {
        let mut total = 0.0;
        for (i, v) in vectors.iter().enumerate() {
            let mut best = f64::INFINITY;
            for c in &centroids {
                best = best.min(sq_dist(v, c));
            }
            dist[i] = best;
            total += best;
        }
        if total <= 0.0 {
            // fewer distinct vectors than K: pad by cycling
            let reference = centroids[centroids.len() % centroids.len().max(1)].clone();
            let pad = centroids[centroids.len() % centroids.len()].clone();
            let _ = reference;
            centroids.push(pad);
            continue;
        }
        let mut pick = rng.random_range(0.0..total);
        let mut chosen = n - 1;
        for (i, &d) in dist.iter().enumerate() {
            if pick < d {
                chosen = i;
                break;
            }
            pick -= d;
        }
        centroids.push(vectors[chosen].clone());
    }

    let mut assignment = vec![0usize; n];
    let mut history = Vec::new();
    for _ in 0..50 {
        // assign
        let mut distortion = 0.0;
        for (i, v) in vectors.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (j, c) in centroids.iter().enumerate() {
                let d = sq_dist(v, c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            assignment[i] = best;
            distortion += best_d;
        }
        history.push(distortion / n as f64);
        // update
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (v, &a) in vectors.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(v) {
                *s += x;
            }
        }
        let mut movement = 0.0f64;
        for j in 0..k {
            if counts[j] == 0 {
                continue; // empty cluster keeps its centroid
            }
            let mut moved = 0.0;
            for (c, s) in centroids[j].iter_mut().zip(&sums[j]) {
                let nv = s / counts[j] as f64;
                moved += (nv - *c) * (nv - *c);
                *c = nv;
            }
            movement = movement.max(moved.sqrt());
        }
        if movement < 1e-6 {
            break;
        }
    }

    let entries: Vec<f32> = centroids.iter().flatten().map(|&v| v as f32).collect();
    let version = Codebook::content_version(&entries, k, dim);
    Ok((
        Codebook {
            entries,
            k,
            dim,
            version,
        },
        history,
    ))
}

pub fn train_codebook(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<Codebook> {
    train_codebook_traced(vectors, k, seed).map(|(cb, _)| cb)
}

/// Flattens a gaussian's SH coefficients channel-major per coefficient:
/// [r0, g0, b0, r1, g1, b1, ...].
pub fn flatten_sh(g: &Gaussian) -> Vec<f64> {
    let mut v = Vec::with_capacity(g.sh.len() * 3);
    for coeff in &g.sh {
        v.extend_from_slice(coeff);
    }
    v
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Scene-wide quantization ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantParams {
    pub bbox_min: Vec3,
    pub bbox_max: Vec3,
    pub log_scale_min: f64,
    pub log_scale_max: f64,
}

impl QuantParams {
    pub fn from_gaussians<'a>(
        gaussians: impl IntoIterator<Item = &'a Gaussian>,
    ) -> Result<QuantParams> {
        let mut iter = gaussians.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::contract("quant params: empty scene"))?;
        let mut lo = first.position;
        let mut hi = first.position;
        let mut ls_lo = first.scale.min_elem().ln();
        let mut ls_hi = first.scale.max_elem().ln();
        for g in iter {
            lo = lo.min(g.position);
            hi = hi.max(g.position);
            ls_lo = ls_lo.min(g.scale.min_elem().ln());
            ls_hi = ls_hi.max(g.scale.max_elem().ln());
        }
        // avoid degenerate ranges
        let pad = |a: &mut f64, b: &mut f64| {
            if *a >= *b {
                *a -= 0.5;
                *b += 0.5;
            }
        };
        pad(&mut lo.x, &mut hi.x);
        pad(&mut lo.y, &mut hi.y);
        pad(&mut lo.z, &mut hi.z);
        pad(&mut ls_lo, &mut ls_hi);
        Ok(QuantParams {
            bbox_min: lo,
            bbox_max: hi,
            log_scale_min: ls_lo,
            log_scale_max: ls_hi,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for axis in 0..3 {
            if self.bbox_min.to_array()[axis] >= self.bbox_max.to_array()[axis] {
                return Err(Error::contract("quant params: bbox max <= min"));
            }
        }
        if self.log_scale_min >= self.log_scale_max {
            return Err(Error::contract("quant params: log scale range empty"));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64);
        for v in self
            .bbox_min
            .to_array()
            .iter()
            .chain(self.bbox_max.to_array().iter())
        {
            out.put_f64(*v);
        }
        out.put_f64(self.log_scale_min);
        out.put_f64(self.log_scale_max);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<QuantParams> {
        let mut r = Reader::new(bytes);
        let mut vals = [0.0f64; 8];
        for v in &mut vals {
            *v = r.f64()?;
        }
        let p = QuantParams {
            bbox_min: Vec3::new(vals[0], vals[1], vals[2]),
            bbox_max: Vec3::new(vals[3], vals[4], vals[5]),
            log_scale_min: vals[6],
            log_scale_max: vals[7],
        };
        p.validate()?;
        Ok(p)
    }
}

/// Fixed-width encoded splat.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedGaussian {
    pub id: u32,
    /// `NO_NODE` when the node has no parent.
    pub parent: u32,
    pub position: [u16; 3],
    /// Log-domain.
    pub scale: [u16; 3],
    pub rotation: [u16; 4],
    pub opacity: u16,
    pub sh_index: u16,
}

const PAYLOAD_HEADER_BYTES: usize = 9;

/// Record byte width for a codebook size; constant given (K, degree).
pub fn record_width(codebook_k: usize) -> usize {
    // id + parent + pos + scale + rot + opacity + sh index
    4 + 4 + 6 + 6 + 8 + 2 + if codebook_k <= 256 { 1 } else { 2 }
}

pub fn payload_len(count: usize, codebook_k: usize) -> usize {
    PAYLOAD_HEADER_BYTES + count * record_width(codebook_k)
}

fn q16(v: f64, lo: f64, hi: f64) -> u16 {
    let t = ((v - lo) / (hi - lo) * 65535.0).round();
    t.clamp(0.0, 65535.0) as u16
}

fn dq16(q: u16, lo: f64, hi: f64) -> f64 {
    lo + q as f64 / 65535.0 * (hi - lo)
}

/// True if the position had to be clamped into the scene box.
pub fn position_clamped(g: &Gaussian, params: &QuantParams) -> bool {
    let p = g.position;
    p.x < params.bbox_min.x
        || p.y < params.bbox_min.y
        || p.z < params.bbox_min.z
        || p.x > params.bbox_max.x
        || p.y > params.bbox_max.y
        || p.z > params.bbox_max.z
}

pub fn encode_gaussian(
    g: &Gaussian,
    parent: Option<u32>,
    params: &QuantParams,
    codebook: &Codebook,
) -> Result<EncodedGaussian> {
    let sh = flatten_sh(g);
    if sh.len() != codebook.dim {
        return Err(Error::contract(format!(
            "encode: sh dim {} does not match codebook dim {}",
            sh.len(),
            codebook.dim
        )));
    }
    let r = g.rotation.normalized();
    Ok(EncodedGaussian {
        id: g.id,
        parent: parent.unwrap_or(NO_NODE),
        position: [
            q16(g.position.x, params.bbox_min.x, params.bbox_max.x),
            q16(g.position.y, params.bbox_min.y, params.bbox_max.y),
            q16(g.position.z, params.bbox_min.z, params.bbox_max.z),
        ],
        scale: [
            q16(g.scale.x.ln(), params.log_scale_min, params.log_scale_max),
            q16(g.scale.y.ln(), params.log_scale_min, params.log_scale_max),
            q16(g.scale.z.ln(), params.log_scale_min, params.log_scale_max),
        ],
        rotation: [
            q16(r.w, -1.0, 1.0),
            q16(r.x, -1.0, 1.0),
            q16(r.y, -1.0, 1.0),
            q16(r.z, -1.0, 1.0),
        ],
        opacity: q16(g.opacity, 0.0, 1.0),
        sh_index: codebook.nearest(&sh) as u16,
    })
}

pub fn decode_gaussian(
    e: &EncodedGaussian,
    params: &QuantParams,
    codebook: &Codebook,
) -> Result<(Gaussian, Option<u32>)> {
    if (e.sh_index as usize) >= codebook.k {
        return Err(Error::protocol(0, format!("sh index {} >= K", e.sh_index)));
    }
    let degree = codebook.sh_degree()?;
    let sh_len = (degree as usize + 1) * (degree as usize + 1);
    let entry = codebook.entry(e.sh_index as usize);
    let mut sh = vec![[0.0f64; 3]; sh_len];
    for k in 0..sh_len {
        for c in 0..3 {
            sh[k][c] = entry[k * 3 + c] as f64;
        }
    }
    let rotation = Quat::new(
        dq16(e.rotation[0], -1.0, 1.0),
        dq16(e.rotation[1], -1.0, 1.0),
        dq16(e.rotation[2], -1.0, 1.0),
        dq16(e.rotation[3], -1.0, 1.0),
    )
    .normalized();
    let g = Gaussian {
        id: e.id,
        position: Vec3::new(
            dq16(e.position[0], params.bbox_min.x, params.bbox_max.x),
            dq16(e.position[1], params.bbox_min.y, params.bbox_max.y),
            dq16(e.position[2], params.bbox_min.z, params.bbox_max.z),
        ),
        scale: Vec3::new(
            dq16(e.scale[0], params.log_scale_min, params.log_scale_max).exp(),
            dq16(e.scale[1], params.log_scale_min, params.log_scale_max).exp(),
            dq16(e.scale[2], params.log_scale_min, params.log_scale_max).exp(),
        ),
        rotation,
        opacity: dq16(e.opacity, 0.0, 1.0).clamp(0.0, 1.0),
        sh,
    };
    let parent = if e.parent == NO_NODE {
        None
    } else {
        Some(e.parent)
    };
    Ok((g, parent))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeStats {
    pub clamped_positions: u64,
}

/// Serializes a batch: 9-byte header (count, codebook version, sh degree)
/// followed by fixed-width records.
pub fn encode_payload(
    items: &[(&Gaussian, Option<u32>)],
    params: &QuantParams,
    codebook: &Codebook,
) -> Result<(Vec<u8>, EncodeStats)> {
    let degree = codebook.sh_degree()?;
    let mut out = Vec::with_capacity(payload_len(items.len(), codebook.k));
    out.put_u32(items.len() as u32);
    out.put_u32(codebook.version);
    out.put_u8(degree);
    let mut stats = EncodeStats::default();
    for (g, parent) in items {
        if position_clamped(g, params) {
            stats.clamped_positions += 1;
        }
        let e = encode_gaussian(g, *parent, params, codebook)?;
        out.put_u32(e.id);
        out.put_u32(e.parent);
        for q in e.position {
            out.put_u16(q);
        }
        for q in e.scale {
            out.put_u16(q);
        }
        for q in e.rotation {
            out.put_u16(q);
        }
        out.put_u16(e.opacity);
        if codebook.k <= 256 {
            out.put_u8(e.sh_index as u8);
        } else {
            out.put_u16(e.sh_index);
        }
    }
    debug_assert_eq!(out.len(), payload_len(items.len(), codebook.k));
    Ok((out, stats))
}

pub fn decode_payload(
    bytes: &[u8],
    params: &QuantParams,
    codebook: &Codebook,
) -> Result<Vec<(Gaussian, Option<u32>)>> {
    let mut r = Reader::new(bytes);
    let count = r.u32()? as usize;
    let version = r.u32()?;
    if version != codebook.version {
        return Err(Error::protocol(
            4,
            format!(
                "codebook version mismatch: payload {version:#010x}, local {:#010x}",
                codebook.version
            ),
        ));
    }
    let degree = r.u8()?;
    if degree != codebook.sh_degree()? {
        return Err(Error::protocol(8, "sh degree does not match codebook"));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let id = r.u32()?;
        let parent = r.u32()?;
        let mut position = [0u16; 3];
        for q in &mut position {
            *q = r.u16()?;
        }
        let mut scale = [0u16; 3];
        for q in &mut scale {
            *q = r.u16()?;
        }
        let mut rotation = [0u16; 4];
        for q in &mut rotation {
            *q = r.u16()?;
        }
        let opacity = r.u16()?;
        let sh_index = if codebook.k <= 256 {
            r.u8()? as u16
        } else {
            r.u16()?
        };
        let e = EncodedGaussian {
            id,
            parent,
            position,
            scale,
            rotation,
            opacity,
            sh_index,
        };
        out.push(decode_gaussian(&e, params, codebook)?);
    }
    Ok(out)
}
