//! Binary PPM (P6) image IO; byte-exact, used for image dumps and golden
//! fixtures.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::render::Framebuffer;

pub fn write_ppm(path: &Path, fb: &Framebuffer) -> Result<()> {
    let mut out = format!("P6\n{} {}\n255\n", fb.width, fb.height).into_bytes();
    out.extend_from_slice(&fb.to_rgb8());
    fs::write(path, out)?;
    Ok(())
}

/// Returns (width, height, rgb8).
pub fn read_ppm(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let mut fields = Vec::new();
    let mut pos = 0usize;
    while fields.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(
            std::str::from_utf8(&bytes[start..pos])
                .unwrap_or("")
                .to_string(),
        );
    }
    if fields.len() < 4 || fields[0] != "P6" {
        return Err(Error::format("ppm: bad header"));
    }
    let w: u32 = fields[1]
        .parse()
        .map_err(|_| Error::format("ppm: bad width"))?;
    let h: u32 = fields[2]
        .parse()
        .map_err(|_| Error::format("ppm: bad height"))?;
    if fields[3] != "255" {
        return Err(Error::format("ppm: maxval must be 255"));
    }
    pos += 1; // single whitespace after maxval
    let need = (w * h * 3) as usize;
    if bytes.len() < pos + need {
        return Err(Error::format("ppm: truncated pixel data"));
    }
    Ok((w, h, bytes[pos..pos + need].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let mut fb = Framebuffer::new(4, 2);
        for (i, v) in fb.rgb.iter_mut().enumerate() {
            *v = (i as f32) / 24.0;
        }
        let dir = std::env::temp_dir().join("splatcast_ppm");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.ppm");
        write_ppm(&path, &fb).unwrap();
        let (w, h, data) = read_ppm(&path).unwrap();
        assert_eq!((w, h), (4, 2));
        assert_eq!(data, fb.to_rgb8());
    }
}
