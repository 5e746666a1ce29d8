//! Real spherical harmonics color evaluation, degrees 0..=3, with the basis
//! constants conventional for Gaussian-splat assets.

use crate::error::{Error, Result};
use crate::math::Vec3;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Evaluates `0.5 + sum_k basis_k(dir) * sh_k` per channel, clamped to [0, 1].
/// `view_dir` must be unit length; `degree` must not exceed the stored degree.
pub fn evaluate_sh(sh: &[[f64; 3]], view_dir: Vec3, degree: u8) -> Result<[f64; 3]> {
    let needed = (degree as usize + 1) * (degree as usize + 1);
    if degree > 3 {
        return Err(Error::contract(format!("sh degree {degree} > 3")));
    }
    if sh.len() < needed {
        return Err(Error::contract(format!(
            "sh evaluation needs {needed} coefficients for degree {degree}, have {}",
            sh.len()
        )));
    }
    let (x, y, z) = (view_dir.x, view_dir.y, view_dir.z);
    let mut basis = [0.0f64; 16];
    basis[0] = SH_C0;
    if degree >= 1 {
        basis[1] = -SH_C1 * y;
        basis[2] = SH_C1 * z;
        basis[3] = -SH_C1 * x;
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        basis[4] = SH_C2[0] * x * y;
        basis[5] = SH_C2[1] * y * z;
        basis[6] = SH_C2[2] * (2.0 * zz - xx - yy);
        basis[7] = SH_C2[3] * x * z;
        basis[8] = SH_C2[4] * (xx - yy);
    }
    if degree >= 3 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        basis[9] = SH_C3[0] * y * (3.0 * xx - yy);
        basis[10] = SH_C3[1] * x * y * z;
        basis[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
        basis[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
        basis[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
        basis[14] = SH_C3[5] * z * (xx - yy);
        basis[15] = SH_C3[6] * x * (xx - 3.0 * yy);
    }
    let mut rgb = [0.5f64; 3];
    for (k, b) in basis.iter().enumerate().take(needed) {
        for c in 0..3 {
            rgb[c] += b * sh[k][c];
        }
    }
    for c in &mut rgb {
        *c = c.clamp(0.0, 1.0);
    }
    Ok(rgb)
}
