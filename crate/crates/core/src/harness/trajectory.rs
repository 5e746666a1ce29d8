//! Camera trajectories: a plain-text format ("frame,px,py,pz,qw,qx,qy,qz,t",
//! one sample per line, `#` comments) plus generators for test paths.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{Quat, Vec3};

/// One pose sample. `orientation` rotates camera-frame vectors into the
/// world (camera-to-world); the camera looks along its +z axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub frame: u64,
    pub position: Vec3,
    pub orientation: Quat,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        let mut last: Option<u64> = None;
        for (i, s) in self.samples.iter().enumerate() {
            if let Some(prev) = last {
                if s.frame <= prev {
                    return Err(Error::data(i, "frame ids not strictly increasing"));
                }
            }
            if (s.orientation.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::data(i, "orientation not unit norm"));
            }
            last = Some(s.frame);
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Trajectory> {
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 9 {
                return Err(Error::format(format!(
                    "trajectory line {}: expected 9 fields, got {}",
                    lineno + 1,
                    parts.len()
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| {
                    Error::format(format!("trajectory line {}: bad number {s:?}", lineno + 1))
                })
            };
            let frame: u64 = parts[0].parse().map_err(|_| {
                Error::format(format!("trajectory line {}: bad frame id", lineno + 1))
            })?;
            samples.push(TrajectorySample {
                frame,
                position: Vec3::new(num(parts[1])?, num(parts[2])?, num(parts[3])?),
                orientation: Quat::new(
                    num(parts[4])?,
                    num(parts[5])?,
                    num(parts[6])?,
                    num(parts[7])?,
                )
                .normalized(),
                time_s: num(parts[8])?,
            });
        }
        let t = Trajectory { samples };
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Trajectory> {
        Trajectory::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                s.frame,
                s.position.x,
                s.position.y,
                s.position.z,
                s.orientation.w,
                s.orientation.x,
                s.orientation.y,
                s.orientation.z,
                s.time_s
            );
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Look-at orientation for a camera at `position` facing `target`
    /// (camera-to-world, +z forward, +y down-ish to match screen rows).
    pub fn look_at_orientation(position: Vec3, target: Vec3) -> Quat {
        let fwd = (target - position).normalized();
        let up_hint = if fwd.y.abs() > 0.999 {
            Vec3::new(0.0, 0.0, 1.0)
        } else {
            Vec3::new(0.0, 1.0, 0.0)
        };
        let right = fwd.cross(up_hint).normalized();
        let down = fwd.cross(right).normalized();
        // columns of camera-to-world = camera axes in world coordinates
        let m = crate::math::Mat3::from_columns(right, down, fwd);
        Quat::from_mat3(&m)
    }

    /// Smooth circular orbit around `center` at `radius`, camera `height`
    /// above the plane, looking at the center, sampled at `fps`.
    pub fn orbit(center: Vec3, radius: f64, height: f64, frames: u64, fps: f64) -> Trajectory {
        Self::orbit_with_speed(center, radius, height, frames, fps, 0.15)
    }

    /// `orbit` with an explicit angular speed in revolutions per second.
    pub fn orbit_with_speed(
        center: Vec3,
        radius: f64,
        height: f64,
        frames: u64,
        fps: f64,
        rev_per_s: f64,
    ) -> Trajectory {
        let samples = (0..frames)
            .map(|i| {
                let angle = i as f64 / fps * rev_per_s * std::f64::consts::TAU;
                let position =
                    center + Vec3::new(radius * angle.cos(), radius * angle.sin(), -height);
                TrajectorySample {
                    frame: i,
                    position,
                    orientation: Self::look_at_orientation(position, center),
                    time_s: i as f64 / fps,
                }
            })
            .collect();
        Trajectory { samples }
    }

    /// An orbit that closes exactly after `frames`, for boundedness tests.
    pub fn looping_orbit(
        center: Vec3,
        radius: f64,
        height: f64,
        frames: u64,
        loops: u32,
        fps: f64,
    ) -> Trajectory {
        let mut samples = Vec::new();
        for l in 0..loops as u64 {
            for i in 0..frames {
                let angle = i as f64 / frames as f64 * std::f64::consts::TAU;
                let position =
                    center + Vec3::new(radius * angle.cos(), radius * angle.sin(), -height);
                let frame = l * frames + i;
                samples.push(TrajectorySample {
                    frame,
                    position,
                    orientation: Self::look_at_orientation(position, center),
                    time_s: frame as f64 / fps,
                });
            }
        }
        Trajectory { samples }
    }
}
