use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::math::{Quat, Vec3};

/// Pinhole camera. The pose maps world to camera space: `p_cam = R p + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub rotation: Quat,
    pub translation: Vec3,
    /// Focal length in pixels (same for both axes).
    pub focal: f64,
    /// Principal point (cx, cy) in pixels.
    pub principal: [f64; 2],
    pub width: u32,
    pub height: u32,
    pub near: f64,
    pub far: f64,
}

/// Outcome of projecting a world point. Points behind the camera are a
/// tagged result, not an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projected {
    InFront { screen: [f64; 2], depth: f64 },
    Behind { depth: f64 },
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rotation: Quat,
        translation: Vec3,
        focal: f64,
        principal: [f64; 2],
        width: u32,
        height: u32,
        near: f64,
        far: f64,
    ) -> Result<Camera> {
        if !(near > 0.0 && near < far) {
            return Err(Error::contract(format!(
                "camera: need 0 < near < far, got near={near} far={far}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::contract("camera: zero resolution"));
        }
        if focal <= 0.0 {
            return Err(Error::contract("camera: non-positive focal length"));
        }
        Ok(Camera {
            rotation: rotation.normalized(),
            translation,
            focal,
            principal,
            width,
            height,
            near,
            far,
        })
    }

    /// A camera at `position` looking at `target`, +y world treated as up.
    pub fn look_at(
        position: Vec3,
        target: Vec3,
        focal: f64,
        width: u32,
        height: u32,
        near: f64,
        far: f64,
    ) -> Result<Camera> {
        let fwd = (target - position).normalized();
        let up_hint = if fwd.y.abs() > 0.999 {
            Vec3::new(0.0, 0.0, 1.0)
        } else {
            Vec3::new(0.0, 1.0, 0.0)
        };
        // camera basis: x right, y down, z forward
        let right = fwd.cross(up_hint).normalized();
        let down = fwd.cross(right).normalized();
        let r = crate::math::Mat3 {
            m: [
                [right.x, right.y, right.z],
                [down.x, down.y, down.z],
                [fwd.x, fwd.y, fwd.z],
            ],
        };
        let rotation = Quat::from_mat3(&r);
        let translation = -rotation.rotate(position);
        Camera::new(
            rotation,
            translation,
            focal,
            [width as f64 / 2.0, height as f64 / 2.0],
            width,
            height,
            near,
            far,
        )
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        self.rotation.conjugate().rotate(-self.translation)
    }

    pub fn project(&self, p: Vec3) -> Projected {
        let c = self.to_camera(p);
        if c.z <= 0.0 {
            return Projected::Behind { depth: c.z };
        }
        Projected::InFront {
            screen: [
                self.focal * c.x / c.z + self.principal[0],
                self.focal * c.y / c.z + self.principal[1],
            ],
            depth: c.z,
        }
    }

    /// Inverse of `project` for a known depth.
    pub fn unproject(&self, screen: [f64; 2], depth: f64) -> Vec3 {
        let c = Vec3::new(
            (screen[0] - self.principal[0]) * depth / self.focal,
            (screen[1] - self.principal[1]) * depth / self.focal,
            depth,
        );
        self.rotation.conjugate().rotate(c - self.translation)
    }
}

/// Projects a world point, returning screen position and camera depth.
pub fn project_point(camera: &Camera, p: Vec3) -> Projected {
    camera.project(p)
}

/// Center-based frustum test with a screen margin in pixels. The margin
/// admits splats just off-screen, e.g. the widened stereo field of view.
pub fn frustum_test(camera: &Camera, g: &Gaussian, margin: f64) -> bool {
    match camera.project(g.position) {
        Projected::Behind { .. } => false,
        Projected::InFront { screen, depth } => {
            depth >= camera.near
                && depth <= camera.far
                && screen[0] >= -margin
                && screen[0] <= camera.width as f64 + margin
                && screen[1] >= -margin
                && screen[1] <= camera.height as f64 + margin
        }
    }
}

/// Rectified stereo pair: the right camera shares the left camera's
/// orientation and intrinsics and is offset by the baseline along the left
/// camera's +x axis. It is always derived, never stored, so the rig cannot
/// fall out of rectification.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoRig {
    pub left: Camera,
    pub baseline: f64,
}

impl StereoRig {
    pub fn new(left: Camera, baseline: f64) -> Result<StereoRig> {
        if !(baseline >= 0.0 && baseline.is_finite()) {
            return Err(Error::contract(format!(
                "stereo rig: baseline {baseline} must be >= 0"
            )));
        }
        Ok(StereoRig { left, baseline })
    }

    pub fn right(&self) -> Camera {
        let mut right = self.left.clone();
        right.translation.x -= self.baseline;
        right
    }

    /// Midpoint between the two optical centers, world frame.
    pub fn mid_eye(&self) -> Vec3 {
        let half = self
            .left
            .rotation
            .conjugate()
            .rotate(Vec3::new(self.baseline * 0.5, 0.0, 0.0));
        self.left.center() + half
    }

    /// Largest disparity any point at depth >= near can have.
    pub fn max_disparity_px(&self) -> f64 {
        self.baseline * self.left.focal / self.left.near
    }
}
