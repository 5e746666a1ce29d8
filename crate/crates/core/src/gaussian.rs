use crate::error::{Error, Result};
use crate::math::{Mat3, Quat, Vec3};

/// One splat primitive: an anisotropic 3D Gaussian with opacity and
/// spherical-harmonics color.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    /// Unique per scene.
    pub id: u32,
    /// Center, meters, world frame.
    pub position: Vec3,
    /// Per-axis standard deviation, meters. All components > 0.
    pub scale: Vec3,
    /// Orientation of the principal axes.
    pub rotation: Quat,
    /// Base opacity in [0, 1].
    pub opacity: f64,
    /// RGB SH coefficients, `(degree + 1)^2` entries, DC first.
    pub sh: Vec<[f64; 3]>,
}

impl Gaussian {
    pub fn sh_degree(&self) -> Option<u8> {
        match self.sh.len() {
            1 => Some(0),
            4 => Some(1),
            9 => Some(2),
            16 => Some(3),
            _ => None,
        }
    }

    /// 3D covariance R S^2 R^T.
    pub fn covariance(&self) -> Mat3 {
        let r = self.rotation.to_mat3();
        let s2 = Mat3::diagonal(Vec3::new(
            self.scale.x * self.scale.x,
            self.scale.y * self.scale.y,
            self.scale.z * self.scale.z,
        ));
        r.mul_mat(&s2).mul_mat(&r.transpose())
    }

    /// Scalar spatial extent used for LoD sizing and bounding: 3 standard
    /// deviations along the widest axis.
    pub fn extent(&self) -> f64 {
        3.0 * self.scale.max_elem()
    }

    /// Ellipsoid volume up to the constant 4pi/3 factor.
    pub fn volume(&self) -> f64 {
        self.scale.x * self.scale.y * self.scale.z
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(Error::contract(format!(
                "gaussian {}: opacity {} outside [0,1]",
                self.id, self.opacity
            )));
        }
        if self.scale.min_elem() <= 0.0 || !self.scale.is_finite() {
            return Err(Error::contract(format!(
                "gaussian {}: non-positive scale",
                self.id
            )));
        }
        if (self.rotation.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::contract(format!(
                "gaussian {}: quaternion norm {} not unit",
                self.id,
                self.rotation.norm()
            )));
        }
        if self.sh_degree().is_none() {
            return Err(Error::contract(format!(
                "gaussian {}: sh length {} is not (d+1)^2 for d <= 3",
                self.id,
                self.sh.len()
            )));
        }
        if !self.position.is_finite() {
            return Err(Error::contract(format!(
                "gaussian {}: non-finite position",
                self.id
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(id: u32) -> Gaussian {
        Gaussian {
            id,
            position: Vec3::ZERO,
            scale: Vec3::splat(1.0),
            rotation: Quat::IDENTITY,
            opacity: 0.5,
            sh: vec![[0.0; 3]],
        }
    }

    #[test]
    fn validates_good() {
        assert!(unit(0).validate().is_ok());
    }

    #[test]
    fn rejects_bad_opacity_and_scale() {
        let mut g = unit(0);
        g.opacity = 1.5;
        assert!(g.validate().is_err());
        let mut g = unit(1);
        g.scale.y = 0.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn rejects_non_unit_quaternion() {
        let mut g = unit(0);
        g.rotation = Quat::new(1.0, 0.5, 0.0, 0.0);
        assert!(g.validate().is_err());
    }

    #[test]
    fn covariance_of_axis_aligned() {
        let mut g = unit(0);
        g.scale = Vec3::new(2.0, 1.0, 0.5);
        let c = g.covariance();
        assert!((c.m[0][0] - 4.0).abs() < 1e-12);
        assert!((c.m[1][1] - 1.0).abs() < 1e-12);
        assert!((c.m[2][2] - 0.25).abs() < 1e-12);
        assert!(c.m[0][1].abs() < 1e-12);
    }
}
