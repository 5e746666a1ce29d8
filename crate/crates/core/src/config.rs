use crate::error::{Error, Result};

/// Shared rendering / LoD-search parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    /// Square tile edge in pixels.
    pub tile_size: u32,
    /// LoD pixel threshold: a node is fine enough once its projected extent
    /// is at most this many pixels.
    pub tau_star: f64,
    /// Blending skip threshold: contributions below this alpha are ignored.
    pub alpha_star: f64,
    /// Per-gaussian alpha ceiling.
    pub alpha_cap: f64,
    /// Early termination: a pixel stops blending once its transmittance
    /// drops below this.
    pub transmittance_floor: f64,
    /// Hard bound on stereo disparity; must equal 4 tile widths so the four
    /// offset categories cover every disparity.
    pub max_disparity_px: f64,
    /// SH degree evaluated for color, 0..=3.
    pub sh_degree: u8,
    /// Screen margin (px) outside of which tree nodes count as size 0
    /// during LoD search; visibility is settled later by the render cull.
    pub lod_margin_px: f64,
    /// Streaming-traversal block size, in nodes.
    pub block_size: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            tile_size: 4,
            tau_star: 8.0,
            alpha_star: 1.0 / 255.0,
            alpha_cap: 0.99,
            transmittance_floor: 1e-4,
            max_disparity_px: 16.0,
            sh_degree: 1,
            lod_margin_px: 64.0,
            block_size: 4096,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tile_size == 0 {
            return Err(Error::contract("config: tile_size must be positive"));
        }
        if self.max_disparity_px != 4.0 * self.tile_size as f64 {
            return Err(Error::contract(format!(
                "config: max_disparity_px {} must equal 4 x tile_size ({})",
                self.max_disparity_px,
                4 * self.tile_size
            )));
        }
        if !(self.alpha_star > 0.0 && self.alpha_star < self.alpha_cap && self.alpha_cap <= 1.0) {
            return Err(Error::contract(
                "config: need 0 < alpha_star < alpha_cap <= 1",
            ));
        }
        if self.sh_degree > 3 {
            return Err(Error::contract("config: sh_degree > 3"));
        }
        if !self.tau_star.is_finite() || self.tau_star <= 0.0 {
            return Err(Error::contract("config: tau_star must be positive"));
        }
        if self.block_size == 0 {
            return Err(Error::contract("config: block_size must be positive"));
        }
        Ok(())
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau_star = tau;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        assert!(RenderConfig::default().validate().is_ok());
    }

    #[test]
    fn disparity_must_track_tile_size() {
        let mut c = RenderConfig {
            tile_size: 8,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.max_disparity_px = 32.0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn alpha_ordering_enforced() {
        let c = RenderConfig {
            alpha_star: 0.995,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
