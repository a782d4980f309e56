//! Ideal beam patterns.
//!
//! The service region is split into `Q_h × Q_v` equal rectangles. The ideal
//! pattern of beam `(q, p)` is flat inside its rectangle and zero elsewhere;
//! the flat level spends the whole `(2π)²/M` pattern-energy budget on the
//! rectangle, `QΛ/M` with `Λ = (π/ψ^B_h)(π/ψ^B_v)`, clipped to 1. With a
//! guard band the rectangle grows by `γΔ` on each side and the level drops
//! by `(1+2γ)²`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::upa::{Axis, BeamRegion, Direction, UpaConfig};

/// Codebook shape and design-grid parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodebookConfig {
    pub q_h: usize,
    pub q_v: usize,
    #[serde(default)]
    pub gamma: f64,
    pub l_h: usize,
    pub l_v: usize,
    /// Number of candidate phase levels `I` for the equal-gain vectors.
    pub i_phases: usize,
    #[serde(default = "default_mse_grid")]
    pub mse_grid_per_beam: usize,
}

fn default_mse_grid() -> usize {
    20
}

impl CodebookConfig {
    pub fn new(q_h: usize, q_v: usize, l_h: usize, l_v: usize, i_phases: usize) -> Self {
        CodebookConfig {
            q_h,
            q_v,
            gamma: 0.0,
            l_h,
            l_v,
            i_phases,
            mse_grid_per_beam: default_mse_grid(),
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn q(&self) -> usize {
        self.q_h * self.q_v
    }

    pub fn l(&self) -> usize {
        self.l_h * self.l_v
    }

    pub fn beams(&self, axis: Axis) -> usize {
        match axis {
            Axis::Horizontal => self.q_h,
            Axis::Vertical => self.q_v,
        }
    }

    pub fn grid_size(&self, axis: Axis) -> usize {
        match axis {
            Axis::Horizontal => self.l_h,
            Axis::Vertical => self.l_v,
        }
    }

    /// Beam width `Δ_a = 2ψ^B_a / Q_a`.
    pub fn beam_width(&self, axis: Axis) -> f64 {
        2.0 * axis.psi_bound() / self.beams(axis) as f64
    }

    /// Checks structural invariants; `Q ≥ M` is reported as [`Error::Infeasible`].
    pub fn validate(&self, upa: &UpaConfig) -> Result<()> {
        if self.q_h == 0 || self.q_v == 0 {
            return Err(Error::InvalidConfig("q_h and q_v must be >= 1".into()));
        }
        if self.l_h == 0 || self.l_v == 0 {
            return Err(Error::InvalidConfig("l_h and l_v must be >= 1".into()));
        }
        if self.i_phases == 0 {
            return Err(Error::InvalidConfig("i_phases must be >= 1".into()));
        }
        if self.mse_grid_per_beam == 0 {
            return Err(Error::InvalidConfig("mse_grid_per_beam must be >= 1".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gamma = {} must be finite and >= 0",
                self.gamma
            )));
        }
        if self.q() >= upa.m() {
            return Err(Error::Infeasible {
                q: self.q(),
                m: upa.m(),
            });
        }
        Ok(())
    }

    /// `L·Q < M`: the direction dictionary has fewer atoms than antennas, so
    /// `D D^H` is rank deficient. Allowed, since `L = 1` gives the plain
    /// steering-vector codebook.
    pub fn undercomplete(&self, upa: &UpaConfig) -> bool {
        self.l() * self.q() < upa.m()
    }
}

/// `Λ = Λ_h Λ_v` with `Λ_a = π / ψ^B_a`.
pub fn lambda() -> f64 {
    (PI / Axis::Horizontal.psi_bound()) * (PI / Axis::Vertical.psi_bound())
}

/// Rectangle `(q, p)` (zero-based) of the service-region partition.
pub fn beam_region(cfg: &CodebookConfig, q: usize, p: usize) -> BeamRegion {
    let (bh, bv) = (Axis::Horizontal.psi_bound(), Axis::Vertical.psi_bound());
    let (dh, dv) = (cfg.beam_width(Axis::Horizontal), cfg.beam_width(Axis::Vertical));
    BeamRegion {
        psi_h_lo: -bh + q as f64 * dh,
        psi_h_hi: -bh + (q + 1) as f64 * dh,
        psi_v_lo: -bv + p as f64 * dv,
        psi_v_hi: -bv + (p + 1) as f64 * dv,
    }
}

/// All `Q_h × Q_v` beam regions, indexed `[q][p]` (zero-based).
pub fn partition_regions(cfg: &CodebookConfig) -> Vec<Vec<BeamRegion>> {
    (0..cfg.q_h)
        .map(|q| (0..cfg.q_v).map(|p| beam_region(cfg, q, p)).collect())
        .collect()
}

/// Widens each axis from `[lo, lo+Δ)` to `lo + Δ[-γ, 1+γ)`.
pub fn guard_band_region(region: &BeamRegion, gamma: f64) -> BeamRegion {
    let gh = gamma * region.width_h();
    let gv = gamma * region.width_v();
    BeamRegion {
        psi_h_lo: region.psi_h_lo - gh,
        psi_h_hi: region.psi_h_hi + gh,
        psi_v_lo: region.psi_v_lo - gv,
        psi_v_hi: region.psi_v_hi + gv,
    }
}

/// In-region level of the ideal pattern: `min{1, QΛ / (M (1+2γ)²)}`.
pub fn ideal_level(m: usize, cfg: &CodebookConfig) -> f64 {
    let widen = (1.0 + 2.0 * cfg.gamma).powi(2);
    (cfg.q() as f64 * lambda() / (m as f64 * widen)).min(1.0)
}

/// Whether the level of [`ideal_level`] was clipped to 1 (the `M ≥ QΛ` premise fails).
pub fn ideal_level_clipped(m: usize, cfg: &CodebookConfig) -> bool {
    let widen = (1.0 + 2.0 * cfg.gamma).powi(2);
    cfg.q() as f64 * lambda() / (m as f64 * widen) > 1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealPattern {
    pub region: BeamRegion,
    pub level: f64,
}

impl IdealPattern {
    /// Ideal pattern of beam `(q, p)` (zero-based), guard band included.
    pub fn for_beam(m: usize, cfg: &CodebookConfig, q: usize, p: usize) -> Self {
        IdealPattern {
            region: guard_band_region(&beam_region(cfg, q, p), cfg.gamma),
            level: ideal_level(m, cfg),
        }
    }

    pub fn value(&self, dir: Direction) -> f64 {
        if self.region.contains(dir) {
            self.level
        } else {
            0.0
        }
    }
}

/// Ideal pattern of beam `(q, p)` (one-based) sampled on the dictionary grid,
/// in the same Kronecker order as `D_h ⊗ D_v` (horizontal outer).
pub fn ideal_vector(cfg: &CodebookConfig, upa: &UpaConfig, q: usize, p: usize) -> Result<Vec<f64>> {
    if q == 0 || q > cfg.q_h || p == 0 || p > cfg.q_v {
        return Err(Error::IndexOutOfRange {
            q,
            p,
            q_h: cfg.q_h,
            q_v: cfg.q_v,
        });
    }
    let level = ideal_level(upa.m(), cfg);
    let nh = cfg.l_h * cfg.q_h;
    let nv = cfg.l_v * cfg.q_v;
    let mut out = vec![0.0; nh * nv];
    for ih in 0..nh {
        if ih / cfg.l_h != q - 1 {
            continue;
        }
        for iv in 0..nv {
            if iv / cfg.l_v == p - 1 {
                out[ih * nv + iv] = level;
            }
        }
    }
    Ok(out)
}

/// `R^up = log2(1 + ρ ‖h‖² Q Λ / M)`.
pub fn rate_upper_bound(rho: f64, h_norm_sq: f64, m: usize, cfg: &CodebookConfig) -> f64 {
    (1.0 + rho * h_norm_sq * cfg.q() as f64 * lambda() / m as f64).log2()
}
