//! Uniform planar array geometry.
//!
//! Steering vectors, spatial-frequency directions, beam regions, quantized
//! direction grids and their dictionaries, and the reference gain
//! `G(ψ_h, ψ_v, c) = |(d_h(ψ_h) ⊗ d_v(ψ_v))^H c|²`.
//!
//! Kronecker ordering is fixed across the crate: the horizontal factor is the
//! outer one, so antenna `(i, j)` (column `i`, row `j`) sits at flat index
//! `i * m_v + j`.

use std::f64::consts::{PI, SQRT_2, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Tolerance on `‖c‖₂ = 1` for operations that require a unit-norm beamformer.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_pi(x: f64) -> f64 {
    let w = x - TAU * ((x + PI) / TAU).floor();
    // floor can land exactly on +π after rounding
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Phase of `z` in `[0, 2π)`, with `phase(0) = 0`.
pub fn phase_0_2pi(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        return 0.0;
    }
    let a = z.im.atan2(z.re);
    if a < 0.0 {
        let w = a + TAU;
        if w >= TAU {
            0.0
        } else {
            w
        }
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[serde(alias = "h")]
    Horizontal,
    #[serde(alias = "v")]
    Vertical,
}

impl Axis {
    /// Half-width `ψ^B_a` of the service region along this axis for λ/2 spacing.
    pub fn psi_bound(self) -> f64 {
        match self {
            Axis::Horizontal => PI,
            Axis::Vertical => PI / SQRT_2,
        }
    }
}

/// Array geometry and hybrid front-end resources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpaConfig {
    pub m_h: usize,
    pub m_v: usize,
    /// Number of RF chains `N`.
    pub n_rf: usize,
    /// Phase-shifter resolution in bits.
    pub b_phase: u32,
    #[serde(default = "default_spacing")]
    pub spacing_over_lambda: f64,
}

fn default_spacing() -> f64 {
    0.5
}

impl UpaConfig {
    pub fn new(m_h: usize, m_v: usize, n_rf: usize, b_phase: u32) -> Result<Self> {
        let cfg = UpaConfig {
            m_h,
            m_v,
            n_rf,
            b_phase,
            spacing_over_lambda: 0.5,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_h == 0 || self.m_v == 0 {
            return Err(Error::InvalidConfig(format!(
                "antenna counts must be >= 1 (m_h = {}, m_v = {})",
                self.m_h, self.m_v
            )));
        }
        if self.n_rf == 0 || self.n_rf > self.m() {
            return Err(Error::InvalidConfig(format!(
                "n_rf = {} must satisfy 1 <= n_rf <= M = {}",
                self.n_rf,
                self.m()
            )));
        }
        if self.b_phase == 0 || self.b_phase > 30 {
            return Err(Error::InvalidConfig(format!(
                "b_phase = {} must be in 1..=30",
                self.b_phase
            )));
        }
        if self.spacing_over_lambda != 0.5 {
            return Err(Error::InvalidConfig(format!(
                "spacing_over_lambda = {} is unsupported; only 0.5 is implemented",
                self.spacing_over_lambda
            )));
        }
        Ok(())
    }

    /// Total antenna count `M = M_h · M_v`.
    pub fn m(&self) -> usize {
        self.m_h * self.m_v
    }

    pub fn antennas(&self, axis: Axis) -> usize {
        match axis {
            Axis::Horizontal => self.m_h,
            Axis::Vertical => self.m_v,
        }
    }
}

/// Spatial-frequency direction `(ψ_h, ψ_v)`, both wrapped into `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub psi_h: f64,
    pub psi_v: f64,
}

impl Direction {
    pub fn new(psi_h: f64, psi_v: f64) -> Self {
        Direction {
            psi_h: wrap_pi(psi_h),
            psi_v: wrap_pi(psi_v),
        }
    }
}

/// Physical angle of departure (azimuth, elevation) in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleOfDeparture {
    pub theta_h: f64,
    pub theta_v: f64,
}

impl AngleOfDeparture {
    pub const THETA_H_RANGE: (f64, f64) = (-PI / 2.0, PI / 2.0);
    pub const THETA_V_RANGE: (f64, f64) = (-PI / 4.0, PI / 4.0);

    pub fn in_sector(&self) -> bool {
        let (h0, h1) = Self::THETA_H_RANGE;
        let (v0, v1) = Self::THETA_V_RANGE;
        (h0..h1).contains(&self.theta_h) && (v0..v1).contains(&self.theta_v)
    }

    /// `ψ_h = π sinθ_h cosθ_v`, `ψ_v = π sinθ_v` for half-wavelength spacing.
    pub fn to_direction(&self) -> Direction {
        Direction::new(
            PI * self.theta_h.sin() * self.theta_v.cos(),
            PI * self.theta_v.sin(),
        )
    }
}

/// Rectangle of spatial frequencies `[h_lo, h_hi) × [v_lo, v_hi)`.
///
/// Guard-banded regions may extend past `[-π, π)`; membership is evaluated
/// modulo 2π since beam patterns are 2π-periodic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamRegion {
    pub psi_h_lo: f64,
    pub psi_h_hi: f64,
    pub psi_v_lo: f64,
    pub psi_v_hi: f64,
}

impl BeamRegion {
    pub fn new(psi_h_lo: f64, psi_h_hi: f64, psi_v_lo: f64, psi_v_hi: f64) -> Result<Self> {
        if !(psi_h_lo < psi_h_hi && psi_v_lo < psi_v_hi) {
            return Err(Error::InvalidConfig(format!(
                "empty beam region [{psi_h_lo}, {psi_h_hi}) x [{psi_v_lo}, {psi_v_hi})"
            )));
        }
        Ok(BeamRegion {
            psi_h_lo,
            psi_h_hi,
            psi_v_lo,
            psi_v_hi,
        })
    }

    /// The full service region `B_s = [-π, π) × [-π/√2, π/√2)`.
    pub fn service() -> Self {
        let bh = Axis::Horizontal.psi_bound();
        let bv = Axis::Vertical.psi_bound();
        BeamRegion {
            psi_h_lo: -bh,
            psi_h_hi: bh,
            psi_v_lo: -bv,
            psi_v_hi: bv,
        }
    }

    pub fn width_h(&self) -> f64 {
        self.psi_h_hi - self.psi_h_lo
    }

    pub fn width_v(&self) -> f64 {
        self.psi_v_hi - self.psi_v_lo
    }

    pub fn area(&self) -> f64 {
        self.width_h() * self.width_v()
    }

    pub fn contains_h(&self, psi_h: f64) -> bool {
        periodic_in(psi_h, self.psi_h_lo, self.width_h())
    }

    pub fn contains_v(&self, psi_v: f64) -> bool {
        periodic_in(psi_v, self.psi_v_lo, self.width_v())
    }

    pub fn contains(&self, dir: Direction) -> bool {
        self.contains_h(dir.psi_h) && self.contains_v(dir.psi_v)
    }
}

fn periodic_in(x: f64, lo: f64, width: f64) -> bool {
    if width >= TAU {
        return true;
    }
    let off = (x - lo).rem_euclid(TAU);
    off < width
}

/// Uniform linear array response `d_{M_a}(ψ)`: entry ℓ is `e^{jℓψ}/√M_a`.
pub fn steering_vector(m_a: usize, psi: f64) -> CVector {
    let scale = 1.0 / (m_a as f64).sqrt();
    CVector::from_fn(m_a, |l, _| Complex64::from_polar(scale, l as f64 * psi))
}

/// Planar response `d_{M_h}(ψ_h) ⊗ d_{M_v}(ψ_v)`.
pub fn planar_steering(cfg: &UpaConfig, dir: Direction) -> CVector {
    kron(
        &steering_vector(cfg.m_h, dir.psi_h),
        &steering_vector(cfg.m_v, dir.psi_v),
    )
}

/// Kronecker product of two column vectors, `a` outer.
pub fn kron(a: &CVector, b: &CVector) -> CVector {
    let nb = b.len();
    CVector::from_fn(a.len() * nb, |k, _| a[k / nb] * b[k % nb])
}

pub fn check_unit_norm(c: &CVector) -> Result<()> {
    let norm = c.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::NotUnitNorm {
            norm,
            tol: UNIT_NORM_TOL,
        });
    }
    Ok(())
}

/// Reference gain of a unit-norm beamformer toward `dir`.
pub fn reference_gain(c: &CVector, dir: Direction, cfg: &UpaConfig) -> Result<f64> {
    if c.len() != cfg.m() {
        return Err(Error::DimensionMismatch {
            expected: cfg.m(),
            got: c.len(),
        });
    }
    check_unit_norm(c)?;
    Ok(gain_unchecked(c, dir, cfg))
}

pub(crate) fn gain_unchecked(c: &CVector, dir: Direction, cfg: &UpaConfig) -> f64 {
    let d = planar_steering(cfg, dir);
    d.dotc(c).norm_sqr()
}

/// Quantized beam directions along one axis: `ψ^b[ℓ] = -ψ^B + (b-1)Δ + Δ(ℓ - 0.5)/L`,
/// ordered by beam index then by ℓ.
pub fn direction_grid(q_count: usize, l_count: usize, psi_bound: f64) -> Vec<f64> {
    let delta = 2.0 * psi_bound / q_count as f64;
    let mut out = Vec::with_capacity(q_count * l_count);
    for b in 0..q_count {
        for l in 0..l_count {
            out.push(-psi_bound + b as f64 * delta + delta * (l as f64 + 0.5) / l_count as f64);
        }
    }
    out
}

/// Steering vectors at the quantized directions of one axis.
#[derive(Debug, Clone)]
pub struct DirectionDictionary {
    pub axis: Axis,
    pub q_count: usize,
    pub l_count: usize,
    /// `M_a × (L_a·Q_a)`; column `b·L_a + ℓ` is the ℓ-th direction of beam `b`.
    pub columns: CMatrix,
}

impl DirectionDictionary {
    /// Columns belonging to beam `b` (zero-based).
    pub fn block(&self, b: usize) -> CMatrix {
        self.columns
            .columns(b * self.l_count, self.l_count)
            .into_owned()
    }

    /// Frobenius norm of `D D^H - (L Q / M_a) I`.
    pub fn gram_deviation(&self) -> f64 {
        let m_a = self.columns.nrows();
        let scale = (self.l_count * self.q_count) as f64 / m_a as f64;
        let gram = &self.columns * self.columns.adjoint();
        let target = CMatrix::identity(m_a, m_a) * Complex64::new(scale, 0.0);
        (gram - target).norm()
    }
}

pub fn build_dictionary(
    axis: Axis,
    m_a: usize,
    q_count: usize,
    l_count: usize,
    psi_bound: f64,
) -> DirectionDictionary {
    let grid = direction_grid(q_count, l_count, psi_bound);
    let mut columns = CMatrix::zeros(m_a, grid.len());
    for (k, &psi) in grid.iter().enumerate() {
        columns.set_column(k, &steering_vector(m_a, psi));
    }
    DirectionDictionary {
        axis,
        q_count,
        l_count,
        columns,
    }
}

/// Index of the nearest point of `{0, 2π/2^B, …}` to `phase` under circular
/// distance; exact ties go to the smaller phase value.
pub fn quantize_phase_index(phase: f64, b_phase: u32) -> u64 {
    let levels = 1u64 << b_phase;
    let step = TAU / levels as f64;
    let x = phase.rem_euclid(TAU) / step;
    let lo = x.floor();
    let frac = x - lo;
    let lo = (lo as u64) % levels;
    let hi = (lo + 1) % levels;
    if frac > 0.5 {
        hi
    } else if frac < 0.5 {
        lo
    } else {
        lo.min(hi)
    }
}

pub fn quantize_phase(phase: f64, b_phase: u32) -> f64 {
    let levels = 1u64 << b_phase;
    quantize_phase_index(phase, b_phase) as f64 * TAU / levels as f64
}

/// Rounds every entry's phase to `Z_{2^B}`, keeping magnitudes.
pub fn quantize_phases(f: &CMatrix, b_phase: u32) -> CMatrix {
    f.map(|z| Complex64::from_polar(z.norm(), quantize_phase(phase_0_2pi(z), b_phase)))
}
