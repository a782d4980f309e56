//! Beam-pattern evaluation on direction grids.
//!
//! Gains on a separable grid `{ψ_h} × {ψ_v}` are computed as
//! `|D_v^H C conj(D_h)|²` with `C` the `M_v × M_h` reshape of the beamformer,
//! which is `(D_h^H ⊗ D_v^H) c` in Kronecker order.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::ideal::{CodebookConfig, IdealPattern};
use crate::upa::{
    check_unit_norm, steering_vector, AngleOfDeparture, Axis, CMatrix, CVector, Direction,
    UpaConfig,
};
use crate::error::Result;

/// Precomputed steering matrices for a separable direction grid.
#[derive(Debug, Clone)]
pub struct GridEvaluator {
    m_h: usize,
    m_v: usize,
    /// `M_h × G_h`, conjugated horizontal steering vectors.
    dh_conj: CMatrix,
    /// `G_v × M_v`, adjoint of the vertical steering vectors.
    dv_adj: CMatrix,
}

impl GridEvaluator {
    pub fn new(upa: &UpaConfig, psi_h: &[f64], psi_v: &[f64]) -> Self {
        let mut dh_conj = CMatrix::zeros(upa.m_h, psi_h.len());
        for (k, &p) in psi_h.iter().enumerate() {
            dh_conj.set_column(k, &steering_vector(upa.m_h, p).conjugate());
        }
        let mut dv_adj = CMatrix::zeros(psi_v.len(), upa.m_v);
        for (k, &p) in psi_v.iter().enumerate() {
            dv_adj.set_row(k, &steering_vector(upa.m_v, p).adjoint());
        }
        GridEvaluator {
            m_h: upa.m_h,
            m_v: upa.m_v,
            dh_conj,
            dv_adj,
        }
    }

    /// Complex pattern amplitudes, horizontal index outer.
    pub fn amplitudes(&self, c: &CVector) -> CMatrix {
        let cm = CMatrix::from_column_slice(self.m_v, self.m_h, c.as_slice());
        // G_v × G_h, column-major, so as_slice() is already in Kronecker order
        &self.dv_adj * (cm * &self.dh_conj)
    }

    /// Reference gains, index `k_h * G_v + k_v`.
    pub fn gains(&self, c: &CVector) -> Vec<f64> {
        self.amplitudes(c).iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Directions and ideal patterns used to score candidates.
#[derive(Debug, Clone)]
pub struct MseGrid {
    pub psi_h: Vec<f64>,
    pub psi_v: Vec<f64>,
    evaluator: GridEvaluator,
}

impl MseGrid {
    pub fn from_axes(upa: &UpaConfig, psi_h: Vec<f64>, psi_v: Vec<f64>) -> Self {
        let evaluator = GridEvaluator::new(upa, &psi_h, &psi_v);
        MseGrid {
            psi_h,
            psi_v,
            evaluator,
        }
    }

    /// `mse_grid_per_beam` midpoints per beam width across the service region.
    ///
    /// With a guard band, points outside `[-ψ^B, ψ^B)` that cover the widened
    /// edge regions are appended as long as they do not alias back into the
    /// region modulo 2π.
    pub fn service(upa: &UpaConfig, cb: &CodebookConfig) -> Self {
        let psi_h = service_axis(cb, Axis::Horizontal);
        let psi_v = service_axis(cb, Axis::Vertical);
        Self::from_axes(upa, psi_h, psi_v)
    }

    /// Uniform grid over one full period per axis, starting at the lower edge
    /// of beam `(q, p)`'s region (zero-based). Shifting `(q, p)` shifts the grid
    /// with it, so shift-invariance checks compare like with like.
    pub fn full_period(
        upa: &UpaConfig,
        cb: &CodebookConfig,
        q: usize,
        p: usize,
        points_per_axis: usize,
    ) -> Self {
        let axis = |a: Axis, b: usize| -> Vec<f64> {
            let lo = -a.psi_bound() + b as f64 * cb.beam_width(a);
            (0..points_per_axis)
                .map(|k| lo + (k as f64 + 0.5) * TAU / points_per_axis as f64)
                .collect()
        };
        Self::from_axes(upa, axis(Axis::Horizontal, q), axis(Axis::Vertical, p))
    }

    pub fn len(&self) -> usize {
        self.psi_h.len() * self.psi_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn directions(&self) -> impl Iterator<Item = Direction> + '_ {
        self.psi_h.iter().flat_map(move |&h| {
            self.psi_v.iter().map(move |&v| Direction { psi_h: h, psi_v: v })
        })
    }

    pub fn ideal_values(&self, ideal: &IdealPattern) -> Vec<f64> {
        let in_h: Vec<bool> = self.psi_h.iter().map(|&h| ideal.region.contains_h(h)).collect();
        let in_v: Vec<bool> = self.psi_v.iter().map(|&v| ideal.region.contains_v(v)).collect();
        let mut out = Vec::with_capacity(self.len());
        for &a in &in_h {
            for &b in &in_v {
                out.push(if a && b { ideal.level } else { 0.0 });
            }
        }
        out
    }

    pub fn gains(&self, c: &CVector) -> Vec<f64> {
        self.evaluator.gains(c)
    }

    /// Mean squared error between a beamformer's pattern and precomputed ideal values.
    pub fn mse_against(&self, c: &CVector, ideal_values: &[f64]) -> f64 {
        let amps = self.evaluator.amplitudes(c);
        let sum: f64 = amps
            .iter()
            .zip(ideal_values)
            .map(|(z, t)| (t - z.norm_sqr()).powi(2))
            .sum();
        sum / ideal_values.len() as f64
    }
}

fn service_axis(cb: &CodebookConfig, axis: Axis) -> Vec<f64> {
    let bound = axis.psi_bound();
    let q = cb.beams(axis) as i64;
    let n = cb.mse_grid_per_beam as i64;
    let step = cb.beam_width(axis) / n as f64;
    let point = |k: i64| -bound + (k as f64 + 0.5) * step;
    let mut out: Vec<f64> = (0..q * n).map(point).collect();
    if cb.gamma > 0.0 {
        let extra = (cb.gamma * n as f64).ceil() as i64;
        let span = 2.0 * bound + 2.0 * extra as f64 * step;
        if span <= TAU {
            let below: Vec<f64> = (-extra..0).map(point).collect();
            let above: Vec<f64> = (q * n..q * n + extra).map(point).collect();
            out = below.into_iter().chain(out).chain(above).collect();
        }
    }
    out
}

/// Beam pattern of `c` on the grid, in Kronecker order.
pub fn beam_pattern_vector(c: &CVector, grid: &MseGrid) -> Result<Vec<f64>> {
    check_unit_norm(c)?;
    Ok(grid.gains(c))
}

/// Mean over the grid of `|G_ideal − G(c)|²` for beam `(q, p)` (zero-based).
pub fn mse_to_ideal(
    c: &CVector,
    upa: &UpaConfig,
    cb: &CodebookConfig,
    q: usize,
    p: usize,
    grid: &MseGrid,
) -> Result<f64> {
    check_unit_norm(c)?;
    let ideal = IdealPattern::for_beam(upa.m(), cb, q, p);
    Ok(grid.mse_against(c, &grid.ideal_values(&ideal)))
}

/// One row of the pattern report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternRow {
    pub theta_h: f64,
    pub theta_v: f64,
    pub psi_h: f64,
    pub psi_v: f64,
    /// One-based beam indices.
    pub best_q: usize,
    pub best_p: usize,
    pub gain: f64,
}

#[derive(Debug, Clone)]
pub struct PatternReport {
    pub rows: Vec<PatternRow>,
    pub mean_gain: f64,
    pub min_gain: f64,
}

pub const PATTERN_CSV_HEADER: &str = "theta_h,theta_v,psi_h,psi_v,best_q,best_p,gain";

impl PatternReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(PATTERN_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{},{},{:.17e}\n",
                r.theta_h, r.theta_v, r.psi_h, r.psi_v, r.best_q, r.best_p, r.gain
            ));
        }
        s
    }
}

fn midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (k as f64 + 0.5) * (hi - lo) / n as f64)
        .collect()
}

/// Best-beam gain per physical direction over the sector
/// `[-π/2, π/2) × [-π/4, π/4)`, on a `grid_h × grid_v` midpoint grid.
///
/// `entries` is row-major with `q_v` beams per horizontal index.
pub fn pattern_report(
    entries: &[CVector],
    q_v: usize,
    upa: &UpaConfig,
    grid_h: usize,
    grid_v: usize,
) -> PatternReport {
    let (h0, h1) = AngleOfDeparture::THETA_H_RANGE;
    let (v0, v1) = AngleOfDeparture::THETA_V_RANGE;
    let thetas_h = midpoints(h0, h1, grid_h);
    let thetas_v = midpoints(v0, v1, grid_v);
    let mats: Vec<CMatrix> = entries
        .iter()
        .map(|c| CMatrix::from_column_slice(upa.m_v, upa.m_h, c.as_slice()))
        .collect();

    // best[(kh, kv)] over entries
    let mut best = vec![(0usize, -1.0f64); grid_h * grid_v];
    let mut z = CVector::zeros(upa.m_h);
    for (kv, &tv) in thetas_v.iter().enumerate() {
        let psi_v = PI * tv.sin();
        let dv = steering_vector(upa.m_v, psi_v);
        let dhs: Vec<CVector> = thetas_h
            .iter()
            .map(|&th| steering_vector(upa.m_h, PI * th.sin() * tv.cos()))
            .collect();
        for (e, cm) in mats.iter().enumerate() {
            // z_i = Σ_j conj(dv_j) C[j, i]
            for i in 0..upa.m_h {
                z[i] = cm.column(i).iter().zip(dv.iter()).map(|(c, d)| d.conj() * c).sum();
            }
            for (kh, dh) in dhs.iter().enumerate() {
                let amp: Complex64 = dh.dotc(&z);
                let g = amp.norm_sqr();
                let slot = &mut best[kh * grid_v + kv];
                if g > slot.1 {
                    *slot = (e, g);
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(grid_h * grid_v);
    for (kh, &th) in thetas_h.iter().enumerate() {
        for (kv, &tv) in thetas_v.iter().enumerate() {
            let (e, g) = best[kh * grid_v + kv];
            let dir = AngleOfDeparture { theta_h: th, theta_v: tv }.to_direction();
            rows.push(PatternRow {
                theta_h: th,
                theta_v: tv,
                psi_h: dir.psi_h,
                psi_v: dir.psi_v,
                best_q: e / q_v + 1,
                best_p: e % q_v + 1,
                gain: g,
            });
        }
    }
    summarize(rows)
}

fn summarize(rows: Vec<PatternRow>) -> PatternReport {
    let n = rows.len().max(1) as f64;
    let mean_gain = rows.iter().map(|r| r.gain).sum::<f64>() / n;
    let min_gain = rows.iter().map(|r| r.gain).fold(f64::INFINITY, f64::min);
    PatternReport {
        rows,
        mean_gain,
        min_gain,
    }
}

/// Best-beam gain statistics over the service region in the ψ domain, on a
/// uniform midpoint grid with `per_beam` points per beam width.
pub fn psi_domain_coverage(
    entries: &[CVector],
    q_v: usize,
    upa: &UpaConfig,
    cb: &CodebookConfig,
    per_beam: usize,
) -> PatternReport {
    let bh = Axis::Horizontal.psi_bound();
    let bv = Axis::Vertical.psi_bound();
    let psi_h = midpoints(-bh, bh, cb.q_h * per_beam);
    let psi_v = midpoints(-bv, bv, cb.q_v * per_beam);
    let eval = GridEvaluator::new(upa, &psi_h, &psi_v);
    let mut best = vec![(0usize, -1.0f64); psi_h.len() * psi_v.len()];
    for (e, c) in entries.iter().enumerate() {
        for (slot, g) in best.iter_mut().zip(eval.gains(c)) {
            if g > slot.1 {
                *slot = (e, g);
            }
        }
    }
    let mut rows = Vec::with_capacity(best.len());
    let mut k = 0;
    for &h in &psi_h {
        for &v in &psi_v {
            let (e, g) = best[k];
            k += 1;
            rows.push(PatternRow {
                theta_h: f64::NAN,
                theta_v: f64::NAN,
                psi_h: h,
                psi_v: v,
                best_q: e / q_v + 1,
                best_p: e % q_v + 1,
                gain: g,
            });
        }
    }
    summarize(rows)
}
