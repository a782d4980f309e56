//! Hybrid beamformer construction by orthogonal matching pursuit.
//!
//! For a pair of equal-gain vectors `(g_h, g_v)` the unconstrained optimum is
//! `c̃ = (D_{h,1} g_h ⊗ D_{v,1} g_v) / ‖·‖`. The pursuit picks `N` phase-only
//! analog columns one at a time, each matched to the phases of the current
//! residual `c̃ - F v`, and refits the baseband vector after every pick.
//!
//! The baseband refit maximizes the generalized Rayleigh quotient
//! `u^H F^H (Γ_h ⊗ Γ_v) F u / u^H F^H F u` with `Γ_a = D_{a,1} g_a g_a^H D_{a,1}^H`.
//! `Γ_h ⊗ Γ_v = w w^H` is rank one (`w ∝ c̃`), so the principal generalized
//! eigenvector is `(F^H F)^{-1} F^H w` and no eigensolver is needed.

use nalgebra::Cholesky;
use num_complex::Complex64;

use crate::beamformer::Beamformer;
use crate::error::{Error, Result};
use crate::upa::{kron, phase_0_2pi, quantize_phases, CMatrix, CVector, UpaConfig};

/// Residuals with norm below this are treated as exactly zero.
pub const ZERO_RESIDUAL: f64 = 1e-12;

/// Relative pivot threshold that triggers the ridge term in the baseband solve.
const RIDGE_TRIGGER: f64 = 1e-12;
const RIDGE_SCALE: f64 = 1e-10;

/// Unit-modulus vector with phases on the `I`-point grid and first entry 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualGainVector {
    pub values: CVector,
    pub phase_indices: Vec<usize>,
}

impl EqualGainVector {
    pub fn from_indices(phase_indices: Vec<usize>, i_levels: usize) -> Result<Self> {
        if phase_indices.is_empty() {
            return Err(Error::InvalidConfig("equal-gain vector must be non-empty".into()));
        }
        if phase_indices[0] != 0 {
            return Err(Error::InvalidConfig(
                "first entry of an equal-gain vector must have phase index 0".into(),
            ));
        }
        if let Some(&bad) = phase_indices.iter().find(|&&k| k >= i_levels) {
            return Err(Error::InvalidConfig(format!(
                "phase index {bad} out of range for I = {i_levels}"
            )));
        }
        let step = std::f64::consts::TAU / i_levels as f64;
        let values = CVector::from_iterator(
            phase_indices.len(),
            phase_indices
                .iter()
                .map(|&k| Complex64::from_polar(1.0, k as f64 * step)),
        );
        Ok(EqualGainVector {
            values,
            phase_indices,
        })
    }

    pub fn ones(len: usize) -> Self {
        EqualGainVector {
            values: CVector::from_element(len, Complex64::new(1.0, 0.0)),
            phase_indices: vec![0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `(D_{h,1} g_h ⊗ D_{v,1} g_v) / ‖·‖`.
pub fn target_beamformer(
    g_h: &EqualGainVector,
    g_v: &EqualGainVector,
    d_h1: &CMatrix,
    d_v1: &CMatrix,
) -> Result<CVector> {
    if d_h1.ncols() != g_h.len() {
        return Err(Error::DimensionMismatch {
            expected: d_h1.ncols(),
            got: g_h.len(),
        });
    }
    if d_v1.ncols() != g_v.len() {
        return Err(Error::DimensionMismatch {
            expected: d_v1.ncols(),
            got: g_v.len(),
        });
    }
    let w = kron(&(d_h1 * &g_h.values), &(d_v1 * &g_v.values));
    let norm = w.norm();
    if norm <= f64::MIN_POSITIVE {
        return Err(Error::ZeroNorm("target beamformer"));
    }
    Ok(w.unscale(norm))
}

/// Baseband vector maximizing `|w^H F v|²` subject to `‖F v‖ = 1`.
///
/// Returns the vector and whether a ridge term was needed. The phase is the
/// one that makes `w^H F v` real and positive.
pub fn rayleigh_baseband(f: &CMatrix, w: &CVector) -> Result<(CVector, bool)> {
    if f.nrows() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: f.nrows(),
            got: w.len(),
        });
    }
    let gram = f.adjoint() * f;
    let rhs = f.ad_mul(w);
    if rhs.norm() <= 1e-14 * f.norm() * w.norm() {
        return Err(Error::DegenerateBaseband);
    }
    let (u, regularized) = solve_hermitian(gram, &rhs)?;
    let fu = f * &u;
    let norm = fu.norm();
    if norm <= f64::MIN_POSITIVE {
        return Err(Error::DegenerateBaseband);
    }
    Ok((u.unscale(norm), regularized))
}

fn solve_hermitian(gram: CMatrix, rhs: &CVector) -> Result<(CVector, bool)> {
    let n = gram.nrows();
    let trace: f64 = (0..n).map(|k| gram[(k, k)].re).sum();
    if let Some(chol) = Cholesky::new(gram.clone()) {
        let l = chol.l_dirty();
        let min_pivot = (0..n).map(|k| l[(k, k)].norm_sqr()).fold(f64::INFINITY, f64::min);
        if min_pivot > RIDGE_TRIGGER * trace {
            return Ok((chol.solve(rhs), false));
        }
    }
    let mut ridged = gram;
    for k in 0..n {
        ridged[(k, k)] += Complex64::new(RIDGE_SCALE * trace, 0.0);
    }
    let chol = Cholesky::new(ridged).ok_or(Error::DegenerateBaseband)?;
    Ok((chol.solve(rhs), true))
}

/// Power-iteration route to the same baseband vector, kept for verification.
///
/// Iterates on `(F^H F)^{-1} F^H (w w^H) F` from a fixed start vector and
/// returns the result normalized so `‖F v‖ = 1`.
pub fn rayleigh_baseband_power(f: &CMatrix, w: &CVector, iterations: usize) -> Result<CVector> {
    let n = f.ncols();
    let gram = f.adjoint() * f;
    let chol = Cholesky::new(gram).ok_or(Error::DegenerateBaseband)?;
    let fw = f.ad_mul(w);
    let b = CMatrix::from_fn(n, n, |r, c| fw[r] * fw[c].conj());
    let a = chol.solve(&b);
    let mut u = CVector::from_fn(n, |k, _| Complex64::new(1.0, 0.5 * k as f64));
    for _ in 0..iterations.max(1) {
        let next = &a * &u;
        let norm = next.norm();
        if norm <= f64::MIN_POSITIVE {
            return Err(Error::DegenerateBaseband);
        }
        u = next.unscale(norm);
    }
    let norm = (f * &u).norm();
    Ok(u.unscale(norm))
}

/// Intermediate state of the pursuit after `iteration` analog columns.
#[derive(Debug, Clone)]
pub struct OmpState {
    pub target: CVector,
    pub analog: CMatrix,
    pub baseband: CVector,
    pub residual: CVector,
    pub iteration: usize,
    pub regularized: bool,
}

impl OmpState {
    pub fn new(target: CVector) -> Self {
        let m = target.len();
        OmpState {
            residual: target.clone(),
            target,
            analog: CMatrix::zeros(m, 0),
            baseband: CVector::zeros(0),
            iteration: 0,
            regularized: false,
        }
    }

    /// Adds one analog column matched to the residual phases and refits the baseband.
    pub fn step(&mut self, b_phase: Option<u32>) -> Result<()> {
        let m = self.target.len();
        let amp = 1.0 / (m as f64).sqrt();
        let zero = self.residual.norm() <= ZERO_RESIDUAL;
        let mut column = CMatrix::from_fn(m, 1, |r, _| {
            let phase = if zero { 0.0 } else { phase_0_2pi(self.residual[r]) };
            Complex64::from_polar(amp, phase)
        });
        if let Some(b) = b_phase {
            column = quantize_phases(&column, b);
        }
        let n = self.analog.ncols();
        let mut analog = std::mem::replace(&mut self.analog, CMatrix::zeros(0, 0))
            .insert_column(n, Complex64::new(0.0, 0.0));
        analog.set_column(n, &column.column(0));
        let (v, ridge) = rayleigh_baseband(&analog, &self.target)?;
        self.residual = &self.target - &analog * &v;
        self.analog = analog;
        self.baseband = v;
        self.regularized |= ridge;
        self.iteration += 1;
        Ok(())
    }

    pub fn composite(&self) -> CVector {
        &self.analog * &self.baseband
    }

    /// `|c̃^H F v|²`, the objective the baseband refit maximizes.
    pub fn objective(&self) -> f64 {
        self.target.dotc(&self.composite()).norm_sqr()
    }
}

/// Runs `N = upa.n_rf` pursuit iterations toward a unit-norm `target`.
pub fn omp_design(target: &CVector, upa: &UpaConfig, quantize: bool) -> Result<Beamformer> {
    if target.len() != upa.m() {
        return Err(Error::DimensionMismatch {
            expected: upa.m(),
            got: target.len(),
        });
    }
    crate::upa::check_unit_norm(target)?;
    let b = quantize.then_some(upa.b_phase);
    let mut state = OmpState::new(target.clone());
    for _ in 0..upa.n_rf {
        state.step(b)?;
    }
    let mut bf = Beamformer::new(state.analog, state.baseband, quantize)?;
    bf.regularized = state.regularized;
    Ok(bf)
}

/// The candidate space `G^I_{L_h} × G^I_{L_v}` in lexicographic order of the
/// free phase indices (`g_h[1..]` most significant, then `g_v[1..]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateSpace {
    pub l_h: usize,
    pub l_v: usize,
    pub i_levels: usize,
    count: u64,
}

impl CandidateSpace {
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Phase indices of candidate `index`, horizontal then vertical.
    pub fn indices(&self, index: u64) -> (Vec<usize>, Vec<usize>) {
        let i = self.i_levels as u64;
        let free = self.l_h - 1 + self.l_v - 1;
        let mut digits = vec![0usize; free];
        let mut rest = index;
        for d in digits.iter_mut().rev() {
            *d = (rest % i) as usize;
            rest /= i;
        }
        let mut h = vec![0usize; self.l_h];
        let mut v = vec![0usize; self.l_v];
        h[1..].copy_from_slice(&digits[..self.l_h - 1]);
        v[1..].copy_from_slice(&digits[self.l_h - 1..]);
        (h, v)
    }

    pub fn pair(&self, index: u64) -> (EqualGainVector, EqualGainVector) {
        let (h, v) = self.indices(index);
        (
            EqualGainVector::from_indices(h, self.i_levels).expect("indices in range"),
            EqualGainVector::from_indices(v, self.i_levels).expect("indices in range"),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = (EqualGainVector, EqualGainVector)> + '_ {
        (0..self.count).map(move |k| self.pair(k))
    }
}

/// Enumerates the `I^{L_h-1} · I^{L_v-1}` candidate pairs.
pub fn enumerate_candidates(l_h: usize, l_v: usize, i_levels: usize) -> Result<CandidateSpace> {
    if l_h == 0 || l_v == 0 || i_levels == 0 {
        return Err(Error::InvalidConfig(
            "L_h, L_v and I must all be >= 1".into(),
        ));
    }
    let free = (l_h - 1 + l_v - 1) as u32;
    let count = (i_levels as u64).checked_pow(free).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "candidate space I^(L_h+L_v-2) = {i_levels}^{free} overflows"
        ))
    })?;
    Ok(CandidateSpace {
        l_h,
        l_v,
        i_levels,
        count,
    })
}
