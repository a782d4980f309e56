//! Codebook construction.
//!
//! The proposed codebook scores every candidate `(g_h, g_v)` for beam `(1,1)`
//! by the MSE of its pursuit-built beamformer against the ideal pattern, keeps
//! the best one, and derives the remaining `Q - 1` beams by phase-shifting the
//! analog matrix: `c_{q,p} = T(F, Δ_h^q, Δ_v^p) v`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::beamformer::Beamformer;
use crate::error::{Error, Result};
use crate::ideal::{ideal_level_clipped, CodebookConfig, IdealPattern};
use crate::omp::{enumerate_candidates, omp_design, target_beamformer, CandidateSpace};
use crate::pattern::{pattern_report, psi_domain_coverage, MseGrid};
use crate::upa::{
    check_unit_norm, kron, planar_steering, quantize_phases, steering_vector, Axis, CMatrix,
    CVector, Direction, UpaConfig,
};

/// Physical-angle grid used for the coverage summary stored with a codebook.
pub const SUMMARY_THETA_GRID: (usize, usize) = (180, 90);
/// ψ-domain points per beam width for the coverage summary.
pub const SUMMARY_PSI_PER_BEAM: usize = 20;

/// Which subset of the candidate space to score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sweep {
    Full,
    /// Every k-th candidate in enumeration order, starting at index 0.
    Strided(u64),
    List(Vec<u64>),
    /// `n` distinct candidates drawn with the design seed.
    Random(u64),
}

impl Sweep {
    pub fn describe(&self) -> String {
        match self {
            Sweep::Full => "full".into(),
            Sweep::Strided(k) => format!("strided({k})"),
            Sweep::List(l) => format!(
                "list({})",
                l.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
            ),
            Sweep::Random(n) => format!("random({n})"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let inner = |prefix: &str| -> Option<&str> {
            s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')
        };
        let num = |t: &str| -> Result<u64> {
            t.trim()
                .parse::<u64>()
                .map_err(|_| Error::InvalidConfig(format!("bad number `{t}` in sweep `{s}`")))
        };
        if s == "full" {
            Ok(Sweep::Full)
        } else if let Some(k) = inner("strided") {
            Ok(Sweep::Strided(num(k)?))
        } else if let Some(n) = inner("random") {
            Ok(Sweep::Random(num(n)?))
        } else if let Some(l) = inner("list") {
            Ok(Sweep::List(
                l.split([' ', ',']).filter(|t| !t.is_empty()).map(num).collect::<Result<_>>()?,
            ))
        } else {
            Err(Error::InvalidConfig(format!("unknown sweep `{s}`")))
        }
    }

    fn plan(&self, space: &CandidateSpace, seed: u64) -> Result<Vec<u64>> {
        let total = space.count();
        let out: Vec<u64> = match self {
            Sweep::Full => (0..total).collect(),
            Sweep::Strided(0) => {
                return Err(Error::InvalidConfig("stride must be >= 1".into()));
            }
            Sweep::Strided(k) => (0..total).step_by(*k as usize).collect(),
            Sweep::List(list) => {
                if let Some(bad) = list.iter().find(|&&i| i >= total) {
                    return Err(Error::InvalidConfig(format!(
                        "candidate index {bad} out of range (space has {total})"
                    )));
                }
                list.clone()
            }
            Sweep::Random(n) => {
                let n = (*n).min(total) as usize;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut picked: Vec<u64> = rand::seq::index::sample(&mut rng, total as usize, n)
                    .into_iter()
                    .map(|i| i as u64)
                    .collect();
                picked.sort_unstable();
                picked
            }
        };
        if out.is_empty() {
            return Err(Error::EmptySweep);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOptions {
    /// Round pursuit columns to `Z_{2^B}`.
    pub quantize: bool,
    /// Re-round phase-shifted analog matrices to `Z_{2^B}`.
    pub requantize_shift: bool,
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_every: u64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            quantize: true,
            requantize_shift: false,
            checkpoint: None,
            checkpoint_every: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookKind {
    Proposed,
    AllOnes,
    KpDft,
}

impl CodebookKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CodebookKind::Proposed => "proposed",
            CodebookKind::AllOnes => "allones",
            CodebookKind::KpDft => "kp_dft",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(CodebookKind::Proposed),
            "allones" | "all_ones" => Ok(CodebookKind::AllOnes),
            "kp_dft" | "kpdft" => Ok(CodebookKind::KpDft),
            other => Err(Error::InvalidConfig(format!("unknown codebook kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildStats {
    pub candidates_evaluated: u64,
    pub best_index: u64,
    /// MSE of the selected beam-(1,1) candidate on the selection grid.
    pub best_mse: f64,
    /// Largest per-beam MSE change caused by re-rounding shifted phases.
    pub requantize_mse_delta: Option<f64>,
    /// The ideal level was clipped to 1 (`QΛ > M`).
    pub ideal_clipped: bool,
}

/// Best-beam coverage of a codebook.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Coverage {
    /// Mean over the physical sector grid.
    pub mean_gain: f64,
    pub min_gain: f64,
    /// Mean over the ψ-domain service-region grid.
    pub mean_gain_psi: f64,
    pub min_gain_psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub kind: CodebookKind,
    pub upa: UpaConfig,
    pub cb: CodebookConfig,
    /// Row-major: entry `(q, p)` (zero-based) at `q * q_v + p`.
    pub entries: Vec<Beamformer>,
    /// Phase indices of the selected `(ĝ_h, ĝ_v)`.
    pub selected: Option<(Vec<usize>, Vec<usize>)>,
    pub quantize: bool,
    pub requantize_shift: bool,
    pub sweep: String,
    pub seed: u64,
    pub stats: BuildStats,
    pub coverage: Coverage,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry `(q, p)`, zero-based.
    pub fn entry(&self, q: usize, p: usize) -> &Beamformer {
        &self.entries[q * self.cb.q_v + p]
    }

    pub fn composites(&self) -> Vec<CVector> {
        self.entries.iter().map(|e| e.composite.clone()).collect()
    }

    pub fn compute_coverage(&self) -> Coverage {
        let comps = self.composites();
        let (gh, gv) = SUMMARY_THETA_GRID;
        let theta = pattern_report(&comps, self.cb.q_v, &self.upa, gh, gv);
        let psi = psi_domain_coverage(&comps, self.cb.q_v, &self.upa, &self.cb, SUMMARY_PSI_PER_BEAM);
        Coverage {
            mean_gain: theta.mean_gain,
            min_gain: theta.min_gain,
            mean_gain_psi: psi.mean_gain,
            min_gain_psi: psi.min_gain,
        }
    }

    /// Largest `|MSE(q,p) − MSE(1,1)|` over all entries, each measured against
    /// its own ideal pattern on a full-period grid anchored at its region.
    pub fn shift_invariance_residual(&self, points_per_axis: usize) -> Result<f64> {
        let base = self.full_period_mse(0, 0, points_per_axis)?;
        let mut worst = 0.0f64;
        for q in 0..self.cb.q_h {
            for p in 0..self.cb.q_v {
                let mse = self.full_period_mse(q, p, points_per_axis)?;
                worst = worst.max((mse - base).abs());
            }
        }
        Ok(worst)
    }

    pub fn full_period_mse(&self, q: usize, p: usize, points_per_axis: usize) -> Result<f64> {
        let grid = MseGrid::full_period(&self.upa, &self.cb, q, p, points_per_axis);
        crate::pattern::mse_to_ideal(&self.entry(q, p).composite, &self.upa, &self.cb, q, p, &grid)
    }
}

/// `T(F, υ, κ) = F ⊙ (√M d_M(υ, κ) 1^T)`: shifts every column's beam pattern by `(υ, κ)`.
pub fn phase_shift(f: &CMatrix, upa: &UpaConfig, dpsi_h: f64, dpsi_v: f64) -> CMatrix {
    let scale = (upa.m() as f64).sqrt();
    let d = planar_steering(upa, Direction { psi_h: dpsi_h, psi_v: dpsi_v });
    let mut out = f.clone();
    for mut col in out.column_iter_mut() {
        for (z, s) in col.iter_mut().zip(d.iter()) {
            *z *= s * scale;
        }
    }
    out
}

/// Directions of beam 1 along `axis`, widened by the guard band.
fn first_beam_directions(cb: &CodebookConfig, axis: Axis) -> Vec<f64> {
    let l = cb.grid_size(axis);
    let delta = cb.beam_width(axis);
    let lo = -axis.psi_bound() - cb.gamma * delta;
    let width = (1.0 + 2.0 * cb.gamma) * delta;
    (0..l).map(|k| lo + width * (k as f64 + 0.5) / l as f64).collect()
}

/// `D_{a,1}` over the (possibly guard-banded) first beam region.
pub fn first_beam_block(upa: &UpaConfig, cb: &CodebookConfig, axis: Axis) -> CMatrix {
    let m_a = upa.antennas(axis);
    let dirs = first_beam_directions(cb, axis);
    let mut out = CMatrix::zeros(m_a, dirs.len());
    for (k, &psi) in dirs.iter().enumerate() {
        out.set_column(k, &steering_vector(m_a, psi));
    }
    out
}

struct CandidateScorer {
    upa: UpaConfig,
    space: CandidateSpace,
    d_h1: CMatrix,
    d_v1: CMatrix,
    grid: MseGrid,
    ideal: Vec<f64>,
    quantize: bool,
}

impl CandidateScorer {
    fn new(upa: &UpaConfig, cb: &CodebookConfig, quantize: bool) -> Result<Self> {
        let space = enumerate_candidates(cb.l_h, cb.l_v, cb.i_phases)?;
        let grid = MseGrid::service(upa, cb);
        let ideal = grid.ideal_values(&IdealPattern::for_beam(upa.m(), cb, 0, 0));
        Ok(CandidateScorer {
            upa: *upa,
            space,
            d_h1: first_beam_block(upa, cb, Axis::Horizontal),
            d_v1: first_beam_block(upa, cb, Axis::Vertical),
            grid,
            ideal,
            quantize,
        })
    }

    fn build(&self, index: u64) -> Result<Beamformer> {
        let (gh, gv) = self.space.pair(index);
        let target = target_beamformer(&gh, &gv, &self.d_h1, &self.d_v1)?;
        omp_design(&target, &self.upa, self.quantize)
    }

    fn score(&self, index: u64) -> f64 {
        match self.build(index) {
            Ok(bf) => self.grid.mse_against(&bf.composite, &self.ideal),
            Err(_) => f64::INFINITY,
        }
    }
}

fn better(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    match a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) {
        std::cmp::Ordering::Greater => b,
        _ => a,
    }
}

struct Checkpoint {
    fingerprint: String,
    position: usize,
    best: (f64, u64),
}

impl Checkpoint {
    fn load(path: &Path, fingerprint: &str) -> Option<Self> {
        let text = fs::read_to_string(path).ok()?;
        let mut lines = text.lines();
        if lines.next()? != fingerprint {
            return None;
        }
        let mut f = lines.next()?.split_whitespace();
        let position = f.next()?.parse().ok()?;
        let idx = f.next()?.parse().ok()?;
        let mse = f64::from_bits(u64::from_str_radix(f.next()?, 16).ok()?);
        Some(Checkpoint {
            fingerprint: fingerprint.to_string(),
            position,
            best: (mse, idx),
        })
    }

    fn store(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(
            &tmp,
            format!(
                "{}\n{} {} {:016x}\n",
                self.fingerprint,
                self.position,
                self.best.1,
                self.best.0.to_bits()
            ),
        )?;
        fs::rename(tmp, path)?;
        Ok(())
    }
}

/// Designs the proposed codebook.
pub fn design_codebook(
    upa: &UpaConfig,
    cb: &CodebookConfig,
    sweep: &Sweep,
    seed: u64,
    opts: &DesignOptions,
) -> Result<Codebook> {
    upa.validate()?;
    cb.validate(upa)?;
    let scorer = CandidateScorer::new(upa, cb, opts.quantize)?;
    let plan = sweep.plan(&scorer.space, seed)?;

    let fingerprint = format!("{upa:?}|{cb:?}|{}|{seed}|{}", sweep.describe(), opts.quantize);
    let mut position = 0usize;
    let mut best = (f64::INFINITY, u64::MAX);
    if let Some(path) = &opts.checkpoint {
        if let Some(cp) = Checkpoint::load(path, &fingerprint) {
            position = cp.position.min(plan.len());
            best = cp.best;
        }
    }
    let chunk = opts.checkpoint_every.max(1) as usize;
    while position < plan.len() {
        let end = (position + chunk).min(plan.len());
        let local = plan[position..end]
            .par_iter()
            .map(|&idx| (scorer.score(idx), idx))
            .reduce(|| (f64::INFINITY, u64::MAX), better);
        best = better(best, local);
        position = end;
        if let Some(path) = &opts.checkpoint {
            Checkpoint {
                fingerprint: fingerprint.clone(),
                position,
                best,
            }
            .store(path)?;
        }
    }
    if !best.0.is_finite() {
        return Err(Error::DegenerateBaseband);
    }

    let base = scorer.build(best.1)?;
    let (gh, gv) = scorer.space.indices(best.1);
    let mut stats = BuildStats {
        candidates_evaluated: plan.len() as u64,
        best_index: best.1,
        best_mse: best.0,
        requantize_mse_delta: None,
        ideal_clipped: ideal_level_clipped(upa.m(), cb),
    };
    let entries = expand(&base, upa, cb, opts.requantize_shift)?;
    if opts.requantize_shift {
        let continuous = expand(&base, upa, cb, false)?;
        stats.requantize_mse_delta = Some(max_mse_delta(&continuous, &entries, upa, cb)?);
    }
    Ok(finish(Codebook {
        kind: CodebookKind::Proposed,
        upa: *upa,
        cb: *cb,
        entries,
        selected: Some((gh, gv)),
        quantize: opts.quantize,
        requantize_shift: opts.requantize_shift,
        sweep: sweep.describe(),
        seed,
        stats,
        coverage: Coverage::default(),
    }))
}

fn finish(mut cb: Codebook) -> Codebook {
    cb.coverage = cb.compute_coverage();
    cb
}

/// Entries `T(F, qΔ_h, pΔ_v) v` for every beam, row-major.
pub fn expand(
    base: &Beamformer,
    upa: &UpaConfig,
    cb: &CodebookConfig,
    requantize: bool,
) -> Result<Vec<Beamformer>> {
    let dh = cb.beam_width(Axis::Horizontal);
    let dv = cb.beam_width(Axis::Vertical);
    let mut out = Vec::with_capacity(cb.q());
    for q in 0..cb.q_h {
        for p in 0..cb.q_v {
            let mut f = phase_shift(&base.analog, upa, q as f64 * dh, p as f64 * dv);
            let mut v = base.baseband.clone();
            if requantize {
                f = quantize_phases(&f, upa.b_phase);
                let norm = (&f * &v).norm();
                if norm <= f64::MIN_POSITIVE {
                    return Err(Error::ZeroNorm("requantized beamformer"));
                }
                v.unscale_mut(norm);
            }
            let mut bf = Beamformer::new(f, v, base.quantized && (requantize || (q == 0 && p == 0)))?;
            bf.regularized = base.regularized;
            out.push(bf);
        }
    }
    Ok(out)
}

fn max_mse_delta(
    a: &[Beamformer],
    b: &[Beamformer],
    upa: &UpaConfig,
    cb: &CodebookConfig,
) -> Result<f64> {
    let grid = MseGrid::service(upa, cb);
    let mut worst = 0.0f64;
    for q in 0..cb.q_h {
        for p in 0..cb.q_v {
            let k = q * cb.q_v + p;
            let ideal = grid.ideal_values(&IdealPattern::for_beam(upa.m(), cb, q, p));
            check_unit_norm(&b[k].composite)?;
            let d = grid.mse_against(&b[k].composite, &ideal)
                - grid.mse_against(&a[k].composite, &ideal);
            worst = worst.max(d.abs());
        }
    }
    Ok(worst)
}

/// Lengths `⌈256 / Q_a⌉` of the all-ones equal-gain vectors.
pub fn allones_lengths(q_h: usize, q_v: usize) -> (usize, usize) {
    (256usize.div_ceil(q_h), 256usize.div_ceil(q_v))
}

/// The same pipeline restricted to the single all-ones candidate.
pub fn baseline_allones(upa: &UpaConfig, q_h: usize, q_v: usize) -> Result<Codebook> {
    let (l_h, l_v) = allones_lengths(q_h, q_v);
    let cb = CodebookConfig::new(q_h, q_v, l_h, l_v, 1);
    let mut book = design_codebook(upa, &cb, &Sweep::Full, 0, &DesignOptions::default())?;
    book.kind = CodebookKind::AllOnes;
    Ok(book)
}

/// 2D Kronecker-product DFT codebook: entry `(q, p)` steers to `(2πq/Q_h, 2πp/Q_v)`
/// for one-based `q, p`.
pub fn baseline_kp_dft(upa: &UpaConfig, q_h: usize, q_v: usize) -> Result<Codebook> {
    upa.validate()?;
    if q_h == 0 || q_v == 0 {
        return Err(Error::InvalidConfig("q_h and q_v must be >= 1".into()));
    }
    let mut entries = Vec::with_capacity(q_h * q_v);
    for q in 1..=q_h {
        let dh = steering_vector(upa.m_h, std::f64::consts::TAU * q as f64 / q_h as f64);
        for p in 1..=q_v {
            let dv = steering_vector(upa.m_v, std::f64::consts::TAU * p as f64 / q_v as f64);
            entries.push(Beamformer::analog_only(kron(&dh, &dv)));
        }
    }
    let cb = CodebookConfig::new(q_h, q_v, 1, 1, 1);
    Ok(finish(Codebook {
        kind: CodebookKind::KpDft,
        upa: *upa,
        cb,
        entries,
        selected: None,
        quantize: false,
        requantize_shift: false,
        sweep: "none".into(),
        seed: 0,
        stats: BuildStats::default(),
        coverage: Coverage::default(),
    }))
}

/// Applies `T(F, υ, κ)` to a beamformer and returns the shifted composite.
pub fn shifted_composite(bf: &Beamformer, upa: &UpaConfig, dpsi_h: f64, dpsi_v: f64) -> CVector {
    phase_shift(&bf.analog, upa, dpsi_h, dpsi_v) * &bf.baseband
}
