//! Ricean channels, codebook sounding and Monte Carlo rate evaluation.
//!
//! Every realization draws from its own ChaCha stream: the channel from
//! `(seed, realization)`, the sounding noise from `(seed, snr, realization)`.
//! Codebooks simulated with the same seed therefore see identical channels and
//! identical noise samples, and results do not depend on the worker count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::ideal::rate_upper_bound;
use crate::upa::{planar_steering, AngleOfDeparture, CVector, Direction, UpaConfig};

pub const DEFAULT_TAU_T: f64 = 2.0;
pub const DEFAULT_SNR_GRID_DB: [f64; 8] = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0];
pub const RATE_CSV_HEADER: &str =
    "snr_db,codebook,mean_rate,stderr,misalign_rate,resound_rate,feedback_bits";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelScenario {
    pub k_factor_db: f64,
    /// Number of NLOS paths `R`.
    pub n_nlos: usize,
    pub los_present: bool,
    pub normalize_to_m: bool,
}

impl ChannelScenario {
    /// LOS plus three NLOS paths, K = 13.5 dB.
    pub fn scenario1() -> Self {
        ChannelScenario {
            k_factor_db: 13.5,
            n_nlos: 3,
            los_present: true,
            normalize_to_m: true,
        }
    }

    /// Three NLOS paths, no LOS.
    pub fn scenario2() -> Self {
        ChannelScenario {
            los_present: false,
            ..Self::scenario1()
        }
    }

    /// A single LOS path (the `K → ∞`, `R = 0` limit).
    pub fn los_only() -> Self {
        ChannelScenario {
            k_factor_db: f64::INFINITY,
            n_nlos: 0,
            los_present: true,
            normalize_to_m: true,
        }
    }

    pub fn k_linear(&self) -> f64 {
        10f64.powf(self.k_factor_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.los_present && self.n_nlos == 0 {
            return Err(Error::InvalidConfig(
                "scenario has neither a LOS path nor NLOS paths".into(),
            ));
        }
        if self.k_factor_db.is_nan() {
            return Err(Error::InvalidConfig("k_factor_db is NaN".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CVector,
    pub los: Option<Direction>,
    pub nlos: Vec<Direction>,
}

fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> Direction {
    let (h0, h1) = AngleOfDeparture::THETA_H_RANGE;
    let (v0, v1) = AngleOfDeparture::THETA_V_RANGE;
    AngleOfDeparture {
        theta_h: rng.random_range(h0..h1),
        theta_v: rng.random_range(v0..v1),
    }
    .to_direction()
}

/// `h = √(MK/(1+K)) α_0 d(ψ_0) + √(M/(R(1+K))) Σ_r α_r d(ψ_r)`, `α ~ CN(0,1)`.
pub fn generate_channel<R: Rng + ?Sized>(
    sc: &ChannelScenario,
    upa: &UpaConfig,
    rng: &mut R,
) -> ChannelRealization {
    let m = upa.m() as f64;
    let mut h = CVector::zeros(upa.m());
    let mut los = None;
    let mut nlos = Vec::with_capacity(sc.n_nlos);

    let (los_amp, nlos_amp) = match (sc.los_present, sc.n_nlos) {
        (true, 0) => (m.sqrt(), 0.0),
        (false, r) => (0.0, (m / r as f64).sqrt()),
        (true, r) => {
            let k = sc.k_linear();
            if k.is_infinite() {
                (m.sqrt(), 0.0)
            } else {
                ((m * k / (1.0 + k)).sqrt(), (m / (r as f64 * (1.0 + k))).sqrt())
            }
        }
    };
    if sc.los_present {
        let dir = random_direction(rng);
        let mut alpha = cn01(rng);
        if sc.n_nlos == 0 {
            // single path: only the phase of α_0 matters
            alpha /= alpha.norm();
        }
        h.axpy(alpha * los_amp, &planar_steering(upa, dir), 1.0.into());
        los = Some(dir);
    }
    for _ in 0..sc.n_nlos {
        let dir = random_direction(rng);
        let alpha = cn01(rng);
        h.axpy(alpha * nlos_amp, &planar_steering(upa, dir), 1.0.into());
        nlos.push(dir);
    }
    if sc.normalize_to_m {
        let norm = h.norm();
        if norm > 0.0 {
            h *= Complex64::from(m.sqrt() / norm);
        }
    }
    ChannelRealization { h, los, nlos }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoundingResult {
    /// Zero-based `(q, p)` of the selected beam.
    pub best: (usize, usize),
    pub second: (usize, usize),
    /// Ratio of the two largest test statistics after the final cycle.
    pub ratio: f64,
    pub resound_count: u32,
    /// Per-cycle noisy samples, row-major beam order.
    pub observations: Vec<Vec<Complex64>>,
}

/// Indices of the largest and second-largest statistics and their ratio.
/// Ties go to the lower index.
pub fn top_two(stats: &[f64]) -> (usize, usize, f64) {
    let mut best = 0;
    for (k, &s) in stats.iter().enumerate() {
        if s > stats[best] {
            best = k;
        }
    }
    let mut second = None::<usize>;
    for (k, &s) in stats.iter().enumerate() {
        if k != best && second.is_none_or(|j| s > stats[j]) {
            second = Some(k);
        }
    }
    match second {
        None => (best, best, f64::INFINITY),
        Some(j) => (best, j, stats[best] / stats[j]),
    }
}

/// Whether the top-two ratio triggers another sounding cycle.
pub fn needs_resound(ratio: f64, tau_t: f64) -> bool {
    ratio < tau_t
}

/// Noise-free received amplitudes `h^H c_{q,p}`.
pub fn beam_amplitudes(h: &CVector, book: &Codebook) -> Vec<Complex64> {
    book.entries.iter().map(|e| h.dotc(&e.composite)).collect()
}

/// `argmax_{q,p} |h^H c_{q,p}|²`, ties to the lowest index.
pub fn noiseless_best(h: &CVector, book: &Codebook) -> usize {
    let g: Vec<f64> = beam_amplitudes(h, book).iter().map(|z| z.norm_sqr()).collect();
    top_two(&g).0
}

fn draw_noise<R: Rng + ?Sized>(rng: &mut R, q: usize) -> [Vec<Complex64>; 2] {
    // both cycles are always drawn so that paired runs consume equal randomness
    let a = (0..q).map(|_| cn01(rng)).collect();
    let b = (0..q).map(|_| cn01(rng)).collect();
    [a, b]
}

fn sound_with_noise(
    amps: &[Complex64],
    q_v: usize,
    rho: f64,
    tau_t: f64,
    noise: &[Vec<Complex64>; 2],
) -> SoundingResult {
    let s = rho.sqrt();
    let obs1: Vec<Complex64> = amps.iter().zip(&noise[0]).map(|(a, n)| a * s + n).collect();
    let mut stats: Vec<f64> = obs1.iter().map(|y| y.norm_sqr()).collect();
    let (mut best, mut second, mut ratio) = top_two(&stats);
    let mut observations = vec![obs1];
    let mut resound_count = 0;
    if needs_resound(ratio, tau_t) {
        let obs2: Vec<Complex64> = amps.iter().zip(&noise[1]).map(|(a, n)| a * s + n).collect();
        for (st, y) in stats.iter_mut().zip(&obs2) {
            *st += y.norm_sqr();
        }
        (best, second, ratio) = top_two(&stats);
        observations.push(obs2);
        resound_count = 1;
    }
    SoundingResult {
        best: (best / q_v, best % q_v),
        second: (second / q_v, second % q_v),
        ratio,
        resound_count,
        observations,
    }
}

/// One sounding cycle, plus a second one combined non-coherently
/// (`|y_1|² + |y_2|²`) when the top-two ratio falls below `tau_t`.
pub fn sound_and_select<R: Rng + ?Sized>(
    h: &CVector,
    book: &Codebook,
    rho: f64,
    tau_t: f64,
    rng: &mut R,
) -> Result<SoundingResult> {
    if book.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    if rho.is_nan() || rho <= 0.0 || tau_t.is_nan() || tau_t < 1.0 {
        return Err(Error::InvalidConfig(format!(
            "need rho > 0 and tau_t >= 1 (rho = {rho}, tau_t = {tau_t})"
        )));
    }
    let noise = draw_noise(rng, book.len());
    Ok(sound_with_noise(&beam_amplitudes(h, book), book.cb.q_v, rho, tau_t, &noise))
}

/// `⌈log2(Q_h Q_v)⌉`.
pub fn feedback_bits(q_h: usize, q_v: usize) -> u32 {
    let q = (q_h * q_v).max(1);
    q.next_power_of_two().trailing_zeros()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Per-realization result at one SNR point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub rate: f64,
    pub misaligned: bool,
    pub resounded: bool,
    pub feedback_bits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub scenario: ChannelScenario,
    pub n_realizations: usize,
    pub master_seed: u64,
    pub tau_t: f64,
}

impl SimParams {
    pub fn new(scenario: ChannelScenario, n_realizations: usize, master_seed: u64) -> Self {
        SimParams {
            scenario,
            n_realizations,
            master_seed,
            tau_t: DEFAULT_TAU_T,
        }
    }

    fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.n_realizations == 0 {
            return Err(Error::InvalidConfig("n_realizations must be >= 1".into()));
        }
        if self.tau_t.is_nan() || self.tau_t < 1.0 {
            return Err(Error::InvalidConfig(format!("tau_t = {} must be >= 1", self.tau_t)));
        }
        Ok(())
    }
}

pub fn channel_rng(master_seed: u64, realization: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(realization);
    rng
}

pub fn noise_rng(master_seed: u64, snr_db: f64, realization: u64) -> ChaCha8Rng {
    let key = master_seed ^ snr_db.to_bits().wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(29);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(realization);
    rng
}

/// Outcomes of every realization at one SNR point, in realization order.
pub fn simulate_outcomes(book: &Codebook, params: &SimParams, snr_db: f64) -> Result<Vec<Outcome>> {
    params.validate()?;
    if book.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    let rho = db_to_linear(snr_db);
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::InvalidConfig(format!("SNR {snr_db} dB is not positive")));
    }
    let bits = feedback_bits(book.cb.q_h, book.cb.q_v);
    let out = (0..params.n_realizations as u64)
        .into_par_iter()
        .map(|r| {
            let ch = generate_channel(&params.scenario, &book.upa, &mut channel_rng(params.master_seed, r));
            let amps = beam_amplitudes(&ch.h, book);
            let noise = draw_noise(&mut noise_rng(params.master_seed, snr_db, r), book.len());
            let res = sound_with_noise(&amps, book.cb.q_v, rho, params.tau_t, &noise);
            let sel = res.best.0 * book.cb.q_v + res.best.1;
            let ideal = top_two(&amps.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>()).0;
            Outcome {
                rate: (1.0 + rho * amps[sel].norm_sqr()).log2(),
                misaligned: sel != ideal,
                resounded: res.resound_count > 0,
                feedback_bits: bits + res.resound_count,
            }
        })
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub snr_db: f64,
    pub codebook: String,
    pub mean_rate: f64,
    pub stderr: f64,
    pub misalign_rate: f64,
    pub resound_rate: f64,
    pub feedback_bits: f64,
}

/// Mean and standard error of the mean, summed in order.
pub fn mean_stderr(xs: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
    for x in xs {
        n += 1;
        s += x;
        s2 += x * x;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let mean = s / nf;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

pub fn summarize_outcomes(snr_db: f64, label: &str, outcomes: &[Outcome]) -> RateRow {
    let n = outcomes.len() as f64;
    let (mean_rate, stderr) = mean_stderr(outcomes.iter().map(|o| o.rate));
    RateRow {
        snr_db,
        codebook: label.to_string(),
        mean_rate,
        stderr,
        misalign_rate: outcomes.iter().filter(|o| o.misaligned).count() as f64 / n,
        resound_rate: outcomes.iter().filter(|o| o.resounded).count() as f64 / n,
        feedback_bits: outcomes.iter().map(|o| o.feedback_bits as f64).sum::<f64>() / n,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn to_csv(&self, with_header: bool) -> String {
        let mut s = String::new();
        if with_header {
            s.push_str(RATE_CSV_HEADER);
            s.push('\n');
        }
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.snr_db,
                r.codebook,
                r.mean_rate,
                r.stderr,
                r.misalign_rate,
                r.resound_rate,
                r.feedback_bits
            ));
        }
        s
    }
}

pub fn evaluate_rate(
    book: &Codebook,
    label: &str,
    params: &SimParams,
    snr_grid_db: &[f64],
) -> Result<RateTable> {
    let mut rows = Vec::with_capacity(snr_grid_db.len());
    for &snr in snr_grid_db {
        let out = simulate_outcomes(book, params, snr)?;
        rows.push(summarize_outcomes(snr, label, &out));
    }
    Ok(RateTable { rows })
}

/// Mean and standard error of the per-realization rate difference `a − b`.
pub fn paired_difference(a: &[Outcome], b: &[Outcome]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(mean_stderr(a.iter().zip(b).map(|(x, y)| x.rate - y.rate)))
}

/// `R^up` at `‖h‖² = M`.
pub fn upper_bound(book: &Codebook, snr_db: f64) -> f64 {
    let m = book.upa.m();
    rate_upper_bound(db_to_linear(snr_db), m as f64, m, &book.cb)
}

/// Runs `f` on a dedicated pool with `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{baseline_kp_dft, design_codebook, DesignOptions, Sweep};
    use crate::ideal::CodebookConfig;
    use crate::upa::reference_gain;
    use approx::assert_abs_diff_eq;

    #[test]
    fn k_factor_conversion() {
        assert_abs_diff_eq!(ChannelScenario::scenario1().k_linear(), 22.387, epsilon = 1e-3);
    }

    #[test]
    fn normalized_channels_have_norm_m() {
        let upa = UpaConfig::new(8, 4, 2, 6).unwrap();
        for sc in [ChannelScenario::scenario1(), ChannelScenario::scenario2(), ChannelScenario::los_only()] {
            for r in 0..200 {
                let ch = generate_channel(&sc, &upa, &mut channel_rng(3, r));
                assert_abs_diff_eq!(ch.h.norm_squared(), 32.0, epsilon = 1e-9);
                assert_eq!(ch.los.is_some(), sc.los_present);
                assert_eq!(ch.nlos.len(), sc.n_nlos);
            }
        }
    }

    #[test]
    fn los_only_is_scaled_steering_vector() {
        let upa = UpaConfig::new(6, 3, 1, 6).unwrap();
        let sc = ChannelScenario { normalize_to_m: false, ..ChannelScenario::los_only() };
        let ch = generate_channel(&sc, &upa, &mut channel_rng(1, 0));
        let d = planar_steering(&upa, ch.los.unwrap());
        assert_abs_diff_eq!(ch.h.norm_squared(), 18.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.dotc(&ch.h).norm(), 18f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn unnormalized_power_averages_to_m() {
        let upa = UpaConfig::new(4, 2, 1, 6).unwrap();
        for base in [ChannelScenario::scenario1(), ChannelScenario::scenario2()] {
            let sc = ChannelScenario { normalize_to_m: false, ..base };
            let n = 100_000;
            let total: f64 = (0..n)
                .map(|r| generate_channel(&sc, &upa, &mut channel_rng(9, r)).h.norm_squared())
                .sum();
            let mean = total / n as f64;
            assert!((mean / 8.0 - 1.0).abs() < 0.02, "mean power {mean}");
        }
    }

    #[test]
    fn threshold_edge_accepts() {
        let (b, s, r) = top_two(&[4.0, 2.0]);
        assert_eq!((b, s), (0, 1));
        assert_eq!(r, 2.0);
        assert!(!needs_resound(r, 2.0));
        assert!(needs_resound(1.999, 2.0));
        assert_eq!(top_two(&[1.0, 3.0, 3.0]).0, 1);
        assert_eq!(top_two(&[5.0]).2, f64::INFINITY);
        let (b, s, _) = top_two(&[2.0, 2.0, 1.0]);
        assert_eq!((b, s), (0, 1));
    }

    #[test]
    fn feedback_bit_examples() {
        assert_eq!(feedback_bits(8, 4), 5);
        assert_eq!(feedback_bits(1, 1), 0);
        assert_eq!(feedback_bits(8, 8), 6);
        assert_eq!(feedback_bits(3, 1), 2);
    }

    fn small_book() -> Codebook {
        let upa = UpaConfig::new(8, 4, 3, 6).unwrap();
        let cb = CodebookConfig::new(4, 2, 2, 2, 3);
        design_codebook(&upa, &cb, &Sweep::Full, 0, &DesignOptions::default()).unwrap()
    }

    #[test]
    fn noiseless_selection_is_brute_force_argmax() {
        let book = small_book();
        for r in 0..100 {
            let ch = generate_channel(&ChannelScenario::scenario1(), &book.upa, &mut channel_rng(4, r));
            let brute: Vec<f64> = book
                .entries
                .iter()
                .map(|e| e.composite.dotc(&ch.h).norm_sqr())
                .collect();
            let mut best = 0;
            for k in 1..brute.len() {
                if brute[k] > brute[best] {
                    best = k;
                }
            }
            assert_eq!(noiseless_best(&ch.h, &book), best);
            // very high SNR sounding agrees with the noiseless choice
            let res = sound_and_select(&ch.h, &book, 1e12, 2.0, &mut noise_rng(4, 0.0, r)).unwrap();
            assert_eq!(res.best.0 * book.cb.q_v + res.best.1, best);
        }
        // LOS-only: weighting by the channel reduces to the reference gain
        let ch = generate_channel(&ChannelScenario::los_only(), &book.upa, &mut channel_rng(5, 0));
        let dir = ch.los.unwrap();
        let k = noiseless_best(&ch.h, &book);
        let g = reference_gain(&book.entries[k].composite, dir, &book.upa).unwrap();
        for e in &book.entries {
            assert!(reference_gain(&e.composite, dir, &book.upa).unwrap() <= g + 1e-12);
        }
    }

    #[test]
    fn sounding_invariants() {
        let book = small_book();
        let ch = generate_channel(&ChannelScenario::scenario1(), &book.upa, &mut channel_rng(6, 0));
        for r in 0..50 {
            let res = sound_and_select(&ch.h, &book, 1.0, 2.0, &mut noise_rng(6, 0.0, r)).unwrap();
            assert!(res.ratio >= 1.0);
            assert!(res.resound_count <= 1);
            assert_eq!(res.observations.len(), 1 + res.resound_count as usize);
            assert_eq!(res.resound_count == 1, res.observations.len() == 2);
        }
        assert!(sound_and_select(&ch.h, &book, 0.0, 2.0, &mut channel_rng(0, 0)).is_err());
    }

    #[test]
    fn rate_vanishes_at_low_snr_and_misalignment_drops_with_snr() {
        let book = small_book();
        let params = SimParams::new(ChannelScenario::scenario1(), 2000, 11);
        let t = evaluate_rate(&book, "small", &params, &[-60.0, 0.0, 20.0]).unwrap();
        assert!(t.rows[0].mean_rate < 1e-4);
        assert!(t.rows[1].misalign_rate > t.rows[2].misalign_rate);
        assert!(t.rows[1].resound_rate >= t.rows[2].resound_rate);
        for r in &t.rows {
            assert!(r.feedback_bits >= 3.0 && r.feedback_bits <= 4.0);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let book = small_book();
        let params = SimParams::new(ChannelScenario::scenario2(), 300, 5);
        let a = with_workers(1, || evaluate_rate(&book, "x", &params, &[0.0, 10.0])).unwrap().unwrap();
        let b = with_workers(3, || evaluate_rate(&book, "x", &params, &[0.0, 10.0])).unwrap().unwrap();
        assert_eq!(a.to_csv(true), b.to_csv(true));
    }

    #[test]
    fn paired_runs_share_noise() {
        let upa = UpaConfig::new(8, 4, 1, 6).unwrap();
        let a = baseline_kp_dft(&upa, 4, 2).unwrap();
        let params = SimParams::new(ChannelScenario::scenario1(), 50, 2);
        let x = simulate_outcomes(&a, &params, 5.0).unwrap();
        let y = simulate_outcomes(&a, &params, 5.0).unwrap();
        let (d, se) = paired_difference(&x, &y).unwrap();
        assert_eq!((d, se), (0.0, 0.0));
    }

    #[test]
    fn mean_stderr_oracle() {
        let (m, s) = mean_stderr([1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(m, 2.5, epsilon = 1e-15);
        // sample variance 5/3, stderr sqrt(5/12)
        assert_abs_diff_eq!(s, (5.0f64 / 12.0).sqrt(), epsilon = 1e-15);
    }
}
